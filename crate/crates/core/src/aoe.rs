//! Aggregation of embeddings: every template is embedded, then the group's
//! embeddings are aggregated into one representation.
//!
//! The learner minimizes
//! `‖E − WᵀX‖_F² + ξ Σ_g ‖E_g − r_g 1ᵀ‖_F²`
//! by cycling through a Procrustes W-step, a per-group E-step
//! `E_g = T_S(WᵀX_g + ξ r_g 1ᵀ)` and a per-group R-step `r_g = T_S(E_g 1)`.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{GroupPartition, TemplateMatrix};
use crate::error::{GmvError, Result};
use crate::procrustes::{orthogonal_procrustes, random_orthonormal};
use crate::ternary::{codes_matrix, ternarize, ProjectionMatrix, TernaryCode};
use crate::{check_dims, Convergence, MONOTONE_SLACK};

#[derive(Debug, Clone, PartialEq)]
pub struct AoeParams {
    pub code_len: usize,
    pub sparsity: usize,
    pub xi: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Seed of the initial projection. Keep it distinct from the seed that
    /// generated synthetic templates, which shares the same Gaussian stream.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoeState {
    pub w: ProjectionMatrix,
    /// One embedding per template, in template order.
    pub embeddings: Vec<TernaryCode>,
    /// One representation per group.
    pub representations: Vec<TernaryCode>,
    pub xi: f64,
    /// Objective at initialization followed by one value per sweep.
    pub objective_trace: Vec<f64>,
    pub convergence: Convergence,
}

fn check_state(x: &TemplateMatrix, partition: &GroupPartition, state: &AoeState) -> Result<()> {
    if state.w.dim() != x.dim() {
        return Err(GmvError::param("projection and templates disagree on d"));
    }
    if state.embeddings.len() != x.len() || partition.num_members() != x.len() {
        return Err(GmvError::param("embeddings, templates and partition disagree on N"));
    }
    if state.representations.len() != partition.num_groups() {
        return Err(GmvError::param("one representation per group required"));
    }
    let l = state.w.code_len();
    if state
        .embeddings
        .iter()
        .chain(&state.representations)
        .any(|c| c.len() != l)
    {
        return Err(GmvError::param("code length differs from projection width"));
    }
    Ok(())
}

/// Full AoE objective for `state`.
pub fn aoe_objective(x: &TemplateMatrix, partition: &GroupPartition, state: &AoeState) -> Result<f64> {
    check_state(x, partition, state)?;
    let projected = state.w.matrix().tr_mul(x.matrix());
    Ok(objective_from_projection(
        &projected,
        partition,
        &state.embeddings,
        &state.representations,
        state.xi,
    ))
}

fn objective_from_projection(
    projected: &DMatrix<f64>,
    partition: &GroupPartition,
    embeddings: &[TernaryCode],
    representations: &[TernaryCode],
    xi: f64,
) -> f64 {
    let mut fidelity = 0.0;
    let mut aggregation = 0.0;
    for (g, members) in partition.groups().iter().enumerate() {
        let r = representations[g].values();
        for &i in members {
            let e = embeddings[i].values();
            let p = projected.column(i);
            for k in 0..e.len() {
                let ek = f64::from(e[k]);
                fidelity += (ek - p[k]).powi(2);
                aggregation += f64::from(e[k] - r[k]).powi(2);
            }
        }
    }
    fidelity + xi * aggregation
}

fn e_step_projected(
    projected: &DMatrix<f64>,
    members: &[usize],
    r_g: &TernaryCode,
    xi: f64,
    s: usize,
) -> Result<Vec<TernaryCode>> {
    let r = r_g.to_dvector();
    members
        .iter()
        .map(|&i| {
            let arg: DVector<f64> = projected.column(i) + &r * xi;
            ternarize(arg.as_slice(), s)
        })
        .collect()
}

/// Embeddings of one group: column `i` is `T_S(Wᵀx_i + ξ r_g)`.
pub fn aoe_e_step(
    x_g: &DMatrix<f64>,
    w: &ProjectionMatrix,
    r_g: &TernaryCode,
    xi: f64,
    s: usize,
) -> Result<Vec<TernaryCode>> {
    if x_g.nrows() != w.dim() || r_g.len() != w.code_len() {
        return Err(GmvError::param("E-step dimension mismatch"));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(GmvError::param(format!("ξ = {xi} must be finite and ≥ 0")));
    }
    let projected = w.matrix().tr_mul(x_g);
    let members: Vec<usize> = (0..x_g.ncols()).collect();
    e_step_projected(&projected, &members, r_g, xi, s)
}

/// Group representation `T_S(E_g 1)`.
pub fn aoe_r_step(e_g: &[TernaryCode], s: usize) -> Result<TernaryCode> {
    let len = e_g
        .first()
        .map(TernaryCode::len)
        .ok_or_else(|| GmvError::param("R-step needs at least one embedding"))?;
    let mut sum = vec![0.0; len];
    for e in e_g {
        if e.len() != len {
            return Err(GmvError::param("embeddings of unequal length"));
        }
        for (acc, v) in sum.iter_mut().zip(e.values()) {
            *acc += f64::from(*v);
        }
    }
    ternarize(&sum, s)
}

fn r_step_all(partition: &GroupPartition, embeddings: &[TernaryCode], s: usize) -> Result<Vec<TernaryCode>> {
    partition
        .groups()
        .par_iter()
        .map(|members| {
            let e_g: Vec<TernaryCode> = members.iter().map(|&i| embeddings[i].clone()).collect();
            aoe_r_step(&e_g, s)
        })
        .collect()
}

/// Jointly learn `W`, the embeddings and the group representations.
pub fn learn_aoe(x: &TemplateMatrix, partition: &GroupPartition, params: &AoeParams) -> Result<AoeState> {
    let (d, n) = (x.dim(), x.len());
    check_dims(d, params.code_len, params.sparsity)?;
    if partition.num_members() != n {
        return Err(GmvError::param(format!(
            "partition covers {} members, templates have {n}",
            partition.num_members()
        )));
    }
    if !(params.xi >= 0.0 && params.xi.is_finite()) {
        return Err(GmvError::param(format!("ξ = {} must be finite and ≥ 0", params.xi)));
    }
    let (l, s, xi) = (params.code_len, params.sparsity, params.xi);

    let mut w = random_orthonormal(d, l, params.seed)?;
    let mut projected = w.matrix().tr_mul(x.matrix());
    let mut embeddings = projected
        .column_iter()
        .map(|c| ternarize(c.clone_owned().as_slice(), s))
        .collect::<Result<Vec<_>>>()?;
    let mut representations = r_step_all(partition, &embeddings, s)?;

    let mut prev = objective_from_projection(&projected, partition, &embeddings, &representations, xi);
    let mut trace = vec![prev];
    let mut convergence = Convergence::default();

    for sweep in 1..=params.max_iters {
        // W-step
        let e_mat = codes_matrix(&embeddings, l);
        w = orthogonal_procrustes(&(x.matrix() * e_mat.transpose()))?;
        projected = w.matrix().tr_mul(x.matrix());

        // E-step, independent per group
        let per_group = partition
            .groups()
            .par_iter()
            .zip(representations.par_iter())
            .map(|(members, r_g)| e_step_projected(&projected, members, r_g, xi, s))
            .collect::<Result<Vec<_>>>()?;
        for (members, codes) in partition.groups().iter().zip(per_group) {
            for (&i, c) in members.iter().zip(codes) {
                embeddings[i] = c;
            }
        }

        // R-step
        representations = r_step_all(partition, &embeddings, s)?;

        let obj = objective_from_projection(&projected, partition, &embeddings, &representations, xi);
        if !obj.is_finite() {
            return Err(GmvError::numerical(format!("AoE objective became {obj} at sweep {sweep}")));
        }
        trace.push(obj);
        convergence.sweeps = sweep;
        if obj > prev * (1.0 + MONOTONE_SLACK) {
            warn!("AoE objective increased at sweep {sweep}: {prev} -> {obj}");
            convergence.violations += 1;
        } else {
            let rel = if prev > 0.0 { (prev - obj) / prev } else { 0.0 };
            if rel < params.rel_tol {
                convergence.converged = true;
                debug!("AoE converged after {sweep} sweeps, objective {obj}");
                break;
            }
        }
        prev = obj;
    }

    Ok(AoeState {
        w,
        embeddings,
        representations,
        xi,
        objective_trace: trace,
        convergence,
    })
}
