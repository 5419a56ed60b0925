//! Verification and open-set identification metrics, plus the
//! reconstruction errors an honest-but-curious server could achieve.
//!
//! Scores are negated Euclidean distances between ternary codes, so larger
//! means more similar and the verification test accepts when `score > τ`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{QueryLabel, QuerySet, TemplateMatrix};
use crate::error::{GmvError, Result};
use crate::model::GroupModel;
use crate::ternary::{reconstruct_unit, TernaryCode};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    /// Score of each genuine trial with the group it truly belongs to.
    pub genuine: Vec<(f64, usize)>,
    pub impostor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub auc: f64,
    pub pfn_at_pfp: f64,
    pub epsilon: f64,
    /// `(p_fp, p_fn)` pairs, sorted by increasing `p_fp`.
    pub roc_points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationReport {
    pub pfn_step1: f64,
    pub p_epsilon: f64,
    pub dir: f64,
    /// Distance threshold of the operating point used for `p_epsilon`.
    pub threshold: f64,
    pub accepted_genuine: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenSetDecision {
    pub accepted: bool,
    pub group: Option<usize>,
    pub min_distance: f64,
}

/// Mean reconstruction error with the count of degenerate codes left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEstimate {
    pub value: f64,
    pub used: usize,
    pub skipped: usize,
}

fn squared_distance(a: &TernaryCode, b: &TernaryCode) -> i64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| i64::from(x - y).pow(2))
        .sum()
}

/// `−‖query − r_g‖₂`.
pub fn score(query: &TernaryCode, r_g: &TernaryCode) -> Result<f64> {
    if query.len() != r_g.len() {
        return Err(GmvError::param(format!(
            "code lengths differ: {} vs {}",
            query.len(),
            r_g.len()
        )));
    }
    Ok(-(squared_distance(query, r_g) as f64).sqrt())
}

/// Empirical ROC, AUC and `p_fn` at `p_fp = epsilon`.
pub fn verify_curve(scores: &ScoreSet, epsilon: f64) -> Result<VerificationReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(GmvError::param(format!("ε = {epsilon} must lie in (0, 1)")));
    }
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(GmvError::param("ROC needs genuine and impostor scores"));
    }
    let mut genuine: Vec<f64> = scores.genuine.iter().map(|(s, _)| *s).collect();
    let mut impostor = scores.impostor.clone();
    if genuine.iter().chain(&impostor).any(|s| s.is_nan()) {
        return Err(GmvError::param("scores contain NaN"));
    }
    genuine.sort_by(f64::total_cmp);
    impostor.sort_by(f64::total_cmp);
    let (ng, ni) = (genuine.len() as f64, impostor.len() as f64);

    let mut thresholds: Vec<f64> = genuine.iter().chain(&impostor).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut roc = Vec::with_capacity(thresholds.len() + 1);
    for tau in thresholds {
        let imp_above = impostor.len() - impostor.partition_point(|s| *s <= tau);
        let gen_at_or_below = genuine.partition_point(|s| *s <= tau);
        roc.push((imp_above as f64 / ni, gen_at_or_below as f64 / ng));
    }
    roc.push((1.0, 0.0));

    let auc = roc
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * ((1.0 - w[0].1) + (1.0 - w[1].1)) / 2.0)
        .sum();

    let below = roc.iter().rposition(|(fp, _)| *fp <= epsilon).expect("first point has p_fp = 0");
    let (fp0, fn0) = roc[below];
    let (fp1, fn1) = roc[below + 1];
    let pfn_at_pfp = fn0 + (epsilon - fp0) / (fp1 - fp0) * (fn1 - fn0);

    Ok(VerificationReport {
        auc,
        pfn_at_pfp,
        epsilon,
        roc_points: roc,
    })
}

/// Accept when the nearest representation is closer than `tau`, and name
/// that group (lowest index on ties).
pub fn identify_open_set(query: &TernaryCode, model: &GroupModel, tau: f64) -> Result<OpenSetDecision> {
    let (group, d2) = nearest_group(query, model.representations())?;
    let min_distance = (d2 as f64).sqrt();
    let accepted = min_distance < tau;
    Ok(OpenSetDecision {
        accepted,
        group: accepted.then_some(group),
        min_distance,
    })
}

fn nearest_group(query: &TernaryCode, reps: &[TernaryCode]) -> Result<(usize, i64)> {
    let mut best: Option<(usize, i64)> = None;
    for (g, r) in reps.iter().enumerate() {
        if r.len() != query.len() {
            return Err(GmvError::param("query and representation lengths differ"));
        }
        let d2 = squared_distance(query, r);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((g, d2));
        }
    }
    best.ok_or_else(|| GmvError::param("model has no groups"))
}

/// `(1 − p_ε)(1 − p_fn)`.
pub fn dir_metric(p_epsilon: f64, pfn: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_epsilon) || !(0.0..=1.0).contains(&pfn) {
        return Err(GmvError::param(format!(
            "probabilities out of range: p_ε = {p_epsilon}, p_fn = {pfn}"
        )));
    }
    Ok((1.0 - p_epsilon) * (1.0 - pfn))
}

/// Privacy: mean of `‖y − ŷ‖²/d` where `ŷ` is the unit reconstruction of
/// the query's embedding. Columns of `queries` are the query templates.
pub fn mse_privacy(queries: &DMatrix<f64>, model: &GroupModel) -> Result<MseEstimate> {
    if queries.ncols() == 0 {
        return Err(GmvError::param("no queries"));
    }
    if queries.nrows() != model.dim() {
        return Err(GmvError::param("queries and model disagree on d"));
    }
    let errors = (0..queries.ncols())
        .into_par_iter()
        .map(|i| {
            let y = queries.column(i).clone_owned();
            match reconstruct_unit(&model.embed(&y)?, model.w()) {
                Ok(y_hat) => Ok(Some(reconstruction_error(&y, &y_hat))),
                Err(GmvError::DegenerateCode) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    average(errors, "every query embedding is all-zero")
}

/// Security: `(dN)⁻¹ Σ_g Σ_{i∈g} ‖x_i − x̂_g‖²` with `x̂_g` the unit
/// reconstruction of the group representation.
pub fn mse_security(x: &TemplateMatrix, model: &GroupModel) -> Result<MseEstimate> {
    if x.dim() != model.dim() || x.len() != model.partition().num_members() {
        return Err(GmvError::param("templates and model disagree on shape"));
    }
    let d = model.dim() as f64;
    let mut total = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for (g, members) in model.partition().groups().iter().enumerate() {
        let x_hat = match reconstruct_unit(&model.representations()[g], model.w()) {
            Ok(v) => v,
            Err(GmvError::DegenerateCode) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for &i in members {
            total += (x.column(i) - &x_hat).norm_squared();
            used += 1;
        }
    }
    if used == 0 {
        return Err(GmvError::Evaluation("every group representation is all-zero".into()));
    }
    Ok(MseEstimate {
        value: total / (d * used as f64),
        used,
        skipped,
    })
}

/// `‖y − ŷ‖² / d`.
pub fn reconstruction_error(y: &DVector<f64>, y_hat: &DVector<f64>) -> f64 {
    (y - y_hat).norm_squared() / y.len() as f64
}

fn average(errors: Vec<Option<f64>>, empty_msg: &str) -> Result<MseEstimate> {
    let skipped = errors.iter().filter(|e| e.is_none()).count();
    let used: Vec<f64> = errors.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(GmvError::Evaluation(empty_msg.into()));
    }
    Ok(MseEstimate {
        value: used.iter().sum::<f64>() / used.len() as f64,
        used: used.len(),
        skipped,
    })
}

/// Verification and identification results for one query set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub verification: VerificationReport,
    pub identification: IdentificationReport,
    pub verification_scores: ScoreSet,
}

/// Run both scenarios over `queries` against an enrolled `model`.
///
/// Verification pairs every genuine query with its own group and every
/// impostor with every group. Identification thresholds the distance to the
/// nearest group; `p_ε` is measured on genuine queries accepted at the
/// operating point where at most a fraction `epsilon` of impostors pass.
pub fn evaluate(
    model: &GroupModel,
    enrolled: &TemplateMatrix,
    queries: &QuerySet,
    epsilon: f64,
) -> Result<Evaluation> {
    queries.check_against(enrolled)?;
    if enrolled.len() != model.partition().num_members() {
        return Err(GmvError::param("enrolled templates and model partition disagree on N"));
    }
    let index: HashMap<u32, usize> = enrolled.ids().iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let codes = (0..queries.len())
        .into_par_iter()
        .map(|i| model.embed(&queries.column(i)))
        .collect::<Result<Vec<_>>>()?;
    let reps = model.representations();

    let mut verification_scores = ScoreSet::default();
    let mut step1 = ScoreSet::default();
    let mut genuine_nearest = Vec::new();
    let nearest: Vec<(usize, i64)> = codes
        .par_iter()
        .map(|c| nearest_group(c, reps))
        .collect::<Result<_>>()?;

    for ((label, code), &(g_hat, d2)) in queries.labels().iter().zip(&codes).zip(&nearest) {
        let min_distance = (d2 as f64).sqrt();
        match label {
            QueryLabel::Genuine(id) => {
                let g = model.partition().group_of(index[id]);
                verification_scores.genuine.push((score(code, &reps[g])?, g));
                step1.genuine.push((-min_distance, g));
                genuine_nearest.push((min_distance, g_hat, g));
            }
            QueryLabel::Impostor => {
                for r in reps {
                    verification_scores.impostor.push(score(code, r)?);
                }
                step1.impostor.push(-min_distance);
            }
        }
    }

    let verification = verify_curve(&verification_scores, epsilon)?;
    let step1_report = verify_curve(&step1, epsilon)?;

    let mut impostor_dist: Vec<f64> = step1.impostor.iter().map(|s| -s).collect();
    impostor_dist.sort_by(f64::total_cmp);
    let k = ((epsilon * impostor_dist.len() as f64).floor() as usize).min(impostor_dist.len() - 1);
    let threshold = impostor_dist[k];
    let accepted: Vec<_> = genuine_nearest.iter().filter(|(dist, _, _)| *dist < threshold).collect();
    let p_epsilon = if accepted.is_empty() {
        0.0
    } else {
        accepted.iter().filter(|(_, g_hat, g)| g_hat != g).count() as f64 / accepted.len() as f64
    };
    let pfn_step1 = step1_report.pfn_at_pfp.clamp(0.0, 1.0);
    let identification = IdentificationReport {
        pfn_step1,
        p_epsilon,
        dir: dir_metric(p_epsilon, pfn_step1)?,
        threshold,
        accepted_genuine: accepted.len(),
    };
    Ok(Evaluation {
        verification,
        identification,
        verification_scores,
    })
}
