//! Fixed-rule enrollment with a random, non-learned projection.
//!
//! AoE sums the members' embeddings and re-ternarizes the sum; EoA embeds the
//! ridge aggregate of the raw templates. Both use the same function shape as
//! the learned constructions so the four methods evaluate side by side.

use rayon::prelude::*;

use crate::data::{GroupPartition, TemplateMatrix};
use crate::eoa::ridge_aggregate;
use crate::error::{GmvError, Result};
use crate::model::{GroupModel, Method, ModelParams};
use crate::procrustes::random_orthonormal;
use crate::ternary::{embed, ternarize};
use crate::check_dims;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub variant: Method,
    pub code_len: usize,
    pub sparsity: usize,
    pub eta: f64,
    pub seed: u64,
}

impl BaselineConfig {
    fn check(&self, x: &TemplateMatrix, partition: &GroupPartition, expected: Method) -> Result<()> {
        if self.variant != expected {
            return Err(GmvError::param(format!(
                "baseline variant {} used for {expected} enrollment",
                self.variant
            )));
        }
        check_dims(x.dim(), self.code_len, self.sparsity)?;
        if partition.num_members() != x.len() {
            return Err(GmvError::param("partition and templates disagree on N"));
        }
        Ok(())
    }

    fn model_params(&self) -> ModelParams {
        ModelParams {
            code_len: self.code_len,
            sparsity: self.sparsity,
            method: self.variant,
            xi: 0.0,
            gamma: 0.0,
            eta: if self.variant == Method::BaselineEoa { self.eta } else { 0.0 },
            seed: self.seed,
        }
    }
}

/// `r_g = T_S(Σ_{i∈g} e(x_i))` under a seeded random projection.
pub fn baseline_aoe_enroll(
    x: &TemplateMatrix,
    partition: &GroupPartition,
    cfg: &BaselineConfig,
) -> Result<GroupModel> {
    cfg.check(x, partition, Method::BaselineAoe)?;
    let w = random_orthonormal(x.dim(), cfg.code_len, cfg.seed)?;
    let reps = partition
        .groups()
        .par_iter()
        .map(|members| {
            let mut sum = vec![0.0; cfg.code_len];
            for &i in members {
                let e = embed(&x.column(i), &w, cfg.sparsity)?;
                for (acc, v) in sum.iter_mut().zip(e.values()) {
                    *acc += f64::from(*v);
                }
            }
            ternarize(&sum, cfg.sparsity)
        })
        .collect::<Result<Vec<_>>>()?;
    GroupModel::new(w, reps, partition.clone(), cfg.model_params())
}

/// `r_g = T_S(Wᵀ a_g)` with the ridge aggregate
/// `a_g = (X_gX_gᵀ + ηI)⁻¹ X_g 1` under a seeded random projection.
pub fn baseline_eoa_enroll(
    x: &TemplateMatrix,
    partition: &GroupPartition,
    cfg: &BaselineConfig,
) -> Result<GroupModel> {
    cfg.check(x, partition, Method::BaselineEoa)?;
    if !(cfg.eta >= 0.0 && cfg.eta.is_finite()) {
        return Err(GmvError::param(format!("η = {} must be finite and ≥ 0", cfg.eta)));
    }
    let w = random_orthonormal(x.dim(), cfg.code_len, cfg.seed)?;
    let reps = partition
        .groups()
        .par_iter()
        .map(|members| {
            let a = ridge_aggregate(&x.select(members), cfg.eta)?;
            embed(&a, &w, cfg.sparsity)
        })
        .collect::<Result<Vec<_>>>()?;
    GroupModel::new(w, reps, partition.clone(), cfg.model_params())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, partition_groups};
    use nalgebra::{DMatrix, DVector};

    fn cfg(variant: Method) -> BaselineConfig {
        BaselineConfig {
            variant,
            code_len: 14,
            sparsity: 10,
            eta: 1.0,
            seed: 3,
        }
    }

    #[test]
    fn singleton_aoe_is_member_embedding() {
        let (x, _) = gen_synthetic(16, 6, 0.0, 0, 1).unwrap();
        let p = GroupPartition::contiguous(6, 1).unwrap();
        let model = baseline_aoe_enroll(&x, &p, &cfg(Method::BaselineAoe)).unwrap();
        for i in 0..6 {
            assert_eq!(model.representations()[i], model.embed(&x.column(i)).unwrap());
        }
    }

    #[test]
    fn duplicated_member_gives_same_code() {
        let (x, _) = gen_synthetic(16, 1, 0.0, 0, 2).unwrap();
        let twice = TemplateMatrix::from_columns(DMatrix::from_columns(&[x.column(0), x.column(0)])).unwrap();
        let p = GroupPartition::contiguous(2, 2).unwrap();
        let model = baseline_aoe_enroll(&twice, &p, &cfg(Method::BaselineAoe)).unwrap();
        assert_eq!(model.representations()[0], model.embed(&x.column(0)).unwrap());
    }

    #[test]
    fn seeded_models_reproduce() {
        let (x, _) = gen_synthetic(16, 12, 0.0, 0, 3).unwrap();
        let p = partition_groups(12, 4, 3).unwrap();
        for variant in [Method::BaselineAoe, Method::BaselineEoa] {
            let enroll = if variant == Method::BaselineAoe { baseline_aoe_enroll } else { baseline_eoa_enroll };
            let a = enroll(&x, &p, &cfg(variant)).unwrap();
            let b = enroll(&x, &p, &cfg(variant)).unwrap();
            assert_eq!(a, b);
            assert!(a.representations().iter().all(|r| r.nnz() <= 10));
        }
    }

    #[test]
    fn ridge_singleton_limit() {
        let (x, _) = gen_synthetic(8, 1, 0.0, 0, 4).unwrap();
        let eta = 1e-9;
        let a = ridge_aggregate(&x.select(&[0]), eta).unwrap();
        let expected: DVector<f64> = x.column(0) / (1.0 + eta);
        assert!((a - expected).amax() < 1e-12);
    }

    #[test]
    fn ridge_aggregate_zeroes_gradient() {
        let (x, _) = gen_synthetic(10, 4, 0.0, 0, 5).unwrap();
        let x_g = x.matrix().clone();
        let eta = 1.0;
        let a = ridge_aggregate(&x_g, eta).unwrap();
        let f = |v: &DVector<f64>| {
            (x_g.tr_mul(v) - DVector::from_element(4, 1.0)).norm_squared() + eta * v.norm_squared()
        };
        let h = 1e-6;
        let grad = DVector::from_fn(10, |k, _| {
            let (mut p, mut m) = (a.clone(), a.clone());
            p[k] += h;
            m[k] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        });
        assert!(grad.norm() <= 1e-5);
    }

    #[test]
    fn wrong_variant_rejected() {
        let (x, _) = gen_synthetic(16, 4, 0.0, 0, 6).unwrap();
        let p = GroupPartition::contiguous(4, 2).unwrap();
        assert!(baseline_aoe_enroll(&x, &p, &cfg(Method::BaselineEoa)).is_err());
        assert!(baseline_eoa_enroll(&x, &p, &cfg(Method::Aoe)).is_err());
    }
}
