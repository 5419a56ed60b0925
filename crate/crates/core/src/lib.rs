//! Privacy-preserving group membership verification and identification.
//!
//! Templates (unit-norm feature vectors) are enrolled in groups. Each group
//! is stored as a single sparse ternary code, learned jointly with the
//! projection that embeds queries:
//!
//! * [`aoe`]: aggregation of embeddings, embed each member then aggregate.
//! * [`eoa`]: embedding of aggregation, aggregate raw templates then embed.
//! * [`baseline`]: the same two constructions with fixed rules and a random
//!   projection, for comparison.
//!
//! [`eval`] measures verification (ROC, AUC, `p_fn` at a target `p_fp`),
//! open-set identification (DIR) and the reconstruction errors a curious
//! server could reach. [`experiment`] ties the pieces into reproducible runs;
//! [`io`] holds the descriptor and model file formats.
//!
//! ```no_run
//! use gmv::prelude::*;
//!
//! let (templates, queries) = gen_synthetic(128, 512, 0.48, 512, 0)?;
//! let partition = partition_groups(512, 8, 1)?;
//! let params = AoeParams { code_len: 115, sparsity: 81, xi: 1.0, max_iters: 100, rel_tol: 1e-6, seed: 2 };
//! let state = learn_aoe(&templates, &partition, &params)?;
//! let model = GroupModel::from_aoe(state, partition, &params)?;
//! let report = evaluate(&model, &templates, &queries, 0.05)?;
//! println!("AUC {:.3}", report.verification.auc);
//! # Ok::<(), gmv::GmvError>(())
//! ```

pub mod aoe;
pub mod baseline;
pub mod data;
pub mod eoa;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod model;
pub mod procrustes;
pub mod ternary;

pub use error::{GmvError, Result};

/// Relative slack allowed before a sweep counts as increasing the objective.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// How an alternating minimization ended.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Convergence {
    /// Number of full sweeps run.
    pub sweeps: usize,
    /// Sweeps whose objective exceeded the previous one beyond [`MONOTONE_SLACK`].
    pub violations: usize,
    /// Whether the relative decrease dropped below the tolerance.
    pub converged: bool,
}

pub(crate) fn check_dims(d: usize, code_len: usize, sparsity: usize) -> Result<()> {
    if code_len == 0 || code_len > d {
        return Err(GmvError::Parameter(format!("code length ℓ={code_len} must be in [1, d={d}]")));
    }
    if sparsity == 0 || sparsity > code_len {
        return Err(GmvError::Parameter(format!("sparsity S={sparsity} must be in [1, ℓ={code_len}]")));
    }
    Ok(())
}

/// Size the global worker pool from `GMV_THREADS`, if set.
///
/// Has no effect once the pool has been built.
pub fn init_threads_from_env() {
    if let Some(n) = std::env::var("GMV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub mod prelude {
    pub use crate::aoe::{learn_aoe, AoeParams, AoeState};
    pub use crate::baseline::{baseline_aoe_enroll, baseline_eoa_enroll, BaselineConfig};
    pub use crate::data::{gen_synthetic, partition_groups, GroupPartition, QueryLabel, QuerySet, TemplateMatrix};
    pub use crate::eoa::{learn_eoa, EoaParams, EoaState};
    pub use crate::eval::{evaluate, mse_privacy, mse_security, verify_curve, ScoreSet};
    pub use crate::experiment::{run_experiment, ExperimentConfig};
    pub use crate::model::{GroupModel, Method};
    pub use crate::ternary::{embed, reconstruct_unit, ternarize, ProjectionMatrix, TernaryCode};
}
