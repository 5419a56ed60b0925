//! End-to-end runs: generate or load templates, partition, enroll with one of
//! the four methods, then evaluate and summarize in a versioned report.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::aoe::{learn_aoe, AoeParams};
use crate::baseline::{baseline_aoe_enroll, baseline_eoa_enroll, BaselineConfig};
use crate::data::{gen_synthetic, partition_groups, split_queries, Difficulty, GroupPartition, QuerySet, TemplateMatrix};
use crate::eoa::{learn_eoa, EoaParams};
use crate::error::{GmvError, Result, StageContext};
use crate::eval::{evaluate, mse_privacy, mse_security};
use crate::io;
use crate::model::{GroupModel, Method};
use crate::Convergence;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub method: Method,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub l_ratio: f64,
    pub s_ratio: f64,
    pub xi: f64,
    pub gamma: f64,
    pub eta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Impostor queries to synthesize; defaults to `n`.
    pub impostors: Option<usize>,
    pub easy_threshold: f64,
    pub hard_threshold: f64,
    /// Templates file; synthetic data is generated when absent.
    pub input: Option<PathBuf>,
    /// Query file, required with `input`.
    pub queries: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Aoe,
            d: 128,
            n: 512,
            m: 8,
            l_ratio: 0.9,
            s_ratio: 0.7,
            xi: 1.0,
            gamma: 1e4,
            eta: 1.0,
            sigma: 0.48,
            epsilon: 0.05,
            iters: 100,
            rel_tol: 1e-6,
            seed: 0,
            impostors: None,
            easy_threshold: 0.95,
            hard_threshold: 0.9,
            input: None,
            queries: None,
            model_out: None,
        }
    }
}

impl ExperimentConfig {
    /// `ℓ = round(l_ratio · d)`.
    pub fn code_len_for(&self, d: usize) -> usize {
        (self.l_ratio * d as f64).round() as usize
    }

    /// `S = round(s_ratio · ℓ)`.
    pub fn sparsity_for(&self, code_len: usize) -> usize {
        (self.s_ratio * code_len as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.l_ratio) || !unit(self.s_ratio) {
            return Err(GmvError::param("l-ratio and s-ratio must lie in (0, 1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(GmvError::param("epsilon must lie in (0, 1)"));
        }
        if self.m == 0 {
            return Err(GmvError::param("group size m must be positive"));
        }
        if self.input.is_some() != self.queries.is_some() {
            return Err(GmvError::param("input and queries files must be given together"));
        }
        if self.input.is_none() {
            if self.d == 0 || self.n == 0 {
                return Err(GmvError::param("d and n must be positive"));
            }
            self.dims(self.d)?;
        }
        Ok(())
    }

    fn dims(&self, d: usize) -> Result<(usize, usize)> {
        let l = self.code_len_for(d);
        let s = self.sparsity_for(l);
        crate::check_dims(d, l, s)?;
        Ok((l, s))
    }

    /// Seed of synthetic data generation.
    pub fn data_seed(&self) -> u64 {
        self.seed
    }

    /// Seed of the random group assignment.
    pub fn partition_seed(&self) -> u64 {
        self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)
    }

    /// Seed of the initial (or baseline) projection.
    pub fn init_seed(&self) -> u64 {
        self.seed.wrapping_add(0x6a09_e667_f3bc_c909)
    }
}

/// Learning diagnostics of an enrollment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSummary {
    pub sweeps: usize,
    pub violations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

impl LearningSummary {
    fn new(trace: Vec<f64>, c: Convergence) -> Self {
        Self {
            sweeps: c.sweeps,
            violations: c.violations,
            converged: c.converged,
            objective_trace: trace,
        }
    }
}

/// Enroll `templates` under `partition` with the configured method.
///
/// Baselines return no learning summary.
pub fn enroll(
    cfg: &ExperimentConfig,
    templates: &TemplateMatrix,
    partition: &GroupPartition,
) -> Result<(GroupModel, Option<LearningSummary>)> {
    let (code_len, sparsity) = cfg.dims(templates.dim())?;
    let seed = cfg.init_seed();
    match cfg.method {
        Method::Aoe => {
            let params = AoeParams {
                code_len,
                sparsity,
                xi: cfg.xi,
                max_iters: cfg.iters,
                rel_tol: cfg.rel_tol,
                seed,
            };
            let state = learn_aoe(templates, partition, &params)?;
            let summary = LearningSummary::new(state.objective_trace.clone(), state.convergence);
            Ok((GroupModel::from_aoe(state, partition.clone(), &params)?, Some(summary)))
        }
        Method::Eoa => {
            let params = EoaParams {
                code_len,
                sparsity,
                gamma: cfg.gamma,
                eta: cfg.eta,
                max_iters: cfg.iters,
                rel_tol: cfg.rel_tol,
                seed,
            };
            let state = learn_eoa(templates, partition, &params)?;
            let summary = LearningSummary::new(state.objective_trace.clone(), state.convergence);
            Ok((GroupModel::from_eoa(state, partition.clone(), &params)?, Some(summary)))
        }
        variant @ (Method::BaselineAoe | Method::BaselineEoa) => {
            let bc = BaselineConfig {
                variant,
                code_len,
                sparsity,
                eta: cfg.eta,
                seed,
            };
            let model = if variant == Method::BaselineAoe {
                baseline_aoe_enroll(templates, partition, &bc)?
            } else {
                baseline_eoa_enroll(templates, partition, &bc)?
            };
            Ok((model, None))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSection {
    pub auc: f64,
    pub pfn_at_pfp: f64,
    pub epsilon: f64,
    /// Same figure of merit restricted to easy or hard genuine queries.
    pub easy_pfn_at_pfp: Option<f64>,
    pub hard_pfn_at_pfp: Option<f64>,
    /// `[p_fp, p_fn]` pairs of the empirical ROC.
    pub roc: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationSection {
    pub pfn_step1: f64,
    pub p_epsilon: f64,
    pub dir: f64,
    pub threshold: f64,
    pub accepted_genuine: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecuritySection {
    pub mse_privacy: f64,
    pub mse_security: f64,
    pub privacy_skipped: usize,
    pub security_skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSection {
    pub d: usize,
    pub n: usize,
    pub groups: usize,
    pub code_len: usize,
    pub sparsity: usize,
    pub genuine_queries: usize,
    pub impostor_queries: usize,
    pub easy: usize,
    pub hard: usize,
    pub below_hard: usize,
}

/// Self-describing run summary; rendered as line-oriented TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub timestamp: u64,
    pub method: Method,
    pub config: Option<ExperimentConfig>,
    pub data: DataSection,
    pub verification: VerificationSection,
    pub identification: IdentificationSection,
    pub security: SecuritySection,
    pub learning: Option<LearningSummary>,
}

impl Report {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GmvError::Evaluation(format!("report serialization: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| GmvError::param(format!("report parse: {e}")))
    }

    fn check_finite(&self) -> Result<()> {
        let mut values = vec![
            self.verification.auc,
            self.verification.pfn_at_pfp,
            self.identification.pfn_step1,
            self.identification.p_epsilon,
            self.identification.dir,
            self.identification.threshold,
            self.security.mse_privacy,
            self.security.mse_security,
        ];
        if let Some(l) = &self.learning {
            values.extend(&l.objective_trace);
        }
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GmvError::Evaluation("report contains non-finite values".into()))
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Evaluate an enrolled model on a query set and assemble a report.
pub fn evaluate_model(
    model: &GroupModel,
    templates: &TemplateMatrix,
    queries: &QuerySet,
    epsilon: f64,
    easy_threshold: f64,
    hard_threshold: f64,
) -> Result<Report> {
    let eval = evaluate(model, templates, queries, epsilon).stage("evaluate")?;
    let (split, tally) = split_queries(queries, templates, easy_threshold, hard_threshold).stage("split queries")?;

    let subset_pfn = |wanted: Difficulty| -> Result<Option<f64>> {
        let keep: Vec<usize> = (0..split.len())
            .filter(|&i| split.difficulty()[i] == wanted || split.difficulty()[i] == Difficulty::Unsplit)
            .collect();
        let sub = split.subset(&keep);
        let has_genuine = sub.difficulty().contains(&wanted);
        let has_impostor = sub.difficulty().contains(&Difficulty::Unsplit);
        if !(has_genuine && has_impostor) {
            return Ok(None);
        }
        Ok(Some(evaluate(model, templates, &sub, epsilon)?.verification.pfn_at_pfp))
    };
    let easy_pfn = subset_pfn(Difficulty::Easy).stage("evaluate easy queries")?;
    let hard_pfn = subset_pfn(Difficulty::Hard).stage("evaluate hard queries")?;

    let privacy = mse_privacy(queries.matrix(), model).stage("privacy")?;
    let security = mse_security(templates, model).stage("security")?;
    let p = model.params();
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: now(),
        method: p.method,
        config: None,
        data: DataSection {
            d: model.dim(),
            n: templates.len(),
            groups: model.num_groups(),
            code_len: p.code_len,
            sparsity: p.sparsity,
            genuine_queries: eval.verification_scores.genuine.len(),
            impostor_queries: tally.impostors,
            easy: tally.easy,
            hard: tally.hard,
            below_hard: tally.dropped,
        },
        verification: VerificationSection {
            auc: eval.verification.auc,
            pfn_at_pfp: eval.verification.pfn_at_pfp,
            epsilon,
            easy_pfn_at_pfp: easy_pfn,
            hard_pfn_at_pfp: hard_pfn,
            roc: eval.verification.roc_points.iter().map(|(a, b)| [*a, *b]).collect(),
        },
        identification: IdentificationSection {
            pfn_step1: eval.identification.pfn_step1,
            p_epsilon: eval.identification.p_epsilon,
            dir: eval.identification.dir,
            threshold: eval.identification.threshold,
            accepted_genuine: eval.identification.accepted_genuine,
        },
        security: SecuritySection {
            mse_privacy: privacy.value,
            mse_security: security.value,
            privacy_skipped: privacy.skipped,
            security_skipped: security.skipped,
        },
        learning: None,
    };
    Ok(report)
}

/// Templates and queries for a configuration, generated or loaded.
pub fn load_or_generate(cfg: &ExperimentConfig) -> Result<(TemplateMatrix, QuerySet)> {
    match (&cfg.input, &cfg.queries) {
        (Some(input), Some(queries)) => {
            let x = io::load_descriptors(input)?;
            let q = io::load_queries(queries)?;
            q.check_against(&x)?;
            Ok((x, q))
        }
        _ => gen_synthetic(cfg.d, cfg.n, cfg.sigma, cfg.impostors.unwrap_or(cfg.n), cfg.data_seed()),
    }
}

/// Run the full pipeline for one configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate().stage("config")?;
    let (templates, queries) = load_or_generate(cfg).stage("data")?;
    let partition = partition_groups(templates.len(), cfg.m, cfg.partition_seed()).stage("partition")?;
    let (model, learning) = enroll(cfg, &templates, &partition).stage("enroll")?;
    if let Some(path) = &cfg.model_out {
        io::save_model(path, &model).stage("write model")?;
    }
    let mut report = evaluate_model(
        &model,
        &templates,
        &queries,
        cfg.epsilon,
        cfg.easy_threshold,
        cfg.hard_threshold,
    )?;
    report.config = Some(cfg.clone());
    report.learning = learning;
    report.check_finite()?;
    Ok(report)
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    M,
    SRatio,
    Sigma,
}

impl std::str::FromStr for SweepAxis {
    type Err = GmvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(SweepAxis::M),
            "s-ratio" => Ok(SweepAxis::SRatio),
            "sigma" => Ok(SweepAxis::Sigma),
            other => Err(GmvError::param(format!("unknown sweep axis {other:?}"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::M => "m",
            SweepAxis::SRatio => "s-ratio",
            SweepAxis::Sigma => "sigma",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::M => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(GmvError::param(format!("group size {value} is not a positive integer")));
                }
                cfg.m = value as usize;
            }
            SweepAxis::SRatio => cfg.s_ratio = value,
            SweepAxis::Sigma => cfg.sigma = value,
        }
        Ok(())
    }
}

/// One report per value of `axis`, everything else held at `base`.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<(f64, Report)>> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v)?;
            Ok((v, run_experiment(&cfg)?))
        })
        .collect()
}

/// Tab-separated plot columns, one row per sweep point.
pub fn sweep_table(axis: SweepAxis, points: &[(f64, Report)]) -> String {
    let mut out = format!(
        "{}\tauc\tpfn_at_pfp\tpfn_step1\tp_epsilon\tdir\tmse_privacy\tmse_security\n",
        axis.name()
    );
    for (x, r) in points {
        let _ = writeln!(
            out,
            "{x}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.verification.auc,
            r.verification.pfn_at_pfp,
            r.identification.pfn_step1,
            r.identification.p_epsilon,
            r.identification.dir,
            r.security.mse_privacy,
            r.security.mse_security
        );
    }
    out
}
