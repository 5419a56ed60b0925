use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aoe::{AoeParams, AoeState};
use crate::data::GroupPartition;
use crate::eoa::{EoaParams, EoaState};
use crate::error::{GmvError, Result};
use crate::ternary::{embed, ProjectionMatrix, TernaryCode, ORTHONORMAL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Aoe,
    Eoa,
    BaselineAoe,
    BaselineEoa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Aoe, Method::Eoa, Method::BaselineAoe, Method::BaselineEoa];

    /// Tag byte used by the model file.
    pub fn tag(self) -> u8 {
        match self {
            Method::Aoe => 0,
            Method::Eoa => 1,
            Method::BaselineAoe => 2,
            Method::BaselineEoa => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Aoe => "aoe",
            Method::Eoa => "eoa",
            Method::BaselineAoe => "baseline-aoe",
            Method::BaselineEoa => "baseline-eoa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GmvError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GmvError::param(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub code_len: usize,
    pub sparsity: usize,
    pub method: Method,
    pub xi: f64,
    pub gamma: f64,
    pub eta: f64,
    pub seed: u64,
}

/// Enrolled system: projection, one ternary representation per group, and
/// the group membership it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupModel {
    w: ProjectionMatrix,
    representations: Vec<TernaryCode>,
    partition: GroupPartition,
    params: ModelParams,
}

impl GroupModel {
    pub fn new(
        w: ProjectionMatrix,
        representations: Vec<TernaryCode>,
        partition: GroupPartition,
        params: ModelParams,
    ) -> Result<Self> {
        if representations.len() != partition.num_groups() {
            return Err(GmvError::param(format!(
                "{} representations for {} groups",
                representations.len(),
                partition.num_groups()
            )));
        }
        if params.code_len != w.code_len() || params.sparsity == 0 || params.sparsity > params.code_len {
            return Err(GmvError::param("model parameters disagree with the projection"));
        }
        for (g, r) in representations.iter().enumerate() {
            if r.len() != params.code_len || r.nnz() > params.sparsity {
                return Err(GmvError::param(format!("representation {g} is infeasible")));
            }
        }
        if w.orthonormality_error() > ORTHONORMAL_TOL {
            return Err(GmvError::param("projection is not orthonormal"));
        }
        Ok(Self {
            w,
            representations,
            partition,
            params,
        })
    }

    pub fn from_aoe(state: AoeState, partition: GroupPartition, params: &AoeParams) -> Result<Self> {
        Self::new(
            state.w,
            state.representations,
            partition,
            ModelParams {
                code_len: params.code_len,
                sparsity: params.sparsity,
                method: Method::Aoe,
                xi: params.xi,
                gamma: 0.0,
                eta: 0.0,
                seed: params.seed,
            },
        )
    }

    pub fn from_eoa(state: EoaState, partition: GroupPartition, params: &EoaParams) -> Result<Self> {
        Self::new(
            state.w,
            state.representations,
            partition,
            ModelParams {
                code_len: params.code_len,
                sparsity: params.sparsity,
                method: Method::Eoa,
                xi: 0.0,
                gamma: params.gamma,
                eta: params.eta,
                seed: params.seed,
            },
        )
    }

    pub fn w(&self) -> &ProjectionMatrix {
        &self.w
    }

    pub fn representations(&self) -> &[TernaryCode] {
        &self.representations
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn num_groups(&self) -> usize {
        self.representations.len()
    }

    /// Query-side embedding with this model's projection and sparsity.
    pub fn embed<St: nalgebra::Storage<f64, nalgebra::Dyn, nalgebra::U1>>(
        &self,
        y: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, St>,
    ) -> Result<TernaryCode> {
        embed(y, &self.w, self.params.sparsity)
    }
}
