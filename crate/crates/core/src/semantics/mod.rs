//! Evaluation of formulas on words in `Σ* λ^ω`.

mod eval;
mod oracles;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Value, Var};

pub use eval::{eval_finite, eval_omega, omega_quant_product, u_value, Evaluator};
pub use oracles::{interval_eval_quant, nk_oracle, nk_oracle_for, nkhat_oracle, IntervalProduct, NkOracle};

pub type Assignment = BTreeMap<Var, Value>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("horizon {horizon} is too small, need at least {need}")]
    HorizonTooSmall { horizon: Value, need: Value },
    #[error("variable {0} is not assigned")]
    Unassigned(Var),
    #[error("arithmetic overflow while evaluating a term")]
    Overflow,
    #[error("quantifier bodies are not active-domain")]
    BodiesNotActiveDomain,
    #[error("{0} is not a boundary point")]
    NotBoundaryPoint(Value),
    #[error("offset index {k} out of range (|T| = {len})")]
    OffsetOutOfRange { k: usize, len: usize },
    #[error("an infinite product in a body has no limit")]
    NonConvergent,
    #[error("monoid is not a group")]
    NotAGroup,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OmegaVerdict {
    True,
    False,
    NonConvergent,
}

impl OmegaVerdict {
    pub fn from_tv(v: Option<bool>) -> Self {
        match v {
            Some(true) => OmegaVerdict::True,
            Some(false) => OmegaVerdict::False,
            None => OmegaVerdict::NonConvergent,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            OmegaVerdict::True => Some(true),
            OmegaVerdict::False => Some(false),
            OmegaVerdict::NonConvergent => None,
        }
    }
}

/// Horizon policy for quantifiers that cannot be evaluated exactly.
///
/// Such a quantifier is evaluated over `[0, H)` where `H` is at least `h0`
/// and grows with the values of the enclosing variables, and the partial
/// products over every horizon in `[H, H + probes * lambda]` must agree.
///
/// With `undefined_is_false`, a quantifier whose product has no limit is
/// false for every target instead of making the verdict `NonConvergent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaPolicy {
    pub h0: Option<Value>,
    pub lambda: Option<u64>,
    pub probes: u32,
    #[serde(default)]
    pub undefined_is_false: bool,
}

impl OmegaPolicy {
    /// Undefined products make their quantifier false.
    pub fn strict() -> Self {
        OmegaPolicy { undefined_is_false: true, ..Default::default() }
    }
}

impl Default for OmegaPolicy {
    fn default() -> Self {
        OmegaPolicy { h0: None, lambda: None, probes: 3, undefined_is_false: false }
    }
}
