//! The initial-data/noise event under which conditional flocking holds for
//! constant intensity:
//!
//! ```text
//! G = 4 |x(0)|_p |v(0)|_p I^{1 - 2/beta} K < 1,
//! I = int_0^inf exp(-beta D^2 s / (2(beta-2)) + beta D W(s) / (beta-2)) ds
//! ```
//!
//! `I` is only available truncated, so classification is three-way: a path
//! is `InA` only if `G` stays below one after adding the tail bound to `I`.

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::paths::BrownianPath;

use super::martingale::{exp_functional, ExpFunctional};

/// Which form of the constant `K` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventConstant {
    /// `(2^{beta+1} / (beta lambda))^{2/beta}`
    Derived,
    /// `(2^beta / (q lambda))^{2/beta}`
    Stated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAParams {
    pub beta: f64,
    pub q: f64,
    pub lambda: f64,
    /// Constant noise intensity.
    pub d: f64,
    /// Defaults to `50 / drift_coef`.
    pub t_trunc: Option<f64>,
    /// Linear growth margin for `W` after truncation; defaults to
    /// `drift_coef / (2 vol_coef)`.
    pub c_lil: Option<f64>,
    pub constant: EventConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventClass {
    InA,
    NotInA,
    Indeterminate,
}

impl EventClass {
    /// `Some(true)` for `InA`, `Some(false)` for `NotInA`.
    pub fn as_flag(self) -> Option<bool> {
        match self {
            EventClass::InA => Some(true),
            EventClass::NotInA => Some(false),
            EventClass::Indeterminate => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub class: EventClass,
    /// `G` from the truncated integral (a lower bound on the true `G`).
    pub g_truncated: f64,
    /// `G` with the tail bound added to the integral.
    pub g_inflated: f64,
    pub functional: Option<ExpFunctional>,
}

impl EventAParams {
    pub fn new(beta: f64, q: f64, lambda: f64, d: f64) -> Result<Self> {
        let p = EventAParams { beta, q, lambda, d, t_trunc: None, c_lil: None, constant: EventConstant::Derived };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 2.0 && self.beta.is_finite()) {
            return Err(FlockError::config(format!("event A needs beta > 2, got {}", self.beta)));
        }
        if !(self.q > 1.0) {
            return Err(FlockError::config(format!("event A needs q > 1, got {}", self.q)));
        }
        if !(self.lambda > 0.0) || !(self.d != 0.0 && self.d.is_finite()) {
            return Err(FlockError::config("event A needs lambda > 0 and a nonzero finite intensity"));
        }
        Ok(())
    }

    pub fn drift_coef(&self) -> f64 {
        self.beta * self.d * self.d / (2.0 * (self.beta - 2.0))
    }

    pub fn vol_coef(&self) -> f64 {
        self.beta * self.d / (self.beta - 2.0)
    }

    pub fn truncation(&self) -> f64 {
        self.t_trunc.unwrap_or(50.0 / self.drift_coef())
    }

    pub fn lil_margin(&self) -> f64 {
        self.c_lil.unwrap_or(self.drift_coef() / (2.0 * self.vol_coef().abs()))
    }

    pub fn constant_k(&self) -> f64 {
        let base = match self.constant {
            EventConstant::Derived => 2f64.powf(self.beta + 1.0) / (self.beta * self.lambda),
            EventConstant::Stated => 2f64.powf(self.beta) / (self.q * self.lambda),
        };
        base.powf(2.0 / self.beta)
    }

    /// `G` as a function of the (possibly truncated) integral value.
    pub fn g(&self, x0_norm: f64, v0_norm: f64, integral: f64) -> f64 {
        if x0_norm == 0.0 || v0_norm == 0.0 {
            return 0.0;
        }
        4.0 * x0_norm * v0_norm * integral.powf(1.0 - 2.0 / self.beta) * self.constant_k()
    }
}

/// Classifies one path. `path` must reach the truncation time.
pub fn event_a(x0_norm: f64, v0_norm: f64, params: &EventAParams, path: &BrownianPath) -> Result<EventOutcome> {
    params.validate()?;
    if x0_norm == 0.0 || v0_norm == 0.0 {
        return Ok(EventOutcome { class: EventClass::InA, g_truncated: 0.0, g_inflated: 0.0, functional: None });
    }
    let ef = exp_functional(path, params.drift_coef(), params.vol_coef(), params.truncation(), params.lil_margin())?;
    let g_truncated = params.g(x0_norm, v0_norm, ef.value);
    let g_inflated = params.g(x0_norm, v0_norm, ef.value + ef.tail_bound);
    let class = if g_inflated < 1.0 {
        EventClass::InA
    } else if g_truncated >= 1.0 {
        EventClass::NotInA
    } else {
        EventClass::Indeterminate
    };
    Ok(EventOutcome { class, g_truncated, g_inflated, functional: Some(ef) })
}
