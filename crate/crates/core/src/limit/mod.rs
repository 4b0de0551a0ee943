//! The `p, q -> ∞` limit: closed-form limit values on the ball and the
//! rectangle, a brute-force search over the cone/plane candidates, the
//! candidate fields themselves, and the continuation sweep that tracks
//! `λ^(1/p)` along `alpha = Γ p`, `q = Q p`.

mod closed_form;
mod oracle;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, GridDomain};

pub use closed_form::{
    ball_chain, lambda_inf_ball, lambda_inf_rectangle, optimal_touch_point, BallChain, Branch, RectangleValue,
};
pub use oracle::{
    ansatz_oracle_rectangle, apex_value_rectangle, cone_plane_pair, limit_quotient, oracle_report,
    profile_max_bruteforce, AnsatzConfig, OracleReport, DEFAULT_ORACLE_SAMPLES,
};
pub use sweep::{continuation_sweep, Sweep, SweepRow, DEFAULT_SCHEDULE};

/// Limit parameters: `Γ = lim alpha/p`, `Q = lim q/p`, the half-width (or
/// radius) `R` and, for rectangles, the half-height `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub gamma: f64,
    #[serde(rename = "Q")]
    pub big_q: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

impl LimitSpec {
    pub fn ball(gamma: f64, big_q: f64, r: f64) -> Result<Self> {
        let s = Self {
            gamma,
            big_q,
            r,
            l: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn rectangle(gamma: f64, big_q: f64, r: f64, l: f64) -> Result<Self> {
        let s = Self {
            gamma,
            big_q,
            r,
            l: Some(l),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidLimit(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.big_q > 0.0 && self.big_q.is_finite()) {
            return Err(Error::InvalidLimit(format!("Q must be positive, got {}", self.big_q)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidLimit(format!("R must be positive, got {}", self.r)));
        }
        if let Some(l) = self.l {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidLimit(format!("L must be positive, got {l}")));
            }
            if l > self.r {
                return Err(Error::InvalidLimit(format!(
                    "need L <= R, got L = {l} > R = {}",
                    self.r
                )));
            }
        }
        Ok(())
    }

    /// `(1 - Γ) Q`, the exponent of `|v|` in the limit normalization.
    pub fn v_power(&self) -> f64 {
        (1.0 - self.gamma) * self.big_q
    }

    /// Checks that the spec describes `dom`.
    pub fn check_domain(&self, dom: &GridDomain) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        match (dom.kind(), self.l) {
            (DomainKind::Disk, None) if close(dom.r(), self.r) => Ok(()),
            (DomainKind::Rectangle, Some(l)) if close(dom.r(), self.r) && close(dom.l(), l) => Ok(()),
            _ => Err(Error::InvalidLimit(format!(
                "spec (R = {}, L = {:?}) does not describe the {:?} domain with R = {}, L = {}",
                self.r,
                self.l,
                dom.kind(),
                dom.r(),
                dom.l()
            ))),
        }
    }

    /// Closed-form limit value for the domain shape the spec describes.
    pub fn closed_form(&self) -> Result<f64> {
        match self.l {
            None => lambda_inf_ball(self),
            Some(_) => Ok(lambda_inf_rectangle(self)?.value),
        }
    }
}
