use serde::{Deserialize, Serialize};

use crate::calculus::Exponents;
use crate::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::{DomainKind, GridDomain};
use crate::limit::{LimitSpec, DEFAULT_ORACLE_SAMPLES, DEFAULT_SCHEDULE};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_GRID: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Limit,
    Oracle,
    Residual,
}

/// Which fields the `residual` command audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    /// The explicit cone/plane limit candidate, against the limit operators.
    ConePlane,
    /// A solve at the configured exponents, against the finite-`p` operator.
    Solve,
}

/// Flat experiment record. After [`parse_config`] every optional setting
/// holds its materialized default, so serializing the result echoes the
/// full configuration and parses back to the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,

    pub domain: DomainKind,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,

    // exponents: (p, q, alpha) or (p, gamma, Q) with a schedule for sweeps
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub big_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_constraint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtrack_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<FieldSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// Exponent quantities derived from the configured form, echoed next to the
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl From<Exponents> for DerivedExponents {
    fn from(e: Exponents) -> Self {
        Self {
            p: e.p,
            q: e.q,
            alpha: e.alpha,
            beta: e.beta,
        }
    }
}

/// Parses and validates a configuration for `command` and fills in defaults.
/// A `command` key in the document must agree with `command`.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig> {
    let mut c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    match c.command {
        Some(k) if k != command => {
            return Err(Error::Config(format!(
                "config is for command {k:?} but {command:?} was requested"
            )))
        }
        _ => c.command = Some(command),
    }
    c.materialize();
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn command(&self) -> Command {
        self.command.unwrap_or(Command::Solve)
    }

    fn materialize(&mut self) {
        let d = SolverOptions::default();
        self.nx.get_or_insert(DEFAULT_GRID);
        self.ny.get_or_insert(DEFAULT_GRID);
        self.max_iter.get_or_insert(d.max_iter);
        self.tol_grad.get_or_insert(d.tol_grad);
        self.tol_constraint.get_or_insert(d.tol_constraint);
        self.step0.get_or_insert(d.step0);
        self.backtrack_factor.get_or_insert(d.backtrack_factor);
        self.memory.get_or_insert(d.memory);
        self.seed.get_or_insert(d.seed);
        match self.command() {
            Command::Sweep => {
                self.schedule.get_or_insert_with(|| DEFAULT_SCHEDULE.to_vec());
            }
            Command::Oracle => {
                self.oracle_samples.get_or_insert(DEFAULT_ORACLE_SAMPLES);
            }
            Command::Residual => {
                self.fields.get_or_insert(FieldSource::ConePlane);
            }
            Command::Solve | Command::Limit => {}
        }
    }

    fn triple_form(&self) -> bool {
        self.q.is_some() || self.alpha.is_some()
    }

    fn schedule_form(&self) -> bool {
        self.gamma.is_some() || self.big_q.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if let Some(l) = self.l {
            if l > self.r {
                return Err(Error::Config(format!("need L <= R, got L = {l} > R = {}", self.r)));
            }
        }
        self.domain()?;
        self.solver_options()?;
        if self.triple_form() && self.schedule_form() {
            return Err(Error::Config(
                "give exponents either as (p, q, alpha) or as (p, gamma, Q), not both".into(),
            ));
        }
        let cmd = self.command();
        if matches!(cmd, Command::Sweep) && self.p.is_some() {
            return Err(Error::Config("sweep takes a schedule, not p".into()));
        }
        if !matches!(cmd, Command::Sweep) && self.schedule.is_some() {
            return Err(Error::Config("schedule is only used by sweep".into()));
        }
        if self.oracle_samples.is_some() && cmd != Command::Oracle {
            return Err(Error::Config("oracle_samples is only used by oracle".into()));
        }
        if self.fields.is_some() && cmd != Command::Residual {
            return Err(Error::Config("fields is only used by residual".into()));
        }
        let solves = match cmd {
            Command::Solve => true,
            Command::Residual => self.fields == Some(FieldSource::Solve),
            _ => false,
        };
        if solves {
            let e = self.exponents()?;
            if !e.theory_flag() {
                return Err(Error::Config(format!("derived beta = {} must exceed 1", e.beta)));
            }
        }
        if matches!(cmd, Command::Sweep | Command::Limit | Command::Oracle)
            || (cmd == Command::Residual && self.fields == Some(FieldSource::ConePlane))
        {
            self.limit_spec()?;
        }
        if cmd == Command::Sweep {
            let s = self.schedule.as_deref().unwrap_or_default();
            if s.is_empty() {
                return Err(Error::Config("schedule is empty".into()));
            }
            for &p in s {
                let (g, q) = (self.gamma.unwrap_or_default(), self.big_q.unwrap_or_default());
                let e = Exponents::from_schedule(p, g, q)?;
                if !e.theory_flag() {
                    return Err(Error::Config(format!(
                        "schedule entry p = {p} gives beta = {} <= 1",
                        e.beta
                    )));
                }
            }
        }
        if cmd == Command::Oracle {
            if self.domain != DomainKind::Rectangle {
                return Err(Error::Config("oracle needs a rectangle domain".into()));
            }
            if self.oracle_samples.unwrap_or_default() < 1000 {
                return Err(Error::Config("oracle_samples must be at least 1000".into()));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<GridDomain> {
        let (nx, ny) = (self.nx.unwrap_or(DEFAULT_GRID), self.ny.unwrap_or(DEFAULT_GRID));
        match self.domain {
            DomainKind::Disk => {
                if self.l.is_some() {
                    return Err(Error::Config("a disk takes no L".into()));
                }
                if nx != ny {
                    return Err(Error::Config(format!("a disk needs nx = ny, got {nx} and {ny}")));
                }
                GridDomain::disk(self.r, nx)
            }
            DomainKind::Rectangle => {
                let l = self.l.ok_or_else(|| Error::Config("a rectangle needs L".into()))?;
                GridDomain::rectangle(self.r, l, nx, ny)
            }
        }
    }

    /// Exponents for a single solve, from either form.
    pub fn exponents(&self) -> Result<Exponents> {
        let p = self.p.ok_or_else(|| Error::Config("a solve needs p".into()))?;
        if self.triple_form() {
            let q = self.q.ok_or_else(|| Error::Config("missing q".into()))?;
            let alpha = self.alpha.ok_or_else(|| Error::Config("missing alpha".into()))?;
            Exponents::with_derived_beta(p, q, alpha)
        } else if self.schedule_form() {
            let s = self.limit_spec()?;
            Exponents::from_schedule(p, s.gamma, s.big_q)
        } else {
            Err(Error::Config("give (p, q, alpha) or (p, gamma, Q)".into()))
        }
    }

    pub fn limit_spec(&self) -> Result<LimitSpec> {
        let gamma = self.gamma.ok_or_else(|| Error::Config("missing gamma".into()))?;
        let big_q = self.big_q.ok_or_else(|| Error::Config("missing Q".into()))?;
        match self.domain {
            DomainKind::Disk => LimitSpec::ball(gamma, big_q, self.r),
            DomainKind::Rectangle => {
                let l = self.l.ok_or_else(|| Error::Config("a rectangle needs L".into()))?;
                LimitSpec::rectangle(gamma, big_q, self.r, l)
            }
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let d = SolverOptions::default();
        let o = SolverOptions {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            tol_grad: self.tol_grad.unwrap_or(d.tol_grad),
            tol_constraint: self.tol_constraint.unwrap_or(d.tol_constraint),
            step0: self.step0.unwrap_or(d.step0),
            backtrack_factor: self.backtrack_factor.unwrap_or(d.backtrack_factor),
            seed: self.seed.unwrap_or(d.seed),
            memory: self.memory.unwrap_or(d.memory),
            warm_start: None,
        };
        o.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        Ok(o)
    }

    /// Exponents to echo next to the configuration, when a single set applies.
    pub fn derived(&self) -> Option<DerivedExponents> {
        self.exponents().ok().map(Into::into)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_materialized() {
        let c = parse_config(
            r#"{"version":1,"domain":"disk","R":1,"p":4,"q":4,"alpha":2}"#,
            Command::Solve,
        )
        .unwrap();
        assert_eq!((c.nx, c.ny), (Some(65), Some(65)));
        assert_eq!(c.max_iter, Some(5000));
        assert_eq!(c.tol_grad, Some(1e-6));
        assert_eq!(c.command, Some(Command::Solve));
    }

    #[test]
    fn schedule_arithmetic() {
        let c = parse_config(
            r#"{"version":1,"domain":"disk","R":1,"p":32,"gamma":0.5,"Q":1}"#,
            Command::Solve,
        )
        .unwrap();
        let d = c.derived().unwrap();
        assert_eq!((d.alpha, d.q, d.beta), (16.0, 32.0, 16.0));
    }

    #[test]
    fn rejects() {
        let bad = [
            r#"{"version":1,"domain":"rectangle","R":2,"L":3,"p":4,"q":4,"alpha":2}"#,
            r#"{"version":2,"domain":"disk","R":1,"p":4,"q":4,"alpha":2}"#,
            r#"{"version":1,"domain":"disk","R":1,"p":4,"q":4,"alpha":2,"colour":1}"#,
            r#"{"version":1,"domain":"disk","R":1,"p":2,"q":2,"alpha":1}"#,
            r#"{"version":1,"domain":"disk","R":1,"p":4,"q":4,"alpha":2,"gamma":0.5}"#,
            r#"{"version":1,"domain":"disk","R":1,"nx":65,"ny":33,"p":4,"q":4,"alpha":2}"#,
            r#"{"version":1,"command":"sweep","domain":"disk","R":1,"p":4,"q":4,"alpha":2}"#,
        ];
        for text in bad {
            assert!(
                matches!(
                    parse_config(text, Command::Solve),
                    Err(Error::Config(_)) | Err(Error::InvalidDomain(_))
                ),
                "{text}"
            );
        }
        let e = parse_config(bad[0], Command::Solve).unwrap_err().to_string();
        assert!(e.contains("L <= R"), "{e}");
    }
}
