//! JSON equation-spec files.
//!
//! ```json
//! {
//!   "label": "quarter",
//!   "terms": [{ "a": "0.25", "h": "t - 1" }],
//!   "history": { "expr": "2^(-t)", "start": -1 },
//!   "sim": { "T": 30, "Q": 64 },
//!   "analysis": {
//!     "n_range": [0, 30],
//!     "alpha_grid": 16,
//!     "t_scan": { "from": 2, "to": 30, "step": 0.5 },
//!     "g_expr": "t - 1"
//!   },
//!   "certificate": { "u": "2^(-t)", "V": [1, 1, 1], "tail": { "u": [2], "V": [2] } }
//! }
//! ```
//!
//! Only `label` and `terms` are required. `alpha_grid` is either a count
//! (`j / count`) or an explicit list; certificate sequences are either value
//! lists starting at `n = 0` or expressions in `t` evaluated at integers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, Certificate, Tail};
use crate::engine::{EquationSpec, InitialCondition, SimConfig, SimError, Term};
use crate::envelope::alpha_grid;
use crate::expr::{parse, Expr, ParseError};
use crate::trajectory::GridSpec;

pub const DEFAULT_T: f64 = 40.0;
pub const DEFAULT_ALPHA_COUNT: usize = 16;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot parse {field}: {source}")]
    Expr {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid spec: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub a: String,
    pub h: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub expr: String,
    pub start: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Q")]
    pub q: usize,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            t: DEFAULT_T,
            q: GridSpec::DEFAULT_Q,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaGrid {
    Count(usize),
    Values(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub n_range: [i64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<AlphaGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_expr: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeqSpec {
    Values(Vec<f64>),
    Expr(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub u: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub u: SeqSpec,
    #[serde(rename = "V")]
    pub v: SeqSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub label: String,
    pub terms: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<HistorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSpec>,
}

fn expr(field: impl Into<String>, text: &str) -> Result<Expr, SpecError> {
    parse(text).map_err(|source| SpecError::Expr {
        field: field.into(),
        source,
    })
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError::Invalid(msg.into()))
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: SpecFile = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    /// Schema-level checks: every expression parses, ranges are ordered.
    pub fn validate(&self) -> Result<(), SpecError> {
        self.equation()?;
        self.initial_condition()?;
        self.sim_config()?;
        if let Some(a) = &self.analysis {
            if a.n_range[0] > a.n_range[1] {
                return invalid(format!("n_range {:?} is empty", a.n_range));
            }
            self.alphas()?;
            if let Some(s) = a.t_scan {
                if !(s.step > 0.0 && s.from <= s.to) {
                    return invalid("t_scan needs from <= to and step > 0");
                }
            }
            if let Some(g) = &a.g_expr {
                expr("analysis.g_expr", g)?;
            }
        }
        if let Some(c) = &self.certificate {
            for (name, seq) in [("certificate.u", &c.u), ("certificate.V", &c.v)] {
                match seq {
                    SeqSpec::Expr(e) => {
                        expr(name, e)?;
                    }
                    SeqSpec::Values(v) if v.is_empty() => {
                        return invalid(format!("{name} is empty"))
                    }
                    SeqSpec::Values(_) => {}
                }
            }
            if let Some(t) = &c.tail {
                if t.u.len() != t.v.len() {
                    return invalid("certificate tail lengths differ");
                }
            }
        }
        Ok(())
    }

    pub fn equation(&self) -> Result<EquationSpec, SpecError> {
        if self.terms.is_empty() {
            return invalid("terms is empty");
        }
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(Term {
                    a: expr(format!("terms[{i}].a"), &t.a)?,
                    h: expr(format!("terms[{i}].h"), &t.h)?,
                })
            })
            .collect::<Result<Vec<_>, SpecError>>()?;
        EquationSpec::new(self.label.clone(), terms).map_err(|e| SpecError::Invalid(e.to_string()))
    }

    pub fn initial_condition(&self) -> Result<Option<InitialCondition>, SpecError> {
        let Some(h) = &self.history else {
            return Ok(None);
        };
        let e = expr("history.expr", &h.expr)?;
        match InitialCondition::new(e, h.start) {
            Ok(ic) => Ok(Some(ic)),
            Err(SimError::BadHistoryStart(s)) => invalid(format!("history.start {s} must be <= 0")),
            Err(e) => invalid(e.to_string()),
        }
    }

    pub fn sim_spec(&self) -> SimSpec {
        self.sim.unwrap_or_default()
    }

    pub fn sim_config(&self) -> Result<SimConfig, SpecError> {
        let s = self.sim_spec();
        if s.t.fract() != 0.0 || !s.t.is_finite() {
            return invalid(format!("sim.T = {} must be an integer", s.t));
        }
        let grid = GridSpec::new(s.q).map_err(|e| SpecError::Invalid(e.to_string()))?;
        SimConfig::new(s.t as i64, grid).map_err(|e| SpecError::Invalid(e.to_string()))
    }

    pub fn grid(&self) -> Result<GridSpec, SpecError> {
        Ok(self.sim_config()?.grid)
    }

    /// `n_range`, defaulting to `0..=T`.
    pub fn n_range(&self) -> (i64, i64) {
        match &self.analysis {
            Some(a) => (a.n_range[0], a.n_range[1]),
            None => (0, self.sim_spec().t as i64),
        }
    }

    pub fn alphas(&self) -> Result<Vec<f64>, SpecError> {
        let grid = self.analysis.as_ref().and_then(|a| a.alpha_grid.clone());
        match grid {
            None => Ok(alpha_grid(DEFAULT_ALPHA_COUNT)),
            Some(AlphaGrid::Count(0)) => invalid("alpha_grid count must be positive"),
            Some(AlphaGrid::Count(c)) => Ok(alpha_grid(c)),
            Some(AlphaGrid::Values(v)) => {
                if v.is_empty() || v.iter().any(|a| !(0.0..1.0).contains(a)) {
                    return invalid("alpha_grid values must lie in [0, 1)");
                }
                Ok(v)
            }
        }
    }

    pub fn majorant_expr(&self) -> Result<Option<Expr>, SpecError> {
        match self.analysis.as_ref().and_then(|a| a.g_expr.as_ref()) {
            Some(g) => Ok(Some(expr("analysis.g_expr", g)?)),
            None => Ok(None),
        }
    }

    /// Certificate values on `0..=horizon` (lists must be at least that
    /// long; longer lists are kept whole).
    pub fn certificate(&self, horizon: i64) -> Result<Option<Certificate>, SpecError> {
        let Some(c) = &self.certificate else {
            return Ok(None);
        };
        let seq = |name: &str, s: &SeqSpec| -> Result<Vec<f64>, SpecError> {
            match s {
                SeqSpec::Values(v) => Ok(v.clone()),
                SeqSpec::Expr(text) => {
                    let e = expr(name, text)?;
                    (0..=horizon)
                        .map(|n| {
                            e.eval(n as f64).map_err(|err| {
                                SpecError::Invalid(format!("{name} at n = {n}: {err}"))
                            })
                        })
                        .collect()
                }
            }
        };
        let tail = match &c.tail {
            None => Tail::Constant,
            Some(t) => Tail::Values {
                u: t.u.clone(),
                v: t.v.clone(),
            },
        };
        Certificate::new(
            seq("certificate.u", &c.u)?,
            seq("certificate.V", &c.v)?,
            tail,
        )
        .map(Some)
        .map_err(|e: AnalysisError| SpecError::Invalid(e.to_string()))
    }
}
