//! Decay bounds for positive non-increasing solutions
//!
//! ```text
//! x(t) <= x(s) * prod_{r in N(s,t)} (1 - sum_k a_k(r))      (same with M)
//! ```
//!
//! and the functional
//!
//! ```text
//! S(t) = sum_{u in N(g(t),t)} sum_k a_k(u) prod_{r in N(h_k(u), g(t))} (1 - sum_i a_i(r))
//! ```
//!
//! A witness `S(t) > 1` rules out positive non-increasing solutions.

use crate::engine::EquationSpec;
use crate::envelope::RunningSup;
use crate::expr::Expr;
use crate::report::Report;
use crate::trajectory::{GridSpec, Trajectory};

use super::sets::{set_n, set_of, Flavor};
use super::{AnalysisError, Verdict, VerdictTag};

/// Allowed excess of `x(t)` over the bound before a pair is reported.
pub const GROENWALL_TOLERANCE: f64 = 1e-9;

const DECAY_NAME: &str = "decay-bound";
const FUNCTIONAL_NAME: &str = "running-sup-functional";

fn coefficient_sum(spec: &EquationSpec, t: f64) -> Result<f64, AnalysisError> {
    let mut sum = 0.0;
    for (k, term) in spec.terms.iter().enumerate() {
        sum += term.a.eval(t).map_err(|source| AnalysisError::Eval {
            k: k + 1,
            t,
            source,
        })?;
    }
    Ok(sum)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroenwallProduct {
    pub value: f64,
    pub factors: usize,
    /// Some factor `1 - sum a` was zero or negative.
    pub nonpositive_factor: bool,
}

pub fn groenwall_bound(
    spec: &EquationSpec,
    s: f64,
    t: f64,
    flavor: Flavor,
) -> Result<GroenwallProduct, AnalysisError> {
    let set = set_of(flavor, s, t)?;
    let mut p = GroenwallProduct {
        value: 1.0,
        factors: set.len(),
        nonpositive_factor: false,
    };
    for &r in &set.elements {
        let f = 1.0 - coefficient_sum(spec, r)?;
        p.nonpositive_factor |= f <= 0.0;
        p.value *= f;
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroenwallViolation {
    pub s: f64,
    pub t: f64,
    pub flavor: Flavor,
    pub x_t: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroenwallCheck {
    /// Why the check was not run, when the trajectory is not positive and
    /// non-increasing on the range of the pairs.
    pub skipped: Option<String>,
    pub checked: usize,
    pub violations: Vec<GroenwallViolation>,
}

impl GroenwallCheck {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        match &self.skipped {
            Some(why) => r.push("status", "skipped").push("warning", why),
            None => r.push("status", "checked"),
        };
        r.push("pairs", self.checked)
            .push("violations", self.violations.len());
        for (i, v) in self.violations.iter().enumerate() {
            r.push(
                format!("violation.{i}"),
                format!(
                    "s={} t={} set={} x_t={} bound={}",
                    v.s,
                    v.t,
                    v.flavor.as_str(),
                    v.x_t,
                    v.bound
                ),
            );
        }
        r
    }
}

fn precondition(traj: &Trajectory, lo: f64, hi: f64) -> Option<String> {
    let mut prev: Option<(f64, f64)> = None;
    for (t, v, _) in traj.samples() {
        if t < lo || t > hi {
            continue;
        }
        if v <= 0.0 {
            return Some(format!("trajectory not positive at t = {t}"));
        }
        if let Some((pt, pv)) = prev {
            if v > pv {
                return Some(format!("trajectory increases between t = {pt} and t = {t}"));
            }
        }
        prev = Some((t, v));
    }
    None
}

/// Test both decay bounds on every `(s, t)` pair.
pub fn check_groenwall(
    traj: &Trajectory,
    spec: &EquationSpec,
    pairs: &[(f64, f64)],
) -> Result<GroenwallCheck, AnalysisError> {
    let mut out = GroenwallCheck::default();
    if pairs.is_empty() {
        return Ok(out);
    }
    for &(s, t) in pairs {
        if !(s <= t) {
            return Err(AnalysisError::BadSetRange { s, t });
        }
        traj.value_at(s)?;
        traj.value_at(t)?;
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(why) = precondition(traj, lo, hi) {
        out.skipped = Some(why);
        return Ok(out);
    }
    for &(s, t) in pairs {
        let xs = traj.value_at(s)?;
        let xt = traj.value_at(t)?;
        for flavor in [Flavor::N, Flavor::M] {
            let bound = xs * groenwall_bound(spec, s, t, flavor)?.value;
            if xt > bound + GROENWALL_TOLERANCE {
                out.violations.push(GroenwallViolation {
                    s,
                    t,
                    flavor,
                    x_t: xt,
                    bound,
                });
            }
        }
        out.checked += 1;
    }
    Ok(out)
}

/// First grid point `r` in pieces `n_from..=n_to` with `sum_k a_k(r) >= 1`.
/// A positive non-increasing solution cannot survive past such a point.
pub fn factor_barrier(
    spec: &EquationSpec,
    n_from: i64,
    n_to: i64,
    grid: GridSpec,
) -> Result<Option<f64>, AnalysisError> {
    for n in n_from..=n_to {
        for j in 0..grid.q() {
            let r = grid.abscissa(n, j);
            if coefficient_sum(spec, r)? >= 1.0 {
                return Ok(Some(r));
            }
        }
    }
    Ok(None)
}

pub fn barrier_verdict(r: f64) -> Verdict {
    Verdict::new(VerdictTag::NoPositiveNonincreasing, DECAY_NAME)
        .with("r", r)
        .with("reason", "coefficient sum reaches 1")
}

/// Non-decreasing majorant `g` of the delays.
#[derive(Clone, Debug, PartialEq)]
pub enum DelayMajorant {
    Sampled(RunningSup),
    Exact(Expr),
}

impl DelayMajorant {
    pub fn at(&self, t: f64) -> Result<f64, AnalysisError> {
        match self {
            DelayMajorant::Sampled(rs) => rs.g_at(t).ok_or(AnalysisError::MajorantOutOfRange(t)),
            DelayMajorant::Exact(e) => {
                e.eval(t)
                    .map_err(|source| AnalysisError::Eval { k: 0, t, source })
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DelayMajorant::Sampled(_) => "sampled",
            DelayMajorant::Exact(_) => "exact",
        }
    }
}

pub fn s_value(spec: &EquationSpec, g: &DelayMajorant, t: f64) -> Result<f64, AnalysisError> {
    let gt = g.at(t)?;
    if gt > t {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for u in set_n(gt, t)?.elements {
        for (k, term) in spec.terms.iter().enumerate() {
            let wrap = |source| AnalysisError::Eval {
                k: k + 1,
                t: u,
                source,
            };
            let a = term.a.eval(u).map_err(wrap)?;
            let h = term.h.eval(u).map_err(wrap)?;
            let mut prod = 1.0;
            // a grid majorant may undershoot h(u); the set is then empty
            if h <= gt {
                for r in set_n(h, gt)?.elements {
                    prod *= 1.0 - coefficient_sum(spec, r)?;
                }
            }
            total += a * prod;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SScan {
    pub values: Vec<(f64, f64)>,
    pub sup: f64,
    pub argmax: f64,
    pub verdict: Verdict,
}

/// `h_k(h_j(s)) > 0` for every scanned `s >= t`.
fn iterates_positive(spec: &EquationSpec, points: &[f64], t: f64) -> Result<bool, AnalysisError> {
    for &s in points.iter().filter(|&&s| s >= t) {
        for (j, outer) in spec.terms.iter().enumerate() {
            let hj = outer.h.eval(s).map_err(|source| AnalysisError::Eval {
                k: j + 1,
                t: s,
                source,
            })?;
            for (k, inner) in spec.terms.iter().enumerate() {
                let hk = inner.h.eval(hj).map_err(|source| AnalysisError::Eval {
                    k: k + 1,
                    t: hj,
                    source,
                })?;
                if hk <= 0.0 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Evaluate `S` at `t_from, t_from + step, ...` up to `t_to`. A value above
/// one counts as a witness only if the delay iterates stay positive from
/// there on; the limsup hypothesis is thus checked on a finite horizon.
pub fn s_scan(
    spec: &EquationSpec,
    g: &DelayMajorant,
    t_from: f64,
    t_to: f64,
    step: f64,
) -> Result<SScan, AnalysisError> {
    if !(step > 0.0) || !(t_from <= t_to) {
        return Err(AnalysisError::InvalidInput(format!(
            "scan range {t_from}..{t_to} step {step}"
        )));
    }
    let count = ((t_to - t_from) / step + 1e-9).floor() as usize + 1;
    let points: Vec<f64> = (0..count).map(|i| t_from + i as f64 * step).collect();
    let mut values = Vec::with_capacity(count);
    let mut sup = f64::NEG_INFINITY;
    let mut argmax = t_from;
    let mut witness: Option<(f64, f64)> = None;
    for &t in &points {
        let s = s_value(spec, g, t)?;
        values.push((t, s));
        if s > sup {
            sup = s;
            argmax = t;
        }
        if s > 1.0 && witness.is_none_or(|(_, w)| s > w) && iterates_positive(spec, &points, t)? {
            witness = Some((t, s));
        }
    }
    let scope = format!("finite scan {t_from}..{t_to} step {step}");
    let verdict = match witness {
        Some((t, s)) => Verdict::new(VerdictTag::NoPositiveNonincreasing, FUNCTIONAL_NAME)
            .with("t", t)
            .with("S", s)
            .with("g", g.at(t)?)
            .with("majorant", g.kind())
            .with("delay_iterates_positive_beyond_t", true)
            .with("scope", scope),
        None => Verdict::new(VerdictTag::Inconclusive, FUNCTIONAL_NAME)
            .with("sup_S", sup)
            .with("argmax_t", argmax)
            .with("majorant", g.kind())
            .with("scope", scope),
    };
    Ok(SScan {
        values,
        sup,
        argmax,
        verdict,
    })
}
