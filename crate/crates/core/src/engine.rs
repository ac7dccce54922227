//! Forward simulation of
//!
//! ```text
//! x(t+1) = x(t) - sum_k a_k(t) * x(h_k(t)),   a_k >= 0,  h_k(t) <= t
//! ```
//!
//! started from a history on `[H, 1)`, plus residual checks of closed-form
//! candidates and horizon-limited sign diagnostics.
//!
//! Delayed arguments that fall between grid points are resolved by the
//! trajectory's intra-piece linear interpolation. That is exact whenever
//! the solution is affine in `{t}` on every piece and first-order accurate
//! otherwise; reports carry the policy under `interpolation`.

use thiserror::Error;

use crate::expr::{EvalError, Expr, ParseError};
use crate::report::{join, Report};
use crate::trajectory::{GridSpec, Provenance, SignEvent, Trajectory, TrajectoryError};

/// Name of the delayed-argument policy, echoed into every report.
pub const INTERPOLATION_POLICY: &str = "linear-within-piece";

/// Threshold below which per-piece minima count as vanished.
pub const COND5_TOLERANCE: f64 = 1e-12;

/// Fraction of the horizon inspected by the `eventually_*` flags.
pub const EVENTUAL_WINDOW: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("equation has no terms")]
    NoTerms,
    #[error("cannot parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: ParseError,
    },
    #[error("history start {0} must be an integer <= 0")]
    BadHistoryStart(i64),
    #[error("horizon {0} must be at least 2")]
    BadHorizon(i64),
    #[error("history evaluation failed: {0}")]
    History(#[source] EvalError),
    #[error("term {k}: evaluation failed: {source}")]
    Eval {
        k: usize,
        #[source]
        source: EvalError,
    },
    #[error("term {k}: a({t}) = {value} is negative")]
    NegativeCoefficient { k: usize, t: f64, value: f64 },
    #[error("term {k}: h({t}) = {h} exceeds t")]
    DelayAhead { k: usize, t: f64, h: f64 },
    #[error("term {k}: h({t}) = {h} reaches below the history start {start}")]
    DelayUnderflow {
        k: usize,
        t: f64,
        h: f64,
        start: i64,
    },
    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub a: Expr,
    pub h: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquationSpec {
    pub label: String,
    pub terms: Vec<Term>,
}

impl EquationSpec {
    pub fn new(label: impl Into<String>, terms: Vec<Term>) -> Result<Self, SimError> {
        if terms.is_empty() {
            return Err(SimError::NoTerms);
        }
        Ok(EquationSpec {
            label: label.into(),
            terms,
        })
    }

    /// Build from `(a_k, h_k)` source strings.
    pub fn parse(label: impl Into<String>, terms: &[(&str, &str)]) -> Result<Self, SimError> {
        let parse = |what: String, src: &str| {
            src.parse::<Expr>()
                .map_err(|source| SimError::Parse { what, source })
        };
        let terms = terms
            .iter()
            .enumerate()
            .map(|(i, (a, h))| {
                Ok(Term {
                    a: parse(format!("a_{}", i + 1), a)?,
                    h: parse(format!("h_{}", i + 1), h)?,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        EquationSpec::new(label, terms)
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    /// `sum_k a_k(t)`.
    pub fn coefficient_sum(&self, t: f64) -> Result<f64, SimError> {
        let mut s = 0.0;
        for (k, term) in self.terms.iter().enumerate() {
            s += term
                .a
                .eval(t)
                .map_err(|source| SimError::Eval { k: k + 1, source })?;
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub history: Expr,
    pub start: i64,
}

impl InitialCondition {
    pub fn new(history: Expr, start: i64) -> Result<Self, SimError> {
        if start > 0 {
            return Err(SimError::BadHistoryStart(start));
        }
        Ok(InitialCondition { history, start })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Last computed piece; the trajectory covers `[H, horizon + 1)`.
    pub horizon: i64,
    pub grid: GridSpec,
}

impl SimConfig {
    pub fn new(horizon: i64, grid: GridSpec) -> Result<Self, SimError> {
        if horizon < 2 {
            return Err(SimError::BadHorizon(horizon));
        }
        Ok(SimConfig { horizon, grid })
    }
}

/// Smallest `h_k(t)` over the grid points of `[t_from, t_to)`.
pub fn prescan_delays(
    spec: &EquationSpec,
    t_from: i64,
    t_to: i64,
    grid: GridSpec,
) -> Result<f64, SimError> {
    let mut lowest = f64::INFINITY;
    for n in t_from..t_to {
        for j in 0..grid.q() {
            let t = grid.abscissa(n, j);
            for (k, term) in spec.terms.iter().enumerate() {
                let h = term
                    .h
                    .eval(t)
                    .map_err(|source| SimError::Eval { k: k + 1, source })?;
                lowest = lowest.min(h);
            }
        }
    }
    Ok(lowest)
}

/// Right-hand side `x(t) - sum_k a_k(t) x(h_k(t))` on a partial trajectory.
/// The hypotheses `a_k(t) >= 0` and `h_k(t) <= t` are checked exactly.
pub fn step_value(spec: &EquationSpec, traj: &Trajectory, t: f64) -> Result<f64, SimError> {
    let x = traj.value_at(t)?;
    let mut sum = 0.0;
    for (k, term) in spec.terms.iter().enumerate() {
        let k = k + 1;
        let a = term
            .a
            .eval(t)
            .map_err(|source| SimError::Eval { k, source })?;
        if a < 0.0 {
            return Err(SimError::NegativeCoefficient { k, t, value: a });
        }
        let h = term
            .h
            .eval(t)
            .map_err(|source| SimError::Eval { k, source })?;
        if h > t {
            return Err(SimError::DelayAhead { k, t, h });
        }
        if h < traj.start() as f64 {
            return Err(SimError::DelayUnderflow {
                k,
                t,
                h,
                start: traj.start(),
            });
        }
        sum += a * traj.value_at(h)?;
    }
    let v = x - sum;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SimError::NonFinite { t: t + 1.0 })
    }
}

/// Run the recurrence from `t = 0` up to the horizon.
pub fn simulate(
    spec: &EquationSpec,
    init: &InitialCondition,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    let grid = cfg.grid;
    let mut traj = Trajectory::new(init.start, grid);
    for n in init.start..1 {
        let piece = (0..grid.q())
            .map(|j| init.history.eval(grid.abscissa(n, j)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(SimError::History)?;
        traj.push_piece(piece, Provenance::History)?;
    }
    for n in 0..cfg.horizon {
        let piece = (0..grid.q())
            .map(|j| step_value(spec, &traj, grid.abscissa(n, j)))
            .collect::<Result<Vec<_>, _>>()?;
        traj.push_piece(piece, Provenance::Computed)?;
    }
    Ok(traj)
}

/// Largest `|x(t+1) - x(t) + sum_k a_k(t) x(h_k(t))|` over `samples`.
pub fn residual(spec: &EquationSpec, candidate: &Expr, samples: &[f64]) -> Result<f64, SimError> {
    let ev = |e: &Expr, t: f64, k: usize| e.eval(t).map_err(|source| SimError::Eval { k, source });
    let mut worst: f64 = 0.0;
    for &t in samples {
        let mut r = ev(candidate, t + 1.0, 0)? - ev(candidate, t, 0)?;
        for (k, term) in spec.terms.iter().enumerate() {
            let a = ev(&term.a, t, k + 1)?;
            let h = ev(&term.h, t, k + 1)?;
            r += a * ev(candidate, h, 0)?;
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillationReport {
    pub from: f64,
    pub end: f64,
    pub window_start: f64,
    pub events: Vec<SignEvent>,
    pub eventually_positive: bool,
    pub eventually_negative: bool,
    pub oscillatory_within_horizon: bool,
}

impl OscillationReport {
    pub fn first_event(&self) -> Option<SignEvent> {
        self.events.first().copied()
    }

    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("scope", "horizon-limited")
            .push("interpolation", INTERPOLATION_POLICY)
            .push("from", self.from)
            .push("end", self.end)
            .push("window_start", self.window_start)
            .push("sign_events", self.events.len());
        if let Some(e) = self.first_event() {
            r.push("first_event.t_left", e.t_left)
                .push("first_event.t_right", e.t_right);
        }
        r.push("eventually_positive", self.eventually_positive)
            .push("eventually_negative", self.eventually_negative)
            .push(
                "oscillatory_within_horizon",
                self.oscillatory_within_horizon,
            );
        r
    }
}

/// Sign behaviour of the samples from `from` on. Nothing here claims
/// infinite-time oscillation; the flags only look at the final 20% of the
/// covered range.
pub fn detect_oscillation(traj: &Trajectory, from: f64) -> OscillationReport {
    let end = traj.end() as f64;
    let window_start = end - EVENTUAL_WINDOW * (end - from);
    let events = traj.sign_events(from, end);
    let tail: Vec<f64> = traj
        .samples()
        .filter(|&(t, _, _)| t >= window_start && t >= from)
        .map(|(_, v, _)| v)
        .collect();
    OscillationReport {
        from,
        end,
        window_start,
        eventually_positive: !tail.is_empty() && tail.iter().all(|&v| v > 0.0),
        eventually_negative: !tail.is_empty() && tail.iter().all(|&v| v < 0.0),
        oscillatory_within_horizon: events.iter().any(|e| e.t_left >= window_start),
        events,
    }
}

/// Per-piece minima `y(n) = min over the grid of [n, n+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition5Report {
    pub minima: Vec<f64>,
    /// Extrapolated left limits `x(n+1-)`; an infimum of zero can hide at the
    /// open end of a piece where no sample sits.
    pub left_limits: Vec<f64>,
    pub all_positive: bool,
    pub first_decay: Option<i64>,
    pub first_vanishing_limit: Option<i64>,
    pub cond5_suspect: bool,
}

impl Condition5Report {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("pieces", self.minima.len())
            .push("all_positive", self.all_positive)
            .push("tolerance", COND5_TOLERANCE)
            .push(
                "first_decay_n",
                self.first_decay
                    .map_or("none".to_string(), |n| n.to_string()),
            )
            .push(
                "first_vanishing_limit_n",
                self.first_vanishing_limit
                    .map_or("none".to_string(), |n| n.to_string()),
            )
            .push("cond5_suspect", self.cond5_suspect)
            .push("minima", join(&self.minima));
        r
    }
}

pub fn check_condition5(traj: &Trajectory, horizon_n: i64) -> Result<Condition5Report, SimError> {
    let mut minima = Vec::new();
    let mut left_limits = Vec::new();
    for n in 0..horizon_n {
        let piece = traj.piece(n).ok_or(TrajectoryError::OutOfRange {
            t: n as f64,
            start: traj.start(),
            end: traj.end(),
        })?;
        minima.push(piece.iter().copied().fold(f64::INFINITY, f64::min));
        left_limits.push(traj.left_limit(n).expect("piece exists"));
    }
    let all_positive = minima.iter().all(|&y| y > 0.0);
    let first_decay = minima
        .iter()
        .position(|&y| y < COND5_TOLERANCE)
        .map(|i| i as i64);
    let first_vanishing_limit = left_limits
        .iter()
        .position(|&y| y < COND5_TOLERANCE)
        .map(|i| i as i64);
    Ok(Condition5Report {
        cond5_suspect: all_positive && (first_decay.is_some() || first_vanishing_limit.is_some()),
        minima,
        left_limits,
        all_positive,
        first_decay,
        first_vanishing_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(q: usize) -> GridSpec {
        GridSpec::new(q).unwrap()
    }

    #[test]
    fn zero_coefficients_repeat_the_history() {
        let spec = EquationSpec::parse("zero", &[("0", "t - 1")]).unwrap();
        let init = InitialCondition::new("1 + frac(t)^2".parse().unwrap(), -1).unwrap();
        let traj = simulate(&spec, &init, &SimConfig::new(5, grid(8)).unwrap()).unwrap();
        for (t, v, _) in traj.samples() {
            let f = t - t.floor();
            assert_eq!(v, 1.0 + f * f, "t = {t}");
        }
        assert_eq!(traj.end(), 6);
        assert_eq!(traj.provenance(0), Some(Provenance::History));
        assert_eq!(traj.provenance(1), Some(Provenance::Computed));
    }

    #[test]
    fn example4_closed_form() {
        let spec = EquationSpec::parse("ex4", &[("1/2 - 1/2*frac(t)", "t")]).unwrap();
        let init = InitialCondition::new(Expr::Const(1.0), 0).unwrap();
        let traj = simulate(&spec, &init, &SimConfig::new(4, grid(64)).unwrap()).unwrap();
        assert_eq!(traj.value_at(2.5).unwrap(), 0.5625);
    }

    #[test]
    fn hypotheses_are_enforced() {
        let init = InitialCondition::new(Expr::Const(1.0), -1).unwrap();
        let cfg = SimConfig::new(3, grid(4)).unwrap();
        let neg = EquationSpec::parse("neg", &[("t - 1", "t - 1")]).unwrap();
        assert!(matches!(
            simulate(&neg, &init, &cfg),
            Err(SimError::NegativeCoefficient { k: 1, .. })
        ));
        let ahead = EquationSpec::parse("ahead", &[("0.1", "t + 0.25")]).unwrap();
        assert!(matches!(
            simulate(&ahead, &init, &cfg),
            Err(SimError::DelayAhead { .. })
        ));
        let deep = EquationSpec::parse("deep", &[("0.1", "t - 2")]).unwrap();
        assert!(matches!(
            simulate(&deep, &init, &cfg),
            Err(SimError::DelayUnderflow { start: -1, .. })
        ));
        assert!(InitialCondition::new(Expr::Const(1.0), 1).is_err());
        assert!(SimConfig::new(1, grid(4)).is_err());
        assert!(matches!(
            EquationSpec::new("x", vec![]),
            Err(SimError::NoTerms)
        ));
    }

    #[test]
    fn residual_of_double_root() {
        let spec = EquationSpec::parse("q", &[("1/4", "t - 1")]).unwrap();
        let cand: Expr = "2^(-t)".parse().unwrap();
        let samples: Vec<f64> = (0..200).map(|i| i as f64 * 0.137).collect();
        assert!(residual(&spec, &cand, &samples).unwrap() <= 1e-15);
        let wrong: Expr = "3^(-t)".parse().unwrap();
        assert!(residual(&spec, &wrong, &samples).unwrap() > 1e-3);
    }

    #[test]
    fn oscillation_flags() {
        let pos = Trajectory::from_fn(0, 10, grid(8), |t| 1.0 + t).unwrap();
        let r = detect_oscillation(&pos, 0.0);
        assert!(r.eventually_positive && !r.eventually_negative);
        assert!(!r.oscillatory_within_horizon && r.events.is_empty());
        let sine =
            Trajectory::from_fn(0, 10, grid(8), |t| (std::f64::consts::PI * t).sin()).unwrap();
        let r = detect_oscillation(&sine, 0.0);
        assert!(r.oscillatory_within_horizon);
        assert!(!r.eventually_positive);
        assert_eq!(r.to_report().get("scope"), Some("horizon-limited"));
    }

    #[test]
    fn condition5_minima() {
        let flat = Trajectory::from_fn(0, 5, grid(8), |_| 1.0).unwrap();
        let r = check_condition5(&flat, 5).unwrap();
        assert_eq!(r.minima, vec![1.0; 5]);
        assert!(!r.cond5_suspect);

        let decaying = Trajectory::from_fn(0, 45, grid(64), |t| {
            0.5f64.powi(t.floor() as i32) * (1.0 - (t - t.floor()))
        })
        .unwrap();
        let r = check_condition5(&decaying, 45).unwrap();
        for (n, y) in r.minima.iter().enumerate() {
            assert_eq!(*y, 0.5f64.powi(n as i32) / 64.0);
        }
        // 2^-n / 64 < 1e-12 first at n = 34
        assert_eq!(r.first_decay, Some(34));
        assert_eq!(r.first_vanishing_limit, Some(0));
        assert!(r.cond5_suspect);
    }
}
