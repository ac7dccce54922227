//! Certificates `(u, V)` for a positive solution trapped between two
//! positive non-increasing sequences. With rigorous envelopes the checked
//! conditions are, for `n >= 0`,
//!
//! ```text
//! u(n) <= V(n)
//! u(n+1) <= u(n) - sum_k a_high[k][n] V(hf_low[k][n])
//! V(n+1) >= V(n) - sum_k a_low[k][n]  u(hf_high[k][n])
//! ```
//!
//! and the solution started from `phi(n)` in `[u(n), V(n)]`, `n <= 0`, then
//! satisfies `u(n) <= x(t) <= V(n)` on `[n, n+1)`.

use std::fmt;

use crate::engine::{prescan_delays, simulate, EquationSpec, InitialCondition, SimConfig};
use crate::envelope::{compute_envelopes, EnvelopeMode, EnvelopeOptions, EnvelopeTable};
use crate::expr::{CmpOp, Cond, Expr};
use crate::report::Report;
use crate::trajectory::Trajectory;

use super::{AnalysisError, Verdict, VerdictTag};

/// Rounding allowance in the certificate inequalities.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-15;

/// Bound tolerance for the constructed solution.
pub const BOUNDS_TOLERANCE: f64 = 1e-9;

const CERTIFICATE_NAME: &str = "certificate-bounds";

/// Values for `n < 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    /// `u(n) = u(0)`, `V(n) = V(0)`.
    Constant,
    /// `u[i]`, `v[i]` hold the values at `n = -1 - i`.
    Values { u: Vec<f64>, v: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// `u[n]` for `n = 0..=horizon`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub tail: Tail,
}

impl Certificate {
    pub fn new(u: Vec<f64>, v: Vec<f64>, tail: Tail) -> Result<Self, AnalysisError> {
        if u.is_empty() || u.len() != v.len() {
            return Err(AnalysisError::InvalidInput(format!(
                "certificate needs equally long non-empty u and V (got {} and {})",
                u.len(),
                v.len()
            )));
        }
        if let Tail::Values { u: tu, v: tv } = &tail {
            if tu.len() != tv.len() {
                return Err(AnalysisError::InvalidInput("tail lengths differ".into()));
            }
        }
        Ok(Certificate { u, v, tail })
    }

    /// Evaluate `u` and `V` at `n = 0..=horizon`, with `t` standing for `n`.
    pub fn from_exprs(u: &Expr, v: &Expr, horizon: i64, tail: Tail) -> Result<Self, AnalysisError> {
        let eval = |e: &Expr| {
            (0..=horizon)
                .map(|n| {
                    let t = n as f64;
                    e.eval(t)
                        .map_err(|source| AnalysisError::Eval { k: 0, t, source })
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Certificate::new(eval(u)?, eval(v)?, tail)
    }

    pub fn horizon(&self) -> i64 {
        self.u.len() as i64 - 1
    }

    /// Smallest index with a value.
    pub fn first(&self) -> Option<i64> {
        match &self.tail {
            Tail::Constant => None,
            Tail::Values { u, .. } => Some(-(u.len() as i64)),
        }
    }

    fn lookup(&self, n: i64, upper: bool) -> Result<f64, AnalysisError> {
        let (main, tail) = match (&self.tail, upper) {
            (Tail::Values { v, .. }, true) => (&self.v, Some(v)),
            (Tail::Values { u, .. }, false) => (&self.u, Some(u)),
            (Tail::Constant, true) => (&self.v, None),
            (Tail::Constant, false) => (&self.u, None),
        };
        if n >= 0 {
            return main
                .get(n as usize)
                .copied()
                .ok_or(AnalysisError::CertificateDomain(n));
        }
        match tail {
            None => Ok(main[0]),
            Some(t) => t
                .get((-1 - n) as usize)
                .copied()
                .ok_or(AnalysisError::CertificateDomain(n)),
        }
    }

    pub fn u_at(&self, n: i64) -> Result<f64, AnalysisError> {
        self.lookup(n, false)
    }

    pub fn v_at(&self, n: i64) -> Result<f64, AnalysisError> {
        self.lookup(n, true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CertificateFailure {
    NotPositive {
        n: i64,
    },
    NotNonincreasing {
        n: i64,
    },
    /// `u(n) <= V(n)` fails.
    Order {
        n: i64,
    },
    /// The recursion for `u` fails, by `slack < 0`.
    Lower {
        n: i64,
        slack: f64,
    },
    /// The recursion for `V` fails.
    Upper {
        n: i64,
        slack: f64,
    },
}

impl CertificateFailure {
    pub fn condition(&self) -> &'static str {
        match self {
            CertificateFailure::NotPositive { .. } => "positivity",
            CertificateFailure::NotNonincreasing { .. } => "monotonicity",
            CertificateFailure::Order { .. } => "order",
            CertificateFailure::Lower { .. } => "lower",
            CertificateFailure::Upper { .. } => "upper",
        }
    }

    pub fn index(&self) -> i64 {
        match *self {
            CertificateFailure::NotPositive { n }
            | CertificateFailure::NotNonincreasing { n }
            | CertificateFailure::Order { n }
            | CertificateFailure::Lower { n, .. }
            | CertificateFailure::Upper { n, .. } => n,
        }
    }
}

impl fmt::Display for CertificateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} condition at n = {}", self.condition(), self.index())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateCheck {
    pub n_from: i64,
    pub n_to: i64,
    pub failure: Option<CertificateFailure>,
    /// `u(n) - sum a_high V(hf_low) - u(n+1)` per checked `n`.
    pub lower_slack: Vec<f64>,
    /// `V(n+1) - V(n) + sum a_low u(hf_high)` per checked `n`.
    pub upper_slack: Vec<f64>,
}

impl CertificateCheck {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn max_abs_lower_slack(&self) -> f64 {
        self.lower_slack.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("status", if self.passed() { "pass" } else { "fail" })
            .push("n_range", format!("{}..{}", self.n_from, self.n_to))
            .push("lower_slack_max_abs", self.max_abs_lower_slack())
            .push(
                "upper_slack_min",
                self.upper_slack
                    .iter()
                    .fold(f64::INFINITY, |m, &s| m.min(s)),
            );
        if let Some(f) = &self.failure {
            r.push("failed_condition", f.condition())
                .push("failed_n", f.index());
        }
        r
    }

    pub fn verdict(&self) -> Verdict {
        let tag = if self.passed() {
            VerdictTag::PositiveSolutionExists
        } else {
            VerdictTag::Inconclusive
        };
        let mut v = Verdict::new(tag, CERTIFICATE_NAME);
        for (k, val) in self.to_report().entries() {
            v.evidence.push(k.clone(), val);
        }
        v.with("scope", "finite n_range")
    }
}

/// Check the certificate on the range of `env`, which must be a rigorous,
/// unshifted table starting at `n >= 0`.
pub fn verify_certificate(
    cert: &Certificate,
    env: &EnvelopeTable,
) -> Result<CertificateCheck, AnalysisError> {
    if env.mode != EnvelopeMode::Rigorous || env.alpha != 0.0 {
        return Err(AnalysisError::InvalidInput(
            "certificates need a rigorous table with alpha = 0".into(),
        ));
    }
    if env.n_from < 0 {
        return Err(AnalysisError::InvalidInput(format!(
            "table starts at n = {} < 0",
            env.n_from
        )));
    }
    let n_to = env.n_to.min(cert.horizon() - 1);
    if n_to < env.n_from {
        return Err(AnalysisError::CertificateDomain(env.n_from + 1));
    }
    let mut check = CertificateCheck {
        n_from: env.n_from,
        n_to,
        failure: None,
        lower_slack: Vec::new(),
        upper_slack: Vec::new(),
    };
    let fail = |mut c: CertificateCheck, f| {
        c.failure = Some(f);
        Ok(c)
    };

    // every index the inequalities can touch
    let mut lowest = 0;
    for n in env.n_from..=n_to {
        for k in 0..env.m() {
            lowest = lowest.min(env.hf_low(k, n));
        }
    }
    let lowest = cert.first().map_or(lowest, |f| f.max(lowest));
    let mut prev: Option<(f64, f64)> = None;
    for n in lowest..=n_to + 1 {
        let (u, v) = (cert.u_at(n)?, cert.v_at(n)?);
        if !(u > 0.0 && v > 0.0) {
            return fail(check, CertificateFailure::NotPositive { n });
        }
        if let Some((pu, pv)) = prev {
            if u > pu || v > pv {
                return fail(check, CertificateFailure::NotNonincreasing { n });
            }
        }
        prev = Some((u, v));
        if n >= 0 && u > v {
            return fail(check, CertificateFailure::Order { n });
        }
    }

    for n in env.n_from..=n_to {
        let mut down = 0.0;
        let mut up = 0.0;
        for k in 0..env.m() {
            down += env.a_high(k, n) * cert.v_at(env.hf_low(k, n))?;
            up += env.a_low(k, n) * cert.u_at(env.hf_high(k, n))?;
        }
        let lower = cert.u_at(n)? - down - cert.u_at(n + 1)?;
        let upper = cert.v_at(n + 1)? - cert.v_at(n)? + up;
        check.lower_slack.push(lower);
        check.upper_slack.push(upper);
        if lower < -CERTIFICATE_TOLERANCE {
            return fail(check, CertificateFailure::Lower { n, slack: lower });
        }
        if upper < -CERTIFICATE_TOLERANCE {
            return fail(check, CertificateFailure::Upper { n, slack: upper });
        }
    }
    Ok(check)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    /// `(n, min x, max x, u(n), V(n))` per unit piece.
    pub rows: Vec<(i64, f64, f64, f64, f64)>,
    /// Pieces leaving `[u(n) - tol, V(n) + tol]`.
    pub violations: Vec<i64>,
    pub history_start: i64,
}

impl BoundsReport {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("history_start", self.history_start)
            .push("pieces", self.rows.len())
            .push("violations", self.violations.len())
            .push("tolerance", BOUNDS_TOLERANCE);
        if let Some(n) = self.violations.first() {
            r.push("first_violation", n);
        }
        r
    }
}

/// Piecewise-constant history `phi(floor(t))` on `[start, 1)`.
fn step_history(values: &[(i64, f64)]) -> Expr {
    let (last, rest) = values.split_last().expect("non-empty history");
    let branches = rest
        .iter()
        .map(|&(n, v)| {
            let c = Cond::cmp(CmpOp::Lt, Expr::var(), Expr::constant((n + 1) as f64));
            (c, Expr::constant(v))
        })
        .collect();
    Expr::Piecewise {
        branches,
        otherwise: Box::new(Expr::constant(last.1)),
    }
}

/// Verify `cert` on `0..horizon` and simulate from the history
/// `phi(n) = u(n) + blend (V(n) - u(n))`, `blend` in `[0, 1]`, reporting the
/// per-piece range of the solution against `[u(n), V(n)]`.
pub fn construct_bounded_solution(
    spec: &EquationSpec,
    cert: &Certificate,
    horizon: i64,
    blend: f64,
    opts: &EnvelopeOptions,
) -> Result<(Trajectory, BoundsReport), AnalysisError> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(AnalysisError::InvalidInput(format!(
            "blend {blend} outside [0, 1]"
        )));
    }
    let env = compute_envelopes(spec, 0, horizon - 1, 0.0, EnvelopeMode::Rigorous, opts)?;
    let check = verify_certificate(cert, &env)?;
    if let Some(f) = check.failure {
        return Err(AnalysisError::CertificateRejected(f));
    }
    let lowest = prescan_delays(spec, 0, horizon, opts.grid)?;
    let start = (lowest.floor() as i64).min(0);
    let phi = (start..=0)
        .map(|n| Ok((n, cert.u_at(n)? + blend * (cert.v_at(n)? - cert.u_at(n)?))))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let init = InitialCondition::new(step_history(&phi), start)?;
    let traj = simulate(spec, &init, &SimConfig::new(horizon, opts.grid)?)?;

    let mut report = BoundsReport {
        rows: Vec::new(),
        violations: Vec::new(),
        history_start: start,
    };
    for n in start..=horizon {
        let piece = traj.piece(n).expect("simulated range");
        let lo = piece.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = piece.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (u, v) = (cert.u_at(n)?, cert.v_at(n)?);
        if lo < u - BOUNDS_TOLERANCE || hi > v + BOUNDS_TOLERANCE {
            report.violations.push(n);
        }
        report.rows.push((n, lo, hi, u, v));
    }
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(terms: &[(&str, &str)]) -> EquationSpec {
        EquationSpec::parse("test", terms).unwrap()
    }

    fn ex3() -> (EquationSpec, Certificate) {
        let s = spec(&[("0.5^(floor(t)+2)", "floor(t) - 1 - 0.8*cos(t)")]);
        let cert = Certificate::from_exprs(
            &"0.5 + 0.5^(t+1)".parse().unwrap(),
            &"1".parse().unwrap(),
            41,
            Tail::Constant,
        )
        .unwrap();
        (s, cert)
    }

    fn table(s: &EquationSpec, to: i64) -> EnvelopeTable {
        compute_envelopes(
            s,
            0,
            to,
            0.0,
            EnvelopeMode::Rigorous,
            &EnvelopeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn tails() {
        let c = Certificate::new(vec![1.0, 0.5], vec![2.0, 1.0], Tail::Constant).unwrap();
        assert_eq!((c.u_at(-7).unwrap(), c.v_at(-7).unwrap()), (1.0, 2.0));
        assert!(matches!(
            c.u_at(2),
            Err(AnalysisError::CertificateDomain(2))
        ));
        let c = Certificate::new(
            vec![1.0],
            vec![1.0],
            Tail::Values {
                u: vec![2.0, 4.0],
                v: vec![2.0, 4.0],
            },
        )
        .unwrap();
        assert_eq!(c.u_at(-2).unwrap(), 4.0);
        assert!(c.v_at(-3).is_err());
        assert!(Certificate::new(vec![1.0], vec![], Tail::Constant).is_err());
    }

    #[test]
    fn example_certificate_is_tight() {
        let (s, cert) = ex3();
        let check = verify_certificate(&cert, &table(&s, 40)).unwrap();
        assert!(check.passed(), "{:?}", check.failure);
        assert_eq!(check.lower_slack.len(), 41);
        assert!(check.max_abs_lower_slack() <= 1e-15);
        assert_eq!(check.verdict().tag, VerdictTag::PositiveSolutionExists);
    }

    #[test]
    fn constant_pair_fails_lower_recursion() {
        let s = spec(&[("0.1", "t - 1")]);
        let cert = Certificate::new(vec![1.0; 10], vec![1.0; 10], Tail::Constant).unwrap();
        let check = verify_certificate(&cert, &table(&s, 5)).unwrap();
        assert_eq!(
            check.failure.map(|f| (f.condition(), f.index())),
            Some(("lower", 0))
        );
    }

    #[test]
    fn shape_failures() {
        let s = spec(&[("0", "t - 1")]);
        let env = table(&s, 3);
        let rising =
            Certificate::new(vec![1.0, 1.0, 2.0, 2.0, 2.0], vec![3.0; 5], Tail::Constant).unwrap();
        assert_eq!(
            verify_certificate(&rising, &env).unwrap().failure,
            Some(CertificateFailure::NotNonincreasing { n: 2 })
        );
        let crossed = Certificate::new(vec![1.0; 5], vec![0.5; 5], Tail::Constant).unwrap();
        assert_eq!(
            verify_certificate(&crossed, &env).unwrap().failure,
            Some(CertificateFailure::Order { n: 0 })
        );
        let zero = Certificate::new(vec![0.0; 5], vec![1.0; 5], Tail::Constant).unwrap();
        assert!(matches!(
            verify_certificate(&zero, &env).unwrap().failure,
            Some(CertificateFailure::NotPositive { .. })
        ));
        let sampled = compute_envelopes(
            &s,
            0,
            3,
            0.0,
            EnvelopeMode::Sampled,
            &EnvelopeOptions::default(),
        )
        .unwrap();
        assert!(verify_certificate(&crossed, &sampled).is_err());
    }

    #[test]
    fn example_solution_stays_in_bounds() {
        let (s, cert) = ex3();
        let (traj, rep) =
            construct_bounded_solution(&s, &cert, 30, 0.0, &EnvelopeOptions::default()).unwrap();
        assert_eq!(rep.history_start, -2);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert_eq!(traj.end(), 31);
        assert!(rep.rows.iter().all(|r| r.2 <= 1.0 + BOUNDS_TOLERANCE));
    }

    #[test]
    fn zero_coefficient_gives_constant_solution() {
        let s = spec(&[("0", "t - 1")]);
        let cert = Certificate::new(vec![1.0; 12], vec![1.0; 12], Tail::Constant).unwrap();
        let (traj, rep) =
            construct_bounded_solution(&s, &cert, 10, 0.5, &EnvelopeOptions::default()).unwrap();
        assert!(rep.violations.is_empty());
        assert!(traj.samples().all(|(_, v, _)| v == 1.0));
    }

    #[test]
    fn piecewise_constant_lift() {
        // z(n+1) - z(n) + z(n-1)/4 = 0 has the positive solution 2^-n
        let s = spec(&[("0.25", "floor(t) - 1")]);
        let z: Vec<f64> = (0..=21).map(|n| 0.5f64.powi(n)).collect();
        let tail = Tail::Values {
            u: vec![2.0, 4.0],
            v: vec![2.0, 4.0],
        };
        let cert = Certificate::new(z.clone(), z.clone(), tail).unwrap();
        let check = verify_certificate(&cert, &table(&s, 20)).unwrap();
        assert!(check.passed());
        assert!(check
            .lower_slack
            .iter()
            .chain(&check.upper_slack)
            .all(|&x| x == 0.0));
        let (traj, rep) =
            construct_bounded_solution(&s, &cert, 20, 0.0, &EnvelopeOptions::default()).unwrap();
        assert!(rep.violations.is_empty());
        for (t, v, _) in traj.samples().filter(|s| s.0 >= 0.0) {
            assert_eq!(v, 0.5f64.powi(t.floor() as i32), "t = {t}");
        }
    }

    #[test]
    fn rejected_certificate_is_an_error() {
        let s = spec(&[("0.1", "t - 1")]);
        let cert = Certificate::new(vec![1.0; 12], vec![1.0; 12], Tail::Constant).unwrap();
        assert!(matches!(
            construct_bounded_solution(&s, &cert, 10, 0.0, &EnvelopeOptions::default()),
            Err(AnalysisError::CertificateRejected(_))
        ));
    }
}
