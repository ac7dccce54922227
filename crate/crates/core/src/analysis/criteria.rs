//! Oscillation tests for the comparison equation
//!
//! ```text
//! y(n+1) - y(n) + sum_k p_k y(n - sigma_k) = 0
//! ```
//!
//! and their use on the rigorous envelopes of a continuous-time equation.
//! All inequalities are strict; `0^0 = 1`.

use crate::engine::EquationSpec;
use crate::envelope::{compute_envelopes, EnvelopeMode, EnvelopeOptions, EnvelopeTable};
use crate::report::join;

use super::{AnalysisError, Verdict, VerdictTag};

const COMPARISON_NAME: &str = "envelope-comparison";
const CONSTANT_OSC_NAME: &str = "constant-delay-oscillation";
const CONSTANT_NONOSC_NAME: &str = "constant-delay-nonoscillation";

/// Single-delay sequence `y(n+1) - y(n) + a(n) y(h(n)) = 0` for
/// `n = n0, n0 + 1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceData {
    pub n0: i64,
    pub a: Vec<f64>,
    pub h: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTestInput {
    /// Lower bounds of the coefficients.
    pub p: Vec<f64>,
    /// Lower bounds of the delays.
    pub sigma: Vec<f64>,
    pub sequence: Option<SequenceData>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOutcome {
    pub oscillatory: bool,
    /// Name of the first test that fired.
    pub fired: Option<&'static str>,
    /// `sum_k p_k (sigma_k+1)^(sigma_k+1) / sigma_k^sigma_k`
    pub weighted_sum: f64,
    /// `m (prod p_k)^(1/m) (sigma+1)^(sigma+1) / sigma^sigma`, mean `sigma`
    pub geometric_mean: f64,
    /// Largest `sum_{j=g(n)}^{n} a(j)` and its `n`.
    pub running_sum: Option<(i64, f64)>,
}

impl DiscreteOutcome {
    pub fn tag(&self) -> VerdictTag {
        if self.oscillatory {
            VerdictTag::Oscillatory
        } else {
            VerdictTag::Inconclusive
        }
    }
}

fn pow0(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e.fract() == 0.0 && e.abs() < 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// `(sigma+1)^(sigma+1) / sigma^sigma`
pub fn delay_weight(sigma: f64) -> f64 {
    pow0(sigma + 1.0, sigma + 1.0) / pow0(sigma, sigma)
}

/// `sigma^sigma / (sigma+1)^(sigma+1)`
pub fn delay_threshold(sigma: f64) -> f64 {
    pow0(sigma, sigma) / pow0(sigma + 1.0, sigma + 1.0)
}

fn validate(input: &DiscreteTestInput) -> Result<(), AnalysisError> {
    let bad = |msg: String| Err(AnalysisError::InvalidInput(msg));
    if input.p.is_empty() {
        return bad("no coefficients".into());
    }
    if input.p.len() != input.sigma.len() {
        return bad(format!(
            "{} coefficients but {} delays",
            input.p.len(),
            input.sigma.len()
        ));
    }
    if let Some(p) = input.p.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return bad(format!("coefficient bound {p}"));
    }
    if let Some(s) = input.sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return bad(format!("delay bound {s}"));
    }
    if let Some(seq) = &input.sequence {
        if seq.a.len() != seq.h.len() {
            return bad("sequence lengths differ".into());
        }
        if seq.a.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("negative or non-finite sequence coefficient".into());
        }
        for (i, &h) in seq.h.iter().enumerate() {
            if h > seq.n0 + i as i64 {
                return bad(format!(
                    "sequence delay {h} ahead of n = {}",
                    seq.n0 + i as i64
                ));
            }
        }
    }
    Ok(())
}

fn running_sum(seq: &SequenceData) -> Option<(i64, f64)> {
    let mut g = i64::MIN;
    let mut best: Option<(i64, f64)> = None;
    for (i, &h) in seq.h.iter().enumerate() {
        g = g.max(h);
        let n = seq.n0 + i as i64;
        if g < seq.n0 {
            continue;
        }
        let sum: f64 = seq.a[(g - seq.n0) as usize..=i].iter().sum();
        if best.is_none_or(|(_, b)| sum > b) {
            best = Some((n, sum));
        }
    }
    best
}

pub fn discrete_oscillation_test(
    input: &DiscreteTestInput,
) -> Result<DiscreteOutcome, AnalysisError> {
    validate(input)?;
    let m = input.p.len() as f64;
    let weighted_sum: f64 = input
        .p
        .iter()
        .zip(&input.sigma)
        .map(|(p, s)| p * delay_weight(*s))
        .sum();
    let mean_sigma = input.sigma.iter().sum::<f64>() / m;
    let product: f64 = input.p.iter().product();
    let geometric_mean = m * product.powf(1.0 / m) * delay_weight(mean_sigma);
    let running_sum = input.sequence.as_ref().and_then(running_sum);
    let fired = if weighted_sum > 1.0 {
        Some("weighted-sum")
    } else if geometric_mean > 1.0 {
        Some("geometric-mean")
    } else if running_sum.is_some_and(|(_, s)| s > 1.0) {
        Some("running-sum")
    } else {
        None
    };
    Ok(DiscreteOutcome {
        oscillatory: fired.is_some(),
        fired,
        weighted_sum,
        geometric_mean,
        running_sum,
    })
}

struct Reduction {
    p: Vec<f64>,
    sigma: Vec<f64>,
    /// `min_n sum_k a_low[k][n]`
    p_total: f64,
    sigma_min: f64,
}

/// Constant comparison data from a table, or the reason it cannot be used.
fn reduce(env: &EnvelopeTable) -> Result<Reduction, String> {
    let m = env.m();
    let mut p = vec![f64::INFINITY; m];
    let mut sigma = vec![i64::MAX; m];
    let mut p_total = f64::INFINITY;
    for n in env.range() {
        for k in 0..m {
            let a = env.a_low(k, n);
            if a < 0.0 {
                return Err(format!(
                    "coefficient {} not provably non-negative at n = {n}",
                    k + 1
                ));
            }
            p[k] = p[k].min(a);
            sigma[k] = sigma[k].min(n - env.hf_high(k, n));
        }
        p_total = p_total.min(env.sum_a_low(n));
    }
    if let Some(k) = sigma.iter().position(|&s| s < 0) {
        return Err(format!("delay {} reaches beyond the shifted step", k + 1));
    }
    let sigma_min = *sigma.iter().min().expect("at least one term") as f64;
    Ok(Reduction {
        p,
        sigma: sigma.into_iter().map(|s| s as f64).collect(),
        p_total,
        sigma_min,
    })
}

/// Envelope comparison: for each shift `alpha`, bound the coefficients from
/// below and the delay floors from above over `n_from..=n_to`, and run the
/// discrete tests on the resulting constant comparison equation, per term
/// and with the terms pooled at the smallest delay.
pub fn thm2_verdict(
    spec: &EquationSpec,
    n_from: i64,
    n_to: i64,
    alphas: &[f64],
    opts: &EnvelopeOptions,
) -> Result<Verdict, AnalysisError> {
    let mut skipped = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for &alpha in alphas {
        let env = compute_envelopes(spec, n_from, n_to, alpha, EnvelopeMode::Rigorous, opts)?;
        let red = match reduce(&env) {
            Ok(r) => r,
            Err(why) => {
                skipped.push(format!("alpha={alpha}: {why}"));
                continue;
            }
        };
        let sequence = (spec.m() == 1).then(|| SequenceData {
            n0: n_from,
            a: env.range().map(|n| env.a_low(0, n)).collect(),
            h: env.range().map(|n| env.hf_high(0, n)).collect(),
        });
        let per_term = discrete_oscillation_test(&DiscreteTestInput {
            p: red.p.clone(),
            sigma: red.sigma.clone(),
            sequence,
        })?;
        let pooled = discrete_oscillation_test(&DiscreteTestInput {
            p: vec![red.p_total],
            sigma: vec![red.sigma_min],
            sequence: None,
        })?;
        best = best
            .max(per_term.weighted_sum)
            .max(per_term.geometric_mean)
            .max(pooled.weighted_sum);
        let fired = match (per_term.fired, pooled.fired) {
            (Some(t), _) => Some(t.to_string()),
            (None, Some(t)) => Some(format!("pooled-{t}")),
            (None, None) => None,
        };
        if let Some(test) = fired {
            let mut v = Verdict::new(VerdictTag::NoPositiveSolutionUnderCond5, COMPARISON_NAME)
                .with("alpha", alpha)
                .with("test", test)
                .with("n_range", format!("{n_from}..{n_to}"))
                .with("p", join(&red.p))
                .with("sigma", join(&red.sigma))
                .with("p_sum", red.p.iter().sum::<f64>())
                .with("p_total", red.p_total)
                .with("sigma_min", red.sigma_min)
                .with("threshold", delay_threshold(red.sigma_min))
                .with("weighted_sum", per_term.weighted_sum)
                .with("geometric_mean", per_term.geometric_mean)
                .with("pooled_weighted_sum", pooled.weighted_sum);
            if let Some((n, s)) = per_term.running_sum {
                v = v.with("running_sum", s).with("running_sum_n", n);
            }
            if red.sigma_min >= 1.0 {
                // a shorter comparison delay is always admissible
                v = v
                    .with("threshold_sigma1", delay_threshold(1.0))
                    .with("exceeds_sigma1", red.p_total > delay_threshold(1.0));
            }
            return Ok(v.with("scope", "finite n_range"));
        }
    }
    let mut v = Verdict::new(VerdictTag::Inconclusive, COMPARISON_NAME)
        .with("alphas", join(alphas))
        .with("n_range", format!("{n_from}..{n_to}"));
    if best.is_finite() {
        v = v.with("best_value", best);
    }
    if !skipped.is_empty() {
        v = v.with("skipped", skipped.join("; "));
    }
    Ok(v)
}

/// Constant `sigma_k` with `h_k(t) = t - sigma_k` on the grid of the range.
fn constant_delays(
    spec: &EquationSpec,
    n_from: i64,
    n_to: i64,
    opts: &EnvelopeOptions,
) -> Result<Vec<f64>, AnalysisError> {
    let grid = opts.grid;
    let mut out = Vec::with_capacity(spec.m());
    for (k, term) in spec.terms.iter().enumerate() {
        let mut sigma: Option<f64> = None;
        for n in n_from..=n_to {
            for j in 0..grid.q() {
                let t = grid.abscissa(n, j);
                let h = term.h.eval(t).map_err(|source| AnalysisError::Eval {
                    k: k + 1,
                    t,
                    source,
                })?;
                let d = t - h;
                match sigma {
                    None => sigma = Some(d),
                    Some(s) if (d - s).abs() > 1e-12 * (1.0 + t.abs()) => {
                        return Err(AnalysisError::NonConstantDelay { k: k + 1 })
                    }
                    _ => {}
                }
            }
        }
        let s = sigma.unwrap_or(f64::NAN);
        if !(s > 0.0) {
            return Err(AnalysisError::NonConstantDelay { k: k + 1 });
        }
        let r = s.round();
        out.push(if (s - r).abs() <= 1e-12 * (1.0 + s) {
            r
        } else {
            s
        });
    }
    Ok(out)
}

/// Criteria for constant delays `h_k(t) = t - sigma_k`, using rigorous
/// coefficient bounds over `n_from..=n_to`.
pub fn lemma_constant_delay_tests(
    spec: &EquationSpec,
    n_from: i64,
    n_to: i64,
    opts: &EnvelopeOptions,
) -> Result<Verdict, AnalysisError> {
    let sigma = constant_delays(spec, n_from, n_to, opts)?;
    let env = compute_envelopes(spec, n_from, n_to, 0.0, EnvelopeMode::Rigorous, opts)?;
    let p: Vec<f64> = (0..spec.m())
        .map(|k| {
            env.range()
                .map(|n| env.a_low(k, n))
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        })
        .collect();
    let out = discrete_oscillation_test(&DiscreteTestInput {
        p: p.clone(),
        sigma: sigma.clone(),
        sequence: None,
    })?;
    if let Some(test) = out.fired {
        return Ok(Verdict::new(VerdictTag::Oscillatory, CONSTANT_OSC_NAME)
            .with("test", test)
            .with("p", join(&p))
            .with("sigma", join(&sigma))
            .with("weighted_sum", out.weighted_sum)
            .with("geometric_mean", out.geometric_mean));
    }
    if spec.m() == 1 {
        let a_high = env
            .range()
            .map(|n| env.a_high(0, n))
            .fold(f64::NEG_INFINITY, f64::max);
        let threshold = delay_threshold(sigma[0]);
        if a_high <= threshold {
            return Ok(
                Verdict::new(VerdictTag::NonOscillatory, CONSTANT_NONOSC_NAME)
                    .with("a_high", a_high)
                    .with("sigma", sigma[0])
                    .with("threshold", threshold)
                    .with("scope", format!("n_range {n_from}..{n_to}")),
            );
        }
    }
    Ok(Verdict::new(VerdictTag::Inconclusive, CONSTANT_OSC_NAME)
        .with("p", join(&p))
        .with("sigma", join(&sigma))
        .with("weighted_sum", out.weighted_sum)
        .with("geometric_mean", out.geometric_mean))
}
