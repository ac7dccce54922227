//! Lower/upper sequences of the coefficients and of the delay floors over
//! the unit steps `[n + alpha, n + 1 + alpha)`:
//!
//! ```text
//! a_low(n)  <= inf a_k      a_high(n)  >= sup a_k
//! hf_low(n) <= inf floor(h_k)   hf_high(n) >= sup floor(h_k)
//! ```
//!
//! Rigorous tables come from interval enclosures and are safe to feed into
//! theorem checks. Sampled tables are grid extrema: they sit inside the
//! rigorous ones and are only used for diagnostics.

use std::io;

use thiserror::Error;

use crate::engine::EquationSpec;
use crate::expr::{EvalError, Expr, Interval, IntervalError, UnaryOp};
use crate::trajectory::GridSpec;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("shift alpha = {0} must lie in [0, 1)")]
    BadAlpha(f64),
    #[error("empty range {from}..={to}")]
    BadRange { from: i64, to: i64 },
    #[error("term {k}, step {n}: {source}")]
    Interval {
        k: usize,
        n: i64,
        #[source]
        source: IntervalError,
    },
    #[error("term {k}: {source}")]
    Eval {
        k: usize,
        #[source]
        source: EvalError,
    },
    #[error("term {k}, step {n}: delay floor reaches {hf_high}, beyond the step")]
    DelayAhead { k: usize, n: i64, hf_high: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeMode {
    Rigorous,
    Sampled,
}

impl EnvelopeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvelopeMode::Rigorous => "rigorous",
            EnvelopeMode::Sampled => "sampled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeOptions {
    /// Sample grid for the sampled mode.
    pub grid: GridSpec,
    /// Sub-intervals per unit step in the rigorous mode.
    pub subdivisions: usize,
    /// Extra bisections of a sub-interval whose delay floor is not a
    /// single integer.
    pub refine_depth: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            grid: GridSpec::default(),
            subdivisions: 16,
            refine_depth: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeEntry {
    pub a_low: f64,
    pub a_high: f64,
    pub hf_low: i64,
    pub hf_high: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeTable {
    pub mode: EnvelopeMode,
    pub alpha: f64,
    pub n_from: i64,
    pub n_to: i64,
    /// `entries[k][n - n_from]`, `k` zero-based.
    entries: Vec<Vec<EnvelopeEntry>>,
}

impl EnvelopeTable {
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn range(&self) -> std::ops::RangeInclusive<i64> {
        self.n_from..=self.n_to
    }

    pub fn contains(&self, n: i64) -> bool {
        self.range().contains(&n)
    }

    /// Entry for term `k` (zero-based) at step `n`.
    pub fn get(&self, k: usize, n: i64) -> Option<&EnvelopeEntry> {
        if !self.contains(n) {
            return None;
        }
        self.entries.get(k)?.get((n - self.n_from) as usize)
    }

    fn entry(&self, k: usize, n: i64) -> &EnvelopeEntry {
        self.get(k, n)
            .unwrap_or_else(|| panic!("no envelope entry for k={k}, n={n}"))
    }

    pub fn a_low(&self, k: usize, n: i64) -> f64 {
        self.entry(k, n).a_low
    }

    pub fn a_high(&self, k: usize, n: i64) -> f64 {
        self.entry(k, n).a_high
    }

    pub fn hf_low(&self, k: usize, n: i64) -> i64 {
        self.entry(k, n).hf_low
    }

    pub fn hf_high(&self, k: usize, n: i64) -> i64 {
        self.entry(k, n).hf_high
    }

    pub fn sum_a_low(&self, n: i64) -> f64 {
        (0..self.m()).map(|k| self.a_low(k, n)).sum()
    }

    /// CSV rows `n,k,a_low,a_high,hf_low,hf_high,mode,alpha`, `k` one-based.
    pub fn write_csv<W: io::Write>(&self, w: W, header: bool) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if header {
            out.write_record([
                "n", "k", "a_low", "a_high", "hf_low", "hf_high", "mode", "alpha",
            ])?;
        }
        for n in self.range() {
            for k in 0..self.m() {
                let e = self.entry(k, n);
                out.write_record([
                    n.to_string(),
                    (k + 1).to_string(),
                    e.a_low.to_string(),
                    e.a_high.to_string(),
                    e.hf_low.to_string(),
                    e.hf_high.to_string(),
                    self.mode.as_str().to_string(),
                    self.alpha.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// The default shift grid `{ j / count : j = 0..count }`.
pub fn alpha_grid(count: usize) -> Vec<f64> {
    let count = count.max(1);
    (0..count).map(|j| j as f64 / count as f64).collect()
}

fn refine(
    a: &Expr,
    floor_h: &Expr,
    piece: Interval,
    depth: usize,
    e: &mut EnvelopeEntry,
) -> Result<(), IntervalError> {
    let hr = floor_h.eval_interval(piece)?;
    if hr.lo != hr.hi && depth > 0 {
        for half in piece.subdivide(2) {
            refine(a, floor_h, half, depth - 1, e)?;
        }
        return Ok(());
    }
    let ar = a.eval_interval(piece)?;
    e.a_low = e.a_low.min(ar.lo);
    e.a_high = e.a_high.max(ar.hi);
    e.hf_low = e.hf_low.min(hr.lo as i64);
    e.hf_high = e.hf_high.max(hr.hi as i64);
    Ok(())
}

fn rigorous_entry(
    a: &Expr,
    floor_h: &Expr,
    k: usize,
    n: i64,
    step: Interval,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeEntry, EnvelopeError> {
    let mut e = EnvelopeEntry {
        a_low: f64::INFINITY,
        a_high: f64::NEG_INFINITY,
        hf_low: i64::MAX,
        hf_high: i64::MIN,
    };
    for piece in step.subdivide(opts.subdivisions) {
        refine(a, floor_h, piece, opts.refine_depth, &mut e).map_err(|source| {
            EnvelopeError::Interval {
                k: k + 1,
                n,
                source,
            }
        })?;
    }
    Ok(e)
}

fn sampled_entry(
    a: &Expr,
    h: &Expr,
    k: usize,
    n: i64,
    alpha: f64,
    grid: GridSpec,
) -> Result<EnvelopeEntry, EnvelopeError> {
    let mut e = EnvelopeEntry {
        a_low: f64::INFINITY,
        a_high: f64::NEG_INFINITY,
        hf_low: i64::MAX,
        hf_high: i64::MIN,
    };
    let wrap = |source| EnvelopeError::Eval { k: k + 1, source };
    for j in 0..grid.q() {
        let t = grid.abscissa(n, j) + alpha;
        let av = a.eval(t).map_err(wrap)?;
        let hv = h.eval(t).map_err(wrap)?.floor() as i64;
        e.a_low = e.a_low.min(av);
        e.a_high = e.a_high.max(av);
        e.hf_low = e.hf_low.min(hv);
        e.hf_high = e.hf_high.max(hv);
    }
    Ok(e)
}

/// Envelope table for steps `n_from..=n_to`, shifted by `alpha`.
pub fn compute_envelopes(
    spec: &EquationSpec,
    n_from: i64,
    n_to: i64,
    alpha: f64,
    mode: EnvelopeMode,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeTable, EnvelopeError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(EnvelopeError::BadAlpha(alpha));
    }
    if n_from > n_to {
        return Err(EnvelopeError::BadRange {
            from: n_from,
            to: n_to,
        });
    }
    // with alpha > 0 the step reaches into [n+1, n+1+alpha)
    let ceiling = if alpha > 0.0 { 1 } else { 0 };
    let mut entries = Vec::with_capacity(spec.m());
    for (k, term) in spec.terms.iter().enumerate() {
        let floor_h = Expr::unary(UnaryOp::Floor, term.h.clone());
        let mut row = Vec::new();
        for n in n_from..=n_to {
            let e = match mode {
                EnvelopeMode::Rigorous => {
                    let lo = n as f64 + alpha;
                    let hi = (n + 1) as f64 + alpha;
                    let step = Interval::half_open(lo, hi);
                    rigorous_entry(&term.a, &floor_h, k, n, step, opts)?
                }
                EnvelopeMode::Sampled => sampled_entry(&term.a, &term.h, k, n, alpha, opts.grid)?,
            };
            if e.hf_high > n + ceiling {
                return Err(EnvelopeError::DelayAhead {
                    k: k + 1,
                    n,
                    hf_high: e.hf_high,
                });
            }
            row.push(e);
        }
        entries.push(row);
    }
    Ok(EnvelopeTable {
        mode,
        alpha,
        n_from,
        n_to,
        entries,
    })
}

/// Grid running maxima `g_k(t) = max_{s <= t} h_k(s)` and `g = max_k g_k`,
/// sampled at `j/Q` from 0. An unattained supremum may be undershot by up to
/// one grid step.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningSup {
    grid: GridSpec,
    times: Vec<f64>,
    per_term: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl RunningSup {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn term_values(&self, k: usize) -> &[f64] {
        &self.per_term[k]
    }

    /// Value at the last grid point not exceeding `t`.
    pub fn g_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 || self.times.is_empty() {
            return None;
        }
        let q = self.grid.q() as f64;
        let mut i = (t * q).floor() as usize;
        if i >= self.times.len() {
            if t > *self.times.last().expect("non-empty") + self.grid.step() {
                return None;
            }
            i = self.times.len() - 1;
        }
        while i > 0 && self.times[i] > t {
            i -= 1;
        }
        while i + 1 < self.times.len() && self.times[i + 1] <= t {
            i += 1;
        }
        Some(self.g[i])
    }
}

pub fn running_sup(
    spec: &EquationSpec,
    t_to: f64,
    grid: GridSpec,
) -> Result<RunningSup, EnvelopeError> {
    let q = grid.q();
    let count = (t_to * q as f64).floor() as usize + 1;
    let times: Vec<f64> = (0..count)
        .map(|i| grid.abscissa((i / q) as i64, i % q))
        .collect();
    let mut per_term = Vec::with_capacity(spec.m());
    for (k, term) in spec.terms.iter().enumerate() {
        let mut run = f64::NEG_INFINITY;
        let mut col = Vec::with_capacity(count);
        for &t in &times {
            let h = term
                .h
                .eval(t)
                .map_err(|source| EnvelopeError::Eval { k: k + 1, source })?;
            run = run.max(h);
            col.push(run);
        }
        per_term.push(col);
    }
    let g = (0..count)
        .map(|i| {
            per_term
                .iter()
                .map(|c| c[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(RunningSup {
        grid,
        times,
        per_term,
        g,
    })
}
