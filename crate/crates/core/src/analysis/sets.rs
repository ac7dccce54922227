//! Integer-spaced point sets
//!
//! ```text
//! N(s, t) = { s + j : j >= 0, s + j <= t - 1 }
//! M(s, t) = { t - j : j >= 1, t - j >= s }
//! ```
//!
//! Both constraints reduce to `s + i <= t` for `i = j + 1` and `i = j`
//! respectively, so the two sets always have the same size. Membership is
//! decided in exact arithmetic.

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    N,
    M,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::N => "N",
            Flavor::M => "M",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSet {
    pub flavor: Flavor,
    pub base: f64,
    /// Ascending.
    pub elements: Vec<f64>,
}

impl GridSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// `s + i <= t` evaluated without rounding.
fn fits(s: f64, i: u64, t: f64) -> bool {
    let b = i as f64;
    let hi = s + b;
    let bb = hi - s;
    let lo = (s - (hi - bb)) + (b - bb);
    hi < t || (hi == t && lo <= 0.0)
}

/// Number of integers `i >= 1` with `s + i <= t`.
fn count(s: f64, t: f64) -> Result<usize, AnalysisError> {
    if !(s <= t) || !s.is_finite() || !t.is_finite() {
        return Err(AnalysisError::BadSetRange { s, t });
    }
    let mut c = ((t - s).floor().max(0.0)) as u64;
    while c > 0 && !fits(s, c, t) {
        c -= 1;
    }
    while fits(s, c + 1, t) {
        c += 1;
    }
    Ok(c as usize)
}

pub fn set_n(s: f64, t: f64) -> Result<GridSet, AnalysisError> {
    let c = count(s, t)?;
    Ok(GridSet {
        flavor: Flavor::N,
        base: s,
        elements: (0..c).map(|j| s + j as f64).collect(),
    })
}

pub fn set_m(s: f64, t: f64) -> Result<GridSet, AnalysisError> {
    let c = count(s, t)?;
    Ok(GridSet {
        flavor: Flavor::M,
        base: s,
        elements: (1..=c).rev().map(|j| t - j as f64).collect(),
    })
}

pub(crate) fn set_of(flavor: Flavor, s: f64, t: f64) -> Result<GridSet, AnalysisError> {
    match flavor {
        Flavor::N => set_n(s, t),
        Flavor::M => set_m(s, t),
    }
}
