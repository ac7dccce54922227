//! Verdicts backed by sufficient conditions: envelope comparison with
//! discrete oscillation tests, certificate checks for bounded positive
//! solutions, decay bounds for non-increasing solutions and the running-sup
//! functional `S(t)`, and the constant-delay criteria.
//!
//! Verdicts only ever consume rigorous envelopes.

mod certificate;
mod criteria;
mod groenwall;
mod sets;

use std::fmt;

use thiserror::Error;

use crate::engine::SimError;
use crate::envelope::EnvelopeError;
use crate::expr::EvalError;
use crate::report::Report;
use crate::trajectory::TrajectoryError;

pub use certificate::{
    construct_bounded_solution, verify_certificate, BoundsReport, Certificate, CertificateCheck,
    CertificateFailure, Tail, CERTIFICATE_TOLERANCE,
};
pub use criteria::{
    discrete_oscillation_test, lemma_constant_delay_tests, thm2_verdict, DiscreteOutcome,
    DiscreteTestInput, SequenceData,
};
pub use groenwall::{
    barrier_verdict, check_groenwall, factor_barrier, groenwall_bound, s_scan, s_value,
    DelayMajorant, GroenwallCheck, GroenwallProduct, GroenwallViolation, SScan,
    GROENWALL_TOLERANCE,
};
pub use sets::{set_m, set_n, Flavor, GridSet};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("set bounds out of order: s = {s} > t = {t}")]
    BadSetRange { s: f64, t: f64 },
    #[error("term {k}: evaluation at t = {t} failed: {source}")]
    Eval {
        k: usize,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("delay majorant unavailable at t = {0}")]
    MajorantOutOfRange(f64),
    #[error("invalid test input: {0}")]
    InvalidInput(String),
    #[error("term {k}: delay is not of the form t - sigma with constant sigma > 0")]
    NonConstantDelay { k: usize },
    #[error("certificate has no value at n = {0}")]
    CertificateDomain(i64),
    #[error("certificate fails {0}; bounds are not guaranteed")]
    CertificateRejected(CertificateFailure),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VerdictTag {
    NoPositiveSolutionUnderCond5,
    NoPositiveNonincreasing,
    PositiveSolutionExists,
    Oscillatory,
    NonOscillatory,
    Inconclusive,
}

impl VerdictTag {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictTag::NoPositiveSolutionUnderCond5 => "NoPositiveSolutionUnderCond5",
            VerdictTag::NoPositiveNonincreasing => "NoPositiveNonincreasing",
            VerdictTag::PositiveSolutionExists => "PositiveSolutionExists",
            VerdictTag::Oscillatory => "Oscillatory",
            VerdictTag::NonOscillatory => "NonOscillatory",
            VerdictTag::Inconclusive => "Inconclusive",
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != VerdictTag::Inconclusive
    }
}

impl fmt::Display for VerdictTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one criterion, with the numbers needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub tag: VerdictTag,
    /// Short name of the criterion that produced the verdict.
    pub theorem: String,
    pub evidence: Report,
}

impl Verdict {
    pub fn new(tag: VerdictTag, theorem: impl Into<String>) -> Self {
        Verdict {
            tag,
            theorem: theorem.into(),
            evidence: Report::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.evidence.push(key, value);
        self
    }

    /// `verdict=`, `theorem=` and `evidence.*` lines.
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("verdict", self.tag).push("theorem", &self.theorem);
        r.extend_prefixed("evidence", &self.evidence);
        r
    }
}
