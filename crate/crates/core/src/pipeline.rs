//! Command drivers: each takes a spec file and returns a report plus the
//! files to write, without touching the file system.

use thiserror::Error;

use crate::analysis::{
    barrier_verdict, construct_bounded_solution, factor_barrier, lemma_constant_delay_tests,
    s_scan, thm2_verdict, verify_certificate, AnalysisError, DelayMajorant, Verdict,
};
use crate::engine::{
    check_condition5, detect_oscillation, simulate, SimError, INTERPOLATION_POLICY,
};
use crate::envelope::{
    compute_envelopes, running_sup, EnvelopeError, EnvelopeMode, EnvelopeOptions,
};
use crate::report::Report;
use crate::specfile::{AlphaGrid, SpecError, SpecFile};
use crate::trajectory::Trajectory;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("spec has no {0} section")]
    Missing(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    /// Problems with the spec file itself, as opposed to failures while
    /// running it.
    pub fn is_schema(&self) -> bool {
        matches!(self, PipelineError::Spec(_) | PipelineError::Missing(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// A verdict or a passing check.
    Ok,
    Inconclusive,
    /// A check did not pass.
    Failed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub report: Report,
    /// `(file name, contents)`
    pub files: Vec<(String, String)>,
    pub status: Status,
}

/// Command-line overrides of spec values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub q: Option<usize>,
    pub t: Option<f64>,
    pub alpha_count: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, spec: &SpecFile) -> Result<SpecFile, SpecError> {
        let mut s = spec.clone();
        if self.q.is_some() || self.t.is_some() {
            let mut sim = s.sim.unwrap_or_default();
            if let Some(q) = self.q {
                sim.q = q;
            }
            if let Some(t) = self.t {
                sim.t = t;
            }
            s.sim = Some(sim);
        }
        if let Some(c) = self.alpha_count {
            let n_range = s.n_range();
            let a = s.analysis.get_or_insert(crate::specfile::AnalysisSpec {
                n_range: [n_range.0, n_range.1],
                alpha_grid: None,
                t_scan: None,
                g_expr: None,
            });
            a.alpha_grid = Some(AlphaGrid::Count(c));
        }
        s.validate()?;
        Ok(s)
    }
}

fn envelope_options(spec: &SpecFile) -> Result<EnvelopeOptions, SpecError> {
    Ok(EnvelopeOptions {
        grid: spec.grid()?,
        ..EnvelopeOptions::default()
    })
}

fn trajectory_csv(traj: &Trajectory) -> Result<String, csv::Error> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn header(command: &str, spec: &SpecFile) -> Report {
    let mut r = Report::new();
    r.push("label", &spec.label).push("command", command);
    r
}

pub fn run_simulate(spec: &SpecFile) -> Result<Output, PipelineError> {
    let eq = spec.equation()?;
    let init = spec
        .initial_condition()?
        .ok_or(PipelineError::Missing("history"))?;
    let cfg = spec.sim_config()?;
    let traj = simulate(&eq, &init, &cfg)?;
    let mut r = header("simulate", spec);
    r.push("interpolation", INTERPOLATION_POLICY)
        .push("history_start", init.start)
        .push("T", cfg.horizon)
        .push("Q", cfg.grid.q());
    r.extend_prefixed("detection", &detect_oscillation(&traj, 0.0).to_report());
    r.extend_prefixed(
        "condition5",
        &check_condition5(&traj, cfg.horizon + 1)?.to_report(),
    );
    Ok(Output {
        report: r,
        files: vec![("trajectory.csv".into(), trajectory_csv(&traj)?)],
        status: Status::Ok,
    })
}

/// Every applicable criterion; the first conclusive one (certificate,
/// functional scan, envelope comparison, factor barrier, constant-delay
/// tests, in that order) becomes the headline verdict. The certificate and
/// the scan only run when the spec file asks for them, so they go first.
pub fn run_analyze(spec: &SpecFile) -> Result<Output, PipelineError> {
    let eq = spec.equation()?;
    let (n0, n1) = spec.n_range();
    let opts = envelope_options(spec)?;
    let grid = opts.grid;
    let mut sections: Vec<(&str, Option<Verdict>, Report)> = Vec::new();

    match spec.certificate(n1 + 1)? {
        Some(cert) => {
            let env = compute_envelopes(&eq, 0, n1, 0.0, EnvelopeMode::Rigorous, &opts)?;
            let check = verify_certificate(&cert, &env)?;
            sections.push(("certificate", Some(check.verdict()), Report::new()));
        }
        None => sections.push(("certificate", None, note("absent"))),
    }

    match spec.analysis.as_ref().and_then(|a| a.t_scan) {
        Some(scan) => {
            let g = match spec.majorant_expr()? {
                Some(e) => DelayMajorant::Exact(e),
                None => DelayMajorant::Sampled(running_sup(&eq, scan.to, grid)?),
            };
            let res = s_scan(&eq, &g, scan.from, scan.to, scan.step)?;
            sections.push(("functional", Some(res.verdict), Report::new()));
        }
        None => sections.push(("functional", None, note("not requested"))),
    }

    let alphas = spec.alphas()?;
    sections.push((
        "comparison",
        Some(thm2_verdict(&eq, n0, n1, &alphas, &opts)?),
        Report::new(),
    ));

    match factor_barrier(&eq, n0, n1, grid)? {
        Some(r) => sections.push(("barrier", Some(barrier_verdict(r)), Report::new())),
        None => sections.push(("barrier", None, note("none"))),
    }

    match lemma_constant_delay_tests(&eq, n0, n1, &opts) {
        Ok(v) => sections.push(("constant_delay", Some(v), Report::new())),
        Err(AnalysisError::NonConstantDelay { .. }) => {
            sections.push(("constant_delay", None, note("not applicable")))
        }
        Err(e) => return Err(e.into()),
    }

    let headline = sections
        .iter()
        .filter_map(|(_, v, _)| v.as_ref())
        .find(|v| v.tag.is_conclusive())
        .cloned();
    let mut r = header("analyze", spec);
    r.push("n_range", format!("{n0}..{n1}"));
    let status = match &headline {
        Some(v) => {
            let vr = v.to_report();
            for (k, val) in vr.entries() {
                r.push(k.clone(), val);
            }
            Status::Ok
        }
        None => {
            r.push("verdict", "Inconclusive");
            Status::Inconclusive
        }
    };
    for (name, verdict, extra) in &sections {
        if let Some(v) = verdict {
            r.extend_prefixed(name, &v.to_report());
        }
        r.extend_prefixed(name, extra);
    }
    Ok(Output {
        report: r,
        files: Vec::new(),
        status,
    })
}

fn note(text: &str) -> Report {
    let mut r = Report::new();
    r.push("status", text);
    r
}

/// Rigorous and sampled tables for every shift of the grid.
pub fn run_envelopes(spec: &SpecFile) -> Result<Output, PipelineError> {
    let eq = spec.equation()?;
    let (n0, n1) = spec.n_range();
    let opts = envelope_options(spec)?;
    let mut buf = Vec::new();
    let mut r = header("envelopes", spec);
    r.push("n_range", format!("{n0}..{n1}"));
    let mut first = true;
    for alpha in spec.alphas()? {
        for mode in [EnvelopeMode::Rigorous, EnvelopeMode::Sampled] {
            let env = compute_envelopes(&eq, n0, n1, alpha, mode, &opts)?;
            env.write_csv(&mut buf, first)?;
            first = false;
            if alpha == 0.0 {
                let key = mode.as_str();
                let min_sum = env
                    .range()
                    .map(|n| env.sum_a_low(n))
                    .fold(f64::INFINITY, f64::min);
                let max_floor = env
                    .range()
                    .flat_map(|n| (0..env.m()).map(move |k| (n, k)))
                    .map(|(n, k)| env.hf_high(k, n) - n)
                    .max()
                    .expect("non-empty table");
                r.push(format!("{key}.min_sum_a_low"), min_sum)
                    .push(format!("{key}.max_hf_high_minus_n"), max_floor);
            }
        }
    }
    r.push("alphas", spec.alphas()?.len());
    Ok(Output {
        report: r,
        files: vec![(
            "envelopes.csv".into(),
            String::from_utf8(buf).expect("utf-8"),
        )],
        status: Status::Ok,
    })
}

/// Check the certificate and, when it passes, build the trapped solution.
pub fn run_bound(spec: &SpecFile) -> Result<Output, PipelineError> {
    let eq = spec.equation()?;
    let horizon = spec.sim_config()?.horizon;
    let opts = envelope_options(spec)?;
    let cert = spec
        .certificate(horizon + 1)?
        .ok_or(PipelineError::Missing("certificate"))?;
    let env = compute_envelopes(&eq, 0, horizon - 1, 0.0, EnvelopeMode::Rigorous, &opts)?;
    let check = verify_certificate(&cert, &env)?;
    let mut r = header("bound", spec);
    r.extend_prefixed("certificate", &check.to_report());
    if !check.passed() {
        return Ok(Output {
            report: r,
            files: Vec::new(),
            status: Status::Inconclusive,
        });
    }
    let (traj, bounds) = construct_bounded_solution(&eq, &cert, horizon, 0.0, &opts)?;
    r.extend_prefixed("bounds", &bounds.to_report());
    let status = if bounds.violations.is_empty() {
        Status::Ok
    } else {
        Status::Failed
    };
    let mut rows = String::from("n,min,max,u,V\n");
    for (n, lo, hi, u, v) in &bounds.rows {
        rows.push_str(&format!("{n},{lo},{hi},{u},{v}\n"));
    }
    Ok(Output {
        report: r,
        files: vec![
            ("trajectory.csv".into(), trajectory_csv(&traj)?),
            ("bounds.csv".into(), rows),
        ],
        status,
    })
}
