use serde::Serialize;
use spikelab_core::experiments::{run_detection, run_envelope, run_moment, Threshold};
use spikelab_core::grf::{self, WaterfillSolution};
use spikelab_core::oracle::{self, Witness};
use spikelab_core::sampling::write_samples_csv;
use spikelab_core::{RngStream, Spectrum};

use crate::config::{Command, RunConfig};
use crate::emit::Emitter;
use crate::error::CliError;

/// Largest oracle gap accepted by `verify`.
pub const VERIFY_TOL: f64 = 1e-3;

/// Runs the configured command, writing its data files through `emit`.
pub fn execute(config: &RunConfig, emit: &mut Emitter) -> Result<(), CliError> {
    let s = &config.spectrum;
    let root = RngStream::new(config.seed, 0);
    let need = |field: &'static str, v: Option<usize>| v.ok_or_else(|| CliError::usage(field, "missing"));
    match config.command {
        Command::Grf => {
            let curve = grf::grf_curve(s, &grf::uniform_grid(s, need("grid", config.grid)?))?;
            emit.write_with("curve.csv", |out| curve.write_csv(out))?;
        }
        Command::Waterfill => {
            let xs = config.x.as_deref().ok_or_else(|| CliError::usage("x", "missing"))?;
            let records = xs
                .iter()
                .map(|&x| waterfill_record(s, x))
                .collect::<Result<Vec<_>, CliError>>()?;
            emit.write_json("waterfill.json", &records)?;
        }
        Command::Envelope => {
            let rep = run_envelope(
                s,
                need("n_block", config.n_block)?,
                need("samples", config.samples)?,
                need("grid", config.grid)?,
                root,
            )?;
            emit.write_with("samples.csv", |out| write_samples_csv(&rep.samples, out))?;
            emit.write_with("curve.csv", |out| rep.curve.write_csv(out))?;
            emit.write_json("envelope.json", &rep.summary())?;
        }
        Command::Detect => {
            let threshold = match (config.threshold, config.false_alarm) {
                (_, Some(false_alarm)) => Threshold::H0Quantile { false_alarm },
                (Some(t), None) => Threshold::Fixed(t),
                (None, None) => return Err(CliError::usage("threshold", "missing")),
            };
            let rep = run_detection(s, need("n", config.n)?, need("trials", config.trials)?, threshold, root)?;
            emit.write_with("trials.csv", |out| rep.write_csv(out))?;
            emit.write_json("summary.json", &rep.summary)?;
        }
        Command::Moment => {
            let epsilon = config.epsilon.ok_or_else(|| CliError::usage("epsilon", "missing"))?;
            let est = run_moment(s, need("n", config.n)?, need("samples", config.samples)?, epsilon, root)?;
            if est.clamped > 0 {
                eprintln!(
                    "warning: {} samples overflow exp(2 n eta); the mean is reported through log_mean",
                    est.clamped
                );
            }
            emit.write_json("moment.json", &est)?;
        }
        Command::Verify => {
            let xs = config.x.as_deref().ok_or_else(|| CliError::usage("x", "missing"))?;
            let records = verify(s, xs, need("grid", config.grid)?, need("budget", config.budget)?, root)?;
            emit.write_json("verify.json", &records)?;
            let failures: Vec<String> = records
                .iter()
                .filter(|r| !(r.gap <= VERIFY_TOL))
                .map(|r| format!("{} at x = {} (gap {:e})", r.problem, r.x, r.gap))
                .collect();
            if !failures.is_empty() {
                return Err(CliError::Verification(failures.join("; ")));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct WaterfillRecord {
    x: f64,
    #[serde(flatten)]
    solution: WaterfillSolution,
    #[serde(with = "grf::extended_float")]
    neg_grf: f64,
    interval: usize,
}

fn waterfill_record(s: &Spectrum, x: f64) -> Result<WaterfillRecord, CliError> {
    let solution = grf::waterfill(s, x)?;
    let point = grf::grf(s, x)?;
    Ok(WaterfillRecord { x, solution, neg_grf: point.neg_grf, interval: point.k })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRecord {
    pub problem: &'static str,
    pub x: f64,
    #[serde(with = "grf::extended_float")]
    pub closed_form: f64,
    #[serde(with = "grf::extended_float")]
    pub oracle_value: f64,
    #[serde(with = "grf::extended_float")]
    pub gap: f64,
    pub converged: bool,
}

fn record(problem: &'static str, x: f64, closed_form: f64, res: &oracle::OracleResult) -> VerifyRecord {
    let gap = if closed_form == res.value { 0.0 } else { (res.value - closed_form).abs() };
    VerifyRecord {
        problem,
        x,
        closed_form,
        oracle_value: res.value,
        gap,
        converged: res.converged,
    }
}

/// Runs the three oracles at every abscissa. Problem 4 also reports the
/// largest deviation of its optimal weights from the squared spectrum.
fn verify(s: &Spectrum, xs: &[f64], grid_steps: usize, budget: usize, root: RngStream) -> Result<Vec<VerifyRecord>, CliError> {
    let mut records = Vec::with_capacity(4 * xs.len());
    let alpha = s.squares();
    for (j, &x) in xs.iter().enumerate() {
        let neg_grf = grf::grf(s, x)?.neg_grf;
        let j_value = grf::waterfill(s, x)?.j_value;

        let p1 = oracle::solve_problem1(s, x, budget, root.child(0).child(j as u64))?;
        records.push(record("problem1", x, neg_grf, &p1));
        let p3 = oracle::solve_problem3_grid(s, x, grid_steps)?;
        records.push(record("problem3", x, j_value, &p3));
        let p4 = oracle::solve_problem4_search(s, x, budget, root.child(1).child(j as u64))?;
        records.push(record("problem4", x, j_value, &p4));
        if let Witness::Majorized { beta, .. } = &p4.argument {
            let dev = beta.iter().zip(&alpha).map(|(b, a)| (b - a).abs()).fold(0.0, f64::max);
            records.push(VerifyRecord {
                problem: "problem4_weights",
                x,
                closed_form: 0.0,
                oracle_value: dev,
                gap: dev,
                converged: p4.converged,
            });
        }
    }
    Ok(records)
}
