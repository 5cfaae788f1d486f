//! Training loop, outcome classification and seeded batch trials.
//!
//! Every iteration evaluates the network once on the full batch, then
//! updates the output layer first and works down. Each lower layer's deltas
//! and curvature tables are propagated through the weights above it as they
//! stand after their own update; the forward trace is not refreshed until
//! the next iteration.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grad::gd_update;
use crate::linalg::{CVector, SolverKind, C64};
use crate::network::{
    error_from_trace, forward_batch, Dataset, ForwardTrace, NetworkTopology, WeightSet,
};
use crate::newton::{newton_update_with, pseudo_newton_update_with, LayerTables};
use crate::par::{with_jobs, Exec};
use crate::steplength::{apply_update, one_step_mu, StepConfig, StepMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GradientDescent,
    Newton,
    PseudoNewton,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::GradientDescent,
        Method::Newton,
        Method::PseudoNewton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GradientDescent => "gradient_descent",
            Method::Newton => "newton",
            Method::PseudoNewton => "pseudo_newton",
        }
    }

    fn needs_curvature(self) -> bool {
        self != Method::GradientDescent
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub step: StepConfig,
    pub solver: SolverKind,
    pub error_target: f64,
    pub max_iters: u64,
    pub blowup_threshold: f64,
    pub stall_tolerance: f64,
    pub init_range: f64,
}

impl TrainConfig {
    /// Defaults for `method`: constant `μ = 1` for gradient descent, the
    /// one-step steplength with `ω = 0.5` otherwise.
    pub fn new(method: Method) -> Self {
        let (step, max_iters) = match method {
            Method::GradientDescent => (StepConfig::constant(1.0), 50_000),
            _ => (StepConfig::one_step(0.5), 5_000),
        };
        Self {
            method,
            step,
            solver: SolverKind::default(),
            error_target: 1e-3,
            max_iters,
            blowup_threshold: 1e10,
            stall_tolerance: 1e-10,
            init_range: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if self.method == Method::GradientDescent && self.step.mode == StepMode::OneStepNewton {
            return Err(Error::Config(
                "the one-step Newton steplength needs a Newton-family method".into(),
            ));
        }
        if !(self.error_target > 0.0) {
            return Err(Error::Config("error_target must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.blowup_threshold > 0.0) || !(self.stall_tolerance >= 0.0) {
            return Err(Error::Config(
                "blowup_threshold and stall_tolerance must be nonnegative".into(),
            ));
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return Err(Error::Config(
                "init_range must be a finite half-width".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Success,
    LocalMinimum,
    BlowUp,
    NonFinite,
    SingularMatrix,
}

impl TrialOutcome {
    pub const ALL: [TrialOutcome; 5] = [
        TrialOutcome::Success,
        TrialOutcome::LocalMinimum,
        TrialOutcome::BlowUp,
        TrialOutcome::NonFinite,
        TrialOutcome::SingularMatrix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrialOutcome::Success => "success",
            TrialOutcome::LocalMinimum => "local_minimum",
            TrialOutcome::BlowUp => "blow_up",
            TrialOutcome::NonFinite => "non_finite",
            TrialOutcome::SingularMatrix => "singular_matrix",
        }
    }
}

impl fmt::Display for TrialOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// JSON has no NaN, so a non-finite error is written as `null`.
mod lossy_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub method: Method,
    pub activation: String,
    pub outcome: TrialOutcome,
    /// Weight updates applied before the run stopped.
    pub iterations: u64,
    /// Error at the last evaluation; NaN for `non_finite`.
    #[serde(with = "lossy_f64")]
    pub final_error: f64,
    /// For `local_minimum`: whether the error had settled to within the
    /// stall tolerance when the budget ran out.
    pub stalled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_history: Option<Vec<f64>>,
}

/// Outcome and stall flag for a finished run.
///
/// Precedence: non-finite, singular, success, blow-up, local minimum.
pub fn classify_outcome(
    history: &[f64],
    config: &TrainConfig,
    singular: bool,
    non_finite: bool,
) -> (TrialOutcome, bool) {
    let last = *history.last().expect("history is never empty");
    if non_finite || !last.is_finite() {
        return (TrialOutcome::NonFinite, false);
    }
    if singular {
        return (TrialOutcome::SingularMatrix, false);
    }
    if last <= config.error_target {
        return (TrialOutcome::Success, false);
    }
    if last > config.blowup_threshold {
        return (TrialOutcome::BlowUp, false);
    }
    let stalled =
        history.len() >= 2 && (last - history[history.len() - 2]).abs() <= config.stall_tolerance;
    (TrialOutcome::LocalMinimum, stalled)
}

/// Real and imaginary parts i.i.d. uniform on `[-range, range]`, drawn
/// layer by layer in flat order (real part first) from ChaCha8 seeded with `seed`.
pub fn initial_weights(topology: &NetworkTopology, seed: u64, range: f64) -> WeightSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (1..=topology.depth())
        .map(|p| {
            (0..topology.layer_len(p))
                .map(|_| {
                    let re = rng.gen_range(-range..=range);
                    let im = rng.gen_range(-range..=range);
                    C64::new(re, im)
                })
                .collect()
        })
        .collect();
    WeightSet::from_layers(topology, layers).expect("layer sizes come from the topology")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainOptions {
    pub keep_error_history: bool,
    pub keep_weight_history: bool,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub record: TrialRecord,
    pub weights: WeightSet,
    /// Flattened weights before every evaluation, when requested.
    pub weight_history: Option<Vec<CVector>>,
}

/// One sweep of layer updates, output layer first.
fn iterate(
    topology: &NetworkTopology,
    dataset: &Dataset,
    trace: &ForwardTrace,
    weights: &mut WeightSet,
    config: &TrainConfig,
) -> Result<()> {
    let mut tables = LayerTables::output(topology, trace, dataset, config.method.needs_curvature());
    for p in (1..=topology.depth()).rev() {
        let g = tables.cogradient(topology, trace);
        if !g.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        let (dw, pair) = match config.method {
            Method::GradientDescent => (gd_update(&g), None),
            Method::Newton => {
                let pair = tables.hessians(topology, trace);
                (newton_update_with(config.solver, &pair, &g)?, Some(pair))
            }
            Method::PseudoNewton => {
                let pair = tables.hessians(topology, trace);
                (
                    pseudo_newton_update_with(config.solver, &pair.h_ww, &g)?,
                    Some(pair),
                )
            }
        };
        // A layer already at a stationary point has nothing to do.
        if !dw.is_zero() {
            let mu = match config.step.mode {
                StepMode::Constant => config.step.constant_mu,
                StepMode::OneStepNewton => {
                    let pair = pair
                        .as_ref()
                        .expect("validated: one-step mode needs curvature");
                    one_step_mu(&g, &dw, &pair.h_ww, &pair.h_wbar_w).map_err(|e| match e {
                        Error::DegenerateStep(_) => Error::NonFiniteEvaluation,
                        other => other,
                    })?
                }
            };
            apply_update(weights, p, &dw, mu, config.step.omega)?;
        }
        if p > 1 {
            tables = tables.descend(topology, weights.layer(p), trace);
        }
    }
    Ok(())
}

/// Trains from the given starting weights.
pub fn train_from(
    topology: &NetworkTopology,
    dataset: &Dataset,
    config: &TrainConfig,
    seed: u64,
    initial: WeightSet,
    options: TrainOptions,
) -> Result<TrainRun> {
    config.validate()?;
    dataset.check_against(topology)?;
    let mut weights = WeightSet::from_layers(topology, initial.layers().to_vec())?;
    let mut history = Vec::new();
    let mut weight_history = options.keep_weight_history.then(Vec::new);
    let (mut singular, mut non_finite) = (false, false);
    let mut updates = 0u64;
    loop {
        if let Some(h) = weight_history.as_mut() {
            h.push(weights.flatten());
        }
        let trace = forward_batch(topology, &weights, dataset);
        let e = error_from_trace(&trace, dataset);
        history.push(e);
        if !e.is_finite() {
            non_finite = true;
            break;
        }
        if e <= config.error_target || updates >= config.max_iters {
            break;
        }
        match iterate(topology, dataset, &trace, &mut weights, config) {
            Ok(()) => updates += 1,
            Err(Error::SingularMatrix) => {
                singular = true;
                break;
            }
            Err(Error::NonFiniteEvaluation) => {
                non_finite = true;
                break;
            }
            Err(other) => return Err(other),
        }
    }
    let (outcome, stalled) = classify_outcome(&history, config, singular, non_finite);
    let record = TrialRecord {
        seed,
        method: config.method,
        activation: topology.activation_label(),
        outcome,
        iterations: updates,
        final_error: if non_finite {
            f64::NAN
        } else {
            *history.last().expect("nonempty")
        },
        stalled,
        error_history: options.keep_error_history.then_some(history),
    };
    Ok(TrainRun {
        record,
        weights,
        weight_history,
    })
}

/// Seeded training run with the full error history.
pub fn train(
    topology: &NetworkTopology,
    dataset: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrialRecord> {
    let initial = initial_weights(topology, seed, config.init_range);
    let options = TrainOptions {
        keep_error_history: true,
        keep_weight_history: false,
    };
    Ok(train_from(topology, dataset, config, seed, initial, options)?.record)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub local_minimum: u64,
    pub blow_up: u64,
    pub non_finite: u64,
    pub singular_matrix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub n_trials: u64,
    pub successes: u64,
    /// `None` when nothing succeeded.
    pub mean_iterations_over_successes: Option<f64>,
    pub failure_counts: FailureCounts,
}

impl TrialStats {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut failures = FailureCounts::default();
        let (mut successes, mut iter_sum) = (0u64, 0u64);
        for r in records {
            match r.outcome {
                TrialOutcome::Success => {
                    successes += 1;
                    iter_sum += r.iterations;
                }
                TrialOutcome::LocalMinimum => failures.local_minimum += 1,
                TrialOutcome::BlowUp => failures.blow_up += 1,
                TrialOutcome::NonFinite => failures.non_finite += 1,
                TrialOutcome::SingularMatrix => failures.singular_matrix += 1,
            }
        }
        Self {
            n_trials: records.len() as u64,
            successes,
            mean_iterations_over_successes: (successes > 0)
                .then(|| iter_sum as f64 / successes as f64),
            failure_counts: failures,
        }
    }

    pub fn count(&self, outcome: TrialOutcome) -> u64 {
        match outcome {
            TrialOutcome::Success => self.successes,
            TrialOutcome::LocalMinimum => self.failure_counts.local_minimum,
            TrialOutcome::BlowUp => self.failure_counts.blow_up,
            TrialOutcome::NonFinite => self.failure_counts.non_finite,
            TrialOutcome::SingularMatrix => self.failure_counts.singular_matrix,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialSet {
    pub stats: TrialStats,
    pub records: Vec<TrialRecord>,
}

/// `n` trials, trial `k` seeded with `base_seed + k`, so every method sees
/// the same starting weights for the same `k`. Records come back in seed
/// order whatever `jobs` is. Error histories are dropped.
pub fn run_trials(
    topology: &NetworkTopology,
    dataset: &Dataset,
    config: &TrainConfig,
    n: u64,
    base_seed: u64,
    jobs: Option<usize>,
) -> Result<TrialSet> {
    if n == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    config.validate()?;
    dataset.check_against(topology)?;
    let exec = Exec::from_jobs(jobs);
    let results = with_jobs(jobs, || {
        exec.map(n as usize, |k| {
            let seed = base_seed.wrapping_add(k as u64);
            let initial = initial_weights(topology, seed, config.init_range);
            train_from(
                topology,
                dataset,
                config,
                seed,
                initial,
                TrainOptions::default(),
            )
            .map(|r| r.record)
        })
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TrialSet {
        stats: TrialStats::from_records(&records),
        records,
    })
}

/// Root-convergence factor estimate: with `ẑ` the last iterate and
/// `e_n = ‖z(n) − ẑ‖`, the largest `e_n^(1/n)` over the trailing half.
pub fn r_factor_estimate(history: &[CVector]) -> f64 {
    let Some(last) = history.last() else {
        return 0.0;
    };
    let start = (history.len() / 2).max(1);
    (start..history.len())
        .map(|n| history[n].sub(last).norm().powf(1.0 / n as f64))
        .fold(0.0, f64::max)
}

/// One CSV row per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub method: Method,
    pub activation: String,
    pub outcome: TrialOutcome,
    pub iterations: u64,
    pub final_error: f64,
    pub stalled: bool,
}

impl From<&TrialRecord> for TrialRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            seed: r.seed,
            method: r.method,
            activation: r.activation.clone(),
            outcome: r.outcome,
            iterations: r.iterations,
            final_error: r.final_error,
            stalled: r.stalled,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn write_trials_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(TrialRow::from(r)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: Read>(input: R) -> Result<Vec<TrialRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

/// `iteration,error` rows.
pub fn write_error_history_csv<W: Write>(out: W, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "error"]).map_err(csv_error)?;
    for (n, e) in history.iter().enumerate() {
        w.serialize((n, e)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
