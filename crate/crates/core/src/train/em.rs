use std::time::Instant;

use rand::seq::SliceRandom;

use crate::circuit::{Circuit, UnitKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::flows::{aggregate_flows, FlowTable};
use crate::RngSeed;

use super::log::{EpochRecord, LearnerState, Stage, TrainLog};

/// One piece of the learning-rate schedule: `alpha` moves linearly from
/// `alpha_start` to `alpha_end` over the steps of `epochs` epochs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScheduleSegment {
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub epochs: usize,
}

impl ScheduleSegment {
    pub fn new(alpha_start: f64, alpha_end: f64, epochs: usize) -> Self {
        Self { alpha_start, alpha_end, epochs }
    }

    /// Step size at `step` of `total` steps.
    pub fn alpha(&self, step: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.alpha_start;
        }
        let t = step as f64 / (total - 1) as f64;
        self.alpha_start + (self.alpha_end - self.alpha_start) * t
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub batch_size: usize,
    /// Laplace pseudo-flow added to every edge and category count.
    pub smoothing: f64,
    pub schedule: Vec<ScheduleSegment>,
    pub seed: RngSeed,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            smoothing: 0.01,
            schedule: vec![
                ScheduleSegment::new(1.0, 0.1, 50),
                ScheduleSegment::new(0.1, 0.01, 50),
                ScheduleSegment::new(0.01, 0.001, 50),
            ],
            seed: RngSeed(0),
        }
    }
}

impl EmConfig {
    /// `epochs` full-batch epochs with step size 1.
    pub fn full_batch(rows: usize, smoothing: f64, epochs: usize) -> Self {
        Self {
            batch_size: rows.max(1),
            smoothing,
            schedule: vec![ScheduleSegment::new(1.0, 1.0, epochs)],
            seed: RngSeed(0),
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.schedule.iter().map(|s| s.epochs).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..).contains(&self.smoothing) || !self.smoothing.is_finite() {
            return Err(Error::Config(format!("smoothing must be >= 0, got {}", self.smoothing)));
        }
        for s in &self.schedule {
            for a in [s.alpha_start, s.alpha_end] {
                // alpha = 0 freezes the parameters; allowed for diagnostics
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Config(format!("alpha {a} not in [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Blends the flow-derived parameters into `circuit`:
/// `θ ← α (F_{n,c} + γ) / (F_n + γ |ch(n)|) + (1 - α) θ`, and the same for
/// input categories. Units whose smoothed flow is zero keep their parameters.
pub fn em_update(circuit: &mut Circuit, flows: &FlowTable, alpha: f64, smoothing: f64) -> Result<()> {
    flows.check_matches(circuit)?;
    let starts: Vec<usize> = (0..circuit.len()).map(|i| circuit.edge_start(crate::UnitId(i))).collect();
    let cats: Vec<Vec<f64>> = circuit
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| if u.is_input() { flows.categories(crate::UnitId(i)).to_vec() } else { Vec::new() })
        .collect();
    for (i, unit) in circuit.units_mut().iter_mut().enumerate() {
        match &mut unit.kind {
            UnitKind::Sum { log_params, .. } => {
                let counts = &flows.edge_flow[starts[i]..starts[i] + log_params.len()];
                blend(log_params, counts, alpha, smoothing);
            }
            UnitKind::Input(d) => blend(&mut d.log_probs, &cats[i], alpha, smoothing),
            UnitKind::Product { .. } => {}
        }
    }
    Ok(())
}

fn blend(log_params: &mut [f64], counts: &[f64], alpha: f64, smoothing: f64) {
    let total: f64 = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
    if total <= 0.0 {
        return;
    }
    for (l, c) in log_params.iter_mut().zip(counts) {
        let fresh = (c + smoothing) / total;
        *l = if alpha == 1.0 { fresh.ln() } else { (alpha * fresh + (1.0 - alpha) * l.exp()).ln() };
    }
}

/// Where a run sits inside a larger training log.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RunContext {
    pub iteration: usize,
    pub stage: Stage,
}

pub(crate) fn mean_ll(circuit: &Circuit, data: Option<&Dataset>) -> Result<Option<f64>> {
    match data {
        Some(d) if !d.is_empty() => Ok(Some(circuit.log_likelihood(d)?)),
        _ => Ok(None),
    }
}

pub(crate) fn record(
    log: &mut TrainLog,
    circuit: &Circuit,
    train: &Dataset,
    valid: Option<&Dataset>,
    ctx: RunContext,
    epoch: usize,
    wall_secs: f64,
) -> Result<()> {
    let train_ll = circuit.log_likelihood(train)?;
    let train_bpd = -train_ll / (std::f64::consts::LN_2 * circuit.num_vars().max(1) as f64);
    log.push(EpochRecord {
        epoch,
        iteration: ctx.iteration,
        stage: ctx.stage,
        train_ll,
        valid_ll: mean_ll(circuit, valid)?,
        train_bpd,
        params: circuit.num_edges(),
        wall_secs,
    });
    Ok(())
}

/// Mini-batch EM driver shared by the public entry points.
pub(crate) fn run_em(
    circuit: &Circuit,
    train: &Dataset,
    valid: Option<&Dataset>,
    config: &EmConfig,
    ctx: RunContext,
    log: &mut TrainLog,
) -> Result<Circuit> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = train.len();
    let batch = if config.batch_size > n {
        log::warn!("batch size {} exceeds {} rows; using {}", config.batch_size, n, n);
        n
    } else {
        config.batch_size
    };
    let steps_per_epoch = n.div_ceil(batch);
    let mut rng = config.seed.stream(0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut current = circuit.clone();
    let mut state = log.state.clone();
    state.smoothing = config.smoothing;
    for segment in &config.schedule {
        let total = segment.epochs * steps_per_epoch;
        let mut step = 0;
        for _ in 0..segment.epochs {
            let start = Instant::now();
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let mut rows = chunk.to_vec();
                rows.sort_unstable();
                let flows = if rows.len() == n {
                    aggregate_flows(&current, train)?
                } else {
                    aggregate_flows(&current, &train.select(&rows))?
                };
                let alpha = segment.alpha(step, total);
                em_update(&mut current, &flows, alpha, config.smoothing)?;
                state.alpha = alpha;
                state.step += 1;
                step += 1;
            }
            state.epoch += 1;
            log.state = state.clone();
            record(log, &current, train, valid, ctx, state.epoch, start.elapsed().as_secs_f64())?;
        }
    }
    log.state = state;
    Ok(current)
}

/// Full-batch EM for `epochs` epochs; one log row per epoch plus the initial state.
pub fn em_full_batch(circuit: &Circuit, data: &Dataset, smoothing: f64, epochs: usize) -> Result<(Circuit, TrainLog)> {
    em_stochastic(circuit, data, &EmConfig::full_batch(data.len(), smoothing, epochs))
}

/// Mini-batch EM following `config.schedule`.
pub fn em_stochastic(circuit: &Circuit, data: &Dataset, config: &EmConfig) -> Result<(Circuit, TrainLog)> {
    em_with_validation(circuit, data, None, config)
}

/// As [`em_stochastic`], also logging validation log-likelihood each epoch.
pub fn em_with_validation(
    circuit: &Circuit,
    train: &Dataset,
    valid: Option<&Dataset>,
    config: &EmConfig,
) -> Result<(Circuit, TrainLog)> {
    let mut log = TrainLog::new(LearnerState { smoothing: config.smoothing, ..LearnerState::default() });
    let ctx = RunContext { iteration: 0, stage: Stage::Init };
    record(&mut log, circuit, train, valid, ctx, 0, 0.0)?;
    let out = run_em(circuit, train, valid, config, RunContext { stage: Stage::Em, ..ctx }, &mut log)?;
    Ok((out, log))
}
