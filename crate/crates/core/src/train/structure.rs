use crate::circuit::Circuit;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::flows::aggregate_flows;
use crate::grow::{grow, GrowConfig};
use crate::prune::{prune, PruneHeuristic};
use crate::RngSeed;

use super::em::{mean_ll, record, run_em, EmConfig, RunContext};
use super::log::{LearnerState, Stage, TrainLog};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub prune_fraction: f64,
    pub grow_sigma2: f64,
    pub max_iterations: usize,
    /// Iterations without a validation improvement before stopping.
    pub patience: usize,
    pub seed: RngSeed,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { prune_fraction: 0.75, grow_sigma2: 0.1, max_iterations: 10, patience: 2, seed: RngSeed(0) }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prune_fraction > 0.0 && self.prune_fraction < 1.0) {
            return Err(Error::Config(format!("prune_fraction {} not in (0, 1)", self.prune_fraction)));
        }
        if !(0.0..).contains(&self.grow_sigma2) {
            return Err(Error::Config(format!("grow_sigma2 {} is negative", self.grow_sigma2)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Repeats flow pruning, growing and EM finetuning from `initial`.
///
/// Flows for each prune are computed on `train` with the current parameters.
/// Stops after `max_iterations` or once validation log-likelihood has not
/// improved for `patience` iterations, and returns the iterate (including the
/// initial circuit) with the best validation log-likelihood. Without a
/// validation set, training log-likelihood is used instead.
pub fn structure_learn(
    initial: &Circuit,
    train: &Dataset,
    valid: Option<&Dataset>,
    loop_config: &LoopConfig,
    em: &EmConfig,
) -> Result<(Circuit, TrainLog)> {
    loop_config.validate()?;
    em.validate()?;
    let select = valid.filter(|v| !v.is_empty()).unwrap_or(train);
    let mut log = TrainLog::new(LearnerState { smoothing: em.smoothing, ..LearnerState::default() });
    record(&mut log, initial, train, valid, RunContext { iteration: 0, stage: Stage::Init }, 0, 0.0)?;
    let mut best = initial.clone();
    let mut best_score = select_score(initial, select)?;
    log.state.best_valid_ll = Some(best_score);
    let mut current = initial.clone();
    for it in 1..=loop_config.max_iterations {
        let epoch = log.state.epoch;
        let flows = aggregate_flows(&current, train)?;
        let (pruned, report) = prune(&current, &PruneHeuristic::Flow(flows), loop_config.prune_fraction)?;
        log::info!("iteration {it}: pruned {} edges ({} orphaned)", report.pruned_edges.len(), report.orphaned_edges);
        record(&mut log, &pruned, train, valid, RunContext { iteration: it, stage: Stage::Prune }, epoch, 0.0)?;
        let grown =
            grow(&pruned, &GrowConfig { sigma2: loop_config.grow_sigma2, seed: loop_config.seed.derive(it as u64) })?;
        record(&mut log, &grown, train, valid, RunContext { iteration: it, stage: Stage::Grow }, epoch, 0.0)?;
        let finetune = EmConfig { seed: em.seed.derive(it as u64), ..em.clone() };
        current =
            run_em(&grown, train, valid, &finetune, RunContext { iteration: it, stage: Stage::Finetune }, &mut log)?;
        log.state.iteration = it;
        let score = select_score(&current, select)?;
        if score > best_score {
            best_score = score;
            best = current.clone();
            log.state.best_iteration = it;
            log.state.best_valid_ll = Some(score);
            log.state.stale_iterations = 0;
        } else {
            log.state.stale_iterations += 1;
            if log.state.stale_iterations >= loop_config.patience {
                log::info!("stopping after iteration {it}: no improvement for {} iterations", loop_config.patience);
                break;
            }
        }
    }
    Ok((best, log))
}

fn select_score(circuit: &Circuit, data: &Dataset) -> Result<f64> {
    Ok(mean_ll(circuit, Some(data))?.unwrap_or(f64::NEG_INFINITY))
}

/// Outcome of [`compress`].
#[derive(Debug, Clone, PartialEq)]
pub struct Compression {
    pub circuit: Circuit,
    /// `1 - |compressed| / |initial|` in sum edges.
    pub rate: f64,
    /// Prune-finetune steps that stayed within budget.
    pub steps: usize,
    pub initial_ll: f64,
    pub final_ll: f64,
    pub log: TrainLog,
}

/// Relative slack so an exact tie with the initial likelihood is not a violation.
const TIE_TOLERANCE: f64 = 1e-12;

/// Alternates flow pruning of `step_fraction` of the edges with EM
/// finetuning, for at most `max_steps` steps, and keeps the last circuit whose
/// training log-likelihood is at least `initial - ll_budget * |initial|`.
pub fn compress(
    circuit: &Circuit,
    train: &Dataset,
    step_fraction: f64,
    ll_budget: f64,
    max_steps: usize,
    em: &EmConfig,
) -> Result<Compression> {
    if !(step_fraction > 0.0 && step_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("step fraction {step_fraction} not in (0, 1)")));
    }
    if !(0.0..).contains(&ll_budget) {
        return Err(Error::InvalidArgument(format!("likelihood budget {ll_budget} is negative")));
    }
    em.validate()?;
    let initial_ll = circuit.log_likelihood(train)?;
    let floor = initial_ll - ll_budget * initial_ll.abs() - TIE_TOLERANCE * initial_ll.abs().max(1.0);
    let mut log = TrainLog::new(LearnerState { smoothing: em.smoothing, ..LearnerState::default() });
    record(&mut log, circuit, train, None, RunContext { iteration: 0, stage: Stage::Init }, 0, 0.0)?;
    let mut kept = circuit.clone();
    let mut kept_ll = initial_ll;
    let mut steps = 0;
    for step in 1..=max_steps {
        if kept.num_edges() < 2 {
            break;
        }
        let flows = aggregate_flows(&kept, train)?;
        let (pruned, _) = prune(&kept, &PruneHeuristic::Flow(flows), step_fraction)?;
        if pruned.num_edges() == kept.num_edges() {
            break;
        }
        let epoch = log.state.epoch;
        record(&mut log, &pruned, train, None, RunContext { iteration: step, stage: Stage::Prune }, epoch, 0.0)?;
        let finetune = EmConfig { seed: em.seed.derive(step as u64), ..em.clone() };
        let tuned =
            run_em(&pruned, train, None, &finetune, RunContext { iteration: step, stage: Stage::Finetune }, &mut log)?;
        let ll = tuned.log_likelihood(train)?;
        if ll < floor {
            log::info!("compression step {step} exceeds the likelihood budget; keeping step {}", step - 1);
            break;
        }
        kept = tuned;
        kept_ll = ll;
        steps = step;
    }
    let rate = 1.0 - kept.num_edges() as f64 / circuit.num_edges() as f64;
    Ok(Compression { circuit: kept, rate, steps, initial_ll, final_ll: kept_ll, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::fixtures::example_circuit;
    use crate::sampler::sample_batch;
    use crate::train::ScheduleSegment;

    fn quick_em() -> EmConfig {
        EmConfig {
            batch_size: 64,
            smoothing: 0.01,
            schedule: vec![ScheduleSegment::new(0.5, 0.1, 2)],
            seed: RngSeed(1),
        }
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let c = example_circuit();
        let d = sample_batch(&c, 100, RngSeed(0));
        let cfg = LoopConfig { max_iterations: 0, ..LoopConfig::default() };
        let (out, log) = structure_learn(&c, &d, None, &cfg, &quick_em()).unwrap();
        assert_eq!(out, c);
        assert_eq!(log.records.len(), 1);
    }

    #[test]
    fn loop_keeps_best_and_logs_stages() {
        let c = example_circuit();
        let d = sample_batch(&c, 200, RngSeed(4));
        let v = sample_batch(&c, 100, RngSeed(5));
        let cfg = LoopConfig { max_iterations: 3, ..LoopConfig::default() };
        let (out, log) = structure_learn(&c, &d, Some(&v), &cfg, &quick_em()).unwrap();
        assert!(out.is_valid());
        let best = log.state.best_valid_ll.unwrap();
        assert!((out.log_likelihood(&v).unwrap() - best).abs() < 1e-12);
        assert!(log.records.windows(2).all(|w| w[0].epoch <= w[1].epoch));
        assert!(log.records.iter().any(|r| r.stage == Stage::Grow));
    }

    #[test]
    fn loose_budget_compresses_geometrically() {
        let c = example_circuit();
        let d = sample_batch(&c, 200, RngSeed(6));
        let em = EmConfig { schedule: vec![], ..quick_em() };
        let out = compress(&c, &d, 0.3, 1e9, 10, &em).unwrap();
        // one edge per step from s21 and s22; a root edge would orphan too much
        assert_eq!(out.circuit.num_edges(), 4);
        assert_eq!(out.steps, 2);
        assert!((out.rate - 1.0 / 3.0).abs() < 1e-12);
        assert!(out.circuit.is_valid());
    }

    #[test]
    fn immediate_violation_returns_original() {
        let c = example_circuit();
        let d = sample_batch(&c, 200, RngSeed(6));
        let em = EmConfig { schedule: vec![], ..quick_em() };
        let out = compress(&c, &d, 0.5, 0.0, 5, &em).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.rate, 0.0);
        assert_eq!(out.circuit, c);
    }

    #[test]
    fn argument_checks() {
        let c = example_circuit();
        let d = sample_batch(&c, 10, RngSeed(6));
        assert!(compress(&c, &d, 0.0, 0.1, 1, &quick_em()).is_err());
        assert!(compress(&c, &d, 0.5, -0.1, 1, &quick_em()).is_err());
        let bad = LoopConfig { prune_fraction: 1.0, ..LoopConfig::default() };
        assert!(structure_learn(&c, &d, None, &bad, &quick_em()).is_err());
    }
}
