use std::fmt;
use std::io::Write;

use crate::error::Result;

/// What produced a log row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Init,
    Em,
    Prune,
    Grow,
    Finetune,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Init => "init",
            Stage::Em => "em",
            Stage::Prune => "prune",
            Stage::Grow => "grow",
            Stage::Finetune => "finetune",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Completed EM epochs so far; structure steps repeat the current value.
    pub epoch: usize,
    pub iteration: usize,
    pub stage: Stage,
    pub train_ll: f64,
    pub valid_ll: Option<f64>,
    pub train_bpd: f64,
    pub params: usize,
    pub wall_secs: f64,
}

/// Position of a learner: schedule progress and structure-loop bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearnerState {
    pub epoch: usize,
    pub step: usize,
    pub alpha: f64,
    pub smoothing: f64,
    pub iteration: usize,
    pub best_iteration: usize,
    pub best_valid_ll: Option<f64>,
    pub stale_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub state: LearnerState,
}

impl TrainLog {
    pub fn new(state: LearnerState) -> Self {
        Self { records: Vec::new(), state }
    }

    pub fn push(&mut self, r: EpochRecord) {
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// CSV with one row per record. Wall time is left out unless `timings` is
    /// set, so reruns produce identical files.
    pub fn write_csv<W: Write>(&self, mut w: W, timings: bool) -> Result<()> {
        write!(w, "epoch,iteration,stage,train_ll,valid_ll,train_bpd,params")?;
        writeln!(w, "{}", if timings { ",wall_secs" } else { "" })?;
        for r in &self.records {
            let valid = r.valid_ll.map(|v| format!("{v:.12e}")).unwrap_or_default();
            write!(
                w,
                "{},{},{},{:.12e},{},{:.12e},{}",
                r.epoch, r.iteration, r.stage, r.train_ll, valid, r.train_bpd, r.params
            )?;
            if timings {
                write!(w, ",{:.6}", r.wall_secs)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut log = TrainLog::default();
        log.push(EpochRecord {
            epoch: 1,
            iteration: 0,
            stage: Stage::Em,
            train_ll: -1.5,
            valid_ll: None,
            train_bpd: 0.5,
            params: 6,
            wall_secs: 0.25,
        });
        let mut out = Vec::new();
        log.write_csv(&mut out, false).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epoch,iteration,stage,train_ll,valid_ll,train_bpd,params");
        assert_eq!(text.lines().nth(1).unwrap(), "1,0,em,-1.500000000000e0,,5.000000000000e-1,6");
        let mut out = Vec::new();
        log.write_csv(&mut out, true).unwrap();
        assert!(String::from_utf8(out).unwrap().lines().nth(1).unwrap().ends_with(",0.250000"));
    }
}
