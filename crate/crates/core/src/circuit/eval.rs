//! Feedforward evaluation in log space.

use rayon::prelude::*;

use super::{Circuit, Unit, UnitId, UnitKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Evidence over the circuit variables; `None` marks a marginalized variable.
pub trait Evidence: Sync {
    fn num_values(&self) -> usize;
    fn value(&self, var: usize) -> Option<u32>;
}

impl Evidence for [u32] {
    fn num_values(&self) -> usize {
        self.len()
    }
    fn value(&self, var: usize) -> Option<u32> {
        Some(self[var])
    }
}

impl Evidence for [Option<u32>] {
    fn num_values(&self) -> usize {
        self.len()
    }
    fn value(&self, var: usize) -> Option<u32> {
        self[var]
    }
}

impl<const N: usize> Evidence for [u32; N] {
    fn num_values(&self) -> usize {
        N
    }
    fn value(&self, var: usize) -> Option<u32> {
        Some(self[var])
    }
}

impl<const N: usize> Evidence for [Option<u32>; N] {
    fn num_values(&self) -> usize {
        N
    }
    fn value(&self, var: usize) -> Option<u32> {
        self[var]
    }
}

impl Evidence for Vec<u32> {
    fn num_values(&self) -> usize {
        self.len()
    }
    fn value(&self, var: usize) -> Option<u32> {
        Some(self[var])
    }
}

impl Evidence for Vec<Option<u32>> {
    fn num_values(&self) -> usize {
        self.len()
    }
    fn value(&self, var: usize) -> Option<u32> {
        self[var]
    }
}

/// Per-unit log-probabilities for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    pub logp: Vec<f64>,
    root: UnitId,
}

impl EvalTrace {
    pub fn root_logp(&self) -> f64 {
        self.logp[self.root.0]
    }

    pub fn root_prob(&self) -> f64 {
        self.root_logp().exp()
    }

    pub fn logp(&self, unit: UnitId) -> f64 {
        self.logp[unit.0]
    }
}

/// `log(sum(exp(xs)))`; all `-inf` inputs give `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[inline]
pub(crate) fn unit_logp<E: Evidence + ?Sized>(unit: &Unit, logp: &[f64], ev: &E) -> f64 {
    match &unit.kind {
        UnitKind::Input(dist) => match ev.value(dist.var) {
            Some(v) => dist.log_probs[v as usize],
            None => 0.0,
        },
        UnitKind::Product { children } => {
            let mut acc = 0.0;
            for c in children {
                acc += logp[c.0];
            }
            acc
        }
        UnitKind::Sum { children, log_params } => {
            let mut m = f64::NEG_INFINITY;
            for (c, lw) in children.iter().zip(log_params) {
                m = m.max(lw + logp[c.0]);
            }
            if m == f64::NEG_INFINITY {
                return m;
            }
            let mut s = 0.0;
            for (c, lw) in children.iter().zip(log_params) {
                s += (lw + logp[c.0] - m).exp();
            }
            m + s.ln()
        }
    }
}

impl Circuit {
    fn check_evidence<E: Evidence + ?Sized>(&self, ev: &E) -> Result<()> {
        if ev.num_values() != self.num_vars() {
            return Err(Error::DimensionMismatch { expected: self.num_vars(), got: ev.num_values() });
        }
        for (var, &card) in self.cardinalities().iter().enumerate() {
            if let Some(v) = ev.value(var) {
                if v >= card {
                    return Err(Error::CategoryOutOfRange { var, value: v, cardinality: card });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.num_vars() != self.num_vars() {
            return Err(Error::DimensionMismatch { expected: self.num_vars(), got: data.num_vars() });
        }
        if data.cardinalities().iter().zip(self.cardinalities()).all(|(d, c)| d <= c) {
            return Ok(());
        }
        data.rows().try_for_each(|row| self.check_evidence(row))
    }

    /// Fills `logp` bottom-up in id order. Evidence must already be checked.
    pub(crate) fn forward_into<E: Evidence + ?Sized>(&self, ev: &E, logp: &mut [f64]) {
        for (i, u) in self.units().iter().enumerate() {
            logp[i] = unit_logp(u, logp, ev);
        }
    }

    /// Same values as [`Circuit::forward_into`], scheduled by layer.
    pub(crate) fn forward_layered_into<E: Evidence + ?Sized>(&self, ev: &E, logp: &mut [f64]) {
        let units = self.units();
        for layer in self.layers().layers() {
            for id in layer {
                logp[id.0] = unit_logp(&units[id.0], logp, ev);
            }
        }
    }

    /// Log-probability of every unit for one sample (marginals for `None` entries).
    pub fn evaluate<E: Evidence + ?Sized>(&self, sample: &E) -> Result<EvalTrace> {
        self.check_evidence(sample)?;
        let mut logp = vec![0.0; self.len()];
        self.forward_into(sample, &mut logp);
        Ok(EvalTrace { logp, root: self.root() })
    }

    /// Root log-probability of one sample.
    pub fn log_prob<E: Evidence + ?Sized>(&self, sample: &E) -> Result<f64> {
        Ok(self.evaluate(sample)?.root_logp())
    }

    /// Traces for every row, computed in parallel over rows with the layer schedule.
    pub fn evaluate_batch(&self, data: &Dataset) -> Result<Vec<EvalTrace>> {
        self.check_dataset(data)?;
        let n = self.len();
        let root = self.root();
        Ok((0..data.len())
            .into_par_iter()
            .map(|r| {
                let mut logp = vec![0.0; n];
                self.forward_layered_into(data.row(r), &mut logp);
                EvalTrace { logp, root }
            })
            .collect())
    }

    /// Root log-probability for every row.
    pub fn row_log_likelihoods(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(data)?;
        let n = self.len();
        let root = self.root().0;
        Ok((0..data.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |logp, r| {
                    self.forward_into(data.row(r), logp);
                    logp[root]
                },
            )
            .collect())
    }

    /// Mean log-likelihood over the rows of `data`.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let lls = self.row_log_likelihoods(data)?;
        Ok(lls.iter().sum::<f64>() / lls.len() as f64)
    }

    /// `-meanLL / (ln 2 * numVars)`.
    pub fn bits_per_dimension(&self, data: &Dataset) -> Result<f64> {
        let ll = self.log_likelihood(data)?;
        Ok(-ll / (std::f64::consts::LN_2 * self.num_vars() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::fixtures::{example_circuit, uniform_circuit, ExampleIds, EXAMPLE_SAMPLE};
    use crate::circuit::CircuitBuilder;

    /// All joint states of `cards`, in lexicographic order.
    fn all_states(cards: &[u32]) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for &k in cards {
            out = out.into_iter().flat_map(|p| (0..k).map(move |v| [p.clone(), vec![v]].concat())).collect();
        }
        out
    }

    #[test]
    fn worked_example_unit_values() {
        let c = example_circuit();
        let t = c.evaluate(&EXAMPLE_SAMPLE).unwrap();
        let ids = ExampleIds::default();
        let p = |u: UnitId| t.logp(u).exp();
        assert!((p(ids.p21) - 0.48).abs() < 1e-12);
        assert!((p(ids.p22) - 0.02).abs() < 1e-12);
        assert!((p(ids.s21) - 0.388).abs() < 1e-12);
        assert!((p(ids.s22) - 0.066).abs() < 1e-12);
        assert!((p(ids.p11) - 0.279).abs() < 5e-4);
        assert!((p(ids.p12) - 0.014).abs() < 5e-4);
        assert!((t.root_prob() - 0.12).abs() < 5e-4);
    }

    #[test]
    fn all_marginalized_is_one() {
        let c = example_circuit();
        let t = c.evaluate(&[None::<u32>; 4]).unwrap();
        assert!((t.root_prob() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_brute_force() {
        let c = example_circuit();
        let got = c.evaluate(&[Some(0), None, None, None]).unwrap().root_prob();
        let brute: f64 =
            all_states(&[2, 2, 2, 2]).iter().filter(|s| s[0] == 0).map(|s| c.log_prob(s).unwrap().exp()).sum();
        assert!((got - brute).abs() < 1e-12);
        assert!((got - 0.54).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_sequential_bitwise() {
        let c = example_circuit();
        let rows = all_states(&[2, 2, 2, 2]);
        let d = Dataset::from_rows(vec![2; 4], &rows).unwrap();
        let batch = c.evaluate_batch(&d).unwrap();
        let total: f64 = batch.iter().map(|t| t.root_prob()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for (row, t) in rows.iter().zip(&batch) {
            assert_eq!(c.evaluate(row).unwrap(), *t);
        }
        assert!(c.evaluate_batch(&Dataset::empty(vec![2; 4])).unwrap().is_empty());
    }

    #[test]
    fn evidence_errors() {
        let c = example_circuit();
        assert!(matches!(c.evaluate(&[0u32, 1, 0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(c.evaluate(&[0u32, 2, 0, 0]), Err(Error::CategoryOutOfRange { var: 1, value: 2, .. })));
    }

    #[test]
    fn likelihood_and_bpd() {
        let c = example_circuit();
        let one = Dataset::from_rows(vec![2; 4], &[EXAMPLE_SAMPLE]).unwrap();
        let two = Dataset::from_rows(vec![2; 4], &[EXAMPLE_SAMPLE, EXAMPLE_SAMPLE]).unwrap();
        let ll = c.log_likelihood(&one).unwrap();
        assert!((ll - c.log_likelihood(&two).unwrap()).abs() < 1e-15);
        let root = c.log_prob(&EXAMPLE_SAMPLE).unwrap();
        assert_eq!(ll, root);
        let bpd = c.bits_per_dimension(&one).unwrap();
        assert!((bpd - (-root / (std::f64::consts::LN_2 * 4.0))).abs() < 1e-15);
        assert!((bpd - 0.7647).abs() < 1e-3);
        assert!(matches!(c.log_likelihood(&Dataset::empty(vec![2; 4])), Err(Error::EmptyDataset)));

        let u = uniform_circuit(&[2, 2]);
        let d = Dataset::from_rows(vec![2, 2], &[[1u32, 0]]).unwrap();
        assert!((u.log_likelihood(&d).unwrap() - 0.25f64.ln()).abs() < 1e-15);
        let u8 = uniform_circuit(&[2; 8]);
        let d8 = Dataset::from_rows(vec![2; 8], &[[0u32, 1, 0, 1, 1, 1, 0, 0]]).unwrap();
        assert!((u8.bits_per_dimension(&d8).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_has_zero_bpd() {
        let mut b = CircuitBuilder::new(vec![2, 3]);
        let a = b.input(0, &[0.0, 1.0]);
        let c = b.input(1, &[0.0, 0.0, 1.0]);
        let p = b.product(vec![a, c]);
        let r = b.sum(vec![p], &[1.0]);
        let circuit = b.finish(r).unwrap();
        let d = Dataset::from_rows(vec![2, 3], &[[1u32, 2]]).unwrap();
        assert_eq!(circuit.bits_per_dimension(&d).unwrap(), 0.0);
        let other = Dataset::from_rows(vec![2, 3], &[[0u32, 2]]).unwrap();
        assert_eq!(circuit.log_likelihood(&other).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
