//! Exact ancestral sampling.
//!
//! Inputs draw from their categorical distribution, products concatenate the
//! draws of all children, sums pick one child in proportion to its weight.

use rand::Rng;
use rayon::prelude::*;

use crate::circuit::{Circuit, UnitId, UnitKind};
use crate::dataset::Dataset;
use crate::RngSeed;

/// Sampler over one circuit with cumulative weight tables built once.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    circuit: &'a Circuit,
    /// Cumulative linear-space weights, per unit (sum weights or input categories).
    cdf: Vec<Vec<f64>>,
}

fn cumulative(log_weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    log_weights
        .iter()
        .map(|l| {
            acc += l.exp();
            acc
        })
        .collect()
}

/// Inverse-CDF draw; `u` is scaled by the total so slightly unnormalized tables still work.
fn draw(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    let i = cdf.partition_point(|&c| c <= target);
    if i < cdf.len() {
        return i;
    }
    // u rounded up to the total: take the last entry with positive mass
    (0..cdf.len()).rev().find(|&j| j == 0 || cdf[j] > cdf[j - 1]).unwrap_or(0)
}

impl<'a> Sampler<'a> {
    pub fn new(circuit: &'a Circuit) -> Self {
        let cdf = circuit
            .units()
            .iter()
            .map(|u| match &u.kind {
                UnitKind::Input(d) => cumulative(&d.log_probs),
                UnitKind::Sum { log_params, .. } => cumulative(log_params),
                UnitKind::Product { .. } => Vec::new(),
            })
            .collect();
        Self { circuit, cdf }
    }

    /// One fully observed sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        self.sample_visiting(rng, |_| {})
    }

    /// One sample, calling `visit` on every unit the draw passes through.
    pub fn sample_visiting<R: Rng + ?Sized, F: FnMut(UnitId)>(&self, rng: &mut R, mut visit: F) -> Vec<u32> {
        let mut out = vec![0u32; self.circuit.num_vars()];
        let mut stack = vec![self.circuit.root()];
        while let Some(id) = stack.pop() {
            visit(id);
            match &self.circuit.unit(id).kind {
                UnitKind::Input(d) => {
                    out[d.var] = draw(&self.cdf[id.0], rng.random::<f64>()) as u32;
                }
                UnitKind::Product { children } => stack.extend(children.iter().rev()),
                UnitKind::Sum { children, .. } => {
                    stack.push(children[draw(&self.cdf[id.0], rng.random::<f64>())]);
                }
            }
        }
        out
    }
}

/// One sample drawn with `rng`.
pub fn sample<R: Rng + ?Sized>(circuit: &Circuit, rng: &mut R) -> Vec<u32> {
    Sampler::new(circuit).sample(rng)
}

/// `count` samples; row `i` uses substream `i` of `seed`, so the output does not
/// depend on how rows are scheduled across threads.
pub fn sample_batch(circuit: &Circuit, count: usize, seed: RngSeed) -> Dataset {
    let sampler = Sampler::new(circuit);
    let rows: Vec<Vec<u32>> = (0..count).into_par_iter().map(|i| sampler.sample(&mut seed.stream(i as u64))).collect();
    let cells = rows.concat();
    Dataset::from_cells_unchecked(circuit.cardinalities().to_vec(), cells)
}
