//! The growing operator: double every unit, copy every sum edge three times,
//! and perturb the copied sum parameters with multiplicative Gaussian noise.

use rand_distr::{Distribution, Normal};

use crate::circuit::{compact, log_sum_exp, Circuit, Unit, UnitId, UnitKind};
use crate::error::{Error, Result};
use crate::RngSeed;

/// Noise draws at or below zero are replaced by this value.
pub const MIN_NOISE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrowConfig {
    /// Variance of the multiplicative noise `ε ~ N(1, σ²)`.
    pub sigma2: f64,
    pub seed: RngSeed,
}

impl Default for GrowConfig {
    fn default() -> Self {
        Self { sigma2: 0.1, seed: RngSeed(0) }
    }
}

/// Grown circuit plus the number of copies dropped because nothing reached them.
#[derive(Debug, Clone, PartialEq)]
pub struct Grown {
    pub circuit: Circuit,
    pub removed_units: usize,
}

/// Grows `circuit`; see [`grow_report`].
pub fn grow(circuit: &Circuit, config: &GrowConfig) -> Result<Circuit> {
    grow_report(circuit, config).map(|g| g.circuit)
}

/// Every unit `n` becomes a pair `(n, n')`. Products pair up children of the
/// same generation, inputs are deep-copied, and each sum copy mixes both
/// generations of its children with weights `normalize([θ, θ]) · ε`, then
/// renormalized. Only the first copy of the root is kept.
pub fn grow_report(circuit: &Circuit, config: &GrowConfig) -> Result<Grown> {
    if !(0.0..).contains(&config.sigma2) || !config.sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma2 must be >= 0, got {}", config.sigma2)));
    }
    let noise = Normal::new(1.0, config.sigma2.sqrt()).expect("finite non-negative std");
    let mut rng = config.seed.stream(0);
    let mut draw_log = |log_params: &[f64]| -> Vec<f64> {
        let doubled: Vec<f64> = log_params
            .iter()
            .chain(log_params)
            .map(|l| {
                let mut eps = if config.sigma2 == 0.0 { 1.0 } else { noise.sample(&mut rng) };
                if eps <= 0.0 {
                    eps = MIN_NOISE;
                }
                l + eps.ln()
            })
            .collect();
        let z = log_sum_exp(&doubled);
        doubled.into_iter().map(|l| l - z).collect()
    };

    let mut out: Vec<Unit> = Vec::with_capacity(2 * circuit.len());
    let mut old2new: Vec<[UnitId; 2]> = Vec::with_capacity(circuit.len());
    let push = |u: Unit, out: &mut Vec<Unit>| {
        out.push(u);
        UnitId(out.len() - 1)
    };
    for unit in circuit.units() {
        let pair = match &unit.kind {
            UnitKind::Input(_) => [push(unit.clone(), &mut out), push(unit.clone(), &mut out)],
            UnitKind::Product { children } => {
                let gen = |g: usize| Unit {
                    kind: UnitKind::Product { children: children.iter().map(|c| old2new[c.0][g]).collect() },
                    scope: unit.scope.clone(),
                };
                let (a, b) = (gen(0), gen(1));
                [push(a, &mut out), push(b, &mut out)]
            }
            UnitKind::Sum { children, log_params } => {
                let both: Vec<UnitId> =
                    children.iter().map(|c| old2new[c.0][0]).chain(children.iter().map(|c| old2new[c.0][1])).collect();
                let mut pair = [UnitId(0); 2];
                for slot in pair.iter_mut() {
                    let u = Unit {
                        kind: UnitKind::Sum { children: both.clone(), log_params: draw_log(log_params) },
                        scope: unit.scope.clone(),
                    };
                    *slot = push(u, &mut out);
                }
                pair
            }
        };
        old2new.push(pair);
    }
    let root = old2new[circuit.root().0][0];
    let (units, root, removed) = compact(&out, root);
    let grown = Circuit::from_units_unchecked(circuit.cardinalities().to_vec(), units, root)
        .expect("copies keep children before parents");
    if removed > 0 {
        log::debug!("grow dropped {removed} unreachable copies");
    }
    Ok(Grown { circuit: grown, removed_units: removed })
}
