use rand::Rng;
use rand_distr::Exp1;

use crate::circuit::{Circuit, CircuitBuilder, UnitId};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::RngSeed;

use super::chow_liu::{chow_liu, estimate_mutual_info, quantize, ChowLiuTree};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcltConfig {
    /// Latent states per tree node.
    pub hidden_states: usize,
    /// Pseudo-count per joint cell when estimating mutual information.
    pub smoothing: f64,
    /// Estimate mutual information on columns reduced to this many categories.
    pub quantize: Option<u32>,
    pub seed: RngSeed,
}

impl Default for HcltConfig {
    fn default() -> Self {
        Self { hidden_states: 16, smoothing: 0.1, quantize: None, seed: RngSeed(0) }
    }
}

/// Weights from a symmetric Dirichlet(1).
pub(crate) fn dirichlet_one<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Learns a Chow-Liu tree on `data` and compiles it with [`compile_hclt`].
pub fn build_hclt(data: &Dataset, config: &HcltConfig) -> Result<Circuit> {
    if config.hidden_states < 1 {
        return Err(Error::InvalidArgument("hidden_states must be at least 1".into()));
    }
    let mi = match config.quantize {
        Some(b) => estimate_mutual_info(&quantize(data, b)?, config.smoothing)?,
        None => estimate_mutual_info(data, config.smoothing)?,
    };
    let tree = chow_liu(&mi, 0)?;
    compile_hclt(&tree, data, config)
}

/// Compiles a tree into a circuit with `h` latent states per node.
///
/// Every variable has `h` categorical leaves. For a node `v` with children
/// `c1..ck`, product `j` joins leaf `j` of `v` with sum `j` of each child bank
/// (a childless node uses its leaves directly). A non-root node gets a bank of
/// `h` sums, each mixing the node's `h` products; the root sum mixes the root's
/// products. That gives `(n - 1) h² + h` sum edges.
///
/// Leaves start halfway between the smoothed empirical marginal and a
/// Dirichlet(1) draw, so the `h` copies are not interchangeable under EM. Sum
/// weights are Dirichlet(1).
pub fn compile_hclt(tree: &ChowLiuTree, data: &Dataset, config: &HcltConfig) -> Result<Circuit> {
    let h = config.hidden_states;
    if h < 1 {
        return Err(Error::InvalidArgument("hidden_states must be at least 1".into()));
    }
    let n = data.num_vars();
    if tree.num_vars() != n {
        return Err(Error::DimensionMismatch { expected: n, got: tree.num_vars() });
    }
    let mut counts: Vec<Vec<f64>> = data.cardinalities().iter().map(|&k| vec![1.0; k as usize]).collect();
    for row in data.rows() {
        for (v, &x) in row.iter().enumerate() {
            counts[v][x as usize] += 1.0;
        }
    }
    let mut rng = config.seed.stream(0);
    compile_tree(
        &tree.children(),
        tree.root,
        data.cardinalities(),
        h,
        &mut rng,
        |v, rng| {
            let total: f64 = counts[v].iter().sum();
            let noise = dirichlet_one(rng, counts[v].len());
            counts[v].iter().zip(&noise).map(|(c, e)| 0.5 * c / total + 0.5 * e).collect()
        },
        |rng| dirichlet_one(rng, h).into_iter().enumerate().collect(),
    )
}

/// Shared compilation rule. `leaf(v, rng)` gives leaf probabilities for
/// variable `v`; `mix(rng)` gives `(slot, weight)` pairs for one sum over `h`
/// products, and slots it leaves out are not connected.
pub(crate) fn compile_tree<R: Rng>(
    children: &[Vec<usize>],
    root_var: usize,
    cards: &[u32],
    h: usize,
    rng: &mut R,
    mut leaf: impl FnMut(usize, &mut R) -> Vec<f64>,
    mut mix: impl FnMut(&mut R) -> Vec<(usize, f64)>,
) -> Result<Circuit> {
    let n = cards.len();
    let mut b = CircuitBuilder::new(cards.to_vec());
    // post-order: children before parents
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![(root_var, false)];
    while let Some((v, done)) = stack.pop() {
        if done {
            order.push(v);
        } else {
            stack.push((v, true));
            for &c in children[v].iter().rev() {
                stack.push((c, false));
            }
        }
    }
    let mut sum_over = |b: &mut CircuitBuilder, products: &[UnitId], rng: &mut R| {
        let (slots, weights): (Vec<usize>, Vec<f64>) = mix(rng).into_iter().unzip();
        b.sum(slots.iter().map(|&s| products[s]).collect(), &weights)
    };
    let mut banks: Vec<Vec<UnitId>> = vec![Vec::new(); n];
    let mut root = None;
    for v in order {
        let leaves: Vec<UnitId> = (0..h).map(|_| b.input(v, &leaf(v, rng))).collect();
        let products: Vec<UnitId> = if children[v].is_empty() {
            leaves
        } else {
            (0..h)
                .map(|j| {
                    let mut parts = vec![leaves[j]];
                    parts.extend(children[v].iter().map(|&c| banks[c][j]));
                    b.product(parts)
                })
                .collect()
        };
        if v == root_var {
            root = Some(sum_over(&mut b, &products, rng));
        } else {
            banks[v] = (0..h).map(|_| sum_over(&mut b, &products, rng)).collect();
        }
    }
    b.finish(root.expect("tree has a root"))
}
