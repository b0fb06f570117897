use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::circuit::{Circuit, CircuitBuilder, UnitId};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::RngSeed;

use super::hclt::{compile_tree, dirichlet_one};

/// Shape limits for [`random_circuit`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCircuitConfig {
    pub num_vars: usize,
    /// Cardinalities are drawn from `2..=max_cardinality`.
    pub max_cardinality: u32,
    pub max_sum_children: usize,
    /// Soft cap on sum edges; once reached, new sums get a single child.
    pub max_edges: usize,
    /// Chance of reusing an existing unit with the same scope, which makes the
    /// result a DAG rather than a tree.
    pub reuse_prob: f64,
}

impl Default for RandomCircuitConfig {
    fn default() -> Self {
        Self { num_vars: 6, max_cardinality: 3, max_sum_children: 3, max_edges: 60, reuse_prob: 0.3 }
    }
}

struct RandomBuilder<'a, R> {
    b: CircuitBuilder,
    rng: &'a mut R,
    cfg: &'a RandomCircuitConfig,
    edges: usize,
    by_scope: HashMap<Vec<usize>, Vec<UnitId>>,
}

impl<R: Rng> RandomBuilder<'_, R> {
    fn leaf(&mut self, var: usize) -> UnitId {
        let k = self.b.cardinalities()[var] as usize;
        let probs = dirichlet_one(self.rng, k);
        self.b.input(var, &probs)
    }

    fn children_count(&mut self) -> usize {
        if self.edges >= self.cfg.max_edges {
            1
        } else {
            self.rng.random_range(1..=self.cfg.max_sum_children.max(1))
        }
    }

    /// A sum or input over `vars` (sorted).
    fn region(&mut self, vars: &[usize]) -> UnitId {
        if let Some(existing) = self.by_scope.get(vars) {
            if self.rng.random_bool(self.cfg.reuse_prob) {
                return *existing.choose(self.rng).unwrap();
            }
        }
        let id = if vars.len() == 1 && self.rng.random_bool(0.3) { self.leaf(vars[0]) } else { self.sum(vars, false) };
        self.by_scope.entry(vars.to_vec()).or_default().push(id);
        id
    }

    fn sum(&mut self, vars: &[usize], at_least_two: bool) -> UnitId {
        let mut k = self.children_count();
        if at_least_two {
            k = k.max(2);
        }
        self.edges += k;
        let children: Vec<UnitId> =
            (0..k).map(|_| if vars.len() == 1 { self.leaf(vars[0]) } else { self.product(vars) }).collect();
        let w = dirichlet_one(self.rng, k);
        self.b.sum(children, &w)
    }

    fn product(&mut self, vars: &[usize]) -> UnitId {
        let mut shuffled = vars.to_vec();
        shuffled.shuffle(self.rng);
        let parts = if vars.len() >= 3 && self.rng.random_bool(0.3) { 3 } else { 2 };
        let mut cuts: Vec<usize> = (1..vars.len()).collect();
        cuts.shuffle(self.rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(parts - 1).collect();
        cuts.sort_unstable();
        let mut bounds = vec![0];
        bounds.extend(cuts);
        bounds.push(vars.len());
        let children: Vec<UnitId> = bounds
            .windows(2)
            .map(|w| {
                let mut part = shuffled[w[0]..w[1]].to_vec();
                part.sort_unstable();
                self.region(&part)
            })
            .collect();
        self.b.product(children)
    }
}

/// A random smooth, decomposable, alternating circuit with a root sum of at
/// least two children. Sum weights and leaf distributions are Dirichlet(1).
pub fn random_circuit<R: Rng>(config: &RandomCircuitConfig, rng: &mut R) -> Circuit {
    assert!(config.num_vars >= 1 && config.max_cardinality >= 2);
    let cards: Vec<u32> = (0..config.num_vars).map(|_| rng.random_range(2..=config.max_cardinality)).collect();
    let mut rb = RandomBuilder { b: CircuitBuilder::new(cards), rng, cfg: config, edges: 0, by_scope: HashMap::new() };
    let vars: Vec<usize> = (0..config.num_vars).collect();
    let root = rb.sum(&vars, true);
    rb.b.finish(root).expect("generator builds valid circuits")
}

/// Rows with every cell uniform over its cardinality.
pub fn uniform_dataset<R: Rng>(cardinalities: &[u32], rows: usize, rng: &mut R) -> Dataset {
    let data: Vec<Vec<u32>> =
        (0..rows).map(|_| cardinalities.iter().map(|&k| rng.random_range(0..k)).collect()).collect();
    Dataset::from_rows(cardinalities.to_vec(), &data).expect("cells are in range")
}

/// Product of per-variable marginals (Laplace-smoothed from `data`) under a
/// one-child root sum.
pub fn fully_factorized(data: &Dataset) -> Result<Circuit> {
    let mut b = CircuitBuilder::new(data.cardinalities().to_vec());
    let leaves: Vec<UnitId> = data
        .cardinalities()
        .iter()
        .enumerate()
        .map(|(v, &k)| {
            let mut counts = vec![1.0; k as usize];
            for row in data.rows() {
                counts[row[v] as usize] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            let probs: Vec<f64> = counts.iter().map(|c| c / total).collect();
            b.input(v, &probs)
        })
        .collect();
    let p = b.product(leaves);
    let r = b.sum(vec![p], &[1.0]);
    b.finish(r)
}

/// Root sum over `components` fully factorized products with random leaves.
pub fn dense_mixture(cardinalities: &[u32], components: usize, seed: RngSeed) -> Result<Circuit> {
    if components == 0 || cardinalities.is_empty() {
        return Err(Error::InvalidArgument("need at least one component and one variable".into()));
    }
    let mut rng = seed.stream(0);
    let mut b = CircuitBuilder::new(cardinalities.to_vec());
    let products: Vec<UnitId> = (0..components)
        .map(|_| {
            let leaves: Vec<UnitId> = cardinalities
                .iter()
                .enumerate()
                .map(|(v, &k)| {
                    let probs = dirichlet_one(&mut rng, k as usize);
                    b.input(v, &probs)
                })
                .collect();
            b.product(leaves)
        })
        .collect();
    let w = dirichlet_one(&mut rng, components);
    let r = b.sum(products, &w);
    b.finish(r)
}

/// Random tree over `n` variables as child lists, rooted at 0.
fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    let mut placed = vec![0];
    let mut children = vec![Vec::new(); n];
    for v in order {
        let parent = *placed.choose(rng).unwrap();
        children[parent].push(v);
        placed.push(v);
    }
    for c in children.iter_mut() {
        c.sort_unstable();
    }
    children
}

/// Draws from a symmetric Dirichlet with concentration `alpha`.
fn dirichlet<R: Rng>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng).max(1e-12)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Ground-truth circuit for synthetic experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub num_vars: usize,
    pub cardinality: u32,
    pub hidden_states: usize,
    /// Children kept per sum; the rest of the `hidden_states` slots are absent.
    pub children_per_sum: usize,
    /// Dirichlet concentration of leaf distributions; small values give peaked leaves.
    pub leaf_concentration: f64,
    pub seed: RngSeed,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            num_vars: 10,
            cardinality: 2,
            hidden_states: 4,
            children_per_sum: 2,
            leaf_concentration: 0.5,
            seed: RngSeed(0),
        }
    }
}

/// A sparse latent-tree circuit: a random tree compiled like an HCLT, where
/// every sum keeps only `children_per_sum` random children.
pub fn planted_circuit(config: &PlantedConfig) -> Result<Circuit> {
    let h = config.hidden_states;
    if config.num_vars == 0 || h == 0 || config.children_per_sum == 0 || config.cardinality < 2 {
        return Err(Error::InvalidArgument("planted circuit needs vars, states, children and cardinality >= 2".into()));
    }
    let keep = config.children_per_sum.min(h);
    let mut rng = config.seed.stream(0);
    let children = random_tree(config.num_vars, &mut rng);
    let cards = vec![config.cardinality; config.num_vars];
    compile_tree(
        &children,
        0,
        &cards,
        h,
        &mut rng,
        |_, rng| dirichlet(rng, config.cardinality as usize, config.leaf_concentration),
        |rng| {
            let mut slots: Vec<usize> = (0..h).collect();
            slots.shuffle(rng);
            slots.truncate(keep);
            slots.sort_unstable();
            let w = dirichlet_one(rng, keep);
            slots.into_iter().zip(w).collect()
        },
    )
}

/// A Bayesian network over observed variables with tree structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTree {
    pub parent: Vec<Option<usize>>,
    pub cardinality: u32,
    /// `cpt[v][parent_value]` is the distribution of `v`; roots use row 0.
    pub cpt: Vec<Vec<Vec<f64>>>,
}

impl PlantedTree {
    /// Random tree rooted at 0 whose conditionals put `strength` extra mass on
    /// copying the parent value.
    pub fn random(num_vars: usize, cardinality: u32, strength: f64, seed: RngSeed) -> Self {
        let mut rng = seed.stream(0);
        let children = random_tree(num_vars, &mut rng);
        let mut parent = vec![None; num_vars];
        for (v, ch) in children.iter().enumerate() {
            for &c in ch {
                parent[c] = Some(v);
            }
        }
        let k = cardinality as usize;
        let cpt = (0..num_vars)
            .map(|v| {
                let rows = if parent[v].is_some() { k } else { 1 };
                (0..rows)
                    .map(|pv| {
                        let mut p: Vec<f64> = dirichlet_one(&mut rng, k).iter().map(|x| x * (1.0 - strength)).collect();
                        if parent[v].is_some() {
                            p[pv] += strength;
                        } else {
                            p.iter_mut().for_each(|x| *x += strength / k as f64);
                        }
                        p
                    })
                    .collect()
            })
            .collect();
        Self { parent, cardinality, cpt }
    }

    /// Undirected edges `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> =
            self.parent.iter().enumerate().filter_map(|(v, p)| p.map(|p| (p.min(v), p.max(v)))).collect();
        e.sort_unstable();
        e
    }

    /// `rows` ancestral samples; row `i` uses substream `i` of `seed`.
    pub fn sample(&self, rows: usize, seed: RngSeed) -> Dataset {
        let n = self.parent.len();
        // parents before children
        let mut order = Vec::with_capacity(n);
        let mut depth_sorted: Vec<(usize, usize)> = (0..n)
            .map(|v| {
                let mut d = 0;
                let mut u = v;
                while let Some(p) = self.parent[u] {
                    d += 1;
                    u = p;
                }
                (d, v)
            })
            .collect();
        depth_sorted.sort_unstable();
        order.extend(depth_sorted.into_iter().map(|(_, v)| v));
        let data: Vec<Vec<u32>> = (0..rows)
            .map(|i| {
                let mut rng = seed.stream(i as u64);
                let mut x = vec![0u32; n];
                for &v in &order {
                    let row = self.parent[v].map_or(0, |p| x[p] as usize);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let dist = &self.cpt[v][row];
                    x[v] = (dist.len() - 1) as u32;
                    for (c, p) in dist.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            x[v] = c as u32;
                            break;
                        }
                    }
                }
                x
            })
            .collect();
        Dataset::from_rows(vec![self.cardinality; n], &data).expect("cells are in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{chow_liu, estimate_mutual_info};

    #[test]
    fn random_circuits_are_valid() {
        let mut rng = RngSeed(8).stream(0);
        for i in 0..50 {
            let cfg = RandomCircuitConfig { num_vars: 1 + i % 10, ..RandomCircuitConfig::default() };
            let c = random_circuit(&cfg, &mut rng);
            assert!(c.is_valid(), "{:?}", c.validate());
            assert!(c.num_edges() >= 2);
            let z = c.evaluate(&vec![None::<u32>; c.num_vars()]).unwrap().root_prob();
            assert!((z - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn factorized_and_mixture() {
        let d = Dataset::from_rows(vec![2, 3], &[[0u32, 2], [1, 2], [0, 0]]).unwrap();
        let f = fully_factorized(&d).unwrap();
        assert!(f.is_valid());
        let p = f.log_prob(&[0u32, 2]).unwrap().exp();
        assert!((p - (3.0 / 5.0) * (3.0 / 6.0)).abs() < 1e-12);
        let m = dense_mixture(&[2, 3, 4], 5, RngSeed(1)).unwrap();
        assert!(m.is_valid());
        assert_eq!(m.num_edges(), 5);
    }

    #[test]
    fn planted_circuit_shape() {
        let cfg = PlantedConfig::default();
        let c = planted_circuit(&cfg).unwrap();
        assert!(c.is_valid(), "{:?}", c.validate());
        // products nobody selected are dropped along with the sums feeding them
        let full = cfg.children_per_sum * ((cfg.num_vars - 1) * cfg.hidden_states + 1);
        assert!(c.num_edges() <= full && c.num_edges() > full / 2, "{}", c.num_edges());
        assert!(c.units().iter().filter(|u| u.is_sum()).all(|u| u.children().len() == cfg.children_per_sum));
        assert_eq!(planted_circuit(&cfg).unwrap(), c);
    }

    #[test]
    fn planted_tree_is_recovered() {
        let t = PlantedTree::random(6, 2, 0.8, RngSeed(3));
        let d = t.sample(10_000, RngSeed(4));
        let tree = chow_liu(&estimate_mutual_info(&d, 0.1).unwrap(), 0).unwrap();
        let mut got = tree.edges.clone();
        got.sort_unstable();
        assert_eq!(got, t.edges());
    }
}
