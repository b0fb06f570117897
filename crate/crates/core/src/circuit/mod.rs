//! Circuit data model: input, sum and product units in a topologically ordered DAG.
//!
//! Units are stored so that every child id is smaller than its parent id and the
//! root is the last unit. Sum parameters and input distributions live in log space.
//! Sum edges are numbered globally in unit order; that numbering is what
//! [`crate::flows::FlowTable`] and the pruner index by.

mod eval;
mod layers;
mod scope;
mod validate;

use std::fmt;
use std::sync::OnceLock;

pub use eval::{log_sum_exp, EvalTrace, Evidence};
pub use layers::LayerPlan;
pub use scope::Scope;
pub use validate::{StructureRule, StructureViolation, NORMALIZATION_TOL};

use crate::error::{Error, Result};

/// Dense index of a unit inside one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitId(pub usize);

impl UnitId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Categorical distribution over one variable, stored as log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    pub var: usize,
    pub log_probs: Vec<f64>,
}

impl InputDistribution {
    pub fn from_probs(var: usize, probs: &[f64]) -> Self {
        Self { var, log_probs: probs.iter().map(|p| p.ln()).collect() }
    }

    /// Bernoulli leaf `[1 - p, p]`.
    pub fn bernoulli(var: usize, p: f64) -> Self {
        Self::from_probs(var, &[1.0 - p, p])
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn cardinality(&self) -> usize {
        self.log_probs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitKind {
    Input(InputDistribution),
    Sum { children: Vec<UnitId>, log_params: Vec<f64> },
    Product { children: Vec<UnitId> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub kind: UnitKind,
    pub scope: Scope,
}

impl Unit {
    pub fn children(&self) -> &[UnitId] {
        match &self.kind {
            UnitKind::Input(_) => &[],
            UnitKind::Sum { children, .. } | UnitKind::Product { children } => children,
        }
    }

    pub fn is_sum(&self) -> bool {
        matches!(self.kind, UnitKind::Sum { .. })
    }

    pub fn is_product(&self) -> bool {
        matches!(self.kind, UnitKind::Product { .. })
    }

    pub fn is_input(&self) -> bool {
        matches!(self.kind, UnitKind::Input(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            UnitKind::Input(_) => "input",
            UnitKind::Sum { .. } => "sum",
            UnitKind::Product { .. } => "product",
        }
    }
}

/// A parameterized sum edge `(parent, child)`; `slot` is the child position in the parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SumEdge {
    pub index: usize,
    pub parent: UnitId,
    pub child: UnitId,
    pub slot: usize,
}

/// A probabilistic circuit.
#[derive(Debug)]
pub struct Circuit {
    units: Vec<Unit>,
    root: UnitId,
    cardinalities: Vec<u32>,
    edge_start: Vec<usize>,
    layers: OnceLock<LayerPlan>,
}

impl Clone for Circuit {
    fn clone(&self) -> Self {
        let layers = OnceLock::new();
        if let Some(plan) = self.layers.get() {
            let _ = layers.set(plan.clone());
        }
        Self {
            units: self.units.clone(),
            root: self.root,
            cardinalities: self.cardinalities.clone(),
            edge_start: self.edge_start.clone(),
            layers,
        }
    }
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.units == other.units && self.root == other.root && self.cardinalities == other.cardinalities
    }
}

impl Circuit {
    /// Assembles a circuit without checking structural rules. Child ids must be
    /// smaller than their parent id and the root must be in range; everything
    /// else is left to [`Circuit::validate`].
    pub fn from_units_unchecked(cardinalities: Vec<u32>, units: Vec<Unit>, root: UnitId) -> Result<Self> {
        if root.0 >= units.len() {
            return Err(Error::InvalidArgument(format!("root {root} out of range")));
        }
        for (i, u) in units.iter().enumerate() {
            if let Some(c) = u.children().iter().find(|c| c.0 >= i) {
                return Err(Error::InvalidArgument(format!(
                    "unit {i} references child {c} that is not earlier in topological order"
                )));
            }
        }
        let mut edge_start = Vec::with_capacity(units.len() + 1);
        let mut acc = 0;
        for u in &units {
            edge_start.push(acc);
            if u.is_sum() {
                acc += u.children().len();
            }
        }
        edge_start.push(acc);
        Ok(Self { units, root, cardinalities, edge_start, layers: OnceLock::new() })
    }

    /// Like [`Circuit::from_units_unchecked`] but rejects any structural violation.
    pub fn from_units(cardinalities: Vec<u32>, units: Vec<Unit>, root: UnitId) -> Result<Self> {
        let c = Self::from_units_unchecked(cardinalities, units, root)?;
        let violations = c.validate();
        if violations.is_empty() {
            Ok(c)
        } else {
            Err(Error::InvalidCircuit(violations))
        }
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, id: UnitId) -> &Unit {
        &self.units[id.0]
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn root(&self) -> UnitId {
        self.root
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    /// Number of sum edges, i.e. the parameter count |C|.
    pub fn num_edges(&self) -> usize {
        *self.edge_start.last().unwrap_or(&0)
    }

    /// Global index of the first sum edge of `unit` (only meaningful for sums).
    pub fn edge_start(&self, unit: UnitId) -> usize {
        self.edge_start[unit.0]
    }

    pub fn edges(&self) -> impl Iterator<Item = SumEdge> + '_ {
        self.units.iter().enumerate().flat_map(move |(i, u)| {
            let start = self.edge_start[i];
            let children: &[UnitId] = if u.is_sum() { u.children() } else { &[] };
            children.iter().enumerate().map(move |(slot, &child)| SumEdge {
                index: start + slot,
                parent: UnitId(i),
                child,
                slot,
            })
        })
    }

    /// Linear-space parameter of every sum edge, in global edge order.
    pub fn edge_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in &self.units {
            if let UnitKind::Sum { log_params, .. } = &u.kind {
                out.extend(log_params.iter().map(|l| l.exp()));
            }
        }
        out
    }

    /// Finds the global index of the sum edge `(parent, child)`.
    pub fn find_edge(&self, parent: UnitId, child: UnitId) -> Option<usize> {
        let u = self.units.get(parent.0)?;
        if !u.is_sum() {
            return None;
        }
        u.children().iter().position(|&c| c == child).map(|slot| self.edge_start[parent.0] + slot)
    }

    pub fn num_sums(&self) -> usize {
        self.units.iter().filter(|u| u.is_sum()).count()
    }

    pub(crate) fn units_mut(&mut self) -> &mut [Unit] {
        &mut self.units
    }

    /// Layer plan, computed on first use.
    pub fn layers(&self) -> &LayerPlan {
        self.layers.get_or_init(|| LayerPlan::build(self).expect("topological order is enforced at construction"))
    }

    /// Keeps only units reachable from the root, renumbering them in their original order.
    /// Returns the compacted circuit and the number of removed units.
    pub fn compacted(&self) -> (Circuit, usize) {
        let (units, root, removed) = compact(&self.units, self.root);
        let c = Circuit::from_units_unchecked(self.cardinalities.clone(), units, root)
            .expect("compaction preserves topological order");
        (c, removed)
    }
}

/// Drops units unreachable from `root` and renumbers the rest, preserving order.
pub(crate) fn compact(units: &[Unit], root: UnitId) -> (Vec<Unit>, UnitId, usize) {
    let mut reach = vec![false; root.0 + 1];
    reach[root.0] = true;
    for i in (0..=root.0).rev() {
        if reach[i] {
            for c in units[i].children() {
                reach[c.0] = true;
            }
        }
    }
    let mut remap = vec![usize::MAX; root.0 + 1];
    let mut out = Vec::new();
    for i in 0..=root.0 {
        if !reach[i] {
            continue;
        }
        remap[i] = out.len();
        let mut u = units[i].clone();
        match &mut u.kind {
            UnitKind::Input(_) => {}
            UnitKind::Sum { children, .. } | UnitKind::Product { children } => {
                for c in children.iter_mut() {
                    *c = UnitId(remap[c.0]);
                }
            }
        }
        out.push(u);
    }
    let removed = units.len() - out.len();
    let new_root = UnitId(out.len() - 1);
    (out, new_root, removed)
}

/// Incremental construction in topological order. Scopes are derived from children.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    cardinalities: Vec<u32>,
    units: Vec<Unit>,
}

impl CircuitBuilder {
    pub fn new(cardinalities: Vec<u32>) -> Self {
        Self { cardinalities, units: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    fn push(&mut self, kind: UnitKind, scope: Scope) -> UnitId {
        let id = UnitId(self.units.len());
        self.units.push(Unit { kind, scope });
        id
    }

    fn union_scope(&self, children: &[UnitId]) -> Scope {
        let mut s = Scope::default();
        for c in children {
            assert!(c.0 < self.units.len(), "child {c} does not exist yet");
            s.union_with(&self.units[c.0].scope);
        }
        s
    }

    /// Categorical input from linear-space probabilities.
    pub fn input(&mut self, var: usize, probs: &[f64]) -> UnitId {
        self.input_dist(InputDistribution::from_probs(var, probs))
    }

    pub fn bernoulli(&mut self, var: usize, p: f64) -> UnitId {
        self.input_dist(InputDistribution::bernoulli(var, p))
    }

    pub fn input_dist(&mut self, dist: InputDistribution) -> UnitId {
        let scope = Scope::singleton(dist.var);
        self.push(UnitKind::Input(dist), scope)
    }

    /// Sum unit from linear-space weights.
    pub fn sum(&mut self, children: Vec<UnitId>, weights: &[f64]) -> UnitId {
        let log_params = weights.iter().map(|w| w.ln()).collect();
        self.sum_log(children, log_params)
    }

    pub fn sum_log(&mut self, children: Vec<UnitId>, log_params: Vec<f64>) -> UnitId {
        let scope = self.union_scope(&children);
        self.push(UnitKind::Sum { children, log_params }, scope)
    }

    pub fn product(&mut self, children: Vec<UnitId>) -> UnitId {
        let scope = self.union_scope(&children);
        self.push(UnitKind::Product { children }, scope)
    }

    /// Compacts to the units reachable from `root` and validates the result.
    pub fn finish(self, root: UnitId) -> Result<Circuit> {
        let (units, root, _) = compact(&self.units, root);
        Circuit::from_units(self.cardinalities, units, root)
    }

    /// Keeps every unit as built and skips validation.
    pub fn finish_unchecked(self, root: UnitId) -> Result<Circuit> {
        Circuit::from_units_unchecked(self.cardinalities, self.units, root)
    }
}

/// Small fixtures shared by unit tests and downstream test suites.
pub mod fixtures {
    use super::*;

    /// The four-variable, two-latent example circuit with Bernoulli leaves.
    ///
    /// Unit ids: inputs 0..=7, then `p21`, `p22`, `s21`, `s22`, `p11`, `p12`
    /// and the root (see [`ExampleIds`]).
    pub fn example_circuit() -> Circuit {
        let ids = ExampleIds::default();
        let mut b = CircuitBuilder::new(vec![2; 4]);
        // X2, X4 leaves under p21 and p22
        let x2a = b.bernoulli(1, 0.6);
        let x4a = b.bernoulli(3, 0.8);
        let x2b = b.bernoulli(1, 0.1);
        let x4b = b.bernoulli(3, 0.2);
        // X1, X3 leaves under p11 and p12
        let x1a = b.bernoulli(0, 0.1);
        let x3a = b.bernoulli(2, 0.2);
        let x1b = b.bernoulli(0, 0.7);
        let x3b = b.bernoulli(2, 0.3);
        let p21 = b.product(vec![x2a, x4a]);
        let p22 = b.product(vec![x2b, x4b]);
        let s21 = b.sum(vec![p21, p22], &[0.8, 0.2]);
        let s22 = b.sum(vec![p21, p22], &[0.1, 0.9]);
        let p11 = b.product(vec![x1a, s21, x3a]);
        let p12 = b.product(vec![x1b, s22, x3b]);
        let root = b.sum(vec![p11, p12], &[0.4, 0.6]);
        assert_eq!(
            [p21, p22, s21, s22, p11, p12, root],
            [ids.p21, ids.p22, ids.s21, ids.s22, ids.p11, ids.p12, ids.root]
        );
        b.finish(root).expect("example circuit is valid")
    }

    /// Named unit ids of [`example_circuit`].
    #[derive(Debug, Clone, Copy)]
    pub struct ExampleIds {
        pub p21: UnitId,
        pub p22: UnitId,
        pub s21: UnitId,
        pub s22: UnitId,
        pub p11: UnitId,
        pub p12: UnitId,
        pub root: UnitId,
    }

    impl Default for ExampleIds {
        fn default() -> Self {
            Self {
                p21: UnitId(8),
                p22: UnitId(9),
                s21: UnitId(10),
                s22: UnitId(11),
                p11: UnitId(12),
                p12: UnitId(13),
                root: UnitId(14),
            }
        }
    }

    /// The observation used throughout the worked example: X1=0, X2=1, X3=0, X4=1.
    pub const EXAMPLE_SAMPLE: [u32; 4] = [0, 1, 0, 1];

    /// Product of uniform leaves under a one-child root sum.
    pub fn uniform_circuit(cardinalities: &[u32]) -> Circuit {
        let mut b = CircuitBuilder::new(cardinalities.to_vec());
        let leaves: Vec<UnitId> =
            cardinalities.iter().enumerate().map(|(v, &k)| b.input(v, &vec![1.0 / k as f64; k as usize])).collect();
        let p = b.product(leaves);
        let root = b.sum(vec![p], &[1.0]);
        b.finish(root).expect("uniform circuit is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn example_has_six_parameters() {
        let c = example_circuit();
        assert_eq!(c.len(), 15);
        assert_eq!(c.num_edges(), 6);
        assert_eq!(c.root(), ExampleIds::default().root);
        let ids = ExampleIds::default();
        assert_eq!(c.find_edge(ids.s22, ids.p21), Some(2));
        assert_eq!(c.find_edge(ids.p11, ids.s21), None);
    }

    #[test]
    fn builder_drops_unreachable_units() {
        let mut b = CircuitBuilder::new(vec![2]);
        let a = b.bernoulli(0, 0.3);
        let _orphan = b.bernoulli(0, 0.5);
        let root = b.sum(vec![a], &[1.0]);
        let c = b.finish(root).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.root(), UnitId(1));
    }
}
