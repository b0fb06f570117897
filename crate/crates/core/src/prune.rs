//! Edge scoring, pruning, and the likelihood-drop formulas.
//!
//! Pruning removes sum edges, renormalizes the surviving weights of each
//! affected sum by their remaining mass, and drops units that become
//! unreachable. The pruning budget `floor(k * |C|)` counts every removed sum
//! edge, including edges of sub-circuits orphaned by an explicit removal, so the
//! output has exactly `|C| - floor(k * |C|)` parameters unless the protection
//! rule (a sum never loses its last child) runs out of candidates.

use std::fmt;
use std::io::Write;

use rand::Rng;

use crate::circuit::{compact, Circuit, UnitId, UnitKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::flows::{map_row_flows, FlowTable};
use crate::RngSeed;

#[derive(Debug, Clone)]
pub enum PruneHeuristic {
    /// Uniform random score per edge.
    Random(RngSeed),
    /// Linear-space edge weight.
    Param,
    /// Aggregate edge flow over a dataset.
    Flow(FlowTable),
}

impl PruneHeuristic {
    pub fn name(&self) -> &'static str {
        match self {
            PruneHeuristic::Random(_) => "rand",
            PruneHeuristic::Param => "param",
            PruneHeuristic::Flow(_) => "flow",
        }
    }
}

/// Score per sum edge in global edge order; lower scores are pruned first.
pub fn score_edges(circuit: &Circuit, heuristic: &PruneHeuristic) -> Result<Vec<f64>> {
    match heuristic {
        PruneHeuristic::Param => Ok(circuit.edge_params()),
        PruneHeuristic::Random(seed) => {
            let mut rng = seed.stream(0);
            Ok((0..circuit.num_edges()).map(|_| rng.random::<f64>()).collect())
        }
        PruneHeuristic::Flow(table) => {
            table.check_matches(circuit)?;
            Ok(table.edge_flow.clone())
        }
    }
}

/// Edge indices sorted by `(score, parent, child)` ascending.
pub fn rank_edges(circuit: &Circuit, scores: &[f64]) -> Vec<usize> {
    let mut keyed: Vec<(f64, UnitId, UnitId, usize)> =
        circuit.edges().map(|e| (scores[e.index], e.parent, e.child, e.index)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|k| k.3).collect()
}

/// Liveness bookkeeping for selecting edges under a budget with rollback.
struct Selection<'a> {
    circuit: &'a Circuit,
    edge_parent: Vec<usize>,
    edge_child: Vec<usize>,
    removed: Vec<bool>,
    alive: Vec<bool>,
    live_parents: Vec<usize>,
    live_children: Vec<usize>,
    removed_count: usize,
    log: Vec<Change>,
}

enum Change {
    Edge(usize),
    ParentDec(usize),
    ChildDec(usize),
    Kill(usize),
}

impl<'a> Selection<'a> {
    fn new(circuit: &'a Circuit) -> Self {
        let n = circuit.len();
        let mut live_parents = vec![0; n];
        let mut live_children = vec![0; n];
        for (i, u) in circuit.units().iter().enumerate() {
            live_children[i] = u.children().len();
            for c in u.children() {
                live_parents[c.0] += 1;
            }
        }
        let mut edge_parent = vec![0; circuit.num_edges()];
        let mut edge_child = vec![0; circuit.num_edges()];
        for e in circuit.edges() {
            edge_parent[e.index] = e.parent.0;
            edge_child[e.index] = e.child.0;
        }
        Self {
            circuit,
            edge_parent,
            edge_child,
            removed: vec![false; circuit.num_edges()],
            alive: vec![true; n],
            live_parents,
            live_children,
            removed_count: 0,
            log: Vec::new(),
        }
    }

    fn drop_parent_link(&mut self, child: usize, stack: &mut Vec<usize>) {
        self.live_parents[child] -= 1;
        self.log.push(Change::ParentDec(child));
        if self.live_parents[child] == 0 {
            self.alive[child] = false;
            self.log.push(Change::Kill(child));
            stack.push(child);
        }
    }

    /// Removes `edge` and everything it orphans, recording changes for rollback.
    fn remove(&mut self, edge: usize) {
        let mut stack = Vec::new();
        self.removed[edge] = true;
        self.removed_count += 1;
        self.log.push(Change::Edge(edge));
        let parent = self.edge_parent[edge];
        self.live_children[parent] -= 1;
        self.log.push(Change::ChildDec(parent));
        self.drop_parent_link(self.edge_child[edge], &mut stack);
        while let Some(dead) = stack.pop() {
            let unit = self.circuit.unit(UnitId(dead));
            match &unit.kind {
                UnitKind::Input(_) => {}
                UnitKind::Product { children } => {
                    for c in children {
                        self.drop_parent_link(c.0, &mut stack);
                    }
                }
                UnitKind::Sum { children, .. } => {
                    let start = self.circuit.edge_start(UnitId(dead));
                    for (slot, c) in children.iter().enumerate() {
                        if !self.removed[start + slot] {
                            self.removed[start + slot] = true;
                            self.removed_count += 1;
                            self.log.push(Change::Edge(start + slot));
                            self.drop_parent_link(c.0, &mut stack);
                        }
                    }
                }
            }
        }
    }

    fn checkpoint(&self) -> usize {
        self.log.len()
    }

    fn rollback(&mut self, mark: usize) {
        while self.log.len() > mark {
            match self.log.pop().unwrap() {
                Change::Edge(e) => {
                    self.removed[e] = false;
                    self.removed_count -= 1;
                }
                Change::ParentDec(u) => self.live_parents[u] += 1,
                Change::ChildDec(u) => self.live_children[u] += 1,
                Change::Kill(u) => self.alive[u] = true,
            }
        }
    }
}

/// Outcome of choosing edges to prune.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSelection {
    /// Explicitly chosen edges, in rank order.
    pub chosen: Vec<usize>,
    /// Every removed edge (chosen plus orphaned), as a mask over edge indices.
    pub removed: Vec<bool>,
    /// Candidates skipped by the protection rule or because their orphaned
    /// sub-circuit would overshoot the budget.
    pub exempted: usize,
}

/// Walks `ranked` and removes edges until `budget` sum edges are gone.
pub fn select_edges(circuit: &Circuit, ranked: &[usize], budget: usize) -> EdgeSelection {
    let mut sel = Selection::new(circuit);
    let mut chosen = Vec::new();
    let mut exempted = 0;
    for &e in ranked {
        if sel.removed_count == budget {
            break;
        }
        if sel.removed[e] {
            continue;
        }
        let parent = sel.edge_parent[e];
        if sel.live_children[parent] <= 1 {
            exempted += 1;
            continue;
        }
        let mark = sel.checkpoint();
        sel.remove(e);
        if sel.removed_count > budget {
            sel.rollback(mark);
            exempted += 1;
            continue;
        }
        chosen.push(e);
    }
    EdgeSelection { chosen, removed: sel.removed, exempted }
}

/// Removes the masked sum edges, renormalizes survivors per parent, and drops
/// unreachable units. Panics if a sum would lose every child.
pub fn remove_edges(circuit: &Circuit, removed: &[bool]) -> Circuit {
    let mut units = circuit.units().to_vec();
    for (i, u) in units.iter_mut().enumerate() {
        if let UnitKind::Sum { children, log_params } = &mut u.kind {
            let start = circuit.edge_start(UnitId(i));
            if !(0..children.len()).any(|s| removed[start + s]) {
                continue;
            }
            let keep: Vec<usize> = (0..children.len()).filter(|s| !removed[start + s]).collect();
            if keep.is_empty() {
                // dead unit; compaction will drop it
                children.clear();
                log_params.clear();
                continue;
            }
            let kept_logs: Vec<f64> = keep.iter().map(|&s| log_params[s]).collect();
            let mass = crate::circuit::log_sum_exp(&kept_logs);
            *children = keep.iter().map(|&s| children[s]).collect();
            *log_params = kept_logs.iter().map(|l| l - mass).collect();
        }
    }
    let (units, root, _) = compact(&units, circuit.root());
    let out = Circuit::from_units_unchecked(circuit.cardinalities().to_vec(), units, root)
        .expect("pruning preserves topological order");
    debug_assert!(out.units().iter().all(|u| !u.is_sum() || !u.children().is_empty()));
    out
}

/// Prunes exactly the listed edges (plus whatever they orphan).
pub fn prune_edges(circuit: &Circuit, edges: &[usize]) -> Result<Circuit> {
    let mut sel = Selection::new(circuit);
    for &e in edges {
        if e >= circuit.num_edges() {
            return Err(Error::InvalidArgument(format!("edge {e} out of range")));
        }
        if sel.removed[e] {
            continue;
        }
        if sel.live_children[sel.edge_parent[e]] <= 1 {
            return Err(Error::InvalidArgument(format!("removing edge {e} would empty its sum unit")));
        }
        sel.remove(e);
    }
    Ok(remove_edges(circuit, &sel.removed))
}

/// What a prune did, plus optional likelihood-drop estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub heuristic: String,
    pub fraction: f64,
    pub budget: usize,
    /// Explicitly pruned edges as (parent, child) in the input circuit.
    pub pruned_edges: Vec<(UnitId, UnitId)>,
    pub pruned_edge_indices: Vec<usize>,
    pub orphaned_edges: usize,
    pub exempted: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    pub kept_fraction: f64,
    /// Exact single-edge drop of each pruned edge, in `pruned_edges` order.
    pub exact_drop_per_edge: Option<Vec<f64>>,
    /// Multi-edge upper bound; `None` if not computed or inapplicable.
    pub bounded_drop: Option<f64>,
    pub approx_drop: Option<f64>,
    /// Rows where the flow-sum hypothesis of the bound failed.
    pub bound_violations: Vec<usize>,
}

/// Prunes `floor(fraction * |C|)` sum edges chosen by `heuristic`.
pub fn prune(circuit: &Circuit, heuristic: &PruneHeuristic, fraction: f64) -> Result<(Circuit, PruneReport)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("prune fraction {fraction} not in (0, 1)")));
    }
    let total = circuit.num_edges();
    if total < 2 {
        return Err(Error::InvalidArgument(format!("circuit has only {total} sum edge(s)")));
    }
    let scores = score_edges(circuit, heuristic)?;
    let ranked = rank_edges(circuit, &scores);
    let budget = (fraction * total as f64).floor() as usize;
    let sel = select_edges(circuit, &ranked, budget);
    let pruned = remove_edges(circuit, &sel.removed);
    let removed_total = sel.removed.iter().filter(|&&r| r).count();
    let mut pruned_edges = Vec::with_capacity(sel.chosen.len());
    let edges: Vec<_> = circuit.edges().collect();
    for &e in &sel.chosen {
        pruned_edges.push((edges[e].parent, edges[e].child));
    }
    let report = PruneReport {
        heuristic: heuristic.name().to_string(),
        fraction,
        budget,
        pruned_edges,
        pruned_edge_indices: sel.chosen.clone(),
        orphaned_edges: removed_total - sel.chosen.len(),
        exempted: sel.exempted,
        edges_before: total,
        edges_after: pruned.num_edges(),
        kept_fraction: pruned.num_edges() as f64 / total as f64,
        exact_drop_per_edge: None,
        bounded_drop: None,
        approx_drop: None,
        bound_violations: Vec::new(),
    };
    debug_assert_eq!(report.edges_after, total - removed_total);
    Ok((pruned, report))
}

impl PruneReport {
    /// Fills the exact per-edge drops and the multi-edge bound on `data`,
    /// measured on the unpruned `original` circuit.
    pub fn annotate(&mut self, original: &Circuit, data: &Dataset) -> Result<()> {
        let mut exact = Vec::with_capacity(self.pruned_edge_indices.len());
        for &e in &self.pruned_edge_indices {
            exact.push(exact_single_edge_drop(original, e, data)?);
        }
        self.exact_drop_per_edge = Some(exact);
        match multi_edge_drop_bound(original, &self.pruned_edge_indices, data) {
            Ok(b) => {
                self.bounded_drop = Some(b.upper_bound);
                self.approx_drop = Some(b.approximation);
            }
            Err(Error::BoundInapplicable { rows }) => {
                self.approx_drop = Some(approx_drop(original, &self.pruned_edge_indices, data)?);
                self.bound_violations = rows;
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    /// Structured `key = value` text form.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "{self}")?;
        Ok(())
    }
}

impl fmt::Display for PruneReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "heuristic = {}", self.heuristic)?;
        writeln!(f, "fraction = {}", self.fraction)?;
        writeln!(f, "budget = {}", self.budget)?;
        writeln!(f, "pruned = {}", self.pruned_edges.len())?;
        writeln!(f, "orphaned = {}", self.orphaned_edges)?;
        writeln!(f, "exempted = {}", self.exempted)?;
        writeln!(f, "edges_before = {}", self.edges_before)?;
        writeln!(f, "edges_after = {}", self.edges_after)?;
        writeln!(f, "kept_fraction = {}", self.kept_fraction)?;
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:e}"));
        writeln!(f, "bounded_drop = {}", opt(self.bounded_drop))?;
        writeln!(f, "approx_drop = {}", opt(self.approx_drop))?;
        if !self.bound_violations.is_empty() {
            writeln!(f, "bound_violations = {}", self.bound_violations.len())?;
        }
        writeln!(f, "[edges]")?;
        for (i, (p, c)) in self.pruned_edges.iter().enumerate() {
            match &self.exact_drop_per_edge {
                Some(d) => writeln!(f, "{p} {c} {:e}", d[i])?,
                None => writeln!(f, "{p} {c}")?,
            }
        }
        Ok(())
    }
}

fn edge_endpoints(circuit: &Circuit, edge: usize) -> Result<(UnitId, usize, f64)> {
    let e = circuit.edges().nth(edge).ok_or_else(|| Error::InvalidArgument(format!("edge {edge} out of range")))?;
    let UnitKind::Sum { log_params, .. } = &circuit.unit(e.parent).kind else {
        unreachable!("edges belong to sum units")
    };
    Ok((e.parent, e.slot, log_params[e.slot].exp()))
}

/// Exact mean log-likelihood loss from pruning one edge and renormalizing its
/// parent: `mean_x log((1-θ) / (1 - θ + θ F_n(x) - F_{n,c}(x)))`.
pub fn exact_single_edge_drop(circuit: &Circuit, edge: usize, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (parent, _, _) = edge_endpoints(circuit, edge)?;
    let k = circuit.unit(parent).children().len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("edge {edge} is the only child of its sum")));
    }
    let UnitKind::Sum { log_params, .. } = &circuit.unit(parent).kind else { unreachable!() };
    let slot = edge - circuit.edge_start(parent);
    let one_minus_theta = -log_params[slot].exp_m1();
    let start = circuit.edge_start(parent);
    let per_row = map_row_flows(circuit, data, |unit, edges| {
        // 1 - θ + θ F_n - F_nc rearranged into non-negative terms, since
        // F_n - F_nc is the flow through the siblings and cancels badly when
        // the pruned edge carries almost all of it
        let siblings: f64 = (start..start + k).filter(|&e| e != edge).map(|e| edges[e]).sum();
        let denom = one_minus_theta * (1.0 - unit[parent.0]) + siblings;
        (one_minus_theta / denom).ln()
    })?;
    Ok(per_row.iter().sum::<f64>() / per_row.len() as f64)
}

/// Upper bound and first-order approximation of the loss from pruning a set of edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropBound {
    pub upper_bound: f64,
    pub approximation: f64,
}

/// `-mean_x log(1 - Σ_E F_e(x))` and `Σ_E F_e(D) / |D|`. Fails with the list of
/// offending rows when some row has `Σ_E F_e(x) >= 1`.
pub fn multi_edge_drop_bound(circuit: &Circuit, edges: &[usize], data: &Dataset) -> Result<DropBound> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if edges.is_empty() {
        return Ok(DropBound { upper_bound: 0.0, approximation: 0.0 });
    }
    if let Some(&e) = edges.iter().find(|&&e| e >= circuit.num_edges()) {
        return Err(Error::InvalidArgument(format!("edge {e} out of range")));
    }
    let sums = map_row_flows(circuit, data, |_, ef| edges.iter().map(|&e| ef[e]).sum::<f64>())?;
    let rows: Vec<usize> = sums.iter().enumerate().filter(|(_, s)| **s >= 1.0).map(|(r, _)| r).collect();
    if !rows.is_empty() {
        return Err(Error::BoundInapplicable { rows });
    }
    let n = sums.len() as f64;
    Ok(DropBound {
        upper_bound: -sums.iter().map(|s| (-s).ln_1p()).sum::<f64>() / n,
        approximation: sums.iter().sum::<f64>() / n,
    })
}

fn approx_drop(circuit: &Circuit, edges: &[usize], data: &Dataset) -> Result<f64> {
    let sums = map_row_flows(circuit, data, |_, ef| edges.iter().map(|&e| ef[e]).sum::<f64>())?;
    Ok(sums.iter().sum::<f64>() / sums.len() as f64)
}

/// `LL(original) - LL(pruned)` by rebuilding the pruned circuit.
pub fn rebuild_drop(circuit: &Circuit, edges: &[usize], data: &Dataset) -> Result<f64> {
    let pruned = prune_edges(circuit, edges)?;
    Ok(circuit.log_likelihood(data)? - pruned.log_likelihood(data)?)
}

/// Contracts one-child sums into their product parents and drops unreachable
/// units. The distribution is unchanged.
pub fn simplify(circuit: &Circuit) -> Circuit {
    let units = circuit.units();
    // replacement[i]: the children that stand in for unit i when it is spliced
    // into a product parent
    let mut replacement: Vec<Option<Vec<UnitId>>> = vec![None; units.len()];
    for (i, u) in units.iter().enumerate() {
        if let UnitKind::Sum { children, .. } = &u.kind {
            if children.len() == 1 {
                let c = children[0];
                replacement[i] = Some(match &units[c.0].kind {
                    UnitKind::Product { children } => children.clone(),
                    _ => vec![c],
                });
            }
        }
    }
    let mut out = units.to_vec();
    for u in out.iter_mut() {
        if let UnitKind::Product { children } = &mut u.kind {
            if children.iter().any(|c| replacement[c.0].is_some()) {
                *children =
                    children.iter().flat_map(|c| replacement[c.0].clone().unwrap_or_else(|| vec![*c])).collect();
            }
        }
    }
    let mut root = circuit.root();
    if let UnitKind::Sum { children, .. } = &out[root.0].kind {
        if children.len() == 1 && !units[children[0].0].is_input() {
            root = children[0];
        }
    }
    let (units, root, _) = compact(&out, root);
    Circuit::from_units_unchecked(circuit.cardinalities().to_vec(), units, root)
        .expect("contraction preserves topological order")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::fixtures::{example_circuit, ExampleIds, EXAMPLE_SAMPLE};
    use crate::flows::aggregate_flows;

    fn example_data() -> Dataset {
        Dataset::from_rows(vec![2; 4], &[EXAMPLE_SAMPLE]).unwrap()
    }

    #[test]
    fn param_heuristic_picks_point_one() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let scores = score_edges(&c, &PruneHeuristic::Param).unwrap();
        let ranked = rank_edges(&c, &scores);
        assert_eq!(ranked[0], c.find_edge(ids.s22, ids.p21).unwrap());
    }

    #[test]
    fn flow_heuristic_picks_point_two() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let flows = aggregate_flows(&c, &example_data()).unwrap();
        let scores = score_edges(&c, &PruneHeuristic::Flow(flows)).unwrap();
        let ranked = rank_edges(&c, &scores);
        let e = c.find_edge(ids.s21, ids.p22).unwrap();
        assert_eq!(ranked[0], e);
        assert!((scores[e] - 0.00959).abs() < 1e-4);
    }

    #[test]
    fn random_scores_are_reproducible() {
        let c = example_circuit();
        let a = score_edges(&c, &PruneHeuristic::Random(RngSeed(9))).unwrap();
        let b = score_edges(&c, &PruneHeuristic::Random(RngSeed(9))).unwrap();
        assert_eq!(a, b);
        assert_eq!(rank_edges(&c, &a), rank_edges(&c, &b));
    }

    #[test]
    fn pruned_example_likelihoods() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let by_param = prune_edges(&c, &[c.find_edge(ids.s22, ids.p21).unwrap()]).unwrap();
        let p = by_param.log_prob(&EXAMPLE_SAMPLE).unwrap().exp();
        assert!((p - 0.114).abs() < 5e-4, "{p}");
        let by_flow = prune_edges(&c, &[c.find_edge(ids.s21, ids.p22).unwrap()]).unwrap();
        let p = by_flow.log_prob(&EXAMPLE_SAMPLE).unwrap().exp();
        assert!((p - 0.147).abs() < 5e-4, "{p}");
        assert!(by_flow.is_valid());
    }

    #[test]
    fn one_step_prune_with_heuristics() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        // 1/6 of six edges = one edge
        let (pc, report) = prune(&c, &PruneHeuristic::Param, 0.17).unwrap();
        assert_eq!(report.pruned_edges, vec![(ids.s22, ids.p21)]);
        assert_eq!(pc.num_edges(), 5);
        let flows = aggregate_flows(&c, &example_data()).unwrap();
        let (pc, report) = prune(&c, &PruneHeuristic::Flow(flows), 0.17).unwrap();
        assert_eq!(report.pruned_edges, vec![(ids.s21, ids.p22)]);
        assert!((pc.log_prob(&EXAMPLE_SAMPLE).unwrap().exp() - 0.147).abs() < 5e-4);
    }

    #[test]
    fn tiny_fraction_is_identity() {
        let c = example_circuit();
        let (pc, report) = prune(&c, &PruneHeuristic::Param, 0.1).unwrap();
        assert_eq!(report.budget, 0);
        assert!(report.pruned_edges.is_empty());
        assert_eq!(pc, c);
        let mut report = report;
        report.annotate(&c, &example_data()).unwrap();
        assert_eq!(report.bounded_drop, Some(0.0));
        assert_eq!(report.approx_drop, Some(0.0));
    }

    #[test]
    fn argument_errors() {
        let c = example_circuit();
        assert!(prune(&c, &PruneHeuristic::Param, 0.0).is_err());
        assert!(prune(&c, &PruneHeuristic::Param, 1.0).is_err());
        let u = crate::circuit::fixtures::uniform_circuit(&[2]);
        assert!(prune(&u, &PruneHeuristic::Param, 0.5).is_err());
        let wrong = PruneHeuristic::Flow(FlowTable::zeros(&u));
        assert!(matches!(score_edges(&c, &wrong), Err(Error::FlowTableMismatch(_))));
    }

    #[test]
    fn protection_never_empties_a_sum() {
        let c = example_circuit();
        let (pc, report) = prune(&c, &PruneHeuristic::Param, 0.99).unwrap();
        assert!(pc.is_valid());
        assert!(report.exempted > 0);
        let all_marg = pc.evaluate(&[None::<u32>; 4]).unwrap().root_prob();
        assert!((all_marg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_edge_drop_matches_rebuild_on_example() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let d = example_data();
        let e = c.find_edge(ids.s21, ids.p22).unwrap();
        let formula = exact_single_edge_drop(&c, e, &d).unwrap();
        let rebuild = rebuild_drop(&c, &[e], &d).unwrap();
        assert!((formula - rebuild).abs() < 1e-12);
        assert!((formula - (0.1201_f64 / 0.1466).ln()).abs() < 5e-3);
        let bound = multi_edge_drop_bound(&c, &[e], &d).unwrap();
        assert!(rebuild <= bound.upper_bound + 1e-12);
    }

    #[test]
    fn report_text_lists_edges() {
        let c = example_circuit();
        let (_, mut report) = prune(&c, &PruneHeuristic::Param, 0.34).unwrap();
        report.annotate(&c, &example_data()).unwrap();
        let text = report.to_string();
        assert!(text.contains("heuristic = param"));
        assert!(text.contains("budget = 2"));
        assert_eq!(text.lines().skip_while(|l| *l != "[edges]").count(), 3);
    }

    #[test]
    fn simplify_contracts_single_child_sums() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let pc = prune_edges(&c, &[c.find_edge(ids.s21, ids.p22).unwrap()]).unwrap();
        let s = simplify(&pc);
        assert!(s.is_valid(), "{:?}", s.validate());
        assert_eq!(s.num_edges(), pc.num_edges() - 1);
        let a = pc.log_prob(&EXAMPLE_SAMPLE).unwrap();
        let b = s.log_prob(&EXAMPLE_SAMPLE).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
