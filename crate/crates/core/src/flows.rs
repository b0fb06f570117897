//! Top-down probabilities and circuit flows.
//!
//! The top-down probability of a unit is the chance that unconditional ancestral
//! sampling visits it. The circuit flow is the same quantity conditioned on the
//! sample being `x`; it equals the top-down probability of the circuit whose sum
//! weights are replaced by the posteriors `θ_{c|n} p_c(x) / p_n(x)`.

use std::io::Write;

use rayon::prelude::*;

use crate::circuit::{Circuit, EvalTrace, Evidence, UnitId, UnitKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Rows per partial table during aggregation; the reduction tree over chunks is fixed.
const CHUNK_ROWS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct TopDownTable {
    pub unit_prob: Vec<f64>,
    pub edge_prob: Vec<f64>,
}

/// Unconditional visit probabilities of every unit and sum edge.
pub fn top_down(circuit: &Circuit) -> TopDownTable {
    let mut unit_prob = vec![0.0; circuit.len()];
    let mut edge_prob = vec![0.0; circuit.num_edges()];
    unit_prob[circuit.root().0] = 1.0;
    for (i, u) in circuit.units().iter().enumerate().rev() {
        let q = unit_prob[i];
        match &u.kind {
            UnitKind::Input(_) => {}
            UnitKind::Product { children } => {
                for c in children {
                    unit_prob[c.0] += q;
                }
            }
            UnitKind::Sum { children, log_params } => {
                let start = circuit.edge_start(UnitId(i));
                for (slot, (c, lw)) in children.iter().zip(log_params).enumerate() {
                    let e = lw.exp() * q;
                    edge_prob[start + slot] = e;
                    unit_prob[c.0] += e;
                }
            }
        }
    }
    TopDownTable { unit_prob, edge_prob }
}

/// Per-unit and per-sum-edge flows, summed over `sample_count` samples.
///
/// `category_flow` holds, for every input unit, the flow reaching it split by
/// the observed category; it is only filled when the samples themselves are
/// known (see [`aggregate_flows`] and [`sample_flow`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    pub unit_flow: Vec<f64>,
    pub edge_flow: Vec<f64>,
    pub category_flow: Vec<f64>,
    category_start: Vec<usize>,
    pub sample_count: usize,
    /// Sum of root log-likelihoods of the aggregated samples.
    pub log_likelihood_sum: f64,
}

fn category_offsets(circuit: &Circuit) -> Vec<usize> {
    let mut out = Vec::with_capacity(circuit.len() + 1);
    let mut acc = 0;
    for u in circuit.units() {
        out.push(acc);
        if let UnitKind::Input(d) = &u.kind {
            acc += d.cardinality();
        }
    }
    out.push(acc);
    out
}

impl FlowTable {
    pub fn zeros(circuit: &Circuit) -> Self {
        let category_start = category_offsets(circuit);
        Self {
            unit_flow: vec![0.0; circuit.len()],
            edge_flow: vec![0.0; circuit.num_edges()],
            category_flow: vec![0.0; *category_start.last().unwrap()],
            category_start,
            sample_count: 0,
            log_likelihood_sum: 0.0,
        }
    }

    /// Flow into each category of input unit `unit`.
    pub fn categories(&self, unit: UnitId) -> &[f64] {
        &self.category_flow[self.category_start[unit.0]..self.category_start[unit.0 + 1]]
    }

    pub fn add(&mut self, other: &FlowTable) {
        debug_assert_eq!(self.unit_flow.len(), other.unit_flow.len());
        for (a, b) in self.unit_flow.iter_mut().zip(&other.unit_flow) {
            *a += b;
        }
        for (a, b) in self.edge_flow.iter_mut().zip(&other.edge_flow) {
            *a += b;
        }
        for (a, b) in self.category_flow.iter_mut().zip(&other.category_flow) {
            *a += b;
        }
        self.sample_count += other.sample_count;
        self.log_likelihood_sum += other.log_likelihood_sum;
    }

    /// Checks that the table was computed for a circuit of this shape.
    pub fn check_matches(&self, circuit: &Circuit) -> Result<()> {
        if self.unit_flow.len() != circuit.len() || self.edge_flow.len() != circuit.num_edges() {
            return Err(Error::FlowTableMismatch(format!(
                "table has {} units / {} edges, circuit has {} / {}",
                self.unit_flow.len(),
                self.edge_flow.len(),
                circuit.len(),
                circuit.num_edges()
            )));
        }
        Ok(())
    }

    pub fn mean_log_likelihood(&self) -> f64 {
        self.log_likelihood_sum / self.sample_count as f64
    }

    /// Writes `parent,child,flow` for every sum edge.
    pub fn write_edge_csv<W: Write>(&self, circuit: &Circuit, mut w: W) -> Result<()> {
        self.check_matches(circuit)?;
        writeln!(w, "parent,child,flow")?;
        for e in circuit.edges() {
            writeln!(w, "{},{},{:e}", e.parent, e.child, self.edge_flow[e.index])?;
        }
        Ok(())
    }
}

/// Backward pass for one sample. `flow` must be zeroed and sized to the circuit;
/// edge flows and (if `ev` is given) category flows are added into `acc`.
fn backward<E: Evidence + ?Sized>(
    circuit: &Circuit,
    logp: &[f64],
    ev: Option<&E>,
    flow: &mut [f64],
    acc: &mut FlowTable,
) {
    flow[circuit.root().0] = 1.0;
    for (i, u) in circuit.units().iter().enumerate().rev() {
        let f = flow[i];
        if f == 0.0 {
            continue;
        }
        match &u.kind {
            UnitKind::Product { children } => {
                for c in children {
                    flow[c.0] += f;
                }
            }
            UnitKind::Sum { children, log_params } => {
                let start = circuit.edge_start(UnitId(i));
                let lp = logp[i];
                for (slot, (c, lw)) in children.iter().zip(log_params).enumerate() {
                    let ef = (lw + logp[c.0] - lp).exp() * f;
                    acc.edge_flow[start + slot] += ef;
                    flow[c.0] += ef;
                }
            }
            UnitKind::Input(dist) => {
                if let Some(ev) = ev {
                    let base = acc.category_start[i];
                    match ev.value(dist.var) {
                        Some(v) => acc.category_flow[base + v as usize] += f,
                        None => {
                            for (k, l) in dist.log_probs.iter().enumerate() {
                                acc.category_flow[base + k] += f * l.exp();
                            }
                        }
                    }
                }
            }
        }
    }
    for (a, f) in acc.unit_flow.iter_mut().zip(flow.iter()) {
        *a += f;
    }
    acc.sample_count += 1;
    acc.log_likelihood_sum += logp[circuit.root().0];
}

/// Flows of one sample given its evaluation trace.
pub fn circuit_flow(circuit: &Circuit, trace: &EvalTrace) -> Result<FlowTable> {
    if trace.logp.len() != circuit.len() {
        return Err(Error::FlowTableMismatch("trace computed on a different circuit".into()));
    }
    if trace.root_logp() == f64::NEG_INFINITY {
        return Err(Error::ZeroLikelihood { row: 0 });
    }
    let mut table = FlowTable::zeros(circuit);
    let mut flow = vec![0.0; circuit.len()];
    backward::<[u32]>(circuit, &trace.logp, None, &mut flow, &mut table);
    Ok(table)
}

/// Flows of one sample, including the per-category input flows.
pub fn sample_flow<E: Evidence + ?Sized>(circuit: &Circuit, sample: &E) -> Result<FlowTable> {
    let trace = circuit.evaluate(sample)?;
    if trace.root_logp() == f64::NEG_INFINITY {
        return Err(Error::ZeroLikelihood { row: 0 });
    }
    let mut table = FlowTable::zeros(circuit);
    let mut flow = vec![0.0; circuit.len()];
    backward(circuit, &trace.logp, Some(sample), &mut flow, &mut table);
    Ok(table)
}

fn chunk_flows(circuit: &Circuit, data: &Dataset, rows: std::ops::Range<usize>) -> Result<FlowTable> {
    let mut table = FlowTable::zeros(circuit);
    let mut logp = vec![0.0; circuit.len()];
    let mut flow = vec![0.0; circuit.len()];
    for r in rows {
        let row = data.row(r);
        circuit.forward_into(row, &mut logp);
        if logp[circuit.root().0] == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood { row: r });
        }
        flow.iter_mut().for_each(|f| *f = 0.0);
        backward(circuit, &logp, Some(row), &mut flow, &mut table);
    }
    Ok(table)
}

fn pairwise_reduce(mut parts: Vec<FlowTable>) -> Option<FlowTable> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.add(&b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop()
}

/// Sum of per-row flow tables over `data`.
///
/// Rows are processed in parallel in fixed chunks and the chunk tables are
/// combined in a fixed pairwise order, so the result does not depend on the
/// number of threads.
pub fn aggregate_flows(circuit: &Circuit, data: &Dataset) -> Result<FlowTable> {
    circuit.check_dataset(data)?;
    let n = data.len();
    let chunks: Vec<_> = (0..n.div_ceil(CHUNK_ROWS)).map(|i| i * CHUNK_ROWS..((i + 1) * CHUNK_ROWS).min(n)).collect();
    let parts = chunks.into_par_iter().map(|range| chunk_flows(circuit, data, range)).collect::<Result<Vec<_>>>()?;
    Ok(pairwise_reduce(parts).unwrap_or_else(|| FlowTable::zeros(circuit)))
}

/// Applies `f` to the per-row unit and edge flows of every row, in row order.
///
/// Used where a quantity is nonlinear in the per-row flows (likelihood-drop
/// formulas); linear statistics should use [`aggregate_flows`].
pub fn map_row_flows<T, F>(circuit: &Circuit, data: &Dataset, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64], &[f64]) -> T + Sync,
{
    circuit.check_dataset(data)?;
    (0..data.len())
        .into_par_iter()
        .map(|r| {
            let row = data.row(r);
            let mut logp = vec![0.0; circuit.len()];
            circuit.forward_into(row, &mut logp);
            if logp[circuit.root().0] == f64::NEG_INFINITY {
                return Err(Error::ZeroLikelihood { row: r });
            }
            let mut table = FlowTable::zeros(circuit);
            let mut flow = vec![0.0; circuit.len()];
            backward::<[u32]>(circuit, &logp, None, &mut flow, &mut table);
            Ok(f(&table.unit_flow, &table.edge_flow))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::fixtures::{example_circuit, ExampleIds, EXAMPLE_SAMPLE};

    #[test]
    fn top_down_example() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let td = top_down(&c);
        assert_eq!(td.unit_prob[ids.root.0], 1.0);
        assert!((td.unit_prob[ids.p11.0] - 0.4).abs() < 1e-12);
        assert!((td.unit_prob[ids.p12.0] - 0.6).abs() < 1e-12);
        assert!((td.unit_prob[ids.s21.0] - 0.4).abs() < 1e-12);
        let e = c.find_edge(ids.s21, ids.p21).unwrap();
        assert!((td.edge_prob[e] - 0.32).abs() < 1e-12);
        for (i, u) in c.units().iter().enumerate() {
            if u.is_sum() {
                let start = c.edge_start(UnitId(i));
                let s: f64 = td.edge_prob[start..start + u.children().len()].iter().sum();
                assert!((s - td.unit_prob[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flow_example() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let trace = c.evaluate(&EXAMPLE_SAMPLE).unwrap();
        let f = circuit_flow(&c, &trace).unwrap();
        assert_eq!(f.unit_flow[ids.root.0], 1.0);
        // hand values: 0.4 * 0.27936 / 0.1201 and the complement
        let p = |u: UnitId| trace.logp(u).exp();
        let f11 = 0.4 * p(ids.p11) / trace.root_prob();
        assert!((f.unit_flow[ids.p11.0] - f11).abs() < 1e-12);
        assert!((f.unit_flow[ids.p11.0] - 0.93).abs() < 5e-3);
        assert!((f.unit_flow[ids.p12.0] - 0.07).abs() < 5e-3);
        let e = c.find_edge(ids.s21, ids.p22).unwrap();
        assert!((f.edge_flow[e] - 0.2 * 0.02 / 0.388 * f11).abs() < 1e-12);
        assert!((f.edge_flow[e] - 0.00959).abs() < 1e-4);
        let min = f.edge_flow.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, f.edge_flow[e]);
    }

    #[test]
    fn marginal_trace_flow_is_top_down() {
        let c = example_circuit();
        let trace = c.evaluate(&[None::<u32>; 4]).unwrap();
        let f = circuit_flow(&c, &trace).unwrap();
        let td = top_down(&c);
        for (a, b) in f.unit_flow.iter().zip(&td.unit_prob) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in f.edge_flow.iter().zip(&td.edge_prob) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_is_linear() {
        let c = example_circuit();
        let one = Dataset::from_rows(vec![2; 4], &[EXAMPLE_SAMPLE]).unwrap();
        let three = Dataset::from_rows(vec![2; 4], &[EXAMPLE_SAMPLE; 3]).unwrap();
        let a1 = aggregate_flows(&c, &one).unwrap();
        let single = circuit_flow(&c, &c.evaluate(&EXAMPLE_SAMPLE).unwrap()).unwrap();
        assert_eq!(a1.edge_flow, single.edge_flow);
        assert_eq!(a1.unit_flow, single.unit_flow);
        let a3 = aggregate_flows(&c, &three).unwrap();
        assert_eq!(a3.sample_count, 3);
        for (x, y) in a3.edge_flow.iter().zip(&a1.edge_flow) {
            assert!((x - 3.0 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_likelihood_row_is_reported() {
        let mut b = crate::circuit::CircuitBuilder::new(vec![2]);
        let a = b.input(0, &[1.0, 0.0]);
        let r = b.sum(vec![a], &[1.0]);
        let c = b.finish(r).unwrap();
        let d = Dataset::from_rows(vec![2], &[[0u32], [0], [1], [1]]).unwrap();
        assert!(matches!(aggregate_flows(&c, &d), Err(Error::ZeroLikelihood { row: 2 })));
    }

    #[test]
    fn edge_csv_lists_every_edge() {
        let c = example_circuit();
        let f = sample_flow(&c, &EXAMPLE_SAMPLE).unwrap();
        let mut buf = Vec::new();
        f.write_edge_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + c.num_edges());
        assert!(text.starts_with("parent,child,flow\n10,8,"));
    }
}
