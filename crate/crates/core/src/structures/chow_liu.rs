use std::io::Write;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Pairwise mutual information in nats from smoothed joint frequencies.
///
/// Every joint cell gets `smoothing` pseudo-counts; marginals are taken from the
/// smoothed joint, so each estimate is the mutual information of a proper
/// distribution and is non-negative up to rounding.
pub fn estimate_mutual_info(data: &Dataset, smoothing: f64) -> Result<Vec<Vec<f64>>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..).contains(&smoothing) {
        return Err(Error::InvalidArgument(format!("smoothing {smoothing} is negative")));
    }
    let m = data.num_vars();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|&(a, b)| pair_mi(data, a, b, smoothing)).collect();
    let mut mi = vec![vec![0.0; m]; m];
    for (&(a, b), v) in pairs.iter().zip(values) {
        mi[a][b] = v;
        mi[b][a] = v;
    }
    Ok(mi)
}

fn pair_mi(data: &Dataset, a: usize, b: usize, smoothing: f64) -> f64 {
    let ka = data.cardinalities()[a] as usize;
    let kb = data.cardinalities()[b] as usize;
    let mut joint = vec![smoothing; ka * kb];
    for row in data.rows() {
        joint[row[a] as usize * kb + row[b] as usize] += 1.0;
    }
    let total: f64 = joint.iter().sum();
    let mut pa = vec![0.0; ka];
    let mut pb = vec![0.0; kb];
    for i in 0..ka {
        for j in 0..kb {
            let p = joint[i * kb + j] / total;
            pa[i] += p;
            pb[j] += p;
        }
    }
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let p = joint[i * kb + j] / total;
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Copy of `data` with every column of more than `buckets` categories mapped
/// onto `buckets` equal-width category ranges.
pub fn quantize(data: &Dataset, buckets: u32) -> Result<Dataset> {
    if buckets == 0 {
        return Err(Error::InvalidArgument("bucket count must be at least 1".into()));
    }
    let cards: Vec<u32> = data.cardinalities().iter().map(|&k| k.min(buckets)).collect();
    let rows: Vec<Vec<u32>> = data
        .rows()
        .map(|row| {
            row.iter()
                .zip(data.cardinalities())
                .map(|(&v, &k)| if k > buckets { (v as u64 * buckets as u64 / k as u64) as u32 } else { v })
                .collect()
        })
        .collect();
    Dataset::from_rows(cards, &rows).map(|d| d.with_name(data.name()))
}

/// Maximum-weight spanning tree over variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ChowLiuTree {
    /// Undirected edges `(a, b)` with `a < b`, in the order Kruskal accepted them.
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
    pub mutual_info: Vec<Vec<f64>>,
}

impl ChowLiuTree {
    pub fn num_vars(&self) -> usize {
        self.mutual_info.len()
    }

    /// Children of every variable when the tree hangs from `root`, ascending.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let n = self.num_vars();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(v) = stack.pop() {
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !seen[u]).collect();
            next.sort_unstable();
            for &u in &next {
                seen[u] = true;
                stack.push(u);
            }
            children[v] = next;
        }
        children
    }

    /// Parent of every variable, `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.num_vars()];
        for (v, ch) in self.children().iter().enumerate() {
            for &c in ch {
                parent[c] = Some(v);
            }
        }
        parent
    }

    /// One line per edge: `a b mutual_info`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# root {}", self.root)?;
        for &(a, b) in &self.edges {
            writeln!(w, "{a} {b} {:.12e}", self.mutual_info[a][b])?;
        }
        Ok(())
    }
}

/// Kruskal on the mutual-information matrix; equal weights are taken in
/// ascending `(min, max)` index order.
pub fn chow_liu(mutual_info: &[Vec<f64>], root: usize) -> Result<ChowLiuTree> {
    let n = mutual_info.len();
    if n == 0 || mutual_info.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("mutual information matrix must be square and non-empty".into()));
    }
    if root >= n {
        return Err(Error::InvalidArgument(format!("root {root} out of range for {n} variables")));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    candidates.sort_by(|x, y| mutual_info[y.0][y.1].total_cmp(&mutual_info[x.0][x.1]).then(x.cmp(y)));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges = Vec::with_capacity(n - 1);
    for (a, b) in candidates {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            edges.push((a, b));
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(ChowLiuTree { edges, root, mutual_info: mutual_info.to_vec() })
}
