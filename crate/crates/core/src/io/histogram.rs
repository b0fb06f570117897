//! Histogram of sum-edge parameters over equal-width bins on `[0, 1]`.

use std::io::Write;

use crate::circuit::Circuit;
use crate::error::{Error, Result};

/// Values this close below a bin edge count toward the upper bin, so that
/// `0.2` lands in `[0.2, 0.3)` despite rounding.
const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        let n = self.bins() as f64;
        (i as f64 / n, (i + 1) as f64 / n)
    }

    /// CSV with header `bin_start,bin_end,count,fraction`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_start,bin_end,count,fraction")?;
        let total = self.total().max(1) as f64;
        for (i, &c) in self.counts.iter().enumerate() {
            let (a, b) = self.bin_range(i);
            writeln!(w, "{a},{b},{c},{}", c as f64 / total)?;
        }
        Ok(())
    }
}

pub fn bin_of(value: f64, bins: usize) -> usize {
    let x = value * bins as f64;
    let snapped = (x + EDGE_SNAP * bins as f64).floor();
    (snapped.max(0.0) as usize).min(bins - 1)
}

/// Counts every sum-edge parameter of `circuit` into `bins` bins.
pub fn param_histogram(circuit: &Circuit, bins: usize) -> Result<Histogram> {
    if bins < 1 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0; bins];
    for p in circuit.edge_params() {
        counts[bin_of(p, bins)] += 1;
    }
    Ok(Histogram { counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::fixtures::example_circuit;

    #[test]
    fn edges_go_up() {
        let got: Vec<usize> = [0.1, 0.2, 0.4, 0.6, 0.8, 0.9].iter().map(|&p| bin_of(p, 10)).collect();
        assert_eq!(got, vec![1, 2, 4, 6, 8, 9]);
        assert_eq!(bin_of(1.0, 10), 9);
        assert_eq!(bin_of(0.0, 10), 0);
        assert_eq!(bin_of(0.5, 2), 1);
    }

    #[test]
    fn counts_every_edge() {
        let c = example_circuit();
        let h = param_histogram(&c, 10).unwrap();
        assert_eq!(h.total(), c.num_edges());
        assert!(param_histogram(&c, 0).is_err());
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("bin_start,bin_end,count,fraction\n0,0.1,"));
    }
}
