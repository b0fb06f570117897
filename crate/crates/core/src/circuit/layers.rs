use super::{Circuit, UnitId};
use crate::error::{Error, Result};

/// Groups of units that only depend on earlier groups.
///
/// A unit's layer is one more than the deepest of its children; inputs form layer 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPlan {
    layers: Vec<Vec<UnitId>>,
}

impl LayerPlan {
    pub fn build(circuit: &Circuit) -> Result<Self> {
        let units = circuit.units();
        let mut depth = vec![0usize; units.len()];
        let mut max_depth = 0;
        for (i, u) in units.iter().enumerate() {
            let mut d = 0;
            for c in u.children() {
                if c.0 >= i {
                    return Err(Error::Cycle(i));
                }
                d = d.max(depth[c.0] + 1);
            }
            depth[i] = d;
            max_depth = max_depth.max(d);
        }
        let mut layers = vec![Vec::new(); if units.is_empty() { 0 } else { max_depth + 1 }];
        for (i, &d) in depth.iter().enumerate() {
            layers[d].push(UnitId(i));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Vec<UnitId>] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Layer index of every unit.
    pub fn depths(&self, num_units: usize) -> Vec<usize> {
        let mut out = vec![0; num_units];
        for (d, layer) in self.layers.iter().enumerate() {
            for id in layer {
                out[id.0] = d;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::fixtures::{example_circuit, ExampleIds};
    use crate::circuit::CircuitBuilder;

    #[test]
    fn example_has_five_layers() {
        let c = example_circuit();
        let ids = ExampleIds::default();
        let plan = c.layers();
        assert_eq!(plan.num_layers(), 5);
        assert_eq!(plan.layers()[0], (0..8).map(UnitId).collect::<Vec<_>>());
        assert_eq!(plan.layers()[1], vec![ids.p21, ids.p22]);
        assert_eq!(plan.layers()[2], vec![ids.s21, ids.s22]);
        assert_eq!(plan.layers()[3], vec![ids.p11, ids.p12]);
        assert_eq!(plan.layers()[4], vec![ids.root]);
    }

    #[test]
    fn single_input_and_chain() {
        let mut b = CircuitBuilder::new(vec![2]);
        let a = b.bernoulli(0, 0.5);
        let c = b.clone().finish_unchecked(a).unwrap();
        assert_eq!(c.layers().layers(), &[vec![UnitId(0)]]);

        let p = b.product(vec![a]);
        let s = b.sum(vec![p], &[1.0]);
        let c = b.finish(s).unwrap();
        assert_eq!(c.layers().layers(), &[vec![UnitId(0)], vec![UnitId(1)], vec![UnitId(2)]]);
    }

    #[test]
    fn every_unit_above_its_children() {
        let c = example_circuit();
        let depth = c.layers().depths(c.len());
        for (i, u) in c.units().iter().enumerate() {
            assert!(u.children().iter().all(|ch| depth[ch.0] < depth[i]));
        }
        let mut all: Vec<_> = c.layers().layers().concat();
        all.sort();
        assert_eq!(all, (0..c.len()).map(UnitId).collect::<Vec<_>>());
    }
}
