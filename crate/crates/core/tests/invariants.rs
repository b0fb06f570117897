//! Property tests over random circuits: every operator keeps circuits valid
//! and normalized, and every format round-trips.

use circuitflow::grow::{grow, GrowConfig};
use circuitflow::io::{
    circuit_from_bytes, circuit_to_bytes, dataset_from_bytes, dataset_to_bytes, param_histogram, parse_circuit_text,
    read_csv, write_circuit_text, write_csv,
};
use circuitflow::prune::{prune, PruneHeuristic};
use circuitflow::sampler::sample_batch;
use circuitflow::structures::{random_circuit, RandomCircuitConfig};
use circuitflow::train::{em_stochastic, EmConfig, ScheduleSegment};
use circuitflow::{aggregate_flows, Circuit, RngSeed};
use proptest::prelude::*;

fn circuit(seed: u64, vars: usize) -> Circuit {
    let cfg =
        RandomCircuitConfig { num_vars: vars, max_cardinality: 3, max_sum_children: 3, max_edges: 40, reuse_prob: 0.3 };
    random_circuit(&cfg, &mut RngSeed(seed).stream(0))
}

/// Every joint state of the circuit's variables.
fn domain(c: &Circuit) -> Vec<Vec<u32>> {
    let mut states = vec![vec![]];
    for &k in c.cardinalities() {
        states = states.into_iter().flat_map(|s| (0..k).map(move |v| [s.clone(), vec![v]].concat())).collect();
    }
    states
}

fn total_mass(c: &Circuit) -> f64 {
    domain(c).iter().map(|x| c.evaluate(x.as_slice()).unwrap().root_prob()).sum()
}

fn assert_valid(c: &Circuit) {
    let v = c.validate();
    assert!(v.is_empty(), "{v:?}");
    let mass = total_mass(c);
    assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
}

fn heuristic(c: &Circuit, which: u8, seed: u64) -> PruneHeuristic {
    match which {
        0 => PruneHeuristic::Random(RngSeed(seed)),
        1 => PruneHeuristic::Param,
        _ => PruneHeuristic::Flow(aggregate_flows(c, &sample_batch(c, 50, RngSeed(seed))).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prune_keeps_circuits_valid(seed in any::<u64>(), vars in 1usize..=5, which in 0u8..3, k in 0.05f64..0.95) {
        let c = circuit(seed, vars);
        let (p, report) = prune(&c, &heuristic(&c, which, seed), k).unwrap();
        assert_valid(&p);
        prop_assert_eq!(report.edges_after, p.num_edges());
        prop_assert!(p.num_edges() <= c.num_edges());
        prop_assert!(report.edges_before - report.edges_after <= report.budget);
    }

    #[test]
    fn grow_keeps_circuits_valid(seed in any::<u64>(), vars in 1usize..=4, sigma2 in 0.0f64..1.0) {
        let c = circuit(seed, vars);
        let g = grow(&c, &GrowConfig { sigma2, seed: RngSeed(seed ^ 1) }).unwrap();
        assert_valid(&g);
        prop_assert!(g.num_edges() >= c.num_edges());
    }

    #[test]
    fn em_keeps_circuits_valid(seed in any::<u64>(), vars in 1usize..=5, batch in 1usize..40, smoothing in 0.0f64..1.0) {
        let c = circuit(seed, vars);
        let data = sample_batch(&c, 40, RngSeed(seed ^ 2));
        let cfg = EmConfig { batch_size: batch, smoothing, schedule: vec![ScheduleSegment::new(1.0, 0.2, 2)], seed: RngSeed(seed ^ 3) };
        let (fit, log) = em_stochastic(&c, &data, &cfg).unwrap();
        assert_valid(&fit);
        prop_assert_eq!(log.records.len(), 3);
        prop_assert!(log.records.iter().all(|r| r.train_ll.is_finite()));
    }

    #[test]
    fn circuit_formats_round_trip(seed in any::<u64>(), vars in 1usize..=6) {
        let c = circuit(seed, vars);
        let mut text = Vec::new();
        write_circuit_text(&c, &mut text).unwrap();
        prop_assert_eq!(&parse_circuit_text(std::str::from_utf8(&text).unwrap()).unwrap(), &c);
        let bytes = circuit_to_bytes(&c);
        prop_assert_eq!(&circuit_from_bytes(&bytes).unwrap(), &c);
    }

    #[test]
    fn dataset_formats_round_trip(seed in any::<u64>(), vars in 1usize..=6, rows in 0usize..30) {
        let c = circuit(seed, vars);
        let data = sample_batch(&c, rows, RngSeed(seed ^ 4));
        let mut csv = Vec::new();
        write_csv(&data, &mut csv).unwrap();
        prop_assert_eq!(&read_csv(csv.as_slice(), None).unwrap(), &data);
        prop_assert_eq!(&dataset_from_bytes(&dataset_to_bytes(&data)).unwrap(), &data);
    }

    #[test]
    fn histogram_counts_every_edge(seed in any::<u64>(), vars in 1usize..=6, bins in 1usize..50) {
        let c = circuit(seed, vars);
        let h = param_histogram(&c, bins).unwrap();
        prop_assert_eq!(h.bins(), bins);
        prop_assert_eq!(h.total(), c.num_edges());
    }
}
