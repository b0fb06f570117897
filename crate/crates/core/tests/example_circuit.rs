//! Properties of the four-variable worked example and of trained circuits.

use circuitflow::circuit::fixtures::example_circuit;
use circuitflow::io::{bin_of, param_histogram, parse_circuit_text, write_circuit_text};
use circuitflow::prune::{prune, PruneHeuristic};
use circuitflow::sampler::sample_batch;
use circuitflow::structures::{build_hclt, planted_circuit, HcltConfig, PlantedConfig};
use circuitflow::train::{em_stochastic, EmConfig, ScheduleSegment};
use circuitflow::{aggregate_flows, Circuit, RngSeed};

fn table(c: &Circuit) -> Vec<f64> {
    (0..16u32).map(|s| c.evaluate(&[s >> 3 & 1, s >> 2 & 1, s >> 1 & 1, s & 1][..]).unwrap().root_prob()).collect()
}

#[test]
fn text_round_trip_preserves_the_joint_table() {
    let c = example_circuit();
    let mut text = Vec::new();
    write_circuit_text(&c, &mut text).unwrap();
    let back = parse_circuit_text(std::str::from_utf8(&text).unwrap()).unwrap();
    let (a, b) = (table(&c), table(&back));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
    }
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

/// Fraction of sum parameters below 0.05.
fn small_share(c: &Circuit) -> f64 {
    let h = param_histogram(c, 20).unwrap();
    assert_eq!(bin_of(0.049, 20), 0);
    h.counts[0] as f64 / h.total() as f64
}

#[test]
fn heavy_flow_pruning_removes_small_parameters() {
    let seed = RngSeed(31);
    let truth = planted_circuit(&PlantedConfig {
        num_vars: 10,
        cardinality: 3,
        hidden_states: 6,
        children_per_sum: 2,
        leaf_concentration: 0.5,
        seed: seed.derive(0),
    })
    .unwrap();
    let train = sample_batch(&truth, 2000, seed.derive(1));
    let init =
        build_hclt(&train, &HcltConfig { hidden_states: 8, seed: seed.derive(2), ..HcltConfig::default() }).unwrap();
    let cfg = EmConfig {
        batch_size: 500,
        smoothing: 0.01,
        schedule: vec![ScheduleSegment::new(1.0, 0.1, 20)],
        seed: seed.derive(3),
    };
    let (model, _) = em_stochastic(&init, &train, &cfg).unwrap();
    let flows = aggregate_flows(&model, &train).unwrap();
    let (pruned, _) = prune(&model, &PruneHeuristic::Flow(flows), 0.8).unwrap();
    let (before, after) = (small_share(&model), small_share(&pruned));
    assert!(after < before, "share below 0.05: {before:.3} -> {after:.3}");
}
