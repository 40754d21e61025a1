use epiwalk_core::analysis::{check_bounds, outcome_metrics, BoundKind};
use epiwalk_core::engine::{run, MeanFlow};
use epiwalk_core::netgen::{generate_graph, load_graph, save_graph};
use epiwalk_core::sweep::{select_seed_node, Scenario};
use epiwalk_core::weights::{assign_baseline_weights, inject_heterogeneity, node_metrics, plan_difference_multiset};
use epiwalk_core::{GraphParams, HeterogeneitySpec, SimRng, StopPolicy, WeightPolicy};
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn generate_perturb_run_analyze() {
    let params = GraphParams::calibrated(400, 0.18, 0.5, 20.0, 0.3, 21).unwrap();
    let g = assign_baseline_weights(&generate_graph(&params).unwrap(), &WeightPolicy::uniform(0.03)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    save_graph(&g, &path).unwrap();
    let g = load_graph(&path).unwrap();

    let seed = select_seed_node(&g, Scenario::SmallWorld, 20).unwrap();
    let plan = plan_difference_multiset(seed.degree, 0.4, 0.65, 0.01, 8).unwrap();
    let spec = HeterogeneitySpec { node: seed.node, bin_width: 0.01, differences: plan.differences };
    let perturbed = inject_heterogeneity(&g, &spec).unwrap();
    let m = node_metrics(&perturbed, seed.node, 0.01).unwrap();
    assert!((m.d_value - 0.4).abs() <= 0.01 + 1e-12, "D = {}", m.d_value);
    assert!((m.entropy - 0.65).abs() <= 0.1, "S = {}", m.entropy);

    let rec = run(&perturbed, seed.node, 60, &mut SimRng::seed_from_u64(1), StopPolicy::FullHorizon).unwrap();
    let out = outcome_metrics(&rec, &perturbed, 0.1).unwrap();
    assert!(out.pr >= 1.0 / 400.0 && out.pr <= 1.0);
    assert_eq!(out.outbreak, out.pr > 0.1);

    let report = check_bounds(&rec, &perturbed).unwrap();
    assert_eq!(report.violation_count(BoundKind::StepChange), 0);
    assert_eq!(report.violation_count(BoundKind::TraceFloor), 0);
    assert_eq!(report.violation_count(BoundKind::SusceptibleLoss), 0);

    // the mean-flow closed form on the observed trace stays normalized
    let flow = MeanFlow::new(&perturbed, 60).unwrap();
    let eta = flow.closed_form(rec.trace.cumulative()).unwrap();
    assert!((eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_file_round_trips(n in 2usize..60, seed in any::<u64>(), w in 0.0f64..=1.0) {
        let params = GraphParams { n_nodes: n, short_radius: 0.3, p_short: 0.5, long_radius: 0.7, p_long: 0.2, seed };
        let g = assign_baseline_weights(&generate_graph(&params).unwrap(), &WeightPolicy { w_short: w, w_long: 1.0 - w }).unwrap();
        let text = epiwalk_core::netgen::to_json_string(&g);
        let back = epiwalk_core::netgen::from_json_str(&text).unwrap();
        prop_assert_eq!(epiwalk_core::netgen::to_json_string(&back), text);
        prop_assert_eq!(back.fingerprint(), g.fingerprint());
    }
}
