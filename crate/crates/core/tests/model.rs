use std::path::{Path, PathBuf};

use proptest::prelude::*;

use cra_core::model::{check_measure_compatibility, load_system, load_system_file, parse_system};
use cra_core::pipeline::{run_pipeline, PipelineOptions};

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/two_unit/system.json")
}

#[test]
fn shipped_example_round_trips() {
    let m = load_system_file(example()).unwrap();
    assert_eq!(m.node_count(), 3);
    assert_eq!(m.success_tree.events(), vec!["PU1", "PU2"]);
    let again = load_system(&m.to_document(), &m.base_dir).unwrap();
    assert_eq!(m, again);
    // and the rewritten document is itself a fixed point
    assert_eq!(m.to_document(), again.to_document());
}

#[test]
fn compatible_chains_run_without_tag_errors() {
    let m = load_system_file(example()).unwrap();
    assert!(check_measure_compatibility(&m).is_empty());
    let out = run_pipeline(
        &m,
        &PipelineOptions {
            injection_trials: 256,
            seed: Some(1),
            ..PipelineOptions::default()
        },
    )
    .unwrap();
    assert_eq!(out.report.components.len(), 2);
}

const CHAINS: [&str; 4] = [
    r#"{"permanent":["PowerToTemperature","TemperatureToFailureRate","FailureRateToReliability"],"transient":["FitToReliability"]}"#,
    r#"{"permanent":["TemperatureToFailureRate","FailureRateToReliability"],"transient":["FitToReliability"]}"#,
    r#"{"permanent":["PowerToTemperature","TemperatureToFailureRate"],"transient":[]}"#,
    r#"{"permanent":["PowerToTemperature",{"kind":"TimeUnitBridge","from":"seconds","to":"hours"},"TemperatureToFailureRate","FailureRateToReliability"],"transient":["FitToReliability","FitToReliability"]}"#,
];

fn document(order: &[usize], chains: &[usize]) -> String {
    let comp = |i: usize| {
        format!(
            r#"{{"id":"c{i}","kind":"Component",
                "thermal":{{"r_th":2,"c_th":5,"t_ambient":300,"t_initial":300}},
                "aging":{{"a_const":1e-6,"j_density":1e6,"n_exp":2,"ea_ev":0.7}},
                "power_trace":"p.csv","netlist":"n.net","ser":{{"default_fit":0}}}}"#
        )
    };
    let kids: Vec<String> = order.iter().map(|&i| comp(i)).collect();
    let adapters: Vec<String> = order
        .iter()
        .map(|&i| format!(r#""c{i}":{}"#, CHAINS[chains[i]]))
        .collect();
    let events: Vec<String> = order
        .iter()
        .map(|&i| format!(r#"{{"event":"c{i}"}}"#))
        .collect();
    format!(
        r#"{{"name":"m","time_horizon_hours":100,"grid_points":8,
            "hierarchy":{{"id":"s","kind":"System","children":[{}]}},
            "adapters":{{{}}},
            "success_tree":{{"gate":"OR","inputs":[{}]}}}}"#,
        kids.join(","),
        adapters.join(","),
        events.join(",")
    )
}

proptest! {
    #[test]
    fn violations_do_not_depend_on_declaration_order(
        chains in prop::collection::vec(0..CHAINS.len(), 5),
        order in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let natural: Vec<usize> = (0..5).collect();
        let a = parse_system(&document(&natural, &chains), PathBuf::new()).unwrap();
        let b = parse_system(&document(&order, &chains), PathBuf::new()).unwrap();
        let va = check_measure_compatibility(&a);
        prop_assert_eq!(&va, &check_measure_compatibility(&b));
        prop_assert_eq!(&va, &check_measure_compatibility(&a));
        let bad = chains.iter().filter(|&&c| c != 0).count();
        let distinct_children: std::collections::BTreeSet<&str> = va.iter().map(|v| v.child.as_str()).collect();
        prop_assert_eq!(distinct_children.len(), bad);
    }
}
