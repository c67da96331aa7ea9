mod common;

use common::*;
use obs_impact::geograph::NodeKind;
use obs_impact::synthdata::{
    dataset_to_string, gen_fields, generate, load_dataset, parse_dataset, save_dataset, ObsCounts,
    Split,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn text_format_round_trips(seed in any::<u64>(), per_kind in 0usize..5, steps in 1i64..3) {
        let spec = obs_impact::synthdata::FieldSpec { seed, ..small_spec() };
        let times: Vec<i64> = (1..=steps).collect();
        let d = generate(&spec, times, &ObsCounts::uniform(per_kind), Split::Test, 100).unwrap();
        let text = dataset_to_string(&d);
        prop_assert_eq!(parse_dataset(&text).unwrap(), d);
    }
}

#[test]
fn files_round_trip_and_labels_follow_the_field() {
    let spec = small_spec();
    let d = generate(&spec, [4, 5], &ObsCounts::uniform(3), Split::Train, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    save_dataset(&path, &d).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, d);

    for step in &back.steps {
        let now = gen_fields(&spec, step.time);
        for (node, label) in step.nwp.iter().zip(&step.labels) {
            let p = node.location;
            let want = now.values(NodeKind::Nwp.variables(), p);
            assert_eq!(label.to_vec(), want);
        }
        assert_eq!(step.observations.len(), 33);
    }
    assert!(load_dataset(dir.path().join("absent.csv")).is_err());
}
