#![no_main]

use std::collections::BTreeMap;

use cra_core::systemlevel::{brute_force_probability, tree_probability, SuccessTree};
use libfuzzer_sys::fuzz_target;

// Input: a tree document and a probability map separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let mut parts = data.splitn(2, |&b| b == 0);
    let (Some(tree), Some(probs)) = (parts.next(), parts.next()) else {
        return;
    };
    let Ok(tree) = std::str::from_utf8(tree) else {
        return;
    };
    let Ok(tree) = SuccessTree::from_json(tree) else {
        return;
    };
    let Ok(probs) = serde_json::from_slice::<BTreeMap<String, f64>>(probs) else {
        return;
    };
    let Ok(p) = tree_probability(&tree, &probs) else {
        return;
    };
    assert!((-1e-12..=1.0 + 1e-12).contains(&p));
    if tree.events().len() <= 12 {
        let q = brute_force_probability(&tree, &probs).expect("same checks as tree_probability");
        assert!((p - q).abs() <= 1e-9);
    }
});
