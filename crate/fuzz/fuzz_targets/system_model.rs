#![no_main]

use cra_core::model::{check_measure_compatibility, parse_system};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(model) = parse_system(text, Default::default()) else {
        return;
    };
    let first = check_measure_compatibility(&model);
    let again =
        parse_system(&model.to_document(), Default::default()).expect("re-serialized model parses");
    assert_eq!(model, again);
    assert_eq!(first, check_measure_compatibility(&again));
});
