#![no_main]

use cra_core::softerror::Workload;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&width, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let width = usize::from(width % 32);
    if let Ok(Workload::Vectors(v)) = Workload::parse(text, width) {
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.len() == width));
    }
});
