#![no_main]

use cra_core::softerror::{exhaustive_derating, Netlist};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(netlist) = Netlist::parse(text) else {
        return;
    };
    let zeros = vec![false; netlist.num_inputs()];
    let outputs = netlist.evaluate(&zeros).expect("width matches");
    assert_eq!(outputs.len(), netlist.output_names().len());
    if netlist.num_inputs() <= 10 {
        for name in netlist.net_names().iter().take(4) {
            let r = exhaustive_derating(&netlist, name).expect("known net");
            assert!((0.0..=1.0).contains(&r.derating));
        }
    }
});
