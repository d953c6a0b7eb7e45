#![no_main]

use cra_core::thermal::{simulate_temperature, PowerTrace, ThermalParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(trace) = PowerTrace::read_csv("fuzz", data) else {
        return;
    };
    let params = ThermalParams {
        r_th: 1.0,
        c_th: 10.0,
        t_ambient: 300.0,
        t_initial: 300.0,
    };
    let profile = simulate_temperature(&trace, &params).expect("parsed traces are valid");
    assert_eq!(profile.samples.len(), trace.samples.len());
    let mut out = Vec::new();
    trace.write_csv(&mut out).expect("in-memory write");
    let back = PowerTrace::read_csv("fuzz", out.as_slice()).expect("written trace reads back");
    assert_eq!(back.samples, trace.samples);
});
