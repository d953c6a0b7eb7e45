use std::collections::BTreeMap;

use proptest::prelude::*;

use cra_core::aging::{black_mttf, failure_rate_from_profile, weibull_from_mttf, AgingParams};
use cra_core::composition::{
    apply_adapter, combine_competing_risks, Adapter, AdapterContext, Measure, TimeUnit,
};
use cra_core::reliability::ReliabilityFunction;
use cra_core::softerror::{exhaustive_derating, inject_campaign, Netlist, Workload};
use cra_core::systemlevel::{
    brute_force_probability, system_reliability_curves, tree_probability, uniform_grid,
    ComponentFunctions, Gate, SuccessTree,
};
use cra_core::thermal::{simulate_temperature, PowerTrace, ThermalParams};

const EVENTS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn reliability() -> impl Strategy<Value = ReliabilityFunction> {
    let leaf = prop_oneof![
        (1e-7f64..1e-1).prop_map(|l| ReliabilityFunction::exponential(l).unwrap()),
        (1f64..1e6, 0.3f64..5.0)
            .prop_map(|(eta, beta)| ReliabilityFunction::weibull(eta, beta).unwrap()),
        prop::collection::vec((1f64..500.0, 0.5f64..1.0), 1..6).prop_map(|steps| {
            let mut times = vec![0.0];
            let mut values = vec![1.0];
            for (dt, keep) in steps {
                times.push(times.last().unwrap() + dt);
                values.push(values.last().unwrap() * keep);
            }
            ReliabilityFunction::sampled(times, values).unwrap()
        }),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop::collection::vec(inner, 1..4).prop_map(|f| ReliabilityFunction::product(f).unwrap())
    })
}

fn grid() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e5, 1..40).prop_map(|mut v| {
        v.push(0.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    })
}

fn gate() -> impl Strategy<Value = Gate> {
    let leaf = prop::sample::select(EVENTS.to_vec()).prop_map(Gate::event);
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Gate::And),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Gate::Or),
            (
                prop::collection::vec(inner, 2..5),
                any::<prop::sample::Index>()
            )
                .prop_map(|(inputs, k)| Gate::KofN {
                    k: 1 + k.index(inputs.len()),
                    inputs,
                }),
        ]
    })
}

fn probs() -> impl Strategy<Value = BTreeMap<String, f64>> {
    prop::collection::vec(0.0f64..=1.0, EVENTS.len())
        .prop_map(|p| EVENTS.iter().map(|e| e.to_string()).zip(p).collect())
}

/// Probability of a gate with one event pinned to a constant, by
/// simplifying the structure first and enumerating the rest.
#[derive(Debug, Clone)]
enum Pinned {
    Const(bool),
    Event(String),
    And(Vec<Pinned>),
    Or(Vec<Pinned>),
    KofN(usize, Vec<Pinned>),
}

fn pin(g: &Gate, event: &str, value: bool) -> Pinned {
    let kids = |v: &[Gate]| v.iter().map(|g| pin(g, event, value)).collect::<Vec<_>>();
    match g {
        Gate::Event(e) if e == event => Pinned::Const(value),
        Gate::Event(e) => Pinned::Event(e.clone()),
        Gate::And(v) => Pinned::And(kids(v)),
        Gate::Or(v) => Pinned::Or(kids(v)),
        Gate::KofN { k, inputs } => Pinned::KofN(*k, kids(inputs)),
    }
}

fn holds(p: &Pinned, up: &dyn Fn(&str) -> bool) -> bool {
    match p {
        Pinned::Const(b) => *b,
        Pinned::Event(e) => up(e),
        Pinned::And(v) => v.iter().all(|x| holds(x, up)),
        Pinned::Or(v) => v.iter().any(|x| holds(x, up)),
        Pinned::KofN(k, v) => v.iter().filter(|x| holds(x, up)).count() >= *k,
    }
}

fn pinned_probability(p: &Pinned, probs: &BTreeMap<String, f64>, skip: &str) -> f64 {
    let free: Vec<&str> = EVENTS.iter().copied().filter(|e| *e != skip).collect();
    let mut total = 0.0;
    for state in 0u32..(1 << free.len()) {
        let up = |e: &str| state >> free.iter().position(|f| *f == e).unwrap() & 1 == 1;
        if holds(p, &up) {
            total += free
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    if state >> i & 1 == 1 {
                        probs[*e]
                    } else {
                        1.0 - probs[*e]
                    }
                })
                .product::<f64>();
        }
    }
    total
}

fn thermal_params() -> impl Strategy<Value = ThermalParams> {
    (0.1f64..10.0, 1f64..500.0, 250f64..350.0, 250f64..400.0).prop_map(
        |(r_th, c_th, t_ambient, t_initial)| ThermalParams {
            r_th,
            c_th,
            t_ambient,
            t_initial,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reliability_starts_at_one_and_never_increases(r in reliability(), g in grid()) {
        prop_assert!((r.eval(0.0).unwrap() - 1.0).abs() <= 1e-12);
        let v: Vec<f64> = g.iter().map(|&t| r.eval(t).unwrap()).collect();
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", w);
        }
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn single_factor_product_is_identity(r in reliability(), g in grid()) {
        let p = ReliabilityFunction::product(vec![r.clone()]).unwrap();
        for &t in &g {
            prop_assert_eq!(p.eval(t).unwrap(), r.eval(t).unwrap());
        }
    }

    #[test]
    fn combination_dominated_by_each_factor(a in reliability(), b in reliability(), g in grid()) {
        let c = combine_competing_risks(a.clone(), b.clone());
        for &t in &g {
            let (x, y, z) = (a.eval(t).unwrap(), b.eval(t).unwrap(), c.eval(t).unwrap());
            prop_assert!(z <= x.min(y) + 1e-12);
        }
    }

    #[test]
    fn combination_order_does_not_matter(a in reliability(), b in reliability(), c in reliability(), g in grid()) {
        let left = combine_competing_risks(combine_competing_risks(a.clone(), b.clone()), c.clone());
        let right = combine_competing_risks(c, combine_competing_risks(b, a));
        for &t in &g {
            let (x, y) = (left.eval(t).unwrap(), right.eval(t).unwrap());
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300), "{} vs {}", x, y);
        }
    }

    #[test]
    fn unit_bridge_round_trip(rate in 1e-12f64..1e3) {
        let ctx = AdapterContext::default();
        let to_h = Adapter::TimeUnitBridge { from: TimeUnit::Seconds, to: TimeUnit::Hours };
        let to_s = Adapter::TimeUnitBridge { from: TimeUnit::Hours, to: TimeUnit::Seconds };
        let m = Measure::failure_rate(rate, TimeUnit::Seconds).unwrap();
        let back = apply_adapter(&to_s, &apply_adapter(&to_h, &m, &ctx).unwrap(), &ctx).unwrap();
        let cra_core::composition::MeasureValue::FailureRate(x) = back.value() else {
            panic!("bridge changed the measure type");
        };
        prop_assert!(((x - rate) / rate).abs() <= 1e-15);
        prop_assert_eq!(back.time_unit(), TimeUnit::Seconds);
    }

    #[test]
    fn tree_matches_brute_force(g in gate(), p in probs()) {
        let t = SuccessTree::new(g).unwrap();
        let exact = tree_probability(&t, &p).unwrap();
        let brute = brute_force_probability(&t, &p).unwrap();
        prop_assert!((exact - brute).abs() <= 1e-12);
    }

    #[test]
    fn tree_is_coherent(g in gate(), p in probs(), which in 0..EVENTS.len(), bump in 0.0f64..1.0) {
        let t = SuccessTree::new(g).unwrap();
        let base = tree_probability(&t, &p).unwrap();
        let mut q = p.clone();
        let e = EVENTS[which].to_string();
        q.insert(e.clone(), p[&e] + (1.0 - p[&e]) * bump);
        prop_assert!(tree_probability(&t, &q).unwrap() >= base - 1e-12);
    }

    #[test]
    fn boundary_probabilities_absorb(g in gate(), p in probs(), which in 0..EVENTS.len()) {
        let t = SuccessTree::new(g.clone()).unwrap();
        let e = EVENTS[which];
        for value in [false, true] {
            let mut q = p.clone();
            q.insert(e.to_string(), if value { 1.0 } else { 0.0 });
            let got = tree_probability(&t, &q).unwrap();
            let want = pinned_probability(&pin(&g, e, value), &p, e);
            prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn system_curves_invariants(
        g in gate(),
        fns in prop::collection::vec((reliability(), reliability()), EVENTS.len()),
        horizon in 1.0f64..1e5,
    ) {
        let tree = SuccessTree::new(g).unwrap();
        let comps: BTreeMap<String, ComponentFunctions> = EVENTS
            .iter()
            .zip(fns)
            .map(|(e, (a, b))| {
                (e.to_string(), ComponentFunctions { r_combined: combine_competing_risks(a.clone(), b.clone()), r_perm: a, r_trans: b })
            })
            .collect();
        let c = system_reliability_curves(&tree, &comps, &uniform_grid(horizon, 32)).unwrap();
        for curve in [&c.r_sys, &c.r_sys_perm, &c.r_sys_trans] {
            prop_assert!((curve[0] - 1.0).abs() <= 1e-12);
            prop_assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        }
        for i in 0..c.grid.len() {
            prop_assert!(c.r_sys[i] <= c.r_sys_perm[i].min(c.r_sys_trans[i]) + 1e-12);
        }
    }

    #[test]
    fn thermal_stays_in_envelope(params in thermal_params(), power in prop::collection::vec(0.0f64..50.0, 1..200), dt in 0.01f64..100.0) {
        let trace = PowerTrace::new("p", dt, power.clone()).unwrap();
        let prof = simulate_temperature(&trace, &params).unwrap();
        prop_assert_eq!(prof.samples.len(), power.len());
        let lo = params.t_initial.min(params.t_ambient);
        let hi = power
            .iter()
            .map(|p| params.t_ambient + params.r_th * p)
            .fold(params.t_initial, f64::max);
        for &t in &prof.samples {
            prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9, "{} not in [{}, {}]", t, lo, hi);
        }
    }

    #[test]
    fn thermal_constant_power_approaches_monotonically(params in thermal_params(), p in 0.0f64..50.0, dt in 0.01f64..100.0) {
        let trace = PowerTrace::new("p", dt, vec![p; 100]).unwrap();
        let prof = simulate_temperature(&trace, &params).unwrap();
        let ss = params.t_ambient + params.r_th * p;
        let mut prev = (params.t_initial - ss).abs();
        for &t in &prof.samples {
            let gap = (t - ss).abs();
            prop_assert!(gap <= prev + 1e-12);
            prev = gap;
        }
    }

    #[test]
    fn thermal_half_step_agrees(params in thermal_params(), power in prop::collection::vec(0.0f64..50.0, 1..100), dt in 0.01f64..100.0) {
        let coarse = simulate_temperature(&PowerTrace::new("p", dt, power.clone()).unwrap(), &params).unwrap();
        let doubled: Vec<f64> = power.iter().flat_map(|&p| [p, p]).collect();
        let fine = simulate_temperature(&PowerTrace::new("p", dt / 2.0, doubled).unwrap(), &params).unwrap();
        for (k, &t) in coarse.samples.iter().enumerate() {
            prop_assert!((t - fine.samples[2 * k + 1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn arrhenius_monotone(
        temps in prop::collection::vec(250.0f64..450.0, 1..20),
        idx in any::<prop::sample::Index>(),
        bump in 0.1f64..20.0,
        n_exp in 0.1f64..3.0,
    ) {
        let params = AgingParams { a_const: 1e9, j_density: 1e5, n_exp, ea_ev: 0.7, weibull_beta: None };
        let profile = |s: Vec<f64>| simulate_temperature(
            &PowerTrace::new("x", 1.0, vec![0.0; s.len()]).unwrap(),
            &ThermalParams { r_th: 1.0, c_th: 1.0, t_ambient: 300.0, t_initial: 300.0 },
        ).map(|mut p| { p.samples = s; p }).unwrap();
        let i = idx.index(temps.len());
        let mut hotter = temps.clone();
        hotter[i] += bump;
        let base = failure_rate_from_profile(&profile(temps.clone()), &params).unwrap();
        let up = failure_rate_from_profile(&profile(hotter), &params).unwrap();
        prop_assert!(up > base);

        let t = temps[0];
        prop_assert!(black_mttf(t + bump, &params).unwrap() < black_mttf(t, &params).unwrap());
        let denser = AgingParams { j_density: params.j_density * 1.5, ..params.clone() };
        prop_assert!(black_mttf(t, &denser).unwrap() < black_mttf(t, &params).unwrap());
    }

    #[test]
    fn weibull_from_mttf_is_a_survival_curve(m in 1e-3f64..1e7, beta in 0.2f64..6.0, g in grid()) {
        let r = weibull_from_mttf(m, beta).unwrap();
        prop_assert_eq!(r.eval(0.0).unwrap(), 1.0);
        let v: Vec<f64> = g.iter().map(|&t| r.eval(t).unwrap()).collect();
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn product_of_exponentials_mttf(rates in prop::collection::vec(1e-6f64..1e-1, 1..5)) {
        let r = ReliabilityFunction::product(rates.iter().map(|&l| ReliabilityFunction::exponential(l).unwrap()).collect()).unwrap();
        let want = 1.0 / rates.iter().sum::<f64>();
        let got = r.mttf().hours().unwrap();
        prop_assert!(((got - want) / want).abs() <= 1e-3, "{} vs {}", got, want);
    }
}

const CIRCUIT: &str = "\
INPUT a
INPUT b
INPUT c
INPUT d
GATE n1 NAND a b
GATE n2 NOR c d
GATE n3 XOR n1 n2
GATE n4 AND n3 a
GATE dead OR n1 d
GATE n5 NOT n4
OUTPUT n5
OUTPUT n2
";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn injection_result_bounds_and_repeatability(node in prop::sample::select(vec!["a", "b", "c", "d", "n1", "n2", "n3", "n4", "dead", "n5"]), trials in 1u64..3000, seed in any::<u64>()) {
        let n = Netlist::parse(CIRCUIT).unwrap();
        let r = inject_campaign(&n, node, trials, seed, &Workload::Uniform).unwrap();
        prop_assert!(r.errors <= r.trials);
        prop_assert!((0.0..=1.0).contains(&r.derating));
        prop_assert_eq!(&r, &inject_campaign(&n, node, trials, seed, &Workload::Uniform).unwrap());
    }

    #[test]
    fn evaluation_is_repeatable(bits in prop::collection::vec(any::<bool>(), 4)) {
        let n = Netlist::parse(CIRCUIT).unwrap();
        let golden = n.evaluate(&bits).unwrap();
        // flip then restore one input: outputs come back bit for bit
        let mut flipped = bits.clone();
        flipped[0] = !flipped[0];
        let _ = n.evaluate(&flipped).unwrap();
        prop_assert_eq!(n.evaluate(&bits).unwrap(), golden);
    }
}

#[test]
fn unobservable_node_has_zero_derating() {
    let n = Netlist::parse(CIRCUIT).unwrap();
    assert_eq!(exhaustive_derating(&n, "dead").unwrap().derating, 0.0);
    let r = inject_campaign(&n, "dead", 5000, 9, &Workload::Uniform).unwrap();
    assert_eq!(r.errors, 0);
}

#[test]
fn half_width_shrinks_like_inverse_sqrt() {
    let n = Netlist::parse(CIRCUIT).unwrap();
    let small = inject_campaign(&n, "n3", 2_500, 1, &Workload::Uniform).unwrap();
    let large = inject_campaign(&n, "n3", 40_000, 1, &Workload::Uniform).unwrap();
    let ratio = small.ci95_half_width / large.ci95_half_width;
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
}
