use proptest::collection::vec;
use proptest::prelude::*;

use floatnorm::cascade::{
    extract, new_inverse, Architecture, ConstraintMap, ExtractionRequest, InverseModel, SaturationThresholds,
};
use floatnorm::neural::{Activation, Mlp};
use floatnorm::sampling::{
    denormalize, generate_sample, normalize_floating, normalize_global, registry, RangeConstraint, SamplingOptions,
};
use floatnorm::surrogate::{
    cgg_point, id_point, scale_curve, unscale_curve, CggParams, CurveVector, IdParams, Simulator, Surrogate, I_FLOOR,
};
use floatnorm::{Scheme, Stage};

fn at(stage: Stage, u: &[f64]) -> Vec<f64> {
    registry(stage)
        .iter()
        .zip(u)
        .map(|(s, &t)| s.global_min + t * s.span())
        .collect()
}

fn units(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.0..=1.0f64, n)
}

fn phig() -> impl Strategy<Value = f64> {
    4.2..=4.8f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn denormalize_inverts_normalize(
        idx in 0usize..6, a in 0.0..=1.0f64, b in 0.0..=1.0f64, t in 0.0..=1.0f64,
    ) {
        let spec = &registry(Stage::Cgg)[idx];
        let (lo, hi) = (a.min(b), a.max(b));
        let c = RangeConstraint::new(spec.global_min + lo * spec.span(), spec.global_min + hi * spec.span());
        let x = (c.local_min + t * (c.local_max - c.local_min)).clamp(c.local_min, c.local_max);
        let n = normalize_floating(x, &c, spec.span()).unwrap();
        prop_assert!((0.0..=1.0).contains(&n));
        let back = denormalize(n, &c).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * spec.span());
        prop_assert!(c.local_min <= back && back <= c.local_max);
    }

    #[test]
    fn floating_equals_global_on_global_windows(idx in 0usize..11, t in 0.0..=1.0f64) {
        let spec = &registry(Stage::Id)[idx];
        let x = (spec.global_min + t * spec.span()).min(spec.global_max);
        let c = RangeConstraint::global(spec);
        prop_assert_eq!(normalize_floating(x, &c, spec.span()).unwrap(), normalize_global(x, spec).unwrap());
    }

    #[test]
    fn zero_span_denormalizes_to_constant(idx in 0usize..6, t in 0.0..=1.0f64, n in 0.0..=1.0f64) {
        let spec = &registry(Stage::Cgg)[idx];
        let x = spec.global_min + t * spec.span();
        prop_assert_eq!(denormalize(n, &RangeConstraint::fixed(x)).unwrap(), x);
    }

    #[test]
    fn samples_respect_their_windows(seed in any::<u64>(), index in 0usize..1000, id in any::<bool>(), fixed in any::<bool>()) {
        let stage = if id { Stage::Id } else { Stage::Cgg };
        let scheme = if fixed { Scheme::Fixed } else { Scheme::Custom };
        let s = generate_sample(stage, scheme, seed, index, &Surrogate::new(), &SamplingOptions::default()).unwrap();
        for ((spec, c), (&x, &n)) in registry(stage).iter().zip(&s.ranges).zip(s.params.iter().zip(&s.normalized)) {
            prop_assert!(spec.global_min <= c.local_min && c.local_min <= x && x <= c.local_max && c.local_max <= spec.global_max);
            prop_assert!((0.0..=1.0).contains(&n));
            if fixed {
                prop_assert_eq!(*c, RangeConstraint::global(spec));
            }
        }
    }

    #[test]
    fn curves_positive_and_above_floor(u in units(6), v in units(11), p in phig()) {
        let sim = Surrogate::new();
        let cgg = sim.simulate(Stage::Cgg, &at(Stage::Cgg, &u), None).unwrap();
        prop_assert!(cgg.values.iter().all(|&c| c > 0.0));
        let id = sim.simulate(Stage::Id, &at(Stage::Id, &v), Some(p)).unwrap();
        prop_assert!(id.values.iter().all(|&i| i >= I_FLOOR));
    }

    #[test]
    fn scaling_round_trips(u in units(6), v in units(11), p in phig()) {
        let sim = Surrogate::new();
        for (stage, curve) in [
            (Stage::Cgg, sim.simulate(Stage::Cgg, &at(Stage::Cgg, &u), None).unwrap()),
            (Stage::Id, sim.simulate(Stage::Id, &at(Stage::Id, &v), Some(p)).unwrap()),
        ] {
            let back: CurveVector = unscale_curve(stage, &scale_curve(&curve, stage).unwrap()).unwrap();
            for (a, b) in back.values.iter().zip(&curve.values) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }

    // Monotonicity and DIBL hold where mobility degradation is mild and
    // the current is above the floor; outside that subdomain the fixed
    // formulas admit counterexamples.
    #[test]
    fn id_increases_with_gate_voltage(v in units(11), p in phig(), ua in 0.03..=0.5f64) {
        let mut x = at(Stage::Id, &v);
        x[2] = ua;
        let ip = IdParams::from_slice(&x, p).unwrap();
        for vd in [0.05, 0.7] {
            let ys: Vec<f64> = (0..8).map(|i| id_point(&ip, i as f64 / 10.0, vd)).collect();
            for w in ys.windows(2).filter(|w| w[0] > I_FLOOR) {
                prop_assert!(w[1] > w[0], "{ys:?}");
            }
        }
    }

    #[test]
    fn eta0_never_lowers_saturation_current(v in units(11), p in phig(), ua in 0.03..=0.5f64, d in 0.0..=1.0f64, vg in 0.0..=0.7f64) {
        let mut x = at(Stage::Id, &v);
        x[2] = ua;
        let lo = IdParams::from_slice(&x, p).unwrap();
        x[4] = (x[4] + d * (6.0 - x[4])).min(6.0);
        let hi = IdParams::from_slice(&x, p).unwrap();
        prop_assert!(id_point(&hi, vg, 0.7) >= id_point(&lo, vg, 0.7));
    }

    #[test]
    fn cgg_channel_term_increases_without_quantum_thickening(u in units(6), q in -10.0..=0.0f64) {
        let mut x = at(Stage::Cgg, &u);
        x[3] = q;
        x[5] = 0.0;
        x[1] = 0.0;
        let cp = CggParams::from_slice(&x).unwrap();
        let ys: Vec<f64> = (0..15).map(|i| cgg_point(&cp, (i as f64 - 7.0) / 10.0)).collect();
        for w in ys.windows(2) {
            prop_assert!(w[1] >= w[0], "{ys:?}");
        }
    }

    #[test]
    fn id_derivatives_are_finite(v in units(11), p in phig(), k in 0usize..11, vg in 0.0..=0.7f64) {
        let x = at(Stage::Id, &v);
        let spec = &registry(Stage::Id)[k];
        let h = 1e-6 * spec.span();
        let mut up = x.clone();
        let mut dn = x.clone();
        up[k] = (x[k] + h).min(spec.global_max);
        dn[k] = (x[k] - h).max(spec.global_min);
        let f = |y: &[f64]| id_point(&IdParams::from_slice(y, p).unwrap(), vg, 0.7);
        let d = (f(&up) - f(&dn)) / (up[k] - dn[k]);
        prop_assert!(d.is_finite());
    }

    #[test]
    fn sigmoid_heads_stay_open(seed in any::<u64>(), x in vec(-1e6..1e6f64, 5)) {
        let net = Mlp::<f64>::init(&[5, 7, 3], Activation::Relu, Activation::Sigmoid, seed).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * 1e3).collect();
        for input in [&x, &scaled] {
            for y in net.predict(input).unwrap() {
                prop_assert!(y > 0.0 && y < 1.0);
            }
        }
    }
}

fn windows(stage: Stage) -> impl Strategy<Value = ConstraintMap> {
    let n = registry(stage).len();
    (vec((0.0..=1.0f64, 0.0..=1.0f64, any::<bool>()), n)).prop_map(move |w| {
        registry(stage)
            .iter()
            .zip(w)
            .map(|(s, (a, b, fixed))| {
                let lo = s.global_min + a.min(b) * s.span();
                let hi = if fixed {
                    lo
                } else {
                    (s.global_min + a.max(b) * s.span()).min(s.global_max)
                };
                (s.name.to_string(), [lo, hi])
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extraction_lands_inside_constraints(c in windows(Stage::Cgg), u in units(6), seed in 0u64..8) {
        let arch = Architecture { hidden_layers: 2, width: 16, init_seed: seed };
        let model = InverseModel::new(new_inverse(Stage::Cgg, Scheme::Custom, &arch).unwrap()).unwrap();
        let sim = Surrogate::new();
        let curve = sim.simulate(Stage::Cgg, &at(Stage::Cgg, &u), None).unwrap().values;
        let req = ExtractionRequest { stage: Stage::Cgg, curve, constraints: c.clone(), fixed_phig: None };
        let th = SaturationThresholds::default();
        let r = extract(&req, &model, &sim, &th).unwrap();
        for (name, [lo, hi]) in &c {
            let x = r.params[name];
            prop_assert!(*lo <= x && x <= *hi, "{name}: {x} not in [{lo}, {hi}]");
            if lo == hi {
                prop_assert_eq!(x, *lo);
            }
        }
        prop_assert_eq!(extract(&req, &model, &sim, &th).unwrap(), r);
    }
}
