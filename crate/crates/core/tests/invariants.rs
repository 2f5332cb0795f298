use approx::assert_relative_eq;
use proptest::prelude::*;

use orlicz_ps::affine_ball::{energy, make_quadrature};
use orlicz_ps::harness::config::ExperimentConfig;
use orlicz_ps::harness::corpus::{default_bodies, default_fields};
use orlicz_ps::harness::report::{CaseRecord, Environment, SuiteReport};
use orlicz_ps::luxemburg::{luxemburg_norm, modular, WeightedSampleSet};
use orlicz_ps::orlicz::OrliczFunction;
use orlicz_ps::rearrangement::{sdr, steiner};
use orlicz_ps::scalar_field::{decode_field, encode_field, Grid, ScalarField};
use orlicz_ps::star_projection::StarBody;

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3..40).prop_filter("not all zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn phi() -> impl Strategy<Value = OrliczFunction> {
    prop_oneof![
        (1.1f64..4.0).prop_map(|p| OrliczFunction::power(p).unwrap()),
        (1.1f64..4.0, 0.0f64..0.9).prop_map(|(p, l)| OrliczFunction::asymmetric_power(p, l).unwrap()),
        Just(OrliczFunction::exponential()),
    ]
}

fn bump(c: f64) -> ScalarField {
    let grid = Grid::cube(2, 1.5, 40).unwrap();
    ScalarField::sample(grid, |x| {
        let r2 = (x[0] - 0.1).powi(2) / 0.7 + (x[1] + 0.1).powi(2) / 0.4;
        c * (1.0 - r2).max(0.0).powi(2)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modular_is_one_at_the_norm(s in samples(), phi in phi()) {
        let set = WeightedSampleSet::uniform(s, 0.25).unwrap();
        if let Ok(norm) = luxemburg_norm(&set, &phi) {
            prop_assert!((modular(&set, &phi, norm) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn norm_is_positively_homogeneous(s in samples(), phi in phi(), c in 0.1f64..10.0) {
        let set = WeightedSampleSet::uniform(s, 0.25).unwrap();
        if let (Ok(a), Ok(b)) = (luxemburg_norm(&set, &phi), luxemburg_norm(&set.scaled(c), &phi)) {
            prop_assert!((b - c * a).abs() <= 1e-8 * c * a);
        }
    }

    #[test]
    fn gauge_satisfies_euler(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU, t in 0.1f64..5.0) {
        let k = StarBody::random_star(256, 0.3, seed).unwrap();
        let x = [t * theta.cos(), t * theta.sin()];
        let g = k.gauge(&x).unwrap();
        let grad = k.gauge_gradient(&x).unwrap();
        prop_assert!((grad[0] * x[0] + grad[1] * x[1] - g).abs() < 1e-8 * g.max(1.0));
    }

    #[test]
    fn field_encoding_round_trips(mut values in prop::collection::vec(0.0f64..10.0, 16 * 17)) {
        let grid = Grid::new(vec![-1.0, -2.0], vec![1.0, 0.5], vec![16, 17]).unwrap();
        for (i, v) in values.iter_mut().enumerate() {
            if grid.in_band(&grid.unravel(i)) {
                *v = 0.0;
            }
        }
        let f = ScalarField::new(grid, values).unwrap();
        prop_assert_eq!(decode_field(&encode_field(&f)).unwrap(), f);
    }

    #[test]
    fn report_json_round_trips(margins in prop::collection::vec(-1.0f64..1.0, 0..8), seed in any::<u64>()) {
        let env = Environment {
            package_version: "0.1.0".into(),
            os: "linux".into(),
            arch: "x86_64".into(),
            dim: 2,
            resolution: 64,
            quadrature_count: 128,
            seed,
            config_fingerprint: "0".into(),
        };
        let mut r = SuiteReport::new("petty", env);
        for (i, m) in margins.iter().enumerate() {
            let mut c = CaseRecord::new(format!("case/{i}")).input("seed", seed);
            c.quantity("ratio", 1.0 + m).assert_margin(*m);
            r.push(c);
        }
        prop_assert_eq!(SuiteReport::from_json(&r.to_json().unwrap()).unwrap(), r.clone());
        prop_assert_eq!(r.summary.failed, margins.iter().filter(|m| **m < 0.0).count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn energy_is_homogeneous_of_degree_one(c in 0.2f64..5.0) {
        let phi = OrliczFunction::power(2.0).unwrap();
        let q = make_quadrature(2, 64).unwrap();
        let e1 = energy(&bump(1.0), &phi, &q).unwrap();
        let ec = energy(&bump(c), &phi, &q).unwrap();
        prop_assert!((ec - c * e1).abs() < 1e-8 * c * e1);
    }

    #[test]
    fn symmetrizations_preserve_the_integral(angle in 0.0f64..std::f64::consts::PI) {
        let f = bump(1.0);
        let g = steiner(&f, &[angle.cos(), angle.sin()]).unwrap();
        prop_assert!((g.integral() - f.integral()).abs() < 0.03 * f.integral());
        let s = sdr(&f);
        prop_assert!((s.integral() - f.integral()).abs() < 1e-12 * f.integral());
        prop_assert!(s.max() <= f.max());
    }
}

#[test]
fn generators_are_deterministic() {
    let grid = Grid::cube(2, 1.5, 32).unwrap();
    for nf in default_fields() {
        let a = nf.generator.generate(&grid).unwrap();
        let b = nf.generator.generate(&grid).unwrap();
        assert_eq!(a, b, "{}", nf.name);
        assert!(a.max() > 0.0, "{}", nf.name);
    }
    for nb in default_bodies() {
        let a = nb.generator.generate(128).unwrap();
        let b = nb.generator.generate(128).unwrap();
        assert_eq!(a.radial(), b.radial(), "{}", nb.name);
    }
}

#[test]
fn disk_energy_is_rotation_invariant() {
    let phi = OrliczFunction::power(3.0).unwrap();
    let q = make_quadrature(2, 128).unwrap();
    let grid = Grid::cube(2, 1.5, 64).unwrap();
    let f = ScalarField::sample(grid, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0)).unwrap();
    let g = steiner(&f, &[0.6, 0.8]).unwrap();
    assert_relative_eq!(energy(&f, &phi, &q).unwrap(), energy(&g, &phi, &q).unwrap(), max_relative = 0.02);
}

#[test]
fn default_config_validates() {
    ExperimentConfig::default().validate().unwrap();
}
