use cheeger_lab::{
    check_weight_comparison, dinkelbach_cheeger, CheegerOptions, DomainSpec, ScalarField, SetMask,
    Stencil, SweepOptions, VectorField, WeightSource, WeightedDomain,
};
use proptest::prelude::*;

fn domain_with(nx: usize, ny: usize, a: Vec<f64>, b: Vec<f64>, stencil: Stencil) -> WeightedDomain {
    let spec = if ny == 1 {
        DomainSpec::interval(nx, 1.0 / nx as f64)
    } else {
        DomainSpec::grid(nx, ny, 1.0 / nx as f64)
    };
    spec.with_a(WeightSource::Grid(a))
        .with_b(WeightSource::Grid(b))
        .with_stencil(stencil)
        .build()
        .unwrap()
}

fn stencil() -> impl Strategy<Value = Stencil> {
    prop_oneof![Just(Stencil::L1), Just(Stencil::CroftonC8)]
}

/// Grid shape with positive weights and a field of matching length.
fn setup() -> impl Strategy<Value = (WeightedDomain, Vec<f64>)> {
    (1usize..8, 1usize..8, stencil()).prop_flat_map(|(nx, ny, st)| {
        let n = nx * ny;
        (
            prop::collection::vec(0.1f64..5.0, n),
            prop::collection::vec(0.1f64..5.0, n),
            prop::collection::vec(0.0f64..3.0, n),
        )
            .prop_map(move |(a, b, u)| (domain_with(nx, ny, a, b, st), u))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_divergence_are_adjoint((d, u) in setup(), seed in 0u64..1000) {
        let z = VectorField {
            values: (0..d.faces().len()).map(|i| ((i as u64 * 7919 + seed) % 13) as f64 - 6.0).collect(),
        };
        let g = d.gradient(&ScalarField { values: u.clone() }).unwrap();
        let div = d.divergence(&z).unwrap();
        let lhs: f64 = g.values.iter().zip(&z.values).map(|(a, b)| a * b).sum();
        let rhs: f64 = -u.iter().zip(&div.values).map(|(a, b)| a * b).sum::<f64>();
        let scale: f64 = g.values.iter().zip(&z.values).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn coarea_identity((d, u) in setup()) {
        let u = ScalarField { values: u };
        let tv = d.weighted_tv(&u).unwrap();
        let sum: f64 = d
            .coarea_decompose(&u)
            .unwrap()
            .iter()
            .map(|l| l.dt * d.weighted_perimeter(&l.set).unwrap())
            .sum();
        prop_assert!((tv - sum).abs() <= 1e-10 * tv.max(1e-300));
    }

    #[test]
    fn tv_is_positively_homogeneous((d, u) in setup(), c in 0.01f64..100.0) {
        let u = ScalarField { values: u };
        let tv = d.weighted_tv(&u).unwrap();
        let scaled = d.weighted_tv(&u.scaled(c)).unwrap();
        prop_assert!((scaled - c * tv).abs() <= 1e-12 * (c * tv).max(1e-300));
    }

    #[test]
    fn cheeger_constant_scales_with_weights((d, _) in setup()) {
        let opts = CheegerOptions::default();
        let h = dinkelbach_cheeger(&d, &opts).unwrap().h;
        let a2: Vec<f64> = d.a().iter().map(|x| 2.0 * x).collect();
        let b2: Vec<f64> = d.b().iter().map(|x| 2.0 * x).collect();
        let ha = dinkelbach_cheeger(&d.with_weights(a2, d.b().to_vec(), None).unwrap(), &opts).unwrap().h;
        let hb = dinkelbach_cheeger(&d.with_weights(d.a().to_vec(), b2, None).unwrap(), &opts).unwrap().h;
        prop_assert!((ha - 2.0 * h).abs() <= 1e-12 * h);
        prop_assert!((hb - 0.5 * h).abs() <= 1e-12 * h);
    }

    #[test]
    fn perimeter_is_monotone_in_a((d, bumps) in setup(), mask in prop::collection::vec(any::<bool>(), 64)) {
        let a2: Vec<f64> = d.a().iter().zip(&bumps).map(|(a, e)| a + e).collect();
        let d2 = d.with_weights(a2, d.b().to_vec(), None).unwrap();
        let set = SetMask { cells: mask[..d.num_cells()].to_vec() };
        prop_assert!(d.weighted_perimeter(&set).unwrap() <= d2.weighted_perimeter(&set).unwrap());
        let opts = CheegerOptions::default();
        prop_assert!(dinkelbach_cheeger(&d, &opts).unwrap().h <= dinkelbach_cheeger(&d2, &opts).unwrap().h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eigenvalue_is_monotone_in_a((d, bumps) in setup(), p in 1.2f64..2.0) {
        let a2: Vec<f64> = d.a().iter().zip(&bumps).map(|(a, e)| a + e).collect();
        let d2 = d.with_weights(a2, d.b().to_vec(), None).unwrap();
        let v = check_weight_comparison(&d, &d2, p, &SweepOptions::default()).unwrap();
        prop_assert!(v.passed(), "{:?}", v);
    }
}
