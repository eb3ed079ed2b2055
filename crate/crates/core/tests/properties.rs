//! Property-based checks of the geometric invariants: norm axioms, the
//! perimeter functional, composition laws, and sampler determinism.

use proptest::prelude::*;

use perimap_core::classify::audit_triple;
use perimap_core::geometry::{dist, norm, perimeter, NormSpec, Point, Tolerances, Triple};
use perimap_core::mapping::{
    evaluate, sample_points, DomainSpec, MappingSpec, SampleStrategy, SamplerConfig,
};

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Coordinates on a coarse lattice keep pairwise gaps well above the
/// distinctness threshold.
fn lattice_f64() -> impl Strategy<Value = f64> {
    (-40i32..=40i32).prop_map(|x| f64::from(x) / 4.0)
}

fn point2() -> impl Strategy<Value = Point> {
    proptest::array::uniform2(lattice_f64()).prop_map(|c| Point::new(c.to_vec()).unwrap())
}

fn norm_spec() -> impl Strategy<Value = NormSpec> {
    prop_oneof![
        Just(NormSpec::L1),
        Just(NormSpec::L2),
        Just(NormSpec::Linf),
        (proptest::array::uniform2(1u8..=8), 1u8..=4).prop_map(|(w, p)| NormSpec::WeightedP {
            weights: w.iter().map(|x| f64::from(*x)).collect(),
            p: f64::from(p),
        }),
    ]
}

fn affine2() -> impl Strategy<Value = MappingSpec> {
    (proptest::array::uniform4(lattice_f64()), proptest::array::uniform2(lattice_f64())).prop_map(
        |(m, b)| MappingSpec::Affine {
            matrix: vec![vec![m[0], m[1]], vec![m[2], m[3]]],
            offset: Point::new(b.to_vec()).unwrap(),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn norm_axioms(v in point2(), u in point2(), spec in norm_spec(), c in lattice_f64()) {
        let t = tol();
        let nv = norm(&v, &spec).unwrap();
        prop_assert!(nv >= 0.0);

        // zero iff zero vector
        let zero = Point::new(vec![0.0, 0.0]).unwrap();
        prop_assert!(norm(&zero, &spec).unwrap() <= t.tau_zero);

        // absolute homogeneity
        let cv = Point::new(v.coords().iter().map(|x| c * x).collect()).unwrap();
        let lhs = norm(&cv, &spec).unwrap();
        let rhs = c.abs() * nv;
        prop_assert!((lhs - rhs).abs() <= t.tau_rel * rhs.max(1.0));

        // triangle inequality
        let sum = Point::new(
            u.coords().iter().zip(v.coords()).map(|(a, b)| a + b).collect(),
        ).unwrap();
        let nu = norm(&u, &spec).unwrap();
        prop_assert!(norm(&sum, &spec).unwrap() <= nu + nv + t.tau_abs);

        // distance symmetry
        let duv = dist(&u, &v, &spec).unwrap();
        let dvu = dist(&v, &u, &spec).unwrap();
        prop_assert_eq!(duv.to_bits(), dvu.to_bits());
    }

    #[test]
    fn perimeter_bounds_and_symmetries(
        x in point2(), y in point2(), z in point2(),
        spec in norm_spec(),
        shift in proptest::array::uniform2(lattice_f64()),
        c in lattice_f64(),
    ) {
        let t = tol();
        let Ok(triple) = Triple::new(x.clone(), y.clone(), z.clone(), &spec, &t) else {
            return Ok(()); // degenerate draw
        };
        let p = perimeter(&triple, &spec, &t).unwrap();

        // each side is at most the sum of the other two
        let sides = [
            dist(&x, &y, &spec).unwrap(),
            dist(&y, &z, &spec).unwrap(),
            dist(&z, &x, &spec).unwrap(),
        ];
        let max_side = sides.iter().fold(0.0_f64, |m, s| m.max(*s));
        prop_assert!(p >= 2.0 * max_side - t.tau_abs);

        // permutation invariance is exact by construction
        let permuted = Triple::new(z.clone(), x.clone(), y.clone(), &spec, &t).unwrap();
        prop_assert_eq!(p.to_bits(), perimeter(&permuted, &spec, &t).unwrap().to_bits());

        // translation invariance
        let mv = |q: &Point| Point::new(
            q.coords().iter().zip(&shift).map(|(a, b)| a + b).collect(),
        ).unwrap();
        if let Ok(moved) = Triple::new(mv(&x), mv(&y), mv(&z), &spec, &t) {
            let pm = perimeter(&moved, &spec, &t).unwrap();
            prop_assert!((p - pm).abs() <= 1e-9 * p.max(1.0));
        }

        // absolute homogeneity of the perimeter
        let sc = |q: &Point| Point::new(q.coords().iter().map(|a| c * a).collect()).unwrap();
        if let Ok(scaled) = Triple::new(sc(&x), sc(&y), sc(&z), &spec, &t) {
            let ps = perimeter(&scaled, &spec, &t).unwrap();
            prop_assert!((ps - c.abs() * p).abs() <= t.tau_rel * (c.abs() * p).max(1.0));
        }
    }

    #[test]
    fn affine_commutes_with_convex_combinations(
        map in affine2(), x in point2(), y in point2(), lambda in 0u8..=16,
    ) {
        let t = tol();
        let nm = NormSpec::L1;
        let lambda = f64::from(lambda) / 16.0;
        let mix = Point::new(
            x.coords().iter().zip(y.coords()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
        ).unwrap();
        let t_mix = evaluate(&map, &mix, &nm, &t).unwrap();
        let tx = evaluate(&map, &x, &nm, &t).unwrap();
        let ty = evaluate(&map, &y, &nm, &t).unwrap();
        for i in 0..2 {
            let expected = lambda * tx.coords()[i] + (1.0 - lambda) * ty.coords()[i];
            prop_assert!((t_mix.coords()[i] - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn composed_maps_evaluate_pointwise(
        map in affine2(), x in point2(), x0 in point2(), w in 0u8..=16,
    ) {
        let t = tol();
        let nm = NormSpec::L1;
        let w = f64::from(w) / 16.0;
        let tx = evaluate(&map, &x, &nm, &t).unwrap();

        let scaled = MappingSpec::Scaled { factor: w, inner: Box::new(map.clone()) };
        let sx = evaluate(&scaled, &x, &nm, &t).unwrap();
        for i in 0..2 {
            let expected = w * tx.coords()[i];
            prop_assert!((sx.coords()[i] - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }

        let anchored = MappingSpec::Anchored {
            anchor: x0.clone(),
            weight: w,
            inner: Box::new(map.clone()),
        };
        let ax = evaluate(&anchored, &x, &nm, &t).unwrap();
        for i in 0..2 {
            let expected = (1.0 - w) * x0.coords()[i] + w * tx.coords()[i];
            prop_assert!((ax.coords()[i] - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    /// Damping a map by `c` scales every triple ratio by exactly `c` (up to
    /// rounding): the scaling law behind the damped scheme.
    #[test]
    fn scaling_law_equality(
        map in affine2(), x in point2(), y in point2(), z in point2(), c in 0u8..=16,
    ) {
        let t = tol();
        let nm = NormSpec::L1;
        let c = f64::from(c) / 16.0;
        let Ok(triple) = Triple::new(x, y, z, &nm, &t) else { return Ok(()); };
        let base = audit_triple(&map, &triple, &nm, &t).unwrap();
        let scaled = MappingSpec::Scaled { factor: c, inner: Box::new(map.clone()) };
        let damped = audit_triple(&scaled, &triple, &nm, &t).unwrap();
        let expected = c * base.ratio;
        prop_assert!(
            (damped.ratio - expected).abs() <= t.tau_rel * expected.max(1.0) + 1e-12,
            "ratio {} vs c·ratio {}", damped.ratio, expected
        );
    }

    #[test]
    fn sampler_is_deterministic(seed in any::<u64>(), n in 1usize..=40) {
        let domain = DomainSpec::Box {
            lower: Point::new(vec![0.0, 0.0]).unwrap(),
            upper: Point::new(vec![1.0, 1.0]).unwrap(),
            resolution: vec![8, 8],
        };
        for strategy in [SampleStrategy::Grid, SampleStrategy::UniformRandom, SampleStrategy::Hybrid] {
            let cfg = SamplerConfig { seed, n_points: n, strategy };
            let a = sample_points(&domain, &cfg).unwrap();
            let b = sample_points(&domain, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

/// For a perimetric nonexpansive mapping, the image distance of any pair is
/// bounded by the perimeter of any triple containing it.
#[test]
fn pair_bound_from_triples_on_ray_scenario() {
    let t = tol();
    let scenario = perimap_core::scenario::corpus::load("example_2_2").unwrap();
    let pts = sample_points(&scenario.domain, &scenario.sampler_or_default()).unwrap();
    let nm = &scenario.norm;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let tx = evaluate(&scenario.mapping, &pts[i], nm, &t).unwrap();
            let ty = evaluate(&scenario.mapping, &pts[j], nm, &t).unwrap();
            let image_dist = dist(&tx, &ty, nm).unwrap();
            for k in 0..pts.len() {
                if k == i || k == j {
                    continue;
                }
                let triple =
                    Triple::new(pts[i].clone(), pts[j].clone(), pts[k].clone(), nm, &t).unwrap();
                let p = perimeter(&triple, nm, &t).unwrap();
                assert!(
                    image_dist <= p + t.tau_abs,
                    "pair ({i},{j}) image distance {image_dist} exceeds perimeter {p} of triple with {k}"
                );
            }
        }
    }
}
