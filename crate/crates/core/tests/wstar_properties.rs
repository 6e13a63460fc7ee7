use nuhyp_core::wstar::*;
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = EmpiricalMeasure<[f64; 2]>> {
    prop::collection::vec(((0.0f64..1.0, 0.0f64..1.0), 0.01f64..1.0), 1..12).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        EmpiricalMeasure::on_torus(
            atoms
                .into_iter()
                .map(|((x, y), w)| Atom {
                    point: [x, y],
                    weight: w / total,
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn torus_distance_is_a_pseudometric(a in measure(), b in measure(), c in measure()) {
        let f = torus_fourier_family(3);
        let ab = wstar_distance(&a, &b, &f);
        let bc = wstar_distance(&b, &c, &f);
        let ac = wstar_distance(&a, &c, &f);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wstar_distance(&b, &a, &f)).abs() <= 1e-15);
        prop_assert!(wstar_distance(&a, &a, &f) == 0.0);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(ab <= 2.0 - f.tail_bound() + 1e-12);
    }

    #[test]
    fn integrals_are_affine(a in measure(), b in measure(), c in measure(), s in prop::array::uniform3(0.0f64..1.0)) {
        let total: f64 = s.iter().sum();
        prop_assume!(total > 1e-3);
        let w = ConvexWeights::new(s.iter().map(|x| x / total).collect()).unwrap();
        let mix = convex_combine(&[a.clone(), b.clone(), c.clone()], &w).unwrap();
        let f = torus_fourier_family(2);
        for phi in f.functions() {
            let lhs = integrate(&mix, |p| (phi.eval)(p));
            let rhs: f64 = [&a, &b, &c]
                .iter()
                .zip(w.as_slice())
                .map(|(m, sj)| sj * integrate(m, |p| (phi.eval)(p)))
                .sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn simplex_refinement_never_worse(a in measure(), b in measure(), nu in measure(), m in 1usize..6) {
        let f = torus_fourier_family(2);
        let verts = [a, b];
        let (coarse, _) = distance_to_simplex(&nu, &verts, &f, m).unwrap();
        let (fine, _) = distance_to_simplex(&nu, &verts, &f, 2 * m).unwrap();
        prop_assert!(fine <= coarse + 1e-15);
    }

    #[test]
    fn separates_distinct_diracs(x in 0.0f64..1.0, y in 0.0f64..1.0, dx in 0.01f64..0.99) {
        let f = torus_fourier_family(3);
        let p = EmpiricalMeasure::dirac([x, y]);
        let q = EmpiricalMeasure::dirac([(x + dx) % 1.0, y]);
        prop_assert!(wstar_distance(&p, &q, &f) > 0.0);
    }
}

#[test]
fn cylinder_sup_norms_dominate_samples() {
    let f = cylinder_family(CylinderFamilyParams::default());
    for phi in f.functions() {
        for i in 0..50 {
            for j in 0..50 {
                let p = [i as f64 / 50.0, -4.0 + 8.0 * j as f64 / 49.0];
                assert!((phi.eval)(&p).abs() <= phi.sup_norm, "{}", phi.label);
            }
        }
    }
}
