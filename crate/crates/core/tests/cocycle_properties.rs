use nuhyp_core::cocycle::*;
use nuhyp_core::linalg::{Mat, Mat2};
use nuhyp_core::systems::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_segment(rng: &mut ChaCha8Rng, len: usize, period: Option<usize>) -> OrbitSegment {
    let jac: Vec<Mat2> = (0..len)
        .map(|_| {
            let mut m = [[0.0; 2]; 2];
            for r in &mut m {
                for e in r.iter_mut() {
                    *e = rng.gen_range(-2.0..2.0);
                }
            }
            m[0][0] += 2.5;
            m[1][1] += 0.5;
            m
        })
        .collect();
    let points = len + usize::from(period.is_none());
    OrbitSegment::planar(vec![[0.0, 0.0]; points], jac, period).unwrap()
}

fn random_frame(rng: &mut ChaCha8Rng, len: usize) -> SplittingFrame {
    let mut e = Vec::new();
    let mut f = Vec::new();
    for _ in 0..len {
        let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let s = t + rng.gen_range(0.3..2.8);
        e.push(Mat::from_columns(&[vec![t.cos(), t.sin()]]).unwrap());
        f.push(Mat::from_columns(&[vec![s.cos(), s.sin()]]).unwrap());
    }
    SplittingFrame::new(e, f).unwrap()
}

fn lifted_segments() -> Vec<OrbitSegment> {
    let m = CatMap::standard();
    [5i64, 11, 23]
        .iter()
        .map(|&q| {
            let orbit = cat_orbit(&m, RationalPoint::new([1, 0], q).unwrap());
            blowup_lift_orbit(&m, &orbit, 0.1).unwrap().orbit_segment(&m).unwrap()
        })
        .collect()
}

#[test]
fn subadditive_on_random_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let orbit = random_segment(&mut rng, 60, None);
        let frame = random_frame(&mut rng, 61);
        for bundle in [Bundle::E, Bundle::F] {
            for n in 1..12 {
                for m in 1..12 {
                    for base in [0i64, 5, 17] {
                        let whole = bundle_log_norm(&orbit, &frame, bundle, n + m, base).unwrap();
                        let split = bundle_log_norm(&orbit, &frame, bundle, n, base).unwrap()
                            + bundle_log_norm(&orbit, &frame, bundle, m, base + n as i64).unwrap();
                        assert!(whole <= split + 1e-10, "{:?} n={} m={}: {} > {}", bundle, n, m, whole, split);
                    }
                }
            }
        }
    }
}

#[test]
fn subadditive_on_lifted_orbits() {
    for orbit in lifted_segments() {
        let frame = periodic_frame(&orbit).unwrap();
        let p = orbit.period().unwrap();
        for bundle in [Bundle::E, Bundle::F] {
            for n in 1..8 {
                for m in 1..8 {
                    for base in 0..p as i64 {
                        let whole = bundle_log_norm(&orbit, &frame, bundle, n + m, base).unwrap();
                        let split = bundle_log_norm(&orbit, &frame, bundle, n, base).unwrap()
                            + bundle_log_norm(&orbit, &frame, bundle, m, base + n as i64).unwrap();
                        assert!(whole <= split + 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn kingman_averages_decrease_to_exponent() {
    let m = CatMap::standard();
    let l = m.log_lambda();
    for orbit in lifted_segments() {
        let frame = periodic_frame(&orbit).unwrap();
        let ens = [WeightedOrbit {
            weight: 1.0,
            orbit: &orbit,
            frame: &frame,
        }];
        for bundle in [Bundle::E, Bundle::F] {
            let vals: Vec<f64> = [1, 2, 4, 8]
                .iter()
                .map(|&n| subadditive_average(&ens, n, bundle).unwrap())
                .collect();
            for w in vals.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", vals);
            }
            // λ_E^+ = −log λ and −λ_F^- = −log λ on the lifted orbits.
            for v in &vals {
                assert!(*v >= -l - 1e-9, "{:?}", vals);
            }
        }
    }
}

/// `sup_{k ≤ 5π} e^{kNλ} ∏ ‖·‖` computed directly from matrix products.
fn brute_force_c(orbit: &OrbitSegment, frame: &SplittingFrame, n: usize, lambda: f64, bundle: Bundle) -> f64 {
    let p = orbit.period().unwrap() as i64;
    let mut best = 0.0f64;
    let mut acc = 0.0f64;
    for k in 1..=5 * p {
        let l = k - 1;
        let base = match bundle {
            Bundle::E => l * n as i64,
            Bundle::F => -(l + 1) * n as i64,
        };
        acc += bundle_log_norm(orbit, frame, bundle, n, base).unwrap();
        best = best.max(k as f64 * n as f64 * lambda + acc);
    }
    best.exp()
}

#[test]
fn c_function_reduces_to_one_period() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tested = 0;
    while tested < 200 {
        let p = rng.gen_range(1..8);
        let n = rng.gen_range(1..3);
        let bundle = if rng.gen_bool(0.5) { Bundle::E } else { Bundle::F };
        // Triangular so that E = e1 (resp. F = e2) is invariant.
        let jac: Vec<Mat2> = (0..p)
            .map(|_| {
                let a: f64 = rng.gen_range(0.2..1.6);
                let d: f64 = rng.gen_range(0.7..5.0);
                let off = rng.gen_range(-1.0..1.0);
                match bundle {
                    Bundle::E => [[a, off], [0.0, d]],
                    Bundle::F => [[a, 0.0], [off, d]],
                }
            })
            .collect();
        let orbit = OrbitSegment::planar(vec![[0.0, 0.0]; p], jac, Some(p)).unwrap();
        let frame = SplittingFrame::constant(p, &[vec![1.0, 0.0]], &[vec![0.0, 1.0]]).unwrap();
        let lambda = rng.gen_range(0.0..0.5);
        let Ok(c) = c_function(&orbit, &frame, n, lambda, bundle, 0) else {
            continue;
        };
        let brute = brute_force_c(&orbit, &frame, n, lambda, bundle).max(1.0);
        assert!((c.value - brute).abs() <= 1e-12 * brute, "{} vs {}", c.value, brute);
        tested += 1;
    }
}

#[test]
fn hyperbolic_times_satisfy_product_bound() {
    let m = CatMap::standard();
    let l = m.log_lambda();
    for q in [7i64, 11] {
        for rec in cat_periodic_orbits(&m, q).unwrap() {
            let orbit = rec.orbit_segment(&m).unwrap();
            let frame = m.eigen_frame(orbit.len()).unwrap();
            let est = HyperbolicityEstimate::new(l, 0.1, 1, cf_constant(&orbit).value).unwrap();
            let c1 = 0.5 * l;
            let times = hyperbolic_times(&orbit, &frame, &est, c1).unwrap();
            assert_eq!(times.indices.len(), rec.period);
            let pi = rec.period as i64;
            for &y in &times.orbit_indices {
                let mut acc = 0.0;
                for k in 1..=3 * pi {
                    acc += bundle_log_norm(&orbit, &frame, Bundle::E, 1, y as i64 + k - 1).unwrap();
                    assert!(acc <= -(k as f64) * c1 + 1e-9);
                }
            }
        }
    }
}

#[test]
fn hyperbolic_times_on_lifted_orbits() {
    for orbit in lifted_segments() {
        let frame = periodic_frame(&orbit).unwrap();
        let n = 2;
        let est = HyperbolicityEstimate::new(0.9, 0.2, n, cf_constant(&orbit).value).unwrap();
        let c1 = 0.5;
        let times = hyperbolic_times(&orbit, &frame, &est, c1).unwrap();
        let pi = orbit.period().unwrap() as i64;
        for &y in &times.orbit_indices {
            let mut acc = 0.0;
            for k in 1..=3 * pi {
                acc += bundle_log_norm(&orbit, &frame, Bundle::E, n, y as i64 + (k - 1) * n as i64).unwrap();
                assert!(acc <= -(k as f64) * c1 + 1e-9);
            }
        }
    }
}

#[test]
fn domination_persists_when_doubling() {
    let m = CatMap::standard();
    let mut cases: Vec<(OrbitSegment, SplittingFrame)> = lifted_segments()
        .into_iter()
        .map(|o| {
            let f = periodic_frame(&o).unwrap();
            (o, f)
        })
        .collect();
    let rec = cat_orbit(&m, RationalPoint::new([1, 2], 5).unwrap());
    let o = rec.orbit_segment(&m).unwrap();
    cases.push((o.clone(), m.eigen_frame(o.len()).unwrap()));
    let s = Figure8System::new(32).unwrap();
    let lc = level_curve_orbit(&s, 1e-2, 800).unwrap();
    cases.push(power_iteration_frame(&lc.orbit_segment().unwrap(), 1, 200).unwrap());
    for (orbit, frame) in &cases {
        for n in 1..=10 {
            if dominated_at(orbit, frame, n).unwrap() {
                assert!(dominated_at(orbit, frame, 2 * n).unwrap(), "N = {}", n);
            }
        }
    }
}

#[test]
fn orbit_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let orbit = random_segment(&mut rng, 5, Some(5));
    let text = serde_json::to_string(&orbit).unwrap();
    let back: OrbitSegment = serde_json::from_str(&text).unwrap();
    assert_eq!(orbit, back);
    let bad = r#"{"points": [[0, 0]], "jacobians": [[[1, 0], [0]]]}"#;
    assert!(serde_json::from_str::<OrbitSegment>(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponents_of_constant_hyperbolic_cocycles(a in 1.05f64..5.0, b in -3.0f64..3.0, p in 1usize..40) {
        // Upper triangular with eigenvalues a and 1/a.
        let j = [[a, b], [0.0, 1.0 / a]];
        let orbit = OrbitSegment::planar(vec![[0.0, 0.0]; p], vec![j; p], Some(p)).unwrap();
        let r = periodic_exponents(&orbit).unwrap();
        prop_assert!((r.exponents[0] + a.ln()).abs() < 1e-10);
        prop_assert!((r.exponents[1] - a.ln()).abs() < 1e-10);
    }
}
