use std::collections::BTreeSet;

use nuhyp_core::manifolds::*;
use nuhyp_core::systems::*;

fn cat_saddles(map: &TorusLinearMap, m: &CatMap, max_q: i64) -> Vec<SaddleRecord> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for q in 1..=max_q {
        for orbit in cat_periodic_orbits(m, q).unwrap() {
            let rep = orbit.representative.reduced();
            if orbit.points.iter().any(|p| seen.contains(&p.reduced())) {
                continue;
            }
            seen.extend(orbit.points.iter().map(|p| p.reduced()));
            out.push(SaddleRecord::new(map, rep.to_f64(), orbit.period).unwrap());
        }
    }
    out
}

fn short(arclength: f64) -> RelationParams {
    RelationParams {
        growth: GrowthParams {
            arclength,
            ..GrowthParams::default()
        },
        angle_min: 1e-3,
    }
}

#[test]
fn cat_saddles_form_one_class() {
    let m = CatMap::standard();
    let map = TorusLinearMap::new(&m);
    let saddles = cat_saddles(&map, &m, 3);
    let n = saddles.len();
    let part = intersection_classes(&map, saddles, &short(3.0)).unwrap();
    assert_eq!(part.class_count(), 1);
    let direct: Vec<_> = part.evidence.iter().filter(|e| e.kind == MergeKind::Direct).collect();
    assert_eq!(direct.len(), n - 1);
    for e in direct {
        for c in e.forward.iter().chain(&e.backward) {
            assert!((c.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        }
    }
}

#[test]
fn relation_is_symmetric_and_monotone() {
    let m = CatMap::standard();
    let map = TorusLinearMap::new(&m);
    let saddles = cat_saddles(&map, &m, 4);
    let pairs = [(0usize, 3usize), (1, 5), (2, saddles.len() - 1)];
    for (i, j) in pairs {
        let mut was_related = false;
        for budget in [0.2, 1.0, 3.0] {
            let p = short(budget);
            let a = homoclinically_related(&map, &saddles[i], &saddles[j], &p).unwrap();
            let b = homoclinically_related(&map, &saddles[j], &saddles[i], &p).unwrap();
            assert_eq!(a.related, b.related);
            assert_eq!(a.forward.len(), b.backward.len());
            assert!(!was_related || a.related, "budget {} lost the relation", budget);
            was_related = a.related;
        }
        assert!(was_related);
    }
}

#[test]
fn stored_evidence_reverifies() {
    let m = CatMap::standard();
    let map = TorusLinearMap::new(&m);
    let saddles = cat_saddles(&map, &m, 2);
    let params = short(2.0);
    let part = intersection_classes(&map, saddles.clone(), &params).unwrap();
    for e in part.evidence.iter().filter(|e| e.kind == MergeKind::Direct) {
        let (i, j) = e.pair;
        let mi = grow_all(&map, &saddles[i], &params.growth).unwrap();
        let mj = grow_all(&map, &saddles[j], &params.growth).unwrap();
        let fresh: Vec<Crossing> = mi
            .unstable
            .iter()
            .flat_map(|u| mj.stable.iter().flat_map(move |s| transverse_intersections(u, s, params.angle_min)))
            .collect();
        for c in &e.forward {
            assert!(fresh
                .iter()
                .any(|f| f.patch == c.patch && torus_distance(&f.point, &c.point) <= params.growth.h_min));
        }
    }
}

#[test]
fn invariance_of_cat_and_blowup_branches() {
    let m = CatMap::standard();
    let torus = TorusLinearMap::new(&m);
    let s = SaddleRecord::new(&torus, [0.2, 0.4], 2).unwrap();
    let params = GrowthParams {
        arclength: 2.0,
        ..GrowthParams::default()
    };
    let c = grow_manifold(&torus, &s, Branch::Unstable, Side::Minus, &params).unwrap();
    let n = c.polyline.len();
    for k in 0..200 {
        let p = c.polyline[k * (n / 8) / 200];
        // Return map f² composed with the deck shift back to the saddle.
        let img = torus.forward(torus.forward(p));
        let img = [img[0] - s.shift[0], img[1] - s.shift[1]];
        let d = distance_to_polyline(img, &c.polyline);
        assert!(d <= 5.0 * params.tol, "{} at {:?} -> {:?}, start {:?}", d, p, img, c.polyline[0]);
    }

    let map = BlowupPolarMap::new(&m).unwrap();
    let (p1, _) = blowup_saddles(&map, &m).unwrap();
    let c = grow_manifold(&map, &p1, Branch::Unstable, Side::Plus, &params).unwrap();
    let n = c.polyline.len();
    for k in 0..200 {
        let p = c.polyline[k * (n / 3) / 200];
        let img = map.forward(p);
        let d = distance_to_polyline(img, &c.polyline);
        assert!(d <= 5.0 * params.tol, "{} at {:?} -> {:?}, start {:?}", d, p, img, c.polyline[0]);
    }
}

#[test]
fn blowup_fixed_points_are_not_related() {
    let m = CatMap::standard();
    let map = BlowupPolarMap::new(&m).unwrap();
    let (p1, p2) = blowup_saddles(&map, &m).unwrap();
    let part = intersection_classes(&map, vec![p1, p2], &short(5.0)).unwrap();
    assert_eq!(part.class_count(), 2);
    assert!(matches!(part.unrelated[0].1, RelationReason::NotFoundWithinBudget { .. }));
}

fn separatrix_offset(m: usize) -> f64 {
    let map = Figure8SubstepMap::new(Figure8System::new(m).unwrap());
    let s = SaddleRecord::new(&map, FIGURE8_P1, 1).unwrap();
    let params = GrowthParams {
        arclength: 1.0,
        ..GrowthParams::default()
    };
    let c = grow_manifold(&map, &s, Branch::Unstable, Side::Plus, &params).unwrap();
    c.polyline.iter().map(|p| (hamiltonian(p) - 1.0).abs()).fold(0.0, f64::max)
}

#[test]
fn separatrix_offset_is_second_order() {
    let (a, b) = (separatrix_offset(64), separatrix_offset(128));
    let ratio = a / b;
    assert!((3.5..=4.5).contains(&ratio), "{} / {} = {}", a, b, ratio);
}
