//! The three example experiments. Each returns an [`ExperimentReport`] whose
//! checks use the thresholds of the configuration.

use std::collections::BTreeSet;

use nuhyp_core::cocycle::{
    c_function, domination_check, finite_time_exponents, periodic_exponents, power_iteration_frame, Bundle,
};
use nuhyp_core::manifolds::{
    blowup_saddles, intersection_classes, proximity_intersection_test, torus_distance, BlowupPolarMap,
    IntersectionClassPartition, MergeKind, RelationReason, SaddleRecord, SizedPoint, TorusLinearMap,
};
use nuhyp_core::systems::{
    blowup_apply, blowup_fixed_points, blowup_lift_orbit, cat_apply, cat_orbit, cat_periodic_orbits,
    figure8_time1, level_curve_orbit, CatMap, Figure8System, LevelCurveOrbit, PeriodicOrbitRecord,
    RationalPoint, BlowupPoint, FIGURE8_P1, FIGURE8_P2,
};
use nuhyp_core::wstar::{
    convex_combine, cylinder_family, wstar_distance, ConvexWeights, EmpiricalMeasure, TestFunctionFamily,
};
use nuhyp_core::linalg::det2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Cell, Check, ExperimentReport, Table};

/// Distinct orbits of rational points with denominator `≤ max_q`, in order
/// of first appearance.
pub fn distinct_cat_orbits(m: &CatMap, max_q: i64) -> Result<Vec<PeriodicOrbitRecord<RationalPoint>>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for q in 1..=max_q {
        for orbit in cat_periodic_orbits(m, q)? {
            let rep = orbit.representative.reduced();
            if seen.contains(&(rep.num, rep.den)) {
                continue;
            }
            seen.extend(orbit.points.iter().map(|p| {
                let r = p.reduced();
                (r.num, r.den)
            }));
            out.push(cat_orbit(m, rep));
        }
    }
    Ok(out)
}

/// Acute angle between the two eigendirections of the matrix.
pub fn eigendirection_angle(m: &CatMap) -> f64 {
    let (s, u) = m.eigenvectors();
    let cross = (s[0] * u[1] - s[1] * u[0]).abs();
    let dot = (s[0] * u[0] + s[1] * u[1]).abs();
    cross.atan2(dot)
}

/// Largest deviation of recorded crossing angles from `angle`, over the
/// direct merges of a partition.
pub fn evidence_angle_error(part: &IntersectionClassPartition, angle: f64) -> f64 {
    part.evidence
        .iter()
        .filter(|e| e.kind == MergeKind::Direct)
        .flat_map(|e| e.forward.iter().chain(&e.backward))
        .map(|c| (c.angle - angle).abs())
        .fold(0.0, f64::max)
}

fn pool(cfg: &ExperimentConfig) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .expect("thread pool")
}

/// `(q, orbits, Σ period, max exponent error, domination N)`.
type QRow = (i64, usize, usize, f64, Option<usize>);

pub fn catmap(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = CatMap::new(cfg.catmap.matrix)?;
    let t = &cfg.thresholds;
    let l = m.log_lambda();
    let pool = pool(cfg);

    // Exponents and orbit counts per denominator.
    let rows: Vec<Result<QRow>> = pool.install(|| {
        (1..=cfg.catmap.max_q)
            .into_par_iter()
            .map(|q| {
                let orbits = cat_periodic_orbits(&m, q)?;
                let total: usize = orbits.iter().map(|o| o.period).sum();
                let mut err = 0.0f64;
                let mut domination = Some(0usize);
                for o in &orbits {
                    let seg = o.orbit_segment(&m)?;
                    let r = periodic_exponents(&seg)?;
                    err = err.max((r.exponents[0] + l).abs()).max((r.exponents[1] - l).abs());
                    let n = domination_check(&seg, &m.eigen_frame(seg.len())?, 20)?;
                    domination = match (domination, n) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        _ => None,
                    };
                }
                Ok((q, orbits.len(), total, err, domination))
            })
            .collect()
    });
    let mut exp_table = Table::new(
        "exponents",
        &[
            ("q", "1"),
            ("orbits", "count"),
            ("sum_period", "points"),
            ("max_exponent_error", "1/iterate"),
            ("domination_n", "iterates"),
        ],
    )
    .meta("log_lambda", format!("{:.16e}", l))
    .meta("exponent_threshold", t.exponent_abs);
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    let mut domination = Some(0usize);
    for r in rows {
        let (q, n, total, err, dom) = r?;
        worst = worst.max(err);
        counts_ok &= total as i64 == q * q;
        domination = match (domination, dom) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        exp_table.push(vec![q.into(), n.into(), total.into(), err.into(), dom.map_or(Cell::from(""), Cell::from)]);
    }
    let mut checks = vec![
        Check::at_most("exponents_match_log_lambda", worst, t.exponent_abs),
        Check::new("orbit_counts_sum_to_q_squared", counts_ok, None, "Σ period = q²"),
        Check::new(
            "domination_n_equals_1",
            domination == Some(1),
            domination.map(|n| n as f64),
            "N = 1",
        ),
    ];

    // Intersection classes.
    let map = TorusLinearMap::new(&m);
    let orbits = distinct_cat_orbits(&m, cfg.catmap.classes_max_q)?;
    let saddles: Vec<SaddleRecord> = orbits
        .iter()
        .map(|o| SaddleRecord::new(&map, o.representative.to_f64(), o.period))
        .collect::<nuhyp_core::Result<_>>()?;
    let params = cfg.budgets.relation(cfg.budgets.arclength);
    let part = intersection_classes(&map, saddles.clone(), &params)?;
    let angle = eigendirection_angle(&m);
    let angle_err = evidence_angle_error(&part, angle);
    let has_evidence = part.evidence.iter().any(|e| e.kind == MergeKind::Direct);
    checks.push(Check::new(
        "single_intersection_class",
        part.class_count() == 1,
        Some(part.class_count() as f64),
        "1 class",
    ));
    checks.push(
        Check::new(
            "crossing_angles_match_eigendirections",
            has_evidence && angle_err <= t.angle_abs,
            Some(angle_err),
            format!("≤ {:e}", t.angle_abs),
        )
        .with_detail(format!("analytic angle {:.16e}", angle)),
    );

    // Proximity predictions against the grown-manifold relation.
    let h = &cfg.hyperbolicity;
    let lam = h.chi - 2.0 * h.gamma;
    let sized: Vec<SizedPoint> = orbits
        .iter()
        .map(|o| {
            let seg = o.orbit_segment(&m)?;
            let frame = m.eigen_frame(seg.len())?;
            let ce = c_function(&seg, &frame, h.n, lam, Bundle::E, 0)?;
            let cf = c_function(&seg, &frame, h.n, lam, Bundle::F, 0)?;
            Ok(SizedPoint {
                point: o.representative.to_f64(),
                stable_size: nuhyp_core::cocycle::manifold_size(ce.value, h.delta)?,
                unstable_size: nuhyp_core::cocycle::manifold_size(cf.value, h.delta)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut predicted = 0usize;
    let mut agree = 0usize;
    let mut unsound = 0usize;
    let mut pairs = 0usize;
    let eligible = |p: &SizedPoint| p.stable_size >= h.delta && p.unstable_size >= h.delta;
    for i in 0..sized.len() {
        for j in i + 1..sized.len() {
            if !(eligible(&sized[i]) && eligible(&sized[j])) {
                continue;
            }
            let p = proximity_intersection_test(&sized[i], &sized[j], h.eta, h.delta, torus_distance)?;
            let related = part.find(i) == part.find(j);
            pairs += 1;
            predicted += p as usize;
            agree += (p == related) as usize;
            unsound += (p && !related) as usize;
        }
    }
    checks.push(
        Check::new("proximity_predictions_sound", unsound == 0, Some(unsound as f64), "0 false positives")
            .with_detail(format!(
                "{} of {} eligible pairs predicted, agreement {}/{}",
                predicted, pairs, agree, pairs
            )),
    );

    let mut class_table = Table::new(
        "classes",
        &[("saddle", "index"), ("x", "torus"), ("y", "torus"), ("period", "iterates"), ("class", "index")],
    )
    .meta("arclength_budget", params.growth.arclength)
    .meta("angle_min", params.angle_min)
    .meta("eta", h.eta)
    .meta("delta", h.delta);
    for (i, s) in part.saddles.iter().enumerate() {
        class_table.push(vec![i.into(), s.point[0].into(), s.point[1].into(), s.period.into(), part.find(i).into()]);
    }
    let mut report = ExperimentReport::new("catmap", checks, vec![exp_table, class_table]);
    report
        .records
        .insert("partition".into(), serde_json::to_value(&part).expect("partition serializes"));
    Ok(report)
}

pub fn blowup(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = CatMap::new(cfg.catmap.matrix)?;
    let t = &cfg.thresholds;
    let l = m.log_lambda();
    let (p1, p2) = blowup_fixed_points(&m);
    let [[a, b], [c, d]] = cfg.catmap.matrix.map(|r| r.map(|e| e as f64));
    // Roots of b·u² + (a − d)·u − c = 0 matched to p1 (unstable) and p2.
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
    let roots = [(-(a - d) + disc) / (2.0 * b), (-(a - d) - disc) / (2.0 * b)];
    let direction_err = [p1.slope(), p2.slope()]
        .iter()
        .map(|s| roots.iter().map(|r| (s - r).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let lam = m.lambda();
    let eigen_err = [
        (p1.eigenvalues[0] - lam).abs(),
        (p1.eigenvalues[1] - lam.powi(-2)).abs(),
        (p2.eigenvalues[0] - 1.0 / lam).abs(),
        (p2.eigenvalues[1] - lam * lam).abs(),
    ]
    .into_iter()
    .fold(p1.eigen_residual.max(p2.eigen_residual), f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut conj = 0.0f64;
    for _ in 0..10_000 {
        let p: [f64; 2] = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        if p == [0.0, 0.0] {
            continue;
        }
        let img = blowup_apply(&m, &BlowupPoint::torus(p)?).project();
        let want = cat_apply(&m, &p);
        let gap = |x: f64| {
            let r = x.rem_euclid(1.0);
            r.min(1.0 - r)
        };
        conj = conj.max(gap(img[0] - want[0]).hypot(gap(img[1] - want[1])));
    }

    let mut checks = vec![
        Check::at_most("fixed_directions", direction_err, t.direction_abs),
        Check::at_most("fixed_point_eigenvalues", eigen_err, t.eigenvalue_abs),
        Check::at_most("conjugacy_off_c", conj, t.conjugacy_abs),
    ];

    let pool = pool(cfg);
    let lifted: Vec<Result<_>> = pool.install(|| {
        cfg.blowup
            .qs
            .par_iter()
            .map(|&q| {
                let orbit = cat_orbit(&m, RationalPoint::new([1, 0], q)?);
                let lift = blowup_lift_orbit(&m, &orbit, cfg.blowup.radius)?;
                let r = periodic_exponents(&lift.orbit_segment(&m)?)?;
                Ok((q, lift, r.exponents))
            })
            .collect()
    });
    let mut occ = Table::new(
        "occupation",
        &[
            ("q", "1"),
            ("period", "iterates"),
            ("visits_p1", "count"),
            ("visits_p2", "count"),
            ("ratio", "1"),
            ("log_deviation", "1"),
            ("exponent_s", "1/iterate"),
            ("exponent_u", "1/iterate"),
        ],
    )
    .meta("radius", cfg.blowup.radius)
    .meta("metric", "chart distance sqrt(s^2 + (w - w_fix)^2), (s, w) = (x, y/x) or (y, x/y)")
    .meta("ratio_band", format!("[{}, {}]", t.ratio_low, t.ratio_high))
    .meta("log_lambda", format!("{:.16e}", l));
    let mut deviations = Vec::new();
    let mut last_ratio = None;
    let mut exp_err = 0.0f64;
    for r in lifted {
        let (q, lift, e) = r?;
        let s = &lift.summary;
        deviations.push(s.log_deviation());
        last_ratio = s.ratio;
        exp_err = exp_err.max((e[0] + l).abs()).max((e[1] - l).abs());
        occ.push(vec![
            q.into(),
            lift.orbit.period.into(),
            s.visits_p1.into(),
            s.visits_p2.into(),
            s.ratio.into(),
            s.log_deviation().into(),
            e[0].into(),
            e[1].into(),
        ]);
    }
    checks.push(Check::at_most("lifted_exponents_match_log_lambda", exp_err, t.eigenvalue_abs));
    let in_band = last_ratio.is_some_and(|r| r >= t.ratio_low && r <= t.ratio_high);
    checks.push(Check::new(
        "occupation_ratio_in_band_at_largest_q",
        in_band,
        last_ratio,
        format!("in [{}, {}]", t.ratio_low, t.ratio_high),
    ));
    let monotone = deviations.windows(2).all(|w| w[1] <= w[0]);
    checks.push(
        Check::new("occupation_deviation_non_increasing", monotone, None, "non-increasing in q")
            .with_detail(format!("{:?}", deviations)),
    );

    let map = BlowupPolarMap::new(&m)?;
    let (s1, s2) = blowup_saddles(&map, &m)?;
    let params = cfg.budgets.relation(cfg.blowup.arclength);
    let part = intersection_classes(&map, vec![s1, s2], &params)?;
    let not_found = part
        .unrelated
        .iter()
        .all(|(_, r)| matches!(r, RelationReason::NotFoundWithinBudget { .. }));
    checks.push(
        Check::new(
            "p1_p2_two_classes",
            part.class_count() == 2 && not_found,
            Some(part.class_count() as f64),
            "2 classes, not found within budget",
        )
        .with_detail(format!("arclength {} angle_min {}", params.growth.arclength, params.angle_min)),
    );

    let mut report = ExperimentReport::new("blowup", checks, vec![occ]);
    report.records.insert(
        "fixed_points".into(),
        serde_json::to_value([&p1, &p2]).expect("fixed points serialize"),
    );
    report
        .records
        .insert("partition".into(), serde_json::to_value(&part).expect("partition serializes"));
    Ok(report)
}

/// `½δ_{p1} + ½δ_{p2}`.
pub fn figure8_limit_measure() -> EmpiricalMeasure<[f64; 2]> {
    convex_combine(
        &[EmpiricalMeasure::dirac(FIGURE8_P1), EmpiricalMeasure::dirac(FIGURE8_P2)],
        &ConvexWeights::new(vec![0.5, 0.5]).expect("weights sum to one"),
    )
    .expect("two measures, two weights")
}

pub fn figure8_family(cfg: &ExperimentConfig) -> Result<TestFunctionFamily<[f64; 2]>> {
    let f = cylinder_family(cfg.measure.cylinder_params());
    Ok(if cfg.measure.truncation > 0 {
        f.truncated(cfg.measure.truncation)?
    } else {
        f
    })
}

/// Fraction of the trajectory within `r` of `p1` on the cylinder.
fn near_fraction(o: &LevelCurveOrbit, p: [f64; 2], r: f64) -> f64 {
    let t = o.jacobians.len();
    let hits = o.points[..t]
        .iter()
        .filter(|x| {
            let dx = (x[0] - p[0]).rem_euclid(1.0);
            dx.min(1.0 - dx).hypot(x[1] - p[1]) < r
        })
        .count();
    hits as f64 / t as f64
}

pub fn figure8(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let f8 = &cfg.figure8;
    let t = &cfg.thresholds;
    let sys = Figure8System::new(f8.substeps)?;
    let family = figure8_family(cfg)?;
    let target = figure8_limit_measure();
    let pool = pool(cfg);

    let mut eps_list = f8.eps.clone();
    if !eps_list.contains(&f8.exponent_eps) {
        eps_list.push(f8.exponent_eps);
    }
    let runs: Vec<Result<_>> = pool.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| {
                let o = level_curve_orbit(&sys, eps, f8.steps)?;
                let d = wstar_distance(&o.measure(), &target, &family);
                let ex = finite_time_exponents(&o.orbit_segment()?)?;
                Ok((eps, d, ex, o.energy_drift_rate, o.max_energy_deviation, o.energy_tolerance, near_fraction(&o, FIGURE8_P1, 0.05)))
            })
            .collect()
    });
    let mut table = Table::new(
        "distances",
        &[
            ("eps", "energy"),
            ("distance", "1"),
            ("exponent_max_abs", "1/unit time"),
            ("energy_drift_rate", "energy/unit time"),
            ("max_energy_deviation", "energy"),
            ("energy_tolerance", "energy"),
            ("fraction_near_p1", "1"),
        ],
    )
    .meta("family", family.name())
    .meta("truncation_K", family.truncation())
    .meta("tail_bound", family.tail_bound())
    .meta("substeps_M", f8.substeps)
    .meta("steps_T", f8.steps)
    .meta("near_radius", 0.05)
    .meta("distance_threshold", t.distance_max);
    let mut distances = Vec::new();
    let mut drift = 0.0f64;
    let mut energy_ok = true;
    let mut exponent_at = f64::NAN;
    for r in runs {
        let (eps, d, ex, rate, dev, tol, near) = r?;
        let ex_max = ex.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if eps == f8.exponent_eps {
            exponent_at = ex_max;
        }
        if f8.eps.contains(&eps) {
            distances.push(d);
            drift = drift.max(rate.abs());
            energy_ok &= dev <= tol;
            table.push(vec![eps.into(), d.into(), ex_max.into(), rate.into(), dev.into(), tol.into(), near.into()]);
        }
    }
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let last = *distances.last().expect("ε list is nonempty");
    let mut checks = vec![
        Check::new("distance_strictly_decreasing", decreasing, None, "strictly decreasing in ε order")
            .with_detail(format!("{:?}", distances)),
        Check::below("distance_at_smallest_eps", last, t.distance_max),
        Check::below("trajectory_exponent", exponent_at, t.trajectory_exponent_max),
        Check::below("energy_drift_per_unit_time", drift, t.drift_max),
        Check::new("energy_within_tolerance", energy_ok, None, "max |H − (1−ε)| ≤ O(h²) envelope"),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut det_err = 0.0f64;
    let mut plain_err = 0.0f64;
    for _ in 0..f8.det_samples {
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(-f8.det_y_extent..=f8.det_y_extent)];
        det_err = det_err.max((sys.time1_det(p) - 1.0).abs());
        let (_, j) = figure8_time1(&sys, p);
        plain_err = plain_err.max((det2(&j) - 1.0).abs());
    }
    checks.push(
        Check::at_most("symplectic_determinant", det_err, t.det_abs).with_detail(format!(
            "double-double product; plain double product deviates by up to {:e}",
            plain_err
        )),
    );

    let o = level_curve_orbit(&sys, f8.exponent_eps, f8.domination_steps)?;
    let (seg, frame) = power_iteration_frame(&o.orbit_segment()?, 1, f8.warmup)?;
    let dom = domination_check(&seg, &frame, f8.n_max)?;
    checks.push(Check::new(
        "no_domination_on_level_curve",
        dom.is_none(),
        dom.map(|n| n as f64),
        format!("none up to N = {}", f8.n_max),
    ));

    Ok(ExperimentReport::new("figure8", checks, vec![table]))
}

pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match name {
        "catmap" => catmap(cfg),
        "blowup" => blowup(cfg),
        "figure8" => figure8(cfg),
        other => Err(crate::error::Error::Config(format!("unknown experiment `{}`", other))),
    }
}
