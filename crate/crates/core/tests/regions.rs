use nagumo_core::flow::{poincare_chart, Sign, WeightPair};
use nagumo_core::ode::{ChartState, IntegratorOptions};
use nagumo_core::phase::*;
use nagumo_core::regions::*;
use nagumo_core::stretch::t1_star;
use nagumo_core::PlanarPath;

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn pair() -> WeightPair {
    WeightPair::new(0.4, 0.6).unwrap()
}

fn constants(w: &WeightPair, factor: f64) -> RectConstants {
    let (pm, pp) = choose_p(w).unwrap();
    let t1 = factor * t1_star(w, pm, pp).unwrap();
    compute_q(w, pm, pp, t1, &opts()).unwrap()
}

#[test]
fn choose_p_midpoints() {
    let (pm, pp) = choose_p(&pair()).unwrap();
    assert!((pm - 5.0 / 6.0).abs() < 1e-12);
    assert!((pp - 1.0 / 6.0).abs() < 1e-12);
    for a in [0.3, 0.35, 0.45] {
        let (pm, pp) = choose_p(&WeightPair::new(a, 1.0 - a).unwrap()).unwrap();
        assert!((pp - (1.0 - pm)).abs() < 1e-12, "a = {a}");
    }
}

#[test]
fn q_ordering_and_monotonicity() {
    let w = pair();
    let (pm, pp) = choose_p(&w).unwrap();
    let t1 = 1.1 * t1_star(&w, pm, pp).unwrap();
    let k = compute_q(&w, pm, pp, t1, &opts()).unwrap();
    assert!(pm < k.q_plus && k.q_plus < 1.0);
    assert!(0.0 < k.q_minus && k.q_minus < pp);
    let k2 = compute_q(&w, pm, pp, 2.0 * t1, &opts()).unwrap();
    assert!(k2.q_plus >= k.q_plus);
    assert!(k2.q_minus <= k.q_minus);
}

#[test]
fn q_plus_is_one_sided_sup() {
    let w = pair();
    let (pm, pp) = choose_p(&w).unwrap();
    let t1 = 1.1 * t1_star(&w, pm, pp).unwrap();
    let k = compute_q(&w, pm, pp, t1, &opts()).unwrap();
    let (r1, r3) = build_r13(&w, pm, pp).unwrap();
    // the sup sits within 1e-4 of the saddle, so the probes are relative to
    // the remaining distance: 1% further inside, and halfway to the saddle
    let d = 1.0 - k.q_plus;
    let back = |off: f64| {
        let z = ChartState::new(Anchor::One, -off, 0.0);
        poincare_chart(&w, Sign::Minus, -t1, z, &opts()).unwrap().point()
    };
    assert_ne!(contains(&r1, back(1.01 * d)), Membership::Outside);
    assert_eq!(contains(&r1, back(0.5 * d)), Membership::Outside);
    let d = k.q_minus;
    let back = |off: f64| {
        let z = ChartState::new(Anchor::Zero, off, 0.0);
        poincare_chart(&w, Sign::Plus, -t1, z, &opts()).unwrap().point()
    };
    assert_ne!(contains(&r3, back(1.01 * d)), Membership::Outside);
    assert_eq!(contains(&r3, back(0.5 * d)), Membership::Outside);
}

#[test]
fn q_not_found_for_tiny_t1() {
    let w = pair();
    let (pm, pp) = choose_p(&w).unwrap();
    assert!(matches!(compute_q(&w, pm, pp, 0.5, &opts()), Err(nagumo_core::Error::QNotFound(_))));
}

#[test]
fn membership_examples() {
    let w = pair();
    let k = constants(&w, 1.1);
    let rs = build_rects(&w, &k).unwrap();
    // (p₋,0) is on the defining orbit of S₋ and on the axis
    assert_eq!(contains(&rs.r1, PhasePoint::new(k.p_minus, 0.0)), Membership::Outside);
    assert_eq!(rs.r1.band1.energy(PhasePoint::new(k.p_minus, 0.0)), rs.r1.band1.lo);
    assert_eq!(contains(&rs.r1, PhasePoint::new(0.6, 0.0)), Membership::Outside);
    for r in [&rs.r1, &rs.r2, &rs.r3, &rs.r4] {
        let p = witness(&w, &k, r).unwrap();
        assert_eq!(contains(r, p), Membership::Inside, "{:?}", r.label);
    }
    // band limits are the defining energies
    assert_eq!(rs.r1.band1.lo, potential(&w.minus, k.p_minus));
    assert_eq!(rs.r1.band1.hi, (1.0 - 2.0 * 0.4) / 12.0);
    assert_eq!(rs.r2.band2.lo, potential(&w.plus, k.q_plus));
    assert!(build_rects(&w, &RectConstants { q_plus: 0.5, ..k }).is_err());
}

#[test]
fn midpoint_between_minus_sides_is_inside() {
    let w = pair();
    let k = constants(&w, 1.1);
    let rs = build_rects(&w, &k).unwrap();
    let path = spanning_path(&w, &k, &rs.r1, Orientation::Minus).unwrap();
    let mid = path.start().lerp(&path.end(), 0.5);
    assert_eq!(contains(&rs.r1, mid), Membership::Inside);
}

#[test]
fn spanning_paths_stay_inside_and_end_on_sides() {
    let w = pair();
    let k = constants(&w, 1.1);
    let rs = build_rects(&w, &k).unwrap();
    for r in [&rs.r1, &rs.r2, &rs.r3, &rs.r4] {
        for o in [Orientation::Minus, Orientation::Plus] {
            let path = spanning_path(&w, &k, r, o).unwrap();
            for q in path.points() {
                assert_ne!(contains(r, q.p), Membership::Outside, "{:?} {o:?} at {:?}", r.label, q.p);
            }
            let on = |p: PhasePoint| -> Vec<usize> {
                r.active_constraints(p).iter().filter_map(|&c| r.side_index(o, c)).collect()
            };
            let (a, b) = (on(path.start()), on(path.end()));
            assert!(a.contains(&0) && b.contains(&1), "{:?} {o:?}: {a:?} {b:?}", r.label);
        }
    }
}

#[test]
fn crossing_subpaths_of_spanning_path_is_itself() {
    let w = pair();
    let k = constants(&w, 1.1);
    let rs = build_rects(&w, &k).unwrap();
    for r in [&rs.r1, &rs.r2] {
        let path = spanning_path(&w, &k, r, Orientation::Minus).unwrap();
        let cs = crossing_subpaths(&path, r, Orientation::Minus).unwrap();
        assert_eq!(cs.len(), 1, "{:?}", r.label);
        assert!(cs[0].0.s0.abs() < 1e-9 && (cs[0].0.s1 - 1.0).abs() < 1e-9);
        // the same path does not join the plus sides
        assert!(crossing_subpaths(&path, r, Orientation::Plus).unwrap().is_empty());
    }
    let outside = PlanarPath::segment(PhasePoint::new(0.1, -0.5), PhasePoint::new(0.9, -0.5)).unwrap();
    assert!(crossing_subpaths(&outside, &rs.r1, Orientation::Minus).unwrap().is_empty());
}

#[test]
fn crossing_detection_is_stable_under_refinement() {
    let w = pair();
    let k = constants(&w, 1.1);
    let rs = build_rects(&w, &k).unwrap();
    // the plus-spanning path extended past both sides along its end chords
    let span = spanning_path(&w, &k, &rs.r1, Orientation::Plus).unwrap();
    let pts: Vec<PhasePoint> = span.points().iter().map(|q| q.p).collect();
    let n = pts.len();
    let out = |a: PhasePoint, b: PhasePoint| a.lerp(&b, -0.02 / a.dist(&b));
    let head = out(pts[0], pts[1]);
    let tail = out(pts[n - 1], pts[n - 2]);
    let mut ext = vec![head];
    ext.extend(pts);
    ext.push(tail);
    let path = PlanarPath::from_points(ext).unwrap();
    let c1 = crossing_subpaths(&path, &rs.r1, Orientation::Plus).unwrap();
    let c2 = crossing_subpaths(&path.refined(path.length() / 64.0), &rs.r1, Orientation::Plus).unwrap();
    assert_eq!(c1.len(), 1);
    assert_eq!(c1.len(), c2.len());
    for (a, b) in c1.iter().zip(&c2) {
        assert!((a.0.s0 - b.0.s0).abs() < 1e-6 && (a.0.s1 - b.0.s1).abs() < 1e-6);
    }
}

#[test]
fn r1_and_r3_are_mirror_images() {
    let w = pair();
    let (pm, pp) = choose_p(&w).unwrap();
    let (r1, r3) = build_r13(&w, pm, pp).unwrap();
    let mirror = |p: PhasePoint| PhasePoint::new(1.0 - p.x, -p.y);
    for i in 1..40 {
        for j in 1..40 {
            let p = PhasePoint::new(i as f64 / 40.0, 0.3 * (j as f64 / 40.0 - 0.5));
            let a = contains(&r1, p) == Membership::Outside;
            let b = contains(&r3, mirror(p)) == Membership::Outside;
            assert_eq!(a, b, "{p:?}");
        }
    }
}

#[test]
fn report_serializes() {
    let w = pair();
    let k = constants(&w, 1.1);
    let rep = rect_report(&w, &k).unwrap();
    let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["rects"].as_array().unwrap().len(), 4);
}
