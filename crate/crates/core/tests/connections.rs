use nagumo_core::flow::StepProfile;
use nagumo_core::itinerary::Itinerary;
use nagumo_core::manifolds::*;
use nagumo_core::ode::IntegratorOptions;
use nagumo_core::phase::{Anchor, PhasePoint};
use nagumo_core::stretch::{EpsMode, Setup};
use nagumo_core::Error;

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn setup() -> Setup {
    Setup::new(nagumo_core::flow::WeightPair::new(0.4, 0.6).unwrap(), 1.1, &opts()).unwrap()
}

// -x⁴/4 + (1+a)x³/3 - a x²/2, written out independently of the library
fn big_f(a: f64, x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    -x.powi(4) / 4.0 + (1.0 + a) * x.powi(3) / 3.0 - a * x * x / 2.0
}

fn energy(a: f64, p: PhasePoint) -> f64 {
    0.5 * p.y * p.y + big_f(a, p.x)
}

/// K = 0: switches at t₋₁ = 0, t₀ = g, t₁ = 2g.
fn k0_profile(gap: f64) -> StepProfile {
    StepProfile::from_gaps(0.4, 0.6, 0.0, &[gap, gap], -1, 1.0).unwrap()
}

fn k0(gap: f64, kind: ConnectionKind) -> Connection {
    let itin = Itinerary::new(vec![], 1).unwrap();
    connect_in_rects(&k0_profile(gap), &itin, kind, &setup().constants, &opts()).unwrap()
}

#[test]
fn heteroclinic_front_without_blocks() {
    let c = k0(5.0, ConnectionKind::Heteroclinic);
    assert!(c.passed);
    assert_eq!(c.total_zeros, 0);
    // monotone front
    let s = c.realization.trajectory.samples();
    assert!(s.windows(2).all(|w| w[1].1.x >= w[0].1.x));
    // on Γ¹₊∞ after the last switch: the saddle level of a₊ with y > 0
    let sat = big_f(0.6, 1.0);
    assert!((energy(0.6, c.section_point) - sat).abs() < 1e-9);
    assert!(c.section_point.y > 0.0 && c.section_point.x < 1.0);
    for (tail, rate) in [(&c.left, 0.4f64.sqrt()), (&c.right, 0.4f64.sqrt())] {
        assert!(tail.passed);
        assert!((tail.fitted_rate - rate).abs() < 1e-3 * rate, "{tail:?}");
        assert!(tail.residual < TAIL_RESIDUAL_TOL);
    }
    assert_eq!(c.right.saddle, Anchor::One);
    let text = serde_json::to_string(&c).unwrap();
    let back: Connection = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
}

#[test]
fn energy_is_conserved_on_each_frozen_piece() {
    let c = k0(10.0, ConnectionKind::Heteroclinic);
    let tr = &c.realization.trajectory;
    // a₋ up to 0, a₊ on [0,10), a₋ on [10,20), a₊ after
    let pieces = [(0.4, tr.t_begin(), 0.0), (0.6, 0.0, 10.0), (0.4, 10.0, 20.0), (0.6, 20.0, tr.t_final())];
    for (a, ta, tb) in pieces {
        let e0 = energy(a, tr.point_at(ta));
        for i in 1..=50 {
            let t = ta + (tb - ta) * i as f64 / 50.0;
            assert!((energy(a, tr.point_at(t)) - e0).abs() < 1e-9, "a = {a}, t = {t}");
        }
    }
    // the left tail is the zero level of a₋
    assert!(energy(0.4, tr.point_at(0.0)).abs() < 1e-9);
}

#[test]
fn homoclinic_turns_once_on_the_last_leg() {
    let c = k0(10.0, ConnectionKind::Homoclinic);
    assert!(c.passed);
    assert_eq!(c.last_leg_zeros, 1);
    assert_eq!(c.right.saddle, Anchor::Zero);
    assert!((c.right.fitted_rate - 0.6f64.sqrt()).abs() < 1e-3);
    // back on the zero level of a₊ from the side x > 0, y < 0
    assert!(energy(0.6, c.section_point).abs() < 1e-9);
    assert!(c.section_point.x > 0.0 && c.section_point.y < 0.0);
    let tr = &c.realization.trajectory;
    let bad: Vec<_> = tr.samples().iter().filter(|(_, p)| !(p.x > 0.0 && p.x < 1.0)).collect();
    assert!(bad.is_empty(), "{:?} of {}", &bad[..bad.len().min(5)], tr.samples().len());
}

#[test]
fn longer_gaps_still_connect() {
    let c = k0(40.0, ConnectionKind::Heteroclinic);
    assert!(c.passed);
    // the front idles at the origin through the a₊ leg
    assert!(c.realization.trajectory.point_at(40.0).x < 1e-6);
}

#[test]
fn profile_shape_is_checked() {
    let itin = Itinerary::new(vec![], 1).unwrap();
    let k = setup().constants;
    let hc = ConnectionKind::Heteroclinic;
    let shifted = StepProfile::from_gaps(0.4, 0.6, 0.0, &[5.0, 5.0], 0, 1.0).unwrap();
    assert!(matches!(connect_in_rects(&shifted, &itin, hc, &k, &opts()), Err(Error::Domain(_))));
    let long = StepProfile::from_gaps(0.4, 0.6, 0.0, &[5.0, 5.0, 5.0], -1, 1.0).unwrap();
    assert!(matches!(connect_in_rects(&long, &itin, hc, &k, &opts()), Err(Error::Domain(_))));
}

#[test]
fn threshold_in_connection_mode() {
    let s = setup();
    let eps_star = s.thresholds.eps_star(1, 1.0, EpsMode::Connection).unwrap();
    let none = Itinerary::new(vec![], 1).unwrap();
    let p = StepProfile::from_gaps(0.4, 0.6, 0.0, &[1.0, 1.0], -1, 1.1 * eps_star).unwrap();
    let r = connect(&p, &none, ConnectionKind::Heteroclinic, &opts());
    assert!(matches!(r, Err(Error::ThresholdViolation { .. })));
    // one block below the threshold needs q₊ finer than an f64 abscissa
    let one = Itinerary::new(vec![(1, 1)], 1).unwrap();
    let p = StepProfile::from_gaps(0.4, 0.6, 0.0, &[1.0; 8], -1, 0.9 * eps_star).unwrap();
    match connect(&p, &one, ConnectionKind::Homoclinic, &opts()) {
        Err(Error::QNotFound(m)) => assert!(m.contains("f64"), "{m}"),
        other => panic!("{other:?}"),
    }
}
