use ammfeelab_core::config::SweepConfig;
use ammfeelab_core::sim::fee_sweep;

/// Expected LP revenue of the sweep trade written out by hand: constant
/// product output, gross-volume relative loss in percent, `exp(−|r|)`.
fn expected_by_hand(c: &SweepConfig, fee_pct: f64) -> f64 {
    let f = fee_pct / 100.0;
    let e = c.amount_in * (1.0 - f);
    let out = c.reserve_b * e / (c.reserve_a + e);
    let gain = out * c.p_b - c.amount_in * c.p_a - c.alpha;
    let volume = out * c.p_b + c.amount_in * c.p_a;
    let r = 100.0 * gain / volume;
    (-r.abs()).exp() * c.amount_in * f * c.p_a
}

#[test]
fn closed_form_column_matches_hand_formula() {
    let c = SweepConfig {
        n_trials: 10_000,
        ..SweepConfig::default()
    };
    let curve = fee_sweep(&c).unwrap();
    assert_eq!(curve.points.len(), 201);
    for p in &curve.points {
        let want = expected_by_hand(&c, p.fee_pct);
        assert!((p.expected - want).abs() <= 1e-9 * want.max(1e-9), "{p:?} vs {want}");
    }
}

#[test]
fn zero_fee_earns_nothing_and_high_fee_collapses() {
    let c = SweepConfig {
        fee_grid_pct: Some(vec![0.0, 0.5, 10.0]),
        n_trials: 10_000,
        ..SweepConfig::default()
    };
    let curve = fee_sweep(&c).unwrap();
    assert_eq!(curve.points[0].expected, 0.0);
    assert_eq!(curve.points[0].mc_mean, 0.0);
    assert!(curve.points[2].expected < curve.points[1].expected);
    assert_eq!(curve.argmax.fee_pct, 0.5);
}

#[test]
fn monte_carlo_tracks_the_expectation() {
    let c = SweepConfig {
        fee_grid_pct: Some(vec![0.25, 1.0, 3.0]),
        n_trials: 20_000,
        seed: 5,
        ..SweepConfig::default()
    };
    for p in fee_sweep(&c).unwrap().points {
        assert!((p.mc_mean - p.expected).abs() <= 4.0 * p.mc_std, "{p:?}");
        assert!(p.mc_std > 0.0);
    }
}

#[test]
fn default_curve_has_an_interior_peak() {
    let curve = fee_sweep(&SweepConfig {
        n_trials: 1000,
        ..SweepConfig::default()
    })
    .unwrap();
    let first = curve.points.first().unwrap().fee_pct;
    let last = curve.points.last().unwrap().fee_pct;
    assert!(curve.argmax.fee_pct > first && curve.argmax.fee_pct < last);
}

#[test]
fn single_zero_grid() {
    let c = SweepConfig {
        fee_grid_pct: Some(vec![0.0]),
        n_trials: 10_000,
        ..SweepConfig::default()
    };
    let curve = fee_sweep(&c).unwrap();
    assert_eq!(curve.points.len(), 1);
    assert_eq!(curve.argmax.expected, 0.0);
}
