//! Values pinned from an independent 40-digit evaluation, plus end-to-end
//! statistical checks of the simulator against the closed forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snsqkd::estimator::{analytic_yields, expected_bit_flip_error};
use snsqkd::model::{ChannelParams, ModelOptions, PhaseMode, ProtocolParams, WindowClass};
use snsqkd::oracle::{estimated_eph_upper, exact_eph, fock_class_yields};
use snsqkd::photonics::{acceptance_probability, click_distribution, effective_rates};
use snsqkd::simulator::Subset;
use snsqkd::Simulator;

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn both_class_yields_at_100_km() {
    let params = ProtocolParams::new(0.5, 0.3, 1);
    let ch = ChannelParams::at_distance(100.0, 0.2);
    let (left, right) = effective_rates(WindowClass::BBoth, &params, &ch, &ModelOptions::default()).unwrap();
    assert!((right - 1.488_865_315_317_598e-2).abs() < 1e-16, "{right:e}");
    assert!((left - 6.101_097_367_727_039e-2).abs() < 1e-16, "{left:e}");
    let fock = fock_class_yields(0.5, 0.0, &ch, 40).unwrap()[WindowClass::BBoth.index()];
    assert!((fock.right - right).abs() < 1e-15);
    assert!((fock.left - left).abs() < 1e-15);
}

#[test]
fn phase_flip_error_at_100_km() {
    let ch = ChannelParams::at_distance(100.0, 0.05);
    let golden = 0.218_738_479_326_306_29;
    let fine = exact_eph(0.5, &ch, 40).unwrap();
    let coarse = exact_eph(0.5, &ch, 30).unwrap();
    assert!((fine.e_ph - golden).abs() < 1e-12, "{}", fine.e_ph);
    assert!((coarse.e_ph - fine.e_ph).abs() < 1e-8);
    assert!((fine.s_xplus.left - 1.893_872_117_404_220e-2).abs() < 1e-15);
    assert!((fine.s_xminus.right - 7.682_711_681_654_034e-2).abs() < 1e-15);
    assert!(estimated_eph_upper(0.5, &ch).unwrap() >= fine.e_ph);
}

#[test]
fn click_distributions_are_normalised() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100_000 {
        let mut ch = ChannelParams::at_distance(rng.gen_range(0.0..400.0), rng.gen_range(0.0..0.5));
        ch.p_dark = 10f64.powf(rng.gen_range(-12.0..-2.0));
        ch.eta_det = rng.gen_range(0.01..1.0);
        let params = ProtocolParams::new(rng.gen_range(1e-6..3.0), 0.5, 1);
        let class = WindowClass::ALL[rng.gen_range(0..6)];
        let d = click_distribution(class, rng.gen_range(-3.2..3.2), &params, &ch);
        assert!((d.total() - 1.0).abs() < 1e-12, "{class:?} {d:?}");
        assert!(d.p_l_only >= 0.0 && d.p_r_only >= 0.0 && d.p_both >= 0.0 && d.p_none >= 0.0);
    }
}

#[test]
fn simulated_bit_flip_error_matches_analytic() {
    let params = ProtocolParams::new(0.4, 0.2, 4_000_000);
    let ch = ChannelParams::at_distance(50.0, 0.1);
    let opts = ModelOptions::default();
    let result = Simulator::new(params.clone(), ch.clone(), opts.clone()).unwrap().run(21);
    let e_z = expected_bit_flip_error(&analytic_yields(&params, &ch, &opts).unwrap(), &params).unwrap();
    let effective: u64 = WindowClass::REAL
        .iter()
        .map(|&c| result.tally.view(Some(Subset::V), c, false).effective())
        .sum();
    let observed = result.e_z_observed.unwrap();
    assert!((observed - e_z).abs() < 3.0 * sigma(e_z, effective), "{observed} vs {e_z}");
}

#[test]
fn post_selected_fraction_matches_quadrature() {
    let mut params = ProtocolParams::new(0.3, 0.5, 1_000_000);
    params.phase_mode = PhaseMode::PostSelection;
    params.lambda_ps = 0.1;
    let ch = ChannelParams::at_distance(20.0, 0.0);
    let tally = Simulator::new(params, ch, ModelOptions::default()).unwrap().run_tally(4);

    // Midpoint rule over delta in [-pi, pi) of the acceptance indicator.
    let nodes = 1 << 20;
    let step = std::f64::consts::TAU / nodes as f64;
    let hits = (0..nodes)
        .filter(|&i| {
            let delta = -std::f64::consts::PI + (i as f64 + 0.5) * step;
            1.0 - delta.cos().abs() <= 0.1
        })
        .count();
    let quadrature = hits as f64 / nodes as f64;
    let closed = acceptance_probability(0.1).unwrap();
    assert!((quadrature - closed).abs() < 1e-5);
    assert!((closed - 2.0 * 0.9f64.acos() / std::f64::consts::PI).abs() < 1e-15);

    let n = tally.total_windows();
    let frac = tally.total_accepted() as f64 / n as f64;
    assert!((frac - quadrature).abs() < 3.0 * sigma(quadrature, n), "{frac} vs {quadrature}");
}
