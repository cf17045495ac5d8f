//! Security analysis from observable statistics.
//!
//! The X+ yield cannot be observed directly. Writing
//! `|chi+> = c0 |0,0> + c1 |alpha_A, alpha_B> + c2 |phi_2>` and bounding the
//! interference terms with the Cauchy inequality gives upper and lower bounds
//! on it from the O-window and B-window yields alone. Those bounds, together
//! with the Z~ yields, bound the phase-flip error rate of the untagged bits;
//! the tagged model then turns the two error rates into a key rate.

mod optimize;

pub use optimize::{optimize, OptimizeResult, Optimizer, OptimizerGrid};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ChannelParams, ModelOptions, PhaseFlipPrefactor, PhaseMode, ProtocolParams, WindowClass};
use crate::photonics::{acceptance_probability, effective_rates};

/// A yield per detector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorPair {
    pub left: f64,
    pub right: f64,
}

impl DetectorPair {
    pub fn total(&self) -> f64 {
        self.left + self.right
    }
}

/// Class-level single-click yields `S_y^d`.
///
/// This is the only window data the estimator consumes: aggregates over
/// disclosed windows, with no per-window information.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct YieldSet {
    pub ztilde: DetectorPair,
    pub both: DetectorPair,
    pub neither: DetectorPair,
}

impl YieldSet {
    fn validate(&self) -> Result<()> {
        for (name, p) in [("ztilde", self.ztilde), ("both", self.both), ("neither", self.neither)] {
            for v in [p.left, p.right] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid("yields", format!("{name} yield {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Binary entropy `H(x) = -x log2 x - (1-x) log2 (1-x)`, with `H(0) = H(1) = 0`.
pub fn entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid("x", format!("entropy argument {x} outside [0, 1]")));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// Expansion of `|chi+>` over `|0,0>`, `|alpha_A, alpha_B>` and the
/// remainder state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiDecomposition {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `|N+|^2 = 2 (1 + e^{-mu})`
    pub n_plus_sq: f64,
    /// `|N-|^2 = 2 (1 - e^{-mu})`
    pub n_minus_sq: f64,
}

pub fn chi_plus_coefficients(mu: f64) -> Result<ChiDecomposition> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid("mu", format!("must be > 0, got {mu}")));
    }
    let e = (-mu).exp();
    let one_minus_e = -(-mu).exp_m1();
    let root = (2.0 * (1.0 + e)).sqrt();
    let half = (-mu / 2.0).exp();
    Ok(ChiDecomposition {
        c0: half / root,
        c1: 1.0 / (half * root),
        c2: one_minus_e / (half * root),
        n_plus_sq: 2.0 * (1.0 + e),
        n_minus_sq: 2.0 * one_minus_e,
    })
}

/// Unclamped Cauchy bounds; callers decide how to clamp.
fn raw_bounds(c0: f64, c1: f64, c2: f64, s0: f64, s1: f64) -> (f64, f64) {
    let (c0, c1, c2) = (c0.abs(), c1.abs(), c2.abs());
    let base = c0 * c0 * s0 + c1 * c1 * s1;
    let cross =
        2.0 * c0 * c1 * (s0 * s1).sqrt() + 2.0 * c0 * c2 * s0.sqrt() + 2.0 * c1 * c2 * s1.sqrt();
    (base - cross, base + c2 * c2 + cross)
}

fn check_yield(name: &'static str, s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(invalid(name, format!("yield {s} outside [0, 1]")))
    }
}

/// Bounds on the yield of `c0|phi0> + c1|phi1> + c2|phi2>` given the yields of
/// `|phi0>` and `|phi1>`, clamped to `[0, 1]`.
pub fn yield_bounds_generic(c0: f64, c1: f64, c2: f64, s_phi0: f64, s_phi1: f64) -> Result<(f64, f64)> {
    check_yield("s_phi0", s_phi0)?;
    check_yield("s_phi1", s_phi1)?;
    if ![c0, c1, c2].iter().all(|c| c.is_finite()) {
        return Err(invalid("coefficients", "must be finite"));
    }
    let (lo, hi) = raw_bounds(c0, c1, c2, s_phi0, s_phi1);
    Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

/// Explicit X+ bound formulas in terms of the O-window and B-window yields of
/// one detector. Returns `(lower, upper)` clamped to `[0, 1]`.
pub fn s_xplus_bounds(s_o: f64, s_b: f64, mu: f64) -> Result<(f64, f64)> {
    check_yield("s_o", s_o)?;
    check_yield("s_b", s_b)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid("mu", format!("must be > 0, got {mu}")));
    }
    let (lo, hi) = s_xplus_raw(s_o, s_b, mu);
    Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

fn s_xplus_raw(s_o: f64, s_b: f64, mu: f64) -> (f64, f64) {
    let e = (-mu).exp();
    let g = -(-mu).exp_m1();
    let pre = 1.0 / (2.0 * (1.0 + e));
    let main = e * s_o + s_b / e;
    let cross = 2.0 * (s_o * s_b).sqrt() + 2.0 * g * s_o.sqrt() + 2.0 * g / e * s_b.sqrt();
    (pre * (main - cross), pre * (main + g * g / e + cross))
}

/// Upper bound on the phase-flip error rate of the untagged bits, clamped to
/// `[0, 1]`. `S_Z~ = S_Z~^L + S_Z~^R`.
pub fn phase_flip_upper(
    s_ztilde_l: f64,
    s_ztilde_r: f64,
    s_xplus_upper_r: f64,
    s_xplus_lower_l: f64,
    mu: f64,
    prefactor: PhaseFlipPrefactor,
) -> Result<f64> {
    for (name, s) in [
        ("s_ztilde_l", s_ztilde_l),
        ("s_ztilde_r", s_ztilde_r),
        ("s_xplus_upper_r", s_xplus_upper_r),
        ("s_xplus_lower_l", s_xplus_lower_l),
    ] {
        check_yield(name, s)?;
    }
    let denom = 2.0 * (s_ztilde_l + s_ztilde_r);
    if denom <= 0.0 {
        return Err(Error::UndefinedRate("no effective Z~ windows"));
    }
    let num = prefactor.value(mu) * (s_xplus_upper_r - s_xplus_lower_l) + 2.0 * s_ztilde_l;
    Ok((num / denom).clamp(0.0, 1.0))
}

/// Everything derived from one set of observed yields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub s_xplus_upper_r: f64,
    pub s_xplus_lower_l: f64,
    pub e_ph_upper: f64,
    /// How many of the three outputs were clamped into `[0, 1]`.
    pub clamp_events: u32,
    pub yields: YieldSet,
    pub mu: f64,
}

/// Bound the X+ yields and the phase-flip error from observed yields.
pub fn estimate_bounds(yields: &YieldSet, mu: f64, prefactor: PhaseFlipPrefactor) -> Result<BoundSet> {
    yields.validate()?;
    let (_, upper_r) = s_xplus_bounds(yields.neither.right, yields.both.right, mu)?;
    let (lower_l, _) = s_xplus_bounds(yields.neither.left, yields.both.left, mu)?;
    let mut clamp_events = 0;
    let (raw_lo, _) = s_xplus_raw(yields.neither.left, yields.both.left, mu);
    let (_, raw_hi) = s_xplus_raw(yields.neither.right, yields.both.right, mu);
    clamp_events += u32::from(raw_lo != lower_l) + u32::from(raw_hi != upper_r);
    let e_ph_upper = phase_flip_upper(
        yields.ztilde.left,
        yields.ztilde.right,
        upper_r,
        lower_l,
        mu,
        prefactor,
    )?;
    let raw_eph = (prefactor.value(mu) * (upper_r - lower_l) + 2.0 * yields.ztilde.left)
        / (2.0 * yields.ztilde.total());
    clamp_events += u32::from(raw_eph != e_ph_upper);
    Ok(BoundSet {
        s_xplus_upper_r: upper_r,
        s_xplus_lower_l: lower_l,
        e_ph_upper,
        clamp_events,
        yields: *yields,
        mu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub e_z: f64,
    pub e_ph_upper: f64,
    pub s_ztilde: f64,
    pub s_total: f64,
    /// Fraction of windows kept by post-selection (1 in compensation mode).
    pub acceptance: f64,
    pub n_f: f64,
    pub rate_per_window: f64,
    pub no_key: bool,
    pub params: ProtocolParams,
}

/// Overall effective rate `S_tot = P(Z~) S_Z~ + P(B) S_B + P(O) S_O`.
pub fn total_effective(yields: &YieldSet, params: &ProtocolParams) -> f64 {
    params.ztilde_prior() * yields.ztilde.total()
        + params.both_prior() * yields.both.total()
        + params.neither_prior() * yields.neither.total()
}

/// Bit-flip error rate implied by class yields and priors.
pub fn expected_bit_flip_error(yields: &YieldSet, params: &ProtocolParams) -> Result<f64> {
    let total = total_effective(yields, params);
    if total <= 0.0 {
        return Err(Error::UndefinedRate("no effective windows"));
    }
    Ok((params.both_prior() * yields.both.total() + params.neither_prior() * yields.neither.total()) / total)
}

/// Tagged-model key rate per window:
/// `P(Z~) S_Z~ (1 - H(e_ph)) - f S_tot H(E_Z)`, scaled by the post-selection
/// acceptance. Error rates at or above 1/2 count as full entropy.
pub fn key_rate(
    yields: &YieldSet,
    e_z: f64,
    e_ph_upper: f64,
    params: &ProtocolParams,
    acceptance: f64,
    subtract_test_windows: bool,
) -> Result<KeyRateReport> {
    yields.validate()?;
    check_yield("e_z", e_z)?;
    check_yield("e_ph_upper", e_ph_upper)?;
    check_yield("acceptance", acceptance)?;
    let h = |x: f64| entropy(x.min(0.5));
    let s_ztilde = yields.ztilde.total();
    let s_total = total_effective(yields, params);
    let sifted = params.ztilde_prior() * s_ztilde;
    let raw = acceptance * (sifted * (1.0 - h(e_ph_upper)?) - params.f * s_total * h(e_z)?);
    let no_key = raw.is_nan() || raw <= 0.0;
    let rate_per_window = if no_key { 0.0 } else { raw };
    let pool = if subtract_test_windows {
        1.0 - params.test_fraction_v
    } else {
        1.0
    };
    Ok(KeyRateReport {
        e_z,
        e_ph_upper,
        s_ztilde,
        s_total,
        acceptance,
        n_f: params.n_windows as f64 * pool * rate_per_window,
        rate_per_window,
        no_key,
        params: params.clone(),
    })
}

/// Yields the honest-device model predicts for every real class.
pub fn analytic_yields(params: &ProtocolParams, ch: &ChannelParams, opts: &ModelOptions) -> Result<YieldSet> {
    let pair = |class| -> Result<DetectorPair> {
        let (left, right) = effective_rates(class, params, ch, opts)?;
        Ok(DetectorPair { left, right })
    };
    let a = pair(WindowClass::ZTildeA)?;
    let b = pair(WindowClass::ZTildeB)?;
    Ok(YieldSet {
        ztilde: DetectorPair {
            left: 0.5 * (a.left + b.left),
            right: 0.5 * (a.right + b.right),
        },
        both: pair(WindowClass::BBoth)?,
        neither: pair(WindowClass::ONeither)?,
    })
}

/// Post-selection acceptance for the protocol's phase mode.
pub fn acceptance(params: &ProtocolParams) -> Result<f64> {
    match params.phase_mode {
        PhaseMode::Compensation => Ok(1.0),
        PhaseMode::PostSelection => acceptance_probability(params.lambda_ps),
    }
}

/// Analysis of observed statistics: bounds, then key rate.
pub fn analyze(
    yields: &YieldSet,
    e_z: f64,
    params: &ProtocolParams,
    opts: &ModelOptions,
) -> Result<(BoundSet, KeyRateReport)> {
    let bounds = estimate_bounds(yields, params.mu, opts.phase_prefactor)?;
    let report = key_rate(
        yields,
        e_z,
        bounds.e_ph_upper,
        params,
        acceptance(params)?,
        opts.subtract_test_windows,
    )?;
    Ok((bounds, report))
}

/// Full analytic pipeline: model yields, bit-flip error, bounds, key rate.
pub fn evaluate(
    params: &ProtocolParams,
    ch: &ChannelParams,
    opts: &ModelOptions,
) -> Result<(BoundSet, KeyRateReport)> {
    params.validate()?;
    ch.validate()?;
    let yields = analytic_yields(params, ch, opts)?;
    let e_z = expected_bit_flip_error(&yields, params)?;
    analyze(&yields, e_z, params, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.5).unwrap(), 1.0);
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        // -0.2 log2 0.2 - 0.8 log2 0.8
        assert!((entropy(0.2).unwrap() - 0.721_928_094_887_362_3).abs() < 1e-15);
        assert!(entropy(-0.1).is_err());
        assert!(entropy(1.0 + 1e-12).is_err());
    }

    #[test]
    fn chi_coefficients_limits_and_normalisations() {
        let d = chi_plus_coefficients(1e-9).unwrap();
        assert!(d.c2 < 1e-8);
        assert!(d.n_minus_sq < 1e-8);
        for mu in [1e-6, 0.1, 0.5, 1.0, 3.0] {
            let d = chi_plus_coefficients(mu).unwrap();
            assert!((d.n_plus_sq / 4.0 + d.n_minus_sq / 4.0 - 1.0).abs() < 1e-15);
            assert!((d.n_plus_sq - 2.0 * (1.0 + (-mu).exp())).abs() < 1e-15);
        }
        assert!(chi_plus_coefficients(0.0).is_err());
        assert!(chi_plus_coefficients(-1.0).is_err());
    }

    #[test]
    fn generic_bounds_degenerate_cases() {
        let (lo, hi) = yield_bounds_generic(0.3, 0.6, 0.2, 0.0, 0.0).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.04).abs() < 1e-17);

        let s = 0.01;
        let (lo, hi) = yield_bounds_generic(0.3, 0.6, 0.0, s, s).unwrap();
        assert!((hi - 0.81 * s).abs() < 1e-15);
        assert!((lo - 0.09 * s).abs() < 1e-15);
        assert!(yield_bounds_generic(0.3, 0.6, 0.0, 1.5, s).is_err());
    }

    #[test]
    fn xplus_bounds_vanishing_yields() {
        let mu: f64 = 0.5;
        let e = (-mu).exp();
        let (lo, hi) = s_xplus_bounds(0.0, 0.0, mu).unwrap();
        assert_eq!(lo, 0.0);
        let expected = (1.0 - e).powi(2) / (2.0 * e * (1.0 + e));
        assert!((hi - expected).abs() < 1e-15);
    }

    #[test]
    fn xplus_bounds_golden() {
        // mu = 0.5, S_O = 1e-11, S_B = 1e-4, evaluated independently with
        // 50-digit arithmetic (mpmath).
        let (lo, hi) = s_xplus_bounds(1e-11, 1e-4, 0.5).unwrap();
        assert!((hi - 8.353_210_631_288_880e-2).abs() < 1e-15, "{hi:e}");
        assert_eq!(lo, 0.0);
        let (raw_lo, _) = s_xplus_raw(1e-11, 1e-4, 0.5);
        assert!((raw_lo - -3.987_507_168_808_625e-3).abs() < 1e-15, "{raw_lo:e}");
    }

    #[test]
    fn phase_flip_trivial_limits() {
        let mu = 0.5;
        let p = PhaseFlipPrefactor::default();
        assert_eq!(phase_flip_upper(0.0, 0.01, 0.3, 0.3, mu, p).unwrap(), 0.0);
        assert_eq!(phase_flip_upper(0.01, 0.01, 0.2, 0.2, mu, p).unwrap(), 0.5);
        assert!(matches!(
            phase_flip_upper(0.0, 0.0, 0.2, 0.1, mu, p),
            Err(Error::UndefinedRate(_))
        ));
    }

    #[test]
    fn key_rate_limits() {
        let params = ProtocolParams::new(0.1, 0.2, 1_000);
        let y = YieldSet {
            ztilde: DetectorPair { left: 0.01, right: 0.01 },
            both: DetectorPair { left: 0.0, right: 0.0 },
            neither: DetectorPair { left: 0.0, right: 0.0 },
        };
        let r = key_rate(&y, 0.0, 0.0, &params, 1.0, false).unwrap();
        assert!((r.rate_per_window - params.ztilde_prior() * 0.02).abs() < 1e-17);
        assert!(!r.no_key);
        assert!((r.n_f - 1000.0 * r.rate_per_window).abs() < 1e-12);

        let r = key_rate(&y, 0.0, 0.5, &params, 1.0, false).unwrap();
        assert_eq!(r.rate_per_window, 0.0);
        assert!(r.no_key);
        let r = key_rate(&y, 0.0, 0.7, &params, 1.0, false).unwrap();
        assert!(r.no_key);
        let r = key_rate(&y, 0.35, 0.0, &params, 1.0, false).unwrap();
        assert!(r.no_key);
    }

    #[test]
    fn observed_key_rate_is_below_sifted_rate() {
        let ch = ChannelParams::at_distance(100.0, 0.05);
        let best = optimize(&ch, 1.1, PhaseMode::Compensation).unwrap();
        let (_, r) = evaluate(&best.report.params, &ch, &ModelOptions::default()).unwrap();
        let params = r.params.clone();
        assert!(r.rate_per_window > 0.0);
        assert!(r.rate_per_window <= params.ztilde_prior() * r.s_ztilde);
    }

    #[test]
    fn outline_prefactor_is_selectable() {
        let params = ProtocolParams::new(0.01, 0.05, 1);
        let ch = ChannelParams::at_distance(100.0, 0.05);
        let mut opts = ModelOptions::default();
        let (a, _) = evaluate(&params, &ch, &opts).unwrap();
        opts.phase_prefactor = PhaseFlipPrefactor::OnePlusExpMinusTwoMu;
        let (b, _) = evaluate(&params, &ch, &opts).unwrap();
        assert_ne!(a.e_ph_upper, b.e_ph_upper);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn specialisation_matches_generic(s_o in 0.0f64..=1.0, s_b in 0.0f64..=1.0, mu in 1e-4f64..3.0) {
            let d = chi_plus_coefficients(mu).unwrap();
            let g = raw_bounds(d.c0, d.c1, d.c2, s_o, s_b);
            let x = s_xplus_raw(s_o, s_b, mu);
            let scale = 1.0f64.max(g.1.abs());
            prop_assert!((g.0 - x.0).abs() <= 1e-12 * scale);
            prop_assert!((g.1 - x.1).abs() <= 1e-12 * scale);
        }
    }
}
