//! Brute-force verification in a truncated two-mode Fock space.
//!
//! Everything here is computed from state vectors and Born-rule
//! probabilities, independently of the closed forms in `photonics` and
//! `estimator`: the `|chi+>` decomposition, the equality of the Z~ and X
//! window density operators, the Cauchy bounds against arbitrary measurement
//! devices, and the true phase-flip error of the virtual X windows.

mod density;
mod fock;

pub use density::{trace_norm, DensityOperator};
pub use fock::{beamsplitter, coherent, poisson_tail, FockState, ModeState, MAX_TAIL_MASS};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{
    analytic_yields, chi_plus_coefficients, estimate_bounds, s_xplus_bounds, DetectorPair,
};
use crate::model::{
    arm_transmittance, ChannelParams, ModelOptions, PhaseMode, ProtocolParams, WindowClass,
};
use crate::photonics::click_distribution;
use crate::simulator::{Subset, WindowTally};

pub const DEFAULT_CUTOFF: usize = 40;

/// Largest rank of the random effects drawn for the Cauchy-bound experiment.
const MAX_POVM_RANK: usize = 8;

/// Named states of the protocol for one intensity, built on a common cutoff.
#[derive(Debug, Clone)]
pub struct NamedStates {
    pub mu: f64,
    pub cutoff: usize,
    pub vacuum: FockState,
    /// `|0, alpha_B>`
    pub bob_only: FockState,
    /// `|alpha_A, 0>`
    pub alice_only: FockState,
    /// `|alpha_A, alpha_B>`
    pub both: FockState,
    /// `|tilde alpha_A, tilde alpha_B>`, the non-vacuum parts normalised.
    pub tilde_both: FockState,
}

impl NamedStates {
    /// States with `alpha_A = sqrt(mu)` and `alpha_B = sqrt(mu) e^{i delta}`.
    pub fn new(mu: f64, delta: f64, cutoff: usize) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(invalid("mu", "must be >= 0"));
        }
        let a = coherent(Complex64::new(mu.sqrt(), 0.0), cutoff)?;
        let b = coherent(Complex64::from_polar(mu.sqrt(), delta), cutoff)?;
        let vac = ModeState::vacuum(cutoff);
        // |alpha> - <0|alpha>|0>, normalised; vacuum component zero by construction.
        let tilde = |s: &ModeState| {
            let rest = 1.0 - s.amplitudes[0].norm_sqr();
            let scale = if rest > 0.0 { 1.0 / rest.sqrt() } else { 0.0 };
            s.remove_vacuum(scale)
        };
        Ok(Self {
            mu,
            cutoff,
            vacuum: vac.tensor(&vac),
            bob_only: vac.tensor(&b),
            alice_only: a.tensor(&vac),
            both: a.tensor(&b),
            tilde_both: tilde(&a).tensor(&tilde(&b)),
        })
    }

    /// `(|0, alpha_B> + sign |alpha_A, 0>) / N` with the analytic
    /// `|N|^2 = 2 (1 + sign e^{-mu})`. `None` when the norm vanishes.
    pub fn chi(&self, sign: f64) -> Option<FockState> {
        let n_sq = 2.0 * (1.0 + sign * (-self.mu).exp());
        if n_sq <= 0.0 {
            return None;
        }
        let one = Complex64::new(1.0, 0.0);
        Some(
            FockState::combine(&[(one, &self.bob_only), (one * sign, &self.alice_only)])
                .scaled(1.0 / n_sq.sqrt()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCheck {
    /// `|| chi+ (direct) - (c0|0,0> + c1|a,a> - c2|~a,~a>) ||`
    pub residual: f64,
    /// `|<0,0| ~a, ~a>|`
    pub tilde_vacuum_overlap: f64,
    /// `| || chi+ || - 1 |`
    pub norm_error: f64,
    /// `|| chi+ - |0,0> ||`
    pub distance_to_vacuum: f64,
}

/// Rebuild `|chi+>` from its definition and from its three-term expansion.
pub fn verify_chi_decomposition(mu: f64, cutoff: usize) -> Result<ChiCheck> {
    let states = NamedStates::new(mu, 0.0, cutoff)?;
    let d = chi_plus_coefficients(mu)?;
    let direct = states.chi(1.0).expect("N+ never vanishes");
    let c = |x: f64| Complex64::new(x, 0.0);
    let expanded = FockState::combine(&[
        (c(d.c0), &states.vacuum),
        (c(d.c1), &states.both),
        (c(-d.c2), &states.tilde_both),
    ]);
    Ok(ChiCheck {
        residual: direct.distance(&expanded),
        tilde_vacuum_overlap: states.vacuum.inner(&states.tilde_both).norm(),
        norm_error: (direct.norm() - 1.0).abs(),
        distance_to_vacuum: direct.distance(&states.vacuum),
    })
}

/// `rho_Z~ = (|0,a><0,a| + |a,0><a,0|) / 2` and
/// `rho_X = (|N+|^2 rho_+ + |N-|^2 rho_-) / 4`.
pub fn window_density_operators(mu: f64, cutoff: usize) -> Result<(DensityOperator, DensityOperator)> {
    let s = NamedStates::new(mu, 0.0, cutoff)?;
    let rho_z = DensityOperator::new(vec![(0.5, s.bob_only.clone()), (0.5, s.alice_only.clone())]);
    let e = (-mu).exp();
    let mut members = Vec::new();
    for sign in [1.0, -1.0] {
        if let Some(chi) = s.chi(sign) {
            members.push((2.0 * (1.0 + sign * e) / 4.0, chi));
        }
    }
    Ok((rho_z, DensityOperator::new(members)))
}

/// Trace distance between the Z~-window and X-window source states.
pub fn verify_rho_equality(mu: f64, cutoff: usize) -> Result<f64> {
    let (z, x) = window_density_operators(mu, cutoff)?;
    Ok(z.trace_distance(&x))
}

/// `<0, alpha_B | alpha_A, 0>`, expected to equal `e^{-mu}` for any phases.
pub fn vacuum_cross_overlap(mu: f64, delta: f64, cutoff: usize) -> Result<Complex64> {
    let s = NamedStates::new(mu, delta, cutoff)?;
    Ok(s.bob_only.inner(&s.alice_only))
}

/// `(lower, upper)` bound rule under test, taking `(S_O, S_B, mu)`.
pub type BoundRule = fn(f64, f64, f64) -> Result<(f64, f64)>;

/// X+ bounds with the sign of the `c1 c2` cross term flipped; used to show the
/// containment experiment detects a wrong bound.
pub fn sign_flipped_bounds(s_o: f64, s_b: f64, mu: f64) -> Result<(f64, f64)> {
    let d = chi_plus_coefficients(mu)?;
    let (lo, hi) = s_xplus_bounds(s_o, s_b, mu)?;
    let term = 2.0 * d.c1 * d.c2 * s_b.sqrt();
    Ok(((lo + 2.0 * term).clamp(0.0, 1.0), (hi - 2.0 * term).clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub mu: f64,
    pub cutoff: usize,
    pub trials: usize,
    pub violations: usize,
    /// Largest amount by which the true yield left `[lower, upper]`.
    pub worst_excess: f64,
    /// Identity and null effects, checked before the random draws.
    pub trivial_ok: bool,
}

/// Containment of the exact `|chi+>` yield in the bounds for random
/// measurement devices, with the shipped bound rule.
pub fn verify_cauchy_bounds(mu: f64, trials: usize, seed: u64) -> Result<CauchyReport> {
    verify_cauchy_bounds_with(mu, trials, seed, DEFAULT_CUTOFF, s_xplus_bounds)
}

/// Containment experiment with an explicit bound rule.
///
/// Each trial draws a complex Ginibre matrix `A` of random rank `k <= 8` and
/// uses the effect `M = A^dag A / lambda_max(A A^dag)`, so `0 <= M <= I`.
/// Yields are Born-rule probabilities of `M` on `|0,0>`, `|alpha, alpha>` and
/// `|chi+>`.
pub fn verify_cauchy_bounds_with(
    mu: f64,
    trials: usize,
    seed: u64,
    cutoff: usize,
    rule: BoundRule,
) -> Result<CauchyReport> {
    if trials < 1 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let states = NamedStates::new(mu, 0.0, cutoff)?;
    let chi = states.chi(1.0).expect("N+ never vanishes");
    let tol = 1e-12;
    let contains = |s: f64, (lo, hi): (f64, f64)| lo - tol <= s && s <= hi + tol;
    let excess = |s: f64, (lo, hi): (f64, f64)| (lo - s).max(s - hi).max(0.0);

    let trivial_ok = contains(1.0, rule(1.0, 1.0, mu)?) && contains(0.0, rule(0.0, 0.0, mu)?);

    let d = states.vacuum.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst_excess: f64 = 0.0;
    for _ in 0..trials {
        let rank = rng.gen_range(1..=MAX_POVM_RANK);
        let a = DMatrix::<Complex64>::from_fn(rank, d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let gram = &a * a.adjoint();
        let lambda_max = gram.singular_values().max();
        let born = |s: &FockState| {
            let v = nalgebra::DVector::from_column_slice(&s.amplitudes);
            (&a * v).norm_squared() / lambda_max
        };
        let (s_o, s_b, s_chi) = (born(&states.vacuum), born(&states.both), born(&chi));
        let bounds = rule(s_o.min(1.0), s_b.min(1.0), mu)?;
        if !contains(s_chi, bounds) {
            violations += 1;
        }
        worst_excess = worst_excess.max(excess(s_chi, bounds));
    }
    Ok(CauchyReport {
        mu,
        cutoff,
        trials,
        violations,
        worst_excess,
        trivial_ok,
    })
}

/// Honest threshold detectors behind the beamsplitter, as effects diagonal in
/// the output port basis. Symmetric arm loss commutes with the beamsplitter,
/// so it is folded into the effects together with misalignment.
#[derive(Debug, Clone, Copy)]
pub struct FockDetectors {
    pub eta: f64,
    pub e_a: f64,
    pub p_dark: f64,
}

impl FockDetectors {
    pub fn new(ch: &ChannelParams) -> Result<Self> {
        if !ch.is_symmetric() {
            return Err(Error::Unsupported("Charlie at the midpoint"));
        }
        Ok(Self {
            eta: arm_transmittance(ch),
            e_a: ch.e_a,
            p_dark: ch.p_dark,
        })
    }

    /// `(P[left only], P[right only])` for a state at Charlie's input.
    pub fn single_clicks(&self, input: &FockState) -> DetectorPair {
        let out = beamsplitter(input);
        let (eta, e_a, pd) = (self.eta, self.e_a, self.p_dark);
        // A photon in port L reaches detector L w.p. eta (1 - e_a), detector R
        // w.p. eta e_a; mirrored for port R.
        let stay = 1.0 - eta * (1.0 - e_a);
        let cross = 1.0 - eta * e_a;
        let lost = 1.0 - eta;
        let c = out.cutoff;
        let pow = |x: f64| -> Vec<f64> { (0..=c).map(|n| x.powi(n as i32)).collect() };
        let (p_stay, p_cross, p_lost) = (pow(stay), pow(cross), pow(lost));
        let mut left = 0.0;
        let mut right = 0.0;
        for n_l in 0..=c {
            for n_r in 0..=(c - n_l) {
                let w = out.amplitude(n_l, n_r).norm_sqr();
                if w == 0.0 {
                    continue;
                }
                let none = p_lost[n_l] * p_lost[n_r];
                // P[R silent] - P[both silent], factored to keep dark-count
                // terms exact.
                let r_silent = p_cross[n_l] * p_stay[n_r];
                let l_silent = p_stay[n_l] * p_cross[n_r];
                left += w * (1.0 - pd) * ((r_silent - none) + pd * none);
                right += w * (1.0 - pd) * ((l_silent - none) + pd * none);
            }
        }
        DetectorPair { left, right }
    }
}

/// Single-click yields of every class computed in Fock space, in
/// [`WindowClass::ALL`] order.
pub fn fock_class_yields(mu: f64, delta: f64, ch: &ChannelParams, cutoff: usize) -> Result<[DetectorPair; 6]> {
    let det = FockDetectors::new(ch)?;
    let s = NamedStates::new(mu, delta, cutoff)?;
    let plus = s.chi(1.0).expect("N+ never vanishes");
    let minus = s.chi(-1.0);
    Ok([
        det.single_clicks(&s.alice_only),
        det.single_clicks(&s.bob_only),
        det.single_clicks(&s.both),
        det.single_clicks(&s.vacuum),
        det.single_clicks(&plus),
        minus.map(|m| det.single_clicks(&m)).unwrap_or_default(),
    ])
}

/// Largest absolute difference between the closed-form click model and the
/// Fock-space computation over all classes and both detectors.
pub fn photonics_discrepancy(mu: f64, ch: &ChannelParams, cutoff: usize) -> Result<f64> {
    let fock = fock_class_yields(mu, 0.0, ch, cutoff)?;
    let params = ProtocolParams::new(mu, 0.5, 1);
    let mut worst: f64 = 0.0;
    for (class, f) in WindowClass::ALL.iter().zip(fock) {
        let d = click_distribution(*class, 0.0, &params, ch);
        worst = worst.max((d.p_l_only - f.left).abs()).max((d.p_r_only - f.right).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EphExact {
    /// Probability that an X window is an X+ window, `(1 + e^{-mu})/2`.
    pub p_plus: f64,
    pub s_xplus: DetectorPair,
    pub s_xminus: DetectorPair,
    /// `(P+ S_X+^R + P- S_X-^L) / (P+ S_X+ + P- S_X-)`
    pub e_ph: f64,
}

/// True phase-flip error of the virtual X windows under honest detection.
pub fn exact_eph(mu: f64, ch: &ChannelParams, cutoff: usize) -> Result<EphExact> {
    let y = fock_class_yields(mu, 0.0, ch, cutoff)?;
    let (plus, minus) = (y[WindowClass::XPlus.index()], y[WindowClass::XMinus.index()]);
    let p_plus = 0.5 * (1.0 + (-mu).exp());
    let p_minus = 1.0 - p_plus;
    let effective = p_plus * plus.total() + p_minus * minus.total();
    if effective <= 0.0 {
        return Err(Error::UndefinedRate("no effective X windows"));
    }
    Ok(EphExact {
        p_plus,
        s_xplus: plus,
        s_xminus: minus,
        e_ph: (p_plus * plus.right + p_minus * minus.left) / effective,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EphReport {
    pub exact: EphExact,
    /// Ratio over the sampled virtual windows, when any were effective.
    pub sampled: Option<f64>,
    pub tally: WindowTally,
    pub cutoff: usize,
}

/// Run the virtual X-window protocol: each window is X+ with probability
/// `(1 + e^{-mu})/2`, else X-, and Charlie's outcome is drawn from the exact
/// Fock-space probabilities. Compensation mode only.
pub fn brute_force_eph(
    params: &ProtocolParams,
    ch: &ChannelParams,
    seed: u64,
    n_virtual_windows: u64,
) -> Result<EphReport> {
    brute_force_eph_at(params, ch, seed, n_virtual_windows, DEFAULT_CUTOFF)
}

pub fn brute_force_eph_at(
    params: &ProtocolParams,
    ch: &ChannelParams,
    seed: u64,
    n_virtual_windows: u64,
    cutoff: usize,
) -> Result<EphReport> {
    params.validate()?;
    ch.validate()?;
    if params.phase_mode != PhaseMode::Compensation {
        return Err(Error::Unsupported("compensation mode"));
    }
    let exact = exact_eph(params.mu, ch, cutoff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = WindowTally::zero();
    for _ in 0..n_virtual_windows {
        let (class, y) = if rng.gen::<f64>() < exact.p_plus {
            (WindowClass::XPlus, exact.s_xplus)
        } else {
            (WindowClass::XMinus, exact.s_xminus)
        };
        let u = rng.gen::<f64>();
        let (l, r) = (u < y.left, u >= y.left && u < y.left + y.right);
        tally.record(Subset::U, class, l, r, None);
    }
    let plus = tally.view(None, WindowClass::XPlus, false);
    let minus = tally.view(None, WindowClass::XMinus, false);
    let effective = plus.effective() + minus.effective();
    let sampled = (effective > 0).then(|| (plus.right + minus.left) as f64 / effective as f64);
    Ok(EphReport {
        exact,
        sampled,
        tally,
        cutoff,
    })
}

/// Phase-flip bound the estimator derives from the honest model's yields.
pub fn estimated_eph_upper(mu: f64, ch: &ChannelParams) -> Result<f64> {
    let params = ProtocolParams::new(mu, 0.5, 1);
    let opts = ModelOptions::default();
    let yields = analytic_yields(&params, ch, &opts)?;
    Ok(estimate_bounds(&yields, mu, opts.phase_prefactor)?.e_ph_upper)
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub cutoff: usize,
    pub coarse_cutoff: usize,
    pub identity_mus: Vec<f64>,
    pub cauchy_mus: Vec<f64>,
    pub cauchy_trials: usize,
    pub seed: u64,
    pub eph_distances_km: Vec<f64>,
    pub eph_mus: Vec<f64>,
    pub eph_misalignments: Vec<f64>,
    /// Swap in [`sign_flipped_bounds`] for the containment experiment.
    pub inject_sign_error: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            coarse_cutoff: 30,
            identity_mus: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            cauchy_mus: vec![0.2, 0.5, 1.0],
            cauchy_trials: 1000,
            seed: 2024,
            eph_distances_km: vec![0.0, 100.0, 200.0],
            eph_mus: vec![0.01, 0.1, 0.5],
            eph_misalignments: vec![0.0, 0.05, 0.2],
            inject_sign_error: false,
        }
    }
}

/// Run every oracle identity and soundness check.
pub fn run_suite(cfg: &SuiteConfig, base_channel: &ChannelParams) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut push = |name: String, value: f64, tolerance: f64, passed: bool| {
        checks.push(CheckResult {
            name,
            value,
            tolerance,
            passed,
        });
    };

    for &mu in &cfg.identity_mus {
        let chi = verify_chi_decomposition(mu, cfg.cutoff)?;
        push(format!("chi+ decomposition residual, mu={mu}"), chi.residual, 1e-10, chi.residual < 1e-10);
        push(
            format!("<0,0|~a,~a> vanishes, mu={mu}"),
            chi.tilde_vacuum_overlap,
            0.0,
            chi.tilde_vacuum_overlap == 0.0,
        );
        push(format!("|chi+| = 1, mu={mu}"), chi.norm_error, 1e-10, chi.norm_error < 1e-10);
        let td = verify_rho_equality(mu, cfg.cutoff)?;
        push(format!("rho_Z~ = rho_X trace distance, mu={mu}"), td, 1e-10, td < 1e-10);
        let ov = vacuum_cross_overlap(mu, 0.7, cfg.cutoff)?;
        let err = (ov - Complex64::new((-mu).exp(), 0.0)).norm();
        push(format!("<0,a_B|a_A,0> = e^-mu, mu={mu}"), err, 1e-12, err < 1e-12);
        let d = chi_plus_coefficients(mu)?;
        let sum_err = (d.n_plus_sq / 4.0 + d.n_minus_sq / 4.0 - 1.0).abs();
        push(format!("|N+|^2/4 + |N-|^2/4 = 1, mu={mu}"), sum_err, f64::EPSILON, sum_err <= f64::EPSILON);
    }

    let rule: BoundRule = if cfg.inject_sign_error {
        sign_flipped_bounds
    } else {
        s_xplus_bounds
    };
    for (i, &mu) in cfg.cauchy_mus.iter().enumerate() {
        let rep = verify_cauchy_bounds_with(mu, cfg.cauchy_trials, cfg.seed + i as u64, cfg.cutoff, rule)?;
        push(
            format!("Cauchy containment, {} POVMs, mu={mu}", rep.trials),
            rep.violations as f64,
            0.0,
            rep.violations == 0 && rep.trivial_ok,
        );
    }

    for &l in &cfg.eph_distances_km {
        for &mu in &cfg.eph_mus {
            for &e_a in &cfg.eph_misalignments {
                let mut ch = base_channel.clone();
                ch.distance_km = l;
                ch.e_a = e_a;
                let fine = exact_eph(mu, &ch, cfg.cutoff)?;
                let coarse = exact_eph(mu, &ch, cfg.coarse_cutoff)?;
                let bound = estimated_eph_upper(mu, &ch)?;
                let tag = format!("L={l} mu={mu} e_a={e_a}");
                push(
                    format!("e_ph true <= bound, {tag}"),
                    fine.e_ph - bound,
                    0.0,
                    fine.e_ph <= bound,
                );
                let drift = (fine.e_ph - coarse.e_ph).abs();
                push(
                    format!("e_ph cutoff {} vs {}, {tag}", cfg.coarse_cutoff, cfg.cutoff),
                    drift,
                    1e-8,
                    drift < 1e-8,
                );
                let gap = photonics_discrepancy(mu, &ch, cfg.cutoff)?;
                push(format!("closed form vs Fock clicks, {tag}"), gap, 1e-12, gap < 1e-12);
            }
        }
    }

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { checks, all_passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_decomposition_holds() {
        let c = verify_chi_decomposition(0.5, 40).unwrap();
        assert!(c.residual < 1e-10, "{c:?}");
        assert_eq!(c.tilde_vacuum_overlap, 0.0);
        let c = verify_chi_decomposition(1e-10, 40).unwrap();
        assert!(c.residual < 1e-10);
        assert!(c.distance_to_vacuum < 1e-4);
    }

    #[test]
    fn rho_equality_and_vacuum_limit() {
        assert!(verify_rho_equality(0.5, 40).unwrap() < 1e-10);
        assert_eq!(verify_rho_equality(0.0, 10).unwrap(), 0.0);
        let (_, x) = window_density_operators(0.5, 40).unwrap();
        let p_plus = x.members[0].0;
        assert!((p_plus - (1.0 + (-0.5f64).exp()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn inadequate_cutoff_is_reported() {
        assert!(matches!(
            verify_chi_decomposition(1.0, 10),
            Err(Error::TruncationInadequate { .. })
        ));
    }

    #[test]
    fn trivial_povms_contained() {
        let r = verify_cauchy_bounds_with(0.5, 1, 1, 12, s_xplus_bounds).unwrap();
        assert!(r.trivial_ok);
    }

    #[test]
    fn phase_errors_come_from_multiphoton_terms() {
        let mut ch = ChannelParams::at_distance(0.0, 0.0);
        ch.p_dark = 0.0;
        let weak = exact_eph(1e-3, &ch, 20).unwrap();
        let strong = exact_eph(0.3, &ch, 30).unwrap();
        assert!(weak.e_ph < 1e-3, "{weak:?}");
        assert!(strong.e_ph > 10.0 * weak.e_ph);
    }

    #[test]
    fn sampled_eph_tracks_exact() {
        let params = ProtocolParams::new(0.5, 0.5, 1);
        let ch = ChannelParams::at_distance(20.0, 0.1);
        let r = brute_force_eph_at(&params, &ch, 3, 400_000, 25).unwrap();
        let n = (r.tally.view(None, WindowClass::XPlus, false).effective()
            + r.tally.view(None, WindowClass::XMinus, false).effective()) as f64;
        let e = r.exact.e_ph;
        let sigma = (e * (1.0 - e) / n).sqrt();
        assert!((r.sampled.unwrap() - e).abs() < 4.0 * sigma);
    }

    #[test]
    fn closed_form_clicks_match_fock_space() {
        for (l, e_a) in [(0.0, 0.0), (50.0, 0.1), (150.0, 0.3)] {
            let ch = ChannelParams::at_distance(l, e_a);
            assert!(photonics_discrepancy(0.4, &ch, 30).unwrap() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_channel_unsupported() {
        let mut ch = ChannelParams::at_distance(10.0, 0.0);
        ch.charlie_position = 0.3;
        assert!(matches!(FockDetectors::new(&ch), Err(Error::Unsupported(_))));
    }
}
