//! Closed-form detection model for Charlie's interferometer.
//!
//! Coherent amplitudes arrive attenuated by the arm transmittance, meet on a
//! balanced beamsplitter (left port `(a + b)/sqrt 2`, right port
//! `(a - b)/sqrt 2`) and hit two threshold detectors. Misalignment routes each
//! photon to the wrong detector with probability `e_a`, which mixes the port
//! intensities as `I_L' = (1 - e_a) I_L + e_a I_R`. Dark counts fire each
//! detector independently with probability `p_dark`.
//!
//! The virtual superposition states `(|0, alpha_B> +/- |alpha_A, 0>)/N` are
//! handled with the same calculus: every no-click effect is diagonal in the
//! output Fock basis with product form `x_L^{n_L} x_R^{n_R}`, and its matrix
//! elements between coherent states are Gaussian overlaps. Photons lost in
//! the fiber leave the environment in a coherent state too, so the loss only
//! damps the cross term by the environment overlap.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    arm_transmittances, ChannelParams, Detector, ModelOptions, PhaseMode, ProtocolParams,
    WindowClass,
};

/// Probabilities of Charlie's four joint outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution {
    pub p_l_only: f64,
    pub p_r_only: f64,
    pub p_both: f64,
    pub p_none: f64,
}

impl ClickDistribution {
    pub fn single(&self, detector: Detector) -> f64 {
        match detector {
            Detector::Left => self.p_l_only,
            Detector::Right => self.p_r_only,
        }
    }

    pub fn effective(&self) -> f64 {
        self.p_l_only + self.p_r_only
    }

    pub fn total(&self) -> f64 {
        self.p_l_only + self.p_r_only + self.p_both + self.p_none
    }

    /// Same distribution with the detector labels exchanged.
    pub fn swapped(self) -> Self {
        Self {
            p_l_only: self.p_r_only,
            p_r_only: self.p_l_only,
            ..self
        }
    }
}

/// Honest interferometer for a given channel.
#[derive(Debug, Clone, Copy)]
pub struct Interferometer {
    pub eta_a: f64,
    pub eta_b: f64,
    pub e_a: f64,
    pub p_dark: f64,
}

/// Per-mode damping factors of a no-click effect.
#[derive(Clone, Copy)]
struct Silence {
    x_left: f64,
    x_right: f64,
}

impl Interferometer {
    pub fn new(ch: &ChannelParams) -> Self {
        let (eta_a, eta_b) = arm_transmittances(ch);
        Self {
            eta_a,
            eta_b,
            e_a: ch.e_a,
            p_dark: ch.p_dark,
        }
    }

    /// Output port amplitudes for input amplitudes `(a, b)` at Charlie.
    fn ports(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ((a + b) * s, (a - b) * s)
    }

    /// Click distribution for the product coherent state `|a> (x) |b>` emitted
    /// by Alice and Bob, with `b` already carrying the residual phase.
    pub fn coherent_clicks(&self, a: Complex64, b: Complex64) -> ClickDistribution {
        let (l, r) = Self::ports(a * self.eta_a.sqrt(), b * self.eta_b.sqrt());
        let (il, ir) = (l.norm_sqr(), r.norm_sqr());
        let il_mixed = (1.0 - self.e_a) * il + self.e_a * ir;
        let ir_mixed = (1.0 - self.e_a) * ir + self.e_a * il;
        // 1 - (1 - p_dark) e^{-I}, kept accurate for tiny I.
        let click = |i: f64| self.p_dark + (1.0 - self.p_dark) * -f64::exp_m1(-i);
        let pl = click(il_mixed);
        let pr = click(ir_mixed);
        ClickDistribution {
            p_l_only: pl * (1.0 - pr),
            p_r_only: pr * (1.0 - pl),
            p_both: pl * pr,
            p_none: (1.0 - pl) * (1.0 - pr),
        }
    }

    /// Click distribution for `(|0, b> + sign |a, 0>)` normalised, with
    /// `sign = +1` for the X+ state and `-1` for X-.
    pub fn superposition_clicks(&self, a: Complex64, b: Complex64, sign: f64) -> ClickDistribution {
        let s_a = self.eta_a.sqrt();
        let s_b = self.eta_b.sqrt();
        // Branch 1: |0, b>, branch 2: |a, 0>; surviving amplitudes at the ports.
        let out1 = Self::ports(Complex64::new(0.0, 0.0), b * s_b);
        let out2 = Self::ports(a * s_a, Complex64::new(0.0, 0.0));
        // <env_1 | env_2> for the photons lost in the fibers.
        let lost_a = (1.0 - self.eta_a) * a.norm_sqr();
        let lost_b = (1.0 - self.eta_b) * b.norm_sqr();
        let env_overlap = (-(lost_a + lost_b) / 2.0).exp();
        let norm_sq = b.norm_sqr() + a.norm_sqr();
        let vac_overlap = (-norm_sq / 2.0).exp(); // <0,b|a,0> before the channel
        let norm = 2.0 + 2.0 * sign * vac_overlap;

        let expect = |e: Silence| -> f64 {
            let elem = |u: (Complex64, Complex64), v: (Complex64, Complex64)| -> Complex64 {
                let m = |x: f64, p: Complex64, q: Complex64| {
                    (-(p.norm_sqr() + q.norm_sqr()) / 2.0 + x * p.conj() * q).exp()
                };
                m(e.x_left, u.0, v.0) * m(e.x_right, u.1, v.1)
            };
            let diag = elem(out1, out1).re + elem(out2, out2).re;
            let cross = 2.0 * sign * (elem(out1, out2) * env_overlap).re;
            (diag + cross) / norm
        };

        let q = 1.0 - self.p_dark;
        let r_silent = q * expect(Silence {
            x_left: 1.0 - self.e_a,
            x_right: self.e_a,
        });
        let l_silent = q * expect(Silence {
            x_left: self.e_a,
            x_right: 1.0 - self.e_a,
        });
        let none = q * q * expect(Silence {
            x_left: 0.0,
            x_right: 0.0,
        });
        let p_l_only = (r_silent - none).max(0.0);
        let p_r_only = (l_silent - none).max(0.0);
        let p_none = none;
        ClickDistribution {
            p_l_only,
            p_r_only,
            p_both: (1.0 - p_l_only - p_r_only - p_none).max(0.0),
            p_none,
        }
    }
}

/// Amplitudes Alice and Bob emit for a class at residual phase `delta`.
fn amplitudes(mu_a: f64, mu_b: f64, delta: f64) -> (Complex64, Complex64) {
    (
        Complex64::new(mu_a.sqrt(), 0.0),
        Complex64::from_polar(mu_b.sqrt(), delta),
    )
}

/// Click distribution for a window class at residual phase `delta`.
pub fn click_distribution(
    class: WindowClass,
    delta: f64,
    params: &ProtocolParams,
    ch: &ChannelParams,
) -> ClickDistribution {
    click_distribution_at(class, delta, params.mu, params.mu, &Interferometer::new(ch))
}

/// As [`click_distribution`] with explicit per-party intensities.
pub fn click_distribution_at(
    class: WindowClass,
    delta: f64,
    mu_a: f64,
    mu_b: f64,
    ifm: &Interferometer,
) -> ClickDistribution {
    let (a, b) = amplitudes(mu_a, mu_b, delta);
    let zero = Complex64::new(0.0, 0.0);
    match class {
        WindowClass::ZTildeA => ifm.coherent_clicks(a, zero),
        WindowClass::ZTildeB => ifm.coherent_clicks(zero, b),
        WindowClass::BBoth => ifm.coherent_clicks(a, b),
        WindowClass::ONeither => ifm.coherent_clicks(zero, zero),
        WindowClass::XPlus => ifm.superposition_clicks(a, b, 1.0),
        WindowClass::XMinus => ifm.superposition_clicks(a, b, -1.0),
    }
}

/// Half-width `theta` of the accepted phase interval around 0 (and around pi).
pub fn acceptance_half_width(lambda_ps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda_ps) {
        return Err(crate::error::invalid("lambda_ps", "must lie in [0, 1]"));
    }
    if lambda_ps == 0.0 {
        return Err(Error::EmptyAcceptance(lambda_ps));
    }
    Ok((1.0 - lambda_ps).acos())
}

/// Fraction of uniformly random phase differences accepted by the
/// post-selection rule `1 - |cos delta| <= lambda`.
pub fn acceptance_probability(lambda_ps: f64) -> Result<f64> {
    Ok(2.0 * acceptance_half_width(lambda_ps)? / std::f64::consts::PI)
}

/// Whether a phase difference passes the post-selection rule.
pub fn accepts(delta: f64, lambda_ps: f64) -> bool {
    1.0 - delta.cos().abs() <= lambda_ps
}

/// Composite Simpson average of `f` over `[0, upper]` with `nodes` intervals.
fn simpson_mean(upper: f64, nodes: usize, f: impl Fn(f64) -> ClickDistribution) -> (f64, f64) {
    let n = if nodes.is_multiple_of(2) { nodes } else { nodes + 1 };
    let h = upper / n as f64;
    let (mut l, mut r) = (0.0, 0.0);
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let d = f(k as f64 * h);
        l += w * d.p_l_only;
        r += w * d.p_r_only;
    }
    let scale = h / 3.0 / upper;
    (l * scale, r * scale)
}

/// Per-class single-click rates `(S^L, S^R)`.
///
/// Compensation mode evaluates the model at zero residual phase; post-selection
/// averages it over the accepted phase set.
pub fn effective_rates(
    class: WindowClass,
    params: &ProtocolParams,
    ch: &ChannelParams,
    opts: &ModelOptions,
) -> Result<(f64, f64)> {
    let ifm = Interferometer::new(ch);
    let mu = params.mu;
    match params.phase_mode {
        PhaseMode::Compensation => {
            let d = click_distribution_at(class, 0.0, mu, mu, &ifm);
            Ok((d.p_l_only, d.p_r_only))
        }
        PhaseMode::PostSelection => {
            let theta = acceptance_half_width(params.lambda_ps)?;
            // cos is even, and the interval around pi mirrors the one around 0
            // with the ports exchanged.
            let (l, r) = simpson_mean(theta, opts.quadrature_nodes, |delta| {
                click_distribution_at(class, delta, mu, mu, &ifm)
            });
            if opts.relabel_antiphase {
                Ok((l, r))
            } else {
                let avg = 0.5 * (l + r);
                Ok((avg, avg))
            }
        }
    }
}
