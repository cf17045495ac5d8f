//! Truncated Fock-space states and the balanced beamsplitter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tail mass a truncated coherent state may drop.
pub const MAX_TAIL_MASS: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Single-mode state on `|0>, ..., |cutoff>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub cutoff: usize,
    pub amplitudes: Vec<Complex64>,
}

/// Two-mode state over `|n_A, n_B>` with `n_A, n_B <= cutoff`, stored
/// row-major in `n_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockState {
    pub cutoff: usize,
    pub amplitudes: Vec<Complex64>,
}

/// Poisson mass above `cutoff` for mean `mean`, summed term by term.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut log_term = -mean + (cutoff as f64 + 1.0) * mean.ln() - ln_factorial(cutoff + 1);
    let mut n = cutoff + 1;
    let mut tail = 0.0;
    loop {
        let t = log_term.exp();
        tail += t;
        if t < tail * 1e-17 || (n as f64 > mean && t == 0.0) {
            break;
        }
        n += 1;
        log_term += mean.ln() - (n as f64).ln();
        if n > cutoff + 10_000 {
            break;
        }
    }
    tail
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

impl ModeState {
    pub fn vacuum(cutoff: usize) -> Self {
        let mut amplitudes = vec![ZERO; cutoff + 1];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { cutoff, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self - c |0>`, scaled by `scale`.
    pub fn remove_vacuum(&self, scale: f64) -> Self {
        let mut out = self.clone();
        out.amplitudes[0] = ZERO;
        for a in &mut out.amplitudes {
            *a *= scale;
        }
        out
    }

    pub fn tensor(&self, other: &ModeState) -> FockState {
        assert_eq!(self.cutoff, other.cutoff, "modes must share a cutoff");
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        FockState {
            cutoff: self.cutoff,
            amplitudes,
        }
    }
}

/// Truncated coherent state `sum_n e^{-|a|^2/2} a^n / sqrt(n!) |n>`.
///
/// Fails when `|a|^2 > cutoff / 4` or the dropped Poisson tail exceeds
/// [`MAX_TAIL_MASS`].
pub fn coherent(alpha: Complex64, cutoff: usize) -> Result<ModeState> {
    let mean = alpha.norm_sqr();
    let tail = poisson_tail(mean, cutoff);
    if mean > cutoff as f64 / 4.0 || tail > MAX_TAIL_MASS {
        return Err(Error::TruncationInadequate {
            cutoff,
            mean_photons: mean,
            tail_mass: tail,
        });
    }
    let mut amplitudes = Vec::with_capacity(cutoff + 1);
    let mut amp = Complex64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..=cutoff {
        if n > 0 {
            amp = amp * alpha / (n as f64).sqrt();
        }
        amplitudes.push(amp);
    }
    Ok(ModeState { cutoff, amplitudes })
}

impl FockState {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn zero(cutoff: usize) -> Self {
        Self {
            cutoff,
            amplitudes: vec![ZERO; (cutoff + 1) * (cutoff + 1)],
        }
    }

    pub fn index(&self, n_a: usize, n_b: usize) -> usize {
        n_a * (self.cutoff + 1) + n_b
    }

    pub fn amplitude(&self, n_a: usize, n_b: usize) -> Complex64 {
        self.amplitudes[self.index(n_a, n_b)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &FockState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `sum_i c_i |v_i>`
    pub fn combine(terms: &[(Complex64, &FockState)]) -> FockState {
        let cutoff = terms[0].1.cutoff;
        let mut out = FockState::zero(cutoff);
        for (c, v) in terms {
            assert_eq!(v.cutoff, cutoff);
            for (o, a) in out.amplitudes.iter_mut().zip(&v.amplitudes) {
                *o += c * a;
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> FockState {
        FockState {
            cutoff: self.cutoff,
            amplitudes: self.amplitudes.iter().map(|a| a * c).collect(),
        }
    }

    pub fn distance(&self, other: &FockState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Output state of the balanced beamsplitter in the `(L, R)` port basis.
///
/// Uses `a^dag = (L^dag + R^dag)/sqrt 2`, `b^dag = (L^dag - R^dag)/sqrt 2`, so a
/// coherent input `|a, b>` leaves as `|(a+b)/sqrt 2, (a-b)/sqrt 2>`. Photon
/// number is conserved, so the output lives on `n_L + n_R <= 2 cutoff` and the
/// map is exact on the truncated input.
pub fn beamsplitter(input: &FockState) -> FockState {
    let c = input.cutoff;
    let out_cutoff = 2 * c;
    let fact: Vec<f64> = {
        let mut f = vec![1.0f64; out_cutoff + 1];
        for k in 1..=out_cutoff {
            f[k] = f[k - 1] * k as f64;
        }
        f
    };
    let sqrt_fact: Vec<f64> = fact.iter().map(|f| f.sqrt()).collect();
    let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);

    let mut out = FockState::zero(out_cutoff);
    for n_a in 0..=c {
        for n_b in 0..=c {
            let amp = input.amplitude(n_a, n_b);
            if amp == ZERO {
                continue;
            }
            let total = n_a + n_b;
            let pre = 0.5f64.powf(total as f64 / 2.0) / (sqrt_fact[n_a] * sqrt_fact[n_b]);
            // Coefficient of (L^dag)^m (R^dag)^{N-m}.
            let mut poly = vec![0.0f64; total + 1];
            for j in 0..=n_a {
                let cj = binom(n_a, j);
                for k in 0..=n_b {
                    let sign = if (n_b - k) % 2 == 0 { 1.0 } else { -1.0 };
                    poly[j + k] += cj * binom(n_b, k) * sign;
                }
            }
            for (m, coef) in poly.into_iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let idx = out.index(m, total - m);
                out.amplitudes[idx] += amp * (pre * coef * sqrt_fact[m] * sqrt_fact[total - m]);
            }
        }
    }
    out
}
