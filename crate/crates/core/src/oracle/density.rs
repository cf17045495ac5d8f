use nalgebra::DMatrix;
use num_complex::Complex64;

use super::fock::FockState;

/// Mixed state kept as an ensemble `sum_k w_k |v_k><v_k|`.
///
/// The operators the oracle compares have rank two, so distances are computed
/// on the span of the ensemble vectors instead of the full two-mode space.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub cutoff: usize,
    pub members: Vec<(f64, FockState)>,
}

impl DensityOperator {
    pub fn new(members: Vec<(f64, FockState)>) -> Self {
        let cutoff = members[0].1.cutoff;
        assert!(members.iter().all(|(_, v)| v.cutoff == cutoff));
        Self { cutoff, members }
    }

    pub fn trace(&self) -> f64 {
        self.members.iter().map(|(w, v)| w * v.norm_sqr()).sum()
    }

    /// Dense matrix over the full two-mode basis. Quadratic in the dimension;
    /// use small cutoffs.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.members[0].1.dim();
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for (w, v) in &self.members {
            for i in 0..d {
                let vi = v.amplitudes[i];
                if vi == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    m[(i, j)] += vi * v.amplitudes[j].conj() * *w;
                }
            }
        }
        m
    }

    /// `1/2 || self - other ||_1`.
    pub fn trace_distance(&self, other: &DensityOperator) -> f64 {
        let vectors: Vec<&FockState> = self
            .members
            .iter()
            .chain(&other.members)
            .map(|(_, v)| v)
            .collect();
        let basis = orthonormal_basis(&vectors);
        let k = basis.len();
        if k == 0 {
            return 0.0;
        }
        let mut diff = DMatrix::<Complex64>::zeros(k, k);
        let mut accumulate = |op: &DensityOperator, sign: f64| {
            for (w, v) in &op.members {
                let coords: Vec<Complex64> = basis.iter().map(|e| e.inner(v)).collect();
                for i in 0..k {
                    for j in 0..k {
                        diff[(i, j)] += coords[i] * coords[j].conj() * (sign * w);
                    }
                }
            }
        };
        accumulate(self, 1.0);
        accumulate(other, -1.0);
        0.5 * trace_norm(&diff)
    }
}

/// Sum of singular values; for a Hermitian matrix, the sum of the absolute
/// eigenvalues.
pub fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    m.singular_values().sum()
}

/// Modified Gram-Schmidt, dropping numerically dependent vectors.
fn orthonormal_basis(vectors: &[&FockState]) -> Vec<FockState> {
    let mut basis: Vec<FockState> = Vec::new();
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut r = (*v).clone();
        for _ in 0..2 {
            for e in &basis {
                let c = e.inner(&r);
                for (x, y) in r.amplitudes.iter_mut().zip(&e.amplitudes) {
                    *x -= c * y;
                }
            }
        }
        let n = r.norm();
        if n > 1e-12 * scale {
            basis.push(r.scaled(1.0 / n));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::super::fock::{coherent, ModeState};
    use super::*;

    fn pure(v: FockState) -> DensityOperator {
        DensityOperator::new(vec![(1.0, v)])
    }

    #[test]
    fn orthogonal_pure_states_are_distance_one() {
        let vac = ModeState::vacuum(4).tensor(&ModeState::vacuum(4));
        let mut one = FockState::zero(4);
        let i = one.index(1, 0);
        one.amplitudes[i] = Complex64::new(1.0, 0.0);
        assert!((pure(vac.clone()).trace_distance(&pure(one)) - 1.0).abs() < 1e-14);
        assert!(pure(vac.clone()).trace_distance(&pure(vac)) < 1e-15);
    }

    #[test]
    fn pure_state_distance_matches_fidelity_formula() {
        let a = coherent(Complex64::new(0.5, 0.0), 12).unwrap();
        let b = coherent(Complex64::new(0.2, 0.3), 12).unwrap();
        let vac = ModeState::vacuum(12);
        let x = a.tensor(&vac);
        let y = b.tensor(&vac);
        let f = x.inner(&y).norm_sqr() / (x.norm_sqr() * y.norm_sqr());
        let expected = (1.0 - f).sqrt();
        let got = pure(x.scaled(1.0 / x.norm())).trace_distance(&pure(y.scaled(1.0 / y.norm())));
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn dense_form_is_hermitian_with_unit_trace() {
        let a = coherent(Complex64::new(0.4, 0.2), 10).unwrap();
        let vac = ModeState::vacuum(10);
        let rho = DensityOperator::new(vec![(0.5, vac.tensor(&a)), (0.5, a.tensor(&vac))]);
        let m = rho.to_dense();
        let herm = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(herm < 1e-15);
        assert!((m.trace().re - 1.0).abs() < 1e-10);
        assert!((rho.trace() - 1.0).abs() < 1e-10);
        assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        // Trace norm equals trace only for a positive operator.
        assert!((trace_norm(&m) - 1.0).abs() < 1e-10);
    }
}
