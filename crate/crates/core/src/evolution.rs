//! Spectral decomposition of Hamiltonians and exact unitary propagation.
//!
//! One `O(n^3)` eigendecomposition is amortized over every evolution time.
//! Real symmetric inputs (every sensor Hamiltonian built here) go through the
//! real eigensolver and keep a real eigenbasis; complex Hermitian inputs keep
//! a complex one.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use faer::linalg::matmul::matmul;
use faer::{Accum, Col, Mat, MatRef, Par, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::spinops::QOperator;
use crate::states::{QState, StateKind};

#[derive(Clone, Debug)]
pub enum Eigenbasis {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralCache {
    eigenvalues: Vec<f64>,
    basis: Eigenbasis,
    source_hash: u64,
    local_dims: Vec<usize>,
}

fn hash_operator(h: &QOperator) -> u64 {
    let mut hasher = DefaultHasher::new();
    h.local_dims().hash(&mut hasher);
    let m = h.mat();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)].re.to_bits().hash(&mut hasher);
            m[(i, j)].im.to_bits().hash(&mut hasher);
        }
    }
    hasher.finish()
}

/// Full eigensystem of a Hermitian operator.
///
/// The solver follows faer's global parallelism setting, and its rounding
/// depends on it. Set `faer::set_global_parallelism(Par::Seq)` for results
/// that do not vary with the thread count.
pub fn diagonalize(h: &QOperator) -> Result<SpectralCache> {
    let n = h.dim();
    let m = h.mat();
    let scale = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .fold(1.0_f64, f64::max);
    let herm = h.hermiticity_error();
    if herm > 1e-12 * scale {
        return Err(Error::NotHermitian(herm));
    }
    let (eigenvalues, basis) = if h.is_real() {
        let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let vals: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        (vals, Eigenbasis::Real(evd.U().to_owned()))
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let vals: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
        (vals, Eigenbasis::Complex(evd.U().to_owned()))
    };
    Ok(SpectralCache { eigenvalues, basis, source_hash: hash_operator(h), local_dims: h.local_dims().to_vec() })
}

/// `a * x` for real `a` and complex `x`, sequential.
pub(crate) fn real_times_complex(a: MatRef<'_, f64>, x: MatRef<'_, c64>) -> Mat<c64> {
    let (rows, cols) = (a.nrows(), x.ncols());
    let xr = Mat::<f64>::from_fn(x.nrows(), cols, |i, j| x[(i, j)].re);
    let xi = Mat::<f64>::from_fn(x.nrows(), cols, |i, j| x[(i, j)].im);
    let mut yr = Mat::<f64>::zeros(rows, cols);
    let mut yi = Mat::<f64>::zeros(rows, cols);
    matmul(yr.as_mut(), Accum::Replace, a, xr.as_ref(), 1.0, Par::Seq);
    matmul(yi.as_mut(), Accum::Replace, a, xi.as_ref(), 1.0, Par::Seq);
    Mat::from_fn(rows, cols, |i, j| c64::new(yr[(i, j)], yi[(i, j)]))
}

pub(crate) fn complex_times(a: MatRef<'_, c64>, x: MatRef<'_, c64>) -> Mat<c64> {
    let mut y = Mat::<c64>::zeros(a.nrows(), x.ncols());
    matmul(y.as_mut(), Accum::Replace, a, x, c64::new(1.0, 0.0), Par::Seq);
    y
}

impl SpectralCache {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Eigenbasis {
        &self.basis
    }

    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvectors(&self) -> Mat<c64> {
        match &self.basis {
            Eigenbasis::Real(v) => Mat::from_fn(v.nrows(), v.ncols(), |i, j| c64::new(v[(i, j)], 0.0)),
            Eigenbasis::Complex(v) => v.clone(),
        }
    }

    /// Eigenvector `k` as a complex column.
    pub fn eigenvector(&self, k: usize) -> Col<c64> {
        match &self.basis {
            Eigenbasis::Real(v) => Col::from_fn(v.nrows(), |i| c64::new(v[(i, k)], 0.0)),
            Eigenbasis::Complex(v) => v.col(k).to_owned(),
        }
    }

    /// `V^dag x`: coordinates of the columns of `x` in the eigenbasis.
    pub fn to_eigenbasis(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        match &self.basis {
            Eigenbasis::Real(v) => real_times_complex(v.transpose(), x),
            Eigenbasis::Complex(v) => complex_times(v.adjoint().to_owned().as_ref(), x),
        }
    }

    /// `V y`.
    pub fn from_eigenbasis(&self, y: MatRef<'_, c64>) -> Mat<c64> {
        match &self.basis {
            Eigenbasis::Real(v) => real_times_complex(v.as_ref(), y),
            Eigenbasis::Complex(v) => complex_times(v.as_ref(), y),
        }
    }

    /// `V diag(w) V^dag`.
    pub fn weighted_outer_sum(&self, w: &[f64]) -> Mat<c64> {
        let v = self.eigenvectors();
        let n = v.nrows();
        let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * w[j]);
        let mut out = Mat::<c64>::zeros(n, n);
        matmul(out.as_mut(), Accum::Replace, scaled.as_ref(), v.adjoint(), c64::new(1.0, 0.0), Par::Seq);
        out
    }

    /// Phases `exp(-i E_k t)`.
    pub fn phases(&self, t: f64) -> Vec<c64> {
        self.eigenvalues.iter().map(|&e| c64::from_polar(1.0, -e * t)).collect()
    }

    /// `V diag(E) V^dag`.
    pub fn reconstruct(&self) -> QOperator {
        let rebuilt = self.weighted_outer_sum(&self.eigenvalues);
        QOperator::new(rebuilt, self.local_dims.clone()).expect("cache dims are consistent")
    }
}

/// `U(t) = V diag(exp(-i E t)) V^dag`.
pub fn propagator(cache: &SpectralCache, t: f64) -> QOperator {
    let v = cache.eigenvectors();
    let n = v.nrows();
    let ph = cache.phases(t);
    let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * ph[j]);
    let mut u = Mat::<c64>::zeros(n, n);
    matmul(u.as_mut(), Accum::Replace, scaled.as_ref(), v.adjoint(), c64::new(1.0, 0.0), Par::Seq);
    QOperator::new(u, cache.local_dims().to_vec()).expect("cache dims are consistent")
}

/// `U rho U^dag` with `U = exp(-i H t)`.
pub fn evolve(rho: &QState, cache: &SpectralCache, t: f64) -> Result<QState> {
    rho.check_dim(cache.dim())?;
    let ph = cache.phases(t);
    let kind = match rho.kind() {
        StateKind::Pure(v) => {
            let col = Mat::from_fn(v.nrows(), 1, |i, _| v[i]);
            let mut y = cache.to_eigenbasis(col.as_ref());
            for (i, p) in ph.iter().enumerate() {
                y[(i, 0)] *= p;
            }
            let out = cache.from_eigenbasis(y.as_ref());
            StateKind::Pure(faer::Col::from_fn(out.nrows(), |i| out[(i, 0)]))
        }
        StateKind::Mixed(m) => {
            // rotate into the eigenbasis, multiply by phase differences, rotate back
            let left = cache.to_eigenbasis(m.as_ref());
            let inner = cache.to_eigenbasis(left.adjoint().to_owned().as_ref());
            let n = m.nrows();
            let evolved = Mat::from_fn(n, n, |k, l| inner[(k, l)] * ph[k] * ph[l].conj());
            let back = cache.from_eigenbasis(evolved.as_ref());
            let full = cache.from_eigenbasis(back.adjoint().to_owned().as_ref());
            StateKind::Mixed(Mat::from_fn(n, n, |i, j| (full[(i, j)] + full[(j, i)].conj()) * 0.5))
        }
    };
    Ok(QState::from_parts(kind, rho.local_dims().to_vec()))
}

/// Fast path for a diagonal Hamiltonian given by its diagonal.
pub fn evolve_diagonal(rho: &QState, diag: &[f64], t: f64) -> Result<QState> {
    rho.check_dim(diag.len())?;
    let ph: Vec<c64> = diag.iter().map(|&e| c64::from_polar(1.0, -e * t)).collect();
    let kind = match rho.kind() {
        StateKind::Pure(v) => StateKind::Pure(faer::Col::from_fn(v.nrows(), |i| v[i] * ph[i])),
        StateKind::Mixed(m) => {
            let n = m.nrows();
            StateKind::Mixed(Mat::from_fn(n, n, |i, j| m[(i, j)] * ph[i] * ph[j].conj()))
        }
    };
    Ok(QState::from_parts(kind, rho.local_dims().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_sensor, build_target, ModelSpec};
    use crate::spinops::{collective_operator, Axis, SpinValue};
    use crate::states::{mat_max_abs_diff, thermal_state};

    fn small_model(two_s: u32, n: usize) -> ModelSpec {
        ModelSpec { n_sites: n, spin: SpinValue::from_two_s(two_s).unwrap(), ..Default::default() }
    }

    fn unitarity_error(u: &QOperator) -> f64 {
        let uu = &u.adjoint() * u;
        uu.max_abs_diff(&QOperator::identity(u.local_dims().to_vec()))
    }

    #[test]
    fn diagonal_input() {
        let h = QOperator::from_real_diagonal(&[3.0, -1.0, 2.0], vec![3]).unwrap();
        let cache = diagonalize(&h).unwrap();
        assert_eq!(cache.eigenvalues(), &[-1.0, 2.0, 3.0]);
        let v = cache.eigenvectors();
        for j in 0..3 {
            let nonzero: Vec<usize> = (0..3).filter(|&i| v[(i, j)].norm() > 1e-12).collect();
            assert_eq!(nonzero.len(), 1);
            assert!((v[(nonzero[0], j)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_of_sensor() {
        let h = build_sensor(&small_model(3, 4)).unwrap();
        let cache = diagonalize(&h).unwrap();
        assert!(cache.reconstruct().max_abs_diff(&h) < 1e-9);
        let v = cache.eigenvectors();
        let vv = v.adjoint() * &v;
        assert!(mat_max_abs_diff(vv.as_ref(), Mat::<c64>::identity(v.nrows(), v.nrows()).as_ref()) < 1e-10);
        assert!(cache.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn jz_spectrum_two_qubits() {
        let jz = collective_operator(SpinValue::HALF, 2, Axis::Z).unwrap();
        let cache = diagonalize(&jz).unwrap();
        assert_eq!(cache.eigenvalues(), &[-1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn complex_hermitian_path() {
        let jy = collective_operator(SpinValue::from_two_s(2).unwrap(), 2, Axis::Y).unwrap();
        assert!(!jy.is_real());
        let cache = diagonalize(&jy).unwrap();
        assert!(matches!(cache.basis(), Eigenbasis::Complex(_)));
        assert!(cache.reconstruct().max_abs_diff(&jy) < 1e-10);
        let u = propagator(&cache, 0.7);
        assert!(unitarity_error(&u) < 1e-9);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 1)] = c64::new(1.0, 0.0);
        let op = QOperator::from_mat(m).unwrap();
        assert!(matches!(diagonalize(&op), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn propagator_identities() {
        let h = build_sensor(&small_model(2, 3)).unwrap();
        let cache = diagonalize(&h).unwrap();
        let id = QOperator::identity(vec![3; 3]);
        assert!(propagator(&cache, 0.0).max_abs_diff(&id) < 1e-9);
        let (t1, t2) = (1.3, 42.0);
        let prod = &propagator(&cache, t1) * &propagator(&cache, t2);
        assert!(prod.max_abs_diff(&propagator(&cache, t1 + t2)) < 1e-9);
        assert!(unitarity_error(&propagator(&cache, 17.5)) < 1e-9);
    }

    #[test]
    fn evolve_roundtrip_and_invariants() {
        let spec = small_model(2, 3);
        let h = build_sensor(&spec).unwrap();
        let cache = diagonalize(&h).unwrap();
        let sep = crate::states::reference_states(spec.spin, 3).unwrap().0;
        let rho = sep.to_mixed();
        let there = evolve(&rho, &cache, 13.0).unwrap();
        let back = evolve(&there, &cache, -13.0).unwrap();
        assert!(mat_max_abs_diff(back.density_matrix().as_ref(), rho.density_matrix().as_ref()) < 1e-9);
        assert!((there.trace() - 1.0).abs() < 1e-10);
        assert!((there.purity() - rho.purity()).abs() < 1e-10);
        let e0 = rho.expectation(&h).unwrap().re;
        for t in [0.5, 3.0, 77.0] {
            let e = evolve(&rho, &cache, t).unwrap().expectation(&h).unwrap().re;
            assert!((e - e0).abs() < 1e-9);
        }
        let pure = evolve(&sep, &cache, 13.0).unwrap();
        assert!(pure.is_pure());
        assert!(mat_max_abs_diff(pure.density_matrix().as_ref(), there.density_matrix().as_ref()) < 1e-10);
    }

    #[test]
    fn thermal_state_is_stationary() {
        let h = build_sensor(&small_model(1, 4)).unwrap();
        let cache = diagonalize(&h).unwrap();
        let rho = thermal_state(&h, 2.0).unwrap();
        let later = evolve(&rho, &cache, 9.0).unwrap();
        assert!(mat_max_abs_diff(later.density_matrix().as_ref(), rho.density_matrix().as_ref()) < 1e-10);
    }

    #[test]
    fn diagonal_fast_path_matches_general() {
        let spec = small_model(3, 2);
        let target = build_target(&ModelSpec { omega: 0.37, ..spec.clone() }).unwrap();
        let cache = diagonalize(&target).unwrap();
        let h = build_sensor(&spec).unwrap();
        let rho = thermal_state(&h, 0.8).unwrap();
        let rho = evolve(&rho, &diagonalize(&h).unwrap(), 0.0).unwrap();
        let diag: Vec<f64> = target.diagonal().iter().map(|z| z.re).collect();
        let general = evolve(&rho, &cache, 5.5).unwrap();
        let fast = evolve_diagonal(&rho, &diag, 5.5).unwrap();
        assert!(mat_max_abs_diff(general.density_matrix().as_ref(), fast.density_matrix().as_ref()) < 1e-10);
    }

    #[test]
    fn source_hash_tracks_operator() {
        let a = build_sensor(&small_model(1, 3)).unwrap();
        let b = build_sensor(&ModelSpec { field: 0.2, ..small_model(1, 3) }).unwrap();
        let ha = diagonalize(&a).unwrap().source_hash();
        assert_eq!(ha, diagonalize(&a).unwrap().source_hash());
        assert_ne!(ha, diagonalize(&b).unwrap().source_hash());
    }
}
