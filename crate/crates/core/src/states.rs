//! Pure and mixed states on the chain and the handful of operations the
//! sensing protocol applies to them.

use faer::{Col, Mat, MatRef, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::evolution::{diagonalize, SpectralCache};
use crate::spinops::{embed, QOperator, SpinValue};

const NORM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues in `[-POSITIVITY_TOL, 0)` are eigensolver noise and get
/// clipped; anything below is an error.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Outcomes less likely than this are refused rather than renormalized.
pub const MIN_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Debug)]
pub enum StateKind {
    Pure(Col<c64>),
    Mixed(Mat<c64>),
}

#[derive(Clone, Debug)]
pub struct QState {
    kind: StateKind,
    local_dims: Vec<usize>,
}

fn check_dims(local_dims: &[usize], dim: usize) -> Result<()> {
    let expected: usize = local_dims.iter().product();
    if local_dims.is_empty() || expected != dim {
        return Err(Error::DimensionMismatch { expected, found: dim });
    }
    Ok(())
}

impl QState {
    /// Unit-norm pure state; the norm is checked, not fixed.
    pub fn pure(amps: Col<c64>, local_dims: Vec<usize>) -> Result<Self> {
        check_dims(&local_dims, amps.nrows())?;
        let norm = amps.norm_l2();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("pure state has norm {norm}")));
        }
        Ok(Self { kind: StateKind::Pure(amps), local_dims })
    }

    pub fn pure_normalized(amps: Col<c64>, local_dims: Vec<usize>) -> Result<Self> {
        let norm = amps.norm_l2();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        let scaled = Col::from_fn(amps.nrows(), |i| amps[i] / norm);
        Self::pure(scaled, local_dims)
    }

    pub fn from_amplitudes(amps: &[c64], local_dims: Vec<usize>) -> Result<Self> {
        Self::pure_normalized(Col::from_fn(amps.len(), |i| amps[i]), local_dims)
    }

    /// Unit-trace Hermitian density matrix. Positivity is checked lazily by
    /// [`QState::spectrum`].
    pub fn mixed(rho: Mat<c64>, local_dims: Vec<usize>) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
        }
        check_dims(&local_dims, rho.nrows())?;
        let state = Self { kind: StateKind::Mixed(rho), local_dims };
        let tr = state.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("density matrix has trace {tr}")));
        }
        let herm = state.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("density matrix is not Hermitian ({herm:e})")));
        }
        Ok(state)
    }

    /// `I / n`.
    pub fn maximally_mixed(local_dims: Vec<usize>) -> Self {
        let dim: usize = local_dims.iter().product();
        let w = 1.0 / dim as f64;
        let rho = Mat::from_fn(dim, dim, |i, j| if i == j { c64::new(w, 0.0) } else { c64::new(0.0, 0.0) });
        Self { kind: StateKind::Mixed(rho), local_dims }
    }

    /// Computational basis state `|index>`.
    pub fn basis(index: usize, local_dims: Vec<usize>) -> Result<Self> {
        let dim: usize = local_dims.iter().product();
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} >= {dim}")));
        }
        let amps = Col::from_fn(dim, |i| if i == index { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        Self::pure(amps, local_dims)
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.kind, StateKind::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&Col<c64>> {
        match &self.kind {
            StateKind::Pure(v) => Some(v),
            StateKind::Mixed(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            StateKind::Pure(v) => v.nrows(),
            StateKind::Mixed(m) => m.nrows(),
        }
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn n_sites(&self) -> usize {
        self.local_dims.len()
    }

    pub fn density_matrix(&self) -> Mat<c64> {
        match &self.kind {
            StateKind::Pure(v) => Mat::from_fn(v.nrows(), v.nrows(), |i, j| v[i] * v[j].conj()),
            StateKind::Mixed(m) => m.clone(),
        }
    }

    /// Mixed representation of the same state.
    pub fn to_mixed(&self) -> QState {
        QState { kind: StateKind::Mixed(self.density_matrix()), local_dims: self.local_dims.clone() }
    }

    pub fn trace(&self) -> f64 {
        match &self.kind {
            StateKind::Pure(v) => v.squared_norm_l2(),
            StateKind::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).sum(),
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        match &self.kind {
            StateKind::Pure(_) => 0.0,
            StateKind::Mixed(m) => {
                let n = m.nrows();
                let mut worst = 0.0_f64;
                for j in 0..n {
                    for i in j..n {
                        worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
                worst
            }
        }
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        match &self.kind {
            StateKind::Pure(v) => v.squared_norm_l2().powi(2),
            StateKind::Mixed(m) => {
                let n = m.nrows();
                let mut acc = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        acc += m[(i, j)].norm_sqr();
                    }
                }
                acc
            }
        }
    }

    /// `tr(rho A)`.
    pub fn expectation(&self, op: &QOperator) -> Result<c64> {
        self.check_dim(op.dim())?;
        let a = op.mat();
        Ok(match &self.kind {
            StateKind::Pure(v) => {
                let av = a * v;
                (0..v.nrows()).map(|i| v[i].conj() * av[i]).sum()
            }
            StateKind::Mixed(m) => {
                let n = m.nrows();
                let mut acc = c64::new(0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        acc += a[(j, i)] * m[(i, j)];
                    }
                }
                acc
            }
        })
    }

    /// Eigenvalues (ascending) and eigenvectors of the density matrix, with
    /// small negative eigenvalues clipped to zero.
    pub fn spectrum(&self) -> Result<(Vec<f64>, Mat<c64>)> {
        let rho = self.density_matrix();
        let evd = rho
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let mut p: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
        for v in p.iter_mut() {
            if *v < -POSITIVITY_TOL {
                return Err(Error::InvalidState(format!("density matrix has eigenvalue {v:e}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok((p, evd.U().to_owned()))
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: dim });
        }
        Ok(())
    }

    pub(crate) fn from_parts(kind: StateKind, local_dims: Vec<usize>) -> Self {
        Self { kind, local_dims }
    }
}

/// Boltzmann weights `exp(-beta (E_k - E_min))`, normalized to unit sum.
pub fn thermal_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// Gibbs state `exp(-beta H) / Z`.
pub fn thermal_state(h: &QOperator, beta: f64) -> Result<QState> {
    let cache = diagonalize(h)?;
    thermal_state_from_cache(&cache, beta)
}

pub fn thermal_state_from_cache(cache: &SpectralCache, beta: f64) -> Result<QState> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")));
    }
    let w = thermal_weights(cache.eigenvalues(), beta);
    let rho = cache.weighted_outer_sum(&w);
    QState::mixed(rho, cache.local_dims().to_vec())
}

/// Projective measurement outcome `P`: returns the post-measurement state and
/// `tr(P rho)`.
pub fn measure_and_collapse(rho: &QState, projector: &QOperator) -> Result<(QState, f64)> {
    rho.check_dim(projector.dim())?;
    let herm = projector.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::NotHermitian(herm));
    }
    let p = projector.mat();
    let p2 = p * p;
    let n = p.nrows();
    let mut idem = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            idem = idem.max((p2[(i, j)] - p[(i, j)]).norm());
        }
    }
    if idem > 1e-10 {
        return Err(Error::NotProjector(idem));
    }
    let prob = rho.expectation(projector)?.re;
    if !(prob >= MIN_PROBABILITY) {
        return Err(Error::ZeroProbability(prob));
    }
    let kind = match rho.kind() {
        StateKind::Pure(v) => {
            let pv = p * v;
            let scale = prob.sqrt();
            StateKind::Pure(Col::from_fn(n, |i| pv[i] / scale))
        }
        StateKind::Mixed(m) => {
            let prp = p * m * p;
            StateKind::Mixed(Mat::from_fn(n, n, |i, j| {
                let v = (prp[(i, j)] + prp[(j, i)].conj()) * 0.5;
                v / prob
            }))
        }
    };
    Ok((QState::from_parts(kind, rho.local_dims().to_vec()), prob))
}

/// Phase applied to the `|d-1>` component of a boundary measurement vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopPhase {
    One,
    I,
}

/// Normalized single-site vector `sum_k a_k phi_k |k>`.
pub fn boundary_vector(s: SpinValue, coeffs: &[f64], phase: TopPhase) -> Result<Vec<c64>> {
    let d = s.dim();
    if coeffs.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: coeffs.len() });
    }
    let norm = coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("measurement vector is zero".into()));
    }
    let mut v: Vec<c64> = coeffs.iter().map(|&a| c64::new(a / norm, 0.0)).collect();
    if phase == TopPhase::I {
        v[d - 1] *= c64::new(0.0, 1.0);
    }
    Ok(v)
}

/// Rank-one projector on site 1, embedded in the `N`-site space.
pub fn boundary_projector(s: SpinValue, n_sites: usize, coeffs: &[f64], phase: TopPhase) -> Result<QOperator> {
    let v = boundary_vector(s, coeffs, phase)?;
    let local = QOperator::outer(&v, vec![s.dim()])?;
    embed(&local, 1, n_sites)
}

/// Coefficients of `(|0> + |d-1>) / sqrt 2`.
pub fn endpoint_coeffs(s: SpinValue) -> Vec<f64> {
    let d = s.dim();
    let mut a = vec![0.0; d];
    a[0] = std::f64::consts::FRAC_1_SQRT_2;
    a[d - 1] = std::f64::consts::FRAC_1_SQRT_2;
    a
}

/// Traces out the last site.
pub fn partial_trace_last(rho: &QState) -> Result<QState> {
    if rho.n_sites() < 2 {
        return Err(Error::InvalidArgument("partial trace needs at least two sites".into()));
    }
    let dims = rho.local_dims();
    let d_last = *dims.last().unwrap();
    let kept = rho.dim() / d_last;
    let reduced = match rho.kind() {
        StateKind::Pure(v) => Mat::from_fn(kept, kept, |a, b| {
            (0..d_last).map(|j| v[a * d_last + j] * v[b * d_last + j].conj()).sum()
        }),
        StateKind::Mixed(m) => Mat::from_fn(kept, kept, |a, b| {
            (0..d_last).map(|j| m[(a * d_last + j, b * d_last + j)]).sum()
        }),
    };
    Ok(QState::from_parts(StateKind::Mixed(reduced), dims[..dims.len() - 1].to_vec()))
}

/// `<psi| rho |psi>`.
pub fn fidelity_with_pure(rho: &QState, psi: &QState) -> Result<f64> {
    let v = psi
        .amplitudes()
        .ok_or_else(|| Error::InvalidArgument("fidelity target must be a pure state".into()))?;
    rho.check_dim(v.nrows())?;
    let f = match rho.kind() {
        StateKind::Pure(u) => {
            let overlap: c64 = (0..v.nrows()).map(|i| v[i].conj() * u[i]).sum();
            overlap.norm_sqr()
        }
        StateKind::Mixed(m) => {
            let mv = m * v;
            (0..v.nrows()).map(|i| v[i].conj() * mv[i]).sum::<c64>().re
        }
    };
    Ok(f)
}

/// `|psi_d>^N` and `(|0..0> + |d-1..d-1>) / sqrt 2`.
pub fn reference_states(s: SpinValue, n_sites: usize) -> Result<(QState, QState)> {
    if n_sites == 0 {
        return Err(Error::InvalidArgument("need at least one site".into()));
    }
    let d = s.dim();
    let dims = vec![d; n_sites];
    let dim = d.pow(n_sites as u32);

    // a product amplitude is nonzero only when every digit is 0 or d-1
    let per_site = std::f64::consts::FRAC_1_SQRT_2;
    let sep = Col::from_fn(dim, |mut idx| {
        let mut amp = 1.0;
        for _ in 0..n_sites {
            let k = idx % d;
            if k != 0 && k != d - 1 {
                return c64::new(0.0, 0.0);
            }
            amp *= per_site;
            idx /= d;
        }
        c64::new(amp, 0.0)
    });
    let ent = ghz_amplitudes(d, n_sites);
    Ok((QState::pure_normalized(sep, dims.clone())?, QState::pure(ent, dims)?))
}

pub(crate) fn ghz_amplitudes(d: usize, n_sites: usize) -> Col<c64> {
    let dim = d.pow(n_sites as u32);
    let w = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Col::from_fn(dim, |i| if i == 0 || i == dim - 1 { w } else { c64::new(0.0, 0.0) })
}

pub(crate) fn mat_max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}
