//! The three-step sensing protocol: measure and evolve to prepare an
//! entangled probe, encode the target field, reverse the evolution and read
//! out on the boundary qudit.
//!
//! [`Engine`] keeps the spectral decomposition of the sensor Hamiltonian and
//! propagates only the support of the post-measurement state, so one t* point
//! costs a few matrix products of shape `n x R` with `R` the thermal rank.
//! [`run_once_dense`] is the plain density-matrix version of the same steps
//! and serves as a cross-check.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{complex_times, diagonalize, evolve, evolve_diagonal, propagator, SpectralCache};
use crate::hamiltonian::{build_target, sensor_hamiltonian, ModelSpec};
use crate::metrology::{precision_limits, qfi_low_rank, qfi_mixed, qfi_upper_bound, uncertainty_from_probability, PrecisionLimits};
use crate::spinops::{collective_operator, collective_z_diagonal, Axis};
use crate::states::{
    boundary_projector, boundary_vector, endpoint_coeffs, fidelity_with_pure, ghz_amplitudes, measure_and_collapse,
    partial_trace_last, thermal_state_from_cache, thermal_weights, QState, TopPhase, MIN_PROBABILITY,
};

/// Thermal weights below this fraction of the largest are dropped.
const THERMAL_CUTOFF: f64 = 1e-16;
/// Gram eigenvalues below this fraction of the largest are dropped.
const SUPPORT_CUTOFF: f64 = 1e-14;

/// Inclusive uniform grid `min, min + step, ..., <= max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let g = Self { min, max, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidArgument(format!("grid step must be > 0, got {}", self.step)));
        }
        if self.max < self.min {
            return Err(Error::InvalidArgument(format!("grid max {} below min {}", self.max, self.min)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid values. When the span is a whole number of steps the points are
    /// spaced as a linspace so that the endpoints and the midpoint are exact.
    pub fn points(&self) -> Vec<f64> {
        let n = self.len();
        let span = self.max - self.min;
        let exact = n > 1 && ((n - 1) as f64 * self.step - span).abs() <= 1e-9 * self.step;
        (0..n)
            .map(|i| {
                if exact {
                    self.min + span * i as f64 / (n - 1) as f64
                } else {
                    self.min + i as f64 * self.step
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub model: ModelSpec,
    pub t_star_grid: Grid,
    /// Step in omega for the central-difference derivative check.
    pub fd_step: f64,
    /// Number of qudits entering the Heisenberg limit.
    pub n_eff: usize,
    /// Grid for `a_1` and `a_2` in [`optimize_basis`].
    pub basis_grid: Grid,
    /// Evaluate the finite-difference derivative at every point.
    pub finite_difference: bool,
}

impl ProtocolConfig {
    pub fn new(model: ModelSpec) -> Self {
        let n_eff = model.n_sites - 1;
        Self {
            model,
            t_star_grid: Grid { min: 0.0, max: 120.0, step: 0.01 },
            fd_step: 1e-9,
            n_eff,
            basis_grid: Grid { min: -0.7, max: 0.7, step: 0.05 },
            finite_difference: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.t_star_grid.validate()?;
        self.basis_grid.validate()?;
        if self.t_star_grid.min < 0.0 {
            return Err(Error::InvalidArgument("t* grid must start at t* >= 0".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument(format!("fd_step must be > 0, got {}", self.fd_step)));
        }
        let phase_scale = std::f64::consts::PI / (self.model.t_int * self.model.n_sites as f64 * self.model.spin.s());
        if self.fd_step >= 1e-3 * phase_scale {
            return Err(Error::InvalidArgument(format!(
                "fd_step {} does not resolve the target phase (needs << {phase_scale:e})",
                self.fd_step
            )));
        }
        if self.n_eff == 0 || self.n_eff > self.model.n_sites {
            return Err(Error::InvalidArgument(format!("n_eff must be in 1..={}", self.model.n_sites)));
        }
        Ok(())
    }
}

/// Observables at one preparation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolRecord {
    pub t_star: f64,
    /// Fidelity of the first `N - 1` sites with the GHZ-type state.
    pub fidelity: f64,
    /// QFI of the prepared state with respect to `J^z`.
    pub qfi: f64,
    pub p_plus: f64,
    pub dp_domega: f64,
    /// `delta omega * sqrt(t_all)`.
    pub delta_omega: f64,
    /// Central-difference derivative, when requested.
    pub dp_fd: Option<f64>,
}

/// Longest contiguous run of grid points below the standard quantum limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub delta_omega_min: f64,
    pub t_star_at_min: f64,
    pub sql_window: Option<Window>,
    /// `delta_omega_min - hl`.
    pub delta_adv: f64,
    /// Set when `delta_omega_min` falls below the Heisenberg limit.
    pub below_hl: bool,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensingResult {
    pub model: ModelSpec,
    pub limits: PrecisionLimits,
    /// Probability of the step-1 outcome the protocol post-selects on.
    pub success_probability: f64,
    /// QFI of the post-measurement thermal state.
    pub qfi_initial: f64,
    /// Thermal states kept after truncation, and the rank of the prepared state.
    pub thermal_rank: usize,
    pub support_rank: usize,
    pub records: Vec<ProtocolRecord>,
    pub summary: Summary,
}

/// Post-measurement state `sum_k p_k |k><k|` in eigenbasis coordinates.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub probability: f64,
    pub weights: Vec<f64>,
    /// `V^dag |k>` as columns.
    coords: Mat<c64>,
}

impl Prepared {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }
}

/// Precomputed spectral data for one model.
pub struct Engine {
    spec: ModelSpec,
    cache: SpectralCache,
    thermal: Vec<(usize, f64)>,
    jz: Vec<f64>,
    /// `(<pi+| (x) I) V`.
    readout: Mat<c64>,
    qfi_bound: f64,
}

fn bad_point(t_star: f64) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtPoint { module: "protocol", t_star, source: Box::new(e) }
}

fn frobenius_col(m: MatRef<'_, c64>, j: usize) -> f64 {
    m.col(j).squared_norm_l2()
}

impl Engine {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let h = sensor_hamiltonian(spec)?;
        let cache = diagonalize(&h)?;
        Self::from_cache(spec, cache)
    }

    pub fn from_cache(spec: &ModelSpec, cache: SpectralCache) -> Result<Self> {
        let n = spec.dim();
        if cache.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cache.dim() });
        }
        let w = thermal_weights(cache.eigenvalues(), spec.beta);
        let w_max = w.iter().cloned().fold(0.0, f64::max);
        let thermal = w.iter().enumerate().filter(|(_, &x)| x > THERMAL_CUTOFF * w_max).map(|(k, &x)| (k, x)).collect();

        let d = spec.spin.dim();
        let rows = n / d;
        let pi = boundary_vector(spec.spin, &endpoint_coeffs(spec.spin), TopPhase::I)?;
        let v = cache.eigenvectors();
        let (p0, p1) = (pi[0].conj(), pi[d - 1].conj());
        let top = (d - 1) * rows;
        let readout = Mat::from_fn(rows, n, |j, k| p0 * v[(j, k)] + p1 * v[(top + j, k)]);
        Ok(Self {
            spec: spec.clone(),
            jz: collective_z_diagonal(spec.spin, spec.n_sites),
            cache,
            thermal,
            readout,
            qfi_bound: qfi_upper_bound(spec.spin, spec.n_sites),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn cache(&self) -> &SpectralCache {
        &self.cache
    }

    pub fn thermal_rank(&self) -> usize {
        self.thermal.len()
    }

    /// Step 1: project site 1 of the thermal state onto `sum_k a_k |k>`.
    pub fn prepare(&self, coeffs: &[f64]) -> Result<Prepared> {
        let a = boundary_vector(self.spec.spin, coeffs, TopPhase::One)?;
        let n = self.spec.dim();
        let d = a.len();
        let rows = n / d;
        let r = self.thermal.len();
        // amp_k = sqrt(w_k) (<a| (x) I) |E_k>
        let mut amp = Mat::<c64>::zeros(rows, r);
        for (c, &(k, w)) in self.thermal.iter().enumerate() {
            let v = self.cache.eigenvector(k);
            let sw = w.sqrt();
            for (b, ab) in a.iter().enumerate() {
                if ab.norm_sqr() == 0.0 {
                    continue;
                }
                let coef = ab.conj() * sw;
                for j in 0..rows {
                    amp[(j, c)] += coef * v[b * rows + j];
                }
            }
        }
        let gram = amp.adjoint() * &amp;
        let probability: f64 = (0..r).map(|k| gram[(k, k)].re).sum();
        if !(probability >= MIN_PROBABILITY) {
            return Err(Error::ZeroProbability(probability));
        }
        let evd = gram.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let mu: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
        let mu_max = mu.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > SUPPORT_CUTOFF * mu_max).collect();
        let u = evd.U();
        let reduced = Mat::from_fn(r, keep.len(), |i, j| u[(i, keep[j])] / mu[keep[j]].sqrt());
        let support = &amp * reduced;
        // |k> = |a> (x) support_k
        let vecs = Mat::from_fn(n, keep.len(), |i, j| a[i / rows] * support[(i % rows, j)]);
        let coords = self.cache.to_eigenbasis(vecs.as_ref());
        let total: f64 = keep.iter().map(|&i| mu[i]).sum();
        Ok(Prepared { probability, weights: keep.iter().map(|&i| mu[i] / total).collect(), coords })
    }

    /// Support vectors of `U(t) rho U(t)^dag` in the product basis.
    fn propagate(&self, prep: &Prepared, t: f64) -> Mat<c64> {
        let ph = self.cache.phases(t);
        let rotated = Mat::from_fn(prep.coords.nrows(), prep.coords.ncols(), |i, j| ph[i] * prep.coords[(i, j)]);
        self.cache.from_eigenbasis(rotated.as_ref())
    }

    fn fidelity(&self, prep: &Prepared, x: MatRef<'_, c64>) -> f64 {
        let d = self.spec.spin.dim();
        let last = (x.nrows() / d - 1) * d;
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let mut f = 0.0;
        for (k, &p) in prep.weights.iter().enumerate() {
            let overlap: f64 = (0..d).map(|b| ((x[(b, k)] + x[(last + b, k)]) * w).norm_sqr()).sum();
            f += p * overlap;
        }
        f
    }

    fn qfi(&self, prep: &Prepared, x: MatRef<'_, c64>) -> f64 {
        let gx = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * self.jz[i]);
        qfi_low_rank(&prep.weights, x, gx.as_ref())
    }

    /// Fidelity with the `(N - 1)`-site GHZ-type state after step 1.
    pub fn prepared_fidelity(&self, prep: &Prepared, t_star: f64) -> f64 {
        let x = self.propagate(prep, t_star);
        self.fidelity(prep, x.as_ref())
    }

    pub fn prepared_qfi(&self, prep: &Prepared, t_star: f64) -> f64 {
        let x = self.propagate(prep, t_star);
        self.qfi(prep, x.as_ref())
    }

    /// `(p+, dp/domega)` for each omega in `omegas`, from the prepared support `x`.
    fn readout(&self, prep: &Prepared, x: MatRef<'_, c64>, t_star: f64, omegas: &[f64]) -> Vec<(f64, f64)> {
        let t_int = self.spec.t_int;
        let r = x.ncols();
        let blocks = omegas.len();
        // columns: [Y(w_0) | dY(w_0) | Y(w_1) | dY(w_1) | ...]
        let mut y = Mat::<c64>::zeros(x.nrows(), 2 * r * blocks);
        for (b, &omega) in omegas.iter().enumerate() {
            for i in 0..x.nrows() {
                let m = self.jz[i];
                let u = c64::from_polar(1.0, -omega * t_int * m);
                let du = c64::new(0.0, -t_int * m) * u;
                for j in 0..r {
                    y[(i, 2 * r * b + j)] = u * x[(i, j)];
                    y[(i, 2 * r * b + r + j)] = du * x[(i, j)];
                }
            }
        }
        // U_sen(t*)^dag = V diag(exp(+i E t*)) V^dag, then project site 1 on <pi+|
        let mut w = self.cache.to_eigenbasis(y.as_ref());
        let ph = self.cache.phases(t_star);
        for j in 0..w.ncols() {
            for i in 0..w.nrows() {
                w[(i, j)] *= ph[i].conj();
            }
        }
        let pc = complex_times(self.readout.as_ref(), w.as_ref());
        (0..blocks)
            .map(|b| {
                let (mut p, mut dp) = (0.0, 0.0);
                for (k, &pk) in prep.weights.iter().enumerate() {
                    let (c0, c1) = (2 * r * b + k, 2 * r * b + r + k);
                    p += pk * frobenius_col(pc.as_ref(), c0);
                    let inner: c64 = (0..pc.nrows()).map(|i| pc[(i, c0)].conj() * pc[(i, c1)]).sum();
                    dp += pk * 2.0 * inner.re;
                }
                (p, dp)
            })
            .collect()
    }

    /// Steps 1 to 3 at one preparation time.
    pub fn run(&self, prep: &Prepared, t_star: f64, fd_step: Option<f64>) -> Result<ProtocolRecord> {
        let x = self.propagate(prep, t_star);
        let fidelity = self.fidelity(prep, x.as_ref());
        let qfi = self.qfi(prep, x.as_ref());
        if qfi > self.qfi_bound * (1.0 + 1e-9) + 1e-9 {
            return Err(Error::InvalidState(format!("QFI {qfi} exceeds the bound {}", self.qfi_bound)));
        }
        let omega = self.spec.omega;
        let omegas: Vec<f64> = match fd_step {
            Some(h) => vec![omega, omega + h, omega - h],
            None => vec![omega],
        };
        let out = self.readout(prep, x.as_ref(), t_star, &omegas);
        let (p_plus, dp_domega) = out[0];
        let dp_fd = fd_step.map(|h| (out[1].0 - out[2].0) / (2.0 * h));
        let p_clamped = p_plus.clamp(0.0, 1.0);
        let delta_omega = uncertainty_from_probability(p_clamped, dp_domega, 2.0 * t_star + self.spec.t_int)?;
        Ok(ProtocolRecord { t_star, fidelity, qfi, p_plus, dp_domega, delta_omega, dp_fd })
    }
}

/// Steps 1 to 3 at one preparation time with the production measurement basis.
pub fn run_once(cfg: &ProtocolConfig, t_star: f64) -> Result<ProtocolRecord> {
    cfg.validate()?;
    let engine = Engine::new(&cfg.model)?;
    let prep = engine.prepare(&endpoint_coeffs(cfg.model.spin))?;
    let fd = cfg.finite_difference.then_some(cfg.fd_step);
    engine.run(&prep, t_star, fd).map_err(bad_point(t_star))
}

/// The protocol with full density matrices, including the analytic derivative
/// `t_int tr(Pi+ A (-i [J^z, sigma]) A^dag)` with `A = U_sen(t*)^dag`.
pub fn run_once_dense(spec: &ModelSpec, t_star: f64) -> Result<(ProtocolRecord, QState)> {
    spec.validate()?;
    let s = spec.spin;
    let n = spec.n_sites;
    let cache = diagonalize(&sensor_hamiltonian(spec)?)?;
    let thermal = thermal_state_from_cache(&cache, spec.beta)?;
    let m1 = boundary_projector(s, n, &endpoint_coeffs(s), TopPhase::One)?;
    let (post, _) = measure_and_collapse(&thermal, &m1)?;
    let prepared = evolve(&post, &cache, t_star)?;

    let ghz = QState::pure(ghz_amplitudes(s.dim(), n - 1), vec![s.dim(); n - 1])?;
    let fidelity = fidelity_with_pure(&partial_trace_last(&prepared)?, &ghz)?;
    let jz = collective_operator(s, n, Axis::Z)?;
    let qfi = qfi_mixed(&prepared, &jz)?;

    let target = build_target(spec)?;
    let t_diag: Vec<f64> = target.diagonal().iter().map(|z| z.re).collect();
    let encoded = evolve_diagonal(&prepared, &t_diag, spec.t_int)?;
    let final_state = evolve(&encoded, &cache, -t_star)?;
    let pi_plus = boundary_projector(s, n, &endpoint_coeffs(s), TopPhase::I)?;
    let p_plus = final_state.expectation(&pi_plus)?.re;

    // tr(Pi+ A X A^dag) = tr(A^dag Pi+ A X)
    let a = propagator(&cache, -t_star);
    let heis = a.adjoint().mat() * pi_plus.mat() * a.mat();
    let sigma = encoded.density_matrix();
    let comm = jz.mat() * &sigma - &sigma * jz.mat();
    let dim = sigma.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += heis[(i, j)] * comm[(j, i)];
        }
    }
    let dp_domega = (c64::new(0.0, -spec.t_int) * acc).re;
    let delta_omega = uncertainty_from_probability(p_plus.clamp(0.0, 1.0), dp_domega, 2.0 * t_star + spec.t_int)?;
    let record = ProtocolRecord { t_star, fidelity, qfi, p_plus, dp_domega, delta_omega, dp_fd: None };
    Ok((record, final_state))
}

fn widest_window(records: &[ProtocolRecord], sql: f64) -> Option<Window> {
    let mut best: Option<Window> = None;
    let mut start: Option<usize> = None;
    let close = |best: &mut Option<Window>, a: usize, b: usize| {
        let w = Window { start: records[a].t_star, end: records[b].t_star, width: records[b].t_star - records[a].t_star };
        if best.is_none_or(|cur| w.width > cur.width) {
            *best = Some(w);
        }
    };
    for (i, r) in records.iter().enumerate() {
        match (r.delta_omega < sql, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                close(&mut best, a, i - 1);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        close(&mut best, a, records.len() - 1);
    }
    best
}

/// Runs the protocol over the t* grid.
pub fn scan(cfg: &ProtocolConfig) -> Result<SensingResult> {
    cfg.validate()?;
    let engine = Engine::new(&cfg.model)?;
    scan_with(&engine, cfg)
}

/// [`scan`] with an existing engine for `cfg.model`.
pub fn scan_with(engine: &Engine, cfg: &ProtocolConfig) -> Result<SensingResult> {
    cfg.validate()?;
    let spec = &cfg.model;
    if engine.spec() != spec {
        return Err(Error::InvalidArgument("engine was built for a different model".into()));
    }
    let prep = engine.prepare(&endpoint_coeffs(spec.spin))?;
    let fd = cfg.finite_difference.then_some(cfg.fd_step);
    let grid = cfg.t_star_grid.points();
    let records: Vec<ProtocolRecord> = grid
        .par_iter()
        .map(|&t| engine.run(&prep, t, fd).map_err(bad_point(t)))
        .collect::<Result<_>>()?;
    let qfi_initial = engine.prepared_qfi(&prep, 0.0);

    let limits = precision_limits(spec.spin, spec.n_sites, cfg.n_eff, spec.t_int)?;
    // first index wins ties, independent of thread count
    let (best, _) = records.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, r)| {
        if r.delta_omega < bv {
            (i, r.delta_omega)
        } else {
            (bi, bv)
        }
    });
    let min = records[best];
    let t: Vec<f64> = records.iter().map(|r| r.t_star).collect();
    let q: Vec<f64> = records.iter().map(|r| r.qfi).collect();
    let gamma = fit_gamma_trace(&t, &q, qfi_initial, GammaMethod::default()).ok().map(|g| g.gamma);
    let summary = Summary {
        delta_omega_min: min.delta_omega,
        t_star_at_min: min.t_star,
        sql_window: widest_window(&records, limits.sql),
        delta_adv: min.delta_omega - limits.hl,
        below_hl: min.delta_omega < limits.hl,
        gamma,
    };
    Ok(SensingResult {
        model: spec.clone(),
        limits,
        success_probability: prep.probability,
        qfi_initial,
        thermal_rank: engine.thermal_rank(),
        support_rank: prep.rank(),
        records,
        summary,
    })
}

/// Fidelity over the `(a_1, a_2)` grid with `a_0 = a_{d-1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisMap {
    pub t_star: f64,
    pub values: Vec<f64>,
    /// `fidelity[i2][i1]`; `None` where `a_1^2 + a_2^2 > 1`.
    pub fidelity: Vec<Vec<Option<f64>>>,
    pub argmax: (f64, f64),
    pub max_fidelity: f64,
}

/// Scans the step-1 measurement vector `(a_0, a_1, a_2, 0, ..., a_0)`.
pub fn optimize_basis(cfg: &ProtocolConfig, t_star: f64) -> Result<BasisMap> {
    cfg.validate()?;
    let engine = Engine::new(&cfg.model)?;
    optimize_basis_with(&engine, &cfg.basis_grid, t_star)
}

pub fn optimize_basis_with(engine: &Engine, grid: &Grid, t_star: f64) -> Result<BasisMap> {
    let d = engine.spec().spin.dim();
    if d < 4 {
        return Err(Error::InvalidArgument(format!("basis scan needs local dimension >= 4, got {d}")));
    }
    let values = grid.points();
    let cells: Vec<(usize, usize)> = (0..values.len()).flat_map(|i2| (0..values.len()).map(move |i1| (i2, i1))).collect();
    let evaluated: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(i2, i1)| {
            let (a1, a2) = (values[i1], values[i2]);
            let rest = 1.0 - a1 * a1 - a2 * a2;
            if rest < -1e-12 {
                return Ok(None);
            }
            let mut coeffs = vec![0.0; d];
            let edge = (rest.max(0.0) / 2.0).sqrt();
            coeffs[0] = edge;
            coeffs[d - 1] = edge;
            coeffs[1] = a1;
            coeffs[2] = a2;
            match engine.prepare(&coeffs) {
                Ok(prep) => Ok(Some(engine.prepared_fidelity(&prep, t_star))),
                Err(Error::ZeroProbability(_)) => Ok(Some(0.0)),
                Err(e) => Err(bad_point(t_star)(e)),
            }
        })
        .collect::<Result<_>>()?;

    let fmax = evaluated.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !fmax.is_finite() {
        return Err(Error::InvalidArgument("basis grid has no feasible point".into()));
    }
    // values within 1e-12 of the maximum are ties; the point nearest the origin wins
    let mut argmax = (f64::NAN, f64::NAN);
    let mut best_r = f64::INFINITY;
    for (&(i2, i1), f) in cells.iter().zip(&evaluated) {
        if let Some(f) = f {
            let r = values[i1].hypot(values[i2]);
            if *f >= fmax - 1e-12 && r < best_r {
                best_r = r;
                argmax = (values[i1], values[i2]);
            }
        }
    }
    let n = values.len();
    let fidelity = (0..n).map(|i2| evaluated[i2 * n..(i2 + 1) * n].to_vec()).collect();
    Ok(BasisMap { t_star, values, fidelity, argmax, max_fidelity: fmax })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMethod {
    /// Least-squares fit of `c t^gamma` to `QFI(t*) - QFI(0)` from `t* > 0`
    /// up to the first QFI maximum.
    #[default]
    Rise,
    /// Straight-line fit of `log QFI` against `log t*` over all local maxima.
    PeakEnvelope,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub prefactor: f64,
    pub points: usize,
    /// Last t* that entered the fit.
    pub t_end: f64,
    pub method: GammaMethod,
}

/// Half-width, in units of t*, of the neighbourhood a local maximum must dominate.
pub const PEAK_HALF_WIDTH: f64 = 2.0;

/// Indices that are strictly larger than every neighbour within `order` points.
pub fn local_maxima(values: &[f64], order: usize) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            (1..=order).all(|k| {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(n - 1);
                values[i] > values[lo] && values[i] > values[hi]
            })
        })
        .collect()
}

fn power_law_sse(t: &[f64], y: &[f64], gamma: f64) -> (f64, f64) {
    let (mut sty, mut stt) = (0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let p = ti.powf(gamma);
        sty += p * yi;
        stt += p * p;
    }
    let c = sty / stt;
    let sse = t.iter().zip(y).map(|(&ti, &yi)| (yi - c * ti.powf(gamma)).powi(2)).sum();
    (sse, c)
}

/// Least-squares `y ~ c t^gamma`. For fixed `gamma` the best `c` is linear,
/// so only `gamma` is searched: a coarse scan then golden-section refinement.
pub fn fit_power_law(t: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if t.len() < 3 || t.len() != y.len() {
        return Err(Error::Fit(format!("need at least 3 points, got {}", t.len())));
    }
    if t.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Fit("power law needs t > 0".into()));
    }
    let (lo, hi, steps) = (0.0, 6.0, 600);
    let h = (hi - lo) / steps as f64;
    let sse = |g: f64| power_law_sse(t, y, g).0;
    let best = (0..=steps).map(|i| lo + i as f64 * h).min_by(|a, b| sse(*a).total_cmp(&sse(*b))).unwrap();
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    while b - a > 1e-10 {
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let gamma = 0.5 * (a + b);
    Ok((gamma, power_law_sse(t, y, gamma).1))
}

fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Time-scaling exponent of a QFI trace sampled on a uniform t* grid.
pub fn fit_gamma_trace(t: &[f64], qfi: &[f64], qfi_initial: f64, method: GammaMethod) -> Result<GammaFit> {
    if t.len() != qfi.len() || t.len() < 3 {
        return Err(Error::Fit("trace too short".into()));
    }
    let dt = t[1] - t[0];
    let order = ((PEAK_HALF_WIDTH / dt).round() as usize).max(1);
    let peaks: Vec<usize> = local_maxima(qfi, order).into_iter().filter(|&i| t[i] > 0.0).collect();
    match method {
        GammaMethod::Rise => {
            let &first = peaks.first().ok_or_else(|| Error::Fit("QFI trace has no local maximum".into()))?;
            let (tt, yy): (Vec<f64>, Vec<f64>) =
                (0..=first).filter(|&i| t[i] > 0.0).map(|i| (t[i], qfi[i] - qfi_initial)).unzip();
            let (gamma, prefactor) = fit_power_law(&tt, &yy)?;
            Ok(GammaFit { gamma, prefactor, points: tt.len(), t_end: t[first], method })
        }
        GammaMethod::PeakEnvelope => {
            if peaks.len() < 5 {
                return Err(Error::Fit(format!("need at least 5 QFI maxima, found {}", peaks.len())));
            }
            if peaks.iter().any(|&i| !(qfi[i] > 0.0)) {
                return Err(Error::Fit("non-positive QFI peak".into()));
            }
            let lx: Vec<f64> = peaks.iter().map(|&i| t[i].ln()).collect();
            let ly: Vec<f64> = peaks.iter().map(|&i| qfi[i].ln()).collect();
            let (gamma, intercept) = ols_slope(&lx, &ly);
            Ok(GammaFit { gamma, prefactor: intercept.exp(), points: peaks.len(), t_end: t[*peaks.last().unwrap()], method })
        }
    }
}

pub fn fit_gamma(result: &SensingResult, method: GammaMethod) -> Result<GammaFit> {
    let t: Vec<f64> = result.records.iter().map(|r| r.t_star).collect();
    let q: Vec<f64> = result.records.iter().map(|r| r.qfi).collect();
    fit_gamma_trace(&t, &q, result.qfi_initial, method)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub result: SensingResult,
    /// `(alpha, delta_adv)` for every grid value.
    pub landscape: Vec<(f64, f64)>,
}

/// Fall-off rate of the next-nearest-neighbour model that minimizes `delta_adv`.
pub fn optimize_alpha(cfg: &ProtocolConfig, alpha_grid: &Grid) -> Result<AlphaOptimum> {
    cfg.validate()?;
    alpha_grid.validate()?;
    if !(alpha_grid.min > 0.0) {
        return Err(Error::InvalidArgument("alpha grid must be > 0".into()));
    }
    let mut best: Option<(f64, SensingResult)> = None;
    let mut landscape = Vec::new();
    for alpha in alpha_grid.points() {
        let run = ProtocolConfig { model: ModelSpec { alpha: Some(alpha), ..cfg.model.clone() }, ..cfg.clone() };
        let result = scan(&run)?;
        landscape.push((alpha, result.summary.delta_adv));
        if best.as_ref().is_none_or(|(_, b)| result.summary.delta_adv < b.summary.delta_adv) {
            best = Some((alpha, result));
        }
    }
    let (alpha, result) = best.expect("alpha grid is never empty");
    Ok(AlphaOptimum { alpha, result, landscape })
}
