//! Quantum Fisher information, symmetric logarithmic derivative, precision
//! limits and QFI-based entanglement bounds for spin-s ensembles.

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spinops::{QOperator, SpinValue};
use crate::states::{QState, StateKind};

/// Terms with `p_k + p_l` at or below this fraction of the largest
/// eigenvalue are dropped from the spectral sums.
pub const QFI_CUTOFF: f64 = 1e-12;

fn generator_in_eigenbasis(u: &Mat<c64>, g: &QOperator) -> Mat<c64> {
    u.adjoint() * g.mat() * u
}

/// `F_Q = 2 sum (p_k - p_l)^2 / (p_k + p_l) |<k|G|l>|^2`.
pub fn qfi_mixed(rho: &QState, g: &QOperator) -> Result<f64> {
    rho.check_dim(g.dim())?;
    let (p, u) = rho.spectrum()?;
    let gk = generator_in_eigenbasis(&u, g);
    let eps = QFI_CUTOFF * p.iter().cloned().fold(0.0, f64::max);
    let n = p.len();
    let mut acc = 0.0;
    for k in 0..n {
        for l in 0..n {
            let sum = p[k] + p[l];
            if sum <= eps {
                continue;
            }
            let diff = p[k] - p[l];
            acc += diff * diff / sum * gk[(k, l)].norm_sqr();
        }
    }
    Ok(2.0 * acc)
}

/// `4 (<G^2> - <G>^2)` for a pure state.
pub fn qfi_pure(psi: &QState, g: &QOperator) -> Result<f64> {
    let v = psi
        .amplitudes()
        .ok_or_else(|| Error::InvalidArgument("qfi_pure needs a pure state".into()))?;
    psi.check_dim(g.dim())?;
    let gv = g.mat() * v;
    let mean: c64 = (0..v.nrows()).map(|i| v[i].conj() * gv[i]).sum();
    let second = gv.squared_norm_l2();
    Ok(4.0 * (second - mean.re * mean.re).max(0.0))
}

/// [`qfi_pure`] for a generator that is diagonal in the product basis.
pub fn qfi_pure_diagonal(amps: &[c64], diag: &[f64]) -> f64 {
    let (mut mean, mut second) = (0.0, 0.0);
    for (a, &g) in amps.iter().zip(diag) {
        let w = a.norm_sqr();
        mean += w * g;
        second += w * g * g;
    }
    4.0 * (second - mean * mean).max(0.0)
}

/// QFI of `rho = sum_k p_k |k><k|` from its support only.
///
/// `vecs` holds the orthonormal support eigenvectors as columns and `g_vecs`
/// holds `G |k>`. Pairs with one vector outside the support contribute
/// `4 p_k (<k|G^2|k> - sum_l |<l|G|k>|^2)` in total, so the complement never
/// has to be formed.
pub fn qfi_low_rank(p: &[f64], vecs: MatRef<'_, c64>, g_vecs: MatRef<'_, c64>) -> f64 {
    let r = p.len();
    let gkl = vecs.adjoint() * g_vecs;
    let eps = QFI_CUTOFF * p.iter().cloned().fold(0.0, f64::max);
    let mut acc = 0.0;
    for k in 0..r {
        let mut inside = 0.0;
        for l in 0..r {
            let mag = gkl[(l, k)].norm_sqr();
            inside += mag;
            let sum = p[k] + p[l];
            if sum > eps {
                let diff = p[k] - p[l];
                acc += 2.0 * diff * diff / sum * mag;
            }
        }
        let second = g_vecs.col(k).squared_norm_l2();
        acc += 4.0 * p[k] * (second - inside).max(0.0);
    }
    acc
}

/// Symmetric logarithmic derivative for `rho(theta) = exp(-i G theta) rho exp(i G theta)`.
pub fn sld(rho: &QState, g: &QOperator) -> Result<QOperator> {
    rho.check_dim(g.dim())?;
    let (p, u) = rho.spectrum()?;
    let gk = generator_in_eigenbasis(&u, g);
    let eps = QFI_CUTOFF * p.iter().cloned().fold(0.0, f64::max);
    let n = p.len();
    let l_eig = Mat::from_fn(n, n, |k, l| {
        let sum = p[k] + p[l];
        if sum <= eps {
            c64::new(0.0, 0.0)
        } else {
            c64::new(0.0, 2.0 * (p[k] - p[l]) / sum) * gk[(k, l)]
        }
    });
    let l = &u * l_eig * u.adjoint();
    let herm = Mat::from_fn(n, n, |i, j| (l[(i, j)] + l[(j, i)].conj()) * 0.5);
    QOperator::new(herm, rho.local_dims().to_vec())
}

/// `tr(rho L^2)`.
pub fn sld_qfi(rho: &QState, l: &QOperator) -> Result<f64> {
    let l2 = l * l;
    Ok(rho.expectation(&l2)?.re)
}

/// `4 * Var(G)` in `rho`; an upper bound on the QFI of any state.
pub fn variance_bound(rho: &QState, g: &QOperator) -> Result<f64> {
    let mean = rho.expectation(g)?.re;
    let second = rho.expectation(&(g * g))?.re;
    Ok(4.0 * (second - mean * mean))
}

/// `4 s^2 N^2`.
pub fn qfi_upper_bound(s: SpinValue, n_sites: usize) -> f64 {
    let sn = s.s() * n_sites as f64;
    4.0 * sn * sn
}

/// `4 s N (s N + 1)`, the bound on `sum_alpha F_Q(J^alpha)`.
pub fn qfi_sum_bound(s: SpinValue, n_sites: usize) -> f64 {
    let sn = s.s() * n_sites as f64;
    4.0 * sn * (sn + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProducibleBound {
    /// Bound on `F_Q(rho, J^alpha)` for one axis.
    pub axis: f64,
    /// Bound on the sum over the three axes.
    pub sum: f64,
}

/// QFI bounds for a product of blocks with `r_i` entangled parties each.
pub fn k_producible_bound(s: SpinValue, partition: &[usize]) -> Result<ProducibleBound> {
    if partition.is_empty() {
        return Err(Error::InvalidArgument("partition is empty".into()));
    }
    if partition.contains(&0) {
        return Err(Error::InvalidArgument("partition blocks must have at least one party".into()));
    }
    let s = s.s();
    let axis = 4.0 * s * s * partition.iter().map(|&r| (r * r) as f64).sum::<f64>();
    let sum = 4.0 * partition.iter().map(|&r| s * r as f64 * (s * r as f64 + 1.0)).sum::<f64>();
    Ok(ProducibleBound { axis, sum })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Producibility {
    pub k: usize,
    /// The unconstrained value exceeded `N` and was capped.
    pub saturated: bool,
}

/// Smallest `k` for which a `k`-producible spin-`s2` state can reach the
/// largest QFI of `N` spin-`s1` parties: `k = ceil(1 + N s1 / s2)`, capped at `N`.
pub fn min_producibility(n_sites: usize, s1: SpinValue, s2: SpinValue) -> Result<Producibility> {
    if s2 < s1 {
        return Err(Error::InvalidArgument(format!("need s2 >= s1, got s1 = {s1}, s2 = {s2}")));
    }
    let num = n_sites as u64 * s1.two_s() as u64;
    let den = s2.two_s() as u64;
    let k = 1 + num.div_ceil(den) as usize;
    if k > n_sites {
        Ok(Producibility { k: n_sites, saturated: true })
    } else {
        Ok(Producibility { k, saturated: false })
    }
}

/// Standard quantum and Heisenberg limits scaled by `sqrt(t_all)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrecisionLimits {
    pub sql: f64,
    pub hl: f64,
    pub s: f64,
    pub n_sites: usize,
    pub n_eff: usize,
    pub t: f64,
}

/// `sql = 1 / (2 s sqrt(N t))`, `hl = 1 / (2 s n_eff sqrt t)`.
pub fn precision_limits(s: SpinValue, n_sites: usize, n_eff: usize, t: f64) -> Result<PrecisionLimits> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("interrogation time must be > 0, got {t}")));
    }
    if n_sites == 0 || n_eff == 0 {
        return Err(Error::InvalidArgument("need at least one qudit".into()));
    }
    let two_s = 2.0 * s.s();
    Ok(PrecisionLimits {
        sql: 1.0 / (two_s * (n_sites as f64 * t).sqrt()),
        hl: 1.0 / (two_s * n_eff as f64 * t.sqrt()),
        s: s.s(),
        n_sites,
        n_eff,
        t,
    })
}

/// `sqrt(p (1 - p)) sqrt(t_sense) / |dp/dw|`.
pub fn uncertainty_from_probability(p_plus: f64, dp_domega: f64, t_sense: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(Error::InvalidArgument(format!("probability {p_plus} outside [0, 1]")));
    }
    if !(t_sense > 0.0) {
        return Err(Error::InvalidArgument(format!("t_sense must be > 0, got {t_sense}")));
    }
    if !(dp_domega.abs() >= 1e-300) {
        return Err(Error::Insensitive(dp_domega.abs()));
    }
    Ok((p_plus * (1.0 - p_plus)).sqrt() * t_sense.sqrt() / dp_domega.abs())
}

/// Eigenvalues above the QFI cutoff and their eigenvectors as columns.
pub fn state_support(rho: &QState) -> Result<(Vec<f64>, Mat<c64>)> {
    match rho.kind() {
        StateKind::Pure(v) => Ok((vec![1.0], Mat::from_fn(v.nrows(), 1, |i, _| v[i]))),
        StateKind::Mixed(_) => {
            let (p, u) = rho.spectrum()?;
            let pmax = p.iter().cloned().fold(0.0, f64::max);
            let keep: Vec<usize> = (0..p.len()).filter(|&k| p[k] > QFI_CUTOFF * pmax).collect();
            let vecs = Mat::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
            Ok((keep.iter().map(|&k| p[k]).collect(), vecs))
        }
    }
}
