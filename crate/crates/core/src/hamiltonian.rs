//! Sensor and target Hamiltonians of an open spin-s chain.

use std::f64::consts::PI;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinops::{add_product_term, spin_matrix, Axis, QOperator, SpinValue};

/// Chain description. Units have hbar = 1; boundaries are always open.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_sites: usize,
    pub spin: SpinValue,
    /// Nearest-neighbour `S^z S^z` coupling. Negative is ferromagnetic.
    pub coupling: f64,
    /// Transverse field `h` along `S^x`.
    pub field: f64,
    pub beta: f64,
    /// Next-nearest-neighbour fall-off. `None` selects the nearest-neighbour model.
    pub alpha: Option<f64>,
    /// Target field strength.
    pub omega: f64,
    /// Interaction time with the target.
    pub t_int: f64,
    /// Middle factor of the three-site term `S^z_i M_{i+1} S^z_{i+2}`.
    pub nnn_middle: Axis,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            n_sites: 4,
            spin: SpinValue::HALF,
            coupling: -1.0,
            field: 0.1,
            beta: 10.0,
            alpha: None,
            omega: 1e-6,
            t_int: 500.0 * PI,
            nnn_middle: Axis::X,
        }
    }
}

impl ModelSpec {
    pub fn with_spin(spin: SpinValue) -> Self {
        Self { spin, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidModel(format!("need at least 2 sites, got {}", self.n_sites)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidModel(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.t_int > 0.0) || !self.t_int.is_finite() {
            return Err(Error::InvalidModel(format!("t_int must be > 0, got {}", self.t_int)));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidModel(format!("alpha must be > 0, got {alpha}")));
            }
        }
        for (name, v) in [("coupling", self.coupling), ("field", self.field), ("omega", self.omega)] {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("{name} must be finite")));
            }
        }
        if self.nnn_middle == Axis::Squared {
            return Err(Error::InvalidModel("nnn_middle must be x, y or z".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.spin.dim().pow(self.n_sites as u32)
    }

    /// Coupling that multiplies the interaction terms: `coupling` for the
    /// nearest-neighbour model, the Kac factor carrying the sign of
    /// `coupling` when `alpha` is set.
    pub fn effective_coupling(&self) -> f64 {
        match self.alpha {
            None => self.coupling,
            Some(alpha) => self.coupling.signum() * kac_factor(alpha),
        }
    }
}

/// `(1 + 2^-alpha)^-1`.
pub fn kac_factor(alpha: f64) -> f64 {
    1.0 / (1.0 + 2f64.powf(-alpha))
}

fn real(v: f64) -> c64 {
    c64::new(v, 0.0)
}

fn nearest_neighbour_terms(spec: &ModelSpec, coupling: f64, out: &mut QOperator) -> Result<()> {
    let (d, n) = (spec.spin.dim(), spec.n_sites);
    let sz = spin_matrix(spec.spin, Axis::Z);
    let sx = spin_matrix(spec.spin, Axis::X);
    let mat = out.mat_mut();
    for i in 1..n {
        add_product_term(mat, real(coupling), d, n, &[(i, &sz), (i + 1, &sz)])?;
    }
    for i in 1..=n {
        add_product_term(mat, real(spec.field), d, n, &[(i, &sx)])?;
    }
    Ok(())
}

/// `J sum S^z_i S^z_{i+1} + h sum S^x_i`.
pub fn build_sensor(spec: &ModelSpec) -> Result<QOperator> {
    spec.validate()?;
    if spec.alpha.is_some() {
        return Err(Error::InvalidModel("build_sensor is the nearest-neighbour model; alpha is set".into()));
    }
    let mut out = QOperator::zeros(vec![spec.spin.dim(); spec.n_sites]);
    nearest_neighbour_terms(spec, spec.coupling, &mut out)?;
    Ok(out)
}

/// `J sum S^z_i S^z_{i+1} + (J / 2^alpha) sum S^z_i M_{i+1} S^z_{i+2} + h sum S^x_i`
/// with `J` the Kac factor. `M` defaults to `S^x`.
pub fn build_sensor_nnn(spec: &ModelSpec) -> Result<QOperator> {
    spec.validate()?;
    let alpha = spec
        .alpha
        .ok_or_else(|| Error::InvalidModel("build_sensor_nnn needs alpha".into()))?;
    let coupling = spec.effective_coupling();
    let (d, n) = (spec.spin.dim(), spec.n_sites);
    let mut out = QOperator::zeros(vec![d; n]);
    nearest_neighbour_terms(spec, coupling, &mut out)?;
    let sz = spin_matrix(spec.spin, Axis::Z);
    let middle = spin_matrix(spec.spin, spec.nnn_middle);
    let weight = coupling * 2f64.powf(-alpha);
    for i in 1..n.saturating_sub(1) {
        add_product_term(out.mat_mut(), real(weight), d, n, &[(i, &sz), (i + 1, &middle), (i + 2, &sz)])?;
    }
    Ok(out)
}

/// Dispatches on `spec.alpha`.
pub fn sensor_hamiltonian(spec: &ModelSpec) -> Result<QOperator> {
    match spec.alpha {
        None => build_sensor(spec),
        Some(_) => build_sensor_nnn(spec),
    }
}

/// `omega * J^z`.
pub fn build_target(spec: &ModelSpec) -> Result<QOperator> {
    let diag = target_diagonal(spec);
    QOperator::from_real_diagonal(&diag, vec![spec.spin.dim(); spec.n_sites])
}

/// Diagonal of `omega * J^z` in the product basis.
pub fn target_diagonal(spec: &ModelSpec) -> Vec<f64> {
    crate::spinops::collective_z_diagonal(spec.spin, spec.n_sites)
        .into_iter()
        .map(|m| spec.omega * m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::embed;

    fn spec(n: usize, two_s: u32, coupling: f64, field: f64) -> ModelSpec {
        ModelSpec {
            n_sites: n,
            spin: SpinValue::from_two_s(two_s).unwrap(),
            coupling,
            field,
            ..ModelSpec::default()
        }
    }

    fn op_diag(op: &QOperator) -> Vec<f64> {
        op.diagonal().iter().map(|z| z.re).collect()
    }

    #[test]
    fn single_zz_bond() {
        let h = build_sensor(&spec(2, 1, 1.0, 0.0)).unwrap();
        assert!(h.is_diagonal());
        assert_eq!(op_diag(&h), vec![0.25, -0.25, -0.25, 0.25]);
    }

    #[test]
    fn pure_field_is_sum_of_sx() {
        let h = build_sensor(&spec(2, 1, 0.0, 1.0)).unwrap();
        let sx = spin_matrix(SpinValue::HALF, Axis::X);
        let expect = &embed(&sx, 1, 2).unwrap() + &embed(&sx, 2, 2).unwrap();
        assert!(h.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn pure_field_spectrum_is_minkowski_sum() {
        let h = build_sensor(&spec(2, 2, 0.0, 1.0)).unwrap();
        let mut ev = h.mat().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        ev.sort_by(f64::total_cmp);
        let single = [-1.0, 0.0, 1.0];
        let mut expect: Vec<f64> = single.iter().flat_map(|a| single.iter().map(move |b| a + b)).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sensor_hamiltonians_are_hermitian() {
        for two_s in 1..=4 {
            let mut sp = spec(3, two_s, -1.0, 0.1);
            assert!(build_sensor(&sp).unwrap().hermiticity_error() <= 1e-12);
            sp.alpha = Some(1.3);
            assert!(build_sensor_nnn(&sp).unwrap().hermiticity_error() <= 1e-12);
            assert!(build_target(&sp).unwrap().hermiticity_error() <= 1e-12);
        }
    }

    #[test]
    fn kac_factor_limits() {
        assert!((kac_factor(40.0) - 1.0).abs() < 1e-11);
        assert_eq!(kac_factor(0.0), 0.5);
    }

    #[test]
    fn nnn_three_site_spin_half() {
        let mut sp = spec(3, 1, 1.0, 0.0);
        sp.alpha = Some(1.0);
        let h = build_sensor_nnn(&sp).unwrap();
        let z = spin_matrix(SpinValue::HALF, Axis::Z);
        let x = spin_matrix(SpinValue::HALF, Axis::X);
        let zz12 = z.kron(&z).kron(&QOperator::identity(vec![2]));
        let zz23 = QOperator::identity(vec![2]).kron(&z).kron(&z);
        let zxz = z.kron(&x).kron(&z);
        let expect = &(&zz12 + &zz23).scale(real(2.0 / 3.0)) + &zxz.scale(real(1.0 / 3.0));
        assert!(h.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn nnn_converges_to_nearest_neighbour() {
        let base = spec(4, 2, 1.0, 0.1);
        let nn = build_sensor(&base).unwrap();
        let nnn = build_sensor_nnn(&ModelSpec { alpha: Some(40.0), ..base }).unwrap();
        assert!(nn.max_abs_diff(&nnn) < 1e-10);
    }

    #[test]
    fn nnn_keeps_sign_of_coupling() {
        let sp = ModelSpec { alpha: Some(2.0), ..spec(3, 1, -1.0, 0.0) };
        assert!((sp.effective_coupling() + 0.8).abs() < 1e-15);
        let h = build_sensor_nnn(&sp).unwrap();
        // |000> sees two ferromagnetic bonds
        assert!((h.get(0, 0).re + 0.8 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn target_is_diagonal_with_expected_range() {
        let sp = ModelSpec { omega: 2.0, ..spec(2, 1, 1.0, 0.1) };
        let single = build_target(&ModelSpec { n_sites: 2, ..sp.clone() }).unwrap();
        assert!(single.is_diagonal());
        let t1 = target_diagonal(&ModelSpec { n_sites: 1, ..sp.clone() });
        assert_eq!(t1, vec![1.0, -1.0]);
        let sp3 = ModelSpec { n_sites: 3, spin: SpinValue::from_two_s(3).unwrap(), ..sp };
        let diag = target_diagonal(&sp3);
        let lo = diag.iter().cloned().fold(f64::MAX, f64::min);
        let hi = diag.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!((lo, hi), (-2.0 * 3.0 * 1.5, 2.0 * 3.0 * 1.5));
    }

    #[test]
    fn build_sensor_rejects_mismatched_model() {
        let mut sp = spec(3, 1, 1.0, 0.1);
        sp.alpha = Some(1.0);
        assert!(build_sensor(&sp).is_err());
        sp.alpha = None;
        assert!(build_sensor_nnn(&sp).is_err());
        sp.n_sites = 1;
        assert!(build_sensor(&sp).is_err());
        sp.n_sites = 3;
        sp.beta = -1.0;
        assert!(sp.validate().is_err());
    }
}
