//! Spin-s operators and their tensor-product embedding on a chain.
//!
//! Basis labels run `|0>, |1>, ..., |d-1>` with `|k>` carrying magnetic quantum
//! number `m = s - k`, so `S^z |0> = s |0>`. Site 1 is the leftmost, slowest
//! varying tensor factor.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Spin quantum number stored as `2s`, so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinValue {
    two_s: u32,
}

impl SpinValue {
    pub const HALF: SpinValue = SpinValue { two_s: 1 };

    pub fn from_two_s(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::InvalidSpin("s = 0 has a one-dimensional Hilbert space".into()));
        }
        Ok(Self { two_s })
    }

    /// Accepts decimals such as `0.5`, `1`, `1.5`; anything that is not a
    /// positive half-integer (to 1e-9) is rejected.
    pub fn from_f64(s: f64) -> Result<Self> {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::InvalidSpin(format!("{s} is not a positive half-integer")));
        }
        let twice = 2.0 * s;
        let rounded = twice.round();
        if (twice - rounded).abs() > 1e-9 || rounded > u32::MAX as f64 {
            return Err(Error::InvalidSpin(format!("{s} is not a positive half-integer")));
        }
        Self::from_two_s(rounded as u32)
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn s(self) -> f64 {
        self.two_s as f64 / 2.0
    }

    /// Local Hilbert-space dimension `d = 2s + 1`.
    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.two_s.is_multiple_of(2)
    }

    /// Magnetic quantum number of basis label `k`.
    pub fn m(self, k: usize) -> f64 {
        self.s() - k as f64
    }
}

impl fmt::Display for SpinValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

impl FromStr for SpinValue {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: u32 = num
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpin(format!("cannot parse {text:?}")))?;
            let den: u32 = den
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpin(format!("cannot parse {text:?}")))?;
            return match den {
                1 => Self::from_two_s(num.checked_mul(2).ok_or_else(|| {
                    Error::InvalidSpin(format!("{text:?} is too large"))
                })?),
                2 => Self::from_two_s(num),
                _ => Err(Error::InvalidSpin(format!("{text:?} is not a half-integer"))),
            };
        }
        let value: f64 = text
            .parse()
            .map_err(|_| Error::InvalidSpin(format!("cannot parse {text:?}")))?;
        Self::from_f64(value)
    }
}

impl Serialize for SpinValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.s())
    }
}

impl<'de> Deserialize<'de> for SpinValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Int(v) => SpinValue::from_f64(v as f64),
            Raw::Float(v) => SpinValue::from_f64(v),
            Raw::Text(v) => v.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    /// Total spin `S^2 = s(s+1) I`.
    Squared,
}

/// Dense complex operator on a tensor-product space.
#[derive(Clone, Debug)]
pub struct QOperator {
    mat: Mat<c64>,
    local_dims: Vec<usize>,
}

impl QOperator {
    pub fn new(mat: Mat<c64>, local_dims: Vec<usize>) -> Result<Self> {
        let dim: usize = local_dims.iter().product();
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), found: mat.ncols() });
        }
        if local_dims.is_empty() || dim != mat.nrows() {
            return Err(Error::DimensionMismatch { expected: dim, found: mat.nrows() });
        }
        Ok(Self { mat, local_dims })
    }

    /// Single-factor operator of dimension `dim`.
    pub fn from_mat(mat: Mat<c64>) -> Result<Self> {
        let n = mat.nrows();
        Self::new(mat, vec![n])
    }

    pub fn identity(local_dims: Vec<usize>) -> Self {
        let dim = local_dims.iter().product();
        Self { mat: Mat::identity(dim, dim), local_dims }
    }

    pub fn zeros(local_dims: Vec<usize>) -> Self {
        let dim = local_dims.iter().product();
        Self { mat: Mat::zeros(dim, dim), local_dims }
    }

    pub fn from_real_diagonal(diag: &[f64], local_dims: Vec<usize>) -> Result<Self> {
        let dim: usize = local_dims.iter().product();
        if diag.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: diag.len() });
        }
        let mat = Mat::from_fn(dim, dim, |i, j| if i == j { c64::new(diag[i], 0.0) } else { c64::new(0.0, 0.0) });
        Ok(Self { mat, local_dims })
    }

    /// Rank-one projector `|v><v|` (the vector is used as given).
    pub fn outer(v: &[c64], local_dims: Vec<usize>) -> Result<Self> {
        let dim: usize = local_dims.iter().product();
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        let mat = Mat::from_fn(dim, dim, |i, j| v[i] * v[j].conj());
        Ok(Self { mat, local_dims })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    /// `(site, local dimension)` pairs, sites numbered from 1.
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.local_dims.iter().enumerate().map(|(i, &d)| (i + 1, d))
    }

    pub fn n_sites(&self) -> usize {
        self.local_dims.len()
    }

    pub fn mat(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> c64 {
        self.mat[(row, col)]
    }

    /// max |A - A^dag| over entries.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in j..n {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.mat[(i, j)].im == 0.0))
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.mat[(i, j)] == c64::new(0.0, 0.0)))
    }

    pub fn diagonal(&self) -> Vec<c64> {
        (0..self.dim()).map(|i| self.mat[(i, i)]).collect()
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint().to_owned(), local_dims: self.local_dims.clone() }
    }

    pub fn scale(&self, factor: c64) -> Self {
        let n = self.dim();
        Self { mat: Mat::from_fn(n, n, |i, j| self.mat[(i, j)] * factor), local_dims: self.local_dims.clone() }
    }

    pub fn checked_mul(&self, rhs: &QOperator) -> Result<QOperator> {
        self.check_same_dim(rhs)?;
        Ok(Self { mat: &self.mat * &rhs.mat, local_dims: self.local_dims.clone() })
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, rhs: &QOperator) -> Result<QOperator> {
        self.check_same_dim(rhs)?;
        let ab = &self.mat * &rhs.mat;
        let ba = &rhs.mat * &self.mat;
        Ok(Self { mat: ab - ba, local_dims: self.local_dims.clone() })
    }

    pub fn kron(&self, rhs: &QOperator) -> QOperator {
        let (n, m) = (self.dim(), rhs.dim());
        let mat = Mat::from_fn(n * m, n * m, |i, j| self.mat[(i / m, j / m)] * rhs.mat[(i % m, j % m)]);
        let mut local_dims = self.local_dims.clone();
        local_dims.extend_from_slice(&rhs.local_dims);
        Self { mat, local_dims }
    }

    pub fn max_abs_diff(&self, rhs: &QOperator) -> f64 {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((self.mat[(i, j)] - rhs.mat[(i, j)]).norm());
            }
        }
        worst
    }

    /// Nonzero entries as `(row, col, value)`.
    pub(crate) fn nonzeros(&self) -> Vec<(usize, usize, c64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = self.mat[(i, j)];
                if v != c64::new(0.0, 0.0) {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub(crate) fn mat_mut(&mut self) -> &mut Mat<c64> {
        &mut self.mat
    }

    fn check_same_dim(&self, rhs: &QOperator) -> Result<()> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(())
    }
}

impl Add for &QOperator {
    type Output = QOperator;

    /// Panics on dimension mismatch.
    fn add(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        QOperator { mat: &self.mat + &rhs.mat, local_dims: self.local_dims.clone() }
    }
}

impl Sub for &QOperator {
    type Output = QOperator;

    fn sub(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        QOperator { mat: &self.mat - &rhs.mat, local_dims: self.local_dims.clone() }
    }
}

impl Mul for &QOperator {
    type Output = QOperator;

    fn mul(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        QOperator { mat: &self.mat * &rhs.mat, local_dims: self.local_dims.clone() }
    }
}

/// The `d x d` spin matrix along `axis`.
pub fn spin_matrix(s: SpinValue, axis: Axis) -> QOperator {
    let d = s.dim();
    let ss1 = s.s() * (s.s() + 1.0);
    let mut mat = Mat::<c64>::zeros(d, d);
    match axis {
        Axis::Z => {
            for k in 0..d {
                mat[(k, k)] = c64::new(s.m(k), 0.0);
            }
        }
        Axis::Squared => {
            for k in 0..d {
                mat[(k, k)] = c64::new(ss1, 0.0);
            }
        }
        Axis::X | Axis::Y => {
            // label k-1 has m' = m + 1 relative to label k
            for k in 1..d {
                let amp = 0.5 * (ss1 - s.m(k - 1) * s.m(k)).sqrt();
                let (up, down) = match axis {
                    Axis::X => (c64::new(amp, 0.0), c64::new(amp, 0.0)),
                    // (1/2i) sqrt(..) on the raising element, its conjugate below
                    _ => (c64::new(0.0, -amp), c64::new(0.0, amp)),
                };
                mat[(k - 1, k)] = up;
                mat[(k, k - 1)] = down;
            }
        }
    }
    QOperator { mat, local_dims: vec![d] }
}

/// Adds `coeff * (A_1 (x) A_2 (x) ...)` into `target`, where `factors` lists
/// `(site, operator)` with 1-based sites and the identity fills every other
/// site. Only nonzero entries are visited.
pub(crate) fn add_product_term(
    target: &mut Mat<c64>,
    coeff: c64,
    d: usize,
    n_sites: usize,
    factors: &[(usize, &QOperator)],
) -> Result<()> {
    let mut per_site: Vec<Option<Vec<(usize, usize, c64)>>> = vec![None; n_sites];
    for &(site, op) in factors {
        if site == 0 || site > n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites });
        }
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
        }
        if per_site[site - 1].is_some() {
            return Err(Error::InvalidArgument(format!("site {site} appears twice in a product")));
        }
        per_site[site - 1] = Some(op.nonzeros());
    }
    let dim = d.pow(n_sites as u32);
    if target.nrows() != dim || target.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: target.nrows() });
    }
    let mut entries: Vec<(usize, usize, c64)> = vec![(0, 0, coeff)];
    for site in per_site.iter() {
        let mut next = Vec::with_capacity(entries.len() * d);
        match site {
            Some(nz) => {
                for &(r, c, v) in &entries {
                    for &(a, b, x) in nz {
                        next.push((r * d + a, c * d + b, v * x));
                    }
                }
            }
            None => {
                for &(r, c, v) in &entries {
                    for a in 0..d {
                        next.push((r * d + a, c * d + a, v));
                    }
                }
            }
        }
        entries = next;
    }
    for (r, c, v) in entries {
        target[(r, c)] += v;
    }
    Ok(())
}

/// `I (x) ... (x) local (x) ... (x) I` with `local` on `site` (1-based).
pub fn embed(local: &QOperator, site: usize, n_sites: usize) -> Result<QOperator> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    let d = local.dim();
    let mut out = QOperator::zeros(vec![d; n_sites]);
    add_product_term(out.mat_mut(), c64::new(1.0, 0.0), d, n_sites, &[(site, local)])?;
    Ok(out)
}

/// `J^axis = sum_i S_i^axis`.
pub fn collective_operator(s: SpinValue, n_sites: usize, axis: Axis) -> Result<QOperator> {
    if n_sites == 0 {
        return Err(Error::InvalidArgument("a chain needs at least one site".into()));
    }
    let local = spin_matrix(s, axis);
    let d = s.dim();
    let mut out = QOperator::zeros(vec![d; n_sites]);
    for site in 1..=n_sites {
        add_product_term(out.mat_mut(), c64::new(1.0, 0.0), d, n_sites, &[(site, &local)])?;
    }
    Ok(out)
}

/// Eigenvalues of `J^z` on the product basis, indexed like the state vector.
pub fn collective_z_diagonal(s: SpinValue, n_sites: usize) -> Vec<f64> {
    let d = s.dim();
    let dim = d.pow(n_sites as u32);
    (0..dim)
        .map(|mut idx| {
            let mut total = 0.0;
            for _ in 0..n_sites {
                total += s.m(idx % d);
                idx /= d;
            }
            total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins() -> Vec<SpinValue> {
        (1..=6).map(|t| SpinValue::from_two_s(t).unwrap()).collect()
    }

    fn i_times(op: &QOperator) -> QOperator {
        op.scale(c64::new(0.0, 1.0))
    }

    #[test]
    fn spin_half_x_is_half_pauli() {
        let sx = spin_matrix(SpinValue::HALF, Axis::X);
        assert_eq!(sx.get(0, 1), c64::new(0.5, 0.0));
        assert_eq!(sx.get(1, 0), c64::new(0.5, 0.0));
        assert_eq!(sx.get(0, 0), c64::new(0.0, 0.0));
        assert_eq!(sx.get(1, 1), c64::new(0.0, 0.0));
    }

    #[test]
    fn spin_one_z_descends() {
        let sz = spin_matrix(SpinValue::from_two_s(2).unwrap(), Axis::Z);
        let diag: Vec<f64> = sz.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        assert!(sz.is_diagonal());
    }

    #[test]
    fn spin_three_halves_casimir() {
        let s = SpinValue::from_two_s(3).unwrap();
        let sq = spin_matrix(s, Axis::Squared);
        let expect = QOperator::identity(vec![4]).scale(c64::new(15.0 / 4.0, 0.0));
        assert!(sq.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn su2_algebra_and_casimir() {
        for s in spins() {
            let x = spin_matrix(s, Axis::X);
            let y = spin_matrix(s, Axis::Y);
            let z = spin_matrix(s, Axis::Z);
            for op in [&x, &y, &z] {
                assert!(op.hermiticity_error() <= 1e-12);
            }
            assert!(x.commutator(&y).unwrap().max_abs_diff(&i_times(&z)) < 1e-10, "s={s}");
            assert!(y.commutator(&z).unwrap().max_abs_diff(&i_times(&x)) < 1e-10, "s={s}");
            assert!(z.commutator(&x).unwrap().max_abs_diff(&i_times(&y)) < 1e-10, "s={s}");
            let casimir = &(&(&x * &x) + &(&y * &y)) + &(&z * &z);
            let expect = spin_matrix(s, Axis::Squared);
            assert!(casimir.max_abs_diff(&expect) < 1e-10, "s={s}");
        }
    }

    #[test]
    fn sz_spectrum_is_exact() {
        for s in spins() {
            let z = spin_matrix(s, Axis::Z);
            let mut diag: Vec<f64> = z.diagonal().iter().map(|v| v.re).collect();
            diag.sort_by(f64::total_cmp);
            let expect: Vec<f64> = (0..s.dim()).map(|k| -s.s() + k as f64).collect();
            for (a, b) in diag.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn embed_identity_and_sz() {
        let id = QOperator::identity(vec![3]);
        let big = embed(&id, 2, 3).unwrap();
        assert!(big.max_abs_diff(&QOperator::identity(vec![3; 3])) == 0.0);

        let sz = spin_matrix(SpinValue::HALF, Axis::Z);
        let e = embed(&sz, 1, 2).unwrap();
        let diag: Vec<f64> = e.diagonal().iter().map(|v| v.re).collect();
        assert_eq!(diag, vec![0.5, 0.5, -0.5, -0.5]);
        assert!(e.is_diagonal());
    }

    #[test]
    fn embed_matches_kron() {
        let s = SpinValue::from_two_s(2).unwrap();
        let x = spin_matrix(s, Axis::Y);
        let id = QOperator::identity(vec![3]);
        let via_kron = id.kron(&x).kron(&id);
        let via_embed = embed(&x, 2, 3).unwrap();
        assert!(via_kron.max_abs_diff(&via_embed) < 1e-15);
        assert_eq!(via_embed.local_dims(), &[3, 3, 3]);
    }

    #[test]
    fn embed_trace_multiplies() {
        let s = SpinValue::from_two_s(3).unwrap();
        let a = &spin_matrix(s, Axis::X) + &spin_matrix(s, Axis::Squared);
        let e = embed(&a, 3, 3).unwrap();
        let expect = a.trace() * 16.0;
        assert!((e.trace() - expect).norm() < 1e-10);
    }

    #[test]
    fn embed_is_a_homomorphism() {
        let s = SpinValue::from_two_s(2).unwrap();
        let a = spin_matrix(s, Axis::X);
        let b = spin_matrix(s, Axis::Y);
        let lhs = embed(&(&a * &b), 2, 3).unwrap();
        let rhs = &embed(&a, 2, 3).unwrap() * &embed(&b, 2, 3).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn embed_rejects_bad_site() {
        let sz = spin_matrix(SpinValue::HALF, Axis::Z);
        assert!(matches!(embed(&sz, 0, 3), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed(&sz, 4, 3), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn collective_operator_cases() {
        let jz = collective_operator(SpinValue::HALF, 1, Axis::Z).unwrap();
        let diag: Vec<f64> = jz.diagonal().iter().map(|v| v.re).collect();
        assert_eq!(diag, vec![0.5, -0.5]);

        for s in spins().into_iter().take(3) {
            let n = 3;
            let jz = collective_operator(s, n, Axis::Z).unwrap();
            let top = jz.diagonal().iter().map(|v| v.re).fold(f64::MIN, f64::max);
            assert_eq!(top, n as f64 * s.s());
            let fast = collective_z_diagonal(s, n);
            for (a, b) in jz.diagonal().iter().zip(&fast) {
                assert_eq!(a.re, *b);
            }
            let jx = collective_operator(s, n, Axis::X).unwrap();
            let jy = collective_operator(s, n, Axis::Y).unwrap();
            assert!(jx.commutator(&jy).unwrap().max_abs_diff(&i_times(&jz)) < 1e-10);
            assert!(jx.is_hermitian(1e-12));
        }
    }

    #[test]
    fn spin_value_parsing() {
        assert_eq!("3/2".parse::<SpinValue>().unwrap().two_s(), 3);
        assert_eq!("1.5".parse::<SpinValue>().unwrap().two_s(), 3);
        assert_eq!("2".parse::<SpinValue>().unwrap().two_s(), 4);
        assert_eq!("2/1".parse::<SpinValue>().unwrap().two_s(), 4);
        assert!("0.3".parse::<SpinValue>().is_err());
        assert!("0".parse::<SpinValue>().is_err());
        assert!("-1".parse::<SpinValue>().is_err());
        assert!("1/3".parse::<SpinValue>().is_err());
        assert!("nan".parse::<SpinValue>().is_err());
        assert_eq!(SpinValue::from_two_s(5).unwrap().to_string(), "5/2");
        assert_eq!(SpinValue::from_two_s(6).unwrap().to_string(), "3");
        let s = SpinValue::from_two_s(3).unwrap();
        assert!(!s.is_integer());
        assert_eq!(s.dim(), 4);
    }
}
