//! Reference implementations that share no code with the library.

#![allow(dead_code)]

use faer::Mat;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<Vec<C>>;

pub fn zeros(n: usize) -> Dense {
    vec![vec![C::new(0.0, 0.0); n]; n]
}

pub fn eye(n: usize) -> Dense {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (na, nb) = (a.len(), b.len());
    let mut out = zeros(na * nb);
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn add_scaled(acc: &mut Dense, m: &Dense, w: f64) {
    for (ra, rm) in acc.iter_mut().zip(m) {
        for (x, y) in ra.iter_mut().zip(rm) {
            *x += y * w;
        }
    }
}

pub fn trace(a: &Dense) -> C {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// S^z and S^x from the ladder-operator matrix elements, m = s, s-1, ..., -s.
pub fn spin_zx(two_s: u32) -> (Dense, Dense) {
    let s = two_s as f64 / 2.0;
    let d = two_s as usize + 1;
    let mut z = zeros(d);
    let mut x = zeros(d);
    for k in 0..d {
        let m = s - k as f64;
        z[k][k] = C::new(m, 0.0);
        if k + 1 < d {
            // <m|S^+|m-1> = sqrt(s(s+1) - m(m-1))
            let v = 0.5 * (s * (s + 1.0) - m * (m - 1.0)).sqrt();
            x[k][k + 1] = C::new(v, 0.0);
            x[k + 1][k] = C::new(v, 0.0);
        }
    }
    (z, x)
}

/// `op` on `site` (0-based, leftmost slowest) of an `n`-site chain.
pub fn on_site(op: &Dense, site: usize, n: usize) -> Dense {
    let id = eye(op.len());
    let mut out = vec![vec![C::new(1.0, 0.0)]];
    for i in 0..n {
        out = kron(&out, if i == site { op } else { &id });
    }
    out
}

/// `J sum Sz Sz + h sum Sx` on an open chain.
pub fn ising_chain(two_s: u32, n: usize, j: f64, h: f64) -> Dense {
    let (z, x) = spin_zx(two_s);
    let dim = (two_s as usize + 1).pow(n as u32);
    let mut out = zeros(dim);
    for i in 0..n - 1 {
        add_scaled(&mut out, &matmul(&on_site(&z, i, n), &on_site(&z, i + 1, n)), j);
    }
    for i in 0..n {
        add_scaled(&mut out, &on_site(&x, i, n), h);
    }
    out
}

/// Cyclic Jacobi rotations on a real symmetric matrix; returns sorted eigenvalues.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for k in 0..n {
                    a[p][k] = c * rp[k] - s * rq[k];
                    a[q][k] = s * rp[k] + c * rq[k];
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Dense, mut b: Vec<C>) -> Vec<C> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.norm() > 1e-300, "singular system");
        let pivot_row = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f == C::new(0.0, 0.0) {
                continue;
            }
            for (x, v) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x
}

/// QFI as `tr(rho L^2)` with `L` from the vectorised SLD equation
/// `(rho L + L rho) / 2 = -i [G, rho]`.
pub fn sld_oracle_qfi(rho: &Dense, g: &Dense) -> f64 {
    let n = rho.len();
    let i = C::new(0.0, 1.0);
    let gr = matmul(g, rho);
    let rg = matmul(rho, g);
    // unknown L[a][b] at index a*n + b
    let mut sys = zeros(n * n);
    let mut rhs = vec![C::new(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            let row = a * n + b;
            for k in 0..n {
                sys[row][k * n + b] += rho[a][k] * 0.5;
                sys[row][a * n + k] += rho[k][b] * 0.5;
            }
            rhs[row] = -i * (gr[a][b] - rg[a][b]);
        }
    }
    let x = solve(sys, rhs);
    let l: Dense = (0..n).map(|a| x[a * n..(a + 1) * n].to_vec()).collect();
    trace(&matmul(rho, &matmul(&l, &l))).re
}

/// Full-rank `A A^dagger / tr` with Ginibre `A`.
pub fn random_density(n: usize, seed: u64) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Dense = (0..n)
        .map(|_| (0..n).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
        .collect();
    let mut rho = zeros(n);
    for r in 0..n {
        for c in 0..n {
            rho[r][c] = (0..n).map(|k| a[r][k] * a[c][k].conj()).sum();
        }
    }
    let tr = trace(&rho).re;
    for row in &mut rho {
        for v in row.iter_mut() {
            *v /= tr;
        }
    }
    rho
}

pub fn random_unit_vector(n: usize, seed: u64) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C> = (0..n).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn to_mat(a: &Dense) -> Mat<C> {
    Mat::from_fn(a.len(), a.len(), |i, j| a[i][j])
}

pub fn from_mat(m: faer::MatRef<'_, C>) -> Dense {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
