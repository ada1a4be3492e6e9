mod common;

use common::*;
use num_complex::Complex64 as C;
use qudit_sense::evolution::diagonalize;
use qudit_sense::hamiltonian::{build_sensor, ModelSpec};
use qudit_sense::metrology::{qfi_mixed, qfi_pure, qfi_upper_bound, sld, sld_qfi};
use qudit_sense::spinops::{collective_operator, Axis, QOperator, SpinValue};
use qudit_sense::states::{reference_states, QState};

fn spec(two_s: u32, n: usize, coupling: f64, field: f64) -> ModelSpec {
    ModelSpec { n_sites: n, coupling, field, ..ModelSpec::with_spin(SpinValue::from_two_s(two_s).unwrap()) }
}

// ground energies of J sum SzSz + h sum Sx, J = 1, h = 0.1, from an external dense solver
const GROUND: [(u32, usize, f64); 3] =
    [(1, 4, -0.7654337009884364), (2, 3, -2.012493102196316), (3, 3, -4.512495357140127)];

#[test]
fn sensor_matrix_matches_kronecker_build() {
    for (two_s, n) in [(1, 4), (2, 3), (3, 3), (4, 2)] {
        for (j, h) in [(1.0, 0.1), (-1.0, 0.1), (0.7, -0.3)] {
            let got = build_sensor(&spec(two_s, n, j, h)).unwrap();
            let want = ising_chain(two_s, n, j, h);
            let dim = want.len();
            let err = (0..dim)
                .flat_map(|r| (0..dim).map(move |c| (r, c)))
                .map(|(r, c)| (got.get(r, c) - want[r][c]).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-14, "two_s={two_s} n={n} j={j}: {err}");
        }
    }
}

#[test]
fn spectrum_matches_jacobi() {
    for (two_s, n, e0) in GROUND {
        let h = ising_chain(two_s, n, 1.0, 0.1);
        let real: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| v.re).collect()).collect();
        let oracle = jacobi_eigenvalues(&real);
        assert!((oracle[0] - e0).abs() < 1e-10, "jacobi ground {} vs {e0}", oracle[0]);

        let cache = diagonalize(&build_sensor(&spec(two_s, n, 1.0, 0.1)).unwrap()).unwrap();
        let mut ev = cache.eigenvalues().to_vec();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - e0).abs() < 1e-12, "ground {} vs {e0}", ev[0]);
        for (a, b) in ev.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn spectrum_is_symmetric_about_zero() {
    // sum Sx flips to -sum Sx under the staggered pi rotation about z
    for (two_s, n, _) in GROUND {
        let cache = diagonalize(&build_sensor(&spec(two_s, n, 1.0, 0.1)).unwrap()).unwrap();
        let mut ev = cache.eigenvalues().to_vec();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(ev.iter().rev()) {
            assert!((a + b).abs() < 1e-10);
        }
    }
}

fn generators(two_s: u32, n: usize) -> Vec<(QOperator, Dense)> {
    let s = SpinValue::from_two_s(two_s).unwrap();
    let (z, x) = spin_zx(two_s);
    let dim = (two_s as usize + 1).pow(n as u32);
    let mut jz = zeros(dim);
    let mut jx = zeros(dim);
    for i in 0..n {
        add_scaled(&mut jz, &on_site(&z, i, n), 1.0);
        add_scaled(&mut jx, &on_site(&x, i, n), 1.0);
    }
    vec![
        (collective_operator(s, n, Axis::Z).unwrap(), jz),
        (collective_operator(s, n, Axis::X).unwrap(), jx),
    ]
}

#[test]
fn mixed_qfi_matches_sld_equation_solve() {
    for (two_s, n) in [(1, 2), (1, 3), (2, 2), (3, 2)] {
        let dim = (two_s as usize + 1).pow(n as u32);
        for (g, g_dense) in generators(two_s, n) {
            for seed in 0..4 {
                let rho = random_density(dim, 1000 * two_s as u64 + seed);
                let state = QState::mixed(to_mat(&rho), vec![two_s as usize + 1; n]).unwrap();
                let oracle = sld_oracle_qfi(&rho, &g_dense);
                let spectral = qfi_mixed(&state, &g).unwrap();
                let via_sld = sld_qfi(&state, &sld(&state, &g).unwrap()).unwrap();
                assert!(rel_err(spectral, oracle) < 1e-9, "{spectral} vs {oracle}");
                assert!(rel_err(via_sld, oracle) < 1e-9, "{via_sld} vs {oracle}");
            }
        }
    }
}

#[test]
fn library_sld_solves_the_sld_equation() {
    let (two_s, n) = (1, 3);
    let dim = 8;
    let rho = random_density(dim, 77);
    let state = QState::mixed(to_mat(&rho), vec![2; n]).unwrap();
    for (g, g_dense) in generators(two_s, n) {
        let l = from_mat(sld(&state, &g).unwrap().mat());
        let lhs_a = matmul(&rho, &l);
        let lhs_b = matmul(&l, &rho);
        let gr = matmul(&g_dense, &rho);
        let rg = matmul(&rho, &g_dense);
        let i = C::new(0.0, 1.0);
        for r in 0..dim {
            for c in 0..dim {
                let lhs = (lhs_a[r][c] + lhs_b[r][c]) * 0.5;
                let rhs = -i * (gr[r][c] - rg[r][c]);
                assert!((lhs - rhs).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn pure_qfi_is_four_times_variance() {
    for (two_s, n) in [(1, 3), (2, 2), (4, 2)] {
        let dim = (two_s as usize + 1).pow(n as u32);
        for (g, g_dense) in generators(two_s, n) {
            for seed in 0..5 {
                let v = random_unit_vector(dim, seed);
                let gv: Vec<C> = (0..dim).map(|r| (0..dim).map(|c| g_dense[r][c] * v[c]).sum()).collect();
                let mean: f64 = v.iter().zip(&gv).map(|(a, b)| (a.conj() * b).re).sum();
                let second: f64 = gv.iter().map(|x| x.norm_sqr()).sum();
                let oracle = 4.0 * (second - mean * mean);
                let psi = QState::from_amplitudes(&v, vec![two_s as usize + 1; n]).unwrap();
                assert!(rel_err(qfi_pure(&psi, &g).unwrap(), oracle) < 1e-10);
            }
        }
    }
}

#[test]
fn reference_state_qfi_values() {
    // GHZ reaches 4 s^2 N^2; the product of single-site GHZs gives 4 N s^2
    for two_s in 1..=5 {
        let s = SpinValue::from_two_s(two_s).unwrap();
        let n = 4;
        let (sep, ghz) = reference_states(s, n).unwrap();
        let jz = collective_operator(s, n, Axis::Z).unwrap();
        let sv = s.s();
        assert!(rel_err(qfi_pure(&ghz, &jz).unwrap(), 4.0 * sv * sv * 16.0) < 1e-12);
        assert!(rel_err(qfi_upper_bound(s, n), 4.0 * sv * sv * 16.0) < 1e-15);
        assert!(rel_err(qfi_pure(&sep, &jz).unwrap(), 4.0 * sv * sv * 4.0) < 1e-12);
    }
}
