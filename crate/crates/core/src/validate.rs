//! Cross-module numerical checks run by the `validate` experiment.

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::error::Result;
use crate::evolution::{diagonalize, evolve, evolve_diagonal, propagator};
use crate::hamiltonian::{build_target, sensor_hamiltonian, ModelSpec};
use crate::metrology::{qfi_mixed, qfi_pure, qfi_upper_bound, sld, sld_qfi};
use crate::protocol::{run_once_dense, Engine};
use crate::randomstates::{haar_sample, qfi_samples};
use crate::spinops::{collective_operator, spin_matrix, Axis, QOperator, SpinValue};
use crate::states::{
    boundary_projector, endpoint_coeffs, mat_max_abs_diff, measure_and_collapse, partial_trace_last, reference_states,
    thermal_state, thermal_state_from_cache, QState, TopPhase,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error, or the measured quantity.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name, passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }
}

fn spin(two_s: u32) -> SpinValue {
    SpinValue::from_two_s(two_s).expect("two_s > 0")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn su2() -> Result<Check> {
    let mut worst = 0.0_f64;
    let i = c64::new(0.0, 1.0);
    for two_s in 1..=6 {
        let s = spin(two_s);
        let (x, y, z) = (spin_matrix(s, Axis::X), spin_matrix(s, Axis::Y), spin_matrix(s, Axis::Z));
        worst = worst.max(x.commutator(&y)?.max_abs_diff(&z.scale(i)));
        worst = worst.max(y.commutator(&z)?.max_abs_diff(&x.scale(i)));
        worst = worst.max(z.commutator(&x)?.max_abs_diff(&y.scale(i)));
        let casimir = &(&(&x * &x) + &(&y * &y)) + &(&z * &z);
        let ss = s.s() * (s.s() + 1.0);
        worst = worst.max(casimir.max_abs_diff(&QOperator::identity(vec![s.dim()]).scale(c64::new(ss, 0.0))));
    }
    Ok(Check::at_most("su2_commutators_casimir", worst, 1e-10, "s = 1/2 .. 3"))
}

fn propagators() -> Result<Check> {
    let mut worst = 0.0_f64;
    for (two_s, n) in [(2, 3), (3, 3), (1, 4)] {
        let spec = ModelSpec { n_sites: n, spin: spin(two_s), ..ModelSpec::default() };
        let cache = diagonalize(&sensor_hamiltonian(&spec)?)?;
        let dims = vec![spec.spin.dim(); n];
        let (t1, t2) = (0.7, 23.9);
        let u1 = propagator(&cache, t1);
        let u2 = propagator(&cache, t2);
        let u12 = propagator(&cache, t1 + t2);
        worst = worst.max((&u1 * &u1.adjoint()).max_abs_diff(&QOperator::identity(dims.clone())));
        worst = worst.max((&u1 * &u2).max_abs_diff(&u12));
        worst = worst.max(propagator(&cache, 0.0).max_abs_diff(&QOperator::identity(dims)));
        worst = worst.max((&u2 * &propagator(&cache, -t2)).max_abs_diff(&QOperator::identity(vec![spec.spin.dim(); n])));
    }
    Ok(Check::at_most("propagator_unitarity_group_law", worst, 1e-9, "U U^dag = I, U(t1) U(t2) = U(t1 + t2)"))
}

fn thermal_dim2() -> Result<Check> {
    let h = 0.37;
    let sx = spin_matrix(SpinValue::HALF, Axis::X);
    let mut worst = 0.0_f64;
    for beta in [0.0, 0.5, 3.0, 10.0] {
        let rho = thermal_state(&sx.scale(c64::new(h, 0.0)), beta)?;
        // exp(-beta h sigma_x / 2) / Z = (I - tanh(beta h / 2) sigma_x) / 2
        let th = (beta * h / 2.0).tanh();
        let expect = Mat::from_fn(2, 2, |i, j| if i == j { c64::new(0.5, 0.0) } else { c64::new(-th / 2.0, 0.0) });
        worst = worst.max(mat_max_abs_diff(rho.density_matrix().as_ref(), expect.as_ref()));
    }
    Ok(Check::at_most("thermal_closed_form_dim2", worst, 1e-12, "H = h S^x, beta in {0, 0.5, 3, 10}"))
}

fn partial_traces() -> Result<Check> {
    let mut worst = 0.0_f64;
    for two_s in 1..=4 {
        let s = spin(two_s);
        let (sep, ghz) = reference_states(s, 3)?;
        worst = worst.max((partial_trace_last(&sep)?.purity() - 1.0).abs());
        worst = worst.max((partial_trace_last(&ghz)?.purity() - 0.5).abs());
        let mm = QState::maximally_mixed(vec![s.dim(); 2]);
        worst = worst.max((partial_trace_last(&mm)?.purity() - 1.0 / s.dim() as f64).abs());
    }
    Ok(Check::at_most("partial_trace_purity", worst, 1e-12, "product -> 1, GHZ -> 1/2, maximally mixed -> 1/d"))
}

fn reversal() -> Result<Check> {
    let mut worst = 0.0_f64;
    for (two_s, n, t) in [(3, 3, 50.76), (1, 4, 44.75), (2, 3, 81.85)] {
        let spec = ModelSpec { n_sites: n, spin: spin(two_s), omega: 0.0, ..ModelSpec::default() };
        let cache = diagonalize(&sensor_hamiltonian(&spec)?)?;
        let thermal = thermal_state_from_cache(&cache, spec.beta)?;
        let m1 = boundary_projector(spec.spin, n, &endpoint_coeffs(spec.spin), TopPhase::One)?;
        let (post, _) = measure_and_collapse(&thermal, &m1)?;
        let forward = evolve(&post, &cache, t)?;
        let target: Vec<f64> = build_target(&spec)?.diagonal().iter().map(|z| z.re).collect();
        let encoded = evolve_diagonal(&forward, &target, 0.0)?;
        let back = evolve(&encoded, &cache, -t)?;
        worst = worst.max(mat_max_abs_diff(back.density_matrix().as_ref(), post.density_matrix().as_ref()));
    }
    Ok(Check::at_most("protocol_reversal_identity", worst, 1e-8, "omega = 0, t_int = 0"))
}

fn derivative() -> Result<Check> {
    let mut worst = 0.0_f64;
    let mut points = 0;
    for two_s in [1, 2, 3] {
        let spec = ModelSpec { spin: spin(two_s), ..ModelSpec::default() };
        let engine = Engine::new(&spec)?;
        let prep = engine.prepare(&endpoint_coeffs(spec.spin))?;
        for i in 0..=60 {
            let r = engine.run(&prep, i as f64 * 2.0, Some(1e-9))?;
            if r.dp_domega.abs() > 1e-8 {
                worst = worst.max(rel(r.dp_fd.expect("requested"), r.dp_domega));
                points += 1;
            }
        }
    }
    Ok(Check::at_most("derivative_vs_finite_difference", worst, 1e-5, format!("{points} points, s = 1/2 .. 3/2, N = 4")))
}

fn engine_vs_dense() -> Result<Check> {
    let mut worst = 0.0_f64;
    for (two_s, n) in [(1, 4), (2, 3), (3, 3)] {
        let spec = ModelSpec { n_sites: n, spin: spin(two_s), ..ModelSpec::default() };
        let engine = Engine::new(&spec)?;
        let prep = engine.prepare(&endpoint_coeffs(spec.spin))?;
        for t in [0.0, 12.5, 50.76] {
            let fast = engine.run(&prep, t, None)?;
            let (dense, _) = run_once_dense(&spec, t)?;
            worst = worst.max(rel(fast.delta_omega, dense.delta_omega));
            worst = worst.max((fast.fidelity - dense.fidelity).abs());
            worst = worst.max(rel(fast.qfi, dense.qfi));
        }
    }
    Ok(Check::at_most("support_engine_vs_density_matrix", worst, 1e-8, "delta omega, fidelity and QFI"))
}

fn random_mixed(n: usize, s: SpinValue, seed: u64, index: u64) -> Result<QState> {
    // full-rank mixture of d^N random pure states with random weights
    let d = s.dim();
    let dim = d.pow(n as u32);
    let mut rho = Mat::<c64>::zeros(dim, dim);
    let mut total = 0.0;
    for k in 0..dim {
        let psi = haar_sample(n, s, seed, index * 1000 + k as u64)?;
        let v = psi.amplitudes().expect("pure");
        let w = 1.0 + (k as f64 * 0.618_034).fract();
        total += w;
        for j in 0..dim {
            for i in 0..dim {
                rho[(i, j)] += v[i] * v[j].conj() * w;
            }
        }
    }
    let rho = Mat::from_fn(dim, dim, |i, j| rho[(i, j)] / total);
    let herm = Mat::from_fn(dim, dim, |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
    QState::mixed(herm, vec![d; n])
}

fn qfi_consistency(seed: u64) -> Result<Vec<Check>> {
    let s = spin(2);
    let n = 2;
    let jz = collective_operator(s, n, Axis::Z)?;
    let jx = collective_operator(s, n, Axis::X)?;
    let mut pure_worst = 0.0_f64;
    for i in 0..25 {
        let psi = haar_sample(n, s, seed, i)?;
        for g in [&jz, &jx] {
            pure_worst = pure_worst.max(rel(qfi_mixed(&psi.to_mixed(), g)?, qfi_pure(&psi, g)?));
        }
    }
    let mut sld_worst = 0.0_f64;
    let mut residual = 0.0_f64;
    for i in 0..10 {
        let rho = random_mixed(n, s, seed ^ 0x5eed, i)?;
        let l = sld(&rho, &jz)?;
        sld_worst = sld_worst.max(rel(sld_qfi(&rho, &l)?, qfi_mixed(&rho, &jz)?));
        // -i [G, rho] = (L rho + rho L) / 2
        let r = QOperator::new(rho.density_matrix(), rho.local_dims().to_vec())?;
        let lhs = jz.commutator(&r)?.scale(c64::new(0.0, -1.0));
        let rhs = (&(&l * &r) + &(&r * &l)).scale(c64::new(0.5, 0.0));
        residual = residual.max(lhs.max_abs_diff(&rhs));
    }
    Ok(vec![
        Check::at_most("qfi_pure_vs_mixed", pure_worst, 1e-8, "25 random pure states, J^z and J^x"),
        Check::at_most("qfi_vs_sld", sld_worst, 1e-8, "10 random full-rank states"),
        Check::at_most("sld_equation_residual", residual, 1e-10, "d rho = (L rho + rho L) / 2"),
    ])
}

fn theorem1(seed: u64) -> Result<Vec<Check>> {
    let mut excess = f64::NEG_INFINITY;
    let mut ghz = 0.0_f64;
    for two_s in 1..=5 {
        let s = spin(two_s);
        let bound = qfi_upper_bound(s, 4);
        let max = qfi_samples(4, s, 1000, seed)?.into_iter().fold(0.0, f64::max);
        excess = excess.max(max - bound);
        let (_, g) = reference_states(s, 4)?;
        ghz = ghz.max(rel(qfi_pure(&g, &collective_operator(s, 4, Axis::Z)?)?, bound));
    }
    Ok(vec![
        Check::at_most("haar_qfi_below_bound", excess.max(0.0), 1e-6, "1000 samples per s = 1/2 .. 5/2, N = 4"),
        Check::at_most("ghz_saturates_bound", ghz, 1e-8, "s = 1/2 .. 5/2, N = 4"),
    ])
}

/// Runs every check. Errors inside a check are reported as failures.
pub fn run_suite(seed: u64) -> Vec<Check> {
    type CheckFn = fn() -> Result<Check>;
    let mut out = Vec::new();
    let single: [(&'static str, CheckFn); 7] = [
        ("su2_commutators_casimir", su2),
        ("propagator_unitarity_group_law", propagators),
        ("thermal_closed_form_dim2", thermal_dim2),
        ("partial_trace_purity", partial_traces),
        ("protocol_reversal_identity", reversal),
        ("derivative_vs_finite_difference", derivative),
        ("support_engine_vs_density_matrix", engine_vs_dense),
    ];
    let failed = |name: &'static str, e: crate::Error| Check {
        name,
        passed: false,
        value: f64::NAN,
        tolerance: f64::NAN,
        detail: format!("error: {e}"),
    };
    for (name, f) in single {
        out.push(f().unwrap_or_else(|e| failed(name, e)));
    }
    match qfi_consistency(seed) {
        Ok(v) => out.extend(v),
        Err(e) => out.push(failed("qfi_consistency", e)),
    }
    match theorem1(seed) {
        Ok(v) => out.extend(v),
        Err(e) => out.push(failed("theorem1", e)),
    }
    out
}
