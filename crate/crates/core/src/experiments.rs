//! Experiment orchestration: turns a config into output tables.

use crate::config::{Experiment, ExperimentConfig, SweepParameter};
use crate::error::{Error, Result};
use crate::hamiltonian::ModelSpec;
use crate::output::{Cell, Table};
use crate::protocol::{fit_gamma, optimize_alpha, optimize_basis, scan, GammaMethod, SensingResult};
use crate::randomstates::qfi_distribution;
use crate::spinops::SpinValue;
use crate::validate::{run_suite, Check};

/// Tables produced by one run, plus the check results for `validate`.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn label(s: SpinValue) -> String {
    format!("s{}", s.s())
}

fn scan_spin(cfg: &ExperimentConfig, model: ModelSpec) -> Result<SensingResult> {
    scan(&cfg.protocol(model))
}

fn table1(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut t = Table::new(
        "table1",
        &[
            "s",
            "sql",
            "hl",
            "delta_omega_min",
            "t_star_at_min",
            "delta_adv",
            "below_hl",
            "fidelity_at_min",
            "qfi_at_min",
            "sql_window_start",
            "sql_window_end",
            "sql_window_width",
            "success_probability",
        ],
    );
    for s in cfg.spins(Experiment::Table1) {
        let r = scan_spin(cfg, cfg.model(s))?;
        let sm = r.summary;
        let at = r.records.iter().find(|x| x.t_star == sm.t_star_at_min).expect("minimum is a record");
        t.push(vec![
            s.s().into(),
            r.limits.sql.into(),
            r.limits.hl.into(),
            sm.delta_omega_min.into(),
            sm.t_star_at_min.into(),
            sm.delta_adv.into(),
            sm.below_hl.into(),
            at.fidelity.into(),
            at.qfi.into(),
            sm.sql_window.map(|w| w.start).into(),
            sm.sql_window.map(|w| w.end).into(),
            sm.sql_window.map(|w| w.width).into(),
            r.success_probability.into(),
        ]);
    }
    Ok(vec![t])
}

fn table2(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut t = Table::new(
        "table2",
        &["s", "gamma", "prefactor", "fit_points", "qfi_initial", "qfi_max", "t_star_qfi_max", "fit_error"],
    );
    t.note("gamma_method", format!("{:?}", cfg.gamma_method));
    for s in cfg.spins(Experiment::Table2) {
        let r = scan_spin(cfg, cfg.model(s))?;
        let peak = r.records.iter().fold(&r.records[0], |a, b| if b.qfi > a.qfi { b } else { a });
        let fit = fit_gamma(&r, cfg.gamma_method);
        let (gamma, pref, pts, err) = match &fit {
            Ok(f) => (Cell::from(f.gamma), Cell::from(f.prefactor), Cell::from(f.points), Cell::Empty),
            Err(e) => (Cell::Empty, Cell::Empty, Cell::Empty, Cell::from(e.to_string())),
        };
        t.push(vec![s.s().into(), gamma, pref, pts, r.qfi_initial.into(), peak.qfi.into(), peak.t_star.into(), err]);
    }
    Ok(vec![t])
}

fn fig1(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut summary = Table::new(
        "fig1_summary",
        &["s", "mean", "std_error", "reference", "bound", "mean_over_reference", "max", "count"],
    );
    let mut tables = Vec::new();
    for s in cfg.spins(Experiment::Fig1) {
        let h = qfi_distribution(cfg.n_sites, s, cfg.samples, cfg.seed)?;
        let mut t = Table::new(format!("fig1_{}", label(s)), &["bin_lo", "bin_hi", "frequency"]);
        for (i, f) in h.frequencies.iter().enumerate() {
            t.push(vec![h.edges[i].into(), h.edges[i + 1].into(), (*f).into()]);
        }
        t.note("reference_qfi", h.reference);
        t.note("mean", h.mean);
        t.note("bin_width", h.bin_width());
        t.note("rng", h.rng);
        tables.push(t);
        summary.push(vec![
            s.s().into(),
            h.mean.into(),
            h.std_error.into(),
            h.reference.into(),
            h.bound.into(),
            (h.mean / h.reference).into(),
            h.max.into(),
            h.count.into(),
        ]);
    }
    summary.note("rng", crate::randomstates::RNG_NAME);
    tables.insert(0, summary);
    Ok(tables)
}

fn fig2(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut tables = Vec::new();
    for s in cfg.spins(Experiment::Fig2) {
        let map = optimize_basis(&cfg.protocol(cfg.model(s)), cfg.basis_t_star)?;
        let mut t = Table::new(format!("fig2_{}", label(s)), &["a1", "a2", "fidelity"]);
        for (i2, row) in map.fidelity.iter().enumerate() {
            for (i1, f) in row.iter().enumerate() {
                t.push(vec![map.values[i1].into(), map.values[i2].into(), (*f).into()]);
            }
        }
        t.note("t_star", map.t_star);
        t.note("argmax_a1", map.argmax.0);
        t.note("argmax_a2", map.argmax.1);
        t.note("max_fidelity", map.max_fidelity);
        tables.push(t);
    }
    Ok(tables)
}

fn fig3(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut trace = Table::new(
        "fig3",
        &["s", "t_star", "delta_omega", "sql", "hl", "fidelity", "qfi", "p_plus", "dp_domega", "dp_fd"],
    );
    let mut windows = Table::new(
        "fig3_windows",
        &["s", "window_start", "window_end", "window_width", "delta_omega_min", "t_star_at_min"],
    );
    for s in cfg.spins(Experiment::Fig3) {
        let r = scan_spin(cfg, cfg.model(s))?;
        for x in &r.records {
            trace.push(vec![
                s.s().into(),
                x.t_star.into(),
                x.delta_omega.into(),
                r.limits.sql.into(),
                r.limits.hl.into(),
                x.fidelity.into(),
                x.qfi.into(),
                x.p_plus.into(),
                x.dp_domega.into(),
                x.dp_fd.into(),
            ]);
        }
        let w = r.summary.sql_window;
        windows.push(vec![
            s.s().into(),
            w.map(|w| w.start).into(),
            w.map(|w| w.end).into(),
            w.map(|w| w.width).into(),
            r.summary.delta_omega_min.into(),
            r.summary.t_star_at_min.into(),
        ]);
    }
    Ok(vec![trace, windows])
}

fn fig4(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let cols = ["s", "model", "alpha", "delta_omega_min", "t_star_at_min", "hl", "delta_adv"];
    let mut t = Table::new("fig4", &cols);
    let mut landscape = Table::new("fig4_landscape", &["s", "alpha", "delta_adv"]);
    let row = |s: SpinValue, name: &str, r: &SensingResult| -> Vec<Cell> {
        vec![
            s.s().into(),
            name.into(),
            r.model.alpha.into(),
            r.summary.delta_omega_min.into(),
            r.summary.t_star_at_min.into(),
            r.limits.hl.into(),
            r.summary.delta_adv.into(),
        ]
    };
    for s in cfg.spins(Experiment::Fig4) {
        let nn = scan_spin(cfg, ModelSpec { alpha: None, ..cfg.model(s) })?;
        t.push(row(s, "nn", &nn));
        let nnn = match cfg.alpha {
            Some(a) => scan_spin(cfg, ModelSpec { alpha: Some(a), ..cfg.model(s) })?,
            None => {
                let best = optimize_alpha(&cfg.protocol(ModelSpec { alpha: None, ..cfg.model(s) }), &cfg.alpha_grid)?;
                for (a, adv) in &best.landscape {
                    landscape.push(vec![s.s().into(), (*a).into(), (*adv).into()]);
                }
                best.result
            }
        };
        t.push(row(s, "nnn", &nnn));
    }
    let mut out = vec![t];
    if !landscape.rows.is_empty() {
        out.push(landscape);
    }
    Ok(out)
}

fn fig5(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut trace = Table::new("fig5", &["s", "t_star", "qfi", "fit"]);
    let mut fits = Table::new("fig5_fits", &["s", "gamma", "prefactor", "fit_points", "qfi_initial", "fit_error"]);
    fits.note("gamma_method", format!("{:?}", cfg.gamma_method));
    for s in cfg.spins(Experiment::Fig5) {
        let r = scan_spin(cfg, cfg.model(s))?;
        let fit = fit_gamma(&r, cfg.gamma_method);
        for x in &r.records {
            let curve = match &fit {
                Ok(f) if x.t_star > 0.0 && x.t_star <= f.t_end => Some(match f.method {
                    GammaMethod::Rise => r.qfi_initial + f.prefactor * x.t_star.powf(f.gamma),
                    GammaMethod::PeakEnvelope => f.prefactor * x.t_star.powf(f.gamma),
                }),
                _ => None,
            };
            trace.push(vec![s.s().into(), x.t_star.into(), x.qfi.into(), curve.into()]);
        }
        match fit {
            Ok(f) => fits.push(vec![
                s.s().into(),
                f.gamma.into(),
                f.prefactor.into(),
                f.points.into(),
                r.qfi_initial.into(),
                Cell::Empty,
            ]),
            Err(e) => fits.push(vec![s.s().into(), Cell::Empty, Cell::Empty, Cell::Empty, r.qfi_initial.into(), e.to_string().into()]),
        }
    }
    Ok(vec![trace, fits])
}

fn sweep(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let p = cfg.sweep.parameter;
    let mut t = Table::new(
        "sweep",
        &["parameter", "value", "s", "delta_omega_min", "t_star_at_min", "sql", "hl", "delta_adv", "sql_window_width"],
    );
    let name = serde_json::to_value(p).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    for &v in &cfg.sweep.values {
        for s in cfg.spins(Experiment::Sweep) {
            let mut m = cfg.model(s);
            match p {
                SweepParameter::Field => m.field = v,
                SweepParameter::Coupling => m.coupling = v,
                SweepParameter::Beta => m.beta = v,
                SweepParameter::Omega => m.omega = v,
                SweepParameter::TInt => m.t_int = v,
                SweepParameter::Alpha => m.alpha = Some(v),
                SweepParameter::NSites => {
                    if v.fract() != 0.0 || v < 2.0 {
                        return Err(Error::Config(format!("sweep over n_sites needs integers >= 2, got {v}")));
                    }
                    m.n_sites = v as usize;
                    if m.dim() > crate::config::MAX_DIM {
                        return Err(Error::Config(format!("n_sites = {v} exceeds the dimension limit for s = {s}")));
                    }
                }
            }
            let r = scan_spin(cfg, m)?;
            t.push(vec![
                name.as_str().into(),
                v.into(),
                s.s().into(),
                r.summary.delta_omega_min.into(),
                r.summary.t_star_at_min.into(),
                r.limits.sql.into(),
                r.limits.hl.into(),
                r.summary.delta_adv.into(),
                r.summary.sql_window.map(|w| w.width).into(),
            ]);
        }
    }
    Ok(vec![t])
}

fn validate(cfg: &ExperimentConfig) -> Outcome {
    let checks = run_suite(cfg.seed);
    let mut t = Table::new("validate", &["check", "passed", "value", "tolerance", "detail"]);
    for c in &checks {
        t.push(vec![c.name.into(), c.passed.into(), c.value.into(), c.tolerance.into(), c.detail.clone().into()]);
    }
    Outcome { tables: vec![t], checks }
}

/// Runs `experiment` with `cfg`; file output is left to the caller.
pub fn run_experiment(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Outcome> {
    if let Some(named) = cfg.experiment {
        if named != experiment {
            return Err(Error::Config(format!("config names experiment {named} but {experiment} was requested")));
        }
    }
    let tables = match experiment {
        Experiment::Table1 => table1(cfg)?,
        Experiment::Table2 => table2(cfg)?,
        Experiment::Fig1 => fig1(cfg)?,
        Experiment::Fig2 => fig2(cfg)?,
        Experiment::Fig3 => fig3(cfg)?,
        Experiment::Fig4 => fig4(cfg)?,
        Experiment::Fig5 => fig5(cfg)?,
        Experiment::Sweep => sweep(cfg)?,
        Experiment::Validate => return Ok(validate(cfg)),
    };
    Ok(Outcome { tables, checks: Vec::new() })
}
