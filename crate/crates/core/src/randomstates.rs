//! Random pure states with i.i.d. complex Gaussian amplitudes and the
//! distribution of their QFI with respect to `J^z`.

use faer::Col;
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrology::{qfi_pure_diagonal, qfi_upper_bound};
use crate::spinops::{collective_z_diagonal, SpinValue};
use crate::states::QState;

pub const RNG_NAME: &str = "ChaCha20 (rand_chacha), seeded from u64, stream = sample index";
pub const DEFAULT_BINS: usize = 50;

fn gaussian_amplitudes(dim: usize, seed: u64, index: u64) -> Vec<c64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut amps: Vec<c64> = (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c64::new(re, im)
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    amps
}

/// Sample `index` of the stream for `seed`.
pub fn haar_sample(n_sites: usize, s: SpinValue, seed: u64, index: u64) -> Result<QState> {
    if n_sites == 0 {
        return Err(Error::InvalidArgument("need at least one site".into()));
    }
    let d = s.dim();
    let amps = gaussian_amplitudes(d.pow(n_sites as u32), seed, index);
    QState::pure(Col::from_fn(amps.len(), |i| amps[i]), vec![d; n_sites])
}

/// First sample of the stream for `seed`.
pub fn haar_pure(n_sites: usize, s: SpinValue, seed: u64) -> Result<QState> {
    haar_sample(n_sites, s, seed, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QfiHistogram {
    pub spin: SpinValue,
    pub n_sites: usize,
    pub edges: Vec<f64>,
    /// Fraction of samples per bin; sums to one.
    pub frequencies: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub max: f64,
    pub count: usize,
    /// QFI of the optimal separable state, `4 N s^2`.
    pub reference: f64,
    /// `4 s^2 N^2`.
    pub bound: f64,
    pub seed: u64,
    pub rng: &'static str,
}

impl QfiHistogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

/// QFI of every sample, in sample order.
pub fn qfi_samples(n_sites: usize, s: SpinValue, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if n_sites == 0 {
        return Err(Error::InvalidArgument("need at least one site".into()));
    }
    let diag = collective_z_diagonal(s, n_sites);
    Ok((0..n_samples as u64)
        .into_par_iter()
        .map(|i| qfi_pure_diagonal(&gaussian_amplitudes(diag.len(), seed, i), &diag))
        .collect())
}

/// Histogram of `F_Q(psi, J^z)` over `n_samples` random states, 50 bins on `[0, 4 s^2 N^2]`.
pub fn qfi_distribution(n_sites: usize, s: SpinValue, n_samples: usize, seed: u64) -> Result<QfiHistogram> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let values = qfi_samples(n_sites, s, n_samples, seed)?;
    let bound = qfi_upper_bound(s, n_sites);
    let bins = DEFAULT_BINS;
    let width = bound / bins as f64;
    let mut counts = vec![0usize; bins];
    for &q in &values {
        let b = ((q / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = n_samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if n_samples > 1 { values.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(QfiHistogram {
        spin: s,
        n_sites,
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
        mean,
        std_error: (var / n).sqrt(),
        max: values.iter().cloned().fold(0.0, f64::max),
        count: n_samples,
        reference: 4.0 * n_sites as f64 * s.s() * s.s(),
        bound,
        seed,
        rng: RNG_NAME,
    })
}
