//! Seed-addressable Brownian increments.
//!
//! Each path owns a ChaCha8 stream selected by `(seed, path_index)`. The fine
//! level is drawn first; a coarse increment is the in-order sum of `2^r`
//! consecutive fine increments, so a coarse run and its fine reference see the
//! same Brownian path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Which time level of a coupled path to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub seed: u64,
    pub path_index: u64,
    pub k: usize,
    /// Coarse step.
    pub tau: f64,
    /// Fine step is `tau / 2^refinement`.
    pub refinement: u32,
    /// Number of coarse steps.
    pub n_steps: usize,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Input("K must be positive".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Input(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.refinement > 30 {
            return Err(Error::Input("refinement above 30 is not supported".into()));
        }
        Ok(())
    }

    pub fn fine_per_coarse(&self) -> usize {
        1usize << self.refinement
    }

    pub fn fine_tau(&self) -> f64 {
        self.tau / self.fine_per_coarse() as f64
    }
}

/// Independent, reproducible generator for one path.
pub fn derive_stream(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Stream of Gaussian increments with per-entry variance `dt`.
#[derive(Debug, Clone)]
pub struct IncrementStream {
    rng: ChaCha8Rng,
    k: usize,
    sd: f64,
}

impl IncrementStream {
    pub fn new(seed: u64, path_index: u64, k: usize, dt: f64) -> Self {
        Self {
            rng: derive_stream(seed, path_index),
            k,
            sd: dt.sqrt(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Writes the next increment (`sqrt(dt) xi`, `xi ~ N(0, I_K)`) into `out`.
    pub fn fill(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.k);
        for v in out.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            *v = self.sd * xi;
        }
    }
}

/// A coupled coarse/fine Brownian path.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    fine: IncrementStream,
    per_coarse: usize,
    scratch: Vec<f64>,
}

impl BrownianPath {
    pub fn new(spec: &PathSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            fine: IncrementStream::new(spec.seed, spec.path_index, spec.k, spec.fine_tau()),
            per_coarse: spec.fine_per_coarse(),
            scratch: vec![0.0; spec.k],
        })
    }

    pub fn next_fine(&mut self, out: &mut [f64]) {
        self.fine.fill(out);
    }

    /// Next coarse increment; the underlying fine increments are handed to
    /// `on_fine` in order before being summed.
    pub fn next_coarse_with(&mut self, out: &mut [f64], mut on_fine: impl FnMut(&[f64])) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.per_coarse {
            self.fine.fill(&mut self.scratch);
            on_fine(&self.scratch);
            for (o, f) in out.iter_mut().zip(&self.scratch) {
                *o += f;
            }
        }
    }

    pub fn next_coarse(&mut self, out: &mut [f64]) {
        self.next_coarse_with(out, |_| {});
    }
}

/// Materializes all increments of a path at one level.
pub fn increments(spec: &PathSpec, level: Level) -> Result<Vec<Vec<f64>>> {
    let mut path = BrownianPath::new(spec)?;
    let mut out = Vec::new();
    match level {
        Level::Fine => {
            for _ in 0..spec.n_steps * spec.fine_per_coarse() {
                let mut v = vec![0.0; spec.k];
                path.next_fine(&mut v);
                out.push(v);
            }
        }
        Level::Coarse => {
            for _ in 0..spec.n_steps {
                let mut v = vec![0.0; spec.k];
                path.next_coarse(&mut v);
                out.push(v);
            }
        }
    }
    Ok(out)
}
