//! Seeded sampling of `(x, y)` pairs from the two data models.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::{self, streams, StreamRng};
use crate::spectra::Measure;

/// `n` samples stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// `n × d`
    pub x: Matrix,
    pub y: Vector,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Streaming generator over one `(seed, stream)` pair.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    measure: &'a Measure,
    rng: StreamRng,
    z: Vector,
}

impl<'a> Sampler<'a> {
    pub fn new(measure: &'a Measure, seed: u64) -> Self {
        Self::with_stream(measure, seed, streams::DATA)
    }

    pub fn with_stream(measure: &'a Measure, seed: u64, stream: u64) -> Self {
        let d = measure.dim();
        Self { measure, rng: rng::stream(seed, stream), z: Vector::zeros(d) }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Writes one input into `x` and returns its label.
    pub fn draw(&mut self, x: &mut Vector) -> f64 {
        match self.measure {
            Measure::Qf(t) => {
                for v in x.iter_mut() {
                    *v = self.rng.sample(StandardNormal);
                }
                t.b.mul_to(x, &mut self.z);
                t.b0 + x.dot(&self.z)
            }
            Measure::Mg(m) => {
                let plus: bool = self.rng.random();
                for v in self.z.iter_mut() {
                    *v = self.rng.sample(StandardNormal);
                }
                let chol = if plus { &m.chol_plus } else { &m.chol_minus };
                chol.mul_to(&self.z, x);
                if plus {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn next_batch(&mut self, n: usize) -> Result<SampleBatch> {
        if n == 0 {
            bail!(Argument, "batch size must be at least 1");
        }
        let d = self.dim();
        let mut x = Matrix::zeros(n, d);
        let mut y = Vector::zeros(n);
        let mut row = Vector::zeros(d);
        for i in 0..n {
            y[i] = self.draw(&mut row);
            x.row_mut(i).tr_copy_from(&row);
        }
        Ok(SampleBatch { x, y })
    }
}

pub fn sample_batch(measure: &Measure, n: usize, seed: u64) -> Result<SampleBatch> {
    Sampler::new(measure, seed).next_batch(n)
}
