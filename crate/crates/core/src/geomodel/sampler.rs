//! Unconditional stationary Gaussian field sampling.
//!
//! The default route embeds the grid's covariance in a periodic torus and
//! diagonalizes it with a 2-D FFT (circulant embedding). Small grids whose
//! embedding is not non-negative definite fall back to a dense Cholesky
//! factor of the covariance matrix.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{GeomodelError, GridGeometry, Layering, Result, VariogramSpec};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    Auto,
    Spectral,
    Dense,
}

/// Largest grid (in map-view cells) the dense fallback will factor.
const DENSE_LIMIT: usize = 2500;

enum Engine {
    Spectral {
        mx: usize,
        my: usize,
        /// sqrt(lambda / M) per torus frequency.
        scale: Vec<f64>,
        fft_x: Arc<dyn Fft<f64>>,
        fft_y: Arc<dyn Fft<f64>>,
    },
    Dense {
        chol: DMatrix<f64>,
    },
    Constant,
}

/// Precomputed sampler for one grid and variogram; cheap to share across
/// threads.
pub struct FieldSampler {
    nx: usize,
    ny: usize,
    nz: usize,
    mean: f64,
    engine: Engine,
    /// Fraction of eigenvalue mass that was negative and clipped.
    pub clipped_fraction: f64,
}

impl FieldSampler {
    pub fn new(geometry: &GridGeometry, variogram: &VariogramSpec, method: SamplerMethod) -> Result<Self> {
        geometry.validate()?;
        variogram.validate()?;
        let (nx, ny, nz) = (geometry.nx, geometry.ny, geometry.nz);
        let base = Self { nx, ny, nz, mean: variogram.mean_logk, engine: Engine::Constant, clipped_fraction: 0.0 };
        if variogram.sill == 0.0 {
            return Ok(base);
        }
        match method {
            SamplerMethod::Dense => Self::dense(base, geometry, variogram),
            SamplerMethod::Spectral => Ok(Self::spectral(base, geometry, variogram)),
            SamplerMethod::Auto => {
                let s = Self::spectral(base, geometry, variogram);
                if s.clipped_fraction > 1e-6 && nx * ny <= DENSE_LIMIT {
                    let base = Self { nx, ny, nz, mean: variogram.mean_logk, engine: Engine::Constant, clipped_fraction: 0.0 };
                    Self::dense(base, geometry, variogram)
                } else {
                    if s.clipped_fraction > 1e-6 {
                        log::warn!("circulant embedding clipped {:.2e} of eigenvalue mass", s.clipped_fraction);
                    }
                    Ok(s)
                }
            }
        }
    }

    fn spectral(mut base: Self, g: &GridGeometry, v: &VariogramSpec) -> Self {
        let pad = |n: usize, d: f64, r: f64| {
            let m = 2 * (n + (r / d).ceil() as usize);
            m + (m % 2)
        };
        let mx = pad(g.nx, g.dx, v.range_x);
        let my = pad(g.ny, g.dy, v.range_y);
        let mut buf = vec![Complex64::new(0.0, 0.0); mx * my];
        for jy in 0..my {
            let hy = jy.min(my - jy) as f64 * g.dy;
            for ix in 0..mx {
                let hx = ix.min(mx - ix) as f64 * g.dx;
                buf[ix + mx * jy] = Complex64::new(v.covariance(hx, hy), 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(mx);
        let fft_y = planner.plan_fft_forward(my);
        fft2(&mut buf, mx, my, &*fft_x, &*fft_y);
        let m = (mx * my) as f64;
        let (mut pos, mut neg) = (0.0, 0.0);
        let scale = buf
            .iter()
            .map(|c| {
                let lam = c.re;
                if lam < 0.0 {
                    neg -= lam;
                    0.0
                } else {
                    pos += lam;
                    (lam / m).sqrt()
                }
            })
            .collect();
        base.clipped_fraction = neg / (pos + neg);
        base.engine = Engine::Spectral { mx, my, scale, fft_x, fft_y };
        base
    }

    fn dense(mut base: Self, g: &GridGeometry, v: &VariogramSpec) -> Result<Self> {
        let n = g.nx * g.ny;
        let cov = DMatrix::from_fn(n, n, |a, b| {
            let (ia, ja) = (a % g.nx, a / g.nx);
            let (ib, jb) = (b % g.nx, b / g.nx);
            let hx = (ia as f64 - ib as f64) * g.dx;
            let hy = (ja as f64 - jb as f64) * g.dy;
            v.covariance(hx, hy) + if a == b { 1e-10 * v.sill } else { 0.0 }
        });
        let chol = cov.cholesky().ok_or(GeomodelError::Factorization)?;
        base.engine = Engine::Dense { chol: chol.unpack() };
        Ok(base)
    }

    /// One 2-D realization on the top layer (length `nx * ny`).
    pub fn sample_layer(&self, seed: u64) -> Vec<f64> {
        let n = self.nx * self.ny;
        let mut rng = seeds::rng(seed);
        match &self.engine {
            Engine::Constant => vec![self.mean; n],
            Engine::Dense { chol } => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut out = vec![self.mean; n];
                for (a, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (b, zb) in z.iter().enumerate().take(a + 1) {
                        s += chol[(a, b)] * zb;
                    }
                    *o += s;
                }
                out
            }
            Engine::Spectral { mx, my, scale, fft_x, fft_y } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft2(&mut buf, *mx, *my, &**fft_x, &**fft_y);
                let mut out = Vec::with_capacity(n);
                for j in 0..self.ny {
                    for i in 0..self.nx {
                        out.push(self.mean + buf[i + mx * j].re);
                    }
                }
                out
            }
        }
    }

    /// Full 3-D field.
    pub fn sample(&self, seed: u64, layering: Layering) -> Vec<f64> {
        match layering {
            Layering::Replicate => {
                let top = self.sample_layer(seed);
                let mut out = Vec::with_capacity(top.len() * self.nz);
                for _ in 0..self.nz {
                    out.extend_from_slice(&top);
                }
                out
            }
            Layering::Independent => (0..self.nz)
                .flat_map(|k| self.sample_layer(if k == 0 { seed } else { seeds::derive(seed, &[k as u64]) }))
                .collect(),
        }
    }
}

fn fft2(buf: &mut [Complex64], mx: usize, my: usize, fft_x: &dyn Fft<f64>, fft_y: &dyn Fft<f64>) {
    for row in buf.chunks_mut(mx) {
        fft_x.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); my];
    for ix in 0..mx {
        for (jy, c) in col.iter_mut().enumerate() {
            *c = buf[ix + mx * jy];
        }
        fft_y.process(&mut col);
        for (jy, c) in col.iter().enumerate() {
            buf[ix + mx * jy] = *c;
        }
    }
}
