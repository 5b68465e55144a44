//! Grid geometry, reservoir-model types and unconditional Gaussian prior
//! ensembles of log-permeability.
//!
//! Log-permeability is stored as the natural log of millidarcy. Fields are
//! flattened x-fastest: `idx = i + nx * (j + ny * k)` with `k = 0` the top
//! layer.

mod io;
mod sampler;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;

pub use io::{read_grid_file, write_field_csv, write_grid_file, GridFileHeader};
pub use sampler::{FieldSampler, SamplerMethod};

#[derive(Debug, Error)]
pub enum GeomodelError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid variogram: {0}")]
    InvalidVariogram(String),
    #[error("ensemble size must be at least 1")]
    EmptyEnsemble,
    #[error("field length {got} does not match grid with {expected} cells")]
    FieldLength { expected: usize, got: usize },
    #[error("covariance factorization failed")]
    Factorization,
    #[error("grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeomodelError>;

/// Regular Cartesian grid with uniform lateral spacing and per-layer
/// thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cell size along x [m].
    pub dx: f64,
    /// Cell size along y [m].
    pub dy: f64,
    /// Thickness of each layer, top to bottom [m].
    pub layer_thickness: Vec<f64>,
    /// Depth of the top of layer 0 at `x = 0` [m].
    pub top_depth: f64,
    /// Depth increase per metre along x; layers dip uniformly.
    #[serde(default)]
    pub dip_x: f64,
}

impl GridGeometry {
    /// Uniform-thickness grid covering `lx` by `ly` metres laterally.
    pub fn uniform(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64, total_thickness: f64, top_depth: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(GeomodelError::InvalidGeometry("cell counts must be at least 1".into()));
        }
        let g = Self {
            nx,
            ny,
            nz,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            layer_thickness: vec![total_thickness / nz as f64; nz],
            top_depth,
            dip_x: 0.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeomodelError::InvalidGeometry(m.to_string()));
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return bad("nx, ny, nz must be at least 1");
        }
        if !(self.dx > 0.0 && self.dx.is_finite() && self.dy > 0.0 && self.dy.is_finite()) {
            return bad("dx and dy must be positive");
        }
        if self.layer_thickness.len() != self.nz {
            return bad("layer_thickness must have nz entries");
        }
        if self.layer_thickness.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("layer thicknesses must be positive");
        }
        if !(self.top_depth >= 0.0 && self.top_depth.is_finite()) {
            return bad("top_depth must be non-negative");
        }
        if !self.dip_x.is_finite() || self.top_depth + self.dip_x.min(0.0) * self.nx as f64 * self.dx < 0.0 {
            return bad("dipping top must stay below the surface");
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn n_columns(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    /// Map-view column index of a cell.
    #[inline]
    pub fn column(&self, idx: usize) -> usize {
        idx % (self.nx * self.ny)
    }

    pub fn lateral_extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.dx, self.ny as f64 * self.dy)
    }

    pub fn column_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Cell-centre map coordinates [m].
    pub fn column_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Column containing map point `(x, y)`, clamped into the grid.
    pub fn locate(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x / self.dx).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((y / self.dy).floor().max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    /// Centre depth of layer `k` at `x = 0` [m].
    pub fn layer_center_depth(&self, k: usize) -> f64 {
        let above: f64 = self.layer_thickness[..k].iter().sum();
        self.top_depth + above + 0.5 * self.layer_thickness[k]
    }

    /// Depth of a cell centre, including dip [m].
    pub fn cell_center_depth(&self, idx: usize) -> f64 {
        let (i, _, k) = self.ijk(idx);
        self.layer_center_depth(k) + self.dip_x * (i as f64 + 0.5) * self.dx
    }

    pub fn total_thickness(&self) -> f64 {
        self.layer_thickness.iter().sum()
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.dx * self.dy * self.layer_thickness[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    Exponential,
    Spherical,
    Gaussian,
}

/// Stationary covariance of log-permeability.
///
/// `range_x`/`range_y` are practical ranges: the exponential and Gaussian
/// correlations fall to `e^-3` at one range, the spherical one reaches zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariogramSpec {
    pub model: CovarianceModel,
    pub range_x: f64,
    pub range_y: f64,
    /// Variance of log-permeability [ln(mD)^2].
    pub sill: f64,
    /// Mean log-permeability [ln(mD)].
    pub mean_logk: f64,
}

impl Default for VariogramSpec {
    fn default() -> Self {
        Self {
            model: CovarianceModel::Exponential,
            range_x: 800.0,
            range_y: 800.0,
            sill: 1.0,
            mean_logk: 100f64.ln(),
        }
    }
}

impl VariogramSpec {
    pub fn validate(&self) -> Result<()> {
        let ok_range = |r: f64| r > 0.0 && r.is_finite();
        if !ok_range(self.range_x) || !ok_range(self.range_y) {
            return Err(GeomodelError::InvalidVariogram("ranges must be positive".into()));
        }
        if !(self.sill >= 0.0 && self.sill.is_finite()) {
            return Err(GeomodelError::InvalidVariogram("sill must be non-negative".into()));
        }
        if !self.mean_logk.is_finite() {
            return Err(GeomodelError::InvalidVariogram("mean_logk must be finite".into()));
        }
        Ok(())
    }

    /// Correlation at lag `(hx, hy)` [m].
    pub fn correlation(&self, hx: f64, hy: f64) -> f64 {
        let h = ((hx / self.range_x).powi(2) + (hy / self.range_y).powi(2)).sqrt();
        match self.model {
            CovarianceModel::Exponential => (-3.0 * h).exp(),
            CovarianceModel::Gaussian => (-3.0 * h * h).exp(),
            CovarianceModel::Spherical => {
                if h >= 1.0 {
                    0.0
                } else {
                    1.0 - 1.5 * h + 0.5 * h * h * h
                }
            }
        }
    }

    pub fn covariance(&self, hx: f64, hy: f64) -> f64 {
        self.sill * self.correlation(hx, hy)
    }
}

/// How the 2-D top-layer field is extended to the full 3-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layering {
    /// Every layer copies the top layer.
    #[default]
    Replicate,
    /// Each layer is an independent draw with the same variogram.
    Independent,
}

/// One realization of the uncertain reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirModel {
    pub id: usize,
    pub geometry: Arc<GridGeometry>,
    /// Per-cell ln(mD).
    pub log_perm: Vec<f64>,
    /// Per-cell porosity in (0, 1).
    pub porosity: Vec<f64>,
}

impl ReservoirModel {
    pub fn new(id: usize, geometry: Arc<GridGeometry>, log_perm: Vec<f64>, porosity: Vec<f64>) -> Result<Self> {
        let n = geometry.n_cells();
        if log_perm.len() != n {
            return Err(GeomodelError::FieldLength { expected: n, got: log_perm.len() });
        }
        if porosity.len() != n {
            return Err(GeomodelError::FieldLength { expected: n, got: porosity.len() });
        }
        if log_perm.iter().any(|v| !v.is_finite()) {
            return Err(GeomodelError::InvalidGeometry("log_perm must be finite".into()));
        }
        if porosity.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(GeomodelError::InvalidGeometry("porosity must lie in (0, 1)".into()));
        }
        Ok(Self { id, geometry, log_perm, porosity })
    }

    /// Permeability of a cell in m^2.
    #[inline]
    pub fn perm_m2(&self, idx: usize) -> f64 {
        self.log_perm[idx].exp() * MILLIDARCY
    }

    /// True when every layer equals the top layer bit for bit.
    pub fn layers_identical(&self) -> bool {
        let nc = self.geometry.n_columns();
        let top = &self.log_perm[..nc];
        self.log_perm.chunks(nc).all(|layer| layer == top)
    }
}

/// 1 mD in m^2.
pub const MILLIDARCY: f64 = 9.869_233e-16;

/// Ordered collection of models sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub geometry: Arc<GridGeometry>,
    pub members: Vec<ReservoirModel>,
}

impl Ensemble {
    pub fn new(geometry: Arc<GridGeometry>, members: Vec<ReservoirModel>) -> Result<Self> {
        if members.is_empty() {
            return Err(GeomodelError::EmptyEnsemble);
        }
        if members.iter().any(|m| *m.geometry != *geometry) {
            return Err(GeomodelError::InvalidGeometry("members must share the ensemble geometry".into()));
        }
        Ok(Self { geometry, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Log-permeability fields, one `Vec` per member.
    pub fn log_perm_columns(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.log_perm.clone()).collect()
    }
}

/// Draws one field on the full grid (top layer replicated downwards).
pub fn sample_field(geometry: &GridGeometry, variogram: &VariogramSpec, seed: u64) -> Result<Vec<f64>> {
    let sampler = FieldSampler::new(geometry, variogram, SamplerMethod::Auto)?;
    Ok(sampler.sample(seed, Layering::Replicate))
}

/// Generates `n` prior members with constant porosity. Member `i` draws from
/// the derived stream `(seed, i)`.
pub fn generate_prior_ensemble(
    geometry: &GridGeometry,
    variogram: &VariogramSpec,
    porosity: f64,
    n: usize,
    seed: u64,
    layering: Layering,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(GeomodelError::EmptyEnsemble);
    }
    geometry.validate()?;
    let sampler = FieldSampler::new(geometry, variogram, SamplerMethod::Auto)?;
    let geom = Arc::new(geometry.clone());
    let members = (0..n)
        .into_par_iter()
        .map(|i| {
            let field = sampler.sample(member_seed(seed, i), layering);
            ReservoirModel::new(i, geom.clone(), field, vec![porosity; geometry.n_cells()])
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(geom, members)
}

/// Seed stream of prior member `i`.
pub fn member_seed(seed: u64, i: usize) -> u64 {
    seeds::derive(seed, &[i as u64])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, d: f64) -> GridGeometry {
        GridGeometry::uniform(n, n, 1, n as f64 * d, n as f64 * d, 10.0, 1000.0).unwrap()
    }

    #[test]
    fn zero_sill_gives_constant_field() {
        let g = grid(16, 50.0);
        let v = VariogramSpec { sill: 0.0, mean_logk: 3.0, ..Default::default() };
        let f = sample_field(&g, &v, 11).unwrap();
        assert!(f.iter().all(|&x| x == 3.0));
    }

    #[test]
    fn rejects_bad_variogram() {
        let g = grid(8, 50.0);
        let v = VariogramSpec { range_x: 0.0, ..Default::default() };
        assert!(matches!(sample_field(&g, &v, 1), Err(GeomodelError::InvalidVariogram(_))));
        let v = VariogramSpec { sill: -1.0, ..Default::default() };
        assert!(matches!(sample_field(&g, &v, 1), Err(GeomodelError::InvalidVariogram(_))));
    }

    #[test]
    fn short_range_field_has_unit_variance() {
        // Range of one cell: correlation at one-cell lag is e^-3, close to
        // white noise. Compare with the spread of iid normal sample variance.
        let g = grid(64, 10.0);
        let v = VariogramSpec { range_x: 10.0, range_y: 10.0, sill: 1.0, mean_logk: 0.0, ..Default::default() };
        let f = sample_field(&g, &v, 2024).unwrap();
        let n = f.len() as f64;
        let mean = f.iter().sum::<f64>() / n;
        let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "variance {var}");
    }

    #[test]
    fn replicated_layers_on_example_grid() {
        let g = GridGeometry::uniform(51, 51, 11, 4000.0, 4000.0, 44.0, 1000.0).unwrap();
        let ens = generate_prior_ensemble(&g, &VariogramSpec::default(), 0.15, 2, 5, Layering::Replicate).unwrap();
        for m in &ens.members {
            assert_eq!(m.log_perm.len(), 51 * 51 * 11);
            assert!(m.layers_identical());
        }
    }

    #[test]
    fn ensemble_is_reproducible_and_matches_single_draw() {
        let g = grid(20, 100.0);
        let v = VariogramSpec::default();
        let a = generate_prior_ensemble(&g, &v, 0.2, 10, 99, Layering::Replicate).unwrap();
        let b = generate_prior_ensemble(&g, &v, 0.2, 10, 99, Layering::Replicate).unwrap();
        assert_eq!(a, b);
        let one = generate_prior_ensemble(&g, &v, 0.2, 1, 99, Layering::Replicate).unwrap();
        assert_eq!(one.members[0].log_perm, sample_field(&g, &v, member_seed(99, 0)).unwrap());
        // distinct members
        for i in 0..10 {
            for j in i + 1..10 {
                assert_ne!(a.members[i].log_perm, a.members[j].log_perm);
            }
        }
    }

    #[test]
    fn zero_members_rejected() {
        let g = grid(4, 100.0);
        let r = generate_prior_ensemble(&g, &VariogramSpec::default(), 0.2, 0, 1, Layering::Replicate);
        assert!(matches!(r, Err(GeomodelError::EmptyEnsemble)));
    }

    #[test]
    fn geometry_indexing_round_trips() {
        let g = GridGeometry::uniform(5, 4, 3, 500.0, 400.0, 30.0, 100.0).unwrap();
        for idx in 0..g.n_cells() {
            let (i, j, k) = g.ijk(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.layer_center_depth(0), 105.0);
        assert_eq!(g.layer_center_depth(2), 125.0);
        assert_eq!(g.locate(250.0, 399.0), (2, 3));
    }
}
