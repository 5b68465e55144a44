//! Symmetric positive-definite solvers for the pressure equation.
//!
//! Matrices are given as a full diagonal plus one off-diagonal value per
//! face `(a, b)`. Small grids use a banded Cholesky factorization in a
//! bandwidth-minimizing ordering; larger ones use Jacobi-preconditioned CG.

use super::GridGeometry;

pub const RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveFailure {
    pub iterations: usize,
    pub relative_residual: f64,
}

enum Method {
    Banded { perm: Vec<usize>, bw: usize, band: Vec<f64> },
    Cg { max_iter: usize },
}

pub struct PressureSolver {
    n: usize,
    faces: Vec<(usize, usize)>,
    method: Method,
}

impl PressureSolver {
    pub fn new(geometry: &GridGeometry, faces: Vec<(usize, usize)>) -> Self {
        let n = geometry.n_cells();
        let mut dims = [(geometry.nx, 0usize), (geometry.ny, 1), (geometry.nz, 2)];
        dims.sort();
        let bw = dims[0].0 * dims[1].0;
        let method = if (n as f64) * (bw as f64).powi(2) <= 6.0e7 {
            // fastest-varying = smallest dimension
            let mut perm = vec![0; n];
            for (idx, p) in perm.iter_mut().enumerate() {
                let (i, j, k) = geometry.ijk(idx);
                let c = [i, j, k];
                let (a, b, s) = (c[dims[0].1], c[dims[1].1], c[dims[2].1]);
                *p = a + dims[0].0 * (b + dims[1].0 * s);
            }
            Method::Banded { perm, bw, band: vec![0.0; n * (bw + 1)] }
        } else {
            Method::Cg { max_iter: 20 * n.max(50) }
        };
        Self { n, faces, method }
    }

    /// Solves `A x = rhs` where `A = diag(diag) + sum_f off[f] (e_a e_b^T + e_b e_a^T)`.
    /// `x` holds the initial guess on entry.
    pub fn solve(&mut self, diag: &[f64], off: &[f64], rhs: &[f64], x: &mut [f64]) -> Result<SolveInfo, SolveFailure> {
        let n = self.n;
        let rhs_norm = norm(rhs).max(f64::MIN_POSITIVE);
        match &mut self.method {
            Method::Banded { perm, bw, band } => {
                let w = *bw + 1;
                band.iter_mut().for_each(|v| *v = 0.0);
                for (c, &d) in diag.iter().enumerate() {
                    band[perm[c] * w] = d;
                }
                for (&(a, b), &v) in self.faces.iter().zip(off) {
                    let (pa, pb) = (perm[a], perm[b]);
                    let (hi, lo) = if pa > pb { (pa, pb) } else { (pb, pa) };
                    band[hi * w + (hi - lo)] += v;
                }
                if !cholesky_banded(band, n, *bw) {
                    return Err(SolveFailure { iterations: 0, relative_residual: f64::NAN });
                }
                let mut y = vec![0.0; n];
                for (c, &r) in rhs.iter().enumerate() {
                    y[perm[c]] = r;
                }
                solve_banded(band, n, *bw, &mut y);
                for (c, xc) in x.iter_mut().enumerate() {
                    *xc = y[perm[c]];
                }
                let res = residual_norm(diag, off, &self.faces, rhs, x) / rhs_norm;
                if res <= RELATIVE_TOLERANCE {
                    Ok(SolveInfo { iterations: 1, relative_residual: res })
                } else {
                    Err(SolveFailure { iterations: 1, relative_residual: res })
                }
            }
            Method::Cg { max_iter } => pcg(diag, off, &self.faces, rhs, x, *max_iter, rhs_norm),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn matvec(diag: &[f64], off: &[f64], faces: &[(usize, usize)], x: &[f64], y: &mut [f64]) {
    for ((yi, d), xi) in y.iter_mut().zip(diag).zip(x) {
        *yi = d * xi;
    }
    for (&(a, b), &v) in faces.iter().zip(off) {
        y[a] += v * x[b];
        y[b] += v * x[a];
    }
}

fn residual_norm(diag: &[f64], off: &[f64], faces: &[(usize, usize)], rhs: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    matvec(diag, off, faces, x, &mut ax);
    ax.iter().zip(rhs).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
}

fn cholesky_banded(a: &mut [f64], n: usize, bw: usize) -> bool {
    let w = bw + 1;
    for i in 0..n {
        let j0 = i.saturating_sub(bw);
        for j in j0..=i {
            let k0 = j0.max(j.saturating_sub(bw));
            let mut s = a[i * w + (i - j)];
            for k in k0..j {
                s -= a[i * w + (i - k)] * a[j * w + (j - k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                a[i * w] = s.sqrt();
            } else {
                a[i * w + (i - j)] = s / a[j * w];
            }
        }
    }
    true
}

fn solve_banded(l: &[f64], n: usize, bw: usize, b: &mut [f64]) {
    let w = bw + 1;
    for i in 0..n {
        let mut s = b[i];
        for k in i.saturating_sub(bw)..i {
            s -= l[i * w + (i - k)] * b[k];
        }
        b[i] = s / l[i * w];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for r in i + 1..(i + bw + 1).min(n) {
            s -= l[r * w + (r - i)] * b[r];
        }
        b[i] = s / l[i * w];
    }
}

fn pcg(
    diag: &[f64],
    off: &[f64],
    faces: &[(usize, usize)],
    rhs: &[f64],
    x: &mut [f64],
    max_iter: usize,
    rhs_norm: f64,
) -> Result<SolveInfo, SolveFailure> {
    let n = x.len();
    let mut r = vec![0.0; n];
    matvec(diag, off, faces, x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut res = norm(&r) / rhs_norm;
    if res <= RELATIVE_TOLERANCE {
        return Ok(SolveInfo { iterations: 0, relative_residual: res });
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        matvec(diag, off, faces, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            return Err(SolveFailure { iterations: it, relative_residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / rhs_norm;
        if res <= RELATIVE_TOLERANCE {
            return Ok(SolveInfo { iterations: it, relative_residual: res });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveFailure { iterations: max_iter, relative_residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(g: &GridGeometry) -> (Vec<(usize, usize)>, Vec<f64>, Vec<f64>) {
        let mut faces = Vec::new();
        for idx in 0..g.n_cells() {
            let (i, j, k) = g.ijk(idx);
            if i + 1 < g.nx {
                faces.push((idx, g.index(i + 1, j, k)));
            }
            if j + 1 < g.ny {
                faces.push((idx, g.index(i, j + 1, k)));
            }
            if k + 1 < g.nz {
                faces.push((idx, g.index(i, j, k + 1)));
            }
        }
        let mut diag = vec![0.01; g.n_cells()];
        let off: Vec<f64> = faces.iter().enumerate().map(|(f, _)| -(1.0 + (f % 7) as f64)).collect();
        for (&(a, b), &v) in faces.iter().zip(&off) {
            diag[a] -= v;
            diag[b] -= v;
        }
        (faces, diag, off)
    }

    #[test]
    fn banded_and_cg_agree() {
        let g = GridGeometry::uniform(7, 5, 3, 700.0, 500.0, 30.0, 0.0).unwrap();
        let (faces, diag, off) = laplacian(&g);
        let rhs: Vec<f64> = (0..g.n_cells()).map(|i| (i as f64).sin()).collect();
        let mut banded = PressureSolver::new(&g, faces.clone());
        let mut x1 = vec![0.0; g.n_cells()];
        banded.solve(&diag, &off, &rhs, &mut x1).unwrap();
        let mut x2 = vec![0.0; g.n_cells()];
        let info = pcg(&diag, &off, &faces, &rhs, &mut x2, 10_000, norm(&rhs)).unwrap();
        assert!(info.relative_residual <= RELATIVE_TOLERANCE);
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
        }
    }
}
