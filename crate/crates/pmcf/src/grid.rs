//! Sample grids on S^1 and S^2 and the derivative operators used for the
//! local geometry pipeline: exact Fourier differentiation on the circle,
//! 4th-order finite differences on a Gauss-Legendre x uniform sphere grid
//! with ghost rows across the poles.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spherical::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum GridSpec {
    /// Uniform angles theta_j = 2 pi j / samples.
    Circle { samples: usize },
    /// Gauss-Legendre colatitudes x uniform longitudes. `polar_ghosts`
    /// selects reflected ghost rows across the poles (one-sided stencils
    /// otherwise).
    Sphere {
        n_lat: usize,
        n_lon: usize,
        polar_ghosts: bool,
    },
}

impl GridSpec {
    pub fn circle(samples: usize) -> Self {
        GridSpec::Circle { samples }
    }

    pub fn sphere(n_lat: usize, n_lon: usize) -> Self {
        GridSpec::Sphere {
            n_lat,
            n_lon,
            polar_ghosts: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GridSpec::Circle { samples } => {
                if samples < 16 || samples % 2 != 0 {
                    return Err(Error::GridTooCoarse(format!(
                        "circle grid needs an even sample count >= 16, got {samples}"
                    )));
                }
            }
            GridSpec::Sphere { n_lat, n_lon, .. } => {
                if n_lat < 9 {
                    return Err(Error::GridTooCoarse(format!(
                        "sphere grid needs n_lat >= 9, got {n_lat}"
                    )));
                }
                if n_lon < 16 || n_lon % 2 != 0 {
                    return Err(Error::GridTooCoarse(format!(
                        "sphere grid needs an even n_lon >= 16, got {n_lon}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Intrinsic dimension n of the sampled sphere.
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            GridSpec::Circle { .. } => 1,
            GridSpec::Sphere { .. } => 2,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            GridSpec::Circle { samples } => samples,
            GridSpec::Sphere { n_lat, n_lon, .. } => n_lat * n_lon,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Node coordinates and quadrature weights for a grid.
#[derive(Debug, Clone)]
pub struct GridGeometry {
    pub spec: GridSpec,
    /// Circle: theta per sample. Sphere: (colat, lon) pairs flattened row-major.
    pub coords: Vec<[f64; 2]>,
    /// Quadrature weight per sample for integrals in the parameter domain
    /// (d theta on the circle, d colat d lon on the sphere), so that
    /// sum f * sqrt(det g) * weight approximates the surface integral.
    pub weights: Vec<f64>,
    /// Colatitude nodes (sphere only).
    pub colats: Vec<f64>,
    pub lons: Vec<f64>,
}

impl GridGeometry {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        match spec {
            GridSpec::Circle { samples } => {
                let dtheta = std::f64::consts::TAU / samples as f64;
                let coords = (0..samples).map(|j| [j as f64 * dtheta, 0.0]).collect();
                let weights = vec![dtheta; samples];
                Ok(Self {
                    spec,
                    coords,
                    weights,
                    colats: Vec::new(),
                    lons: Vec::new(),
                })
            }
            GridSpec::Sphere { n_lat, n_lon, .. } => {
                let (x, w) = gauss_legendre(n_lat);
                // GL nodes in cos(colat), ordered north (colat small) to south.
                let colats: Vec<f64> = x.iter().rev().map(|&xi| xi.acos()).collect();
                let wlat: Vec<f64> = w.iter().rev().copied().collect();
                let dphi = std::f64::consts::TAU / n_lon as f64;
                let lons: Vec<f64> = (0..n_lon).map(|j| j as f64 * dphi).collect();
                let mut coords = Vec::with_capacity(n_lat * n_lon);
                let mut weights = Vec::with_capacity(n_lat * n_lon);
                for i in 0..n_lat {
                    for j in 0..n_lon {
                        coords.push([colats[i], lons[j]]);
                        // GL weight integrates d(cos colat) = sin(colat) dcolat;
                        // divide the sine out to get a dcolat-domain weight
                        weights.push(wlat[i] / colats[i].sin() * dphi);
                    }
                }
                Ok(Self {
                    spec,
                    coords,
                    weights,
                    colats,
                    lons,
                })
            }
        }
    }

    /// Unit-sphere embedding z(node) in R^{n+1} (first n+1 ambient slots).
    pub fn unit_sphere_point(&self, sample: usize) -> Vec<f64> {
        match self.spec {
            GridSpec::Circle { .. } => {
                let t = self.coords[sample][0];
                vec![t.cos(), t.sin()]
            }
            GridSpec::Sphere { .. } => {
                let [colat, lon] = self.coords[sample];
                vec![
                    colat.sin() * lon.cos(),
                    colat.sin() * lon.sin(),
                    colat.cos(),
                ]
            }
        }
    }

    /// Round-metric components at a sample: for the circle [1], for the sphere
    /// diag(1, sin^2 colat) in (colat, lon) coordinates.
    pub fn round_metric(&self, sample: usize) -> [f64; 2] {
        match self.spec {
            GridSpec::Circle { .. } => [1.0, 0.0],
            GridSpec::Sphere { .. } => {
                let colat = self.coords[sample][0];
                [1.0, colat.sin().powi(2)]
            }
        }
    }
}

/// Derivative operators over a grid for multi-component sample fields stored
/// row-major as data[sample * dim + component].
pub struct Differentiator {
    pub grid: GridGeometry,
    circle_fft: Option<CircleFft>,
    sphere_fd: Option<SphereFd>,
}

struct CircleFft {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    samples: usize,
}

const STENCIL: usize = 7;
const HALO: i64 = 3;

struct SphereFd {
    n_lat: usize,
    n_lon: usize,
    /// 7-point first/second derivative weights per latitude row.
    lat_w1: Vec<[f64; STENCIL]>,
    lat_w2: Vec<[f64; STENCIL]>,
    /// Stencil sample map per (row, offset): (mapped row, lon shift).
    lat_map: Vec<[(usize, usize); STENCIL]>,
}

impl Differentiator {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let grid = GridGeometry::new(spec)?;
        match spec {
            GridSpec::Circle { samples } => {
                let mut planner = FftPlanner::new();
                Ok(Self {
                    grid,
                    circle_fft: Some(CircleFft {
                        fwd: planner.plan_fft_forward(samples),
                        inv: planner.plan_fft_inverse(samples),
                        samples,
                    }),
                    sphere_fd: None,
                })
            }
            GridSpec::Sphere {
                n_lat,
                n_lon,
                polar_ghosts,
            } => {
                let fd = SphereFd::new(&grid, n_lat, n_lon, polar_ghosts);
                Ok(Self {
                    grid,
                    circle_fft: None,
                    sphere_fd: Some(fd),
                })
            }
        }
    }

    pub fn n_samples(&self) -> usize {
        self.grid.spec.len()
    }

    /// First partial derivative along coordinate direction `dir` (0 = theta or
    /// colat, 1 = lon) of a field with `dim` components per sample.
    pub fn d1(&self, field: &[f64], dim: usize, dir: usize, out: &mut [f64]) {
        if let Some(fft) = &self.circle_fft {
            fft.derivative(field, dim, 1, out);
        } else {
            self.sphere_fd.as_ref().unwrap().d1(field, dim, dir, out);
        }
    }

    /// Second partial derivative along directions (dir_a, dir_b).
    pub fn d2(&self, field: &[f64], dim: usize, dir_a: usize, dir_b: usize, out: &mut [f64]) {
        if let Some(fft) = &self.circle_fft {
            fft.derivative(field, dim, 2, out);
        } else {
            let fd = self.sphere_fd.as_ref().unwrap();
            match (dir_a, dir_b) {
                (0, 0) => fd.d2_lat(field, dim, out),
                (1, 1) => fd.d2_lon(field, dim, out),
                _ => {
                    let mut tmp = vec![0.0; field.len()];
                    fd.d1(field, dim, 1, &mut tmp);
                    fd.d1(&tmp, dim, 0, out);
                }
            }
        }
    }

    /// Trigonometric interpolation of a circle field at angle `theta`
    /// (circle grids only). O(M) per evaluation.
    pub fn interp_circle(&self, field: &[f64], dim: usize, theta: f64, out: &mut [f64]) {
        let m = self.grid.spec.len();
        debug_assert!(self.circle_fft.is_some());
        // Dirichlet-kernel form of trigonometric interpolation on M uniform
        // nodes: f(theta) = sum_j f_j D(theta - theta_j) with
        // D(x) = sin(M x / 2) * cot(x / 2) / M (even M variant).
        out.iter_mut().for_each(|o| *o = 0.0);
        let mf = m as f64;
        for j in 0..m {
            let x = theta - self.grid.coords[j][0];
            let s = (0.5 * mf * x).sin();
            let w = if s.abs() < 1e-14 && (0.5 * x).sin().abs() < 1e-14 {
                1.0
            } else {
                s * (0.5 * x).tan().recip() / mf
            };
            for c in 0..dim {
                out[c] += w * field[j * dim + c];
            }
        }
    }
}

impl CircleFft {
    fn derivative(&self, field: &[f64], dim: usize, order: u32, out: &mut [f64]) {
        let m = self.samples;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for c in 0..dim {
            for j in 0..m {
                buf[j] = Complex::new(field[j * dim + c], 0.0);
            }
            self.fwd.process(&mut buf);
            for (k, v) in buf.iter_mut().enumerate() {
                let freq = if k <= m / 2 {
                    k as f64
                } else {
                    k as f64 - m as f64
                };
                let ik = Complex::new(0.0, freq);
                let mut factor = ik.powu(order);
                // odd derivatives of the unmatched Nyquist mode vanish
                if k == m / 2 && order % 2 == 1 {
                    factor = Complex::new(0.0, 0.0);
                }
                *v *= factor;
            }
            self.inv.process(&mut buf);
            for j in 0..m {
                out[j * dim + c] = buf[j].re / m as f64;
            }
        }
    }
}

impl SphereFd {
    fn new(grid: &GridGeometry, n_lat: usize, n_lon: usize, polar_ghosts: bool) -> Self {
        let colats = &grid.colats;
        let mut lat_w1 = Vec::with_capacity(n_lat);
        let mut lat_w2 = Vec::with_capacity(n_lat);
        let mut lat_map = Vec::with_capacity(n_lat);
        for i in 0..n_lat {
            let mut nodes = [0.0f64; STENCIL];
            let mut map = [(0usize, 0usize); STENCIL];
            for (s, off) in (-HALO..=HALO).enumerate() {
                let idx = i as i64 + off;
                let (row, colat, shift) = if polar_ghosts {
                    if idx < 0 {
                        let r = (-idx - 1) as usize;
                        (r, -colats[r], n_lon / 2)
                    } else if idx >= n_lat as i64 {
                        let r = 2 * n_lat - idx as usize - 1;
                        (r, 2.0 * std::f64::consts::PI - colats[r], n_lon / 2)
                    } else {
                        let r = idx as usize;
                        (r, colats[r], 0)
                    }
                } else {
                    // one-sided: clamp the stencil inside the grid
                    let r = idx.clamp(0, n_lat as i64 - 1) as usize;
                    (r, colats[r], 0)
                };
                nodes[s] = colat;
                map[s] = (row, shift);
            }
            if !polar_ghosts {
                // shift duplicated clamped nodes to a proper one-sided stencil
                let lo = (i as i64 - HALO)
                    .max(0)
                    .min(n_lat as i64 - STENCIL as i64) as usize;
                for (s, item) in map.iter_mut().enumerate() {
                    *item = (lo + s, 0);
                    nodes[s] = colats[lo + s];
                }
            }
            let w = fornberg_weights(&nodes, colats[i], 2);
            lat_w1.push(w[1]);
            lat_w2.push(w[2]);
            lat_map.push(map);
        }
        Self {
            n_lat,
            n_lon,
            lat_w1,
            lat_w2,
            lat_map,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_lon + j
    }

    fn d1(&self, field: &[f64], dim: usize, dir: usize, out: &mut [f64]) {
        if dir == 0 {
            self.apply_lat(field, dim, &self.lat_w1, out);
        } else {
            self.apply_lon(field, dim, &LON_W1, LON_W1_DENOM, out);
        }
    }

    fn d2_lat(&self, field: &[f64], dim: usize, out: &mut [f64]) {
        self.apply_lat(field, dim, &self.lat_w2, out);
    }

    fn d2_lon(&self, field: &[f64], dim: usize, out: &mut [f64]) {
        self.apply_lon(field, dim, &LON_W2, LON_W2_DENOM, out);
    }

    fn apply_lat(&self, field: &[f64], dim: usize, w: &[[f64; STENCIL]], out: &mut [f64]) {
        for i in 0..self.n_lat {
            let wi = &w[i];
            let map = &self.lat_map[i];
            for j in 0..self.n_lon {
                let base = self.idx(i, j) * dim;
                for c in 0..dim {
                    let mut s = 0.0;
                    for (sten, &(row, shift)) in map.iter().enumerate() {
                        let jj = (j + shift) % self.n_lon;
                        s += wi[sten] * field[self.idx(row, jj) * dim + c];
                    }
                    out[base + c] = s;
                }
            }
        }
    }

    fn apply_lon(
        &self,
        field: &[f64],
        dim: usize,
        w: &[f64; STENCIL],
        denom: f64,
        out: &mut [f64],
    ) {
        let h = std::f64::consts::TAU / self.n_lon as f64;
        let scale = if std::ptr::eq(w, &LON_W1) {
            1.0 / (denom * h)
        } else {
            1.0 / (denom * h * h)
        };
        for i in 0..self.n_lat {
            for j in 0..self.n_lon {
                let base = self.idx(i, j) * dim;
                for c in 0..dim {
                    let mut s = 0.0;
                    for (sten, off) in (-HALO..=HALO).enumerate() {
                        let jj = (j as i64 + off).rem_euclid(self.n_lon as i64) as usize;
                        s += w[sten] * field[self.idx(i, jj) * dim + c];
                    }
                    out[base + c] = s * scale;
                }
            }
        }
    }
}

const LON_W1: [f64; STENCIL] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
const LON_W2: [f64; STENCIL] = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0];
const LON_W1_DENOM: f64 = 60.0;
const LON_W2_DENOM: f64 = 180.0;

/// Fornberg finite-difference weights on arbitrary nodes for derivative
/// orders 0..=max_order at evaluation point x0.
pub fn fornberg_weights<const S: usize>(nodes: &[f64; S], x0: f64, max_order: usize) -> Vec<[f64; S]> {
    let n = nodes.len();
    let m = max_order;
    let mut c = vec![vec![0.0f64; m + 1]; n];
    let mut c1 = 1.0f64;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0f64;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    let mut out = vec![[0.0f64; S]; m + 1];
    for order in 0..=m {
        for i in 0..n {
            out[order][i] = c[i][order];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_minima_enforced() {
        assert!(GridSpec::circle(14).validate().is_err());
        assert!(GridSpec::circle(15).validate().is_err());
        assert!(GridSpec::circle(16).validate().is_ok());
        assert!(GridSpec::sphere(8, 16).validate().is_err());
        assert!(GridSpec::sphere(9, 12).validate().is_err());
        assert!(GridSpec::sphere(9, 16).validate().is_ok());
    }

    #[test]
    fn circle_spectral_derivative_is_exact_on_modes() {
        let d = Differentiator::new(GridSpec::circle(32)).unwrap();
        let f: Vec<f64> = d.grid.coords.iter().map(|c| (3.0 * c[0]).sin()).collect();
        let mut df = vec![0.0; 32];
        let mut d2f = vec![0.0; 32];
        d.d1(&f, 1, 0, &mut df);
        d.d2(&f, 1, 0, 0, &mut d2f);
        for j in 0..32 {
            let t = d.grid.coords[j][0];
            assert_relative_eq!(df[j], 3.0 * (3.0 * t).cos(), epsilon = 1e-12);
            assert_relative_eq!(d2f[j], -9.0 * (3.0 * t).sin(), epsilon = 1e-11);
        }
    }

    #[test]
    fn circle_interpolation_matches_samples_and_modes() {
        let d = Differentiator::new(GridSpec::circle(32)).unwrap();
        let f: Vec<f64> = d
            .grid
            .coords
            .iter()
            .map(|c| 1.0 + (2.0 * c[0]).cos() - 0.5 * (5.0 * c[0]).sin())
            .collect();
        let mut out = [0.0];
        for &t in &[0.123, 1.7, 4.56] {
            d.interp_circle(&f, 1, t, &mut out);
            let want = 1.0 + (2.0 * t).cos() - 0.5 * (5.0 * t).sin();
            assert_relative_eq!(out[0], want, epsilon = 1e-10);
        }
        // at a node it reproduces the sample
        d.interp_circle(&f, 1, d.grid.coords[7][0], &mut out);
        assert_relative_eq!(out[0], f[7], epsilon = 1e-10);
    }

    #[test]
    fn sphere_quadrature_integrates_harmonics() {
        let g = GridGeometry::new(GridSpec::sphere(12, 24)).unwrap();
        // weights are dcolat dlon; the round area element adds sin(colat)
        let total: f64 = g
            .weights
            .iter()
            .zip(&g.coords)
            .map(|(w, c)| w * c[0].sin())
            .sum();
        assert_relative_eq!(total, 4.0 * std::f64::consts::PI, epsilon = 1e-12);
        let mut s = 0.0;
        for (w, c) in g.weights.iter().zip(&g.coords) {
            s += w * c[0].sin() * c[0].cos().powi(2);
        }
        assert_relative_eq!(s, 4.0 * std::f64::consts::PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_fd_derivatives_converge_at_fourth_order() {
        // smooth function on the sphere expressed through the embedding, so
        // it is continuous across the poles
        let f_of = |colat: f64, lon: f64| {
            let (x, y, z) = (colat.sin() * lon.cos(), colat.sin() * lon.sin(), colat.cos());
            (x + 0.3 * y).exp() * z + x * y
        };
        let dcolat_of = |colat: f64, lon: f64| {
            let h = 1e-6;
            (f_of(colat + h, lon) - f_of(colat - h, lon)) / (2.0 * h)
        };
        let mut errs = Vec::new();
        for &(nl, nm) in &[(12usize, 24usize), (24, 48)] {
            let d = Differentiator::new(GridSpec::sphere(nl, nm)).unwrap();
            let f: Vec<f64> = d.grid.coords.iter().map(|c| f_of(c[0], c[1])).collect();
            let mut df = vec![0.0; f.len()];
            d.d1(&f, 1, 0, &mut df);
            let mut worst = 0.0f64;
            for (j, c) in d.grid.coords.iter().enumerate() {
                worst = worst.max((df[j] - dcolat_of(c[0], c[1])).abs());
            }
            errs.push(worst);
        }
        // 4th order: halving h divides the error by ~16; allow slack
        assert!(
            errs[1] < errs[0] / 8.0,
            "errors did not drop at 4th order: {errs:?}"
        );
    }
}
