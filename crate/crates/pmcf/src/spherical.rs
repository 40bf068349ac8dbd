//! Gauss-Legendre quadrature and real spherical harmonics.
//!
//! Harmonics are normalized to unit mean square over the sphere, so a field
//! c * Y_{gamma m} decomposes with coefficient exactly c.

use std::f64::consts::PI;

/// Gauss-Legendre nodes (ascending in (-1,1)) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Mean-square-normalized associated Legendre values Pbar_{l m}(cos colat)
/// for all l in m..=lmax, returned as a vector indexed by l - m.
///
/// Normalization: the surface harmonic Pbar_{lm}(cos t) * {cos,sin}(m p) has
/// mean square 1 over the sphere (geodesy 4-pi convention).
pub fn normalized_legendre(lmax: usize, m: usize, cos_colat: f64) -> Vec<f64> {
    let x: f64 = cos_colat;
    let sx = (1.0 - x * x).max(0.0).sqrt();
    let mut out = Vec::with_capacity(lmax + 1 - m);
    // P_mm
    let mut pmm = 1.0;
    if m > 0 {
        pmm = (2.0f64).sqrt();
        for k in 1..=m {
            pmm *= sx * ((2.0 * k as f64 + 1.0) / (2.0 * k as f64)).sqrt();
        }
    }
    out.push(pmm);
    if lmax == m {
        return out;
    }
    let mut plm1 = pmm;
    let mut pl = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
    out.push(pl);
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let mf = m as f64;
        let a = ((2.0 * lf + 1.0) * (2.0 * lf - 1.0) / ((lf - mf) * (lf + mf))).sqrt();
        let b = ((2.0 * lf + 1.0) * (lf - 1.0 - mf) * (lf - 1.0 + mf)
            / ((2.0 * lf - 3.0) * (lf - mf) * (lf + mf)))
            .sqrt();
        let p = a * x * pl - b * plm1;
        plm1 = pl;
        pl = p;
        out.push(pl);
    }
    out
}

/// Real spherical harmonic Y_{l m}(colat, lon): m > 0 pairs with cos(m lon),
/// m < 0 with sin(|m| lon); mean square 1 over the sphere.
pub fn real_sh(l: usize, m: i64, colat: f64, lon: f64) -> f64 {
    let ma = m.unsigned_abs() as usize;
    let p = normalized_legendre(l, ma, colat.cos());
    let plm = p[l - ma];
    match m.signum() {
        0 => plm,
        1 => plm * (ma as f64 * lon).cos(),
        _ => plm * (ma as f64 * lon).sin(),
    }
}

/// Forward real spherical-harmonic analysis on a GL x uniform grid.
/// Returns coefficients indexed by (l, m) with m in -l..=l, flattened as
/// coeffs[l][m + l]. Field layout: data[i_lat * n_lon + j_lon].
pub struct SphericalTransform {
    pub lmax: usize,
    n_lat: usize,
    n_lon: usize,
    /// Pbar_{lm} at each latitude: plm[m][i_lat][l - m]
    plm: Vec<Vec<Vec<f64>>>,
    /// GL weights over d(cos colat), north-to-south
    wlat: Vec<f64>,
    cos_tab: Vec<Vec<f64>>,
    sin_tab: Vec<Vec<f64>>,
}

impl SphericalTransform {
    pub fn new(lmax: usize, n_lat: usize, n_lon: usize) -> Self {
        // exactness of the forward transform needs lmax <= n_lat - 1 and
        // 2 lmax + 1 <= n_lon; clamp rather than error
        let lmax = lmax.min(n_lat - 1).min((n_lon - 1) / 2);
        let (x, w) = gauss_legendre(n_lat);
        let xs: Vec<f64> = x.iter().rev().copied().collect();
        let wlat: Vec<f64> = w.iter().rev().copied().collect();
        let mut plm = Vec::with_capacity(lmax + 1);
        for m in 0..=lmax {
            let mut per_lat = Vec::with_capacity(n_lat);
            for &xi in &xs {
                per_lat.push(normalized_legendre(lmax, m, xi));
            }
            plm.push(per_lat);
        }
        let mut cos_tab = Vec::with_capacity(lmax + 1);
        let mut sin_tab = Vec::with_capacity(lmax + 1);
        for m in 0..=lmax {
            let mut cm = Vec::with_capacity(n_lon);
            let mut sm = Vec::with_capacity(n_lon);
            for j in 0..n_lon {
                let p = std::f64::consts::TAU * (j as f64) * (m as f64) / n_lon as f64;
                cm.push(p.cos());
                sm.push(p.sin());
            }
            cos_tab.push(cm);
            sin_tab.push(sm);
        }
        Self {
            lmax,
            n_lat,
            n_lon,
            plm,
            wlat,
            cos_tab,
            sin_tab,
        }
    }

    /// coeffs[l][m + l] = mean over the sphere of field * Y_{lm}.
    pub fn analyze(&self, field: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(field.len(), self.n_lat * self.n_lon);
        // longitude sums first
        let mut fc = vec![vec![0.0f64; self.n_lat]; self.lmax + 1];
        let mut fs = vec![vec![0.0f64; self.n_lat]; self.lmax + 1];
        for i in 0..self.n_lat {
            let row = &field[i * self.n_lon..(i + 1) * self.n_lon];
            for m in 0..=self.lmax {
                let (ct, st) = (&self.cos_tab[m], &self.sin_tab[m]);
                let mut sc = 0.0;
                let mut ss = 0.0;
                for j in 0..self.n_lon {
                    sc += row[j] * ct[j];
                    ss += row[j] * st[j];
                }
                fc[m][i] = sc;
                fs[m][i] = ss;
            }
        }
        // latitude quadrature; mean over sphere = (1/4pi) * sum w_i dphi ...
        // with dphi = 2pi/n_lon the combined factor is w_i / (2 n_lon)
        let mut coeffs: Vec<Vec<f64>> = (0..=self.lmax).map(|l| vec![0.0; 2 * l + 1]).collect();
        for m in 0..=self.lmax {
            for l in m..=self.lmax {
                let mut sc = 0.0;
                let mut ss = 0.0;
                for i in 0..self.n_lat {
                    let p = self.plm[m][i][l - m];
                    sc += self.wlat[i] * p * fc[m][i];
                    ss += self.wlat[i] * p * fs[m][i];
                }
                let factor = 1.0 / (2.0 * self.n_lon as f64);
                coeffs[l][l + m] = sc * factor;
                if m > 0 {
                    coeffs[l][l - m] = ss * factor;
                }
            }
        }
        coeffs
    }

    /// Evaluate sum coeffs[l][m+l] Y_{lm} back onto the grid.
    pub fn synthesize(&self, coeffs: &[Vec<f64>]) -> Vec<f64> {
        let mut field = vec![0.0; self.n_lat * self.n_lon];
        for i in 0..self.n_lat {
            for m in 0..=self.lmax {
                let mut amp_c = 0.0;
                let mut amp_s = 0.0;
                for l in m..=self.lmax {
                    let p = self.plm[m][i][l - m];
                    amp_c += coeffs[l][l + m] * p;
                    if m > 0 {
                        amp_s += coeffs[l][l - m] * p;
                    }
                }
                let (ct, st) = (&self.cos_tab[m], &self.sin_tab[m]);
                for j in 0..self.n_lon {
                    field[i * self.n_lon + j] += amp_c * ct[j] + amp_s * st[j];
                }
            }
        }
        field
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // integral of x^k over [-1,1]
        for k in 0..=15usize {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert_relative_eq!(s, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn y20_matches_closed_form() {
        // mean-square-1 normalization: Y_20 = sqrt(5) (3 cos^2 - 1) / 2
        for &colat in &[0.3f64, 1.1, 2.0] {
            let want = 5.0f64.sqrt() * (3.0 * colat.cos().powi(2) - 1.0) / 2.0;
            assert_relative_eq!(real_sh(2, 0, colat, 0.7), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn harmonics_are_orthonormal_in_mean() {
        let n_lat = 12;
        let n_lon = 24;
        let t = SphericalTransform::new(8, n_lat, n_lon);
        let g = crate::grid::GridGeometry::new(crate::grid::GridSpec::sphere(n_lat, n_lon)).unwrap();
        let cases = [(0usize, 0i64), (1, 0), (1, 1), (2, -1), (3, 2), (4, -4)];
        for &(l1, m1) in &cases {
            for &(l2, m2) in &cases {
                let mut s = 0.0;
                for (k, c) in g.coords.iter().enumerate() {
                    s += g.weights[k]
                        * c[0].sin()
                        * real_sh(l1, m1, c[0], c[1])
                        * real_sh(l2, m2, c[0], c[1]);
                }
                s /= 4.0 * PI;
                let want = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert_relative_eq!(s, want, epsilon = 1e-12);
            }
        }
        let _ = t;
    }

    #[test]
    fn analyze_synthesize_roundtrip_band_limited() {
        let n_lat = 16;
        let n_lon = 32;
        let t = SphericalTransform::new(10, n_lat, n_lon);
        let g = crate::grid::GridGeometry::new(crate::grid::GridSpec::sphere(n_lat, n_lon)).unwrap();
        let field: Vec<f64> = g
            .coords
            .iter()
            .map(|c| {
                0.4 + 0.2 * real_sh(2, 0, c[0], c[1]) - 0.1 * real_sh(5, 3, c[0], c[1])
                    + 0.05 * real_sh(10, -7, c[0], c[1])
            })
            .collect();
        let coeffs = t.analyze(&field);
        assert_relative_eq!(coeffs[0][0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(coeffs[2][2], 0.2, epsilon = 1e-12);
        assert_relative_eq!(coeffs[5][8], -0.1, epsilon = 1e-12);
        assert_relative_eq!(coeffs[10][3], 0.05, epsilon = 1e-12);
        let back = t.synthesize(&coeffs);
        for (a, b) in field.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-11);
        }
        // Parseval: mean square of field equals sum of squared coefficients
        let mut ms = 0.0;
        for (k, v) in field.iter().enumerate() {
            ms += g.weights[k] * g.coords[k][0].sin() * v * v;
        }
        ms /= 4.0 * PI;
        let sum2: f64 = coeffs.iter().flatten().map(|c| c * c).sum();
        assert_relative_eq!(ms, sum2, epsilon = 1e-12);
    }
}
