//! Local geometry of discrete immersions: induced metric, Christoffel
//! symbols, second fundamental form, mean curvature, area element, and the
//! conversions between vertex and Gauss/support parameterizations.

use crate::error::{Error, Result};
use crate::grid::{Differentiator, GridSpec};
use crate::immersion::{pairwise_sum, GaussImmersion, VertexImmersion};
use crate::space::LorentzMap;

/// Per-sample geometry of an immersion. Metric indices run over the
/// intrinsic dimension n <= 2; ambient-vector-valued fields are flattened
/// with the ambient dimension fastest.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    pub n: usize,
    pub dim: usize,
    pub n_samples: usize,
    pub g: Vec<[[f64; 2]; 2]>,
    pub ginv: Vec<[[f64; 2]; 2]>,
    /// christoffel[s][k][i][j] = Gamma^k_{ij}
    pub christoffel: Vec<[[[f64; 2]; 2]; 2]>,
    /// h[((s * n + i) * n + j) * dim + c]
    pub h: Vec<f64>,
    /// mean_curvature[s * dim + c]
    pub mean_curvature: Vec<f64>,
    /// |H|^2 per sample under the ambient form
    pub h2: Vec<f64>,
    pub dmu: Vec<f64>,
    pub area: f64,
    pub h2_min: f64,
    pub h2_max: f64,
    /// tangents[i][s * dim + c] = dF/dx^i
    pub tangents: Vec<Vec<f64>>,
}

impl GeometryCache {
    #[inline]
    pub fn h_ij(&self, s: usize, i: usize, j: usize) -> &[f64] {
        let base = ((s * self.n + i) * self.n + j) * self.dim;
        &self.h[base..base + self.dim]
    }

    #[inline]
    pub fn mean_curvature_at(&self, s: usize) -> &[f64] {
        &self.mean_curvature[s * self.dim..(s + 1) * self.dim]
    }

    #[inline]
    pub fn tangent(&self, s: usize, i: usize) -> &[f64] {
        &self.tangents[i][s * self.dim..(s + 1) * self.dim]
    }

    /// Coefficients (in coordinate basis) of a g-orthonormal tangent frame.
    pub fn orthonormal_tangent_coeffs(&self, s: usize) -> [[f64; 2]; 2] {
        let g = &self.g[s];
        if self.n == 1 {
            [[1.0 / g[0][0].sqrt(), 0.0], [0.0, 0.0]]
        } else {
            let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
            let u2n = (det / g[0][0]).sqrt();
            [
                [1.0 / g[0][0].sqrt(), 0.0],
                [-g[0][1] / (g[0][0] * u2n), 1.0 / u2n],
            ]
        }
    }

    /// h(v, v) for the tangent direction with coordinate coefficients `v`,
    /// written into `out`.
    pub fn h_vv(&self, s: usize, v: &[f64; 2], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                let w = v[i] * v[j];
                if w != 0.0 {
                    let hij = self.h_ij(s, i, j);
                    for c in 0..self.dim {
                        out[c] += w * hij[c];
                    }
                }
            }
        }
    }
}

fn metric_eigmin(g: &[[f64; 2]; 2], n: usize) -> f64 {
    if n == 1 {
        g[0][0]
    } else {
        let tr = g[0][0] + g[1][1];
        let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        0.5 * (tr - disc)
    }
}

/// Full local-geometry pipeline for a vertex immersion. Derivatives are
/// spectral on the circle and 4th-order finite differences on the sphere.
pub fn compute_geometry(im: &VertexImmersion, diff: &Differentiator) -> Result<GeometryCache> {
    let n = im.grid.intrinsic_dim();
    let d = im.dim();
    let ns = im.n_samples();
    let space = &im.space;

    let mut tangents: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dir in 0..n {
        let mut t = vec![0.0; ns * d];
        diff.d1(&im.positions, d, dir, &mut t);
        tangents.push(t);
    }
    // second derivatives, stored for (i, j) with i <= j
    let mut second: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut t = vec![0.0; ns * d];
            diff.d2(&im.positions, d, i, j, &mut t);
            second.push(t);
        }
    }
    let sec = |i: usize, j: usize| -> &Vec<f64> {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        // index of (a,b) in the i<=j enumeration
        let idx = if n == 1 { 0 } else { a * n + b - a * (a + 1) / 2 };
        &second[idx]
    };

    let mut g = vec![[[0.0; 2]; 2]; ns];
    let mut ginv = vec![[[0.0; 2]; 2]; ns];
    let mut christoffel = vec![[[[0.0; 2]; 2]; 2]; ns];
    let mut h = vec![0.0; ns * n * n * d];
    let mut mean_curvature = vec![0.0; ns * d];
    let mut h2 = vec![0.0; ns];
    let mut dmu = vec![0.0; ns];

    let mut worst_eig = f64::INFINITY;
    let mut worst_sample = 0usize;
    for s in 0..ns {
        let mut gs = [[0.0; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                gs[i][j] = space.inner_slice(
                    &tangents[i][s * d..(s + 1) * d],
                    &tangents[j][s * d..(s + 1) * d],
                );
            }
        }
        let eig = metric_eigmin(&gs, n);
        if eig < worst_eig {
            worst_eig = eig;
            worst_sample = s;
        }
        g[s] = gs;
    }
    // scale-aware degeneracy threshold via the companion norm of tangents
    let mut comp_scale = 0.0f64;
    for i in 0..n {
        for s in 0..ns {
            comp_scale = comp_scale.max(
                space.companion_slice(&tangents[i][s * d..(s + 1) * d], &tangents[i][s * d..(s + 1) * d]),
            );
        }
    }
    if worst_eig <= 1e-12 * (1.0 + comp_scale) {
        return Err(Error::DegenerateMetric {
            sample: worst_sample,
            min_eig: worst_eig,
        });
    }

    for s in 0..ns {
        let gs = &g[s];
        let gi = if n == 1 {
            [[1.0 / gs[0][0], 0.0], [0.0, 0.0]]
        } else {
            let det = gs[0][0] * gs[1][1] - gs[0][1] * gs[0][1];
            [
                [gs[1][1] / det, -gs[0][1] / det],
                [-gs[0][1] / det, gs[0][0] / det],
            ]
        };
        ginv[s] = gi;

        // Gamma^k_{ij} = g^{kp} <d2F_ij, dF_p>; h_ij = d2F_ij - Gamma^k_ij dF_k
        for i in 0..n {
            for j in 0..n {
                let d2ij = &sec(i, j)[s * d..(s + 1) * d];
                let mut gam = [0.0; 2];
                for k in 0..n {
                    let mut v = 0.0;
                    for p in 0..n {
                        v += gi[k][p]
                            * space.inner_slice(d2ij, &tangents[p][s * d..(s + 1) * d]);
                    }
                    gam[k] = v;
                    christoffel[s][k][i][j] = v;
                }
                let base = ((s * n + i) * n + j) * d;
                for c in 0..d {
                    let mut v = d2ij[c];
                    for k in 0..n {
                        v -= gam[k] * tangents[k][s * d + c];
                    }
                    h[base + c] = v;
                }
            }
        }
        for c in 0..d {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += gi[i][j] * h[((s * n + i) * n + j) * d + c];
                }
            }
            mean_curvature[s * d + c] = v;
        }
        let hs = &mean_curvature[s * d..(s + 1) * d];
        h2[s] = space.inner_slice(hs, hs);
        let det = if n == 1 {
            gs[0][0]
        } else {
            gs[0][0] * gs[1][1] - gs[0][1] * gs[0][1]
        };
        dmu[s] = det.sqrt() * diff.grid.weights[s];
    }
    let area = pairwise_sum(&dmu);
    let h2_min = h2.iter().copied().fold(f64::INFINITY, f64::min);
    let h2_max = h2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GeometryCache {
        n,
        dim: d,
        n_samples: ns,
        g,
        ginv,
        christoffel,
        h,
        mean_curvature,
        h2,
        dmu,
        area,
        h2_min,
        h2_max,
        tangents,
    })
}

/// Evaluate the Gauss-map reconstruction positions in the reference frame,
/// without validation. F(z) = sigma z + grad sigma + eta^alpha nu_alpha.
fn reconstruct_positions(gim: &GaussImmersion, diff: &Differentiator) -> Vec<f64> {
    let n = gim.grid.intrinsic_dim();
    let d = gim.space.dim();
    let ns = gim.grid.len();
    let n_space = gim.space.n_space();
    let mut dsigma: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dir in 0..n {
        let mut t = vec![0.0; ns];
        diff.d1(&gim.sigma, 1, dir, &mut t);
        dsigma.push(t);
    }
    let grid = &diff.grid;
    let mut pos = vec![0.0; ns * d];
    for s in 0..ns {
        let z = grid.unit_sphere_point(s);
        let rg = grid.round_metric(s);
        // dz per direction in R^{n+1}
        let dz = unit_sphere_tangents(&grid.spec, grid.coords[s]);
        for c in 0..n_space {
            let mut v = gim.sigma[s] * z[c];
            for (i, dzi) in dz.iter().take(n).enumerate() {
                // round metric is diagonal in these coordinates
                v += dsigma[i][s] / rg[i] * dzi[c];
            }
            pos[s * d + c] = v;
        }
        for (alpha, eta) in gim.eta.iter().enumerate() {
            pos[s * d + n_space + alpha] = eta[s];
        }
    }
    pos
}

fn unit_sphere_tangents(spec: &GridSpec, coords: [f64; 2]) -> [[f64; 3]; 2] {
    match spec {
        GridSpec::Circle { .. } => {
            let t = coords[0];
            [[-t.sin(), t.cos(), 0.0], [0.0, 0.0, 0.0]]
        }
        GridSpec::Sphere { .. } => {
            let (ct, lon) = (coords[0], coords[1]);
            [
                [ct.cos() * lon.cos(), ct.cos() * lon.sin(), -ct.sin()],
                [-ct.sin() * lon.sin(), ct.sin() * lon.cos(), 0.0],
            ]
        }
    }
}

/// Vertex samples of the Gauss-map parameterization
/// G^{-1}(z) = sigma(z) z + grad~ sigma + eta^alpha nu_alpha, mapped through
/// the reference plane. Fails if the result is not a spacelike immersion.
pub fn reconstruct(gim: &GaussImmersion, diff: &Differentiator) -> Result<VertexImmersion> {
    let pos_ref = reconstruct_positions(gim, diff);
    let im_ref = VertexImmersion::new(gim.grid, gim.space, pos_ref)?;
    let im = im_ref.apply_lorentz(&gim.plane, 1.0, &crate::space::AmbientVector::zeros(gim.space.dim()));
    match compute_geometry(&im, diff) {
        Ok(_) => Ok(im),
        Err(e) => Err(Error::BadReconstruction(Box::new(e))),
    }
}

/// Geometry straight from the support parameterization: the metric from the
/// unexpanded identity g = A g~^{-1} A - d eta d eta with
/// A_ij = hess~ sigma + g~ sigma, and h by normal projection of the second
/// derivatives of the reconstruction.
pub fn gauss_geometry(gim: &GaussImmersion, diff: &Differentiator) -> Result<GeometryCache> {
    let n = gim.grid.intrinsic_dim();
    let d = gim.space.dim();
    let ns = gim.grid.len();
    let space = &gim.space;
    let grid = &diff.grid;

    // sigma derivatives
    let mut ds: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dir in 0..n {
        let mut t = vec![0.0; ns];
        diff.d1(&gim.sigma, 1, dir, &mut t);
        ds.push(t);
    }
    let mut dds = vec![vec![0.0; ns]; 3]; // (0,0), (0,1), (1,1)
    diff.d2(&gim.sigma, 1, 0, 0, &mut dds[0]);
    if n == 2 {
        diff.d2(&gim.sigma, 1, 0, 1, &mut dds[1]);
        diff.d2(&gim.sigma, 1, 1, 1, &mut dds[2]);
    }
    let mut deta: Vec<Vec<Vec<f64>>> = Vec::new();
    for eta in &gim.eta {
        let mut per_dir = Vec::with_capacity(n);
        for dir in 0..n {
            let mut t = vec![0.0; ns];
            diff.d1(eta, 1, dir, &mut t);
            per_dir.push(t);
        }
        deta.push(per_dir);
    }

    // reconstruction positions in the reference frame and their derivatives
    let pos = reconstruct_positions(gim, diff);
    let mut tangents_ref: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dir in 0..n {
        let mut t = vec![0.0; ns * d];
        diff.d1(&pos, d, dir, &mut t);
        tangents_ref.push(t);
    }
    let mut second: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut t = vec![0.0; ns * d];
            diff.d2(&pos, d, i, j, &mut t);
            second.push(t);
        }
    }
    let sec = |i: usize, j: usize| -> &Vec<f64> {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let idx = if n == 1 { 0 } else { a * n + b - a * (a + 1) / 2 };
        &second[idx]
    };

    let mut g = vec![[[0.0; 2]; 2]; ns];
    let mut ginv = vec![[[0.0; 2]; 2]; ns];
    let mut christoffel = vec![[[[0.0; 2]; 2]; 2]; ns];
    let mut h = vec![0.0; ns * n * n * d];
    let mut mean_curvature = vec![0.0; ns * d];
    let mut h2 = vec![0.0; ns];
    let mut dmu = vec![0.0; ns];

    let mut worst_eig = f64::INFINITY;
    let mut worst_sample = 0usize;

    for s in 0..ns {
        let rg = grid.round_metric(s);
        // covariant Hessian of sigma on the round sphere
        let mut a_mat = [[0.0; 2]; 2];
        if n == 1 {
            a_mat[0][0] = dds[0][s] + gim.sigma[s];
        } else {
            let colat = grid.coords[s][0];
            let cot = colat.cos() / colat.sin();
            let hess00 = dds[0][s];
            let hess01 = dds[1][s] - cot * ds[1][s];
            let hess11 = dds[2][s] + colat.sin() * colat.cos() * ds[0][s];
            a_mat[0][0] = hess00 + gim.sigma[s];
            a_mat[0][1] = hess01;
            a_mat[1][0] = hess01;
            a_mat[1][1] = hess11 + rg[1] * gim.sigma[s];
        }
        // g_kl = A_ki g~^{ij} A_jl - d_k eta d_l eta  (round metric diagonal)
        let mut gs = [[0.0; 2]; 2];
        for k in 0..n {
            for l in 0..n {
                let mut v = 0.0;
                for i in 0..n {
                    v += a_mat[k][i] * a_mat[i][l] / rg[i];
                }
                for de in &deta {
                    v -= de[k][s] * de[l][s];
                }
                gs[k][l] = v;
            }
        }
        let eig = metric_eigmin(&gs, n);
        if eig < worst_eig {
            worst_eig = eig;
            worst_sample = s;
        }
        g[s] = gs;
    }
    if worst_eig <= 1e-12 {
        return Err(Error::DegenerateMetric {
            sample: worst_sample,
            min_eig: worst_eig,
        });
    }

    for s in 0..ns {
        let gs = &g[s];
        let gi = if n == 1 {
            [[1.0 / gs[0][0], 0.0], [0.0, 0.0]]
        } else {
            let det = gs[0][0] * gs[1][1] - gs[0][1] * gs[0][1];
            [
                [gs[1][1] / det, -gs[0][1] / det],
                [-gs[0][1] / det, gs[0][0] / det],
            ]
        };
        ginv[s] = gi;

        // projection uses the Gram matrix of the actual tangents so that the
        // Gauss-relation residual stays at round-off
        let mut gram = [[0.0; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                gram[i][j] = space.inner_slice(
                    &tangents_ref[i][s * d..(s + 1) * d],
                    &tangents_ref[j][s * d..(s + 1) * d],
                );
            }
        }
        let gram_inv = if n == 1 {
            [[1.0 / gram[0][0], 0.0], [0.0, 0.0]]
        } else {
            let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[0][1];
            [
                [gram[1][1] / det, -gram[0][1] / det],
                [-gram[0][1] / det, gram[0][0] / det],
            ]
        };
        for i in 0..n {
            for j in 0..n {
                let d2ij = &sec(i, j)[s * d..(s + 1) * d];
                let mut gam = [0.0; 2];
                for k in 0..n {
                    let mut v = 0.0;
                    for p in 0..n {
                        v += gram_inv[k][p]
                            * space.inner_slice(d2ij, &tangents_ref[p][s * d..(s + 1) * d]);
                    }
                    gam[k] = v;
                    christoffel[s][k][i][j] = v;
                }
                let base = ((s * n + i) * n + j) * d;
                for c in 0..d {
                    let mut v = d2ij[c];
                    for k in 0..n {
                        v -= gam[k] * tangents_ref[k][s * d + c];
                    }
                    h[base + c] = v;
                }
            }
        }
        for c in 0..d {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += gi[i][j] * h[((s * n + i) * n + j) * d + c];
                }
            }
            mean_curvature[s * d + c] = v;
        }
        let hs = &mean_curvature[s * d..(s + 1) * d];
        h2[s] = space.inner_slice(hs, hs);
        let det = if n == 1 {
            gs[0][0]
        } else {
            gs[0][0] * gs[1][1] - gs[0][1] * gs[0][1]
        };
        dmu[s] = det.sqrt() * diff.grid.weights[s];
    }

    // the cache is expressed in the reference frame; rotate the vector data
    // into the ambient frame of the plane
    rotate_cache_vectors(&gim.plane, n, d, ns, &mut h, &mut mean_curvature, &mut tangents_ref);

    let area = pairwise_sum(&dmu);
    let h2_min = h2.iter().copied().fold(f64::INFINITY, f64::min);
    let h2_max = h2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GeometryCache {
        n,
        dim: d,
        n_samples: ns,
        g,
        ginv,
        christoffel,
        h,
        mean_curvature,
        h2,
        dmu,
        area,
        h2_min,
        h2_max,
        tangents: tangents_ref,
    })
}

fn rotate_cache_vectors(
    plane: &LorentzMap,
    n: usize,
    d: usize,
    ns: usize,
    h: &mut [f64],
    mean_curvature: &mut [f64],
    tangents: &mut [Vec<f64>],
) {
    if plane.is_identity(0.0) {
        return;
    }
    let mut buf = vec![0.0; d];
    for s in 0..ns {
        for i in 0..n {
            for j in 0..n {
                let base = ((s * n + i) * n + j) * d;
                plane.apply_slice(&h[base..base + d].to_vec(), &mut buf);
                h[base..base + d].copy_from_slice(&buf);
            }
        }
        plane.apply_slice(&mean_curvature[s * d..(s + 1) * d].to_vec(), &mut buf);
        mean_curvature[s * d..(s + 1) * d].copy_from_slice(&buf);
        for t in tangents.iter_mut() {
            plane.apply_slice(&t[s * d..(s + 1) * d].to_vec(), &mut buf);
            t[s * d..(s + 1) * d].copy_from_slice(&buf);
        }
    }
}

/// Winding number of the projected tangent direction (n = 1 only).
pub fn turning_number(im: &VertexImmersion, diff: &Differentiator) -> Result<i64> {
    if im.grid.intrinsic_dim() != 1 {
        return Err(Error::Config("turning number is defined for curves".into()));
    }
    let d = im.dim();
    let ns = im.n_samples();
    let mut t = vec![0.0; ns * d];
    diff.d1(&im.positions, d, 0, &mut t);
    let mut total = 0.0;
    let mut prev = f64::atan2(t[1], t[0]);
    for s in 1..=ns {
        let idx = (s % ns) * d;
        let ang = f64::atan2(t[idx + 1], t[idx]);
        let mut delta = ang - prev;
        while delta > std::f64::consts::PI {
            delta -= std::f64::consts::TAU;
        }
        while delta < -std::f64::consts::PI {
            delta += std::f64::consts::TAU;
        }
        total += delta;
        prev = ang;
    }
    Ok((total / std::f64::consts::TAU).round() as i64)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a smooth unimodal function on [a, b].
fn golden_max(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}

/// Convert a spacelike-convex vertex immersion to Gauss/support form for the
/// plane decomposition given by `plane`: sigma(z) = sup_p <z, F(p)> with the
/// sup located by golden-section refinement around the discrete argmax.
pub fn to_gauss(
    im: &VertexImmersion,
    plane: &LorentzMap,
    diff: &Differentiator,
) -> Result<GaussImmersion> {
    let space = &im.space;
    let d = space.dim();
    let n_space = space.n_space();
    let inv = plane.inverse(space);
    let im_ref = im.apply_lorentz(&inv, 1.0, &crate::space::AmbientVector::zeros(d));
    let ns = im.n_samples();
    let grid = &diff.grid;

    match im.grid {
        GridSpec::Circle { samples } => {
            if turning_number(&im_ref, diff)? != 1 {
                return Err(Error::GaussMapNotInjective);
            }
            let dtheta = std::f64::consts::TAU / samples as f64;
            let mut dpos = vec![0.0; ns * d];
            diff.d1(&im_ref.positions, d, 0, &mut dpos);
            let mut d2pos = vec![0.0; ns * d];
            diff.d2(&im_ref.positions, d, 0, 0, &mut d2pos);
            let mut sigma = vec![0.0; ns];
            let mut eta = vec![vec![0.0; ns]; space.n_time()];
            let mut arg = vec![0.0; ns];
            let mut val = vec![0.0; d];
            for j in 0..ns {
                let z = grid.unit_sphere_point(j);
                // support height over the curve samples
                let mut best = f64::NEG_INFINITY;
                let mut best_s = 0;
                for s in 0..ns {
                    let p = im_ref.position(s);
                    let v = z[0] * p[0] + z[1] * p[1];
                    if v > best {
                        best = v;
                        best_s = s;
                    }
                }
                let center = grid.coords[best_s][0];
                let (mut theta_star, _) = golden_max(
                    center - dtheta,
                    center + dtheta,
                    |t| {
                        diff.interp_circle(&im_ref.positions, d, t, &mut val);
                        z[0] * val[0] + z[1] * val[1]
                    },
                    1e-6,
                );
                // golden section stalls near a flat maximum; polish the
                // critical point <z, F'(theta)> = 0 by Newton instead
                for _ in 0..4 {
                    diff.interp_circle(&dpos, d, theta_star, &mut val);
                    let g1 = z[0] * val[0] + z[1] * val[1];
                    diff.interp_circle(&d2pos, d, theta_star, &mut val);
                    let g2 = z[0] * val[0] + z[1] * val[1];
                    if g2.abs() < 1e-14 {
                        break;
                    }
                    let step = (g1 / g2).clamp(-dtheta, dtheta);
                    theta_star -= step;
                    if step.abs() < 1e-14 {
                        break;
                    }
                }
                diff.interp_circle(&im_ref.positions, d, theta_star, &mut val);
                sigma[j] = z[0] * val[0] + z[1] * val[1];
                for (alpha, e) in eta.iter_mut().enumerate() {
                    e[j] = val[n_space + alpha];
                }
                arg[j] = theta_star;
            }
            // the discrete Gauss map must be cyclically monotone
            let mut wind = 0.0;
            for j in 0..ns {
                let mut delta = arg[(j + 1) % ns] - arg[j];
                while delta > std::f64::consts::PI {
                    delta -= std::f64::consts::TAU;
                }
                while delta < -std::f64::consts::PI {
                    delta += std::f64::consts::TAU;
                }
                if delta <= -dtheta * 1e-6 {
                    return Err(Error::GaussMapNotInjective);
                }
                wind += delta;
            }
            if (wind - std::f64::consts::TAU).abs() > 1e-6 {
                return Err(Error::GaussMapNotInjective);
            }
            GaussImmersion::new(im.grid, *space, plane.clone(), sigma, eta)
        }
        GridSpec::Sphere { n_lat, n_lon, .. } => {
            let mut sigma = vec![0.0; ns];
            let mut eta = vec![vec![0.0; ns]; space.n_time()];
            // support heights at all samples for each node's argmax search
            let fval = |z: &[f64], s: usize| -> f64 {
                let p = im_ref.position(s);
                z[0] * p[0] + z[1] * p[1] + z[2] * p[2]
            };
            // neighbor access with polar ghost mapping
            let at = |i: i64, j: i64| -> usize {
                let (ii, jj) = wrap_sphere_index(i, j, n_lat, n_lon);
                ii * n_lon + jj
            };
            for node in 0..ns {
                let z = grid.unit_sphere_point(node);
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0usize;
                let mut bj = 0usize;
                for i in 0..n_lat {
                    for j in 0..n_lon {
                        let v = fval(&z, i * n_lon + j);
                        if v > best {
                            best = v;
                            bi = i;
                            bj = j;
                        }
                    }
                }
                // quadratic refinement on the 3x3 neighborhood in index space
                let mut fv = [[0.0; 3]; 3];
                for (a, di) in (-1i64..=1).enumerate() {
                    for (b, dj) in (-1i64..=1).enumerate() {
                        fv[a][b] = fval(&z, at(bi as i64 + di, bj as i64 + dj));
                    }
                }
                let fx = 0.5 * (fv[2][1] - fv[0][1]);
                let fy = 0.5 * (fv[1][2] - fv[1][0]);
                let fxx = fv[2][1] - 2.0 * fv[1][1] + fv[0][1];
                let fyy = fv[1][2] - 2.0 * fv[1][1] + fv[1][0];
                let fxy = 0.25 * (fv[2][2] - fv[2][0] - fv[0][2] + fv[0][0]);
                let det = fxx * fyy - fxy * fxy;
                let (mut px, mut py) = (0.0, 0.0);
                if det > 0.0 && fxx < 0.0 {
                    px = (-fx * fyy + fy * fxy) / det;
                    py = (-fy * fxx + fx * fxy) / det;
                    px = px.clamp(-1.0, 1.0);
                    py = py.clamp(-1.0, 1.0);
                }
                // value and position by the same quadratic model, applied to
                // every ambient component
                let mut pvec = vec![0.0; d];
                for (c, pc) in pvec.iter_mut().enumerate() {
                    let mut q = [[0.0; 3]; 3];
                    for (a, di) in (-1i64..=1).enumerate() {
                        for (b, dj) in (-1i64..=1).enumerate() {
                            q[a][b] =
                                im_ref.position(at(bi as i64 + di, bj as i64 + dj))[c];
                        }
                    }
                    *pc = quad2_eval(&q, px, py);
                }
                let sv = z[0] * pvec[0] + z[1] * pvec[1] + z[2] * pvec[2];
                sigma[node] = sv.max(best);
                for (alpha, e) in eta.iter_mut().enumerate() {
                    e[node] = pvec[n_space + alpha];
                }
            }
            GaussImmersion::new(im.grid, *space, plane.clone(), sigma, eta)
        }
    }
}

/// (row, col) access on the sphere grid with reflection across the poles.
pub fn wrap_sphere_index(i: i64, j: i64, n_lat: usize, n_lon: usize) -> (usize, usize) {
    let mut ii = i;
    let mut jj = j.rem_euclid(n_lon as i64) as usize;
    if ii < 0 {
        ii = -ii - 1;
        jj = (jj + n_lon / 2) % n_lon;
    } else if ii >= n_lat as i64 {
        ii = 2 * n_lat as i64 - ii - 1;
        jj = (jj + n_lon / 2) % n_lon;
    }
    (ii as usize, jj)
}

fn quad2_eval(q: &[[f64; 3]; 3], x: f64, y: f64) -> f64 {
    let fx = 0.5 * (q[2][1] - q[0][1]);
    let fy = 0.5 * (q[1][2] - q[1][0]);
    let fxx = q[2][1] - 2.0 * q[1][1] + q[0][1];
    let fyy = q[1][2] - 2.0 * q[1][1] + q[1][0];
    let fxy = 0.25 * (q[2][2] - q[2][0] - q[0][2] + q[0][0]);
    q[1][1] + fx * x + fy * y + 0.5 * (fxx * x * x + fyy * y * y) + fxy * x * y
}
