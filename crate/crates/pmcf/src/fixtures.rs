//! Built-in initial data: round circle/sphere, the explicit curve
//! (2cos t, 2sin t, sin t) in R^{2,1}, and support-parameterized seeds
//! assembled from Fourier / spherical-harmonic modes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{Differentiator, GridGeometry, GridSpec};
use crate::immersion::{GaussImmersion, VertexImmersion};
use crate::space::{LorentzMap, SignatureSpace};
use crate::spherical::real_sh;

/// Round circle of radius r in the spacelike plane P of R^{2,k}.
pub fn circle(r: f64, samples: usize, k: usize) -> Result<VertexImmersion> {
    let space = SignatureSpace::new(2, k)?;
    let grid = GridSpec::circle(samples);
    let g = GridGeometry::new(grid)?;
    let d = space.dim();
    let mut pos = vec![0.0; samples * d];
    for (s, c) in g.coords.iter().enumerate() {
        pos[s * d] = r * c[0].cos();
        pos[s * d + 1] = r * c[0].sin();
    }
    VertexImmersion::new(grid, space, pos)
}

/// Round 2-sphere of radius r in the spacelike subspace P of R^{3,k}.
pub fn sphere(r: f64, n_lat: usize, n_lon: usize, k: usize) -> Result<VertexImmersion> {
    let space = SignatureSpace::new(3, k)?;
    let grid = GridSpec::sphere(n_lat, n_lon);
    let g = GridGeometry::new(grid)?;
    let d = space.dim();
    let mut pos = vec![0.0; grid.len() * d];
    for (s, _) in g.coords.iter().enumerate() {
        let z = g.unit_sphere_point(s);
        for c in 0..3 {
            pos[s * d + c] = r * z[c];
        }
    }
    VertexImmersion::new(grid, space, pos)
}

/// The explicit spacelike-convex curve (2cos t, 2sin t, sin t) in R^{2,1}.
pub fn paper_gamma(samples: usize) -> Result<VertexImmersion> {
    let space = SignatureSpace::new(2, 1)?;
    let grid = GridSpec::circle(samples);
    let g = GridGeometry::new(grid)?;
    let mut pos = vec![0.0; samples * 3];
    for (s, c) in g.coords.iter().enumerate() {
        let t = c[0];
        pos[s * 3] = 2.0 * t.cos();
        pos[s * 3 + 1] = 2.0 * t.sin();
        pos[s * 3 + 2] = t.sin();
    }
    VertexImmersion::new(grid, space, pos)
}

/// One Fourier / spherical-harmonic term of a support-field seed.
///
/// Circle grids: `degree` with cosine amplitude `amp_cos` and sine amplitude
/// `amp_sin` (`order` ignored). Sphere grids: real harmonic Y_{degree, order}
/// scaled by `amp_cos` (`amp_sin` ignored).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ModeSeed {
    pub degree: usize,
    #[serde(default)]
    pub order: i64,
    pub amp_cos: f64,
    #[serde(default)]
    pub amp_sin: f64,
}

fn field_from_modes(grid: &GridGeometry, base: f64, modes: &[ModeSeed]) -> Vec<f64> {
    let ns = grid.spec.len();
    let mut field = vec![base; ns];
    for m in modes {
        match grid.spec {
            GridSpec::Circle { .. } => {
                for (s, c) in grid.coords.iter().enumerate() {
                    let t = m.degree as f64 * c[0];
                    field[s] += m.amp_cos * t.cos() + m.amp_sin * t.sin();
                }
            }
            GridSpec::Sphere { .. } => {
                for (s, c) in grid.coords.iter().enumerate() {
                    field[s] += m.amp_cos * real_sh(m.degree, m.order, c[0], c[1]);
                }
            }
        }
    }
    field
}

/// Random band-limited modes drawn from a seeded generator; amplitudes are
/// uniform in [-amp, amp] per degree (and order for the sphere).
pub fn random_modes(
    grid: &GridSpec,
    max_degree: usize,
    amp: f64,
    seed: u64,
    stream: u64,
) -> Vec<ModeSeed> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    let mut out = Vec::new();
    match grid {
        GridSpec::Circle { .. } => {
            for degree in 2..=max_degree {
                out.push(ModeSeed {
                    degree,
                    order: 0,
                    amp_cos: rng.gen_range(-amp..amp),
                    amp_sin: rng.gen_range(-amp..amp),
                });
            }
        }
        GridSpec::Sphere { .. } => {
            for degree in 2..=max_degree {
                for order in -(degree as i64)..=(degree as i64) {
                    out.push(ModeSeed {
                        degree,
                        order,
                        amp_cos: rng.gen_range(-amp..amp),
                        amp_sin: 0.0,
                    });
                }
            }
        }
    }
    out
}

/// Build a Gauss/support seed sigma = 1 + modes, eta^alpha = modes and
/// reconstruct it to vertex form on the reference plane.
pub fn gauss_seed(
    grid: GridSpec,
    k: usize,
    sigma_base: f64,
    sigma_modes: &[ModeSeed],
    eta_modes: &[Vec<ModeSeed>],
) -> Result<VertexImmersion> {
    let n_space = grid.intrinsic_dim() + 1;
    let space = SignatureSpace::new(n_space, k)?;
    let diff = Differentiator::new(grid)?;
    let sigma = field_from_modes(&diff.grid, sigma_base, sigma_modes);
    let mut eta = Vec::with_capacity(k);
    for alpha in 0..k {
        let modes = eta_modes.get(alpha).map(|v| v.as_slice()).unwrap_or(&[]);
        eta.push(field_from_modes(&diff.grid, 0.0, modes));
    }
    let gim = GaussImmersion::new(grid, space, LorentzMap::identity(&space), sigma, eta)?;
    crate::geometry::reconstruct(&gim, &diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_modes_are_deterministic_per_seed() {
        let g = GridSpec::circle(32);
        let a = random_modes(&g, 5, 0.01, 7, 0);
        let b = random_modes(&g, 5, 0.01, 7, 0);
        let c = random_modes(&g, 5, 0.01, 8, 0);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.amp_cos, y.amp_cos);
            assert_eq!(x.amp_sin, y.amp_sin);
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.amp_cos != y.amp_cos));
    }

    #[test]
    fn gauss_seed_perturbed_sphere_reconstructs() {
        let im = gauss_seed(
            GridSpec::sphere(12, 24),
            1,
            1.0,
            &[ModeSeed {
                degree: 2,
                order: 0,
                amp_cos: 0.05,
                amp_sin: 0.0,
            }],
            &[],
        )
        .unwrap();
        assert_eq!(im.n_samples(), 12 * 24);
    }
}
