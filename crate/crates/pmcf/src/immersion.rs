//! Discrete immersions F: grid(S^n) -> R^{n+1,k} in vertex samples or
//! Gauss/support parameterization, with CSV fixture IO.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, GridSpec};
use crate::space::{AmbientVector, LorentzMap, SignatureSpace};

/// Deterministic pairwise summation; order-independent enough to keep
/// parallel and serial reductions bit-identical for a fixed layout.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut s = 0.0;
        for x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// A sampled embedding of S^n given by vertex positions.
#[derive(Debug, Clone)]
pub struct VertexImmersion {
    pub grid: GridSpec,
    pub space: SignatureSpace,
    /// positions[sample * dim + component]
    pub positions: Vec<f64>,
}

impl VertexImmersion {
    pub fn new(grid: GridSpec, space: SignatureSpace, positions: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if grid.intrinsic_dim() + 1 != space.n_space() {
            return Err(Error::Config(format!(
                "grid dimension n = {} needs n_space = {}, got {}",
                grid.intrinsic_dim(),
                grid.intrinsic_dim() + 1,
                space.n_space()
            )));
        }
        if positions.len() != grid.len() * space.dim() {
            return Err(Error::DimensionMismatch(
                positions.len(),
                grid.len() * space.dim(),
            ));
        }
        Ok(Self {
            grid,
            space,
            positions,
        })
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    #[inline]
    pub fn position(&self, sample: usize) -> &[f64] {
        let d = self.dim();
        &self.positions[sample * d..(sample + 1) * d]
    }

    /// Pointwise F -> M(scale F) + shift. Geometry transforms covariantly.
    pub fn apply_lorentz(&self, map: &LorentzMap, scale: f64, shift: &AmbientVector) -> Self {
        let d = self.dim();
        let n = self.n_samples();
        let mut out = vec![0.0; self.positions.len()];
        let mut scaled = vec![0.0; d];
        let mut mapped = vec![0.0; d];
        for s in 0..n {
            let p = self.position(s);
            for c in 0..d {
                scaled[c] = scale * p[c];
            }
            map.apply_slice(&scaled, &mut mapped);
            for c in 0..d {
                out[s * d + c] = mapped[c] + shift.as_slice()[c];
            }
        }
        Self {
            grid: self.grid,
            space: self.space,
            positions: out,
        }
    }

    /// Area-weighted average position over the given area weights.
    pub fn center_of_mass(&self, dmu: &[f64]) -> AmbientVector {
        let d = self.dim();
        let n = self.n_samples();
        debug_assert_eq!(dmu.len(), n);
        let area = pairwise_sum(dmu);
        let mut com = vec![0.0; d];
        let mut weighted = vec![0.0; n];
        for (c, comc) in com.iter_mut().enumerate() {
            for s in 0..n {
                weighted[s] = self.positions[s * d + c] * dmu[s];
            }
            *comc = pairwise_sum(&weighted) / area;
        }
        AmbientVector::new(com)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let g = GridGeometry::new(self.grid)?;
        let mut out = String::new();
        writeln!(
            out,
            "# signature {},{}",
            self.space.n_space(),
            self.space.n_time()
        )
        .unwrap();
        let mut header = match self.grid {
            GridSpec::Circle { .. } => "theta".to_string(),
            GridSpec::Sphere { .. } => "colat,lon".to_string(),
        };
        for i in 0..self.space.n_space() {
            write!(header, ",e{}", i + 1).unwrap();
        }
        for a in 0..self.space.n_time() {
            write!(header, ",nu{}", a + 1).unwrap();
        }
        writeln!(out, "{header}").unwrap();
        for s in 0..self.n_samples() {
            match self.grid {
                GridSpec::Circle { .. } => {
                    write!(out, "{:.16e}", g.coords[s][0]).unwrap();
                }
                GridSpec::Sphere { .. } => {
                    write!(out, "{:.16e},{:.16e}", g.coords[s][0], g.coords[s][1]).unwrap();
                }
            }
            for c in self.position(s) {
                write!(out, ",{c:.16e}").unwrap();
            }
            out.push('\n');
        }
        crate::runner::write_atomic(path, out.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bad = |reason: &str| Error::BadFixtureFile {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        let sig_line = lines.next().ok_or_else(|| bad("empty file"))?;
        let sig = sig_line
            .trim()
            .strip_prefix("# signature ")
            .ok_or_else(|| bad("first line must be `# signature n,k`"))?;
        let (ns, nt) = sig
            .split_once(',')
            .ok_or_else(|| bad("signature must be `n,k`"))?;
        let n_space: usize = ns.trim().parse().map_err(|_| bad("bad signature"))?;
        let n_time: usize = nt.trim().parse().map_err(|_| bad("bad signature"))?;
        let space = SignatureSpace::new(n_space, n_time)?;
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let n_coord_cols = if header.starts_with("colat") { 2 } else { 1 };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            rows.push(vals.map_err(|_| bad("non-numeric row"))?);
        }
        if rows.is_empty() {
            return Err(bad("no samples"));
        }
        let dim = space.dim();
        for r in &rows {
            if r.len() != n_coord_cols + dim {
                return Err(bad("row width does not match signature"));
            }
        }
        let grid = if n_coord_cols == 1 {
            GridSpec::circle(rows.len())
        } else {
            let first_colat = rows[0][0];
            let n_lon = rows
                .iter()
                .take_while(|r| (r[0] - first_colat).abs() < 1e-12)
                .count();
            if n_lon == 0 || rows.len() % n_lon != 0 {
                return Err(bad("rows do not form a lat-lon grid"));
            }
            GridSpec::sphere(rows.len() / n_lon, n_lon)
        };
        let mut positions = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            positions.extend_from_slice(&r[n_coord_cols..]);
        }
        Self::new(grid, space, positions)
    }
}

/// Gauss/support parameterization: the reference maximal spacelike plane P
/// (the image of span(e_1..e_{n+1}) under `plane`), the support function
/// sigma over grid(S^n), and the k timelike height functions eta^alpha.
#[derive(Debug, Clone)]
pub struct GaussImmersion {
    pub grid: GridSpec,
    pub space: SignatureSpace,
    pub plane: LorentzMap,
    pub sigma: Vec<f64>,
    /// eta[alpha][sample]
    pub eta: Vec<Vec<f64>>,
}

impl GaussImmersion {
    pub fn new(
        grid: GridSpec,
        space: SignatureSpace,
        plane: LorentzMap,
        sigma: Vec<f64>,
        eta: Vec<Vec<f64>>,
    ) -> Result<Self> {
        grid.validate()?;
        if sigma.len() != grid.len() {
            return Err(Error::DimensionMismatch(sigma.len(), grid.len()));
        }
        if eta.len() != space.n_time() {
            return Err(Error::DimensionMismatch(eta.len(), space.n_time()));
        }
        for e in &eta {
            if e.len() != grid.len() {
                return Err(Error::DimensionMismatch(e.len(), grid.len()));
            }
        }
        if let Some((s, &v)) = sigma
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0) || !v.is_finite())
        {
            return Err(Error::Config(format!(
                "support function must be positive everywhere; sigma[{s}] = {v}"
            )));
        }
        Ok(Self {
            grid,
            space,
            plane,
            sigma,
            eta,
        })
    }
}
