//! Linear algebra for the pseudo-Euclidean ambient space R^{n+1,k}.
//!
//! The distinguished frame is the standard coordinate basis: the first
//! `n_space` directions square to +1, the remaining `n_time` to -1.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ambient space of signature (n_space, n_time) with its bilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureSpace {
    n_space: usize,
    n_time: usize,
}

impl SignatureSpace {
    pub fn new(n_space: usize, n_time: usize) -> Result<Self> {
        if n_space < 2 {
            return Err(Error::Config(format!(
                "signature needs at least 2 spacelike dimensions, got {n_space}"
            )));
        }
        Ok(Self { n_space, n_time })
    }

    #[inline]
    pub fn n_space(&self) -> usize {
        self.n_space
    }

    #[inline]
    pub fn n_time(&self) -> usize {
        self.n_time
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n_space + self.n_time
    }

    /// Sign of the bilinear form on the `idx`-th frame direction.
    #[inline]
    pub fn sign(&self, idx: usize) -> f64 {
        if idx < self.n_space {
            1.0
        } else {
            -1.0
        }
    }

    /// Frame vector e_i (spacelike for idx < n_space, otherwise nu_{idx-n_space}).
    pub fn basis(&self, idx: usize) -> AmbientVector {
        let mut coords = vec![0.0; self.dim()];
        coords[idx] = 1.0;
        AmbientVector::new(coords)
    }

    /// The bilinear form on raw coordinate slices.
    #[inline]
    pub fn inner_slice(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim());
        debug_assert_eq!(b.len(), self.dim());
        let mut s = 0.0;
        for i in 0..self.n_space {
            s += a[i] * b[i];
        }
        for i in self.n_space..a.len() {
            s -= a[i] * b[i];
        }
        s
    }

    /// Positive-definite companion form in the standard frame (Wick rotation
    /// of the timelike block): plain Euclidean dot product of coordinates.
    #[inline]
    pub fn companion_slice(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Diagonal of the metric as a matrix, G = diag(+1,...,-1,...).
    pub fn metric_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.sign(i)),
        ))
    }

    /// Number of boost generators Lambda_{i alpha}.
    #[inline]
    pub fn boost_slots(&self) -> usize {
        self.n_space * self.n_time
    }
}

/// A point or direction of the ambient space, in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector {
    coords: DVector<f64>,
}

impl AmbientVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self {
            coords: DVector::from_vec(coords),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: DVector::zeros(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    #[inline]
    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            coords: &self.coords * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coords: &self.coords + &other.coords,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coords: &self.coords - &other.coords,
        }
    }
}

impl From<DVector<f64>> for AmbientVector {
    fn from(coords: DVector<f64>) -> Self {
        Self { coords }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalCharacter {
    Spacelike,
    Null,
    Timelike,
}

/// The bilinear form <u, v>.
pub fn inner(space: &SignatureSpace, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    if u.dim() != space.dim() || v.dim() != space.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    Ok(space.inner_slice(u.as_slice(), v.as_slice()))
}

/// Scale-aware tolerance for deciding |u|^2 = 0.
pub fn null_tolerance(space: &SignatureSpace, u: &[f64]) -> f64 {
    1e-10 * (1.0 + space.companion_slice(u, u))
}

pub fn causal_character(space: &SignatureSpace, u: &AmbientVector) -> Result<CausalCharacter> {
    if u.dim() != space.dim() {
        return Err(Error::DimensionMismatch(u.dim(), space.dim()));
    }
    if u.as_slice().iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(causal_character_slice(space, u.as_slice()))
}

#[inline]
pub fn causal_character_slice(space: &SignatureSpace, u: &[f64]) -> CausalCharacter {
    let norm2 = space.inner_slice(u, u);
    let tol = null_tolerance(space, u);
    if norm2 > tol {
        CausalCharacter::Spacelike
    } else if norm2 < -tol {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Null
    }
}

/// Companion inner product <<u,v>> = <u,v> + 2 sum_a <u,nu_a><v,nu_a> for an
/// orthonormal timelike frame {nu_a}. Positive definite.
pub fn companion_inner(
    space: &SignatureSpace,
    u: &AmbientVector,
    v: &AmbientVector,
    timelike_frame: &[AmbientVector],
) -> Result<f64> {
    if u.dim() != space.dim() || v.dim() != space.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    check_timelike_frame(space, timelike_frame)?;
    let mut s = space.inner_slice(u.as_slice(), v.as_slice());
    for nu in timelike_frame {
        s += 2.0
            * space.inner_slice(u.as_slice(), nu.as_slice())
            * space.inner_slice(v.as_slice(), nu.as_slice());
    }
    Ok(s)
}

fn check_timelike_frame(space: &SignatureSpace, frame: &[AmbientVector]) -> Result<()> {
    let mut worst = 0.0f64;
    for (a, va) in frame.iter().enumerate() {
        if va.dim() != space.dim() {
            return Err(Error::DimensionMismatch(va.dim(), space.dim()));
        }
        for (b, vb) in frame.iter().enumerate() {
            let want = if a == b { -1.0 } else { 0.0 };
            let got = space.inner_slice(va.as_slice(), vb.as_slice());
            worst = worst.max((got - want).abs());
        }
    }
    if worst > 1e-8 {
        return Err(Error::BadTimelikeFrame(worst));
    }
    Ok(())
}

/// Reflection across the hyperplane orthogonal to a unit spacelike u:
/// R(u)v = v - 2<u,v>u. An isometry of the bilinear form.
pub fn reflect(space: &SignatureSpace, u: &AmbientVector, v: &AmbientVector) -> Result<AmbientVector> {
    if u.dim() != space.dim() || v.dim() != space.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    let u2 = space.inner_slice(u.as_slice(), u.as_slice());
    if (u2 - 1.0).abs() > 1e-8 {
        return Err(Error::NotUnitSpacelike(u2));
    }
    let uv = space.inner_slice(u.as_slice(), v.as_slice());
    Ok(v.sub(&u.scaled(2.0 * uv)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Boost,
    SpatialRotation,
    Composite,
}

/// A linear isometry of the bilinear form.
#[derive(Debug, Clone)]
pub struct LorentzMap {
    matrix: DMatrix<f64>,
    kind: MapKind,
}

impl LorentzMap {
    pub fn identity(space: &SignatureSpace) -> Self {
        Self {
            matrix: DMatrix::identity(space.dim(), space.dim()),
            kind: MapKind::Composite,
        }
    }

    pub fn from_matrix(matrix: DMatrix<f64>, kind: MapKind) -> Self {
        Self { matrix, kind }
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    #[inline]
    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn apply(&self, v: &AmbientVector) -> AmbientVector {
        AmbientVector::from(&self.matrix * v.as_dvector())
    }

    pub fn apply_slice(&self, v: &[f64], out: &mut [f64]) {
        let n = self.matrix.nrows();
        for r in 0..n {
            let mut s = 0.0;
            for c in 0..n {
                s += self.matrix[(r, c)] * v[c];
            }
            out[r] = s;
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
            kind: MapKind::Composite,
        }
    }

    /// Inverse via the metric adjoint M^{-1} = G M^T G, exact for isometries.
    pub fn inverse(&self, space: &SignatureSpace) -> Self {
        let g = space.metric_matrix();
        Self {
            matrix: &g * self.matrix.transpose() * &g,
            kind: self.kind,
        }
    }

    /// Largest violation of <Mu, Mv> = <u, v> over the frame basis pairs.
    pub fn metric_residual(&self, space: &SignatureSpace) -> f64 {
        let g = space.metric_matrix();
        let resid = self.matrix.transpose() * &g * &self.matrix - &g;
        resid.amax()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let want = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((self.matrix[(r, c)] - want).abs());
            }
        }
        worst <= tol
    }
}

/// Boost generator Lambda_{i alpha}: e_i -> nu_alpha, nu_alpha -> e_i.
pub fn boost_generator(space: &SignatureSpace, i: usize, alpha: usize) -> DMatrix<f64> {
    let d = space.dim();
    let mut m = DMatrix::zeros(d, d);
    let a = space.n_space() + alpha;
    m[(a, i)] = 1.0;
    m[(i, a)] = 1.0;
    m
}

/// Assemble sum_{i,alpha} c_{i alpha} Lambda_{i alpha} from coefficients laid
/// out with alpha varying fastest: slot = i * n_time + alpha.
pub fn boost_from_coefficients(space: &SignatureSpace, coeffs: &[f64]) -> Result<DMatrix<f64>> {
    if coeffs.len() != space.boost_slots() {
        return Err(Error::BadGeneratorCoefficients {
            expected: space.boost_slots(),
            got: coeffs.len(),
        });
    }
    let d = space.dim();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..space.n_space() {
        for alpha in 0..space.n_time() {
            let c = coeffs[i * space.n_time() + alpha];
            let a = space.n_space() + alpha;
            m[(a, i)] += c;
            m[(i, a)] += c;
        }
    }
    Ok(m)
}

/// exp(s * Lambda) for Lambda given by boost coefficients.
pub fn boost_exp(space: &SignatureSpace, coeffs: &[f64], s: f64) -> Result<LorentzMap> {
    let gen = boost_from_coefficients(space, coeffs)?;
    Ok(LorentzMap::from_matrix(matrix_exp(&(gen * s)), MapKind::Boost))
}

/// Matrix exponential by scaling-and-squaring with a Taylor kernel. The
/// matrices here are small (ambient dimension), so this is plenty accurate.
pub fn matrix_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.amax() * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-300 {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Result of aligning two spacelike subspaces: orthonormal bases with
/// e_i = lambda_i E_i + N_i and N_i orthogonal to the second subspace.
#[derive(Debug, Clone)]
pub struct SvdAlignment {
    pub e: Vec<AmbientVector>,
    pub big_e: Vec<AmbientVector>,
    pub lambda: Vec<f64>,
    pub normals: Vec<AmbientVector>,
}

/// Orthonormalize a basis of a spacelike subspace under the ambient form.
fn orthonormalize_spacelike(
    space: &SignatureSpace,
    basis: &[AmbientVector],
) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(basis.len());
    for v in basis {
        if v.dim() != space.dim() {
            return Err(Error::DimensionMismatch(v.dim(), space.dim()));
        }
        let mut w = v.as_dvector().clone();
        for u in &out {
            let c = space.inner_slice(w.as_slice(), u.as_slice());
            w -= u * c;
        }
        let n2 = space.inner_slice(w.as_slice(), w.as_slice());
        if n2 <= 1e-12 {
            return Err(Error::DegenerateSubspace(n2));
        }
        out.push(w / n2.sqrt());
    }
    Ok(out)
}

/// Singular-value alignment of two n-dimensional spacelike subspaces: returns
/// orthonormal bases {e_i} of span(U), {E_i} of span(V) with
/// e_i = lambda_i E_i + N_i, N_i orthogonal to span(V).
pub fn spacelike_svd_align(
    space: &SignatureSpace,
    subspace_u: &[AmbientVector],
    subspace_v: &[AmbientVector],
) -> Result<SvdAlignment> {
    if subspace_u.len() != subspace_v.len() || subspace_u.is_empty() {
        return Err(Error::DimensionMismatch(subspace_u.len(), subspace_v.len()));
    }
    let eu = orthonormalize_spacelike(space, subspace_u)?;
    let ev = orthonormalize_spacelike(space, subspace_v)?;
    let n = eu.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = space.inner_slice(eu[i].as_slice(), ev[j].as_slice());
        }
    }
    let svd = c.svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let mut e = Vec::with_capacity(n);
    let mut big_e = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for i in 0..n {
        let mut ei = DVector::zeros(space.dim());
        for p in 0..n {
            ei += &eu[p] * u[(p, i)];
        }
        let mut bi = DVector::zeros(space.dim());
        for q in 0..n {
            bi += &ev[q] * vt[(i, q)];
        }
        let li = svd.singular_values[i];
        let ni = &ei - &bi * li;
        e.push(AmbientVector::from(ei));
        big_e.push(AmbientVector::from(bi));
        normals.push(AmbientVector::from(ni));
        lambda.push(li);
    }
    Ok(SvdAlignment {
        e,
        big_e,
        lambda,
        normals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn r21() -> SignatureSpace {
        SignatureSpace::new(2, 1).unwrap()
    }

    fn v(coords: &[f64]) -> AmbientVector {
        AmbientVector::new(coords.to_vec())
    }

    #[test]
    fn inner_on_frame_and_direct_evaluation() {
        let s = r21();
        assert_eq!(inner(&s, &v(&[1.0, 0.0, 0.0]), &v(&[1.0, 0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(inner(&s, &v(&[0.0, 0.0, 1.0]), &v(&[0.0, 0.0, 1.0])).unwrap(), -1.0);
        assert_eq!(
            inner(&s, &v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap(),
            -4.0
        );
    }

    #[test]
    fn inner_rejects_dimension_mismatch() {
        let s = r21();
        assert!(inner(&s, &v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn causal_characters() {
        let s = r21();
        assert_eq!(
            causal_character(&s, &v(&[1.0, 0.0, 0.0])).unwrap(),
            CausalCharacter::Spacelike
        );
        assert_eq!(
            causal_character(&s, &v(&[0.0, 0.0, 1.0])).unwrap(),
            CausalCharacter::Timelike
        );
        assert_eq!(
            causal_character(&s, &v(&[1.0, 0.0, 1.0])).unwrap(),
            CausalCharacter::Null
        );
        assert!(causal_character(&s, &v(&[0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn companion_inner_on_frame_vectors() {
        let s = r21();
        let frame = vec![v(&[0.0, 0.0, 1.0])];
        let nu = v(&[0.0, 0.0, 1.0]);
        let e1 = v(&[1.0, 0.0, 0.0]);
        assert_relative_eq!(companion_inner(&s, &nu, &nu, &frame).unwrap(), 1.0);
        assert_relative_eq!(companion_inner(&s, &e1, &e1, &frame).unwrap(), 1.0);
    }

    #[test]
    fn companion_inner_rejects_bad_frame() {
        let s = r21();
        let frame = vec![v(&[0.0, 0.0, 2.0])];
        assert!(matches!(
            companion_inner(&s, &v(&[1.0, 0.0, 0.0]), &v(&[1.0, 0.0, 0.0]), &frame),
            Err(Error::BadTimelikeFrame(_))
        ));
    }

    #[test]
    fn reflect_axis_and_orthogonal() {
        let s = r21();
        let u = v(&[1.0, 0.0, 0.0]);
        let ru = reflect(&s, &u, &u).unwrap();
        assert_relative_eq!(ru.as_slice()[0], -1.0);
        let w = v(&[0.0, 3.0, 2.0]);
        let rw = reflect(&s, &u, &w).unwrap();
        assert_eq!(rw.as_slice(), w.as_slice());
        assert!(reflect(&s, &v(&[0.0, 0.0, 1.0]), &w).is_err());
    }

    #[test]
    fn boost_exp_closed_form_and_group_property() {
        let s = r21();
        // Lambda_{1,1} acts on (e_1, nu_1); coefficient layout i * k + alpha.
        let phi = 0.7f64;
        let coeffs = vec![1.0, 0.0];
        let b = boost_exp(&s, &coeffs, phi).unwrap();
        let m = b.matrix();
        assert_relative_eq!(m[(0, 0)], phi.cosh(), epsilon = 1e-12);
        assert_relative_eq!(m[(2, 0)], phi.sinh(), epsilon = 1e-12);
        assert_relative_eq!(m[(0, 2)], phi.sinh(), epsilon = 1e-12);
        assert_relative_eq!(m[(2, 2)], phi.cosh(), epsilon = 1e-12);
        assert_relative_eq!(m[(1, 1)], 1.0, epsilon = 1e-12);

        let zero = boost_exp(&s, &coeffs, 0.0).unwrap();
        assert!(zero.is_identity(1e-14));

        let inv = boost_exp(&s, &coeffs, -phi).unwrap();
        assert!(b.compose(&inv).is_identity(1e-12));
        assert!(b.metric_residual(&s) < 1e-12);
    }

    #[test]
    fn svd_align_identical_planes() {
        let s = SignatureSpace::new(3, 1).unwrap();
        let u = vec![v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0, 0.0])];
        let a = spacelike_svd_align(&s, &u, &u).unwrap();
        for i in 0..2 {
            assert_relative_eq!(a.lambda[i], 1.0, epsilon = 1e-12);
            for c in a.normals[i].as_slice() {
                assert!(c.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_align_boosted_line() {
        let s = r21();
        let phi = 0.9f64;
        let u = vec![v(&[phi.cosh(), 0.0, phi.sinh()])];
        let w = vec![v(&[1.0, 0.0, 0.0])];
        let a = spacelike_svd_align(&s, &u, &w).unwrap();
        assert_relative_eq!(a.lambda[0], phi.cosh(), epsilon = 1e-12);
        // residual e - lambda E - N = 0 by construction; N must be orthogonal to V
        assert!(s
            .inner_slice(a.normals[0].as_slice(), a.big_e[0].as_slice())
            .abs()
            < 1e-12);
    }

    #[test]
    fn svd_align_rejects_degenerate_subspace() {
        let s = r21();
        let u = vec![v(&[1.0, 0.0, 1.0])];
        let w = vec![v(&[1.0, 0.0, 0.0])];
        assert!(spacelike_svd_align(&s, &u, &w).is_err());
    }
}
