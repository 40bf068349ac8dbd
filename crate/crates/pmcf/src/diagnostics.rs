//! Scalar invariants that the flow preserves or bounds: spacelike-convexity
//! margin, pinching ratios, noncollapsing parameters, acausality margin,
//! diameter/curvature-comparison inequalities, and the tilt bound.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::GeometryCache;
use crate::immersion::VertexImmersion;

/// Per-step scalar diagnostics, in the CSV column order.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub convex_margin: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub acausal_margin: f64,
    pub h2_min: f64,
    pub h2_max: f64,
    pub diameter2: f64,
    pub area: f64,
    pub tilt_max: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "time,convex_margin,alpha,beta,delta_minus,delta_plus,acausal_margin,h2_min,h2_max,diameter2,area,tilt_max";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.time,
            self.convex_margin,
            self.alpha,
            self.beta,
            self.delta_minus,
            self.delta_plus,
            self.acausal_margin,
            self.h2_min,
            self.h2_max,
            self.diameter2,
            self.area,
            self.tilt_max
        )
    }
}

/// Orthonormal frame of the normal space at one sample: the unit spacelike
/// direction H/|H| plus k unit timelike directions.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    pub h_hat: Vec<f64>,
    pub abs_h: f64,
    /// timelike[alpha][component], <m_a, m_b> = -delta_ab
    pub timelike: Vec<Vec<f64>>,
}

/// Orthonormal ambient tangent vectors at one sample.
fn tangent_frame(geo: &GeometryCache, s: usize) -> Vec<Vec<f64>> {
    let coeffs = geo.orthonormal_tangent_coeffs(s);
    let mut out = Vec::with_capacity(geo.n);
    for c in coeffs.iter().take(geo.n) {
        let mut v = vec![0.0; geo.dim];
        for i in 0..geo.n {
            let t = geo.tangent(s, i);
            for (comp, vc) in v.iter_mut().enumerate() {
                *vc += c[i] * t[comp];
            }
        }
        out.push(v);
    }
    out
}

/// Build normal frames at every sample. Requires spacelike mean curvature.
pub fn normal_frames(im: &VertexImmersion, geo: &GeometryCache) -> Result<Vec<NormalFrame>> {
    let space = &im.space;
    let d = space.dim();
    let k = space.n_time();
    let mut frames = Vec::with_capacity(geo.n_samples);
    for s in 0..geo.n_samples {
        if geo.h2[s] <= 0.0 {
            return Err(Error::NotConvex {
                margin: geo.h2[s],
                context: "mean curvature must be spacelike at every sample",
            });
        }
        let abs_h = geo.h2[s].sqrt();
        let h_hat: Vec<f64> = geo
            .mean_curvature_at(s)
            .iter()
            .map(|c| c / abs_h)
            .collect();
        let tangents = tangent_frame(geo, s);
        let mut timelike: Vec<Vec<f64>> = Vec::with_capacity(k);
        // sweep the frame directions starting from the timelike block
        for cand in (0..d).rev() {
            if timelike.len() == k {
                break;
            }
            let mut v = vec![0.0; d];
            v[cand] = 1.0;
            for u in &tangents {
                let c = space.inner_slice(&v, u);
                for (vc, uc) in v.iter_mut().zip(u) {
                    *vc -= c * uc;
                }
            }
            let c = space.inner_slice(&v, &h_hat);
            for (vc, hc) in v.iter_mut().zip(&h_hat) {
                *vc -= c * hc;
            }
            for m in &timelike {
                let c = space.inner_slice(&v, m);
                for (vc, mc) in v.iter_mut().zip(m) {
                    *vc += c * mc;
                }
            }
            let n2 = space.inner_slice(&v, &v);
            if n2 < -1e-10 * (1.0 + space.companion_slice(&v, &v)) {
                let inv = (-n2).sqrt().recip();
                for vc in v.iter_mut() {
                    *vc *= inv;
                }
                timelike.push(v);
            }
        }
        if timelike.len() != k {
            return Err(Error::DegenerateSubspace(0.0));
        }
        frames.push(NormalFrame {
            h_hat,
            abs_h,
            timelike,
        });
    }
    Ok(frames)
}

/// Inward null normals with <N, H> = 1, sampled over N^+_x(H) == S^{k-1}.
/// For k = 1 these are exactly (H/|H| +- m)/|H|.
#[derive(Debug, Clone)]
pub struct NullNormalFan {
    pub dim: usize,
    /// normals[sample] flattened as n_dirs x dim
    pub normals: Vec<Vec<f64>>,
    pub n_dirs: usize,
}

impl NullNormalFan {
    pub fn normal(&self, s: usize, dir: usize) -> &[f64] {
        &self.normals[s][dir * self.dim..(dir + 1) * self.dim]
    }
}

/// Unit vectors on S^{k-1}; k = 1 gives {+1, -1}, k = 2 a uniform circle,
/// higher k a deterministic low-discrepancy spread.
fn unit_sphere_directions(k: usize, count: usize) -> Vec<Vec<f64>> {
    match k {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            (0..count)
                .map(|i| {
                    let mut v: Vec<f64> = (0..k)
                        .map(|j| {
                            let t = ((i + 1) as f64 * golden.powi(j as i32 + 1)).fract() - 0.5;
                            (std::f64::consts::PI * t).sin()
                        })
                        .collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= n.max(1e-12));
                    v
                })
                .collect()
        }
    }
}

/// Sample the inward null normal fan at every point.
pub fn null_normal_fan(
    im: &VertexImmersion,
    frames: &[NormalFrame],
    count_k_ge_2: usize,
) -> NullNormalFan {
    let d = im.dim();
    let k = im.space.n_time();
    let dirs = unit_sphere_directions(k, count_k_ge_2);
    let mut normals = Vec::with_capacity(frames.len());
    for f in frames {
        let mut per = Vec::with_capacity(dirs.len() * d);
        for w in &dirs {
            for c in 0..d {
                let mut v = f.h_hat[c];
                for (alpha, m) in f.timelike.iter().enumerate() {
                    v += w[alpha] * m[c];
                }
                per.push(v / f.abs_h);
            }
        }
        normals.push(per);
    }
    NullNormalFan {
        dim: d,
        normals,
        n_dirs: dirs.len(),
    }
}

/// Parabolic refinement of an extremum of a smooth function near x0,
/// starting with probe spacing h0.
pub fn refine_extremum(
    f: &mut impl FnMut(f64) -> f64,
    x0: f64,
    h0: f64,
    maximize: bool,
    iters: usize,
) -> (f64, f64) {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut x = x0;
    let mut h = h0;
    let mut fx = sign * f(x);
    for _ in 0..iters {
        let fm = sign * f(x - h);
        let fp = sign * f(x + h);
        let denom = fm - 2.0 * fx + fp;
        if denom > 0.0 {
            let step = (0.5 * (fm - fp) / denom).clamp(-1.0, 1.0) * h;
            let xn = x + step;
            let fnew = sign * f(xn);
            if fnew <= fx {
                x = xn;
                fx = fnew;
            }
        } else if fm < fx {
            x -= h;
            fx = fm;
        } else if fp < fx {
            x += h;
            fx = fp;
        }
        h *= 0.25;
    }
    (x, sign * fx)
}

const SWEEP_DIRS: usize = 64;

/// Evaluate a function over the unit-tangent sweep at one sample and return
/// its (min, max) after parabolic refinement of the extremal angles. For
/// n = 1 the sweep is the single direction v = T.
fn sweep_extremes(
    geo: &GeometryCache,
    s: usize,
    mut func: impl FnMut(&[f64; 2]) -> f64,
) -> (f64, f64) {
    let coeffs = geo.orthonormal_tangent_coeffs(s);
    if geo.n == 1 {
        let v = func(&coeffs[0]);
        return (v, v);
    }
    let dir = |psi: f64| -> [f64; 2] {
        let (c, sn) = (psi.cos(), psi.sin());
        [
            c * coeffs[0][0] + sn * coeffs[1][0],
            c * coeffs[0][1] + sn * coeffs[1][1],
        ]
    };
    let mut best_min = f64::INFINITY;
    let mut best_max = f64::NEG_INFINITY;
    let mut arg_min = 0.0;
    let mut arg_max = 0.0;
    for i in 0..SWEEP_DIRS {
        let psi = std::f64::consts::PI * i as f64 / SWEEP_DIRS as f64;
        let v = func(&dir(psi));
        if v < best_min {
            best_min = v;
            arg_min = psi;
        }
        if v > best_max {
            best_max = v;
            arg_max = psi;
        }
    }
    let h0 = std::f64::consts::PI / SWEEP_DIRS as f64;
    let mut g = |psi: f64| func(&dir(psi));
    let (_, vmin) = refine_extremum(&mut g, arg_min, h0, false, 8);
    let (_, vmax) = refine_extremum(&mut g, arg_max, h0, true, 8);
    (vmin.min(best_min), vmax.max(best_max))
}

/// Minimum over samples and unit tangent directions of |h(v,v)|^2.
/// Negative values mean the surface is not spacelike-convex.
pub fn convexity_margin(im: &VertexImmersion, geo: &GeometryCache) -> f64 {
    let space = im.space;
    (0..geo.n_samples)
        .into_par_iter()
        .map(|s| {
            let mut hvv = vec![0.0; geo.dim];
            let (vmin, _) = sweep_extremes(geo, s, |v| {
                geo.h_vv(s, v, &mut hvv);
                space.inner_slice(&hvv, &hvv)
            });
            vmin
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Pinching ratios: the largest alpha with h(v,v) - alpha H inward spacelike
/// and the smallest beta with h(v,v) - beta H outward spacelike, over all
/// samples and unit tangent directions. For each direction the thresholds
/// are the roots of |h(v,v) - a H|^2 = 0; the sweep extremizes them.
pub fn pinching_ratios(im: &VertexImmersion, geo: &GeometryCache) -> Result<(f64, f64)> {
    let margin = convexity_margin(im, geo);
    if margin <= 0.0 {
        return Err(Error::NotConvex {
            margin,
            context: "pinching ratios need a spacelike-convex surface",
        });
    }
    if geo.n == 1 {
        // h(v,v) = H identically for curves: both roots sit at 1
        return Ok((1.0, 1.0));
    }
    let space = im.space;
    let per_sample: Vec<(f64, f64)> = (0..geo.n_samples)
        .into_par_iter()
        .map(|s| {
            let mut hvv = vec![0.0; geo.dim];
            let hs: Vec<f64> = geo.mean_curvature_at(s).to_vec();
            let h2 = geo.h2[s];
            let mut root = |v: &[f64; 2], lower: bool| -> f64 {
                geo.h_vv(s, v, &mut hvv);
                let ah = space.inner_slice(&hvv, &hs);
                let a2 = space.inner_slice(&hvv, &hvv);
                let disc = (ah * ah - a2 * h2).max(0.0).sqrt();
                if lower {
                    (ah - disc) / h2
                } else {
                    (ah + disc) / h2
                }
            };
            let (amin, _) = sweep_extremes(geo, s, |v| root(v, true));
            let (_, bmax) = sweep_extremes(geo, s, |v| root(v, false));
            (amin, bmax)
        })
        .collect();
    let alpha = per_sample.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let beta = per_sample
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((alpha, beta))
}

/// Which branch attained a noncollapsing extremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeBranch {
    Interior,
    Boundary,
}

/// Result of the all-pairs noncollapsing scan.
#[derive(Debug, Clone, Copy)]
pub struct PairScan {
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub minus_branch: ExtremeBranch,
    pub plus_branch: ExtremeBranch,
    pub acausal_margin: f64,
    pub diameter2: f64,
    pub tilt_max: f64,
}

/// Noncollapsing parameters: delta_minus = inf and delta_plus = sup of
/// Z(x, y, N) = 2 <F(y)-F(x), N> / |F(y)-F(x)|^2 over samples x, inward null
/// normals N with <N,H> = 1, and y over the other samples together with the
/// diagonal limit <h_x(v,v), N>. The fan seeds the normal search; Z is
/// linear over the fan sphere, so the refinement at the extremizer lands on
/// the exact extremal normal. The same pair scan yields the acausality
/// margin, the extrinsic diameter, and the tilt supremum.
pub fn noncollapsing_deltas(
    im: &VertexImmersion,
    geo: &GeometryCache,
    frames: &[NormalFrame],
    fan: &NullNormalFan,
) -> Result<PairScan> {
    let d = im.dim();
    let ns = geo.n_samples;
    let space = im.space;
    if let Some(s) = (0..ns).find(|&s| geo.h2[s] <= 0.0) {
        return Err(Error::NotConvex {
            margin: geo.h2[s],
            context: "noncollapsing needs spacelike mean curvature",
        });
    }

    #[derive(Clone, Copy)]
    struct Acc {
        dmin: f64,
        dmax: f64,
        minus_branch: ExtremeBranch,
        plus_branch: ExtremeBranch,
        margin: f64,
        diam2: f64,
        tilt: f64,
        causal_pair: Option<(usize, usize, f64)>,
    }

    let accs: Vec<Acc> = (0..ns)
        .into_par_iter()
        .map(|x| {
            let fx = &frames[x];
            let mut acc = Acc {
                dmin: f64::INFINITY,
                dmax: f64::NEG_INFINITY,
                minus_branch: ExtremeBranch::Interior,
                plus_branch: ExtremeBranch::Interior,
                margin: f64::INFINITY,
                diam2: f64::NEG_INFINITY,
                tilt: 0.0,
                causal_pair: None,
            };
            let px = im.position(x);
            let mut omega = vec![0.0; d];
            for y in 0..ns {
                if y == x {
                    continue;
                }
                let py = im.position(y);
                for c in 0..d {
                    omega[c] = py[c] - px[c];
                }
                let d2 = space.inner_slice(&omega, &omega);
                if d2 <= 0.0 {
                    acc.causal_pair.get_or_insert((x, y, d2));
                    continue;
                }
                acc.margin = acc.margin.min(d2);
                acc.diam2 = acc.diam2.max(d2);
                let ch = space.inner_slice(&omega, &fx.h_hat);
                let mut cm2 = 0.0;
                for m in &fx.timelike {
                    let c = space.inner_slice(&omega, m);
                    cm2 += c * c;
                }
                let cm = cm2.sqrt();
                let zmin = 2.0 * (ch - cm) / (d2 * fx.abs_h);
                let zmax = 2.0 * (ch + cm) / (d2 * fx.abs_h);
                if zmin < acc.dmin {
                    acc.dmin = zmin;
                    acc.minus_branch = ExtremeBranch::Interior;
                }
                if zmax > acc.dmax {
                    acc.dmax = zmax;
                    acc.plus_branch = ExtremeBranch::Interior;
                }
                // tilt: |<H_y, e>| maximized over unit timelike e at x
                let hy = geo.mean_curvature_at(y);
                let mut t2 = 0.0;
                for m in &fx.timelike {
                    let c = space.inner_slice(hy, m);
                    t2 += c * c;
                }
                acc.tilt = acc.tilt.max(t2.sqrt());
            }
            // boundary (diagonal) values: <h_x(v,v), N> over the sweep and
            // the exact extremal normals
            let mut hvv = vec![0.0; d];
            let (bmin, _) = sweep_extremes(geo, x, |v| {
                geo.h_vv(x, v, &mut hvv);
                let ch = space.inner_slice(&hvv, &fx.h_hat);
                let mut cm2 = 0.0;
                for m in &fx.timelike {
                    let c = space.inner_slice(&hvv, m);
                    cm2 += c * c;
                }
                (ch - cm2.sqrt()) / fx.abs_h
            });
            let mut hvv2 = vec![0.0; d];
            let (_, bmax) = sweep_extremes(geo, x, |v| {
                geo.h_vv(x, v, &mut hvv2);
                let ch = space.inner_slice(&hvv2, &fx.h_hat);
                let mut cm2 = 0.0;
                for m in &fx.timelike {
                    let c = space.inner_slice(&hvv2, m);
                    cm2 += c * c;
                }
                (ch + cm2.sqrt()) / fx.abs_h
            });
            if bmin < acc.dmin {
                acc.dmin = bmin;
                acc.minus_branch = ExtremeBranch::Boundary;
            }
            if bmax > acc.dmax {
                acc.dmax = bmax;
                acc.plus_branch = ExtremeBranch::Boundary;
            }
            acc
        })
        .collect();

    let _ = fan; // the closed-form refinement reproduces the fan extremes

    for acc in &accs {
        if let Some((x, y, d2)) = acc.causal_pair {
            return Err(Error::AcausalPair { x, y, d2 });
        }
    }
    let mut out = PairScan {
        delta_minus: f64::INFINITY,
        delta_plus: f64::NEG_INFINITY,
        minus_branch: ExtremeBranch::Interior,
        plus_branch: ExtremeBranch::Interior,
        acausal_margin: f64::INFINITY,
        diameter2: f64::NEG_INFINITY,
        tilt_max: 0.0,
    };
    for acc in &accs {
        if acc.dmin < out.delta_minus {
            out.delta_minus = acc.dmin;
            out.minus_branch = acc.minus_branch;
        }
        if acc.dmax > out.delta_plus {
            out.delta_plus = acc.dmax;
            out.plus_branch = acc.plus_branch;
        }
        out.acausal_margin = out.acausal_margin.min(acc.margin);
        out.diameter2 = out.diameter2.max(acc.diam2);
        out.tilt_max = out.tilt_max.max(acc.tilt);
    }
    Ok(out)
}

/// The tilt bound at one sample: sup over y and unit timelike
/// e orthogonal to T_x Sigma + R H_x of |<H_y, e>|.
pub fn tilt_bound(
    im: &VertexImmersion,
    geo: &GeometryCache,
    frames: &[NormalFrame],
    x: usize,
) -> f64 {
    let space = im.space;
    let fx = &frames[x];
    let mut worst = 0.0f64;
    for y in 0..geo.n_samples {
        let hy = geo.mean_curvature_at(y);
        let mut t2 = 0.0;
        for m in &fx.timelike {
            let c = space.inner_slice(hy, m);
            t2 += c * c;
        }
        worst = worst.max(t2.sqrt());
    }
    worst
}

/// Slack report for the noncollapsing consequences; every slack must be
/// nonnegative for the run to stand.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub diameter_bound: f64,
    pub diameter_slack: f64,
    pub curvature_ratio: f64,
    pub curvature_ratio_bound: f64,
    pub curvature_slack: f64,
    pub cone_a_slack: f64,
    pub cone_b_slack: f64,
    pub ok: bool,
}

/// Evaluate the extrinsic diameter bound, the curvature comparison, and the
/// separation-cone component bounds on sampled pairs.
pub fn bound_checks(
    im: &VertexImmersion,
    geo: &GeometryCache,
    frames: &[NormalFrame],
    scan: &PairScan,
) -> BoundReport {
    let dm = scan.delta_minus;
    let dp = scan.delta_plus;
    let space = im.space;
    let d = im.dim();
    let diameter_bound = (dp + dm).powi(2) / (dp * dm.powi(3) * geo.h2_max);
    let diameter_slack = diameter_bound - scan.diameter2;
    let curvature_ratio = geo.h2_max / geo.h2_min;
    let curvature_ratio_bound = (dp + dm).powi(2) * dp / (4.0 * dm.powi(3));
    let curvature_slack = curvature_ratio_bound - curvature_ratio;

    // separation cone on a subsampled pair set
    let ns = geo.n_samples;
    let stride = (ns / 128).max(1);
    let mut cone_a_slack = f64::INFINITY;
    let mut cone_b_slack = f64::INFINITY;
    let mut omega = vec![0.0; d];
    for x in (0..ns).step_by(stride) {
        let fx = &frames[x];
        let tangents = tangent_frame(geo, x);
        let a_bound = (dp + dm).powi(2) / (2.0 * dp * dm * dm * fx.abs_h);
        let b_bound = (dp * dp - dm * dm) / (2.0 * dp * dm * dm * fx.abs_h);
        for y in (0..ns).step_by(stride) {
            if y == x {
                continue;
            }
            let px = im.position(x);
            let py = im.position(y);
            for c in 0..d {
                omega[c] = py[c] - px[c];
            }
            // normal projection of the separation
            for u in &tangents {
                let c = space.inner_slice(&omega, u);
                for (oc, uc) in omega.iter_mut().zip(u) {
                    *oc -= c * uc;
                }
            }
            let a = space.inner_slice(&omega, &fx.h_hat);
            let mut b2 = 0.0;
            for m in &fx.timelike {
                let c = space.inner_slice(&omega, m);
                b2 += c * c;
            }
            cone_a_slack = cone_a_slack.min(a_bound - a);
            cone_b_slack = cone_b_slack.min(b_bound - b2.sqrt());
        }
    }
    let ok = diameter_slack >= 0.0
        && curvature_slack >= 0.0
        && cone_a_slack >= 0.0
        && cone_b_slack >= 0.0;
    BoundReport {
        diameter_bound,
        diameter_slack,
        curvature_ratio,
        curvature_ratio_bound,
        curvature_slack,
        cone_a_slack,
        cone_b_slack,
        ok,
    }
}

/// Assemble the full diagnostics record at a given flow time.
pub fn diagnose(im: &VertexImmersion, geo: &GeometryCache, time: f64) -> Result<DiagnosticsRecord> {
    let margin = convexity_margin(im, geo);
    let frames = normal_frames(im, geo)?;
    let fan = null_normal_fan(im, &frames, 64);
    let scan = noncollapsing_deltas(im, geo, &frames, &fan)?;
    let (alpha, beta) = if margin > 0.0 {
        pinching_ratios(im, geo)?
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(DiagnosticsRecord {
        time,
        convex_margin: margin,
        alpha,
        beta,
        delta_minus: scan.delta_minus,
        delta_plus: scan.delta_plus,
        acausal_margin: scan.acausal_margin,
        h2_min: geo.h2_min,
        h2_max: geo.h2_max,
        diameter2: scan.diameter2,
        area: geo.area,
        tilt_max: scan.tilt_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::compute_geometry;
    use crate::grid::Differentiator;
    use approx::assert_relative_eq;

    fn setup(im: &VertexImmersion) -> (GeometryCache, Vec<NormalFrame>, NullNormalFan) {
        let diff = Differentiator::new(im.grid).unwrap();
        let geo = compute_geometry(im, &diff).unwrap();
        let frames = normal_frames(im, &geo).unwrap();
        let fan = null_normal_fan(im, &frames, 64);
        (geo, frames, fan)
    }

    #[test]
    fn circle_margin_is_inverse_radius_squared() {
        for &r in &[1.0f64, 2.0] {
            let im = fixtures::circle(r, 64, 1).unwrap();
            let (geo, _, _) = setup(&im);
            assert_relative_eq!(convexity_margin(&im, &geo), 1.0 / (r * r), epsilon = 1e-9);
        }
    }

    #[test]
    fn fan_normals_are_null_and_normalized() {
        let im = fixtures::paper_gamma(128).unwrap();
        let (geo, _frames, fan) = setup(&im);
        let sp = &im.space;
        assert_eq!(fan.n_dirs, 2);
        for s in 0..im.n_samples() {
            for dir in 0..fan.n_dirs {
                let n = fan.normal(s, dir);
                let n2 = sp.inner_slice(n, n);
                assert!(n2.abs() < 1e-10 * (1.0 + sp.companion_slice(n, n)));
                let nh = sp.inner_slice(n, geo.mean_curvature_at(s));
                assert_relative_eq!(nh, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn unit_circle_deltas_are_one_and_bounds_tight() {
        let im = fixtures::circle(1.0, 256, 1).unwrap();
        let (geo, frames, fan) = setup(&im);
        let scan = noncollapsing_deltas(&im, &geo, &frames, &fan).unwrap();
        // closed-form chord geometry: <omega, H_x> = 1 - cos, d^2 = 2(1 - cos)
        assert_relative_eq!(scan.delta_minus, 1.0, epsilon = 1e-9);
        assert_relative_eq!(scan.delta_plus, 1.0, epsilon = 1e-9);
        assert_relative_eq!(scan.diameter2, 4.0, epsilon = 1e-9);
        let report = bound_checks(&im, &geo, &frames, &scan);
        // diameter bound (1+1)^2/(1*1*1) = 4 and curvature comparison 1 <= 1
        assert_relative_eq!(report.diameter_bound, 4.0, epsilon = 1e-6);
        assert!(report.diameter_slack.abs() < 1e-6);
        assert_relative_eq!(report.curvature_ratio_bound, 1.0, epsilon = 1e-9);
        assert!(report.curvature_slack.abs() < 1e-6);
        assert!(report.ok);
    }

    #[test]
    fn pinching_is_trivial_for_curves_and_umbilic_spheres() {
        let im = fixtures::paper_gamma(128).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let geo = compute_geometry(&im, &diff).unwrap();
        let (a, b) = pinching_ratios(&im, &geo).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-9);
        assert_relative_eq!(b, 1.0, epsilon = 1e-9);

        let sp = fixtures::sphere(2.0, 12, 24, 1).unwrap();
        let diff = Differentiator::new(sp.grid).unwrap();
        let geo = compute_geometry(&sp, &diff).unwrap();
        let (a, b) = pinching_ratios(&sp, &geo).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-6);
        assert_relative_eq!(b, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn gamma_diagnostics_match_closed_forms() {
        // the curve is a boosted ellipse with semi-axes 2 and sqrt(3):
        // margin = 3/16, |H|^2 in [3/16, 4/9], deltas (3/4, 4/3),
        // diameter^2 = 16, tilt = 0 (planar in a boosted plane)
        let im = fixtures::paper_gamma(512).unwrap();
        let (geo, frames, fan) = setup(&im);
        assert_relative_eq!(convexity_margin(&im, &geo), 3.0 / 16.0, epsilon = 1e-8);
        assert_relative_eq!(geo.h2_min, 3.0 / 16.0, epsilon = 1e-8);
        assert_relative_eq!(geo.h2_max, 4.0 / 9.0, epsilon = 1e-8);
        let scan = noncollapsing_deltas(&im, &geo, &frames, &fan).unwrap();
        assert_relative_eq!(scan.delta_minus, 0.75, epsilon = 1e-6);
        assert_relative_eq!(scan.delta_plus, 4.0 / 3.0, epsilon = 1e-6);
        assert!(scan.delta_minus <= 1.0 && 1.0 <= scan.delta_plus);
        assert_relative_eq!(scan.diameter2, 16.0, epsilon = 1e-9);
        assert!(scan.acausal_margin > 0.0);
        assert!(scan.tilt_max < 1e-10);
        let report = bound_checks(&im, &geo, &frames, &scan);
        assert!(report.ok, "bounds must hold with slack: {report:?}");
        assert!(report.diameter_slack > 0.0);
        assert!(report.curvature_slack > 0.0);
    }

    #[test]
    fn boosted_circle_diagnostics() {
        let im = fixtures::circle(1.0, 256, 1).unwrap();
        let boost = crate::space::boost_exp(&im.space, &[0.0, 1.0], 0.5).unwrap();
        let moved = im.apply_lorentz(&boost, 1.0, &crate::space::AmbientVector::zeros(3));
        let (geo, frames, fan) = setup(&moved);
        assert!(convexity_margin(&moved, &geo) > 0.0);
        let scan = noncollapsing_deltas(&moved, &geo, &frames, &fan).unwrap();
        // noncollapsing is Lorentz invariant
        assert_relative_eq!(scan.delta_minus, 1.0, epsilon = 1e-8);
        assert_relative_eq!(scan.delta_plus, 1.0, epsilon = 1e-8);
        // planar surface in a boosted plane: tilt still vanishes
        assert!(scan.tilt_max < 1e-9);
        assert!(scan.acausal_margin > 0.0);
    }

    #[test]
    fn nonplanar_curve_has_positive_tilt() {
        // eta with a second mode makes the curve genuinely non-planar
        let im = fixtures::gauss_seed(
            crate::grid::GridSpec::circle(128),
            1,
            1.0,
            &[],
            &[vec![fixtures::ModeSeed {
                degree: 2,
                order: 0,
                amp_cos: 0.1,
                amp_sin: 0.0,
            }]],
        )
        .unwrap();
        let (geo, frames, _) = setup(&im);
        let mut worst = 0.0f64;
        for x in 0..im.n_samples() {
            worst = worst.max(tilt_bound(&im, &geo, &frames, x));
        }
        assert!(worst > 1e-3, "expected nonzero tilt, got {worst}");
        // brute-force cross-check at one sample
        let x = 0;
        let mut brute = 0.0f64;
        for y in 0..im.n_samples() {
            let hy = geo.mean_curvature_at(y);
            let c = im.space.inner_slice(hy, &frames[x].timelike[0]);
            brute = brute.max(c.abs());
        }
        assert_relative_eq!(tilt_bound(&im, &geo, &frames, x), brute, epsilon = 1e-14);
    }

    #[test]
    fn perturbed_sphere_pinching_brackets_half() {
        let im = fixtures::gauss_seed(
            crate::grid::GridSpec::sphere(16, 32),
            1,
            1.0,
            &[fixtures::ModeSeed {
                degree: 2,
                order: 0,
                amp_cos: 0.05,
                amp_sin: 0.0,
            }],
            &[],
        )
        .unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let geo = compute_geometry(&im, &diff).unwrap();
        let (a, b) = pinching_ratios(&im, &geo).unwrap();
        assert!(a > 0.0 && a < 0.5, "alpha = {a}");
        assert!(b > 0.5, "beta = {b}");
    }

    #[test]
    fn deltas_bracket_one_over_n() {
        let im = fixtures::gauss_seed(
            crate::grid::GridSpec::sphere(12, 24),
            1,
            1.0,
            &[fixtures::ModeSeed {
                degree: 2,
                order: 0,
                amp_cos: 0.05,
                amp_sin: 0.0,
            }],
            &[],
        )
        .unwrap();
        let (geo, frames, fan) = setup(&im);
        let scan = noncollapsing_deltas(&im, &geo, &frames, &fan).unwrap();
        assert!(scan.delta_minus <= 0.5 + 1e-9, "{}", scan.delta_minus);
        assert!(scan.delta_plus >= 0.5 - 1e-9, "{}", scan.delta_plus);
    }

    #[test]
    fn acausal_pair_is_reported() {
        // push one vertex far along the timelike axis so that chords to it
        // become causal while the local tangent stays spacelike
        let im = fixtures::circle(1.0, 64, 1).unwrap();
        let mut pos = im.positions.clone();
        pos[3 * 10 + 2] += 2.0;
        let broken = VertexImmersion::new(im.grid, im.space, pos).unwrap();
        let diff = Differentiator::new(broken.grid).unwrap();
        if let Ok(geo) = compute_geometry(&broken, &diff) {
            if let Ok(frames) = normal_frames(&broken, &geo) {
                let fan = null_normal_fan(&broken, &frames, 64);
                match noncollapsing_deltas(&broken, &geo, &frames, &fan) {
                    Err(Error::AcausalPair { d2, .. }) => assert!(d2 <= 0.0),
                    other => panic!("expected acausal pair, got {other:?}"),
                }
            }
        }
    }
}
