//! Raw mean curvature flow: explicit RK4 time stepping with a parabolic CFL
//! cap, consistency checks for the metric and second-fundamental-form
//! evolution equations, blow-up monitoring in the companion norm, extinction
//! time estimation, and the rescaled snapshot sequence.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, GeometryCache};
use crate::grid::{Differentiator, GridSpec};
use crate::immersion::VertexImmersion;
use crate::normalized::min_volume_plane;
use crate::space::{AmbientVector, LorentzMap};

pub const DEFAULT_CFL: f64 = 0.2;
pub const MAX_HALVINGS: usize = 20;

/// One flow state: time, immersion, and its geometry cache.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub time: f64,
    pub im: VertexImmersion,
    pub geo: GeometryCache,
    pub history: Vec<DiagnosticsRecord>,
    pub dt_last: f64,
}

impl FlowState {
    pub fn new(im: VertexImmersion, diff: &Differentiator) -> Result<Self> {
        let geo = compute_geometry(&im, diff)?;
        Ok(Self {
            time: 0.0,
            im,
            geo,
            history: Vec::new(),
            dt_last: 0.0,
        })
    }
}

/// Fixed timelike frame for the companion norm, taken from the normal space
/// of the initial surface at sample 0.
pub fn companion_frame(im: &VertexImmersion, geo: &GeometryCache) -> Result<Vec<Vec<f64>>> {
    let frames = crate::diagnostics::normal_frames(im, geo)?;
    Ok(frames[0].timelike.clone())
}

fn companion_norm2(im: &VertexImmersion, frame: &[Vec<f64>], v: &[f64]) -> f64 {
    let space = &im.space;
    let mut s = space.inner_slice(v, v);
    for m in frame {
        let c = space.inner_slice(v, m);
        s += 2.0 * c * c;
    }
    s
}

/// sup over samples of ||h||^2 in the companion norm: the squared norm of
/// the second fundamental form over a g-orthonormal tangent frame.
pub fn sup_h2_companion(im: &VertexImmersion, geo: &GeometryCache, frame: &[Vec<f64>]) -> f64 {
    let n = geo.n;
    let mut worst = 0.0f64;
    let mut hij = vec![0.0; geo.dim];
    for s in 0..geo.n_samples {
        let coeffs = geo.orthonormal_tangent_coeffs(s);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                hij.iter_mut().for_each(|x| *x = 0.0);
                for p in 0..n {
                    for q in 0..n {
                        let w = coeffs[i][p] * coeffs[j][q];
                        if w != 0.0 {
                            let hpq = geo.h_ij(s, p, q);
                            for (c, x) in hij.iter_mut().enumerate() {
                                *x += w * hpq[c];
                            }
                        }
                    }
                }
                total += companion_norm2(im, frame, &hij);
            }
        }
        worst = worst.max(total);
    }
    worst
}

/// Minimum companion-norm spacing between neighbouring grid samples.
pub fn min_grid_spacing(im: &VertexImmersion, frame: &[Vec<f64>]) -> f64 {
    let d = im.dim();
    let mut w = vec![0.0; d];
    let mut best = f64::INFINITY;
    let mut check = |a: usize, b: usize, best: &mut f64| {
        let pa = im.position(a);
        let pb = im.position(b);
        for c in 0..d {
            w[c] = pb[c] - pa[c];
        }
        let n2 = companion_norm2(im, frame, &w);
        if n2 < *best {
            *best = n2;
        }
    };
    match im.grid {
        GridSpec::Circle { samples } => {
            for s in 0..samples {
                check(s, (s + 1) % samples, &mut best);
            }
        }
        GridSpec::Sphere { n_lat, n_lon, .. } => {
            for i in 0..n_lat {
                for j in 0..n_lon {
                    let s = i * n_lon + j;
                    check(s, i * n_lon + (j + 1) % n_lon, &mut best);
                    if i + 1 < n_lat {
                        check(s, (i + 1) * n_lon + j, &mut best);
                    }
                }
            }
        }
    }
    best.sqrt()
}

/// Parabolic stability cap: c_cfl * (min spacing)^2 / (1 + sup ||h||^2).
pub fn dt_max(im: &VertexImmersion, geo: &GeometryCache, frame: &[Vec<f64>], c_cfl: f64) -> f64 {
    let h = min_grid_spacing(im, frame);
    let sup = sup_h2_companion(im, geo, frame);
    c_cfl * h * h / (1.0 + sup)
}

/// One classical RK4 step of dF/dt = velocity(F). The velocity callback
/// recomputes geometry at each stage; any stage failure rejects the step.
pub fn rk4_step(
    im: &VertexImmersion,
    dt: f64,
    velocity: &mut impl FnMut(&VertexImmersion) -> Result<Vec<f64>>,
) -> Result<VertexImmersion> {
    let stage = |base: &VertexImmersion, k: &[f64], factor: f64| -> VertexImmersion {
        let mut pos = base.positions.clone();
        for (p, v) in pos.iter_mut().zip(k) {
            *p += factor * v;
        }
        VertexImmersion {
            grid: base.grid,
            space: base.space,
            positions: pos,
        }
    };
    let k1 = velocity(im)?;
    let s2 = stage(im, &k1, 0.5 * dt);
    let k2 = velocity(&s2)?;
    let s3 = stage(im, &k2, 0.5 * dt);
    let k3 = velocity(&s3)?;
    let s4 = stage(im, &k3, dt);
    let k4 = velocity(&s4)?;
    let mut pos = im.positions.clone();
    for (idx, p) in pos.iter_mut().enumerate() {
        *p += dt / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        if !p.is_finite() {
            return Err(Error::DegenerateMetric {
                sample: idx / im.dim(),
                min_eig: f64::NAN,
            });
        }
    }
    Ok(VertexImmersion {
        grid: im.grid,
        space: im.space,
        positions: pos,
    })
}

/// Mean curvature velocity field of an immersion.
pub fn mcf_velocity(im: &VertexImmersion, diff: &Differentiator) -> Result<Vec<f64>> {
    Ok(compute_geometry(im, diff)?.mean_curvature)
}

/// Outcome of one accepted adaptive step.
#[derive(Debug)]
pub struct StepOutcome {
    pub state: FlowState,
    pub dt_used: f64,
    pub halvings: usize,
}

/// Advance raw MCF by one accepted step: the requested dt is capped by the
/// CFL bound, and rejected steps (degenerate metric mid-stage) halve dt up
/// to MAX_HALVINGS times.
pub fn mcf_step(
    state: &FlowState,
    dt_request: f64,
    diff: &Differentiator,
    frame: &[Vec<f64>],
    c_cfl: f64,
) -> Result<StepOutcome> {
    let cap = dt_max(&state.im, &state.geo, frame, c_cfl);
    let mut dt = dt_request.min(cap);
    for halvings in 0..=MAX_HALVINGS {
        let attempt = rk4_step(&state.im, dt, &mut |im| mcf_velocity(im, diff));
        match attempt.and_then(|im| {
            let geo = compute_geometry(&im, diff)?;
            Ok((im, geo))
        }) {
            Ok((im, geo)) => {
                return Ok(StepOutcome {
                    state: FlowState {
                        time: state.time + dt,
                        im,
                        geo,
                        history: Vec::new(),
                        dt_last: dt,
                    },
                    dt_used: dt,
                    halvings,
                });
            }
            Err(_) if dt > f64::MIN_POSITIVE * 1e6 => {
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepUnderflow {
        halvings: MAX_HALVINGS,
        dt,
    })
}

/// Max-norm residual of the metric evolution equation between two states on
/// the same grid: (g(t+dt) - g(t))/dt + 2 <H, h_ij>, evaluated at t.
pub fn metric_evolution_check(before: &FlowState, after: &FlowState) -> f64 {
    let dt = after.time - before.time;
    let n = before.geo.n;
    let mut worst = 0.0f64;
    let space = &before.im.space;
    for s in 0..before.geo.n_samples {
        let hvec = before.geo.mean_curvature_at(s);
        for i in 0..n {
            for j in 0..n {
                let rate = (after.geo.g[s][i][j] - before.geo.g[s][i][j]) / dt;
                let pairing = space.inner_slice(hvec, before.geo.h_ij(s, i, j));
                worst = worst.max((rate + 2.0 * pairing).abs());
            }
        }
    }
    worst
}

/// Max companion-norm residual of the second-fundamental-form evolution
/// equation between two consecutive states:
/// nabla_t h_ij = nabla_i nabla_j H + <H, h_ip> h^p_j.
/// The discrete nabla_t subtracts the frame-advection terms h(pi dH_i, .)
/// coming from the tangential motion of the coordinate frame, and
/// nabla nabla H is the normal-bundle second derivative.
pub fn sff_evolution_check(
    before: &FlowState,
    after: &FlowState,
    diff: &Differentiator,
    frame: &[Vec<f64>],
) -> f64 {
    let dt = after.time - before.time;
    let im = &before.im;
    let geo = &before.geo;
    let space = &im.space;
    let d = im.dim();
    let ns = geo.n_samples;
    let n = geo.n;

    let hfield = &geo.mean_curvature;
    let mut dh: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dir in 0..n {
        let mut t = vec![0.0; ns * d];
        diff.d1(hfield, d, dir, &mut t);
        dh.push(t);
    }
    // normal-projected first derivatives and the tangential coefficients of dH
    let mut perp_dh: Vec<Vec<f64>> = vec![vec![0.0; ns * d]; n];
    let mut tang_coeff = vec![[[0.0f64; 2]; 2]; ns];
    for s in 0..ns {
        for dir in 0..n {
            let dhs: Vec<f64> = dh[dir][s * d..(s + 1) * d].to_vec();
            let mut coeff = [0.0; 2];
            for k in 0..n {
                let mut v = 0.0;
                for p in 0..n {
                    v += geo.ginv[s][k][p] * space.inner_slice(&dhs, geo.tangent(s, p));
                }
                coeff[k] = v;
                tang_coeff[s][dir][k] = v;
            }
            for c in 0..d {
                let mut v = dhs[c];
                for k in 0..n {
                    v -= coeff[k] * geo.tangent(s, k)[c];
                }
                perp_dh[dir][s * d + c] = v;
            }
        }
    }
    let mut d_perp: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut per_i = Vec::with_capacity(n);
        for i in 0..n {
            let mut t = vec![0.0; ns * d];
            diff.d1(&perp_dh[j], d, i, &mut t);
            per_i.push(t);
        }
        d_perp.push(per_i);
    }

    let mut worst = 0.0f64;
    let mut resid = vec![0.0; d];
    let mut nn = vec![0.0; d];
    for s in 0..ns {
        for i in 0..n {
            for j in 0..n {
                // nabla_i nabla_j H: normal projection of
                // d_i(perp dH_j) - Gamma^k_ij perp dH_k
                nn.copy_from_slice(&d_perp[j][i][s * d..(s + 1) * d]);
                for k in 0..n {
                    let g = geo.christoffel[s][k][i][j];
                    for (c, v) in nn.iter_mut().enumerate() {
                        *v -= g * perp_dh[k][s * d + c];
                    }
                }
                let mut coeff = [0.0; 2];
                for k in 0..n {
                    let mut v = 0.0;
                    for p in 0..n {
                        v += geo.ginv[s][k][p] * space.inner_slice(&nn, geo.tangent(s, p));
                    }
                    coeff[k] = v;
                }
                for k in 0..n {
                    for (c, v) in nn.iter_mut().enumerate() {
                        *v -= coeff[k] * geo.tangent(s, k)[c];
                    }
                }
                // reaction term <H, h_ip> g^{pq} h_qj
                for p in 0..n {
                    let hp = space.inner_slice(geo.mean_curvature_at(s), geo.h_ij(s, i, p));
                    for q in 0..n {
                        let w = hp * geo.ginv[s][p][q];
                        let hqj = geo.h_ij(s, q, j);
                        for (c, v) in nn.iter_mut().enumerate() {
                            *v += w * hqj[c];
                        }
                    }
                }
                // discrete nabla_t h_ij with frame-advection correction
                for c in 0..d {
                    resid[c] = (after.geo.h_ij(s, i, j)[c] - geo.h_ij(s, i, j)[c]) / dt;
                }
                for k in 0..n {
                    let ci = tang_coeff[s][i][k];
                    let cj = tang_coeff[s][j][k];
                    let hkj = geo.h_ij(s, k, j);
                    let hik = geo.h_ij(s, i, k);
                    for c in 0..d {
                        resid[c] += ci * hkj[c] + cj * hik[c];
                    }
                }
                let mut coeff = [0.0; 2];
                for k in 0..n {
                    let mut v = 0.0;
                    for p in 0..n {
                        v += geo.ginv[s][k][p] * space.inner_slice(&resid, geo.tangent(s, p));
                    }
                    coeff[k] = v;
                }
                for k in 0..n {
                    for (c, v) in resid.iter_mut().enumerate() {
                        *v -= coeff[k] * geo.tangent(s, k)[c];
                    }
                }
                for c in 0..d {
                    resid[c] -= nn[c];
                }
                worst = worst.max(companion_norm2(im, frame, &resid).abs().sqrt());
            }
        }
    }
    worst
}

/// Status of the blow-up monitor after a step.
#[derive(Debug, Clone, Copy)]
pub enum BlowupStatus {
    Continue,
    Singular { sup_h2: f64, t_blowup: f64 },
}

/// Tracks sup ||h||^2 in a companion norm fixed at flow start and declares a
/// singular stop when it exceeds the ceiling (or the step size underflows).
#[derive(Debug, Clone)]
pub struct BlowupMonitor {
    pub frame: Vec<Vec<f64>>,
    pub ceiling: f64,
    pub series: Vec<(f64, f64)>,
}

impl BlowupMonitor {
    pub fn new(im: &VertexImmersion, geo: &GeometryCache, ceiling: f64) -> Result<Self> {
        Ok(Self {
            frame: companion_frame(im, geo)?,
            ceiling,
            series: Vec::new(),
        })
    }

    pub fn update(&mut self, state: &FlowState) -> BlowupStatus {
        let sup = sup_h2_companion(&state.im, &state.geo, &self.frame);
        self.series.push((state.time, sup));
        if sup > self.ceiling {
            BlowupStatus::Singular {
                sup_h2: sup,
                t_blowup: self.extrapolate_blowup(),
            }
        } else {
            BlowupStatus::Continue
        }
    }

    /// Least-squares linear fit of 1/sup||h||^2 against t, extrapolated to
    /// its zero crossing. Exact for the shrinking circle and sphere.
    pub fn extrapolate_blowup(&self) -> f64 {
        let m = self.series.len();
        let tail = &self.series[m.saturating_sub(m / 2 + 2)..];
        let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, s)| (t, 1.0 / s)).collect();
        match linear_fit(&pts) {
            Some((a, b)) if b < 0.0 => -a / b,
            _ => f64::INFINITY,
        }
    }
}

/// Ordinary least squares y = a + b x; None for degenerate input.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let m = pts.len();
    if m < 2 {
        return None;
    }
    let mf = m as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = mf * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let b = (mf * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / mf;
    Some((a, b))
}

/// Extinction-time estimate: least-squares fit of area(t)^{2/n} (linear in t
/// for the round solutions) extrapolated to zero, over the trailing half of
/// the series.
pub fn estimate_extinction(series: &[(f64, f64)], n: usize) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let start = if series.len() >= 4 { series.len() / 2 } else { 0 };
    let pts: Vec<(f64, f64)> = series[start..]
        .iter()
        .map(|&(t, area)| (t, area.powf(2.0 / n as f64)))
        .collect();
    match linear_fit(&pts) {
        Some((a, b)) if b < 0.0 => Some(-a / b),
        _ => None,
    }
}

/// The rescaled sequence L_j(lambda_j Sigma_{t_j}) with
/// lambda_j = (T - t_j)^{-1/2} and L_j the min-volume-plane alignment.
/// The self-similar circle maps to the fixed round circle of radius
/// sqrt(2 n (T - t)) * lambda = sqrt(2 n).
pub fn rescaled_sequence(
    snapshots: &[(f64, VertexImmersion)],
    t_est: f64,
    diff: &Differentiator,
) -> Result<Vec<VertexImmersion>> {
    let mut out = Vec::with_capacity(snapshots.len());
    for (t, im) in snapshots {
        if *t >= t_est {
            return Err(Error::Config(format!(
                "snapshot time {t} is not before the estimated extinction {t_est}"
            )));
        }
        let lambda = (t_est - t).powf(-0.5);
        let scaled = im.apply_lorentz(
            &LorentzMap::identity(&im.space),
            lambda,
            &AmbientVector::zeros(im.dim()),
        );
        let plane = min_volume_plane(&scaled, &LorentzMap::identity(&im.space), diff)?;
        let aligned = scaled.apply_lorentz(
            &plane.inverse(&im.space),
            1.0,
            &AmbientVector::zeros(im.dim()),
        );
        out.push(aligned);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    fn radius_of(im: &VertexImmersion) -> (f64, f64) {
        let mut rmin = f64::INFINITY;
        let mut rmax = 0.0f64;
        for s in 0..im.n_samples() {
            let p = im.position(s);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        (rmin, rmax)
    }

    #[test]
    fn shrinking_circle_tracks_exact_radius() {
        let im = fixtures::circle(1.0, 256, 1).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let mut state = FlowState::new(im, &diff).unwrap();
        let frame = companion_frame(&state.im, &state.geo).unwrap();
        let dt = 1e-3; // capped by CFL internally
        while state.time < 0.2 {
            let out =
                mcf_step(&state, dt.min(0.2 - state.time), &diff, &frame, DEFAULT_CFL).unwrap();
            state = out.state;
        }
        let want = (1.0f64 - 2.0 * state.time).sqrt();
        let (rmin, rmax) = radius_of(&state.im);
        assert_relative_eq!(rmin, want, max_relative = 1e-8);
        assert_relative_eq!(rmax, want, max_relative = 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order_on_the_circle() {
        // radius error on the exact circle scales as O(dt^4) at fixed M=512
        let mut errs = Vec::new();
        for &dt in &[2e-3f64, 1e-3] {
            let im = fixtures::circle(1.0, 512, 1).unwrap();
            let diff = Differentiator::new(im.grid).unwrap();
            let mut state = FlowState::new(im, &diff).unwrap();
            let frame = companion_frame(&state.im, &state.geo).unwrap();
            let steps = (0.1 / dt).round() as usize;
            for _ in 0..steps {
                let out = mcf_step(&state, dt, &diff, &frame, 10.0).unwrap();
                assert_eq!(out.dt_used, dt, "CFL must not interfere in this range");
                state = out.state;
            }
            let want = (1.0f64 - 2.0 * state.time).sqrt();
            let (rmin, rmax) = radius_of(&state.im);
            let err = (rmin - want).abs().max((rmax - want).abs());
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(
            order > 3.5,
            "expected 4th-order convergence, got order {order:.2} from {errs:?}"
        );
    }

    #[test]
    fn shrinking_sphere_tracks_exact_radius() {
        let im = fixtures::sphere(1.0, 16, 32, 1).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let mut state = FlowState::new(im, &diff).unwrap();
        let frame = companion_frame(&state.im, &state.geo).unwrap();
        while state.time < 0.12 {
            let out = mcf_step(&state, 2e-4, &diff, &frame, DEFAULT_CFL).unwrap();
            state = out.state;
        }
        let want = (1.0f64 - 4.0 * state.time).sqrt();
        for s in 0..state.im.n_samples() {
            let p = state.im.position(s);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert_relative_eq!(r, want, max_relative = 1e-4);
        }
    }

    #[test]
    fn area_derivative_matches_curvature_integral() {
        // (area(t+dt) - area(t))/dt = -int |H|^2 dmu + O(dt)
        let im = fixtures::paper_gamma(256).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let state = FlowState::new(im, &diff).unwrap();
        let frame = companion_frame(&state.im, &state.geo).unwrap();
        let dt = 1e-5;
        let out = mcf_step(&state, dt, &diff, &frame, 10.0).unwrap();
        let rate = (out.state.geo.area - state.geo.area) / out.dt_used;
        let mut integral = 0.0;
        for s in 0..state.geo.n_samples {
            integral += state.geo.h2[s] * state.geo.dmu[s];
        }
        assert_relative_eq!(rate, -integral, max_relative = 1e-4);
    }

    #[test]
    fn metric_evolution_residual_is_first_order() {
        let im = fixtures::paper_gamma(256).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let state = FlowState::new(im, &diff).unwrap();
        let frame = companion_frame(&state.im, &state.geo).unwrap();
        let mut resids = Vec::new();
        for &dt in &[2e-4f64, 1e-4] {
            let out = mcf_step(&state, dt, &diff, &frame, 10.0).unwrap();
            resids.push(metric_evolution_check(&state, &out.state));
        }
        assert!(
            resids[1] < resids[0] * 0.7,
            "metric residual not O(dt): {resids:?}"
        );
        let circ = fixtures::circle(1.0, 256, 1).unwrap();
        let cstate = FlowState::new(circ, &diff).unwrap();
        let cframe = companion_frame(&cstate.im, &cstate.geo).unwrap();
        let out = mcf_step(&cstate, 1e-4, &diff, &cframe, 10.0).unwrap();
        assert!(metric_evolution_check(&cstate, &out.state) < 1e-4);
    }

    #[test]
    fn sff_evolution_residual_small_on_sphere_and_first_order_on_gamma() {
        let im = fixtures::sphere(1.0, 16, 32, 1).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let state = FlowState::new(im, &diff).unwrap();
        let frame = companion_frame(&state.im, &state.geo).unwrap();
        let out = mcf_step(&state, 1e-4, &diff, &frame, 10.0).unwrap();
        let resid = sff_evolution_check(&state, &out.state, &diff, &frame);
        assert!(resid < 1e-4, "sphere sff residual {resid}");

        let gamma = fixtures::paper_gamma(256).unwrap();
        let gdiff = Differentiator::new(gamma.grid).unwrap();
        let gstate = FlowState::new(gamma, &gdiff).unwrap();
        let gframe = companion_frame(&gstate.im, &gstate.geo).unwrap();
        let mut resids = Vec::new();
        for &dt in &[2e-4f64, 1e-4] {
            let out = mcf_step(&gstate, dt, &gdiff, &gframe, 10.0).unwrap();
            resids.push(sff_evolution_check(&gstate, &out.state, &gdiff, &gframe));
        }
        assert!(
            resids[1] < resids[0] * 0.7,
            "sff residual not O(dt): {resids:?}"
        );
    }

    #[test]
    fn blowup_monitor_on_shrinking_circle() {
        let im = fixtures::circle(1.0, 64, 1).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let mut state = FlowState::new(im, &diff).unwrap();
        let mut monitor = BlowupMonitor::new(&state.im, &state.geo, 50.0).unwrap();
        let frame = monitor.frame.clone();
        assert!(matches!(monitor.update(&state), BlowupStatus::Continue));
        let mut stopped = false;
        for _ in 0..200000 {
            let out = mcf_step(&state, 1e-3, &diff, &frame, DEFAULT_CFL).unwrap();
            state = out.state;
            if let BlowupStatus::Singular { sup_h2, t_blowup } = monitor.update(&state) {
                // ceiling 50 means r^2 ~ 0.02, t ~ (1 - 0.02)/2 = 0.49
                assert!(sup_h2 > 50.0);
                assert!(state.time > 0.45, "stopped too early at t = {}", state.time);
                assert_relative_eq!(t_blowup, 0.5, max_relative = 5e-3);
                stopped = true;
                break;
            }
        }
        assert!(stopped, "monitor never reported a singular stop");
    }

    #[test]
    fn extinction_estimate_exact_on_round_laws() {
        // circle: area = 2 pi sqrt(1 - 2t), area^2 linear, root at 1/2
        let series: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = 0.005 * i as f64;
                (t, std::f64::consts::TAU * (1.0 - 2.0 * t).sqrt())
            })
            .collect();
        let t = estimate_extinction(&series, 1).unwrap();
        assert_relative_eq!(t, 0.5, max_relative = 1e-10);
        // sphere: area = 4 pi (1 - 4t), area^1 linear, root at 1/4
        let series2: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = 0.002 * i as f64;
                (t, 4.0 * std::f64::consts::PI * (1.0 - 4.0 * t))
            })
            .collect();
        let t2 = estimate_extinction(&series2, 2).unwrap();
        assert_relative_eq!(t2, 0.25, max_relative = 1e-10);
    }

    #[test]
    fn rescaled_shrinking_circle_is_stationary_round() {
        let im = fixtures::circle(1.0, 128, 1).unwrap();
        let diff = Differentiator::new(im.grid).unwrap();
        let mut state = FlowState::new(im, &diff).unwrap();
        let frame = companion_frame(&state.im, &state.geo).unwrap();
        let mut snapshots = Vec::new();
        let targets = [0.05, 0.15, 0.3];
        let mut next = 0;
        while next < targets.len() {
            let dt = (targets[next] - state.time).min(5e-4);
            let out = mcf_step(&state, dt, &diff, &frame, DEFAULT_CFL).unwrap();
            state = out.state;
            if (state.time - targets[next]).abs() < 1e-12 {
                snapshots.push((state.time, state.im.clone()));
                next += 1;
            }
        }
        // exact extinction for r0 = 1 at T = 1/2; every rescaled snapshot is
        // the same round circle of radius sqrt(2n) = sqrt(2)
        let rescaled = rescaled_sequence(&snapshots, 0.5, &diff).unwrap();
        for im in &rescaled {
            for s in 0..im.n_samples() {
                let p = im.position(s);
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                assert_relative_eq!(r, (2.0f64).sqrt(), max_relative = 1e-6);
            }
        }
    }
}
