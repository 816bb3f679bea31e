//! Semianalytic reference solutions for concentric-circle configurations.
//!
//! Two or three concentric circles keep their circular shape under the flow;
//! the radii obey coupled scalar ODEs and the bulk potential has a closed
//! piecewise logarithmic form. The radii ODEs are integrated with a
//! fixed-step RK4 scheme (the primary oracle). For the two-circle case the
//! conserved combination of the squared radii reduces the system to a single
//! scalar ODE that can instead be solved by quadrature plus root finding;
//! the two routes cross-validate each other.
//!
//! Jumps are stored per circle in curve order, each being the β value on the
//! side the circle's normal points into minus the value on the other side.

use crate::{Error, Result};

/// Default RK4 step for oracle trajectories.
pub const DEFAULT_ORACLE_DT: f64 = 1e-4;

/// Two concentric circles with radii `r1 < r2` separating three phases:
/// disk (phase 1), annulus (phase 2), exterior (phase 3). The inner circle's
/// normal points into the disk, the outer circle's normal into the exterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCircleParams {
    /// β jumps across the inner and outer circle: `[β1 - β2, β3 - β2]`.
    pub jumps: [f64; 2],
    pub r1_init: f64,
    pub r2_init: f64,
}

impl TwoCircleParams {
    pub fn new(jumps: [f64; 2], r1_init: f64, r2_init: f64) -> Result<Self> {
        if jumps[0] == 0.0 || jumps[1] == 0.0 {
            return Err(Error::Domain("two-circle jumps must be nonzero".into()));
        }
        if !(0.0 < r1_init && r1_init < r2_init) {
            return Err(Error::Domain(format!(
                "two-circle radii must satisfy 0 < r1 < r2, got ({r1_init}, {r2_init})"
            )));
        }
        Ok(TwoCircleParams { jumps, r1_init, r2_init })
    }

    pub fn from_betas(betas: [f64; 3], r1_init: f64, r2_init: f64) -> Result<Self> {
        Self::new([betas[0] - betas[1], betas[2] - betas[1]], r1_init, r2_init)
    }

    /// Conserved combination of the squared radii (up to a factor π this is
    /// the total energy content relative to the box).
    pub fn conserved(&self, r1: f64, r2: f64) -> f64 {
        self.jumps[0] * r1 * r1 - self.jumps[1] * r2 * r2
    }

    /// The inner radius determined by the outer one through conservation.
    fn r1_of_r2(&self, r2: f64) -> Result<f64> {
        let d2 = self.conserved(self.r1_init, self.r2_init);
        let sq = (d2 + self.jumps[1] * r2 * r2) / self.jumps[0];
        if sq <= 0.0 {
            return Err(Error::Domain(format!(
                "conserved quantity admits no inner radius at r2 = {r2}"
            )));
        }
        Ok(sq.sqrt())
    }
}

/// Coefficient of the logarithmic branch of the exact potential between the
/// two circles.
pub fn alpha2(r1: f64, r2: f64, params: &TwoCircleParams) -> Result<f64> {
    if r1 <= 0.0 {
        return Err(Error::Domain(format!("alpha2 requires r1 > 0, got {r1}")));
    }
    if r2 - r1 < 1e-12 {
        return Err(Error::Domain(format!(
            "alpha2 singular as radii coincide: r1 = {r1}, r2 = {r2}"
        )));
    }
    Ok((1.0 / (params.jumps[0] * r1) + 1.0 / (params.jumps[1] * r2)) / (r2 / r1).ln())
}

/// Right-hand sides of the two-circle radii ODE system.
pub fn two_circle_rates(params: &TwoCircleParams, r1: f64, r2: f64) -> Result<(f64, f64)> {
    let a = alpha2(r1, r2, params)?;
    Ok((-a / (params.jumps[0] * r1), -a / (params.jumps[1] * r2)))
}

/// A trajectory of circle radii, one row per time.
#[derive(Debug, Clone)]
pub struct RadiiTrajectory {
    pub times: Vec<f64>,
    /// `radii[j]` holds the radii at `times[j]`, one entry per circle.
    pub radii: Vec<Vec<f64>>,
    /// Set when integration stopped before the requested horizon because a
    /// phase was about to vanish (a radius or a gap closed).
    pub stopped_early: bool,
}

impl RadiiTrajectory {
    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Radii at time `t`, linearly interpolated between stored rows.
    /// `t` is clamped to the covered interval.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.radii[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.radii[n - 1].clone();
        }
        let j = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(j) => return self.radii[j].clone(),
            Err(j) => j,
        };
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let s = (t - t0) / (t1 - t0);
        self.radii[j - 1]
            .iter()
            .zip(&self.radii[j])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }
}

fn rk4_step<const N: usize>(
    y: [f64; N],
    dt: f64,
    f: &dyn Fn([f64; N]) -> Option<[f64; N]>,
) -> Option<[f64; N]> {
    let add = |y: [f64; N], k: [f64; N], s: f64| {
        let mut out = y;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    let k1 = f(y)?;
    let k2 = f(add(y, k1, dt / 2.0))?;
    let k3 = f(add(y, k2, dt / 2.0))?;
    let k4 = f(add(y, k3, dt))?;
    let mut out = y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Some(out)
}

/// RK4 trajectory of the two-circle radii system over `[0, t_end]`.
///
/// Stops early (flagged, not an error) when the inner radius falls to the
/// step scale or the gap between the circles closes.
pub fn radii_ode_two(params: &TwoCircleParams, t_end: f64, dt: f64) -> RadiiTrajectory {
    let floor = dt.max(1e-10);
    let rhs = move |y: [f64; 2]| -> Option<[f64; 2]> {
        if y[0] <= floor || y[1] - y[0] <= 1e-9 * y[1] {
            return None;
        }
        match two_circle_rates(params, y[0], y[1]) {
            Ok((a, b)) if a.is_finite() && b.is_finite() => Some([a, b]),
            _ => None,
        }
    };
    integrate(params_radii_two(params), t_end, dt, &rhs)
}

fn params_radii_two(params: &TwoCircleParams) -> [f64; 2] {
    [params.r1_init, params.r2_init]
}

fn integrate<const N: usize>(
    y0: [f64; N],
    t_end: f64,
    dt: f64,
    rhs: &dyn Fn([f64; N]) -> Option<[f64; N]>,
) -> RadiiTrajectory {
    let mut times = vec![0.0];
    let mut radii = vec![y0.to_vec()];
    let mut y = y0;
    let mut t = 0.0;
    let mut stopped = false;
    while t < t_end - 1e-14 * t_end.max(1.0) {
        let step = dt.min(t_end - t);
        match rk4_step(y, step, rhs) {
            Some(next) if next.iter().all(|v| v.is_finite() && *v > 0.0) => {
                y = next;
                t += step;
                times.push(t);
                radii.push(y.to_vec());
            }
            _ => {
                stopped = true;
                break;
            }
        }
    }
    RadiiTrajectory { times, radii, stopped_early: stopped }
}

/// The scalar reduction `dR2/dt = -F(R2)` of the two-circle system.
fn scalar_rate_f(params: &TwoCircleParams, u: f64) -> Result<f64> {
    let r1 = params.r1_of_r2(u)?;
    Ok(alpha2(r1, u, params)? / (params.jumps[1] * u))
}

/// Outer radius at time `t` by quadrature of `1/F` plus bisection, the
/// route independent of the RK4 integrator.
pub fn radius_rootfind_two(params: &TwoCircleParams, t: f64) -> Result<f64> {
    let r20 = params.r2_init;
    if t == 0.0 {
        return Ok(r20);
    }
    let f0 = scalar_rate_f(params, r20)?;
    if f0.abs() < 1e-14 * (1.0 + 1.0 / r20) {
        // stationary pair: R2 never moves
        return Ok(r20);
    }
    // g(R) = t + ∫_{R2(0)}^{R} du / F(u); we search for g(R) = 0 on the side
    // R2 actually moves towards (sign of dR2/dt = -F).
    let g = |r: f64| -> Result<f64> {
        let integral = adaptive_simpson(
            &|u| scalar_rate_f(params, u).map(|f| 1.0 / f),
            r20,
            r,
            1e-12 * (1.0 + t),
            48,
        )?;
        Ok(t + integral)
    };
    let dir = if -f0 > 0.0 { 1.0 } else { -1.0 };
    let mut step = 1e-3 * r20;
    let mut lo = r20;
    let mut hi;
    let g_lo = g(lo)?; // = t > 0
    loop {
        hi = lo + dir * step;
        if hi <= 0.0 {
            return Err(Error::RootBracket(format!(
                "no sign change of the time residual before r2 reached 0 (t = {t})"
            )));
        }
        match g(hi) {
            Ok(v) if v.signum() != g_lo.signum() => break,
            Ok(_) => {
                lo = hi;
                step *= 2.0;
            }
            Err(_) => {
                // hit the domain boundary of F (inner radius vanished)
                return Err(Error::RootBracket(format!(
                    "trajectory leaves the admissible radius range before t = {t}"
                )));
            }
        }
    }
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut ga = g(a)?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let gm = g(mid)?;
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
        if b - a <= 1e-13 * (1.0 + b.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        Ok(simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
}

/// Exact bulk potential of the two-circle solution at distance `r` from the
/// common center, for current radii `(r1, r2)`.
pub fn exact_w_two(r: f64, r1: f64, r2: f64, params: &TwoCircleParams) -> f64 {
    if r < r1 {
        -1.0 / (params.jumps[0] * r1)
    } else if r < r2 {
        let a = (1.0 / (params.jumps[0] * r1) + 1.0 / (params.jumps[1] * r2)) / (r2 / r1).ln();
        -1.0 / (params.jumps[0] * r1) + a * (r / r1).ln()
    } else {
        1.0 / (params.jumps[1] * r2)
    }
}

/// Three concentric circles with radii `r1 < r2 < r3`. Phase 1 is the inner
/// disk together with the exterior (a disconnected phase), phase 2 the inner
/// annulus, phase 3 the outer annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeCircleParams {
    /// Per-circle β jumps in curve order: `[β1 - β2, β3 - β2, β3 - β1]`.
    pub jumps: [f64; 3],
    pub r_init: [f64; 3],
}

impl ThreeCircleParams {
    pub fn new(jumps: [f64; 3], r_init: [f64; 3]) -> Result<Self> {
        if jumps.contains(&0.0) {
            return Err(Error::Domain("three-circle jumps must be nonzero".into()));
        }
        if !(0.0 < r_init[0] && r_init[0] < r_init[1] && r_init[1] < r_init[2]) {
            return Err(Error::Domain(format!(
                "three-circle radii must be positive and increasing, got {r_init:?}"
            )));
        }
        Ok(ThreeCircleParams { jumps, r_init })
    }

    pub fn from_betas(betas: [f64; 3], r_init: [f64; 3]) -> Result<Self> {
        Self::new(
            [betas[0] - betas[1], betas[2] - betas[1], betas[2] - betas[0]],
            r_init,
        )
    }

    /// Conserved combination of the squared radii.
    pub fn conserved(&self, r: &[f64]) -> f64 {
        self.jumps[0] * r[0] * r[0] - self.jumps[1] * r[1] * r[1] + self.jumps[2] * r[2] * r[2]
    }
}

/// Right-hand sides of the three-circle radii ODE system.
pub fn three_circle_rates(params: &ThreeCircleParams, r: [f64; 3]) -> Result<[f64; 3]> {
    let [j21, j23, j13] = params.jumps;
    let [r1, r2, r3] = r;
    if r2 - r1 < 1e-12 || r3 - r2 < 1e-12 {
        return Err(Error::Domain("three-circle radii coincide".into()));
    }
    let inner = 1.0 / (j23 * r2) + 1.0 / (j21 * r1);
    let outer = 1.0 / (j23 * r2) + 1.0 / (j13 * r3);
    let d1 = -inner / (j21 * r1 * (r2 / r1).ln());
    let d2 = (outer / (r2 / r3).ln() - inner / (r2 / r1).ln()) / (j23 * r2);
    let d3 = outer / (j13 * r3 * (r2 / r3).ln());
    Ok([d1, d2, d3])
}

/// RK4 trajectory of the three-circle radii system over `[0, t_end]`, with
/// the same early-stop behavior as [`radii_ode_two`].
pub fn radii_ode_three(params: &ThreeCircleParams, t_end: f64, dt: f64) -> RadiiTrajectory {
    let p = *params;
    let floor = dt.max(1e-10);
    let rhs = move |y: [f64; 3]| -> Option<[f64; 3]> {
        if y[0] <= floor || y[1] - y[0] <= 1e-9 * y[1] || y[2] - y[1] <= 1e-9 * y[2] {
            return None;
        }
        match three_circle_rates(&p, y) {
            Ok(d) if d.iter().all(|v| v.is_finite()) => Some(d),
            _ => None,
        }
    };
    integrate(params.r_init, t_end, dt, &rhs)
}

/// Exact bulk potential of the three-circle solution at distance `r` from
/// the common center.
pub fn exact_w_three(r: f64, radii: [f64; 3], params: &ThreeCircleParams) -> f64 {
    let [j21, j23, j13] = params.jumps;
    let [r1, r2, r3] = radii;
    if r < r1 {
        -1.0 / (j21 * r1)
    } else if r < r2 {
        (1.0 / (j23 * r2) + 1.0 / (j21 * r1)) / (r2 / r1).ln() * (r / r1).ln() - 1.0 / (j21 * r1)
    } else if r < r3 {
        (1.0 / (j23 * r2) + 1.0 / (j13 * r3)) / (r2 / r3).ln() * (r / r3).ln() - 1.0 / (j13 * r3)
    } else {
        -1.0 / (j13 * r3)
    }
}
