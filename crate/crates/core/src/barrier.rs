//! Spherical barriers: geodesic spheres stay spheres under the flow and
//! their radius solves `Θ̇ = n⁻ᵖ·coth⁻ᵖΘ`, `Θ(0) = r₀`.

use serde::Serialize;

/// Relative tolerance of the adaptive integrator.
pub const BARRIER_RTOL: f64 = 1e-10;
const BARRIER_ATOL: f64 = 1e-13;

/// Right-hand side `n⁻ᵖ·tanhᵖΘ`.
#[inline]
pub fn barrier_rate(theta: f64, n: usize, p: f64) -> f64 {
    ((theta.tanh()) / n as f64).powf(p)
}

/// `sinh Θ = sinh r₀·e^{t/n}`, the closed form for `p = 1`.
pub fn barrier_theta_p1(t: f64, r0: f64, n: usize) -> f64 {
    // asinh(x) loses nothing here; for huge t go through logs
    let x = r0.sinh().ln() + t / n as f64;
    if x < 30.0 {
        x.exp().asinh()
    } else {
        x + std::f64::consts::LN_2 + (-2.0 * x).exp() / 4.0
    }
}

/// Adaptive Dormand–Prince 5(4) for a scalar autonomous ODE from `t0` to `t1`.
fn dopri_scalar(f: impl Fn(f64) -> f64, mut y: f64, t0: f64, t1: f64, rtol: f64, atol: f64) -> f64 {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // 5th-order minus embedded 4th-order weights
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let span = t1 - t0;
    if span <= 0.0 {
        return y;
    }
    let mut t = t0;
    let mut h = (span / 100.0).min(0.1);
    let mut k = [0.0; 7];
    k[0] = f(y);
    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            let acc: f64 = (0..s).map(|j| A[s - 1][j] * k[j]).sum();
            k[s] = f(y + h * acc);
        }
        // k[6] was evaluated at the 5th-order solution (FSAL)
        let y_new = y + h * (0..6).map(|j| A[5][j] * k[j]).sum::<f64>();
        let err = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();
        if ratio <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k[0] = k[6];
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Barrier radius `Θ(t, r₀)` by adaptive integration to relative
/// tolerance `1e-10`.
pub fn barrier_theta(t: f64, r0: f64, n: usize, p: f64) -> f64 {
    assert!(r0 > 0.0 && t >= 0.0, "barrier needs r0 > 0 and t >= 0");
    dopri_scalar(|th| barrier_rate(th, n, p), r0, 0.0, t, BARRIER_RTOL, BARRIER_ATOL)
}

/// Barrier sampled at a sorted list of times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierSolution {
    pub r0: f64,
    pub n: usize,
    pub p: f64,
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
}

impl BarrierSolution {
    /// Integrates through `times` (nondecreasing, starting at or after 0).
    pub fn solve(r0: f64, n: usize, p: f64, times: &[f64]) -> Self {
        assert!(r0 > 0.0, "barrier needs r0 > 0");
        let mut theta = Vec::with_capacity(times.len());
        let (mut t, mut y) = (0.0, r0);
        for &ti in times {
            assert!(ti >= t, "barrier sample times must be nondecreasing");
            y = dopri_scalar(|th| barrier_rate(th, n, p), y, t, ti, BARRIER_RTOL, BARRIER_ATOL);
            t = ti;
            theta.push(y);
        }
        BarrierSolution { r0, n, p, times: times.to_vec(), theta }
    }
}

/// Affine enclosure `r₀ + t/(nᵖcothᵖr₀) ≤ Θ ≤ r₀ + t/nᵖ` and the observed
/// band `sup |Θ − t/nᵖ|` over `[0, t]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierBounds {
    pub lower: f64,
    pub upper: f64,
    pub asymptote_band: f64,
}

const BAND_SAMPLES: usize = 200;

pub fn barrier_bounds(t: f64, r0: f64, n: usize, p: f64) -> BarrierBounds {
    let np = (n as f64).powf(p);
    let lower = r0 + t * barrier_rate(r0, n, p);
    let upper = r0 + t / np;
    let times: Vec<f64> = (0..=BAND_SAMPLES).map(|k| t * k as f64 / BAND_SAMPLES as f64).collect();
    let sol = BarrierSolution::solve(r0, n, p, &times);
    let asymptote_band = sol
        .times
        .iter()
        .zip(&sol.theta)
        .map(|(ti, th)| (th - ti / np).abs())
        .fold(0.0, f64::max);
    BarrierBounds { lower, upper, asymptote_band }
}
