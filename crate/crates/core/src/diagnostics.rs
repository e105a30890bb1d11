//! Measurable quantities along a run: umbilicity and gradient deviations,
//! rescaled graphs, the substitution `π = ∫ ϑ⁻¹`, conformal ball-model
//! radii, exponential decay fits, and the barrier envelope check.

use serde::Serialize;

use crate::barrier::BarrierSolution;
use crate::error::{Error, Result};
use crate::hypersurface::{check_positive, ShapeData};
use crate::sphere::{stats_of, GradientField, GridMode, HessianField, ScalarField};

/// `max_{x,i} |κᵢ − 1|`.
pub fn umbilicity_deviation(shape: &ShapeData) -> f64 {
    shape.kappa_rows().flatten().map(|k| (k - 1.0).abs()).fold(0.0, f64::max)
}

/// `sup v − 1`.
pub fn gradient_deviation(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max) - 1.0
}

/// `coth r − 1 = 2/(e^{2r} − 1)`, accurate for large `r`.
#[inline]
pub fn coth_minus_one(r: f64) -> f64 {
    2.0 / (2.0 * r).exp_m1()
}

/// `sup_x (coth u − 1)`, attained where `u` is smallest.
pub fn coth_deviation(u: &[f64]) -> f64 {
    u.iter().map(|&r| coth_minus_one(r)).fold(f64::NEG_INFINITY, f64::max)
}

/// `û = u − t/nᵖ`.
pub fn rescaled_hat(u: &ScalarField, t: f64, n: usize, p: f64) -> ScalarField {
    let shift = t / (n as f64).powf(p);
    u.map(|x| x - shift).expect("shift of a finite field is finite")
}

/// `ũ = u/t`.
pub fn rescaled_tilde(u: &ScalarField, t: f64) -> Result<ScalarField> {
    if t == 0.0 {
        return Err(Error::DivisionByZeroTime);
    }
    u.map(|x| x / t)
}

pub fn rescaled_graph(u: &ScalarField, t: f64, n: usize, p: f64) -> Result<(ScalarField, ScalarField)> {
    Ok((rescaled_hat(u, t, n, p), rescaled_tilde(u, t)?))
}

/// `∫_{r₀}^{u} dr/sinh r = ln tanh(u/2) − ln tanh(r₀/2)`.
#[inline]
pub fn pi_closed_form(u: f64, r0: f64) -> f64 {
    (u / 2.0).tanh().ln() - (r0 / 2.0).tanh().ln()
}

pub fn substitution_pi(u: &ScalarField, r0: f64) -> Result<ScalarField> {
    check_positive(u.values())?;
    if !(r0 > 0.0) {
        return Err(Error::NonPositiveRadius { node: 0, value: r0 });
    }
    u.map(|x| pi_closed_form(x, r0))
}

/// Per-node `|Dπ|_σ` and `|D²π|_σ` (Frobenius norm with respect to `σ`),
/// from `πⱼ = ϑ⁻¹uⱼ` and `π_jk = −ϑ⁻²ϑ̇uⱼu_k + ϑ⁻¹u_jk`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiNorms {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

pub fn pi_derivative_norms(u: &ScalarField, du: &GradientField, d2u: &HessianField) -> Result<PiNorms> {
    check_positive(u.values())?;
    let grid = u.grid();
    // azimuthal multiplicity in the reduced frame
    let mult = (grid.n() - 1) as f64;
    let full = grid.mode() == GridMode::Full2d;
    let mut grad = Vec::with_capacity(u.len());
    let mut hess = Vec::with_capacity(u.len());
    for (i, &r) in u.values().iter().enumerate() {
        let (th, thd) = (r.sinh(), r.cosh());
        grad.push(du.norm_sq(i).sqrt() / th);
        let [ut, up] = du.at(i);
        let [htt, htp, hpp] = d2u.at(i);
        let ptt = -thd / (th * th) * ut * ut + htt / th;
        let ptp = -thd / (th * th) * ut * up + htp / th;
        let ppp = -thd / (th * th) * up * up + hpp / th;
        let s2 = grid.theta_of(i).sin().powi(2);
        let norm_sq = if full {
            ptt * ptt + 2.0 * ptp * ptp / s2 + ppp * ppp / (s2 * s2)
        } else {
            ptt * ptt + mult * ppp * ppp / (s2 * s2)
        };
        hess.push(norm_sq.sqrt());
    }
    Ok(PiNorms { grad, hess })
}

/// Ball model of radius 2 with conformal factor `(1 − r²/4)⁻¹`:
/// ball radius `r = 2·tanh(τ/2)` for geodesic radius `τ`.
pub fn ball_model_radius(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!("geodesic radius must be positive, got {tau}")));
    }
    Ok(2.0 * (tau / 2.0).tanh())
}

/// `τ = ln(2 + r) − ln(2 − r)`.
pub fn geodesic_radius(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 2.0) {
        return Err(Error::OutOfModelRange(r));
    }
    Ok((2.0 + r).ln() - (2.0 - r).ln())
}

/// `e^ψ = (1 − r²/4)⁻¹`.
pub fn conformal_factor(r: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&r) {
        return Err(Error::OutOfModelRange(r));
    }
    Ok(1.0 / (1.0 - r * r / 4.0))
}

/// `y ≈ c·e^{−λt}` from least squares on `ln y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub lambda: f64,
    pub c: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

pub fn fit_decay_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::FitWindowInvalid("times and values differ in length".into()));
    }
    let (t1, t2) = window;
    if !(t1 < t2) {
        return Err(Error::FitWindowInvalid(format!("empty window [{t1}, {t2}]")));
    }
    let mut pts = Vec::new();
    for (&t, &y) in times.iter().zip(values) {
        if t < t1 || t > t2 {
            continue;
        }
        if !(y > 0.0) {
            return Err(Error::NonPositiveSample { t, value: y });
        }
        pts.push((t, y.ln()));
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::FitWindowInvalid(format!(
            "{} samples in [{t1}, {t2}], need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a flat series is fitted exactly by λ = 0
    let r2 = if ss_tot <= f64::EPSILON * ym.abs().max(1.0) * m {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFit { lambda: -slope, c: intercept.exp(), r2, window, samples: pts.len() })
}

/// Observables at one sampled time. `utilde_osc` is absent at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub osc_u: f64,
    pub sup_v_minus_1: f64,
    pub sup_kappa_dev: f64,
    pub coth_dev: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub sup_dpi: f64,
    pub sup_d2pi: f64,
    pub uhat_sup: f64,
    pub uhat_inf: f64,
    pub utilde_osc: Option<f64>,
    pub dt: f64,
}

pub const CSV_HEADER: [&str; 15] = [
    "t",
    "sup_u",
    "inf_u",
    "osc_u",
    "sup_v_minus_1",
    "sup_kappa_dev",
    "coth_dev",
    "F_min",
    "F_max",
    "sup_Dpi",
    "sup_D2pi",
    "uhat_sup",
    "uhat_inf",
    "utilde_osc",
    "dt",
];

impl DiagnosticsRow {
    #[allow(clippy::too_many_arguments)]
    pub fn measure(
        t: f64,
        n: usize,
        p: f64,
        u: &ScalarField,
        du: &GradientField,
        d2u: &HessianField,
        shape: &ShapeData,
        f_values: &[f64],
        dt: f64,
    ) -> Result<Self> {
        let stats = stats_of(u.values());
        let pi = pi_derivative_norms(u, du, d2u)?;
        let shift = t / (n as f64).powf(p);
        let (f_min, f_max) = f_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| (lo.min(f), hi.max(f)));
        Ok(DiagnosticsRow {
            t,
            sup_u: stats.sup,
            inf_u: stats.inf,
            osc_u: stats.osc,
            sup_v_minus_1: gradient_deviation(shape.tilt()),
            sup_kappa_dev: umbilicity_deviation(shape),
            coth_dev: coth_minus_one(stats.inf),
            f_min,
            f_max,
            sup_dpi: pi.grad.iter().copied().fold(0.0, f64::max),
            sup_d2pi: pi.hess.iter().copied().fold(0.0, f64::max),
            uhat_sup: stats.sup - shift,
            uhat_inf: stats.inf - shift,
            utilde_osc: (t > 0.0).then(|| stats.osc / t),
            dt,
        })
    }

    /// Values in CSV column order; the absent `utilde_osc` is `None`.
    pub fn columns(&self) -> [Option<f64>; 15] {
        [
            Some(self.t),
            Some(self.sup_u),
            Some(self.inf_u),
            Some(self.osc_u),
            Some(self.sup_v_minus_1),
            Some(self.sup_kappa_dev),
            Some(self.coth_dev),
            Some(self.f_min),
            Some(self.f_max),
            Some(self.sup_dpi),
            Some(self.sup_d2pi),
            Some(self.uhat_sup),
            Some(self.uhat_inf),
            self.utilde_osc,
            Some(self.dt),
        ]
    }

    /// `w = ½·sup|Dπ|²`.
    pub fn pi_w(&self) -> f64 {
        0.5 * self.sup_dpi * self.sup_dpi
    }
}

/// A time series of diagnostics rows with strictly increasing times.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
}

/// Monitored series that admit a decay fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecaySeries {
    KappaDev,
    VMinus1,
    CothDev,
    PiW,
}

impl DecaySeries {
    pub const ALL: [DecaySeries; 4] =
        [DecaySeries::KappaDev, DecaySeries::VMinus1, DecaySeries::CothDev, DecaySeries::PiW];

    pub fn key(self) -> &'static str {
        match self {
            DecaySeries::KappaDev => "kappa_dev",
            DecaySeries::VMinus1 => "v_minus_1",
            DecaySeries::CothDev => "coth_dev",
            DecaySeries::PiW => "pi_w",
        }
    }

    fn pick(self, row: &DiagnosticsRow) -> f64 {
        match self {
            DecaySeries::KappaDev => row.sup_kappa_dev,
            DecaySeries::VMinus1 => row.sup_v_minus_1,
            DecaySeries::CothDev => row.coth_dev,
            DecaySeries::PiW => row.pi_w(),
        }
    }
}

impl DiagnosticsSeries {
    pub fn push(&mut self, row: DiagnosticsRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.t < row.t), "times must increase");
        self.rows.push(row);
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn values(&self, which: DecaySeries) -> Vec<f64> {
        self.rows.iter().map(|r| which.pick(r)).collect()
    }

    pub fn last(&self) -> Option<&DiagnosticsRow> {
        self.rows.last()
    }

    /// The row sampled at time `t`, if any.
    pub fn at(&self, t: f64) -> Option<&DiagnosticsRow> {
        self.rows.iter().find(|r| (r.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// Last 60% of the run, further restricted to samples with
    /// `sup|κᵢ − 1| < 0.1`.
    pub fn default_fit_window(&self) -> Option<(f64, f64)> {
        let t_end = self.rows.last()?.t;
        let start = 0.4 * t_end;
        let t1 = self.rows.iter().find(|r| r.t >= start && r.sup_kappa_dev < 0.1)?.t;
        (t1 < t_end).then_some((t1, t_end))
    }

    pub fn fit(&self, which: DecaySeries, window: (f64, f64)) -> Result<DecayFit> {
        fit_decay_rate(&self.times(), &self.values(which), window)
    }
}

/// Worst violations of `Θ(t, inf u₀) ≤ u(t, ·) ≤ Θ(t, sup u₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares sampled `inf u` and `sup u` against barrier solutions sampled at
/// the same times. Violations are clamped at zero.
pub fn barrier_envelope_check(
    series: &DiagnosticsSeries,
    lower: &BarrierSolution,
    upper: &BarrierSolution,
    tolerance: f64,
) -> EnvelopeReport {
    assert_eq!(series.rows.len(), lower.theta.len(), "lower barrier not sampled on series times");
    assert_eq!(series.rows.len(), upper.theta.len(), "upper barrier not sampled on series times");
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for ((row, tl), tu) in series.rows.iter().zip(&lower.theta).zip(&upper.theta) {
        lo = lo.max(tl - row.inf_u);
        hi = hi.max(row.sup_u - tu);
    }
    EnvelopeReport {
        max_lower_violation: lo,
        max_upper_violation: hi,
        tolerance,
        pass: lo <= tolerance && hi <= tolerance,
    }
}
