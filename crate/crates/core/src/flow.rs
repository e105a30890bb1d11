//! Method-of-lines integration of the scalar flow `u̇ = v·F(κ)⁻ᵖ` with
//! classical RK4 under a parabolic step restriction.

use std::sync::Arc;

use serde::Serialize;

use crate::curvature::{CurvatureFunction, CurvatureKind};
use crate::diagnostics::{DiagnosticsRow, DiagnosticsSeries};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hypersurface::{check_positive, shape_operator_with, CurvatureCone, RadialGraph, ShapeData};
use crate::sphere::{
    covariant_gradient_with, covariant_hessian_with, GradientField, GridMode, HessianField, ScalarField,
    SphericalGrid,
};

/// Smallest time step the engine accepts.
pub const DT_MIN: f64 = 1e-10;
/// Maximum number of step halvings after an admissibility failure.
pub const MAX_HALVINGS: u32 = 20;

/// The default admissibility cone: the function's own cone for `p ≤ 1`,
/// `Γ₊` for `p > 1`.
pub fn default_cone(function: CurvatureKind, n: usize, p: f64) -> CurvatureCone {
    if p > 1.0 {
        CurvatureCone::PositiveCone
    } else {
        CurvatureFunction::new(function, n).cone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowParams {
    pub n: usize,
    pub p: f64,
    pub function: CurvatureKind,
    pub cone: CurvatureCone,
    pub mode: GridMode,
    pub resolution: usize,
    pub t_end: f64,
    pub cfl: f64,
    /// Spacing of diagnostics samples; also the largest allowed step.
    pub cadence: f64,
    pub snapshot_times: Vec<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl FlowParams {
    /// Parameters with the usual defaults: axisymmetric grid of resolution
    /// 64, `t_end = 10`, `cfl = 0.2`, cadence `0.05`.
    pub fn new(n: usize, p: f64, function: CurvatureKind) -> Self {
        FlowParams {
            n,
            p,
            function,
            cone: default_cone(function, n, p),
            mode: GridMode::Axisymmetric,
            resolution: 64,
            t_end: 10.0,
            cfl: 0.2,
            cadence: 0.05,
            snapshot_times: Vec::new(),
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 2 {
            return bad(format!("dimension n must be at least 2, got {}", self.n));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad(format!("power p must be positive, got {}", self.p));
        }
        if self.p > 1.0 && self.cone != CurvatureCone::PositiveCone {
            return bad(format!("p = {} > 1 requires the cone positive_cone, got {}", self.p, self.cone));
        }
        let own = self.curvature().cone();
        if !self.cone.is_subset_of(own) {
            return bad(format!("{} is only defined on {own}, which does not contain {}", self.function, self.cone));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("cfl must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.cadence > 0.0 && self.cadence.is_finite()) {
            return bad(format!("cadence must be positive, got {}", self.cadence));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return bad(format!("snapshot time {t} outside [0, {}]", self.t_end));
        }
        Ok(())
    }

    pub fn curvature(&self) -> CurvatureFunction {
        CurvatureFunction::new(self.function, self.n)
    }

    pub fn build_grid(&self) -> Result<Arc<SphericalGrid>> {
        Ok(Arc::new(SphericalGrid::build(self.n, self.mode, self.resolution)?))
    }

    /// `nᵖ`, the asymptotic inverse expansion rate.
    pub fn n_pow_p(&self) -> f64 {
        (self.n as f64).powf(self.p)
    }
}

/// Legendre polynomial `P_ℓ(x)` by the three-term recurrence.
pub fn legendre(l: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Initial radial functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Constant { r0: f64 },
    /// `u₀(θ) = r₀ + a·P_ℓ(cos θ)`, `ℓ ∈ {2, 3, 4}`.
    Legendre { r0: f64, l: u32, amplitude: f64 },
    /// Explicit node values in grid order.
    Table { values: Vec<f64> },
}

impl InitialCondition {
    pub fn sample(&self, grid: Arc<SphericalGrid>) -> Result<ScalarField> {
        let field = match self {
            InitialCondition::Constant { r0 } => ScalarField::constant(grid, *r0)?,
            InitialCondition::Legendre { r0, l, amplitude } => {
                if !(2..=4).contains(l) {
                    return Err(Error::InvalidParams(format!("Legendre degree must be 2, 3 or 4, got {l}")));
                }
                if grid.mode() == GridMode::SphericalOde {
                    return Err(Error::InvalidParams("the spherical_ode grid only carries constant data".into()));
                }
                ScalarField::from_fn(grid, |t, _| r0 + amplitude * legendre(*l, t.cos()))?
            }
            InitialCondition::Table { values } => ScalarField::new(grid, values.clone())?,
        };
        check_positive(field.values())?;
        Ok(field)
    }
}

/// Everything the right-hand side computes for one radial function.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub grad: GradientField,
    pub hess: HessianField,
    pub shape: ShapeData,
    /// `F(κ)` per node.
    pub f: Vec<f64>,
    /// `u̇ = v·F⁻ᵖ` per node.
    pub udot: Vec<f64>,
    /// Parabolic coefficient `p·F^{−(p+1)}·ΣFⁱ/(v·ϑ²)` per node.
    pub diffusion: Vec<f64>,
}

/// Evaluates the flow's right-hand side at `(u, t)`, checking admissibility
/// at every node.
pub fn evaluate(u: &ScalarField, t: f64, params: &FlowParams) -> Result<Evaluation> {
    check_positive(u.values())?;
    let exec = params.exec;
    let grad = covariant_gradient_with(u, exec);
    let hess = covariant_hessian_with(u, exec);
    let shape = shape_operator_with(u, &grad, &hess, exec)?;
    let func = params.curvature();
    let (p, cone) = (params.p, params.cone);
    let vals = u.values();
    let per_node = exec.try_map(vals.len(), |i| {
        let kappa = shape.kappa(i);
        let margin = cone.margin(kappa);
        if !(margin > 0.0) {
            return Err(Error::AdmissibilityLost { t, node: i, margin });
        }
        let (f, trace) = func
            .eval_with_trace(kappa)
            .map_err(|_| Error::AdmissibilityLost { t, node: i, margin })?;
        let v = shape.node(i).v;
        let fp = f.powf(-p);
        let th = vals[i].sinh();
        Ok((f, v * fp, p * fp / f * trace / (v * th * th)))
    })?;
    let mut f = Vec::with_capacity(per_node.len());
    let mut udot = Vec::with_capacity(per_node.len());
    let mut diffusion = Vec::with_capacity(per_node.len());
    for (a, b, c) in per_node {
        f.push(a);
        udot.push(b);
        diffusion.push(c);
    }
    Ok(Evaluation { grad, hess, shape, f, udot, diffusion })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub graph: RadialGraph,
    pub eval: Evaluation,
    pub step: usize,
    pub last_dt: f64,
}

impl FlowState {
    /// Admissibility-gated initial state.
    pub fn initial(u0: ScalarField, params: &FlowParams) -> Result<Self> {
        params.validate()?;
        let eval = evaluate(&u0, 0.0, params).map_err(|e| match e {
            Error::AdmissibilityLost { node, margin, .. } => Error::InadmissibleInitialData { node, margin },
            other => other,
        })?;
        Ok(FlowState { graph: RadialGraph { u: u0, t: 0.0 }, eval, step: 0, last_dt: 0.0 })
    }

    pub fn t(&self) -> f64 {
        self.graph.t
    }

    pub fn u(&self) -> &ScalarField {
        &self.graph.u
    }

    pub fn row(&self, params: &FlowParams) -> Result<DiagnosticsRow> {
        DiagnosticsRow::measure(
            self.t(),
            params.n,
            params.p,
            self.u(),
            &self.eval.grad,
            &self.eval.hess,
            &self.eval.shape,
            &self.eval.f,
            self.last_dt,
        )
    }
}

/// `u̇` at the current state.
pub fn rhs(state: &FlowState) -> ScalarField {
    ScalarField::new(state.u().grid().clone(), state.eval.udot.clone()).expect("rhs is finite")
}

/// `Δt = cfl·h²_min/D_max`, capped at the cadence. The ODE grid has no
/// spatial restriction and steps at the cadence.
pub fn step_size(state: &FlowState, params: &FlowParams) -> Result<f64> {
    let Some(h) = state.u().grid().min_spacing() else {
        return Ok(params.cadence);
    };
    let d_max = state.eval.diffusion.iter().copied().fold(0.0, f64::max);
    let dt = if d_max > 0.0 { params.cfl * h * h / d_max } else { params.cadence };
    if dt < DT_MIN {
        return Err(Error::StepSizeUnderflow { t: state.t(), dt });
    }
    Ok(dt.min(params.cadence))
}

fn axpy(base: &[f64], dt: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(u, k)| u + dt * k).collect()
}

fn rk4_try(state: &FlowState, dt: f64, params: &FlowParams) -> Result<FlowState> {
    let grid = state.u().grid().clone();
    let t = state.t();
    let u = state.u().values();
    let k1 = &state.eval.udot;
    let field = |vals: Vec<f64>| -> Result<ScalarField> {
        check_positive(&vals)?;
        ScalarField::new(grid.clone(), vals)
    };
    let e2 = evaluate(&field(axpy(u, 0.5 * dt, k1))?, t + 0.5 * dt, params)?;
    let e3 = evaluate(&field(axpy(u, 0.5 * dt, &e2.udot))?, t + 0.5 * dt, params)?;
    let e4 = evaluate(&field(axpy(u, dt, &e3.udot))?, t + dt, params)?;
    let next: Vec<f64> = (0..u.len())
        .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * e2.udot[i] + 2.0 * e3.udot[i] + e4.udot[i]))
        .collect();
    let next = field(next)?;
    let eval = evaluate(&next, t + dt, params)?;
    Ok(FlowState { graph: RadialGraph { u: next, t: t + dt }, eval, step: state.step + 1, last_dt: dt })
}

/// One RK4 step. A step whose stages leave the cone (or the positive
/// radii) is retried with half the step, at most [`MAX_HALVINGS`] times.
pub fn advance(state: &FlowState, dt: f64, params: &FlowParams) -> Result<FlowState> {
    let mut dt = dt;
    let mut halvings = 0;
    loop {
        match rk4_try(state, dt, params) {
            Ok(next) => return Ok(next),
            Err(e @ (Error::AdmissibilityLost { .. } | Error::NonPositiveRadius { .. })) => {
                if halvings == MAX_HALVINGS {
                    return Err(e);
                }
                halvings += 1;
                dt *= 0.5;
                if dt < DT_MIN {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Radial function and curvature range at a snapshot time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub kappa_min: f64,
    pub kappa_max: f64,
}

impl Snapshot {
    pub fn of(state: &FlowState) -> Self {
        let (kappa_min, kappa_max) = state.eval.shape.kappa_range();
        Snapshot { t: state.t(), u: state.u().values().to_vec(), kappa_min, kappa_max }
    }
}

/// Read-only views handed to a run observer.
pub enum FlowEvent<'a> {
    Sample { state: &'a FlowState, row: &'a DiagnosticsRow },
    Snapshot { state: &'a FlowState },
}

struct Stop {
    t: f64,
    sample: bool,
    snapshot: bool,
}

fn schedule(params: &FlowParams) -> Vec<Stop> {
    let eps = 1e-12 * params.t_end.max(1.0);
    let mut stops: Vec<Stop> = Vec::new();
    let count = (params.t_end / params.cadence - 1e-9).floor() as usize;
    for k in 0..=count {
        stops.push(Stop { t: k as f64 * params.cadence, sample: true, snapshot: false });
    }
    stops.push(Stop { t: params.t_end, sample: true, snapshot: false });
    for &t in &params.snapshot_times {
        stops.push(Stop { t, sample: false, snapshot: true });
    }
    stops.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut merged: Vec<Stop> = Vec::with_capacity(stops.len());
    for s in stops {
        match merged.last_mut() {
            Some(last) if (s.t - last.t).abs() <= eps => {
                last.sample |= s.sample;
                last.snapshot |= s.snapshot;
            }
            _ => merged.push(s),
        }
    }
    merged
}

/// Runs the flow from `u0` to `t_end`, reporting samples and snapshots to
/// `observer` as they are reached. Returns the final state.
pub fn run_observed(
    params: &FlowParams,
    u0: ScalarField,
    mut observer: impl FnMut(FlowEvent<'_>) -> Result<()>,
) -> Result<FlowState> {
    params.validate()?;
    let grid = u0.grid();
    if grid.n() != params.n || grid.mode() != params.mode {
        return Err(Error::GridMismatch);
    }
    let mut state = FlowState::initial(u0, params)?;
    let eps = 1e-12 * params.t_end.max(1.0);
    for stop in schedule(params) {
        while stop.t - state.t() > eps {
            let remaining = stop.t - state.t();
            let dt = step_size(&state, params)?;
            let last = dt >= remaining - eps;
            state = advance(&state, if last { remaining } else { dt }, params)?;
            if (state.t() - stop.t).abs() <= eps {
                state.graph.t = stop.t;
            }
        }
        if stop.sample {
            let row = state.row(params)?;
            observer(FlowEvent::Sample { state: &state, row: &row })?;
        }
        if stop.snapshot {
            observer(FlowEvent::Snapshot { state: &state })?;
        }
    }
    Ok(state)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub series: DiagnosticsSeries,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FlowState,
}

pub fn run(params: &FlowParams, u0: ScalarField) -> Result<RunOutput> {
    let mut series = DiagnosticsSeries::default();
    let mut snapshots = Vec::new();
    let final_state = run_observed(params, u0, |ev| {
        match ev {
            FlowEvent::Sample { row, .. } => series.push(*row),
            FlowEvent::Snapshot { state } => snapshots.push(Snapshot::of(state)),
        }
        Ok(())
    })?;
    Ok(RunOutput { series, snapshots, final_state })
}

/// Convenience: sample `initial` on the grid described by `params` and run.
pub fn run_from(params: &FlowParams, initial: &InitialCondition) -> Result<RunOutput> {
    let u0 = initial.sample(params.build_grid()?)?;
    run(params, u0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{barrier_rate, barrier_theta_p1};

    fn sphere_state(params: &FlowParams, r0: f64) -> FlowState {
        let u0 = InitialCondition::Constant { r0 }.sample(params.build_grid().unwrap()).unwrap();
        FlowState::initial(u0, params).unwrap()
    }

    #[test]
    fn legendre_values() {
        for x in [-1.0, -0.3, 0.0, 0.4, 1.0] {
            assert!((legendre(2, x) - (3.0 * x * x - 1.0) / 2.0).abs() < 1e-15);
            assert!((legendre(3, x) - (5.0 * x * x * x - 3.0 * x) / 2.0).abs() < 1e-15);
            assert!((legendre(4, x) - (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_on_sphere() {
        let params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        let s = sphere_state(&params, 1.0);
        let r = rhs(&s);
        for &x in r.values() {
            assert!((x - 0.3807970779778824).abs() < 1e-15);
        }
        for &(n, p, kind) in &[(2, 0.5, CurvatureKind::GaussRoot), (3, 2.0, CurvatureKind::Sigma2Root)] {
            let mut params = FlowParams::new(n, p, kind);
            params.resolution = 16;
            let s = sphere_state(&params, 0.8);
            let expect = barrier_rate(0.8, n, p);
            assert!(s.eval.udot.iter().all(|x| (x - expect).abs() < 1e-14 * expect));
        }
    }

    #[test]
    fn step_size_examples() {
        let params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        let s = sphere_state(&params, 1.0);
        let dt = step_size(&s, &params).unwrap();
        assert!((dt - 0.0022949700952913958).abs() < 1e-15, "{dt}");

        let mut fine = params.clone();
        fine.resolution = 128;
        let dt2 = step_size(&sphere_state(&fine, 1.0), &fine).unwrap();
        assert!((dt / dt2 - 4.0).abs() < 1e-12);

        // d/dp [p·F^{-(p+1)}] > 0 while p < 1/ln F ≈ 1.036 at F = 2·coth 1
        let mut last_d = 0.0;
        let mut last_dt = f64::INFINITY;
        for p in [0.25, 0.5, 0.75, 1.0] {
            let mut pp = params.clone();
            pp.p = p;
            pp.cadence = 10.0;
            let st = sphere_state(&pp, 1.0);
            let d = st.eval.diffusion[0];
            let dt = step_size(&st, &pp).unwrap();
            assert!(d > last_d && dt < last_dt, "p={p}");
            last_d = d;
            last_dt = dt;
        }
    }

    #[test]
    fn ode_mode_single_step_is_rk4() {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.mode = GridMode::SphericalOde;
        let s = sphere_state(&params, 1.0);
        let dt = 1e-3;
        let next = advance(&s, dt, &params).unwrap();
        let f = |y: f64| barrier_rate(y, 2, 1.0);
        let y = 1.0;
        let k1 = f(y);
        let k2 = f(y + 0.5 * dt * k1);
        let k3 = f(y + 0.5 * dt * k2);
        let k4 = f(y + dt * k3);
        let rk = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        assert_eq!(next.u().values()[0], rk);
        assert!((next.u().values()[0] - (1.0 + 0.3807970779778824e-3)).abs() < 1e-6);
        assert!((next.u().values()[0] - barrier_theta_p1(dt, 1.0, 2)).abs() < 1e-14);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.mode = GridMode::SphericalOde;
        let err = |dt: f64| {
            let mut s = sphere_state(&params, 1.0);
            let steps = (2.0 / dt).round() as usize;
            for _ in 0..steps {
                s = advance(&s, dt, &params).unwrap();
            }
            (s.u().values()[0] - barrier_theta_p1(2.0, 1.0, 2)).abs()
        };
        let (e1, e2) = (err(0.4), err(0.2));
        let ratio = e1 / e2;
        assert!(ratio > 13.0 && ratio < 19.0, "ratio {ratio}");
    }

    #[test]
    fn sphere_run_tracks_closed_form() {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.t_end = 4.0;
        let out = run_from(&params, &InitialCondition::Constant { r0: 1.0 }).unwrap();
        let last = out.final_state.u().values()[0];
        let exact = barrier_theta_p1(4.0, 1.0, 2);
        assert!((last - exact).abs() < 1e-6, "{last} {exact}");
        assert_eq!(out.final_state.t(), 4.0);
        assert_eq!(out.series.rows.len(), 81);
        assert!(out.series.rows.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn inadmissible_initial_data_is_rejected_before_stepping() {
        let mut params = FlowParams::new(2, 2.0, CurvatureKind::Mean);
        params.t_end = 1.0;
        let init = InitialCondition::Legendre { r0: 1.0, l: 2, amplitude: 0.5 };
        match run_from(&params, &init) {
            Err(Error::InadmissibleInitialData { margin, .. }) => assert!(margin < 0.0),
            other => panic!("expected InadmissibleInitialData, got {other:?}"),
        }
    }

    #[test]
    fn perturbed_run_expands_monotonically() {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.resolution = 32;
        params.t_end = 2.0;
        params.cadence = 0.1;
        let out = run_from(&params, &InitialCondition::Legendre { r0: 1.0, l: 2, amplitude: 0.1 }).unwrap();
        for w in out.series.rows.windows(2) {
            assert!(w[1].inf_u >= w[0].inf_u && w[1].sup_u >= w[0].sup_u);
        }
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.resolution = 16;
        params.t_end = 1.0;
        params.cadence = 0.3;
        params.snapshot_times = vec![0.0, 0.45, 1.0];
        let out = run_from(&params, &InitialCondition::Legendre { r0: 1.0, l: 3, amplitude: 0.05 }).unwrap();
        let ts: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.45, 1.0]);
        let rows: Vec<f64> = out.series.times();
        assert_eq!(rows, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn param_validation() {
        let mut p = FlowParams::new(2, 2.0, CurvatureKind::Sigma2Root);
        assert_eq!(p.cone, CurvatureCone::PositiveCone);
        p.cone = CurvatureCone::Garding2;
        assert!(p.validate().is_err());
        let mut p = FlowParams::new(2, 1.0, CurvatureKind::GaussRoot);
        p.cone = CurvatureCone::MeanHalfspace;
        assert!(p.validate().is_err());
        let mut p = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        p.cfl = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn parallel_and_sequential_runs_agree_bitwise() {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.mode = GridMode::Full2d;
        params.resolution = 32;
        params.t_end = 0.02;
        params.cadence = 0.01;
        let init = InitialCondition::Legendre { r0: 1.0, l: 2, amplitude: 0.05 };
        let a = run_from(&params, &init).unwrap();
        params.exec = Exec::Sequential;
        let b = run_from(&params, &init).unwrap();
        assert_eq!(a.final_state.u().values(), b.final_state.u().values());
        assert_eq!(a.series, b.series);
    }
}
