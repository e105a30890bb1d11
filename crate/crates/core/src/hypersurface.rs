//! Radial graphs `M = {(u(x), x)}` in hyperbolic space with the geodesic
//! polar metric `dr² + sinh²r·σ`.
//!
//! With `ϑ = sinh u`, covariant derivatives taken with respect to `σ` and
//! `uⁱ = σⁱʲuⱼ`, the induced metric, tilt factor and mixed shape operator
//! (outward normal) are
//!
//! ```text
//! gᵢⱼ  = uᵢuⱼ + ϑ²σᵢⱼ
//! v²   = 1 + ϑ⁻²|Du|²
//! hⁱⱼ  = ϑ̇/(vϑ)·δⁱⱼ + ϑ̇/(v³ϑ³)·uⁱuⱼ − g̃ⁱᵏu_kj/(vϑ²),   g̃ⁱᵏ = σⁱᵏ − uⁱuᵏ/(v²ϑ²)
//! ```
//!
//! A constant graph `u ≡ r` is a geodesic sphere with `hⁱⱼ = coth r·δⁱⱼ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::sphere::{GradientField, GridMode, HessianField, ScalarField, SphericalGrid};

/// Relative size of the imaginary part tolerated before a 2×2 eigenproblem
/// is declared non-symmetric.
const COMPLEX_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGraph {
    pub u: ScalarField,
    pub t: f64,
}

impl RadialGraph {
    pub fn new(u: ScalarField, t: f64) -> Result<Self> {
        check_positive(u.values())?;
        Ok(RadialGraph { u, t })
    }
}

pub(crate) fn check_positive(u: &[f64]) -> Result<()> {
    match u.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        Some((node, &value)) => Err(Error::NonPositiveRadius { node, value }),
        None => Ok(()),
    }
}

/// Admissibility cones in curvature space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureCone {
    /// `Γ₊ = {κᵢ > 0}`
    PositiveCone,
    /// `{Σκᵢ > 0}`
    MeanHalfspace,
    /// Gårding cone `{σ₁ > 0, σ₂ > 0}`
    Garding2,
}

impl CurvatureCone {
    pub fn as_str(self) -> &'static str {
        match self {
            CurvatureCone::PositiveCone => "positive_cone",
            CurvatureCone::MeanHalfspace => "mean_halfspace",
            CurvatureCone::Garding2 => "garding2",
        }
    }

    /// Signed distance proxy: positive exactly inside the cone. Positively
    /// homogeneous, so membership is scale invariant.
    pub fn margin(self, kappa: &[f64]) -> f64 {
        match self {
            CurvatureCone::PositiveCone => kappa.iter().copied().fold(f64::INFINITY, f64::min),
            CurvatureCone::MeanHalfspace => kappa.iter().sum(),
            CurvatureCone::Garding2 => {
                let s1: f64 = kappa.iter().sum();
                s1.min(sigma2(kappa))
            }
        }
    }

    pub fn contains(self, kappa: &[f64]) -> bool {
        self.margin(kappa) > 0.0
    }

    /// True when `self ⊆ other`.
    pub fn is_subset_of(self, other: CurvatureCone) -> bool {
        use CurvatureCone::*;
        matches!(
            (self, other),
            (PositiveCone, _) | (Garding2, Garding2) | (Garding2, MeanHalfspace) | (MeanHalfspace, MeanHalfspace)
        )
    }
}

impl fmt::Display for CurvatureCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurvatureCone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive_cone" | "gamma_plus" => Ok(CurvatureCone::PositiveCone),
            "mean_halfspace" => Ok(CurvatureCone::MeanHalfspace),
            "garding2" => Ok(CurvatureCone::Garding2),
            other => Err(format!(
                "unknown cone {other:?} (expected positive_cone, mean_halfspace or garding2)"
            )),
        }
    }
}

/// Second elementary symmetric polynomial, summed pairwise.
pub fn sigma2(kappa: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..kappa.len() {
        for j in i + 1..kappa.len() {
            s += kappa[i] * kappa[j];
        }
    }
    s
}

/// Geometry at one node in the reduced `(θ, φ)` frame. On axisymmetric
/// grids of `Sⁿ` the `φ` direction carries multiplicity `n − 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeShape {
    pub v: f64,
    /// `[g_θθ, g_θφ, g_φφ]`
    pub g: [f64; 3],
    /// Mixed tensor `hⁱⱼ`, row `i`, column `j`.
    pub h: [[f64; 2]; 2],
}

/// Per-node inputs for the shape operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeJet {
    pub theta: f64,
    pub u: f64,
    /// `[u_θ, u_φ]`
    pub du: [f64; 2],
    /// `[u_;θθ, u_;θφ, u_;φφ]`
    pub d2u: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeData {
    grid: Arc<SphericalGrid>,
    nodes: Vec<NodeShape>,
    /// Sorted principal curvatures, stride `n`.
    kappa: Vec<f64>,
}

impl ShapeData {
    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &NodeShape {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[NodeShape] {
        &self.nodes
    }

    /// Principal curvatures at node `i`, ascending.
    pub fn kappa(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.kappa[i * n..(i + 1) * n]
    }

    pub fn kappa_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.kappa.chunks_exact(self.n())
    }

    pub fn tilt(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|s| s.v)
    }

    /// `tr hⁱⱼ` over all `n` dimensions.
    pub fn trace(&self, i: usize) -> f64 {
        let h = &self.nodes[i].h;
        h[0][0] + (self.n() - 1) as f64 * h[1][1]
    }

    /// Smallest and largest principal curvature over the whole surface.
    pub fn kappa_range(&self) -> (f64, f64) {
        self.kappa_rows()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k[0]), hi.max(k[k.len() - 1])))
    }
}

/// `v = √(1 + ϑ(u)⁻²|Du|²_σ)`.
pub fn tilt_factor(u: &ScalarField, du: &GradientField) -> Result<ScalarField> {
    check_positive(u.values())?;
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let s = r.sinh();
            (1.0 + du.norm_sq(i) / (s * s)).sqrt()
        })
        .collect();
    ScalarField::new(u.grid().clone(), values)
}

/// Generic tensor path: builds `hⁱⱼ` from the full 2×2 formula with
/// `σ = diag(1, sin²θ)`.
pub fn node_shape(jet: &NodeJet) -> NodeShape {
    let NodeJet { theta, u, du, d2u } = *jet;
    let (th, thd) = (u.sinh(), u.cosh());
    let s2 = theta.sin().powi(2);
    let sigma_inv = [1.0, 1.0 / s2];
    let up = [du[0] * sigma_inv[0], du[1] * sigma_inv[1]];
    let grad_sq = du[0] * up[0] + du[1] * up[1];
    let v2 = 1.0 + grad_sq / (th * th);
    let v = v2.sqrt();
    let hess = [[d2u[0], d2u[1]], [d2u[1], d2u[2]]];
    let c = 1.0 / (v2 * th * th);
    let mut gt = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            let delta = if i == k { sigma_inv[i] } else { 0.0 };
            gt[i][k] = delta - c * up[i] * up[k];
        }
    }
    let diag = thd / (v * th);
    let cross = thd / (v2 * v * th * th * th);
    let lap = 1.0 / (v * th * th);
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut x = cross * up[i] * du[j] - lap * (gt[i][0] * hess[0][j] + gt[i][1] * hess[1][j]);
            if i == j {
                x += diag;
            }
            h[i][j] = x;
        }
    }
    let g = [du[0] * du[0] + th * th, du[0] * du[1], du[1] * du[1] + th * th * s2];
    NodeShape { v, g, h }
}

/// Axisymmetric closed forms: `(v, κ_θ, κ_φ)` from `u, u', u''` at colatitude θ.
///
/// ```text
/// κ_θ = ϑ̇/(vϑ) + ϑ̇u'²/(v³ϑ³) − u''/(v³ϑ²)
/// κ_φ = ϑ̇/(vϑ) − cotθ·u'/(vϑ²)
/// ```
pub fn axisymmetric_curvatures(theta: f64, u: f64, du: f64, d2u: f64) -> (f64, f64, f64) {
    let (th, thd) = (u.sinh(), u.cosh());
    let v2 = 1.0 + du * du / (th * th);
    let v = v2.sqrt();
    let base = thd / (v * th);
    let k_theta = base + thd * du * du / (v2 * v * th * th * th) - d2u / (v2 * v * th * th);
    let k_phi = base - du / (theta.tan() * v * th * th);
    (v, k_theta, k_phi)
}

/// Closed-form node shape for data without `φ` dependence; `hⁱⱼ` is diagonal.
fn node_shape_axisymmetric(jet: &NodeJet) -> NodeShape {
    let (v, kt, kp) = axisymmetric_curvatures(jet.theta, jet.u, jet.du[0], jet.d2u[0]);
    let th = jet.u.sinh();
    NodeShape {
        v,
        g: [jet.du[0] * jet.du[0] + th * th, 0.0, th * th * jet.theta.sin().powi(2)],
        h: [[kt, 0.0], [0.0, kp]],
    }
}

/// Eigenvalues of a mixed 2×2 operator that is self-adjoint with respect to
/// `g`. Lowers the index; the pencil `(g·h, g)` is reduced by the Cholesky
/// factor of `g` to a symmetric matrix, which keeps full accuracy near
/// umbilic points. A lowered form that is visibly non-symmetric and has
/// complex roots is reported with the size of the imaginary part.
pub fn eigenvalues_2x2(h: &[[f64; 2]; 2], g: &[f64; 3]) -> Result<[f64; 2], f64> {
    let gm = [[g[0], g[1]], [g[1], g[2]]];
    let mut low = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            low[i][j] = gm[i][0] * h[0][j] + gm[i][1] * h[1][j];
        }
    }
    let det_g = g[0] * g[2] - g[1] * g[1];
    let t = (low[0][0] * g[2] + low[1][1] * g[0] - (low[0][1] + low[1][0]) * g[1]) / det_g;
    let d = (low[0][0] * low[1][1] - low[0][1] * low[1][0]) / det_g;
    let disc = t * t - 4.0 * d;
    // g·h is symmetric for a genuine shape operator; rounding alone cannot
    // produce complex roots beyond this asymmetry
    let size = low.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let asym = (low[0][1] - low[1][0]).abs();
    if disc < 0.0 && asym > COMPLEX_TOL * size {
        return Err(0.5 * (-disc).sqrt());
    }
    let off = 0.5 * (low[0][1] + low[1][0]);
    let s = [[low[0][0], off], [off, low[1][1]]];
    let l00 = g[0].sqrt();
    let l10 = g[1] / l00;
    let l11 = (g[2] - l10 * l10).sqrt();
    // M = L⁻¹S, C = M·L⁻ᵀ
    let m0 = [s[0][0] / l00, s[0][1] / l00];
    let m1 = [(s[1][0] - l10 * m0[0]) / l11, (s[1][1] - l10 * m0[1]) / l11];
    let c00 = m0[0] / l00;
    let c01 = (m0[1] - l10 * c00) / l11;
    let c10 = m1[0] / l00;
    let c11 = (m1[1] - l10 * c10) / l11;
    let mean = 0.5 * (c00 + c11);
    let r = (0.5 * (c00 - c11)).hypot(0.5 * (c01 + c10));
    Ok([mean - r, mean + r])
}

/// Sorted principal curvatures of one node, written into `out` (length n).
fn node_kappa(node: usize, shape: &NodeShape, diagonal: bool, out: &mut [f64]) -> Result<()> {
    let (k_theta, k_phi) = if diagonal {
        (shape.h[0][0], shape.h[1][1])
    } else {
        let [a, b] = eigenvalues_2x2(&shape.h, &shape.g).map_err(|imag| Error::ComplexEigenvalue { node, imag })?;
        (a, b)
    };
    out[0] = k_theta;
    out[1..].fill(k_phi);
    out.sort_by(f64::total_cmp);
    Ok(())
}

pub fn shape_operator(u: &ScalarField, du: &GradientField, d2u: &HessianField) -> Result<ShapeData> {
    shape_operator_with(u, du, d2u, Exec::Sequential)
}

/// Shape data on a whole grid. Axisymmetric and ODE grids use the diagonal
/// closed forms; full2d uses the generic tensor path.
pub fn shape_operator_with(
    u: &ScalarField,
    du: &GradientField,
    d2u: &HessianField,
    exec: Exec,
) -> Result<ShapeData> {
    let grid = u.grid();
    if !Arc::ptr_eq(grid, du.grid()) && **grid != **du.grid()
        || !Arc::ptr_eq(grid, d2u.grid()) && **grid != **d2u.grid()
    {
        return Err(Error::GridMismatch);
    }
    check_positive(u.values())?;
    let n = grid.n();
    let generic = grid.mode() == GridMode::Full2d;
    let vals = u.values();
    let per_node = exec.try_map(vals.len(), |i| {
        let jet = NodeJet { theta: grid.theta_of(i), u: vals[i], du: du.at(i), d2u: d2u.at(i) };
        let s = if generic { node_shape(&jet) } else { node_shape_axisymmetric(&jet) };
        let mut k = vec![0.0; n];
        node_kappa(i, &s, !generic, &mut k)?;
        Ok::<_, Error>((s, k))
    })?;
    let mut nodes = Vec::with_capacity(per_node.len());
    let mut kappa = Vec::with_capacity(per_node.len() * n);
    for (s, k) in per_node {
        nodes.push(s);
        kappa.extend_from_slice(&k);
    }
    Ok(ShapeData { grid: grid.clone(), nodes, kappa })
}

/// Recomputes the sorted principal curvatures of every node from `hⁱⱼ`.
pub fn principal_curvatures(shape: &ShapeData) -> Result<Vec<f64>> {
    let n = shape.n();
    // reduced frames with multiplicity keep hⁱⱼ diagonal; only full2d mixes
    let diagonal = shape.grid.mode() != GridMode::Full2d;
    let mut out = vec![0.0; shape.len() * n];
    for (i, s) in shape.nodes.iter().enumerate() {
        node_kappa(i, s, diagonal, &mut out[i * n..(i + 1) * n])?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// Node with the smallest margin.
    pub worst_node: usize,
    pub margin: f64,
}

/// Checks every node's curvature vector (stride `n`) against `cone`.
pub fn admissibility_check(kappa: &[f64], n: usize, cone: CurvatureCone) -> AdmissibilityReport {
    let (worst_node, margin) = kappa
        .chunks_exact(n)
        .map(|k| cone.margin(k))
        .enumerate()
        .fold((0, f64::INFINITY), |(wi, wm), (i, m)| if m < wm { (i, m) } else { (wi, wm) });
    AdmissibilityReport { admissible: margin > 0.0, worst_node, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{covariant_gradient, covariant_hessian};
    use std::f64::consts::PI;

    const COTH1: f64 = 1.3130352854993312;

    fn axi(res: usize) -> Arc<SphericalGrid> {
        Arc::new(SphericalGrid::build(2, GridMode::Axisymmetric, res).unwrap())
    }

    fn shape_of(u: &ScalarField) -> ShapeData {
        shape_operator(u, &covariant_gradient(u), &covariant_hessian(u)).unwrap()
    }

    #[test]
    fn tilt_examples() {
        let g = axi(16);
        let u = ScalarField::constant(g.clone(), 1.0).unwrap();
        let v = tilt_factor(&u, &covariant_gradient(&u)).unwrap();
        assert!(v.values().iter().all(|&x| x == 1.0));

        // at θ = π/2: u' = −0.1, v = √(1 + 0.01/sinh²1)
        let (v, _, _) = axisymmetric_curvatures(PI / 2.0, 1.0, -0.1, 0.0);
        assert!((v - 1.0036137786069217).abs() < 1e-14);

        let u = ScalarField::constant(g.clone(), -1.0).unwrap();
        assert!(matches!(
            tilt_factor(&u, &covariant_gradient(&u)),
            Err(Error::NonPositiveRadius { .. })
        ));
    }

    #[test]
    fn sphere_is_exactly_umbilic() {
        for mode in [GridMode::Axisymmetric, GridMode::Full2d, GridMode::SphericalOde] {
            let g = Arc::new(SphericalGrid::build(2, mode, 16).unwrap());
            let u = ScalarField::constant(g, 1.0).unwrap();
            let s = shape_of(&u);
            for i in 0..s.len() {
                assert_eq!(s.node(i).v, 1.0);
                for &k in s.kappa(i) {
                    assert!((k - COTH1).abs() < 1e-15, "{mode}: {k}");
                }
            }
        }
        let g = Arc::new(SphericalGrid::build(4, GridMode::Axisymmetric, 16).unwrap());
        let s = shape_of(&ScalarField::constant(g, 2.0).unwrap());
        assert_eq!(s.kappa(3).len(), 4);
        assert!(s.kappa(3).iter().all(|&k| (k - 1.0 / 2f64.tanh()).abs() < 1e-15));
    }

    #[test]
    fn perturbed_equator_curvatures() {
        let (_, kt, kp) = axisymmetric_curvatures(PI / 2.0, 1.0, -0.1, 0.0);
        assert!((kp - 1.3083073523780293).abs() < 1e-13);
        assert!((kt - 1.3177122073749001).abs() < 1e-13);
        // the generic tensor path agrees
        let jet = NodeJet { theta: PI / 2.0, u: 1.0, du: [-0.1, 0.0], d2u: [0.0, 0.0, 0.0] };
        let s = node_shape(&jet);
        let k = eigenvalues_2x2(&s.h, &s.g).unwrap();
        assert!((k[0] - kp).abs() < 1e-13 && (k[1] - kt).abs() < 1e-13);
    }

    #[test]
    fn eigen_examples() {
        let g = [1.0, 0.0, 1.0];
        let c = 2.5;
        assert_eq!(eigenvalues_2x2(&[[c, 0.0], [0.0, c]], &g).unwrap(), [c, c]);
        let k = eigenvalues_2x2(&[[1.31771, 0.0], [0.0, 1.30831]], &g).unwrap();
        assert!((k[0] - 1.30831).abs() < 1e-15 && (k[1] - 1.31771).abs() < 1e-15);
        // rotation: not self-adjoint
        assert!(eigenvalues_2x2(&[[0.0, -1.0], [1.0, 0.0]], &g).is_err());
    }

    #[test]
    fn trace_identity_on_perturbed_full2d() {
        let g = Arc::new(SphericalGrid::build(2, GridMode::Full2d, 32).unwrap());
        let u = ScalarField::from_fn(g, |t, p| 1.2 + 0.05 * t.sin() * p.cos() + 0.03 * t.cos().powi(2)).unwrap();
        let s = shape_of(&u);
        for i in 0..s.len() {
            let sum: f64 = s.kappa(i).iter().sum();
            let tr = s.trace(i);
            assert!((sum - tr).abs() <= 1e-12 * tr.abs(), "{sum} {tr}");
        }
    }

    #[test]
    fn principal_curvatures_recompute_matches_cached() {
        let g = axi(32);
        let u = ScalarField::from_fn(g, |t, _| 1.0 + 0.1 * t.cos()).unwrap();
        let s = shape_of(&u);
        let k = principal_curvatures(&s).unwrap();
        for i in 0..s.len() {
            for j in 0..2 {
                assert!((k[2 * i + j] - s.kappa(i)[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn monotone_tilt_bound() {
        let g = axi(64);
        let u = ScalarField::from_fn(g, |t, _| 0.7 + 0.3 * t.cos().powi(2)).unwrap();
        let du = covariant_gradient(&u);
        let v = tilt_factor(&u, &du).unwrap();
        for i in 0..u.len() {
            let bound = du.norm_sq(i) / u.values()[i].sinh().powi(2);
            assert!(v.values()[i] - 1.0 <= bound + 1e-16);
        }
    }

    #[test]
    fn cone_examples() {
        let r = admissibility_check(&[1.0, 1.0], 2, CurvatureCone::PositiveCone);
        assert!(r.admissible && r.margin == 1.0);
        let r = admissibility_check(&[-0.5, 2.0], 2, CurvatureCone::MeanHalfspace);
        assert!(r.admissible && r.margin == 1.5);
        let r = admissibility_check(&[1.0, 1.0, -0.5, 0.3], 2, CurvatureCone::PositiveCone);
        assert!(!r.admissible && r.worst_node == 1 && r.margin == -0.5);

        assert!(CurvatureCone::PositiveCone.contains(&[1.0, 1.0]));
        assert!(CurvatureCone::MeanHalfspace.contains(&[-1.0, 3.0]));
        assert!(!CurvatureCone::Garding2.contains(&[1.0, -0.1]));
        assert!((sigma2(&[1.0, -0.1]) + 0.1).abs() < 1e-16);
    }

    #[test]
    fn cone_membership_is_scale_invariant() {
        let samples = [[0.3, -0.1, 2.0], [1.0, 1.0, 1.0], [-1.0, 0.2, 0.5], [4.0, -0.9, -0.8]];
        for cone in [CurvatureCone::PositiveCone, CurvatureCone::MeanHalfspace, CurvatureCone::Garding2] {
            for k in &samples {
                for lam in [1e-3, 0.5, 7.0, 1e4] {
                    let scaled: Vec<f64> = k.iter().map(|x| lam * x).collect();
                    assert_eq!(cone.contains(k), cone.contains(&scaled));
                }
            }
        }
    }

    #[test]
    fn cone_inclusions() {
        use CurvatureCone::*;
        assert!(PositiveCone.is_subset_of(Garding2));
        assert!(Garding2.is_subset_of(MeanHalfspace));
        assert!(!MeanHalfspace.is_subset_of(Garding2));
        assert!(!Garding2.is_subset_of(PositiveCone));
    }
}
