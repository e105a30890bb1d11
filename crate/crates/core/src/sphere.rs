//! Grids on the round sphere and covariant derivatives with respect to the
//! canonical metric `σ`.
//!
//! Colatitudes are staggered, `θ_a = (a + ½)·π/N`, so no node sits on a
//! pole. Stencils that reach across a pole read a reflected ghost value:
//! `f(−θ) = f(θ)` for axisymmetric data, `f(−θ, φ) = f(θ, φ + π)` on the
//! full longitude-latitude grid. All stencils are second-order centred.
//!
//! Gradients and Hessians are stored in the reduced `(θ, φ)` frame. On the
//! axisymmetric grid of `Sⁿ` the `φ` slot stands for any unit direction of
//! the `Sⁿ⁻¹` orbit, where `σ_φφ = sin²θ` and the covariant Hessian is
//! `sinθ·cosθ·f'·σ_{Sⁿ⁻¹}` with multiplicity `n − 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Rotationally symmetric reduction to a single node.
    SphericalOde,
    /// Functions of the colatitude only, any `n ≥ 2`.
    Axisymmetric,
    /// Full latitude-longitude grid on `S²`.
    Full2d,
}

impl GridMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GridMode::SphericalOde => "spherical_ode",
            GridMode::Axisymmetric => "axisymmetric",
            GridMode::Full2d => "full2d",
        }
    }
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GridMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spherical_ode" => Ok(GridMode::SphericalOde),
            "axisymmetric" => Ok(GridMode::Axisymmetric),
            "full2d" => Ok(GridMode::Full2d),
            other => Err(format!(
                "unknown grid mode {other:?} (expected spherical_ode, axisymmetric or full2d)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalGrid {
    n: usize,
    mode: GridMode,
    resolution: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    dtheta: f64,
    dphi: f64,
}

impl SphericalGrid {
    /// Builds a grid on `Sⁿ`. `resolution` is ignored for the ODE mode.
    pub fn build(n: usize, mode: GridMode, resolution: usize) -> Result<Self> {
        if n < 2 || (mode == GridMode::Full2d && n != 2) {
            return Err(Error::UnsupportedDimension { n, mode });
        }
        if mode == GridMode::SphericalOde {
            return Ok(SphericalGrid {
                n,
                mode,
                resolution: 1,
                theta: vec![PI / 2.0],
                phi: vec![0.0],
                dtheta: 0.0,
                dphi: 0.0,
            });
        }
        if resolution < MIN_RESOLUTION {
            return Err(Error::ResolutionTooSmall { resolution, minimum: MIN_RESOLUTION });
        }
        if mode == GridMode::Full2d && !resolution.is_multiple_of(2) {
            return Err(Error::OddResolution(resolution));
        }
        let dtheta = PI / resolution as f64;
        let theta = (0..resolution).map(|a| (a as f64 + 0.5) * dtheta).collect();
        let (phi, dphi) = match mode {
            GridMode::Full2d => {
                let dphi = 2.0 * PI / resolution as f64;
                ((0..resolution).map(|b| b as f64 * dphi).collect(), dphi)
            }
            _ => (vec![0.0], 0.0),
        };
        Ok(SphericalGrid { n, mode, resolution, theta, phi, dtheta, dphi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Colatitude rows.
    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    /// Longitudes (a single `0` outside full2d).
    pub fn phis(&self) -> &[f64] {
        &self.phi
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn dphi(&self) -> f64 {
        self.dphi
    }

    pub fn node_count(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    /// Row-major index: colatitude row `a`, longitude column `b`.
    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.phi.len() + b
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let m = self.phi.len();
        (self.theta[node / m], self.phi[node % m])
    }

    #[inline]
    pub fn theta_of(&self, node: usize) -> f64 {
        self.theta[node / self.phi.len()]
    }

    /// Smallest metric distance between neighbouring nodes, `None` for the
    /// single-node grid.
    pub fn min_spacing(&self) -> Option<f64> {
        match self.mode {
            GridMode::SphericalOde => None,
            GridMode::Axisymmetric => Some(self.dtheta),
            GridMode::Full2d => Some(self.dtheta.min(self.theta[0].sin() * self.dphi)),
        }
    }

    /// Maps a possibly out-of-range stencil position to a stored node,
    /// reflecting across the poles and wrapping in longitude.
    #[inline]
    fn ghost(&self, a: isize, b: isize) -> usize {
        let rows = self.theta.len() as isize;
        let cols = self.phi.len() as isize;
        let (a, shift) = if a < 0 {
            (-a - 1, cols / 2)
        } else if a >= rows {
            (2 * rows - a - 1, cols / 2)
        } else {
            (a, 0)
        };
        let b = (b + shift).rem_euclid(cols);
        self.index(a as usize, b as usize)
    }
}

/// One real value per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Arc<SphericalGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SphericalGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::FieldSizeMismatch { expected: grid.node_count(), got: values.len() });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Arc<SphericalGrid>, c: f64) -> Result<Self> {
        let len = grid.node_count();
        Self::new(grid, vec![c; len])
    }

    /// Samples `f(θ, φ)` at every node.
    pub fn from_fn(grid: Arc<SphericalGrid>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|i| {
                let (t, p) = grid.coords(i);
                f(t, p)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nodewise map onto the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        ScalarField::new(self.grid.clone(), self.values.iter().map(|&x| f(x)).collect())
    }
}

/// Covariant components `(f_θ, f_φ)` per node.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    grid: Arc<SphericalGrid>,
    comps: Vec<[f64; 2]>,
}

impl GradientField {
    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn components(&self) -> &[[f64; 2]] {
        &self.comps
    }

    #[inline]
    pub fn at(&self, node: usize) -> [f64; 2] {
        self.comps[node]
    }

    /// `σ^{ij} f_i f_j` at a node.
    #[inline]
    pub fn norm_sq(&self, node: usize) -> f64 {
        let [ft, fp] = self.comps[node];
        if fp == 0.0 {
            return ft * ft;
        }
        let s = self.grid.theta_of(node).sin();
        ft * ft + fp * fp / (s * s)
    }
}

/// Covariant Hessian components `[f_;θθ, f_;θφ, f_;φφ]` per node.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianField {
    grid: Arc<SphericalGrid>,
    comps: Vec<[f64; 3]>,
}

impl HessianField {
    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn components(&self) -> &[[f64; 3]] {
        &self.comps
    }

    #[inline]
    pub fn at(&self, node: usize) -> [f64; 3] {
        self.comps[node]
    }

    /// Full symmetric 2×2 matrix in the `(θ, φ)` frame.
    #[inline]
    pub fn matrix(&self, node: usize) -> [[f64; 2]; 2] {
        let [tt, tp, pp] = self.comps[node];
        [[tt, tp], [tp, pp]]
    }
}

pub fn covariant_gradient(f: &ScalarField) -> GradientField {
    covariant_gradient_with(f, Exec::Sequential)
}

pub fn covariant_gradient_with(f: &ScalarField, exec: Exec) -> GradientField {
    let grid = f.grid();
    let u = f.values();
    let comps = match grid.mode() {
        GridMode::SphericalOde => vec![[0.0; 2]; u.len()],
        GridMode::Axisymmetric | GridMode::Full2d => {
            let cols = grid.phis().len();
            let full = grid.mode() == GridMode::Full2d;
            let (ht, hp) = (grid.dtheta(), grid.dphi());
            exec.map(u.len(), |i| {
                let (a, b) = ((i / cols) as isize, (i % cols) as isize);
                let ft = (u[grid.ghost(a + 1, b)] - u[grid.ghost(a - 1, b)]) / (2.0 * ht);
                let fp = if full {
                    (u[grid.ghost(a, b + 1)] - u[grid.ghost(a, b - 1)]) / (2.0 * hp)
                } else {
                    0.0
                };
                [ft, fp]
            })
        }
    };
    GradientField { grid: grid.clone(), comps }
}

pub fn covariant_hessian(f: &ScalarField) -> HessianField {
    covariant_hessian_with(f, Exec::Sequential)
}

/// Covariant Hessian with the Christoffel symbols of `σ` on `S²`:
/// `Γ^θ_φφ = −sinθ·cosθ`, `Γ^φ_θφ = cotθ`.
pub fn covariant_hessian_with(f: &ScalarField, exec: Exec) -> HessianField {
    let grid = f.grid();
    let u = f.values();
    let comps = match grid.mode() {
        GridMode::SphericalOde => vec![[0.0; 3]; u.len()],
        GridMode::Axisymmetric => {
            let h = grid.dtheta();
            exec.map(u.len(), |i| {
                let a = i as isize;
                let (up, um) = (u[grid.ghost(a + 1, 0)], u[grid.ghost(a - 1, 0)]);
                let d1 = (up - um) / (2.0 * h);
                let d2 = (up - 2.0 * u[i] + um) / (h * h);
                let th = grid.theta_of(i);
                [d2, 0.0, th.sin() * th.cos() * d1]
            })
        }
        GridMode::Full2d => {
            let cols = grid.phis().len();
            let (ht, hp) = (grid.dtheta(), grid.dphi());
            exec.map(u.len(), |i| {
                let (a, b) = ((i / cols) as isize, (i % cols) as isize);
                let at = |da: isize, db: isize| u[grid.ghost(a + da, b + db)];
                let c = u[i];
                let ft = (at(1, 0) - at(-1, 0)) / (2.0 * ht);
                let fp = (at(0, 1) - at(0, -1)) / (2.0 * hp);
                let ftt = (at(1, 0) - 2.0 * c + at(-1, 0)) / (ht * ht);
                let fpp = (at(0, 1) - 2.0 * c + at(0, -1)) / (hp * hp);
                let ftp = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * ht * hp);
                let th = grid.theta_of(i);
                let (s, co) = th.sin_cos();
                [ftt, ftp - co / s * fp, fpp + s * co * ft]
            })
        }
    };
    HessianField { grid: grid.clone(), comps }
}

/// Extrema over the nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldStats {
    pub sup: f64,
    pub inf: f64,
    pub osc: f64,
}

pub fn field_stats(f: &ScalarField) -> FieldStats {
    stats_of(f.values())
}

pub(crate) fn stats_of(values: &[f64]) -> FieldStats {
    let (inf, sup) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    FieldStats { sup, inf, osc: sup - inf }
}
