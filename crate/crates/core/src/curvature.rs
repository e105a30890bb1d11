//! Curvature functions `F(κ)` and the inverse speed `F⁻ᵖ`.
//!
//! Every shipped function is symmetric, 1-homogeneous, monotone and concave
//! on its cone, vanishes on the cone boundary, and is normalised so that
//! `F(1, …, 1) = n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypersurface::{sigma2, CurvatureCone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureKind {
    /// `H = Σκᵢ`
    Mean,
    /// `n·(Πκᵢ)^{1/n}`
    GaussRoot,
    /// `n·(σ₂/C(n,2))^{1/2}`
    Sigma2Root,
}

impl CurvatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurvatureKind::Mean => "mean",
            CurvatureKind::GaussRoot => "gauss_root",
            CurvatureKind::Sigma2Root => "sigma2_root",
        }
    }

    pub const ALL: [CurvatureKind; 3] = [CurvatureKind::Mean, CurvatureKind::GaussRoot, CurvatureKind::Sigma2Root];
}

impl fmt::Display for CurvatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurvatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(CurvatureKind::Mean),
            "gauss_root" => Ok(CurvatureKind::GaussRoot),
            "sigma2_root" => Ok(CurvatureKind::Sigma2Root),
            other => Err(format!("unknown curvature function {other:?} (expected mean, gauss_root or sigma2_root)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurvatureFunction {
    pub kind: CurvatureKind,
    pub n: usize,
}

impl CurvatureFunction {
    pub fn new(kind: CurvatureKind, n: usize) -> Self {
        CurvatureFunction { kind, n }
    }

    /// The cone on which the function is defined and positive.
    pub fn cone(&self) -> CurvatureCone {
        match self.kind {
            CurvatureKind::Mean => CurvatureCone::MeanHalfspace,
            CurvatureKind::GaussRoot => CurvatureCone::PositiveCone,
            CurvatureKind::Sigma2Root => CurvatureCone::Garding2,
        }
    }

    fn pairs(&self) -> f64 {
        (self.n * (self.n - 1) / 2) as f64
    }

    fn check(&self, kappa: &[f64], closed: bool) -> Result<()> {
        assert_eq!(kappa.len(), self.n, "curvature vector has wrong dimension");
        let cone = self.cone();
        let m = cone.margin(kappa);
        if m > 0.0 || (closed && m == 0.0) {
            Ok(())
        } else {
            Err(Error::ConeViolation { kappa: kappa.to_vec(), cone })
        }
    }

    /// `F(κ)` on the closed cone; zero on its boundary.
    pub fn eval(&self, kappa: &[f64]) -> Result<f64> {
        self.check(kappa, true)?;
        Ok(self.eval_unchecked(kappa))
    }

    fn eval_unchecked(&self, kappa: &[f64]) -> f64 {
        let n = self.n as f64;
        match self.kind {
            CurvatureKind::Mean => kappa.iter().sum(),
            CurvatureKind::GaussRoot => {
                if kappa.contains(&0.0) {
                    return 0.0;
                }
                n * (kappa.iter().map(|k| k.ln()).sum::<f64>() / n).exp()
            }
            CurvatureKind::Sigma2Root => n * (sigma2(kappa).max(0.0) / self.pairs()).sqrt(),
        }
    }

    /// `∂F/∂κᵢ` in the open cone, written into `out`.
    pub fn gradient_into(&self, kappa: &[f64], out: &mut [f64]) -> Result<f64> {
        self.check(kappa, false)?;
        let f = self.eval_unchecked(kappa);
        let n = self.n as f64;
        match self.kind {
            CurvatureKind::Mean => out.fill(1.0),
            CurvatureKind::GaussRoot => {
                for (o, k) in out.iter_mut().zip(kappa) {
                    *o = f / (n * k);
                }
            }
            CurvatureKind::Sigma2Root => {
                let c = self.pairs();
                let s1: f64 = kappa.iter().sum();
                let factor = n / (2.0 * c) / (sigma2(kappa) / c).sqrt();
                for (o, k) in out.iter_mut().zip(kappa) {
                    *o = factor * (s1 - k);
                }
            }
        }
        Ok(f)
    }

    pub fn gradient(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.gradient_into(kappa, &mut out)?;
        Ok(out)
    }

    /// `(F, Σᵢ ∂F/∂κᵢ)` without allocating.
    pub fn eval_with_trace(&self, kappa: &[f64]) -> Result<(f64, f64)> {
        self.check(kappa, false)?;
        let f = self.eval_unchecked(kappa);
        let n = self.n as f64;
        let tr = match self.kind {
            CurvatureKind::Mean => n,
            CurvatureKind::GaussRoot => f / n * kappa.iter().map(|k| 1.0 / k).sum::<f64>(),
            CurvatureKind::Sigma2Root => {
                let c = self.pairs();
                let s1: f64 = kappa.iter().sum();
                n / (2.0 * c) / (sigma2(kappa) / c).sqrt() * (n - 1.0) * s1
            }
        };
        Ok((f, tr))
    }
}

/// `Φ(r) = −r⁻ᵖ`; the flow moves with normal speed `−Φ(F) = F⁻ᵖ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Speed {
    pub p: f64,
}

impl Speed {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParams(format!("power p must be positive, got {p}")));
        }
        Ok(Speed { p })
    }

    pub fn phi(&self, r: f64) -> f64 {
        -r.powf(-self.p)
    }

    pub fn phi_dot(&self, r: f64) -> f64 {
        self.p * r.powf(-(self.p + 1.0))
    }
}

/// `F(κ)⁻ᵖ`.
pub fn speed(f: &CurvatureFunction, p: f64, kappa: &[f64]) -> Result<f64> {
    f.check(kappa, false)?;
    Ok(f.eval_unchecked(kappa).powf(-p))
}

pub fn cone_contains(cone: CurvatureCone, kappa: &[f64]) -> bool {
    cone.contains(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    const COTH1: f64 = 1.3130352854993312;

    fn f(kind: CurvatureKind, n: usize) -> CurvatureFunction {
        CurvatureFunction::new(kind, n)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(f(CurvatureKind::Mean, 3).eval(&[1.0, 1.0, 1.0]).unwrap(), 3.0);
        let g = f(CurvatureKind::GaussRoot, 2).eval(&[1.0, 2.0]).unwrap();
        assert!((g - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let s = f(CurvatureKind::Sigma2Root, 3).eval(&[1.0, 2.0, 3.0]).unwrap();
        assert!((s - 3.0 * (11.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((s - 5.744562646538029).abs() < 1e-14);
    }

    #[test]
    fn normalisation_is_exact() {
        for n in 2..=7 {
            for kind in CurvatureKind::ALL {
                assert_eq!(f(kind, n).eval(&vec![1.0; n]).unwrap(), n as f64, "{kind} n={n}");
            }
        }
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(f(CurvatureKind::Mean, 3).gradient(&[0.3, -0.1, 2.0]).unwrap(), vec![1.0; 3]);
        let g = f(CurvatureKind::GaussRoot, 2).gradient(&[1.0, 2.0]).unwrap();
        assert!((g[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!((g[1] - 2f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn trace_matches_gradient_sum() {
        let k = [0.7, 1.9, 0.4];
        for kind in CurvatureKind::ALL {
            let func = f(kind, 3);
            let (val, tr) = func.eval_with_trace(&k).unwrap();
            let g = func.gradient(&k).unwrap();
            assert!((val - func.eval(&k).unwrap()).abs() < 1e-15);
            assert!((tr - g.iter().sum::<f64>()).abs() < 1e-13);
        }
    }

    #[test]
    fn speed_examples() {
        let mean = f(CurvatureKind::Mean, 2);
        assert_eq!(speed(&mean, 1.0, &[1.0, 1.0]).unwrap(), 0.5);
        let s = speed(&mean, 2.0, &[COTH1, COTH1]).unwrap();
        assert!((s - 0.14500641459649344).abs() < 1e-14);
        let k = [0.9, 1.4];
        for kind in CurvatureKind::ALL {
            for p in [0.5, 1.0, 2.5] {
                let base = speed(&f(kind, 2), p, &k).unwrap();
                let scaled = speed(&f(kind, 2), p, &[3.0 * k[0], 3.0 * k[1]]).unwrap();
                assert!((scaled - 3f64.powf(-p) * base).abs() < 1e-14 * base);
            }
        }
    }

    #[test]
    fn speed_phi() {
        let s = Speed::new(2.0).unwrap();
        assert_eq!(s.phi(2.0), -0.25);
        assert_eq!(s.phi_dot(2.0), 0.25);
        assert!(Speed::new(0.0).is_err());
        assert!(Speed::new(-1.0).is_err());
    }

    #[test]
    fn cone_violations() {
        assert!(matches!(
            f(CurvatureKind::GaussRoot, 2).eval(&[-0.5, 2.0]),
            Err(Error::ConeViolation { .. })
        ));
        assert!(f(CurvatureKind::Mean, 2).eval(&[-0.5, 2.0]).is_ok());
        assert!(f(CurvatureKind::Sigma2Root, 2).gradient(&[1.0, -0.1]).is_err());
        assert!(speed(&f(CurvatureKind::Mean, 2), 1.0, &[-1.0, 1.0]).is_err());
        assert!(cone_contains(CurvatureCone::PositiveCone, &[1.0, 1.0]));
        assert!(cone_contains(CurvatureCone::MeanHalfspace, &[-1.0, 3.0]));
        assert!(!cone_contains(CurvatureCone::Garding2, &[1.0, -0.1]));
    }

    #[test]
    fn vanishes_on_boundary() {
        let g = f(CurvatureKind::GaussRoot, 3);
        assert_eq!(g.eval(&[0.0, 1.0, 1.0]).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for e in 1..=12 {
            let s = 10f64.powi(-e);
            let val = g.eval(&[s, 1.0, 1.0]).unwrap();
            assert!(val < prev);
            prev = val;
        }
        assert!(prev < 1e-3);
        assert_eq!(f(CurvatureKind::Mean, 2).eval(&[-1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(f(CurvatureKind::Sigma2Root, 2).eval(&[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn speed_decreases_in_each_curvature() {
        let k = [0.8, 1.1, 1.5];
        for kind in CurvatureKind::ALL {
            let func = f(kind, 3);
            let base = speed(&func, 1.5, &k).unwrap();
            for i in 0..3 {
                let mut kk = k;
                kk[i] += 1e-3;
                assert!(speed(&func, 1.5, &kk).unwrap() < base, "{kind} i={i}");
            }
        }
    }
}
