//! Independent reference computations for the verification suite. Nothing
//! here shares code with the solver paths it checks.

use nalgebra::{Matrix2, SymmetricEigen};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_{r₀}^{u} dr / sinh r` by quadrature.
pub fn pi_by_quadrature(u: f64, r0: f64) -> f64 {
    adaptive_simpson(&|r: f64| 1.0 / r.sinh(), r0, u, 1e-12)
}

/// Generalized eigenvalues of the symmetric pencil `(A, B)` with `B`
/// positive definite, via Cholesky reduction `L⁻¹AL⁻ᵀ`. Ascending.
pub fn generalized_eigenvalues(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [f64; 2] {
    let a = Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
    let b = Matrix2::new(b[0][0], b[0][1], b[1][0], b[1][1]);
    let chol = b.cholesky().expect("metric must be positive definite");
    let l_inv = chol.l().try_inverse().expect("Cholesky factor is invertible");
    let c = l_inv * a * l_inv.transpose();
    let c = 0.5 * (c + c.transpose());
    let eig = SymmetricEigen::new(c).eigenvalues;
    let (x, y) = (eig[0], eig[1]);
    if x <= y { [x, y] } else { [y, x] }
}

/// Central finite-difference gradient of `f` with relative step `rel`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], rel: f64) -> Vec<f64> {
    let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let h = rel * scale;
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + h;
            let fp = f(&buf);
            buf[i] = x[i] - h;
            let fm = f(&buf);
            buf[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
