//! Effective scalar of the Grushin problem on one horizontal mode.
//!
//! Removing the `m = 0` row and column from `P - lambda` leaves two decoupled
//! tridiagonal chains (`m > 0` and `m < 0`), so the Schur complement only needs
//! the `(1,1)` entries of their inverses:
//!
//! ```text
//! E(lambda) = gamma^-2 (lambda + x_r G x_c - q)
//! ```
//!
//! with `G` the inverse of `c_n Delta_V - h X - h^2 lambda` on `m != 0`. The
//! zeros of `E` are the eigenvalues of `P + Q_A` in this mode; with no
//! absorbing potential they are the eigenvalues of `P` itself.

use crate::assembly::{absorbing_value, assemble_scaled_restricted, x_coefficients};
use crate::error::{KbmError, Result};
use crate::linalg::smin;
use crate::model::{HMode, SpectralWindow, TorusSpec};
use crate::C64;
use std::f64::consts::PI;

/// `|E|` below this on the contour means a zero sits on it.
pub const BOUNDARY_ZERO_TOL: f64 = 1e-10;
/// Newton stops once `|E| <= NEWTON_TOL * gamma^-2 * max(1, |lambda|)`.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 100;

/// `lambda -> E_{-+}(lambda)` for fixed `(gamma, mode, M, A)`.
#[derive(Debug, Clone, Copy)]
pub struct GrushinScalar {
    pub gamma: f64,
    pub mode: HMode,
    pub m_max: usize,
    /// Absorbing strength; `None` drops `Q_A` entirely.
    pub a: Option<f64>,
    pub spec: TorusSpec,
}

/// Value of `x_r G x_c` and of `x_r G^2 x_c`.
struct Resolved {
    xgx: C64,
    xggx: C64,
}

impl GrushinScalar {
    pub fn new(gamma: f64, mode: HMode, m_max: usize, a: Option<f64>, spec: &TorusSpec) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(KbmError::invalid(format!("gamma must be positive, got {gamma}")));
        }
        if m_max < 1 {
            return Err(KbmError::invalid("M must be >= 1"));
        }
        if let Some(a) = a {
            if !(a.is_finite() && a > 0.0) {
                return Err(KbmError::invalid(format!("A must be positive, got {a}")));
            }
        }
        Ok(Self {
            gamma,
            mode,
            m_max,
            a,
            spec: *spec,
        })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.gamma
    }

    pub fn q(&self) -> f64 {
        self.a.map_or(0.0, |a| absorbing_value(a, &self.mode))
    }

    /// Poles of `E` lie where the restricted block is singular; its Hermitian
    /// part is at least `c_n - h^2 Re(lambda)`, so they all have
    /// `Re(lambda) >= c_n gamma^2`.
    pub fn pole_free_below(&self) -> f64 {
        self.spec.c_n() * self.gamma * self.gamma
    }

    fn check_invertible(&self, lambda: C64) -> Result<()> {
        let h = self.h();
        if self.spec.c_n() - h * h * lambda.re > 1e-12 {
            return Ok(());
        }
        let block = assemble_scaled_restricted(h, lambda, &self.mode, self.m_max, &self.spec)?;
        if smin(&block.entries)? <= 1e-12 {
            return Err(KbmError::Singular(format!("restricted block at lambda = {lambda}")));
        }
        Ok(())
    }

    /// Solve one chain for `(G e_1)_1` and `(G^2 e_1)_1 = z . y` where
    /// `y = G e_1`, `z = G^T e_1`.
    fn chain(&self, lambda: C64, sub: C64, sup: C64) -> Result<(C64, C64)> {
        let h = self.h();
        let n = self.m_max;
        let shift = lambda * (h * h);
        let diag = |j: usize| C64::new(self.spec.c_n() * ((j + 1) * (j + 1)) as f64, 0.0) - shift;
        let (lo, hi) = (sub * (-h), sup * (-h));
        let y = thomas(n, &diag, lo, hi)?;
        let z = thomas(n, &diag, hi, lo)?;
        let gg: C64 = y.iter().zip(&z).map(|(a, b)| a * b).sum();
        Ok((y[0], gg))
    }

    fn resolve(&self, lambda: C64) -> Result<Resolved> {
        self.check_invertible(lambda)?;
        let (up, down) = x_coefficients(&self.mode);
        // m > 0 chain: X[m+1, m] = up below the diagonal, X[m, m+1] = down above.
        let (gp, ggp) = self.chain(lambda, up, down)?;
        // m < 0 chain ordered -1, -2, ...: the roles swap.
        let (gm, ggm) = self.chain(lambda, down, up)?;
        // x_c = (X[1,0], X[-1,0]) = (up, down); x_r = (X[0,1], X[0,-1]) = (down, up).
        let w = down * up;
        Ok(Resolved {
            xgx: w * (gp + gm),
            xggx: w * (ggp + ggm),
        })
    }

    /// `lambda + x_r G x_c - q`, i.e. `gamma^2 E(lambda)`.
    pub fn scaled(&self, lambda: C64) -> Result<C64> {
        Ok(lambda + self.resolve(lambda)?.xgx - self.q())
    }

    pub fn evaluate(&self, lambda: C64) -> Result<C64> {
        Ok(self.scaled(lambda)? / (self.gamma * self.gamma))
    }

    /// `(gamma^2 E, d(gamma^2 E)/d lambda)`.
    fn scaled_with_derivative(&self, lambda: C64) -> Result<(C64, C64)> {
        let r = self.resolve(lambda)?;
        let h = self.h();
        Ok((lambda + r.xgx - self.q(), C64::new(1.0, 0.0) + r.xggx * (h * h)))
    }
}

/// Solve a constant-off-diagonal tridiagonal system `T y = e_1`. Pivoting is
/// unnecessary: the restricted block has positive definite Hermitian part
/// whenever it is evaluated here.
fn thomas(n: usize, diag: &dyn Fn(usize) -> C64, sub: C64, sup: C64) -> Result<Vec<C64>> {
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut pivot = diag(0);
    let mut rhs = C64::new(1.0, 0.0);
    for j in 0..n {
        if j > 0 {
            pivot = diag(j) - sub * c[j - 1];
            rhs = -sub * d[j - 1];
        }
        if pivot.norm() < 1e-300 {
            return Err(KbmError::Singular("zero pivot in restricted chain".into()));
        }
        c[j] = sup / pivot;
        d[j] = rhs / pivot;
    }
    let mut y = d;
    for j in (0..n.saturating_sub(1)).rev() {
        let next = y[j + 1];
        y[j] -= c[j] * next;
    }
    Ok(y)
}

pub fn grushin_scalar(
    gamma: f64,
    lambda: C64,
    mode: &HMode,
    m_max: usize,
    a: Option<f64>,
    spec: &TorusSpec,
) -> Result<C64> {
    GrushinScalar::new(gamma, *mode, m_max, a, spec)?.evaluate(lambda)
}

/// Largest argument increment tolerated between neighbouring samples.
const MAX_STEP_ARG: f64 = 0.5;
const MAX_DEPTH: usize = 24;

fn winding(g: &GrushinScalar, window: &SpectralWindow, max_arg: f64) -> Result<f64> {
    let c = window.corners();
    let mut total = 0.0;
    for side in 0..4 {
        let (a, b) = (c[side], c[(side + 1) % 4]);
        let n0 = 32;
        let mut prev = (a, sample(g, a)?);
        for i in 1..=n0 {
            let z = a + (b - a) * (i as f64 / n0 as f64);
            let next = (z, sample(g, z)?);
            total += refine(g, prev, next, max_arg, 0)?;
            prev = next;
        }
    }
    Ok(total / (2.0 * PI))
}

fn sample(g: &GrushinScalar, z: C64) -> Result<C64> {
    let e = g.evaluate(z)?;
    if e.norm() < BOUNDARY_ZERO_TOL {
        return Err(KbmError::ZeroOnBoundary(z));
    }
    Ok(e)
}

fn refine(g: &GrushinScalar, a: (C64, C64), b: (C64, C64), max_arg: f64, depth: usize) -> Result<f64> {
    let step = (b.1 / a.1).arg();
    if step.abs() <= max_arg {
        return Ok(step);
    }
    if depth >= MAX_DEPTH {
        return Err(KbmError::WindingNotIntegral(step / (2.0 * PI)));
    }
    let mid = (a.0 + b.0) * 0.5;
    let m = (mid, sample(g, mid)?);
    Ok(refine(g, a, m, max_arg, depth + 1)? + refine(g, m, b, max_arg, depth + 1)?)
}

/// Number of zeros of `E` inside `window`, by the argument principle on the
/// window boundary. The count is accepted once two successive refinements of
/// the sampling agree and sit within 0.1 of an integer.
pub fn grushin_zero_count(g: &GrushinScalar, window: &SpectralWindow) -> Result<usize> {
    if window.re_max >= g.pole_free_below() {
        return Err(KbmError::invalid(format!(
            "window reaches Re = {} where the restricted block may be singular (limit {})",
            window.re_max,
            g.pole_free_below()
        )));
    }
    let mut max_arg = MAX_STEP_ARG;
    let mut last = winding(g, window, max_arg)?;
    for _ in 0..4 {
        max_arg /= 2.0;
        let w = winding(g, window, max_arg)?;
        let n = w.round();
        if (w - n).abs() < 0.1 && (last - w).abs() < 0.1 {
            if n < 0.0 {
                return Err(KbmError::WindingNotIntegral(w));
            }
            return Ok(n as usize);
        }
        last = w;
    }
    Err(KbmError::WindingNotIntegral(last))
}

/// Newton iteration on `E` from `seed`.
pub fn grushin_zero(g: &GrushinScalar, seed: C64) -> Result<C64> {
    let mut z = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let (f, df) = g.scaled_with_derivative(z)?;
        if f.norm() <= NEWTON_TOL * z.norm().max(1.0) {
            return Ok(z);
        }
        if df.norm() == 0.0 || !df.re.is_finite() {
            return Err(KbmError::NoConvergence(NEWTON_MAX_ITER));
        }
        let mut step = f / df;
        // keep the iterate away from the pole region on wild first steps
        let cap = z.norm().max(1.0);
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        z -= step;
    }
    let (f, _) = g.scaled_with_derivative(z)?;
    if f.norm() <= NEWTON_TOL * z.norm().max(1.0) {
        return Ok(z);
    }
    Err(KbmError::NoConvergence(NEWTON_MAX_ITER))
}
