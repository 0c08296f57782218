//! Empirical constants of the uniform subelliptic estimates
//!
//! ```text
//! ||u||_{s+g}^2 <= C^2 (B^-2 ||L u||_s^2 + B^2 ||u||_s^2)
//! ```
//!
//! for `L = P`, `P + Q_A` or `P - i y`. Writing `u = W_{s+g}^{-1} v`, the best
//! `C^2` on one mode is `1 / sigma_min(F)^2` for the stacked matrix
//! `F = [B^-1 W_s L W_{s+g}^-1 ; B W_s W_{s+g}^-1]`, which avoids forming the
//! normal equations of the generalized pencil.

use crate::assembly::{absorbing_value, assemble_p};
use crate::error::{KbmError, Result};
use crate::linalg::smin;
use crate::model::{sobolev_weight, TorusSpec};
use crate::{CMat, C64};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HypoVariant {
    Plain,
    WithQ,
    /// `P - i y`.
    Shifted(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypoParams {
    pub gamma: f64,
    pub s: f64,
    pub gain: f64,
    pub b: f64,
    pub a: f64,
    pub variant: HypoVariant,
    pub k_max: f64,
    pub m_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypoConstant {
    /// `C^2`, the supremum over modes.
    pub c_sq: f64,
    pub argmax: f64,
    pub per_shell: Vec<(f64, f64)>,
}

impl HypoParams {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(KbmError::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("B", self.b)?;
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(KbmError::invalid(format!("gain must be >= 0, got {}", self.gain)));
        }
        match self.variant {
            HypoVariant::Plain => Ok(()),
            HypoVariant::WithQ => {
                positive("A", self.a)?;
                if self.gamma <= self.a + self.b * self.b {
                    return Err(KbmError::invalid(format!(
                        "need gamma > A + B^2, got gamma = {}, A = {}, B = {}",
                        self.gamma, self.a, self.b
                    )));
                }
                Ok(())
            }
            HypoVariant::Shifted(y) => {
                if !y.is_finite() {
                    return Err(KbmError::NonFinite);
                }
                if self.gamma <= self.b * self.b {
                    return Err(KbmError::invalid(format!(
                        "need gamma > B^2, got gamma = {}, B = {}",
                        self.gamma, self.b
                    )));
                }
                Ok(())
            }
        }
    }
}

pub fn subelliptic_constant(params: &HypoParams, spec: &TorusSpec) -> Result<HypoConstant> {
    params.validate()?;
    let m = params.m_max;
    let n = 2 * m + 1;
    let shells = spec.shells_within(params.k_max);
    let per: Vec<Result<f64>> = shells
        .par_iter()
        .map(|sh| {
            let mode = sh.representative;
            let mut l = assemble_p(params.gamma, &mode, m, spec)?.entries;
            match params.variant {
                HypoVariant::Plain => {}
                HypoVariant::WithQ => l[(m, m)] += C64::new(absorbing_value(params.a, &mode), 0.0),
                HypoVariant::Shifted(y) => {
                    for i in 0..n {
                        l[(i, i)] -= C64::new(0.0, y);
                    }
                }
            }
            let ms: Vec<i64> = (-(m as i64)..=m as i64).collect();
            let w_s: Vec<f64> = ms.iter().map(|&j| sobolev_weight(params.s, &mode, j)).collect();
            let w_g: Vec<f64> = ms
                .iter()
                .map(|&j| sobolev_weight(params.s + params.gain, &mode, j))
                .collect();
            let mut f = CMat::zeros(2 * n, n);
            for c in 0..n {
                for r in 0..n {
                    f[(r, c)] = l[(r, c)] * (w_s[r] / (params.b * w_g[c]));
                }
                f[(n + c, c)] = C64::new(params.b * w_s[c] / w_g[c], 0.0);
            }
            let sv = smin(&f)?;
            if sv <= 0.0 {
                return Err(KbmError::Singular("subelliptic pencil is not positive definite".into()));
            }
            Ok(1.0 / (sv * sv))
        })
        .collect();
    let per_shell = shells
        .iter()
        .zip(per)
        .map(|(s, v)| v.map(|c| (s.norm_sq, c)))
        .collect::<Result<Vec<_>>>()?;
    let (c_sq, argmax) = per_shell
        .iter()
        .fold((0.0, 0.0), |acc, &(q, c)| if c > acc.0 { (c, q) } else { acc });
    Ok(HypoConstant {
        c_sq,
        argmax,
        per_shell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;

    #[test]
    fn zero_mode_matches_closed_form() {
        // Oracle: on k = 0 the pencil is diagonal; the ratio on e_m is
        // (1+m^2)^g / (B^-2 (l_m)^2 + B^2) with l_m the diagonal of P + Q_A.
        let spec = TorusSpec::default();
        let p = HypoParams {
            gamma: 10.0,
            s: 0.0,
            gain: 0.25,
            b: 1.0,
            a: 1.0,
            variant: HypoVariant::WithQ,
            k_max: 0.0,
            m_max: 6,
        };
        let got = subelliptic_constant(&p, &spec).unwrap().c_sq;
        let expected = (-6i64..=6)
            .map(|m| {
                let l = if m == 0 { 1.0 } else { 50.0 * (m * m) as f64 };
                (1.0 + (m * m) as f64).powf(0.25) / (l * l + 1.0)
            })
            .fold(0.0, f64::max);
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn constant_dominates_rayleigh_quotients() {
        // Oracle: top eigenvalue of the pencil (W_g^2, B^-2 L^H W_s^2 L + B^2 W_s^2)
        // formed explicitly.
        let spec = TorusSpec::default();
        let p = HypoParams {
            gamma: 30.0,
            s: 0.5,
            gain: 0.25,
            b: 2.0,
            a: 3.0,
            variant: HypoVariant::WithQ,
            k_max: 5.0,
            m_max: 8,
        };
        let c = subelliptic_constant(&p, &spec).unwrap();
        assert_eq!(c.per_shell.len(), 5);
        let mode = spec.mode([2, 1]);
        let q = c.per_shell.iter().find(|s| s.0 == 5.0).unwrap().1;
        let n = 17;
        let mut l = assemble_p(30.0, &mode, 8, &spec).unwrap().entries;
        l[(8, 8)] += C64::new(absorbing_value(3.0, &mode), 0.0);
        let ms: Vec<i64> = (-8..=8).collect();
        let ws = |s: f64| {
            CMat::from_diagonal(&crate::CVec::from_iterator(
                n,
                ms.iter().map(|&m| C64::new(sobolev_weight(s, &mode, m), 0.0)),
            ))
        };
        let (a, b, g) = (ws(0.5), ws(0.5), ws(0.75));
        let lw = &a * &l;
        let form = lw.adjoint() * &lw * C64::new(0.25, 0.0) + b.adjoint() * &b * C64::new(4.0, 0.0);
        let inv = crate::linalg::inverse(&form).unwrap();
        let m = &g * inv * &g;
        let top = eigenvalues(&m).unwrap().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!((top - q).abs() < 1e-8 * q, "{top} vs {q}");
    }

    #[test]
    fn hypotheses_are_enforced() {
        let spec = TorusSpec::default();
        let mut p = HypoParams {
            gamma: 5.0,
            s: 0.0,
            gain: 0.25,
            b: 2.0,
            a: 1.0,
            variant: HypoVariant::WithQ,
            k_max: 4.0,
            m_max: 6,
        };
        assert!(subelliptic_constant(&p, &spec).is_err());
        p.variant = HypoVariant::Shifted(3.0);
        p.gamma = 4.0;
        assert!(subelliptic_constant(&p, &spec).is_err());
        p.variant = HypoVariant::Plain;
        assert!(subelliptic_constant(&p, &spec).is_ok());
    }
}
