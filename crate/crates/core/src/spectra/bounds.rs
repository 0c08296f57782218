//! Sobolev-norm measurements of resolvents: the absorbed inverse
//! `(P - lambda + Q_A)^{-1}`, the restricted inverse on `m != 0`, and the
//! distance between `(P - lambda)^{-1}` and its base-Laplacian limit.
//!
//! The comparison operator for `(Delta_M - lambda)^{-1}` lives on the `m = 0`
//! line only: its block is zero except for the `(0,0)` entry
//! `1 / (|kappa|^2 - lambda)`.

use crate::assembly::{absorbing_value, assemble_p, assemble_scaled_restricted};
use crate::error::{KbmError, Result};
use crate::linalg::{inverse, smin, weighted_opnorm, weighted_opnorm_on};
use crate::model::{sobolev_weight, HMode, Shell, TorusSpec};
use crate::{CMat, C64};
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;

/// The tail band is the shells with `|kappa|^2 >= TAIL_BAND * K_max`.
pub const TAIL_BAND: f64 = 0.9;
/// Default bound on `tail / sup`; see [`NormSweep::check_tail`].
pub const DEFAULT_TAIL_RATIO: f64 = 0.5;
pub const DEFAULT_C0: f64 = 10.0;
/// Resolvent parameters must stay this far from the base spectrum.
pub const MIN_BASE_DISTANCE: f64 = 0.1;
/// `smin(P - lambda)` below this is treated as `lambda` being on the spectrum.
pub const MIN_BLOCK_SMIN: f64 = 1e-6;

/// Nine-point grid `{0, +-c0, +-c0 i, (+-c0 +- c0 i)/sqrt 2}`.
pub fn default_lambda_grid(c0: f64) -> Vec<C64> {
    let d = c0 * FRAC_1_SQRT_2;
    vec![
        C64::new(0.0, 0.0),
        C64::new(c0, 0.0),
        C64::new(-c0, 0.0),
        C64::new(0.0, c0),
        C64::new(0.0, -c0),
        C64::new(d, d),
        C64::new(d, -d),
        C64::new(-d, d),
        C64::new(-d, -d),
    ]
}

/// Per-shell norms of one sweep and their supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSweep {
    pub sup: f64,
    /// `|kappa|^2` where the supremum is attained.
    pub argmax: f64,
    /// Largest norm on the tail band.
    pub tail: f64,
    /// `(|kappa|^2, norm)` in ascending `|kappa|^2`.
    pub per_shell: Vec<(f64, f64)>,
}

impl NormSweep {
    fn from_shells(per_shell: Vec<(f64, f64)>, k_max: f64) -> Self {
        let (mut sup, mut argmax) = (0.0, 0.0);
        for &(q, v) in &per_shell {
            // NaN and infinity both dominate
            if !(v <= sup) {
                sup = v;
                argmax = q;
            }
        }
        let band: Vec<f64> = per_shell
            .iter()
            .filter(|(q, _)| *q >= TAIL_BAND * k_max)
            .map(|p| p.1)
            .collect();
        let tail = if band.is_empty() {
            per_shell.last().map_or(0.0, |p| p.1)
        } else {
            band.into_iter().fold(0.0, f64::max)
        };
        Self {
            sup,
            argmax,
            tail,
            per_shell,
        }
    }

    /// Fails unless the norm on the top band of shells is at most
    /// `ratio * sup`, i.e. the supremum is not still growing at `K_max`.
    pub fn check_tail(&self, ratio: f64) -> Result<()> {
        if self.tail <= ratio * self.sup {
            Ok(())
        } else {
            Err(KbmError::TailNotControlled {
                tail: self.tail,
                sup: self.sup,
            })
        }
    }
}

fn sweep<F>(spec: &TorusSpec, k_max: f64, f: F) -> Result<NormSweep>
where
    F: Fn(&Shell) -> Result<f64> + Sync,
{
    let shells = spec.shells_within(k_max);
    let norms: Vec<Result<f64>> = shells.par_iter().map(&f).collect();
    let per_shell = shells
        .iter()
        .zip(norms)
        .map(|(s, n)| n.map(|v| (s.norm_sq, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormSweep::from_shells(per_shell, k_max))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(KbmError::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Block of `P - lambda + Q_A` (or `P - lambda` when `a` is `None`).
fn shifted_block(gamma: f64, lambda: C64, a: Option<f64>, mode: &HMode, m: usize, spec: &TorusSpec) -> Result<CMat> {
    let mut b = assemble_p(gamma, mode, m, spec)?.entries;
    for i in 0..b.nrows() {
        b[(i, i)] -= lambda;
    }
    if let Some(a) = a {
        b[(m, m)] += C64::new(absorbing_value(a, mode), 0.0);
    }
    Ok(b)
}

fn scale_both(block: &CMat, s: f64, mode: &HMode, ms: &[i64]) -> CMat {
    CMat::from_fn(block.nrows(), block.ncols(), |r, c| {
        block[(r, c)] * (sobolev_weight(s, mode, ms[r]) / sobolev_weight(s, mode, ms[c]))
    })
}

fn indices(m: usize) -> Vec<i64> {
    let m = m as i64;
    (-m..=m).collect()
}

/// Grid for the absorbed-inverse studies.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundStudy {
    pub gammas: Vec<f64>,
    pub a_values: Vec<f64>,
    pub lambdas: Vec<C64>,
    pub s_values: Vec<f64>,
    pub c0: f64,
    pub k_max: f64,
    pub m_max: usize,
    pub tail_ratio: f64,
}

impl BoundStudy {
    /// The grid used by the acceptance runs, with `K_max = 4 A_max^2 + 50`.
    pub fn standard() -> Self {
        Self {
            gammas: vec![50.0, 100.0, 200.0],
            a_values: vec![5.0, 10.0],
            lambdas: default_lambda_grid(DEFAULT_C0),
            s_values: vec![0.0, 1.0],
            c0: DEFAULT_C0,
            k_max: 450.0,
            m_max: 16,
            tail_ratio: DEFAULT_TAIL_RATIO,
        }
    }

    fn validate(&self) -> Result<()> {
        for &g in &self.gammas {
            check_positive("gamma", g)?;
            for &a in &self.a_values {
                check_positive("A", a)?;
                if g <= a {
                    return Err(KbmError::invalid(format!("need gamma > A, got gamma = {g}, A = {a}")));
                }
            }
        }
        for l in &self.lambdas {
            if l.norm() > self.c0 * (1.0 + 1e-12) {
                return Err(KbmError::invalid(format!(
                    "|lambda| = {} exceeds C0 = {}",
                    l.norm(),
                    self.c0
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub gamma: f64,
    pub a: f64,
    pub lambda: C64,
    pub s: f64,
    /// Supremum of the per-mode norm over `|kappa|^2 <= K_max`.
    pub sup: f64,
    /// `sup` times the normalising power of `A`.
    pub value: f64,
    pub argmax: f64,
}

fn bound_study<F>(study: &BoundStudy, spec: &TorusSpec, a_power: f64, norm: F) -> Result<Vec<BoundRow>>
where
    F: Fn(f64, f64, C64, f64, &HMode) -> Result<f64> + Sync,
{
    study.validate()?;
    let mut rows = Vec::new();
    for &gamma in &study.gammas {
        for &a in &study.a_values {
            for &lambda in &study.lambdas {
                for &s in &study.s_values {
                    let sw = sweep(spec, study.k_max, |sh| norm(gamma, a, lambda, s, &sh.representative))?;
                    if sw.sup.is_finite() {
                        sw.check_tail(study.tail_ratio)?;
                    }
                    rows.push(BoundRow {
                        gamma,
                        a,
                        lambda,
                        s,
                        sup: sw.sup,
                        value: a.powf(a_power) * sw.sup,
                        argmax: sw.argmax,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `A sup_k ||(P - lambda + Q_A)^{-1}||_{H^s -> H^s}`. A singular block gives
/// an infinite entry.
pub fn inverse_bound_study(study: &BoundStudy, spec: &TorusSpec) -> Result<Vec<BoundRow>> {
    let m = study.m_max;
    let ms = indices(m);
    bound_study(study, spec, 1.0, |gamma, a, lambda, s, mode| {
        let b = shifted_block(gamma, lambda, Some(a), mode, m, spec)?;
        let sv = smin(&scale_both(&b, s, mode, &ms))?;
        Ok(if sv > 0.0 { 1.0 / sv } else { f64::INFINITY })
    })
}

/// `A^{1/2} sup_k ||(P - lambda + Q_A)^{-1}||_{H^s -> H^{s+1/4}}`.
pub fn regularity_bound_study(study: &BoundStudy, spec: &TorusSpec) -> Result<Vec<BoundRow>> {
    let m = study.m_max;
    bound_study(study, spec, 0.5, |gamma, a, lambda, s, mode| {
        let b = shifted_block(gamma, lambda, Some(a), mode, m, spec)?;
        match inverse(&b) {
            Ok(inv) => weighted_opnorm(&inv, s, s + 0.25, mode),
            Err(KbmError::Singular(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedRow {
    pub h: f64,
    pub lambda: C64,
    pub s: f64,
    pub sup: f64,
    pub argmax: f64,
}

/// `sup_k ||(Pi_perp (c_n Delta_V - h X - h^2 lambda) Pi_perp)^{-1}||_{H^s}`
/// over `|kappa|^2 <= k_max`.
#[allow(clippy::too_many_arguments)]
pub fn restricted_inverse_study(
    h_grid: &[f64],
    lambdas: &[C64],
    s: f64,
    spec: &TorusSpec,
    k_max: f64,
    m_max: usize,
    h0: f64,
    c0: f64,
) -> Result<Vec<RestrictedRow>> {
    let mut rows = Vec::new();
    for &h in h_grid {
        check_positive("h", h)?;
        if h >= h0 {
            return Err(KbmError::invalid(format!("need h < h0 = {h0}, got {h}")));
        }
        for &lambda in lambdas {
            if lambda.norm() > c0 * (1.0 + 1e-12) {
                return Err(KbmError::invalid(format!(
                    "|lambda| = {} exceeds C0 = {c0}",
                    lambda.norm()
                )));
            }
            let sw = sweep(spec, k_max, |sh| {
                let mode = sh.representative;
                let b = assemble_scaled_restricted(h, lambda, &mode, m_max, spec)?;
                let sv = smin(&scale_both(&b.entries, s, &mode, &b.indices))?;
                Ok(if sv > 0.0 { 1.0 / sv } else { f64::INFINITY })
            })?;
            rows.push(RestrictedRow {
                h,
                lambda,
                s,
                sup: sw.sup,
                argmax: sw.argmax,
            });
        }
    }
    Ok(rows)
}

/// `sup_k ||(P - lambda)^{-1} - R_0||_{H^s -> H^{s+1/4}}` where `R_0` is the
/// base resolvent on the `m = 0` line. The sweep must end in a band where
/// the per-mode norm has dropped to `tail_ratio * sup`.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_diff_norm(
    gamma: f64,
    lambda: C64,
    s: f64,
    spec: &TorusSpec,
    k_max: f64,
    m_max: usize,
    tail_ratio: f64,
) -> Result<NormSweep> {
    check_positive("gamma", gamma)?;
    if spec.distance_to_base_spectrum(lambda) < MIN_BASE_DISTANCE {
        return Err(KbmError::NearSpectrum(lambda));
    }
    let sw = sweep(spec, k_max, |sh| {
        let mode = sh.representative;
        let block = shifted_block(gamma, lambda, None, &mode, m_max, spec)?;
        if smin(&block)? < MIN_BLOCK_SMIN {
            return Err(KbmError::NearSpectrum(lambda));
        }
        let mut d = inverse(&block)?;
        d[(m_max, m_max)] -= C64::new(1.0, 0.0) / (C64::new(mode.norm_sq(), 0.0) - lambda);
        weighted_opnorm(&d, s, s + 0.25, &mode)
    })?;
    sw.check_tail(tail_ratio)?;
    Ok(sw)
}

/// `sup_k ||(P - lambda + Q_A)^{-1} Q_A - R_0^A Q_A||_{H^s -> H^{s+N}}`, with
/// `R_0^A` the absorbed base resolvent on the `m = 0` line. Only modes with
/// `|kappa|^2 <= A^2` carry `Q_A`, so the sweep is finite.
#[allow(clippy::too_many_arguments)]
pub fn qa_resolvent_diff(
    gamma: f64,
    a: f64,
    lambda: C64,
    s: f64,
    n: f64,
    spec: &TorusSpec,
    m_max: usize,
) -> Result<NormSweep> {
    check_positive("gamma", gamma)?;
    check_positive("A", a)?;
    if gamma <= a {
        return Err(KbmError::invalid(format!(
            "need gamma > A, got gamma = {gamma}, A = {a}"
        )));
    }
    let ms = indices(m_max);
    let sw = sweep(spec, a * a, |sh| {
        let mode = sh.representative;
        let q = absorbing_value(a, &mode);
        let block = shifted_block(gamma, lambda, Some(a), &mode, m_max, spec)?;
        if smin(&block)? < MIN_BLOCK_SMIN {
            return Err(KbmError::NearSpectrum(lambda));
        }
        let inv = inverse(&block)?;
        // (.) Q_A keeps only column m = 0, scaled by q
        let mut col = CMat::from_fn(ms.len(), 1, |r, _| inv[(r, m_max)] * q);
        col[(m_max, 0)] -= C64::new(q, 0.0) / (C64::new(mode.norm_sq() + q, 0.0) - lambda);
        weighted_opnorm_on(&col, &ms, &[0], s, s + n, &mode)
    })?;
    Ok(sw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> TorusSpec {
        TorusSpec::default()
    }

    #[test]
    fn zero_mode_absorbed_inverse_is_diagonal() {
        // Oracle: the k = 0 block is diag(A^2, gamma^2 m^2 / 2) at lambda = 0.
        let (gamma, a) = (10.0, 2.0);
        let mode = spec().mode([0, 0]);
        let b = shifted_block(gamma, C64::new(0.0, 0.0), Some(a), &mode, 6, &spec()).unwrap();
        let norm = 1.0 / smin(&b).unwrap();
        let expected = (1.0 / (a * a)).max(2.0 / (gamma * gamma));
        assert!((norm - expected).abs() < 1e-14);
        assert!(a * norm <= 1.0 / a + 1e-14);
    }

    #[test]
    fn small_grid_is_finite() {
        let study = BoundStudy {
            gammas: vec![50.0, 100.0, 200.0],
            a_values: vec![5.0, 10.0],
            lambdas: vec![C64::new(0.0, 0.0), C64::new(5.0, 0.0), C64::new(0.0, 5.0)],
            s_values: vec![0.0],
            k_max: 450.0,
            ..BoundStudy::standard()
        };
        for row in inverse_bound_study(&study, &spec()).unwrap() {
            assert!(row.value.is_finite() && row.value > 0.0, "{row:?}");
        }
    }

    #[test]
    fn study_rejects_gamma_below_a() {
        let study = BoundStudy {
            gammas: vec![4.0],
            ..BoundStudy::standard()
        };
        assert!(inverse_bound_study(&study, &spec()).is_err());
    }

    #[test]
    fn restricted_inverse_examples() {
        let r = restricted_inverse_study(&[0.05], &[C64::new(0.0, 0.0)], 0.0, &spec(), 0.0, 8, 0.1, 10.0).unwrap();
        assert!((r[0].sup - 2.0).abs() < 1e-12);

        let lambdas = default_lambda_grid(10.0);
        let at = |h: f64| {
            restricted_inverse_study(&[h], &lambdas, 0.0, &spec(), 9.0, 16, 0.1, 10.0)
                .unwrap()
                .iter()
                .map(|r| r.sup)
                .fold(0.0, f64::max)
        };
        let (full, half) = (at(0.01), at(0.005));
        assert!(full.is_finite() && full <= 6.0 && full >= 2.0 / 3.0);
        assert!((full - half).abs() < 10.0 * 0.01);
    }

    #[test]
    fn zero_mode_resolvent_difference_is_diagonal() {
        // Oracle: D = diag(1/(gamma^2 m^2/2 + 1)) off m = 0 at lambda = -1.
        let mode = spec().mode([0, 0]);
        for gamma in [10.0, 100.0] {
            let block = shifted_block(gamma, C64::new(-1.0, 0.0), None, &mode, 8, &spec()).unwrap();
            let mut d = inverse(&block).unwrap();
            d[(8, 8)] -= C64::new(1.0, 0.0);
            assert!(d[(8, 8)].norm() < 1e-15);
            let expected = (1..=8)
                .map(|m| (1.0 + (m * m) as f64).powf(0.125) / (gamma * gamma * (m * m) as f64 / 2.0 + 1.0))
                .fold(0.0, f64::max);
            let got = weighted_opnorm(&d, 0.0, 0.25, &mode).unwrap();
            assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");
        }
    }

    #[test]
    fn resolvent_difference_rejects_points_near_base_spectrum() {
        let err = resolvent_diff_norm(10.0, C64::new(1.05, 0.0), 0.0, &spec(), 50.0, 8, 0.5).unwrap_err();
        assert!(matches!(err, KbmError::NearSpectrum(_)));
    }

    #[test]
    fn short_sweep_fails_tail_check() {
        let err = resolvent_diff_norm(10.0, C64::new(-1.0, 0.0), 0.0, &spec(), 2.0, 12, 0.1).unwrap_err();
        assert!(matches!(err, KbmError::TailNotControlled { .. }));
    }

    #[test]
    fn qa_difference_vanishes_when_only_zero_mode_absorbs() {
        for gamma in [3.0, 30.0] {
            let sw = qa_resolvent_diff(gamma, 0.5, C64::new(-1.0, 0.0), 0.0, 0.0, &spec(), 8).unwrap();
            assert_eq!(sw.per_shell.len(), 1);
            assert!(sw.sup < 1e-15, "{}", sw.sup);
        }
    }
}
