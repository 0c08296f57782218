//! Dense complex linear algebra: certified eigenpairs, singular values,
//! Sobolev-weighted operator norms, adaptive truncation and the matrix
//! exponential.
//!
//! Eigenvalues come from nalgebra's complex Schur form; eigenvectors are
//! recovered from the triangular factor by back substitution and every pair
//! carries its own residual `||A v - lambda v||`. The blocks handled here are
//! non-normal, so a pair whose residual exceeds `EIG_RESIDUAL_REL * ||A||_2`
//! is returned flagged instead of being trusted.

use crate::error::{KbmError, Result};
use crate::model::{sobolev_weight, HMode, SpectralWindow};
use crate::{CMat, CVec, C64};
use nalgebra::DVector;

/// Relative residual accepted for an eigenpair.
pub const EIG_RESIDUAL_REL: f64 = 1e-10;
/// Default absolute drift for the truncation controller.
pub const TRUNCATION_DRIFT_TOL: f64 = 1e-8;
/// Relative radius under which eigenvalues are considered one cluster.
pub const CLUSTER_REL: f64 = 1e-6;
/// Default ceiling on the vertical truncation.
pub const DEFAULT_M_CEILING: usize = 512;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    /// Unit-norm right eigenvector.
    pub right_vector: CVec,
    pub residual: f64,
    /// `residual <= EIG_RESIDUAL_REL * ||A||_2`.
    pub certified: bool,
}

fn check_square_finite(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(KbmError::invalid(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(KbmError::NonFinite);
    }
    Ok(())
}

fn cmp_complex(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    a.clone()
        .try_schur(f64::EPSILON, 200 * n.max(10))
        .map(|s| s.unpack())
        .ok_or(KbmError::EigenFailure(n))
}

/// Eigenvalues only, sorted by `(re, im)`.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    check_square_finite(a)?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = schur(a)?;
    let mut values: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    values.sort_by(cmp_complex);
    Ok(values)
}

/// Full eigendecomposition with residual certificates, sorted by `(re, im)`.
pub fn eig(a: &CMat) -> Result<Vec<EigenPair>> {
    check_square_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (q, t) = schur(a)?;
    let norm = spectral_norm(a)?;
    let tiny = f64::MIN_POSITIVE / f64::EPSILON;

    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        // Back substitution on the leading k x k triangle, perturbing
        // near-zero pivots the same way LAPACK's trevc does.
        let floor = (f64::EPSILON * lambda.norm()).max(f64::EPSILON * norm).max(tiny);
        let mut y = CVec::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = t[(i, k)];
            for j in (i + 1)..k {
                acc += t[(i, j)] * y[j];
            }
            let mut pivot = t[(i, i)] - lambda;
            if pivot.norm() < floor {
                pivot = C64::new(floor, 0.0);
            }
            y[i] = -acc / pivot;
            let big = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                y /= C64::new(big, 0.0);
            }
        }
        let mut v = &q * y;
        let vn = v.norm();
        v /= C64::new(vn, 0.0);
        let residual = (a * &v - &v * lambda).norm();
        pairs.push(EigenPair {
            value: lambda,
            right_vector: v,
            residual,
            certified: residual <= EIG_RESIDUAL_REL * norm.max(f64::MIN_POSITIVE),
        });
    }
    pairs.sort_by(|a, b| cmp_complex(&a.value, &b.value));
    Ok(pairs)
}

pub fn singular_values(a: &CMat) -> Result<DVector<f64>> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(KbmError::NonFinite);
    }
    if a.is_empty() {
        return Ok(DVector::zeros(0));
    }
    Ok(a.clone().svd(false, false).singular_values)
}

/// `||A||_2`.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.iter().copied().fold(0.0, f64::max))
}

/// Smallest singular value; `1 / ||A^{-1}||_2` when `A` is invertible.
pub fn smin(a: &CMat) -> Result<f64> {
    let sv = singular_values(a)?;
    let dim = a.nrows().min(a.ncols());
    if dim == 0 {
        return Ok(0.0);
    }
    // nalgebra returns min(nrows, ncols) values
    Ok(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// 2-norm condition number `sigma_max / sigma_min`.
pub fn condition_number(a: &CMat) -> Result<f64> {
    let sv = singular_values(a)?;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    check_square_finite(a)?;
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| KbmError::Singular(format!("{}x{} block", a.nrows(), a.ncols())))
}

pub fn solve(a: &CMat, b: &CVec) -> Result<CVec> {
    check_square_finite(a)?;
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| KbmError::Singular(format!("{}x{} block", a.nrows(), a.ncols())))
}

/// `||W_{s_out} A W_{s_in}^{-1}||_2` for a block indexed by `m = -M..=M`.
pub fn weighted_opnorm(block: &CMat, s_in: f64, s_out: f64, mode: &HMode) -> Result<f64> {
    if block.nrows().is_multiple_of(2) || block.nrows() != block.ncols() {
        return Err(KbmError::invalid("weighted_opnorm expects a (2M+1)-square block"));
    }
    let m = (block.nrows() / 2) as i64;
    let ms: Vec<i64> = (-m..=m).collect();
    weighted_opnorm_on(block, &ms, &ms, s_in, s_out, mode)
}

/// Weighted norm for a block whose rows carry vertical indices `row_ms` and
/// columns `col_ms`.
pub fn weighted_opnorm_on(
    block: &CMat,
    row_ms: &[i64],
    col_ms: &[i64],
    s_in: f64,
    s_out: f64,
    mode: &HMode,
) -> Result<f64> {
    if block.nrows() != row_ms.len() || block.ncols() != col_ms.len() {
        return Err(KbmError::invalid("index list does not match block shape"));
    }
    let scaled = CMat::from_fn(block.nrows(), block.ncols(), |r, c| {
        block[(r, c)] * (sobolev_weight(s_out, mode, row_ms[r]) / sobolev_weight(s_in, mode, col_ms[c]))
    });
    spectral_norm(&scaled)
}

/// Single-linkage clusters of values closer than `rel * max(1, |lambda|)`.
/// Groups and members are returned in index order.
pub fn cluster(values: &[C64], rel: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let radius = rel * 1f64.max(values[i].norm()).max(values[j].norm());
            if (values[i] - values[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub m_used: usize,
    pub m_check: usize,
    /// Largest movement of an in-window eigenvalue between `m_used` and
    /// `m_check`.
    pub max_drift: f64,
    pub converged: bool,
    pub ceiling: usize,
}

fn drift_between(coarse: &[C64], fine: &[C64], window: &SpectralWindow) -> f64 {
    let inside = |v: &[C64]| v.iter().copied().filter(|z| window.contains(*z)).collect::<Vec<_>>();
    let (ci, fi) = (inside(coarse), inside(fine));
    if ci.len() != fi.len() {
        return f64::INFINITY;
    }
    let nearest = |z: C64, pool: &[C64]| pool.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
    let a = ci.iter().map(|&z| nearest(z, fine)).fold(0.0, f64::max);
    let b = fi.iter().map(|&z| nearest(z, coarse)).fold(0.0, f64::max);
    a.max(b)
}

/// Doubles the truncation from `m0` until every eigenvalue inside `window`
/// moves by less than `tol` under a further doubling. Fails with
/// [`KbmError::TruncationCeiling`] once the check truncation would exceed
/// `ceiling`.
pub fn truncation_search<F>(
    builder: F,
    window: &SpectralWindow,
    tol: f64,
    m0: usize,
    ceiling: usize,
) -> Result<TruncationReport>
where
    F: Fn(usize) -> Result<CMat>,
{
    if m0 < 4 {
        return Err(KbmError::invalid(format!("M0 must be >= 4, got {m0}")));
    }
    if !(tol >= 0.0) {
        return Err(KbmError::invalid(format!("tolerance must be >= 0, got {tol}")));
    }
    let mut report = TruncationReport {
        m_used: m0,
        m_check: 2 * m0,
        max_drift: f64::INFINITY,
        converged: false,
        ceiling,
    };
    let mut m = m0;
    let mut coarse = eigenvalues(&builder(m)?)?;
    loop {
        let m_check = 2 * m;
        if m_check > ceiling {
            return Err(KbmError::TruncationCeiling {
                report: Box::new(report),
            });
        }
        let fine = eigenvalues(&builder(m_check)?)?;
        report.m_used = m;
        report.m_check = m_check;
        report.max_drift = drift_between(&coarse, &fine, window);
        if report.max_drift < tol {
            report.converged = true;
            return Ok(report);
        }
        if tol == 0.0 {
            // strict `< 0` can never hold; stop with the partial report
            return Err(KbmError::TruncationCeiling {
                report: Box::new(report),
            });
        }
        m = m_check;
        coarse = fine;
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    check_square_finite(a)?;
    let n = a.nrows();
    let id = CMat::identity(n, n);
    if n == 0 {
        return Ok(id);
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * C64::new(0.5f64.powi(s), 0.0);
    let b = |i: usize| C64::new(PADE13[i], 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .ok_or_else(|| KbmError::Singular("Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}
