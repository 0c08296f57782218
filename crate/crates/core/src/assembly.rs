//! Galerkin blocks of `Delta_V`, `X`, `P_gamma`, `Q_A` and the rescaled
//! restricted operator on one horizontal mode.
//!
//! Rows and columns are indexed by the fiber harmonics `exp(i m theta)`,
//! `m = -M..=M`. In this basis `Delta_V` is diagonal (`m^2`) and the geodesic
//! field `X = cos(theta) d_x + sin(theta) d_y` is tridiagonal:
//!
//! ```text
//! X e_m = (i k1 + k2)/2 e_{m+1} + (i k1 - k2)/2 e_{m-1}
//! ```
//!
//! Truncation is a hard cutoff at `|m| = M`.

use crate::error::{KbmError, Result};
use crate::model::{HMode, TorusSpec, VIndexRange};
use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    DeltaV,
    X,
    P,
    Q,
    ScaledRestricted,
}

/// Truncated matrix of an operator on one horizontal mode.
#[derive(Debug, Clone)]
pub struct ModeMatrix {
    pub kind: MatrixKind,
    /// `gamma` for `P`; `1/h` for the rescaled restricted block.
    pub gamma: Option<f64>,
    pub mode: HMode,
    pub m_max: usize,
    /// Vertical index of each row/column.
    pub indices: Vec<i64>,
    pub entries: CMat,
}

impl ModeMatrix {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Entry at vertical indices `(row_m, col_m)`, zero outside the block.
    pub fn at(&self, row_m: i64, col_m: i64) -> C64 {
        let pos = |m| self.indices.iter().position(|&i| i == m);
        match (pos(row_m), pos(col_m)) {
            (Some(r), Some(c)) => self.entries[(r, c)],
            _ => C64::new(0.0, 0.0),
        }
    }
}

fn full_indices(m_max: usize) -> Vec<i64> {
    let m = m_max as i64;
    (-m..=m).collect()
}

fn check_m(m_max: usize) -> Result<VIndexRange> {
    VIndexRange::new(m_max)
}

/// Coefficients `(up, down)` with `X e_m = up e_{m+1} + down e_{m-1}`.
pub fn x_coefficients(mode: &HMode) -> (C64, C64) {
    let [k1, k2] = mode.kappa;
    (C64::new(k2, k1) * 0.5, C64::new(-k2, k1) * 0.5)
}

pub fn assemble_delta_v(mode: &HMode, m_max: usize) -> Result<ModeMatrix> {
    let range = check_m(m_max)?;
    let indices = full_indices(m_max);
    let diag: Vec<C64> = indices
        .iter()
        .map(|&m| C64::new(VIndexRange::vertical_eigenvalue(m), 0.0))
        .collect();
    Ok(ModeMatrix {
        kind: MatrixKind::DeltaV,
        gamma: None,
        mode: *mode,
        m_max,
        entries: CMat::from_diagonal(&nalgebra::DVector::from_vec(diag)),
        indices,
    })
    .inspect(|mm| debug_assert_eq!(mm.dim(), range.len()))
}

pub fn assemble_x(mode: &HMode, m_max: usize) -> Result<ModeMatrix> {
    let range = check_m(m_max)?;
    let n = range.len();
    let (up, down) = x_coefficients(mode);
    let mut entries = CMat::zeros(n, n);
    for col in 0..n {
        if col + 1 < n {
            entries[(col + 1, col)] = up;
        }
        if col > 0 {
            entries[(col - 1, col)] = down;
        }
    }
    Ok(ModeMatrix {
        kind: MatrixKind::X,
        gamma: None,
        mode: *mode,
        m_max,
        indices: full_indices(m_max),
        entries,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(KbmError::invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// `P_gamma = -gamma X + c_n gamma^2 Delta_V` on one mode.
pub fn assemble_p(gamma: f64, mode: &HMode, m_max: usize, spec: &TorusSpec) -> Result<ModeMatrix> {
    check_gamma(gamma)?;
    let x = assemble_x(mode, m_max)?;
    let dv = assemble_delta_v(mode, m_max)?;
    let entries = x.entries * C64::new(-gamma, 0.0) + dv.entries * C64::new(spec.c_n() * gamma * gamma, 0.0);
    Ok(ModeMatrix {
        kind: MatrixKind::P,
        gamma: Some(gamma),
        mode: *mode,
        m_max,
        indices: x.indices,
        entries,
    })
}

/// `(0,0)` entry of `Q_A` on this mode: `A^2` if `|kappa|^2 <= A^2`, else 0.
pub fn absorbing_value(a: f64, mode: &HMode) -> f64 {
    if mode.norm_sq() <= a * a {
        a * a
    } else {
        0.0
    }
}

/// Absorbing potential `Q_A = A^2 Pi 1(Delta_M <= A^2) Pi` on one mode.
pub fn assemble_q(a: f64, mode: &HMode, m_max: usize) -> Result<ModeMatrix> {
    if !(a.is_finite() && a > 0.0) {
        return Err(KbmError::invalid(format!("A must be positive, got {a}")));
    }
    let range = check_m(m_max)?;
    let n = range.len();
    let mut entries = CMat::zeros(n, n);
    entries[(m_max, m_max)] = C64::new(absorbing_value(a, mode), 0.0);
    Ok(ModeMatrix {
        kind: MatrixKind::Q,
        gamma: None,
        mode: *mode,
        m_max,
        indices: full_indices(m_max),
        entries,
    })
}

/// `Pi_perp (c_n Delta_V - h X - h^2 lambda) Pi_perp`: the `2M x 2M` block
/// with the `m = 0` row and column removed.
pub fn assemble_scaled_restricted(
    h: f64,
    lambda: C64,
    mode: &HMode,
    m_max: usize,
    spec: &TorusSpec,
) -> Result<ModeMatrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(KbmError::invalid(format!("h must be positive, got {h}")));
    }
    let x = assemble_x(mode, m_max)?;
    let (_, perp) = projector_indices(m_max)?;
    let n = perp.len();
    let shift = lambda * (h * h);
    let mut entries = CMat::zeros(n, n);
    for (r, &mr) in perp.iter().enumerate() {
        for (c, &mc) in perp.iter().enumerate() {
            let mut v = x.at(mr, mc) * (-h);
            if r == c {
                v += C64::new(spec.c_n() * VIndexRange::vertical_eigenvalue(mr), 0.0) - shift;
            }
            entries[(r, c)] = v;
        }
    }
    Ok(ModeMatrix {
        kind: MatrixKind::ScaledRestricted,
        gamma: Some(1.0 / h),
        mode: *mode,
        m_max,
        indices: perp,
        entries,
    })
}

/// Index sets of `Pi` (`m = 0`) and `Pi_perp` (`m != 0`).
pub fn projector_indices(m_max: usize) -> Result<(Vec<i64>, Vec<i64>)> {
    check_m(m_max)?;
    let all = full_indices(m_max);
    let (zero, perp): (Vec<i64>, Vec<i64>) = all.into_iter().partition(|&m| m == 0);
    Ok((zero, perp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const I: C64 = C64::new(0.0, 1.0);

    /// Quadrature oracle: `(1/2pi) int e^{-i m' t} (i k1 cos t + i k2 sin t) e^{i m t} dt`
    /// by the periodic trapezoid rule (exact for trigonometric polynomials).
    fn x_entry_by_quadrature(kappa: [f64; 2], row_m: i64, col_m: i64) -> C64 {
        let n = 256;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            let t = 2.0 * PI * j as f64 / n as f64;
            let symbol = I * (kappa[0] * t.cos() + kappa[1] * t.sin());
            acc += C64::from_polar(1.0, ((col_m - row_m) as f64) * t) * symbol;
        }
        acc / n as f64
    }

    fn max_abs(a: &CMat) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn x_vanishes_on_zero_mode() {
        let x = assemble_x(&TorusSpec::default().mode([0, 0]), 4).unwrap();
        assert_eq!(max_abs(&x.entries), 0.0);
    }

    #[test]
    fn x_coefficients_match_quadrature() {
        let spec = TorusSpec::default();
        // Frozen values from the quadrature oracle.
        let x10 = assemble_x(&spec.mode([1, 0]), 2).unwrap();
        assert!((x10.at(1, 0) - I * 0.5).norm() < 1e-15);
        assert!((x10.at(0, 1) - I * 0.5).norm() < 1e-15);
        let x01 = assemble_x(&spec.mode([0, 1]), 2).unwrap();
        assert!((x01.at(1, 0) - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((x01.at(0, 1) - C64::new(-0.5, 0.0)).norm() < 1e-15);

        for k in [[1, 0], [0, 1], [2, -3], [-1, 4]] {
            let mode = spec.mode(k);
            let x = assemble_x(&mode, 3).unwrap();
            for r in -3..=3 {
                for c in -3..=3 {
                    let oracle = x_entry_by_quadrature(mode.kappa, r, c);
                    assert!(
                        (x.at(r, c) - oracle).norm() < 1e-13,
                        "k={k:?} ({r},{c}): {} vs {}",
                        x.at(r, c),
                        oracle
                    );
                }
            }
        }
    }

    #[test]
    fn p_examples() {
        let spec = TorusSpec::default();
        let p = assemble_p(2.0, &spec.mode([0, 0]), 1, &spec).unwrap();
        let expect = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(2.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        assert_eq!(p.entries, expect);

        let p = assemble_p(1.0, &spec.mode([1, 0]), 1, &spec).unwrap();
        let d = [0.5, 0.0, 0.5];
        for i in 0..3 {
            assert!((p.entries[(i, i)] - C64::new(d[i], 0.0)).norm() < 1e-15);
        }
        for (r, c) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((p.entries[(r, c)] + I * 0.5).norm() < 1e-15);
        }
        assert_eq!(p.entries[(0, 2)], C64::new(0.0, 0.0));
        assert!(assemble_p(0.0, &spec.mode([1, 0]), 1, &spec).is_err());
        assert!(assemble_p(1.0, &spec.mode([1, 0]), 0, &spec).is_err());
    }

    #[test]
    fn q_examples() {
        let spec = TorusSpec::default();
        let q = assemble_q(1.5, &spec.mode([1, 0]), 2).unwrap();
        assert_eq!(q.at(0, 0), C64::new(2.25, 0.0));
        assert_eq!(q.entries.iter().filter(|z| z.norm() > 0.0).count(), 1);
        let q = assemble_q(1.5, &spec.mode([2, 0]), 2).unwrap();
        assert_eq!(max_abs(&q.entries), 0.0);
        let q = assemble_q(2.0, &spec.mode([2, 0]), 2).unwrap();
        assert_eq!(q.at(0, 0), C64::new(4.0, 0.0));
        assert!(assemble_q(0.0, &spec.mode([0, 0]), 2).is_err());
    }

    #[test]
    fn scaled_restricted_examples() {
        let spec = TorusSpec::default();
        let b = assemble_scaled_restricted(0.3, C64::new(0.0, 0.0), &spec.mode([0, 0]), 1, &spec).unwrap();
        assert_eq!(b.indices, vec![-1, 1]);
        let expect = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.5, 0.0); 2]));
        assert_eq!(b.entries, expect);

        let b = assemble_scaled_restricted(0.01, C64::new(1.0, 0.0), &spec.mode([1, 0]), 1, &spec).unwrap();
        for i in 0..2 {
            assert!((b.entries[(i, i)] - C64::new(0.5 - 1e-4, 0.0)).norm() < 1e-15);
        }
        // m = +-1 only couple through the deleted m = 0 line
        assert_eq!(b.entries[(0, 1)], C64::new(0.0, 0.0));
        assert_eq!(b.entries[(1, 0)], C64::new(0.0, 0.0));

        for m in 1..6 {
            let b = assemble_scaled_restricted(0.2, C64::new(0.3, 1.0), &spec.mode([1, 2]), m, &spec).unwrap();
            assert_eq!(b.entries.len(), (2 * m) * (2 * m));
        }
        assert!(assemble_scaled_restricted(0.0, C64::new(0.0, 0.0), &spec.mode([0, 0]), 1, &spec).is_err());
    }

    #[test]
    fn scaled_restricted_matches_index_filtered_assembly() {
        // Oracle: build the full c_n Delta_V - h X - h^2 lambda from scratch and
        // drop the m = 0 line.
        let spec = TorusSpec::default();
        let (h, lambda, mode, m_max) = (0.07, C64::new(1.3, -0.4), spec.mode([2, -1]), 4);
        let n = 2 * m_max + 1;
        let (up, down) = (
            (I * mode.kappa[0] + mode.kappa[1]) * 0.5,
            (I * mode.kappa[0] - mode.kappa[1]) * 0.5,
        );
        let mut full = CMat::zeros(n, n);
        for c in 0..n {
            let m = c as f64 - m_max as f64;
            full[(c, c)] = C64::new(0.5 * m * m, 0.0) - lambda * h * h;
            if c + 1 < n {
                full[(c + 1, c)] -= up * h;
            }
            if c > 0 {
                full[(c - 1, c)] -= down * h;
            }
        }
        let keep: Vec<usize> = (0..n).filter(|&i| i != m_max).collect();
        let oracle = CMat::from_fn(2 * m_max, 2 * m_max, |r, c| full[(keep[r], keep[c])]);
        let b = assemble_scaled_restricted(h, lambda, &mode, m_max, &spec).unwrap();
        assert!(max_abs(&(b.entries - oracle)) < 1e-15);
    }

    #[test]
    fn projectors_partition_indices() {
        let (z, p) = projector_indices(1).unwrap();
        assert_eq!((z, p), (vec![0], vec![-1, 1]));
        let (z, p) = projector_indices(3).unwrap();
        assert_eq!((z.len(), p.len()), (1, 6));
        let mut all: Vec<i64> = z.iter().chain(&p).copied().collect();
        all.sort();
        assert_eq!(all, (-3..=3).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn x_is_exactly_anti_hermitian(k1 in -30i64..30, k2 in -30i64..30, m in 1usize..12) {
            let x = assemble_x(&TorusSpec::default().mode([k1, k2]), m).unwrap().entries;
            prop_assert_eq!(max_abs(&(x.adjoint() + &x)), 0.0);
        }

        #[test]
        fn x_squared_zero_entry_is_minus_half_laplacian(k1 in -10i64..10, k2 in -10i64..10, m in 1usize..8) {
            let mode = TorusSpec::default().mode([k1, k2]);
            let x = assemble_x(&mode, m).unwrap().entries;
            let xx = &x * &x;
            let target = -mode.norm_sq() / 2.0;
            prop_assert!((xx[(m, m)] - C64::new(target, 0.0)).norm() <= 1e-14 * (1.0 + mode.norm_sq()));
        }

        #[test]
        fn p_is_gamma_squared_times_semiclassical(gamma in 0.1f64..500.0, k1 in -6i64..6, k2 in -6i64..6, m in 1usize..10) {
            let spec = TorusSpec::default();
            let mode = spec.mode([k1, k2]);
            let p = assemble_p(gamma, &mode, m, &spec).unwrap();
            let h = 1.0 / gamma;
            let x = assemble_x(&mode, m).unwrap().entries;
            let dv = assemble_delta_v(&mode, m).unwrap().entries;
            let semi = (dv * C64::new(0.5, 0.0) - x * C64::new(h, 0.0)) * C64::new(gamma * gamma, 0.0);
            let scale = gamma * gamma * (m * m) as f64;
            prop_assert!(max_abs(&(p.entries.clone() - semi)) <= 1e-14 * scale.max(1.0));
            for (i, mi) in p.indices.iter().enumerate() {
                prop_assert_eq!(p.entries[(i, i)].re, 0.5 * gamma * gamma * (mi * mi) as f64);
            }
        }

        #[test]
        fn negated_mode_is_flip_conjugate(k1 in -6i64..6, k2 in -6i64..6, m in 1usize..8, gamma in 0.5f64..50.0) {
            // P(-kappa) = D P(kappa) D with D = diag((-1)^m), and
            // P(-kappa) = J conj(P(kappa)) J with J the flip m -> -m.
            let spec = TorusSpec::default();
            let mode = spec.mode([k1, k2]);
            let p = assemble_p(gamma, &mode, m, &spec).unwrap().entries;
            let q = assemble_p(gamma, &mode.negated(), m, &spec).unwrap().entries;
            let n = 2 * m + 1;
            let sign = |i: usize| if (i + m) % 2 == 0 { 1.0 } else { -1.0 };
            let phased = CMat::from_fn(n, n, |r, c| p[(r, c)] * sign(r) * sign(c));
            prop_assert_eq!(max_abs(&(phased - &q)), 0.0);
            let flipped = CMat::from_fn(n, n, |r, c| p[(n - 1 - r, n - 1 - c)].conj());
            prop_assert_eq!(max_abs(&(flipped - &q)), 0.0);
        }
    }
}
