//! Base geometry of the flat torus, horizontal/vertical Fourier bookkeeping
//! and Sobolev weights.
//!
//! The unit tangent bundle of `R^2 / (L1 Z x L2 Z)` is `T^2 x S^1` with the
//! product metric, so the total Laplacian acts on `exp(i(kappa.x + m theta))`
//! with eigenvalue `|kappa|^2 + m^2`. Every limit object used elsewhere in the
//! crate is computed from this diagonal form.

use crate::error::{KbmError, Result};
use crate::C64;
use std::f64::consts::PI;

/// Relative tolerance used to merge lattice norms into one eigenvalue.
const NORM_MERGE_REL: f64 = 1e-12;

/// Flat base torus with side lengths `(L1, L2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSpec {
    dim: usize,
    lengths: [f64; 2],
}

impl Default for TorusSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            lengths: [2.0 * PI, 2.0 * PI],
        }
    }
}

impl TorusSpec {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        Self::with_dimension(2, [l1, l2])
    }

    /// Explicit-dimension constructor. Only `n = 2` is implemented; higher
    /// dimensions need spherical-harmonic fibers and are rejected.
    pub fn with_dimension(dim: usize, lengths: [f64; 2]) -> Result<Self> {
        if dim != 2 {
            return Err(KbmError::UnsupportedDimension(dim));
        }
        if !lengths.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(KbmError::invalid(format!(
                "torus side lengths must be positive, got {lengths:?}"
            )));
        }
        Ok(Self { dim, lengths })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    /// `c_n = 1 / (n (n - 1))`; equal to `1/2` on surfaces.
    pub fn c_n(&self) -> f64 {
        let n = self.dim as f64;
        1.0 / (n * (n - 1.0))
    }

    pub fn mode(&self, k: [i64; 2]) -> HMode {
        HMode::new(k, self)
    }

    /// Volume of `SM = T^2 x S^1`.
    pub fn bundle_volume(&self) -> f64 {
        self.lengths[0] * self.lengths[1] * 2.0 * PI
    }

    /// Integer box half-widths guaranteed to contain every lattice point with
    /// `|kappa|^2 <= k_max_sq`.
    fn lattice_bounds(&self, k_max_sq: f64) -> [i64; 2] {
        let r = k_max_sq.max(0.0).sqrt();
        [0, 1].map(|j| (r * self.lengths[j] / (2.0 * PI)).ceil() as i64 + 1)
    }

    /// All horizontal modes with `lo < |kappa|^2 <= hi`, ordered by
    /// `(|kappa|^2, k1, k2)`.
    pub fn modes_in_shell(&self, lo: f64, hi: f64) -> Vec<HMode> {
        let [b1, b2] = self.lattice_bounds(hi);
        let mut out = Vec::new();
        for k1 in -b1..=b1 {
            for k2 in -b2..=b2 {
                let mode = self.mode([k1, k2]);
                let q = mode.norm_sq();
                if q <= hi && q > lo {
                    out.push(mode);
                }
            }
        }
        out.sort_by(|a, b| a.norm_sq().total_cmp(&b.norm_sq()).then(a.k.cmp(&b.k)));
        out
    }

    /// All horizontal modes with `|kappa|^2 <= k_max_sq`.
    pub fn modes_within(&self, k_max_sq: f64) -> Vec<HMode> {
        self.modes_in_shell(f64::NEG_INFINITY, k_max_sq)
    }

    /// Distinct values of `|kappa|^2 <= k_max_sq`, each with one representative
    /// mode and its lattice multiplicity.
    pub fn shells_within(&self, k_max_sq: f64) -> Vec<Shell> {
        let mut shells: Vec<Shell> = Vec::new();
        for mode in self.modes_within(k_max_sq) {
            match shells.last_mut() {
                Some(last) if same_norm(last.norm_sq, mode.norm_sq()) => last.multiplicity += 1,
                _ => shells.push(Shell {
                    norm_sq: mode.norm_sq(),
                    representative: mode,
                    multiplicity: 1,
                }),
            }
        }
        shells
    }

    /// Every mode belonging to `shell`.
    pub fn shell_modes(&self, shell: &Shell) -> Vec<HMode> {
        let hi = shell.norm_sq * (1.0 + 2.0 * NORM_MERGE_REL) + NORM_MERGE_REL;
        self.modes_within(hi)
            .into_iter()
            .filter(|m| same_norm(m.norm_sq(), shell.norm_sq))
            .collect()
    }

    /// Distance from `z` to the nearest eigenvalue `|kappa|^2` of the base
    /// Laplacian.
    pub fn distance_to_base_spectrum(&self, z: C64) -> f64 {
        // 0 is always an eigenvalue at distance |z|, and any v > 2|z| is
        // farther than that.
        self.shells_within(2.0 * z.norm() + 1.0)
            .iter()
            .map(|s| (z - C64::new(s.norm_sq, 0.0)).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

fn same_norm(a: f64, b: f64) -> bool {
    (a - b).abs() <= NORM_MERGE_REL * a.abs().max(b.abs()).max(1.0)
}

/// A set of horizontal modes sharing one value of `|kappa|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub norm_sq: f64,
    pub representative: HMode,
    pub multiplicity: usize,
}

/// Horizontal Fourier mode `exp(i kappa . x)` with `kappa_j = 2 pi k_j / L_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HMode {
    pub k: [i64; 2],
    pub kappa: [f64; 2],
}

impl HMode {
    pub fn new(k: [i64; 2], spec: &TorusSpec) -> Self {
        let l = spec.lengths();
        Self {
            k,
            kappa: [2.0 * PI * k[0] as f64 / l[0], 2.0 * PI * k[1] as f64 / l[1]],
        }
    }

    /// Mode with an arbitrary wave vector; used for rotated or off-lattice
    /// checks. `k` is left at zero.
    pub fn from_kappa(kappa: [f64; 2]) -> Self {
        Self { k: [0, 0], kappa }
    }

    pub fn norm_sq(&self) -> f64 {
        self.kappa[0] * self.kappa[0] + self.kappa[1] * self.kappa[1]
    }

    pub fn negated(&self) -> Self {
        Self {
            k: [-self.k[0], -self.k[1]],
            kappa: [-self.kappa[0], -self.kappa[1]],
        }
    }
}

/// Vertical truncation `m in {-M, ..., M}` of the fiber harmonics
/// `exp(i m theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VIndexRange {
    m_max: usize,
}

impl VIndexRange {
    pub fn new(m_max: usize) -> Result<Self> {
        if m_max < 1 {
            return Err(KbmError::invalid("vertical truncation M must be >= 1"));
        }
        Ok(Self { m_max })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn len(&self) -> usize {
        2 * self.m_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let m = self.m_max as i64;
        -m..=m
    }

    /// Row/column position of index `m`.
    pub fn position(&self, m: i64) -> Option<usize> {
        let shifted = m + self.m_max as i64;
        (0..self.len() as i64).contains(&shifted).then_some(shifted as usize)
    }

    /// Eigenvalue of the vertical Laplacian on `exp(i m theta)`:
    /// `|m| (|m| + n - 2) = m^2` for `n = 2`.
    pub fn vertical_eigenvalue(m: i64) -> f64 {
        (m * m) as f64
    }
}

/// `H^s` weight `(1 + |kappa|^2 + m^2)^{s/2}`.
pub fn sobolev_weight(s: f64, mode: &HMode, m: i64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    (1.0 + mode.norm_sq() + (m * m) as f64).powf(0.5 * s)
}

/// Regularity index together with its weight function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevParams {
    pub s: f64,
}

impl SobolevParams {
    pub fn new(s: f64) -> Self {
        Self { s }
    }

    pub fn weight(&self, mode: &HMode, m: i64) -> f64 {
        sobolev_weight(self.s, mode, m)
    }

    /// Weights for the given vertical indices, in order.
    pub fn weights(&self, mode: &HMode, ms: &[i64]) -> Vec<f64> {
        ms.iter().map(|&m| self.weight(mode, m)).collect()
    }
}

/// Closed rectangle `[re_min, re_max] x [im_min, im_max]` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SpectralWindow {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let finite = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite());
        if !finite || re_min >= re_max || im_min >= im_max {
            return Err(KbmError::invalid(format!(
                "window [{re_min}, {re_max}] x [{im_min}, {im_max}] is empty"
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    /// Square window `[-r, r] x [-r, r]`.
    pub fn centered(r: f64) -> Result<Self> {
        Self::new(-r, r, -r, r)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Distance from an interior point to the boundary (negative outside).
    pub fn interior_distance(&self, z: C64) -> f64 {
        (z.re - self.re_min)
            .min(self.re_max - z.re)
            .min(z.im - self.im_min)
            .min(self.im_max - z.im)
    }

    pub fn contains_with_margin(&self, z: C64, margin: f64) -> bool {
        self.interior_distance(z) > margin
    }

    pub fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.re_max - self.re_min) + (self.im_max - self.im_min))
    }
}

/// Eigenvalues of the base Laplacian inside `window`, with lattice
/// multiplicities, ascending.
pub fn base_spectrum(spec: &TorusSpec, window: &SpectralWindow) -> Vec<(f64, usize)> {
    if window.im_min > 0.0 || window.im_max < 0.0 || window.re_max < 0.0 {
        return Vec::new();
    }
    spec.shells_within(window.re_max)
        .into_iter()
        .filter(|s| s.norm_sq >= window.re_min && s.norm_sq <= window.re_max)
        .map(|s| (s.norm_sq, s.multiplicity))
        .collect()
}

/// `base_spectrum` expanded so that each eigenvalue appears `multiplicity`
/// times.
pub fn expanded_base_spectrum(spec: &TorusSpec, window: &SpectralWindow) -> Vec<f64> {
    base_spectrum(spec, window)
        .into_iter()
        .flat_map(|(v, m)| std::iter::repeat_n(v, m))
        .collect()
}
