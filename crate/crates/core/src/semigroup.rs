//! The heat semigroup `exp(-t P_gamma)`, the spectral gap and the finite
//! eigenvalue expansion of `exp(-t P_gamma) u` for `t >= 1`.
//!
//! States are stored as coefficients in the orthonormal basis
//! `exp(i (kappa . x + m theta)) / sqrt(Vol(SM))`, so the `L^2` norm is the
//! Euclidean norm of the coefficients and the equilibrium average of `u` is
//! carried entirely by the `(k, m) = (0, 0)` coefficient.

use crate::assembly::assemble_p;
use crate::error::{KbmError, Result};
use crate::linalg::{cluster, condition_number, eig, expm, inverse, solve, CLUSTER_REL};
use crate::model::{sobolev_weight, HMode, SpectralWindow, TorusSpec};
use crate::spectra::{spectrum_window, SweepConfig};
use crate::{CMat, CVec, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Eigenvector matrices worse conditioned than this fall back to `expm`.
pub const EIGVEC_COND_LIMIT: f64 = 1e8;
/// `|lambda|` below this identifies the eigenvalue of the constants.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;
/// `beta` must stay this far from every real part.
pub const BETA_MARGIN: f64 = 1e-3;

/// Coefficients of a state on finitely many horizontal modes, each with
/// vertical indices `-M..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub spec: TorusSpec,
    pub m_max: usize,
    /// Sobolev index of the ambient norm.
    pub s: f64,
    /// Sorted by `k`; vectors have length `2M + 1`.
    pub blocks: Vec<(HMode, CVec)>,
}

impl StateVector {
    pub fn zeros(spec: &TorusSpec, modes: &[HMode], m_max: usize) -> Self {
        let mut blocks: Vec<(HMode, CVec)> = modes.iter().map(|&m| (m, CVec::zeros(2 * m_max + 1))).collect();
        blocks.sort_by_key(|b| b.0.k);
        blocks.dedup_by(|a, b| a.0.k == b.0.k);
        Self {
            spec: *spec,
            m_max,
            s: 0.0,
            blocks,
        }
    }

    /// Random coefficients `(xi + i eta) exp(-(|kappa|^2 + m^2) / 4)` with
    /// standard normal `xi, eta`, on `|kappa|^2 <= k_max`.
    pub fn random_smooth(spec: &TorusSpec, k_max: f64, m_max: usize, seed: u64) -> Self {
        let mut u = Self::zeros(spec, &spec.modes_within(k_max), m_max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (mode, v) in u.blocks.iter_mut() {
            for (i, c) in v.iter_mut().enumerate() {
                let m = i as i64 - m_max as i64;
                let decay = (-(mode.norm_sq() + (m * m) as f64) / 4.0).exp();
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *c = C64::new(re, im) * decay;
            }
        }
        u
    }

    pub fn get(&self, k: [i64; 2], m: i64) -> C64 {
        if m.unsigned_abs() as usize > self.m_max {
            return C64::new(0.0, 0.0);
        }
        self.blocks
            .binary_search_by(|b| b.0.k.cmp(&k))
            .map(|i| self.blocks[i].1[(m + self.m_max as i64) as usize])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Sets a coefficient, adding the mode if needed.
    pub fn set(&mut self, k: [i64; 2], m: i64, value: C64) -> Result<()> {
        if m.unsigned_abs() as usize > self.m_max {
            return Err(KbmError::invalid(format!(
                "|m| = {} exceeds M = {}",
                m.abs(),
                self.m_max
            )));
        }
        let idx = (m + self.m_max as i64) as usize;
        match self.blocks.binary_search_by(|b| b.0.k.cmp(&k)) {
            Ok(i) => self.blocks[i].1[idx] = value,
            Err(i) => {
                let mut v = CVec::zeros(2 * self.m_max + 1);
                v[idx] = value;
                self.blocks.insert(i, (self.spec.mode(k), v));
            }
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.blocks.iter().map(|(_, v)| v.norm_squared()).sum::<f64>().sqrt()
    }

    /// Norm in `H^s` with the state's own `s`.
    pub fn hs_norm(&self) -> f64 {
        let m = self.m_max as i64;
        self.blocks
            .iter()
            .map(|(mode, v)| {
                v.iter()
                    .enumerate()
                    .map(|(i, c)| (sobolev_weight(self.s, mode, i as i64 - m) * c.norm()).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `(1/Vol) int u`, as a coefficient of the normalized constant.
    pub fn mean_coefficient(&self) -> C64 {
        self.get([0, 0], 0)
    }

    /// Euclidean distance between two states on the same truncation.
    pub fn distance(&self, other: &StateVector) -> f64 {
        let mut total = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.blocks.len() || j < other.blocks.len() {
            let ka = self.blocks.get(i).map(|b| b.0.k);
            let kb = other.blocks.get(j).map(|b| b.0.k);
            match (ka, kb) {
                (Some(a), Some(b)) if a == b => {
                    total += (&self.blocks[i].1 - &other.blocks[j].1).norm_squared();
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    total += self.blocks[i].1.norm_squared();
                    i += 1;
                }
                (Some(_), None) => {
                    total += self.blocks[i].1.norm_squared();
                    i += 1;
                }
                _ => {
                    total += other.blocks[j].1.norm_squared();
                    j += 1;
                }
            }
        }
        total.sqrt()
    }

    /// Point value `u(x, y, theta)` of the represented function.
    pub fn evaluate(&self, x: [f64; 2], theta: f64) -> C64 {
        let norm = self.spec.bundle_volume().sqrt();
        let m = self.m_max as i64;
        let mut acc = C64::new(0.0, 0.0);
        for (mode, v) in &self.blocks {
            let phase_x = mode.kappa[0] * x[0] + mode.kappa[1] * x[1];
            for (i, c) in v.iter().enumerate() {
                let phase = phase_x + (i as i64 - m) as f64 * theta;
                acc += c * C64::from_polar(1.0, phase);
            }
        }
        acc / norm
    }
}

/// Per-mode propagator data.
struct ModeFlow {
    p: CMat,
    values: Vec<C64>,
    /// Eigenvector matrix and its inverse when well conditioned.
    basis: Option<(CMat, CMat)>,
}

impl ModeFlow {
    fn new(gamma: f64, mode: &HMode, m: usize, spec: &TorusSpec) -> Result<Self> {
        let p = assemble_p(gamma, mode, m, spec)?.entries;
        let pairs = eig(&p)?;
        let values: Vec<C64> = pairs.iter().map(|e| e.value).collect();
        let n = p.nrows();
        let v = CMat::from_fn(n, n, |r, c| pairs[c].right_vector[r]);
        let basis = if condition_number(&v)? <= EIGVEC_COND_LIMIT {
            Some((v.clone(), inverse(&v)?))
        } else {
            None
        };
        Ok(Self { p, values, basis })
    }

    fn apply(&self, c: &CVec, t: f64) -> Result<CVec> {
        match &self.basis {
            Some((v, vinv)) => {
                let mut y = vinv * c;
                for (i, z) in y.iter_mut().enumerate() {
                    *z *= (-self.values[i] * t).exp();
                }
                Ok(v * y)
            }
            None => Ok(expm(&(&self.p * C64::new(-t, 0.0)))? * c),
        }
    }
}

/// `exp(-t P_gamma) u`, mode by mode.
pub fn propagate(gamma: f64, u: &StateVector, t: f64) -> Result<StateVector> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(KbmError::invalid(format!("t must be >= 0, got {t}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(KbmError::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let blocks = u
        .blocks
        .par_iter()
        .map(|(mode, c)| {
            let flow = ModeFlow::new(gamma, mode, u.m_max, &u.spec)?;
            let out = flow.apply(c, t)?;
            // the k = 0 block is normal (diagonal), so it must contract
            if mode.norm_sq() == 0.0 {
                let before = c.norm();
                if out.norm() > before * (1.0 + 1e-6) + f64::MIN_POSITIVE {
                    return Err(KbmError::ContractionViolated {
                        mode: mode.k,
                        growth: out.norm() / before,
                    });
                }
            }
            Ok((*mode, out))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StateVector { blocks, ..u.clone() })
}

/// Smallest real part of the nonzero spectrum of `P_gamma` found in `window`.
pub fn spectral_gap(gamma: f64, spec: &TorusSpec, window: &SpectralWindow, cfg: &SweepConfig) -> Result<f64> {
    let set = spectrum_window(gamma, window, spec, cfg)?;
    if !set.tail_certified {
        return Err(KbmError::TailNotCertified(
            set.tail_failures.iter().map(|f| f.0).collect(),
        ));
    }
    let zeros = set
        .items
        .iter()
        .filter(|it| it.lambda.norm() < ZERO_EIGENVALUE_TOL)
        .count();
    if zeros != 1 {
        return Err(KbmError::invalid(format!(
            "expected exactly one zero eigenvalue in the window, found {zeros}"
        )));
    }
    set.items
        .iter()
        .filter(|it| it.lambda.norm() >= ZERO_EIGENVALUE_TOL)
        .map(|it| it.lambda.re)
        .min_by(f64::total_cmp)
        .ok_or_else(|| KbmError::invalid("window holds no nonzero eigenvalue"))
}

/// One retained group of the expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RetainedGroup {
    pub k: [i64; 2],
    /// Mean of the clustered eigenvalues.
    pub lambda: C64,
    pub size: usize,
    /// `||Pi_j u||`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub beta: f64,
    pub retained: Vec<RetainedGroup>,
    /// `(t, ||exp(-tP) u - sum of retained terms||)`.
    pub remainder_norms: Vec<(f64, f64)>,
    /// Minus the least-squares slope of `log remainder` against `t`.
    pub fitted_rate: f64,
    /// `max_t remainder(t) e^{beta t} / ||u||`.
    pub envelope: f64,
}

/// Projected vector `Pi u` and nilpotent powers `N^l Pi u` of one group.
struct GroupTerm {
    lambda: C64,
    powers: Vec<CVec>,
}

impl GroupTerm {
    fn at(&self, t: f64) -> CVec {
        let mut acc = CVec::zeros(self.powers[0].len());
        let mut coef = C64::new(1.0, 0.0);
        for (l, v) in self.powers.iter().enumerate() {
            if l > 0 {
                coef *= C64::new(-t / l as f64, 0.0);
            }
            acc += v * coef;
        }
        acc * (-self.lambda * t).exp()
    }
}

/// `Pi u` for the spectral projector of the eigenvalues inside the circle
/// `|z - center| = radius`, by the trapezoid rule on the resolvent, doubling
/// the node count until two levels agree.
fn contour_projection(p: &CMat, c: &CVec, center: C64, radius: f64) -> Result<CVec> {
    let n = p.nrows();
    let eval = |nodes: usize| -> Result<CVec> {
        let mut acc = CVec::zeros(n);
        for j in 0..nodes {
            let w = C64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
            let z = center + w;
            let shifted = CMat::from_fn(n, n, |r, col| if r == col { z - p[(r, col)] } else { -p[(r, col)] });
            acc += solve(&shifted, c)? * w;
        }
        Ok(acc / C64::new(nodes as f64, 0.0))
    };
    let mut nodes = 32;
    let mut prev = eval(nodes)?;
    while nodes < 4096 {
        nodes *= 2;
        let next = eval(nodes)?;
        if (&next - &prev).norm() <= 1e-12 * next.norm().max(c.norm()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(KbmError::ProjectorFailure(center))
}

fn mode_groups(flow: &ModeFlow, c: &CVec, beta: f64, k: [i64; 2]) -> Result<Vec<(RetainedGroup, GroupTerm)>> {
    let groups = cluster(&flow.values, CLUSTER_REL);
    let mut out = Vec::new();
    for g in groups {
        let members: Vec<C64> = g.iter().map(|&i| flow.values[i]).collect();
        let center = members.iter().sum::<C64>() / members.len() as f64;
        if center.re > beta {
            continue;
        }
        let projected = match (&flow.basis, g.len()) {
            (Some((v, vinv)), 1) => {
                let i = g[0];
                let coef = (vinv.row(i) * c)[(0, 0)];
                v.column(i) * coef
            }
            _ => {
                let spread = members.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
                let gap = flow
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !g.contains(i))
                    .map(|(_, z)| (z - center).norm())
                    .fold(f64::INFINITY, f64::min);
                let radius = if gap.is_finite() { 0.5 * gap } else { 1.0 };
                if radius <= 2.0 * spread {
                    return Err(KbmError::ProjectorFailure(center));
                }
                contour_projection(&flow.p, c, center, radius)?
            }
        };
        let mut powers = vec![projected];
        for _ in 1..g.len() {
            let prev = powers.last().unwrap();
            let next = &flow.p * prev - prev * center;
            powers.push(next);
        }
        out.push((
            RetainedGroup {
                k,
                lambda: center,
                size: g.len(),
                weight: powers[0].norm(),
            },
            GroupTerm { lambda: center, powers },
        ));
    }
    Ok(out)
}

/// Remainder of the eigenvalue expansion of `exp(-t P) u` after removing
/// every eigenvalue group with `Re lambda <= beta`.
pub fn equilibrium_decay(gamma: f64, u: &StateVector, t_grid: &[f64], beta: f64) -> Result<ExpansionReport> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
        return Err(KbmError::invalid("t grid must be nonempty and inside [1, inf)"));
    }
    if !beta.is_finite() {
        return Err(KbmError::NonFinite);
    }
    struct ModeData {
        flow: ModeFlow,
        terms: Vec<(RetainedGroup, GroupTerm)>,
    }
    let data = u
        .blocks
        .par_iter()
        .map(|(mode, c)| {
            let flow = ModeFlow::new(gamma, mode, u.m_max, &u.spec)?;
            if let Some(z) = flow.values.iter().find(|z| (z.re - beta).abs() < BETA_MARGIN) {
                return Err(KbmError::BetaCollision { beta, re: z.re });
            }
            let terms = mode_groups(&flow, c, beta, mode.k)?;
            Ok(ModeData { flow, terms })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut remainder_norms = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut sq = 0.0;
        for ((_, c), d) in u.blocks.iter().zip(&data) {
            let mut r = d.flow.apply(c, t)?;
            for (_, term) in &d.terms {
                r -= term.at(t);
            }
            sq += r.norm_squared();
        }
        remainder_norms.push((t, sq.sqrt()));
    }
    let norm_u = u.l2_norm();
    let envelope = remainder_norms
        .iter()
        .map(|&(t, r)| r * (beta * t).exp() / norm_u)
        .fold(0.0, f64::max);
    let retained = data
        .into_iter()
        .flat_map(|d| d.terms.into_iter().map(|(g, _)| g))
        .collect();
    Ok(ExpansionReport {
        beta,
        retained,
        fitted_rate: -log_slope(&remainder_norms),
        remainder_norms,
        envelope,
    })
}

/// Least-squares slope of `log y` against `x`; `-inf` once `y` hits zero.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    if points.iter().any(|p| p.1 <= 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
