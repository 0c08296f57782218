//! Window sweeps over horizontal modes, matching against the base spectrum,
//! the Grushin effective scalar, resolvent bound studies and hypoelliptic
//! constants.
//!
//! Blocks with the same `|kappa|` are unitarily similar: conjugating by
//! `diag(exp(i m phi))` rotates `kappa` by `phi` and commutes with `Delta_V`,
//! the Sobolev weights and `Q_A`. Every study here therefore works shell by
//! shell on one representative mode and copies the result to the rest of the
//! shell.

pub mod bounds;
pub mod grushin;
pub mod hypo;
pub mod matching;

pub use bounds::*;
pub use grushin::{grushin_scalar, grushin_zero, grushin_zero_count, GrushinScalar};
pub use hypo::{subelliptic_constant, HypoConstant, HypoParams, HypoVariant};
pub use matching::{match_spectra, match_values, MatchPair, MatchReport};

use crate::assembly::assemble_p;
use crate::error::{KbmError, Result};
use crate::linalg::{eig, truncation_search, TruncationReport, DEFAULT_M_CEILING, TRUNCATION_DRIFT_TOL};
use crate::model::{HMode, Shell, SpectralWindow, TorusSpec};
use crate::C64;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Truncation drift tolerance.
    pub tol: f64,
    pub m0: usize,
    pub ceiling: usize,
    /// Vertical truncation used by the Grushin tail certificate.
    pub tail_m: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tol: TRUNCATION_DRIFT_TOL,
            m0: 8,
            ceiling: DEFAULT_M_CEILING,
            tail_m: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenItem {
    pub lambda: C64,
    pub mode: HMode,
    pub residual: f64,
    pub certified: bool,
    pub truncation: TruncationReport,
}

#[derive(Debug, Clone)]
pub struct EigenSet {
    pub gamma: f64,
    pub window: SpectralWindow,
    /// Sorted by `(k, Re, Im)`.
    pub items: Vec<EigenItem>,
    /// Largest `|kappa|^2` swept directly.
    pub horizontal_cutoff: f64,
    pub tail_certified: bool,
    /// Shells on `(cutoff, 4 cutoff]` where the tail certificate failed,
    /// with the reason.
    pub tail_failures: Vec<(f64, String)>,
}

impl EigenSet {
    pub fn values(&self) -> Vec<C64> {
        self.items.iter().map(|it| it.lambda).collect()
    }

    /// Items violating `Re(lambda) >= -1e-8 max(1, |lambda|)`.
    pub fn accretivity_violations(&self) -> Vec<&EigenItem> {
        self.items.iter().filter(|it| !is_accretive(it.lambda)).collect()
    }
}

pub fn is_accretive(lambda: C64) -> bool {
    lambda.re >= -1e-8 * lambda.norm().max(1.0)
}

/// Horizontal cutoff `4 (re_max + 1)` of a window sweep.
pub fn horizontal_cutoff(window: &SpectralWindow) -> f64 {
    4.0 * (window.re_max + 1.0)
}

struct ShellResult {
    values: Vec<(C64, f64, bool)>,
    report: TruncationReport,
}

fn sweep_shell(
    gamma: f64,
    shell: &Shell,
    window: &SpectralWindow,
    spec: &TorusSpec,
    cfg: &SweepConfig,
) -> Result<ShellResult> {
    let mode = shell.representative;
    let builder = |m: usize| Ok(assemble_p(gamma, &mode, m, spec)?.entries);
    let report = truncation_search(builder, window, cfg.tol, cfg.m0, cfg.ceiling)?;
    let pairs = eig(&builder(report.m_used)?)?;
    let values = pairs
        .into_iter()
        .filter(|p| window.contains(p.value))
        .map(|p| (p.value, p.residual, p.certified))
        .collect();
    Ok(ShellResult { values, report })
}

/// Eigenvalues of `P_gamma` inside `window`, over all modes with
/// `|kappa|^2 <= 4 (re_max + 1)`, plus a Grushin winding certificate that no
/// mode on the next band up to four times the cutoff contributes.
pub fn spectrum_window(gamma: f64, window: &SpectralWindow, spec: &TorusSpec, cfg: &SweepConfig) -> Result<EigenSet> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(KbmError::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let cutoff = horizontal_cutoff(window);
    let shells = spec.shells_within(cutoff);
    let results: Vec<Result<ShellResult>> = shells
        .par_iter()
        .map(|s| sweep_shell(gamma, s, window, spec, cfg))
        .collect();

    let mut items = Vec::new();
    let mut unconverged = Vec::new();
    for (shell, res) in shells.iter().zip(results) {
        let members = spec.shell_modes(shell);
        match res {
            Ok(r) => {
                for mode in members {
                    for &(lambda, residual, certified) in &r.values {
                        items.push(EigenItem {
                            lambda,
                            mode,
                            residual,
                            certified,
                            truncation: r.report.clone(),
                        });
                    }
                }
            }
            Err(KbmError::TruncationCeiling { .. }) => unconverged.extend(members.iter().map(|m| m.k)),
            Err(e) => return Err(e),
        }
    }
    if !unconverged.is_empty() {
        unconverged.sort();
        return Err(KbmError::UnconvergedModes { modes: unconverged });
    }
    items.sort_by(|a, b| {
        a.mode
            .k
            .cmp(&b.mode.k)
            .then(a.lambda.re.total_cmp(&b.lambda.re))
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });

    let tail_failures = certify_tail(gamma, window, spec, cutoff, cfg.tail_m);
    Ok(EigenSet {
        gamma,
        window: *window,
        items,
        horizontal_cutoff: cutoff,
        tail_certified: tail_failures.is_empty(),
        tail_failures,
    })
}

/// Shells on `(cutoff, 4 cutoff]` whose Grushin scalar has zeros in the
/// window, or whose count could not be established.
fn certify_tail(gamma: f64, window: &SpectralWindow, spec: &TorusSpec, cutoff: f64, m: usize) -> Vec<(f64, String)> {
    let shells: Vec<Shell> = spec
        .shells_within(4.0 * cutoff)
        .into_iter()
        .filter(|s| s.norm_sq > cutoff)
        .collect();
    let outcome: Vec<Option<String>> = shells
        .par_iter()
        .map(|s| {
            let count =
                GrushinScalar::new(gamma, s.representative, m, None, spec).and_then(|g| grushin_zero_count(&g, window));
            match count {
                Ok(0) => None,
                Ok(n) => Some(format!("{n} zero(s) in window")),
                Err(e) => Some(e.to_string()),
            }
        })
        .collect();
    shells
        .iter()
        .zip(outcome)
        .filter_map(|(s, o)| o.map(|msg| (s.norm_sq, msg)))
        .collect()
}
