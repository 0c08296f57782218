//! Flag and file configuration.
//!
//! Each subcommand has a flag struct whose fields are all optional and a
//! settings struct holding the resolved values. Resolution overlays the
//! defaults, then the subcommand's table from the TOML file, then the flags
//! that were given. The resolved settings are echoed into the manifest.

use crate::Failed;
use anyhow::Context;
use clap::{Args, ValueEnum};
use kbm_core::sde::FIGURE_GAMMAS;
use kbm_core::spectra::matching::DEFAULT_MARGIN;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::PI;
use std::path::Path;

pub fn load_file(path: &Path) -> anyhow::Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| Failed(format!("{}: {e}", path.display())).into())
}

fn overlay(base: &mut Value, top: Value) {
    if let (Value::Object(b), Value::Object(t)) = (base, top) {
        for (k, v) in t {
            if !v.is_null() {
                b.insert(k, v);
            }
        }
    }
}

pub fn resolve<S, A>(file: Option<&toml::Table>, section: &str, flags: &A) -> anyhow::Result<S>
where
    S: Serialize + DeserializeOwned + Default,
    A: Serialize,
{
    let mut value = serde_json::to_value(S::default())?;
    if let Some(table) = file.and_then(|f| f.get(section)) {
        overlay(&mut value, serde_json::to_value(table)?);
    }
    overlay(&mut value, serde_json::to_value(flags)?);
    serde_json::from_value(value).map_err(|e| Failed(format!("[{section}] configuration: {e}")).into())
}

const TWO_PI: f64 = 2.0 * PI;

fn strip() -> [f64; 4] {
    [-0.5, 4.5, -1.0, 1.0]
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Window `RE_MIN RE_MAX IM_MIN IM_MAX`.
    #[arg(long, num_args = 4, value_names = ["RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"], allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<f64>>,
    /// Torus side lengths.
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    /// Truncation drift tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Largest vertical truncation M.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<usize>,
    /// Distance from the window edge below which values are not matched.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    pub gamma: f64,
    pub window: [f64; 4],
    pub lengths: [f64; 2],
    pub tol: f64,
    pub ceiling: usize,
    pub margin: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            gamma: 100.0,
            window: strip(),
            lengths: [TWO_PI, TWO_PI],
            tol: 1e-8,
            ceiling: 512,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct ConvergeArgs {
    /// Comma-separated gamma grid.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, num_args = 4, value_names = ["RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"], allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// Also write a log-log plot `converge.svg`.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub svg: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSettings {
    pub gammas: Vec<f64>,
    pub window: [f64; 4],
    pub lengths: [f64; 2],
    pub tol: f64,
    pub margin: f64,
    pub svg: bool,
}

impl Default for ConvergeSettings {
    fn default() -> Self {
        Self {
            gammas: vec![10.0, 30.0, 100.0, 300.0],
            window: strip(),
            lengths: [TWO_PI, TWO_PI],
            tol: 1e-8,
            margin: DEFAULT_MARGIN,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct ResolventArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Spectral parameter `RE IM`.
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Sobolev index of the source space.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Largest |kappa|^2 swept.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    /// Vertical truncation M.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_ratio: Option<f64>,
    /// Gamma grid of the absorbed study; empty skips it.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_gammas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_a: Option<f64>,
    /// Regularity gain N of the absorbed study.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_n: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventSettings {
    pub gammas: Vec<f64>,
    pub lambda: [f64; 2],
    pub s: f64,
    pub k_max: f64,
    pub m: usize,
    pub tail_ratio: f64,
    pub qa_gammas: Vec<f64>,
    pub qa_a: f64,
    pub qa_n: f64,
    pub lengths: [f64; 2],
}

impl Default for ResolventSettings {
    fn default() -> Self {
        Self {
            gammas: vec![10.0, 30.0, 100.0, 300.0, 1000.0],
            lambda: [-1.0, 0.0],
            s: 0.0,
            k_max: 400.0,
            m: 16,
            tail_ratio: kbm_core::spectra::DEFAULT_TAIL_RATIO,
            qa_gammas: vec![30.0, 100.0, 300.0],
            qa_a: 3.0,
            qa_n: 1.0,
            lengths: [TWO_PI, TWO_PI],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Smooth random coefficients.
    Random,
    /// The constant function.
    Constant,
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct GapArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, num_args = 4, value_names = ["RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"], allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    /// Gamma of the equilibrium decay study.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Time grid `T_MIN T_MAX STEPS`.
    #[arg(long, num_args = 3, value_names = ["T_MIN", "T_MAX", "STEPS"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<InitialState>,
    /// Largest |kappa|^2 carried by the random state.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_k_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSettings {
    pub gammas: Vec<f64>,
    pub window: [f64; 4],
    pub lengths: [f64; 2],
    pub decay_gamma: f64,
    pub beta: f64,
    pub times: [f64; 3],
    pub state: InitialState,
    pub state_k_max: f64,
    pub m: usize,
    pub seed: u64,
}

impl Default for GapSettings {
    fn default() -> Self {
        Self {
            gammas: vec![5.0, 10.0, 30.0, 100.0],
            window: [-0.5, 4.5, -10.0, 10.0],
            lengths: [TWO_PI, TWO_PI],
            decay_gamma: 100.0,
            beta: 0.9,
            times: [1.0, 5.0, 16.0],
            state: InitialState::Random,
            state_k_max: 8.0,
            m: 24,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `P`.
    Plain,
    /// `P + Q_A`.
    WithQ,
    /// `P - i y`.
    Shifted,
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct HypoArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Imaginary shifts of the shifted variant.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ys: Option<Vec<f64>>,
    /// Fixed B; otherwise `B = gamma^b_exp`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_exp: Option<f64>,
    /// Fixed A; otherwise `A = gamma^a_exp`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_exp: Option<f64>,
    /// Sobolev gain of the estimate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypoSettings {
    pub variant: Variant,
    pub gammas: Vec<f64>,
    pub ys: Vec<f64>,
    pub b: Option<f64>,
    pub b_exp: f64,
    pub a: Option<f64>,
    pub a_exp: f64,
    pub gain: f64,
    pub s: f64,
    pub k_max: f64,
    pub m: usize,
    pub lengths: [f64; 2],
}

impl Default for HypoSettings {
    fn default() -> Self {
        Self {
            variant: Variant::WithQ,
            gammas: vec![20.0, 50.0, 100.0],
            ys: vec![0.0],
            b: None,
            b_exp: 0.125,
            a: None,
            a_exp: 0.25,
            gain: 0.25,
            s: 0.0,
            k_max: 200.0,
            m: 32,
            lengths: [TWO_PI, TWO_PI],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Time horizon.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Time step; defaults to `min(0.1/gamma^2, 0.1/gamma, 1e-3)`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Keep one sample every this many steps (default: about 1000 samples).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    /// Also write one-path panels for `panel_gammas`.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub panels: bool,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel_gammas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel_t_end: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub gamma: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub dt: Option<f64>,
    pub record_every: Option<usize>,
    pub panels: bool,
    pub panel_gammas: Vec<f64>,
    pub panel_t_end: f64,
    pub max_points: usize,
    pub lengths: [f64; 2],
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            gamma: 10.0,
            t_end: 1.0,
            paths: 1,
            seed: 0,
            dt: None,
            record_every: None,
            panels: false,
            panel_gammas: FIGURE_GAMMAS.to_vec(),
            panel_t_end: 1.0,
            max_points: 2000,
            lengths: [TWO_PI, TWO_PI],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file: toml::Table = toml::from_str("[spectrum]\ngamma = 30\ntol = 1e-6\n").unwrap();
        let flags = SpectrumArgs {
            tol: Some(1e-9),
            ..Default::default()
        };
        let s: SpectrumSettings = resolve(Some(&file), "spectrum", &flags).unwrap();
        assert_eq!(s.gamma, 30.0);
        assert_eq!(s.tol, 1e-9);
        assert_eq!(s.window, strip());
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let file: toml::Table = toml::from_str("[gap]\nbta = 0.5\n").unwrap();
        let r: anyhow::Result<GapSettings> = resolve(Some(&file), "gap", &GapArgs::default());
        assert!(r.unwrap_err().is::<Failed>());
    }

    #[test]
    fn wrong_window_arity_is_rejected() {
        let flags = ConvergeArgs {
            window: Some(vec![0.0, 1.0]),
            ..Default::default()
        };
        assert!(resolve::<ConvergeSettings, _>(None, "converge", &flags).is_err());
    }

    #[test]
    fn option_fields_come_from_the_file() {
        let file: toml::Table = toml::from_str("[hypo]\nvariant = \"shifted\"\nb = 15.0\n").unwrap();
        let s: HypoSettings = resolve(Some(&file), "hypo", &HypoArgs::default()).unwrap();
        assert_eq!(s.variant, Variant::Shifted);
        assert_eq!(s.b, Some(15.0));
    }
}
