//! Monte-Carlo simulation of kinetic Brownian motion on `S(T^2)`.
//!
//! The direction `theta` is a Brownian motion with variance `gamma^2 t` and
//! the position moves with velocity `gamma (cos theta, sin theta)`:
//!
//! ```text
//! theta_{j+1} = theta_j + gamma sqrt(dt) xi_j
//! x_{j+1}     = x_j + gamma (cos theta_j, sin theta_j) dt
//! ```
//!
//! The `theta` increments are exact; only the position quadrature carries a
//! time-step error. Every path owns the ChaCha stream `(seed, path_index)`,
//! so results do not depend on how paths are scheduled.

use crate::error::{KbmError, Result};
use crate::model::TorusSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Paths per reduction chunk; partial sums are combined in chunk order.
const CHUNK: usize = 64;
/// Largest step count allowed for a figure panel.
pub const PANEL_STEP_BUDGET: u64 = 10_000_000;

/// Default step `min(0.1/gamma^2, 0.1/gamma, 1e-3)`: resolves both the
/// angular decorrelation time `2/gamma^2` and the transit time `1/gamma`.
pub fn default_dt(gamma: f64) -> f64 {
    (0.1 / (gamma * gamma)).min(0.1 / gamma).min(1e-3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig {
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub spec: TorusSpec,
    /// Keep one sample every `record_every` steps.
    pub record_every: usize,
    /// Set when `dt` exceeds the default cap on purpose.
    pub dt_override: bool,
    pub step_budget: Option<u64>,
}

impl SdeConfig {
    pub fn new(gamma: f64, t_end: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            gamma,
            dt: default_dt(gamma),
            t_end,
            n_paths,
            seed,
            spec: TorusSpec::default(),
            record_every: 1,
            dt_override: false,
            step_budget: None,
        }
    }

    /// Uses `dt`; steps above the default cap are accepted and flagged.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt_override = dt > default_dt(self.gamma) * (1.0 + 1e-12);
        self.dt = dt;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("dt", self.dt), ("T", self.t_end)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KbmError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.record_every == 0 {
            return Err(KbmError::invalid("record_every must be >= 1"));
        }
        if !self.dt_override && self.dt > default_dt(self.gamma) * (1.0 + 1e-12) {
            return Err(KbmError::invalid(format!(
                "dt = {} exceeds the cap {} for gamma = {}; use an explicit override",
                self.dt,
                default_dt(self.gamma),
                self.gamma
            )));
        }
        if let Some(budget) = self.step_budget {
            if self.n_steps() > budget {
                return Err(KbmError::StepBudget {
                    steps: self.n_steps(),
                    budget,
                });
            }
        }
        Ok(())
    }

    /// Recording times `j * record_every * dt`, including `0`.
    pub fn record_times(&self) -> Vec<f64> {
        let n = self.n_steps() as usize / self.record_every;
        (0..=n).map(|j| (j * self.record_every) as f64 * self.dt).collect()
    }

    fn rng(&self, path_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path_index);
        rng
    }
}

/// Run one path, calling `visit(record, x, y, theta)` at every recording time.
/// The starting direction is uniform (the stationary law) and `x_0 = 0`.
fn run_path(cfg: &SdeConfig, path_index: u64, mut visit: impl FnMut(usize, f64, f64, f64)) {
    let mut rng = cfg.rng(path_index);
    let mut theta: f64 = rng.random_range(0.0..2.0 * PI);
    let (mut x, mut y) = (0.0f64, 0.0f64);
    let sd = cfg.gamma * cfg.dt.sqrt();
    let step = cfg.gamma * cfg.dt;
    let records = cfg.n_steps() as usize / cfg.record_every;
    visit(0, x, y, theta);
    for r in 1..=records {
        for _ in 0..cfg.record_every {
            let (s, c) = theta.sin_cos();
            x += step * c;
            y += step * s;
            let xi: f64 = rng.sample(StandardNormal);
            theta += sd * xi;
        }
        visit(r, x, y, theta);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub gamma: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Positions on the universal cover.
    pub positions: Vec<[f64; 2]>,
    pub angles: Vec<f64>,
}

impl Trajectory {
    pub fn wrapped(&self, spec: &TorusSpec) -> Vec<[f64; 2]> {
        let [l1, l2] = spec.lengths();
        self.positions
            .iter()
            .map(|p| [p[0].rem_euclid(l1), p[1].rem_euclid(l2)])
            .collect()
    }

    /// Number of times the path crosses a wall of the fundamental domain.
    pub fn wrap_count(&self, spec: &TorusSpec) -> usize {
        let [l1, l2] = spec.lengths();
        let cell = |p: &[f64; 2]| [(p[0] / l1).floor() as i64, (p[1] / l2).floor() as i64];
        self.positions
            .windows(2)
            .map(|w| {
                let (a, b) = (cell(&w[0]), cell(&w[1]));
                ((a[0] - b[0]).abs() + (a[1] - b[1]).abs()) as usize
            })
            .sum()
    }

    /// Time-averaged squared displacement at a lag of `lag` samples.
    pub fn time_averaged_msd(&self, lag: usize) -> f64 {
        let n = self.positions.len();
        if lag == 0 || lag >= n {
            return 0.0;
        }
        let sum: f64 = (0..n - lag)
            .map(|i| {
                let (a, b) = (self.positions[i], self.positions[i + lag]);
                (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)
            })
            .sum();
        sum / (n - lag) as f64
    }

    /// CSV with columns `t, x_unwrapped, y_unwrapped, theta`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,x_unwrapped,y_unwrapped,theta")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.positions[i][0], self.positions[i][1], self.angles[i]
            )?;
        }
        Ok(())
    }
}

pub fn simulate_path(cfg: &SdeConfig, path_index: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let times = cfg.record_times();
    let mut positions = Vec::with_capacity(times.len());
    let mut angles = Vec::with_capacity(times.len());
    run_path(cfg, path_index, |_, x, y, th| {
        positions.push([x, y]);
        angles.push(th);
    });
    Ok(Trajectory {
        gamma: cfg.gamma,
        dt: cfg.dt,
        times,
        positions,
        angles,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub msd: Vec<f64>,
    pub msd_se: Vec<f64>,
    pub vacf: Vec<f64>,
    pub vacf_se: Vec<f64>,
    pub angular_var: Vec<f64>,
    /// Mean of `cos(kappa_1 (x^1_t - x^1_0))` with `kappa_1 = 2 pi / L_1`: the
    /// `k = (1, 0)` Fourier observable.
    pub mode_correlation: Vec<f64>,
    pub n_paths: usize,
}

impl EnsembleStats {
    /// CSV with columns `t, msd, msd_se, vacf, vacf_se, angvar`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,msd,msd_se,vacf,vacf_se,angvar")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.msd[i], self.msd_se[i], self.vacf[i], self.vacf_se[i], self.angular_var[i]
            )?;
        }
        Ok(())
    }
}

/// Running sums per recording time.
#[derive(Clone)]
struct Sums {
    msd: Vec<f64>,
    msd2: Vec<f64>,
    vacf: Vec<f64>,
    vacf2: Vec<f64>,
    ang: Vec<f64>,
    ang2: Vec<f64>,
    mode: Vec<f64>,
}

impl Sums {
    fn new(n: usize) -> Self {
        let z = vec![0.0; n];
        Self {
            msd: z.clone(),
            msd2: z.clone(),
            vacf: z.clone(),
            vacf2: z.clone(),
            ang: z.clone(),
            ang2: z.clone(),
            mode: z,
        }
    }

    fn add(&mut self, o: &Sums) {
        for (a, b) in [
            (&mut self.msd, &o.msd),
            (&mut self.msd2, &o.msd2),
            (&mut self.vacf, &o.vacf),
            (&mut self.vacf2, &o.vacf2),
            (&mut self.ang, &o.ang),
            (&mut self.ang2, &o.ang2),
            (&mut self.mode, &o.mode),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub fn ensemble_stats(cfg: &SdeConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    if cfg.n_paths < 100 {
        return Err(KbmError::invalid(format!(
            "need at least 100 paths, got {}",
            cfg.n_paths
        )));
    }
    let times = cfg.record_times();
    let n = times.len();
    let g2 = cfg.gamma * cfg.gamma;
    let kappa1 = 2.0 * PI / cfg.spec.lengths()[0];
    let chunks: Vec<Sums> = (0..cfg.n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = Sums::new(n);
            for p in (c * CHUNK)..((c + 1) * CHUNK).min(cfg.n_paths) {
                let mut theta0 = 0.0;
                run_path(cfg, p as u64, |r, x, y, th| {
                    if r == 0 {
                        theta0 = th;
                    }
                    let d2 = x * x + y * y;
                    let v = g2 * (th - theta0).cos();
                    let a = (th - theta0).powi(2);
                    s.msd[r] += d2;
                    s.msd2[r] += d2 * d2;
                    s.vacf[r] += v;
                    s.vacf2[r] += v * v;
                    s.ang[r] += th - theta0;
                    s.ang2[r] += a;
                    s.mode[r] += (kappa1 * x).cos();
                });
            }
            s
        })
        .collect();
    let mut total = Sums::new(n);
    for c in &chunks {
        total.add(c);
    }
    let np = cfg.n_paths as f64;
    let mean = |v: &[f64]| v.iter().map(|x| x / np).collect::<Vec<_>>();
    let se = |s: &[f64], s2: &[f64]| {
        s.iter()
            .zip(s2)
            .map(|(a, b)| {
                let m = a / np;
                // sample variance / n
                ((b / np - m * m).max(0.0) / (np - 1.0)).sqrt()
            })
            .collect::<Vec<_>>()
    };
    let ang_mean = mean(&total.ang);
    let angular_var = total
        .ang2
        .iter()
        .zip(&ang_mean)
        .map(|(a2, m)| (a2 / np - m * m).max(0.0) * np / (np - 1.0))
        .collect();
    Ok(EnsembleStats {
        msd: mean(&total.msd),
        msd_se: se(&total.msd, &total.msd2),
        vacf: mean(&total.vacf),
        vacf_se: se(&total.vacf, &total.vacf2),
        angular_var,
        mode_correlation: mean(&total.mode),
        times,
        n_paths: cfg.n_paths,
    })
}

/// Closed-form velocity autocorrelation `gamma^2 exp(-gamma^2 t / 2)`.
pub fn vacf_exact(gamma: f64, t: f64) -> f64 {
    gamma * gamma * (-gamma * gamma * t / 2.0).exp()
}

/// Closed-form mean squared displacement `4t - (8/gamma^2)(1 - exp(-gamma^2 t/2))`.
pub fn msd_exact(gamma: f64, t: f64) -> f64 {
    let g2 = gamma * gamma;
    4.0 * t - 8.0 / g2 * (1.0 - (-g2 * t / 2.0).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub gamma: f64,
    /// Horizon actually simulated.
    pub t_end: f64,
    /// Set when the horizon was cut to respect the step budget.
    pub shortened: bool,
    pub trajectory: Trajectory,
    /// Wrapped positions.
    pub wrapped: Vec<[f64; 2]>,
}

/// Default panel rates: near geodesic, intermediate, diffusive.
pub const FIGURE_GAMMAS: [f64; 3] = [1e-2, 10.0, 1e4];

/// One path per `gamma`, each horizon cut so that the step count stays within
/// [`PANEL_STEP_BUDGET`], with at most `max_points` recorded samples.
pub fn figure1_panels(gammas: &[f64], t_end: f64, seed: u64, max_points: usize) -> Result<Vec<Panel>> {
    gammas
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let mut cfg = SdeConfig::new(gamma, t_end, 1, seed);
            cfg.step_budget = Some(PANEL_STEP_BUDGET);
            let shortened = cfg.n_steps() > PANEL_STEP_BUDGET;
            if shortened {
                cfg.t_end = PANEL_STEP_BUDGET as f64 * cfg.dt;
            }
            cfg.record_every = (cfg.n_steps() as usize).div_ceil(max_points.max(1)).max(1);
            let trajectory = simulate_path(&cfg, i as u64)?;
            Ok(Panel {
                gamma,
                t_end: cfg.t_end,
                shortened,
                wrapped: trajectory.wrapped(&cfg.spec),
                trajectory,
            })
        })
        .collect()
}
