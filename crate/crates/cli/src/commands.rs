//! Subcommand bodies. Each one reads resolved settings, calls into
//! `kbm_core`, and writes its outputs through [`Run`].

use crate::config::*;
use crate::run::{f, row, Run};
use crate::{svg, Failed};
use kbm_core::sde::{ensemble_stats, figure1_panels, msd_exact, simulate_path, SdeConfig};
use kbm_core::semigroup::{equilibrium_decay, log_slope, spectral_gap, StateVector};
use kbm_core::spectra::*;
use kbm_core::{SpectralWindow, TorusSpec, C64};

fn torus(lengths: [f64; 2]) -> anyhow::Result<TorusSpec> {
    Ok(TorusSpec::new(lengths[0], lengths[1])?)
}

fn window(w: [f64; 4]) -> anyhow::Result<SpectralWindow> {
    Ok(SpectralWindow::new(w[0], w[1], w[2], w[3])?)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|p| (p.0.ln(), p.1)).collect();
    log_slope(&logs)
}

fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v), a.1.max(v)));
    hi / lo
}

pub fn spectrum(s: &SpectrumSettings, run: &mut Run) -> anyhow::Result<()> {
    let spec = torus(s.lengths)?;
    let w = window(s.window)?;
    let cfg = SweepConfig {
        tol: s.tol,
        ceiling: s.ceiling,
        ..SweepConfig::default()
    };
    let set = spectrum_window(s.gamma, &w, &spec, &cfg)?;
    run.csv(
        "spectrum.csv",
        "k1,k2,re,im,residual,M_used",
        set.items.iter().map(|it| {
            row(&[
                it.mode.k[0].to_string(),
                it.mode.k[1].to_string(),
                f(it.lambda.re),
                f(it.lambda.im),
                f(it.residual),
                it.truncation.m_used.to_string(),
            ])
        }),
    )?;
    let report = match_spectra(&set, &spec, s.margin);
    let mut rows: Vec<String> = report
        .pairs
        .iter()
        .map(|p| row(&[f(p.lambda_p.re), f(p.lambda_p.im), f(p.lambda_base), f(p.distance)]))
        .collect();
    rows.extend(
        report
            .unmatched_p
            .iter()
            .map(|z| row(&[f(z.re), f(z.im), String::new(), String::new()])),
    );
    rows.extend(
        report
            .unmatched_base
            .iter()
            .map(|b| row(&[String::new(), String::new(), f(*b), String::new()])),
    );
    run.csv("match.csv", "lambda_P_re,lambda_P_im,lambda_base,distance", rows)?;

    run.note("eigenvalues", set.items.len());
    run.note("matched", report.pairs.len());
    run.note("unmatched", report.unmatched_p.len() + report.unmatched_base.len());
    run.note("hausdorff", report.hausdorff);
    run.note("accretivity_violations", set.accretivity_violations().len());
    run.note("tail_certified", set.tail_certified);
    if !set.tail_certified {
        let shells: Vec<String> = set
            .tail_failures
            .iter()
            .map(|(q, m)| format!("|kappa|^2 = {q}: {m}"))
            .collect();
        return Err(Failed(format!("tail certificate failed on {}", shells.join("; "))).into());
    }
    Ok(())
}

pub fn converge(s: &ConvergeSettings, run: &mut Run) -> anyhow::Result<()> {
    let spec = torus(s.lengths)?;
    let w = window(s.window)?;
    if s.gammas.is_empty() {
        return Err(Failed("empty gamma grid".into()).into());
    }
    let cfg = SweepConfig {
        tol: s.tol,
        ..SweepConfig::default()
    };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut uncertified = Vec::new();
    let mut last_unmatched = 0;
    for &g in &s.gammas {
        let set = spectrum_window(g, &w, &spec, &cfg)?;
        if !set.tail_certified {
            uncertified.push(g);
        }
        let r = match_spectra(&set, &spec, s.margin);
        last_unmatched = r.unmatched_p.len() + r.unmatched_base.len();
        rows.push(row(&[
            f(g),
            f(r.hausdorff),
            r.pairs.len().to_string(),
            last_unmatched.to_string(),
        ]));
        points.push((g, r.hausdorff));
    }
    run.csv("converge.csv", "gamma,hausdorff,n_matched,n_unmatched", rows)?;
    if s.svg {
        let plot = svg::loglog(
            &points,
            "matched distance to the base spectrum",
            "gamma",
            "Hausdorff distance",
        );
        run.write("converge.svg", plot.as_bytes())?;
    }
    let monotone = points.windows(2).all(|p| p[1].1 < p[0].1);
    run.note("monotone_decrease", monotone);
    run.note("final_hausdorff", points.last().map(|p| p.1));
    if points.len() > 1 {
        run.note("slope", loglog_slope(&points));
    }
    if !uncertified.is_empty() {
        return Err(Failed(format!("tail certificate failed at gamma = {uncertified:?}")).into());
    }
    if last_unmatched > 0 {
        return Err(Failed(format!("{last_unmatched} unmatched value(s) at the largest gamma")).into());
    }
    Ok(())
}

pub fn resolvent(s: &ResolventSettings, run: &mut Run) -> anyhow::Result<()> {
    let spec = torus(s.lengths)?;
    let lambda = C64::new(s.lambda[0], s.lambda[1]);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &g in &s.gammas {
        let sw = resolvent_diff_norm(g, lambda, s.s, &spec, s.k_max, s.m, s.tail_ratio)?;
        rows.push(row(&[f(g), f(sw.sup), f(sw.argmax), f(sw.tail)]));
        points.push((g, sw.sup));
    }
    run.csv("resolvent.csv", "gamma,sup,argmax_kappa_sq,tail", rows)?;

    let mut qa_points = Vec::new();
    if !s.qa_gammas.is_empty() {
        let mut rows = Vec::new();
        for &g in &s.qa_gammas {
            let sw = qa_resolvent_diff(g, s.qa_a, lambda, s.s, s.qa_n, &spec, s.m)?;
            let scaled = sw.sup * g / s.qa_a.powi(3);
            rows.push(row(&[f(g), f(s.qa_a), f(sw.sup), f(scaled)]));
            qa_points.push((g, sw.sup));
        }
        run.csv("qa.csv", "gamma,a,sup,scaled", rows)?;
    }

    let mut fits = Vec::new();
    for (name, pts) in [("resolvent", &points), ("qa", &qa_points)] {
        if pts.len() > 1 {
            let slope = loglog_slope(pts);
            fits.push(row(&[name.to_string(), f(slope), pts.len().to_string()]));
            run.note(&format!("{name}_slope"), slope);
        }
    }
    run.csv("fit.csv", "series,slope,points", fits)?;
    Ok(())
}

pub fn gap(s: &GapSettings, run: &mut Run) -> anyhow::Result<()> {
    let spec = torus(s.lengths)?;
    let w = window(s.window)?;
    let mut rows = Vec::new();
    for &g in &s.gammas {
        let v = spectral_gap(g, &spec, &w, &SweepConfig::default())?;
        rows.push(row(&[f(g), f(v)]));
    }
    run.csv("gap.csv", "gamma,gap", rows)?;

    let [t0, t1, steps] = s.times;
    if !(steps >= 1.0 && steps.fract() == 0.0) {
        return Err(Failed(format!("time grid needs a whole number of steps, got {steps}")).into());
    }
    let n = steps as usize;
    let grid: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
    let u = match s.state {
        InitialState::Random => {
            run.seeds.push(s.seed);
            StateVector::random_smooth(&spec, s.state_k_max, s.m, s.seed)
        }
        InitialState::Constant => {
            let mut u = StateVector::zeros(&spec, &[spec.mode([0, 0])], s.m);
            u.set([0, 0], 0, C64::new(1.0, 0.0))?;
            u
        }
    };
    let report = equilibrium_decay(s.decay_gamma, &u, &grid, s.beta)?;
    run.csv(
        "remainder.csv",
        "t,remainder",
        report.remainder_norms.iter().map(|&(t, r)| row(&[f(t), f(r)])),
    )?;
    run.csv(
        "retained.csv",
        "k1,k2,re,im,size,weight",
        report.retained.iter().map(|g| {
            row(&[
                g.k[0].to_string(),
                g.k[1].to_string(),
                f(g.lambda.re),
                f(g.lambda.im),
                g.size.to_string(),
                f(g.weight),
            ])
        }),
    )?;
    // an exactly vanishing remainder decays faster than any rate
    let zero = report.remainder_norms.iter().all(|r| r.1 == 0.0);
    run.note("fitted_rate", if zero { None } else { Some(report.fitted_rate) });
    run.note("zero_remainder", zero);
    run.note("rate_at_least_beta", zero || report.fitted_rate >= s.beta);
    run.note("envelope", report.envelope);
    Ok(())
}

pub fn hypo(s: &HypoSettings, run: &mut Run) -> anyhow::Result<()> {
    let spec = torus(s.lengths)?;
    let ys: &[f64] = if s.variant == Variant::Shifted { &s.ys } else { &[0.0] };
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for &g in &s.gammas {
        let b = s.b.unwrap_or(g.powf(s.b_exp));
        let a = s.a.unwrap_or(g.powf(s.a_exp));
        for &y in ys {
            let variant = match s.variant {
                Variant::Plain => HypoVariant::Plain,
                Variant::WithQ => HypoVariant::WithQ,
                Variant::Shifted => HypoVariant::Shifted(y),
            };
            let p = HypoParams {
                gamma: g,
                s: s.s,
                gain: s.gain,
                b,
                a,
                variant,
                k_max: s.k_max,
                m_max: s.m,
            };
            let c = subelliptic_constant(&p, &spec)?;
            rows.push(row(&[f(g), f(a), f(b), f(y), f(c.c_sq), f(c.argmax)]));
            values.push(c.c_sq);
        }
    }
    run.csv("hypo.csv", "gamma,a,b,y,c_sq,argmax_kappa_sq", rows)?;
    run.note("variation", spread(values));
    Ok(())
}

pub fn simulate(s: &SimulateSettings, run: &mut Run) -> anyhow::Result<()> {
    let spec = torus(s.lengths)?;
    if s.paths == 0 {
        return Err(Failed("paths must be at least 1".into()).into());
    }
    let mut cfg = SdeConfig::new(s.gamma, s.t_end, s.paths, s.seed);
    cfg.spec = spec;
    if let Some(dt) = s.dt {
        cfg = cfg.with_dt(dt);
    }
    cfg.record_every = s.record_every.unwrap_or((cfg.n_steps() as usize / 1000).max(1));
    cfg.validate()?;
    run.seeds.push(s.seed);
    run.note("dt", cfg.dt);
    run.note("dt_override", cfg.dt_override);
    run.note("steps", cfg.n_steps());

    if s.paths < 100 {
        for p in 0..s.paths {
            let tr = simulate_path(&cfg, p as u64)?;
            let mut buf = Vec::new();
            tr.write_csv(&mut buf)?;
            let name = if s.paths == 1 {
                "trajectory.csv".to_string()
            } else {
                format!("trajectory_{p:04}.csv")
            };
            run.write(&name, &buf)?;
        }
    } else {
        let st = ensemble_stats(&cfg)?;
        let mut buf = Vec::new();
        st.write_csv(&mut buf)?;
        run.write("stats.csv", &buf)?;
        let err = st
            .times
            .iter()
            .zip(&st.msd)
            .filter(|(t, _)| **t >= 0.1)
            .map(|(&t, &m)| (m / msd_exact(s.gamma, t) - 1.0).abs())
            .fold(0.0, f64::max);
        run.note("msd_max_rel_error", err);
    }

    if s.panels {
        let panels = figure1_panels(&s.panel_gammas, s.panel_t_end, s.seed, s.max_points)?;
        let mut plots = Vec::new();
        for (i, p) in panels.iter().enumerate() {
            let rows = p
                .trajectory
                .times
                .iter()
                .zip(&p.wrapped)
                .map(|(t, w)| row(&[f(*t), f(w[0]), f(w[1])]));
            run.csv(&format!("panel_{i}.csv"), "t,x,y", rows)?;
            let title = format!(
                "gamma = {}, T = {}{}",
                p.gamma,
                p.t_end,
                if p.shortened { " (shortened)" } else { "" }
            );
            plots.push((title, p.wrapped.clone()));
            run.note(&format!("panel_{i}_t_end"), p.t_end);
        }
        run.write("panels.svg", svg::panels(&plots, spec.lengths()).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 30.0, 100.0]
            .iter()
            .map(|&g: &f64| (g, 3.0 * g.powf(-0.7)))
            .collect();
        assert!((loglog_slope(&pts) + 0.7).abs() < 1e-12);
    }
}
