//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use kbm_core::assembly::assemble_x;
use kbm_core::linalg::{eig, truncation_search};
use kbm_core::sde::{ensemble_stats, msd_exact, vacf_exact, SdeConfig};
use kbm_core::semigroup::{equilibrium_decay, spectral_gap, StateVector};
use kbm_core::spectra::matching::DEFAULT_MARGIN;
use kbm_core::spectra::*;
use kbm_core::{assembly::assemble_p, SpectralWindow, TorusSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

type Check = anyhow::Result<(bool, String)>;

fn strip() -> SpectralWindow {
    SpectralWindow::new(-0.5, 4.5, -1.0, 1.0).unwrap()
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
    hi / lo
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (
        elapsed.as_secs() < limit_s,
        format!("{:.1}s of {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn spectral_convergence(eigs: &mut Vec<C64>) -> Check {
    let start = Instant::now();
    let spec = TorusSpec::default();
    let mut ok = true;
    let mut dists = Vec::new();
    let mut counts = Vec::new();
    for gamma in [10.0, 30.0, 100.0, 300.0] {
        let set = spectrum_window(gamma, &strip(), &spec, &SweepConfig::default())?;
        eigs.extend(set.values());
        let r = match_spectra(&set, &spec, DEFAULT_MARGIN);
        ok &= set.tail_certified;
        if gamma >= 30.0 {
            let mult = |b: f64| r.pairs.iter().filter(|p| p.lambda_base == b).count();
            ok &= set.items.len() == 13 && r.is_complete();
            ok &= mult(0.0) == 1 && mult(1.0) == 4 && mult(2.0) == 4 && mult(4.0) == 4;
        }
        counts.push(set.items.len());
        dists.push(r.hausdorff);
    }
    ok &= dists.windows(2).all(|w| w[1] < w[0]) && dists[3] < 1e-2;
    let (fast, t) = within(start.elapsed(), 120);
    Ok((
        ok && fast,
        format!(
            "counts {counts:?}, hausdorff [{}], {t}",
            dists.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn resolvent_rate() -> Check {
    let start = Instant::now();
    let spec = TorusSpec::default();
    let mut pts = Vec::new();
    for gamma in [10.0, 30.0, 100.0, 300.0, 1000.0] {
        let sw = resolvent_diff_norm(gamma, C64::new(-1.0, 0.0), 0.0, &spec, 400.0, 16, DEFAULT_TAIL_RATIO)?;
        pts.push((gamma, sw.sup));
    }
    let slope = loglog_slope(&pts);
    let (fast, t) = within(start.elapsed(), 300);
    Ok((slope <= -0.1 && fast, format!("slope {slope:.4}, {t}")))
}

fn grushin_equivalence(eigs: &mut Vec<C64>) -> Check {
    let start = Instant::now();
    let spec = TorusSpec::default();
    let modes = spec.modes_within(8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rect = SpectralWindow::new(-0.5, 5.5, -5.5, 5.5)?;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut total = 0;
    for _ in 0..20 {
        let gamma = rng.random_range(10.0..200.0);
        let mode = modes[rng.random_range(0..modes.len())];
        let builder = |m: usize| Ok(assemble_p(gamma, &mode, m, &spec)?.entries);
        let report = truncation_search(builder, &rect, 1e-8, 8, 512)?;
        let m = report.m_used;
        let pairs = eig(&builder(m)?)?;
        let direct: Vec<C64> = pairs.iter().map(|p| p.value).collect();
        eigs.extend(&direct);
        let g = GrushinScalar::new(gamma, mode, m, None, &spec)?;
        for z in direct.iter().filter(|z| z.norm() <= 5.0) {
            let zero = grushin_zero(&g, *z)?;
            worst = worst.max((zero - z).norm());
            total += 1;
        }
        let in_rect = direct.iter().filter(|z| rect.contains(**z)).count();
        ok &= grushin_zero_count(&g, &rect)? == in_rect;
    }
    ok &= worst < 1e-6;
    let (fast, t) = within(start.elapsed(), 60);
    Ok((
        ok && fast,
        format!("{total} eigenvalues, max |zero - eigenvalue| {worst:.2e}, counts agree: {ok}, {t}"),
    ))
}

fn uniform_invertibility() -> Check {
    let spec = TorusSpec::default();
    let study = BoundStudy::standard();
    let inv: Vec<f64> = inverse_bound_study(&study, &spec)?.iter().map(|r| r.value).collect();
    let reg: Vec<f64> = regularity_bound_study(&study, &spec)?.iter().map(|r| r.value).collect();
    let finite = inv.iter().chain(&reg).all(|v| v.is_finite() && *v > 0.0);
    let (a, b) = (spread(&inv), spread(&reg));
    Ok((
        finite && a <= 5.0 && b <= 5.0,
        format!(
            "{} + {} values, max/min {a:.3} (A^-1) and {b:.3} (A^-1/2)",
            inv.len(),
            reg.len()
        ),
    ))
}

fn gap_and_equilibrium(eigs: &mut Vec<C64>) -> Check {
    let start = Instant::now();
    let spec = TorusSpec::default();
    let set = spectrum_window(100.0, &strip(), &spec, &SweepConfig::default())?;
    eigs.extend(set.values());
    let gap = spectral_gap(100.0, &spec, &strip(), &SweepConfig::default())?;
    let u = StateVector::random_smooth(&spec, 8.0, 24, 5);
    let grid: Vec<f64> = (0..=16).map(|i| 1.0 + 0.25 * i as f64).collect();
    let r = equilibrium_decay(100.0, &u, &grid, 0.9)?;
    let (fast, t) = within(start.elapsed(), 120);
    Ok((
        (gap - 1.0).abs() < 0.05 && r.fitted_rate >= 0.9 && fast,
        format!("gap {gap:.6}, fitted rate {:.4}, {t}", r.fitted_rate),
    ))
}

fn operator_identities() -> Check {
    let spec = TorusSpec::default();
    let mut anti = true;
    let mut worst: f64 = 0.0;
    let modes = spec.modes_within(100.0);
    for mode in &modes {
        let x = assemble_x(mode, 8)?.entries;
        anti &= (&x + x.adjoint()).iter().all(|z| *z == C64::new(0.0, 0.0));
        let x2 = &x * &x;
        let q = mode.norm_sq();
        worst = worst.max((2.0 * x2[(8, 8)] + C64::new(q, 0.0)).norm() / q.max(1.0));
    }
    Ok((
        anti && worst < 1e-14,
        format!(
            "{} modes, exact anti-Hermitian: {anti}, max rel defect {worst:.1e}",
            modes.len()
        ),
    ))
}

fn accretivity(eigs: &[C64]) -> Check {
    let bad = eigs.iter().filter(|z| !is_accretive(**z)).count();
    let min_re = eigs.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    Ok((
        bad == 0,
        format!("{} eigenvalues, {bad} violations, min Re {min_re:.3e}", eigs.len()),
    ))
}

fn sde_statistics() -> Check {
    let start = Instant::now();
    let gamma: f64 = 10.0;
    let dt = 1e-3 * (10.0 / (gamma * gamma)).min(1.0);
    let cfg = SdeConfig::new(gamma, 2.0, 10_000, 8).with_dt(dt).with_record_every(50);
    let st = ensemble_stats(&cfg)?;
    // relative sup-norm error of the vacf on [0, 0.5]
    let mut vacf_dev: f64 = 0.0;
    let mut vacf_peak: f64 = 0.0;
    let mut msd_rel: f64 = 0.0;
    for (i, &t) in st.times.iter().enumerate() {
        if t <= 0.5 + 1e-12 {
            vacf_dev = vacf_dev.max((st.vacf[i] - vacf_exact(gamma, t)).abs());
            vacf_peak = vacf_peak.max(vacf_exact(gamma, t));
        }
        if t >= 0.1 - 1e-12 {
            msd_rel = msd_rel.max((st.msd[i] / msd_exact(gamma, t) - 1.0).abs());
        }
    }
    let vacf_rel = vacf_dev / vacf_peak;

    let big = SdeConfig::new(100.0, 1.0, 1000, 9).with_dt(1e-3 * (10.0f64 / 1e4).min(1.0));
    let big = SdeConfig {
        record_every: big.n_steps() as usize,
        ..big
    };
    let st = ensemble_stats(&big)?;
    let msd1 = *st.msd.last().unwrap();
    let (fast, t) = within(start.elapsed(), 300);
    Ok((
        vacf_rel < 0.05 && msd_rel < 0.05 && (msd1 - 4.0).abs() < 0.4 && fast,
        format!("vacf rel {vacf_rel:.4}, msd rel {msd_rel:.4} (gamma 10); msd(1) = {msd1:.4} (gamma 100); {t}"),
    ))
}

fn hypoelliptic_constants() -> Check {
    let spec = TorusSpec::default();
    let mut ys = Vec::new();
    for y in [0.0, 10.0, -10.0, 100.0, -100.0] {
        let p = HypoParams {
            gamma: 400.0,
            s: 0.0,
            gain: 0.125,
            b: 15.0,
            a: 1.0,
            variant: HypoVariant::Shifted(y),
            k_max: 6.0 * 225.0,
            m_max: 32,
        };
        ys.push(subelliptic_constant(&p, &spec)?.c_sq);
    }
    let mut gs = Vec::new();
    for gamma in [20.0f64, 50.0, 100.0] {
        let p = HypoParams {
            gamma,
            s: 0.0,
            gain: 0.25,
            b: gamma.powf(0.125),
            a: gamma.powf(0.25),
            variant: HypoVariant::WithQ,
            k_max: 200.0,
            m_max: 32,
        };
        gs.push(subelliptic_constant(&p, &spec)?.c_sq);
    }
    let (a, b) = (spread(&ys), spread(&gs));
    Ok((a <= 2.0 && b <= 5.0, format!("y spread {a:.3}, gamma spread {b:.3}")))
}

fn run_kbm(dir: &Path, args: &[&str], threads: Option<&str>) -> anyhow::Result<i32> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kbm"));
    cmd.arg("--out").arg(dir).args(args);
    if let Some(t) = threads {
        cmd.env("KBM_THREADS", t);
    }
    Ok(cmd.output()?.status.code().unwrap_or(-1))
}

fn outputs(dir: &Path) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if name != "manifest.json" {
            files.push((name, std::fs::read(&p)?));
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Check {
    let runs: [&[&str]; 7] = [
        &["spectrum"],
        &["converge", "--gammas", "30,100", "--svg"],
        &["resolvent", "--gammas", "30,100", "--qa-gammas", "30,100"],
        &["gap", "--gammas", "100"],
        &["hypo", "--k-max", "50", "--m", "16"],
        &[
            "simulate",
            "--paths",
            "200",
            "--t-end",
            "0.2",
            "--panels",
            "--panel-t-end",
            "0.2",
        ],
        &["simulate", "--paths", "1"],
    ];
    let tmp = tempfile::tempdir()?;
    let mut files = 0;
    let mut mismatched = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        let (ca, cb) = (run_kbm(&a, args, None)?, run_kbm(&b, args, Some("1"))?);
        let (fa, fb) = (outputs(&a)?, outputs(&b)?);
        files += fa.len();
        if ca != 0 || cb != 0 || fa.is_empty() || fa != fb {
            mismatched.push(args[0]);
        }
    }
    Ok((
        mismatched.is_empty(),
        format!("{files} files over {} runs, differing: {mismatched:?}", runs.len()),
    ))
}

fn main() {
    let mut eigs = Vec::new();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 spectral convergence", spectral_convergence(&mut eigs)),
        ("2 resolvent rate", resolvent_rate()),
        ("3 Grushin equivalence", grushin_equivalence(&mut eigs)),
        ("4 uniform invertibility", uniform_invertibility()),
        ("5 spectral gap and equilibrium", gap_and_equilibrium(&mut eigs)),
        ("6 operator identities", operator_identities()),
        ("7 accretivity", accretivity(&eigs)),
        ("8 SDE statistics", sde_statistics()),
        ("9 hypoelliptic constants", hypoelliptic_constants()),
        ("10 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in criteria {
        match outcome {
            Ok((true, detail)) => println!("PASS  {name}: {detail}"),
            Ok((false, detail)) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: error: {e:#}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
