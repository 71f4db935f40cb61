//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p spinmag --test acceptance --release` for the
//! quoted runtimes; the test profile is already optimized.

use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use spinmag::cli::{run, Cli};
use spinmag::presets::preset;
use spinmag_core::coupling::{affine_decomposition, coupling_shape, qnd_coupling, Constants, CouplingVector};
use spinmag_core::experiment::run_experiment;
use spinmag_core::fock::{build_operator, build_product_state, single_atom, OperatorKind, SectorOperator};
use spinmag_core::jumps::{frozen_state_counts, run_trajectory, JumpConfig, JumpStepParams};
use spinmag_core::model::{CouplingMode, SystemSpec, TimeGrid};
use spinmag_core::moments::{coherent_state, qnd_variance_closed_form, run_moments, MomentConfig, MomentParams};
use spinmag_core::pulse::{default_count_window, joint_photocount_pmf, mean_count_difference_exact, mean_count_difference_linear};
use spinmag_core::record::{ensemble_stats, TrajectoryRecord};
use spinmag_core::sme::{run_sme, run_sme_mixed, run_unconditional, Dissipator, SmeConfig};
use spinmag_core::C64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn system(n: u32, g: CouplingVector, flux: f64, omega: [f64; 3]) -> SystemSpec {
    SystemSpec {
        n,
        initial: single_atom::x_polarized(),
        coupling: g,
        mode: CouplingMode::Full,
        flux,
        omega,
    }
}

fn ensemble<F>(count: u64, f: F) -> Vec<TrajectoryRecord>
where
    F: Fn(u64) -> TrajectoryRecord + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

// v_zz is column 8 of the observables
const VZZ: usize = 8;

fn qnd_anchor() -> Outcome {
    let (n, g, f) = (8u32, 0.05, 1e4);
    let v0 = n as f64 / 2.0;
    let half_life = 1.0 / (v0 * f * g * g);
    // 20 checkpoints up to v0 / 4, i.e. two successive halvings
    let total = 3.0 * half_life;
    let checkpoint = total / 20.0;
    let sys = system(n, qnd_coupling(g), f, [0.0; 3]);

    let mcfg = MomentConfig::new(
        MomentParams::from_system(&sys),
        coherent_state(&sys.initial, n as f64).unwrap(),
        TimeGrid::new(1e-5, total, checkpoint).unwrap(),
    );
    let m = run_moments(&mcfg, 1, 0).unwrap();
    let moments_err = m.record.samples[1..]
        .iter()
        .map(|s| {
            let exact = qnd_variance_closed_form(s.time, v0, f, g).unwrap();
            (s.moments.cov[2][2] - exact).abs() / exact
        })
        .fold(0.0, f64::max);

    // the conditional variance of one exact trajectory depends on the
    // record; its ensemble mean follows the closed form
    let sme_err = |dt: f64| {
        let cfg = SmeConfig::new(sys.clone(), TimeGrid::new(dt, total, checkpoint).unwrap());
        let runs = ensemble(400, |k| run_sme(&cfg, 7, k).unwrap().record);
        let st = ensemble_stats(&runs).unwrap();
        st.times[1..]
            .iter()
            .zip(&st.mean[1..])
            .map(|(t, m)| {
                let exact = qnd_variance_closed_form(*t, v0, f, g).unwrap();
                (m[VZZ] - exact).abs() / exact
            })
            .fold(0.0, f64::max)
    };
    let coarse = sme_err(2e-5);
    let fine = sme_err(5e-6);
    outcome(
        fine <= 0.02 && moments_err <= 0.005,
        format!(
            "max rel. error SME {fine:.4} (dt 5us; {coarse:.4} at 20us), moments {moments_err:.2e}, 20 checkpoints to t = {:.1} ms",
            1e3 * total
        ),
    )
}

fn oracle_triangle() -> Outcome {
    let (n, g, f) = (4u32, 0.02, 2e4);
    let omega = [0.0, 2.0 * std::f64::consts::PI * 20.0, 0.0];
    let total = 0.1;
    let sys = system(n, qnd_coupling(g), f, omega);
    let sample = total / 10.0;
    let trajectories = 500;

    let jump_dt = 0.01 / f;
    let jcfg = JumpConfig::new(sys.clone(), TimeGrid::new(jump_dt, total, sample).unwrap());
    let jumps = ensemble_stats(&ensemble(trajectories, |k| run_trajectory(&jcfg, 21, k).unwrap())).unwrap();
    let scfg = SmeConfig::new(sys.clone(), TimeGrid::new(2e-6, total, sample).unwrap());
    let sme = ensemble_stats(&ensemble(trajectories, |k| run_sme(&scfg, 22, k).unwrap().record)).unwrap();
    let reference = run_unconditional(&sys, &TimeGrid::new(1e-5, total, sample).unwrap(), Dissipator::Diffusive).unwrap();

    let mut worst = 0.0f64;
    for i in 1..=10 {
        for k in 0..3 {
            let (a, sa) = (jumps.mean[i][k], jumps.std_error[i][k]);
            let (b, sb) = (sme.mean[i][k], sme.std_error[i][k]);
            let c = reference.moments[i].mean[k];
            for (d, se) in [(a - b, (sa * sa + sb * sb).sqrt()), (a - c, sa), (b - c, sb)] {
                // the z component starts at exactly zero for every run
                if se > 0.0 {
                    worst = worst.max(d.abs() / se);
                }
            }
        }
    }
    let decay = 1.0 - reference.moments[10].mean_norm() / n as f64;
    outcome(
        worst <= 3.0,
        format!("largest pairwise gap {worst:.2} combined SE over <F> at 10 checkpoints; reference |<F>| loss {:.1}%", 100.0 * decay),
    )
}

fn photocount_statistics() -> Outcome {
    let (n, g, f) = (4u32, 0.05, 1e4);
    let dt = 0.05 / f;
    let steps = 100_000u64;
    let window = 200u64;
    let sys = SystemSpec {
        initial: [C64::new(0.8, 0.0), C64::new(0.5, 0.0), C64::new(0.11f64.sqrt(), 0.0)],
        ..system(n, qnd_coupling(g), f, [0.0; 3])
    };
    let state = sys.initial_state().unwrap();
    let counts = frozen_state_counts(&sys, &JumpStepParams { flux: f, dt }, &state, steps, window, 5).unwrap();
    let m = counts.len() as f64;
    let fz = state.expectation(&build_operator(OperatorKind::Fz, n).unwrap()).unwrap().re;
    let x_mean = g * fz;
    let mut p_values = Vec::new();
    for (port, sign) in [(0usize, 1.0), (1, -1.0)] {
        let c: Vec<f64> = counts.iter().map(|p| if port == 0 { p.0 } else { p.1 } as f64).collect();
        let expected = 0.5 * f * window as f64 * dt * (1.0 + sign * x_mean);
        let mean = c.iter().sum::<f64>() / m;
        // total count vs its Poisson mean
        let z2 = (mean * m - expected * m).powi(2) / (expected * m);
        p_values.push(1.0 - ChiSquared::new(1.0).unwrap().cdf(z2));
        // dispersion: variance equal to the mean
        let d = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / mean;
        let chi = ChiSquared::new(m - 1.0).unwrap();
        let cdf = chi.cdf(d);
        p_values.push(2.0 * cdf.min(1.0 - cdf));
    }
    let (ma, mb) = (
        counts.iter().map(|p| p.0 as f64).sum::<f64>() / m,
        counts.iter().map(|p| p.1 as f64).sum::<f64>() / m,
    );
    let cov = counts.iter().map(|p| (p.0 as f64 - ma) * (p.1 as f64 - mb)).sum::<f64>() / (m - 1.0);
    let r = cov / (ma * mb).sqrt();
    p_values.push(1.0 - ChiSquared::new(1.0).unwrap().cdf(m * r * r));
    let min_p = p_values.iter().cloned().fold(1.0, f64::min);
    outcome(
        min_p >= 0.01,
        format!(
            "{} windows of {window} steps; p-values mean+/disp+/mean-/disp-/cov = {}",
            counts.len(),
            p_values.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join("/")
        ),
    )
}

fn pulse_signal() -> Outcome {
    let k = Constants::default();
    let shape = coupling_shape(-150e6, &k).unwrap();
    let states = [
        single_atom::x_polarized(),
        [C64::new(0.8, 0.0), C64::new(0.0, 0.5), C64::new(-(0.11f64.sqrt()), 0.0)],
    ];
    let amplitude_sq = 50.0;
    let mut worst_ratio = 0.0f64;
    let mut worst_mass = 1.0f64;
    for n in [1u32, 2, 4, 8] {
        for gmax in [1e-4, 1e-3, 1e-2] {
            let g = CouplingVector::new(shape[0], shape[1], shape[2]).scaled(-gmax / 6.0);
            for c in &states {
                let psi = build_product_state(*c, n).unwrap();
                let exact = mean_count_difference_exact(amplitude_sq, &g, &psi).unwrap();
                let pops = c.map(|a| a.norm_sqr());
                let lin = mean_count_difference_linear(amplitude_sq, &g, n as f64, &pops).mean_difference;
                let bound = (n as f64 * gmax).powi(2);
                worst_ratio = worst_ratio.max(((lin - exact) / exact).abs() / bound);
                let pmf = joint_photocount_pmf(amplitude_sq, &g, &psi, default_count_window(amplitude_sq)).unwrap();
                worst_mass = worst_mass.min(pmf.total());
            }
        }
    }
    outcome(
        worst_ratio <= 1.0 && worst_mass >= 1.0 - 1e-8,
        format!("worst rel. error / (n max|G|)^2 = {worst_ratio:.3}; smallest PMF mass {worst_mass:.12}"),
    )
}

fn figure_runs() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let fig1 = preset("fig1").unwrap().to_experiment().unwrap();
    let out = run_experiment(&fig1, 1, 0).unwrap();
    let ratio = out.summary.measurement_ratio;
    let ratio_ok = (ratio - 0.1).abs() <= 1e-12;
    let target = 699.812;
    let lock = out.estimate.locked().map(|r| r.frequency_hz);
    let lock_ok = lock.is_some_and(|f| (f - target).abs() <= 0.02 * target);
    let loss_ok = out.summary.max_spin_loss < 0.05;
    pass &= ratio_ok && lock_ok && loss_ok;
    notes.push(format!(
        "fig1 ratio {ratio}, lock {}, max |<F>| loss {:.2}%",
        lock.map_or("none".to_string(), |f| format!("{f:.2} Hz")),
        100.0 * out.summary.max_spin_loss
    ));

    let fig2 = preset("fig2").unwrap().to_experiment().unwrap();
    let out = run_experiment(&fig2, 1, 0).unwrap();
    let ratio = out.summary.measurement_ratio;
    let periods = out.summary.survival_time.map(|t| t * fig2.larmor_hz());
    pass &= (ratio - 10.0).abs() <= 1e-11 && periods.is_some_and(|p| p <= 5.0);
    notes.push(format!(
        "fig2 ratio {ratio}, transverse 1/e after {} Larmor periods, {}",
        periods.map_or("never".to_string(), |p| format!("{p:.2}")),
        if out.estimate.locked().is_some() { "locked" } else { "no lock" }
    ));
    outcome(pass, notes.join("; "))
}

fn structural_invariants() -> Outcome {
    let mut worst_comm = 0.0f64;
    let mut worst_affine = 0.0f64;
    let k = Constants::default();
    let shape = coupling_shape(-150e6, &k).unwrap();
    let g = CouplingVector::new(shape[0], shape[1], shape[2]).scaled(-1e-2);
    for n in 1..=12u32 {
        let ops: Vec<SectorOperator> = [OperatorKind::Fx, OperatorKind::Fy, OperatorKind::Fz]
            .iter()
            .map(|&o| build_operator(o, n).unwrap())
            .collect();
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let lhs = ops[a].commutator(&ops[b]);
            let rhs = ops[c].scale(C64::new(0.0, 1.0));
            worst_comm = worst_comm.max(lhs.max_abs_diff(&rhs));
        }
        let direct = g.number_operator(n).unwrap();
        let rebuilt = affine_decomposition(&g).reconstruct(n).unwrap();
        worst_affine = worst_affine.max(direct.max_abs_diff(&rebuilt));
    }

    // mixed-state SME from a pure product state
    let sys = system(5, g.scaled(5.0), 5e3, [0.0, 4000.0, 300.0]);
    let mut cfg = SmeConfig::new(sys.clone(), TimeGrid::new(2e-6, 0.02, 1e-3).unwrap());
    cfg.positivity_checks = true;
    let mixed = run_sme_mixed(&cfg, 3, 0).unwrap().record.diagnostics;
    let pure = run_sme(&cfg, 3, 0).unwrap().record.diagnostics;
    let mut jcfg = JumpConfig::new(sys, TimeGrid::new(2e-6, 0.02, 1e-3).unwrap());
    jcfg.positivity_checks = true;
    let jumps = run_trajectory(&jcfg, 3, 0).unwrap().diagnostics;
    let purity_loss = (1.0 - mixed.min_purity).max(1.0 - pure.min_purity).max(1.0 - jumps.min_purity);
    let min_eig = mixed.min_eigenvalue.unwrap_or(0.0);

    let pass = worst_comm <= 1e-12
        && worst_affine <= 1e-12
        && mixed.max_trace_error <= 1e-6
        && mixed.max_hermiticity_error <= 1e-12
        && min_eig >= -1e-10
        && purity_loss <= 1e-9;
    outcome(
        pass,
        format!(
            "commutators {worst_comm:.1e}, affine identity {worst_affine:.1e}, trace {:.1e}, hermiticity {:.1e}, min eigenvalue {min_eig:.1e}, purity loss {purity_loss:.1e}",
            mixed.max_trace_error, mixed.max_hermiticity_error
        ),
    )
}

fn determinism() -> Outcome {
    let run_into = |dir: &std::path::Path, args: &[&str]| {
        let mut argv = vec!["spinmag", "--out", dir.to_str().unwrap()];
        argv.extend_from_slice(args);
        run(&<Cli as clap::Parser>::parse_from(argv)).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = a.path().join("small.toml");
    let text = spinmag::presets::preset_text("fig2-desk")
        .unwrap()
        .replace("n = 10 ", "n = 3 ")
        .replace("total_time_ms = 100.0", "total_time_ms = 20.0");
    std::fs::write(&config, text).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--seed", "9", "experiment", "--preset", "fig1"],
        vec!["--seed", "9", "--trajectories", "2", "simulate", "jumps", "--config", config.to_str().unwrap()],
        vec!["--seed", "9", "--trajectories", "2", "simulate", "sme", "--config", config.to_str().unwrap()],
        vec!["--seed", "9", "simulate", "pulse", "--config", config.to_str().unwrap()],
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let (da, db) = (a.path().join(i.to_string()), b.path().join(i.to_string()));
        run_into(&da, case);
        run_into(&db, case);
        let mut names: Vec<_> = std::fs::read_dir(&da)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|f| f.ends_with(".csv"))
            .collect();
        names.sort();
        for name in names {
            compared += 1;
            if std::fs::read(da.join(&name)).unwrap() != std::fs::read(db.join(&name)).unwrap() {
                differing.push(format!("{i}/{name}"));
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("{compared} CSV files compared across repeated runs, {} differ {:?}", differing.len(), differing),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("QND analytic anchor", qnd_anchor),
        ("oracle triangle", oracle_triangle),
        ("photocount statistics", photocount_statistics),
        ("pulse signal", pulse_signal),
        ("fig1/fig2 reproduction", figure_runs),
        ("structural invariants", structural_invariants),
        ("determinism", determinism),
    ];
    let filter: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        println!("{} [{}] {name}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
