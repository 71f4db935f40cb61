//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinmag_core::coupling::Constants;
use spinmag_core::estimate::{estimate_larmor, EstimatorSettings};
use spinmag_core::experiment::{run_experiment, Engine, ExperimentConfig};
use spinmag_core::pulse::{default_count_window, joint_photocount_pmf, mean_count_difference_exact, mean_count_difference_linear};

use crate::config::RunConfig;
use crate::ensemble::{run_ensemble, stats};
use crate::manifest::{Manifest, SummaryReport};
use crate::output::{
    write_clicks, write_ensemble, write_photocurrent, write_pmf, write_rows, write_spectrum, write_text,
    write_trajectory,
};
use crate::presets::{preset, PRESETS};
use crate::sweep::{frequency_spread, sweep, SWEEP_COLUMNS};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "spinmag", version, about = "Continuous-measurement spin-1 magnetometry simulator")]
pub struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Independent trajectories (RNG streams 0..N).
    #[arg(long, global = true, default_value_t = 1)]
    pub trajectories: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one engine and write its records.
    Simulate {
        what: SimKind,
        #[command(flatten)]
        source: Source,
        /// Mean photon number A^2 of the pulse (pulse only).
        #[arg(long, default_value_t = 100.0)]
        photons: f64,
        /// Largest count per port in the PMF table (pulse only).
        #[arg(long)]
        max_count: Option<u32>,
    },
    /// Full magnetometry run: records, frequency estimate and summary.
    Experiment {
        #[command(flatten)]
        source: Source,
    },
    /// Larmor estimate from a photocurrent CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Search band in Hz, `LO:HI`.
        #[arg(long, value_parser = parse_band)]
        band: (f64, f64),
        #[arg(long, default_value_t = spinmag_core::coupling::RB87_F1_LANDE_G, allow_hyphen_values = true)]
        lande_g: f64,
        #[arg(long)]
        lock_threshold: Option<f64>,
    },
    /// One experiment per value of a config key.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Dotted key such as `probe.intensity_sat`, or `seed`.
        #[arg(long)]
        axis: String,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Print a built-in preset, or list them.
    Preset { name: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Pulse,
    Jumps,
    Sme,
    Moments,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Source {
    pub fn load(&self) -> Result<RunConfig> {
        match (&self.preset, &self.config) {
            (Some(name), _) => preset(name),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                RunConfig::from_toml(&text)
            }
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower edge `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper edge `{hi}`"))?;
    if !(lo > 0.0 && hi > lo) {
        return Err("band must satisfy 0 < LO < HI".into());
    }
    Ok((lo, hi))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Executes a parsed command line and returns the text for stdout.
pub fn run(cli: &Cli) -> Result<String> {
    if cli.trajectories == 0 {
        return Err(Error::InvalidConfig("--trajectories must be at least 1".into()));
    }
    match &cli.command {
        Command::Simulate {
            what,
            source,
            photons,
            max_count,
        } => {
            let cfg = source.load()?;
            match what {
                SimKind::Pulse => simulate_pulse(cli, &cfg, *photons, *max_count),
                SimKind::Jumps => simulate_engine(cli, &cfg, Engine::Jumps),
                SimKind::Sme => simulate_engine(cli, &cfg, Engine::Sme),
                SimKind::Moments => simulate_engine(cli, &cfg, Engine::Moments),
            }
        }
        Command::Experiment { source } => experiment(cli, &source.load()?),
        Command::Estimate {
            input,
            band,
            lande_g,
            lock_threshold,
        } => estimate(cli, input, *band, *lande_g, *lock_threshold),
        Command::Sweep { source, axis, values } => run_sweep(cli, &source.load()?, axis, values),
        Command::Preset { name } => match name {
            Some(n) => Ok(crate::presets::preset_text(n)?.to_string()),
            None => Ok(PRESETS.iter().map(|(k, _)| format!("{k}\n")).collect()),
        },
    }
}

fn simulate_pulse(cli: &Cli, cfg: &RunConfig, photons: f64, max_count: Option<u32>) -> Result<String> {
    let exp = cfg.to_experiment()?;
    let state = spinmag_core::fock::build_product_state(exp.initial, exp.n)?;
    let window = max_count.unwrap_or_else(|| default_count_window(photons));
    let pmf = joint_photocount_pmf(photons, &exp.coupling, &state, window)?;
    let exact = mean_count_difference_exact(photons, &exp.coupling, &state)?;
    let p = exp.initial.map(|c| c.norm_sqr());
    let linear = mean_count_difference_linear(photons, &exp.coupling, exp.n as f64, &p);
    create_dir(&cli.out)?;
    write_pmf(&cli.out.join("pulse.csv"), &pmf)?;
    let mut m = Manifest::new("simulate pulse", Some(cfg), cli.seed, 1);
    m.files.push("pulse.csv".into());
    m.write(&cli.out)?;
    let (mp, mm) = pmf.mean_counts();
    Ok(format!(
        "pulse: n = {}, A^2 = {photons}, window 0..={window}\n\
         pmf mass in window: {:.12}\n\
         mean counts: C+ = {mp:.6}, C- = {mm:.6}\n\
         mean difference: exact {exact:.6e}, linear {:.6e}{}\n",
        exp.n,
        pmf.total(),
        linear.mean_difference,
        if linear.in_linear_regime { "" } else { " (outside the linear regime)" },
    ))
}

fn simulate_engine(cli: &Cli, cfg: &RunConfig, engine: Engine) -> Result<String> {
    let mut exp = cfg.to_experiment()?;
    exp.engine = engine;
    let start = Instant::now();
    let runs = run_ensemble(&exp, cli.seed, cli.trajectories)?;
    let elapsed = start.elapsed().as_secs_f64();
    create_dir(&cli.out)?;
    let mut m = Manifest::new(&format!("simulate {}", crate::manifest::engine_name(engine)), Some(cfg), cli.seed, cli.trajectories);
    let single = runs.len() == 1;
    for (k, r) in runs.iter().enumerate() {
        let suffix = if single { String::new() } else { format!("_{k:04}") };
        let mut record = r.record.clone();
        record.config_hash = Some(cfg.short_hash());
        let names = [
            format!("trajectory{suffix}.csv"),
            format!("photocurrent{suffix}.csv"),
            format!("clicks{suffix}.csv"),
        ];
        write_trajectory(&cli.out.join(&names[0]), &record)?;
        write_photocurrent(&cli.out.join(&names[1]), &r.photocurrent)?;
        m.files.push(names[0].clone());
        m.files.push(names[1].clone());
        if engine == Engine::Jumps {
            write_clicks(&cli.out.join(&names[2]), &record.click_events)?;
            m.files.push(names[2].clone());
        }
    }
    if !single {
        write_ensemble(&cli.out.join("ensemble.csv"), &stats(&runs)?)?;
        m.files.push("ensemble.csv".into());
    }
    m.write(&cli.out)?;
    let d = runs.iter().fold(spinmag_core::record::Diagnostics::default(), |acc, r| {
        let d = r.record.diagnostics;
        spinmag_core::record::Diagnostics {
            max_trace_error: acc.max_trace_error.max(d.max_trace_error),
            max_hermiticity_error: acc.max_hermiticity_error.max(d.max_hermiticity_error),
            min_eigenvalue: match (acc.min_eigenvalue, d.min_eigenvalue) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
            min_purity: acc.min_purity.min(d.min_purity),
            final_purity: acc.final_purity.min(d.final_purity),
        }
    });
    Ok(format!(
        "{} trajectories x {} samples in {elapsed:.2} s\n\
         max trace error {:.3e}, min purity {:.6}{}\n",
        runs.len(),
        runs[0].record.samples.len(),
        d.max_trace_error,
        d.min_purity,
        d.min_eigenvalue.map(|e| format!(", min eigenvalue {e:.3e}")).unwrap_or_default(),
    ))
}

/// Writes the full set of experiment outputs for one stream into `dir`.
pub fn write_experiment(dir: &Path, cfg: &RunConfig, exp: &ExperimentConfig, seed: u64, stream: u64) -> Result<SummaryReport> {
    let start = Instant::now();
    let out = run_experiment(exp, seed, stream)?;
    let runtime = start.elapsed().as_secs_f64();
    create_dir(dir)?;
    let mut record = out.run.record.clone();
    record.config_hash = Some(cfg.short_hash());
    write_trajectory(&dir.join("trajectory.csv"), &record)?;
    write_photocurrent(&dir.join("photocurrent.csv"), &out.run.photocurrent)?;
    write_spectrum(&dir.join("spectrum.csv"), out.estimate.spectrum())?;
    if exp.engine == Engine::Jumps {
        write_clicks(&dir.join("clicks.csv"), &record.click_events)?;
    }
    let report = SummaryReport::new(&out.summary, &out.estimate, runtime);
    write_text(&dir.join("summary.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(report)
}

fn describe(report: &SummaryReport) -> String {
    let e = &report.estimate;
    let est = match (e.frequency_hz, e.confidence_hz, e.field_tesla) {
        (Some(f), Some(c), Some(b)) => format!(
            "lock at {f:.3} Hz +/- {c:.3} Hz (|B| = {:.5} mG, peak/median {:.1})",
            b * 1e7,
            e.peak_ratio
        ),
        _ => format!("no lock (peak/median {:.1})", e.peak_ratio),
    };
    format!(
        "ratio {:.4}, nu_L {:.3} Hz, {est}; spin loss {:.2}%{}\n",
        report.measurement_ratio,
        report.larmor_hz,
        100.0 * report.final_spin_loss,
        report
            .survival_time_s
            .map(|t| format!(", transverse 1/e at {:.3} ms", 1e3 * t))
            .unwrap_or_default(),
    )
}

fn experiment(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let exp = cfg.to_experiment()?;
    create_dir(&cli.out)?;
    let mut m = Manifest::new("experiment", Some(cfg), cli.seed, cli.trajectories);
    let mut text = String::new();
    let files = ["trajectory.csv", "photocurrent.csv", "spectrum.csv", "summary.json"];
    if cli.trajectories == 1 {
        let report = write_experiment(&cli.out, cfg, &exp, cli.seed, 0)?;
        m.files.extend(files.iter().map(|f| f.to_string()));
        text += &describe(&report);
    } else {
        use rayon::prelude::*;
        let reports = (0..cli.trajectories)
            .into_par_iter()
            .map(|k| write_experiment(&cli.out.join(format!("stream_{k:04}")), cfg, &exp, cli.seed, k))
            .collect::<Result<Vec<_>>>()?;
        for (k, r) in reports.iter().enumerate() {
            m.files.extend(files.iter().map(|f| format!("stream_{k:04}/{f}")));
            text += &format!("stream {k}: {}", describe(r));
        }
    }
    if exp.engine == Engine::Jumps {
        m.files.push("clicks.csv".into());
    }
    m.write(&cli.out)?;
    Ok(text)
}

fn estimate(cli: &Cli, input: &Path, band: (f64, f64), lande_g: f64, lock_threshold: Option<f64>) -> Result<String> {
    let record = crate::output::read_photocurrent(input)?;
    let mut settings = EstimatorSettings::default();
    if let Some(t) = lock_threshold {
        settings.lock_threshold = t;
    }
    let e = estimate_larmor(&record, band, lande_g, &Constants::default(), &settings)?;
    create_dir(&cli.out)?;
    write_spectrum(&cli.out.join("spectrum.csv"), e.spectrum())?;
    let report = crate::manifest::EstimateReport::from(&e);
    write_text(&cli.out.join("estimate.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let mut m = Manifest::new(&format!("estimate {}", input.display()), None, cli.seed, 1);
    m.files = vec!["spectrum.csv".into(), "estimate.json".into()];
    m.write(&cli.out)?;
    Ok(match e.locked() {
        Some(r) => format!(
            "lock at {:.3} Hz +/- {:.3} Hz, |B| = {:.6e} T (peak/median {:.1})\n",
            r.frequency_hz, r.confidence_hz, r.field_tesla, r.peak_ratio
        ),
        None => format!("no lock (peak/median {:.1})\n", e.peak_ratio()),
    })
}

fn run_sweep(cli: &Cli, cfg: &RunConfig, axis: &str, values: &[String]) -> Result<String> {
    let points = sweep(cfg, cli.seed, axis, values)?;
    create_dir(&cli.out)?;
    let rows: Vec<Vec<String>> = points.iter().map(|p| p.row()).collect();
    write_rows(&cli.out.join("sweep.csv"), &SWEEP_COLUMNS, &rows)?;
    let mut m = Manifest::new(&format!("sweep {axis}"), Some(cfg), cli.seed, 1);
    m.files.push("sweep.csv".into());
    m.write(&cli.out)?;
    let mut text = String::new();
    for p in &points {
        let s = p.summary.survival_time.map(|t| format!("{:.3} ms", 1e3 * t)).unwrap_or("-".into());
        let f = p.estimate.locked().map(|r| format!("{:.3} Hz", r.frequency_hz)).unwrap_or("no lock".into());
        text += &format!("{axis} = {}: ratio {:.4}, {f}, survival {s}\n", p.value, p.summary.measurement_ratio);
    }
    if let Some((mean, sd)) = frequency_spread(&points) {
        text += &format!("locked estimates: mean {mean:.4} Hz, standard deviation {sd:.4} Hz\n");
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        assert_eq!(parse_band("350:1050").unwrap(), (350.0, 1050.0));
        assert!(parse_band("1050:350").is_err());
        assert!(parse_band("350").is_err());
        assert!(parse_band("a:b").is_err());
    }

    #[test]
    fn command_line_shapes() {
        let c = Cli::try_parse_from(["spinmag", "--seed", "4", "experiment", "--preset", "fig1"]).unwrap();
        assert_eq!(c.seed, 4);
        assert!(matches!(c.command, Command::Experiment { .. }));
        let c = Cli::try_parse_from(["spinmag", "simulate", "jumps", "--preset", "fig1-desk", "--trajectories", "3"]).unwrap();
        assert_eq!(c.trajectories, 3);
        let c = Cli::try_parse_from(["spinmag", "sweep", "--preset", "fig1", "--axis", "seed", "--values", "1,2,3"]).unwrap();
        match c.command {
            Command::Sweep { values, .. } => assert_eq!(values, ["1", "2", "3"]),
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["spinmag", "experiment"]).is_err());
        assert!(Cli::try_parse_from(["spinmag", "experiment", "--preset", "fig1", "--config", "x.toml"]).is_err());
        assert!(Cli::try_parse_from(["spinmag", "simulate", "lindblad", "--preset", "fig1"]).is_err());
    }
}
