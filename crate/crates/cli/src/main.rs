//! `blockscope`: batch front end for the blockage-sensing pipeline.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or parse error,
//! 4 numerical or model error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockscope::features::default_delay_tolerance;
use blockscope::io::{self, ModelSet};
use blockscope::session::{simulate, write_sweeps};
use blockscope::{
    classify, estimate_offset, excess_attenuation_with, extract_features, fit_models,
    match_and_perturb, pdp, stats, AttenuationSeries, DbConvention, Error, ExtractOptions,
    LocalizeOptions, SessionConfig, Window,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "blockscope",
    version,
    about = "Passive blockage sensing on sub-THz links"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize baseline and per-offset sweeps.
    Simulate(SessionArgs),
    /// Excess attenuation of a measured sweep over a baseline.
    Attenuate {
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Convention::Amplitude20log)]
        convention: Convention,
    },
    /// Mean and standard deviation of attenuation tables.
    Stats {
        #[arg(long, required = true, num_args = 1..)]
        attenuation: Vec<PathBuf>,
    },
    /// Fit one histogram model per training attenuation table.
    Fit {
        #[arg(long, required = true, num_args = 2..)]
        training: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = blockscope::freqclass::DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Classify an observation against a model set.
    Classify {
        #[arg(long)]
        models: PathBuf,
        /// Measured sweep; needs --baseline.
        #[arg(long, requires = "baseline", conflicts_with = "attenuation")]
        sweep: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Precomputed attenuation table instead of a sweep pair.
        #[arg(long, required_unless_present = "sweep")]
        attenuation: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Convention::Amplitude20log)]
        convention: Convention,
    },
    /// Power delay profile as `path_length_cm,power_db`.
    Pdp {
        #[arg(long)]
        sweep: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract multipath components; optionally match against a baseline set.
    Features {
        #[arg(long)]
        sweep: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        extract: ExtractArgs,
        #[arg(long)]
        out: PathBuf,
        /// Baseline feature table to match against.
        #[arg(long, requires = "report")]
        baseline: Option<PathBuf>,
        /// Output path for the perturbation table.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        tolerance_bins: f64,
    },
    /// Estimate the target offset from baseline and observed feature tables.
    Localize {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        observed: PathBuf,
        /// Scene TOML (bare scene table or a session file).
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        tolerance_bins: f64,
        #[arg(long)]
        assumed_x: Option<f64>,
        /// Added to the solved offset, e.g. the target radius.
        #[arg(long, default_value_t = 0.0)]
        surface_offset: f64,
        #[arg(long)]
        no_align: bool,
    },
    /// Full pipeline: sweeps, statistics, classification, PDPs, features,
    /// localization.
    Run(SessionArgs),
}

#[derive(Args)]
struct SessionArgs {
    /// Session TOML; built-in defaults if absent.
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the session seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long, value_enum, default_value_t = WindowKind::Kaiser)]
    window: WindowKind,
    #[arg(long, default_value_t = blockscope::cir::DEFAULT_KAISER_BETA)]
    beta: f64,
    #[arg(long, default_value_t = blockscope::cir::DEFAULT_ZERO_PAD)]
    pad: usize,
}

impl WindowArgs {
    fn window(&self) -> Window {
        match self.window {
            WindowKind::Rectangular => Window::Rectangular,
            WindowKind::Hann => Window::Hann,
            WindowKind::Kaiser => Window::Kaiser { beta: self.beta },
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, default_value_t = ExtractOptions::default().max_components)]
    max_components: usize,
    #[arg(long, default_value_t = ExtractOptions::default().min_prominence_db)]
    min_prominence_db: f64,
    #[arg(long, default_value_t = ExtractOptions::default().min_separation_bins)]
    min_separation_bins: usize,
    #[arg(long, default_value_t = ExtractOptions::default().floor_db, allow_hyphen_values = true)]
    floor_db: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowKind {
    Rectangular,
    Hann,
    Kaiser,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    #[value(name = "amplitude_20log")]
    Amplitude20log,
    #[value(name = "power_10log")]
    Power10log,
}

impl From<Convention> for DbConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Amplitude20log => DbConvention::Amplitude20Log,
            Convention::Power10log => DbConvention::Power10Log,
        }
    }
}

fn load_session(args: &SessionArgs) -> Result<SessionConfig, Error> {
    let mut session = match &args.session {
        Some(p) => SessionConfig::read(p)?,
        None => SessionConfig::default(),
    };
    if let Some(seed) = args.seed {
        session.seed = seed;
    }
    Ok(session)
}

fn print_json(value: &serde_json::Value) {
    print!("{}", io::to_json(value));
}

fn attenuation_from(
    sweep: Option<&Path>,
    baseline: Option<&Path>,
    table: Option<&Path>,
    convention: Convention,
) -> Result<AttenuationSeries, Error> {
    match (sweep, baseline, table) {
        (Some(s), Some(b), _) => {
            excess_attenuation_with(&io::read_sweep(s)?, &io::read_sweep(b)?, convention.into())
        }
        (_, _, Some(t)) => io::read_attenuation(t),
        _ => unreachable!("clap enforces an input"),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let session = load_session(&args)?;
            let bands = simulate(&session)?;
            write_sweeps(&args.out, &bands)?;
            let written: Vec<_> = bands
                .iter()
                .map(|b| json!({"band": b.band.band_id.as_str(), "sweeps": b.offsets.len() + 1}))
                .collect();
            print_json(&json!({"seed": session.seed, "bands": written}));
        }
        Command::Attenuate {
            measured,
            baseline,
            out,
            convention,
        } => {
            let a = excess_attenuation_with(
                &io::read_sweep(&measured)?,
                &io::read_sweep(&baseline)?,
                convention.into(),
            )?;
            io::write_attenuation(&a, &out)?;
            let st = stats(&a);
            print_json(&json!({"label": a.label(), "mean_db": st.mean_db, "std_db": st.std_db}));
        }
        Command::Stats { attenuation } => {
            let rows = attenuation
                .iter()
                .map(|p| {
                    let a = io::read_attenuation(p)?;
                    let st = stats(&a);
                    Ok(json!({
                        "path": p.display().to_string(),
                        "label": a.label(),
                        "mean_db": st.mean_db,
                        "std_db": st.std_db,
                    }))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            print_json(&serde_json::Value::Array(rows));
        }
        Command::Fit {
            training,
            out,
            epsilon,
        } => {
            let series = training
                .iter()
                .map(|p| io::read_attenuation(p))
                .collect::<Result<Vec<_>, _>>()?;
            let band = series[0].band().clone();
            if series.iter().any(|s| s.band() != &band) {
                return Err(Error::BandMismatch(
                    "training tables use different grids".into(),
                ));
            }
            let set = ModelSet::new(Some(band.band_id), fit_models(&series, epsilon)?);
            io::write_models(&set, &out)?;
            let labels: Vec<&str> = set.models.iter().map(|m| m.label.as_str()).collect();
            print_json(&json!({"models": labels, "bins": set.models[0].n_bins()}));
        }
        Command::Classify {
            models,
            sweep,
            baseline,
            attenuation,
            convention,
        } => {
            let set = io::read_models(&models)?;
            let a = attenuation_from(
                sweep.as_deref(),
                baseline.as_deref(),
                attenuation.as_deref(),
                convention,
            )?;
            let r = classify(&a, &set.models)?;
            print_json(&json!({
                "winner": r.winner,
                "winner_label": set.models[r.winner].label,
                "ambiguous": r.ambiguous,
                "per_sample_votes": r.per_sample_votes,
                "vote_matrix": r.vote_matrix,
                "pair_ties": r.pair_ties,
                "out_of_range": r.out_of_range,
            }));
        }
        Command::Pdp { sweep, window, out } => {
            let p = pdp(&io::read_sweep(&sweep)?, window.window(), window.pad)?;
            io::write_text(&out, &io::format_pdp(&p))?;
            if p.aliasing_warning() {
                log::warn!(
                    "{:.2}% of PDP energy lies in the upper half of the delay axis",
                    100.0 * p.upper_half_energy_fraction
                );
            }
            print_json(&json!({
                "bins": p.len(),
                "delay_resolution_m": p.delay_resolution,
                "alias_free_range_m": p.alias_free_range,
                "peak_path_length_m": p.path_lengths[p.peak_index()],
                "aliasing_warning": p.aliasing_warning(),
            }));
        }
        Command::Features {
            sweep,
            window,
            extract,
            out,
            baseline,
            report,
            tolerance_bins,
        } => {
            let s = io::read_sweep(&sweep)?;
            let opts = ExtractOptions {
                max_components: extract.max_components,
                min_prominence_db: extract.min_prominence_db,
                min_separation_bins: extract.min_separation_bins,
                floor_db: extract.floor_db,
            };
            let p = pdp(&s, window.window(), window.pad)?;
            let set = extract_features(&p, &opts)?.with_label(s.label());
            io::write_features(&set, &out)?;
            let mut summary = json!({"k": set.k()});
            if let (Some(b), Some(r)) = (baseline, report) {
                let base = io::read_features(&b)?;
                let rep =
                    match_and_perturb(&base, &set, tolerance_bins * base.delay_resolution_s());
                io::write_text(&r, &io::format_perturbation(&rep))?;
                summary["delta_k"] = json!(rep.delta_k);
                summary["mean_rho_db"] = json!(rep.mean_rho_db());
            }
            print_json(&summary);
        }
        Command::Localize {
            baseline,
            observed,
            scene,
            tolerance_bins,
            assumed_x,
            surface_offset,
            no_align,
        } => {
            let base = io::read_features(&baseline)?;
            let obs = io::read_features(&observed)?;
            let scene = io::read_scene(&scene)?;
            let tol = tolerance_bins * default_delay_tolerance(&base) / 2.0;
            let report = match_and_perturb(&base, &obs, tol);
            let opts = LocalizeOptions {
                assumed_x_m: assumed_x,
                surface_offset_m: surface_offset,
                align_to_los: !no_align,
                ..Default::default()
            };
            let e = estimate_offset(&report, &scene, &opts)?;
            print!("{}", io::to_json(&e));
        }
        Command::Run(args) => {
            let session = load_session(&args)?;
            let summary = blockscope::run_experiment(&session, &args.out)?;
            print!("{}", io::to_json(&summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 4 } else { 3 })
        }
    }
}
