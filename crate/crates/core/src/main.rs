use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_smallscale::dsp::{calibrate, compute_pdp, ctf_to_cir, noise_floor, DetectionConfig};
use ris_smallscale::ensemble::{Drop, DropEnsemble};
use ris_smallscale::estimation::{estimate_scenario, EstimationConfig};
use ris_smallscale::io;
use ris_smallscale::presets::{all_presets, load_preset, parse_preset_key};
use ris_smallscale::report::{write_report, ReportFile};
use ris_smallscale::roundtrip::{roundtrip_estimation_config, run_roundtrip, Tolerances};
use ris_smallscale::synthesis::{synthesize_ensemble, SynthesisConfig};
use ris_smallscale::{Error, Mode, Result, Scenario};

#[derive(Parser)]
#[command(name = "ris-smallscale", version, about = "Small-scale channel estimation and synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate scenario parameters from a directory of sweep files.
    Estimate(EstimateArgs),
    /// Write synthesized impulse responses and their ground truth.
    Synthesize(SynthesizeArgs),
    /// Synthesize, re-estimate and compare against the preset.
    Roundtrip(RoundtripArgs),
    /// Calibrate one sweep and write its power delay profile.
    Pdp(PdpArgs),
    /// Show the preset registry.
    Presets(PresetsArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON estimation settings; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Calibration directory applied to every sweep.
    #[arg(long)]
    cal: Option<PathBuf>,
    /// Overrides the scenario recorded in the sweep headers.
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// scenario:mode, e.g. outdoor:IRWR
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 100)]
    drops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write each drop's transfer function under `<out>/sweeps`.
    #[arg(long)]
    sweeps: bool,
}

#[derive(Args)]
struct RoundtripArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 2000)]
    drops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tolerances: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Generate and process drops on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct PdpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    cal: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    zero_pad: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PresetsArgs {
    #[arg(long)]
    list: bool,
    /// Print the registry as JSON.
    #[arg(long)]
    json: bool,
}

enum Outcome {
    Ok,
    Breach,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn estimate(args: EstimateArgs) -> Result<Outcome> {
    let cfg: EstimationConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => EstimationConfig::default(),
    };
    let cal = args.cal.as_deref().map(io::read_calibration).transpose()?;
    let sweeps = io::read_sweep_dir(&args.input)?;
    let drops = sweeps
        .into_iter()
        .map(|s| {
            let s = match &cal {
                Some(c) => calibrate(&s, c)?,
                None => s,
            };
            Drop::from_sweep(s, cfg.zero_pad_factor)
        })
        .collect::<Result<Vec<_>>>()?;
    let ensemble = DropEnsemble {
        scenario: args.scenario,
        mode: args.mode,
        drops,
    };
    let est = estimate_scenario(&ensemble, &cfg)?;
    println!(
        "{} drops used, {} skipped; KF {:.2} ± {:.2} dB",
        est.counts.n_used, est.counts.n_skipped_detection, est.params.kf.mu_db, est.params.kf.sigma_db
    );
    write_report(&args.out, &ReportFile::from_estimate("estimate", cfg, est))?;
    Ok(Outcome::Ok)
}

fn synthesize(args: SynthesizeArgs) -> Result<Outcome> {
    let (scenario, mode) = parse_preset_key(&args.preset)?;
    let params = load_preset(scenario, mode)?;
    let cfg = SynthesisConfig {
        seed: args.seed,
        n_drops: args.drops,
        ..Default::default()
    };
    let ensemble = synthesize_ensemble(&params, &cfg)?;
    ensure_dir(&args.out)?;
    let sweeps_dir = args.out.join("sweeps");
    if args.sweeps {
        ensure_dir(&sweeps_dir)?;
    }
    for (i, d) in ensemble.drops.iter().enumerate() {
        let stem = format!("drop{i:05}");
        io::write_cir(&args.out.join(format!("{stem}.cir.csv")), &d.cir, &d.label)?;
        if let Some(truth) = &d.ground_truth {
            io::write_ground_truth(&args.out.join(format!("{stem}.truth.json")), truth)?;
        }
        if args.sweeps {
            io::write_sweep(&sweeps_dir.join(format!("{stem}.csv")), &d.ctf)?;
        }
    }
    println!("{} drops of {} written to {}", ensemble.len(), params.key(), args.out.display());
    Ok(Outcome::Ok)
}

fn roundtrip(args: RoundtripArgs) -> Result<Outcome> {
    let (scenario, mode) = parse_preset_key(&args.preset)?;
    let params = load_preset(scenario, mode)?;
    let tol: Tolerances = match &args.tolerances {
        Some(p) => io::read_json(p)?,
        None => Tolerances::default(),
    };
    let synth = SynthesisConfig {
        seed: args.seed,
        n_drops: args.drops,
        parallel: !args.serial,
        ..Default::default()
    };
    let est_cfg = roundtrip_estimation_config();
    let report = if args.serial {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(|| run_roundtrip(&params, &synth, &est_cfg, &tol))?
    } else {
        run_roundtrip(&params, &synth, &est_cfg, &tol)?
    };
    for check in &report.checks {
        println!("{check}");
    }
    let passed = report.passed;
    println!("{}", if passed { "all checks passed" } else { "tolerance breach" });
    if let Some(out) = &args.out {
        write_report(out, &ReportFile::from_roundtrip(est_cfg, report, tol, args.seed))?;
    }
    Ok(if passed { Outcome::Ok } else { Outcome::Breach })
}

fn pdp(args: PdpArgs) -> Result<Outcome> {
    let mut sweep = io::read_sweep(&args.input)?;
    if let Some(dir) = &args.cal {
        sweep = calibrate(&sweep, &io::read_calibration(dir)?)?;
    }
    let mut pdp = compute_pdp(&ctf_to_cir(&sweep, args.zero_pad)?);
    pdp.noise_floor = noise_floor(&pdp.powers, DetectionConfig::default().noise_tail_fraction);
    io::write_pdp(&args.out, &pdp)?;
    Ok(Outcome::Ok)
}

fn presets(args: PresetsArgs) -> Result<Outcome> {
    let all = all_presets();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&all).expect("presets serialize"));
        return Ok(Outcome::Ok);
    }
    if !args.list {
        return Err(Error::InvalidConfig("presets needs --list or --json".into()));
    }
    for p in &all {
        let clusters = match (&p.inter, &p.intra) {
            (Some(i), Some(c)) => format!(
                "  clusters {:.1}, arrival {} ns, decay {}/ns; rays {}, rms ds {} ns",
                i.avg_num_clusters,
                i.mean_cluster_arrival_time_ns,
                i.cluster_power_decay_per_ns,
                c.avg_num_rays,
                c.rms_ds_ns
            ),
            _ => "  KF only".to_string(),
        };
        println!(
            "{:<16} KF {:>5.1} ± {:.1} dB{clusters}",
            p.key(),
            p.kf.mu_db,
            p.kf.sigma_db
        );
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Synthesize(a) => synthesize(a),
        Command::Roundtrip(a) => roundtrip(a),
        Command::Pdp(a) => pdp(a),
        Command::Presets(a) => presets(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Breach) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
