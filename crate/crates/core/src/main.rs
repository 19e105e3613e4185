use std::path::PathBuf;
use std::process::ExitCode;

use beamfreq::config::{parse_scheme, ConfigFile};
use beamfreq::scalar::clean_degrees;
use beamfreq::{emit_results, run_campaign, AggregateMetrics64, Scheme};
use clap::Parser;

/// Monte Carlo evaluation of joint beamwidth/subband allocation in a mmWave cell.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// TOML configuration; omitted keys take the reference defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Frames per user count.
    #[arg(long)]
    frames: Option<usize>,
    /// Output directory for CSVs and manifest.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// proposed | no-protect | fixed:<deg>. Replaces any configured arm list.
    #[arg(long)]
    algo: Option<String>,
    /// Comma-separated user counts, e.g. 20,40,60.
    #[arg(long, value_delimiter = ',')]
    sweep_k: Option<Vec<usize>>,
    /// Position uncertainty radius in meters.
    #[arg(long)]
    beta: Option<f64>,
    /// Edge threshold in meters (defaults to beta).
    #[arg(long)]
    delta: Option<f64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Do not print the summary table.
    #[arg(long)]
    quiet: bool,
}

fn apply_overrides(mut file: ConfigFile, cli: &Cli) -> ConfigFile {
    if let Some(seed) = cli.seed {
        file.sweep.seed = seed;
    }
    if let Some(frames) = cli.frames {
        file.sweep.frames = frames;
    }
    if let Some(k) = &cli.sweep_k {
        file.sweep.users = k.clone();
    }
    if let Some(w) = cli.workers {
        file.sweep.workers = w;
    }
    if let Some(beta) = cli.beta {
        file.algorithm.beta_m = beta;
    }
    if let Some(delta) = cli.delta {
        file.algorithm.delta_m = Some(delta);
    }
    if let Some(algo) = &cli.algo {
        file.algorithm.algo = algo.clone();
        file.sweep.arms.clear();
    }
    file.resolved()
}

fn print_summary(agg: &AggregateMetrics64) {
    println!(
        "{:>5} {:<12} {:>6} {:>10} {:>9} {:>8} {:>8} {:>12} {:>10}",
        "K",
        "algorithm",
        "delta",
        "gamma",
        "stderr",
        "served",
        "outage",
        "sum [Gbps]",
        "mode [deg]"
    );
    for s in &agg.summaries {
        let opt =
            |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        println!(
            "{:>5} {:<12} {:>6} {:>10} {:>9} {:>8.2} {:>8.2} {:>12} {:>10}",
            s.users,
            s.arm.label(),
            match s.arm.scheme {
                Scheme::NoProtect => "-".to_string(),
                _ => format!("{:.2}", s.arm.delta),
            },
            opt(s.gamma.mean, 3),
            opt(s.gamma.stderr, 3),
            s.mean_served,
            s.mean_outage,
            opt(s.sum_rate_bps.mean.map(|r| r / 1e9), 3),
            opt(s.modal_beamwidth().map(clean_degrees), 0),
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => ConfigFile::from_path(path),
        None => Ok(ConfigFile::default()),
    };
    let file = match file {
        Ok(f) => apply_overrides(f, &cli),
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(algo) = &cli.algo {
        if let Err(m) = parse_scheme::<f64>(algo) {
            eprintln!("config error: --algo: {m}");
            return ExitCode::from(2);
        }
    }
    let campaign = match file.to_campaign::<f64>() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let agg = match run_campaign(&campaign) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("simulation failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    match emit_results(&agg, &file, &cli.out) {
        Ok(manifest) => {
            if !cli.quiet {
                print_summary(&agg);
                println!("wrote {} (run {})", cli.out.display(), manifest.run_id);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("output error: {e}");
            ExitCode::FAILURE
        }
    }
}
