use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use star_iscc::baselines::run_scheme;
use star_iscc::channel::draw_instance;
use star_iscc::harness::{self, RunConfig, SweepParam};
use star_iscc::{Profile, SchemeKind};

#[derive(Parser)]
#[command(name = "star-iscc", version, about = "STAR-RIS aided sensing, computing and communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML file overlaying the chosen profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = "proposed_star")]
    scheme: SchemeKind,

    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel draw and write report.json.
    Run,
    /// Run the sweep described in the config file.
    Sweep,
    /// Solve one draw and write beampattern.csv.
    Beampattern,
    /// Check solver invariants and the tiny-instance oracle.
    Validate,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let profile = cli.profile.map(|p| match p {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    });
    let rc = RunConfig::load(cli.config.as_deref(), profile, cli.seed)?;
    let cfg = &rc.system;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;

    match cli.command {
        Command::Run => {
            let (_, ch) = draw_instance(cfg, cfg.rng_seed)?;
            let rep = run_scheme(cli.scheme, cfg, &ch, &mut harness::init_rng(cfg.rng_seed))?;
            println!("scheme       {}", cli.scheme);
            println!("sum rate     {:.6} Mbit/s", rep.sum_rate() / 1e6);
            for (l, r) in rep.rates.r_dr.iter().enumerate() {
                println!("  robot {l}    {:.6} Mbit/s", r / 1e6);
            }
            if cli.scheme.senses() {
                println!("sensing SINR {:.3} dB", rep.sensing_sinr_db());
            }
            println!("power        {:.4e} W sensing, {:.4e} W total", rep.rates.p_sense, rep.rates.total_power());
            println!("outer iters  {} ({})", rep.outer_trajectory.len(), rep.termination.as_str());
            println!("wall time    {:.2} s", rep.total_seconds);
            serde_json::to_writer_pretty(create(&cli.out, "report.json")?, &rep)?;
        }
        Command::Sweep => {
            let Some(spec) = rc.sweep.clone() else {
                bail!("the config file has no [sweep] table");
            };
            if spec.param == SweepParam::None {
                let rows = harness::run_convergence(&rc.convergence, cfg)?;
                harness::write_convergence(&rows, create(&cli.out, "convergence.csv")?)?;
                println!("wrote {} rows to convergence.csv", rows.len());
            } else {
                let rows = harness::run_sweep(&spec, cfg)?;
                let p = spec.param.as_str();
                harness::write_sweep(&rows, create(&cli.out, &format!("sweep_{p}.csv"))?)?;
                harness::write_timings(&rows, create(&cli.out, &format!("timings_{p}.csv"))?)?;
                let summary = harness::summarize(&rows);
                harness::write_summary(&summary, create(&cli.out, &format!("sweep_{p}_summary.csv"))?)?;
                for s in &summary {
                    println!(
                        "{:<18} {p} = {:<6} {:>10.6} ± {:.6} Mbit/s ({} draws)",
                        s.scheme.as_str(),
                        s.value,
                        s.mean_mbps,
                        s.stderr_mbps,
                        s.draws
                    );
                }
            }
        }
        Command::Beampattern => {
            let (rows, _) = harness::run_beampattern(cfg, cfg.rng_seed, cli.scheme)?;
            harness::write_beampattern(&rows, create(&cli.out, "beampattern.csv")?)?;
            for r in rows.iter().filter(|r| !r.marker.is_empty()) {
                println!("{:>4}°  {:>9.3} dB  {}", r.angle_deg, r.gain_db, r.marker);
            }
        }
        Command::Validate => {
            let report = harness::run_validate(cfg)?;
            print!("{report}");
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
