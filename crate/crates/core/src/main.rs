use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ncpg::config::RunConfig;
use ncpg::suites::{self, Ctx};
use ncpg::{tables, Error, Result};

#[derive(Parser)]
#[command(name = "ncpg", version, about = "Fermionic Fock-space checks and tables")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suite to run (repeatable); replaces the configured selection.
    #[arg(long = "suite", global = true)]
    suites: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Run the invariant suites and write `report.json`.
    Verify,
    /// Twisted norms of seeded random elements (`norms.csv`).
    Norms,
    /// Isometry constants and defects per twist (`ito.json`).
    Ito,
    /// Girsanov shift diagnostics per grid (`girsanov.json`).
    Girsanov,
    /// Cubic-drift SDE residuals per grid (`sde.json`).
    Sde,
    /// Lattice scan (`phi4_scan.csv`) and fits (`phi4_fits.json`).
    Phi4,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out.clone_from(&cli.out);
    }
    if !cli.suites.is_empty() {
        cfg.suites.clone_from(&cli.suites);
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir })
    }

    fn emit(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let mut w = BufWriter::new(File::create(d.join(name))?);
                body(&mut w)?;
                w.flush()?;
            }
            None => {
                let mut w = io::stdout().lock();
                body(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    fn json(&self, name: &str, v: &impl Serialize) -> Result<()> {
        self.emit(name, |w| {
            serde_json::to_writer_pretty(&mut *w, v).map_err(io::Error::from)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

fn threads() -> Result<()> {
    let Ok(v) = std::env::var("NCPG_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("NCPG_THREADS = `{v}` is not a positive integer")))?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// `Ok(true)` when every check passed.
fn run(cli: &Cli) -> Result<bool> {
    threads()?;
    let cfg = load(cli)?;
    let sink = Sink::new(cfg.out.clone())?;
    let ctx = Ctx { seed: cfg.seed, tolerances: cfg.tolerances.clone() };
    match cli.cmd {
        Cmd::Verify => {
            let selected: Vec<_> = cfg.suites.iter().filter_map(|s| suites::find(s)).collect();
            let checks = suites::run_all(&ctx, &selected);
            for c in &checks {
                eprintln!("{c}");
            }
            sink.json("report.json", &checks)?;
            Ok(checks.iter().all(|c| !c.failed()))
        }
        Cmd::Norms => {
            let rows = tables::norms(&cfg.model, &ctx)?;
            sink.emit("norms.csv", |w| tables::norms_csv(&rows, &mut &mut *w))?;
            Ok(true)
        }
        Cmd::Ito => sink.json("ito.json", &tables::ito(&cfg.model, &ctx)?).map(|_| true),
        Cmd::Girsanov => sink.json("girsanov.json", &tables::girsanov(&cfg.model, &ctx)?).map(|_| true),
        Cmd::Sde => sink.json("sde.json", &tables::sde(&cfg.model)?).map(|_| true),
        Cmd::Phi4 => {
            let rows = tables::phi4_scan(&cfg.phi4)?;
            sink.emit("phi4_scan.csv", |w| ncpg::phi4::write_csv(&rows, &mut &mut *w))?;
            sink.json("phi4_fits.json", &tables::phi4_fits(&cfg.phi4)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::Config(_) | Error::Io(_))) => {
            eprintln!("ncpg: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ncpg: {e}");
            ExitCode::from(1)
        }
    }
}
