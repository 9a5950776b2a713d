use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zerosum::config::Config;
use zerosum::runner::{self, Command, Settings};
use zerosum::{formats, tables, Error, Result};
use zerosum_core::codec::BookMode;

#[derive(Parser)]
#[command(name = "zerosum", version, about = "Zero-sum parallel bus signaling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; results go to <out>/<scenario>/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pattern and code book seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenarios simulated in parallel.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Print the bus capacity tables.
    Tables,
    /// SE, DIFF and ZS at 16 Gbit/s, worst and typical patterns.
    Baseline(Common),
    /// ZS eye and ripple against the disparity bound.
    DisparitySweep(Common),
    /// ZS buses split into independently coded groups.
    BusSize(Common),
    /// Worst-case eyes from 0.233 to 16 Gbit/s.
    RateSweep(Common),
    /// Write or check code book files.
    #[command(subcommand)]
    Codebook(CodebookVerb),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Enumerated,
    Sampled,
}

#[derive(Subcommand)]
enum CodebookVerb {
    /// Build a code book and write it out.
    Export {
        /// Data bits per word.
        #[arg(long)]
        bits: u32,
        /// Code word width; defaults to the fewest wires that fit.
        #[arg(long)]
        width: Option<u32>,
        #[arg(long, default_value_t = 0)]
        disparity: u32,
        #[arg(long, value_enum, default_value_t = Mode::Sampled)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Destination file; standard output when omitted.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Read a code book file and validate every entry.
    Import { file: PathBuf },
}

fn settings(c: &Common) -> Result<(Settings, Option<PathBuf>)> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if c.jobs.is_some() {
        cfg.jobs = c.jobs;
    }
    let out = c.out.clone().or_else(|| cfg.out.clone());
    Ok((Settings::new(cfg)?, out))
}

fn experiment(cmd: Command, c: &Common) -> Result<()> {
    let (s, out) = settings(c)?;
    let report = runner::execute(cmd, &s, out.as_deref())?;
    print!("{}", report.summary_text());
    if let Some(o) = out {
        let name = s.config.name.as_deref().unwrap_or(cmd.name());
        println!("results written to {}", o.join(name).display());
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Verb::Tables => {
            print!("{}", tables::compute()?.render());
            Ok(())
        }
        Verb::Baseline(c) => experiment(Command::Baseline, &c),
        Verb::DisparitySweep(c) => experiment(Command::DisparitySweep, &c),
        Verb::BusSize(c) => experiment(Command::BusSize, &c),
        Verb::RateSweep(c) => experiment(Command::RateSweep, &c),
        Verb::Codebook(CodebookVerb::Export {
            bits,
            width,
            disparity,
            mode,
            seed,
            file,
        }) => {
            let mode = match mode {
                Mode::Enumerated => BookMode::Enumerated,
                Mode::Sampled => BookMode::Sampled,
            };
            let book = zerosum::build_codebook(bits, width, disparity, mode, seed)?;
            let text = formats::codebook_to_string(&book);
            match file {
                Some(p) => {
                    write_file(&p, &text)?;
                    eprintln!("{}", zerosum::describe_codebook(&book));
                }
                None => print!("{text}"),
            }
            Ok(())
        }
        Verb::Codebook(CodebookVerb::Import { file }) => {
            let text = std::fs::read_to_string(&file).map_err(|source| Error::Io {
                path: file.clone(),
                source,
            })?;
            let book = formats::codebook_from_str(&text).map_err(|e| match e {
                Error::Config(m) => Error::config(format!("{}: {m}", file.display())),
                other => other,
            })?;
            println!("{}: {}", file.display(), zerosum::describe_codebook(&book));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
