use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use turbo_combining::analysis::verify;
use turbo_combining::harness::{emit_records, parse_config, presets, run_sweep};
use turbo_combining::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "MIMO hybrid-ARQ turbo packet combining simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BLER sweep from a scenario file or a preset name.
    Run {
        config: String,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Run the numerical self-checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the shipped scenario presets, or print one.
    Presets { name: Option<String> },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            frames,
            seed,
            out,
            workers,
        } => run(&config, frames, seed, out, workers),
        Command::Verify { seed } => {
            let checks = verify::run_all(seed);
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
        Command::Presets { name: None } => {
            for p in presets::PRESETS {
                println!("{:<10} {}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
        Command::Presets { name: Some(n) } => match presets::find(&n) {
            Some(p) => {
                print!("{}", p.text);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown preset '{n}'");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}

fn run(
    config: &str,
    frames: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: usize,
) -> ExitCode {
    let path = PathBuf::from(config);
    let text = if path.exists() {
        match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {config}: {e}");
                return ExitCode::from(EXIT_IO);
            }
        }
    } else if let Some(p) = presets::find(config) {
        p.text.to_string()
    } else {
        eprintln!("{config}: no such file or preset");
        return ExitCode::from(EXIT_IO);
    };
    let mut scenario = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{config}: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(f) = frames {
        if f == 0 {
            eprintln!("--frames must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        scenario.frames = f;
    }
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(o) = out {
        scenario.out = o;
    }
    let cells = scenario.schemes.len() * scenario.ebn0_db.len();
    let mut done = 0;
    let out_path = scenario.out.clone();
    let result = run_sweep(&scenario, workers, |records| {
        // Cells complete in (scheme, Eb/N0) order.
        let scheme = scenario.schemes[done / scenario.ebn0_db.len()];
        let ebn0 = scenario.ebn0_db[done % scenario.ebn0_db.len()];
        done += 1;
        eprintln!("[{done}/{cells}] {scheme} at {ebn0} dB");
        emit_records(records, &out_path)
    });
    match result {
        Ok(_) => {
            eprintln!("wrote {}", out_path.display());
            ExitCode::SUCCESS
        }
        Err(Error::Io(e)) => {
            eprintln!("I/O error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(Error::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("simulation failed: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}
