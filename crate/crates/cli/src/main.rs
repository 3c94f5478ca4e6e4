use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blgame::config::load_config;
use blgame::harness::{run_dir, run_flatnorm, run_simulate, run_sweep, SweepAxis};
use blgame::verify::{run_verify, VerifyOptions};
use blgame::Error;

const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "blgame", version, about = "Selection-mutation games on finite metric strategy spaces")]
#[command(after_help = concat!(
    "Relative output directories are resolved against $",
    "BLGAME_OUTPUT_ROOT",
    " (default: the current directory).\n\n",
    "Exit codes: 0 ok, 1 validation error, 2 runtime or step failure, 3 verify failure."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its run directory.
    Simulate {
        config: PathBuf,
    },
    /// Flat norm of a weighted point set (`weight,x0,x1,...` per line; `-` for stdin).
    Flatnorm {
        /// Also print the brute-force value (at most 3 support points).
        #[arg(long)]
        oracle: bool,
        input: PathBuf,
    },
    /// Run the built-in invariant suites.
    Verify {
        /// `builtin`, `quick`, or a single check name.
        #[arg(long, default_value = "builtin")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a template once per axis value, in parallel.
    Sweep {
        config: PathBuf,
        /// `dotted.key=v1,v2,...`
        #[arg(long)]
        axis: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Simulate { config } => {
            let exp = load_config(&config)?;
            let dir = run_dir(&exp.spec);
            let s = run_simulate(&exp, &dir)?;
            if s.retries > 0 {
                eprintln!("note: step failures; reran with dt = {} after {} halvings", s.dt, s.retries);
            }
            println!("run        {}", s.name);
            println!("directory  {}", s.dir.display());
            println!("steps      {} (dt = {})", s.steps, s.dt);
            println!("final mass {:.12}", s.final_mass);
            if let Some(d) = s.final_target_distance {
                println!("target     {d:.6e}");
            }
            println!("min weight {:.6e}", s.min_weight);
            match s.dissipative {
                Some(true) => println!("dissipativity pass"),
                Some(false) => println!("dissipativity FAIL"),
                None => println!("dissipativity n/a"),
            }
            Ok(0)
        }
        Command::Flatnorm { oracle, input } => {
            let text = if input.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s)?;
                s
            } else {
                std::fs::read_to_string(&input)?
            };
            let r = run_flatnorm(&text, oracle)?;
            println!("flat_norm {:.17e}", r.norm);
            if let Some(o) = r.oracle {
                println!("oracle    {o:.17e}");
                println!("abs_diff  {:.3e}", (o - r.norm).abs());
            }
            Ok(0)
        }
        Command::Verify { suite, seed } => {
            let report = run_verify(&VerifyOptions {
                suite,
                seed,
                fault: None,
            })?;
            print!("{}", report.render());
            Ok(if report.passed() { 0 } else { EXIT_VERIFY })
        }
        Command::Sweep { config, axis } => {
            let axis = SweepAxis::parse(&axis)?;
            let template = std::fs::read_to_string(&config)?;
            let report = run_sweep(&template, &axis)?;
            println!("{} runs in {}", report.rows.len(), report.dir.display());
            for r in &report.rows {
                let d = r
                    .summary
                    .final_target_distance
                    .map_or_else(|| "-".to_string(), |d| format!("{d:.3e}"));
                println!(
                    "{}={:<10} mass {:.6}  target {d}  dissipative {}",
                    report.axis,
                    r.value,
                    r.summary.final_mass,
                    match r.summary.dissipative {
                        Some(true) => "pass",
                        Some(false) => "FAIL",
                        None => "n/a",
                    }
                );
            }
            Ok(0)
        }
    }
}
