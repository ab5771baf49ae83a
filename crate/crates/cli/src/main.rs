use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pxlap_cli::config::{reference_page, RunConfig};
use pxlap_cli::error::CliError;
use pxlap_cli::fieldio::{load_field, save_table};
use pxlap_cli::pipeline;
use pxlap_cli::report;
use pxlap_core::degiorgi::{certify, recursion_oracle, recursion_threshold};

#[derive(Parser)]
#[command(name = "pxlap", version, about = "Three solutions and L-infinity certificates for the truncated p(x)-Laplacian problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// override a config key, e.g. --set grid.nodes=[24,24]
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// output directory (overrides output_dir)
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// print the JSON report instead of the text report
    #[arg(long)]
    json: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut cfg = base.with_overrides(&self.sets)?;
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check exponents, hypotheses on f and estimate theta
    Validate(Common),
    /// Solve at one (lambda, mu) and certify the solutions
    Solve(Common),
    /// Solve over a lambda by mu table
    Sweep(Common),
    /// Iterate the De Giorgi recursion equality
    Recursion {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        a0: f64,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Certify a stored field
    Certify {
        #[command(flatten)]
        common: Common,
        /// field CSV with header x1,...,xN,value
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long)]
        k: f64,
    },
    /// Print the default configuration
    Defaults {
        /// print the markdown key reference instead of TOML
        #[arg(long)]
        reference: bool,
    },
}

fn emit<T: serde::Serialize>(json: bool, value: &T, text: &str) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
    } else {
        print!("{text}");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(common) => {
            let cfg = common.load()?;
            let (rep, res) = pipeline::validate(&cfg);
            report::ensure_dir(&cfg.output_dir)?;
            report::write_json(&cfg.output_dir.join("validate.json"), &rep)?;
            let text = report::validation_text(&rep);
            report::write_text(&cfg.output_dir.join("validate.txt"), &text)?;
            emit(common.json, &rep, &text);
            res.map(|_| ())
        }
        Command::Solve(common) => {
            let cfg = common.load()?;
            let (_, res) = pipeline::validate(&cfg);
            let problem = res?;
            let lambda = problem.solve_lambda();
            let run = problem.solve(lambda, problem.solve_mu())?;
            report::write_solve(&cfg.output_dir, &run)?;
            emit(common.json, &run, &report::solve_text(&run));
            if run.solution.found_count < 3 {
                return Err(CliError::Incomplete(format!("{} of 3 solutions found", run.solution.found_count)));
            }
            if !run.all_certified {
                return Err(CliError::NotCertified("some solution has no L-infinity certificate on the K grid".into()));
            }
            Ok(())
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let (_, res) = pipeline::validate(&cfg);
            let problem = res?;
            let results = pipeline::sweep(&problem);
            report::write_sweep(&cfg.output_dir, &results)?;
            let cells: Vec<_> = results.iter().map(|(c, _)| c.clone()).collect();
            emit(common.json, &cells, &report::sweep_text(&cells));
            if let Some(c) = cells.iter().find(|c| c.inconsistency) {
                return Err(CliError::Inconsistency(c.error.clone().unwrap_or_default()));
            }
            Ok(())
        }
        Command::Recursion { c, b, eta, a0, n, output, json } => {
            let out = recursion_oracle(c, b, eta, a0, n)?;
            let threshold = recursion_threshold(c, b, eta);
            if let Some(dir) = output {
                report::ensure_dir(&dir)?;
                let rows: Vec<Vec<f64>> = out.sequence.iter().enumerate().map(|(i, a)| vec![i as f64, *a]).collect();
                save_table(&dir.join("recursion.csv"), &["i", "a"], &rows)?;
                report::write_json(&dir.join("recursion.json"), &out)?;
            }
            emit(json, &out, &report::recursion_text(&out, threshold, a0));
            Ok(())
        }
        Command::Certify { common, field, lambda, mu, k } => {
            let cfg = common.load()?;
            let u = load_field(&field)?;
            let mut cfg = cfg;
            cfg.grid.lower = u.grid().lower().to_vec();
            cfg.grid.upper = u.grid().upper().to_vec();
            cfg.grid.nodes = u.grid().nodes_per_axis().to_vec();
            let (_, res) = pipeline::validate(&cfg);
            let problem = res?;
            let lambda = lambda.unwrap_or_else(|| problem.solve_lambda());
            let rep = certify(&u, &problem.inputs(lambda, mu), k, &cfg.certify.params())?;
            report::ensure_dir(&cfg.output_dir)?;
            report::write_json(&cfg.output_dir.join("certify.json"), &rep)?;
            let text = report::certification_report_text(&field.display().to_string(), &rep);
            report::write_text(&cfg.output_dir.join("certify.txt"), &text)?;
            emit(common.json, &rep, &text);
            if !rep.certified {
                return Err(CliError::NotCertified(format!("{} at K = {k}", field.display())));
            }
            Ok(())
        }
        Command::Defaults { reference } => {
            if reference {
                print!("{}", reference_page());
            } else {
                print!("{}", RunConfig::default().to_toml());
            }
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
            ExitCode::from(e.class().code() as u8)
        }
    }
}
