use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use si_bell::analysis::{chsh, si_test, si_test_theory, Policy};
use si_bell::harness::{self, load_config, parse_angle_table, run_experiment};
use si_bell::models::{box_theory, coin_theory, entanglement_mixture_theory};
use si_bell::ontic::{AngleTable, Stage};
use si_bell::quantum::Convention;
use si_bell::trial::{Ensemble, LabelScheme};
use si_bell::Error;

#[derive(Parser)]
#[command(name = "si-bell-sim", version, about = "Bell-experiment simulator and statistical-independence analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write log, report and CSVs.
    Simulate {
        config: PathBuf,
        /// Overrides model.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical-independence test on one stage of a trial log.
    Analyze {
        log: PathBuf,
        #[arg(long)]
        stage: String,
        /// A, B or AB. Defaults to AB; theory tests without it use the whole ensemble.
        #[arg(long)]
        label: Option<String>,
        /// `alpha=…,tau=…,n_min=…`; individual flags win.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        n_min: Option<u64>,
        /// Theory-relative test against coin, mixture, quantum or galton:<rows>.
        #[arg(long)]
        theory: Option<String>,
        /// Angle table for mixture/quantum theories, `a0,a1;b0,b1`.
        #[arg(long)]
        angles: Option<String>,
        #[arg(long, default_value = "singlet")]
        convention: String,
    },
    /// CHSH estimate of a trial log.
    Chsh {
        log: PathBuf,
        /// `a0,a1;b0,b1`, e.g. `0,pi/4;pi/8,3pi/8`.
        #[arg(long, default_value = "0,pi/4;pi/8,3pi/8")]
        angles: String,
        #[arg(long, default_value_t = 1)]
        min_per_cell: u64,
        /// Also write the estimate as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Every applicable test on a trial log.
    Report {
        log: PathBuf,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        angles: Option<String>,
    },
}

fn invalid(m: impl Into<String>) -> Error {
    Error::InvalidParameter(m.into())
}

fn parse_policy(
    text: Option<&str>,
    alpha: Option<f64>,
    tau: Option<f64>,
    n_min: Option<u64>,
) -> Result<Policy, Error> {
    let mut p = Policy::default();
    if let Some(text) = text {
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| invalid(format!("policy item {item:?}")))?;
            let num = || v.trim().parse::<f64>().map_err(|_| invalid(format!("policy value {v:?}")));
            match k.trim() {
                "alpha" => p.alpha = num()?,
                "tau" => p.tau = num()?,
                "n_min" => p.n_min = v.trim().parse().map_err(|_| invalid(format!("policy value {v:?}")))?,
                other => return Err(invalid(format!("unknown policy key {other:?}"))),
            }
        }
    }
    if let Some(a) = alpha {
        p.alpha = a;
    }
    if let Some(t) = tau {
        p.tau = t;
    }
    if let Some(n) = n_min {
        p.n_min = n;
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) || !(0.0..=1.0).contains(&p.tau) {
        return Err(invalid("policy needs 0 < alpha < 1 and 0 ≤ tau ≤ 1"));
    }
    Ok(p)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let result = run_experiment(&cfg)?;
            for f in &result.files {
                println!("{}", result.dir.join(f).display());
            }
        }
        Command::Analyze {
            log,
            stage,
            label,
            policy,
            alpha,
            tau,
            n_min,
            theory,
            angles,
            convention,
        } => {
            let ens = Ensemble::read(&log)?;
            let stage: Stage = stage.parse()?;
            let scheme: Option<LabelScheme> = label.as_deref().map(str::parse).transpose()?;
            let policy = parse_policy(policy.as_deref(), alpha, tau, n_min)?;
            let report = match theory {
                None => si_test(ens.trials(), stage, scheme.unwrap_or(LabelScheme::Joint), policy)?,
                Some(t) => {
                    let table = match &angles {
                        Some(a) => parse_angle_table(a)?,
                        None => AngleTable::chsh(),
                    };
                    let conv: Convention = convention.parse()?;
                    let pq = || si_bell::analysis::quantum_joint_table(&table, conv);
                    let dist = match t.as_str() {
                        "coin" => coin_theory(),
                        "mixture" => entanglement_mixture_theory(&table, &pq()?, 0.5)?,
                        "quantum" => entanglement_mixture_theory(&table, &pq()?, 1.0)?,
                        g if g.starts_with("galton:") => {
                            let rows = g["galton:".len()..].parse().map_err(|_| invalid(format!("theory {g:?}")))?;
                            box_theory(rows)?
                        }
                        other => return Err(invalid(format!("unknown theory {other:?}"))),
                    };
                    si_test_theory(ens.trials(), stage, &dist, scheme, policy)?
                }
            };
            print_json(&serde_json::to_value(report).expect("json"));
        }
        Command::Chsh {
            log,
            angles,
            min_per_cell,
            csv,
        } => {
            let ens = Ensemble::read(&log)?;
            let table = parse_angle_table(&angles)?;
            let est = chsh(ens.trials(), &table, min_per_cell)?;
            if let Some(path) = csv {
                harness::emit_plot_data(harness::PlotData::Chsh(&est), &path)?;
            }
            print_json(&serde_json::to_value(est).expect("json"));
        }
        Command::Report { log, all, angles } => {
            if !all {
                return Err(invalid("report currently needs --all"));
            }
            let ens = Ensemble::read(&log)?;
            let table = angles.as_deref().map(parse_angle_table).transpose()?;
            print_json(&harness::report_all(&ens, table.as_ref(), Policy::default()));
        }
    }
    Ok(())
}

fn error_line(code: &str, message: &str) -> String {
    let escaped = message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
    format!("error: code={code} message=\"{escaped}\"")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.code(), &e.to_string()));
            ExitCode::from(1)
        }
    }
}
