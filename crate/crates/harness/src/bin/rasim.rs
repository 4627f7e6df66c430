use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rasim_core::TraceMode;
use rasim_harness::audit::audit_trace;
use rasim_harness::explore::all_inputs;
use rasim_harness::sweep::{csv, verify_bound, CONNECTIVITY_FORMULA};
use rasim_harness::{
    explore, run_sweep, run_trial_traced, ExperimentConfig, ExploreConfig, InputSpec, Protocol,
    SweepReport, Verdict,
};

#[derive(Parser)]
#[command(name = "rasim", version, about = "Random asynchronous model simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one seeded sweep and write its report.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        /// Also export the full trace of this trial index.
        #[arg(long)]
        trace_trial: Option<u64>,
        #[arg(long, requires = "trace_trial")]
        trace_out: Option<PathBuf>,
    },
    /// Run one sweep per value of a varied key.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// `key=v1,v2,...`, e.g. `R=4,8,16,32`.
        #[arg(long)]
        vary: String,
    },
    /// Enumerate every schedule of one crash-tolerant round.
    Explore {
        #[arg(long, default_value = "crash")]
        protocol: Protocol,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        f: usize,
        #[arg(long, default_value_t = 64)]
        depth_cap: usize,
        #[arg(long, default_value_t = 5_000_000)]
        max_states: u64,
        /// Also branch on crash points of the last f processes.
        #[arg(long)]
        crash_points: bool,
        /// Input assignment; every assignment when omitted.
        #[arg(long)]
        inputs: Option<InputSpec>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recheck the connectivity bound of saved reports.
    VerifyBounds {
        report: PathBuf,
        #[arg(long, default_value = CONNECTIVITY_FORMULA)]
        formula: String,
    },
    /// Recompute decision monitors from an exported trace.
    Audit { trace: PathBuf },
}

#[derive(Args)]
struct ExpArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long = "R", alias = "rounds")]
    rounds: Option<String>,
    #[arg(long)]
    scheduler: Option<String>,
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    #[arg(long)]
    trace: Option<String>,
    #[arg(long)]
    crash_window: Option<String>,
    #[arg(long)]
    per_trial: bool,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV summary path (printed to stdout otherwise).
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl ExpArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.config {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            cfg.apply_file(&text).map_err(anyhow::Error::msg)?;
        }
        let flags = [
            ("protocol", &self.protocol),
            ("n", &self.n),
            ("f", &self.f),
            ("R", &self.rounds),
            ("scheduler", &self.scheduler),
            ("adversary", &self.adversary),
            ("inputs", &self.inputs),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("max_steps", &self.max_steps),
            ("trace", &self.trace),
            ("crash_window", &self.crash_window),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v).map_err(anyhow::Error::msg)?;
            }
        }
        if self.per_trial {
            cfg.per_trial = true;
        }
        Ok(cfg)
    }

    fn emit(&self, reports: &[SweepReport]) -> Result<()> {
        let json = if reports.len() == 1 {
            reports[0].to_json()
        } else {
            serde_json::to_string_pretty(reports)?
        };
        if let Some(p) = &self.out {
            fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?;
        }
        let table = csv(reports);
        match &self.csv {
            Some(p) => fs::write(p, table).with_context(|| format!("writing {}", p.display()))?,
            None => print!("{table}"),
        }
        Ok(())
    }
}

fn sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let r = run_sweep(cfg).map_err(|e| anyhow::anyhow!("refusing configuration: {e}"))?;
    eprintln!(
        "{} n={} f={} R={} adversary={}: {}/{} terminated, {} violations, monitors {:?}",
        cfg.protocol,
        cfg.n,
        cfg.f,
        cfg.rounds_text(),
        cfg.adversary,
        r.terminated,
        r.trials,
        r.violations.count,
        r.monitors
            .iter()
            .filter(|(_, c)| **c > 0)
            .collect::<Vec<_>>()
    );
    Ok(r)
}

fn load_reports(path: &PathBuf) -> Result<Vec<SweepReport>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(one) = serde_json::from_str::<SweepReport>(&text) {
        return Ok(vec![one]);
    }
    serde_json::from_str(&text).context("not a sweep report or list of reports")
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            exp,
            trace_trial,
            trace_out,
        } => {
            let cfg = exp.config()?;
            let report = sweep(&cfg)?;
            exp.emit(std::slice::from_ref(&report))?;
            if let Some(k) = trace_trial {
                let mut full = cfg.clone();
                full.trace = TraceMode::Full;
                let (_, trace) = run_trial_traced(&full, k);
                let text = trace.export();
                match trace_out {
                    Some(p) => fs::write(&p, &text)?,
                    None => print!("{text}"),
                }
            }
        }
        Cmd::Sweep { exp, vary } => {
            let base = exp.config()?;
            let (key, values) = vary
                .split_once('=')
                .context("--vary expects key=v1,v2,...")?;
            let mut reports = Vec::new();
            for v in values.split(',') {
                let mut cfg = base.clone();
                cfg.set(key, v).map_err(anyhow::Error::msg)?;
                reports.push(sweep(&cfg)?);
            }
            exp.emit(&reports)?;
        }
        Cmd::Explore {
            protocol,
            n,
            f,
            depth_cap,
            max_states,
            crash_points,
            inputs,
            out,
        } => {
            if protocol != Protocol::Crash {
                bail!("exhaustive exploration supports only the crash protocol");
            }
            let assignments = match inputs {
                None => all_inputs(n),
                Some(InputSpec::All(b)) => vec![vec![b; n]],
                Some(InputSpec::List(v)) => vec![v],
                Some(other) => bail!("explore needs fixed inputs, got `{other}`"),
            };
            let mut reports = Vec::new();
            let mut ok = true;
            for inputs in assignments {
                let r = explore(&ExploreConfig {
                    n,
                    f,
                    inputs,
                    depth_cap,
                    max_states,
                    crash_points,
                });
                let tag: String = r.inputs.iter().map(|b| b.to_string()).collect();
                println!(
                    "inputs={tag} schedules={} states={} depth={} verdict={:?}",
                    r.schedules, r.states, r.max_depth, r.verdict
                );
                ok &= r.holds();
                reports.push(r);
            }
            if let Some(p) = out {
                fs::write(p, serde_json::to_string_pretty(&reports)? + "\n")?;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::VerifyBounds { report, formula } => {
            let mut ok = true;
            for r in load_reports(&report)? {
                let b = verify_bound(&r, &formula);
                let observed = r
                    .connectivity
                    .map(|c| format!("{}/{} = {:.6}", c.count, c.total, c.rate))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{} n={} f={} R={} observed={observed} bound={} verdict={}",
                    r.config.protocol,
                    r.config.n,
                    r.config.f,
                    r.config.rounds_text(),
                    b.bound
                        .map(|x| format!("{x:.6e}"))
                        .unwrap_or_else(|| "-".into()),
                    b.verdict.as_str()
                );
                ok &= b.verdict != Verdict::Fail;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Audit { trace } => {
            let text = fs::read_to_string(&trace)?;
            let a = audit_trace(&text).map_err(anyhow::Error::msg)?;
            println!("{}", serde_json::to_string_pretty(&a)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
