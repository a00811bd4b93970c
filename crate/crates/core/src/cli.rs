//! The `nmf` command line.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 on usage or
//! validation errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::agents::{build_agent, evaluate, AgentSpec};
use crate::aggregators::{reversibility_suite, FunctorSpec, SuiteConfig};
use crate::analysis::{
    analytical_dependency, empirical_dependency, reachable_histories, verify_equivalence_roundtrip, verify_morphism,
    Morphism, Report,
};
use crate::envs::{make_random_mdp, EnvId};
use crate::error::{Error, Result};
use crate::experiments::{paper_grid, render_plot, run_sweep, write_csv, SweepConfig};
use crate::process::FiniteMdp;
use crate::wrappers::{as_nmdp_oracle, wrap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Overrides the sweep worker count.
pub const WORKERS_ENV: &str = "NMF_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "nmf",
    version,
    about = "Build non-Markovian processes with reversible history aggregators and check them"
)]
pub struct Cli {
    /// Seed for randomized checks and training.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the main artifact (report, CSV or SVG) to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode-after-aggregate round trips on random trajectories.
    VerifyReversibility(ReversibilityArgs),
    /// Markov abstraction of the non-Markov embedding against the original.
    VerifyCategory(CategoryArgs),
    /// Pointwise morphism conditions for a JSON map between two processes.
    VerifyMorphism(MorphismArgs),
    /// Empirical against predicted dependency structure of a history.
    AnalyzeDeps(DepsArgs),
    /// Train and evaluate one agent on one wrapped environment.
    Run(RunArgs),
    /// Run a grid of cells and write CSV.
    Sweep(SweepArgs),
    /// Render a sweep CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ReversibilityArgs {
    #[arg(long, default_value_t = 1000)]
    pub trajectories: usize,
    /// Random band kernels on top of the named functors.
    #[arg(long, default_value_t = 50)]
    pub kernels: usize,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct CategoryArgs {
    /// Environment ids of tabular processes (repeatable).
    #[arg(long = "env")]
    pub envs: Vec<String>,
    /// Process files (repeatable).
    #[arg(long = "mdp-file")]
    pub files: Vec<PathBuf>,
    /// Additional seeded random processes with up to 4 states and 2 actions.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct MorphismArgs {
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    /// JSON file `{"states": [..], "actions": [..], "rewards": [[from, to], ..]}`.
    #[arg(long)]
    pub map: PathBuf,
}

#[derive(Debug, Args)]
pub struct DepsArgs {
    #[arg(long)]
    pub env: String,
    #[arg(long)]
    pub wrapper: String,
    #[arg(long)]
    pub t: usize,
    /// Index of the history among those reachable at time t, in
    /// breadth-first order.
    #[arg(long, default_value_t = 0)]
    pub history: usize,
    /// Check every reachable history at time t.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub env: String,
    #[arg(long, default_value = "id")]
    pub wrapper: String,
    /// Reward aggregator.
    #[arg(long)]
    pub har: Option<String>,
    #[arg(long, default_value = "random")]
    pub agent: String,
    /// Training episodes.
    #[arg(long, default_value_t = 2000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 10)]
    pub eval_episodes: usize,
    /// Episode length; defaults to the environment's own cap.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config JSON.
    #[arg(long, required_unless_present = "paper_grid")]
    pub config: Option<PathBuf>,
    /// Use the built-in grid instead of a config file.
    #[arg(long, conflicts_with = "config")]
    pub paper_grid: bool,
    /// Worker threads; defaults to $NMF_WORKERS, then to available cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn emit(cli: &Cli, out: &mut dyn Write, text: &str, value: &serde_json::Value) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    if let Some(path) = &cli.out {
        std::fs::write(path, format!("{json}\n"))?;
    }
    if cli.json {
        writeln!(out, "{json}")?;
    } else {
        write!(out, "{text}")?;
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<bool> {
    match &cli.command {
        Command::VerifyReversibility(a) => reversibility(cli, a, out),
        Command::VerifyCategory(a) => category(cli, a, out),
        Command::VerifyMorphism(a) => morphism(cli, a, out),
        Command::AnalyzeDeps(a) => deps(cli, a, out),
        Command::Run(a) => run(cli, a, out),
        Command::Sweep(a) => sweep(cli, a, out),
        Command::Plot(a) => plot(cli, a, out),
    }
}

fn reversibility(cli: &Cli, a: &ReversibilityArgs, out: &mut dyn Write) -> Result<bool> {
    if a.trajectories == 0 || a.max_len == 0 {
        return Err(Error::Validation("trajectories and max-len must be at least 1".into()));
    }
    let cfg = SuiteConfig {
        trajectories: a.trajectories,
        random_kernels: a.kernels,
        max_len: a.max_len,
        seed: cli.seed,
        ..SuiteConfig::default()
    };
    let report = reversibility_suite(&cfg)?;
    let mut text = format!(
        "{} functors x {} trajectories, tolerance {:e}\n",
        report.outcomes.len(),
        report.trajectories,
        report.tolerance
    );
    for o in report.failures() {
        text += &format!("  FAIL {}: max error {:e}", o.spec, o.max_error);
        if let Some(g) = o.inverse_growth {
            text += &format!(" (inverse growth {g:e})");
        }
        text += "\n";
    }
    let worst = report.outcomes.iter().map(|o| o.max_error).fold(0.0, f64::max);
    text += &format!("{}: worst error {worst:e}\n", if report.pass { "PASS" } else { "FAIL" });
    emit(cli, out, &text, &serde_json::to_value(&report)?)?;
    Ok(report.pass)
}

fn category(cli: &Cli, a: &CategoryArgs, out: &mut dyn Write) -> Result<bool> {
    let mut targets: Vec<(String, FiniteMdp)> = Vec::new();
    for e in &a.envs {
        let id: EnvId = e.parse()?;
        let m = id
            .finite_mdp()?
            .ok_or_else(|| Error::Validation(format!("`{e}` is not a tabular environment")))?;
        targets.push((id.to_string(), m));
    }
    for f in &a.files {
        targets.push((f.display().to_string(), FiniteMdp::load(f)?));
    }
    for i in 0..a.random {
        let seed = cli.seed.wrapping_add(i as u64);
        let states = 1 + (seed % 4) as usize;
        let actions = 1 + (seed / 4 % 2) as usize;
        let id = format!("random:{seed}:{states}:{actions}:2");
        targets.push((id, make_random_mdp(seed, states, actions, 2)?));
    }
    if targets.is_empty() {
        targets.push((
            "chain:5".into(),
            "chain:5".parse::<EnvId>()?.finite_mdp()?.expect("tabular"),
        ));
    }
    let mut pass = true;
    let mut text = String::new();
    let mut results = Vec::new();
    for (name, m) in &targets {
        let report = verify_equivalence_roundtrip(m, a.horizon)?;
        pass &= report.pass;
        text += &format!(
            "{} {name} horizon {}: max discrepancy {:e}\n",
            if report.pass { "PASS" } else { "FAIL" },
            a.horizon,
            report.max_discrepancy.unwrap_or(0.0)
        );
        for v in &report.violations {
            text += &format!("  {}: expected {} got {}\n", v.location, v.expected, v.got);
        }
        results.push(json!({ "env": name, "report": report }));
    }
    emit(cli, out, &text, &json!({ "pass": pass, "results": results }))?;
    Ok(pass)
}

fn tabular(id: &str) -> Result<FiniteMdp> {
    id.parse::<EnvId>()?
        .finite_mdp()?
        .ok_or_else(|| Error::Validation(format!("`{id}` is not a tabular environment")))
}

fn morphism(cli: &Cli, a: &MorphismArgs, out: &mut dyn Write) -> Result<bool> {
    let m = tabular(&a.source)?;
    let m2 = tabular(&a.target)?;
    let phi = Morphism::load(&a.map)?;
    let report: Report = verify_morphism(&m, &m2, &phi)?;
    let mut text = format!(
        "{}: {} violations\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.violations.len()
    );
    for v in &report.violations {
        text += &format!("  {}: expected {} got {}\n", v.location, v.expected, v.got);
    }
    emit(cli, out, &text, &serde_json::to_value(&report)?)?;
    Ok(report.pass)
}

fn deps(cli: &Cli, a: &DepsArgs, out: &mut dyn Write) -> Result<bool> {
    let m = Arc::new(tabular(&a.env)?);
    let spec: FunctorSpec = a.wrapper.parse()?;
    let oracle = as_nmdp_oracle(m.clone(), spec.clone())?;
    let at_t: Vec<_> = reachable_histories(&oracle, a.t)?
        .into_iter()
        .filter(|h| h.t() == a.t)
        .collect();
    let chosen: Vec<_> = if a.all {
        at_t
    } else {
        let h = at_t.into_iter().nth(a.history).ok_or_else(|| {
            Error::Validation(format!("no reachable history with index {} at t = {}", a.history, a.t))
        })?;
        vec![h]
    };
    let analytical = match analytical_dependency(&spec, a.t) {
        Ok(d) => Some(d),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let mut all_match = true;
    let mut text = String::new();
    let mut items = Vec::new();
    for h in &chosen {
        let emp = empirical_dependency(&oracle, h, m.embedding())?;
        let matched = analytical.as_ref().map(|d| d.indices == emp.structure.indices);
        all_match &= matched.unwrap_or(true);
        text += &format!(
            "actions {:?}: empirical {:?} analytical {} {}\n",
            h.actions(),
            emp.structure.indices,
            analytical
                .as_ref()
                .map_or("n/a".to_string(), |d| format!("{:?}", d.indices)),
            match matched {
                Some(true) => "MATCH",
                Some(false) => "MISMATCH",
                None => "",
            }
        );
        items.push(json!({
            "actions": h.actions(),
            "indices": emp.structure.indices,
            "match": matched,
            "skipped": emp.skipped,
        }));
    }
    let first = &items[0];
    let value = json!({
        "env": a.env,
        "wrapper": spec.to_string(),
        "t": a.t,
        "pass": all_match,
        "match": analytical.as_ref().map(|_| all_match),
        "indices": first["indices"],
        "analytical": analytical,
        "histories": items,
    });
    emit(cli, out, &text, &value)?;
    Ok(all_match)
}

fn run(cli: &Cli, a: &RunArgs, out: &mut dyn Write) -> Result<bool> {
    let id: EnvId = a.env.parse()?;
    let spec: FunctorSpec = a.wrapper.parse()?;
    let har: Option<FunctorSpec> = a.har.as_deref().map(str::parse).transpose()?;
    let agent_spec: AgentSpec = a.agent.parse()?;
    let mut env = wrap(id.build(a.horizon)?, &spec, har.as_ref())?;
    let mut agent = build_agent(&agent_spec, &id, &spec, env.num_actions())?;
    if a.episodes > 0 {
        agent.train(env.as_mut(), a.episodes, cli.seed)?;
    }
    let horizon = a.horizon.unwrap_or(id.default_horizon());
    let eval = evaluate(
        agent.as_mut(),
        env.as_mut(),
        a.eval_episodes,
        horizon,
        cli.seed.wrapping_add(1_000_000),
    )?;
    let text = format!(
        "{} on {} wrapped by {}: mean return {} (std {}) over {} episodes\n",
        agent_spec, id, spec, eval.mean, eval.std, a.eval_episodes
    );
    let value = json!({
        "env": id.to_string(),
        "wrapper": spec.to_string(),
        "agent": agent_spec.to_string(),
        "seed": cli.seed,
        "training_episodes": a.episodes,
        "mean_return": eval.mean,
        "std_return": eval.std,
        "returns": eval.returns,
    });
    emit(cli, out, &text, &value)?;
    Ok(true)
}

/// `--workers`, then `$NMF_WORKERS`, then available parallelism.
pub fn worker_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(Error::Validation("workers must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Validation(format!("{WORKERS_ENV}={v} is not a positive integer")));
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn sweep(cli: &Cli, a: &SweepArgs, out: &mut dyn Write) -> Result<bool> {
    let cfg = match &a.config {
        Some(path) => SweepConfig::load(path)?,
        None => paper_grid(),
    };
    let rows = run_sweep(&cfg, worker_count(a.workers)?)?;
    match cli.out.as_ref().or(cfg.output.as_ref()) {
        Some(path) => {
            write_csv(&rows, std::fs::File::create(path)?)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            writeln!(
                out,
                "{} rows ({failed} failed) written to {}",
                rows.len(),
                path.display()
            )?;
            writeln!(out, "note: returns are for the final policy; no checkpoint selection")?;
        }
        None => write_csv(&rows, &mut *out)?,
    }
    Ok(true)
}

fn plot(cli: &Cli, a: &PlotArgs, out: &mut dyn Write) -> Result<bool> {
    let target = cli.out.clone().unwrap_or_else(|| default_plot_path(&a.input));
    render_plot(&a.input, &target)?;
    writeln!(out, "wrote {}", target.display())?;
    Ok(true)
}

fn default_plot_path(input: &Path) -> PathBuf {
    input.with_extension("svg")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = dispatch(std::iter::once("nmf").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["verify-category", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["plot", "--in", "/nonexistent/missing.csv"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--env", "chain:5", "--agent", "ppo"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("analyze-deps"));
    }

    #[test]
    fn analyze_deps_json() {
        let (code, out, _) = call(&[
            "analyze-deps",
            "--env",
            "chain:5",
            "--wrapper",
            "D^1",
            "--t",
            "3",
            "--json",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["indices"], json!([0, 1, 2, 3]));
        assert_eq!(v["match"], json!(true));
        assert_eq!(v["analytical"]["weights"]["0"], json!(1.0));
    }

    #[test]
    fn verify_category_chain() {
        assert_eq!(
            call(&["verify-category", "--env", "chain:5", "--horizon", "4"]).0,
            EXIT_OK
        );
    }

    #[test]
    fn workers_flag_validated() {
        assert!(worker_count(Some(0)).is_err());
        assert_eq!(worker_count(Some(3)).unwrap(), 3);
    }
}
