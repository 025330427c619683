use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nfkam::decimal::{self, Dec};
use nfkam::kam::{Profile, ShiftMode};
use nfkam::models::BUILTIN_NAMES;
use nfkam_cli::config::ModelConfig;
use nfkam_cli::pipeline::{self, Stage};
use nfkam_cli::report::{self, Format};

#[derive(Parser)]
#[command(name = "nfkam", version, about = "Normal forms and KAM steps for resonant invariant tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce the model to the resonant normal-form coordinates.
    Reduce(RunArgs),
    /// Reduce, then test the frequency and the requested conditions.
    Check(RunArgs),
    /// Reduce, then run the KAM steps.
    Kam(RunArgs),
    /// KAM steps, then the degeneracy order and the critical points.
    Degeneracy(RunArgs),
    /// KAM steps, then check the predicted torus by integration.
    Verify(RunArgs),
    /// Every stage.
    Full(RunArgs),
    /// Tables and plot data from an artifact.
    Report {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Print the config of a built-in model.
    EmitConfig {
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the name of a built-in model.
    #[arg(long)]
    config: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ShiftMode>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// Promote the monitored step hypotheses to gates and fail on any gate.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated grid of delta values.
    #[arg(long, value_delimiter = ',', value_parser = parse_dec)]
    delta_grid: Option<Vec<Dec>>,
    #[arg(long)]
    order_cap: Option<u32>,
}

fn parse_mode(s: &str) -> Result<ShiftMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("expected one of none, plain, partial, isoenergetic; got {s:?}"))
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("expected paper or practical; got {s:?}"))
}

fn parse_dec(s: &str) -> Result<Dec, String> {
    decimal::parse(s).map(Dec)
}

/// Usage and configuration problems exit with 2; everything else with 1.
struct Usage(anyhow::Error);

fn load_config(arg: &str) -> Result<ModelConfig> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return ModelConfig::from_json(&text).with_context(|| format!("in {arg}"));
    }
    ModelConfig::for_builtin(arg).ok_or_else(|| {
        anyhow!("{arg}: no such file and not a built-in model (built-ins: {})", BUILTIN_NAMES.join(", "))
    })
}

fn run_stages(name: &str, args: RunArgs, stages: &[Stage]) -> Result<Result<bool>, Usage> {
    let mut cfg = load_config(&args.config).map_err(Usage)?;
    if let Some(n) = args.steps {
        cfg.steps = n;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(p) = args.profile {
        cfg.schedule.profile = p;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(g) = args.delta_grid {
        cfg.degeneracy.delta_grid = Some(g);
    }
    if let Some(c) = args.order_cap {
        cfg.degeneracy.order_cap = c;
    }
    Ok(execute(name, &cfg, &args.out, stages, args.strict))
}

fn execute(name: &str, cfg: &ModelConfig, out: &Path, stages: &[Stage], strict: bool) -> Result<bool> {
    let artifact = pipeline::run(cfg, name, stages, strict)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let file = out.join("artifact.json");
    let text = serde_json::to_string_pretty(&artifact)? + "\n";
    fs::write(&file, text).with_context(|| format!("writing {}", file.display()))?;
    for g in &artifact.gates {
        eprintln!("{:<28} {}", g.name, if g.pass { "pass" } else { "FAIL" });
    }
    let s = &artifact.stages;
    let errors = [
        s.kam.as_ref().and_then(|k| k.error.as_deref()).map(|e| ("kam", e)),
        s.check.as_ref().and_then(|c| c.conditions_error.as_deref()).map(|e| ("check", e)),
        s.degeneracy.as_ref().and_then(|d| d.error.as_deref()).map(|e| ("degeneracy", e)),
        s.verify.as_ref().and_then(|v| v.error.as_deref()).map(|e| ("verify", e)),
    ];
    for (stage, e) in errors.iter().flatten() {
        eprintln!("{stage}: {e}");
    }
    eprintln!("wrote {}", file.display());
    Ok(!artifact.failed() && (!strict || artifact.gates_pass()))
}

fn run_report(artifact: &Path, out: &Path, format: Format) -> Result<Result<bool>, Usage> {
    let text =
        fs::read_to_string(artifact).with_context(|| format!("reading {}", artifact.display())).map_err(Usage)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", artifact.display())).map_err(Usage)?;
    if !value.is_object() {
        return Err(Usage(anyhow!("{}: an artifact is a JSON object", artifact.display())));
    }
    Ok((|| {
        fs::create_dir_all(out)?;
        for t in report::tables(&value) {
            let path = out.join(format!("{}.{}", t.name, format.extension()));
            fs::write(&path, t.render(format)).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} ({} rows)", path.display(), t.rows.len());
        }
        Ok(true)
    })())
}

fn emit_config(name: &str, out: Option<&Path>) -> Result<Result<bool>, Usage> {
    let cfg = ModelConfig::for_builtin(name)
        .ok_or_else(|| Usage(anyhow!("unknown built-in {name:?} (built-ins: {})", BUILTIN_NAMES.join(", "))))?;
    let text = cfg.to_json();
    Ok(match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map(|_| true),
        None => {
            print!("{text}");
            Ok(true)
        }
    })
}

fn threads() -> Result<()> {
    let Ok(v) = std::env::var("NFKAM_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| anyhow!("NFKAM_THREADS: not a thread count: {v:?}"))?;
    if n == 0 {
        bail!("NFKAM_THREADS: must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let all = [Stage::Reduce, Stage::Check, Stage::Kam, Stage::Degeneracy, Stage::Verify];
    let outcome = match cli.command {
        Command::Reduce(a) => run_stages("reduce", a, &[Stage::Reduce]),
        Command::Check(a) => run_stages("check", a, &[Stage::Reduce, Stage::Check]),
        Command::Kam(a) => run_stages("kam", a, &[Stage::Reduce, Stage::Kam]),
        Command::Degeneracy(a) => run_stages("degeneracy", a, &[Stage::Reduce, Stage::Kam, Stage::Degeneracy]),
        Command::Verify(a) => run_stages("verify", a, &[Stage::Reduce, Stage::Kam, Stage::Verify]),
        Command::Full(a) => run_stages("full", a, &all),
        Command::Report { artifact, out, format } => run_report(&artifact, &out, format),
        Command::EmitConfig { builtin, out } => emit_config(&builtin, out.as_deref()),
    };
    match outcome {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(1),
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
