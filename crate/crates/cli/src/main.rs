use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ribsim_core::checks;
use ribsim_core::cli_io::{
    bench_perf, compare_runs, format_perf, load_config, model_with, parse_direction, preset, read_trace, run_homotopy, run_sweep,
    write_trace, ParsedConfig, ReferenceData, RunManifest, SweepKind,
};
use ribsim_core::energy::ModelId;
use ribsim_core::scenarios::{detect_transitions, Trace};
use ribsim_core::{Result, RibError};

#[derive(Parser)]
#[command(name = "ribsim", version, about = "Discrete elastic ribbon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compression followed by the lateral shear sweep.
    Run(RunArgs),
    /// Compression followed by a shear, twist or combined sweep.
    Sweep {
        #[arg(long, default_value = "shear")]
        kind: SweepKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Shear at one width, widen on the loaded branch, shear back.
    Homotopy {
        /// Final W/L (defaults to the config's target_W_over_L).
        #[arg(long)]
        target: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Shift of the critical shears of trace B relative to baseline A.
    Compare {
        baseline: PathBuf,
        other: PathBuf,
        /// Reference data file (defaults to the shipped table).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// W/L of B, to look up reference critical shears.
        #[arg(long)]
        width_ratio: Option<f64>,
    },
    /// Efficiency report of the shear phase.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Models to time (repeatable).
        #[arg(long = "model")]
        models: Vec<ModelId>,
        /// Mesh sizes to time (repeatable).
        #[arg(long = "mesh")]
        meshes: Vec<usize>,
    },
    /// Derivative, invariance and assembly self-checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (narrow, medium, wide, ...).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    width_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_dir)]
    direction: Option<ribsim_core::scenarios::SweepDirection>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<ModelId>,
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_dir(s: &str) -> std::result::Result<ribsim_core::scenarios::SweepDirection, String> {
    parse_direction(s).ok_or_else(|| format!("expected pos or neg, got {s:?}"))
}

impl CommonArgs {
    fn load(&self, model: Option<ModelId>, mesh: Option<usize>) -> Result<ParsedConfig> {
        let mut parsed = match (&self.config, &self.preset) {
            (Some(p), _) => load_config(p)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => ribsim_core::cli_io::parse_config("")?,
        };
        let c = &mut parsed.config;
        if let Some(id) = model {
            c.model = model_with(c, id);
        }
        if let Some(r) = self.width_ratio {
            c.width = r * c.length;
        }
        if let Some(n) = mesh {
            c.nodes = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = self.direction {
            c.direction = d;
        }
        c.validate().map_err(|e| RibError::Schema { path: "<flags>".into(), message: e.to_string() })?;
        parsed.warnings = c.warnings();
        for w in &parsed.warnings {
            eprintln!("warning: {w}");
        }
        Ok(parsed)
    }
}

fn stem(manifest: &RunManifest, tag: &str) -> String {
    format!("{}_w{:.4}_n{}_{tag}", manifest.model, manifest.width_ratio, manifest.nodes)
}

fn emit(trace: &Trace, manifest: &RunManifest, path: &Path) -> Result<()> {
    let mut m = manifest.clone();
    m.trace_file = path.file_name().map(|s| s.to_string_lossy().into_owned());
    write_trace(trace, &m, path)?;
    let t = detect_transitions(&trace.controls(), &trace.forces());
    let show = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.4}"));
    println!("{}: {} records, U→US {}, US→S {}", path.display(), trace.len(), show(t.first), show(t.second));
    Ok(())
}

fn sweep(kind: SweepKind, args: &RunArgs) -> Result<()> {
    let parsed = args.common.load(args.model, args.mesh)?;
    let outcome = run_sweep(&parsed.config, kind)?;
    let tag = match kind {
        SweepKind::Shear => "shear",
        SweepKind::Twist => "twist",
        SweepKind::ShearTwist => "shear-twist",
    };
    let path = args.out.join(format!("{}.csv", stem(&outcome.manifest, tag)));
    if !outcome.trace.is_empty() {
        emit(&outcome.trace, &outcome.manifest, &path)?;
    }
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn homotopy(target: Option<f64>, args: &RunArgs) -> Result<()> {
    let parsed = args.common.load(args.model, args.mesh)?;
    let target = target
        .or(parsed.target_width_ratio)
        .ok_or_else(|| RibError::Schema { path: "target_W_over_L".into(), message: "homotopy needs --target or target_W_over_L".into() })?;
    let (traces, manifest) = run_homotopy(&parsed.config, target)?;
    for (tag, t) in [("homotopy1", &traces.stage1), ("homotopy2", &traces.stage2), ("homotopy3", &traces.stage3)] {
        emit(t, &manifest, &args.out.join(format!("{}.csv", stem(&manifest, tag))))?;
    }
    Ok(())
}

fn compare(a: &Path, b: &Path, reference: Option<&Path>, width_ratio: Option<f64>) -> Result<()> {
    let (ta, tb) = (read_trace(a)?, read_trace(b)?);
    let data = match reference {
        Some(p) => ReferenceData::load(p)?,
        None => ReferenceData::shipped(),
    };
    let point = width_ratio.and_then(|w| data.fea_at(w));
    let report = compare_runs(&ta, &tb, point.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    Ok(())
}

fn bench(common: &CommonArgs, models: &[ModelId], meshes: &[usize]) -> Result<()> {
    let models = if models.is_empty() { vec![ModelId::Kirchhoff, ModelId::Sano] } else { models.to_vec() };
    let meshes = if meshes.is_empty() { vec![45, 63] } else { meshes.to_vec() };
    let mut configs = Vec::new();
    for &n in &meshes {
        for &m in &models {
            configs.push(common.load(Some(m), Some(n))?.config);
        }
    }
    let rows = bench_perf(&configs)?;
    print!("{}", format_perf(&rows));
    let per_iter = |m: ModelId, n: usize| rows.iter().find(|r| r.model == m && r.nodes == n).map(|r| r.median_seconds_per_iteration);
    if meshes.len() >= 2 {
        let (lo, hi) = (meshes[0], meshes[meshes.len() - 1]);
        for &m in &models {
            if let (Some(a), Some(b)) = (per_iter(m, lo), per_iter(m, hi)) {
                println!("{m}: per-iteration time ratio N={hi}/N={lo}: {:.3}", b / a);
            }
        }
    }
    if models.len() >= 2 {
        for &n in &meshes {
            if let (Some(a), Some(b)) = (per_iter(models[0], n), per_iter(models[1], n)) {
                println!("N={n}: {} per-iteration overhead vs {}: {:+.1}%", models[1], models[0], (b / a - 1.0) * 100.0);
            }
        }
    }
    Ok(())
}

fn validate(seed: u64, samples: usize) -> Result<()> {
    let results = checks::run_all(seed, samples)?;
    let mut failed = 0;
    for r in &results {
        println!("{} {} (worst {:.2e}, tol {:.0e})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.worst, r.tolerance);
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(RibError::Validation(format!("{failed} of {} checks failed", results.len())));
    }
    Ok(())
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("RIBSIM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let res = match &cli.command {
        Command::Run(args) => sweep(SweepKind::Shear, args),
        Command::Sweep { kind, run } => sweep(*kind, run),
        Command::Homotopy { target, run } => homotopy(*target, run),
        Command::Compare { baseline, other, reference, width_ratio } => compare(baseline, other, reference.as_deref(), *width_ratio),
        Command::Bench { common, models, meshes } => bench(common, models, meshes),
        Command::Validate { seed, samples } => validate(*seed, *samples),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
