use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use shelab::config::{parse_override, RunConfig, StudyKind};
use shelab::experiments::{
    self, affine_density_study, asymptotics_study, density_error_study, kernel_checks, small_drift_study,
    weak_error_study, StudyMetric, StudyReport,
};
use shelab::report::{output_base, Provenance, RunDir};
use shelab::scheme::{affine_exact_law, affine_perturbed_law, Drift, PathSimulator};
use shelab::{selftest, spectral, Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

const INVARIANT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "shelab", version, about = "Stochastic heat equation simulation and verification lab")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write terminal snapshots.
    ///
    /// Any config leaf can be overridden as --section.key=value.
    Simulate(RunArgs),
    /// Run the study named in the config and write its reports.
    Study(RunArgs),
    /// Run the fast invariant suite.
    Selftest {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Print version and generator identification.
    Version,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    config: PathBuf,
    /// Base output directory (default: $SHELAB_OUTPUT_DIR or ./shelab-runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow step sizes above the stability bound.
    #[arg(long)]
    no_strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    Isometry,
}

type Overrides = Vec<(String, String)>;

/// Splits `--section.key=value` overrides from the arguments clap understands.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--") {
            Some(body) if body.split('=').next().is_some_and(|k| k.contains('.')) => {
                overrides.push(parse_override(body)?);
            }
            _ => rest.push(a),
        }
    }
    Ok((rest, overrides))
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = Cli::parse_from(args);
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Simulate(a) => load(&a, &overrides).and_then(|c| simulate(&c, &a)),
        Command::Study(a) => load(&a, &overrides).and_then(|c| study(&c, &a)),
        Command::Selftest { inject_fault } => run_selftest(inject_fault),
        Command::Version => {
            println!("shelab {}", env!("CARGO_PKG_VERSION"));
            println!("schema {}", shelab::SCHEMA_VERSION);
            println!("generator {}", shelab::noise::GENERATOR_ID);
            Ok(0)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(args: &RunArgs, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut overrides = overrides.to_vec();
    if args.no_strict {
        overrides.push(("scheme.strict".into(), "false".into()));
    }
    RunConfig::load(&args.config, &overrides)
}

fn open_run(cfg: &RunConfig, out: Option<&Path>) -> Result<(RunDir, Provenance)> {
    let hash = cfg.hash();
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let dir = RunDir::create(&output_base(out), &hash, secs)?;
    Ok((dir, Provenance::new(hash, cfg.seed)))
}

fn finish(mut dir: RunDir, prov: &Provenance, cfg: &RunConfig, command: &str) -> Result<()> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "strict": cfg.scheme.strict,
        "config": cfg,
        "files": dir.files(),
    });
    dir.write_json("manifest.json", prov, &manifest)?;
    println!("{}", dir.path().display());
    Ok(())
}

fn simulate(cfg: &RunConfig, args: &RunArgs) -> Result<u8> {
    let model = cfg.model()?;
    let sim = PathSimulator::new(&model, &cfg.scheme)?;
    let (mut dir, prov) = open_run(cfg, args.out.as_deref())?;
    let paths = cfg.output.paths as u64;
    let grid = cfg.scheme.grid;
    let points = spectral::grid_points(grid);

    let mut terminal = Vec::new();
    let mut reference = Vec::new();
    for p in 0..paths {
        terminal.push(spectral::synthesize(&sim.perturbed(cfg.seed, p)?, grid)?);
        if cfg.output.reference {
            reference.push(spectral::synthesize(&sim.reference(cfg.seed, p)?, grid)?);
        }
    }
    let snapshot = |name: &str, rows: &[shelab::GridFunction], dir: &mut RunDir| {
        dir.write_csv(name, &prov, |w| {
            writeln!(w, "path,x_j,value")?;
            for (p, g) in rows.iter().enumerate() {
                for (x, v) in points.iter().zip(g.values()) {
                    writeln!(w, "{p},{x},{v:e}")?;
                }
            }
            Ok(())
        })
    };
    snapshot("snapshot.csv", &terminal, &mut dir)?;
    if cfg.output.reference {
        snapshot("reference.csv", &reference, &mut dir)?;
    }
    if cfg.output.noise_dump {
        for p in 0..paths {
            let tensor = sim.fine_noise(cfg.seed, p);
            dir.write_with(&format!("noise-{p}.bin"), |w| Ok(tensor.write_dump(w)?))?;
        }
    }
    if let Drift::Affine { .. } = model.drift {
        let mut records = Vec::new();
        for &x in &cfg.output.probes {
            let exact = affine_exact_law(
                &model,
                cfg.scheme.horizon,
                x,
                cfg.scheme.max_mode,
                shelab::scheme::ModeTail::Truncated,
            )?;
            let perturbed = affine_perturbed_law(&model, &cfg.scheme, x, shelab::scheme::ModeTail::Truncated)?;
            for (kind, law) in [("exact", exact), ("perturbed", perturbed)] {
                records.push(json!({
                    "x": x,
                    "law": kind,
                    "mean": law.mean,
                    "variance": law.variance,
                    "config_hash": prov.config_hash,
                    "seed": prov.seed,
                }));
            }
        }
        dir.write_json("laws.json", &prov, &json!({ "records": records }))?;
    }
    finish(dir, &prov, cfg, "simulate")?;
    Ok(0)
}

fn with_config(cfg: &RunConfig, body: Value) -> Value {
    let mut v = json!({ "config": cfg });
    if let (Some(out), Value::Object(b)) = (v.as_object_mut(), body) {
        out.extend(b);
    }
    v
}

fn write_study(dir: &mut RunDir, prov: &Provenance, cfg: &RunConfig, reports: &[StudyReport]) -> Result<()> {
    let body = if let [single] = reports { serde_json::to_value(single)? } else { json!({ "reports": reports }) };
    dir.write_json("report.json", prov, &with_config(cfg, body))?;
    dir.write_csv("long.csv", prov, |w| {
        for (i, r) in reports.iter().enumerate() {
            r.write_long_csv(&mut *w, i == 0)?;
        }
        Ok(())
    })?;
    dir.write_csv("levels.csv", prov, |w| {
        writeln!(w, "study,metric,level,steps,delta,epsilon,error,stderr")?;
        for r in reports {
            for l in &r.levels {
                let eps = l.epsilon.map(|e| e.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{eps},{},{}",
                    r.study,
                    r.metric.as_str(),
                    l.level,
                    l.steps,
                    l.delta,
                    l.error,
                    l.stderr
                )?;
            }
        }
        Ok(())
    })?;
    for r in reports {
        let slope = r.fit.slope.map(|s| format!("{s:.4}")).unwrap_or_else(|| "n/a".into());
        println!("{} {}: status {:?}, slope {slope}", r.study, r.metric.as_str(), r.fit.status);
    }
    Ok(())
}

type StudyJob<'a> = Box<dyn FnOnce(&mut RunDir, &Provenance) -> Result<()> + 'a>;

fn study(cfg: &RunConfig, args: &RunArgs) -> Result<u8> {
    let mut code = 0;
    // Validate before creating a run directory.
    let work: StudyJob<'_> = match cfg.study.kind {
        StudyKind::Weak => {
            let mut s = cfg.ladder_study()?;
            s.metric = StudyMetric::WeakError;
            s.validate()?;
            Box::new(move |d, p| write_study(d, p, cfg, &[weak_error_study(&s)?]))
        }
        StudyKind::Density => {
            let s = cfg.ladder_study()?;
            s.validate()?;
            if !matches!(s.metric, StudyMetric::SupDensity | StudyMetric::Tv) {
                return Err(Error::Config("density study needs study.metric sup_density or tv".into()));
            }
            Box::new(move |d, p| write_study(d, p, cfg, &[density_error_study(&s)?]))
        }
        StudyKind::Affine => {
            let s = cfg.affine_study()?;
            s.laws()?;
            Box::new(move |d, p| {
                let reports =
                    [affine_density_study(&s, StudyMetric::SupDensity)?, affine_density_study(&s, StudyMetric::Tv)?];
                write_study(d, p, cfg, &reports)
            })
        }
        StudyKind::SmallDrift => {
            let s = cfg.small_drift_study()?;
            for &e in &s.epsilons {
                s.config().validate(&s.model(e)?)?;
            }
            Box::new(move |d, p| write_study(d, p, cfg, &[small_drift_study(&s)?]))
        }
        StudyKind::Asymptotics => {
            let s = cfg.asymptotics_study()?;
            experiments::asymptotic_factor(s.model.bc, s.x, s.model.sigma)?;
            Box::new(move |d, p| {
                let r = asymptotics_study(&s)?;
                d.write_json("report.json", p, &with_config(cfg, serde_json::to_value(&r)?))?;
                d.write_csv("asymptotics.csv", p, |w| {
                    writeln!(w, "delta,z,value,limit")?;
                    for row in &r.rows {
                        writeln!(w, "{},{},{},{}", row.delta, row.z, row.value, row.limit)?;
                    }
                    Ok(())
                })?;
                let measured = r.measured_factor.map(|f| format!("{f:.4}")).unwrap_or_else(|| "n/a".into());
                println!("asymptotics: limit factor {:.6}, measured {measured}", r.limit_factor);
                Ok(())
            })
        }
        StudyKind::KernelChecks => {
            let checks = kernel_checks(cfg.study.kernel_points)?;
            if checks.iter().any(|c| !c.pass) {
                code = INVARIANT_FAILURE;
            }
            Box::new(move |d, p| {
                d.write_json("report.json", p, &with_config(cfg, json!({ "checks": checks })))?;
                print!("{}", selftest::render("kernel_checks", &checks));
                Ok(())
            })
        }
    };
    let (mut dir, prov) = open_run(cfg, args.out.as_deref())?;
    work(&mut dir, &prov)?;
    finish(dir, &prov, cfg, "study")?;
    Ok(code)
}

fn run_selftest(fault: Option<Fault>) -> Result<u8> {
    let faults = selftest::Faults { isometry: matches!(fault, Some(Fault::Isometry)) };
    let checks = selftest::run(faults)?;
    print!("{}", selftest::render("selftest", &checks));
    Ok(if checks.iter().all(|c| c.pass) { 0 } else { INVARIANT_FAILURE })
}
