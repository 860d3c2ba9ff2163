//! Command-line entry point: mesh preparation, data generation, training,
//! evaluation and gradient checking, all driven by one TOML run config.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoinverse::config::RunConfig;
use geoinverse::data::{generate_dataset, load_samples, DatasetManifest, Generator, Split};
use geoinverse::diff::io::{load_tensor, save_tensor};
use geoinverse::eval::{cc_metric, cross_geometry_eval, evaluate, mse_metric, rotation_sweep, MetricReport};
use geoinverse::mesh::{load_mesh, shapes, write_mesh, MeshHierarchy, TriMesh};
use geoinverse::network::{gradient_suite, GeometrySet, SUITE_TOLERANCE};
use geoinverse::train::train;
use geoinverse::{Checkpoint, Geometry, Model};

#[derive(Debug, Parser)]
#[command(name = "geoinverse", version, about = "Inverse reconstruction of surface signals with spline graph networks")]
struct Cli {
    /// run configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory; overrides the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// master seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker thread cap
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated closed mesh: icosahedron, octahedron, tetrahedron,
    /// geodesic:<frequency> or uv:<rings>x<segments>
    Mesh {
        shape: String,
        output: PathBuf,
        #[arg(long, value_parser = parse_triple, default_value = "1,1,1")]
        scale: [f64; 3],
        #[arg(long, value_parser = parse_triple, default_value = "0,0,0")]
        translate: [f64; 3],
        /// radial jitter amplitude
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
    },
    /// Build a coarsening hierarchy and print per-level counts
    Coarsen { mesh: PathBuf, targets: Vec<usize> },
    /// Simulate the dataset into <out>/data
    GenData,
    /// Train into <out>/train
    Train {
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split into <out>/eval
    Eval { checkpoint: PathBuf },
    /// Rotation sweep with fresh samples into <out>/sweep
    Sweep { checkpoint: PathBuf },
    /// Run a checkpoint on the second mesh pair into <out>/cross
    CrossEval { checkpoint: PathBuf },
    /// Reconstruct heart signals from one torso tensor file
    Reconstruct {
        checkpoint: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// ground-truth heart tensor; prints MSE and CC
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Finite-difference check of every differentiable operation
    Gradcheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mesh { .. } => "mesh",
            Command::Coarsen { .. } => "coarsen",
            Command::GenData => "gen-data",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::CrossEval { .. } => "cross-eval",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] geoinverse::Error),
}

impl CliError {
    fn kind(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("usage", 1),
            CliError::Validation(_) => ("validation", 2),
            CliError::Core(e) if e.is_validation() => ("validation", 2),
            CliError::Runtime(_) | CliError::Core(_) => ("runtime", 3),
        }
    }
}

fn core<E: Into<geoinverse::Error>>(e: E) -> CliError {
    CliError::Core(e.into())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("expected three comma-separated numbers, got '{s}'"))
}

fn shape_mesh(spec: &str) -> Result<TriMesh, CliError> {
    let bad = || CliError::Usage(format!("unknown mesh shape '{spec}'"));
    Ok(match spec.split_once(':') {
        None => match spec {
            "icosahedron" => shapes::icosahedron(),
            "octahedron" => shapes::octahedron(),
            "tetrahedron" => shapes::tetrahedron(),
            _ => return Err(bad()),
        },
        Some(("geodesic", f)) => {
            let f: usize = f.parse().map_err(|_| bad())?;
            if f == 0 {
                return Err(bad());
            }
            shapes::geodesic_sphere(f)
        }
        Some(("uv", rs)) => {
            let (r, s) = rs.split_once('x').ok_or_else(bad)?;
            let (r, s): (usize, usize) = (r.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?);
            if r < 2 || s < 3 {
                return Err(bad());
            }
            shapes::uv_sphere(r, s)
        }
        _ => return Err(bad()),
    })
}

/// Resolved configuration plus the effective output directory and seed.
struct Run {
    config: RunConfig,
    out: PathBuf,
}

impl Run {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))?;
        let mut config = RunConfig::load(path).map_err(core)?;
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let out = match (&cli.out, &config.out_dir) {
            (Some(o), _) => std::path::absolute(o).unwrap_or_else(|_| o.clone()),
            (None, Some(o)) => o.clone(),
            (None, None) => return Err(CliError::Usage("no output directory: pass --out or set out_dir".into())),
        };
        config.out_dir = Some(out.clone());
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        let echo = out.join("config.toml");
        fs::write(&echo, config.to_toml()).map_err(io_err(&echo))?;
        Ok(Self { config, out })
    }

    fn meshes(&self) -> Result<(TriMesh, TriMesh), CliError> {
        let g = &self.config.geometry;
        Ok((load_mesh(&g.heart).map_err(core)?, load_mesh(&g.torso).map_err(core)?))
    }

    fn geometry(&self) -> Result<Geometry, CliError> {
        let g = &self.config.geometry;
        let (heart, torso) = self.meshes()?;
        Geometry::build(&heart, &g.heart_targets, &torso, &g.torso_targets, &self.config.model).map_err(core)
    }

    fn dataset(&self) -> PathBuf {
        self.config.dataset_dir(&self.out)
    }

    fn subdir(&self, name: &str) -> Result<PathBuf, CliError> {
        let d = self.out.join(name);
        fs::create_dir_all(&d).map_err(io_err(&d))?;
        Ok(d)
    }

    fn generator(&self, heart: TriMesh, torso: TriMesh) -> Result<Generator, CliError> {
        Generator::new(heart, torso, &self.config.data, self.config.physics, self.config.seed).map_err(core)
    }
}

fn load_checkpoint(path: &Path, geometry: &Geometry) -> Result<(Checkpoint, Model), CliError> {
    let ckpt = Checkpoint::load(path).map_err(core)?;
    ckpt.check_geometry(geometry.hash()).map_err(core)?;
    let model = ckpt.model().map_err(core)?;
    Ok((ckpt, model))
}

fn write_report(dir: &Path, report: &MetricReport) -> Result<(), CliError> {
    for (name, text) in [
        ("samples.csv", report.samples_csv()),
        ("summary.csv", report.summary_csv()),
        ("report.json", report.to_json()),
    ] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(io_err(&p))?;
    }
    for g in &report.groups {
        println!(
            "{:>10} n={:<4} mse={:.4e}+-{:.1e} cc={:.4}+-{:.4}{}",
            g.key,
            g.count,
            g.mse_mean,
            g.mse_std,
            g.cc_mean,
            g.cc_std,
            g.dice_mean.map_or(String::new(), |d| format!(" dice={d:.3}"))
        );
    }
    if !report.is_finite() {
        return Err(CliError::Runtime("report contains non-finite metrics".into()));
    }
    Ok(())
}

fn dataset_geometry(run: &Run, dir: &Path) -> Result<(DatasetManifest, Geometry), CliError> {
    let manifest = DatasetManifest::load(dir).map_err(core)?;
    let (heart, torso) = run.meshes()?;
    if manifest.heart(dir).map_err(core)? != heart || manifest.torso(dir).map_err(core)? != torso {
        return Err(CliError::Validation(format!(
            "dataset {} was generated on different meshes than the configured geometry",
            dir.display()
        )));
    }
    let g = &run.config.geometry;
    let geo = Geometry::build(&heart, &g.heart_targets, &torso, &g.torso_targets, &run.config.model).map_err(core)?;
    Ok((manifest, geo))
}

fn geometry_set(geo: Geometry, samples: &[geoinverse::Sample], run: &Run) -> Result<GeometrySet<f64>, CliError> {
    let mut set = GeometrySet::new(geo);
    for s in samples {
        set.prepare(s.meta.axis, s.meta.degrees, &run.config.model).map_err(core)?;
    }
    Ok(set)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Mesh {
            shape,
            output,
            scale,
            translate,
            jitter,
        } => {
            let mut mesh = shape_mesh(shape)?;
            if *jitter != 0.0 {
                mesh = mesh.jittered(*jitter, cli.seed.unwrap_or(0));
            }
            let mesh = mesh.scaled(*scale).translated(*translate);
            write_mesh(output, &mesh).map_err(core)?;
            println!(
                "{}: V={} E={} F={} chi={}",
                output.display(),
                mesh.num_vertices(),
                mesh.num_edges(),
                mesh.num_triangles(),
                mesh.euler_characteristic()
            );
        }
        Command::Coarsen { mesh, targets } => {
            let m = load_mesh(mesh).map_err(core)?;
            let h = MeshHierarchy::build(&m, targets).map_err(core)?;
            for (k, level) in h.levels.iter().enumerate() {
                let l = &level.mesh;
                println!(
                    "level {k}: V={} E={} F={} chi={}",
                    l.num_vertices(),
                    l.num_edges(),
                    l.num_triangles(),
                    l.euler_characteristic()
                );
            }
            if let Some(out) = &cli.out {
                h.save(out).map_err(core)?;
            }
        }
        Command::GenData => {
            let run = Run::load(cli)?;
            let (heart, torso) = run.meshes()?;
            let dir = run.dataset();
            let c = &run.config;
            let m = generate_dataset(&c.data, &heart, &torso, &c.physics, c.seed, &dir).map_err(core)?;
            println!(
                "{} samples ({} train, {} test, {} failed) in {}",
                m.samples.len(),
                m.split(Some(Split::Train)).count(),
                m.split(Some(Split::Test)).count(),
                m.failures.len(),
                dir.display()
            );
        }
        Command::Train { resume } => {
            let run = Run::load(cli)?;
            let dir = run.dataset();
            let (_, geo) = dataset_geometry(&run, &dir)?;
            let samples = load_samples::<f64>(&dir, Some(Split::Train)).map_err(core)?;
            let set = geometry_set(geo, &samples, &run)?;
            let c = &run.config;
            let start = match resume {
                Some(p) => {
                    let ckpt = Checkpoint::load(p).map_err(core)?;
                    if ckpt.config != c.model {
                        return Err(CliError::Validation("checkpoint model configuration differs from the config".into()));
                    }
                    ckpt
                }
                None => {
                    let model = Model::new(c.model.clone(), c.seed).map_err(core)?;
                    Checkpoint::initial(&model, set.base().hash(), c.seed, c.train.adam)
                }
            };
            let out = run.subdir("train")?;
            let outcome = train(start, &set, &samples, &c.train, Some(&out)).map_err(core)?;
            let last = outcome.last.history.last().map_or(f64::NAN, |h| h.loss);
            let best = outcome.best.history.last().map_or(f64::NAN, |h| h.loss);
            println!(
                "trained to epoch {} on {} samples: last loss {last:.6e}, best {best:.6e} (epoch {})",
                outcome.last.epoch,
                samples.len(),
                outcome.best.epoch
            );
        }
        Command::Eval { checkpoint } => {
            let run = Run::load(cli)?;
            let dir = run.dataset();
            let (manifest, geo) = dataset_geometry(&run, &dir)?;
            let (_, model) = load_checkpoint(checkpoint, &geo)?;
            let samples = load_samples::<f64>(&dir, Some(Split::Test)).map_err(core)?;
            let set = geometry_set(geo, &samples, &run)?;
            let scars: Vec<BTreeSet<usize>> = manifest.scars.iter().map(|s| s.iter().copied().collect()).collect();
            let report =
                evaluate(&model, &set, &samples, Some(&scars), run.config.eval.duration_threshold).map_err(core)?;
            write_report(&run.subdir("eval")?, &report)?;
        }
        Command::Sweep { checkpoint } => {
            let run = Run::load(cli)?;
            let geo = run.geometry()?;
            let (_, model) = load_checkpoint(checkpoint, &geo)?;
            let (heart, torso) = run.meshes()?;
            let generator = run.generator(heart, torso)?;
            let e = &run.config.eval;
            let report = rotation_sweep(&model, &geo, &generator, e.sweep_axis, &e.sweep_degrees, e.duration_threshold)
                .map_err(core)?;
            write_report(&run.subdir("sweep")?, &report)?;
        }
        Command::CrossEval { checkpoint } => {
            let run = Run::load(cli)?;
            let (_, model) = load_checkpoint(checkpoint, &run.geometry()?)?;
            let cross = run
                .config
                .cross_geometry
                .clone()
                .ok_or_else(|| CliError::Validation("config has no [cross_geometry] section".into()))?;
            let heart = load_mesh(&cross.heart).map_err(core)?;
            let torso = load_mesh(&cross.torso).map_err(core)?;
            let geo = Geometry::build(&heart, &cross.heart_targets, &torso, &cross.torso_targets, &run.config.model)
                .map_err(core)?;
            let generator = run.generator(heart, torso)?;
            let report =
                cross_geometry_eval(&model, &geo, &generator, run.config.eval.duration_threshold).map_err(core)?;
            write_report(&run.subdir("cross")?, &report)?;
        }
        Command::Reconstruct {
            checkpoint,
            input,
            output,
            truth,
        } => {
            let run = Run::load(cli)?;
            let geo = run.geometry()?;
            let (_, model) = load_checkpoint(checkpoint, &geo)?;
            let y = load_tensor::<f64>(input).map_err(io_err(input))?;
            let x_hat = model.predict(&geo, &y).map_err(core)?;
            save_tensor(output, &x_hat).map_err(io_err(output))?;
            if let Some(t) = truth {
                let x = load_tensor::<f64>(t).map_err(io_err(t))?;
                let mse = mse_metric(&x_hat, &x).map_err(core)?;
                let cc = cc_metric(&x_hat, &x).map_err(core)?;
                println!("mse={mse:.6e} cc={cc:.6}");
            }
        }
        Command::Gradcheck => {
            let entries = gradient_suite().map_err(core)?;
            println!("{:<26} {:>10} {:>14}  result", "operation", "elements", "max rel err");
            for e in &entries {
                println!(
                    "{:<26} {:>10} {:>14.3e}  {}",
                    e.name,
                    e.elements,
                    e.max_rel_error,
                    if e.passed() { "pass" } else { "FAIL" }
                );
            }
            let failed = entries.iter().filter(|e| !e.passed()).count();
            if failed > 0 {
                return Err(CliError::Runtime(format!(
                    "{failed} operation(s) exceed relative error {SUITE_TOLERANCE:e}"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error[usage]: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[runtime]: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.kind();
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{kind}]: {}: {msg}", cli.command.name());
            ExitCode::from(code)
        }
    }
}
