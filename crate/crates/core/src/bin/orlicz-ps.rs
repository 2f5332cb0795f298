use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use orlicz_ps::affine_ball::{affine_ball_detailed, energy_of, make_quadrature};
use orlicz_ps::harness::config::ExperimentConfig;
use orlicz_ps::harness::{emit_report, Harness, ReportFormat, Suite};
use orlicz_ps::orlicz::OrliczSpec;
use orlicz_ps::rearrangement::{approximate_sdr, sdr, steiner, trace_csv, DirectionSchedule};
use orlicz_ps::scalar_field::{read_field, write_field, FieldSidecar, Grid};
use orlicz_ps::{Error, Result};

macro_rules! outln {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

macro_rules! out {
    ($($arg:tt)*) => {
        write!(std::io::stdout(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "orlicz-ps", version, about = "Orlicz affine energies, symmetrizations and inequality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an inequality suite (or `all`); exits nonzero on any failure.
    Verify {
        suite: String,
        /// Experiment config (json); built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report formats to write under --out.
        #[arg(long, value_delimiter = ',', default_value = "json,csv,svg-bundle")]
        format: Vec<String>,
    },
    /// Corpus utilities.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Field file utilities.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
    /// Print the default experiment config.
    DefaultConfig,
    /// Steiner symmetrization of a field about the hyperplane orthogonal to --direction.
    Steiner {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Symmetric decreasing rearrangement of a field.
    Sdr {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterated Steiner symmetrizations with an L¹ trace against sdr(f).
    ApproxSdr {
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "axes-cyclic")]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the final field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the trace csv; stdout when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Affine energy of a field; optionally exports the affine ball as csv.
    Energy {
        input: PathBuf,
        /// φ as json, e.g. '{"family":"power","p":2.0}'.
        #[arg(long, default_value = r#"{"family":"power","p":2.0}"#)]
        phi: String,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        body_csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Sample every corpus field and body described by a config file.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FieldAction {
    /// Summary statistics of a field file.
    Info { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    AxesCyclic,
    RandomUniform,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Error::Io(e)) if e.kind() == ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Verify { suite, config, seed, out, format } => verify(&suite, config.as_deref(), seed, out, &format),
        Command::Corpus { action: CorpusAction::Generate { spec, out } } => {
            generate_corpus(&spec, &out)?;
            Ok(true)
        }
        Command::Field { action: FieldAction::Info { file } } => {
            let f = read_field(&file)?;
            let info = FieldSidecar::describe(&f, None);
            let mut value = serde_json::to_value(info)?;
            value["diameter"] = f.diameter().into();
            value["support_cells"] = f.support_count().into();
            outln!("{}", serde_json::to_string_pretty(&value)?);
            Ok(true)
        }
        Command::DefaultConfig => {
            outln!("{}", ExperimentConfig::default().to_json()?);
            Ok(true)
        }
        Command::Steiner { input, direction, out } => {
            let f = read_field(&input)?;
            let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidParameter("direction must be nonzero".into()));
            }
            let u: Vec<f64> = direction.iter().map(|x| x / norm).collect();
            write_field(&out, &steiner(&f, &u)?, Some(format!("steiner of {}", input.display())))?;
            Ok(true)
        }
        Command::Sdr { input, out } => {
            let f = read_field(&input)?;
            write_field(&out, &sdr(&f), Some(format!("sdr of {}", input.display())))?;
            Ok(true)
        }
        Command::ApproxSdr { input, k, schedule, seed, out, trace } => {
            let f = read_field(&input)?;
            let dim = f.grid().dim();
            let schedule = match schedule {
                ScheduleArg::AxesCyclic => DirectionSchedule::axes_cyclic(dim)?,
                ScheduleArg::RandomUniform => DirectionSchedule::random_uniform(dim, k, seed)?,
            };
            let (g, rows) = approximate_sdr(&f, &schedule, k)?;
            let csv = trace_csv(&rows);
            match trace {
                Some(path) => std::fs::write(path, csv)?,
                None => out!("{csv}"),
            }
            if let Some(path) = out {
                write_field(&path, &g, Some(format!("{k} Steiner steps of {}", input.display())))?;
            }
            Ok(true)
        }
        Command::Energy { input, phi, nodes, body_csv } => {
            let f = read_field(&input)?;
            let phi: OrliczSpec = serde_json::from_str(&phi)?;
            let phi = phi.build()?;
            let dim = f.grid().dim();
            let q = match nodes {
                Some(n) => make_quadrature(dim, n)?,
                None => orlicz_ps::affine_ball::SphericalQuadrature::default_for(dim)?,
            };
            let solve = affine_ball_detailed(&f, &phi, &q)?;
            let value = serde_json::json!({
                "phi": phi.label(),
                "energy": energy_of(&solve.body),
                "ball_volume": solve.body.volume(),
                "max_residual": solve.max_residual,
                "symmetry_defect": solve.body.symmetry_defect(),
            });
            outln!("{}", serde_json::to_string_pretty(&value)?);
            if let Some(path) = body_csv {
                std::fs::write(path, solve.body.to_csv())?;
            }
            Ok(true)
        }
    }
}

fn verify(
    suite: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    formats: &[String],
) -> Result<bool> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let formats = formats.iter().map(|f| f.parse::<ReportFormat>()).collect::<Result<Vec<_>>>()?;
    let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
    let out = out.or_else(|| cfg.output_dir.clone());
    let harness = Harness::new(cfg)?;
    let mut ok = true;
    for s in suites {
        let report = harness.run(s)?;
        let sm = &report.summary;
        outln!(
            "{:<18} {} cases: {} passed, {} failed, {} skipped, {} logged{}",
            s.name(),
            sm.cases,
            sm.passed,
            sm.failed,
            sm.skipped,
            sm.logged,
            sm.worst_margin.map(|m| format!(", worst margin {m:+.4}")).unwrap_or_default()
        );
        for c in report.failures() {
            outln!("  FAIL {} margin {:+.4}", c.id, c.margin.unwrap_or(f64::NAN));
        }
        if let Some(dir) = &out {
            for f in &formats {
                emit_report(&report, *f, dir)?;
            }
        }
        ok &= report.passed();
    }
    Ok(ok)
}

fn generate_corpus(spec: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(spec)?;
    let c = &cfg.corpus;
    let grid = Grid::cube(c.dim, c.half_width, c.resolution)?;
    std::fs::create_dir_all(out)?;
    for nf in &c.fields {
        let f = nf.generator.generate(&grid)?;
        let path = out.join(format!("{}.field", nf.name));
        write_field(&path, &f, Some(nf.name.clone()))?;
        outln!("{}", path.display());
    }
    for nb in &c.bodies {
        let k = nb.generator.generate(c.body_nodes)?;
        let path = out.join(format!("{}.body.json", nb.name));
        std::fs::write(&path, serde_json::to_string_pretty(&k.to_file(Some(nb.name.clone())))?)?;
        if c.dim == 2 {
            std::fs::write(out.join(format!("{}.csv", nb.name)), k.to_radial_body().to_csv())?;
        }
        outln!("{}", path.display());
    }
    Ok(())
}
