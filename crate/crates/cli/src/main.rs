use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use corrnet::geometry::MetricKind;
use corrnet::train::{self, elliptope, DatagenConfig, Dataset, RunConfig};
use corrnet::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";

/// `println!` that reports a closed stdout as an I/O error instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*).map_err(|e| Error::Io(format!("stdout: {e}")))?
    };
}

#[derive(Parser)]
#[command(name = "corrnet", version, about = "Neural networks on correlation matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset around separated anchors.
    Datagen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        channels: usize,
        #[arg(long, default_value_t = 0.3)]
        spread: f64,
        #[arg(long, default_value_t = 2.0)]
        sep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw fresh samples around the anchors of `--seed`.
        #[arg(long)]
        sample_seed: Option<u64>,
    },
    /// Train a model and write a checkpoint directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metrics log path (defaults to metrics.csv inside the checkpoint).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Report accuracy and the confusion matrix of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare analytic and finite-difference gradients per parameter block.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time the forward pass of FC(n -> 20) followed by a 10-class MLR.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "30,50,100")]
        dims: Vec<usize>,
        /// Comma-separated metric names or `all`.
        #[arg(long, default_value = "all")]
        metrics: String,
        #[arg(long, default_value_t = 30)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sample an MLR logit over the 3x3 elliptope.
    Hyperplane {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        z: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn parse_metrics(s: &str) -> Result<Vec<MetricKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(MetricKind::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

fn datagen(cfg: DatagenConfig, out: &Path) -> Result<()> {
    let data = train::generate(&cfg)?;
    data.save(out)?;
    out!("wrote {} samples ({} classes, {} channels, n = {}) to {}", data.len(), cfg.classes, cfg.channels, cfg.dim, out.display());
    Ok(())
}

fn run_train(config: &Path, data: &Path, out: &Path, metrics: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let data = Dataset::load(data)?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let metrics = metrics.unwrap_or_else(|| out.join(METRICS_FILE));
    let mut log = BufWriter::new(File::create(&metrics).map_err(io_err(&metrics))?);
    writeln!(log, "epoch,loss,acc,seconds").map_err(io_err(&metrics))?;
    let (model, logs) = train::train(&cfg, &data, |row| {
        writeln!(log, "{},{:?},{:?},{:.6}", row.epoch, row.loss, row.acc, row.seconds)
            .and_then(|_| log.flush())
            .map_err(io_err(&metrics))
    })?;
    train::save_checkpoint(out, &cfg, &model)?;
    let last = logs.last().expect("initial evaluation is always logged");
    out!("epochs {}  loss {:.6}  acc {:?}  seconds {:.2}", last.epoch, last.loss, last.acc, last.seconds);
    out!("checkpoint written to {}", out.display());
    Ok(())
}

fn eval(ckpt: &Path, data: &Path) -> Result<()> {
    let (_, model) = train::load_checkpoint(ckpt)?;
    let data = Dataset::load(data)?;
    let ev = train::evaluate(&model, &data)?;
    let correct: usize = (0..ev.confusion.len()).map(|k| ev.confusion[k][k]).sum();
    out!("accuracy {:?} ({correct}/{})", ev.accuracy, data.len());
    out!("loss {:.6}", ev.loss);
    out!("confusion (rows: true class, columns: predicted)");
    for (k, row) in ev.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
        out!("{k:>4} {}", cells.join(""));
    }
    Ok(())
}

/// Returns whether every block passed.
fn gradcheck(config: &Path, seed: Option<u64>) -> Result<bool> {
    let cfg = RunConfig::from_file(config)?;
    let report = train::gradcheck(&cfg, seed.unwrap_or(cfg.seed))?;
    out!("{:<12} {:>8} {:>12}", "block", "params", "rel_error");
    for b in &report.blocks {
        out!("{:<12} {:>8} {:>12.3e}", b.name, b.params, b.rel_error);
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    out!("max {:.3e} (tolerance {:e}) {verdict}", report.max_error(), train::gradcheck::FD_TOLERANCE);
    Ok(report.passed())
}

fn bench(dims: &[usize], metrics: &str, repeats: usize, seed: u64, csv: Option<&Path>) -> Result<()> {
    let metrics = parse_metrics(metrics)?;
    if repeats == 0 || dims.is_empty() {
        return Err(Error::Config("bench needs at least one dimension and one repeat".into()));
    }
    if let Some(&n) = dims.iter().find(|&&n| n < 4) {
        return Err(Error::Config(format!("bench dimensions must be at least 4, got {n}")));
    }
    let mut file = match csv {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).map_err(io_err(p))?);
            writeln!(f, "metric,n,repeats,mean_seconds,std_seconds").map_err(io_err(p))?;
            Some((f, p))
        }
        None => None,
    };
    out!("{:<6} {:>5} {:>14} {:>14}", "metric", "n", "mean_s", "std_s");
    for &n in dims {
        for &m in &metrics {
            let r = train::bench_metric(m, n, repeats, seed)?;
            out!("{:<6} {:>5} {:>14.6e} {:>14.6e}", r.metric, r.n, r.mean_seconds, r.std_seconds);
            if let Some((f, p)) = file.as_mut() {
                writeln!(f, "{},{},{},{:e},{:e}", r.metric, r.n, r.repeats, r.mean_seconds, r.std_seconds).map_err(io_err(p))?;
            }
        }
    }
    if let Some((mut f, p)) = file {
        f.flush().map_err(io_err(p))?;
    }
    Ok(())
}

fn hyperplane(metric: &str, z: &Path, gamma: f64, grid: usize, out: &Path) -> Result<()> {
    let metric: MetricKind = metric.parse()?;
    let z = elliptope::read_z(z, metric)?;
    let points = elliptope::hyperplane_grid(metric, 3, &z, gamma, grid)?;
    elliptope::write_csv(out, &points)?;
    info!("{} of {} grid points inside the elliptope", points.len(), grid.pow(3));
    out!("wrote {} points to {}", points.len(), out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        3
    } else if e.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Datagen { out, classes, per_class, dim, channels, spread, sep, seed, sample_seed } => {
            datagen(DatagenConfig { classes, per_class, dim, channels, spread, sep, seed, sample_seed }, &out)
        }
        Command::Train { config, data, out, metrics } => run_train(&config, &data, &out, metrics),
        Command::Eval { ckpt, data } => eval(&ckpt, &data),
        Command::Gradcheck { config, seed } => match gradcheck(&config, seed) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::Bench { dims, metrics, repeats, seed, csv } => bench(&dims, &metrics, repeats, seed, csv.as_deref()),
        Command::Hyperplane { metric, z, gamma, grid, out } => hyperplane(&metric, &z, gamma, grid, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
