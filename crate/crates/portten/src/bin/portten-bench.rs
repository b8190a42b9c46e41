use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use portten::bench::{
    bench_apply, bench_model, gnuplot_bandwidth_script, gnuplot_script, parse_sizes, write_bandwidth_csv, write_layer_csv,
    write_summary_csv, ApplyBenchConfig, ModelBenchConfig, ModelSpec, DEFAULT_EXPRESSION,
};
use portten::{dump, select_backend, Backend, BackendChoice, Error, Result, SharedRegistry};

#[derive(Parser)]
#[command(name = "portten-bench", version, about = "Per-element bandwidth and per-layer convnet timings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// reference, device or auto [default: $PORTTEN_BACKEND or auto]
    #[arg(long)]
    backend: Option<String>,
    /// Timed repetitions after one warm-up run.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Write every rendered kernel to numbered files in this directory.
    #[arg(long, value_name = "DIR")]
    dump_kernels: Option<PathBuf>,
    /// Gnuplot script to write alongside the CSV output.
    #[arg(long, value_name = "FILE")]
    gnuplot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a unary pointwise apply over tensor sizes.
    Apply {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending sizes; scientific notation allowed.
        #[arg(long, default_value = "1e3,1e4,1e5,1e6,1e7")]
        sizes: String,
        #[arg(long, default_value = DEFAULT_EXPRESSION)]
        expr: String,
        #[arg(long, default_value = "bw.csv")]
        out: PathBuf,
    },
    /// Time each layer of a bundled model or a model spec file.
    Model {
        #[command(flatten)]
        common: Common,
        /// Bundled model (vgg-a, alexnet) or path to a spec file.
        #[arg(long)]
        name: String,
        /// Divisor applied to channel counts.
        #[arg(long, default_value_t = 16)]
        scale: usize,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        /// Convolution implementation to force (direct, im2col, im2col-batched, winograd).
        #[arg(long = "impl")]
        implementation: Option<String>,
        /// Time forward plus backward instead of forward only.
        #[arg(long)]
        backward: bool,
        #[arg(long, default_value = "layers.csv")]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
}

fn setup(common: &Common) -> Result<std::sync::Arc<dyn Backend>> {
    if let Some(dir) = &common.dump_kernels {
        dump::install(dir).map_err(|e| Error::Validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    let choice = match &common.backend {
        Some(b) => b.parse()?,
        None => BackendChoice::from_env()?,
    };
    let backend = select_backend(choice)?;
    log::info!("backend: {}", backend.descriptor().name);
    Ok(backend)
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Apply { common, sizes, expr, out } => {
            let config = ApplyBenchConfig { sizes: parse_sizes(&sizes)?, reps: common.reps, expression: expr };
            config.validate()?;
            let backend = setup(&common)?;
            let rows = bench_apply(backend.as_ref(), &config)?;
            write_bandwidth_csv(create(&out)?, &rows)?;
            if let Some(gp) = &common.gnuplot {
                let title = format!("{} bandwidth ({})", backend.descriptor().name, config.expression);
                std::fs::write(gp, gnuplot_bandwidth_script(&title, &file_name(&out)))?;
            }
            let stats = backend.cache_stats();
            eprintln!(
                "{} rows -> {} (kernel cache: {} compiles, hit rate {:.1}%)",
                rows.len(),
                out.display(),
                stats.compiles,
                100.0 * stats.hit_rate()
            );
        }
        Command::Model { common, name, scale, batch, implementation, backward, out, summary, seed } => {
            let spec = ModelSpec::load(&name)?;
            let config = ModelBenchConfig { scale, batch, reps: common.reps, implementation, backward, seed };
            let backend = setup(&common)?;
            let report = bench_model(&spec, backend.as_ref(), &SharedRegistry::with_builtins(), &config)?;
            write_layer_csv(create(&out)?, &report.layers)?;
            if let Some(path) = &summary {
                write_summary_csv(create(path)?, &report.summary)?;
            }
            if let Some(gp) = &common.gnuplot {
                let summary_name = summary.as_deref().map(file_name);
                std::fs::write(gp, gnuplot_script(&report.model, &file_name(&out), summary_name.as_deref()))?;
            }
            for s in &report.summary {
                eprintln!("{:>8} {:>10.4} s {:>6.2}%", s.kind, s.total_time_s, s.percent);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
