use clap::{Parser, Subcommand};
use spatial3d::bench::{
    format_table, generate_dataset, run_benchmark, write_report_csv, BenchData, BenchOptions, DatasetSpec, DrillStyle,
    QueryKind,
};
use spatial3d::kernels::Backend;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser, Debug)]
#[command(version, about = "Dataset generator and timing harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write drills.csv and ore.wkt.
    Generate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        segments: usize,
        #[arg(long, default_value_t = 500)]
        faces: usize,
        #[arg(long, default_value = "vertical")]
        style: DrillStyle,
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
    },
    /// Time one operation over a generated dataset.
    Run {
        #[arg(long)]
        op: QueryKind,
        /// Comma-separated LIMIT values; `all` for no limit.
        #[arg(long, value_delimiter = ',', default_value = "1,10,100000")]
        limits: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "sequential,parallel")]
        backends: Vec<Backend>,
        /// Worker counts for the parallel backend.
        #[arg(long, value_delimiter = ',', default_value = "8")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Per-cell time budget.
        #[arg(long, default_value_t = 600)]
        timeout_secs: u64,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate {
            seed,
            segments,
            faces,
            style,
            out_dir,
        } => {
            let spec = DatasetSpec {
                seed,
                segment_count: segments,
                mesh_face_target: faces,
                drill_style: style,
                ..DatasetSpec::default()
            };
            let g = generate_dataset(&spec, &out_dir).map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} segments) and {} ({} faces)",
                g.drills_csv.display(),
                g.segment_count,
                g.ore_wkt.display(),
                g.face_count
            );
            Ok(())
        }
        Command::Run {
            op,
            limits,
            backends,
            workers,
            repeats,
            timeout_secs,
            data_dir,
            out,
        } => {
            let limits = limits
                .iter()
                .map(|l| match l.to_ascii_lowercase().as_str() {
                    "all" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| format!("invalid limit '{l}'")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let opts = BenchOptions {
                limits,
                backends,
                workers,
                repeats,
                timeout: Duration::from_secs(timeout_secs),
                warmup: true,
            };
            let data = BenchData::load(&data_dir).map_err(|e| e.to_string())?;
            let reports = run_benchmark(&data, op, &opts).map_err(|e| e.to_string())?;
            let file = std::fs::File::create(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            write_report_csv(&reports, file).map_err(|e| e.to_string())?;
            print!("{}", format_table(&reports));
            println!("report written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::FAILURE
        }
    }
}
