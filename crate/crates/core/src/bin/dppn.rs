//! Command-line front end. Every failure ends with one stderr line of the
//! form `error kind=<kind> message="<text>"` and a nonzero exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dppn::ablation::{run_ablation, AblationGrid};
use dppn::checkpoint::Checkpoint;
use dppn::config::KeyValues;
use dppn::dataset::load_dataset;
use dppn::error::{Error, Result};
use dppn::localization::export_localization;
use dppn::metrics::{evaluate_gzsl, GzslReport};
use dppn::model::Hyperparams;
use dppn::synth::{generate_synthetic, SyntheticConfig};
use dppn::train::{init_model, train};

#[derive(Parser)]
#[command(
    name = "dppn",
    about = "Dual progressive prototype network for generalized zero-shot learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic planted-attribute dataset.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train every grid variant for several seeds and report median H.
    Ablate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export similarity maps of test samples as CSV and PGM files.
    Localize {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated test-sample indices.
        #[arg(long, value_delimiter = ',')]
        samples: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn report_csv(report: &GzslReport) -> String {
    let mut out = String::from("name,value\n");
    for (k, v) in [
        ("mca_u", report.mca_u),
        ("mca_s", report.mca_s),
        ("h", report.h),
    ] {
        let _ = writeln!(out, "{k},{v:.6}");
    }
    let _ = writeln!(out, "seen_as_unseen,{}", report.seen_as_unseen);
    let _ = writeln!(out, "unseen_as_seen,{}", report.unseen_as_seen);
    for (id, acc) in &report.per_class {
        let _ = writeln!(out, "class{id},{acc:.6}");
    }
    out
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, out } => {
            let cfg = SyntheticConfig::from_key_values(&KeyValues::read(&config)?)?;
            let dataset = generate_synthetic(&cfg)?;
            let manifest = dataset.save(&out)?;
            println!(
                "wrote {} ({} train, {} test samples)",
                manifest.display(),
                dataset.train.len(),
                dataset.test.len()
            );
        }
        Command::Train { config, data, out } => {
            let hyper = Hyperparams::from_settings(KeyValues::read(&config)?.iter())?;
            let dataset = load_dataset(&data)?;
            let (ckpt, log) = train(&dataset, init_model(hyper, &dataset)?)?;
            let mut csv = String::from("epoch,loss,val_h\n");
            for e in &log.epochs {
                let h = e.val_h.map_or(String::new(), |h| format!("{h:.4}"));
                println!("epoch {:>3} loss {:.5} val H {h}", e.epoch, e.loss);
                let _ = writeln!(csv, "{},{:.6},{h}", e.epoch, e.loss);
            }
            ckpt.save(&out)?;
            write_file(&out.join("train_log.csv"), &csv)?;
            println!("wrote {}", out.display());
        }
        Command::Eval { ckpt, data, csv } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let dataset = load_dataset(&data)?;
            let report = evaluate_gzsl(&ckpt, &dataset)?;
            println!(
                "MCA_u {:.2} MCA_s {:.2} H {:.2} (seen->unseen {}, unseen->seen {})",
                report.mca_u, report.mca_s, report.h, report.seen_as_unseen, report.unseen_as_seen
            );
            if let Some(path) = csv {
                write_file(&path, &report_csv(&report))?;
            }
        }
        Command::Ablate {
            grid,
            data,
            seeds,
            out,
        } => {
            let grid = AblationGrid::read(&grid)?;
            let dataset = load_dataset(&data)?;
            let report = run_ablation(&grid, &dataset, seeds)?;
            write_file(&out, &report.to_csv())?;
            print!("{}", report.summary());
            for name in report.variants() {
                if report.failed(name) {
                    eprintln!("warning: variant {name} failed for at least one seed");
                }
            }
        }
        Command::Localize {
            ckpt,
            data,
            samples,
            out,
        } => {
            if samples.is_empty() {
                return Err(Error::Config("no sample ids given".into()));
            }
            let ckpt = Checkpoint::load(&ckpt)?;
            let dataset = load_dataset(&data)?;
            let exports = export_localization(&ckpt, &dataset, &samples, &out)?;
            let files: usize = exports
                .iter()
                .map(|e| e.csv.len() + e.pgm.iter().map(Vec::len).sum::<usize>())
                .sum();
            println!("wrote {files} files to {}", out.display());
        }
    }
    Ok(())
}

fn error_line(kind: &str, message: &str) {
    let message = message
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ");
    eprintln!("error kind={kind} message=\"{}\"", message.trim());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            error_line("usage", first);
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error_line(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
