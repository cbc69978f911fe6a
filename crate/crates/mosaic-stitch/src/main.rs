//! Command-line front end: reads PGM images, binarizes them, runs the
//! map/reduce stitch job, and writes PGM/text outputs.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 write
//! failure, 4 invalid flag values.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mosaic_stitch::bench::{run_bench, to_csv, BenchConfig, STAGE_SEARCH};
use mosaic_stitch::bitmap::{BinarizationConfig, Bitmap};
use mosaic_stitch::kernel::MatchKernel;
use mosaic_stitch::mapreduce::format_records;
use mosaic_stitch::pgm::{read_pgm, write_pgm, PgmVariant};
use mosaic_stitch::pipeline::{run_stitch_job, ImagePair};

const EXIT_BAD_INPUT: u8 = 2;
const EXIT_WRITE_FAILED: u8 = 3;
const EXIT_BAD_FLAGS: u8 = 4;

#[derive(Parser)]
#[command(name = "mosaic-stitch", version, about = "Stitch two overlapping monochrome images by exhaustive black-pixel overlap search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stitch two PGM images and write the merged PGM.
    Stitch {
        img1: PathBuf,
        img2: PathBuf,
        out: PathBuf,
        /// Binarization threshold in 1..=255.
        #[arg(long, default_value_t = 128)]
        threshold: u8,
        /// Worker threads for the job.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Search stripes, or "auto" for max(workers, 4).
        #[arg(long, default_value = "auto")]
        stripes: String,
        /// Also write the job-file, output-record and metadata text
        /// artifacts next to OUT.
        #[arg(long)]
        emit_string: bool,
        /// Counting kernel: naive or packed.
        #[arg(long, default_value = "naive")]
        kernel: String,
    },
    /// Threshold a PGM image to {0,255} and write it back as PGM.
    Binarize {
        img: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        threshold: u8,
    },
    /// Print the bitmap text encoding of a PGM image to stdout.
    Serialize {
        img: PathBuf,
        #[arg(long, default_value_t = 128)]
        threshold: u8,
    },
    /// Time the pipeline stages over random square pairs and report the
    /// search-time scaling exponent.
    Bench {
        /// Comma-separated square sizes, at least two, each >= 8,
        /// strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        /// Black-pixel density of the generated pairs.
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Counting kernel: naive or packed.
        #[arg(long, default_value = "naive")]
        kernel: String,
        /// Where to write the stage,size,repeat,seconds CSV.
        #[arg(long, default_value = "bench.csv")]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_BAD_FLAGS,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Stitch {
            img1,
            img2,
            out,
            threshold,
            workers,
            stripes,
            emit_string,
            kernel,
        } => cmd_stitch(&img1, &img2, &out, threshold, workers, &stripes, emit_string, &kernel),
        Command::Binarize { img, out, threshold } => cmd_binarize(&img, &out, threshold),
        Command::Serialize { img, threshold } => cmd_serialize(&img, threshold),
        Command::Bench {
            sizes,
            repeat,
            density,
            seed,
            kernel,
            csv,
        } => cmd_bench(sizes, repeat, density, seed, &kernel, &csv),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn parse_threshold(threshold: u8) -> Result<BinarizationConfig, u8> {
    BinarizationConfig::new(threshold).map_err(|err| {
        eprintln!("error: --threshold: {err}");
        EXIT_BAD_FLAGS
    })
}

fn parse_kernel(kernel: &str) -> Result<MatchKernel, u8> {
    kernel.parse().map_err(|err| {
        eprintln!("error: --kernel: {err}");
        EXIT_BAD_FLAGS
    })
}

fn parse_stripes(stripes: &str, workers: usize) -> Result<usize, u8> {
    if stripes == "auto" {
        return Ok(workers.max(4));
    }
    match stripes.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => {
            eprintln!("error: --stripes: expected \"auto\" or a positive integer, got {stripes:?}");
            Err(EXIT_BAD_FLAGS)
        }
    }
}

/// Reads a PGM file and binarizes it, mapping any failure to exit 2 with
/// a message naming the file and the offense.
fn load_bitmap(path: &Path, cfg: BinarizationConfig) -> Result<Bitmap, u8> {
    let bytes = std::fs::read(path).map_err(|err| {
        eprintln!("error: cannot read {}: {err}", path.display());
        EXIT_BAD_INPUT
    })?;
    let image = read_pgm(&bytes).map_err(|err| {
        eprintln!("error: {}: {err}", path.display());
        EXIT_BAD_INPUT
    })?;
    Ok(image.to_bitmap(cfg))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), u8> {
    std::fs::write(path, bytes).map_err(|err| {
        eprintln!("error: cannot write {}: {err}", path.display());
        EXIT_WRITE_FAILED
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_stitch(
    img1_path: &Path,
    img2_path: &Path,
    out_path: &Path,
    threshold: u8,
    workers: usize,
    stripes: &str,
    emit_string: bool,
    kernel: &str,
) -> Result<(), u8> {
    let cfg = parse_threshold(threshold)?;
    let kernel = parse_kernel(kernel)?;
    if workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return Err(EXIT_BAD_FLAGS);
    }
    let stripes = parse_stripes(stripes, workers)?;

    let image1 = load_bitmap(img1_path, cfg)?;
    let image2 = load_bitmap(img2_path, cfg)?;
    let pair = ImagePair::new(image1, image2, "pair0").expect("fixed pair id is valid");

    let result = run_stitch_job(&[pair], workers, stripes, kernel).map_err(|err| {
        eprintln!("error: stitch job failed: {err}");
        EXIT_BAD_INPUT
    })?;
    let stitched = &result.stitched[0];
    let best = stitched.output.best;

    if best.count == 0 {
        eprintln!(
            "warning: no overlapping black pixels between {} and {}; merging at (0,0) without overlap evidence",
            img1_path.display(),
            img2_path.display()
        );
    }

    write_file(out_path, &write_pgm(&stitched.output.merged.to_gray(), PgmVariant::P2))?;

    if emit_string {
        let artifact = |suffix: &str| -> PathBuf {
            let mut name = out_path.as_os_str().to_owned();
            name.push(suffix);
            PathBuf::from(name)
        };
        write_file(&artifact(".job.txt"), format_records(&result.input_records).as_bytes())?;
        write_file(&artifact(".records.txt"), format_records(&result.output_records).as_bytes())?;
        write_file(&artifact(".meta.txt"), format_records(&result.metadata_records).as_bytes())?;
    }

    // Offsets print as (x, y) = (col, row).
    println!("best=({},{}) count={}", best.at.col, best.at.row, best.count);
    Ok(())
}

fn cmd_binarize(img_path: &Path, out_path: &Path, threshold: u8) -> Result<(), u8> {
    let cfg = parse_threshold(threshold)?;
    let bitmap = load_bitmap(img_path, cfg)?;
    write_file(out_path, &write_pgm(&bitmap.to_gray(), PgmVariant::P2))
}

fn cmd_serialize(img_path: &Path, threshold: u8) -> Result<(), u8> {
    let cfg = parse_threshold(threshold)?;
    let bitmap = load_bitmap(img_path, cfg)?;
    println!("{}", bitmap.serialize());
    Ok(())
}

fn cmd_bench(
    sizes: Vec<usize>,
    repeat: usize,
    density: f64,
    seed: u64,
    kernel: &str,
    csv_path: &Path,
) -> Result<(), u8> {
    let kernel = parse_kernel(kernel)?;
    let cfg = BenchConfig {
        sizes,
        repeat,
        density,
        seed,
        kernel,
    };
    let report = run_bench(&cfg).map_err(|err| {
        eprintln!("error: {err}");
        EXIT_BAD_FLAGS
    })?;

    write_file(csv_path, to_csv(&report.rows).as_bytes())?;

    for run in &report.runs {
        println!(
            "size={} repeat={} best=({},{}) count={}",
            run.size, run.repeat, run.best.at.col, run.best.at.row, run.best.count
        );
    }
    let median_search: Vec<String> = cfg
        .sizes
        .iter()
        .map(|&size| {
            let mut samples: Vec<f64> = report
                .rows
                .iter()
                .filter(|row| row.stage == STAGE_SEARCH && row.size == size)
                .map(|row| row.seconds)
                .collect();
            samples.sort_by(|a, b| a.partial_cmp(b).expect("finite durations"));
            format!("{size}:{:.6}s", samples[samples.len() / 2])
        })
        .collect();
    println!("median search times: {}", median_search.join(" "));
    println!("search slope (log-log): {:.3}", report.search_slope);
    Ok(())
}
