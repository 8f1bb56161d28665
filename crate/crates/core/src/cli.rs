//! The `wavediag` command line: `gen`, `transform`, `cv` and `report`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::cnn::{write_checkpoint, write_history_csv};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{accuracy_table, emit_report, render_confusion, run_cv, EvalReport};
use crate::pipeline::{render_images, TransformCode};
use crate::raster::{read_ppm, write_ppm, IMAGE_BYTES, PPM_HEADER};
use crate::signal::{build_dataset, load_manifest_record, BuildOutcome, ConditionClass, DatasetManifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const STAMP_FILE: &str = "params.txt";

#[derive(Debug, Parser)]
#[command(name = "wavediag", version, about = "Wavelet time-frequency images and CNN fault classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the surrogate dataset.
    Gen(CommonArgs),
    /// Render time-frequency images.
    Transform(CommonArgs),
    /// Run stratified k-fold cross-validation.
    Cv(CommonArgs),
    /// Aggregate reports into an accuracy table and confusion grids.
    Report(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// One transform code; defaults to every family in the config.
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

struct Failure {
    code: i32,
    error: Error,
}

impl Failure {
    fn usage(error: Error) -> Self {
        Self { code: EXIT_USAGE, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self {
            code: EXIT_FAILURE,
            error,
        }
    }
}

/// `{out_dir}/{code}/{id}_{code}.ppm`
pub fn image_path(out_dir: &Path, code: TransformCode, id: &str) -> PathBuf {
    out_dir.join(code.as_str()).join(format!("{id}_{code}.ppm"))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.error);
            f.code
        }
    }
}

fn dispatch(cli: Cli, out: &mut (dyn Write + Send)) -> std::result::Result<(), Failure> {
    let (args, cmd): (&CommonArgs, fn(&PipelineConfig, &[TransformCode], &mut (dyn Write + Send)) -> Result<()>) =
        match &cli.command {
            Command::Gen(a) => (a, cmd_gen),
            Command::Transform(a) => (a, cmd_transform),
            Command::Cv(a) => (a, cmd_cv),
            Command::Report(a) => (a, cmd_report),
        };
    let config = PipelineConfig::load(&args.config).map_err(|e| match e {
        Error::Io { .. } => Failure::from(e),
        other => Failure::usage(other),
    })?;
    let codes = match &args.transform {
        Some(t) => vec![TransformCode::parse(t).map_err(Failure::usage)?],
        None => config.transform.families.clone(),
    };
    match args.threads {
        Some(0) => Err(Failure::usage(Error::invalid("--threads must be >= 1"))),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::from(Error::invalid(format!("thread pool: {e}"))))?;
            pool.install(|| cmd(&config, &codes, out)).map_err(Failure::from)
        }
        None => cmd(&config, &codes, out).map_err(Failure::from),
    }
}

fn say(out: &mut (dyn Write + Send), line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("writing output", e))
}

fn cmd_gen(config: &PipelineConfig, _: &[TransformCode], out: &mut (dyn Write + Send)) -> Result<()> {
    let dir = &config.dataset.out_dir;
    let (manifest, outcome) = build_dataset(&config.dataset.dataset_config(), dir)?;
    say(out, dir.join(MANIFEST_FILE).display().to_string())?;
    if outcome == BuildOutcome::Reused {
        say(out, "dataset unchanged; reusing existing files")?;
    }
    say(out, format!("{} records", manifest.records.len()))
}

fn load_manifest(config: &PipelineConfig) -> Result<DatasetManifest> {
    DatasetManifest::load(&config.dataset.out_dir)
}

fn image_is_current(path: &Path) -> bool {
    fs::metadata(path).is_ok_and(|m| m.len() as usize == PPM_HEADER.len() + IMAGE_BYTES)
}

fn cmd_transform(config: &PipelineConfig, codes: &[TransformCode], out: &mut (dyn Write + Send)) -> Result<()> {
    let dir = &config.dataset.out_dir;
    let manifest = load_manifest(config)?;
    let params = config.transform.params();
    // codes whose stamp matches may skip existing images
    let mut reusable = Vec::new();
    for &code in codes {
        let code_dir = dir.join(code.as_str());
        fs::create_dir_all(&code_dir)
            .map_err(|e| Error::io(format!("creating {}", code_dir.display()), e))?;
        let stamp = format!("{}\nrecords={}\n", params.stamp(code), manifest.to_json()?.len());
        let stamp_path = code_dir.join(STAMP_FILE);
        let current = fs::read_to_string(&stamp_path).is_ok_and(|s| s == stamp);
        if !current {
            // invalidate before rendering so an interrupted run is redone
            let _ = fs::remove_file(&stamp_path);
        }
        reusable.push((code, current, stamp, stamp_path));
    }

    let rendered: Vec<usize> = manifest
        .records
        .par_iter()
        .map(|entry| -> Result<usize> {
            let todo: Vec<TransformCode> = reusable
                .iter()
                .filter(|(code, current, _, _)| !(*current && image_is_current(&image_path(dir, *code, &entry.id))))
                .map(|(code, _, _, _)| *code)
                .collect();
            if todo.is_empty() {
                return Ok(0);
            }
            let record = load_manifest_record(&manifest, entry, dir)?;
            for (code, img) in render_images(&record, &todo, &params)? {
                write_ppm(&img, &image_path(dir, code, &entry.id))?;
            }
            Ok(todo.len())
        })
        .collect::<Result<_>>()?;

    for (_, _, stamp, stamp_path) in &reusable {
        fs::write(stamp_path, stamp)
            .map_err(|e| Error::io(format!("writing {}", stamp_path.display()), e))?;
    }
    let written: usize = rendered.iter().sum();
    let total = manifest.records.len() * codes.len();
    for &code in codes {
        say(out, format!("{code}: {} images in {}", manifest.records.len(), dir.join(code.as_str()).display()))?;
    }
    say(out, format!("{written} rendered, {} up to date", total - written))
}

fn cmd_cv(config: &PipelineConfig, codes: &[TransformCode], out: &mut (dyn Write + Send)) -> Result<()> {
    let dir = &config.dataset.out_dir;
    let manifest = load_manifest(config)?;
    let results = config.results_dir();
    for &code in codes {
        let mut images = Vec::with_capacity(manifest.records.len());
        for entry in &manifest.records {
            let path = image_path(dir, code, &entry.id);
            if !path.is_file() {
                return Err(Error::invalid(format!(
                    "missing image {} (run `wavediag transform` first)",
                    path.display()
                )));
            }
            images.push(read_ppm(&path, ConditionClass::from_code(entry.class_code)?, &entry.id)?);
        }
        let outcome = run_cv(&images, code.as_str(), &config.train, &config.eval.cv_config())?;
        let code_dir = results.join(code.as_str());
        emit_report(&outcome.report, &code_dir)?;
        for fold in &outcome.folds {
            let fold_dir = code_dir.join(format!("fold{}", fold.fold));
            fs::create_dir_all(&fold_dir)
                .map_err(|e| Error::io(format!("creating {}", fold_dir.display()), e))?;
            write_history_csv(&fold.history, &fold_dir.join("history.csv"))?;
            write_checkpoint(&fold.model, &fold_dir.join("model.wdnn"))?;
        }
        say(
            out,
            format!("{code}: mean={:.3} std={:.3}", outcome.report.mean, outcome.report.std),
        )?;
    }
    Ok(())
}

fn cmd_report(config: &PipelineConfig, codes: &[TransformCode], out: &mut (dyn Write + Send)) -> Result<()> {
    let results = config.results_dir();
    let mut reports = Vec::new();
    for &code in codes {
        let path = results.join(code.as_str()).join("report.json");
        match fs::read_to_string(&path) {
            Ok(text) => reports.push(EvalReport::from_json(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(format!("reading {}", path.display()), e)),
        }
    }
    if reports.is_empty() {
        return Err(Error::invalid(format!("no reports found under {}", results.display())));
    }
    let table = accuracy_table(&reports);
    let mut grids = String::new();
    for r in &reports {
        grids.push_str(&render_confusion(r));
        grids.push('\n');
    }
    fs::create_dir_all(&results).map_err(|e| Error::io(format!("creating {}", results.display()), e))?;
    for (name, body) in [("table.csv", &table), ("confusion.txt", &grids)] {
        let path = results.join(name);
        fs::write(&path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    say(out, table.trim_end())?;
    say(out, format!("wrote {}", results.join("table.csv").display()))
}
