//! Command-line front end. Errors are reported on stderr as a single line
//! `error kind=<kind> message="<text>"`; runtime failures exit with 1 and
//! usage errors with 2.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::geometry::{Orientation, TubeSpec};
use crate::metrics::AGGREGATE_ID;
use commands::{LossInputs, PredictionSource};
use config::{RunConfig, Settings};
use manifest::{DatasetKind, DatasetManifest, ScanOptions};

#[derive(Debug, Parser)]
#[command(
    name = "vstrata",
    version,
    about = "Thickness stratification and evaluation of binary vessel masks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split masks into thin / stem / raw channels and ladder strata.
    Stratify {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Binarize prediction maps (value > threshold) and OR them together.
    Fuse {
        /// Prediction maps to fuse; all must share dimensions.
        #[arg(required = true, num_args = 1..)]
        maps: Vec<PathBuf>,
        /// Output file stem inside the output directory.
        #[arg(long, default_value = "fused")]
        name: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score predictions against ground truth and write report.csv.
    Evaluate {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Directory holding `<id><suffix>.png` predictions.
        #[arg(long)]
        pred_dir: PathBuf,
        /// Suffix of the soft (probability) maps.
        #[arg(long)]
        soft_suffix: String,
        /// Suffix of binary predictions; defaults to thresholding the soft map.
        #[arg(long)]
        binary_suffix: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print loss terms for one target mask and prediction maps.
    EvalLoss {
        /// Ground-truth vessel mask.
        #[arg(long)]
        target: PathBuf,
        /// Three prediction maps in thin, stem, raw order.
        #[arg(long, num_args = 3, value_names = ["THIN", "STEM", "RAW"])]
        pred: Vec<PathBuf>,
        /// Single-channel thin prediction map.
        #[arg(long)]
        thin_pred: Option<PathBuf>,
        /// Discriminator scores on real pairs, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        d_real: Vec<f64>,
        /// Discriminator scores on generated pairs, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        d_fake: Vec<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render a synthetic tube and sweep the opening diameter.
    Synth {
        #[arg(long, default_value = "horizontal")]
        orientation: String,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        length: usize,
        /// Background margin around the tube.
        #[arg(long, default_value_t = 2)]
        margin: usize,
        /// Largest diameter in the erasure sweep.
        #[arg(long, default_value_t = 8)]
        sweep: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare naive and separable opening speed on seeded masks.
    Bench {
        /// Image sizes as HEIGHTxWIDTH, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "565x584")]
        sizes: Vec<String>,
        /// Kernel side lengths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,15")]
        kernels: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for bench.csv; stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by every subcommand that writes outputs.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First (thinnest) diameter threshold.
    #[arg(long)]
    pub d1: Option<String>,
    /// Increasing diameter thresholds, comma separated.
    #[arg(long)]
    pub ladder: Option<String>,
    /// Per-channel loss weights, comma separated.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long = "lambda")]
    pub lambda: Option<String>,
    /// Binarization threshold; a pixel is foreground when value > threshold.
    #[arg(long)]
    pub threshold: Option<String>,
    /// Restrict evaluation to the field-of-view mask: on | off.
    #[arg(long)]
    pub fov: Option<String>,
    /// Worker threads, or `auto`.
    #[arg(long)]
    pub jobs: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut file = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let pairs = [
            ("d1", &self.d1),
            ("ladder", &self.ladder),
            ("weights", &self.weights),
            ("lambda", &self.lambda),
            ("threshold", &self.threshold),
            ("fov", &self.fov),
            ("jobs", &self.jobs),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                flags.set(k, v.clone());
            }
        }
        if let Some(o) = &self.out {
            flags.set("out", o.to_string_lossy());
        }
        // a file ladder is replaced, not checked, by a d1 flag
        if flags.get("d1").is_some() && flags.get("ladder").is_none() {
            file.remove("ladder");
            file.remove("d1");
        }
        RunConfig::resolve(&[&file, &flags])
    }
}

/// Selects the masks to process: a dataset tree or loose mask files.
#[derive(Debug, Default, Args)]
pub struct DatasetArgs {
    /// drive | stare | chasedb1 | custom
    #[arg(long)]
    pub dataset: Option<String>,
    /// Dataset root directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// STARE annotator directory (relative to the root or absolute).
    #[arg(long)]
    pub annotator_dir: Option<PathBuf>,
    /// CHASE_DB1 annotation tag, e.g. 1stHO or 2ndHO.
    #[arg(long)]
    pub chase_annotation: Option<String>,
    #[arg(long)]
    pub image_glob: Option<String>,
    #[arg(long)]
    pub mask_glob: Option<String>,
    #[arg(long)]
    pub fov_glob: Option<String>,
    /// Comma-separated ids, or `@file` with one id per line.
    #[arg(long)]
    pub ids: Option<String>,
    /// Loose mask files; ids are the file stems.
    #[arg(long = "mask", num_args = 1..)]
    pub masks: Vec<PathBuf>,
}

impl DatasetArgs {
    pub fn manifest(&self) -> Result<DatasetManifest> {
        let manifest = match (&self.root, self.masks.is_empty()) {
            (Some(_), false) => return Err(Error::invalid("use either --root or --mask, not both")),
            (None, true) => return Err(Error::invalid("no input: pass --root with --dataset, or --mask files")),
            (None, false) => DatasetManifest::from_masks(&self.masks)?,
            (Some(root), true) => {
                let kind: DatasetKind = self
                    .dataset
                    .as_deref()
                    .ok_or_else(|| Error::invalid("--root needs --dataset"))?
                    .parse()?;
                let opts = ScanOptions {
                    annotator_dir: self.annotator_dir.clone(),
                    chase_annotation: self.chase_annotation.clone(),
                    image_glob: self.image_glob.clone(),
                    mask_glob: self.mask_glob.clone(),
                    fov_glob: self.fov_glob.clone(),
                };
                manifest::scan_dataset(root, kind, &opts)?
            }
        };
        match &self.ids {
            None => Ok(manifest),
            Some(spec) => {
                let ids = match spec.strip_prefix('@') {
                    Some(path) => manifest::read_id_list(std::path::Path::new(path))?,
                    None => spec
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect(),
                };
                manifest.restrict(&ids)
            }
        }
    }
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::invalid(format!("size {s:?}: expected HEIGHTxWIDTH")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("size {s:?}: expected positive integers")))
    };
    Ok((parse(h)?, parse(w)?))
}

/// Executes a parsed command, writing human output to stdout.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stratify { dataset, common } => {
            let config = common.resolve()?;
            let manifest = dataset.manifest()?;
            let summaries = commands::cmd_stratify(&manifest, &config)?;
            let text = std::fs::read_to_string(config.output_dir.join(commands::STRATA_SUMMARY_FILE))
                .map_err(|e| Error::io(config.output_dir.join(commands::STRATA_SUMMARY_FILE), e))?;
            print!("{text}");
            eprintln!(
                "stratified {} masks into {}",
                summaries.len(),
                config.output_dir.display()
            );
        }
        Command::Fuse { maps, name, common } => {
            let config = common.resolve()?;
            let (fused, _) = commands::cmd_fuse(&maps, &name, &config)?;
            println!(
                "fused {} maps into {} ({} foreground pixels)",
                maps.len(),
                config.output_dir.join(format!("{name}.png")).display(),
                fused.count_ones()
            );
        }
        Command::Evaluate {
            dataset,
            pred_dir,
            soft_suffix,
            binary_suffix,
            common,
        } => {
            let config = common.resolve()?;
            let manifest = dataset.manifest()?;
            let preds = PredictionSource {
                dir: pred_dir,
                soft_suffix,
                binary_suffix,
            };
            let (reports, agg) = commands::cmd_evaluate(&manifest, &preds, &config)?;
            println!("{}", crate::metrics::CSV_HEADER);
            for r in &reports {
                println!("{}", r.to_csv_row());
            }
            debug_assert_eq!(agg.image, AGGREGATE_ID);
            println!("{}", agg.to_csv_row());
        }
        Command::EvalLoss {
            target,
            pred,
            thin_pred,
            d_real,
            d_fake,
            common,
        } => {
            let config = common.resolve()?;
            let inputs = LossInputs {
                target,
                stack: pred,
                thin: thin_pred,
                d_real,
                d_fake,
            };
            let values = commands::cmd_eval_loss(&inputs, &config)?;
            print!("{}", values.render());
        }
        Command::Synth {
            orientation,
            width,
            length,
            margin,
            sweep,
            common,
        } => {
            let config = common.resolve()?;
            let orientation: Orientation = orientation.parse()?;
            let spec = TubeSpec::centered(orientation, width, length, margin);
            let out = commands::cmd_synth(&spec, sweep, &config)?;
            let text = std::fs::read_to_string(&out.sidecar_path).map_err(|e| Error::io(&out.sidecar_path, e))?;
            print!("{text}");
        }
        Command::Bench {
            sizes,
            kernels,
            reps,
            seed,
            out,
        } => {
            let sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>>>()?;
            let rows = commands::bench_opening(&sizes, &kernels, reps, seed)?;
            print!("{}", commands::render_bench(&rows));
            if let Some(dir) = out {
                let config = RunConfig {
                    output_dir: dir,
                    ..RunConfig::default()
                };
                commands::write_bench(&rows, &config)?;
            }
        }
    }
    Ok(())
}

fn report_error(kind: &str, message: &str) {
    let escaped = message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    eprintln!("error kind={kind} message=\"{escaped}\"");
}

/// Parses `args` (including the program name) and runs; returns the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = e.print();
                    report_error("usage", &e.kind().to_string());
                    2
                }
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            1
        }
    }
}
