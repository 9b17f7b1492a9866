use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::manifest::{DatasetManifest, ManifestEntry, SUPPORTED_EXTENSIONS};
use crate::error::{Error, Result};
use crate::geometry::{self, Orientation, TubeSpec};
use crate::losses::{self, PredictionStack, RealMap};
use crate::metrics::{self, EvalReport, FovMode};
use crate::morphology::{self, KernelSpec, MorphMode};
use crate::raster::{self, write_atomic, BinaryMask, GrayImage};
use crate::stratify::{self, ChannelStack};

pub const STRATA_SUMMARY_FILE: &str = "strata.csv";
pub const REPORT_FILE: &str = "report.csv";

/// Per-image pixel counts written by [`cmd_stratify`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrataSummary {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub raw: usize,
    pub thin: usize,
    pub stem: usize,
    /// Pixel count of every ladder stratum, thinnest first.
    pub strata: Vec<usize>,
}

impl StrataSummary {
    fn header(strata: usize) -> String {
        let mut h = "id,width,height,raw,thin,stem".to_string();
        for c in 0..strata {
            let _ = write!(h, ",stratum_{c}");
        }
        h
    }

    pub fn to_csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{},{},{}",
            self.id, self.width, self.height, self.raw, self.thin, self.stem
        );
        for n in &self.strata {
            let _ = write!(row, ",{n}");
        }
        row
    }
}

fn stratify_entry(entry: &ManifestEntry, config: &RunConfig) -> Result<StrataSummary> {
    let y = raster::load_mask(&entry.mask_path)?;
    let stack = stratify::stack3(&y, config.d1())?;
    let out = &config.output_dir;
    for (name, mask) in ChannelStack::NAMES.iter().zip(stack.channels()) {
        raster::save_mask(mask, out.join(format!("{}_{name}.png", entry.id)))?;
    }
    let strata = stratify::stratify(&y, &config.ladder);
    debug_assert!(strata.verify_partition());
    if config.ladder.thresholds().len() > 1 {
        for (c, s) in strata.strata().iter().enumerate() {
            raster::save_mask(s, out.join(format!("{}_stratum{c}.png", entry.id)))?;
        }
    }
    Ok(StrataSummary {
        id: entry.id.clone(),
        width: y.width(),
        height: y.height(),
        raw: stack.raw().count_ones(),
        thin: stack.thin().count_ones(),
        stem: stack.stem().count_ones(),
        strata: strata.strata().iter().map(BinaryMask::count_ones).collect(),
    })
}

/// Writes `<id>_thin.png`, `<id>_stem.png` and `<id>_raw.png` for every mask
/// (plus `<id>_stratum<c>.png` for ladders with more than one threshold) and
/// a `strata.csv` summary sorted by id.
pub fn cmd_stratify(manifest: &DatasetManifest, config: &RunConfig) -> Result<Vec<StrataSummary>> {
    config.prepare_output_dir()?;
    let pool = config.thread_pool()?;
    let summaries = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| stratify_entry(e, config).map_err(|err| err.with_id(&e.id)))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut text = StrataSummary::header(config.ladder.strata_count());
    text.push('\n');
    for s in &summaries {
        text.push_str(&s.to_csv_row());
        text.push('\n');
    }
    write_atomic(&config.output_dir.join(STRATA_SUMMARY_FILE), |w| {
        w.write_all(text.as_bytes())
    })?;
    Ok(summaries)
}

/// Fuses prediction maps into `<name>.png` (binary) and `<name>_soft.png`
/// (pixel-wise maximum).
pub fn cmd_fuse(map_paths: &[PathBuf], name: &str, config: &RunConfig) -> Result<(BinaryMask, GrayImage)> {
    if map_paths.is_empty() {
        return Err(Error::invalid("fuse needs at least one map"));
    }
    let maps = map_paths.iter().map(raster::load_gray).collect::<Result<Vec<_>>>()?;
    let fused = stratify::fuse(&maps, config.fuse_threshold)?;
    let soft = stratify::fuse_soft(&maps)?;
    config.prepare_output_dir()?;
    raster::save_mask(&fused, config.output_dir.join(format!("{name}.png")))?;
    raster::save_gray(&soft, config.output_dir.join(format!("{name}_soft.png")))?;
    Ok((fused, soft))
}

fn find_prediction(dir: &Path, id: &str, suffix: &str) -> Result<PathBuf> {
    for ext in SUPPORTED_EXTENSIONS {
        let p = dir.join(format!("{id}{suffix}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Dataset(format!(
        "missing prediction {}",
        dir.join(format!("{id}{suffix}.png")).display()
    )))
}

/// Where predictions live and how they are named: `<id><suffix>.<ext>`.
#[derive(Clone, Debug)]
pub struct PredictionSource {
    pub dir: PathBuf,
    pub soft_suffix: String,
    /// When absent, the binary prediction is the soft map thresholded at the
    /// configured fusion threshold.
    pub binary_suffix: Option<String>,
}

fn evaluate_entry(entry: &ManifestEntry, preds: &PredictionSource, config: &RunConfig) -> Result<EvalReport> {
    let truth = raster::load_mask(&entry.mask_path)?;
    let soft = raster::load_gray(find_prediction(&preds.dir, &entry.id, &preds.soft_suffix)?)?;
    let binary = match &preds.binary_suffix {
        Some(s) => raster::load_mask(find_prediction(&preds.dir, &entry.id, s)?)?,
        None => soft.above(config.fuse_threshold),
    };
    let fov = match (config.fov_mode, &entry.fov_path) {
        (FovMode::On, Some(p)) => Some(raster::load_mask(p)?),
        (FovMode::On, None) => return Err(Error::Dataset("fov mode is on but the entry has no FOV mask".into())),
        (FovMode::Off, _) => None,
    };
    EvalReport::evaluate(&entry.id, &binary, &soft, &truth, fov.as_ref(), config.fov_mode)
}

/// Scores every manifest entry and writes `report.csv`; returns the
/// per-image reports followed by the aggregate.
pub fn cmd_evaluate(
    manifest: &DatasetManifest,
    preds: &PredictionSource,
    config: &RunConfig,
) -> Result<(Vec<EvalReport>, EvalReport)> {
    let pool = config.thread_pool()?;
    let reports = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| evaluate_entry(e, preds, config).map_err(|err| err.with_id(&e.id)))
            .collect::<Result<Vec<_>>>()
    })?;
    let agg = metrics::aggregate(&reports)?;
    let csv = metrics::render_csv(&reports)?;
    config.prepare_output_dir()?;
    write_atomic(&config.output_dir.join(REPORT_FILE), |w| w.write_all(csv.as_bytes()))?;
    Ok((reports, agg))
}

/// Inputs of the `eval-loss` debugging command.
#[derive(Clone, Debug, Default)]
pub struct LossInputs {
    pub target: PathBuf,
    /// thin, stem, raw prediction maps; gray values are scaled to `[0, 1]`.
    pub stack: Vec<PathBuf>,
    pub thin: Option<PathBuf>,
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossValues {
    pub loss_gen: Option<f64>,
    pub l1_gen: Option<f64>,
    pub loss_thin: Option<f64>,
    pub l1_thin: Option<f64>,
    pub cgan: Option<f64>,
    pub composite_gen: Option<f64>,
    pub composite_thin: Option<f64>,
}

impl LossValues {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let fields = [
            ("loss_gen", self.loss_gen),
            ("l1_gen", self.l1_gen),
            ("loss_thin", self.loss_thin),
            ("l1_thin", self.l1_thin),
            ("cgan", self.cgan),
            ("composite_gen", self.composite_gen),
            ("composite_thin", self.composite_thin),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                let _ = writeln!(out, "{k}={v:.9}");
            }
        }
        out
    }
}

pub fn cmd_eval_loss(inputs: &LossInputs, config: &RunConfig) -> Result<LossValues> {
    let target = raster::load_mask(&inputs.target)?;
    let channels = stratify::stack3(&target, config.d1())?;
    let mut v = LossValues {
        loss_gen: None,
        l1_gen: None,
        loss_thin: None,
        l1_thin: None,
        cgan: None,
        composite_gen: None,
        composite_thin: None,
    };
    if !inputs.stack.is_empty() {
        let maps = inputs
            .stack
            .iter()
            .map(|p| raster::load_gray(p).map(|g| RealMap::from_gray(&g)))
            .collect::<Result<Vec<_>>>()?;
        let pred = PredictionStack::new(maps)?;
        v.loss_gen = Some(losses::loss_gen(&pred, channels.channels(), &config.weights)?);
        v.l1_gen = Some(losses::l1_residual(&pred, channels.channels())?);
    }
    if let Some(p) = &inputs.thin {
        let pred = RealMap::from_gray(&raster::load_gray(p)?);
        v.loss_thin = Some(losses::loss_thin(&pred, channels.thin())?);
        v.l1_thin = Some(losses::l1_residual_map(&pred, channels.thin())?);
    }
    if !inputs.d_real.is_empty() || !inputs.d_fake.is_empty() {
        let cgan = losses::cgan_loss(&inputs.d_real, &inputs.d_fake)?;
        v.cgan = Some(cgan);
        v.composite_gen = v
            .l1_gen
            .map(|l1| losses::composite_objective(cgan, l1, &config.weights));
        v.composite_thin = v
            .l1_thin
            .map(|l1| losses::composite_objective(cgan, l1, &config.weights));
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub d: usize,
    pub erased: bool,
    pub survived_intact: bool,
    pub naive_agrees: bool,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub mask_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub diameter: usize,
    pub sweep: Vec<SweepRow>,
}

/// Writes a tube mask and a sidecar with its Fréchet diameter and an erasure
/// sweep over `d = 1..=max_d`.
pub fn cmd_synth(spec: &TubeSpec, max_d: usize, config: &RunConfig) -> Result<SynthOutput> {
    let tube = geometry::make_tube(spec)?;
    let diameter = geometry::discrete_frechet(&tube.border_a, &tube.border_b);
    let mut sweep = Vec::with_capacity(max_d);
    for d in 1..=max_d {
        let fast = geometry::verify_erasure_with(spec, d, MorphMode::Separable)?;
        let slow = geometry::verify_erasure_with(spec, d, MorphMode::Naive)?;
        sweep.push(SweepRow {
            d,
            erased: fast.erased,
            survived_intact: fast.survived_intact,
            naive_agrees: fast == slow,
        });
    }

    let stem = format!("tube_{}_w{}_l{}", spec.orientation, spec.width, spec.length);
    config.prepare_output_dir()?;
    let mask_path = config.output_dir.join(format!("{stem}.png"));
    let sidecar_path = config.output_dir.join(format!("{stem}.txt"));
    raster::save_mask(&tube.mask, &mask_path)?;

    let mut text = String::new();
    let _ = writeln!(text, "orientation={}", spec.orientation);
    let _ = writeln!(text, "width={}", spec.width);
    let _ = writeln!(text, "length={}", spec.length);
    let _ = writeln!(text, "canvas={}x{}", spec.canvas.0, spec.canvas.1);
    let _ = writeln!(text, "origin={},{}", spec.origin.row, spec.origin.col);
    let _ = writeln!(text, "frechet_diameter={diameter}");
    let _ = writeln!(text, "# erasure sweep, kernel side k = d + 1");
    let _ = writeln!(text, "d,k,erased,survived_intact,naive_agrees");
    for r in &sweep {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.d,
            r.d + 1,
            r.erased,
            r.survived_intact,
            r.naive_agrees
        );
    }
    write_atomic(&sidecar_path, |w| w.write_all(text.as_bytes()))?;
    if let Some(bad) = sweep.iter().find(|r| !r.naive_agrees) {
        return Err(Error::invalid(format!(
            "separable and naive opening disagree at d = {}",
            bad.d
        )));
    }
    Ok(SynthOutput {
        mask_path,
        sidecar_path,
        diameter,
        sweep,
    })
}

pub fn parse_orientation(s: &str) -> Result<Orientation> {
    s.parse()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub height: usize,
    pub width: usize,
    pub k: usize,
    pub reps: usize,
    pub naive_ms: f64,
    pub separable_ms: f64,
    pub identical: bool,
}

impl BenchRow {
    pub const HEADER: &'static str = "height,width,k,reps,naive_ms,separable_ms,speedup,identical";

    pub fn speedup(&self) -> f64 {
        self.naive_ms / self.separable_ms.max(1e-9)
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.2},{}",
            self.height,
            self.width,
            self.k,
            self.reps,
            self.naive_ms,
            self.separable_ms,
            self.speedup(),
            self.identical
        )
    }
}

fn time_open(mask: &BinaryMask, k: KernelSpec, mode: MorphMode, reps: usize) -> f64 {
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(morphology::open(std::hint::black_box(mask), k, mode));
    }
    start.elapsed().as_secs_f64() * 1000.0 / reps as f64
}

/// Times naive against separable opening on seeded vessel-like masks. The
/// two outputs are compared before any timing; a mismatch is an error.
pub fn bench_opening(sizes: &[(usize, usize)], kernels: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let mut rows = Vec::new();
    for &(height, width) in sizes {
        let mask = geometry::random_vessel_mask(width, height, 9, seed);
        for &k in kernels {
            if k == 0 {
                return Err(Error::invalid("kernel sizes must be at least 1"));
            }
            let ks = KernelSpec::new(k);
            let identical =
                morphology::open(&mask, ks, MorphMode::Naive) == morphology::open(&mask, ks, MorphMode::Separable);
            if !identical {
                return Err(Error::invalid(format!(
                    "naive and separable opening differ for {height}x{width}, k = {k}"
                )));
            }
            rows.push(BenchRow {
                height,
                width,
                k,
                reps,
                naive_ms: time_open(&mask, ks, MorphMode::Naive, reps),
                separable_ms: time_open(&mask, ks, MorphMode::Separable, reps),
                identical,
            });
        }
    }
    Ok(rows)
}

pub fn render_bench(rows: &[BenchRow]) -> String {
    let mut out = String::from(BenchRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn write_bench(rows: &[BenchRow], config: &RunConfig) -> Result<PathBuf> {
    config.prepare_output_dir()?;
    let path = config.output_dir.join("bench.csv");
    let text = render_bench(rows);
    write_atomic(&path, |w| w.write_all(text.as_bytes()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{mask_combine, CombineOp};

    fn config_in(dir: &Path) -> RunConfig {
        RunConfig {
            output_dir: dir.to_path_buf(),
            jobs: Some(2),
            ..RunConfig::default()
        }
    }

    #[test]
    fn stratify_empty_mask() {
        let dir = tempfile::tempdir().unwrap();
        let mask_path = dir.path().join("blank.png");
        raster::save_mask(&BinaryMask::zeros(8, 6), &mask_path).unwrap();
        let manifest = DatasetManifest::from_masks(&[mask_path]).unwrap();
        let out = dir.path().join("out");
        let summaries = cmd_stratify(&manifest, &config_in(&out)).unwrap();
        assert_eq!(summaries[0].raw, 0);
        for n in ["thin", "stem", "raw"] {
            assert!(raster::load_mask(out.join(format!("blank_{n}.png")))
                .unwrap()
                .is_blank());
        }
        assert!(out.join("run.cfg").is_file());
        let csv = std::fs::read_to_string(out.join(STRATA_SUMMARY_FILE)).unwrap();
        assert_eq!(
            csv,
            "id,width,height,raw,thin,stem,stratum_0,stratum_1\nblank,8,6,0,0,0,0,0\n"
        );
    }

    #[test]
    fn multi_threshold_ladder_writes_strata() {
        let dir = tempfile::tempdir().unwrap();
        let mask = geometry::random_vessel_mask(64, 48, 8, 3);
        let mask_path = dir.path().join("v.png");
        raster::save_mask(&mask, &mask_path).unwrap();
        let manifest = DatasetManifest::from_masks(&[mask_path]).unwrap();
        let out = dir.path().join("out");
        let mut cfg = config_in(&out);
        cfg.ladder = "2,4".parse().unwrap();
        let s = cmd_stratify(&manifest, &cfg).unwrap();
        assert_eq!(s[0].strata.len(), 3);
        assert_eq!(s[0].strata.iter().sum::<usize>(), s[0].raw);
        let union = (0..3)
            .map(|c| raster::load_mask(out.join(format!("v_stratum{c}.png"))).unwrap())
            .reduce(|a, b| mask_combine(CombineOp::Or, &a, &b).unwrap())
            .unwrap();
        assert_eq!(union, mask);
    }

    #[test]
    fn fuse_threshold_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        raster::save_gray(&GrayImage::new(3, 1, vec![0, 1, 200]).unwrap(), &p).unwrap();
        let mut cfg = config_in(&dir.path().join("o"));
        cfg.fuse_threshold = 0;
        let (fused, soft) = cmd_fuse(std::slice::from_ref(&p), "fused", &cfg).unwrap();
        assert_eq!(fused.as_slice(), &[0, 1, 1]);
        assert_eq!(soft.as_slice(), &[0, 1, 200]);
        assert!(cmd_fuse(&[], "fused", &cfg).is_err());
    }

    #[test]
    fn synth_vertical_width3() {
        let dir = tempfile::tempdir().unwrap();
        let spec = TubeSpec::centered(Orientation::Vertical, 3, 32, 2);
        let out = cmd_synth(&spec, 8, &config_in(dir.path())).unwrap();
        assert_eq!(out.diameter, 2);
        let text = std::fs::read_to_string(&out.sidecar_path).unwrap();
        assert!(text.contains("frechet_diameter=2\n"));
        assert!(text.contains("\n2,3,false,true,true\n"), "{text}");
        assert!(text.contains("\n3,4,true,false,true\n"), "{text}");
        assert!(text.contains("\n1,2,false,true,true\n"), "{text}");
    }

    #[test]
    fn bench_degenerate_kernel() {
        let rows = bench_opening(&[(40, 50)], &[1, 5], 1, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.identical));
        assert!(render_bench(&rows).starts_with(BenchRow::HEADER));
        assert!(bench_opening(&[(4, 4)], &[3], 0, 1).is_err());
    }
}
