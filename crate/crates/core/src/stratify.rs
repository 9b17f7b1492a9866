//! Hierarchical thickness stratification and prediction fusion.
//!
//! A diameter threshold `d` defines the semi-limited mask `open(y, d + 1)`,
//! which keeps only vessels thicker than `d`. An increasing ladder
//! `d_1 < … < d_{n-1}` yields a monotone chain of such masks; consecutive
//! differences give `n` disjoint strata whose union is `y`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::morphology::{open, KernelSpec, MorphMode};
use crate::raster::{ensure_same_dims, mask_combine, BinaryMask, CombineOp, GrayImage};

/// Default diameter threshold separating thin vessels from stems (3×3 opening).
pub const DEFAULT_D1: usize = 2;

/// Default binarization threshold for fusion; values strictly above it are
/// foreground.
pub const DEFAULT_FUSE_THRESHOLD: u8 = 127;

/// Strictly increasing diameter thresholds, each at least 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThresholdLadder(Vec<usize>);

impl ThresholdLadder {
    pub fn new(thresholds: Vec<usize>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::invalid("threshold ladder must not be empty"));
        }
        if thresholds[0] < 1 {
            return Err(Error::invalid("ladder thresholds must be at least 1"));
        }
        if let Some(w) = thresholds.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "ladder must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self(thresholds))
    }

    pub fn single(d1: usize) -> Result<Self> {
        Self::new(vec![d1])
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.0
    }

    /// Number of strata produced, `thresholds + 1`.
    pub fn strata_count(&self) -> usize {
        self.0.len() + 1
    }
}

impl Default for ThresholdLadder {
    fn default() -> Self {
        Self(vec![DEFAULT_D1])
    }
}

impl fmt::Display for ThresholdLadder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for ThresholdLadder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad ladder entry {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// Disjoint thickness strata, thinnest first, whose union is the source mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrataStack {
    strata: Vec<BinaryMask>,
    source: BinaryMask,
    ladder: ThresholdLadder,
}

impl StrataStack {
    pub fn strata(&self) -> &[BinaryMask] {
        &self.strata
    }

    pub fn source(&self) -> &BinaryMask {
        &self.source
    }

    pub fn ladder(&self) -> &ThresholdLadder {
        &self.ladder
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    /// Checks disjointness and exact coverage of the source mask.
    pub fn verify_partition(&self) -> bool {
        let n = self.source.as_slice().len();
        (0..n).all(|i| {
            let sum: u32 = self.strata.iter().map(|s| s.as_slice()[i] as u32).sum();
            sum == self.source.as_slice()[i] as u32
        })
    }
}

/// The thin/stem/raw training target. `thin` and `stem` partition `raw`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelStack {
    channels: [BinaryMask; 3],
}

impl ChannelStack {
    pub const THIN: usize = 0;
    pub const STEM: usize = 1;
    pub const RAW: usize = 2;
    pub const NAMES: [&'static str; 3] = ["thin", "stem", "raw"];

    pub fn thin(&self) -> &BinaryMask {
        &self.channels[Self::THIN]
    }

    pub fn stem(&self) -> &BinaryMask {
        &self.channels[Self::STEM]
    }

    pub fn raw(&self) -> &BinaryMask {
        &self.channels[Self::RAW]
    }

    pub fn channels(&self) -> &[BinaryMask] {
        &self.channels
    }
}

/// `y` for `d = 0`, otherwise `open(y, d + 1)`.
pub fn semi_limited_mask(y: &BinaryMask, d: usize) -> BinaryMask {
    semi_limited_mask_with(y, d, MorphMode::Separable)
}

pub fn semi_limited_mask_with(y: &BinaryMask, d: usize, mode: MorphMode) -> BinaryMask {
    if d == 0 {
        return y.clone();
    }
    open(y, KernelSpec::for_diameter(d), mode)
}

/// Splits `y` into `ladder.strata_count()` disjoint strata; stratum `c` holds
/// the pixels of `M(d_c)` not in `M(d_{c+1})`, with `M(d_0) = y` and
/// `M(d_n) = ∅`.
pub fn stratify(y: &BinaryMask, ladder: &ThresholdLadder) -> StrataStack {
    stratify_with(y, ladder, MorphMode::Separable)
}

pub fn stratify_with(y: &BinaryMask, ladder: &ThresholdLadder, mode: MorphMode) -> StrataStack {
    let (w, h) = y.dims();
    let mut chain = Vec::with_capacity(ladder.strata_count() + 1);
    chain.push(y.clone());
    for &d in ladder.thresholds() {
        chain.push(semi_limited_mask_with(y, d, mode));
    }
    chain.push(BinaryMask::zeros(w, h));

    let strata = chain
        .windows(2)
        .map(|pair| mask_combine(CombineOp::Subtract, &pair[0], &pair[1]).expect("same dims"))
        .collect();
    StrataStack {
        strata,
        source: y.clone(),
        ladder: ladder.clone(),
    }
}

/// thin = `y − open(y, d1 + 1)`, stem = `open(y, d1 + 1)`, raw = `y`.
pub fn stack3(y: &BinaryMask, d1: usize) -> Result<ChannelStack> {
    if d1 < 1 {
        return Err(Error::invalid("d1 must be at least 1"));
    }
    let stem = semi_limited_mask(y, d1);
    let thin = mask_combine(CombineOp::Subtract, y, &stem)?;
    Ok(ChannelStack {
        channels: [thin, stem, y.clone()],
    })
}

fn check_maps(maps: &[GrayImage]) -> Result<()> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("fusion needs at least one map"))?;
    for m in &maps[1..] {
        ensure_same_dims(first.dims(), m.dims())?;
    }
    Ok(())
}

/// Binarizes each map at `value > threshold` and ORs the results.
pub fn fuse(maps: &[GrayImage], threshold: u8) -> Result<BinaryMask> {
    check_maps(maps)?;
    let (w, h) = maps[0].dims();
    let mut out = vec![0u8; w * h];
    for m in maps {
        for (o, &v) in out.iter_mut().zip(m.as_slice()) {
            *o |= (v > threshold) as u8;
        }
    }
    Ok(BinaryMask::from_raw_unchecked(w, h, out))
}

/// Pixel-wise maximum; thresholding it at `t` equals `fuse(maps, t)`.
pub fn fuse_soft(maps: &[GrayImage]) -> Result<GrayImage> {
    check_maps(maps)?;
    let (w, h) = maps[0].dims();
    let mut out = maps[0].as_slice().to_vec();
    for m in &maps[1..] {
        for (o, &v) in out.iter_mut().zip(m.as_slice()) {
            *o = (*o).max(v);
        }
    }
    GrayImage::new(w, h, out)
}
