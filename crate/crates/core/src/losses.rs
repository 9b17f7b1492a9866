//! Objective evaluators for the two-stream segmentation model.
//!
//! These are pure functions over supplied prediction arrays and discriminator
//! scores. No network, optimizer or training loop lives here.
//!
//! The generator loss is a weighted sum of *unsquared* Frobenius norms of the
//! per-stratum residuals, `Σ_c w_c ‖P_c − Y_c‖_F`. The adversarial term uses
//! natural logs and arithmetic means over the supplied batches, with scores
//! clamped to `[SCORE_EPS, 1 − SCORE_EPS]`. The L1 term is a sum, not a mean.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, GrayImage};

/// Clamp bound applied to discriminator scores before taking logs.
pub const SCORE_EPS: f64 = 1e-7;

/// Default weight of the L1 term in the composite objective.
pub const DEFAULT_LAMBDA: f64 = 100.0;

/// Row-major real-valued `width × height` map.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(Error::invalid(format!(
                "real map of {width}x{height} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Mask values as 0.0 / 1.0.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let (width, height) = mask.dims();
        Self {
            width,
            height,
            data: mask.as_slice().iter().map(|&v| v as f64).collect(),
        }
    }

    /// Gray values scaled to `[0, 1]` by dividing by 255.
    pub fn from_gray(img: &GrayImage) -> Self {
        let (width, height) = img.dims();
        Self {
            width,
            height,
            data: img.as_slice().iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Per-stratum prediction channels sharing one size.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionStack {
    channels: Vec<RealMap>,
}

impl PredictionStack {
    pub fn new(channels: Vec<RealMap>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::invalid("prediction stack needs at least one channel"))?;
        for c in &channels[1..] {
            ensure_same_dims(first.dims(), c.dims())?;
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[RealMap] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [RealMap] {
        &mut self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }
}

/// Per-stratum weights and the L1 regularization factor.
#[derive(Clone, Debug, PartialEq)]
pub struct LossWeights {
    strata: Vec<f64>,
    lambda: f64,
}

impl LossWeights {
    pub fn new(strata: Vec<f64>, lambda: f64) -> Result<Self> {
        if let Some(w) = strata.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!(
                "stratum weight {w} must be a non-negative number"
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda {lambda} must be a non-negative number")));
        }
        Ok(Self { strata, lambda })
    }

    pub fn strata(&self) -> &[f64] {
        &self.strata
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Parses `"w0,w1,w2"`.
    pub fn parse_strata(s: &str) -> Result<Vec<f64>> {
        s.split(',')
            .map(|p| f64::from_str(p.trim()).map_err(|_| Error::invalid(format!("bad weight {p:?}"))))
            .collect()
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            strata: vec![1.0, 1.0, 1.0],
            lambda: DEFAULT_LAMBDA,
        }
    }
}

fn check_stack(pred: &PredictionStack, target: &[BinaryMask]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "prediction has {} channels, target has {}",
            pred.len(),
            target.len()
        )));
    }
    for (p, t) in pred.channels().iter().zip(target) {
        ensure_same_dims(p.dims(), t.dims())?;
    }
    Ok(())
}

fn residual_norm(pred: &RealMap, target: &BinaryMask) -> f64 {
    pred.data
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| {
            let r = p - t as f64;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// `Σ_c w_c ‖pred_c − target_c‖_F`
pub fn loss_gen(pred: &PredictionStack, target: &[BinaryMask], weights: &LossWeights) -> Result<f64> {
    check_stack(pred, target)?;
    if weights.strata.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} channels",
            weights.strata.len(),
            pred.len()
        )));
    }
    Ok(pred
        .channels()
        .iter()
        .zip(target)
        .zip(&weights.strata)
        .map(|((p, t), &w)| w * residual_norm(p, t))
        .sum())
}

/// Gradient of [`loss_gen`] with respect to the predictions,
/// `w_c R_c / ‖R_c‖_F` per channel. A channel whose residual is exactly zero
/// gets a zero gradient.
pub fn grad_loss_gen(pred: &PredictionStack, target: &[BinaryMask], weights: &LossWeights) -> Result<PredictionStack> {
    check_stack(pred, target)?;
    if weights.strata.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} channels",
            weights.strata.len(),
            pred.len()
        )));
    }
    let channels = pred
        .channels()
        .iter()
        .zip(target)
        .zip(&weights.strata)
        .map(|((p, t), &w)| {
            let norm = residual_norm(p, t);
            let (width, height) = p.dims();
            if norm == 0.0 {
                return RealMap::zeros(width, height);
            }
            let data = p
                .data
                .iter()
                .zip(t.as_slice())
                .map(|(&v, &y)| w * (v - y as f64) / norm)
                .collect();
            RealMap { width, height, data }
        })
        .collect();
    Ok(PredictionStack { channels })
}

/// `‖pred − target‖_F` for the thin-vessel stream.
pub fn loss_thin(pred: &RealMap, target: &BinaryMask) -> Result<f64> {
    ensure_same_dims(pred.dims(), target.dims())?;
    Ok(residual_norm(pred, target))
}

fn clamp_scores(scores: &[f64], what: &str) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid(format!("{what} scores must not be empty")));
    }
    scores
        .iter()
        .map(|&s| {
            if (0.0..=1.0).contains(&s) {
                Ok(s.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
            } else {
                Err(Error::invalid(format!("{what} score {s} outside [0, 1]")))
            }
        })
        .collect()
}

/// `mean(ln D_real) + mean(ln(1 − D_fake))`. Always `<= 0`.
pub fn cgan_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    let real = clamp_scores(d_real, "real")?;
    let fake = clamp_scores(d_fake, "fake")?;
    let mean = |v: &[f64], f: fn(f64) -> f64| v.iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64;
    Ok(mean(&real, f64::ln) + mean(&fake, |x| (1.0 - x).ln()))
}

/// Sum of absolute residuals over every element of every channel.
pub fn l1_residual(pred: &PredictionStack, target: &[BinaryMask]) -> Result<f64> {
    check_stack(pred, target)?;
    Ok(pred.channels().iter().zip(target).map(|(p, t)| l1_map(p, t)).sum())
}

/// Single-map form of [`l1_residual`].
pub fn l1_residual_map(pred: &RealMap, target: &BinaryMask) -> Result<f64> {
    ensure_same_dims(pred.dims(), target.dims())?;
    Ok(l1_map(pred, target))
}

fn l1_map(pred: &RealMap, target: &BinaryMask) -> f64 {
    pred.data
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| (p - t as f64).abs())
        .sum()
}

/// `cgan + λ · l1`
pub fn composite_objective(cgan: f64, l1: f64, weights: &LossWeights) -> f64 {
    cgan + weights.lambda * l1
}
