//! Vessel diameter as a discrete Fréchet distance between border curves under
//! the Chebyshev pixel metric, and synthetic straight tubes whose borders are
//! known by construction.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::morphology::{open, KernelSpec, MorphMode};
use crate::raster::{BinaryMask, PixelCoord};

/// `max(|Δrow|, |Δcol|)`
pub fn chebyshev(p: PixelCoord, q: PixelCoord) -> usize {
    p.row.abs_diff(q.row).max(p.col.abs_diff(q.col))
}

/// Ordered, nonempty pixel sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolylineCurve(Vec<PixelCoord>);

impl PolylineCurve {
    pub fn new(points: Vec<PixelCoord>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("curve must contain at least one point"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[PixelCoord] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> PixelCoord {
        self.0[0]
    }

    pub fn last(&self) -> PixelCoord {
        self.0[self.0.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }
}

/// Discrete Fréchet distance with the Chebyshev point metric.
///
/// Coupling table `ca(i, j) = max(δ(a_i, b_j), min(ca(i-1, j), ca(i-1, j-1), ca(i, j-1)))`,
/// filled row by row in O(|a|·|b|) time and O(|b|) scratch space.
pub fn discrete_frechet(a: &PolylineCurve, b: &PolylineCurve) -> usize {
    let (a, b) = (a.points(), b.points());
    let mut prev = vec![0usize; b.len()];
    let mut cur = vec![0usize; b.len()];
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            let d = chebyshev(p, q);
            let reach = match (i, j) {
                (0, 0) => 0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = d.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len() - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
    /// Running down-right at 45°.
    Diagonal45,
}

impl Orientation {
    pub fn name(self) -> &'static str {
        match self {
            Orientation::Horizontal => "horizontal",
            Orientation::Vertical => "vertical",
            Orientation::Diagonal45 => "diagonal-45",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" => Ok(Orientation::Horizontal),
            "vertical" => Ok(Orientation::Vertical),
            "diagonal-45" | "diagonal" => Ok(Orientation::Diagonal45),
            _ => Err(Error::invalid(format!("unknown orientation {s:?}"))),
        }
    }
}

/// A straight synthetic vessel on an otherwise empty canvas.
///
/// Horizontal and vertical tubes are `width × length` rectangles. A
/// diagonal tube is the band `{(r0 + t + o, c0 + t) : t < length, o < width}`,
/// so every row and every column crosses it in `width` pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TubeSpec {
    pub orientation: Orientation,
    pub width: usize,
    pub length: usize,
    pub origin: PixelCoord,
    /// `(height, width)` of the canvas.
    pub canvas: (usize, usize),
}

impl TubeSpec {
    /// Tube placed at `(margin, margin)` on the smallest canvas leaving
    /// `margin` background pixels on every side.
    pub fn centered(orientation: Orientation, width: usize, length: usize, margin: usize) -> Self {
        let (rows, cols) = Self::extent(orientation, width, length);
        Self {
            orientation,
            width,
            length,
            origin: PixelCoord::new(margin, margin),
            canvas: (rows + 2 * margin, cols + 2 * margin),
        }
    }

    fn extent(orientation: Orientation, width: usize, length: usize) -> (usize, usize) {
        match orientation {
            Orientation::Horizontal => (width, length),
            Orientation::Vertical => (length, width),
            Orientation::Diagonal45 => (length + width - 1, length),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 1 {
            return Err(Error::invalid("tube width must be at least 1"));
        }
        if self.length < self.width {
            return Err(Error::invalid(format!(
                "tube length {} is shorter than its width {}",
                self.length, self.width
            )));
        }
        let (rows, cols) = Self::extent(self.orientation, self.width, self.length);
        if self.origin.row + rows > self.canvas.0 || self.origin.col + cols > self.canvas.1 {
            return Err(Error::invalid(format!(
                "tube of {rows}x{cols} pixels at ({}, {}) does not fit a {}x{} canvas",
                self.origin.row, self.origin.col, self.canvas.0, self.canvas.1
            )));
        }
        Ok(())
    }
}

/// Filled tube mask plus its two opposing foreground border curves, both
/// ordered from the same tip.
#[derive(Clone, Debug)]
pub struct Tube {
    pub mask: BinaryMask,
    pub border_a: PolylineCurve,
    pub border_b: PolylineCurve,
}

pub fn make_tube(spec: &TubeSpec) -> Result<Tube> {
    spec.validate()?;
    let (r0, c0) = (spec.origin.row, spec.origin.col);
    let (w, l) = (spec.width, spec.length);
    let (h_canvas, w_canvas) = spec.canvas;
    let mut mask = BinaryMask::zeros(w_canvas, h_canvas);
    let (a, b): (Vec<PixelCoord>, Vec<PixelCoord>) = match spec.orientation {
        Orientation::Horizontal => {
            for r in r0..r0 + w {
                for c in c0..c0 + l {
                    mask.set(r, c, true);
                }
            }
            (0..l)
                .map(|t| (PixelCoord::new(r0, c0 + t), PixelCoord::new(r0 + w - 1, c0 + t)))
                .unzip()
        }
        Orientation::Vertical => {
            for r in r0..r0 + l {
                for c in c0..c0 + w {
                    mask.set(r, c, true);
                }
            }
            (0..l)
                .map(|t| (PixelCoord::new(r0 + t, c0), PixelCoord::new(r0 + t, c0 + w - 1)))
                .unzip()
        }
        Orientation::Diagonal45 => {
            for t in 0..l {
                for o in 0..w {
                    mask.set(r0 + t + o, c0 + t, true);
                }
            }
            (0..l)
                .map(|t| (PixelCoord::new(r0 + t, c0 + t), PixelCoord::new(r0 + t + w - 1, c0 + t)))
                .unzip()
        }
    };
    Ok(Tube {
        mask,
        border_a: PolylineCurve::new(a)?,
        border_b: PolylineCurve::new(b)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ErasureReport {
    /// Fréchet distance between the generated borders.
    pub diameter: usize,
    /// `open(mask, d + 1)` is empty.
    pub erased: bool,
    /// `open(mask, d + 1)` equals the mask.
    pub survived_intact: bool,
}

/// Opens the tube with a `(d + 1) × (d + 1)` kernel and reports what is left.
pub fn verify_erasure(spec: &TubeSpec, d: usize) -> Result<ErasureReport> {
    verify_erasure_with(spec, d, MorphMode::Separable)
}

pub fn verify_erasure_with(spec: &TubeSpec, d: usize, mode: MorphMode) -> Result<ErasureReport> {
    if d < 1 {
        return Err(Error::invalid("diameter threshold must be at least 1"));
    }
    let tube = make_tube(spec)?;
    let opened = open(&tube.mask, KernelSpec::for_diameter(d), mode);
    Ok(ErasureReport {
        diameter: discrete_frechet(&tube.border_a, &tube.border_b),
        erased: opened.is_blank(),
        survived_intact: opened == tube.mask,
    })
}

/// Seeded, vessel-like test mask: random branching polylines stamped with
/// square brushes of 1 to `max_width` pixels. Same seed, same mask.
pub fn random_vessel_mask(width: usize, height: usize, max_width: usize, seed: u64) -> BinaryMask {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut mask = BinaryMask::zeros(width, height);
    let max_width = max_width.max(1);
    let stamp = |mask: &mut BinaryMask, r: f64, c: f64, side: usize| {
        let r0 = r.round() as isize - (side as isize - 1) / 2;
        let c0 = c.round() as isize - (side as isize - 1) / 2;
        for dr in 0..side as isize {
            for dc in 0..side as isize {
                let (rr, cc) = (r0 + dr, c0 + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < height && (cc as usize) < width {
                    mask.set(rr as usize, cc as usize, true);
                }
            }
        }
    };
    let trunks = 2 + (width * height) / 40_000;
    for _ in 0..trunks {
        // (row, col, heading, brush side, remaining steps)
        let mut stack = vec![(
            rng.random_range(0.0..height as f64),
            rng.random_range(0.0..width as f64),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(1..=max_width),
            rng.random_range(width.min(height) / 4 + 1..width.min(height) + 2),
        )];
        while let Some((mut r, mut c, mut heading, side, steps)) = stack.pop() {
            for step in 0..steps {
                stamp(&mut mask, r, c, side);
                heading += rng.random_range(-0.15..0.15);
                r += heading.sin();
                c += heading.cos();
                if r < -1.0 || c < -1.0 || r > height as f64 || c > width as f64 {
                    break;
                }
                if side > 1 && step > 8 && rng.random_range(0..60) == 0 {
                    let turn = if rng.random_bool(0.5) { 0.7 } else { -0.7 };
                    stack.push((r, c, heading + turn, rng.random_range(1..side), (steps - step) / 2 + 1));
                }
            }
        }
    }
    mask
}
