//! Raster types, lossless PNG/PNM I/O, mask algebra and connected-components
//! labeling.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Row/column pixel position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Row-major bitmap whose elements are exactly 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{} (w x h)", self.width, self.height)?;
        if self.width * self.height <= 4096 {
            for row in self.data.chunks(self.width) {
                let line: String = row.iter().map(|&v| if v == 1 { '#' } else { '.' }).collect();
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::invalid(format!(
            "data length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

impl BinaryMask {
    /// Builds a mask from row-major 0/1 data.
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::invalid(format!(
                "mask element {pos} is {}, expected 0 or 1",
                data[pos]
            )));
        }
        Ok(Self { width, height, data })
    }

    /// All-background mask. Panics on a zero dimension.
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    /// Mask whose pixel `(row, col)` is `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(width, height);
        for r in 0..height {
            for c in 0..width {
                m.data[r * width + c] = f(r, c) as u8;
            }
        }
        m
    }

    /// Nonzero gray values become foreground.
    pub fn from_nonzero(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| (v != 0) as u8).collect(),
        }
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|&v| v <= 1));
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// True when no pixel is foreground.
    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    /// 1 → 255, 0 → 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v * 255).collect(),
        }
    }
}

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    /// Foreground where the value is strictly greater than `threshold`.
    pub fn above(&self, threshold: u8) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| (v > threshold) as u8).collect(),
        }
    }
}

pub(crate) fn ensure_same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineOp {
    And,
    Or,
    /// `a AND NOT b`
    Subtract,
}

/// Pixel-wise boolean combination of two equally sized masks.
pub fn mask_combine(op: CombineOp, a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    ensure_same_dims(a.dims(), b.dims())?;
    let f: fn(u8, u8) -> u8 = match op {
        CombineOp::And => |x, y| x & y,
        CombineOp::Or => |x, y| x | y,
        CombineOp::Subtract => |x, y| x & (y ^ 1),
    };
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Ok(BinaryMask::from_raw_unchecked(a.width, a.height, data))
}

/// Per-pixel component ids; 0 is background, components are numbered
/// `1..=count` in raster order of their first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl Labeling {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// 8-connected foreground labeling (two-pass union-find).
pub fn connected_components(mask: &BinaryMask) -> Labeling {
    let (w, h) = mask.dims();
    let mut prov = vec![0u32; w * h];
    // parent[0] is the background sentinel
    let mut parent: Vec<u32> = vec![0];

    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let mut current = 0u32;
            let visit = |nr: usize, nc: usize, current: &mut u32, parent: &mut Vec<u32>| {
                let l = prov[nr * w + nc];
                if l != 0 {
                    *current = if *current == 0 {
                        find(parent, l)
                    } else {
                        union(parent, *current, l)
                    };
                }
            };
            if c > 0 {
                visit(r, c - 1, &mut current, &mut parent);
            }
            if r > 0 {
                if c > 0 {
                    visit(r - 1, c - 1, &mut current, &mut parent);
                }
                visit(r - 1, c, &mut current, &mut parent);
                if c + 1 < w {
                    visit(r - 1, c + 1, &mut current, &mut parent);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            prov[r * w + c] = current;
        }
    }

    let mut remap = vec![0u32; parent.len()];
    let mut count = 0u32;
    for l in prov.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
        }
        *l = remap[root];
    }

    Labeling {
        width: w,
        height: h,
        labels: prov,
        count: count as usize,
    }
}

fn decode(path: &Path) -> Result<GrayImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("unsupported format {other:?}; convert to PNG or PNM first"),
            })
        }
        None => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: "unrecognized image format; expected PNG or PNM".into(),
            })
        }
    }
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.into(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.into_raw().chunks_exact(2).map(|p| p[0]).collect(),
        DynamicImage::ImageRgb8(buf) => rgb_to_gray(buf.as_raw(), 3),
        DynamicImage::ImageRgba8(buf) => rgb_to_gray(buf.as_raw(), 4),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: "unsupported bit depth: 16-bit samples, expected 8-bit".into(),
            })
        }
        other => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("unsupported sample type {:?}", other.color()),
            })
        }
    };
    GrayImage::new(w, h, data).map_err(|e| Error::Decode {
        path: path.into(),
        reason: e.to_string(),
    })
}

// Equal channels pass through exactly; true color falls back to integer
// Rec. 601 luma.
fn rgb_to_gray(raw: &[u8], stride: usize) -> Vec<u8> {
    raw.chunks_exact(stride)
        .map(|p| {
            let (r, g, b) = (p[0] as u32, p[1] as u32, p[2] as u32);
            if r == g && g == b {
                p[0]
            } else {
                ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8
            }
        })
        .collect()
}

/// Loads an 8-bit PNG or PNM image with exact pixel values.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode(path.as_ref())
}

/// Loads an image and maps 0 → 0, any nonzero value → 1.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode(path.as_ref()).map(|g| BinaryMask::from_nonzero(&g))
}

/// Writes `path` through a temporary file in the same directory, then
/// renames it into place.
pub(crate) fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".vstrata-")
        .tempfile_in(dir)
        .map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_png(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    write_atomic(path, |w| {
        let mut enc = png::Encoder::new(w, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(std::io::Error::other)?;
        writer.write_image_data(data).map_err(std::io::Error::other)?;
        writer.finish().map_err(std::io::Error::other)
    })
}

/// Writes an 8-bit grayscale PNG with 1 → 255.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_png(path.as_ref(), mask.width, mask.height, &mask.to_gray().data)
}

/// Writes an 8-bit grayscale PNG.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_png(path.as_ref(), img.width, img.height, &img.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(w: usize, h: usize, bits: &[u8]) -> BinaryMask {
        BinaryMask::new(w, h, bits.to_vec()).unwrap()
    }

    fn write_pgm(path: &Path, w: usize, h: usize, bytes: &[u8]) {
        let mut buf = format!("P5\n{w} {h}\n255\n").into_bytes();
        buf.extend_from_slice(bytes);
        std::fs::write(path, buf).unwrap();
    }

    #[test]
    fn rejects_non_binary_data() {
        assert!(BinaryMask::new(2, 1, vec![0, 2]).is_err());
        assert!(BinaryMask::new(0, 1, vec![]).is_err());
        assert!(BinaryMask::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn pgm_binary_and_gray_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&p, 2, 2, &[0, 255, 127, 1]);
        assert_eq!(load_mask(&p).unwrap().as_slice(), &[0, 1, 1, 1]);
        assert_eq!(load_gray(&p).unwrap().as_slice(), &[0, 255, 127, 1]);
    }

    #[test]
    fn ascii_pgm_and_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let p2 = dir.path().join("a.pgm");
        std::fs::write(&p2, "P2\n# comment\n3 1\n255\n0 10 255\n").unwrap();
        assert_eq!(load_gray(&p2).unwrap().as_slice(), &[0, 10, 255]);

        let p6 = dir.path().join("b.ppm");
        let mut buf = b"P6\n2 1\n255\n".to_vec();
        buf.extend_from_slice(&[7, 7, 7, 255, 0, 0]);
        std::fs::write(&p6, buf).unwrap();
        // gray triple is exact, pure red goes through luma
        assert_eq!(load_gray(&p6).unwrap().as_slice(), &[7, 76]);
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let f = File::create(&p).unwrap();
        let mut enc = png::Encoder::new(f, 2, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0, 0, 255, 255]).unwrap();
        w.finish().unwrap();
        let err = load_gray(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported bit depth"), "{err}");
    }

    #[test]
    fn missing_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        let err = load_gray(&missing).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("nope.png"));

        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"not an image at all").unwrap();
        assert!(matches!(load_gray(&junk), Err(Error::Unsupported { .. })));

        let truncated = dir.path().join("trunc.png");
        save_mask(&BinaryMask::zeros(16, 16), &truncated).unwrap();
        let bytes = std::fs::read(&truncated).unwrap();
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_gray(&truncated), Err(Error::Decode { .. })));
    }

    #[test]
    fn save_encodes_foreground_as_255() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        save_mask(&mask(2, 1, &[0, 1]), &p).unwrap();
        assert_eq!(load_gray(&p).unwrap().as_slice(), &[0, 255]);
    }

    #[test]
    fn save_to_unwritable_path_fails() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("no/such/dir/m.png");
        assert!(matches!(save_mask(&BinaryMask::zeros(1, 1), &p), Err(Error::Io { .. })));
    }

    #[test]
    fn combine_examples() {
        let a = mask(3, 1, &[1, 1, 0]);
        let b = mask(3, 1, &[0, 1, 0]);
        assert_eq!(
            mask_combine(CombineOp::Subtract, &a, &b).unwrap().as_slice(),
            &[1, 0, 0]
        );
        let a = mask(2, 1, &[1, 0]);
        let z = mask(2, 1, &[0, 0]);
        assert_eq!(mask_combine(CombineOp::Or, &a, &z).unwrap(), a);
        assert_eq!(mask_combine(CombineOp::And, &a, &a).unwrap(), a);
        assert!(matches!(
            mask_combine(CombineOp::Or, &a, &BinaryMask::zeros(1, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn components_basic() {
        let diag = mask(2, 2, &[1, 0, 0, 1]);
        assert_eq!(connected_components(&diag).count(), 1);
        let split = mask(1, 3, &[1, 0, 1]);
        let lab = connected_components(&split);
        assert_eq!(lab.count(), 2);
        assert_eq!(lab.as_slice(), &[1, 0, 2]);
    }

    #[test]
    fn components_merge_late() {
        // a U shape: both arms get provisional labels and merge on the last row
        let u = mask(3, 3, &[1, 0, 1, 1, 0, 1, 1, 1, 1]);
        let lab = connected_components(&u);
        assert_eq!(lab.count(), 1);
        assert!(lab.as_slice().iter().all(|&l| l <= 1));
    }

    fn flood_fill_count(m: &BinaryMask) -> usize {
        let (w, h) = m.dims();
        let mut seen = vec![false; w * h];
        let mut count = 0;
        for start in 0..w * h {
            if seen[start] || m.as_slice()[start] == 0 {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (r, c) = ((i / w) as isize, (i % w) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                            continue;
                        }
                        let j = nr as usize * w + nc as usize;
                        if !seen[j] && m.as_slice()[j] == 1 {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    fn arb_mask(max: usize) -> impl Strategy<Value = BinaryMask> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            prop::collection::vec(0u8..=1, w * h).prop_map(move |d| BinaryMask::new(w, h, d).unwrap())
        })
    }

    fn arb_pair(max: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask, BinaryMask)> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            let v = || prop::collection::vec(0u8..=1, w * h);
            (v(), v(), v()).prop_map(move |(a, b, c)| {
                (
                    BinaryMask::new(w, h, a).unwrap(),
                    BinaryMask::new(w, h, b).unwrap(),
                    BinaryMask::new(w, h, c).unwrap(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn components_match_flood_fill(m in arb_mask(32)) {
            let lab = connected_components(&m);
            prop_assert_eq!(lab.count(), flood_fill_count(&m));
            for (l, v) in lab.as_slice().iter().zip(m.as_slice()) {
                prop_assert_eq!(*l == 0, *v == 0);
            }
        }

        #[test]
        fn boolean_laws((a, b, c) in arb_pair(12)) {
            use CombineOp::*;
            let op = |o, x: &BinaryMask, y: &BinaryMask| mask_combine(o, x, y).unwrap();
            for o in [And, Or] {
                prop_assert_eq!(op(o, &a, &b), op(o, &b, &a));
                prop_assert_eq!(op(o, &op(o, &a, &b), &c), op(o, &a, &op(o, &b, &c)));
            }
            prop_assert!(op(Subtract, &a, &a).is_blank());
            prop_assert_eq!(op(And, &a, &a), a.clone());
        }

        #[test]
        fn mask_round_trip(m in arb_mask(40)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.png");
            save_mask(&m, &p).unwrap();
            prop_assert_eq!(load_mask(&p).unwrap(), m);
        }

        #[test]
        fn gray_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let data: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let img = GrayImage::new(w, h, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("g.png");
            save_gray(&img, &p).unwrap();
            prop_assert_eq!(load_gray(&p).unwrap(), img);
        }
    }
}
