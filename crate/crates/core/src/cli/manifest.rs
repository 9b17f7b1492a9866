//! Dataset manifests: pairing fundus images with ground-truth masks (and
//! optional FOV masks) by the numeric id conventions of DRIVE, STARE and
//! CHASE_DB1, or by user-supplied `*` patterns.
//!
//! All files must already be PNG or PNM. The original datasets ship GIF, TIFF,
//! JPEG and gzipped PPM files; convert them once before scanning.
//!
//! Expected layouts (relative to the dataset root):
//!
//! | kind      | images                              | masks                        | FOV                               |
//! |-----------|-------------------------------------|------------------------------|-----------------------------------|
//! | drive     | `images/<id>_training`, `_test`     | `1st_manual/<id>_manual1`    | `mask/<id>_training_mask`, `_test_mask` |
//! | stare     | `images/<id>`                       | `<annotator-dir>/<id>[.tag]` | none                              |
//! | chasedb1  | `Image_<id>`                        | `Image_<id>_1stHO`           | none                              |
//! | custom    | `--image-glob`                      | `--mask-glob`                | `--fov-glob`                      |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// File extensions the raster loaders accept.
pub const SUPPORTED_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];
const CONVERTIBLE_EXTENSIONS: [&str; 6] = ["gif", "tif", "tiff", "jpg", "jpeg", "gz"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Drive,
    Stare,
    Chasedb1,
    Custom,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Drive => "drive",
            DatasetKind::Stare => "stare",
            DatasetKind::Chasedb1 => "chasedb1",
            DatasetKind::Custom => "custom",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drive" => Ok(DatasetKind::Drive),
            "stare" => Ok(DatasetKind::Stare),
            "chasedb1" | "chase_db1" | "chase" => Ok(DatasetKind::Chasedb1),
            "custom" => Ok(DatasetKind::Custom),
            _ => Err(Error::invalid(format!("unknown dataset kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub fov_path: Option<PathBuf>,
}

/// Entries are sorted by id and ids are unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: DatasetKind,
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    /// Keeps only the listed ids, in manifest order. Unknown ids are an error.
    pub fn restrict(mut self, ids: &[String]) -> Result<Self> {
        let unknown: Vec<&str> = ids
            .iter()
            .filter(|id| !self.entries.iter().any(|e| &e.id == *id))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Dataset(format!("ids not in manifest: {}", unknown.join(", "))));
        }
        self.entries.retain(|e| ids.contains(&e.id));
        Ok(self)
    }

    /// Manifest over loose mask files; ids are file stems.
    pub fn from_masks(paths: &[PathBuf]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for p in paths {
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Dataset(format!("{}: no file name", p.display())))?
                .to_string();
            let entry = ManifestEntry {
                id: id.clone(),
                image_path: p.clone(),
                mask_path: p.clone(),
                fov_path: None,
            };
            if entries.insert(id.clone(), entry).is_some() {
                return Err(Error::Dataset(format!("duplicate id {id}")));
            }
        }
        if entries.is_empty() {
            return Err(Error::Dataset("no mask files given".into()));
        }
        Ok(Self {
            name: DatasetKind::Custom,
            root: PathBuf::from("."),
            entries: entries.into_values().collect(),
        })
    }
}

/// Reads one id per line; blank lines and `#` comments are skipped.
pub fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// `dir/prefix*suffix`, matched against file stems. A stem may carry an
/// extra `.tag` after the suffix (STARE's `im0001.ah`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilePattern {
    dir: PathBuf,
    prefix: String,
    suffix: String,
}

impl FromStr for FilePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = Path::new(s);
        let name = p
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::invalid(format!("pattern {s:?} has no file part")))?;
        let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
        let (prefix, rest) = name
            .split_once('*')
            .ok_or_else(|| Error::invalid(format!("pattern {s:?} needs one '*' for the id")))?;
        if rest.contains('*') {
            return Err(Error::invalid(format!("pattern {s:?} has more than one '*'")));
        }
        // an explicit extension in the pattern is allowed but not required
        let suffix = match rest.rsplit_once('.') {
            Some((stem, ext)) if SUPPORTED_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) => stem,
            _ => rest,
        };
        Ok(Self {
            dir,
            prefix: prefix.to_string(),
            suffix: suffix.to_string(),
        })
    }
}

impl FilePattern {
    fn new(dir: impl Into<PathBuf>, prefix: &str, suffix: &str) -> Self {
        Self {
            dir: dir.into(),
            prefix: prefix.into(),
            suffix: suffix.into(),
        }
    }

    fn describe(&self, id: &str) -> String {
        self.dir
            .join(format!(
                "{}{id}{}.{{{}}}",
                self.prefix,
                self.suffix,
                SUPPORTED_EXTENSIONS.join(",")
            ))
            .display()
            .to_string()
    }

    fn capture<'a>(&self, stem: &'a str) -> Option<&'a str> {
        let rest = stem.strip_prefix(self.prefix.as_str())?;
        let id = rest.strip_suffix(self.suffix.as_str())?;
        (!id.is_empty()).then_some(id)
    }

    fn stem_matches(&self, stem: &str, id: &str) -> bool {
        let want = format!("{}{id}{}", self.prefix, self.suffix);
        stem == want
            || stem
                .strip_prefix(want.as_str())
                .is_some_and(|r| r.starts_with('.') && !r[1..].contains('.'))
    }
}

struct Layout {
    images: Vec<FilePattern>,
    masks: Vec<FilePattern>,
    fovs: Vec<FilePattern>,
    valid_id: fn(&str) -> bool,
}

/// Options for [`scan_dataset`] that only some dataset kinds use.
#[derive(Clone, Debug, Default)]
pub struct ScanOptions {
    /// STARE: directory holding the chosen annotator's masks.
    pub annotator_dir: Option<PathBuf>,
    /// CHASE_DB1: mask suffix, `1stHO` unless set.
    pub chase_annotation: Option<String>,
    pub image_glob: Option<String>,
    pub mask_glob: Option<String>,
    pub fov_glob: Option<String>,
}

fn layout(kind: DatasetKind, opts: &ScanOptions) -> Result<Layout> {
    Ok(match kind {
        DatasetKind::Drive => Layout {
            images: vec![
                FilePattern::new("images", "", "_training"),
                FilePattern::new("images", "", "_test"),
            ],
            masks: vec![FilePattern::new("1st_manual", "", "_manual1")],
            fovs: vec![
                FilePattern::new("mask", "", "_training_mask"),
                FilePattern::new("mask", "", "_test_mask"),
            ],
            valid_id: |id| id.chars().all(|c| c.is_ascii_digit()),
        },
        DatasetKind::Stare => {
            let dir = opts.annotator_dir.clone().ok_or_else(|| {
                Error::invalid("stare needs an explicit annotator directory (e.g. labels-ah or labels-vk)")
            })?;
            Layout {
                images: vec![FilePattern::new("images", "", "")],
                masks: vec![FilePattern::new(dir, "", "")],
                fovs: vec![],
                valid_id: |id| id.starts_with("im") && id[2..].chars().all(|c| c.is_ascii_digit()),
            }
        }
        DatasetKind::Chasedb1 => {
            let tag = opts.chase_annotation.as_deref().unwrap_or("1stHO");
            Layout {
                images: vec![FilePattern::new("", "Image_", "")],
                masks: vec![FilePattern::new("", "Image_", &format!("_{tag}"))],
                fovs: vec![],
                valid_id: |id| !id.contains('_'),
            }
        }
        DatasetKind::Custom => {
            let need = |g: &Option<String>, what: &str| {
                g.as_deref()
                    .ok_or_else(|| Error::invalid(format!("custom datasets need --{what}-glob")))
                    .and_then(str::parse)
            };
            Layout {
                images: vec![need(&opts.image_glob, "image")?],
                masks: vec![need(&opts.mask_glob, "mask")?],
                fovs: match &opts.fov_glob {
                    Some(g) => vec![g.parse()?],
                    None => vec![],
                },
                valid_id: |_| true,
            }
        }
    })
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_file() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn extension(p: &Path) -> String {
    p.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn stem(p: &Path) -> Option<&str> {
    p.file_stem().and_then(|s| s.to_str())
}

enum Lookup {
    Found(PathBuf),
    NeedsConversion(PathBuf),
    Missing,
}

fn find_counterpart(root: &Path, patterns: &[FilePattern], id: &str) -> Result<Lookup> {
    let mut unconverted = None;
    for pat in patterns {
        for path in list_dir(&root.join(&pat.dir))? {
            let Some(s) = stem(&path) else { continue };
            // `x.ppm.gz` has stem `x.ppm`
            let s = s.strip_suffix(".ppm").unwrap_or(s);
            if !pat.stem_matches(s, id) {
                continue;
            }
            let ext = extension(&path);
            if SUPPORTED_EXTENSIONS.contains(&ext.as_str()) {
                return Ok(Lookup::Found(path));
            }
            if CONVERTIBLE_EXTENSIONS.contains(&ext.as_str()) {
                unconverted.get_or_insert(path);
            }
        }
    }
    Ok(unconverted.map_or(Lookup::Missing, Lookup::NeedsConversion))
}

/// Builds a manifest by pairing every image under `root` with its mask.
///
/// Every image must have a mask; FOV masks are optional. Entries come back in
/// lexicographic id order.
pub fn scan_dataset(root: &Path, kind: DatasetKind, opts: &ScanOptions) -> Result<DatasetManifest> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{}: not a directory", root.display())));
    }
    let layout = layout(kind, opts)?;

    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut unconverted_images = Vec::new();
    for pat in &layout.images {
        for path in list_dir(&root.join(&pat.dir))? {
            let Some(id) = stem(&path).and_then(|s| pat.capture(s)) else {
                continue;
            };
            if !(layout.valid_id)(id) {
                continue;
            }
            let ext = extension(&path);
            if !SUPPORTED_EXTENSIONS.contains(&ext.as_str()) {
                if CONVERTIBLE_EXTENSIONS.contains(&ext.as_str()) {
                    unconverted_images.push(path.display().to_string());
                }
                continue;
            }
            if let Some(prev) = images.insert(id.to_string(), path.clone()) {
                return Err(Error::Dataset(format!(
                    "duplicate id {id}: {} and {}",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    if images.is_empty() {
        let hint = if unconverted_images.is_empty() {
            String::new()
        } else {
            format!(
                "; found {} unconverted image(s) such as {}, convert them to PNG first",
                unconverted_images.len(),
                unconverted_images[0]
            )
        };
        return Err(Error::Dataset(format!(
            "{}: no {kind} images found{hint}",
            root.display()
        )));
    }

    let mut entries = Vec::with_capacity(images.len());
    let mut problems = Vec::new();
    for (id, image_path) in images {
        let mask_path = match find_counterpart(root, &layout.masks, &id)? {
            Lookup::Found(p) => p,
            Lookup::NeedsConversion(p) => {
                problems.push(format!("{id}: mask {} must be converted to PNG first", p.display()));
                continue;
            }
            Lookup::Missing => {
                problems.push(format!("{id}: no mask matching {}", layout.masks[0].describe(&id)));
                continue;
            }
        };
        let fov_path = match find_counterpart(root, &layout.fovs, &id)? {
            Lookup::Found(p) => Some(p),
            Lookup::NeedsConversion(p) => {
                problems.push(format!("{id}: FOV mask {} must be converted to PNG first", p.display()));
                continue;
            }
            Lookup::Missing => None,
        };
        entries.push(ManifestEntry {
            id,
            image_path,
            mask_path,
            fov_path,
        });
    }
    if !problems.is_empty() {
        return Err(Error::Dataset(problems.join("; ")));
    }
    Ok(DatasetManifest {
        name: kind,
        root: root.to_path_buf(),
        entries,
    })
}
