//! Run configuration: built-in defaults, then an optional `key = value` file,
//! then command-line flags. The resolved configuration is echoed to
//! `run.cfg` in every output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::metrics::FovMode;
use crate::stratify::{ThresholdLadder, DEFAULT_FUSE_THRESHOLD};

pub const CONFIG_FILE_NAME: &str = "run.cfg";

const KEYS: [&str; 8] = ["d1", "ladder", "weights", "lambda", "threshold", "fov", "jobs", "out"];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub ladder: ThresholdLadder,
    pub weights: LossWeights,
    pub fuse_threshold: u8,
    pub fov_mode: FovMode,
    pub output_dir: PathBuf,
    /// `None` lets the thread pool pick.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ladder: ThresholdLadder::default(),
            weights: LossWeights::default(),
            fuse_threshold: DEFAULT_FUSE_THRESHOLD,
            fov_mode: FovMode::Off,
            output_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

/// One layer of raw `key -> value` settings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::invalid(format!("config line {}: unknown key {k:?}", n + 1)));
            }
            s.set(k, v.trim());
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    /// Applies settings layers in order; later layers win.
    pub fn resolve(layers: &[&Settings]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for layer in layers {
            cfg.apply(layer)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, s: &Settings) -> Result<()> {
        match (s.get("d1"), s.get("ladder")) {
            (Some(d1), Some(ladder)) => {
                let d1: usize = parse_num("d1", d1)?;
                let ladder: ThresholdLadder = ladder.parse()?;
                if ladder.thresholds()[0] != d1 {
                    return Err(Error::invalid(format!(
                        "d1 = {d1} disagrees with the first ladder threshold {}",
                        ladder.thresholds()[0]
                    )));
                }
                self.ladder = ladder;
            }
            (Some(d1), None) => self.ladder = ThresholdLadder::single(parse_num("d1", d1)?)?,
            (None, Some(ladder)) => self.ladder = ladder.parse()?,
            (None, None) => {}
        }
        let mut strata = self.weights.strata().to_vec();
        let mut lambda = self.weights.lambda();
        if let Some(w) = s.get("weights") {
            strata = LossWeights::parse_strata(w)?;
        }
        if let Some(l) = s.get("lambda") {
            lambda = parse_num("lambda", l)?;
        }
        self.weights = LossWeights::new(strata, lambda)?;
        if let Some(t) = s.get("threshold") {
            self.fuse_threshold = parse_num("threshold", t)?;
        }
        if let Some(f) = s.get("fov") {
            self.fov_mode = f.parse()?;
        }
        if let Some(j) = s.get("jobs") {
            self.jobs = match j {
                "auto" => None,
                _ => match parse_num::<usize>("jobs", j)? {
                    0 => return Err(Error::invalid("jobs must be at least 1")),
                    n => Some(n),
                },
            };
        }
        if let Some(o) = s.get("out") {
            self.output_dir = PathBuf::from(o);
        }
        Ok(())
    }

    /// First ladder threshold, used for the thin/stem/raw stack.
    pub fn d1(&self) -> usize {
        self.ladder.thresholds()[0]
    }

    pub fn to_cfg_text(&self) -> String {
        let weights: Vec<String> = self.weights.strata().iter().map(|w| w.to_string()).collect();
        format!(
            "# vstrata run configuration\n\
             d1 = {}\nladder = {}\nweights = {}\nlambda = {}\nthreshold = {}\nfov = {}\njobs = {}\nout = {}\n",
            self.d1(),
            self.ladder,
            weights.join(","),
            self.weights.lambda(),
            self.fuse_threshold,
            self.fov_mode,
            self.jobs.map_or_else(|| "auto".to_string(), |j| j.to_string()),
            self.output_dir.display(),
        )
    }

    /// Creates the output directory and writes `run.cfg` into it.
    pub fn prepare_output_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        let path = self.output_dir.join(CONFIG_FILE_NAME);
        let text = self.to_cfg_text();
        crate::raster::write_atomic(&path, |w| w.write_all(text.as_bytes()))
    }

    pub(crate) fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.d1(), 2);
        assert_eq!(c.weights.strata(), &[1.0, 1.0, 1.0]);
        assert_eq!(c.weights.lambda(), 100.0);
        assert_eq!(c.fuse_threshold, 127);
        assert_eq!(c.fov_mode, FovMode::Off);
        assert_eq!(crate::losses::DEFAULT_LAMBDA, 100.0);
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::parse("# comment\nladder = 2,4\nthreshold=100\nfov = on # inline\n").unwrap();
        let mut flags = Settings::default();
        flags.set("threshold", "64");
        flags.set("weights", "1,2,0.5");
        let c = RunConfig::resolve(&[&file, &flags]).unwrap();
        assert_eq!(c.ladder.thresholds(), &[2, 4]);
        assert_eq!(c.fuse_threshold, 64);
        assert_eq!(c.fov_mode, FovMode::On);
        assert_eq!(c.weights.strata(), &[1.0, 2.0, 0.5]);

        let mut d1 = Settings::default();
        d1.set("d1", "3");
        let c = RunConfig::resolve(&[&file, &d1]).unwrap();
        assert_eq!(c.ladder.thresholds(), &[3]);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("no equals sign").is_err());
        let mut s = Settings::default();
        s.set("threshold", "300");
        assert!(RunConfig::resolve(&[&s]).is_err());
        let mut s = Settings::default();
        s.set("d1", "3");
        s.set("ladder", "2,4");
        assert!(RunConfig::resolve(&[&s]).is_err());
        let mut s = Settings::default();
        s.set("jobs", "0");
        assert!(RunConfig::resolve(&[&s]).is_err());
    }

    #[test]
    fn cfg_text_round_trips() {
        let mut s = Settings::default();
        s.set("ladder", "1,3,6");
        s.set("lambda", "12.5");
        s.set("jobs", "4");
        s.set("out", "results/x");
        let c = RunConfig::resolve(&[&s]).unwrap();
        let again = RunConfig::resolve(&[&Settings::parse(&c.to_cfg_text()).unwrap()]).unwrap();
        assert_eq!(again, c);
    }
}
