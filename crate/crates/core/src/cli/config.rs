//! `key = value` run configuration.
//!
//! | key              | default | meaning                                          |
//! |------------------|---------|--------------------------------------------------|
//! | `seed`           | 0       | training seed                                    |
//! | `alpha`          | 0.15    | decoder length penalty per character, ≥ 0        |
//! | `threshold`      | 0.8     | separator-frame probability, in (0, 1]           |
//! | `min_run`        | 2       | shortest interior separator run that splits, ≥ 1 |
//! | `beam`           | none    | trie beam width, ≥ 1; exhaustive when unset      |
//! | `short_max_chars`| 30      | length limit of the `short` training subset      |
//! | `garbage`        | `∅`     | garbage (CTC blank) symbol of a new alphabet     |
//! | `first_mdleaky`  | 24      | cells of the first MDLeaky layer                 |
//! | `tanh`           | 40      | units of the tanh layer                          |
//! | `second_mdleaky` | 60      | cells of the second MDLeaky layer                |
//! | `augment`        | false   | jitter training presentations                    |
//! | `model`          | none    | model container                                  |
//! | `alphabet`       | none    | alphabet file; defaults to `alphabet.txt` beside the model |
//! | `dict`           | none    | dictionary, one word per line                    |
//! | `curriculum`     | none    | curriculum (stage) file                          |
//! | `out`            | none    | output file or directory                         |
//! | `data_root`      | none    | base for relative paths in image lists           |
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory of the configuration file. Command-line
//! flags override file values.

use std::path::{Path, PathBuf};

use crate::decoder::{DecoderConfig, DEFAULT_ALPHA, DEFAULT_MIN_RUN, DEFAULT_THRESHOLD};
use crate::error::{HtrError, Result};
use crate::netcore::NetworkShape;
use crate::pageio::DEFAULT_GARBAGE;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub alpha: f64,
    pub threshold: f64,
    pub min_run: usize,
    pub beam: Option<usize>,
    pub short_max_chars: usize,
    pub garbage: char,
    pub shape: NetworkShape,
    pub augment: bool,
    pub model: Option<PathBuf>,
    pub alphabet: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub curriculum: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub data_root: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            alpha: DEFAULT_ALPHA,
            threshold: DEFAULT_THRESHOLD,
            min_run: DEFAULT_MIN_RUN,
            beam: None,
            short_max_chars: 30,
            garbage: DEFAULT_GARBAGE,
            shape: NetworkShape::default(),
            augment: false,
            model: None,
            alphabet: None,
            dict: None,
            curriculum: None,
            out: None,
            data_root: None,
        }
    }
}

fn config_error(line: usize, msg: impl std::fmt::Display) -> HtrError {
    HtrError::Config(format!("config line {line}: {msg}"))
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| config_error(line, format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Parses configuration text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        let path = |v: &str| Some(base.join(v));
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| config_error(n, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => c.seed = number(n, key, value)?,
                "alpha" => c.alpha = number(n, key, value)?,
                "threshold" => c.threshold = number(n, key, value)?,
                "min_run" => c.min_run = number(n, key, value)?,
                "beam" => c.beam = Some(number(n, key, value)?),
                "short_max_chars" => c.short_max_chars = number(n, key, value)?,
                "garbage" => {
                    let mut chars = value.chars();
                    c.garbage = match (chars.next(), chars.next()) {
                        (Some(g), None) => g,
                        _ => return Err(config_error(n, "garbage must be a single character")),
                    }
                }
                "first_mdleaky" => c.shape.first_mdleaky = number(n, key, value)?,
                "tanh" => c.shape.tanh = number(n, key, value)?,
                "second_mdleaky" => c.shape.second_mdleaky = number(n, key, value)?,
                "augment" => c.augment = number(n, key, value)?,
                "model" => c.model = path(value),
                "alphabet" => c.alphabet = path(value),
                "dict" => c.dict = path(value),
                "curriculum" => c.curriculum = path(value),
                "out" => c.out = path(value),
                "data_root" => c.data_root = path(value),
                _ => return Err(config_error(n, format!("unknown key {key:?}"))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.decoder().validate()?;
        if self.short_max_chars == 0 {
            return Err(HtrError::Config("short_max_chars must be at least 1".into()));
        }
        let s = self.shape;
        if s.first_mdleaky == 0 || s.tanh == 0 || s.second_mdleaky == 0 {
            return Err(HtrError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig {
            alpha: self.alpha,
            threshold: self.threshold,
            min_run: self.min_run,
            beam: self.beam,
            ..DecoderConfig::default()
        }
    }

    /// Alphabet file: the configured one or `alphabet.txt` beside the model.
    pub fn alphabet_path(&self) -> Option<PathBuf> {
        self.alphabet
            .clone()
            .or_else(|| self.model.as_ref().map(|m| m.with_file_name("alphabet.txt")))
    }
}
