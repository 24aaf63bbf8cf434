//! The `htr` command line: `prepare`, `train`, `recognize` and `score`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

pub use config::RunConfig;

use crate::ctc::Alphabet;
use crate::decoder::{decode_line, scoring_tokenize, Dictionary};
use crate::error::{HtrError, Result};
use crate::evaluation::EvalReport;
use crate::imaging::{extract_line, preprocess, AugmentationParams, GrayImage, LINE_HEIGHT};
use crate::matrix::ConfidenceMatrix;
use crate::netcore::{read_matrix, read_model, write_matrix, write_model, Network, NetworkParams};
use crate::pageio::{build_alphabet, manifest_to_string, read_alphabet, read_manifest, read_page, write_alphabet, ManifestEntry};
use crate::training::{
    filter_short, read_checkpoint, resume_curriculum, run_curriculum, Curriculum, DatasetSpec, Sample, TrainOptions, TrainState,
};

/// File names inside a `prepare` output directory.
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const REFERENCES_FILE: &str = "references.txt";
pub const LINES_DIR: &str = "lines";
pub const RAW_DIR: &str = "raw";

/// File names inside a `train` output directory.
pub const MODEL_FILE: &str = "model.bin";
pub const ALPHABET_FILE: &str = "alphabet.txt";
pub const STAGE_LOG_FILE: &str = "stage_log.tsv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Extension of dumped confidence matrices.
pub const MATRIX_EXT: &str = "mat";

#[derive(Debug, Parser)]
#[command(name = "htr", version, about = "Handwritten text line recognition")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override configuration-file values.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed of initialization, shuffling and augmentation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Decoder length penalty per character.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Dictionary, one word per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// Trained model container (`model.bin`).
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract and normalize the lines of PAGE XML + image pairs.
    Prepare {
        /// Directory of `*.xml` files and the images they name.
        pages: PathBuf,
    },
    /// Train a model on a manifest with a curriculum.
    Train {
        /// Tab-separated `id, image, transcription` rows.
        manifest: PathBuf,
        /// Curriculum file; falls back to the `curriculum` config key.
        curriculum: Option<PathBuf>,
        /// Continue from a checkpoint instead of fresh weights.
        #[arg(long, value_name = "CKPT")]
        resume: Option<PathBuf>,
    },
    /// Transcribe a manifest or a list of line images.
    Recognize {
        /// Manifest, or a file listing one line image per row.
        input: PathBuf,
        /// Alphabet file; defaults to `alphabet.txt` beside the model.
        #[arg(long, value_name = "FILE")]
        alphabet: Option<PathBuf>,
        /// Write each line's confidence matrix into this directory.
        #[arg(long, value_name = "DIR")]
        dump_matrices: Option<PathBuf>,
        /// Decode previously dumped matrices instead of running the network.
        #[arg(long, value_name = "DIR", conflicts_with = "dump_matrices")]
        from_matrices: Option<PathBuf>,
    },
    /// Compare a hypothesis file with a reference file, line by line.
    Score {
        /// Reference transcriptions, one line per row.
        refs: PathBuf,
        /// Hypotheses aligned row by row with the references.
        hyps: PathBuf,
    },
}

impl Overrides {
    /// Configuration file values with the flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(d) = &self.dict {
            c.dict = Some(d.clone());
        }
        if let Some(m) = &self.model {
            c.model = Some(m.clone());
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| HtrError::Config(format!("no {what} given (flag or config key)")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HtrError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HtrError::io(path, e))
}

pub fn save_model(path: &Path, net: &Network, params: &NetworkParams) -> Result<()> {
    let file = File::create(path).map_err(|e| HtrError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(&mut w, net, params)?;
    w.flush().map_err(|e| HtrError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(Network, NetworkParams)> {
    let file = File::open(path).map_err(|e| HtrError::io(path, e))?;
    read_model(&mut BufReader::new(file))
}

pub fn save_matrix(path: &Path, m: &ConfidenceMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| HtrError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix(&mut w, m)?;
    w.flush().map_err(|e| HtrError::io(path, e))
}

pub fn load_matrix(path: &Path) -> Result<ConfidenceMatrix> {
    let file = File::open(path).map_err(|e| HtrError::io(path, e))?;
    read_matrix(&mut BufReader::new(file))
}

/// Loads a line image; anything not already 64 rows high is preprocessed.
pub fn load_line_image(path: &Path) -> Result<GrayImage> {
    let img = GrayImage::load(path)?;
    if img.height() == LINE_HEIGHT {
        Ok(img)
    } else {
        preprocess(&img)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub pages: usize,
    pub failed_pages: usize,
    pub lines: usize,
    pub skipped_lines: usize,
    pub entries: Vec<ManifestEntry>,
}

/// Extracts and preprocesses every line of every `*.xml` page in `pages`,
/// in file-name then document order. Writes `lines/<page>_<line>.png`, the
/// unnormalized crops under `raw/`, `manifest.tsv` and `references.txt`.
/// Lines that cannot be processed are skipped with a warning; fails only if
/// no page could be read.
pub fn cmd_prepare(pages: &Path, out: &Path) -> Result<PrepareSummary> {
    let mut xmls: Vec<PathBuf> = std::fs::read_dir(pages)
        .map_err(|e| HtrError::io(pages, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    xmls.sort();
    if xmls.is_empty() {
        return Err(HtrError::InvalidInput(format!("no *.xml pages in {}", pages.display())));
    }
    for dir in [LINES_DIR, RAW_DIR] {
        create_dir(&out.join(dir))?;
    }
    let mut summary = PrepareSummary {
        pages: xmls.len(),
        failed_pages: 0,
        lines: 0,
        skipped_lines: 0,
        entries: Vec::new(),
    };
    for xml in &xmls {
        let stem = xml.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let loaded = read_page(xml).and_then(|rec| {
            let image = GrayImage::load(&xml.with_file_name(&rec.image))?;
            Ok((rec, image))
        });
        let (record, page) = match loaded {
            Ok(v) => v,
            Err(e) => {
                warn!("{}: {e}", xml.display());
                summary.failed_pages += 1;
                continue;
            }
        };
        for msg in &record.skipped {
            warn!("{}: {msg}", xml.display());
            summary.skipped_lines += 1;
        }
        for line in &record.lines {
            let id = format!("{stem}_{}", line.id);
            let processed = extract_line(&page, &line.polygon).and_then(|raw| Ok((preprocess(&raw)?, raw)));
            let (img, raw) = match processed {
                Ok(v) => v,
                Err(e) => {
                    warn!("{}: line {}: {e}; skipped", xml.display(), line.id);
                    summary.skipped_lines += 1;
                    continue;
                }
            };
            let file = format!("{id}.png");
            let path = out.join(LINES_DIR).join(&file);
            img.save_png(&path)?;
            raw.save_png(&out.join(RAW_DIR).join(&file))?;
            summary.entries.push(ManifestEntry {
                id,
                image: path,
                text: line.text.clone(),
            });
            summary.lines += 1;
        }
    }
    if summary.failed_pages == summary.pages {
        return Err(HtrError::InvalidInput(format!("none of the {} pages could be read", summary.pages)));
    }
    if summary.entries.is_empty() {
        warn!("no usable lines found");
    }
    write_file(&out.join(MANIFEST_FILE), &manifest_to_string(&summary.entries, out)?)?;
    let refs: String = summary.entries.iter().map(|e| format!("{}\n", e.text)).collect();
    write_file(&out.join(REFERENCES_FILE), &refs)?;
    Ok(summary)
}

/// The unnormalized crop `prepare` stores beside a line image, if present.
fn raw_image_for(line_image: &Path) -> Option<PathBuf> {
    let name = line_image.file_name()?;
    let raw = line_image.parent()?.parent()?.join(RAW_DIR).join(name);
    raw.is_file().then_some(raw)
}

/// Training sets `full` (every manifest line) and `short` (lines of at most
/// `short_max_chars` characters).
pub fn load_datasets(entries: &[ManifestEntry], alphabet: &Alphabet, config: &RunConfig) -> Result<BTreeMap<String, DatasetSpec>> {
    let mut samples = Vec::with_capacity(entries.len());
    for e in entries {
        let mut sample = Sample::new(&e.id, load_line_image(&e.image)?, &e.text, alphabet)?;
        if config.augment {
            if let Some(raw) = raw_image_for(&e.image) {
                sample = sample.with_raw(GrayImage::load(&raw)?);
            }
        }
        samples.push(sample);
    }
    let full = DatasetSpec::new("full", samples);
    let short = filter_short(&full, config.short_max_chars)?;
    Ok(BTreeMap::from([("short".to_string(), short), ("full".to_string(), full)]))
}

/// Trains on `manifest` and writes `model.bin`, `alphabet.txt`,
/// `stage_log.tsv` and `checkpoints/` into the output directory.
pub fn cmd_train(manifest: &Path, curriculum: &Path, config: &RunConfig, resume: Option<&Path>) -> Result<TrainState> {
    let out = required(&config.out, "output directory")?;
    let curriculum = Curriculum::load(curriculum)?;
    let entries = read_manifest(manifest)?;
    let texts: Vec<&str> = entries.iter().map(|e| e.text.as_str()).collect();
    let alphabet = build_alphabet(&texts, config.garbage)?;
    let datasets = load_datasets(&entries, &alphabet, config)?;
    let mut options = TrainOptions {
        seed: config.seed,
        augmentation: config.augment.then(AugmentationParams::default),
        checkpoint_dir: Some(out.join(CHECKPOINT_DIR)),
        stop_after: None,
    };
    create_dir(out)?;
    let (net, state) = match resume {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            if ckpt.net.classes() != alphabet.len() {
                return Err(HtrError::Shape(format!(
                    "checkpoint has {} classes, the manifest alphabet {}",
                    ckpt.net.classes(),
                    alphabet.len()
                )));
            }
            if ckpt.seed != options.seed {
                warn!("continuing with the checkpoint seed {} instead of {}", ckpt.seed, options.seed);
                options.seed = ckpt.seed;
            }
            info!("resuming after {} epochs", ckpt.state.global_epoch());
            let state = resume_curriculum(&ckpt.net, ckpt.state, &curriculum, &datasets, &options)?;
            (ckpt.net, state)
        }
        None => {
            let net = Network::new(alphabet.len(), config.shape)?;
            let params = net.init_params(config.seed);
            let state = run_curriculum(&net, params, &curriculum, &datasets, &options)?;
            (net, state)
        }
    };
    save_model(&out.join(MODEL_FILE), &net, &state.weights.params)?;
    write_alphabet(&out.join(ALPHABET_FILE), &alphabet)?;
    write_file(&out.join(STAGE_LOG_FILE), &state.stage_log(&curriculum))?;
    Ok(state)
}

/// Manifest rows, or one image path per line; ids of the latter are the
/// file stems. Relative paths are resolved against `data_root`, else the
/// list's directory.
pub fn read_input_list(path: &Path, data_root: Option<&Path>) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?;
    let base = data_root.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")));
    if text.contains('\t') {
        return crate::pageio::parse_manifest(&text, base);
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let image = base.join(l);
            ManifestEntry {
                id: image.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                image,
                text: String::new(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct RecognizeOptions {
    pub alphabet: Option<PathBuf>,
    pub dump_matrices: Option<PathBuf>,
    pub from_matrices: Option<PathBuf>,
}

/// One tokenized transcript per input line, in input order. Without a
/// dictionary every segment is read by best path.
pub fn cmd_recognize(input: &Path, config: &RunConfig, options: &RecognizeOptions) -> Result<Vec<String>> {
    let entries = read_input_list(input, config.data_root.as_deref())?;
    let alphabet_path = options
        .alphabet
        .clone()
        .or_else(|| config.alphabet_path())
        .ok_or_else(|| HtrError::Config("no alphabet or model given".into()))?;
    let alphabet = read_alphabet(&alphabet_path)?;
    let model = match &options.from_matrices {
        Some(_) => None,
        None => {
            let (net, params) = load_model(required(&config.model, "model")?)?;
            if net.classes() != alphabet.len() {
                return Err(HtrError::Shape(format!(
                    "model has {} output classes but the alphabet {} symbols",
                    net.classes(),
                    alphabet.len()
                )));
            }
            Some((net, params))
        }
    };
    let dict = match &config.dict {
        Some(p) => {
            let d = Dictionary::load(p, &alphabet)?;
            if d.skipped() > 0 {
                warn!("{}: {} words use characters outside the alphabet; ignored", p.display(), d.skipped());
            }
            d
        }
        None => Dictionary::from_words(&alphabet, std::iter::empty::<&str>()),
    };
    let decoder = config.decoder();
    if let Some(dir) = &options.dump_matrices {
        create_dir(dir)?;
    }
    let mut out = Vec::with_capacity(entries.len());
    for e in &entries {
        let matrix_file = format!("{}.{MATRIX_EXT}", e.id);
        let matrix = match (&model, &options.from_matrices) {
            (Some((net, params)), _) => net.forward(&load_line_image(&e.image)?, params)?,
            (None, Some(dir)) => load_matrix(&dir.join(&matrix_file))?,
            (None, None) => unreachable!("a model is loaded unless matrices are given"),
        };
        if matrix.classes() != alphabet.len() {
            return Err(HtrError::Shape(format!("line {}: matrix has {} classes, alphabet {}", e.id, matrix.classes(), alphabet.len())));
        }
        if let Some(dir) = &options.dump_matrices {
            save_matrix(&dir.join(&matrix_file), &matrix)?;
        }
        out.push(scoring_tokenize(&decode_line(&matrix, &dict, &decoder)?));
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Line-aligned WER and CER of `hyps` against `refs`.
pub fn cmd_score(refs: &Path, hyps: &Path) -> Result<EvalReport> {
    let (r, h) = (read_lines(refs)?, read_lines(hyps)?);
    if r.len() != h.len() {
        return Err(HtrError::InvalidInput(format!(
            "{} has {} lines but {} has {}",
            refs.display(),
            r.len(),
            hyps.display(),
            h.len()
        )));
    }
    EvalReport::new(&r, &h)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    let config = cli.overrides.resolve()?;
    match cli.command {
        Command::Prepare { pages } => {
            let s = cmd_prepare(&pages, required(&config.out, "output directory")?)?;
            info!("{} lines from {} pages ({} pages failed, {} lines skipped)", s.lines, s.pages, s.failed_pages, s.skipped_lines);
        }
        Command::Train { manifest, curriculum, resume } => {
            let curriculum = curriculum.or_else(|| config.curriculum.clone());
            let state = cmd_train(&manifest, required(&curriculum, "curriculum")?, &config, resume.as_deref())?;
            if let Some(last) = state.log.last() {
                info!("finished after {} epochs, last mean loss {:.4}", state.global_epoch(), last.summary.mean_loss);
            }
        }
        Command::Recognize { input, alphabet, dump_matrices, from_matrices } => {
            let options = RecognizeOptions { alphabet, dump_matrices, from_matrices };
            let lines = cmd_recognize(&input, &config, &options)?;
            let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
            write_output(config.out.as_deref(), &text)?;
        }
        Command::Score { refs, hyps } => {
            let report = cmd_score(&refs, &hyps)?;
            print!("{}", report.to_text()?);
            if let Some(out) = &config.out {
                write_file(out, &report.to_key_values()?)?;
            }
        }
    }
    Ok(())
}

/// Entry point of the `htr` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("htr: {e}");
            e.exit_code()
        }
    }
}
