//! Connectionist temporal classification over a [`ConfidenceMatrix`].
//!
//! The garbage class of the network doubles as the CTC blank. All recursions
//! run in log space.

use std::collections::HashMap;

use crate::error::{HtrError, Result};
use crate::matrix::{log_add, ConfidenceMatrix};

/// Ordered character set; one class per character plus the garbage class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    garbage: usize,
    index: HashMap<char, usize>,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>, garbage: usize) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(HtrError::Config(format!(
                "alphabet needs at least 2 classes, got {}",
                symbols.len()
            )));
        }
        if garbage >= symbols.len() {
            return Err(HtrError::Config(format!("garbage index {garbage} out of range")));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(HtrError::Config(format!("duplicate alphabet symbol {c:?}")));
            }
        }
        Ok(Alphabet {
            symbols,
            garbage,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn garbage(&self) -> usize {
        self.garbage
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn symbol(&self, class: usize) -> char {
        self.symbols[class]
    }

    /// Class of a character other than the garbage symbol.
    pub fn class_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied().filter(|&i| i != self.garbage)
    }

    pub fn space(&self) -> Option<usize> {
        self.class_of(' ')
    }

    /// Encodes a transcription; fails on characters outside the alphabet.
    pub fn encode(&self, text: &str) -> Result<LabelSequence> {
        let labels = text
            .chars()
            .map(|c| {
                self.class_of(c)
                    .ok_or_else(|| HtrError::InvalidInput(format!("character {c:?} not in alphabet")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelSequence {
            labels,
            blank: self.garbage,
        })
    }

    pub fn decode(&self, labels: &[usize]) -> String {
        labels.iter().map(|&l| self.symbols[l]).collect()
    }
}

/// Target class indices, never containing the blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    labels: Vec<usize>,
    blank: usize,
}

impl LabelSequence {
    pub fn new(labels: Vec<usize>, blank: usize, classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes || l == blank) {
            return Err(HtrError::InvalidInput(format!(
                "label {bad} invalid for {classes} classes with blank {blank}"
            )));
        }
        Ok(LabelSequence { labels, blank })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fewest timesteps able to emit this sequence: one per label plus a
    /// separating blank between equal neighbours.
    pub fn min_timesteps(&self) -> usize {
        let repeats = self.labels.windows(2).filter(|w| w[0] == w[1]).count();
        self.labels.len() + repeats
    }
}

fn check(matrix: &ConfidenceMatrix, target: &LabelSequence) -> Result<()> {
    if target.blank >= matrix.classes() {
        return Err(HtrError::InvalidInput(format!(
            "blank {} outside {} classes",
            target.blank,
            matrix.classes()
        )));
    }
    if let Some(&bad) = target.labels.iter().find(|&&l| l >= matrix.classes()) {
        return Err(HtrError::InvalidInput(format!("label {bad} outside {} classes", matrix.classes())));
    }
    let required = target.min_timesteps();
    if required > matrix.timesteps() || (matrix.timesteps() == 0 && target.is_empty()) {
        return Err(HtrError::InfeasibleTarget {
            target_len: target.len(),
            required: required.max(1),
            timesteps: matrix.timesteps(),
        });
    }
    Ok(())
}

/// Forward and backward variables over the blank-augmented sequence.
struct Lattice {
    states: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    log_likelihood: f64,
}

fn extended(target: &LabelSequence) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * target.len() + 1);
    ext.push(target.blank);
    for &l in &target.labels {
        ext.push(l);
        ext.push(target.blank);
    }
    ext
}

fn forward(logp: &[f64], classes: usize, timesteps: usize, ext: &[usize]) -> Vec<f64> {
    let s_len = ext.len();
    let mut alpha = vec![f64::NEG_INFINITY; timesteps * s_len];
    alpha[0] = logp[ext[0]];
    if s_len > 1 {
        alpha[1] = logp[ext[1]];
    }
    for t in 1..timesteps {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if s >= 2 && ext[s] != ext[s - 2] {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = acc + logp[t * classes + ext[s]];
        }
    }
    alpha
}

fn backward(logp: &[f64], classes: usize, timesteps: usize, ext: &[usize]) -> Vec<f64> {
    let s_len = ext.len();
    let mut beta = vec![f64::NEG_INFINITY; timesteps * s_len];
    let last = (timesteps - 1) * s_len;
    beta[last + s_len - 1] = 0.0;
    if s_len > 1 {
        beta[last + s_len - 2] = 0.0;
    }
    for t in (0..timesteps - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * s_len);
        let cur = &mut cur[t * s_len..];
        let emit = |s: usize| next[s] + logp[(t + 1) * classes + ext[s]];
        for s in 0..s_len {
            let mut acc = emit(s);
            if s + 1 < s_len {
                acc = log_add(acc, emit(s + 1));
            }
            if s + 2 < s_len && ext[s] != ext[s + 2] {
                acc = log_add(acc, emit(s + 2));
            }
            cur[s] = acc;
        }
    }
    beta
}

fn lattice(matrix: &ConfidenceMatrix, target: &LabelSequence, with_backward: bool) -> Result<Lattice> {
    check(matrix, target)?;
    let ext = extended(target);
    let logp = matrix.log_probs();
    let (t_len, classes) = (matrix.timesteps(), matrix.classes());
    let alpha = forward(&logp, classes, t_len, &ext);
    let s_len = ext.len();
    let last = (t_len - 1) * s_len;
    let mut ll = alpha[last + s_len - 1];
    if s_len > 1 {
        ll = log_add(ll, alpha[last + s_len - 2]);
    }
    let beta = if with_backward {
        backward(&logp, classes, t_len, &ext)
    } else {
        Vec::new()
    };
    Ok(Lattice {
        states: s_len,
        alpha,
        beta,
        log_likelihood: ll,
    })
}

/// `-ln P(target | matrix)`, summed over every alignment that collapses to
/// the target. `+inf` when the target has probability zero.
pub fn ctc_loss(matrix: &ConfidenceMatrix, target: &LabelSequence) -> Result<f64> {
    let lat = lattice(matrix, target, false)?;
    Ok(-lat.log_likelihood)
}

/// Gradient of [`ctc_loss`] with respect to the pre-softmax activations that
/// produced `matrix`: `p(t, k) - posterior occupancy of class k at t`.
pub fn ctc_gradient(matrix: &ConfidenceMatrix, target: &LabelSequence) -> Result<Vec<f64>> {
    ctc_loss_and_gradient(matrix, target).map(|(_, g)| g)
}

/// Loss and gradient from one forward-backward pass.
pub fn ctc_loss_and_gradient(matrix: &ConfidenceMatrix, target: &LabelSequence) -> Result<(f64, Vec<f64>)> {
    let lat = lattice(matrix, target, true)?;
    if lat.log_likelihood == f64::NEG_INFINITY {
        return Err(HtrError::InvalidInput("target has probability zero under the matrix".into()));
    }
    let ext = extended(target);
    let (t_len, classes) = (matrix.timesteps(), matrix.classes());
    let mut occupancy = vec![f64::NEG_INFINITY; classes];
    let mut grad = matrix.data().to_vec();
    for t in 0..t_len {
        occupancy.iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
        for (s, &k) in ext.iter().enumerate() {
            let i = t * lat.states + s;
            occupancy[k] = log_add(occupancy[k], lat.alpha[i] + lat.beta[i]);
        }
        for k in 0..classes {
            if occupancy[k] != f64::NEG_INFINITY {
                grad[t * classes + k] -= (occupancy[k] - lat.log_likelihood).exp();
            }
        }
    }
    Ok((-lat.log_likelihood, grad))
}

/// Per-timestep argmax classes (ties to the lowest index) collapsed: repeats
/// merged, blanks dropped.
pub fn best_path_labels(matrix: &ConfidenceMatrix, blank: usize) -> Vec<usize> {
    collapse((0..matrix.timesteps()).map(|t| matrix.argmax(t)), blank)
}

/// Collapses a frame-level path to its label sequence.
pub fn collapse(path: impl IntoIterator<Item = usize>, blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for c in path {
        if Some(c) != prev && c != blank {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

/// Best-path decoding to text.
pub fn best_path(matrix: &ConfidenceMatrix, alphabet: &Alphabet) -> String {
    alphabet.decode(&best_path_labels(matrix, alphabet.garbage()))
}

/// Product of the entries selected by a frame-level path.
pub fn path_probability(matrix: &ConfidenceMatrix, path: &[usize]) -> Result<f64> {
    if path.len() != matrix.timesteps() {
        return Err(HtrError::InvalidInput(format!(
            "path of length {} for {} timesteps",
            path.len(),
            matrix.timesteps()
        )));
    }
    if let Some(&bad) = path.iter().find(|&&c| c >= matrix.classes()) {
        return Err(HtrError::InvalidInput(format!("class {bad} out of range")));
    }
    Ok(path.iter().enumerate().map(|(t, &c)| matrix.get(t, c)).product())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sum of path probabilities over all C^T frame paths collapsing to the
    /// target.
    fn brute_force_probability(m: &ConfidenceMatrix, target: &[usize], blank: usize) -> f64 {
        let (t_len, c) = (m.timesteps(), m.classes());
        let mut total = 0.0;
        let mut path = vec![0usize; t_len];
        for code in 0..c.pow(t_len as u32) {
            let mut rest = code;
            for slot in path.iter_mut() {
                *slot = rest % c;
                rest /= c;
            }
            if collapse(path.iter().copied(), blank) == target {
                total += path_probability(m, &path).unwrap();
            }
        }
        total
    }

    fn seq(labels: &[usize], blank: usize, classes: usize) -> LabelSequence {
        LabelSequence::new(labels.to_vec(), blank, classes).unwrap()
    }

    #[test]
    fn single_timestep_single_path() {
        let m = ConfidenceMatrix::new(1, 2, vec![0.7, 0.3]).unwrap();
        let loss = ctc_loss(&m, &seq(&[0], 1, 2)).unwrap();
        assert!((loss - 0.35667494393873245).abs() < 1e-12);
        assert!((loss + 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_uniform_timesteps() {
        // paths aa, -a, a- collapse to "a": 3 * 0.25
        let m = ConfidenceMatrix::new(2, 2, vec![0.5; 4]).unwrap();
        let loss = ctc_loss(&m, &seq(&[0], 1, 2)).unwrap();
        assert!((loss + 0.75f64.ln()).abs() < 1e-12);
        assert!((brute_force_probability(&m, &[0], 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn empty_target_is_all_blank() {
        let m = ConfidenceMatrix::new(2, 3, vec![0.2, 0.5, 0.3, 0.6, 0.1, 0.3]).unwrap();
        let loss = ctc_loss(&m, &seq(&[], 2, 3)).unwrap();
        assert!((loss + (0.3f64 * 0.3).ln()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_invalid_targets() {
        let m = ConfidenceMatrix::new(2, 3, vec![1.0 / 3.0; 6]).unwrap();
        // "aa" needs a separating blank: 3 steps
        assert!(matches!(ctc_loss(&m, &seq(&[0, 0], 2, 3)), Err(HtrError::InfeasibleTarget { required: 3, .. })));
        assert!(ctc_loss(&m, &seq(&[0, 1], 2, 3)).is_ok());
        assert!(LabelSequence::new(vec![2], 2, 3).is_err());
        assert!(LabelSequence::new(vec![5], 2, 3).is_err());
        assert!(ctc_loss(&m, &seq(&[0, 1, 0], 2, 3)).is_err());
    }

    #[test]
    fn single_timestep_gradient_closed_form() {
        let m = ConfidenceMatrix::new(1, 3, vec![0.6, 0.1, 0.3]).unwrap();
        let g = ctc_gradient(&m, &seq(&[0], 2, 3)).unwrap();
        assert!((g[0] - (0.6 - 1.0)).abs() < 1e-15);
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert!((g[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits: Vec<f64> = (0..20).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let m = ConfidenceMatrix::from_logits(5, 4, &logits).unwrap();
        let g = ctc_gradient(&m, &seq(&[0, 2], 3, 4)).unwrap();
        for row in g.chunks(4) {
            assert!(row.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn loss_matches_enumeration_on_small_instances() {
        let logits: Vec<f64> = (0..15).map(|i| ((i * 53 % 17) as f64 - 8.0) / 4.0).collect();
        let m = ConfidenceMatrix::from_logits(5, 3, &logits).unwrap();
        for target in [vec![], vec![0], vec![1, 0], vec![0, 0], vec![1, 1, 0]] {
            let expected = -brute_force_probability(&m, &target, 2).ln();
            let loss = ctc_loss(&m, &seq(&target, 2, 3)).unwrap();
            assert!((loss - expected).abs() < 1e-9, "{target:?}");
        }
    }

    #[test]
    fn best_path_collapse_rules() {
        let alpha = Alphabet::new(vec!['-', 'a', 'b'], 0).unwrap();
        let one_hot = |cls: &[usize]| {
            let mut d = vec![0.0; cls.len() * 3];
            for (t, &c) in cls.iter().enumerate() {
                d[t * 3 + c] = 1.0;
            }
            ConfidenceMatrix::new(cls.len(), 3, d).unwrap()
        };
        assert_eq!(best_path(&one_hot(&[1, 1, 0, 2]), &alpha), "ab");
        assert_eq!(best_path(&one_hot(&[0, 0, 0]), &alpha), "");
        assert_eq!(best_path(&one_hot(&[1, 0, 1]), &alpha), "aa");
    }

    #[test]
    fn path_probability_basics() {
        let m = ConfidenceMatrix::new(1, 2, vec![0.7, 0.3]).unwrap();
        assert_eq!(path_probability(&m, &[0]).unwrap(), 0.7);
        assert!(path_probability(&m, &[0, 1]).is_err());
        let uniform = ConfidenceMatrix::new(3, 4, vec![0.25; 12]).unwrap();
        assert!((path_probability(&uniform, &[3, 1, 2]).unwrap() - 0.25f64.powi(3)).abs() < 1e-18);
    }

    #[test]
    fn all_paths_sum_to_one() {
        let logits: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let m = ConfidenceMatrix::from_logits(4, 3, &logits).unwrap();
        let mut total = 0.0;
        for code in 0..81usize {
            let path = [code % 3, code / 3 % 3, code / 9 % 3, code / 27];
            total += path_probability(&m, &path).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn alphabet_encoding() {
        let a = Alphabet::new(vec!['#', ' ', 'a', 'b'], 0).unwrap();
        let s = a.encode("ab a").unwrap();
        assert_eq!(s.labels(), &[2, 3, 1, 2]);
        assert_eq!(a.decode(s.labels()), "ab a");
        assert!(a.encode("#").is_err());
        assert!(a.encode("c").is_err());
        assert!(Alphabet::new(vec!['a', 'a'], 0).is_err());
        assert!(Alphabet::new(vec!['a'], 0).is_err());
    }
}
