//! Word list stored as a trie over alphabet classes, with a dynamic program
//! that scores every dictionary word against every prefix of a matrix in a
//! single pass.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::ctc::Alphabet;
use crate::error::{HtrError, Result};
use crate::matrix::{log_add, ConfidenceMatrix};

#[derive(Debug, Clone)]
struct Node {
    label: usize,
    depth: usize,
    children: BTreeMap<usize, usize>,
    word: Option<usize>,
}

/// Trie over class sequences; node 0 is the root.
#[derive(Debug, Clone)]
pub(crate) struct Trie {
    nodes: Vec<Node>,
}

impl Trie {
    fn new() -> Self {
        Trie {
            nodes: vec![Node {
                label: usize::MAX,
                depth: 0,
                children: BTreeMap::new(),
                word: None,
            }],
        }
    }

    fn insert(&mut self, labels: &[usize], word: usize) {
        let mut at = 0;
        for &l in labels {
            at = match self.nodes[at].children.get(&l) {
                Some(&next) => next,
                None => {
                    let depth = self.nodes[at].depth + 1;
                    self.nodes.push(Node {
                        label: l,
                        depth,
                        children: BTreeMap::new(),
                        word: None,
                    });
                    let next = self.nodes.len() - 1;
                    self.nodes[at].children.insert(l, next);
                    next
                }
            };
        }
        self.nodes[at].word = Some(word);
    }
}

/// Best word found for one prefix length of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EndCandidate {
    pub cost: f64,
    pub word: usize,
}

/// Immutable word list; duplicates are stored once.
#[derive(Debug, Clone)]
pub struct Dictionary {
    alphabet: Alphabet,
    words: Vec<String>,
    lengths: Vec<usize>,
    forward: Trie,
    reversed: Trie,
    skipped: usize,
}

impl Dictionary {
    /// Builds a dictionary, silently dropping empty words and words with
    /// characters outside `alphabet` (see [`Dictionary::skipped`]).
    pub fn from_words<I, S>(alphabet: &Alphabet, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut dict = Dictionary {
            alphabet: alphabet.clone(),
            words: Vec::new(),
            lengths: Vec::new(),
            forward: Trie::new(),
            reversed: Trie::new(),
            skipped: 0,
        };
        let mut seen = HashSet::new();
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || seen.contains(w) {
                continue;
            }
            let Ok(seq) = alphabet.encode(w) else {
                dict.skipped += 1;
                continue;
            };
            let id = dict.words.len();
            let mut labels = seq.labels().to_vec();
            dict.forward.insert(&labels, id);
            labels.reverse();
            dict.reversed.insert(&labels, id);
            seen.insert(w.to_string());
            dict.words.push(w.to_string());
            dict.lengths.push(labels.len());
        }
        dict
    }

    /// Reads a UTF-8 word list, one word per line; surrounding whitespace is
    /// trimmed and blank lines are ignored.
    pub fn load(path: &Path, alphabet: &Alphabet) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?;
        Ok(Self::from_words(alphabet, text.lines().map(str::trim)))
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words in insertion order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        let Ok(seq) = self.alphabet.encode(word) else {
            return false;
        };
        let mut at = 0;
        for l in seq.labels() {
            match self.forward.nodes[at].children.get(l) {
                Some(&next) => at = next,
                None => return false,
            }
        }
        self.forward.nodes[at].word.is_some()
    }

    /// Number of input words rejected as unencodable.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub(crate) fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    /// For each prefix length `L` in `1..=T`, the word minimizing
    /// `-ln p(word | matrix[0, L)) + alpha * |word|`; index 0 is unused.
    pub(crate) fn best_prefix_words(
        &self,
        matrix: &ConfidenceMatrix,
        alpha: f64,
        beam: Option<usize>,
    ) -> Vec<Option<EndCandidate>> {
        best_words_by_length(&self.forward, self, matrix, alpha, beam)
    }

    /// For each suffix length `L` in `1..=T`, the word minimizing
    /// `-ln p(word | matrix[T - L, T)) + alpha * |word|`.
    pub(crate) fn best_suffix_words(
        &self,
        matrix: &ConfidenceMatrix,
        alpha: f64,
        beam: Option<usize>,
    ) -> Vec<Option<EndCandidate>> {
        // CTC probabilities are invariant under reversing both the time
        // axis and the label sequence.
        best_words_by_length(&self.reversed, self, &matrix.reversed(), alpha, beam)
    }

    /// Lower cost wins; near-equal costs fall back to the smaller word.
    pub(crate) fn prefer(&self, a: EndCandidate, b: EndCandidate) -> bool {
        match super::compare_costs(a.cost, b.cost) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.words[a.word] < self.words[b.word],
        }
    }
}

/// Prefix forward variables of one trie node: log probability of the first
/// `t + 1` frames emitting the node's prefix, ending in a blank (`b`) or in
/// the prefix's last label (`nb`).
struct Prefix {
    node: usize,
    b: Vec<f64>,
    nb: Vec<f64>,
}

fn best_words_by_length(
    trie: &Trie,
    dict: &Dictionary,
    matrix: &ConfidenceMatrix,
    alpha: f64,
    beam: Option<usize>,
) -> Vec<Option<EndCandidate>> {
    let t_len = matrix.timesteps();
    let classes = matrix.classes();
    let blank = dict.alphabet.garbage();
    let mut best: Vec<Option<EndCandidate>> = vec![None; t_len + 1];
    if t_len == 0 {
        return best;
    }
    let lp = matrix.log_probs();

    let mut root_b = vec![f64::NEG_INFINITY; t_len];
    root_b[0] = lp[blank];
    for t in 1..t_len {
        root_b[t] = root_b[t - 1] + lp[t * classes + blank];
    }
    let mut level = vec![Prefix {
        node: 0,
        b: root_b,
        nb: vec![f64::NEG_INFINITY; t_len],
    }];

    while !level.is_empty() {
        let mut next = Vec::new();
        for parent in &level {
            let pnode = &trie.nodes[parent.node];
            for (&c, &child) in &pnode.children {
                let repeat = c == pnode.label;
                let mut b = vec![f64::NEG_INFINITY; t_len];
                let mut nb = vec![f64::NEG_INFINITY; t_len];
                // the empty prefix before frame 0 has probability one
                let entry0 = if parent.node == 0 { 0.0 } else { f64::NEG_INFINITY };
                nb[0] = lp[c] + entry0;
                for t in 1..t_len {
                    let mut acc = log_add(nb[t - 1], parent.b[t - 1]);
                    if !repeat {
                        acc = log_add(acc, parent.nb[t - 1]);
                    }
                    nb[t] = acc + lp[t * classes + c];
                    b[t] = log_add(b[t - 1], nb[t - 1]) + lp[t * classes + blank];
                }
                if nb.iter().all(|&v| v == f64::NEG_INFINITY) {
                    continue;
                }
                let node = &trie.nodes[child];
                if let Some(word) = node.word {
                    let penalty = alpha * dict.lengths[word] as f64;
                    for t in 0..t_len {
                        let ll = log_add(b[t], nb[t]);
                        if ll == f64::NEG_INFINITY {
                            continue;
                        }
                        let cand = EndCandidate {
                            cost: -ll + penalty,
                            word,
                        };
                        let slot = &mut best[t + 1];
                        if slot.is_none_or(|cur| dict.prefer(cand, cur)) {
                            *slot = Some(cand);
                        }
                    }
                }
                if !node.children.is_empty() {
                    next.push(Prefix { node: child, b, nb });
                }
            }
        }
        if let Some(width) = beam {
            if next.len() > width {
                // rank by the most probable end frame of each prefix
                let key = |p: &Prefix| {
                    p.b.iter()
                        .zip(&p.nb)
                        .map(|(&b, &nb)| log_add(b, nb))
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let mut keyed: Vec<(f64, Prefix)> = next.into_iter().map(|p| (key(&p), p)).collect();
                keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.node.cmp(&b.1.node)));
                keyed.truncate(width);
                next = keyed.into_iter().map(|(_, p)| p).collect();
            }
        }
        level = next;
    }
    best
}
