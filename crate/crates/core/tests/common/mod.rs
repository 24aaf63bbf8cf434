//! Independent reference implementations used by the integration tests.
//! None of them call into the code they check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-major `t x c` probabilities from logits drawn uniformly in
/// `[-spread, spread]`.
pub fn random_rows(rng: &mut impl Rng, t: usize, c: usize, spread: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t * c);
    for _ in 0..t {
        let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-spread..=spread)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        out.extend(logits.iter().map(|l| l.exp() / z));
    }
    out
}

/// Removes repeats, then blanks.
pub fn collapse_path(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Sum over every one of the `c^t` paths that collapse to `target`.
pub fn brute_force_probability(rows: &[f64], t: usize, c: usize, target: &[usize], blank: usize) -> f64 {
    let mut total = 0.0;
    let mut path = vec![0usize; t];
    for code in 0..c.pow(t as u32) {
        let mut x = code;
        let mut p = 1.0;
        for (s, slot) in path.iter_mut().enumerate() {
            *slot = x % c;
            x /= c;
            p *= rows[s * c + *slot];
        }
        if collapse_path(&path, blank) == target {
            total += p;
        }
    }
    total
}

/// Textbook CTC forward recursion in probability space over the
/// blank-interleaved label sequence.
pub fn forward_probability(rows: &[f64], t: usize, c: usize, target: &[usize], blank: usize) -> f64 {
    if t == 0 {
        return if target.is_empty() { 1.0 } else { 0.0 };
    }
    let mut ext = vec![blank];
    for &l in target {
        ext.push(l);
        ext.push(blank);
    }
    let s = ext.len();
    let mut a = vec![0.0; s];
    a[0] = rows[ext[0]];
    if s > 1 {
        a[1] = rows[ext[1]];
    }
    for step in 1..t {
        let mut next = vec![0.0; s];
        for i in 0..s {
            let mut v = a[i];
            if i >= 1 {
                v += a[i - 1];
            }
            if i >= 2 && ext[i] != blank && ext[i] != ext[i - 2] {
                v += a[i - 2];
            }
            next[i] = v * rows[step * c + ext[i]];
        }
        a = next;
    }
    a[s - 1] + if s > 1 { a[s - 2] } else { 0.0 }
}

/// Substitutions, insertions and deletions of a minimal alignment found by
/// a full dynamic-programming table. The backtrace prefers a diagonal step,
/// then a deletion, then an insertion.
pub fn edit_oracle<T: PartialEq>(r: &[T], h: &[T]) -> (usize, usize, usize) {
    let (n, m) = (r.len(), h.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let (mut i, mut j) = (n, m);
    let (mut s, mut ins, mut del) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]) {
            s += usize::from(r[i - 1] != h[j - 1]);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            del += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }
    assert_eq!(s + ins + del, d[n][m]);
    (s, ins, del)
}

/// Corpus rate in percent: total edits over total reference length.
pub fn rate_oracle<T: PartialEq>(pairs: &[(Vec<T>, Vec<T>)]) -> f64 {
    let edits: usize = pairs.iter().map(|(r, h)| {
        let (s, i, d) = edit_oracle(r, h);
        s + i + d
    }).sum();
    let len: usize = pairs.iter().map(|(r, _)| r.len()).sum();
    100.0 * edits as f64 / len as f64
}

/// A line of lowercase words over `letters`, single-spaced.
pub fn random_line(rng: &mut impl Rng, letters: &[char], max_words: usize) -> String {
    let words = rng.random_range(1..=max_words);
    (0..words)
        .map(|_| {
            let n = rng.random_range(1..=5);
            (0..n).map(|_| letters[rng.random_range(0..letters.len())]).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exhaustive lexicon decoding: every word over the whole matrix and every
/// `(w1, split, w2)`, with costs from [`forward_probability`]. Returns the
/// least-cost text and its cost; near-equal costs (relative 1e-12) go to the
/// lexicographically smaller text.
pub fn exhaustive_decode(
    rows: &[f64],
    t: usize,
    c: usize,
    words: &[(String, Vec<usize>)],
    blank: usize,
    alpha: f64,
    two_words: bool,
) -> Option<(String, f64)> {
    let cost = |r: &[f64], len: usize, labels: &[usize]| {
        let p = forward_probability(r, len, c, labels, blank);
        if p > 0.0 {
            -p.ln() + alpha * labels.len() as f64
        } else {
            f64::INFINITY
        }
    };
    let mut best: Option<(String, f64)> = None;
    let mut offer = |text: String, cost: f64| {
        if !cost.is_finite() {
            return;
        }
        let better = match &best {
            None => true,
            Some((bt, bc)) => {
                let tol = 1e-12 * cost.abs().max(bc.abs());
                cost < bc - tol || ((cost - bc).abs() <= tol && text < *bt)
            }
        };
        if better {
            best = Some((text, cost));
        }
    };
    if two_words {
        for split in 1..t {
            let (left, right) = rows.split_at(split * c);
            let firsts: Vec<f64> = words.iter().map(|(_, l)| cost(left, split, l)).collect();
            let seconds: Vec<f64> = words.iter().map(|(_, l)| cost(right, t - split, l)).collect();
            for (i, (w1, _)) in words.iter().enumerate() {
                for (j, (w2, _)) in words.iter().enumerate() {
                    offer(format!("{w1} {w2}"), firsts[i] + seconds[j]);
                }
            }
        }
    } else {
        for (w, l) in words {
            offer(w.clone(), cost(rows, t, l));
        }
    }
    best
}

/// Least-squares slope `dx/dy` of the per-row ink centroid of each bar
/// (bars are separated by empty columns), as an angle in degrees; the mean
/// over bars.
pub fn bar_lean_degrees(pixels: &[u8], width: usize, height: usize) -> f64 {
    let ink = |x: usize, y: usize| pixels[y * width + x] < 128;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let column_has_ink: Vec<bool> = (0..width).map(|x| (0..height).any(|y| ink(x, y))).collect();
    let mut x = 0;
    while x < width {
        if column_has_ink[x] {
            let start = x;
            while x < width && column_has_ink[x] {
                x += 1;
            }
            runs.push((start, x));
        } else {
            x += 1;
        }
    }
    let mut angles = Vec::new();
    for (x0, x1) in runs {
        let pts: Vec<(f64, f64)> = (0..height)
            .filter_map(|y| {
                let xs: Vec<usize> = (x0..x1).filter(|&x| ink(x, y)).collect();
                (!xs.is_empty()).then(|| (y as f64, xs.iter().sum::<usize>() as f64 / xs.len() as f64))
            })
            .collect();
        if pts.len() < 3 {
            continue;
        }
        let n = pts.len() as f64;
        let my = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - my) * (p.1 - mx)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - my).powi(2)).sum();
        // rows grow downwards, so a top-right lean has negative dx/dy
        angles.push((-cov / var).atan().to_degrees());
    }
    angles.iter().sum::<f64>() / angles.len() as f64
}
