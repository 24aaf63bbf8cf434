//! Token normalization applied to recognized and reference text before
//! scoring.

use std::sync::LazyLock;

use regex::Regex;

/// Marks split off wherever they occur.
static ALWAYS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"([.,;:!?"()\[\]“”„])"#).unwrap());
/// Apostrophes and hyphens split off only at the edges of a token, so
/// "don't" and "well-known" stay whole.
static LEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|\s)(['‘’-])(\S)").unwrap());
static TRAILING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\S)(['‘’-])(\s|$)").unwrap());
static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Separates punctuation, quotes and brackets from adjacent words with
/// single spaces, collapses whitespace runs and trims. Idempotent.
pub fn scoring_tokenize(text: &str) -> String {
    let mut s = ALWAYS.replace_all(text, " $1 ").into_owned();
    // each pass peels one mark per token edge; runs like "--x" need several
    loop {
        let next = LEADING.replace_all(&s, "$1$2 $3");
        let next = TRAILING.replace_all(&next, "$1 $2$3").into_owned();
        if next == s {
            break;
        }
        s = next;
    }
    SPACES.replace_all(s.trim(), " ").into_owned()
}
