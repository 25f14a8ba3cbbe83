//! Review cleaning and feature normalisation.

use std::sync::LazyLock;

use regex::{Captures, Regex};

use crate::{Error, Result};

/// Scheme-anchored links plus bare `www.` spans, up to the next whitespace.
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|\bwww\.)\S*").expect("url regex"));

/// Extended pictographs with their presentation selectors, skin-tone
/// modifiers, keycap and tag components, chained by zero-width joiners.
static EMOJI: LazyLock<Regex> = LazyLock::new(|| {
    const PART: &str = r"[\p{Extended_Pictographic}\p{Regional_Indicator}\p{Emoji_Modifier}\x{FE0E}\x{FE0F}\x{20E3}\x{E0020}-\x{E007F}]";
    Regex::new(&format!(r"{PART}+(?:\x{{200D}}{PART}+)*")).expect("emoji regex")
});

static PUNCT_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}+").expect("punct regex"));

/// Punctuation that binds two word characters into one token (`note-taking`,
/// `don't`, `v2.0`, `dark/light`).
const JOINERS: &[char] = &['-', '\u{2010}', '\u{2011}', '\'', '\u{2019}', '.', '/', '_', '&'];

/// Remove emojis and URLs and collapse whitespace, keeping punctuation.
///
/// Returns [`Error::EmptyAfterCleaning`] when nothing is left; callers treat
/// that as a skippable review.
pub fn preprocess_review(raw: &str) -> Result<String> {
    let no_urls = URL.replace_all(raw, " ");
    let no_emoji = EMOJI.replace_all(&no_urls, " ");
    let cleaned = collapse_whitespace(&no_emoji);
    if cleaned.is_empty() {
        Err(Error::EmptyAfterCleaning)
    } else {
        Ok(cleaned)
    }
}

/// Canonical surface form of an extracted feature.
///
/// Lowercases, turns punctuation at word boundaries into spaces (so leading
/// and trailing punctuation disappears), keeps single joiner characters
/// between two word characters, and collapses whitespace. The result splits
/// on single spaces into its token list.
pub fn normalize_feature(raw: &str) -> Result<String> {
    let lower = raw.to_lowercase();
    let spaced = PUNCT_RUN.replace_all(&lower, |caps: &Captures| {
        let m = caps.get(0).expect("whole match");
        let run = m.as_str();
        let mut chars = run.chars();
        let single = chars.next().filter(|_| chars.next().is_none());
        let before = lower[..m.start()].chars().next_back();
        let after = lower[m.end()..].chars().next();
        match single {
            Some(c) if JOINERS.contains(&c) && is_word(before) && is_word(after) => run.to_string(),
            _ => " ".to_string(),
        }
    });
    let surface = collapse_whitespace(&spaced);
    if surface.is_empty() {
        Err(Error::RejectedFeature(raw.to_string()))
    } else {
        Ok(surface)
    }
}

/// Tokens of a normalised surface.
pub fn tokenize(surface: &str) -> Vec<String> {
    surface.split_whitespace().map(str::to_string).collect()
}

fn is_word(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
