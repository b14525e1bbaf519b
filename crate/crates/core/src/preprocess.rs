//! Text normalization and tokenization.
//!
//! [`normalize`] applies, in order:
//!
//! 1. URL removal (`http://`, `https://`, `www.` prefixes and the literal
//!    placeholder token `URL`),
//! 2. `@mention` replacement with the mention token,
//! 3. `-` to space,
//! 4. `#` to space (the tag text is kept),
//! 5. deletion of punctuation and any other symbol that is not a letter,
//!    digit, apostrophe or whitespace,
//! 6. lowercasing,
//! 7. whitespace collapsing and trimming.
//!
//! Stopwords are never removed.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").expect("valid regex"));
static URL_LITERAL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bURL\b").expect("valid regex"));
// `\B` keeps e-mail addresses (`a@b.com`) from being read as mentions.
static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\B@\w+").expect("valid regex"));

/// Punctuation enumerated for the EXIST preprocessing, plus `@ # < > | "`.
pub const DEFAULT_PUNCTUATION: &str = "!*^&()%$,.:;[]{}=~_+?\\/\u{2018}\u{201C}\u{201D}\u{2019}@#<>|\"";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    punctuation_set: BTreeSet<char>,
    pub mention_token: String,
    pub strip_url_literal: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            punctuation_set: DEFAULT_PUNCTUATION.chars().collect(),
            mention_token: "username".to_string(),
            strip_url_literal: true,
        }
    }
}

impl PreprocessConfig {
    pub fn new(
        punctuation: impl IntoIterator<Item = char>,
        mention_token: impl Into<String>,
        strip_url_literal: bool,
    ) -> Result<Self> {
        let punctuation_set: BTreeSet<char> = punctuation.into_iter().collect();
        if punctuation_set.contains(&'\'') {
            return Err(Error::Config(
                "the apostrophe cannot be part of the punctuation set".into(),
            ));
        }
        let mention_token = mention_token.into();
        if mention_token.is_empty()
            || !mention_token
                .chars()
                .all(|c| c.is_alphanumeric() && c.to_lowercase().eq([c]))
        {
            return Err(Error::Config(format!(
                "mention token `{mention_token}` must be a non-empty lowercase word"
            )));
        }
        Ok(PreprocessConfig {
            punctuation_set,
            mention_token,
            strip_url_literal,
        })
    }

    pub fn punctuation_set(&self) -> &BTreeSet<char> {
        &self.punctuation_set
    }
}

pub fn normalize(raw: &str, cfg: &PreprocessConfig) -> String {
    let text = URL_RE.replace_all(raw, " ");
    let text = if cfg.strip_url_literal {
        URL_LITERAL_RE.replace_all(&text, " ")
    } else {
        text
    };
    let text = MENTION_RE.replace_all(&text, cfg.mention_token.as_str());

    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '-' || c == '#' || c.is_whitespace() {
            cleaned.push(' ');
            continue;
        }
        if cfg.punctuation_set.contains(&c) {
            continue;
        }
        // Lowercasing can expand to several chars (e.g. combining marks);
        // filter after expansion so a second pass has nothing left to drop.
        for lc in c.to_lowercase() {
            if lc == '\'' || (lc.is_alphanumeric() && !cfg.punctuation_set.contains(&lc)) {
                cleaned.push(lc);
            }
        }
    }

    let mut out = String::with_capacity(cleaned.len());
    for word in cleaned.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits normalized text on spaces, dropping empty pieces.
pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// `tokenize(normalize(raw))`.
pub fn preprocess(raw: &str, cfg: &PreprocessConfig) -> Vec<String> {
    tokenize(&normalize(raw, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(s: &str) -> String {
        normalize(s, &PreprocessConfig::default())
    }

    #[test]
    fn table_fixtures() {
        assert_eq!(
            norm("@user @user Wow, your skirt is very short. What is it's length? 5 inch or more?"),
            "username username wow your skirt is very short what is it's length 5 inch or more"
        );
        assert_eq!(
            norm("@user This is a super news for the #WomensRights."),
            "username this is a super news for the womensrights"
        );
    }

    #[test]
    fn small_cases() {
        assert_eq!(norm(""), "");
        assert_eq!(norm("e-mail me!"), "e mail me");
        assert_eq!(
            norm("he'll be your husband after all URL"),
            "he'll be your husband after all"
        );
        assert_eq!(norm("mail me at a@b.com"), "mail me at abcom");
    }

    #[test]
    fn url_literal_can_be_kept() {
        let cfg = PreprocessConfig::new(DEFAULT_PUNCTUATION.chars(), "username", false).unwrap();
        assert_eq!(normalize("after all URL", &cfg), "after all url");
    }

    #[test]
    fn config_rejects_apostrophe() {
        assert!(PreprocessConfig::new("!'".chars(), "username", true).is_err());
        assert!(PreprocessConfig::new("!".chars(), "User", true).is_err());
    }

    #[test]
    fn tokenize_cases() {
        assert_eq!(tokenize("a b c"), vec!["a", "b", "c"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("what is it's length"),
            vec!["what", "is", "it's", "length"]
        );
    }

    proptest! {
        #[test]
        fn keeps_not(words in prop::collection::vec("[a-zA-Z]{1,8}", 0..6), pos in 0usize..6) {
            let mut words = words;
            let pos = pos.min(words.len());
            words.insert(pos, "not".to_string());
            let text = words.join(" ");
            let out = norm(&text);
            prop_assert!(out.split(' ').any(|w| w == "not"));
        }
    }
}
