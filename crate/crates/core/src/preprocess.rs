//! Corpus parsing and the tweet-cleaning pipeline: rule-based
//! transliteration, then noise removal.
//!
//! The corpus format is plain UTF-8, one block per tweet: a `meta <uid>
//! [label]` line followed by one `<token>\t<tag>` line per token, blocks
//! separated by a blank line. Unlabeled blocks are allowed so test sets can
//! be scored without gold labels.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Fixed class order used everywhere: indices into probability vectors,
/// confusion-matrix axes, and tie-breaking.
pub const CLASS_LABELS: [&str; 3] = ["negative", "neutral", "positive"];

/// Number of sentiment classes.
pub const NUM_CLASSES: usize = 3;

/// Token emitted when noise removal deletes every token of a tweet, so the
/// example stays classifiable.
pub const PLACEHOLDER_TOKEN: &str = "<empty>";

pub fn label_index(label: &str) -> Option<usize> {
    CLASS_LABELS.iter().position(|&l| l == label)
}

pub fn label_name(class: usize) -> &'static str {
    CLASS_LABELS[class]
}

/// Three-way language classification of a raw tag. `Lang1` is the designated
/// transliterable language.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lang {
    Lang1,
    Lang2,
    Other,
}

/// Maps the corpus' raw tag strings onto [`Lang`]. The default scheme treats
/// `Hin` as the transliterable language and `Eng`/`Spa` as the untouched
/// second language; unknown tags classify as `Other`.
#[derive(Clone, Debug)]
pub struct TagScheme {
    lang1: Vec<String>,
    lang2: Vec<String>,
}

impl Default for TagScheme {
    fn default() -> Self {
        Self {
            lang1: vec!["Hin".to_string()],
            lang2: vec!["Eng".to_string(), "Spa".to_string()],
        }
    }
}

impl TagScheme {
    pub fn new(lang1: Vec<String>, lang2: Vec<String>) -> Self {
        Self { lang1, lang2 }
    }

    pub fn classify(&self, tag: &str) -> Lang {
        if self.lang1.iter().any(|t| t == tag) {
            Lang::Lang1
        } else if self.lang2.iter().any(|t| t == tag) {
            Lang::Lang2
        } else {
            Lang::Other
        }
    }
}

/// One token as it appears in the corpus, with its raw language tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawToken {
    pub text: String,
    pub tag: String,
}

/// A parsed tweet before cleaning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTweet {
    pub uid: String,
    pub tokens: Vec<RawToken>,
    pub label: Option<usize>,
}

/// A tweet after transliteration and noise removal; tags are no longer
/// needed downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanTweet {
    pub uid: String,
    pub tokens: Vec<String>,
    pub label: Option<usize>,
}

/// Parse failure with the 1-based line it was detected on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl core::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// Parses a whole corpus file. An empty file yields an empty list.
pub fn parse_corpus(text: &str) -> Result<Vec<RawTweet>, ParseError> {
    let mut tweets = Vec::new();
    let mut current: Option<RawTweet> = None;
    let mut last_line = 0;
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            if let Some(tweet) = current.take() {
                if tweet.tokens.is_empty() {
                    return Err(err(lineno, "block has no token lines"));
                }
                tweets.push(tweet);
            }
            continue;
        }
        match current.as_mut() {
            None => {
                let mut parts = line.split_whitespace();
                if parts.next() != Some("meta") {
                    return Err(err(lineno, "expected a `meta <uid> [label]` line"));
                }
                let uid = parts
                    .next()
                    .ok_or_else(|| err(lineno, "meta line is missing the uid"))?
                    .to_string();
                let label = match parts.next() {
                    None => None,
                    Some(s) => {
                        Some(label_index(s).ok_or_else(|| err(lineno, format!("unknown label `{s}`")))?)
                    }
                };
                if parts.next().is_some() {
                    return Err(err(lineno, "unexpected field after the label"));
                }
                current = Some(RawTweet {
                    uid,
                    tokens: Vec::new(),
                    label,
                });
            }
            Some(tweet) => {
                let mut fields = line.split('\t');
                match (fields.next(), fields.next(), fields.next()) {
                    (Some(tok), Some(tag), None) if !tok.is_empty() && !tag.is_empty() => {
                        tweet.tokens.push(RawToken {
                            text: tok.to_string(),
                            tag: tag.to_string(),
                        });
                    }
                    _ => {
                        return Err(err(
                            lineno,
                            "expected `<token>\\t<tag>` with exactly one tab \
                             (is a blank separator line missing?)",
                        ))
                    }
                }
            }
        }
    }
    if let Some(tweet) = current.take() {
        if tweet.tokens.is_empty() {
            return Err(err(last_line, "block has no token lines"));
        }
        tweets.push(tweet);
    }
    Ok(tweets)
}

/// Inverse of [`parse_corpus`] in canonical form: tab separators, one blank
/// line between blocks, single trailing newline.
pub fn serialize_corpus(tweets: &[RawTweet]) -> String {
    let mut out = String::new();
    for (i, tweet) in tweets.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("meta\t");
        out.push_str(&tweet.uid);
        if let Some(class) = tweet.label {
            out.push('\t');
            out.push_str(label_name(class));
        }
        out.push('\n');
        for token in &tweet.tokens {
            out.push_str(&token.text);
            out.push('\t');
            out.push_str(&token.tag);
            out.push('\n');
        }
    }
    out
}

/// Longest-match-first substring rewriting table, used for offline
/// back-transliteration. The file format is one `source\ttarget` pair per
/// line.
#[derive(Clone, Debug, Default)]
pub struct RuleTable {
    rules: Vec<(String, String)>,
}

impl RuleTable {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut rules = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(src), Some(dst), None) if !src.is_empty() => {
                    rules.push((src.to_string(), dst.to_string()));
                }
                _ => {
                    return Err(err(
                        idx + 1,
                        "expected `<source>\\t<target>` with exactly one tab",
                    ))
                }
            }
        }
        Ok(Self::from_pairs(rules))
    }

    pub fn from_pairs(mut rules: Vec<(String, String)>) -> Self {
        // longest source first; lexicographic order on equal lengths keeps
        // the match deterministic
        rules.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Self { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Greedy left-to-right rewrite: at each position the longest matching
    /// source wins; with no match the character is copied unchanged.
    pub fn apply(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        'scan: while !rest.is_empty() {
            for (src, dst) in &self.rules {
                if rest.starts_with(src.as_str()) {
                    out.push_str(dst);
                    rest = &rest[src.len()..];
                    continue 'scan;
                }
            }
            let ch = rest.chars().next().unwrap();
            out.push(ch);
            rest = &rest[ch.len_utf8()..];
        }
        out
    }
}

/// Rewrites tokens whose tag classifies as the transliterable language;
/// everything else passes through untouched. With no rule table this is the
/// identity.
pub fn transliterate(tweet: &RawTweet, rules: Option<&RuleTable>, scheme: &TagScheme) -> RawTweet {
    let Some(rules) = rules else {
        return tweet.clone();
    };
    let tokens = tweet
        .tokens
        .iter()
        .map(|token| {
            if scheme.classify(&token.tag) == Lang::Lang1 {
                RawToken {
                    text: rules.apply(&token.text),
                    tag: token.tag.clone(),
                }
            } else {
                token.clone()
            }
        })
        .collect();
    RawTweet {
        uid: tweet.uid.clone(),
        tokens,
        label: tweet.label,
    }
}

/// Unicode blocks treated as emoji; a token is an emoticon when every char
/// falls inside one of these, or when it matches the ASCII emoticon list.
const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x1F000, 0x1F0FF), // mahjong, dominoes, playing cards
    (0x1F300, 0x1F5FF), // misc symbols and pictographs
    (0x1F600, 0x1F64F), // emoticons
    (0x1F680, 0x1F6FF), // transport and map symbols
    (0x1F900, 0x1F9FF), // supplemental symbols and pictographs
    (0x1FA70, 0x1FAFF), // symbols and pictographs extended-A
    (0x1F1E6, 0x1F1FF), // regional indicators
    (0x2600, 0x26FF),   // misc symbols
    (0x2700, 0x27BF),   // dingbats
    (0x2B00, 0x2BFF),   // misc symbols and arrows
    (0x2300, 0x23FF),   // misc technical (watch, hourglass, media keys)
    (0xFE00, 0xFE0F),   // variation selectors
    (0x200D, 0x200D),   // zero-width joiner
    (0x20E3, 0x20E3),   // combining enclosing keycap
];

const ASCII_EMOTICONS: [&str; 6] = [":)", ":(", ":d", ";)", ":-)", ":-("];

fn is_emoji_char(c: char) -> bool {
    let p = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| p >= lo && p <= hi)
}

fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    if lower.starts_with("www.") {
        return true;
    }
    if let Some(pos) = token.find("://") {
        if pos > 0 {
            let scheme = &token[..pos];
            let mut chars = scheme.chars();
            let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
            return head_ok
                && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-'));
        }
    }
    false
}

fn is_emoticon(token: &str) -> bool {
    if ASCII_EMOTICONS.contains(&token.to_lowercase().as_str()) {
        return true;
    }
    !token.is_empty() && token.chars().all(is_emoji_char)
}

/// True for usernames (`@...`), URLs and emoticons. Hashtags are never
/// noise; they survive verbatim.
pub fn is_noise_token(token: &str) -> bool {
    if token.starts_with('#') {
        return false;
    }
    token.starts_with('@') || is_url(token) || is_emoticon(token)
}

/// Drops noise tokens, preserving the survivors' order. A tweet reduced to
/// nothing becomes the single [`PLACEHOLDER_TOKEN`].
pub fn remove_noise(tweet: &RawTweet) -> CleanTweet {
    let mut tokens: Vec<String> = tweet
        .tokens
        .iter()
        .filter(|t| !is_noise_token(&t.text))
        .map(|t| t.text.clone())
        .collect();
    if tokens.is_empty() {
        tokens.push(PLACEHOLDER_TOKEN.to_string());
    }
    CleanTweet {
        uid: tweet.uid.clone(),
        tokens,
        label: tweet.label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(tokens: &[(&str, &str)]) -> RawTweet {
        RawTweet {
            uid: "t".to_string(),
            tokens: tokens
                .iter()
                .map(|&(text, tag)| RawToken {
                    text: text.to_string(),
                    tag: tag.to_string(),
                })
                .collect(),
            label: None,
        }
    }

    #[test]
    fn parses_single_token_block() {
        let tweets = parse_corpus("meta\t1\tpositive\nhello\tEng\n").unwrap();
        assert_eq!(tweets.len(), 1);
        assert_eq!(tweets[0].uid, "1");
        assert_eq!(tweets[0].label, Some(2));
        assert_eq!(tweets[0].tokens[0].text, "hello");
        assert_eq!(tweets[0].tokens[0].tag, "Eng");
    }

    #[test]
    fn meta_line_accepts_space_separators() {
        let tweets = parse_corpus("meta 7 negative\nbura\tHin\n").unwrap();
        assert_eq!(tweets[0].uid, "7");
        assert_eq!(tweets[0].label, Some(0));
    }

    #[test]
    fn unlabeled_block_is_allowed() {
        let tweets = parse_corpus("meta\t9\nhola\tSpa\n").unwrap();
        assert_eq!(tweets[0].label, None);
    }

    #[test]
    fn empty_file_yields_empty_list() {
        assert_eq!(parse_corpus("").unwrap(), Vec::new());
    }

    #[test]
    fn missing_blank_separator_is_reported_with_line() {
        let text = "meta\t1\tpositive\nhello\tEng\nmeta\t2\tnegative\nbye\tEng\n";
        let e = parse_corpus(text).unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn unknown_label_is_an_error() {
        let e = parse_corpus("meta\t1\tgreat\nhi\tEng\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("great"));
    }

    #[test]
    fn block_without_tokens_is_an_error() {
        let e = parse_corpus("meta\t1\tpositive\n\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let text = "meta\t1\tpositive\nhello\tEng\nyaar\tHin\n\nmeta\t2\nhola\tSpa\n";
        let tweets = parse_corpus(text).unwrap();
        assert_eq!(serialize_corpus(&tweets), text);
        assert_eq!(parse_corpus(&serialize_corpus(&tweets)).unwrap(), tweets);
    }

    #[test]
    fn no_rule_table_is_identity() {
        let t = tweet(&[("na", "Hin"), ("hello", "Eng")]);
        assert_eq!(transliterate(&t, None, &TagScheme::default()), t);
    }

    #[test]
    fn rules_rewrite_only_the_designated_language() {
        let rules = RuleTable::from_pairs(vec![("na".to_string(), "ना".to_string())]);
        let t = tweet(&[("na", "Hin"), ("na", "Eng")]);
        let out = transliterate(&t, Some(&rules), &TagScheme::default());
        assert_eq!(out.tokens[0].text, "ना");
        assert_eq!(out.tokens[1].text, "na");
    }

    #[test]
    fn longest_match_wins() {
        let rules = RuleTable::from_pairs(vec![
            ("n".to_string(), "X".to_string()),
            ("na".to_string(), "ना".to_string()),
        ]);
        assert_eq!(rules.apply("nan"), "नाX");
    }

    #[test]
    fn noise_rules_drop_usernames_urls_and_emoticons() {
        let t = tweet(&[
            ("@user", "O"),
            ("great", "Eng"),
            ("http://t.co", "O"),
            ("#win", "O"),
            ("😀", "O"),
        ]);
        let clean = remove_noise(&t);
        assert_eq!(clean.tokens, vec!["great", "#win"]);
    }

    #[test]
    fn all_noise_tweet_yields_placeholder() {
        let t = tweet(&[("@a", "O"), (":)", "O")]);
        assert_eq!(remove_noise(&t).tokens, vec![PLACEHOLDER_TOKEN]);
    }

    #[test]
    fn hashtags_survive_verbatim() {
        let t = tweet(&[("#happy", "O")]);
        assert_eq!(remove_noise(&t).tokens, vec!["#happy"]);
    }

    #[test]
    fn noise_removal_is_idempotent() {
        let t = tweet(&[
            ("@user", "O"),
            ("ok", "Eng"),
            ("www.x.com", "O"),
            (":-(", "O"),
            ("#tag", "O"),
        ]);
        let once = remove_noise(&t);
        let again = remove_noise(&RawTweet {
            uid: once.uid.clone(),
            tokens: once
                .tokens
                .iter()
                .map(|text| RawToken {
                    text: text.clone(),
                    tag: "O".to_string(),
                })
                .collect(),
            label: once.label,
        });
        assert_eq!(once.tokens, again.tokens);
    }

    #[test]
    fn url_detection_covers_scheme_and_www_forms() {
        assert!(is_noise_token("https://example.com/a?b=1"));
        assert!(is_noise_token("ftp://files"));
        assert!(is_noise_token("WWW.site.org"));
        assert!(is_noise_token("not://")); // any scheme:// prefix counts
        assert!(!is_noise_token("a:b"));
        assert!(!is_noise_token("hello"));
        assert!(!is_noise_token("://x")); // no scheme
    }

    #[test]
    fn ascii_emoticon_case_variants() {
        assert!(is_noise_token(":D"));
        assert!(is_noise_token(":d"));
        assert!(is_noise_token(";)"));
        assert!(!is_noise_token(":x"));
    }

    #[test]
    fn mixed_emoji_and_letters_is_not_noise() {
        assert!(!is_noise_token("word😀"));
        assert!(is_noise_token("😀😀"));
        assert!(is_noise_token("🇮🇳"));
    }
}
