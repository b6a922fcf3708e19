//! Golden-file conformance for the cleaning pipeline: usernames, URLs and
//! emoticons removed, hashtags preserved verbatim, and only tokens of the
//! designated language transliterated.

use mixsent_core::preprocess::{
    label_name, parse_corpus, remove_noise, serialize_corpus, transliterate, RuleTable, TagScheme,
};

const CORPUS: &str = include_str!("data/golden_corpus.txt");
const RULES: &str = include_str!("data/golden_rules.tsv");
const EXPECTED: &str = include_str!("data/golden_clean.txt");

#[test]
fn canonical_corpus_round_trips_byte_for_byte() {
    let tweets = parse_corpus(CORPUS).unwrap();
    assert_eq!(tweets.len(), 4);
    assert_eq!(serialize_corpus(&tweets), CORPUS);
}

#[test]
fn pipeline_matches_the_golden_cleaned_output() {
    let tweets = parse_corpus(CORPUS).unwrap();
    let rules = RuleTable::parse(RULES).unwrap();
    let scheme = TagScheme::default();
    let mut got = String::new();
    for tweet in &tweets {
        let clean = remove_noise(&transliterate(tweet, Some(&rules), &scheme));
        got.push_str(&clean.uid);
        got.push('\t');
        got.push_str(label_name(clean.label.unwrap()));
        got.push('\t');
        got.push_str(&clean.tokens.join(" "));
        got.push('\n');
    }
    assert_eq!(got, EXPECTED);
}

#[test]
fn without_rules_designated_language_tokens_stay_romanized() {
    let tweets = parse_corpus(CORPUS).unwrap();
    let scheme = TagScheme::default();
    let clean = remove_noise(&transliterate(&tweets[0], None, &scheme));
    assert_eq!(clean.tokens, vec!["bahut", "accha", "match", "#india"]);
}

#[test]
fn only_designated_language_tokens_are_transliterated() {
    let tweets = parse_corpus(CORPUS).unwrap();
    let rules = RuleTable::parse(RULES).unwrap();
    let scheme = TagScheme::default();
    // "match" is Eng, "bahut"/"accha" are Hin; hashtags and mentions are "O"
    let out = transliterate(&tweets[0], Some(&rules), &scheme);
    let texts: Vec<&str> = out.tokens.iter().map(|t| t.text.as_str()).collect();
    assert_eq!(
        texts,
        vec![
            "@fan",
            "बहुत",
            "अच्छा",
            "match",
            "#india",
            "😀",
            "https://t.co/xyz"
        ]
    );
}
