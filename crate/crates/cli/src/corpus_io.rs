//! Loading corpora and rule tables from disk and running the preprocessing
//! pipeline down to model-ready examples.

use std::path::Path;

use mixsent_core::bpe::BpeVocab;
use mixsent_core::model::Example;
use mixsent_core::preprocess::{
    parse_corpus, remove_noise, transliterate, RawTweet, RuleTable, TagScheme,
};

use crate::error::CliError;
use crate::read_to_string;

pub fn load_corpus(path: &Path) -> Result<Vec<RawTweet>, CliError> {
    let text = read_to_string(path)?;
    parse_corpus(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_rules(path: Option<&Path>) -> Result<Option<RuleTable>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = read_to_string(p)?;
            RuleTable::parse(&text)
                .map(Some)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
    }
}

/// Transliterate → remove noise → subword-encode each tweet.
pub fn prepare_examples(
    tweets: &[RawTweet],
    rules: Option<&RuleTable>,
    scheme: &TagScheme,
    vocab: &BpeVocab,
    max_len: usize,
) -> Vec<Example> {
    tweets
        .iter()
        .map(|tweet| {
            let clean = remove_noise(&transliterate(tweet, rules, scheme));
            Example {
                uid: clean.uid.clone(),
                label: clean.label,
                seq: vocab.encode(&clean.tokens, max_len),
            }
        })
        .collect()
}

/// Loads and prepares a data file, requiring at least one example.
pub fn load_examples(
    data: &Path,
    rules: Option<&RuleTable>,
    vocab: &BpeVocab,
    max_len: usize,
) -> Result<Vec<Example>, CliError> {
    let tweets = load_corpus(data)?;
    if tweets.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no examples found",
            data.display()
        )));
    }
    Ok(prepare_examples(
        &tweets,
        rules,
        &TagScheme::default(),
        vocab,
        max_len,
    ))
}

/// Errors when any example lacks a gold label; `context` names the
/// subcommand that needs labels.
pub fn require_labels(examples: &[Example], context: &str) -> Result<(), CliError> {
    if let Some(e) = examples.iter().find(|e| e.label.is_none()) {
        return Err(CliError::Data(format!(
            "example `{}` has no gold label; {context}",
            e.uid
        )));
    }
    Ok(())
}
