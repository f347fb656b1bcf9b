use std::collections::BTreeSet;

/// Function words ignored by keyword overlap filtering.
pub const DEFAULT_STOPLIST: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as",
    "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
    "can", "could", "did", "do", "does", "doing", "down", "during", "each", "else", "few", "for",
    "from", "further", "get", "gets", "got", "had", "has", "have", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor",
    "not", "now", "of", "off", "on", "once", "only", "or", "other", "others", "our", "ours",
    "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves",
];

pub fn default_stoplist() -> BTreeSet<String> {
    DEFAULT_STOPLIST.iter().map(|s| (*s).to_owned()).collect()
}

/// Lowercased content words of `text`.
///
/// Tokens are whitespace-separated with leading and trailing punctuation
/// stripped; a token survives if it is purely alphabetic and not in the
/// stoplist. No stemming.
pub fn extract_keywords(text: &str, stoplist: &BTreeSet<String>) -> BTreeSet<String> {
    text.split_whitespace()
        .map(|tok| tok.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|tok| !tok.is_empty() && tok.chars().all(char::is_alphabetic))
        .filter(|tok| !stoplist.contains(tok))
        .collect()
}
