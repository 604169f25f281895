//! Random reply text: ASCII and accented words, punctuation, whitespace runs.

use proptest::prelude::*;

const LETTERS: &[char] = &[
    'a', 'b', 'e', 'k', 'o', 's', 't', 'x', 'A', 'Z', '0', '7', 'é', 'è', 'à', 'ü', 'ñ', 'ç', 'Ä', 'Ö', 'ß', 'ø', '\'', '-',
];
const PUNCT: &[&str] = &[".", "!", "?", ",", ";", ":", "…", "...", "?!", "\"", "("];
const SPACES: &[&str] = &[" ", " ", " ", "  ", "\n", "\t", "\r\n", "\u{a0}", " \n ", "   "];

fn word(max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(LETTERS), 1..=max_len).prop_map(|v| v.into_iter().collect())
}

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => word(9),
        1 => word(40),
        2 => (word(8), prop::sample::select(PUNCT)).prop_map(|(w, p)| w + p),
        3 => prop::sample::select(SPACES).prop_map(str::to_string),
        1 => prop::sample::select(PUNCT).prop_map(str::to_string),
    ]
}

pub fn reply_text(max_tokens: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(token(), 0..=max_tokens).prop_map(|t| t.concat())
}

/// Text that is guaranteed to contain sentence punctuation followed by a space
/// every few words, so a punctuation break always exists within `budget`.
pub fn punctuated_text(max_chars: usize) -> impl Strategy<Value = String> {
    let sentence = (prop::collection::vec(word(6), 1..=4), prop::sample::select(&['.', '!', '?', '…'][..]))
        .prop_map(|(words, p)| format!("{}{p}", words.join(" ")));
    prop::collection::vec(sentence, 1..=40).prop_map(move |s| {
        let mut text = s.join(" ");
        while text.chars().count() > max_chars {
            text.pop();
        }
        text
    })
}
