/// Removes punctuation from a token. Apostrophes and hyphens survive when they
/// sit between two alphanumeric characters ("don't", "well-known").
pub fn strip_punctuation(token: &str) -> String {
    let chars: Vec<char> = token.chars().collect();
    let mut out = String::with_capacity(token.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            out.push(c);
        } else if matches!(c, '\'' | '\u{2019}' | '-') {
            let prev = i > 0 && chars[i - 1].is_alphanumeric();
            let next = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if prev && next {
                out.push(c);
            }
        }
    }
    out
}

/// Whitespace tokenization with punctuation stripped; tokens that are pure
/// punctuation disappear.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(strip_punctuation)
        .filter(|w| !w.is_empty())
        .collect()
}
