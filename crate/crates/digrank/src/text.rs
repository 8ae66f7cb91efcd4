//! Shared text normalization used by the retriever, the featurizer, and the
//! exact-match metric.

/// Lowercase, replace punctuation with spaces, collapse whitespace.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut last_space = true;
    for c in s.chars() {
        let c = if c.is_alphanumeric() { Some(c.to_ascii_lowercase()) } else { None };
        match c {
            Some(c) => {
                out.push(c);
                last_space = false;
            }
            None => {
                if !last_space {
                    out.push(' ');
                    last_space = true;
                }
            }
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// [`normalize`] plus removal of english articles, for answer comparison.
pub fn normalize_answer(s: &str) -> String {
    normalize(s)
        .split(' ')
        .filter(|t| !t.is_empty() && !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn tokenize(s: &str) -> Vec<String> {
    normalize(s).split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}
