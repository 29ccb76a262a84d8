//! Shared text normalization.
//!
//! Constructs are compared by string equality, so every string that enters a
//! [`crate::xtm::TopicMapDoc`] (gazetteer patterns, XTM base names,
//! occurrence values, and document text during matching) goes through the
//! same normalization: Unicode compatibility normalization (NFKC), then
//! lowercasing, then whitespace collapse.

use unicode_normalization::UnicodeNormalization;

/// Normalize a string for construct comparison.
///
/// NFKC first (compatibility characters fold to their plain forms, e.g.
/// the Kelvin sign to `K`), then lowercase, then trim and collapse every
/// whitespace run to a single ASCII space.
pub fn normalize(s: &str) -> String {
    let folded: String = s.nfkc().collect::<String>().to_lowercase();
    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for ch in folded.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// True if `s` is already in normalized form.
pub fn is_normalized(s: &str) -> bool {
    normalize(s) == s
}

/// Lowercased maximal alphanumeric runs, in text order.
///
/// This is the document-vector tokenizer; it is intentionally independent of
/// [`normalize`], which serves construct matching.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace_and_case() {
        assert_eq!(normalize("  Cricket   Match\tin  PAKISTAN "), "cricket match in pakistan");
    }

    #[test]
    fn nfkc_folds_compatibility_chars() {
        // U+FB01 LATIN SMALL LIGATURE FI and U+212A KELVIN SIGN
        assert_eq!(normalize("ﬁre K\u{212A}"), "fire kk");
        // NBSP collapses like any whitespace
        assert_eq!(normalize("a\u{00A0}b"), "a b");
    }

    #[test]
    fn empty_and_all_whitespace() {
        assert_eq!(normalize(""), "");
        assert_eq!(normalize(" \t\n"), "");
    }

    #[test]
    fn normalize_is_idempotent() {
        for s in ["cricket match", "a b", "", "x1 2y"] {
            assert!(is_normalized(&normalize(s)));
        }
    }

    #[test]
    fn tokenize_splits_on_non_alphanumerics() {
        assert_eq!(tokenize("The U.S. market—up 4%!"), vec!["the", "u", "s", "market", "up", "4"]);
        assert!(tokenize("...").is_empty());
    }
}
