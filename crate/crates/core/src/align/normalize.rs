use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Text normalization flags applied before token comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormSpec {
    pub case_fold: bool,
    pub strip_punctuation: bool,
    pub unicode_compat_fold: bool,
    pub keep_intra_word_apostrophes: bool,
}

impl NormSpec {
    /// Every flag on; used for WER and entity verdicts.
    pub const METRIC_DEFAULT: NormSpec =
        NormSpec { case_fold: true, strip_punctuation: true, unicode_compat_fold: true, keep_intra_word_apostrophes: true };

    /// Whitespace tokenization only.
    pub const VERBATIM: NormSpec =
        NormSpec { case_fold: false, strip_punctuation: false, unicode_compat_fold: false, keep_intra_word_apostrophes: false };
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec::METRIC_DEFAULT
    }
}

pub(crate) fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02bc}')
}

/// Tokenizes `text` under `spec`.
///
/// With `strip_punctuation`, every character that is neither alphanumeric
/// nor whitespace acts as a separator. Apostrophes between two
/// alphanumerics survive when `keep_intra_word_apostrophes` is set and are
/// written as ASCII `'`.
pub fn normalize(text: &str, spec: &NormSpec) -> Vec<String> {
    let mut s: String = if spec.unicode_compat_fold { text.nfkc().collect() } else { text.to_string() };
    if spec.case_fold {
        s = s.to_lowercase();
        if spec.unicode_compat_fold {
            s = s.nfkc().collect();
        }
    }
    if !spec.strip_punctuation {
        return s.split_whitespace().map(str::to_string).collect();
    }
    let chars: Vec<char> = s.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        let intra = spec.keep_intra_word_apostrophes
            && is_apostrophe(c)
            && i > 0
            && chars[i - 1].is_alphanumeric()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if intra {
            cur.push('\'');
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_default_example() {
        assert_eq!(normalize("L'operazione, GRANDE.", &NormSpec::METRIC_DEFAULT), vec!["l'operazione", "grande"]);
        assert!(normalize("", &NormSpec::METRIC_DEFAULT).is_empty());
        assert_eq!(normalize("ciao ciao", &NormSpec::METRIC_DEFAULT), vec!["ciao", "ciao"]);
    }

    #[test]
    fn leading_apostrophe_and_hyphen() {
        let spec = NormSpec::METRIC_DEFAULT;
        assert_eq!(normalize("'ndrangheta", &spec), vec!["ndrangheta"]);
        assert_eq!(normalize("Vibo-Valenzia", &spec), vec!["vibo", "valenzia"]);
        assert_eq!(normalize("dell\u{2019}Italia", &spec), vec!["dell'italia"]);
    }

    #[test]
    fn verbatim_splits_on_whitespace_only() {
        assert_eq!(normalize(" Ciao,  Mondo! ", &NormSpec::VERBATIM), vec!["Ciao,", "Mondo!"]);
    }

    #[test]
    fn compat_fold_expands_ligatures() {
        assert_eq!(normalize("ﬁne", &NormSpec::METRIC_DEFAULT), vec!["fine"]);
    }

    proptest! {
        #[test]
        fn idempotent(text in "[a-zA-ZàèéìòùÀÈ0-9 ,.;:!?'’\\-]{0,40}") {
            let spec = NormSpec::METRIC_DEFAULT;
            let once = normalize(&text, &spec);
            let twice = normalize(&once.join(" "), &spec);
            prop_assert_eq!(once, twice);
        }
    }
}
