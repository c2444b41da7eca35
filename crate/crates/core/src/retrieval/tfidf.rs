use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const VOCAB_MAGIC: &str = "#ARTCTXV1";

/// Lowercased alphabetic words. Surrounding punctuation is trimmed; tokens
/// with any non-alphabetic character left inside are dropped.
pub fn text_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty() && w.chars().all(char::is_alphabetic))
        .map(str::to_lowercase)
        .collect()
}

/// Token vocabulary with document frequencies, using smoothed idf
/// `ln((1 + N) / (1 + df)) + 1` and L2-normalised vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfVocab {
    tokens: Vec<String>,
    df: Vec<usize>,
    index: HashMap<String, usize>,
    pub n_docs: usize,
    pub min_count: usize,
}

/// Keeps tokens with at least `min_count` occurrences over `texts`, ordered
/// by descending document frequency then lexicographically.
pub fn build_tfidf_vocab(texts: &[&str], min_count: usize) -> Result<TfIdfVocab> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    if texts.is_empty() {
        return Err(Error::Empty("tf-idf corpus"));
    }
    let mut count: HashMap<String, usize> = HashMap::new();
    let mut df: HashMap<String, usize> = HashMap::new();
    for text in texts {
        let tokens = text_tokens(text);
        let mut seen = std::collections::HashSet::new();
        for t in tokens {
            *count.entry(t.clone()).or_default() += 1;
            if seen.insert(t.clone()) {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(String, usize)> = df
        .into_iter()
        .filter(|(t, _)| count[t] >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(TfIdfVocab::from_entries(kept, texts.len(), min_count))
}

impl TfIdfVocab {
    fn from_entries(entries: Vec<(String, usize)>, n_docs: usize, min_count: usize) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        let (tokens, df) = entries.into_iter().unzip();
        Self {
            tokens,
            df,
            index,
            n_docs,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    /// L2-normalised tf-idf vector; all zeros when no token is in vocabulary.
    pub fn encode(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for t in text_tokens(text) {
            if let Some(i) = self.index_of(&t) {
                v[i] += 1.0;
            }
        }
        for (i, x) in v.iter_mut().enumerate() {
            if *x != 0.0 {
                *x *= self.idf(i);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{VOCAB_MAGIC} n_docs={} min_count={} weighting=smooth-idf,l2\n",
            self.n_docs, self.min_count
        );
        for (t, df) in self.tokens.iter().zip(&self.df) {
            out.push_str(&format!("{t} {df}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty vocabulary file".into(),
        })?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(VOCAB_MAGIC) {
            return Err(Error::BadMagic {
                expected: VOCAB_MAGIC.into(),
                found: header.as_bytes().iter().take(9).copied().collect(),
            });
        }
        let (mut n_docs, mut min_count) = (None, None);
        for f in fields {
            if let Some(v) = f.strip_prefix("n_docs=") {
                n_docs = v.parse().ok();
            } else if let Some(v) = f.strip_prefix("min_count=") {
                min_count = v.parse().ok();
            }
        }
        let header_err = |what: &str| Error::Parse {
            line: 1,
            message: format!("missing {what}"),
        };
        let n_docs = n_docs.ok_or_else(|| header_err("n_docs"))?;
        let min_count = min_count.ok_or_else(|| header_err("min_count"))?;
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(token), Some(df), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `token df`".into(),
                });
            };
            let df = df.parse::<usize>().map_err(|_| Error::Parse {
                line: i + 1,
                message: "bad document frequency".into(),
            })?;
            entries.push((token.to_owned(), df));
        }
        Ok(Self::from_entries(entries, n_docs, min_count))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_filters() {
        let v = build_tfidf_vocab(&["a b", "a c"], 2).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        let v = build_tfidf_vocab(&["a b", "a c"], 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "c"]);
        assert!(build_tfidf_vocab(&[], 1).is_err());
    }

    #[test]
    fn counts_occurrences_not_documents() {
        let v = build_tfidf_vocab(&["x x x", "y"], 2).unwrap();
        assert_eq!(v.tokens(), ["x"]);
    }

    #[test]
    fn tokens_are_alphabetic() {
        assert_eq!(text_tokens("The 1500s, (Saint) x2 don't Über!"), ["the", "saint", "über"]);
    }

    #[test]
    fn encoding() {
        let v = build_tfidf_vocab(&["alpha beta", "alpha gamma", "beta"], 1).unwrap();
        assert!(v.encode("").iter().all(|&x| x == 0.0));
        assert!(v.encode("unknown words").iter().all(|&x| x == 0.0));
        let e = v.encode("gamma");
        assert_eq!(e.iter().filter(|&&x| x != 0.0).count(), 1);
        assert!((e[v.index_of("gamma").unwrap()] - 1.0).abs() < 1e-15);
        let e = v.encode("alpha gamma gamma");
        let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        // rarer word with higher tf weighs more
        assert!(e[v.index_of("gamma").unwrap()] > e[v.index_of("alpha").unwrap()]);
    }

    #[test]
    fn file_round_trip() {
        let v = build_tfidf_vocab(&["alpha beta", "alpha gamma", "beta"], 1).unwrap();
        let back = TfIdfVocab::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert!(TfIdfVocab::from_text("nonsense\n").is_err());
        assert!(matches!(
            TfIdfVocab::from_text("#ARTCTXV1 n_docs=2 min_count=1\nx\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
