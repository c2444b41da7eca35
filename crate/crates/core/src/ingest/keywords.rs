use std::collections::{BTreeMap, HashSet};

const STOP_WORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// The shipped English stop-word list.
pub fn default_stop_words() -> HashSet<String> {
    STOP_WORDS_EN
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Lowercased title tokens. Apostrophes are dropped, other punctuation splits.
pub fn title_tokens(title: &str) -> Vec<String> {
    let cleaned: String = title
        .chars()
        .filter(|c| !matches!(c, '\'' | '’'))
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(str::to_lowercase)
        .collect()
}

/// Title keywords with their corpus frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordSet {
    pub n_max: usize,
    pub counts: BTreeMap<String, usize>,
}

impl KeywordSet {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.counts.contains_key(keyword)
    }

    /// Distinct keywords occurring in `title`, in first-occurrence order.
    pub fn match_title(&self, title: &str) -> Vec<String> {
        let tokens = title_tokens(title);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (_, gram) in ngrams(&tokens, self.n_max) {
            if self.counts.contains_key(&gram) && seen.insert(gram.clone()) {
                out.push(gram);
            }
        }
        out
    }
}

fn ngrams(tokens: &[String], n_max: usize) -> impl Iterator<Item = (&[String], String)> + '_ {
    (1..=n_max).flat_map(move |n| {
        tokens
            .windows(n)
            .map(|w| (w, w.join(" ")))
            .collect::<Vec<_>>()
    })
}

/// Counts every word n-gram (1 ≤ n ≤ `n_max`) across the titles and keeps
/// those seen at least `min_freq` times, skipping n-grams made only of stop
/// words.
pub fn extract_title_keywords(
    titles: &[&str],
    n_max: usize,
    min_freq: usize,
    stop_words: &HashSet<String>,
) -> KeywordSet {
    let n_max = n_max.max(1);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for title in titles {
        let tokens = title_tokens(title);
        for (window, gram) in ngrams(&tokens, n_max) {
            if window.iter().all(|t| stop_words.contains(t)) {
                continue;
            }
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts.retain(|_, c| *c >= min_freq);
    KeywordSet { n_max, counts }
}

/// Smallest `min_freq` whose keyword count is closest to `target`.
pub fn calibrate_min_freq(
    titles: &[&str],
    n_max: usize,
    target: usize,
    stop_words: &HashSet<String>,
) -> usize {
    let all = extract_title_keywords(titles, n_max, 1, stop_words);
    let max_count = all.counts.values().copied().max().unwrap_or(1);
    (1..=max_count)
        .min_by_key(|&m| {
            let kept = all.counts.values().filter(|&&c| c >= m).count();
            (kept.abs_diff(target), m)
        })
        .unwrap_or(1)
}
