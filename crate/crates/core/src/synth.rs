//! Small synthetic corpus with label-correlated features, for tests, examples
//! and smoke runs of the pipeline when no real dataset is at hand.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_dataset, write_features, FeatureStore, PaintingRecord};

const TYPES: [(&str, &[&str]); 5] = [
    ("religious", &["virgin", "saint", "madonna", "annunciation"]),
    ("portrait", &["portrait", "lady", "gentleman", "merchant"]),
    ("landscape", &["river", "valley", "mountain", "forest"]),
    ("still-life", &["flowers", "fruit", "vanitas", "table"]),
    ("mythological", &["venus", "diana", "bacchus", "apollo"]),
];
const SCHOOLS: [&str; 6] = ["Italian", "Dutch", "Flemish", "Spanish", "French", "German"];
const TIMEFRAMES: [&str; 6] = [
    "1401-1450",
    "1451-1500",
    "1501-1550",
    "1551-1600",
    "1601-1650",
    "1651-1700",
];
const MATERIALS: [&str; 4] = ["Oil on canvas", "Tempera on panel", "Oil on wood", "Fresco"];
const MOTIFS: [&str; 6] = ["with angels", "at dusk", "in a garden", "with a dog", "by the sea", "in winter"];

/// Run configuration sized for the synthetic corpus, expecting the files
/// written by [`SynthCorpus::write`] next to it.
pub const SMOKE_CONFIG: &str = include_str!("../data/smoke.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub paintings: usize,
    pub authors: usize,
    pub schools: usize,
    pub types: usize,
    pub timeframes: usize,
    pub feature_dim: usize,
    /// Standard deviation of the per-painting feature noise; class
    /// prototypes have unit-variance entries.
    pub noise: f64,
    /// Fractions of paintings placed in the validation and test splits.
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            paintings: 160,
            authors: 10,
            schools: 4,
            types: 4,
            timeframes: 4,
            feature_dim: 32,
            noise: 0.3,
            val_fraction: 0.15,
            test_fraction: 0.15,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<PaintingRecord>,
    pub val: Vec<PaintingRecord>,
    pub test: Vec<PaintingRecord>,
    pub features: FeatureStore,
}

impl SynthCorpus {
    pub fn all(&self) -> impl Iterator<Item = &PaintingRecord> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    /// Writes `train.tsv`, `val.tsv`, `test.tsv` and `features.bin`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_dataset(&self.train, &dir.join("train.tsv"))?;
        write_dataset(&self.val, &dir.join("val.tsv"))?;
        write_dataset(&self.test, &dir.join("test.tsv"))?;
        write_features(&self.features, &dir.join("features.bin"))
    }
}

/// Lowercase letters spelling `n` in base 26, so every painting gets an
/// alphabetic token of its own.
fn letters(mut n: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

fn prototypes(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect()
}

/// Each author belongs to one school; type and timeframe vary per painting.
/// A painting's feature is the sum of its type, school, timeframe and
/// author prototypes plus Gaussian noise.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.types == 0 || cfg.types > TYPES.len() {
        return Err(Error::InvalidArgument(format!("types must be in 1..={}", TYPES.len())));
    }
    if cfg.schools == 0 || cfg.schools > SCHOOLS.len() {
        return Err(Error::InvalidArgument(format!("schools must be in 1..={}", SCHOOLS.len())));
    }
    if cfg.timeframes == 0 || cfg.timeframes > TIMEFRAMES.len() {
        return Err(Error::InvalidArgument(format!(
            "timeframes must be in 1..={}",
            TIMEFRAMES.len()
        )));
    }
    if cfg.authors == 0 || cfg.paintings < 3 || cfg.feature_dim == 0 {
        return Err(Error::InvalidArgument(
            "need authors, at least 3 paintings and a positive feature dim".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.feature_dim;
    let type_proto = prototypes(&mut rng, cfg.types, dim);
    let school_proto = prototypes(&mut rng, cfg.schools, dim);
    let time_proto = prototypes(&mut rng, cfg.timeframes, dim);
    let author_proto = prototypes(&mut rng, cfg.authors, dim);

    let mut records = Vec::with_capacity(cfg.paintings);
    let mut features = FeatureStore::new(dim)?;
    for i in 0..cfg.paintings {
        let author = i % cfg.authors;
        let school = author % cfg.schools;
        let kind = rng.gen_range(0..cfg.types);
        let time = rng.gen_range(0..cfg.timeframes);
        let (type_name, subjects) = TYPES[kind];
        let subject = subjects.choose(&mut rng).expect("non-empty");
        let motif = MOTIFS.choose(&mut rng).expect("non-empty");
        let material = MATERIALS[(author + kind) % MATERIALS.len()];
        let (w, h) = (40 + 5 * rng.gen_range(0..8), 50 + 5 * rng.gen_range(0..8));
        let author_name = format!("MASTER {}", letters(author + 26).to_uppercase());
        let tag = letters(i + 26 * 26);
        let year = 1401 + 50 * time + rng.gen_range(0..50);
        let id = format!("{i:05}-synthetic.jpg");
        records.push(PaintingRecord {
            image_ref: id.clone(),
            id: id.clone(),
            author: author_name.clone(),
            title: format!("{} {motif}", capitalize(subject)),
            date: format!("c. {year}"),
            technique: format!("{material}, {w} x {h} cm"),
            kind: type_name.to_string(),
            school: SCHOOLS[school].to_string(),
            timeframe: TIMEFRAMES[time].to_string(),
            comment: format!(
                "This {type_name} work by {author_name} shows the {subject} {motif}. \
                 Catalogue mark {tag}, painted around {year} in the {} manner.",
                SCHOOLS[school]
            ),
        });
        let vector: Vec<f64> = (0..dim)
            .map(|d| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                type_proto[kind][d]
                    + school_proto[school][d]
                    + time_proto[time][d]
                    + author_proto[author][d]
                    + cfg.noise * noise
            })
            .collect();
        features.insert_f64(id, &vector)?;
    }

    records.shuffle(&mut rng);
    let n = records.len();
    let n_test = ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n - 2);
    let n_val = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n - 1 - n_test);
    let test = records.split_off(n - n_test);
    let val = records.split_off(n - n_test - n_val);
    Ok(SynthCorpus {
        train: records,
        val,
        test,
        features,
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_complete() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        assert_eq!(a.all().count(), cfg.paintings);
        assert_eq!(a.features.len(), cfg.paintings);
        assert!(a.all().all(|r| a.features.contains(&r.id)));
        assert!(!a.val.is_empty() && !a.test.is_empty());
        let other = generate(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.features, other.features);
    }

    #[test]
    fn author_fixes_school() {
        let c = generate(&SynthConfig::default()).unwrap();
        let mut seen = std::collections::HashMap::new();
        for r in c.all() {
            assert_eq!(seen.entry(r.author.clone()).or_insert(r.school.clone()), &r.school);
        }
    }

    #[test]
    fn techniques_parse() {
        let c = generate(&SynthConfig::default()).unwrap();
        for r in c.all() {
            let (material, support) = crate::ingest::parse_technique(&r.technique);
            assert!(material.is_some(), "{}", r.technique);
            assert!(support.unwrap().ends_with("cm"), "{}", r.technique);
        }
    }

    #[test]
    fn unique_tags() {
        assert_eq!(letters(0), "a");
        assert_eq!(letters(27), "bb");
        let tags: std::collections::HashSet<_> = (0..2000).map(letters).collect();
        assert_eq!(tags.len(), 2000);
    }
}
