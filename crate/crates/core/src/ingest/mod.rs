//! Dataset metadata ingestion: painting records, label spaces, derived
//! attributes and the precomputed visual-feature container.

mod features;
mod keywords;
mod technique;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{
    read_embeddings, read_features, write_embeddings, write_features, EmbeddingTable,
    FeatureStore, VectorTable, EMBEDDING_MAGIC, FEATURE_MAGIC,
};
pub use keywords::{
    calibrate_min_freq, default_stop_words, extract_title_keywords, title_tokens, KeywordSet,
};
pub use technique::{parse_technique, TechniqueGrammar};

/// UTF-8 when valid, otherwise Latin-1, which older metadata dumps use.
fn decode_field(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes.iter().map(|&b| char::from(b)).collect(),
    }
}

/// One artwork's metadata row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PaintingRecord {
    pub id: String,
    pub image_ref: String,
    pub author: String,
    pub title: String,
    pub date: String,
    pub technique: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub school: String,
    pub timeframe: String,
    pub comment: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub records: Vec<PaintingRecord>,
}

/// Delimited-text dialect of a metadata file.
#[derive(Debug, Clone, Copy)]
pub struct DatasetFormat {
    pub delimiter: u8,
    /// Honour double-quote quoting. Off by default: raw tab-separated
    /// metadata contains unbalanced quotes inside comments.
    pub quoting: bool,
}

impl Default for DatasetFormat {
    fn default() -> Self {
        Self {
            delimiter: b'\t',
            quoting: false,
        }
    }
}

const REQUIRED_COLUMNS: [&str; 8] = [
    "author",
    "title",
    "date",
    "technique",
    "type",
    "school",
    "timeframe",
    "comment",
];

fn canonical_column(name: &str) -> &str {
    match name {
        "image_file" | "image" => "image_ref",
        "description" => "comment",
        other => other,
    }
}

/// Reads a metadata file. Columns are matched case-insensitively; `id` falls
/// back to the image reference when absent.
pub fn load_dataset(path: &Path, split: SplitName, format: DatasetFormat) -> Result<DatasetSplit> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&bytes, split, format)
}

pub fn parse_dataset(bytes: &[u8], split: SplitName, format: DatasetFormat) -> Result<DatasetSplit> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .quoting(format.quoting)
        .flexible(true)
        .has_headers(true)
        .from_reader(bytes);

    let header = reader
        .byte_headers()
        .map_err(|e| Error::Ingest(e.to_string()))?
        .clone();
    let mut columns: HashMap<String, usize> = HashMap::new();
    for (i, raw) in header.iter().enumerate() {
        let name = String::from_utf8_lossy(raw).trim().to_lowercase();
        let name = name.trim_start_matches('\u{feff}').to_owned();
        columns.entry(canonical_column(&name).to_owned()).or_insert(i);
    }
    for col in REQUIRED_COLUMNS {
        if !columns.contains_key(col) {
            return Err(Error::MissingColumn(col.to_owned()));
        }
    }
    let id_col = columns
        .get("id")
        .or_else(|| columns.get("image_ref"))
        .copied()
        .ok_or_else(|| Error::MissingColumn("id".to_owned()))?;
    let image_col = columns.get("image_ref").copied().unwrap_or(id_col);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (row, result) in reader.byte_records().enumerate() {
        let rec = result.map_err(|e| Error::Ingest(format!("row {}: {e}", row + 2)))?;
        let field = |col: usize| -> String {
            rec.get(col)
                .map(|b| decode_field(b).trim().to_owned())
                .unwrap_or_default()
        };
        let named = |name: &str| field(columns[name]);
        let record = PaintingRecord {
            id: field(id_col),
            image_ref: field(image_col),
            author: named("author"),
            title: named("title"),
            date: named("date"),
            technique: named("technique"),
            kind: named("type"),
            school: named("school"),
            timeframe: named("timeframe"),
            comment: named("comment"),
        };
        if record.id.is_empty() {
            return Err(Error::Ingest(format!("row {}: empty id", row + 2)));
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::Ingest(format!("duplicate id `{}`", record.id)));
        }
        records.push(record);
    }
    Ok(DatasetSplit {
        name: split,
        records,
    })
}

/// Writes records as tab-separated text with the canonical header.
pub fn write_dataset(records: &[PaintingRecord], path: &Path) -> Result<()> {
    let mut out = String::from(
        "id\timage_ref\tauthor\ttitle\tdate\ttechnique\ttype\tschool\ttimeframe\tcomment\n",
    );
    for r in records {
        let fields = [
            &r.id,
            &r.image_ref,
            &r.author,
            &r.title,
            &r.date,
            &r.technique,
            &r.kind,
            &r.school,
            &r.timeframe,
            &r.comment,
        ];
        for (i, f) in fields.iter().enumerate() {
            if f.contains(['\t', '\n']) {
                return Err(Error::InvalidArgument(format!(
                    "record `{}`: field contains a tab or newline",
                    r.id
                )));
            }
            if i > 0 {
                out.push('\t');
            }
            out.push_str(f);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// The four classification attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeFamily {
    Type,
    School,
    Timeframe,
    Author,
}

impl AttributeFamily {
    pub const ALL: [AttributeFamily; 4] = [
        AttributeFamily::Type,
        AttributeFamily::School,
        AttributeFamily::Timeframe,
        AttributeFamily::Author,
    ];

    pub fn value<'a>(&self, record: &'a PaintingRecord) -> &'a str {
        match self {
            AttributeFamily::Type => &record.kind,
            AttributeFamily::School => &record.school,
            AttributeFamily::Timeframe => &record.timeframe,
            AttributeFamily::Author => &record.author,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttributeFamily::Type => "type",
            AttributeFamily::School => "school",
            AttributeFamily::Timeframe => "timeframe",
            AttributeFamily::Author => "author",
        }
    }
}

impl fmt::Display for AttributeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttributeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type" => Ok(AttributeFamily::Type),
            "school" => Ok(AttributeFamily::School),
            "timeframe" | "tf" => Ok(AttributeFamily::Timeframe),
            "author" => Ok(AttributeFamily::Author),
            other => Err(Error::InvalidArgument(format!(
                "unknown attribute family `{other}`"
            ))),
        }
    }
}

pub const UNKNOWN_CLASS: &str = "Unknown";

/// Ordered class list for one attribute family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub family: AttributeFamily,
    pub classes: Vec<String>,
    pub unknown_index: Option<usize>,
}

impl LabelSpace {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Class index for a raw attribute value. Values outside the kept classes
    /// map to Unknown when the space has one.
    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.classes
            .iter()
            .enumerate()
            .take(self.unknown_index.unwrap_or(self.classes.len()))
            .find(|(_, c)| c.as_str() == value)
            .map(|(i, _)| i)
            .or(self.unknown_index)
    }

    pub fn label(&self, record: &PaintingRecord) -> Option<usize> {
        self.index_of(self.family.value(record))
    }
}

/// Keeps values with at least `min_count` occurrences, ordered by descending
/// count then lexicographically; appends Unknown when anything was dropped.
pub fn build_label_space(
    records: &[PaintingRecord],
    family: AttributeFamily,
    min_count: usize,
) -> Result<LabelSpace> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    if records.is_empty() {
        return Err(Error::Empty("label space records"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(family.value(r)).or_default() += 1;
    }
    let mut kept: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(&v, &c)| (v, c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let filtered_any = kept.len() < counts.len();
    let mut classes: Vec<String> = kept.into_iter().map(|(v, _)| v.to_owned()).collect();
    let unknown_index = if filtered_any {
        classes.push(UNKNOWN_CLASS.to_owned());
        Some(classes.len() - 1)
    } else {
        None
    };
    Ok(LabelSpace {
        family,
        classes,
        unknown_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn with_authors(values: &[(&str, usize)]) -> Vec<PaintingRecord> {
        let mut out = Vec::new();
        for (v, n) in values {
            for i in 0..*n {
                out.push(PaintingRecord {
                    id: format!("{v}{i}"),
                    author: (*v).to_owned(),
                    ..Default::default()
                });
            }
        }
        out
    }

    const FIXTURE: &str = "id\timage_ref\tauthor\ttitle\tdate\ttechnique\ttype\tschool\ttimeframe\tcomment\n\
        p1\t1.jpg\tA\tThree Graces\t1500\tOil on canvas, 10 x 20 cm\tportrait\tItalian\t1501-1550\tnice\n\
        p2\t2.jpg\tB\tSaint\t1600\tFresco\treligious\tDutch\t1601-1650\t\n\
        p3\t3.jpg\tA\tThe Three Graces\t1510\t\tportrait\tItalian\t1501-1550\tsame \"quote\n";

    #[test]
    fn loads_rows_in_order() {
        let split = parse_dataset(FIXTURE.as_bytes(), SplitName::Train, DatasetFormat::default()).unwrap();
        let ids: Vec<_> = split.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert_eq!(split.records[0].kind, "portrait");
        assert_eq!(split.records[2].comment, "same \"quote");
        assert_eq!(split.records[1].comment, "");
    }

    #[test]
    fn missing_column_is_named() {
        let text = FIXTURE.replace("\tschool\t", "\tschul\t");
        let err = parse_dataset(text.as_bytes(), SplitName::Train, DatasetFormat::default()).unwrap_err();
        assert!(matches!(&err, Error::MissingColumn(c) if c == "school"), "{err}");
        assert!(err.to_string().contains("school"));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = FIXTURE.replace("p2\t", "p1\t");
        let err = parse_dataset(text.as_bytes(), SplitName::Train, DatasetFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Ingest(_)));
    }

    #[test]
    fn semart_style_header_is_accepted() {
        let text = "IMAGE_FILE\tDESCRIPTION\tAUTHOR\tTITLE\tTECHNIQUE\tDATE\tTYPE\tSCHOOL\tTIMEFRAME\n\
            a.jpg\tcomment\tX\tT\tOil\t1500\tportrait\tItalian\t1501-1550\n";
        let split = parse_dataset(text.as_bytes(), SplitName::Test, DatasetFormat::default()).unwrap();
        assert_eq!(split.records[0].id, "a.jpg");
        assert_eq!(split.records[0].image_ref, "a.jpg");
        assert_eq!(split.records[0].comment, "comment");
    }

    #[test]
    fn label_space_filters_and_appends_unknown() {
        let space = build_label_space(&with_authors(&[("a", 12), ("b", 3)]), AttributeFamily::Author, 10).unwrap();
        assert_eq!(space.classes, ["a", "Unknown"]);
        assert_eq!(space.unknown_index, Some(1));
        assert_eq!(space.index_of("b"), Some(1));
        assert_eq!(space.index_of("never seen"), Some(1));

        let space = build_label_space(&with_authors(&[("a", 12), ("b", 12)]), AttributeFamily::Author, 10).unwrap();
        assert_eq!(space.classes, ["a", "b"]);
        assert_eq!(space.unknown_index, None);
        assert_eq!(space.index_of("c"), None);
    }

    #[test]
    fn label_space_orders_by_count_then_name() {
        let space = build_label_space(&with_authors(&[("z", 5), ("b", 7), ("a", 5)]), AttributeFamily::Author, 1).unwrap();
        assert_eq!(space.classes, ["b", "a", "z"]);
    }

    #[test]
    fn label_space_errors() {
        assert!(build_label_space(&[], AttributeFamily::Type, 1).is_err());
        assert!(build_label_space(&with_authors(&[("a", 1)]), AttributeFamily::Author, 0).is_err());
    }

    #[test]
    fn dataset_write_read_round_trip() {
        let split = parse_dataset(FIXTURE.as_bytes(), SplitName::Train, DatasetFormat::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        write_dataset(&split.records, &path).unwrap();
        let back = load_dataset(&path, SplitName::Train, DatasetFormat::default()).unwrap();
        assert_eq!(back, split);
    }

    proptest! {
        #[test]
        fn label_space_is_permutation_invariant_and_total(
            values in proptest::collection::vec(0u8..6, 1..60),
            min_count in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let records: Vec<PaintingRecord> = values
                .iter()
                .enumerate()
                .map(|(i, v)| PaintingRecord { id: i.to_string(), author: format!("v{v}"), ..Default::default() })
                .collect();
            let a = build_label_space(&records, AttributeFamily::Author, min_count).unwrap();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = build_label_space(&shuffled, AttributeFamily::Author, min_count).unwrap();
            prop_assert_eq!(&a, &b);
            let again = build_label_space(&records, AttributeFamily::Author, min_count).unwrap();
            prop_assert_eq!(&a, &again);
            for r in &records {
                let idx = a.label(r);
                prop_assert!(idx.is_some());
                let count = values.iter().filter(|&&v| format!("v{v}") == r.author).count();
                if count < min_count {
                    prop_assert_eq!(idx, a.unknown_index);
                } else {
                    prop_assert_eq!(&a.classes[idx.unwrap()], &r.author);
                }
            }
        }
    }

    #[test]
    fn latin1_fields_are_decoded() {
        let mut bytes = b"author\ttitle\tdate\ttechnique\ttype\tschool\ttimeframe\tcomment\timage_file\n".to_vec();
        bytes.extend_from_slice(b"D\xdcRER\tx\t1500\toil\tportrait\tGerman\t1501-1550\tc\ta.jpg\n");
        let split = parse_dataset(&bytes, SplitName::Train, DatasetFormat::default()).unwrap();
        assert_eq!(split.records[0].author, "DÜRER");
    }
}
