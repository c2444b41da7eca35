use regex::Regex;

/// Grammar for splitting a technique string into material and support.
///
/// The material is the lowercased text before the first dimension expression
/// or separator; the support is the first dimension expression with all
/// whitespace removed.
#[derive(Debug, Clone)]
pub struct TechniqueGrammar {
    dimension: Regex,
    separators: Vec<char>,
}

pub const DEFAULT_DIMENSION_PATTERN: &str =
    r"(?i)\d+(?:[.,]\d+)?\s*[x×]\s*\d+(?:[.,]\d+)?(?:\s*(?:cm|mm|m|in)\b)?";

impl Default for TechniqueGrammar {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION_PATTERN, &[',', ';']).expect("default pattern compiles")
    }
}

impl TechniqueGrammar {
    pub fn new(dimension_pattern: &str, separators: &[char]) -> Result<Self, regex::Error> {
        Ok(Self {
            dimension: Regex::new(dimension_pattern)?,
            separators: separators.to_vec(),
        })
    }

    pub fn parse(&self, technique: &str) -> (Option<String>, Option<String>) {
        let found = self.dimension.find(technique);
        let support = found.map(|m| {
            m.as_str()
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect::<String>()
                .to_lowercase()
                .replace('×', "x")
        });
        let dim_start = found.map_or(technique.len(), |m| m.start());
        let sep_start = technique
            .find(self.separators.as_slice())
            .unwrap_or(technique.len());
        let head = &technique[..dim_start.min(sep_start)];
        let material = head.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let material = (!material.is_empty()).then_some(material);
        (material, support)
    }
}

/// Parses with the default grammar.
pub fn parse_technique(technique: &str) -> (Option<String>, Option<String>) {
    TechniqueGrammar::default().parse(technique)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medium_and_dimensions() {
        assert_eq!(
            parse_technique("Oil on canvas, 210 x 80 cm"),
            (Some("oil on canvas".into()), Some("210x80cm".into()))
        );
    }

    #[test]
    fn empty_and_medium_only() {
        assert_eq!(parse_technique(""), (None, None));
        assert_eq!(parse_technique("Fresco"), (Some("fresco".into()), None));
        assert_eq!(parse_technique("   "), (None, None));
    }

    #[test]
    fn decimals_unicode_times_and_no_unit() {
        assert_eq!(
            parse_technique("Tempera on  wood, 40,5 × 31 cm"),
            (Some("tempera on wood".into()), Some("40,5x31cm".into()))
        );
        assert_eq!(
            parse_technique("Pen 12x7"),
            (Some("pen".into()), Some("12x7".into()))
        );
        assert_eq!(parse_technique(", 3 x 4 m"), (None, Some("3x4m".into())));
    }

    #[test]
    fn custom_grammar() {
        let g = TechniqueGrammar::new(r"\d+\s*by\s*\d+", &['/']).unwrap();
        assert_eq!(
            g.parse("Ink / 3 by 4"),
            (Some("ink".into()), Some("3by4".into()))
        );
    }
}
