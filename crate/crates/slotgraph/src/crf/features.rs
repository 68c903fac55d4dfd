//! Feature templates over the [0, +2] window.

use std::fmt;

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Surface used when an offset reads past the end of the sentence.
pub const BOUNDARY: &str = "__boundary__";

const MAX_OFFSET: u8 = 2;

/// One feature template. All offsets are forward-looking, in `[0, +2]`.
///
/// Boolean templates (`IsClass`, `IsPreposition`) fire only when the flag is
/// set; the others fire at every position. `LabelBigram` is the single
/// first-order transition template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureTemplate {
    Unigram(u8),
    Bigram(u8, u8),
    IsClass(u8),
    IsPreposition(u8),
    LabelBigram,
}

impl FeatureTemplate {
    fn max_offset(&self) -> u8 {
        match self {
            FeatureTemplate::Unigram(a)
            | FeatureTemplate::IsClass(a)
            | FeatureTemplate::IsPreposition(a) => *a,
            FeatureTemplate::Bigram(a, b) => (*a).max(*b),
            FeatureTemplate::LabelBigram => 0,
        }
    }

    /// Stable tag used in model files.
    pub fn tag(&self) -> String {
        match self {
            FeatureTemplate::Unigram(a) => format!("U{a}"),
            FeatureTemplate::Bigram(a, b) => format!("B{a}{b}"),
            FeatureTemplate::IsClass(a) => format!("C{a}"),
            FeatureTemplate::IsPreposition(a) => format!("P{a}"),
            FeatureTemplate::LabelBigram => "T".to_string(),
        }
    }

    /// Inverse of [`FeatureTemplate::tag`].
    pub fn from_tag(tag: &str) -> Result<Self> {
        let bad = || Error::Template(format!("unknown template tag {tag:?}"));
        let digit = |c: Option<char>| -> Result<u8> {
            c.and_then(|c| c.to_digit(10))
                .map(|d| d as u8)
                .ok_or_else(bad)
        };
        let mut chars = tag.chars();
        let kind = chars.next().ok_or_else(bad)?;
        let t = match kind {
            'T' if tag == "T" => FeatureTemplate::LabelBigram,
            'U' => FeatureTemplate::Unigram(digit(chars.next())?),
            'B' => FeatureTemplate::Bigram(digit(chars.next())?, digit(chars.next())?),
            'C' => FeatureTemplate::IsClass(digit(chars.next())?),
            'P' => FeatureTemplate::IsPreposition(digit(chars.next())?),
            _ => return Err(bad()),
        };
        if chars.next().is_some() {
            return Err(bad());
        }
        if t.max_offset() > MAX_OFFSET {
            return Err(Error::Template(format!(
                "offset in {tag:?} outside [0, +{MAX_OFFSET}]"
            )));
        }
        Ok(t)
    }
}

impl fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// The default template set: unigrams at 0,+1,+2, token bigrams (0,+1) and
/// (+1,+2), class and preposition flags at 0,+1,+2, and the transition.
pub fn default_templates() -> Vec<FeatureTemplate> {
    use FeatureTemplate::*;
    vec![
        Unigram(0),
        Unigram(1),
        Unigram(2),
        Bigram(0, 1),
        Bigram(1, 2),
        IsClass(0),
        IsClass(1),
        IsClass(2),
        IsPreposition(0),
        IsPreposition(1),
        IsPreposition(2),
        LabelBigram,
    ]
}

/// Checks the template-set invariants: all offsets within the window and
/// exactly one transition template.
pub fn validate_templates(templates: &[FeatureTemplate]) -> Result<()> {
    let transitions = templates
        .iter()
        .filter(|t| matches!(t, FeatureTemplate::LabelBigram))
        .count();
    if transitions != 1 {
        return Err(Error::Template(format!(
            "expected exactly one label-bigram template, found {transitions}"
        )));
    }
    for t in templates {
        if t.max_offset() > MAX_OFFSET {
            return Err(Error::Template(format!(
                "template {t} has an offset outside [0, +{MAX_OFFSET}]"
            )));
        }
    }
    Ok(())
}

fn surface_at(tokens: &[Token], pos: usize, offset: u8) -> &str {
    tokens
        .get(pos + offset as usize)
        .map(Token::surface)
        .unwrap_or(BOUNDARY)
}

/// Emits the label-independent instantiation strings firing at `position`.
///
/// Out-of-range offsets read the reserved boundary symbol; boolean flags are
/// false beyond the sentence end. Order follows the template list, so the
/// output is deterministic.
pub fn instantiate_features(
    tokens: &[Token],
    position: usize,
    templates: &[FeatureTemplate],
) -> Vec<String> {
    let mut out = Vec::with_capacity(templates.len());
    for t in templates {
        match t {
            FeatureTemplate::Unigram(a) => {
                out.push(format!("U{a}={}", surface_at(tokens, position, *a)));
            }
            FeatureTemplate::Bigram(a, b) => {
                out.push(format!(
                    "B{a}{b}={}|{}",
                    surface_at(tokens, position, *a),
                    surface_at(tokens, position, *b)
                ));
            }
            FeatureTemplate::IsClass(a) => {
                if tokens
                    .get(position + *a as usize)
                    .map(Token::is_class)
                    .unwrap_or(false)
                {
                    out.push(format!("C{a}"));
                }
            }
            FeatureTemplate::IsPreposition(a) => {
                if tokens
                    .get(position + *a as usize)
                    .map(Token::is_preposition)
                    .unwrap_or(false)
                {
                    out.push(format!("P{a}"));
                }
            }
            FeatureTemplate::LabelBigram => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(spec: &[(&str, bool, bool)]) -> Vec<Token> {
        spec.iter()
            .map(|(s, c, p)| Token::new(*s, *c, *p).unwrap())
            .collect()
    }

    #[test]
    fn unigram_extraction_at_all_offsets() {
        let tokens = toks(&[("to", false, true), ("city_name", true, false), ("on", false, true)]);
        let feats = instantiate_features(
            &tokens,
            0,
            &[
                FeatureTemplate::Unigram(0),
                FeatureTemplate::Unigram(1),
                FeatureTemplate::Unigram(2),
            ],
        );
        assert_eq!(feats, vec!["U0=to", "U1=city_name", "U2=on"]);
    }

    #[test]
    fn boundary_symbol_appears_past_the_end() {
        let tokens = toks(&[("a", false, false), ("b", false, false)]);
        let feats = instantiate_features(&tokens, 1, &[FeatureTemplate::Unigram(2)]);
        assert_eq!(feats, vec![format!("U2={BOUNDARY}")]);
    }

    #[test]
    fn class_flag_fires_only_when_true() {
        let tokens = toks(&[("to", false, true), ("city_name", true, false), ("on", false, true)]);
        let feats = instantiate_features(
            &tokens,
            0,
            &[FeatureTemplate::IsClass(0), FeatureTemplate::IsClass(1)],
        );
        assert_eq!(feats, vec!["C1"]);
    }

    #[test]
    fn default_template_set_is_valid() {
        validate_templates(&default_templates()).unwrap();
    }

    #[test]
    fn template_set_requires_one_transition() {
        assert!(validate_templates(&[FeatureTemplate::Unigram(0)]).is_err());
        assert!(validate_templates(&[
            FeatureTemplate::LabelBigram,
            FeatureTemplate::LabelBigram
        ])
        .is_err());
    }

    #[test]
    fn template_tags_round_trip() {
        for t in default_templates() {
            assert_eq!(FeatureTemplate::from_tag(&t.tag()).unwrap(), t);
        }
        assert!(FeatureTemplate::from_tag("U9").is_err());
        assert!(FeatureTemplate::from_tag("Q1").is_err());
    }
}
