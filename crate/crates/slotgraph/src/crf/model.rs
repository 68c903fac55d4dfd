//! The weight vector, feature index, and model file format.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::{AlignedSentence, LabelAlphabet, Token, NULL_LABEL};
use crate::error::{Error, Result};

use super::features::{instantiate_features, validate_templates, FeatureTemplate};
use super::inference::{forward_backward, viterbi, MarginalTable};

const FORMAT_HEADER: &str = "slotgraph model v1";

/// A linear-chain CRF: weights over instantiated features plus the template
/// set and label alphabet that generated them.
///
/// Weight layout: the `L × L` transition block first (index `y1 * L + y2`),
/// then one block of `L` weights per unary instantiation. Appending new
/// instantiations never moves existing ids, which keeps warm starts valid
/// while the feature index grows.
#[derive(Debug, Clone)]
pub struct CrfModel {
    alphabet: LabelAlphabet,
    templates: Vec<FeatureTemplate>,
    unary_names: Vec<String>,
    unary_index: HashMap<String, u32>,
    weights: Vec<f64>,
}

impl CrfModel {
    pub fn new(alphabet: LabelAlphabet, templates: Vec<FeatureTemplate>) -> Result<Self> {
        validate_templates(&templates)?;
        let l = alphabet.len();
        Ok(CrfModel {
            alphabet,
            templates,
            unary_names: Vec::new(),
            unary_index: HashMap::new(),
            weights: vec![0.0; l * l],
        })
    }

    pub fn alphabet(&self) -> &LabelAlphabet {
        &self.alphabet
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn num_labels(&self) -> usize {
        self.alphabet.len()
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces the weight vector, rejecting non-finite entries.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::Contract(format!(
                "weight vector length {} does not match feature count {}",
                weights.len(),
                self.weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Numerical(format!("non-finite weight {w}")));
        }
        self.weights = weights;
        Ok(())
    }

    pub(crate) fn unary_weight_index(&self, unary_id: u32, y: u32) -> usize {
        let l = self.num_labels();
        l * l + unary_id as usize * l + y as usize
    }

    pub(crate) fn unary_id(&self, instantiation: &str) -> Option<u32> {
        self.unary_index.get(instantiation).copied()
    }

    /// Interns a unary instantiation, growing the weight vector with zeros.
    pub(crate) fn intern_unary(&mut self, instantiation: &str) -> u32 {
        if let Some(&id) = self.unary_index.get(instantiation) {
            return id;
        }
        let id = self.unary_names.len() as u32;
        self.unary_names.push(instantiation.to_string());
        self.unary_index.insert(instantiation.to_string(), id);
        self.weights.extend(std::iter::repeat(0.0).take(self.num_labels()));
        id
    }

    /// Instantiates and interns every feature fired by `sentences`.
    /// Training-time extension; decode-time lookups never extend.
    pub fn extend_features(&mut self, sentences: &[AlignedSentence]) {
        for s in sentences {
            for pos in 0..s.len() {
                for inst in instantiate_features(&s.tokens, pos, &self.templates) {
                    self.intern_unary(&inst);
                }
            }
        }
    }

    /// Log-domain potential tables for one sentence. Unknown instantiations
    /// contribute zero.
    pub fn score_tables(&self, tokens: &[Token]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let l = self.num_labels();
        let mut node = vec![vec![0.0; l]; tokens.len()];
        for (pos, row) in node.iter_mut().enumerate() {
            for inst in instantiate_features(tokens, pos, &self.templates) {
                if let Some(uid) = self.unary_id(&inst) {
                    let base = self.unary_weight_index(uid, 0);
                    for (y, slot) in row.iter_mut().enumerate() {
                        *slot += self.weights[base + y];
                    }
                }
            }
        }
        (node, self.transition_table())
    }

    /// The `L × L` transition score table.
    pub fn transition_table(&self) -> Vec<Vec<f64>> {
        let l = self.num_labels();
        (0..l)
            .map(|y1| self.weights[y1 * l..(y1 + 1) * l].to_vec())
            .collect()
    }

    /// Viterbi decode of one sentence.
    pub fn decode(&self, tokens: &[Token]) -> Vec<u32> {
        let (node, trans) = self.score_tables(tokens);
        viterbi(&node, &trans)
    }

    /// Per-position label marginals for one sentence.
    pub fn marginals(&self, tokens: &[Token]) -> MarginalTable {
        let (node, trans) = self.score_tables(tokens);
        forward_backward(&node, &trans)
    }

    /// The feature string for a weight id (bijective with ids).
    pub fn feature_string(&self, id: usize) -> String {
        let l = self.num_labels();
        if id < l * l {
            let y1 = (id / l) as u32;
            let y2 = (id % l) as u32;
            format!("T {} {}", self.alphabet.name(y1), self.alphabet.name(y2))
        } else {
            let uid = (id - l * l) / l;
            let y = ((id - l * l) % l) as u32;
            format!("{} {}", self.unary_names[uid], self.alphabet.name(y))
        }
    }

    /// Inverse of [`CrfModel::feature_string`].
    pub fn feature_id(&self, feature: &str) -> Option<usize> {
        let l = self.num_labels();
        let (head, label) = feature.rsplit_once(' ')?;
        let y = self.alphabet.lookup(label)? as usize;
        if let Some(rest) = head.strip_prefix("T ") {
            if head.starts_with("T ") && !rest.contains(' ') {
                // Transition: head is "T <y1>".
                let y1 = self.alphabet.lookup(rest)? as usize;
                return Some(y1 * l + y);
            }
        }
        let uid = self.unary_index.get(head).copied()? as usize;
        Some(l * l + uid * l + y)
    }

    /// Writes the versioned flat model file: header (templates, alphabet),
    /// then one `feature-string<TAB>weight` line per feature id, with
    /// 17 significant digits so weights round-trip exactly.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{FORMAT_HEADER}")?;
        writeln!(out, "templates\t{}", self.templates.len())?;
        for t in &self.templates {
            writeln!(out, "{}", t.tag())?;
        }
        writeln!(out, "labels\t{}", self.alphabet.len())?;
        for name in self.alphabet.names() {
            writeln!(out, "{name}")?;
        }
        writeln!(out, "features\t{}", self.weights.len())?;
        for (id, w) in self.weights.iter().enumerate() {
            writeln!(out, "{}\t{:.16e}", self.feature_string(id), w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Reads a model file written by [`CrfModel::write_to`].
    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line)),
                Some((i, Err(e))) => Err(Error::ModelFormat {
                    line: i + 1,
                    message: e.to_string(),
                }),
                None => Err(Error::ModelFormat {
                    line: 0,
                    message: format!("unexpected end of file, expected {expect}"),
                }),
            }
        };

        let (line, header) = next("header")?;
        if header != FORMAT_HEADER {
            return Err(Error::ModelFormat {
                line,
                message: format!("bad header {header:?}"),
            });
        }

        let count_line = |line: usize, text: &str, section: &str| -> Result<usize> {
            let rest = text
                .strip_prefix(section)
                .and_then(|r| r.strip_prefix('\t'))
                .ok_or_else(|| Error::ModelFormat {
                    line,
                    message: format!("expected `{section}<TAB>count`, got {text:?}"),
                })?;
            rest.parse().map_err(|_| Error::ModelFormat {
                line,
                message: format!("bad count {rest:?}"),
            })
        };

        let (l1, t_line) = next("templates")?;
        let n_templates = count_line(l1, &t_line, "templates")?;
        let mut templates = Vec::with_capacity(n_templates);
        for _ in 0..n_templates {
            let (line, tag) = next("template tag")?;
            templates.push(FeatureTemplate::from_tag(&tag).map_err(|e| Error::ModelFormat {
                line,
                message: e.to_string(),
            })?);
        }

        let (l2, lab_line) = next("labels")?;
        let n_labels = count_line(l2, &lab_line, "labels")?;
        let mut alphabet = LabelAlphabet::new();
        for i in 0..n_labels {
            let (line, name) = next("label name")?;
            if i == 0 && name != NULL_LABEL {
                return Err(Error::ModelFormat {
                    line,
                    message: format!("first label must be {NULL_LABEL:?}, got {name:?}"),
                });
            }
            let id = alphabet.intern(&name);
            if id as usize != i {
                return Err(Error::ModelFormat {
                    line,
                    message: format!("duplicate label {name:?}"),
                });
            }
        }

        let (l3, f_line) = next("features")?;
        let n_features = count_line(l3, &f_line, "features")?;
        let l = alphabet.len();
        if n_features < l * l || (n_features - l * l) % l != 0 {
            return Err(Error::ModelFormat {
                line: l3,
                message: format!("feature count {n_features} inconsistent with {l} labels"),
            });
        }

        let mut model = CrfModel::new(alphabet, templates)?;
        let mut weights = Vec::with_capacity(n_features);
        for id in 0..n_features {
            let (line, text) = next("feature line")?;
            let (name, w_str) = text.split_once('\t').ok_or_else(|| Error::ModelFormat {
                line,
                message: "expected `feature<TAB>weight`".into(),
            })?;
            let w: f64 = w_str.parse().map_err(|_| Error::ModelFormat {
                line,
                message: format!("bad weight {w_str:?}"),
            })?;
            if id >= l * l && (id - l * l) % l == 0 {
                let inst = name.rsplit_once(' ').map(|(h, _)| h).unwrap_or(name);
                model.intern_unary(inst);
            }
            let expected = model.feature_string(id);
            if name != expected {
                return Err(Error::ModelFormat {
                    line,
                    message: format!("feature {name:?} out of order, expected {expected:?}"),
                });
            }
            weights.push(w);
        }
        model.set_weights(weights)?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = fs::File::open(path)?;
        CrfModel::read_from(std::io::BufReader::new(file))
    }
}
