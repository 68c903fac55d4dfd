//! Negative log-likelihood and its gradient.

use crate::corpus::AlignedSentence;
use crate::error::{Error, Result};

use super::features::instantiate_features;
use super::inference::forward_backward_tables;
use super::model::CrfModel;

/// A sentence reduced to fired unary feature ids per position plus gold
/// labels. Feature extraction is weight-independent, so training compiles
/// each sentence once and reuses it across optimizer iterations.
#[derive(Debug, Clone)]
pub(crate) struct CompiledSentence {
    pub unary: Vec<Vec<u32>>,
    pub labels: Vec<u32>,
}

/// Compiles `sentences`, interning any new instantiations into `model`.
pub(crate) fn compile_extending(
    model: &mut CrfModel,
    sentences: &[AlignedSentence],
) -> Result<Vec<CompiledSentence>> {
    sentences
        .iter()
        .map(|s| {
            let labels = s.labels.clone().ok_or_else(|| {
                Error::Contract("log-likelihood requires labeled sentences".into())
            })?;
            let templates = model.templates().to_vec();
            let unary = (0..s.len())
                .map(|pos| {
                    instantiate_features(&s.tokens, pos, &templates)
                        .iter()
                        .map(|inst| model.intern_unary(inst))
                        .collect()
                })
                .collect();
            Ok(CompiledSentence { unary, labels })
        })
        .collect()
}

/// Accumulates `weight · NLL` and its gradient over compiled sentences.
///
/// The gradient is `weight · (expected counts − empirical counts)`. Returns
/// `+inf` (leaving the gradient partial) when the partition function
/// overflows, so a line search can reject the point; NaN is a hard error.
pub(crate) fn accumulate_nll(
    compiled: &[CompiledSentence],
    num_labels: usize,
    weights: &[f64],
    weight: f64,
    grad: &mut [f64],
) -> Result<f64> {
    debug_assert_eq!(grad.len(), weights.len());
    if weight == 0.0 {
        return Ok(0.0);
    }
    let l = num_labels;
    let trans_block = l * l;
    let mut objective = 0.0;

    for sentence in compiled {
        let t_len = sentence.labels.len();
        // Node scores from fired unary features.
        let mut node = vec![vec![0.0; l]; t_len];
        for (t, fired) in sentence.unary.iter().enumerate() {
            for &uid in fired {
                let base = trans_block + uid as usize * l;
                for y in 0..l {
                    node[t][y] += weights[base + y];
                }
            }
        }
        let trans: Vec<Vec<f64>> = (0..l)
            .map(|y1| weights[y1 * l..(y1 + 1) * l].to_vec())
            .collect();

        let (alpha, beta, log_z) = forward_backward_tables(&node, &trans);
        if log_z.is_nan() {
            return Err(Error::Numerical("NaN partition function".into()));
        }
        if !log_z.is_finite() {
            return Ok(f64::INFINITY);
        }

        let mut gold_score = 0.0;
        for (t, &y) in sentence.labels.iter().enumerate() {
            gold_score += node[t][y as usize];
            if t > 0 {
                gold_score += trans[sentence.labels[t - 1] as usize][y as usize];
            }
        }
        objective += weight * (log_z - gold_score);

        // Unary gradient: expected − empirical.
        for (t, fired) in sentence.unary.iter().enumerate() {
            for y in 0..l {
                let p = (alpha[t][y] + beta[t][y] - log_z).exp();
                if p == 0.0 {
                    continue;
                }
                let wp = weight * p;
                for &uid in fired {
                    grad[trans_block + uid as usize * l + y] += wp;
                }
            }
            let gold = sentence.labels[t] as usize;
            for &uid in fired {
                grad[trans_block + uid as usize * l + gold] -= weight;
            }
        }
        // Transition gradient via pairwise marginals.
        for t in 1..t_len {
            for y1 in 0..l {
                let a = alpha[t - 1][y1];
                for y2 in 0..l {
                    let p = (a + trans[y1][y2] + node[t][y2] + beta[t][y2] - log_z).exp();
                    grad[y1 * l + y2] += weight * p;
                }
            }
            let (g1, g2) = (
                sentence.labels[t - 1] as usize,
                sentence.labels[t] as usize,
            );
            grad[g1 * l + g2] -= weight;
        }
    }

    if objective.is_nan() {
        return Err(Error::Numerical("NaN objective".into()));
    }
    Ok(objective)
}

/// `weight · NLL` of `batch` and its gradient, extending the model's feature
/// index with any unseen instantiations first.
///
/// The squared-norm regularizer is **not** included; the training objective
/// adds it once over all batches.
pub fn log_likelihood_and_gradient(
    batch: &[AlignedSentence],
    model: &mut CrfModel,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let compiled = compile_extending(model, batch)?;
    let mut grad = vec![0.0; model.feature_count()];
    let obj = accumulate_nll(
        &compiled,
        model.num_labels(),
        model.weights(),
        weight,
        &mut grad,
    )?;
    if !obj.is_finite() {
        return Err(Error::Numerical("objective overflow".into()));
    }
    Ok((obj, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, LabelAlphabet, Lexicon};
    use crate::crf::features::default_templates;

    fn model_and_corpus(text: &str) -> (CrfModel, Vec<AlignedSentence>) {
        let mut alphabet = LabelAlphabet::new();
        let corpus = parse_corpus(text, &mut alphabet, &Lexicon::empty()).unwrap();
        let model = CrfModel::new(alphabet, default_templates()).unwrap();
        (model, corpus)
    }

    #[test]
    fn uniform_single_token_objective_and_gradient() {
        // One sentence, length 1, two labels, zero weights: the objective is
        // weight·log 2 and each fired unary feature's gradient at the gold
        // label is weight·(0.5 − 1).
        let (mut model, corpus) = model_and_corpus("hello\tX\n");
        assert_eq!(model.num_labels(), 2);
        let weight = 3.0;
        let (obj, grad) = log_likelihood_and_gradient(&corpus, &mut model, weight).unwrap();
        assert!((obj - weight * 2.0_f64.ln()).abs() < 1e-12);
        let uid = model.unary_id("U0=hello").unwrap();
        let gold = model.alphabet().lookup("X").unwrap();
        let g = grad[model.unary_weight_index(uid, gold)];
        assert!((g - weight * (0.5 - 1.0)).abs() < 1e-12);
        let g_other = grad[model.unary_weight_index(uid, 0)];
        assert!((g_other - weight * 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_returns_zero() {
        let (mut model, corpus) = model_and_corpus("a\tX\nb\tO\n");
        let (obj, grad) = log_likelihood_and_gradient(&corpus, &mut model, 0.0).unwrap();
        assert_eq!(obj, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let (mut model, corpus) = model_and_corpus(
            "to\tO\ndallas\tTOLOC\non\tO\n\nfrom\tFROMLOC\nboston\tFROMLOC\n\nfly\tO\nto\tO\nreno\tTOLOC\n",
        );
        model.extend_features(&corpus);
        // Pseudo-random but deterministic non-zero weights.
        let n = model.feature_count();
        let weights: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 19) as f64 * 0.05 - 0.45).collect();
        model.set_weights(weights.clone()).unwrap();

        let weight = 0.7;
        let (_, grad) = log_likelihood_and_gradient(&corpus, &mut model, weight).unwrap();

        let h = 1e-5;
        let mut eval_at = |ws: Vec<f64>| -> f64 {
            let mut m = model.clone();
            m.set_weights(ws).unwrap();
            log_likelihood_and_gradient(&corpus, &mut m, weight).unwrap().0
        };
        for i in (0..n).step_by(7) {
            let mut plus = weights.clone();
            plus[i] += h;
            let mut minus = weights.clone();
            minus[i] -= h;
            let fd = (eval_at(plus) - eval_at(minus)) / (2.0 * h);
            let denom = grad[i].abs().max(1.0);
            assert!(
                (grad[i] - fd).abs() / denom < 1e-6,
                "feature {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn rejects_unlabeled_batch() {
        let (mut model, mut corpus) = model_and_corpus("a\tO\n");
        corpus[0].labels = None;
        assert!(log_likelihood_and_gradient(&corpus, &mut model, 1.0).is_err());
    }
}
