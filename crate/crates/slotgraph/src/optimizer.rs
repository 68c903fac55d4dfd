//! Batch L-BFGS minimization of the supervised and mixed labeled/unlabeled
//! training objectives.
//!
//! The objective is
//! `NLL(labeled) + eta · NLL(decoded unlabeled) + gamma · ‖Λ‖²`;
//! with an empty unlabeled slice or `eta = 0` the second term vanishes and
//! the evaluation is bit-identical to the purely supervised objective.

use std::collections::VecDeque;

use crate::corpus::AlignedSentence;
use crate::crf::CrfModel;
use crate::error::{Error, Result};

/// L-BFGS and line-search settings.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// History pairs kept for the two-loop recursion.
    pub memory: usize,
    pub max_iterations: usize,
    /// Termination threshold on the gradient infinity-norm.
    pub grad_tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Step shrink factor per backtracking round.
    pub armijo_shrink: f64,
    pub armijo_max_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            memory: 10,
            max_iterations: 200,
            grad_tolerance: 1e-5,
            armijo_c1: 1e-4,
            armijo_shrink: 0.5,
            armijo_max_steps: 30,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.max_iterations == 0 || self.armijo_max_steps == 0 {
            return Err(Error::Config("optimizer counts must be positive".into()));
        }
        if !(self.grad_tolerance > 0.0)
            || !(self.armijo_c1 > 0.0)
            || !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0)
        {
            return Err(Error::Config("optimizer tolerances out of range".into()));
        }
        Ok(())
    }
}

/// One machine-readable progress record per accepted iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_inf_norm: f64,
    pub step_size: f64,
}

impl IterationRecord {
    /// Single-line form: `iter=3 obj=1.25e0 ginf=4.1e-3 step=1`.
    pub fn to_line(&self) -> String {
        format!(
            "iter={} obj={:.9e} ginf={:.3e} step={:.3e}",
            self.iteration, self.objective, self.grad_inf_norm, self.step_size
        )
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// Backtracking exhausted without sufficient decrease; the best iterate
    /// so far is returned.
    LineSearchFailed,
}

/// Result of a raw vector minimization.
#[derive(Debug, Clone)]
pub struct VectorMinimum {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f(x)` by L-BFGS with backtracking-Armijo line search.
///
/// `f` writes the gradient into its second argument and returns the
/// objective; it may return `+inf` for points outside the useful domain
/// (the line search treats that as "insufficient decrease"), but a NaN
/// objective aborts with a numerical error. Accepted steps never increase
/// the objective.
pub fn minimize_fn(
    f: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
    x0: Vec<f64>,
    config: &OptimizerConfig,
    mut on_iteration: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<VectorMinimum> {
    config.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut objective = f(&x, &mut grad);
    if objective.is_nan() {
        return Err(Error::Numerical("NaN objective at initial point".into()));
    }
    if !objective.is_finite() {
        return Err(Error::Numerical("objective not finite at initial point".into()));
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut direction = vec![0.0; n];
    let mut candidate = vec![0.0; n];
    let mut candidate_grad = vec![0.0; n];

    for iteration in 0..config.max_iterations {
        let g_inf = inf_norm(&grad);
        if g_inf <= config.grad_tolerance {
            return Ok(VectorMinimum {
                x,
                objective,
                iterations: iteration,
                stop: StopReason::GradientTolerance,
            });
        }

        two_loop_direction(&grad, &history, &mut direction);
        let mut descent = dot(&grad, &direction);
        if !(descent < 0.0) {
            // Fall back to steepest descent if curvature info is unusable.
            for (d, g) in direction.iter_mut().zip(&grad) {
                *d = -g;
            }
            descent = dot(&grad, &direction);
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = false;
        let mut new_objective = f64::INFINITY;
        for _ in 0..config.armijo_max_steps {
            for i in 0..n {
                candidate[i] = x[i] + step * direction[i];
            }
            new_objective = f(&candidate, &mut candidate_grad);
            if new_objective.is_nan() {
                return Err(Error::Numerical(format!(
                    "NaN objective during line search at iteration {iteration}"
                )));
            }
            if new_objective <= objective + config.armijo_c1 * step * descent {
                accepted = true;
                break;
            }
            step *= config.armijo_shrink;
        }
        if !accepted {
            return Ok(VectorMinimum {
                x,
                objective,
                iterations: iteration,
                stop: StopReason::LineSearchFailed,
            });
        }

        // Curvature update.
        let s: Vec<f64> = candidate.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = candidate_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * inf_norm(&s) * inf_norm(&y) && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        x.copy_from_slice(&candidate);
        std::mem::swap(&mut grad, &mut candidate_grad);
        objective = new_objective;

        if let Some(cb) = on_iteration.as_deref_mut() {
            cb(&IterationRecord {
                iteration: iteration + 1,
                objective,
                grad_inf_norm: inf_norm(&grad),
                step_size: step,
            });
        }
    }

    Ok(VectorMinimum {
        x,
        objective,
        iterations: config.max_iterations,
        stop: StopReason::MaxIterations,
    })
}

/// Two-loop recursion: `direction = -H·grad` with implicit inverse Hessian.
fn two_loop_direction(
    grad: &[f64],
    history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    direction: &mut [f64],
) {
    direction.copy_from_slice(grad);
    if history.is_empty() {
        for d in direction.iter_mut() {
            *d = -*d;
        }
        return;
    }
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, direction);
        for (d, yi) in direction.iter_mut().zip(y) {
            *d -= alpha * yi;
        }
        alphas.push(alpha);
    }
    // Initial scaling from the most recent pair.
    let (s_last, y_last, _) = history.back().unwrap();
    let gamma = dot(s_last, y_last) / dot(y_last, y_last);
    for d in direction.iter_mut() {
        *d *= gamma;
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * dot(y, direction);
        for (d, si) in direction.iter_mut().zip(s) {
            *d += (alpha - beta) * si;
        }
    }
    for d in direction.iter_mut() {
        *d = -*d;
    }
}

/// The training objective: labeled NLL plus `eta`-weighted NLL of decoded
/// unlabeled data plus the `gamma`-weighted squared-norm regularizer.
#[derive(Debug, Clone, Copy)]
pub struct TrainingObjective<'a> {
    pub labeled: &'a [AlignedSentence],
    /// Unlabeled sentences carrying estimated labels; may be empty.
    pub unlabeled_decoded: &'a [AlignedSentence],
    pub gamma: f64,
    pub eta: f64,
}

impl<'a> TrainingObjective<'a> {
    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma {} out of range", self.gamma)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta {} out of range", self.eta)));
        }
        Ok(())
    }

    /// Objective value and gradient at the model's current weights, without
    /// extending the feature index.
    pub fn evaluate(&self, model: &CrfModel) -> Result<(f64, Vec<f64>)> {
        self.validate()?;
        let mut m = model.clone();
        let labeled = crate::crf::compile_extending(&mut m, self.labeled)?;
        let unlabeled = crate::crf::compile_extending(&mut m, self.unlabeled_decoded)?;
        if m.feature_count() != model.feature_count() {
            return Err(Error::Contract(
                "evaluate called with features missing from the model; extend first".into(),
            ));
        }
        let mut grad = vec![0.0; model.feature_count()];
        let mut obj =
            crate::crf::accumulate_nll(&labeled, model.num_labels(), model.weights(), 1.0, &mut grad)?;
        obj += crate::crf::accumulate_nll(
            &unlabeled,
            model.num_labels(),
            model.weights(),
            self.eta,
            &mut grad,
        )?;
        for (g, w) in grad.iter_mut().zip(model.weights()) {
            *g += 2.0 * self.gamma * w;
        }
        obj += self.gamma * model.weights().iter().map(|w| w * w).sum::<f64>();
        if !obj.is_finite() {
            return Err(Error::Numerical("objective not finite".into()));
        }
        Ok((obj, grad))
    }
}

/// A trained model together with optimizer diagnostics.
#[derive(Debug, Clone)]
pub struct Minimized {
    pub model: CrfModel,
    pub objective: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

impl Minimized {
    pub fn line_search_failed(&self) -> bool {
        self.stop == StopReason::LineSearchFailed
    }
}

/// Minimizes the training objective starting from `initial` (a warm start:
/// existing weights are kept, new features start at zero).
pub fn minimize(
    objective: &TrainingObjective,
    initial: CrfModel,
    config: &OptimizerConfig,
) -> Result<Minimized> {
    minimize_traced(objective, initial, config, None)
}

/// [`minimize`] with a per-iteration progress callback.
pub fn minimize_traced(
    objective: &TrainingObjective,
    initial: CrfModel,
    config: &OptimizerConfig,
    on_iteration: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<Minimized> {
    objective.validate()?;
    config.validate()?;
    let mut model = initial;
    let labeled = crate::crf::compile_extending(&mut model, objective.labeled)?;
    let unlabeled = crate::crf::compile_extending(&mut model, objective.unlabeled_decoded)?;
    let num_labels = model.num_labels();
    let gamma = objective.gamma;
    let eta = objective.eta;

    let mut fail: Option<Error> = None;
    let mut f = |x: &[f64], grad: &mut [f64]| -> f64 {
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        let labeled_obj = match crate::crf::accumulate_nll(&labeled, num_labels, x, 1.0, grad) {
            Ok(v) => v,
            Err(e) => {
                fail = Some(e);
                return f64::NAN;
            }
        };
        let unlabeled_obj = match crate::crf::accumulate_nll(&unlabeled, num_labels, x, eta, grad) {
            Ok(v) => v,
            Err(e) => {
                fail = Some(e);
                return f64::NAN;
            }
        };
        if !labeled_obj.is_finite() || !unlabeled_obj.is_finite() {
            return f64::INFINITY;
        }
        let mut obj = labeled_obj + unlabeled_obj;
        for (g, w) in grad.iter_mut().zip(x) {
            *g += 2.0 * gamma * w;
            obj += gamma * w * w;
        }
        obj
    };

    let x0 = model.weights().to_vec();
    let result = minimize_fn(&mut f, x0, config, on_iteration);
    if let Some(e) = fail {
        return Err(e);
    }
    let minimum = result?;
    model.set_weights(minimum.x)?;
    Ok(Minimized {
        model,
        objective: minimum.objective,
        iterations: minimum.iterations,
        stop: minimum.stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, LabelAlphabet, Lexicon};
    use crate::crf::default_templates;

    #[test]
    fn quadratic_converges_to_analytic_optimum() {
        let target: Vec<f64> = (0..12).map(|i| (i as f64) * 0.3 - 1.7).collect();
        let mut evals = 0usize;
        let mut f = |x: &[f64], grad: &mut [f64]| -> f64 {
            evals += 1;
            let mut obj = 0.0;
            for i in 0..x.len() {
                let d = x[i] - target[i];
                obj += d * d;
                grad[i] = 2.0 * d;
            }
            obj
        };
        let result = minimize_fn(
            &mut f,
            vec![0.0; target.len()],
            &OptimizerConfig {
                grad_tolerance: 1e-9,
                ..OptimizerConfig::default()
            },
            None,
        )
        .unwrap();
        assert!(result.iterations <= 25, "took {} iterations", result.iterations);
        for (x, t) in result.x.iter().zip(&target) {
            assert!((x - t).abs() < 1e-6);
        }
    }

    #[test]
    fn accepted_steps_never_increase_objective() {
        // Rosenbrock in 2D: a non-convex stress test for the line search.
        let mut f = |x: &[f64], grad: &mut [f64]| -> f64 {
            let (a, b) = (x[0], x[1]);
            grad[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            grad[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let mut objectives = Vec::new();
        let mut record = |r: &IterationRecord| objectives.push(r.objective);
        let result = minimize_fn(
            &mut f,
            vec![-1.2, 1.0],
            &OptimizerConfig {
                max_iterations: 150,
                grad_tolerance: 1e-8,
                ..OptimizerConfig::default()
            },
            Some(&mut record),
        )
        .unwrap();
        for w in objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective increased: {} -> {}", w[0], w[1]);
        }
        assert!((result.x[0] - 1.0).abs() < 1e-4);
    }

    fn toy_corpus() -> (Vec<AlignedSentence>, LabelAlphabet) {
        let mut alphabet = LabelAlphabet::new();
        let corpus = parse_corpus(
            "to\tO\ndallas\tTOLOC\n\nfrom\tFROMLOC\nboston\tFROMLOC\n\nfly\tO\nhome\tO\n",
            &mut alphabet,
            &Lexicon::empty(),
        )
        .unwrap();
        (corpus, alphabet)
    }

    #[test]
    fn eta_zero_matches_empty_unlabeled_exactly() {
        let (corpus, alphabet) = toy_corpus();
        let (labeled, unlabeled) = corpus.split_at(2);
        let cfg = OptimizerConfig::default();

        let with_eta_zero = minimize(
            &TrainingObjective {
                labeled,
                unlabeled_decoded: unlabeled,
                gamma: 0.05,
                eta: 0.0,
            },
            CrfModel::new(alphabet.clone(), default_templates()).unwrap(),
            &cfg,
        )
        .unwrap();
        let with_empty = minimize(
            &TrainingObjective {
                labeled,
                unlabeled_decoded: &[],
                gamma: 0.05,
                eta: 0.3,
            },
            CrfModel::new(alphabet, default_templates()).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(with_eta_zero.objective, with_empty.objective);
        assert_eq!(with_eta_zero.iterations, with_empty.iterations);
        // Weight vectors may differ in length (eta=0 still interns the
        // unlabeled features); compare the shared prefix.
        let shared = with_empty.model.feature_count();
        assert_eq!(
            &with_eta_zero.model.weights()[..shared],
            with_empty.model.weights()
        );
        assert!(with_eta_zero.model.weights()[shared..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn huge_gamma_drives_weights_to_zero() {
        let (corpus, alphabet) = toy_corpus();
        let trained = minimize(
            &TrainingObjective {
                labeled: &corpus,
                unlabeled_decoded: &[],
                gamma: 1e6,
                eta: 0.0,
            },
            CrfModel::new(alphabet, default_templates()).unwrap(),
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(trained.model.weights().iter().all(|w| w.abs() < 1e-3));
    }

    #[test]
    fn convex_objective_reaches_same_minimum_from_two_starts() {
        let (corpus, alphabet) = toy_corpus();
        let objective = TrainingObjective {
            labeled: &corpus,
            unlabeled_decoded: &[],
            gamma: 0.1,
            eta: 0.0,
        };
        let cfg = OptimizerConfig {
            grad_tolerance: 1e-8,
            ..OptimizerConfig::default()
        };

        let mut from_zero = CrfModel::new(alphabet.clone(), default_templates()).unwrap();
        from_zero.extend_features(&corpus);
        let mut from_random = from_zero.clone();
        let n = from_random.feature_count();
        from_random
            .set_weights((0..n).map(|i| ((i * 13 + 5) % 11) as f64 * 0.1 - 0.5).collect())
            .unwrap();

        let a = minimize(&objective, from_zero, &cfg).unwrap();
        let b = minimize(&objective, from_random, &cfg).unwrap();
        let rel = (a.objective - b.objective).abs() / a.objective.abs().max(1e-12);
        assert!(rel < 1e-4, "objectives {} vs {}", a.objective, b.objective);
    }
}
