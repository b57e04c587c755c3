use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_weights, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logreg,
    LinearSvm,
    RandomForest,
}

impl ClassifierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::RandomForest => "random_forest",
        }
    }
}

/// Classifier choice and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Inverse regularization strength for the linear models.
    pub c: f64,
    pub n_trees: usize,
    pub min_split: usize,
    /// Features tried per split; `None` means `floor(sqrt(p))`.
    pub max_features: Option<usize>,
    /// Reweight classes by `n / (2 n_j)`.
    pub balanced: bool,
    pub max_iter: usize,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            kind,
            c: 1.0,
            n_trees: 10,
            min_split: 2,
            max_features: None,
            balanced: true,
            max_iter: 1000,
            seed,
        }
    }
}

/// Linear decision function `w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { p_pos: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART tree grown on weighted Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Weighted share of the positive class in the leaf reached by `x`.
    pub fn p_pos(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { p_pos } => return *p_pos,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Share of trees voting positive.
    pub fn vote_share(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.p_pos(x) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Majority vote; a tied vote falls back to the mean leaf probability.
    pub fn predict(&self, x: &[f64]) -> bool {
        let share = self.vote_share(x);
        if share != 0.5 {
            return share > 0.5;
        }
        self.trees.iter().map(|t| t.p_pos(x)).sum::<f64>() / self.trees.len() as f64 > 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Linear(LinearModel),
    Forest(RandomForest),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> bool {
        match self {
            Model::Linear(m) => m.decision(x) > 0.0,
            Model::Forest(f) => f.predict(x),
        }
    }

    pub fn linear(&self) -> Option<&LinearModel> {
        match self {
            Model::Linear(m) => Some(m),
            Model::Forest(_) => None,
        }
    }
}

fn sample_weights(y: &[bool], balanced: bool) -> Result<Vec<f64>, StatsError> {
    let w = class_weights(y)?;
    Ok(y.iter().map(|&v| if balanced { w[v as usize] } else { 1.0 }).collect())
}

fn check(x: &[Vec<f64>], y: &[bool]) -> Result<usize, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let p = x.first().map(Vec::len).unwrap_or(0);
    if x.iter().any(|r| r.len() != p) {
        return Err(StatsError::Invalid("ragged feature rows".into()));
    }
    Ok(p)
}

/// Fits the classifier described by `spec`. Both classes must be present.
pub fn train(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[bool]) -> Result<Model, StatsError> {
    let p = check(x, y)?;
    let w = sample_weights(y, spec.balanced)?;
    Ok(match spec.kind {
        ClassifierKind::Logreg => Model::Linear(train_logreg(x, y, &w, spec.c, spec.max_iter)),
        ClassifierKind::LinearSvm => Model::Linear(train_svm(x, y, &w, spec.c, spec.max_iter)),
        ClassifierKind::RandomForest => Model::Forest(train_forest(x, y, &w, p, spec)),
    })
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Class-weighted logistic loss with an L2 penalty `|beta|^2 / (2C)` on the
/// slopes, and its gradient. `theta = [intercept, beta...]`.
pub fn logistic_loss_grad(theta: &[f64], x: &[Vec<f64>], y: &[bool], weights: &[f64], c: f64) -> (f64, Vec<f64>) {
    let p = theta.len() - 1;
    let mut loss = theta[1..].iter().map(|b| b * b).sum::<f64>() / (2.0 * c);
    let mut grad: Vec<f64> = std::iter::once(0.0).chain(theta[1..].iter().map(|b| b / c)).collect();
    for ((row, &yi), &s) in x.iter().zip(y).zip(weights) {
        let sign = if yi { 1.0 } else { -1.0 };
        let z = theta[0] + (0..p).map(|j| theta[j + 1] * row[j]).sum::<f64>();
        loss += s * softplus(-sign * z);
        let g = -s * sign * sigmoid(-sign * z);
        grad[0] += g;
        for j in 0..p {
            grad[j + 1] += g * row[j];
        }
    }
    (loss, grad)
}

/// Damped Newton iterations with Armijo backtracking. Stops once the
/// gradient's max-norm falls below 1e-6.
fn train_logreg(x: &[Vec<f64>], y: &[bool], w: &[f64], c: f64, max_iter: usize) -> LinearModel {
    let p = x.first().map(Vec::len).unwrap_or(0);
    let mut theta = vec![0.0; p + 1];
    let (mut loss, mut grad) = logistic_loss_grad(&theta, x, y, w, c);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < 1e-6 {
            converged = true;
            break;
        }
        iterations += 1;
        let mut h = DMatrix::<f64>::zeros(p + 1, p + 1);
        for j in 1..=p {
            h[(j, j)] = 1.0 / c;
        }
        for ((row, _), &s) in x.iter().zip(y).zip(w) {
            let z = theta[0] + (0..p).map(|j| theta[j + 1] * row[j]).sum::<f64>();
            let pr = sigmoid(z);
            let d = s * pr * (1.0 - pr);
            for a in 0..=p {
                let xa = if a == 0 { 1.0 } else { row[a - 1] };
                for b in a..=p {
                    let xb = if b == 0 { 1.0 } else { row[b - 1] };
                    h[(a, b)] += d * xa * xb;
                }
            }
        }
        for a in 0..=p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        let g = DVector::from_column_slice(&grad);
        let step: Vec<f64> = match h.cholesky() {
            Some(ch) => ch.solve(&g).iter().map(|v| -v).collect(),
            None => grad.iter().map(|v| -v).collect(),
        };
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let (l, gr) = logistic_loss_grad(&cand, x, y, w, c);
            if l <= loss + 1e-4 * t * slope || t < 1e-10 {
                theta = cand;
                loss = l;
                grad = gr;
                break;
            }
            t *= 0.5;
        }
    }
    LinearModel {
        intercept: theta[0],
        weights: theta[1..].to_vec(),
        iterations,
        converged,
    }
}

/// Dual coordinate descent for the L1-loss (hinge) SVM with per-sample
/// box constraints `C * weight`. The bias enters as a constant feature.
fn train_svm(x: &[Vec<f64>], y: &[bool], w: &[f64], c: f64, max_iter: usize) -> LinearModel {
    let n = x.len();
    let p = x.first().map(Vec::len).unwrap_or(0);
    let mut wv = vec![0.0; p + 1];
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = x.iter().map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>()).collect();
    let upper: Vec<f64> = w.iter().map(|s| c * s).collect();
    let sign: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let dot = wv[p] + (0..p).map(|j| wv[j] * x[i][j]).sum::<f64>();
            let g = sign[i] * dot - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= upper[i] {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, upper[i]);
                let d = (alpha[i] - old) * sign[i];
                for j in 0..p {
                    wv[j] += d * x[i][j];
                }
                wv[p] += d;
            }
        }
        if pg_max - pg_min < 1e-4 {
            converged = true;
            break;
        }
    }
    LinearModel {
        intercept: wv[p],
        weights: wv[..p].to_vec(),
        iterations,
        converged,
    }
}

fn gini_impurity(pos: f64, neg: f64) -> f64 {
    let t = pos + neg;
    if t <= 0.0 {
        return 0.0;
    }
    let (a, b) = (pos / t, neg / t);
    1.0 - a * a - b * b
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn best_split_on(feature: usize, idx: &[usize], x: &[Vec<f64>], y: &[bool], sw: &[f64]) -> Option<Split> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
    let (mut tot_pos, mut tot_neg) = (0.0, 0.0);
    for &i in &order {
        if y[i] {
            tot_pos += sw[i];
        } else {
            tot_neg += sw[i];
        }
    }
    let total = tot_pos + tot_neg;
    let (mut lp, mut ln) = (0.0, 0.0);
    let mut best: Option<Split> = None;
    for k in 0..order.len() - 1 {
        let i = order[k];
        if y[i] {
            lp += sw[i];
        } else {
            ln += sw[i];
        }
        let (v, next) = (x[i][feature], x[order[k + 1]][feature]);
        if v == next {
            continue;
        }
        let (lw, rw) = (lp + ln, total - lp - ln);
        let score = (lw * gini_impurity(lp, ln) + rw * gini_impurity(tot_pos - lp, tot_neg - ln)) / total;
        if best.as_ref().is_none_or(|b| score < b.score) {
            let mut threshold = v + (next - v) / 2.0;
            if threshold >= next {
                threshold = v;
            }
            best = Some(Split {
                feature,
                threshold,
                score,
            });
        }
    }
    best
}

fn grow_tree(
    x: &[Vec<f64>],
    y: &[bool],
    sw: &[f64],
    root: Vec<usize>,
    p: usize,
    max_features: usize,
    min_split: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let mut nodes = vec![Node::Leaf { p_pos: 0.0 }];
    let mut stack = vec![(0usize, root)];
    let features: Vec<usize> = (0..p).collect();
    while let Some((slot, idx)) = stack.pop() {
        let (pos, neg) = idx
            .iter()
            .fold((0.0, 0.0), |(a, b), &i| if y[i] { (a + sw[i], b) } else { (a, b + sw[i]) });
        let p_pos = if pos + neg > 0.0 { pos / (pos + neg) } else { 0.0 };
        let parent = gini_impurity(pos, neg);
        nodes[slot] = Node::Leaf { p_pos };
        if idx.len() < min_split || parent <= 0.0 {
            continue;
        }
        let mut cand = features.clone();
        cand.shuffle(rng);
        let mut best: Option<Split> = None;
        for (tried, &f) in cand.iter().enumerate() {
            // Keep looking past the quota until some feature can split.
            if tried >= max_features && best.is_some() {
                break;
            }
            if let Some(s) = best_split_on(f, &idx, x, y, sw) {
                if best.as_ref().is_none_or(|b| s.score < b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else { continue };
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { p_pos: 0.0 });
        nodes.push(Node::Leaf { p_pos: 0.0 });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        stack.push((r, right));
        stack.push((l, left));
    }
    DecisionTree { nodes }
}

fn train_forest(x: &[Vec<f64>], y: &[bool], w: &[f64], p: usize, spec: &ClassifierSpec) -> RandomForest {
    let n = x.len();
    let max_features = spec
        .max_features
        .unwrap_or(((p as f64).sqrt().floor() as usize).max(1))
        .clamp(1, p.max(1));
    let trees = (0..spec.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(t as u64));
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let sw: Vec<f64> = counts.iter().zip(w).map(|(&k, &s)| k as f64 * s).collect();
            let root: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
            grow_tree(x, y, &sw, root, p, max_features, spec.min_split, &mut rng)
        })
        .collect();
    RandomForest { trees }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            x.push(vec![1.0 + t, t - 0.5]);
            y.push(true);
            x.push(vec![-1.0 - t, 0.5 - t]);
            y.push(false);
        }
        (x, y)
    }

    fn accuracy(m: &Model, x: &[Vec<f64>], y: &[bool]) -> f64 {
        x.iter().zip(y).filter(|(r, &t)| m.predict(r) == t).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = separable();
        for kind in [ClassifierKind::Logreg, ClassifierKind::LinearSvm, ClassifierKind::RandomForest] {
            let m = train(&ClassifierSpec::new(kind, 3), &x, &y).unwrap();
            assert_eq!(accuracy(&m, &x, &y), 1.0, "{kind:?}");
        }
    }

    #[test]
    fn logreg_converges_with_small_gradient() {
        let (x, y) = separable();
        let Model::Linear(m) = train(&ClassifierSpec::new(ClassifierKind::Logreg, 0), &x, &y).unwrap() else {
            unreachable!()
        };
        assert!(m.converged);
        let w = sample_weights(&y, true).unwrap();
        let theta: Vec<f64> = std::iter::once(m.intercept).chain(m.weights.iter().copied()).collect();
        let (_, g) = logistic_loss_grad(&theta, &x, &y, &w, 1.0);
        assert!(g.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn symmetric_labels_give_zero_coefficients() {
        let x: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![-3.0, 0.5], vec![-3.0, 0.5]];
        let y = vec![true, false, true, false];
        let m = train(&ClassifierSpec::new(ClassifierKind::Logreg, 0), &x, &y).unwrap();
        let lm = m.linear().unwrap();
        assert!(lm.weights.iter().all(|w| w.abs() < 1e-6));
        assert!(lm.intercept.abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        for kind in [ClassifierKind::Logreg, ClassifierKind::LinearSvm, ClassifierKind::RandomForest] {
            assert!(matches!(
                train(&ClassifierSpec::new(kind, 0), &x, &[true, true]),
                Err(StatsError::SingleClass)
            ));
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let (x, y) = separable();
        let spec = ClassifierSpec::new(ClassifierKind::RandomForest, 11);
        assert_eq!(train(&spec, &x, &y).unwrap(), train(&spec, &x, &y).unwrap());
    }
}
