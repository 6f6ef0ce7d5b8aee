use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{Label, Trace};

use super::features::{gini, trace_rows, FeatureMatrix};
use super::EbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Maximum depth; the root is depth 0. `usize::MAX` means unbounded.
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Number of features examined per split.
    pub feature_subsample: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 5,
            feature_subsample: 3,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_features: usize) -> Result<(), EbError> {
        if self.n_trees == 0 {
            return Err(EbError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(EbError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(EbError::InvalidConfig("min_leaf must be >= 1".into()));
        }
        if self.feature_subsample == 0 || self.feature_subsample > n_features {
            return Err(EbError::InvalidConfig(format!(
                "feature_subsample must lie in 1..={n_features}, got {}",
                self.feature_subsample
            )));
        }
        Ok(())
    }
}

/// A tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

/// Binary decision tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_distribution(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    config: ForestConfig,
    classes: Vec<Label>,
    feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: Label,
    pub class_index: usize,
    pub distribution: Vec<f64>,
}

impl Forest {
    /// Assembles a forest, checking node references, feature indices and leaf
    /// distributions.
    pub fn from_parts(
        trees: Vec<Tree>,
        config: ForestConfig,
        classes: Vec<Label>,
        feature_names: Vec<String>,
    ) -> Result<Self, EbError> {
        if trees.is_empty() {
            return Err(EbError::InvalidForest("no trees".into()));
        }
        if classes.is_empty() {
            return Err(EbError::InvalidForest("no classes".into()));
        }
        for (ti, tree) in trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(EbError::InvalidForest(format!("tree {ti} is empty")));
            }
            for (ni, node) in tree.nodes.iter().enumerate() {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature >= feature_names.len() {
                            return Err(EbError::InvalidForest(format!(
                                "tree {ti} node {ni}: feature {feature} out of range"
                            )));
                        }
                        if !threshold.is_finite() {
                            return Err(EbError::InvalidForest(format!(
                                "tree {ti} node {ni}: non-finite threshold"
                            )));
                        }
                        if *left <= ni || *right <= ni || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                            return Err(EbError::InvalidForest(format!(
                                "tree {ti} node {ni}: bad child reference"
                            )));
                        }
                    }
                    Node::Leaf { distribution } => {
                        let sum: f64 = distribution.iter().sum();
                        if distribution.len() != classes.len()
                            || (sum - 1.0).abs() > 1e-9
                            || distribution.iter().any(|p| *p < 0.0)
                        {
                            return Err(EbError::InvalidForest(format!(
                                "tree {ti} node {ni}: leaf distribution is not a probability vector over {} classes",
                                classes.len()
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            trees,
            config,
            classes,
            feature_names,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Averages the leaf distributions over trees; ties go to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> Result<Prediction, EbError> {
        if row.len() != self.n_features() {
            return Err(EbError::Shape {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let mut dist = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            for (acc, p) in dist.iter_mut().zip(tree.leaf_distribution(row)) {
                *acc += p;
            }
        }
        let n = self.trees.len() as f64;
        dist.iter_mut().for_each(|p| *p /= n);
        let class_index = argmax(&dist);
        Ok(Prediction {
            class: self.classes[class_index],
            class_index,
            distribution: dist,
        })
    }

    pub(crate) fn predict_index_unchecked(&self, row: &[f64]) -> usize {
        let mut dist = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            for (acc, p) in dist.iter_mut().zip(tree.leaf_distribution(row)) {
                *acc += p;
            }
        }
        argmax(&dist)
    }

    pub fn predict_all(&self, fm: &FeatureMatrix) -> Result<Vec<Label>, EbError> {
        self.check_matrix(fm)?;
        Ok(fm
            .rows()
            .iter()
            .map(|r| self.classes[self.predict_index_unchecked(r)])
            .collect())
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn accuracy(&self, fm: &FeatureMatrix) -> Result<f64, EbError> {
        if fm.is_empty() {
            return Err(EbError::InsufficientData("empty evaluation set".into()));
        }
        let pred = self.predict_all(fm)?;
        let hits = pred.iter().zip(fm.labels()).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / fm.n_rows() as f64)
    }

    /// Majority vote of per-sample predictions over a trace; ties go to the
    /// lowest class index.
    pub fn trace_verdict(&self, trace: &Trace) -> Result<Label, EbError> {
        let rows = trace_rows(trace).ok_or(EbError::NoTransition(0))?;
        let mut votes = vec![0usize; self.classes.len()];
        for r in &rows {
            if r.len() != self.n_features() {
                return Err(EbError::Shape {
                    expected: self.n_features(),
                    got: r.len(),
                });
            }
            votes[self.predict_index_unchecked(r)] += 1;
        }
        let best = votes.iter().copied().max().unwrap_or(0);
        let idx = votes.iter().position(|&v| v == best).unwrap_or(0);
        Ok(self.classes[idx])
    }

    pub(crate) fn check_matrix(&self, fm: &FeatureMatrix) -> Result<(), EbError> {
        if fm.n_features() != self.n_features() {
            return Err(EbError::Shape {
                expected: self.n_features(),
                got: fm.n_features(),
            });
        }
        Ok(())
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate().skip(1) {
        if p > v[best] {
            best = i;
        }
    }
    best
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    cfg: &'a ForestConfig,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let n: usize = counts.iter().sum();
        let distribution = counts.iter().map(|&c| c as f64 / n as f64).collect();
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    /// Best threshold on one feature, or `None` if no split leaves at least
    /// `min_leaf` rows on each side.
    fn best_on_feature(&self, idx: &[usize], feature: usize, total: &[usize]) -> Option<(f64, f64)> {
        let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x[i][feature], self.y[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let min_leaf = self.cfg.min_leaf;
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<(f64, f64)> = None;
        for i in 1..n {
            left[pairs[i - 1].1] += 1;
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
            if lo >= hi {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let gl = gini(&left).expect("non-empty left child");
            let gr = gini(&right).expect("non-empty right child");
            let imp = (i as f64 * gl + (n - i) as f64 * gr) / n as f64;
            if best.is_none_or(|(b, _)| imp < b) {
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                best = Some((imp, threshold));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf {
            return self.leaf(&counts);
        }

        let n_features = self.x[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        let mut usable = 0;
        // Keep drawing features until `feature_subsample` of them admit a split.
        for &f in &order {
            if usable >= self.cfg.feature_subsample {
                break;
            }
            if let Some((impurity, threshold)) = self.best_on_feature(&idx, f, &counts) {
                usable += 1;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        let Some(split) = best else {
            return self.leaf(&counts);
        };

        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][split.feature] <= split.threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        if let Node::Split {
            left: ref mut lref,
            right: ref mut rref,
            ..
        } = self.nodes[me]
        {
            *lref = left;
            *rref = right;
        }
        me
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Grows `cfg.n_trees` Gini trees. Each tree draws from its own RNG stream, so
/// the result is independent of thread scheduling.
pub fn train(features: &FeatureMatrix, cfg: &ForestConfig) -> Result<Forest, EbError> {
    cfg.validate(features.n_features())?;
    let classes = features.classes();
    if classes.len() < 2 {
        return Err(EbError::SingleClass);
    }
    if features.n_rows() < 2 * cfg.min_leaf {
        return Err(EbError::InsufficientData(format!(
            "{} rows, need at least {}",
            features.n_rows(),
            2 * cfg.min_leaf
        )));
    }
    let y: Vec<usize> = features
        .labels()
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label in classes"))
        .collect();
    let x = features.rows();
    let n = x.len();

    let trees: Vec<Tree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(cfg.seed, t);
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut g = Grower {
                x,
                y: &y,
                n_classes: classes.len(),
                cfg,
                nodes: Vec::new(),
            };
            g.grow(idx, 0, &mut rng);
            Tree { nodes: g.nodes }
        })
        .collect();

    Forest::from_parts(trees, *cfg, classes, features.columns().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> FeatureMatrix {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..20 {
            rows.push(vec![-1.0 - k as f64 * 0.1]);
            labels.push(Label::Healthy);
            rows.push(vec![1.5 + k as f64 * 0.1]);
            labels.push(Label::R0Down);
        }
        FeatureMatrix::new(vec!["x".into()], rows, labels).unwrap()
    }

    #[test]
    fn separable_toy_set() {
        let cfg = ForestConfig {
            n_trees: 10,
            feature_subsample: 1,
            ..ForestConfig::default()
        };
        let f = train(&toy(), &cfg).unwrap();
        assert_eq!(f.accuracy(&toy()).unwrap(), 1.0);
        assert_eq!(f.predict(&[-10.0]).unwrap().class, Label::Healthy);
        assert_eq!(f.predict(&[10.0]).unwrap().class, Label::R0Down);
    }

    #[test]
    fn single_class_and_too_few_rows() {
        let fm = FeatureMatrix::new(vec!["x".into()], vec![vec![0.0]; 20], vec![Label::Healthy; 20]).unwrap();
        assert_eq!(
            train(
                &fm,
                &ForestConfig {
                    feature_subsample: 1,
                    ..Default::default()
                }
            ),
            Err(EbError::SingleClass)
        );
        let fm = FeatureMatrix::new(
            vec!["x".into()],
            vec![vec![0.0], vec![1.0]],
            vec![Label::Healthy, Label::CapUp],
        )
        .unwrap();
        assert!(matches!(
            train(
                &fm,
                &ForestConfig {
                    feature_subsample: 1,
                    ..Default::default()
                }
            ),
            Err(EbError::InsufficientData(_))
        ));
    }

    #[test]
    fn invalid_config() {
        let bad = [
            ForestConfig {
                n_trees: 0,
                ..Default::default()
            },
            ForestConfig {
                max_depth: 0,
                ..Default::default()
            },
            ForestConfig {
                min_leaf: 0,
                ..Default::default()
            },
            ForestConfig {
                feature_subsample: 2,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(train(&toy(), &cfg), Err(EbError::InvalidConfig(_))));
        }
    }

    #[test]
    fn constant_features_give_majority_stump() {
        let mut labels = vec![Label::Healthy; 12];
        labels.extend(vec![Label::CapUp; 8]);
        let fm = FeatureMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0]; 20], labels).unwrap();
        let f = train(
            &fm,
            &ForestConfig {
                n_trees: 3,
                feature_subsample: 2,
                ..Default::default()
            },
        )
        .unwrap();
        for t in f.trees() {
            assert_eq!(t.nodes.len(), 1);
        }
        let p = f.predict(&[1.0, 2.0]).unwrap();
        assert_eq!(p.class, Label::Healthy);
    }

    fn leaf(d: Vec<f64>) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { distribution: d }],
        }
    }

    #[test]
    fn single_tree_prediction_and_tie_break() {
        let classes = vec![Label::Healthy, Label::R0Down];
        let f = Forest::from_parts(
            vec![leaf(vec![0.2, 0.8])],
            ForestConfig::default(),
            classes.clone(),
            vec!["x".into()],
        )
        .unwrap();
        let p = f.predict(&[0.0]).unwrap();
        assert_eq!(p.class, Label::R0Down);
        assert_eq!(p.class_index, 1);
        assert_eq!(p.distribution, vec![0.2, 0.8]);

        let f = Forest::from_parts(
            vec![leaf(vec![1.0, 0.0]), leaf(vec![0.0, 1.0])],
            ForestConfig::default(),
            classes,
            vec!["x".into()],
        )
        .unwrap();
        assert_eq!(f.predict(&[0.0]).unwrap().class, Label::Healthy);
        assert!(matches!(f.predict(&[0.0, 1.0]), Err(EbError::Shape { .. })));
    }

    #[test]
    fn from_parts_rejects_bad_forests() {
        let classes = vec![Label::Healthy, Label::R0Down];
        assert!(Forest::from_parts(
            vec![leaf(vec![0.5, 0.6])],
            ForestConfig::default(),
            classes.clone(),
            vec!["x".into()]
        )
        .is_err());
        let bad_feature = Tree {
            nodes: vec![
                Node::Split {
                    feature: 3,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    distribution: vec![1.0, 0.0],
                },
                Node::Leaf {
                    distribution: vec![0.0, 1.0],
                },
            ],
        };
        assert!(Forest::from_parts(vec![bad_feature], ForestConfig::default(), classes, vec!["x".into()]).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(
            &toy(),
            &ForestConfig {
                n_trees: 20,
                feature_subsample: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let b = train(
            &toy(),
            &ForestConfig {
                n_trees: 20,
                feature_subsample: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 2,
            min_leaf: 3,
            feature_subsample: 1,
            bootstrap: false,
            seed: 1,
        };
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..60 {
            rows.push(vec![k as f64]);
            labels.push(if (k / 5) % 2 == 0 { Label::Healthy } else { Label::CapUp });
        }
        let fm = FeatureMatrix::new(vec!["x".into()], rows, labels).unwrap();
        let f = train(&fm, &cfg).unwrap();
        for t in f.trees() {
            assert!(t.depth() <= 2);
        }
    }

    fn distinct_rows() -> impl Strategy<Value = FeatureMatrix> {
        (4usize..40, 1usize..4).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(prop::collection::vec(-100i32..100, p), n),
                prop::collection::vec(0usize..3, n),
            )
                .prop_map(move |(vals, labs)| {
                    let mut seen = std::collections::HashSet::new();
                    let mut rows = Vec::new();
                    let mut labels = Vec::new();
                    for (i, (r, l)) in vals.into_iter().zip(labs).enumerate() {
                        if seen.insert(r.clone()) {
                            rows.push(r.into_iter().map(f64::from).collect());
                            // make sure at least two classes appear
                            labels.push(Label::ALL[if i < 2 { i } else { l }]);
                        }
                    }
                    FeatureMatrix::new((0..p).map(|j| format!("x{j}")).collect(), rows, labels).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn unbounded_trees_memorise_distinct_rows(fm in distinct_rows()) {
            prop_assume!(fm.classes().len() >= 2);
            let cfg = ForestConfig {
                n_trees: 3,
                max_depth: usize::MAX,
                min_leaf: 1,
                feature_subsample: 1,
                bootstrap: false,
                seed: 9,
            };
            let f = train(&fm, &cfg).unwrap();
            prop_assert_eq!(f.accuracy(&fm).unwrap(), 1.0);
        }

        #[test]
        fn argmax_is_scale_invariant(
            leaves in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..6),
            scale in 0.01f64..100.0,
        ) {
            let trees: Vec<Tree> = leaves
                .iter()
                .map(|l| {
                    let s: f64 = l.iter().sum();
                    leaf(l.iter().map(|v| v / s).collect())
                })
                .collect();
            let f = Forest::from_parts(trees.clone(), ForestConfig::default(), Label::ALL.to_vec(), vec!["x".into()]).unwrap();
            let mut sum = vec![0.0; 3];
            for t in &trees {
                for (a, p) in sum.iter_mut().zip(t.leaf_distribution(&[0.0])) {
                    *a += p * scale;
                }
            }
            prop_assert_eq!(f.predict(&[0.0]).unwrap().class_index, argmax(&sum));
        }
    }
}
