use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fsm::{FaultSignatureMatrix, FsmKind};
use crate::model::{Label, Trace};

use super::features::{build_features, FeatureMatrix, FEATURE_NAMES};
use super::forest::{train, Forest, ForestConfig};
use super::EbError;

/// Share of each class assigned to the training side of a stratified split.
pub const TRAIN_FRACTION: f64 = 0.7;
/// Permutations per feature when building an EB_FSM.
pub const DEFAULT_IMPORTANCE_REPEATS: usize = 10;

/// Mean drop in held-out accuracy after permuting each column, clamped at 0.
/// Results are in column order.
pub fn permutation_importance(
    forest: &Forest,
    features: &FeatureMatrix,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<(String, f64)>, EbError> {
    if features.is_empty() {
        return Err(EbError::InsufficientData("empty held-out set".into()));
    }
    if n_repeats == 0 {
        return Err(EbError::InvalidConfig("n_repeats must be >= 1".into()));
    }
    forest.check_matrix(features)?;
    let class_of = |l: &Label| forest.classes().iter().position(|c| c == l);
    let truth: Vec<Option<usize>> = features.labels().iter().map(class_of).collect();
    let rows = features.rows();
    let n = rows.len() as f64;
    let accuracy = |pred: &dyn Fn(usize) -> usize| {
        truth.iter().enumerate().filter(|(i, t)| **t == Some(pred(*i))).count() as f64 / n
    };
    let baseline = accuracy(&|i| forest.predict_index_unchecked(&rows[i]));

    let mut out = Vec::with_capacity(features.n_features());
    for (j, name) in features.columns().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let original = features.column(j);
        let mut total = 0.0;
        for _ in 0..n_repeats {
            let mut shuffled = original.clone();
            shuffled.shuffle(&mut rng);
            let acc = accuracy(&|i| {
                let mut row = rows[i].clone();
                row[j] = shuffled[i];
                forest.predict_index_unchecked(&row)
            });
            total += baseline - acc;
        }
        out.push((name.clone(), (total / n_repeats as f64).max(0.0)));
    }
    Ok(out)
}

/// Splits rows per class into `TRAIN_FRACTION` train and the rest held out.
pub fn stratified_split(features: &FeatureMatrix, seed: u64) -> (FeatureMatrix, FeatureMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut held_idx = Vec::new();
    for class in features.classes() {
        let mut idx: Vec<usize> = (0..features.n_rows())
            .filter(|&i| features.labels()[i] == class)
            .collect();
        idx.shuffle(&mut rng);
        let cut = (idx.len() as f64 * TRAIN_FRACTION).round() as usize;
        train_idx.extend_from_slice(&idx[..cut]);
        held_idx.extend_from_slice(&idx[cut..]);
    }
    train_idx.sort_unstable();
    held_idx.sort_unstable();
    (features.subset(&train_idx), features.subset(&held_idx))
}

/// Per-row artefacts of an EB_FSM build.
#[derive(Debug, Clone)]
pub struct EbFsmDetail {
    pub fsm: FaultSignatureMatrix,
    /// Binary fault-vs-Healthy forest behind each row, in row order.
    pub forests: Vec<Forest>,
    /// Held-out accuracy of each forest.
    pub held_out_accuracy: Vec<f64>,
}

/// EB_FSM with one row per fault class present, each the permutation
/// importances of a binary fault-vs-Healthy forest.
pub fn build_eb_fsm(traces: &[Trace], cfg: &ForestConfig) -> Result<FaultSignatureMatrix, EbError> {
    build_eb_fsm_detailed(traces, cfg).map(|d| d.fsm)
}

pub fn build_eb_fsm_detailed(traces: &[Trace], cfg: &ForestConfig) -> Result<EbFsmDetail, EbError> {
    let fm = build_features(traces)?;
    let classes = fm.classes();
    if !classes.contains(&Label::Healthy) {
        return Err(EbError::MissingBaseline);
    }
    let faults: Vec<Label> = classes.into_iter().filter(|c| *c != Label::Healthy).collect();
    if faults.is_empty() {
        return Err(EbError::SingleClass);
    }
    let mut rows = Vec::new();
    let mut forests = Vec::new();
    let mut accs = Vec::new();
    for fault in &faults {
        let pair = fm.filter_labels(&[Label::Healthy, *fault]);
        let (train_set, held) = stratified_split(&pair, cfg.seed);
        let forest = train(&train_set, cfg)?;
        let imp = permutation_importance(&forest, &held, DEFAULT_IMPORTANCE_REPEATS, cfg.seed)?;
        accs.push(forest.accuracy(&held)?);
        rows.push(imp.into_iter().map(|(_, v)| v).collect());
        forests.push(forest);
    }
    let fsm = FaultSignatureMatrix::new(
        faults.iter().map(|f| f.to_string()).collect(),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
        FsmKind::ExperienceBased,
    )
    .map_err(|e| EbError::InvalidMatrix(e.to_string()))?;
    Ok(EbFsmDetail {
        fsm,
        forests,
        held_out_accuracy: accs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn informative_and_noise(seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..400 {
            let y = rng.random_bool(0.5);
            rows.push(vec![if y { 1.0 } else { 0.0 }, rng.random::<f64>(), 3.0]);
            labels.push(if y { Label::R0Down } else { Label::Healthy });
        }
        FeatureMatrix::new(vec!["signal".into(), "noise".into(), "const".into()], rows, labels).unwrap()
    }

    #[test]
    fn importance_of_signal_noise_and_constant() {
        let fm = informative_and_noise(1);
        let (tr, held) = stratified_split(&fm, 2);
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: 1,
            min_leaf: 1,
            feature_subsample: 3,
            bootstrap: false,
            seed: 3,
        };
        let f = train(&tr, &cfg).unwrap();
        let imp = permutation_importance(&f, &held, 20, 4).unwrap();
        assert_eq!(imp[0].0, "signal");
        // baseline 1.0, chance 0.5
        assert!((imp[0].1 - 0.5).abs() < 0.1, "{imp:?}");
        assert!(imp[1].1 < 0.01, "{imp:?}");
        assert_eq!(imp[2].1, 0.0);
    }

    #[test]
    fn importance_is_deterministic_and_validates() {
        let fm = informative_and_noise(5);
        let (tr, held) = stratified_split(&fm, 6);
        let f = train(
            &tr,
            &ForestConfig {
                n_trees: 10,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        assert_eq!(
            permutation_importance(&f, &held, 5, 7).unwrap(),
            permutation_importance(&f, &held, 5, 7).unwrap()
        );
        assert!(permutation_importance(&f, &held.subset(&[]), 5, 7).is_err());
        assert!(permutation_importance(&f, &held, 0, 7).is_err());
    }

    #[test]
    fn stratified_split_keeps_proportions() {
        let fm = informative_and_noise(8);
        let (tr, held) = stratified_split(&fm, 9);
        assert_eq!(tr.n_rows() + held.n_rows(), fm.n_rows());
        for class in fm.classes() {
            let total = fm.labels().iter().filter(|l| **l == class).count();
            let t = tr.labels().iter().filter(|l| **l == class).count();
            assert_eq!(t, (total as f64 * TRAIN_FRACTION).round() as usize);
        }
    }

    #[test]
    fn eb_fsm_needs_baseline() {
        use crate::model::{CircuitParams, FaultSpec, SwitchSchedule};
        use crate::sim::{simulate, SimConfig};
        let tr = simulate(
            &CircuitParams::nominal(),
            &SwitchSchedule::default(),
            Some(&FaultSpec::r0_down()),
            None,
            &SimConfig::default(),
        )
        .unwrap()
        .with_label(Label::R0Down);
        assert!(matches!(
            build_eb_fsm(&[tr], &ForestConfig::default()),
            Err(EbError::MissingBaseline)
        ));
    }
}
