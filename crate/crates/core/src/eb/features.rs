use crate::model::{Label, Trace};

use super::EbError;

/// Column order of the case-study feature matrix. `T` is the time since the
/// most recent switch transition.
pub const FEATURE_NAMES: [&str; 5] = ["V0", "V1", "V2", "T", "S1"];

/// Rows of features with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Label>,
    /// Index of the trace each row came from.
    groups: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, EbError> {
        let groups = vec![0; rows.len()];
        Self::with_groups(columns, rows, labels, groups)
    }

    pub fn with_groups(
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
        groups: Vec<usize>,
    ) -> Result<Self, EbError> {
        if rows.len() != labels.len() || rows.len() != groups.len() {
            return Err(EbError::InvalidMatrix(format!(
                "{} rows, {} labels, {} group ids",
                rows.len(),
                labels.len(),
                groups.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(EbError::InvalidMatrix(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    columns.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(EbError::InvalidMatrix(format!("row {i} has a missing value")));
            }
        }
        Ok(Self {
            columns,
            rows,
            labels,
            groups,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Distinct labels present, in `Label` order.
    pub fn classes(&self) -> Vec<Label> {
        let mut c: Vec<Label> = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    /// Rows whose label is in `keep`.
    pub fn filter_labels(&self, keep: &[Label]) -> Self {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep.contains(&self.labels[i])).collect();
        self.subset(&idx)
    }
}

/// Feature rows of one trace, starting at its first switch transition.
///
/// Returns `None` when the trace has no transition.
pub fn trace_rows(trace: &Trace) -> Option<Vec<Vec<f64>>> {
    let transitions = trace.transition_indices();
    let first = *transitions.first()?;
    let samples = trace.samples();
    let mut anchor_t = samples[first].t;
    let mut rows = Vec::with_capacity(samples.len() - first);
    for (i, s) in samples.iter().enumerate().skip(first) {
        if i > first && s.s1 != samples[i - 1].s1 {
            anchor_t = s.t;
        }
        rows.push(vec![s.v0, s.v1, s.v2, s.t - anchor_t, f64::from(s.s1)]);
    }
    Some(rows)
}

/// Builds the case-study feature matrix from labeled traces.
pub fn build_features(traces: &[Trace]) -> Result<FeatureMatrix, EbError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (i, tr) in traces.iter().enumerate() {
        let label = tr.label.ok_or(EbError::MissingLabel(i))?;
        let r = trace_rows(tr).ok_or(EbError::NoTransition(i))?;
        labels.extend(std::iter::repeat_n(label, r.len()));
        groups.extend(std::iter::repeat_n(i, r.len()));
        rows.extend(r);
    }
    FeatureMatrix::with_groups(
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
        labels,
        groups,
    )
}

/// Gini impurity `1 - Σ p_i²` of a node with the given class counts.
pub fn gini(class_counts: &[usize]) -> Result<f64, EbError> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(EbError::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CircuitParams, FaultSpec, Sample, SwitchSchedule};
    use crate::sim::{simulate, SimConfig};

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[10, 10]).unwrap(), 0.5);
        assert_eq!(gini(&[10, 0]).unwrap(), 0.0);
        assert!((gini(&[3, 3, 4]).unwrap() - 0.66).abs() < 1e-12);
        assert_eq!(gini(&[0, 0]), Err(EbError::EmptyNode));
    }

    fn trace(fault: Option<FaultSpec>, label: Label) -> Trace {
        simulate(
            &CircuitParams::nominal(),
            &SwitchSchedule::default(),
            fault.as_ref(),
            None,
            &SimConfig::default(),
        )
        .unwrap()
        .with_label(label)
    }

    #[test]
    fn three_class_matrix() {
        let traces = [
            trace(None, Label::Healthy),
            trace(Some(FaultSpec::r0_down()), Label::R0Down),
            trace(Some(FaultSpec::cap_up()), Label::CapUp),
        ];
        let fm = build_features(&traces).unwrap();
        assert_eq!(fm.n_features(), 5);
        assert_eq!(fm.classes(), Label::ALL.to_vec());
        // 401 samples, first transition at index 100
        assert_eq!(fm.n_rows(), 3 * 301);
        assert_eq!(fm.groups()[301], 1);
        // the first row of each trace sits at a transition instant
        assert_eq!(fm.rows()[0][3], 0.0);
        assert_eq!(fm.rows()[0][4], 0.0);
        // 20 s: second transition, T resets
        assert_eq!(fm.rows()[100][3], 0.0);
        assert!((fm.rows()[99][3] - 9.9).abs() < 1e-9);
    }

    #[test]
    fn single_class_matrix() {
        let fm = build_features(&[trace(None, Label::Healthy)]).unwrap();
        assert_eq!(fm.classes(), vec![Label::Healthy]);
    }

    #[test]
    fn errors() {
        let unlabeled = simulate(
            &CircuitParams::nominal(),
            &SwitchSchedule::default(),
            None,
            None,
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(build_features(&[unlabeled]), Err(EbError::MissingLabel(0)));
        let flat: Vec<Sample> = (0..10)
            .map(|k| Sample {
                t: k as f64,
                v0: 5.0,
                v1: 5.0,
                v2: 5.0,
                s1: 1,
            })
            .collect();
        let flat = Trace::new(flat, Some(Label::Healthy)).unwrap();
        assert_eq!(build_features(&[flat]), Err(EbError::NoTransition(0)));
        assert!(FeatureMatrix::new(vec!["a".into()], vec![vec![f64::NAN]], vec![Label::Healthy]).is_err());
        assert!(FeatureMatrix::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec![Label::Healthy]).is_err());
    }
}
