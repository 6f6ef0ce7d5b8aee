//! Fault signature matrices: rows are faults, columns are features (or ARRs),
//! fields relate the two.
//!
//! The text layout is tab-separated. The header row starts with an empty cell
//! followed by the feature names; every other row starts with the fault name.
//! Lines beginning with `#` are comments, except `# kind: <kind>` which records
//! the matrix kind.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("unknown fault `{0}`")]
    UnknownFault(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("field ({row}, {col}) is {value}; fields must be finite and >= 0")]
    NegativeField { row: usize, col: usize, value: f64 },
    #[error("matrix is not binary")]
    NotBinary,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmKind {
    ModelBased,
    ExperienceBased,
}

impl FsmKind {
    fn as_str(&self) -> &'static str {
        match self {
            FsmKind::ModelBased => "model-based",
            FsmKind::ExperienceBased => "experience-based",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSignatureMatrix {
    faults: Vec<String>,
    features: Vec<String>,
    fields: Vec<Vec<f64>>,
    kind: FsmKind,
}

/// Outcome of matching an activation vector against the signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Isolation {
    /// The activation vector is all zeros.
    NoFault,
    /// One or more faults share exactly this signature.
    Isolated(Vec<String>),
    /// No signature matches. `nearest` lists the Hamming-nearest faults, for
    /// diagnostics only.
    Unknown { nearest: Vec<String> },
}

impl Isolation {
    /// Faults whose signature equals the activation vector.
    pub fn candidates(&self) -> &[String] {
        match self {
            Isolation::Isolated(v) => v,
            _ => &[],
        }
    }
}

impl fmt::Display for Isolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Isolation::NoFault => f.write_str("no fault detected"),
            Isolation::Isolated(v) => write!(f, "isolated: {}", v.join(" | ")),
            Isolation::Unknown { nearest } => {
                write!(f, "unknown fault (nearest: {})", nearest.join(" | "))
            }
        }
    }
}

impl FaultSignatureMatrix {
    pub fn new(
        faults: Vec<String>,
        features: Vec<String>,
        fields: Vec<Vec<f64>>,
        kind: FsmKind,
    ) -> Result<Self, FsmError> {
        if fields.len() != faults.len() {
            return Err(FsmError::Shape {
                expected: faults.len(),
                got: fields.len(),
            });
        }
        for (r, row) in fields.iter().enumerate() {
            if row.len() != features.len() {
                return Err(FsmError::Shape {
                    expected: features.len(),
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(FsmError::NegativeField {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            faults,
            features,
            fields,
            kind,
        })
    }

    pub fn faults(&self) -> &[String] {
        &self.faults
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn kind(&self) -> FsmKind {
        self.kind
    }

    pub fn row(&self, fault: &str) -> Result<&[f64], FsmError> {
        self.fault_index(fault).map(|i| self.fields[i].as_slice())
    }

    pub fn field(&self, fault: &str, feature: &str) -> Option<f64> {
        let r = self.faults.iter().position(|f| f == fault)?;
        let c = self.features.iter().position(|f| f == feature)?;
        Some(self.fields[r][c])
    }

    fn fault_index(&self, fault: &str) -> Result<usize, FsmError> {
        self.faults
            .iter()
            .position(|f| f == fault)
            .ok_or_else(|| FsmError::UnknownFault(fault.to_string()))
    }

    pub fn is_binary(&self) -> bool {
        self.fields.iter().flatten().all(|&v| v == 0.0 || v == 1.0)
    }

    fn require_binary(&self) -> Result<(), FsmError> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(FsmError::NotBinary)
        }
    }

    /// 1 where the score is strictly above `threshold`, else 0.
    pub fn binarize(&self, threshold: f64) -> Self {
        Self {
            faults: self.faults.clone(),
            features: self.features.clone(),
            fields: self
                .fields
                .iter()
                .map(|row| row.iter().map(|&v| if v > threshold { 1.0 } else { 0.0 }).collect())
                .collect(),
            kind: self.kind,
        }
    }

    /// A fault is detectable when at least one feature responds to it.
    pub fn detectable(&self, fault: &str) -> Result<bool, FsmError> {
        self.require_binary()?;
        let i = self.fault_index(fault)?;
        Ok(self.fields[i].contains(&1.0))
    }

    /// A fault is isolable when it is detectable and no other fault shares its signature.
    pub fn isolable(&self, fault: &str) -> Result<bool, FsmError> {
        if !self.detectable(fault)? {
            return Ok(false);
        }
        let i = self.fault_index(fault)?;
        let row = &self.fields[i];
        Ok(self.fields.iter().enumerate().all(|(j, other)| j == i || other != row))
    }

    /// Exact-match isolation of an activation vector.
    pub fn isolate(&self, activation: &[bool]) -> Result<Isolation, FsmError> {
        self.require_binary()?;
        if activation.len() != self.features.len() {
            return Err(FsmError::Shape {
                expected: self.features.len(),
                got: activation.len(),
            });
        }
        if activation.iter().all(|a| !a) {
            return Ok(Isolation::NoFault);
        }
        let distance = |row: &[f64]| row.iter().zip(activation).filter(|(&v, &a)| (v == 1.0) != a).count();
        let dists: Vec<usize> = self.fields.iter().map(|r| distance(r)).collect();
        let exact: Vec<String> = self
            .faults
            .iter()
            .zip(&dists)
            .filter(|(_, &d)| d == 0)
            .map(|(f, _)| f.clone())
            .collect();
        if !exact.is_empty() {
            return Ok(Isolation::Isolated(exact));
        }
        let best = dists.iter().copied().min();
        let nearest = match best {
            Some(b) => self
                .faults
                .iter()
                .zip(&dists)
                .filter(|(_, &d)| d == b)
                .map(|(f, _)| f.clone())
                .collect(),
            None => Vec::new(),
        };
        Ok(Isolation::Unknown { nearest })
    }

    /// Renders the table with `precision` decimals; binary matrices print as 0/1.
    pub fn to_table(&self, precision: usize) -> String {
        let binary = self.is_binary();
        let mut out = String::new();
        out.push_str(&format!("# kind: {}\n", self.kind.as_str()));
        for f in &self.features {
            out.push('\t');
            out.push_str(f);
        }
        out.push('\n');
        for (name, row) in self.faults.iter().zip(&self.fields) {
            out.push_str(name);
            for &v in row {
                out.push('\t');
                if binary {
                    out.push_str(if v == 1.0 { "1" } else { "0" });
                } else {
                    out.push_str(&format!("{v:.precision$}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the tab-separated layout written by [`Self::to_table`].
    pub fn parse(text: &str) -> Result<Self, FsmError> {
        let mut kind = None;
        let mut header: Option<Vec<String>> = None;
        let mut faults = Vec::new();
        let mut fields = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some(k) = comment.trim().strip_prefix("kind:") {
                    kind = Some(match k.trim() {
                        "model-based" => FsmKind::ModelBased,
                        "experience-based" => FsmKind::ExperienceBased,
                        other => {
                            return Err(FsmError::Parse {
                                line: line_no,
                                msg: format!("unknown kind `{other}`"),
                            })
                        }
                    });
                }
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            match &header {
                None => {
                    if !cells[0].trim().is_empty() {
                        return Err(FsmError::Parse {
                            line: line_no,
                            msg: "header must start with an empty cell".into(),
                        });
                    }
                    let names: Vec<String> = cells[1..].iter().map(|c| c.trim().to_string()).collect();
                    if names.iter().any(|n| n.is_empty()) {
                        return Err(FsmError::Parse {
                            line: line_no,
                            msg: "empty feature name".into(),
                        });
                    }
                    header = Some(names);
                }
                Some(h) => {
                    if cells.len() != h.len() + 1 {
                        return Err(FsmError::Parse {
                            line: line_no,
                            msg: format!("expected {} cells, got {}", h.len() + 1, cells.len()),
                        });
                    }
                    let name = cells[0].trim();
                    if name.is_empty() {
                        return Err(FsmError::Parse {
                            line: line_no,
                            msg: "empty fault name".into(),
                        });
                    }
                    let row = cells[1..]
                        .iter()
                        .map(|c| {
                            // accept comma decimals as printed in spreadsheets
                            c.trim().replace(',', ".").parse::<f64>().map_err(|e| FsmError::Parse {
                                line: line_no,
                                msg: format!("`{c}`: {e}"),
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    faults.push(name.to_string());
                    fields.push(row);
                }
            }
        }
        let features = header.ok_or(FsmError::Parse {
            line: 0,
            msg: "no header row".into(),
        })?;
        if faults.is_empty() {
            return Err(FsmError::Parse {
                line: 0,
                msg: "no fault rows".into(),
            });
        }
        Self::new(faults, features, fields, kind.unwrap_or(FsmKind::ModelBased))
    }
}

impl fmt::Display for FaultSignatureMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn table1() -> FaultSignatureMatrix {
        FaultSignatureMatrix::new(
            names("Fault_", 4),
            names("F_", 3),
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 1.0],
                vec![0.0, 1.0, 1.0],
                vec![0.0, 0.0, 1.0],
            ],
            FsmKind::ModelBased,
        )
        .unwrap()
    }

    fn table4() -> FaultSignatureMatrix {
        FaultSignatureMatrix::new(
            vec!["Drift in R0".into(), "Drift in C".into()],
            vec!["ARR_1".into(), "ARR_2".into()],
            vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            FsmKind::ModelBased,
        )
        .unwrap()
    }

    #[test]
    fn binarize_table2_row() {
        let m = FaultSignatureMatrix::new(
            vec!["R0".into()],
            names("F", 5),
            vec![vec![0.00, 0.30, 0.06, 0.04, 0.00]],
            FsmKind::ExperienceBased,
        )
        .unwrap();
        let b = m.binarize(0.05);
        assert_eq!(b.fields()[0], vec![0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(b.kind(), FsmKind::ExperienceBased);
    }

    #[test]
    fn binarize_zero_and_binary() {
        let z = FaultSignatureMatrix::new(names("f", 2), names("x", 2), vec![vec![0.0; 2]; 2], FsmKind::ModelBased)
            .unwrap();
        assert_eq!(z.binarize(0.0), z);
        assert_eq!(table1().binarize(0.5), table1());
    }

    #[test]
    fn detectability_and_isolability_of_table1() {
        let m = table1();
        let expect = [(true, true), (true, false), (true, false), (true, true)];
        for (i, (d, iso)) in expect.iter().enumerate() {
            let f = format!("Fault_{i}");
            assert_eq!(m.detectable(&f).unwrap(), *d, "{f}");
            assert_eq!(m.isolable(&f).unwrap(), *iso, "{f}");
        }
        assert_eq!(m.detectable("nope"), Err(FsmError::UnknownFault("nope".into())));
        assert!(m.isolable("nope").is_err());
    }

    #[test]
    fn zero_row_not_detectable_and_single_row_isolable() {
        let m = FaultSignatureMatrix::new(
            vec!["a".into(), "b".into()],
            names("x", 2),
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            FsmKind::ModelBased,
        )
        .unwrap();
        assert!(!m.detectable("a").unwrap());
        assert!(!m.isolable("a").unwrap());
        let single = FaultSignatureMatrix::new(
            vec!["a".into()],
            names("x", 2),
            vec![vec![0.0, 1.0]],
            FsmKind::ModelBased,
        )
        .unwrap();
        assert!(single.isolable("a").unwrap());
    }

    #[test]
    fn isolate_examples() {
        let m = table4();
        assert_eq!(
            m.isolate(&[true, true]).unwrap(),
            Isolation::Isolated(vec!["Drift in R0".into()])
        );
        assert_eq!(
            m.isolate(&[false, true]).unwrap(),
            Isolation::Isolated(vec!["Drift in C".into()])
        );
        assert_eq!(m.isolate(&[false, false]).unwrap(), Isolation::NoFault);
        assert_eq!(
            m.isolate(&[true, false]).unwrap(),
            Isolation::Unknown {
                nearest: vec!["Drift in R0".into()]
            }
        );
        assert!(matches!(m.isolate(&[true]), Err(FsmError::Shape { .. })));

        let t1 = table1();
        assert_eq!(
            t1.isolate(&[false, true, true]).unwrap().candidates(),
            &["Fault_1".to_string(), "Fault_2".to_string()]
        );
    }

    #[test]
    fn structural_queries_need_binary() {
        let m = FaultSignatureMatrix::new(
            vec!["a".into()],
            names("x", 1),
            vec![vec![0.3]],
            FsmKind::ExperienceBased,
        )
        .unwrap();
        assert_eq!(m.detectable("a"), Err(FsmError::NotBinary));
    }

    #[test]
    fn construction_rejects_bad_fields() {
        assert!(
            FaultSignatureMatrix::new(vec!["a".into()], names("x", 2), vec![vec![1.0]], FsmKind::ModelBased).is_err()
        );
        assert!(
            FaultSignatureMatrix::new(vec!["a".into()], names("x", 1), vec![vec![-0.1]], FsmKind::ModelBased).is_err()
        );
    }

    #[test]
    fn table_text_round_trip() {
        let m = table1();
        let text = m.to_table(2);
        assert!(text.contains("\tF_0\tF_1\tF_2\n"));
        assert!(text.contains("Fault_1\t0\t1\t1\n"));
        assert_eq!(FaultSignatureMatrix::parse(&text).unwrap(), m);
    }

    #[test]
    fn parse_comma_decimals_and_errors() {
        let text = "# kind: experience-based\n\tV_0\tV_1\nR0\t0,00\t0,30\n";
        let m = FaultSignatureMatrix::parse(text).unwrap();
        assert_eq!(m.kind(), FsmKind::ExperienceBased);
        assert_eq!(m.fields()[0], vec![0.0, 0.30]);
        assert!(FaultSignatureMatrix::parse("").is_err());
        assert!(FaultSignatureMatrix::parse("\tA\n").is_err());
        assert!(FaultSignatureMatrix::parse("\tA\nf\t1\t2\n").is_err());
        assert!(FaultSignatureMatrix::parse("\tA\nf\tx\n").is_err());
    }

    fn binary_matrix() -> impl Strategy<Value = FaultSignatureMatrix> {
        (1usize..6, 1usize..5).prop_flat_map(|(r, c)| {
            prop::collection::vec(prop::collection::vec(prop::bool::ANY, c), r).prop_map(move |rows| {
                FaultSignatureMatrix::new(
                    names("f", r),
                    names("x", c),
                    rows.into_iter()
                        .map(|row| row.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
                        .collect(),
                    FsmKind::ModelBased,
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn isolable_implies_detectable(m in binary_matrix()) {
            for f in m.faults() {
                if m.isolable(f).unwrap() {
                    prop_assert!(m.detectable(f).unwrap());
                }
            }
        }

        #[test]
        fn isolating_a_row_finds_it(m in binary_matrix()) {
            for (f, row) in m.faults().iter().zip(m.fields()) {
                let act: Vec<bool> = row.iter().map(|&v| v == 1.0).collect();
                match m.isolate(&act).unwrap() {
                    Isolation::NoFault => prop_assert!(act.iter().all(|a| !a)),
                    Isolation::Isolated(c) => prop_assert!(c.contains(f)),
                    Isolation::Unknown { .. } => prop_assert!(false, "row must match itself"),
                }
            }
        }

        #[test]
        fn binarize_is_monotone(
            scores in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..5),
            lo in 0.0f64..1.0,
            delta in 0.0f64..1.0,
        ) {
            let n = scores.len();
            let m = FaultSignatureMatrix::new(names("f", n), names("x", 3), scores, FsmKind::ExperienceBased).unwrap();
            let a = m.binarize(lo);
            let b = m.binarize(lo + delta);
            for (ra, rb) in a.fields().iter().zip(b.fields()) {
                for (&x, &y) in ra.iter().zip(rb) {
                    prop_assert!(y <= x);
                }
            }
        }
    }
}
