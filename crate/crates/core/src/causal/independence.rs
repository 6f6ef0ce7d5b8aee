use std::collections::BTreeMap;
use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::eb::FeatureMatrix;
use crate::model::Label;

use super::CausalError;

pub const DEFAULT_BINS: usize = 5;
pub const MIN_STRATUM_ROWS: usize = 20;

/// A variable of a labeled feature matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variable {
    Column(String),
    /// The full class label.
    Label,
    /// Indicator of one class.
    LabelIs(Label),
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Column(c) => f.write_str(c),
            Variable::Label => f.write_str("label"),
            Variable::LabelIs(l) => write!(f, "label={l}"),
        }
    }
}

/// `x ⟂ y | z` over data variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub x: Variable,
    pub y: Variable,
    pub z: Vec<Variable>,
}

impl Statement {
    pub fn marginal(x: Variable, y: Variable) -> Self {
        Self { x, y, z: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Violated => "violated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub verdict: Verdict,
    pub g_statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub strata: usize,
}

/// G-test settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependenceTest {
    pub alpha: f64,
    pub bins: usize,
    pub min_stratum_rows: usize,
}

impl Default for IndependenceTest {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            bins: DEFAULT_BINS,
            min_stratum_rows: MIN_STRATUM_ROWS,
        }
    }
}

/// Conditional G-test of `x ⟂ y | z`. Continuous columns are cut into
/// quantile bins; columns with at most `bins` distinct values are used as is.
pub fn check_independence(
    data: &FeatureMatrix,
    statement: &Statement,
    test: &IndependenceTest,
) -> Result<TestResult, CausalError> {
    if !(test.alpha > 0.0 && test.alpha < 1.0) {
        return Err(CausalError::InvalidArgument(format!(
            "alpha must be in (0,1), got {}",
            test.alpha
        )));
    }
    if test.bins < 2 {
        return Err(CausalError::InvalidArgument("bins must be >= 2".into()));
    }
    let x = codes(data, &statement.x, test.bins)?;
    let y = codes(data, &statement.y, test.bins)?;
    let z = statement
        .z
        .iter()
        .map(|v| codes(data, v, test.bins))
        .collect::<Result<Vec<_>, _>>()?;

    let mut strata: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..data.n_rows() {
        strata.entry(z.iter().map(|c| c[i]).collect()).or_default().push(i);
    }
    let mut g = 0.0;
    let mut dof = 0;
    for (key, rows) in &strata {
        if rows.len() < test.min_stratum_rows {
            return Err(CausalError::InsufficientData(format!(
                "stratum {key:?} has {} rows, need {}",
                rows.len(),
                test.min_stratum_rows
            )));
        }
        let (gs, d) = g_statistic(rows.iter().map(|&i| (x[i], y[i])));
        g += gs;
        dof += d;
    }
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive degrees of freedom").sf(g)
    };
    Ok(TestResult {
        verdict: if p_value < test.alpha {
            Verdict::Violated
        } else {
            Verdict::Consistent
        },
        g_statistic: g,
        dof,
        p_value,
        strata: strata.len(),
    })
}

fn codes(data: &FeatureMatrix, var: &Variable, bins: usize) -> Result<Vec<usize>, CausalError> {
    match var {
        Variable::Label => Ok(data
            .labels()
            .iter()
            .map(|l| Label::ALL.iter().position(|a| a == l).expect("label in ALL"))
            .collect()),
        Variable::LabelIs(target) => Ok(data.labels().iter().map(|l| usize::from(l == target)).collect()),
        Variable::Column(name) => {
            let j = data
                .column_index(name)
                .ok_or_else(|| CausalError::UnknownVariable(name.clone()))?;
            Ok(discretize(&data.column(j), bins))
        }
    }
}

/// Quantile-bin codes; at most `bins` distinct values are coded directly.
pub(crate) fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let cuts: Vec<f64> = if distinct.len() <= bins {
        distinct.into_iter().skip(1).collect()
    } else {
        let n = sorted.len();
        let mut c: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).collect();
        c.dedup();
        c
    };
    values.iter().map(|v| cuts.partition_point(|c| c <= v)).collect()
}

/// G statistic and degrees of freedom of one contingency table, counting
/// only occupied rows and columns.
fn g_statistic(pairs: impl Iterator<Item = (usize, usize)>) -> (f64, usize) {
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    let mut n = 0.0;
    for (a, b) in pairs {
        *table.entry((a, b)).or_default() += 1.0;
        *rows.entry(a).or_default() += 1.0;
        *cols.entry(b).or_default() += 1.0;
        n += 1.0;
    }
    let g = 2.0
        * table
            .iter()
            .map(|(&(a, b), &o)| o * (o * n / (rows[&a] * cols[&b])).ln())
            .sum::<f64>();
    let dof = (rows.len() - 1) * (cols.len() - 1);
    (g.max(0.0), dof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(cols: &[&str], rows: Vec<Vec<f64>>, labels: Vec<Label>) -> FeatureMatrix {
        FeatureMatrix::new(cols.iter().map(|s| s.to_string()).collect(), rows, labels).unwrap()
    }

    #[test]
    fn discretize_quantiles_and_categories() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let c = discretize(&v, 5);
        for b in 0..5 {
            assert_eq!(c.iter().filter(|&&x| x == b).count(), 20);
        }
        assert_eq!(discretize(&[1.0, 0.0, 1.0, 0.0], 5), vec![1, 0, 1, 0]);
        assert_eq!(discretize(&[2.0; 10], 5), vec![0; 10]);
    }

    #[test]
    fn g_statistic_against_hand_computation() {
        // 2x2 table [[30,10],[10,30]]: every cell has E = 20.
        let mut pairs = Vec::new();
        for (a, b, k) in [(0, 0, 30), (0, 1, 10), (1, 0, 10), (1, 1, 30)] {
            pairs.extend(std::iter::repeat_n((a, b), k));
        }
        let (g, dof) = g_statistic(pairs.into_iter());
        let expect = 2.0 * (60.0 * (1.5f64).ln() + 20.0 * (0.5f64).ln());
        assert!((g - expect).abs() < 1e-9);
        assert_eq!(dof, 1);
    }

    #[test]
    fn dependent_columns_are_violated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let a: f64 = rng.random();
                vec![a, a + 0.1 * rng.random::<f64>()]
            })
            .collect();
        let fm = matrix(&["a", "b"], rows, vec![Label::Healthy; 500]);
        let r = check_independence(
            &fm,
            &Statement::marginal(Variable::Column("a".into()), Variable::Column("b".into())),
            &IndependenceTest::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.dof, 16);
    }

    #[test]
    fn conditioning_on_common_cause_removes_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let h = f64::from(rng.random_range(0..2u8));
                vec![h, h + rng.random::<f64>(), h + rng.random::<f64>()]
            })
            .collect();
        let fm = matrix(&["h", "a", "b"], rows, vec![Label::Healthy; 2000]);
        let a = Variable::Column("a".into());
        let b = Variable::Column("b".into());
        let t = IndependenceTest::default();
        let marginal = check_independence(&fm, &Statement::marginal(a.clone(), b.clone()), &t).unwrap();
        assert_eq!(marginal.verdict, Verdict::Violated);
        let given = Statement {
            x: a,
            y: b,
            z: vec![Variable::Column("h".into())],
        };
        let cond = check_independence(&fm, &given, &t).unwrap();
        assert_eq!(cond.strata, 2);
        assert!(cond.p_value > 0.001, "{cond:?}");
    }

    #[test]
    fn errors() {
        let fm = matrix(&["a"], vec![vec![0.0]; 10], vec![Label::Healthy; 10]);
        let s = Statement::marginal(Variable::Column("a".into()), Variable::Label);
        assert!(matches!(
            check_independence(&fm, &s, &IndependenceTest::default()),
            Err(CausalError::InsufficientData(_))
        ));
        let s = Statement::marginal(Variable::Column("q".into()), Variable::Label);
        assert!(matches!(
            check_independence(&fm, &s, &IndependenceTest::default()),
            Err(CausalError::UnknownVariable(_))
        ));
        let bad = IndependenceTest {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(check_independence(&fm, &s, &bad).is_err());
    }
}
