//! Versioned plain-text forest format.
//!
//! ```text
//! fdi-forest 1
//! classes Healthy R0Down
//! features V0 V1 V2 T S1
//! config n_trees=2 max_depth=8 min_leaf=5 feature_subsample=3 bootstrap=true seed=42
//! tree 0 3
//! node 0 split 1 4.25 1 2
//! node 1 leaf 1 0
//! node 2 leaf 0.25 0.75
//! tree 1 1
//! node 0 leaf 0.5 0.5
//! ```
//!
//! Floats use the shortest representation that parses back to the same value.

use std::fmt::Write as _;

use crate::model::Label;

use super::forest::{Forest, ForestConfig, Node, Tree};
use super::EbError;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "fdi-forest";

pub fn write_forest(forest: &Forest) -> String {
    let c = forest.config();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let classes: Vec<&str> = forest.classes().iter().map(|l| l.as_str()).collect();
    let _ = writeln!(out, "classes {}", classes.join(" "));
    let _ = writeln!(out, "features {}", forest.feature_names().join(" "));
    let _ = writeln!(
        out,
        "config n_trees={} max_depth={} min_leaf={} feature_subsample={} bootstrap={} seed={}",
        c.n_trees, c.max_depth, c.min_leaf, c.feature_subsample, c.bootstrap, c.seed
    );
    for (ti, tree) in forest.trees().iter().enumerate() {
        let _ = writeln!(out, "tree {ti} {}", tree.nodes.len());
        for (ni, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(out, "node {ni} split {feature} {threshold} {left} {right}");
                }
                Node::Leaf { distribution } => {
                    let d: Vec<String> = distribution.iter().map(|p| p.to_string()).collect();
                    let _ = writeln!(out, "node {ni} leaf {}", d.join(" "));
                }
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    fn next_tokens(&mut self) -> Option<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some(l.split_whitespace().collect());
            }
        }
        None
    }

    fn err(&self, msg: impl Into<String>) -> EbError {
        EbError::Parse {
            line: self.last,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>, EbError> {
        let toks = self
            .next_tokens()
            .ok_or_else(|| self.err(format!("expected `{keyword}`, found end of file")))?;
        if toks[0] != keyword {
            return Err(self.err(format!("expected `{keyword}`, found `{}`", toks[0])));
        }
        Ok(toks)
    }
}

fn num<T: std::str::FromStr>(lines: &Lines<'_>, s: &str, what: &str) -> Result<T, EbError>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| lines.err(format!("{what} `{s}`: {e}")))
}

pub fn read_forest(text: &str) -> Result<Forest, EbError> {
    let mut lines = Lines::new(text);
    let head = lines.expect(MAGIC)?;
    let version: u32 = num(&lines, head.get(1).copied().unwrap_or(""), "version")?;
    if version != FORMAT_VERSION {
        return Err(lines.err(format!("unsupported version {version}")));
    }
    let classes = lines.expect("classes")?[1..]
        .iter()
        .map(|s| s.parse::<Label>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| lines.err(e.to_string()))?;
    let features: Vec<String> = lines.expect("features")?[1..].iter().map(|s| s.to_string()).collect();

    let cfg_toks = lines.expect("config")?;
    let mut cfg = ForestConfig::default();
    for kv in &cfg_toks[1..] {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| lines.err(format!("expected key=value, got `{kv}`")))?;
        match k {
            "n_trees" => cfg.n_trees = num(&lines, v, k)?,
            "max_depth" => cfg.max_depth = num(&lines, v, k)?,
            "min_leaf" => cfg.min_leaf = num(&lines, v, k)?,
            "feature_subsample" => cfg.feature_subsample = num(&lines, v, k)?,
            "bootstrap" => cfg.bootstrap = num(&lines, v, k)?,
            "seed" => cfg.seed = num(&lines, v, k)?,
            other => return Err(lines.err(format!("unknown config key `{other}`"))),
        }
    }

    let mut trees = Vec::new();
    while let Some(toks) = lines.next_tokens() {
        if toks[0] != "tree" || toks.len() != 3 {
            return Err(lines.err("expected `tree <id> <node count>`"));
        }
        let id: usize = num(&lines, toks[1], "tree id")?;
        if id != trees.len() {
            return Err(lines.err(format!("tree ids must be sequential, got {id}")));
        }
        let count: usize = num(&lines, toks[2], "node count")?;
        let mut nodes = Vec::with_capacity(count);
        for ni in 0..count {
            let t = lines.expect("node")?;
            if t.len() < 3 || num::<usize>(&lines, t[1], "node id")? != ni {
                return Err(lines.err(format!("expected node {ni}")));
            }
            let node = match t[2] {
                "split" if t.len() == 7 => Node::Split {
                    feature: num(&lines, t[3], "feature")?,
                    threshold: num(&lines, t[4], "threshold")?,
                    left: num(&lines, t[5], "left")?,
                    right: num(&lines, t[6], "right")?,
                },
                "leaf" => Node::Leaf {
                    distribution: t[3..]
                        .iter()
                        .map(|s| num::<f64>(&lines, s, "probability"))
                        .collect::<Result<_, _>>()?,
                },
                other => return Err(lines.err(format!("malformed node `{other}`"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if trees.len() != cfg.n_trees {
        return Err(lines.err(format!(
            "config declares {} trees, file has {}",
            cfg.n_trees,
            trees.len()
        )));
    }
    Forest::from_parts(trees, cfg, classes, features)
}
