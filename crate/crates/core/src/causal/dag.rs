use std::collections::{HashMap, VecDeque};
use std::fmt;

use super::CausalError;

/// Directed acyclic graph over named variables, some of which may be hidden.
///
/// Text form: one `parent -> child` per line, a bare name declares an isolated
/// node, `#` starts a comment line, and a node token suffixed with `#hidden`
/// (for example `R0 -> Flow #hidden`) marks that node as hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    hidden: Vec<bool>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
}

/// `Pr(variable | parents)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub variable: String,
    pub parents: Vec<String>,
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parents.is_empty() {
            write!(f, "Pr({})", self.variable)
        } else {
            write!(f, "Pr({}|{})", self.variable, self.parents.join(","))
        }
    }
}

/// `x ⟂ y | z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Independence {
    pub x: String,
    pub y: String,
    pub z: Vec<String>,
}

impl fmt::Display for Independence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.z.is_empty() {
            write!(f, "{} _||_ {}", self.x, self.y)
        } else {
            write!(f, "{} _||_ {} | {}", self.x, self.y, self.z.join(", "))
        }
    }
}

const HIDDEN_TAG: &str = "#hidden";

impl Dag {
    /// Builds a DAG from `(name, hidden)` nodes and `(parent, child)` edges.
    pub fn new(nodes: &[(&str, bool)], edges: &[(&str, &str)]) -> Result<Self, CausalError> {
        let mut names = Vec::new();
        let mut hidden = Vec::new();
        let mut index = HashMap::new();
        for (name, h) in nodes {
            if index.insert(name.to_string(), names.len()).is_some() {
                return Err(CausalError::DuplicateNode(name.to_string()));
            }
            names.push(name.to_string());
            hidden.push(*h);
        }
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (p, c) in edges {
            let pi = *index.get(*p).ok_or_else(|| CausalError::UnknownNode(p.to_string()))?;
            let ci = *index.get(*c).ok_or_else(|| CausalError::UnknownNode(c.to_string()))?;
            if pi == ci {
                return Err(CausalError::SelfLoop(p.to_string()));
            }
            if children[pi].contains(&ci) {
                return Err(CausalError::DuplicateEdge(p.to_string(), c.to_string()));
            }
            children[pi].push(ci);
            parents[ci].push(pi);
        }
        for v in parents.iter_mut().chain(children.iter_mut()) {
            v.sort_unstable();
        }

        // Kahn's algorithm, lowest declaration index first.
        let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            topo.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).expect("a node on the cycle");
            return Err(CausalError::Cycle(names[stuck].clone()));
        }

        Ok(Self {
            names,
            hidden,
            parents,
            children,
            index,
            topo,
        })
    }

    /// Convenience constructor: nodes are declared in order of first appearance.
    pub fn from_edges(edges: &[(&str, &str)]) -> Result<Self, CausalError> {
        let mut nodes: Vec<(&str, bool)> = Vec::new();
        for (p, c) in edges {
            for n in [*p, *c] {
                if !nodes.iter().any(|(m, _)| *m == n) {
                    nodes.push((n, false));
                }
            }
        }
        Self::new(&nodes, edges)
    }

    pub fn parse(text: &str) -> Result<Self, CausalError> {
        let mut order: Vec<String> = Vec::new();
        let mut hidden: HashMap<String, bool> = HashMap::new();
        let mut edges: Vec<(String, String)> = Vec::new();

        let mut node = |token: &str, line: usize| -> Result<String, CausalError> {
            let token = token.trim();
            let (name, is_hidden) = match token.strip_suffix(HIDDEN_TAG) {
                Some(rest) => (rest.trim(), true),
                None => (token, false),
            };
            if name.is_empty() || name.contains(char::is_whitespace) || name.contains('#') {
                return Err(CausalError::Parse {
                    line,
                    msg: format!("invalid node name `{token}`"),
                });
            }
            let entry = hidden.entry(name.to_string()).or_insert_with(|| {
                order.push(name.to_string());
                false
            });
            *entry |= is_hidden;
            Ok(name.to_string())
        };

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            match l.split_once("->") {
                Some((p, c)) => {
                    let p = node(p, line)?;
                    let c = node(c, line)?;
                    edges.push((p, c));
                }
                None => {
                    node(l, line)?;
                }
            }
        }
        if order.is_empty() {
            return Err(CausalError::Parse {
                line: 0,
                msg: "no nodes".into(),
            });
        }
        let nodes: Vec<(&str, bool)> = order.iter().map(|n| (n.as_str(), hidden[n])).collect();
        let e: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        Self::new(&nodes, &e)
    }

    /// Text form accepted by [`Dag::parse`]: node declarations, then edges.
    pub fn to_text(&self) -> String {
        let tok = |i: usize| {
            if self.hidden[i] {
                format!("{} {HIDDEN_TAG}", self.names[i])
            } else {
                self.names[i].clone()
            }
        };
        let mut out = String::new();
        for i in 0..self.len() {
            out.push_str(&tok(i));
            out.push('\n');
        }
        for i in 0..self.len() {
            for &c in &self.children[i] {
                out.push_str(&format!("{} -> {}\n", tok(i), tok(c)));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_hidden(&self, name: &str) -> Result<bool, CausalError> {
        Ok(self.hidden[self.node(name)?])
    }

    pub fn observed(&self) -> Vec<&str> {
        (0..self.len())
            .filter(|&i| !self.hidden[i])
            .map(|i| self.names[i].as_str())
            .collect()
    }

    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>, CausalError> {
        Ok(self.parents[self.node(name)?]
            .iter()
            .map(|&p| self.names[p].as_str())
            .collect())
    }

    pub fn children_of(&self, name: &str) -> Result<Vec<&str>, CausalError> {
        Ok(self.children[self.node(name)?]
            .iter()
            .map(|&c| self.names[c].as_str())
            .collect())
    }

    pub fn edges(&self) -> Vec<(&str, &str)> {
        (0..self.len())
            .flat_map(|p| self.children[p].iter().map(move |&c| (p, c)))
            .map(|(p, c)| (self.names[p].as_str(), self.names[c].as_str()))
            .collect()
    }

    fn node(&self, name: &str) -> Result<usize, CausalError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| CausalError::UnknownNode(name.to_string()))
    }

    /// Bayesian-network factors in topological order; their product is the joint.
    pub fn factorization(&self) -> Vec<Factor> {
        self.topo
            .iter()
            .map(|&v| Factor {
                variable: self.names[v].clone(),
                parents: self.parents[v].iter().map(|&p| self.names[p].clone()).collect(),
            })
            .collect()
    }

    /// Factorization as a product string, e.g. `Pr(S)Pr(Y|S)`.
    pub fn factorization_string(&self) -> String {
        self.factorization().iter().map(Factor::to_string).collect()
    }

    /// Whether every path between `x` and `y` is blocked by `z`.
    pub fn d_separated(&self, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool, CausalError> {
        let resolve = |s: &[&str]| s.iter().map(|n| self.node(n)).collect::<Result<Vec<_>, _>>();
        let (xs, ys, zs) = (resolve(x)?, resolve(y)?, resolve(z)?);
        let n = self.len();
        let mut owner = vec![0u8; n];
        for (tag, set) in [(1u8, &xs), (2, &ys), (3, &zs)] {
            for &v in set.iter() {
                if owner[v] != 0 && owner[v] != tag {
                    return Err(CausalError::NotDisjoint(self.names[v].clone()));
                }
                owner[v] = tag;
            }
        }
        Ok(!self
            .reachable(&xs, &zs)
            .into_iter()
            .zip(&owner)
            .any(|(r, &o)| r && o == 2))
    }

    /// Nodes reachable from `sources` by an active trail given `given`
    /// (the Bayes-ball traversal).
    fn reachable(&self, sources: &[usize], given: &[usize]) -> Vec<bool> {
        let n = self.len();
        let mut in_z = vec![false; n];
        for &v in given {
            in_z[v] = true;
        }
        // Ancestors of the conditioning set, including itself.
        let mut anc = in_z.clone();
        let mut stack: Vec<usize> = given.to_vec();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !anc[p] {
                    anc[p] = true;
                    stack.push(p);
                }
            }
        }

        const UP: usize = 0; // arrived from a child
        const DOWN: usize = 1; // arrived from a parent
        let mut seen = vec![[false; 2]; n];
        let mut reached = vec![false; n];
        let mut queue: VecDeque<(usize, usize)> = sources.iter().map(|&s| (s, UP)).collect();
        while let Some((v, dir)) = queue.pop_front() {
            if seen[v][dir] {
                continue;
            }
            seen[v][dir] = true;
            if !in_z[v] {
                reached[v] = true;
            }
            if dir == UP && !in_z[v] {
                queue.extend(self.parents[v].iter().map(|&p| (p, UP)));
                queue.extend(self.children[v].iter().map(|&c| (c, DOWN)));
            } else if dir == DOWN {
                if !in_z[v] {
                    queue.extend(self.children[v].iter().map(|&c| (c, DOWN)));
                }
                if anc[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, UP)));
                }
            }
        }
        reached
    }

    /// All pairwise statements `x ⟂ y | z` over observed nodes with
    /// `|z| <= max_conditioning` that hold by d-separation.
    pub fn implied_independencies(&self, max_conditioning: usize) -> Vec<Independence> {
        let obs = self.observed();
        let mut out = Vec::new();
        for i in 0..obs.len() {
            for j in i + 1..obs.len() {
                let rest: Vec<&str> = obs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, n)| *n)
                    .collect();
                for size in 0..=max_conditioning.min(rest.len()) {
                    for z in combinations(&rest, size) {
                        if self
                            .d_separated(&[obs[i]], &[obs[j]], &z)
                            .expect("nodes are known and disjoint")
                        {
                            out.push(Independence {
                                x: obs[i].to_string(),
                                y: obs[j].to_string(),
                                z: z.iter().map(|s| s.to_string()).collect(),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// All `k`-subsets of `items`, in lexicographic order of positions.
pub(crate) fn combinations<'a>(items: &[&'a str], k: usize) -> Vec<Vec<&'a str>> {
    fn go<'a>(items: &[&'a str], k: usize, start: usize, cur: &mut Vec<&'a str>, out: &mut Vec<Vec<&'a str>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            go(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::new(), &mut out);
    out
}
