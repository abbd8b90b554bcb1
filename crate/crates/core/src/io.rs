//! Line-oriented text formats for instances, solutions and node maps.
//!
//! ```text
//! cvrp-tree v1
//! n 4
//! Q 2
//! edge 0 1 1
//! edge 0 2 1
//! edge 0 3 1
//! demand 1 1
//! demand 2 1
//! demand 3 1
//! ```
//!
//! Blank lines and lines starting with `#` are ignored when reading.
//! Writing always produces the canonical layout: edges sorted by child id,
//! demands by node id, zero demands omitted.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::instance::{InstanceError, NodeId, Solution, Tour, TreeInstance};

pub const HEADER: &str = "cvrp-tree v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing header line `{HEADER}`")]
    MissingHeader,
    #[error("missing `{0}` line")]
    Missing(&'static str),
    #[error("node {0} has more than one parent edge")]
    DuplicateNode(NodeId),
    #[error("expected {expected} edges, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split_whitespace().collect()))
        }
    })
}

fn num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, ParseError> {
    if tok.starts_with('-') {
        return Err(syntax(line, format!("{what} must be non-negative, got {tok}")));
    }
    tok.parse()
        .map_err(|_| syntax(line, format!("invalid {what} {tok:?}")))
}

pub fn load_instance(text: &str) -> Result<TreeInstance, ParseError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, toks)) if toks.join(" ") == HEADER => {}
        _ => return Err(ParseError::MissingHeader),
    }
    let mut n: Option<usize> = None;
    let mut q: Option<u64> = None;
    let mut edges = Vec::new();
    let mut demands = Vec::new();
    let mut seen_child = HashSet::new();
    for (ln, toks) in lines {
        match toks.as_slice() {
            ["n", v] => {
                if n.is_some() {
                    return Err(syntax(ln, "repeated `n` line"));
                }
                n = Some(num(ln, v, "node count")?);
            }
            ["Q", v] => {
                if q.is_some() {
                    return Err(syntax(ln, "repeated `Q` line"));
                }
                let cap: u64 = num(ln, v, "capacity")?;
                if cap == 0 {
                    return Err(InstanceError::NonPositiveCapacity.into());
                }
                q = Some(cap);
            }
            ["edge", p, c, w] => {
                let p: NodeId = num(ln, p, "node id")?;
                let c: NodeId = num(ln, c, "node id")?;
                let w: u64 = num(ln, w, "weight")?;
                if !seen_child.insert(c) {
                    return Err(ParseError::DuplicateNode(c));
                }
                edges.push((p, c, w));
            }
            ["demand", v, d] => {
                let v: NodeId = num(ln, v, "node id")?;
                let d: u64 = num(ln, d, "demand")?;
                demands.push((v, d));
            }
            _ => return Err(syntax(ln, format!("unrecognized line {:?}", toks.join(" ")))),
        }
    }
    let n = n.ok_or(ParseError::Missing("n"))?;
    let q = q.ok_or(ParseError::Missing("Q"))?;
    if n == 0 {
        return Err(InstanceError::Empty.into());
    }
    if edges.len() != n - 1 {
        return Err(ParseError::EdgeCount {
            expected: n - 1,
            found: edges.len(),
        });
    }
    let mut seen_demand = HashSet::new();
    for &(v, _) in &demands {
        if !seen_demand.insert(v) {
            return Err(ParseError::DuplicateNode(v));
        }
    }
    Ok(TreeInstance::from_edges(n, q, &edges, &demands)?)
}

pub fn save_instance(inst: &TreeInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "n {}", inst.n());
    let _ = writeln!(out, "Q {}", inst.capacity());
    for v in 1..inst.n() {
        let p = inst.parent(v).expect("non-root node has a parent");
        let _ = writeln!(out, "edge {p} {v} {}", inst.weight(v));
    }
    for v in 0..inst.n() {
        if inst.demand(v) > 0 {
            let _ = writeln!(out, "demand {v} {}", inst.demand(v));
        }
    }
    out
}

/// Parses `tour v:k ...` lines and a trailing `cost c`. The claimed cost is
/// kept as written so a checker can compare it with a recomputation.
pub fn load_solution(text: &str) -> Result<Solution, ParseError> {
    let mut tours = Vec::new();
    let mut cost = None;
    for (ln, toks) in content_lines(text) {
        match toks.split_first() {
            Some((&"tour", rest)) => {
                let mut pickups = Vec::with_capacity(rest.len());
                for item in rest {
                    let (v, k) = item
                        .split_once(':')
                        .ok_or_else(|| syntax(ln, format!("expected node:tokens, got {item:?}")))?;
                    pickups.push((num::<NodeId>(ln, v, "node id")?, num::<u64>(ln, k, "token count")?));
                }
                tours.push(Tour::new(pickups));
            }
            Some((&"cost", [c])) => {
                if cost.is_some() {
                    return Err(syntax(ln, "repeated `cost` line"));
                }
                cost = Some(num(ln, c, "cost")?);
            }
            _ => return Err(syntax(ln, format!("unrecognized line {:?}", toks.join(" ")))),
        }
    }
    Ok(Solution {
        tours,
        total_cost: cost.ok_or(ParseError::Missing("cost"))?,
    })
}

pub fn save_solution(sol: &Solution) -> String {
    let mut out = String::new();
    for t in &sol.tours {
        out.push_str("tour");
        for (v, k) in t.pickups() {
            let _ = write!(out, " {v}:{k}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "cost {}", sol.total_cost);
    out
}

pub fn save_node_map(map: &[Option<NodeId>]) -> String {
    let mut out = String::new();
    for (v, m) in map.iter().enumerate() {
        if let Some(m) = m {
            let _ = writeln!(out, "map {v} {m}");
        }
    }
    out
}

pub fn load_node_map(text: &str) -> Result<Vec<(NodeId, NodeId)>, ParseError> {
    content_lines(text)
        .map(|(ln, toks)| match toks.as_slice() {
            ["map", a, b] => Ok((num(ln, a, "node id")?, num(ln, b, "node id")?)),
            _ => Err(syntax(ln, format!("unrecognized line {:?}", toks.join(" ")))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_instance() {
        let inst = load_instance("cvrp-tree v1\nn 2\nQ 2\nedge 0 1 5\ndemand 1 1\n").unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.dist(1), 5);
        assert_eq!(inst.demand(1), 1);
    }

    #[test]
    fn rejects_unreachable_node() {
        let err = load_instance("cvrp-tree v1\nn 3\nQ 2\nedge 1 2 3\nedge 2 1 1\n").unwrap_err();
        assert!(matches!(err, ParseError::Instance(InstanceError::Cycle(_))), "{err:?}");
        let err = load_instance("cvrp-tree v1\nn 3\nQ 2\nedge 0 1 3\nedge 0 1 1\n").unwrap_err();
        assert_eq!(err, ParseError::DuplicateNode(1));
    }

    #[test]
    fn rejects_malformed_numbers() {
        for bad in [
            "cvrp-tree v1\nn 2\nQ 0\nedge 0 1 1\n",
            "cvrp-tree v1\nn 2\nQ 2\nedge 0 1 -1\n",
            "cvrp-tree v1\nn 2\nQ 2\nedge 0 1 1\ndemand 1 -3\n",
            "cvrp-tree v1\nn 2\nQ 2\nedge 0 1 1.5\n",
            "n 2\nQ 2\nedge 0 1 1\n",
            "cvrp-tree v1\nn 2\nQ 2\n",
        ] {
            assert!(load_instance(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn solution_round_trip() {
        let text = "tour 1:1 2:1\ntour 3:1\ncost 6\n";
        let sol = load_solution(text).unwrap();
        assert_eq!(sol.tours.len(), 2);
        assert_eq!(save_solution(&sol), text);
    }

    #[test]
    fn node_map_round_trip() {
        let text = save_node_map(&[Some(0), None, Some(1)]);
        assert_eq!(load_node_map(&text).unwrap(), vec![(0, 0), (2, 1)]);
    }
}
