//! Bottom-up DP over multisets of partial-tour sizes.
//!
//! A state at node `v` is the sorted list of sizes of the partial tours that
//! enter the subtree of `v`; its value is the cheapest way to cover the
//! subtree with tours whose restrictions have exactly those sizes. Children
//! are folded in one at a time; then the node's own tokens are handed out;
//! then the mode reshapes the sizes (round down, pad, or nothing).

use std::collections::BTreeMap;

use super::consistency::check_consistency;
use super::DpError;
use crate::instance::{NodeId, Tour, TreeInstance, ROOT};
use crate::structure::ThresholdSchedule;

pub(crate) type Key = Vec<u64>;

pub(crate) enum Mode<'a> {
    /// Sizes are recorded exactly.
    Exact,
    /// Sizes are rounded down to a threshold at every non-depot node.
    Rounded(&'a ThresholdSchedule),
    /// Sizes are exact; every bucket holds at most `gamma` tours or at most
    /// `groups` distinct sizes, optionally after padding tours up.
    Structured {
        schedule: &'a ThresholdSchedule,
        gamma: usize,
        groups: usize,
    },
}

#[derive(Clone, Debug)]
enum Recipe {
    Start,
    /// Output position `i` came from `pairs[i]`: a position of the previous
    /// stage and/or a position of the child.
    Combine {
        prev: usize,
        child: usize,
        pairs: Vec<(Option<usize>, Option<usize>)>,
    },
    /// Output position `i` extends `from[i]` by `extra[i]` tokens at the node.
    Distribute {
        src: usize,
        from: Vec<Option<usize>>,
        extra: Vec<u64>,
    },
    /// Position-wise reshaping of `src`.
    Shape { src: usize },
}

#[derive(Clone, Debug)]
struct Entry {
    key: Key,
    cost: u64,
    recipe: Recipe,
}

#[derive(Default)]
struct Builder {
    map: BTreeMap<Key, (u64, Recipe)>,
}

impl Builder {
    fn offer(&mut self, key: Key, cost: u64, recipe: impl FnOnce() -> Recipe) {
        match self.map.get_mut(&key) {
            Some(e) if e.0 <= cost => {}
            Some(e) => *e = (cost, recipe()),
            None => {
                self.map.insert(key, (cost, recipe()));
            }
        }
    }

    fn finish(self, node: NodeId, budget: usize) -> Result<Vec<Entry>, DpError> {
        if self.map.len() > budget {
            return Err(DpError::StateBudget {
                node,
                states: self.map.len(),
                budget,
            });
        }
        Ok(self
            .map
            .into_iter()
            .map(|(key, (cost, recipe))| Entry { key, cost, recipe })
            .collect())
    }
}

struct NodeTables {
    stages: Vec<Vec<Entry>>,
    dist: Vec<Entry>,
    shaped: Vec<Entry>,
}

pub(crate) struct DpRun {
    pub cost: u64,
    pub tours: Vec<Tour>,
    /// Padding tokens per tour, parallel to `tours`.
    pub pads: Vec<Tour>,
    pub states: usize,
    pub largest_table: usize,
}

/// Runs the DP on a normalized instance.
pub(crate) fn run(inst: &TreeInstance, mode: &Mode, budget: usize) -> Result<DpRun, DpError> {
    let q = inst.capacity();
    let n = inst.n();
    let mut tables: Vec<Option<NodeTables>> = (0..n).map(|_| None).collect();
    let mut states = 0;
    let mut largest = 0;
    for &v in inst.preorder().iter().rev() {
        let mut stages = vec![vec![Entry {
            key: Vec::new(),
            cost: 0,
            recipe: Recipe::Start,
        }]];
        for &c in inst.children(v) {
            let child = &tables[c].as_ref().expect("children first").shaped;
            let prev = stages.last().expect("start stage");
            let next = combine(prev, child, inst.weight(c), q, v, budget)?;
            stages.push(next);
        }
        let last = stages.last().expect("start stage");
        // one tour starting at v is enough for its leftover tokens
        let dist = distribute(last, inst.demand(v), q, 1, v, budget)?;
        let shaped = shape(&dist, mode, v == ROOT, v, budget)?;
        for t in stages.iter().chain([&dist, &shaped]) {
            states += t.len();
            largest = largest.max(t.len());
        }
        tables[v] = Some(NodeTables {
            stages,
            dist,
            shaped,
        });
    }

    let root = &tables[ROOT].as_ref().expect("root table").shaped;
    let best = (0..root.len())
        .min_by(|&a, &b| (root[a].cost, &root[a].key).cmp(&(root[b].cost, &root[b].key)))
        .ok_or(DpError::NoSolution)?;
    let k = root[best].key.len();
    let mut back = Backtrack {
        inst,
        tables: &tables,
        tours: vec![Tour::default(); k],
        pads: vec![Tour::default(); k],
        check: !matches!(mode, Mode::Rounded(_)),
    };
    back.visit(ROOT, best, (0..k).collect());
    Ok(DpRun {
        cost: root[best].cost,
        tours: back.tours,
        pads: back.pads,
        states,
        largest_table: largest,
    })
}

/// `(value, first position, multiplicity)` runs of a sorted key.
fn runs(key: &[u64]) -> Vec<(u64, usize, usize)> {
    let mut out: Vec<(u64, usize, usize)> = Vec::new();
    for (i, &x) in key.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.0 == x => r.2 += 1,
            _ => out.push((x, i, 1)),
        }
    }
    out
}

fn combine(
    prev: &[Entry],
    child: &[Entry],
    w: u64,
    q: u64,
    node: NodeId,
    budget: usize,
) -> Result<Vec<Entry>, DpError> {
    let mut out = Builder::default();
    for (pi, pe) in prev.iter().enumerate() {
        let ra = runs(&pe.key);
        for (ci, ce) in child.iter().enumerate() {
            let rb = runs(&ce.key);
            let cost = pe.cost + ce.cost + 2 * w * ce.key.len() as u64;
            let cells: Vec<(usize, usize)> = (0..ra.len())
                .flat_map(|a| (0..rb.len()).map(move |b| (a, b)))
                .filter(|&(a, b)| ra[a].0 + rb[b].0 <= q)
                .collect();
            let mut counts = vec![0usize; cells.len()];
            let mut left_a: Vec<usize> = ra.iter().map(|r| r.2).collect();
            let mut left_b: Vec<usize> = rb.iter().map(|r| r.2).collect();
            enumerate_matchings(0, &cells, &mut counts, &mut left_a, &mut left_b, &mut |counts| {
                let (key, pairs) = matched(&ra, &rb, pe.key.len(), ce.key.len(), &cells, counts);
                out.offer(key, cost, || Recipe::Combine {
                    prev: pi,
                    child: ci,
                    pairs,
                });
            });
        }
    }
    out.finish(node, budget)
}

fn enumerate_matchings(
    i: usize,
    cells: &[(usize, usize)],
    counts: &mut Vec<usize>,
    left_a: &mut Vec<usize>,
    left_b: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if i == cells.len() {
        emit(counts);
        return;
    }
    let (a, b) = cells[i];
    let max = left_a[a].min(left_b[b]);
    for x in 0..=max {
        counts[i] = x;
        left_a[a] -= x;
        left_b[b] -= x;
        enumerate_matchings(i + 1, cells, counts, left_a, left_b, emit);
        left_a[a] += x;
        left_b[b] += x;
    }
    counts[i] = 0;
}

type Pairs = Vec<(Option<usize>, Option<usize>)>;

fn matched(
    ra: &[(u64, usize, usize)],
    rb: &[(u64, usize, usize)],
    len_a: usize,
    len_b: usize,
    cells: &[(usize, usize)],
    counts: &[usize],
) -> (Key, Pairs) {
    let mut next_a: Vec<usize> = ra.iter().map(|r| r.1).collect();
    let mut next_b: Vec<usize> = rb.iter().map(|r| r.1).collect();
    let mut used_a = vec![false; len_a];
    let mut used_b = vec![false; len_b];
    let mut items: Vec<(u64, Option<usize>, Option<usize>)> = Vec::new();
    for (&(a, b), &x) in cells.iter().zip(counts) {
        for _ in 0..x {
            let (i, j) = (next_a[a], next_b[b]);
            next_a[a] += 1;
            next_b[b] += 1;
            used_a[i] = true;
            used_b[j] = true;
            items.push((ra[a].0 + rb[b].0, Some(i), Some(j)));
        }
    }
    for r in ra {
        for i in r.1..r.1 + r.2 {
            if !used_a[i] {
                items.push((r.0, Some(i), None));
            }
        }
    }
    for r in rb {
        for j in r.1..r.1 + r.2 {
            if !used_b[j] {
                items.push((r.0, None, Some(j)));
            }
        }
    }
    items.sort_unstable();
    let key = items.iter().map(|t| t.0).collect();
    let pairs = items.into_iter().map(|t| (t.1, t.2)).collect();
    (key, pairs)
}

fn distribute(
    stage: &[Entry],
    tokens: u64,
    q: u64,
    max_new: usize,
    node: NodeId,
    budget: usize,
) -> Result<Vec<Entry>, DpError> {
    let mut out = Builder::default();
    for (si, e) in stage.iter().enumerate() {
        let rs = runs(&e.key);
        let mut extras = vec![0u64; e.key.len()];
        spread(0, &rs, &mut extras, tokens, q, &mut |extras, rest| {
            let mut parts = Vec::new();
            split_new(rest, max_new, rest.min(q), &mut parts, &mut |parts| {
                let mut items: Vec<(u64, Option<usize>, u64)> = e
                    .key
                    .iter()
                    .zip(extras)
                    .enumerate()
                    .map(|(i, (&s, &x))| (s + x, Some(i), x))
                    .collect();
                items.extend(parts.iter().map(|&p| (p, None, p)));
                items.sort_unstable();
                let key = items.iter().map(|t| t.0).collect();
                out.offer(key, e.cost, || Recipe::Distribute {
                    src: si,
                    from: items.iter().map(|t| t.1).collect(),
                    extra: items.iter().map(|t| t.2).collect(),
                });
            });
        });
    }
    out.finish(node, budget)
}

/// Hands at most `rest` tokens to existing tours, non-increasing within each
/// run of equal sizes, and calls `emit` with what is left.
fn spread(
    pos: usize,
    rs: &[(u64, usize, usize)],
    extras: &mut Vec<u64>,
    rest: u64,
    q: u64,
    emit: &mut dyn FnMut(&[u64], u64),
) {
    let Some(&(size, start, count)) = rs.first() else {
        emit(extras, rest);
        return;
    };
    if pos == count {
        spread(0, &rs[1..], extras, rest, q, emit);
        return;
    }
    let i = start + pos;
    let cap = if pos == 0 { q - size } else { extras[i - 1] };
    for x in 0..=cap.min(rest) {
        extras[i] = x;
        spread(pos + 1, rs, extras, rest - x, q, emit);
    }
    extras[i] = 0;
}

/// Non-increasing parts of `rest`, each at most `cap`, at most `max_new` of them.
fn split_new(
    rest: u64,
    max_new: usize,
    cap: u64,
    parts: &mut Vec<u64>,
    emit: &mut dyn FnMut(&[u64]),
) {
    if rest == 0 {
        emit(parts);
        return;
    }
    if parts.len() == max_new {
        return;
    }
    for p in (1..=cap.min(rest)).rev() {
        parts.push(p);
        split_new(rest - p, max_new, p, parts, emit);
        parts.pop();
    }
}

fn shape(
    dist: &[Entry],
    mode: &Mode,
    is_root: bool,
    node: NodeId,
    budget: usize,
) -> Result<Vec<Entry>, DpError> {
    let mut out = Builder::default();
    for (di, e) in dist.iter().enumerate() {
        match mode {
            Mode::Exact => out.offer(e.key.clone(), e.cost, || Recipe::Shape { src: di }),
            Mode::Rounded(schedule) => {
                let key = if is_root {
                    e.key.clone()
                } else {
                    e.key.iter().map(|&s| schedule.round_down(s)).collect()
                };
                out.offer(key, e.cost, || Recipe::Shape { src: di });
            }
            Mode::Structured {
                schedule,
                gamma,
                groups,
            } => {
                for key in padding_variants(&e.key, schedule, *gamma, *groups) {
                    out.offer(key, e.cost, || Recipe::Shape { src: di });
                }
            }
        }
    }
    out.finish(node, budget)
}

/// Every way to satisfy the bucket structure by raising sizes, bucket by
/// bucket: keep the bucket if it already qualifies, or pick target sizes
/// among its present sizes (always including the largest) and raise each
/// tour to the least target not below it.
pub(crate) fn padding_variants(
    key: &[u64],
    schedule: &ThresholdSchedule,
    gamma: usize,
    groups: usize,
) -> Vec<Key> {
    // key is sorted, so buckets are contiguous runs
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < key.len() {
        let b = schedule.bucket_of(key[i]);
        let mut j = i;
        while j < key.len() && schedule.bucket_of(key[j]) == b {
            j += 1;
        }
        spans.push((i, j));
        i = j;
    }
    let mut options: Vec<Vec<Vec<u64>>> = Vec::with_capacity(spans.len());
    for &(lo, hi) in &spans {
        let part = &key[lo..hi];
        let mut distinct: Vec<u64> = part.to_vec();
        distinct.dedup();
        let mut opts = Vec::new();
        if part.len() <= gamma || distinct.len() <= groups {
            opts.push(part.to_vec());
        }
        let max = *distinct.last().expect("nonempty run");
        let others = &distinct[..distinct.len() - 1];
        if groups >= 1 && !others.is_empty() {
            for mask in 0u64..(1 << others.len()) {
                let picked = mask.count_ones() as usize + 1;
                if picked > groups || picked == distinct.len() {
                    continue;
                }
                let mut targets: Vec<u64> = others
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &s)| s)
                    .collect();
                targets.push(max);
                let raised: Vec<u64> = part
                    .iter()
                    .map(|&s| targets[targets.partition_point(|&t| t < s)])
                    .collect();
                opts.push(raised);
            }
        }
        if opts.is_empty() {
            return Vec::new();
        }
        options.push(opts);
    }
    let mut out: Vec<Key> = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for o in &opts {
                let mut k = prefix.clone();
                k.extend(o);
                next.push(k);
            }
        }
        out = next;
    }
    out
}

struct Backtrack<'a> {
    inst: &'a TreeInstance,
    tables: &'a [Option<NodeTables>],
    tours: Vec<Tour>,
    pads: Vec<Tour>,
    check: bool,
}

impl Backtrack<'_> {
    /// `slots[i]` is the global tour owning position `i` of the shaped entry.
    fn visit(&mut self, v: NodeId, idx: usize, slots: Vec<usize>) {
        let t = self.tables[v].as_ref().expect("table");
        let shaped = &t.shaped[idx];
        let Recipe::Shape { src } = shaped.recipe else {
            unreachable!("shaped entries come from the shape step")
        };
        let d = &t.dist[src];
        for (i, (&s, &r)) in shaped.key.iter().zip(&d.key).enumerate() {
            if s > r {
                self.pads[slots[i]].add(v, s - r);
            }
        }
        let Recipe::Distribute { src, ref from, ref extra } = d.recipe else {
            unreachable!("distribution entries come from the distribution step")
        };
        let mut k = t.stages.len() - 1;
        let mut e = &t.stages[k][src];
        if self.check {
            assert!(
                check_consistency(self.inst.demand(v), &d.key, &e.key, &[]),
                "distribution at node {v} is inconsistent"
            );
        }
        let mut cur = vec![usize::MAX; e.key.len()];
        for (i, (f, &x)) in from.iter().zip(extra).enumerate() {
            if x > 0 {
                self.tours[slots[i]].add(v, x);
            }
            if let Some(j) = *f {
                cur[j] = slots[i];
            }
        }
        while k > 0 {
            let Recipe::Combine { prev, child, ref pairs } = e.recipe else {
                unreachable!("stage entries come from combining")
            };
            let p = &t.stages[k - 1][prev];
            let c = self.inst.children(v)[k - 1];
            let ce = &self.tables[c].as_ref().expect("table").shaped[child];
            if self.check {
                assert!(
                    check_consistency(0, &e.key, &p.key, &ce.key),
                    "combining child {c} at node {v} is inconsistent"
                );
            }
            let mut prev_slots = vec![usize::MAX; p.key.len()];
            let mut child_slots = vec![usize::MAX; ce.key.len()];
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if let Some(a) = a {
                    prev_slots[a] = cur[i];
                }
                if let Some(b) = b {
                    child_slots[b] = cur[i];
                }
            }
            self.visit(c, child, child_slots);
            cur = prev_slots;
            e = p;
            k -= 1;
        }
        debug_assert!(cur.is_empty());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eps::Eps;
    use crate::structure::thresholds;

    #[test]
    fn combine_two_singletons() {
        let a = vec![Entry {
            key: vec![2],
            cost: 0,
            recipe: Recipe::Start,
        }];
        let b = vec![Entry {
            key: vec![1],
            cost: 5,
            recipe: Recipe::Start,
        }];
        let out = combine(&a, &b, 3, 3, 0, 100).unwrap();
        let keys: Vec<_> = out.iter().map(|e| (e.key.clone(), e.cost)).collect();
        assert_eq!(keys, vec![(vec![1, 2], 11), (vec![3], 11)]);
    }

    #[test]
    fn distribute_tokens() {
        let s = vec![Entry {
            key: vec![1, 1],
            cost: 0,
            recipe: Recipe::Start,
        }];
        let out = distribute(&s, 2, 3, 1, 0, 100).unwrap();
        let keys: Vec<_> = out.iter().map(|e| e.key.clone()).collect();
        assert_eq!(keys, vec![vec![1, 1, 2], vec![1, 3], vec![2, 2]]);
    }

    #[test]
    fn padding_collapses_a_crowded_bucket() {
        let s = thresholds(10, Eps::new(1, 2).unwrap());
        // bucket [5, 8) holds 5, 6, 7
        let v = padding_variants(&[5, 6, 7], &s, 2, 1);
        assert_eq!(v, vec![vec![7, 7, 7]]);
        let v = padding_variants(&[5, 6, 7], &s, 2, 2);
        assert_eq!(v, vec![vec![7, 7, 7], vec![5, 7, 7], vec![6, 6, 7]]);
        let v = padding_variants(&[5, 6, 7], &s, 3, 1);
        assert_eq!(v[0], vec![5, 6, 7]);
    }
}
