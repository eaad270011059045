// SPDX-License-Identifier: Apache-2.0

//! Kernighan-Lin refinement over pre-groups.
//!
//! Supernodes keep a fixed order in which every crossing edge points forward;
//! that order is what makes the contracted graph acyclic. Refinement works on
//! one connected pair `(s, t)`, `s < t`, at a time: a tentative sequence of
//! single moves and swaps of whole pre-groups is played out with locking, and
//! the best prefix that keeps every edge between the two pointing from `s` to
//! `t` is kept if it lowers the cut.

use super::pregroup::Groups;
use super::{cut_size, FusionReason, PartGraph, PreGroup};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

#[derive(Clone, Copy, Debug)]
pub struct KernighanParams {
    pub max_size: usize,
    pub max_passes: usize,
}

/// Packs pre-groups into supernodes of at most `max_size` nodes by greedy
/// clustering. Pairs are merged in order of modularity gain, so clusters
/// around high-degree hubs form last, as long as the merge fits and keeps
/// the contracted graph acyclic. Clusters with no edges between them are never
/// merged, so unrelated logic is not woken together. Supernode ids follow a
/// topological order of the clusters.
pub fn initial_assignment(pg: &PartGraph, groups: &[PreGroup], max_size: usize) -> Vec<usize> {
    let mut gs = Groups::new(pg, max_size.max(1));
    for g in groups {
        for &m in &g.members[1..] {
            gs.join(g.members[0], m);
        }
    }
    let mut weight: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (u, succ) in pg.succs.iter().enumerate() {
        for &v in succ {
            let (a, b) = (gs.find(u), gs.find(v));
            if a != b {
                *weight.entry(a).or_default().entry(b).or_default() += 1;
                *weight.entry(b).or_default().entry(a).or_default() += 1;
            }
        }
    }
    let size = |gs: &Groups, x: usize| gs.members[x].len();
    let mut vol = vec![0i64; pg.len()];
    for (u, succ) in pg.succs.iter().enumerate() {
        for &v in succ {
            vol[gs.find(u)] += 1;
            vol[gs.find(v)] += 1;
        }
    }
    let two_m = vol.iter().sum::<i64>().max(1);
    let gain = |vol: &[i64], w: usize, a: usize, b: usize| w as i64 * two_m - vol[a] * vol[b];
    let mut heap = BinaryHeap::new();
    for (&a, nbrs) in &weight {
        for (&b, &w) in nbrs {
            if a < b && size(&gs, a) + size(&gs, b) <= max_size {
                heap.push((gain(&vol, w, a, b), Reverse(size(&gs, a) + size(&gs, b)), Reverse(a), Reverse(b)));
            }
        }
    }
    while let Some((score, _, Reverse(a), Reverse(b))) = heap.pop() {
        if gs.find(a) != a || gs.find(b) != b || weight[&a].get(&b).map(|&w| gain(&vol, w, a, b)) != Some(score) {
            continue;
        }
        if !gs.fuse(a, b, FusionReason::Siblings) {
            continue;
        }
        let (keep, gone) = if gs.find(a) == a { (a, b) } else { (b, a) };
        vol[keep] += vol[gone];
        let moved = weight.remove(&gone).unwrap_or_default();
        for (y, wy) in moved {
            if let Some(m) = weight.get_mut(&y) {
                m.remove(&gone);
            }
            if y == keep {
                continue;
            }
            *weight.get_mut(&keep).expect("merged cluster has edges").entry(y).or_default() += wy;
            *weight.get_mut(&y).expect("neighbor has edges").entry(keep).or_default() += wy;
        }
        weight.get_mut(&keep).expect("merged cluster has edges").remove(&gone);
        let sk = size(&gs, keep);
        for (&y, &wy) in &weight[&keep] {
            if sk + size(&gs, y) <= max_size {
                let (p, q) = (keep.min(y), keep.max(y));
                heap.push((gain(&vol, wy, p, q), Reverse(sk + size(&gs, y)), Reverse(p), Reverse(q)));
            }
        }
    }
    // number clusters in topological order, smallest member first among ready ones
    let n = pg.len();
    let root: Vec<usize> = (0..n).map(|u| gs.find(u)).collect();
    let mut indeg = vec![0usize; n];
    let mut seen = BTreeSet::new();
    for (u, succ) in pg.succs.iter().enumerate() {
        for &v in succ {
            if root[u] != root[v] && seen.insert((root[u], root[v])) {
                indeg[root[v]] += 1;
            }
        }
    }
    let first = |r: usize| gs.members[r].iter().copied().min().unwrap_or(r);
    let mut ready: BTreeSet<(usize, usize)> = (0..n)
        .filter(|&u| root[u] == u && indeg[u] == 0)
        .map(|r| (first(r), r))
        .collect();
    let mut assignment = vec![0; n];
    let mut next = 0;
    let mut out_edges: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in &seen {
        out_edges.entry(a).or_default().insert(b);
    }
    while let Some((_, r)) = ready.pop_first() {
        for &m in &gs.members[r] {
            assignment[m] = next;
        }
        next += 1;
        for &t in out_edges.get(&r).into_iter().flatten() {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.insert((first(t), t));
            }
        }
    }
    debug_assert_eq!(next, (0..n).filter(|&u| root[u] == u).count(), "clusters form a cycle");
    assignment
}

#[derive(Clone, Copy, Default, Debug)]
struct Edges {
    /// Node edges from this unit to the neighbor.
    out: usize,
    /// Node edges from the neighbor to this unit.
    inc: usize,
}

struct Units {
    size: Vec<usize>,
    adj: Vec<BTreeMap<usize, Edges>>,
}

impl Units {
    fn new(pg: &PartGraph, groups: &[PreGroup]) -> Self {
        let mut unit_of = vec![usize::MAX; pg.len()];
        for (i, g) in groups.iter().enumerate() {
            for &m in &g.members {
                unit_of[m] = i;
            }
        }
        let mut adj = vec![BTreeMap::<usize, Edges>::new(); groups.len()];
        for (u, succ) in pg.succs.iter().enumerate() {
            for &v in succ {
                let (x, y) = (unit_of[u], unit_of[v]);
                if x != y {
                    adj[x].entry(y).or_default().out += 1;
                    adj[y].entry(x).or_default().inc += 1;
                }
            }
        }
        Self {
            size: groups.iter().map(|g| g.members.len()).collect(),
            adj,
        }
    }
}

/// Refines `assignment` (supernode ids in topological order). Returns the
/// refined assignment and the number of passes run.
pub fn kernighan_refine(
    pg: &PartGraph,
    groups: &[PreGroup],
    assignment: Vec<usize>,
    p: &KernighanParams,
) -> (Vec<usize>, usize) {
    let units = Units::new(pg, groups);
    let mut side: Vec<usize> = groups.iter().map(|g| assignment[g.members[0]]).collect();
    let count = side.iter().copied().max().map_or(0, |m| m + 1);
    let mut fill = vec![0usize; count];
    for (x, &s) in side.iter().enumerate() {
        fill[s] += units.size[x];
    }
    let mut passes = 0;
    while passes < p.max_passes {
        passes += 1;
        let mut pairs = BTreeSet::new();
        for (x, nbrs) in units.adj.iter().enumerate() {
            for &y in nbrs.keys() {
                let (a, b) = (side[x], side[y]);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
        let mut improved = 0;
        for (s, t) in pairs {
            improved += refine_pair(&units, &mut side, &mut fill, s, t, p.max_size);
        }
        if improved == 0 {
            break;
        }
    }
    let mut out = vec![0; pg.len()];
    for (x, g) in groups.iter().enumerate() {
        for &m in &g.members {
            out[m] = side[x];
        }
    }
    debug_assert!(cut_size(pg, &out) <= cut_size(pg, &assignment));
    (out, passes)
}

/// Candidates per side considered for swaps at each step.
const SWAP_CANDIDATES: usize = 8;

fn refine_pair(units: &Units, side: &mut [usize], fill: &mut [usize], s: usize, t: usize, max_size: usize) -> usize {
    let members: Vec<usize> = (0..side.len()).filter(|&x| side[x] == s || side[x] == t).collect();
    if members.len() < 2 {
        return 0;
    }
    // A unit may only cross if its edges to other supernodes keep pointing
    // forward from its new position.
    let movable = |x: usize| {
        let to_t = side[x] == s;
        units.adj[x].iter().all(|(&y, e)| {
            let k = side[y];
            if k == s || k == t {
                return true;
            }
            if to_t {
                e.out == 0 || k > t
            } else {
                e.inc == 0 || k < s
            }
        })
    };
    let mut locked: BTreeSet<usize> = members.iter().copied().filter(|&x| !movable(x)).collect();
    let gain_of = |side: &[usize], x: usize| -> i64 {
        let mut d = 0i64;
        for (&y, e) in &units.adj[x] {
            let w = (e.out + e.inc) as i64;
            if side[y] == side[x] {
                d -= w;
            } else if side[y] == s || side[y] == t {
                d += w;
            }
        }
        d
    };
    // Every state visited keeps edges between s and t pointing from s to t,
    // so a unit can leave s only if nothing in s depends on it, and leave t
    // only if it depends on nothing in t.
    let can_leave = |side: &[usize], x: usize| -> bool {
        let k = side[x];
        units.adj[x]
            .iter()
            .all(|(&y, e)| side[y] != k || if k == s { e.out == 0 } else { e.inc == 0 })
    };
    let original: Vec<(usize, usize)> = members.iter().map(|&x| (x, side[x])).collect();
    let other = |k: usize| if k == s { t } else { s };
    let mut history: Vec<Vec<usize>> = Vec::new();
    let (mut total, mut best, mut best_len) = (0i64, 0i64, 0usize);
    loop {
        let free: Vec<usize> = members
            .iter()
            .copied()
            .filter(|x| !locked.contains(x) && can_leave(side, *x))
            .collect();
        if free.is_empty() {
            break;
        }
        let gains: BTreeMap<usize, i64> = free.iter().map(|&x| (x, gain_of(side, x))).collect();
        let mut choice: Option<(i64, Vec<usize>)> = None;
        let mut consider = |g: i64, moved: Vec<usize>| {
            if choice.as_ref().is_none_or(|(bg, _)| g > *bg) {
                choice = Some((g, moved));
            }
        };
        for &x in &free {
            let to = other(side[x]);
            if fill[to] + units.size[x] <= max_size {
                consider(gains[&x], vec![x]);
            }
        }
        let top = |k: usize| {
            let mut v: Vec<usize> = free.iter().copied().filter(|&x| side[x] == k).collect();
            v.sort_by_key(|x| (-gains[x], *x));
            v.truncate(SWAP_CANDIDATES);
            v
        };
        for &x in &top(s) {
            for &y in &top(t) {
                let (sx, sy) = (units.size[x], units.size[y]);
                if fill[s] - sx + sy > max_size || fill[t] - sy + sx > max_size {
                    continue;
                }
                let e = units.adj[x].get(&y).copied().unwrap_or_default();
                if e.out > 0 {
                    // x would sit in t feeding y in s
                    continue;
                }
                consider(gains[&x] + gains[&y] - 2 * (e.out + e.inc) as i64, vec![x, y]);
            }
        }
        let Some((g, moved)) = choice else { break };
        for &x in &moved {
            let to = other(side[x]);
            fill[side[x]] -= units.size[x];
            fill[to] += units.size[x];
            side[x] = to;
            locked.insert(x);
        }
        total += g;
        history.push(moved);
        if total > best {
            best = total;
            best_len = history.len();
        }
    }
    // undo everything past the best prefix
    for (x, k) in original {
        if side[x] != k {
            fill[side[x]] -= units.size[x];
            fill[k] += units.size[x];
            side[x] = k;
        }
    }
    for moved in &history[..best_len] {
        for &x in moved {
            let to = other(side[x]);
            fill[side[x]] -= units.size[x];
            fill[to] += units.size[x];
            side[x] = to;
        }
    }
    best as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{contracted_is_acyclic, pre_group, singleton_groups};

    /// Two 4-cliques (edges from lower to higher index inside each) and one
    /// bridge; clique members are interleaved so topological packing starts
    /// from the worst split.
    pub(crate) fn cliques() -> PartGraph {
        let a = [0, 2, 4, 6];
        let b = [1, 3, 5, 7];
        let mut edges = Vec::new();
        for c in [a, b] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((c[i], c[j]));
                }
            }
        }
        edges.push((6, 7));
        PartGraph::new(8, &edges)
    }

    /// Minimum cut over every set partition with blocks of at most `cap`
    /// nodes whose contracted graph is acyclic.
    fn brute_force_min_cut(pg: &PartGraph, cap: usize) -> usize {
        fn rec(pg: &PartGraph, cap: usize, i: usize, a: &mut Vec<usize>, sizes: &mut Vec<usize>, best: &mut usize) {
            if i == pg.len() {
                if contracted_is_acyclic(pg, a, sizes.len()) {
                    *best = (*best).min(cut_size(pg, a));
                }
                return;
            }
            for k in 0..=sizes.len() {
                if k == sizes.len() {
                    sizes.push(0);
                }
                if sizes[k] < cap {
                    sizes[k] += 1;
                    a[i] = k;
                    rec(pg, cap, i + 1, a, sizes, best);
                    sizes[k] -= 1;
                }
                if sizes[k] == 0 {
                    sizes.pop();
                }
            }
        }
        let mut best = usize::MAX;
        rec(pg, cap, 0, &mut vec![0; pg.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn cliques_reach_brute_force_optimum() {
        let pg = cliques();
        let optimum = brute_force_min_cut(&pg, 4);
        assert_eq!(optimum, 1);
        let groups = singleton_groups(8);
        // index-order packing interleaves the cliques
        let init = vec![0, 0, 0, 0, 1, 1, 1, 1];
        assert!(cut_size(&pg, &init) > optimum);
        let p = KernighanParams {
            max_size: 4,
            max_passes: 10,
        };
        let (a, _) = kernighan_refine(&pg, &groups, init, &p);
        assert_eq!(cut_size(&pg, &a), optimum);
        assert!(contracted_is_acyclic(&pg, &a, 2));
    }

    #[test]
    fn refinement_keeps_invariants_on_random_dags() {
        use rand::{RngExt, SeedableRng};
        for seed in 0..30u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(5..60);
            let mut edges = Vec::new();
            for v in 1..n {
                for _ in 0..rng.random_range(1..4) {
                    edges.push((rng.random_range(0..v), v));
                }
            }
            let pg = PartGraph::new(n, &edges);
            for cap in [1, 3, 8] {
                for groups in [singleton_groups(n), pre_group(&pg, cap)] {
                    let init = initial_assignment(&pg, &groups, cap);
                    let before = cut_size(&pg, &init);
                    let p = KernighanParams {
                        max_size: cap,
                        max_passes: 10,
                    };
                    let (a, _) = kernighan_refine(&pg, &groups, init, &p);
                    assert!(cut_size(&pg, &a) <= before);
                    let plan = crate::partition::SupernodePlan::from_assignment(&pg, &a);
                    plan.validate(&pg, cap).unwrap();
                    for g in &groups {
                        assert!(g.members.iter().all(|&m| a[m] == a[g.members[0]]));
                    }
                }
            }
        }
    }
}
