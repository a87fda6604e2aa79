//! Graph-based decoding.
//!
//! Arc scores are label-reduced (`best(h, m)` is the maximum over labels)
//! before decoding. All decoders return trees with exactly one ROOT child.
//! Ties are resolved deterministically by taking the first maximum in
//! ascending split/head order.

use std::sync::Arc;

use crate::features::{
    arc_family_items, grandparent_items, sibling_items, ArcContext, FeatureBuffer, TemplateConfig, Weights,
};
use crate::learn::Model;
use crate::sentence::Sentence;
use crate::tree::DependencyTree;
use crate::{Error, Result};

const NEG: f64 = f64::NEG_INFINITY;

/// Labeled first-order scores `s[h][m][label]` plus the label-maximized
/// reduction.
#[derive(Clone, Debug)]
pub struct ArcScores {
    n: usize,
    labels: Arc<[String]>,
    scores: Vec<f64>,
    best: Vec<f64>,
    best_label: Vec<usize>,
}

impl ArcScores {
    /// Builds scores from `f(h, m, label_index)` for `h ∈ 0..=n`,
    /// `m ∈ 1..=n`, `h ≠ m`.
    pub fn new(n: usize, labels: Arc<[String]>, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        assert!(!labels.is_empty(), "label inventory must not be empty");
        let l = labels.len();
        let side = n + 1;
        let mut scores = vec![NEG; side * side * l];
        let mut best = vec![NEG; side * side];
        let mut best_label = vec![0; side * side];
        for h in 0..=n {
            for m in 1..=n {
                if h == m {
                    continue;
                }
                let base = (h * side + m) * l;
                let mut arg = 0;
                let mut top = NEG;
                for li in 0..l {
                    let s = f(h, m, li);
                    assert!(s.is_finite(), "arc score ({h}, {m}, {li}) is not finite");
                    scores[base + li] = s;
                    if li == 0 || s > top {
                        top = s;
                        arg = li;
                    }
                }
                best[h * side + m] = top;
                best_label[h * side + m] = arg;
            }
        }
        ArcScores {
            n,
            labels,
            scores,
            best,
            best_label,
        }
    }

    /// Single-label scores from `f(h, m)`; the label is `dep`.
    pub fn unlabeled(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        ArcScores::new(n, Arc::from(vec!["dep".to_string()]), |h, m, _| f(h, m))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &Arc<[String]> {
        &self.labels
    }

    pub fn score(&self, h: usize, m: usize, label: usize) -> f64 {
        self.scores[(h * (self.n + 1) + m) * self.labels.len() + label]
    }

    /// Label-maximized score of `h → m`.
    #[inline]
    pub fn best(&self, h: usize, m: usize) -> f64 {
        self.best[h * (self.n + 1) + m]
    }

    pub fn best_label(&self, h: usize, m: usize) -> usize {
        self.best_label[h * (self.n + 1) + m]
    }

    /// Attaches argmax labels to a head array.
    pub fn labeled_tree(&self, heads: Vec<usize>) -> DependencyTree {
        let labels = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| self.labels[self.best_label(h, i + 1)].clone())
            .collect();
        DependencyTree::new(heads, labels).expect("decoder produced an invalid tree")
    }
}

/// Consecutive-sibling scores `s2[h][s][m]`; `s = None` marks the first
/// child on a side.
#[derive(Clone, Debug)]
pub struct SiblingScores {
    n: usize,
    scores: Vec<f64>,
}

impl SiblingScores {
    pub fn zeros(n: usize) -> Self {
        SiblingScores {
            n,
            scores: vec![0.0; (n + 1) * (n + 2) * (n + 1)],
        }
    }

    /// Fills every valid `(h, s, m)` from `f`.
    pub fn new(n: usize, mut f: impl FnMut(usize, Option<usize>, usize) -> f64) -> Self {
        let mut s = SiblingScores::zeros(n);
        for h in 0..=n {
            for m in 1..=n {
                if h == m {
                    continue;
                }
                s.set(h, None, m, f(h, None, m));
                let (lo, hi) = if h < m { (h, m) } else { (m, h) };
                for sib in lo + 1..hi {
                    s.set(h, Some(sib), m, f(h, Some(sib), m));
                }
            }
        }
        s
    }

    fn idx(&self, h: usize, s: Option<usize>, m: usize) -> usize {
        let s = s.unwrap_or(self.n + 1);
        (h * (self.n + 2) + s) * (self.n + 1) + m
    }

    #[inline]
    pub fn get(&self, h: usize, s: Option<usize>, m: usize) -> f64 {
        self.scores[self.idx(h, s, m)]
    }

    pub fn set(&mut self, h: usize, s: Option<usize>, m: usize, v: f64) {
        assert!(v.is_finite());
        let i = self.idx(h, s, m);
        self.scores[i] = v;
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Grandparent scores `s3[g][h][m]` for chains `g → h → m`.
#[derive(Clone, Debug)]
pub struct GrandparentScores {
    n: usize,
    scores: Vec<f64>,
}

impl GrandparentScores {
    pub fn zeros(n: usize) -> Self {
        GrandparentScores {
            n,
            scores: vec![0.0; (n + 1).pow(3)],
        }
    }

    pub fn new(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut s = GrandparentScores::zeros(n);
        for g in 0..=n {
            for h in 1..=n {
                for m in 1..=n {
                    if g != h && h != m && g != m {
                        s.set(g, h, m, f(g, h, m));
                    }
                }
            }
        }
        s
    }

    #[inline]
    pub fn get(&self, g: usize, h: usize, m: usize) -> f64 {
        self.scores[(g * (self.n + 1) + h) * (self.n + 1) + m]
    }

    pub fn set(&mut self, g: usize, h: usize, m: usize, v: f64) {
        assert!(v.is_finite());
        let n1 = self.n + 1;
        self.scores[(g * n1 + h) * n1 + m] = v;
    }
}

/// Children lists of a head array, in linear order; index 0 is ROOT.
fn children_of(heads: &[usize]) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); heads.len() + 1];
    for (i, &h) in heads.iter().enumerate() {
        ch[h].push(i + 1);
    }
    ch
}

/// Sum of consecutive-sibling parts of a tree.
pub fn sibling_score(heads: &[usize], sib: &SiblingScores) -> f64 {
    let ch = children_of(heads);
    let mut total = 0.0;
    for (h, kids) in ch.iter().enumerate() {
        let split = kids.partition_point(|&c| c < h);
        let mut prev = None;
        for &m in kids[..split].iter().rev() {
            total += sib.get(h, prev, m);
            prev = Some(m);
        }
        let mut prev = None;
        for &m in &kids[split..] {
            total += sib.get(h, prev, m);
            prev = Some(m);
        }
    }
    total
}

/// Sum of grandparent parts of a tree.
pub fn grandparent_score(heads: &[usize], gp: &GrandparentScores) -> f64 {
    let mut total = 0.0;
    for (i, &h) in heads.iter().enumerate() {
        if h != 0 {
            total += gp.get(heads[h - 1], h, i + 1);
        }
    }
    total
}

/// Total score of a tree: label-maximized arcs plus optional sibling and
/// grandparent parts, summed in token order.
pub fn tree_score(
    heads: &[usize],
    arc: &ArcScores,
    sib: Option<&SiblingScores>,
    gp: Option<&GrandparentScores>,
) -> f64 {
    let mut total: f64 = heads.iter().enumerate().map(|(i, &h)| arc.best(h, i + 1)).sum();
    if let Some(sib) = sib {
        total += sibling_score(heads, sib);
    }
    if let Some(gp) = gp {
        total += grandparent_score(heads, gp);
    }
    total
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Left,
    Right,
}

/// Dense span charts indexed by `(i, j)` over tokens `1..=n`.
struct Chart {
    side: usize,
    val: Vec<f64>,
    arg: Vec<usize>,
}

impl Chart {
    fn new(n: usize) -> Self {
        let side = n + 2;
        Chart {
            side,
            val: vec![NEG; side * side],
            arg: vec![0; side * side],
        }
    }

    #[inline]
    fn v(&self, i: usize, j: usize) -> f64 {
        self.val[i * self.side + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64, a: usize) {
        self.val[i * self.side + j] = v;
        self.arg[i * self.side + j] = a;
    }

    #[inline]
    fn a(&self, i: usize, j: usize) -> usize {
        self.arg[i * self.side + j]
    }
}

struct EisnerCharts {
    c_left: Chart,
    c_right: Chart,
    i_left: Chart,
    i_right: Chart,
    sib: Chart,
}

impl EisnerCharts {
    fn new(n: usize) -> Self {
        let mut c = EisnerCharts {
            c_left: Chart::new(n),
            c_right: Chart::new(n),
            i_left: Chart::new(n),
            i_right: Chart::new(n),
            sib: Chart::new(n),
        };
        for i in 1..=n + 1 {
            c.c_left.set(i, i, 0.0, i);
            c.c_right.set(i, i, 0.0, i);
        }
        c
    }

    fn back_complete(&self, i: usize, j: usize, dir: Dir, heads: &mut [usize], second_order: bool) {
        if i >= j {
            return;
        }
        match dir {
            Dir::Right => {
                let k = self.c_right.a(i, j);
                self.back_incomplete(i, k, Dir::Right, heads, second_order);
                self.back_complete(k, j, Dir::Right, heads, second_order);
            }
            Dir::Left => {
                let k = self.c_left.a(i, j);
                self.back_complete(i, k, Dir::Left, heads, second_order);
                self.back_incomplete(k, j, Dir::Left, heads, second_order);
            }
        }
    }

    fn back_incomplete(&self, i: usize, j: usize, dir: Dir, heads: &mut [usize], second_order: bool) {
        match dir {
            Dir::Right => {
                heads[j - 1] = i;
                let k = self.i_right.a(i, j);
                if !second_order {
                    self.back_complete(i, k, Dir::Right, heads, false);
                    self.back_complete(k + 1, j, Dir::Left, heads, false);
                } else if k == i {
                    self.back_complete(i + 1, j, Dir::Left, heads, true);
                } else {
                    self.back_incomplete(i, k, Dir::Right, heads, true);
                    self.back_sibling(k, j, heads);
                }
            }
            Dir::Left => {
                heads[i - 1] = j;
                let k = self.i_left.a(i, j);
                if !second_order {
                    self.back_complete(i, k, Dir::Right, heads, false);
                    self.back_complete(k + 1, j, Dir::Left, heads, false);
                } else if k == j {
                    self.back_complete(i, j - 1, Dir::Right, heads, true);
                } else {
                    self.back_sibling(i, k, heads);
                    self.back_incomplete(k, j, Dir::Left, heads, true);
                }
            }
        }
    }

    fn back_sibling(&self, i: usize, j: usize, heads: &mut [usize]) {
        let k = self.sib.a(i, j);
        self.back_complete(i, k, Dir::Right, heads, true);
        self.back_complete(k + 1, j, Dir::Left, heads, true);
    }

    fn fill_complete(&mut self, i: usize, j: usize) {
        let (mut best, mut arg) = (NEG, i);
        for k in i..j {
            let v = self.c_left.v(i, k) + self.i_left.v(k, j);
            if v > best {
                best = v;
                arg = k;
            }
        }
        self.c_left.set(i, j, best, arg);
        let (mut best, mut arg) = (NEG, j);
        for k in i + 1..=j {
            let v = self.i_right.v(i, k) + self.c_right.v(k, j);
            if v > best {
                best = v;
                arg = k;
            }
        }
        self.c_right.set(i, j, best, arg);
    }

    /// Picks the single ROOT child and returns the backtracked heads.
    fn attach_root(
        &self,
        n: usize,
        root_score: impl Fn(usize) -> f64,
        second_order: bool,
    ) -> Vec<usize> {
        let (mut best, mut root) = (NEG, 1);
        for r in 1..=n {
            let v = root_score(r) + self.c_left.v(1, r) + self.c_right.v(r, n);
            if v > best {
                best = v;
                root = r;
            }
        }
        let mut heads = vec![0; n];
        heads[root - 1] = 0;
        self.back_complete(1, root, Dir::Left, &mut heads, second_order);
        self.back_complete(root, n, Dir::Right, &mut heads, second_order);
        heads
    }
}

/// Exact first-order projective decoding (Eisner span DP, single root).
pub fn decode_projective(scores: &ArcScores) -> DependencyTree {
    let n = scores.n();
    if n == 0 {
        return DependencyTree::new(vec![], vec![]).unwrap();
    }
    let mut ch = EisnerCharts::new(n);
    for len in 1..n {
        for i in 1..=n - len {
            let j = i + len;
            let (mut best, mut arg) = (NEG, i);
            for k in i..j {
                let v = ch.c_right.v(i, k) + ch.c_left.v(k + 1, j);
                if v > best {
                    best = v;
                    arg = k;
                }
            }
            ch.i_left.set(i, j, best + scores.best(j, i), arg);
            ch.i_right.set(i, j, best + scores.best(i, j), arg);
            ch.fill_complete(i, j);
        }
    }
    let heads = ch.attach_root(n, |r| scores.best(0, r), false);
    scores.labeled_tree(heads)
}

/// Exact projective decoding with first-order arcs plus consecutive-sibling
/// parts (second-order span DP, single root).
pub fn decode_projective_sibling(arc: &ArcScores, sib: &SiblingScores) -> DependencyTree {
    let n = arc.n();
    if n == 0 {
        return DependencyTree::new(vec![], vec![]).unwrap();
    }
    let mut ch = EisnerCharts::new(n);
    for len in 1..n {
        for i in 1..=n - len {
            let j = i + len;
            // Sibling span: i and j are adjacent modifiers of an outside head.
            let (mut best, mut arg) = (NEG, i);
            for k in i..j {
                let v = ch.c_right.v(i, k) + ch.c_left.v(k + 1, j);
                if v > best {
                    best = v;
                    arg = k;
                }
            }
            ch.sib.set(i, j, best, arg);

            // i → j: j is either i's first right child or follows sibling k.
            let mut best = ch.c_left.v(i + 1, j) + sib.get(i, None, j);
            let mut arg = i;
            for k in i + 1..j {
                let v = ch.i_right.v(i, k) + ch.sib.v(k, j) + sib.get(i, Some(k), j);
                if v > best {
                    best = v;
                    arg = k;
                }
            }
            ch.i_right.set(i, j, best + arc.best(i, j), arg);

            // j → i: i is either j's first left child or follows sibling k.
            let mut best = ch.c_right.v(i, j - 1) + sib.get(j, None, i);
            let mut arg = j;
            for k in i + 1..j {
                let v = ch.sib.v(i, k) + ch.i_left.v(k, j) + sib.get(j, Some(k), i);
                if v > best {
                    best = v;
                    arg = k;
                }
            }
            ch.i_left.set(i, j, best + arc.best(j, i), arg);

            ch.fill_complete(i, j);
        }
    }
    let heads = ch.attach_root(n, |r| arc.best(0, r) + sib.get(0, None, r), true);
    arc.labeled_tree(heads)
}

/// Maximum spanning arborescence rooted at node 0 (Chu-Liu-Edmonds).
/// `w[h][m]` is the score of `h → m`; `NEG_INFINITY` forbids an arc.
/// Returns the parent of every node; entry 0 is unused.
fn chu_liu_edmonds(w: &[Vec<f64>]) -> Vec<usize> {
    let size = w.len();
    let mut parent = vec![0usize; size];
    for m in 1..size {
        let (mut best, mut arg) = (NEG, usize::MAX);
        for (h, row) in w.iter().enumerate() {
            if h != m && (arg == usize::MAX || row[m] > best) {
                best = row[m];
                arg = h;
            }
        }
        parent[m] = arg;
    }

    let Some(cycle) = find_cycle(&parent) else {
        return parent;
    };
    let mut in_cycle = vec![false; size];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // Contracted graph: surviving nodes keep their order, the cycle becomes
    // the last node.
    let mut new_id = vec![usize::MAX; size];
    let mut old_id = Vec::new();
    for v in 0..size {
        if !in_cycle[v] {
            new_id[v] = old_id.len();
            old_id.push(v);
        }
    }
    let c = old_id.len();
    let new_size = c + 1;
    let mut w2 = vec![vec![NEG; new_size]; new_size];
    let mut enter = vec![usize::MAX; size];
    let mut leave = vec![usize::MAX; size];
    for &u in &old_id {
        for &v in &old_id {
            if u != v {
                w2[new_id[u]][new_id[v]] = w[u][v];
            }
        }
        let (mut best, mut arg) = (NEG, usize::MAX);
        for &v in &cycle {
            let s = w[u][v] - w[parent[v]][v];
            if arg == usize::MAX || s > best {
                best = s;
                arg = v;
            }
        }
        w2[new_id[u]][c] = best;
        enter[u] = arg;
        if u != 0 {
            let (mut best, mut arg) = (NEG, usize::MAX);
            for &v in &cycle {
                if arg == usize::MAX || w[v][u] > best {
                    best = w[v][u];
                    arg = v;
                }
            }
            w2[c][new_id[u]] = best;
            leave[u] = arg;
        }
    }

    let sub = chu_liu_edmonds(&w2);
    for &u in &old_id {
        if u == 0 {
            continue;
        }
        let p = sub[new_id[u]];
        parent[u] = if p == c { leave[u] } else { old_id[p] };
    }
    let entering_from = old_id[sub[c]];
    parent[enter[entering_from]] = entering_from;
    parent
}

fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let size = parent.len();
    let mut state = vec![0u8; size];
    state[0] = 2;
    for start in 1..size {
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            cur = parent[cur];
        }
        if state[cur] == 1 {
            let pos = path.iter().position(|&v| v == cur).unwrap();
            return Some(path[pos..].to_vec());
        }
        for v in path {
            state[v] = 2;
        }
    }
    None
}

/// Exact first-order non-projective decoding with a single ROOT child.
#[allow(clippy::needless_range_loop)]
pub fn decode_nonprojective(scores: &ArcScores) -> DependencyTree {
    let n = scores.n();
    if n == 0 {
        return DependencyTree::new(vec![], vec![]).unwrap();
    }
    let mut w = vec![vec![NEG; n + 1]; n + 1];
    for (h, row) in w.iter_mut().enumerate() {
        for (m, cell) in row.iter_mut().enumerate().skip(1) {
            if h != m {
                *cell = scores.best(h, m);
            }
        }
    }
    let heads = |parent: Vec<usize>| parent[1..].to_vec();
    let free = heads(chu_liu_edmonds(&w));
    if free.iter().filter(|&&h| h == 0).count() == 1 {
        return scores.labeled_tree(free);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 1..=n {
        let mut wr = w.clone();
        for m in 1..=n {
            if m != r {
                wr[0][m] = NEG;
            }
        }
        let cand = heads(chu_liu_edmonds(&wr));
        let s = tree_score(&cand, scores, None, None);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, cand));
        }
    }
    scores.labeled_tree(best.unwrap().1)
}

/// One accepted hill-climbing move.
#[derive(Clone, Debug, PartialEq)]
pub struct ClimbStep {
    pub token: usize,
    pub old_head: usize,
    pub new_head: usize,
    pub score_before: f64,
    pub score_after: f64,
}

/// Greedy refinement under arc + sibling + grandparent scores: repeatedly
/// applies the best single head change that strictly improves the total
/// while keeping a valid single-rooted tree.
pub fn hill_climb_refine(
    arc: &ArcScores,
    sib: &SiblingScores,
    gp: &GrandparentScores,
    init: &DependencyTree,
) -> DependencyTree {
    hill_climb_traced(arc, sib, gp, init).0
}

/// [`hill_climb_refine`] that also returns every accepted move.
pub fn hill_climb_traced(
    arc: &ArcScores,
    sib: &SiblingScores,
    gp: &GrandparentScores,
    init: &DependencyTree,
) -> (DependencyTree, Vec<ClimbStep>) {
    let n = arc.n();
    let mut heads = init.heads().to_vec();
    let mut current = tree_score(&heads, arc, Some(sib), Some(gp));
    let mut steps = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for m in 1..=n {
            let old = heads[m - 1];
            if old == 0 {
                continue;
            }
            for h in 1..=n {
                if h == m || h == old || dominated_by(&heads, m, h) {
                    continue;
                }
                heads[m - 1] = h;
                let s = tree_score(&heads, arc, Some(sib), Some(gp));
                heads[m - 1] = old;
                if s > current && best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, m, h));
                }
            }
        }
        match best {
            Some((s, m, h)) => {
                steps.push(ClimbStep {
                    token: m,
                    old_head: heads[m - 1],
                    new_head: h,
                    score_before: current,
                    score_after: s,
                });
                heads[m - 1] = h;
                current = s;
            }
            None => break,
        }
    }
    (arc.labeled_tree(heads), steps)
}

/// True if `node` lies in the subtree of `anc`.
fn dominated_by(heads: &[usize], anc: usize, node: usize) -> bool {
    let mut cur = node;
    for _ in 0..=heads.len() {
        if cur == anc {
            return true;
        }
        if cur == 0 {
            return false;
        }
        cur = heads[cur - 1];
    }
    false
}

/// Largest sentence accepted by [`brute_force_decode`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// Visits every valid single-root head array of length `n` (projective
/// only, if requested).
pub fn enumerate_trees(n: usize, projective_only: bool, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    let mut heads = vec![usize::MAX; n + 1];
    enumerate_rec(1, n, projective_only, false, &mut heads, &mut visit);
}

fn enumerate_rec(
    m: usize,
    n: usize,
    projective_only: bool,
    has_root: bool,
    heads: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if m > n {
        if has_root {
            visit(&heads[1..]);
        }
        return;
    }
    for h in 0..=n {
        if h == m || (h == 0 && has_root) {
            continue;
        }
        // Cycle check through already-assigned tokens.
        let mut cur = h;
        while cur != 0 && cur != m && cur < m {
            cur = heads[cur];
        }
        if cur == m {
            continue;
        }
        if projective_only {
            let (a, b) = (h.min(m), h.max(m));
            let crosses = (1..m).any(|j| {
                let (c, d) = (heads[j].min(j), heads[j].max(j));
                (a < c && c < b && b < d) || (c < a && a < d && d < b)
            });
            if crosses {
                continue;
            }
        }
        heads[m] = h;
        enumerate_rec(m + 1, n, projective_only, has_root || h == 0, heads, visit);
        heads[m] = usize::MAX;
    }
}

/// Exhaustive search over all single-root trees (projective only, if
/// flagged), maximizing arc plus optional sibling scores.
pub fn brute_force_decode(
    arc: &ArcScores,
    sib: Option<&SiblingScores>,
    projective_only: bool,
) -> Result<DependencyTree> {
    let n = arc.n();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Config(format!(
            "brute-force decoding supports at most {BRUTE_FORCE_MAX} tokens, got {n}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    enumerate_trees(n, projective_only, |heads| {
        let s = tree_score(heads, arc, sib, None);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, heads.to_vec()));
        }
    });
    Ok(arc.labeled_tree(best.map(|(_, h)| h).unwrap_or_default()))
}

/// Decoding strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decoder {
    Projective,
    NonProjective,
    Sibling,
    SiblingGrandparent,
}

impl Decoder {
    pub fn name(self) -> &'static str {
        match self {
            Decoder::Projective => "proj",
            Decoder::NonProjective => "nonproj",
            Decoder::Sibling => "sib",
            Decoder::SiblingGrandparent => "sib-gp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "proj" => Some(Decoder::Projective),
            "nonproj" => Some(Decoder::NonProjective),
            "sib" => Some(Decoder::Sibling),
            "sib-gp" => Some(Decoder::SiblingGrandparent),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Decoder::Projective => 0,
            Decoder::NonProjective => 1,
            Decoder::Sibling => 2,
            Decoder::SiblingGrandparent => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        [
            Decoder::Projective,
            Decoder::NonProjective,
            Decoder::Sibling,
            Decoder::SiblingGrandparent,
        ]
        .get(c as usize)
        .copied()
    }

    pub fn is_projective(self) -> bool {
        self != Decoder::NonProjective
    }

    pub fn uses_siblings(self) -> bool {
        matches!(self, Decoder::Sibling | Decoder::SiblingGrandparent)
    }
}

impl std::fmt::Display for Decoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Arc scores under arbitrary weights (used during training and parsing).
pub fn score_arcs_with<W: Weights + ?Sized>(
    sentence: &Sentence,
    weights: &W,
    config: &TemplateConfig,
    labels: &Arc<[String]>,
    ctx: &ArcContext<'_>,
) -> Result<ArcScores> {
    let n = sentence.len();
    let l = labels.len();
    let bits = config.hash_bits;
    let side = n + 1;
    let mut table = vec![0.0; side * side * l];
    let mut buf = FeatureBuffer::new();
    let mut states = Vec::new();
    for h in 0..=n {
        for m in 1..=n {
            if h == m {
                continue;
            }
            buf.clear();
            arc_family_items(&mut buf, sentence, h, m, config, ctx)?;
            states.clear();
            states.extend(buf.states());
            let unlabeled: f64 = states.iter().map(|st| weights.weight(st.bucket(bits))).sum();
            let base = (h * side + m) * l;
            for (li, label) in labels.iter().enumerate() {
                let labeled: f64 = states
                    .iter()
                    .map(|st| weights.weight(st.with_label(label).bucket(bits)))
                    .sum();
                table[base + li] = unlabeled + labeled;
            }
        }
    }
    Ok(ArcScores::new(n, labels.clone(), |h, m, li| table[(h * side + m) * l + li]))
}

/// Sibling scores under arbitrary weights.
pub fn score_siblings_with<W: Weights + ?Sized>(
    sentence: &Sentence,
    weights: &W,
    config: &TemplateConfig,
) -> Result<SiblingScores> {
    let n = sentence.len();
    let mut buf = FeatureBuffer::new();
    let mut err = None;
    let s = SiblingScores::new(n, |h, s, m| {
        if h == 0 && s.is_some() {
            return 0.0;
        }
        buf.clear();
        if let Err(e) = sibling_items(&mut buf, sentence, h, m, s) {
            err.get_or_insert(e);
            return 0.0;
        }
        buf.states().map(|st| weights.weight(st.bucket(config.hash_bits))).sum()
    });
    match err {
        Some(e) => Err(e),
        None => Ok(s),
    }
}

/// Grandparent scores under arbitrary weights.
pub fn score_grandparents_with<W: Weights + ?Sized>(
    sentence: &Sentence,
    weights: &W,
    config: &TemplateConfig,
) -> Result<GrandparentScores> {
    let n = sentence.len();
    let mut buf = FeatureBuffer::new();
    let mut err = None;
    let s = GrandparentScores::new(n, |g, h, m| {
        buf.clear();
        if let Err(e) = grandparent_items(&mut buf, sentence, g, h, m) {
            err.get_or_insert(e);
            return 0.0;
        }
        buf.states().map(|st| weights.weight(st.bucket(config.hash_bits))).sum()
    });
    match err {
        Some(e) => Err(e),
        None => Ok(s),
    }
}

/// `s[h][m][l] = w · φ(sentence, h, m, l)` for a trained model.
pub fn score_arcs(sentence: &Sentence, model: &Model, ctx: &ArcContext<'_>) -> Result<ArcScores> {
    score_arcs_with(sentence, model.weights(), model.config(), model.label_arc(), ctx)
}

/// Decodes a sentence with the given weights and decoder.
pub fn decode_with<W: Weights + ?Sized>(
    sentence: &Sentence,
    weights: &W,
    config: &TemplateConfig,
    labels: &Arc<[String]>,
    ctx: &ArcContext<'_>,
    decoder: Decoder,
) -> Result<DependencyTree> {
    let arc = score_arcs_with(sentence, weights, config, labels, ctx)?;
    let sib_scores = |s: &Sentence| -> Result<SiblingScores> {
        if config.enable_second_order {
            score_siblings_with(s, weights, config)
        } else {
            Ok(SiblingScores::zeros(s.len()))
        }
    };
    Ok(match decoder {
        Decoder::Projective => decode_projective(&arc),
        Decoder::NonProjective => decode_nonprojective(&arc),
        Decoder::Sibling => decode_projective_sibling(&arc, &sib_scores(sentence)?),
        Decoder::SiblingGrandparent => {
            let sib = sib_scores(sentence)?;
            let gp = if config.enable_second_order {
                score_grandparents_with(sentence, weights, config)?
            } else {
                GrandparentScores::zeros(sentence.len())
            };
            let init = decode_projective_sibling(&arc, &sib);
            hill_climb_refine(&arc, &sib, &gp, &init)
        }
    })
}

/// Parses with a trained graph model.
pub fn parse(sentence: &Sentence, model: &Model, ctx: &ArcContext<'_>, decoder: Decoder) -> Result<DependencyTree> {
    decode_with(sentence, model.weights(), model.config(), model.label_arc(), ctx, decoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{is_projective, validate_tree};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n2_scores() -> ArcScores {
        ArcScores::unlabeled(2, |h, m| match (h, m) {
            (0, 1) => 5.0,
            (0, 2) => 1.0,
            (1, 2) => 4.0,
            (2, 1) => 3.0,
            _ => unreachable!(),
        })
    }

    fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> ArcScores {
        ArcScores::unlabeled(n, |_, _| rng.gen_range(-10.0..10.0))
    }

    fn random_sib(rng: &mut ChaCha8Rng, n: usize) -> SiblingScores {
        SiblingScores::new(n, |_, _, _| rng.gen_range(-10.0..10.0))
    }

    #[test]
    fn single_token_is_forced() {
        let s = ArcScores::unlabeled(1, |_, _| 3.0);
        assert_eq!(decode_projective(&s).heads(), &[0]);
        assert_eq!(decode_nonprojective(&s).heads(), &[0]);
        assert_eq!(decode_projective_sibling(&s, &SiblingScores::zeros(1)).heads(), &[0]);
        assert_eq!(brute_force_decode(&s, None, true).unwrap().heads(), &[0]);
    }

    #[test]
    fn n2_example() {
        // Enumeration: [0,1] = 5 + 4 = 9, [2,0] = 1 + 3 = 4.
        let s = n2_scores();
        for t in [
            decode_projective(&s),
            decode_nonprojective(&s),
            brute_force_decode(&s, None, false).unwrap(),
        ] {
            assert_eq!(t.heads(), &[0, 1]);
            assert_eq!(tree_score(t.heads(), &s, None, None), 9.0);
        }
    }

    #[test]
    fn uniform_scores_any_tree() {
        let s = ArcScores::unlabeled(5, |_, _| 2.0);
        let t = decode_projective(&s);
        assert!(is_projective(&t).unwrap());
        assert_eq!(tree_score(t.heads(), &s, None, None), 10.0);
    }

    #[test]
    fn single_root_enforced_nonprojective() {
        // ROOT arcs dominate: the unconstrained optimum attaches all to ROOT.
        let s = ArcScores::unlabeled(3, |h, m| match (h, m) {
            (0, _) => 10.0,
            (1, 2) => 1.0,
            (3, 1) => 2.0,
            _ => -5.0,
        });
        let t = decode_nonprojective(&s);
        validate_tree(&t, 3).unwrap();
        let brute = brute_force_decode(&s, None, false).unwrap();
        assert_eq!(
            tree_score(t.heads(), &s, None, None),
            tree_score(brute.heads(), &s, None, None)
        );
        // Brute-force check of the stated maximum: ROOT→3, 3→1, 1→2.
        assert_eq!(t.heads(), &[3, 1, 0]);
    }

    #[test]
    fn labels_follow_argmax() {
        let labels: Arc<[String]> = Arc::from(vec!["a".to_string(), "b".to_string()]);
        let s = ArcScores::new(2, labels, |h, m, l| match (h, m, l) {
            (0, 1, 1) => 5.0,
            (1, 2, 0) => 4.0,
            _ => 0.0,
        });
        let t = decode_projective(&s);
        assert_eq!(t.heads(), &[0, 1]);
        assert_eq!(t.labels(), &["b".to_string(), "a".to_string()]);
    }

    #[test]
    fn enumeration_counts() {
        // n^(n-1) single-root trees; projective counts are 1, 2, 7, 30, 143.
        let proj = [1usize, 2, 7, 30, 143];
        for n in 1..=5 {
            let mut all = 0;
            enumerate_trees(n, false, |_| all += 1);
            assert_eq!(all, n.pow(n as u32 - 1));
            let mut p = 0;
            enumerate_trees(n, true, |h| {
                let t = DependencyTree::with_uniform_label(h.to_vec(), "x").unwrap();
                assert!(is_projective(&t).unwrap());
                p += 1;
            });
            assert_eq!(p, proj[n - 1]);
        }
    }

    #[test]
    fn brute_force_rejects_large() {
        let s = ArcScores::unlabeled(9, |_, _| 0.0);
        assert!(brute_force_decode(&s, None, true).is_err());
    }

    #[test]
    fn decoders_match_brute_force_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=6 {
            for _ in 0..60 {
                let s = random_scores(&mut rng, n);
                let p = decode_projective(&s);
                let bp = brute_force_decode(&s, None, true).unwrap();
                assert_eq!(tree_score(p.heads(), &s, None, None), tree_score(bp.heads(), &s, None, None));
                let np = decode_nonprojective(&s);
                let bnp = brute_force_decode(&s, None, false).unwrap();
                assert_eq!(
                    tree_score(np.heads(), &s, None, None),
                    tree_score(bnp.heads(), &s, None, None)
                );
            }
        }
    }

    #[test]
    fn sibling_decoder_matches_brute_force_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 2..=5 {
            for _ in 0..40 {
                let s = random_scores(&mut rng, n);
                let sib = random_sib(&mut rng, n);
                let t = decode_projective_sibling(&s, &sib);
                let b = brute_force_decode(&s, Some(&sib), true).unwrap();
                assert_eq!(
                    tree_score(t.heads(), &s, Some(&sib), None),
                    tree_score(b.heads(), &s, Some(&sib), None)
                );
            }
        }
    }

    #[test]
    fn zero_siblings_reduce_to_first_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=9 {
            let s = random_scores(&mut rng, n);
            let a = decode_projective(&s);
            let b = decode_projective_sibling(&s, &SiblingScores::zeros(n));
            assert_eq!(tree_score(a.heads(), &s, None, None), tree_score(b.heads(), &s, None, None));
        }
    }

    #[test]
    fn large_sibling_bonus_is_used() {
        // n=3, flat arcs; a big bonus for head 2 having children 1 (first,
        // left) ... here: right side of ROOT-child 1 with siblings 2 then 3.
        let s = ArcScores::unlabeled(3, |_, _| 0.0);
        let mut sib = SiblingScores::zeros(3);
        sib.set(1, Some(2), 3, 50.0);
        let t = decode_projective_sibling(&s, &sib);
        assert_eq!(t.heads(), &[0, 1, 1]);
        let b = brute_force_decode(&s, Some(&sib), true).unwrap();
        assert_eq!(b.heads(), &[0, 1, 1]);
    }

    #[test]
    fn hill_climb_fixed_point_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for n in 2..=8 {
            let s = random_scores(&mut rng, n);
            let sib = random_sib(&mut rng, n);
            let gp = GrandparentScores::new(n, |_, _, _| rng.gen_range(-10.0..10.0));
            let init = decode_projective_sibling(&s, &sib);
            let before = tree_score(init.heads(), &s, Some(&sib), Some(&gp));
            let (out, steps) = hill_climb_traced(&s, &sib, &gp, &init);
            validate_tree(&out, n).unwrap();
            assert_eq!(out.children(0).len(), 1);
            let after = tree_score(out.heads(), &s, Some(&sib), Some(&gp));
            assert!(after >= before);
            for st in &steps {
                assert!(st.score_after > st.score_before);
            }
            // Re-running from the output is a fixed point.
            let (again, more) = hill_climb_traced(&s, &sib, &gp, &out);
            assert!(more.is_empty());
            assert_eq!(again.heads(), out.heads());
        }
    }
}
