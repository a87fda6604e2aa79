//! Dependency trees, typed arcs and dependency graphs.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Structural problems found in a head array.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree has {found} heads, sentence has {expected} tokens")]
    LengthMismatch { expected: usize, found: usize },
    #[error("tree has {heads} heads but {labels} labels")]
    LabelMismatch { heads: usize, labels: usize },
    #[error("head {head} of token {token} is out of range")]
    HeadOutOfRange { token: usize, head: usize },
    #[error("tree has no root")]
    NoRoot,
    #[error("tree has multiple roots: {0:?}")]
    MultipleRoots(Vec<usize>),
    #[error("tree contains a cycle through tokens {0:?}")]
    Cycle(Vec<usize>),
}

/// Checks a head array (`heads[i]` is the head of token `i + 1`, 0 is ROOT).
///
/// Violations are reported in the order: out-of-range head, root count,
/// cycle.
pub fn validate_heads(heads: &[usize]) -> Result<(), TreeError> {
    let n = heads.len();
    if n == 0 {
        return Ok(());
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(TreeError::HeadOutOfRange { token: i + 1, head: h });
        }
    }
    let roots: Vec<usize> = (1..=n).filter(|&m| heads[m - 1] == 0).collect();
    match roots.len() {
        0 => {}
        1 => {}
        _ => return Err(TreeError::MultipleRoots(roots)),
    }

    // 0 = unvisited, 1 = on current path, 2 = known to reach ROOT.
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            cur = heads[cur - 1];
        }
        if state[cur] == 1 {
            let pos = path.iter().position(|&t| t == cur).unwrap();
            let mut cycle = path[pos..].to_vec();
            cycle.sort_unstable();
            return Err(TreeError::Cycle(cycle));
        }
        for t in path {
            state[t] = 2;
        }
    }
    if roots.is_empty() {
        // Unreachable for non-empty arrays without cycles, kept for clarity.
        return Err(TreeError::NoRoot);
    }
    Ok(())
}

/// A Basic dependency tree: one head and one label per token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependencyTree {
    heads: Vec<usize>,
    labels: Vec<String>,
}

impl DependencyTree {
    /// Builds a validated tree.
    pub fn new(heads: Vec<usize>, labels: Vec<String>) -> Result<Self, TreeError> {
        let tree = DependencyTree::new_unchecked(heads, labels)?;
        validate_heads(&tree.heads)?;
        Ok(tree)
    }

    /// Builds a tree without structural validation. Only the label count is
    /// checked; use [`validate_tree`] before relying on tree invariants.
    pub fn new_unchecked(heads: Vec<usize>, labels: Vec<String>) -> Result<Self, TreeError> {
        if heads.len() != labels.len() {
            return Err(TreeError::LabelMismatch {
                heads: heads.len(),
                labels: labels.len(),
            });
        }
        Ok(DependencyTree { heads, labels })
    }

    /// Validated tree where every label is `label`.
    pub fn with_uniform_label(heads: Vec<usize>, label: &str) -> Result<Self, TreeError> {
        let labels = vec![label.to_string(); heads.len()];
        DependencyTree::new(heads, labels)
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Head of 1-based token `m`.
    pub fn head(&self, m: usize) -> usize {
        self.heads[m - 1]
    }

    /// Label of the arc entering 1-based token `m`.
    pub fn label(&self, m: usize) -> &str {
        &self.labels[m - 1]
    }

    /// The single token attached to ROOT, if any.
    pub fn root_child(&self) -> Option<usize> {
        self.heads.iter().position(|&h| h == 0).map(|i| i + 1)
    }

    /// Dependents of `h` (0 for ROOT) in linear order.
    pub fn children(&self, h: usize) -> Vec<usize> {
        (1..=self.len()).filter(|&m| self.heads[m - 1] == h).collect()
    }

    /// True if `anc` dominates `node` (reflexively).
    pub fn dominates(&self, anc: usize, node: usize) -> bool {
        let mut cur = node;
        let mut steps = 0;
        loop {
            if cur == anc {
                return true;
            }
            if cur == 0 || steps > self.len() {
                return false;
            }
            cur = self.heads[cur - 1];
            steps += 1;
        }
    }
}

/// Validates a tree against a sentence length.
pub fn validate_tree(tree: &DependencyTree, n: usize) -> Result<(), TreeError> {
    if tree.len() != n {
        return Err(TreeError::LengthMismatch {
            expected: n,
            found: tree.len(),
        });
    }
    validate_heads(&tree.heads)
}

/// True iff every token strictly between the endpoints of each arc is
/// dominated by the arc's head.
pub fn is_projective(tree: &DependencyTree) -> Result<bool, TreeError> {
    validate_heads(tree.heads())?;
    for m in 1..=tree.len() {
        let h = tree.head(m);
        let (lo, hi) = if h < m { (h, m) } else { (m, h) };
        for k in lo + 1..hi {
            if !tree.dominates(h, k) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A typed dependency ⟨type, parent, child⟩.
///
/// Ordering is by child, then parent, then type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependencyArc {
    child: usize,
    parent: usize,
    dep_type: String,
}

impl DependencyArc {
    /// Panics if `child` is 0 or equal to `parent`.
    pub fn new(dep_type: impl Into<String>, parent: usize, child: usize) -> Self {
        assert!(child >= 1, "arc child must be a token");
        assert_ne!(parent, child, "arc cannot be a self-loop");
        DependencyArc {
            child,
            parent,
            dep_type: dep_type.into(),
        }
    }

    pub fn try_new(dep_type: impl Into<String>, parent: usize, child: usize) -> Option<Self> {
        if child == 0 || parent == child {
            None
        } else {
            Some(DependencyArc::new(dep_type, parent, child))
        }
    }

    pub fn dep_type(&self) -> &str {
        &self.dep_type
    }

    pub fn parent(&self) -> usize {
        self.parent
    }

    pub fn child(&self) -> usize {
        self.child
    }
}

impl fmt::Display for DependencyArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.dep_type, self.parent, self.child)
    }
}

/// A set of typed arcs. Children may have several parents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DependencyGraph {
    arcs: BTreeSet<DependencyArc>,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Returns false if the arc was already present.
    pub fn insert(&mut self, arc: DependencyArc) -> bool {
        self.arcs.insert(arc)
    }

    pub fn remove(&mut self, arc: &DependencyArc) -> bool {
        self.arcs.remove(arc)
    }

    pub fn contains(&self, arc: &DependencyArc) -> bool {
        self.arcs.contains(arc)
    }

    /// Arcs in (child, parent, type) order.
    pub fn iter(&self) -> impl Iterator<Item = &DependencyArc> {
        self.arcs.iter()
    }

    pub fn arcs(&self) -> &BTreeSet<DependencyArc> {
        &self.arcs
    }

    /// Arcs leaving `parent`, ordered by child.
    pub fn out_arcs(&self, parent: usize) -> Vec<&DependencyArc> {
        self.arcs.iter().filter(|a| a.parent == parent).collect()
    }

    /// Arcs entering `child`.
    pub fn in_arcs(&self, child: usize) -> impl Iterator<Item = &DependencyArc> {
        let lo = DependencyArc {
            child,
            parent: 0,
            dep_type: String::new(),
        };
        self.arcs.range(lo..).take_while(move |a| a.child == child)
    }
}

impl FromIterator<DependencyArc> for DependencyGraph {
    fn from_iter<I: IntoIterator<Item = DependencyArc>>(iter: I) -> Self {
        DependencyGraph {
            arcs: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a DependencyGraph {
    type Item = &'a DependencyArc;
    type IntoIter = std::collections::btree_set::Iter<'a, DependencyArc>;

    fn into_iter(self) -> Self::IntoIter {
        self.arcs.iter()
    }
}

/// One arc ⟨labels[i], heads[i], i⟩ per token.
pub fn tree_to_graph(tree: &DependencyTree) -> DependencyGraph {
    (1..=tree.len())
        .map(|m| DependencyArc::new(tree.label(m), tree.head(m), m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(heads: &[usize]) -> DependencyTree {
        DependencyTree::new_unchecked(heads.to_vec(), vec!["dep".into(); heads.len()]).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert_eq!(validate_tree(&tree(&[0, 1, 2]), 3), Ok(()));
        assert_eq!(validate_tree(&tree(&[2, 1]), 2), Err(TreeError::Cycle(vec![1, 2])));
        assert_eq!(
            validate_tree(&tree(&[0, 0]), 2),
            Err(TreeError::MultipleRoots(vec![1, 2]))
        );
        assert_eq!(
            validate_tree(&tree(&[0, 5]), 2),
            Err(TreeError::HeadOutOfRange { token: 2, head: 5 })
        );
        assert_eq!(
            validate_tree(&tree(&[0]), 2),
            Err(TreeError::LengthMismatch { expected: 2, found: 1 })
        );
        assert_eq!(validate_tree(&tree(&[1]), 1), Err(TreeError::Cycle(vec![1])));
    }

    #[test]
    fn projectivity_examples() {
        assert!(is_projective(&tree(&[0, 1, 2, 3])).unwrap());
        assert!(!is_projective(&tree(&[3, 0, 4, 2])).unwrap());
        assert!(is_projective(&tree(&[2, 0, 2])).unwrap());
        assert!(is_projective(&tree(&[2, 1])).is_err());
    }

    #[test]
    fn tree_to_graph_examples() {
        let t = DependencyTree::new(vec![0], vec!["root".into()]).unwrap();
        let g = tree_to_graph(&t);
        assert_eq!(g.iter().cloned().collect::<Vec<_>>(), vec![DependencyArc::new("root", 0, 1)]);

        let t = DependencyTree::new(vec![2, 0], vec!["det".into(), "root".into()]).unwrap();
        let g = tree_to_graph(&t);
        assert!(g.contains(&DependencyArc::new("det", 2, 1)));
        assert!(g.contains(&DependencyArc::new("root", 0, 2)));
        assert_eq!(g.len(), 2);

        let t = DependencyTree::new(vec![], vec![]).unwrap();
        assert!(tree_to_graph(&t).is_empty());
    }

    #[test]
    fn graph_set_semantics_and_in_arcs() {
        let mut g = DependencyGraph::new();
        assert!(g.insert(DependencyArc::new("nsubj", 2, 1)));
        assert!(!g.insert(DependencyArc::new("nsubj", 2, 1)));
        g.insert(DependencyArc::new("nsubj", 4, 1));
        g.insert(DependencyArc::new("root", 0, 2));
        assert_eq!(g.in_arcs(1).count(), 2);
        assert_eq!(g.in_arcs(2).count(), 1);
        assert_eq!(g.in_arcs(3).count(), 0);
    }

    // Brute-force oracle: follow heads from every token for at most n steps.
    fn brute_valid(heads: &[usize]) -> bool {
        let n = heads.len();
        if heads.iter().any(|&h| h > n) {
            return false;
        }
        if heads.iter().filter(|&&h| h == 0).count() != 1 {
            return false;
        }
        (1..=n).all(|start| {
            let mut cur = start;
            for _ in 0..=n {
                if cur == 0 {
                    return true;
                }
                cur = heads[cur - 1];
            }
            false
        })
    }

    fn all_head_arrays(n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    (0..=n).map(move |h| {
                        let mut q = p.clone();
                        q.push(h);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn validate_matches_brute_force_exhaustively() {
        for n in 1..=4 {
            for heads in all_head_arrays(n) {
                assert_eq!(
                    validate_heads(&heads).is_ok(),
                    brute_valid(&heads),
                    "heads {heads:?}"
                );
            }
        }
    }

    fn crossing_free(heads: &[usize]) -> bool {
        let arcs: Vec<(usize, usize)> = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| (h.min(i + 1), h.max(i + 1)))
            .collect();
        for &(a, b) in &arcs {
            for &(c, d) in &arcs {
                if a < c && c < b && b < d {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn projectivity_matches_pairwise_crossing_exhaustively() {
        for n in 1..=5 {
            for heads in all_head_arrays(n) {
                if !brute_valid(&heads) {
                    continue;
                }
                assert_eq!(
                    is_projective(&tree(&heads)).unwrap(),
                    crossing_free(&heads),
                    "heads {heads:?}"
                );
            }
        }
    }

    #[test]
    fn tree_to_graph_injective_on_small_trees() {
        let labels = ["a", "b"];
        let mut seen = std::collections::HashMap::new();
        for n in 1..=3 {
            for heads in all_head_arrays(n) {
                if !brute_valid(&heads) {
                    continue;
                }
                for mask in 0..(1usize << n) {
                    let ls: Vec<String> =
                        (0..n).map(|i| labels[(mask >> i) & 1].to_string()).collect();
                    let t = DependencyTree::new(heads.clone(), ls).unwrap();
                    let g = tree_to_graph(&t);
                    if let Some(prev) = seen.insert(g, t.clone()) {
                        panic!("{prev:?} and {t:?} map to the same graph");
                    }
                }
            }
        }
    }
}
