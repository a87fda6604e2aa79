//! Basic-to-CCprocessed graph rewriting.
//!
//! The pipeline runs preposition collapsing, conjunction collapsing,
//! conjunct propagation and then the two repair rules for uncollapsed `cc`
//! and `prep` arcs. Every rewrite is logged in a [`TransformTrace`].
//!
//! Only the following subset of the CCprocessed conventions is covered:
//! `prep`+`pobj` collapsing, `cc`+`conj` typing, propagation of
//! `nsubj`, `nsubjpass`, `dobj`, `iobj`, `amod` and `advmod` across
//! conjuncts, and the two repair rules. `pcomp` is never collapsed.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::sentence::Sentence;
use crate::tree::{tree_to_graph, DependencyArc, DependencyGraph, DependencyTree};

/// Relations copied between conjuncts.
pub const PROPAGATED_RELATIONS: [&str; 6] = ["nsubj", "nsubjpass", "dobj", "iobj", "amod", "advmod"];

/// Reading of the uncollapsed-`cc` repair rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Rule1Mode {
    /// `cc(A→B), T(A→C)` becomes `conj_B(A→C)`, where C is the first child of
    /// A to the right of B.
    #[default]
    Corrected,
    /// Adds `conj_B(A→B)` and removes `T(A→C)`, keeping `cc(A→B)`.
    Literal,
}

impl Rule1Mode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "corrected" => Some(Rule1Mode::Corrected),
            "literal" => Some(Rule1Mode::Literal),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule1Mode::Corrected => "corrected",
            Rule1Mode::Literal => "literal",
        }
    }
}

/// Stage toggles for [`basic_to_ccprocessed`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformConfig {
    pub rule1_mode: Rule1Mode,
    pub collapse_preps: bool,
    pub collapse_conj: bool,
    pub propagate: bool,
    pub rule1: bool,
    pub rule2: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            rule1_mode: Rule1Mode::Corrected,
            collapse_preps: true,
            collapse_conj: true,
            propagate: true,
            rule1: true,
            rule2: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    CollapsePrep,
    CollapseConj,
    PropagateDependent,
    PropagateGovernor,
    Rule1,
    Rule2,
}

impl RuleId {
    pub fn name(self) -> &'static str {
        match self {
            RuleId::CollapsePrep => "collapse-prep",
            RuleId::CollapseConj => "collapse-conj",
            RuleId::PropagateDependent => "propagate-dep",
            RuleId::PropagateGovernor => "propagate-gov",
            RuleId::Rule1 => "rule1",
            RuleId::Rule2 => "rule2",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One rewrite: the rule, its variable bindings and the arcs it changed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: RuleId,
    pub bindings: Vec<(&'static str, String)>,
    pub added: Vec<DependencyArc>,
    pub removed: Vec<DependencyArc>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransformTrace {
    steps: Vec<TraceStep>,
}

impl TransformTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn extend(&mut self, other: TransformTrace) {
        self.steps.extend(other.steps);
    }

    /// Re-applies every step, in order, to `input`.
    pub fn replay(&self, input: &DependencyGraph) -> DependencyGraph {
        let mut g = input.clone();
        for step in &self.steps {
            for arc in &step.removed {
                g.remove(arc);
            }
            for arc in &step.added {
                g.insert(arc.clone());
            }
        }
        g
    }

    /// One line per step, e.g. `rule2 A=2 B=4 C=5 +prep_with(2, 5) -prep(2, 4) -pobj(4, 5)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(step.rule.name());
            for (var, value) in &step.bindings {
                let _ = write!(out, " {var}={value}");
            }
            for arc in &step.added {
                let _ = write!(out, " +{arc}");
            }
            for arc in &step.removed {
                let _ = write!(out, " -{arc}");
            }
            out.push('\n');
        }
        out
    }
}

/// Records graph edits as trace steps, skipping no-op inserts and removals.
struct Rewriter<'g> {
    graph: &'g mut DependencyGraph,
    trace: TransformTrace,
}

impl Rewriter<'_> {
    fn apply(&mut self, rule: RuleId, bindings: Vec<(&'static str, String)>, add: Vec<DependencyArc>, remove: Vec<DependencyArc>) -> bool {
        let removed: Vec<_> = remove.into_iter().filter(|a| self.graph.remove(a)).collect();
        let added: Vec<_> = add.into_iter().filter(|a| self.graph.insert(a.clone())).collect();
        if added.is_empty() && removed.is_empty() {
            return false;
        }
        self.trace.steps.push(TraceStep {
            rule,
            bindings,
            added,
            removed,
        });
        true
    }
}

fn lower_form(sentence: &Sentence, i: usize) -> String {
    sentence.form_at(i).to_lowercase()
}

fn arcs_with(graph: &DependencyGraph, label: &str) -> Vec<DependencyArc> {
    graph.iter().filter(|a| a.dep_type() == label).cloned().collect()
}

fn run<F>(graph: &DependencyGraph, f: F) -> (DependencyGraph, TransformTrace)
where
    F: FnOnce(&mut Rewriter<'_>),
{
    let mut out = graph.clone();
    let mut rw = Rewriter {
        graph: &mut out,
        trace: TransformTrace::new(),
    };
    f(&mut rw);
    let trace = rw.trace;
    (out, trace)
}

fn idx(i: usize) -> String {
    i.to_string()
}

/// `prep(A→B) + pobj(B→C)` becomes `prep_b(A→C)`. Every preposition token is
/// consumed once, together with all of its `prep` governors and `pobj`
/// dependents.
pub fn collapse_preps(graph: &DependencyGraph, sentence: &Sentence) -> (DependencyGraph, TransformTrace) {
    run(graph, |rw| {
        let preps: BTreeSet<usize> = arcs_with(rw.graph, "prep").iter().map(|a| a.child()).collect();
        for b in preps {
            let governors: Vec<_> = rw.graph.in_arcs(b).filter(|a| a.dep_type() == "prep").cloned().collect();
            let objects: Vec<_> = rw.graph.out_arcs(b).into_iter().filter(|a| a.dep_type() == "pobj").cloned().collect();
            if governors.is_empty() || objects.is_empty() {
                continue;
            }
            let label = format!("prep_{}", lower_form(sentence, b));
            let mut add = Vec::new();
            for g in &governors {
                for o in &objects {
                    if let Some(arc) = DependencyArc::try_new(label.clone(), g.parent(), o.child()) {
                        add.push(arc);
                    }
                }
            }
            let bindings = vec![("A", idx(governors[0].parent())), ("B", idx(b)), ("C", idx(objects[0].child()))];
            let remove = governors.into_iter().chain(objects).collect();
            rw.apply(RuleId::CollapsePrep, bindings, add, remove);
        }
    })
}

fn strictly_between(a: usize, b: usize, c: usize) -> bool {
    (a < b && b < c) || (c < b && b < a)
}

/// `cc(A→B) + conj(A→C)` with B between A and C becomes `conj_b(A→C)`. When
/// several coordinators lie between A and C, the one closest to C wins.
pub fn collapse_conj(graph: &DependencyGraph, sentence: &Sentence) -> (DependencyGraph, TransformTrace) {
    run(graph, |rw| {
        let heads: BTreeSet<usize> = arcs_with(rw.graph, "cc").iter().map(|a| a.parent()).collect();
        for a in heads {
            let out = rw.graph.out_arcs(a);
            let ccs: Vec<usize> = out.iter().filter(|x| x.dep_type() == "cc").map(|x| x.child()).collect();
            let conjs: Vec<usize> = out.iter().filter(|x| x.dep_type() == "conj").map(|x| x.child()).collect();
            let mut typed: Vec<(usize, usize)> = Vec::new();
            for &c in &conjs {
                let best = ccs
                    .iter()
                    .copied()
                    .filter(|&b| strictly_between(a, b, c))
                    .min_by_key(|&b| b.abs_diff(c));
                if let Some(b) = best {
                    typed.push((b, c));
                }
            }
            let used: BTreeSet<usize> = typed.iter().map(|&(b, _)| b).collect();
            for b in used {
                let conjuncts: Vec<usize> = typed.iter().filter(|&&(bb, _)| bb == b).map(|&(_, c)| c).collect();
                let label = format!("conj_{}", lower_form(sentence, b));
                let add = conjuncts.iter().map(|&c| DependencyArc::new(label.clone(), a, c)).collect();
                let mut remove: Vec<_> = conjuncts.iter().map(|&c| DependencyArc::new("conj", a, c)).collect();
                remove.push(DependencyArc::new("cc", a, b));
                let bindings = vec![("A", idx(a)), ("B", idx(b)), ("C", idx(conjuncts[0]))];
                rw.apply(RuleId::CollapseConj, bindings, add, remove);
            }
        }
    })
}

fn is_conj_label(label: &str) -> bool {
    label == "conj" || label.starts_with("conj_")
}

/// Copies whitelisted relations across `conj*(A→C)` arcs until nothing
/// changes.
///
/// Dependent side: `R(A→D)` gives `R(C→D)` unless C already had an
/// R-dependent in the input. Governor side: `R(P→A)` gives `R(P→C)`.
pub fn propagate_conjuncts(graph: &DependencyGraph) -> (DependencyGraph, TransformTrace) {
    let blocked: BTreeSet<(usize, String)> = graph
        .iter()
        .filter(|a| PROPAGATED_RELATIONS.contains(&a.dep_type()))
        .map(|a| (a.parent(), a.dep_type().to_string()))
        .collect();
    run(graph, |rw| loop {
        let mut changed = false;
        let conj_arcs: Vec<_> = rw.graph.iter().filter(|a| is_conj_label(a.dep_type())).cloned().collect();
        for conj in conj_arcs {
            let (a, c) = (conj.parent(), conj.child());
            let deps: Vec<_> = rw
                .graph
                .out_arcs(a)
                .into_iter()
                .filter(|r| PROPAGATED_RELATIONS.contains(&r.dep_type()))
                .cloned()
                .collect();
            for r in deps {
                let d = r.child();
                if d == c || blocked.contains(&(c, r.dep_type().to_string())) {
                    continue;
                }
                let add = vec![DependencyArc::new(r.dep_type(), c, d)];
                let bindings = vec![("A", idx(a)), ("C", idx(c)), ("D", idx(d)), ("T", r.dep_type().to_string())];
                changed |= rw.apply(RuleId::PropagateDependent, bindings, add, Vec::new());
            }
            let govs: Vec<_> = rw
                .graph
                .in_arcs(a)
                .filter(|r| PROPAGATED_RELATIONS.contains(&r.dep_type()))
                .cloned()
                .collect();
            for r in govs {
                let p = r.parent();
                if p == c {
                    continue;
                }
                let add = vec![DependencyArc::new(r.dep_type(), p, c)];
                let bindings = vec![("P", idx(p)), ("A", idx(a)), ("C", idx(c)), ("T", r.dep_type().to_string())];
                changed |= rw.apply(RuleId::PropagateGovernor, bindings, add, Vec::new());
            }
        }
        if !changed {
            break;
        }
    })
}

/// Repairs an uncollapsed `cc(A→B)` using the first non-`cc` child C of A
/// to the right of B. Runs to a fixpoint.
pub fn apply_rule1(graph: &DependencyGraph, sentence: &Sentence, mode: Rule1Mode) -> (DependencyGraph, TransformTrace) {
    run(graph, |rw| loop {
        let mut changed = false;
        for cc in arcs_with(rw.graph, "cc") {
            let (a, b) = (cc.parent(), cc.child());
            if a == 0 || a >= b {
                continue;
            }
            let Some(t) = rw
                .graph
                .out_arcs(a)
                .into_iter()
                .filter(|x| x.child() > b && x.dep_type() != "cc")
                .min()
                .cloned()
            else {
                continue;
            };
            let c = t.child();
            let label = format!("conj_{}", lower_form(sentence, b));
            let bindings = vec![("A", idx(a)), ("B", idx(b)), ("C", idx(c)), ("T", t.dep_type().to_string())];
            let fired = match mode {
                Rule1Mode::Corrected => {
                    let add = vec![DependencyArc::new(label, a, c)];
                    rw.apply(RuleId::Rule1, bindings, add, vec![t, cc])
                }
                Rule1Mode::Literal => {
                    let literal = DependencyArc::new(label, a, b);
                    if rw.graph.contains(&literal) {
                        false
                    } else {
                        rw.apply(RuleId::Rule1, bindings, vec![literal], vec![t])
                    }
                }
            };
            if fired {
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    })
}

/// `prep(A→B), pobj(B→C)` with A < B < C becomes `prep_b(A→C)`.
pub fn apply_rule2(graph: &DependencyGraph, sentence: &Sentence) -> (DependencyGraph, TransformTrace) {
    run(graph, |rw| loop {
        let mut changed = false;
        'outer: for prep in arcs_with(rw.graph, "prep") {
            let (a, b) = (prep.parent(), prep.child());
            if a >= b {
                continue;
            }
            for pobj in rw.graph.out_arcs(b).into_iter().filter(|x| x.dep_type() == "pobj").cloned().collect::<Vec<_>>() {
                let c = pobj.child();
                if b >= c {
                    continue;
                }
                let add = vec![DependencyArc::new(format!("prep_{}", lower_form(sentence, b)), a, c)];
                let bindings = vec![("A", idx(a)), ("B", idx(b)), ("C", idx(c))];
                if rw.apply(RuleId::Rule2, bindings, add, vec![prep.clone(), pobj]) {
                    changed = true;
                    break 'outer;
                }
            }
        }
        if !changed {
            break;
        }
    })
}

/// Full pipeline from a Basic tree to a CCprocessed graph.
pub fn basic_to_ccprocessed(
    tree: &DependencyTree,
    sentence: &Sentence,
    config: &TransformConfig,
) -> (DependencyGraph, TransformTrace) {
    let mut graph = tree_to_graph(tree);
    let mut trace = TransformTrace::new();
    let mut stage = |graph: &mut DependencyGraph, (g, t): (DependencyGraph, TransformTrace)| {
        *graph = g;
        trace.extend(t);
    };
    if config.collapse_preps {
        let r = collapse_preps(&graph, sentence);
        stage(&mut graph, r);
    }
    if config.collapse_conj {
        let r = collapse_conj(&graph, sentence);
        stage(&mut graph, r);
    }
    if config.propagate {
        let r = propagate_conjuncts(&graph);
        stage(&mut graph, r);
    }
    if config.rule1 {
        let r = apply_rule1(&graph, sentence, config.rule1_mode);
        stage(&mut graph, r);
    }
    if config.rule2 {
        let r = apply_rule2(&graph, sentence);
        stage(&mut graph, r);
    }
    (graph, trace)
}
