//! Greedy arc-standard transition parser with a static oracle.

use std::fmt;

use log::info;

use crate::features::{template, FeatureBuffer, FeatureVector, TemplateConfig};
use crate::io::fingerprint;
use crate::learn::{label_inventory, train_multiclass, EpochStats, Model, ModelKind, ModelMeta, TrainLog};
use crate::sentence::Sentence;
use crate::tree::{is_projective, DependencyTree};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    /// Adds `s0 → s1` and removes `s1`.
    LeftArc(String),
    /// Adds `s1 → s0` and pops `s0`.
    RightArc(String),
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Shift => write!(f, "SHIFT"),
            Transition::LeftArc(l) => write!(f, "LEFT_ARC({l})"),
            Transition::RightArc(l) => write!(f, "RIGHT_ARC({l})"),
        }
    }
}

/// Parser state: a stack with ROOT at the bottom, the unread buffer and the
/// arcs built so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParserConfig {
    stack: Vec<usize>,
    next: usize,
    n: usize,
    heads: Vec<Option<usize>>,
    labels: Vec<Option<String>>,
    leftmost: Vec<Option<usize>>,
    rightmost: Vec<Option<usize>>,
    attached_children: Vec<usize>,
}

impl ParserConfig {
    /// σ = [0], β = [1..=n], no arcs.
    pub fn initial(n: usize) -> Self {
        ParserConfig {
            stack: vec![0],
            next: 1,
            n,
            heads: vec![None; n + 1],
            labels: vec![None; n + 1],
            leftmost: vec![None; n + 1],
            rightmost: vec![None; n + 1],
            attached_children: vec![0; n + 1],
        }
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    pub fn buffer(&self) -> std::ops::RangeInclusive<usize> {
        self.next..=self.n
    }

    pub fn buffer_is_empty(&self) -> bool {
        self.next > self.n
    }

    pub fn head(&self, m: usize) -> Option<usize> {
        self.heads[m]
    }

    pub fn label(&self, m: usize) -> Option<&str> {
        self.labels[m].as_deref()
    }

    /// Terminal when σ = [0] and β is empty.
    pub fn is_terminal(&self) -> bool {
        self.stack.len() == 1 && self.buffer_is_empty()
    }

    fn s(&self, depth: usize) -> Option<usize> {
        self.stack.len().checked_sub(depth + 1).map(|i| self.stack[i])
    }

    fn b(&self, offset: usize) -> Option<usize> {
        let i = self.next + offset;
        (i <= self.n).then_some(i)
    }

    /// Checks that stack, buffer and attached tokens partition `0..=n`.
    #[allow(clippy::needless_range_loop)]
    pub fn check_partition(&self) -> bool {
        let mut seen = vec![0u8; self.n + 1];
        for &s in &self.stack {
            seen[s] += 1;
        }
        for b in self.buffer() {
            seen[b] += 1;
        }
        for m in 1..=self.n {
            if self.heads[m].is_some() {
                seen[m] += 1;
            }
        }
        self.stack.first() == Some(&0) && seen.iter().all(|&c| c == 1)
    }

    fn attach(&mut self, h: usize, m: usize, label: String) {
        self.heads[m] = Some(h);
        self.labels[m] = Some(label);
        self.attached_children[h] += 1;
        if m < h {
            if self.leftmost[h].is_none_or(|l| m < l) {
                self.leftmost[h] = Some(m);
            }
        } else if self.rightmost[h].is_none_or(|r| m > r) {
            self.rightmost[h] = Some(m);
        }
    }

    /// Applies a transition in place.
    pub fn apply_mut(&mut self, t: &Transition) -> Result<()> {
        match t {
            Transition::Shift => {
                if self.buffer_is_empty() {
                    return Err(Error::Transition("SHIFT with an empty buffer".into()));
                }
                self.stack.push(self.next);
                self.next += 1;
            }
            Transition::LeftArc(l) => {
                if self.stack.len() < 2 {
                    return Err(Error::Transition("LEFT_ARC needs two stack items".into()));
                }
                let s0 = self.stack.pop().unwrap();
                let s1 = self.stack.pop().unwrap();
                if s1 == 0 {
                    self.stack.push(s1);
                    self.stack.push(s0);
                    return Err(Error::Transition("LEFT_ARC cannot make ROOT a dependent".into()));
                }
                self.attach(s0, s1, l.clone());
                self.stack.push(s0);
            }
            Transition::RightArc(l) => {
                if self.stack.len() < 2 {
                    return Err(Error::Transition("RIGHT_ARC needs two stack items".into()));
                }
                let s0 = self.stack.pop().unwrap();
                let s1 = *self.stack.last().unwrap();
                self.attach(s1, s0, l.clone());
            }
        }
        Ok(())
    }

    /// Returns the successor configuration.
    pub fn apply(&self, t: &Transition) -> Result<ParserConfig> {
        let mut next = self.clone();
        next.apply_mut(t)?;
        Ok(next)
    }

    /// Collected arcs as a tree; fails unless every token has a head.
    pub fn to_tree(&self) -> Result<DependencyTree> {
        let mut heads = Vec::with_capacity(self.n);
        let mut labels = Vec::with_capacity(self.n);
        for m in 1..=self.n {
            match (self.heads[m], &self.labels[m]) {
                (Some(h), Some(l)) => {
                    heads.push(h);
                    labels.push(l.clone());
                }
                _ => return Err(Error::Transition(format!("token {m} has no head"))),
            }
        }
        Ok(DependencyTree::new(heads, labels)?)
    }

    fn legal_shift(&self) -> bool {
        !self.buffer_is_empty()
    }

    fn legal_left(&self) -> bool {
        self.stack.len() >= 2 && self.s(1) != Some(0)
    }

    /// ROOT receives its dependent only at the very end, keeping a single
    /// root.
    fn legal_right(&self) -> bool {
        self.stack.len() >= 2 && (self.s(1) != Some(0) || self.buffer_is_empty())
    }
}

fn oracle_unchecked(config: &ParserConfig, gold: &DependencyTree, gold_children: &[usize]) -> Result<Transition> {
    if let (Some(s0), Some(s1)) = (config.s(0), config.s(1)) {
        if s1 != 0 && gold.head(s1) == s0 && config.attached_children[s1] == gold_children[s1] {
            return Ok(Transition::LeftArc(gold.label(s1).to_string()));
        }
        if s0 != 0 && gold.head(s0) == s1 && config.attached_children[s0] == gold_children[s0] {
            return Ok(Transition::RightArc(gold.label(s0).to_string()));
        }
    }
    if config.buffer_is_empty() {
        return Err(Error::Transition("oracle has no valid transition".into()));
    }
    Ok(Transition::Shift)
}

fn child_counts(gold: &DependencyTree) -> Vec<usize> {
    let mut c = vec![0; gold.len() + 1];
    for &h in gold.heads() {
        c[h] += 1;
    }
    c
}

/// Static arc-standard oracle. Fails on non-projective gold trees.
pub fn static_oracle(config: &ParserConfig, gold: &DependencyTree) -> Result<Transition> {
    if !is_projective(gold)? {
        return Err(Error::Transition("static oracle is undefined for non-projective trees".into()));
    }
    oracle_unchecked(config, gold, &child_counts(gold))
}

/// The oracle's full transition sequence for a projective tree.
pub fn oracle_sequence(gold: &DependencyTree) -> Result<Vec<Transition>> {
    if !is_projective(gold)? {
        return Err(Error::Transition("static oracle is undefined for non-projective trees".into()));
    }
    let counts = child_counts(gold);
    let mut config = ParserConfig::initial(gold.len());
    let mut seq = Vec::with_capacity(2 * gold.len());
    while !config.is_terminal() {
        let t = oracle_unchecked(&config, gold, &counts)?;
        config.apply_mut(&t)?;
        seq.push(t);
    }
    Ok(seq)
}

const NONE: &str = "<none>";

fn config_features(sentence: &Sentence, c: &ParserConfig, buf: &mut FeatureBuffer, hash_bits: u8) -> FeatureVector {
    let form = |i: Option<usize>| i.map_or(NONE, |i| sentence.form_at(i));
    let pos = |i: Option<usize>| i.map_or(NONE, |i| sentence.pos_at(i));
    let lab = |i: Option<usize>| i.and_then(|i| c.labels[i].as_deref()).unwrap_or(NONE);
    let (s0, s1, b0, b1) = (c.s(0), c.s(1), c.b(0), c.b(1));
    let t = template::TRANSITION;
    buf.clear();
    buf.emit(t, &["bias"]);
    buf.emit(t + 1, &[form(s0)]);
    buf.emit(t + 2, &[pos(s0)]);
    buf.emit(t + 3, &[form(s0), pos(s0)]);
    buf.emit(t + 4, &[form(s1)]);
    buf.emit(t + 5, &[pos(s1)]);
    buf.emit(t + 6, &[form(s1), pos(s1)]);
    buf.emit(t + 7, &[form(b0)]);
    buf.emit(t + 8, &[pos(b0)]);
    buf.emit(t + 9, &[form(b0), pos(b0)]);
    buf.emit(t + 10, &[form(b1)]);
    buf.emit(t + 11, &[pos(b1)]);
    buf.emit(t + 12, &[pos(s0), pos(s1)]);
    buf.emit(t + 13, &[form(s0), form(s1)]);
    buf.emit(t + 14, &[pos(s0), pos(b0)]);
    buf.emit(t + 15, &[pos(s1), pos(s0), pos(b0)]);
    buf.emit(t + 16, &[pos(s0), pos(b0), pos(b1)]);
    buf.emit(t + 17, &[form(s0), pos(s0), pos(s1)]);
    buf.emit(t + 18, &[pos(s0), form(s1), pos(s1)]);
    let lc = |i: Option<usize>| i.and_then(|i| c.leftmost[i]);
    let rc = |i: Option<usize>| i.and_then(|i| c.rightmost[i]);
    buf.emit(t + 19, &[pos(s0), lab(lc(s0)), lab(rc(s0))]);
    buf.emit(t + 20, &[pos(s1), lab(lc(s1)), lab(rc(s1))]);
    buf.emit(t + 21, &[pos(s0), pos(s1), lab(rc(s1))]);
    let dist = match (s0, s1) {
        (Some(a), Some(b)) => (a - b).min(5).to_string(),
        _ => NONE.to_string(),
    };
    buf.emit(t + 22, &[pos(s0), pos(s1), &dist]);
    buf.to_vector(None, hash_bits)
}

/// Class ids: 0 = SHIFT, `1 + 2i` = LEFT_ARC(label i), `2 + 2i` =
/// RIGHT_ARC(label i).
fn class_of(t: &Transition, labels: &[String]) -> Result<usize> {
    let idx = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::Transition(format!("unknown label {l}")))
    };
    Ok(match t {
        Transition::Shift => 0,
        Transition::LeftArc(l) => 1 + 2 * idx(l)?,
        Transition::RightArc(l) => 2 + 2 * idx(l)?,
    })
}

fn transition_of(class: usize, labels: &[String]) -> Transition {
    if class == 0 {
        Transition::Shift
    } else if class % 2 == 1 {
        Transition::LeftArc(labels[(class - 1) / 2].clone())
    } else {
        Transition::RightArc(labels[(class - 2) / 2].clone())
    }
}

/// Greedy parse; returns the tree and the transitions taken.
pub fn parse_greedy_traced(sentence: &Sentence, model: &Model) -> Result<(DependencyTree, Vec<Transition>)> {
    if model.kind() != ModelKind::Transition {
        return Err(Error::Model("not a transition model".into()));
    }
    let labels = model.labels();
    let num_classes = 1 + 2 * labels.len();
    let mut config = ParserConfig::initial(sentence.len());
    let mut buf = FeatureBuffer::new();
    let mut seq = Vec::with_capacity(2 * sentence.len());
    while !config.is_terminal() {
        let fv = config_features(sentence, &config, &mut buf, model.config().hash_bits);
        let (shift, left, right) = (config.legal_shift(), config.legal_left(), config.legal_right());
        let mut best: Option<(f64, usize)> = None;
        for class in 0..num_classes {
            let legal = match class {
                0 => shift,
                c if c % 2 == 1 => left,
                _ => right,
            };
            if !legal {
                continue;
            }
            let s = model.class_score(&fv, class);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, class));
            }
        }
        let (_, class) = best.expect("a legal transition always exists");
        let t = transition_of(class, labels);
        config.apply_mut(&t)?;
        seq.push(t);
    }
    Ok((config.to_tree()?, seq))
}

pub fn parse_greedy(sentence: &Sentence, model: &Model) -> Result<DependencyTree> {
    parse_greedy_traced(sentence, model).map(|(t, _)| t)
}

/// Trains the transition classifier from static-oracle derivations.
/// Non-projective gold trees are skipped.
pub fn train_transition(
    corpus: &[Sentence],
    config: &TemplateConfig,
    epochs: usize,
    seed: u64,
) -> Result<(Model, TrainLog)> {
    if corpus.is_empty() {
        return Err(Error::Training("training corpus is empty".into()));
    }
    config.validate()?;
    let labels = label_inventory(corpus);
    if labels.is_empty() {
        return Err(Error::Training("corpus has no gold trees".into()));
    }
    let mut instances = Vec::new();
    let mut skipped = 0;
    let mut buf = FeatureBuffer::new();
    for (i, s) in corpus.iter().enumerate() {
        let gold = s
            .gold_tree()
            .ok_or_else(|| Error::Training(format!("sentence {} has no gold tree", i + 1)))?;
        if !is_projective(gold)? {
            skipped += 1;
            continue;
        }
        let mut c = ParserConfig::initial(s.len());
        for t in oracle_sequence(gold)? {
            let fv = config_features(s, &c, &mut buf, config.hash_bits);
            instances.push((fv, class_of(&t, &labels)?));
            c.apply_mut(&t)?;
        }
    }
    if skipped > 0 {
        info!("skipped {skipped} non-projective training sentences");
    }
    let num_classes = 1 + 2 * labels.len();
    let mc = train_multiclass(&instances, num_classes, config.hash_bits, epochs, seed, false)?;
    let model = Model::new(
        ModelKind::Transition,
        config.clone(),
        labels,
        mc.weights,
        ModelMeta {
            fingerprint: fingerprint(corpus),
            epochs: epochs as u32,
            seed,
        },
    )?;

    let (mut tokens, mut heads_ok, mut labels_ok) = (0, 0, 0);
    for s in corpus {
        let gold = s.gold_tree().unwrap();
        let pred = parse_greedy(s, &model)?;
        for m in 1..=s.len() {
            tokens += 1;
            if pred.head(m) == gold.head(m) {
                heads_ok += 1;
                if pred.label(m) == gold.label(m) {
                    labels_ok += 1;
                }
            }
        }
    }
    let frac = |a: usize| if tokens == 0 { 0.0 } else { a as f64 / tokens as f64 };
    let log = TrainLog {
        epochs: vec![EpochStats {
            epoch: epochs,
            uas: frac(heads_ok),
            las: frac(labels_ok),
            updates: 0,
            seconds: 0.0,
        }],
        skipped_nonprojective: skipped,
    };
    Ok((model, log))
}
