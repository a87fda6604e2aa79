//! Sparse hashed feature extraction.
//!
//! Templates produce `(template id, feature string)` pairs into a
//! [`FeatureBuffer`]. Each pair is hashed with 64-bit FNV-1a over the
//! template id byte followed by the string bytes and masked to
//! `hash_bits`. Label conjunctions append `" #" + label` to the string, so
//! a labeled bucket can be computed by continuing the unlabeled hash state.

use crate::io::ClusterLexicon;
use crate::sentence::Sentence;
use crate::tree::DependencyTree;
use crate::{Error, Result};

pub const DEFAULT_HASH_BITS: u8 = 22;
pub const MIN_HASH_BITS: u8 = 16;
pub const MAX_HASH_BITS: u8 = 28;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental 64-bit FNV-1a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FnvState(u64);

impl FnvState {
    pub fn start(template: u8) -> Self {
        FnvState(FNV_OFFSET).write(&[template])
    }

    #[inline]
    pub fn write(self, bytes: &[u8]) -> Self {
        let mut h = self.0;
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        FnvState(h)
    }

    /// Continues the state with the label conjunction suffix.
    #[inline]
    pub fn with_label(self, label: &str) -> Self {
        self.write(LABEL_SEP.as_bytes()).write(label.as_bytes())
    }

    #[inline]
    pub fn bucket(self, hash_bits: u8) -> u32 {
        (self.0 & ((1u64 << hash_bits) - 1)) as u32
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

const LABEL_SEP: &str = " #";
const DIST_SEP: &str = " &";

/// Hashes `(template, feature)` into `[0, 2^hash_bits)`.
pub fn hash_feature(template: u8, feature: &str, hash_bits: u8) -> u32 {
    FnvState::start(template).write(feature.as_bytes()).bucket(hash_bits)
}

/// Mixes a class id into an existing bucket (multiclass weight layout).
pub fn class_bucket(bucket: u32, class: usize, hash_bits: u8) -> u32 {
    FnvState(FNV_OFFSET)
        .write(&bucket.to_le_bytes())
        .write(&(class as u32).to_le_bytes())
        .bucket(hash_bits)
}

/// Sparse `(bucket, value)` list. Buckets may repeat; values add up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bucket: u32, value: f64) {
        debug_assert!(value.is_finite());
        self.entries.push((bucket, value));
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn buckets(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(b, _)| b)
    }

    pub fn extend(&mut self, other: &FeatureVector) {
        self.entries.extend_from_slice(&other.entries);
    }

    pub fn dot<W: Weights + ?Sized>(&self, weights: &W) -> f64 {
        self.entries.iter().map(|&(b, v)| weights.weight(b) * v).sum()
    }
}

/// Read access to a weight array.
pub trait Weights {
    fn weight(&self, bucket: u32) -> f64;
}

impl Weights for [f64] {
    #[inline]
    fn weight(&self, bucket: u32) -> f64 {
        self[bucket as usize]
    }
}

impl Weights for [f32] {
    #[inline]
    fn weight(&self, bucket: u32) -> f64 {
        f64::from(self[bucket as usize])
    }
}

impl Weights for Vec<f64> {
    #[inline]
    fn weight(&self, bucket: u32) -> f64 {
        self[bucket as usize]
    }
}

impl Weights for Vec<f32> {
    #[inline]
    fn weight(&self, bucket: u32) -> f64 {
        f64::from(self[bucket as usize])
    }
}

/// Template id ranges per family.
pub mod template {
    pub const FIRST_ORDER: u8 = 0;
    pub const CLUSTER_POS4: u8 = 32;
    pub const CLUSTER_POS6: u8 = 64;
    pub const CLUSTER_FORM: u8 = 96;
    pub const STACK_PRED_EDGE: u8 = 128;
    pub const STACK_SIBLING: u8 = 129;
    pub const STACK_GRANDPARENT: u8 = 130;
    pub const STACK_PRED_HEAD: u8 = 131;
    pub const STACK_ALL_CHILDREN: u8 = 132;
    pub const SIBLING: u8 = 160;
    pub const GRANDPARENT: u8 = 176;
    pub const TRANSITION: u8 = 200;
}

/// Reusable store of `(template, string)` items backed by one text buffer.
#[derive(Clone, Debug, Default)]
pub struct FeatureBuffer {
    text: String,
    items: Vec<(u8, usize, usize)>,
}

impl FeatureBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.text.clear();
        self.items.clear();
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Emits the space-joined `parts` under `template`.
    pub fn emit(&mut self, template: u8, parts: &[&str]) {
        let start = self.text.len();
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                self.text.push(' ');
            }
            self.text.push_str(p);
        }
        self.items.push((template, start, self.text.len()));
    }

    /// Emits `parts` bare and again with the `&suffix` conjunction.
    fn emit_with_conj(&mut self, template: u8, parts: &[&str], conj: &str) {
        self.emit(template, parts);
        let start = self.text.len();
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                self.text.push(' ');
            }
            self.text.push_str(p);
        }
        self.text.push_str(DIST_SEP);
        self.text.push_str(conj);
        self.items.push((template, start, self.text.len()));
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, &str)> + '_ {
        self.items.iter().map(|&(t, s, e)| (t, &self.text[s..e]))
    }

    /// Hash states of all items.
    pub fn states(&self) -> impl Iterator<Item = FnvState> + '_ {
        self.iter().map(|(t, s)| FnvState::start(t).write(s.as_bytes()))
    }

    /// Hashes every item; with a label, each item is emitted bare and
    /// label-conjoined.
    pub fn to_vector(&self, label: Option<&str>, hash_bits: u8) -> FeatureVector {
        let mut v = FeatureVector::new();
        for st in self.states() {
            v.push(st.bucket(hash_bits), 1.0);
            if let Some(l) = label {
                v.push(st.with_label(l).bucket(hash_bits), 1.0);
            }
        }
        v
    }

    /// Owned copy of the items, for inspection.
    pub fn to_strings(&self) -> Vec<(u8, String)> {
        self.iter().map(|(t, s)| (t, s.to_string())).collect()
    }
}

/// Which first-order template inventory to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcTemplateSet {
    /// Unigram, bigram, in-between and surrounding-POS templates.
    Standard,
    /// Head POS and modifier POS only.
    PosOnly,
}

/// Distance bins: a distance maps to the largest threshold not above it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceBins(Vec<u8>);

impl Default for DistanceBins {
    fn default() -> Self {
        DistanceBins(vec![1, 2, 3, 4, 5, 6, 11])
    }
}

impl DistanceBins {
    pub fn new(thresholds: Vec<u8>) -> Result<Self> {
        if thresholds.is_empty() || thresholds[0] != 1 || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "distance bins must start at 1 and increase strictly: {thresholds:?}"
            )));
        }
        Ok(DistanceBins(thresholds))
    }

    pub fn thresholds(&self) -> &[u8] {
        &self.0
    }

    pub fn bin(&self, distance: usize) -> u8 {
        self.0
            .iter()
            .rev()
            .find(|&&t| usize::from(t) <= distance)
            .copied()
            .unwrap_or(self.0[0])
    }
}

/// Feature configuration stored with every model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateConfig {
    pub hash_bits: u8,
    pub enable_clusters: bool,
    pub enable_second_order: bool,
    pub enable_stacking: bool,
    pub arc_templates: ArcTemplateSet,
    pub distance_bins: DistanceBins,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            hash_bits: DEFAULT_HASH_BITS,
            enable_clusters: false,
            enable_second_order: false,
            enable_stacking: false,
            arc_templates: ArcTemplateSet::Standard,
            distance_bins: DistanceBins::default(),
        }
    }
}

impl TemplateConfig {
    pub fn with_hash_bits(hash_bits: u8) -> Result<Self> {
        let c = TemplateConfig {
            hash_bits,
            ..Default::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_HASH_BITS..=MAX_HASH_BITS).contains(&self.hash_bits) {
            return Err(Error::Config(format!(
                "hash_bits must be in {MIN_HASH_BITS}..={MAX_HASH_BITS}, got {}",
                self.hash_bits
            )));
        }
        Ok(())
    }

    pub fn num_buckets(&self) -> usize {
        1usize << self.hash_bits
    }

    /// Direction and binned distance of the arc `h → m`.
    pub fn dir_dist(&self, h: usize, m: usize) -> String {
        let dir = if h < m { 'R' } else { 'L' };
        format!("{dir}{}", self.distance_bins.bin(h.abs_diff(m)))
    }
}

/// Optional resources consumed by arc-level feature families.
#[derive(Clone, Copy, Debug, Default)]
pub struct ArcContext<'a> {
    pub clusters: Option<&'a ClusterLexicon>,
    pub stacked: Option<&'a StackedAnnotation>,
}

/// A first-stage parse used to derive stacking features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackedAnnotation(DependencyTree);

impl StackedAnnotation {
    pub fn new(tree: DependencyTree) -> Self {
        StackedAnnotation(tree)
    }

    pub fn tree(&self) -> &DependencyTree {
        &self.0
    }

    pub fn into_tree(self) -> DependencyTree {
        self.0
    }
}

const BOS: &str = "<s>";
const EOS: &str = "</s>";
const NULL_SIBLING: &str = "<first>";
const NONE: &str = "<none>";

fn check_arc(sentence: &Sentence, h: usize, m: usize) -> Result<()> {
    let n = sentence.len();
    if h > n || m == 0 || m > n || h == m {
        return Err(Error::IndexOutOfRange(format!(
            "arc {h} -> {m} in a sentence of {n} tokens"
        )));
    }
    Ok(())
}

/// Token attributes as seen by one template family.
trait TokenView {
    fn form(&self, i: usize) -> &str;
    fn pos(&self, i: isize) -> &str;
}

struct PlainView<'a>(&'a Sentence);

impl TokenView for PlainView<'_> {
    fn form(&self, i: usize) -> &str {
        self.0.form_at(i)
    }

    fn pos(&self, i: isize) -> &str {
        if i < 0 {
            BOS
        } else if i as usize > self.0.len() {
            EOS
        } else {
            self.0.pos_at(i as usize)
        }
    }
}

/// Leading `width` bits of a bit-string (the whole string when shorter).
pub fn cluster_prefix(bits: &str, width: usize) -> &str {
    &bits[..bits.len().min(width)]
}

enum ClusterMode {
    PosPrefix(usize),
    FullForm,
}

struct ClusterView<'a> {
    sentence: &'a Sentence,
    lexicon: &'a ClusterLexicon,
    mode: ClusterMode,
}

impl ClusterView<'_> {
    fn bits(&self, i: usize) -> &str {
        if i == 0 {
            crate::sentence::ROOT_FORM
        } else {
            self.lexicon.lookup(self.sentence.form_at(i))
        }
    }
}

impl TokenView for ClusterView<'_> {
    fn form(&self, i: usize) -> &str {
        match self.mode {
            ClusterMode::FullForm => self.bits(i),
            ClusterMode::PosPrefix(_) => self.sentence.form_at(i),
        }
    }

    fn pos(&self, i: isize) -> &str {
        if i < 0 {
            return BOS;
        }
        let i = i as usize;
        if i > self.sentence.len() {
            return EOS;
        }
        match self.mode {
            ClusterMode::PosPrefix(w) if i > 0 => cluster_prefix(self.bits(i), w),
            _ => self.sentence.pos_at(i),
        }
    }
}

fn emit_first_order<V: TokenView>(
    buf: &mut FeatureBuffer,
    base: u8,
    view: &V,
    h: usize,
    m: usize,
    set: ArcTemplateSet,
    dd: &str,
) {
    let hp = view.pos(h as isize);
    let mp = view.pos(m as isize);
    if set == ArcTemplateSet::PosOnly {
        buf.emit_with_conj(base + 2, &[hp], dd);
        buf.emit_with_conj(base + 5, &[mp], dd);
        return;
    }
    let hw = view.form(h);
    let mw = view.form(m);
    buf.emit_with_conj(base, &[hw, hp], dd);
    buf.emit_with_conj(base + 1, &[hw], dd);
    buf.emit_with_conj(base + 2, &[hp], dd);
    buf.emit_with_conj(base + 3, &[mw, mp], dd);
    buf.emit_with_conj(base + 4, &[mw], dd);
    buf.emit_with_conj(base + 5, &[mp], dd);
    buf.emit_with_conj(base + 6, &[hw, hp, mw, mp], dd);
    buf.emit_with_conj(base + 7, &[hp, mw, mp], dd);
    buf.emit_with_conj(base + 8, &[hw, mw, mp], dd);
    buf.emit_with_conj(base + 9, &[hw, hp, mp], dd);
    buf.emit_with_conj(base + 10, &[hw, hp, mw], dd);
    buf.emit_with_conj(base + 11, &[hw, mw], dd);
    buf.emit_with_conj(base + 12, &[hp, mp], dd);
    let (lo, hi) = if h < m { (h, m) } else { (m, h) };
    for b in lo + 1..hi {
        buf.emit_with_conj(base + 13, &[hp, view.pos(b as isize), mp], dd);
    }
    let (hi_, mi) = (h as isize, m as isize);
    buf.emit_with_conj(base + 14, &[hp, view.pos(hi_ + 1), view.pos(mi - 1), mp], dd);
    buf.emit_with_conj(base + 15, &[view.pos(hi_ - 1), hp, view.pos(mi - 1), mp], dd);
    buf.emit_with_conj(base + 16, &[hp, view.pos(hi_ + 1), mp, view.pos(mi + 1)], dd);
    buf.emit_with_conj(base + 17, &[view.pos(hi_ - 1), hp, mp, view.pos(mi + 1)], dd);
}

/// First-order templates for `h → m` into `buf`.
pub fn arc_items(buf: &mut FeatureBuffer, sentence: &Sentence, h: usize, m: usize, config: &TemplateConfig) -> Result<()> {
    check_arc(sentence, h, m)?;
    let dd = config.dir_dist(h, m);
    emit_first_order(
        buf,
        template::FIRST_ORDER,
        &PlainView(sentence),
        h,
        m,
        config.arc_templates,
        &dd,
    );
    Ok(())
}

/// First-order features of the arc `h → m`. With a label, every feature is
/// emitted bare and label-conjoined.
pub fn arc_features(
    sentence: &Sentence,
    h: usize,
    m: usize,
    label: Option<&str>,
    config: &TemplateConfig,
) -> Result<FeatureVector> {
    let mut buf = FeatureBuffer::new();
    arc_items(&mut buf, sentence, h, m, config)?;
    Ok(buf.to_vector(label, config.hash_bits))
}

/// Cluster re-emissions of the first-order templates: POS replaced by the
/// 4-bit and 6-bit prefixes, and forms replaced by the full bit-string.
pub fn cluster_items(
    buf: &mut FeatureBuffer,
    sentence: &Sentence,
    h: usize,
    m: usize,
    lexicon: &ClusterLexicon,
    config: &TemplateConfig,
) -> Result<()> {
    check_arc(sentence, h, m)?;
    let dd = config.dir_dist(h, m);
    for (base, mode) in [
        (template::CLUSTER_POS4, ClusterMode::PosPrefix(4)),
        (template::CLUSTER_POS6, ClusterMode::PosPrefix(6)),
        (template::CLUSTER_FORM, ClusterMode::FullForm),
    ] {
        let view = ClusterView {
            sentence,
            lexicon,
            mode,
        };
        emit_first_order(buf, base, &view, h, m, config.arc_templates, &dd);
    }
    Ok(())
}

pub fn cluster_features(
    sentence: &Sentence,
    h: usize,
    m: usize,
    lexicon: &ClusterLexicon,
    label: Option<&str>,
    config: &TemplateConfig,
) -> Result<FeatureVector> {
    let mut buf = FeatureBuffer::new();
    cluster_items(&mut buf, sentence, h, m, lexicon, config)?;
    Ok(buf.to_vector(label, config.hash_bits))
}

fn lemma_at(sentence: &Sentence, i: usize) -> String {
    if i == 0 {
        crate::sentence::ROOT_FORM.to_string()
    } else {
        sentence.token(i).unwrap().lemma_or_form()
    }
}

/// Stacking templates derived from a first-stage parse.
pub fn stacking_items(
    buf: &mut FeatureBuffer,
    sentence: &Sentence,
    first: &StackedAnnotation,
    h: usize,
    m: usize,
    config: &TemplateConfig,
) -> Result<()> {
    check_arc(sentence, h, m)?;
    let tree = first.tree();
    if tree.len() != sentence.len() {
        return Err(Error::LengthMismatch {
            what: "stacked annotation length",
            expected: sentence.len(),
            found: tree.len(),
        });
    }
    let pred_head = tree.head(m);
    let pred_edge = pred_head == h;
    let pe = if pred_edge { "pe1" } else { "pe0" };

    if pred_edge {
        buf.emit(template::STACK_PRED_EDGE, &["1"]);
        buf.emit(template::STACK_PRED_EDGE, &["1", tree.label(m)]);
    } else {
        buf.emit(template::STACK_PRED_EDGE, &["0"]);
    }

    // Previous and next siblings of m under its predicted head.
    let siblings = tree.children(pred_head);
    let pos_in = siblings.iter().position(|&c| c == m).unwrap();
    let prev = pos_in.checked_sub(1).map(|i| siblings[i]);
    let next = siblings.get(pos_in + 1).copied();
    for (side, sib) in [("prev", prev), ("next", next)] {
        match sib {
            Some(s) => {
                let lemma = lemma_at(sentence, s);
                let dir = if s < pred_head { "L" } else { "R" };
                let dist = config.distance_bins.bin(s.abs_diff(m)).to_string();
                buf.emit(template::STACK_SIBLING, &[pe, side, "lemma", &lemma]);
                buf.emit(template::STACK_SIBLING, &[pe, side, "pos", sentence.pos_at(s)]);
                buf.emit(template::STACK_SIBLING, &[pe, side, "label", tree.label(s)]);
                buf.emit(template::STACK_SIBLING, &[pe, side, "dist", &dist, dir]);
            }
            None => buf.emit(template::STACK_SIBLING, &[pe, side, NONE]),
        }
    }

    // Grandparent of m in the first-stage tree.
    if pred_head == 0 {
        buf.emit(template::STACK_GRANDPARENT, &[pe, NONE]);
    } else {
        let g = tree.head(pred_head);
        let lemma = lemma_at(sentence, g);
        let dir = if g < m { "L" } else { "R" };
        let dist = config.distance_bins.bin(g.abs_diff(m)).to_string();
        buf.emit(template::STACK_GRANDPARENT, &[pe, "lemma", &lemma]);
        buf.emit(template::STACK_GRANDPARENT, &[pe, "pos", sentence.pos_at(g)]);
        buf.emit(template::STACK_GRANDPARENT, &[pe, "label", tree.label(pred_head)]);
        buf.emit(template::STACK_GRANDPARENT, &[pe, "dist", &dist, dir]);
    }

    if !pred_edge {
        let lemma = lemma_at(sentence, pred_head);
        buf.emit(template::STACK_PRED_HEAD, &["pos", sentence.pos_at(pred_head)]);
        buf.emit(template::STACK_PRED_HEAD, &["lemma", &lemma]);
        buf.emit(template::STACK_PRED_HEAD, &["label", tree.label(m)]);
    }

    let children = tree.children(h);
    if children.is_empty() {
        buf.emit(template::STACK_ALL_CHILDREN, &[NONE]);
    } else {
        let seq: Vec<String> = children
            .iter()
            .map(|&c| format!("{}/{}", sentence.pos_at(c), tree.label(c)))
            .collect();
        buf.emit(template::STACK_ALL_CHILDREN, &[&seq.join("+")]);
    }
    Ok(())
}

pub fn stacking_features(
    sentence: &Sentence,
    first: &StackedAnnotation,
    h: usize,
    m: usize,
    label: Option<&str>,
    config: &TemplateConfig,
) -> Result<FeatureVector> {
    let mut buf = FeatureBuffer::new();
    stacking_items(&mut buf, sentence, first, h, m, config)?;
    Ok(buf.to_vector(label, config.hash_bits))
}

/// All enabled arc-level families for `h → m` (first-order, clusters,
/// stacking).
pub fn arc_family_items(
    buf: &mut FeatureBuffer,
    sentence: &Sentence,
    h: usize,
    m: usize,
    config: &TemplateConfig,
    ctx: &ArcContext<'_>,
) -> Result<()> {
    arc_items(buf, sentence, h, m, config)?;
    if config.enable_clusters {
        let lex = ctx
            .clusters
            .ok_or_else(|| Error::Config("cluster features enabled but no lexicon supplied".into()))?;
        cluster_items(buf, sentence, h, m, lex, config)?;
    }
    if config.enable_stacking {
        let first = ctx
            .stacked
            .ok_or_else(|| Error::Config("stacking features enabled but no first-stage parse supplied".into()))?;
        stacking_items(buf, sentence, first, h, m, config)?;
    }
    Ok(())
}

/// Labeled arc features across every enabled arc-level family.
pub fn full_arc_features(
    sentence: &Sentence,
    h: usize,
    m: usize,
    label: &str,
    config: &TemplateConfig,
    ctx: &ArcContext<'_>,
) -> Result<FeatureVector> {
    let mut buf = FeatureBuffer::new();
    arc_family_items(&mut buf, sentence, h, m, config, ctx)?;
    Ok(buf.to_vector(Some(label), config.hash_bits))
}

/// Consecutive-sibling templates for modifiers `s` (previous, or `None`
/// for the first child) and `m` of head `h`.
pub fn sibling_items(buf: &mut FeatureBuffer, sentence: &Sentence, h: usize, m: usize, s: Option<usize>) -> Result<()> {
    check_arc(sentence, h, m)?;
    if let Some(s) = s {
        let between = if m > h { h < s && s < m } else { m < s && s < h };
        if !between {
            return Err(Error::Feature(format!(
                "sibling {s} is not between head {h} and modifier {m}"
            )));
        }
    }
    let dir = if h < m { "R" } else { "L" };
    let hp = sentence.pos_at(h);
    let mp = sentence.pos_at(m);
    let mw = sentence.form_at(m);
    let (sp, sw) = match s {
        Some(s) => (sentence.pos_at(s), sentence.form_at(s)),
        None => (NULL_SIBLING, NULL_SIBLING),
    };
    buf.emit_with_conj(template::SIBLING, &[hp, sp, mp], dir);
    buf.emit_with_conj(template::SIBLING + 1, &[sw, mw], dir);
    buf.emit_with_conj(template::SIBLING + 2, &[sp, mp], dir);
    Ok(())
}

pub fn sibling_features(
    sentence: &Sentence,
    h: usize,
    m: usize,
    s: Option<usize>,
    config: &TemplateConfig,
) -> Result<FeatureVector> {
    let mut buf = FeatureBuffer::new();
    sibling_items(&mut buf, sentence, h, m, s)?;
    Ok(buf.to_vector(None, config.hash_bits))
}

/// Grandparent templates for the chain `g → h → m`, conjoined with the
/// direction pattern of the two arcs.
pub fn grandparent_items(buf: &mut FeatureBuffer, sentence: &Sentence, g: usize, h: usize, m: usize) -> Result<()> {
    check_arc(sentence, h, m)?;
    if g == m || g == h || g > sentence.len() {
        return Err(Error::Feature(format!("invalid grandparent chain {g} -> {h} -> {m}")));
    }
    let pattern = match (g < h, h < m) {
        (true, true) => "++",
        (true, false) => "+-",
        (false, true) => "-+",
        (false, false) => "--",
    };
    let gp = sentence.pos_at(g);
    let hp = sentence.pos_at(h);
    let mp = sentence.pos_at(m);
    buf.emit(template::GRANDPARENT, &[gp, hp, mp, pattern]);
    buf.emit(template::GRANDPARENT + 1, &[sentence.form_at(g), sentence.form_at(m), pattern]);
    Ok(())
}

pub fn grandparent_features(
    sentence: &Sentence,
    g: usize,
    h: usize,
    m: usize,
    config: &TemplateConfig,
) -> Result<FeatureVector> {
    let mut buf = FeatureBuffer::new();
    grandparent_items(&mut buf, sentence, g, h, m)?;
    Ok(buf.to_vector(None, config.hash_bits))
}
