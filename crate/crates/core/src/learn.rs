//! Averaged perceptron training and the model file format.
//!
//! Model file layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "DFRG"
//! major        u16      format major version (1)
//! minor        u16      format minor version (0)
//! kind         u8       0 = graph, 1 = transition
//! decoder      u8       0 proj, 1 nonproj, 2 sib, 3 sib-gp
//! hash_bits    u8
//! flags        u8       bit 0 clusters, bit 1 second order, bit 2 stacking
//! arc set      u8       0 standard, 1 pos-only
//! bin count    u8       followed by that many u8 distance thresholds
//! fingerprint  u64      training corpus fingerprint
//! epochs       u32
//! seed         u64
//! labels       u32 count, then per label: u32 byte length + UTF-8 bytes
//! weights      u64 count (= 2^hash_bits), then f32 per bucket
//! ```

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{
    arc_family_items, class_bucket, grandparent_items, sibling_items, ArcContext, ArcTemplateSet, DistanceBins,
    FeatureBuffer, FeatureVector, StackedAnnotation, TemplateConfig, Weights,
};
use crate::graph_parser::{decode_with, Decoder};
use crate::io::{fingerprint, ClusterLexicon};
use crate::sentence::Sentence;
use crate::tree::{is_projective, DependencyTree};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DFRG";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;

/// Which parser family a model drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Graph(Decoder),
    Transition,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModelMeta {
    pub fingerprint: u64,
    pub epochs: u32,
    pub seed: u64,
}

/// A trained linear model over hashed features.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    kind: ModelKind,
    config: TemplateConfig,
    labels: Arc<[String]>,
    weights: Vec<f32>,
    meta: ModelMeta,
}

impl Model {
    pub fn new(
        kind: ModelKind,
        config: TemplateConfig,
        labels: Vec<String>,
        weights: Vec<f32>,
        meta: ModelMeta,
    ) -> Result<Self> {
        config.validate()?;
        if labels.is_empty() {
            return Err(Error::Model("label inventory is empty".into()));
        }
        if weights.len() != config.num_buckets() {
            return Err(Error::Model(format!(
                "weight array has {} entries, expected {}",
                weights.len(),
                config.num_buckets()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Model("non-finite weight".into()));
        }
        Ok(Model {
            kind,
            config,
            labels: Arc::from(labels),
            weights,
            meta,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &TemplateConfig {
        &self.config
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_arc(&self) -> &Arc<[String]> {
        &self.labels
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// Default decoder of a graph model.
    pub fn decoder(&self) -> Option<Decoder> {
        match self.kind {
            ModelKind::Graph(d) => Some(d),
            ModelKind::Transition => None,
        }
    }

    /// Score of `class` for a multiclass feature vector.
    pub fn class_score(&self, features: &FeatureVector, class: usize) -> f64 {
        class_score(&self.weights[..], features, class, self.config.hash_bits)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.weights.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
        out.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
        let (kind, decoder) = match self.kind {
            ModelKind::Graph(d) => (0u8, d.code()),
            ModelKind::Transition => (1u8, 0u8),
        };
        out.push(kind);
        out.push(decoder);
        let c = &self.config;
        out.push(c.hash_bits);
        out.push(u8::from(c.enable_clusters) | u8::from(c.enable_second_order) << 1 | u8::from(c.enable_stacking) << 2);
        out.push(match c.arc_templates {
            ArcTemplateSet::Standard => 0,
            ArcTemplateSet::PosOnly => 1,
        });
        let bins = c.distance_bins.thresholds();
        out.push(bins.len() as u8);
        out.extend_from_slice(bins);
        out.extend_from_slice(&self.meta.fingerprint.to_le_bytes());
        out.extend_from_slice(&self.meta.epochs.to_le_bytes());
        out.extend_from_slice(&self.meta.seed.to_le_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_le_bytes());
        for l in self.labels.iter() {
            out.extend_from_slice(&(l.len() as u32).to_le_bytes());
            out.extend_from_slice(l.as_bytes());
        }
        out.extend_from_slice(&(self.weights.len() as u64).to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Model("not a model file (bad magic bytes)".into()));
        }
        let major = r.u16()?;
        let _minor = r.u16()?;
        if major != FORMAT_MAJOR {
            return Err(Error::Version {
                expected: FORMAT_MAJOR,
                found: major,
            });
        }
        let kind = r.u8()?;
        let decoder = r.u8()?;
        let kind = match kind {
            0 => ModelKind::Graph(
                Decoder::from_code(decoder).ok_or_else(|| Error::Model(format!("unknown decoder code {decoder}")))?,
            ),
            1 => ModelKind::Transition,
            k => return Err(Error::Model(format!("unknown model kind {k}"))),
        };
        let hash_bits = r.u8()?;
        let flags = r.u8()?;
        let arc_templates = match r.u8()? {
            0 => ArcTemplateSet::Standard,
            1 => ArcTemplateSet::PosOnly,
            t => return Err(Error::Model(format!("unknown template set {t}"))),
        };
        let nbins = r.u8()? as usize;
        let bins = DistanceBins::new(r.take(nbins)?.to_vec())?;
        let config = TemplateConfig {
            hash_bits,
            enable_clusters: flags & 1 != 0,
            enable_second_order: flags & 2 != 0,
            enable_stacking: flags & 4 != 0,
            arc_templates,
            distance_bins: bins,
        };
        config.validate()?;
        let meta = ModelMeta {
            fingerprint: r.u64()?,
            epochs: r.u32()?,
            seed: r.u64()?,
        };
        let nlabels = r.u32()? as usize;
        let mut labels = Vec::with_capacity(nlabels.min(1 << 16));
        for _ in 0..nlabels {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Model("label is not valid UTF-8".into()))?;
            labels.push(s.to_string());
        }
        let count = r.u64()? as usize;
        if count != config.num_buckets() {
            return Err(Error::Model(format!(
                "weight count {count} does not match hash_bits {hash_bits}"
            )));
        }
        let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Model("weight count overflow".into()))?)?;
        let weights = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::Model(format!("{} trailing bytes after weights", bytes.len() - r.pos)));
        }
        Model::new(kind, config, labels, weights, meta)
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Model("truncated model file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    Model::from_bytes(&std::fs::read(path)?)
}

/// Running averaged-perceptron state: current weights, the
/// timestamp-weighted update sum and the instance counter.
struct Averager {
    weights: Vec<f64>,
    stamped: Vec<f64>,
    instances: u64,
}

impl Averager {
    fn new(size: usize) -> Self {
        Averager {
            weights: vec![0.0; size],
            stamped: vec![0.0; size],
            instances: 0,
        }
    }

    fn update(&mut self, bucket: u32, delta: f64) {
        let b = bucket as usize;
        self.weights[b] += delta;
        self.stamped[b] += self.instances as f64 * delta;
    }

    fn tick(&mut self) {
        self.instances += 1;
    }

    /// Mean of the weight vector over all instances seen so far.
    fn averaged(&self) -> Vec<f64> {
        if self.instances == 0 {
            return self.weights.clone();
        }
        let c = self.instances as f64;
        self.weights
            .iter()
            .zip(&self.stamped)
            .map(|(w, s)| w - s / c)
            .collect()
    }
}

fn to_f32(weights: &[f64]) -> Vec<f32> {
    weights.iter().map(|&w| w as f32).collect()
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub uas: f64,
    pub las: f64,
    pub updates: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub skipped_nonprojective: usize,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// Options for structured training.
#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub decoder: Decoder,
    pub config: TemplateConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Shuffle sentence order each epoch (seeded); off by default.
    pub shuffle: bool,
}

impl TrainOptions {
    pub fn new(decoder: Decoder, config: TemplateConfig) -> Self {
        TrainOptions {
            decoder,
            config,
            epochs: 10,
            seed: 1,
            shuffle: false,
        }
    }
}

/// Resources needed by optional feature families during training.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainResources<'a> {
    pub clusters: Option<&'a ClusterLexicon>,
    /// One first-stage annotation per training sentence.
    pub stacked: Option<&'a [StackedAnnotation]>,
}

impl<'a> TrainResources<'a> {
    fn context(&self, i: usize) -> ArcContext<'a> {
        ArcContext {
            clusters: self.clusters,
            stacked: self.stacked.map(|s| &s[i]),
        }
    }
}

/// Sorted label inventory of a corpus' gold trees.
pub fn label_inventory(corpus: &[Sentence]) -> Vec<String> {
    let set: BTreeSet<&str> = corpus
        .iter()
        .filter_map(|s| s.gold_tree())
        .flat_map(|t| t.labels().iter().map(String::as_str))
        .collect();
    set.into_iter().map(String::from).collect()
}

/// Adds the global feature vector of `tree` (scaled by `sign`) into `acc`.
#[allow(clippy::too_many_arguments)]
fn accumulate_tree_features(
    acc: &mut HashMap<u32, f64>,
    sentence: &Sentence,
    tree: &DependencyTree,
    decoder: Decoder,
    config: &TemplateConfig,
    ctx: &ArcContext<'_>,
    sign: f64,
    buf: &mut FeatureBuffer,
) -> Result<()> {
    let bits = config.hash_bits;
    for m in 1..=tree.len() {
        buf.clear();
        arc_family_items(buf, sentence, tree.head(m), m, config, ctx)?;
        let label = tree.label(m);
        for st in buf.states() {
            *acc.entry(st.bucket(bits)).or_default() += sign;
            *acc.entry(st.with_label(label).bucket(bits)).or_default() += sign;
        }
    }
    if config.enable_second_order && decoder.uses_siblings() {
        buf.clear();
        for h in 0..=tree.len() {
            let kids = tree.children(h);
            let split = kids.partition_point(|&c| c < h);
            let mut prev = None;
            for &m in kids[..split].iter().rev() {
                sibling_items(buf, sentence, h, m, prev)?;
                prev = Some(m);
            }
            let mut prev = None;
            for &m in &kids[split..] {
                sibling_items(buf, sentence, h, m, prev)?;
                prev = Some(m);
            }
        }
        if decoder == Decoder::SiblingGrandparent {
            for m in 1..=tree.len() {
                let h = tree.head(m);
                if h != 0 {
                    grandparent_items(buf, sentence, tree.head(h), h, m)?;
                }
            }
        }
        for st in buf.states() {
            *acc.entry(st.bucket(bits)).or_default() += sign;
        }
    }
    Ok(())
}

fn check_corpus(corpus: &[Sentence], resources: &TrainResources<'_>, config: &TemplateConfig) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Training("training corpus is empty".into()));
    }
    if let Some(i) = corpus.iter().position(|s| s.gold_tree().is_none()) {
        return Err(Error::Training(format!("sentence {} has no gold tree", i + 1)));
    }
    config.validate()?;
    if config.enable_clusters && resources.clusters.is_none() {
        return Err(Error::Training("cluster features enabled but no lexicon supplied".into()));
    }
    if config.enable_stacking {
        let stacked = resources
            .stacked
            .ok_or_else(|| Error::Training("stacking features enabled but no annotations supplied".into()))?;
        if stacked.len() != corpus.len() {
            return Err(Error::LengthMismatch {
                what: "stacked annotations",
                expected: corpus.len(),
                found: stacked.len(),
            });
        }
    }
    Ok(())
}

/// Averaged structured perceptron over the chosen decoder.
///
/// Projective decoders skip sentences whose gold tree is non-projective.
pub fn train_structured(
    corpus: &[Sentence],
    options: &TrainOptions,
    resources: &TrainResources<'_>,
) -> Result<(Model, TrainLog)> {
    let config = &options.config;
    check_corpus(corpus, resources, config)?;
    let labels: Arc<[String]> = Arc::from(label_inventory(corpus));
    let decoder = options.decoder;

    let mut usable = Vec::with_capacity(corpus.len());
    let mut skipped = 0;
    for (i, s) in corpus.iter().enumerate() {
        if decoder.is_projective() && !is_projective(s.gold_tree().unwrap())? {
            skipped += 1;
        } else {
            usable.push(i);
        }
    }
    if skipped > 0 {
        info!("skipped {skipped} non-projective training sentences");
    }
    if usable.is_empty() {
        return Err(Error::Training("no usable training sentences".into()));
    }

    let mut avg = Averager::new(config.num_buckets());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut log = TrainLog {
        epochs: Vec::new(),
        skipped_nonprojective: skipped,
    };
    let mut buf = FeatureBuffer::new();
    let mut order = usable.clone();
    for epoch in 1..=options.epochs {
        let start = Instant::now();
        if options.shuffle {
            order.shuffle(&mut rng);
        }
        let (mut tokens, mut heads_ok, mut labels_ok, mut updates) = (0usize, 0usize, 0usize, 0usize);
        for &i in &order {
            let sentence = &corpus[i];
            let gold = sentence.gold_tree().unwrap();
            let ctx = resources.context(i);
            let pred = decode_with(sentence, &avg.weights, config, &labels, &ctx, decoder)?;
            tokens += gold.len();
            for m in 1..=gold.len() {
                if pred.head(m) == gold.head(m) {
                    heads_ok += 1;
                    if pred.label(m) == gold.label(m) {
                        labels_ok += 1;
                    }
                }
            }
            if &pred != gold {
                let mut diff = HashMap::new();
                accumulate_tree_features(&mut diff, sentence, gold, decoder, config, &ctx, 1.0, &mut buf)?;
                accumulate_tree_features(&mut diff, sentence, &pred, decoder, config, &ctx, -1.0, &mut buf)?;
                for (b, d) in diff {
                    if d != 0.0 {
                        avg.update(b, d);
                    }
                }
                updates += 1;
            }
            avg.tick();
        }
        let stats = EpochStats {
            epoch,
            uas: ratio(heads_ok, tokens),
            las: ratio(labels_ok, tokens),
            updates,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!(
            "epoch {epoch}: uas {:.4} las {:.4} updates {updates}",
            stats.uas, stats.las
        );
        log.epochs.push(stats);
    }

    let model = Model::new(
        ModelKind::Graph(decoder),
        config.clone(),
        labels.to_vec(),
        to_f32(&avg.averaged()),
        ModelMeta {
            fingerprint: fingerprint(corpus),
            epochs: options.epochs as u32,
            seed: options.seed,
        },
    )?;
    Ok((model, log))
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn class_score<W: Weights + ?Sized>(weights: &W, features: &FeatureVector, class: usize, bits: u8) -> f64 {
    features
        .entries()
        .iter()
        .map(|&(b, v)| weights.weight(class_bucket(b, class, bits)) * v)
        .sum()
}

/// Averaged multiclass perceptron weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassModel {
    pub weights: Vec<f32>,
    pub num_classes: usize,
    pub hash_bits: u8,
}

impl MulticlassModel {
    pub fn score(&self, features: &FeatureVector, class: usize) -> f64 {
        class_score(&self.weights[..], features, class, self.hash_bits)
    }

    /// Highest-scoring class; ties go to the lowest class id.
    pub fn predict(&self, features: &FeatureVector) -> usize {
        argmax((0..self.num_classes).map(|c| self.score(features, c)))
    }
}

fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, s) in scores.enumerate() {
        if i == 0 || s > best {
            best = s;
            arg = i;
        }
    }
    arg
}

/// Averaged multiclass perceptron over hashed features; class weights live
/// at `class_bucket(bucket, class)`.
pub fn train_multiclass(
    instances: &[(FeatureVector, usize)],
    num_classes: usize,
    hash_bits: u8,
    epochs: usize,
    seed: u64,
    shuffle: bool,
) -> Result<MulticlassModel> {
    if instances.is_empty() {
        return Err(Error::Training("no training instances".into()));
    }
    let distinct: BTreeSet<usize> = instances.iter().map(|(_, c)| *c).collect();
    if num_classes < 2 || distinct.len() < 2 {
        return Err(Error::Training("multiclass training needs at least two classes".into()));
    }
    if let Some(&c) = distinct.iter().find(|&&c| c >= num_classes) {
        return Err(Error::Training(format!("class {c} out of range")));
    }
    TemplateConfig::with_hash_bits(hash_bits)?;
    let mut avg = Averager::new(1usize << hash_bits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    for _ in 0..epochs {
        if shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let (fv, gold) = &instances[i];
            let pred = argmax((0..num_classes).map(|c| class_score(&avg.weights, fv, c, hash_bits)));
            if pred != *gold {
                for &(b, v) in fv.entries() {
                    avg.update(class_bucket(b, *gold, hash_bits), v);
                    avg.update(class_bucket(b, pred, hash_bits), -v);
                }
            }
            avg.tick();
        }
    }
    Ok(MulticlassModel {
        weights: to_f32(&avg.averaged()),
        num_classes,
        hash_bits,
    })
}
