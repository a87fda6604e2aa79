//! Two-stage stacked parsing with jackknifed first-stage annotations.
//!
//! The training corpus is split into `k` sequential parts. First-stage model
//! `gᵢ` is trained on every part except `Pᵢ` and then annotates `Pᵢ`, so the
//! second-stage parser `h` only ever sees first-stage output produced by a
//! model that never trained on that sentence. At test time the final `g`,
//! trained on the full corpus, runs first and `h` decodes with its output as
//! extra features.
//!
//! Bundle layout (little-endian):
//!
//! ```text
//! magic "DFRS", u16 major, u16 minor
//! u8 first family (0 graph, 1 transition, 2 oracle), u8 first decoder code
//! u32 k, then k × (u64 start, u64 end)
//! u32 sentence count, then per sentence: u32 partition, u32 producer
//! u64 length + bytes of final g (length 0 for an oracle first stage)
//! u64 length + bytes of h (length 0 when absent)
//! ```

use std::path::Path;

use log::info;
use rayon::prelude::*;

use crate::features::{ArcContext, StackedAnnotation, TemplateConfig};
use crate::graph_parser::{self, Decoder};
use crate::io::{jackknife_partition, CorpusPartition};
use crate::learn::{train_structured, ByteReader, Model, ModelKind, TrainLog, TrainOptions, TrainResources};
use crate::sentence::Sentence;
use crate::transition_parser::{parse_greedy, train_transition};
use crate::tree::DependencyTree;
use crate::{Error, Result};

pub const BUNDLE_MAGIC: &[u8; 4] = b"DFRS";
pub const BUNDLE_MAJOR: u16 = 1;
pub const BUNDLE_MINOR: u16 = 0;
pub const DEFAULT_K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParserFamily {
    Graph(Decoder),
    Transition,
    /// Returns the annotation file's own trees; useful for upper-bound runs.
    Oracle,
}

impl ParserFamily {
    fn codes(self) -> (u8, u8) {
        match self {
            ParserFamily::Graph(d) => (0, d.code()),
            ParserFamily::Transition => (1, 0),
            ParserFamily::Oracle => (2, 0),
        }
    }

    fn from_codes(family: u8, decoder: u8) -> Result<Self> {
        match family {
            0 => Decoder::from_code(decoder)
                .map(ParserFamily::Graph)
                .ok_or_else(|| Error::Stacking(format!("unknown decoder code {decoder}"))),
            1 => Ok(ParserFamily::Transition),
            2 => Ok(ParserFamily::Oracle),
            f => Err(Error::Stacking(format!("unknown parser family {f}"))),
        }
    }
}

/// Parser family, feature configuration and training schedule.
#[derive(Clone, Debug)]
pub struct ParserSpec {
    pub family: ParserFamily,
    pub config: TemplateConfig,
    pub epochs: usize,
    pub seed: u64,
}

impl ParserSpec {
    pub fn new(family: ParserFamily, config: TemplateConfig) -> Self {
        ParserSpec {
            family,
            config,
            epochs: 10,
            seed: 1,
        }
    }
}

/// A trained first-stage parser.
#[derive(Clone, Debug, PartialEq)]
pub enum FirstStage {
    Model(Model),
    Oracle,
}

impl FirstStage {
    /// Parses `sentence`; the oracle returns its gold tree.
    pub fn parse(&self, sentence: &Sentence) -> Result<DependencyTree> {
        match self {
            FirstStage::Oracle => sentence
                .gold_tree()
                .cloned()
                .ok_or_else(|| Error::Stacking("oracle first stage needs gold trees".into())),
            FirstStage::Model(m) => match m.kind() {
                ModelKind::Transition => parse_greedy(sentence, m),
                ModelKind::Graph(d) => {
                    let ctx = ArcContext {
                        clusters: None,
                        stacked: None,
                    };
                    graph_parser::parse(sentence, m, &ctx, d)
                }
            },
        }
    }
}

/// First-stage output for every training sentence and the id of the model
/// that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedCorpus {
    pub annotations: Vec<StackedAnnotation>,
    pub producers: Vec<usize>,
}

/// One row of the no-cheat audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuditEntry {
    pub partition: usize,
    pub producer: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub sentences: usize,
    pub violations: Vec<usize>,
}

impl AuditReport {
    pub fn summary(&self) -> String {
        format!(
            "no-cheat audit: {} sentences checked, {} violations",
            self.sentences,
            self.violations.len()
        )
    }
}

/// Partitions, stage specifications and trained models.
#[derive(Clone, Debug)]
pub struct StackingPlan {
    pub k: usize,
    pub first: ParserSpec,
    pub second: ParserSpec,
    pub partitions: Vec<CorpusPartition>,
    /// `gᵢ` for each partition.
    pub first_models: Vec<Option<FirstStage>>,
    pub final_first: Option<FirstStage>,
    pub second_model: Option<Model>,
    pub audit: Vec<AuditEntry>,
}

impl StackingPlan {
    /// Partitions used to train first-stage model `id`; the final model has
    /// id `k` and uses all of them.
    pub fn training_parts(&self, id: usize) -> Vec<usize> {
        (0..self.k).filter(|&p| p != id).collect()
    }

    fn partition_of(&self, sentence: usize) -> usize {
        self.partitions
            .iter()
            .position(|p| p.contains(sentence))
            .expect("partitions cover the corpus")
    }

    /// Checks every recorded producer against its training partitions.
    pub fn audit_report(&self) -> AuditReport {
        let violations = self
            .audit
            .iter()
            .enumerate()
            .filter(|(_, e)| e.producer >= self.k || self.training_parts(e.producer).contains(&e.partition))
            .map(|(i, _)| i)
            .collect();
        AuditReport {
            sentences: self.audit.len(),
            violations,
        }
    }
}

/// Splits the corpus and allocates model slots.
pub fn build_plan(corpus_len: usize, k: usize, first: ParserSpec, second: ParserSpec) -> Result<StackingPlan> {
    if !matches!(second.family, ParserFamily::Graph(_)) {
        return Err(Error::Stacking("the second stage must be a graph-based parser".into()));
    }
    if first.config.enable_stacking {
        return Err(Error::Stacking("the first stage cannot use stacking features".into()));
    }
    if first.config.enable_clusters || second.config.enable_clusters {
        return Err(Error::Stacking("cluster features are not supported in stacked training".into()));
    }
    let partitions = jackknife_partition(corpus_len, k)?;
    Ok(StackingPlan {
        k,
        first,
        second,
        partitions,
        first_models: vec![None; k],
        final_first: None,
        second_model: None,
        audit: Vec::new(),
    })
}

fn train_first(spec: &ParserSpec, corpus: &[Sentence]) -> Result<FirstStage> {
    match spec.family {
        ParserFamily::Oracle => Ok(FirstStage::Oracle),
        ParserFamily::Transition => {
            train_transition(corpus, &spec.config, spec.epochs, spec.seed).map(|(m, _)| FirstStage::Model(m))
        }
        ParserFamily::Graph(decoder) => {
            let options = TrainOptions {
                decoder,
                config: spec.config.clone(),
                epochs: spec.epochs,
                seed: spec.seed,
                shuffle: false,
            };
            train_structured(corpus, &options, &TrainResources::default()).map(|(m, _)| FirstStage::Model(m))
        }
    }
}

fn check_first_corpus(corpus: &[Sentence], first_corpus: &[Sentence]) -> Result<()> {
    if first_corpus.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            what: "first-stage annotation corpus",
            expected: corpus.len(),
            found: first_corpus.len(),
        });
    }
    for (i, (a, b)) in corpus.iter().zip(first_corpus).enumerate() {
        if a.len() != b.len() {
            return Err(Error::Stacking(format!(
                "sentence {} has {} tokens but its first-stage annotation has {}",
                i + 1,
                a.len(),
                b.len()
            )));
        }
    }
    Ok(())
}

/// Trains `g₁..g_k` (in parallel) and annotates each part with the model
/// that did not see it. `first_corpus`, when given, supplies the trees the
/// first stage learns from.
pub fn annotate_training(
    plan: &mut StackingPlan,
    corpus: &[Sentence],
    first_corpus: Option<&[Sentence]>,
) -> Result<AnnotatedCorpus> {
    let source = first_corpus.unwrap_or(corpus);
    check_first_corpus(corpus, source)?;
    if plan.partitions.iter().map(CorpusPartition::len).sum::<usize>() != corpus.len() {
        return Err(Error::Stacking("plan was built for a different corpus size".into()));
    }
    let models: Vec<FirstStage> = (0..plan.k)
        .into_par_iter()
        .map(|i| {
            let train: Vec<Sentence> = plan
                .training_parts(i)
                .into_iter()
                .flat_map(|p| plan.partitions[p].slice(source).iter().cloned())
                .collect();
            train_first(&plan.first, &train)
        })
        .collect::<Result<_>>()?;

    let mut annotations = Vec::with_capacity(corpus.len());
    let mut producers = Vec::with_capacity(corpus.len());
    for (i, sentence) in source.iter().enumerate() {
        let part = plan.partition_of(i);
        annotations.push(StackedAnnotation::new(models[part].parse(sentence)?));
        producers.push(part);
    }
    plan.audit = producers
        .iter()
        .enumerate()
        .map(|(i, &producer)| AuditEntry {
            partition: plan.partition_of(i),
            producer,
        })
        .collect();
    plan.first_models = models.into_iter().map(Some).collect();
    info!("annotated {} sentences with {} first-stage models", corpus.len(), plan.k);
    Ok(AnnotatedCorpus { annotations, producers })
}

/// Trains `h` over the annotations and the final `g` on the whole corpus.
pub fn train_stacked(
    plan: &mut StackingPlan,
    corpus: &[Sentence],
    annotated: &AnnotatedCorpus,
    first_corpus: Option<&[Sentence]>,
) -> Result<TrainLog> {
    if annotated.annotations.is_empty() {
        return Err(Error::Stacking("no first-stage annotations".into()));
    }
    if annotated.annotations.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            what: "first-stage annotations",
            expected: corpus.len(),
            found: annotated.annotations.len(),
        });
    }
    let source = first_corpus.unwrap_or(corpus);
    check_first_corpus(corpus, source)?;
    let ParserFamily::Graph(decoder) = plan.second.family else {
        return Err(Error::Stacking("the second stage must be a graph-based parser".into()));
    };
    let options = TrainOptions {
        decoder,
        config: plan.second.config.clone(),
        epochs: plan.second.epochs,
        seed: plan.second.seed,
        shuffle: false,
    };
    let resources = TrainResources {
        clusters: None,
        stacked: Some(&annotated.annotations),
    };
    let (h, log) = train_structured(corpus, &options, &resources)?;
    plan.second_model = Some(h);
    plan.final_first = Some(train_first(&plan.first, source)?);
    Ok(log)
}

/// Runs the final `g`, then `h` with `g`'s tree as stacking input.
pub fn stacked_parse(sentence: &Sentence, plan: &StackingPlan) -> Result<DependencyTree> {
    let g = plan
        .final_first
        .as_ref()
        .ok_or_else(|| Error::Stacking("plan has no trained first stage".into()))?;
    let h = plan
        .second_model
        .as_ref()
        .ok_or_else(|| Error::Stacking("plan has no trained second stage".into()))?;
    stacked_parse_with(sentence, g, h)
}

pub fn stacked_parse_with(sentence: &Sentence, g: &FirstStage, h: &Model) -> Result<DependencyTree> {
    let first = StackedAnnotation::new(g.parse(sentence)?);
    let ctx = ArcContext {
        clusters: None,
        stacked: Some(&first),
    };
    let decoder = h
        .decoder()
        .ok_or_else(|| Error::Stacking("second stage must be a graph model".into()))?;
    graph_parser::parse(sentence, h, &ctx, decoder)
}

/// What a bundle file holds: enough to parse and to re-run the audit.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedBundle {
    pub first_family: ParserFamily,
    pub partitions: Vec<CorpusPartition>,
    pub audit: Vec<AuditEntry>,
    pub first: FirstStage,
    pub second: Option<Model>,
}

impl StackedBundle {
    pub fn from_plan(plan: &StackingPlan) -> Result<Self> {
        Ok(StackedBundle {
            first_family: plan.first.family,
            partitions: plan.partitions.clone(),
            audit: plan.audit.clone(),
            first: plan
                .final_first
                .clone()
                .ok_or_else(|| Error::Stacking("plan has no trained first stage".into()))?,
            second: plan.second_model.clone(),
        })
    }

    pub fn k(&self) -> usize {
        self.partitions.len()
    }

    pub fn audit_report(&self) -> AuditReport {
        let k = self.k();
        let violations = self
            .audit
            .iter()
            .enumerate()
            .filter(|(_, e)| e.producer >= k || e.producer != e.partition)
            .map(|(i, _)| i)
            .collect();
        AuditReport {
            sentences: self.audit.len(),
            violations,
        }
    }

    pub fn parse(&self, sentence: &Sentence) -> Result<DependencyTree> {
        let h = self
            .second
            .as_ref()
            .ok_or_else(|| Error::Stacking("bundle has no second-stage model".into()))?;
        stacked_parse_with(sentence, &self.first, h)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_MAJOR.to_le_bytes());
        out.extend_from_slice(&BUNDLE_MINOR.to_le_bytes());
        let (family, decoder) = self.first_family.codes();
        out.push(family);
        out.push(decoder);
        out.extend_from_slice(&(self.partitions.len() as u32).to_le_bytes());
        for p in &self.partitions {
            out.extend_from_slice(&(p.range.start as u64).to_le_bytes());
            out.extend_from_slice(&(p.range.end as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.audit.len() as u32).to_le_bytes());
        for e in &self.audit {
            out.extend_from_slice(&(e.partition as u32).to_le_bytes());
            out.extend_from_slice(&(e.producer as u32).to_le_bytes());
        }
        let g = match &self.first {
            FirstStage::Model(m) => m.to_bytes(),
            FirstStage::Oracle => Vec::new(),
        };
        for blob in [g, self.second.as_ref().map(Model::to_bytes).unwrap_or_default()] {
            out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            out.extend_from_slice(&blob);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != BUNDLE_MAGIC {
            return Err(Error::Model("not a stacked bundle (bad magic bytes)".into()));
        }
        let major = r.u16()?;
        let _minor = r.u16()?;
        if major != BUNDLE_MAJOR {
            return Err(Error::Version {
                expected: BUNDLE_MAJOR,
                found: major,
            });
        }
        let first_family = ParserFamily::from_codes(r.u8()?, r.u8()?)?;
        let k = r.u32()? as usize;
        let mut partitions = Vec::with_capacity(k.min(1024));
        for part_id in 0..k {
            let start = r.u64()? as usize;
            let end = r.u64()? as usize;
            if end < start {
                return Err(Error::Model("bundle partition has end before start".into()));
            }
            partitions.push(CorpusPartition {
                part_id: part_id + 1,
                range: start..end,
            });
        }
        let n = r.u32()? as usize;
        let mut audit = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            audit.push(AuditEntry {
                partition: r.u32()? as usize,
                producer: r.u32()? as usize,
            });
        }
        let blob = |r: &mut ByteReader<'_>| -> Result<Option<Model>> {
            let len = r.u64()? as usize;
            if len == 0 {
                Ok(None)
            } else {
                Model::from_bytes(r.take(len)?).map(Some)
            }
        };
        let g = blob(&mut r)?;
        let h = blob(&mut r)?;
        if !r.is_done() {
            return Err(Error::Model("trailing bytes after stacked bundle".into()));
        }
        let first = match (first_family, g) {
            (ParserFamily::Oracle, _) => FirstStage::Oracle,
            (_, Some(m)) => FirstStage::Model(m),
            (_, None) => return Err(Error::Model("bundle is missing its first-stage model".into())),
        };
        Ok(StackedBundle {
            first_family,
            partitions,
            audit,
            first,
            second: h,
        })
    }
}

pub fn save_bundle(bundle: &StackedBundle, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<StackedBundle> {
    StackedBundle::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{generate_corpus, ToyGrammar};

    fn spec(family: ParserFamily, stacking: bool) -> ParserSpec {
        let mut config = TemplateConfig::with_hash_bits(18).unwrap();
        config.enable_stacking = stacking;
        ParserSpec {
            family,
            config,
            epochs: 3,
            seed: 1,
        }
    }

    #[test]
    fn nine_sentence_plan() {
        let plan = build_plan(9, 3, spec(ParserFamily::Oracle, false), spec(ParserFamily::Graph(Decoder::Projective), true)).unwrap();
        assert_eq!(plan.training_parts(0), vec![1, 2]);
        assert_eq!(plan.partitions[1].range, 3..6);
        assert_eq!(plan.partition_of(4), 1);
        assert_eq!(plan.training_parts(1), vec![0, 2]);
        assert!(build_plan(2, 3, spec(ParserFamily::Oracle, false), spec(ParserFamily::Graph(Decoder::Projective), true)).is_err());
    }

    #[test]
    fn oracle_annotations_equal_gold_and_bundle_round_trips() {
        let corpus = generate_corpus(&ToyGrammar::default(), 9, 5).unwrap();
        let mut plan = build_plan(9, 3, spec(ParserFamily::Oracle, false), spec(ParserFamily::Graph(Decoder::Projective), true)).unwrap();
        let ann = annotate_training(&mut plan, &corpus, None).unwrap();
        for (a, s) in ann.annotations.iter().zip(&corpus) {
            assert_eq!(a.tree(), s.gold_tree().unwrap());
        }
        assert_eq!(ann.producers[4], 1);
        assert!(plan.audit_report().violations.is_empty());
        train_stacked(&mut plan, &corpus, &ann, None).unwrap();
        let bundle = StackedBundle::from_plan(&plan).unwrap();
        let back = StackedBundle::from_bytes(&bundle.to_bytes()).unwrap();
        assert_eq!(back, bundle);
        assert!(back.audit_report().violations.is_empty());
        let single = Sentence::from_pairs(&[("x", "NN")]).unwrap();
        let single = single.with_gold_tree(Some(DependencyTree::with_uniform_label(vec![0], "root").unwrap())).unwrap();
        assert_eq!(stacked_parse(&single, &plan).unwrap().heads(), &[0]);
    }

    #[test]
    fn empty_annotations_rejected() {
        let corpus = generate_corpus(&ToyGrammar::default(), 4, 5).unwrap();
        let mut plan = build_plan(4, 2, spec(ParserFamily::Oracle, false), spec(ParserFamily::Graph(Decoder::Projective), true)).unwrap();
        let empty = AnnotatedCorpus {
            annotations: Vec::new(),
            producers: Vec::new(),
        };
        assert!(train_stacked(&mut plan, &corpus, &empty, None).is_err());
        assert!(stacked_parse(&corpus[0], &plan).is_err());
    }
}
