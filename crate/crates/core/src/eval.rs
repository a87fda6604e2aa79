//! Attachment scores, graph F1, throughput measurement and CSV reports.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::sentence::Sentence;
use crate::tree::{DependencyGraph, DependencyTree};
use crate::{Error, Result};

/// Fine tags treated as punctuation by [`PunctPolicy::ExcludeByPos`].
pub const PUNCT_TAGS: [&str; 5] = ["``", "''", ".", ",", ":"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PunctPolicy {
    #[default]
    Include,
    ExcludeByPos,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttachmentScores {
    pub uas: f64,
    pub las: f64,
    pub scored_tokens: usize,
    pub sentences: usize,
}

fn check_parallel(gold: usize, pred: usize) -> Result<()> {
    if gold == 0 {
        return Err(Error::LengthMismatch {
            what: "evaluation corpus",
            expected: 1,
            found: 0,
        });
    }
    if gold != pred {
        return Err(Error::LengthMismatch {
            what: "predicted corpus",
            expected: gold,
            found: pred,
        });
    }
    Ok(())
}

/// UAS and LAS over every token.
pub fn attachment_scores(gold: &[DependencyTree], pred: &[DependencyTree]) -> Result<AttachmentScores> {
    score_trees(gold, pred, |_, _| true)
}

/// UAS and LAS under a punctuation policy; POS tags come from `sentences`.
pub fn attachment_scores_with(
    sentences: &[Sentence],
    gold: &[DependencyTree],
    pred: &[DependencyTree],
    policy: PunctPolicy,
) -> Result<AttachmentScores> {
    if sentences.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "sentences",
            expected: gold.len(),
            found: sentences.len(),
        });
    }
    score_trees(gold, pred, |s, m| match policy {
        PunctPolicy::Include => true,
        PunctPolicy::ExcludeByPos => !PUNCT_TAGS.contains(&sentences[s].pos_at(m)),
    })
}

fn score_trees(gold: &[DependencyTree], pred: &[DependencyTree], keep: impl Fn(usize, usize) -> bool) -> Result<AttachmentScores> {
    check_parallel(gold.len(), pred.len())?;
    let (mut total, mut heads, mut labeled) = (0usize, 0usize, 0usize);
    for (s, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::LengthMismatch {
                what: "predicted sentence",
                expected: g.len(),
                found: p.len(),
            });
        }
        for m in 1..=g.len() {
            if !keep(s, m) {
                continue;
            }
            total += 1;
            if g.head(m) == p.head(m) {
                heads += 1;
                if g.label(m) == p.label(m) {
                    labeled += 1;
                }
            }
        }
    }
    let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
    Ok(AttachmentScores {
        uas: frac(heads),
        las: frac(labeled),
        scored_tokens: total,
        sentences: gold.len(),
    })
}

/// Precision, recall and their harmonic mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// Micro-averaged F1 over graphs. Unlabeled matching compares ⟨P,C⟩ pairs
/// as sets.
pub fn graph_f1(gold: &[DependencyGraph], pred: &[DependencyGraph], labeled: bool) -> Result<Prf> {
    check_parallel(gold.len(), pred.len())?;
    let (mut matched, mut n_pred, mut n_gold) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        if labeled {
            matched += g.iter().filter(|a| p.contains(a)).count();
            n_gold += g.len();
            n_pred += p.len();
        } else {
            let pairs = |x: &DependencyGraph| -> BTreeSet<(usize, usize)> { x.iter().map(|a| (a.parent(), a.child())).collect() };
            let (gp, pp) = (pairs(g), pairs(p));
            matched += gp.intersection(&pp).count();
            n_gold += gp.len();
            n_pred += pp.len();
        }
    }
    Ok(Prf::from_counts(matched, n_pred, n_gold))
}

/// Wall-clock accounting for a benchmark run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchResult {
    pub sentences: usize,
    pub tokens: usize,
    pub parse_seconds: f64,
    pub transform_seconds: f64,
    pub total_seconds: f64,
    pub tokens_per_second: f64,
}

impl BenchResult {
    pub fn to_key_values(&self) -> String {
        format!(
            "sentences={}\ntokens={}\nparse_seconds={:.6}\ntransform_seconds={:.6}\ntotal_seconds={:.6}\ntokens_per_second={:.4}\n",
            self.sentences, self.tokens, self.parse_seconds, self.transform_seconds, self.total_seconds, self.tokens_per_second
        )
    }
}

pub const DEFAULT_WARMUP: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchOptions {
    /// Leading sentences parsed but excluded from timing.
    pub warmup: usize,
    /// Worker threads; 1 times a single-threaded loop.
    pub workers: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            warmup: DEFAULT_WARMUP,
            workers: 1,
        }
    }
}

type TransformFn<'a> = &'a (dyn Fn(&Sentence, &DependencyTree) -> Result<DependencyGraph> + Sync);

/// Times `parse` (and `transform`, when given) over `corpus[warmup..]`.
///
/// Tokens per second is computed from the parse time plus, when a transform
/// is supplied, the transform time. With several workers the breakdown sums
/// per-sentence times across threads while the rate uses wall-clock time.
pub fn bench_speed<P>(
    corpus: &[Sentence],
    options: BenchOptions,
    parse: P,
    transform: Option<TransformFn<'_>>,
) -> Result<BenchResult>
where
    P: Fn(&Sentence) -> Result<DependencyTree> + Sync,
{
    if corpus.len() <= options.warmup {
        return Err(Error::Bench(format!(
            "corpus has {} sentences but {} are used for warmup; supply a larger corpus",
            corpus.len(),
            options.warmup
        )));
    }
    let (warm, timed) = corpus.split_at(options.warmup);
    for s in warm {
        let t = parse(s)?;
        if let Some(f) = transform {
            f(s, &t)?;
        }
    }
    let run_one = |s: &Sentence| -> Result<(Duration, Duration)> {
        let start = Instant::now();
        let tree = parse(s)?;
        let parse_time = start.elapsed();
        let transform_time = match transform {
            Some(f) => {
                let start = Instant::now();
                f(s, &tree)?;
                start.elapsed()
            }
            None => Duration::ZERO,
        };
        Ok((parse_time, transform_time))
    };
    let wall = Instant::now();
    let times: Vec<(Duration, Duration)> = if options.workers <= 1 {
        timed.iter().map(run_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::Bench(e.to_string()))?;
        pool.install(|| timed.par_iter().map(run_one).collect::<Result<_>>())?
    };
    let wall = wall.elapsed().as_secs_f64();
    let parse_seconds: f64 = times.iter().map(|t| t.0.as_secs_f64()).sum();
    let transform_seconds: f64 = times.iter().map(|t| t.1.as_secs_f64()).sum();
    let total_seconds = if options.workers <= 1 {
        parse_seconds + transform_seconds
    } else {
        wall
    };
    if total_seconds <= 0.0 {
        return Err(Error::Bench("elapsed time is zero; supply a larger corpus".into()));
    }
    let tokens: usize = timed.iter().map(Sentence::len).sum();
    Ok(BenchResult {
        sentences: timed.len(),
        tokens,
        parse_seconds,
        transform_seconds,
        total_seconds,
        tokens_per_second: tokens as f64 / total_seconds,
    })
}

/// Combined report for one system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub uas: Option<f64>,
    pub las: Option<f64>,
    pub unlabeled: Option<Prf>,
    pub labeled: Option<Prf>,
    pub tokens_per_second: Option<f64>,
    pub tokens: usize,
    pub sentences: usize,
    pub parse_seconds: Option<f64>,
    pub transform_seconds: Option<f64>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("sentences={}\ntokens={}\n", self.sentences, self.tokens);
        if let (Some(u), Some(l)) = (self.uas, self.las) {
            out.push_str(&format!("uas={u:.4}\nlas={l:.4}\n"));
        }
        for (name, prf) in [("unlabeled", self.unlabeled), ("labeled", self.labeled)] {
            if let Some(p) = prf {
                out.push_str(&format!(
                    "{name}_precision={:.4}\n{name}_recall={:.4}\n{name}_f1={:.4}\n",
                    p.precision, p.recall, p.f1
                ));
            }
        }
        if let Some(t) = self.tokens_per_second {
            out.push_str(&format!("tokens_per_second={t:.4}\n"));
        }
        if let Some(t) = self.parse_seconds {
            out.push_str(&format!("parse_seconds={t:.6}\n"));
        }
        if let Some(t) = self.transform_seconds {
            out.push_str(&format!("transform_seconds={t:.6}\n"));
        }
        out
    }
}

pub const TRADEOFF_HEADER: [&str; 6] = ["name", "uas", "las", "unlabeled_f1", "labeled_f1", "tokens_per_sec"];

/// CSV with one row per entry in input order; missing values are empty
/// fields.
pub fn tradeoff_report(entries: &[(String, EvalReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRADEOFF_HEADER).expect("writing to memory");
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    for (name, r) in entries {
        w.write_record([
            name.clone(),
            fmt(r.uas),
            fmt(r.las),
            fmt(r.unlabeled.map(|p| p.f1)),
            fmt(r.labeled.map(|p| p.f1)),
            fmt(r.tokens_per_second),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}
