#![allow(clippy::cloned_ref_to_slice_refs, clippy::type_complexity, clippy::field_reassign_with_default)]

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fail.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdparse::eval::{attachment_scores, bench_speed, graph_f1, BenchOptions};
use sdparse::features::{ArcContext, TemplateConfig};
use sdparse::fixtures::{toy_heldout, toy_train, transform_fixture_set};
use sdparse::graph_parser::{
    brute_force_decode, decode_nonprojective, decode_projective, decode_projective_sibling, hill_climb_traced, parse,
    tree_score, ArcScores, Decoder, GrandparentScores, SiblingScores,
};
use sdparse::io::{fingerprint, write_conll};
use sdparse::learn::{train_structured, Model, TrainOptions, TrainResources};
use sdparse::sd_transform::{
    apply_rule1, apply_rule2, basic_to_ccprocessed, collapse_conj, collapse_preps, propagate_conjuncts, Rule1Mode,
};
use sdparse::stacking::{
    annotate_training, build_plan, stacked_parse_with, train_stacked, FirstStage, ParserFamily, ParserSpec, StackedBundle,
};
use sdparse::transition_parser::{oracle_sequence, train_transition, ParserConfig};
use sdparse::{tree_to_graph, DependencyArc, DependencyGraph, DependencyTree, Sentence};

/// Score range of random decoder instances.
const SCORE_RANGE: f64 = 10.0;
/// Allowed gap between a decoder's tree score and the brute-force optimum.
const SCORE_TOL: f64 = 1e-9;
/// Minimum training UAS for the learner-fit criterion.
const MIN_TRAIN_UAS: f64 = 0.99;
/// Minimum held-out UAS for the learner-fit criterion.
const MIN_HELDOUT_UAS: f64 = 0.90;
/// Timing repeats per decoder; the fastest run is kept.
const BENCH_REPEATS: usize = 5;
const BENCH_WARMUP: usize = 10;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Every single-root head array over `n` tokens, by filtering all `n^n`
/// arrays for acyclicity.
fn all_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = (n + 1).pow(n as u32);
    let mut heads = vec![0usize; n];
    'outer: for code in 0..total {
        let mut c = code;
        for h in heads.iter_mut() {
            *h = c % (n + 1);
            c /= n + 1;
        }
        if heads.iter().filter(|&&h| h == 0).count() != 1 {
            continue;
        }
        for (i, &h) in heads.iter().enumerate() {
            if h == i + 1 {
                continue 'outer;
            }
        }
        for start in 1..=n {
            let mut cur = start;
            for _ in 0..=n {
                if cur == 0 {
                    break;
                }
                cur = heads[cur - 1];
            }
            if cur != 0 {
                continue 'outer;
            }
        }
        out.push(heads.clone());
    }
    out
}

/// No two arcs cross when drawn above the sentence (ROOT at position 0).
fn no_crossing(heads: &[usize]) -> bool {
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

fn oracle_arc_total(heads: &[usize], arc: &[Vec<f64>]) -> f64 {
    heads.iter().enumerate().map(|(i, &h)| arc[h][i + 1]).sum()
}

/// Consecutive-sibling total: children on each side of a head, taken from
/// the head outward, each scored against the previous one (`None` first).
fn oracle_sibling_total(heads: &[usize], sib: &dyn Fn(usize, Option<usize>, usize) -> f64) -> f64 {
    let n = heads.len();
    let mut total = 0.0;
    for h in 0..=n {
        let left: Vec<usize> = (1..h).rev().filter(|&m| heads[m - 1] == h).collect();
        let right: Vec<usize> = (h + 1..=n).filter(|&m| heads[m - 1] == h).collect();
        for side in [left, right] {
            let mut prev = None;
            for m in side {
                total += sib(h, prev, m);
                prev = Some(m);
            }
        }
    }
    total
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|_| (0..=n).map(|_| rng.gen_range(-SCORE_RANGE..=SCORE_RANGE)).collect())
        .collect()
}

fn arc_scores(m: &[Vec<f64>]) -> ArcScores {
    ArcScores::unlabeled(m.len() - 1, |h, d| m[h][d])
}

// ---------------------------------------------------------------------------
// Criteria

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for n in 2..=7 {
        let trees = all_trees(n);
        let proj: Vec<&Vec<usize>> = trees.iter().filter(|h| no_crossing(h)).collect();
        for i in 0..500 {
            let m = random_matrix(&mut rng, n);
            let scores = arc_scores(&m);
            let best_all = trees.iter().map(|h| oracle_arc_total(h, &m)).fold(f64::NEG_INFINITY, f64::max);
            let best_proj = proj.iter().map(|h| oracle_arc_total(h, &m)).fold(f64::NEG_INFINITY, f64::max);
            let p = decode_projective(&scores);
            let np = decode_nonprojective(&scores);
            let (ps, nps) = (oracle_arc_total(p.heads(), &m), oracle_arc_total(np.heads(), &m));
            check((ps - best_proj).abs() <= SCORE_TOL, format!("n={n} instance {i}: projective {ps} vs brute force {best_proj}"))?;
            check((nps - best_all).abs() <= SCORE_TOL, format!("n={n} instance {i}: non-projective {nps} vs brute force {best_all}"))?;
            if n <= 6 {
                let lib = brute_force_decode(&scores, None, true).map_err(|e| e.to_string())?;
                check((oracle_arc_total(lib.heads(), &m) - best_proj).abs() <= SCORE_TOL, "library brute force disagrees with oracle")?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} instances, scores within {SCORE_TOL:e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=6 {
        let proj: Vec<Vec<usize>> = all_trees(n).into_iter().filter(|h| no_crossing(h)).collect();
        for i in 0..200 {
            let m = random_matrix(&mut rng, n);
            let table: Vec<Vec<Vec<f64>>> = (0..=n)
                .map(|_| {
                    (0..=n + 1)
                        .map(|_| (0..=n).map(|_| rng.gen_range(-SCORE_RANGE..=SCORE_RANGE)).collect())
                        .collect()
                })
                .collect();
            let sib_fn = |h: usize, s: Option<usize>, d: usize| table[h][s.map_or(n + 1, |s| s)][d];
            let total = |heads: &[usize]| {
                let mut t = oracle_arc_total(heads, &m);
                t += oracle_sibling_total(heads, &sib_fn);
                t
            };
            let best = proj.iter().map(|h| total(h)).fold(f64::NEG_INFINITY, f64::max);
            let sib = SiblingScores::new(n, sib_fn);
            let got = decode_projective_sibling(&arc_scores(&m), &sib);
            let gs = total(got.heads());
            check(
                (gs - best).abs() <= SCORE_TOL,
                format!("n={n} instance {i}: sibling decoder {gs} vs brute force {best}"),
            )?;
        }
    }
    Ok(format!("1000 instances, scores within {SCORE_TOL:e}"))
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> DependencyTree {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for (k, &m) in order.iter().enumerate().skip(1) {
        heads[m - 1] = order[rng.gen_range(0..k)];
    }
    DependencyTree::with_uniform_label(heads, "dep").unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut moves = 0;
    for i in 0..200 {
        let n = rng.gen_range(2..=10);
        let m = random_matrix(&mut rng, n);
        let arc = arc_scores(&m);
        let sib = SiblingScores::new(n, |_, _, _| rng.gen_range(-SCORE_RANGE..=SCORE_RANGE));
        let gp = GrandparentScores::new(n, |_, _, _| rng.gen_range(-SCORE_RANGE..=SCORE_RANGE));
        let init = random_tree(&mut rng, n);
        let (out, steps) = hill_climb_traced(&arc, &sib, &gp, &init);
        sdparse::validate_tree(&out, n).map_err(|e| format!("instance {i}: invalid output {e}"))?;
        check(out.children(0).len() == 1, format!("instance {i}: not single-rooted"))?;
        let before = tree_score(init.heads(), &arc, Some(&sib), Some(&gp));
        let after = tree_score(out.heads(), &arc, Some(&sib), Some(&gp));
        check(after >= before, format!("instance {i}: score fell {before} -> {after}"))?;
        let mut prev = before;
        for s in &steps {
            check(s.score_before == prev, format!("instance {i}: trace is not contiguous"))?;
            check(s.score_after > s.score_before, format!("instance {i}: accepted a non-improving move"))?;
            prev = s.score_after;
        }
        check(prev == after, format!("instance {i}: trace does not end at the output score"))?;
        moves += steps.len();
    }
    Ok(format!("200 instances, {moves} accepted moves, all strictly improving"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut count = 0;
    for n in 1..=5 {
        for heads in all_trees(n).into_iter().filter(|h| no_crossing(h)) {
            let labels = (0..n).map(|i| format!("l{}", i % 3)).collect();
            let gold = DependencyTree::new(heads, labels).unwrap();
            let seq = oracle_sequence(&gold).map_err(|e| e.to_string())?;
            check(seq.len() == 2 * n, format!("{:?}: {} transitions", gold.heads(), seq.len()))?;
            let mut c = ParserConfig::initial(n);
            for t in &seq {
                c.apply_mut(t).map_err(|e| e.to_string())?;
            }
            check(c.to_tree().map_err(|e| e.to_string())? == gold, format!("{:?} not reproduced", gold.heads()))?;
            count += 1;
        }
    }
    Ok(format!("{count} projective trees in {:.2}s", start.elapsed().as_secs_f64()))
}

fn uas_of(model: &Model, corpus: &[Sentence], decoder: Decoder) -> Result<f64, String> {
    let ctx = ArcContext {
        clusters: None,
        stacked: None,
    };
    let pred: Vec<DependencyTree> = corpus
        .iter()
        .map(|s| parse(s, model, &ctx, decoder))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let gold: Vec<DependencyTree> = corpus.iter().map(|s| s.gold_tree().unwrap().clone()).collect();
    attachment_scores(&gold, &pred).map(|s| s.uas).map_err(|e| e.to_string())
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let train = toy_train();
    check(
        fingerprint(&train) == 15321545897490662424,
        "toy corpus fingerprint changed",
    )?;
    let options = TrainOptions::new(Decoder::Projective, TemplateConfig::default());
    let (model, log) = train_structured(&train, &options, &TrainResources::default()).map_err(|e| e.to_string())?;
    let reached = log.epochs.iter().find(|e| e.uas >= MIN_TRAIN_UAS).map(|e| e.epoch);
    let train_uas = uas_of(&model, &train, Decoder::Projective)?;
    let heldout_uas = uas_of(&model, &toy_heldout(), Decoder::Projective)?;
    check(train_uas >= MIN_TRAIN_UAS, format!("training UAS {train_uas:.4}"))?;
    check(reached.is_some(), "training UAS target not reached within 10 epochs")?;
    check(heldout_uas >= MIN_HELDOUT_UAS, format!("held-out UAS {heldout_uas:.4}"))?;
    Ok(format!(
        "train UAS {train_uas:.4} (epoch {} online), held-out UAS {heldout_uas:.4}, {:.1}s",
        reached.unwrap(),
        start.elapsed().as_secs_f64()
    ))
}

fn idempotent_stages(f: &sdparse::fixtures::TransformFixture, mode: Rule1Mode) -> Result<(), String> {
    let s = &f.sentence;
    let g0 = tree_to_graph(&f.tree);
    let stages: [(&str, Box<dyn Fn(&DependencyGraph) -> DependencyGraph>); 5] = [
        ("collapse_preps", Box::new(|g| collapse_preps(g, s).0)),
        ("collapse_conj", Box::new(|g| collapse_conj(g, s).0)),
        ("propagate", Box::new(|g| propagate_conjuncts(g).0)),
        ("rule1", Box::new(move |g| apply_rule1(g, s, mode).0)),
        ("rule2", Box::new(|g| apply_rule2(g, s).0)),
    ];
    let mut g = g0;
    for (name, stage) in &stages {
        let once = stage(&g);
        check(stage(&once) == once, format!("{}: {name} is not idempotent", f.name))?;
        g = once;
    }
    Ok(())
}

fn criterion_6() -> Outcome {
    let set = transform_fixture_set();
    check(set.len() >= 12, format!("only {} fixtures", set.len()))?;
    let mut runs = 0;
    for f in &set {
        let (got, trace) = basic_to_ccprocessed(&f.tree, &f.sentence, &f.config);
        check(got == f.expected, format!("{}: output differs from the golden graph", f.name))?;
        check(trace.replay(&tree_to_graph(&f.tree)) == got, format!("{}: trace replay differs", f.name))?;
        runs += 1;
        let modes: &[Rule1Mode] = if f.mode_independent {
            &[Rule1Mode::Corrected, Rule1Mode::Literal]
        } else {
            std::slice::from_ref(&f.config.rule1_mode)
        };
        for &mode in modes {
            let mut config = f.config.clone();
            config.rule1_mode = mode;
            let (g, _) = basic_to_ccprocessed(&f.tree, &f.sentence, &config);
            check(g == f.expected, format!("{}: differs under {} mode", f.name, mode.name()))?;
            idempotent_stages(f, mode)?;
            runs += 1;
        }
    }
    Ok(format!("{} fixtures, {runs} pipeline runs, all stages idempotent", set.len()))
}

fn t(heads: &[usize], labels: &[&str]) -> DependencyTree {
    DependencyTree::new(heads.to_vec(), labels.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn criterion_7() -> Outcome {
    let gold = t(&[2, 0, 2], &["a", "root", "b"]);
    let s = attachment_scores(&[gold.clone()], &[t(&[2, 0, 1], &["a", "root", "b"])]).map_err(|e| e.to_string())?;
    check(s.uas == 2.0 / 3.0, format!("UAS {} != 2/3", s.uas))?;
    let s = attachment_scores(&[gold.clone()], &[t(&[2, 0, 2], &["a", "root", "x"])]).map_err(|e| e.to_string())?;
    check(s.uas == 1.0 && s.las == 2.0 / 3.0, "one wrong label")?;
    check(attachment_scores(&[], &[]).is_err(), "empty corpus accepted")?;

    let g: DependencyGraph = [("det", 2, 1), ("nsubj", 3, 2), ("root", 0, 3)]
        .iter()
        .map(|&(l, p, c)| DependencyArc::new(l, p, c))
        .collect();
    let p: DependencyGraph = [("det", 2, 1), ("dobj", 3, 2), ("root", 0, 3)]
        .iter()
        .map(|&(l, p, c)| DependencyArc::new(l, p, c))
        .collect();
    let l = graph_f1(&[g.clone()], &[p.clone()], true).map_err(|e| e.to_string())?;
    check(l.precision == 2.0 / 3.0 && l.recall == 2.0 / 3.0 && l.f1 == 2.0 / 3.0, "labeled F1 2/3 case")?;
    check(graph_f1(&[g.clone()], &[p], false).map_err(|e| e.to_string())?.f1 == 1.0, "unlabeled split")?;
    check(graph_f1(&[g.clone()], &[g], true).map_err(|e| e.to_string())?.f1 == 1.0, "identity")?;

    let corpus = toy_train();
    let labels = ["det", "amod", "nsubj", "dobj", "prep", "pobj", "dep"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..1000 {
        let s = &corpus[trial % corpus.len()];
        let gold = s.gold_tree().unwrap();
        let n = gold.len();
        let mut heads = gold.heads().to_vec();
        let mut labs = gold.labels().to_vec();
        for _ in 0..rng.gen_range(0..=3) {
            let m = rng.gen_range(1..=n);
            if rng.gen_bool(0.5) {
                labs[m - 1] = labels[rng.gen_range(0..labels.len())].to_string();
            } else {
                let h = rng.gen_range(0..=n);
                if h != m {
                    heads[m - 1] = h;
                }
            }
        }
        let Ok(pred) = DependencyTree::new_unchecked(heads, labs) else {
            continue;
        };
        let a = attachment_scores(&[gold.clone()], &[pred.clone()]).map_err(|e| e.to_string())?;
        let expected_uas = (1..=n).filter(|&m| pred.head(m) == gold.head(m)).count() as f64 / n as f64;
        check(a.uas == expected_uas, format!("trial {trial}: UAS {} vs hand count {expected_uas}", a.uas))?;
        check(a.las <= a.uas, format!("trial {trial}: LAS > UAS"))?;
        let (gg, pg) = (tree_to_graph(gold), tree_to_graph(&pred));
        let lf = graph_f1(&[gg.clone()], &[pg.clone()], true).map_err(|e| e.to_string())?;
        let uf = graph_f1(&[gg], &[pg], false).map_err(|e| e.to_string())?;
        check(lf.f1 <= uf.f1, format!("trial {trial}: labeled F1 > unlabeled F1"))?;
    }
    Ok("closed forms exact; 1000 perturbations respect LAS<=UAS and F1 ordering".into())
}

fn stack_spec(family: ParserFamily, stacking: bool) -> ParserSpec {
    let mut config = TemplateConfig::default();
    config.enable_stacking = stacking;
    ParserSpec {
        family,
        config,
        epochs: 5,
        seed: 1,
    }
}

fn criterion_8() -> Outcome {
    let corpus = toy_train();
    let second = ParserFamily::Graph(Decoder::Projective);

    let mut plan = build_plan(corpus.len(), 3, stack_spec(ParserFamily::Transition, false), stack_spec(second, true))
        .map_err(|e| e.to_string())?;
    let ann = annotate_training(&mut plan, &corpus, None).map_err(|e| e.to_string())?;
    train_stacked(&mut plan, &corpus, &ann, None).map_err(|e| e.to_string())?;
    let audit = StackedBundle::from_plan(&plan).map_err(|e| e.to_string())?.audit_report();
    check(audit.violations.is_empty() && plan.audit_report().violations.is_empty(), audit.summary())?;

    let mut off = build_plan(corpus.len(), 3, stack_spec(ParserFamily::Transition, false), stack_spec(second, false))
        .map_err(|e| e.to_string())?;
    let ann_off = annotate_training(&mut off, &corpus, None).map_err(|e| e.to_string())?;
    train_stacked(&mut off, &corpus, &ann_off, None).map_err(|e| e.to_string())?;
    let plain_options = TrainOptions {
        decoder: Decoder::Projective,
        config: stack_spec(second, false).config,
        epochs: 5,
        seed: 1,
        shuffle: false,
    };
    let (plain, _) = train_structured(&corpus, &plain_options, &TrainResources::default()).map_err(|e| e.to_string())?;
    check(
        off.second_model.as_ref().unwrap().to_bytes() == plain.to_bytes(),
        "stacking-disabled h differs from the plain parser",
    )?;

    let mut oracle = build_plan(corpus.len(), 3, stack_spec(ParserFamily::Oracle, false), stack_spec(second, true))
        .map_err(|e| e.to_string())?;
    let ann_oracle = annotate_training(&mut oracle, &corpus, None).map_err(|e| e.to_string())?;
    let stacked_log = train_stacked(&mut oracle, &corpus, &ann_oracle, None).map_err(|e| e.to_string())?;
    let (_, plain_log) = train_structured(&corpus, &plain_options, &TrainResources::default()).map_err(|e| e.to_string())?;
    let h = oracle.second_model.as_ref().unwrap();
    let train_gold: Vec<DependencyTree> = corpus.iter().map(|s| s.gold_tree().unwrap().clone()).collect();
    let train_pred: Vec<DependencyTree> = corpus
        .iter()
        .map(|s| stacked_parse_with(s, &FirstStage::Oracle, h))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let stacked_train = attachment_scores(&train_gold, &train_pred).map_err(|e| e.to_string())?.uas;
    let plain_train = uas_of(&plain, &corpus, Decoder::Projective)?;
    check(
        stacked_train >= plain_train,
        format!("oracle-stacked training UAS {stacked_train:.4} < plain {plain_train:.4}"),
    )?;
    let heldout = toy_heldout();
    let gold: Vec<DependencyTree> = heldout.iter().map(|s| s.gold_tree().unwrap().clone()).collect();
    let stacked_pred: Vec<DependencyTree> = heldout
        .iter()
        .map(|s| stacked_parse_with(s, &FirstStage::Oracle, h))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let stacked_uas = attachment_scores(&gold, &stacked_pred).map_err(|e| e.to_string())?.uas;
    let plain_uas = uas_of(&plain, &heldout, Decoder::Projective)?;
    let online_stacked: f64 = stacked_log.epochs.iter().map(|e| e.uas).sum();
    let online_plain: f64 = plain_log.epochs.iter().map(|e| e.uas).sum();
    check(
        stacked_uas >= plain_uas,
        format!("oracle-stacked held-out UAS {stacked_uas:.4} < plain {plain_uas:.4}"),
    )?;
    Ok(format!(
        "0 violations over {} sentences; bit-identical h without stacking; oracle-stacked UAS train {stacked_train:.4} >= {plain_train:.4}, held-out {stacked_uas:.4} >= {plain_uas:.4} (online sums {online_stacked:.3} vs {online_plain:.3})",
        audit.sentences
    ))
}

fn criterion_9() -> Outcome {
    let corpus = toy_train();
    let mut config = TemplateConfig::default();
    config.enable_second_order = true;
    let options = TrainOptions {
        decoder: Decoder::SiblingGrandparent,
        config,
        epochs: 5,
        seed: 1,
        shuffle: false,
    };
    let (model, _) = train_structured(&corpus, &options, &TrainResources::default()).map_err(|e| e.to_string())?;
    let ctx = ArcContext {
        clusters: None,
        stacked: None,
    };
    let rate = |decoder: Decoder| -> Result<f64, String> {
        let mut best: f64 = 0.0;
        for _ in 0..BENCH_REPEATS {
            let r = bench_speed(
                &corpus,
                BenchOptions {
                    warmup: BENCH_WARMUP,
                    workers: 1,
                },
                |s| parse(s, &model, &ctx, decoder),
                None,
            )
            .map_err(|e| e.to_string())?;
            best = best.max(r.tokens_per_second);
        }
        Ok(best)
    };
    let first = rate(Decoder::Projective)?;
    let sib = rate(Decoder::Sibling)?;
    let full = rate(Decoder::SiblingGrandparent)?;
    let msg = format!("tokens/s first-order {first:.0} > sibling {sib:.0} > sibling+hill-climb {full:.0}");
    check(first > sib && sib > full, msg.clone())?;
    Ok(msg)
}

fn conll_bytes(corpus: &[Sentence], trees: &[DependencyTree]) -> Vec<u8> {
    let mut out = Vec::new();
    write_conll(&mut out, corpus, trees).unwrap();
    out
}

fn criterion_10() -> Outcome {
    let corpus = toy_train();
    let heldout = toy_heldout();
    let ctx = ArcContext {
        clusters: None,
        stacked: None,
    };
    let mut config = TemplateConfig::default();
    config.enable_second_order = true;
    for decoder in [Decoder::Projective, Decoder::NonProjective, Decoder::SiblingGrandparent] {
        let options = TrainOptions {
            decoder,
            config: config.clone(),
            epochs: 3,
            seed: 11,
            shuffle: true,
        };
        let runs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
            .map(|_| {
                let (m, _) = train_structured(&corpus, &options, &TrainResources::default()).unwrap();
                let trees: Vec<DependencyTree> = heldout.iter().map(|s| parse(s, &m, &ctx, decoder).unwrap()).collect();
                (m.to_bytes(), conll_bytes(&heldout, &trees))
            })
            .collect();
        check(runs[0].0 == runs[1].0, format!("{} model bytes differ", decoder.name()))?;
        check(runs[0].1 == runs[1].1, format!("{} parse output differs", decoder.name()))?;
    }
    let (a, _) = train_transition(&corpus, &TemplateConfig::default(), 3, 5).map_err(|e| e.to_string())?;
    let (b, _) = train_transition(&corpus, &TemplateConfig::default(), 3, 5).map_err(|e| e.to_string())?;
    check(a.to_bytes() == b.to_bytes(), "transition model bytes differ")?;
    Ok("graph (proj, nonproj, sib-gp) and transition models bit-identical; parses identical".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("decoder-oracle equivalence", criterion_1),
        ("second-order equivalence", criterion_2),
        ("hill-climb contract", criterion_3),
        ("transition-oracle round trip", criterion_4),
        ("learner fit", criterion_5),
        ("transform goldens", criterion_6),
        ("metric closed forms", criterion_7),
        ("stacking no-cheat audit", criterion_8),
        ("throughput ordering", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(*f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("criterion 11 SKIP  full-scale treebank reproduction: needs licensed data, see README");
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
