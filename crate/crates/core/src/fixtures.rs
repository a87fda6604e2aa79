//! Synthetic corpora and hand-built transform fixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{read_conll, read_sd_graph};
use crate::sd_transform::{Rule1Mode, TransformConfig};
use crate::sentence::{Sentence, Token};
use crate::tree::{DependencyGraph, DependencyTree};
use crate::{Error, Result};

/// A tiny phrase grammar whose head and label choices depend only on POS,
/// so its trees are learnable from tags alone.
///
/// Sentence shape: `NP VP [CC VP] .` with `NP := [DT] JJ{0,2} NN`,
/// `VP := VBD [RB] [NP] [IN NP]`.
#[derive(Clone, Debug)]
pub struct ToyGrammar {
    pub determiners: Vec<&'static str>,
    pub adjectives: Vec<&'static str>,
    pub nouns: Vec<&'static str>,
    pub verbs: Vec<&'static str>,
    pub adverbs: Vec<&'static str>,
    pub prepositions: Vec<&'static str>,
    pub conjunctions: Vec<&'static str>,
    pub p_determiner: f64,
    /// Probabilities of zero, one and two adjectives.
    pub adjective_weights: [f64; 3],
    pub p_adverb: f64,
    pub p_object: f64,
    pub p_pp: f64,
    pub p_coordination: f64,
}

impl Default for ToyGrammar {
    fn default() -> Self {
        ToyGrammar {
            determiners: vec!["the", "a", "this", "every"],
            adjectives: vec!["big", "small", "red", "old", "happy", "quick"],
            nouns: vec![
                "dog", "cat", "man", "woman", "fork", "park", "ball", "tea", "fish", "bird", "car", "house", "book",
                "garden",
            ],
            verbs: vec!["saw", "ate", "liked", "found", "chased", "drank", "took", "read", "kept"],
            adverbs: vec!["quickly", "slowly", "often"],
            prepositions: vec!["with", "in", "on", "near"],
            conjunctions: vec!["and", "or"],
            p_determiner: 0.7,
            adjective_weights: [0.5, 0.3, 0.2],
            p_adverb: 0.3,
            p_object: 0.7,
            p_pp: 0.4,
            p_coordination: 0.3,
        }
    }
}

struct Builder {
    words: Vec<(&'static str, &'static str)>,
    heads: Vec<usize>,
    labels: Vec<&'static str>,
}

impl Builder {
    /// Appends a token and returns its 1-based index; the head is filled in
    /// later.
    fn push(&mut self, form: &'static str, pos: &'static str, label: &'static str) -> usize {
        self.words.push((form, pos));
        self.heads.push(usize::MAX);
        self.labels.push(label);
        self.words.len()
    }

    fn attach(&mut self, m: usize, h: usize) {
        self.heads[m - 1] = h;
    }
}

impl ToyGrammar {
    fn pick(rng: &mut ChaCha8Rng, xs: &[&'static str]) -> &'static str {
        xs.choose(rng).copied().expect("non-empty vocabulary")
    }

    /// Generates an NP; returns the noun's index and the indices of its
    /// premodifiers, all awaiting attachment.
    fn np(&self, rng: &mut ChaCha8Rng, b: &mut Builder, label: &'static str) -> usize {
        let mut mods = Vec::new();
        if rng.gen_bool(self.p_determiner) {
            mods.push(b.push(Self::pick(rng, &self.determiners), "DT", "det"));
        }
        let r: f64 = rng.gen();
        let n_adj = if r < self.adjective_weights[0] {
            0
        } else if r < self.adjective_weights[0] + self.adjective_weights[1] {
            1
        } else {
            2
        };
        for _ in 0..n_adj {
            mods.push(b.push(Self::pick(rng, &self.adjectives), "JJ", "amod"));
        }
        let noun = b.push(Self::pick(rng, &self.nouns), "NN", label);
        for m in mods {
            b.attach(m, noun);
        }
        noun
    }

    fn vp(&self, rng: &mut ChaCha8Rng, b: &mut Builder, label: &'static str) -> usize {
        let verb = b.push(Self::pick(rng, &self.verbs), "VBD", label);
        if rng.gen_bool(self.p_adverb) {
            let adv = b.push(Self::pick(rng, &self.adverbs), "RB", "advmod");
            b.attach(adv, verb);
        }
        if rng.gen_bool(self.p_object) {
            let obj = self.np(rng, b, "dobj");
            b.attach(obj, verb);
        }
        if rng.gen_bool(self.p_pp) {
            let prep = b.push(Self::pick(rng, &self.prepositions), "IN", "prep");
            b.attach(prep, verb);
            let pobj = self.np(rng, b, "pobj");
            b.attach(pobj, prep);
        }
        verb
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> Result<Sentence> {
        let mut b = Builder {
            words: Vec::new(),
            heads: Vec::new(),
            labels: Vec::new(),
        };
        let subj = self.np(rng, &mut b, "nsubj");
        let verb = self.vp(rng, &mut b, "root");
        b.attach(subj, verb);
        b.attach(verb, 0);
        if rng.gen_bool(self.p_coordination) {
            let cc = b.push(Self::pick(rng, &self.conjunctions), "CC", "cc");
            b.attach(cc, verb);
            let second = self.vp(rng, &mut b, "conj");
            b.attach(second, verb);
        }
        let punct = b.push(".", ".", "punct");
        b.attach(punct, verb);

        let tokens = b
            .words
            .iter()
            .enumerate()
            .map(|(i, &(form, pos))| Token::new(i + 1, form, form, pos, pos))
            .collect::<Result<Vec<_>>>()?;
        let tree = DependencyTree::new(b.heads, b.labels.iter().map(|l| l.to_string()).collect())?;
        Sentence::new(tokens, Some(tree))
    }
}

/// Seed-deterministic corpus of `count` sentences with gold trees.
pub fn generate_corpus(grammar: &ToyGrammar, count: usize, seed: u64) -> Result<Vec<Sentence>> {
    if count == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| grammar.sentence(&mut rng)).collect()
}

/// The standard 100-sentence training corpus.
pub fn toy_train() -> Vec<Sentence> {
    generate_corpus(&ToyGrammar::default(), 100, 1).expect("toy grammar generates valid trees")
}

/// The standard 50-sentence held-out corpus.
pub fn toy_heldout() -> Vec<Sentence> {
    generate_corpus(&ToyGrammar::default(), 50, 2).expect("toy grammar generates valid trees")
}

/// Byte-exact serialization of [`toy_train`], kept in the repository.
pub const TOY_TRAIN_CONLL: &str = include_str!("../fixtures/toy_train_seed1.conll");

/// A Basic tree paired with its expected CCprocessed graph.
#[derive(Clone, Debug)]
pub struct TransformFixture {
    pub name: &'static str,
    pub sentence: Sentence,
    pub tree: DependencyTree,
    pub config: TransformConfig,
    pub expected: DependencyGraph,
    /// Whether the expected graph holds under both readings of the `cc`
    /// repair rule.
    pub mode_independent: bool,
}

macro_rules! fixture_files {
    ($($name:literal),* $(,)?) => {
        [$(($name,
            include_str!(concat!("../fixtures/transform/", $name, ".conll")),
            include_str!(concat!("../fixtures/transform/", $name, ".sd")))),*]
    };
}

const FIXTURE_FILES: [(&str, &str, &str); 17] = fixture_files!(
    "golden_fish",
    "plain_tree",
    "prep_collapse",
    "prep_without_pobj",
    "prep_chain",
    "prep_preceding_object",
    "conj_subject_governor",
    "conj_two_conjuncts",
    "conj_without_cc",
    "subject_propagation",
    "subject_blocked",
    "object_propagation",
    "rule1_corrected",
    "rule1_literal",
    "rule1_no_right_child",
    "rule2_fires",
    "rule2_order_violation",
);

fn fixture_config(name: &str) -> TransformConfig {
    let mut config = TransformConfig::default();
    if name == "rule1_literal" {
        config.rule1_mode = Rule1Mode::Literal;
    }
    if name.starts_with("rule2_") {
        config.collapse_preps = false;
    }
    config
}

/// All hand-built transform fixtures.
pub fn transform_fixture_set() -> Vec<TransformFixture> {
    FIXTURE_FILES
        .iter()
        .map(|&(name, conll, sd)| {
            let mut sentences = read_conll(conll.as_bytes()).expect("fixture CoNLL parses");
            let sentence = sentences.remove(0);
            let tree = sentence.gold_tree().expect("fixture has a tree").clone();
            TransformFixture {
                name,
                sentence,
                tree,
                config: fixture_config(name),
                expected: read_sd_graph(sd).expect("fixture tuples parse"),
                mode_independent: !matches!(name, "rule1_corrected" | "rule1_literal"),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{fingerprint, write_corpus};
    use crate::sd_transform::basic_to_ccprocessed;
    use crate::tree::is_projective;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let a = toy_train();
        assert_eq!(a, toy_train());
        for s in &a {
            assert!(is_projective(s.gold_tree().unwrap()).unwrap());
        }
        assert!(generate_corpus(&ToyGrammar::default(), 0, 1).is_err());
    }

    #[test]
    fn frozen_corpus_matches_generator() {
        let mut bytes = Vec::new();
        write_corpus(&mut bytes, &toy_train()).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), TOY_TRAIN_CONLL);
        assert_eq!(fingerprint(&toy_train()), TOY_TRAIN_FINGERPRINT);
    }

    const TOY_TRAIN_FINGERPRINT: u64 = 15321545897490662424;

    #[test]
    fn fixtures_match() {
        let set = transform_fixture_set();
        assert!(set.len() >= 12);
        for f in set {
            let (got, _) = basic_to_ccprocessed(&f.tree, &f.sentence, &f.config);
            assert_eq!(got, f.expected, "{}", f.name);
        }
    }
}
