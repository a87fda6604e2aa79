//! Corpus and lexicon formats: CoNLL-X sentences, SD tuple blocks, Brown
//! cluster lexicons and sequential jackknife partitions.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

use crate::sentence::{Sentence, Token, ROOT_FORM};
use crate::tree::{DependencyArc, DependencyGraph, DependencyTree};
use crate::{Error, Result};

const ABSENT: &str = "_";

fn field(s: &str) -> String {
    if s == ABSENT {
        String::new()
    } else {
        s.to_string()
    }
}

fn or_absent(s: &str) -> &str {
    if s.is_empty() {
        ABSENT
    } else {
        s
    }
}

struct PendingToken {
    token: Token,
    head: Option<usize>,
    label: String,
    line: usize,
}

fn finish_sentence(pending: &mut Vec<PendingToken>, out: &mut Vec<Sentence>) -> Result<()> {
    if pending.is_empty() {
        return Ok(());
    }
    let first_line = pending[0].line;
    let with_heads = pending.iter().filter(|p| p.head.is_some()).count();
    let tree = if with_heads == 0 {
        None
    } else if with_heads == pending.len() {
        let heads = pending.iter().map(|p| p.head.unwrap()).collect();
        let labels = pending.iter().map(|p| p.label.clone()).collect();
        Some(DependencyTree::new(heads, labels).map_err(|e| Error::Format {
            line: first_line,
            message: format!("invalid gold tree: {e}"),
        })?)
    } else {
        let missing = pending.iter().find(|p| p.head.is_none()).unwrap();
        return Err(Error::Format {
            line: missing.line,
            message: "head column missing while other tokens in the sentence have heads".into(),
        });
    };
    let tokens = pending.drain(..).map(|p| p.token).collect();
    out.push(Sentence::new(tokens, tree)?);
    Ok(())
}

/// Reads CoNLL-X sentences. Gold trees are attached when the head column
/// is filled for every token of a sentence.
pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut pending: Vec<PendingToken> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish_sentence(&mut pending, &mut out)?;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let index: usize = cols[0].parse().map_err(|_| Error::Format {
            line: lineno,
            message: format!("token index '{}' is not an integer", cols[0]),
        })?;
        if index != pending.len() + 1 {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected token index {}, found {index}", pending.len() + 1),
            });
        }
        let head = if cols[6] == ABSENT {
            None
        } else {
            Some(cols[6].parse::<usize>().map_err(|_| Error::Format {
                line: lineno,
                message: format!("head '{}' is not an integer", cols[6]),
            })?)
        };
        let token = Token::new(index, cols[1], field(cols[2]), field(cols[3]), field(cols[4]))
            .map_err(|e| Error::Format {
                line: lineno,
                message: e.to_string(),
            })?;
        pending.push(PendingToken {
            token,
            head,
            label: cols[7].to_string(),
            line: lineno,
        });
    }
    finish_sentence(&mut pending, &mut out)?;
    Ok(out)
}

fn write_sentence<W: Write + ?Sized>(w: &mut W, sentence: &Sentence, tree: Option<&DependencyTree>) -> Result<()> {
    for t in sentence.tokens() {
        let (head, label) = match tree {
            Some(tree) => (tree.head(t.index()).to_string(), tree.label(t.index()).to_string()),
            None => (ABSENT.to_string(), ABSENT.to_string()),
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t_\t_",
            t.index(),
            t.form(),
            or_absent(t.lemma()),
            or_absent(t.cpos()),
            or_absent(t.fpos()),
            head,
            label
        )?;
    }
    writeln!(w)?;
    Ok(())
}

/// Writes sentences with one predicted tree each.
pub fn write_conll<W: Write + ?Sized>(w: &mut W, sentences: &[Sentence], trees: &[DependencyTree]) -> Result<()> {
    if sentences.len() != trees.len() {
        return Err(Error::LengthMismatch {
            what: "trees per corpus",
            expected: sentences.len(),
            found: trees.len(),
        });
    }
    for (s, t) in sentences.iter().zip(trees) {
        if s.len() != t.len() {
            return Err(Error::LengthMismatch {
                what: "tree length",
                expected: s.len(),
                found: t.len(),
            });
        }
        write_sentence(w, s, Some(t))?;
    }
    Ok(())
}

/// Writes sentences with their gold trees (head columns `_` when absent).
pub fn write_corpus<W: Write + ?Sized>(w: &mut W, sentences: &[Sentence]) -> Result<()> {
    for s in sentences {
        write_sentence(w, s, s.gold_tree())?;
    }
    Ok(())
}

/// Writes one sentence's graph as `type(parent-P, child-C)` lines sorted by
/// (child, parent, type), followed by a blank line.
pub fn write_sd_graph<W: Write + ?Sized>(w: &mut W, sentence: &Sentence, graph: &DependencyGraph) -> Result<()> {
    let n = sentence.len();
    for arc in graph {
        if arc.parent() > n || arc.child() > n {
            return Err(Error::IndexOutOfRange(format!(
                "arc {arc} outside a sentence of {n} tokens"
            )));
        }
        let parent_form = if arc.parent() == 0 {
            ROOT_FORM
        } else {
            sentence.form_at(arc.parent())
        };
        writeln!(
            w,
            "{}({}-{}, {}-{})",
            arc.dep_type(),
            parent_form,
            arc.parent(),
            sentence.form_at(arc.child()),
            arc.child()
        )?;
    }
    writeln!(w)?;
    Ok(())
}

fn tuple_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([^\s(]+)\((\S.*?)-(\d+), (\S.*)-(\d+)\)$").unwrap())
}

/// Parses a single `type(parent-P, child-C)` line.
pub fn parse_sd_line(line: &str) -> Result<DependencyArc> {
    let bad = |msg: &str| Error::Format {
        line: 0,
        message: format!("{msg}: '{line}'"),
    };
    let caps = tuple_regex()
        .captures(line.trim())
        .ok_or_else(|| bad("unparseable dependency tuple"))?;
    let parent: usize = caps[3].parse().map_err(|_| bad("bad parent index"))?;
    let child: usize = caps[5].parse().map_err(|_| bad("bad child index"))?;
    DependencyArc::try_new(&caps[1], parent, child).ok_or_else(|| bad("invalid arc endpoints"))
}

/// Parses a single block of tuple lines into a graph.
pub fn read_sd_graph(text: &str) -> Result<DependencyGraph> {
    let mut graph = DependencyGraph::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let arc = parse_sd_line(line).map_err(|e| relocate(e, i + 1))?;
        graph.insert(arc);
    }
    Ok(graph)
}

fn relocate(e: Error, line: usize) -> Error {
    match e {
        Error::Format { message, .. } => Error::Format { line, message },
        other => other,
    }
}

/// Reads a stream of blank-line-terminated tuple blocks.
pub fn read_sd_graphs<R: BufRead>(reader: R) -> Result<Vec<DependencyGraph>> {
    let mut out = Vec::new();
    let mut current: Option<DependencyGraph> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            out.push(current.take().unwrap_or_default());
            continue;
        }
        let arc = parse_sd_line(&line).map_err(|e| relocate(e, i + 1))?;
        current.get_or_insert_with(DependencyGraph::new).insert(arc);
    }
    if let Some(g) = current {
        out.push(g);
    }
    Ok(out)
}

/// FNV-1a fingerprint of a corpus' CoNLL serialization.
pub fn fingerprint(sentences: &[Sentence]) -> u64 {
    let mut bytes = Vec::new();
    write_corpus(&mut bytes, sentences).expect("writing to memory cannot fail");
    crate::features::FnvState::start(0).write(&bytes).value()
}

/// Bit-string assigned to words missing from the lexicon.
pub const UNK_CLUSTER: &str = "0";

/// Word → Brown-cluster bit-string mapping.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterLexicon {
    entries: HashMap<String, (String, Option<u64>)>,
}

impl ClusterLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, bits: impl Into<String>, count: Option<u64>) -> Result<()> {
        let bits = bits.into();
        if bits.is_empty() || !bits.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::Format {
                line: 0,
                message: format!("invalid cluster bit-string '{bits}'"),
            });
        }
        self.entries.insert(word.into(), (bits, count));
        Ok(())
    }

    /// Bit-string for `word`, or [`UNK_CLUSTER`].
    pub fn lookup(&self, word: &str) -> &str {
        self.entries.get(word).map(|(b, _)| b.as_str()).unwrap_or(UNK_CLUSTER)
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.entries.get(word).and_then(|(_, c)| *c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads `bits<TAB>word[<TAB>count]` lines; later entries overwrite earlier.
pub fn load_clusters<R: BufRead>(reader: R) -> Result<ClusterLexicon> {
    let mut lex = ClusterLexicon::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected 2 or 3 tab-separated fields, found {}", cols.len()),
            });
        }
        let count = match cols.get(2) {
            Some(c) => Some(c.trim().parse::<u64>().map_err(|_| Error::Format {
                line: lineno,
                message: format!("count '{c}' is not an integer"),
            })?),
            None => None,
        };
        lex.insert(cols[1], cols[0], count)
            .map_err(|e| relocate(e, lineno))?;
    }
    Ok(lex)
}

/// A contiguous block of the corpus, numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusPartition {
    pub part_id: usize,
    pub range: Range<usize>,
}

impl CorpusPartition {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn contains(&self, sentence: usize) -> bool {
        self.range.contains(&sentence)
    }

    pub fn slice<'a, T>(&self, corpus: &'a [T]) -> &'a [T] {
        &corpus[self.range.clone()]
    }
}

/// Splits `len` sentences into `k` sequential parts; the first `len % k`
/// parts receive one extra sentence.
pub fn jackknife_partition(len: usize, k: usize) -> Result<Vec<CorpusPartition>> {
    if k < 2 {
        return Err(Error::Config(format!("jackknife needs k >= 2, got {k}")));
    }
    if k > len {
        return Err(Error::Config(format!(
            "cannot split {len} sentences into {k} partitions"
        )));
    }
    let base = len / k;
    let extra = len % k;
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let p = CorpusPartition {
                part_id: i + 1,
                range: start..start + size,
            };
            start += size;
            p
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "1\tI\t_\tPRP\tPRP\t_\t2\tnsubj\t_\t_\n2\tate\t_\tVBD\tVBD\t_\t0\troot\t_\t_\n\n";

    #[test]
    fn reads_example() {
        let corpus = read_conll(EXAMPLE.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].len(), 2);
        assert_eq!(corpus[0].gold_tree().unwrap().heads(), &[2, 0]);
        assert_eq!(corpus[0].gold_tree().unwrap().label(1), "nsubj");
        assert_eq!(corpus[0].token(2).unwrap().fpos(), "VBD");
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(read_conll("".as_bytes()).unwrap().is_empty());
        let mut out = Vec::new();
        write_corpus(&mut out, &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let input = "1\tI\t_\tPRP\tPRP\t_\t2\tnsubj\t_\t_\n2\tate\t_\tVBD\tVBD\t_\t0\troot\t_\n";
        match read_conll(input.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn index_gap_and_bad_integer() {
        let gap = "1\tI\t_\tPRP\tPRP\t_\t0\troot\t_\t_\n3\tate\t_\tVBD\tVBD\t_\t1\tdep\t_\t_\n";
        assert!(matches!(read_conll(gap.as_bytes()), Err(Error::Format { line: 2, .. })));
        let bad = "x\tI\t_\tPRP\tPRP\t_\t0\troot\t_\t_\n";
        assert!(matches!(read_conll(bad.as_bytes()), Err(Error::Format { line: 1, .. })));
        let bad_head = "1\tI\t_\tPRP\tPRP\t_\tq\troot\t_\t_\n";
        assert!(matches!(read_conll(bad_head.as_bytes()), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn round_trip_reproduces_bytes() {
        let corpus = read_conll(EXAMPLE.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_corpus(&mut out, &corpus).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), EXAMPLE);
    }

    #[test]
    fn write_conll_rejects_length_mismatch() {
        let corpus = read_conll(EXAMPLE.as_bytes()).unwrap();
        let bad = DependencyTree::new(vec![0], vec!["root".into()]).unwrap();
        assert!(write_conll(&mut Vec::new(), &corpus, &[bad]).is_err());
        assert!(write_conll(&mut Vec::new(), &corpus, &[]).is_err());
    }

    #[test]
    fn sd_tuple_format() {
        let s = Sentence::from_pairs(&[("I", "PRP"), ("ate", "VBD")]).unwrap();
        let g: DependencyGraph = [DependencyArc::new("nsubj", 2, 1)].into_iter().collect();
        let mut out = Vec::new();
        write_sd_graph(&mut out, &s, &g).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "nsubj(ate-2, I-1)\n\n");

        let g: DependencyGraph = [DependencyArc::new("root", 0, 2)].into_iter().collect();
        let mut out = Vec::new();
        write_sd_graph(&mut out, &s, &g).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "root(ROOT-0, ate-2)\n\n");

        let mut out = Vec::new();
        write_sd_graph(&mut out, &s, &DependencyGraph::new()).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "\n");

        let g: DependencyGraph = [DependencyArc::new("dep", 2, 7)].into_iter().collect();
        assert!(write_sd_graph(&mut Vec::new(), &s, &g).is_err());
    }

    #[test]
    fn sd_tuple_parsing() {
        assert_eq!(
            parse_sd_line("prep_with(ate-2, fork-5)").unwrap(),
            DependencyArc::new("prep_with", 2, 5)
        );
        let g = read_sd_graph("nsubj(ate-2, I-1)\nnsubj(ate-2, I-1)\n").unwrap();
        assert_eq!(g.len(), 1);
        assert!(parse_sd_line("nsubj(ate-2 I-1)").is_err());
        // Forms containing hyphens and commas.
        assert_eq!(
            parse_sd_line("punct(New-York-3, ,-4)").unwrap(),
            DependencyArc::new("punct", 3, 4)
        );
    }

    #[test]
    fn sd_blocks() {
        let text = "nsubj(ate-2, I-1)\nroot(ROOT-0, ate-2)\n\n\nroot(ROOT-0, ran-1)\n\n";
        let graphs = read_sd_graphs(text.as_bytes()).unwrap();
        assert_eq!(graphs.len(), 3);
        assert_eq!(graphs[0].len(), 2);
        assert!(graphs[1].is_empty());
        assert_eq!(graphs[2].len(), 1);
    }

    #[test]
    fn clusters() {
        let lex = load_clusters("1101\tapple\t23\n".as_bytes()).unwrap();
        assert_eq!(lex.lookup("apple"), "1101");
        assert_eq!(lex.count("apple"), Some(23));
        assert_eq!(lex.lookup("zzzunseen"), "0");
        assert!(load_clusters("12x\tapple\t1\n".as_bytes()).is_err());
        assert!(load_clusters("1\n".as_bytes()).is_err());
        let lex = load_clusters("1\tpear\n0\tpear\n".as_bytes()).unwrap();
        assert_eq!(lex.lookup("pear"), "0");
    }

    #[test]
    fn partitions() {
        let p = jackknife_partition(9, 3).unwrap();
        assert_eq!(
            p.iter().map(|p| p.range.clone()).collect::<Vec<_>>(),
            vec![0..3, 3..6, 6..9]
        );
        let p = jackknife_partition(10, 3).unwrap();
        assert_eq!(p.iter().map(|p| p.len()).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert!(jackknife_partition(2, 3).is_err());
        assert!(jackknife_partition(5, 1).is_err());
    }
}
