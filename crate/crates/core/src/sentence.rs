//! Tokens and sentences.

use crate::tree::DependencyTree;
use crate::Error;

/// Form and part-of-speech used for the virtual ROOT token.
pub const ROOT_FORM: &str = "ROOT";
pub const ROOT_POS: &str = "ROOT";

/// A single token of a sentence. Indices are 1-based; ROOT (index 0) is
/// never stored as a token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    index: usize,
    form: String,
    lemma: String,
    cpos: String,
    fpos: String,
}

impl Token {
    pub fn new(
        index: usize,
        form: impl Into<String>,
        lemma: impl Into<String>,
        cpos: impl Into<String>,
        fpos: impl Into<String>,
    ) -> Result<Self, Error> {
        let form = form.into();
        if index == 0 {
            return Err(Error::InvalidToken("token index must be at least 1".into()));
        }
        if form.is_empty() {
            return Err(Error::InvalidToken(format!("token {index} has an empty form")));
        }
        Ok(Token {
            index,
            form,
            lemma: lemma.into(),
            cpos: cpos.into(),
            fpos: fpos.into(),
        })
    }

    /// Shorthand for a token whose coarse and fine tags coincide.
    pub fn simple(index: usize, form: &str, pos: &str) -> Result<Self, Error> {
        Token::new(index, form, "", pos, pos)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn form(&self) -> &str {
        &self.form
    }

    /// The lemma as given in the corpus; empty when absent.
    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn cpos(&self) -> &str {
        &self.cpos
    }

    pub fn fpos(&self) -> &str {
        &self.fpos
    }

    /// Tag used by the feature templates: the fine tag, or the coarse tag
    /// when the fine column is empty.
    pub fn pos(&self) -> &str {
        if self.fpos.is_empty() {
            &self.cpos
        } else {
            &self.fpos
        }
    }

    /// The lemma, falling back to the lowercased form.
    pub fn lemma_or_form(&self) -> String {
        if self.lemma.is_empty() {
            self.form.to_lowercase()
        } else {
            self.lemma.clone()
        }
    }

    pub(crate) fn with_fpos(&self, fpos: impl Into<String>) -> Token {
        Token {
            fpos: fpos.into(),
            ..self.clone()
        }
    }
}

/// An ordered token sequence with an optional gold tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
    gold_tree: Option<DependencyTree>,
}

impl Sentence {
    /// Builds a sentence, checking that token indices are exactly `1..=n`
    /// and that the gold tree (if any) is a valid tree of the same length.
    pub fn new(tokens: Vec<Token>, gold_tree: Option<DependencyTree>) -> Result<Self, Error> {
        for (i, token) in tokens.iter().enumerate() {
            if token.index != i + 1 {
                return Err(Error::InvalidToken(format!(
                    "expected token index {}, found {}",
                    i + 1,
                    token.index
                )));
            }
        }
        if let Some(tree) = &gold_tree {
            crate::tree::validate_tree(tree, tokens.len())?;
        }
        Ok(Sentence { tokens, gold_tree })
    }

    /// Convenience constructor from `(form, pos)` pairs.
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self, Error> {
        let tokens = pairs
            .iter()
            .enumerate()
            .map(|(i, (form, pos))| Token::simple(i + 1, form, pos))
            .collect::<Result<Vec<_>, _>>()?;
        Sentence::new(tokens, None)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Token at 1-based position `index`.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn gold_tree(&self) -> Option<&DependencyTree> {
        self.gold_tree.as_ref()
    }

    /// Form at `index`, with `ROOT` at 0.
    pub fn form_at(&self, index: usize) -> &str {
        if index == 0 {
            ROOT_FORM
        } else {
            self.tokens[index - 1].form()
        }
    }

    /// Feature POS at `index`, with `ROOT` at 0.
    pub fn pos_at(&self, index: usize) -> &str {
        if index == 0 {
            ROOT_POS
        } else {
            self.tokens[index - 1].pos()
        }
    }

    /// Returns a copy with a different gold tree.
    pub fn with_gold_tree(&self, tree: Option<DependencyTree>) -> Result<Sentence, Error> {
        Sentence::new(self.tokens.clone(), tree)
    }

    /// Returns a copy whose fine POS column is replaced by `tags`.
    pub fn with_fine_tags<S: AsRef<str>>(&self, tags: &[S]) -> Result<Sentence, Error> {
        if tags.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "POS tags",
                expected: self.len(),
                found: tags.len(),
            });
        }
        let tokens = self
            .tokens
            .iter()
            .zip(tags)
            .map(|(t, tag)| t.with_fpos(tag.as_ref()))
            .collect();
        Ok(Sentence {
            tokens,
            gold_tree: self.gold_tree.clone(),
        })
    }
}
