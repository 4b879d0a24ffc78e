//! Text data model: documents, sentence segmentation, tokenization and
//! label-prompt rendering.
//!
//! Tokenization is word level: text is lowercased and split on every
//! character that is not alphanumeric. Index 0 of every [`Vocabulary`] is
//! reserved for unknown tokens.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Placeholder replaced by a label description inside a prompt template.
pub const DESC_SLOT: &str = "[desc]";

/// Surface form stored at the reserved unknown-token index.
pub const UNKNOWN_TOKEN: &str = "<unk>";

pub const UNKNOWN_INDEX: usize = 0;

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn has_word_char(s: &str) -> bool {
    s.chars().any(char::is_alphanumeric)
}

/// Splits text into sentences at `.`, `!` or `?` followed by whitespace.
///
/// Segments without any alphanumeric character (stray punctuation) are merged
/// into the previous segment, or into the next one when they lead the text.
pub fn split_sentences(raw: &str) -> Result<Vec<String>> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(Error::EmptyDocument);
    }

    let mut pieces: Vec<&str> = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        if let Some(&(_, next)) = chars.peek() {
            if next.is_whitespace() {
                let end = i + c.len_utf8();
                pieces.push(text[start..end].trim());
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        pieces.push(tail);
    }

    let mut sentences: Vec<String> = Vec::with_capacity(pieces.len());
    let mut leading = String::new();
    for piece in pieces {
        if !has_word_char(piece) {
            match sentences.last_mut() {
                Some(last) => {
                    last.push(' ');
                    last.push_str(piece);
                }
                None => {
                    if !leading.is_empty() {
                        leading.push(' ');
                    }
                    leading.push_str(piece);
                }
            }
            continue;
        }
        if leading.is_empty() {
            sentences.push(piece.to_string());
        } else {
            sentences.push(format!("{leading} {piece}"));
            leading.clear();
        }
    }
    if sentences.is_empty() {
        sentences.push(leading);
    }
    Ok(sentences)
}

/// Lowercased word pieces of `text`, split at every non-alphanumeric char.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Maps text to vocabulary indices. Never returns an empty list: text with no
/// word characters yields `[UNKNOWN_INDEX]`.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<usize> {
    let tokens: Vec<usize> = words(text).iter().map(|w| vocab.index_of(w)).collect();
    if tokens.is_empty() {
        vec![UNKNOWN_INDEX]
    } else {
        tokens
    }
}

/// Replaces the single `[desc]` slot of `template` with `description`.
pub fn render_prompt(template: &str, description: &str) -> Result<String> {
    let slots = template.matches(DESC_SLOT).count();
    if slots != 1 {
        return Err(Error::MalformedTemplate {
            template: template.to_string(),
            slots,
        });
    }
    Ok(template.replacen(DESC_SLOT, description, 1))
}

/// Token-to-index map. Index 0 is always [`UNKNOWN_TOKEN`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from raw texts: tokens sorted by descending
    /// frequency, ties broken lexicographically.
    pub fn build<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for text in texts {
            for w in words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        counts.remove(UNKNOWN_TOKEN);
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut tokens = Vec::with_capacity(ranked.len() + 1);
        tokens.push(UNKNOWN_TOKEN.to_string());
        tokens.extend(ranked.into_iter().map(|(w, _)| w));
        Self::from_ordered(tokens).expect("built vocabulary is duplicate free")
    }

    /// Rebuilds a vocabulary from tokens listed in index order, as stored in
    /// checkpoints.
    pub fn from_ordered(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNKNOWN_TOKEN) {
            return Err(Error::Config(format!(
                "vocabulary must start with {UNKNOWN_TOKEN}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNKNOWN_INDEX)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<usize>,
}

impl Sentence {
    pub fn new(text: impl Into<String>, vocab: &Vocabulary) -> Self {
        let text = text.into();
        let tokens = tokenize(&text, vocab);
        Self { text, tokens }
    }
}

/// A document split into tokenized sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw: String,
    pub sentences: Vec<Sentence>,
    pub gold_label: Option<usize>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        raw: impl Into<String>,
        gold_label: Option<usize>,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let raw = raw.into();
        let sentences = split_sentences(&raw)?
            .into_iter()
            .map(|s| Sentence::new(s, vocab))
            .collect();
        Ok(Self {
            id: id.into(),
            raw,
            sentences,
            gold_label,
        })
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    /// Tokens of the whole document, sentence by sentence.
    pub fn tokens(&self) -> Vec<usize> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().copied())
            .collect()
    }

    /// Sentence texts joined by single spaces.
    pub fn text(&self) -> String {
        join_sentences(self.sentences.iter())
    }

    /// Tokens of the document with sentence `skip` removed.
    pub fn tokens_without(&self, skip: usize) -> Vec<usize> {
        self.sentences
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .flat_map(|(_, s)| s.tokens.iter().copied())
            .collect()
    }

    pub fn text_without(&self, skip: usize) -> String {
        join_sentences(
            self.sentences
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, s)| s),
        )
    }
}

fn join_sentences<'a>(sentences: impl Iterator<Item = &'a Sentence>) -> String {
    sentences
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// L label descriptions rendered through T templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPromptSet {
    descriptions: Vec<String>,
    templates: Vec<String>,
    /// `rendered[class][template]`
    rendered: Vec<Vec<String>>,
}

impl LabelPromptSet {
    pub fn new(descriptions: Vec<String>, templates: Vec<String>) -> Result<Self> {
        if descriptions.is_empty() || templates.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        let rendered = descriptions
            .iter()
            .map(|d| {
                templates
                    .iter()
                    .map(|t| render_prompt(t, d))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            descriptions,
            templates,
            rendered,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.descriptions.len()
    }

    pub fn num_templates(&self) -> usize {
        self.templates.len()
    }

    pub fn descriptions(&self) -> &[String] {
        &self.descriptions
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn prompt(&self, class: usize, template: usize) -> &str {
        &self.rendered[class][template]
    }

    pub fn rendered(&self) -> &[Vec<String>] {
        &self.rendered
    }

    /// All rendered prompts, class-major.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.rendered.iter().flatten().map(String::as_str)
    }

    /// Tokenizes every rendered prompt against `vocab`.
    pub fn tokenize(&self, vocab: &Vocabulary) -> PromptTokens {
        let prompts = self
            .rendered
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| Sentence::new(p.clone(), vocab))
                    .collect()
            })
            .collect();
        PromptTokens { prompts }
    }
}

/// Tokenized label prompts, `prompts[class][template]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTokens {
    pub prompts: Vec<Vec<Sentence>>,
}

impl PromptTokens {
    pub fn num_classes(&self) -> usize {
        self.prompts.len()
    }

    pub fn num_templates(&self) -> usize {
        self.prompts.first().map_or(0, Vec::len)
    }

    pub fn get(&self, class: usize, template: usize) -> &Sentence {
        &self.prompts[class][template]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab_of(pairs: &[(&str, usize)]) -> Vocabulary {
        let size = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
        let mut tokens: Vec<String> = (0..size).map(|i| format!("#filler{i}")).collect();
        tokens[0] = UNKNOWN_TOKEN.to_string();
        for &(t, i) in pairs {
            tokens[i] = t.to_string();
        }
        Vocabulary::from_ordered(tokens).unwrap()
    }

    /// Straight scan over the boundary rule, kept independent of the splitter.
    fn reference_split(text: &str) -> Vec<String> {
        let chars: Vec<char> = text.trim().chars().collect();
        let mut out = Vec::new();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            cur.push(c);
            let boundary = matches!(c, '.' | '!' | '?')
                && chars.get(i + 1).is_some_and(|n| n.is_whitespace());
            if boundary {
                out.push(cur.trim().to_string());
                cur.clear();
            }
        }
        if !cur.trim().is_empty() {
            out.push(cur.trim().to_string());
        }
        out
    }

    #[test]
    fn splits_on_terminators() {
        assert_eq!(
            split_sentences("A b c. D e f!").unwrap(),
            vec!["A b c.", "D e f!"]
        );
        assert_eq!(
            split_sentences("no terminator here").unwrap(),
            vec!["no terminator here"]
        );
    }

    #[test]
    fn short_sentences_match_reference_scan() {
        let text = "X. Y? Z.";
        let expected = reference_split(text);
        assert_eq!(expected, vec!["X.", "Y?", "Z."]);
        assert_eq!(split_sentences(text).unwrap(), expected);
    }

    #[test]
    fn stray_punctuation_is_merged() {
        assert_eq!(
            split_sentences("Hello there. . World!").unwrap(),
            vec!["Hello there. .", "World!"]
        );
        assert_eq!(split_sentences("!! Start here.").unwrap(), vec!["!! Start here."]);
        assert_eq!(split_sentences("... ?").unwrap(), vec!["... ?"]);
    }

    #[test]
    fn terminator_without_whitespace_is_not_a_boundary() {
        assert_eq!(split_sentences("e.g.this is one").unwrap().len(), 1);
        assert_eq!(split_sentences("3.14 is pi. Yes").unwrap().len(), 2);
    }

    #[test]
    fn empty_document_is_rejected() {
        assert!(matches!(split_sentences("   \n\t "), Err(Error::EmptyDocument)));
        assert!(matches!(split_sentences(""), Err(Error::EmptyDocument)));
    }

    #[test]
    fn tokenize_looks_up_lowercased_words() {
        let v = vocab_of(&[("good", 5), ("product", 9)]);
        assert_eq!(tokenize("Good Product", &v), vec![5, 9]);
        assert_eq!(tokenize("zzz-unseen", &v), vec![0, 0]);
        assert_eq!(tokenize("GOOD good", &v), vec![5, 5]);
        assert_eq!(tokenize("?!...", &v), vec![0]);
    }

    #[test]
    fn vocabulary_orders_by_frequency_then_lexicographically() {
        let v = Vocabulary::build(["b a c", "a b", "a d"]);
        assert_eq!(v.tokens(), &["<unk>", "a", "b", "c", "d"]);
        assert_eq!(v.index_of("a"), 1);
        assert_eq!(v.index_of("zzz"), UNKNOWN_INDEX);
        assert_eq!(Vocabulary::build(["a d", "a b", "b a c"]), v);
    }

    #[test]
    fn vocabulary_rejects_bad_orderings() {
        assert!(Vocabulary::from_ordered(vec!["a".into()]).is_err());
        assert!(
            Vocabulary::from_ordered(vec![UNKNOWN_TOKEN.into(), "a".into(), "a".into()]).is_err()
        );
    }

    #[test]
    fn render_prompt_cases() {
        assert_eq!(
            render_prompt("It is about [desc].", "Health").unwrap(),
            "It is about Health."
        );
        assert_eq!(
            render_prompt("Category: [desc] news.", "Sports").unwrap(),
            "Category: Sports news."
        );
        assert_eq!(render_prompt("[desc]", "x").unwrap(), "x");
        assert!(matches!(
            render_prompt("no slot", "x"),
            Err(Error::MalformedTemplate { slots: 0, .. })
        ));
        assert!(matches!(
            render_prompt("[desc] and [desc]", "x"),
            Err(Error::MalformedTemplate { slots: 2, .. })
        ));
    }

    #[test]
    fn label_prompt_set_renders_grid() {
        let set = LabelPromptSet::new(
            vec!["World".into(), "Sports".into()],
            vec!["Category: [desc] news.".into(), "[desc] news.".into()],
        )
        .unwrap();
        assert_eq!(set.num_classes(), 2);
        assert_eq!(set.prompt(1, 0), "Category: Sports news.");
        assert_eq!(set.prompt(0, 1), "World news.");
        assert!(LabelPromptSet::new(vec![], vec!["[desc]".into()]).is_err());
        assert!(LabelPromptSet::new(vec!["a".into()], vec!["bad".into()]).is_err());
    }

    #[test]
    fn document_views() {
        let v = Vocabulary::build(["alpha beta. gamma delta!"]);
        let d = Document::new("d0", "alpha beta. gamma delta!", Some(1), &v).unwrap();
        assert_eq!(d.num_sentences(), 2);
        assert_eq!(d.tokens().len(), 4);
        assert_eq!(d.tokens_without(1), d.sentences[0].tokens);
        assert_eq!(d.text_without(0), "gamma delta!");
        assert_eq!(d.text(), "alpha beta. gamma delta!");
    }

    fn normalize_ws(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    proptest! {
        #[test]
        fn split_then_join_reconstructs(s in "[ -~\\t\\n]{1,80}") {
            prop_assume!(!s.trim().is_empty());
            let parts = split_sentences(&s).unwrap();
            prop_assert!(!parts.is_empty());
            prop_assert_eq!(normalize_ws(&parts.join(" ")), normalize_ws(&s));
        }

        #[test]
        fn tokenize_ignores_case(s in "[ -~]{1,60}") {
            let v = Vocabulary::build([s.as_str(), "hello world"]);
            prop_assert_eq!(tokenize(&s, &v), tokenize(&s.to_uppercase(), &v));
            prop_assert_eq!(tokenize(&s, &v), tokenize(&s, &v));
        }

        #[test]
        fn render_keeps_description_at_slot(prefix in "[a-z :]{0,12}", suffix in "[a-z .]{0,12}", desc in "[A-Za-z ]{1,12}") {
            let template = format!("{prefix}[desc]{suffix}");
            let out = render_prompt(&template, &desc).unwrap();
            prop_assert_eq!(&out[prefix.len()..prefix.len() + desc.len()], desc.as_str());
            prop_assert_eq!(out, format!("{prefix}{desc}{suffix}"));
        }
    }
}
