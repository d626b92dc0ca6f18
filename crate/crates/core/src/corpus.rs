//! Tokenization and corpus ingestion.
//!
//! Three vocabulary modes: raw bytes, whitespace-separated words numbered in
//! first-seen order, and pre-tokenized files of decimal ids. Every mode
//! reserves one id as the document separator.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prob::Probability;
use crate::sam::{SuffixAutomaton, TokenId};
use crate::serialize::FORMAT_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabMode {
    Byte,
    Word,
    Ids,
}

impl VocabMode {
    pub fn name(self) -> &'static str {
        match self {
            VocabMode::Byte => "byte",
            VocabMode::Word => "word",
            VocabMode::Ids => "ids",
        }
    }
}

impl std::str::FromStr for VocabMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "byte" => Ok(VocabMode::Byte),
            "word" => Ok(VocabMode::Word),
            "ids" => Ok(VocabMode::Ids),
            other => Err(Error::Config(format!("unknown vocabulary mode {other:?}"))),
        }
    }
}

/// Byte-mode separator: the first id past the byte range.
pub const BYTE_SEPARATOR: TokenId = TokenId(256);

#[derive(Clone, Debug)]
pub struct Vocabulary {
    mode: VocabMode,
    separator: TokenId,
    by_word: HashMap<String, TokenId>,
    by_id: BTreeMap<TokenId, String>,
    next_id: u32,
    frozen: bool,
    /// Id used for unknown words once frozen; `None` makes them an error.
    oov: Option<TokenId>,
}

impl Vocabulary {
    pub fn new(mode: VocabMode, separator: TokenId) -> Self {
        Self {
            mode,
            separator,
            by_word: HashMap::new(),
            by_id: BTreeMap::new(),
            next_id: 0,
            frozen: false,
            oov: None,
        }
    }

    pub fn bytes() -> Self {
        Self::new(VocabMode::Byte, BYTE_SEPARATOR)
    }

    /// Word vocabulary restored from an id-ordered word list.
    pub fn from_words(separator: TokenId, words: &[String]) -> Self {
        let mut vocab = Self::new(VocabMode::Word, separator);
        for w in words {
            vocab.intern(w);
        }
        vocab
    }

    pub fn mode(&self) -> VocabMode {
        self.mode
    }

    pub fn separator(&self) -> TokenId {
        self.separator
    }

    pub fn freeze(&mut self, oov: Option<TokenId>) {
        self.frozen = true;
        self.oov = oov;
    }

    /// One past the largest id this vocabulary can produce; 0 for id mode,
    /// where the vocabulary is external.
    pub fn size(&self) -> u32 {
        match self.mode {
            VocabMode::Byte => 256u32.max(self.separator.0 + 1),
            VocabMode::Word => self.next_id.max(self.separator.0 + 1),
            VocabMode::Ids => 0,
        }
    }

    /// Words in id order.
    pub fn words(&self) -> Vec<String> {
        self.by_id.values().cloned().collect()
    }

    fn intern(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.by_word.get(word) {
            return id;
        }
        if self.next_id == self.separator.0 {
            self.next_id += 1;
        }
        let id = TokenId(self.next_id);
        self.next_id += 1;
        self.by_word.insert(word.to_string(), id);
        self.by_id.insert(id, word.to_string());
        id
    }

    pub fn tokenize(&mut self, text: &str) -> Result<Vec<TokenId>> {
        match self.mode {
            VocabMode::Byte => Ok(text.bytes().map(|b| TokenId(b as u32)).collect()),
            VocabMode::Word => text
                .split_whitespace()
                .map(|w| match self.by_word.get(w) {
                    Some(&id) => Ok(id),
                    None if !self.frozen => Ok(self.intern(w)),
                    None => self.oov.ok_or_else(|| Error::UnknownWord(w.to_string())),
                })
                .collect(),
            VocabMode::Ids => text
                .split_whitespace()
                .map(|s| {
                    s.parse::<u32>()
                        .map(TokenId)
                        .map_err(|_| Error::InvalidTokenId(s.to_string()))
                })
                .collect(),
        }
    }

    /// Byte mode decodes lossily when the ids do not form valid UTF-8; word
    /// mode joins with single spaces; id mode writes one id per line.
    pub fn detokenize(&self, tokens: &[TokenId]) -> String {
        match self.mode {
            VocabMode::Byte => {
                let bytes: Vec<u8> = tokens.iter().filter(|t| t.0 < 256).map(|t| t.0 as u8).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            VocabMode::Word => tokens
                .iter()
                .map(|t| self.by_id.get(t).map_or("<unk>", String::as_str))
                .collect::<Vec<_>>()
                .join(" "),
            VocabMode::Ids => tokens.iter().map(|t| format!("{t}\n")).collect(),
        }
    }

    /// Stable digest of mode, separator and (for word mode) the word list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.mode.name().as_bytes());
        h.update(self.separator.0.to_le_bytes());
        for (id, w) in &self.by_id {
            h.update(id.0.to_le_bytes());
            h.update((w.len() as u64).to_le_bytes());
            h.update(w.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// How input files are split into documents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DocLayout {
    #[default]
    FilePerDoc,
    /// Each non-blank line is a document.
    LinePerDoc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub docs: usize,
    /// Reference length, separators included.
    pub tokens: usize,
    pub vocab_mode: VocabMode,
    pub vocab_hash: String,
    pub k: usize,
    pub format_version: u32,
    pub separator: u32,
    /// Id-ordered word list, word mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
}

impl Manifest {
    /// Vocabulary matching the one used at ingestion.
    pub fn vocabulary(&self) -> Vocabulary {
        let sep = TokenId(self.separator);
        match (self.vocab_mode, &self.words) {
            (VocabMode::Word, Some(words)) => Vocabulary::from_words(sep, words),
            (mode, _) => Vocabulary::new(mode, sep),
        }
    }
}

pub fn read_documents(paths: &[impl AsRef<Path>], layout: DocLayout) -> Result<Vec<String>> {
    let mut docs = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        match layout {
            DocLayout::FilePerDoc => docs.push(text),
            DocLayout::LinePerDoc => docs.extend(
                text.lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(str::to_string),
            ),
        }
    }
    Ok(docs)
}

/// Tokenizes the documents, joins them with the separator (one after every
/// document), builds the automaton and freezes it with top-`k` successors.
pub fn ingest_documents<P: Probability>(
    docs: &[String],
    vocab: &mut Vocabulary,
    k: usize,
) -> Result<(SuffixAutomaton<P>, Manifest)> {
    if docs.is_empty() {
        log::warn!("no documents to ingest; the automaton will be empty");
    }
    let tokenized = docs
        .iter()
        .map(|d| vocab.tokenize(d))
        .collect::<Result<Vec<_>>>()?;
    let mut sam = SuffixAutomaton::<P>::build_corpus(&tokenized, vocab.separator())?
        .with_vocab_size(vocab.size());
    sam.init_topk(k)?;
    let manifest = Manifest {
        docs: docs.len(),
        tokens: sam.max_length(),
        vocab_mode: vocab.mode(),
        vocab_hash: vocab.hash(),
        k,
        format_version: FORMAT_VERSION,
        separator: vocab.separator().0,
        words: (vocab.mode() == VocabMode::Word).then(|| vocab.words()),
    };
    Ok((sam, manifest))
}

pub fn ingest<P: Probability>(
    paths: &[impl AsRef<Path>],
    layout: DocLayout,
    vocab: &mut Vocabulary,
    k: usize,
) -> Result<(SuffixAutomaton<P>, Manifest)> {
    let docs = read_documents(paths, layout)?;
    ingest_documents(&docs, vocab, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serialize::save;
    use crate::Sam;
    use std::io::Write;

    #[test]
    fn byte_mode() {
        let mut v = Vocabulary::bytes();
        assert_eq!(v.tokenize("AB").unwrap(), vec![TokenId(65), TokenId(66)]);
        let text = "héllo\nwörld";
        assert_eq!(v.detokenize(&v.clone().tokenize(text).unwrap()), text);
        assert_eq!(v.size(), 257);
    }

    #[test]
    fn word_mode_first_seen() {
        let mut v = Vocabulary::new(VocabMode::Word, TokenId(1000));
        assert_eq!(
            v.tokenize("a b a").unwrap(),
            vec![TokenId(0), TokenId(1), TokenId(0)]
        );
        assert_eq!(v.detokenize(&[TokenId(1), TokenId(0)]), "b a");

        v.freeze(None);
        assert!(matches!(v.tokenize("a c"), Err(Error::UnknownWord(w)) if w == "c"));
        v.freeze(Some(TokenId(999)));
        assert_eq!(v.tokenize("c").unwrap(), vec![TokenId(999)]);
    }

    #[test]
    fn word_ids_skip_separator() {
        let mut v = Vocabulary::new(VocabMode::Word, TokenId(1));
        assert_eq!(v.tokenize("x y").unwrap(), vec![TokenId(0), TokenId(2)]);
        let restored = Vocabulary::from_words(TokenId(1), &v.words());
        assert_eq!(restored.hash(), v.hash());
    }

    #[test]
    fn id_mode() {
        let mut v = Vocabulary::new(VocabMode::Ids, TokenId(0));
        assert_eq!(
            v.tokenize("5\n17\n3\n").unwrap(),
            vec![TokenId(5), TokenId(17), TokenId(3)]
        );
        assert!(matches!(v.tokenize("5\nx"), Err(Error::InvalidTokenId(_))));
    }

    #[test]
    fn ingest_two_docs_with_trailing_separators() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.txt");
        std::fs::File::create(&path)
            .unwrap()
            .write_all(b"hello\nworld!\n")
            .unwrap();
        let mut vocab = Vocabulary::bytes();
        let (sam, manifest) = ingest::<f64>(&[&path], DocLayout::LinePerDoc, &mut vocab, 8).unwrap();
        assert_eq!(sam.max_length(), 5 + 6 + 2);
        assert_eq!(manifest.docs, 2);
        assert_eq!(manifest.tokens, 13);
        assert!(sam.is_frozen());

        let mut vocab2 = Vocabulary::bytes();
        let (again, manifest2) = ingest::<f64>(&[&path], DocLayout::LinePerDoc, &mut vocab2, 8).unwrap();
        assert_eq!(save(&sam).unwrap(), save(&again).unwrap());
        assert_eq!(manifest, manifest2);
    }

    #[test]
    fn ingest_empty_and_errors() {
        let no_paths: [&str; 0] = [];
        let (sam, m) = ingest::<f64>(&no_paths, DocLayout::FilePerDoc, &mut Vocabulary::bytes(), 8).unwrap();
        assert_eq!(sam.node_count(), 1);
        assert_eq!(m.docs, 0);

        assert!(matches!(
            ingest::<f64>(&["/nonexistent/file"], DocLayout::FilePerDoc, &mut Vocabulary::bytes(), 8),
            Err(Error::Io { .. })
        ));

        let mut vocab = Vocabulary::new(VocabMode::Byte, TokenId(b'\n' as u32));
        let docs = vec!["a\nb".to_string()];
        assert!(matches!(
            ingest_documents::<f64>(&docs, &mut vocab, 8),
            Err(Error::SeparatorCollision { .. })
        ));
    }

    #[test]
    fn manifest_restores_word_vocab() {
        let mut vocab = Vocabulary::new(VocabMode::Word, TokenId(0));
        let docs = vec!["to be or not to be".to_string()];
        let (_sam, m): (Sam, _) = ingest_documents(&docs, &mut vocab, 4).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: Manifest = serde_json::from_str(&json).unwrap();
        let mut restored = back.vocabulary();
        assert_eq!(restored.hash(), m.vocab_hash);
        assert_eq!(restored.tokenize("not be").unwrap(), vocab.tokenize("not be").unwrap());
    }
}
