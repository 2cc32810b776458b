//! Character-level vocabulary and fixed-length token sequences.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Stored length of every encoded sequence, start and end tokens included.
pub const MAX_LEN: usize = 140;

pub const PAD_TOKEN: &str = "<pad>";
pub const START_TOKEN: &str = "G";
pub const END_TOKEN: &str = "E";

/// Characters that cannot occur in raw SMILES because they encode something else.
const RESERVED: [char; 4] = ['G', 'E', 'R', 'L'];

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("unknown token at position {0}")]
    UnknownToken(usize),
    #[error("sequence of {0} tokens exceeds the maximum of {MAX_LEN}")]
    TooLong(usize),
    #[error("malformed sequence: {0}")]
    MalformedSequence(&'static str),
    #[error("invalid vocabulary: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Replace the two-letter halogens by their single-character tokens.
pub fn normalize(text: &str) -> String {
    text.replace("Cl", "R").replace("Br", "L")
}

fn denormalize(text: &str) -> String {
    text.replace('R', "Cl").replace('L', "Br")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, usize>,
    start: usize,
    end: usize,
}

impl Vocabulary {
    /// Build a vocabulary from an ordered token list. Index 0 must be `<pad>`.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN) {
            return Err(VocabError::Invalid("index 0 must be <pad>".into()));
        }
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 && t.chars().count() != 1 {
                return Err(VocabError::Invalid(format!("token {t:?} is not a single character")));
            }
            if lookup.insert(t.clone(), i).is_some() {
                return Err(VocabError::Invalid(format!("duplicate token {t:?}")));
            }
        }
        let start = *lookup.get(START_TOKEN).ok_or_else(|| VocabError::Invalid("missing G".into()))?;
        let end = *lookup.get(END_TOKEN).ok_or_else(|| VocabError::Invalid("missing E".into()))?;
        Ok(Vocabulary { tokens, lookup, start, end })
    }

    /// Vocabulary over every character seen in `smiles` (after halogen rewriting):
    /// `<pad>`, `G`, `E`, then observed characters in sorted order.
    pub fn from_corpus<'a>(smiles: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars: Vec<char> = smiles.into_iter().flat_map(|s| normalize(s).chars().collect::<Vec<_>>()).collect();
        chars.sort_unstable();
        chars.dedup();
        let mut tokens = vec![PAD_TOKEN.to_string(), START_TOKEN.to_string(), END_TOKEN.to_string()];
        tokens.extend(chars.into_iter().filter(|c| *c != 'G' && *c != 'E').map(String::from));
        Self::from_tokens(tokens).expect("corpus vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pad(&self) -> usize {
        0
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.lookup.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// One token per line; line number minus one is the index.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn parse_file_string(text: &str) -> Result<Self, VocabError> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        Self::parse_file_string(&fs::read_to_string(path)?)
    }

    /// Encode a SMILES string as `G ... E` padded to [`MAX_LEN`].
    pub fn tokenize(&self, text: &str) -> Result<TokenSequence, VocabError> {
        if let Some(p) = text.char_indices().find(|(_, c)| RESERVED.contains(c)).map(|(p, _)| p) {
            return Err(VocabError::UnknownToken(p));
        }
        let raw: Vec<char> = text.chars().collect();
        let mut ids = Vec::with_capacity(MAX_LEN);
        ids.push(self.start);
        let mut pos = 0;
        while pos < raw.len() {
            let (token, width) = match (raw[pos], raw.get(pos + 1)) {
                ('C', Some('l')) => ('R', 2),
                ('B', Some('r')) => ('L', 2),
                (c, _) => (c, 1),
            };
            match self.lookup.get(token.encode_utf8(&mut [0u8; 4]) as &str) {
                Some(&id) if id != 0 => ids.push(id),
                _ => return Err(VocabError::UnknownToken(pos)),
            }
            pos += width;
        }
        ids.push(self.end);
        if ids.len() > MAX_LEN {
            return Err(VocabError::TooLong(ids.len()));
        }
        let len = ids.len();
        ids.resize(MAX_LEN, 0);
        Ok(TokenSequence { ids, len })
    }

    /// Decode a well-formed sequence back to SMILES, restoring `Cl`/`Br`.
    pub fn detokenize(&self, seq: &TokenSequence) -> Result<String, VocabError> {
        let ids = seq.logical();
        if ids.first() != Some(&self.start) {
            return Err(VocabError::MalformedSequence("sequence does not start with G"));
        }
        if ids.last() != Some(&self.end) || ids.len() < 2 {
            return Err(VocabError::MalformedSequence("sequence does not end with E"));
        }
        self.decode_body(&ids[1..ids.len() - 1])
    }

    /// Decode the characters of a (possibly unterminated) generated sequence.
    /// Returns `None` when the sequence never emitted `E`.
    pub fn decode_generated(&self, seq: &TokenSequence) -> Option<String> {
        let ids = seq.logical();
        if ids.first() != Some(&self.start) || ids.last() != Some(&self.end) || ids.len() < 2 {
            return None;
        }
        self.decode_body(&ids[1..ids.len() - 1]).ok()
    }

    fn decode_body(&self, ids: &[usize]) -> Result<String, VocabError> {
        let mut out = String::with_capacity(ids.len());
        for &id in ids {
            if id == 0 || id == self.start || id == self.end {
                return Err(VocabError::MalformedSequence("special token inside sequence body"));
            }
            out.push_str(self.token(id).ok_or(VocabError::MalformedSequence("index outside vocabulary"))?);
        }
        Ok(denormalize(&out))
    }
}

impl fmt::Display for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vocabulary({} tokens)", self.tokens.len())
    }
}

/// Integer-encoded sequence, padded with 0 after its logical end.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    ids: Vec<usize>,
    len: usize,
}

impl TokenSequence {
    /// Wrap raw ids (logical part only); pads to [`MAX_LEN`].
    pub fn from_logical(logical: &[usize]) -> Result<Self, VocabError> {
        if logical.len() > MAX_LEN {
            return Err(VocabError::TooLong(logical.len()));
        }
        let mut ids = logical.to_vec();
        ids.resize(MAX_LEN, 0);
        Ok(TokenSequence { ids, len: logical.len() })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn logical(&self) -> &[usize] {
        &self.ids[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
