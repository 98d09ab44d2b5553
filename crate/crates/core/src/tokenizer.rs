//! Whitespace tokenizer that hashes words into a fixed vocabulary.

use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;

pub const CLS_ID: usize = 0;
pub const PAD_ID: usize = 1;
pub const SEP_ID: usize = 2;
pub const UNK_ID: usize = 3;
/// Ids below this value are special tokens; words hash into the rest.
pub const RESERVED_IDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyTokenizer {
    vocab_size: usize,
}

impl ToyTokenizer {
    /// `vocab_size` must exceed [`RESERVED_IDS`].
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size > RESERVED_IDS, "vocabulary too small");
        ToyTokenizer { vocab_size }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn word_id(&self, word: &str) -> usize {
        let mut h = FnvHasher::default();
        h.write(word.as_bytes());
        RESERVED_IDS + (h.finish() % (self.vocab_size - RESERVED_IDS) as u64) as usize
    }

    pub fn words(text: &str) -> impl Iterator<Item = &str> {
        text.split_whitespace()
    }

    pub fn ids(&self, text: &str) -> Vec<usize> {
        Self::words(text).map(|w| self.word_id(w)).collect()
    }

    /// `<s> text </s>`, truncated to at most `max_len` ids.
    pub fn encode_single(&self, text: &str, max_len: usize) -> Vec<usize> {
        let mut body = self.ids(text);
        body.truncate(max_len.saturating_sub(2));
        let mut out = Vec::with_capacity(body.len() + 2);
        out.push(CLS_ID);
        out.extend(body);
        out.push(SEP_ID);
        out
    }

    /// `<s> a </s></s> b </s>`, trimming the longer side first until the
    /// result fits in `max_len`.
    pub fn encode_pair(&self, a: &str, b: &str, max_len: usize) -> Vec<usize> {
        let (mut ia, mut ib) = (self.ids(a), self.ids(b));
        let budget = max_len.saturating_sub(4);
        while ia.len() + ib.len() > budget {
            if ia.len() >= ib.len() {
                ia.pop();
            } else {
                ib.pop();
            }
        }
        let mut out = Vec::with_capacity(ia.len() + ib.len() + 4);
        out.push(CLS_ID);
        out.extend(ia);
        out.push(SEP_ID);
        out.push(SEP_ID);
        out.extend(ib);
        out.push(SEP_ID);
        out
    }
}
