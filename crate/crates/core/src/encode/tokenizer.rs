use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::corpus::normalize_text;

pub const PAD_ID: u32 = 0;
/// Separator marker. Word ids never collide with it.
pub const SEP_ID: u32 = 1;
const RESERVED: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Feature-hashing word tokenizer.
///
/// Text is lowercased; runs of alphanumerics form one word and every other
/// non-space character is a word of its own ("26/69" is three tokens). Each
/// word is hashed with FNV-1a into `[2, vocab_size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashingTokenizer {
    vocab_size: u32,
}

impl HashingTokenizer {
    pub fn new(vocab_size: u32) -> Result<Self, EncodeError> {
        if vocab_size <= RESERVED {
            return Err(EncodeError::InvalidConfig(format!(
                "vocab_size must exceed {RESERVED}"
            )));
        }
        Ok(HashingTokenizer { vocab_size })
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn tokenize(&self, text: &str) -> Result<TokenSeq, EncodeError> {
        let text = normalize_text(text).to_lowercase();
        let mut ids = Vec::new();
        let mut word = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                word.push(ch);
                continue;
            }
            if !word.is_empty() {
                ids.push(self.word_id(&word));
                word.clear();
            }
            if !ch.is_whitespace() {
                ids.push(self.word_id(ch.encode_utf8(&mut [0; 4])));
            }
        }
        if !word.is_empty() {
            ids.push(self.word_id(&word));
        }
        if ids.is_empty() {
            return Err(EncodeError::EmptyText);
        }
        Ok(TokenSeq { ids })
    }

    fn word_id(&self, word: &str) -> u32 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in word.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        RESERVED + (h % (self.vocab_size - RESERVED) as u64) as u32
    }
}
