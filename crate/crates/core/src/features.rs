//! Turns raw tweet text into fixed-length id sequences.

use crate::subword::{EncodedText, SubwordVocabulary};
use crate::text::{clean, StopwordList, TokenSequence};

#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub stopwords: StopwordList,
    pub vocab: SubwordVocabulary,
    pub max_len: usize,
}

impl TextEncoder {
    pub fn new(vocab: SubwordVocabulary, max_len: usize) -> Self {
        TextEncoder {
            stopwords: StopwordList::english(),
            vocab,
            max_len,
        }
    }

    pub fn tokens(&self, text: &str) -> TokenSequence {
        clean(text, &self.stopwords)
    }

    pub fn encode(&self, text: &str) -> EncodedText {
        self.vocab.encode(&self.tokens(text), self.max_len)
    }
}
