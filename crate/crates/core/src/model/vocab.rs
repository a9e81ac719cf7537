//! Byte-level vocabulary: 256 byte tokens followed by three specials.

use serde::{Deserialize, Serialize};

pub const BOS: u32 = 256;
pub const EOS: u32 = 257;
pub const PAD: u32 = 258;
pub const VOCAB_SIZE: usize = 259;

/// Token ids framed by `BOS … EOS`, possibly cut at the context length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<u32>,
    truncated: bool,
}

impl TokenSequence {
    /// Wrap raw ids. Ids must lie in `[0, VOCAB_SIZE)`.
    pub fn from_ids(ids: Vec<u32>) -> Self {
        assert!(
            ids.iter().all(|&id| (id as usize) < VOCAB_SIZE),
            "token id out of range"
        );
        TokenSequence {
            ids,
            truncated: false,
        }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Whether the source text did not fit into the context window.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// The first `n` tokens.
    pub fn prefix(&self, n: usize) -> TokenSequence {
        TokenSequence {
            ids: self.ids[..n.min(self.ids.len())].to_vec(),
            truncated: false,
        }
    }

    /// Content tokens: everything except specials.
    pub fn content(&self) -> Vec<u32> {
        self.ids.iter().copied().filter(|&id| id < BOS).collect()
    }

    pub(crate) fn push(&mut self, id: u32) {
        debug_assert!((id as usize) < VOCAB_SIZE);
        self.ids.push(id);
    }
}

/// `BOS bytes… EOS`, truncated from the right to `context_len` tokens.
pub fn tokenize(text: &[u8], context_len: usize) -> TokenSequence {
    let mut ids = Vec::with_capacity(text.len() + 2);
    ids.push(BOS);
    ids.extend(text.iter().map(|&b| b as u32));
    ids.push(EOS);
    let truncated = ids.len() > context_len;
    ids.truncate(context_len);
    TokenSequence { ids, truncated }
}

/// Bytes of every non-special token.
pub fn detokenize(seq: &TokenSequence) -> Vec<u8> {
    detokenize_ids(seq.ids())
}

pub fn detokenize_ids(ids: &[u32]) -> Vec<u8> {
    ids.iter().filter(|&&id| id < BOS).map(|&id| id as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_is_bos_eos() {
        assert_eq!(tokenize(b"", 128).ids(), &[BOS, EOS]);
    }

    #[test]
    fn bytes_map_to_ids() {
        let seq = tokenize(b"ab", 128);
        assert_eq!(seq.ids(), &[BOS, 97, 98, EOS]);
        assert_eq!(detokenize(&seq), b"ab");
        assert!(!seq.truncated());
    }

    #[test]
    fn long_text_is_truncated_to_context() {
        let text = vec![b'x'; 500];
        let seq = tokenize(&text, 128);
        assert_eq!(seq.len(), 128);
        assert!(seq.truncated());
        assert_eq!(seq.ids()[0], BOS);
        assert_eq!(*seq.ids().last().unwrap(), b'x' as u32);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let seq = tokenize(&bytes, usize::MAX);
            prop_assert_eq!(detokenize(&seq), bytes);
            prop_assert!(seq.ids().iter().all(|&id| (id as usize) < VOCAB_SIZE));
        }
    }
}
