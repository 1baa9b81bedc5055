use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::quantize::{coordinate_word, quantize_coordinate};
use crate::error::{Error, Result};
use crate::sequence::{HoldsSequence, MoveSequence, Point};

pub const SOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
pub const SPECIALS: [&str; 3] = ["<sos>", "<eos>", "<unk>"];

/// Word ↔ id map. Ids `0..3` are the specials; content words follow in
/// sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let content: BTreeSet<String> =
            words.into_iter().map(Into::into).filter(|w| !SPECIALS.contains(&w.as_str())).collect();
        let words: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).chain(content).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn content_len(&self) -> usize {
        self.words.len() - SPECIALS.len()
    }

    /// Id of `word`, or [`UNK`] for unknown words.
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIALS.len()
    }

    pub fn encode(&self, words: &[String]) -> Vec<usize> {
        words.iter().map(|w| self.id(w)).collect()
    }
}

impl Serialize for Vocab {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.words.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let words = Vec::<String>::deserialize(d)?;
        if words.len() < SPECIALS.len() || words[..SPECIALS.len()] != SPECIALS {
            return Err(serde::de::Error::custom("vocabulary must start with <sos>, <eos>, <unk>"));
        }
        Ok(Vocab::from_words(words))
    }
}

/// `"x_y"` word of a hold after quantization.
pub fn hold_word(p: Point, decimals: u32) -> Result<String> {
    Ok(format!("{}_{}", coordinate_word(p.x, decimals)?, coordinate_word(p.y, decimals)?))
}

/// Holds sentence of a move sequence: distinct quantized holds, sorted by
/// `y` then `x`.
pub fn holds_sentence_of_moves(seq: &MoveSequence, decimals: u32) -> Result<Vec<String>> {
    holds_sentence(&seq.moves.iter().map(|m| m.point()).collect::<Vec<_>>(), decimals)
}

pub fn holds_sentence(points: &[Point], decimals: u32) -> Result<Vec<String>> {
    let mut q = points
        .iter()
        .map(|p| Ok((quantize_coordinate(p.y, decimals)?, quantize_coordinate(p.x, decimals)?)))
        .collect::<Result<Vec<_>>>()?;
    q.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    q.dedup();
    q.into_iter().map(|(y, x)| hold_word(Point::new(x, y), decimals)).collect()
}

/// `"limb_x_y"` words in move order.
pub fn move_sentence(seq: &MoveSequence, decimals: u32) -> Result<Vec<String>> {
    seq.moves
        .iter()
        .map(|m| Ok(format!("{}_{}", m.limb.code(), hold_word(m.point(), decimals)?)))
        .collect()
}

/// Input vocabulary of quantized hold words and output vocabulary of
/// `limb_x_y` words observed in the corpora.
pub fn build_seq2seq_vocabs(
    move_seqs: &[MoveSequence],
    holds_seqs: &[HoldsSequence],
    decimals: u32,
) -> Result<(Vocab, Vocab)> {
    if move_seqs.is_empty() && holds_seqs.is_empty() {
        return Err(Error::invalid("cannot build vocabularies from an empty corpus"));
    }
    let mut input = Vec::new();
    let mut output = Vec::new();
    for seq in move_seqs {
        input.extend(holds_sentence_of_moves(seq, decimals)?);
        output.extend(move_sentence(seq, decimals)?);
    }
    for hs in holds_seqs {
        input.extend(holds_sentence(&hs.holds, decimals)?);
    }
    Ok((Vocab::from_words(input), Vocab::from_words(output)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Limb;

    #[test]
    fn single_sentence_has_two_words() {
        let hs = HoldsSequence::new(vec![Point::new(0.2, 0.3), Point::new(0.4, 0.7)]);
        let (input, output) = build_seq2seq_vocabs(&[], &[hs], 1).unwrap();
        assert_eq!(input.content_len(), 2);
        assert!(input.contains("0.2_0.3") && input.contains("0.4_0.7"));
        assert_eq!(output.content_len(), 0);
    }

    #[test]
    fn full_grid_bounds() {
        let grid: Vec<Point> = (0..=10)
            .flat_map(|i| (0..=10).map(move |j| Point::new(i as f64 / 10.0, j as f64 / 10.0)))
            .collect();
        let moves = MoveSequence::from_moves(
            grid.iter().flat_map(|&p| Limb::ALL.into_iter().map(move |l| (p, l))),
        );
        let (input, output) = build_seq2seq_vocabs(&[moves], &[HoldsSequence::new(grid)], 1).unwrap();
        assert_eq!(input.content_len(), 121);
        assert_eq!(input.len(), 124);
        assert_eq!(output.content_len(), 484);
    }

    #[test]
    fn specials_first_and_unknown_maps_to_unk() {
        let v = Vocab::from_words(["b", "a", "a"]);
        assert_eq!(v.word(SOS), Some("<sos>"));
        assert_eq!(v.word(3), Some("a"));
        assert_eq!(v.id("zzz"), UNK);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocab>(r#"["a"]"#).is_err());
    }

    #[test]
    fn sentences() {
        let seq = MoveSequence::from_moves([
            (Point::new(0.234, 0.91), Limb::LeftHand),
            (Point::new(0.61, 0.35), Limb::RightFoot),
            (Point::new(0.21, 0.88), Limb::RightHand),
        ]);
        assert_eq!(move_sentence(&seq, 1).unwrap(), vec!["LH_0.2_0.9", "RF_0.6_0.4", "RH_0.2_0.9"]);
        assert_eq!(holds_sentence_of_moves(&seq, 1).unwrap(), vec!["0.6_0.4", "0.2_0.9"]);
    }
}
