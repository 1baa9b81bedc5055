//! Token formatting for the hold-ordering transformers.
//!
//! Token `i` names the hold at position `i` of the presented (original)
//! sequence. For an `n`-hold example the autoregressive pair is
//!
//! ```text
//! input  = 0, 1, …, n-1, order[0], …, order[n-2]
//! output = 1, …, n-1, order[0], …, order[n-1]
//! ```
//!
//! i.e. the output is the input shifted left by one with the final sorted
//! token appended.

use serde::{Deserialize, Serialize};

use crate::dataset::examples::OrderedHoldsExample;
use crate::error::{Error, Result};
use crate::sequence::Point;

pub const DEFAULT_MAX_HOLDS: usize = 17;
/// Coordinate given to padding positions; outside the board.
pub const PAD_COORD: Point = Point::new(-1.0, -1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedPair {
    pub input_tokens: Vec<usize>,
    pub output_tokens: Vec<usize>,
    pub input_coords: Vec<Point>,
    pub pad_id: usize,
    /// Number of holds in the example.
    pub n_holds: usize,
    /// Sequence length before padding.
    pub n_real: usize,
}

impl TokenizedPair {
    pub fn len(&self) -> usize {
        self.input_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadStrategy {
    /// Imaginary hold: `pad_id` token at [`PAD_COORD`].
    #[default]
    Imaginary,
    /// Repeat the last real input position (token and coordinate); output
    /// positions repeat the last real output token.
    RepeatLast,
}

fn check_pad_id(ex: &OrderedHoldsExample, pad_id: usize) -> Result<()> {
    if pad_id < ex.len() {
        return Err(Error::invalid(format!("pad id {pad_id} collides with hold ids 0..{}", ex.len())));
    }
    Ok(())
}

/// Concatenated original + sorted sequence for the autoregressive model.
pub fn format_autoregressive_pair(ex: &OrderedHoldsExample, pad_id: usize) -> Result<TokenizedPair> {
    let n = ex.len();
    if n < 2 {
        return Err(Error::invalid(format!("autoregressive pairs need at least 2 holds, got {n}")));
    }
    check_pad_id(ex, pad_id)?;
    let mut input_tokens: Vec<usize> = (0..n).collect();
    input_tokens.extend_from_slice(&ex.order[..n - 1]);
    let mut output_tokens: Vec<usize> = (1..n).collect();
    output_tokens.extend_from_slice(&ex.order);
    let input_coords = input_tokens.iter().map(|&t| ex.original[t]).collect();
    Ok(TokenizedPair { input_tokens, output_tokens, input_coords, pad_id, n_holds: n, n_real: 2 * n - 1 })
}

/// Unconcatenated pair for the single-pass model: position `i` carries the
/// `i`-th presented hold and targets the id of the `i`-th hold used.
pub fn format_simple_pair(ex: &OrderedHoldsExample, pad_id: usize) -> Result<TokenizedPair> {
    let n = ex.len();
    if n == 0 {
        return Err(Error::invalid("empty example"));
    }
    check_pad_id(ex, pad_id)?;
    Ok(TokenizedPair {
        input_tokens: (0..n).collect(),
        output_tokens: ex.order.clone(),
        input_coords: ex.original.clone(),
        pad_id,
        n_holds: n,
        n_real: n,
    })
}

/// Appends trailing padding up to `max_len` positions.
pub fn pad_to_length(pair: &TokenizedPair, max_len: usize, pad_id: usize) -> Result<TokenizedPair> {
    pad_with(pair, max_len, pad_id, PadStrategy::Imaginary)
}

pub fn pad_with(pair: &TokenizedPair, max_len: usize, pad_id: usize, strategy: PadStrategy) -> Result<TokenizedPair> {
    let len = pair.len();
    if len > max_len {
        return Err(Error::invalid(format!("sequence of length {len} exceeds max_len {max_len}")));
    }
    let real = pair.n_real.min(len);
    if pair.input_tokens[..real].contains(&pad_id) || pair.output_tokens[..real].contains(&pad_id) {
        return Err(Error::invalid(format!("pad id {pad_id} collides with a real token")));
    }
    let mut out = pair.clone();
    out.pad_id = pad_id;
    let extra = max_len - len;
    let (in_tok, in_coord, out_tok) = match strategy {
        PadStrategy::Imaginary => (pad_id, PAD_COORD, pad_id),
        PadStrategy::RepeatLast => (
            *pair.input_tokens.last().expect("nonempty pair"),
            *pair.input_coords.last().expect("nonempty pair"),
            *pair.output_tokens.last().expect("nonempty pair"),
        ),
    };
    out.input_tokens.extend(std::iter::repeat_n(in_tok, extra));
    out.input_coords.extend(std::iter::repeat_n(in_coord, extra));
    out.output_tokens.extend(std::iter::repeat_n(out_tok, extra));
    Ok(out)
}

/// Maps the last `n` output ids back to coordinates through the original
/// table.
pub fn decode_sorted(pair: &TokenizedPair, original: &[Point]) -> Vec<Point> {
    let end = pair.n_real;
    pair.output_tokens[end - pair.n_holds..end].iter().map(|&t| original[t]).collect()
}
