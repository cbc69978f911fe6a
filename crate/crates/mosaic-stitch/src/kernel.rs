//! Black-overlap counting kernels.
//!
//! [`count_matches`] is the per-cell reference: it walks the first image as
//! a floating frame over the padded canvas and counts positions where both
//! cells are black. [`count_matches_packed`] computes the same number from
//! bit-packed rows (one bit per cell, 64 cells per word) with shift, AND,
//! and popcount. The two are bit-for-bit equivalent on every input; tests
//! hold the packed kernel to the naive one as its oracle.
//!
//! Window cells that fall outside the canvas read as white and contribute
//! nothing, so both kernels are total over arbitrary offsets.

use std::fmt;
use std::str::FromStr;

use crate::bitmap::{Bitmap, BLACK};

/// Placement of the floating frame's top-left corner within the canvas,
/// in (row, col) order. For a canvas of `R` rows and `C` columns the search
/// grid is `row in 0..R`, `col in 0..C`; the frame may overhang the
/// bottom/right edges, where it reads white.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Offset {
    pub row: usize,
    pub col: usize,
}

impl Offset {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Which counting kernel a search should use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MatchKernel {
    #[default]
    Naive,
    Packed,
}

impl FromStr for MatchKernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Self::Naive),
            "packed" => Ok(Self::Packed),
            other => Err(format!("unknown kernel {other:?}, expected naive or packed")),
        }
    }
}

impl fmt::Display for MatchKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Naive => "naive",
            Self::Packed => "packed",
        })
    }
}

/// Counts positions where `image1` and the canvas window at `at` are both
/// black. Window cells outside `space` count as white.
pub fn count_matches(image1: &Bitmap, space: &Bitmap, at: Offset) -> usize {
    if at.col >= space.width() {
        return 0;
    }
    let overlap_w = image1.width().min(space.width() - at.col);
    let mut total = 0;
    for i in 0..image1.height() {
        let space_row = at.row + i;
        if space_row >= space.height() {
            break;
        }
        let frame = &image1.row(i)[..overlap_w];
        let canvas = &space.row(space_row)[at.col..at.col + overlap_w];
        total += frame
            .iter()
            .zip(canvas)
            .filter(|&(&a, &b)| a == BLACK && b == BLACK)
            .count();
    }
    total
}

const WORD_BITS: usize = u64::BITS as usize;

/// Bit-packed form of a [`Bitmap`]: one bit per cell, bit 1 means black.
///
/// Rows are independent runs of `u64` words; within a word, bit 0 (LSB) is
/// the leftmost of its 64 columns. Bits past the image width are always 0,
/// so the final word needs no masking during AND/popcount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedBitmap {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl PackedBitmap {
    pub fn from_bitmap(bitmap: &Bitmap) -> Self {
        let width = bitmap.width();
        let height = bitmap.height();
        let words_per_row = width.div_ceil(WORD_BITS);
        let mut words = vec![0u64; words_per_row * height];
        for row in 0..height {
            let base = row * words_per_row;
            for (col, &cell) in bitmap.row(row).iter().enumerate() {
                if cell == BLACK {
                    words[base + col / WORD_BITS] |= 1u64 << (col % WORD_BITS);
                }
            }
        }
        Self {
            width,
            height,
            words_per_row,
            words,
        }
    }

    /// Expands back to cell form; exact inverse of [`PackedBitmap::from_bitmap`].
    pub fn to_bitmap(&self) -> Bitmap {
        Bitmap::from_fn(self.width, self.height, |row, col| {
            let word = self.row_words(row)[col / WORD_BITS];
            word >> (col % WORD_BITS) & 1 == 1
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }
}

/// Reads 64 bits starting at `bit_start` from a packed row, padding with
/// zeros past the end.
#[inline]
fn window_word(words: &[u64], bit_start: usize) -> u64 {
    let index = bit_start / WORD_BITS;
    let shift = bit_start % WORD_BITS;
    let lo = words.get(index).copied().unwrap_or(0) >> shift;
    if shift == 0 {
        lo
    } else {
        lo | words.get(index + 1).copied().unwrap_or(0) << (WORD_BITS - shift)
    }
}

/// Same contract as [`count_matches`], on packed operands: each frame row is
/// ANDed against the canvas row re-aligned to the frame's columns, and the
/// surviving bits are popcounted.
pub fn count_matches_packed(image1: &PackedBitmap, space: &PackedBitmap, at: Offset) -> usize {
    let mut total = 0u32;
    for i in 0..image1.height {
        let space_row = at.row + i;
        if space_row >= space.height {
            break;
        }
        let frame = image1.row_words(i);
        let canvas = space.row_words(space_row);
        for (k, &frame_word) in frame.iter().enumerate() {
            let canvas_word = window_word(canvas, at.col + k * WORD_BITS);
            total += (frame_word & canvas_word).count_ones();
        }
    }
    total as usize
}
