//! Shared fixtures, the independent exhaustive-search oracle, and process
//! helpers for the integration suites.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::rngs::StdRng;
use rand::Rng;

use mosaic_stitch::bitmap::Bitmap;
use mosaic_stitch::pgm::{write_pgm, PgmVariant};
use mosaic_stitch::pipeline::ImagePair;

/// Text encoding of the 5x5 reference first image.
pub const REFERENCE_IMAGE1_TEXT: &str = "255,255,255,255,255;255,0,255,255,255;255,255,0,0,0;255,255,255,255,255;255,255,255,255,255;";

/// 5x5 reference first image: black at (1,1), (2,2), (2,3), (2,4).
pub fn reference_image1() -> Bitmap {
    Bitmap::from_fn(5, 5, |r, c| {
        matches!((r, c), (1, 1) | (2, 2) | (2, 3) | (2, 4))
    })
}

/// 5x5 reference second image: black at (3,1), (3,2), (3,3), (4,4).
pub fn reference_image2() -> Bitmap {
    Bitmap::from_fn(5, 5, |r, c| {
        matches!((r, c), (3, 1) | (3, 2) | (3, 3) | (4, 4))
    })
}

pub fn reference_pair() -> ImagePair {
    ImagePair::new(reference_image1(), reference_image2(), "pair0").unwrap()
}

/// Hand-derived merge of the reference pair at offset (row 6, col 4):
/// the frame's black cells land at (7,5), (8,6), (8,7), (8,8); the canvas
/// black at (9,9) lies outside the written window and survives; the rest
/// of the frame writes white over white or clips off the canvas.
pub fn reference_merged() -> Bitmap {
    Bitmap::from_fn(10, 10, |r, c| {
        matches!((r, c), (7, 5) | (8, 6) | (8, 7) | (8, 8) | (9, 9))
    })
}

/// Exhaustive reference search, written against plain bool matrices with
/// no code shared with the library kernels: for every offset of the
/// canvas grid, count coincident black cells (out-of-bounds reads are
/// white) and keep the first offset attaining the maximum, scanning
/// row-major. Returns (count, row, col).
pub fn oracle_search(frame: &[Vec<bool>], space: &[Vec<bool>]) -> (usize, usize, usize) {
    let space_h = space.len();
    let space_w = space[0].len();
    let mut best = (0usize, 0usize, 0usize);
    for row in 0..space_h {
        for col in 0..space_w {
            let mut count = 0usize;
            for (i, frame_row) in frame.iter().enumerate() {
                for (j, &frame_black) in frame_row.iter().enumerate() {
                    if frame_black
                        && row + i < space_h
                        && col + j < space_w
                        && space[row + i][col + j]
                    {
                        count += 1;
                    }
                }
            }
            if count > best.0 {
                best = (count, row, col);
            }
        }
    }
    best
}

/// Bool matrix (true = black) view of a bitmap, for feeding the oracle.
pub fn black_matrix(bitmap: &Bitmap) -> Vec<Vec<bool>> {
    (0..bitmap.height())
        .map(|r| (0..bitmap.width()).map(|c| bitmap.is_black(r, c)).collect())
        .collect()
}

pub fn random_bitmap(rng: &mut StdRng, width: usize, height: usize, density: f64) -> Bitmap {
    Bitmap::from_fn(width, height, |_, _| rng.random_bool(density))
}

/// Writes a bitmap as a P2 PGM file and returns its path.
pub fn write_bitmap_pgm(dir: &Path, name: &str, bitmap: &Bitmap) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, write_pgm(&bitmap.to_gray(), PgmVariant::P2)).unwrap();
    path
}

/// Command for the compiled CLI binary.
pub fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mosaic-stitch"))
}
