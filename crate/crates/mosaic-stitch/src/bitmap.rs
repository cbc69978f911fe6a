//! Raster types, grayscale binarization, and the text codec the pipeline
//! uses to move images between stages.
//!
//! A [`Bitmap`] cell is exactly 0 (black) or 255 (white); no other value is
//! representable. As text, cells are joined with `,` and every row is
//! terminated by `;`, with no whitespace anywhere: `255;` is the smallest
//! valid image, and a 2x2 checkerboard reads `0,255;255,0;`.

use std::fmt;

use thiserror::Error;

pub const BLACK: u8 = 0;
pub const WHITE: u8 = 255;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitmapError {
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyDimensions { width: usize, height: usize },
    #[error("buffer length {len} does not match dimensions {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("cell at index {index} is {value}, expected 0 or 255")]
    InvalidCell { index: usize, value: u8 },
    #[error("binarization threshold must be in 1..=255 (got 0)")]
    ZeroThreshold,
    #[error("malformed bitmap text at row {row}, column {col}: {reason}")]
    MalformedText {
        /// 1-based row of the first offense.
        row: usize,
        /// 1-based cell position of the first offense within that row.
        col: usize,
        reason: String,
    },
}

/// 8-bit grayscale raster, the form images take before binarization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Builds an image from row-major pixels. The buffer length must equal
    /// `width * height` and both dimensions must be positive.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, BitmapError> {
        if width == 0 || height == 0 {
            return Err(BitmapError::EmptyDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(BitmapError::LengthMismatch {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Thresholds every pixel: `< threshold` becomes black (0), everything
    /// else white (255). Total on all inputs.
    pub fn to_bitmap(&self, cfg: BinarizationConfig) -> Bitmap {
        let cells = self
            .pixels
            .iter()
            .map(|&p| if p >= cfg.threshold() { WHITE } else { BLACK })
            .collect();
        Bitmap {
            width: self.width,
            height: self.height,
            cells,
        }
    }
}

/// Binarization threshold, an integer in `1..=255`. Pixels at or above the
/// threshold map to white; mid-gray (the default 128) stays white.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinarizationConfig {
    threshold: u8,
}

impl BinarizationConfig {
    pub fn new(threshold: u8) -> Result<Self, BitmapError> {
        if threshold == 0 {
            return Err(BitmapError::ZeroThreshold);
        }
        Ok(Self { threshold })
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }
}

impl Default for BinarizationConfig {
    fn default() -> Self {
        Self { threshold: 128 }
    }
}

/// Binary raster whose cells are exactly 0 (black) or 255 (white).
///
/// Immutable after construction; every constructor enforces the cell
/// alphabet and the `width * height` length invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

impl Bitmap {
    /// Builds a bitmap from row-major cells, rejecting any value other than
    /// 0 or 255.
    pub fn from_cells(width: usize, height: usize, cells: Vec<u8>) -> Result<Self, BitmapError> {
        if width == 0 || height == 0 {
            return Err(BitmapError::EmptyDimensions { width, height });
        }
        if cells.len() != width * height {
            return Err(BitmapError::LengthMismatch {
                width,
                height,
                len: cells.len(),
            });
        }
        if let Some(index) = cells.iter().position(|&c| c != BLACK && c != WHITE) {
            return Err(BitmapError::InvalidCell {
                index,
                value: cells[index],
            });
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    /// Builds a bitmap cell by cell; the closure returns `true` for black.
    ///
    /// # Panics
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut black: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "bitmap dimensions must be positive");
        let mut cells = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                cells.push(if black(row, col) { BLACK } else { WHITE });
            }
        }
        Self {
            width,
            height,
            cells,
        }
    }

    /// All-white bitmap of the given dimensions.
    pub fn white(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.cells[row * self.width..(row + 1) * self.width]
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn is_black(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == BLACK
    }

    /// Number of black cells.
    pub fn black_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == BLACK).count()
    }

    /// Reinterprets the bitmap as a grayscale image with values in {0, 255}.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.cells.clone(),
        }
    }

    /// Encodes the bitmap as text: cells joined with `,`, each row
    /// terminated by `;`, rows in top-to-bottom order.
    pub fn serialize(&self) -> SerializedBitmap {
        // "255," per cell is the worst case.
        let mut text = String::with_capacity(self.cells.len() * 4);
        for row in 0..self.height {
            for (col, &cell) in self.row(row).iter().enumerate() {
                if col > 0 {
                    text.push(',');
                }
                text.push_str(if cell == BLACK { "0" } else { "255" });
            }
            text.push(';');
        }
        SerializedBitmap { text }
    }

    /// Parses the text encoding produced by [`Bitmap::serialize`].
    ///
    /// Rejects, with the 1-based row and cell position of the first offense:
    /// tokens other than `0`/`255`, ragged rows, a missing trailing `;`,
    /// embedded whitespace, and empty input. Never repairs; ragged input is
    /// a hard error because silent padding would corrupt offset arithmetic
    /// downstream.
    pub fn deserialize(text: &str) -> Result<Self, BitmapError> {
        if text.is_empty() {
            return Err(BitmapError::MalformedText {
                row: 1,
                col: 1,
                reason: "empty input".into(),
            });
        }
        let mut rows: Vec<&str> = text.split(';').collect();
        // A well-formed encoding ends with ';', so the final split piece is
        // empty; anything else is an unterminated row.
        let trailer = rows.pop().unwrap_or("");
        if !trailer.is_empty() {
            return Err(BitmapError::MalformedText {
                row: rows.len() + 1,
                col: trailer.split(',').count(),
                reason: "missing row terminator ';'".into(),
            });
        }

        let mut width = 0usize;
        let mut cells = Vec::new();
        for (row_idx, row_text) in rows.iter().enumerate() {
            let row = row_idx + 1;
            let mut count = 0usize;
            for (cell_idx, token) in row_text.split(',').enumerate() {
                let col = cell_idx + 1;
                match token {
                    "0" => cells.push(BLACK),
                    "255" => cells.push(WHITE),
                    _ => {
                        let reason = if token.is_empty() {
                            "empty cell".to_string()
                        } else if token.chars().any(|c| c.is_whitespace()) {
                            "whitespace in cell".to_string()
                        } else {
                            format!("invalid cell {token:?}, expected 0 or 255")
                        };
                        return Err(BitmapError::MalformedText { row, col, reason });
                    }
                }
                count += 1;
            }
            if row_idx == 0 {
                width = count;
            } else if count != width {
                return Err(BitmapError::MalformedText {
                    row,
                    col: count.min(width) + 1,
                    reason: format!("ragged row: expected {width} cells, found {count}"),
                });
            }
        }

        Self::from_cells(width, rows.len(), cells)
    }
}

/// The text encoding of a [`Bitmap`]: a string over `{0, 2, 5, ',', ';'}`
/// where rows are `;`-terminated and cells `,`-separated. Only produced by
/// [`Bitmap::serialize`], so the grammar invariants always hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedBitmap {
    text: String,
}

impl SerializedBitmap {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

impl fmt::Display for SerializedBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl AsRef<str> for SerializedBitmap {
    fn as_ref(&self) -> &str {
        &self.text
    }
}
