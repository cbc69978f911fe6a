//! Stitching of two overlapping monochrome mosaic images by exhaustive
//! black-pixel overlap search.
//!
//! Grayscale input is binarized against a threshold (default 128) into a
//! [`Bitmap`] whose cells are exactly 0 (black) or 255 (white). The second
//! image is embedded in the bottom-right of a white canvas large enough to
//! admit every relative placement of the first, the first image is swept
//! across that canvas as a floating frame, and the offset with the most
//! coincident black pixels wins. The first image is then copied onto the
//! canvas at the winning offset, overwriting what is underneath.
//!
//! The whole job runs as an embedded map/reduce pipeline
//! ([`mapreduce`]): a mapper that builds the padded canvas, a mapper that
//! searches disjoint stripes of the offset grid, a reducer that selects
//! the global best candidate, and a finalizer mapper that merges. Output
//! is deterministic for any worker or stripe count.
//!
//! Two search kernels are provided: a naive per-cell reference and a
//! bit-packed variant (64 cells per machine word, AND + popcount). They
//! are bit-for-bit equivalent; the packed one is just faster.
//!
//! Modules:
//! - [`bitmap`]: rasters, binarization, and the `,`/`;` text codec.
//! - [`kernel`]: the two overlap-counting kernels.
//! - [`mapreduce`]: keyed records, job plans, sequential/parallel executors.
//! - [`pipeline`]: the stitch stages and job driver.
//! - [`pgm`]: PGM (P2/P5) reading and writing.
//! - [`bench`]: timing sweeps over synthetic pairs and a log-log slope fit.
//!
//! The `mosaic-stitch` binary wires these together behind `stitch`,
//! `binarize`, `serialize`, and `bench` subcommands.

pub mod bench;
pub mod bitmap;
pub mod kernel;
pub mod mapreduce;
pub mod pgm;
pub mod pipeline;

pub use bitmap::{BinarizationConfig, Bitmap, BitmapError, GrayImage, SerializedBitmap};
pub use kernel::{MatchKernel, Offset, PackedBitmap};
pub use mapreduce::{JobPlan, Record, StageError};
pub use pipeline::{ImagePair, MatchResult, StitchOutput};
