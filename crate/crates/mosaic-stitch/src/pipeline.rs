//! The stitching pipeline, composed as map/reduce stages over keyed text
//! records:
//!
//! 1. `new_space` (mapper): pads the second image into a white canvas of
//!    combined dimensions, embedded bottom-right.
//! 2. `search` (mapper): sweeps the first image over the canvas in
//!    disjoint row stripes and emits each stripe's best offset as a
//!    `count,row,col` candidate, plus the images as a payload value.
//! 3. `select_best` (reducer): picks the global best candidate per pair:
//!    highest count, then smallest row, then smallest col, which equals
//!    the first hit of a full row-major scan regardless of striping.
//! 4. `merge` (mapper): copies the first image onto the canvas at the
//!    winning offset, overwriting unconditionally and clipping writes that
//!    fall outside the canvas.
//!
//! Job input lines are `pairId<TAB>image1<TAB>image2` with images in the
//! bitmap text encoding; the final record per pair is
//! `pairId<TAB>mergedImage`, with `pairId<TAB>count,row,col` available as
//! sidecar metadata.

use std::collections::BTreeMap;
use std::ops::Range;

use thiserror::Error;

use crate::bitmap::{Bitmap, BitmapError};
use crate::kernel::{count_matches, count_matches_packed, MatchKernel, Offset, PackedBitmap};
use crate::mapreduce::{
    parallel_map_indexed, run_job_traced, JobError, JobPlan, Record, StageError,
};

pub const STAGE_NEW_SPACE: &str = "new_space";
pub const STAGE_SEARCH: &str = "search";
pub const STAGE_SELECT_BEST: &str = "select_best";
pub const STAGE_MERGE: &str = "merge";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Bitmap(#[from] BitmapError),
    #[error("pair id must be non-empty and free of tabs and newlines (got {0:?})")]
    InvalidPairId(String),
    #[error("malformed candidate {0:?}, expected count,row,col")]
    MalformedCandidate(String),
    #[error("record {key:?}: {reason}")]
    MalformedRecord { key: String, reason: String },
}

/// The two bitmaps of one stitch job, keyed by a pair id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePair {
    image1: Bitmap,
    image2: Bitmap,
    pair_id: String,
}

impl ImagePair {
    pub fn new(
        image1: Bitmap,
        image2: Bitmap,
        pair_id: impl Into<String>,
    ) -> Result<Self, PipelineError> {
        let pair_id = pair_id.into();
        if pair_id.is_empty() || pair_id.contains('\t') || pair_id.contains('\n') {
            return Err(PipelineError::InvalidPairId(pair_id));
        }
        Ok(Self {
            image1,
            image2,
            pair_id,
        })
    }

    pub fn image1(&self) -> &Bitmap {
        &self.image1
    }

    pub fn image2(&self) -> &Bitmap {
        &self.image2
    }

    pub fn pair_id(&self) -> &str {
        &self.pair_id
    }

    /// Encodes the pair as a job record: key is the pair id, value is the
    /// two image strings joined by a tab.
    pub fn to_record(&self) -> Record {
        let value = format!("{}\t{}", self.image1.serialize(), self.image2.serialize());
        Record::new(&self.pair_id, value).expect("pair id and bitmap text are separator-free")
    }

    /// Decodes a job record produced by [`ImagePair::to_record`] (or read
    /// from a job file).
    pub fn from_record(record: &Record) -> Result<Self, PipelineError> {
        let (first, second) =
            record
                .value()
                .split_once('\t')
                .ok_or_else(|| PipelineError::MalformedRecord {
                    key: record.key().to_string(),
                    reason: "expected image1<TAB>image2".into(),
                })?;
        let image1 = Bitmap::deserialize(first)?;
        let image2 = Bitmap::deserialize(second)?;
        Self::new(image1, image2, record.key())
    }
}

/// A search offset and the number of coincident black pixels there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchResult {
    pub at: Offset,
    pub count: usize,
}

impl MatchResult {
    /// Candidate ordering: higher count wins, ties go to the smaller
    /// (row, col), i.e. the first hit of a row-major scan.
    fn better_than(self, other: Self) -> bool {
        self.count > other.count || (self.count == other.count && self.at < other.at)
    }
}

/// Final product of one stitch: the merged canvas and the offset that won.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchOutput {
    pub merged: Bitmap,
    pub best: MatchResult,
}

/// Builds the padded canvas: a white bitmap of combined dimensions
/// (heights summed, widths summed) with the second image embedded at the
/// bottom-right, i.e. displaced by the first image's height and width.
/// Every relative placement of the first image is reachable inside it.
pub fn new_space(pair: &ImagePair) -> Bitmap {
    let top = pair.image1.height();
    let left = pair.image1.width();
    let width = left + pair.image2.width();
    let height = top + pair.image2.height();
    Bitmap::from_fn(width, height, |row, col| {
        row >= top && col >= left && pair.image2.is_black(row - top, col - left)
    })
}

/// Operands for repeated window counting, packed once when the packed
/// kernel is selected.
enum PreparedSearch<'a> {
    Naive {
        frame: &'a Bitmap,
        space: &'a Bitmap,
    },
    Packed {
        frame: PackedBitmap,
        space: PackedBitmap,
    },
}

impl<'a> PreparedSearch<'a> {
    fn prepare(kernel: MatchKernel, frame: &'a Bitmap, space: &'a Bitmap) -> Self {
        match kernel {
            MatchKernel::Naive => Self::Naive { frame, space },
            MatchKernel::Packed => Self::Packed {
                frame: PackedBitmap::from_bitmap(frame),
                space: PackedBitmap::from_bitmap(space),
            },
        }
    }

    fn count(&self, at: Offset) -> usize {
        match self {
            Self::Naive { frame, space } => count_matches(frame, space, at),
            Self::Packed { frame, space } => count_matches_packed(frame, space, at),
        }
    }

    fn space_width(&self) -> usize {
        match self {
            Self::Naive { space, .. } => space.width(),
            Self::Packed { space, .. } => space.width(),
        }
    }
}

/// Row-major scan of the given offset rows; returns the first offset
/// achieving the stripe's maximum count, or None for an empty range.
fn scan_rows(search: &PreparedSearch, rows: Range<usize>) -> Option<MatchResult> {
    let mut best: Option<MatchResult> = None;
    for row in rows {
        for col in 0..search.space_width() {
            let at = Offset::new(row, col);
            let count = search.count(at);
            if best.is_none_or(|b| count > b.count) {
                best = Some(MatchResult { at, count });
            }
        }
    }
    best
}

/// Exhaustive overlap search with the naive kernel; see
/// [`best_overlap_with`].
pub fn best_overlap(image1: &Bitmap, space: &Bitmap) -> MatchResult {
    best_overlap_with(image1, space, MatchKernel::Naive)
}

/// Scans every offset of the canvas grid (all rows and columns of
/// `space`, the frame overhanging bottom/right edges as white) and
/// returns the maximum overlap count with its row-major-first offset.
/// A pair with no black pixels anywhere yields count 0 at (0,0).
pub fn best_overlap_with(image1: &Bitmap, space: &Bitmap, kernel: MatchKernel) -> MatchResult {
    let search = PreparedSearch::prepare(kernel, image1, space);
    scan_rows(&search, 0..space.height()).expect("canvas has at least one row")
}

/// Copies `image1` onto a copy of `space` at the winning offset.
/// Every frame cell is written, white as well as black; writes that fall
/// outside the canvas are discarded. Output dimensions equal `space`'s.
pub fn merge(image1: &Bitmap, space: &Bitmap, best: MatchResult) -> Bitmap {
    let mut cells = space.cells().to_vec();
    let at = best.at;
    if at.col < space.width() {
        let overlap_w = image1.width().min(space.width() - at.col);
        for i in 0..image1.height() {
            let row = at.row + i;
            if row >= space.height() {
                break;
            }
            let dest = row * space.width() + at.col;
            cells[dest..dest + overlap_w].copy_from_slice(&image1.row(i)[..overlap_w]);
        }
    }
    Bitmap::from_cells(space.width(), space.height(), cells).expect("source bitmaps are valid")
}

/// Splits `total` offset rows into at most `stripes` contiguous,
/// disjoint, covering ranges; empty ranges are dropped.
fn stripe_ranges(total: usize, stripes: usize) -> Vec<Range<usize>> {
    let stripes = stripes.max(1);
    let base = total / stripes;
    let extra = total % stripes;
    let mut ranges = Vec::new();
    let mut start = 0;
    for idx in 0..stripes {
        let len = base + usize::from(idx < extra);
        if len > 0 {
            ranges.push(start..start + len);
            start += len;
        }
    }
    ranges
}

/// Encodes a candidate as decimal `count,row,col`.
pub fn encode_candidate(result: MatchResult) -> String {
    format!("{},{},{}", result.count, result.at.row, result.at.col)
}

/// Parses `count,row,col`.
pub fn decode_candidate(text: &str) -> Result<MatchResult, PipelineError> {
    let malformed = || PipelineError::MalformedCandidate(text.to_string());
    let mut fields = text.split(',');
    let count = fields.next().and_then(|f| f.parse().ok()).ok_or_else(malformed)?;
    let row = fields.next().and_then(|f| f.parse().ok()).ok_or_else(malformed)?;
    let col = fields.next().and_then(|f| f.parse().ok()).ok_or_else(malformed)?;
    if fields.next().is_some() {
        return Err(malformed());
    }
    Ok(MatchResult {
        at: Offset::new(row, col),
        count,
    })
}

fn stage_err(err: impl std::fmt::Display) -> StageError {
    StageError::new(err.to_string())
}

/// Assembles the four-stage stitch plan. `stripes` controls how many
/// disjoint offset-row ranges the search mapper emits candidates for;
/// neither it nor `workers` can change the output.
pub fn build_stitch_plan(workers: usize, stripes: usize, kernel: MatchKernel) -> JobPlan {
    let workers = workers.max(1);
    let stripes = stripes.max(1);

    JobPlan::new(workers)
        .map(STAGE_NEW_SPACE, |record: &Record| {
            let pair = ImagePair::from_record(record).map_err(stage_err)?;
            let space = new_space(&pair);
            let value = format!("{}\t{}", pair.image1.serialize(), space.serialize());
            Ok(vec![
                Record::new(record.key(), value).expect("bitmap text is separator-free")
            ])
        })
        .map(STAGE_SEARCH, move |record: &Record| {
            let (frame, space) = parse_frame_and_space(record)?;
            let search = PreparedSearch::prepare(kernel, &frame, &space);
            let ranges = stripe_ranges(space.height(), stripes);
            // One image pair is one record, so intra-pair parallelism is
            // explicit here rather than in the record scheduler.
            let stripe_best = parallel_map_indexed(&ranges, workers, |_, range| {
                scan_rows(&search, range.clone())
            });
            let mut out: Vec<Record> = stripe_best
                .into_iter()
                .flatten()
                .map(|candidate| {
                    Record::new(record.key(), encode_candidate(candidate))
                        .expect("candidate text is separator-free")
                })
                .collect();
            // The images ride along so the merge stage can reach them.
            out.push(record.clone());
            Ok(out)
        })
        .reduce(STAGE_SELECT_BEST, |key, values| {
            let mut payload: Option<&str> = None;
            let mut best: Option<MatchResult> = None;
            for value in values {
                if value.contains('\t') {
                    if payload.is_some() {
                        return Err(StageError::new(
                            "duplicate image payload; pair id appears more than once",
                        ));
                    }
                    payload = Some(value);
                } else {
                    let candidate = decode_candidate(value).map_err(stage_err)?;
                    if best.is_none_or(|b| candidate.better_than(b)) {
                        best = Some(candidate);
                    }
                }
            }
            let payload = payload.ok_or_else(|| StageError::new("missing image payload"))?;
            let best = best.ok_or_else(|| StageError::new("no search candidates"))?;
            let value = format!("{}\t{}", encode_candidate(best), payload);
            Ok(vec![
                Record::new(key, value).expect("reducer output is newline-free")
            ])
        })
        .map(STAGE_MERGE, |record: &Record| {
            let mut fields = record.value().splitn(3, '\t');
            let (Some(candidate), Some(frame_text), Some(space_text)) =
                (fields.next(), fields.next(), fields.next())
            else {
                return Err(StageError::new("expected candidate<TAB>image1<TAB>space"));
            };
            let best = decode_candidate(candidate).map_err(stage_err)?;
            let frame = Bitmap::deserialize(frame_text).map_err(stage_err)?;
            let space = Bitmap::deserialize(space_text).map_err(stage_err)?;
            let merged = merge(&frame, &space, best);
            Ok(vec![Record::new(record.key(), merged.serialize().into_string())
                .expect("bitmap text is separator-free")])
        })
}

fn parse_frame_and_space(record: &Record) -> Result<(Bitmap, Bitmap), StageError> {
    let (frame_text, space_text) = record
        .value()
        .split_once('\t')
        .ok_or_else(|| StageError::new("expected image1<TAB>space"))?;
    let frame = Bitmap::deserialize(frame_text).map_err(stage_err)?;
    let space = Bitmap::deserialize(space_text).map_err(stage_err)?;
    Ok((frame, space))
}

/// One stitched pair out of a job run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchedPair {
    pub pair_id: String,
    pub output: StitchOutput,
}

/// Everything a driver needs from one job run: decoded outputs plus the
/// canonical record form of the input, output, and sidecar metadata
/// channels.
pub struct StitchJobResult {
    pub stitched: Vec<StitchedPair>,
    pub input_records: Vec<Record>,
    pub output_records: Vec<Record>,
    pub metadata_records: Vec<Record>,
}

/// Runs the full stitch job over the given pairs and decodes the results.
/// Output is byte-identical for every `workers` and `stripes` value.
pub fn run_stitch_job(
    pairs: &[ImagePair],
    workers: usize,
    stripes: usize,
    kernel: MatchKernel,
) -> Result<StitchJobResult, PipelineError> {
    let input: Vec<Record> = pairs.iter().map(ImagePair::to_record).collect();
    let plan = build_stitch_plan(workers, stripes, kernel);
    let trace = run_job_traced(&plan, input)?;

    let mut best_by_id: BTreeMap<String, MatchResult> = BTreeMap::new();
    for record in trace.stage(STAGE_SELECT_BEST).unwrap_or(&[]) {
        let candidate = record.value().split('\t').next().unwrap_or("");
        best_by_id.insert(record.key().to_string(), decode_candidate(candidate)?);
    }

    let output_records = trace.output().to_vec();
    let mut stitched = Vec::with_capacity(output_records.len());
    let mut metadata_records = Vec::with_capacity(output_records.len());
    for record in &output_records {
        let merged = Bitmap::deserialize(record.value())?;
        let best = *best_by_id
            .get(record.key())
            .ok_or_else(|| PipelineError::MalformedRecord {
                key: record.key().to_string(),
                reason: "no metadata for output record".into(),
            })?;
        metadata_records.push(
            Record::new(record.key(), encode_candidate(best))
                .expect("metadata text is separator-free"),
        );
        stitched.push(StitchedPair {
            pair_id: record.key().to_string(),
            output: StitchOutput { merged, best },
        });
    }

    Ok(StitchJobResult {
        stitched,
        input_records: trace.input,
        output_records,
        metadata_records,
    })
}
