//! Record-level integration tests: the exact job-file wire format in and
//! out of the stitch plan, and cross-kernel behavior at realistic sizes.

mod common;

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mosaic_stitch::bitmap::Bitmap;
use mosaic_stitch::kernel::MatchKernel;
use mosaic_stitch::mapreduce::{format_records, parse_records, run_job, JobError};
use mosaic_stitch::pipeline::{
    best_overlap_with, build_stitch_plan, merge, new_space, run_stitch_job, ImagePair,
};

#[test]
fn job_file_text_round_trips_through_the_plan() {
    let img1_text = common::reference_image1().serialize().into_string();
    let img2_text = common::reference_image2().serialize().into_string();
    let job_text = format!("pair0\t{img1_text}\t{img2_text}\n");

    let input = parse_records(&job_text).unwrap();
    assert_eq!(input.len(), 1);
    assert_eq!(format_records(&input), job_text);

    let plan = build_stitch_plan(2, 3, MatchKernel::Naive);
    let output = run_job(&plan, input).unwrap();
    let merged_text = common::reference_merged().serialize().into_string();
    assert_eq!(format_records(&output), format!("pair0\t{merged_text}\n"));
}

#[test]
fn multi_pair_job_keeps_pairs_separate() {
    let mut rng = StdRng::seed_from_u64(33);
    let pairs: Vec<ImagePair> = (0..6)
        .map(|i| {
            let (w1, h1) = (rng.random_range(1..=10), rng.random_range(1..=10));
            let (w2, h2) = (rng.random_range(1..=10), rng.random_range(1..=10));
            ImagePair::new(
                common::random_bitmap(&mut rng, w1, h1, 0.35),
                common::random_bitmap(&mut rng, w2, h2, 0.35),
                format!("pair{i}"),
            )
            .unwrap()
        })
        .collect();

    let result = run_stitch_job(&pairs, 4, 3, MatchKernel::Packed).unwrap();
    assert_eq!(result.stitched.len(), pairs.len());
    for stitched in &result.stitched {
        let pair = pairs
            .iter()
            .find(|p| p.pair_id() == stitched.pair_id)
            .unwrap();
        // Each pair's merge has its own combined dimensions.
        assert_eq!(
            stitched.output.merged.width(),
            pair.image1().width() + pair.image2().width()
        );
        assert_eq!(
            stitched.output.merged.height(),
            pair.image1().height() + pair.image2().height()
        );
        // And its best equals a direct search on that pair alone.
        let space = new_space(pair);
        let direct = best_overlap_with(pair.image1(), &space, MatchKernel::Naive);
        assert_eq!(stitched.output.best, direct);
    }
}

#[test]
fn stripe_and_worker_sweep_is_deterministic_at_record_level() {
    let mut rng = StdRng::seed_from_u64(60);
    let pairs: Vec<ImagePair> = (0..5)
        .map(|i| {
            let (w1, h1) = (rng.random_range(1..=9), rng.random_range(1..=9));
            let (w2, h2) = (rng.random_range(1..=9), rng.random_range(1..=9));
            ImagePair::new(
                common::random_bitmap(&mut rng, w1, h1, 0.3),
                common::random_bitmap(&mut rng, w2, h2, 0.3),
                format!("pair{i}"),
            )
            .unwrap()
        })
        .collect();
    let input: Vec<_> = pairs.iter().map(|p| p.to_record()).collect();

    let baseline = format_records(
        &run_job(&build_stitch_plan(1, 1, MatchKernel::Naive), input.clone()).unwrap(),
    );
    for stripes in [2usize, 5, 11] {
        for workers in [2usize, 3] {
            for kernel in [MatchKernel::Naive, MatchKernel::Packed] {
                let out = run_job(&build_stitch_plan(workers, stripes, kernel), input.clone())
                    .unwrap();
                assert_eq!(
                    format_records(&out),
                    baseline,
                    "workers={workers} stripes={stripes} kernel={kernel}"
                );
            }
        }
    }
}

#[test]
fn malformed_image_text_in_job_file_fails_the_first_stage() {
    let job_text = "pairX\t255,0;255;\t255;\n";
    let input = parse_records(job_text).unwrap();
    let plan = build_stitch_plan(1, 1, MatchKernel::Naive);
    match run_job(&plan, input).unwrap_err() {
        JobError::StageFailure {
            stage_index, key, ..
        } => {
            assert_eq!(stage_index, 0);
            assert_eq!(key, "pairX");
        }
        other => panic!("unexpected error: {other:?}"),
    }
}

#[test]
fn packed_search_is_not_slower_than_naive_at_128() {
    let mut rng = StdRng::seed_from_u64(0xbead);
    let image1 = common::random_bitmap(&mut rng, 128, 128, 0.1);
    let image2 = common::random_bitmap(&mut rng, 128, 128, 0.1);
    let pair = ImagePair::new(image1, image2, "timing").unwrap();
    let space = new_space(&pair);

    let started = Instant::now();
    let naive = best_overlap_with(pair.image1(), &space, MatchKernel::Naive);
    let naive_time = started.elapsed();

    let started = Instant::now();
    let packed = best_overlap_with(pair.image1(), &space, MatchKernel::Packed);
    let packed_time = started.elapsed();

    assert_eq!(naive, packed);
    // The packed kernel does ~64 cells per word op; even heavy timer noise
    // cannot close that gap at this size.
    assert!(
        packed_time <= naive_time,
        "packed {packed_time:?} vs naive {naive_time:?}"
    );
}

#[test]
fn kernels_merge_identically_on_100_random_pairs() {
    let mut rng = StdRng::seed_from_u64(0xd1ce);
    for i in 0..100 {
        let (w1, h1) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let (w2, h2) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let image1 = common::random_bitmap(&mut rng, w1, h1, 0.25);
        let image2 = common::random_bitmap(&mut rng, w2, h2, 0.25);
        let pair = ImagePair::new(image1, image2, format!("p{i}")).unwrap();
        let space = new_space(&pair);

        let naive = best_overlap_with(pair.image1(), &space, MatchKernel::Naive);
        let packed = best_overlap_with(pair.image1(), &space, MatchKernel::Packed);
        assert_eq!(naive, packed, "pair {i}");
        assert_eq!(
            merge(pair.image1(), &space, naive),
            merge(pair.image1(), &space, packed),
            "pair {i}"
        );
    }
}

#[test]
fn blank_canvas_merges_to_the_padded_second_image() {
    // A pair with black only in image2: count 0, merge at (0,0) paints the
    // white frame over the top-left corner, leaving image2's content.
    let image1 = Bitmap::white(3, 3);
    let image2 = Bitmap::from_fn(2, 2, |r, c| r == 1 && c == 1);
    let pair = ImagePair::new(image1, image2, "blankish").unwrap();
    let result = run_stitch_job(&[pair], 1, 1, MatchKernel::Naive).unwrap();
    let output = &result.stitched[0].output;
    assert_eq!(output.best.count, 0);
    assert_eq!((output.best.at.row, output.best.at.col), (0, 0));
    assert_eq!(output.merged.black_count(), 1);
    assert!(output.merged.is_black(3 + 1, 3 + 1));
}
