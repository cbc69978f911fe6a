//! Minimal embedded map/reduce engine: keyed text records, mapper and
//! reducer stages, and an executor that runs each stage on a configurable
//! number of worker threads.
//!
//! Output is byte-identical for every worker count. Stages must be pure,
//! records are re-sorted into canonical (key, value) order at every stage
//! boundary, and values delivered to a reducer arrive grouped by key and
//! sorted lexicographically, so nothing observable depends on scheduling.
//!
//! Job files are plain UTF-8 text, one record per line, `key<TAB>value`.
//! A line is split at its first tab: keys may not contain tabs, values may
//! (stages use embedded tabs to carry multi-field payloads).

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("record key contains a tab character")]
    TabInKey,
    #[error("record key contains a newline")]
    NewlineInKey,
    #[error("record value contains a newline")]
    NewlineInValue,
    #[error("line {line}: expected key<TAB>value")]
    MissingSeparator { line: usize },
}

/// Error signalled by a stage function for one record or group.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct StageError(String);

impl StageError {
    pub fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("job plan has no stages")]
    EmptyPlan,
    #[error("stage {stage_index} ({stage_name}) failed on key {key:?}: {source}")]
    StageFailure {
        stage_index: usize,
        stage_name: String,
        key: String,
        source: StageError,
    },
}

/// A keyed text record. Keys are tab-free so the `key<TAB>value` line
/// format stays parseable; neither field may contain a newline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Record {
    key: String,
    value: String,
}

impl Record {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Result<Self, RecordError> {
        let key = key.into();
        let value = value.into();
        if key.contains('\t') {
            return Err(RecordError::TabInKey);
        }
        if key.contains('\n') {
            return Err(RecordError::NewlineInKey);
        }
        if value.contains('\n') {
            return Err(RecordError::NewlineInValue);
        }
        Ok(Self { key, value })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.key, self.value)
    }
}

/// Parses job-file text, one `key<TAB>value` record per line. Splits each
/// line at the first tab; the trailing newline after the last record is
/// optional.
pub fn parse_records(text: &str) -> Result<Vec<Record>, RecordError> {
    let mut records = Vec::new();
    for (idx, line) in text.split('\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('\t')
            .ok_or(RecordError::MissingSeparator { line: idx + 1 })?;
        records.push(Record::new(key, value).expect("line pieces cannot contain separators"));
    }
    Ok(records)
}

/// Formats records as job-file text, `key<TAB>value\n` per record.
pub fn format_records(records: &[Record]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&record.key);
        out.push('\t');
        out.push_str(&record.value);
        out.push('\n');
    }
    out
}

type MapperFn = dyn Fn(&Record) -> Result<Vec<Record>, StageError> + Send + Sync;
type ReducerFn = dyn Fn(&str, &[String]) -> Result<Vec<Record>, StageError> + Send + Sync;

/// Stateless record-to-records transformation.
pub struct MapperStage {
    name: String,
    func: Box<MapperFn>,
}

impl MapperStage {
    pub fn new(
        name: impl Into<String>,
        func: impl Fn(&Record) -> Result<Vec<Record>, StageError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            func: Box::new(func),
        }
    }
}

/// Transformation from a key and all of its values (lexicographically
/// sorted) to output records.
pub struct ReducerStage {
    name: String,
    func: Box<ReducerFn>,
}

impl ReducerStage {
    pub fn new(
        name: impl Into<String>,
        func: impl Fn(&str, &[String]) -> Result<Vec<Record>, StageError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            func: Box::new(func),
        }
    }
}

pub enum Stage {
    Map(MapperStage),
    Reduce(ReducerStage),
}

impl Stage {
    pub fn name(&self) -> &str {
        match self {
            Stage::Map(stage) => &stage.name,
            Stage::Reduce(stage) => &stage.name,
        }
    }
}

/// Ordered stages plus a worker count. Build with the `map`/`reduce`
/// chaining methods, then hand to [`run_job`].
pub struct JobPlan {
    stages: Vec<Stage>,
    worker_count: usize,
}

impl JobPlan {
    /// Creates an empty plan; `worker_count` is clamped up to 1.
    pub fn new(worker_count: usize) -> Self {
        Self {
            stages: Vec::new(),
            worker_count: worker_count.max(1),
        }
    }

    pub fn map(
        mut self,
        name: impl Into<String>,
        func: impl Fn(&Record) -> Result<Vec<Record>, StageError> + Send + Sync + 'static,
    ) -> Self {
        self.stages.push(Stage::Map(MapperStage::new(name, func)));
        self
    }

    pub fn reduce(
        mut self,
        name: impl Into<String>,
        func: impl Fn(&str, &[String]) -> Result<Vec<Record>, StageError> + Send + Sync + 'static,
    ) -> Self {
        self.stages
            .push(Stage::Reduce(ReducerStage::new(name, func)));
        self
    }

    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(Stage::name).collect()
    }
}

/// Groups records by key: one group per distinct key, groups sorted by
/// key, values within a group sorted lexicographically.
pub fn shuffle(records: Vec<Record>) -> Vec<(String, Vec<String>)> {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    let mut sorted = records;
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    for record in sorted {
        match groups.last_mut() {
            Some((key, values)) if *key == record.key => values.push(record.value),
            _ => groups.push((record.key, vec![record.value])),
        }
    }
    for (_, values) in &mut groups {
        values.sort();
    }
    groups
}

/// Output of every stage of a traced job run, canonically sorted.
pub struct StageTrace {
    pub name: String,
    pub records: Vec<Record>,
}

pub struct JobTrace {
    pub input: Vec<Record>,
    pub stages: Vec<StageTrace>,
}

impl JobTrace {
    /// Records produced by the final stage.
    pub fn output(&self) -> &[Record] {
        self.stages.last().map(|s| s.records.as_slice()).unwrap_or(&[])
    }

    pub fn into_output(mut self) -> Vec<Record> {
        self.stages.pop().map(|s| s.records).unwrap_or_default()
    }

    /// Output of the first stage with the given name.
    pub fn stage(&self, name: &str) -> Option<&[Record]> {
        self.stages
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.records.as_slice())
    }
}

/// Runs the plan's stages in order over the input and returns the final
/// records in canonical (key, value) order. Byte-identical output for
/// every `worker_count`; the first stage error (by input position) aborts
/// the job.
pub fn run_job(plan: &JobPlan, input: Vec<Record>) -> Result<Vec<Record>, JobError> {
    run_job_traced(plan, input).map(JobTrace::into_output)
}

/// Like [`run_job`] but keeps every stage's output, for callers that need
/// intermediate artifacts (sidecar metadata, stage dumps).
pub fn run_job_traced(plan: &JobPlan, input: Vec<Record>) -> Result<JobTrace, JobError> {
    if plan.stages.is_empty() {
        return Err(JobError::EmptyPlan);
    }
    let mut traces: Vec<StageTrace> = Vec::with_capacity(plan.stages.len());
    let mut current = input.clone();
    current.sort();
    for (stage_index, stage) in plan.stages.iter().enumerate() {
        let mut next = match stage {
            Stage::Map(mapper) => {
                let results = parallel_map_indexed(&current, plan.worker_count, |_, record| {
                    (mapper.func)(record).map_err(|err| (record.key.clone(), err))
                });
                collect_stage(results, stage_index, &mapper.name)?
            }
            Stage::Reduce(reducer) => {
                let groups = shuffle(std::mem::take(&mut current));
                let results = parallel_map_indexed(&groups, plan.worker_count, |_, (key, values)| {
                    (reducer.func)(key, values).map_err(|err| (key.clone(), err))
                });
                collect_stage(results, stage_index, &reducer.name)?
            }
        };
        next.sort();
        traces.push(StageTrace {
            name: stage.name().to_string(),
            records: next.clone(),
        });
        current = next;
    }
    let mut input = input;
    input.sort();
    Ok(JobTrace {
        input,
        stages: traces,
    })
}

/// Flattens per-item stage results, reporting the error of the earliest
/// failing item so diagnostics do not depend on worker scheduling.
fn collect_stage(
    results: Vec<Result<Vec<Record>, (String, StageError)>>,
    stage_index: usize,
    stage_name: &str,
) -> Result<Vec<Record>, JobError> {
    let mut records = Vec::new();
    for result in results {
        match result {
            Ok(out) => records.extend(out),
            Err((key, source)) => {
                return Err(JobError::StageFailure {
                    stage_index,
                    stage_name: stage_name.to_string(),
                    key,
                    source,
                })
            }
        }
    }
    Ok(records)
}

/// Applies `func` to every item, possibly on `workers` threads, and
/// returns results in input order. Items are claimed from a shared atomic
/// cursor, so the thread-to-item assignment varies but the output never
/// does.
pub(crate) fn parallel_map_indexed<T, U, F>(items: &[T], workers: usize, func: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    let workers = workers.min(items.len());
    if workers <= 1 {
        return items
            .iter()
            .enumerate()
            .map(|(idx, item)| func(idx, item))
            .collect();
    }

    let cursor = AtomicUsize::new(0);
    let mut indexed: Vec<(usize, U)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let idx = cursor.fetch_add(1, Ordering::Relaxed);
                        if idx >= items.len() {
                            break;
                        }
                        out.push((idx, func(idx, &items[idx])));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|handle| handle.join().expect("stage worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(idx, _)| *idx);
    indexed.into_iter().map(|(_, value)| value).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn rec(key: &str, value: &str) -> Record {
        Record::new(key, value).unwrap()
    }

    fn word_count_plan(workers: usize) -> JobPlan {
        JobPlan::new(workers)
            .map("split", |record: &Record| {
                Ok(record
                    .value()
                    .split_whitespace()
                    .map(|word| Record::new(word, "1").unwrap())
                    .collect())
            })
            .reduce("sum", |key, values| {
                let total: usize = values.iter().map(|v| v.parse::<usize>().unwrap()).sum();
                Ok(vec![Record::new(key, total.to_string()).unwrap()])
            })
    }

    #[test]
    fn record_rejects_separator_characters() {
        assert_eq!(Record::new("a\tb", "v"), Err(RecordError::TabInKey));
        assert_eq!(Record::new("a\nb", "v"), Err(RecordError::NewlineInKey));
        assert_eq!(Record::new("k", "a\nb"), Err(RecordError::NewlineInValue));
        // Tabs in values are the pipeline's multi-field separator.
        assert!(Record::new("k", "a\tb").is_ok());
    }

    #[test]
    fn identity_mapper_yields_canonical_order() {
        let plan = JobPlan::new(1).map("identity", |r: &Record| Ok(vec![r.clone()]));
        let out = run_job(&plan, vec![rec("k2", "v2"), rec("k1", "v1")]).unwrap();
        assert_eq!(out, vec![rec("k1", "v1"), rec("k2", "v2")]);
    }

    #[test]
    fn word_count_matches_sequential_oracle() {
        let input = vec![
            rec("doc1", "the quick brown fox jumps over the lazy dog"),
            rec("doc2", "the dog barks"),
            rec("doc3", "quick quick fox"),
        ];

        // Independent oracle: a plain loop over the same text.
        let mut expected: HashMap<String, usize> = HashMap::new();
        for record in &input {
            for word in record.value().split_whitespace() {
                *expected.entry(word.to_string()).or_default() += 1;
            }
        }

        let out = run_job(&word_count_plan(1), input).unwrap();
        assert_eq!(out.len(), expected.len());
        for record in out {
            assert_eq!(
                record.value().parse::<usize>().unwrap(),
                expected[record.key()],
                "count for {:?}",
                record.key()
            );
        }
    }

    #[test]
    fn output_identical_across_worker_counts() {
        let input: Vec<Record> = (0..40)
            .map(|i| rec(&format!("doc{i}"), &format!("w{} w{} w{}", i % 3, i % 5, i % 7)))
            .collect();
        let baseline = run_job(&word_count_plan(1), input.clone()).unwrap();
        for workers in [2, 4, 8] {
            let out = run_job(&word_count_plan(workers), input.clone()).unwrap();
            assert_eq!(out, baseline, "workers = {workers}");
        }
    }

    #[test]
    fn input_permutation_does_not_change_output() {
        let input = vec![rec("b", "x y"), rec("a", "y z"), rec("c", "z x")];
        let mut reversed = input.clone();
        reversed.reverse();
        let plan = word_count_plan(2);
        assert_eq!(
            run_job(&plan, input).unwrap(),
            run_job(&plan, reversed).unwrap()
        );
    }

    #[test]
    fn shuffle_groups_and_sorts() {
        let groups = shuffle(vec![rec("a", "2"), rec("b", "1"), rec("a", "1")]);
        assert_eq!(
            groups,
            vec![
                ("a".to_string(), vec!["1".to_string(), "2".to_string()]),
                ("b".to_string(), vec!["1".to_string()]),
            ]
        );
    }

    #[test]
    fn shuffle_empty_is_empty() {
        assert!(shuffle(Vec::new()).is_empty());
    }

    #[test]
    fn shuffle_matches_dictionary_oracle() {
        let mut records = Vec::new();
        for i in 0..1000usize {
            records.push(rec(&format!("k{}", i * 7919 % 23), &format!("v{}", i * 104729 % 97)));
        }

        let mut oracle: HashMap<String, Vec<String>> = HashMap::new();
        for record in &records {
            oracle
                .entry(record.key().to_string())
                .or_default()
                .push(record.value().to_string());
        }

        let groups = shuffle(records);
        assert_eq!(groups.len(), oracle.len());
        for (key, values) in &groups {
            let mut expected = oracle[key].clone();
            expected.sort();
            assert_eq!(values, &expected);
        }
        // Groups come out sorted by key.
        assert!(groups.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn stage_failure_reports_stage_and_key() {
        let plan = JobPlan::new(4)
            .map("ok", |r: &Record| Ok(vec![r.clone()]))
            .map("explode", |r: &Record| {
                if r.key() == "bad" {
                    Err(StageError::new("boom"))
                } else {
                    Ok(vec![r.clone()])
                }
            });
        let input = vec![rec("good", "1"), rec("bad", "2"), rec("worse", "3")];
        let err = run_job(&plan, input).unwrap_err();
        match err {
            JobError::StageFailure {
                stage_index,
                stage_name,
                key,
                ..
            } => {
                assert_eq!(stage_index, 1);
                assert_eq!(stage_name, "explode");
                assert_eq!(key, "bad");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn failure_reporting_is_deterministic_across_workers() {
        let plan_for = |workers| {
            JobPlan::new(workers).map("fail-some", |r: &Record| {
                if r.key().starts_with('f') {
                    Err(StageError::new(format!("failed {}", r.key())))
                } else {
                    Ok(vec![r.clone()])
                }
            })
        };
        let input: Vec<Record> = (0..32)
            .map(|i| rec(&format!("{}{i}", if i % 3 == 0 { "f" } else { "k" }), "v"))
            .collect();
        // Canonical input order puts f0 first among the failures.
        for workers in [1, 2, 8] {
            let err = run_job(&plan_for(workers), input.clone()).unwrap_err();
            match err {
                JobError::StageFailure { key, .. } => assert_eq!(key, "f0"),
                other => panic!("unexpected error: {other:?}"),
            }
        }
    }

    #[test]
    fn empty_plan_is_rejected() {
        let err = run_job(&JobPlan::new(1), vec![rec("k", "v")]).unwrap_err();
        assert!(matches!(err, JobError::EmptyPlan));
    }

    #[test]
    fn empty_input_yields_empty_output() {
        let out = run_job(&word_count_plan(3), Vec::new()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn traced_run_exposes_stage_outputs() {
        let trace = run_job_traced(&word_count_plan(2), vec![rec("d", "b a b")]).unwrap();
        assert_eq!(trace.stage("split").unwrap().len(), 3);
        assert_eq!(
            trace.stage("sum").unwrap(),
            &[rec("a", "1"), rec("b", "2")]
        );
        assert_eq!(trace.output(), trace.stage("sum").unwrap());
    }

    #[test]
    fn job_text_parses_and_formats() {
        let text = "k1\tv1\nk2\tleft\tright\n";
        let records = parse_records(text).unwrap();
        assert_eq!(records.len(), 2);
        // Only the first tab separates; the rest belongs to the value.
        assert_eq!(records[1].value(), "left\tright");
        assert_eq!(format_records(&records), text);
    }

    #[test]
    fn job_text_without_separator_is_rejected() {
        assert_eq!(
            parse_records("k1\tv1\nnope\n"),
            Err(RecordError::MissingSeparator { line: 2 })
        );
    }

    proptest! {
        #[test]
        fn shuffle_conserves_values(
            pairs in proptest::collection::vec(("[a-d]{1,2}", "[a-z]{0,3}"), 0..50)
        ) {
            let records: Vec<Record> = pairs
                .iter()
                .map(|(k, v)| Record::new(k.clone(), v.clone()).unwrap())
                .collect();
            let total = records.len();
            let groups = shuffle(records);
            let grouped: usize = groups.iter().map(|(_, vs)| vs.len()).sum();
            prop_assert_eq!(grouped, total);
            // No key appears twice.
            for window in groups.windows(2) {
                prop_assert!(window[0].0 < window[1].0);
            }
        }

        #[test]
        fn run_job_deterministic_for_random_input(
            pairs in proptest::collection::vec(("[a-c]{1}", "[a-z ]{0,12}"), 0..20)
        ) {
            let input: Vec<Record> = pairs
                .iter()
                .map(|(k, v)| Record::new(k.clone(), v.clone()).unwrap())
                .collect();
            let baseline = run_job(&word_count_plan(1), input.clone()).unwrap();
            let parallel = run_job(&word_count_plan(4), input).unwrap();
            prop_assert_eq!(baseline, parallel);
        }
    }
}
