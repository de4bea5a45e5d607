//! Field-interaction records and their fixed 18-column binary-word encoding.
//!
//! Input row layout (see [`INPUT_COLUMNS`]):
//!
//! | index  | column                                  |
//! |--------|-----------------------------------------|
//! | 0      | confidence (normalized)                 |
//! | 1..=3  | no-match word                           |
//! | 4..=6  | no-input word                           |
//! | 7..=9  | max-speech-timeout word                 |
//! | 10     | barge-in                                |
//! | 11     | caller disconnect                       |
//! | 12     | transfer to CSA                         |
//! | 13     | DTMF transfer                           |
//! | 14     | duration (normalized)                   |
//! | 15     | system error                            |
//! | 16..=17| confirmed word (presented, accepted)    |
//!
//! Targets are one-hot per output group in [`TargetLayout::standard`] order.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_file, Error, Result};

pub const INPUT_DIM: usize = 18;

/// Column offsets into an encoded input row.
pub mod col {
    pub const CONFIDENCE: usize = 0;
    pub const NO_MATCH: usize = 1;
    pub const NO_INPUT: usize = 4;
    pub const MAX_SPEECH_TIMEOUT: usize = 7;
    pub const BARGE_IN: usize = 10;
    pub const CALLER_DISCONNECT: usize = 11;
    pub const TRANSFER_TO_CSA: usize = 12;
    pub const DTMF_TRANSFER: usize = 13;
    pub const DURATION: usize = 14;
    pub const SYSTEM_ERROR: usize = 15;
    pub const CONFIRMED: usize = 16;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Bit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputColumn {
    pub name: &'static str,
    pub kind: ColumnKind,
}

const fn bit(name: &'static str) -> InputColumn {
    InputColumn {
        name,
        kind: ColumnKind::Bit,
    }
}

const fn cont(name: &'static str) -> InputColumn {
    InputColumn {
        name,
        kind: ColumnKind::Continuous,
    }
}

pub const INPUT_COLUMNS: [InputColumn; INPUT_DIM] = [
    cont("confidence"),
    bit("no_match_1"),
    bit("no_match_2"),
    bit("no_match_3"),
    bit("no_input_1"),
    bit("no_input_2"),
    bit("no_input_3"),
    bit("max_speech_timeout_1"),
    bit("max_speech_timeout_2"),
    bit("max_speech_timeout_3"),
    bit("barge_in"),
    bit("caller_disconnect"),
    bit("transfer_to_csa"),
    bit("dtmf_transfer"),
    cont("duration"),
    bit("system_error"),
    bit("confirmation_presented"),
    bit("confirmation_accepted"),
];

/// Start offsets of the three count words.
pub const COUNT_WORDS: [usize; 3] = [col::NO_MATCH, col::NO_INPUT, col::MAX_SPEECH_TIMEOUT];

/// Raw observation of one caller interaction at one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    /// Recognition confidence in percent.
    pub confidence: f64,
    pub no_match_count: u8,
    pub no_input_count: u8,
    pub max_speech_timeout_count: u8,
    pub barge_in: bool,
    pub caller_disconnect: bool,
    pub transfer_to_csa: bool,
    pub dtmf_transfer: bool,
    /// Seconds spent in the field.
    pub duration: f64,
    pub system_error: bool,
    pub confirmation_presented: bool,
    pub confirmation_accepted: bool,
}

impl FieldRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.confidence) {
            return Err(Error::domain(format!(
                "confidence {} outside [0, 100]",
                self.confidence
            )));
        }
        for (name, count) in [
            ("no_match_count", self.no_match_count),
            ("no_input_count", self.no_input_count),
            ("max_speech_timeout_count", self.max_speech_timeout_count),
        ] {
            if count > 3 {
                return Err(Error::domain(format!("{name} = {count} outside 0..=3")));
            }
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::domain(format!("duration {} must be >= 0", self.duration)));
        }
        if self.confirmation_accepted && !self.confirmation_presented {
            return Err(Error::domain(
                "confirmation accepted without a confirmation prompt",
            ));
        }
        Ok(())
    }

    /// Total no-match, no-input and max-speech-timeout events.
    pub fn difficulty_events(&self) -> u8 {
        self.no_match_count + self.no_input_count + self.max_speech_timeout_count
    }

    pub fn max_difficulty_count(&self) -> u8 {
        self.no_match_count
            .max(self.no_input_count)
            .max(self.max_speech_timeout_count)
    }
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }
    };
}

label_enum!(FieldPerformance {
    Good => "good",
    Acceptable => "acceptable",
    Investigate => "investigate",
    Bad => "bad",
});

label_enum!(
    /// Explanation attached to a transfer or a caller disconnect.
    Reason {
        Difficulty => "difficulty",
        NoTransfer => "no_transfer",
        Unknown => "unknown",
    }
);

label_enum!(DifficultyAttempt {
    Attempt1 => "attempt1",
    Attempt2 => "attempt2",
    Attempt3 => "attempt3",
});

label_enum!(Level {
    High => "high",
    Medium => "medium",
    Low => "low",
});

/// One value per output interaction class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionLabels {
    pub field_performance: FieldPerformance,
    pub transfer_reason: Reason,
    pub disconnect_reason: Reason,
    pub difficulty_attempt: DifficultyAttempt,
    pub duration_class: Level,
    pub recognition_level: Level,
    pub experienced_caller: bool,
}

/// Number of output groups in the standard layout.
pub const GROUP_COUNT: usize = 7;

impl InteractionLabels {
    /// Class index per group, in [`TargetLayout::standard`] order.
    pub fn class_indices(&self) -> [usize; GROUP_COUNT] {
        [
            self.field_performance.index(),
            self.transfer_reason.index(),
            self.disconnect_reason.index(),
            self.difficulty_attempt.index(),
            self.duration_class.index(),
            self.recognition_level.index(),
            if self.experienced_caller { 0 } else { 1 },
        ]
    }

    pub fn from_class_indices(idx: &[usize]) -> Result<Self> {
        if idx.len() != GROUP_COUNT {
            return Err(Error::data(format!(
                "expected {GROUP_COUNT} class indices, got {}",
                idx.len()
            )));
        }
        let bad = |g: usize| Error::data(format!("class index {} out of range for group {g}", idx[g]));
        Ok(Self {
            field_performance: FieldPerformance::from_index(idx[0]).ok_or_else(|| bad(0))?,
            transfer_reason: Reason::from_index(idx[1]).ok_or_else(|| bad(1))?,
            disconnect_reason: Reason::from_index(idx[2]).ok_or_else(|| bad(2))?,
            difficulty_attempt: DifficultyAttempt::from_index(idx[3]).ok_or_else(|| bad(3))?,
            duration_class: Level::from_index(idx[4]).ok_or_else(|| bad(4))?,
            recognition_level: Level::from_index(idx[5]).ok_or_else(|| bad(5))?,
            experienced_caller: match idx[6] {
                0 => true,
                1 => false,
                _ => return Err(bad(6)),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetGroup {
    pub name: String,
    pub classes: Vec<String>,
}

/// Ordered one-hot output groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetLayout {
    pub groups: Vec<TargetGroup>,
}

fn group(name: &str, classes: &[&str]) -> TargetGroup {
    TargetGroup {
        name: name.to_string(),
        classes: classes.iter().map(|c| c.to_string()).collect(),
    }
}

fn names<T: Copy>(all: &[T], f: fn(T) -> &'static str) -> Vec<&'static str> {
    all.iter().map(|v| f(*v)).collect()
}

impl TargetLayout {
    /// The seven field-classifier output groups (21 bits).
    pub fn standard() -> Self {
        Self {
            groups: vec![
                group("field_performance", &names(FieldPerformance::ALL, FieldPerformance::name)),
                group("transfer_reason", &names(Reason::ALL, Reason::name)),
                group("disconnect_reason", &names(Reason::ALL, Reason::name)),
                group("difficulty_attempt", &names(DifficultyAttempt::ALL, DifficultyAttempt::name)),
                group("duration_class", &names(Level::ALL, Level::name)),
                group("recognition_level", &names(Level::ALL, Level::name)),
                group("experienced_caller", &["true", "false"]),
            ],
        }
    }

    /// Layout from group sizes, with generated names. Handy for small fixtures.
    pub fn from_sizes(sizes: &[usize]) -> Self {
        Self {
            groups: sizes
                .iter()
                .enumerate()
                .map(|(g, &n)| TargetGroup {
                    name: format!("group{g}"),
                    classes: (0..n).map(|c| format!("class{c}")).collect(),
                })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.groups.iter().map(|g| g.classes.len()).sum()
    }

    /// `(offset, size)` of each group within a target row.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut offset = 0;
        self.groups
            .iter()
            .map(|g| {
                let span = (offset, g.classes.len());
                offset += g.classes.len();
                span
            })
            .collect()
    }

    pub fn encode(&self, class_indices: &[usize]) -> Result<Vec<f64>> {
        if class_indices.len() != self.groups.len() {
            return Err(Error::data("class index count does not match layout"));
        }
        let mut bits = vec![0.0; self.width()];
        for ((offset, size), &c) in self.spans().into_iter().zip(class_indices) {
            if c >= size {
                return Err(Error::data(format!("class {c} out of range (size {size})")));
            }
            bits[offset + c] = 1.0;
        }
        Ok(bits)
    }

    /// Argmax per group; ties go to the lowest class index.
    pub fn decode_argmax(&self, raw: &[f64]) -> Result<Vec<usize>> {
        if raw.len() != self.width() {
            return Err(Error::data(format!(
                "output width {} does not match layout width {}",
                raw.len(),
                self.width()
            )));
        }
        Ok(self
            .spans()
            .into_iter()
            .map(|(offset, size)| argmax(&raw[offset..offset + size]))
            .collect())
    }

    /// Decode an exactly one-hot target row.
    pub fn decode_one_hot(&self, bits: &[f64]) -> Result<Vec<usize>> {
        if bits.len() != self.width() {
            return Err(Error::data("target width does not match layout"));
        }
        self.spans()
            .into_iter()
            .map(|(offset, size)| {
                let group = &bits[offset..offset + size];
                let hot: Vec<usize> = (0..size).filter(|&i| group[i] == 1.0).collect();
                let clean = group.iter().all(|&b| b == 0.0 || b == 1.0);
                match (hot.as_slice(), clean) {
                    ([c], true) => Ok(*c),
                    _ => Err(Error::data(format!("target group {group:?} is not one-hot"))),
                }
            })
            .collect()
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Encoded classifier row: 18 inputs in `[0, 1]` plus one-hot targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl EncodedSample {
    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != INPUT_DIM {
            return Err(Error::data(format!(
                "expected {INPUT_DIM} inputs, got {}",
                self.inputs.len()
            )));
        }
        for (i, (v, column)) in self.inputs.iter().zip(INPUT_COLUMNS.iter()).enumerate() {
            let ok = match column.kind {
                ColumnKind::Continuous => (0.0..=1.0).contains(v),
                ColumnKind::Bit => *v == 0.0 || *v == 1.0,
            };
            if !ok {
                return Err(Error::data(format!("input {i} ({}) = {v} invalid", column.name)));
            }
        }
        for &start in &COUNT_WORDS {
            let word = &self.inputs[start..start + 3];
            if word[1] > word[0] || word[2] > word[1] {
                return Err(Error::data(format!("count word {word:?} is not a prefix")));
            }
        }
        TargetLayout::standard().decode_one_hot(&self.targets)?;
        Ok(())
    }
}

/// `count` leading ones in a 3-bit word.
pub fn encode_count_word(count: u8) -> Result<[f64; 3]> {
    if count > 3 {
        return Err(Error::domain(format!("event count {count} outside 0..=3")));
    }
    let mut word = [0.0; 3];
    for bit in word.iter_mut().take(count as usize) {
        *bit = 1.0;
    }
    Ok(word)
}

/// `[presented, accepted]`.
pub fn encode_confirmed(presented: bool, accepted: bool) -> Result<[f64; 2]> {
    if accepted && !presented {
        return Err(Error::domain(
            "confirmation accepted without a confirmation prompt",
        ));
    }
    Ok([bit_of(presented), bit_of(accepted)])
}

fn bit_of(flag: bool) -> f64 {
    if flag {
        1.0
    } else {
        0.0
    }
}

/// Min-max scaling into `[0, 1]`, clamping values outside `[min, max]`.
pub fn normalize(value: f64, min: f64, max: f64) -> Result<f64> {
    if !(min < max) {
        return Err(Error::domain(format!("normalization needs min < max, got [{min}, {max}]")));
    }
    Ok(((value - min) / (max - min)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        values.fold(None, |acc, v| match acc {
            None => Some(MinMax { min: v, max: v }),
            Some(m) => Some(MinMax {
                min: m.min.min(v),
                max: m.max.max(v),
            }),
        })
    }

    /// A constant column gets a unit-width range so `min < max` holds.
    fn widened(self) -> Self {
        if self.min < self.max {
            self
        } else {
            MinMax {
                min: self.min,
                max: self.min + 1.0,
            }
        }
    }
}

/// Ranges for the two continuous inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub confidence: MinMax,
    pub duration: MinMax,
}

impl NormParams {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("confidence", self.confidence), ("duration", self.duration)] {
            if !(m.min < m.max) {
                return Err(Error::data(format!("norm params for {name} need min < max")));
            }
        }
        Ok(())
    }

    /// Ranges observed over `records`.
    pub fn fit<'a>(records: impl Iterator<Item = &'a FieldRecord> + Clone) -> Result<Self> {
        let confidence = MinMax::of(records.clone().map(|r| r.confidence))
            .ok_or_else(|| Error::data("cannot fit normalization on an empty set"))?;
        let duration = MinMax::of(records.map(|r| r.duration)).unwrap();
        Ok(Self {
            confidence: confidence.widened(),
            duration: duration.widened(),
        })
    }
}

/// Encode one record in the fixed input layout plus one-hot standard targets.
pub fn encode_record(
    record: &FieldRecord,
    labels: &InteractionLabels,
    norm: &NormParams,
) -> Result<EncodedSample> {
    record.validate()?;
    let mut inputs = Vec::with_capacity(INPUT_DIM);
    inputs.push(normalize(record.confidence, norm.confidence.min, norm.confidence.max)?);
    inputs.extend(encode_count_word(record.no_match_count)?);
    inputs.extend(encode_count_word(record.no_input_count)?);
    inputs.extend(encode_count_word(record.max_speech_timeout_count)?);
    inputs.push(bit_of(record.barge_in));
    inputs.push(bit_of(record.caller_disconnect));
    inputs.push(bit_of(record.transfer_to_csa));
    inputs.push(bit_of(record.dtmf_transfer));
    inputs.push(normalize(record.duration, norm.duration.min, norm.duration.max)?);
    inputs.push(bit_of(record.system_error));
    inputs.extend(encode_confirmed(
        record.confirmation_presented,
        record.confirmation_accepted,
    )?);
    debug_assert_eq!(inputs.len(), INPUT_DIM);
    let targets = TargetLayout::standard().encode(&labels.class_indices())?;
    Ok(EncodedSample { inputs, targets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split '{other}'"))),
        }
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const DEFAULT: SplitFractions = SplitFractions {
        train: 0.6,
        validation: 0.2,
        test: 0.2,
    };

    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let f = Self {
            train,
            validation,
            test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::domain(format!("split fractions {parts:?} must be >= 0")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("split fractions {parts:?} must sum to 1")));
        }
        Ok(())
    }
}

/// A labelled record with its split tag and encoded form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub split: Split,
    pub record: FieldRecord,
    pub labels: InteractionLabels,
    #[serde(flatten)]
    pub sample: EncodedSample,
}

pub const DATASET_FORMAT: &str = "fisopt-dataset/1";

/// Encoded, split dataset. Normalization ranges come from the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub norm_params: NormParams,
    pub rows: Vec<Row>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    name: String,
    input_columns: Vec<String>,
    target_layout: TargetLayout,
    norm_params: NormParams,
    rows: Vec<Row>,
}

impl Dataset {
    /// Tag, normalize (on the training rows) and encode labelled records.
    pub fn from_records(
        name: impl Into<String>,
        records: Vec<(FieldRecord, InteractionLabels)>,
        splits: Vec<Split>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::domain("dataset is empty"));
        }
        if records.len() != splits.len() {
            return Err(Error::data("one split tag is required per record"));
        }
        for (record, _) in &records {
            record.validate()?;
        }
        let train = records
            .iter()
            .zip(&splits)
            .filter(|(_, s)| **s == Split::Train)
            .map(|((r, _), _)| r);
        let norm_params = NormParams::fit(train)
            .map_err(|_| Error::domain("the training split is empty; cannot fit normalization"))?;
        let rows = records
            .into_iter()
            .zip(splits)
            .map(|((record, labels), split)| {
                let sample = encode_record(&record, &labels, &norm_params)?;
                Ok(Row {
                    split,
                    record,
                    labels,
                    sample,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.into(),
            norm_params,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn split_rows(&self, split: Split) -> impl Iterator<Item = &Row> + '_ {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn samples(&self, split: Split) -> Vec<EncodedSample> {
        self.split_rows(split).map(|r| r.sample.clone()).collect()
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        Split::ALL.map(|s| self.split_rows(s).count())
    }

    /// Per-class counts of the field-performance label.
    pub fn performance_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for row in &self.rows {
            counts[row.labels.field_performance.index()] += 1;
        }
        counts
    }

    /// Check every dataset invariant, including that each stored encoding
    /// matches a fresh encoding of its record.
    pub fn validate(&self) -> Result<()> {
        self.norm_params.validate()?;
        for (i, row) in self.rows.iter().enumerate() {
            row.sample
                .validate()
                .map_err(|e| Error::data(format!("row {i}: {e}")))?;
            let fresh = encode_record(&row.record, &row.labels, &self.norm_params)?;
            if fresh != row.sample {
                return Err(Error::data(format!("row {i}: encoding does not match its record")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            format: DATASET_FORMAT.to_string(),
            name: self.name.clone(),
            input_columns: INPUT_COLUMNS.iter().map(|c| c.name.to_string()).collect(),
            target_layout: TargetLayout::standard(),
            norm_params: self.norm_params,
            rows: self.rows.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile =
            serde_json::from_str(text).map_err(|e| Error::data(format!("dataset json: {e}")))?;
        if file.format != DATASET_FORMAT {
            return Err(Error::data(format!("unsupported dataset format '{}'", file.format)));
        }
        let expected: Vec<&str> = INPUT_COLUMNS.iter().map(|c| c.name).collect();
        if file.input_columns != expected {
            return Err(Error::data("dataset input layout does not match this build"));
        }
        if file.target_layout != TargetLayout::standard() {
            return Err(Error::data("dataset target layout does not match this build"));
        }
        let dataset = Self {
            name: file.name,
            norm_params: file.norm_params,
            rows: file.rows,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json()?)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    /// One column per encoded input and target bit, plus the split tag.
    pub fn to_csv(&self) -> String {
        let layout = TargetLayout::standard();
        let mut out = String::new();
        out.push_str("split");
        for c in &INPUT_COLUMNS {
            out.push(',');
            out.push_str(c.name);
        }
        for g in &layout.groups {
            for class in &g.classes {
                let _ = write!(out, ",{}={}", g.name, class);
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(row.split.name());
            for v in row.sample.inputs.iter().chain(&row.sample.targets) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Re-split a dataset, stratified by field performance, and re-fit the
/// normalization on the new training rows.
pub fn split_dataset(dataset: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::domain("cannot split an empty dataset"));
    }
    let strata: Vec<usize> = dataset
        .rows
        .iter()
        .map(|r| r.labels.field_performance.index())
        .collect();
    let splits = stratified_split(&strata, fractions, seed)?;
    let records = dataset
        .rows
        .iter()
        .map(|r| (r.record.clone(), r.labels))
        .collect();
    Dataset::from_records(dataset.name.clone(), records, splits)
}

/// Split tags for items with the given stratum keys.
///
/// Each stratum is shuffled, its members are placed at evenly spaced
/// fractional positions `(k + 0.5) / n_stratum`, and the merged order is cut
/// at `round(n * train)` and `round(n * (train + validation))`. Global split
/// sizes are therefore exact and every stratum is spread proportionally.
pub fn stratified_split(strata: &[usize], fractions: SplitFractions, seed: u64) -> Result<Vec<Split>> {
    fractions.validate()?;
    if strata.is_empty() {
        return Err(Error::domain("cannot split an empty dataset"));
    }
    let n_strata = strata.iter().max().unwrap() + 1;
    let mut rng = crate::rng::stream(seed, 0);
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(strata.len());
    for s in 0..n_strata {
        let mut members: Vec<usize> = (0..strata.len()).filter(|&i| strata[i] == s).collect();
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        keyed.extend(
            members
                .into_iter()
                .enumerate()
                .map(|(k, item)| ((k as f64 + 0.5) / n, s, item)),
        );
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = strata.len() as f64;
    let n_train = (n * fractions.train).round() as usize;
    let n_train_val = ((n * (fractions.train + fractions.validation)).round() as usize).max(n_train);
    let mut tags = vec![Split::Test; strata.len()];
    for (pos, &(_, _, item)) in keyed.iter().enumerate() {
        tags[item] = if pos < n_train {
            Split::Train
        } else if pos < n_train_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(tags)
}
