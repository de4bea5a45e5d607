//! Synthetic field-interaction datasets.
//!
//! Raw records are sampled from a per-field [`FieldProfile`] and labelled by
//! a first-match-wins [`LabelRuleSet`]. Both are plain JSON so experiments can
//! swap them; the shipped defaults live in `data/`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    Dataset, DifficultyAttempt, FieldPerformance, FieldRecord, InteractionLabels, Level, Reason,
    SplitFractions, GROUP_COUNT,
};
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    SayAccount,
    SayAmount,
    SelectBeneficiary,
    SayConfirmation,
}

impl FieldName {
    pub const ALL: [FieldName; 4] = [
        FieldName::SayAccount,
        FieldName::SayAmount,
        FieldName::SelectBeneficiary,
        FieldName::SayConfirmation,
    ];

    pub fn key(self) -> &'static str {
        match self {
            FieldName::SayAccount => "say_account",
            FieldName::SayAmount => "say_amount",
            FieldName::SelectBeneficiary => "select_beneficiary",
            FieldName::SayConfirmation => "say_confirmation",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            FieldName::SayAccount => "Say account",
            FieldName::SayAmount => "Say amount",
            FieldName::SelectBeneficiary => "Select beneficiary",
            FieldName::SayConfirmation => "Say confirmation",
        }
    }

    /// Shipped default profile for this field.
    pub fn default_profile(self) -> FieldProfile {
        let text = match self {
            FieldName::SayAccount => include_str!("../data/profiles/say_account.json"),
            FieldName::SayAmount => include_str!("../data/profiles/say_amount.json"),
            FieldName::SelectBeneficiary => include_str!("../data/profiles/select_beneficiary.json"),
            FieldName::SayConfirmation => include_str!("../data/profiles/say_confirmation.json"),
        };
        FieldProfile::from_json(text).expect("shipped profile is valid")
    }
}

impl std::str::FromStr for FieldName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldName::ALL
            .into_iter()
            .find(|f| f.key() == s || f.key().replace('_', "-") == s)
            .ok_or_else(|| Error::config(format!("unknown field '{s}'")))
    }
}

impl std::fmt::Display for FieldName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Truncated to `[0, 100]` when sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceDistribution {
    pub mean: f64,
    pub stddev: f64,
}

/// Per-event probabilities.
///
/// Count events are sequential: the first occurs with probability `rate`,
/// and each further attempt fails again with the same probability, up to 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRates {
    pub no_match: f64,
    pub no_input: f64,
    pub max_speech_timeout: f64,
    pub barge_in: f64,
    pub caller_disconnect: f64,
    pub dtmf_transfer: f64,
    pub system_error: f64,
    /// Probability of a confirmation prompt when confidence is below
    /// [`FieldProfile::confirmation_below`].
    pub confirmation: f64,
    /// Probability the caller accepts a presented confirmation.
    pub confirmation_accepted: f64,
}

impl EventRates {
    fn all(&self) -> [(&'static str, f64); 9] {
        [
            ("no_match", self.no_match),
            ("no_input", self.no_input),
            ("max_speech_timeout", self.max_speech_timeout),
            ("barge_in", self.barge_in),
            ("caller_disconnect", self.caller_disconnect),
            ("dtmf_transfer", self.dtmf_transfer),
            ("system_error", self.system_error),
            ("confirmation", self.confirmation),
            ("confirmation_accepted", self.confirmation_accepted),
        ]
    }
}

/// Caller behaviour at one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub field: FieldName,
    pub confidence: ConfidenceDistribution,
    /// Average field duration in seconds; also the reference for the
    /// duration rules.
    pub mean_duration: f64,
    /// Log-normal shape of the base duration.
    pub duration_spread: f64,
    /// Extra seconds added per recognition failure.
    pub seconds_per_event: f64,
    pub confirmation_below: f64,
    pub event_rates: EventRates,
    pub experienced_fraction: f64,
    /// Multiplier on difficulty, DTMF and disconnect rates for experienced callers.
    pub experienced_rate_scale: f64,
    pub experienced_barge_in: f64,
}

impl FieldProfile {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("profile rate {name} = {v} outside [0, 1]")))
            }
        };
        for (name, v) in self.event_rates.all() {
            unit(name, v)?;
        }
        unit("experienced_fraction", self.experienced_fraction)?;
        unit("experienced_rate_scale", self.experienced_rate_scale)?;
        unit("experienced_barge_in", self.experienced_barge_in)?;
        if !(self.mean_duration > 0.0) {
            return Err(Error::config("profile mean_duration must be > 0"));
        }
        if !(self.confidence.stddev > 0.0) || !(self.duration_spread > 0.0) {
            return Err(Error::config("profile spreads must be > 0"));
        }
        if !(self.seconds_per_event >= 0.0) {
            return Err(Error::config("profile seconds_per_event must be >= 0"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: FieldProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }
}

/// A sampled record plus the hidden caller trait that shaped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRecord {
    pub record: FieldRecord,
    pub experienced: bool,
}

const MAX_SAMPLE_ATTEMPTS: usize = 100;

/// Draw one call-flow-consistent record.
///
/// A third failure of any kind forces a transfer to an agent, as does a DTMF
/// transfer. Draws where the caller both disconnects and is transferred are
/// rejected and redrawn.
pub fn sample_record<R: Rng + ?Sized>(profile: &FieldProfile, rng: &mut R) -> Result<SampledRecord> {
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let candidate = draw_record(profile, rng);
        if candidate.record.caller_disconnect && candidate.record.transfer_to_csa {
            continue;
        }
        candidate.record.validate()?;
        return Ok(candidate);
    }
    Err(Error::Internal(format!(
        "no consistent record for profile {} after {MAX_SAMPLE_ATTEMPTS} attempts",
        profile.field
    )))
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

fn count_events<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u8 {
    let mut k = 0;
    while k < 3 && bernoulli(rng, rate) {
        k += 1;
    }
    k
}

fn draw_record<R: Rng + ?Sized>(profile: &FieldProfile, rng: &mut R) -> SampledRecord {
    let rates = &profile.event_rates;
    let experienced = bernoulli(rng, profile.experienced_fraction);
    let scale = if experienced {
        profile.experienced_rate_scale
    } else {
        1.0
    };

    let normal = Normal::new(profile.confidence.mean, profile.confidence.stddev).unwrap();
    let confidence = (0..64)
        .map(|_| normal.sample(rng))
        .find(|c| (0.0..=100.0).contains(c))
        .unwrap_or_else(|| profile.confidence.mean.clamp(0.0, 100.0));

    let no_match_count = count_events(rng, rates.no_match * scale);
    let no_input_count = count_events(rng, rates.no_input * scale);
    let max_speech_timeout_count = count_events(rng, rates.max_speech_timeout * scale);
    let barge_in = bernoulli(
        rng,
        if experienced {
            profile.experienced_barge_in
        } else {
            rates.barge_in
        },
    );
    let system_error = bernoulli(rng, rates.system_error);
    let dtmf_transfer = bernoulli(rng, rates.dtmf_transfer * scale);
    let three_strikes = no_match_count == 3 || no_input_count == 3 || max_speech_timeout_count == 3;
    let transfer_to_csa = three_strikes || dtmf_transfer;
    let caller_disconnect = bernoulli(rng, rates.caller_disconnect * scale);

    let confirmation_presented =
        confidence < profile.confirmation_below && bernoulli(rng, rates.confirmation);
    let confirmation_accepted = confirmation_presented && bernoulli(rng, rates.confirmation_accepted);

    // Log-normal with the profile mean.
    let sigma = profile.duration_spread;
    let mu = profile.mean_duration.ln() - 0.5 * sigma * sigma;
    let base = LogNormal::new(mu, sigma).unwrap().sample(rng);
    let events = f64::from(no_match_count + no_input_count + max_speech_timeout_count);
    let duration = base + profile.seconds_per_event * events;

    SampledRecord {
        record: FieldRecord {
            confidence,
            no_match_count,
            no_input_count,
            max_speech_timeout_count,
            barge_in,
            caller_disconnect,
            transfer_to_csa,
            dtmf_transfer,
            duration,
            system_error,
            confirmation_presented,
            confirmation_accepted,
        },
        experienced,
    }
}

/// Quantity a rule condition inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Confidence,
    NoMatchCount,
    NoInputCount,
    MaxSpeechTimeoutCount,
    /// Sum of the three count fields.
    DifficultyEvents,
    MaxDifficultyCount,
    BargeIn,
    CallerDisconnect,
    TransferToCsa,
    DtmfTransfer,
    Duration,
    /// Duration divided by the profile's mean duration.
    DurationRatio,
    SystemError,
    ConfirmationPresented,
    ConfirmationAccepted,
    Experienced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: Feature,
    pub op: Comparison,
    pub value: f64,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Condition {
    fn holds(&self, s: &SampledRecord, profile: &FieldProfile) -> bool {
        let r = &s.record;
        let x = match self.feature {
            Feature::Confidence => r.confidence,
            Feature::NoMatchCount => f64::from(r.no_match_count),
            Feature::NoInputCount => f64::from(r.no_input_count),
            Feature::MaxSpeechTimeoutCount => f64::from(r.max_speech_timeout_count),
            Feature::DifficultyEvents => f64::from(r.difficulty_events()),
            Feature::MaxDifficultyCount => f64::from(r.max_difficulty_count()),
            Feature::BargeIn => flag(r.barge_in),
            Feature::CallerDisconnect => flag(r.caller_disconnect),
            Feature::TransferToCsa => flag(r.transfer_to_csa),
            Feature::DtmfTransfer => flag(r.dtmf_transfer),
            Feature::Duration => r.duration,
            Feature::DurationRatio => r.duration / profile.mean_duration,
            Feature::SystemError => flag(r.system_error),
            Feature::ConfirmationPresented => flag(r.confirmation_presented),
            Feature::ConfirmationAccepted => flag(r.confirmation_accepted),
            Feature::Experienced => flag(s.experienced),
        };
        match self.op {
            Comparison::Eq => x == self.value,
            Comparison::Ne => x != self.value,
            Comparison::Lt => x < self.value,
            Comparison::Le => x <= self.value,
            Comparison::Gt => x > self.value,
            Comparison::Ge => x >= self.value,
        }
    }
}

/// Output group a rule list assigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputGroup {
    FieldPerformance,
    TransferReason,
    DisconnectReason,
    DifficultyAttempt,
    DurationClass,
    RecognitionLevel,
    ExperiencedCaller,
}

impl OutputGroup {
    pub const ALL: [OutputGroup; GROUP_COUNT] = [
        OutputGroup::FieldPerformance,
        OutputGroup::TransferReason,
        OutputGroup::DisconnectReason,
        OutputGroup::DifficultyAttempt,
        OutputGroup::DurationClass,
        OutputGroup::RecognitionLevel,
        OutputGroup::ExperiencedCaller,
    ];

    fn position(self) -> usize {
        Self::ALL.iter().position(|g| *g == self).unwrap()
    }

    fn class_index(self, name: &str) -> Option<usize> {
        let find = |names: Vec<&str>| names.iter().position(|n| *n == name);
        match self {
            OutputGroup::FieldPerformance => {
                find(FieldPerformance::ALL.iter().map(|v| v.name()).collect())
            }
            OutputGroup::TransferReason | OutputGroup::DisconnectReason => {
                find(Reason::ALL.iter().map(|v| v.name()).collect())
            }
            OutputGroup::DifficultyAttempt => {
                find(DifficultyAttempt::ALL.iter().map(|v| v.name()).collect())
            }
            OutputGroup::DurationClass | OutputGroup::RecognitionLevel => {
                find(Level::ALL.iter().map(|v| v.name()).collect())
            }
            OutputGroup::ExperiencedCaller => find(vec!["true", "false"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    /// All conditions must hold. An empty list always matches.
    #[serde(default)]
    pub when: Vec<Condition>,
    pub label: String,
    /// Rules not taken from a production rule book are marked synthetic.
    #[serde(default = "yes")]
    pub synthetic: bool,
    #[serde(default)]
    pub note: String,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleGroup {
    pub group: OutputGroup,
    pub rules: Vec<LabelRule>,
}

/// Validated first-match-wins rules, one list per output group, each ending
/// in an unconditional default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRuleSet", into = "RawRuleSet")]
pub struct LabelRuleSet {
    name: String,
    description: String,
    groups: Vec<RuleGroup>,
    /// Resolved class index for every rule, by group position.
    resolved: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawRuleSet {
    name: String,
    #[serde(default)]
    description: String,
    groups: Vec<RuleGroup>,
}

impl TryFrom<RawRuleSet> for LabelRuleSet {
    type Error = Error;

    fn try_from(raw: RawRuleSet) -> Result<Self> {
        let mut ordered: Vec<Option<RuleGroup>> = vec![None; GROUP_COUNT];
        for g in raw.groups {
            let slot = &mut ordered[g.group.position()];
            if slot.is_some() {
                return Err(Error::config(format!("rule group {:?} defined twice", g.group)));
            }
            *slot = Some(g);
        }
        let mut groups = Vec::with_capacity(GROUP_COUNT);
        let mut resolved = Vec::with_capacity(GROUP_COUNT);
        for (pos, slot) in ordered.into_iter().enumerate() {
            let g = slot.ok_or_else(|| {
                Error::config(format!("rule group {:?} missing", OutputGroup::ALL[pos]))
            })?;
            match g.rules.last() {
                Some(last) if last.when.is_empty() => {}
                _ => {
                    return Err(Error::config(format!(
                        "rule group {:?} must end with an unconditional default rule",
                        g.group
                    )))
                }
            }
            let classes = g
                .rules
                .iter()
                .map(|r| {
                    g.group.class_index(&r.label).ok_or_else(|| {
                        Error::config(format!("label '{}' is not a class of {:?}", r.label, g.group))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(g);
            resolved.push(classes);
        }
        Ok(Self {
            name: raw.name,
            description: raw.description,
            groups,
            resolved,
        })
    }
}

impl From<LabelRuleSet> for RawRuleSet {
    fn from(set: LabelRuleSet) -> Self {
        RawRuleSet {
            name: set.name,
            description: set.description,
            groups: set.groups,
        }
    }
}

impl LabelRuleSet {
    /// The shipped rule tables.
    pub fn default_rules() -> Self {
        Self::from_json(include_str!("../data/rules.json")).expect("shipped rules are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> &[RuleGroup] {
        &self.groups
    }
}

/// Apply the rule set. Pure: the same inputs always give the same labels.
pub fn label_record(
    sample: &SampledRecord,
    rules: &LabelRuleSet,
    profile: &FieldProfile,
) -> InteractionLabels {
    let mut classes = [0usize; GROUP_COUNT];
    for (pos, group) in rules.groups.iter().enumerate() {
        let hit = group
            .rules
            .iter()
            .position(|rule| rule.when.iter().all(|c| c.holds(sample, profile)))
            .expect("rule groups end with a default rule");
        classes[pos] = rules.resolved[pos][hit];
    }
    InteractionLabels::from_class_indices(&classes).expect("rule labels were validated")
}

/// Minimum dataset size accepted by [`generate_dataset`].
pub const MIN_SAMPLES: usize = 10;

/// Sample, label, split and encode `n` records with the default fractions.
pub fn generate_dataset(
    profile: &FieldProfile,
    rules: &LabelRuleSet,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    generate_dataset_with(profile, rules, n, seed, SplitFractions::DEFAULT)
}

/// Record `i` draws from its own stream of `seed`, so the output does not
/// depend on how many threads do the work.
pub fn generate_dataset_with(
    profile: &FieldProfile,
    rules: &LabelRuleSet,
    n: usize,
    seed: u64,
    fractions: SplitFractions,
) -> Result<Dataset> {
    if n < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    profile.validate()?;
    let records = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::stream(seed, i as u64 + 1);
            let sampled = sample_record(profile, &mut rng)?;
            let labels = label_record(&sampled, rules, profile);
            Ok((sampled.record, labels))
        })
        .collect::<Result<Vec<_>>>()?;
    let strata: Vec<usize> = records
        .iter()
        .map(|(_, l)| l.field_performance.index())
        .collect();
    let splits = crate::dataset::stratified_split(&strata, fractions, seed)?;
    Dataset::from_records(profile.field.key(), records, splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;

    fn quiet_profile() -> FieldProfile {
        let mut p = FieldName::SayAccount.default_profile();
        p.event_rates = EventRates {
            no_match: 0.0,
            no_input: 0.0,
            max_speech_timeout: 0.0,
            barge_in: 0.0,
            caller_disconnect: 0.0,
            dtmf_transfer: 0.0,
            system_error: 0.0,
            confirmation: 0.0,
            confirmation_accepted: 0.0,
        };
        p.experienced_fraction = 0.0;
        p
    }

    fn record(confidence: f64, duration: f64) -> SampledRecord {
        SampledRecord {
            record: FieldRecord {
                confidence,
                no_match_count: 0,
                no_input_count: 0,
                max_speech_timeout_count: 0,
                barge_in: false,
                caller_disconnect: false,
                transfer_to_csa: false,
                dtmf_transfer: false,
                duration,
                system_error: false,
                confirmation_presented: false,
                confirmation_accepted: false,
            },
            experienced: false,
        }
    }

    #[test]
    fn shipped_profiles_and_rules_load() {
        for f in FieldName::ALL {
            let p = f.default_profile();
            assert_eq!(p.field, f);
        }
        let rules = LabelRuleSet::default_rules();
        assert_eq!(rules.groups().len(), GROUP_COUNT);
        // Exactly one rule is not synthetic.
        let authored: usize = rules
            .groups()
            .iter()
            .flat_map(|g| &g.rules)
            .filter(|r| !r.synthetic)
            .count();
        assert_eq!(authored, 1);
    }

    #[test]
    fn silent_profile_gives_clean_records() {
        let p = quiet_profile();
        let mut rng = crate::rng::stream(1, 0);
        for _ in 0..200 {
            let s = sample_record(&p, &mut rng).unwrap();
            let r = s.record;
            assert_eq!(r.difficulty_events(), 0);
            assert!(!(r.barge_in || r.caller_disconnect || r.transfer_to_csa || r.dtmf_transfer));
            assert!(!(r.system_error || r.confirmation_presented || r.confirmation_accepted));
        }
    }

    #[test]
    fn certain_no_match_forces_transfer() {
        let mut p = quiet_profile();
        p.event_rates.no_match = 1.0;
        let mut rng = crate::rng::stream(2, 0);
        for _ in 0..100 {
            let r = sample_record(&p, &mut rng).unwrap().record;
            assert_eq!(r.no_match_count, 3);
            assert!(r.transfer_to_csa);
        }
    }

    #[test]
    fn first_event_frequency_matches_rate() {
        let mut p = quiet_profile();
        p.event_rates.no_input = 0.3;
        let mut rng = crate::rng::stream(3, 0);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| sample_record(&p, &mut rng).unwrap().record.no_input_count >= 1)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn impossible_profile_is_an_internal_error() {
        let mut p = quiet_profile();
        p.event_rates.caller_disconnect = 1.0;
        p.event_rates.dtmf_transfer = 1.0;
        let mut rng = crate::rng::stream(4, 0);
        assert!(matches!(sample_record(&p, &mut rng), Err(Error::Internal(_))));
    }

    #[test]
    fn worked_rule_gives_acceptable() {
        let p = FieldName::SayAccount.default_profile();
        let rules = LabelRuleSet::default_rules();
        let mut s = record(75.0, 0.8 * p.mean_duration);
        s.record.no_match_count = 1;
        let labels = label_record(&s, &rules, &p);
        assert_eq!(labels.field_performance, FieldPerformance::Acceptable);
        assert_eq!(labels.difficulty_attempt, DifficultyAttempt::Attempt2);
        assert_eq!(labels.recognition_level, Level::Medium);
    }

    #[test]
    fn worked_rule_boundaries() {
        let p = FieldName::SayAmount.default_profile();
        let rules = LabelRuleSet::default_rules();
        let perf = |s: &SampledRecord| label_record(s, &rules, &p).field_performance;
        // Upper bound of the confidence band is inclusive, lower bound exclusive.
        assert_eq!(perf(&record(80.0, 0.5 * p.mean_duration)), FieldPerformance::Acceptable);
        assert_ne!(perf(&record(70.0, 0.5 * p.mean_duration)), FieldPerformance::Acceptable);
        // Slower than average falls out of the rule.
        assert_ne!(perf(&record(75.0, 1.2 * p.mean_duration)), FieldPerformance::Acceptable);
        // A confirmation prompt does too.
        let mut s = record(75.0, 0.5 * p.mean_duration);
        s.record.confirmation_presented = true;
        assert_ne!(perf(&s), FieldPerformance::Acceptable);
    }

    #[test]
    fn system_error_is_bad() {
        let p = FieldName::SayAccount.default_profile();
        let rules = LabelRuleSet::default_rules();
        let mut s = record(95.0, 0.5 * p.mean_duration);
        s.record.system_error = true;
        assert_eq!(label_record(&s, &rules, &p).field_performance, FieldPerformance::Bad);
    }

    #[test]
    fn clean_fast_call_is_good() {
        let p = FieldName::SelectBeneficiary.default_profile();
        let rules = LabelRuleSet::default_rules();
        let labels = label_record(&record(92.0, 0.5 * p.mean_duration), &rules, &p);
        assert_eq!(labels.field_performance, FieldPerformance::Good);
        assert_eq!(labels.difficulty_attempt, DifficultyAttempt::Attempt1);
        assert_eq!(labels.transfer_reason, Reason::NoTransfer);
        assert_eq!(labels.duration_class, Level::Low);
        assert_eq!(labels.recognition_level, Level::High);
        assert!(!labels.experienced_caller);
    }

    #[test]
    fn labelling_is_pure() {
        let p = FieldName::SayConfirmation.default_profile();
        let rules = LabelRuleSet::default_rules();
        let mut rng = crate::rng::stream(9, 0);
        for _ in 0..100 {
            let s = sample_record(&p, &mut rng).unwrap();
            assert_eq!(label_record(&s, &rules, &p), label_record(&s, &rules, &p));
        }
    }

    #[test]
    fn rule_set_validation() {
        let missing_default = r#"{"name":"x","groups":[{"group":"field_performance","rules":[
            {"when":[{"feature":"confidence","op":"gt","value":50}],"label":"good"}]}]}"#;
        assert!(LabelRuleSet::from_json(missing_default).is_err());
        let bad_label = include_str!("../data/rules.json").replace("\"investigate\"", "\"meh\"");
        assert!(LabelRuleSet::from_json(&bad_label).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let p = FieldName::SayAccount.default_profile();
        let rules = LabelRuleSet::default_rules();
        let a = generate_dataset(&p, &rules, 10, 1).unwrap();
        let b = generate_dataset(&p, &rules, 10, 1).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(matches!(generate_dataset(&p, &rules, 9, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn generated_datasets_are_valid_and_balanced() {
        let rules = LabelRuleSet::default_rules();
        for field in FieldName::ALL {
            let p = field.default_profile();
            let ds = generate_dataset(&p, &rules, 2000, 17).unwrap();
            assert_eq!(ds.len(), 2000);
            ds.validate().unwrap();
            assert_eq!(ds.split_sizes(), [1200, 400, 400]);
            for row in &ds.rows {
                let r = &row.record;
                if r.max_difficulty_count() == 3 {
                    assert!(r.transfer_to_csa);
                }
            }
            let counts = ds.performance_counts();
            for (class, &c) in counts.iter().enumerate() {
                assert!(c as f64 / 2000.0 >= 0.02, "{field}: class {class} has {c} rows ({counts:?})");
            }
            assert!(ds.split_rows(Split::Train).count() > 0);
        }
    }
}
