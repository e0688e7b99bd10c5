//! Trust calculus.
//!
//! Every function here is pure: decay of past experience, time-weighted direct
//! trust with a reputation bonus, chain edge weights, SLA satisfaction, chain
//! and multi-chain recommended trust, the piecewise resolution of a trust
//! degree and its classification into the five trust levels.
//!
//! All quantities are `f64`. Where a result is mathematically a convex
//! combination of its inputs it is additionally clamped into the inputs'
//! envelope, so rounding can never push it outside `[min, max]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("trust degree {0} is outside [0, 1]")]
    DegreeOutOfRange(f64),
    #[error("decay exponent must be at least 1")]
    ZeroDecayExponent,
    #[error("decay time scale must be positive and finite, got {0}")]
    BadTimeScale(f64),
    #[error("current time {current} precedes last interaction time {last}")]
    ClockWentBackwards { current: f64, last: f64 },
    #[error("interaction history is empty")]
    EmptyHistory,
    #[error("interaction score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("interaction time {0} is not a finite non-negative number")]
    BadTimestamp(f64),
    #[error("reputation bonus {0} is outside [0, 0.1]")]
    BonusOutOfRange(f64),
    #[error("reputation bonuses must satisfy high >= medium >= low")]
    BonusNotMonotone,
    #[error("edge weight needs at least one interaction")]
    NoInteractions,
    #[error("{positive} positive interactions exceed the total of {total}")]
    PositiveExceedsTotal { positive: u64, total: u64 },
    #[error("{name} = {value} is outside [0, 1]")]
    MetricOutOfRange { name: &'static str, value: f64 },
    #[error("satisfaction weight {0} is negative or not finite")]
    NegativeWeight(f64),
    #[error("satisfaction weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("edge weight {0} is outside [0, 1]")]
    EdgeWeightOutOfRange(f64),
    #[error("chain edge from {0} to itself")]
    SelfEdge(String),
    #[error("chain has {len} edges, allowed range is 2..={max}")]
    ChainLength { len: usize, max: usize },
    #[error("chain is broken between {0} and {1}")]
    BrokenChain(String, String),
    #[error("chain visits {0} more than once")]
    RepeatedNode(String),
    #[error("all weights are zero")]
    ZeroWeights,
    #[error("no chain trusts to aggregate")]
    NoChains,
    #[error("evidence count {count} disagrees with presence of {kind} trust")]
    InconsistentEvidence { kind: &'static str, count: u64 },
}

pub type Result<T> = std::result::Result<T, TrustError>;

/// A trust degree in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
#[serde(transparent)]
pub struct TrustDegree(f64);

impl TrustDegree {
    pub const ZERO: TrustDegree = TrustDegree(0.0);
    pub const ONE: TrustDegree = TrustDegree(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(TrustDegree(value))
        } else {
            Err(TrustError::DegreeOutOfRange(value))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            TrustDegree(0.0)
        } else {
            TrustDegree(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for TrustDegree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        TrustDegree::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for TrustDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Parameters of the exponential forgetting factor
/// `exp(-((t_current - t_last) / tau)^k)`.
///
/// `tau = 1` gives the plain `exp(-dt^k)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDecay")]
pub struct DecayParams {
    k: u32,
    tau: f64,
}

#[derive(Deserialize)]
struct RawDecay {
    k: u32,
    tau: f64,
}

impl TryFrom<RawDecay> for DecayParams {
    type Error = TrustError;

    fn try_from(raw: RawDecay) -> Result<Self> {
        DecayParams::new(raw.k, raw.tau)
    }
}

impl DecayParams {
    pub fn new(k: u32, tau: f64) -> Result<Self> {
        if k == 0 {
            return Err(TrustError::ZeroDecayExponent);
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(TrustError::BadTimeScale(tau));
        }
        Ok(DecayParams { k, tau })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The exponent `(dt / tau)^k` for a non-negative gap.
    fn exponent(&self, gap: f64) -> f64 {
        (gap / self.tau).powi(self.k as i32)
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { k: 1, tau: 1.0 }
    }
}

/// One observed interaction outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    #[serde(rename = "t")]
    pub time: f64,
    pub score: f64,
    pub positive: bool,
}

impl InteractionRecord {
    pub fn new(time: f64, score: f64, positive: bool) -> Result<Self> {
        let record = InteractionRecord {
            time,
            score,
            positive,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(TrustError::BadTimestamp(self.time));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(TrustError::ScoreOutOfRange(self.score));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReputationGrade {
    Low,
    Medium,
    High,
}

/// Additive reputation bonus per grade. Defaults: high 0.10, medium 0.05, low 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBonuses")]
pub struct ReputationBonuses {
    high: f64,
    medium: f64,
    low: f64,
}

#[derive(Deserialize)]
struct RawBonuses {
    high: f64,
    medium: f64,
    low: f64,
}

impl TryFrom<RawBonuses> for ReputationBonuses {
    type Error = TrustError;

    fn try_from(raw: RawBonuses) -> Result<Self> {
        ReputationBonuses::new(raw.high, raw.medium, raw.low)
    }
}

impl ReputationBonuses {
    pub fn new(high: f64, medium: f64, low: f64) -> Result<Self> {
        for b in [high, medium, low] {
            if !(0.0..=0.1).contains(&b) {
                return Err(TrustError::BonusOutOfRange(b));
            }
        }
        if !(high >= medium && medium >= low) {
            return Err(TrustError::BonusNotMonotone);
        }
        Ok(ReputationBonuses { high, medium, low })
    }

    pub fn factor(&self, grade: ReputationGrade) -> ReputationFactor {
        let bonus = match grade {
            ReputationGrade::High => self.high,
            ReputationGrade::Medium => self.medium,
            ReputationGrade::Low => self.low,
        };
        ReputationFactor { grade, bonus }
    }
}

impl Default for ReputationBonuses {
    fn default() -> Self {
        ReputationBonuses {
            high: 0.10,
            medium: 0.05,
            low: 0.0,
        }
    }
}

/// A provider's reputation grade together with the bonus it earns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReputationFactor {
    pub grade: ReputationGrade,
    pub bonus: f64,
}

impl ReputationFactor {
    /// Low grade, no bonus.
    pub const NONE: ReputationFactor = ReputationFactor {
        grade: ReputationGrade::Low,
        bonus: 0.0,
    };
}

/// Observed service-level metrics, each normalised so that 1 is best.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaMetrics {
    pub availability: f64,
    pub processing_capacity: f64,
    pub recovery_time: f64,
    pub connectivity: f64,
    pub peak_load_performance: f64,
}

impl SlaMetrics {
    pub const NAMES: [&'static str; 5] = [
        "availability",
        "processing_capacity",
        "recovery_time",
        "connectivity",
        "peak_load_performance",
    ];

    pub fn uniform(value: f64) -> Self {
        SlaMetrics::from_array([value; 5])
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        SlaMetrics {
            availability: v[0],
            processing_capacity: v[1],
            recovery_time: v[2],
            connectivity: v[3],
            peak_load_performance: v[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.availability,
            self.processing_capacity,
            self.recovery_time,
            self.connectivity,
            self.peak_load_performance,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in Self::NAMES.iter().zip(self.to_array()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(TrustError::MetricOutOfRange { name, value });
            }
        }
        Ok(())
    }
}

/// Weights of the five SLA metrics in [`satisfaction_level`], in
/// [`SlaMetrics::NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SlaWeights([f64; 5]);

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl SlaWeights {
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        for w in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(TrustError::NegativeWeight(w));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(TrustError::WeightSum(sum));
        }
        Ok(SlaWeights(weights))
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }
}

impl Default for SlaWeights {
    fn default() -> Self {
        SlaWeights([0.2; 5])
    }
}

impl<'de> Deserialize<'de> for SlaWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[f64; 5]>::deserialize(d)?;
        SlaWeights::new(raw).map_err(serde::de::Error::custom)
    }
}

/// One hop of a trust chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEdge {
    from: String,
    to: String,
    weight: f64,
    direct_trust: TrustDegree,
}

impl ChainEdge {
    pub fn new(
        from: impl Into<String>,
        to: impl Into<String>,
        weight: f64,
        direct_trust: TrustDegree,
    ) -> Result<Self> {
        let (from, to) = (from.into(), to.into());
        if from == to {
            return Err(TrustError::SelfEdge(from));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(TrustError::EdgeWeightOutOfRange(weight));
        }
        Ok(ChainEdge {
            from,
            to,
            weight,
            direct_trust,
        })
    }

    pub fn from(&self) -> &str {
        &self.from
    }

    pub fn to(&self) -> &str {
        &self.to
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn direct_trust(&self) -> TrustDegree {
        self.direct_trust
    }
}

pub const DEFAULT_MAX_CHAIN_LENGTH: usize = 4;

/// A simple directed path of at least two edges.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustChain {
    edges: Vec<ChainEdge>,
}

impl TrustChain {
    pub fn new(edges: Vec<ChainEdge>, max_len: usize) -> Result<Self> {
        if edges.len() < 2 || edges.len() > max_len {
            return Err(TrustError::ChainLength {
                len: edges.len(),
                max: max_len,
            });
        }
        for pair in edges.windows(2) {
            if pair[0].to != pair[1].from {
                return Err(TrustError::BrokenChain(
                    pair[0].to.clone(),
                    pair[1].from.clone(),
                ));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(edges[0].from.as_str());
        for e in &edges {
            if !seen.insert(e.to.as_str()) {
                return Err(TrustError::RepeatedNode(e.to.clone()));
            }
        }
        Ok(TrustChain { edges })
    }

    pub fn edges(&self) -> &[ChainEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Node sequence from trustor to trustee.
    pub fn nodes(&self) -> Vec<&str> {
        let mut nodes = Vec::with_capacity(self.edges.len() + 1);
        nodes.push(self.edges[0].from.as_str());
        nodes.extend(self.edges.iter().map(|e| e.to.as_str()));
        nodes
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Trust levels, ordered from I to V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrustLevel {
    #[serde(rename = "I")]
    NoOpinion,
    #[serde(rename = "II")]
    LowDistrust,
    #[serde(rename = "III")]
    MediumTrust,
    #[serde(rename = "IV")]
    HighTrust,
    #[serde(rename = "V")]
    CompleteTrust,
}

impl TrustLevel {
    pub const ALL: [TrustLevel; 5] = [
        TrustLevel::NoOpinion,
        TrustLevel::LowDistrust,
        TrustLevel::MediumTrust,
        TrustLevel::HighTrust,
        TrustLevel::CompleteTrust,
    ];

    pub fn numeral(self) -> &'static str {
        match self {
            TrustLevel::NoOpinion => "I",
            TrustLevel::LowDistrust => "II",
            TrustLevel::MediumTrust => "III",
            TrustLevel::HighTrust => "IV",
            TrustLevel::CompleteTrust => "V",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrustLevel::NoOpinion => "No Opinion",
            TrustLevel::LowDistrust => "Low distrust",
            TrustLevel::MediumTrust => "Medium trust",
            TrustLevel::HighTrust => "High trust",
            TrustLevel::CompleteTrust => "Complete trust",
        }
    }

    pub fn from_numeral(s: &str) -> Option<Self> {
        TrustLevel::ALL.into_iter().find(|l| l.numeral() == s)
    }
}

impl fmt::Display for TrustLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.numeral())
    }
}

/// Forgetting factor for an interaction at `t_last` seen from `t_current`.
///
/// Very large gaps underflow to `0.0`; [`direct_trust`] works on the exponents
/// directly so it is unaffected.
pub fn decay_factor(t_current: f64, t_last: f64, params: DecayParams) -> Result<f64> {
    if t_current < t_last {
        return Err(TrustError::ClockWentBackwards {
            current: t_current,
            last: t_last,
        });
    }
    Ok((-params.exponent(t_current - t_last)).exp())
}

/// Decay-weighted mean of the history's scores plus the reputation bonus,
/// clamped to `[0, 1]`.
pub fn direct_trust(
    history: &[InteractionRecord],
    t_now: f64,
    params: DecayParams,
    rf: ReputationFactor,
) -> Result<TrustDegree> {
    if history.is_empty() {
        return Err(TrustError::EmptyHistory);
    }
    let mut exponents = Vec::with_capacity(history.len());
    for r in history {
        r.validate()?;
        if t_now < r.time {
            return Err(TrustError::ClockWentBackwards {
                current: t_now,
                last: r.time,
            });
        }
        exponents.push(params.exponent(t_now - r.time));
    }
    // Rescale by the largest weight so that old histories do not underflow.
    // The ratio is unchanged.
    let shift = exponents.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, x) in history.iter().zip(&exponents) {
        let w = (shift - x).exp();
        num += w * r.score;
        den += w;
        lo = lo.min(r.score);
        hi = hi.max(r.score);
    }
    let mean = (num / den).clamp(lo, hi);
    Ok(TrustDegree::clamped(mean + rf.bonus))
}

/// Weight of a chain edge: the positive fraction of interactions scaled by
/// satisfaction.
///
/// The ratio is formed first, so equal ratios such as 1/2 and 100/200 yield
/// bit-identical weights.
pub fn edge_weight(n_positive: u64, n_total: u64, sl: f64) -> Result<f64> {
    if n_total == 0 {
        return Err(TrustError::NoInteractions);
    }
    if n_positive > n_total {
        return Err(TrustError::PositiveExceedsTotal {
            positive: n_positive,
            total: n_total,
        });
    }
    if !(0.0..=1.0).contains(&sl) {
        return Err(TrustError::MetricOutOfRange {
            name: "satisfaction level",
            value: sl,
        });
    }
    let ratio = n_positive as f64 / n_total as f64;
    Ok((ratio * sl).clamp(0.0, 1.0))
}

/// Weighted mean of the five SLA metrics.
pub fn satisfaction_level(metrics: &SlaMetrics, weights: &SlaWeights) -> Result<f64> {
    metrics.validate()?;
    let values = metrics.to_array();
    let (mut num, mut den) = (0.0, 0.0);
    for (m, w) in values.iter().zip(weights.0) {
        num += w * m;
        den += w;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((num / den).clamp(lo, hi))
}

/// Recommended trust along one chain: edge direct trusts averaged by edge
/// weight.
pub fn chain_trust(chain: &TrustChain) -> Result<TrustDegree> {
    weighted_mean(
        chain
            .edges
            .iter()
            .map(|e| (e.direct_trust.value(), e.weight)),
    )
}

/// Combines per-chain recommended trusts, each weighted by its chain's total
/// edge weight.
pub fn aggregate_recommendations(chain_trusts: &[(TrustDegree, f64)]) -> Result<TrustDegree> {
    if chain_trusts.is_empty() {
        return Err(TrustError::NoChains);
    }
    for &(_, w) in chain_trusts {
        if !(w.is_finite() && w >= 0.0) {
            return Err(TrustError::NegativeWeight(w));
        }
    }
    weighted_mean(chain_trusts.iter().map(|&(td, w)| (td.value(), w)))
}

fn weighted_mean(items: impl Iterator<Item = (f64, f64)>) -> Result<TrustDegree> {
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (value, weight) in items {
        num += weight * value;
        den += weight;
        lo = lo.min(value);
        hi = hi.max(value);
    }
    if den <= 0.0 {
        return Err(TrustError::ZeroWeights);
    }
    Ok(TrustDegree::clamped((num / den).clamp(lo, hi)))
}

/// Which evidence a resolved trust degree came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionPath {
    Direct,
    Recommended,
    Ignorance,
}

impl ResolutionPath {
    pub fn as_str(self) -> &'static str {
        match self {
            ResolutionPath::Direct => "direct",
            ResolutionPath::Recommended => "recommended",
            ResolutionPath::Ignorance => "ignorance",
        }
    }
}

impl fmt::Display for ResolutionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub td: TrustDegree,
    pub path: ResolutionPath,
}

/// Picks the trust degree from the available evidence. Direct evidence wins
/// over recommendations; with neither the ignorance value 0 is used.
pub fn resolve_trust_degree(
    n_direct: u64,
    n_recommended: u64,
    direct: Option<TrustDegree>,
    recommended: Option<TrustDegree>,
) -> Result<Resolution> {
    if (n_direct > 0) != direct.is_some() {
        return Err(TrustError::InconsistentEvidence {
            kind: "direct",
            count: n_direct,
        });
    }
    if (n_recommended > 0) != recommended.is_some() {
        return Err(TrustError::InconsistentEvidence {
            kind: "recommended",
            count: n_recommended,
        });
    }
    Ok(match (direct, recommended) {
        (Some(td), _) => Resolution {
            td,
            path: ResolutionPath::Direct,
        },
        (None, Some(td)) => Resolution {
            td,
            path: ResolutionPath::Recommended,
        },
        (None, None) => Resolution {
            td: TrustDegree::ZERO,
            path: ResolutionPath::Ignorance,
        },
    })
}

pub fn classify_level(td: TrustDegree) -> TrustLevel {
    let v = td.value();
    if v == 0.0 {
        TrustLevel::NoOpinion
    } else if v < 0.5 {
        TrustLevel::LowDistrust
    } else if v == 0.5 {
        TrustLevel::MediumTrust
    } else if v < 1.0 {
        TrustLevel::HighTrust
    } else {
        TrustLevel::CompleteTrust
    }
}
