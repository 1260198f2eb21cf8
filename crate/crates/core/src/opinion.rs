//! Binomial subjective-logic opinions and the two fusion operators used by
//! the trust engines.
//!
//! An [`Opinion`] is the quadruple `(belief, disbelief, uncertainty, base_rate)`
//! an agent holds about one binary proposition. Belief, disbelief and
//! uncertainty always sum to one. The projected probability `b + u·a` is the
//! scalar score the engines compare.
//!
//! * [`weighted_fusion`] merges the opinions of the agents evaluating one trust
//!   entity. Operands with lower uncertainty carry more weight.
//! * [`cumulative_fusion`] accumulates independent risk evidence. It is
//!   realised through the Dirichlet evidence view (`r = 2b/u`, `s = 2d/u`), so
//!   it is associative and commutative by construction.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Absolute tolerance for the additivity requirement and base-rate agreement.
pub const TOLERANCE: f64 = 1e-9;

/// Denominators or uncertainties below this value are treated as singular.
pub const SINGULAR_EPSILON: f64 = 1e-12;

/// Prior weight of the non-informative Dirichlet prior for a binary domain.
const PRIOR_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpinionError {
    #[error("opinion component {component} = {value} lies outside [0, 1]")]
    ComponentOutOfRange { component: &'static str, value: f64 },
    #[error("belief + disbelief + uncertainty = {sum}, expected 1")]
    AdditivityViolated { sum: f64 },
    #[error("fusion requires at least one opinion")]
    EmptyInput,
    #[error("cumulative fusion requires a shared base rate, found {expected} and {found}")]
    BaseRateMismatch { expected: f64, found: f64 },
    #[error("a dogmatic opinion (u = 0) has no finite evidence representation")]
    DogmaticOpinion,
    #[error("evidence must be finite and non-negative, got r = {positive}, s = {negative}")]
    InvalidEvidence { positive: f64, negative: f64 },
}

/// The proposition an opinion is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposition {
    /// The user performing the request is trustworthy.
    UserTrust,
    /// The device performing the request is trustworthy.
    DeviceTrust,
    /// The communication channel is trustworthy.
    ChannelTrust,
    /// Permitting the request will cause damage.
    RiskOfDamage,
}

/// A validated binomial opinion.
///
/// Disbelief is stored explicitly and checked against `1 - b - u` on
/// construction, so malformed triples are rejected instead of repaired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Opinion {
    #[serde(rename = "b")]
    belief: f64,
    #[serde(rename = "d")]
    disbelief: f64,
    #[serde(rename = "u")]
    uncertainty: f64,
    #[serde(rename = "a")]
    base_rate: f64,
}

#[derive(Deserialize)]
struct RawOpinion {
    b: f64,
    d: f64,
    u: f64,
    a: f64,
}

impl<'de> Deserialize<'de> for Opinion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawOpinion::deserialize(deserializer)?;
        Opinion::new(raw.b, raw.d, raw.u, raw.a).map_err(serde::de::Error::custom)
    }
}

fn check_unit(component: &'static str, value: f64) -> Result<(), OpinionError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(OpinionError::ComponentOutOfRange { component, value })
    }
}

impl Opinion {
    pub fn new(belief: f64, disbelief: f64, uncertainty: f64, base_rate: f64) -> Result<Self, OpinionError> {
        check_unit("belief", belief)?;
        check_unit("disbelief", disbelief)?;
        check_unit("uncertainty", uncertainty)?;
        check_unit("base_rate", base_rate)?;
        let sum = belief + disbelief + uncertainty;
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(OpinionError::AdditivityViolated { sum });
        }
        Ok(Self { belief, disbelief, uncertainty, base_rate })
    }

    /// Total-uncertainty opinion `{0, 0, 1, a}`.
    pub fn vacuous(base_rate: f64) -> Result<Self, OpinionError> {
        Self::new(0.0, 0.0, 1.0, base_rate)
    }

    /// Builds an opinion from fused components, absorbing rounding residue
    /// into the range checks.
    fn from_fused(belief: f64, uncertainty: f64, base_rate: f64) -> Self {
        let belief = belief.clamp(0.0, 1.0);
        let uncertainty = uncertainty.clamp(0.0, 1.0 - belief);
        let disbelief = (1.0 - belief - uncertainty).clamp(0.0, 1.0);
        Self { belief, disbelief, uncertainty, base_rate: base_rate.clamp(0.0, 1.0) }
    }

    pub fn belief(&self) -> f64 {
        self.belief
    }

    pub fn disbelief(&self) -> f64 {
        self.disbelief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    /// `P = b + u·a`.
    pub fn projected_probability(&self) -> f64 {
        self.belief + self.uncertainty * self.base_rate
    }

    pub fn is_dogmatic(&self) -> bool {
        self.uncertainty < SINGULAR_EPSILON
    }

    pub fn is_vacuous(&self) -> bool {
        1.0 - self.uncertainty < SINGULAR_EPSILON
    }

    /// Maps a non-dogmatic opinion to its Dirichlet evidence pair.
    pub fn to_evidence(&self) -> Result<EvidencePair, OpinionError> {
        if self.is_dogmatic() {
            return Err(OpinionError::DogmaticOpinion);
        }
        Ok(EvidencePair {
            positive: PRIOR_WEIGHT * self.belief / self.uncertainty,
            negative: PRIOR_WEIGHT * self.disbelief / self.uncertainty,
        })
    }

    /// Inverse of [`Opinion::to_evidence`].
    pub fn from_evidence(evidence: EvidencePair, base_rate: f64) -> Result<Self, OpinionError> {
        evidence.validate()?;
        check_unit("base_rate", base_rate)?;
        let total = evidence.positive + evidence.negative + PRIOR_WEIGHT;
        Ok(Self::from_fused(evidence.positive / total, PRIOR_WEIGHT / total, base_rate))
    }

    /// Component-wise comparison at the given absolute tolerance.
    pub fn approx_eq(&self, other: &Opinion, tolerance: f64) -> bool {
        (self.belief - other.belief).abs() <= tolerance
            && (self.disbelief - other.disbelief).abs() <= tolerance
            && (self.uncertainty - other.uncertainty).abs() <= tolerance
            && (self.base_rate - other.base_rate).abs() <= tolerance
    }
}

impl fmt::Display for Opinion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{b={:.4}, d={:.4}, u={:.4}, a={:.4}}}",
            self.belief, self.disbelief, self.uncertainty, self.base_rate
        )
    }
}

/// Positive (`r`) and negative (`s`) evidence counts behind an opinion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidencePair {
    #[serde(rename = "r")]
    pub positive: f64,
    #[serde(rename = "s")]
    pub negative: f64,
}

impl EvidencePair {
    pub fn new(positive: f64, negative: f64) -> Result<Self, OpinionError> {
        let pair = Self { positive, negative };
        pair.validate()?;
        Ok(pair)
    }

    fn validate(&self) -> Result<(), OpinionError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if ok(self.positive) && ok(self.negative) {
            Ok(())
        } else {
            Err(OpinionError::InvalidEvidence { positive: self.positive, negative: self.negative })
        }
    }
}

/// Incremental n-ary weighted belief fusion.
///
/// For non-dogmatic operands the fused opinion is
/// `b = Σ wᵢ bᵢ / Σ wᵢ`, `u = Σ (1 - uᵢ) / Σ wᵢ` with `wᵢ = (1 - uᵢ) / uᵢ`,
/// which is the product-form n-ary operator divided through by `Π uᵢ`.
/// The base rate is `Σ aᵢ (1 - uᵢ) / Σ (1 - uᵢ)`. Dogmatic operands take over
/// completely and are averaged; an all-vacuous input stays vacuous with the
/// mean base rate.
#[derive(Debug, Clone, Default)]
pub struct WeightedFusion {
    count: usize,
    first: Option<Opinion>,
    weight: f64,
    weighted_belief: f64,
    confidence: f64,
    weighted_base_rate: f64,
    base_rate_sum: f64,
    dogmatic: usize,
    dogmatic_belief: f64,
    dogmatic_disbelief: f64,
}

impl WeightedFusion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, opinion: &Opinion) {
        self.count += 1;
        self.first.get_or_insert(*opinion);
        self.base_rate_sum += opinion.base_rate;
        let confidence = 1.0 - opinion.uncertainty;
        self.confidence += confidence;
        self.weighted_base_rate += opinion.base_rate * confidence;
        if opinion.is_dogmatic() {
            self.dogmatic += 1;
            self.dogmatic_belief += opinion.belief;
            self.dogmatic_disbelief += opinion.disbelief;
        } else {
            let w = confidence / opinion.uncertainty;
            self.weight += w;
            self.weighted_belief += w * opinion.belief;
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn result(&self) -> Result<Opinion, OpinionError> {
        if self.count == 0 {
            return Err(OpinionError::EmptyInput);
        }
        if let (1, Some(only)) = (self.count, self.first) {
            return Ok(only);
        }
        if self.confidence < SINGULAR_EPSILON || (self.dogmatic == 0 && self.weight < SINGULAR_EPSILON) {
            return Opinion::vacuous(self.base_rate_sum / self.count as f64);
        }
        let base_rate = self.weighted_base_rate / self.confidence;
        if self.dogmatic > 0 {
            let k = self.dogmatic as f64;
            let belief = self.dogmatic_belief / k;
            let disbelief = self.dogmatic_disbelief / k;
            // Renormalise the averaged dogmatic mass so u stays exactly 0.
            let mass = belief + disbelief;
            return Ok(Opinion::from_fused(belief / mass, 0.0, base_rate));
        }
        let belief = self.weighted_belief / self.weight;
        let uncertainty = self.confidence / self.weight;
        Ok(Opinion::from_fused(belief, uncertainty, base_rate))
    }
}

/// Incremental cumulative fusion via evidence additivity.
///
/// All operands must share one base rate. Dogmatic operands dominate and are
/// averaged, which is the limit of the evidence view as `u → 0`.
#[derive(Debug, Clone, Default)]
pub struct CumulativeFusion {
    count: usize,
    first: Option<Opinion>,
    base_rate: Option<f64>,
    evidence: (f64, f64),
    dogmatic: usize,
    dogmatic_belief: f64,
    dogmatic_disbelief: f64,
}

impl CumulativeFusion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, opinion: &Opinion) -> Result<(), OpinionError> {
        match self.base_rate {
            Some(expected) if (expected - opinion.base_rate).abs() > TOLERANCE => {
                return Err(OpinionError::BaseRateMismatch { expected, found: opinion.base_rate });
            }
            Some(_) => {}
            None => self.base_rate = Some(opinion.base_rate),
        }
        self.count += 1;
        self.first.get_or_insert(*opinion);
        if opinion.is_dogmatic() {
            self.dogmatic += 1;
            self.dogmatic_belief += opinion.belief;
            self.dogmatic_disbelief += opinion.disbelief;
        } else {
            let ev = opinion.to_evidence()?;
            self.evidence.0 += ev.positive;
            self.evidence.1 += ev.negative;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn result(&self) -> Result<Opinion, OpinionError> {
        let base_rate = self.base_rate.ok_or(OpinionError::EmptyInput)?;
        if let (1, Some(only)) = (self.count, self.first) {
            return Ok(only);
        }
        if self.dogmatic > 0 {
            let k = self.dogmatic as f64;
            let belief = self.dogmatic_belief / k;
            let disbelief = self.dogmatic_disbelief / k;
            let mass = belief + disbelief;
            return Ok(Opinion::from_fused(belief / mass, 0.0, base_rate));
        }
        let (r, s) = self.evidence;
        Opinion::from_evidence(EvidencePair { positive: r, negative: s }, base_rate)
    }
}

/// Weighted belief fusion of a non-empty list of opinions.
pub fn weighted_fusion(opinions: &[Opinion]) -> Result<Opinion, OpinionError> {
    let mut acc = WeightedFusion::new();
    opinions.iter().for_each(|o| acc.push(o));
    acc.result()
}

/// Cumulative belief fusion of a non-empty list of opinions sharing one base rate.
pub fn cumulative_fusion(opinions: &[Opinion]) -> Result<Opinion, OpinionError> {
    let mut acc = CumulativeFusion::new();
    for o in opinions {
        acc.push(o)?;
    }
    acc.result()
}
