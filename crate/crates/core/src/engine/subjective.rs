//! Subjective-logic algorithm: one fused opinion per trust entity (weighted
//! belief fusion) and a risk opinion (cumulative fusion). Every entity's
//! projected probability must exceed the threshold on its own, so a strong
//! entity cannot compensate for a weak one.

use super::{
    Agent, Decision, EngineError, EngineInput, Outcome, RunningAggregate, Scores, SlOpinions, SlScores, ThresholdKind,
    ThresholdMode, ThresholdUsed, TraceStep, TrustAlgorithm,
};
use crate::attribute::{Category, DEFAULT_BASE_RATE};
use crate::engine::Algorithm;
use crate::opinion::{cumulative_fusion, weighted_fusion, CumulativeFusion, Opinion, WeightedFusion};

/// Fuses one entity's agent opinions; returns the fused opinion and its
/// projected probability.
pub fn sl_entity_score(opinions: &[Opinion]) -> Result<(Opinion, f64), EngineError> {
    let fused = weighted_fusion(opinions)?;
    Ok((fused, fused.projected_probability()))
}

/// Fuses the risk agents' opinions about damage.
pub fn sl_risk_level(opinions: &[Opinion]) -> Result<(Opinion, f64), EngineError> {
    let fused = cumulative_fusion(opinions)?;
    Ok((fused, fused.projected_probability()))
}

/// Permit iff each entity probability strictly exceeds the risk probability.
pub fn sl_decide(p_user: f64, p_device: f64, p_channel: f64, p_risk: f64) -> Outcome {
    if p_user > p_risk && p_device > p_risk && p_channel > p_risk {
        Outcome::Permit
    } else {
        Outcome::Deny
    }
}

/// Stateless subjective-logic engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct SubjectiveLogicEngine;

const ENTITIES: [Category; 3] = [Category::User, Category::Device, Category::Channel];

fn entity_slot(category: Category) -> usize {
    match category {
        Category::User => 0,
        Category::Device => 1,
        Category::Channel => 2,
        Category::Risk => unreachable!("risk agents are fused separately"),
    }
}

fn agent_opinion(agent: &Agent<'_>) -> Result<(Opinion, bool, bool), EngineError> {
    let eval = match agent.value {
        Some(v) => agent.definition.evaluate(v)?,
        None => agent.definition.evaluate_missing(),
    };
    if eval.additive_weight.is_some() {
        return Err(EngineError::MixedCodomain(eval.attribute_id.to_string()));
    }
    let opinion = eval.opinion.ok_or_else(|| EngineError::MixedCodomain(eval.attribute_id.to_string()))?;
    Ok((opinion, eval.present, eval.matched))
}

fn step(agent: &Agent<'_>, opinion: Opinion, present: bool, matched: bool, running: Opinion) -> TraceStep {
    let (value, redacted) = agent.trace_value();
    TraceStep {
        attribute_id: agent.definition.id.clone(),
        category: agent.definition.category,
        value,
        redacted,
        present,
        matched,
        weight: None,
        opinion: Some(opinion),
        running: RunningAggregate::Opinion(running),
    }
}

impl TrustAlgorithm for SubjectiveLogicEngine {
    fn algorithm(&self) -> Algorithm {
        Algorithm::SubjectiveLogic
    }

    fn decide(&self, input: &EngineInput<'_>) -> Result<Decision, EngineError> {
        let mut trace = Vec::with_capacity(input.trust.len() + input.risk.len());
        let mut fusions: [WeightedFusion; 3] = Default::default();
        for agent in &input.trust {
            if !agent.definition.category.is_trust() {
                return Err(EngineError::AttributeSetMismatch(format!("`{}` is a risk attribute", agent.definition.id)));
            }
            let (opinion, present, matched) = agent_opinion(agent)?;
            let fusion = &mut fusions[entity_slot(agent.definition.category)];
            fusion.push(&opinion);
            trace.push(step(agent, opinion, present, matched, fusion.result()?));
        }

        let mut unevaluated = Vec::new();
        let mut fused = [Opinion::vacuous(DEFAULT_BASE_RATE)?; 3];
        for (slot, category) in ENTITIES.iter().enumerate() {
            if fusions[slot].is_empty() {
                unevaluated.push(*category);
            } else {
                fused[slot] = fusions[slot].result()?;
            }
        }
        let [user, device, channel] = fused;

        let (risk, threshold) = match input.threshold {
            ThresholdMode::Static(v) => (None, ThresholdUsed { mode: ThresholdKind::Static, value: v }),
            ThresholdMode::Dynamic => {
                let mut fusion = CumulativeFusion::new();
                for agent in &input.risk {
                    if agent.definition.category.is_trust() {
                        return Err(EngineError::AttributeSetMismatch(format!(
                            "`{}` is a trust attribute",
                            agent.definition.id
                        )));
                    }
                    let (opinion, present, matched) = agent_opinion(agent)?;
                    fusion.push(&opinion)?;
                    trace.push(step(agent, opinion, present, matched, fusion.result()?));
                }
                let risk = fusion.result()?;
                let p = risk.projected_probability();
                (Some(risk), ThresholdUsed { mode: ThresholdKind::Dynamic, value: p })
            }
        };

        let scores = SlScores {
            p_user: user.projected_probability(),
            p_device: device.projected_probability(),
            p_channel: channel.projected_probability(),
            p_risk: risk.map(|r| r.projected_probability()),
            opinions: SlOpinions { user, device, channel, risk },
            unevaluated,
        };
        Ok(Decision {
            outcome: sl_decide(scores.p_user, scores.p_device, scores.p_channel, threshold.value),
            algorithm: Algorithm::SubjectiveLogic,
            scores: Scores::SubjectiveLogic(scores),
            threshold,
            trace,
        })
    }
}
