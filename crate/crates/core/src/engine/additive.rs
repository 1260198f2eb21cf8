//! Additive algorithm: one total trust score across all entities, compared
//! against a static value or the additively formed risk level.

use super::{
    AdditiveScores, Agent, Decision, EngineError, EngineInput, Outcome, RunningAggregate, Scores, ThresholdKind,
    ThresholdMode, ThresholdUsed, TraceStep, TrustAlgorithm,
};
use crate::attribute::AttributeEvaluation;
use crate::engine::Algorithm;

fn additive_sum(evals: &[AttributeEvaluation], want_trust: bool) -> Result<f64, EngineError> {
    evals.iter().try_fold(0.0, |acc, e| {
        if e.opinion.is_some() {
            return Err(EngineError::MixedCodomain(e.attribute_id.to_string()));
        }
        if e.category.is_trust() != want_trust {
            return Err(EngineError::AttributeSetMismatch(format!(
                "`{}` is a {} attribute",
                e.attribute_id, e.category
            )));
        }
        Ok(acc + e.contribution())
    })
}

/// `TS_total`: the sum of weights over met trust attributes (0 when empty).
pub fn additive_trust_score(evals: &[AttributeEvaluation]) -> Result<f64, EngineError> {
    additive_sum(evals, true)
}

/// `RL_total`: the sum of weights over met risk attributes (0 when empty).
pub fn additive_risk_level(evals: &[AttributeEvaluation]) -> Result<f64, EngineError> {
    additive_sum(evals, false)
}

/// Permit iff the trust score strictly exceeds the threshold.
pub fn additive_decide(ts: f64, rl: f64) -> Outcome {
    if ts > rl {
        Outcome::Permit
    } else {
        Outcome::Deny
    }
}

/// Stateless additive engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdditiveEngine;

fn evaluate(agent: &Agent<'_>) -> Result<AttributeEvaluation, EngineError> {
    Ok(match agent.value {
        Some(v) => agent.definition.evaluate_additive(v)?,
        None => agent.definition.evaluate_missing(),
    })
}

/// Evaluates agents in order, appending trace steps with the running sum.
fn run(agents: &[Agent<'_>], trace: &mut Vec<TraceStep>) -> Result<Vec<AttributeEvaluation>, EngineError> {
    let mut running = 0.0;
    agents
        .iter()
        .map(|agent| {
            let eval = evaluate(agent)?;
            running += eval.contribution();
            let (value, redacted) = agent.trace_value();
            trace.push(TraceStep {
                attribute_id: eval.attribute_id.clone(),
                category: eval.category,
                value,
                redacted,
                present: eval.present,
                matched: eval.matched,
                weight: eval.additive_weight,
                opinion: None,
                running: RunningAggregate::Sum(running),
            });
            Ok(eval)
        })
        .collect()
}

impl TrustAlgorithm for AdditiveEngine {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Additive
    }

    fn decide(&self, input: &EngineInput<'_>) -> Result<Decision, EngineError> {
        let mut trace = Vec::with_capacity(input.trust.len() + input.risk.len());
        let ts_total = additive_trust_score(&run(&input.trust, &mut trace)?)?;
        let (rl_total, threshold) = match input.threshold {
            ThresholdMode::Static(v) => (None, ThresholdUsed { mode: ThresholdKind::Static, value: v }),
            ThresholdMode::Dynamic => {
                let rl = additive_risk_level(&run(&input.risk, &mut trace)?)?;
                (Some(rl), ThresholdUsed { mode: ThresholdKind::Dynamic, value: rl })
            }
        };
        Ok(Decision {
            outcome: additive_decide(ts_total, threshold.value),
            algorithm: Algorithm::Additive,
            scores: Scores::Additive(AdditiveScores { ts_total, rl_total }),
            threshold,
            trace,
        })
    }
}
