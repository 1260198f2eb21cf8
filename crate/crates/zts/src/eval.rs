//! Single-shot evaluation: decide one request and print the decision with
//! its trace, human-readable and as JSON.

use crate::client::PdpClient;
use crate::harness::Target;
use anyhow::Result;
use bytes::Bytes;
use serde::Serialize;
use serde_json::Value as Json;
use std::fmt::Write as _;
use zts_core::{DecisionResponse, Pdp, Scores};

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub response: DecisionResponse,
    /// The audit record (response, policy id and trace), when one was kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<Json>,
}

impl EvalOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("output serializes")
    }
}

/// Decides `body` with an in-process decision point.
pub async fn eval_in_process(pdp: &Pdp, body: &[u8]) -> EvalOutput {
    let response = pdp.decide_json(body).await;
    let audit = pdp.audit().get(&response.request_id).and_then(|r| serde_json::to_value(&*r).ok());
    EvalOutput { response, audit }
}

/// Decides `body` at a remote decision point; the trace is read from its
/// audit endpoint (admin identity required).
pub async fn eval_remote(target: &Target, body: Bytes) -> Result<EvalOutput> {
    let response = PdpClient::connect(&target.pep).await?.decide_raw(body).await?;
    let audit = if response.request_id.is_empty() {
        None
    } else {
        PdpClient::connect(&target.admin).await?.audit(&response.request_id).await.ok()
    };
    Ok(EvalOutput { response, audit })
}

fn num(v: &Json) -> String {
    match v.as_f64() {
        Some(f) => format!("{f}"),
        None => v.to_string(),
    }
}

fn opinion(v: &Json) -> String {
    format!("{{b={}, d={}, u={}, a={}}}", num(&v["b"]), num(&v["d"]), num(&v["u"]), num(&v["a"]))
}

/// Human-readable rendering of a decision and its trace.
pub fn render_human(out: &EvalOutput) -> String {
    let r = &out.response;
    let mut s = String::new();
    let _ = writeln!(s, "request   {}", r.request_id);
    let _ = writeln!(s, "outcome   {}", r.outcome);
    if let Some(code) = r.error_code {
        let _ = writeln!(s, "error     {code}");
    }
    if let Some(policy) = out.audit.as_ref().and_then(|a| a.get("policy_id")).and_then(Json::as_str) {
        let _ = writeln!(s, "policy    {policy}");
    }
    if let Some(a) = r.algorithm {
        let _ = writeln!(s, "algorithm {a}");
    }
    if let Some(t) = &r.threshold {
        let mode = serde_json::to_value(t.mode).ok().and_then(|m| m.as_str().map(str::to_owned)).unwrap_or_default();
        let _ = writeln!(s, "threshold {mode} {}", t.value);
    }
    match &r.scores {
        Some(Scores::Additive(a)) => {
            let _ = write!(s, "scores    ts={}", a.ts_total);
            if let Some(rl) = a.rl_total {
                let _ = write!(s, " rl={rl}");
            }
            s.push('\n');
        }
        Some(Scores::SubjectiveLogic(sl)) => {
            let _ = write!(s, "scores    p_user={} p_device={} p_channel={}", sl.p_user, sl.p_device, sl.p_channel);
            if let Some(p) = sl.p_risk {
                let _ = write!(s, " p_risk={p}");
            }
            s.push('\n');
            if !sl.unevaluated.is_empty() {
                let names: Vec<String> = sl.unevaluated.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(s, "unevaluated {}", names.join(", "));
            }
        }
        None => {}
    }
    let t = &r.timings;
    let _ = writeln!(
        s,
        "timings   resolve={:.1}us fetch={:.1}us compute={:.1}us total={:.1}us",
        t.policy_resolve_us, t.attribute_fetch_us, t.engine_compute_us, t.total_us
    );
    if let Some(trace) = out.audit.as_ref().and_then(|a| a.pointer("/decision/trace")).and_then(Json::as_array) {
        let _ = writeln!(s, "trace     {} attributes", trace.len());
        for step in trace {
            let value = if step.get("redacted").and_then(Json::as_bool).unwrap_or(false) {
                "<redacted>".to_owned()
            } else if let Some(v) = step.get("value") {
                v.to_string()
            } else {
                "<missing>".to_owned()
            };
            let contribution = match (step.get("weight"), step.get("opinion")) {
                (Some(w), _) => format!("weight={}", num(w)),
                (None, Some(o)) => format!("opinion={}", opinion(o)),
                _ => String::new(),
            };
            let running = match step.get("running") {
                Some(o @ Json::Object(_)) => opinion(o),
                Some(v) => num(v),
                None => String::new(),
            };
            let _ = writeln!(
                s,
                "  {:<40} {:<8} value={value} matched={} {contribution} running={running}",
                step["attribute_id"].as_str().unwrap_or("?"),
                step["category"].as_str().unwrap_or("?"),
                step["matched"].as_bool().unwrap_or(false),
            );
        }
    }
    if let Some(detail) = out.audit.as_ref().and_then(|a| a.get("detail")).and_then(Json::as_str) {
        let _ = writeln!(s, "detail    {detail}");
    }
    s
}
