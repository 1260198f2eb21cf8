//! The decision point and attribute store over mutual TLS.

mod common;

use common::*;
use std::sync::Arc;
use zts::client::PdpClient;
use zts::http::{ClientTransport, Endpoint};
use zts::service::PipAdmin;
use zts::tls::{self, DevPki};
use zts_core::engine::ThresholdMode;
use zts_core::pdp::ErrorCode;
use zts_core::policy::Selector;
use zts_core::{Algorithm, CacheMode, DecisionRequest, Outcome, Policy, Scores};

fn request(id: &str, resource: &str) -> DecisionRequest {
    let mut req = examples_seed().requests[0].clone();
    req.request_id = id.into();
    req.resource = resource.into();
    req
}

#[tokio::test]
async fn gitlab_example_over_mtls_with_network_store() {
    let stack = examples_stack().await;
    let mut pep = PdpClient::connect(&stack.endpoint(Some("pep")).unwrap()).await.unwrap();
    let resp = pep.decide(&request("g1", "gitlab")).await.unwrap();
    assert_eq!((resp.outcome, resp.error_code), (Outcome::Deny, None));
    let Some(Scores::Additive(s)) = resp.scores else { panic!("{resp:?}") };
    assert_eq!((s.ts_total, s.rl_total), (5.0, Some(10.0)));
    assert_eq!(stack.store.as_ref().unwrap().store().batches(), 1);

    let resp = pep.decide(&request("w1", "wiki")).await.unwrap();
    let Some(Scores::SubjectiveLogic(s)) = resp.scores else { panic!("{resp:?}") };
    assert!((s.p_user - 0.3).abs() < 1e-12 && (s.p_risk.unwrap() - 0.1).abs() < 1e-12);

    let resp = pep.decide(&request("n1", "payroll")).await.unwrap();
    assert_eq!((resp.outcome, resp.error_code), (Outcome::Deny, Some(ErrorCode::NoPolicy)));

    let malformed = pep.decide_raw(br#"{"request_id":"m1","user":"alice"}"#.to_vec().into()).await.unwrap();
    assert_eq!((malformed.outcome, malformed.error_code), (Outcome::Deny, Some(ErrorCode::MalformedRequest)));
}

#[tokio::test]
async fn clients_without_valid_certificates_are_rejected() {
    let stack = examples_stack().await;
    let anonymous = stack.endpoint(None).unwrap();
    let result = async { PdpClient::connect(&anonymous).await?.decide(&request("a1", "gitlab")).await }.await;
    assert!(result.is_err(), "anonymous client got {result:?}");

    let rogue = DevPki::generate().unwrap();
    let foreign = Endpoint {
        addr: stack.pdp_addr,
        transport: ClientTransport::tls(
            tls::client_config(&stack.pki.ca_pem, rogue.client("pep")).unwrap(),
            "localhost",
        )
        .unwrap(),
    };
    let result = async { PdpClient::connect(&foreign).await?.decide(&request("a2", "gitlab")).await }.await;
    assert!(result.is_err(), "foreign-CA client got {result:?}");
    assert_eq!(stack.pdp.audit().len(), 0, "no request reached the decision point");
}

#[tokio::test]
async fn policy_administration_requires_admin_role() {
    let stack = examples_stack().await;
    let policy = Policy {
        id: "payroll".into(),
        priority: 0,
        selector: Selector::new("*", "*", "payroll"),
        algorithm: Algorithm::Additive,
        trust_attribute_ids: vec!["user.authentication_factors".into()],
        risk_attribute_ids: vec![],
        threshold: ThresholdMode::Static(4.0),
    };
    let mut pep = PdpClient::connect(&stack.endpoint(Some("pep")).unwrap()).await.unwrap();
    assert!(pep.put_policy(&policy).await.unwrap_err().to_string().contains("403"));
    assert!(pep.pip_admin(&PipAdmin { mode: Some(CacheMode::Cold), flush: true }).await.is_err());
    assert!(pep.audit("g1").await.is_err());

    let mut admin = PdpClient::connect(&stack.endpoint(Some("admin")).unwrap()).await.unwrap();
    admin.put_policy(&policy).await.unwrap();
    assert!(admin.put_policy(&policy).await.unwrap_err().to_string().contains("409"));
    let resp = pep.decide(&request("p1", "payroll")).await.unwrap();
    assert_eq!(resp.outcome, Outcome::Permit, "5 > 4");
    let audit = admin.audit("p1").await.unwrap();
    assert_eq!(audit["policy_id"], "payroll");
    assert!(!audit.to_string().contains("1234"), "password never leaves the decision point");

    let bad = Policy { id: "bad".into(), trust_attribute_ids: vec!["user.shoe_size".into()], ..policy.clone() };
    assert!(admin.put_policy(&bad).await.unwrap_err().to_string().contains("422"));
    assert!(admin.delete_policy("payroll").await.unwrap());
    assert!(!admin.delete_policy("payroll").await.unwrap());
    let resp = pep.decide(&request("p2", "payroll")).await.unwrap();
    assert_eq!(resp.error_code, Some(ErrorCode::NoPolicy));
    assert_eq!(admin.list_policies().await.unwrap().len(), 3);
}

#[tokio::test]
async fn health_metrics_and_cache_administration() {
    let stack = examples_stack().await;
    let mut admin = PdpClient::connect(&stack.endpoint(Some("admin")).unwrap()).await.unwrap();
    let health = admin.health().await.unwrap();
    assert_eq!(health.status, "ok");
    assert_eq!(health.seed_hash.as_deref(), Some(examples_seed().digest().as_str()));
    let m = admin.metrics().await.unwrap();
    assert_eq!((m["decisions_total"], m["pip_round_trips"]), (0.0, 0.0));

    for i in 0..20 {
        admin.decide(&request(&format!("h{i}"), "gitlab")).await.unwrap();
    }
    let m = admin.metrics().await.unwrap();
    assert_eq!((m["decisions_total"], m["decisions_deny"], m["pip_round_trips"]), (20.0, 20.0, 1.0));

    let state = admin.pip_admin(&PipAdmin { mode: None, flush: true }).await.unwrap();
    assert_eq!((state.mode, state.cached_entries), (CacheMode::Warm, 0));
    admin.decide(&request("h-after-flush", "gitlab")).await.unwrap();
    assert_eq!(admin.metrics().await.unwrap()["pip_round_trips"], 2.0);

    admin.pip_admin(&PipAdmin { mode: Some(CacheMode::Cold), flush: false }).await.unwrap();
    for i in 0..5 {
        admin.decide(&request(&format!("c{i}"), "gitlab")).await.unwrap();
    }
    assert_eq!(admin.metrics().await.unwrap()["pip_round_trips"], 7.0, "cold: one batch per request");
}

#[tokio::test]
async fn concurrent_identical_requests_agree() {
    let stack = Arc::new(examples_stack().await);
    let mut tasks = Vec::new();
    for i in 0..16 {
        let endpoint = stack.endpoint(Some("pep")).unwrap();
        tasks.push(tokio::spawn(async move {
            let mut c = PdpClient::connect(&endpoint).await.unwrap();
            let resp = c.decide(&request(&format!("par{i}"), "wiki")).await.unwrap();
            (resp.outcome, resp.scores)
        }));
    }
    let mut results = Vec::new();
    for t in tasks {
        results.push(t.await.unwrap());
    }
    assert!(results.windows(2).all(|w| w[0] == w[1]));
}
