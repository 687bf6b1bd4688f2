use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use cosynth_core::boundary::RemotePredictor;
use cosynth_core::config::PredictorSelector;
use cosynth_core::fixture::FixtureServer;
use cosynth_core::gateway::{HttpBackend, HttpClient, MockSpec, RetryPolicy, SyntheticBackend};
use cosynth_core::{
    BoundaryPredictor, CompletionBackend, CompletionRequest, Engine, EndpointProfile, FinishReason,
    GatewayError, LexiconPredictor, SynthesisConfig, TokenKind,
};

fn server() -> FixtureServer {
    FixtureServer::start("127.0.0.1:0", MockSpec::default(), LexiconPredictor::default()).unwrap()
}

#[test]
fn completions_over_http_match_in_process_model() {
    let srv = server();
    let backend = HttpBackend::new(Arc::new(HttpClient::new(4)));
    let local = SyntheticBackend::new(MockSpec::default());
    let profile = EndpointProfile::new(&srv.base_url(), "student");
    for (prompt, max_tokens) in [("What is 2+2?\n<think>\n", 20), ("Q\n<think>\nwait so </think>", 50)] {
        let req = CompletionRequest::new(&profile, prompt.to_string(), max_tokens);
        let remote = backend.complete(&profile, &req).unwrap();
        assert_eq!(remote, local.complete(&profile, &req).unwrap());
    }
    assert_eq!(srv.stats().completions.load(Ordering::SeqCst), 2);
}

#[test]
fn label_protocol_round_trips() {
    let srv = server();
    let remote = RemotePredictor::new(Arc::new(HttpClient::new(2)), &srv.base_url());
    let local = LexiconPredictor::default();
    for text in ["Okay, let's compute gcd(a,b).", "Wait, hmm.", "数 so wait x"] {
        for target in [TokenKind::Style, TokenKind::Capability] {
            let r = remote.predict(text, target).unwrap();
            let l = local.predict(text, target).unwrap();
            assert_eq!(r, l, "{text:?} {target:?}");
        }
    }
    assert_eq!(
        remote.predict("Okay, let's compute x", TokenKind::Style).unwrap().keep_prefix_chars,
        "Okay, let's ".chars().count()
    );
}

#[test]
fn endpoint_errors_are_not_retried() {
    let srv = FixtureServer::start_with_faults("127.0.0.1:0", MockSpec::default(), LexiconPredictor::default(), 1)
        .unwrap();
    let backend = HttpBackend::new(Arc::new(HttpClient::new(1)));
    let profile = EndpointProfile::new(&srv.base_url(), "student");
    let req = CompletionRequest::new(&profile, "q".into(), 5);
    match backend.complete(&profile, &req) {
        Err(GatewayError::Endpoint { status: 503, body }) => assert!(body.contains("injected")),
        other => panic!("{other:?}"),
    }
    assert_eq!(srv.stats().completions.load(Ordering::SeqCst), 1);
    assert!(backend.complete(&profile, &req).is_ok());
}

#[test]
fn bad_requests_surface_status_and_body() {
    let srv = server();
    let client = HttpClient::new(1);
    let err = client
        .post_json(&format!("{}/v1/label", srv.base_url()), r#"{"text":"x","target":"tone"}"#)
        .unwrap_err();
    assert!(matches!(err, GatewayError::Endpoint { status: 400, ref body } if body.contains("tone")));
    let err = client
        .post_json(&format!("{}/v1/completions", srv.base_url()), "{}")
        .unwrap_err();
    assert!(matches!(err, GatewayError::Endpoint { status: 400, .. }));
}

#[test]
fn transport_failures_are_retried_then_reported() {
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = HttpClient::with_policy(
        1,
        RetryPolicy {
            max_retries: 2,
            base_delay: Duration::from_millis(1),
        },
    );
    let backend = HttpBackend::new(Arc::new(client));
    let profile = EndpointProfile::new(&format!("http://127.0.0.1:{port}"), "m");
    let err = backend
        .complete(&profile, &CompletionRequest::new(&profile, "q".into(), 1))
        .unwrap_err();
    assert!(err.is_retryable(), "{err:?}");
}

#[test]
fn finish_reason_mapping() {
    assert_eq!(FinishReason::from_wire("length"), FinishReason::Length);
    assert_eq!(FinishReason::from_wire("stop"), FinishReason::Stop);
    assert_eq!(FinishReason::from_wire("content_filter"), FinishReason::EndpointStop);
}

#[test]
fn engine_runs_tessy_over_http() {
    let srv = server();
    let mut config = SynthesisConfig::default();
    config.student = EndpointProfile::new(&srv.base_url(), "student");
    config.teacher = EndpointProfile::new(&srv.base_url(), "teacher");
    config.student_predictor = PredictorSelector::Remote { url: srv.base_url() };
    config.teacher_predictor = PredictorSelector::Remote { url: srv.base_url() };
    let http = Engine::from_config(config.clone()).unwrap();
    let record = http.synthesize_tessy("p1", "Compute gcd(12, 18).").unwrap();
    record.validate().unwrap();
    assert!(srv.stats().labels.load(Ordering::SeqCst) > 0);

    let mut offline = config;
    offline.mock = Some(MockSpec::default());
    offline.student_predictor = PredictorSelector::Lexicon;
    offline.teacher_predictor = PredictorSelector::Lexicon;
    let local = Engine::from_config(offline).unwrap().synthesize_tessy("p1", "Compute gcd(12, 18).").unwrap();
    assert_eq!(record.spans, local.spans);
    assert_eq!(record.terminated_by, local.terminated_by);
}
