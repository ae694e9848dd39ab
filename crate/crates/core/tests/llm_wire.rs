use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use vrag_core::llm::{
    prompt_hash, ClientConfig, HttpClient, LlmBackend, LlmRequest, MockBackend, MockBehavior,
    MockServer, ServerOptions,
};
use vrag_core::pipeline::{Pipeline, PipelineConfig, QueryInput};
use vrag_core::synthetic::{category_clusters, ClusterSpec};
use vrag_core::{EngineKind, StoreIndex, Taxonomy};

fn local() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

fn quick(url: String) -> ClientConfig {
    ClientConfig {
        timeout: Duration::from_secs(10),
        backoff: Duration::from_millis(10),
        ..ClientConfig::new(url)
    }
}

#[test]
fn round_trip_matches_in_process_mock() {
    let server = MockServer::spawn(
        local(),
        MockBehavior::EchoFirstContextSpecies,
        ServerOptions::default(),
    )
    .unwrap();
    let client = HttpClient::new(quick(server.url())).unwrap();
    let prompt = "Reference descriptions retrieved for this image, most similar first:\n\
                  [1] Opah (Opah): Round, deep body.\n\nWhat is the species of the fish?";
    let request = LlmRequest::new(prompt, Some("img/001.jpg".into()));
    let over_wire = client.generate(&request).unwrap();
    let local = MockBackend::new(MockBehavior::EchoFirstContextSpecies)
        .generate(&request)
        .unwrap();
    assert_eq!(over_wire, local);
    assert_eq!(over_wire.text, "The fish in the image is a Opah.");
    assert_eq!(client.retry_count(), 0);
    assert_eq!(server.requests_served(), 1);
}

#[test]
fn scripted_responses_and_protocol_errors() {
    let mut table = BTreeMap::new();
    table.insert(prompt_hash("known prompt"), "Tuna".to_string());
    let server = MockServer::spawn(
        local(),
        MockBehavior::Scripted(table),
        ServerOptions::default(),
    )
    .unwrap();
    let client = HttpClient::new(quick(server.url())).unwrap();
    assert_eq!(
        client
            .generate(&LlmRequest::new("known prompt", None))
            .unwrap()
            .text,
        "Tuna"
    );
    let err = client
        .generate(&LlmRequest::new("other prompt", None))
        .unwrap_err();
    assert_eq!(err.kind(), "ProtocolError");
    assert_eq!(client.retry_count(), 0, "4xx answers are not retried");
}

#[test]
fn empty_prompt_is_rejected_before_sending() {
    let server = MockServer::spawn(
        local(),
        MockBehavior::FixedText("x".into()),
        ServerOptions::default(),
    )
    .unwrap();
    let client = HttpClient::new(quick(server.url())).unwrap();
    let err = client.generate(&LlmRequest::new("   ", None)).unwrap_err();
    assert_eq!(err.kind(), "InvalidRequest");
    assert_eq!(server.requests_served(), 0);
}

#[test]
fn transient_failure_is_retried_once() {
    let options = ServerOptions {
        fail_first: 1,
        ..ServerOptions::default()
    };
    let server =
        MockServer::spawn(local(), MockBehavior::FixedText("Shark".into()), options).unwrap();
    let client = HttpClient::new(quick(server.url())).unwrap();
    let out = client.generate(&LlmRequest::new("q", None)).unwrap();
    assert_eq!(out.text, "Shark");
    assert_eq!(client.retry_count(), 1);
    assert_eq!(server.requests_served(), 2);
}

#[test]
fn retries_are_bounded() {
    let options = ServerOptions {
        fail_first: 10,
        ..ServerOptions::default()
    };
    let server =
        MockServer::spawn(local(), MockBehavior::FixedText("Shark".into()), options).unwrap();
    let client = HttpClient::new(ClientConfig {
        retries: 2,
        ..quick(server.url())
    })
    .unwrap();
    let err = client.generate(&LlmRequest::new("q", None)).unwrap_err();
    assert_eq!(err.kind(), "TransportError");
    assert_eq!(client.retry_count(), 2);
    assert_eq!(server.requests_served(), 3);
}

#[test]
fn slow_server_times_out() {
    let options = ServerOptions {
        delay: Some(Duration::from_millis(600)),
        ..ServerOptions::default()
    };
    let server =
        MockServer::spawn(local(), MockBehavior::FixedText("late".into()), options).unwrap();
    let client = HttpClient::new(ClientConfig {
        timeout: Duration::from_millis(100),
        retries: 1,
        ..quick(server.url())
    })
    .unwrap();
    let err = client.generate(&LlmRequest::new("q", None)).unwrap_err();
    assert_eq!(err.kind(), "Timeout");
    assert_eq!(client.retry_count(), 1);
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let port = std::net::TcpListener::bind(local())
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let client = HttpClient::new(ClientConfig {
        retries: 1,
        ..quick(format!("http://127.0.0.1:{port}"))
    })
    .unwrap();
    let err = client.generate(&LlmRequest::new("q", None)).unwrap_err();
    assert_eq!(err.kind(), "TransportError");
    assert_eq!(client.retry_count(), 1);
}

#[test]
fn batch_over_http_equals_in_process_batch() {
    let taxonomy = Taxonomy::default();
    let spec = ClusterSpec {
        per_class: 10,
        queries_per_class: 5,
        ..ClusterSpec::default()
    };
    let (entries, queries) = category_clusters(&taxonomy, &spec);
    let index = StoreIndex::build(entries, EngineKind::Exact).unwrap();
    let inputs: Vec<QueryInput> = queries
        .iter()
        .map(|q| QueryInput {
            embedding: &q.embedding,
            image_ref: Some(q.id.clone()),
        })
        .collect();

    let server = MockServer::spawn(
        local(),
        MockBehavior::EchoFirstContextSpecies,
        ServerOptions::default(),
    )
    .unwrap();
    let http = HttpClient::new(quick(server.url())).unwrap();
    let remote = Pipeline::new(&index, http, &taxonomy, PipelineConfig::default())
        .unwrap()
        .classify_batch(&inputs)
        .unwrap();
    let mock = MockBackend::new(MockBehavior::EchoFirstContextSpecies);
    let local = Pipeline::new(&index, mock, &taxonomy, PipelineConfig::default())
        .unwrap()
        .classify_batch(&inputs)
        .unwrap();
    assert_eq!(remote, local);
    assert_eq!(server.requests_served(), queries.len());
}
