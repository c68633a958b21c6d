use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use arppf_core::datasets::{generate, DatasetKind, DatasetSpec};
use arppf_core::query::{run_query, QueryMode, QueryOptions, QueryParams};
use arppf_core::store::Store;
use arppf_core::{rppf_filter, BucketGrid, Series};
use arppf_service::{router, ServiceConfig};

struct App {
    _dir: tempfile::TempDir,
    store: Arc<Store>,
    router: Router,
}

fn app() -> App {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let router = router(store.clone(), &ServiceConfig::default());
    App {
        _dir: dir,
        store,
        router,
    }
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = format!("{}/schemas/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&raw).unwrap()
}

#[track_caller]
fn assert_valid(name: &str, body: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(body).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{body}");
}

async fn send(app: &App, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.router.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    if !status.is_success() {
        assert_valid("error", &body);
    }
    (status, body)
}

async fn get(app: &App, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn ingest(app: &App, id: &str, csv: impl Into<String>) -> (StatusCode, Value) {
    let req = Request::post(format!("/api/series/{id}/ingest"))
        .header(header::CONTENT_TYPE, "text/csv")
        .body(Body::from(csv.into()))
        .unwrap();
    send(app, req).await
}

async fn preprocess(app: &App, id: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(format!("/api/series/{id}/preprocess"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

fn csv_of(series: &Series) -> String {
    let mut out = String::from("t,v\n");
    for p in series.iter() {
        out.push_str(&format!("{},{}\n", p.t, p.v));
    }
    out
}

async fn with_linear(app: &App, n: usize) -> Series {
    let series = generate(&DatasetSpec::new(DatasetKind::Linear, n, 42)).unwrap();
    let (status, body) = ingest(app, "linear", csv_of(&series)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["ingested"], n);
    series
}

#[tokio::test]
async fn catalog_listing() {
    let app = app();
    let (status, body) = get(&app, "/api/series").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
    assert_valid("series_list", &body);

    ingest(&app, "a", "t,v\n0,1\n1,2\n2,3\n").await;
    let (_, body) = get(&app, "/api/series").await;
    assert_valid("series_list", &body);
    assert_eq!(body.as_array().unwrap().len(), 1);
    assert_eq!(body[0]["series_id"], "a");
    assert_eq!(body[0]["raw_count"], 3);
    assert_eq!(body[0]["segment_count"], 0);
    assert_eq!(body[0]["preprocess_config"], Value::Null);
}

#[tokio::test]
async fn ingestion_contract() {
    let app = app();
    let (status, body) = ingest(&app, "s", "t,v\n0,1\n1,2\n").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"ingested": 2}));
    assert_valid("ingest_response", &body);

    let (status, body) = ingest(&app, "h", "t,v\n").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"ingested": 0}));

    let (status, body) = ingest(&app, "n", "t,v\n0,1\n1,NaN\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed-csv");
    assert_eq!(body["detail"]["row"], 3);

    let (status, body) = ingest(&app, "s", "t,v\n0.5,1\n").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "out-of-order");
    assert_eq!(body["detail"]["row"], 2);

    let (status, body) = ingest(&app, "s", "time,value\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed-csv");

    let (status, body) = ingest(&app, "..", "t,v\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid-series-id");
}

#[tokio::test]
async fn preprocess_contract() {
    let app = app();
    with_linear(&app, 100_000).await;

    let (status, report) = preprocess(&app, "linear", json!({"t_pre": 1, "passes": 1, "n_v": 100})).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    assert_valid("preprocess_report", &report);
    assert!(report["retained_total"].as_u64().unwrap() <= 30_000);
    assert_eq!(report["raw_total"], 100_000);
    assert_eq!(report["segment_count"], 300);

    let (_, list) = get(&app, "/api/series").await;
    assert_valid("series_list", &list);
    assert_eq!(list[0]["segment_count"], 300);
    assert_eq!(list[0]["preprocess_config"]["t_pre"], 1.0);

    for bad in [
        json!({"t_pre": 1, "passes": 0, "n_v": 100}),
        json!({"t_pre": 1, "passes": 1, "n_v": 0}),
        json!({"t_pre": 0, "passes": 1, "n_v": 10}),
        json!({"t_pre": 1, "passes": -1, "n_v": 10}),
        json!({"t_pre": 1}),
    ] {
        let (status, body) = preprocess(&app, "linear", bad.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert_eq!(body["code"], "invalid-parameters");
    }

    let (status, body) = preprocess(&app, "nope", json!({"t_pre": 1, "passes": 1, "n_v": 10})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown-series");

    ingest(&app, "empty", "t,v\n").await;
    let (status, body) = preprocess(&app, "empty", json!({"t_pre": 1, "passes": 1, "n_v": 10})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "no-data");
}

#[tokio::test]
async fn points_contract() {
    let app = app();
    let series = with_linear(&app, 100_000).await;

    // Not preprocessed yet.
    let (status, body) = get(&app, "/api/series/linear/points?from=0&to=300&mode=preprocessed").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "no-segments");

    preprocess(&app, "linear", json!({"t_pre": 1, "passes": 1, "n_v": 100})).await;

    let (status, full) = get(&app, "/api/series/linear/points?from=0&to=300&buckets_t=300&buckets_v=100").await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("points_response", &full);
    let meta = &full["meta"];
    assert_eq!(meta["path"], "preprocessed");
    assert!(meta["points_fetched"].as_u64().unwrap() <= 30_000);
    assert_eq!(meta["points_returned"].as_u64().unwrap() as usize, full["points"].as_array().unwrap().len());
    assert!(meta["points_returned"].as_u64().unwrap() <= 300 * 100);

    // Meta truthfulness: the bound is the query module's bound.
    let direct = run_query(&app.store, &QueryParams::new("linear", 0.0, 300.0), &QueryOptions::default()).unwrap();
    assert_eq!(meta["distance_bound"].as_f64().unwrap(), direct.meta.distance_bound);
    assert_eq!(meta["points_fetched"].as_u64().unwrap() as usize, direct.meta.points_fetched);

    // Raw mode returns exactly what a direct filter over the range keeps.
    let (status, raw) = get(&app, "/api/series/linear/points?from=0&to=300&mode=raw").await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("points_response", &raw);
    assert_eq!(raw["meta"]["path"], "raw");
    let grid = BucketGrid::new((0.0, 300.0), series.value_extent().unwrap(), 300, 100).unwrap();
    let expected = rppf_filter(&series, &grid).unwrap().retained;
    assert_eq!(raw["meta"]["points_returned"].as_u64().unwrap() as usize, expected.len());
    let first = expected.first().unwrap();
    assert_eq!(raw["points"][0], json!([first.t, first.v]));

    // Empty overlap.
    let (status, empty) = get(&app, "/api/series/linear/points?from=1000&to=2000&mode=raw").await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("points_response", &empty);
    assert_eq!(empty["points"], json!([]));
    assert_eq!(empty["meta"]["points_returned"], 0);

    // Short span in auto mode goes raw.
    let (_, short) = get(&app, "/api/series/linear/points?from=10&to=20").await;
    assert_eq!(short["meta"]["path"], "raw");
    assert_eq!(short["meta"]["aligned_from"], 10.0);

    // Misaligned preprocessed requests widen to whole batches.
    let (_, wide) = get(&app, "/api/series/linear/points?from=0.5&to=10.5&mode=preprocessed").await;
    assert_eq!(wide["meta"]["aligned_from"], 0.0);
    assert_eq!(wide["meta"]["aligned_to"], 11.0);
}

#[tokio::test]
async fn points_errors() {
    let app = app();
    ingest(&app, "s", "t,v\n0,1\n1,2\n").await;
    for (uri, status, code) in [
        ("/api/series/zz/points?from=0&to=1", StatusCode::NOT_FOUND, "unknown-series"),
        ("/api/series/s/points?from=5&to=1", StatusCode::UNPROCESSABLE_ENTITY, "invalid-range"),
        ("/api/series/s/points?from=1&to=1", StatusCode::UNPROCESSABLE_ENTITY, "invalid-range"),
        ("/api/series/s/points?from=abc&to=1", StatusCode::UNPROCESSABLE_ENTITY, "invalid-range"),
        ("/api/series/s/points?to=1", StatusCode::UNPROCESSABLE_ENTITY, "invalid-range"),
        ("/api/series/s/points?from=0&to=1&buckets_t=0", StatusCode::UNPROCESSABLE_ENTITY, "invalid-range"),
        ("/api/series/s/points?from=0&to=1&mode=fast", StatusCode::UNPROCESSABLE_ENTITY, "invalid-range"),
    ] {
        let (got, body) = get(&app, uri).await;
        assert_eq!(got, status, "{uri}: {body}");
        assert_eq!(body["code"], code, "{uri}");
    }
}

#[tokio::test]
async fn cors_headers_present() {
    let app = app();
    let req = Request::get("/api/series")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let res = app.router.clone().oneshot(req).await.unwrap();
    assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");

    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let config = ServiceConfig {
        cors_origin: Some("http://ui.example".parse().unwrap()),
        ..ServiceConfig::default()
    };
    let req = Request::get("/api/series")
        .header(header::ORIGIN, "http://ui.example")
        .body(Body::empty())
        .unwrap();
    let res = router(store, &config).oneshot(req).await.unwrap();
    assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://ui.example");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_queries_and_ingestion() {
    let app = Arc::new(app());
    let series = generate(&DatasetSpec::new(DatasetKind::Uniform, 20_000, 3)).unwrap();
    ingest(&app, "u", csv_of(&series)).await;

    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            if i % 4 == 0 {
                let t = 300.0 + i as f64;
                ingest(&app, "u", format!("t,v\n{t},1\n")).await.0
            } else {
                get(&app, "/api/series/u/points?from=0&to=300&mode=raw").await.0
            }
        }));
    }
    let mut ok = 0;
    for t in tasks {
        let status = t.await.unwrap();
        // Concurrent appends may land out of order; queries must never fail.
        assert!(status == StatusCode::OK || status == StatusCode::CONFLICT);
        ok += usize::from(status == StatusCode::OK);
    }
    assert!(ok >= 12);
    let entry = app.store.catalog_entry("u").unwrap();
    assert!(entry.raw_count > 20_000);
    let check = QueryParams::new("u", 0.0, 400.0).mode(QueryMode::Raw);
    run_query(&app.store, &check, &QueryOptions::default()).unwrap();
}
