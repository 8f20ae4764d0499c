use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use fpqm_core::fixtures::{worked_example_test, worked_example_test_csv, worked_example_train_csv};
use fpqm_core::session::run_batch;
use fpqm_core::{EvaluationReport, FpqmModel, SessionResult};
use fpqm_service::wire::*;
use fpqm_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => request.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn example_model(app: &Router) -> ModelSummary {
    let (status, body) = call(
        app,
        Method::POST,
        "/api/models",
        Some(json!({
            "name": "example",
            "csv": worked_example_train_csv(),
            "config": {"aggregation_mode": "linear"}
        })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value(body).unwrap()
}

async fn start(app: &Router, model_id: &str, sigma: f64) -> SessionCreated {
    let (status, body) = call(
        app,
        Method::POST,
        "/api/sessions",
        Some(json!({"model_id": model_id, "sigma": sigma})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value(body).unwrap()
}

/// Answers every question from `labels` (indexed by attribute) and returns
/// the full step transcript.
async fn interview(app: &Router, session: &SessionCreated, labels: &[&str]) -> Vec<StepView> {
    let mut transcript = vec![session.step.clone()];
    let mut next = session.step.clone();
    while let StepView::Ask { attribute, .. } = next {
        let (status, body) = call(
            app,
            Method::POST,
            &format!("/api/sessions/{}/answers", session.session_id),
            Some(json!({"attribute": attribute, "value": labels[attribute]})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let resp: AnswerResponse = serde_json::from_value(body).unwrap();
        next = resp.steps.last().cloned().unwrap();
        transcript.extend(resp.steps);
    }
    transcript
}

#[tokio::test]
async fn model_creation_and_lookup() {
    let app = router(AppState::in_memory());
    let summary = example_model(&app).await;
    assert_eq!(summary.root_attribute, "Income");
    assert_eq!(summary.depth, 5);
    assert_eq!(summary.rule_count, 16);
    assert_eq!(summary.attributes[1].domain, vec!["0", "1", "2"]);

    let (status, body) = call(&app, Method::GET, &format!("/api/models/{}", summary.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<ModelSummary>(body).unwrap(), summary);

    let (status, body) = call(&app, Method::GET, "/api/models", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.as_array().unwrap().len(), 1);

    let (status, _) = call(&app, Method::GET, "/api/models/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_model_requests() {
    let app = router(AppState::in_memory());
    let (status, _) = call(&app, Method::POST, "/api/models", Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/models",
        Some(json!({"csv": "a,b\n1,2\n1\n"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("line 3"), "{body}");
    let (status, _) = call(&app, Method::POST, "/api/models", Some(json!({"csv": 5}))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn first_answer_predicts_education() {
    let app = router(AppState::in_memory());
    let model = example_model(&app).await;
    let session = start(&app, &model.id, 0.8).await;
    assert_eq!(session.status, SessionStatus::AwaitingAnswer);
    match &session.step {
        StepView::Ask { attribute_name, options, .. } => {
            assert_eq!(attribute_name, "Income");
            assert_eq!(options.len(), 3);
        }
        other => panic!("expected ask, got {other:?}"),
    }
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{}/answers", session.session_id),
        Some(json!({"attribute": "Income", "value": "1"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let resp: AnswerResponse = serde_json::from_value(body).unwrap();
    assert_eq!(
        resp.steps[0],
        StepView::Predicted {
            attribute: 0,
            attribute_name: "Education".into(),
            value: 0,
            value_label: "0".into(),
            confidence: 1.0,
        }
    );
}

#[tokio::test]
async fn transcript_replays_through_batch_runner() {
    let app = router(AppState::in_memory());
    let summary = example_model(&app).await;
    let model = FpqmModel::build(&fpqm_core::fixtures::worked_example_train(), fpqm_core::BuildConfig::linear()).unwrap();
    assert_eq!(model.schema_digest().to_string(), summary.schema_digest);
    let test = worked_example_test();
    for sigma in [0.0, 0.5, 0.8, 1.01] {
        for row in test.rows() {
            let labels: Vec<String> = row.iter().map(usize::to_string).collect();
            let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
            let session = start(&app, &summary.id, sigma).await;
            let transcript = interview(&app, &session, &labels).await;
            assert_eq!(transcript.last(), Some(&StepView::Finished));

            let (status, body) = call(&app, Method::GET, &format!("/api/sessions/{}/report", session.session_id), None).await;
            assert_eq!(status, StatusCode::OK);
            let report: Report = serde_json::from_value(body.clone()).unwrap();
            let plain: SessionResult = serde_json::from_value(body).unwrap();
            let expected = run_batch(&model, row, sigma).unwrap();
            assert_eq!(report.result, expected);
            assert_eq!(plain, expected);
            assert_eq!(report.final_labels.len(), 5);
        }
    }
}

#[tokio::test]
async fn session_errors() {
    let app = router(AppState::in_memory());
    let model = example_model(&app).await;
    let (status, _) = call(&app, Method::POST, "/api/sessions", Some(json!({"model_id": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/sessions",
        Some(json!({"model_id": model.id, "sigma": -1.0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let session = start(&app, &model.id, 0.8).await;
    let answers = format!("/api/sessions/{}/answers", session.session_id);
    let (status, _) = call(&app, Method::POST, &answers, Some(json!({"attribute": "Education", "value": "0"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = call(&app, Method::POST, &answers, Some(json!({"attribute": "Income", "value": "7"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["attribute"], "Income");
    assert_eq!(body["label"], "7");
    let (status, _) = call(&app, Method::POST, &answers, Some(json!({"attribute": "Salary", "value": "1"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::GET, &format!("/api/sessions/{}/report", session.session_id), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, Method::POST, "/api/sessions/nope/answers", Some(json!({"attribute": 1, "value": 1}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    interview(&app, &session, &["1", "1", "0", "1", "0"]).await;
    let (status, _) = call(&app, Method::POST, &answers, Some(json!({"attribute": "Income", "value": "1"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn verification_records_corrections() {
    let app = router(AppState::in_memory());
    let model = example_model(&app).await;
    let session = start(&app, &model.id, 0.8).await;
    let transcript = interview(&app, &session, &["1", "1", "0", "1", "0"]).await;
    assert!(transcript.iter().any(|s| matches!(s, StepView::Predicted { attribute: 0, .. })));
    let verify = format!("/api/sessions/{}/verify", session.session_id);

    let (status, body) = call(&app, Method::POST, &verify, Some(json!({"attribute": "Education", "corrected_value": "1"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let view: SessionView = serde_json::from_value(body).unwrap();
    assert_eq!(view.status, SessionStatus::Finished);
    assert_eq!(view.corrections.len(), 1);
    assert_eq!(view.history.len(), transcript.len());

    let (status, _) = call(&app, Method::POST, &verify, Some(json!({"attribute": "Income", "confirmed": true}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, Method::POST, &verify, Some(json!({"attribute": "Education"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::POST, &verify, Some(json!({"attribute": "Education", "corrected_value": "9"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, body) = call(&app, Method::GET, &format!("/api/sessions/{}/report", session.session_id), None).await;
    let report: Report = serde_json::from_value(body).unwrap();
    assert_eq!(report.result.final_values[0], 1);
    assert_eq!(report.result.corrections.len(), 1);
    assert_eq!(report.final_labels[0], "1");
}

#[tokio::test]
async fn evaluate_worked_example() {
    let app = router(AppState::in_memory());
    let model = example_model(&app).await;
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/evaluate",
        Some(json!({"model_id": model.id, "csv": worked_example_test_csv(), "sigma": 0.8, "beta": 0.5})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let report: EvaluationReport = serde_json::from_value(body).unwrap();
    assert!((report.af - 0.7114).abs() < 5e-5);
    assert!((report.aar - 0.75).abs() < 1e-12);

    let (status, body) = call(
        &app,
        Method::POST,
        "/api/evaluate",
        Some(json!({"model_id": model.id, "csv": "Education,Income,SocialSkills,WorkAbility,Communication\n1,5,0,1,0\n"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("Income"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_answers_have_one_winner() {
    let app = router(AppState::in_memory());
    let model = example_model(&app).await;
    for _ in 0..20 {
        let session = start(&app, &model.id, 0.8).await;
        let uri = format!("/api/sessions/{}/answers", session.session_id);
        let body = json!({"attribute": "Income", "value": "0"});
        let (a, b) = tokio::join!(
            call(&app, Method::POST, &uri, Some(body.clone())),
            call(&app, Method::POST, &uri, Some(body.clone()))
        );
        let mut statuses = [a.0, b.0];
        statuses.sort();
        assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
    }
}

#[tokio::test]
async fn models_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(dir.path()).unwrap());
    let summary = example_model(&app).await;
    let on_disk = std::fs::read_to_string(fpqm_service::model_path(dir.path(), &summary.id)).unwrap();
    let loaded = FpqmModel::from_json(&on_disk).unwrap();
    assert_eq!(loaded.to_json(), on_disk);

    let reopened = router(AppState::open(dir.path()).unwrap());
    let (status, body) = call(&reopened, Method::GET, &format!("/api/models/{}", summary.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<ModelSummary>(body).unwrap(), summary);
}
