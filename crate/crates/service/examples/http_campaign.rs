//! Starts the API on a free local port and drives the Table II campaign
//! through it the way a bench client would, then asks for part advice.

use droptest::advisor::builtin_table;
use droptest::fixtures::{table_two_config, table_two_part, table_two_trials};
use droptest_service::api::{router, AppState};
use droptest_service::ops::RigSettings;
use droptest_service::store::Store;
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let state = AppState::new(Store::open(dir.path())?, RigSettings::default(), builtin_table());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });

    let http = reqwest::Client::new();
    let created: Value = http
        .post(format!("{base}/campaigns"))
        .json(&json!({"id": "slot10-w3", "part": table_two_part(), "config": table_two_config()}))
        .send()
        .await?
        .json()
        .await?;
    let id = created["id"].as_str().unwrap_or_default().to_owned();
    println!("campaign {id}");

    for (i, trial) in table_two_trials().into_iter().enumerate() {
        let next: Value = http.get(format!("{base}/campaigns/{id}/next")).send().await?.json().await?;
        let resp = http
            .post(format!("{base}/campaigns/{id}/trials"))
            .header("Idempotency-Key", format!("bench-{i}"))
            .json(&trial)
            .send()
            .await?;
        println!(
            "  next {} -> recorded {:?} at {} cm ({})",
            next["height_cm"],
            trial.outcome,
            trial.height_cm,
            resp.status()
        );
    }

    let report: Value = http.get(format!("{base}/campaigns/{id}/report")).send().await?.json().await?;
    println!("result {}", report["result"]);
    let csv = http.get(format!("{base}/campaigns/{id}/report?format=csv")).send().await?.text().await?;
    print!("{csv}");

    let advice: Value = http.post(format!("{base}/advise")).json(&json!({"target_f_max_n": 65.0})).send().await?.json().await?;
    println!("advice for 65 N: {advice}");
    Ok(())
}
