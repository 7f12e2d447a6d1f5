//! Records part of a campaign in a file store, simulates a crash after the
//! log append but before the snapshot write, and shows the store repairing
//! itself on reopen.

use std::fs;

use droptest::campaign::CampaignState;
use droptest::fixtures::{table_two_config, table_two_part, table_two_trials};
use droptest_service::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path())?;
    let (id, _, _) = store.create_campaign(Some("demo"), table_two_part(), table_two_config())?;
    let trials = table_two_trials();
    for t in &trials[..6] {
        store.record_trial(&id, t)?;
    }
    let campaign_dir = dir.path().join("campaigns").join(&id);
    let snapshot = campaign_dir.join("snapshot.json");
    let stale = fs::read(&snapshot)?;

    let acknowledged = store.record_trial(&id, &trials[6])?;
    println!("acknowledged trial {} at {} cm", acknowledged.record.seq, acknowledged.record.height_cm);
    drop(store);

    // Roll the snapshot back and tear a half-written line onto the log.
    fs::write(&snapshot, stale)?;
    let mut log = fs::read(campaign_dir.join("log.ndjson"))?;
    log.extend_from_slice(b"{\"event\":\"trial_rec");
    fs::write(campaign_dir.join("log.ndjson"), log)?;

    let store = Store::open(dir.path())?;
    let state = store.campaign(&id)?;
    println!(
        "after reopen: {} trials, next {}",
        state.trials.len(),
        serde_json::to_string(&state.next_action()?)?
    );

    let replayed = CampaignState::replay(&store.events(&id)?)?;
    println!("snapshot equals log replay: {}", replayed == state);

    let retry = store.record_trial(&id, &trials[7].clone().with_key("k7"))?;
    let again = store.record_trial(&id, &trials[7].clone().with_key("k7"))?;
    println!("retry with the same key replayed: {}", again.replayed && again.record == retry.record);
    Ok(())
}
