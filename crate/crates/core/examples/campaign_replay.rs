//! Runs the breaking-height search for a d = 1.0 mm, w = 3 part by feeding
//! the recorded outcomes one at a time, then prints the ledger table.

use droptest::campaign::{CampaignEvent, CampaignState, NextAction};
use droptest::fixtures::{table_two_config, table_two_part, table_two_trials};

fn main() -> droptest::Result<()> {
    let mut state = CampaignState::new(table_two_part(), table_two_config())?;
    let mut log = vec![CampaignEvent::Created {
        part: state.part.clone(),
        config: state.config.clone(),
    }];
    for input in table_two_trials() {
        let NextAction::Drop { height_cm } = state.next_action()? else {
            break;
        };
        println!("drop from {height_cm} cm -> {:?}", input.outcome);
        state = state.record_trial(&input)?;
        log.push(CampaignEvent::TrialRecorded(input));
    }
    println!("next action: {:?}\n", state.next_action()?);
    print!("{}", state.to_table_csv());
    println!(
        "\nbreaking height {} cm, breaking force {:.1} N",
        state.breaking_height()?,
        state.breaking_force()?
    );

    let replayed = CampaignState::replay(&log)?;
    assert_eq!(replayed, state);
    println!("replaying {} logged events reproduces the same state", log.len());
    Ok(())
}
