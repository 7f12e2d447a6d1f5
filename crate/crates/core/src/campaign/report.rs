use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::trace::Signature;

use super::{
    CampaignConfig, CampaignResult, CampaignState, Height, NextAction, Outcome, PartSpec, Phase,
    TrialRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub height_cm: Height,
    pub trials: Vec<TrialRecord>,
}

/// A trial where the trace classifier read the opposite of what the operator saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub trial_id: u64,
    pub height_cm: Height,
    pub trial_index: u32,
    pub operator: Outcome,
    pub classifier: Signature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub part: PartSpec,
    pub config: CampaignConfig,
    pub phase: Phase,
    pub ledger: Vec<LedgerRow>,
    pub next_action: Option<NextAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocked: Option<String>,
    pub result: Option<CampaignResult>,
    pub disagreements: Vec<Disagreement>,
    pub non_monotone_heights: Vec<Height>,
    pub pending_analyses: Vec<u64>,
}

pub fn campaign_report(state: &CampaignState) -> CampaignReport {
    let ledger = state
        .ledger()
        .into_iter()
        .map(|(height_cm, trials)| LedgerRow {
            height_cm,
            trials: trials.into_iter().cloned().collect(),
        })
        .collect();

    let (next_action, blocked) = match state.next_action() {
        Ok(action) => (Some(action), None),
        Err(err) => (None, Some(err.to_string())),
    };

    let disagreements = state
        .trials
        .iter()
        .filter_map(|t| {
            let classifier = t.analysis?.signature;
            let agrees = matches!(
                (t.outcome, classifier),
                (_, Signature::Uncertain)
                    | (Outcome::Intact, Signature::Intact)
                    | (Outcome::Broke, Signature::Broke)
            );
            (!agrees).then_some(Disagreement {
                trial_id: t.seq,
                height_cm: t.height_cm,
                trial_index: t.trial_index,
                operator: t.outcome,
                classifier,
            })
        })
        .collect();

    CampaignReport {
        schema_version: state.schema_version,
        part: state.part.clone(),
        config: state.config.clone(),
        phase: state.phase,
        ledger,
        next_action,
        blocked,
        result: state.result,
        disagreements,
        non_monotone_heights: state.non_monotone_heights(),
        pending_analyses: state
            .trials
            .iter()
            .filter(|t| t.analysis_pending())
            .map(|t| t.seq)
            .collect(),
    }
}

impl CampaignState {
    /// Peak-force table with one row per height and one column per trial.
    /// Broken trials read `N/A`; the average covers intact trials only.
    pub fn to_table_csv(&self) -> String {
        let ledger = self.ledger();
        let columns = ledger
            .values()
            .map(Vec::len)
            .max()
            .unwrap_or(0)
            .max(self.config.trials_per_height as usize);

        let mut out = String::from("height_cm");
        for i in 1..=columns {
            let _ = write!(out, ",t{i}_n");
        }
        out.push_str(",average_n\n");

        for (height, trials) in &ledger {
            let _ = write!(out, "{height}");
            for i in 0..columns {
                out.push(',');
                if let Some(t) = trials.get(i) {
                    match (t.outcome, t.peak_force_n) {
                        (Outcome::Intact, Some(f)) => {
                            let _ = write!(out, "{f:.1}");
                        }
                        _ => out.push_str("N/A"),
                    }
                }
            }
            let mut intact: Vec<f64> = trials.iter().filter_map(|t| t.peak_force_n).collect();
            if intact.is_empty() {
                out.push_str(",N/A\n");
            } else {
                intact.sort_by(f64::total_cmp);
                let mean = intact.iter().sum::<f64>() / intact.len() as f64;
                let _ = writeln!(out, ",{mean:.1}");
            }
        }
        out
    }
}
