use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{CampaignResult, Grid, Height, NextAction, Outcome, Phase, RefineStart, TrialRecord};

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    total: usize,
    intact: usize,
}

/// Where the search stands after folding over a trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub phase: Phase,
    pub result: Option<CampaignResult>,
    /// Next height to drop from. May be off the rig's usable range, in which
    /// case the search is exhausted.
    current: Height,
    grid_fine: i64,
    grid_max: Height,
}

impl Walk {
    pub fn next_action(&self) -> Result<NextAction> {
        match self.phase {
            Phase::Complete => Ok(NextAction::Finished),
            _ if self.current.tenths() < self.grid_fine => Err(Error::SearchExhausted(format!(
                "every refined height down to the {} cm minimum broke",
                Height::from_tenths(self.grid_fine)
            ))),
            _ if self.current > self.grid_max => Err(Error::SearchExhausted(format!(
                "no break up to the rig maximum of {} cm",
                self.grid_max
            ))),
            _ => Ok(NextAction::Drop {
                height_cm: self.current,
            }),
        }
    }
}

struct Cursor<'g> {
    grid: &'g Grid,
    phase: Phase,
    current: Height,
    refine_top: Option<Height>,
    terminal: Option<Height>,
    tally: BTreeMap<Height, Tally>,
}

impl<'g> Cursor<'g> {
    fn new(grid: &'g Grid) -> Self {
        Self {
            grid,
            phase: Phase::Coarse,
            current: grid.start,
            refine_top: None,
            terminal: None,
            tally: BTreeMap::new(),
        }
    }

    fn in_range(&self) -> bool {
        self.current.tenths() >= self.grid.fine && self.current <= self.grid.max
    }

    fn advance(&mut self, trial: &TrialRecord) -> Result<()> {
        if self.phase == Phase::Complete {
            return Err(Error::StateCorruption(format!(
                "trial {} recorded after the search completed",
                trial.seq
            )));
        }
        if !self.in_range() || trial.height_cm != self.current {
            return Err(Error::StateCorruption(format!(
                "trial {} at {} cm but the search was pending {} cm",
                trial.seq, trial.height_cm, self.current
            )));
        }
        let tally = self.tally.entry(trial.height_cm).or_default();
        if trial.trial_index as usize != tally.total {
            return Err(Error::StateCorruption(format!(
                "trial {} has index {} at {} cm, expected {}",
                trial.seq, trial.trial_index, trial.height_cm, tally.total
            )));
        }
        match (trial.outcome, trial.peak_force_n) {
            (Outcome::Intact, None) | (Outcome::Broke, Some(_)) => {
                return Err(Error::StateCorruption(format!(
                    "trial {} has an outcome inconsistent with its peak force",
                    trial.seq
                )))
            }
            _ => {}
        }
        tally.total += 1;
        if trial.outcome == Outcome::Intact {
            tally.intact += 1;
        }

        match self.phase {
            Phase::Coarse => match trial.outcome {
                Outcome::Intact => self.current = self.current.offset(self.grid.coarse),
                Outcome::Broke => {
                    self.phase = Phase::Refine;
                    let top = match self.grid.refine_start {
                        RefineStart::AtBreak => self.current,
                        RefineStart::BelowBreak => self.current.offset(-self.grid.fine),
                    };
                    self.refine_top = Some(top);
                    self.current = top;
                    self.settle();
                }
            },
            Phase::Refine => self.settle(),
            Phase::Complete => unreachable!(),
        }
        Ok(())
    }

    /// Steps down through refined heights whose quota is already filled.
    fn settle(&mut self) {
        while self.in_range() {
            let tally = self.tally.get(&self.current).copied().unwrap_or_default();
            if tally.total < self.grid.quota {
                return;
            }
            if tally.intact == tally.total {
                self.phase = Phase::Complete;
                self.terminal = Some(self.current);
                return;
            }
            self.current = self.current.offset(-self.grid.fine);
        }
    }
}

fn mean_of_sorted(mut forces: Vec<f64>) -> f64 {
    // Sorting makes the sum independent of recording order.
    forces.sort_by(f64::total_cmp);
    forces.iter().sum::<f64>() / forces.len() as f64
}

pub(crate) fn walk(grid: &Grid, trials: &[TrialRecord]) -> Result<Walk> {
    let mut cursor = Cursor::new(grid);
    for (i, trial) in trials.iter().enumerate() {
        if trial.seq != i as u64 {
            return Err(Error::StateCorruption(format!(
                "trial at position {i} carries sequence number {}",
                trial.seq
            )));
        }
        cursor.advance(trial)?;
    }

    let result = match (cursor.phase, cursor.refine_top, cursor.terminal) {
        (Phase::Complete, Some(top), Some(bottom)) => {
            let breaking = (bottom.tenths()..=top.tenths())
                .rev()
                .step_by(grid.fine as usize)
                .map(Height::from_tenths)
                .find(|h| cursor.tally.get(h).is_some_and(|t| t.intact > 0))
                .expect("the terminal height is fully intact");
            let forces: Vec<f64> = trials
                .iter()
                .filter(|t| t.height_cm == breaking && t.outcome == Outcome::Intact)
                .filter_map(|t| t.peak_force_n)
                .collect();
            Some(CampaignResult {
                breaking_height_cm: breaking,
                breaking_force_n: mean_of_sorted(forces),
            })
        }
        _ => None,
    };

    Ok(Walk {
        phase: cursor.phase,
        result,
        current: cursor.current,
        grid_fine: grid.fine,
        grid_max: grid.max,
    })
}
