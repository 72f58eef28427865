use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, Mode, RunConfig, SlotSpec};

/// A slot placed on the simulated clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub day: u32,
    /// Position within its day, from 0.
    pub index: u32,
    pub mode: Mode,
    pub start: f64,
    pub end: f64,
}

impl Slot {
    pub fn log_stem(&self) -> String {
        format!("{}_{}_{}", self.day, self.index, self.mode)
    }
}

/// Each day holds every mode exactly once, in a seeded random order.
pub fn schedule_slots(modes: &[Mode], days: u32, seed: u64) -> Vec<DaySchedule> {
    (1..=days)
        .map(|day| {
            let mut order = modes.to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::from(day)]));
            order.shuffle(&mut rng);
            DaySchedule { day, modes: order }
        })
        .collect()
}

/// The modes of one day in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySchedule {
    pub day: u32,
    pub modes: Vec<Mode>,
}

/// Lays the config's slots onto the clock: day `d` starts at
/// `(d − 1) · day_length` and its slots follow each other without gaps.
pub fn plan(config: &RunConfig) -> Vec<Slot> {
    let specs: Vec<SlotSpec> = match &config.schedule {
        Some(s) => schedule_slots(&s.modes, s.days, config.seeds.sim)
            .into_iter()
            .flat_map(|d| {
                d.modes.into_iter().map(move |mode| SlotSpec { day: d.day, mode, duration: s.slot_duration })
            })
            .collect(),
        None => config.slots.clone(),
    };
    let mut out = Vec::with_capacity(specs.len());
    let mut day = 0;
    let mut index = 0;
    let mut clock = 0.0;
    for s in specs {
        if s.day != day {
            day = s.day;
            index = 0;
            clock = f64::from(day - 1) * config.day_length.0;
        }
        out.push(Slot { day, index, mode: s.mode, start: clock, end: clock + s.duration.0 });
        clock += s.duration.0;
        index += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_is_trivial() {
        let s = schedule_slots(&[Mode::Pb], 3, 1);
        assert!(s.iter().all(|d| d.modes == vec![Mode::Pb]));
    }

    #[test]
    fn every_day_has_every_mode_once() {
        let s = schedule_slots(&[Mode::Pb, Mode::Pla], 5, 42);
        assert_eq!(s.len(), 5);
        for d in &s {
            let mut m = d.modes.clone();
            m.sort();
            assert_eq!(m, vec![Mode::Pb, Mode::Pla]);
        }
        assert_eq!(s, schedule_slots(&[Mode::Pb, Mode::Pla], 5, 42));
    }

    #[test]
    fn order_varies_between_days() {
        let s = schedule_slots(&[Mode::Pb, Mode::Pla], 40, 7);
        assert!(s.iter().any(|d| d.modes[0] == Mode::Pb));
        assert!(s.iter().any(|d| d.modes[0] == Mode::Pla));
    }
}
