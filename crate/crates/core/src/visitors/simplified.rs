use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pla::{Environment, PlaError};
use crate::sculpture::{raw_to_intensity, ActuatorKind, IrFrame, TICK_S};

use super::VisitorError;

/// Largest line length the oracle enumerates.
pub const ORACLE_MAX_CELLS: usize = 24;
/// Largest visitor count the oracle enumerates.
pub const ORACLE_MAX_VISITORS: usize = 4;

/// IR reading at a cell whose nearest visitor is `distance` cells away.
pub fn proximity_kernel(distance: usize) -> f64 {
    match distance {
        0 => 1.0,
        1 => 0.5,
        _ => 0.0,
    }
}

/// LEDs are driven with 8-bit duty cycles, so visitors compare brightness
/// at that resolution.
pub fn led_level(intensity: f64) -> u8 {
    (intensity.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// One line of `K` cells, each with an LED and an IR sensor, and visitors
/// that walk toward the brightest LED.
#[derive(Debug, Clone)]
pub struct SimplifiedEnv {
    cells: usize,
    visitors: Vec<usize>,
    led: Vec<f64>,
    clipped: u64,
    time: f64,
    respawn: Option<ChaCha8Rng>,
}

impl SimplifiedEnv {
    pub fn new(cells: usize, visitors: Vec<usize>) -> Result<Self, VisitorError> {
        if cells == 0 {
            return Err(VisitorError::Config("the cell line must be non-empty".into()));
        }
        if let Some(&bad) = visitors.iter().find(|&&v| v >= cells) {
            return Err(VisitorError::CellOutOfRange { cell: bad, cells });
        }
        Ok(Self { cells, visitors, led: vec![0.0; cells], clipped: 0, time: 0.0, respawn: None })
    }

    /// Environment whose visitors are placed at distinct random cells at the
    /// start of every episode.
    pub fn with_respawn(cells: usize, visitor_count: usize, seed: u64) -> Result<Self, VisitorError> {
        if visitor_count > cells {
            return Err(VisitorError::Config(format!("{visitor_count} visitors do not fit on {cells} cells")));
        }
        let mut env = Self::new(cells, Vec::new())?;
        env.respawn = Some(ChaCha8Rng::seed_from_u64(seed));
        env.visitors = vec![0; visitor_count];
        env.respawn_visitors();
        Ok(env)
    }

    fn respawn_visitors(&mut self) {
        if let Some(rng) = self.respawn.as_mut() {
            let mut cells = sample(rng, self.cells, self.visitors.len()).into_vec();
            cells.sort_unstable();
            self.visitors = cells;
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn visitors(&self) -> &[usize] {
        &self.visitors
    }

    pub fn led_intensities(&self) -> &[f64] {
        &self.led
    }

    pub fn clip_warnings(&self) -> u64 {
        self.clipped
    }

    /// Readings for the current visitor positions.
    pub fn readings(&self) -> Vec<f64> {
        readings_for(self.cells, &self.visitors)
    }

    /// Sets the LEDs from raw commands, moves each visitor one cell toward
    /// its nearest brightest LED and returns the new frame and reward.
    pub fn step_simplified(&mut self, raw_action: &[f64]) -> Result<(IrFrame, f64), VisitorError> {
        if raw_action.len() != self.cells {
            return Err(VisitorError::ActionLength { got: raw_action.len(), expected: self.cells });
        }
        for (led, &raw) in self.led.iter_mut().zip(raw_action) {
            let (level, clipped) = raw_to_intensity(ActuatorKind::Led, raw);
            self.clipped += u64::from(clipped);
            *led = level;
        }
        let levels: Vec<u8> = self.led.iter().map(|&i| led_level(i)).collect();
        let top = *levels.iter().max().expect("non-empty line");
        let brightest: Vec<usize> = (0..self.cells).filter(|&c| levels[c] == top).collect();
        for v in &mut self.visitors {
            let goal = *brightest
                .iter()
                .min_by_key(|&&c| (c.abs_diff(*v), c))
                .expect("at least one brightest cell");
            if goal > *v {
                *v += 1;
            } else if goal < *v {
                *v -= 1;
            }
        }
        self.time += TICK_S;
        let readings = self.readings();
        let reward = readings.iter().sum();
        Ok((IrFrame { timestamp: self.time, readings }, reward))
    }
}

pub fn readings_for(cells: usize, visitors: &[usize]) -> Vec<f64> {
    (0..cells)
        .map(|c| visitors.iter().map(|&v| c.abs_diff(v)).min().map_or(0.0, proximity_kernel))
        .collect()
}

/// Best steady-state reward per step. Any visitor placement is stationary
/// under an LED pattern whose brightest set is exactly the occupied cells, so
/// the steady-state optimum is the best reward over all placements.
pub fn oracle_reward(cells: usize, visitor_count: usize) -> Result<f64, VisitorError> {
    if cells > ORACLE_MAX_CELLS || visitor_count > ORACLE_MAX_VISITORS {
        return Err(VisitorError::OracleBound { cells, visitors: visitor_count });
    }
    if visitor_count == 0 || cells == 0 {
        return Ok(0.0);
    }
    let mut best = f64::NEG_INFINITY;
    let mut placement = vec![0usize; visitor_count];
    loop {
        let r: f64 = readings_for(cells, &placement).iter().sum();
        best = best.max(r);
        // odometer over non-decreasing placements
        let mut i = visitor_count;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if placement[i] + 1 < cells {
                placement[i] += 1;
                let v = placement[i];
                for p in &mut placement[i + 1..] {
                    *p = v;
                }
                break;
            }
        }
    }
}

impl Environment for SimplifiedEnv {
    fn obs_dim(&self) -> usize {
        self.cells
    }

    fn action_dim(&self) -> usize {
        self.cells
    }

    fn observe(&mut self) -> Result<Vec<f64>, PlaError> {
        Ok(self.readings())
    }

    fn step(&mut self, action: &[f64]) -> Result<Vec<f64>, PlaError> {
        self.step_simplified(action)
            .map(|(frame, _)| frame.readings)
            .map_err(|e| PlaError::Env(e.to_string()))
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn begin_episode(&mut self) -> Result<bool, PlaError> {
        if self.respawn.is_none() {
            return Ok(false);
        }
        self.respawn_visitors();
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_leds_keep_visitor_in_place() {
        let mut env = SimplifiedEnv::new(24, vec![3]).unwrap();
        let (frame, reward) = env.step_simplified(&[0.2; 24]).unwrap();
        assert_eq!(env.visitors(), &[3]);
        assert_eq!(frame.readings[3], 1.0);
        assert_eq!(reward, 2.0);
    }

    #[test]
    fn visitor_walks_one_cell_per_step() {
        let mut env = SimplifiedEnv::new(24, vec![5]).unwrap();
        let mut raw = vec![-1.0; 24];
        raw[0] = 1.0;
        for k in 1..=5 {
            env.step_simplified(&raw).unwrap();
            assert_eq!(env.visitors(), &[5 - k]);
        }
        env.step_simplified(&raw).unwrap();
        assert_eq!(env.visitors(), &[0]);
    }

    #[test]
    fn ties_break_toward_lower_index() {
        let mut env = SimplifiedEnv::new(10, vec![5]).unwrap();
        let mut raw = vec![-1.0; 10];
        raw[3] = 1.0;
        raw[7] = 1.0;
        env.step_simplified(&raw).unwrap();
        assert_eq!(env.visitors(), &[4]);
    }

    #[test]
    fn no_visitors_no_reward() {
        let mut env = SimplifiedEnv::new(24, vec![]).unwrap();
        assert_eq!(env.step_simplified(&[0.7; 24]).unwrap().1, 0.0);
    }

    #[test]
    fn oracle_values() {
        assert_eq!(oracle_reward(24, 0).unwrap(), 0.0);
        assert_eq!(oracle_reward(24, 1).unwrap(), 2.0);
        assert_eq!(oracle_reward(24, 2).unwrap(), 4.0);
        assert_eq!(oracle_reward(1, 1).unwrap(), 1.0);
        assert!(oracle_reward(25, 1).is_err());
        assert!(oracle_reward(24, 5).is_err());
    }

    #[test]
    fn respawn_places_distinct_cells() {
        let mut env = SimplifiedEnv::with_respawn(24, 2, 3).unwrap();
        for _ in 0..50 {
            env.begin_episode().unwrap();
            let v = env.visitors();
            assert!(v[0] < v[1] && v[1] < 24);
        }
    }

    #[test]
    fn wrong_action_length_is_rejected() {
        let mut env = SimplifiedEnv::new(24, vec![1]).unwrap();
        assert!(matches!(env.step_simplified(&[0.0; 3]), Err(VisitorError::ActionLength { .. })));
    }
}
