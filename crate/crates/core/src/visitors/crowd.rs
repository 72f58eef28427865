use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::sculpture::{SculptureState, VisitorBody};
use crate::units::Seconds;

use super::VisitorError;

/// Walking speed, metres per second.
pub const WALK_SPEED: f64 = 0.6;
/// Clearance of a visitor standing under the sculpture with hands down.
pub const STANDING_CLEARANCE_CM: (f64, f64) = (65.0, 95.0);
/// Clearance of a raised hand.
pub const RAISED_HAND_CLEARANCE_CM: (f64, f64) = (12.0, 30.0);
const MARGIN_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behaviour {
    /// Drifts around under the sculpture without reaching up.
    Wanderer,
    /// Walks to nodes and periodically reaches toward the sensor.
    HandRaiser,
    /// Follows the brightest LED and reaches toward it while it is lit.
    BrightestLedSeeker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledArrival {
    pub at: Seconds,
    pub dwell: Seconds,
    pub behaviour: Behaviour,
}

/// Poisson arrivals with uniformly distributed dwell times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalGenerator {
    pub mean_interarrival: Seconds,
    pub dwell_min: Seconds,
    pub dwell_max: Seconds,
    /// Relative weights of the behaviours.
    pub behaviours: Vec<(Behaviour, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitorScenario {
    pub seed: u64,
    #[serde(default)]
    pub arrivals: Vec<ScheduledArrival>,
    #[serde(default)]
    pub generator: Option<ArrivalGenerator>,
}

impl VisitorScenario {
    pub fn from_toml(text: &str) -> Result<Self, VisitorError> {
        let s: Self = toml::from_str(text).map_err(|e| VisitorError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, VisitorError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), VisitorError> {
        if self.arrivals.windows(2).any(|w| w[1].at.0 < w[0].at.0) {
            return Err(VisitorError::Scenario("arrival times must be sorted".into()));
        }
        if let Some(g) = &self.generator {
            if g.mean_interarrival.0 <= 0.0 {
                return Err(VisitorError::Scenario("mean interarrival must be positive".into()));
            }
            if g.dwell_min.0 > g.dwell_max.0 {
                return Err(VisitorError::Scenario("dwell_min exceeds dwell_max".into()));
            }
            let total: f64 = g.behaviours.iter().map(|b| b.1).sum();
            if g.behaviours.iter().any(|b| !(b.1 >= 0.0)) || !(total > 0.0) {
                return Err(VisitorError::Scenario("behaviour weights must be non-negative with a positive sum".into()));
            }
        }
        Ok(())
    }

    /// All arrivals in `[start, end)`, sorted by time. Generated arrivals
    /// depend only on the seed and the window.
    pub fn arrivals_between(&self, start: f64, end: f64) -> Vec<ScheduledArrival> {
        let mut out: Vec<ScheduledArrival> =
            self.arrivals.iter().filter(|a| a.at.0 >= start && a.at.0 < end).cloned().collect();
        if let Some(g) = &self.generator {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(start.to_bits());
            let gap = Exp::new(1.0 / g.mean_interarrival.0).expect("positive rate");
            let total: f64 = g.behaviours.iter().map(|b| b.1).sum();
            let mut t = start + gap.sample(&mut rng);
            while t < end {
                let dwell = if g.dwell_max.0 > g.dwell_min.0 {
                    rng.random_range(g.dwell_min.0..g.dwell_max.0)
                } else {
                    g.dwell_min.0
                };
                let mut pick = rng.random_range(0.0..total);
                let mut behaviour = g.behaviours[0].0;
                for &(b, w) in &g.behaviours {
                    if pick < w {
                        behaviour = b;
                        break;
                    }
                    pick -= w;
                }
                out.push(ScheduledArrival { at: Seconds(t), dwell: Seconds(dwell), behaviour });
                t += gap.sample(&mut rng);
            }
        }
        out.sort_by(|a, b| a.at.0.total_cmp(&b.at.0));
        out
    }
}

#[derive(Debug, Clone)]
struct Walker {
    id: u64,
    behaviour: Behaviour,
    arrived: f64,
    leaves: f64,
    position: [f64; 2],
    heading: f64,
    standing_cm: f64,
    hand_cm: f64,
    goal: Option<usize>,
    hand_until: f64,
    raised: bool,
    next_decision: f64,
    rng: ChaCha8Rng,
}

/// Visitors moving under the sculpture according to their behaviours.
#[derive(Debug, Clone)]
pub struct Crowd {
    seed: u64,
    pending: Vec<ScheduledArrival>,
    walkers: Vec<Walker>,
    next_id: u64,
    bounds: [f64; 4],
}

/// Change in the crowd caused by one [`Crowd::spawn_visitors`] call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrowdUpdate {
    pub arrived: Vec<u64>,
    pub departed: Vec<u64>,
}

impl Crowd {
    /// Crowd that will replay `arrivals`. Visitor ids and random streams are
    /// derived from `seed`.
    pub fn new(arrivals: Vec<ScheduledArrival>, seed: u64, sculpture: &SculptureState) -> Self {
        let pos = sculpture.topology().positions();
        let fold = |f: fn(f64, f64) -> f64, k: usize, init: f64| pos.iter().map(|p| p[k]).fold(init, f);
        let bounds = [
            fold(f64::min, 0, f64::INFINITY) - MARGIN_M,
            fold(f64::max, 0, f64::NEG_INFINITY) + MARGIN_M,
            fold(f64::min, 1, f64::INFINITY) - MARGIN_M,
            fold(f64::max, 1, f64::NEG_INFINITY) + MARGIN_M,
        ];
        let mut pending = arrivals;
        pending.sort_by(|a, b| b.at.0.total_cmp(&a.at.0));
        Self { seed, pending, walkers: Vec::new(), next_id: 0, bounds }
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    /// Applies departures due at `now` for visitors already present, then
    /// arrivals due at `now`.
    pub fn spawn_visitors(&mut self, now: f64) -> CrowdUpdate {
        let mut update = CrowdUpdate::default();
        self.walkers.retain(|w| {
            let stay = now < w.leaves || now <= w.arrived;
            if !stay {
                update.departed.push(w.id);
            }
            stay
        });
        while self.pending.last().is_some_and(|a| a.at.0 <= now) {
            let a = self.pending.pop().expect("checked");
            let id = self.next_id;
            self.next_id += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(id + 1);
            let y = rng.random_range(self.bounds[2]..=self.bounds[3]);
            let standing_cm = rng.random_range(STANDING_CLEARANCE_CM.0..STANDING_CLEARANCE_CM.1);
            let hand_cm = rng.random_range(RAISED_HAND_CLEARANCE_CM.0..RAISED_HAND_CLEARANCE_CM.1);
            self.walkers.push(Walker {
                id,
                behaviour: a.behaviour,
                arrived: now,
                leaves: now + a.dwell.0,
                position: [self.bounds[0], y],
                heading: 0.0,
                standing_cm,
                hand_cm,
                goal: None,
                hand_until: f64::NEG_INFINITY,
                raised: false,
                next_decision: now,
                rng,
            });
            update.arrived.push(id);
        }
        update
    }

    /// Moves every visitor by one step of `dt` seconds and mirrors the crowd
    /// into the sculpture's visitor list.
    pub fn advance(&mut self, now: f64, dt: f64, sculpture: &mut SculptureState) {
        let positions = sculpture.topology().positions().to_vec();
        let leds = sculpture.led_intensities();
        let bounds = self.bounds;
        let turn = Normal::new(0.0, 0.4).expect("valid");
        for w in &mut self.walkers {
            let raised = match w.behaviour {
                Behaviour::Wanderer => {
                    w.heading += turn.sample(&mut w.rng);
                    let step = [w.heading.cos() * WALK_SPEED * dt, w.heading.sin() * WALK_SPEED * dt];
                    w.position = [w.position[0] + step[0], w.position[1] + step[1]];
                    if w.position[0] < bounds[0] || w.position[0] > bounds[1] {
                        w.heading = std::f64::consts::PI - w.heading;
                    }
                    if w.position[1] < bounds[2] || w.position[1] > bounds[3] {
                        w.heading = -w.heading;
                    }
                    false
                }
                Behaviour::HandRaiser => {
                    if now >= w.next_decision || w.goal.is_none() {
                        w.goal = Some(w.rng.random_range(0..positions.len()));
                        w.next_decision = now + w.rng.random_range(20.0..60.0);
                    }
                    let goal = positions[w.goal.expect("set")];
                    let arrived = walk_toward(&mut w.position, goal, WALK_SPEED * dt);
                    if arrived && now >= w.hand_until + 4.0 && w.rng.random_bool(0.05) {
                        w.hand_until = now + w.rng.random_range(1.0..4.0);
                    }
                    now < w.hand_until
                }
                Behaviour::BrightestLedSeeker => {
                    let (best, &level) = leds
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                        .expect("non-empty sculpture");
                    if level > 0.05 {
                        w.goal = Some(best);
                    }
                    match w.goal {
                        Some(g) => {
                            let arrived = walk_toward(&mut w.position, positions[g], WALK_SPEED * dt);
                            arrived && leds[g] > 0.2
                        }
                        None => false,
                    }
                }
            };
            w.position[0] = w.position[0].clamp(bounds[0], bounds[1]);
            w.position[1] = w.position[1].clamp(bounds[2], bounds[3]);
            w.heading = w.heading.rem_euclid(std::f64::consts::TAU);
            w.raised = raised;
        }
        let bodies = sculpture.visitors_mut();
        bodies.clear();
        bodies.extend(self.walkers.iter().map(|w| VisitorBody {
            id: w.id,
            position: w.position,
            clearance_cm: if w.raised { w.hand_cm } else { w.standing_cm },
        }));
    }
}

/// Moves `pos` up to `step` metres toward `goal`; true once it is there.
fn walk_toward(pos: &mut [f64; 2], goal: [f64; 2], step: f64) -> bool {
    let d = [goal[0] - pos[0], goal[1] - pos[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len <= step {
        *pos = goal;
        true
    } else {
        pos[0] += d[0] / len * step;
        pos[1] += d[1] / len * step;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sculpture::{NodeTopology, TICK_S};

    fn sculpture() -> SculptureState {
        SculptureState::new(NodeTopology::canonical(), 0)
    }

    fn arrival(at: f64, dwell: f64, behaviour: Behaviour) -> ScheduledArrival {
        ScheduledArrival { at: Seconds(at), dwell: Seconds(dwell), behaviour }
    }

    #[test]
    fn empty_schedule_never_spawns() {
        let s = sculpture();
        let mut crowd = Crowd::new(VisitorScenario::default().arrivals_between(0.0, 3600.0), 1, &s);
        for k in 0..1000 {
            assert_eq!(crowd.spawn_visitors(k as f64 * TICK_S), CrowdUpdate::default());
        }
    }

    #[test]
    fn zero_dwell_departs_next_tick() {
        let s = sculpture();
        let mut crowd = Crowd::new(vec![arrival(1.0, 0.0, Behaviour::Wanderer)], 1, &s);
        assert!(crowd.spawn_visitors(0.9).arrived.is_empty());
        assert_eq!(crowd.spawn_visitors(1.0).arrived, vec![0]);
        assert_eq!(crowd.len(), 1);
        assert_eq!(crowd.spawn_visitors(1.1).departed, vec![0]);
        assert!(crowd.is_empty());
    }

    #[test]
    fn generated_arrivals_are_reproducible_and_sorted() {
        let scenario = VisitorScenario {
            seed: 11,
            arrivals: vec![],
            generator: Some(ArrivalGenerator {
                mean_interarrival: Seconds(60.0),
                dwell_min: Seconds(30.0),
                dwell_max: Seconds(300.0),
                behaviours: vec![(Behaviour::Wanderer, 1.0), (Behaviour::HandRaiser, 2.0)],
            }),
        };
        let a = scenario.arrivals_between(0.0, 3600.0);
        assert_eq!(a, scenario.arrivals_between(0.0, 3600.0));
        assert!(a.len() > 30 && a.len() < 100, "{}", a.len());
        assert!(a.windows(2).all(|w| w[0].at.0 <= w[1].at.0));
    }

    #[test]
    fn seeker_reaches_the_lit_node() {
        let mut s = sculpture();
        let mut raw = vec![-1.0; s.raw_channel_count()];
        raw[7 * 8 + 1] = 1.0;
        s.apply_raw_action(&raw).unwrap();
        let mut crowd = Crowd::new(vec![arrival(0.0, 600.0, Behaviour::BrightestLedSeeker)], 2, &s);
        let mut now = 0.0;
        for _ in 0..200 {
            crowd.spawn_visitors(now);
            crowd.advance(now, TICK_S, &mut s);
            now += TICK_S;
        }
        let frame = s.read_ir_frame();
        assert!(frame.readings[7] >= 0.25, "{:?}", frame.readings);
    }

    #[test]
    fn scenario_toml_parses_and_rejects_unknown_keys() {
        let text = r#"
            seed = 4
            [[arrivals]]
            at = "10s"
            dwell = "2min"
            behaviour = "hand_raiser"
        "#;
        let s = VisitorScenario::from_toml(text).unwrap();
        assert_eq!(s.arrivals[0].dwell, Seconds(120.0));
        assert!(VisitorScenario::from_toml("seed = 1\ncolour = 3").is_err());
        let unsorted = "seed = 1\n[[arrivals]]\nat = \"5s\"\ndwell = \"1s\"\nbehaviour = \"wanderer\"\n[[arrivals]]\nat = \"2s\"\ndwell = \"1s\"\nbehaviour = \"wanderer\"";
        assert!(VisitorScenario::from_toml(unsorted).is_err());
    }
}
