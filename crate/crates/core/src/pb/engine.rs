use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sculpture::{
    ActivationOutcome, ActuatorEnvelope, ActuatorKind, IrFrame, NodeTopology, SculptureError,
    SculptureState, SMAS_PER_NODE, TICK_S,
};

use super::{ParamVector, PbError};

/// Scaled reading at which a sensor counts as triggered (about 75 cm).
pub const TRIGGER_THRESHOLD: f64 = 0.0625;
/// Per-sensor dead time after a trigger, seconds.
pub const TRIGGER_REFRACTORY_S: f64 = 2.0;

const DUE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Active,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    LeftToRight,
    RightToLeft,
}

/// Why an actuator was activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationEvent {
    /// Local reflex at the node whose sensor fired.
    Trigger,
    /// Local reflex reached through neighbour propagation.
    Cascade,
    Background,
    Sweep,
}

/// A scheduled actuator activation produced by the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub t: f64,
    pub node: usize,
    pub sma: usize,
    pub event: ActivationEvent,
    pub envelope: ActuatorEnvelope,
}

impl Activation {
    pub fn actuator(&self) -> ActuatorKind {
        self.envelope.kind
    }

    pub fn record(&self, outcome: ActivationOutcome) -> ActivationRecord {
        ActivationRecord {
            t: self.t,
            node: self.node,
            actuator: self.envelope.kind,
            sma: (self.envelope.kind == ActuatorKind::Sma).then_some(self.sma),
            event: self.event,
            skipped: outcome != ActivationOutcome::Applied,
        }
    }
}

/// One line of the activation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRecord {
    pub t: f64,
    pub node: usize,
    pub actuator: ActuatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sma: Option<usize>,
    pub event: ActivationEvent,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    fire_time: f64,
    node: usize,
    cascade: u64,
}

/// Mutable state of the pre-scripted behaviour state machine.
#[derive(Debug, Clone)]
pub struct PbState {
    mode: Mode,
    background_deadline: f64,
    sweep_deadline: f64,
    /// Sorted by fire time, then insertion order.
    pending: Vec<Pending>,
    rng: ChaCha8Rng,
    last_readings: Vec<f64>,
    refractory_until: Vec<f64>,
    next_cascade: u64,
    next_light_slot: f64,
    next_sma_slot: f64,
}

impl PbState {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn background_deadline(&self) -> f64 {
        self.background_deadline
    }

    pub fn sweep_deadline(&self) -> f64 {
        self.sweep_deadline
    }

    /// Pending propagations as `(node, fire_time)` in firing order.
    pub fn pending_propagations(&self) -> Vec<(usize, f64)> {
        self.pending.iter().map(|p| (p.node, p.fire_time)).collect()
    }
}

/// Moth, LED and SMA activations making up one node's local reflex.
///
/// The moth starts at `now`, the LED `t_gap_m` later, and the six SMAs fire
/// one after another `t_gap_sma` apart starting at `now`.
pub fn local_reflex(
    params: &ParamVector,
    node: usize,
    now: f64,
    event: ActivationEvent,
) -> Result<Vec<Activation>, PbError> {
    let peak = (params.i_max / 100.0).clamp(0.0, 1.0);
    let moth = ActuatorEnvelope::ramp(
        ActuatorKind::Moth,
        now,
        params.t_ru_m,
        params.t_ho_m,
        params.t_rd_m,
        peak,
    )?;
    let led = ActuatorEnvelope::ramp(
        ActuatorKind::Led,
        now + params.t_gap_m,
        params.t_ru_l,
        params.t_ho_l,
        params.t_rd_l,
        peak,
    )?;
    let mut out = Vec::with_capacity(2 + SMAS_PER_NODE);
    out.push(Activation { t: now, node, sma: 0, event, envelope: moth });
    out.push(Activation { t: led.start_time, node, sma: 0, event, envelope: led });
    for k in 0..SMAS_PER_NODE {
        let start = now + k as f64 * params.t_gap_sma;
        out.push(Activation {
            t: start,
            node,
            sma: k,
            event,
            envelope: ActuatorEnvelope::sma_pulse(start, 0.0),
        });
    }
    Ok(out)
}

/// The pre-scripted behaviour engine bound to one topology.
#[derive(Debug, Clone)]
pub struct PbEngine {
    topology: NodeTopology,
    columns: Vec<Vec<usize>>,
    state: PbState,
}

impl PbEngine {
    pub fn new(topology: NodeTopology, params: &ParamVector, seed: u64, now: f64) -> Self {
        let n = topology.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background_deadline = now + uniform(&mut rng, params.t_bg_min, params.t_bg_max);
        let sweep_deadline = now + uniform(&mut rng, params.t_sw_min, params.t_sw_max);
        let columns = topology.columns();
        Self {
            topology,
            columns,
            state: PbState {
                mode: Mode::Active,
                background_deadline,
                sweep_deadline,
                pending: Vec::new(),
                rng,
                last_readings: vec![0.0; n],
                refractory_until: vec![f64::NEG_INFINITY; n],
                next_cascade: 0,
                next_light_slot: f64::INFINITY,
                next_sma_slot: f64::INFINITY,
            },
        }
    }

    pub fn state(&self) -> &PbState {
        &self.state
    }

    pub fn topology(&self) -> &NodeTopology {
        &self.topology
    }

    /// Starts a cascade at `node`: the node's reflex fires now and every
    /// other node fires once, `t_gap_n` per hop of graph distance later.
    pub fn on_ir_trigger(
        &mut self,
        params: &ParamVector,
        node: usize,
        now: f64,
    ) -> Result<Vec<Activation>, PbError> {
        self.topology.check_node(node)?;
        let st = &mut self.state;
        st.mode = Mode::Active;
        st.next_light_slot = f64::INFINITY;
        st.next_sma_slot = f64::INFINITY;
        st.background_deadline = now + uniform(&mut st.rng, params.t_bg_min, params.t_bg_max);
        let cascade = st.next_cascade;
        st.next_cascade += 1;
        for (other, d) in self.topology.distances_from(node).into_iter().enumerate() {
            if let Some(d) = d.filter(|&d| d > 0) {
                let p = Pending { fire_time: now + d as f64 * params.t_gap_n, node: other, cascade };
                let at = st.pending.partition_point(|q| q.fire_time <= p.fire_time);
                st.pending.insert(at, p);
            }
        }
        local_reflex(params, node, now, ActivationEvent::Trigger)
    }

    /// LED sweep along the long axis. Columns fire `t_gap_n` apart.
    pub fn sweep(
        &self,
        params: &ParamVector,
        direction: SweepDirection,
        now: f64,
    ) -> Result<Vec<Activation>, PbError> {
        let peak = (params.i_max / 100.0).clamp(0.0, 1.0);
        let order: Vec<&Vec<usize>> = match direction {
            SweepDirection::LeftToRight => self.columns.iter().collect(),
            SweepDirection::RightToLeft => self.columns.iter().rev().collect(),
        };
        let mut out = Vec::new();
        for (j, column) in order.into_iter().enumerate() {
            let start = now + j as f64 * params.t_gap_n;
            for &node in column {
                let envelope = ActuatorEnvelope::ramp(
                    ActuatorKind::Led,
                    start,
                    params.t_ru_l,
                    params.t_ho_l,
                    params.t_rd_l,
                    peak,
                )?;
                out.push(Activation { t: start, node, sma: 0, event: ActivationEvent::Sweep, envelope });
            }
        }
        Ok(out)
    }

    /// Indices of sensors whose reading crossed the trigger threshold on a
    /// rising edge outside their refractory window.
    fn detect_triggers(&mut self, frame: &IrFrame, now: f64) -> Vec<usize> {
        let st = &mut self.state;
        let mut fired = Vec::new();
        for (i, &r) in frame.readings.iter().enumerate().take(st.last_readings.len()) {
            let prev = st.last_readings[i];
            if r >= TRIGGER_THRESHOLD && prev < TRIGGER_THRESHOLD && now >= st.refractory_until[i] {
                st.refractory_until[i] = now + TRIGGER_REFRACTORY_S;
                fired.push(i);
            }
            st.last_readings[i] = r;
        }
        fired
    }

    /// Advances the state machine to `now` given the latest IR frame.
    pub fn tick(
        &mut self,
        params: &ParamVector,
        frame: &IrFrame,
        now: f64,
    ) -> Result<Vec<Activation>, PbError> {
        if frame.readings.len() != self.topology.node_count() {
            return Err(PbError::FrameLength {
                got: frame.readings.len(),
                expected: self.topology.node_count(),
            });
        }
        let mut out = Vec::new();
        for node in self.detect_triggers(frame, now) {
            out.extend(self.on_ir_trigger(params, node, now)?);
        }

        let due = self.state.pending.partition_point(|p| p.fire_time <= now + DUE_EPS);
        let fired: Vec<Pending> = self.state.pending.drain(..due).collect();
        for p in fired {
            out.extend(local_reflex(params, p.node, p.fire_time, ActivationEvent::Cascade)?);
        }

        if self.state.mode == Mode::Active && now + DUE_EPS >= self.state.background_deadline {
            self.state.mode = Mode::Background;
            self.state.next_light_slot = now + params.t_w.max(TICK_S);
            self.state.next_sma_slot = now + params.t_sma.max(TICK_S);
        }

        if self.state.mode == Mode::Background {
            out.extend(self.background_slots(params, now)?);
        }

        if now + DUE_EPS >= self.state.sweep_deadline {
            let direction = if self.state.rng.random_bool(0.5) {
                SweepDirection::LeftToRight
            } else {
                SweepDirection::RightToLeft
            };
            out.extend(self.sweep(params, direction, now)?);
            self.state.sweep_deadline = now + uniform(&mut self.state.rng, params.t_sw_min, params.t_sw_max);
        }
        Ok(out)
    }

    fn background_slots(&mut self, params: &ParamVector, now: f64) -> Result<Vec<Activation>, PbError> {
        let n = self.topology.node_count();
        let p = params.p.clamp(0.0, 1.0);
        let peak = (params.i_max / 100.0).clamp(0.0, 1.0);
        let mut out = Vec::new();
        while self.state.next_light_slot <= now + DUE_EPS {
            let t = self.state.next_light_slot;
            for node in 0..n {
                if self.state.rng.random_bool(p) {
                    let envelope = ActuatorEnvelope::ramp(
                        ActuatorKind::Moth,
                        t,
                        params.t_ru_m,
                        params.t_ho_m,
                        params.t_rd_m,
                        peak,
                    )?;
                    out.push(Activation { t, node, sma: 0, event: ActivationEvent::Background, envelope });
                }
                if self.state.rng.random_bool(p) {
                    let envelope = ActuatorEnvelope::ramp(
                        ActuatorKind::Led,
                        t,
                        params.t_ru_l,
                        params.t_ho_l,
                        params.t_rd_l,
                        peak,
                    )?;
                    out.push(Activation { t, node, sma: 0, event: ActivationEvent::Background, envelope });
                }
            }
            self.state.next_light_slot += params.t_w.max(TICK_S);
        }
        while self.state.next_sma_slot <= now + DUE_EPS {
            let t = self.state.next_sma_slot;
            for node in 0..n {
                for k in 0..SMAS_PER_NODE {
                    if self.state.rng.random_bool(p) {
                        out.push(Activation {
                            t,
                            node,
                            sma: k,
                            event: ActivationEvent::Background,
                            envelope: ActuatorEnvelope::sma_pulse(t, 0.0),
                        });
                    }
                }
            }
            self.state.next_sma_slot += params.t_sma.max(TICK_S);
        }
        Ok(out)
    }
}

/// Registers activations on the sculpture, returning log records that note
/// which ones the hardware model refused.
pub fn apply_activations(
    sculpture: &mut SculptureState,
    activations: &[Activation],
) -> Result<Vec<ActivationRecord>, SculptureError> {
    activations
        .iter()
        .map(|a| Ok(a.record(sculpture.activate(a.node, a.sma, a.envelope)?)))
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pb::default_params;

    fn engine() -> PbEngine {
        PbEngine::new(NodeTopology::canonical(), &default_params(), 3, 0.0)
    }

    fn quiet(n: usize, t: f64) -> IrFrame {
        IrFrame::zeros(t, n)
    }

    /// Runs the engine tick by tick from `from` to `to` with no IR input.
    fn run_quiet(e: &mut PbEngine, params: &ParamVector, from_tick: u64, to_tick: u64) -> Vec<Activation> {
        let mut all = Vec::new();
        for k in from_tick..=to_tick {
            let t = k as f64 * TICK_S;
            all.extend(e.tick(params, &quiet(24, t), t).unwrap());
        }
        all
    }

    #[test]
    fn reflex_timing_with_defaults() {
        let acts = local_reflex(&default_params(), 0, 0.0, ActivationEvent::Trigger).unwrap();
        let led = acts.iter().find(|a| a.actuator() == ActuatorKind::Led).unwrap();
        assert_eq!(led.t, 1.5);
        let moth = acts.iter().find(|a| a.actuator() == ActuatorKind::Moth).unwrap();
        assert_eq!(moth.t, 0.0);
        assert_eq!(moth.envelope.peak, 0.78);
        let sma: Vec<f64> = acts.iter().filter(|a| a.actuator() == ActuatorKind::Sma).map(|a| a.t).collect();
        for (k, t) in sma.iter().enumerate() {
            assert!((t - 0.3 * k as f64).abs() < 1e-12);
        }
        assert_eq!(sma.len(), 6);
    }

    #[test]
    fn zero_moth_gap_starts_together() {
        let mut p = default_params();
        p.t_gap_m = 0.0;
        let acts = local_reflex(&p, 4, 2.0, ActivationEvent::Trigger).unwrap();
        assert_eq!(acts[0].t, acts[1].t);
    }

    #[test]
    fn corner_cascade_reaches_far_corner_at_fourteen_point_four() {
        let mut e = engine();
        let p = default_params();
        e.on_ir_trigger(&p, 0, 0.0).unwrap();
        let pending = e.state().pending_propagations();
        assert_eq!(pending.len(), 23);
        let (node, t) = *pending.last().unwrap();
        assert_eq!(node, 23);
        assert!((t - 14.4).abs() < 1e-12);
        let fired = run_quiet(&mut e, &p, 1, 150);
        let farthest = fired
            .iter()
            .filter(|a| a.node == 23 && a.actuator() == ActuatorKind::Moth && a.event == ActivationEvent::Cascade)
            .collect::<Vec<_>>();
        assert_eq!(farthest.len(), 1);
        assert!((farthest[0].t - 14.4).abs() < 1e-12);
    }

    #[test]
    fn zero_node_gap_fires_everything_now() {
        let mut e = engine();
        let mut p = default_params();
        p.t_gap_n = 0.0;
        e.on_ir_trigger(&p, 10, 5.0).unwrap();
        assert!(e.state().pending_propagations().iter().all(|&(_, t)| t == 5.0));
        let acts = e.tick(&p, &quiet(24, 5.0), 5.0).unwrap();
        let moth_nodes = acts.iter().filter(|a| a.actuator() == ActuatorKind::Moth).count();
        assert_eq!(moth_nodes, 23);
    }

    #[test]
    fn overlapping_cascades_are_independent() {
        let mut e = engine();
        let p = default_params();
        e.on_ir_trigger(&p, 0, 0.0).unwrap();
        e.on_ir_trigger(&p, 23, 0.1).unwrap();
        let fired = run_quiet(&mut e, &p, 1, 200);
        for node in 0..24 {
            let count = fired
                .iter()
                .filter(|a| a.node == node && a.actuator() == ActuatorKind::Moth)
                .count();
            // the two trigger nodes fire once as cascade members of the other trigger
            assert_eq!(count, if node == 0 || node == 23 { 1 } else { 2 }, "node {node}");
        }
    }

    #[test]
    fn rising_edge_with_refractory() {
        let mut e = engine();
        let p = default_params();
        let mut frame = quiet(24, 0.0);
        frame.readings[7] = 0.5;
        let a = e.tick(&p, &frame, 0.0).unwrap();
        assert!(a.iter().any(|x| x.node == 7 && x.event == ActivationEvent::Trigger));
        // still high: no new edge
        let b = e.tick(&p, &frame, 0.1).unwrap();
        assert!(!b.iter().any(|x| x.event == ActivationEvent::Trigger));
        // drop and rise again inside the refractory window
        e.tick(&p, &quiet(24, 0.2), 0.2).unwrap();
        let c = e.tick(&p, &frame, 0.3).unwrap();
        assert!(!c.iter().any(|x| x.event == ActivationEvent::Trigger));
        e.tick(&p, &quiet(24, 2.4), 2.4).unwrap();
        let d = e.tick(&p, &frame, 2.5).unwrap();
        assert!(d.iter().any(|x| x.node == 7 && x.event == ActivationEvent::Trigger));
    }

    #[test]
    fn silence_leads_to_background() {
        let mut e = engine();
        let p = default_params();
        assert_eq!(e.state().mode(), Mode::Active);
        let deadline = e.state().background_deadline();
        assert!((45.0..=90.0).contains(&deadline));
        run_quiet(&mut e, &p, 1, 901);
        assert_eq!(e.state().mode(), Mode::Background);
    }

    #[test]
    fn zero_probability_background_is_silent() {
        let mut p = default_params();
        p.p = 0.0;
        p.t_sw_min = 200.0;
        p.t_sw_max = 400.0;
        let mut e2 = PbEngine::new(NodeTopology::canonical(), &p, 3, 0.0);
        let acts = run_quiet(&mut e2, &p, 1, 1900);
        assert!(acts.iter().all(|a| a.event != ActivationEvent::Background));
    }

    #[test]
    fn certain_background_activates_every_slot() {
        let mut p = default_params();
        p.p = 1.0;
        p.t_w = 5.0;
        p.t_sma = 5.0;
        p.t_sw_min = 200.0;
        p.t_sw_max = 400.0;
        p.t_bg_min = 15.0;
        p.t_bg_max = 15.0;
        let mut e = PbEngine::new(NodeTopology::canonical(), &p, 11, 0.0);
        let acts = run_quiet(&mut e, &p, 1, 150);
        assert_eq!(e.state().mode(), Mode::Background);
        let acts: Vec<_> = acts.into_iter().chain(run_quiet(&mut e, &p, 151, 750)).collect();
        // window [15, 75): slots at 20, 25, ..., 75 => 12 slots in (15, 75]
        for node in [0, 13, 23] {
            for kind in [ActuatorKind::Moth, ActuatorKind::Led] {
                let n = acts
                    .iter()
                    .filter(|a| a.node == node && a.actuator() == kind && a.event == ActivationEvent::Background)
                    .filter(|a| a.t > 15.0 + 1e-9 && a.t <= 75.0 + 1e-9)
                    .count();
                assert_eq!(n, 12, "node {node} {kind:?}");
            }
        }
    }

    #[test]
    fn sweep_spacing_and_reversal() {
        let e = engine();
        let p = default_params();
        let ltr = e.sweep(&p, SweepDirection::LeftToRight, 0.0).unwrap();
        let rtl = e.sweep(&p, SweepDirection::RightToLeft, 0.0).unwrap();
        let last = ltr.iter().map(|a| a.t).fold(0.0, f64::max);
        assert!((last - 9.0).abs() < 1e-12);
        let first_nodes = |v: &[Activation]| {
            let mut cols: Vec<Vec<usize>> = Vec::new();
            let mut t_prev = f64::NAN;
            for a in v {
                if a.t != t_prev {
                    cols.push(Vec::new());
                    t_prev = a.t;
                }
                cols.last_mut().unwrap().push(a.node);
            }
            cols
        };
        let mut a = first_nodes(&ltr);
        a.reverse();
        assert_eq!(a, first_nodes(&rtl));
        assert_eq!(ltr.len(), 24);
    }

    #[test]
    fn single_column_sweep_is_simultaneous() {
        let topo = NodeTopology::grid(4, 1, 1.0).unwrap();
        let e = PbEngine::new(topo, &default_params(), 0, 0.0);
        let acts = e.sweep(&default_params(), SweepDirection::LeftToRight, 3.0).unwrap();
        assert_eq!(acts.len(), 4);
        assert!(acts.iter().all(|a| a.t == 3.0));
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let p = default_params();
        let run = || {
            let mut e = PbEngine::new(NodeTopology::canonical(), &p, 5, 0.0);
            let mut log = Vec::new();
            for k in 0..3000u64 {
                let t = k as f64 * TICK_S;
                let mut f = quiet(24, t);
                if k % 700 == 3 {
                    f.readings[(k % 24) as usize] = 0.4;
                }
                log.extend(e.tick(&p, &f, t).unwrap().into_iter().map(|a| (a.t.to_bits(), a.node, a.sma)));
            }
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn frame_length_checked() {
        let mut e = engine();
        assert!(e.tick(&default_params(), &quiet(23, 0.0), 0.0).is_err());
    }
}
