//! Grip-release decision engines evaluated sample-by-sample on a 120 Hz
//! stream: the hybrid GR 2.0 rule (classifier for heavy objects, pull
//! threshold for light ones), a load-share baseline, and a pull-force
//! baseline. Every engine latches its release decision.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::HandoverRecord;
use crate::model::{ForwardMode, GripWindow, VaeLstmModel, WINDOW_STEPS};
use crate::{Error, Result, GRAVITY};

/// Per-tick latency budget at 120 Hz, milliseconds.
pub const TICK_BUDGET_MS: f64 = 8.333;

/// Which interaction-force component carries the pull.
///
/// The transfer axis is z by convention; y is selectable because some
/// sensor mountings swap the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PullAxis {
    Z,
    Y,
}

/// Sensor-frame options shared by all strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub pull_axis: PullAxis,
    /// True when positive loadshare force F_y means the taker supports the
    /// object; false flips the sign convention.
    pub taker_load_positive: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            pull_axis: PullAxis::Z,
            taker_load_positive: true,
        }
    }
}

/// The three grip-release strategies.
#[derive(Debug, Clone)]
pub enum StrategyKind {
    /// Hybrid rule: classifier for objects at or above the cutover weight,
    /// pull threshold below it.
    Gr2 {
        model: VaeLstmModel,
        light_threshold_n: f64,
        weight_cutover_kg: f64,
    },
    /// Release when the giver's supported fraction of the weight force
    /// falls below `fraction`.
    LoadShare { fraction: f64 },
    /// Release when the pull force along the transfer axis exceeds the
    /// threshold (measured as change from the engine-start baseline).
    PullForce { threshold_n: f64 },
}

impl StrategyKind {
    pub fn gr2(model: VaeLstmModel) -> Self {
        StrategyKind::Gr2 {
            model,
            light_threshold_n: 4.0,
            weight_cutover_kg: 0.8,
        }
    }

    pub fn load_share() -> Self {
        StrategyKind::LoadShare { fraction: 0.5 }
    }

    pub fn pull_force() -> Self {
        StrategyKind::PullForce { threshold_n: 4.0 }
    }

    pub fn tag(&self) -> StrategyTag {
        match self {
            StrategyKind::Gr2 { .. } => StrategyTag::Gr2,
            StrategyKind::LoadShare { .. } => StrategyTag::LoadShare,
            StrategyKind::PullForce { .. } => StrategyTag::PullForce,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyKind::Gr2 {
                model,
                light_threshold_n,
                weight_cutover_kg,
            } => {
                model.validate()?;
                if !(*light_threshold_n > 0.0) {
                    return Err(Error::Parameter("light threshold must be positive".into()));
                }
                if !(*weight_cutover_kg > 0.0) {
                    return Err(Error::Parameter("weight cutover must be positive".into()));
                }
            }
            StrategyKind::LoadShare { fraction } => {
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(Error::Parameter(
                        "load-share fraction must be in (0, 1)".into(),
                    ));
                }
            }
            StrategyKind::PullForce { threshold_n } => {
                if !(*threshold_n > 0.0) {
                    return Err(Error::Parameter("pull threshold must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Strategy identity without the model payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyTag {
    Gr2,
    LoadShare,
    PullForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Hold,
    Release,
}

/// Outcome of one engine tick.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub decision: Decision,
    /// Classifier probability, present on GR 2.0 heavy-path ticks with a
    /// full buffer.
    pub model_p: Option<f64>,
}

/// One strategy engine bound to one handover stream.
#[derive(Debug, Clone)]
pub struct Engine {
    kind: StrategyKind,
    config: EngineConfig,
    weight_kg: f64,
    baseline: Option<f64>,
    buffer: VecDeque<[f64; 3]>,
    released: bool,
}

impl Engine {
    pub fn new(kind: StrategyKind, weight_kg: f64, config: EngineConfig) -> Result<Engine> {
        kind.validate()?;
        if !(weight_kg > 0.0 && weight_kg.is_finite()) {
            return Err(Error::Parameter(format!(
                "object weight {weight_kg} kg must be positive"
            )));
        }
        Ok(Engine {
            kind,
            config,
            weight_kg,
            baseline: None,
            buffer: VecDeque::with_capacity(WINDOW_STEPS),
            released: false,
        })
    }

    pub fn weight_kg(&self) -> f64 {
        self.weight_kg
    }

    fn pull_component(&self, fy: f64, fz: f64) -> f64 {
        match self.config.pull_axis {
            PullAxis::Z => fz,
            PullAxis::Y => fy,
        }
    }

    /// Giver-supported vertical load inferred from the loadshare force.
    fn giver_load_n(&self, fy: f64) -> f64 {
        let sign = if self.config.taker_load_positive {
            1.0
        } else {
            -1.0
        };
        0.5 * self.weight_kg * GRAVITY - sign * fy
    }

    /// Giver-supported fraction of the weight force.
    pub fn load_fraction(&self, fy: f64) -> f64 {
        self.giver_load_n(fy) / (self.weight_kg * GRAVITY)
    }

    /// Consumes one force sample. Samples must arrive in stream order.
    pub fn step(&mut self, fy: f64, fz: f64) -> Result<StepOutcome> {
        let baseline = *self.baseline.get_or_insert(self.pull_component(fy, fz));
        let mut model_p = None;
        let release = match &self.kind {
            StrategyKind::PullForce { threshold_n } => {
                self.pull_component(fy, fz) - baseline > *threshold_n
            }
            StrategyKind::LoadShare { fraction } => {
                self.giver_load_n(fy) < fraction * self.weight_kg * GRAVITY
            }
            StrategyKind::Gr2 {
                model,
                light_threshold_n,
                weight_cutover_kg,
            } => {
                if self.weight_kg < *weight_cutover_kg {
                    self.pull_component(fy, fz) - baseline > *light_threshold_n
                } else {
                    if self.buffer.len() == WINDOW_STEPS {
                        self.buffer.pop_front();
                    }
                    self.buffer.push_back([fy, fz, self.weight_kg]);
                    if self.buffer.len() < WINDOW_STEPS {
                        // Warm-up: hold until a full window exists.
                        false
                    } else {
                        let window = GripWindow {
                            series: self.buffer.iter().copied().collect(),
                            t_e: 0,
                            label: 0,
                        };
                        let out = model.forward(&window, ForwardMode::Eval)?;
                        model_p = Some(out.p);
                        out.p >= 0.5
                    }
                }
            }
        };
        if release {
            self.released = true;
        }
        Ok(StepOutcome {
            decision: if self.released {
                Decision::Release
            } else {
                Decision::Hold
            },
            model_p,
        })
    }
}

/// One tick of a recorded decision trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub fy: f64,
    pub fz: f64,
    pub load_share_fraction: f64,
    pub model_p: Option<f64>,
    pub decision: Decision,
    pub compute_time_us: f64,
}

/// Release tick another strategy would have produced on the same record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counterfactual {
    pub strategy: StrategyTag,
    pub release_tick: Option<usize>,
}

/// Full per-record decision log for one strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub strategy: StrategyTag,
    pub ticks: Vec<TickRecord>,
    pub release_tick: Option<usize>,
    pub counterfactuals: Vec<Counterfactual>,
}

fn run_engine(
    kind: &StrategyKind,
    record: &HandoverRecord,
    config: EngineConfig,
) -> Result<(Vec<TickRecord>, Option<usize>)> {
    let forces = record.forces()?;
    let mut engine = Engine::new(kind.clone(), record.weight_kg(), config)?;
    let mut ticks = Vec::with_capacity(forces.interaction.len());
    let mut release_tick = None;
    for (i, s) in forces.interaction.iter().enumerate() {
        let (fy, fz) = (s.force.y, s.force.z);
        let start = Instant::now();
        let out = engine.step(fy, fz)?;
        let compute_time_us = start.elapsed().as_secs_f64() * 1e6;
        if out.decision == Decision::Release && release_tick.is_none() {
            release_tick = Some(i);
        }
        ticks.push(TickRecord {
            tick: i,
            fy,
            fz,
            load_share_fraction: engine.load_fraction(fy),
            model_p: out.model_p,
            decision: out.decision,
            compute_time_us,
        });
    }
    Ok((ticks, release_tick))
}

/// Replays a segmented record through `strategy`, recording every tick and
/// the counterfactual release ticks of the other strategies.
///
/// The counterfactual set always contains the two baselines at their
/// default thresholds; the classifier counterfactual is included only when
/// `strategy` itself carries a model.
pub fn run_trace(
    strategy: &StrategyKind,
    record: &HandoverRecord,
    config: EngineConfig,
) -> Result<DecisionTrace> {
    strategy.validate()?;
    let (ticks, release_tick) = run_engine(strategy, record, config)?;
    let mut others: Vec<StrategyKind> = Vec::new();
    for candidate in [StrategyKind::load_share(), StrategyKind::pull_force()] {
        if candidate.tag() != strategy.tag() {
            others.push(candidate);
        }
    }
    let mut counterfactuals = Vec::new();
    for other in &others {
        let (_, tick) = run_engine(other, record, config)?;
        counterfactuals.push(Counterfactual {
            strategy: other.tag(),
            release_tick: tick,
        });
    }
    Ok(DecisionTrace {
        strategy: strategy.tag(),
        ticks,
        release_tick,
        counterfactuals,
    })
}

/// Per-trace latency summary against the 120 Hz budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyReport {
    pub budget_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub pass: bool,
}

/// Summarizes per-tick compute times; an empty trace passes vacuously.
pub fn latency_audit(trace: &DecisionTrace, budget_ms: f64) -> LatencyReport {
    if trace.ticks.is_empty() {
        return LatencyReport {
            budget_ms,
            max_ms: 0.0,
            mean_ms: 0.0,
            p99_ms: 0.0,
            pass: true,
        };
    }
    let mut times_ms: Vec<f64> = trace
        .ticks
        .iter()
        .map(|t| t.compute_time_us / 1000.0)
        .collect();
    times_ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = times_ms.len();
    let max_ms = times_ms[n - 1];
    let mean_ms = times_ms.iter().sum::<f64>() / n as f64;
    let p99_ms = times_ms[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
    LatencyReport {
        budget_ms,
        max_ms,
        mean_ms,
        p99_ms,
        pass: max_ms < budget_ms,
    }
}

#[derive(Debug, Deserialize)]
struct TickRequest {
    fy: f64,
    fz: f64,
    w: f64,
}

#[derive(Debug, Serialize)]
struct TickResponse {
    decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
}

/// Serves one handover stream on an accepted connection: one JSON request
/// per line, one JSON response per line. The engine is created from the
/// first request's weight and dropped when the peer closes.
pub fn handle_connection(
    stream: TcpStream,
    kind: &StrategyKind,
    config: EngineConfig,
) -> Result<()> {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "peer".into());
    let mut writer = stream
        .try_clone()
        .map_err(|e| Error::io(peer.clone(), e))?;
    let reader = BufReader::new(stream);
    let mut engine: Option<Engine> = None;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(peer.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let req: TickRequest = serde_json::from_str(&line)
            .map_err(|e| Error::format(peer.clone(), format!("bad tick request: {e}")))?;
        let engine = match &mut engine {
            Some(e) => e,
            None => engine.insert(Engine::new(kind.clone(), req.w, config)?),
        };
        let out = engine.step(req.fy, req.fz)?;
        let resp = TickResponse {
            decision: out.decision,
            p: out.model_p,
        };
        let mut bytes = serde_json::to_vec(&resp)
            .map_err(|e| Error::format(peer.clone(), e.to_string()))?;
        bytes.push(b'\n');
        writer
            .write_all(&bytes)
            .map_err(|e| Error::io(peer.clone(), e))?;
    }
    Ok(())
}

/// Accept loop: one thread and one fresh engine per connection.
pub fn serve(listener: TcpListener, kind: StrategyKind, config: EngineConfig) -> Result<()> {
    kind.validate()?;
    for stream in listener.incoming() {
        let stream = stream.map_err(|e| Error::io("listener", e))?;
        let kind = kind.clone();
        std::thread::spawn(move || {
            if let Err(e) = handle_connection(stream, &kind, config) {
                eprintln!("connection error: {e}");
            }
        });
    }
    Ok(())
}
