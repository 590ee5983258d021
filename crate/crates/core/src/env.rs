//! The environment contract shared by reference and performance backends.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cartpole::{self, CartPoleState};
use crate::pong::{self, PongState};
use crate::rng::RngState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid action {action} (action space has {action_count} actions)")]
    InvalidAction { action: u32, action_count: u32 },
    #[error("batch length mismatch: {states} states, {actions} actions")]
    BatchLength { states: usize, actions: usize },
    #[error("backend for {expected} received a {found} state")]
    WrongEnv { expected: EnvKind, found: EnvKind },
    #[error("unknown field path `{0}`")]
    UnknownField(String),
    #[error("field `{path}` cannot hold value {value}")]
    FieldType { path: String, value: Value },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pong,
    #[serde(rename = "cartpole")]
    CartPole,
}

impl EnvKind {
    pub const fn name(self) -> &'static str {
        match self {
            EnvKind::Pong => "pong",
            EnvKind::CartPole => "cartpole",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "pong" => Some(EnvKind::Pong),
            "cartpole" => Some(EnvKind::CartPole),
            _ => None,
        }
    }

    pub const fn obs_names(self) -> &'static [&'static str] {
        match self {
            EnvKind::Pong => &pong::OBS_NAMES,
            EnvKind::CartPole => &cartpole::OBS_NAMES,
        }
    }

    pub const fn obs_len(self) -> usize {
        self.obs_names().len()
    }

    pub const fn action_count(self) -> u32 {
        match self {
            EnvKind::Pong => pong::ACTION_COUNT,
            EnvKind::CartPole => cartpole::ACTION_COUNT,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar field value addressed by a dotted path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f32),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Bool(b) => b as u8 as f64,
            Value::Int(i) => i as f64,
            Value::Real(r) => r as f64,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
        }
    }
}

/// How two 32-bit outputs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComparisonMode {
    /// Bit-identical `f32` representations.
    Exact,
    /// Per-component absolute difference at most `epsilon` (L-infinity).
    Epsilon { epsilon: f32 },
}

impl ComparisonMode {
    pub fn epsilon(epsilon: f32) -> Self {
        assert!(epsilon >= 0.0, "epsilon must be nonnegative");
        ComparisonMode::Epsilon { epsilon }
    }

    #[inline]
    pub fn reals_match(self, a: f32, b: f32) -> bool {
        if a.to_bits() == b.to_bits() {
            return true;
        }
        match self {
            ComparisonMode::Exact => false,
            ComparisonMode::Epsilon { epsilon } => (a - b).abs() <= epsilon,
        }
    }

    /// Reals compare under the mode; integers and booleans always exactly.
    pub fn values_match(self, a: Value, b: Value) -> bool {
        match (a, b) {
            (Value::Real(x), Value::Real(y)) => self.reals_match(x, y),
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (Value::Int(x), Value::Int(y)) => x == y,
            (Value::Real(x), Value::Int(y)) | (Value::Int(y), Value::Real(x)) => {
                self.reals_match(x, y as f32) && (x as f64).fract() == 0.0
            }
            _ => false,
        }
    }

    pub fn label(self) -> String {
        match self {
            ComparisonMode::Exact => "exact".to_owned(),
            ComparisonMode::Epsilon { epsilon } => format!("epsilon ({epsilon:e})"),
        }
    }
}

/// Observation, reward and termination of one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Vec<f32>,
    pub reward: f32,
    pub done: bool,
}

impl StepOutcome {
    /// Resolves `reward`, `done` or `observation.<name>`.
    pub fn field(&self, kind: EnvKind, path: &str) -> Option<Value> {
        match path {
            "reward" => Some(Value::Real(self.reward)),
            "done" => Some(Value::Bool(self.done)),
            _ => {
                let name = path.strip_prefix("observation.")?;
                let idx = kind.obs_names().iter().position(|n| *n == name)?;
                self.observation.get(idx).copied().map(Value::Real)
            }
        }
    }
}

/// Full simulator state of one environment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "lowercase")]
pub enum EnvState {
    Pong(PongState),
    #[serde(rename = "cartpole")]
    CartPole(CartPoleState),
}

impl EnvState {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvState::Pong(_) => EnvKind::Pong,
            EnvState::CartPole(_) => EnvKind::CartPole,
        }
    }

    /// All state fields in schema order.
    pub fn fields(&self) -> Vec<(&'static str, Value)> {
        match self {
            EnvState::Pong(s) => s.fields().to_vec(),
            EnvState::CartPole(s) => s.fields().to_vec(),
        }
    }

    pub fn field(&self, path: &str) -> Option<Value> {
        self.fields().into_iter().find(|(n, _)| *n == path).map(|(_, v)| v)
    }

    pub fn set_field(&mut self, path: &str, value: Value) -> Result<(), EnvError> {
        match self {
            EnvState::Pong(s) => s.set_field(path, value),
            EnvState::CartPole(s) => s.set_field(path, value),
        }
    }

    pub fn as_pong(&self) -> Result<&PongState, EnvError> {
        match self {
            EnvState::Pong(s) => Ok(s),
            other => Err(EnvError::WrongEnv { expected: EnvKind::Pong, found: other.kind() }),
        }
    }

    pub fn as_cartpole(&self) -> Result<&CartPoleState, EnvError> {
        match self {
            EnvState::CartPole(s) => Ok(s),
            other => Err(EnvError::WrongEnv { expected: EnvKind::CartPole, found: other.kind() }),
        }
    }
}

/// Every resolvable field path of an environment: state fields, then outcome fields.
pub fn field_paths(kind: EnvKind) -> Vec<String> {
    let state_fields: Vec<&str> = match kind {
        EnvKind::Pong => pong::STATE_FIELDS.to_vec(),
        EnvKind::CartPole => cartpole::STATE_FIELDS.to_vec(),
    };
    let mut paths: Vec<String> = state_fields.into_iter().map(str::to_owned).collect();
    paths.push("reward".to_owned());
    paths.push("done".to_owned());
    paths.extend(kind.obs_names().iter().map(|n| format!("observation.{n}")));
    paths
}

pub(crate) fn real_field(path: &str, value: Value) -> Result<f32, EnvError> {
    match value {
        Value::Real(r) => Ok(r),
        Value::Int(i) => Ok(i as f32),
        v => Err(EnvError::FieldType { path: path.to_owned(), value: v }),
    }
}

pub(crate) fn int_field(path: &str, value: Value) -> Result<i64, EnvError> {
    match value {
        Value::Int(i) if i >= 0 => Ok(i),
        v => Err(EnvError::FieldType { path: path.to_owned(), value: v }),
    }
}

/// A single-environment transition function plus a factory for batched instances.
///
/// `step` must be pure: identical `(state, action)` gives bit-identical results
/// on every call and every thread.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn kind(&self) -> EnvKind;

    fn reset(&self, stream: RngState) -> (EnvState, Vec<f32>);

    fn step(&self, state: &EnvState, action: u32) -> Result<(EnvState, StepOutcome), EnvError>;

    /// Creates `streams.len()` instances, each reset from its own stream.
    fn batch(&self, streams: &[RngState]) -> Box<dyn BatchEnv>;

    fn obs_len(&self) -> usize {
        self.kind().obs_len()
    }

    fn action_count(&self) -> u32 {
        self.kind().action_count()
    }
}

/// A batch of environment instances with pre-allocated output buffers.
pub trait BatchEnv: Send {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn obs_len(&self) -> usize;

    /// Steps every instance; outputs land in the buffers below.
    fn step(&mut self, actions: &[u32]) -> Result<(), EnvError>;

    /// Resets every instance whose last step finished its episode, continuing
    /// from that instance's own stream.
    fn reset_done(&mut self);

    /// Row-major `len() * obs_len()` observations.
    fn observations(&self) -> &[f32];

    fn rewards(&self) -> &[f32];

    fn dones(&self) -> &[bool];

    fn state(&self, index: usize) -> EnvState;
}

/// Runs a scalar backend over a batch, one instance at a time.
pub struct SerialBatch<B> {
    backend: B,
    states: Vec<EnvState>,
    observations: Vec<f32>,
    rewards: Vec<f32>,
    dones: Vec<bool>,
}

impl<B: Backend> SerialBatch<B> {
    pub fn new(backend: B, streams: &[RngState]) -> Self {
        let obs_len = backend.obs_len();
        let mut observations = vec![0.0; streams.len() * obs_len];
        let mut states = Vec::with_capacity(streams.len());
        for (i, &stream) in streams.iter().enumerate() {
            let (state, obs) = backend.reset(stream);
            observations[i * obs_len..(i + 1) * obs_len].copy_from_slice(&obs);
            states.push(state);
        }
        Self {
            backend,
            rewards: vec![0.0; states.len()],
            dones: vec![false; states.len()],
            states,
            observations,
        }
    }
}

impl<B: Backend> BatchEnv for SerialBatch<B> {
    fn len(&self) -> usize {
        self.states.len()
    }

    fn obs_len(&self) -> usize {
        self.backend.obs_len()
    }

    fn step(&mut self, actions: &[u32]) -> Result<(), EnvError> {
        if actions.len() != self.states.len() {
            return Err(EnvError::BatchLength { states: self.states.len(), actions: actions.len() });
        }
        let obs_len = self.backend.obs_len();
        for (i, &action) in actions.iter().enumerate() {
            let (next, outcome) = self.backend.step(&self.states[i], action)?;
            self.states[i] = next;
            self.observations[i * obs_len..(i + 1) * obs_len].copy_from_slice(&outcome.observation);
            self.rewards[i] = outcome.reward;
            self.dones[i] = outcome.done;
        }
        Ok(())
    }

    fn reset_done(&mut self) {
        let obs_len = self.backend.obs_len();
        for i in 0..self.states.len() {
            if !self.dones[i] {
                continue;
            }
            let stream = match &self.states[i] {
                EnvState::Pong(s) => s.rng,
                EnvState::CartPole(s) => s.rng,
            };
            let (state, obs) = self.backend.reset(stream);
            self.states[i] = state;
            self.observations[i * obs_len..(i + 1) * obs_len].copy_from_slice(&obs);
            self.dones[i] = false;
        }
    }

    fn observations(&self) -> &[f32] {
        &self.observations
    }

    fn rewards(&self) -> &[f32] {
        &self.rewards
    }

    fn dones(&self) -> &[bool] {
        &self.dones
    }

    fn state(&self, index: usize) -> EnvState {
        self.states[index].clone()
    }
}
