//! Structure-of-arrays CartPole with precomputed reciprocal constants.

use rayon::prelude::*;

use super::*;
use crate::env::{Backend, BatchEnv, EnvKind, EnvState, StepOutcome};

pub(crate) const LANES: usize = 256;

const INV_TOTAL_MASS: f32 = 1.0 / TOTAL_MASS;
const POLE_MASS_FRACTION: f32 = POLE_MASS / TOTAL_MASS;
const POLE_MASS_LENGTH_FRACTION: f32 = POLE_MASS_LENGTH / TOTAL_MASS;
const FORCE_BY_ACTION: [f32; 2] = [-FORCE_MAG, FORCE_MAG];

/// Arithmetic order of the batched dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Same operations in the same order as the reference; bit-exact.
    Reference,
    /// Divisions by constants folded into multiplications.
    #[default]
    Fast,
}

#[derive(Clone)]
struct Block<const N: usize> {
    x: [f32; N],
    x_dot: [f32; N],
    theta: [f32; N],
    theta_dot: [f32; N],
    step_count: [u32; N],
    rng: [u64; N],
}

impl<const N: usize> Block<N> {
    fn new() -> Self {
        Self { x: [0.0; N], x_dot: [0.0; N], theta: [0.0; N], theta_dot: [0.0; N], step_count: [0; N], rng: [0; N] }
    }

    fn reset_lane(&mut self, i: usize, stream: RngState) {
        let (rng, x) = reset_component(stream);
        let (rng, x_dot) = reset_component(rng);
        let (rng, theta) = reset_component(rng);
        let (rng, theta_dot) = reset_component(rng);
        self.x[i] = x;
        self.x_dot[i] = x_dot;
        self.theta[i] = theta;
        self.theta_dot[i] = theta_dot;
        self.step_count[i] = 0;
        self.rng[i] = rng.counter;
    }

    fn load(&mut self, i: usize, s: &CartPoleState) {
        self.x[i] = s.x;
        self.x_dot[i] = s.x_dot;
        self.theta[i] = s.theta;
        self.theta_dot[i] = s.theta_dot;
        self.step_count[i] = s.step_count;
        self.rng[i] = s.rng.counter;
    }

    fn get(&self, i: usize) -> CartPoleState {
        CartPoleState {
            x: self.x[i],
            x_dot: self.x_dot[i],
            theta: self.theta[i],
            theta_dot: self.theta_dot[i],
            step_count: self.step_count[i],
            rng: RngState::new(self.rng[i]),
        }
    }

    #[inline(always)]
    fn write_obs(&self, i: usize, row: &mut [f32]) {
        row[0] = self.x[i];
        row[1] = self.x_dot[i];
        row[2] = self.theta[i];
        row[3] = self.theta_dot[i];
    }

    fn step(&mut self, arith: Arithmetic, actions: &[u32], obs: &mut [f32], rewards: &mut [f32], dones: &mut [bool]) {
        let n = actions.len();
        assert!(n <= N && rewards.len() == n && dones.len() == n && obs.len() == n * OBS_LEN);

        for i in 0..n {
            let force = FORCE_BY_ACTION[(actions[i] as usize).min(1)];
            let (x, x_dot, theta, theta_dot) = (self.x[i], self.x_dot[i], self.theta[i], self.theta_dot[i]);
            let cos = theta.cos();
            let sin = theta.sin();
            let (theta_acc, x_acc) = match arith {
                Arithmetic::Reference => {
                    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
                    let theta_acc = (GRAVITY * sin - cos * temp)
                        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
                    (theta_acc, temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS)
                }
                Arithmetic::Fast => {
                    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) * INV_TOTAL_MASS;
                    let theta_acc = (GRAVITY * sin - cos * temp)
                        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS_FRACTION * cos * cos));
                    (theta_acc, temp - POLE_MASS_LENGTH_FRACTION * theta_acc * cos)
                }
            };
            let x = x + TAU * x_dot;
            let theta = theta + TAU * theta_dot;
            self.x[i] = x;
            self.x_dot[i] = x_dot + TAU * x_acc;
            self.theta[i] = theta;
            self.theta_dot[i] = theta_dot + TAU * theta_acc;
            self.step_count[i] += 1;
            rewards[i] = 1.0;
            dones[i] = is_terminal(x, theta, self.step_count[i]);
        }

        for (i, row) in obs.chunks_exact_mut(OBS_LEN).enumerate() {
            self.write_obs(i, row);
        }
    }
}

fn validate_actions(actions: &[u32]) -> Result<(), EnvError> {
    match actions.iter().find(|&&a| a >= ACTION_COUNT) {
        Some(&action) => Err(EnvError::InvalidAction { action, action_count: ACTION_COUNT }),
        None => Ok(()),
    }
}

/// A batch of CartPole instances with pre-allocated output buffers.
pub struct CartPoleBatch {
    arith: Arithmetic,
    blocks: Vec<Box<Block<LANES>>>,
    len: usize,
    observations: Vec<f32>,
    rewards: Vec<f32>,
    dones: Vec<bool>,
}

impl CartPoleBatch {
    fn with_len(arith: Arithmetic, len: usize) -> Self {
        Self {
            arith,
            blocks: (0..len.div_ceil(LANES)).map(|_| Box::new(Block::new())).collect(),
            len,
            observations: vec![0.0; len * OBS_LEN],
            rewards: vec![0.0; len],
            dones: vec![false; len],
        }
    }

    pub fn new(arith: Arithmetic, streams: &[RngState]) -> Self {
        let mut batch = Self::with_len(arith, streams.len());
        for (i, &stream) in streams.iter().enumerate() {
            batch.blocks[i / LANES].reset_lane(i % LANES, stream);
            batch.refresh_obs(i);
        }
        batch
    }

    pub fn from_states(arith: Arithmetic, states: &[CartPoleState]) -> Self {
        let mut batch = Self::with_len(arith, states.len());
        for (i, s) in states.iter().enumerate() {
            batch.blocks[i / LANES].load(i % LANES, s);
            batch.refresh_obs(i);
        }
        batch
    }

    fn refresh_obs(&mut self, i: usize) {
        let row = &mut self.observations[i * OBS_LEN..(i + 1) * OBS_LEN];
        self.blocks[i / LANES].write_obs(i % LANES, row);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn state(&self, i: usize) -> CartPoleState {
        assert!(i < self.len, "instance {i} out of range for batch of {}", self.len);
        self.blocks[i / LANES].get(i % LANES)
    }

    pub fn step(&mut self, actions: &[u32]) -> Result<(), EnvError> {
        if actions.len() != self.len {
            return Err(EnvError::BatchLength { states: self.len, actions: actions.len() });
        }
        validate_actions(actions)?;
        let arith = self.arith;
        if self.blocks.len() <= 1 {
            for block in &mut self.blocks {
                block.step(arith, actions, &mut self.observations, &mut self.rewards, &mut self.dones);
            }
            return Ok(());
        }
        self.blocks
            .par_iter_mut()
            .zip(actions.par_chunks(LANES))
            .zip(self.observations.par_chunks_mut(LANES * OBS_LEN))
            .zip(self.rewards.par_chunks_mut(LANES))
            .zip(self.dones.par_chunks_mut(LANES))
            .for_each(|((((block, a), o), r), d)| block.step(arith, a, o, r, d));
        Ok(())
    }

    pub fn observations(&self) -> &[f32] {
        &self.observations
    }

    pub fn rewards(&self) -> &[f32] {
        &self.rewards
    }

    pub fn dones(&self) -> &[bool] {
        &self.dones
    }
}

impl BatchEnv for CartPoleBatch {
    fn len(&self) -> usize {
        self.len
    }

    fn obs_len(&self) -> usize {
        OBS_LEN
    }

    fn step(&mut self, actions: &[u32]) -> Result<(), EnvError> {
        CartPoleBatch::step(self, actions)
    }

    fn reset_done(&mut self) {
        for i in 0..self.len {
            if self.dones[i] {
                let block = &mut self.blocks[i / LANES];
                let stream = RngState::new(block.rng[i % LANES]);
                block.reset_lane(i % LANES, stream);
                self.refresh_obs(i);
                self.dones[i] = false;
            }
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
        EnvState::CartPole(CartPoleBatch::state(self, index))
    }
}

/// The batched performance backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct CartPolePerf {
    arith: Arithmetic,
}

impl CartPolePerf {
    pub const ID: &'static str = "cartpole-perf";
    pub const EXACT_ID: &'static str = "cartpole-perf-exact";

    pub fn new(arith: Arithmetic) -> Self {
        Self { arith }
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arith
    }
}

impl Backend for CartPolePerf {
    fn id(&self) -> &str {
        match self.arith {
            Arithmetic::Fast => Self::ID,
            Arithmetic::Reference => Self::EXACT_ID,
        }
    }

    fn kind(&self) -> EnvKind {
        EnvKind::CartPole
    }

    fn reset(&self, stream: RngState) -> (EnvState, Vec<f32>) {
        let mut block = Block::<1>::new();
        block.reset_lane(0, stream);
        let s = block.get(0);
        let obs = s.observation().to_vec();
        (EnvState::CartPole(s), obs)
    }

    fn step(&self, state: &EnvState, action: u32) -> Result<(EnvState, StepOutcome), EnvError> {
        let state = state.as_cartpole()?;
        validate_actions(&[action])?;
        let mut block = Block::<1>::new();
        block.load(0, state);
        let mut obs = vec![0.0; OBS_LEN];
        let mut reward = [0.0];
        let mut done = [false];
        block.step(self.arith, &[action], &mut obs, &mut reward, &mut done);
        Ok((EnvState::CartPole(block.get(0)), StepOutcome { observation: obs, reward: reward[0], done: done[0] }))
    }

    fn batch(&self, streams: &[RngState]) -> Box<dyn BatchEnv> {
        Box::new(CartPoleBatch::new(self.arith, streams))
    }
}
