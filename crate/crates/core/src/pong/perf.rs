//! Structure-of-arrays Pong. Lanes are grouped in fixed-size blocks so the hot
//! loop is branch-free over plain arrays and blocks can be stepped in parallel.

use rayon::prelude::*;

use super::*;
use crate::env::{Backend, BatchEnv, EnvKind, EnvState, StepOutcome};

pub(crate) const LANES: usize = 256;

#[inline(always)]
fn select(cond: bool, a: f32, b: f32) -> f32 {
    if cond {
        a
    } else {
        b
    }
}

#[derive(Clone)]
struct Block<const N: usize> {
    ball_x: [f32; N],
    ball_y: [f32; N],
    ball_vx: [f32; N],
    ball_vy: [f32; N],
    player_y: [f32; N],
    opponent_y: [f32; N],
    player_points: [u32; N],
    opponent_points: [u32; N],
    step_count: [u32; N],
    rng: [u64; N],
    scored: [bool; N],
}

impl<const N: usize> Block<N> {
    fn new() -> Self {
        Self {
            ball_x: [0.5; N],
            ball_y: [0.5; N],
            ball_vx: [-BALL_VX; N],
            ball_vy: [0.0; N],
            player_y: [0.5; N],
            opponent_y: [0.5; N],
            player_points: [0; N],
            opponent_points: [0; N],
            step_count: [0; N],
            rng: [0; N],
            scored: [false; N],
        }
    }

    fn reset_lane(&mut self, i: usize, stream: RngState) {
        let (rng, vy) = serve_vy(stream);
        self.ball_x[i] = 0.5;
        self.ball_y[i] = 0.5;
        self.ball_vx[i] = -BALL_VX;
        self.ball_vy[i] = vy;
        self.player_y[i] = 0.5;
        self.opponent_y[i] = 0.5;
        self.player_points[i] = 0;
        self.opponent_points[i] = 0;
        self.step_count[i] = 0;
        self.rng[i] = rng.counter;
    }

    fn load(&mut self, i: usize, s: &PongState) {
        self.ball_x[i] = s.ball_x;
        self.ball_y[i] = s.ball_y;
        self.ball_vx[i] = s.ball_vx;
        self.ball_vy[i] = s.ball_vy;
        self.player_y[i] = s.player_y;
        self.opponent_y[i] = s.opponent_y;
        self.player_points[i] = s.player_points;
        self.opponent_points[i] = s.opponent_points;
        self.step_count[i] = s.step_count;
        self.rng[i] = s.rng.counter;
    }

    fn get(&self, i: usize) -> PongState {
        PongState {
            ball_x: self.ball_x[i],
            ball_y: self.ball_y[i],
            ball_vx: self.ball_vx[i],
            ball_vy: self.ball_vy[i],
            player_y: self.player_y[i],
            opponent_y: self.opponent_y[i],
            player_points: self.player_points[i],
            opponent_points: self.opponent_points[i],
            step_count: self.step_count[i],
            rng: RngState::new(self.rng[i]),
        }
    }

    #[inline(always)]
    fn write_obs(&self, i: usize, row: &mut [f32]) {
        row[0] = self.ball_x[i];
        row[1] = self.ball_y[i];
        row[2] = self.ball_vx[i] / BALL_VX;
        row[3] = self.ball_vy[i] / VY_MAX;
        row[4] = norm_paddle(self.player_y[i]);
        row[5] = norm_paddle(self.opponent_y[i]);
        row[6] = self.player_points[i] as f32 / WIN_SCORE as f32;
        row[7] = self.opponent_points[i] as f32 / WIN_SCORE as f32;
    }

    /// Steps the first `actions.len()` lanes. Actions must already be validated.
    fn step(&mut self, actions: &[u32], obs: &mut [f32], rewards: &mut [f32], dones: &mut [bool]) {
        let n = actions.len();
        assert!(n <= N && rewards.len() == n && dones.len() == n && obs.len() == n * OBS_LEN);

        for i in 0..n {
            let dir = ACTION_DIR[(actions[i] as usize).min(2)];
            let player_y = (self.player_y[i] + dir * PADDLE_SPEED).clamp(PADDLE_MIN, PADDLE_MAX);
            let shift = (self.ball_y[i] - self.opponent_y[i]).clamp(-OPP_SPEED, OPP_SPEED);
            let opponent_y = (self.opponent_y[i] + shift).clamp(PADDLE_MIN, PADDLE_MAX);

            let x = self.ball_x[i] + self.ball_vx[i];
            let y = self.ball_y[i] + self.ball_vy[i];

            let below = y < 0.0;
            let above = y > 1.0;
            let y = select(below, -y, select(above, 2.0 - y, y));
            let vy = select(below | above, -self.ball_vy[i], self.ball_vy[i]);

            let left = x <= 0.0;
            let right = x >= 1.0;
            let offset = y - select(left, opponent_y, player_y);
            let contact = offset.abs() <= PADDLE_HALF;
            let hit = (left | right) & contact;
            let miss = (left | right) & !contact;

            let vx = self.ball_vx[i];
            self.ball_vx[i] = select(hit, -vx, vx);
            self.ball_vy[i] = select(hit, VY_GAIN * offset / PADDLE_HALF, vy);
            let x = select(hit, select(left, -x, 2.0 - x), x);
            self.ball_x[i] = select(miss, 0.5, x);
            self.ball_y[i] = select(miss, 0.5, y);
            self.player_y[i] = player_y;
            self.opponent_y[i] = opponent_y;

            rewards[i] = select(miss, select(left, 1.0, -1.0), 0.0);
            self.player_points[i] += (miss & left) as u32;
            self.opponent_points[i] += (miss & !left) as u32;
            self.scored[i] = miss;
            self.step_count[i] += 1;
            dones[i] = (self.player_points[i] == WIN_SCORE)
                | (self.opponent_points[i] == WIN_SCORE)
                | (self.step_count[i] == MAX_STEPS);
        }

        // Serves are rare; draw only for the lanes that scored.
        for i in 0..n {
            if self.scored[i] {
                let (rng, vy) = serve_vy(RngState::new(self.rng[i]));
                self.rng[i] = rng.counter;
                self.ball_vy[i] = vy;
            }
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

/// A batch of Pong instances with pre-allocated output buffers.
///
/// Element-wise bit-identical to mapping [`pong_step`] over the batch.
pub struct PongBatch {
    blocks: Vec<Box<Block<LANES>>>,
    len: usize,
    observations: Vec<f32>,
    rewards: Vec<f32>,
    dones: Vec<bool>,
}

impl PongBatch {
    fn with_len(len: usize) -> Self {
        Self {
            blocks: (0..len.div_ceil(LANES)).map(|_| Box::new(Block::new())).collect(),
            len,
            observations: vec![0.0; len * OBS_LEN],
            rewards: vec![0.0; len],
            dones: vec![false; len],
        }
    }

    /// Resets instance `i` from `streams[i]`.
    pub fn new(streams: &[RngState]) -> Self {
        let mut batch = Self::with_len(streams.len());
        for (i, &stream) in streams.iter().enumerate() {
            batch.blocks[i / LANES].reset_lane(i % LANES, stream);
            batch.refresh_obs(i);
        }
        batch
    }

    pub fn from_states(states: &[PongState]) -> Self {
        let mut batch = Self::with_len(states.len());
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

    pub fn state(&self, i: usize) -> PongState {
        assert!(i < self.len, "instance {i} out of range for batch of {}", self.len);
        self.blocks[i / LANES].get(i % LANES)
    }

    pub fn states(&self) -> Vec<PongState> {
        (0..self.len).map(|i| self.state(i)).collect()
    }

    /// Steps every instance. Outputs are written into the batch's own buffers;
    /// nothing is allocated.
    pub fn step(&mut self, actions: &[u32]) -> Result<(), EnvError> {
        if actions.len() != self.len {
            return Err(EnvError::BatchLength { states: self.len, actions: actions.len() });
        }
        validate_actions(actions)?;
        if self.blocks.len() <= 1 {
            for block in &mut self.blocks {
                block.step(actions, &mut self.observations, &mut self.rewards, &mut self.dones);
            }
            return Ok(());
        }
        self.blocks
            .par_iter_mut()
            .zip(actions.par_chunks(LANES))
            .zip(self.observations.par_chunks_mut(LANES * OBS_LEN))
            .zip(self.rewards.par_chunks_mut(LANES))
            .zip(self.dones.par_chunks_mut(LANES))
            .for_each(|((((block, a), o), r), d)| block.step(a, o, r, d));
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

impl BatchEnv for PongBatch {
    fn len(&self) -> usize {
        self.len
    }

    fn obs_len(&self) -> usize {
        OBS_LEN
    }

    fn step(&mut self, actions: &[u32]) -> Result<(), EnvError> {
        PongBatch::step(self, actions)
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
        EnvState::Pong(PongBatch::state(self, index))
    }
}

/// The batched performance backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct PongPerf;

impl PongPerf {
    pub const ID: &'static str = "pong-perf";
}

impl Backend for PongPerf {
    fn id(&self) -> &str {
        Self::ID
    }

    fn kind(&self) -> EnvKind {
        EnvKind::Pong
    }

    fn reset(&self, stream: RngState) -> (EnvState, Vec<f32>) {
        let mut block = Block::<1>::new();
        block.reset_lane(0, stream);
        let mut obs = vec![0.0; OBS_LEN];
        block.write_obs(0, &mut obs);
        (EnvState::Pong(block.get(0)), obs)
    }

    fn step(&self, state: &EnvState, action: u32) -> Result<(EnvState, StepOutcome), EnvError> {
        let state = state.as_pong()?;
        validate_actions(&[action])?;
        let mut block = Block::<1>::new();
        block.load(0, state);
        let mut obs = vec![0.0; OBS_LEN];
        let mut reward = [0.0];
        let mut done = [false];
        block.step(&[action], &mut obs, &mut reward, &mut done);
        Ok((EnvState::Pong(block.get(0)), StepOutcome { observation: obs, reward: reward[0], done: done[0] }))
    }

    fn batch(&self, streams: &[RngState]) -> Box<dyn BatchEnv> {
        Box::new(PongBatch::new(streams))
    }
}
