use super::*;
use crate::env::{Backend, BatchEnv, EnvKind, EnvState, SerialBatch, StepOutcome};

/// Deliberate defects injected into the reference step to build mutant backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PongFault {
    /// Wall reflection mirrors the position but keeps the vertical velocity.
    WallKeepsVelocity,
    /// The miss check runs before the paddle check, so every plane crossing scores.
    ScoreBeforePaddle,
    /// The opponent tracks the ball after it has moved instead of before.
    OpponentAfterBall,
    /// Horizontal speed decays by 0.1% per step.
    VxDecay,
    /// The serve draw does not advance the stored stream.
    ServeReusesStream,
}

pub fn pong_reset(stream: RngState) -> (PongState, Vec<f32>) {
    let (rng, vy) = serve_vy(stream);
    let state = PongState::centered(vy, rng);
    let obs = pong_observe(&state).to_vec();
    (state, obs)
}

pub fn pong_observe(state: &PongState) -> [f32; OBS_LEN] {
    [
        state.ball_x,
        state.ball_y,
        state.ball_vx / BALL_VX,
        state.ball_vy / VY_MAX,
        norm_paddle(state.player_y),
        norm_paddle(state.opponent_y),
        state.player_points as f32 / WIN_SCORE as f32,
        state.opponent_points as f32 / WIN_SCORE as f32,
    ]
}

pub fn pong_step(state: &PongState, action: u32) -> Result<(PongState, StepOutcome), EnvError> {
    step_with_fault(state, action, None)
}

fn track_opponent(s: &mut PongState) {
    let shift = (s.ball_y - s.opponent_y).clamp(-OPP_SPEED, OPP_SPEED);
    s.opponent_y = (s.opponent_y + shift).clamp(PADDLE_MIN, PADDLE_MAX);
}

fn serve(s: &mut PongState, fault: Option<PongFault>) {
    s.ball_x = 0.5;
    s.ball_y = 0.5;
    let (rng, vy) = serve_vy(s.rng);
    s.ball_vy = vy;
    if fault != Some(PongFault::ServeReusesStream) {
        s.rng = rng;
    }
}

/// Scores a plane crossing without paddle contact. Returns the player's reward,
/// zero when no plane was crossed.
fn score_miss(s: &mut PongState, fault: Option<PongFault>) -> f32 {
    if s.ball_x <= 0.0 {
        s.player_points += 1;
        serve(s, fault);
        1.0
    } else if s.ball_x >= 1.0 {
        s.opponent_points += 1;
        serve(s, fault);
        -1.0
    } else {
        0.0
    }
}

fn deflect(s: &mut PongState, paddle_y: f32) {
    let offset = s.ball_y - paddle_y;
    s.ball_vx = -s.ball_vx;
    s.ball_vy = VY_GAIN * offset / PADDLE_HALF;
}

pub(crate) fn step_with_fault(
    state: &PongState,
    action: u32,
    fault: Option<PongFault>,
) -> Result<(PongState, StepOutcome), EnvError> {
    let dir = match action {
        ACTION_STAY => 0.0,
        ACTION_UP => 1.0,
        ACTION_DOWN => -1.0,
        _ => return Err(EnvError::InvalidAction { action, action_count: ACTION_COUNT }),
    };
    let mut s = state.clone();

    s.player_y = (s.player_y + dir * PADDLE_SPEED).clamp(PADDLE_MIN, PADDLE_MAX);

    if fault != Some(PongFault::OpponentAfterBall) {
        track_opponent(&mut s);
    }

    s.ball_x += s.ball_vx;
    s.ball_y += s.ball_vy;

    if fault == Some(PongFault::OpponentAfterBall) {
        track_opponent(&mut s);
    }

    let keep_vy = fault == Some(PongFault::WallKeepsVelocity);
    if s.ball_y < 0.0 {
        s.ball_y = -s.ball_y;
        if !keep_vy {
            s.ball_vy = -s.ball_vy;
        }
    } else if s.ball_y > 1.0 {
        s.ball_y = 2.0 - s.ball_y;
        if !keep_vy {
            s.ball_vy = -s.ball_vy;
        }
    }

    let reward = if fault == Some(PongFault::ScoreBeforePaddle) {
        score_miss(&mut s, fault)
    } else if s.ball_x <= 0.0 && (s.ball_y - s.opponent_y).abs() <= PADDLE_HALF {
        let paddle = s.opponent_y;
        deflect(&mut s, paddle);
        s.ball_x = -s.ball_x;
        0.0
    } else if s.ball_x >= 1.0 && (s.ball_y - s.player_y).abs() <= PADDLE_HALF {
        let paddle = s.player_y;
        deflect(&mut s, paddle);
        s.ball_x = 2.0 - s.ball_x;
        0.0
    } else {
        score_miss(&mut s, fault)
    };

    if fault == Some(PongFault::VxDecay) {
        s.ball_vx *= 0.999;
    }

    s.step_count += 1;
    let done = s.player_points == WIN_SCORE || s.opponent_points == WIN_SCORE || s.step_count == MAX_STEPS;
    let outcome = StepOutcome { observation: pong_observe(&s).to_vec(), reward, done };
    Ok((s, outcome))
}

/// The readability-first scalar backend. With a fault it becomes a mutant.
#[derive(Debug, Clone)]
pub struct PongReference {
    id: String,
    fault: Option<PongFault>,
}

impl PongReference {
    pub const ID: &'static str = "pong-ref";

    pub fn new() -> Self {
        Self { id: Self::ID.to_owned(), fault: None }
    }

    pub fn with_fault(id: &str, fault: PongFault) -> Self {
        Self { id: id.to_owned(), fault: Some(fault) }
    }
}

impl Default for PongReference {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for PongReference {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> EnvKind {
        EnvKind::Pong
    }

    fn reset(&self, stream: RngState) -> (EnvState, Vec<f32>) {
        let (state, obs) = pong_reset(stream);
        (EnvState::Pong(state), obs)
    }

    fn step(&self, state: &EnvState, action: u32) -> Result<(EnvState, StepOutcome), EnvError> {
        let (next, outcome) = step_with_fault(state.as_pong()?, action, self.fault)?;
        Ok((EnvState::Pong(next), outcome))
    }

    fn batch(&self, streams: &[RngState]) -> Box<dyn BatchEnv> {
        Box::new(SerialBatch::new(self.clone(), streams))
    }
}
