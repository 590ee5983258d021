use super::*;
use crate::env::{Backend, BatchEnv, EnvKind, EnvState, SerialBatch, StepOutcome};

/// Deliberate defects injected into the reference to build mutant backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartPoleFault {
    /// The coupling term enters the angular acceleration with the wrong sign.
    ThetaAccSign,
    /// Gravity of 9.81; invisible at zero angle, accumulates along a trajectory.
    Gravity981,
    /// Reset draws cart velocity before cart position.
    ResetDrawOrder,
}

fn reset_with_fault(stream: RngState, fault: Option<CartPoleFault>) -> CartPoleState {
    let (rng, a) = reset_component(stream);
    let (rng, b) = reset_component(rng);
    let (rng, theta) = reset_component(rng);
    let (rng, theta_dot) = reset_component(rng);
    let (x, x_dot) = if fault == Some(CartPoleFault::ResetDrawOrder) { (b, a) } else { (a, b) };
    CartPoleState { x, x_dot, theta, theta_dot, step_count: 0, rng }
}

pub fn cartpole_reset(stream: RngState) -> (CartPoleState, Vec<f32>) {
    let s = reset_with_fault(stream, None);
    let obs = s.observation().to_vec();
    (s, obs)
}

pub fn cartpole_step(state: &CartPoleState, action: u32) -> Result<(CartPoleState, StepOutcome), EnvError> {
    step_with_fault(state, action, None)
}

pub(crate) fn step_with_fault(
    state: &CartPoleState,
    action: u32,
    fault: Option<CartPoleFault>,
) -> Result<(CartPoleState, StepOutcome), EnvError> {
    let force = match action {
        ACTION_LEFT => -FORCE_MAG,
        ACTION_RIGHT => FORCE_MAG,
        _ => return Err(EnvError::InvalidAction { action, action_count: ACTION_COUNT }),
    };
    let gravity = if fault == Some(CartPoleFault::Gravity981) { 9.81 } else { GRAVITY };

    let CartPoleState { x, x_dot, theta, theta_dot, .. } = *state;
    let cos = theta.cos();
    let sin = theta.sin();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let coupling = if fault == Some(CartPoleFault::ThetaAccSign) { -(cos * temp) } else { cos * temp };
    let theta_acc =
        (gravity * sin - coupling) / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

    let next = CartPoleState {
        x: x + TAU * x_dot,
        x_dot: x_dot + TAU * x_acc,
        theta: theta + TAU * theta_dot,
        theta_dot: theta_dot + TAU * theta_acc,
        step_count: state.step_count + 1,
        rng: state.rng,
    };
    let done = is_terminal(next.x, next.theta, next.step_count);
    let outcome = StepOutcome { observation: next.observation().to_vec(), reward: 1.0, done };
    Ok((next, outcome))
}

#[derive(Debug, Clone)]
pub struct CartPoleReference {
    id: String,
    fault: Option<CartPoleFault>,
}

impl CartPoleReference {
    pub const ID: &'static str = "cartpole-ref";

    pub fn new() -> Self {
        Self { id: Self::ID.to_owned(), fault: None }
    }

    pub fn with_fault(id: &str, fault: CartPoleFault) -> Self {
        Self { id: id.to_owned(), fault: Some(fault) }
    }
}

impl Default for CartPoleReference {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for CartPoleReference {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> EnvKind {
        EnvKind::CartPole
    }

    fn reset(&self, stream: RngState) -> (EnvState, Vec<f32>) {
        let s = reset_with_fault(stream, self.fault);
        let obs = s.observation().to_vec();
        (EnvState::CartPole(s), obs)
    }

    fn step(&self, state: &EnvState, action: u32) -> Result<(EnvState, StepOutcome), EnvError> {
        let (next, outcome) = step_with_fault(state.as_cartpole()?, action, self.fault)?;
        Ok((EnvState::CartPole(next), outcome))
    }

    fn batch(&self, streams: &[RngState]) -> Box<dyn BatchEnv> {
        Box::new(SerialBatch::new(self.clone(), streams))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use proptest::prelude::*;

    #[test]
    fn zero_state_push_right() {
        let s = CartPoleState::at_rest(RngState::new(0));
        let (n, out) = cartpole_step(&s, ACTION_RIGHT).unwrap();
        // Hand evaluation: x_acc = 9.7561, theta_acc = -14.6341.
        assert_eq!(n.x, 0.0);
        assert!((n.x_dot - 0.195_121_95).abs() < 1e-6);
        assert_eq!(n.theta, 0.0);
        assert!((n.theta_dot + 0.292_682_93).abs() < 1e-6);
        assert_eq!(out.reward, 1.0);
        assert!(!out.done);
        assert_eq!(n.step_count, 1);
    }

    #[test]
    fn threshold_crossing_terminates_with_reward() {
        let s = CartPoleState { theta: 0.2094, theta_dot: 0.5, ..CartPoleState::at_rest(RngState::new(0)) };
        let (n, out) = cartpole_step(&s, ACTION_LEFT).unwrap();
        assert!(n.theta > THETA_LIMIT);
        assert!(out.done);
        assert_eq!(out.reward, 1.0);
    }

    #[test]
    fn horizon_terminates() {
        let s = CartPoleState { step_count: MAX_EPISODE - 1, ..CartPoleState::at_rest(RngState::new(0)) };
        assert!(cartpole_step(&s, ACTION_LEFT).unwrap().1.done);
    }

    #[test]
    fn reset_range_and_purity() {
        for i in 0..200 {
            let (s, obs) = cartpole_reset(derive_stream(4, i));
            assert!(obs.iter().all(|v| v.abs() <= RESET_RANGE));
            assert_eq!(s.step_count, 0);
            assert_eq!(cartpole_reset(derive_stream(4, i)).0, s);
        }
    }

    #[test]
    fn reset_means_are_centered() {
        let mut sums = [0.0f64; 4];
        for i in 0..1000 {
            let (_, obs) = cartpole_reset(derive_stream(77, i));
            for (acc, v) in sums.iter_mut().zip(obs) {
                *acc += v as f64;
            }
        }
        assert!(sums.iter().all(|s| (s / 1000.0).abs() < 0.01), "{sums:?}");
    }

    #[test]
    fn constant_action_fails_fast() {
        let (mut s, _) = cartpole_reset(derive_stream(1, 0));
        let mut steps = 0;
        loop {
            let (n, out) = cartpole_step(&s, ACTION_RIGHT).unwrap();
            s = n;
            steps += 1;
            if out.done {
                break;
            }
        }
        assert!(steps < 100, "constant push survived {steps} steps");
    }

    #[test]
    fn invalid_action() {
        let s = CartPoleState::at_rest(RngState::new(0));
        assert!(matches!(cartpole_step(&s, 2), Err(EnvError::InvalidAction { action: 2, .. })));
    }

    proptest! {
        #[test]
        fn mirrored_state_and_action_mirror_the_successor(
            x in -2.4f32..2.4, x_dot in -3.0f32..3.0, theta in -0.2f32..0.2, theta_dot in -3.0f32..3.0,
            action in 0u32..2,
        ) {
            let s = CartPoleState { x, x_dot, theta, theta_dot, step_count: 3, rng: RngState::new(5) };
            let (n, _) = cartpole_step(&s, action).unwrap();
            let (m, _) = cartpole_step(&s.mirrored(), 1 - action).unwrap();
            prop_assert_eq!(m, n.mirrored());
        }
    }
}
