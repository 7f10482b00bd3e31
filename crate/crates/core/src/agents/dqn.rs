//! Value-based learners: DQN, double DQN and the dueling variant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, DqnParams};
use super::net::{argmax, clip_norm, masked_mse, Activation, DenseNet, Head};
use super::optim::Adam;
use super::replay::Transition;
use super::AgentError;

/// Bootstrapped regression targets for a batch.
///
/// DQN and dueling take the target network's maximum at the next state;
/// double DQN picks the action with the online network and scores it with
/// the target network. Terminal transitions use the bare reward.
pub fn q_targets(
    batch: &[&Transition],
    online: &DenseNet,
    target: &DenseNet,
    algorithm: Algorithm,
    gamma: f64,
) -> Vec<f64> {
    assert!(!batch.is_empty(), "empty batch");
    batch
        .iter()
        .map(|t| {
            if t.done || gamma == 0.0 {
                return t.reward;
            }
            let next = target.forward(&t.next_state);
            let bootstrap = match algorithm {
                Algorithm::Ddqn => next[argmax(&online.forward(&t.next_state))],
                _ => next.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            t.reward + gamma * bootstrap
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnAgent {
    pub algorithm: Algorithm,
    pub online: DenseNet,
    pub target: DenseNet,
    pub optimizer: Adam,
    pub gamma: f64,
    pub params: DqnParams,
}

impl DqnAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        algorithm: Algorithm,
        inputs: usize,
        outputs: usize,
        hidden: &[usize],
        activation: Activation,
        learning_rate: f64,
        gamma: f64,
        params: DqnParams,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(algorithm.is_value_based(), "{algorithm} is not value based");
        let head = if algorithm == Algorithm::Dueling {
            Head::Dueling
        } else {
            Head::Linear
        };
        let online = DenseNet::new(inputs, hidden, outputs, activation, head, rng);
        DqnAgent {
            algorithm,
            target: online.clone(),
            optimizer: Adam::new(online.n_params(), learning_rate),
            online,
            gamma,
            params,
        }
    }

    pub fn q_values(&self, x: &[f64]) -> Vec<f64> {
        self.online.forward(x)
    }

    pub fn greedy(&self, x: &[f64]) -> usize {
        argmax(&self.q_values(x))
    }

    /// ε-greedy action.
    pub fn act(&self, x: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
        if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..self.online.n_outputs())
        } else {
            self.greedy(x)
        }
    }

    /// One gradient step on `batch`; returns the pre-update loss.
    pub fn train_batch(&mut self, batch: &[&Transition]) -> Result<f64, AgentError> {
        let targets = q_targets(batch, &self.online, &self.target, self.algorithm, self.gamma);
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.state.clone()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, mut grads) = masked_mse(&self.online, &inputs, &actions, &targets);
        if !loss.is_finite() {
            return Err(AgentError::Diverged {
                what: "q loss",
                value: loss,
                step: None,
            });
        }
        clip_norm(&mut grads, self.params.grad_clip);
        self.optimizer.step(self.online.params_mut(), &grads);
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::agents::optim::Sgd;
    use crate::agents::replay::ReplayBuffer;

    fn tr(s: usize, a: usize, r: f64, s2: usize, done: bool) -> Transition {
        let one_hot = |i: usize| (0..2).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
        Transition {
            state: one_hot(s),
            action: a,
            reward: r,
            next_state: one_hot(s2),
            done,
        }
    }

    fn agent(algorithm: Algorithm, seed: u64) -> DqnAgent {
        DqnAgent::new(
            algorithm,
            2,
            2,
            &[16],
            Activation::Tanh,
            5e-3,
            0.9,
            DqnParams::default(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    }

    #[test]
    fn terminal_and_undiscounted_targets_are_rewards() {
        let a = agent(Algorithm::Dqn, 0);
        let batch = [tr(0, 0, 1.5, 1, true), tr(1, 1, -0.5, 0, false)];
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = q_targets(&refs, &a.online, &a.target, Algorithm::Dqn, 0.9);
        assert_eq!(y[0], 1.5);
        let y0 = q_targets(&refs, &a.online, &a.target, Algorithm::Dqn, 0.0);
        assert_eq!(y0, vec![1.5, -0.5]);
    }

    #[test]
    fn double_targets_use_online_choice() {
        let mut a = agent(Algorithm::Ddqn, 3);
        // make the two networks disagree
        a.target.params_mut().iter_mut().for_each(|p| *p = -*p);
        let t = tr(0, 0, 0.0, 1, false);
        let y = q_targets(&[&t], &a.online, &a.target, Algorithm::Ddqn, 1.0)[0];
        let pick = argmax(&a.online.forward(&t.next_state));
        assert_eq!(y, a.target.forward(&t.next_state)[pick]);
        let ymax = q_targets(&[&t], &a.online, &a.target, Algorithm::Dqn, 1.0)[0];
        assert!(ymax >= y);
    }

    /// Deterministic 2-state, 2-action MDP. Action 0 stays, action 1 moves
    /// to the other state; staying in state 1 pays 1, moving out of state 0
    /// pays 0.5.
    fn mdp() -> Vec<Transition> {
        vec![
            tr(0, 0, 0.0, 0, false),
            tr(0, 1, 0.5, 1, false),
            tr(1, 0, 1.0, 1, false),
            tr(1, 1, 0.0, 0, false),
        ]
    }

    fn value_iteration(gamma: f64) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..2000 {
            let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
            q = [
                [0.0 + gamma * v[0], 0.5 + gamma * v[1]],
                [1.0 + gamma * v[1], 0.0 + gamma * v[0]],
            ];
        }
        q
    }

    #[test]
    fn fitted_iteration_converges_to_value_iteration() {
        let gamma = 0.9;
        let oracle = value_iteration(gamma);
        for algorithm in [Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Dueling] {
            let mut a = agent(algorithm, 11);
            a.gamma = gamma;
            a.optimizer.lr = 1e-2;
            a.params.grad_clip = 100.0;
            let data = mdp();
            let refs: Vec<&Transition> = data.iter().collect();
            for i in 0..12_000 {
                a.train_batch(&refs).unwrap();
                if i % 100 == 0 {
                    a.sync_target();
                }
            }
            for s in 0..2 {
                let q = a.q_values(&data[2 * s].state);
                for act in 0..2 {
                    assert!(
                        (q[act] - oracle[s][act]).abs() < 0.05 * oracle[s][act].abs().max(1.0),
                        "{algorithm}: Q({s},{act}) = {} vs {}",
                        q[act],
                        oracle[s][act]
                    );
                }
            }
        }
    }

    #[test]
    fn repeated_batch_loss_is_non_increasing() {
        let a = agent(Algorithm::Dqn, 5);
        let data = mdp();
        let inputs: Vec<Vec<f64>> = data.iter().map(|t| t.state.clone()).collect();
        let actions: Vec<usize> = data.iter().map(|t| t.action).collect();
        let targets = [0.3, -0.2, 1.1, 0.4];
        let mut net = a.online.clone();
        let sgd = Sgd { lr: 0.05 };
        let mut losses = Vec::new();
        for _ in 0..100 {
            let (loss, grads) = masked_mse(&net, &inputs, &actions, &targets);
            losses.push(loss);
            sgd.step(net.params_mut(), &grads);
        }
        for w in losses[10..].windows(2) {
            assert!(w[1] <= w[0], "loss rose from {} to {}", w[0], w[1]);
        }
        assert!(losses[99] < losses[0]);
    }

    #[test]
    fn zero_error_batch_leaves_net_unchanged() {
        let mut a = agent(Algorithm::Dqn, 2);
        let t = tr(0, 1, 0.0, 0, true);
        let q = a.q_values(&t.state)[1];
        let t = Transition { reward: q, ..t };
        let before = a.online.clone();
        let loss = a.train_batch(&[&t]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(a.online, before);
    }

    #[test]
    fn diverged_loss_is_an_error() {
        let mut a = agent(Algorithm::Dqn, 2);
        let t = tr(0, 1, f64::NAN, 0, true);
        assert!(matches!(a.train_batch(&[&t]), Err(AgentError::Diverged { .. })));
    }

    #[test]
    fn epsilon_one_is_uniform_and_zero_is_greedy() {
        let a = agent(Algorithm::Dqn, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [1.0, 0.0];
        let g = a.greedy(&x);
        assert!((0..50).all(|_| a.act(&x, 0.0, &mut rng) == g));
        let other = (0..200).filter(|_| a.act(&x, 1.0, &mut rng) != g).count();
        assert!(other > 60 && other < 140);
        let mut buf = ReplayBuffer::new(4);
        for t in mdp() {
            buf.push(t);
        }
        assert_eq!(buf.sample(32, &mut rng).len(), 4);
    }
}
