//! Single-worker PPO with a clipped surrogate and GAE.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::PpoParams;
use super::net::{argmax, clip_norm, softmax, Activation, DenseNet, Head};
use super::optim::Adam;
use super::AgentError;

/// Generalized advantage estimates and the matching return targets.
///
/// `dones[t]` marks that the episode ended after step `t`; `last_value` is
/// the critic's value of the state following the final step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, live) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < n {
            (values[t + 1], 1.0)
        } else {
            (last_value, 1.0)
        };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Per-sample actor loss `-min(ρA, clip(ρ)A) - c·H` and its gradient with
/// respect to the logits.
pub fn policy_loss(
    logits: &[f64],
    action: usize,
    old_logp: f64,
    advantage: f64,
    clip: f64,
    entropy_coef: f64,
) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let logp: Vec<f64> = p.iter().map(|x| x.max(1e-300).ln()).collect();
    let ratio = (logp[action] - old_logp).exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    let entropy: f64 = -p.iter().zip(&logp).map(|(a, b)| a * b).sum::<f64>();
    let loss = -unclipped.min(clipped) - entropy_coef * entropy;
    let surrogate_active = unclipped <= clipped;
    let grad = p
        .iter()
        .zip(&logp)
        .enumerate()
        .map(|(j, (&pj, &lj))| {
            let indicator = if j == action { 1.0 } else { 0.0 };
            let g_surr = if surrogate_active {
                -advantage * ratio * (indicator - pj)
            } else {
                0.0
            };
            g_surr + entropy_coef * pj * (lj + entropy)
        })
        .collect();
    (loss, grad)
}

/// Mean squared critic error `coef · (V - R)^2` for one sample and its
/// gradient with respect to `V`.
pub fn value_loss(value: f64, ret: f64, coef: f64) -> (f64, f64) {
    let e = value - ret;
    (coef * e * e, 2.0 * coef * e)
}

/// Experience gathered between updates.
#[derive(Clone, Debug, Default)]
pub struct Rollout {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub logps: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: usize, logp: f64, value: f64, reward: f64, done: bool) {
        self.states.push(state);
        self.actions.push(action);
        self.logps.push(logp);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    pub fn clear(&mut self) {
        *self = Rollout::default();
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoAgent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub gamma: f64,
    pub params: PpoParams,
}

impl PpoAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        inputs: usize,
        outputs: usize,
        hidden: &[usize],
        activation: Activation,
        learning_rate: f64,
        gamma: f64,
        params: PpoParams,
        rng: &mut impl Rng,
    ) -> Self {
        let actor = DenseNet::new(inputs, hidden, outputs, activation, Head::Linear, rng);
        let critic = DenseNet::new(inputs, hidden, 1, activation, Head::Linear, rng);
        PpoAgent {
            actor_opt: Adam::new(actor.n_params(), learning_rate),
            critic_opt: Adam::new(critic.n_params(), learning_rate),
            actor,
            critic,
            gamma,
            params,
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.actor.forward(x))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.critic.forward(x)[0]
    }

    pub fn greedy(&self, x: &[f64]) -> usize {
        argmax(&self.actor.forward(x))
    }

    /// Samples an action; returns it with its log-probability and the
    /// critic's value.
    pub fn act(&self, x: &[f64], rng: &mut impl Rng) -> (usize, f64, f64) {
        let p = self.probabilities(x);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut action = p.len() - 1;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                action = i;
                break;
            }
        }
        (action, p[action].max(1e-300).ln(), self.value(x))
    }

    /// Several epochs of minibatch updates over `rollout`.
    pub fn update(&mut self, rollout: &Rollout, last_value: f64, rng: &mut impl Rng) -> Result<UpdateStats, AgentError> {
        if rollout.is_empty() {
            return Ok(UpdateStats::default());
        }
        let (mut adv, returns) = gae(
            &rollout.rewards,
            &rollout.values,
            &rollout.dones,
            last_value,
            self.gamma,
            self.params.lambda,
        );
        normalize(&mut adv);
        let mut order: Vec<usize> = (0..rollout.len()).collect();
        let mut stats = UpdateStats::default();
        for _ in 0..self.params.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.params.minibatch) {
                let n = chunk.len() as f64;
                let mut ga = self.actor.zero_grads();
                let mut gc = self.critic.zero_grads();
                let (mut pl, mut vl) = (0.0, 0.0);
                for &i in chunk {
                    let x = &rollout.states[i];
                    let trace = self.actor.forward_trace(x);
                    let (l, g) = policy_loss(
                        &trace.output,
                        rollout.actions[i],
                        rollout.logps[i],
                        adv[i],
                        self.params.clip,
                        self.params.entropy_coef,
                    );
                    pl += l / n;
                    let g: Vec<f64> = g.into_iter().map(|v| v / n).collect();
                    self.actor.backward(&trace, &g, &mut ga);
                    let ct = self.critic.forward_trace(x);
                    let (l, g) = value_loss(ct.output[0], returns[i], self.params.value_coef);
                    vl += l / n;
                    self.critic.backward(&ct, &[g / n], &mut gc);
                }
                if !pl.is_finite() || !vl.is_finite() {
                    return Err(AgentError::Diverged {
                        what: "ppo loss",
                        value: if pl.is_finite() { vl } else { pl },
                        step: None,
                    });
                }
                clip_norm(&mut ga, self.params.grad_clip);
                clip_norm(&mut gc, self.params.grad_clip);
                self.actor_opt.step(self.actor.params_mut(), &ga);
                self.critic_opt.step(self.critic.params_mut(), &gc);
                stats = UpdateStats {
                    policy_loss: pl,
                    value_loss: vl,
                };
            }
        }
        Ok(stats)
    }
}

fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    xs.iter_mut().for_each(|x| *x = (*x - mean) / (sd + 1e-8));
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Advantage as the explicit discounted sum of TD errors up to the end
    /// of the episode.
    fn gae_by_definition(r: &[f64], v: &[f64], d: &[bool], last: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let next = |t: usize| if t + 1 < n { v[t + 1] } else { last };
        let delta: Vec<f64> = (0..n)
            .map(|t| r[t] + if d[t] { 0.0 } else { g * next(t) } - v[t])
            .collect();
        (0..n)
            .map(|t| {
                let mut sum = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    sum += w * delta[k];
                    if d[k] {
                        break;
                    }
                    w *= g * l;
                }
                sum
            })
            .collect()
    }

    #[test]
    fn gae_matches_explicit_sum() {
        let r = [1.0, 0.0, -0.5, 2.0, 0.3, 0.1];
        let v = [0.2, 0.4, -0.1, 0.0, 0.5, 0.3];
        let d = [false, false, true, false, false, false];
        let (adv, ret) = gae(&r, &v, &d, 0.7, 0.99, 0.95);
        let oracle = gae_by_definition(&r, &v, &d, 0.7, 0.99, 0.95);
        for ((a, o), (rt, vt)) in adv.iter().zip(&oracle).zip(ret.iter().zip(&v)) {
            assert!((a - o).abs() < 1e-12);
            assert!((rt - (a + vt)).abs() < 1e-12);
        }
        // lambda = 1 gives Monte Carlo returns within the episode
        let (_, ret) = gae(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 9.0, 0.5, 1.0);
        assert_eq!(ret, vec![1.5, 1.0]);
    }

    #[test]
    fn policy_loss_gradient_matches_finite_differences() {
        let logits = [0.3, -0.8, 1.2, 0.1];
        for (adv, old) in [(1.3, -1.2), (-0.7, -1.5), (2.0, -3.0), (-1.0, -0.2)] {
            let (_, g) = policy_loss(&logits, 2, old, adv, 0.2, 0.01);
            for j in 0..4 {
                let h = 1e-6;
                let mut up = logits;
                up[j] += h;
                let mut down = logits;
                down[j] -= h;
                let num = (policy_loss(&up, 2, old, adv, 0.2, 0.01).0
                    - policy_loss(&down, 2, old, adv, 0.2, 0.01).0)
                    / (2.0 * h);
                assert!((num - g[j]).abs() < 1e-6, "adv {adv}: {num} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn clipped_branch_has_no_surrogate_gradient() {
        let logits = [2.0, 0.0];
        let p = softmax(&logits);
        // ratio far above 1 + clip with positive advantage
        let old = (p[0] / 2.0).ln();
        let (loss, g) = policy_loss(&logits, 0, old, 1.0, 0.2, 0.0);
        assert!((loss + 1.2).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn update_raises_probability_of_rewarded_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = PpoAgent::new(2, 3, &[8], Activation::Tanh, 1e-2, 0.9, PpoParams {
            minibatch: 16,
            ..PpoParams::default()
        }, &mut rng);
        let x = vec![1.0, -1.0];
        let before = agent.probabilities(&x)[1];
        for _ in 0..10 {
            let mut ro = Rollout::default();
            for _ in 0..64 {
                let (a, logp, v) = agent.act(&x, &mut rng);
                ro.push(x.clone(), a, logp, v, if a == 1 { 1.0 } else { 0.0 }, true);
            }
            agent.update(&ro, 0.0, &mut rng).unwrap();
        }
        assert!(agent.probabilities(&x)[1] > before.max(0.8));
        assert!((agent.value(&x) - agent.probabilities(&x)[1]).abs() < 0.3);
    }
}
