//! Deep Q-learning around any [`Approximator`]: FIFO replay, a periodically
//! refreshed target copy, epsilon-greedy exploration and squared Bellman
//! error minimized with the shared optimizer.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::approximator::Approximator;
use crate::classical::{LearningRates, OptimizerState};
use crate::envs::{Environment, Transition};
use crate::error::{self, Result};
use crate::params::ParamStore;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub batch_size: usize,
    pub capacity: usize,
    /// Optimizer updates between target refreshes.
    pub target_period: usize,
    pub episodes: usize,
    /// Environment steps between updates.
    pub train_every: usize,
    pub rates: LearningRates,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.99,
            batch_size: 32,
            capacity: 10_000,
            target_period: 50,
            episodes: 500,
            train_every: 1,
            rates: LearningRates::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            errs.push(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            errs.push("epsilon bounds must lie in [0, 1]".to_string());
        }
        if self.epsilon_end > self.epsilon_start {
            errs.push("epsilon_end exceeds epsilon_start".to_string());
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            errs.push(format!("epsilon_decay {} outside [0, 1]", self.epsilon_decay));
        }
        if self.batch_size == 0 || self.capacity < self.batch_size {
            errs.push("need 0 < batch_size <= capacity".to_string());
        }
        if self.target_period == 0 || self.train_every == 0 {
            errs.push("target_period and train_every must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Validation(errs))
        }
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        (self.epsilon_start * self.epsilon_decay.powi(episode as i32)).max(self.epsilon_end)
    }
}

/// Fixed-capacity ring of transitions with FIFO eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if n > self.items.len() {
            return error::config(format!("cannot sample {n} from {} transitions", self.items.len()));
        }
        Ok(index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect())
    }
}

/// Epsilon-greedy choice; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q_values.is_empty() {
        return error::config("no action values to choose from");
    }
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..q_values.len()));
    }
    Ok(argmax(q_values))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `r` for terminal transitions, else `r + gamma * max_a' Q_target(s', a')`.
pub fn bellman_target<A: Approximator>(
    approx: &A,
    target: &A::Compiled,
    t: &Transition,
    gamma: f64,
) -> Result<f64> {
    if t.terminal || gamma == 0.0 {
        return Ok(t.reward);
    }
    let next = approx.evaluate(target, &t.next_obs)?;
    let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(t.reward + gamma * best)
}

/// One gradient step on the mean squared Bellman error of `batch`; targets
/// come from `target` and are not differentiated. Returns the loss.
pub fn dqn_update<A: Approximator>(
    approx: &A,
    batch: &[&Transition],
    params: &mut ParamStore,
    target: &A::Compiled,
    optimizer: &mut OptimizerState,
    gamma: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return error::config("empty batch");
    }
    let compiled = approx.compile(params)?;
    let n_out = approx.n_outputs();
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut weights = vec![0.0; n_out];
    let inv_b = 1.0 / batch.len() as f64;
    for t in batch {
        if t.action >= n_out {
            return crate::error::index(format!("action {} out of range", t.action));
        }
        let y = bellman_target(approx, target, t, gamma)?;
        let q = approx.evaluate(&compiled, &t.obs)?[t.action];
        let err = y - q;
        loss += err * err * inv_b;
        if err != 0.0 {
            weights.iter_mut().for_each(|w| *w = 0.0);
            weights[t.action] = 1.0;
            approx.accumulate_grad(&compiled, &t.obs, &weights, -2.0 * err * inv_b, &mut grads)?;
        }
    }
    if !loss.is_finite() {
        return error::numeric(format!("non-finite Bellman loss {loss}"));
    }
    optimizer.step(params, &grads)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub reward: f64,
    pub epsilon: f64,
    /// Mean loss over the episode's updates; NaN when no update ran.
    pub mean_loss: f64,
    pub steps: usize,
    /// Ended by reaching a terminal state rather than the step cap.
    pub terminated: bool,
}

/// Learner state for one DQN run.
pub struct DqnAgent<A: Approximator> {
    pub approx: A,
    pub config: DqnConfig,
    pub params: ParamStore,
    pub target_params: ParamStore,
    target: A::Compiled,
    pub optimizer: OptimizerState,
    pub buffer: ReplayBuffer,
    pub updates: u64,
    pub target_refreshes: u64,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
}

impl<A: Approximator> DqnAgent<A> {
    pub fn new(approx: A, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = rng::stream(seed, "init");
        let params = approx.init_params(&mut init);
        let target = approx.compile(&params)?;
        Ok(Self {
            optimizer: OptimizerState::new(&params, config.rates),
            buffer: ReplayBuffer::new(config.capacity),
            target_params: params.clone(),
            target,
            params,
            approx,
            config,
            updates: 0,
            target_refreshes: 0,
            explore_rng: rng::stream(seed, "explore"),
            replay_rng: rng::stream(seed, "replay"),
        })
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.approx.evaluate(&self.approx.compile(&self.params)?, obs)
    }

    pub fn target_q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.approx.evaluate(&self.target, obs)
    }

    pub fn act(&mut self, obs: &[f64], epsilon: f64) -> Result<usize> {
        let q = self.q_values(obs)?;
        select_action(&q, epsilon, &mut self.explore_rng)
    }

    /// Samples a batch and applies one update, refreshing the target every
    /// `target_period` updates. `None` until the buffer holds a batch.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.config.batch_size, &mut self.replay_rng)?;
        let loss = dqn_update(
            &self.approx,
            &batch,
            &mut self.params,
            &self.target,
            &mut self.optimizer,
            self.config.gamma,
        )?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_period as u64) {
            self.target_params = self.params.clone();
            self.target = self.approx.compile(&self.target_params)?;
            self.target_refreshes += 1;
        }
        Ok(Some(loss))
    }

    /// Runs one episode, learning online.
    pub fn run_episode(
        &mut self,
        env: &mut dyn Environment,
        preprocess: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
        episode: usize,
    ) -> Result<EpisodeStats> {
        let epsilon = self.config.epsilon(episode);
        let mut obs = preprocess(&env.reset())?;
        let (mut reward, mut steps, mut loss_sum, mut n_loss) = (0.0, 0usize, 0.0, 0usize);
        let terminated = loop {
            let action = self.act(&obs, epsilon)?;
            let step = env.step(action)?;
            let next_obs = preprocess(&step.obs)?;
            reward += step.reward;
            steps += 1;
            self.buffer.push(Transition {
                obs: std::mem::take(&mut obs),
                action,
                reward: step.reward,
                next_obs: next_obs.clone(),
                terminal: step.terminal(),
            });
            if steps % self.config.train_every == 0 {
                if let Some(l) = self.train_step()? {
                    loss_sum += l;
                    n_loss += 1;
                }
            }
            obs = next_obs;
            if step.done {
                break step.terminal();
            }
        };
        let mean_loss = if n_loss == 0 { f64::NAN } else { loss_sum / n_loss as f64 };
        Ok(EpisodeStats { episode, reward, epsilon, mean_loss, steps, terminated })
    }
}

/// Full seeded training run; `on_episode` sees every episode as it ends.
/// Returns the per-episode reward series.
pub fn run_dqn<A: Approximator>(
    config: &DqnConfig,
    approx: A,
    env: &mut dyn Environment,
    preprocess: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    seed: u64,
    on_episode: &mut dyn FnMut(&EpisodeStats) -> Result<()>,
) -> Result<Vec<f64>> {
    let mut agent = DqnAgent::new(approx, config.clone(), seed)?;
    let mut rewards = Vec::with_capacity(config.episodes);
    for ep in 0..config.episodes {
        let stats = agent.run_episode(env, preprocess, ep)?;
        on_episode(&stats)?;
        rewards.push(stats.reward);
    }
    Ok(rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::TabularApproximator;
    use rand::SeedableRng;

    fn tr(obs: f64, action: usize, reward: f64, next: f64, terminal: bool) -> Transition {
        Transition { obs: vec![obs], action, reward, next_obs: vec![next], terminal }
    }

    #[test]
    fn greedy_and_tie_break() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[0.1, 0.9], 0.0, &mut r).unwrap(), 1);
        assert_eq!(select_action(&[0.5, 0.5], 0.0, &mut r).unwrap(), 0);
        assert!(select_action(&[], 0.0, &mut r).is_err());
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&[9.0, 0.0, 0.0, 0.0], 1.0, &mut r).unwrap()] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn replay_is_fifo() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(tr(i as f64, 0, 0.0, 0.0, false));
        }
        let kept: Vec<f64> = b.iter().map(|t| t.obs[0]).collect();
        assert_eq!(b.len(), 5);
        for old in 0..3 {
            assert!(!kept.contains(&(old as f64)));
        }
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(5, &mut r).unwrap();
        let mut seen: Vec<f64> = s.iter().map(|t| t.obs[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(b.sample(6, &mut r).is_err());
    }

    #[test]
    fn targets() {
        let tab = TabularApproximator { n_states: 2, n_actions: 2 };
        let table = vec![0.0, 0.0, 3.0, 5.0];
        assert_eq!(bellman_target(&tab, &table, &tr(0.0, 0, 1.0, 1.0, true), 0.9).unwrap(), 1.0);
        assert_eq!(bellman_target(&tab, &table, &tr(0.0, 0, 0.7, 1.0, false), 0.0).unwrap(), 0.7);
        assert!((bellman_target(&tab, &table, &tr(0.0, 0, 1.0, 1.0, false), 0.5).unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn update_at_fixed_point_changes_nothing() {
        let tab = TabularApproximator { n_states: 2, n_actions: 2 };
        let mut params = ParamStore::new();
        params.push("table", crate::params::BlockKind::Table, vec![1.0, 0.0, 0.0, 0.0]);
        let target = params.get("table").unwrap().to_vec();
        let mut opt = OptimizerState::new(&params, LearningRates::default());
        let t = tr(0.0, 0, 1.0, 1.0, true);
        let loss = dqn_update(&tab, &[&t], &mut params, &target, &mut opt, 0.9).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(params.get("table").unwrap(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_transition_loss_is_hand_square() {
        let tab = TabularApproximator { n_states: 2, n_actions: 2 };
        let mut params = ParamStore::new();
        params.push("table", crate::params::BlockKind::Table, vec![0.25, 0.0, 2.0, 1.0]);
        let target = params.get("table").unwrap().to_vec();
        let mut opt = OptimizerState::new(&params, LearningRates::default());
        // y = 0.5 + 0.9 * max(2, 1) = 2.3; q = 0.25
        let t = tr(0.0, 0, 0.5, 1.0, false);
        let loss = dqn_update(&tab, &[&t], &mut params, &target, &mut opt, 0.9).unwrap();
        assert!((loss - (2.3f64 - 0.25).powi(2)).abs() < 1e-12);
        // the step moves Q(s, a) toward the target and leaves the target table alone
        assert!(params.get("table").unwrap()[0] > 0.25);
        assert_eq!(target, vec![0.25, 0.0, 2.0, 1.0]);
    }

    #[test]
    fn epsilon_schedule() {
        let c = DqnConfig::default();
        assert_eq!(c.epsilon(0), 1.0);
        assert!((c.epsilon(1) - 0.99).abs() < 1e-15);
        assert_eq!(c.epsilon(10_000), 0.05);
        let bad = DqnConfig { epsilon_end: 1.0, epsilon_start: 0.5, ..DqnConfig::default() };
        assert!(bad.validate().is_err());
    }
}
