//! Asynchronous advantage actor-critic over two approximators: a Gibbs
//! policy over actor logits and a scalar critic.
//!
//! Workers run on their own threads with private environments. Each one
//! snapshots the shared parameters, collects at most `n_step` transitions,
//! computes the composite loss gradient locally and submits it. The store
//! applies submissions one at a time under a writer lock (global-norm
//! clipping, then the shared Adam step) and publishes each result as an
//! immutable versioned snapshot, so readers never see a half-applied update.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::approximator::Approximator;
use crate::classical::{LearningRates, OptimizerState};
use crate::envs::{Environment, Transition};
use crate::error::{self, Error, Result};
use crate::params::ParamStore;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct A3cConfig {
    pub workers: usize,
    pub n_step: usize,
    pub gamma: f64,
    /// `c_v`, weight of the value loss.
    pub value_weight: f64,
    /// `beta`, weight of the entropy term.
    pub entropy_weight: f64,
    /// Global episode budget shared by all workers.
    pub episodes: usize,
    /// Global-norm clip applied to each submitted gradient.
    pub clip_norm: f64,
    pub rates: LearningRates,
}

impl Default for A3cConfig {
    fn default() -> Self {
        Self {
            workers: 4,
            n_step: 5,
            gamma: 0.99,
            value_weight: 0.5,
            entropy_weight: 0.01,
            episodes: 1000,
            clip_norm: 5.0,
            rates: LearningRates::default(),
        }
    }
}

impl A3cConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.workers == 0 {
            errs.push("workers must be at least 1".to_string());
        }
        if self.n_step == 0 {
            errs.push("n_step must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            errs.push(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.value_weight <= 0.0 {
            errs.push("value_weight must be positive".to_string());
        }
        if self.entropy_weight <= 0.0 {
            errs.push("entropy_weight must be positive".to_string());
        }
        if self.clip_norm <= 0.0 {
            errs.push("clip_norm must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Softmax with max subtraction.
pub fn policy(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `sum_a pi(a) log pi(a)` (the negative entropy).
pub fn neg_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum()
}

/// Up to `n` consecutive transitions from one worker plus the critic's
/// value of the state after the last one (0 when that transition ended the
/// episode by termination).
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutFragment {
    pub transitions: Vec<Transition>,
    pub bootstrap: f64,
}

/// Discounted returns computed backward from `bootstrap`, and advantages
/// `G_t - V(s_t)`.
pub fn n_step_returns(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return error::config("one critic value per reward required");
    }
    let mut returns = vec![0.0; rewards.len()];
    let mut g = bootstrap;
    for t in (0..rewards.len()).rev() {
        g = rewards[t] + gamma * g;
        returns[t] = g;
    }
    let adv = returns.iter().zip(values).map(|(g, v)| g - v).collect();
    Ok((returns, adv))
}

/// Composite fragment loss and its gradients.
#[derive(Debug, Clone)]
pub struct FragmentLoss {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy_loss: f64,
    pub actor_grads: ParamStore,
    pub critic_grads: ParamStore,
}

/// Sum over the fragment of
/// `-log pi(a_t|s_t) A_t + c_v/2 (G_t - V(s_t))^2 - beta sum_a pi log pi`.
/// Advantages and returns are held constant; the
/// entropy term is differentiated through the policy and the value term
/// through the critic.
pub fn a3c_loss<P: Approximator, V: Approximator>(
    fragment: &RolloutFragment,
    actor: &P,
    actor_params: &ParamStore,
    critic: &V,
    critic_params: &ParamStore,
    config: &A3cConfig,
) -> Result<FragmentLoss> {
    let actor_c = actor.compile(actor_params)?;
    let critic_c = critic.compile(critic_params)?;
    let ts = &fragment.transitions;
    if ts.is_empty() {
        return error::config("empty rollout fragment");
    }
    let mut probs = Vec::with_capacity(ts.len());
    let mut values = Vec::with_capacity(ts.len());
    for t in ts {
        probs.push(policy(&actor.evaluate(&actor_c, &t.obs)?));
        values.push(critic.evaluate(&critic_c, &t.obs)?[0]);
    }
    let rewards: Vec<f64> = ts.iter().map(|t| t.reward).collect();
    let (returns, adv) = n_step_returns(&rewards, &values, fragment.bootstrap, config.gamma)?;

    let mut actor_grads = actor_params.zeros_like();
    let mut critic_grads = critic_params.zeros_like();
    let (mut lp, mut lv, mut le) = (0.0, 0.0, 0.0);
    let beta = config.entropy_weight;
    for (i, t) in ts.iter().enumerate() {
        let pi = &probs[i];
        if t.action >= pi.len() {
            return error::index(format!("action {} out of range", t.action));
        }
        let npe = neg_entropy(pi);
        lp += -pi[t.action].ln() * adv[i];
        lv += 0.5 * (returns[i] - values[i]).powi(2);
        le += -beta * npe;
        // d/dz_j of -log pi_a * A  and of  -beta * sum pi log pi
        let weights: Vec<f64> = pi
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let indicator = if j == t.action { 1.0 } else { 0.0 };
                let log_p = if p > 0.0 { p.ln() } else { 0.0 };
                -adv[i] * (indicator - p) - beta * p * (log_p - npe)
            })
            .collect();
        actor.accumulate_grad(&actor_c, &t.obs, &weights, 1.0, &mut actor_grads)?;
        let dv = -config.value_weight * (returns[i] - values[i]);
        critic.accumulate_grad(&critic_c, &t.obs, &[dv], 1.0, &mut critic_grads)?;
    }
    let loss = lp + config.value_weight * lv + le;
    if !loss.is_finite() {
        return error::numeric(format!("non-finite actor-critic loss {loss}"));
    }
    Ok(FragmentLoss { loss, policy_loss: lp, value_loss: lv, entropy_loss: le, actor_grads, critic_grads })
}

/// Immutable published parameters.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub version: u64,
    pub actor: ParamStore,
    pub critic: ParamStore,
}

impl Snapshot {
    pub fn checksum(&self) -> u64 {
        self.actor.checksum() ^ self.critic.checksum().rotate_left(1)
    }
}

struct Writer {
    actor: ParamStore,
    critic: ParamStore,
    actor_opt: OptimizerState,
    critic_opt: OptimizerState,
    version: u64,
}

/// Global parameters plus the single optimizer state that updates them.
pub struct SharedStore {
    latest: RwLock<Arc<Snapshot>>,
    writer: Mutex<Writer>,
    clip_norm: f64,
    /// Checksum of every version ever published, indexed by version.
    produced: Mutex<Vec<u64>>,
    audit_failures: AtomicU64,
    rejected: AtomicU64,
}

impl SharedStore {
    pub fn new(actor: ParamStore, critic: ParamStore, rates: LearningRates, clip_norm: f64) -> Self {
        let snap = Snapshot { version: 0, actor: actor.clone(), critic: critic.clone() };
        let produced = vec![snap.checksum()];
        Self {
            latest: RwLock::new(Arc::new(snap)),
            writer: Mutex::new(Writer {
                actor_opt: OptimizerState::new(&actor, rates),
                critic_opt: OptimizerState::new(&critic, rates),
                actor,
                critic,
                version: 0,
            }),
            clip_norm,
            produced: Mutex::new(produced),
            audit_failures: AtomicU64::new(0),
            rejected: AtomicU64::new(0),
        }
    }

    /// Latest complete version.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.latest.read().expect("snapshot lock poisoned"))
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version
    }

    /// Clips, applies and publishes one gradient submission. Returns the new
    /// version. A non-finite gradient is rejected without a version bump.
    pub fn apply(&self, actor_grads: &ParamStore, critic_grads: &ParamStore) -> Result<u64> {
        let mut w = self.writer.lock().expect("writer lock poisoned");
        let norm = (actor_grads.norm().powi(2) + critic_grads.norm().powi(2)).sqrt();
        if !norm.is_finite() {
            self.rejected.fetch_add(1, Ordering::Relaxed);
            return error::numeric("non-finite gradient submitted to shared store");
        }
        let (mut ga, mut gc) = (actor_grads.clone(), critic_grads.clone());
        if norm > self.clip_norm {
            let s = self.clip_norm / norm;
            ga.scale(s);
            gc.scale(s);
        }
        let Writer { actor, critic, actor_opt, critic_opt, version } = &mut *w;
        actor_opt.step(actor, &ga)?;
        critic_opt.step(critic, &gc)?;
        *version += 1;
        let snap = Snapshot { version: *version, actor: actor.clone(), critic: critic.clone() };
        self.produced.lock().expect("audit lock poisoned").push(snap.checksum());
        *self.latest.write().expect("snapshot lock poisoned") = Arc::new(snap);
        Ok(*version)
    }

    /// Checks a snapshot against the checksum recorded when its version was
    /// published; mismatches are counted.
    pub fn audit(&self, snap: &Snapshot) -> bool {
        let produced = self.produced.lock().expect("audit lock poisoned");
        let ok = produced.get(snap.version as usize) == Some(&snap.checksum());
        if !ok {
            self.audit_failures.fetch_add(1, Ordering::Relaxed);
        }
        ok
    }

    pub fn audit_failures(&self) -> u64 {
        self.audit_failures.load(Ordering::Relaxed)
    }

    pub fn rejected_updates(&self) -> u64 {
        self.rejected.load(Ordering::Relaxed)
    }
}

/// One finished episode as reported by a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Completion order across all workers.
    pub global_episode: usize,
    pub worker: usize,
    pub reward: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerReport {
    pub worker: usize,
    pub episodes: usize,
    pub updates: u64,
    /// Snapshot versions never went backwards for this worker.
    pub monotone_versions: bool,
}

/// Everything one worker needs besides its environment.
pub struct WorkerContext<'a, P: Approximator, V: Approximator> {
    pub id: usize,
    pub actor: &'a P,
    pub critic: &'a V,
    pub store: &'a SharedStore,
    pub config: &'a A3cConfig,
    pub preprocess: &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
    /// Claimed episode slots; workers stop once the budget is used.
    pub claimed: &'a AtomicUsize,
    pub rng: ChaCha8Rng,
}

fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Collect-compute-submit loop until the shared episode budget is spent.
pub fn worker_loop<P: Approximator, V: Approximator>(
    mut ctx: WorkerContext<'_, P, V>,
    env: &mut dyn Environment,
    on_episode: &mut dyn FnMut(usize, f64, usize),
) -> Result<WorkerReport> {
    let mut report = WorkerReport { worker: ctx.id, monotone_versions: true, ..WorkerReport::default() };
    let mut last_version = 0;
    while ctx.claimed.fetch_add(1, Ordering::SeqCst) < ctx.config.episodes {
        let mut obs = (ctx.preprocess)(&env.reset())?;
        let (mut ep_reward, mut ep_steps) = (0.0, 0usize);
        let mut done = false;
        while !done {
            let snap = ctx.store.snapshot();
            ctx.store.audit(&snap);
            if snap.version < last_version {
                report.monotone_versions = false;
            }
            last_version = snap.version;
            let actor_c = ctx.actor.compile(&snap.actor)?;
            let critic_c = ctx.critic.compile(&snap.critic)?;

            let mut transitions = Vec::with_capacity(ctx.config.n_step);
            let mut terminal = false;
            while transitions.len() < ctx.config.n_step && !done {
                let probs = policy(&ctx.actor.evaluate(&actor_c, &obs)?);
                let action = sample_action(&probs, &mut ctx.rng);
                let step = env.step(action)?;
                let next_obs = (ctx.preprocess)(&step.obs)?;
                ep_reward += step.reward;
                ep_steps += 1;
                done = step.done;
                terminal = step.terminal();
                transitions.push(Transition {
                    obs: std::mem::replace(&mut obs, next_obs.clone()),
                    action,
                    reward: step.reward,
                    next_obs,
                    terminal,
                });
            }
            let bootstrap = if terminal { 0.0 } else { ctx.critic.evaluate(&critic_c, &obs)?[0] };
            let fragment = RolloutFragment { transitions, bootstrap };
            let fl = a3c_loss(&fragment, ctx.actor, &snap.actor, ctx.critic, &snap.critic, ctx.config)?;
            ctx.store.apply(&fl.actor_grads, &fl.critic_grads)?;
            report.updates += 1;
        }
        report.episodes += 1;
        on_episode(ctx.id, ep_reward, ep_steps);
    }
    Ok(report)
}

/// Result of a full asynchronous run.
#[derive(Debug, Clone)]
pub struct A3cRun {
    pub records: Vec<EpisodeRecord>,
    pub reports: Vec<WorkerReport>,
    pub final_version: u64,
    pub audit_failures: u64,
    pub final_snapshot: Arc<Snapshot>,
}

/// Spawns `config.workers` threads, each with an environment from
/// `make_env(worker_id)`, and streams episode records to `on_record` from
/// the calling thread in completion order.
pub fn run_a3c<P: Approximator, V: Approximator>(
    config: &A3cConfig,
    actor: &P,
    critic: &V,
    make_env: &(dyn Fn(usize) -> Result<Box<dyn Environment>> + Sync),
    preprocess: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
    seed: u64,
    on_record: &mut dyn FnMut(&EpisodeRecord) -> Result<()>,
) -> Result<A3cRun> {
    config.validate()?;
    let actor_params = actor.init_params(&mut rng::stream(seed, "init-actor"));
    let critic_params = critic.init_params(&mut rng::stream(seed, "init-critic"));
    let store = SharedStore::new(actor_params, critic_params, config.rates, config.clip_norm);
    let claimed = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, f64, usize)>();

    let mut records = Vec::new();
    let mut sink_err = None;
    let results: Vec<Result<WorkerReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.workers)
            .map(|id| {
                let tx = tx.clone();
                let (store, claimed) = (&store, &claimed);
                scope.spawn(move || -> Result<WorkerReport> {
                    let mut env = make_env(id)?;
                    let ctx = WorkerContext {
                        id,
                        actor,
                        critic,
                        store,
                        config,
                        preprocess,
                        claimed,
                        rng: rng::stream(seed, &format!("worker-{id}")),
                    };
                    let mut send = |w: usize, r: f64, s: usize| {
                        let _ = tx.send((w, r, s));
                    };
                    worker_loop(ctx, env.as_mut(), &mut send).map_err(|e| match e {
                        Error::Numeric(m) => Error::Numeric(format!("worker {id}: {m}")),
                        other => Error::Usage(format!("worker {id} stopped: {other}")),
                    })
                })
            })
            .collect();
        drop(tx);
        for (worker, reward, steps) in rx {
            let rec = EpisodeRecord { global_episode: records.len(), worker, reward, steps };
            if sink_err.is_none() {
                if let Err(e) = on_record(&rec) {
                    sink_err = Some(e);
                }
            }
            records.push(rec);
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    if let Some(e) = sink_err {
        return Err(e);
    }
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let final_snapshot = store.snapshot();
    Ok(A3cRun {
        records,
        reports,
        final_version: final_snapshot.version,
        audit_failures: store.audit_failures(),
        final_snapshot,
    })
}
