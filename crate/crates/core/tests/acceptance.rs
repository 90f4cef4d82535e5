//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 1 5`.

mod common;

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use anoqrl::a3c::{self, A3cConfig, RolloutFragment, SharedStore};
use anoqrl::approximator::{QuantumApproximator, TabularApproximator};
use anoqrl::classical::LearningRates;
use anoqrl::dqn::{self, DqnAgent, DqnConfig};
use anoqrl::envs::{self, Environment, Step, Transition};
use anoqrl::grad::{self, Block};
use anoqrl::harness::{self, parse_config, ExperimentConfig};
use anoqrl::observable::{self, AnoObservable, GroupingScheme, HermitianParams};
use anoqrl::params::{BlockKind, ParamStore};
use anoqrl::qmodel::{Mode, QModel, QModelConfig, ThetaParams};
use anoqrl::qstate::StateVector;
use anoqrl::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Instance {
    model: QModel,
    theta: ThetaParams,
    ano: Option<AnoObservable>,
    features: Vec<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=4);
    let mode = [Mode::AnoWithRotation, Mode::RotationOnly, Mode::MeasurementOnly][rng.random_range(0..3)];
    let config = QModelConfig {
        n_qubits: n,
        n_layers: rng.random_range(0..=3),
        locality: rng.random_range(1..=n),
        mode,
        n_outputs: rng.random_range(1..=n),
    };
    let model = QModel::new(config).unwrap();
    let theta = ThetaParams::random(config.effective_layers(), n, rng);
    let ano = model.scheme().map(|s| {
        let per = s.groups().iter().map(|_| HermitianParams::random(config.locality, rng)).collect();
        AnoObservable::new(s.clone(), per).unwrap()
    });
    let features = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
    Instance { model, theta, ano, features }
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let c = inst.model.config();
        let logits = inst.model.forward(&inst.theta, inst.ano.as_ref(), &inst.features).unwrap().logits;
        let phis: Option<Vec<Vec<f64>>> = inst.ano.as_ref().map(|a| a.per_group().iter().map(|h| h.to_flat()).collect());
        let dense = common::dense_logits(
            c.n_qubits,
            c.effective_layers(),
            c.locality,
            &inst.theta.angles,
            phis.as_deref(),
            &inst.features,
            c.n_outputs,
        );
        for (a, b) in logits.iter().zip(&dense) {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 10.0, format!("max |diff| {worst:.2e} over 200 instances in {secs:.2}s"))
}

fn gradient_suite() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let o = rng.random_range(0..inst.model.config().n_outputs);
        let (m, t, a, f) = (&inst.model, &inst.theta, inst.ano.as_ref(), &inst.features);
        let mut pairs = vec![
            (grad::grad_theta(m, t, a, f, o).unwrap(), grad::fd_oracle(m, t, a, f, o, Block::Theta, 1e-5).unwrap()),
            (grad::grad_features(m, t, a, f, o).unwrap(), grad::fd_oracle(m, t, a, f, o, Block::Features, 1e-5).unwrap()),
        ];
        if a.is_some() {
            let phi: Vec<f64> = grad::grad_phi(m, t, a, f, o).unwrap().iter().flat_map(|h| h.to_flat()).collect();
            pairs.push((phi, grad::fd_oracle(m, t, a, f, o, Block::Phi, 1e-5).unwrap()));
        }
        for (exact, fd) in pairs {
            assert_eq!(exact.len(), fd.len());
            for (x, y) in exact.iter().zip(&fd) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs < 60.0, format!("sup-norm {worst:.2e} over 200 instances in {secs:.2}s"))
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let amps: Vec<Complex64> =
        (0..1 << n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn rayleigh_and_pauli_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut rayleigh_violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(1..=n);
        let sv = random_state(n, &mut rng);
        let scheme = GroupingScheme::build(n, k).unwrap();
        let group = &scheme.groups()[rng.random_range(0..n)];
        let hp = HermitianParams::random(k, &mut rng);
        let e = observable::expectation(&sv, group, &hp).unwrap();
        let spec = hp.spectrum().unwrap();
        if !(spec[0] - 1e-8 <= e && e <= spec[spec.len() - 1] + 1e-8) {
            rayleigh_violations += 1;
        }
    }
    let mut pauli_violations = 0;
    let mut evaluations = 0;
    while evaluations < 1000 {
        let n = rng.random_range(1..=4);
        let config = QModelConfig {
            n_qubits: n,
            n_layers: rng.random_range(1..=3),
            locality: 1,
            mode: Mode::RotationOnly,
            n_outputs: n,
        };
        let model = QModel::new(config).unwrap();
        let theta = ThetaParams::random(config.n_layers, n, &mut rng);
        let features: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        for l in model.forward(&theta, None, &features).unwrap().logits {
            evaluations += 1;
            if !(-1.0..=1.0).contains(&l) {
                pauli_violations += 1;
            }
        }
    }
    outcome(
        rayleigh_violations == 0 && pauli_violations == 0,
        format!(
            "{rayleigh_violations}/1000 Rayleigh violations, {pauli_violations}/{evaluations} Pauli-bound violations"
        ),
    )
}

/// Three states in a row. Leaving past the left end pays 0.88, past the
/// right end 1.0; inner moves pay nothing. Starts are uniform.
struct Chain {
    state: usize,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Environment for Chain {
    fn n_actions(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn reset(&mut self) -> Vec<f64> {
        self.state = self.rng.random_range(0..3);
        self.steps = 0;
        vec![self.state as f64]
    }
    fn step(&mut self, action: usize) -> Result<Step> {
        self.steps += 1;
        let (reward, done) = match (self.state, action) {
            (0, 0) => (0.88, true),
            (2, 1) => (1.0, true),
            (s, 0) => {
                self.state = s - 1;
                (0.0, false)
            }
            (s, _) => {
                self.state = s + 1;
                (0.0, false)
            }
        };
        let truncated = !done && self.steps >= 20;
        Ok(Step { obs: vec![self.state as f64], reward, done: done || truncated, truncated })
    }
}

fn chain_value_iteration(gamma: f64) -> Vec<usize> {
    let mut v = [0.0f64; 3];
    let q = |v: &[f64; 3], s: usize, a: usize| match (s, a) {
        (0, 0) => 0.88,
        (2, 1) => 1.0,
        (s, 0) => gamma * v[s - 1],
        (s, _) => gamma * v[s + 1],
    };
    for _ in 0..1000 {
        let next = [0, 1, 2].map(|s| q(&v, s, 0).max(q(&v, s, 1)));
        v = next;
    }
    (0..3).map(|s| if q(&v, s, 1) > q(&v, s, 0) { 1 } else { 0 }).collect()
}

/// One-step episodes with Bernoulli payouts 0.2 (arm 0) and 0.8 (arm 1).
struct Bandit {
    rng: ChaCha8Rng,
}

impl Environment for Bandit {
    fn n_actions(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        2
    }
    fn reset(&mut self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
    fn step(&mut self, action: usize) -> Result<Step> {
        let p = if action == 1 { 0.8 } else { 0.2 };
        let reward = if self.rng.random::<f64>() < p { 1.0 } else { 0.0 };
        Ok(Step { obs: vec![0.0, 0.0], reward, done: true, truncated: false })
    }
}

fn greedy(q: &[f64]) -> usize {
    if q[1] > q[0] {
        1
    } else {
        0
    }
}

fn tabular_correctness() -> Outcome {
    let gamma = 0.9;
    let optimal = chain_value_iteration(gamma);
    let config = DqnConfig { gamma, episodes: 300, ..DqnConfig::default() };
    let mut agent = DqnAgent::new(TabularApproximator { n_states: 3, n_actions: 2 }, config.clone(), 7).unwrap();
    let mut env = Chain { state: 0, steps: 0, rng: anoqrl::rng::stream(7, "chain") };
    let identity = |o: &[f64]| Ok(o.to_vec());
    for ep in 0..config.episodes {
        agent.run_episode(&mut env, &identity, ep).unwrap();
    }
    let learned: Vec<usize> = (0..3).map(|s| greedy(&agent.q_values(&[s as f64]).unwrap())).collect();
    let chain_ok = learned == optimal && optimal == vec![0, 1, 1];

    let mut bandit_ok = 0;
    let mut margins = Vec::new();
    for seed in 1..=5u64 {
        let cfg = QModelConfig { n_qubits: 2, n_layers: 1, locality: 2, mode: Mode::AnoWithRotation, n_outputs: 2 };
        let config = DqnConfig { episodes: 500, ..DqnConfig::default() };
        let mut agent = DqnAgent::new(QuantumApproximator::new(cfg).unwrap(), config.clone(), seed).unwrap();
        let mut env = Bandit { rng: anoqrl::rng::stream(seed, "bandit") };
        for ep in 0..config.episodes {
            agent.run_episode(&mut env, &identity, ep).unwrap();
        }
        let q = agent.q_values(&[0.0, 0.0]).unwrap();
        margins.push(q[1] - q[0]);
        if greedy(&q) == 1 {
            bandit_ok += 1;
        }
    }
    outcome(
        chain_ok && bandit_ok == 5,
        format!(
            "chain policy {learned:?} (value iteration {optimal:?}); bandit best arm on {bandit_ok}/5 seeds, Q margins {}",
            margins.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn table(values: &[f64]) -> ParamStore {
    let mut s = ParamStore::new();
    s.push("table", BlockKind::Table, values.to_vec());
    s
}

fn loss_arithmetic() -> Outcome {
    let (g, _) = a3c::n_step_returns(&[1.0, 1.0], &[0.0, 0.0], 0.5, 0.9).unwrap();
    let returns_ok = (g[0] - 2.305).abs() < 1e-12 && (g[1] - 1.45).abs() < 1e-12;

    // state 0: pi = (1/4, 3/4), takes action 1, V = 0.2
    // state 1: pi = (4/5, 1/5), takes action 0, V = -0.3
    let actor = TabularApproximator { n_states: 2, n_actions: 2 };
    let critic = TabularApproximator { n_states: 2, n_actions: 1 };
    let actor_params = table(&[0.0, 3f64.ln(), 4f64.ln(), 0.0]);
    let critic_params = table(&[0.2, -0.3]);
    let fragment = RolloutFragment {
        transitions: vec![
            Transition { obs: vec![0.0], action: 1, reward: 1.0, next_obs: vec![1.0], terminal: false },
            Transition { obs: vec![1.0], action: 0, reward: 1.0, next_obs: vec![0.0], terminal: false },
        ],
        bootstrap: 0.5,
    };
    let config = A3cConfig { gamma: 0.9, value_weight: 0.5, entropy_weight: 0.01, ..A3cConfig::default() };
    let fl = a3c::a3c_loss(&fragment, &actor, &actor_params, &critic, &critic_params, &config).unwrap();
    // advantages 2.105 and 1.75:
    //   policy  2.105 ln(4/3) + 1.75 ln(5/4)
    //   value   0.5 * 0.5 * (2.105^2 + 1.75^2)
    //   entropy 0.01 * (H(1/4, 3/4) + H(4/5, 1/5))
    let expected = 2.880080602992435;
    let diff = (fl.loss - expected).abs();
    outcome(
        returns_ok && diff <= 1e-10,
        format!("G = {:.15}, loss {:.15} vs {expected} (|diff| {diff:.1e})", g[0], fl.loss),
    )
}

fn config(text: &str) -> ExperimentConfig {
    parse_config(text).unwrap()
}

fn dqn_curve(c: &ExperimentConfig) -> Result<(Vec<f64>, usize)> {
    let approx = harness::run::build_approximator(c, c.env.n_actions())?;
    let mut env = c.env.make(anoqrl::rng::derive_seed(c.seed, "env"))?;
    let (kind, n) = (c.env, c.model.qubits);
    let pre = move |o: &[f64]| envs::preprocess(o, kind, n);
    let mut successes = 0;
    let rewards = dqn::run_dqn(&c.dqn_config(), approx, env.as_mut(), &pre, c.seed, &mut |s| {
        if s.terminated {
            successes += 1;
        }
        Ok(())
    })?;
    Ok((rewards, successes))
}

fn final_ma(rewards: &[f64]) -> f64 {
    *harness::moving_average(rewards, 100).unwrap().mean.last().unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

const CARTPOLE: &str = r#"
algorithm = "dqn"
env = "cartpole"
seed = 1
episodes = 300

[model]
mode = "ano_with_rotation"
qubits = 4
locality = 3
"#;

fn cartpole_dqn() -> Outcome {
    let started = Instant::now();
    let (mut ano, mut rot) = (Vec::new(), Vec::new());
    for seed in 1..=3 {
        let mut c = config(CARTPOLE);
        c.seed = seed;
        ano.push(final_ma(&dqn_curve(&c).unwrap().0));
        c.model.mode = Mode::RotationOnly;
        c.model.locality = None;
        rot.push(final_ma(&dqn_curve(&c).unwrap().0));
    }
    let wins = ano.iter().zip(&rot).filter(|(a, r)| a > r).count();
    let med = median(ano.clone());
    outcome(
        med >= 150.0 && wins >= 2,
        format!(
            "300 episodes: moving average ANO {ano:.1?} (median {med:.1}), rotation-only {rot:.1?}, ANO ahead on {wins}/3 seeds, {:.0}s",
            started.elapsed().as_secs_f64()
        ),
    )
}

const MOUNTAINCAR: &str = r#"
algorithm = "dqn"
env = "mountaincar"
seed = 1
episodes = 500

[model]
mode = "ano_with_rotation"
qubits = 4
locality = 3

[dqn]
train_every = 4

[rates]
phi = 0.00125
"#;

fn mountaincar_ablation() -> Outcome {
    let started = Instant::now();
    let mut six = Vec::new();
    let mut three = Vec::new();
    let mut rot = Vec::new();
    for seed in 1..=3 {
        let mut c = config(MOUNTAINCAR);
        c.seed = seed;
        three.push(dqn_curve(&c).unwrap().1);
        let mut c6 = c.clone();
        c6.model.qubits = 6;
        c6.model.locality = Some(6);
        six.push(dqn_curve(&c6).unwrap().1);
        let mut cr = c.clone();
        cr.model.mode = Mode::RotationOnly;
        cr.model.locality = None;
        rot.push(dqn_curve(&cr).unwrap().1);
    }
    let six_ok = (0..3).filter(|&i| six[i] >= three[i]).count();
    let rot_fewest = (0..3).filter(|&i| rot[i] < three[i] && rot[i] < six[i]).count();
    outcome(
        six_ok >= 2 && rot_fewest >= 2,
        format!(
            "goal reaches in 500 episodes: 6-local {six:?}, 3-local {three:?}, rotation-only {rot:?}; {:.0}s",
            started.elapsed().as_secs_f64()
        ),
    )
}

fn a3c_setup(c: &ExperimentConfig) -> (QuantumApproximator, QuantumApproximator) {
    (
        harness::run::build_approximator(c, c.env.n_actions()).unwrap(),
        harness::run::build_approximator(c, 1).unwrap(),
    )
}

fn run_a3c(c: &ExperimentConfig) -> Result<a3c::A3cRun> {
    let (actor, critic) = a3c_setup(c);
    let (kind, n, seed) = (c.env, c.model.qubits, c.seed);
    let make_env = move |w: usize| kind.make(anoqrl::rng::derive_seed(seed, &format!("env-{w}")));
    let pre = move |o: &[f64]| envs::preprocess(o, kind, n);
    a3c::run_a3c(&c.a3c_config(), &actor, &critic, &make_env, &pre, seed, &mut |_| Ok(()))
}

const CARTPOLE_A3C: &str = r#"
algorithm = "a3c"
env = "cartpole"
seed = 1
episodes = 2000

[model]
mode = "ano_with_rotation"
qubits = 4
locality = 3

[a3c]
workers = 4
"#;

fn hammer_store() -> (u64, u64, bool) {
    let store = SharedStore::new(table(&[0.0; 8]), table(&[0.0; 2]), LearningRates::default(), 5.0);
    let torn = AtomicBool::new(false);
    std::thread::scope(|s| {
        for w in 0..4 {
            let (store, torn) = (&store, &torn);
            s.spawn(move || {
                let mut last = 0;
                for i in 0..2500 {
                    let snap = store.snapshot();
                    if snap.version < last || !store.audit(&snap) {
                        torn.store(true, Ordering::Relaxed);
                    }
                    last = snap.version;
                    let g = (w * 2500 + i) as f64;
                    let v = store.apply(&table(&[g.sin(); 8]), &table(&[g.cos(); 2])).unwrap();
                    if v <= last {
                        torn.store(true, Ordering::Relaxed);
                    }
                }
            });
        }
    });
    (store.version(), store.audit_failures(), torn.load(Ordering::Relaxed))
}

fn a3c_concurrency() -> Outcome {
    let started = Instant::now();
    let c = config(CARTPOLE_A3C);
    let run = run_a3c(&c).unwrap();
    let total_updates: u64 = run.reports.iter().map(|r| r.updates).sum();
    let monotone = run.reports.iter().all(|r| r.monotone_versions);
    let mut order: Vec<usize> = run.records.iter().map(|r| r.global_episode).collect();
    order.sort();
    let complete = order == (0..2000).collect::<Vec<_>>();
    let ma = final_ma(&run.records.iter().map(|r| r.reward).collect::<Vec<_>>());

    let mut single = config(CARTPOLE_A3C);
    single.a3c.workers = 1;
    single.episodes = 40;
    single.sync();
    let a = run_a3c(&single).unwrap();
    let b = run_a3c(&single).unwrap();
    let reproducible = a.records == b.records && a.final_snapshot.checksum() == b.final_snapshot.checksum();

    let (hammer_version, hammer_failures, torn) = hammer_store();
    let pass = complete
        && run.audit_failures == 0
        && monotone
        && run.final_version == total_updates
        && reproducible
        && hammer_version == 10_000
        && hammer_failures == 0
        && !torn;
    outcome(
        pass,
        format!(
            "{} episodes, {} updates, audit failures {}, monotone {monotone}, moving average {ma:.1}; workers=1 reproducible {reproducible}; store hammer {hammer_version} versions, {hammer_failures} audit failures; {:.0}s",
            run.records.len(),
            run.final_version,
            run.audit_failures,
            started.elapsed().as_secs_f64()
        ),
    )
}

const GRID: &str = r#"
algorithm = "a3c"
env = "minigrid8x8"
grid_size = 5
seed = 1
episodes = 4000

[model]
mode = "ano_with_rotation"
qubits = 4
locality = 3
"#;

fn grid_smoke() -> Outcome {
    let started = Instant::now();
    let mut peaks = Vec::new();
    for seed in 1..=3 {
        let mut c = config(GRID);
        c.seed = seed;
        let run = run_a3c(&c).unwrap();
        let mut rewards = vec![0.0; run.records.len()];
        for r in &run.records {
            rewards[r.global_episode] = r.reward;
        }
        let ma = harness::moving_average(&rewards, 100).unwrap().mean;
        peaks.push(ma.iter().skip(99).copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let hits = peaks.iter().filter(|p| **p >= 0.80).count();
    outcome(
        hits >= 2,
        format!(
            "best full-window moving average per seed {peaks:.3?}, {hits}/3 reach 0.80; {:.0}s",
            started.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("gradient suite", gradient_suite),
        ("Rayleigh and Pauli bounds", rayleigh_and_pauli_bounds),
        ("tabular correctness", tabular_correctness),
        ("actor-critic loss arithmetic", loss_arithmetic),
        ("CartPole DQN smoke", cartpole_dqn),
        ("MountainCar locality ablation", mountaincar_ablation),
        ("A3C concurrency", a3c_concurrency),
        ("grid A3C smoke", grid_smoke),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !result.pass {
            failed += 1;
        }
        println!("[{}] criterion {id} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
