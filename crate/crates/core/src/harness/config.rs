//! Experiment configuration: a small TOML document with a few sections.
//!
//! ```toml
//! algorithm = "dqn"        # or "a3c"
//! env = "cartpole"         # mountaincar, minigrid8x8, simplecrossing
//! seed = 7
//! episodes = 500
//! out_dir = "runs"
//!
//! [model]
//! mode = "ano_with_rotation"
//! qubits = 4
//! layers = 1
//! locality = 3
//!
//! [dqn]
//! gamma = 0.99
//! ```
//!
//! Parsing reports every problem found, each tagged with its key path.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::a3c::A3cConfig;
use crate::classical::LearningRates;
use crate::dqn::DqnConfig;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::qmodel::{Mode, QModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dqn,
    A3c,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::A3c => "a3c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub mode: Mode,
    pub qubits: usize,
    pub layers: usize,
    /// Absent for rotation-only models.
    pub locality: Option<usize>,
}

impl ModelSpec {
    pub fn to_config(&self, n_outputs: usize) -> QModelConfig {
        QModelConfig {
            n_qubits: self.qubits,
            n_layers: self.layers,
            locality: self.locality.unwrap_or(0),
            mode: self.mode,
            n_outputs,
        }
    }

    /// Short tag such as `ano_with_rotation-k3`.
    pub fn tag(&self) -> String {
        match self.locality {
            Some(k) => format!("{}-k{k}", self.mode.as_str()),
            None => self.mode.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub model: ModelSpec,
    pub seed: u64,
    pub episodes: usize,
    pub out_dir: PathBuf,
    pub dqn: DqnConfig,
    pub a3c: A3cConfig,
    pub rates: LearningRates,
}

impl ExperimentConfig {
    /// Defaults for `algorithm` on `env` with the given model and seed.
    pub fn new(algorithm: Algorithm, env: EnvKind, model: ModelSpec, seed: u64) -> Self {
        let mut dqn = DqnConfig::default();
        if env == EnvKind::MountainCar {
            dqn.gamma = 0.999;
        }
        let episodes = dqn.episodes;
        Self {
            algorithm,
            env,
            model,
            seed,
            episodes,
            out_dir: PathBuf::from("runs"),
            dqn,
            a3c: A3cConfig { episodes, ..A3cConfig::default() },
            rates: LearningRates::default(),
        }
    }

    /// Copies the shared budget and rates into the algorithm sections.
    pub fn sync(&mut self) {
        self.dqn.episodes = self.episodes;
        self.dqn.rates = self.rates;
        self.a3c.episodes = self.episodes;
        self.a3c.rates = self.rates;
    }

    /// DQN settings with the shared budget and rates applied.
    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig { episodes: self.episodes, rates: self.rates, ..self.dqn.clone() }
    }

    pub fn a3c_config(&self) -> A3cConfig {
        A3cConfig { episodes: self.episodes, rates: self.rates, ..self.a3c.clone() }
    }

    /// File stem used for this run's outputs.
    pub fn run_name(&self) -> String {
        let env = match self.env {
            EnvKind::MiniGrid { side } => format!("minigrid{side}x{side}"),
            other => other.name().to_string(),
        };
        format!("{}_{}_{}_q{}_seed{}", self.algorithm.as_str(), env, self.model.tag(), self.model.qubits, self.seed)
    }

    /// Cross-field checks; every violation is reported.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        check_combinations(self, &mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

fn check_combinations(c: &ExperimentConfig, errs: &mut Vec<String>) {
    let m = &c.model;
    match (m.mode, m.locality) {
        (Mode::RotationOnly, Some(_)) => {
            errs.push("model.locality: rotation_only models take no locality".to_string())
        }
        (Mode::AnoWithRotation | Mode::MeasurementOnly, None) => {
            errs.push(format!("model.locality: required for {}", m.mode.as_str()))
        }
        (_, Some(k)) if k == 0 || k > m.qubits => errs.push(format!(
            "model.locality: locality exceeds qubit count (k = {k}, n = {})",
            m.qubits
        )),
        _ => {}
    }
    let n_out = c.env.n_actions();
    if let Err(e) = m.to_config(n_out).validate() {
        let msg = e.to_string();
        if !msg.contains("locality") {
            errs.push(format!("model: {msg}"));
        }
    }
    match c.env {
        EnvKind::CartPole if !m.qubits.is_multiple_of(4) => {
            errs.push(format!("model.qubits: cartpole needs a multiple of 4, got {}", m.qubits))
        }
        EnvKind::MountainCar if !m.qubits.is_multiple_of(2) => {
            errs.push(format!("model.qubits: mountaincar needs a multiple of 2, got {}", m.qubits))
        }
        EnvKind::MiniGrid { side } if side < 4 => {
            errs.push(format!("grid_size: {side} is too small (minimum 4)"))
        }
        _ => {}
    }
    let inner = match c.algorithm {
        Algorithm::Dqn => c.dqn_config().validate(),
        Algorithm::A3c => c.a3c_config().validate(),
    };
    if let Err(Error::Validation(v)) = inner {
        let section = c.algorithm.as_str();
        errs.extend(v.into_iter().map(|e| format!("{section}: {e}")));
    }
}

/// Collects typed lookups and problems while walking a table.
struct Reader<'a, 'e> {
    table: &'a Table,
    path: &'static str,
    seen: Vec<&'static str>,
    errs: &'e mut Vec<String>,
}

impl<'a, 'e> Reader<'a, 'e> {
    fn new(table: &'a Table, path: &'static str, errs: &'e mut Vec<String>) -> Self {
        Self { table, path, seen: Vec::new(), errs }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn raw(&mut self, k: &'static str) -> Option<&'a Value> {
        self.seen.push(k);
        self.table.get(k)
    }

    fn string(&mut self, k: &'static str) -> Option<&'a str> {
        match self.raw(k)? {
            Value::String(s) => Some(s),
            other => {
                self.errs.push(format!("{}: expected a string, found {}", self.key(k), other.type_str()));
                None
            }
        }
    }

    fn uint(&mut self, k: &'static str) -> Option<u64> {
        match self.raw(k)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            other => {
                self.errs.push(format!("{}: expected a non-negative integer, found {other}", self.key(k)));
                None
            }
        }
    }

    fn usize_or(&mut self, k: &'static str, default: usize) -> usize {
        self.uint(k).map_or(default, |v| v as usize)
    }

    fn float_or(&mut self, k: &'static str, default: f64) -> f64 {
        match self.raw(k) {
            None => default,
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(other) => {
                self.errs.push(format!("{}: expected a number, found {}", self.key(k), other.type_str()));
                default
            }
        }
    }

    fn section(&mut self, k: &'static str) -> Option<&'a Table> {
        match self.raw(k)? {
            Value::Table(t) => Some(t),
            other => {
                self.errs.push(format!("{}: expected a section, found {}", self.key(k), other.type_str()));
                None
            }
        }
    }

    /// Flags keys that were never looked up.
    fn finish(self) {
        for k in self.table.keys() {
            if !self.seen.contains(&k.as_str()) {
                let key = if self.path.is_empty() { k.clone() } else { format!("{}.{k}", self.path) };
                self.errs.push(format!("{key}: unknown key"));
            }
        }
    }
}

fn parse_env(name: &str, grid_size: Option<u64>) -> std::result::Result<EnvKind, String> {
    match name {
        "cartpole" => Ok(EnvKind::CartPole),
        "mountaincar" => Ok(EnvKind::MountainCar),
        "minigrid8x8" => Ok(EnvKind::MiniGrid { side: grid_size.unwrap_or(8) as usize }),
        "simplecrossing" => Ok(EnvKind::SimpleCrossing),
        other => Err(format!("env: unknown environment {other:?}")),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Validation(vec![e.message().to_string()]))?;
    let mut errs = Vec::new();
    let mut r = Reader::new(&doc, "", &mut errs);
    let algorithm = match r.string("algorithm") {
        Some("dqn") => Some(Algorithm::Dqn),
        Some("a3c") => Some(Algorithm::A3c),
        Some(other) => {
            r.errs.push(format!("algorithm: expected \"dqn\" or \"a3c\", found {other:?}"));
            None
        }
        None => {
            r.errs.push("algorithm: missing".to_string());
            None
        }
    };
    let grid_size = r.uint("grid_size");
    let env = match r.string("env") {
        Some(name) => match parse_env(name, grid_size) {
            Ok(e) => Some(e),
            Err(m) => {
                r.errs.push(m);
                None
            }
        },
        None => {
            r.errs.push("env: missing".to_string());
            None
        }
    };
    if grid_size.is_some() && !matches!(env, Some(EnvKind::MiniGrid { .. }) | None) {
        r.errs.push("grid_size: only valid for minigrid8x8".to_string());
    }
    let seed = r.uint("seed");
    if seed.is_none() && !r.table.contains_key("seed") {
        r.errs.push("seed: missing (runs are always explicitly seeded)".to_string());
    }
    let episodes = r.uint("episodes").map(|v| v as usize);
    let out_dir = r.string("out_dir").map(PathBuf::from);
    let model_t = r.section("model");
    let dqn_t = r.section("dqn");
    let a3c_t = r.section("a3c");
    let rates_t = r.section("rates");
    r.finish();

    let empty = Table::new();
    let model = {
        let mut m = Reader::new(model_t.unwrap_or(&empty), "model", &mut errs);
        let mode = match m.string("mode") {
            Some(s) => {
                let mode = Mode::parse(s);
                if mode.is_none() {
                    m.errs.push(format!("model.mode: unknown mode {s:?}"));
                }
                mode
            }
            None => {
                m.errs.push("model.mode: missing".to_string());
                None
            }
        };
        let qubits = m.usize_or("qubits", 4);
        let layers = m.usize_or("layers", 1);
        let locality = m.uint("locality").map(|v| v as usize);
        m.finish();
        mode.map(|mode| ModelSpec { mode, qubits, layers, locality })
    };

    let (Some(algorithm), Some(env), Some(model)) = (algorithm, env, model) else {
        return Err(Error::Validation(errs));
    };
    // a missing seed is already reported; keep going to collect the rest
    let mut cfg = ExperimentConfig::new(algorithm, env, model, seed.unwrap_or(0));
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }

    {
        let mut d = Reader::new(dqn_t.unwrap_or(&empty), "dqn", &mut errs);
        let q = &mut cfg.dqn;
        q.gamma = d.float_or("gamma", q.gamma);
        q.epsilon_start = d.float_or("epsilon_start", q.epsilon_start);
        q.epsilon_end = d.float_or("epsilon_end", q.epsilon_end);
        q.epsilon_decay = d.float_or("epsilon_decay", q.epsilon_decay);
        q.batch_size = d.usize_or("batch_size", q.batch_size);
        q.capacity = d.usize_or("capacity", q.capacity);
        q.target_period = d.usize_or("target_period", q.target_period);
        q.train_every = d.usize_or("train_every", q.train_every);
        d.finish();
    }
    {
        let mut a = Reader::new(a3c_t.unwrap_or(&empty), "a3c", &mut errs);
        let c = &mut cfg.a3c;
        c.workers = a.usize_or("workers", c.workers);
        c.n_step = a.usize_or("n_step", c.n_step);
        c.gamma = a.float_or("gamma", c.gamma);
        c.value_weight = a.float_or("value_weight", c.value_weight);
        c.entropy_weight = a.float_or("entropy_weight", c.entropy_weight);
        c.clip_norm = a.float_or("clip_norm", c.clip_norm);
        a.finish();
    }
    {
        let mut l = Reader::new(rates_t.unwrap_or(&empty), "rates", &mut errs);
        let r = &mut cfg.rates;
        r.theta = l.float_or("theta", r.theta);
        r.phi = l.float_or("phi", r.phi);
        r.linear = l.float_or("linear", r.linear);
        l.finish();
    }
    cfg.sync();

    check_combinations(&cfg, &mut errs);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(errs))
    }
}

/// Writes a document that parses back to an equal configuration.
pub fn render_config(c: &ExperimentConfig) -> String {
    let mut top = Table::new();
    top.insert("algorithm".into(), c.algorithm.as_str().into());
    top.insert("env".into(), c.env.name().into());
    if let EnvKind::MiniGrid { side } = c.env {
        top.insert("grid_size".into(), Value::Integer(side as i64));
    }
    top.insert("seed".into(), Value::Integer(c.seed as i64));
    top.insert("episodes".into(), Value::Integer(c.episodes as i64));
    top.insert("out_dir".into(), c.out_dir.to_string_lossy().as_ref().into());

    let mut model = Table::new();
    model.insert("mode".into(), c.model.mode.as_str().into());
    model.insert("qubits".into(), Value::Integer(c.model.qubits as i64));
    model.insert("layers".into(), Value::Integer(c.model.layers as i64));
    if let Some(k) = c.model.locality {
        model.insert("locality".into(), Value::Integer(k as i64));
    }
    top.insert("model".into(), Value::Table(model));

    let q = &c.dqn;
    let mut dqn = Table::new();
    dqn.insert("gamma".into(), q.gamma.into());
    dqn.insert("epsilon_start".into(), q.epsilon_start.into());
    dqn.insert("epsilon_end".into(), q.epsilon_end.into());
    dqn.insert("epsilon_decay".into(), q.epsilon_decay.into());
    dqn.insert("batch_size".into(), Value::Integer(q.batch_size as i64));
    dqn.insert("capacity".into(), Value::Integer(q.capacity as i64));
    dqn.insert("target_period".into(), Value::Integer(q.target_period as i64));
    dqn.insert("train_every".into(), Value::Integer(q.train_every as i64));
    top.insert("dqn".into(), Value::Table(dqn));

    let a = &c.a3c;
    let mut a3c = Table::new();
    a3c.insert("workers".into(), Value::Integer(a.workers as i64));
    a3c.insert("n_step".into(), Value::Integer(a.n_step as i64));
    a3c.insert("gamma".into(), a.gamma.into());
    a3c.insert("value_weight".into(), a.value_weight.into());
    a3c.insert("entropy_weight".into(), a.entropy_weight.into());
    a3c.insert("clip_norm".into(), a.clip_norm.into());
    top.insert("a3c".into(), Value::Table(a3c));

    let mut rates = Table::new();
    rates.insert("theta".into(), c.rates.theta.into());
    rates.insert("phi".into(), c.rates.phi.into());
    rates.insert("linear".into(), c.rates.linear.into());
    top.insert("rates".into(), Value::Table(rates));

    toml::to_string(&top).expect("plain tables always serialize")
}
