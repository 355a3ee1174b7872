//! Run configuration: a UTF-8 key=value file with dotted section prefixes
//! (world.S=48), overridable from the command line. Every key has a default
//! except the top-level seed; unknown keys are rejected by name.

use crate::error::{Error, Result};
use crate::sampler::SolverMethod;
use crate::scorenet::CondConfig;
use crate::sde::VarianceSchedule;
use crate::seed;
use crate::synthdata::WorldConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub cond: CondConfig,
    pub channels: [usize; 3],
    pub emb_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub t_min: f64,
}

impl DiffusionConfig {
    pub fn schedule(&self) -> Result<VarianceSchedule> {
        VarianceSchedule::new(self.sigma_min, self.sigma_max, self.t_min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub p_uncond: f64,
    pub val_every: usize,
    pub val_cases: usize,
    pub val_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub solver: SolverMethod,
    pub steps: usize,
    pub members: usize,
    pub guidance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Cap on evaluated test cases; 0 means the whole test split.
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub diffusion: DiffusionConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    fn from_lines(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {} has no '=': {:?}", ln + 1, raw))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KvMap { entries })
    }

    fn apply_overrides(&mut self, overrides: &[(String, String)]) {
        for (k, v) in overrides {
            self.entries.insert(k.trim().to_string(), v.trim().to_string());
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad value {:?} for key {}", v, key))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config(format!("unknown config key: {}", key)));
        }
        Ok(())
    }
}

pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut kv = KvMap::from_lines(text)?;
    kv.apply_overrides(overrides);

    let seed: u64 = match kv.take("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad value {:?} for key seed", v)))?,
        None => return Err(Error::Config("missing required key: seed".into())),
    };

    let mut world = WorldConfig::defaults(seed::derive(seed, 101));
    world.canvas = kv.take_parsed("world.S", world.canvas)?;
    world.base = kv.take_parsed("world.L", world.base)?;
    world.spectral_slope = kv.take_parsed("world.spectral_slope", world.spectral_slope)?;
    world.ar_rho = kv.take_parsed("world.ar_rho", world.ar_rho)?;
    world.err_scale = kv.take_parsed("world.err_scale", world.err_scale)?;
    world.err_timescale = kv.take_parsed("world.err_timescale", world.err_timescale)?;
    world.bias_amplitude = kv.take_parsed("world.bias_amplitude", world.bias_amplitude)?;
    world.ensemble_spread = kv.take_parsed("world.ensemble_spread", world.ensemble_spread)?;
    world.n_train = kv.take_parsed("world.n_train", world.n_train)?;
    world.n_val = kv.take_parsed("world.n_val", world.n_val)?;
    world.n_test = kv.take_parsed("world.n_test", world.n_test)?;
    world.members = kv.take_parsed("world.members", world.members)?;
    world.seed = kv.take_parsed("world.seed", world.seed)?;

    let cond = match kv.take("model.config") {
        Some(v) => CondConfig::parse(&v)?,
        None => CondConfig::LrWsSf,
    };
    let model = ModelConfig {
        cond,
        channels: [
            kv.take_parsed("model.c0", 32usize)?,
            kv.take_parsed("model.c1", 64usize)?,
            kv.take_parsed("model.c2", 128usize)?,
        ],
        emb_dim: kv.take_parsed("model.emb_dim", 64usize)?,
    };

    let diffusion = DiffusionConfig {
        sigma_min: kv.take_parsed("diffusion.sigma_min", 0.01)?,
        sigma_max: kv.take_parsed("diffusion.sigma_max", 50.0)?,
        t_min: kv.take_parsed("diffusion.t_min", 1e-3)?,
    };

    let train = TrainConfig {
        batch: kv.take_parsed("train.batch", 4usize)?,
        steps: kv.take_parsed("train.steps", 2000usize)?,
        lr: kv.take_parsed("train.lr", 2e-4)?,
        clip_norm: kv.take_parsed("train.clip_norm", 1.0)?,
        p_uncond: kv.take_parsed("train.p_uncond", 0.1)?,
        val_every: kv.take_parsed("train.val_every", 200usize)?,
        val_cases: kv.take_parsed("train.val_cases", 4usize)?,
        val_steps: kv.take_parsed("train.val_steps", 20usize)?,
        seed: kv.take_parsed("train.seed", seed::derive(seed, 201))?,
    };

    let solver = match kv.take("sample.solver") {
        Some(v) => SolverMethod::parse(&v)?,
        None => SolverMethod::EulerMaruyama,
    };
    let sample = SampleConfig {
        solver,
        steps: kv.take_parsed("sample.steps", 100usize)?,
        members: kv.take_parsed("sample.members", 10usize)?,
        guidance: kv.take_parsed("sample.guidance", 0.0)?,
        seed: kv.take_parsed("sample.seed", seed::derive(seed, 301))?,
    };

    let eval = EvalConfig { cases: kv.take_parsed("eval.cases", 0usize)? };

    let out: PathBuf = kv.take("paths.out").unwrap_or_else(|| "out".into()).into();
    let paths = PathsConfig {
        data: kv.take("paths.data").unwrap_or_else(|| "data".into()).into(),
        checkpoint: kv
            .take("paths.checkpoint")
            .map(PathBuf::from)
            .unwrap_or_else(|| out.join("model.dspt")),
        out,
    };

    kv.finish()?;

    world.validate()?;
    if train.batch == 0 || train.steps == 0 {
        return Err(Error::Config("train.batch and train.steps must be positive".into()));
    }
    if !(0.0..1.0).contains(&train.p_uncond) {
        return Err(Error::Config(format!(
            "train.p_uncond {} outside [0,1)",
            train.p_uncond
        )));
    }
    if sample.steps == 0 || sample.members == 0 {
        return Err(Error::Config("sample.steps and sample.members must be positive".into()));
    }
    diffusion.schedule()?;

    Ok(RunConfig { seed, world, model, diffusion, train, sample, eval, paths })
}

pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingInput(format!("config file {}: {}", path.display(), e)))?;
    parse_config(&text, overrides)
}
