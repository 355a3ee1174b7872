//! Reverse-process integrators. Each solver walks an equidistant time grid
//! from t = 1 down to t_min and returns the terminal state together with the
//! number of score evaluations it spent.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::scorenet::{Condition, ScoreNetwork};
use crate::sde::VarianceSchedule;
use crate::seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    EulerMaruyama,
    ProbFlowEuler,
    Heun2,
}

impl SolverMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(SolverMethod::EulerMaruyama),
            "pf" => Ok(SolverMethod::ProbFlowEuler),
            "heun" => Ok(SolverMethod::Heun2),
            other => Err(Error::Config(format!(
                "unknown solver {:?}, expected em, pf or heun",
                other
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::EulerMaruyama => "em",
            SolverMethod::ProbFlowEuler => "pf",
            SolverMethod::Heun2 => "heun",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSpec {
    pub method: SolverMethod,
    pub steps: usize,
    pub seed: u64,
}

impl SolverSpec {
    fn validate(&self, expect: SolverMethod) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("solver steps must be positive".into()));
        }
        if self.method != expect {
            return Err(Error::Usage(format!(
                "spec.method is {}, solver expects {}",
                self.method.name(),
                expect.name()
            )));
        }
        Ok(())
    }
}

/// Terminal state of one reverse integration plus its evaluation count.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub state: Field,
    pub score_evals: usize,
}

/// K exchangeable members produced from one condition.
#[derive(Debug, Clone)]
pub struct EnsembleForecast {
    pub members: Vec<Field>,
    pub condition: Condition,
    pub score_evals: usize,
}

fn standard_normal_field(height: usize, width: usize, rng: &mut impl Rng) -> Field {
    let values = (0..height * width)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Field::new(height, width, values).expect("positive dimensions")
}

/// t_i = 1 + i * (t_min - 1) / steps, strictly decreasing down to t_min.
pub fn time_grid(sched: &VarianceSchedule, steps: usize) -> Vec<f64> {
    let dt = (sched.t_min() - 1.0) / steps as f64;
    let mut grid: Vec<f64> = (0..=steps).map(|i| 1.0 + i as f64 * dt).collect();
    grid[steps] = sched.t_min();
    grid
}

fn check_finite(state: &Field, method: SolverMethod, step: usize) -> Result<()> {
    if state.has_nan() {
        return Err(Error::Numerical(format!(
            "non-finite state in {} solver at step {}",
            method.name(),
            step
        )));
    }
    Ok(())
}

/// Euler-Maruyama on the reverse SDE from a given start state, with the
/// per-step noise drawn from `noise_fn`. With zero drift the update is
/// x <- x - g(t)^2 * score * dt + g(t) * sqrt(|dt|) * z.
pub fn euler_maruyama_path(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    steps: usize,
    x0: Field,
    noise_fn: &mut dyn FnMut() -> Field,
) -> Result<SolverRun> {
    let mut x = x0;
    let grid = time_grid(sched, steps);
    let mut evals = 0;
    for i in 0..steps {
        let t = grid[i];
        let dt = grid[i + 1] - grid[i];
        let g = sched.diffusion_g(t)?;
        let score = score_fn(&x, t)?;
        evals += 1;
        let z = noise_fn();
        let drift = (-(g * g) * dt) as f32;
        let noise = (g * dt.abs().sqrt()) as f32;
        x = x.zip(&score, |xv, sv| xv + drift * sv)?;
        x = x.zip(&z, |xv, zv| xv + noise * zv)?;
        check_finite(&x, SolverMethod::EulerMaruyama, i)?;
    }
    Ok(SolverRun { state: x, score_evals: evals })
}

pub fn euler_maruyama_sample(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    spec: &SolverSpec,
    height: usize,
    width: usize,
) -> Result<SolverRun> {
    spec.validate(SolverMethod::EulerMaruyama)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x0 = sched.prior_sample(height, width, &mut rng);
    let mut noise_fn = || standard_normal_field(height, width, &mut rng);
    euler_maruyama_path(score_fn, sched, spec.steps, x0, &mut noise_fn)
}

/// Euler on the probability-flow ODE from a given start state:
/// x <- x - (1/2) g(t)^2 * score * dt.
pub fn prob_flow_euler_path(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    steps: usize,
    x0: Field,
) -> Result<SolverRun> {
    let mut x = x0;
    let grid = time_grid(sched, steps);
    let mut evals = 0;
    for i in 0..steps {
        let t = grid[i];
        let dt = grid[i + 1] - grid[i];
        let g = sched.diffusion_g(t)?;
        let score = score_fn(&x, t)?;
        evals += 1;
        let drift = (-0.5 * g * g * dt) as f32;
        x = x.zip(&score, |xv, sv| xv + drift * sv)?;
        check_finite(&x, SolverMethod::ProbFlowEuler, i)?;
    }
    Ok(SolverRun { state: x, score_evals: evals })
}

pub fn prob_flow_euler_sample(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    spec: &SolverSpec,
    height: usize,
    width: usize,
) -> Result<SolverRun> {
    spec.validate(SolverMethod::ProbFlowEuler)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x0 = sched.prior_sample(height, width, &mut rng);
    prob_flow_euler_path(score_fn, sched, spec.steps, x0)
}

/// Heun predictor-corrector on the probability-flow ODE from a given start
/// state: full Euler step, then the average of the endpoint slopes. The final
/// step stays plain Euler so the score is never evaluated below t_min.
pub fn heun2_path(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    steps: usize,
    x0: Field,
) -> Result<SolverRun> {
    let mut x = x0;
    let grid = time_grid(sched, steps);
    let mut evals = 0;
    for i in 0..steps {
        let t = grid[i];
        let t_next = grid[i + 1];
        let dt = (t_next - t) as f32;
        let g = sched.diffusion_g(t)?;
        let score = score_fn(&x, t)?;
        evals += 1;
        let slope0 = (-0.5 * g * g) as f32;
        let euler = x.zip(&score, |xv, sv| xv + slope0 * sv * dt)?;
        if i + 1 == steps {
            x = euler;
        } else {
            let g1 = sched.diffusion_g(t_next)?;
            let score1 = score_fn(&euler, t_next)?;
            evals += 1;
            let slope1 = (-0.5 * g1 * g1) as f32;
            let half_dt = 0.5 * dt;
            let first = x.zip(&score, |xv, sv| xv + slope0 * sv * half_dt)?;
            x = first.zip(&score1, |xv, sv| xv + slope1 * sv * half_dt)?;
        }
        check_finite(&x, SolverMethod::Heun2, i)?;
    }
    Ok(SolverRun { state: x, score_evals: evals })
}

pub fn heun2_sample(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    spec: &SolverSpec,
    height: usize,
    width: usize,
) -> Result<SolverRun> {
    spec.validate(SolverMethod::Heun2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x0 = sched.prior_sample(height, width, &mut rng);
    heun2_path(score_fn, sched, spec.steps, x0)
}

/// Dispatch on spec.method.
pub fn solve(
    score_fn: &mut dyn FnMut(&Field, f64) -> Result<Field>,
    sched: &VarianceSchedule,
    spec: &SolverSpec,
    height: usize,
    width: usize,
) -> Result<SolverRun> {
    match spec.method {
        SolverMethod::EulerMaruyama => euler_maruyama_sample(score_fn, sched, spec, height, width),
        SolverMethod::ProbFlowEuler => prob_flow_euler_sample(score_fn, sched, spec, height, width),
        SolverMethod::Heun2 => heun2_sample(score_fn, sched, spec, height, width),
    }
}

/// K independent reverse runs with per-member noise streams derived from
/// spec.seed, so member i is the same whether members run in sequence or in
/// parallel.
pub fn sample_ensemble(
    net: &ScoreNetwork,
    cond: &Condition,
    sched: &VarianceSchedule,
    spec: &SolverSpec,
    k: usize,
    guidance: f64,
) -> Result<EnsembleForecast> {
    sample_ensemble_threads(net, cond, sched, spec, k, guidance, 1)
}

/// Like sample_ensemble, with members distributed over up to `threads` worker
/// threads. Member seeds make the result independent of the thread count.
pub fn sample_ensemble_threads(
    net: &ScoreNetwork,
    cond: &Condition,
    sched: &VarianceSchedule,
    spec: &SolverSpec,
    k: usize,
    guidance: f64,
    threads: usize,
) -> Result<EnsembleForecast> {
    if k == 0 {
        return Err(Error::Usage("ensemble size K must be >= 1".into()));
    }
    if threads == 0 {
        return Err(Error::Config("thread count must be >= 1".into()));
    }
    let s = net.config.canvas;
    let run_member = |member: usize| -> Result<SolverRun> {
        let member_spec = SolverSpec {
            seed: seed::derive(spec.seed, member as u64),
            ..*spec
        };
        let mut score_fn = |x: &Field, t: f64| net.guided_score(sched, x, t, cond, guidance);
        solve(&mut score_fn, sched, &member_spec, s, s)
    };
    let runs: Vec<Result<SolverRun>> = if threads <= 1 || k == 1 {
        (0..k).map(run_member).collect()
    } else {
        let n = threads.min(k);
        let mut slots: Vec<Option<Result<SolverRun>>> = (0..k).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (w, chunk) in slots.chunks_mut(k.div_ceil(n)).enumerate() {
                let run_member = &run_member;
                let base = w * k.div_ceil(n);
                handles.push(scope.spawn(move || {
                    for (i, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run_member(base + i));
                    }
                }));
            }
            for h in handles {
                h.join().expect("sampler worker panicked");
            }
        });
        slots.into_iter().map(|s| s.expect("member slot filled")).collect()
    };
    let mut members = Vec::with_capacity(k);
    let mut evals = 0;
    for run in runs {
        let run = run?;
        evals += run.score_evals;
        members.push(run.state);
    }
    Ok(EnsembleForecast { members, condition: cond.clone(), score_evals: evals })
}
