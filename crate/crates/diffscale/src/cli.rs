//! Command surface: synth | train | sample | evaluate | ablate, each driven
//! by a key=value config file plus command-line overrides. Exit codes:
//! 0 success, 2 config/argument error, 3 missing input artifact, 4 numerical
//! failure. DIFFSCALE_THREADS caps internal parallelism.

use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::grid::{enumerate_factors, pixelate, Field, FactorSet};
use crate::sampler::{sample_ensemble_threads, EnsembleForecast, SolverMethod, SolverSpec};
use crate::scorenet::{
    Adam, CondConfig, Condition, NormStats, ScoreNetConfig, ScoreNetwork, TrainItem,
};
use crate::sde::VarianceSchedule;
use crate::seed;
use crate::synthdata::{
    self, Case, Dataset, MemberForecast, Split, StaticFields,
};
use crate::verify::{evaluate_run, write_report, BinScheme, EvalCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingInput(_) | Error::Io(_) => 3,
        Error::Numerical(_) => 4,
        _ => 2,
    }
}

/// Entry point for the binary; prints errors and maps them to exit codes.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code(&e)
        }
    }
}

pub fn threads_from_env() -> Result<usize> {
    match std::env::var("DIFFSCALE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::Config(format!(
                    "DIFFSCALE_THREADS must be a positive integer, got {:?}",
                    v
                ))
            }),
        Err(_) => Ok(1),
    }
}

#[derive(Debug)]
struct CliArgs {
    command: String,
    config: PathBuf,
    overrides: Vec<(String, String)>,
    alpha: Option<f64>,
    lead: Option<f64>,
    members: Option<usize>,
}

fn parse_args(args: &[String]) -> Result<CliArgs> {
    let command = args
        .first()
        .ok_or_else(|| {
            Error::Usage("usage: diffscale <synth|train|sample|evaluate|ablate> --config <path> [key=value ...]".into())
        })?
        .clone();
    let mut config: Option<PathBuf> = None;
    let mut overrides = Vec::new();
    let mut alpha = None;
    let mut lead = None;
    let mut members = None;
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let mut flag_value = |name: &str| -> Result<String> {
            it.next()
                .cloned()
                .ok_or_else(|| Error::Usage(format!("{} needs a value", name)))
        };
        match arg.as_str() {
            "--config" => config = Some(flag_value("--config")?.into()),
            "--alpha" => {
                let v = flag_value("--alpha")?;
                alpha = Some(v.parse().map_err(|_| {
                    Error::Usage(format!("bad value {:?} for --alpha", v))
                })?);
            }
            "--lead" => {
                let v = flag_value("--lead")?;
                lead = Some(v.parse().map_err(|_| {
                    Error::Usage(format!("bad value {:?} for --lead", v))
                })?);
            }
            "--members" => {
                let v = flag_value("--members")?;
                members = Some(v.parse().map_err(|_| {
                    Error::Usage(format!("bad value {:?} for --members", v))
                })?);
            }
            other if other.contains('=') && !other.starts_with("--") => {
                let (k, v) = other.split_once('=').unwrap();
                overrides.push((k.to_string(), v.to_string()));
            }
            other => return Err(Error::Usage(format!("unknown argument {:?}", other))),
        }
    }
    let config =
        config.ok_or_else(|| Error::Usage("--config <path> is required".into()))?;
    Ok(CliArgs { command, config, overrides, alpha, lead, members })
}

fn dispatch(args: &[String]) -> Result<()> {
    let cli = parse_args(args)?;
    if !["synth", "train", "sample", "evaluate", "ablate"].contains(&cli.command.as_str()) {
        return Err(Error::Usage(format!(
            "unknown command {:?}, expected synth, train, sample, evaluate or ablate",
            cli.command
        )));
    }
    let cfg = load_config(&cli.config, &cli.overrides)?;
    match cli.command.as_str() {
        "synth" => cmd_synth(&cfg),
        "train" => cmd_train(&cfg),
        "sample" => {
            let alpha = cli
                .alpha
                .ok_or_else(|| Error::Usage("sample needs --alpha".into()))?;
            let lead = cli
                .lead
                .ok_or_else(|| Error::Usage("sample needs --lead".into()))?;
            cmd_sample(&cfg, alpha, lead, cli.members.unwrap_or(cfg.sample.members))
        }
        "evaluate" => cmd_evaluate(&cfg),
        "ablate" => cmd_ablate(&cfg),
        _ => unreachable!("command validated above"),
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let ds = synthdata::build_dataset(&cfg.world, true)?;
    synthdata::write_dataset(&cfg.paths.data, &ds)?;
    println!(
        "synth: {} cases ({} member records) -> {}",
        ds.cases.len(),
        ds.cases.len() * cfg.world.members,
        cfg.paths.data.display()
    );
    Ok(())
}

fn ensure_dataset(cfg: &RunConfig) -> Result<Dataset> {
    if !cfg.paths.data.join("manifest.csv").exists() {
        return Err(Error::MissingInput(format!(
            "dataset not found at {} (run synth first)",
            cfg.paths.data.display()
        )));
    }
    synthdata::read_dataset(&cfg.paths.data, &cfg.world)
}

fn load_net(cfg: &RunConfig) -> Result<ScoreNetwork> {
    if !cfg.paths.checkpoint.exists() {
        return Err(Error::MissingInput(format!(
            "checkpoint not found at {} (run train first)",
            cfg.paths.checkpoint.display()
        )));
    }
    let (net, _) = ScoreNetwork::load_checkpoint(&cfg.paths.checkpoint)?;
    if net.config.canvas != cfg.world.canvas || net.config.base != cfg.world.base {
        return Err(Error::Config(format!(
            "checkpoint grid {}x{} (base {}) does not match world {}x{} (base {})",
            net.config.canvas,
            net.config.canvas,
            net.config.base,
            cfg.world.canvas,
            cfg.world.canvas,
            cfg.world.base
        )));
    }
    Ok(net)
}

/// Per-channel mean/std over the training split for every channel the
/// conditioning configuration uses, plus the target itself.
fn compute_norm_stats(ds: &Dataset, cond: CondConfig) -> Result<NormStats> {
    let mut entries = Vec::new();
    let stat = |fields: &mut dyn Iterator<Item = &Field>| -> (f64, f64) {
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut n = 0usize;
        for f in fields {
            for &v in f.values() {
                sum += v as f64;
                sum2 += (v as f64) * (v as f64);
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let var = (sum2 / n as f64 - mean * mean).max(0.0);
        (mean, var.sqrt().max(1e-6))
    };
    let train: Vec<&Case> = ds.split_cases(Split::Train).collect();
    if train.is_empty() {
        return Err(Error::MissingInput("training split is empty".into()));
    }
    let (m, s) = stat(&mut train.iter().map(|c| &c.truth));
    entries.push(("target".to_string(), m, s));
    for name in cond.channel_names() {
        let (m, s) = match name {
            "lowres_ws" => stat(&mut train.iter().flat_map(|c| c.members.iter().map(|mf| &mf.lowres))),
            "orography" => stat(&mut std::iter::once(&ds.statics.orography)),
            "land_sea" => stat(&mut std::iter::once(&ds.statics.land_sea)),
            dynamic => {
                let mut fields = Vec::new();
                for c in &train {
                    for mf in &c.members {
                        let f = mf
                            .dynamics
                            .iter()
                            .find(|(n, _)| n == dynamic)
                            .map(|(_, f)| f)
                            .ok_or_else(|| {
                                Error::MissingInput(format!(
                                    "dataset lacks dynamic channel '{}' required by the model",
                                    dynamic
                                ))
                            })?;
                        fields.push(f);
                    }
                }
                stat(&mut fields.into_iter())
            }
        };
        entries.push((name.to_string(), m, s));
    }
    Ok(NormStats::new(entries))
}

fn build_condition(
    cond_cfg: CondConfig,
    alpha: f64,
    lead: f64,
    statics: &StaticFields,
    mf: &MemberForecast,
) -> Result<Condition> {
    let mut priors = vec![
        ("orography".to_string(), statics.orography.clone()),
        ("land_sea".to_string(), statics.land_sea.clone()),
    ];
    if cond_cfg.uses_dynamics() {
        if mf.dynamics.is_empty() {
            return Err(Error::MissingInput(
                "forecast member has no dynamic channels but the model needs them".into(),
            ));
        }
        priors.extend(mf.dynamics.iter().cloned());
    }
    let cond = Condition {
        alpha,
        lead,
        lowres_ws: cond_cfg.uses_lowres_ws().then(|| mf.lowres.clone()),
        priors,
        is_null: false,
    };
    cond.validate()?;
    Ok(cond)
}

/// Destandardize a sampled canvas back to wind speed, clamped non-negative.
fn postprocess(net: &ScoreNetwork, f: &Field, what: &str) -> Result<Field> {
    let d = net.norm.destandardize("target", f)?;
    if d.has_nan() {
        return Err(Error::Numerical(format!("NaN in {}", what)));
    }
    Ok(d.map(|v| v.max(0.0)))
}

fn make_batch(
    rng: &mut ChaCha8Rng,
    train_cases: &[&Case],
    statics: &StaticFields,
    factors: &FactorSet,
    cond_cfg: CondConfig,
    batch: usize,
) -> Result<Vec<TrainItem>> {
    let mut items = Vec::with_capacity(batch);
    for _ in 0..batch {
        let case = train_cases[rng.gen_range(0..train_cases.len())];
        let entry = &factors.entries[rng.gen_range(0..factors.entries.len())];
        let mf = &case.members[rng.gen_range(0..case.members.len())];
        let target = pixelate(&case.truth, entry.size)?;
        let cond = build_condition(cond_cfg, entry.alpha, case.lead, statics, mf)?;
        items.push(TrainItem { target, cond });
    }
    Ok(items)
}

fn best_checkpoint_path(cfg: &RunConfig) -> PathBuf {
    let mut p = cfg.paths.checkpoint.clone();
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "model".to_string());
    p.set_file_name(format!("{}_best.dspt", stem));
    p
}

#[allow(clippy::too_many_arguments)]
fn validation_mae(
    net: &ScoreNetwork,
    val_cases: &[&Case],
    statics: &StaticFields,
    cfg: &RunConfig,
    sched: &VarianceSchedule,
    factors: &FactorSet,
    threads: usize,
) -> Result<f64> {
    let entry = &factors.entries[0];
    let mut total = 0.0;
    for (ci, case) in val_cases.iter().enumerate() {
        let cond =
            build_condition(cfg.model.cond, entry.alpha, case.lead, statics, &case.members[0])?;
        let spec = SolverSpec {
            method: SolverMethod::EulerMaruyama,
            steps: cfg.train.val_steps,
            seed: seed::derive2(cfg.train.seed, 6, ci as u64),
        };
        let ens = sample_ensemble_threads(net, &cond, sched, &spec, 1, 0.0, threads)?;
        let sample = postprocess(net, &ens.members[0], "validation sample")?;
        let mae: f64 = sample
            .values()
            .iter()
            .zip(case.truth.values())
            .map(|(a, b)| ((a - b) as f64).abs())
            .sum::<f64>()
            / sample.values().len() as f64;
        total += mae;
    }
    Ok(total / val_cases.len() as f64)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let threads = threads_from_env()?;
    let ds = ensure_dataset(cfg)?;
    let sched = cfg.diffusion.schedule()?;
    let factors = enumerate_factors(cfg.world.base, cfg.world.canvas)?;
    let norm = compute_norm_stats(&ds, cfg.model.cond)?;
    let net_cfg = ScoreNetConfig {
        canvas: cfg.world.canvas,
        base: cfg.world.base,
        channels: cfg.model.channels,
        emb_dim: cfg.model.emb_dim,
        cond_config: cfg.model.cond,
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.train.seed, 0));
    let mut net = ScoreNetwork::new(net_cfg, norm, &mut init_rng);
    let mut adam = Adam::new(cfg.train.lr, cfg.train.clip_norm, &net.params);

    let train_cases: Vec<&Case> = ds.split_cases(Split::Train).collect();
    let val_cases: Vec<&Case> = ds
        .split_cases(Split::Val)
        .take(cfg.train.val_cases.max(1))
        .collect();
    if val_cases.is_empty() {
        return Err(Error::MissingInput("validation split is empty".into()));
    }

    let mut batch_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.train.seed, 1));
    let mut loss_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.train.seed, 2));
    // a fixed probe batch scored with a fixed noise stream, so progress on it
    // is comparable before and after training
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.train.seed, 3));
    let probe_batch = make_batch(
        &mut probe_rng,
        &train_cases,
        &ds.statics,
        &factors,
        cfg.model.cond,
        cfg.train.batch.max(4),
    )?;
    let probe = |net: &ScoreNetwork| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.train.seed, 4));
        net.dsm_loss_value(&probe_batch, &sched, &mut rng, 0.0)
    };
    let probe_initial = probe(&net)?;

    std::fs::create_dir_all(&cfg.paths.out)?;
    if let Some(parent) = cfg.paths.checkpoint.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut loss_csv = String::from("step,loss,null_items\n");
    let mut val_csv = String::from("step,mae\n");
    let mut total_nulls = 0usize;
    let mut best: Option<(f64, usize)> = None;
    let best_path = best_checkpoint_path(cfg);

    for step in 0..cfg.train.steps {
        let mut batch = make_batch(
            &mut batch_rng,
            &train_cases,
            &ds.statics,
            &factors,
            cfg.model.cond,
            cfg.train.batch,
        )?;
        let mut nulls = 0usize;
        for item in batch.iter_mut() {
            if cfg.train.p_uncond > 0.0 && batch_rng.gen_bool(cfg.train.p_uncond) {
                item.cond = Condition::null();
                nulls += 1;
            }
        }
        total_nulls += nulls;
        let (loss, grads) = net.dsm_loss(&batch, &sched, &mut loss_rng, 0.0)?;
        adam.update(&mut net.params, &grads);
        loss_csv.push_str(&format!("{},{:.8},{}\n", step, loss, nulls));
        let last = step + 1 == cfg.train.steps;
        if (step + 1) % cfg.train.val_every == 0 || last {
            let mae =
                validation_mae(&net, &val_cases, &ds.statics, cfg, &sched, &factors, threads)?;
            val_csv.push_str(&format!("{},{:.8}\n", step, mae));
            if best.map_or(true, |(b, _)| mae < b) {
                best = Some((mae, step));
                net.save_checkpoint(
                    &best_path,
                    &[
                        ("train.step".to_string(), step.to_string()),
                        ("val.mae".to_string(), format!("{:.8}", mae)),
                    ],
                )?;
            }
        }
    }

    let probe_final = probe(&net)?;
    let (best_mae, best_step) = best.expect("at least one validation ran");
    net.save_checkpoint(
        &cfg.paths.checkpoint,
        &[
            ("train.steps".to_string(), cfg.train.steps.to_string()),
            ("train.seed".to_string(), cfg.train.seed.to_string()),
        ],
    )?;
    std::fs::write(cfg.paths.out.join("loss.csv"), &loss_csv)?;
    std::fs::write(cfg.paths.out.join("val.csv"), &val_csv)?;
    std::fs::write(
        cfg.paths.out.join("summary.txt"),
        format!(
            "probe_initial={:.8}\nprobe_final={:.8}\nnull_items={}\nbest_val_mae={:.8}\nbest_val_step={}\n",
            probe_initial, probe_final, total_nulls, best_mae, best_step
        ),
    )?;
    println!(
        "train: {} steps, probe loss {:.4} -> {:.4}, best val MAE {:.4} at step {}",
        cfg.train.steps, probe_initial, probe_final, best_mae, best_step
    );
    Ok(())
}

pub fn cmd_sample(cfg: &RunConfig, alpha: f64, lead: f64, members: usize) -> Result<()> {
    if members == 0 {
        return Err(Error::Usage("--members must be >= 1".into()));
    }
    let threads = threads_from_env()?;
    let net = load_net(cfg)?;
    let sched = cfg.diffusion.schedule()?;
    // conditioning inputs come from the synthetic world at the requested
    // fractional lead, deterministic in the world seed
    let statics = synthdata::gen_static_fields(&cfg.world)?;
    let n_days = lead.ceil() as usize + 2;
    let truths = synthdata::gen_truth_series(&cfg.world, &statics, n_days)?;
    let truth = synthdata::truth_at(&truths, lead)?;
    let case_seed = seed::derive2(cfg.world.seed, 9, 0);
    let mf = synthdata::gen_case_inputs(
        &truth,
        lead,
        0,
        &cfg.world,
        &statics,
        case_seed,
        cfg.model.cond.uses_dynamics(),
    )?;
    let cond = build_condition(cfg.model.cond, alpha, lead, &statics, &mf)?;
    let spec = SolverSpec {
        method: cfg.sample.solver,
        steps: cfg.sample.steps,
        seed: cfg.sample.seed,
    };
    let ens = sample_ensemble_threads(
        &net,
        &cond,
        &sched,
        &spec,
        members,
        cfg.sample.guidance,
        threads,
    )?;
    let dir = cfg.paths.out.join("samples");
    std::fs::create_dir_all(&dir)?;
    let s = net.config.canvas;
    let mut mean = Field::zeros(s, s);
    for (mi, member) in ens.members.iter().enumerate() {
        let out = postprocess(&net, member, &format!("sample member {}", mi))?;
        for (acc, v) in mean.values_mut().iter_mut().zip(out.values()) {
            *acc += v / members as f32;
        }
        synthdata::write_grid(&dir.join(format!("member_{:02}.dsg1", mi)), &[out])?;
    }
    synthdata::write_grid(&dir.join("mean.dsg1"), &[mean])?;
    println!(
        "sample: {} members at alpha {} lead {} ({} score evals) -> {}",
        members,
        alpha,
        lead,
        ens.score_evals,
        dir.display()
    );
    Ok(())
}

fn test_cases<'a>(cfg: &RunConfig, ds: &'a Dataset) -> Result<Vec<&'a Case>> {
    let mut cases: Vec<&Case> = ds.split_cases(Split::Test).collect();
    if cases.is_empty() {
        return Err(Error::MissingInput("test split is empty".into()));
    }
    if cfg.eval.cases > 0 {
        cases.truncate(cfg.eval.cases);
    }
    Ok(cases)
}

fn model_ensemble(
    net: &ScoreNetwork,
    cfg: &RunConfig,
    sched: &VarianceSchedule,
    cond: &Condition,
    spec: &SolverSpec,
    k: usize,
    threads: usize,
    what: &str,
) -> Result<EnsembleForecast> {
    let raw = sample_ensemble_threads(net, cond, sched, spec, k, cfg.sample.guidance, threads)?;
    let members = raw
        .members
        .iter()
        .map(|m| postprocess(net, m, what))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleForecast { members, condition: raw.condition, score_evals: raw.score_evals })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let threads = threads_from_env()?;
    let ds = ensure_dataset(cfg)?;
    let net = load_net(cfg)?;
    let sched = cfg.diffusion.schedule()?;
    let factors = enumerate_factors(cfg.world.base, cfg.world.canvas)?;
    let cases = test_cases(cfg, &ds)?;
    let train_truths: Vec<Field> =
        ds.split_cases(Split::Train).map(|c| c.truth.clone()).collect();
    let bins = BinScheme::default();
    let mut eval_cases = Vec::with_capacity(cases.len());
    let mut model = Vec::with_capacity(cases.len() * factors.entries.len());
    for (ci, case) in cases.iter().enumerate() {
        eval_cases.push(EvalCase {
            lead_day: case.lead.round() as usize,
            truth: case.truth.clone(),
            baseline_members: case.members.iter().map(|mf| mf.lowres.clone()).collect(),
        });
        for (fi, entry) in factors.entries.iter().enumerate() {
            let cond = build_condition(
                cfg.model.cond,
                entry.alpha,
                case.lead,
                &ds.statics,
                &case.members[0],
            )?;
            let spec = SolverSpec {
                method: cfg.sample.solver,
                steps: cfg.sample.steps,
                seed: seed::derive2(cfg.sample.seed, ci as u64, fi as u64),
            };
            let ens = model_ensemble(
                &net,
                cfg,
                &sched,
                &cond,
                &spec,
                cfg.sample.members,
                threads,
                &format!("evaluation ensemble (case {}, factor {})", ci, entry.divisor),
            )?;
            model.push(ens);
        }
    }
    let report = evaluate_run(&model, &eval_cases, &train_truths, &bins, &factors)?;
    std::fs::create_dir_all(&cfg.paths.out)?;
    write_report(&cfg.paths.out, &report, &bins)?;
    println!(
        "evaluate: {} cases x {} factors -> {}",
        cases.len(),
        factors.entries.len(),
        cfg.paths.out.display()
    );
    Ok(())
}

pub const ABLATION_STEPS: [usize; 4] = [50, 100, 500, 1000];
pub const ABLATION_SOLVERS: [SolverMethod; 3] = [
    SolverMethod::EulerMaruyama,
    SolverMethod::ProbFlowEuler,
    SolverMethod::Heun2,
];

pub fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let threads = threads_from_env()?;
    let ds = ensure_dataset(cfg)?;
    let net = load_net(cfg)?;
    let sched = cfg.diffusion.schedule()?;
    let factors = enumerate_factors(cfg.world.base, cfg.world.canvas)?;
    let entry = &factors.entries[0];
    let cases = test_cases(cfg, &ds)?;
    let bins = BinScheme::default();
    let mut csv = String::from("solver,steps,nfe,bin,mae\n");
    for method in ABLATION_SOLVERS {
        for steps in ABLATION_STEPS {
            let mut nfe = 0usize;
            let mut bin_sums = vec![0.0f64; bins.len()];
            let mut bin_counts = vec![0usize; bins.len()];
            for (ci, case) in cases.iter().enumerate() {
                let cond = build_condition(
                    cfg.model.cond,
                    entry.alpha,
                    case.lead,
                    &ds.statics,
                    &case.members[0],
                )?;
                let spec = SolverSpec {
                    method,
                    steps,
                    seed: seed::derive2(cfg.sample.seed, 1000 + ci as u64, steps as u64),
                };
                let ens = model_ensemble(
                    &net,
                    cfg,
                    &sched,
                    &cond,
                    &spec,
                    cfg.sample.members,
                    threads,
                    &format!("{} ablation (steps {}, case {})", method.name(), steps, ci),
                )?;
                nfe += ens.score_evals;
                let k = ens.members.len() as f32;
                let mut mean = Field::zeros(net.config.canvas, net.config.canvas);
                for m in &ens.members {
                    for (acc, v) in mean.values_mut().iter_mut().zip(m.values()) {
                        *acc += v / k;
                    }
                }
                let mae: f64 = mean
                    .values()
                    .iter()
                    .zip(case.truth.values())
                    .map(|(a, b)| ((a - b) as f64).abs())
                    .sum::<f64>()
                    / mean.values().len() as f64;
                let bin = bins.assign_bin(case.lead.round() as usize)?;
                bin_sums[bin] += mae;
                bin_counts[bin] += 1;
            }
            for bin in 0..bins.len() {
                let mae = if bin_counts[bin] > 0 {
                    format!("{:.8}", bin_sums[bin] / bin_counts[bin] as f64)
                } else {
                    "NA".to_string()
                };
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    method.name(),
                    steps,
                    nfe,
                    bins.label(bin),
                    mae
                ));
            }
        }
    }
    std::fs::create_dir_all(&cfg.paths.out)?;
    std::fs::write(cfg.paths.out.join("ablation.csv"), &csv)?;
    println!(
        "ablate: {} solver/step cells over {} cases -> {}",
        ABLATION_SOLVERS.len() * ABLATION_STEPS.len(),
        cases.len(),
        cfg.paths.out.join("ablation.csv").display()
    );
    Ok(())
}
