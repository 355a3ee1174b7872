//! Synthetic world generation: a fine-resolution wind-speed "truth" evolving
//! day by day, static terrain priors, lead-time-degraded coarse forecasts,
//! dataset assembly into train/val/test splits, and the DSG1 grid format.

mod format;

pub use format::{read_grid, write_grid};

use crate::error::{Error, Result};
use crate::grid::{block_coarsen, Field};
use crate::scorenet::DYNAMIC_CHANNELS;
use crate::seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    pub canvas: usize,
    pub base: usize,
    pub spectral_slope: f64,
    pub ar_rho: f64,
    pub err_scale: f64,
    pub err_timescale: f64,
    pub bias_amplitude: f64,
    pub ensemble_spread: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub members: usize,
    pub seed: u64,
}

impl WorldConfig {
    pub fn defaults(seed: u64) -> Self {
        WorldConfig {
            canvas: 48,
            base: 12,
            spectral_slope: 3.0,
            ar_rho: 0.9,
            err_scale: 0.5,
            err_timescale: 10.0,
            bias_amplitude: 0.3,
            ensemble_spread: 0.3,
            n_train: 600,
            n_val: 100,
            n_test: 104,
            members: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.canvas % 12 != 0 {
            return Err(Error::Config(format!(
                "world.canvas must be divisible by 12, got {}",
                self.canvas
            )));
        }
        if self.canvas / 4 < self.base {
            return Err(Error::Config(format!(
                "world.canvas/4 must be >= world.base, got {}/{}",
                self.canvas, self.base
            )));
        }
        if !(self.ar_rho > 0.0 && self.ar_rho < 1.0) {
            return Err(Error::Config(format!(
                "world.rho must lie in (0,1), got {}",
                self.ar_rho
            )));
        }
        if self.members == 0 || self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::Config("world split sizes and members must be positive".into()));
        }
        Ok(())
    }
}

pub const MAX_LEAD: f64 = 46.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StaticFields {
    pub orography: Field,
    pub land_sea: Field,
}

/// Isotropic Gaussian random field sampler: independent complex spectral
/// coefficients with power k^(-beta), realized by an inverse 2D FFT. The DC
/// mode is zero, so fields have zero spatial mean; the amplitude scale is
/// chosen so a fresh sample has unit pointwise variance.
struct SpectralSampler {
    size: usize,
    amp: Vec<f64>,
}

impl SpectralSampler {
    fn new(size: usize, beta: f64) -> Self {
        let mut amp = vec![0.0; size * size];
        for ky in 0..size {
            for kx in 0..size {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let fy = ky.min(size - ky) as f64;
                let fx = kx.min(size - kx) as f64;
                let k = (fx * fx + fy * fy).sqrt();
                amp[ky * size + kx] = k.powf(-beta / 2.0);
            }
        }
        let total: f64 = amp.iter().map(|a| a * a).sum();
        let scale = 1.0 / total.sqrt();
        for a in amp.iter_mut() {
            *a *= scale;
        }
        SpectralSampler { size, amp }
    }

    fn draw_coeffs(&self, rng: &mut impl Rng) -> Vec<Complex<f64>> {
        self.amp
            .iter()
            .map(|&a| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(a * re, a * im)
            })
            .collect()
    }

    fn realize(&self, coeffs: &[Complex<f64>]) -> Field {
        let n = self.size;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n);
        let mut buf = coeffs.to_vec();
        for row in buf.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); n];
        for x in 0..n {
            for y in 0..n {
                col[y] = buf[y * n + x];
            }
            fft.process(&mut col);
            for y in 0..n {
                buf[y * n + x] = col[y];
            }
        }
        let values = buf.iter().map(|c| c.re as f32).collect();
        Field::new(n, n, values).expect("positive dimensions")
    }

    fn sample(&self, rng: &mut impl Rng) -> Field {
        let coeffs = self.draw_coeffs(rng);
        self.realize(&coeffs)
    }
}

/// Separable Gaussian blur with clamped edges; kernel truncated at 3 sigma.
fn gaussian_blur(f: &Field, sigma: f64) -> Field {
    if sigma <= 0.0 {
        return f.clone();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0f64;
    for d in -radius..=radius {
        let w = (-(d as f64).powi(2) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in kernel.iter_mut() {
        *w /= sum;
    }
    let (h, w) = (f.height() as i64, f.width() as i64);
    let mut tmp = Field::zeros(f.height(), f.width());
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0f64;
            for (ki, d) in (-radius..=radius).enumerate() {
                let cc = (c + d).clamp(0, w - 1);
                acc += kernel[ki] * f.get(r as usize, cc as usize) as f64;
            }
            tmp.set(r as usize, c as usize, acc as f32);
        }
    }
    let mut out = Field::zeros(f.height(), f.width());
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0f64;
            for (ki, d) in (-radius..=radius).enumerate() {
                let rr = (r + d).clamp(0, h - 1);
                acc += kernel[ki] * tmp.get(rr as usize, c as usize) as f64;
            }
            out.set(r as usize, c as usize, acc as f32);
        }
    }
    out
}

/// Orography: rectified smooth field. Land-sea: smooth field thresholded at
/// its median (exactly half sea), then blurred back into [0,1]. Values near 1
/// are sea, near 0 land.
pub fn gen_static_fields(cfg: &WorldConfig) -> Result<StaticFields> {
    cfg.validate()?;
    let sampler = SpectralSampler::new(cfg.canvas, cfg.spectral_slope);
    let mut oro_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, 1));
    let orography = sampler.sample(&mut oro_rng).map(|v| v.max(0.0));
    let mut ls_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, 2));
    let raw = sampler.sample(&mut ls_rng);
    let mut sorted: Vec<f32> = raw.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let mask = raw.map(|v| if v >= median { 1.0 } else { 0.0 });
    let land_sea = gaussian_blur(&mask, 1.0).map(|v| v.clamp(0.0, 1.0));
    Ok(StaticFields { orography, land_sea })
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { (1.0 + x.exp()).ln() }
}

/// Map a zero-mean unit-variance field to desk-scale wind speeds: softplus
/// positivity, faster winds over open water, terrain damping.
fn to_wind(raw: &Field, statics: &StaticFields) -> Field {
    let oro_max = statics
        .orography
        .values()
        .iter()
        .cloned()
        .fold(0.0f32, f32::max)
        .max(1e-6);
    let mut out = Field::zeros(raw.height(), raw.width());
    for r in 0..raw.height() {
        for c in 0..raw.width() {
            let base = softplus(2.0 + 2.5 * raw.get(r, c) as f64);
            let sea = statics.land_sea.get(r, c) as f64;
            let oro = (statics.orography.get(r, c) / oro_max) as f64;
            out.set(r, c, (base + 1.0 * sea - 0.5 * oro).max(0.0) as f32);
        }
    }
    out
}

/// AR(1) evolution of the spectral coefficients, one step per day, with the
/// stationary marginal of the sampler.
struct TruthGen {
    sampler: SpectralSampler,
    rho: f64,
    state: Vec<Complex<f64>>,
    rng: ChaCha8Rng,
}

impl TruthGen {
    fn new(cfg: &WorldConfig) -> Self {
        let sampler = SpectralSampler::new(cfg.canvas, cfg.spectral_slope);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, 3));
        let state = sampler.draw_coeffs(&mut rng);
        TruthGen { sampler, rho: cfg.ar_rho, state, rng }
    }

    fn current(&self) -> Field {
        self.sampler.realize(&self.state)
    }

    fn step(&mut self) {
        let fresh = self.sampler.draw_coeffs(&mut self.rng);
        let keep = self.rho;
        let innov = (1.0 - self.rho * self.rho).sqrt();
        for (s, f) in self.state.iter_mut().zip(fresh) {
            *s = *s * keep + f * innov;
        }
    }
}

/// Pre-transform (zero-mean, unit-variance) daily fields.
fn gen_raw_series(cfg: &WorldConfig, n_days: usize) -> Vec<Field> {
    let mut gen = TruthGen::new(cfg);
    let mut out = Vec::with_capacity(n_days);
    for day in 0..n_days {
        if day > 0 {
            gen.step();
        }
        out.push(gen.current());
    }
    out
}

/// Daily truth fields after the wind transform.
pub fn gen_truth_series(cfg: &WorldConfig, statics: &StaticFields, n_days: usize) -> Result<Vec<Field>> {
    if n_days == 0 {
        return Err(Error::Usage("n_days must be >= 1".into()));
    }
    cfg.validate()?;
    Ok(gen_raw_series(cfg, n_days)
        .iter()
        .map(|raw| to_wind(raw, statics))
        .collect())
}

/// Error saturation curve gamma(lead) = a * (1 - exp(-lead / tau)).
pub fn error_growth(cfg: &WorldConfig, lead: f64) -> f64 {
    cfg.err_scale * (1.0 - (-lead / cfg.err_timescale).exp())
}

fn check_lead(lead: f64) -> Result<()> {
    if !(1.0..=MAX_LEAD).contains(&lead) {
        return Err(Error::Domain(format!("lead {} outside [1, {}]", lead, MAX_LEAD)));
    }
    Ok(())
}

/// Forecast-model emulation: blur growing with lead, shared smooth error of
/// scale gamma(lead), member-specific smooth perturbation, a static
/// coastal-bias pattern, positivity clip, then block-mean to the coarse grid.
/// The gamma error stream depends on case_seed only, so members of one case
/// share it; the member stream adds ensemble spread on top.
pub fn degrade_forecast(
    truth_at_valid: &Field,
    lead: f64,
    member: usize,
    cfg: &WorldConfig,
    statics: &StaticFields,
    case_seed: u64,
) -> Result<Field> {
    check_lead(lead)?;
    let sampler = SpectralSampler::new(cfg.canvas, cfg.spectral_slope);
    let sigma_blur = 0.5 + 0.05 * lead;
    let blurred = gaussian_blur(truth_at_valid, sigma_blur);
    let mut err_rng = ChaCha8Rng::seed_from_u64(seed::derive2(case_seed, 1, 0));
    let shared = sampler.sample(&mut err_rng);
    let mut mem_rng = ChaCha8Rng::seed_from_u64(seed::derive2(case_seed, 2, member as u64));
    let spread = sampler.sample(&mut mem_rng);
    let gamma = error_growth(cfg, lead) as f32;
    let s_e = cfg.ensemble_spread as f32;
    let ls_mean = statics.land_sea.mean() as f32;
    let b0 = cfg.bias_amplitude as f32;
    let mut fine = Field::zeros(cfg.canvas, cfg.canvas);
    for r in 0..cfg.canvas {
        for c in 0..cfg.canvas {
            let bias = b0 * (statics.land_sea.get(r, c) - ls_mean) * 2.0;
            let v = blurred.get(r, c) + gamma * shared.get(r, c) + s_e * spread.get(r, c) + bias;
            fine.set(r, c, v.max(0.0));
        }
    }
    block_coarsen(&fine, cfg.base, cfg.base)
}

/// Coarse dynamic-variable analogs for one case member: each channel is an
/// affine map of a blurred mix of the truth and channel-specific smooth noise,
/// so channels correlate with the target without duplicating it.
fn gen_dynamics(
    truth_at_valid: &Field,
    cfg: &WorldConfig,
    case_seed: u64,
    member: usize,
) -> Result<Vec<(String, Field)>> {
    let sampler = SpectralSampler::new(cfg.canvas, cfg.spectral_slope);
    let truth_mean = truth_at_valid.mean() as f32;
    let centered = truth_at_valid.map(|v| v - truth_mean);
    let scales: [(f64, f64); 5] = [
        (15.0, 2.0),   // t2m
        (1013.0, 5.0), // mslp
        (0.0, 1.0),    // u
        (0.0, 0.8),    // v
        (5500.0, 30.0), // z500
    ];
    let mut out = Vec::with_capacity(DYNAMIC_CHANNELS.len());
    for (ci, name) in DYNAMIC_CHANNELS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive2(case_seed, 3 + ci as u64, member as u64));
        let noise = sampler.sample(&mut rng);
        let mixed = centered.zip(&noise, |t, n| 0.7 * t + 0.5 * n)?;
        let smooth = gaussian_blur(&mixed, 1.0);
        let coarse = block_coarsen(&smooth, cfg.base, cfg.base)?;
        let (offset, scale) = scales[ci];
        out.push((name.to_string(), coarse.map(|v| offset as f32 + scale as f32 * v)));
    }
    Ok(out)
}

/// Coarse inputs for one member outside the dataset pipeline, e.g. when
/// conditioning a sample at an arbitrary fractional lead.
pub fn gen_case_inputs(
    truth_at_valid: &Field,
    lead: f64,
    member: usize,
    cfg: &WorldConfig,
    statics: &StaticFields,
    case_seed: u64,
    with_dynamics: bool,
) -> Result<MemberForecast> {
    let lowres = degrade_forecast(truth_at_valid, lead, member, cfg, statics, case_seed)?;
    let dynamics = if with_dynamics {
        gen_dynamics(truth_at_valid, cfg, case_seed, member)?
    } else {
        Vec::new()
    };
    Ok(MemberForecast { member, lowres, dynamics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split tag {:?}", other))),
        }
    }
}

/// One member's coarse forecast inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberForecast {
    pub member: usize,
    pub lowres: Field,
    pub dynamics: Vec<(String, Field)>,
}

/// One (init time, lead) pair: the truth at the valid time plus all member
/// forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub split: Split,
    pub init_index: usize,
    pub lead: f64,
    pub truth: Field,
    pub members: Vec<MemberForecast>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: WorldConfig,
    pub statics: StaticFields,
    pub cases: Vec<Case>,
}

impl Dataset {
    pub fn split_cases(&self, split: Split) -> impl Iterator<Item = &Case> {
        self.cases.iter().filter(move |c| c.split == split)
    }
}

/// Truth at a fractional valid day, linear between the two bracketing days.
pub fn truth_at(truths: &[Field], valid: f64) -> Result<Field> {
    let lo = valid.floor() as usize;
    let hi = (lo + 1).min(truths.len() - 1);
    let frac = (valid - lo as f64) as f32;
    if lo >= truths.len() {
        return Err(Error::Usage(format!("valid day {} beyond series", valid)));
    }
    truths[lo].zip(&truths[hi], |a, b| a + frac * (b - a))
}

/// Assemble the full dataset. Init times occupy disjoint day ranges per
/// split; train and val leads are drawn uniformly from [1,46], test leads
/// cycle the integer days so every bin is populated.
pub fn build_dataset(cfg: &WorldConfig, with_dynamics: bool) -> Result<Dataset> {
    cfg.validate()?;
    let statics = gen_static_fields(cfg)?;
    let n_inits = cfg.n_train + cfg.n_val + cfg.n_test;
    let n_days = n_inits + MAX_LEAD as usize + 1;
    let truths = gen_truth_series(cfg, &statics, n_days)?;
    let mut cases = Vec::new();
    for init in 0..n_inits {
        let split = if init < cfg.n_train {
            Split::Train
        } else if init < cfg.n_train + cfg.n_val {
            Split::Val
        } else {
            Split::Test
        };
        let lead = match split {
            Split::Test => ((init - cfg.n_train - cfg.n_val) % MAX_LEAD as usize) as f64 + 1.0,
            _ => {
                let mut lead_rng = ChaCha8Rng::seed_from_u64(seed::derive2(cfg.seed, 4, init as u64));
                lead_rng.gen_range(1.0..=MAX_LEAD)
            }
        };
        let truth = truth_at(&truths, init as f64 + lead)?;
        let case_seed = seed::derive2(cfg.seed, 5, init as u64);
        let mut members = Vec::with_capacity(cfg.members);
        for member in 0..cfg.members {
            let lowres = degrade_forecast(&truth, lead, member, cfg, &statics, case_seed)?;
            let dynamics = if with_dynamics {
                gen_dynamics(&truth, cfg, case_seed, member)?
            } else {
                Vec::new()
            };
            members.push(MemberForecast { member, lowres, dynamics });
        }
        cases.push(Case { split, init_index: init, lead, truth, members });
    }
    Ok(Dataset { config: *cfg, statics, cases })
}

fn lead_tag(lead: f64) -> String {
    format!("{:07.3}", lead).replace('.', "p")
}

/// Write every case to `dir` as DSG1 grids plus a manifest. Per case one
/// truth file; per member one forecast file whose channel 0 is the coarse
/// wind speed and channels 1.. are the dynamic variables in fixed order.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir.join("truth")).map_err(Error::from)?;
    std::fs::create_dir_all(dir.join("lr")).map_err(Error::from)?;
    write_grid(
        &dir.join("statics.dsg1"),
        &[ds.statics.orography.clone(), ds.statics.land_sea.clone()],
    )?;
    let mut manifest = String::new();
    for case in &ds.cases {
        let tag = format!("{}_{:05}_{}", case.split.name(), case.init_index, lead_tag(case.lead));
        let truth_path = format!("truth/{}.dsg1", tag);
        write_grid(&dir.join(&truth_path), std::slice::from_ref(&case.truth))?;
        for mf in &case.members {
            let lr_path = format!("lr/{}_{:02}.dsg1", tag, mf.member);
            let mut channels = vec![mf.lowres.clone()];
            channels.extend(mf.dynamics.iter().map(|(_, f)| f.clone()));
            write_grid(&dir.join(&lr_path), &channels)?;
            manifest.push_str(&format!(
                "{},{},{},{},{},{}\n",
                case.split.name(),
                case.init_index,
                case.lead,
                mf.member,
                lr_path,
                truth_path
            ));
        }
    }
    std::fs::write(dir.join("manifest.csv"), manifest).map_err(Error::from)
}

/// Read a dataset written by `write_dataset`. The world config is not stored
/// on disk; the caller supplies the one the data was generated with.
pub fn read_dataset(dir: &Path, cfg: &WorldConfig) -> Result<Dataset> {
    let statics_ch = read_grid(&dir.join("statics.dsg1"))?;
    if statics_ch.len() != 2 {
        return Err(Error::Format(format!(
            "statics.dsg1 must hold 2 channels, found {}",
            statics_ch.len()
        )));
    }
    let statics = StaticFields {
        orography: statics_ch[0].clone(),
        land_sea: statics_ch[1].clone(),
    };
    let manifest_path = dir.join("manifest.csv");
    let manifest = std::fs::read_to_string(&manifest_path).map_err(|e| {
        Error::MissingInput(format!("manifest {}: {}", manifest_path.display(), e))
    })?;
    let mut cases: Vec<Case> = Vec::new();
    for (ln, line) in manifest.lines().enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Format(format!("manifest line {} malformed", ln + 1)));
        }
        let split = Split::parse(parts[0])?;
        let init_index: usize = parts[1]
            .parse()
            .map_err(|_| Error::Format(format!("manifest line {}: bad init index", ln + 1)))?;
        let lead: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Format(format!("manifest line {}: bad lead", ln + 1)))?;
        let member: usize = parts[3]
            .parse()
            .map_err(|_| Error::Format(format!("manifest line {}: bad member", ln + 1)))?;
        let lr_channels = read_grid(&dir.join(parts[4]))?;
        let lowres = lr_channels[0].clone();
        let dynamics: Vec<(String, Field)> = lr_channels[1..]
            .iter()
            .zip(DYNAMIC_CHANNELS)
            .map(|(f, name)| (name.to_string(), f.clone()))
            .collect();
        let need_new_case = match cases.last() {
            Some(c) => c.init_index != init_index || c.split != split,
            None => true,
        };
        if need_new_case {
            let truth = read_grid(&dir.join(parts[5]))?
                .into_iter()
                .next()
                .ok_or_else(|| Error::Format("empty truth grid".into()))?;
            cases.push(Case { split, init_index, lead, truth, members: Vec::new() });
        }
        cases
            .last_mut()
            .unwrap()
            .members
            .push(MemberForecast { member, lowres, dynamics });
    }
    Ok(Dataset { config: *cfg, statics, cases })
}

#[cfg(test)]
mod tests;
