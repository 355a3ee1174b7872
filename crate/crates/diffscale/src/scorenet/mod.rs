//! The conditional score model: condition embedding, UNet with attention at
//! the bottleneck, the denoising-score-matching objective with classifier-free
//! condition dropout, and guided score evaluation.

mod optim;

pub use optim::Adam;

use crate::error::{Error, Result};
use crate::grid::{bilinear_resize, Field};
use crate::sde::VarianceSchedule;
use crate::tensorad::{read_checkpoint, write_checkpoint, ParamStore, Tape, TensorId};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashMap;
use std::path::Path;

pub const MIN_LEAD: f64 = 1.0;
pub const MAX_LEAD: f64 = 46.0;

/// The three conditioning configurations of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondConfig {
    /// Low-resolution wind speed + static fields.
    LrWsSf,
    /// Static fields + dynamic weather variables, no wind speed input.
    SfLrDf,
    /// Everything.
    LrWsSfLrDf,
}

pub const STATIC_CHANNELS: [&str; 2] = ["orography", "land_sea"];
pub const DYNAMIC_CHANNELS: [&str; 5] = ["t2m", "mslp", "u", "v", "z500"];

impl CondConfig {
    pub fn id(&self) -> &'static str {
        match self {
            CondConfig::LrWsSf => "lr-ws+sf",
            CondConfig::SfLrDf => "sf+lr-df",
            CondConfig::LrWsSfLrDf => "lr-ws+sf+lr-df",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lr-ws+sf" => Ok(CondConfig::LrWsSf),
            "sf+lr-df" => Ok(CondConfig::SfLrDf),
            "lr-ws+sf+lr-df" => Ok(CondConfig::LrWsSfLrDf),
            other => Err(Error::Config(format!(
                "unknown conditioning configuration '{}' (expected lr-ws+sf, sf+lr-df or lr-ws+sf+lr-df)",
                other
            ))),
        }
    }

    pub fn uses_lowres_ws(&self) -> bool {
        matches!(self, CondConfig::LrWsSf | CondConfig::LrWsSfLrDf)
    }

    pub fn uses_dynamics(&self) -> bool {
        matches!(self, CondConfig::SfLrDf | CondConfig::LrWsSfLrDf)
    }

    /// Ordered condition channel names; the network input is the noisy canvas
    /// followed by these.
    pub fn channel_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.uses_lowres_ws() {
            names.push("lowres_ws");
        }
        names.extend(STATIC_CHANNELS);
        if self.uses_dynamics() {
            names.extend(DYNAMIC_CHANNELS);
        }
        names
    }
}

/// The guidance bundle tau.
#[derive(Debug, Clone)]
pub struct Condition {
    pub alpha: f64,
    pub lead: f64,
    pub lowres_ws: Option<Field>,
    /// Named prior channels (static fields and low-res dynamic variables).
    pub priors: Vec<(String, Field)>,
    /// Classifier-free unconditional token; zeroes all channels and swaps the
    /// alpha/lead features for the learned null embedding.
    pub is_null: bool,
}

impl Condition {
    pub fn null() -> Self {
        Condition { alpha: 1.0, lead: 1.0, lowres_ws: None, priors: Vec::new(), is_null: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_null {
            return Ok(());
        }
        if self.alpha < 1.0 {
            return Err(Error::Domain(format!("scaling factor {} must be >= 1", self.alpha)));
        }
        if !(MIN_LEAD..=MAX_LEAD).contains(&self.lead) {
            return Err(Error::Domain(format!(
                "lead time {} outside [{}, {}] days",
                self.lead, MIN_LEAD, MAX_LEAD
            )));
        }
        Ok(())
    }

    fn channel(&self, name: &str) -> Option<&Field> {
        if name == "lowres_ws" {
            return self.lowres_ws.as_ref();
        }
        self.priors.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

/// Per-channel standardization statistics, computed from the training split
/// and carried in the checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    entries: Vec<(String, f64, f64)>,
}

impl NormStats {
    pub fn new(entries: Vec<(String, f64, f64)>) -> Self {
        NormStats { entries }
    }

    pub fn identity(names: &[&str]) -> Self {
        NormStats {
            entries: names.iter().map(|n| (n.to_string(), 0.0, 1.0)).collect(),
        }
    }

    pub fn entries(&self) -> &[(String, f64, f64)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Result<(f64, f64)> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|&(_, m, s)| (m, s))
            .ok_or_else(|| Error::Usage(format!("no normalization stats for channel {}", name)))
    }

    pub fn standardize(&self, name: &str, f: &Field) -> Result<Field> {
        let (m, s) = self.get(name)?;
        Ok(f.map(|v| ((v as f64 - m) / s) as f32))
    }

    pub fn destandardize(&self, name: &str, f: &Field) -> Result<Field> {
        let (m, s) = self.get(name)?;
        Ok(f.map(|v| (v as f64 * s + m) as f32))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNetConfig {
    pub canvas: usize,
    pub base: usize,
    pub channels: [usize; 3],
    pub emb_dim: usize,
    pub cond_config: CondConfig,
}

impl ScoreNetConfig {
    pub fn desk_default(canvas: usize, base: usize, cond_config: CondConfig) -> Self {
        ScoreNetConfig { canvas, base, channels: [32, 64, 128], emb_dim: 64, cond_config }
    }

    pub fn input_channels(&self) -> usize {
        1 + self.cond_config.channel_names().len()
    }
}

const N_FREQ_T: usize = 8;
const N_FREQ_COND: usize = 6;
const GN_GROUPS: usize = 4;

/// Fourier features [sin(w_k v), cos(w_k v)] with geometric frequencies.
pub fn fourier_features(v: f64, n_freq: usize, base_freq: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n_freq);
    for k in 0..n_freq {
        let w = base_freq * (1u64 << k) as f64;
        out.push((w * v).sin());
        out.push((w * v).cos());
    }
    out
}

fn cond_features(alpha: f64, lead: f64) -> Vec<f64> {
    let mut f = fourier_features(alpha, N_FREQ_COND, std::f64::consts::PI / 64.0);
    f.extend(fourier_features(lead, N_FREQ_COND, std::f64::consts::PI / 64.0));
    f
}

/// A one-sample training item: the pixelated truth canvas and its condition.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub target: Field,
    pub cond: Condition,
}

#[derive(Debug, Clone)]
pub struct ScoreNetwork {
    pub config: ScoreNetConfig,
    pub params: ParamStore,
    pub norm: NormStats,
}

struct NetBuilder<'a> {
    tape: &'a mut Tape,
    ids: HashMap<String, TensorId>,
}

impl<'a> NetBuilder<'a> {
    fn new(tape: &'a mut Tape, params: &ParamStore, trainable: bool) -> Self {
        let mut ids = HashMap::new();
        for p in params.params() {
            let id = tape.leaf(&p.shape, p.data.clone(), trainable);
            ids.insert(p.name.clone(), id);
        }
        NetBuilder { tape, ids }
    }

    fn p(&self, name: &str) -> TensorId {
        *self.ids.get(name).unwrap_or_else(|| panic!("missing parameter {}", name))
    }

    fn conv(&mut self, name: &str, x: TensorId) -> TensorId {
        let w = self.p(&format!("{}.w", name));
        let b = self.p(&format!("{}.b", name));
        self.tape.conv2d(x, w, b)
    }

    fn dense(&mut self, name: &str, x: TensorId) -> TensorId {
        let w = self.p(&format!("{}.w", name));
        let b = self.p(&format!("{}.b", name));
        self.tape.dense(x, w, b)
    }

    fn gn(&mut self, name: &str, x: TensorId) -> TensorId {
        let gamma = self.p(&format!("{}.gamma", name));
        let beta = self.p(&format!("{}.beta", name));
        let c = self.tape.shape(x)[0];
        let groups = if c % GN_GROUPS == 0 { GN_GROUPS } else { 1 };
        self.tape.group_norm(x, gamma, beta, groups)
    }

    fn resblock(&mut self, name: &str, x: TensorId, emb: TensorId, cin: usize, cout: usize) -> TensorId {
        let h = self.gn(&format!("{}.gn1", name), x);
        let h = self.tape.silu(h);
        let h = self.conv(&format!("{}.conv1", name), h);
        let e = self.dense(&format!("{}.emb", name), emb);
        let h = self.tape.add_bias(h, e);
        let h = self.gn(&format!("{}.gn2", name), h);
        let h = self.tape.silu(h);
        let h = self.conv(&format!("{}.conv2", name), h);
        let skip = if cin == cout { x } else { self.conv(&format!("{}.skip", name), x) };
        self.tape.add(h, skip)
    }

    /// Single-head self-attention over flattened spatial positions, residual.
    fn attention(&mut self, name: &str, x: TensorId) -> TensorId {
        let (c, h, w) = (
            self.tape.shape(x)[0],
            self.tape.shape(x)[1],
            self.tape.shape(x)[2],
        );
        let n = self.gn(&format!("{}.gn", name), x);
        let flat = self.tape.reshape(n, &[c, h * w]);
        let q = {
            let wq = self.p(&format!("{}.wq", name));
            self.tape.matmul(wq, flat)
        };
        let k = {
            let wk = self.p(&format!("{}.wk", name));
            self.tape.matmul(wk, flat)
        };
        let v = {
            let wv = self.p(&format!("{}.wv", name));
            self.tape.matmul(wv, flat)
        };
        let qt = self.tape.transpose(q);
        let scores = self.tape.matmul(qt, k);
        let scaled = self.tape.scale(scores, 1.0 / (c as f64).sqrt());
        let attn = self.tape.softmax_rows(scaled);
        let attn_t = self.tape.transpose(attn);
        let out = self.tape.matmul(v, attn_t);
        let wp = self.p(&format!("{}.proj", name));
        let out = self.tape.matmul(wp, out);
        let out3 = self.tape.reshape(out, &[c, h, w]);
        let pb = self.p(&format!("{}.proj_bias", name));
        let out3 = self.tape.add_bias(out3, pb);
        self.tape.add(x, out3)
    }
}

impl ScoreNetwork {
    pub fn new(config: ScoreNetConfig, norm: NormStats, rng: &mut impl Rng) -> Self {
        let mut p = ParamStore::new();
        let [c0, c1, c2] = config.channels;
        let e = config.emb_dim;
        let cin = config.input_channels();

        let conv = |p: &mut ParamStore, name: &str, cout: usize, cin: usize, k: usize, rng: &mut dyn rand::RngCore| {
            let std = (2.0 / (cin * k * k) as f64).sqrt();
            p.add_normal(&format!("{}.w", name), &[cout, cin, k, k], std, rng);
            p.add_const(&format!("{}.b", name), &[cout], 0.0);
        };
        let dense = |p: &mut ParamStore, name: &str, m: usize, n: usize, rng: &mut dyn rand::RngCore| {
            let std = (2.0 / n as f64).sqrt();
            p.add_normal(&format!("{}.w", name), &[m, n], std, rng);
            p.add_const(&format!("{}.b", name), &[m], 0.0);
        };
        let gn = |p: &mut ParamStore, name: &str, c: usize| {
            p.add_const(&format!("{}.gamma", name), &[c], 1.0);
            p.add_const(&format!("{}.beta", name), &[c], 0.0);
        };
        let resblock = |p: &mut ParamStore, name: &str, cin: usize, cout: usize, e: usize, rng: &mut dyn rand::RngCore| {
            gn(p, &format!("{}.gn1", name), cin);
            conv(p, &format!("{}.conv1", name), cout, cin, 3, rng);
            dense(p, &format!("{}.emb", name), cout, e, rng);
            gn(p, &format!("{}.gn2", name), cout);
            conv(p, &format!("{}.conv2", name), cout, cout, 3, rng);
            if cin != cout {
                conv(p, &format!("{}.skip", name), cout, cin, 1, rng);
            }
        };

        // condition/time embedding
        p.add_normal("embed.null", &[4 * N_FREQ_COND], 0.5, rng);
        dense(&mut p, "embed.t", e, 2 * N_FREQ_T, rng);
        dense(&mut p, "embed.cond", e, 4 * N_FREQ_COND, rng);
        dense(&mut p, "embed.out", e, e, rng);

        conv(&mut p, "conv_in", c0, cin, 3, rng);
        resblock(&mut p, "enc0", c0, c0, e, rng);
        resblock(&mut p, "enc1", c0, c1, e, rng);
        resblock(&mut p, "enc2", c1, c2, e, rng);
        resblock(&mut p, "mid0", c2, c2, e, rng);
        gn(&mut p, "attn.gn", c2);
        let astd = (1.0 / c2 as f64).sqrt();
        p.add_normal("attn.wq", &[c2, c2], astd, rng);
        p.add_normal("attn.wk", &[c2, c2], astd, rng);
        p.add_normal("attn.wv", &[c2, c2], astd, rng);
        p.add_normal("attn.proj", &[c2, c2], astd, rng);
        p.add_const("attn.proj_bias", &[c2], 0.0);
        resblock(&mut p, "mid1", c2, c2, e, rng);
        resblock(&mut p, "dec1", c2 + c1, c1, e, rng);
        resblock(&mut p, "dec0", c1 + c0, c0, e, rng);
        gn(&mut p, "out.gn", c0);
        // zero-initialized head: the untrained network predicts zero noise
        p.add_const("out_conv.w", &[1, c0, 3, 3], 0.0);
        p.add_const("out_conv.b", &[1], 0.0);

        ScoreNetwork { config, params: p, norm }
    }

    /// Standardized condition channels in network order; null conditions give
    /// all-zero channels.
    fn assemble_cond_channels(&self, cond: &Condition) -> Result<Vec<Vec<f64>>> {
        let s = self.config.canvas;
        let names = self.config.cond_config.channel_names();
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            if cond.is_null {
                out.push(vec![0.0; s * s]);
                continue;
            }
            let raw = cond.channel(name).ok_or_else(|| {
                Error::Usage(format!(
                    "condition is missing channel '{}' required by configuration {}",
                    name,
                    self.config.cond_config.id()
                ))
            })?;
            let sized = if raw.height() == s && raw.width() == s {
                raw.clone()
            } else {
                bilinear_resize(raw, s, s)?
            };
            let std = self.norm.standardize(name, &sized)?;
            out.push(std.values().iter().map(|&v| v as f64).collect());
        }
        Ok(out)
    }

    /// The alpha/lead embedding after the dense projection; the null token
    /// replaces the Fourier features with a learned vector.
    pub fn embed_condition(&self, alpha: f64, lead: f64, is_null: bool) -> Result<Vec<f64>> {
        if !is_null {
            Condition {
                alpha,
                lead,
                lowres_ws: None,
                priors: Vec::new(),
                is_null: false,
            }
            .validate()?;
        }
        let feats = if is_null {
            self.params.get("embed.null").unwrap().data.clone()
        } else {
            cond_features(alpha, lead)
        };
        let mut tape = Tape::new();
        let mut b = NetBuilder::new(&mut tape, &self.params, false);
        let f = b.tape.constant(&[feats.len()], feats);
        let proj = b.dense("embed.cond", f);
        Ok(tape.data(proj).to_vec())
    }

    /// Build the full forward graph; returns the noise-prediction head.
    fn build_eps(
        &self,
        tape: &mut Tape,
        trainable: bool,
        x_t: &[f64],
        t: f64,
        cond: &Condition,
    ) -> Result<TensorId> {
        let s = self.config.canvas;
        let [c0, c1, c2] = self.config.channels;
        if x_t.len() != s * s {
            return Err(Error::Dimension(format!(
                "noisy canvas has {} values, expected {}x{}",
                x_t.len(),
                s,
                s
            )));
        }
        let cond_ch = self.assemble_cond_channels(cond)?;
        let mut b = NetBuilder::new(tape, &self.params, trainable);

        let mut input = x_t.to_vec();
        for ch in &cond_ch {
            input.extend_from_slice(ch);
        }
        let cin = self.config.input_channels();
        let x = b.tape.constant(&[cin, s, s], input);

        // embedding: diffusion time plus condition token
        let tf = fourier_features(t, N_FREQ_T, std::f64::consts::PI);
        let tfe = b.tape.constant(&[2 * N_FREQ_T], tf);
        let te = b.dense("embed.t", tfe);
        let te = b.tape.silu(te);
        let cf = if cond.is_null {
            let null = b.p("embed.null");
            b.tape.reshape(null, &[4 * N_FREQ_COND])
        } else {
            let feats = cond_features(cond.alpha, cond.lead);
            b.tape.constant(&[4 * N_FREQ_COND], feats)
        };
        let ce = b.dense("embed.cond", cf);
        let ce = b.tape.silu(ce);
        let sum = b.tape.add(te, ce);
        let emb = b.dense("embed.out", sum);
        let emb = b.tape.silu(emb);

        let h0 = b.conv("conv_in", x);
        let h0 = b.resblock("enc0", h0, emb, c0, c0);
        let d1 = b.tape.avg_pool2(h0);
        let h1 = b.resblock("enc1", d1, emb, c0, c1);
        let d2 = b.tape.avg_pool2(h1);
        let h2 = b.resblock("enc2", d2, emb, c1, c2);
        let m = b.resblock("mid0", h2, emb, c2, c2);
        let m = b.attention("attn", m);
        let m = b.resblock("mid1", m, emb, c2, c2);
        let u1 = b.tape.upsample_nearest2(m);
        let u1 = b.tape.concat_channels(u1, h1);
        let h3 = b.resblock("dec1", u1, emb, c2 + c1, c1);
        let u0 = b.tape.upsample_nearest2(h3);
        let u0 = b.tape.concat_channels(u0, h0);
        let h4 = b.resblock("dec0", u0, emb, c1 + c0, c0);
        let o = b.gn("out.gn", h4);
        let o = b.tape.silu(o);
        Ok(b.conv("out_conv", o))
    }

    /// The network's epsilon head on a standardized noisy canvas.
    pub fn noise_prediction(&self, x_t: &Field, t: f64, cond: &Condition) -> Result<Field> {
        cond.validate()?;
        let s = self.config.canvas;
        if x_t.height() != s || x_t.width() != s {
            return Err(Error::Dimension(format!(
                "input canvas {}x{} does not match configured size {}",
                x_t.height(),
                x_t.width(),
                s
            )));
        }
        let xv: Vec<f64> = x_t.values().iter().map(|&v| v as f64).collect();
        let mut tape = Tape::new();
        let eps = self.build_eps(&mut tape, false, &xv, t, cond)?;
        let vals = tape.data(eps).iter().map(|&v| v as f32).collect();
        Field::new(s, s, vals)
    }

    /// score = -eps_hat / sigma(t): the epsilon parameterization of the score.
    pub fn score_forward(
        &self,
        sched: &VarianceSchedule,
        x_t: &Field,
        t: f64,
        cond: &Condition,
    ) -> Result<Field> {
        let sigma = sched.sigma(t)? as f32;
        let eps = self.noise_prediction(x_t, t, cond)?;
        Ok(eps.map(|e| -e / sigma))
    }

    /// Classifier-free combination (1 + w) * score(cond) - w * score(null).
    pub fn guided_score(
        &self,
        sched: &VarianceSchedule,
        x_t: &Field,
        t: f64,
        cond: &Condition,
        w: f64,
    ) -> Result<Field> {
        let conditional = self.score_forward(sched, x_t, t, cond)?;
        if w == 0.0 {
            return Ok(conditional);
        }
        let null = Condition::null();
        let unconditional = self.score_forward(sched, x_t, t, &null)?;
        conditional.zip(&unconditional, |c, u| ((1.0 + w) as f32) * c - (w as f32) * u)
    }

    /// One DSM step over a batch: per item draw t ~ U[t_min, 1] and unit
    /// noise, drop the condition with probability p_uncond, and regress the
    /// epsilon head onto the injected noise. Returns the mean loss and
    /// parameter gradients averaged over the batch.
    pub fn dsm_loss(
        &self,
        batch: &[TrainItem],
        sched: &VarianceSchedule,
        rng: &mut impl Rng,
        p_uncond: f64,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let (loss, grads) = self.dsm_core(batch, sched, rng, p_uncond, true)?;
        Ok((loss, grads.expect("gradients requested")))
    }

    /// The DSM loss without the backward sweep; used by gradient checks and
    /// validation loops.
    pub fn dsm_loss_value(
        &self,
        batch: &[TrainItem],
        sched: &VarianceSchedule,
        rng: &mut impl Rng,
        p_uncond: f64,
    ) -> Result<f64> {
        Ok(self.dsm_core(batch, sched, rng, p_uncond, false)?.0)
    }

    fn dsm_core(
        &self,
        batch: &[TrainItem],
        sched: &VarianceSchedule,
        rng: &mut impl Rng,
        p_uncond: f64,
        with_grads: bool,
    ) -> Result<(f64, Option<Vec<Vec<f64>>>)> {
        if batch.is_empty() {
            return Err(Error::Usage("empty training batch".into()));
        }
        if !(0.0..1.0).contains(&p_uncond) {
            return Err(Error::Usage(format!("p_uncond {} outside [0,1)", p_uncond)));
        }
        let s = self.config.canvas;
        let mut total_loss = 0.0;
        let mut grads: Vec<Vec<f64>> = self
            .params
            .params()
            .iter()
            .map(|p| vec![0.0; p.data.len()])
            .collect();
        let inv_b = 1.0 / batch.len() as f64;
        for item in batch {
            let t: f64 = rng.gen_range(sched.t_min()..1.0);
            let eps: Vec<f64> = (0..s * s).map(|_| StandardNormal.sample(rng)).collect();
            let drop_cond = rng.gen_bool(p_uncond);
            let cond = if drop_cond { Condition::null() } else { item.cond.clone() };
            let sigma = sched.sigma(t)?;
            let target_std = self.norm.standardize("target", &item.target)?;
            let x_t: Vec<f64> = target_std
                .values()
                .iter()
                .zip(&eps)
                .map(|(&x0, e)| x0 as f64 + sigma * e)
                .collect();
            let mut tape = Tape::new();
            let eps_hat = self.build_eps(&mut tape, with_grads, &x_t, t, &cond)?;
            let flat = tape.reshape(eps_hat, &[s * s]);
            let target = tape.constant(&[s * s], eps);
            let diff = tape.sub(flat, target);
            let sq = tape.mul(diff, diff);
            let loss = tape.mean_all(sq);
            total_loss += tape.scalar_value(loss) * inv_b;
            if with_grads {
                let g = tape.backward(loss)?;
                // parameter leaves were created first, in params order
                for (pi, gp) in grads.iter_mut().enumerate() {
                    if let Some(pg) = &g[pi] {
                        for (a, b) in gp.iter_mut().zip(pg) {
                            *a += b * inv_b;
                        }
                    }
                }
            }
        }
        if !total_loss.is_finite() {
            return Err(Error::Numerical("non-finite training loss".into()));
        }
        Ok((total_loss, if with_grads { Some(grads) } else { None }))
    }

    pub fn save_checkpoint(&self, path: &Path, extra: &[(String, String)]) -> Result<()> {
        let mut meta = vec![
            ("format".to_string(), "diffscale-scorenet".to_string()),
            ("config.canvas".to_string(), self.config.canvas.to_string()),
            ("config.base".to_string(), self.config.base.to_string()),
            ("config.c0".to_string(), self.config.channels[0].to_string()),
            ("config.c1".to_string(), self.config.channels[1].to_string()),
            ("config.c2".to_string(), self.config.channels[2].to_string()),
            ("config.emb_dim".to_string(), self.config.emb_dim.to_string()),
            ("config.cond".to_string(), self.config.cond_config.id().to_string()),
        ];
        for (name, mean, std) in self.norm.entries() {
            meta.push((format!("norm.{}.mean", name), format!("{}", mean)));
            meta.push((format!("norm.{}.std", name), format!("{}", std)));
        }
        meta.extend(extra.iter().cloned());
        write_checkpoint(path, &self.params, &meta)
    }

    pub fn load_checkpoint(path: &Path) -> Result<(ScoreNetwork, Vec<(String, String)>)> {
        let (params, meta) = read_checkpoint(path)?;
        let get = |key: &str| -> Result<&str> {
            meta.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Format(format!("checkpoint missing metadata key {}", key)))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("bad integer for {}", key)))
        };
        let config = ScoreNetConfig {
            canvas: parse_usize("config.canvas")?,
            base: parse_usize("config.base")?,
            channels: [parse_usize("config.c0")?, parse_usize("config.c1")?, parse_usize("config.c2")?],
            emb_dim: parse_usize("config.emb_dim")?,
            cond_config: CondConfig::parse(get("config.cond")?)?,
        };
        let mut entries = Vec::new();
        let mut names: Vec<&str> = vec!["target"];
        names.extend(config.cond_config.channel_names());
        for name in names {
            let mean: f64 = get(&format!("norm.{}.mean", name))?
                .parse()
                .map_err(|_| Error::Format(format!("bad norm mean for {}", name)))?;
            let std: f64 = get(&format!("norm.{}.std", name))?
                .parse()
                .map_err(|_| Error::Format(format!("bad norm std for {}", name)))?;
            entries.push((name.to_string(), mean, std));
        }
        let extra = meta
            .iter()
            .filter(|(k, _)| {
                !k.starts_with("config.") && !k.starts_with("norm.") && k != "format"
            })
            .cloned()
            .collect();
        Ok((ScoreNetwork { config, params, norm: NormStats::new(entries) }, extra))
    }
}
