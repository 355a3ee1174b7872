//! Forecast verification: lead-time binning, deterministic error maps,
//! ensemble CRPS with a cached climatology reference, skill scores, and
//! report assembly/serialization.

use crate::error::{Error, Result};
use crate::grid::{bilinear_resize, pixelate, Field, FactorSet};
use crate::sampler::EnsembleForecast;
use std::path::Path;

/// Inclusive lead-day ranges: five short bins, then the long tail.
pub const BIN_RANGES: [(usize, usize); 6] =
    [(1, 3), (4, 6), (7, 9), (10, 12), (13, 15), (16, 46)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinScheme {
    pub ranges: Vec<(usize, usize)>,
}

impl Default for BinScheme {
    fn default() -> Self {
        BinScheme { ranges: BIN_RANGES.to_vec() }
    }
}

impl BinScheme {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn assign_bin(&self, lead_day: usize) -> Result<usize> {
        self.ranges
            .iter()
            .position(|&(lo, hi)| lead_day >= lo && lead_day <= hi)
            .ok_or_else(|| Error::Domain(format!("lead day {} outside every bin", lead_day)))
    }

    pub fn label(&self, bin: usize) -> String {
        let (lo, hi) = self.ranges[bin];
        format!("{}-{}", lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Climatology,
    Baseline,
    Model,
}

pub const METHODS: [Method; 3] = [Method::Climatology, Method::Baseline, Method::Model];

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Climatology => "climatology",
            Method::Baseline => "baseline",
            Method::Model => "model",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Bias,
    Mae,
    Mse,
    Rmse,
    Acc,
    Crps,
    Crpss,
}

pub const METRICS: [Metric; 7] = [
    Metric::Bias,
    Metric::Mae,
    Metric::Mse,
    Metric::Rmse,
    Metric::Acc,
    Metric::Crps,
    Metric::Crpss,
];

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Bias => "bias",
            Metric::Mae => "mae",
            Metric::Mse => "mse",
            Metric::Rmse => "rmse",
            Metric::Acc => "acc",
            Metric::Crps => "crps",
            Metric::Crpss => "crpss",
        }
    }
}

/// f64 spatial map; NaN marks missing pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl MapGrid {
    pub fn filled(height: usize, width: usize, v: f64) -> Self {
        MapGrid { height, width, values: vec![v; height * width] }
    }

    /// Spatial mean over defined pixels; None when every pixel is missing.
    pub fn spatial_mean(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &v in &self.values {
            if v.is_finite() {
                sum += v;
                n += 1;
            }
        }
        if n == 0 { None } else { Some(sum / n as f64) }
    }

    pub fn to_field(&self) -> Field {
        Field::new(
            self.height,
            self.width,
            self.values.iter().map(|&v| v as f32).collect(),
        )
        .expect("positive dimensions")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricCell {
    pub resolution: usize,
    pub bin: usize,
    pub method: Method,
    pub metric: Metric,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricMapEntry {
    pub resolution: usize,
    pub bin: usize,
    pub method: Method,
    pub metric: Metric,
    pub map: MapGrid,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub cells: Vec<MetricCell>,
    pub maps: Vec<MetricMapEntry>,
}

impl MetricReport {
    pub fn value(&self, resolution: usize, bin: usize, method: Method, metric: Metric) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.resolution == resolution && c.bin == bin && c.method == method && c.metric == metric
            })
            .and_then(|c| c.value)
    }

    pub fn map(&self, resolution: usize, bin: usize, method: Method, metric: Metric) -> Option<&MapGrid> {
        self.maps
            .iter()
            .find(|m| {
                m.resolution == resolution && m.bin == bin && m.method == method && m.metric == metric
            })
            .map(|m| &m.map)
    }

    /// Header `resolution,bin,method,metric,value`; missing cells emit NA.
    /// Row order follows the cell vector, which evaluate_run builds in a
    /// fixed (resolution, bin, method, metric) nesting for reproducibility.
    pub fn to_csv(&self, bins: &BinScheme) -> String {
        let mut out = String::from("resolution,bin,method,metric,value\n");
        for c in &self.cells {
            let v = match c.value {
                Some(v) => format!("{:.10}", v),
                None => "NA".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.resolution,
                bins.label(c.bin),
                c.method.name(),
                c.metric.name(),
                v
            ));
        }
        out
    }
}

/// Empirical CRPS: (1/K) sum |x_i - y| - (1/(2K^2)) sum_ij |x_i - x_j|.
pub fn crps_ensemble(members: &[f64], obs: f64) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::Usage("crps needs at least one member".into()));
    }
    let k = members.len();
    let mut sorted = members.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let term1: f64 = sorted.iter().map(|x| (x - obs).abs()).sum::<f64>() / k as f64;
    // pairwise distances of a sorted list: sum_ij |xi-xj| = 2 sum_i (2i+1-K) x_i
    let pair: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 + 1.0 - k as f64) * x)
        .sum::<f64>()
        * 2.0;
    Ok(term1 - pair / (2.0 * (k * k) as f64))
}

/// 1 - crps_model / crps_ref; undefined for a zero or negative reference.
pub fn crpss(crps_model: f64, crps_ref: f64) -> Option<f64> {
    if crps_ref > 0.0 {
        Some(1.0 - crps_model / crps_ref)
    } else {
        None
    }
}

/// Per-pixel empirical distribution of the training truths with cached
/// sorted values, prefix sums and the CRPS self-dispersion term, so scoring
/// one observation costs O(log K) per pixel.
#[derive(Debug, Clone)]
pub struct Climatology {
    pub height: usize,
    pub width: usize,
    k: usize,
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    dispersion: Vec<f64>,
    mean: Vec<f64>,
}

pub fn build_climatology(truths: &[Field]) -> Result<Climatology> {
    if truths.len() < 2 {
        return Err(Error::Usage("climatology needs at least 2 training truths".into()));
    }
    let (h, w) = (truths[0].height(), truths[0].width());
    for t in truths {
        if t.height() != h || t.width() != w {
            return Err(Error::Dimension("climatology inputs disagree in shape".into()));
        }
    }
    let k = truths.len();
    let n = h * w;
    let mut sorted = vec![0.0f64; n * k];
    let mut prefix = vec![0.0f64; n * (k + 1)];
    let mut dispersion = vec![0.0f64; n];
    let mut mean = vec![0.0f64; n];
    for pix in 0..n {
        let vals = &mut sorted[pix * k..(pix + 1) * k];
        for (vi, t) in truths.iter().enumerate() {
            vals[vi] = t.values()[pix] as f64;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pre = &mut prefix[pix * (k + 1)..(pix + 1) * (k + 1)];
        for i in 0..k {
            pre[i + 1] = pre[i] + vals[i];
        }
        mean[pix] = pre[k] / k as f64;
        let pair: f64 = vals
            .iter()
            .enumerate()
            .map(|(i, x)| (2.0 * i as f64 + 1.0 - k as f64) * x)
            .sum::<f64>()
            * 2.0;
        dispersion[pix] = pair / (2.0 * (k * k) as f64);
    }
    Ok(Climatology { height: h, width: w, k, sorted, prefix, dispersion, mean })
}

impl Climatology {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn members(&self, pix: usize) -> &[f64] {
        &self.sorted[pix * self.k..(pix + 1) * self.k]
    }

    pub fn mean_at(&self, pix: usize) -> f64 {
        self.mean[pix]
    }

    pub fn mean_map(&self) -> MapGrid {
        MapGrid { height: self.height, width: self.width, values: self.mean.clone() }
    }

    pub fn crps_at(&self, pix: usize, obs: f64) -> f64 {
        let vals = self.members(pix);
        let pre = &self.prefix[pix * (self.k + 1)..(pix + 1) * (self.k + 1)];
        let p = vals.partition_point(|&x| x < obs);
        let below = obs * p as f64 - pre[p];
        let above = (pre[self.k] - pre[p]) - obs * (self.k - p) as f64;
        (below + above) / self.k as f64 - self.dispersion[pix]
    }
}

/// One evaluation case: the full-resolution truth, its integer lead day, and
/// the raw coarse forecast members feeding the interpolation baseline.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub lead_day: usize,
    pub truth: Field,
    pub baseline_members: Vec<Field>,
}

/// Per-case ensembles for one method at one evaluation resolution, as
/// [case][member][pixel]. Climatology is handled separately through its cache.
pub struct ExplicitEnsembles {
    pub cases: Vec<Vec<Vec<f64>>>,
}

enum Source<'a> {
    Explicit(ExplicitEnsembles),
    Clim(&'a Climatology),
}

fn field_to_f64(f: &Field) -> Vec<f64> {
    f.values().iter().map(|&v| v as f64).collect()
}

/// Metrics for one (method, resolution): six bins of cells plus maps for the
/// populated bins. `clim_crps` supplies the per-bin CRPS reference maps; the
/// climatology method passes its own output back in, making its CRPSS an
/// exact zero.
#[allow(clippy::too_many_arguments)]
fn eval_method(
    resolution: usize,
    method: Method,
    lead_days: &[usize],
    truths: &[Vec<f64>],
    source: &Source,
    clim_mean: &[f64],
    clim_crps: Option<&[Option<MapGrid>]>,
    bins: &BinScheme,
    height: usize,
    width: usize,
) -> Result<(Vec<MetricCell>, Vec<MetricMapEntry>, Vec<Option<MapGrid>>)> {
    let n_pix = height * width;
    let ens_mean = |case: usize| -> Vec<f64> {
        match source {
            Source::Explicit(e) => {
                let members = &e.cases[case];
                let mut m = vec![0.0; n_pix];
                for mem in members {
                    for (mi, v) in m.iter_mut().zip(mem) {
                        *mi += v;
                    }
                }
                for v in m.iter_mut() {
                    *v /= members.len() as f64;
                }
                m
            }
            Source::Clim(c) => c.mean.clone(),
        }
    };
    let mut cells = Vec::new();
    let mut maps = Vec::new();
    let mut crps_maps: Vec<Option<MapGrid>> = Vec::new();
    for bin in 0..bins.len() {
        let idx: Vec<usize> = (0..lead_days.len())
            .filter(|&i| bins.assign_bin(lead_days[i]).ok() == Some(bin))
            .collect();
        if idx.is_empty() {
            for metric in METRICS {
                cells.push(MetricCell { resolution, bin, method, metric, value: None });
            }
            crps_maps.push(None);
            continue;
        }
        let nc = idx.len() as f64;
        let mut bias = MapGrid::filled(height, width, 0.0);
        let mut mae = MapGrid::filled(height, width, 0.0);
        let mut mse = MapGrid::filled(height, width, 0.0);
        let mut crps = MapGrid::filled(height, width, 0.0);
        let means: Vec<Vec<f64>> = idx.iter().map(|&i| ens_mean(i)).collect();
        for (ci, &case) in idx.iter().enumerate() {
            let truth = &truths[case];
            for pix in 0..n_pix {
                let e = means[ci][pix] - truth[pix];
                bias.values[pix] += e / nc;
                mae.values[pix] += e.abs() / nc;
                mse.values[pix] += e * e / nc;
                let c = match source {
                    Source::Explicit(ens) => {
                        let members: Vec<f64> =
                            ens.cases[case].iter().map(|m| m[pix]).collect();
                        crps_ensemble(&members, truth[pix])?
                    }
                    Source::Clim(cl) => cl.crps_at(pix, truth[pix]),
                };
                crps.values[pix] += c / nc;
            }
        }
        let rmse = MapGrid {
            height,
            width,
            values: mse.values.iter().map(|&v| v.sqrt()).collect(),
        };
        // anomaly correlation across the bin's cases, per pixel
        let acc = if idx.len() >= 2 {
            let mut vals = vec![f64::NAN; n_pix];
            for (pix, slot) in vals.iter_mut().enumerate() {
                let xs: Vec<f64> = means.iter().map(|m| m[pix] - clim_mean[pix]).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| truths[i][pix] - clim_mean[pix]).collect();
                let mx = xs.iter().sum::<f64>() / nc;
                let my = ys.iter().sum::<f64>() / nc;
                let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
                let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
                let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
                if vx > 0.0 && vy > 0.0 {
                    *slot = cov / (vx * vy).sqrt();
                }
            }
            Some(MapGrid { height, width, values: vals })
        } else {
            None
        };
        let crps_scalar = crps.spatial_mean();
        let crpss_pair = match (clim_crps, crps_scalar) {
            (Some(refs), Some(cm)) => match &refs[bin] {
                Some(ref_map) => {
                    let map = MapGrid {
                        height,
                        width,
                        values: crps
                            .values
                            .iter()
                            .zip(&ref_map.values)
                            .map(|(&m, &r)| crpss(m, r).unwrap_or(f64::NAN))
                            .collect(),
                    };
                    let scalar = ref_map.spatial_mean().and_then(|r| crpss(cm, r));
                    Some((map, scalar))
                }
                None => None,
            },
            _ => None,
        };
        for metric in METRICS {
            let (value, map): (Option<f64>, Option<&MapGrid>) = match metric {
                Metric::Bias => (bias.spatial_mean(), Some(&bias)),
                Metric::Mae => (mae.spatial_mean(), Some(&mae)),
                Metric::Mse => (mse.spatial_mean(), Some(&mse)),
                Metric::Rmse => (rmse.spatial_mean(), Some(&rmse)),
                Metric::Acc => (
                    acc.as_ref().and_then(|m| m.spatial_mean()),
                    acc.as_ref(),
                ),
                Metric::Crps => (crps_scalar, Some(&crps)),
                Metric::Crpss => (
                    crpss_pair.as_ref().and_then(|(_, s)| *s),
                    crpss_pair.as_ref().map(|(m, _)| m),
                ),
            };
            cells.push(MetricCell { resolution, bin, method, metric, value });
            if let Some(m) = map {
                maps.push(MetricMapEntry { resolution, bin, method, metric, map: m.clone() });
            }
        }
        crps_maps.push(Some(crps));
    }
    Ok((cells, maps, crps_maps))
}

/// Single-resolution evaluation of explicit model and baseline ensembles
/// against a prepared climatology; the workhorse behind evaluate_run, usable
/// directly on non-square grids.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_explicit(
    resolution: usize,
    lead_days: &[usize],
    truths: &[Vec<f64>],
    model: ExplicitEnsembles,
    baseline: ExplicitEnsembles,
    clim: &Climatology,
    bins: &BinScheme,
    height: usize,
    width: usize,
) -> Result<MetricReport> {
    let n = lead_days.len();
    if truths.len() != n || model.cases.len() != n || baseline.cases.len() != n {
        return Err(Error::Usage(format!(
            "case counts disagree: {} leads, {} truths, {} model, {} baseline",
            n,
            truths.len(),
            model.cases.len(),
            baseline.cases.len()
        )));
    }
    if clim.height != height || clim.width != width {
        return Err(Error::Dimension(format!(
            "climatology is {}x{}, evaluation grid is {}x{}",
            clim.height, clim.width, height, width
        )));
    }
    let mut report = MetricReport::default();
    let (_, _, clim_crps) = eval_method(
        resolution,
        Method::Climatology,
        lead_days,
        truths,
        &Source::Clim(clim),
        &clim.mean,
        None,
        bins,
        height,
        width,
    )?;
    // climatology's own CRPSS is scored against the reference just built,
    // so the skill rows come out exactly zero
    let (cells, maps, _) = eval_method(
        resolution,
        Method::Climatology,
        lead_days,
        truths,
        &Source::Clim(clim),
        &clim.mean,
        Some(&clim_crps),
        bins,
        height,
        width,
    )?;
    report.cells.extend(cells);
    report.maps.extend(maps);
    for (method, source) in [
        (Method::Baseline, Source::Explicit(baseline)),
        (Method::Model, Source::Explicit(model)),
    ] {
        let (cells, maps, _) = eval_method(
            resolution,
            method,
            lead_days,
            truths,
            &source,
            &clim.mean,
            Some(&clim_crps),
            bins,
            height,
            width,
        )?;
        report.cells.extend(cells);
        report.maps.extend(maps);
    }
    Ok(report)
}

/// Full evaluation over the factor set. `model` holds one EnsembleForecast
/// per (case, factor entry), case-major in factor-set order; its members are
/// canvas-sized fields. Truths are pixelated to each entry's resolution, the
/// baseline is the bilinear upsample of the raw coarse members, and the
/// climatology reference is rebuilt from the training truths per resolution.
pub fn evaluate_run(
    model: &[EnsembleForecast],
    cases: &[EvalCase],
    train_truths: &[Field],
    bins: &BinScheme,
    factors: &FactorSet,
) -> Result<MetricReport> {
    let nf = factors.entries.len();
    if model.len() != cases.len() * nf {
        return Err(Error::Usage(format!(
            "expected {} model ensembles ({} cases x {} factors), got {}",
            cases.len() * nf,
            cases.len(),
            nf,
            model.len()
        )));
    }
    if cases.is_empty() {
        return Err(Error::Usage("no evaluation cases".into()));
    }
    let s = factors.canvas_size;
    let lead_days: Vec<usize> = cases.iter().map(|c| c.lead_day).collect();
    let mut report = MetricReport::default();
    for (fi, entry) in factors.entries.iter().enumerate() {
        let truths: Vec<Vec<f64>> = cases
            .iter()
            .map(|c| pixelate(&c.truth, entry.size).map(|f| field_to_f64(&f)))
            .collect::<Result<_>>()?;
        let clim_fields: Vec<Field> = train_truths
            .iter()
            .map(|t| pixelate(t, entry.size))
            .collect::<Result<_>>()?;
        let clim = build_climatology(&clim_fields)?;
        let baseline = ExplicitEnsembles {
            cases: cases
                .iter()
                .map(|c| {
                    c.baseline_members
                        .iter()
                        .map(|m| bilinear_resize(m, s, s).map(|f| field_to_f64(&f)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?,
        };
        let model_ens = ExplicitEnsembles {
            cases: (0..cases.len())
                .map(|ci| {
                    let ens = &model[ci * nf + fi];
                    if (ens.condition.alpha - entry.alpha).abs() > 1e-9 {
                        return Err(Error::Usage(format!(
                            "ensemble {} has alpha {}, factor entry wants {}",
                            ci * nf + fi,
                            ens.condition.alpha,
                            entry.alpha
                        )));
                    }
                    Ok(ens.members.iter().map(field_to_f64).collect())
                })
                .collect::<Result<_>>()?,
        };
        let part = evaluate_explicit(
            entry.size,
            &lead_days,
            &truths,
            model_ens,
            baseline,
            &clim,
            bins,
            s,
            s,
        )?;
        report.cells.extend(part.cells);
        report.maps.extend(part.maps);
    }
    Ok(report)
}

/// 8-bit binary portable graymap, min-max scaled over finite values; missing
/// pixels render black. The sidecar records the scaling.
fn write_pgm(path: &Path, map: &MapGrid) -> Result<()> {
    let finite: Vec<f64> = map.values.iter().cloned().filter(|v| v.is_finite()).collect();
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    for &v in &map.values {
        let byte = if v.is_finite() {
            (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        out.push(byte);
    }
    std::fs::write(path, out)?;
    let sidecar = path.with_extension("pgm.txt");
    std::fs::write(sidecar, format!("min={:.10}\nmax={:.10}\n", lo, hi))?;
    Ok(())
}

/// Emit report.csv plus one DSG1 grid and one graymap per spatial map.
pub fn write_report(dir: &Path, report: &MetricReport, bins: &BinScheme) -> Result<()> {
    std::fs::create_dir_all(dir.join("maps"))?;
    std::fs::write(dir.join("report.csv"), report.to_csv(bins))?;
    for entry in &report.maps {
        let stem = format!(
            "res{}_bin{}_{}_{}",
            entry.resolution,
            entry.bin + 1,
            entry.method.name(),
            entry.metric.name()
        );
        crate::synthdata::write_grid(
            &dir.join("maps").join(format!("{}.dsg1", stem)),
            &[entry.map.to_field()],
        )?;
        write_pgm(&dir.join("maps").join(format!("{}.pgm", stem)), &entry.map)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
