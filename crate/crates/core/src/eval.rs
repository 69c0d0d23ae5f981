//! Quality reports and parameter sweeps over synthetic datasets.

use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Result, UdgError};
use crate::exec::Exec;
use crate::image::{Boundary, GradientPair, ImageGrid};
use crate::metrics::{anisotropy_ratio, psnr, ssim, SsimParams};
use crate::solver::{AngleUsed, UdgParams};
use crate::synth::RainPair;
use crate::tile::{derain_plane, Tiling};

/// Header of the per-cell sweep CSV.
pub const SWEEP_CSV_HEADER: [&str; 7] = [
    "id",
    "ratio",
    "angle_err_deg",
    "psnr_db",
    "ssim",
    "detail_tv",
    "residual_rain",
];

/// Formats a PSNR value, writing identical-image results as `inf`.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("nan")
    }
}

fn deserialize_db<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(_) => Ok(f64::NAN),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    /// Anisotropy ratio of the recovered rain layer in the upright frame,
    /// when one is available.
    pub anisotropy_rain: Option<f64>,
    /// Anisotropy ratio of the recovered clean layer.
    pub anisotropy_clean: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr_mean: f64,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr_median: f64,
    pub ssim_mean: f64,
    pub ssim_median: f64,
}

/// One (image, grid cell) result of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub id: String,
    pub ratio: f64,
    pub angle_err_deg: f64,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    /// `‖∇X‖₁` of the recovered clean layer (replicate boundary).
    pub detail_tv: f64,
    /// Fraction of the true rain still present in the clean layer:
    /// `⟨X − C, Y − C⟩ / ‖Y − C‖²`.
    pub residual_rain: f64,
}

/// Means over the dataset for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub ratio: f64,
    pub angle_err_deg: f64,
    pub images: usize,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub detail_tv: f64,
    pub residual_rain: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_image: Vec<ImageScore>,
    pub aggregates: Aggregates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_table: Option<Vec<SweepCell>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<SweepRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Writes the sweep rows as CSV (header only when there are none).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| UdgError::InvalidInput(format!("csv: {e}"));
        w.write_record(SWEEP_CSV_HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.id.clone(),
                format!("{}", r.ratio),
                format!("{}", r.angle_err_deg),
                format_db(r.psnr_db),
                format!("{:.6}", r.ssim),
                format!("{:.6}", r.detail_tv),
                format!("{:.6}", r.residual_rain),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| UdgError::InvalidInput(format!("csv: {e}")))?;
        Ok(())
    }

    /// Writes the per-image scores as CSV.
    pub fn write_scores_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| UdgError::InvalidInput(format!("csv: {e}"));
        w.write_record(["id", "psnr_db", "ssim", "anisotropy_rain", "anisotropy_clean"])
            .map_err(err)?;
        for s in &self.per_image {
            w.write_record([
                s.id.clone(),
                format_db(s.psnr_db),
                format!("{:.6}", s.ssim),
                s.anisotropy_rain.map_or(String::new(), |a| format!("{a:.6}")),
                format!("{:.6}", s.anisotropy_clean),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| UdgError::InvalidInput(format!("csv: {e}")))?;
        Ok(())
    }

    /// Human-readable per-image table followed by the aggregates.
    pub fn table(&self) -> String {
        let mut s = format!("{:<24} {:>10} {:>8} {:>10}\n", "id", "psnr_db", "ssim", "aniso_x");
        for p in &self.per_image {
            s += &format!(
                "{:<24} {:>10} {:>8.4} {:>10.3}\n",
                p.id,
                format_db(p.psnr_db),
                p.ssim,
                p.anisotropy_clean
            );
        }
        let a = &self.aggregates;
        s += &format!(
            "{:<24} {:>10} {:>8.4}\n{:<24} {:>10} {:>8.4}\n",
            "mean",
            format_db(a.psnr_mean),
            a.ssim_mean,
            "median",
            format_db(a.psnr_median),
            a.ssim_median
        );
        s
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn aggregate(scores: &[ImageScore]) -> Aggregates {
    if scores.is_empty() {
        return Aggregates::default();
    }
    let p: Vec<f64> = scores.iter().map(|s| s.psnr_db).collect();
    let q: Vec<f64> = scores.iter().map(|s| s.ssim).collect();
    Aggregates {
        count: scores.len(),
        psnr_mean: mean(&p),
        psnr_median: median(&p),
        ssim_mean: mean(&q),
        ssim_median: median(&q),
    }
}

/// Scores a prediction against ground truth.
pub fn score_image(id: &str, pred: &ImageGrid, gt: &ImageGrid) -> Result<ImageScore> {
    Ok(ImageScore {
        id: id.to_string(),
        psnr_db: psnr(pred, gt, 1.0)?,
        ssim: ssim(pred, gt, &SsimParams::default())?,
        anisotropy_rain: None,
        anisotropy_clean: anisotropy_ratio(pred)?,
    })
}

/// Report for already-computed predictions.
pub fn evaluate_pairs(items: &[(String, ImageGrid, ImageGrid)]) -> Result<EvalReport> {
    let per_image = items
        .iter()
        .map(|(id, pred, gt)| score_image(id, pred, gt))
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport {
        aggregates: aggregate(&per_image),
        per_image,
        ..EvalReport::default()
    };
    if items.is_empty() {
        report.warnings.push("no images to evaluate".to_string());
    }
    Ok(report)
}

/// Grid of `λ_along / λ_across` ratios and angle perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub ratios: Vec<f64>,
    pub angle_errors_deg: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            ratios: vec![1.5],
            angle_errors_deg: vec![0.0],
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(UdgError::param("grid.ratios", "need at least one finite ratio > 0"));
        }
        if self.angle_errors_deg.is_empty() || self.angle_errors_deg.iter().any(|a| !a.is_finite() || a.abs() > 45.0) {
            return Err(UdgError::param(
                "grid.angle_errors_deg",
                "need at least one finite error within ±45",
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.ratios
            .iter()
            .flat_map(|&r| self.angle_errors_deg.iter().map(move |&e| (r, e)))
            .collect()
    }
}

/// A named synthetic pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub id: String,
    pub pair: RainPair,
}

/// `‖∇X‖₁` with replicate boundary.
pub fn detail_tv(x: &ImageGrid) -> Result<f64> {
    Ok(GradientPair::of(x, Boundary::Replicate)?.l1())
}

/// Share of the true rain left in `x`: the projection of `x − clean` onto
/// `rainy − clean`, normalised. 0 when the input has no rain.
pub fn residual_rain(x: &ImageGrid, clean: &ImageGrid, rainy: &ImageGrid) -> Result<f64> {
    x.same_dims(clean)?;
    x.same_dims(rainy)?;
    let rain = rainy.sub(clean);
    let denom = rain.sq_norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(x.sub(clean).dot(&rain) / denom)
}

/// Derains every pair in every grid cell. The streak angle is the
/// generator's true angle plus the cell's perturbation; `λ_along` is set
/// from the cell ratio with `λ_across` from `params`. Cells that fail are
/// listed in `failures`; the rest are kept.
pub fn run_sweep(
    dataset: &[LabeledPair],
    params: &UdgParams,
    grid: &SweepGrid,
    tiling: Tiling,
    exec: Exec,
) -> Result<EvalReport> {
    params.validate()?;
    grid.validate()?;
    if dataset.is_empty() {
        return Ok(EvalReport {
            sweep_table: Some(Vec::new()),
            warnings: vec!["empty dataset: nothing to sweep".to_string()],
            ..EvalReport::default()
        });
    }
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..dataset.len()).map(move |d| (c, d)))
        .collect();
    let outcomes = exec.map(&jobs, |&(c, d)| -> Result<(SweepRow, ImageScore)> {
        let (ratio, err) = cells[c];
        let item = &dataset[d];
        let pair = &item.pair;
        let p = params.with_ratio(ratio);
        let used = AngleUsed::user(pair.spec.angle_degrees + err);
        let tiles = tiling.config_for(pair.rainy.height(), pair.rainy.width());
        let res = derain_plane(&pair.rainy, &p, used, tiles, Exec::Sequential)?;
        let id = format!("{}@ratio={ratio},err={err}", item.id);
        let psnr_db = psnr(&res.x, &pair.clean, 1.0)?;
        let ssim_v = ssim(&res.x, &pair.clean, &SsimParams::default())?;
        let row = SweepRow {
            id: item.id.clone(),
            ratio,
            angle_err_deg: err,
            psnr_db,
            ssim: ssim_v,
            detail_tv: detail_tv(&res.x)?,
            residual_rain: residual_rain(&res.x, &pair.clean, &pair.rainy)?,
        };
        let upright_rain = crate::rotate::rotate(&res.r, &crate::rotate::RotationSpec::new(used.angle_degrees))?;
        let score = ImageScore {
            id,
            psnr_db,
            ssim: ssim_v,
            anisotropy_rain: Some(anisotropy_ratio(&upright_rain.center_crop(0.7))?),
            anisotropy_clean: anisotropy_ratio(&res.x)?,
        };
        Ok((row, score))
    });

    let mut report = EvalReport::default();
    let mut table = Vec::with_capacity(cells.len());
    for (c, &(ratio, err)) in cells.iter().enumerate() {
        let mut cell_rows = Vec::new();
        for (k, outcome) in outcomes.iter().enumerate().filter(|(k, _)| jobs[*k].0 == c) {
            match outcome {
                Ok((row, score)) => {
                    cell_rows.push(row.clone());
                    report.per_image.push(score.clone());
                }
                Err(e) => report.failures.push(format!(
                    "{} ratio={ratio} err={err}: {e}",
                    dataset[jobs[k].1].id
                )),
            }
        }
        if !cell_rows.is_empty() {
            let col = |f: fn(&SweepRow) -> f64| mean(&cell_rows.iter().map(f).collect::<Vec<_>>());
            table.push(SweepCell {
                ratio,
                angle_err_deg: err,
                images: cell_rows.len(),
                psnr_db: col(|r| r.psnr_db),
                ssim: col(|r| r.ssim),
                detail_tv: col(|r| r.detail_tv),
                residual_rain: col(|r| r.residual_rain),
            });
        }
        report.rows.extend(cell_rows);
    }
    report.aggregates = aggregate(&report.per_image);
    report.sweep_table = Some(table);
    Ok(report)
}
