//! Image-quality metrics and dataset evaluation reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{save_png, Dataset, ImageTensor};
use crate::error::{Error, Result};
use crate::kernels::{blur_plane_valid, gaussian_taps};
use crate::losses::{SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
use crate::nets::{Domain, InferencePath, ModelBundle};
use crate::tensor::Tensor;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

fn same_shape(a: &ImageTensor, b: &ImageTensor, op: &'static str) -> Result<()> {
    a.tensor().ensure_same_shape(b.tensor(), op)
}

/// Peak signal-to-noise ratio in dB for peak 1.0, capped at [`PSNR_CAP`].
pub fn psnr(pred: &ImageTensor, gt: &ImageTensor) -> Result<f64> {
    same_shape(pred, gt, "psnr")?;
    let n = pred.values().len() as f64;
    let mse = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Mean SSIM of one plane with an 11x11 Gaussian window (sigma 1.5), valid positions only.
fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, taps: &[f64]) -> f64 {
    let k = taps.len();
    let n = (h - k + 1) * (w - k + 1);
    let blur = |x: &[f64]| {
        let mut out = vec![0.0; n];
        blur_plane_valid(x, h, w, taps, &mut out);
        out
    };
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (mu_a, mu_b) = (blur(a), blur(b));
    let (e_aa, e_bb, e_ab) = (blur(&prod(a, a)), blur(&prod(b, b)), blur(&prod(a, b)));
    let mut sum = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    sum / n as f64
}

/// Single-scale SSIM averaged over channels.
pub fn ssim(pred: &ImageTensor, gt: &ImageTensor) -> Result<f64> {
    same_shape(pred, gt, "ssim")?;
    let (h, w) = (pred.height(), pred.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "{h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let c = pred.channels();
    Ok((0..c)
        .map(|ch| ssim_plane(pred.plane(ch), gt.plane(ch), h, w, &taps))
        .sum::<f64>()
        / c as f64)
}

/// Mean per-pixel angle in degrees between RGB vectors of two `[1, 3, H, W]`
/// tensors. Values need not lie in `[0, 1]`; a zero vector counts as angle 0.
pub fn angular_error_raw(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    pred.ensure_same_shape(gt, "angular_error")?;
    if pred.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            actual: pred.channels(),
        });
    }
    if pred.batch() != 1 {
        return Err(Error::ShapeMismatch {
            op: "angular_error (single image)",
            left: pred.shape(),
            right: [1, 3, pred.height(), pred.width()],
        });
    }
    let hw = pred.height() * pred.width();
    let (p, g) = (pred.data(), gt.data());
    let mut sum = 0.0;
    for i in 0..hw {
        let pv = [p[i], p[hw + i], p[2 * hw + i]];
        let gv = [g[i], g[hw + i], g[2 * hw + i]];
        let dot: f64 = pv.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let cross = [
            pv[1] * gv[2] - pv[2] * gv[1],
            pv[2] * gv[0] - pv[0] * gv[2],
            pv[0] * gv[1] - pv[1] * gv[0],
        ];
        sum += cross.iter().map(|v| v * v).sum::<f64>().sqrt().atan2(dot);
    }
    Ok((sum / hw as f64).to_degrees())
}

/// Mean per-pixel angular error in degrees between two RGB images.
pub fn angular_error(pred: &ImageTensor, gt: &ImageTensor) -> Result<f64> {
    angular_error_raw(pred.tensor(), gt.tensor())
}

/// Anything that can run the inference paths.
pub trait PathPredictor {
    /// Applies `path` to a `[B, 1, H, W]` batch.
    fn predict(&self, path: InferencePath, x: &Tensor) -> Result<Tensor>;

    /// Identifies the model in reports.
    fn digest(&self) -> String;
}

impl PathPredictor for ModelBundle {
    fn predict(&self, path: InferencePath, x: &Tensor) -> Result<Tensor> {
        self.run_path(path, x)
    }

    fn digest(&self) -> String {
        ModelBundle::digest(self)
    }
}

/// Marker for a metric that is deliberately not computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Absent {
    Absent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
    /// Degrees; absent for single-channel outputs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ae: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub psnr: f64,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ae: Option<f64>,
}

impl Aggregate {
    pub fn of(records: &[ImageRecord]) -> Aggregate {
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&ImageRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        Aggregate {
            psnr: mean(&|r| r.psnr),
            ssim: mean(&|r| r.ssim),
            ae: records
                .iter()
                .all(|r| r.ae.is_some())
                .then(|| mean(&|r| r.ae.expect("checked"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub path: InferencePath,
    pub checkpoint_digest: String,
    pub records: Vec<ImageRecord>,
    pub aggregate: Aggregate,
    pub lpips: Absent,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine {
    Image(ImageRecord),
    Aggregate {
        dataset: String,
        path: InferencePath,
        checkpoint_digest: String,
        count: usize,
        #[serde(flatten)]
        aggregate: Aggregate,
        lpips: Absent,
    },
}

impl MetricsReport {
    /// One line per image followed by an aggregate footer.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out += &serde_json::to_string(&ReportLine::Image(r.clone())).expect("serializes");
            out.push('\n');
        }
        let footer = ReportLine::Aggregate {
            dataset: self.dataset.clone(),
            path: self.path,
            checkpoint_digest: self.checkpoint_digest.clone(),
            count: self.records.len(),
            aggregate: self.aggregate.clone(),
            lpips: Absent::Absent,
        };
        out += &serde_json::to_string(&footer).expect("serializes");
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let bad = |e: String| Error::InvalidConfig(format!("metrics report: {e}"));
        let mut records = Vec::new();
        let mut footer = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<ReportLine>(line).map_err(|e| bad(e.to_string()))? {
                ReportLine::Image(r) if footer.is_none() => records.push(r),
                ReportLine::Image(_) => return Err(bad("image record after footer".into())),
                ReportLine::Aggregate {
                    dataset,
                    path,
                    checkpoint_digest,
                    count,
                    aggregate,
                    lpips,
                } => {
                    if count != records.len() {
                        return Err(bad(format!(
                            "footer counts {count} records, found {}",
                            records.len()
                        )));
                    }
                    footer = Some((dataset, path, checkpoint_digest, aggregate, lpips));
                }
            }
        }
        let (dataset, path, checkpoint_digest, aggregate, lpips) =
            footer.ok_or_else(|| bad("missing footer".into()))?;
        Ok(MetricsReport {
            dataset,
            path,
            checkpoint_digest,
            records,
            aggregate,
            lpips,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Inputs, targets and ids for one path over a dataset.
pub struct PathSamples {
    pub ids: Vec<String>,
    pub inputs: Vec<ImageTensor>,
    pub targets: Vec<ImageTensor>,
}

/// Collects the evaluation pairs of `path`.
///
/// NIR-input paths use the paired samples with their RGB (or derived
/// grayscale for N2G). G2C and G2N2C use every grayscale-domain sample with
/// its RGB. G2N uses the grayscale of the paired samples with their NIR.
pub fn path_samples(data: &Dataset, path: InferencePath) -> Result<PathSamples> {
    let mut s = PathSamples {
        ids: Vec::new(),
        inputs: Vec::new(),
        targets: Vec::new(),
    };
    match path {
        InferencePath::N2C | InferencePath::N2G2C | InferencePath::N2G => {
            for p in &data.paired {
                s.ids.push(p.id().to_string());
                s.inputs.push(p.nir().clone());
                s.targets.push(
                    if path == InferencePath::N2G {
                        p.gray()
                    } else {
                        p.rgb()
                    }
                    .clone(),
                );
            }
        }
        InferencePath::G2C | InferencePath::G2N2C => {
            for g in data.gray_pool() {
                s.ids.push(g.id().to_string());
                s.inputs.push(g.gray().clone());
                s.targets.push(g.rgb().clone());
            }
        }
        InferencePath::G2N => {
            for p in &data.paired {
                s.ids.push(p.id().to_string());
                s.inputs.push(p.gray().clone());
                s.targets.push(p.nir().clone());
            }
        }
    }
    if s.ids.is_empty() {
        return Err(Error::Dataset(format!(
            "no samples with ground truth for {path}"
        )));
    }
    Ok(s)
}

const EVAL_BATCH: usize = 16;

/// Predictions for every sample of `s`, in order.
pub fn predict_all<P: PathPredictor + ?Sized>(
    predictor: &P,
    path: InferencePath,
    inputs: &[ImageTensor],
) -> Result<Vec<ImageTensor>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(EVAL_BATCH) {
        let x = Tensor::stack(&chunk.iter().map(ImageTensor::tensor).collect::<Vec<_>>())?;
        let y = predictor.predict(path, &x)?;
        out.extend(ImageTensor::unstack(&y)?);
    }
    Ok(out)
}

/// Runs `path` over `data` and scores every prediction.
pub fn evaluate<P: PathPredictor + ?Sized>(
    predictor: &P,
    data: &Dataset,
    path: InferencePath,
    dataset_tag: &str,
) -> Result<MetricsReport> {
    let s = path_samples(data, path)?;
    let preds = predict_all(predictor, path, &s.inputs)?;
    let rgb = path.output() == Domain::Rgb;
    let records = s
        .ids
        .iter()
        .zip(preds.iter().zip(&s.targets))
        .map(|(id, (p, t))| {
            Ok(ImageRecord {
                id: id.clone(),
                psnr: psnr(p, t)?,
                ssim: ssim(p, t)?,
                ae: if rgb {
                    Some(angular_error(p, t)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        dataset: dataset_tag.to_string(),
        path,
        checkpoint_digest: predictor.digest(),
        aggregate: Aggregate::of(&records),
        records,
        lpips: Absent::Absent,
    })
}

/// Stacks `input | prediction | ground truth` rows (as RGB) for up to `max_rows` samples.
pub fn preview_grid(
    inputs: &[ImageTensor],
    preds: &[ImageTensor],
    targets: &[ImageTensor],
    max_rows: usize,
) -> Result<ImageTensor> {
    let rows = inputs
        .len()
        .min(preds.len())
        .min(targets.len())
        .min(max_rows);
    if rows == 0 {
        return Err(Error::Dataset("nothing to preview".into()));
    }
    let (h, w) = (inputs[0].height(), inputs[0].width());
    let (gh, gw) = (rows * h, 3 * w);
    let mut out = vec![0.0; 3 * gh * gw];
    for r in 0..rows {
        for (col, img) in [&inputs[r], &preds[r], &targets[r]].into_iter().enumerate() {
            if img.height() != h || img.width() != w {
                return Err(Error::Dataset("preview images differ in size".into()));
            }
            let rgb = img.to_rgb();
            for c in 0..3 {
                let plane = rgb.plane(c);
                for y in 0..h {
                    let dst = c * gh * gw + (r * h + y) * gw + col * w;
                    out[dst..dst + w].copy_from_slice(&plane[y * w..(y + 1) * w]);
                }
            }
        }
    }
    ImageTensor::new(3, gh, gw, out)
}

/// Writes a preview grid of `path` over the first `max_rows` samples.
pub fn write_preview<P: PathPredictor + ?Sized>(
    predictor: &P,
    data: &Dataset,
    path: InferencePath,
    max_rows: usize,
    out: &Path,
) -> Result<()> {
    let s = path_samples(data, path)?;
    let n = s.inputs.len().min(max_rows);
    let preds = predict_all(predictor, path, &s.inputs[..n])?;
    save_png(
        &preview_grid(&s.inputs[..n], &preds, &s.targets[..n], max_rows)?,
        out,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(c: usize, v: f64) -> ImageTensor {
        ImageTensor::filled(c, 16, 16, v).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        assert_eq!(psnr(&img(3, 0.4), &img(3, 0.4)).unwrap(), PSNR_CAP);
        assert!((psnr(&img(3, 0.4), &img(3, 0.5)).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&img(3, 0.4), &img(1, 0.4)).is_err());
    }

    #[test]
    fn ssim_identity_and_size() {
        assert_eq!(ssim(&img(3, 0.3), &img(3, 0.3)).unwrap(), 1.0);
        let small = ImageTensor::filled(1, 10, 16, 0.2).unwrap();
        assert!(matches!(ssim(&small, &small), Err(Error::TooSmall(_))));
    }

    #[test]
    fn orthogonal_colors_are_ninety_degrees() {
        let red = ImageTensor::new(
            3,
            8,
            8,
            [vec![1.0; 64], vec![0.0; 64], vec![0.0; 64]].concat(),
        )
        .unwrap();
        let green = ImageTensor::new(
            3,
            8,
            8,
            [vec![0.0; 64], vec![1.0; 64], vec![0.0; 64]].concat(),
        )
        .unwrap();
        assert!((angular_error(&red, &green).unwrap() - 90.0).abs() < 1e-9);
        assert_eq!(angular_error(&red, &red).unwrap(), 0.0);
        assert!(angular_error(&img(1, 0.5), &img(1, 0.5)).is_err());
    }

    #[test]
    fn preview_layout() {
        let a = vec![img(1, 0.1)];
        let p = vec![img(3, 0.5)];
        let t = vec![img(3, 0.9)];
        let grid = preview_grid(&a, &p, &t, 4).unwrap();
        assert_eq!((grid.channels(), grid.height(), grid.width()), (3, 16, 48));
        assert_eq!(grid.plane(0)[0], 0.1);
        assert_eq!(grid.plane(1)[20], 0.5);
        assert_eq!(grid.plane(2)[40], 0.9);
    }
}
