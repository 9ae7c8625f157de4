//! Full-reference image quality metrics and dataset evaluation reports.
//!
//! All metrics are pure functions over grayscale `Matrix` planes in `[0, 1]`
//! (FSIM rescales to `[0, 255]` internally). Dataset evaluation converts RGB
//! tensors via BT.601 luma with a border crop by default, or averages the
//! metric over the three channels in RGB mode.

pub mod fsim;

pub use fsim::fsim;

use crate::data;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::tensor::Tensor;
use std::fmt::Write as _;
use std::path::Path;

/// Sentinel PSNR for zero MSE.
pub const PSNR_CAP: f64 = 99.0;

fn check_same_shape(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.h() != b.h() || a.w() != b.w() {
        return Err(Error::dimension(format!(
            "{what}: {}×{} vs {}×{}",
            a.h(),
            a.w(),
            b.h(),
            b.w()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB: `10·log10(range²/MSE)`, or the 99.0 dB
/// cap when the images are identical.
pub fn psnr(a: &Matrix, b: &Matrix, data_range: f64) -> Result<f64> {
    check_same_shape(a, b, "psnr")?;
    if !(data_range > 0.0) {
        return Err(Error::config(format!(
            "psnr data_range must be positive, got {data_range}"
        )));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

/// The 11×11 Gaussian SSIM window (σ = 1.5), normalized to sum 1.
fn ssim_window() -> [f64; 121] {
    let sigma = 1.5f64;
    let mut w = [0.0; 121];
    let mut total = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            let dy = i as f64 - 5.0;
            let dx = j as f64 - 5.0;
            let g = (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
            w[i * 11 + j] = g;
            total += g;
        }
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Structural similarity: Gaussian-weighted moments over every valid 11×11
/// window position, averaged.
pub fn ssim(a: &Matrix, b: &Matrix, data_range: f64) -> Result<f64> {
    check_same_shape(a, b, "ssim")?;
    let (h, w) = (a.h(), a.w());
    if h < 11 || w < 11 {
        return Err(Error::dimension(format!(
            "ssim needs extents of at least 11, got {h}×{w}"
        )));
    }
    let c1 = (0.01 * data_range) * (0.01 * data_range);
    let c2 = (0.03 * data_range) * (0.03 * data_range);
    let win = ssim_window();
    let (oh, ow) = (h - 10, w - 10);
    let (ad, bd) = (a.data(), b.data());
    // Window rows are independent; sum per row, then reduce rows in order.
    let row_sums = par::map_indexed(oh, |ty| {
        let mut acc = 0.0;
        for tx in 0..ow {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                let row = (ty + i) * w + tx;
                for j in 0..11 {
                    let g = win[i * 11 + j];
                    let x = ad[row + j];
                    let y = bd[row + j];
                    ma += g * x;
                    mb += g * y;
                    saa += g * x * x;
                    sbb += g * y * y;
                    // Grouped so the result is bit-identical under a↔b swap.
                    sab += g * (x * y);
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        acc
    });
    Ok(row_sums.iter().sum::<f64>() / (oh * ow) as f64)
}

/// Universal image quality index over 8×8 sliding windows (stride 1):
/// `Q = 4·σ_ab·ā·b̄ / ((σ_a²+σ_b²)(ā²+b̄²))` averaged. Zero-denominator
/// windows contribute 1 when the two windows are identical, otherwise they
/// are skipped.
pub fn uiq(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_shape(a, b, "uiq")?;
    let (h, w) = (a.h(), a.w());
    if h < 8 || w < 8 {
        return Err(Error::dimension(format!(
            "uiq needs extents of at least 8, got {h}×{w}"
        )));
    }
    let (oh, ow) = (h - 7, w - 7);
    let (ad, bd) = (a.data(), b.data());
    let n = 64.0;
    // (sum of Q, contributing-window count) per window row.
    let rows = par::map_indexed(oh, |ty| {
        let mut acc = 0.0;
        let mut count = 0u64;
        for tx in 0..ow {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let (fa, fb) = (ad[ty * w + tx], bd[ty * w + tx]);
            let mut identical = true;
            // Constant windows are detected by value: the computed variance of
            // a constant window carries rounding residue and is not exactly 0.
            let mut constant = true;
            for i in 0..8 {
                let row = (ty + i) * w + tx;
                for j in 0..8 {
                    let x = ad[row + j];
                    let y = bd[row + j];
                    identical &= x == y;
                    constant &= x == fa && y == fb;
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            let denom = (va + vb) * (ma * ma + mb * mb);
            if constant || denom == 0.0 {
                if identical {
                    acc += 1.0;
                    count += 1;
                }
            } else {
                // Grouped so the result is bit-identical under a↔b swap.
                acc += 4.0 * cov * (ma * mb) / denom;
                count += 1;
            }
        }
        (acc, count)
    });
    let total: f64 = rows.iter().map(|(q, _)| q).sum();
    let count: u64 = rows.iter().map(|(_, c)| c).sum();
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Neighbor offsets clockwise from the top-left; bit `k` of the LBP code
/// corresponds to neighbor `k`.
const LBP_NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// 256-bin local-binary-pattern histogram over interior pixels: bit `k` is
/// set when neighbor `k` ≥ center (ties count).
pub fn lbp_histogram(m: &Matrix) -> Result<Vec<f64>> {
    let (h, w) = (m.h(), m.w());
    if h < 3 || w < 3 {
        return Err(Error::dimension(format!(
            "lbp_histogram needs extents of at least 3, got {h}×{w}"
        )));
    }
    let mut hist = vec![0.0; 256];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let center = m.at(y, x);
            let mut code = 0usize;
            for (k, (dy, dx)) in LBP_NEIGHBORS.iter().enumerate() {
                let v = m.at((y as isize + dy) as usize, (x as isize + dx) as usize);
                if v >= center {
                    code |= 1 << k;
                }
            }
            hist[code] += 1.0;
        }
    }
    Ok(hist)
}

/// Chi-square distance between histograms, normalized to unit mass first:
/// `Σ (p−q)² / (p+q+1e-10)`.
pub fn lbp_distance(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::dimension(format!(
            "lbp_distance: {} bins vs {}",
            h1.len(),
            h2.len()
        )));
    }
    let normalize = |h: &[f64]| -> Vec<f64> {
        let total: f64 = h.iter().sum();
        if total == 0.0 {
            return h.to_vec();
        }
        h.iter().map(|v| v / total).collect()
    };
    let (p, q) = (normalize(h1), normalize(h2));
    Ok(p.iter()
        .zip(&q)
        .map(|(x, y)| (x - y) * (x - y) / (x + y + 1e-10))
        .sum())
}

// ---------------------------------------------------------------------------
// Pair and dataset evaluation
// ---------------------------------------------------------------------------

/// How color images are reduced to metric inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// BT.601 luma with a border crop (the conventional SR protocol).
    Y,
    /// Full image, metric averaged over the three channels, no crop.
    Rgb,
}

impl ColorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ColorMode::Y => "y",
            ColorMode::Rgb => "rgb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "y" => Ok(ColorMode::Y),
            "rgb" => Ok(ColorMode::Rgb),
            other => Err(Error::config(format!(
                "unknown color mode {other:?}: use \"y\" or \"rgb\""
            ))),
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub mode: ColorMode,
    /// Pixels cropped from each side in Y mode (the scale factor, 4).
    pub border: usize,
    pub data_range: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: ColorMode::Y,
            border: 4,
            data_range: 1.0,
        }
    }
}

/// The five metric values for one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValues {
    pub psnr: f64,
    pub ssim: f64,
    pub fsim: f64,
    pub uiq: f64,
    pub lbp_chi2: f64,
}

/// One report row: an image id plus its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub id: String,
    pub values: MetricValues,
}

/// Dataset evaluation result: per-image rows (sorted by id) plus their
/// arithmetic mean, echoing the evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub mean: MetricValues,
    pub config: EvalConfig,
}

/// BT.601 luma plane of image `n`: `0.299·R + 0.587·G + 0.114·B`.
pub fn luma(t: &Tensor, n: usize) -> Result<Matrix> {
    let [batch, c, h, w] = t.shape();
    if c != 3 || n >= batch {
        return Err(Error::dimension(format!(
            "luma needs a 3-channel image at index {n}, tensor is {:?}",
            t.shape()
        )));
    }
    let data = t.data();
    let plane = h * w;
    let base = n * 3 * plane;
    let mut m = Matrix::zeros(h, w);
    for i in 0..plane {
        m.data_mut()[i] = 0.299 * data[base + i]
            + 0.587 * data[base + plane + i]
            + 0.114 * data[base + 2 * plane + i];
    }
    Ok(m)
}

fn crop_border(m: &Matrix, border: usize) -> Result<Matrix> {
    if border == 0 {
        return Ok(m.clone());
    }
    let (h, w) = (m.h(), m.w());
    if h <= 2 * border || w <= 2 * border {
        return Err(Error::dimension(format!(
            "cannot crop {border}px border from a {h}×{w} image"
        )));
    }
    Ok(Matrix::from_fn(h - 2 * border, w - 2 * border, |y, x| {
        m.at(y + border, x + border)
    }))
}

fn plane_metrics(a: &Matrix, b: &Matrix, data_range: f64) -> Result<MetricValues> {
    Ok(MetricValues {
        psnr: psnr(a, b, data_range)?,
        ssim: ssim(a, b, data_range)?,
        fsim: fsim(a, b)?,
        uiq: uiq(a, b)?,
        lbp_chi2: lbp_distance(&lbp_histogram(a)?, &lbp_histogram(b)?)?,
    })
}

/// Evaluates one SR/HR pair of `[1, 3, H, W]` tensors.
pub fn evaluate_pair(sr: &Tensor, hr: &Tensor, config: &EvalConfig) -> Result<MetricValues> {
    if sr.shape() != hr.shape() {
        return Err(Error::dimension(format!(
            "evaluate_pair: sr shape {:?} vs hr shape {:?}",
            sr.shape(),
            hr.shape()
        )));
    }
    match config.mode {
        ColorMode::Y => {
            let a = crop_border(&luma(sr, 0)?, config.border)?;
            let b = crop_border(&luma(hr, 0)?, config.border)?;
            plane_metrics(&a, &b, config.data_range)
        }
        ColorMode::Rgb => {
            let mut sum = MetricValues {
                psnr: 0.0,
                ssim: 0.0,
                fsim: 0.0,
                uiq: 0.0,
                lbp_chi2: 0.0,
            };
            for c in 0..3 {
                let a = Matrix::from_tensor_channel(sr, 0, c);
                let b = Matrix::from_tensor_channel(hr, 0, c);
                let v = plane_metrics(&a, &b, config.data_range)?;
                sum.psnr += v.psnr;
                sum.ssim += v.ssim;
                sum.fsim += v.fsim;
                sum.uiq += v.uiq;
                sum.lbp_chi2 += v.lbp_chi2;
            }
            Ok(MetricValues {
                psnr: sum.psnr / 3.0,
                ssim: sum.ssim / 3.0,
                fsim: sum.fsim / 3.0,
                uiq: sum.uiq / 3.0,
                lbp_chi2: sum.lbp_chi2 / 3.0,
            })
        }
    }
}

/// Evaluates every image in `sr_dir` against its same-named counterpart in
/// `hr_dir`. Rows come back sorted by filename; the mean row is their
/// arithmetic mean.
pub fn evaluate_dataset(sr_dir: &Path, hr_dir: &Path, config: &EvalConfig) -> Result<MetricReport> {
    let entries =
        std::fs::read_dir(sr_dir).map_err(|e| Error::file(sr_dir, format!("cannot list: {e}")))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::file(sr_dir, format!("cannot list: {e}")))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        if matches!(ext.as_str(), "png" | "ppm") {
            names.push(
                path.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            );
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::config(format!(
            "{} contains no .png or .ppm images",
            sr_dir.display()
        )));
    }
    // Pair evaluation is independent per image; rows keep filename order.
    let results: Vec<Result<MetricRow>> = par::map_indexed(names.len(), |i| {
        let name = &names[i];
        let sr_path = sr_dir.join(name);
        let hr_path = hr_dir.join(name);
        if !hr_path.exists() {
            return Err(Error::file(
                &hr_path,
                format!("missing counterpart for {name:?}"),
            ));
        }
        let sr = data::load_image(&sr_path)?.to_tensor();
        let hr = data::load_image(&hr_path)?.to_tensor();
        Ok(MetricRow {
            id: name.clone(),
            values: evaluate_pair(&sr, &hr, config)?,
        })
    });
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    let n = rows.len() as f64;
    let mean = MetricValues {
        psnr: rows.iter().map(|r| r.values.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.values.ssim).sum::<f64>() / n,
        fsim: rows.iter().map(|r| r.values.fsim).sum::<f64>() / n,
        uiq: rows.iter().map(|r| r.values.uiq).sum::<f64>() / n,
        lbp_chi2: rows.iter().map(|r| r.values.lbp_chi2).sum::<f64>() / n,
    };
    Ok(MetricReport {
        rows,
        mean,
        config: *config,
    })
}

impl MetricReport {
    /// CSV with the per-image rows followed by the aggregate `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,psnr,ssim,fsim,uiq,lbp_chi2\n");
        let mut push = |id: &str, v: &MetricValues| {
            writeln!(
                out,
                "{id},{},{},{},{},{}",
                v.psnr, v.ssim, v.fsim, v.uiq, v.lbp_chi2
            )
            .unwrap();
        };
        for row in &self.rows {
            push(&row.id, &row.values);
        }
        push("mean", &self.mean);
        out
    }

    /// Fixed-width human-readable table with a settings echo.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "mode={} border={} range={}\n{:<24} {:>8} {:>8} {:>8} {:>8} {:>9}\n",
            self.config.mode.as_str(),
            self.config.border,
            self.config.data_range,
            "id",
            "psnr",
            "ssim",
            "fsim",
            "uiq",
            "lbp_chi2"
        );
        let mut push = |id: &str, v: &MetricValues| {
            writeln!(
                out,
                "{id:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9.6}",
                v.psnr, v.ssim, v.fsim, v.uiq, v.lbp_chi2
            )
            .unwrap();
        };
        for row in &self.rows {
            push(&row.id, &row.values);
        }
        push("mean", &self.mean);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A deterministic "natural" texture: smooth gradients plus edges and
    /// oscillation, values inside [0, 1].
    pub(crate) fn natural(h: usize, w: usize) -> Matrix {
        Matrix::from_fn(h, w, |y, x| {
            let fy = y as f64 / h as f64;
            let fx = x as f64 / w as f64;
            let wave = ((x as f64 * 0.7).sin() + (y as f64 * 0.4).cos()) * 0.15;
            let blob = (-((fy - 0.4).powi(2) + (fx - 0.6).powi(2)) * 18.0).exp() * 0.3;
            let edge = if fx > 0.5 { 0.2 } else { 0.0 };
            (0.35 + 0.25 * fy + wave + blob + edge).clamp(0.0, 1.0)
        })
    }

    fn noise_matrix(h: usize, w: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
    }

    fn gauss_field(h: usize, w: usize, seed: u64) -> Matrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(h, w, |_, _| StandardNormal.sample(&mut rng))
    }

    // --- PSNR ---------------------------------------------------------------

    #[test]
    fn psnr_identical_hits_the_cap() {
        let a = natural(16, 16);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), 99.0);
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Matrix::filled(8, 8, 0.3);
        let b = Matrix::filled(8, 8, 0.4);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let c = Matrix::filled(8, 8, 0.31);
        assert!((psnr(&a, &c, 1.0).unwrap() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_rejects_shape_mismatch() {
        let a = Matrix::zeros(4, 4);
        let b = Matrix::zeros(4, 5);
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    // --- SSIM ---------------------------------------------------------------

    #[test]
    fn ssim_identical_is_one() {
        let a = natural(24, 20);
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_images_match_closed_form() {
        let a = Matrix::filled(16, 16, 0.5);
        let b = Matrix::filled(16, 16, 0.25);
        let want = (2.0 * 0.125 + 1e-4) / (0.3125 + 1e-4);
        let got = ssim(&a, &b, 1.0).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = noise_matrix(20, 20, 1);
        let b = noise_matrix(20, 20, 2);
        let ab = ssim(&a, &b, 1.0).unwrap();
        let ba = ssim(&b, &a, 1.0).unwrap();
        assert_eq!(ab, ba);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_rejects_undersized_images() {
        let a = Matrix::zeros(10, 11);
        let err = ssim(&a, &a, 1.0).unwrap_err();
        assert!(err.to_string().contains("11"), "{err}");
    }

    // --- UIQ ----------------------------------------------------------------

    #[test]
    fn uiq_identical_is_one() {
        let a = natural(16, 16);
        assert!((uiq(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        // Identical constants hit the zero-denominator rule.
        let c = Matrix::filled(8, 8, 0.7);
        assert_eq!(uiq(&c, &c).unwrap(), 1.0);
    }

    #[test]
    fn uiq_checkerboard_inversion_matches_single_window_oracle() {
        let a = Matrix::from_fn(8, 8, |y, x| ((y + x) % 2) as f64);
        let b = Matrix::from_fn(8, 8, |y, x| 1.0 - ((y + x) % 2) as f64);
        // Direct evaluation of the one 8×8 window.
        let n = 64.0;
        let (sa, sb): (f64, f64) = (a.data().iter().sum(), b.data().iter().sum());
        let (ma, mb) = (sa / n, sb / n);
        let va = a.data().iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / n;
        let vb = b.data().iter().map(|y| (y - mb) * (y - mb)).sum::<f64>() / n;
        let cov = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / n;
        let want = 4.0 * cov * ma * mb / ((va + vb) * (ma * ma + mb * mb));
        let got = uiq(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!((got - -1.0).abs() < 1e-12, "inverted checkerboard: {got}");
    }

    #[test]
    fn uiq_penalizes_luminance_shift() {
        let a = natural(16, 16);
        let b = Matrix::from_fn(16, 16, |y, x| a.at(y, x) + 0.5);
        let q = uiq(&a, &b).unwrap();
        assert!(q > 0.0 && q < 1.0, "{q}");
    }

    #[test]
    fn uiq_skips_unmatched_constant_windows() {
        let a = Matrix::filled(8, 8, 0.2);
        let b = Matrix::filled(8, 8, 0.9);
        assert_eq!(uiq(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn uiq_rejects_undersized_images() {
        let a = Matrix::zeros(7, 9);
        assert!(uiq(&a, &a).is_err());
    }

    // --- LBP ----------------------------------------------------------------

    #[test]
    fn lbp_constant_image_is_all_255() {
        let m = Matrix::filled(5, 7, 0.5);
        let h = lbp_histogram(&m).unwrap();
        assert_eq!(h[255], 15.0);
        assert_eq!(h.iter().sum::<f64>(), 15.0);
    }

    #[test]
    fn lbp_peak_center_is_code_zero() {
        let mut m = Matrix::zeros(3, 3);
        *m.at_mut(1, 1) = 5.0;
        let h = lbp_histogram(&m).unwrap();
        assert_eq!(h[0], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn lbp_bit_order_is_clockwise_from_top_left() {
        // Neighbors 9,1,9,1,9,1,9,1 clockwise from the top-left around a
        // center of 5: bits 0,2,4,6 set → code 85.
        let m = Matrix::from_vec(3, 3, vec![9.0, 1.0, 9.0, 1.0, 5.0, 1.0, 9.0, 1.0, 9.0]).unwrap();
        let h = lbp_histogram(&m).unwrap();
        assert_eq!(h[85], 1.0);
    }

    #[test]
    fn lbp_total_equals_interior_count() {
        let m = noise_matrix(20, 17, 3);
        let h = lbp_histogram(&m).unwrap();
        assert_eq!(h.iter().sum::<f64>(), (18 * 15) as f64);
        let err = lbp_histogram(&Matrix::zeros(2, 5)).unwrap_err();
        assert!(err.to_string().contains("3"), "{err}");
    }

    #[test]
    fn lbp_distance_properties() {
        let a = natural(12, 12);
        let b = noise_matrix(12, 12, 4);
        let ha = lbp_histogram(&a).unwrap();
        let hb = lbp_histogram(&b).unwrap();
        assert_eq!(lbp_distance(&ha, &ha).unwrap(), 0.0);
        assert_eq!(
            lbp_distance(&ha, &hb).unwrap(),
            lbp_distance(&hb, &ha).unwrap()
        );
        let mut one_a = vec![0.0; 256];
        let mut one_b = vec![0.0; 256];
        one_a[3] = 7.0;
        one_b[9] = 2.0;
        let d = lbp_distance(&one_a, &one_b).unwrap();
        assert!((d - 2.0).abs() < 1e-9, "{d}");
        assert!(lbp_distance(&one_a, &one_b[..100]).is_err());
    }

    // --- cross-metric properties ---------------------------------------------

    #[test]
    fn gaussian_noise_degrades_psnr_and_ssim_monotonically() {
        let a = natural(48, 48);
        let field = gauss_field(48, 48, 5);
        let noisy = |sigma: f64| {
            Matrix::from_fn(48, 48, |y, x| a.at(y, x) + sigma * field.at(y, x))
        };
        let mut last_psnr = f64::INFINITY;
        let mut last_ssim = f64::INFINITY;
        for sigma in [0.01, 0.05, 0.1] {
            let b = noisy(sigma);
            let p = psnr(&a, &b, 1.0).unwrap();
            let s = ssim(&a, &b, 1.0).unwrap();
            assert!(p < last_psnr, "psnr not decreasing at sigma {sigma}");
            assert!(s < last_ssim, "ssim not decreasing at sigma {sigma}");
            last_psnr = p;
            last_ssim = s;
        }
    }

    // --- evaluation ----------------------------------------------------------

    fn natural_tensor(h: usize, w: usize) -> Tensor {
        let mut t = Tensor::zeros([1, 3, h, w]);
        let base = natural(h, w);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    *t.at_mut(0, c, y, x) = (base.at(y, x) * (1.0 - 0.1 * c as f64)).clamp(0.0, 1.0);
                }
            }
        }
        t
    }

    #[test]
    fn identical_pair_maxes_every_metric() {
        let t = natural_tensor(48, 48);
        let v = evaluate_pair(&t, &t, &EvalConfig::default()).unwrap();
        assert_eq!(v.psnr, 99.0);
        assert!((v.ssim - 1.0).abs() < 1e-9);
        assert!((v.fsim - 1.0).abs() < 1e-9);
        assert!((v.uiq - 1.0).abs() < 1e-9);
        assert_eq!(v.lbp_chi2, 0.0);
    }

    #[test]
    fn rgb_and_y_modes_differ_on_color_images() {
        let a = natural_tensor(48, 48);
        let mut b = a.clone();
        // Perturb only the blue channel: Y mode damps it by 0.114.
        for y in 0..48 {
            for x in 0..48 {
                *b.at_mut(0, 2, y, x) = (b.at(0, 2, y, x) + 0.1).min(1.0);
            }
        }
        let y_mode = evaluate_pair(&a, &b, &EvalConfig::default()).unwrap();
        let rgb_mode = evaluate_pair(
            &a,
            &b,
            &EvalConfig {
                mode: ColorMode::Rgb,
                ..EvalConfig::default()
            },
        )
        .unwrap();
        assert!((y_mode.psnr - rgb_mode.psnr).abs() > 0.5);
    }

    #[test]
    fn dataset_report_aggregates_and_orders() {
        let dir = std::env::temp_dir().join(format!("wsr-eval-{}", std::process::id()));
        let sr_dir = dir.join("sr");
        let hr_dir = dir.join("hr");
        std::fs::create_dir_all(&sr_dir).unwrap();
        std::fs::create_dir_all(&hr_dir).unwrap();

        let clean = natural_tensor(48, 48);
        let mut noisy = clean.clone();
        for (i, v) in noisy.data_mut().iter_mut().enumerate() {
            *v = (*v + if i % 7 == 0 { 0.05 } else { 0.0 }).min(1.0);
        }
        let img_clean = crate::data::ImageBuffer::from_tensor(&clean, 0).unwrap();
        let img_noisy = crate::data::ImageBuffer::from_tensor(&noisy, 0).unwrap();
        // b_pair: identical; a_pair: degraded (names chosen to check sorting).
        crate::data::save_image(&sr_dir.join("b_pair.ppm"), &img_clean).unwrap();
        crate::data::save_image(&hr_dir.join("b_pair.ppm"), &img_clean).unwrap();
        crate::data::save_image(&sr_dir.join("a_pair.ppm"), &img_noisy).unwrap();
        crate::data::save_image(&hr_dir.join("a_pair.ppm"), &img_clean).unwrap();

        let report = evaluate_dataset(&sr_dir, &hr_dir, &EvalConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].id, "a_pair.ppm");
        assert_eq!(report.rows[1].id, "b_pair.ppm");
        assert_eq!(report.rows[1].values.psnr, 99.0);
        let mean_psnr = (report.rows[0].values.psnr + report.rows[1].values.psnr) / 2.0;
        assert!((report.mean.psnr - mean_psnr).abs() < 1e-12);

        let csv = report.to_csv();
        assert!(csv.starts_with("id,psnr,ssim,fsim,uiq,lbp_chi2\n"), "{csv}");
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("mean,"), "{csv}");
        let table = report.to_table();
        assert!(table.contains("mode=y border=4"), "{table}");

        // Missing counterpart names the file.
        std::fs::remove_file(hr_dir.join("a_pair.ppm")).unwrap();
        let err = evaluate_dataset(&sr_dir, &hr_dir, &EvalConfig::default()).unwrap_err();
        assert!(err.to_string().contains("a_pair.ppm"), "{err}");
    }

    #[test]
    fn luma_uses_bt601_weights() {
        let mut t = Tensor::zeros([1, 3, 4, 4]);
        *t.at_mut(0, 0, 0, 0) = 1.0;
        *t.at_mut(0, 1, 0, 1) = 1.0;
        *t.at_mut(0, 2, 0, 2) = 1.0;
        let y = luma(&t, 0).unwrap();
        assert!((y.at(0, 0) - 0.299).abs() < 1e-12);
        assert!((y.at(0, 1) - 0.587).abs() < 1e-12);
        assert!((y.at(0, 2) - 0.114).abs() < 1e-12);
    }
}
