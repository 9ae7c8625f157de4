//! Feature similarity index (luminance-only).
//!
//! Follows the classic construction: per-pixel phase congruency from a
//! log-Gabor filter bank (4 scales × 4 orientations, with Rayleigh noise
//! thresholding), gradient magnitude from Scharr kernels, and the two
//! similarity maps pooled by the per-pixel maximum phase congruency:
//!
//! `FSIM = Σ S_pc·S_g·PCm / Σ PCm`, `S_x = (2ab+T)/(a²+b²+T)`,
//! with `T1 = 0.85` (phase congruency) and `T2 = 160` (gradients on a
//! `[0, 255]` luminance scale).

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const NSCALE: usize = 4;
const NORIENT: usize = 4;
const MIN_WAVELENGTH: f64 = 6.0;
const MULT: f64 = 2.0;
const SIGMA_ONF: f64 = 0.55;
const D_THETA_ON_SIGMA: f64 = 1.2;
/// Noise-threshold multiplier on the estimated noise energy spread.
const NOISE_K: f64 = 2.0;
const EPSILON: f64 = 1e-4;
const T1: f64 = 0.85;
const T2: f64 = 160.0;

/// Normalized signed frequency of FFT bin `k` (unshifted layout, even/odd
/// conventions matching the usual shifted-meshgrid construction).
fn bin_freq(k: usize, n: usize) -> f64 {
    if n % 2 == 0 {
        if k < n / 2 {
            k as f64 / n as f64
        } else {
            (k as f64 - n as f64) / n as f64
        }
    } else if k <= (n - 1) / 2 {
        k as f64 / (n - 1) as f64
    } else {
        (k as f64 - n as f64) / (n - 1) as f64
    }
}

fn transpose(src: &[Complex<f64>], h: usize, w: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); src.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

/// In-place 2-D FFT (rows then columns). The inverse carries the `1/(h·w)`
/// normalization.
fn fft2(buf: &mut Vec<Complex<f64>>, h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    row.process(buf);
    let mut t = transpose(buf, h, w);
    let col = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    col.process(&mut t);
    *buf = transpose(&t, w, h);
    if inverse {
        let scale = 1.0 / (h * w) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// The image-independent part of the phase-congruency computation for one
/// image size: frequency-domain filters plus the noise-model sums derived
/// from their spatial forms.
struct PcFilters {
    h: usize,
    w: usize,
    /// `[orientation][scale]` frequency-domain filters.
    filters: Vec<Vec<Vec<f64>>>,
    /// Per orientation: `Σ filter₀²` (scale-0 filter energy).
    em_n: Vec<f64>,
    /// Per orientation: `ΣΣ Σ_s ifft(filter_s)²·(h·w)`.
    sum_an2: Vec<f64>,
    /// Per orientation: `ΣΣ Σ_{i<j} ifft(filter_i)·ifft(filter_j)·(h·w)`.
    sum_ai_aj: Vec<f64>,
}

impl PcFilters {
    fn new(h: usize, w: usize) -> Self {
        let hw = h * w;
        // Frequency grid: radius (DC forced to 1) and polar angle.
        let mut radius = vec![0.0; hw];
        let mut theta = vec![0.0; hw];
        for y in 0..h {
            let fy = bin_freq(y, h);
            for x in 0..w {
                let fx = bin_freq(x, w);
                radius[y * w + x] = (fx * fx + fy * fy).sqrt();
                theta[y * w + x] = (-fy).atan2(fx);
            }
        }
        radius[0] = 1.0;

        // Butterworth low-pass (cutoff 0.45, order 15) caps the radial tail.
        let lowpass: Vec<f64> = (0..hw)
            .map(|i| {
                let r = if i == 0 { 0.0 } else { radius[i] };
                1.0 / (1.0 + (r / 0.45).powi(30))
            })
            .collect();

        // Radial log-Gabor components, one per scale.
        let log_sigma = SIGMA_ONF.ln();
        let radial: Vec<Vec<f64>> = (0..NSCALE)
            .map(|s| {
                let f0 = 1.0 / (MIN_WAVELENGTH * MULT.powi(s as i32));
                let mut g: Vec<f64> = (0..hw)
                    .map(|i| {
                        let v = (radius[i] / f0).ln();
                        (-(v * v) / (2.0 * log_sigma * log_sigma)).exp() * lowpass[i]
                    })
                    .collect();
                g[0] = 0.0;
                g
            })
            .collect();

        // Angular spread per orientation.
        let theta_sigma = std::f64::consts::PI / NORIENT as f64 / D_THETA_ON_SIGMA;
        let mut filters = Vec::with_capacity(NORIENT);
        let mut em_n = Vec::with_capacity(NORIENT);
        let mut sum_an2 = Vec::with_capacity(NORIENT);
        let mut sum_ai_aj = Vec::with_capacity(NORIENT);
        for o in 0..NORIENT {
            let angle = o as f64 * std::f64::consts::PI / NORIENT as f64;
            let (sin_a, cos_a) = angle.sin_cos();
            let spread: Vec<f64> = (0..hw)
                .map(|i| {
                    let (sin_t, cos_t) = theta[i].sin_cos();
                    let ds = sin_t * cos_a - cos_t * sin_a;
                    let dc = cos_t * cos_a + sin_t * sin_a;
                    let dt = ds.atan2(dc).abs();
                    (-(dt * dt) / (2.0 * theta_sigma * theta_sigma)).exp()
                })
                .collect();

            let per_scale: Vec<Vec<f64>> = radial
                .iter()
                .map(|r| (0..hw).map(|i| r[i] * spread[i]).collect())
                .collect();

            // Spatial filters for the noise model: real(ifft2(filter))·√(hw).
            let scale_norm = (hw as f64).sqrt();
            let spatial: Vec<Vec<f64>> = per_scale
                .iter()
                .map(|f| {
                    let mut buf: Vec<Complex<f64>> =
                        f.iter().map(|&v| Complex::new(v, 0.0)).collect();
                    fft2(&mut buf, h, w, true);
                    buf.iter().map(|c| c.re * scale_norm).collect()
                })
                .collect();

            em_n.push(per_scale[0].iter().map(|v| v * v).sum());
            let mut an2 = 0.0;
            let mut ai_aj = 0.0;
            for i in 0..hw {
                for s in 0..NSCALE {
                    an2 += spatial[s][i] * spatial[s][i];
                    for t in s + 1..NSCALE {
                        ai_aj += spatial[s][i] * spatial[t][i];
                    }
                }
            }
            sum_an2.push(an2);
            sum_ai_aj.push(ai_aj);
            filters.push(per_scale);
        }
        PcFilters {
            h,
            w,
            filters,
            em_n,
            sum_an2,
            sum_ai_aj,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Phase congruency map of a grayscale image, accumulated over orientations
/// with per-orientation Rayleigh noise thresholds.
fn phase_congruency(im: &Matrix, pf: &PcFilters) -> Matrix {
    let (h, w) = (pf.h, pf.w);
    let hw = h * w;
    let mut imfft: Vec<Complex<f64>> = im.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut imfft, h, w, false);

    let mut energy_all = vec![0.0; hw];
    let mut an_all = vec![0.0; hw];
    for o in 0..NORIENT {
        let mut sum_e = vec![0.0; hw];
        let mut sum_o = vec![0.0; hw];
        let mut sum_an = vec![0.0; hw];
        let mut eo: Vec<Vec<Complex<f64>>> = Vec::with_capacity(NSCALE);
        for s in 0..NSCALE {
            let filt = &pf.filters[o][s];
            let mut buf: Vec<Complex<f64>> =
                (0..hw).map(|i| imfft[i] * filt[i]).collect();
            fft2(&mut buf, h, w, true);
            for i in 0..hw {
                sum_e[i] += buf[i].re;
                sum_o[i] += buf[i].im;
                sum_an[i] += buf[i].norm();
            }
            eo.push(buf);
        }
        // Energy along the mean phase direction minus the deviation.
        let mut energy = vec![0.0; hw];
        for i in 0..hw {
            let x = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + EPSILON;
            let me = sum_e[i] / x;
            let mo = sum_o[i] / x;
            for band in &eo {
                let (e, od) = (band[i].re, band[i].im);
                energy[i] += e * me + od * mo - (e * mo - od * me).abs();
            }
        }
        // Rayleigh noise threshold estimated from the smallest-scale band.
        let e2: Vec<f64> = eo[0].iter().map(|c| c.norm_sqr()).collect();
        let mean_e2n = -median(&e2) / 0.5f64.ln();
        let noise_power = mean_e2n / pf.em_n[o];
        let est_noise_energy2 =
            2.0 * noise_power * pf.sum_an2[o] + 4.0 * noise_power * pf.sum_ai_aj[o];
        let tau = (est_noise_energy2 / 2.0).sqrt();
        let est_noise_energy = tau * (std::f64::consts::PI / 2.0).sqrt();
        let est_sigma = ((2.0 - std::f64::consts::PI / 2.0) * tau * tau).sqrt();
        let t = (est_noise_energy + NOISE_K * est_sigma) / 1.7;
        for i in 0..hw {
            energy_all[i] += (energy[i] - t).max(0.0);
            an_all[i] += sum_an[i];
        }
    }
    let mut pc = Matrix::zeros(h, w);
    for i in 0..hw {
        pc.data_mut()[i] = energy_all[i] / (an_all[i] + EPSILON);
    }
    pc
}

/// Gradient magnitude from 3×3 Scharr kernels (zero-padded).
fn scharr_magnitude(im: &Matrix) -> Matrix {
    let (h, w) = (im.h(), im.w());
    let kx = [
        [3.0, 0.0, -3.0],
        [10.0, 0.0, -10.0],
        [3.0, 0.0, -3.0],
    ];
    Matrix::from_fn(h, w, |y, x| {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let yy = y as isize + i as isize - 1;
                let xx = x as isize + j as isize - 1;
                if yy < 0 || yy >= h as isize || xx < 0 || xx >= w as isize {
                    continue;
                }
                let v = im.at(yy as usize, xx as usize);
                gx += kx[i][j] / 16.0 * v;
                gy += kx[j][i] / 16.0 * v;
            }
        }
        (gx * gx + gy * gy).sqrt()
    })
}

/// Feature similarity index between two grayscale images in `[0, 1]`
/// (scaled to `[0, 255]` internally). Extents must be at least 32.
pub fn fsim(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.h() != b.h() || a.w() != b.w() {
        return Err(Error::dimension(format!(
            "fsim: {}×{} vs {}×{}",
            a.h(),
            a.w(),
            b.h(),
            b.w()
        )));
    }
    let (h, w) = (a.h(), a.w());
    if h < 32 || w < 32 {
        return Err(Error::dimension(format!(
            "fsim needs extents of at least 32, got {h}×{w}"
        )));
    }
    let scale = |m: &Matrix| {
        let mut s = m.clone();
        for v in s.data_mut() {
            *v *= 255.0;
        }
        s
    };
    let (a, b) = (scale(a), scale(b));
    let pf = PcFilters::new(h, w);
    let pc1 = phase_congruency(&a, &pf);
    let pc2 = phase_congruency(&b, &pf);
    let g1 = scharr_magnitude(&a);
    let g2 = scharr_magnitude(&b);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..h * w {
        let (p1, p2) = (pc1.data()[i], pc2.data()[i]);
        let (m1, m2) = (g1.data()[i], g2.data()[i]);
        let pcm = p1.max(p2);
        let s_pc = (2.0 * p1 * p2 + T1) / (p1 * p1 + p2 * p2 + T1);
        let s_g = (2.0 * m1 * m2 + T2) / (m1 * m1 + m2 * m2 + T2);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if den == 0.0 {
        // Both images are featureless (zero phase congruency everywhere).
        return Ok(1.0);
    }
    Ok(num / den)
}
