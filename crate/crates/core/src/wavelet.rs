//! Haar wavelet transforms: 1-D DWT, separable 2-D DWT, and the 2-level
//! wavelet packet transform producing 16 equal-size sub-bands per channel.
//!
//! Conventions, fixed here once:
//! - analysis pairing is non-shifted: `a[n] = (x[2n]+x[2n+1])/√2`,
//!   `d[n] = (x[2n]−x[2n+1])/√2` — no boundary extension is ever needed
//!   because extents are required even (divisible by 4 for the packet);
//! - `dwt2d` filters each row first (the horizontal axis), then each column;
//!   band letters read (vertical, horizontal), so `LH` is vertical-low /
//!   horizontal-high: `dwt2d([[1,2],[3,4]])` → LL 5, LH −1, HL −2, HH 0;
//! - packet band index is `b = 4p + q` with `p` the first-level band and `q`
//!   the second-level band inside it, both in (LL, LH, HL, HH) order;
//! - filters are orthonormal (`1/√2` scaling), so the transform conserves
//!   energy and the backward pass of the inverse is the forward transform.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::tensor::Tensor;

/// Number of sub-bands in the 2-level packet decomposition.
pub const BAND_COUNT: usize = 16;

/// An analysis low-pass/high-pass filter pair (length 2).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterPair {
    pub low: [f64; 2],
    pub high: [f64; 2],
}

impl WaveletFilterPair {
    /// The orthonormal Haar pair: low `[1/√2, 1/√2]`, high `[1/√2, −1/√2]`.
    pub fn haar() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        WaveletFilterPair {
            low: [s, s],
            high: [s, -s],
        }
    }
}

/// One level of the 1-D DWT: `(approx, detail)`, each half the input length.
pub fn dwt1d(signal: &[f64], filters: &WaveletFilterPair) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.len() % 2 != 0 {
        return Err(Error::dimension(format!(
            "dwt1d: signal length {} is odd",
            signal.len()
        )));
    }
    let half = signal.len() / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for n in 0..half {
        let (x0, x1) = (signal[2 * n], signal[2 * n + 1]);
        approx.push(x0 * filters.low[0] + x1 * filters.low[1]);
        detail.push(x0 * filters.high[0] + x1 * filters.high[1]);
    }
    Ok((approx, detail))
}

/// Exact inverse of [`dwt1d`] for an orthonormal pair:
/// `x[2n] = a[n]·l[0] + d[n]·h[0]`, `x[2n+1] = a[n]·l[1] + d[n]·h[1]`.
pub fn idwt1d(approx: &[f64], detail: &[f64], filters: &WaveletFilterPair) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::dimension(format!(
            "idwt1d: approx length {} vs detail length {}",
            approx.len(),
            detail.len()
        )));
    }
    let mut out = Vec::with_capacity(approx.len() * 2);
    for (&a, &d) in approx.iter().zip(detail) {
        out.push(a * filters.low[0] + d * filters.high[0]);
        out.push(a * filters.low[1] + d * filters.high[1]);
    }
    Ok(out)
}

/// The four bands of one 2-D DWT level, each `[H/2, W/2]`.
#[derive(Debug, Clone)]
pub struct DwtBands {
    pub ll: Matrix,
    pub lh: Matrix,
    pub hl: Matrix,
    pub hh: Matrix,
}

/// One separable 2-D Haar DWT level: rows first, then columns.
pub fn dwt2d(image: &Matrix) -> Result<DwtBands> {
    let (h, w) = (image.h(), image.w());
    if h % 2 != 0 {
        return Err(Error::dimension(format!("dwt2d: height {h} is odd")));
    }
    if w % 2 != 0 {
        return Err(Error::dimension(format!("dwt2d: width {w} is odd")));
    }
    let f = WaveletFilterPair::haar();
    let (hh2, hw2) = (h / 2, w / 2);

    // Row pass: low/high along the horizontal axis, each [h, w/2].
    let mut row_low = Matrix::zeros(h, hw2);
    let mut row_high = Matrix::zeros(h, hw2);
    for r in 0..h {
        let (a, d) = dwt1d(image.row(r), &f)?;
        row_low.data_mut()[r * hw2..(r + 1) * hw2].copy_from_slice(&a);
        row_high.data_mut()[r * hw2..(r + 1) * hw2].copy_from_slice(&d);
    }

    // Column pass: low/high along the vertical axis, each [h/2, w/2].
    let mut ll = Matrix::zeros(hh2, hw2);
    let mut lh = Matrix::zeros(hh2, hw2);
    let mut hl = Matrix::zeros(hh2, hw2);
    let mut hh = Matrix::zeros(hh2, hw2);
    let mut col = vec![0.0; h];
    for c in 0..hw2 {
        for r in 0..h {
            col[r] = row_low.at(r, c);
        }
        let (a, d) = dwt1d(&col, &f)?;
        for r in 0..hh2 {
            *ll.at_mut(r, c) = a[r];
            *hl.at_mut(r, c) = d[r];
        }
        for r in 0..h {
            col[r] = row_high.at(r, c);
        }
        let (a, d) = dwt1d(&col, &f)?;
        for r in 0..hh2 {
            *lh.at_mut(r, c) = a[r];
            *hh.at_mut(r, c) = d[r];
        }
    }
    Ok(DwtBands { ll, lh, hl, hh })
}

/// Exact inverse of [`dwt2d`].
pub fn idwt2d(bands: &DwtBands) -> Result<Matrix> {
    let (bh, bw) = (bands.ll.h(), bands.ll.w());
    for (name, m) in [("lh", &bands.lh), ("hl", &bands.hl), ("hh", &bands.hh)] {
        if (m.h(), m.w()) != (bh, bw) {
            return Err(Error::dimension(format!(
                "idwt2d: band {name} extent {}×{} vs ll extent {bh}×{bw}",
                m.h(),
                m.w()
            )));
        }
    }
    let f = WaveletFilterPair::haar();
    let (h, w) = (bh * 2, bw * 2);

    // Invert the column pass.
    let mut row_low = Matrix::zeros(h, bw);
    let mut row_high = Matrix::zeros(h, bw);
    let mut a = vec![0.0; bh];
    let mut d = vec![0.0; bh];
    for c in 0..bw {
        for r in 0..bh {
            a[r] = bands.ll.at(r, c);
            d[r] = bands.hl.at(r, c);
        }
        let col = idwt1d(&a, &d, &f)?;
        for r in 0..h {
            *row_low.at_mut(r, c) = col[r];
        }
        for r in 0..bh {
            a[r] = bands.lh.at(r, c);
            d[r] = bands.hh.at(r, c);
        }
        let col = idwt1d(&a, &d, &f)?;
        for r in 0..h {
            *row_high.at_mut(r, c) = col[r];
        }
    }

    // Invert the row pass.
    let mut out = Matrix::zeros(h, w);
    for r in 0..h {
        let row = idwt1d(row_low.row(r), row_high.row(r), &f)?;
        out.data_mut()[r * w..(r + 1) * w].copy_from_slice(&row);
    }
    Ok(out)
}

/// The 16 wavelet-packet sub-bands of one channel, each `[H/4, W/4]`.
#[derive(Debug, Clone)]
pub struct SubbandSet {
    bands: Vec<Matrix>,
    source_extent: (usize, usize),
}

impl SubbandSet {
    /// Validates the band count and extent agreement.
    pub fn new(bands: Vec<Matrix>, source_extent: (usize, usize)) -> Result<Self> {
        if bands.len() != BAND_COUNT {
            return Err(Error::dimension(format!(
                "SubbandSet: {} bands, expected {BAND_COUNT}",
                bands.len()
            )));
        }
        let (bh, bw) = (source_extent.0 / 4, source_extent.1 / 4);
        for (i, b) in bands.iter().enumerate() {
            if (b.h(), b.w()) != (bh, bw) {
                return Err(Error::dimension(format!(
                    "SubbandSet: band {i} extent {}×{} vs expected {bh}×{bw}",
                    b.h(),
                    b.w()
                )));
            }
        }
        Ok(SubbandSet {
            bands,
            source_extent,
        })
    }

    pub fn bands(&self) -> &[Matrix] {
        &self.bands
    }
    pub fn band(&self, b: usize) -> &Matrix {
        &self.bands[b]
    }
    pub fn band_mut(&mut self, b: usize) -> &mut Matrix {
        &mut self.bands[b]
    }
    pub fn into_bands(self) -> Vec<Matrix> {
        self.bands
    }
    pub fn source_extent(&self) -> (usize, usize) {
        self.source_extent
    }

    /// Σ over all band coefficients squared.
    pub fn energy(&self) -> f64 {
        self.bands.iter().map(Matrix::sum_squares).sum()
    }
}

fn check_divisible_by_4(h: usize, w: usize, who: &str) -> Result<()> {
    if h % 4 != 0 {
        return Err(Error::dimension(format!(
            "{who}: height {h} is not divisible by 4"
        )));
    }
    if w % 4 != 0 {
        return Err(Error::dimension(format!(
            "{who}: width {w} is not divisible by 4"
        )));
    }
    Ok(())
}

/// 2-level packet decomposition of one channel into 16 bands in `4p+q` order.
fn wpt2_channel(image: &Matrix) -> Vec<Matrix> {
    let l1 = dwt2d(image).expect("extents validated by caller");
    let mut bands = Vec::with_capacity(BAND_COUNT);
    for parent in [&l1.ll, &l1.lh, &l1.hl, &l1.hh] {
        let l2 = dwt2d(parent).expect("extents validated by caller");
        bands.extend([l2.ll, l2.lh, l2.hl, l2.hh]);
    }
    bands
}

/// Inverse of [`wpt2_channel`].
fn iwpt2_channel(bands: &[Matrix]) -> Matrix {
    let mut parents = Vec::with_capacity(4);
    for p in 0..4 {
        let group = DwtBands {
            ll: bands[4 * p].clone(),
            lh: bands[4 * p + 1].clone(),
            hl: bands[4 * p + 2].clone(),
            hh: bands[4 * p + 3].clone(),
        };
        parents.push(idwt2d(&group).expect("band extents validated by caller"));
    }
    let l1 = DwtBands {
        ll: parents[0].clone(),
        lh: parents[1].clone(),
        hl: parents[2].clone(),
        hh: parents[3].clone(),
    };
    idwt2d(&l1).expect("band extents validated by caller")
}

/// 2-level wavelet packet transform of a single image `[1, C, H, W]`,
/// yielding one [`SubbandSet`] per channel.
pub fn wpt2(image: &Tensor) -> Result<Vec<SubbandSet>> {
    if image.n() != 1 {
        return Err(Error::dimension(format!(
            "wpt2: expected batch extent 1, got shape {:?}",
            image.shape()
        )));
    }
    check_divisible_by_4(image.h(), image.w(), "wpt2")?;
    (0..image.c())
        .map(|c| {
            let m = Matrix::from_tensor_channel(image, 0, c);
            SubbandSet::new(wpt2_channel(&m), (image.h(), image.w()))
        })
        .collect()
}

/// Inverse packet transform: one [`SubbandSet`] per channel back to
/// `[1, C, H, W]`.
pub fn iwpt2(channels: &[SubbandSet]) -> Result<Tensor> {
    if channels.is_empty() {
        return Err(Error::dimension("iwpt2: no channels"));
    }
    let (h, w) = channels[0].source_extent();
    for (i, s) in channels.iter().enumerate() {
        if s.source_extent() != (h, w) {
            return Err(Error::dimension(format!(
                "iwpt2: channel {i} source extent {:?} vs {:?}",
                s.source_extent(),
                (h, w)
            )));
        }
    }
    let mut out = Tensor::zeros([1, channels.len(), h, w]);
    for (c, s) in channels.iter().enumerate() {
        iwpt2_channel(s.bands()).copy_into_channel(&mut out, 0, c);
    }
    out.check_finite("iwpt2")?;
    Ok(out)
}

/// Batched packet transform `[n, C, H, W]` → `[n, 16·C, H/4, W/4]`, with
/// output channel index `16·color + band` (the generator head's layout).
pub fn wpt2_packed(images: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = images.shape();
    check_divisible_by_4(h, w, "wpt2")?;
    let (bh, bw) = (h / 4, w / 4);
    let mut out = Tensor::zeros([n, 16 * c, bh, bw]);
    let chunk_len = BAND_COUNT * bh * bw;
    par::for_each_chunk_mut(out.data_mut(), chunk_len, |idx, chunk| {
        let (ni, ci) = (idx / c, idx % c);
        let m = Matrix::from_tensor_channel(images, ni, ci);
        for (b, band) in wpt2_channel(&m).iter().enumerate() {
            chunk[b * bh * bw..(b + 1) * bh * bw].copy_from_slice(band.data());
        }
    });
    out.check_finite("wpt2_packed")?;
    Ok(out)
}

/// Batched inverse packet transform `[n, 16·C, h, w]` → `[n, C, 4h, 4w]`.
pub fn iwpt2_packed(coeffs: &Tensor) -> Result<Tensor> {
    let [n, packed_c, bh, bw] = coeffs.shape();
    if packed_c % BAND_COUNT != 0 {
        return Err(Error::dimension(format!(
            "iwpt2: packed channel count {packed_c} is not a multiple of {BAND_COUNT}"
        )));
    }
    let c = packed_c / BAND_COUNT;
    let (h, w) = (bh * 4, bw * 4);
    let mut out = Tensor::zeros([n, c, h, w]);
    par::for_each_chunk_mut(out.data_mut(), h * w, |idx, chunk| {
        let (ni, ci) = (idx / c, idx % c);
        let bands: Vec<Matrix> = (0..BAND_COUNT)
            .map(|b| Matrix::from_tensor_channel(coeffs, ni, BAND_COUNT * ci + b))
            .collect();
        chunk.copy_from_slice(iwpt2_channel(&bands).data());
    });
    out.check_finite("iwpt2_packed")?;
    Ok(out)
}

/// Backward pass of [`iwpt2_packed`]: the transform is orthonormal and
/// linear, so the adjoint of the inverse is the forward packet transform
/// applied to the image-space gradient.
pub fn iwpt2_packed_backward(grad_image: &Tensor) -> Result<Tensor> {
    wpt2_packed(grad_image)
}
