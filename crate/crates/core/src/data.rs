//! Image I/O, resampling, and training-batch sampling.
//!
//! Images live on disk as 8-bit RGB (PNG or binary PPM) and in memory as
//! rank-4 tensors scaled to `[0, 1]`. Resampling is Keys bicubic (a = −1/2)
//! with half-pixel coordinate mapping, clamped edges, and an anti-aliasing
//! widened kernel on downscale. Batch sampling is counter-keyed: batch `k`
//! from a sampler seeded `s` has the same contents no matter which batches
//! were drawn before it.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::Path;

/// An 8-bit RGB raster: `pixels` holds `height × width` interleaved triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuffer {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::dimension(format!(
                "image raster for {width}×{height} needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    /// `[1, 3, h, w]` tensor with values `v / 255`.
    pub fn to_tensor(&self) -> Tensor {
        let (h, w) = (self.height, self.width);
        let mut t = Tensor::zeros([1, 3, h, w]);
        let data = t.data_mut();
        for y in 0..h {
            for x in 0..w {
                let o = (y * w + x) * 3;
                for c in 0..3 {
                    data[c * h * w + y * w + x] = self.pixels[o + c] as f64 / 255.0;
                }
            }
        }
        t
    }

    /// Quantizes image `n` of a `[*, 3, h, w]` tensor: `round(v·255)`
    /// clamped to `[0, 255]`.
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<Self> {
        let [batch, c, h, w] = t.shape();
        if c != 3 {
            return Err(Error::dimension(format!(
                "image tensor needs 3 channels, got {c}"
            )));
        }
        if n >= batch {
            return Err(Error::dimension(format!(
                "image index {n} out of range for batch of {batch}"
            )));
        }
        let mut img = ImageBuffer::new(w, h);
        let data = t.data();
        let base = n * c * h * w;
        for y in 0..h {
            for x in 0..w {
                let o = (y * w + x) * 3;
                for ch in 0..3 {
                    let v = data[base + ch * h * w + y * w + x];
                    img.pixels[o + ch] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        Ok(img)
    }
}

// ---------------------------------------------------------------------------
// PPM (binary P6)
// ---------------------------------------------------------------------------

fn parse_ppm(bytes: &[u8], path: &Path) -> Result<ImageBuffer> {
    let mut pos = 0usize;
    let fail = |msg: String| Error::file(path, msg);

    // Reads the next header token, skipping whitespace and `#` comments.
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(fail("truncated PPM header".to_string()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = token(&mut pos)?;
    if magic != "P6" {
        return Err(fail(format!("expected PPM magic \"P6\", got {magic:?}")));
    }
    let dim = |pos: &mut usize, what: &str| -> Result<usize> {
        let t = token(pos)?;
        t.parse::<usize>()
            .map_err(|_| fail(format!("invalid PPM {what}: {t:?}")))
    };
    let width = dim(&mut pos, "width")?;
    let height = dim(&mut pos, "height")?;
    let maxval = dim(&mut pos, "maxval")?;
    if maxval != 255 {
        return Err(fail(format!("unsupported PPM maxval {maxval}, need 255")));
    }
    if width == 0 || height == 0 {
        return Err(fail(format!("degenerate PPM extents {width}×{height}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail("missing separator after PPM maxval".to_string()));
    }
    pos += 1;
    let need = width * height * 3;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(fail(format!(
            "PPM raster truncated: need {need} bytes, have {}",
            raster.len()
        )));
    }
    ImageBuffer::from_raw(width, height, raster[..need].to_vec())
}

fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

// ---------------------------------------------------------------------------
// PNG (via the `image` crate)
// ---------------------------------------------------------------------------

fn parse_png(bytes: &[u8], path: &Path) -> Result<ImageBuffer> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::file(path, format!("cannot decode PNG: {e}")))?;
    use image::ColorType::*;
    match decoded.color() {
        L8 | La8 | L16 | La16 => {
            return Err(Error::file(
                path,
                format!("unsupported color type {:?}: need RGB or RGBA", decoded.color()),
            ));
        }
        _ => {}
    }
    // RGBA alpha is dropped; 16-bit depth is narrowed to 8.
    let rgb = decoded.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    ImageBuffer::from_raw(w, h, rgb.into_raw())
}

const PNG_MAGIC: [u8; 4] = [0x89, b'P', b'N', b'G'];

/// Loads a PNG or binary PPM image, dispatching on the file's magic bytes.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, format!("cannot read: {e}")))?;
    if bytes.starts_with(b"P6") {
        parse_ppm(&bytes, path)
    } else if bytes.starts_with(&PNG_MAGIC) {
        parse_png(&bytes, path)
    } else {
        Err(Error::file(
            path,
            "unrecognized image format: need PNG or binary PPM (P6)",
        ))
    }
}

/// Saves as PNG or binary PPM depending on the file extension.
pub fn save_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "ppm" => std::fs::write(path, encode_ppm(img))
            .map_err(|e| Error::file(path, format!("cannot write: {e}"))),
        "png" => image::save_buffer_with_format(
            path,
            &img.pixels,
            img.width as u32,
            img.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::file(path, format!("cannot write PNG: {e}"))),
        other => Err(Error::file(
            path,
            format!("unsupported image extension {other:?}: use .png or .ppm"),
        )),
    }
}

// ---------------------------------------------------------------------------
// Bicubic resampling
// ---------------------------------------------------------------------------

/// Keys cubic convolution kernel with a = −1/2.
fn keys(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        (1.5 * x - 2.5) * x * x + 1.0
    } else if x < 2.0 {
        ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
    } else {
        0.0
    }
}

/// Per-output-index source taps for one axis: `(clamped index, weight)`
/// pairs, weights normalized to sum 1.
fn axis_taps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    // Downscale widens the kernel by the scale factor (anti-aliasing).
    let filter_scale = if scale > 1.0 { scale } else { 1.0 };
    let support = 2.0 * filter_scale;
    (0..dst)
        .map(|d| {
            let center = (d as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor() as i64 + 1;
            let hi = (center + support).ceil() as i64 - 1;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
            let mut total = 0.0;
            for s in lo..=hi {
                let w = keys((s as f64 - center) / filter_scale);
                if w == 0.0 {
                    continue;
                }
                total += w;
                let idx = s.clamp(0, src as i64 - 1) as usize;
                taps.push((idx, w));
            }
            for (_, w) in taps.iter_mut() {
                *w /= total;
            }
            taps
        })
        .collect()
}

/// Resizes `[n, c, h, w]` to `[n, c, out_h, out_w]` with separable Keys
/// bicubic filtering. Works for any channel count.
pub fn bicubic_resize(src: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [n, c, h, w] = src.shape();
    if out_h == 0 || out_w == 0 {
        return Err(Error::dimension(format!(
            "bicubic_resize target {out_h}×{out_w} must be non-empty"
        )));
    }
    let taps_w = axis_taps(w, out_w);
    let taps_h = axis_taps(h, out_h);

    // Width pass: [n, c, h, w] → [n, c, h, out_w].
    let mut mid = Tensor::zeros([n, c, h, out_w]);
    {
        let src_data = src.data();
        par::for_each_chunk_mut(mid.data_mut(), h * out_w, |plane, chunk| {
            let src_plane = &src_data[plane * h * w..(plane + 1) * h * w];
            for y in 0..h {
                let row = &src_plane[y * w..(y + 1) * w];
                for (ox, taps) in taps_w.iter().enumerate() {
                    let mut acc = 0.0;
                    for &(sx, wt) in taps {
                        acc += wt * row[sx];
                    }
                    chunk[y * out_w + ox] = acc;
                }
            }
        });
    }

    // Height pass: [n, c, h, out_w] → [n, c, out_h, out_w].
    let mut out = Tensor::zeros([n, c, out_h, out_w]);
    {
        let mid_data = mid.data();
        par::for_each_chunk_mut(out.data_mut(), out_h * out_w, |plane, chunk| {
            let mid_plane = &mid_data[plane * h * out_w..(plane + 1) * h * out_w];
            for (oy, taps) in taps_h.iter().enumerate() {
                for ox in 0..out_w {
                    let mut acc = 0.0;
                    for &(sy, wt) in taps {
                        acc += wt * mid_plane[sy * out_w + ox];
                    }
                    chunk[oy * out_w + ox] = acc;
                }
            }
        });
    }
    out.check_finite("bicubic_resize")?;
    Ok(out)
}

/// Splits an HR tensor into the ×4-downscaled LR input and the HR target.
/// Extents must be divisible by 4.
pub fn make_lr_hr_pair(hr: &Tensor) -> Result<(Tensor, Tensor)> {
    let [_, _, h, w] = hr.shape();
    if h % 4 != 0 || w % 4 != 0 {
        return Err(Error::dimension(format!(
            "HR extents {h}×{w} must be divisible by 4"
        )));
    }
    let lr = bicubic_resize(hr, h / 4, w / 4)?;
    Ok((lr, hr.clone()))
}

// ---------------------------------------------------------------------------
// Datasets and batch sampling
// ---------------------------------------------------------------------------

/// A named collection of `[1, 3, H, W]` image tensors.
#[derive(Debug)]
pub struct Dataset {
    names: Vec<String>,
    images: Vec<Tensor>,
}

impl Dataset {
    /// Loads every `.png`/`.ppm` file in `dir`, sorted by filename.
    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        let entries =
            std::fs::read_dir(dir).map_err(|e| Error::file(dir, format!("cannot list: {e}")))?;
        let mut paths = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::file(dir, format!("cannot list: {e}")))?;
            let path = entry.path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase())
                .unwrap_or_default();
            if matches!(ext.as_str(), "png" | "ppm") {
                paths.push(path);
            }
        }
        paths.sort();
        let mut names = Vec::new();
        let mut images = Vec::new();
        for path in paths {
            let img = load_image(&path)?;
            names.push(
                path.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            );
            images.push(img.to_tensor());
        }
        if images.is_empty() {
            return Err(Error::config(format!(
                "dataset directory {} contains no .png or .ppm images",
                dir.display()
            )));
        }
        Ok(Dataset { names, images })
    }

    pub fn from_tensors(names: Vec<String>, images: Vec<Tensor>) -> Result<Dataset> {
        if names.len() != images.len() {
            return Err(Error::dimension(format!(
                "{} names vs {} images",
                names.len(),
                images.len()
            )));
        }
        if images.is_empty() {
            return Err(Error::config("dataset has no images"));
        }
        Ok(Dataset { names, images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn image(&self, i: usize) -> &Tensor {
        &self.images[i]
    }
}

/// Draws random HR crops and their ×4-downscaled LR counterparts.
///
/// Batch `k` is generated from a dedicated RNG stream, so its contents depend
/// only on `(seed, k)` — two samplers with the same seed agree on batch `k`
/// even if one of them never drew batches `0..k`.
#[derive(Debug)]
pub struct CropSampler {
    dataset: Dataset,
    crop: usize,
    seed: u64,
}

impl CropSampler {
    pub fn new(dataset: Dataset, crop: usize, seed: u64) -> Result<Self> {
        if crop % 4 != 0 || crop < 8 {
            return Err(Error::config(format!(
                "crop size must be a multiple of 4 and at least 8, got {crop}"
            )));
        }
        for i in 0..dataset.len() {
            let [_, c, h, w] = dataset.image(i).shape();
            if c != 3 {
                return Err(Error::dimension(format!(
                    "dataset image {:?} has {c} channels, need 3",
                    dataset.name(i)
                )));
            }
            if h < crop || w < crop {
                return Err(Error::config(format!(
                    "dataset image {:?} is {h}×{w}, smaller than crop {crop}",
                    dataset.name(i)
                )));
            }
        }
        Ok(CropSampler {
            dataset,
            crop,
            seed,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn crop(&self) -> usize {
        self.crop
    }

    /// Returns `(lr, hr)` for batch `index`: HR crops `[b, 3, crop, crop]`
    /// and their bicubic ×4 downscales.
    pub fn batch(&self, index: u64, batch_size: usize) -> Result<(Tensor, Tensor)> {
        if batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let crop = self.crop;
        let mut hr = Tensor::zeros([batch_size, 3, crop, crop]);
        let plane = crop * crop;
        for b in 0..batch_size {
            let i = rng.random_range(0..self.dataset.len());
            let img = self.dataset.image(i);
            let [_, _, h, w] = img.shape();
            let top = rng.random_range(0..=h - crop);
            let left = rng.random_range(0..=w - crop);
            let src = img.data();
            let dst = hr.data_mut();
            for c in 0..3 {
                for y in 0..crop {
                    let src_off = c * h * w + (top + y) * w + left;
                    let dst_off = (b * 3 + c) * plane + y * crop;
                    dst[dst_off..dst_off + crop].copy_from_slice(&src[src_off..src_off + crop]);
                }
            }
        }
        let lr = bicubic_resize(&hr, crop / 4, crop / 4)?;
        Ok((lr, hr))
    }
}
