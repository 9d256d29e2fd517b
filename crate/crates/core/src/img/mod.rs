//! Image containers and full-reference quality metrics (PSNR, SSIM).

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("image shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize, usize), b: (usize, usize, usize) },
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall { width: usize, height: usize, window: usize },
}

/// Row-major image with interleaved channels and values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid("dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(ImageError::Invalid(format!(
                "{} values for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::Invalid(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    /// One channel as a contiguous plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Rec. 601 luma; single-channel images are returned unchanged.
    pub fn luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }
}

fn check_same_shape(a: &Image, b: &Image) -> Result<(), ImageError> {
    if a.shape() != b.shape() {
        return Err(ImageError::ShapeMismatch { a: a.shape(), b: b.shape() });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB with peak 1.0. Identical images give `+inf`.
pub fn psnr(pred: &Image, gt: &Image) -> Result<f64, ImageError> {
    check_same_shape(pred, gt)?;
    let mse = pred.data.iter().zip(&gt.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Which signal SSIM is computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimMode {
    /// Each channel separately, then averaged.
    #[default]
    PerChannel,
    /// Rec. 601 luma only.
    Luminance,
}

/// Normalized 1D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable valid-region filter of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|t| k[t] * rows[(y + t) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, k: &[f64]) -> f64 {
    let prod = |f: &dyn Fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, k);
    let mu_b = filter_valid(b, w, h, k);
    let e_aa = filter_valid(&prod(&|x, _| x * x), w, h, k);
    let e_bb = filter_valid(&prod(&|_, y| y * y), w, h, k);
    let e_ab = filter_valid(&prod(&|x, y| x * y), w, h, k);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        })
        .sum();
    total / n as f64
}

/// Mean SSIM over all channels (see [`SsimMode`]) using an 11x11 Gaussian window.
pub fn ssim_with_mode(pred: &Image, gt: &Image, mode: SsimMode) -> Result<f64, ImageError> {
    check_same_shape(pred, gt)?;
    if pred.width < SSIM_WINDOW || pred.height < SSIM_WINDOW {
        return Err(ImageError::TooSmall { width: pred.width, height: pred.height, window: SSIM_WINDOW });
    }
    let (pred, gt) = match mode {
        SsimMode::PerChannel => (pred.clone(), gt.clone()),
        SsimMode::Luminance => (pred.luminance(), gt.luminance()),
    };
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let sum: f64 = (0..pred.channels)
        .map(|c| ssim_plane(&pred.plane(c), &gt.plane(c), pred.width, pred.height, &k))
        .sum();
    Ok(sum / pred.channels as f64)
}

pub fn ssim(pred: &Image, gt: &Image) -> Result<f64, ImageError> {
    ssim_with_mode(pred, gt, SsimMode::PerChannel)
}

/// PSNR and SSIM of one image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub name: String,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-image scores and their means. The PSNR mean is `inf` only when every pair is identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NvsReport {
    pub images: Vec<ImageScore>,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Scores named image pairs in parallel; results keep input order.
pub fn evaluate_pairs(pairs: &[(String, Image, Image)], mode: SsimMode) -> Result<NvsReport, ImageError> {
    if pairs.is_empty() {
        return Err(ImageError::Invalid("no image pairs".into()));
    }
    let images = pairs
        .par_iter()
        .map(|(name, pred, gt)| {
            Ok(ImageScore { name: name.clone(), psnr: psnr(pred, gt)?, ssim: ssim_with_mode(pred, gt, mode)? })
        })
        .collect::<Result<Vec<_>, ImageError>>()?;
    let n = images.len() as f64;
    let mean_psnr = images.iter().map(|s| s.psnr).sum::<f64>() / n;
    let mean_ssim = images.iter().map(|s| s.ssim).sum::<f64>() / n;
    Ok(NvsReport { images, mean_psnr, mean_ssim })
}

/// Serializes `+inf` as the string `"inf"`, finite values as numbers.
pub fn serialize_db<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub fn deserialize_db<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}
