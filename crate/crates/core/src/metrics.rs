//! PSNR, SSIM and MS-SSIM on magnitude images.
//!
//! Every metric takes a *stack* of slices so the dynamic range can be shared across a whole
//! volume. SSIM uses a 7×7 uniform window over valid positions with the unbiased (N−1)
//! covariance estimate; MS-SSIM uses five dyadic scales.

use crate::error::{Error, Result};
use crate::types::ComplexImage;

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Real non-negative image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl MagnitudeImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension {
                expected: height * width,
                got: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    /// 2× average pooling, dropping a trailing odd row/column.
    pub fn downsample2(&self) -> Self {
        let (h, w) = (self.height / 2, self.width / 2);
        let mut data = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let s = self.at(2 * r, 2 * c)
                    + self.at(2 * r + 1, 2 * c)
                    + self.at(2 * r, 2 * c + 1)
                    + self.at(2 * r + 1, 2 * c + 1);
                data.push(0.25 * s);
            }
        }
        Self {
            height: h,
            width: w,
            data,
        }
    }
}

impl From<&ComplexImage> for MagnitudeImage {
    fn from(img: &ComplexImage) -> Self {
        Self {
            height: img.height(),
            width: img.width(),
            data: img.magnitude(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataRange {
    /// Maximum of the reference over the whole stack.
    Auto,
    Fixed(f64),
}

impl DataRange {
    fn resolve(self, reference: &[MagnitudeImage]) -> Result<f64> {
        let range = match self {
            DataRange::Fixed(r) => r,
            DataRange::Auto => reference
                .iter()
                .flat_map(|s| s.data.iter().copied())
                .fold(0.0, f64::max),
        };
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::Degenerate(format!(
                "data range must be positive, got {range}"
            )));
        }
        Ok(range)
    }
}

fn check_stacks(a: &[MagnitudeImage], b: &[MagnitudeImage]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape() != y.shape() {
            return Err(Error::Shape {
                expected: x.shape(),
                got: y.shape(),
            });
        }
    }
    Ok(())
}

/// `20·log10(range) − 10·log10(MSE)` over the whole stack; `+∞` when the stacks are equal.
pub fn psnr(
    reference: &[MagnitudeImage],
    test: &[MagnitudeImage],
    range: DataRange,
) -> Result<f64> {
    check_stacks(reference, test)?;
    let range = range.resolve(reference)?;
    let squares = reference
        .iter()
        .zip(test)
        .flat_map(|(a, b)| a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)));
    let n: usize = reference.iter().map(|a| a.data.len()).sum();
    let mse = compensated_sum(squares) / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * range.log10() - 10.0 * mse.log10())
}

/// Neumaier-compensated sum; keeps the MSE of a constant error exact.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Per-window SSIM statistics summed over one slice.
struct SsimSums {
    /// Sum of full SSIM (luminance × contrast-structure) over windows.
    ssim: f64,
    /// Sum of the contrast-structure term alone.
    cs: f64,
    windows: usize,
}

/// Summed-area table with one row/column of zero padding.
fn integral(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let stride = w + 1;
    let mut s = vec![0.0; (h + 1) * stride];
    for r in 0..h {
        let mut row = 0.0;
        for c in 0..w {
            row += f(r, c);
            s[(r + 1) * stride + c + 1] = s[r * stride + c + 1] + row;
        }
    }
    s
}

fn box_sum(s: &[f64], stride: usize, r: usize, c: usize, k: usize) -> f64 {
    s[(r + k) * stride + c + k] - s[r * stride + c + k] - s[(r + k) * stride + c]
        + s[r * stride + c]
}

fn ssim_sums(a: &MagnitudeImage, b: &MagnitudeImage, range: f64) -> Result<SsimSums> {
    let (h, w) = a.shape();
    let k = SSIM_WINDOW;
    if h < k || w < k {
        return Err(Error::TooSmall {
            height: h,
            width: w,
            reason: format!("SSIM needs at least a {k}x{k} window"),
        });
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let ia = integral(h, w, |r, c| a.at(r, c));
    let ib = integral(h, w, |r, c| b.at(r, c));
    let iaa = integral(h, w, |r, c| a.at(r, c) * a.at(r, c));
    let ibb = integral(h, w, |r, c| b.at(r, c) * b.at(r, c));
    let iab = integral(h, w, |r, c| a.at(r, c) * b.at(r, c));
    let stride = w + 1;
    let np = (k * k) as f64;
    let cov_norm = np / (np - 1.0);

    let mut sums = SsimSums {
        ssim: 0.0,
        cs: 0.0,
        windows: 0,
    };
    for r in 0..=h - k {
        for c in 0..=w - k {
            let mu_a = box_sum(&ia, stride, r, c, k) / np;
            let mu_b = box_sum(&ib, stride, r, c, k) / np;
            let var_a = cov_norm * (box_sum(&iaa, stride, r, c, k) / np - mu_a * mu_a);
            let var_b = cov_norm * (box_sum(&ibb, stride, r, c, k) / np - mu_b * mu_b);
            let cov = cov_norm * (box_sum(&iab, stride, r, c, k) / np - mu_a * mu_b);
            let lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
            let cs = (2.0 * cov + c2) / (var_a + var_b + c2);
            sums.ssim += lum * cs;
            sums.cs += cs;
            sums.windows += 1;
        }
    }
    Ok(sums)
}

/// Mean local SSIM over every window of every slice.
pub fn ssim(
    reference: &[MagnitudeImage],
    test: &[MagnitudeImage],
    range: DataRange,
) -> Result<f64> {
    check_stacks(reference, test)?;
    let range = range.resolve(reference)?;
    let mut total = 0.0;
    let mut windows = 0;
    for (a, b) in reference.iter().zip(test) {
        let s = ssim_sums(a, b, range)?;
        total += s.ssim;
        windows += s.windows;
    }
    Ok(total / windows as f64)
}

/// Five-scale MS-SSIM per slice, averaged over the stack.
///
/// Scales 1–4 contribute their mean contrast-structure term and the coarsest scale its full
/// SSIM, each raised to [`MS_SSIM_WEIGHTS`]. Negative terms are clamped to zero.
pub fn ms_ssim(
    reference: &[MagnitudeImage],
    test: &[MagnitudeImage],
    range: DataRange,
) -> Result<f64> {
    check_stacks(reference, test)?;
    let range = range.resolve(reference)?;
    let scales = MS_SSIM_WEIGHTS.len();
    let min_side = SSIM_WINDOW << (scales - 1);
    let mut total = 0.0;
    for (a, b) in reference.iter().zip(test) {
        let (h, w) = a.shape();
        if h < min_side || w < min_side {
            return Err(Error::TooSmall {
                height: h,
                width: w,
                reason: format!("{scales}-scale MS-SSIM needs at least {min_side} pixels per side"),
            });
        }
        let mut x = a.clone();
        let mut y = b.clone();
        let mut value = 1.0;
        for (j, &weight) in MS_SSIM_WEIGHTS.iter().enumerate() {
            let s = ssim_sums(&x, &y, range)?;
            let term = if j + 1 == scales { s.ssim } else { s.cs } / s.windows as f64;
            value *= term.max(0.0).powf(weight);
            if j + 1 < scales {
                x = x.downsample2();
                y = y.downsample2();
            }
        }
        total += value;
    }
    Ok(total / reference.len() as f64)
}

/// Convenience wrappers for single complex images (magnitude taken first).
pub fn psnr_complex(
    reference: &ComplexImage,
    test: &ComplexImage,
    range: DataRange,
) -> Result<f64> {
    psnr(&[reference.into()], &[test.into()], range)
}

pub fn ssim_complex(
    reference: &ComplexImage,
    test: &ComplexImage,
    range: DataRange,
) -> Result<f64> {
    ssim(&[reference.into()], &[test.into()], range)
}

pub fn ms_ssim_complex(
    reference: &ComplexImage,
    test: &ComplexImage,
    range: DataRange,
) -> Result<f64> {
    ms_ssim(&[reference.into()], &[test.into()], range)
}
