//! Shepp-Logan phantoms and their affine-warped variants.

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::ComplexImage;

pub const MIN_PHANTOM_SIZE: usize = 16;

/// One ellipse of the phantom in normalized `[-1, 1]²` coordinates (y up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Counter-clockwise rotation in degrees.
    pub angle_deg: f64,
}

impl Ellipse {
    const fn new(intensity: f64, semi_x: f64, semi_y: f64, cx: f64, cy: f64, angle: f64) -> Self {
        Self {
            intensity,
            semi_x,
            semi_y,
            center_x: cx,
            center_y: cy,
            angle_deg: angle,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

/// Ten-ellipse Shepp-Logan phantom with the higher-contrast intensities of Toft.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    Ellipse::new(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    Ellipse::new(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    Ellipse::new(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    Ellipse::new(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    Ellipse::new(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    Ellipse::new(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Affine deformation applied to the phantom's coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warp {
    pub scale_x: f64,
    pub scale_y: f64,
    pub rotation_deg: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl Default for Warp {
    fn default() -> Self {
        Self {
            scale_x: 1.0,
            scale_y: 1.0,
            rotation_deg: 0.0,
            shift_x: 0.0,
            shift_y: 0.0,
        }
    }
}

impl Warp {
    /// Draws a mild random deformation (±10% scale, ±10° rotation, ±0.05 shift).
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            scale_x: rng.random_range(0.9..1.05),
            scale_y: rng.random_range(0.9..1.05),
            rotation_deg: rng.random_range(-10.0..10.0),
            shift_x: rng.random_range(-0.05..0.05),
            shift_y: rng.random_range(-0.05..0.05),
        }
    }

    /// Maps an image-frame point back into the undeformed phantom frame.
    fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let dx = x - self.shift_x;
        let dy = y - self.shift_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.scale_x, v / self.scale_y)
    }
}

/// Normalized coordinate of pixel `(row, col)`: x to the right, y up, both in `(-1, 1)`.
pub fn pixel_coords(row: usize, col: usize, h: usize, w: usize) -> (f64, f64) {
    let x = (2.0 * col as f64 + 1.0 - w as f64) / w as f64;
    let y = (h as f64 - 2.0 * row as f64 - 1.0) / h as f64;
    (x, y)
}

pub fn shepp_logan(h: usize, w: usize) -> Result<ComplexImage> {
    warped_shepp_logan(h, w, &Warp::default())
}

pub fn warped_shepp_logan(h: usize, w: usize, warp: &Warp) -> Result<ComplexImage> {
    if h < MIN_PHANTOM_SIZE || w < MIN_PHANTOM_SIZE {
        return Err(Error::TooSmall {
            height: h,
            width: w,
            reason: format!("phantom needs at least {MIN_PHANTOM_SIZE} pixels per side"),
        });
    }
    let mut values = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let (x, y) = pixel_coords(r, c, h, w);
            let (u, v) = warp.inverse(x, y);
            values[r * w + c] = SHEPP_LOGAN
                .iter()
                .filter(|e| e.contains(u, v))
                .map(|e| e.intensity)
                .sum::<f64>()
                // Overlap sums can land a hair below zero.
                .max(0.0);
        }
    }
    ComplexImage::from_real(h, w, &values)
}

/// 2× average pooling of a real-valued image; used to obtain phantoms below the minimum size.
pub fn downsample2(img: &ComplexImage) -> ComplexImage {
    let (h, w) = (img.height() / 2, img.width() / 2);
    let mut out = ComplexImage::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let s = img.get(2 * r, 2 * c)
                + img.get(2 * r + 1, 2 * c)
                + img.get(2 * r, 2 * c + 1)
                + img.get(2 * r + 1, 2 * c + 1);
            out.set(r, c, s * 0.25);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_and_support() {
        for (h, w) in [(16, 16), (64, 64), (48, 80)] {
            let p = shepp_logan(h, w).unwrap();
            let m = p.magnitude();
            let max = m.iter().cloned().fold(0.0, f64::max);
            let min = m.iter().cloned().fold(f64::MAX, f64::min);
            assert!((max - 1.0).abs() < 1e-12, "{h}x{w} max {max}");
            assert_eq!(min, 0.0);
            assert!(p.data().iter().all(|z| z.im == 0.0));
            assert!(m.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        }
        // Corner is outside the skull; a point on the outer shell is at full intensity.
        let p = shepp_logan(64, 64).unwrap();
        assert_eq!(p.get(0, 0).re, 0.0);
        assert!((p.get(3, 32).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn membership_matches_direct_ellipse_test() {
        let (h, w) = (64, 64);
        let p = shepp_logan(h, w).unwrap();
        let mut oracle = vec![0.0; h * w];
        let mut counts = [0usize; 10];
        for r in 0..h {
            for c in 0..w {
                let x = -1.0 + (c as f64 + 0.5) * 2.0 / w as f64;
                let y = 1.0 - (r as f64 + 0.5) * 2.0 / h as f64;
                for (k, e) in SHEPP_LOGAN.iter().enumerate() {
                    // Rotate the point by -angle around the center (matrix form).
                    let t = -e.angle_deg.to_radians();
                    let px = (x - e.center_x) * t.cos() - (y - e.center_y) * t.sin();
                    let py = (x - e.center_x) * t.sin() + (y - e.center_y) * t.cos();
                    if px * px / (e.semi_x * e.semi_x) + py * py / (e.semi_y * e.semi_y) <= 1.0 {
                        oracle[r * w + c] += e.intensity;
                        counts[k] += 1;
                    }
                }
            }
        }
        for (a, b) in p.magnitude().iter().zip(&oracle) {
            assert!((a - b.max(0.0)).abs() < 1e-12);
        }
        assert!(counts.iter().all(|&n| n > 0), "{counts:?}");
        // Outermost ellipse contains every other one.
        assert!(counts[0] > counts[1] && counts[1] > counts[3]);
    }

    #[test]
    fn too_small() {
        assert!(matches!(shepp_logan(8, 64), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn identity_warp_is_plain_phantom() {
        assert_eq!(
            warped_shepp_logan(32, 32, &Warp::default()).unwrap(),
            shepp_logan(32, 32).unwrap()
        );
        let mut rng = crate::testutil::rng(1);
        let wp = warped_shepp_logan(32, 32, &Warp::random(&mut rng)).unwrap();
        assert_ne!(wp, shepp_logan(32, 32).unwrap());
    }

    #[test]
    fn downsample_averages_blocks() {
        let p = shepp_logan(16, 16).unwrap();
        let d = downsample2(&p);
        assert_eq!(d.shape(), (8, 8));
        let expected = (p.get(4, 6) + p.get(5, 6) + p.get(4, 7) + p.get(5, 7)) * 0.25;
        assert_eq!(d.get(2, 3), expected);
    }
}
