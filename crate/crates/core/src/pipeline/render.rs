//! 8-bit grayscale PNG export of image magnitudes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::ComplexImage;

/// Lower and upper percentiles of the display window.
pub const WINDOW_PERCENTILES: (f64, f64) = (0.1, 99.9);

/// Percentile of `sorted` with linear interpolation between order statistics.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gray levels of `|img|` after clipping to the percentile window. A flat window renders
/// mid-gray, or black when the image is zero.
pub fn to_gray(img: &ComplexImage) -> Vec<u8> {
    let mag = img.magnitude();
    if mag.is_empty() {
        return Vec::new();
    }
    let mut sorted = mag.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, WINDOW_PERCENTILES.0);
    let hi = percentile(&sorted, WINDOW_PERCENTILES.1);
    if hi <= lo {
        let level = if hi == 0.0 { 0 } else { 128 };
        return vec![level; mag.len()];
    }
    mag.iter()
        .map(|&v| (255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8)
        .collect()
}

fn write_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Parameter(format!("image dimension {v} too large")))
    };
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, dim(width)?, dim(height)?);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(pixels).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}

pub fn export_png(img: &ComplexImage, path: impl AsRef<Path>) -> Result<()> {
    write_gray(path.as_ref(), img.width(), img.height(), &to_gray(img))
}

/// `|recon − reference|`.
pub fn error_map(recon: &ComplexImage, reference: &ComplexImage) -> Result<ComplexImage> {
    if recon.shape() != reference.shape() {
        return Err(Error::Shape {
            expected: reference.shape(),
            got: recon.shape(),
        });
    }
    let values: Vec<f64> = recon
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).norm())
        .collect();
    ComplexImage::from_real(recon.height(), recon.width(), &values)
}

pub fn export_error_png(
    recon: &ComplexImage,
    reference: &ComplexImage,
    path: impl AsRef<Path>,
) -> Result<()> {
    export_png(&error_map(recon, reference)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_image;
    use std::io::BufReader;

    fn read_png(path: &Path) -> (u32, u32, Vec<u8>) {
        let decoder = png::Decoder::new(BufReader::new(File::open(path).unwrap()));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!(info.color_type, png::ColorType::Grayscale);
        assert_eq!(info.bit_depth, png::BitDepth::Eight);
        buf.truncate(info.buffer_size());
        (info.width, info.height, buf)
    }

    #[test]
    fn constant_and_zero_images() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        export_png(&ComplexImage::from_real(4, 6, &[0.7; 24]).unwrap(), &p).unwrap();
        let (w, h, px) = read_png(&p);
        assert_eq!((w, h), (6, 4));
        assert!(px.iter().all(|&v| v == 128));

        export_png(&ComplexImage::zeros(3, 3), &p).unwrap();
        assert!(read_png(&p).2.iter().all(|&v| v == 0));
    }

    #[test]
    fn window_spans_full_range() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let g = to_gray(&ComplexImage::from_real(10, 10, &values).unwrap());
        assert_eq!(g[0], 0);
        assert_eq!(g[99], 255);
        assert!(g.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn error_map_export_matches_difference_rendering() {
        let dir = tempfile::tempdir().unwrap();
        let a = random_image(8, 9, 1);
        let b = random_image(8, 9, 2);
        let p = dir.path().join("err.png");
        export_error_png(&a, &b, &p).unwrap();
        let diff: Vec<f64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm())
            .collect();
        let expected = to_gray(&ComplexImage::from_real(8, 9, &diff).unwrap());
        assert_eq!(read_png(&p).2, expected);
        assert!(error_map(&a, &random_image(8, 8, 3)).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = export_png(&ComplexImage::zeros(2, 2), "/nonexistent-dir/x.png").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
