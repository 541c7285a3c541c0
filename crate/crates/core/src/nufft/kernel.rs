//! Kaiser-Bessel gridding kernel.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Lookup-table samples per unit of kernel argument.
pub const TABLE_RESOLUTION: usize = 1 << 10;

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Shape parameter for a width-`width` kernel at oversampling `sigma` (Beatty et al.).
pub fn beatty_beta(width: usize, sigma: f64) -> f64 {
    let j = width as f64;
    let a = j / sigma * (sigma - 0.5);
    PI * (a * a - 0.8).sqrt()
}

/// Tabulated Kaiser-Bessel kernel, normalized to 1 at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    width: usize,
    beta: f64,
    i0_beta: f64,
    /// Samples of the kernel on `[0, width/2]` at spacing `1/TABLE_RESOLUTION`.
    table: Vec<f64>,
}

impl KernelSpec {
    pub fn new(width: usize, sigma: f64) -> Result<Self> {
        if width < 2 {
            return Err(Error::Parameter(format!(
                "kernel width must be >= 2, got {width}"
            )));
        }
        let beta = beatty_beta(width, sigma);
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Parameter(format!(
                "no valid Kaiser-Bessel shape for width {width}, sigma {sigma}"
            )));
        }
        let i0_beta = bessel_i0(beta);
        let n = width * TABLE_RESOLUTION / 2 + 1;
        let half = width as f64 / 2.0;
        let table = (0..n)
            .map(|i| {
                let u = i as f64 / TABLE_RESOLUTION as f64;
                let t = (u / half).min(1.0);
                bessel_i0(beta * (1.0 - t * t).sqrt()) / i0_beta
            })
            .collect();
        Ok(Self {
            width,
            beta,
            i0_beta,
            table,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Exact (untabulated) kernel value.
    pub fn exact(&self, u: f64) -> f64 {
        let half = self.width as f64 / 2.0;
        if u.abs() > half {
            return 0.0;
        }
        let t = u / half;
        bessel_i0(self.beta * (1.0 - t * t).max(0.0).sqrt()) / self.i0_beta
    }

    /// Kernel value by linear interpolation into the table; zero outside the support.
    pub fn eval(&self, u: f64) -> f64 {
        let pos = u.abs() * TABLE_RESOLUTION as f64;
        let last = self.table.len() - 1;
        let i = pos.floor() as usize;
        if i >= last {
            return if pos <= last as f64 {
                self.table[last]
            } else {
                0.0
            };
        }
        let frac = pos - i as f64;
        self.table[i] + frac * (self.table[i + 1] - self.table[i])
    }

    /// Continuous Fourier transform `∫ φ(u) exp(2iπ u ν) du` of the (untabulated) kernel.
    pub fn fourier(&self, nu: f64) -> f64 {
        let j = self.width as f64;
        let a = PI * j * nu;
        let d = self.beta * self.beta - a * a;
        let shape = if d > 0.0 {
            let z = d.sqrt();
            z.sinh() / z
        } else if d < 0.0 {
            let z = (-d).sqrt();
            z.sin() / z
        } else {
            1.0
        };
        j * shape / self.i0_beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i0_reference_values() {
        // Abramowitz & Stegun table 9.8.
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-16);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_44).abs() < 1e-12);
        assert!((bessel_i0(10.0) - 2_815.716_628_466_254).abs() < 1e-9);
    }

    #[test]
    fn beta_for_default_parameters() {
        // pi * sqrt((6/2 * 1.5)^2 - 0.8)
        let expected = std::f64::consts::PI * (20.25f64 - 0.8).sqrt();
        assert!((beatty_beta(6, 2.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn table_is_positive_symmetric_and_peaked() {
        let k = KernelSpec::new(6, 2.0).unwrap();
        assert!(k.table().iter().all(|&v| v > 0.0));
        assert_eq!(k.table()[0], 1.0);
        assert!(k.table().windows(2).all(|w| w[1] <= w[0]));
        for &u in &[0.1, 0.77, 1.5, 2.999] {
            assert_eq!(k.eval(u), k.eval(-u));
        }
        assert_eq!(k.eval(3.0001), 0.0);
    }

    #[test]
    fn table_interpolation_tracks_exact_kernel() {
        let k = KernelSpec::new(6, 2.0).unwrap();
        let worst = (0..3000)
            .map(|i| i as f64 * 0.000_999_7)
            .map(|u| (k.eval(u) - k.exact(u)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst interpolation error {worst}");
    }

    #[test]
    fn fourier_transform_matches_quadrature() {
        let k = KernelSpec::new(6, 2.0).unwrap();
        // Composite Simpson on [-3, 3] of the exact kernel times cos(2 pi u nu).
        let n = 20_000;
        let h = 6.0 / n as f64;
        for &nu in &[0.0, 0.1, 0.25, 0.4] {
            let f = |u: f64| k.exact(u) * (2.0 * PI * u * nu).cos();
            let mut s = f(-3.0) + f(3.0);
            for i in 1..n {
                let u = -3.0 + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
            }
            let quad = s * h / 3.0;
            assert!(
                (quad - k.fourier(nu)).abs() < 1e-9 * quad.abs().max(1.0),
                "nu={nu}: quad {quad} vs closed form {}",
                k.fourier(nu)
            );
        }
    }

    #[test]
    fn rejects_narrow_kernel() {
        assert!(KernelSpec::new(1, 2.0).is_err());
    }
}
