//! On-disk formats.
//!
//! * **NCIM** complex image: `"NCIM"`, version `u8 = 1`, `u32` height, `u32` width, then
//!   `H·W` interleaved `(re, im)` `f64` values, row-major.
//! * **NCWT** tensor bundle: `"NCWT"`, version `u8 = 1`, `u32` tensor count, then per tensor
//!   `u16` name length, UTF-8 name, `u32` rank, `u32` dims, and the `f64` data.
//! * Trajectory CSV: header `kx,ky`, one point per line.
//!
//! All integers and floats are little-endian. Density weights, k-space samples and models
//! are NCWT bundles with fixed tensor names.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::recon::{CorrectionKind, CorrectionOp, UnrolledModel};
use crate::types::{ComplexImage, DcWeights, KSpaceSamples, Trajectory};

pub const IMAGE_MAGIC: &[u8; 4] = b"NCIM";
pub const TENSOR_MAGIC: &[u8; 4] = b"NCWT";
pub const FORMAT_VERSION: u8 = 1;

/// Byte reader that reports the offset of whatever it fails to read.
struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.offset < n {
            return Err(Error::Format {
                offset: self.bytes.len(),
                message: format!("truncated {what}: need {n} bytes at offset {}", self.offset),
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| self.error("size overflow"))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(Error::Format {
                offset: 0,
                message: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            });
        }
        let version = self.u8("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        Ok(())
    }

    fn error(&self, message: &str) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.to_string(),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(self.error(&format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.offset
            )));
        }
        Ok(())
    }
}

fn dim_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Parameter(format!("{what} {value} exceeds u32")))
}

pub fn encode_image(img: &ComplexImage) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(13 + 16 * img.len());
    out.extend_from_slice(IMAGE_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&dim_u32(img.height(), "height")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(img.width(), "width")?.to_le_bytes());
    for z in img.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_image(bytes: &[u8]) -> Result<ComplexImage> {
    let mut r = Reader::new(bytes);
    r.header(IMAGE_MAGIC)?;
    let h = r.u32("height")? as usize;
    let w = r.u32("width")? as usize;
    let start = r.offset;
    let values = r.f64s(2 * h * w, "pixel data")?;
    r.finish()?;
    let data = values
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    ComplexImage::new(h, w, data).map_err(|e| Error::Format {
        offset: start,
        message: e.to_string(),
    })
}

pub fn write_image(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    fs::write(path, encode_image(img)?)?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ComplexImage> {
    decode_image(&fs::read(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            dims,
            data,
        })
    }
}

pub fn encode_tensors(tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&dim_u32(tensors.len(), "tensor count")?.to_le_bytes());
    for t in tensors {
        let name = t.name.as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Parameter(format!("tensor name too long: {}", t.name)))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&dim_u32(t.dims.len(), "rank")?.to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&dim_u32(d, "dimension")?.to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut r = Reader::new(bytes);
    r.header(TENSOR_MAGIC)?;
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let len = r.u16("name length")? as usize;
        let at = r.offset;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| Error::Format {
                offset: at,
                message: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let ndim = r.u32("rank")? as usize;
        let mut dims = Vec::new();
        for _ in 0..ndim {
            dims.push(r.u32("dimension")? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| r.error("tensor size overflow"))?;
        let data = r.f64s(n, "tensor data")?;
        tensors.push(Tensor { name, dims, data });
    }
    r.finish()?;
    Ok(tensors)
}

pub fn write_tensors(path: impl AsRef<Path>, tensors: &[Tensor]) -> Result<()> {
    fs::write(path, encode_tensors(tensors)?)?;
    Ok(())
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    decode_tensors(&fs::read(path)?)
}

fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::Format {
            offset: 0,
            message: format!("missing tensor {name:?}"),
        })
}

fn expect_dims(t: &Tensor, rank: usize) -> Result<()> {
    if t.dims.len() != rank {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "tensor {:?} has rank {}, expected {rank}",
                t.name,
                t.dims.len()
            ),
        });
    }
    Ok(())
}

fn grid_tensor(shape: (usize, usize)) -> Tensor {
    Tensor {
        name: "grid".into(),
        dims: vec![2],
        data: vec![shape.0 as f64, shape.1 as f64],
    }
}

/// The image grid recorded in a tensor file, if any.
pub fn grid_from_tensors(tensors: &[Tensor]) -> Result<Option<(usize, usize)>> {
    match tensors.iter().find(|t| t.name == "grid") {
        None => Ok(None),
        Some(t) => {
            expect_dims(t, 1)?;
            let ok = t.data.len() == 2 && t.data.iter().all(|v| *v >= 1.0 && v.fract() == 0.0);
            if !ok {
                return Err(Error::Format {
                    offset: 0,
                    message: "grid tensor must hold two positive integers".into(),
                });
            }
            Ok(Some((t.data[0] as usize, t.data[1] as usize)))
        }
    }
}

/// Density weights as tensor `dc` of shape `[M]`, plus the grid they were computed for.
pub fn dc_tensors(d: &DcWeights, grid: (usize, usize)) -> Vec<Tensor> {
    vec![
        Tensor {
            name: "dc".into(),
            dims: vec![d.len()],
            data: d.values().to_vec(),
        },
        grid_tensor(grid),
    ]
}

pub fn dc_from_tensors(tensors: &[Tensor]) -> Result<DcWeights> {
    let t = find(tensors, "dc")?;
    expect_dims(t, 1)?;
    DcWeights::new(t.data.clone())
}

/// k-space samples as tensor `kspace` of shape `[M, 2]` (re, im), plus the image grid.
pub fn kspace_tensors(y: &KSpaceSamples, grid: (usize, usize)) -> Vec<Tensor> {
    vec![
        Tensor {
            name: "kspace".into(),
            dims: vec![y.len(), 2],
            data: y.values().iter().flat_map(|z| [z.re, z.im]).collect(),
        },
        grid_tensor(grid),
    ]
}

/// Samples and, when recorded, the image grid they were simulated on.
pub fn kspace_from_tensors(tensors: &[Tensor]) -> Result<(KSpaceSamples, Option<(usize, usize)>)> {
    let t = find(tensors, "kspace")?;
    expect_dims(t, 2)?;
    if t.dims[1] != 2 {
        return Err(Error::Format {
            offset: 0,
            message: "kspace tensor must have shape [M, 2]".into(),
        });
    }
    let y = KSpaceSamples::new(
        t.data
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect(),
    )?;
    Ok((y, grid_from_tensors(tensors)?))
}

/// `config = [K, B, kind, filters, use_dc]` (kind 0 = gradient step, 1 = small CNN) and the
/// flat parameter vector `params`.
pub fn model_tensors(model: &UnrolledModel) -> Vec<Tensor> {
    let (kind, filters) = match model.corrections()[0].kind() {
        CorrectionKind::GradientStep => (0.0, 0.0),
        CorrectionKind::SmallCnn { filters } => (1.0, filters as f64),
    };
    let params = model.flat_params();
    vec![
        Tensor {
            name: "config".into(),
            dims: vec![5],
            data: vec![
                model.n_iter() as f64,
                model.buffer_size() as f64,
                kind,
                filters,
                if model.use_dc() { 1.0 } else { 0.0 },
            ],
        },
        Tensor {
            name: "params".into(),
            dims: vec![params.len()],
            data: params,
        },
    ]
}

pub fn model_from_tensors(tensors: &[Tensor]) -> Result<UnrolledModel> {
    let config = find(tensors, "config")?;
    let bad = |m: &str| Error::Format {
        offset: 0,
        message: m.to_string(),
    };
    if config.data.len() != 5 || config.data.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(bad("config tensor must hold five non-negative integers"));
    }
    let [k, b, kind, filters, use_dc] = [0, 1, 2, 3, 4].map(|i| config.data[i] as usize);
    let kind = match kind {
        0 => CorrectionKind::GradientStep,
        1 => CorrectionKind::SmallCnn { filters },
        other => return Err(bad(&format!("unknown correction kind {other}"))),
    };
    let params = &find(tensors, "params")?.data;
    let per = kind.param_count(b);
    if k == 0 || params.len() != k * per {
        return Err(bad(&format!(
            "params tensor has {} values, expected {k} x {per}",
            params.len()
        )));
    }
    let ops = params
        .chunks_exact(per)
        .map(|p| CorrectionOp::new(kind, b, p.to_vec()))
        .collect::<Result<_>>()?;
    UnrolledModel::new(b, ops, use_dc == 1)
}

pub fn encode_trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("kx,ky\n");
    for [kx, ky] in traj.points() {
        s.push_str(&format!("{kx},{ky}\n"));
    }
    s
}

/// Parses a trajectory CSV. Line numbers in errors are 1-based and count the header.
pub fn decode_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "kx,ky" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `kx,ky`".into(),
            })
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            let field = fields.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("missing {name}"),
            })?;
            field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {name} {field:?}"),
            })
        };
        let kx = next("kx")?;
        let ky = next("ky")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "expected exactly two columns".into(),
            });
        }
        let inside = |v: f64| (-0.5..0.5).contains(&v);
        if !(inside(kx) && inside(ky)) {
            return Err(Error::DomainLine {
                line: line_no,
                kx,
                ky,
            });
        }
        points.push([kx, ky]);
    }
    Trajectory::new(points)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    fs::write(path, encode_trajectory_csv(traj))?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    decode_trajectory_csv(&fs::read_to_string(path)?)
}
