//! The `ncrecon` command line: trajectory generation, density compensation, simulation,
//! reconstruction, training, evaluation and the built-in self test.
//!
//! Every failure prints one `error: ...` line to stderr and exits 1; malformed invocations
//! exit 2.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dcomp::pipe_menon;
use crate::error::{Error, Result};
use crate::learn::HistoryRow;
use crate::metrics::{ms_ssim_complex, psnr_complex, ssim_complex, DataRange};
use crate::pipeline::config::ExperimentConfig;
use crate::pipeline::experiment::{pipeline_plan, train_from_config, Acquisition};
use crate::pipeline::formats::{
    dc_from_tensors, dc_tensors, grid_from_tensors, kspace_from_tensors, kspace_tensors,
    model_from_tensors, model_tensors, read_image, read_tensors, read_trajectory, write_image,
    write_tensors, write_trajectory,
};
use crate::pipeline::phantom::{shepp_logan, warped_shepp_logan, Warp};
use crate::pipeline::render::export_png;
use crate::pipeline::simulate::simulate_kspace;
use crate::recon::{dc_adjoint_recon, unrolled_forward};
use crate::selftest;
use crate::trajectory::{cartesian_full, radial, spiral};

#[derive(Debug, Parser)]
#[command(
    name = "ncrecon",
    version,
    about = "Non-Cartesian MRI reconstruction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sampling trajectories.
    Traj {
        #[command(subcommand)]
        action: TrajAction,
    },
    /// Write a (optionally randomly warped) Shepp-Logan phantom.
    Phantom(PhantomArgs),
    /// Compute density-compensation weights for a trajectory.
    Dcomp(DcompArgs),
    /// Simulate noisy k-space samples of an image.
    Simulate(SimulateArgs),
    /// Reconstruct an image from k-space samples.
    Recon(ReconArgs),
    /// Train an unrolled model from a configuration file.
    Train(TrainArgs),
    /// Compare reconstructions against references.
    Eval(EvalArgs),
    /// Run the built-in verification suites.
    Selftest,
}

#[derive(Debug, Subcommand)]
enum TrajAction {
    /// Generate a trajectory CSV.
    Gen(TrajGenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TrajKind {
    Radial,
    Spiral,
    Cartesian,
}

#[derive(Debug, Args)]
struct TrajGenArgs {
    #[arg(long, value_enum)]
    kind: TrajKind,
    /// Spokes (radial), arms (spiral) or rows (cartesian).
    #[arg(long)]
    spokes: usize,
    /// Samples per spoke or arm, or columns (cartesian).
    #[arg(long)]
    samples: usize,
    /// Spiral turns.
    #[arg(long, default_value_t = 1.5)]
    turns: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Draw a random affine warp from this seed; the plain phantom when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DcompArgs {
    #[arg(long)]
    traj: PathBuf,
    /// Image grid as `HxW`.
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = crate::dcomp::DEFAULT_ITERATIONS)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    AdjointDc,
    Unrolled,
}

#[derive(Debug, Args)]
struct ReconArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    traj: PathBuf,
    /// Density weights; required by `adjoint-dc` and by models trained with DC.
    #[arg(long)]
    dc: Option<PathBuf>,
    #[arg(long)]
    kspace: PathBuf,
    /// Trained model; required by `unrolled`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Image grid `HxW`; taken from the k-space or density file when omitted.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Reference images, paired in order with `--test`.
    #[arg(long = "ref", required = true, num_args = 1..)]
    reference: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    test: Vec<PathBuf>,
    /// Label written to the `method` column.
    #[arg(long, default_value = "recon")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let dim = |v: &str| -> std::result::Result<usize, String> {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("invalid grid dimension {v:?}")),
        }
    };
    Ok((dim(h)?, dim(w)?))
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Runs one invocation (`args[0]` is the program name) and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Traj {
            action: TrajAction::Gen(a),
        } => traj_gen(a),
        Command::Phantom(a) => phantom(a),
        Command::Dcomp(a) => dcomp(a),
        Command::Simulate(a) => simulate(a),
        Command::Recon(a) => recon(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Selftest => return run_selftest(),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn traj_gen(a: TrajGenArgs) -> CliResult {
    let traj = match a.kind {
        TrajKind::Radial => radial(a.spokes, a.samples)?,
        TrajKind::Spiral => spiral(a.spokes, a.samples, a.turns)?,
        TrajKind::Cartesian => cartesian_full(a.spokes, a.samples)?,
    };
    write_trajectory(&a.out, &traj)?;
    Ok(())
}

fn phantom(a: PhantomArgs) -> CliResult {
    let img = match a.seed {
        Some(seed) => {
            let warp = Warp::random(&mut ChaCha8Rng::seed_from_u64(seed));
            warped_shepp_logan(a.size, a.size, &warp)?
        }
        None => shepp_logan(a.size, a.size)?,
    };
    write_image(&a.out, &img)?;
    if let Some(png) = &a.png {
        export_png(&img, png)?;
    }
    Ok(())
}

fn dcomp(a: DcompArgs) -> CliResult {
    let plan = pipeline_plan(read_trajectory(&a.traj)?, a.grid)?;
    let d = pipe_menon(&plan, a.iters)?;
    write_tensors(&a.out, &dc_tensors(&d, a.grid))?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let x = read_image(&a.image)?;
    let plan = pipeline_plan(read_trajectory(&a.traj)?, x.shape())?;
    let y = simulate_kspace(&x, &plan, a.noise, a.seed)?;
    write_tensors(&a.out, &kspace_tensors(&y, x.shape()))?;
    Ok(())
}

fn recon(a: ReconArgs) -> CliResult {
    let traj = read_trajectory(&a.traj)?;
    let (y, y_grid) = kspace_from_tensors(&read_tensors(&a.kspace)?)?;
    let dc = match &a.dc {
        Some(path) => {
            let tensors = read_tensors(path)?;
            Some((dc_from_tensors(&tensors)?, grid_from_tensors(&tensors)?))
        }
        None => None,
    };
    let dc_grid = dc.as_ref().and_then(|(_, g)| *g);
    if let (Some(g1), Some(g2)) = (y_grid, dc_grid) {
        if g1 != g2 {
            return Err(Failure::Run(Error::Shape {
                expected: g1,
                got: g2,
            }));
        }
    }
    let grid = a.grid.or(y_grid).or(dc_grid).ok_or_else(|| {
        Failure::Usage("no image grid recorded in the inputs; pass --grid HxW".into())
    })?;
    let plan = pipeline_plan(traj, grid)?;
    let d = dc.map(|(d, _)| d);
    let img = match a.method {
        Method::AdjointDc => {
            let d = d.ok_or_else(|| Failure::Usage("--method adjoint-dc requires --dc".into()))?;
            dc_adjoint_recon(&plan, &d, &y)?
        }
        Method::Unrolled => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| Failure::Usage("--method unrolled requires --model".into()))?;
            let model = model_from_tensors(&read_tensors(path)?)?;
            if model.use_dc() && d.is_none() {
                return Err(Failure::Usage(
                    "this model applies density compensation; pass --dc".into(),
                ));
            }
            unrolled_forward(&model, &plan, d.as_ref(), &y)?
        }
    };
    write_image(&a.out, &img)?;
    if let Some(png) = &a.png {
        export_png(&img, png)?;
    }
    Ok(())
}

fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("epoch,step,loss\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.epoch, r.step, format_float(r.loss));
    }
    s
}

fn train(a: TrainArgs) -> CliResult {
    let cfg = ExperimentConfig::read(&a.config)?;
    let acq = Acquisition::from_config(&cfg)?;
    let (model, history) = train_from_config(&cfg, &acq)?;
    write_tensors(&a.out, &model_tensors(&model))?;
    if let Some(path) = &a.history {
        write_text(path, &history_csv(&history))?;
    }
    Ok(())
}

/// `inf` / `-inf` / `nan` sentinels, otherwise the shortest round-tripping decimal.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

fn eval(a: EvalArgs) -> CliResult {
    if a.reference.len() != a.test.len() {
        return Err(Failure::Usage(format!(
            "{} --ref files but {} --test files",
            a.reference.len(),
            a.test.len()
        )));
    }
    let rows = a
        .reference
        .par_iter()
        .zip(&a.test)
        .map(|(r, t)| -> Result<[f64; 3]> {
            let (r, t) = (read_image(r)?, read_image(t)?);
            let p = psnr_complex(&r, &t, DataRange::Auto)?;
            let s = ssim_complex(&r, &t, DataRange::Auto)?;
            // Images too small for five scales have no MS-SSIM; record the sentinel.
            let m = match ms_ssim_complex(&r, &t, DataRange::Auto) {
                Err(Error::TooSmall { .. }) => f64::NAN,
                other => other?,
            };
            Ok([p, s, m])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("case,method,psnr,ssim,ms_ssim\n");
    for (i, [p, s, m]) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{}",
            a.method,
            format_float(*p),
            format_float(*s),
            format_float(*m)
        );
    }
    write_text(&a.out, &csv)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn run_selftest() -> i32 {
    let mut all = true;
    for o in selftest::run_all() {
        all &= o.passed;
        println!(
            "{} {:<22} {:>8.2?}  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.elapsed,
            o.detail
        );
    }
    if all {
        0
    } else {
        eprintln!("error: self test failed");
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("64x48"), Ok((64, 48)));
        assert_eq!(parse_grid("8X8"), Ok((8, 8)));
        assert!(parse_grid("64").is_err());
        assert!(parse_grid("0x4").is_err());
        assert!(parse_grid("ax4").is_err());
    }

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(f64::NAN), "nan");
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn history_has_header_and_rows() {
        let rows = [
            HistoryRow {
                epoch: 0,
                step: 0,
                loss: 0.5,
            },
            HistoryRow {
                epoch: 0,
                step: 1,
                loss: 0.25,
            },
        ];
        assert_eq!(history_csv(&rows), "epoch,step,loss\n0,0,0.5\n0,1,0.25\n");
    }
}
