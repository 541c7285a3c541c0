//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ncrecon::metrics::{psnr_complex, DataRange};
use ncrecon::pipeline::experiment::{phantom_set, simulate_set, train_from_config, Acquisition};
use ncrecon::pipeline::formats::{
    dc_tensors, decode_image, decode_tensors, decode_trajectory_csv, encode_image, encode_tensors,
    encode_trajectory_csv, kspace_from_tensors, kspace_tensors, model_from_tensors, model_tensors,
    read_tensors, write_tensors,
};
use ncrecon::pipeline::ExperimentConfig;
use ncrecon::recon::{dc_adjoint_recon, unrolled_forward, UnrolledModel};
use ncrecon::selftest::{self, CheckOutcome};
use ncrecon::{Complex64, ComplexImage, KSpaceSamples, Trajectory};

struct Verdict {
    passed: bool,
    detail: String,
}

fn report(index: usize, title: &str, elapsed: Duration, v: &Verdict) -> bool {
    println!(
        "{} criterion {index}: {title} [{elapsed:.1?}] {}",
        if v.passed { "PASS" } else { "FAIL" },
        v.detail
    );
    v.passed
}

fn from_check(outcome: CheckOutcome, budget: Option<Duration>) -> Verdict {
    let in_time = budget.is_none_or(|b| outcome.elapsed < b);
    let mut detail = outcome.detail;
    if let Some(b) = budget {
        detail.push_str(&format!(", budget {b:?}"));
    }
    Verdict {
        passed: outcome.passed && in_time,
        detail,
    }
}

fn guarded(f: impl FnOnce() -> Result<Verdict, String>) -> Verdict {
    f().unwrap_or_else(|e| Verdict {
        passed: false,
        detail: format!("error: {e}"),
    })
}

/// Mean validation PSNR of the DC adjoint and of unrolled models trained with and without
/// density compensation, on the default 64×64 radial(40, 128) experiment.
fn ordering() -> Result<Verdict, String> {
    let e = |e: ncrecon::Error| e.to_string();
    let base = ExperimentConfig {
        seed: 1,
        epochs: 15,
        max_steps: Some(300),
        ..Default::default()
    };
    let acq = Acquisition::from_config(&base).map_err(e)?;
    let val = phantom_set(20, base.size, 777).map_err(e)?;
    let ys = simulate_set(&val, &acq.plan, base.noise, 778).map_err(e)?;
    let mean_psnr = |recon: &dyn Fn(&KSpaceSamples) -> ncrecon::Result<ComplexImage>| {
        let mut total = 0.0;
        for (x, y) in val.iter().zip(&ys) {
            total += psnr_complex(x, &recon(y)?, DataRange::Auto)?;
        }
        Ok::<f64, ncrecon::Error>(total / val.len() as f64)
    };
    let adjoint = mean_psnr(&|y| dc_adjoint_recon(&acq.plan, &acq.d, y)).map_err(e)?;
    let mut trained = Vec::new();
    for use_dc in [true, false] {
        let cfg = ExperimentConfig {
            use_dc,
            ..base.clone()
        };
        let (model, history) = train_from_config(&cfg, &acq).map_err(e)?;
        if history.len() != 300 {
            return Err(format!("expected 300 steps, ran {}", history.len()));
        }
        let d = use_dc.then_some(&acq.d);
        trained.push(mean_psnr(&|y| unrolled_forward(&model, &acq.plan, d, y)).map_err(e)?);
    }
    let (with_dc, no_dc) = (trained[0], trained[1]);
    Ok(Verdict {
        passed: with_dc >= no_dc + 1.0 && with_dc >= adjoint + 0.5,
        detail: format!(
            "mean PSNR: unrolled+DC {with_dc:.3} dB, unrolled no DC {no_dc:.3} dB, DC adjoint {adjoint:.3} dB"
        ),
    })
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ncrecon")
}

fn cli(dir: &Path, args: &str) -> Result<(), String> {
    let out = Command::new(bin())
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`ncrecon {args}` failed: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

const CHAIN_CONFIG: &str = "\
K = 2
B = 1
filters = 4
lr = 1e-3
epochs = 2
max_steps = 3
seed = 9
size = 128
spokes = 24
samples = 128
train_cases = 2
";

/// phantom → trajectory → density weights → simulation → adjoint and unrolled
/// reconstructions → metrics, in a fresh directory. Returns the metrics CSV bytes.
fn cli_chain() -> Result<Vec<u8>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    std::fs::write(d.join("cfg.txt"), CHAIN_CONFIG).map_err(|e| e.to_string())?;
    let steps = [
        "phantom --size 128 --seed 3 --out x.ncim",
        "traj gen --kind radial --spokes 24 --samples 128 --out t.csv",
        "dcomp --traj t.csv --grid 128x128 --iters 10 --out d.bin",
        "simulate --image x.ncim --traj t.csv --noise 0.005 --seed 4 --out y.bin",
        "recon --method adjoint-dc --traj t.csv --dc d.bin --kspace y.bin --out adj.ncim --png adj.png",
        "train --config cfg.txt --out m.ncwt --history hist.csv",
        "recon --method unrolled --traj t.csv --dc d.bin --kspace y.bin --model m.ncwt --out unr.ncim",
        "eval --ref x.ncim x.ncim --test adj.ncim unr.ncim --out metrics.csv",
    ];
    for args in steps {
        cli(d, args)?;
    }
    let csv = std::fs::read(d.join("metrics.csv")).map_err(|e| e.to_string())?;
    if String::from_utf8_lossy(&csv).contains("nan") {
        return Err("metrics.csv holds an undefined value".into());
    }
    Ok(csv)
}

fn random_values(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    // Values whose bit patterns a lossy writer would disturb.
    let special = [-0.0, f64::MIN_POSITIVE / 4.0, 1.0 / 3.0, f64::MAX, -1e-300];
    for (slot, s) in v.iter_mut().zip(special) {
        *slot = s;
    }
    v
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Encode → decode → encode for every format, compared bit for bit; plus a saved and
/// reloaded model reproducing its reconstruction exactly.
fn round_trips() -> Result<String, String> {
    let e = |e: ncrecon::Error| e.to_string();
    let re = random_values(96, 11);
    let im = random_values(96, 12);
    let data: Vec<Complex64> = re
        .iter()
        .zip(&im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let img = ComplexImage::new(8, 12, data.clone()).map_err(e)?;
    let bytes = encode_image(&img).map_err(e)?;
    let back = decode_image(&bytes).map_err(e)?;
    let flat = |x: &ComplexImage| {
        bits(
            &x.data()
                .iter()
                .flat_map(|z| [z.re, z.im])
                .collect::<Vec<_>>(),
        )
    };
    if flat(&back) != flat(&img) || encode_image(&back).map_err(e)? != bytes {
        return Err("image round trip changed bits".into());
    }

    let y = KSpaceSamples::new(data).map_err(e)?;
    let d = ncrecon::DcWeights::new(
        random_values(40, 13)
            .iter()
            .map(|v| v.abs() + 0.5)
            .collect(),
    )
    .map_err(e)?;
    let model = ncrecon::learn::init_model(
        ncrecon::recon::CorrectionKind::SmallCnn { filters: 3 },
        2,
        2,
        true,
        5,
    )
    .map_err(e)?;
    for tensors in [
        kspace_tensors(&y, (8, 12)),
        dc_tensors(&d, (8, 12)),
        model_tensors(&model),
    ] {
        let bytes = encode_tensors(&tensors).map_err(e)?;
        let back = decode_tensors(&bytes).map_err(e)?;
        let same = back.len() == tensors.len()
            && back.iter().zip(&tensors).all(|(a, b)| {
                a.name == b.name && a.dims == b.dims && bits(&a.data) == bits(&b.data)
            });
        if !same || encode_tensors(&back).map_err(e)? != bytes {
            return Err(format!("tensor round trip changed {}", tensors[0].name));
        }
    }
    let (y_back, grid) = kspace_from_tensors(&kspace_tensors(&y, (8, 12))).map_err(e)?;
    if y_back != y || grid != Some((8, 12)) {
        return Err("k-space bundle round trip differs".into());
    }

    let points: Vec<[f64; 2]> = random_values(60, 14)
        .chunks_exact(2)
        .map(|p| [p[0] * 0.5, p[1] * 0.49])
        .filter(|p| p.iter().all(|c| (-0.5..0.5).contains(c)))
        .collect();
    let traj = Trajectory::new(points).map_err(e)?;
    let text = encode_trajectory_csv(&traj);
    let traj_back = decode_trajectory_csv(&text).map_err(e)?;
    let tb = |t: &Trajectory| bits(&t.points().iter().flatten().copied().collect::<Vec<_>>());
    if tb(&traj_back) != tb(&traj) || encode_trajectory_csv(&traj_back) != text {
        return Err("trajectory round trip changed bits".into());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.ncwt");
    write_tensors(&path, &model_tensors(&model)).map_err(e)?;
    let loaded: UnrolledModel = model_from_tensors(&read_tensors(&path).map_err(e)?).map_err(e)?;
    let acq = Acquisition::radial(16, 8, 32, 10).map_err(e)?;
    let x = ncrecon::pipeline::shepp_logan(16, 16).map_err(e)?;
    let ys = acq.plan.forward(&x).map_err(e)?;
    let a = unrolled_forward(&model, &acq.plan, Some(&acq.d), &ys).map_err(e)?;
    let b = unrolled_forward(&loaded, &acq.plan, Some(&acq.d), &ys).map_err(e)?;
    if flat(&a) != flat(&b) {
        return Err("reloaded model reconstructs differently".into());
    }
    Ok("image, k-space, density, model and trajectory files round-trip bit-exactly".into())
}

fn determinism() -> Result<Verdict, String> {
    let first = cli_chain()?;
    let second = cli_chain()?;
    let formats = round_trips()?;
    let rows = String::from_utf8_lossy(&first).lines().count() - 1;
    Ok(Verdict {
        passed: first == second,
        detail: format!(
            "metrics.csv {} bytes, {rows} rows, identical across runs: {}; {formats}",
            first.len(),
            first == second
        ),
    })
}

fn selftest_binary() -> Result<Verdict, String> {
    let out = Command::new(bin())
        .arg("selftest")
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let passes = stdout.lines().filter(|l| l.starts_with("PASS")).count();
    Ok(Verdict {
        passed: out.status.success() && passes == 5,
        detail: format!("exit {:?}, {passes}/5 suites passed", out.status.code()),
    })
}

fn main() {
    type Criterion = (&'static str, Box<dyn FnOnce() -> Verdict>);
    let criteria: Vec<Criterion> = vec![
        (
            "NUFFT matches the exact NDFT",
            Box::new(|| from_check(selftest::nufft_oracle(), Some(Duration::from_secs(5)))),
        ),
        (
            "forward and adjoint NUFFT are adjoint",
            Box::new(|| from_check(selftest::adjointness(), None)),
        ),
        (
            "density compensation fixed point and stabilization",
            Box::new(|| from_check(selftest::density_compensation(), None)),
        ),
        (
            "unrolled-model gradients match finite differences",
            Box::new(|| {
                from_check(
                    selftest::gradient_exactness(),
                    Some(Duration::from_secs(60)),
                )
            }),
        ),
        (
            "data consistency ordering after 300 training steps",
            Box::new(|| {
                let start = Instant::now();
                let mut v = guarded(ordering);
                let budget = Duration::from_secs(30 * 60);
                v.passed &= start.elapsed() < budget;
                v
            }),
        ),
        (
            "metric sanity",
            Box::new(|| from_check(selftest::metric_sanity(), None)),
        ),
        (
            "deterministic CLI chain and bit-exact formats",
            Box::new(|| guarded(determinism)),
        ),
        (
            "selftest binary passes",
            Box::new(|| {
                let start = Instant::now();
                let mut v = guarded(selftest_binary);
                v.passed &= start.elapsed() < Duration::from_secs(5 * 60);
                v
            }),
        ),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        if !report(i + 1, title, start.elapsed(), &verdict) {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
