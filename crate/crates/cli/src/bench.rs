//! Benchmark harness for the transfer-pipeline scaling claim: per time
//! point the per-site mode summation costs L modes x L sites, so runtime
//! should scale ~L^2; exact diagonalization is restricted to small sizes.

use crate::config::{Method, RunConfig};
use dephasing_chain::ed_oracle::evolve_modes;
use dephasing_chain::laplace::TalbotConfig;
use dephasing_chain::model::DiagonalInitialState;
use dephasing_chain::pipeline::transfer_talbot_modes;
use dephasing_chain::thermo::{mode_values, InitSpectrum, InversionMethod};
use dephasing_chain::{C64, ChainParams, Error};
use std::time::Instant;

pub struct BenchPoint {
    pub sites: usize,
    pub seconds: f64,
    pub alive_modes: usize,
    pub buffer_bytes: usize,
}

pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    pub exponent: Option<f64>,
    pub peak_rss_kb: Option<u64>,
}

/// Time one density evaluation per system size at fixed t.
pub fn run_bench(cfg: &RunConfig, sizes: &[usize], t: f64) -> Result<BenchReport, Error> {
    let mut points = Vec::new();
    for &l in sizes {
        let p = ChainParams::new(l, cfg.params.j, cfg.params.gamma)?;
        let point = match cfg.method {
            Method::TransferContour => bench_direct_sum(&p, l, t)?,
            Method::TransferTalbot => bench_talbot(&p, l, t)?,
            Method::Ed => {
                if l > 512 {
                    return Err(Error::SizeLimit(
                        "ed benchmark documents the L^6-class blowup and runs only to L=512".into(),
                    ));
                }
                bench_ed(&p, l, t)?
            }
            Method::Asymptotic => {
                return Err(Error::InvalidParams("nothing to benchmark for asymptotics".into()))
            }
        };
        points.push(point);
    }
    let exponent = if points.len() >= 2 {
        let xs: Vec<f64> = points.iter().map(|p| (p.sites as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.seconds.max(1e-9).ln()).collect();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(BenchReport { points, exponent, peak_rss_kb: peak_rss_kb() })
}

/// The paper-complexity pipeline: per-mode inversion then a direct
/// per-site mode sum (L alive modes x L sites).
fn bench_direct_sum(p: &ChainParams, l: usize, t: f64) -> Result<BenchPoint, Error> {
    let wall = InitSpectrum::Wall { sites: l };
    let f = mode_values(t, p, l, InversionMethod::Contour)?;
    let alive: Vec<(f64, C64)> = (1..=l)
        .filter_map(|n| {
            let w = wall.cq(n) * f[n - 1];
            (w.norm() > 1e-14).then(|| (2.0 * std::f64::consts::PI * n as f64 / l as f64, w))
        })
        .collect();
    let reps = (200_000 / l).max(1);
    let start = Instant::now();
    let mut profile = vec![0.0f64; l];
    for _ in 0..reps {
        use rayon::prelude::*;
        profile.par_iter_mut().enumerate().for_each(|(x, out)| {
            let mut acc = C64::new(0.0, 0.0);
            for &(q, w) in &alive {
                acc += w * (C64::new(0.0, 1.0) * q * x as f64).exp();
            }
            *out = acc.re / l as f64;
        });
    }
    let seconds = start.elapsed().as_secs_f64() / reps as f64;
    let buffer_bytes = profile.capacity() * 8 + alive.capacity() * 24 + f.capacity() * 8;
    Ok(BenchPoint { sites: l, seconds, alive_modes: alive.len(), buffer_bytes })
}

fn bench_talbot(p: &ChainParams, l: usize, t: f64) -> Result<BenchPoint, Error> {
    let init = DiagonalInitialState::domain_wall(l)?;
    let start = Instant::now();
    let modes = transfer_talbot_modes(&init, p, t, 0, &TalbotConfig::default(), true)?;
    let seconds = start.elapsed().as_secs_f64();
    let buffer_bytes = modes.values.len() * 16;
    Ok(BenchPoint { sites: l, seconds, alive_modes: l, buffer_bytes })
}

fn bench_ed(p: &ChainParams, l: usize, t: f64) -> Result<BenchPoint, Error> {
    let init = DiagonalInitialState::domain_wall(l)?;
    let start = Instant::now();
    let modes = evolve_modes(&init, p, &[t], 0)?;
    let seconds = start.elapsed().as_secs_f64();
    let buffer_bytes = modes[0].values.len() * 16;
    Ok(BenchPoint { sites: l, seconds, alive_modes: l, buffer_bytes })
}

/// Peak resident set size from /proc, when available.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return rest.trim().trim_end_matches(" kB").trim().parse().ok();
        }
    }
    None
}
