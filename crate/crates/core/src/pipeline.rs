//! Orchestration of the per-mode solvers into full observables: finite-L
//! transfer-Talbot mode sets, density profiles, and transferred
//! magnetization scans.

use crate::ed_oracle::evolve_modes;
use crate::error::Error;
use crate::laplace::{talbot_invert, TalbotConfig};
use crate::model::{dispersion, ChainParams, DiagonalInitialState, ModeDiagonals};
use crate::numeric::pairwise_sum_c64;
use crate::observables::{log_derivative, TransportMeta, TransportSeries};
use crate::thermo::{mode_values, InitSpectrum, InversionMethod};
use crate::transfer::gl0_finite;
use crate::{Result, C64};
use ndarray::Array2;
use rayon::prelude::*;
use std::f64::consts::PI;

/// g_l(t, q_n) for l = 0..=l_max by Talbot inversion of the finite-L
/// transfer-matrix resolvent column, for every mode of the chain.
///
/// Modes sharing omega reuse one inversion. `parallel = false` forces a
/// sequential sweep (used where single-threaded timings are wanted).
pub fn transfer_talbot_modes(
    init: &DiagonalInitialState,
    p: &ChainParams,
    t: f64,
    l_max: usize,
    cfg: &TalbotConfig,
    parallel: bool,
) -> Result<ModeDiagonals> {
    let l = p.sites;
    if init.sites() != l {
        return Err(Error::GridMismatch("initial state size != chain size".into()));
    }
    let l_keep = l_max.min(l - 1);
    let invert_mode = |n: usize| -> Result<Vec<C64>> {
        let q = 2.0 * PI * n as f64 / l as f64;
        let omega = dispersion(q, p.j);
        if omega.abs() < 1e-12 * 8.0 * p.j {
            let mut out = vec![C64::new(0.0, 0.0); l_keep + 1];
            out[0] = C64::new(1.0, 0.0);
            return Ok(out);
        }
        let cfg = TalbotConfig { m: cfg.auto_nodes(omega * t), ..*cfg };
        (0..=l_keep)
            .map(|l_off| {
                if t == 0.0 {
                    return Ok(if l_off == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
                }
                talbot_invert(|s| gl0_finite(s, q, l_off, p).unwrap_or(C64::new(f64::NAN, 0.0)), t, &cfg)
                    .map(|v| v.value)
                    .map_err(|e| Error::ModeFailure { mode: n, message: e.to_string() })
            })
            .collect()
    };
    // q and 2pi - q share omega and the resolvent column
    let idx: Vec<usize> = (1..=l / 2).collect();
    let half: Vec<Vec<C64>> = if parallel {
        idx.par_iter().map(|&n| invert_mode(n)).collect::<Result<_>>()?
    } else {
        idx.iter().map(|&n| invert_mode(n)).collect::<Result<_>>()?
    };
    let omega_zero = invert_mode(l)?;
    let mut values = Array2::zeros((l, l_keep + 1));
    for n in 1..=l {
        let base = if n == l {
            &omega_zero
        } else {
            &half[n.min(l - n) - 1]
        };
        let c = init.cq(n);
        for (off, &g) in base.iter().enumerate() {
            values[(n - 1, off)] = c * g;
        }
    }
    ModeDiagonals::new(l, l_keep, values, t)
}

/// Transferred magnetization from per-mode diagonal amplitudes g_0(t, q_n):
/// M = L/2 - Re[(1/L) sum_n g_0(q_n) c-included W_n] with
/// W_n = sum_{x=L/2}^{L-1} e^{i q_n x} in closed form.
pub fn transferred_from_modes(g0_with_c: &[C64], sites: usize) -> f64 {
    let l = sites;
    let h = l / 2;
    let i = C64::new(0.0, 1.0);
    let terms: Vec<C64> = (1..=l)
        .map(|n| {
            let q = 2.0 * PI * n as f64 / l as f64;
            let w = if n == l {
                C64::new((l - h) as f64, 0.0)
            } else {
                let eq = (i * q).exp();
                (i * q * h as f64).exp() * (1.0 - (i * q * (l - h) as f64).exp()) / (1.0 - eq)
            };
            g0_with_c[n - 1] * w
        })
        .collect();
    l as f64 / 2.0 - pairwise_sum_c64(&terms).re / l as f64
}

/// Which engine produces the per-mode g_0 values of a transport scan.
#[derive(Debug, Clone, Copy)]
pub enum TransportEngine {
    /// Thermodynamic-limit kernel per mode (pole + branch cut / Talbot).
    TransferThermo(InversionMethod),
    /// Exact finite-L mode evolution.
    Ed,
}

/// M(t) and beta(t) for the domain-wall initial state.
pub fn transport_scan(
    p: &ChainParams,
    times: &[f64],
    engine: TransportEngine,
) -> Result<TransportSeries> {
    let l = p.sites;
    let m_values: Vec<f64> = match engine {
        TransportEngine::TransferThermo(method) => {
            let wall = InitSpectrum::Wall { sites: l };
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                let f = mode_values(t, p, l, method)?;
                let g0: Vec<C64> = (1..=l).map(|n| wall.cq(n) * f[n - 1]).collect();
                out.push(transferred_from_modes(&g0, l));
            }
            out
        }
        TransportEngine::Ed => {
            let wall = DiagonalInitialState::domain_wall(l)?;
            let modes = evolve_modes(&wall, p, times, 0)?;
            modes
                .iter()
                .map(|md| {
                    let g0: Vec<C64> = (0..l).map(|k| md.values[(k, 0)]).collect();
                    transferred_from_modes(&g0, l)
                })
                .collect()
        }
    };
    let meta = TransportMeta {
        sites: l,
        j: p.j,
        gamma: p.gamma,
        initial: "domain-wall".into(),
        method: format!("{engine:?}"),
    };
    let mut series = TransportSeries::new(times.to_vec(), m_values, meta)?;
    log_derivative(&mut series);
    Ok(series)
}

/// Log-spaced time grid with the given points per decade.
pub fn log_times(t0: f64, t1: f64, per_decade: usize) -> Vec<f64> {
    let n = ((t1 / t0).log10() * per_decade as f64).ceil() as usize + 1;
    (0..n.max(2))
        .map(|k| t0 * (t1 / t0).powf(k as f64 / (n.max(2) - 1) as f64))
        .collect()
}
