//! Domain types: chain parameters, momentum grid, diagonal initial states,
//! correlation matrices, and the Fourier map between momentum-mode diagonal
//! amplitudes g_l(t, q_n) and the real-space correlation matrix C_{x,y}(t).

use crate::error::Error;
use crate::numeric::pairwise_sum;
use crate::{Result, C64};
use ndarray::Array2;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// Full matrix reconstruction above this size must be requested explicitly.
pub const DENSE_SIZE_LIMIT: usize = 4096;

/// Static parameters of the dephased XX ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    /// Number of spins L.
    pub sites: usize,
    /// Hopping strength J > 0.
    pub j: f64,
    /// Dephasing rate gamma >= 0.
    pub gamma: f64,
}

impl ChainParams {
    pub fn new(sites: usize, j: f64, gamma: f64) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 sites, got {sites}")));
        }
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::InvalidParams(format!("hopping must be positive, got {j}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("dephasing must be non-negative, got {gamma}")));
        }
        Ok(ChainParams { sites, j, gamma })
    }
}

/// Mode frequency omega(q) = 8 J sin(q/2), non-negative on q in [0, 2pi].
pub fn dispersion(q: f64, j: f64) -> f64 {
    8.0 * j * (0.5 * q).sin()
}

/// One allowed momentum of the periodic chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumMode {
    /// Mode index n in 1..=L.
    pub n: usize,
    /// q_n = 2 pi n / L.
    pub q: f64,
    /// omega(q_n).
    pub omega: f64,
}

/// All modes q_n = 2 pi n / L for n = 1..=L. The n = L mode (q = 2 pi,
/// omega = 0) carries the conserved total magnetization and is special-cased
/// by the Laplace-domain formulas.
pub fn momentum_grid(sites: usize, j: f64) -> Result<Vec<MomentumMode>> {
    if sites < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 sites, got {sites}")));
    }
    Ok((1..=sites)
        .map(|n| {
            let q = 2.0 * PI * n as f64 / sites as f64;
            MomentumMode { n, q, omega: dispersion(q, j) }
        })
        .collect())
}

/// A diagonal initial correlation matrix C_{x,y}(0) = delta_{x,y} c_x,
/// together with its momentum transform c(q_n) = sum_x e^{-i q_n x} c_x.
///
/// Non-diagonal initial states are rejected at the type level: the transfer
/// pipeline needs the first resolvent column only, which is exactly the
/// diagonal case.
#[derive(Debug, Clone)]
pub struct DiagonalInitialState {
    c: Vec<f64>,
    cq: Vec<C64>,
}

impl DiagonalInitialState {
    /// Build from a real diagonal profile; requires |c_x| <= 1.
    pub fn from_profile(c: Vec<f64>) -> Result<Self> {
        if c.len() < 2 {
            return Err(Error::InvalidParams("initial profile needs at least 2 sites".into()));
        }
        if let Some(bad) = c.iter().find(|v| v.abs() > 1.0 + 1e-12 || !v.is_finite()) {
            return Err(Error::InvalidParams(format!("|c_x| <= 1 violated: {bad}")));
        }
        let cq = fourier_modes(&c);
        Ok(DiagonalInitialState { c, cq })
    }

    /// Single excitation at site 0: c_x = delta_{x,0} (all other spins down).
    pub fn delta(sites: usize) -> Result<Self> {
        let mut c = vec![0.0; sites];
        c[0] = 1.0;
        Self::from_profile(c)
    }

    /// Domain wall: spins up for x < L/2, down for x >= L/2. The diagonal of
    /// C is minus the magnetization, so c_x = -1 on the up half.
    pub fn domain_wall(sites: usize) -> Result<Self> {
        let c = (0..sites).map(|x| if x < sites / 2 { -1.0 } else { 1.0 }).collect();
        Self::from_profile(c)
    }

    pub fn sites(&self) -> usize {
        self.c.len()
    }

    pub fn profile(&self) -> &[f64] {
        &self.c
    }

    /// c(q_n) for the mode with index n in 1..=L.
    pub fn cq(&self, n: usize) -> C64 {
        self.cq[n % self.c.len()]
    }

    /// Parse from CSV text with a header containing a column named `c`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParams("empty initial-state csv".into()))?;
        let col = header
            .split(',')
            .position(|h| h.trim() == "c")
            .ok_or_else(|| Error::InvalidParams("csv is missing a 'c' column".into()))?;
        let mut c = Vec::new();
        for line in lines {
            let field = line.split(',').nth(col).ok_or_else(|| {
                Error::InvalidParams(format!("row has no column {col}: {line}"))
            })?;
            c.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParams(format!("bad value '{field}': {e}")))?,
            );
        }
        Self::from_profile(c)
    }
}

/// DFT c(q_n) = sum_x e^{-i q_n x} c_x indexed by n mod L (so index 0 holds
/// the q = 2 pi mode).
fn fourier_modes(c: &[f64]) -> Vec<C64> {
    let l = c.len();
    let mut buf: Vec<C64> = c.iter().map(|&v| C64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    buf
}

/// The L x L two-point correlation matrix at a single time.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub entries: Array2<C64>,
    pub time: f64,
    /// True when off-diagonals beyond the requested range were zero-filled
    /// rather than reconstructed.
    pub truncated: bool,
}

impl CorrelationMatrix {
    pub fn new(entries: Array2<C64>, time: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidParams("correlation matrix must be square".into()));
        }
        Ok(CorrelationMatrix { entries, time, truncated: false })
    }

    pub fn diagonal(init: &DiagonalInitialState) -> Self {
        let l = init.sites();
        let mut m = Array2::zeros((l, l));
        for (x, &v) in init.profile().iter().enumerate() {
            m[(x, x)] = C64::new(v, 0.0);
        }
        CorrelationMatrix { entries: m, time: 0.0, truncated: false }
    }

    pub fn sites(&self) -> usize {
        self.entries.nrows()
    }

    /// max |C_{y,x} - conj(C_{x,y})|.
    pub fn hermiticity_defect(&self) -> f64 {
        let l = self.sites();
        let mut worst: f64 = 0.0;
        for x in 0..l {
            for y in x..l {
                worst = worst.max((self.entries[(y, x)] - self.entries[(x, y)].conj()).norm());
            }
        }
        worst
    }

    /// Even/odd structure defect: max of |Im C| on even diagonals and |Re C|
    /// on odd diagonals (distance measured on the ring).
    pub fn even_odd_defect(&self) -> f64 {
        let l = self.sites();
        let mut worst: f64 = 0.0;
        for x in 0..l {
            for y in 0..l {
                let d = (x + l - y) % l;
                let dist = d.min(l - d);
                let v = self.entries[(x, y)];
                worst = worst.max(if dist % 2 == 0 { v.im.abs() } else { v.re.abs() });
            }
        }
        worst
    }

    /// Sum of the diagonal (conserved under the evolution).
    pub fn trace(&self) -> C64 {
        let d: Vec<C64> = (0..self.sites()).map(|x| self.entries[(x, x)]).collect();
        crate::numeric::pairwise_sum_c64(&d)
    }

    /// CSV rows "x,y,re,im".
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,re,im")?;
        let l = self.sites();
        for x in 0..l {
            for y in 0..l {
                let v = self.entries[(x, y)];
                writeln!(w, "{x},{y},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// JSON envelope {L, t, entries} with entries as [re, im] pairs in row
    /// major order.
    pub fn to_json(&self) -> serde_json::Value {
        let l = self.sites();
        let rows: Vec<Vec<[f64; 2]>> = (0..l)
            .map(|x| (0..l).map(|y| [self.entries[(x, y)].re, self.entries[(x, y)].im]).collect())
            .collect();
        serde_json::json!({ "L": l, "t": self.time, "entries": rows })
    }
}

/// Momentum-space diagonal amplitudes g_l(t, q_n) for l = 0..=l_max over the
/// full mode grid, at a single time.
#[derive(Debug, Clone)]
pub struct ModeDiagonals {
    /// Number of sites L (grid has L modes).
    pub sites: usize,
    /// Largest reconstructed off-diagonal offset.
    pub l_max: usize,
    /// `values[(n - 1, l)]` = g_l(t, q_n), n = 1..=L.
    pub values: Array2<C64>,
    pub time: f64,
}

impl ModeDiagonals {
    pub fn new(sites: usize, l_max: usize, values: Array2<C64>, time: f64) -> Result<Self> {
        if values.nrows() != sites || values.ncols() != l_max + 1 {
            return Err(Error::GridMismatch(format!(
                "expected {} modes x {} offsets, got {} x {}",
                sites,
                l_max + 1,
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(ModeDiagonals { sites, l_max, values, time })
    }
}

/// Inverse transform of one diagonal: d_l(x) = C_{(x + l) mod L, x}
/// = i^l (1/L) sum_n g_l(q_n) e^{i q_n (x + l/2)}.
///
/// Returned as a length-L vector over x, computed with an FFT.
pub fn diagonal_from_modes(g_l: &[C64], l_off: usize, sites: usize) -> Vec<C64> {
    let l = sites;
    let phase_il = C64::new(0.0, 1.0).powu(l_off as u32 % 4);
    let mut buf: Vec<C64> = (0..l)
        .map(|k| {
            // k = n mod L; q_n = 2 pi n / L
            let n = if k == 0 { l } else { k };
            let q = 2.0 * PI * n as f64 / l as f64;
            g_l[n - 1] * (C64::new(0.0, 1.0) * q * (l_off as f64 / 2.0)).exp()
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(l).process(&mut buf);
    buf.into_iter().map(|v| v * phase_il / l as f64).collect()
}

/// Rebuild the real-space correlation matrix from momentum-mode data.
///
/// Diagonals with ring distance d = 0..=min(l_max, L/2) are reconstructed
/// from g_d; their Hermitian partners fill the complementary diagonals.
/// Anything further out is zero and the matrix is flagged truncated.
pub fn assemble_correlations(g: &ModeDiagonals, dense_limit: Option<usize>) -> Result<CorrelationMatrix> {
    let l = g.sites;
    let limit = dense_limit.unwrap_or(DENSE_SIZE_LIMIT);
    if l > limit {
        return Err(Error::SizeLimit(format!(
            "full matrix reconstruction for L = {l} exceeds the limit {limit}"
        )));
    }
    let half = l / 2;
    let l_eff = g.l_max.min(half);
    let mut m = Array2::zeros((l, l));
    for d in 0..=l_eff {
        let gl: Vec<C64> = (0..l).map(|i| g.values[(i, d)]).collect();
        let diag = diagonal_from_modes(&gl, d, l);
        for (x, &v) in diag.iter().enumerate() {
            m[((x + d) % l, x)] = v;
            if d != 0 && d != l - d {
                m[(x, (x + d) % l)] = v.conj();
            }
        }
    }
    let truncated = l_eff < half;
    Ok(CorrelationMatrix { entries: m, time: g.time, truncated })
}

/// Round-trip check value: sum_x c_x recomputed from the stored transform.
pub fn transform_consistency(init: &DiagonalInitialState) -> f64 {
    let l = init.sites();
    let recomputed = fourier_modes(init.profile());
    let diffs: Vec<f64> = (0..l).map(|k| (recomputed[k] - init.cq[k]).norm()).collect();
    let scale: f64 = pairwise_sum(init.profile()).abs().max(1.0);
    diffs.into_iter().fold(0.0_f64, f64::max) / scale
}
