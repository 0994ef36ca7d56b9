//! Physical observables and analysis: magnetization and current profiles,
//! transferred magnetization M(t) and its running exponent beta(t), and
//! diffusion-constant / power-law fits.

use crate::ed_oracle::EvolutionResult;
use crate::error::Error;
use crate::model::CorrelationMatrix;
use crate::numeric::pairwise_sum;
use crate::{Result, C64};
use serde::Serialize;
use std::io::Write;

/// Magnetization density <sigma_3^x> = -Re C_{x,x}. Fails if the diagonal
/// has picked up a non-negligible imaginary part.
pub fn magnetization_profile(c: &CorrelationMatrix) -> Result<Vec<f64>> {
    let l = c.sites();
    let mut out = Vec::with_capacity(l);
    let scale = diag_scale(c);
    for x in 0..l {
        let v: C64 = c.entries[(x, x)];
        if v.im.abs() > 1e-10 * scale {
            return Err(Error::StructureViolation(format!(
                "diagonal entry {x} has imaginary part {:.3e}",
                v.im
            )));
        }
        out.push(-v.re);
    }
    Ok(out)
}

/// Current on the bond (x, x+1): j_x = 4 J Im C_{x+1,x}, periodic.
/// Valid for states evolved from diagonal initial data, where the first
/// off-diagonal is purely imaginary; the real part is checked.
pub fn current_profile(c: &CorrelationMatrix, j: f64) -> Result<Vec<f64>> {
    let l = c.sites();
    let mut out = Vec::with_capacity(l);
    let scale = diag_scale(c);
    for x in 0..l {
        let v = c.entries[((x + 1) % l, x)];
        if v.re.abs() > 1e-8 * scale.max(v.im.abs()) {
            return Err(Error::StructureViolation(format!(
                "first off-diagonal at {x} has real part {:.3e}",
                v.re
            )));
        }
        out.push(4.0 * j * v.im);
    }
    Ok(out)
}

fn diag_scale(c: &CorrelationMatrix) -> f64 {
    (0..c.sites()).map(|x| c.entries[(x, x)].norm()).fold(1e-30, f64::max).max(1.0)
}

/// Transferred magnetization M = sum_{x >= ceil((L-1)/2)} m_x + L/2 for a
/// magnetization profile m. Zero at t = 0 for the ideal domain wall; for an
/// even chain the sum starts at L/2, where the wall sits.
pub fn transferred_magnetization(m: &[f64]) -> f64 {
    let l = m.len();
    let start = (l - 1).div_ceil(2);
    pairwise_sum(&m[start..]) + l as f64 / 2.0
}

/// Metadata attached to a transport series.
#[derive(Debug, Clone, Serialize, Default)]
pub struct TransportMeta {
    pub sites: usize,
    pub j: f64,
    pub gamma: f64,
    pub initial: String,
    pub method: String,
}

/// Time series of the transferred magnetization and its log-derivative.
#[derive(Debug, Clone)]
pub struct TransportSeries {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    /// beta(t) = d log M / d log t; None where M <= 0 makes it undefined.
    pub beta: Vec<Option<f64>>,
    pub meta: TransportMeta,
}

impl TransportSeries {
    pub fn new(times: Vec<f64>, m: Vec<f64>, meta: TransportMeta) -> Result<Self> {
        if times.len() != m.len() {
            return Err(Error::InvalidParams("times and M must have equal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("times must be strictly increasing".into()));
        }
        let beta = vec![None; times.len()];
        Ok(TransportSeries { times, m, beta, meta })
    }

    /// CSV rows "t,M,beta" (beta empty where undefined).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,M,beta")?;
        for i in 0..self.times.len() {
            match self.beta[i] {
                Some(b) => writeln!(w, "{:.12e},{:.12e},{:.12e}", self.times[i], self.m[i], b)?,
                None => writeln!(w, "{:.12e},{:.12e},", self.times[i], self.m[i])?,
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "meta": self.meta,
            "t": self.times,
            "M": self.m,
            "beta": self.beta,
        })
    }
}

/// Fill beta(t) = d log M / d log t by central differences in log-log,
/// one-sided at the ends. Points with M <= 0 (and their neighbours' stencil
/// uses) are skipped and left undefined.
pub fn log_derivative(series: &mut TransportSeries) {
    let n = series.times.len();
    let lt: Vec<f64> = series.times.iter().map(|t| t.ln()).collect();
    let lm: Vec<Option<f64>> =
        series.m.iter().map(|&m| if m > 0.0 { Some(m.ln()) } else { None }).collect();
    for i in 0..n {
        if lm[i].is_none() {
            series.beta[i] = None;
            continue;
        }
        // prefer the central stencil, else fall back to a one-sided one
        let candidates: [(usize, usize); 3] = [
            (i.saturating_sub(1), (i + 1).min(n - 1)),
            (i, (i + 1).min(n - 1)),
            (i.saturating_sub(1), i),
        ];
        series.beta[i] = candidates.iter().find_map(|&(a, b)| match (lm[a], lm[b]) {
            (Some(ya), Some(yb)) if a != b => Some((yb - ya) / (lt[b] - lt[a])),
            _ => None,
        });
    }
}

/// Optional smoothing for beta: windowed least-squares quadratic in
/// (log t, log M), evaluated as the slope at the window center. Window is
/// the half-width in points.
pub fn log_derivative_smoothed(series: &mut TransportSeries, half_width: usize) {
    let n = series.times.len();
    let lt: Vec<f64> = series.times.iter().map(|t| t.ln()).collect();
    let lm: Vec<Option<f64>> =
        series.m.iter().map(|&m| if m > 0.0 { Some(m.ln()) } else { None }).collect();
    for i in 0..n {
        let lo = i.saturating_sub(half_width);
        let hi = (i + half_width).min(n - 1);
        let pts: Vec<(f64, f64)> = (lo..=hi)
            .filter_map(|k| lm[k].map(|y| (lt[k] - lt[i], y)))
            .collect();
        series.beta[i] = if pts.len() >= 3 { quadratic_slope(&pts) } else { None };
    }
}

/// Slope at x = 0 of the least-squares quadratic through (x, y) points.
fn quadratic_slope(pts: &[(f64, f64)]) -> Option<f64> {
    // normal equations for y = c0 + c1 x + c2 x^2
    let n = pts.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sx += x;
        sx2 += x * x;
        sx3 += x * x * x;
        sx4 += x * x * x * x;
        sy += y;
        sxy += x * y;
        sx2y += x * x * y;
    }
    let m = [[n, sx, sx2], [sx, sx2, sx3], [sx2, sx3, sx4]];
    let rhs = [sy, sxy, sx2y];
    solve3(m, rhs).map(|c| c[1])
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &c| m[a][col].abs().partial_cmp(&m[c][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for k in col..3 {
                m[r][k] -= f * m[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let mut acc = b[r];
        for k in r + 1..3 {
            acc -= m[r][k] * x[k];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}

/// Result of the diffusion-constant fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiffusionFit {
    pub d: f64,
    pub r_squared: f64,
    /// Set when R^2 < 0.99.
    pub poor_fit: bool,
}

/// Fit sigma^2(t) = 2 D t + const by least squares over density profiles
/// from a single-peak (delta release) initial state. Site index x is taken
/// as the signed ring distance from the release site.
pub fn fit_diffusion(profiles: &[(f64, Vec<f64>)]) -> Result<DiffusionFit> {
    if profiles.len() < 2 {
        return Err(Error::TooFewPoints { need: 2, got: profiles.len() });
    }
    let mut pts = Vec::with_capacity(profiles.len());
    for (t, rho) in profiles {
        pts.push((*t, profile_variance(rho)));
    }
    let (slope, _icept, r2) = linear_fit(&pts)?;
    let d = slope / 2.0;
    Ok(DiffusionFit { d, r_squared: r2, poor_fit: r2 < 0.99 })
}

/// Spatial variance of a (near-)normalized single-peak profile on the ring,
/// measured as signed distance from site 0.
pub fn profile_variance(rho: &[f64]) -> f64 {
    let n = rho.len() as i64;
    let mut w = Vec::with_capacity(rho.len());
    let mut wx = Vec::with_capacity(rho.len());
    let mut wx2 = Vec::with_capacity(rho.len());
    for (x, &v) in rho.iter().enumerate() {
        let d = signed_distance(x as i64, n);
        w.push(v);
        wx.push(v * d as f64);
        wx2.push(v * (d * d) as f64);
    }
    let total = pairwise_sum(&w);
    let mean = pairwise_sum(&wx) / total;
    pairwise_sum(&wx2) / total - mean * mean
}

/// Signed ring distance of site x from site 0, in (-N/2, N/2].
pub fn signed_distance(x: i64, n: i64) -> i64 {
    let m = x.rem_euclid(n);
    if m > n / 2 {
        m - n
    } else {
        m
    }
}

/// Least-squares power-law fit y = A t^p on positive data: returns the
/// exponent p and its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerlawFit {
    pub exponent: f64,
    pub stderr: f64,
}

pub fn fit_powerlaw(series: &[(f64, f64)]) -> Result<PowerlawFit> {
    if series.len() < 5 {
        return Err(Error::TooFewPoints { need: 5, got: series.len() });
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .map(|&(t, y)| {
            if t <= 0.0 || y <= 0.0 {
                Err(Error::InvalidParams("power-law fit needs positive data".into()))
            } else {
                Ok((t.ln(), y.ln()))
            }
        })
        .collect::<Result<_>>()?;
    let (slope, icept, _r2) = linear_fit(&pts)?;
    // standard error of the slope
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    let sse: f64 = pts.iter().map(|p| (p.1 - (icept + slope * p.0)).powi(2)).sum();
    let stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerlawFit { exponent: slope, stderr })
}

fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return Err(Error::TooFewPoints { need: 2, got: pts.len() });
    }
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("degenerate abscissa in fit".into()));
    }
    let slope = sxy / sxx;
    let icept = ym - slope * xm;
    let sst: f64 = pts.iter().map(|p| (p.1 - ym) * (p.1 - ym)).sum();
    let sse: f64 = pts.iter().map(|p| (p.1 - (icept + slope * p.0)).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok((slope, icept, r2))
}

/// CSV rows "t,x,m,j" for an evolution trajectory.
pub fn write_density_current_csv<W: Write>(result: &EvolutionResult, j: f64, mut w: W) -> Result<()> {
    writeln!(w, "t,x,m,j")?;
    for (t, state) in result.times.iter().zip(result.states.iter()) {
        let m = magnetization_profile(state)?;
        let cur = current_profile(state, j)?;
        for x in 0..m.len() {
            writeln!(w, "{:.12e},{},{:.12e},{:.12e}", t, x, m[x], cur[x])?;
        }
    }
    Ok(())
}
