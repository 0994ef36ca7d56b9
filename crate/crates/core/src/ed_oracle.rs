//! Brute-force reference solvers.
//!
//! Two independent routes to the exact finite-size dynamics:
//!
//! * [`evolve_direct`] integrates the real-space matrix ODE
//!   dC/dt = -2i (T C - C T^T) - 4 gamma (C - diag C) with an adaptive
//!   Runge-Kutta 4(5) scheme, exploiting the tridiagonal-plus-corner
//!   structure of T.
//! * [`evolve_spectral`] / [`evolve_modes`] evolve the momentum-space
//!   diagonal amplitudes g_l(t, q_n) under the reduced L x L generator, via
//!   eigendecomposition or a tolerance-controlled Taylor matrix exponential.
//!
//! Everything downstream (transfer-matrix resolvents, Laplace inversions,
//! asymptotics) is validated against these.

use crate::error::Error;
use crate::model::{
    assemble_correlations, momentum_grid, ChainParams, CorrelationMatrix, DiagonalInitialState,
    ModeDiagonals,
};
use crate::{Result, C64};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, OperationNorm, Solve};
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Hard ceiling for the dense real-space integrator (O(L^2) state).
pub const DIRECT_SIZE_LIMIT: usize = 4096;

/// Which variant of the reduced momentum-space generator to build.
///
/// `Reduced` is the L x L tridiagonal matrix with a doubled first row and an
/// i omega/2 corner, the form the transfer-matrix resolvent is derived from.
/// It propagates the symmetric sector exactly until correlations wrap around
/// the ring.
///
/// `Ring` additionally carries the wrap phase kappa = i^{-L} e^{i q L / 2} on
/// the corner couplings, which makes the mode evolution match the real-space
/// dynamics exactly at all times, including after wraparound. The two forms
/// coincide whenever kappa = 1 and on all trajectories that never reach
/// l ~ L.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorForm {
    Reduced,
    Ring,
}

/// The reduced generator A(q) of the mode amplitudes g_l, l = 0..L-1.
#[derive(Debug, Clone)]
pub struct GeneratorA {
    pub q: f64,
    pub sites: usize,
    pub form: GeneratorForm,
    pub entries: Array2<C64>,
}

/// Wrap phase of the mod-L diagonal labeling: kappa = i^{-L} e^{i q L / 2}.
pub fn wrap_phase(q: f64, sites: usize) -> C64 {
    let i = C64::new(0.0, 1.0);
    i.powi(-(sites as i32).rem_euclid(4)) * (i * q * sites as f64 / 2.0).exp()
}

/// Tridiagonal generator with doubled first row and plain i omega/2 corner.
///
/// Row 0 is `[0, i omega, 0, ...]`, interior rows carry i omega/2 hoppings
/// and -4 gamma on the diagonal, and row L-1 closes onto column 0.
pub fn build_generator(q: f64, p: &ChainParams) -> GeneratorA {
    build_form(q, p, GeneratorForm::Reduced)
}

impl GeneratorA {
    /// Ring-exact variant; see [`GeneratorForm`].
    pub fn ring(q: f64, p: &ChainParams) -> GeneratorA {
        build_form(q, p, GeneratorForm::Ring)
    }
}

fn build_form(q: f64, p: &ChainParams, form: GeneratorForm) -> GeneratorA {
    let l = p.sites;
    let w = crate::model::dispersion(q, p.j);
    let iw2 = C64::new(0.0, 0.5 * w);
    let g4 = C64::new(4.0 * p.gamma, 0.0);
    let kappa = match form {
        GeneratorForm::Reduced => C64::new(1.0, 0.0),
        GeneratorForm::Ring => wrap_phase(q, l),
    };
    let mut a = Array2::zeros((l, l));
    match form {
        GeneratorForm::Reduced => {
            a[(0, 1 % l)] = a[(0, 1 % l)] + 2.0 * iw2;
        }
        GeneratorForm::Ring => {
            a[(0, 1 % l)] = a[(0, 1 % l)] + iw2;
            a[(0, l - 1)] = a[(0, l - 1)] + iw2 * kappa.conj();
        }
    }
    for row in 1..l {
        a[(row, row)] = -g4;
        let up = (row + 1) % l;
        let dn = row - 1;
        let cu = if row == l - 1 { iw2 * kappa } else { iw2 };
        a[(row, up)] = a[(row, up)] + cu;
        a[(row, dn)] = a[(row, dn)] + iw2;
    }
    GeneratorA { q, sites: l, form, entries: a }
}

/// Matrix-free form of the generator for large-L evolution.
#[derive(Debug, Clone, Copy)]
pub struct ModeGenerator {
    pub sites: usize,
    iw2: C64,
    gamma4: f64,
    kappa: C64,
}

impl ModeGenerator {
    pub fn ring(q: f64, p: &ChainParams) -> Self {
        ModeGenerator {
            sites: p.sites,
            iw2: C64::new(0.0, 0.5 * crate::model::dispersion(q, p.j)),
            gamma4: 4.0 * p.gamma,
            kappa: wrap_phase(q, p.sites),
        }
    }

    /// One-norm bound used for step-size selection.
    pub fn norm1(&self) -> f64 {
        2.0 * self.iw2.norm() + self.gamma4
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let l = self.sites;
        debug_assert_eq!(x.len(), l);
        if l == 2 {
            y[0] = self.iw2 * (C64::new(1.0, 0.0) + self.kappa.conj()) * x[1];
            y[1] = self.iw2 * (C64::new(1.0, 0.0) + self.kappa) * x[0]
                - self.gamma4 * x[1];
            return;
        }
        y[0] = self.iw2 * (x[1] + self.kappa.conj() * x[l - 1]);
        for i in 1..l - 1 {
            y[i] = self.iw2 * (x[i - 1] + x[i + 1]) - self.gamma4 * x[i];
        }
        y[l - 1] = self.iw2 * (x[l - 2] + self.kappa * x[0]) - self.gamma4 * x[l - 1];
    }
}

/// A time series of correlation matrices.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<CorrelationMatrix>,
}

impl EvolutionResult {
    pub fn new(times: Vec<f64>, states: Vec<CorrelationMatrix>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::InvalidParams("one state per time required".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("times must be strictly increasing".into()));
        }
        Ok(EvolutionResult { times, states })
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParams("no output times requested".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::InvalidParams("times must start at or after 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("times must be strictly increasing".into()));
    }
    Ok(())
}

/// RHS of the correlation-matrix ODE with periodic tridiagonal hopping.
fn direct_rhs(c: &Array2<C64>, p: &ChainParams, out: &mut Array2<C64>) {
    let l = p.sites;
    let m2ij = C64::new(0.0, -2.0 * p.j);
    let g4 = 4.0 * p.gamma;
    for x in 0..l {
        let xm = (x + l - 1) % l;
        let xp = (x + 1) % l;
        for y in 0..l {
            let ym = (y + l - 1) % l;
            let yp = (y + 1) % l;
            // -2iJ (C_{x+1,y} + C_{x-1,y}) + 2iJ (C_{x,y+1} + C_{x,y-1})
            let mut v = m2ij * (c[(xp, y)] + c[(xm, y)] - c[(x, yp)] - c[(x, ym)]);
            if x != y {
                v -= g4 * c[(x, y)];
            }
            out[(x, y)] = v;
        }
    }
}

/// Adaptive Dormand-Prince 5(4) integrator for the real-space equation.
///
/// Tolerances are absolute/relative 1e-10 by default; the equation is linear
/// and non-stiff but large gamma still demands step control.
pub fn evolve_direct(
    c0: &CorrelationMatrix,
    p: &ChainParams,
    times: &[f64],
) -> Result<EvolutionResult> {
    evolve_direct_with(c0, p, times, 1e-10, 1e-10)
}

pub fn evolve_direct_with(
    c0: &CorrelationMatrix,
    p: &ChainParams,
    times: &[f64],
    atol: f64,
    rtol: f64,
) -> Result<EvolutionResult> {
    if p.sites > DIRECT_SIZE_LIMIT {
        return Err(Error::SizeLimit(format!(
            "direct evolution restricted to L <= {DIRECT_SIZE_LIMIT}, got {}",
            p.sites
        )));
    }
    if c0.sites() != p.sites {
        return Err(Error::GridMismatch("initial matrix size != chain size".into()));
    }
    if c0.hermiticity_defect() > 1e-8 {
        return Err(Error::StructureViolation("initial matrix is not Hermitian".into()));
    }
    check_times(times)?;

    // Dormand-Prince coefficients.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] =
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let l = p.sites;
    let mut y = c0.entries.clone();
    let mut t = 0.0_f64;
    let mut k: Vec<Array2<C64>> = (0..7).map(|_| Array2::zeros((l, l))).collect();
    let mut stage: Array2<C64> = Array2::zeros((l, l));
    let scale = p.j.max(p.gamma).max(1.0);
    let mut dt = (0.1 / (8.0 * scale)).min(0.05);
    let dt_min = 1e-12;

    let mut out = Vec::with_capacity(times.len());
    let mut times_out = Vec::with_capacity(times.len());

    for &target in times {
        if target == 0.0 || target <= t + 1e-15 {
            out.push(CorrelationMatrix { entries: y.clone(), time: target, truncated: false });
            times_out.push(target);
            continue;
        }
        while t < target - 1e-14 {
            let h = dt.min(target - t);
            direct_rhs(&y, p, &mut k[0]);
            for s in 1..7 {
                stage.assign(&y);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = if s < 6 { A[s - 1][j] } else { B5[j] };
                    if a != 0.0 {
                        stage.scaled_add(C64::new(h * a, 0.0), kj);
                    }
                }
                if s < 6 {
                    let (head, tail) = k.split_at_mut(s);
                    let _ = head;
                    direct_rhs(&stage, p, &mut tail[0]);
                } else {
                    // stage 7 (FSAL position) evaluated at the 5th-order result
                    let (head, tail) = k.split_at_mut(6);
                    let _ = head;
                    direct_rhs(&stage, p, &mut tail[0]);
                }
            }
            // error estimate = h * sum (b5 - b4) k
            let mut err: f64 = 0.0;
            for x in 0..l {
                for yy in 0..l {
                    let mut e = C64::new(0.0, 0.0);
                    let mut ynew = y[(x, yy)];
                    for (j, kj) in k.iter().enumerate() {
                        e += (B5[j] - B4[j]) * kj[(x, yy)];
                        ynew += C64::new(h * B5[j], 0.0) * kj[(x, yy)];
                    }
                    let tol = atol + rtol * ynew.norm();
                    err = err.max((h * e).norm() / tol);
                }
            }
            if err <= 1.0 {
                // accept: y = y + h sum b5 k (recompute in place)
                for x in 0..l {
                    for yy in 0..l {
                        let mut ynew = y[(x, yy)];
                        for (j, kj) in k.iter().enumerate() {
                            if B5[j] != 0.0 {
                                ynew += C64::new(h * B5[j], 0.0) * kj[(x, yy)];
                            }
                        }
                        y[(x, yy)] = ynew;
                    }
                }
                t += h;
            }
            let fac = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            dt = (h * fac.clamp(0.2, 5.0)).max(dt_min);
            if dt <= dt_min && err > 1.0 {
                return Err(Error::StepSizeFailure(t));
            }
        }
        out.push(CorrelationMatrix { entries: y.clone(), time: target, truncated: false });
        times_out.push(target);
    }
    Ok(EvolutionResult { times: times_out, states: out })
}

/// Spectral-decomposition propagation g(t) = V e^{Lambda t} V^{-1} g(0).
///
/// Falls back to a scaling-and-squaring matrix exponential when the
/// eigenvector matrix is ill-conditioned (condition number above 1e12).
pub fn evolve_spectral(g0: &[C64], a: &GeneratorA, t: f64) -> Result<Vec<C64>> {
    let l = a.sites;
    if g0.len() != l {
        return Err(Error::GridMismatch("g0 length != generator size".into()));
    }
    let g0v = Array1::from(g0.to_vec());
    match a.entries.eig() {
        Ok((vals, vecs)) => {
            let cond = {
                let n1 = vecs.opnorm_one().unwrap_or(f64::INFINITY);
                match vecs.inv() {
                    Ok(vi) => n1 * vi.opnorm_one().unwrap_or(f64::INFINITY),
                    Err(_) => f64::INFINITY,
                }
            };
            if cond <= 1e12 {
                let w = vecs
                    .solve(&g0v)
                    .map_err(|e| Error::LinearSolve(format!("eigenbasis solve: {e}")))?;
                let phases = vals.mapv(|lam| (lam * t).exp());
                let scaled = &w * &phases;
                return Ok(vecs.dot(&scaled).to_vec());
            }
            log::warn!(
                "eigenbasis condition {cond:.2e} above 1e12 at q={:.6}; \
                 falling back to a dense matrix exponential",
                a.q
            );
        }
        Err(e) => {
            log::warn!("eigendecomposition failed ({e}); falling back to matrix exponential");
        }
    }
    let p = expm(&a.entries.mapv(|v| v * t));
    Ok(p.dot(&g0v).to_vec())
}

/// Dense matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm = a.opnorm_one().unwrap_or(0.0);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let b = a.mapv(|v| v / 2f64.powi(s as i32));
    let mut result = Array2::eye(n);
    let mut term: Array2<C64> = Array2::eye(n);
    for k in 1..=60 {
        term = term.dot(&b).mapv(|v| v / k as f64);
        result += &term;
        let tn = term.opnorm_one().unwrap_or(0.0);
        if tn < 1e-16 * result.opnorm_one().unwrap_or(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Tolerance-controlled action of exp(A t) on a vector for the matrix-free
/// mode generator (truncated Taylor with sub-stepping).
pub struct ExpmvWorkspace {
    v: Vec<C64>,
    term: Vec<C64>,
    next: Vec<C64>,
}

impl ExpmvWorkspace {
    pub fn new(l: usize) -> Self {
        ExpmvWorkspace { v: vec![C64::new(0.0, 0.0); l], term: vec![C64::new(0.0, 0.0); l], next: vec![C64::new(0.0, 0.0); l] }
    }

    /// Advance `state` by time `dt` under `gen`.
    pub fn advance(&mut self, gen: &ModeGenerator, state: &mut [C64], dt: f64) {
        if dt == 0.0 {
            return;
        }
        let theta = 3.0;
        let steps = ((gen.norm1() * dt / theta).ceil() as usize).max(1);
        let h = dt / steps as f64;
        for _ in 0..steps {
            self.v.copy_from_slice(state);
            self.term.copy_from_slice(state);
            let mut vnorm: f64 = self.v.iter().map(|c| c.norm_sqr()).sum();
            for k in 1..=64u32 {
                gen.apply(&self.term, &mut self.next);
                let inv_k = h / k as f64;
                let mut tnorm = 0.0;
                for (t, n) in self.term.iter_mut().zip(self.next.iter()) {
                    *t = n * inv_k;
                    tnorm += t.norm_sqr();
                }
                for (v, t) in self.v.iter_mut().zip(self.term.iter()) {
                    *v += t;
                }
                vnorm = self.v.iter().map(|c| c.norm_sqr()).sum();
                if tnorm < 1e-30 * vnorm.max(1e-300) {
                    break;
                }
            }
            let _ = vnorm;
            state.copy_from_slice(&self.v);
        }
    }
}

/// Exact per-mode evolution of all g_l amplitudes from a diagonal initial
/// state, sampled at the given times. Modes sharing (omega, kappa) reuse one
/// propagation; work is parallel over distinct modes.
pub fn evolve_modes(
    init: &DiagonalInitialState,
    p: &ChainParams,
    times: &[f64],
    l_max: usize,
) -> Result<Vec<ModeDiagonals>> {
    check_times(times)?;
    let l = p.sites;
    if init.sites() != l {
        return Err(Error::GridMismatch("initial state size != chain size".into()));
    }
    let l_keep = l_max.min(l - 1);
    let grid = momentum_grid(l, p.j)?;

    // distinct (omega, kappa) classes; q_n and q_{L-n} coincide when the wrap
    // phases match
    let mut class_of = vec![0usize; l];
    let mut reps: Vec<usize> = Vec::new();
    let mut index: HashMap<(u64, u8), usize> = HashMap::new();
    for (i, mode) in grid.iter().enumerate() {
        let n_sym = mode.n.min(l - mode.n % l).min(if mode.n == l { l } else { l - mode.n });
        let kappa = wrap_phase(mode.q, l);
        let quad = (((kappa.arg() / (PI / 2.0)).round() as i32).rem_euclid(4)) as u8;
        let key = (n_sym as u64, quad);
        let id = *index.entry(key).or_insert_with(|| {
            reps.push(i);
            reps.len() - 1
        });
        class_of[i] = id;
    }

    // propagate the unit vector e0 once per class
    let trajectories: Vec<Vec<Vec<C64>>> = reps
        .par_iter()
        .map(|&i| {
            let gen = ModeGenerator::ring(grid[i].q, p);
            let mut ws = ExpmvWorkspace::new(l);
            let mut state = vec![C64::new(0.0, 0.0); l];
            state[0] = C64::new(1.0, 0.0);
            let mut t_cur = 0.0;
            let mut samples = Vec::with_capacity(times.len());
            for &t in times {
                ws.advance(&gen, &mut state, t - t_cur);
                t_cur = t;
                samples.push(state[..=l_keep].to_vec());
            }
            samples
        })
        .collect();

    let mut out = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let mut vals = Array2::zeros((l, l_keep + 1));
        for (i, mode) in grid.iter().enumerate() {
            let c = init.cq(mode.n);
            let traj = &trajectories[class_of[i]][ti];
            for (off, &g) in traj.iter().enumerate() {
                vals[(i, off)] = c * g;
            }
        }
        out.push(ModeDiagonals::new(l, l_keep, vals, t)?);
    }
    Ok(out)
}

/// Direct-versus-spectral cross check: evolve a diagonal initial state both
/// ways and return the maximum elementwise difference.
pub fn pipeline_disagreement(init: &DiagonalInitialState, p: &ChainParams, t: f64) -> Result<f64> {
    let c0 = CorrelationMatrix::diagonal(init);
    let direct = evolve_direct(&c0, p, &[t])?;
    let modes = evolve_modes(init, p, &[t], p.sites / 2)?;
    let rebuilt = assemble_correlations(&modes[0], Some(p.sites))?;
    let d = &direct.states[0].entries - &rebuilt.entries;
    Ok(d.iter().map(|v| v.norm()).fold(0.0, f64::max))
}
