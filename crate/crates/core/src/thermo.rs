//! Thermodynamic-limit kernels and closed-form asymptotics.
//!
//! Per momentum mode the density amplitude is the inverse Laplace transform
//! of F(s, q) = 1/(sqrt((s + 4 gamma)^2 + omega^2) - 4 gamma). This module
//! evaluates that time function by Talbot summation or by the exact
//! pole-plus-branch-cut decomposition, assembles density and off-diagonal
//! profiles from it, and provides the limiting forms: the squared-Bessel
//! short-time law, the diffusive Gaussian, the telegrapher kernel, and the
//! Hermite-form long-time off-diagonals.

use crate::error::Error;
use crate::laplace::{
    contour_invert, mode_kernel, pole_regime, talbot_invert, PoleRegime, TalbotConfig,
};
use crate::model::{dispersion, ChainParams, DiagonalInitialState};
use crate::numeric::{hermite, pairwise_sum_c64};
use crate::{Result, C64};
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Initial data as seen by the momentum-space pipelines: either an explicit
/// finite profile, or closed-form transforms that avoid materializing
/// million-site vectors.
#[derive(Clone, Copy)]
pub enum InitSpectrum<'a> {
    Finite(&'a DiagonalInitialState),
    /// c_x = delta_{x,0}: c(q) = 1 for every mode.
    Delta { sites: usize },
    /// Domain wall (up for x < L/2): c(q_n) as exact finite geometric sums.
    Wall { sites: usize },
}

impl InitSpectrum<'_> {
    pub fn sites(&self) -> usize {
        match self {
            InitSpectrum::Finite(s) => s.sites(),
            InitSpectrum::Delta { sites } | InitSpectrum::Wall { sites } => *sites,
        }
    }

    /// c(q_n) for n in 1..=L.
    pub fn cq(&self, n: usize) -> C64 {
        match self {
            InitSpectrum::Finite(s) => s.cq(n),
            InitSpectrum::Delta { .. } => C64::new(1.0, 0.0),
            InitSpectrum::Wall { sites } => {
                let l = *sites;
                if n == l || n % 2 == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    // c(q) = -4 / (1 - e^{-iq}) on odd modes
                    let q = 2.0 * PI * n as f64 / l as f64;
                    -4.0 / (1.0 - (-C64::new(0.0, 1.0) * q).exp())
                }
            }
        }
    }
}

/// How to invert the per-mode Laplace kernel back to the time domain.
#[derive(Debug, Clone, Copy)]
pub enum InversionMethod {
    /// Deformed-contour summation; accurate while omega*t stays within the
    /// range the node count can resolve.
    Talbot(TalbotConfig),
    /// Residue plus branch-cut quadrature; exact in both pole regimes, cost
    /// grows with omega*t through the oscillatory cut integral.
    Contour,
}

impl Default for InversionMethod {
    fn default() -> Self {
        InversionMethod::Contour
    }
}

/// Thermodynamic-limit Green's function F(s, q) with the branch convention
/// of [`crate::laplace::sqrt_cut`].
pub fn f_thermo(s: C64, q: f64, p: &ChainParams) -> C64 {
    let st = s + 4.0 * p.gamma;
    mode_kernel(st, dispersion(q, p.j), p.gamma)
}

/// Long-wavelength limit of F: the telegrapher kernel
/// (s + 4 gamma) / (s^2 + 4 gamma s + 8 (J q)^2).
pub fn f_telegrapher(s: C64, q: f64, p: &ChainParams) -> Result<C64> {
    let denom = s * s + 4.0 * p.gamma * s + 8.0 * (p.j * q) * (p.j * q);
    if denom.norm() < 1e-14 {
        return Err(Error::SingularInput(format!("telegrapher kernel pole at s = {s}")));
    }
    Ok((s + 4.0 * p.gamma) / denom)
}

/// Thermodynamic-limit off-diagonal resolvent element: at l = 0 this reduces
/// algebraically to [`f_thermo`].
pub fn gl0_thermo(s: C64, q: f64, l_off: usize, p: &ChainParams) -> C64 {
    let st = s + 4.0 * p.gamma;
    let omega = dispersion(q, p.j);
    let r = crate::laplace::sqrt_cut(st, omega);
    let g4 = 4.0 * p.gamma;
    let iw = C64::new(0.0, omega);
    iw.powu(l_off as u32) * (1.0 + (g4 + r) / (r - g4)) / (2.0 * r * (st + r).powu(l_off as u32))
}

/// The physical per-mode time function f(t) = L^{-1}[F(s, q)](t), real by
/// the conjugate symmetry of F. At t = 0 it equals 1 exactly (initial-value
/// theorem); the omega = 0 mode is conserved and equals 1 for all t.
///
/// The branch-cut piece is skipped once e^{-4 gamma t} has pushed it below
/// 1e-15, which is what makes long-time density sweeps cheap.
pub fn mode_time_function(t: f64, omega: f64, gamma: f64, method: InversionMethod) -> Result<f64> {
    if t == 0.0 || omega.abs() < 1e-14 {
        return Ok(1.0);
    }
    match method {
        InversionMethod::Talbot(cfg) => {
            let m = cfg.auto_nodes(omega * t);
            let cfg = TalbotConfig { m, ..cfg };
            let v = talbot_invert(|s| mode_kernel(s + 4.0 * gamma, omega, gamma), t, &cfg)?;
            Ok(v.value.re)
        }
        InversionMethod::Contour => {
            if gamma == 0.0 {
                return Ok(contour_invert(t, omega, 0.0)?.value());
            }
            match pole_regime(omega, gamma) {
                PoleRegime::Marginal => {
                    // no closed form when the poles meet at the origin
                    let cfg = TalbotConfig::with_nodes(
                        TalbotConfig::default().auto_nodes(omega * t),
                    );
                    let v =
                        talbot_invert(|s| mode_kernel(s + 4.0 * gamma, omega, gamma), t, &cfg)?;
                    Ok(v.value.re)
                }
                PoleRegime::RealPoles => {
                    let sp = (16.0 * gamma * gamma - omega * omega).sqrt();
                    // pole contributes e^{(sp - 4 gamma) t}; cut is bounded by
                    // O(1) times e^{-4 gamma t}
                    if 4.0 * gamma * t > 35.0 {
                        let pole = 4.0 * gamma * ((sp - 4.0 * gamma) * t).exp() / sp;
                        return Ok(pole);
                    }
                    Ok(contour_invert(t, omega, gamma)?.shifted_value(gamma, t))
                }
                PoleRegime::ImaginaryPoles => {
                    if 4.0 * gamma * t > 35.0 {
                        return Ok(0.0);
                    }
                    Ok(contour_invert(t, omega, gamma)?.shifted_value(gamma, t))
                }
            }
        }
    }
}

/// f(t) for every mode n = 1..=n_modes on the grid q_n = 2 pi n / n_modes.
/// Modes n and n_modes - n share omega, so only half are computed. Parallel
/// over modes; any failure reports the offending mode index.
pub fn mode_values(
    t: f64,
    p: &ChainParams,
    n_modes: usize,
    method: InversionMethod,
) -> Result<Vec<f64>> {
    let half: Vec<(usize, f64)> = (1..=n_modes / 2)
        .map(|n| (n, dispersion(2.0 * PI * n as f64 / n_modes as f64, p.j)))
        .collect();
    let computed: std::result::Result<Vec<f64>, Error> = half
        .par_iter()
        .map(|&(n, omega)| {
            mode_time_function(t, omega, p.gamma, method)
                .map_err(|e| Error::ModeFailure { mode: n, message: e.to_string() })
        })
        .collect();
    let computed = computed?;
    let mut out = vec![0.0; n_modes];
    for (&(n, _), &v) in half.iter().zip(computed.iter()) {
        out[n - 1] = v;
        if n != n_modes - n {
            out[n_modes - n - 1] = v;
        }
    }
    out[n_modes - 1] = 1.0; // omega = 0 mode
    Ok(out)
}

/// Full density profile C_{x,x}(t) for x = 0..N-1 via an inverse FFT over
/// the mode sum (1/N) sum_n e^{i q_n x} f_n(t) c(q_n).
pub fn density_profile(
    t: f64,
    init: &InitSpectrum,
    p: &ChainParams,
    method: InversionMethod,
    n_modes: usize,
) -> Result<Vec<f64>> {
    let f = mode_values(t, p, n_modes, method)?;
    profile_from_mode_values(&f, init, n_modes)
}

/// Assemble the profile from precomputed mode values.
pub fn profile_from_mode_values(
    f: &[f64],
    init: &InitSpectrum,
    n_modes: usize,
) -> Result<Vec<f64>> {
    if f.len() != n_modes {
        return Err(Error::GridMismatch("mode value count != grid size".into()));
    }
    let mut buf: Vec<C64> = vec![C64::new(0.0, 0.0); n_modes];
    for n in 1..=n_modes {
        buf[n % n_modes] = init.cq(n) * f[n - 1];
    }
    FftPlanner::new().plan_fft_inverse(n_modes).process(&mut buf);
    Ok(buf.into_iter().map(|v| v.re / n_modes as f64).collect())
}

/// Single-site density C_{x,x}(t) by the q-grid sum (trapezoid rule on the
/// periodic integrand; identical to the finite-L mode sum on the same grid).
pub fn density_thermo(
    x: i64,
    t: f64,
    init: &InitSpectrum,
    p: &ChainParams,
    method: InversionMethod,
    n_modes: usize,
) -> Result<f64> {
    let f = mode_values(t, p, n_modes, method)?;
    let i = C64::new(0.0, 1.0);
    let terms: Vec<C64> = (1..=n_modes)
        .map(|n| {
            let q = 2.0 * PI * n as f64 / n_modes as f64;
            (i * q * x as f64).exp() * init.cq(n) * f[n - 1]
        })
        .collect();
    Ok(pairwise_sum_c64(&terms).re / n_modes as f64)
}

/// Integer-order Bessel J_n by Miller's backward recurrence, normalized with
/// J_0 + 2 J_2 + 2 J_4 + ... = 1.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ax = x.abs();
    let start = (n as usize + 20 + ax.ceil() as usize).next_multiple_of(2);
    let mut jp = 0.0_f64; // J_{k+1}
    let mut jc = 1e-300_f64; // J_k seed
    let mut norm = 0.0_f64;
    let mut result = 0.0_f64;
    for k in (0..=start).rev() {
        let jm = 2.0 * (k as f64 + 1.0) / ax * jc - jp;
        jp = jc;
        jc = jm;
        // jc now holds J_k
        if k % 2 == 0 {
            norm += if k == 0 { jc } else { 2.0 * jc };
        }
        if k == n as usize {
            result = jc;
        }
        // rescale to avoid overflow of the unnormalized recurrence
        if jc.abs() > 1e250 {
            jc /= 1e250;
            jp /= 1e250;
            norm /= 1e250;
            result /= 1e250;
        }
    }
    let v = result / norm;
    if x < 0.0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Short-time law for the delta initial state:
/// C_{x,x}(t) = J_x(4 J t)^2 e^{-4 gamma t}.
pub fn density_shorttime(x: i64, t: f64, p: &ChainParams) -> f64 {
    let b = bessel_j(x.unsigned_abs() as u32, 4.0 * p.j * t);
    b * b * (-4.0 * p.gamma * t).exp()
}

/// Long-time diffusive Gaussian with D = 2 J^2 / gamma.
pub fn density_longtime(x: f64, t: f64, p: &ChainParams) -> Result<f64> {
    if p.gamma <= 0.0 {
        return Err(Error::InvalidParams("diffusive limit needs gamma > 0".into()));
    }
    if t <= 0.0 {
        return Err(Error::InvalidParams("diffusive limit needs t > 0".into()));
    }
    let d = 2.0 * p.j * p.j / p.gamma;
    Ok((-x * x / (4.0 * d * t)).exp() / (4.0 * PI * d * t).sqrt())
}

/// Diffusion constant D = 2 J^2 / gamma.
pub fn diffusion_constant(p: &ChainParams) -> f64 {
    2.0 * p.j * p.j / p.gamma
}

/// Ballistic-window off-diagonal C_{x+l,x}(t) for the delta initial state:
/// per-mode Talbot inversion of omega^l / (sqrt(s^2+omega^2)
/// (s + sqrt(s^2+omega^2))^l), carrying the e^{-4 gamma t} prefactor and the
/// e^{i q (x + l/2)} i^l (i omega)^l phase of the mode sum.
pub fn offdiag_ballistic(
    x: i64,
    l_off: usize,
    t: f64,
    p: &ChainParams,
    n_modes: usize,
) -> Result<C64> {
    if l_off == 0 {
        return Err(Error::InvalidParams("use the density routines for l = 0".into()));
    }
    if t == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let half: Vec<(usize, f64)> = (1..=n_modes / 2)
        .map(|n| (n, dispersion(2.0 * PI * n as f64 / n_modes as f64, p.j)))
        .collect();
    let inverted: std::result::Result<Vec<f64>, Error> = half
        .par_iter()
        .map(|&(n, omega)| {
            if omega.abs() < 1e-14 {
                return Ok(0.0);
            }
            let cfg = TalbotConfig::with_nodes(TalbotConfig::default().auto_nodes(omega * t));
            let kernel = move |s: C64| {
                let root = crate::laplace::sqrt_cut(s, omega);
                1.0 / (root * (s + root).powu(l_off as u32))
            };
            talbot_invert(kernel, t, &cfg)
                .map(|v| v.value.re)
                .map_err(|e| Error::ModeFailure { mode: n, message: e.to_string() })
        })
        .collect();
    let inverted = inverted?;
    let mut per_mode = vec![0.0; n_modes];
    for (&(n, _), &v) in half.iter().zip(inverted.iter()) {
        per_mode[n - 1] = v;
        if n != n_modes - n {
            per_mode[n_modes - n - 1] = v;
        }
    }
    let i = C64::new(0.0, 1.0);
    let terms: Vec<C64> = (1..=n_modes)
        .map(|n| {
            let q = 2.0 * PI * n as f64 / n_modes as f64;
            let omega = dispersion(q, p.j);
            let phase = (i * q * (x as f64 + l_off as f64 / 2.0)).exp();
            // i^l (i omega)^l = (-omega)^l
            phase * (-omega).powi(l_off as i32) * per_mode[n - 1]
        })
        .collect();
    Ok(pairwise_sum_c64(&terms) * (-4.0 * p.gamma * t).exp() / n_modes as f64)
}

/// Long-time off-diagonal law: (i / 2 gamma)^l times the l-th spatial
/// derivative of the diffusive Gaussian at u = x - l/2, in Hermite form.
pub fn offdiag_longtime(x: i64, l_off: usize, t: f64, p: &ChainParams) -> Result<C64> {
    if p.gamma <= 0.0 || t <= 0.0 {
        return Err(Error::InvalidParams("long-time law needs gamma > 0 and t > 0".into()));
    }
    let a2 = 8.0 * p.j * p.j * t / p.gamma; // a^2 in exp(-(u/a)^2)
    let a = a2.sqrt();
    let u = x as f64 - l_off as f64 / 2.0;
    let gaussian = (-u * u / a2).exp() / (PI * a2).sqrt();
    let deriv = (-1.0 / a).powi(l_off as i32) * hermite(l_off, u / a) * gaussian;
    let coeff = (C64::new(0.0, 1.0) / (2.0 * p.gamma)).powu(l_off as u32);
    Ok(coeff * deriv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::TalbotContour;

    fn params(l: usize, j: f64, gamma: f64) -> ChainParams {
        ChainParams::new(l, j, gamma).unwrap()
    }

    /// Ascending power series for J_n, independent of the Miller recurrence.
    pub(crate) fn bessel_series(n: u32, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = 1.0;
        for k in 1..=n {
            term *= half / k as f64;
        }
        let mut sum = term;
        let q = half * half;
        for k in 1..200 {
            term *= -q / (k as f64 * (k as f64 + n as f64));
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-30) {
                break;
            }
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        // the alternating series loses ~e^{x}/sqrt(x) eps to cancellation,
        // so restrict it to moderate arguments
        for n in [0u32, 1, 3, 7, 20] {
            for x in [0.1, 1.0, 4.0, 8.0] {
                let a = bessel_j(n, x);
                let b = bessel_series(n, x);
                assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "n={n} x={x}: {a} vs {b}");
            }
        }
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
    }

    #[test]
    fn bessel_matches_high_precision_references() {
        // 20-digit references computed with an arbitrary-precision library
        let refs: [(u32, f64, f64); 5] = [
            (0, 20.0, 0.16702466434058315473),
            (1, 20.0, 0.066833124175850045579),
            (3, 20.0, -0.098901394560449675613),
            (7, 20.0, -0.18422139772059443072),
            (20, 20.0, 0.16474777377532653234),
        ];
        for (n, x, want) in refs {
            let got = bessel_j(n, x);
            assert!((got - want).abs() < 1e-10, "J_{n}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn bessel_sum_rule() {
        // sum_x J_x(z)^2 = 1
        let z = 20.0;
        let mut total = bessel_j(0, z) * bessel_j(0, z);
        for x in 1..=200u32 {
            let j = bessel_j(x, z);
            total += 2.0 * j * j;
        }
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn f_thermo_arithmetic_point() {
        // gamma = 0, omega = 5, s = 12: 1/sqrt(144 + 25) = 1/13
        let p = params(8, 1.0, 0.0);
        let q = 2.0 * (5.0f64 / 8.0).asin(); // omega(q) = 5 at J = 1
        let v = f_thermo(C64::new(12.0, 0.0), q, &p);
        assert!((v - C64::new(1.0 / 13.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn f_thermo_is_large_l_limit_of_finite_resolvent() {
        let p = params(2000, 1.0, 0.4);
        let s = C64::new(0.5, 0.2);
        let q = 2.0;
        let fin = crate::transfer::g00_finite(s, q, &p).unwrap();
        let th = f_thermo(s, q, &p);
        assert!((fin - th).norm() < 1e-8 * th.norm());
    }

    #[test]
    fn telegrapher_matches_thermo_at_long_wavelength() {
        let p = params(64, 1.0, 0.25);
        let s = C64::new(0.8, 0.1);
        let q = 1e-3;
        let a = f_thermo(s, q, &p);
        let b = f_telegrapher(s, q, &p).unwrap();
        assert!((a - b).norm() < 1e-5 * a.norm());
    }

    #[test]
    fn telegrapher_conservation_at_zero_wavenumber() {
        let p = params(16, 1.0, 0.7);
        let s = C64::new(0.9, -0.4);
        let v = f_telegrapher(s, 0.0, &p).unwrap();
        assert!((v - 1.0 / s).norm() < 1e-13);
    }

    #[test]
    fn telegrapher_inversion_matches_damped_oscillator() {
        // closed-form solution of m'' + 4 gamma m' + (8 J^2 q^2) m = 0 with
        // m(0) = 1, m'(0) = 0
        let p = params(16, 1.0, 0.25);
        let q = 0.1;
        let t = 2.0;
        let w2 = 8.0 * (p.j * q) * (p.j * q);
        let g2 = 2.0 * p.gamma;
        let disc = g2 * g2 - w2;
        let closed = if disc >= 0.0 {
            let om = disc.sqrt();
            (-g2 * t).exp() * ((om * t).cosh() + g2 * (om * t).sinh() / om)
        } else {
            let om = (-disc).sqrt();
            (-g2 * t).exp() * ((om * t).cos() + g2 * (om * t).sin() / om)
        };
        let inv = talbot_invert(
            |s| f_telegrapher(s, q, &p).unwrap(),
            t,
            &TalbotConfig::default(),
        )
        .unwrap();
        assert!((inv.value.re - closed).abs() < 1e-8, "{} vs {closed}", inv.value.re);
    }

    #[test]
    fn gl0_thermo_reduces_to_f_at_l0() {
        let p = params(8, 1.2, 0.5);
        let s = C64::new(0.7, 0.25);
        let q = 1.9;
        let a = gl0_thermo(s, q, 0, &p);
        let b = f_thermo(s, q, &p);
        assert!((a - b).norm() < 1e-13 * b.norm());
    }

    #[test]
    fn gl0_thermo_is_large_l_limit() {
        let p = params(2000, 1.0, 0.4);
        let s = C64::new(0.5, 0.1);
        let q = 2.3;
        for l_off in [1usize, 3] {
            let fin = crate::transfer::gl0_finite(s, q, l_off, &p).unwrap();
            let th = gl0_thermo(s, q, l_off, &p);
            assert!((fin - th).norm() < 1e-8 * th.norm(), "l={l_off}");
        }
    }

    #[test]
    fn gl0_thermo_large_s_decay_order() {
        // |G_{l,0}| ~ (omega/2)^l / s^{l+1} * 2 at large s: order l+1 in 1/s
        let p = params(8, 1.0, 0.3);
        let q = 2.0;
        for l_off in [1usize, 2, 4] {
            let v1 = gl0_thermo(C64::new(1e4, 0.0), q, l_off, &p).norm();
            let v2 = gl0_thermo(C64::new(2e4, 0.0), q, l_off, &p).norm();
            let order = (v1 / v2).log2();
            assert!(
                (order - (l_off as f64 + 1.0)).abs() < 0.01,
                "l={l_off}: measured order {order}"
            );
        }
    }

    #[test]
    fn mode_function_initial_value() {
        assert_eq!(mode_time_function(0.0, 3.0, 0.5, InversionMethod::Contour).unwrap(), 1.0);
        assert_eq!(mode_time_function(2.0, 0.0, 0.5, InversionMethod::Contour).unwrap(), 1.0);
    }

    #[test]
    fn mode_function_methods_agree() {
        for (omega, gamma, t) in [(2.0, 0.8, 1.0), (6.0, 0.3, 2.0), (1.0, 1.0, 4.0)] {
            let a = mode_time_function(t, omega, gamma, InversionMethod::Contour).unwrap();
            let b = mode_time_function(
                t,
                omega,
                gamma,
                InversionMethod::Talbot(TalbotConfig::default()),
            )
            .unwrap();
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn density_initial_condition() {
        let p = params(64, 1.0, 0.3);
        let init = InitSpectrum::Delta { sites: 64 };
        for x in [0i64, 1, 5] {
            let v = density_thermo(x, 0.0, &init, &p, InversionMethod::Contour, 64).unwrap();
            let want = if x == 0 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn density_free_case_is_squared_bessel() {
        let p = params(512, 1.0, 0.0);
        let init = InitSpectrum::Delta { sites: 512 };
        let t = 2.0;
        let prof = density_profile(t, &init, &p, InversionMethod::Contour, 512).unwrap();
        for x in [0i64, 1, 3, 7, 12] {
            let want = bessel_series(x as u32, 8.0).powi(2);
            let got = prof[x.rem_euclid(512) as usize];
            assert!((got - want).abs() < 1e-6, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn density_longtime_gaussian_match() {
        // gamma t = 20: the diffusive kernel should hold pointwise near the peak
        let p = params(4096, 1.0, 0.1);
        let init = InitSpectrum::Delta { sites: 4096 };
        let t = 200.0;
        let prof = density_profile(t, &init, &p, InversionMethod::Contour, 4096).unwrap();
        let d = diffusion_constant(&p);
        assert!((d - 20.0).abs() < 1e-12);
        // finite-(gamma t) corrections to the pure Gaussian grow from
        // ~1.6e-3 relative at the peak to ~2.7e-3 at x = 60 for gamma t = 20
        for x in [0i64, 10, 30, 60] {
            let want = density_longtime(x as f64, t, &p).unwrap();
            let got = prof[x.rem_euclid(4096) as usize];
            assert!(
                (got - want).abs() < 4e-3 * want,
                "x={x}: {got} vs {want} (rel {})",
                (got - want).abs() / want
            );
        }
    }

    #[test]
    fn density_mode_sum_equals_grid_integral() {
        // finite-L mode sum at L = 1024 against the continuum grid of the
        // same size (identical grids, different code paths)
        let l = 1024;
        let p = params(l, 1.0, 0.2);
        let fin = DiagonalInitialState::delta(l).unwrap();
        let a = density_thermo(3, 1.5, &InitSpectrum::Finite(&fin), &p, InversionMethod::Contour, l)
            .unwrap();
        let b = density_thermo(3, 1.5, &InitSpectrum::Delta { sites: l }, &p, InversionMethod::Contour, l)
            .unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn density_positivity_and_sum_rule() {
        let l = 256;
        let p = params(l, 1.0, 0.4);
        let init = InitSpectrum::Delta { sites: l };
        for &t in &[0.5, 2.0, 8.0] {
            let prof = density_profile(t, &init, &p, InversionMethod::Contour, l).unwrap();
            let total: f64 = crate::numeric::pairwise_sum(&prof);
            assert!((total - 1.0).abs() < 1e-6, "t={t}: sum {total}");
            for (x, &v) in prof.iter().enumerate() {
                assert!(v > -1e-6 && v < 1.0 + 1e-6, "t={t} x={x}: {v}");
            }
        }
    }

    #[test]
    fn shorttime_law_examples() {
        let p = params(64, 1.0, 0.0);
        assert_eq!(density_shorttime(0, 0.0, &p), 1.0);
        // the product form is pointwise accurate only while 4 gamma t << 1:
        // at gamma = 0.005, t = 1 the exact density deviates by ~1.9%
        let p2 = params(64, 1.0, 0.005);
        let t = 1.0;
        let init = InitSpectrum::Delta { sites: 2048 };
        for x in [0i64, 2, 4] {
            let full =
                density_thermo(x, t, &init, &p2, InversionMethod::Contour, 2048).unwrap();
            let short = density_shorttime(x, t, &p2);
            assert!(
                (full - short).abs() <= 0.025 * full.abs().max(0.01),
                "x={x}: {full} vs {short}"
            );
        }
    }

    #[test]
    fn longtime_kernel_is_normalized() {
        let p = params(64, 1.0, 0.1);
        let t = 60.0; // D t = 1200
        let mut total = 0.0;
        for x in -4000..=4000 {
            total += density_longtime(x as f64, t, &p).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let peak = density_longtime(0.0, t, &p).unwrap();
        let d = diffusion_constant(&p);
        assert!((peak - 1.0 / (4.0 * PI * d * t).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn crossover_envelope() {
        let p = params(64, 1.0, 0.01);
        let init = InitSpectrum::Delta { sites: 2048 };
        // short side: the product law carries secular O(gamma t) corrections,
        // oracle-verified to stay under 5% up to 4 gamma t ~ 0.04
        let t_short = 1.0;
        let full =
            density_thermo(0, t_short, &init, &p, InversionMethod::Contour, 2048).unwrap();
        let short = density_shorttime(0, t_short, &p);
        assert!((full - short).abs() < 0.05 * full.abs(), "{full} vs {short}");
        // long side: gamma t = 10
        let t_long = 1000.0;
        let full =
            density_thermo(0, t_long, &init, &p, InversionMethod::Contour, 8192).unwrap();
        let long = density_longtime(0.0, t_long, &p).unwrap();
        assert!((full - long).abs() < 0.05 * full.abs(), "{full} vs {long}");
    }

    #[test]
    fn ballistic_offdiag_structure() {
        let p = params(64, 1.0, 0.5);
        // t = 0: no currents from a diagonal initial state
        assert_eq!(offdiag_ballistic(3, 1, 0.0, &p, 256).unwrap(), C64::new(0.0, 0.0));
        // odd offsets stay purely imaginary, even offsets purely real
        for (l_off, t) in [(1usize, 0.4), (2, 0.4), (3, 0.7)] {
            let v = offdiag_ballistic(0, l_off, t, &p, 256).unwrap();
            if l_off % 2 == 1 {
                assert!(v.re.abs() < 1e-9, "l={l_off}: {v}");
            } else {
                assert!(v.im.abs() < 1e-9, "l={l_off}: {v}");
            }
        }
    }

    #[test]
    fn ballistic_offdiag_matches_bessel_identity() {
        // omega^l L^{-1}[1/(sqrt(s^2+w^2)(s+sqrt)^l)] = J_l(omega t), so the
        // mode sum equals e^{-4 gamma t} (1/N) sum_q e^{iq(x+l/2)} (-1)^l J_l(w t) c(q)
        let p = params(64, 1.0, 0.3);
        let (x, l_off, t, n) = (2i64, 2usize, 0.8, 128usize);
        let got = offdiag_ballistic(x, l_off, t, &p, n).unwrap();
        let i = C64::new(0.0, 1.0);
        let mut want = C64::new(0.0, 0.0);
        for k in 1..=n {
            let q = 2.0 * PI * k as f64 / n as f64;
            let omega = dispersion(q, p.j);
            let phase = (i * q * (x as f64 + l_off as f64 / 2.0)).exp();
            want += phase * bessel_series(l_off as u32, omega * t);
        }
        want *= (-4.0 * p.gamma * t).exp() / n as f64; // (-1)^l = 1 for l = 2
        assert!((got - want).norm() < 1e-7, "{got} vs {want}");
    }

    #[test]
    fn longtime_offdiag_shapes() {
        let p = params(64, 1.0, 0.5);
        let t = 20.0;
        // l = 0 reduces to the density Gaussian
        let a = offdiag_longtime(7, 0, t, &p).unwrap();
        let b = density_longtime(7.0, t, &p).unwrap();
        assert!((a.re - b).abs() < 1e-14 && a.im.abs() < 1e-14);
        // l = 1: derivative vanishes at the Gaussian center u = x - 1/2 = 0
        // (x = 1/2 is off-lattice, so evaluate symmetric neighbours instead)
        let left = offdiag_longtime(0, 1, t, &p).unwrap();
        let right = offdiag_longtime(1, 1, t, &p).unwrap();
        assert!((left + right).norm() < 1e-14, "antisymmetric about the center");
        // max magnitude near u = a/sqrt(2)
        let a2 = 8.0 * p.j * p.j * t / p.gamma;
        let u_star = (a2 / 2.0).sqrt();
        let near = offdiag_longtime(u_star.round() as i64, 1, t, &p).unwrap().norm();
        let far = offdiag_longtime((3.0 * u_star) as i64, 1, t, &p).unwrap().norm();
        assert!(near > far);
    }

    #[test]
    fn wall_spectrum_matches_fft() {
        let l = 16;
        let wall = DiagonalInitialState::domain_wall(l).unwrap();
        let closed = InitSpectrum::Wall { sites: l };
        for n in 1..=l {
            let a = wall.cq(n);
            let b = closed.cq(n);
            assert!((a - b).norm() < 1e-10, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn talbot_contour_choice_is_exposed() {
        let cfg = TalbotConfig { contour: TalbotContour::Classic, m: 48, ..Default::default() };
        let v = mode_time_function(0.3, 1.0, 0.5, InversionMethod::Talbot(cfg)).unwrap();
        let w = mode_time_function(0.3, 1.0, 0.5, InversionMethod::Contour).unwrap();
        assert!((v - w).abs() < 1e-5, "{v} vs {w}");
    }
}
