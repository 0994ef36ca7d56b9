//! Command implementations: each computes, writes CSV artifacts plus a JSON
//! run manifest, and reports what it wrote.

use crate::config::{Initial, Method, RunConfig};
use dephasing_chain::ed_oracle::evolve_modes;
use dephasing_chain::laplace::TalbotConfig;
use dephasing_chain::model::{assemble_correlations, diagonal_from_modes, DiagonalInitialState};
use dephasing_chain::observables::{log_derivative, log_derivative_smoothed};
use dephasing_chain::pipeline::{transfer_talbot_modes, transport_scan, TransportEngine};
use dephasing_chain::thermo::{
    density_shorttime, offdiag_longtime, InitSpectrum, InversionMethod,
};
use dephasing_chain::transfer::g00_finite;
use dephasing_chain::{C64, Error};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::time::Instant;

pub struct Artifacts {
    pub files: Vec<String>,
}

fn write_file(path: &str, contents: &str, files: &mut Vec<String>) -> Result<(), Error> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    files.push(path.to_string());
    Ok(())
}

/// JSON manifest with the resolved configuration, a content hash of it, and
/// wall time.
pub fn write_manifest(
    cfg: &RunConfig,
    command: &str,
    wall: f64,
    files: &mut Vec<String>,
) -> Result<(), Error> {
    let mut canonical = String::new();
    for (k, v) in &cfg.resolved {
        let _ = writeln!(canonical, "{k}={v}");
    }
    let hash = hex_digest(&canonical);
    let manifest = serde_json::json!({
        "schema": "dephasing-chain/manifest-v1",
        "command": command,
        "config": cfg.resolved,
        "content_hash": hash,
        "wall_time_s": wall,
        "outputs": files.clone(),
    });
    let path = format!("{}_manifest.json", cfg.output);
    write_file(&path, &serde_json::to_string_pretty(&manifest).unwrap(), files)?;
    Ok(())
}

pub fn hex_digest(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn spectrum<'a>(
    initial: &Initial,
    owned: &'a Option<DiagonalInitialState>,
    sites: usize,
) -> InitSpectrum<'a> {
    match (initial, owned) {
        (Initial::Delta, _) => InitSpectrum::Delta { sites },
        (Initial::DomainWall, _) => InitSpectrum::Wall { sites },
        (Initial::CustomCsv(_), Some(s)) => InitSpectrum::Finite(s),
        _ => unreachable!("custom csv state must be materialized"),
    }
}

/// Density (and current for method=ed) time series: "t,x,m,j".
pub fn cmd_evolve(cfg: &RunConfig) -> Result<Artifacts, Error> {
    let start = Instant::now();
    let init = cfg
        .initial
        .build(cfg.params.sites)
        .map_err(Error::InvalidParams)?;
    let modes = evolve_modes(&init, &cfg.params, &cfg.times, 1)?;
    let mut csv = String::from("t,x,m,j\n");
    for md in &modes {
        let l = cfg.params.sites;
        let g0: Vec<C64> = (0..l).map(|i| md.values[(i, 0)]).collect();
        let g1: Vec<C64> = (0..l).map(|i| md.values[(i, 1)]).collect();
        let diag = diagonal_from_modes(&g0, 0, l);
        let off = diagonal_from_modes(&g1, 1, l);
        for x in 0..l {
            let m = -diag[x].re;
            let j = 4.0 * cfg.params.j * off[x].im;
            let _ = writeln!(csv, "{:.12e},{x},{m:.12e},{j:.12e}", md.time);
        }
    }
    let mut files = Vec::new();
    write_file(&format!("{}_evolve.csv", cfg.output), &csv, &mut files)?;
    write_manifest(cfg, "evolve", start.elapsed().as_secs_f64(), &mut files)?;
    Ok(Artifacts { files })
}

/// Density profiles: "t,x,value_re,value_im,method".
pub fn cmd_density(cfg: &RunConfig) -> Result<Artifacts, Error> {
    let start = Instant::now();
    let l = cfg.params.sites;
    let owned = match &cfg.initial {
        Initial::CustomCsv(_) => {
            Some(cfg.initial.build(l).map_err(Error::InvalidParams)?)
        }
        _ => None,
    };
    let mut csv = String::from("t,x,value_re,value_im,method\n");
    for &t in &cfg.times {
        let profile: Vec<f64> = match cfg.method {
            Method::Ed => {
                let init = cfg.initial.build(l).map_err(Error::InvalidParams)?;
                let modes = evolve_modes(&init, &cfg.params, &[t.max(0.0)], 0)?;
                let g0: Vec<C64> = (0..l).map(|i| modes[0].values[(i, 0)]).collect();
                diagonal_from_modes(&g0, 0, l).iter().map(|v| v.re).collect()
            }
            Method::TransferTalbot => {
                let init = cfg.initial.build(l).map_err(Error::InvalidParams)?;
                let modes =
                    transfer_talbot_modes(&init, &cfg.params, t, 0, &TalbotConfig::default(), true)?;
                let g0: Vec<C64> = (0..l).map(|i| modes.values[(i, 0)]).collect();
                diagonal_from_modes(&g0, 0, l).iter().map(|v| v.re).collect()
            }
            Method::TransferContour => {
                let sp = spectrum(&cfg.initial, &owned, l);
                dephasing_chain::thermo::density_profile(
                    t,
                    &sp,
                    &cfg.params,
                    InversionMethod::Contour,
                    l,
                )?
            }
            Method::Asymptotic => {
                // squared-Bessel law at short times, diffusive Gaussian later
                (0..l)
                    .map(|x| {
                        let d = dephasing_chain::observables::signed_distance(x as i64, l as i64);
                        if cfg.params.gamma * t < 1.0 || cfg.params.gamma == 0.0 {
                            density_shorttime(d, t, &cfg.params)
                        } else {
                            dephasing_chain::thermo::density_longtime(d as f64, t, &cfg.params)
                                .unwrap_or(f64::NAN)
                        }
                    })
                    .collect()
            }
        };
        for (x, v) in profile.iter().enumerate() {
            let _ = writeln!(csv, "{t:.12e},{x},{v:.12e},0e0,{}", cfg.method);
        }
    }
    let mut files = Vec::new();
    write_file(&format!("{}_density.csv", cfg.output), &csv, &mut files)?;
    write_manifest(cfg, "density", start.elapsed().as_secs_f64(), &mut files)?;
    Ok(Artifacts { files })
}

/// Off-diagonal profiles, one file per offset: "t,x,value_re,value_im,method".
pub fn cmd_offdiag(cfg: &RunConfig) -> Result<Artifacts, Error> {
    let start = Instant::now();
    let l = cfg.params.sites;
    let lmax = cfg.lmax.max(1);
    let mut files = Vec::new();
    let mut tables: Vec<String> =
        (1..=lmax).map(|_| String::from("t,x,value_re,value_im,method\n")).collect();
    match cfg.method {
        Method::Ed => {
            let init = cfg.initial.build(l).map_err(Error::InvalidParams)?;
            let modes = evolve_modes(&init, &cfg.params, &cfg.times, lmax)?;
            for md in &modes {
                for l_off in 1..=lmax {
                    let gl: Vec<C64> = (0..l).map(|i| md.values[(i, l_off)]).collect();
                    let diag = diagonal_from_modes(&gl, l_off, l);
                    for (x, v) in diag.iter().enumerate() {
                        let _ = writeln!(
                            tables[l_off - 1],
                            "{:.12e},{x},{:.12e},{:.12e},{}",
                            md.time, v.re, v.im, cfg.method
                        );
                    }
                }
            }
        }
        Method::TransferTalbot => {
            let init = cfg.initial.build(l).map_err(Error::InvalidParams)?;
            for &t in &cfg.times {
                let md =
                    transfer_talbot_modes(&init, &cfg.params, t, lmax, &TalbotConfig::default(), true)?;
                for l_off in 1..=lmax {
                    let gl: Vec<C64> = (0..l).map(|i| md.values[(i, l_off)]).collect();
                    let diag = diagonal_from_modes(&gl, l_off, l);
                    for (x, v) in diag.iter().enumerate() {
                        let _ = writeln!(
                            tables[l_off - 1],
                            "{t:.12e},{x},{:.12e},{:.12e},{}",
                            v.re, v.im, cfg.method
                        );
                    }
                }
            }
        }
        Method::Asymptotic => {
            for &t in &cfg.times {
                for l_off in 1..=lmax {
                    for x in 0..l {
                        let d = dephasing_chain::observables::signed_distance(x as i64, l as i64);
                        let v = if cfg.params.gamma * t >= 1.0 {
                            offdiag_longtime(d, l_off, t, &cfg.params)?
                        } else {
                            dephasing_chain::thermo::offdiag_ballistic(
                                d, l_off, t, &cfg.params, cfg.nq,
                            )?
                        };
                        let _ = writeln!(
                            tables[l_off - 1],
                            "{t:.12e},{x},{:.12e},{:.12e},{}",
                            v.re, v.im, cfg.method
                        );
                    }
                }
            }
        }
        Method::TransferContour => {
            return Err(Error::InvalidParams(
                "offdiag supports methods ed, transfer-talbot and asymptotic".into(),
            ));
        }
    }
    for (l_off, table) in (1..=lmax).zip(tables) {
        write_file(&format!("{}_offdiag_l{l_off}.csv", cfg.output), &table, &mut files)?;
    }
    write_manifest(cfg, "offdiag", start.elapsed().as_secs_f64(), &mut files)?;
    Ok(Artifacts { files })
}

/// Transferred magnetization and beta(t): "t,M,beta" plus JSON meta.
pub fn cmd_beta(cfg: &RunConfig) -> Result<Artifacts, Error> {
    let start = Instant::now();
    if !matches!(cfg.initial, Initial::DomainWall) {
        return Err(Error::InvalidParams("beta requires initial=domain-wall".into()));
    }
    let engine = match cfg.method {
        Method::Ed => TransportEngine::Ed,
        Method::TransferContour => TransportEngine::TransferThermo(InversionMethod::Contour),
        Method::TransferTalbot => {
            TransportEngine::TransferThermo(InversionMethod::Talbot(TalbotConfig::default()))
        }
        Method::Asymptotic => {
            return Err(Error::InvalidParams("beta supports ed and transfer-* methods".into()))
        }
    };
    let mut series = transport_scan(&cfg.params, &cfg.times, engine)?;
    if let Some(w) = cfg.smooth {
        log_derivative_smoothed(&mut series, w);
    } else {
        log_derivative(&mut series);
    }
    let mut files = Vec::new();
    let mut csv = Vec::new();
    series.write_csv(&mut csv)?;
    write_file(
        &format!("{}_beta.csv", cfg.output),
        &String::from_utf8(csv).unwrap(),
        &mut files,
    )?;
    write_file(
        &format!("{}_beta.json", cfg.output),
        &serde_json::to_string_pretty(&series.to_json()).unwrap(),
        &mut files,
    )?;
    write_manifest(cfg, "beta", start.elapsed().as_secs_f64(), &mut files)?;
    Ok(Artifacts { files })
}

/// Max elementwise |ED - transfer-Talbot| on entries within lmax of the
/// diagonal, printed; errors when above 1e-6.
pub fn cmd_compare(cfg: &RunConfig) -> Result<f64, Error> {
    let l = cfg.params.sites;
    let init = cfg.initial.build(l).map_err(Error::InvalidParams)?;
    let t = *cfg.times.last().unwrap();
    let ed = evolve_modes(&init, &cfg.params, &[t], cfg.lmax)?;
    let ed_c = assemble_correlations(&ed[0], Some(l))?;
    let tal =
        transfer_talbot_modes(&init, &cfg.params, t, cfg.lmax, &TalbotConfig::default(), true)?;
    let tal_c = assemble_correlations(&tal, Some(l))?;
    let mut worst: f64 = 0.0;
    for x in 0..l {
        for y in 0..l {
            let d = (x + l - y) % l;
            if d.min(l - d) <= cfg.lmax {
                worst = worst.max((ed_c.entries[(x, y)] - tal_c.entries[(x, y)]).norm());
            }
        }
    }
    println!("max elementwise |ED - transfer| = {worst:.3e} (L={l}, t={t}, lmax={})", cfg.lmax);
    if worst > 1e-6 {
        return Err(Error::ModeFailure {
            mode: 0,
            message: format!("pipelines disagree: {worst:.3e} > 1e-6"),
        });
    }
    Ok(worst)
}

/// CSV "s_re,s_im,q,g00_re,g00_im" over an (s, q) grid.
pub fn cmd_resolvent_dump(
    cfg: &RunConfig,
    s_re: (f64, f64, usize),
    s_im: (f64, f64, usize),
) -> Result<Artifacts, Error> {
    let start = Instant::now();
    let l = cfg.params.sites;
    let mut csv = String::from("s_re,s_im,q,g00_re,g00_im\n");
    let (re0, re1, nre) = s_re;
    let (im0, im1, nim) = s_im;
    for i in 0..nre.max(1) {
        let re = if nre > 1 { re0 + (re1 - re0) * i as f64 / (nre - 1) as f64 } else { re0 };
        for k in 0..nim.max(1) {
            let im = if nim > 1 { im0 + (im1 - im0) * k as f64 / (nim - 1) as f64 } else { im0 };
            let s = C64::new(re, im);
            for n in 1..=l {
                let q = 2.0 * std::f64::consts::PI * n as f64 / l as f64;
                let g = g00_finite(s, q, &cfg.params)?;
                let _ = writeln!(csv, "{re:.12e},{im:.12e},{q:.12e},{:.12e},{:.12e}", g.re, g.im);
            }
        }
    }
    let mut files = Vec::new();
    write_file(&format!("{}_resolvent.csv", cfg.output), &csv, &mut files)?;
    write_manifest(cfg, "resolvent-dump", start.elapsed().as_secs_f64(), &mut files)?;
    Ok(Artifacts { files })
}
