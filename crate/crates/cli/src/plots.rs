//! Gnuplot script emission for the standard figure layouts. Data files are
//! validated against the expected column schema before anything is written;
//! a schema mismatch produces no partial file.

use dephasing_chain::Error;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4,
}

impl Figure {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3a" => Ok(Figure::Fig3a),
            "fig3b" => Ok(Figure::Fig3b),
            "fig4" => Ok(Figure::Fig4),
            other => Err(format!("unknown figure '{other}' (fig2, fig3a, fig3b, fig4)")),
        }
    }

    fn expected_columns(&self) -> &'static [&'static str] {
        match self {
            Figure::Fig2 => &["t", "x", "value_re", "value_im", "method"],
            Figure::Fig3a | Figure::Fig3b => &["t", "M", "beta"],
            Figure::Fig4 => &["t", "x", "value_re", "value_im", "method"],
        }
    }
}

/// Check the header row of each data file against the figure's schema.
fn validate(figure: Figure, data: &[String]) -> Result<(), Error> {
    if data.is_empty() {
        return Err(Error::InvalidParams("no data files given".into()));
    }
    for path in data {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParams(format!("cannot read {path}: {e}")))?;
        let header = text.lines().next().unwrap_or("");
        let found: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
        let expected = figure.expected_columns();
        if found != expected {
            return Err(Error::InvalidParams(format!(
                "{path}: expected columns {expected:?}, found {found:?}"
            )));
        }
    }
    Ok(())
}

/// Emit a self-contained gnuplot script reproducing the figure layout.
pub fn emit_plot_script(figure: Figure, data: &[String], out: &str) -> Result<(), Error> {
    validate(figure, data)?;
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key top left");
    match figure {
        Figure::Fig2 => {
            let _ = writeln!(s, "set xlabel 'x - L/2'");
            let _ = writeln!(s, "set ylabel 'magnetization density'");
            let _ = writeln!(s, "set title 'domain-wall melting'");
            let _ = writeln!(s, "plot \\");
            for (i, path) in data.iter().enumerate() {
                let sep = if i + 1 == data.len() { "" } else { ", \\" };
                let _ = writeln!(
                    s,
                    "  '{path}' every ::1 using 2:(-$3) with lines title 'profile {i}'{sep}"
                );
            }
        }
        Figure::Fig3a => {
            let _ = writeln!(s, "set logscale xy");
            let _ = writeln!(s, "set xlabel 'gamma t'");
            let _ = writeln!(s, "set ylabel 'M(t)'");
            let _ = writeln!(s, "plot \\");
            for (i, path) in data.iter().enumerate() {
                let sep = if i + 1 == data.len() { "" } else { ", \\" };
                let _ = writeln!(s, "  '{path}' every ::1 using 1:2 with lines title 'M {i}'{sep}");
            }
        }
        Figure::Fig3b => {
            let _ = writeln!(s, "set logscale x");
            let _ = writeln!(s, "set xlabel 'gamma t'");
            let _ = writeln!(s, "set ylabel 'beta(t)'");
            let _ = writeln!(s, "set yrange [0:1.2]");
            let _ = writeln!(s, "ballistic(x) = 1.0");
            let _ = writeln!(s, "diffusive(x) = 0.5");
            let _ = writeln!(s, "plot \\");
            for path in data {
                let _ = writeln!(s, "  '{path}' every ::1 using 1:3 with lines title 'beta', \\");
            }
            let _ = writeln!(s, "  ballistic(x) dashtype 2 title 'ballistic', \\");
            let _ = writeln!(s, "  diffusive(x) dashtype 2 title 'diffusive'");
        }
        Figure::Fig4 => {
            let _ = writeln!(s, "set logscale xy");
            let _ = writeln!(s, "set xlabel 'gamma t'");
            let _ = writeln!(s, "set ylabel '|C_{{x+l,x}}|'");
            let _ = writeln!(s, "slope15(x) = x**(-1.5)");
            let _ = writeln!(s, "slope25(x) = x**(-2.5)");
            let _ = writeln!(s, "plot \\");
            for (i, path) in data.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  '{path}' every ::1 using 1:(sqrt($3*$3+$4*$4)) with points title 'l={}', \\",
                    i + 1
                );
            }
            let _ = writeln!(s, "  slope15(x) dashtype 2 title 't^{{-1.5}}', \\");
            let _ = writeln!(s, "  slope25(x) dashtype 3 title 't^{{-2.5}}'");
        }
    }
    std::fs::write(out, s)?;
    Ok(())
}
