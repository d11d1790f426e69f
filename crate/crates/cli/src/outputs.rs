//! File outputs: diagnostics CSV (17 significant digits, LF endings,
//! bit-stable round trips), decay CSV, gnuplot-compatible plot scripts and
//! JSON reports.

use frontchannel_core::diagnostics::{
    DecaySample, DecaySeries, DiagnosticsSample, DiagnosticsSeries,
};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

pub const SERIES_HEADER: &str =
    "t,B,N,u_inf,Bbar,Nbar,Ubar,front_pos,mass,l2theta,grad_theta_l2,grad_u_l2,div_max";

/// 17 significant digits: round-trips f64 exactly.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_to_csv(series: &DiagnosticsSeries) -> String {
    let mut out = String::new();
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for s in &series.samples {
        let cols = [
            s.t,
            s.b,
            s.n,
            s.u_inf,
            s.b_bar,
            s.n_bar,
            s.u_bar,
            s.front_pos,
            s.mass,
            s.l2_theta,
            s.grad_theta_l2,
            s.grad_u_l2,
            s.div_max,
        ];
        let mut first = true;
        for c in cols {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_float(c));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn series_from_csv(text: &str) -> io::Result<DiagnosticsSeries> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty series file"))?;
    if header != SERIES_HEADER {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unexpected series header: {header}"),
        ));
    }
    let mut series = DiagnosticsSeries::default();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.parse::<f64>()).collect();
        let v = vals.map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("row {}: {e}", i + 2))
        })?;
        if v.len() != 13 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("row {}: expected 13 columns, got {}", i + 2, v.len()),
            ));
        }
        series.push(DiagnosticsSample {
            t: v[0],
            b: v[1],
            n: v[2],
            u_inf: v[3],
            b_bar: v[4],
            n_bar: v[5],
            u_bar: v[6],
            front_pos: v[7],
            mass: v[8],
            l2_theta: v[9],
            grad_theta_l2: v[10],
            grad_u_l2: v[11],
            div_max: v[12],
        });
    }
    Ok(series)
}

pub const DECAY_HEADER: &str = "t,l1,l2,linf,grad_l2,mass";

pub fn decay_to_csv(series: &DecaySeries) -> String {
    let mut out = String::new();
    out.push_str(DECAY_HEADER);
    out.push('\n');
    for s in &series.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(s.t),
            fmt_float(s.l1),
            fmt_float(s.l2),
            fmt_float(s.linf),
            fmt_float(s.grad_l2),
            fmt_float(s.mass)
        );
    }
    out
}

pub fn decay_from_csv(text: &str) -> io::Result<Vec<DecaySample>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty decay file"))?;
    if header != DECAY_HEADER {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad decay header"));
    }
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let v: Result<Vec<f64>, _> = line.split(',').map(|s| s.parse::<f64>()).collect();
        let v = v.map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        out.push(DecaySample {
            t: v[0],
            l1: v[1],
            l2: v[2],
            linf: v[3],
            grad_l2: v[4],
            mass: v[5],
        });
    }
    Ok(out)
}

/// Two-column whitespace data file for gnuplot.
pub fn two_column_dat(rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::new();
    for (a, b) in rows {
        let _ = writeln!(out, "{} {}", fmt_float(a), fmt_float(b));
    }
    out
}

/// gnuplot script plotting one two-column data file.
pub fn plot_script(dat_name: &str, title: &str, xlabel: &str, ylabel: &str, loglog: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set title '{title}'");
    let _ = writeln!(out, "set xlabel '{xlabel}'");
    let _ = writeln!(out, "set ylabel '{ylabel}'");
    if loglog {
        let _ = writeln!(out, "set logscale xy");
    }
    let _ = writeln!(out, "plot '{dat_name}' using 1:2 with lines title '{ylabel}'");
    out
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    write_text(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_csv_roundtrip_is_exact() {
        let mut s = DiagnosticsSeries::default();
        for k in 1..20 {
            let t = k as f64 * 0.1;
            s.push(DiagnosticsSample {
                t,
                b: (t * 1.618).sin() * 1e-7,
                n: t.exp(),
                u_inf: 1.0 / t,
                b_bar: t * std::f64::consts::PI,
                n_bar: f64::MIN_POSITIVE * t,
                u_bar: 0.1 + t,
                front_pos: 12.0 + t,
                mass: 1e17 * t,
                l2_theta: t.sqrt(),
                grad_theta_l2: t * t,
                grad_u_l2: 1e-300,
                div_max: 0.0,
            });
        }
        let csv = series_to_csv(&s);
        let back = series_from_csv(&csv).unwrap();
        assert_eq!(s.samples.len(), back.samples.len());
        for (a, b) in s.samples.iter().zip(back.samples.iter()) {
            assert_eq!(a, b, "round trip not bit exact");
        }
        // Stable bytes on re-emission.
        assert_eq!(csv, series_to_csv(&back));
        // LF endings only.
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn decay_csv_roundtrip() {
        let mut s = DecaySeries::default();
        s.samples.push(DecaySample { t: 0.5, l1: 1.0, l2: 0.5, linf: 0.25, grad_l2: 0.1, mass: 1.0 });
        let text = decay_to_csv(&s);
        let back = decay_from_csv(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].t, 0.5);
        assert_eq!(back[0].mass, 1.0);
    }

    #[test]
    fn empty_series_is_header_only() {
        let s = DiagnosticsSeries::default();
        let csv = series_to_csv(&s);
        assert_eq!(csv, format!("{SERIES_HEADER}\n"));
        assert!(series_from_csv(&csv).unwrap().is_empty());
    }
}
