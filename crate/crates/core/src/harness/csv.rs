//! Plain CSV output for curves, TPR reports and per-session rewards.

use std::io::Write;
use std::path::Path;

use super::stats::CurveStat;
use super::tpr::TprReport;
use crate::error::Result;

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// dropped, scientific notation outside `[1e-5, 1e9)`.
pub fn format_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if !(-5..DIGITS).contains(&exponent) {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exponent.abs())
    } else {
        let decimals = (DIGITS - 1 - exponent) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_curves<W: Write>(out: &mut W, stats: &[CurveStat]) -> Result<()> {
    writeln!(out, "episode,mean_reward,ci_half_width,n_sessions")?;
    for (i, s) in stats.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            format_g9(s.mean),
            format_g9(s.ci_half_width),
            s.n_sessions
        )?;
    }
    Ok(())
}

/// Absent TPR values are written as empty fields.
pub fn write_tpr<W: Write>(out: &mut W, report: &TprReport) -> Result<()> {
    writeln!(out, "fault_type,threshold,tpr,fault_count")?;
    for (kind, e) in report.rows() {
        let tpr = e.tpr.map(format_g9).unwrap_or_default();
        writeln!(out, "{kind},{},{tpr},{}", e.threshold, e.fault_count)?;
    }
    Ok(())
}

pub fn write_session<W: Write>(out: &mut W, rewards: &[f64]) -> Result<()> {
    writeln!(out, "episode,reward")?;
    for (i, r) in rewards.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, format_g9(*r))?;
    }
    Ok(())
}

/// Renders with `render` into memory, then writes the file in one go.
pub fn write_file(
    path: &Path,
    render: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let mut bytes = Vec::new();
    render(&mut bytes)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (5000.0, "5000"),
            (1.0 / 101.0, "0.0099009901"),
            (0.1, "0.1"),
            (123456789.4, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (2.0e-4, "0.0002"),
            (1.5e-7, "1.5e-07"),
            (-3.25, "-3.25"),
            (9.999999999, "10"),
            (0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "{x}");
        }
    }

    #[test]
    fn session_layout() {
        let mut out = Vec::new();
        write_session(&mut out, &[1.5, 2.0]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "episode,reward\n1,1.5\n2,2\n");
    }
}
