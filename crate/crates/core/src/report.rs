//! Text outputs: per-state solve CSV, q-distribution CSV, simulation summary
//! and plain PGM heatmaps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::StateId;
use crate::monte_carlo::McEstimate;
use crate::qdist::TruncatedMoments;
use crate::river::Layout;
use crate::solver::SolveResult;

/// Ten decimals with trailing zeros trimmed (`2.0`, `1.4142135624`); values
/// below 1e-4 in magnitude switch to ten significant digits in exponent form.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    if v.abs() < 1e-4 {
        return format!("{v:.9e}");
    }
    let mut text = format!("{v:.10}");
    while text.ends_with('0') && !text.ends_with(".0") {
        text.pop();
    }
    text
}

fn format_optional(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), format_real)
}

pub fn solve_csv(result: &SolveResult, layout: Option<&Layout>) -> String {
    let mut out = String::from("state,row,col,s,A,B,D\n");
    for x in 0..result.s.len() {
        let (row, col) = match layout {
            Some(l) => {
                let (r, c) = l.cell(x);
                (r.to_string(), c.to_string())
            }
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{x},{row},{col},{},{},{},{}",
            format_real(result.s[x]),
            format_optional(result.a[x]),
            format_optional(result.b[x]),
            format_optional(result.d[x]),
        );
    }
    out.push_str("# phase residual iterations\n");
    for (name, phase) in result.phases() {
        let _ = writeln!(out, "# {name} {:e} {}", phase.residual, phase.iterations);
    }
    out
}

pub fn qdist_csv(column: &[f64], moments: &TruncatedMoments, s: f64) -> String {
    let mut out = String::from("T,q\n");
    for (t, q) in column.iter().enumerate() {
        let _ = writeln!(out, "{t},{}", format_real(*q));
    }
    let _ = writeln!(
        out,
        "# mass {} s {} defect {}",
        format_real(moments.mass),
        format_real(s),
        format_real(s - moments.mass)
    );
    out
}

pub fn simulation_summary(state: StateId, step_cap: u64, est: &McEstimate) -> String {
    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        let _ = writeln!(out, "{key}={value}");
    };
    line("state", state.to_string());
    line("episodes", est.n_total.to_string());
    line("seed", est.seed.to_string());
    line("step_cap", step_cap.to_string());
    line("successes", est.n_success.to_string());
    line("truncated", est.n_truncated.to_string());
    line("s_hat", format_real(est.s_hat));
    line("se_s", format_real(est.se_s));
    line("a_hat", format_optional(est.a_hat));
    line("se_a", format_optional(est.se_a));
    line("d_hat", format_optional(est.d_hat));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    S,
    A,
    B,
    D,
}

impl Field {
    pub fn column(self) -> &'static str {
        match self {
            Field::S => "s",
            Field::A => "A",
            Field::B => "B",
            Field::D => "D",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "s" => Ok(Field::S),
            "A" => Ok(Field::A),
            "B" => Ok(Field::B),
            "D" => Ok(Field::D),
            other => Err(format!("unknown field {other:?}, expected s, A, B or D")),
        }
    }
}

/// Renders one column of a solve CSV as a plain (`P2`) PGM image.
///
/// Pixels are `round(255 v / v_max)`, with `v_max = 1` for `s` and the
/// largest defined value otherwise. Undefined values and cells without a
/// state are black. The grid size defaults to the extent of the layout.
pub fn heatmap_pgm(csv: &str, field: Field, size: Option<(usize, usize)>) -> Result<String> {
    let bad = |msg: String| Error::ModelFile(msg);
    let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("empty solve CSV".into()))?
        .split(',')
        .collect();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| bad(format!("solve CSV has no {name} column")))
    };
    let (row_idx, col_idx, value_idx) = (
        position("row")?,
        position("col")?,
        position(field.column())?,
    );

    let mut points = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let get = |i: usize| {
            cols.get(i)
                .copied()
                .ok_or_else(|| bad(format!("data line {} is short", n + 1)))
        };
        let parse_cell = |i: usize| -> Result<usize> {
            let text = get(i)?;
            if text.is_empty() {
                return Err(bad("solve CSV has no layout".into()));
            }
            text.parse()
                .map_err(|_| bad(format!("bad grid coordinate {text:?}")))
        };
        let (row, col) = (parse_cell(row_idx)?, parse_cell(col_idx)?);
        let value = match get(value_idx)? {
            "NA" => None,
            text => Some(
                text.parse::<f64>()
                    .map_err(|_| bad(format!("bad value {text:?}")))?,
            ),
        };
        points.push((row, col, value));
    }

    let (width, height) = size.unwrap_or_else(|| {
        (
            points.iter().map(|p| p.1 + 1).max().unwrap_or(0),
            points.iter().map(|p| p.0 + 1).max().unwrap_or(0),
        )
    });
    let v_max = match field {
        Field::S => 1.0,
        _ => points.iter().filter_map(|p| p.2).fold(0.0, f64::max),
    };

    let mut pixels = vec![0u8; width * height];
    for &(row, col, value) in &points {
        if row >= height || col >= width {
            return Err(bad(format!(
                "cell ({row}, {col}) outside {width}x{height} grid"
            )));
        }
        if let Some(v) = value {
            if v_max > 0.0 {
                pixels[row * width + col] = (255.0 * v / v_max).round().clamp(0.0, 255.0) as u8;
            }
        }
    }

    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks(width.max(1)).take(height) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(1.0), "1.0");
        assert_eq!(format_real(2.0), "2.0");
        assert_eq!(format_real(0.0), "0.0");
        assert_eq!(format_real(0.0625), "0.0625");
        assert_eq!(format_real(2f64.sqrt()), "1.4142135624");
        assert_eq!(format_real(0.9999999999999), "1.0");
        assert_eq!(format_real(1234.5), "1234.5");
        assert_eq!(format_real(1.1491991829974e-12), "1.149199183e-12");
        assert_eq!(format_real(-0.5), "-0.5");
    }

    #[test]
    fn heatmap_scales_and_blanks() {
        let csv = "state,row,col,s,A,B,D\n\
                   0,0,0,1.0,0.0,0.0,0.0\n\
                   1,0,1,0.5,2.0,6.0,1.0\n\
                   2,1,1,0.0,NA,NA,NA\n\
                   # phase residual iterations\n";
        assert_eq!(
            heatmap_pgm(csv, Field::S, None).unwrap(),
            "P2\n2 2\n255\n255 128\n0 0\n"
        );
        assert_eq!(
            heatmap_pgm(csv, Field::A, None).unwrap(),
            "P2\n2 2\n255\n0 255\n0 0\n"
        );
        assert_eq!(
            heatmap_pgm(csv, Field::D, Some((3, 2))).unwrap(),
            "P2\n3 2\n255\n0 255 0\n0 0 0\n"
        );
    }

    #[test]
    fn heatmap_needs_layout() {
        let csv = "state,row,col,s,A,B,D\n0,,,1.0,0.0,0.0,0.0\n";
        assert!(heatmap_pgm(csv, Field::S, None).is_err());
        assert!("C".parse::<Field>().is_err());
    }
}
