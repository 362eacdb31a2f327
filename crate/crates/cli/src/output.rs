//! Regret tables and plots.

use std::fmt::Write as _;

use prebandit::{BatchResult, Variant};

use crate::error::CliError;

pub const CSV_HEADER: [&str; 9] = [
    "policy",
    "variant",
    "n",
    "l",
    "replicate_count",
    "checkpoint_T",
    "mean_cum_regret",
    "std_cum_regret",
    "seed",
];

/// Seventeen significant digits, so equal bytes mean equal doubles.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per policy and checkpoint; `l` is empty for the flexible variant.
pub fn regret_csv(result: &BatchResult) -> Result<String, CliError> {
    let (variant, l) = match result.variant {
        Variant::Restricted { l } => ("restricted", l.to_string()),
        Variant::Flexible => ("flexible", String::new()),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Usage(format!("writing csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in &result.policies {
        for ((t, mean), std) in p.checkpoints.iter().zip(&p.mean).zip(&p.std) {
            w.write_record([
                p.label.clone(),
                variant.to_string(),
                result.n.to_string(),
                l.clone(),
                result.replicates.to_string(),
                t.to_string(),
                format_float(*mean),
                format_float(*std),
                result.master_seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("writing csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv fields are utf-8"))
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Mean cumulative regret against `T`, one polyline per policy, starting at the origin.
pub fn regret_svg(result: &BatchResult) -> String {
    let (width, height) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let t_max = result
        .policies
        .iter()
        .flat_map(|p| p.checkpoints.iter().copied())
        .max()
        .unwrap_or(1) as f64;
    let y_max = result
        .policies
        .iter()
        .flat_map(|p| p.mean.iter().copied())
        .fold(0.0_f64, f64::max);
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let x = |t: f64| left + plot_w * t / t_max;
    let y = |r: f64| top + plot_h * (1.0 - r / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<path d="M{left:.2} {top:.2} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        top + plot_h,
        left + plot_w
    );
    if let Some(p) = result.policies.first() {
        for &t in &p.checkpoints {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
                x(t as f64),
                top + plot_h + 18.0
            );
        }
    }
    for frac in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.1}</text>"#,
            left - 6.0,
            y(frac * y_max) + 4.0,
            frac * y_max
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">T</text>"#,
        left + plot_w / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">mean cumulative regret</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (i, p) in result.policies.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = format!("{:.2},{:.2}", x(0.0), y(0.0));
        for (&t, &m) in p.checkpoints.iter().zip(&p.mean) {
            let _ = write!(points, " {:.2},{:.2}", x(t as f64), y(m));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            p.label
        );
    }
    s.push_str("</svg>\n");
    s
}
