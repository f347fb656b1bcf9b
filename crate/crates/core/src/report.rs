//! Plain-text and SVG renderings of dynamics records.
//!
//! Floats are printed with a fixed number of decimals so the same input
//! always produces byte-identical output.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::data::DynamicsRecord;
use crate::dynamics::{partition_regions, DynamicsError, GapDensity, Region};

/// Region label of every record; a pair in several regions gets the labels
/// joined with `+`, and a pair in none gets `-`.
pub fn region_labels(records: &[DynamicsRecord], fraction: f64) -> Result<HashMap<String, String>, DynamicsError> {
    let mut labels: HashMap<String, Vec<&str>> = HashMap::new();
    for region in [Region::Easy, Region::Ambiguous, Region::Hard] {
        for id in partition_regions(records, fraction, region)? {
            labels.entry(id).or_default().push(region.name());
        }
    }
    Ok(records
        .iter()
        .map(|r| {
            let l = labels.get(&r.pair_id).map(|v| v.join("+")).unwrap_or_else(|| "-".into());
            (r.pair_id.clone(), l)
        })
        .collect())
}

/// CSV with one row per pair: id, mean and std of pair confidence, region.
pub fn data_map_csv(records: &[DynamicsRecord], fraction: f64) -> Result<String, DynamicsError> {
    let labels = region_labels(records, fraction)?;
    let mut out = String::from("pair_id,pair_confidence_mean,pair_confidence_var,region\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{}",
            csv_field(&r.pair_id),
            r.pair_confidence_mean,
            r.pair_confidence_var,
            labels[&r.pair_id]
        );
    }
    Ok(out)
}

/// CSV with one row per bin: edges and both normalized densities.
pub fn histogram_csv(density: &GapDensity) -> String {
    let mut out = String::from("bin_start,bin_end,pairwise,softmax\n");
    for i in 0..density.pairwise.len() {
        let _ = writeln!(
            out,
            "{:.4},{:.4},{:.6},{:.6}",
            density.edges[i],
            density.edges[i + 1],
            density.pairwise[i],
            density.softmax[i]
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;

/// Overlaid step histograms of both gap series.
pub fn histogram_svg(density: &GapDensity) -> String {
    let bins = density.pairwise.len();
    let peak = density
        .pairwise
        .iter()
        .chain(&density.softmax)
        .copied()
        .fold(0.0, f64::max)
        .max(1e-12);
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / bins as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * v / peak;
    let path = |vals: &[f64]| {
        let mut d = format!("M{:.2},{:.2}", x(0), y(0.0));
        for (i, &v) in vals.iter().enumerate() {
            let _ = write!(d, " L{:.2},{:.2} L{:.2},{:.2}", x(i), y(v), x(i + 1), y(v));
        }
        let _ = write!(d, " L{:.2},{:.2}", x(bins), y(0.0));
        d
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for (label, i) in [("-1", 0), ("0", bins / 2), ("1", bins)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{label}</text>"#,
            x(i),
            H - PAD + 16.0
        );
    }
    let _ = writeln!(
        out,
        r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        path(&density.pairwise)
    );
    let _ = writeln!(
        out,
        r##"<path d="{}" fill="none" stroke="#d62728" stroke-width="1.5" stroke-dasharray="4 2"/>"##,
        path(&density.softmax)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="20" font-size="12" fill="#1f77b4">pairwise</text>"##,
        W - PAD - 120.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="20" font-size="12" fill="#d62728">softmax</text>"##,
        W - PAD - 50.0
    );
    out.push_str("</svg>\n");
    out
}
