// SPDX-License-Identifier: Apache-2.0

//! SVG device maps.
//!
//! Each qubit is a disc coloured `rgb(P01 / max * 255, 0, Ppm / max * 255)`
//! and labelled `P01/Ppm` in percent. Qubits without a benchmark line are
//! hatched. In calibration mode the discs show guide values instead and
//! links are coloured by `cx` error.

use std::fmt::Write as _;

use clap::ValueEnum;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::report::{BenchmarkReport, QubitReport, RateEntry, RateKind};
use crate::rng;

/// Link errors above this are drawn grey in calibration mode.
pub const LINK_ERROR_SCALE: f64 = 0.02;

const UNIT: f64 = 80.0;
const MARGIN: f64 = 50.0;
const RADIUS: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    Rates,
    Calibration,
}

/// Fruchterman-Reingold layout in a square of side `sqrt(n)`, deterministic in `seed`.
pub fn force_layout(n: usize, edges: &[[usize; 2]], seed: u64) -> Vec<[f64; 2]> {
    if n == 0 {
        return Vec::new();
    }
    let side = (n as f64).sqrt().max(1.0);
    let k = side / (n as f64).sqrt();
    let mut rng = rng::stream_rng(seed, 0);
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect();
    let iterations = 300;
    for it in 0..iterations {
        let temp = 0.1 * side * (1.0 - it as f64 / iterations as f64) + 1e-3;
        let mut disp = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                let dist = d[0].hypot(d[1]).max(1e-6);
                let f = k * k / dist;
                disp[i][0] += d[0] / dist * f;
                disp[i][1] += d[1] / dist * f;
            }
        }
        for &[a, b] in edges {
            let d = [pos[a][0] - pos[b][0], pos[a][1] - pos[b][1]];
            let dist = d[0].hypot(d[1]).max(1e-6);
            let f = dist * dist / k;
            for (q, s) in [(a, -1.0), (b, 1.0)] {
                disp[q][0] += s * d[0] / dist * f;
                disp[q][1] += s * d[1] / dist * f;
            }
        }
        for i in 0..n {
            let len = disp[i][0].hypot(disp[i][1]).max(1e-9);
            let step = len.min(temp);
            pos[i][0] = (pos[i][0] + disp[i][0] / len * step).clamp(0.0, side);
            pos[i][1] = (pos[i][1] + disp[i][1] / len * step).clamp(0.0, side);
        }
    }
    pos
}

fn bit_flip_entry(q: &QubitReport) -> Option<&RateEntry> {
    q.headline(RateKind::P01)
        .or_else(|| q.headline(RateKind::P1to0))
        .or_else(|| q.headline(RateKind::P0to1))
}

fn values(q: Option<&QubitReport>, mode: RenderMode) -> (Option<f64>, Option<f64>) {
    let pick = |e: Option<&RateEntry>| {
        e.and_then(|e| match mode {
            RenderMode::Rates => e.estimate,
            RenderMode::Calibration => Some(e.guide),
        })
    };
    match q {
        Some(q) if q.line.is_some() => (pick(bit_flip_entry(q)), pick(q.headline(RateKind::Ppm))),
        _ => (None, None),
    }
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "\u{2013}".to_owned(), |v| format!("{:.1}", 100.0 * v))
}

fn channel(v: Option<f64>, max: f64) -> u8 {
    match v {
        Some(v) if max > 0.0 => (255.0 * (v / max).clamp(0.0, 1.0)).round() as u8,
        _ => 0,
    }
}

/// Draws the device coloured by measured rates or by calibration guide values.
pub fn render_device_map(report: &BenchmarkReport, mode: RenderMode) -> String {
    let dev = &report.device;
    let n = dev.qubit_count;
    let edges: Vec<[usize; 2]> = dev.edges.iter().map(|e| e.qubits).collect();
    let layout = dev.layout.clone().unwrap_or_else(|| force_layout(n, &edges, 0));
    let max_x = layout.iter().map(|p| p[0]).fold(0.0, f64::max);
    let max_y = layout.iter().map(|p| p[1]).fold(0.0, f64::max);
    let px = |q: usize| (MARGIN + UNIT * layout[q][0], MARGIN + UNIT * layout[q][1]);
    let width = 2.0 * MARGIN + UNIT * max_x;
    let height = 2.0 * MARGIN + UNIT * max_y + 30.0;

    let vals: Vec<(Option<f64>, Option<f64>)> = (0..n).map(|q| values(report.qubit(q), mode)).collect();
    let max01 = vals.iter().filter_map(|v| v.0).fold(0.0, f64::max);
    let max_pm = vals.iter().filter_map(|v| v.1).fold(0.0, f64::max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    s.push_str(
        r##"<defs><pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6" patternTransform="rotate(45)"><rect width="6" height="6" fill="#ffffff"/><line x1="0" y1="0" x2="0" y2="6" stroke="#999999" stroke-width="2"/></pattern></defs>
"##,
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    for e in &dev.edges {
        let (x1, y1) = px(e.qubits[0]);
        let (x2, y2) = px(e.qubits[1]);
        let stroke = match mode {
            RenderMode::Rates => "#bbbbbb".to_owned(),
            RenderMode::Calibration if e.cx_error <= LINK_ERROR_SCALE => {
                format!("rgb(0,{},0)", channel(Some(e.cx_error), LINK_ERROR_SCALE))
            }
            RenderMode::Calibration => "#808080".to_owned(),
        };
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{stroke}" stroke-width="6"><title>cx {}-{}: {:.4}</title></line>"#,
            e.qubits[0], e.qubits[1], e.cx_error
        );
    }

    for (q, &(v01, vpm)) in vals.iter().enumerate() {
        let (x, y) = px(q);
        let benchmarked = report.qubit(q).is_some_and(|r| r.line.is_some());
        let fill = if benchmarked {
            format!("rgb({},0,{})", channel(v01, max01), channel(vpm, max_pm))
        } else {
            "url(#hatch)".to_owned()
        };
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.1}" cy="{y:.1}" r="{RADIUS}" fill="{fill}" stroke="#333333" stroke-width="1.5"/>"##
        );
        let id_colour = if benchmarked { "#ffffff" } else { "#000000" };
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="12" text-anchor="middle" fill="{id_colour}">{q}</text>"#,
            y + 4.0
        );
        if benchmarked {
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}/{}</text>"#,
                y + RADIUS + 13.0,
                percent(v01),
                percent(vpm)
            );
        }
    }

    let caption = match mode {
        RenderMode::Rates => "measured P01/Ppm (%)",
        RenderMode::Calibration => "guide P01/Ppm (%); links: cx error",
    };
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="12">{}{caption}</text>"#,
        height - 12.0,
        dev.name.as_deref().map(|n| format!("{n}: ")).unwrap_or_default()
    );
    s.push_str("</svg>\n");
    s
}
