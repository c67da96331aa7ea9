//! CSV tables and SVG charts for impact, fidelity and metrics.

use std::fmt::Write as _;

use crate::explain::ImpactReport;
use crate::fidelity::FidelityResult;
use crate::geograph::NodeKind;

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn normalized(x: f64, max: f64) -> f64 {
    if max > 0.0 {
        x / max
    } else {
        0.0
    }
}

/// `kind,mean_impact,max_normalized`, one row per observation kind.
pub fn impact_by_kind_csv(report: &ImpactReport) -> String {
    let max = max_of(report.by_kind.iter().map(|(_, v)| *v));
    let mut out = String::from("kind,mean_impact,max_normalized\n");
    for (kind, v) in &report.by_kind {
        writeln!(out, "{kind},{v:.9},{:.6}", normalized(*v, max)).unwrap();
    }
    out
}

/// `time,kind,mean_impact,max_normalized`, normalized by the series maximum.
pub fn impact_series_csv(report: &ImpactReport) -> String {
    let max = max_of(
        report
            .series
            .iter()
            .flat_map(|(_, row)| row.iter().map(|(_, v)| *v)),
    );
    let mut out = String::from("time,kind,mean_impact,max_normalized\n");
    for (t, row) in &report.series {
        for (kind, v) in row {
            writeln!(out, "{t},{kind},{v:.9},{:.6}", normalized(*v, max)).unwrap();
        }
    }
    out
}

/// `method,fraction,fidelity_plus,fidelity_minus`.
pub fn fidelity_csv(results: &[FidelityResult]) -> String {
    let mut out = String::from("method,fraction,fidelity_plus,fidelity_minus\n");
    for r in results {
        writeln!(
            out,
            "{},{:.2},{:.6},{:.6}",
            r.ranking, r.fraction, r.fidelity_plus, r.fidelity_minus
        )
        .unwrap();
    }
    out
}

/// Prefixes a `# seed = N` comment line.
pub fn with_seed_header(seed: u64, body: &str) -> String {
    format!("# seed = {seed}\n{body}")
}

const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79",
];

fn svg_open(out: &mut String, w: u32, h: u32, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
        w / 2
    )
    .unwrap();
}

/// Bar chart of mean impact per observation kind.
pub fn impact_bar_svg(report: &ImpactReport) -> String {
    let (w, h) = (640u32, 360u32);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 60.0);
    let plot_w = w as f64 - left - right;
    let plot_h = h as f64 - top - bottom;
    let max = max_of(report.by_kind.iter().map(|(_, v)| *v));
    let mut out = String::new();
    svg_open(
        &mut out,
        w,
        h,
        &format!("Mean impact per observation type ({})", report.method),
    );
    let slot = plot_w / report.by_kind.len().max(1) as f64;
    for (i, (kind, v)) in report.by_kind.iter().enumerate() {
        let bh = normalized(*v, max) * plot_h;
        let x = left + i as f64 * slot + slot * 0.15;
        let y = top + plot_h - bh;
        writeln!(
            out,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{bh:.1}" fill="{}"><title>{kind}: {v:.6}</title></rect>"#,
            slot * 0.7,
            PALETTE[i % PALETTE.len()]
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" transform="rotate(-45 {:.1} {:.1})">{kind}</text>"#,
            x + slot * 0.35,
            top + plot_h + 14.0,
            x + slot * 0.35,
            top + plot_h + 14.0
        )
        .unwrap();
    }
    axes(&mut out, left, top, plot_w, plot_h, max);
    out.push_str("</svg>\n");
    out
}

fn axes(out: &mut String, left: f64, top: f64, plot_w: f64, plot_h: f64, max: f64) {
    writeln!(
        out,
        r#"<path d="M{left} {top} V{} H{}" stroke="black" fill="none"/>"#,
        top + plot_h,
        left + plot_w
    )
    .unwrap();
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = top + plot_h * (1.0 - frac);
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            left - 4.0,
            y + 4.0,
            max * frac
        )
        .unwrap();
    }
}

/// One line per observation kind over time.
pub fn impact_series_svg(report: &ImpactReport) -> String {
    let (w, h) = (720u32, 380u32);
    let (left, right, top, bottom) = (60.0, 110.0, 30.0, 40.0);
    let plot_w = w as f64 - left - right;
    let plot_h = h as f64 - top - bottom;
    let max = max_of(
        report
            .series
            .iter()
            .flat_map(|(_, row)| row.iter().map(|(_, v)| *v)),
    );
    let steps = report.series.len();
    let x_at = |i: usize| left + plot_w * i as f64 / (steps.saturating_sub(1).max(1)) as f64;
    let mut out = String::new();
    svg_open(
        &mut out,
        w,
        h,
        &format!("Impact per observation type over time ({})", report.method),
    );
    for (k, kind) in NodeKind::OBSERVATIONS.iter().enumerate() {
        let mut d = String::new();
        for (i, (_, row)) in report.series.iter().enumerate() {
            let v = row
                .iter()
                .find(|(kk, _)| kk == kind)
                .map_or(0.0, |(_, v)| *v);
            let y = top + plot_h * (1.0 - normalized(v, max));
            write!(
                d,
                "{}{:.1} {:.1} ",
                if i == 0 { "M" } else { "L" },
                x_at(i),
                y
            )
            .unwrap();
        }
        let color = PALETTE[k % PALETTE.len()];
        writeln!(
            out,
            r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
            d.trim_end()
        )
        .unwrap();
        let ly = top + 12.0 + k as f64 * 16.0;
        writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{kind}</text>"#,
            left + plot_w + 12.0,
            ly - 9.0,
            left + plot_w + 26.0,
            ly
        )
        .unwrap();
    }
    if let (Some((t0, _)), Some((t1, _))) = (report.series.first(), report.series.last()) {
        writeln!(
            out,
            r#"<text x="{left}" y="{:.1}">t={t0}</text><text x="{:.1}" y="{:.1}" text-anchor="end">t={t1}</text>"#,
            top + plot_h + 16.0,
            left + plot_w,
            top + plot_h + 16.0
        )
        .unwrap();
    }
    axes(&mut out, left, top, plot_w, plot_h, max);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::ExplanationMethod;
    use crate::fidelity::Ranking;

    fn report() -> ImpactReport {
        let by_kind: Vec<(NodeKind, f64)> = NodeKind::OBSERVATIONS
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, i as f64 * 0.1))
            .collect();
        ImpactReport {
            method: ExplanationMethod::GradCam,
            per_node: Default::default(),
            by_kind: by_kind.clone(),
            series: vec![(1, by_kind.clone()), (2, by_kind)],
        }
    }

    #[test]
    fn csv_layouts() {
        let r = report();
        let kinds = impact_by_kind_csv(&r);
        assert_eq!(kinds.lines().count(), 12);
        assert!(kinds
            .lines()
            .last()
            .unwrap()
            .starts_with("MHS,1.000000000,1.000000"));
        let series = impact_series_csv(&r);
        assert_eq!(series.lines().count(), 23);
        assert!(series
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("1,AIRCRAFT,0.000000000"));
        let fid = fidelity_csv(&[FidelityResult {
            ranking: Ranking::Method(ExplanationMethod::Lrp),
            fraction: 0.1,
            fidelity_plus: 0.25,
            fidelity_minus: 0.09,
            base_accuracy: 0.8,
        }]);
        assert_eq!(
            fid,
            "method,fraction,fidelity_plus,fidelity_minus\nLRP,0.10,0.250000,0.090000\n"
        );
    }

    #[test]
    fn charts_are_well_formed() {
        let r = report();
        for svg in [impact_bar_svg(&r), impact_series_svg(&r)] {
            assert!(svg.starts_with("<svg"));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert!(svg.contains("GK2A"));
        }
    }
}
