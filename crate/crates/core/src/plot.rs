//! Deterministic SVG rendering of pareto (variance explained) charts and
//! PC1/PC2 scatter plots. Numbers are written with fixed precision so equal
//! inputs give byte-identical documents.

use std::fmt::Write;

use thiserror::Error;

use crate::cluster::{Centroids, Cluster, ClusterAssignment};
use crate::linalg::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("scatter plot needs at least 2 components, got {0}")]
    InsufficientComponents(usize),
    #[error("{scores} score rows but {assignments} assignments")]
    LengthMismatch { scores: usize, assignments: usize },
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 60.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn plot_width() -> f64 {
    WIDTH - MARGIN_LEFT - MARGIN_RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar per component (percent of variance) plus a cumulative line.
pub fn render_pareto(variance_explained: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, "Variance explained per principal component");
    let n = variance_explained.len().max(1);
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_height();
    let slot = plot_width() / n as f64;
    let y_of = |pct: f64| y0 - plot_height() * pct / 100.0;

    // axes and percent ticks
    let _ = writeln!(out, r#"<g class="axes" stroke="black">"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}"/>"#, x0 + plot_width());
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{MARGIN_TOP:.2}"/>"#);
    let _ = writeln!(out, "</g>");
    for tick in (0..=100).step_by(25) {
        let y = y_of(tick as f64);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick}%</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }

    let mut cumulative = 0.0;
    let mut points = Vec::with_capacity(n);
    let _ = writeln!(out, r##"<g class="bars" fill="#4e79a7">"##);
    for (i, frac) in variance_explained.iter().enumerate() {
        let pct = 100.0 * frac;
        cumulative += pct;
        let x = x0 + slot * i as f64 + slot * 0.15;
        let w = slot * 0.7;
        let y = y_of(pct);
        let _ = writeln!(
            out,
            r#"<rect class="bar" data-component="{}" data-percent="{pct:.3}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}"/>"#,
            i + 1,
            y0 - y
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="black">PC{}</text>"#,
            x + w / 2.0,
            y0 + 18.0,
            i + 1
        );
        points.push((x + w / 2.0, y_of(cumulative), cumulative));
    }
    let _ = writeln!(out, "</g>");

    let path: Vec<String> = points.iter().map(|(x, y, _)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r##"<polyline class="cumulative" fill="none" stroke="#e15759" stroke-width="2" points="{}"/>"##,
        path.join(" ")
    );
    for (x, y, c) in &points {
        let _ = writeln!(
            out,
            r##"<circle class="cumulative-point" data-percent="{c:.3}" cx="{x:.2}" cy="{y:.2}" r="3.5" fill="#e15759"/>"##
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Principal component</text>"#,
        x0 + plot_width() / 2.0,
        HEIGHT - 15.0
    );
    out.push_str("</svg>\n");
    out
}

fn glyph(cluster: Cluster, x: f64, y: f64, row_id: usize) -> String {
    let attrs = format!(r#"class="point" data-row="{row_id}" data-cluster="{cluster}""#);
    match cluster {
        Cluster::KW1 => format!(r##"<circle {attrs} cx="{x:.2}" cy="{y:.2}" r="4" fill="#4e79a7"/>"##),
        Cluster::KW2 => format!(
            r##"<rect {attrs} x="{:.2}" y="{:.2}" width="8" height="8" fill="#59a14f"/>"##,
            x - 4.0,
            y - 4.0
        ),
        Cluster::KW3 => format!(
            r##"<polygon {attrs} points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#f28e2b"/>"##,
            x,
            y - 5.0,
            x - 4.5,
            y + 4.0,
            x + 4.5,
            y + 4.0
        ),
        Cluster::NewCluster => format!(
            r##"<path {attrs} d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#b07aa1" stroke-width="2"/>"##,
            x - 4.0,
            y - 4.0,
            x + 4.0,
            y + 4.0,
            x - 4.0,
            y + 4.0,
            x + 4.0,
            y - 4.0
        ),
    }
}

/// PC1 against PC2, one glyph shape per assigned cluster, class centroids
/// drawn as hollow markers.
pub fn render_scatter(
    scores: &Matrix,
    variance_explained: &[f64],
    assignments: &[ClusterAssignment],
    centroids: &Centroids,
) -> Result<String, PlotError> {
    if scores.ncols() < 2 {
        return Err(PlotError::InsufficientComponents(scores.ncols()));
    }
    if scores.nrows() != assignments.len() {
        return Err(PlotError::LengthMismatch {
            scores: scores.nrows(),
            assignments: assignments.len(),
        });
    }
    let xs = scores.column(0);
    let ys = scores.column(1);
    let all_x = xs.iter().chain(centroids.values().map(|c| &c[0]));
    let all_y = ys.iter().chain(centroids.values().map(|c| &c[1]));
    let bounds = |it: &mut dyn Iterator<Item = &f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            return (-1.0, 1.0);
        }
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    };
    let (xmin, xmax) = bounds(&mut all_x.into_iter());
    let (ymin, ymax) = bounds(&mut all_y.into_iter());
    let px = |v: f64| MARGIN_LEFT + plot_width() * (v - xmin) / (xmax - xmin);
    let py = |v: f64| MARGIN_TOP + plot_height() * (1.0 - (v - ymin) / (ymax - ymin));

    let mut out = String::new();
    header(&mut out, "First and second principal components");
    let y0 = MARGIN_TOP + plot_height();
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        plot_width(),
        plot_height()
    );
    let pct = |i: usize| 100.0 * variance_explained.get(i).copied().unwrap_or(0.0);
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">PC1 ({:.1}%)</text>"#,
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 15.0,
        pct(0)
    );
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">PC2 ({:.1}%)</text>"#,
        MARGIN_TOP + plot_height() / 2.0,
        MARGIN_TOP + plot_height() / 2.0,
        pct(1)
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN_LEFT:.2}" y="{:.2}">{xmin:.4}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{xmax:.4}</text>"#,
        y0 + 16.0,
        MARGIN_LEFT + plot_width(),
        y0 + 16.0
    );

    let mut legend_row = 0;
    for cluster in [Cluster::KW1, Cluster::KW2, Cluster::KW3, Cluster::NewCluster] {
        let members: Vec<usize> = (0..assignments.len()).filter(|&i| assignments[i].assigned == cluster).collect();
        if members.is_empty() {
            continue;
        }
        let _ = writeln!(out, r#"<g class="series" data-cluster="{cluster}">"#);
        for i in members {
            let _ = writeln!(out, "{}", glyph(cluster, px(xs[i]), py(ys[i]), assignments[i].row_id));
        }
        let _ = writeln!(out, "</g>");
        let lx = WIDTH - MARGIN_RIGHT - 90.0;
        let ly = MARGIN_TOP + 14.0 + 16.0 * legend_row as f64;
        let _ = writeln!(out, r#"<g class="legend">{}"#, glyph(cluster, lx, ly, 0).replace(r#"class="point""#, r#"class="legend-glyph""#));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{cluster}</text></g>"#, lx + 10.0, ly + 4.0);
        legend_row += 1;
    }
    for (label, c) in centroids {
        let (x, y) = (px(c[0]), py(c[1]));
        let _ = writeln!(
            out,
            r#"<circle class="centroid" data-cluster="{label}" cx="{x:.2}" cy="{y:.2}" r="9" fill="none" stroke="black" stroke-width="1.5"/>"#
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::QualityLabel;

    #[test]
    fn pareto_values() {
        let svg = render_pareto(&[0.75, 0.25]);
        assert_eq!(svg.matches(r#"class="bar""#).count(), 2);
        assert!(svg.contains(r#"data-component="1" data-percent="75.000""#));
        assert!(svg.contains(r#"data-component="2" data-percent="25.000""#));
        assert!(svg.contains(r#"class="cumulative-point" data-percent="75.000""#));
        assert!(svg.contains(r#"class="cumulative-point" data-percent="100.000""#));
        assert_eq!(svg, render_pareto(&[0.75, 0.25]));

        let one = render_pareto(&[1.0]);
        assert_eq!(one.matches(r#"class="bar""#).count(), 1);
        assert!(one.contains(r#"data-percent="100.000""#));
    }

    fn assignment(row_id: usize, assigned: Cluster) -> ClusterAssignment {
        ClusterAssignment {
            row_id,
            true_label: QualityLabel::KW1,
            assigned,
            distance: 0.0,
        }
    }

    #[test]
    fn scatter_requires_two_components() {
        let err = render_scatter(&Matrix::zeros(3, 1), &[1.0], &[], &Centroids::new()).unwrap_err();
        assert_eq!(err, PlotError::InsufficientComponents(1));
    }

    #[test]
    fn scatter_glyphs() {
        let scores = Matrix::from_rows(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]);
        let a = vec![assignment(1, Cluster::KW1), assignment(2, Cluster::KW2), assignment(3, Cluster::KW3)];
        let centroids = Centroids::from([
            (QualityLabel::KW1, vec![0.0, 0.0]),
            (QualityLabel::KW2, vec![10.0, 0.0]),
            (QualityLabel::KW3, vec![0.0, 10.0]),
        ]);
        let svg = render_scatter(&scores, &[0.6, 0.4], &a, &centroids).unwrap();
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
        assert_eq!(svg.matches(r#"class="centroid""#).count(), 3);
        assert!(!svg.contains(r#"data-cluster="NewCluster""#));
        assert!(svg.contains("PC1 (60.0%)"));
    }
}
