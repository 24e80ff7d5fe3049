//! Distribution bar charts, one file per (transition kind x dimension),
//! emitted as deterministic SVG plus a numeric JSON sidecar. Sidecar numbers
//! are exactly the metrics-module outputs; nothing is recomputed here.

use crate::metrics::{self, BucketEdges, Dimension, GroupRates, TransitionRecord};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
struct FigureSidecar<'a> {
    kind: &'a str,
    dimension: &'a str,
    groups: &'a [GroupRates],
}

pub fn emit_distribution_figures(
    records: &[TransitionRecord],
    edges: &BucketEdges,
    out_dir: &Path,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for dimension in Dimension::all() {
        let rates = metrics::transition_rates(records, dimension, edges);
        for kind in ["downgrade", "upgrade"] {
            let svg = render_bar_chart(&rates, dimension, kind);
            let base = format!("{}_{}", kind, dimension.name());
            let svg_path = out_dir.join(format!("{base}.svg"));
            std::fs::write(&svg_path, svg)?;
            let sidecar = FigureSidecar { kind, dimension: dimension.name(), groups: &rates };
            let json_path = out_dir.join(format!("{base}.json"));
            std::fs::write(&json_path, serde_json::to_vec_pretty(&sidecar).expect("serializes"))?;
            written.push(svg_path);
            written.push(json_path);
        }
    }
    Ok(written)
}

fn render_bar_chart(rates: &[GroupRates], dimension: Dimension, kind: &str) -> String {
    const BAR_WIDTH: f64 = 42.0;
    const GAP: f64 = 14.0;
    const CHART_HEIGHT: f64 = 220.0;
    const MARGIN_LEFT: f64 = 56.0;
    const MARGIN_TOP: f64 = 34.0;
    const LABEL_SPACE: f64 = 96.0;

    let n = rates.len().max(1);
    let width = MARGIN_LEFT + (BAR_WIDTH + GAP) * n as f64 + GAP;
    let height = MARGIN_TOP + CHART_HEIGHT + LABEL_SPACE;
    let max_rate = rates
        .iter()
        .map(|g| if kind == "downgrade" { g.downgrade_rate } else { g.upgrade_rate })
        .fold(0.0_f64, f64::max)
        .max(0.05);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{MARGIN_LEFT}\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{} by {}</text>\n",
        kind,
        dimension.name()
    ));
    // y axis with max label
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        MARGIN_TOP + CHART_HEIGHT
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        MARGIN_TOP + CHART_HEIGHT,
        width - GAP,
        MARGIN_TOP + CHART_HEIGHT
    ));
    svg.push_str(&format!(
        "<text x=\"4\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\">{max_rate:.3}</text>\n",
        MARGIN_TOP + 6.0
    ));
    svg.push_str(&format!(
        "<text x=\"4\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\">0</text>\n",
        MARGIN_TOP + CHART_HEIGHT
    ));

    let fill = if kind == "downgrade" { "#c0504d" } else { "#4f81bd" };
    for (i, g) in rates.iter().enumerate() {
        let rate = if kind == "downgrade" { g.downgrade_rate } else { g.upgrade_rate };
        let count = if kind == "downgrade" { g.downgrade_count } else { g.upgrade_count };
        let h = CHART_HEIGHT * (rate / max_rate);
        let x = MARGIN_LEFT + GAP + (BAR_WIDTH + GAP) * i as f64;
        let y = MARGIN_TOP + CHART_HEIGHT - h;
        svg.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{BAR_WIDTH:.1}\" height=\"{h:.1}\" fill=\"{fill}\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">{count}</text>\n",
            x + BAR_WIDTH / 2.0,
            y - 4.0
        ));
        let label: String = g.group.chars().take(14).collect();
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-45 {:.1} {:.1})\">{}</text>\n",
            x + BAR_WIDTH / 2.0,
            MARGIN_TOP + CHART_HEIGHT + 14.0,
            x + BAR_WIDTH / 2.0,
            MARGIN_TOP + CHART_HEIGHT + 14.0,
            escape(&label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::Score;

    #[test]
    fn emits_22_figures_and_22_sidecars() {
        let records = vec![crate::metrics::tests::record("s1", "m", "C3", Score::Three, Score::One)];
        let edges = metrics::bucket_edges(&records);
        let dir = tempfile::tempdir().unwrap();
        let written = emit_distribution_figures(&records, &edges, dir.path()).unwrap();
        let svgs = written.iter().filter(|p| p.extension().unwrap() == "svg").count();
        let jsons = written.iter().filter(|p| p.extension().unwrap() == "json").count();
        assert_eq!(svgs, 22);
        assert_eq!(jsons, 22);
    }

    #[test]
    fn sidecar_matches_metrics_tallies() {
        let records = vec![
            crate::metrics::tests::record("s1", "m", "C3", Score::Three, Score::One),
            crate::metrics::tests::record("s2", "m", "C3", Score::One, Score::One),
        ];
        let edges = metrics::bucket_edges(&records);
        let dir = tempfile::tempdir().unwrap();
        emit_distribution_figures(&records, &edges, dir.path()).unwrap();
        let sidecar: serde_json::Value = serde_json::from_slice(
            &std::fs::read(dir.path().join("downgrade_combo.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(sidecar["groups"][0]["group"], "C3");
        assert_eq!(sidecar["groups"][0]["downgrade_count"], 1);
        assert_eq!(sidecar["groups"][0]["count"], 2);
    }

    #[test]
    fn svg_output_is_deterministic() {
        let records = vec![crate::metrics::tests::record("s1", "m", "L1", Score::Two, Score::Three)];
        let edges = metrics::bucket_edges(&records);
        let rates = metrics::transition_rates(&records, Dimension::Combo, &edges);
        let a = render_bar_chart(&rates, Dimension::Combo, "upgrade");
        let b = render_bar_chart(&rates, Dimension::Combo, "upgrade");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
    }
}
