//! Plot data for run reports: one CSV per metric with a column per report,
//! and a grouped bar chart of the same data as standalone SVG.

use std::fmt::Write as _;

use skyclust::metrics::{RunReport, StationMetrics};

pub struct Metric {
    pub name: &'static str,
    pub unit: &'static str,
    pub value: fn(&StationMetrics) -> Option<f64>,
}

pub const METRICS: [Metric; 3] = [
    Metric {
        name: "delay",
        unit: "ms",
        value: |m| m.mean_delay_ms,
    },
    Metric {
        name: "jitter",
        unit: "ms",
        value: |m| m.jitter_ms,
    },
    Metric {
        name: "throughput",
        unit: "bytes/s",
        value: |m| m.throughput,
    },
];

const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

/// `station_id,<label>...` with an empty cell where a station has no value.
pub fn station_csv(reports: &[RunReport], metric: &Metric) -> String {
    let mut s = String::from("station_id");
    for r in reports {
        s.push(',');
        s.push_str(&r.label);
    }
    s.push('\n');
    for (i, m) in reports[0].stations.iter().enumerate() {
        s.push_str(&m.station_id.to_string());
        for r in reports {
            s.push(',');
            if let Some(v) = (metric.value)(&r.stations[i]) {
                let _ = write!(s, "{v:?}");
            }
        }
        s.push('\n');
    }
    s
}

/// `label,metric,mean,std,count` per report and metric.
pub fn summary_csv(reports: &[RunReport]) -> String {
    let mut s = String::from("label,metric,mean,std,count\n");
    for r in reports {
        for (name, agg) in [
            ("delay_ms", r.delay_ms),
            ("jitter_ms", r.jitter_ms),
            ("throughput", r.throughput),
        ] {
            match agg {
                Some(a) => {
                    let _ = writeln!(s, "{},{name},{:?},{:?},{}", r.label, a.mean, a.std, a.count);
                }
                None => {
                    let _ = writeln!(s, "{},{name},,,0", r.label);
                }
            }
        }
    }
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars, one group per station and one bar per report.
pub fn station_svg(reports: &[RunReport], metric: &Metric) -> String {
    let n = reports[0].stations.len().max(1);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 60.0);
    let group = 12.0 * reports.len() as f64 + 8.0;
    // Wide enough for the legend too.
    let plot_w = (group * n as f64).max(190.0 * reports.len() as f64);
    let plot_h = 300.0;
    let width = left + plot_w + right;
    let height = top + plot_h + bottom;
    let max = reports
        .iter()
        .flat_map(|r| r.stations.iter().filter_map(metric.value))
        .fold(0.0f64, f64::max);
    let scale = if max > 0.0 { plot_h / max } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{left:.0}" y="20" font-size="14">{} per station ({})</text>"#,
        metric.name, metric.unit
    );
    let base = top + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{left:.0}" y1="{base:.0}" x2="{:.0}" y2="{base:.0}" stroke="black"/>"#,
        left + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left:.0}" y1="{top:.0}" x2="{left:.0}" y2="{base:.0}" stroke="black"/>"#
    );
    for t in 0..=4 {
        let v = max * t as f64 / 4.0;
        let y = base - v * scale;
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            short(v)
        );
    }
    for (i, st) in reports[0].stations.iter().enumerate() {
        let gx = left + group * i as f64 + 4.0;
        for (j, r) in reports.iter().enumerate() {
            if let Some(v) = (metric.value)(&r.stations[i]) {
                let h = v * scale;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.2}" width="11" height="{h:.2}" fill="{}"/>"#,
                    gx + 12.0 * j as f64,
                    base - h,
                    PALETTE[j % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.0}" text-anchor="middle">{}</text>"#,
            gx + (group - 8.0) / 2.0,
            base + 14.0,
            st.station_id
        );
    }
    for (j, r) in reports.iter().enumerate() {
        let y = base + 32.0;
        let x = left + 190.0 * j as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.0}" y="{:.0}" width="10" height="10" fill="{}"/><text x="{:.0}" y="{y:.0}">{}</text>"#,
            y - 9.0,
            PALETTE[j % PALETTE.len()],
            x + 14.0,
            escape(&r.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(v: f64) -> String {
    if v == 0.0 || (0.01..1e5).contains(&v.abs()) {
        format!("{v:.2}")
    } else {
        format!("{v:.2e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use skyclust::metrics::ThroughputWindow;

    fn report(label: &str, delays: &[Option<f64>]) -> RunReport {
        RunReport {
            label: label.into(),
            scenario: None,
            window: ThroughputWindow::FlowLifetime,
            stations: delays
                .iter()
                .enumerate()
                .map(|(i, &d)| StationMetrics {
                    station_id: i,
                    delivered: 1,
                    dropped: 0,
                    mean_delay_ms: d,
                    jitter_ms: d,
                    throughput: d,
                })
                .collect(),
            delay_ms: None,
            jitter_ms: None,
            throughput: None,
            total_dropped: 0,
        }
    }

    #[test]
    fn csv_has_a_column_per_report() {
        let rs = [report("a", &[Some(1.0), None]), report("b", &[Some(2.5), Some(3.0)])];
        assert_eq!(station_csv(&rs, &METRICS[0]), "station_id,a,b\n0,1.0,2.5\n1,,3.0\n");
    }

    #[test]
    fn svg_draws_one_bar_per_value() {
        let rs = [report("a", &[Some(1.0), None]), report("b<c", &[Some(2.0), Some(3.0)])];
        let svg = station_svg(&rs, &METRICS[1]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches(r#"width="11""#).count(), 3);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn summary_lists_missing_aggregates() {
        let s = summary_csv(&[report("a", &[None])]);
        assert!(s.contains("a,delay_ms,,,0\n"));
    }
}
