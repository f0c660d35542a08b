//! SVG rendering: world snapshots (robots yellow, comfort zones gray) and
//! density-sweep plots with quartile whiskers. Everything is written by hand
//! so the outputs carry no rendering dependency and stay byte-reproducible.

use std::fmt::Write as _;

use crate::control::StrategyKind;
use crate::crowd::Scenario;
use crate::engine::Formation;
use crate::experiments::{AggregateRow, BaselineRow};
use crate::trace::{Trace, TraceRow};

const ROBOT_FILL: &str = "#f2c230";
const ROBOT_STROKE: &str = "#7a5c00";
const CROWD_FILL: &str = "#a8a8a8";
const LINK_STROKE: &str = "#444444";

fn series_color(strategy: StrategyKind, formation: Formation) -> &'static str {
    match (strategy, formation) {
        (StrategyKind::Greedy, Formation::Line) => "#1f77b4",
        (StrategyKind::Greedy, Formation::Random) => "#ff7f0e",
        (StrategyKind::Platoon, _) => "#2ca02c",
        (StrategyKind::AdaptivePlatoon, _) => "#d62728",
    }
}

fn series_label(strategy: StrategyKind, formation: Formation) -> String {
    match formation {
        Formation::Line => strategy.label().to_string(),
        Formation::Random => format!("{} ({})", strategy.label(), formation.label()),
    }
}

/// Render one trace row. The view covers the crowd region plus everything
/// drawn, with solid walls black, the periodic boundary dashed, and crowd
/// confinement lines dotted gray.
pub fn render_snapshot(trace: &Trace, row: &TraceRow) -> String {
    let env = trace.header.config.environment();
    let r_robot = trace.header.robot_radius;
    let r_crowd = trace.header.comfort_radius;

    let mut x_min = env.crowd_region.x_min;
    let mut x_max = env.crowd_region.x_max;
    let mut y_min = env.crowd_region.y_min;
    let mut y_max = env.crowd_region.y_max;
    for &(x, y, _, _) in &row.robots {
        x_min = x_min.min(x - r_robot);
        x_max = x_max.max(x + r_robot);
        y_min = y_min.min(y - r_robot);
        y_max = y_max.max(y + r_robot);
    }
    for &(x, y) in &row.crowd {
        x_min = x_min.min(x - r_crowd);
        x_max = x_max.max(x + r_crowd);
        y_min = y_min.min(y - r_crowd);
        y_max = y_max.max(y + r_crowd);
    }
    let pad = 0.4;
    x_min -= pad;
    x_max += pad;
    y_min -= pad;
    y_max += pad;

    let scale = 60.0;
    let width = (x_max - x_min) * scale;
    let height = (y_max - y_min) * scale;
    let px = |x: f64| (x - x_min) * scale;
    let py = |y: f64| (y_max - y) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"##
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="white"/>"##);

    // Periodic boundary: dashed along the crowd-region band.
    for y in [env.crowd_region.y_min, env.crowd_region.y_max] {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5" stroke-dasharray="8 6"/>"##,
            px(env.band_x_min),
            py(y),
            px(env.band_x_max),
            py(y)
        );
    }
    // Solid walls, clipped to the view.
    for wall in &env.walls {
        let x1 = wall.x_min.max(x_min);
        let x2 = wall.x_max.min(x_max);
        if x1 < x2 {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="3"/>"##,
                px(x1),
                py(wall.y),
                px(x2),
                py(wall.y)
            );
        }
    }
    // Crowd confinement lines.
    for wall in &env.crowd_walls {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-width="1.5" stroke-dasharray="2 4"/>"##,
            px(wall.x),
            py(env.crowd_region.y_min),
            px(wall.x),
            py(env.crowd_region.y_max)
        );
    }
    // Goal-region edge.
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#bbbbbb" stroke-width="1" stroke-dasharray="4 4"/>"##,
        px(env.goal_x_min),
        py(env.crowd_region.y_min),
        px(env.goal_x_min),
        py(env.crowd_region.y_max)
    );

    for &(x, y) in &row.crowd {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{CROWD_FILL}" fill-opacity="0.85"/>"##,
            px(x),
            py(y),
            r_crowd * scale
        );
    }
    // Leader-follower links underneath the robot disks.
    for &(x, y, _, leader) in &row.robots {
        if leader > 0 {
            if let Some(&(lx, ly, _, _)) = row.robots.get(leader as usize - 1) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{LINK_STROKE}" stroke-width="1.2"/>"##,
                    px(x),
                    py(y),
                    px(lx),
                    py(ly)
                );
            }
        }
    }
    for &(x, y, paused, _) in &row.robots {
        let stroke = if paused == 1 { "#c23030" } else { ROBOT_STROKE };
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{ROBOT_FILL}" stroke="{stroke}" stroke-width="1.2"/>"##,
            px(x),
            py(y),
            r_robot * scale
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="8" y="16" font-family="sans-serif" font-size="12" fill="#333">t = {:.1} s</text>"##,
        row.k as f64 * trace.header.dt
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    Time,
    Interceptions,
}

impl PlotMetric {
    fn label(self) -> &'static str {
        match self {
            PlotMetric::Time => "time to goal (s)",
            PlotMetric::Interceptions => "comfort zone interceptions",
        }
    }

    fn pick(self, row: &AggregateRow) -> (Option<f64>, Option<f64>, Option<f64>) {
        match self {
            PlotMetric::Time => (row.time_q1, row.time_median, row.time_q3),
            PlotMetric::Interceptions => {
                (row.interceptions_q1, row.interceptions_median, row.interceptions_q3)
            }
        }
    }
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x_min) / (self.x_max - self.x_min) * (self.width - self.left - self.right)
    }

    fn py(&self, y: f64) -> f64 {
        let usable = self.height - self.top - self.bottom;
        self.height - self.bottom - (y - self.y_min) / (self.y_max - self.y_min) * usable
    }

    fn open(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"##,
            self.width, self.height, self.width, self.height
        );
        let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="white"/>"##);
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="16" font-family="sans-serif" font-size="13" fill="#222" text-anchor="middle">{title}</text>"##,
            self.width / 2.0
        );
        s
    }

    fn axes(&self, s: &mut String, x_label: &str, y_label: &str, x_ticks: &[f64]) {
        let x0 = self.px(self.x_min);
        let x1 = self.px(self.x_max);
        let y0 = self.py(self.y_min);
        let y1 = self.py(self.y_max);
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="#222" stroke-width="1"/>"##
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="#222" stroke-width="1"/>"##
        );
        for &x in x_ticks {
            let tx = self.px(x);
            let _ = writeln!(
                s,
                r##"<line x1="{tx:.1}" y1="{y0:.1}" x2="{tx:.1}" y2="{:.1}" stroke="#222" stroke-width="1"/>"##,
                y0 + 4.0
            );
            let _ = writeln!(
                s,
                r##"<text x="{tx:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#222" text-anchor="middle">{x}</text>"##,
                y0 + 16.0
            );
        }
        for i in 0..=4 {
            let y = self.y_min + (self.y_max - self.y_min) * i as f64 / 4.0;
            let ty = self.py(y);
            let _ = writeln!(
                s,
                r##"<line x1="{:.1}" y1="{ty:.1}" x2="{x0:.1}" y2="{ty:.1}" stroke="#222" stroke-width="1"/>"##,
                x0 - 4.0
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#222" text-anchor="end">{:.2}</text>"##,
                x0 - 7.0,
                ty + 4.0,
                y
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="#222" text-anchor="middle">{x_label}</text>"##,
            (x0 + x1) / 2.0,
            self.height - 8.0
        );
        let _ = writeln!(
            s,
            r##"<text x="14" y="{:.1}" font-family="sans-serif" font-size="12" fill="#222" text-anchor="middle" transform="rotate(-90 14 {:.1})">{y_label}</text>"##,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        );
    }
}

/// Density-sweep plot in the style of the study figures: density on x, the
/// metric's median on y with q1..q3 whiskers, one series per strategy.
pub fn plot_aggregate(rows: &[AggregateRow], metric: PlotMetric) -> String {
    let mut series_keys: Vec<(StrategyKind, Formation)> = Vec::new();
    for row in rows {
        let key = (row.strategy, row.formation);
        if !series_keys.contains(&key) {
            series_keys.push(key);
        }
    }
    let densities: Vec<f64> = {
        let mut d: Vec<f64> = rows.iter().map(|r| r.density).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d.dedup();
        d
    };
    let mut y_hi = f64::NEG_INFINITY;
    for row in rows {
        let (q1, med, q3) = metric.pick(row);
        for v in [q1, med, q3].into_iter().flatten() {
            y_hi = y_hi.max(v);
        }
    }
    if !y_hi.is_finite() {
        y_hi = 1.0;
    }
    let x_lo = densities.first().copied().unwrap_or(0.0);
    let x_hi = densities.last().copied().unwrap_or(1.0);
    let x_pad = ((x_hi - x_lo) * 0.05).max(0.01);
    let frame = Frame {
        width: 640.0,
        height: 420.0,
        left: 64.0,
        right: 20.0,
        top: 28.0,
        bottom: 46.0,
        x_min: x_lo - x_pad,
        x_max: x_hi + x_pad,
        y_min: 0.0,
        y_max: y_hi * 1.08,
    };
    let scenario = rows.first().map(|r| r.scenario.label()).unwrap_or("");
    let mut s = frame.open(&format!("{scenario}: {}", metric.label()));
    frame.axes(&mut s, "crowd density", metric.label(), &densities);

    for (si, &(strategy, formation)) in series_keys.iter().enumerate() {
        let color = series_color(strategy, formation);
        let mut points = Vec::new();
        for row in rows.iter().filter(|r| (r.strategy, r.formation) == (strategy, formation)) {
            let (q1, med, q3) = metric.pick(row);
            if let Some(med) = med {
                points.push((row.density, q1.unwrap_or(med), med, q3.unwrap_or(med)));
            }
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let polyline: Vec<String> = points
            .iter()
            .map(|(d, _, med, _)| format!("{:.1},{:.1}", frame.px(*d), frame.py(*med)))
            .collect();
        if polyline.len() > 1 {
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"##,
                polyline.join(" ")
            );
        }
        for (d, q1, med, q3) in &points {
            let x = frame.px(*d);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}" stroke-width="1.2"/>"##,
                frame.py(*q1),
                frame.py(*q3)
            );
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.1}" cy="{:.1}" r="3" fill="{color}"/>"##,
                frame.py(*med)
            );
        }
        let ly = 34.0 + si as f64 * 16.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"##,
            frame.left + 8.0,
            frame.left + 32.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#222">{}</text>"##,
            frame.left + 38.0,
            ly + 4.0,
            series_label(strategy, formation)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Flow-versus-density plot for the crowd-only baseline, with a zero line to
/// make flow inversion visible.
pub fn plot_baseline(rows: &[BaselineRow], scenario: Scenario) -> String {
    let densities: Vec<f64> = rows.iter().map(|r| r.density).collect();
    let mut y_lo: f64 = 0.0;
    let mut y_hi: f64 = 0.0;
    for row in rows {
        for v in [row.flow_q1, row.flow_median, row.flow_q3].into_iter().flatten() {
            y_lo = y_lo.min(v);
            y_hi = y_hi.max(v);
        }
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let span = y_hi - y_lo;
    let frame = Frame {
        width: 640.0,
        height: 420.0,
        left: 64.0,
        right: 20.0,
        top: 28.0,
        bottom: 46.0,
        x_min: densities.first().copied().unwrap_or(0.0) - 0.02,
        x_max: densities.last().copied().unwrap_or(0.5) + 0.02,
        y_min: y_lo - span * 0.08,
        y_max: y_hi + span * 0.08,
    };
    let mut s = frame.open(&format!(
        "{}: average crowd velocity in the desired direction (m/s)",
        scenario.label()
    ));
    frame.axes(&mut s, "crowd density", "mean flow velocity (m/s)", &densities);
    // Zero line.
    let zero_y = frame.py(0.0);
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{zero_y:.1}" x2="{:.1}" y2="{zero_y:.1}" stroke="#999" stroke-width="1" stroke-dasharray="4 4"/>"##,
        frame.px(frame.x_min),
        frame.px(frame.x_max)
    );
    let (color, dash) = match scenario {
        Scenario::CounterFlow => ("#2ca02c", ""),
        _ => ("#e6b422", r##" stroke-dasharray="7 5""##),
    };
    let polyline: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.flow_median
                .map(|m| format!("{:.1},{:.1}", frame.px(r.density), frame.py(m)))
        })
        .collect();
    if polyline.len() > 1 {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"##,
            polyline.join(" ")
        );
    }
    for row in rows {
        let x = frame.px(row.density);
        if let (Some(q1), Some(med), Some(q3)) = (row.flow_q1, row.flow_median, row.flow_q3) {
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}" stroke-width="1.2"/>"##,
                frame.py(q1),
                frame.py(q3)
            );
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.1}" cy="{:.1}" r="3" fill="{color}"/>"##,
                frame.py(med)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
