//! Self-contained SVG figures. Output depends only on the inputs, and all
//! coordinates are printed with two decimals.

use std::fmt::Write;

use pulsepair_core::{QuantSpec, RaBinning};

use crate::csvio::{fixed, EventRow, LikelihoodRow};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 110.0;

pub const FIGURE_NAMES: [&str; 5] = [
    "fig_a_counts.svg",
    "fig_b_mjd.svg",
    "fig_c_rf.svg",
    "fig_d_df.svg",
    "fig_e_likelihood.svg",
];

/// What the figures need besides the event and likelihood tables.
#[derive(Debug, Clone)]
pub struct FigureContext {
    pub binning: RaBinning,
    pub quant: QuantSpec,
    pub quant_label: String,
    pub focus_dt_s: f64,
    pub target_bins: Vec<usize>,
    pub reference_log10: f64,
}

fn c(x: f64) -> String {
    fixed(x, 2)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone)]
struct Axis {
    lo: f64,
    hi: f64,
    label: String,
    ticks: Vec<(f64, String)>,
}

impl Axis {
    fn auto(lo: f64, hi: f64, label: &str) -> Self {
        let (lo, hi) = widen(lo, hi);
        let step = nice_step((hi - lo) / 6.0);
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let first = (lo / step).ceil() as i64;
        let last = (hi / step).floor() as i64;
        let ticks = (first..=last)
            .map(|i| {
                let v = i as f64 * step;
                (v, fixed(v, decimals))
            })
            .collect();
        Axis {
            lo,
            hi,
            label: label.to_string(),
            ticks,
        }
    }

    /// RA axis with a tick at every bin edge.
    fn ra(binning: &RaBinning) -> Self {
        let every = (binning.count / 10).max(1);
        let ticks = (0..=binning.count)
            .step_by(every)
            .map(|i| (binning.edge(i), fixed(binning.edge(i), 1)))
            .collect();
        Axis {
            lo: binning.start_hr,
            hi: binning.end_hr(),
            label: "RA (hours)".into(),
            ticks,
        }
    }
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn nice_step(raw: f64) -> f64 {
    let e = raw.log10().floor();
    let base = 10f64.powf(e);
    let m = raw / base;
    let nice = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * base
}

struct Plot {
    x: Axis,
    y: Axis,
    body: String,
}

impl Plot {
    fn new(x: Axis, y: Axis) -> Self {
        Plot {
            x,
            y,
            body: String::new(),
        }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }

    fn render(self, title: &str, caption: &str) -> String {
        let mut s = String::new();
        let x0 = LEFT;
        let x1 = WIDTH - RIGHT;
        let y0 = HEIGHT - BOTTOM;
        let y1 = TOP;
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = WIDTH,
            h = HEIGHT
        );
        let _ = writeln!(s, "<title>{}</title>", escape(title));
        let _ = writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
        let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, c(x0), c(y0), c(x1), c(y0));
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, c(x0), c(y0), c(x0), c(y1));
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<g class="x-ticks" text-anchor="middle">"#);
        for (v, label) in &self.x.ticks {
            let x = self.px(*v);
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{x}" y2="{y2}" stroke="black"/><text x="{x}" y="{ty}">{label}</text>"#,
                x = c(x),
                y = c(y0),
                y2 = c(y0 + 5.0),
                ty = c(y0 + 18.0),
                label = escape(label)
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<g class="y-ticks" text-anchor="end">"#);
        for (v, label) in &self.y.ticks {
            let y = self.py(*v);
            let _ = writeln!(
                s,
                r#"<line x1="{x2}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><text x="{tx}" y="{ty}">{label}</text>"#,
                x = c(x0),
                x2 = c(x0 - 5.0),
                y = c(y),
                tx = c(x0 - 8.0),
                ty = c(y + 4.0),
                label = escape(label)
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            c((x0 + x1) / 2.0),
            c(y0 + 40.0),
            escape(&self.x.label)
        );
        let _ = writeln!(
            s,
            r#"<text class="y-label" x="{x}" y="{y}" text-anchor="middle" transform="rotate(-90 {x} {y})">{label}</text>"#,
            x = c(20.0),
            y = c((y0 + y1) / 2.0),
            label = escape(&self.y.label)
        );
        s.push_str(&self.body);
        let _ = writeln!(
            s,
            r#"<text class="caption" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            c(WIDTH / 2.0),
            c(HEIGHT - 30.0),
            escape(caption)
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Events whose pair lies in one of the RA bins.
fn binned(events: &[EventRow]) -> impl Iterator<Item = (&EventRow, usize)> {
    events.iter().filter_map(|e| e.ra_bin.map(|b| (e, b)))
}

fn figure_a(events: &[EventRow], ctx: &FigureContext) -> String {
    let mut counts = vec![0u64; ctx.binning.count];
    for (e, b) in binned(events) {
        if (e.dt_s - ctx.focus_dt_s).abs() < 1e-9 && b < counts.len() {
            counts[b] += 1;
        }
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut y = Axis::auto(0.0, top, "pairs");
    y.ticks.retain(|(v, _)| v.fract() == 0.0);
    let x = Axis {
        lo: 0.0,
        hi: ctx.binning.count as f64,
        label: "RA bin".into(),
        ticks: (0..ctx.binning.count)
            .map(|b| (b as f64 + 0.5, b.to_string()))
            .collect(),
    };
    let mut plot = Plot::new(x, y);
    let mut body = String::from("<g class=\"bars\" fill=\"#4a6fa5\">\n");
    for (b, &n) in counts.iter().enumerate() {
        let x0 = plot.px(b as f64 + 0.1);
        let x1 = plot.px(b as f64 + 0.9);
        let y0 = plot.py(0.0);
        let y1 = plot.py(n as f64);
        let _ = writeln!(
            body,
            r#"<rect data-bin="{b}" data-count="{n}" x="{}" y="{}" width="{}" height="{}"/>"#,
            c(x0),
            c(y1),
            c(x1 - x0),
            c(y0 - y1)
        );
    }
    body.push_str("</g>\n");
    plot.body = body;
    let total: u64 = counts.iter().sum();
    plot.render(
        "Event count per RA bin",
        &format!(
            "{total} quantized pairs at Δt = {} s per {} h RA bin ({})",
            fixed(ctx.focus_dt_s, 2),
            fixed(ctx.binning.width_hr, 1),
            ctx.quant_label
        ),
    )
}

fn scatter(
    events: &[EventRow],
    ctx: &FigureContext,
    value: impl Fn(&EventRow) -> f64,
    y: Axis,
    extra: String,
    title: &str,
    caption: &str,
) -> String {
    let mut plot = Plot::new(Axis::ra(&ctx.binning), y);
    let mut body = extra;
    body.push_str("<g class=\"events\" fill=\"#c0392b\">\n");
    for (e, b) in binned(events) {
        let _ = writeln!(
            body,
            r#"<circle data-pair="{}" data-bin="{b}" cx="{}" cy="{}" r="3"/>"#,
            e.pair_id,
            c(plot.px(e.ra_hours)),
            c(plot.py(value(e)))
        );
    }
    body.push_str("</g>\n");
    plot.body = body;
    plot.render(title, caption)
}

fn extent(events: &[EventRow], value: impl Fn(&EventRow) -> f64) -> (f64, f64) {
    binned(events)
        .map(|(e, _)| value(e))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn figure_b(events: &[EventRow], ctx: &FigureContext) -> String {
    let (lo, hi) = extent(events, |e| e.mjd);
    let (lo, hi) = if lo.is_finite() {
        (lo.floor() - 1.0, hi.floor() + 2.0)
    } else {
        (0.0, 1.0)
    };
    let n = binned(events).count();
    scatter(
        events,
        ctx,
        |e| e.mjd,
        Axis::auto(lo, hi, "MJD"),
        String::new(),
        "MJD of quantized pairs against RA",
        &format!("MJDs of {n} quantized polarized pairs ({})", ctx.quant_label),
    )
}

fn figure_c(events: &[EventRow], ctx: &FigureContext) -> String {
    let mhz = |e: &EventRow| e.f_l_hz / 1e6;
    let (lo, hi) = extent(events, mhz);
    let n = binned(events).count();
    scatter(
        events,
        ctx,
        mhz,
        Axis::auto(lo, hi, "LHCP frequency (MHz)"),
        String::new(),
        "RF frequency of quantized pairs against RA",
        &format!("RF frequency of {n} quantized polarized pairs ({})", ctx.quant_label),
    )
}

fn figure_d(events: &[EventRow], ctx: &FigureContext) -> String {
    let (lo, hi) = extent(events, |e| e.df_hz);
    let reach = lo.abs().max(hi.abs()).max(ctx.quant.hi_hz);
    let reach = if reach.is_finite() { reach } else { ctx.quant.hi_hz };
    let y = Axis::auto(-reach, reach, "Δf (Hz)");
    let probe = Plot::new(Axis::ra(&ctx.binning), y.clone());
    let mut grid = String::from("<g class=\"lattice\" stroke=\"#999999\" stroke-dasharray=\"4 3\">\n");
    let mut lines: Vec<f64> = ctx.quant.multiples_in_range();
    lines.extend(ctx.quant.multiples_in_range().iter().map(|m| -m));
    lines.sort_by(f64::total_cmp);
    for m in lines {
        let _ = writeln!(
            grid,
            r#"<line data-df="{}" x1="{}" y1="{y}" x2="{}" y2="{y}"/>"#,
            fixed(m, 3),
            c(LEFT),
            c(WIDTH - RIGHT),
            y = c(probe.py(m))
        );
    }
    grid.push_str("</g>\n");
    let n = binned(events).count();
    scatter(
        events,
        ctx,
        |e| e.df_hz,
        y,
        grid,
        "Δf of quantized pairs against RA",
        &format!(
            "Δf of {n} quantized polarized pairs; lines at multiples of {} Hz ({})",
            fixed(ctx.quant.base_hz, 3),
            ctx.quant_label
        ),
    )
}

/// Lowest `log10_tail` over `bins` for each Δt, in Δt order.
pub fn min_tail_curve(rows: &[LikelihoodRow], bins: &[usize]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut sorted: Vec<&LikelihoodRow> = rows.iter().filter(|r| bins.contains(&r.ra_bin)).collect();
    sorted.sort_by(|a, b| a.dt_s.total_cmp(&b.dt_s));
    for r in sorted {
        match out.last_mut() {
            Some((dt, v)) if *dt == r.dt_s => *v = v.min(r.log10_tail),
            _ => out.push((r.dt_s, r.log10_tail)),
        }
    }
    out
}

fn figure_e(rows: &[LikelihoodRow], ctx: &FigureContext) -> String {
    let curve = min_tail_curve(rows, &ctx.target_bins);
    let (dt_lo, dt_hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(dt, _)| (a.min(dt), b.max(dt)));
    let low = curve.iter().map(|&(_, v)| v).fold(ctx.reference_log10, f64::min);
    let x = Axis::auto(dt_lo, dt_hi, "Δt (s)");
    let y = Axis::auto((low - 0.5).floor(), 0.0, "min log10 tail probability");
    let mut plot = Plot::new(x, y);
    let mut body = String::new();
    let _ = writeln!(
        body,
        r##"<line class="reference" data-value="{}" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#c0392b" stroke-dasharray="6 4"/>"##,
        fixed(ctx.reference_log10, 2),
        c(LEFT),
        c(WIDTH - RIGHT),
        y = c(plot.py(ctx.reference_log10))
    );
    if !curve.is_empty() {
        let pts: Vec<String> = curve
            .iter()
            .map(|&(dt, v)| format!("{},{}", c(plot.px(dt)), c(plot.py(v))))
            .collect();
        let _ = writeln!(
            body,
            r##"<polyline class="curve" fill="none" stroke="#4a6fa5" points="{}"/>"##,
            pts.join(" ")
        );
    }
    body.push_str("<g class=\"points\" fill=\"#4a6fa5\">\n");
    for &(dt, v) in &curve {
        let _ = writeln!(
            body,
            r#"<circle data-dt="{}" data-value="{}" cx="{}" cy="{}" r="2"/>"#,
            fixed(dt, 3),
            fixed(v, 6),
            c(plot.px(dt)),
            c(plot.py(v))
        );
    }
    body.push_str("</g>\n");
    plot.body = body;
    let below = curve.iter().filter(|&&(_, v)| v < ctx.reference_log10).count();
    let bins: Vec<String> = ctx.target_bins.iter().map(|b| b.to_string()).collect();
    plot.render(
        "Minimum log likelihood against Δt",
        &format!(
            "min log10 tail over RA bins {} at {} Δt values; {below} below {}",
            bins.join(","),
            curve.len(),
            fixed(ctx.reference_log10, 1)
        ),
    )
}

/// All five figures as `(file name, document)`.
pub fn emit_figures(events: &[EventRow], rows: &[LikelihoodRow], ctx: &FigureContext) -> Vec<(&'static str, String)> {
    vec![
        (FIGURE_NAMES[0], figure_a(events, ctx)),
        (FIGURE_NAMES[1], figure_b(events, ctx)),
        (FIGURE_NAMES[2], figure_c(events, ctx)),
        (FIGURE_NAMES[3], figure_d(events, ctx)),
        (FIGURE_NAMES[4], figure_e(rows, ctx)),
    ]
}
