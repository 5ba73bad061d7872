//! Trace-to-SVG rendering: one frame per step, with agents, constant-velocity
//! prediction points, and semi-transparent uncertainty discs.

use anyhow::Result;
use crowdnav_core::geom::Vec2;
use crowdnav_core::trace::EpisodeTrace;
use std::fmt::Write as _;
use std::path::Path;

struct Mapper {
    scale: f64,
    half_w: f64,
    half_h: f64,
}

impl Mapper {
    fn x(&self, v: f64) -> f64 {
        (v + self.half_w) * self.scale
    }
    fn y(&self, v: f64) -> f64 {
        // SVG y grows downward.
        (self.half_h - v) * self.scale
    }
    fn r(&self, v: f64) -> f64 {
        v * self.scale
    }
}

fn circle(svg: &mut String, m: &Mapper, c: Vec2, r: f64, style: &str) {
    let _ = writeln!(
        svg,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" {} />"##,
        m.x(c.x),
        m.y(c.y),
        m.r(r),
        style
    );
}

fn star(svg: &mut String, m: &Mapper, c: Vec2, r: f64) {
    let mut points = String::new();
    for i in 0..10 {
        let rad = if i % 2 == 0 { r } else { 0.4 * r };
        let th = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 5.0;
        let _ = write!(
            points,
            "{:.2},{:.2} ",
            m.x(c.x + rad * th.cos()),
            m.y(c.y + rad * th.sin())
        );
    }
    let _ = writeln!(
        svg,
        r##"<polygon points="{}" fill="#e8821e" stroke="#8a4b08" stroke-width="1"/>"##,
        points.trim_end()
    );
}

/// Writes frame_%05d.svg per step (plus the spawn state as frame 0) and
/// returns the number of frames.
pub fn render_frames(trace: &EpisodeTrace, out_dir: &Path, scale: f64) -> Result<usize> {
    let (w, h) = trace.header.scenario.arena;
    let m = Mapper {
        scale,
        half_w: w / 2.0,
        half_h: h / 2.0,
    };
    let horizon = {
        let humans = trace.header.start.humans.len().max(1);
        trace
            .steps
            .first()
            .map(|s| s.uncertainty.len() / humans)
            .unwrap_or(0)
    };
    let dt = trace.header.scenario.dt;
    let r_ego = trace.header.start.robot.radius;
    let goal = trace.header.start.robot.goal;
    let radii: Vec<f64> = trace.header.start.humans.iter().map(|h| h.radius).collect();

    let mut count = 0;
    for (idx, step) in trace.steps.iter().enumerate() {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"##,
            w * scale,
            h * scale,
            w * scale,
            h * scale
        );
        let _ = writeln!(
            svg,
            r##"<rect x="0" y="0" width="{:.0}" height="{:.0}" fill="#fbfbf8" stroke="#555" stroke-width="2"/>"##,
            w * scale,
            h * scale
        );

        // Uncertainty discs around the constant-velocity prediction points.
        for (hidx, (&p, &v)) in step.human_pos.iter().zip(&step.human_vel).enumerate() {
            for k in 1..=horizon {
                let center = p + v * (k as f64 * dt);
                let delta = step.uncertainty[hidx * horizon + (k - 1)];
                if delta > 0.0 {
                    circle(
                        &mut svg,
                        &m,
                        center,
                        delta,
                        r##"fill="#9ed7f2" fill-opacity="0.25" stroke="#58a6cf" stroke-opacity="0.4" stroke-width="1""##,
                    );
                }
                circle(&mut svg, &m, center, 0.04, r##"fill="#2a7fb8""#);
            }
        }
        // Humans, goal, robot.
        for (hidx, &p) in step.human_pos.iter().enumerate() {
            circle(
                &mut svg,
                &m,
                p,
                radii[hidx],
                r##"fill="#3b6fd4" fill-opacity="0.85" stroke="#1d3f85" stroke-width="1.5""##,
            );
        }
        star(&mut svg, &m, goal, 0.35);
        circle(
            &mut svg,
            &m,
            step.robot_pos,
            r_ego,
            r##"fill="#f5c23b" stroke="#8a6d0b" stroke-width="2""##,
        );
        let _ = writeln!(
            svg,
            r##"<text x="8" y="18" font-family="monospace" font-size="14">step {} {:?}</text>"##,
            step.step, step.event
        );
        svg.push_str("</svg>\n");

        std::fs::write(out_dir.join(format!("frame_{idx:05}.svg")), svg)?;
        count += 1;
    }
    Ok(count)
}
