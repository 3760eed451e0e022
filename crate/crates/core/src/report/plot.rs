//! SVG attractor plots: hidden states projected onto two principal components.

use std::collections::HashSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::numerics::{pca_2d, Vector};
use crate::orbit::{OrbitVerdict, Trajectory};

pub const PLOT_SIZE: f64 = 600.0;
/// Fraction of the viewport left blank on each side.
pub const PLOT_MARGIN: f64 = 0.1;

fn plotted_states(trajectory: &Trajectory, verdict: &OrbitVerdict) -> Vec<Vector> {
    match verdict.period() {
        // sinks: keep the transient to show the approach
        Some(1) => trajectory.states.iter().map(|s| s.state.h.clone()).collect(),
        _ => trajectory.post_burn_in_states(),
    }
}

/// Projected points in SVG coordinates, in temporal order. Both axes share
/// one scale so distances are not distorted.
pub fn orbit_plot_points(trajectory: &Trajectory, verdict: &OrbitVerdict) -> Result<Vec<(f64, f64)>> {
    let states = plotted_states(trajectory, verdict);
    if states.len() < 3 {
        return Err(Error::Degenerate(format!(
            "orbit plot needs at least 3 retained states, have {}",
            states.len()
        )));
    }
    let projected = pca_2d(&states)?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &projected {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0);
    let inner = PLOT_SIZE * (1.0 - 2.0 * PLOT_MARGIN);
    let scale = if span > 0.0 { inner / span } else { 0.0 };
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let mid = PLOT_SIZE / 2.0;
    // SVG y grows downward
    Ok(projected
        .into_iter()
        .map(|(x, y)| (mid + (x - cx) * scale, mid - (y - cy) * scale))
        .collect())
}

fn title(verdict: &OrbitVerdict) -> String {
    match verdict.period() {
        Some(k) => format!("period-{k} orbit"),
        None => "non-periodic orbit".to_string(),
    }
}

/// Renders the orbit as a path through the projected states plus a dot
/// per distinct position. Byte-identical for identical inputs.
pub fn render_orbit_plot(trajectory: &Trajectory, verdict: &OrbitVerdict) -> Result<String> {
    let pts = orbit_plot_points(trajectory, verdict)?;
    let fmt = |(x, y): (f64, f64)| format!("{x:.3},{y:.3}");

    let coords: Vec<String> = pts.iter().map(|&p| fmt(p)).collect();
    // a periodic orbit retraces its cycle; draw each segment once
    let mut segments = HashSet::new();
    let mut path = String::new();
    let mut pen: Option<&str> = None;
    for pair in coords.windows(2) {
        let (a, b) = (pair[0].as_str(), pair[1].as_str());
        if a == b || !segments.insert((a, b)) {
            continue;
        }
        if pen != Some(a) {
            let _ = write!(path, "M{a} ");
        }
        let _ = write!(path, "L{b} ");
        pen = Some(b);
    }
    let mut seen = HashSet::new();
    let dots: Vec<&String> = coords.iter().filter(|s| seen.insert(s.as_str())).collect();

    let m = PLOT_SIZE * PLOT_MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        PLOT_SIZE
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="18">{}</text>"#,
        PLOT_SIZE / 2.0,
        m * 0.55,
        title(verdict)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#555">{} {}, {} states</text>"##,
        PLOT_SIZE / 2.0,
        PLOT_SIZE - m * 0.4,
        trajectory.mode,
        trajectory.initial.describe(),
        pts.len()
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{m}" y="{m}" width="{w}" height="{w}" fill="none" stroke="#ccc"/>"##,
        w = PLOT_SIZE - 2.0 * m
    );
    let _ = writeln!(
        svg,
        r##"<path fill="none" stroke="#3060a0" stroke-width="0.6" stroke-opacity="0.6" d="{}"/>"##,
        path.trim_end()
    );
    let _ = writeln!(svg, r##"<g fill="#c03020">"##);
    for d in dots {
        let (x, y) = d.split_once(',').expect("formatted pair");
        let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="2.5"/>"#);
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellState;
    use crate::orbit::{count_clusters, InitialCondition, MapMode, RetainedState};

    fn traj(hs: Vec<Vec<f64>>, burn_in: usize) -> Trajectory {
        Trajectory {
            mode: MapMode::WithInput,
            initial: InitialCondition::Word(0),
            tokens: vec![0; hs.len()],
            states: hs
                .into_iter()
                .enumerate()
                .map(|(step, h)| RetainedState {
                    step,
                    state: CellState {
                        h: Vector::new(h).unwrap(),
                        c: Vector::zeros(0),
                    },
                })
                .collect(),
            burn_in,
        }
    }

    fn periodic(k: usize) -> OrbitVerdict {
        OrbitVerdict::Periodic {
            period: k,
            cycle: vec![0; k],
            detect_step: 0,
            verified_repetitions: 10,
        }
    }

    fn in_bounds(pts: &[(f64, f64)]) -> bool {
        let lo = PLOT_SIZE * PLOT_MARGIN - 1e-9;
        let hi = PLOT_SIZE * (1.0 - PLOT_MARGIN) + 1e-9;
        pts.iter().all(|&(x, y)| (lo..=hi).contains(&x) && (lo..=hi).contains(&y))
    }

    #[test]
    fn period_three_makes_three_clusters() {
        let c = [[0.2, -0.1, 0.5, 0.0], [-0.3, 0.4, 0.1, 0.2], [0.0, 0.0, -0.6, 0.1]];
        // transient before burn-in, then the exact cycle
        let mut hs: Vec<Vec<f64>> = (0..100).map(|t| vec![t as f64 * 0.01; 4]).collect();
        hs.extend((0..300).map(|t| c[t % 3].to_vec()));
        let t = traj(hs, 100);
        let pts = orbit_plot_points(&t, &periodic(3)).unwrap();
        assert_eq!(pts.len(), 300);
        assert!(in_bounds(&pts));
        let span = PLOT_SIZE * (1.0 - 2.0 * PLOT_MARGIN);
        let mut reps: Vec<(f64, f64)> = Vec::new();
        for &p in &pts {
            if let Some(r) = reps.iter().find(|r| (r.0 - p.0).hypot(r.1 - p.1) < 0.01 * span) {
                assert!((r.0 - p.0).abs() < 1e-9 && (r.1 - p.1).abs() < 1e-9);
            } else {
                reps.push(p);
            }
        }
        assert_eq!(reps.len(), 3);
        let svg = render_orbit_plot(&t, &periodic(3)).unwrap();
        assert!(svg.contains("period-3 orbit"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg") && svg.contains(r#"width="600""#));
    }

    #[test]
    fn sink_plot_keeps_transient() {
        let hs: Vec<Vec<f64>> = (0..200)
            .map(|t| {
                let r = 0.9f64.powi(t);
                vec![r * (0.3 * t as f64).cos(), r * (0.3 * t as f64).sin(), 0.5]
            })
            .collect();
        let t = traj(hs, 100);
        let pts = orbit_plot_points(&t, &periodic(1)).unwrap();
        assert_eq!(pts.len(), 200);
        let states: Vec<Vector> = t.states.iter().map(|s| s.state.h.clone()).collect();
        // one terminal cluster plus many distinct transient points
        assert!(count_clusters(&states[150..], 1e-6) == 1);
        assert!(count_clusters(&states, 1e-6) > 100);
        let svg = render_orbit_plot(&t, &periodic(1)).unwrap();
        assert!(svg.contains("period-1 orbit"));
    }

    #[test]
    fn planar_polygon_keeps_its_shape() {
        // regular k-gon embedded in a tilted plane of R^6
        let k = 7;
        let u = [1.0, 2.0, 0.0, -1.0, 0.5, 0.0];
        let v = [0.0, 1.0, -2.0, 1.0, 0.0, 3.0];
        // Gram-Schmidt for an orthonormal basis
        let nu = u.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        let e1: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let d: f64 = v.iter().zip(&e1).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = v.iter().zip(&e1).map(|(a, b)| a - d * b).collect();
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e2: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let hs: Vec<Vec<f64>> = (0..70)
            .map(|t| {
                let a = 2.0 * std::f64::consts::PI * (t % k) as f64 / k as f64;
                (0..6).map(|i| a.cos() * e1[i] + a.sin() * e2[i] + 1.0).collect()
            })
            .collect();
        let t = traj(hs, 0);
        let pts = orbit_plot_points(&t, &periodic(k)).unwrap();
        // equal-length sides, same ratio to the circumradius as the input
        let side = |i: usize| {
            let (a, b) = (pts[i], pts[i + 1]);
            (a.0 - b.0).hypot(a.1 - b.1)
        };
        for i in 0..k {
            assert!((side(i) - side(0)).abs() < 1e-6, "side {i}");
        }
        let cx = pts[..k].iter().map(|p| p.0).sum::<f64>() / k as f64;
        let cy = pts[..k].iter().map(|p| p.1).sum::<f64>() / k as f64;
        let r = (pts[0].0 - cx).hypot(pts[0].1 - cy);
        let expect = 2.0 * (std::f64::consts::PI / k as f64).sin();
        assert!((side(0) / r - expect).abs() < 1e-6);
    }

    #[test]
    fn rendering_is_deterministic_and_checks_input() {
        let hs: Vec<Vec<f64>> = (0..50).map(|t| vec![(t as f64).sin(), (t as f64 * 0.7).cos()]).collect();
        let t = traj(hs, 0);
        let np = OrbitVerdict::NonPeriodic { steps_examined: 50 };
        let a = render_orbit_plot(&t, &np).unwrap();
        assert_eq!(a, render_orbit_plot(&t, &np).unwrap());
        assert!(a.contains("non-periodic orbit"));
        let short = traj(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0);
        assert!(matches!(orbit_plot_points(&short, &np), Err(Error::Degenerate(_))));
        let flat = traj(vec![vec![0.5, 0.5]; 10], 0);
        assert!(matches!(render_orbit_plot(&flat, &periodic(1)), Err(Error::Degenerate(_))));
    }
}
