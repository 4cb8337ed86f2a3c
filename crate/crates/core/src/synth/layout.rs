use std::f64::consts::PI;

use super::Ellipse;
use crate::videoio::{FaceLandmarks, LANDMARK_COUNT};

/// Lays the 68-point face layout out on an ellipse: jaw along the lower arc,
/// brows along the upper arc, eyes, nose and mouth inside.
pub fn ellipse_landmarks(e: &Ellipse) -> FaceLandmarks {
    let mut pts = [[0.0; 2]; LANDMARK_COUNT];
    let on_arc = |theta: f64| [e.cx + e.ax * theta.cos(), e.cy + e.ay * theta.sin()];

    // jaw 0..17: left extreme, through the chin, to the right extreme
    for (i, p) in pts[0..17].iter_mut().enumerate() {
        *p = on_arc(PI - i as f64 * PI / 16.0);
    }
    // brows 17..27 along the upper arc, left to right in the image
    for (j, p) in pts[17..27].iter_mut().enumerate() {
        *p = on_arc(PI + PI / 10.0 + j as f64 * (0.8 * PI / 9.0));
    }
    // nose bridge 27..31, nostrils 31..36
    for (j, p) in pts[27..31].iter_mut().enumerate() {
        *p = [e.cx, e.cy - 0.35 * e.ay + j as f64 * 0.13 * e.ay];
    }
    for (j, p) in pts[31..36].iter_mut().enumerate() {
        *p = [
            e.cx - 0.2 * e.ax + j as f64 * 0.1 * e.ax,
            e.cy + 0.15 * e.ay,
        ];
    }
    // eyes 36..42 and 42..48 as hexagons
    let hexagon = [
        (-1.0, 0.0),
        (-0.5, -1.0),
        (0.5, -1.0),
        (1.0, 0.0),
        (0.5, 1.0),
        (-0.5, 1.0),
    ];
    for (start, side) in [(36usize, -1.0), (42usize, 1.0)] {
        let (cx, cy) = (e.cx + side * 0.4 * e.ax, e.cy - 0.25 * e.ay);
        for (k, (u, v)) in hexagon.iter().enumerate() {
            pts[start + k] = [cx + u * 0.18 * e.ax, cy + v * 0.08 * e.ay];
        }
    }
    // outer lip 48..60, inner lip 60..68
    let (mx, my) = (e.cx, e.cy + 0.5 * e.ay);
    for (k, p) in pts[48..60].iter_mut().enumerate() {
        let phi = PI + k as f64 * 2.0 * PI / 12.0;
        *p = [mx + 0.35 * e.ax * phi.cos(), my + 0.12 * e.ay * phi.sin()];
    }
    for (k, p) in pts[60..68].iter_mut().enumerate() {
        let phi = PI + k as f64 * 2.0 * PI / 8.0;
        *p = [mx + 0.25 * e.ax * phi.cos(), my + 0.05 * e.ay * phi.sin()];
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_points_inside_ellipse() {
        let e = Ellipse {
            cx: 32.0,
            cy: 30.0,
            ax: 18.0,
            ay: 22.0,
        };
        for p in ellipse_landmarks(&e) {
            let u = (p[0] - e.cx) / e.ax;
            let v = (p[1] - e.cy) / e.ay;
            assert!(u * u + v * v <= 1.0 + 1e-12, "{p:?}");
        }
    }

    #[test]
    fn jaw_spans_the_ellipse_width() {
        let e = Ellipse {
            cx: 10.0,
            cy: 10.0,
            ax: 5.0,
            ay: 8.0,
        };
        let pts = ellipse_landmarks(&e);
        assert!((pts[0][0] - 5.0).abs() < 1e-12);
        assert!((pts[16][0] - 15.0).abs() < 1e-12);
        assert!((pts[8][1] - 18.0).abs() < 1e-12);
    }
}
