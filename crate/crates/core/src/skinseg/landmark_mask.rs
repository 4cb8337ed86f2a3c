use super::mask::RoiMask;
use crate::error::{Error, Result};
use crate::videoio::{layout, LandmarkTrack, Point};

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area (positive for counter-clockwise order).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| {
        d == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Rejects polygons with zero area or crossing non-adjacent edges.
fn check_simple(poly: &[Point], name: &str) -> Result<()> {
    if polygon_area(poly).abs() < 1e-9 {
        return Err(Error::Geometry(format!("{name} polygon has zero area")));
    }
    let n = poly.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(Error::Geometry(format!("{name} polygon self-intersects")));
            }
        }
    }
    Ok(())
}

/// Even-odd point-in-polygon test.
fn inside_polygon(poly: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1])
            && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Inside-or-on test against a counter-clockwise convex polygon.
fn inside_convex(hull: &[Point], p: Point) -> bool {
    let n = hull.len();
    (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0.0)
}

/// Face mask for one frame: hull of all points minus eyes and outer mouth,
/// sampled at pixel centres.
pub fn landmark_frame_mask(points: &[Point], width: usize, height: usize) -> Result<Vec<bool>> {
    let hull = convex_hull(points);
    if hull.len() < 3 || polygon_area(&hull) < 1e-9 {
        return Err(Error::Geometry("landmark hull is degenerate".into()));
    }
    let holes = [
        (&points[layout::RIGHT_EYE], "right eye"),
        (&points[layout::LEFT_EYE], "left eye"),
        (&points[layout::OUTER_MOUTH], "mouth"),
    ];
    for (poly, name) in holes {
        check_simple(poly, name)?;
    }
    let mut mask = vec![false; width * height];
    let (x0, y0, x1, y1) = hull.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), p| (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1])),
    );
    let span = |lo: f64, hi: f64, n: usize| {
        let a = (lo - 0.5).floor().max(0.0) as usize;
        let b = ((hi - 0.5).ceil().max(-1.0) + 1.0).min(n as f64) as usize;
        a.min(n)..b
    };
    for y in span(y0, y1, height) {
        for x in span(x0, x1, width) {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            mask[y * width + x] =
                inside_convex(&hull, p) && !holes.iter().any(|(poly, _)| inside_polygon(poly, p));
        }
    }
    Ok(mask)
}

/// Landmark-polygon mask for every frame of a track.
pub fn landmark_mask(track: &LandmarkTrack, width: usize, height: usize) -> Result<RoiMask> {
    let frames = track
        .frames()
        .iter()
        .map(|pts| landmark_frame_mask(pts, width, height))
        .collect::<Result<Vec<_>>>()?;
    RoiMask::new(width, height, frames)
}
