//! Plane hulls by monotone chain, with an octagon prefilter for large inputs.

use super::PointCloud;

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Extreme points along eight directions, in counter-clockwise order.
fn octagon(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    #[inline]
    fn keys(p: [f64; 2]) -> [f64; 8] {
        let (s, t) = (p[0] + p[1], p[1] - p[0]);
        [p[0], s, p[1], t, -p[0], -s, -p[1], -t]
    }
    let mut best = [points[0]; 8];
    let mut val = keys(points[0]);
    for &p in &points[1..] {
        let k = keys(p);
        for j in 0..8 {
            if k[j] > val[j] {
                val[j] = k[j];
                best[j] = p;
            }
        }
    }
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(8);
    for b in best {
        if out.last() != Some(&b) && out.first() != Some(&b) {
            out.push(b);
        }
    }
    out
}

/// Counter-clockwise hull vertices without collinear points. Inputs with fewer
/// than three affinely independent points give the extreme points only.
pub fn planar_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if points.len() < 3 {
        let mut v = points.to_vec();
        v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        v.dedup();
        return v;
    }
    let mut pts: Vec<[f64; 2]> = if points.len() > 64 {
        let oct = octagon(points);
        if oct.len() >= 3 {
            let k = oct.len();
            points
                .iter()
                .copied()
                .filter(|&p| (0..k).any(|i| cross(oct[i], oct[(i + 1) % k], p) <= 0.0))
                .collect()
        } else {
            points.to_vec()
        }
    } else {
        points.to_vec()
    };
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub fn polygon_area(hull: &[[f64; 2]]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let k = hull.len();
    let twice: f64 = (0..k)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % k]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    (twice / 2.0).abs()
}

pub fn polygon_perimeter(hull: &[[f64; 2]]) -> f64 {
    match hull.len() {
        0 | 1 => 0.0,
        2 => 2.0 * (hull[0][0] - hull[1][0]).hypot(hull[0][1] - hull[1][1]),
        k => (0..k)
            .map(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % k]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .sum(),
    }
}

pub(crate) fn as_pairs(cloud: &PointCloud) -> Vec<[f64; 2]> {
    debug_assert_eq!(cloud.dim(), 2);
    cloud.iter().map(|p| [p[0], p[1]]).collect()
}
