//! Incremental beneath–beyond hull with outside sets (quickhull ordering).
//!
//! Facets are simplicial. `neighbors[k]` is the facet across the ridge that
//! omits `verts[k]`. Every normal is oriented away from one fixed interior
//! point, the centroid of the initial simplex, so orientation never needs
//! repair after a facet is created.

use std::collections::HashMap;

use super::{facet_plane, Facet, PointCloud, Polytope};
use crate::error::{Error, Result};
use crate::linalg::{self, dot, gram_schmidt};

struct Work {
    verts: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    neighbors: Vec<usize>,
    outside: Vec<usize>,
    furthest: usize,
    furthest_dist: f64,
    alive: bool,
}

impl Work {
    fn dist(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }

    fn push_outside(&mut self, i: usize, dist: f64) {
        if self.outside.is_empty() || dist > self.furthest_dist {
            self.furthest = i;
            self.furthest_dist = dist;
        }
        self.outside.push(i);
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Direction in `[-1, 1]^d` derived from the point index alone.
fn jitter_direction(i: usize, d: usize) -> impl Iterator<Item = f64> {
    let mut state = splitmix(i as u64 ^ 0x6A09_E667_F3BC_C908);
    (0..d).map(move |_| {
        state = splitmix(state);
        (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    })
}

/// Convex hull of a point cloud whose affine hull is all of `R^d`.
///
/// Points are jittered by `1e-12 * (1 + i mod 1000) * max(1, scale)` along a
/// direction fixed by their index before the combinatorial construction; the
/// returned vertices, normals and offsets use the original coordinates.
/// Vertices that are not strictly extreme in the original coordinates (for
/// instance the centre of a cube face) are dropped.
pub fn convex_hull(cloud: &PointCloud) -> Result<Polytope> {
    let mut keep: Vec<usize> = (0..cloud.len()).collect();
    // Each pass can only remove points, and the second pass sees strictly
    // extreme points only, so this settles after at most a few rounds.
    for _ in 0..4 {
        let sub = if keep.len() == cloud.len() {
            cloud.clone()
        } else {
            let mut c = PointCloud::with_capacity(cloud.dim(), keep.len());
            for &i in &keep {
                c.push(cloud.point(i));
            }
            c
        };
        let (poly, dropped) = hull_pass(&sub)?;
        if !dropped {
            let source = poly.source_indices.iter().map(|&j| keep[j]).collect();
            return Ok(Polytope::from_parts(poly.vertices, source, poly.facets));
        }
        keep = poly.source_indices.iter().map(|&j| keep[j]).collect();
    }
    Err(Error::DegenerateInput(
        "hull vertex set did not stabilize".into(),
    ))
}

struct Pass {
    vertices: PointCloud,
    source_indices: Vec<usize>,
    facets: Vec<Facet>,
}

/// One construction. The flag is true when some vertices turned out not to be
/// strictly extreme; `source_indices` then lists the extreme ones only.
fn hull_pass(cloud: &PointCloud) -> Result<(Pass, bool)> {
    let d = cloud.dim();
    let n = cloud.len();
    if n < d + 1 {
        return Err(Error::DegenerateInput(format!(
            "{n} points cannot span R^{d}"
        )));
    }
    let scale = cloud
        .coords()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1.0);
    if !scale.is_finite() {
        return Err(Error::DegenerateInput("non-finite coordinate".into()));
    }
    let mut pts = cloud.coords().to_vec();
    for i in 0..n {
        let mag = 1e-12 * (1 + i % 1000) as f64 * scale;
        for (x, u) in pts[i * d..(i + 1) * d].iter_mut().zip(jitter_direction(i, d)) {
            *x += mag * u;
        }
    }
    let pt = |i: usize| &pts[i * d..(i + 1) * d];
    let eps = 100.0 * f64::EPSILON * scale;

    let simplex = initial_simplex(&pts, n, d, scale)?;
    let interior = linalg::centroid(simplex.iter().map(|&i| pt(i)), d);

    let mut facets: Vec<Work> = Vec::new();
    for k in 0..=d {
        let verts: Vec<usize> = (0..=d).filter(|&j| j != k).map(|j| simplex[j]).collect();
        let neighbors: Vec<usize> = (0..=d).filter(|&j| j != k).collect();
        let refs: Vec<&[f64]> = verts.iter().map(|&i| pt(i)).collect();
        let (normal, offset) = facet_plane(&refs, &interior)
            .ok_or_else(|| Error::DegenerateInput("flat initial simplex".into()))?;
        facets.push(Work {
            verts,
            normal,
            offset,
            neighbors,
            outside: Vec::new(),
            furthest: 0,
            furthest_dist: 0.0,
            alive: true,
        });
    }

    let mut in_simplex = vec![false; n];
    for &i in &simplex {
        in_simplex[i] = true;
    }
    for (i, _) in in_simplex.iter().enumerate().filter(|(_, &s)| !s) {
        let p = pt(i);
        for f in facets.iter_mut() {
            let dist = f.dist(p);
            if dist > eps {
                f.push_outside(i, dist);
                break;
            }
        }
    }

    let mut stack: Vec<usize> = (0..facets.len())
        .filter(|&f| !facets[f].outside.is_empty())
        .collect();
    let mut visible: Vec<usize> = Vec::new();
    let mut horizon: Vec<(usize, usize)> = Vec::new();
    let mut mark: Vec<u32> = vec![0; facets.len()];
    let mut round: u32 = 0;

    while let Some(f0) = stack.pop() {
        if !facets[f0].alive || facets[f0].outside.is_empty() {
            continue;
        }
        round += 1;
        let apex = facets[f0].furthest;
        let p = pt(apex);

        visible.clear();
        horizon.clear();
        mark.resize(facets.len(), 0);
        visible.push(f0);
        mark[f0] = round;
        let mut head = 0;
        while head < visible.len() {
            let f = visible[head];
            head += 1;
            for k in 0..d {
                let g = facets[f].neighbors[k];
                if mark[g] == round {
                    continue;
                }
                if facets[g].dist(p) > eps {
                    mark[g] = round;
                    visible.push(g);
                } else {
                    horizon.push((f, k));
                }
            }
        }

        let mut ridges: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        let mut created = Vec::with_capacity(horizon.len());
        for &(fv, k) in &horizon {
            let g = facets[fv].neighbors[k];
            let mut verts = facets[fv].verts.clone();
            verts[k] = apex;
            let refs: Vec<&[f64]> = verts.iter().map(|&i| pt(i)).collect();
            let (normal, offset) = facet_plane(&refs, &interior).ok_or_else(|| {
                Error::DegenerateInput("numerically flat facet during hull construction".into())
            })?;
            let id = facets.len();
            let mut neighbors = vec![usize::MAX; d];
            neighbors[k] = g;
            if let Some(slot) = facets[g].neighbors.iter().position(|&x| x == fv) {
                facets[g].neighbors[slot] = id;
            }
            for j in (0..d).filter(|&j| j != k) {
                let mut key: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(s, _)| s != j)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                match ridges.remove(&key) {
                    Some((other, other_slot)) => {
                        neighbors[j] = other;
                        facets[other].neighbors[other_slot] = id;
                    }
                    None => {
                        ridges.insert(key, (id, j));
                    }
                }
            }
            facets.push(Work {
                verts,
                normal,
                offset,
                neighbors,
                outside: Vec::new(),
                furthest: 0,
                furthest_dist: 0.0,
                alive: true,
            });
            created.push(id);
        }
        if !ridges.is_empty() {
            return Err(Error::DegenerateInput(
                "inconsistent horizon during hull construction".into(),
            ));
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            facets[f].alive = false;
            orphans.append(&mut facets[f].outside);
        }
        for i in orphans {
            if i == apex {
                continue;
            }
            let q = pt(i);
            for &f in &created {
                let dist = facets[f].dist(q);
                if dist > eps {
                    facets[f].push_outside(i, dist);
                    break;
                }
            }
        }
        for &f in &created {
            if !facets[f].outside.is_empty() {
                stack.push(f);
            }
        }
    }

    finish(cloud, &simplex, facets)
}

/// Picks `d + 1` points spanning a simplex of maximal-ish height at each step.
fn initial_simplex(pts: &[f64], n: usize, d: usize, scale: f64) -> Result<Vec<usize>> {
    let pt = |i: usize| &pts[i * d..(i + 1) * d];
    let mut best = (0, 0, -1.0);
    for axis in 0..d {
        let (mut lo, mut hi) = (0, 0);
        for i in 1..n {
            if pt(i)[axis] < pt(lo)[axis] {
                lo = i;
            }
            if pt(i)[axis] > pt(hi)[axis] {
                hi = i;
            }
        }
        let spread = pt(hi)[axis] - pt(lo)[axis];
        if spread > best.2 {
            best = (lo, hi, spread);
        }
    }
    let mut chosen = vec![best.0, best.1];
    let base = pt(best.0).to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let first = linalg::sub(pt(best.1), &base);
    let (b, content) = gram_schmidt(&[first], 0.0);
    if content <= 1e-9 * scale {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    basis.extend(b);
    while chosen.len() < d + 1 {
        let mut far = (usize::MAX, -1.0);
        for i in 0..n {
            let mut v = linalg::sub(pt(i), &base);
            let h = linalg::orthogonalize(&mut v, &basis);
            if h > far.1 {
                far = (i, h);
            }
        }
        if far.1 <= 1e-9 * scale {
            return Err(Error::DegenerateInput(format!(
                "affine hull has dimension {} < {d}",
                chosen.len() - 1
            )));
        }
        let mut v = linalg::sub(pt(far.0), &base);
        let h = linalg::orthogonalize(&mut v, &basis);
        v.iter_mut().for_each(|x| *x /= h);
        basis.push(v);
        chosen.push(far.0);
    }
    Ok(chosen)
}

fn finish(cloud: &PointCloud, simplex: &[usize], facets: Vec<Work>) -> Result<(Pass, bool)> {
    let d = cloud.dim();
    let live: Vec<&Work> = facets.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = live.iter().flat_map(|f| f.verts.iter().copied()).collect();
    used.sort_unstable();
    used.dedup();
    let mut index = HashMap::with_capacity(used.len());
    let mut vertices = PointCloud::with_capacity(d, used.len());
    for (k, &i) in used.iter().enumerate() {
        index.insert(i, k);
        vertices.push(cloud.point(i));
    }
    let interior = linalg::centroid(simplex.iter().map(|&i| cloud.point(i)), d);

    let mut out = Vec::with_capacity(live.len());
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); used.len()];
    for f in live {
        let refs: Vec<&[f64]> = f.verts.iter().map(|&i| cloud.point(i)).collect();
        let (normal, offset) = match facet_plane(&refs, &interior) {
            Some(plane) => plane,
            None => {
                let offset = dot(&f.normal, refs[0]);
                (f.normal.clone(), offset)
            }
        };
        let verts: Vec<usize> = f.verts.iter().map(|i| index[i]).collect();
        for &v in &verts {
            incident[v].push(out.len());
        }
        out.push(Facet {
            vertices: verts,
            normal,
            offset,
        });
    }

    // A vertex is strictly extreme iff the normals of its incident facets span
    // R^d; coplanar fans around a face point leave a lower-rank normal cone.
    let extreme: Vec<usize> = (0..used.len())
        .filter(|&v| {
            let normals: Vec<Vec<f64>> =
                incident[v].iter().map(|&f| out[f].normal.clone()).collect();
            gram_schmidt_rank(&normals) == d
        })
        .collect();
    let dropped = extreme.len() < used.len();
    let pass = if dropped {
        Pass {
            vertices: PointCloud::new(d),
            source_indices: extreme.iter().map(|&v| used[v]).collect(),
            facets: Vec::new(),
        }
    } else {
        Pass {
            vertices,
            source_indices: used,
            facets: out,
        }
    };
    Ok((pass, dropped))
}

fn gram_schmidt_rank(vectors: &[Vec<f64>]) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        let res = linalg::orthogonalize(&mut w, &basis);
        if res > 1e-6 {
            w.iter_mut().for_each(|x| *x /= res);
            basis.push(w);
        }
    }
    basis.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{contains_point, Region, TOLERANCE};

    fn lcg_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
        let mut s = seed;
        let coords = (0..n * d)
            .map(|_| {
                s = splitmix(s);
                (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect();
        PointCloud::from_flat(d, coords).unwrap()
    }

    #[test]
    fn square_with_centre() {
        let cloud = PointCloud::from_points(
            2,
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        )
        .unwrap();
        let p = convex_hull(&cloud).unwrap();
        assert_eq!(p.source_indices(), &[0, 1, 2, 3]);
        assert_eq!(p.facets().len(), 4);
        assert!((p.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_has_d_plus_one_facets() {
        for d in 1..=6 {
            let mut cloud = PointCloud::new(d);
            cloud.push(&vec![0.0; d]);
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                cloud.push(&e);
            }
            let p = convex_hull(&cloud).unwrap();
            assert_eq!(p.facets().len(), d + 1, "d = {d}");
            assert_eq!(p.vertices().len(), d + 1);
        }
    }

    #[test]
    fn cube_with_face_and_edge_points_keeps_corners() {
        let mut cloud = PointCloud::new(3);
        for mask in 0..8usize {
            cloud.push(&[(mask & 1) as f64, ((mask >> 1) & 1) as f64, ((mask >> 2) & 1) as f64]);
        }
        cloud.push(&[0.5, 0.5, 1.0]);
        cloud.push(&[1.0, 0.5, 0.0]);
        cloud.push(&[0.5, 0.5, 0.5]);
        let p = convex_hull(&cloud).unwrap();
        assert_eq!(p.source_indices(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!((p.volume() - 1.0).abs() < 1e-12);
        assert!((p.surface_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_hull() {
        let cloud = PointCloud::from_points(1, &[[0.3], [-1.2], [2.5], [0.0]]).unwrap();
        let p = convex_hull(&cloud).unwrap();
        assert_eq!(p.source_indices(), &[1, 2]);
        assert!((p.volume() - 3.7).abs() < 1e-12);
        assert!((p.surface_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let line = PointCloud::from_points(2, &[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert!(matches!(convex_hull(&line), Err(Error::DegenerateInput(_))));
        let few = PointCloud::from_points(3, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(convex_hull(&few), Err(Error::DegenerateInput(_))));
        assert!(matches!(
            convex_hull(&PointCloud::new(2)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn every_input_point_is_inside_every_facet() {
        for d in 2..=5 {
            let cloud = lcg_cloud(300, d, d as u64);
            let p = convex_hull(&cloud).unwrap();
            for x in cloud.iter() {
                assert!(contains_point(&p, x));
            }
            for f in p.facets() {
                assert!((linalg::norm(&f.normal) - 1.0).abs() < 1e-12);
                for &v in &f.vertices {
                    assert!((dot(&f.normal, p.vertices().point(v)) - f.offset).abs() <= TOLERANCE);
                }
            }
            let ball_like: f64 = p.volume();
            assert!(ball_like > 0.0 && ball_like <= 2f64.powi(d as i32));
        }
    }

    #[test]
    fn hull_of_vertices_is_idempotent() {
        let cloud = lcg_cloud(200, 4, 99);
        let p = convex_hull(&cloud).unwrap();
        let q = convex_hull(p.vertices()).unwrap();
        assert_eq!(q.vertices().len(), p.vertices().len());
        assert!((q.volume() - p.volume()).abs() < 1e-12 * p.volume());
        assert!(p.contains(&p.vertices().centroid()));
    }
}
