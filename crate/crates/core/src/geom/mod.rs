//! Exact convex geometry in `R^d` for small `d`: point clouds, half-spaces,
//! simplices, and full-dimensional polytopes produced by [`convex_hull`].
//!
//! All membership tests share the single absolute tolerance [`TOLERANCE`].

mod hull;
mod planar;

pub use hull::convex_hull;
pub(crate) use planar::as_pairs;
pub use planar::{planar_hull, polygon_area, polygon_perimeter};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, gram_schmidt, norm};

/// Facet-membership and containment tolerance (absolute).
pub const TOLERANCE: f64 = 1e-9;

/// Ordered list of points in `R^dim`, stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "point cloud dimension must be positive");
        PointCloud {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim > 0, "point cloud dimension must be positive");
        PointCloud {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dimension must be positive".into()));
        }
        let mut cloud = PointCloud::with_capacity(dim, points.len());
        for p in points {
            cloud.try_push(p.as_ref())?;
        }
        Ok(cloud)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        Ok(PointCloud { dim, coords })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Appends a point; panics on a dimension mismatch.
    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim, "point has wrong dimension");
        self.coords.extend_from_slice(p);
    }

    pub fn try_push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn extend(&mut self, other: &PointCloud) {
        assert_eq!(other.dim, self.dim);
        self.coords.extend_from_slice(&other.coords);
    }

    pub fn scaled(&self, c: f64) -> PointCloud {
        PointCloud {
            dim: self.dim,
            coords: self.coords.iter().map(|x| x * c).collect(),
        }
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn centroid(&self) -> Vec<f64> {
        linalg::centroid(self.iter(), self.dim)
    }
}

/// Anything with a point-membership test.
pub trait Region {
    fn contains(&self, x: &[f64]) -> bool;
}

impl<R: Region + ?Sized> Region for &R {
    fn contains(&self, x: &[f64]) -> bool {
        (**self).contains(x)
    }
}

/// The closed half-space `{x : <x, normal> <= offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfSpace {
    /// Normalizes `normal` (and rescales `offset` with it).
    pub fn new(normal: &[f64], offset: f64) -> Result<Self> {
        let len = norm(normal);
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(HalfSpace {
            normal: normal.iter().map(|x| x / len).collect(),
            offset: offset / len,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Positive outside, negative inside.
    #[inline]
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    /// Smallest Euclidean norm of a point of the half-space.
    pub fn distance_from_origin_to_set(&self) -> f64 {
        (-self.offset).max(0.0)
    }
}

impl Region for HalfSpace {
    fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) <= TOLERANCE
    }
}

impl Region for [HalfSpace] {
    fn contains(&self, x: &[f64]) -> bool {
        self.iter().all(|h| h.contains(x))
    }
}

impl Region for Vec<HalfSpace> {
    fn contains(&self, x: &[f64]) -> bool {
        Region::contains(self.as_slice(), x)
    }
}

/// Membership in a polytope or in an intersection of half-spaces, inclusive
/// within [`TOLERANCE`].
pub fn contains_point<R: Region + ?Sized>(region: &R, x: &[f64]) -> bool {
    region.contains(x)
}

/// A full-dimensional simplex given by its `d + 1` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let d = vertices.first().map(Vec::len).unwrap_or(0);
        if d == 0 || vertices.len() != d + 1 {
            return Err(Error::InvalidDimension(format!(
                "a simplex in R^{d} needs {} vertices, got {}",
                d + 1,
                vertices.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let s = Simplex { vertices };
        if !(s.volume() > 0.0) {
            return Err(Error::DegenerateInput("simplex has zero volume".into()));
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, k: usize) -> &[f64] {
        &self.vertices[k]
    }

    pub fn volume(&self) -> f64 {
        let refs: Vec<&[f64]> = self.vertices.iter().map(Vec::as_slice).collect();
        simplex_volume(&refs)
    }

    pub fn centroid(&self) -> Vec<f64> {
        linalg::centroid(self.vertices.iter().map(Vec::as_slice), self.dim())
    }

    /// Image under `x -> center + factor (x - center)`.
    pub fn homothety(&self, center: &[f64], factor: f64) -> Result<Simplex> {
        Simplex::new(
            self.vertices
                .iter()
                .map(|v| linalg::lerp(center, v, factor))
                .collect(),
        )
    }

    /// Barycentric coordinates of `x` (weights of vertices `0..=d`).
    pub fn barycentric(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim();
        let v0 = &self.vertices[0];
        // Columns are v_k - v0; solve for the weights of v_1..v_d.
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| (1..=d).map(|k| self.vertices[k][i] - v0[i]).collect())
            .collect();
        let rhs = linalg::sub(x, v0);
        let w = linalg::solve(&rows, &rhs)?;
        let mut out = Vec::with_capacity(d + 1);
        out.push(1.0 - w.iter().sum::<f64>());
        out.extend(w);
        Some(out)
    }

    /// Facet half-spaces `{<n, x> <= b}` with outward unit normals; facet `k`
    /// is the one opposite vertex `k`.
    pub fn halfspaces(&self) -> Vec<HalfSpace> {
        let d = self.dim();
        let c = self.centroid();
        (0..=d)
            .map(|k| {
                let others: Vec<&[f64]> = (0..=d)
                    .filter(|&j| j != k)
                    .map(|j| self.vertices[j].as_slice())
                    .collect();
                let (normal, offset) = facet_plane(&others, &c)
                    .expect("non-degenerate simplex has well-defined facets");
                HalfSpace { normal, offset }
            })
            .collect()
    }
}

impl Region for Simplex {
    fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces().iter().all(|h| h.contains(x))
    }
}

/// A simplex with its facet half-spaces cached, for repeated membership tests.
#[derive(Debug, Clone)]
pub struct SimplexRegion {
    simplex: Simplex,
    halfspaces: Vec<HalfSpace>,
}

impl SimplexRegion {
    pub fn new(simplex: Simplex) -> Self {
        let halfspaces = simplex.halfspaces();
        SimplexRegion {
            simplex,
            halfspaces,
        }
    }

    pub fn simplex(&self) -> &Simplex {
        &self.simplex
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }
}

impl Region for SimplexRegion {
    fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }
}

/// Outward unit normal and offset of the hyperplane through `points` (`d` of
/// them), oriented away from `interior`.
pub(crate) fn facet_plane(points: &[&[f64]], interior: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p0 = points[0];
    let edges: Vec<Vec<f64>> = points[1..].iter().map(|p| linalg::sub(p, p0)).collect();
    let (basis, content) = gram_schmidt(&edges, 1e-13);
    if content == 0.0 {
        return None;
    }
    let mut n = linalg::sub(p0, interior);
    let res = linalg::orthogonalize(&mut n, &basis);
    if !(res > 0.0) {
        return None;
    }
    n.iter_mut().for_each(|x| *x /= res);
    let offset = dot(&n, p0);
    Some((n, offset))
}

/// A facet of a [`Polytope`]: indices into the polytope's vertex list, the
/// outward unit normal, and the offset `<normal, v> = offset` of its plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Full-dimensional convex polytope with simplicial facets.
#[derive(Debug, Clone)]
pub struct Polytope {
    vertices: PointCloud,
    source_indices: Vec<usize>,
    facets: Vec<Facet>,
}

impl Polytope {
    pub(crate) fn from_parts(
        vertices: PointCloud,
        source_indices: Vec<usize>,
        facets: Vec<Facet>,
    ) -> Self {
        Polytope {
            vertices,
            source_indices,
            facets,
        }
    }

    pub fn dim(&self) -> usize {
        self.vertices.dim()
    }

    pub fn vertices(&self) -> &PointCloud {
        &self.vertices
    }

    /// Position of each vertex in the cloud the hull was built from.
    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn volume(&self) -> f64 {
        polytope_volume(self)
    }

    pub fn surface_area(&self) -> f64 {
        surface_area(self)
    }

    pub fn support(&self, direction: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, direction))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Region for Polytope {
    fn contains(&self, x: &[f64]) -> bool {
        self.facets
            .iter()
            .all(|f| dot(&f.normal, x) - f.offset <= TOLERANCE)
    }
}

/// Lebesgue measure of `p`, summed over the cones from the vertex centroid to
/// each facet.
pub fn polytope_volume(p: &Polytope) -> f64 {
    let d = p.dim();
    let c = p.vertices.centroid();
    let inv = 1.0 / linalg::factorial(d);
    p.facets
        .iter()
        .map(|f| {
            let vs: Vec<Vec<f64>> = f
                .vertices
                .iter()
                .map(|&i| linalg::sub(p.vertices.point(i), &c))
                .collect();
            gram_schmidt(&vs, 0.0).1 * inv
        })
        .sum()
}

/// Sum of the `(d-1)`-volumes of the facets; `V_{d-1} = surface_area / 2`.
pub fn surface_area(p: &Polytope) -> f64 {
    let d = p.dim();
    let inv = 1.0 / linalg::factorial(d - 1);
    p.facets
        .iter()
        .map(|f| {
            let v0 = p.vertices.point(f.vertices[0]);
            let edges: Vec<Vec<f64>> = f.vertices[1..]
                .iter()
                .map(|&i| linalg::sub(p.vertices.point(i), v0))
                .collect();
            gram_schmidt(&edges, 0.0).1 * inv
        })
        .sum()
}

/// `|det(v_1 - v_0, ..., v_d - v_0)| / d!`; zero for degenerate input.
pub fn simplex_volume(vertices: &[&[f64]]) -> f64 {
    let Some((v0, rest)) = vertices.split_first() else {
        return 0.0;
    };
    let d = v0.len();
    if rest.len() != d {
        return 0.0;
    }
    let edges: Vec<Vec<f64>> = rest.iter().map(|v| linalg::sub(v, v0)).collect();
    gram_schmidt(&edges, 1e-14).1 / linalg::factorial(d)
}

/// `max_x <x, direction>` over the cloud.
pub fn support_value(cloud: &PointCloud, direction: &[f64]) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if direction.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: direction.len(),
        });
    }
    Ok(cloud
        .iter()
        .map(|x| dot(x, direction))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_cube(d: usize) -> PointCloud {
        let mut c = PointCloud::new(d);
        for mask in 0..(1usize << d) {
            let p: Vec<f64> = (0..d).map(|k| ((mask >> k) & 1) as f64).collect();
            c.push(&p);
        }
        c
    }

    fn standard_simplex(d: usize) -> Vec<Vec<f64>> {
        let mut vs = vec![vec![0.0; d]];
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            vs.push(e);
        }
        vs
    }

    #[test]
    fn cube_volume_and_surface() {
        let p = convex_hull(&unit_cube(3)).unwrap();
        assert_eq!(p.vertices().len(), 8);
        assert!((p.volume() - 1.0).abs() < 1e-12);
        assert!((p.surface_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn square_perimeter() {
        let p = convex_hull(&unit_cube(2)).unwrap();
        assert!((p.surface_area() - 4.0).abs() < 1e-12);
        assert!((p.surface_area() / 2.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn right_triangle_perimeter() {
        let cloud = PointCloud::from_points(2, &standard_simplex(2)).unwrap();
        let p = convex_hull(&cloud).unwrap();
        assert!((p.surface_area() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn standard_simplex_volumes() {
        for d in 1..=6 {
            let vs = standard_simplex(d);
            let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
            let expected = 1.0 / linalg::factorial(d);
            assert!((simplex_volume(&refs) - expected).abs() < 1e-14 * expected.max(1.0));
        }
        let vs = standard_simplex(3);
        let p = convex_hull(&PointCloud::from_points(3, &vs).unwrap()).unwrap();
        assert!((p.volume() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn repeated_vertex_has_zero_volume() {
        let a = [0.0, 0.0];
        let b = [1.0, 0.0];
        assert_eq!(simplex_volume(&[&a, &b, &b]), 0.0);
    }

    #[test]
    fn support_values() {
        let cube = unit_cube(3);
        assert_eq!(support_value(&cube, &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let u = 1.0 / 3f64.sqrt();
        assert!((support_value(&cube, &[u, u, u]).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        let single = PointCloud::from_points(2, &[[0.3, -0.7]]).unwrap();
        let dir = [0.6, 0.8];
        assert_eq!(support_value(&single, &dir).unwrap(), 0.3 * 0.6 - 0.7 * 0.8);
        assert_eq!(
            support_value(&PointCloud::new(2), &dir),
            Err(Error::EmptyCloud)
        );
    }

    #[test]
    fn cube_membership() {
        let p = convex_hull(&unit_cube(3)).unwrap();
        assert!(contains_point(&p, &[0.5, 0.5, 0.5]));
        assert!(!contains_point(&p, &[1.5, 0.0, 0.0]));
        assert!(contains_point(&p, &[1.0, 0.5, 0.5]));
        assert!(contains_point(&p, &[1.0 + 0.5e-9, 0.5, 0.5]));
    }

    #[test]
    fn halfspace_list_membership() {
        let hs = vec![
            HalfSpace::new(&[1.0, 0.0], 1.0).unwrap(),
            HalfSpace::new(&[0.0, 2.0], 2.0).unwrap(),
        ];
        assert!((hs[1].offset() - 1.0).abs() < 1e-15);
        assert!(contains_point(hs.as_slice(), &[1.0, 1.0]));
        assert!(!contains_point(hs.as_slice(), &[1.1, 0.0]));
        assert!(HalfSpace::new(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn simplex_barycentric_and_membership() {
        let s = Simplex::new(standard_simplex(2)).unwrap();
        let b = s.barycentric(&[0.25, 0.25]).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-15 && (b[1] - 0.25).abs() < 1e-15);
        assert!(s.contains(&[0.25, 0.25]));
        assert!(!s.contains(&[0.75, 0.75]));
        assert!(Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }

    #[test]
    fn homothety_scales_volume() {
        let s = Simplex::new(standard_simplex(3)).unwrap();
        let h = s.homothety(s.vertex(2), 0.1).unwrap();
        assert!((h.volume() - 1e-3 * s.volume()).abs() < 1e-15);
    }
}
