//! Linear subspaces with orthonormal bases, Haar sampling on `G(d, l)`,
//! projections, angles and circular cones.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::linalg::{self, dot, norm};
use crate::stats::Estimate;

/// An `l`-dimensional linear subspace of `R^d` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    dim_ambient: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// Accepts a basis that is orthonormal to within `1e-10`.
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = basis.first().map(Vec::len).unwrap_or(0);
        if d == 0 || basis.len() > d {
            return Err(Error::InvalidDimension(format!(
                "{} basis vectors in R^{d}",
                basis.len()
            )));
        }
        for (i, a) in basis.iter().enumerate() {
            if a.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: a.len(),
                });
            }
            for (j, b) in basis.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(a, b) - target).abs() > 1e-10 {
                    return Err(Error::DegenerateInput("basis is not orthonormal".into()));
                }
            }
        }
        Ok(Subspace {
            dim_ambient: d,
            basis,
        })
    }

    /// Orthonormalizes the given spanning vectors, which must be independent.
    pub fn span(vectors: &[Vec<f64>]) -> Result<Self> {
        let (basis, content) = linalg::gram_schmidt(vectors, 1e-12);
        if content == 0.0 || basis.is_empty() {
            return Err(Error::DegenerateInput("spanning vectors are dependent".into()));
        }
        Subspace::new(basis)
    }

    /// `span(e_{axes[0]}, ...)`.
    pub fn coordinate(d: usize, axes: &[usize]) -> Result<Self> {
        if axes.iter().any(|&a| a >= d) {
            return Err(Error::InvalidDimension(format!("axis out of range for R^{d}")));
        }
        Subspace::new(
            axes.iter()
                .map(|&a| {
                    let mut e = vec![0.0; d];
                    e[a] = 1.0;
                    e
                })
                .collect(),
        )
    }

    pub fn whole(d: usize) -> Self {
        Subspace::coordinate(d, &(0..d).collect::<Vec<_>>()).expect("valid axes")
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Coordinates `<x, b_k>` of the projection in the subspace basis.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| dot(b, x)).collect()
    }

    /// `|P_L x|`
    pub fn projection_norm(&self, x: &[f64]) -> f64 {
        self.basis.iter().map(|b| dot(b, x).powi(2)).sum::<f64>().sqrt()
    }

    /// The projection as a vector of `R^d`.
    pub fn project_ambient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_ambient];
        for b in &self.basis {
            let c = dot(b, x);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        out
    }

    /// Image under an orthogonal map given by its rows.
    pub fn rotated(&self, rows: &[Vec<f64>]) -> Subspace {
        Subspace {
            dim_ambient: self.dim_ambient,
            basis: self
                .basis
                .iter()
                .map(|b| rows.iter().map(|r| dot(r, b)).collect())
                .collect(),
        }
    }
}

/// Haar-distributed element of `G(d, l)`: Gram–Schmidt on `l` Gaussian
/// vectors, each basis vector signed so its first nonzero entry is positive.
/// For `l = d` the standard basis is returned (the Grassmannian is a point).
pub fn sample_subspace<R: Rng + ?Sized>(d: usize, ell: usize, rng: &mut R) -> Result<Subspace> {
    if d == 0 || ell == 0 || ell > d {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= l <= d, got l = {ell}, d = {d}"
        )));
    }
    if ell == d {
        return Ok(Subspace::whole(d));
    }
    loop {
        let vectors: Vec<Vec<f64>> = (0..ell)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let (mut basis, content) = linalg::gram_schmidt(&vectors, 1e-10);
        if content == 0.0 {
            continue;
        }
        for b in basis.iter_mut() {
            if let Some(&first) = b.iter().find(|x| **x != 0.0) {
                if first < 0.0 {
                    b.iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        return Ok(Subspace {
            dim_ambient: d,
            basis,
        });
    }
}

pub fn sample_subspaces<R: Rng + ?Sized>(
    d: usize,
    ell: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Subspace>> {
    (0..count).map(|_| sample_subspace(d, ell, rng)).collect()
}

pub fn project_cloud(cloud: &PointCloud, l: &Subspace) -> Result<PointCloud> {
    if cloud.dim() != l.dim_ambient() {
        return Err(Error::DimensionMismatch {
            expected: l.dim_ambient(),
            found: cloud.dim(),
        });
    }
    let mut out = PointCloud::with_capacity(l.dim(), cloud.len());
    let mut buf = vec![0.0; l.dim()];
    for x in cloud.iter() {
        for (o, b) in buf.iter_mut().zip(l.basis()) {
            *o = dot(b, x);
        }
        out.push(&buf);
    }
    Ok(out)
}

/// Smallest angle between `z` and a vector of `l`, in `[0, pi/2]`.
pub fn angle_to_subspace(z: &[f64], l: &Subspace) -> Result<f64> {
    if z.len() != l.dim_ambient() {
        return Err(Error::DimensionMismatch {
            expected: l.dim_ambient(),
            found: z.len(),
        });
    }
    let len = norm(z);
    if !(len > 0.0) {
        return Err(Error::ZeroVector);
    }
    let inside = l.projection_norm(z);
    let mut r = z.to_vec();
    let outside = linalg::orthogonalize(&mut r, l.basis());
    Ok(outside.atan2(inside))
}

/// `{apex + v : angle(v, axis) <= half_angle}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularCone {
    apex: Vec<f64>,
    axis: Vec<f64>,
    half_angle: f64,
}

impl CircularCone {
    /// Normalizes `axis`; `half_angle` must lie in `[0, pi/2]`.
    pub fn new(apex: Vec<f64>, axis: &[f64], half_angle: f64) -> Result<Self> {
        if apex.len() != axis.len() {
            return Err(Error::DimensionMismatch {
                expected: apex.len(),
                found: axis.len(),
            });
        }
        if !(0.0..=FRAC_PI_2).contains(&half_angle) {
            return Err(Error::InvalidAngle(half_angle));
        }
        let axis = linalg::normalized(axis).ok_or(Error::ZeroVector)?;
        Ok(CircularCone {
            apex,
            axis,
            half_angle,
        })
    }

    pub fn apex(&self) -> &[f64] {
        &self.apex
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    pub fn dim(&self) -> usize {
        self.axis.len()
    }

    /// Same cone with apex `apex`.
    pub fn translated(&self, apex: Vec<f64>) -> CircularCone {
        CircularCone {
            apex,
            axis: self.axis.clone(),
            half_angle: self.half_angle,
        }
    }

    /// Whether the direction `v` (apex at the origin) lies in the cone. The
    /// zero vector does.
    pub fn contains_direction(&self, v: &[f64]) -> bool {
        let len = norm(v);
        if len == 0.0 {
            return true;
        }
        let c = dot(v, &self.axis);
        let mut r = v.to_vec();
        let perp = linalg::orthogonalize(&mut r, std::slice::from_ref(&self.axis));
        perp.atan2(c) <= self.half_angle + 1e-12
    }

    /// Affine membership of `x` in `apex + cone`.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.contains_direction(&linalg::sub(x, &self.apex))
    }
}

/// `L` contains a nonzero vector of the cone of directions.
pub fn subspace_meets_cone(l: &Subspace, cone: &CircularCone) -> bool {
    match angle_to_subspace(cone.axis(), l) {
        Ok(angle) => angle <= cone.half_angle(),
        Err(_) => false,
    }
}

fn check_angle(a: f64) -> Result<()> {
    if a > 0.0 && a < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidAngle(a))
    }
}

/// Fraction of `samples` Haar subspaces within angle `a` of the unit vector `z`.
pub fn cap_measure_estimate<R: Rng + ?Sized>(
    z: &[f64],
    a: f64,
    d: usize,
    ell: usize,
    samples: u64,
    rng: &mut R,
) -> Result<Estimate> {
    Ok(cap_measure_profile(z, &[a], d, ell, samples, rng)?[0])
}

/// Cap fractions for several thresholds on one shared subspace sample, so
/// that the estimates are nondecreasing in `a`.
pub fn cap_measure_profile<R: Rng + ?Sized>(
    z: &[f64],
    angles: &[f64],
    d: usize,
    ell: usize,
    samples: u64,
    rng: &mut R,
) -> Result<Vec<Estimate>> {
    for &a in angles {
        check_angle(a)?;
    }
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: z.len(),
        });
    }
    if samples == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let z = linalg::normalized(z).ok_or(Error::ZeroVector)?;
    if ell == d {
        // Every subspace is R^d, so the angle is always 0.
        let _ = sample_subspace(d, ell, rng)?;
        return Ok(angles.iter().map(|_| Estimate::proportion(samples, samples)).collect());
    }
    // angle <= a  <=>  |P_L z|^2 >= cos^2 a
    let thresholds: Vec<f64> = angles.iter().map(|a| a.cos().powi(2)).collect();
    let mut hits = vec![0u64; angles.len()];
    for _ in 0..samples {
        let l = sample_subspace(d, ell, rng)?;
        let p2 = l.basis().iter().map(|b| dot(b, &z).powi(2)).sum::<f64>();
        for (h, t) in hits.iter_mut().zip(&thresholds) {
            if p2 >= *t {
                *h += 1;
            }
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| Estimate::proportion(h, samples))
        .collect())
}

/// Exact Haar measure of `{L : angle(z, L) <= a}`. `|P_L z|^2` is
/// Beta(l/2, (d-l)/2) distributed for a fixed unit `z`.
pub fn cap_measure_exact(d: usize, ell: usize, a: f64) -> Result<f64> {
    check_angle(a)?;
    if ell == 0 || ell > d {
        return Err(Error::InvalidDimension(format!("l = {ell}, d = {d}")));
    }
    if ell == d {
        return Ok(1.0);
    }
    let c2 = a.cos().powi(2);
    Ok(1.0 - beta_reg(ell as f64 / 2.0, (d - ell) as f64 / 2.0, c2))
}
