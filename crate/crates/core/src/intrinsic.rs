//! Intrinsic volumes of hulls of point clouds.
//!
//! `V_d` and `V_{d-1}` are computed exactly from the hull; any `V_l` can be
//! estimated through Kubota's formula
//! `V_l(K) = binom(d, l) kappa_d / (kappa_l kappa_{d-l}) * E_L[vol_l(K | L)]`
//! with `L` Haar on `G(d, l)`, and `V_1` also through the mean support value.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{self, convex_hull, planar_hull, polygon_area, polygon_perimeter, PointCloud};
use crate::grassmann::{project_cloud, sample_subspaces, subspace_meets_cone, CircularCone, Subspace};
use crate::linalg::{self, dot};
use crate::sampling::uniform_direction;
use crate::stats::SummaryStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ExactVolume,
    ExactSurface,
    KubotaMc,
    SupportMc,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::ExactVolume => "exact-volume",
            Method::ExactSurface => "exact-surface",
            Method::KubotaMc => "kubota-mc",
            Method::SupportMc => "support-mc",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Method::ExactVolume | Method::ExactSurface)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvEstimate {
    pub ell: usize,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: Method,
}

/// Volume of the unit ball in `R^j`.
pub fn kappa(j: usize) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / j as f64 * kappa(j - 2),
    }
}

/// `binom(d, l) kappa_d / (kappa_l kappa_{d-l})`
pub fn kubota_prefactor(d: usize, ell: usize) -> f64 {
    assert!(ell <= d, "need l <= d");
    linalg::binomial(d, ell) * kappa(d) / (kappa(ell) * kappa(d - ell))
}

fn range_1d(cloud: &PointCloud) -> f64 {
    let (lo, hi) = cloud
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[0]), hi.max(p[0]))
        });
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

/// Lebesgue measure of the hull of a cloud in its own dimension; 0 when the
/// hull is not full-dimensional.
pub fn projected_volume(cloud: &PointCloud) -> f64 {
    match cloud.dim() {
        1 => range_1d(cloud),
        2 => polygon_area(&planar_hull(&geom::as_pairs(cloud))),
        _ => convex_hull(cloud).map(|p| p.volume()).unwrap_or(0.0),
    }
}

/// Vertices of the hull (all extreme points), for any dimension.
pub fn hull_vertices(cloud: &PointCloud) -> Result<PointCloud> {
    match cloud.dim() {
        1 => {
            if cloud.is_empty() {
                return Err(Error::DegenerateInput("empty cloud".into()));
            }
            let (lo, hi) = cloud
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[0]), hi.max(p[0]))
                });
            if !(hi > lo) {
                return Err(Error::DegenerateInput("all points coincide".into()));
            }
            PointCloud::from_flat(1, vec![lo, hi])
        }
        2 => {
            let h = planar_hull(&geom::as_pairs(cloud));
            if h.len() < 3 {
                return Err(Error::DegenerateInput("planar cloud is collinear".into()));
            }
            PointCloud::from_points(2, &h)
        }
        _ => Ok(convex_hull(cloud)?.vertices().clone()),
    }
}

/// `(volume, surface area)` of the hull, computed from one hull construction.
pub fn exact_measures(cloud: &PointCloud) -> Result<(f64, f64)> {
    match cloud.dim() {
        1 => {
            let len = range_1d(cloud);
            if len > 0.0 {
                Ok((len, 2.0))
            } else {
                Err(Error::DegenerateInput("all points coincide".into()))
            }
        }
        2 => {
            let h = planar_hull(&geom::as_pairs(cloud));
            let area = polygon_area(&h);
            if h.len() < 3 || !(area > 0.0) {
                return Err(Error::DegenerateInput("planar cloud is collinear".into()));
            }
            Ok((area, polygon_perimeter(&h)))
        }
        _ => {
            let p = convex_hull(cloud)?;
            Ok((p.volume(), p.surface_area()))
        }
    }
}

pub fn hull_volume(cloud: &PointCloud) -> Result<f64> {
    Ok(exact_measures(cloud)?.0)
}

fn check_ell(d: usize, ell: usize) -> Result<()> {
    if ell == 0 || ell > d {
        Err(Error::InvalidDimension(format!(
            "need 1 <= l <= d, got l = {ell}, d = {d}"
        )))
    } else {
        Ok(())
    }
}

fn mismatch(method: Method, ell: usize, dim: usize) -> Error {
    Error::MethodMismatch {
        method: method.tag(),
        ell,
        dim,
    }
}

/// Estimator chosen for `l` in dimension `d`: exact when available.
pub fn default_method(d: usize, ell: usize) -> Method {
    if ell == d {
        Method::ExactVolume
    } else if ell + 1 == d {
        Method::ExactSurface
    } else {
        Method::KubotaMc
    }
}

/// `V_l` of the hull of `cloud`. `n_samples` is the number of subspaces
/// (kubota-mc) or directions (support-mc) and is ignored by exact methods.
pub fn intrinsic_volume<R: Rng + ?Sized>(
    cloud: &PointCloud,
    ell: usize,
    method: Method,
    n_samples: usize,
    rng: &mut R,
) -> Result<IvEstimate> {
    let d = cloud.dim();
    check_ell(d, ell)?;
    match method {
        Method::ExactVolume => {
            if ell != d {
                return Err(mismatch(method, ell, d));
            }
            let (vol, _) = exact_measures(cloud)?;
            Ok(exact(ell, vol, method))
        }
        Method::ExactSurface => {
            if ell + 1 != d {
                return Err(mismatch(method, ell, d));
            }
            let (_, area) = exact_measures(cloud)?;
            Ok(exact(ell, area / 2.0, method))
        }
        Method::KubotaMc => {
            let subspaces = sample_subspaces(d, ell, n_samples.max(1), rng)?;
            kubota_estimate(cloud, ell, &subspaces)
        }
        Method::SupportMc => {
            if ell != 1 {
                return Err(mismatch(method, ell, d));
            }
            v1_support_estimate(cloud, n_samples, rng)
        }
    }
}

fn exact(ell: usize, value: f64, method: Method) -> IvEstimate {
    IvEstimate {
        ell,
        value,
        std_error: 0.0,
        n_samples: 1,
        method,
    }
}

/// `vol_l(hull(cloud) | L)` for each subspace, without the prefactor.
pub fn kubota_terms(vertices: &PointCloud, subspaces: &[Subspace]) -> Result<Vec<f64>> {
    subspaces
        .iter()
        .map(|l| Ok(projected_volume(&project_cloud(vertices, l)?)))
        .collect()
}

/// Kubota estimate of `V_l` on an explicit subspace sample, so that several
/// clouds can share common random numbers.
pub fn kubota_estimate(cloud: &PointCloud, ell: usize, subspaces: &[Subspace]) -> Result<IvEstimate> {
    let d = cloud.dim();
    check_ell(d, ell)?;
    if subspaces.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some(l) = subspaces.iter().find(|l| l.dim() != ell || l.dim_ambient() != d) {
        return Err(Error::DimensionMismatch {
            expected: ell,
            found: l.dim(),
        });
    }
    let vertices = hull_vertices(cloud)?;
    let terms = kubota_terms(&vertices, subspaces)?;
    let s = SummaryStats::from_slice(&terms);
    let c = kubota_prefactor(d, ell);
    let se = if terms.len() > 1 { s.std_error() } else { 0.0 };
    Ok(IvEstimate {
        ell,
        value: c * s.mean(),
        std_error: c * se,
        n_samples: terms.len() as u64,
        method: Method::KubotaMc,
    })
}

/// `V_1 = d kappa_d / kappa_{d-1} * E[h(u)]`, averaged over antithetic
/// direction pairs `(h(u) + h(-u)) / 2`.
pub fn v1_support_estimate<R: Rng + ?Sized>(
    cloud: &PointCloud,
    n_directions: usize,
    rng: &mut R,
) -> Result<IvEstimate> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if n_directions == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let d = cloud.dim();
    let points = hull_vertices(cloud).unwrap_or_else(|_| cloud.clone());
    let mut acc = SummaryStats::new();
    for _ in 0..n_directions {
        let u = uniform_direction(d, rng);
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for p in points.iter() {
            let s = dot(p, &u);
            hi = hi.max(s);
            lo = lo.min(s);
        }
        // h(u) + h(-u) = max <x,u> - min <x,u>
        acc.accumulate((hi - lo) / 2.0);
    }
    let c = d as f64 * kappa(d) / kappa(d - 1);
    let se = if n_directions > 1 { acc.std_error() } else { 0.0 };
    Ok(IvEstimate {
        ell: 1,
        value: c * acc.mean(),
        std_error: c * se,
        n_samples: n_directions as u64,
        method: Method::SupportMc,
    })
}

/// Per-subspace terms `1{L meets cone} * vol_l([z, F] | L)` of the localized
/// functional, without the prefactor.
pub fn local_functional_terms(
    z: &[f64],
    f: &PointCloud,
    cone: &CircularCone,
    subspaces: &[Subspace],
) -> Result<Vec<f64>> {
    let d = f.dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: z.len(),
        });
    }
    if cone.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: cone.dim(),
        });
    }
    let mut pts = f.clone();
    pts.push(z);
    subspaces
        .iter()
        .map(|l| {
            if l.dim_ambient() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: l.dim_ambient(),
                });
            }
            if !subspace_meets_cone(l, cone) {
                return Ok(0.0);
            }
            Ok(projected_volume(&project_cloud(&pts, l)?))
        })
        .collect()
}

/// The localized functional: Kubota prefactor times the mean over the given
/// subspaces of `1{L meets cone} * vol_l([z, F] | L)`.
pub fn local_functional(
    z: &[f64],
    f: &PointCloud,
    cone: &CircularCone,
    ell: usize,
    subspaces: &[Subspace],
) -> Result<f64> {
    let d = f.dim();
    check_ell(d, ell)?;
    if subspaces.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some(l) = subspaces.iter().find(|l| l.dim() != ell) {
        return Err(Error::DimensionMismatch {
            expected: ell,
            found: l.dim(),
        });
    }
    let terms = local_functional_terms(z, f, cone, subspaces)?;
    Ok(kubota_prefactor(d, ell) * terms.iter().sum::<f64>() / terms.len() as f64)
}
