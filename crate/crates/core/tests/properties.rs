use gplab_core::experiments::ExperimentConfig;
use gplab_core::format::fmt_g17;
use gplab_core::geom::{convex_hull, PointCloud, Region, Simplex};
use gplab_core::grassmann::{cap_measure_profile, project_cloud, sample_subspaces};
use gplab_core::intrinsic::{exact_measures, intrinsic_volume, kubota_estimate, kubota_terms, Method};
use gplab_core::sampling::{estimate_gaussian_measure, gaussian_cloud, gaussian_restricted, RandomStream};
use gplab_core::stats::SummaryStats;
use gplab_core::Model;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cloud_strategy(d: std::ops::RangeInclusive<usize>, n: std::ops::Range<usize>) -> impl Strategy<Value = PointCloud> {
    (d, n).prop_flat_map(|(d, n)| {
        proptest::collection::vec(-10.0f64..10.0, n * d).prop_map(move |c| PointCloud::from_flat(d, c).unwrap())
    })
}

fn sorted_vertices(cloud: &PointCloud) -> Vec<Vec<f64>> {
    let mut v = convex_hull(cloud).unwrap().vertices().to_vecs();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `p` lies in the simplex spanned by `pts` (d + 1 points in R^d).
fn in_simplex(p: &[f64], pts: &[&[f64]]) -> bool {
    let d = p.len();
    let m = DMatrix::from_fn(d + 1, d + 1, |i, j| if i == d { 1.0 } else { pts[j][i] });
    let rhs = DVector::from_fn(d + 1, |i, _| if i == d { 1.0 } else { p[i] });
    match m.lu().solve(&rhs) {
        Some(l) => l.iter().all(|&x| x >= -1e-12),
        None => false,
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Orthogonal matrix from the QR factorization of `entries` (d x d, row-major).
fn rotation(d: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, entries).qr().q()
}

fn moved(cloud: &PointCloud, q: &DMatrix<f64>, shift: &[f64]) -> PointCloud {
    let d = cloud.dim();
    let mut out = PointCloud::new(d);
    for p in cloud.iter() {
        let x = q * DVector::from_column_slice(p);
        let y: Vec<f64> = (0..d).map(|i| x[i] + shift[i]).collect();
        out.push(&y);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hull_is_idempotent(cloud in cloud_strategy(2..=4, 8..40)) {
        let first = convex_hull(&cloud).unwrap();
        let again = convex_hull(first.vertices()).unwrap();
        prop_assert_eq!(sorted_vertices(first.vertices()), sorted_vertices(again.vertices()));
        prop_assert!(rel(again.volume(), first.volume()) < 1e-12);
    }

    #[test]
    fn adding_a_point_never_shrinks(cloud in cloud_strategy(2..=4, 8..30), extra in proptest::collection::vec(-15.0f64..15.0, 4)) {
        let d = cloud.dim();
        let before = convex_hull(&cloud).unwrap();
        let mut bigger = cloud.clone();
        bigger.push(&extra[..d]);
        let after = convex_hull(&bigger).unwrap();
        prop_assert!(after.volume() >= before.volume() * (1.0 - 1e-12));
        prop_assert!(after.surface_area() >= before.surface_area() * (1.0 - 1e-12));
    }

    #[test]
    fn volume_and_surface_are_homogeneous(cloud in cloud_strategy(2..=4, 8..30), k in 0usize..3) {
        let c = [0.5, 2.0, 3.0][k];
        let d = cloud.dim() as i32;
        let p = convex_hull(&cloud).unwrap();
        let q = convex_hull(&cloud.scaled(c)).unwrap();
        prop_assert!(rel(q.volume(), c.powi(d) * p.volume()) <= 1e-9);
        prop_assert!(rel(q.surface_area(), c.powi(d - 1) * p.surface_area()) <= 1e-9);
    }

    #[test]
    fn rigid_motions_preserve_measures(
        cloud in cloud_strategy(2..=4, 8..30),
        entries in proptest::collection::vec(-1.0f64..1.0, 16),
        shift in proptest::collection::vec(-50.0f64..50.0, 4),
    ) {
        let d = cloud.dim();
        let q = rotation(d, &entries[..d * d]);
        let (v0, s0) = exact_measures(&cloud).unwrap();
        let (v1, s1) = exact_measures(&moved(&cloud, &q, &shift[..d])).unwrap();
        prop_assert!(rel(v1, v0) <= 1e-8);
        prop_assert!(rel(s1, s0) <= 1e-8);
    }

    /// A point is a vertex exactly when no d + 1 of the other points contain it.
    #[test]
    fn vertices_match_caratheodory_brute_force(cloud in cloud_strategy(2..=3, 5..13)) {
        let d = cloud.dim();
        let n = cloud.len();
        let pts: Vec<&[f64]> = cloud.iter().collect();
        let mut expected: Vec<usize> = (0..n)
            .filter(|&i| {
                let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                !combinations(others.len(), d + 1).iter().any(|c| {
                    let s: Vec<&[f64]> = c.iter().map(|&k| pts[others[k]]).collect();
                    in_simplex(pts[i], &s)
                })
            })
            .collect();
        expected.sort_unstable();
        let mut found = convex_hull(&cloud).unwrap().source_indices().to_vec();
        found.sort_unstable();
        prop_assert_eq!(found, expected);
    }

    #[test]
    fn kubota_at_full_degree_is_the_volume(cloud in cloud_strategy(2..=4, 6..40), seed in any::<u64>()) {
        let d = cloud.dim();
        let mut rng = RandomStream::new(seed, 0);
        let exact = intrinsic_volume(&cloud, d, Method::ExactVolume, 0, &mut rng).unwrap().value;
        let mc = intrinsic_volume(&cloud, d, Method::KubotaMc, 8, &mut rng).unwrap().value;
        prop_assert!(rel(mc, exact) <= 1e-10);
    }

    #[test]
    fn kubota_scales_exactly_on_shared_subspaces(cloud in cloud_strategy(3..=4, 8..30), k in 0usize..3, seed in any::<u64>()) {
        let c = [0.5, 2.0, 3.0][k];
        let d = cloud.dim();
        let mut rng = RandomStream::new(seed, 1);
        for ell in 1..d {
            let subs = sample_subspaces(d, ell, 50, &mut rng).unwrap();
            let a = kubota_estimate(&cloud, ell, &subs).unwrap().value;
            let b = kubota_estimate(&cloud.scaled(c), ell, &subs).unwrap().value;
            prop_assert!(rel(b, c.powi(ell as i32) * a) <= 1e-12);
        }
    }

    #[test]
    fn exact_methods_are_homogeneous(cloud in cloud_strategy(2..=4, 8..30), k in 0usize..3) {
        let c = [0.5, 2.0, 3.0][k];
        let d = cloud.dim();
        let mut rng = RandomStream::new(0, 0);
        for (ell, m) in [(d, Method::ExactVolume), (d - 1, Method::ExactSurface)] {
            let a = intrinsic_volume(&cloud, ell, m, 0, &mut rng).unwrap().value;
            let b = intrinsic_volume(&cloud.scaled(c), ell, m, 0, &mut rng).unwrap().value;
            prop_assert!(rel(b, c.powi(ell as i32) * a) <= 1e-9);
        }
    }

    #[test]
    fn projections_are_monotone_under_inclusion(cloud in cloud_strategy(3..=4, 10..30), keep in 4usize..10, seed in any::<u64>()) {
        let d = cloud.dim();
        let part = PointCloud::from_points(d, &cloud.to_vecs()[..keep.max(d + 1)]).unwrap();
        let mut rng = RandomStream::new(seed, 2);
        for ell in 1..=d {
            let subs = sample_subspaces(d, ell, 30, &mut rng).unwrap();
            let small = kubota_terms(&part, &subs).unwrap();
            let large = kubota_terms(&cloud, &subs).unwrap();
            for (s, l) in small.iter().zip(&large) {
                prop_assert!(*s <= l * (1.0 + 1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn projection_contracts(x in proptest::collection::vec(-5.0f64..5.0, 4), ell in 1usize..=4, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 3);
        let l = &sample_subspaces(4, ell, 1, &mut rng).unwrap()[0];
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let p = l.projection_norm(&x);
        prop_assert!(p <= n * (1.0 + 1e-12));
        if ell == 4 {
            prop_assert!(rel(p, n) < 1e-12 || n == 0.0);
        }
        let cloud = PointCloud::from_points(4, std::slice::from_ref(&x)).unwrap();
        let projected = project_cloud(&cloud, l).unwrap();
        prop_assert_eq!(projected.dim(), ell);
    }

    #[test]
    fn cap_profile_is_monotone(d in 2usize..=5, seed in any::<u64>(), mut angles in proptest::collection::vec(0.01f64..1.5, 2..6)) {
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut rng = RandomStream::new(seed, 4);
        let mut z = vec![0.0; d];
        z[d - 1] = 1.0;
        for ell in 1..=d {
            let p = cap_measure_profile(&z, &angles, d, ell, 300, &mut rng).unwrap();
            prop_assert!(p.windows(2).all(|w| w[0].value <= w[1].value));
        }
    }

    #[test]
    fn summary_merge_is_associative_and_commutative(xs in proptest::collection::vec(-1e3f64..1e3, 3..200), cut1 in 0usize..200, cut2 in 0usize..200) {
        let (a, b) = (cut1.min(cut2).min(xs.len()), cut1.max(cut2).min(xs.len()));
        let s = |r: &[f64]| SummaryStats::from_slice(r);
        let (p, q, r) = (s(&xs[..a]), s(&xs[a..b]), s(&xs[b..]));
        let left = p.merge(&q).merge(&r);
        let right = p.merge(&q.merge(&r));
        let swapped = r.merge(&p).merge(&q);
        let whole = s(&xs);
        for m in [&left, &right, &swapped] {
            prop_assert_eq!(m.count(), whole.count());
            prop_assert!((m.mean() - whole.mean()).abs() <= 1e-12 * (1.0 + whole.mean().abs()));
            prop_assert!((m.m2() - whole.m2()).abs() <= 1e-10 * (1.0 + whole.m2()));
        }
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let a = gaussian_cloud(20, 3, &mut RandomStream::new(seed, stream));
        let b = gaussian_cloud(20, 3, &mut RandomStream::new(seed, stream));
        prop_assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn region_and_complement_measures_sum_to_one(w in proptest::collection::vec(-2.0f64..2.0, 3), b in -1.0f64..1.0, seed in any::<u64>()) {
        let inside = |x: &[f64]| x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() <= b;
        let p = estimate_gaussian_measure(inside, 3, 2000, &mut RandomStream::new(seed, 5));
        let q = estimate_gaussian_measure(|x: &[f64]| !inside(x), 3, 2000, &mut RandomStream::new(seed, 5));
        prop_assert_eq!(p.value + q.value, 1.0);
    }

    #[test]
    fn restricted_samples_stay_in_the_simplex(shift in proptest::collection::vec(-1.5f64..1.5, 2), seed in any::<u64>()) {
        let s = Simplex::new(vec![
            vec![shift[0], shift[1]],
            vec![shift[0] + 0.7, shift[1]],
            vec![shift[0], shift[1] + 0.5],
        ]).unwrap();
        let mut rng = RandomStream::new(seed, 6);
        for _ in 0..20 {
            let x = gaussian_restricted(&s, &mut rng).unwrap();
            prop_assert!(s.contains(&x));
        }
    }

    #[test]
    fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn config_text_round_trips(
        dim in 1usize..6,
        reps in 1usize..100_000,
        grid in proptest::collection::vec(10u64..10_000_000, 1..6),
        c1 in 0.5f64..10.0,
        c2 in 0.01f64..0.49,
        seed in any::<u64>(),
        poisson in any::<bool>(),
    ) {
        let c = ExperimentConfig {
            dim,
            ell: dim,
            n_grid: grid,
            reps,
            model: if poisson { Model::Poisson } else { Model::Binomial },
            c1,
            c2,
            seed,
            ..Default::default()
        };
        prop_assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }
}
