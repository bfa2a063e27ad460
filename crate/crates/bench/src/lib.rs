//! Shared fixtures for the benchmarks.

use gplab_core::construction::{Scaffold, DEFAULT_C1, DEFAULT_C2};
use gplab_core::grassmann::{sample_subspaces, Subspace};
use gplab_core::sampling::{gaussian_cloud, RandomStream};
use gplab_core::PointCloud;

pub const SEED: u64 = 7;

pub fn cloud(n: usize, d: usize) -> PointCloud {
    gaussian_cloud(n, d, &mut RandomStream::new(SEED, (n as u64) << 4 | d as u64))
}

pub fn subspaces(d: usize, ell: usize, k: usize) -> Vec<Subspace> {
    sample_subspaces(d, ell, k, &mut RandomStream::new(SEED, 1 << 40)).expect("valid dimensions")
}

pub fn scaffold(n: u64, d: usize) -> Scaffold {
    Scaffold::build(n, d, DEFAULT_C1, DEFAULT_C2, &mut RandomStream::new(SEED, 2 << 40)).expect("defaults build")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_reproducible() {
        assert_eq!(cloud(100, 3).coords(), cloud(100, 3).coords());
        assert_eq!(subspaces(3, 1, 5)[0].basis(), subspaces(3, 1, 5)[0].basis());
        assert_eq!(scaffold(10_000, 2).m(), scaffold(10_000, 2).m());
    }
}
