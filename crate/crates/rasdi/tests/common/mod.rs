//! Random sparse linear DAEs with two-way overlapping partitions.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rasdi::dae::{CombinedSystem, Forcing};
use rasdi::partition::{grow_overlap, AdjacencyGraph, OverlapPartition};
use rasdi::{DMatrix, DVector};

pub struct RandomCase {
    pub sys: CombinedSystem,
    pub part: OverlapPartition,
    pub dt: f64,
}

/// Sparse system on a connected random graph; differential rows first.
/// Rows are only weakly diagonally dominant so the splitting is not trivial.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize) -> CombinedSystem {
    let n1 = rng.gen_range(1..n);
    let mut a = DMatrix::zeros(n, n);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..n {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v {
            edges.push((u, v));
        }
    }
    for (u, v) in edges {
        a[(u, v)] = rng.gen_range(-1.0..1.0);
        a[(v, u)] = rng.gen_range(-1.0..1.0);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| f64::abs(a[(i, j)])).sum();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        a[(i, i)] = sign * (rng.gen_range(0.2..1.2) * off + 0.05);
    }
    let amp = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let freq = DVector::from_fn(n, |_, _| rng.gen_range(1.0..20.0));
    let forcing: Forcing = Arc::new(move |t| amp.zip_map(&freq, |a, f| a * (f * t).sin()));
    CombinedSystem {
        big_a: a,
        diff_mask: (0..n).map(|i| i < n1).collect(),
        forcing,
        x0: DVector::from_fn(n1, |_, _| rng.gen_range(-1.0..1.0)),
    }
}

/// Two random nonempty base sets grown by 0..=2 rings.
pub fn random_partition(rng: &mut ChaCha8Rng, sys: &CombinedSystem) -> Option<OverlapPartition> {
    let n = sys.n();
    let mut first: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    if first.is_empty() || first.len() == n {
        first = (0..n / 2).collect();
    }
    let second: Vec<usize> = (0..n).filter(|v| !first.contains(v)).collect();
    let graph = AdjacencyGraph::from_matrix(&sys.big_a);
    let p = rng.gen_range(0..=2);
    let part = grow_overlap(&graph, &[first, second], p, &sys.diff_mask).ok()?;
    (0..2).all(|i| !part.swallows_all(i)).then_some(part)
}

/// A seeded case whose step matrix and local blocks are all invertible,
/// whose interface is nonempty, and whose interface operator has spectral
/// radius in `[0.5, 2]` so errors stay well above roundoff for several sweeps.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(4..=20);
        let sys = random_system(&mut rng, n);
        let dt = rng.gen_range(1e-3..1e-1);
        let Some(part) = random_partition(&mut rng, &sys) else {
            continue;
        };
        if rasdi::dae::Stepper::new(&sys, dt).is_err() {
            continue;
        }
        let Ok((p, _)) = rasdi::aitken::operator_at(&sys, &part, dt) else {
            continue;
        };
        if !(0.5..=2.0).contains(&p.spectral_radius) {
            continue;
        }
        return RandomCase { sys, part, dt };
    }
}

pub fn random_vector(seed: u64, n: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}
