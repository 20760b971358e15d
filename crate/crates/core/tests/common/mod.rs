//! Oracles and seeded property loops shared by the property and acceptance
//! targets. Each `check_*` walks a seed range and reports the first
//! violation with its seed.

#![allow(dead_code)]

use std::ops::Range;

use mdsc::de::Evolver;
use mdsc::threshold::scalar_de_step;
use mdsc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = std::result::Result<usize, String>;

/// Naive `O(w^D)` window average, one offset tuple at a time.
pub fn naive_box(field: &ScalarField, w: usize, dir: Direction) -> ScalarField {
    let shape = field.shape();
    let offsets = GridShape::new(shape.dim(), w).unwrap();
    let sign = match dir {
        Direction::Forward => 1,
        Direction::Backward => -1,
    };
    ScalarField::from_fn(shape, |i| {
        let mut acc = 0.0;
        for j in offsets.indices() {
            let raw: Vec<i64> = i
                .coords()
                .iter()
                .zip(j.coords())
                .map(|(&a, &b)| a as i64 + sign * b as i64)
                .collect();
            acc += field.get(&wrap(&raw, shape).unwrap());
        }
        acc / (w.pow(shape.dim() as u32)) as f64
    })
}

pub fn random_field(shape: GridShape, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_fn(shape, |_| rng.gen::<f64>())
}

/// Random ensemble, channel field and domain.
pub fn random_setup(rng: &mut ChaCha8Rng) -> (EnsembleParams, ScalarField, ShorteningDomain) {
    let dim = rng.gen_range(1..=2);
    let w = rng.gen_range(1..=3);
    let len = rng.gen_range(w + 2..=if dim == 1 { 24 } else { 10 });
    let (dl, dr) = [(3, 6), (4, 8), (3, 5)][rng.gen_range(0..3)];
    let params = EnsembleParams::new(dl, dr, len, dim, w).unwrap();
    let shape = params.shape();
    let eps = ScalarField::from_fn(shape, |_| rng.gen_range(0.2..0.7));
    let domain = match rng.gen_range(0..3) {
        0 => ShorteningDomain::Empty,
        1 => ShorteningDomain::Hyperplane { axis: dim - 1, width: rng.gen_range(1..len) },
        _ => ShorteningDomain::Hypercube { z: rng.gen_range(1..len) },
    };
    (params, eps, domain)
}

/// Separable box sum against [`naive_box`] for every `(D, L, w)` with
/// `D <= 3`, `3 <= L <= 8`, `1 <= w <= L`, both directions.
pub fn check_separable_vs_naive(seed: u64, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for dim in 1..=3 {
        for len in 3..=8 {
            let shape = GridShape::new(dim, len).unwrap();
            for w in 1..=len {
                let f = random_field(shape, &mut rng);
                for dir in [Direction::Forward, Direction::Backward] {
                    let fast = box_window_sum(&f, w, dir).unwrap();
                    let dev = fast.max_abs_diff(&naive_box(&f, w, dir));
                    if dev > tol {
                        return Err(format!("seed {seed}, D={dim} L={len} w={w} {dir:?}: {dev:e}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// `p^(l) <= p^(l-1)` pointwise and `P_b` non-increasing.
pub fn check_monotone_in_iterations(seeds: Range<u64>, iters: usize) -> Check {
    let n = seeds.end - seeds.start;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, eps, domain) = random_setup(&mut rng);
        let mut ev = Evolver::from_eps_field(&params, &eps, &domain).unwrap();
        let mut prev = ev.p_values().to_vec();
        let mut prev_pb = ev.pb();
        for _ in 0..iters {
            let stats = ev.step();
            if ev.p_values().iter().zip(&prev).any(|(a, b)| a > b) {
                return Err(format!("seed {seed}: p increased at iteration {}", stats.iter));
            }
            if stats.pb > prev_pb {
                return Err(format!("seed {seed}: P_b increased at iteration {}", stats.iter));
            }
            prev = ev.p_values().to_vec();
            prev_pb = stats.pb;
        }
    }
    Ok(n as usize)
}

/// A pointwise worse channel never gives a smaller `p`.
pub fn check_monotone_in_channel(seeds: Range<u64>, iters: usize) -> Check {
    let n = seeds.end - seeds.start;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, eps, domain) = random_setup(&mut rng);
        let worse = ScalarField::from_fn(params.shape(), |i| (eps.get(i) + rng.gen_range(0.0..0.3)).min(1.0));
        let mut a = Evolver::from_eps_field(&params, &eps, &domain).unwrap();
        let mut b = Evolver::from_eps_field(&params, &worse, &domain).unwrap();
        for _ in 0..iters {
            a.step();
            b.step();
            if a.p_values().iter().zip(b.p_values()).any(|(x, y)| x > y) {
                return Err(format!("seed {seed}: worse channel gave smaller p at iteration {}", a.iter()));
            }
        }
    }
    Ok(n as usize)
}

/// Translating `Z` and the bursts together translates every `p^(l)`.
pub fn check_translation_equivariance(seeds: Range<u64>, iters: usize) -> Check {
    let n = seeds.end - seeds.start;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, _, _) = random_setup(&mut rng);
        let shape = params.shape();
        let len = params.len as i64;
        let point = |rng: &mut ChaCha8Rng| -> Vec<i64> { (0..params.dim).map(|_| rng.gen_range(0..len)).collect() };
        let zset: Vec<Vec<i64>> = (0..rng.gen_range(1..4)).map(|_| point(&mut rng)).collect();
        let domain = ShorteningDomain::explicit(shape, &zset).unwrap();
        let bursts: Vec<TorusIndex> = (0..rng.gen_range(0..3))
            .map(|_| wrap(&point(&mut rng), shape).unwrap())
            .filter(|b| !domain.contains(b))
            .collect();
        let pattern = ErasurePattern::new(rng.gen_range(0.3..0.6), bursts, domain);
        let offset: Vec<i64> = (0..params.dim).map(|_| rng.gen_range(-len..len)).collect();
        let moved = pattern.translated(&offset, shape).unwrap();
        let mut a = Evolver::new(&params, &pattern).unwrap();
        let mut b = Evolver::new(&params, &moved).unwrap();
        for _ in 0..iters {
            a.step();
            b.step();
            if a.p_field().translated(&offset).unwrap() != b.p_field() {
                return Err(format!("seed {seed}: translated run differs at iteration {}", a.iter()));
            }
        }
    }
    Ok(n as usize)
}

/// With `w = 1` every section follows the scalar recursion at its own `eps`.
pub fn check_unit_window_scalar(seeds: Range<u64>, iters: usize, tol: f64) -> Check {
    let n = seeds.end - seeds.start;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.gen_range(1..=2);
        let len = rng.gen_range(2..=12);
        let params = EnsembleParams::new(3, 6, len, dim, 1).unwrap();
        let eps = ScalarField::from_fn(params.shape(), |_| rng.gen_range(0.0..1.0));
        let mut ev = Evolver::from_eps_field(&params, &eps, &ShorteningDomain::Empty).unwrap();
        let mut x: Vec<f64> = eps.values().to_vec();
        for _ in 0..iters {
            ev.step();
            for (xi, &e) in x.iter_mut().zip(eps.values()) {
                *xi = scalar_de_step(3, 6, e, *xi);
            }
            let dev = ev
                .p_values()
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dev > tol {
                return Err(format!("seed {seed}: deviation {dev:e} at iteration {}", ev.iter()));
            }
        }
    }
    Ok(n as usize)
}

/// Largest `|p_burst - w^D x|` over `iters` rounds for a lone burst at
/// `eps = 0` elsewhere, `x` the scalar recursion at `1 / w^D`.
pub fn single_burst_deviation(dim: usize, w: usize, iters: usize) -> f64 {
    let params = EnsembleParams::new(3, 6, 4 * w, dim, w).unwrap();
    let shape = params.shape();
    let burst = wrap(&vec![w as i64; dim], shape).unwrap();
    let pattern = ErasurePattern::new(0.0, [burst.clone()], ShorteningDomain::Empty);
    let mut ev = Evolver::new(&params, &pattern).unwrap();
    let taps = (w as f64).powi(dim as i32);
    let mut x = 1.0 / taps;
    let mut worst: f64 = 0.0;
    for _ in 0..iters {
        ev.step();
        x = scalar_de_step(3, 6, 1.0 / taps, x);
        worst = worst.max((ev.p_values()[shape.flatten(&burst)] - taps * x).abs());
    }
    worst
}
