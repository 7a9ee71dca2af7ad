//! Worked examples and seeded random families of maps.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mapexpr::{MapExpr, MaxPlusEntry};
use crate::scalar::{int, ratio};
use crate::sets::NodeSet;
use crate::Rational;

/// `D_L ∘ S ∘ P_KL ∘ D_L` on `ℝⁿ`, with `σ` the cycle through `K ∪ L` in increasing order.
///
/// `t·(e_K - e_L)` is fixed for every `t > 0`.
pub fn cyclic_clip(n: usize, k: NodeSet, l: NodeSet) -> Result<MapExpr> {
    let kl = k.union(l);
    if n == 0 || !kl.is_subset(NodeSet::full(n)) || !k.is_disjoint(l) || kl.is_empty() {
        return Err(Error::InvalidArgument(format!("need disjoint K, L ⊆ 1..={n} with K ∪ L nonempty")));
    }
    let cycle: Vec<usize> = kl.iter().collect();
    let mut sigma: Vec<usize> = (0..n).collect();
    for (m, &i) in cycle.iter().enumerate() {
        sigma[i] = cycle[(m + 1) % cycle.len()];
    }
    let d = MapExpr::SignFlip { dim: n, set: l };
    Ok(MapExpr::compose_all(vec![
        d.clone(),
        MapExpr::Permutation { sigma },
        MapExpr::Clip { dim: n, set: kl },
        d,
    ]))
}

/// Every disjoint `(K, L)` with `K ∪ L ≠ ∅`, in the sup-face order.
pub fn disjoint_pairs(n: usize) -> Vec<(NodeSet, NodeSet)> {
    let mut out = Vec::new();
    for code in 1..3u64.pow(n as u32) {
        let (mut k, mut l, mut c) = (NodeSet::EMPTY, NodeSet::EMPTY, code);
        for i in 0..n {
            match c % 3 {
                1 => k.insert(i),
                2 => l.insert(i),
                _ => {}
            }
            c /= 3;
        }
        out.push((k, l));
    }
    out
}

/// `x ↦ ½(max x + min x)·e_N`; every diagonal point is fixed.
pub fn midpoint_map(n: usize) -> MapExpr {
    let all = vec![vec![Some(Rational::zero()); n]; n];
    let hi = MapExpr::MaxPlus { matrix: all.clone() };
    let lo = MapExpr::MinMax { rows: (0..n).map(|_| (0..n).map(|j| unit_row(n, j)).collect()).collect() };
    MapExpr::convex_combination(ratio(1, 2), hi, lo)
}

fn unit_row(n: usize, j: usize) -> Vec<MaxPlusEntry> {
    (0..n).map(|i| (i == j).then(Rational::zero)).collect()
}

/// `s ↦ s - √s` for `s > 1`, else `0`, on `ℝ¹`.
pub fn shrink_sqrt() -> MapExpr {
    MapExpr::ShrinkSqrt { dim: 1, coord: 0 }
}

/// `x ↦ min(x, c)` coordinatewise.
pub fn min_clip(c: &[Rational]) -> MapExpr {
    MapExpr::min(MapExpr::identity(c.len()), MapExpr::constant(c.to_vec()))
}

fn entry(rng: &mut ChaCha8Rng, bottom_prob: f64) -> MaxPlusEntry {
    if rng.gen_bool(bottom_prob) {
        None
    } else {
        Some(int(rng.gen_range(-3..=3)))
    }
}

fn max_plus_row(rng: &mut ChaCha8Rng, n: usize, bottom_prob: f64) -> Vec<MaxPlusEntry> {
    let mut row: Vec<MaxPlusEntry> = (0..n).map(|_| entry(rng, bottom_prob)).collect();
    if row.iter().all(Option::is_none) {
        row[rng.gen_range(0..n)] = Some(int(rng.gen_range(-3..=3)));
    }
    row
}

/// Max-plus matrix with integer entries in `[-3, 3]` and about half the entries `⊥`.
pub fn random_max_plus(n: usize, seed: u64) -> MapExpr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MapExpr::MaxPlus { matrix: (0..n).map(|_| max_plus_row(&mut rng, n, 0.5)).collect() }
}

/// Min-max map with one to three max-plus rows per coordinate.
pub fn random_min_max(n: usize, seed: u64) -> MapExpr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            (0..k).map(|_| max_plus_row(&mut rng, n, 0.6)).collect()
        })
        .collect();
    MapExpr::MinMax { rows }
}

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> NodeSet {
    NodeSet::from_bits(rng.gen_range(0..1u64 << n))
}

/// Sup-nonexpansive positively homogeneous leaf.
fn homogeneous_leaf(rng: &mut ChaCha8Rng, n: usize) -> MapExpr {
    match rng.gen_range(0..6) {
        0 => {
            let mut sigma: Vec<usize> = (0..n).collect();
            sigma.shuffle(rng);
            MapExpr::Permutation { sigma }
        }
        1 => MapExpr::SignFlip { dim: n, set: random_set(rng, n) },
        2 => MapExpr::Clip { dim: n, set: random_set(rng, n) },
        3 => MapExpr::MaxPlus {
            matrix: (0..n)
                .map(|_| {
                    let mut row: Vec<MaxPlusEntry> =
                        (0..n).map(|_| rng.gen_bool(0.5).then(Rational::zero)).collect();
                    if row.iter().all(Option::is_none) {
                        row[rng.gen_range(0..n)] = Some(Rational::zero());
                    }
                    row
                })
                .collect(),
        },
        4 => {
            // Rows of absolute sum ≤ 1 keep the sup operator norm ≤ 1.
            let weights = [ratio(-1, 2), Rational::zero(), ratio(1, 2)];
            let matrix = (0..n)
                .map(|_| {
                    let mut row = vec![Rational::zero(); n];
                    for _ in 0..2 {
                        row[rng.gen_range(0..n)] = weights.choose(rng).unwrap().clone();
                    }
                    row
                })
                .collect();
            MapExpr::Affine { matrix, offset: vec![Rational::zero(); n] }
        }
        _ => MapExpr::identity(n),
    }
}

fn homogeneous_tree(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> MapExpr {
    if depth == 0 {
        return homogeneous_leaf(rng, n);
    }
    let sub = |rng: &mut ChaCha8Rng| homogeneous_tree(rng, n, depth - 1);
    match rng.gen_range(0..6) {
        0 => MapExpr::compose(sub(rng), sub(rng)),
        1 => MapExpr::max(sub(rng), sub(rng)),
        2 => MapExpr::min(sub(rng), sub(rng)),
        3 => MapExpr::convex_combination(ratio(rng.gen_range(1..=3), 4), sub(rng), sub(rng)),
        4 => sub(rng).scaled(ratio(rng.gen_range(1..=3), 4)),
        _ => sub(rng),
    }
}

/// Positively homogeneous piecewise-affine map, structurally nonexpansive in the sup norm.
pub fn random_homogeneous_sup(n: usize, seed: u64) -> MapExpr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    homogeneous_tree(&mut rng, n, 2)
}

/// Piecewise-affine sup-nonexpansive map: a homogeneous tree with random translations.
pub fn random_sup_pwa(n: usize, seed: u64) -> MapExpr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let g = random_homogeneous_sup(n, seed);
    let shift = |rng: &mut ChaCha8Rng| (0..n).map(|_| ratio(rng.gen_range(-4..=4), 2)).collect::<Vec<_>>();
    match rng.gen_range(0..3) {
        0 => g.plus(shift(&mut rng)),
        1 => MapExpr::compose(g, MapExpr::Translate { shift: shift(&mut rng) }),
        _ => MapExpr::max(g, MapExpr::constant(shift(&mut rng))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynorm::PolyhedralNorm;

    #[test]
    fn cyclic_clip_fixes_its_ray() {
        for (k, l) in disjoint_pairs(3) {
            let f = cyclic_clip(3, k, l).unwrap();
            let x: Vec<Rational> =
                (0..3).map(|i| if k.contains(i) { int(7) } else if l.contains(i) { int(-7) } else { int(0) }).collect();
            assert_eq!(f.evaluate_exact(&x).unwrap(), x);
        }
        assert_eq!(disjoint_pairs(3).len(), 26);
    }

    #[test]
    fn families_are_nonexpansive() {
        for seed in 0..50 {
            let g = random_homogeneous_sup(3, seed);
            assert!(g.flags().homogeneous && g.structurally_nonexpansive(&PolyhedralNorm::sup(3)));
            assert!(random_sup_pwa(3, seed).structurally_nonexpansive(&PolyhedralNorm::sup(3)));
            assert!(random_min_max(4, seed).flags().topical);
            assert!(random_max_plus(4, seed).flags().convex);
        }
    }

    #[test]
    fn midpoint_fixes_the_diagonal() {
        let m = midpoint_map(2);
        assert_eq!(m.evaluate_exact(&[int(3), int(3)]).unwrap(), vec![int(3), int(3)]);
        assert_eq!(m.evaluate_exact(&[int(4), int(0)]).unwrap(), vec![int(2), int(2)]);
    }
}
