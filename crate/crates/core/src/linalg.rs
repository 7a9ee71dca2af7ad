//! Small exact linear-algebra helpers over the rationals.

use num_traits::{One, Zero};

use crate::Rational;

/// Row-reduces `rows` in place and returns the rank.
fn eliminate(rows: &mut [Vec<Rational>], cols: usize) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = Rational::one() / rows[rank][col].clone();
        for v in rows[rank].iter_mut() {
            *v *= inv.clone();
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in 0..rows[r].len() {
                    let delta = factor.clone() * rows[rank][c].clone();
                    rows[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn rank(vectors: &[Vec<Rational>]) -> usize {
    let Some(first) = vectors.first() else {
        return 0;
    };
    let cols = first.len();
    let mut rows = vectors.to_vec();
    eliminate(&mut rows, cols)
}

/// Unique solution of the square system `a x = b`, if `a` is nonsingular.
pub fn solve(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let mut rows: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    if eliminate(&mut rows, n) < n {
        return None;
    }
    Some(rows.into_iter().map(|r| r[n].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    #[test]
    fn solves_and_ranks() {
        let a = vec![vec![int(2), int(1)], vec![int(1), int(-1)]];
        let x = solve(&a, &[int(1), int(1)]).unwrap();
        assert_eq!(x, vec![ratio(2, 3), ratio(-1, 3)]);
        assert_eq!(rank(&[vec![int(1), int(2)], vec![int(2), int(4)]]), 1);
        assert!(solve(&[vec![int(1), int(2)], vec![int(2), int(4)]], &[int(1), int(1)]).is_none());
    }
}
