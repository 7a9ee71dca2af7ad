//! Constructor-based maps `ℝⁿ → ℝⁿ` with structural flags.
//!
//! Every constructor is piecewise-affine except [`MapExpr::ShrinkSqrt`], so
//! the exact ray calculus in [`crate::raylimits`] applies to any tree that
//! avoids it. Evaluation is written once against [`Evaluable`] and runs on
//! exact rationals, floats, and one-variable piecewise-affine functions.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polynorm::{NormKind, PolyhedralNorm};
use crate::scalar::{int, rational_from_f64, Scalar};
use crate::sets::NodeSet;
use crate::Rational;

/// A max-plus entry; `None` is the bottom element `⊥ = -∞`.
pub type MaxPlusEntry = Option<Rational>;

#[derive(Clone, Debug, PartialEq)]
pub enum MapExpr {
    Identity { dim: usize },
    Constant { value: Vec<Rational> },
    /// `S(x)_i = x_{σ(i)}`.
    Permutation { sigma: Vec<usize> },
    /// Negates the coordinates in `set`.
    SignFlip { dim: usize, set: NodeSet },
    /// `max(x_i, 0)` on `set`, zero elsewhere.
    Clip { dim: usize, set: NodeSet },
    Translate { shift: Vec<Rational> },
    /// `x ↦ A x + b`; `A` may be rectangular.
    Affine { matrix: Vec<Vec<Rational>>, offset: Vec<Rational> },
    /// `T_i(x) = max_j (A_ij + x_j)`.
    MaxPlus { matrix: Vec<Vec<MaxPlusEntry>> },
    /// `T_i(x) = min_k max_j (A^(i)_kj + x_j)`.
    MinMax { rows: Vec<Vec<Vec<MaxPlusEntry>>> },
    /// Applies `s ↦ s - √s` for `s > 1` and `0` otherwise to one coordinate.
    ShrinkSqrt { dim: usize, coord: usize },
    Compose { outer: Box<MapExpr>, inner: Box<MapExpr> },
    Max(Box<MapExpr>, Box<MapExpr>),
    Min(Box<MapExpr>, Box<MapExpr>),
    /// `weight · first + (1 - weight) · second`.
    ConvexCombination {
        weight: Rational,
        first: Box<MapExpr>,
        second: Box<MapExpr>,
    },
    /// Output `i` is coordinate `parts[i].1` of `parts[i].0`.
    Stack { parts: Vec<(MapExpr, usize)> },
    /// `T(x) - mean(T(x)) e_N` on the chart of the zero-sum subspace.
    NormalizedTopical { inner: Box<MapExpr> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MapFlags {
    pub pwa: bool,
    pub monotone: bool,
    pub topical: bool,
    pub subtopical: bool,
    pub convex: bool,
    pub homogeneous: bool,
    pub affine: bool,
}

impl MapFlags {
    fn and(self, o: MapFlags) -> MapFlags {
        MapFlags {
            pwa: self.pwa && o.pwa,
            monotone: self.monotone && o.monotone,
            topical: self.topical && o.topical,
            subtopical: self.subtopical && o.subtopical,
            convex: self.convex && o.convex,
            homogeneous: self.homogeneous && o.homogeneous,
            affine: self.affine && o.affine,
        }
    }
}

/// Piece-count budget for symbolic evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext {
    pub piece_cap: usize,
}

impl Default for EvalContext {
    fn default() -> Self {
        EvalContext { piece_cap: 1_000_000 }
    }
}

/// Values a [`MapExpr`] can be evaluated on.
pub trait Evaluable: Clone {
    fn constant(c: &Rational) -> Self;
    fn add(&self, other: &Self, ctx: &EvalContext) -> Result<Self>;
    fn add_const(&self, c: &Rational) -> Self;
    fn scale(&self, c: &Rational) -> Self;
    fn max(&self, other: &Self, ctx: &EvalContext) -> Result<Self>;
    fn min(&self, other: &Self, ctx: &EvalContext) -> Result<Self>;
    fn shrink_sqrt(&self) -> Result<Self>;
}

macro_rules! scalar_evaluable {
    ($t:ty) => {
        impl Evaluable for $t {
            fn constant(c: &Rational) -> Self {
                <$t as Scalar>::from_rational(c)
            }
            fn add(&self, other: &Self, _: &EvalContext) -> Result<Self> {
                Ok(self.clone() + other.clone())
            }
            fn add_const(&self, c: &Rational) -> Self {
                self.clone() + <$t as Scalar>::from_rational(c)
            }
            fn scale(&self, c: &Rational) -> Self {
                self.clone() * <$t as Scalar>::from_rational(c)
            }
            fn max(&self, other: &Self, _: &EvalContext) -> Result<Self> {
                Ok(<$t as Scalar>::max_of(self.clone(), other.clone()))
            }
            fn min(&self, other: &Self, _: &EvalContext) -> Result<Self> {
                Ok(<$t as Scalar>::min_of(self.clone(), other.clone()))
            }
            fn shrink_sqrt(&self) -> Result<Self> {
                if !<$t as Scalar>::EXACT {
                    let one = <$t as num_traits::One>::one();
                    if *self > one {
                        let root = self.try_sqrt().ok_or(Error::NotPiecewiseAffine)?;
                        return Ok(self.clone() - root);
                    }
                    return Ok(<$t as num_traits::Zero>::zero());
                }
                Err(Error::NotPiecewiseAffine)
            }
        }
    };
}

scalar_evaluable!(f64);
scalar_evaluable!(f32);
scalar_evaluable!(Rational);

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn max_plus_row<V: Evaluable>(row: &[MaxPlusEntry], x: &[V], row_idx: usize, ctx: &EvalContext) -> Result<V> {
    let mut best: Option<V> = None;
    for (a, v) in row.iter().zip(x) {
        if let Some(a) = a {
            let term = v.add_const(a);
            best = Some(match best {
                None => term,
                Some(b) => b.max(&term, ctx)?,
            });
        }
    }
    best.ok_or(Error::BottomRow { row: row_idx })
}

impl MapExpr {
    pub fn identity(dim: usize) -> Self {
        MapExpr::Identity { dim }
    }

    pub fn constant(value: Vec<Rational>) -> Self {
        MapExpr::Constant { value }
    }

    pub fn compose(outer: MapExpr, inner: MapExpr) -> Self {
        MapExpr::Compose { outer: Box::new(outer), inner: Box::new(inner) }
    }

    /// Composition of a list applied right to left: `compose_all([f, g, h]) = f ∘ g ∘ h`.
    pub fn compose_all(maps: Vec<MapExpr>) -> Self {
        let mut it = maps.into_iter().rev();
        let first = it.next().expect("at least one map");
        it.fold(first, |acc, outer| MapExpr::compose(outer, acc))
    }

    pub fn max(a: MapExpr, b: MapExpr) -> Self {
        MapExpr::Max(Box::new(a), Box::new(b))
    }

    pub fn min(a: MapExpr, b: MapExpr) -> Self {
        MapExpr::Min(Box::new(a), Box::new(b))
    }

    pub fn convex_combination(weight: Rational, first: MapExpr, second: MapExpr) -> Self {
        MapExpr::ConvexCombination { weight, first: Box::new(first), second: Box::new(second) }
    }

    /// `c · self` for `0 ≤ c ≤ 1`, as a convex combination with the zero map.
    pub fn scaled(self, c: Rational) -> Self {
        let n = self.out_dim();
        MapExpr::convex_combination(c, self, MapExpr::Constant { value: vec![Rational::zero(); n] })
    }

    /// `x ↦ self(x) + u`.
    pub fn plus(self, u: Vec<Rational>) -> Self {
        MapExpr::compose(MapExpr::Translate { shift: u }, self)
    }

    pub fn in_dim(&self) -> usize {
        match self {
            MapExpr::Identity { dim } | MapExpr::SignFlip { dim, .. } | MapExpr::Clip { dim, .. } => *dim,
            MapExpr::ShrinkSqrt { dim, .. } => *dim,
            MapExpr::Constant { value } => value.len(),
            MapExpr::Permutation { sigma } => sigma.len(),
            MapExpr::Translate { shift } => shift.len(),
            MapExpr::Affine { matrix, .. } => matrix.first().map_or(0, Vec::len),
            MapExpr::MaxPlus { matrix } => matrix.first().map_or(0, Vec::len),
            MapExpr::MinMax { rows } => rows
                .first()
                .and_then(|r| r.first())
                .map_or(0, Vec::len),
            MapExpr::Compose { inner, .. } => inner.in_dim(),
            MapExpr::Max(a, _) | MapExpr::Min(a, _) => a.in_dim(),
            MapExpr::ConvexCombination { first, .. } => first.in_dim(),
            MapExpr::Stack { parts } => parts.first().map_or(0, |(p, _)| p.in_dim()),
            MapExpr::NormalizedTopical { inner } => inner.in_dim().saturating_sub(1),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            MapExpr::Affine { matrix, .. } => matrix.len(),
            MapExpr::MaxPlus { matrix } => matrix.len(),
            MapExpr::MinMax { rows } => rows.len(),
            MapExpr::Compose { outer, .. } => outer.out_dim(),
            MapExpr::Stack { parts } => parts.len(),
            MapExpr::NormalizedTopical { inner } => inner.out_dim().saturating_sub(1),
            _ => self.in_dim(),
        }
    }

    /// Checks dimensions, indices, weights and max-plus rows throughout the tree.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMap(m));
        match self {
            MapExpr::Identity { dim } if *dim == 0 => bad("zero dimension".into()),
            MapExpr::Identity { .. } => Ok(()),
            MapExpr::Constant { value } | MapExpr::Translate { shift: value } => {
                if value.is_empty() {
                    bad("empty vector".into())
                } else {
                    Ok(())
                }
            }
            MapExpr::Permutation { sigma } => {
                let mut seen = vec![false; sigma.len()];
                for &s in sigma {
                    if s >= sigma.len() || seen[s] {
                        return bad(format!("{sigma:?} is not a permutation"));
                    }
                    seen[s] = true;
                }
                if sigma.is_empty() {
                    return bad("empty permutation".into());
                }
                Ok(())
            }
            MapExpr::SignFlip { dim, set } | MapExpr::Clip { dim, set } => {
                if *dim == 0 || !set.is_subset(NodeSet::full(*dim)) {
                    return bad(format!("set {set} outside dimension {dim}"));
                }
                Ok(())
            }
            MapExpr::ShrinkSqrt { dim, coord } => {
                if coord >= dim {
                    return bad(format!("coordinate {} outside dimension {dim}", coord + 1));
                }
                Ok(())
            }
            MapExpr::Affine { matrix, offset } => {
                let cols = self.in_dim();
                if matrix.is_empty() || cols == 0 || matrix.iter().any(|r| r.len() != cols) {
                    return bad("ragged or empty matrix".into());
                }
                check_len(matrix.len(), offset.len())
            }
            MapExpr::MaxPlus { matrix } => {
                let cols = self.in_dim();
                if matrix.is_empty() || matrix.iter().any(|r| r.len() != cols) {
                    return bad("ragged or empty max-plus matrix".into());
                }
                if matrix.len() != cols {
                    return bad("max-plus matrix must be square".into());
                }
                if let Some(row) = matrix.iter().position(|r| r.iter().all(Option::is_none)) {
                    return Err(Error::BottomRow { row });
                }
                Ok(())
            }
            MapExpr::MinMax { rows } => {
                let cols = self.in_dim();
                if rows.len() != cols || cols == 0 {
                    return bad("min-max map must be square".into());
                }
                for (i, coordinate) in rows.iter().enumerate() {
                    if coordinate.is_empty() {
                        return bad(format!("coordinate {} has no rows", i + 1));
                    }
                    for r in coordinate {
                        if r.len() != cols {
                            return bad("ragged min-max row".into());
                        }
                        if r.iter().all(Option::is_none) {
                            return Err(Error::BottomRow { row: i });
                        }
                    }
                }
                Ok(())
            }
            MapExpr::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                check_len(outer.in_dim(), inner.out_dim())
            }
            MapExpr::Max(a, b) | MapExpr::Min(a, b) => {
                a.validate()?;
                b.validate()?;
                check_len(a.in_dim(), b.in_dim())?;
                check_len(a.out_dim(), b.out_dim())
            }
            MapExpr::ConvexCombination { weight, first, second } => {
                if weight.is_negative() || *weight > Rational::one() {
                    return bad(format!("weight {weight} outside [0, 1]"));
                }
                first.validate()?;
                second.validate()?;
                check_len(first.in_dim(), second.in_dim())?;
                check_len(first.out_dim(), second.out_dim())
            }
            MapExpr::Stack { parts } => {
                if parts.is_empty() {
                    return bad("empty stack".into());
                }
                let d = parts[0].0.in_dim();
                for (p, c) in parts {
                    p.validate()?;
                    check_len(d, p.in_dim())?;
                    if *c >= p.out_dim() {
                        return bad(format!("stack coordinate {} out of range", c + 1));
                    }
                }
                Ok(())
            }
            MapExpr::NormalizedTopical { inner } => {
                inner.validate()?;
                if inner.in_dim() < 2 || inner.in_dim() != inner.out_dim() {
                    return bad("normalization needs a square map with n >= 2".into());
                }
                Ok(())
            }
        }
    }

    pub fn flags(&self) -> MapFlags {
        let all = MapFlags {
            pwa: true,
            monotone: true,
            topical: true,
            subtopical: true,
            convex: true,
            homogeneous: true,
            affine: true,
        };
        match self {
            MapExpr::Identity { .. } | MapExpr::Permutation { .. } => all,
            MapExpr::Constant { value } => MapFlags {
                topical: false,
                homogeneous: value.iter().all(Zero::is_zero),
                ..all
            },
            MapExpr::Translate { shift } => MapFlags {
                homogeneous: shift.iter().all(Zero::is_zero),
                ..all
            },
            MapExpr::SignFlip { set, .. } => {
                let trivial = set.is_empty();
                MapFlags { monotone: trivial, topical: trivial, subtopical: trivial, ..all }
            }
            MapExpr::Clip { .. } => MapFlags { topical: false, affine: false, ..all },
            MapExpr::Affine { matrix, offset } => {
                let nonneg = matrix.iter().flatten().all(|a| !a.is_negative());
                let sums: Vec<Rational> = matrix.iter().map(|r| r.iter().sum()).collect();
                let square = matrix.len() == self.in_dim();
                MapFlags {
                    monotone: nonneg,
                    topical: nonneg && square && sums.iter().all(One::is_one),
                    subtopical: nonneg && square && sums.iter().all(|s| *s <= Rational::one()),
                    homogeneous: offset.iter().all(Zero::is_zero),
                    ..all
                }
            }
            MapExpr::MaxPlus { matrix } => MapFlags {
                homogeneous: matrix.iter().flatten().flatten().all(Zero::is_zero),
                affine: false,
                ..all
            },
            MapExpr::MinMax { rows } => MapFlags {
                convex: rows.iter().all(|r| r.len() == 1),
                homogeneous: rows.iter().flatten().flatten().flatten().all(Zero::is_zero),
                affine: false,
                ..all
            },
            MapExpr::ShrinkSqrt { .. } => MapFlags {
                pwa: false,
                topical: false,
                homogeneous: false,
                affine: false,
                ..all
            },
            MapExpr::Compose { outer, inner } => {
                let (o, i) = (outer.flags(), inner.flags());
                let mut f = o.and(i);
                f.convex = o.convex && (i.affine || (o.monotone && i.convex));
                f
            }
            MapExpr::Max(a, b) => {
                let f = a.flags().and(b.flags());
                MapFlags { affine: false, ..f }
            }
            MapExpr::Min(a, b) => {
                let f = a.flags().and(b.flags());
                MapFlags { affine: false, convex: false, ..f }
            }
            MapExpr::ConvexCombination { first, second, .. } => first.flags().and(second.flags()),
            MapExpr::Stack { parts } => parts.iter().fold(all, |acc, (p, _)| acc.and(p.flags())),
            MapExpr::NormalizedTopical { inner } => {
                let f = inner.flags();
                MapFlags {
                    pwa: f.pwa,
                    homogeneous: f.homogeneous,
                    affine: f.affine,
                    convex: f.affine,
                    monotone: false,
                    topical: false,
                    subtopical: false,
                }
            }
        }
    }

    pub fn is_pwa(&self) -> bool {
        self.flags().pwa
    }

    pub fn evaluate_in<V: Evaluable>(&self, x: &[V], ctx: &EvalContext) -> Result<Vec<V>> {
        check_len(self.in_dim(), x.len())?;
        match self {
            MapExpr::Identity { .. } => Ok(x.to_vec()),
            MapExpr::Constant { value } => Ok(value.iter().map(V::constant).collect()),
            MapExpr::Permutation { sigma } => Ok(sigma.iter().map(|&j| x[j].clone()).collect()),
            MapExpr::SignFlip { set, .. } => Ok(x
                .iter()
                .enumerate()
                .map(|(i, v)| if set.contains(i) { v.scale(&int(-1)) } else { v.clone() })
                .collect()),
            MapExpr::Clip { set, .. } => {
                let zero = V::constant(&Rational::zero());
                x.iter()
                    .enumerate()
                    .map(|(i, v)| if set.contains(i) { v.max(&zero, ctx) } else { Ok(zero.clone()) })
                    .collect()
            }
            MapExpr::Translate { shift } => Ok(x.iter().zip(shift).map(|(v, s)| v.add_const(s)).collect()),
            MapExpr::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, b)| {
                    let mut acc = V::constant(b);
                    for (a, v) in row.iter().zip(x) {
                        if !a.is_zero() {
                            acc = acc.add(&v.scale(a), ctx)?;
                        }
                    }
                    Ok(acc)
                })
                .collect(),
            MapExpr::MaxPlus { matrix } => matrix
                .iter()
                .enumerate()
                .map(|(i, row)| max_plus_row(row, x, i, ctx))
                .collect(),
            MapExpr::MinMax { rows } => rows
                .iter()
                .enumerate()
                .map(|(i, coordinate)| {
                    let mut best: Option<V> = None;
                    for row in coordinate {
                        let m = max_plus_row(row, x, i, ctx)?;
                        best = Some(match best {
                            None => m,
                            Some(b) => b.min(&m, ctx)?,
                        });
                    }
                    best.ok_or(Error::BottomRow { row: i })
                })
                .collect(),
            MapExpr::ShrinkSqrt { coord, .. } => {
                let mut out = x.to_vec();
                out[*coord] = x[*coord].shrink_sqrt()?;
                Ok(out)
            }
            MapExpr::Compose { outer, inner } => outer.evaluate_in(&inner.evaluate_in(x, ctx)?, ctx),
            MapExpr::Max(a, b) => {
                let (ya, yb) = (a.evaluate_in(x, ctx)?, b.evaluate_in(x, ctx)?);
                ya.iter().zip(&yb).map(|(p, q)| p.max(q, ctx)).collect()
            }
            MapExpr::Min(a, b) => {
                let (ya, yb) = (a.evaluate_in(x, ctx)?, b.evaluate_in(x, ctx)?);
                ya.iter().zip(&yb).map(|(p, q)| p.min(q, ctx)).collect()
            }
            MapExpr::ConvexCombination { weight, first, second } => {
                let rest = Rational::one() - weight;
                let (ya, yb) = (first.evaluate_in(x, ctx)?, second.evaluate_in(x, ctx)?);
                ya.iter()
                    .zip(&yb)
                    .map(|(p, q)| p.scale(weight).add(&q.scale(&rest), ctx))
                    .collect()
            }
            MapExpr::Stack { parts } => parts
                .iter()
                .map(|(p, c)| Ok(p.evaluate_in(x, ctx)?.swap_remove(*c)))
                .collect(),
            MapExpr::NormalizedTopical { inner } => {
                let mut full = x.to_vec();
                let mut last = V::constant(&Rational::zero());
                for v in x {
                    last = last.add(&v.scale(&int(-1)), ctx)?;
                }
                full.push(last);
                let y = inner.evaluate_in(&full, ctx)?;
                let n = int(y.len() as i64);
                let mut mean = V::constant(&Rational::zero());
                for v in &y {
                    mean = mean.add(v, ctx)?;
                }
                let neg_mean = mean.scale(&(-Rational::one() / n));
                y[..y.len() - 1].iter().map(|v| v.add(&neg_mean, ctx)).collect()
            }
        }
    }

    /// Floating or exact evaluation at a scalar point.
    pub fn evaluate<S: Scalar + Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        if S::EXACT && !self.is_pwa() {
            return Err(Error::NotPiecewiseAffine);
        }
        self.evaluate_in(x, &EvalContext::default())
    }

    pub fn evaluate_exact(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        self.evaluate(x)
    }

    /// `f(x) - x`.
    pub fn displacement<S: Scalar + Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        let y = self.evaluate(x)?;
        check_len(x.len(), y.len())?;
        Ok(y.into_iter().zip(x).map(|(a, b)| a - b.clone()).collect())
    }

    /// Can nonexpansiveness in `norm` be read off the constructors?
    pub fn structurally_nonexpansive(&self, norm: &PolyhedralNorm) -> bool {
        if self.in_dim() != norm.dim() || self.out_dim() != norm.dim() {
            return false;
        }
        self.nonexpansive_rule(norm)
    }

    fn nonexpansive_rule(&self, norm: &PolyhedralNorm) -> bool {
        let kind = norm.kind();
        let coordinatewise_ok = matches!(kind, NormKind::Sup | NormKind::One) || norm.dim() == 1;
        if kind == NormKind::Sup && self.flags().subtopical {
            return true;
        }
        let linear_ok = |m: &[Vec<Rational>]| {
            norm.operator_norm(m).map(|v| v <= Rational::one()).unwrap_or(false)
        };
        match self {
            MapExpr::Identity { .. } | MapExpr::Constant { .. } | MapExpr::Translate { .. } => true,
            MapExpr::Permutation { .. } | MapExpr::SignFlip { .. } => {
                coordinatewise_ok || self.linear_matrix().is_some_and(|m| linear_ok(&m))
            }
            MapExpr::Affine { matrix, .. } => matrix.len() == norm.dim() && linear_ok(matrix),
            MapExpr::Clip { .. } | MapExpr::ShrinkSqrt { .. } => coordinatewise_ok,
            MapExpr::MaxPlus { .. } | MapExpr::MinMax { .. } => kind == NormKind::Sup,
            MapExpr::Compose { outer, inner } => outer.nonexpansive_rule(norm) && inner.nonexpansive_rule(norm),
            MapExpr::Max(a, b) | MapExpr::Min(a, b) => {
                (kind == NormKind::Sup || norm.dim() == 1) && a.nonexpansive_rule(norm) && b.nonexpansive_rule(norm)
            }
            MapExpr::ConvexCombination { first, second, .. } => {
                first.nonexpansive_rule(norm) && second.nonexpansive_rule(norm)
            }
            MapExpr::Stack { parts } => {
                kind == NormKind::Sup
                    && parts
                        .iter()
                        .all(|(p, _)| p.out_dim() == norm.dim() && p.nonexpansive_rule(norm))
            }
            MapExpr::NormalizedTopical { inner } => {
                kind == NormKind::Variation && norm.ambient_dim() == inner.in_dim() && inner.flags().topical
            }
        }
    }

    /// Matrix of a linear constructor (identity, permutation, sign flip).
    fn linear_matrix(&self) -> Option<Vec<Vec<Rational>>> {
        let n = self.in_dim();
        let mut m = vec![vec![Rational::zero(); n]; n];
        match self {
            MapExpr::Identity { .. } => (0..n).for_each(|i| m[i][i] = Rational::one()),
            MapExpr::Permutation { sigma } => sigma.iter().enumerate().for_each(|(i, &j)| m[i][j] = Rational::one()),
            MapExpr::SignFlip { set, .. } => {
                (0..n).for_each(|i| m[i][i] = if set.contains(i) { int(-1) } else { Rational::one() })
            }
            _ => return None,
        }
        Some(m)
    }
}

/// `f ↦ f(x) - mean(f(x)) e_N` on the chart of `V₀`; nonexpansive in the variation norm.
pub fn normalize_topical(t: &MapExpr) -> Result<MapExpr> {
    if !t.flags().topical {
        return Err(Error::MissingFlag("topical"));
    }
    t.validate()?;
    Ok(MapExpr::NormalizedTopical { inner: Box::new(t.clone()) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Structural,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NonexpansiveVerdict {
    Guaranteed,
    Consistent,
    Violated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonexpansivenessReport {
    pub norm: NormKind,
    pub mode: CheckMode,
    pub sample_count: usize,
    pub max_observed_ratio: f64,
    pub verdict: NonexpansiveVerdict,
    /// `(x, y)` with `‖f(x) - f(y)‖ > ‖x - y‖`.
    pub witness: Option<(Vec<Rational>, Vec<Rational>)>,
}

fn dyadic_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| (rng.gen_range(-1024i64..=1024) as f64 / 1024.0) * scale)
        .collect()
}

pub fn check_nonexpansive(f: &MapExpr, norm: &PolyhedralNorm, samples: usize, seed: u64) -> NonexpansivenessReport {
    if f.structurally_nonexpansive(norm) {
        return NonexpansivenessReport {
            norm: norm.kind(),
            mode: CheckMode::Structural,
            sample_count: 0,
            max_observed_ratio: 1.0,
            verdict: NonexpansiveVerdict::Guaranteed,
            witness: None,
        };
    }
    let mut report = NonexpansivenessReport {
        norm: norm.kind(),
        mode: CheckMode::Sampled,
        sample_count: 0,
        max_observed_ratio: 0.0,
        verdict: NonexpansiveVerdict::Consistent,
        witness: None,
    };
    if f.in_dim() != norm.dim() || f.out_dim() != norm.dim() {
        report.verdict = NonexpansiveVerdict::Violated;
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = norm.dim();
    let scales = [1.0, 8.0, 64.0, 1024.0];
    for k in 0..samples {
        let x = dyadic_point(&mut rng, dim, scales[k % scales.len()]);
        let step = scales[(k / scales.len()) % scales.len()] / 64.0;
        let d = dyadic_point(&mut rng, dim, step);
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        report.sample_count += 1;
        let (Ok(fx), Ok(fy)) = (f.evaluate(&x), f.evaluate(&y)) else {
            continue;
        };
        let den = norm.norm_unchecked(&d);
        if den == 0.0 {
            continue;
        }
        let diff: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
        let ratio = norm.norm_unchecked(&diff) / den;
        report.max_observed_ratio = report.max_observed_ratio.max(ratio);
        if ratio > 1.0 + 1e-9 && report.witness.is_none() {
            let (Ok(xq), Ok(yq)) = (
                x.iter().map(|v| rational_from_f64(*v)).collect::<Result<Vec<_>>>(),
                y.iter().map(|v| rational_from_f64(*v)).collect::<Result<Vec<_>>>(),
            ) else {
                continue;
            };
            let confirmed = if f.is_pwa() {
                match (f.evaluate_exact(&xq), f.evaluate_exact(&yq)) {
                    (Ok(a), Ok(b)) => {
                        let lhs: Vec<Rational> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
                        let rhs: Vec<Rational> = xq.iter().zip(&yq).map(|(p, q)| p - q).collect();
                        norm.norm_unchecked(&lhs) > norm.norm_unchecked(&rhs)
                    }
                    _ => false,
                }
            } else {
                true
            };
            if confirmed {
                report.verdict = NonexpansiveVerdict::Violated;
                report.witness = Some((xq, yq));
            }
        }
    }
    report
}
