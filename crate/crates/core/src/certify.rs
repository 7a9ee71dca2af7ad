//! Surjectivity and uniqueness certificates for nonexpansive maps on
//! polyhedral-normed spaces, plus the one-sided recession and
//! semiderivative tests and the tools for homogeneous maps.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::certificate::{
    Certificate, FailingFace, LimitEntry, Method, Sign, SlopeEntry, Verdict, Witness,
};
use crate::error::{Error, Result};
use crate::mapexpr::{check_nonexpansive, MapExpr, NonexpansiveVerdict};
use crate::polynorm::{from_chart, to_chart, FaceDescriptor, NormKind, PolyhedralNorm};
use crate::raylimits::{
    classify_limit_at_infinity, classify_limit_numeric, initial_sign, restrict_map_to_ray, restrict_to_ray_with,
    InitialSign, LimitVerdict, Value,
};
use crate::scalar::{int, ratio, Scalar};
use crate::sets::NodeSet;
use crate::topical::LimitOptions;
use crate::{ExactPwa, Rational};

#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    pub limits: LimitOptions,
    /// Sample pairs for the nonexpansiveness check when structure does not decide it.
    pub nonexpansive_samples: usize,
    pub seed: u64,
    /// Proceed when nonexpansiveness is only sampled-consistent.
    pub accept_sampled: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { limits: LimitOptions::default(), nonexpansive_samples: 1000, seed: 0, accept_sampled: false }
    }
}

fn check_square(f: &MapExpr, norm: &PolyhedralNorm) -> Result<()> {
    f.validate()?;
    for got in [f.in_dim(), f.out_dim()] {
        if got != norm.dim() {
            return Err(Error::DimensionMismatch { expected: norm.dim(), got });
        }
    }
    Ok(())
}

fn gate_nonexpansive(f: &MapExpr, norm: &PolyhedralNorm, opts: &CertifyOptions) -> Result<Option<String>> {
    check_square(f, norm)?;
    let report = check_nonexpansive(f, norm, opts.nonexpansive_samples, opts.seed);
    match report.verdict {
        NonexpansiveVerdict::Guaranteed => Ok(None),
        NonexpansiveVerdict::Consistent if opts.accept_sampled => Ok(Some(format!(
            "nonexpansiveness sampled only ({} pairs, max ratio {:.6})",
            report.sample_count, report.max_observed_ratio
        ))),
        NonexpansiveVerdict::Consistent => Err(Error::NotNonexpansive(format!(
            "not structurally nonexpansive in the {} norm; sampling found no violation in {} pairs (set accept_sampled to proceed)",
            norm.kind(),
            report.sample_count
        ))),
        NonexpansiveVerdict::Violated => Err(Error::NotNonexpansive(format!(
            "sampling found a pair with ratio {:.6} in the {} norm",
            report.max_observed_ratio,
            norm.kind()
        ))),
    }
}

/// `lim ⟨f(t x_F) - t x_F, x_F*⟩`, exactly when possible.
pub fn face_limit(f: &MapExpr, face: &FaceDescriptor, opts: &LimitOptions) -> Result<LimitVerdict> {
    let zero = vec![Rational::zero(); face.representative.len()];
    if f.is_pwa() {
        match restrict_to_ray_with(f, &zero, &face.representative, &face.dual_representative, &opts.eval) {
            Ok(g) => return classify_limit_at_infinity(&g),
            Err(Error::ResourceLimit(_)) => {}
            Err(e) => return Err(e),
        }
    }
    classify_limit_numeric(f, &zero, &face.representative, &face.dual_representative, &opts.policy)
}

/// Every proper face limit, without the nonexpansiveness gate.
fn face_limits_certificate(f: &MapExpr, norm: &PolyhedralNorm, opts: &LimitOptions, method: Method) -> Result<Certificate> {
    let faces = norm.enumerate_proper_faces()?;
    let limits: Vec<LimitVerdict> = faces
        .par_iter()
        .map(|face| face_limit(f, face, opts))
        .collect::<Result<_>>()?;
    let mut failing = Vec::new();
    let mut inconclusive = false;
    let mut exact_failure = false;
    let mut table = Vec::with_capacity(faces.len());
    for (face, v) in faces.iter().zip(limits) {
        if let Some(value) = v.finite_value() {
            exact_failure |= matches!(value, Value::Exact(_));
            failing.push(FailingFace { name: face.name(), face: face.clone(), value: value.clone() });
        }
        inconclusive |= v.is_inconclusive();
        table.push(LimitEntry { key: face.name(), verdict: v });
    }
    let verdict = if exact_failure || (!failing.is_empty() && !inconclusive) {
        Verdict::NotSurjective
    } else if inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Surjective
    };
    let witness = if failing.is_empty() { Witness::None } else { Witness::FailingFaces { faces: failing } };
    Ok(Certificate::new(verdict, method).with_witness(witness).with_table(table))
}

/// Surjectivity of `f - id` from the limits along every proper face.
pub fn certify_surjective(f: &MapExpr, norm: &PolyhedralNorm, opts: &CertifyOptions) -> Result<Certificate> {
    let note = gate_nonexpansive(f, norm, opts)?;
    let cert = face_limits_certificate(f, norm, &opts.limits, Method::FaceLimits)?;
    Ok(match note {
        Some(n) => cert.note(n),
        None => cert,
    })
}

fn require_fixed_point(f: &MapExpr, norm: &PolyhedralNorm, u: &[Rational]) -> Result<()> {
    let fu = f.evaluate_exact(u)?;
    let diff: Vec<Rational> = fu.iter().zip(u).map(|(a, b)| a - b).collect();
    let r = norm.norm_value(&diff)?;
    if !r.is_zero() {
        return Err(Error::Precondition { what: "u is not a fixed point of f".into(), residual: r.to_f64() });
    }
    Ok(())
}

fn slope_entry(key: String, g: &ExactPwa) -> Result<SlopeEntry> {
    let sign = initial_sign(g)?;
    Ok(SlopeEntry { key, initial_slope: g.first_slope().clone(), sign })
}

/// Is `u` the only fixed point? Initial slope of every face ray based at `u`.
pub fn certify_unique(f: &MapExpr, norm: &PolyhedralNorm, u: &[Rational], opts: &CertifyOptions) -> Result<Certificate> {
    let note = gate_nonexpansive(f, norm, opts)?;
    if !f.is_pwa() {
        return Ok(Certificate::new(Verdict::Inconclusive, Method::FaceInitialSlopes)
            .note("initial slopes are exact only for piecewise-affine maps"));
    }
    require_fixed_point(f, norm, u)?;
    let faces = norm.enumerate_proper_faces()?;
    let entries: Vec<Result<SlopeEntry>> = faces
        .par_iter()
        .map(|face| {
            let g = restrict_to_ray_with(f, u, &face.representative, &face.dual_representative, &opts.limits.eval)?;
            slope_entry(face.name(), &g)
        })
        .collect();
    let mut slopes = Vec::with_capacity(faces.len());
    let mut witness = Witness::None;
    for (face, e) in faces.iter().zip(entries) {
        let e = match e {
            Ok(e) => e,
            Err(Error::ResourceLimit(msg)) => {
                return Ok(Certificate::new(Verdict::Inconclusive, Method::FaceInitialSlopes).note(msg))
            }
            Err(err) => return Err(err),
        };
        if e.sign == InitialSign::ZeroOnInitialInterval && witness == Witness::None {
            witness = Witness::InvariantFace { name: face.name(), face: face.clone() };
        }
        slopes.push(e);
    }
    let verdict = if witness == Witness::None { Verdict::Unique } else { Verdict::NotUnique };
    let cert = Certificate::new(verdict, Method::FaceInitialSlopes).with_witness(witness).with_slopes(slopes);
    Ok(match note {
        Some(n) => cert.note(n),
        None => cert,
    })
}

fn weighted_sum(coords: &[ExactPwa], weights: &[Rational], base_shift: &Rational, extra_slope: &Rational) -> ExactPwa {
    let mut g = ExactPwa::affine(extra_slope.clone(), -base_shift.clone());
    for (c, w) in coords.iter().zip(weights) {
        if !w.is_zero() {
            g = g.add(&c.scale(w));
        }
    }
    g
}

fn indicator(n: usize, set: NodeSet, value: i64) -> Vec<Rational> {
    (0..n).map(|i| if set.contains(i) { int(value) } else { Rational::zero() }).collect()
}

/// Uniqueness of a fixed point of a subtopical map from `2(2ⁿ - 1)` initial slopes.
pub fn certify_unique_subtopical(t: &MapExpr, u: &[Rational], opts: &CertifyOptions) -> Result<Certificate> {
    t.validate()?;
    if !t.flags().subtopical {
        return Err(Error::MissingFlag("subtopical"));
    }
    let n = t.in_dim();
    require_fixed_point(t, &PolyhedralNorm::sup(n), u)?;
    let mut slopes = Vec::new();
    let mut witness = Witness::None;
    for set in NodeSet::nonempty_subsets(n) {
        let w = indicator(n, set, 1);
        let k = int(set.len() as i64);
        let shift: Rational = set.iter().map(|i| u[i].clone()).sum();
        for sign in [Sign::Plus, Sign::Minus] {
            let (dir, extra) = match sign {
                Sign::Plus => (indicator(n, set, 1), -k.clone()),
                Sign::Minus => (indicator(n, set, -1), k.clone()),
            };
            let coords = restrict_map_to_ray(t, u, &dir, &opts.limits.eval)?;
            let g = weighted_sum(&coords, &w, &shift, &extra);
            // the minus ray is nondecreasing; test its negation
            let g = if sign == Sign::Minus { g.scale(&int(-1)) } else { g };
            let e = slope_entry(format!("I={set},sign={sign}"), &g)?;
            if e.sign == InitialSign::ZeroOnInitialInterval && witness == Witness::None {
                witness = Witness::SubsetRay { subset: set, sign };
            }
            slopes.push(e);
        }
    }
    let verdict = if witness == Witness::None { Verdict::Unique } else { Verdict::NotUnique };
    Ok(Certificate::new(verdict, Method::SubtopicalInitialSlopes).with_witness(witness).with_slopes(slopes))
}

/// Uniqueness (up to additive constants) of an additive eigenvector `u` of a topical map.
pub fn certify_unique_eigenvector(t: &MapExpr, u: &[Rational], opts: &CertifyOptions) -> Result<Certificate> {
    t.validate()?;
    if !t.flags().topical {
        return Err(Error::MissingFlag("topical"));
    }
    let n = t.in_dim();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    let tu = t.evaluate_exact(u)?;
    let diffs: Vec<Rational> = tu.iter().zip(u).map(|(a, b)| a - b).collect();
    let lambda = diffs[0].clone();
    if diffs.iter().any(|d| *d != lambda) {
        let spread = PolyhedralNorm::sup(n).norm_value(&diffs.iter().map(|d| d - &lambda).collect::<Vec<_>>())?;
        return Err(Error::Precondition { what: "u is not an additive eigenvector".into(), residual: spread.to_f64() });
    }
    let mut lower = HashMap::new();
    let mut upper = HashMap::new();
    let mut slopes = Vec::new();
    for set in NodeSet::proper_subsets(n) {
        let w = indicator(n, set, 1);
        let shift: Rational = set.iter().map(|i| &u[i] + &lambda).sum();
        let coords = restrict_map_to_ray(t, u, &indicator(n, set.complement(n), -1), &opts.limits.eval)?;
        let a = weighted_sum(&coords, &w, &shift, &Rational::zero());
        let e = slope_entry(format!("lower[I={set}]"), &a)?;
        lower.insert(set, e.sign == InitialSign::NegativeForAllPositiveT);
        slopes.push(e);
        let coords = restrict_map_to_ray(t, u, &indicator(n, set.complement(n), 1), &opts.limits.eval)?;
        let b = weighted_sum(&coords, &w, &shift, &Rational::zero()).scale(&int(-1));
        let e = slope_entry(format!("upper[J={set}]"), &b)?;
        upper.insert(set, e.sign == InitialSign::NegativeForAllPositiveT);
        slopes.push(e);
    }
    let mut witness = Witness::None;
    'outer: for i in NodeSet::proper_subsets(n) {
        if lower[&i] {
            continue;
        }
        for j in NodeSet::proper_subsets(n).filter(|j| j.is_disjoint(i)) {
            if !upper[&j] {
                witness = Witness::EigenvectorPair { i, j };
                break 'outer;
            }
        }
    }
    let verdict = if witness == Witness::None { Verdict::Unique } else { Verdict::NotUnique };
    Ok(Certificate::new(verdict, Method::EigenvectorInitialSlopes)
        .with_witness(witness)
        .with_slopes(slopes)
        .note(format!("eigenvalue {}", crate::scalar::format_rational(&lambda))))
}

/// Symbolic recession map `f∞(x) = lim t⁻¹ f(t x)`.
pub fn recession_expr(f: &MapExpr) -> Result<MapExpr> {
    let zero_entries = |rows: &[Vec<Option<Rational>>]| -> Vec<Vec<Option<Rational>>> {
        rows.iter().map(|r| r.iter().map(|e| e.as_ref().map(|_| Rational::zero())).collect()).collect()
    };
    Ok(match f {
        MapExpr::Identity { .. }
        | MapExpr::Permutation { .. }
        | MapExpr::SignFlip { .. }
        | MapExpr::Clip { .. } => f.clone(),
        MapExpr::Constant { value } => MapExpr::Constant { value: vec![Rational::zero(); value.len()] },
        MapExpr::Translate { shift } => MapExpr::identity(shift.len()),
        MapExpr::Affine { matrix, offset } => MapExpr::Affine {
            matrix: matrix.clone(),
            offset: vec![Rational::zero(); offset.len()],
        },
        MapExpr::MaxPlus { matrix } => MapExpr::MaxPlus { matrix: zero_entries(matrix) },
        MapExpr::MinMax { rows } => MapExpr::MinMax { rows: rows.iter().map(|r| zero_entries(r)).collect() },
        MapExpr::ShrinkSqrt { dim, coord } => {
            let clip = MapExpr::Clip { dim: *dim, set: NodeSet::singleton(*coord) };
            if *dim == 1 {
                clip
            } else {
                MapExpr::Stack {
                    parts: (0..*dim)
                        .map(|i| if i == *coord { (clip.clone(), i) } else { (MapExpr::identity(*dim), i) })
                        .collect(),
                }
            }
        }
        MapExpr::Compose { outer, inner } => MapExpr::compose(recession_expr(outer)?, recession_expr(inner)?),
        MapExpr::Max(a, b) => MapExpr::max(recession_expr(a)?, recession_expr(b)?),
        MapExpr::Min(a, b) => MapExpr::min(recession_expr(a)?, recession_expr(b)?),
        MapExpr::ConvexCombination { weight, first, second } => {
            MapExpr::convex_combination(weight.clone(), recession_expr(first)?, recession_expr(second)?)
        }
        MapExpr::Stack { parts } => MapExpr::Stack {
            parts: parts.iter().map(|(p, c)| Ok((recession_expr(p)?, *c))).collect::<Result<_>>()?,
        },
        MapExpr::NormalizedTopical { inner } => MapExpr::NormalizedTopical { inner: Box::new(recession_expr(inner)?) },
    })
}

/// `f∞` on sampled directions, compared with the symbolic recession map.
#[derive(Clone, Debug)]
pub struct RecessionEstimate {
    pub map: MapExpr,
    pub directions: Vec<Vec<Rational>>,
    /// Eventual slopes of `t ↦ f(t d)` (exact) or `t⁻¹ f(t d)` at large `t` (numeric).
    pub values: Vec<Vec<Value>>,
    pub converged: Vec<bool>,
    /// `f∞(c d) = c f∞(d)` held exactly on every sample.
    pub homogeneous: bool,
}

impl RecessionEstimate {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

const RECESSION_TOL: f64 = 1e-4;

pub fn recession_map(f: &MapExpr, directions: &[Vec<Rational>], opts: &LimitOptions) -> Result<RecessionEstimate> {
    f.validate()?;
    let map = recession_expr(f)?;
    let mut values = Vec::with_capacity(directions.len());
    let mut converged = Vec::with_capacity(directions.len());
    let mut homogeneous = true;
    for d in directions {
        let symbolic = map.evaluate_exact(d)?;
        for c in [ratio(1, 3), int(2), int(7)] {
            let cd: Vec<Rational> = d.iter().map(|x| x * &c).collect();
            let lhs = map.evaluate_exact(&cd)?;
            homogeneous &= lhs.iter().zip(&symbolic).all(|(a, b)| *a == b * &c);
        }
        let exact = if f.is_pwa() {
            match restrict_map_to_ray(f, &vec![Rational::zero(); d.len()], d, &opts.eval) {
                Ok(coords) => Some(coords.iter().map(|g| g.final_slope().clone()).collect::<Vec<_>>()),
                Err(Error::ResourceLimit(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        match exact {
            Some(slopes) => {
                converged.push(slopes == symbolic);
                values.push(slopes.into_iter().map(Value::Exact).collect());
            }
            None => {
                let df: Vec<f64> = d.iter().map(Scalar::to_f64).collect();
                let at = |t: f64| -> Result<Vec<f64>> {
                    let x: Vec<f64> = df.iter().map(|v| v * t).collect();
                    Ok(f.evaluate(&x)?.into_iter().map(|y| y / t).collect())
                };
                let (near, far) = (at(2f64.powi(40))?, at(2f64.powi(50))?);
                let ok = near.iter().zip(&far).zip(&symbolic).all(|((a, b), s)| {
                    let s = s.to_f64();
                    (a - b).abs() <= RECESSION_TOL * b.abs().max(1.0) && (b - s).abs() <= RECESSION_TOL * s.abs().max(1.0)
                });
                converged.push(ok);
                values.push(far.into_iter().map(Value::Approx).collect());
            }
        }
    }
    Ok(RecessionEstimate { map, directions: directions.to_vec(), values, converged, homogeneous })
}

fn face_directions(norm: &PolyhedralNorm) -> Result<Vec<Vec<Rational>>> {
    Ok(norm.enumerate_proper_faces()?.into_iter().map(|f| f.representative).collect())
}

/// One-sided: `Surjective` when 0 is the only fixed point of `f∞`, never `NotSurjective`.
pub fn certify_via_recession(f: &MapExpr, norm: &PolyhedralNorm, opts: &CertifyOptions) -> Result<Certificate> {
    let note = gate_nonexpansive(f, norm, opts)?;
    let est = recession_map(f, &face_directions(norm)?, &opts.limits)?;
    if !est.all_converged() || !est.homogeneous {
        return Ok(Certificate::new(Verdict::Inconclusive, Method::Recession)
            .note("recession map estimate did not converge or is not homogeneous"));
    }
    let inner = face_limits_certificate(&est.map, norm, &opts.limits, Method::Recession)?;
    let verdict = match inner.verdict {
        Verdict::Surjective => Verdict::Surjective,
        Verdict::Inconclusive => Verdict::Inconclusive,
        _ => Verdict::SufficientOnly,
    };
    let mut cert = Certificate::new(verdict, Method::Recession).with_table(inner.limit_table);
    if verdict == Verdict::SufficientOnly {
        cert = cert.note("the recession map has nonzero fixed points; no conclusion about f");
    }
    Ok(match note {
        Some(n) => cert.note(n),
        None => cert,
    })
}

fn coordinate_pick(dim: usize, parts: Vec<(MapExpr, usize)>) -> MapExpr {
    debug_assert_eq!(parts.len(), dim);
    MapExpr::Stack { parts }
}

/// Active max-plus row pattern at `x`: entries attaining the row maximum become 0, others ⊥.
fn active_row(row: &[Option<Rational>], x: &[Rational]) -> (Rational, Vec<Option<Rational>>) {
    let vals: Vec<Option<Rational>> = row.iter().zip(x).map(|(a, v)| a.as_ref().map(|a| a + v)).collect();
    let best = vals.iter().flatten().max().cloned().expect("validated row has a finite entry");
    let pattern = vals.iter().map(|v| (v.as_ref() == Some(&best)).then(Rational::zero)).collect();
    (best, pattern)
}

/// Symbolic semiderivative `f'_u(x) = lim_{t→0⁺} (f(u + t x) - f(u)) / t`.
pub fn semiderivative(f: &MapExpr, u: &[Rational]) -> Result<MapExpr> {
    f.validate()?;
    if u.len() != f.in_dim() {
        return Err(Error::DimensionMismatch { expected: f.in_dim(), got: u.len() });
    }
    derivative_at(f, u)
}

fn derivative_at(f: &MapExpr, u: &[Rational]) -> Result<MapExpr> {
    let n = f.in_dim();
    Ok(match f {
        MapExpr::Identity { .. } | MapExpr::Permutation { .. } | MapExpr::SignFlip { .. } => f.clone(),
        MapExpr::Constant { value } => MapExpr::Constant { value: vec![Rational::zero(); value.len()] },
        MapExpr::Translate { shift } => MapExpr::identity(shift.len()),
        MapExpr::Affine { matrix, offset } => MapExpr::Affine {
            matrix: matrix.clone(),
            offset: vec![Rational::zero(); offset.len()],
        },
        MapExpr::Clip { dim, set } => {
            let parts = (0..*dim)
                .map(|i| {
                    let part = if !set.contains(i) || u[i].is_negative() {
                        MapExpr::Constant { value: vec![Rational::zero(); *dim] }
                    } else if u[i].is_positive() {
                        MapExpr::identity(*dim)
                    } else {
                        MapExpr::Clip { dim: *dim, set: NodeSet::singleton(i) }
                    };
                    (part, i)
                })
                .collect();
            coordinate_pick(*dim, parts)
        }
        MapExpr::MaxPlus { matrix } => MapExpr::MaxPlus {
            matrix: matrix.iter().map(|row| active_row(row, u).1).collect(),
        },
        MapExpr::MinMax { rows } => MapExpr::MinMax {
            rows: rows
                .iter()
                .map(|coordinate| {
                    let evaluated: Vec<(Rational, Vec<Option<Rational>>)> =
                        coordinate.iter().map(|row| active_row(row, u)).collect();
                    let least = evaluated.iter().map(|(v, _)| v).min().cloned().expect("nonempty");
                    evaluated.into_iter().filter(|(v, _)| *v == least).map(|(_, p)| p).collect()
                })
                .collect(),
        },
        MapExpr::ShrinkSqrt { dim, coord } => {
            let s = &u[*coord];
            let local = if *s < Rational::one() {
                MapExpr::Constant { value: vec![Rational::zero(); *dim] }
            } else if s.is_one() {
                MapExpr::Clip { dim: *dim, set: NodeSet::singleton(*coord) }.scaled(ratio(1, 2))
            } else {
                let root = s.try_sqrt().ok_or(Error::NotPiecewiseAffine)?;
                let slope = Rational::one() - Rational::one() / (int(2) * root);
                MapExpr::identity(*dim).scaled(slope)
            };
            coordinate_pick(
                *dim,
                (0..*dim)
                    .map(|i| if i == *coord { (local.clone(), i) } else { (MapExpr::identity(*dim), i) })
                    .collect(),
            )
        }
        MapExpr::Compose { outer, inner } => {
            let v = inner.evaluate_exact(u)?;
            MapExpr::compose(derivative_at(outer, &v)?, derivative_at(inner, u)?)
        }
        MapExpr::Max(a, b) | MapExpr::Min(a, b) => {
            let is_max = matches!(f, MapExpr::Max(..));
            let (va, vb) = (a.evaluate_exact(u)?, b.evaluate_exact(u)?);
            let (da, db) = (derivative_at(a, u)?, derivative_at(b, u)?);
            let tie = if is_max { MapExpr::max(da.clone(), db.clone()) } else { MapExpr::min(da.clone(), db.clone()) };
            let parts = va
                .iter()
                .zip(&vb)
                .enumerate()
                .map(|(i, (p, q))| {
                    let a_wins = if is_max { p > q } else { p < q };
                    let b_wins = if is_max { p < q } else { p > q };
                    let part = if a_wins {
                        da.clone()
                    } else if b_wins {
                        db.clone()
                    } else {
                        tie.clone()
                    };
                    (part, i)
                })
                .collect();
            MapExpr::Stack { parts }
        }
        MapExpr::ConvexCombination { weight, first, second } => {
            MapExpr::convex_combination(weight.clone(), derivative_at(first, u)?, derivative_at(second, u)?)
        }
        MapExpr::Stack { parts } => MapExpr::Stack {
            parts: parts.iter().map(|(p, c)| Ok((derivative_at(p, u)?, *c))).collect::<Result<_>>()?,
        },
        MapExpr::NormalizedTopical { inner } => {
            debug_assert_eq!(n + 1, inner.in_dim());
            MapExpr::NormalizedTopical { inner: Box::new(derivative_at(inner, &from_chart(u))?) }
        }
    })
}

/// One-sided: `Unique` when 0 is the only fixed point of `f'_u`.
pub fn certify_unique_via_semiderivative(
    f: &MapExpr,
    norm: &PolyhedralNorm,
    u: &[Rational],
    opts: &CertifyOptions,
) -> Result<Certificate> {
    gate_nonexpansive(f, norm, opts)?;
    if !f.is_pwa() {
        require_fixed_point_numeric(f, norm, u)?;
    } else {
        require_fixed_point(f, norm, u)?;
    }
    let d = match semiderivative(f, u) {
        Ok(d) => d,
        Err(Error::NotPiecewiseAffine) => {
            return Ok(Certificate::new(Verdict::Inconclusive, Method::Semiderivative)
                .note("semiderivative has an irrational slope"))
        }
        Err(e) => return Err(e),
    };
    if !homogeneous_on_samples(&d, norm, 32, opts.seed)? {
        return Ok(Certificate::new(Verdict::Inconclusive, Method::Semiderivative)
            .note("semiderivative failed the homogeneity check"));
    }
    let inner = certify_unique(&d, norm, &vec![Rational::zero(); u.len()], &CertifyOptions { accept_sampled: true, ..*opts })?;
    let verdict = match inner.verdict {
        Verdict::Unique => Verdict::Unique,
        Verdict::Inconclusive => Verdict::Inconclusive,
        _ => Verdict::SufficientOnly,
    };
    Ok(Certificate::new(verdict, Method::Semiderivative).with_slopes(inner.slope_table))
}

fn require_fixed_point_numeric(f: &MapExpr, norm: &PolyhedralNorm, u: &[Rational]) -> Result<()> {
    let uf: Vec<f64> = u.iter().map(Scalar::to_f64).collect();
    let fu = f.evaluate(&uf)?;
    let diff: Vec<f64> = fu.iter().zip(&uf).map(|(a, b)| a - b).collect();
    let r = norm.norm_value(&diff)?;
    if r > 1e-12 {
        return Err(Error::Precondition { what: "u is not a fixed point of f".into(), residual: r });
    }
    Ok(())
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Rational> {
    (0..dim).map(|_| ratio(rng.gen_range(-16..=16), rng.gen_range(1..=4))).collect()
}

/// `g(c x) = c g(x)` exactly on seeded samples.
fn homogeneous_on_samples(g: &MapExpr, norm: &PolyhedralNorm, samples: usize, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..samples {
        let x = random_point(&mut rng, norm.dim());
        let c = ratio(rng.gen_range(1..=9), rng.gen_range(1..=4));
        let cx: Vec<Rational> = x.iter().map(|v| v * &c).collect();
        let (gx, gcx) = (g.evaluate_exact(&x)?, g.evaluate_exact(&cx)?);
        if gx.iter().zip(&gcx).any(|(a, b)| a * &c != *b) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sample displacements `g(w) - w` until every vertex of `B₁` is illuminated.
pub fn illumination_check(g: &MapExpr, norm: &PolyhedralNorm, budget: usize, seed: u64) -> Result<Certificate> {
    check_square(g, norm)?;
    if !g.is_pwa() {
        return Err(Error::NotPiecewiseAffine);
    }
    if !g.flags().homogeneous && !homogeneous_on_samples(g, norm, 64, seed)? {
        return Err(Error::InvalidMap("illumination needs a positively homogeneous map".into()));
    }
    let vertices = norm.primal_vertices().to_vec();
    let mut lit = vec![false; vertices.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..budget {
        let w = if k < vertices.len() { vertices[k].clone() } else { random_point(&mut rng, norm.dim()) };
        let gw = g.evaluate_exact(&w)?;
        let v: Vec<Rational> = gw.iter().zip(&w).map(|(a, b)| a - b).collect();
        if v.iter().all(Zero::is_zero) {
            continue;
        }
        for (flag, e) in lit.iter_mut().zip(&vertices) {
            if !*flag && norm.illuminates(&v, e)? {
                *flag = true;
            }
        }
        if lit.iter().all(|f| *f) {
            return Ok(Certificate::new(Verdict::Unique, Method::Illumination)
                .note(format!("all {} vertices illuminated after {} samples", vertices.len(), k + 1)));
        }
    }
    let dark = lit.iter().filter(|f| !**f).count();
    Ok(Certificate::new(Verdict::Inconclusive, Method::Illumination)
        .note(format!("{dark} of {} vertices not illuminated within budget {budget}", vertices.len())))
}

/// `ĝ(F) = F_{g(x_F)}` for every proper face; `None` stands for `B₁` itself.
#[derive(Clone, Debug)]
pub struct FaceLatticeMap {
    pub faces: Vec<FaceDescriptor>,
    pub images: Vec<Option<usize>>,
}

impl FaceLatticeMap {
    fn below(&self, a: Option<usize>, b: Option<usize>) -> bool {
        match (a, b) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => self.faces[a].is_subface_of(&self.faces[b]),
        }
    }

    /// Comparable pairs `F ⊆ G` with `ĝ(F) ⊄ ĝ(G)`.
    pub fn order_violations(&self) -> Vec<(usize, usize)> {
        let m = self.faces.len();
        let mut out = Vec::new();
        for a in 0..m {
            for b in 0..m {
                if a != b && self.faces[a].is_subface_of(&self.faces[b]) && !self.below(self.images[a], self.images[b]) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Faces with `ĝ(F) ⊆ F`.
    pub fn invariant_candidates(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&k| self.below(self.images[k], Some(k))).collect()
    }
}

pub fn face_lattice_map(g: &MapExpr, norm: &PolyhedralNorm) -> Result<FaceLatticeMap> {
    check_square(g, norm)?;
    let faces = norm.enumerate_proper_faces()?;
    let index: HashMap<Vec<usize>, usize> = faces.iter().enumerate().map(|(k, f)| (f.active_set.clone(), k)).collect();
    let images = faces
        .iter()
        .map(|face| {
            let y = g.evaluate_exact(&face.representative)?;
            let r = norm.norm_value(&y)?;
            if r < Rational::one() {
                return Ok(None);
            }
            if r > Rational::one() {
                return Err(Error::ContractBreach(format!("‖g(x_F)‖ = {r} > 1 on face {}", face.name())));
            }
            let active = norm.active_set(&y)?;
            index
                .get(&active)
                .copied()
                .map(Some)
                .ok_or_else(|| Error::InvalidNorm(format!("no enumerated face has active set {active:?}")))
        })
        .collect::<Result<_>>()?;
    Ok(FaceLatticeMap { faces, images })
}

/// `NotUnique` with a confirmed invariant face, else `Unique`.
pub fn invariant_face_search(lattice: &FaceLatticeMap, g: &MapExpr, opts: &CertifyOptions) -> Result<Certificate> {
    let zero = vec![Rational::zero(); g.in_dim()];
    let mut slopes = Vec::new();
    for k in lattice.invariant_candidates() {
        let face = &lattice.faces[k];
        let p = restrict_to_ray_with(g, &zero, &face.representative, &face.dual_representative, &opts.limits.eval)?;
        let e = slope_entry(face.name(), &p)?;
        let confirmed = e.sign == InitialSign::ZeroOnInitialInterval;
        slopes.push(e);
        if confirmed {
            return Ok(Certificate::new(Verdict::NotUnique, Method::FaceLattice)
                .with_witness(Witness::InvariantFace { name: face.name(), face: face.clone() })
                .with_slopes(slopes));
        }
    }
    Ok(Certificate::new(Verdict::Unique, Method::FaceLattice).with_slopes(slopes))
}

/// Chart point of `V₀` for an ambient zero-sum vector, for variation-norm callers.
pub fn chart_point(x: &[Rational]) -> Result<Vec<Rational>> {
    to_chart(x)
}

/// Is the norm one of the builtin kinds with closed-form face labels?
pub fn is_builtin(norm: &PolyhedralNorm) -> bool {
    norm.kind() != NormKind::Custom
}
