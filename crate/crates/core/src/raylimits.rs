//! Limits of displacement pairings along rays.
//!
//! For a piecewise-affine map the pairing `g(t) = ⟨f(b + t d) - b - t d, π⟩`
//! is itself piecewise-affine in `t`, so it is computed exactly as a
//! [`PwaFunction1D`] by evaluating the expression tree on affine functions
//! of `t`. Limits at infinity and signs near `0⁺` are then read off the
//! last and first pieces. Non-piecewise-affine maps go through
//! [`classify_limit_numeric`], which may answer `Inconclusive`.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mapexpr::{EvalContext, Evaluable, MapExpr};
use crate::scalar::{format_rational, Scalar};
use crate::Rational;

/// A continuous piecewise-affine function on `[0, ∞)`.
///
/// Piece `k` is `slope · t + intercept` on `[breakpoints[k], breakpoints[k+1])`,
/// the last piece extending to infinity. `breakpoints[0] = 0` and adjacent
/// pieces are always distinct.
#[derive(Clone, Debug, PartialEq)]
pub struct PwaFunction1D<S> {
    breakpoints: Vec<S>,
    pieces: Vec<(S, S)>,
}

impl<S: Scalar> PwaFunction1D<S> {
    pub fn affine(slope: S, intercept: S) -> Self {
        PwaFunction1D { breakpoints: vec![S::zero()], pieces: vec![(slope, intercept)] }
    }

    pub fn constant(c: S) -> Self {
        Self::affine(S::zero(), c)
    }

    /// Builds from raw parts; rejects non-increasing breakpoints and discontinuities.
    pub fn from_parts(breakpoints: Vec<S>, pieces: Vec<(S, S)>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != pieces.len() || !breakpoints[0].is_zero() {
            return Err(Error::InvalidArgument("breakpoints must start at 0, one per piece".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("breakpoints must be increasing".into()));
        }
        let f = PwaFunction1D { breakpoints, pieces }.simplified();
        if S::EXACT && !f.is_continuous() {
            return Err(Error::InvalidArgument("function is discontinuous".into()));
        }
        Ok(f)
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[(S, S)] {
        &self.pieces
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    fn piece_index(&self, t: &S) -> usize {
        self.breakpoints.partition_point(|b| b <= t).saturating_sub(1)
    }

    pub fn value_at(&self, t: &S) -> S {
        let (s, i) = &self.pieces[self.piece_index(t)];
        s.clone() * t.clone() + i.clone()
    }

    pub fn first_slope(&self) -> &S {
        &self.pieces[0].0
    }

    pub fn final_slope(&self) -> &S {
        &self.pieces[self.pieces.len() - 1].0
    }

    /// Value of the last affine piece at its own start; the eventual value when the slope is zero.
    pub fn final_intercept(&self) -> &S {
        &self.pieces[self.pieces.len() - 1].1
    }

    pub fn is_continuous(&self) -> bool {
        (1..self.pieces.len()).all(|k| {
            let t = &self.breakpoints[k];
            let (a, b) = (&self.pieces[k - 1], &self.pieces[k]);
            a.0.clone() * t.clone() + a.1.clone() == b.0.clone() * t.clone() + b.1.clone()
        })
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.pieces.iter().all(|(s, _)| !s.is_positive())
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.pieces.iter().all(|(s, _)| !s.is_negative())
    }

    pub fn eventual(&self) -> Eventual {
        let s = self.final_slope();
        if s.is_negative() {
            Eventual::MinusInfinity
        } else if s.is_positive() {
            Eventual::PlusInfinity
        } else {
            Eventual::Finite
        }
    }

    fn simplified(mut self) -> Self {
        let mut bps = Vec::with_capacity(self.breakpoints.len());
        let mut pcs: Vec<(S, S)> = Vec::with_capacity(self.pieces.len());
        for (b, p) in self.breakpoints.drain(..).zip(self.pieces.drain(..)) {
            if pcs.last() == Some(&p) {
                continue;
            }
            bps.push(b);
            pcs.push(p);
        }
        PwaFunction1D { breakpoints: bps, pieces: pcs }
    }

    /// Common refinement of two breakpoint lists, with the piece of each function on every cell.
    fn refine<'a>(&'a self, other: &'a Self) -> Vec<(S, &'a (S, S), &'a (S, S))> {
        let mut out = Vec::with_capacity(self.pieces.len() + other.pieces.len());
        let (mut i, mut j) = (0, 0);
        loop {
            let start = S::max_of(self.breakpoints[i].clone(), other.breakpoints[j].clone());
            out.push((start, &self.pieces[i], &other.pieces[j]));
            let ni = self.breakpoints.get(i + 1);
            let nj = other.breakpoints.get(j + 1);
            match (ni, nj) {
                (None, None) => return out,
                (Some(_), None) => i += 1,
                (None, Some(_)) => j += 1,
                (Some(a), Some(b)) => {
                    if a < b {
                        i += 1;
                    } else if b < a {
                        j += 1;
                    } else {
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }

    fn check_cap(self, cap: usize) -> Result<Self> {
        if self.pieces.len() > cap {
            return Err(Error::ResourceLimit(format!(
                "ray function has {} pieces, cap is {cap}",
                self.pieces.len()
            )));
        }
        Ok(self)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (bps, pcs) = self
            .refine(other)
            .into_iter()
            .map(|(b, p, q)| (b, (p.0.clone() + q.0.clone(), p.1.clone() + q.1.clone())))
            .unzip();
        PwaFunction1D { breakpoints: bps, pieces: pcs }.simplified()
    }

    pub fn add_constant(&self, c: &S) -> Self {
        PwaFunction1D {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|(s, i)| (s.clone(), i.clone() + c.clone())).collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::constant(S::zero());
        }
        PwaFunction1D {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|(s, i)| (s.clone() * c.clone(), i.clone() * c.clone()))
                .collect(),
        }
    }

    /// Pointwise max (`take_max`) or min, splitting cells at exact crossings.
    fn extremum(&self, other: &Self, take_max: bool) -> Self {
        let cells = self.refine(other);
        let mut bps = Vec::with_capacity(cells.len() * 2);
        let mut pcs = Vec::with_capacity(cells.len() * 2);
        for (k, (start, p, q)) in cells.iter().enumerate() {
            let end = cells.get(k + 1).map(|c| c.0.clone());
            let ds = p.0.clone() - q.0.clone();
            let di = p.1.clone() - q.1.clone();
            let mut starts = vec![start.clone()];
            if !ds.is_zero() {
                let cross = -di.clone() / ds.clone();
                if cross > *start && end.as_ref().map_or(true, |e| cross < *e) {
                    starts.push(cross);
                }
            }
            for (m, s) in starts.iter().enumerate() {
                let probe = match starts.get(m + 1).or(end.as_ref()) {
                    Some(e) => (s.clone() + e.clone()) / S::from_i64(2),
                    None => s.clone() + S::one(),
                };
                let diff = ds.clone() * probe + di.clone();
                let p_wins = if take_max { !diff.is_negative() } else { !diff.is_positive() };
                bps.push(s.clone());
                pcs.push(if p_wins { (*p).clone() } else { (*q).clone() });
            }
        }
        PwaFunction1D { breakpoints: bps, pieces: pcs }.simplified()
    }

    pub fn max(&self, other: &Self) -> Self {
        self.extremum(other, true)
    }

    pub fn min(&self, other: &Self) -> Self {
        self.extremum(other, false)
    }
}

impl<S: Scalar> Evaluable for PwaFunction1D<S> {
    fn constant(c: &Rational) -> Self {
        PwaFunction1D::constant(S::from_rational(c))
    }
    fn add(&self, other: &Self, ctx: &EvalContext) -> Result<Self> {
        PwaFunction1D::add(self, other).check_cap(ctx.piece_cap)
    }
    fn add_const(&self, c: &Rational) -> Self {
        self.add_constant(&S::from_rational(c))
    }
    fn scale(&self, c: &Rational) -> Self {
        PwaFunction1D::scale(self, &S::from_rational(c))
    }
    fn max(&self, other: &Self, ctx: &EvalContext) -> Result<Self> {
        PwaFunction1D::max(self, other).check_cap(ctx.piece_cap)
    }
    fn min(&self, other: &Self, ctx: &EvalContext) -> Result<Self> {
        PwaFunction1D::min(self, other).check_cap(ctx.piece_cap)
    }
    fn shrink_sqrt(&self) -> Result<Self> {
        Err(Error::NotPiecewiseAffine)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Eventual {
    MinusInfinity,
    Finite,
    PlusInfinity,
}

/// Coordinates of `t ↦ f(base + t · direction)`, exactly.
pub fn restrict_map_to_ray(
    f: &MapExpr,
    base: &[Rational],
    direction: &[Rational],
    ctx: &EvalContext,
) -> Result<Vec<PwaFunction1D<Rational>>> {
    if !f.is_pwa() {
        return Err(Error::NotPiecewiseAffine);
    }
    if base.len() != direction.len() {
        return Err(Error::DimensionMismatch { expected: base.len(), got: direction.len() });
    }
    let ray: Vec<PwaFunction1D<Rational>> = base
        .iter()
        .zip(direction)
        .map(|(b, d)| PwaFunction1D::affine(d.clone(), b.clone()))
        .collect();
    f.evaluate_in(&ray, ctx)
}

/// `t ↦ ⟨f(base + t d) - base - t d, pairing⟩` as an exact piecewise-affine function.
pub fn restrict_to_ray(
    f: &MapExpr,
    base: &[Rational],
    direction: &[Rational],
    pairing: &[Rational],
) -> Result<PwaFunction1D<Rational>> {
    restrict_to_ray_with(f, base, direction, pairing, &EvalContext::default())
}

pub fn restrict_to_ray_with(
    f: &MapExpr,
    base: &[Rational],
    direction: &[Rational],
    pairing: &[Rational],
    ctx: &EvalContext,
) -> Result<PwaFunction1D<Rational>> {
    if pairing.len() != f.out_dim() {
        return Err(Error::DimensionMismatch { expected: f.out_dim(), got: pairing.len() });
    }
    if f.in_dim() != f.out_dim() {
        return Err(Error::InvalidMap("displacement needs a square map".into()));
    }
    let image = restrict_map_to_ray(f, base, direction, ctx)?;
    let mut g = PwaFunction1D::constant(Rational::zero());
    for (((fi, b), d), p) in image.iter().zip(base).zip(direction).zip(pairing) {
        if p.is_zero() {
            continue;
        }
        let term = fi.add(&PwaFunction1D::affine(-d.clone(), -b.clone())).scale(p);
        g = Evaluable::add(&g, &term, ctx)?;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    #[serde(serialize_with = "crate::scalar::ser::one")]
    Exact(Rational),
    Approx(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => r.to_f64(),
            Value::Approx(v) => *v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LimitOutcome {
    MinusInfinity,
    PlusInfinity,
    Finite { value: Value },
    Inconclusive { last_value: f64, last_slope: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitMode {
    Exact,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    #[serde(serialize_with = "crate::scalar::ser::one")]
    EventualSlope(Rational),
    SampledSlopes(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitVerdict {
    #[serde(flatten)]
    pub outcome: LimitOutcome,
    pub mode: LimitMode,
    pub evidence: Evidence,
}

impl LimitVerdict {
    pub fn is_minus_infinity(&self) -> bool {
        self.outcome == LimitOutcome::MinusInfinity
    }

    pub fn is_plus_infinity(&self) -> bool {
        self.outcome == LimitOutcome::PlusInfinity
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.outcome, LimitOutcome::Finite { .. })
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self.outcome, LimitOutcome::Inconclusive { .. })
    }

    pub fn finite_value(&self) -> Option<&Value> {
        match &self.outcome {
            LimitOutcome::Finite { value } => Some(value),
            _ => None,
        }
    }

    /// The verdict for `-g` given the verdict for `g`.
    pub fn negated(self) -> LimitVerdict {
        let outcome = match self.outcome {
            LimitOutcome::MinusInfinity => LimitOutcome::PlusInfinity,
            LimitOutcome::PlusInfinity => LimitOutcome::MinusInfinity,
            LimitOutcome::Finite { value: Value::Exact(r) } => LimitOutcome::Finite { value: Value::Exact(-r) },
            LimitOutcome::Finite { value: Value::Approx(v) } => LimitOutcome::Finite { value: Value::Approx(-v) },
            LimitOutcome::Inconclusive { last_value, last_slope } => LimitOutcome::Inconclusive {
                last_value: -last_value,
                last_slope: -last_slope,
            },
        };
        let evidence = match self.evidence {
            Evidence::EventualSlope(s) => Evidence::EventualSlope(-s),
            Evidence::SampledSlopes(v) => Evidence::SampledSlopes(v.into_iter().map(|s| -s).collect()),
        };
        LimitVerdict { outcome, mode: self.mode, evidence }
    }
}

/// Limit of any exact piecewise-affine function at infinity.
pub fn eventual_limit(g: &PwaFunction1D<Rational>) -> LimitVerdict {
    let outcome = match g.eventual() {
        Eventual::MinusInfinity => LimitOutcome::MinusInfinity,
        Eventual::PlusInfinity => LimitOutcome::PlusInfinity,
        Eventual::Finite => LimitOutcome::Finite { value: Value::Exact(g.final_intercept().clone()) },
    };
    LimitVerdict { outcome, mode: LimitMode::Exact, evidence: Evidence::EventualSlope(g.final_slope().clone()) }
}

/// Limit at infinity of a displacement pairing, which must be eventually nonincreasing.
pub fn classify_limit_at_infinity(g: &PwaFunction1D<Rational>) -> Result<LimitVerdict> {
    if g.final_slope().is_positive() {
        return Err(Error::ContractBreach(format!(
            "displacement pairing has eventual slope {} > 0",
            g.final_slope()
        )));
    }
    Ok(eventual_limit(g))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NumericPolicy {
    pub t0: f64,
    pub factor: f64,
    pub max_doublings: u32,
    pub divergence_bound: f64,
    pub slope_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy { t0: 1.0, factor: 2.0, max_doublings: 60, divergence_bound: 1e9, slope_tol: 1e-9 }
    }
}

/// Consecutive relatively-stable steps required before declaring a finite limit.
const STABLE_STEPS: usize = 3;
/// Consecutive negative secants required before declaring divergence.
const DIVERGING_STEPS: usize = 3;

/// Classifies `lim g(t)` for a sampled nonincreasing `g` on the geometric schedule.
pub fn classify_sampled<G>(mut g: G, policy: &NumericPolicy) -> Result<LimitVerdict>
where
    G: FnMut(f64) -> Result<f64>,
{
    let mut t = policy.t0;
    let mut prev = g(t)?;
    let mut slopes = Vec::new();
    let (mut stable, mut falling) = (0usize, 0usize);
    for _ in 0..policy.max_doublings {
        let next_t = t * policy.factor;
        let v = g(next_t)?;
        if !v.is_finite() {
            return Err(Error::ContractBreach(format!("non-finite pairing value at t = {next_t}")));
        }
        let allowance = policy.slope_tol * prev.abs().max(1.0) + 1e-12 * next_t;
        if v > prev + allowance {
            return Err(Error::ContractBreach(format!(
                "sampled pairing increases from {prev} to {v} at t = {next_t}"
            )));
        }
        let slope = (v - prev) / (next_t - t);
        slopes.push(slope);
        falling = if slope < 0.0 { falling + 1 } else { 0 };
        if v < -policy.divergence_bound && falling >= DIVERGING_STEPS {
            return Ok(LimitVerdict {
                outcome: LimitOutcome::MinusInfinity,
                mode: LimitMode::Numeric,
                evidence: Evidence::SampledSlopes(slopes),
            });
        }
        stable = if (v - prev).abs() <= policy.slope_tol * v.abs().max(1.0) { stable + 1 } else { 0 };
        if stable >= STABLE_STEPS {
            return Ok(LimitVerdict {
                outcome: LimitOutcome::Finite { value: Value::Approx(v) },
                mode: LimitMode::Numeric,
                evidence: Evidence::SampledSlopes(slopes),
            });
        }
        prev = v;
        t = next_t;
    }
    let last_slope = slopes.last().copied().unwrap_or(0.0);
    Ok(LimitVerdict {
        outcome: LimitOutcome::Inconclusive { last_value: prev, last_slope },
        mode: LimitMode::Numeric,
        evidence: Evidence::SampledSlopes(slopes),
    })
}

/// Floating pairing `⟨f(b + t d) - b - t d, π⟩`.
pub fn pairing_f64(f: &MapExpr, base: &[f64], direction: &[f64], pairing: &[f64], t: f64) -> Result<f64> {
    let x: Vec<f64> = base.iter().zip(direction).map(|(b, d)| b + t * d).collect();
    let y = f.evaluate(&x)?;
    Ok(y.iter().zip(&x).zip(pairing).map(|((a, b), p)| (a - b) * p).sum())
}

pub fn classify_limit_numeric(
    f: &MapExpr,
    base: &[Rational],
    direction: &[Rational],
    pairing: &[Rational],
    policy: &NumericPolicy,
) -> Result<LimitVerdict> {
    let (b, d, p): (Vec<f64>, Vec<f64>, Vec<f64>) = (
        base.iter().map(Scalar::to_f64).collect(),
        direction.iter().map(Scalar::to_f64).collect(),
        pairing.iter().map(Scalar::to_f64).collect(),
    );
    classify_sampled(|t| pairing_f64(f, &b, &d, &p, t), policy)
}

/// Sign of a nonincreasing `g` with `g(0) = 0` on small positive `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSign {
    NegativeForAllPositiveT,
    ZeroOnInitialInterval,
}

pub fn initial_sign(g: &PwaFunction1D<Rational>) -> Result<InitialSign> {
    let g0 = g.value_at(&Rational::zero());
    if !g0.is_zero() {
        return Err(Error::InvalidArgument(format!(
            "initial sign needs g(0) = 0, got {}",
            format_rational(&g0)
        )));
    }
    let s = g.first_slope();
    if s.is_positive() {
        return Err(Error::ContractBreach(format!("pairing has initial slope {s} > 0")));
    }
    Ok(if s.is_negative() { InitialSign::NegativeForAllPositiveT } else { InitialSign::ZeroOnInitialInterval })
}

impl PwaFunction1D<Rational> {
    /// Floating copy for plotting or numeric comparison.
    pub fn to_f64(&self) -> PwaFunction1D<f64> {
        PwaFunction1D {
            breakpoints: self.breakpoints.iter().map(Scalar::to_f64).collect(),
            pieces: self.pieces.iter().map(|(s, i)| (s.to_f64(), i.to_f64())).collect(),
        }
    }

    pub fn is_zero_function(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].0.is_zero() && self.pieces[0].1.is_zero()
    }

    /// The identity `t ↦ t`.
    pub fn identity() -> Self {
        PwaFunction1D::affine(Rational::one(), Rational::zero())
    }
}
