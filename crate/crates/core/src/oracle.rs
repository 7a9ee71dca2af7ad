//! Brute-force falsifiers for the certificates.
//!
//! Everything here runs in `f64` and is heuristic: a report can refute a
//! certificate, never prove one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::certificate::{Certificate, Sign, Verdict, Witness};
use crate::certify::face_limit;
use crate::error::{Error, Result};
use crate::mapexpr::MapExpr;
use crate::polynorm::{NormKind, PolyhedralNorm};
use crate::raylimits::Value;
use crate::scalar::Scalar;
use crate::topical::LimitOptions;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations compared by the plateau test.
    pub window: usize,
    /// Relative residual decrease over one window below which the residual has plateaued.
    pub plateau_rel: f64,
    /// Relative residual increase tolerated before nonexpansiveness is declared broken.
    pub growth_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { tol: 1e-8, max_iter: 100_000, window: 1000, plateau_rel: 1e-6, growth_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationVerdict {
    FixedPointFound { x: Vec<f64>, residual: f64 },
    /// Estimate of `inf ‖f(x) + u - x‖`.
    ResidualFloor { estimate: f64 },
    BudgetExhausted { residual: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// `(k, residual_k)` at `k = 0` and powers of two, plus the last iterate.
    pub history: Vec<(usize, f64)>,
    /// Largest `r_{k+1} - r_k` seen, scaled by `max(1, ‖x_k‖)`.
    pub max_relative_increase: f64,
    pub verdict: IterationVerdict,
    pub norm: NormKind,
    #[serde(skip)]
    pub last_iterate: Vec<f64>,
}

impl IterationReport {
    pub fn fixed_point(&self) -> Option<&[f64]> {
        match &self.verdict {
            IterationVerdict::FixedPointFound { x, .. } => Some(x),
            _ => None,
        }
    }

    pub fn floor(&self) -> Option<f64> {
        match self.verdict {
            IterationVerdict::ResidualFloor { estimate } => Some(estimate),
            _ => None,
        }
    }
}

fn residual_vec(f: &MapExpr, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let y = f.evaluate(x)?;
    Ok(y.iter().zip(u).zip(x).map(|((a, b), c)| a + b - c).collect())
}

/// Averaged iteration `x ← ½(x + f(x) + u)` from `start` (default `0`).
pub fn minimal_displacement_estimate(
    f: &MapExpr,
    u: &[f64],
    norm: &PolyhedralNorm,
    start: Option<&[f64]>,
    opts: &OracleOptions,
) -> Result<IterationReport> {
    let n = norm.dim();
    for got in [f.in_dim(), f.out_dim(), u.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let mut x = match start {
        Some(s) if s.len() != n => return Err(Error::DimensionMismatch { expected: n, got: s.len() }),
        Some(s) => s.to_vec(),
        None => vec![0.0; n],
    };
    let mut d = residual_vec(f, u, &x)?;
    let mut r = norm.norm_value(&d)?;
    let mut residuals = Vec::with_capacity(opts.max_iter.min(1 << 20) + 1);
    residuals.push(r);
    let mut history = vec![(0, r)];
    let mut max_inc = 0.0f64;
    let mut k = 0;
    let verdict = loop {
        if r <= opts.tol {
            break IterationVerdict::FixedPointFound { x: x.clone(), residual: r };
        }
        if k >= opts.window {
            let old = residuals[k - opts.window];
            if old - r <= opts.plateau_rel * old {
                break IterationVerdict::ResidualFloor { estimate: r };
            }
        }
        if k >= opts.max_iter {
            break IterationVerdict::BudgetExhausted { residual: r };
        }
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += 0.5 * di;
        }
        d = residual_vec(f, u, &x)?;
        let next = norm.norm_value(&d)?;
        if !next.is_finite() {
            return Err(Error::NotNonexpansive(format!("residual became {next} at iteration {}", k + 1)));
        }
        let scale = norm.norm_value(&x)?.max(1.0);
        let inc = (next - r) / scale;
        max_inc = max_inc.max(inc);
        if inc > opts.growth_tol {
            return Err(Error::NotNonexpansive(format!(
                "averaged residual grew from {r:e} to {next:e} at iteration {}",
                k + 1
            )));
        }
        r = next;
        k += 1;
        residuals.push(r);
        if k.is_power_of_two() {
            history.push((k, r));
        }
    };
    if history.last().map(|h| h.0) != Some(k) {
        history.push((k, r));
    }
    Ok(IterationReport {
        iterations: k,
        final_residual: r,
        history,
        max_relative_increase: max_inc,
        verdict,
        norm: norm.kind(),
        last_iterate: x,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOutcome {
    /// No point of `F_δ` was found at the largest radius probed; not a proof.
    BoundedUpTo { radius: f64 },
    UnboundedWitness { x: Vec<f64>, residual: f64 },
}

/// Looks for `x` with `‖x‖ ≥ R` and `‖f(x) - x‖ ≤ δ` along face-representative rays.
///
/// Only the largest radius of the schedule is probed, since only a hit there is a witness.
pub fn fdelta_boundedness_probe(f: &MapExpr, norm: &PolyhedralNorm, delta: f64, radii: &[f64]) -> Result<ProbeOutcome> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let max_r = radii.iter().copied().fold(0.0f64, f64::max);
    if max_r <= 0.0 {
        return Err(Error::InvalidArgument("radius schedule must contain a positive radius".into()));
    }
    let faces = norm.enumerate_proper_faces()?;
    let rays: Vec<Vec<f64>> = faces.iter().map(|face| face.representative.iter().map(Scalar::to_f64).collect()).collect();
    let zero = vec![0.0; norm.dim()];
    let hit = rays
        .par_iter()
        .map(|dir| -> Result<Option<(Vec<f64>, f64)>> {
            let x: Vec<f64> = dir.iter().map(|d| d * max_r).collect();
            let res = norm.norm_value(&residual_vec(f, &zero, &x)?)?;
            if res <= delta && norm.norm_value(&x)? >= max_r * (1.0 - 1e-12) {
                return Ok(Some((x, res)));
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .next();
    Ok(match hit {
        Some((x, residual)) => ProbeOutcome::UnboundedWitness { x, residual },
        None => ProbeOutcome::BoundedUpTo { radius: max_r },
    })
}

/// Uniform point of the sup-box `[-scale, scale]ⁿ`.
pub fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// Random shift with `‖u‖ ≤ radius` in the given norm.
pub fn random_shift(rng: &mut ChaCha8Rng, norm: &PolyhedralNorm, radius: f64) -> Result<Vec<f64>> {
    let z = random_point(rng, norm.dim(), 1.0);
    let nz = norm.norm_value(&z)?;
    if nz == 0.0 {
        return Ok(z);
    }
    let r = rng.gen_range(0.0..=radius);
    Ok(z.iter().map(|v| v * r / nz).collect())
}

/// Distinct fixed points of `f` reached from seeded random starts in `[-scale, scale]ⁿ`.
///
/// Points closer than `10·tol` are merged; the result is ordered by start index.
pub fn multistart_fixed_points(
    f: &MapExpr,
    norm: &PolyhedralNorm,
    starts: usize,
    seed: u64,
    scale: f64,
    opts: &OracleOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = norm.dim();
    let points: Vec<Vec<f64>> = (0..starts).map(|_| random_point(&mut rng, n, scale)).collect();
    let zero = vec![0.0; n];
    let polish = OracleOptions { tol: opts.tol * 1e-2, ..*opts };
    let found: Vec<Option<Vec<f64>>> = points
        .par_iter()
        .map(|s| {
            let rep = minimal_displacement_estimate(f, &zero, norm, Some(s), &polish)?;
            Ok((rep.final_residual <= opts.tol).then_some(rep.last_iterate))
        })
        .collect::<Result<_>>()?;
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for p in found.into_iter().flatten() {
        let dup = distinct.iter().any(|q| {
            let diff: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
            norm.norm_value(&diff).map_or(false, |d| d <= 10.0 * opts.tol)
        });
        if !dup {
            distinct.push(p);
        }
    }
    Ok(distinct)
}

fn value_f64(v: &Value) -> f64 {
    match v {
        Value::Exact(r) => r.to_f64(),
        Value::Approx(v) => *v,
    }
}

/// `(x_F, c)`: a unit vector and a finite limit `c` of `⟨f(t x_F) - t x_F, x_F*⟩`.
///
/// Read off the witness when it names a face or a subtopical subset;
/// otherwise the first proper face with a finite limit.
fn finite_face(f: &MapExpr, norm: &PolyhedralNorm, cert: &Certificate) -> Result<(Vec<f64>, f64)> {
    if let Some(face) = cert.failing_faces().first() {
        return Ok((face.face.representative.iter().map(Scalar::to_f64).collect(), value_f64(&face.value)));
    }
    if let Witness::SubsetLimit { subset, sign, value } = &cert.witness {
        // x = ±e_I, x* = ±e_I / |I| in the sup norm.
        let s = if *sign == Sign::Plus { 1.0 } else { -1.0 };
        let x = (0..norm.dim()).map(|i| if subset.contains(i) { s } else { 0.0 }).collect();
        return Ok((x, s * value_f64(value) / subset.len() as f64));
    }
    for face in norm.enumerate_proper_faces()? {
        let v = face_limit(f, &face, &LimitOptions::default())?;
        if let Some(c) = v.finite_value() {
            return Ok((face.representative.iter().map(Scalar::to_f64).collect(), value_f64(c)));
        }
    }
    Err(Error::InvalidArgument("no proper face has a finite limit".into()))
}

/// Shifts `u` for which `f + u` has no fixed point.
///
/// With limit value `c` along a face representative `x_F`,
/// `-u = (c - 1)·x_F + ε·z` lies in the avoided cone `W_{x_F} + c·x_F`
/// whenever `ε‖z‖ < 1`; here `ε‖z‖ ≤ ½`, so the displacement of `f + u` is
/// bounded below by `½`.
pub fn avoided_cone_shifts(
    f: &MapExpr,
    norm: &PolyhedralNorm,
    cert: &Certificate,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let (x, c) = finite_face(f, norm, cert)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z = random_shift(&mut rng, norm, 0.5)?;
            Ok(x.iter().zip(&z).map(|(xi, zi)| -((c - 1.0) * xi + zi)).collect())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    /// `None` when the oracle has nothing to say about this verdict.
    pub consistent: Option<bool>,
    pub summary: String,
    pub runs: Vec<IterationReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fixed_points: Vec<Vec<f64>>,
    pub options: OracleOptions,
}

/// Runs the oracle matching `cert.verdict`.
///
/// Surjective: ten random `u` with `‖u‖ ≤ 10` must all reach a fixed point.
/// NotSurjective: five avoided-cone shifts must all show a floor `≥ 10⁻³`.
/// Unique / NotUnique: multistart on `f` must find at most one / at least two fixed points.
pub fn cross_check(f: &MapExpr, norm: &PolyhedralNorm, cert: &Certificate, seed: u64, opts: &OracleOptions) -> Result<CrossCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CrossCheck { consistent: None, summary: String::new(), runs: Vec::new(), fixed_points: Vec::new(), options: *opts };
    match cert.verdict {
        Verdict::Surjective => {
            let shifts: Vec<Vec<f64>> = (0..10).map(|_| random_shift(&mut rng, norm, 10.0)).collect::<Result<_>>()?;
            out.runs = shifts
                .par_iter()
                .map(|u| minimal_displacement_estimate(f, u, norm, None, opts))
                .collect::<Result<_>>()?;
            let ok = out.runs.iter().filter(|r| r.fixed_point().is_some()).count();
            out.consistent = Some(ok == out.runs.len());
            out.summary = format!("{ok}/{} random shifts with ‖u‖ ≤ 10 reached a fixed point", out.runs.len());
        }
        Verdict::NotSurjective => {
            let shifts = avoided_cone_shifts(f, norm, cert, 5, seed)?;
            out.runs = shifts
                .par_iter()
                .map(|u| minimal_displacement_estimate(f, u, norm, None, opts))
                .collect::<Result<_>>()?;
            let ok = out.runs.iter().filter(|r| r.floor().is_some_and(|v| v >= 1e-3)).count();
            out.consistent = Some(ok == out.runs.len());
            out.summary = format!("{ok}/{} avoided-cone shifts showed a residual floor ≥ 1e-3", out.runs.len());
        }
        Verdict::Unique | Verdict::NotUnique => {
            out.fixed_points = multistart_fixed_points(f, norm, 32, seed, 10.0, opts)?;
            let k = out.fixed_points.len();
            out.consistent = Some(if cert.verdict == Verdict::Unique { k <= 1 } else { k >= 2 });
            out.summary = format!("multistart found {k} distinct fixed point(s) from 32 starts");
        }
        Verdict::SufficientOnly | Verdict::Inconclusive => {
            out.summary = format!("no oracle for verdict {}", cert.verdict);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cyclic_clip, midpoint_map, shrink_sqrt};
    use crate::scalar::int;
    use crate::sets::NodeSet;

    fn abs_map() -> MapExpr {
        MapExpr::max(MapExpr::identity(1), MapExpr::Affine { matrix: vec![vec![int(-1)]], offset: vec![int(0)] })
    }

    #[test]
    fn displacement_estimates() {
        let o = OracleOptions::default();
        let n1 = PolyhedralNorm::sup(1);
        let r = minimal_displacement_estimate(&MapExpr::constant(vec![int(0)]), &[3.0], &n1, None, &o).unwrap();
        assert!((r.fixed_point().unwrap()[0] - 3.0).abs() <= 1e-8 && r.final_residual <= 1e-8);
        let r = minimal_displacement_estimate(&abs_map(), &[1.0], &n1, None, &o).unwrap();
        assert!(r.floor().unwrap() >= 1.0 - 1e-12, "{:?}", r.verdict);
        let r = minimal_displacement_estimate(&shrink_sqrt(), &[-5.0], &n1, None, &o).unwrap();
        assert!(r.fixed_point().is_some(), "{:?}", r.verdict);
        let double = MapExpr::Affine { matrix: vec![vec![int(3)]], offset: vec![int(0)] };
        assert!(matches!(
            minimal_displacement_estimate(&double, &[1.0], &n1, None, &o),
            Err(Error::NotNonexpansive(_))
        ));
    }

    #[test]
    fn boundedness_probes() {
        let sup = PolyhedralNorm::sup(3);
        let radii = [1.0, 1e3, 1e6];
        assert!(matches!(
            fdelta_boundedness_probe(&MapExpr::identity(3), &sup, 0.1, &radii).unwrap(),
            ProbeOutcome::UnboundedWitness { .. }
        ));
        let f = cyclic_clip(3, NodeSet::singleton(0), NodeSet::singleton(1)).unwrap();
        match fdelta_boundedness_probe(&f, &sup, 0.1, &radii).unwrap() {
            ProbeOutcome::UnboundedWitness { x, .. } => assert_eq!(x, vec![1e6, -1e6, 0.0]),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            fdelta_boundedness_probe(&MapExpr::constant(vec![int(0); 3]), &sup, 0.1, &radii).unwrap(),
            ProbeOutcome::BoundedUpTo { radius: 1e6 }
        );
    }

    #[test]
    fn multistart() {
        let o = OracleOptions::default();
        let half = MapExpr::identity(2).scaled(crate::scalar::ratio(1, 2));
        assert_eq!(multistart_fixed_points(&half, &PolyhedralNorm::sup(2), 16, 1, 10.0, &o).unwrap().len(), 1);
        let f = cyclic_clip(3, NodeSet::singleton(0), NodeSet::singleton(1)).unwrap();
        assert!(multistart_fixed_points(&f, &PolyhedralNorm::sup(3), 16, 1, 10.0, &o).unwrap().len() >= 2);
        assert!(multistart_fixed_points(&midpoint_map(2), &PolyhedralNorm::sup(2), 16, 1, 10.0, &o).unwrap().len() >= 2);
    }
}
