//! Polyhedral norms given by the extreme points of the dual unit ball.
//!
//! A norm is stored as the finite symmetric set `ext B₁*`, so that
//! `‖x‖ = max_ν ⟨x, ν⟩` and activity tests are exact rational one-liners.
//! Proper faces of the unit ball are enumerated in closed form for the
//! builtin kinds and from vertex/facet incidence for custom norms.
//!
//! The variation kind is the seminorm `max(x) - min(x)` restricted to the
//! zero-sum subspace `V₀ ⊂ ℝⁿ`, realized as a norm on the chart
//! `ℝⁿ⁻¹ → V₀`, `y ↦ (y₁, .., yₙ₋₁, -Σ y)`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{dot, int, Scalar};
use crate::sets::{NodeSet, MAX_NODES};
use crate::Rational;

/// Default dimension cap for incidence-based face enumeration.
pub const DEFAULT_CUSTOM_DIM_CAP: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sup,
    One,
    Variation,
    Custom,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Sup => "sup",
            NormKind::One => "one",
            NormKind::Variation => "variation",
            NormKind::Custom => "custom",
        })
    }
}

/// Combinatorial name of a face.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FaceLabel {
    /// `F_IJ = {x ∈ B₁ : x_i = 1 on I, x_j = -1 on J}`.
    Sup { plus: NodeSet, minus: NodeSet },
    /// Signed support: `conv({e_i : i ∈ plus} ∪ {-e_j : j ∈ minus})`.
    One { plus: NodeSet, minus: NodeSet },
    /// Points of the variation sphere attaining the top on `top` and the bottom on `bottom`.
    Variation { top: NodeSet, bottom: NodeSet },
}

impl fmt::Display for FaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaceLabel::Sup { plus, minus } => write!(f, "sup[I={plus},J={minus}]"),
            FaceLabel::One { plus, minus } => write!(f, "one[+{plus},-{minus}]"),
            FaceLabel::Variation { top, bottom } => write!(f, "var[I={top},J={bottom}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FaceDescriptor {
    /// Indices into the norm's dual extreme points that equal 1 on the face.
    pub active_set: Vec<usize>,
    /// Point of the relative interior (`‖x_F‖ = 1`).
    #[serde(serialize_with = "crate::scalar::ser::vec")]
    pub representative: Vec<Rational>,
    /// Centroid of the active dual extreme points (relative interior of `F*`).
    #[serde(serialize_with = "crate::scalar::ser::vec")]
    pub dual_representative: Vec<Rational>,
    pub label: Option<FaceLabel>,
}

impl FaceDescriptor {
    pub fn name(&self) -> String {
        match &self.label {
            Some(l) => l.to_string(),
            None => format!("face{:?}", self.active_set),
        }
    }

    /// `self ⊆ other` as faces, i.e. the active set of `other` is contained in ours.
    pub fn is_subface_of(&self, other: &FaceDescriptor) -> bool {
        other
            .active_set
            .iter()
            .all(|i| self.active_set.binary_search(i).is_ok())
    }
}

#[derive(Clone, Debug)]
pub struct PolyhedralNorm {
    kind: NormKind,
    /// Dimension of the space the norm lives on (the chart for variation).
    dim: usize,
    /// `n` of the ambient `ℝⁿ` for variation norms; equals `dim` otherwise.
    ambient: usize,
    dual: Vec<Vec<Rational>>,
    vertices: OnceLock<Vec<Vec<Rational>>>,
    dim_cap: usize,
}

impl PartialEq for PolyhedralNorm {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dim == other.dim && self.dual == other.dual
    }
}

fn unit(n: usize, i: usize, v: i64) -> Vec<Rational> {
    let mut e = vec![Rational::zero(); n];
    e[i] = int(v);
    e
}

fn ternary_pairs(n: usize) -> impl Iterator<Item = (NodeSet, NodeSet)> {
    let total = 3u64.pow(n as u32);
    (1..total).map(move |mut code| {
        let (mut plus, mut minus) = (NodeSet::EMPTY, NodeSet::EMPTY);
        for i in 0..n {
            match code % 3 {
                1 => plus.insert(i),
                2 => minus.insert(i),
                _ => {}
            }
            code /= 3;
        }
        (plus, minus)
    })
}

fn indicator(n: usize, s: NodeSet) -> Vec<Rational> {
    (0..n)
        .map(|i| if s.contains(i) { Rational::one() } else { Rational::zero() })
        .collect()
}

fn scale(v: &[Rational], c: &Rational) -> Vec<Rational> {
    v.iter().map(|x| x * c).collect()
}

fn sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn centroid(points: &[&Vec<Rational>], dim: usize) -> Vec<Rational> {
    let mut c = vec![Rational::zero(); dim];
    for p in points {
        for (ci, pi) in c.iter_mut().zip(p.iter()) {
            *ci += pi;
        }
    }
    let k = int(points.len() as i64);
    c.iter().map(|x| x / &k).collect()
}

impl PolyhedralNorm {
    pub fn builtin(kind: NormKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNorm("dimension must be positive".into()));
        }
        if n > MAX_NODES {
            return Err(Error::InvalidNorm(format!("dimension {n} exceeds {MAX_NODES}")));
        }
        let (dim, dual) = match kind {
            NormKind::Sup => {
                let dual = (0..n).flat_map(|i| [unit(n, i, 1), unit(n, i, -1)]).collect();
                (n, dual)
            }
            NormKind::One => {
                if n > 20 {
                    return Err(Error::ResourceLimit(format!("l1 norm with 2^{n} dual points")));
                }
                let dual = (0..1u64 << n)
                    .map(|k| {
                        (0..n)
                            .map(|i| if k >> (n - 1 - i) & 1 == 1 { int(-1) } else { int(1) })
                            .collect()
                    })
                    .collect();
                (n, dual)
            }
            NormKind::Variation => {
                if n < 2 {
                    return Err(Error::InvalidNorm("variation norm needs n >= 2".into()));
                }
                let mut dual = Vec::with_capacity(n * (n - 1));
                for i in 0..n {
                    for j in (0..n).filter(|&j| j != i) {
                        let mut nu = vec![Rational::zero(); n];
                        nu[i] = int(1);
                        nu[j] = int(-1);
                        dual.push(chart_functional(&nu));
                    }
                }
                (n - 1, dual)
            }
            NormKind::Custom => {
                return Err(Error::InvalidNorm("custom norms are built with PolyhedralNorm::custom".into()))
            }
        };
        Ok(PolyhedralNorm {
            kind,
            dim,
            ambient: n,
            dual,
            vertices: OnceLock::new(),
            dim_cap: DEFAULT_CUSTOM_DIM_CAP,
        })
    }

    pub fn sup(n: usize) -> Self {
        Self::builtin(NormKind::Sup, n).expect("valid dimension")
    }

    pub fn one(n: usize) -> Self {
        Self::builtin(NormKind::One, n).expect("valid dimension")
    }

    pub fn variation(n: usize) -> Self {
        Self::builtin(NormKind::Variation, n).expect("valid dimension")
    }

    pub fn custom(points: Vec<Vec<Rational>>) -> Result<Self> {
        Self::custom_with_cap(points, DEFAULT_CUSTOM_DIM_CAP)
    }

    /// Validates symmetry, positive definiteness and minimality of `points`.
    pub fn custom_with_cap(points: Vec<Vec<Rational>>, dim_cap: usize) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidNorm("no dual extreme points".into()))?;
        if dim == 0 {
            return Err(Error::InvalidNorm("dimension must be positive".into()));
        }
        if dim > dim_cap {
            return Err(Error::ResourceLimit(format!(
                "custom norm of dimension {dim} exceeds the enumeration cap {dim_cap}"
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        let distinct: BTreeSet<&Vec<Rational>> = points.iter().collect();
        if distinct.len() != points.len() {
            return Err(Error::InvalidNorm("duplicate dual extreme point".into()));
        }
        for p in &points {
            if p.iter().all(Zero::is_zero) {
                return Err(Error::InvalidNorm("zero dual point".into()));
            }
            let neg: Vec<Rational> = p.iter().map(|x| -x).collect();
            if !distinct.contains(&neg) {
                return Err(Error::InvalidNorm("dual points are not symmetric".into()));
            }
        }
        if linalg::rank(&points) < dim {
            return Err(Error::InvalidNorm("dual points do not span; norm is not definite".into()));
        }
        let norm = PolyhedralNorm {
            kind: NormKind::Custom,
            dim,
            ambient: dim,
            dual: points,
            vertices: OnceLock::new(),
            dim_cap,
        };
        let vertices = norm.compute_vertices();
        for (k, nu) in norm.dual.iter().enumerate() {
            let on_facet: Vec<Vec<Rational>> = vertices
                .iter()
                .filter(|v| dot(v, nu).is_one())
                .cloned()
                .collect();
            if linalg::rank(&on_facet) < dim {
                return Err(Error::InvalidNorm(format!(
                    "dual point #{k} is not an extreme point of the dual ball"
                )));
            }
        }
        let _ = norm.vertices.set(vertices);
        Ok(norm)
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` of `ℝⁿ`; for variation norms this is one more than [`dim`](Self::dim).
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dual_extreme_points(&self) -> &[Vec<Rational>] {
        &self.dual
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    pub fn norm_value<S: Scalar>(&self, x: &[S]) -> Result<S> {
        self.check_dim(x.len())?;
        Ok(self.norm_unchecked(x))
    }

    pub(crate) fn norm_unchecked<S: Scalar>(&self, x: &[S]) -> S {
        match self.kind {
            NormKind::Sup => x.iter().fold(S::zero(), |m, v| S::max_of(m, v.abs())),
            NormKind::One => x.iter().fold(S::zero(), |m, v| m + v.abs()),
            NormKind::Variation => {
                let tail = x.iter().fold(S::zero(), |s, v| s - v.clone());
                let (mut hi, mut lo) = (tail.clone(), tail);
                for v in x {
                    hi = S::max_of(hi, v.clone());
                    lo = S::min_of(lo, v.clone());
                }
                hi - lo
            }
            NormKind::Custom => self
                .dual
                .iter()
                .map(|nu| {
                    x.iter()
                        .zip(nu)
                        .fold(S::zero(), |acc, (a, b)| acc + a.clone() * S::from_rational(b))
                })
                .fold(S::zero(), S::max_of),
        }
    }

    /// `‖φ‖* = max over vertices v of B₁ of ⟨v, φ⟩`.
    pub fn dual_norm(&self, phi: &[Rational]) -> Result<Rational> {
        self.check_dim(phi.len())?;
        Ok(self
            .primal_vertices()
            .iter()
            .map(|v| dot(v, phi))
            .fold(Rational::zero(), |a, b| if b > a { b } else { a }))
    }

    /// Indices of dual extreme points attaining `‖x‖` at `x` (the support of `J(x/‖x‖)`).
    pub fn active_set(&self, x: &[Rational]) -> Result<Vec<usize>> {
        let norm = self.norm_value(x)?;
        if norm.is_zero() {
            return Ok(Vec::new());
        }
        Ok(self
            .dual
            .iter()
            .enumerate()
            .filter(|(_, nu)| dot(x, nu) == norm)
            .map(|(k, _)| k)
            .collect())
    }

    /// Extreme points of the unit ball `B₁`.
    pub fn primal_vertices(&self) -> &[Vec<Rational>] {
        self.vertices.get_or_init(|| self.compute_vertices())
    }

    fn compute_vertices(&self) -> Vec<Vec<Rational>> {
        let n = self.ambient;
        match self.kind {
            NormKind::Sup => (0..1u64 << n)
                .map(|k| {
                    (0..n)
                        .map(|i| if k >> (n - 1 - i) & 1 == 1 { int(-1) } else { int(1) })
                        .collect()
                })
                .collect(),
            NormKind::One => (0..n).flat_map(|i| [unit(n, i, 1), unit(n, i, -1)]).collect(),
            NormKind::Variation => NodeSet::proper_subsets(n)
                .map(|k| {
                    let shift = int(k.len() as i64) / int(n as i64);
                    let full: Vec<Rational> = indicator(n, k).iter().map(|x| x - &shift).collect();
                    full[..n - 1].to_vec()
                })
                .collect(),
            NormKind::Custom => self.vertices_by_incidence(),
        }
    }

    /// Vertices as feasible intersections of `dim` facet hyperplanes `⟨x, ν⟩ = 1`.
    fn vertices_by_incidence(&self) -> Vec<Vec<Rational>> {
        let d = self.dim;
        let m = self.dual.len();
        let mut found: BTreeSet<Vec<Rational>> = BTreeSet::new();
        let mut idx: Vec<usize> = (0..d).collect();
        let ones = vec![Rational::one(); d];
        loop {
            let rows: Vec<Vec<Rational>> = idx.iter().map(|&k| self.dual[k].clone()).collect();
            if let Some(x) = linalg::solve(&rows, &ones) {
                if self.dual.iter().all(|nu| dot(&x, nu) <= Rational::one()) {
                    found.insert(x);
                }
            }
            // next d-combination of 0..m
            let mut i = d;
            loop {
                if i == 0 {
                    return found.into_iter().collect();
                }
                i -= 1;
                if idx[i] != i + m - d {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..d {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    /// Every proper face of `B₁` exactly once, with relative-interior representatives.
    pub fn enumerate_proper_faces(&self) -> Result<Vec<FaceDescriptor>> {
        let n = self.ambient;
        match self.kind {
            NormKind::Sup => Ok(ternary_pairs(n)
                .map(|(plus, minus)| {
                    let active = plus
                        .iter()
                        .map(|i| 2 * i)
                        .chain(minus.iter().map(|j| 2 * j + 1))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let rep = sub(&indicator(n, plus), &indicator(n, minus));
                    let k = int((plus.len() + minus.len()) as i64);
                    let dual_rep = rep.iter().map(|x| x / &k).collect();
                    FaceDescriptor {
                        active_set: active,
                        representative: rep,
                        dual_representative: dual_rep,
                        label: Some(FaceLabel::Sup { plus, minus }),
                    }
                })
                .collect()),
            NormKind::One => Ok(ternary_pairs(n)
                .map(|(plus, minus)| {
                    let dual_rep = sub(&indicator(n, plus), &indicator(n, minus));
                    let k = int((plus.len() + minus.len()) as i64);
                    let rep = dual_rep.iter().map(|x| x / &k).collect();
                    let active = self
                        .dual
                        .iter()
                        .enumerate()
                        .filter(|(_, nu)| {
                            plus.iter().all(|i| nu[i].is_positive())
                                && minus.iter().all(|j| nu[j].is_negative())
                        })
                        .map(|(k, _)| k)
                        .collect();
                    FaceDescriptor {
                        active_set: active,
                        representative: rep,
                        dual_representative: dual_rep,
                        label: Some(FaceLabel::One { plus, minus }),
                    }
                })
                .collect()),
            NormKind::Variation => Ok(ternary_pairs(n)
                .filter(|(top, bottom)| !top.is_empty() && !bottom.is_empty())
                .map(|(top, bottom)| self.variation_face(top, bottom))
                .collect()),
            NormKind::Custom => self.enumerate_faces_by_incidence(),
        }
    }

    fn variation_face(&self, top: NodeSet, bottom: NodeSet) -> FaceDescriptor {
        let n = self.ambient;
        let free = top.union(bottom).complement(n);
        let half = Rational::new(1.into(), 2.into());
        // centroid of the vertices e_K - |K|/n e_N with top ⊆ K ⊆ bottomᶜ
        let mean_size = int(top.len() as i64) + int(free.len() as i64) * &half;
        let shift = mean_size / int(n as i64);
        let full: Vec<Rational> = (0..n)
            .map(|i| {
                let base = if top.contains(i) {
                    Rational::one()
                } else if free.contains(i) {
                    half.clone()
                } else {
                    Rational::zero()
                };
                base - &shift
            })
            .collect();
        let dual_full = sub(
            &scale(&indicator(n, top), &(Rational::one() / int(top.len() as i64))),
            &scale(&indicator(n, bottom), &(Rational::one() / int(bottom.len() as i64))),
        );
        let active = top
            .iter()
            .flat_map(|i| bottom.iter().map(move |j| i * (n - 1) + if j < i { j } else { j - 1 }))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        FaceDescriptor {
            active_set: active,
            representative: full[..n - 1].to_vec(),
            dual_representative: chart_functional(&dual_full),
            label: Some(FaceLabel::Variation { top, bottom }),
        }
    }

    /// Enumerates faces as nonempty intersections of facets, using only the
    /// dual points and the vertex list. Works for every kind.
    pub fn enumerate_faces_by_incidence(&self) -> Result<Vec<FaceDescriptor>> {
        if self.dim > self.dim_cap {
            return Err(Error::ResourceLimit(format!(
                "incidence enumeration in dimension {} exceeds cap {}",
                self.dim, self.dim_cap
            )));
        }
        let vertices = self.primal_vertices();
        let facets: Vec<BTreeSet<usize>> = self
            .dual
            .iter()
            .map(|nu| {
                vertices
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| dot(v, nu).is_one())
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        let mut faces: BTreeSet<BTreeSet<usize>> = facets.iter().cloned().collect();
        let mut frontier: Vec<BTreeSet<usize>> = faces.iter().cloned().collect();
        while let Some(face) = frontier.pop() {
            for facet in &facets {
                let meet: BTreeSet<usize> = face.intersection(facet).copied().collect();
                if !meet.is_empty() && !faces.contains(&meet) {
                    faces.insert(meet.clone());
                    frontier.push(meet);
                }
            }
        }
        let mut out: Vec<FaceDescriptor> = faces
            .into_iter()
            .map(|vs| {
                let pts: Vec<&Vec<Rational>> = vs.iter().map(|&k| &vertices[k]).collect();
                let active: Vec<usize> = self
                    .dual
                    .iter()
                    .enumerate()
                    .filter(|(_, nu)| pts.iter().all(|v| dot(v, nu).is_one()))
                    .map(|(k, _)| k)
                    .collect();
                let active_pts: Vec<&Vec<Rational>> = active.iter().map(|&k| &self.dual[k]).collect();
                FaceDescriptor {
                    representative: centroid(&pts, self.dim),
                    dual_representative: centroid(&active_pts, self.dim),
                    active_set: active,
                    label: None,
                }
            })
            .collect();
        out.sort_by(|a, b| a.active_set.cmp(&b.active_set));
        Ok(out)
    }

    /// Vertices of `B₁` lying on `face`.
    pub fn face_vertices(&self, face: &FaceDescriptor) -> Vec<Vec<Rational>> {
        self.primal_vertices()
            .iter()
            .filter(|v| face.active_set.iter().all(|&k| dot(v, &self.dual[k]).is_one()))
            .cloned()
            .collect()
    }

    /// `c = max ⟨x_F, ν⟩` over the inactive dual points; `c < 1` certifies `x_F ∈ ri F`.
    pub fn interior_gap(&self, face: &FaceDescriptor) -> Rational {
        self.dual
            .iter()
            .enumerate()
            .filter(|(k, _)| face.active_set.binary_search(k).is_err())
            .map(|(_, nu)| dot(&face.representative, nu))
            .reduce(|a, b| if b > a { b } else { a })
            .unwrap_or_else(|| int(-1))
    }

    /// Does `v` illuminate the boundary point `w`, i.e. `‖w + εv‖ < 1` for small `ε > 0`?
    pub fn illuminates(&self, v: &[Rational], w: &[Rational]) -> Result<bool> {
        self.check_dim(v.len())?;
        if !self.norm_value(w)?.is_one() {
            return Err(Error::InvalidArgument("illumination needs a point with ‖w‖ = 1".into()));
        }
        Ok(self
            .dual
            .iter()
            .filter(|nu| dot(w, nu).is_one())
            .all(|nu| dot(v, nu).is_negative()))
    }

    /// Operator norm of a square matrix: `max ‖A v‖` over vertices `v` of `B₁`.
    pub fn operator_norm(&self, matrix: &[Vec<Rational>]) -> Result<Rational> {
        self.check_dim(matrix.len())?;
        let mut best = Rational::zero();
        for v in self.primal_vertices() {
            let image: Vec<Rational> = matrix
                .iter()
                .map(|row| {
                    self.check_dim(row.len())?;
                    Ok(dot(row, v))
                })
                .collect::<Result<_>>()?;
            let nv = self.norm_unchecked(&image);
            if nv > best {
                best = nv;
            }
        }
        Ok(best)
    }
}

/// Chart coordinates of a zero-sum vector of `ℝⁿ` (drops the last entry).
pub fn to_chart<S: Scalar>(x: &[S]) -> Result<Vec<S>> {
    if x.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if S::EXACT && !x.iter().fold(S::zero(), |s, v| s + v.clone()).is_zero() {
        return Err(Error::InvalidArgument("vector is not in the zero-sum subspace".into()));
    }
    Ok(x[..x.len() - 1].to_vec())
}

/// The zero-sum vector of `ℝⁿ` with chart coordinates `y`.
pub fn from_chart<S: Scalar>(y: &[S]) -> Vec<S> {
    let mut x = y.to_vec();
    x.push(y.iter().fold(S::zero(), |s, v| s - v.clone()));
    x
}

/// A functional `ν` on `ℝⁿ` restricted to `V₀`, in chart coordinates: `c_k = ν_k - ν_n`.
pub fn chart_functional<S: Scalar>(nu: &[S]) -> Vec<S> {
    let last = nu[nu.len() - 1].clone();
    nu[..nu.len() - 1].iter().map(|v| v.clone() - last.clone()).collect()
}
