//! JSON problem files and reports.
//!
//! Indices in files are one-based. Rationals are written as strings
//! (`"3"`, `"-1/2"`, `"0.25"`) or JSON integers; `"bot"` is `⊥` in max-plus
//! matrices. Unknown fields are rejected everywhere.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::certificate::Certificate;
use crate::certify::{
    certify_surjective, certify_unique, certify_unique_eigenvector, certify_unique_subtopical,
    certify_unique_via_semiderivative, certify_via_recession, illumination_check, CertifyOptions,
};
use crate::error::{Error, Result};
use crate::mapexpr::{normalize_topical, EvalContext, MapExpr, MaxPlusEntry};
use crate::oracle::CrossCheck;
use crate::polynorm::{NormKind, PolyhedralNorm};
use crate::raylimits::NumericPolicy;
use crate::scalar::{format_rational, parse_rational};
use crate::sets::NodeSet;
use crate::topical::{certify_subtopical, certify_topical, LimitOptions, TopicalMethod, TopicalOptions};
use crate::Rational;

pub const PROBLEM_SCHEMA: &str = "surjdisp.problem.v1";
pub const REPORT_SCHEMA: &str = "surjdisp.report.v1";

/// A rational in a file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rat(pub Rational);

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(v) => v.to_string(),
            Raw::Text(s) => s,
        };
        parse_rational(&text).map(Rat).map_err(serde::de::Error::custom)
    }
}

/// A max-plus entry: a rational or `"bot"`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry(pub MaxPlusEntry);

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.0 {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_str("bot"),
        }
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Entry(Some(Rational::from_integer(v.into())))),
            Raw::Text(s) if s.trim() == "bot" => Ok(Entry(None)),
            Raw::Text(s) => parse_rational(&s).map(|r| Entry(Some(r))).map_err(serde::de::Error::custom),
        }
    }
}

fn rats(v: &[Rational]) -> Vec<Rat> {
    v.iter().cloned().map(Rat).collect()
}

fn unrats(v: Vec<Rat>) -> Vec<Rational> {
    v.into_iter().map(|r| r.0).collect()
}

fn entries(rows: &[Vec<MaxPlusEntry>]) -> Vec<Vec<Entry>> {
    rows.iter().map(|r| r.iter().cloned().map(Entry).collect()).collect()
}

fn unentries(rows: Vec<Vec<Entry>>) -> Vec<Vec<MaxPlusEntry>> {
    rows.into_iter().map(|r| r.into_iter().map(|e| e.0).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NormSpec {
    Sup { n: usize },
    One { n: usize },
    /// Variation seminorm on `V₀ ⊂ ℝⁿ`; maps act on the `n - 1` chart coordinates.
    Variation { n: usize },
    Custom { dual_extreme_points: Vec<Vec<Rat>> },
}

impl NormSpec {
    pub fn build(&self) -> Result<PolyhedralNorm> {
        match self {
            NormSpec::Sup { n } => PolyhedralNorm::builtin(NormKind::Sup, *n),
            NormSpec::One { n } => PolyhedralNorm::builtin(NormKind::One, *n),
            NormSpec::Variation { n } => PolyhedralNorm::builtin(NormKind::Variation, *n),
            NormSpec::Custom { dual_extreme_points } => {
                PolyhedralNorm::custom(dual_extreme_points.iter().map(|p| unrats(p.clone())).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackPart {
    pub map: MapSpec,
    /// One-based output coordinate of `map`.
    pub coord: usize,
}

/// File form of [`MapExpr`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity { dim: usize },
    Constant { value: Vec<Rat> },
    /// `S(x)_i = x_{σ(i)}`, one-based.
    Permutation { sigma: Vec<usize> },
    SignFlip { dim: usize, set: NodeSet },
    Clip { dim: usize, set: NodeSet },
    Translate { shift: Vec<Rat> },
    Affine { matrix: Vec<Vec<Rat>>, offset: Vec<Rat> },
    MaxPlus { matrix: Vec<Vec<Entry>> },
    MinMax { rows: Vec<Vec<Vec<Entry>>> },
    ShrinkSqrt { dim: usize, coord: usize },
    /// Outermost first: `[f, g, h]` is `f ∘ g ∘ h`.
    Compose { maps: Vec<MapSpec> },
    Max { maps: Vec<MapSpec> },
    Min { maps: Vec<MapSpec> },
    ConvexCombination { weight: Rat, first: Box<MapSpec>, second: Box<MapSpec> },
    Stack { parts: Vec<StackPart> },
    NormalizedTopical { inner: Box<MapSpec> },
}

fn one_based(i: usize, n: usize, what: &str) -> Result<usize> {
    if i == 0 || i > n {
        return Err(Error::Parse(format!("{what} index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

fn fold(maps: Vec<MapSpec>, what: &str, join: fn(MapExpr, MapExpr) -> MapExpr) -> Result<MapExpr> {
    let mut it = maps.into_iter().map(MapSpec::into_expr);
    let first = it.next().ok_or_else(|| Error::Parse(format!("{what} needs at least one map")))??;
    it.try_fold(first, |acc, m| Ok(join(acc, m?)))
}

impl MapSpec {
    pub fn into_expr(self) -> Result<MapExpr> {
        Ok(match self {
            MapSpec::Identity { dim } => MapExpr::Identity { dim },
            MapSpec::Constant { value } => MapExpr::Constant { value: unrats(value) },
            MapSpec::Permutation { sigma } => {
                let n = sigma.len();
                MapExpr::Permutation {
                    sigma: sigma.into_iter().map(|i| one_based(i, n, "permutation")).collect::<Result<_>>()?,
                }
            }
            MapSpec::SignFlip { dim, set } => MapExpr::SignFlip { dim, set },
            MapSpec::Clip { dim, set } => MapExpr::Clip { dim, set },
            MapSpec::Translate { shift } => MapExpr::Translate { shift: unrats(shift) },
            MapSpec::Affine { matrix, offset } => {
                MapExpr::Affine { matrix: matrix.into_iter().map(unrats).collect(), offset: unrats(offset) }
            }
            MapSpec::MaxPlus { matrix } => MapExpr::MaxPlus { matrix: unentries(matrix) },
            MapSpec::MinMax { rows } => MapExpr::MinMax { rows: rows.into_iter().map(unentries).collect() },
            MapSpec::ShrinkSqrt { dim, coord } => MapExpr::ShrinkSqrt { dim, coord: one_based(coord, dim, "coordinate")? },
            MapSpec::Compose { maps } => {
                let exprs = maps.into_iter().map(MapSpec::into_expr).collect::<Result<Vec<_>>>()?;
                if exprs.is_empty() {
                    return Err(Error::Parse("compose needs at least one map".into()));
                }
                MapExpr::compose_all(exprs)
            }
            MapSpec::Max { maps } => fold(maps, "max", MapExpr::max)?,
            MapSpec::Min { maps } => fold(maps, "min", MapExpr::min)?,
            MapSpec::ConvexCombination { weight, first, second } => {
                MapExpr::convex_combination(weight.0, first.into_expr()?, second.into_expr()?)
            }
            MapSpec::Stack { parts } => MapExpr::Stack {
                parts: parts
                    .into_iter()
                    .map(|p| {
                        let m = p.map.into_expr()?;
                        let c = one_based(p.coord, m.out_dim(), "stack coordinate")?;
                        Ok((m, c))
                    })
                    .collect::<Result<_>>()?,
            },
            MapSpec::NormalizedTopical { inner } => MapExpr::NormalizedTopical { inner: Box::new(inner.into_expr()?) },
        })
    }

    pub fn from_expr(e: &MapExpr) -> MapSpec {
        match e {
            MapExpr::Identity { dim } => MapSpec::Identity { dim: *dim },
            MapExpr::Constant { value } => MapSpec::Constant { value: rats(value) },
            MapExpr::Permutation { sigma } => MapSpec::Permutation { sigma: sigma.iter().map(|i| i + 1).collect() },
            MapExpr::SignFlip { dim, set } => MapSpec::SignFlip { dim: *dim, set: *set },
            MapExpr::Clip { dim, set } => MapSpec::Clip { dim: *dim, set: *set },
            MapExpr::Translate { shift } => MapSpec::Translate { shift: rats(shift) },
            MapExpr::Affine { matrix, offset } => {
                MapSpec::Affine { matrix: matrix.iter().map(|r| rats(r)).collect(), offset: rats(offset) }
            }
            MapExpr::MaxPlus { matrix } => MapSpec::MaxPlus { matrix: entries(matrix) },
            MapExpr::MinMax { rows } => MapSpec::MinMax { rows: rows.iter().map(|r| entries(r)).collect() },
            MapExpr::ShrinkSqrt { dim, coord } => MapSpec::ShrinkSqrt { dim: *dim, coord: coord + 1 },
            MapExpr::Compose { outer, inner } => {
                MapSpec::Compose { maps: vec![MapSpec::from_expr(outer), MapSpec::from_expr(inner)] }
            }
            MapExpr::Max(a, b) => MapSpec::Max { maps: vec![MapSpec::from_expr(a), MapSpec::from_expr(b)] },
            MapExpr::Min(a, b) => MapSpec::Min { maps: vec![MapSpec::from_expr(a), MapSpec::from_expr(b)] },
            MapExpr::ConvexCombination { weight, first, second } => MapSpec::ConvexCombination {
                weight: Rat(weight.clone()),
                first: Box::new(MapSpec::from_expr(first)),
                second: Box::new(MapSpec::from_expr(second)),
            },
            MapExpr::Stack { parts } => MapSpec::Stack {
                parts: parts.iter().map(|(m, c)| StackPart { map: MapSpec::from_expr(m), coord: c + 1 }).collect(),
            },
            MapExpr::NormalizedTopical { inner } => {
                MapSpec::NormalizedTopical { inner: Box::new(MapSpec::from_expr(inner)) }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicalMethodSpec {
    Hypergraph,
    HypergraphReach,
    Convex,
    StronglyConnectedSufficient,
}

impl From<TopicalMethodSpec> for TopicalMethod {
    fn from(m: TopicalMethodSpec) -> Self {
        match m {
            TopicalMethodSpec::Hypergraph => TopicalMethod::Hypergraph,
            TopicalMethodSpec::HypergraphReach => TopicalMethod::HypergraphReach,
            TopicalMethodSpec::Convex => TopicalMethod::Convex,
            TopicalMethodSpec::StronglyConnectedSufficient => TopicalMethod::StronglyConnectedSufficient,
        }
    }
}

impl std::str::FromStr for TopicalMethodSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<TopicalMethod>()? {
            TopicalMethod::Hypergraph => TopicalMethodSpec::Hypergraph,
            TopicalMethod::HypergraphReach => TopicalMethodSpec::HypergraphReach,
            TopicalMethod::Convex => TopicalMethodSpec::Convex,
            TopicalMethod::StronglyConnectedSufficient => TopicalMethodSpec::StronglyConnectedSufficient,
        })
    }
}

fn default_budget() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Query {
    Surjective,
    /// `u` is a fixed point of the map.
    Unique { u: Vec<Rat> },
    /// `T(u) = u + λ e_N`.
    Eigenvector { u: Vec<Rat> },
    UniqueSubtopical { u: Vec<Rat> },
    Semiderivative { u: Vec<Rat> },
    Topical { method: TopicalMethodSpec },
    Subtopical,
    Recession,
    Illumination {
        #[serde(default = "default_budget")]
        budget: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// Overrides for the numeric limit policy and the exact piece budget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_doublings: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piece_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonexpansive_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_sampled: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: String,
    /// Defaults to the sup norm on the map's dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSpec>,
    pub map: MapSpec,
    pub query: Query,
    #[serde(default, skip_serializing_if = "is_default_policy")]
    pub policy: PolicySpec,
    #[serde(default)]
    pub seed: u64,
}

fn is_default_policy(p: &PolicySpec) -> bool {
    *p == PolicySpec::default()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if p.schema != PROBLEM_SCHEMA {
            return Err(Error::Parse(format!("unsupported schema {:?}, expected {PROBLEM_SCHEMA:?}", p.schema)));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn new(norm: Option<NormSpec>, map: &MapExpr, query: Query) -> Self {
        ProblemFile {
            schema: PROBLEM_SCHEMA.into(),
            norm,
            map: MapSpec::from_expr(map),
            query,
            policy: PolicySpec::default(),
            seed: 0,
        }
    }
}

/// Every threshold a run used, echoed into the report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub t0: f64,
    pub factor: f64,
    pub max_doublings: u32,
    pub divergence_bound: f64,
    pub slope_tol: f64,
    pub piece_cap: usize,
    pub nonexpansive_samples: usize,
    pub accept_sampled: bool,
    pub seed: u64,
}

impl Thresholds {
    pub fn resolve(p: &PolicySpec, seed: u64) -> Self {
        let d = NumericPolicy::default();
        let c = CertifyOptions::default();
        Thresholds {
            t0: p.t0.unwrap_or(d.t0),
            factor: p.factor.unwrap_or(d.factor),
            max_doublings: p.max_doublings.unwrap_or(d.max_doublings),
            divergence_bound: p.divergence_bound.unwrap_or(d.divergence_bound),
            slope_tol: p.slope_tol.unwrap_or(d.slope_tol),
            piece_cap: p.piece_cap.unwrap_or(EvalContext::default().piece_cap),
            nonexpansive_samples: p.nonexpansive_samples.unwrap_or(c.nonexpansive_samples),
            accept_sampled: p.accept_sampled.unwrap_or(c.accept_sampled),
            seed,
        }
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            limits: LimitOptions {
                policy: NumericPolicy {
                    t0: self.t0,
                    factor: self.factor,
                    max_doublings: self.max_doublings,
                    divergence_bound: self.divergence_bound,
                    slope_tol: self.slope_tol,
                },
                eval: EvalContext { piece_cap: self.piece_cap },
            },
            nonexpansive_samples: self.nonexpansive_samples,
            seed: self.seed,
            accept_sampled: self.accept_sampled,
        }
    }
}

/// A parsed problem ready to run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub norm: PolyhedralNorm,
    pub map: MapExpr,
    pub query: Query,
    pub thresholds: Thresholds,
}

impl Problem {
    pub fn from_file(p: &ProblemFile) -> Result<Self> {
        let map = p.map.clone().into_expr()?;
        map.validate()?;
        let norm = match &p.norm {
            Some(spec) => spec.build()?,
            None => PolyhedralNorm::builtin(NormKind::Sup, map.in_dim())?,
        };
        Ok(Problem { norm, map, query: p.query.clone(), thresholds: Thresholds::resolve(&p.policy, p.seed) })
    }

    pub fn run(&self) -> Result<Certificate> {
        let opts = self.thresholds.certify_options();
        let topical = TopicalOptions { limits: opts.limits, ..TopicalOptions::default() };
        let vec = |u: &[Rat]| unrats(u.to_vec());
        match &self.query {
            Query::Surjective => certify_surjective(&self.map, &self.norm, &opts),
            Query::Unique { u } => certify_unique(&self.map, &self.norm, &vec(u), &opts),
            Query::Eigenvector { u } => certify_unique_eigenvector(&self.map, &vec(u), &opts),
            Query::UniqueSubtopical { u } => certify_unique_subtopical(&self.map, &vec(u), &opts),
            Query::Semiderivative { u } => certify_unique_via_semiderivative(&self.map, &self.norm, &vec(u), &opts),
            Query::Topical { method } => certify_topical(&self.map, (*method).into(), &topical),
            Query::Subtopical => certify_subtopical(&self.map, &topical),
            Query::Recession => certify_via_recession(&self.map, &self.norm, &opts),
            Query::Illumination { budget, seed } => {
                illumination_check(&self.map, &self.norm, *budget, seed.unwrap_or(self.thresholds.seed))
            }
        }
    }

    /// The map and norm the oracle should probe, when the verdict speaks about one.
    ///
    /// Topical verdicts are about eigenvectors, so they are checked on the normalized map.
    pub fn oracle_target(&self) -> Result<Option<(MapExpr, PolyhedralNorm)>> {
        Ok(match &self.query {
            Query::Eigenvector { .. } => None,
            Query::Topical { .. } => Some((
                normalize_topical(&self.map)?,
                PolyhedralNorm::builtin(NormKind::Variation, self.map.in_dim())?,
            )),
            Query::Subtopical | Query::UniqueSubtopical { .. } => {
                Some((self.map.clone(), PolyhedralNorm::builtin(NormKind::Sup, self.map.in_dim())?))
            }
            _ => Some((self.map.clone(), self.norm.clone())),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub norm: NormKind,
    pub dim: usize,
    pub query: Query,
    #[serde(flatten)]
    pub certificate: Certificate,
    pub limit_count: usize,
    pub thresholds: Thresholds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<CrossCheck>,
}

impl Report {
    pub fn new(problem: &Problem, certificate: Certificate) -> Self {
        Report {
            schema: REPORT_SCHEMA,
            norm: problem.norm.kind(),
            dim: problem.norm.dim(),
            query: problem.query.clone(),
            limit_count: certificate.limit_table.len(),
            certificate,
            thresholds: problem.thresholds,
            oracle: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
