//! Verdicts with checkable witnesses and the full table of limits consulted.

use std::fmt;

use serde::Serialize;

use crate::polynorm::FaceDescriptor;
use crate::raylimits::{InitialSign, LimitVerdict, Value};
use crate::sets::NodeSet;
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Surjective,
    NotSurjective,
    Unique,
    NotUnique,
    SufficientOnly,
    Inconclusive,
}

impl Verdict {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Surjective | Verdict::Unique => 0,
            Verdict::NotSurjective | Verdict::NotUnique => 1,
            Verdict::SufficientOnly | Verdict::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FaceLimits,
    Subtopical,
    Hypergraph,
    HypergraphReach,
    Convex,
    StronglyConnectedSufficient,
    FaceInitialSlopes,
    SubtopicalInitialSlopes,
    EigenvectorInitialSlopes,
    Recession,
    Semiderivative,
    Illumination,
    FaceLattice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// A face whose limit is finite, with the value `c`.
///
/// The range of `f - id` misses the open cone `W_{x_F} + c · x_F`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailingFace {
    pub name: String,
    pub face: FaceDescriptor,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    None,
    FailingFaces { faces: Vec<FailingFace> },
    /// A subset `I` whose signed subtopical limit is finite.
    SubsetLimit { subset: NodeSet, sign: Sign, value: Value },
    /// Disjoint `(I, J)` with `⟨T(-t e_Iᶜ), e_I⟩` and `⟨T(t e_Jᶜ), e_J⟩` both finite.
    HypergraphPair { i: NodeSet, j: NodeSet, lower: LimitVerdict, upper: LimitVerdict },
    /// `J` with `⟨T(t e_Jᶜ), e_J⟩` finite and `reach(J, H⁻) ≠ N`.
    ReachFailure { j: NodeSet, reach: NodeSet, upper: Option<LimitVerdict> },
    FinalClasses { classes: Vec<NodeSet> },
    /// A face `G` with `rG` invariant for small `r`, based at the fixed point.
    InvariantFace { name: String, face: FaceDescriptor },
    /// Subtopical uniqueness failure: the signed ray along `e_I` has zero initial slope.
    SubsetRay { subset: NodeSet, sign: Sign },
    /// Eigenvector uniqueness failure for the disjoint pair `(I, J)`.
    EigenvectorPair { i: NodeSet, j: NodeSet },
    /// Nonzero fixed point of a homogeneous map found along a direction.
    FixedDirection {
        #[serde(serialize_with = "crate::scalar::ser::vec")]
        direction: Vec<Rational>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitEntry {
    pub key: String,
    #[serde(flatten)]
    pub verdict: LimitVerdict,
}

/// Initial slope of a ray pairing based at a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeEntry {
    pub key: String,
    #[serde(serialize_with = "crate::scalar::ser::one")]
    pub initial_slope: Rational,
    pub sign: InitialSign,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub method: Method,
    pub witness: Witness,
    pub limit_table: Vec<LimitEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub slope_table: Vec<SlopeEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(verdict: Verdict, method: Method) -> Self {
        Certificate {
            verdict,
            method,
            witness: Witness::None,
            limit_table: Vec::new(),
            slope_table: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = witness;
        self
    }

    pub fn with_table(mut self, table: Vec<LimitEntry>) -> Self {
        self.limit_table = table;
        self
    }

    pub fn with_slopes(mut self, slopes: Vec<SlopeEntry>) -> Self {
        self.slope_table = slopes;
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Failing faces of a surjectivity certificate, if any.
    pub fn failing_faces(&self) -> &[FailingFace] {
        match &self.witness {
            Witness::FailingFaces { faces } => faces,
            _ => &[],
        }
    }
}
