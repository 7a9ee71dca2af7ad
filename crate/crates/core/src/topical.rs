//! Order-preserving maps: coordinate limits, `G∞(T)`, the lazy hypergraphs
//! `H±∞(T)`, reach, final classes, and the specialized surjectivity tests.
//!
//! Hypergraphs are never materialized. A [`HypergraphQuery`] answers single
//! hyperarc questions `(J, {i})` on demand and remembers every answer, so
//! the number of distinct coordinate limits consulted is observable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::certificate::{Certificate, LimitEntry, Method, Sign, Verdict, Witness};
use crate::error::{Error, Result};
use crate::mapexpr::{EvalContext, MapExpr};
use crate::raylimits::{
    classify_limit_at_infinity, classify_sampled, restrict_map_to_ray, LimitOutcome, LimitVerdict,
    NumericPolicy,
};
use crate::scalar::{int, Scalar};
use crate::sets::{NodeSet, MAX_NODES};
use crate::Rational;

/// Exact evaluation budget plus the numeric fallback policy.
#[derive(Clone, Copy, Debug, Default)]
pub struct LimitOptions {
    pub policy: NumericPolicy,
    pub eval: EvalContext,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Monotone {
    Nonincreasing,
    Nondecreasing,
}

/// `lim_{t→∞} Σ wᵢ Tᵢ(base + t·d) + extra_slope · t`, for a function known to be monotone.
pub(crate) fn monotone_ray_limit(
    t: &MapExpr,
    base: &[Rational],
    direction: &[Rational],
    weights: &[Rational],
    extra_slope: &Rational,
    monotone: Monotone,
    opts: &LimitOptions,
) -> Result<LimitVerdict> {
    if t.is_pwa() {
        match restrict_map_to_ray(t, base, direction, &opts.eval) {
            Ok(coords) => {
                let mut g = crate::ExactPwa::affine(extra_slope.clone(), Rational::zero());
                for (c, w) in coords.iter().zip(weights) {
                    if !w.is_zero() {
                        g = g.add(&c.scale(w));
                    }
                }
                return match monotone {
                    Monotone::Nonincreasing => classify_limit_at_infinity(&g),
                    Monotone::Nondecreasing => {
                        Ok(classify_limit_at_infinity(&g.scale(&int(-1)))
                            .map_err(|_| {
                                Error::ContractBreach(format!(
                                    "monotone coordinate limit has eventual slope {} < 0",
                                    g.final_slope()
                                ))
                            })?
                            .negated())
                    }
                };
            }
            Err(Error::ResourceLimit(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let b: Vec<f64> = base.iter().map(Scalar::to_f64).collect();
    let d: Vec<f64> = direction.iter().map(Scalar::to_f64).collect();
    let w: Vec<f64> = weights.iter().map(Scalar::to_f64).collect();
    let extra = extra_slope.to_f64();
    let sign = if monotone == Monotone::Nonincreasing { 1.0 } else { -1.0 };
    let verdict = classify_sampled(
        |s| {
            let x: Vec<f64> = b.iter().zip(&d).map(|(bi, di)| bi + s * di).collect();
            let y = t.evaluate(&x)?;
            let v: f64 = y.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + extra * s;
            Ok(sign * v)
        },
        &opts.policy,
    )?;
    Ok(if sign < 0.0 { verdict.negated() } else { verdict })
}

fn indicator(n: usize, set: NodeSet, value: i64) -> Vec<Rational> {
    (0..n).map(|i| if set.contains(i) { int(value) } else { Rational::zero() }).collect()
}

/// `lim Tᵢ(t e_J)` (plus) or `lim Tᵢ(-t e_J)` (minus).
pub fn coordinate_limit(t: &MapExpr, sign: Sign, j: NodeSet, i: usize, opts: &LimitOptions) -> Result<LimitVerdict> {
    let n = t.in_dim();
    if i >= n || !j.is_subset(NodeSet::full(n)) {
        return Err(Error::InvalidArgument(format!("node {} or set {j} outside 1..={n}", i + 1)));
    }
    let (dir, mono) = match sign {
        Sign::Plus => (indicator(n, j, 1), Monotone::Nondecreasing),
        Sign::Minus => (indicator(n, j, -1), Monotone::Nonincreasing),
    };
    let mut w = vec![Rational::zero(); n];
    w[i] = Rational::one();
    monotone_ray_limit(t, &vec![Rational::zero(); n], &dir, &w, &Rational::zero(), mono, opts)
}

/// `lim ⟨T(-t e_Iᶜ), e_I⟩`; `-∞` iff `Iᶜ` is not invariant in `H⁻∞(T)`.
pub fn lower_limit(t: &MapExpr, i: NodeSet, opts: &LimitOptions) -> Result<LimitVerdict> {
    let n = t.in_dim();
    let dir = indicator(n, i.complement(n), -1);
    let w = indicator(n, i, 1);
    monotone_ray_limit(t, &vec![Rational::zero(); n], &dir, &w, &Rational::zero(), Monotone::Nonincreasing, opts)
}

/// `lim ⟨T(t e_Jᶜ), e_J⟩`; `+∞` iff `Jᶜ` is not invariant in `H⁺∞(T)`.
pub fn upper_limit(t: &MapExpr, j: NodeSet, opts: &LimitOptions) -> Result<LimitVerdict> {
    let n = t.in_dim();
    let dir = indicator(n, j.complement(n), 1);
    let w = indicator(n, j, 1);
    monotone_ray_limit(t, &vec![Rational::zero(); n], &dir, &w, &Rational::zero(), Monotone::Nondecreasing, opts)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    succ: Vec<NodeSet>,
}

impl DirectedGraph {
    pub fn new(n: usize) -> Self {
        DirectedGraph { n, succ: vec![NodeSet::EMPTY; n] }
    }

    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut g = DirectedGraph::new(n);
        for &(i, j) in arcs {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("arc ({i}, {j}) outside {n} nodes")));
            }
            g.add_arc(i, j);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn add_arc(&mut self, i: usize, j: usize) {
        self.succ[i].insert(j);
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.succ[i].contains(j)
    }

    pub fn successors(&self, i: usize) -> NodeSet {
        self.succ[i]
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        (0..self.n).flat_map(|i| self.succ[i].iter().map(move |j| (i, j))).collect()
    }

    /// Nodes reachable from `i` by a path of length ≥ 0.
    fn reachable(&self, i: usize) -> NodeSet {
        let mut seen = NodeSet::singleton(i);
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            for w in self.succ[v].iter() {
                if !seen.contains(w) {
                    seen.insert(w);
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Strongly connected components, sorted by least node.
    pub fn strongly_connected_components(&self) -> Vec<NodeSet> {
        let reach: Vec<NodeSet> = (0..self.n).map(|i| self.reachable(i)).collect();
        let mut assigned = NodeSet::EMPTY;
        let mut out = Vec::new();
        for i in 0..self.n {
            if assigned.contains(i) {
                continue;
            }
            let comp = NodeSet::from_indices(reach[i].iter().filter(|&j| reach[j].contains(i)));
            assigned = assigned.union(comp);
            out.push(comp);
        }
        out
    }

    /// Components with no arc leaving them, sorted by least node.
    pub fn final_classes(&self) -> Vec<NodeSet> {
        self.strongly_connected_components()
            .into_iter()
            .filter(|c| c.iter().all(|i| self.succ[i].is_subset(*c)))
            .collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.n > 0 && self.reachable(0) == NodeSet::full(self.n) && (0..self.n).all(|i| self.reachable(i).contains(0))
    }

    /// No arc from `set` leaves it.
    pub fn is_invariant(&self, set: NodeSet) -> bool {
        set.iter().all(|i| self.succ[i].is_subset(set))
    }

    /// Graphviz text with one-based node labels.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph {name} {{\n");
        for i in 0..self.n {
            let _ = writeln!(s, "  n{} [label=\"{}\"];", i + 1, i + 1);
        }
        for (i, j) in self.arcs() {
            let _ = writeln!(s, "  n{} -> n{};", i + 1, j + 1);
        }
        s.push_str("}\n");
        s
    }
}

/// `final_classes` as a free function.
pub fn final_classes(g: &DirectedGraph) -> Vec<NodeSet> {
    g.final_classes()
}

/// Lazily queried `H⁺∞(T)` or `H⁻∞(T)`.
pub struct HypergraphQuery<'a> {
    map: &'a MapExpr,
    sign: Sign,
    opts: LimitOptions,
    memo: Mutex<BTreeMap<(NodeSet, usize), LimitVerdict>>,
}

impl<'a> HypergraphQuery<'a> {
    pub fn new(map: &'a MapExpr, sign: Sign, opts: LimitOptions) -> Result<Self> {
        if map.in_dim() != map.out_dim() || map.in_dim() > MAX_NODES {
            return Err(Error::InvalidMap("hypergraph queries need a square map on at most 63 nodes".into()));
        }
        Ok(HypergraphQuery { map, sign, opts, memo: Mutex::new(BTreeMap::new()) })
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn node_count(&self) -> usize {
        self.map.in_dim()
    }

    /// The memoized coordinate limit behind `(J, {i})`; `i ∈ J` is allowed (used for `G∞`).
    pub fn limit(&self, j: NodeSet, i: usize) -> Result<LimitVerdict> {
        if let Some(v) = self.memo.lock().expect("memo lock").get(&(j, i)) {
            return Ok(v.clone());
        }
        let v = coordinate_limit(self.map, self.sign, j, i, &self.opts)?;
        self.memo.lock().expect("memo lock").insert((j, i), v.clone());
        Ok(v)
    }

    /// Does `lim Tᵢ(±t e_J) = ±∞` hold?
    pub fn diverges(&self, j: NodeSet, i: usize) -> Result<bool> {
        let v = self.limit(j, i)?;
        match (&v.outcome, self.sign) {
            (LimitOutcome::PlusInfinity, Sign::Plus) | (LimitOutcome::MinusInfinity, Sign::Minus) => Ok(true),
            (LimitOutcome::Finite { .. }, _) => Ok(false),
            (LimitOutcome::Inconclusive { .. }, _) => Err(Error::Inconclusive(format!(
                "coordinate limit {} of T_{}(t e_J) for J = {j}",
                self.sign,
                i + 1
            ))),
            _ => Err(Error::ContractBreach(format!(
                "coordinate limit for J = {j}, i = {} diverges against order preservation",
                i + 1
            ))),
        }
    }

    /// Is `(J, {i})` a hyperarc (`i ∉ J`)?
    pub fn has_hyperarc(&self, j: NodeSet, i: usize) -> Result<bool> {
        if j.contains(i) {
            return Err(Error::InvalidArgument(format!("hyperarc head {} lies in its tail {j}", i + 1)));
        }
        self.diverges(j, i)
    }

    /// Number of distinct coordinate limits evaluated so far.
    pub fn query_count(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }

    pub fn table(&self) -> Vec<LimitEntry> {
        let tag = match self.sign {
            Sign::Plus => "H+",
            Sign::Minus => "H-",
        };
        self.memo
            .lock()
            .expect("memo lock")
            .iter()
            .map(|((j, i), v)| LimitEntry { key: format!("{tag}[J={j},i={}]", i + 1), verdict: v.clone() })
            .collect()
    }

    /// The queried portion of the hypergraph in Graphviz text; tails are box nodes.
    pub fn to_dot(&self, name: &str) -> String {
        let n = self.node_count();
        let mut s = format!("digraph {name} {{\n");
        for i in 0..n {
            let _ = writeln!(s, "  n{} [label=\"{}\"];", i + 1, i + 1);
        }
        let memo = self.memo.lock().expect("memo lock");
        let mut tails = BTreeMap::new();
        for ((j, i), v) in memo.iter() {
            let arc = matches!(
                (&v.outcome, self.sign),
                (LimitOutcome::PlusInfinity, Sign::Plus) | (LimitOutcome::MinusInfinity, Sign::Minus)
            );
            if !arc || j.contains(*i) {
                continue;
            }
            let id = format!("t{}", j.bits());
            if tails.insert(*j, ()).is_none() {
                let _ = writeln!(s, "  {id} [shape=box,label=\"{j}\"];");
                for k in j.iter() {
                    let _ = writeln!(s, "  n{} -> {id} [arrowhead=none];", k + 1);
                }
            }
            let _ = writeln!(s, "  {id} -> n{};", i + 1);
        }
        s.push_str("}\n");
        s
    }
}

pub fn is_invariant(h: &HypergraphQuery<'_>, set: NodeSet) -> Result<bool> {
    let n = h.node_count();
    for j in set.complement(n).iter() {
        if h.has_hyperarc(set, j)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest invariant superset of `set`, built by repeatedly adding a node hit by a hyperarc.
pub fn reach(h: &HypergraphQuery<'_>, set: NodeSet) -> Result<NodeSet> {
    let n = h.node_count();
    let mut current = set;
    'grow: loop {
        for j in current.complement(n).iter() {
            if h.has_hyperarc(current, j)? {
                current.insert(j);
                continue 'grow;
            }
        }
        return Ok(current);
    }
}

/// `G∞(T)` using the plus-sign query's memo, so its limits are counted there.
pub fn build_ginf_with(h: &HypergraphQuery<'_>) -> Result<DirectedGraph> {
    if h.sign() != Sign::Plus {
        return Err(Error::InvalidArgument("G∞ is read from plus-sign limits".into()));
    }
    let n = h.node_count();
    let mut g = DirectedGraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if h.diverges(NodeSet::singleton(j), i)? {
                g.add_arc(i, j);
            }
        }
    }
    Ok(g)
}

pub fn build_ginf(t: &MapExpr, opts: &LimitOptions) -> Result<DirectedGraph> {
    require(t, t.flags().topical, "topical")?;
    build_ginf_with(&HypergraphQuery::new(t, Sign::Plus, *opts)?)
}

fn require(t: &MapExpr, flag: bool, name: &'static str) -> Result<()> {
    t.validate()?;
    if !flag {
        return Err(Error::MissingFlag(name));
    }
    if t.in_dim() != t.out_dim() || t.in_dim() > MAX_NODES {
        return Err(Error::InvalidMap("need a square map on at most 63 nodes".into()));
    }
    Ok(())
}

fn inconclusive_or(e: Error, method: Method) -> Result<Certificate> {
    match e {
        Error::Inconclusive(msg) => Ok(Certificate::new(Verdict::Inconclusive, method).note(msg)),
        other => Err(other),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopicalMethod {
    Hypergraph,
    HypergraphReach,
    Convex,
    StronglyConnectedSufficient,
}

impl std::str::FromStr for TopicalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hypergraph" => Ok(TopicalMethod::Hypergraph),
            "hypergraph_reach" | "hypergraph-reach" => Ok(TopicalMethod::HypergraphReach),
            "convex" => Ok(TopicalMethod::Convex),
            "strongly_connected_sufficient" | "strongly-connected-sufficient" => {
                Ok(TopicalMethod::StronglyConnectedSufficient)
            }
            _ => Err(Error::InvalidArgument(format!("unknown topical method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TopicalOptions {
    pub limits: LimitOptions,
    /// Treat the map as subtopical/topical even without the structural flag.
    pub assume_order_preserving: bool,
    /// Also run the `H⁺∞` formulation of the reach test and require agreement.
    pub dual_check: bool,
}

/// Both subtopical limits for every nonempty `I`: exactly `2(2ⁿ - 1)` of them.
pub fn certify_subtopical(t: &MapExpr, opts: &TopicalOptions) -> Result<Certificate> {
    require(t, t.flags().subtopical || opts.assume_order_preserving, "subtopical")?;
    let n = t.in_dim();
    let zero = vec![Rational::zero(); n];
    let jobs: Vec<(NodeSet, Sign)> = NodeSet::nonempty_subsets(n)
        .flat_map(|i| [(i, Sign::Plus), (i, Sign::Minus)])
        .collect();
    let results: Vec<Result<LimitVerdict>> = jobs
        .par_iter()
        .map(|&(set, sign)| {
            let k = int(set.len() as i64);
            let w = indicator(n, set, 1);
            match sign {
                Sign::Plus => monotone_ray_limit(t, &zero, &indicator(n, set, 1), &w, &-k, Monotone::Nonincreasing, &opts.limits),
                Sign::Minus => monotone_ray_limit(t, &zero, &indicator(n, set, -1), &w, &k, Monotone::Nondecreasing, &opts.limits),
            }
        })
        .collect();
    let mut table = Vec::with_capacity(jobs.len());
    let mut failure = None;
    let mut inconclusive = false;
    for (&(set, sign), r) in jobs.iter().zip(results) {
        let v = r?;
        let wanted = match sign {
            Sign::Plus => v.is_minus_infinity(),
            Sign::Minus => v.is_plus_infinity(),
        };
        if v.is_inconclusive() {
            inconclusive = true;
        } else if !wanted && failure.is_none() {
            let value = v.finite_value().cloned().expect("monotone limit is finite when not the wanted infinity");
            failure = Some(Witness::SubsetLimit { subset: set, sign, value });
        }
        table.push(LimitEntry { key: format!("I={set},sign={sign}"), verdict: v });
    }
    let verdict = match (&failure, inconclusive) {
        (Some(_), _) => Verdict::NotSurjective,
        (None, true) => Verdict::Inconclusive,
        (None, false) => Verdict::Surjective,
    };
    Ok(Certificate::new(verdict, Method::Subtopical)
        .with_witness(failure.unwrap_or(Witness::None))
        .with_table(table))
}

/// Does `T + u` have an additive eigenvector for every `u`?
pub fn certify_topical(t: &MapExpr, method: TopicalMethod, opts: &TopicalOptions) -> Result<Certificate> {
    require(t, t.flags().topical || opts.assume_order_preserving, "topical")?;
    if t.in_dim() < 2 {
        return Err(Error::InvalidMap("topical tests need n >= 2".into()));
    }
    let m = match method {
        TopicalMethod::Hypergraph => Method::Hypergraph,
        TopicalMethod::HypergraphReach => Method::HypergraphReach,
        TopicalMethod::Convex => Method::Convex,
        TopicalMethod::StronglyConnectedSufficient => Method::StronglyConnectedSufficient,
    };
    let result = match method {
        TopicalMethod::Hypergraph => hypergraph_method(t, opts),
        TopicalMethod::HypergraphReach => reach_method(t, opts),
        TopicalMethod::Convex => {
            if !t.flags().convex {
                return Err(Error::MissingFlag("convex"));
            }
            convex_method(t, opts)
        }
        TopicalMethod::StronglyConnectedSufficient => strongly_connected_method(t, opts),
    };
    result.or_else(|e| inconclusive_or(e, m))
}

fn proper_limits(
    t: &MapExpr,
    opts: &LimitOptions,
    f: fn(&MapExpr, NodeSet, &LimitOptions) -> Result<LimitVerdict>,
) -> Result<Vec<(NodeSet, LimitVerdict)>> {
    let subsets: Vec<NodeSet> = NodeSet::proper_subsets(t.in_dim()).collect();
    subsets
        .par_iter()
        .map(|&s| f(t, s, opts).map(|v| (s, v)))
        .collect()
}

fn hypergraph_method(t: &MapExpr, opts: &TopicalOptions) -> Result<Certificate> {
    let n = t.in_dim();
    let lower = proper_limits(t, &opts.limits, lower_limit)?;
    let upper = proper_limits(t, &opts.limits, upper_limit)?;
    let lower_map: BTreeMap<NodeSet, &LimitVerdict> = lower.iter().map(|(s, v)| (*s, v)).collect();
    let upper_map: BTreeMap<NodeSet, &LimitVerdict> = upper.iter().map(|(s, v)| (*s, v)).collect();
    let mut table: Vec<LimitEntry> = lower
        .iter()
        .map(|(s, v)| LimitEntry { key: format!("lower[I={s}]"), verdict: v.clone() })
        .collect();
    table.extend(upper.iter().map(|(s, v)| LimitEntry { key: format!("upper[J={s}]"), verdict: v.clone() }));
    let mut inconclusive = false;
    for i in NodeSet::proper_subsets(n) {
        let lo = lower_map[&i];
        if lo.is_minus_infinity() {
            continue;
        }
        for j in NodeSet::proper_subsets(n).filter(|j| j.is_disjoint(i)) {
            let up = upper_map[&j];
            if up.is_plus_infinity() {
                continue;
            }
            if lo.is_inconclusive() || up.is_inconclusive() {
                inconclusive = true;
                continue;
            }
            return Ok(Certificate::new(Verdict::NotSurjective, Method::Hypergraph)
                .with_witness(Witness::HypergraphPair { i, j, lower: lo.clone(), upper: up.clone() })
                .with_table(table));
        }
    }
    let verdict = if inconclusive { Verdict::Inconclusive } else { Verdict::Surjective };
    Ok(Certificate::new(verdict, Method::Hypergraph).with_table(table))
}

/// Reach test with the roles of the hypergraphs given by `sign`
/// of the reach hypergraph: minus uses upper limits, plus uses lower limits.
fn reach_test(t: &MapExpr, reach_sign: Sign, opts: &TopicalOptions) -> Result<Certificate> {
    let n = t.in_dim();
    let h = HypergraphQuery::new(t, reach_sign, opts.limits)?;
    let (f, tag): (fn(&MapExpr, NodeSet, &LimitOptions) -> Result<LimitVerdict>, &str) = match reach_sign {
        Sign::Minus => (upper_limit, "upper"),
        Sign::Plus => (lower_limit, "lower"),
    };
    let limits = proper_limits(t, &opts.limits, f)?;
    let mut table: Vec<LimitEntry> = limits
        .iter()
        .map(|(s, v)| LimitEntry { key: format!("{tag}[J={s}]"), verdict: v.clone() })
        .collect();
    let mut outcome = None;
    let mut inconclusive = false;
    for (j, v) in &limits {
        let diverges = match reach_sign {
            Sign::Minus => v.is_plus_infinity(),
            Sign::Plus => v.is_minus_infinity(),
        };
        if diverges {
            continue;
        }
        let r = reach(&h, *j)?;
        if r != NodeSet::full(n) {
            if v.is_inconclusive() {
                inconclusive = true;
                continue;
            }
            outcome = Some(Witness::ReachFailure { j: *j, reach: r, upper: Some(v.clone()) });
            break;
        }
    }
    table.extend(h.table());
    let verdict = match (&outcome, inconclusive) {
        (Some(_), _) => Verdict::NotSurjective,
        (None, true) => Verdict::Inconclusive,
        (None, false) => Verdict::Surjective,
    };
    Ok(Certificate::new(verdict, Method::HypergraphReach)
        .with_witness(outcome.unwrap_or(Witness::None))
        .with_table(table))
}

fn reach_method(t: &MapExpr, opts: &TopicalOptions) -> Result<Certificate> {
    let cert = reach_test(t, Sign::Minus, opts)?;
    if opts.dual_check {
        let dual = reach_test(t, Sign::Plus, opts)?;
        if dual.verdict != cert.verdict {
            return Err(Error::ContractBreach(format!(
                "reach test gives {} with H- but {} with H+",
                cert.verdict, dual.verdict
            )));
        }
        return Ok(cert.note("dual H+ formulation agrees"));
    }
    Ok(cert)
}

fn convex_method(t: &MapExpr, opts: &TopicalOptions) -> Result<Certificate> {
    let n = t.in_dim();
    let plus = HypergraphQuery::new(t, Sign::Plus, opts.limits)?;
    let minus = HypergraphQuery::new(t, Sign::Minus, opts.limits)?;
    let g = build_ginf_with(&plus)?;
    let classes = g.final_classes();
    let (verdict, witness) = if classes.len() > 1 {
        (Verdict::NotSurjective, Witness::FinalClasses { classes })
    } else {
        let c = classes[0];
        let r = reach(&minus, c)?;
        if r == NodeSet::full(n) {
            (Verdict::Surjective, Witness::None)
        } else {
            (Verdict::NotSurjective, Witness::ReachFailure { j: c, reach: r, upper: None })
        }
    };
    let mut table = plus.table();
    table.extend(minus.table());
    Ok(Certificate::new(verdict, Method::Convex).with_witness(witness).with_table(table))
}

fn strongly_connected_method(t: &MapExpr, opts: &TopicalOptions) -> Result<Certificate> {
    let plus = HypergraphQuery::new(t, Sign::Plus, opts.limits)?;
    let g = build_ginf_with(&plus)?;
    let verdict = if g.is_strongly_connected() { Verdict::Surjective } else { Verdict::SufficientOnly };
    Ok(Certificate::new(verdict, Method::StronglyConnectedSufficient).with_table(plus.table()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(rows: &[&[Option<i64>]]) -> MapExpr {
        MapExpr::MaxPlus { matrix: rows.iter().map(|r| r.iter().map(|e| e.map(int)).collect()).collect() }
    }

    fn opts() -> LimitOptions {
        LimitOptions::default()
    }

    fn s(v: &[usize]) -> NodeSet {
        NodeSet::from_indices(v.iter().map(|i| i - 1))
    }

    #[test]
    fn coordinate_limit_examples() {
        let a = mp(&[&[Some(0), Some(0)], &[None, Some(0)]]);
        assert!(coordinate_limit(&a, Sign::Plus, s(&[2]), 0, &opts()).unwrap().is_plus_infinity());
        let v = coordinate_limit(&a, Sign::Minus, s(&[2]), 0, &opts()).unwrap();
        assert_eq!(v.finite_value(), Some(&crate::raylimits::Value::Exact(int(0))));
        let id = MapExpr::identity(2);
        assert!(coordinate_limit(&id, Sign::Plus, s(&[2]), 0, &opts()).unwrap().is_finite());
    }

    #[test]
    fn ginf_examples() {
        // T(x) = (max(x1, x2), x1)
        let t = mp(&[&[Some(0), Some(0)], &[Some(0), None]]);
        let g = build_ginf(&t, &opts()).unwrap();
        assert_eq!(g.arcs(), vec![(0, 0), (0, 1), (1, 0)]);
        assert!(g.is_strongly_connected());
        let g = build_ginf(&MapExpr::identity(2), &opts()).unwrap();
        assert_eq!(g.final_classes(), vec![s(&[1]), s(&[2])]);
        let a = mp(&[&[Some(3), None, Some(-1)], &[None, Some(0), None], &[Some(2), Some(2), None]]);
        let g = build_ginf(&a, &opts()).unwrap();
        assert_eq!(g.arcs(), vec![(0, 0), (0, 2), (1, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn invariance_and_reach() {
        let a = mp(&[&[Some(0), Some(0)], &[None, Some(0)]]);
        let h = HypergraphQuery::new(&a, Sign::Minus, opts()).unwrap();
        assert!(is_invariant(&h, s(&[2])).unwrap());
        assert!(is_invariant(&h, s(&[1, 2])).unwrap());
        let swap = MapExpr::Permutation { sigma: vec![1, 0] };
        let h = HypergraphQuery::new(&swap, Sign::Minus, opts()).unwrap();
        assert!(!is_invariant(&h, s(&[1])).unwrap());
        assert_eq!(reach(&h, s(&[1])).unwrap(), s(&[1, 2]));
        let dec = mp(&[&[Some(0), None], &[None, Some(0)]]);
        let h = HypergraphQuery::new(&dec, Sign::Minus, opts()).unwrap();
        assert_eq!(reach(&h, s(&[1])).unwrap(), s(&[1]));
        assert!(h.to_dot("H").starts_with("digraph H"));
    }

    #[test]
    fn final_class_examples() {
        let g = DirectedGraph::from_arcs(2, &[(0, 1)]).unwrap();
        assert_eq!(g.final_classes(), vec![s(&[2])]);
        let g = DirectedGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(g.final_classes(), vec![s(&[1, 2, 3])]);
        let g = DirectedGraph::from_arcs(2, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(g.final_classes(), vec![s(&[1]), s(&[2])]);
        assert!(g.to_dot("G").contains("n1 -> n1;"));
    }

    #[test]
    fn subtopical_examples() {
        let o = TopicalOptions::default();
        let half = MapExpr::identity(2).scaled(crate::scalar::ratio(1, 2));
        let c = certify_subtopical(&half, &o).unwrap();
        assert_eq!(c.verdict, Verdict::Surjective);
        assert_eq!(c.limit_table.len(), 6);
        let clip = MapExpr::min(MapExpr::identity(2), MapExpr::constant(vec![int(1), int(1)]));
        let c = certify_subtopical(&clip, &o).unwrap();
        assert_eq!(c.verdict, Verdict::NotSurjective);
        assert!(matches!(c.witness, Witness::SubsetLimit { subset, sign: Sign::Minus, .. } if subset == s(&[1])));
        let shift = MapExpr::identity(2).plus(vec![int(-1), int(-1)]);
        let c = certify_subtopical(&shift, &o).unwrap();
        assert!(matches!(
            c.witness,
            Witness::SubsetLimit { sign: Sign::Plus, ref value, .. } if *value == crate::raylimits::Value::Exact(int(-1))
        ));
    }

    #[test]
    fn topical_examples() {
        let o = TopicalOptions { dual_check: true, ..Default::default() };
        let swap = MapExpr::Permutation { sigma: vec![1, 0] };
        for m in [TopicalMethod::Hypergraph, TopicalMethod::HypergraphReach, TopicalMethod::StronglyConnectedSufficient] {
            assert_eq!(certify_topical(&swap, m, &o).unwrap().verdict, Verdict::Surjective, "{m:?}");
        }
        let id = MapExpr::identity(2);
        let c = certify_topical(&id, TopicalMethod::Convex, &o).unwrap();
        assert_eq!(c.verdict, Verdict::NotSurjective);
        assert_eq!(c.witness, Witness::FinalClasses { classes: vec![s(&[1]), s(&[2])] });
        assert_eq!(
            certify_topical(&id, TopicalMethod::StronglyConnectedSufficient, &o).unwrap().verdict,
            Verdict::SufficientOnly
        );
        // T(x) = (max(x1, x2), x2): eigen-equations force max(x1, x2) - x1 = u2 - u1, impossible for u1 > u2
        let a = mp(&[&[Some(0), Some(0)], &[None, Some(0)]]);
        for m in [TopicalMethod::Hypergraph, TopicalMethod::HypergraphReach, TopicalMethod::Convex] {
            assert_eq!(certify_topical(&a, m, &o).unwrap().verdict, Verdict::NotSurjective, "{m:?}");
        }
        let c = certify_topical(&a, TopicalMethod::Convex, &o).unwrap();
        assert_eq!(c.witness, Witness::ReachFailure { j: s(&[2]), reach: s(&[2]), upper: None });
        let c = certify_topical(&a, TopicalMethod::Hypergraph, &o).unwrap();
        assert!(c.limit_table.len() <= 2 * 3);
        let minmax = MapExpr::min(MapExpr::identity(2), swap);
        assert!(matches!(certify_topical(&minmax, TopicalMethod::Convex, &o), Err(Error::MissingFlag("convex"))));
    }
}
