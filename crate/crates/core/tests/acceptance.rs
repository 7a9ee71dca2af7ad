//! Acceptance suite: one PASS/FAIL line per criterion, each with its time bound.
//!
//! Run with `cargo test -p surjdisp --test acceptance -- --nocapture` (the
//! target has its own harness, so output is always shown).

use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surjdisp::certificate::{Certificate, Verdict, Witness};
use surjdisp::certify::{
    certify_surjective, certify_unique, certify_via_recession, face_lattice_map, illumination_check, recession_expr,
    semiderivative, CertifyOptions,
};
use surjdisp::generate::{
    disjoint_pairs, cyclic_clip, midpoint_map, min_clip, random_homogeneous_sup, random_max_plus, random_min_max,
    random_sup_pwa, shrink_sqrt,
};
use surjdisp::mapexpr::{normalize_topical, EvalContext, MapExpr};
use surjdisp::oracle::{
    avoided_cone_shifts, minimal_displacement_estimate, multistart_fixed_points, random_shift, OracleOptions,
};
use surjdisp::polynorm::{FaceDescriptor, FaceLabel, NormKind, PolyhedralNorm};
use surjdisp::raylimits::{classify_limit_at_infinity, restrict_map_to_ray, restrict_to_ray};
use surjdisp::scalar::{int, ratio};
use surjdisp::topical::{certify_subtopical, certify_topical, TopicalMethod, TopicalOptions};
use surjdisp::Rational;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn opts() -> CertifyOptions {
    CertifyOptions::default()
}

fn zeros(n: usize) -> Vec<Rational> {
    vec![Rational::zero(); n]
}

fn half_map(n: usize) -> MapExpr {
    MapExpr::identity(n).scaled(ratio(1, 2))
}

fn criterion_1() -> Outcome {
    let mut counts = Vec::new();
    for kind in [NormKind::Sup, NormKind::One] {
        for n in 1..=5usize {
            let faces = e(e(PolyhedralNorm::builtin(kind, n))?.enumerate_proper_faces())?;
            let want = 3usize.pow(n as u32) - 1;
            ensure(faces.len() == want, || format!("{kind} n={n}: {} faces, want {want}", faces.len()))?;
            counts.push(faces.len());
        }
    }
    Ok(format!("counts {counts:?}"))
}

fn criterion_2() -> Outcome {
    let sup = PolyhedralNorm::sup(3);
    for (k, l) in disjoint_pairs(3) {
        let f = e(cyclic_clip(3, k, l))?;
        let c = e(certify_surjective(&f, &sup, &opts()))?;
        let labels: Vec<Option<FaceLabel>> = c.failing_faces().iter().map(|x| x.face.label.clone()).collect();
        ensure(
            c.verdict == Verdict::NotSurjective && labels == vec![Some(FaceLabel::Sup { plus: k, minus: l })],
            || format!("K={k} L={l}: {} with failing faces {labels:?}", c.verdict),
        )?;
        ensure(c.limit_table.iter().all(|x| x.verdict.mode == surjdisp::raylimits::LimitMode::Exact), || {
            format!("K={k} L={l}: a limit was not exact")
        })?;
    }
    Ok("26/26 pairs fail exactly on F_KL".into())
}

fn topical_opts() -> TopicalOptions {
    TopicalOptions::default()
}

/// Verdicts of the hypergraph, reach and normalized face-limit routes (plus convex when asked).
fn topical_verdicts(t: &MapExpr, with_convex: bool) -> Result<Vec<Verdict>, String> {
    let n = t.in_dim();
    let mut v = vec![
        e(certify_topical(t, TopicalMethod::Hypergraph, &topical_opts()))?.verdict,
        e(certify_topical(t, TopicalMethod::HypergraphReach, &topical_opts()))?.verdict,
        e(certify_surjective(&e(normalize_topical(t))?, &PolyhedralNorm::variation(n), &opts()))?.verdict,
    ];
    if with_convex {
        v.push(e(certify_topical(t, TopicalMethod::Convex, &topical_opts()))?.verdict);
    }
    Ok(v)
}

fn criterion_3() -> Outcome {
    let mut tally = [0usize; 2];
    for seed in 0..120u64 {
        let n = if seed < 60 { 3 } else { 4 };
        let t = random_min_max(n, seed);
        let v = topical_verdicts(&t, false)?;
        ensure(v.iter().all(|x| *x == v[0]), || format!("min-max n={n} seed={seed}: {v:?}"))?;
        tally[(v[0] == Verdict::Surjective) as usize] += 1;
    }
    let mut mp = [0usize; 2];
    for seed in 0..100u64 {
        let n = 3 + (seed % 2) as usize;
        let t = random_max_plus(n, seed);
        let v = topical_verdicts(&t, true)?;
        ensure(v.iter().all(|x| *x == v[0]), || format!("max-plus n={n} seed={seed}: {v:?}"))?;
        mp[(v[0] == Verdict::Surjective) as usize] += 1;
    }
    Ok(format!(
        "min-max 120 agree ({} surjective, {} not); max-plus 100 agree ({} surjective, {} not)",
        tally[1], tally[0], mp[1], mp[0]
    ))
}

fn criterion_4() -> Outcome {
    for n in 1..=5usize {
        let c = e(certify_subtopical(&half_map(n), &topical_opts()))?;
        let want = 2 * ((1 << n) - 1);
        ensure(c.limit_table.len() == want, || format!("x/2 n={n}: {} limits, want {want}", c.limit_table.len()))?;
    }
    for seed in 0..40u64 {
        let n = 2 + (seed % 3) as usize;
        let c = e(certify_subtopical(&random_min_max(n, seed), &topical_opts()))?;
        ensure(c.limit_table.len() == 2 * ((1 << n) - 1), || format!("min-max n={n} seed={seed}"))?;
    }
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 3 + (seed % 2) as usize;
        let c = e(certify_topical(&random_max_plus(n, seed), TopicalMethod::Convex, &topical_opts()))?;
        let used = c.limit_table.len();
        ensure(used <= 4 * n * n, || format!("convex n={n} seed={seed}: {used} > 4n²"))?;
        worst = worst.max(used as f64 / (n * n) as f64);
    }
    Ok(format!("subtopical exactly 2(2^n-1) for n=1..5; convex at most {worst:.2}·n²"))
}

fn criterion_5() -> Outcome {
    let f = shrink_sqrt();
    let sup = PolyhedralNorm::sup(1);
    let a = e(certify_surjective(&f, &sup, &opts()))?.verdict;
    let b = e(certify_via_recession(&f, &sup, &opts()))?.verdict;
    ensure(a == Verdict::Surjective && b == Verdict::SufficientOnly, || format!("faces {a}, recession {b}"))?;
    Ok("faces: Surjective, recession: SufficientOnly".into())
}

struct Instance {
    name: String,
    map: MapExpr,
    norm: PolyhedralNorm,
    cert: Certificate,
}

fn corpus() -> Result<Vec<Instance>, String> {
    let mut out = Vec::new();
    let mut push = |name: String, map: MapExpr, norm: PolyhedralNorm| -> Result<(), String> {
        let cert = e(certify_surjective(&map, &norm, &opts()))?;
        out.push(Instance { name, map, norm, cert });
        Ok(())
    };
    for (k, l) in disjoint_pairs(3) {
        push(format!("cyclic-clip K={k} L={l}"), e(cyclic_clip(3, k, l))?, PolyhedralNorm::sup(3))?;
    }
    push("shrink-sqrt".into(), shrink_sqrt(), PolyhedralNorm::sup(1))?;
    for n in 1..=3 {
        push(format!("x/2 n={n}"), half_map(n), PolyhedralNorm::sup(n))?;
    }
    push("min-clip".into(), min_clip(&[int(1), int(1)]), PolyhedralNorm::sup(2))?;
    push("midpoint".into(), midpoint_map(2), PolyhedralNorm::sup(2))?;
    for seed in 0..20 {
        push(format!("sup-pwa seed={seed}"), random_sup_pwa(3, seed), PolyhedralNorm::sup(3))?;
    }
    for seed in 0..20 {
        let t = random_min_max(3, seed);
        push(format!("normalized min-max seed={seed}"), e(normalize_topical(&t))?, PolyhedralNorm::variation(3))?;
    }
    Ok(out)
}

fn criterion_6() -> Outcome {
    let o = OracleOptions::default();
    let (mut surj, mut not) = (0, 0);
    for (idx, inst) in corpus()?.iter().enumerate() {
        match inst.cert.verdict {
            Verdict::Surjective => {
                let mut rng = ChaCha8Rng::seed_from_u64(idx as u64);
                for _ in 0..10 {
                    let u = e(random_shift(&mut rng, &inst.norm, 10.0))?;
                    let r = e(minimal_displacement_estimate(&inst.map, &u, &inst.norm, None, &o))?;
                    ensure(r.final_residual <= 1e-8 && r.iterations <= 100_000, || {
                        format!("{}: u={u:?} ended with {:?}", inst.name, r.verdict)
                    })?;
                }
                surj += 1;
            }
            Verdict::NotSurjective => {
                for u in e(avoided_cone_shifts(&inst.map, &inst.norm, &inst.cert, 5, idx as u64))? {
                    let r = e(minimal_displacement_estimate(&inst.map, &u, &inst.norm, None, &o))?;
                    ensure(r.floor().is_some_and(|v| v >= 1e-3), || {
                        format!("{}: u={u:?} ended with {:?}", inst.name, r.verdict)
                    })?;
                }
                not += 1;
            }
            v => return Err(format!("{}: unexpected verdict {v}", inst.name)),
        }
    }
    Ok(format!("{surj} surjective instances x 10 shifts, {not} non-surjective x 5 cone shifts"))
}

fn criterion_7() -> Outcome {
    let o = OracleOptions::default();
    let sup2 = PolyhedralNorm::sup(2);
    let c = e(certify_unique(&half_map(2), &sup2, &zeros(2), &opts()))?;
    ensure(c.verdict == Verdict::Unique, || format!("x/2: {}", c.verdict))?;
    let pts = e(multistart_fixed_points(&half_map(2), &sup2, 16, 0, 10.0, &o))?;
    ensure(pts.len() == 1, || format!("x/2: multistart found {} points", pts.len()))?;

    let sup3 = PolyhedralNorm::sup(3);
    for (k, l) in disjoint_pairs(3) {
        let f = e(cyclic_clip(3, k, l))?;
        let c = e(certify_unique(&f, &sup3, &zeros(3), &opts()))?;
        let ok = matches!(&c.witness, Witness::InvariantFace { face, .. }
            if face.label == Some(FaceLabel::Sup { plus: k, minus: l }));
        ensure(c.verdict == Verdict::NotUnique && ok, || format!("K={k} L={l}: {} {:?}", c.verdict, c.witness))?;
        let pts = e(multistart_fixed_points(&f, &sup3, 16, 0, 10.0, &o))?;
        ensure(pts.len() >= 2, || format!("K={k} L={l}: multistart found {}", pts.len()))?;
    }
    let m = midpoint_map(2);
    let c = e(certify_unique(&m, &sup2, &zeros(2), &opts()))?;
    ensure(c.verdict == Verdict::NotUnique, || format!("midpoint: {}", c.verdict))?;
    let pts = e(multistart_fixed_points(&m, &sup2, 16, 0, 10.0, &o))?;
    ensure(pts.len() >= 2, || format!("midpoint: multistart found {}", pts.len()))?;
    Ok("x/2 Unique; 26 cyclic clips and midpoint NotUnique, each confirmed by multistart".into())
}

fn criterion_8() -> Outcome {
    let sup = PolyhedralNorm::sup(3);
    let (mut unique, mut lit) = (0, 0);
    for seed in 0..200u64 {
        let g = random_homogeneous_sup(3, seed);
        let s = e(certify_surjective(&g, &sup, &opts()))?.verdict;
        let u = e(certify_unique(&g, &sup, &zeros(3), &opts()))?.verdict;
        ensure((s == Verdict::Surjective) == (u == Verdict::Unique), || format!("seed {seed}: {s} vs {u}"))?;
        let ill = e(illumination_check(&g, &sup, 200, seed))?.verdict;
        if ill == Verdict::Unique {
            lit += 1;
            ensure(u == Verdict::Unique, || format!("seed {seed}: illumination Unique but {u}"))?;
        }
        unique += (u == Verdict::Unique) as usize;
    }
    Ok(format!("200 maps: {unique} unique/surjective, illumination confirmed {lit}"))
}

fn random_unit_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=5)).collect();
    let total: i64 = raw.iter().sum();
    raw.iter().map(|&w| ratio(w, total)).collect()
}

fn combine(points: &[Vec<Rational>], w: &[Rational]) -> Vec<Rational> {
    let mut out = zeros(points[0].len());
    for (p, c) in points.iter().zip(w) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v * c;
        }
    }
    out
}

/// Random point of `ri F` and random point of `ri F*`.
fn random_representatives(
    rng: &mut ChaCha8Rng,
    norm: &PolyhedralNorm,
    face: &FaceDescriptor,
) -> (Vec<Rational>, Vec<Rational>) {
    let verts = norm.face_vertices(face);
    let x = combine(&verts, &random_unit_weights(rng, verts.len()));
    let duals: Vec<Vec<Rational>> = face.active_set.iter().map(|&k| norm.dual_extreme_points()[k].clone()).collect();
    let xs = combine(&duals, &random_unit_weights(rng, duals.len()));
    (x, xs)
}

fn random_rational_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| ratio(rng.gen_range(-40..=40), rng.gen_range(1..=8))).collect()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sup = PolyhedralNorm::sup(3);
    let faces = e(sup.enumerate_proper_faces())?;
    let ctx = EvalContext::default();

    // Pairing with any point of the dual face gives a nonincreasing ray function.
    for seed in 0..100u64 {
        let f = random_sup_pwa(3, seed);
        let face = &faces[rng.gen_range(0..faces.len())];
        let (x, xs) = random_representatives(&mut rng, &sup, face);
        let g = e(restrict_to_ray(&f, &zeros(3), &x, &xs))?;
        ensure(g.is_nonincreasing(), || format!("seed {seed}: slopes {:?}", g.pieces()))?;
    }

    // Limits along two relative-interior points of one face coincide.
    for seed in 0..100u64 {
        let f = random_sup_pwa(3, seed + 1000);
        let face = &faces[rng.gen_range(0..faces.len())];
        let (x, xs) = random_representatives(&mut rng, &sup, face);
        let (y, _) = random_representatives(&mut rng, &sup, face);
        let a = e(classify_limit_at_infinity(&e(restrict_to_ray(&f, &zeros(3), &x, &xs))?))?;
        let b = e(classify_limit_at_infinity(&e(restrict_to_ray(&f, &zeros(3), &y, &xs))?))?;
        ensure(a.outcome == b.outcome, || format!("seed {seed}: {:?} vs {:?}", a.outcome, b.outcome))?;
    }

    // ‖R x_F - r y‖ = R - r for vertices y of F and 0 ≤ r ≤ ½(1 - c)R.
    let norms = [PolyhedralNorm::sup(3), PolyhedralNorm::one(3), PolyhedralNorm::variation(4)];
    for k in 0..100usize {
        let norm = &norms[k % norms.len()];
        let all = e(norm.enumerate_proper_faces())?;
        let face = &all[rng.gen_range(0..all.len())];
        let c = norm.interior_gap(face);
        ensure(c < Rational::one(), || format!("face {} has gap {c}", face.name()))?;
        let big_r = ratio(rng.gen_range(1..=50), rng.gen_range(1..=4));
        let r = (Rational::one() - &c) / int(2) * &big_r * ratio(rng.gen_range(0..=16), 16);
        for y in norm.face_vertices(face) {
            let v: Vec<Rational> = face.representative.iter().zip(&y).map(|(a, b)| a * &big_r - b * &r).collect();
            let got = e(norm.norm_value(&v))?;
            ensure(got == &big_r - &r, || format!("face {}: ‖Rx - ry‖ = {got}, want {}", face.name(), &big_r - &r))?;
        }
    }

    // The induced face map of a homogeneous map preserves inclusion.
    for seed in 0..100u64 {
        let g = random_homogeneous_sup(3, seed + 500);
        let lattice = e(face_lattice_map(&g, &sup))?;
        let bad = lattice.order_violations();
        ensure(bad.is_empty(), || format!("seed {seed}: {} order violations", bad.len()))?;
    }

    // Recession maps and semiderivatives of a composition, against the exact ray slopes.
    for seed in 0..100u64 {
        let f = random_sup_pwa(3, seed + 2000);
        let g = random_sup_pwa(3, seed + 3000);
        let fg = MapExpr::compose(f.clone(), g.clone());
        let x = random_rational_point(&mut rng, 3);
        let rays = e(restrict_map_to_ray(&fg, &zeros(3), &x, &ctx))?;
        let final_slopes: Vec<Rational> = rays.iter().map(|p| p.final_slope().clone()).collect();
        let composed = e(e(recession_expr(&f))?.evaluate_exact(&e(e(recession_expr(&g))?.evaluate_exact(&x))?))?;
        ensure(final_slopes == composed, || format!("seed {seed}: recession {final_slopes:?} vs {composed:?}"))?;

        let u = random_rational_point(&mut rng, 3);
        let rays = e(restrict_map_to_ray(&fg, &u, &x, &ctx))?;
        let first_slopes: Vec<Rational> = rays.iter().map(|p| p.first_slope().clone()).collect();
        let gu = e(g.evaluate_exact(&u))?;
        let chain = e(e(semiderivative(&f, &gu))?.evaluate_exact(&e(e(semiderivative(&g, &u))?.evaluate_exact(&x))?))?;
        ensure(first_slopes == chain, || format!("seed {seed}: derivative {first_slopes:?} vs {chain:?}"))?;
    }
    Ok("100 instances each: slope monotonicity, representative independence, scaled distance, face-map order, composability".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("face counts 3^n - 1 (sup, one; n = 1..5)", Duration::from_secs(1), criterion_1),
        ("cyclic clips: 26 maps fail exactly on F_KL", Duration::from_secs(10), criterion_2),
        ("topical method equivalence on random min-max and max-plus maps", Duration::from_secs(60), criterion_3),
        ("limit budgets (subtopical 2(2^n-1), convex <= 4n^2)", Duration::from_secs(60), criterion_4),
        ("shrink-sqrt: faces Surjective, recession SufficientOnly", Duration::from_secs(1), criterion_5),
        ("oracle consistency on the corpus", Duration::from_secs(300), criterion_6),
        ("uniqueness suite with multistart confirmation", Duration::from_secs(30), criterion_7),
        ("homogeneous bridge and illumination on 200 maps", Duration::from_secs(120), criterion_8),
        ("invariant assertions on seeded instances", Duration::from_secs(120), criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let (tag, detail) = match result {
            Ok(d) if took <= *limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took longer than {limit:?}")),
            Err(d) => ("FAIL", d),
        };
        failed += (tag == "FAIL") as usize;
        println!("criterion {} [{tag}] {name} ({:.2?} of {limit:?}): {detail}", k + 1, took);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
