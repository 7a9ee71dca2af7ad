use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::Parser;
use surjdisp::formats::{NormSpec, Problem, ProblemFile, Query, Report, TopicalMethodSpec};
use surjdisp::generate::{cyclic_clip, midpoint_map, min_clip, shrink_sqrt};
use surjdisp::oracle::{cross_check, OracleOptions};
use surjdisp::scalar::int;
use surjdisp::sets::NodeSet;
use surjdisp::topical::build_ginf;

/// Certify surjective displacement or fixed-point uniqueness of a nonexpansive map.
///
/// Exit status: 0 Surjective/Unique, 1 NotSurjective/NotUnique,
/// 2 SufficientOnly/Inconclusive, 3 bad input, 4 certifier error,
/// 5 the oracle contradicted the certificate (with --verify).
#[derive(Parser, Debug)]
#[command(name = "surjdisp", version)]
struct Args {
    /// Problem file (JSON, schema surjdisp.problem.v1).
    problem: Option<PathBuf>,

    /// Built-in example: "cyclic-clip n=3 K={1} L={2}", "shrink-sqrt",
    /// "subtopical-min-clip" or "midpoint n=2".
    #[arg(long, conflicts_with = "problem")]
    demo: Option<String>,

    /// Cross-check the verdict with the brute-force oracle and append its section.
    #[arg(long)]
    verify: bool,

    /// Write G∞ of the map in Graphviz DOT format.
    #[arg(long, value_name = "PATH")]
    export_graph: Option<PathBuf>,

    /// Override the query: surjective, subtopical, recession, illumination,
    /// or a topical method (hypergraph, hypergraph_reach, convex, strongly_connected_sufficient).
    #[arg(long, value_name = "NAME")]
    method: Option<String>,

    /// Number of doublings in the numeric limit schedule.
    #[arg(long, value_name = "K")]
    tmax: Option<u32>,

    #[arg(long, value_name = "S")]
    seed: Option<u64>,

    /// Residual tolerance of the oracle.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,

    /// Write the report here instead of standard output.
    #[arg(long, short, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Print the problem file (after demo expansion and overrides) and exit.
    #[arg(long)]
    emit_problem: bool,
}

enum Failure {
    Input(anyhow::Error),
    Certifier(anyhow::Error),
}

fn parse_set(s: &str, n: usize) -> anyhow::Result<NodeSet> {
    let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
    let idx = inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().with_context(|| format!("bad index {t:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(NodeSet::from_one_based(&idx, n)?)
}

/// `key=value` pairs after the demo name.
fn demo_params(rest: &[&str]) -> anyhow::Result<Vec<(String, String)>> {
    rest.iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("expected key=value, got {kv:?}"))?;
            Ok((k.to_string(), v.to_string()))
        })
        .collect()
}

fn demo_problem(spec: &str) -> anyhow::Result<ProblemFile> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let (name, rest) = words.split_first().ok_or_else(|| anyhow!("empty demo name"))?;
    let params = demo_params(rest)?;
    let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let n = get("n").map(str::parse::<usize>).transpose().context("bad n")?;
    Ok(match *name {
        "cyclic-clip" => {
            let n = n.unwrap_or(3);
            let k = parse_set(get("K").unwrap_or("{}"), n)?;
            let l = parse_set(get("L").unwrap_or("{}"), n)?;
            ProblemFile::new(Some(NormSpec::Sup { n }), &cyclic_clip(n, k, l)?, Query::Surjective)
        }
        "shrink-sqrt" => ProblemFile::new(Some(NormSpec::Sup { n: 1 }), &shrink_sqrt(), Query::Surjective),
        "subtopical-min-clip" => {
            let n = n.unwrap_or(2);
            ProblemFile::new(Some(NormSpec::Sup { n }), &min_clip(&vec![int(1); n]), Query::Subtopical)
        }
        "midpoint" => {
            let n = n.unwrap_or(2);
            let zero = vec![surjdisp::formats::Rat(int(0)); n];
            ProblemFile::new(Some(NormSpec::Sup { n }), &midpoint_map(n), Query::Unique { u: zero })
        }
        other => bail!("unknown demo {other:?}"),
    })
}

fn method_query(name: &str) -> anyhow::Result<Query> {
    Ok(match name {
        "surjective" | "faces" => Query::Surjective,
        "subtopical" => Query::Subtopical,
        "recession" => Query::Recession,
        "illumination" => Query::Illumination { budget: 200, seed: None },
        other => Query::Topical { method: other.parse::<TopicalMethodSpec>()? },
    })
}

fn load(args: &Args) -> anyhow::Result<ProblemFile> {
    let mut file = match (&args.problem, &args.demo) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ProblemFile::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(demo)) => demo_problem(demo)?,
        (None, None) => bail!("give a problem file or --demo NAME"),
    };
    if let Some(m) = &args.method {
        file.query = method_query(m)?;
    }
    if let Some(k) = args.tmax {
        file.policy.max_doublings = Some(k);
    }
    if let Some(s) = args.seed {
        file.seed = s;
    }
    Ok(file)
}

fn run(args: &Args) -> Result<i32, Failure> {
    let file = load(args).map_err(Failure::Input)?;
    if args.emit_problem {
        println!("{}", file.to_json());
        return Ok(0);
    }
    let problem = Problem::from_file(&file).map_err(|e| Failure::Input(e.into()))?;
    if let Some(path) = &args.export_graph {
        let opts = problem.thresholds.certify_options().limits;
        let g = build_ginf(&problem.map, &opts).map_err(|e| Failure::Certifier(e.into()))?;
        fs::write(path, g.to_dot("ginf"))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Input)?;
    }
    let cert = problem.run().map_err(|e| Failure::Certifier(e.into()))?;
    let mut code = cert.verdict.exit_code();
    let mut report = Report::new(&problem, cert);
    if args.verify {
        let mut oopts = OracleOptions::default();
        if let Some(t) = args.tol {
            oopts.tol = t;
        }
        let target = problem.oracle_target().map_err(|e| Failure::Certifier(e.into()))?;
        if let Some((map, norm)) = target {
            let check = cross_check(&map, &norm, &report.certificate, problem.thresholds.seed, &oopts)
                .map_err(|e| Failure::Certifier(e.into()))?;
            if check.consistent == Some(false) {
                eprintln!("oracle disagrees: {}", check.summary);
                code = 5;
            }
            report.oracle = Some(check);
        }
    }
    let text = report.to_json();
    match &args.output {
        Some(path) => fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Input)?,
        None => println!("{text}"),
    }
    eprintln!("{} ({:?})", report.certificate.verdict, report.certificate.method);
    Ok(code)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let code = match run(&args) {
        Ok(c) => c,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            3
        }
        Err(Failure::Certifier(e)) => {
            eprintln!("error: {e:#}");
            4
        }
    };
    ExitCode::from(code as u8)
}
