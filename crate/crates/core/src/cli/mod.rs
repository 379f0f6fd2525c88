mod args;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use netchoice::diagnostics::diagnose;
use netchoice::eval::{
    baseline_pagerank, baseline_traffic, baseline_uniform, evaluate, pagerank, PageRankOptions,
};
use netchoice::formats::{self, FormatError, IdMap};
use netchoice::graph::io::{
    load_edge_list, read_binary_cache, write_binary_cache, write_edge_list, LoadOptions,
    CACHE_MAGIC,
};
use netchoice::graph::{DirectedGraph, GraphError};
use netchoice::inference::{
    fit_with_progress, transition_probabilities, FitOptions, ModelError, PriorConfig,
    TrafficMarginals,
};
use netchoice::simulate::{
    aggregate_marginals, lognormal_strengths, random_strongly_connected, sample_trajectories,
    SimulationError, StartNode, TrajectoryLength, TrajectorySpec,
};

pub use args::Cli;
use args::*;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Model(String),
    NotConverged { iterations: usize, delta: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Model(_) => 4,
            CliError::NotConverged { .. } => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Model(m) => f.write_str(m),
            CliError::NotConverged { iterations, delta } => write!(
                f,
                "no convergence after {iterations} iterations (last delta {delta:.3e}); rerun with --best-effort to accept"
            ),
        }
    }
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::InvalidSpec(m) => CliError::Usage(m),
            other => CliError::Model(other.to_string()),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| input_err(path, e))
}

fn write_file<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| input_err(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| input_err(path, e))
}

fn load_graph(a: &GraphArgs) -> Result<DirectedGraph, CliError> {
    let mut head = [0u8; 5];
    let is_cache = {
        let mut f = open(&a.graph)?;
        f.read(&mut head).map_err(|e| input_err(&a.graph, e))? == 5 && &head == CACHE_MAGIC
    };
    let g = if is_cache {
        read_binary_cache(open(&a.graph)?)
    } else {
        load_edge_list(
            &a.graph,
            LoadOptions {
                weighted: a.weighted,
                nodes: a.nodes,
            },
        )
    }
    .map_err(|e: GraphError| input_err(&a.graph, e))?;
    match a.nodes {
        Some(n) if is_cache && n != g.node_count() => Err(CliError::Usage(format!(
            "--nodes {n} disagrees with the cache ({} nodes)",
            g.node_count()
        ))),
        _ => Ok(if is_cache && !a.weighted {
            g.unweighted()
        } else {
            g
        }),
    }
}

fn load_traffic(path: &Path, n: usize, conserve: bool) -> Result<TrafficMarginals, CliError> {
    formats::read_traffic(open(path)?, n, conserve).map_err(|e| match e {
        FormatError::Model(m) => CliError::Model(format!("{}: {m}", path.display())),
        other => input_err(path, other),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rank(a) => rank(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
        Command::Baseline(a) => baseline(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Check(a) => check(a),
        Command::Reorder(a) => reorder(a),
        Command::Remap(a) => remap(a),
    }
}

fn rank(a: RankArgs) -> Result<(), CliError> {
    let prior = PriorConfig::new(a.alpha, a.beta).map_err(|e| CliError::Usage(e.to_string()))?;
    if a.tol.is_nan() || a.tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let g = load_graph(&a.graph)?;
    let t = load_traffic(&a.traffic.traffic, g.node_count(), a.traffic.conserve_flow)?;
    let opts = FitOptions {
        prior,
        tol: a.tol,
        max_iter: a.max_iter,
        threads: a.threads,
        ..FitOptions::default()
    };
    let started = Instant::now();
    let quiet = a.quiet;
    let report = fit_with_progress(&g, &t, &opts, |k, delta| {
        if !quiet {
            eprintln!("iteration {k}\tdelta {delta:.6e}");
        }
    })?;
    let elapsed = started.elapsed().as_secs_f64();
    eprintln!(
        "iterations {}\tfinal delta {:.6e}\tconverged {}\tseconds per iteration {:.6}",
        report.iterations,
        report.final_delta,
        report.converged,
        elapsed / report.iterations.max(1) as f64
    );
    write_file(&a.out, |w| formats::write_strengths(&report.lambda, w))?;
    if let Some(path) = &a.transitions {
        let table = transition_probabilities(&g, &report.lambda);
        write_file(path, |w| formats::write_transitions(&table, w))?;
    }
    if !report.converged && !a.best_effort {
        return Err(CliError::NotConverged {
            iterations: report.iterations,
            delta: report.final_delta,
        });
    }
    Ok(())
}

fn parse_lambda_dist(spec: &str) -> Result<f64, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--lambda-dist expects lognormal:SIGMA, got {spec:?}"
        ))
    };
    let sigma = spec.strip_prefix("lognormal:").ok_or_else(bad)?;
    let sigma: f64 = sigma.parse().map_err(|_| bad())?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(bad());
    }
    Ok(sigma)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let n = g.node_count();
    let lam = match (&a.lambda, &a.lambda_dist) {
        (Some(path), _) => {
            formats::read_strengths(open(path)?, n).map_err(|e| input_err(path, e))?
        }
        (None, Some(dist)) => lognormal_strengths(n, parse_lambda_dist(dist)?, a.seed),
        (None, None) => return Err(CliError::Usage("give --lambda or --lambda-dist".into())),
    };
    if let Some(path) = &a.lambda_out {
        write_file(path, |w| formats::write_strengths(&lam, w))?;
    }
    let length = match (a.length, a.stop_prob) {
        (Some(t), _) => TrajectoryLength::Fixed(t),
        (None, Some(q)) => TrajectoryLength::Geometric {
            stop_probability: q,
        },
        (None, None) => return Err(CliError::Usage("give --length or --stop-prob".into())),
    };
    let start = match a.start.as_str() {
        "uniform" => StartNode::Uniform,
        id => StartNode::Fixed(id.parse().map_err(|_| {
            CliError::Usage(format!(
                "--start expects 'uniform' or a node id, got {id:?}"
            ))
        })?),
    };
    let spec = TrajectorySpec {
        num_trajectories: a.trajectories,
        length,
        start,
        seed: a.seed,
        allow_early_stop: a.allow_early_stop,
    };
    let counts = sample_trajectories(&g, &lam, &spec, a.threads)?;
    eprintln!("transitions {}", counts.total());
    write_file(&a.out, |w| formats::write_counts(&counts, w))?;
    if let Some(path) = &a.traffic_out {
        let t = aggregate_marginals(&counts);
        write_file(path, |w| formats::write_traffic(&t, w))?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    if a.nodes > 1 && (a.out_degree == 0 || a.out_degree >= a.nodes) {
        return Err(CliError::Usage(format!(
            "--out-degree must lie in 1..{} for {} nodes",
            a.nodes, a.nodes
        )));
    }
    let g = random_strongly_connected(a.nodes, a.out_degree, a.seed);
    write_file(&a.out, |w| write_edge_list(&g, w))
}

fn baseline(a: BaselineArgs) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let table = match a.method {
        BaselineMethod::Traffic => {
            let path = a
                .traffic
                .as_ref()
                .ok_or_else(|| CliError::Usage("--method traffic needs --traffic".into()))?;
            let t = load_traffic(path, g.node_count(), a.conserve_flow)?;
            baseline_traffic(&g, &t)
        }
        BaselineMethod::Pagerank => {
            if !(a.damping > 0.0 && a.damping < 1.0) {
                return Err(CliError::Usage("--damping must lie in (0, 1)".into()));
            }
            let scores = pagerank(
                &g,
                &PageRankOptions {
                    damping: a.damping,
                    tol: a.pagerank_tol,
                    ..PageRankOptions::default()
                },
            );
            baseline_pagerank(&g, &scores)
        }
        BaselineMethod::Uniform => baseline_uniform(&g),
    };
    write_file(&a.out, |w| formats::write_transitions(&table, w))
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let n = g.node_count();
    let counts = formats::read_counts(open(&a.counts)?, n).map_err(|e| input_err(&a.counts, e))?;
    let mut estimates = Vec::new();
    for spec in &a.estimates {
        let (name, path) = spec.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--estimate expects NAME=PATH, got {spec:?}"))
        })?;
        let path = Path::new(path);
        let table = formats::read_transitions(open(path)?, n).map_err(|e| input_err(path, e))?;
        estimates.push((name.to_string(), table));
    }
    let report = evaluate(&counts, &estimates).map_err(|e| CliError::Model(e.to_string()))?;
    for m in &report.methods {
        if let Some(kl) = report.mean_kl(m) {
            eprintln!("{m}\tweighted mean KL {kl:.6e}");
        }
    }
    write_file(&a.out, |w| report.write_tsv(w))?;
    if let Some(path) = &a.summary {
        write_file(path, |w| {
            report.write_json(&mut *w).and_then(|_| writeln!(w))
        })?;
    }
    Ok(())
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let t = load_traffic(&a.traffic.traffic, g.node_count(), a.traffic.conserve_flow)?;
    let prior = PriorConfig::new(a.alpha, 1.0).map_err(|e| CliError::Usage(e.to_string()))?;
    let d = diagnose(&g, &t, &prior)?;
    print!("{d}");
    if let Some(path) = &a.json {
        write_file(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &d).map_err(std::io::Error::other)?;
            writeln!(w)
        })?;
    }
    Ok(())
}

fn reorder(a: ReorderArgs) -> Result<(), CliError> {
    if a.out.is_none() && a.cache.is_none() {
        return Err(CliError::Usage("give --out and/or --cache".into()));
    }
    let g = load_graph(&a.graph)?;
    let g = match a.order {
        OrderArg::Hilbert => g.hilbert_reorder(),
        OrderArg::SrcSorted => g.src_sorted(),
    };
    if let Some(path) = &a.out {
        write_file(path, |w| write_edge_list(&g, w))?;
    }
    if let Some(path) = &a.cache {
        write_file(path, |w| write_binary_cache(&g, w))?;
    }
    Ok(())
}

fn remap(a: RemapArgs) -> Result<(), CliError> {
    let input = open(&a.input)?;
    match a.direction {
        RemapDirection::Encode => {
            let mut map = if a.map.exists() {
                IdMap::read(open(&a.map)?).map_err(|e| input_err(&a.map, e))?
            } else {
                IdMap::default()
            };
            let file = File::create(&a.out).map_err(|e| input_err(&a.out, e))?;
            formats::encode_columns(&mut map, input, file, a.columns)
                .map_err(|e| input_err(&a.input, e))?;
            write_file(&a.map, |w| map.write(w))
        }
        RemapDirection::Decode => {
            let map = IdMap::read(open(&a.map)?).map_err(|e| input_err(&a.map, e))?;
            let file = File::create(&a.out).map_err(|e| input_err(&a.out, e))?;
            formats::decode_columns(&map, input, file, a.columns)
                .map_err(|e| input_err(&a.input, e))
        }
    }
}
