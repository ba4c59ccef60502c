//! `padic-index` command-line tool.
//!
//! Exit codes: 0 success, 2 validation failure, 3 certificate failure,
//! 4 file I/O error, 5 malformed input, 6 numerical error, 64 usage error.
//! Errors are written to stderr as `{"error": kind, "message": text}`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use padic_index::embedding::{
    auto_embed, discretize, EmbeddedGraph, EmbeddingError, EmbeddingFile, MeasureMode,
};
use padic_index::graph::{Graph, GraphError};
use padic_index::heat::{
    index_estimate, index_ladder, solve_cauchy, trace_series, HeatError, IndexConfig,
};
use padic_index::io::{self, IoError, SpectrumBundle};
use padic_index::mumford::{mumford_index_report, Family, MumfordError, MumfordSpec};
use padic_index::operators::{
    advection_operator, assemble_coboundary_for_level, assemble_vertex_operator, edge_laplacian,
    vertex_graph_part, AssemblyParams, Convention, OperatorError,
};
use padic_index::spectral::{self, KernelTol, SpectralError};

#[derive(Debug, Parser)]
#[command(
    name = "padic-index",
    version,
    about = "Index estimates for graphs embedded in the p-adic numbers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph file and, optionally, an embedding file.
    Validate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        p: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectra of the vertex operator and the edge Laplacian.
    Spectrum {
        #[command(flatten)]
        run: RunArgs,
        /// Directory for CSV dumps of the vertex operator and the coboundary.
        #[arg(long)]
        matrices: Option<PathBuf>,
    },
    /// Heat traces on a time grid, as CSV.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated positive times; defaults to the estimator's grid.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Trace-difference index estimate with its certificate.
    Index {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated levels; overrides --level and reports a ladder.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<i32>>,
    },
    /// Index report for a Mumford-curve graph family.
    Mumford {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        genus: u32,
        /// Tree vertex count (tree-complete only).
        #[arg(long)]
        vertices: Option<usize>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Solves the heat equation from an initial point function.
    Cauchy {
        #[command(flatten)]
        run: RunArgs,
        /// CSV with header `point,value`.
        #[arg(long)]
        f0: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = OperatorArg::Vertex)]
        operator: OperatorArg,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 3)]
    p: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    level: i32,
    #[arg(long, value_enum, default_value_t = MeasureArg::Haar)]
    measure: MeasureArg,
    #[arg(long, value_enum, default_value_t = ConventionArg::Integral)]
    convention: ConventionArg,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Haar,
    Counting,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConventionArg {
    Integral,
    Compositional,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    ReductionGraph,
    HolesComplete,
    TreeComplete,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OperatorArg {
    Vertex,
    Advection,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Certificate(String),
    File(String),
    Parse(String),
    Numerical(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Certificate(_) => 3,
            Failure::File(_) => 4,
            Failure::Parse(_) => 5,
            Failure::Numerical(_) => 6,
            Failure::Usage(_) => 64,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation",
            Failure::Certificate(_) => "certificate",
            Failure::File(_) => "io",
            Failure::Parse(_) => "parse",
            Failure::Numerical(_) => "numerical",
            Failure::Usage(_) => "usage",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m)
            | Failure::Certificate(m)
            | Failure::File(m)
            | Failure::Parse(m)
            | Failure::Numerical(m)
            | Failure::Usage(m) => m,
        }
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<OperatorError> for Failure {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Embedding(e) => e.into(),
            OperatorError::AlphaNotPositive(_) | OperatorError::DiscretizationMismatch => {
                Failure::Validation(e.to_string())
            }
            OperatorError::NotWellSeparated => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<HeatError> for Failure {
    fn from(e: HeatError) -> Self {
        match e {
            HeatError::Operator(e) => e.into(),
            HeatError::Embedding(e) => e.into(),
            HeatError::Spectral(e) => e.into(),
            HeatError::BadTolerance(_)
            | HeatError::LevelTooSmall { .. }
            | HeatError::TimeNotPositive(_)
            | HeatError::NegativeTime(_)
            | HeatError::DimensionMismatch { .. } => Failure::Validation(e.to_string()),
            HeatError::DegenerateResidual(_) => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<MumfordError> for Failure {
    fn from(e: MumfordError) -> Self {
        match e {
            MumfordError::Heat(e) => e.into(),
            MumfordError::Embedding(e) => e.into(),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Length { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Parse(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::File(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::File(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn load_embedding(graph: &Graph, path: Option<&Path>, p: u32) -> Result<EmbeddedGraph, Failure> {
    match path {
        None => Ok(auto_embed(graph, p, None)?),
        Some(path) => {
            let file: EmbeddingFile = serde_json::from_str(&read(path)?)
                .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
            Ok(file.embed(graph)?)
        }
    }
}

impl ParamArgs {
    fn check(&self) -> Outcome {
        if !(self.alpha > 0.0) {
            return Err(Failure::Validation(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.level < 1 {
            return Err(Failure::Validation(format!(
                "level must be at least 1, got {}",
                self.level
            )));
        }
        if !(self.tol > 0.0 && self.tol < 0.5) {
            return Err(Failure::Validation(format!(
                "tol must lie in (0, 0.5), got {}",
                self.tol
            )));
        }
        Ok(())
    }

    fn measure(&self) -> MeasureMode {
        match self.measure {
            MeasureArg::Haar => MeasureMode::Haar,
            MeasureArg::Counting => MeasureMode::Counting,
        }
    }

    fn convention(&self) -> Convention {
        match self.convention {
            ConventionArg::Integral => Convention::Integral,
            ConventionArg::Compositional => Convention::Compositional,
        }
    }

    fn assembly(&self) -> AssemblyParams {
        AssemblyParams::new(self.alpha)
            .with_measure(self.measure())
            .with_convention(self.convention())
    }

    fn index_config(&self) -> IndexConfig {
        IndexConfig {
            alpha: self.alpha,
            level: self.level,
            measure: self.measure(),
            convention: self.convention(),
            tol: self.tol,
        }
    }
}

impl RunArgs {
    fn embed(&self) -> Result<EmbeddedGraph, Failure> {
        self.params.check()?;
        let graph = load_graph(&self.graph)?;
        load_embedding(&graph, self.embedding.as_deref(), self.params.p)
    }
}

fn cmd_validate(graph: &Path, embedding: Option<&Path>, p: u32, out: Option<&Path>) -> Outcome {
    let g = load_graph(graph)?;
    let report = g.validate();
    let (b0, b1) = g.betti_numbers();
    let mut doc = json!({
        "graph": {
            "vertices": g.num_vertices(),
            "simpleEdges": g.num_simple_edges(),
            "loops": g.loop_vertices().len(),
            "betti0": b0,
            "betti1": b1,
            "eulerCharacteristic": g.euler_characteristic(),
            "violations": report.violations,
        },
    });
    let mut failure = (!report.is_ok()).then(|| {
        let text: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        text.join("; ")
    });
    if failure.is_none() && embedding.is_some() {
        match load_embedding(&g, embedding, p) {
            Ok(emb) => {
                doc["embedding"] = serde_json::to_value(emb.report()).expect("serializable report")
            }
            Err(Failure::Validation(m)) => failure = Some(m),
            Err(other) => return Err(other),
        }
    }
    emit(out, &to_json(&doc))?;
    failure.map_or(Ok(()), |m| Err(Failure::Validation(m)))
}

fn cmd_spectrum(run: &RunArgs, matrices: Option<&Path>) -> Outcome {
    let emb = run.embed()?;
    let params = run.params.assembly();
    let disc = discretize(&emb, run.params.level, run.params.measure())?;
    let d = assemble_vertex_operator(&emb, &disc, &params)?;
    let a = assemble_coboundary_for_level(&emb, &disc, &params)?;
    let edge = edge_laplacian(&a);
    let mut spec_d = spectral::spectrum(&d, KernelTol::Auto)?;
    let spec_edge = spectral::spectrum(&edge, KernelTol::Auto)?;
    if !a.fallback {
        let graph_part = spectral::spectrum(&vertex_graph_part(&a), KernelTol::Auto)?;
        spec_d = spectral::residual_spectrum(&spec_d, &graph_part)?;
    }
    let p = emb.prime();
    let level = run.params.level;
    let doc = json!({
        "vertex": SpectrumBundle::new(&d, &spec_d, p, level),
        "edge": SpectrumBundle::new(&edge, &spec_edge, p, level),
    });
    if let Some(dir) = matrices {
        fs::create_dir_all(dir).map_err(|e| Failure::File(format!("{}: {e}", dir.display())))?;
        emit(Some(&dir.join("vertex_operator.csv")), &io::matrix_csv(&d)?)?;
        emit(Some(&dir.join("coboundary.csv")), &io::matrix_csv(&a)?)?;
    }
    emit(run.params.out.as_deref(), &to_json(&doc))
}

fn cmd_trace(run: &RunArgs, times: Option<&[f64]>) -> Outcome {
    let emb = run.embed()?;
    let est = index_estimate(&emb, &run.params.index_config())?;
    let series = match times {
        None => est.series,
        Some(times) => {
            if times.is_empty() {
                return Err(Failure::Validation("empty time grid".into()));
            }
            let mut sorted = times.to_vec();
            sorted.sort_by(f64::total_cmp);
            trace_series(
                &est.spec_vertex,
                &est.spec_edge,
                &sorted,
                est.series.residual_floor,
            )?
        }
    };
    emit(run.params.out.as_deref(), &io::trace_csv(&series)?)
}

fn cmd_index(run: &RunArgs, levels: Option<&[i32]>) -> Outcome {
    let emb = run.embed()?;
    let cfg = run.params.index_config();
    let (doc, ok) = match levels {
        None => {
            let est = index_estimate(&emb, &cfg)?;
            let ok = est.certificate.passed;
            (
                json!({ "chiEstimate": est.chi, "certificate": est.certificate }),
                ok,
            )
        }
        Some(levels) => {
            if levels.iter().any(|&l| l < 1) {
                return Err(Failure::Validation("levels must be at least 1".into()));
            }
            let ladder = index_ladder(&emb, &cfg, levels)?;
            let certs: Vec<_> = ladder.estimates.iter().map(|e| &e.certificate).collect();
            (
                json!({
                    "chiEstimate": ladder.chi(),
                    "consistent": ladder.consistent(),
                    "certificates": certs,
                }),
                ladder.consistent(),
            )
        }
    };
    emit(run.params.out.as_deref(), &to_json(&doc))?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Certificate(
            "trace difference is not within tol of an integer".into(),
        ))
    }
}

fn cmd_mumford(
    family: FamilyArg,
    genus: u32,
    vertices: Option<usize>,
    params: &ParamArgs,
) -> Outcome {
    params.check()?;
    let family = match family {
        FamilyArg::ReductionGraph => Family::ReductionGraph,
        FamilyArg::HolesComplete => Family::HolesComplete,
        FamilyArg::TreeComplete => Family::TreeComplete,
    };
    let spec = MumfordSpec {
        family,
        genus,
        tree_vertex_count: vertices,
    };
    let report = mumford_index_report(&spec, params.p, &params.index_config())?;
    emit(params.out.as_deref(), &to_json(&report))?;
    if !report.certificate.passed {
        return Err(Failure::Certificate(
            "trace difference is not within tol of an integer".into(),
        ));
    }
    if !report.matches_closed_form {
        return Err(Failure::Certificate(format!(
            "estimate {} differs from the closed form {}",
            report.chi_estimate, report.chi_closed_form
        )));
    }
    Ok(())
}

fn cmd_cauchy(run: &RunArgs, f0: &Path, t: f64, operator: OperatorArg) -> Outcome {
    let emb = run.embed()?;
    let disc = discretize(&emb, run.params.level, run.params.measure())?;
    let m = match operator {
        OperatorArg::Vertex => assemble_vertex_operator(&emb, &disc, &run.params.assembly())?,
        OperatorArg::Advection => advection_operator(&emb, &disc, run.params.alpha)?,
    };
    let labels = disc.labels(emb.graph());
    let initial = io::parse_point_function_csv(&read(f0)?, &labels)?;
    let solution = solve_cauchy(&m, &initial, t)?;
    emit(
        run.params.out.as_deref(),
        &io::point_function_csv(&labels, &solution)?,
    )
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Validate {
            graph,
            embedding,
            p,
            out,
        } => cmd_validate(graph, embedding.as_deref(), *p, out.as_deref()),
        Command::Spectrum { run, matrices } => cmd_spectrum(run, matrices.as_deref()),
        Command::Trace { run, times } => cmd_trace(run, times.as_deref()),
        Command::Index { run, levels } => cmd_index(run, levels.as_deref()),
        Command::Mumford {
            family,
            genus,
            vertices,
            params,
        } => cmd_mumford(*family, *genus, *vertices, params),
        Command::Cauchy {
            run,
            f0,
            t,
            operator,
        } => cmd_cauchy(run, f0, *t, *operator),
    }
}

fn configure_threads() -> Outcome {
    let Ok(value) = std::env::var("PADIC_THREADS") else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "PADIC_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn report(f: &Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": f.kind(), "message": f.message() }));
    ExitCode::from(f.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&Failure::Usage(e.to_string())),
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
