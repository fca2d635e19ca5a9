//! Command-line front end: presets, solves, deformation runs, curves,
//! analytics, and SVG rendering.
//!
//! Exit codes: 1 for parse or validation problems, 2 for numerical
//! failures (singular or non-generic states), 3 when the move cap is
//! exceeded.

mod netfile;
mod svg;

use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use netelast::analysis::{
    blend_analysis, extract_zw, limit_ratio, verify_loss_identity, w_shift_bound, IndexSet,
    LossReport, WeightFunction,
};
use netelast::deform::{
    check_e0_vs_r, energy_loss_ratio, fast_deform, slow_deform, stress_strain_curve,
    BracketCheck, Caps, CurvePoint, DeformationTrace, TraceSchedule,
};
use netelast::linalg::Matrix;
use netelast::mechanics::{permanent_strain, rotation2, uniaxial_map, youngs_modulus};
use netelast::moves::{Firmness, MoveParams};
use netelast::net::{
    preset_by_name, EdgeOrbit, LatticeOffset, PeriodMap, QuotientGraph, Realization,
};
use netelast::solver::{
    energy, global_tension, harmonic_realize, local_tension, per_weight_tension, standardize,
    TensionTensor,
};

use netfile::NetFile;

#[derive(Parser)]
#[command(
    name = "netelast",
    version,
    about = "Elasticity and plasticity of periodic weighted graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct IoArgs {
    /// Input file; stdin when omitted.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a preset net file.
    Lattice {
        /// One of: hexagonal, square, cubic, single-vertex.
        preset: String,
        /// Spacing of the hexagonal and square presets.
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        /// Loop weight of the hexagonal and square presets.
        #[arg(long, default_value_t = 1.0)]
        w0: f64,
        /// Non-loop weight of the hexagonal and square presets.
        #[arg(long, default_value_t = 1.0)]
        w1: f64,
        /// Loop weight of the cubic and single-vertex presets.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Spacing of the cubic and single-vertex presets.
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Dimension of the cubic and single-vertex presets.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Single-vertex edges as `i1,...,iN=w`; repeatable.
        #[arg(long = "edge", value_name = "OFFSET=W")]
        edges: Vec<String>,
        #[arg(long = "out", value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Solve the harmonic realization of a net file.
    Harmonic {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Solve and transform to the standard realization.
    Standardize {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Tension tensors and the ellipse data of a net.
    Tension {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Run a fast or slow deformation and write the trace.
    Deform {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sample the stress-strain curve of a trace as CSV.
    Curve {
        #[command(flatten)]
        io: IoArgs,
        /// Number of sample rows across the stretch range.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Weight-variation and blending analytics.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Render a net, or the final net of a trace, as SVG.
    Render {
        #[command(flatten)]
        io: IoArgs,
        /// Treat the input as a deformation trace.
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// `slow` scans the schedule; `fast` applies the map at once.
    #[arg(long, default_value = "slow")]
    mode: String,
    /// Target stretch ratio.
    #[arg(long)]
    lambda: f64,
    /// Extension angle in radians (two-dimensional runs).
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// File with a row-major orthogonal matrix for higher dimensions.
    #[arg(long, value_name = "FILE")]
    rotation: Option<PathBuf>,
    /// Contraction threshold.
    #[arg(long)]
    delta: f64,
    /// Constant firmness threshold K.
    #[arg(long = "K", value_name = "K", conflicts_with = "kappa")]
    k: Option<f64>,
    /// Linear firmness K_d = kappa * d.
    #[arg(long, value_name = "KAPPA")]
    kappa: Option<f64>,
    /// Loop fraction kept on the first copy.
    #[arg(long, default_value_t = 0.25)]
    p0: f64,
    /// Loop fraction kept on the second copy.
    #[arg(long, default_value_t = 0.25)]
    p1: f64,
    /// Loop fraction turned into the bridge edge.
    #[arg(long, default_value_t = 0.5)]
    p01: f64,
    /// Scan step of the slow schedule.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Bisection tolerance for event times.
    #[arg(long, default_value_t = 1e-10)]
    tol_t: f64,
    /// Move cap; defaults to ten times the vertex count.
    #[arg(long)]
    max_moves: Option<usize>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Fit the reciprocal displacement law of a designated edge.
    Zw {
        #[command(flatten)]
        io: IoArgs,
        /// Tail vertex name of the designated edge.
        #[arg(long)]
        v0: String,
        /// Head vertex name of the designated edge.
        #[arg(long)]
        v1: String,
        /// Three probe weights, comma separated.
        #[arg(long, default_value = "0.5,1.5,4.0")]
        probes: String,
        /// Extra weight at which the loss identities are verified.
        #[arg(long, default_value_t = 2.0)]
        verify: f64,
    },
    /// Loss ratio of a single-vertex net with radial Gaussian weights.
    LimitRatio {
        /// Gaussian width.
        #[arg(long)]
        sigma: f64,
        /// Loop fraction turned into the bridge edge.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Scales at which to evaluate, comma separated.
        #[arg(long, default_value = "1.0")]
        scales: String,
        /// Truncation radius of the lattice sums.
        #[arg(long)]
        radius: f64,
        /// Ambient dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Half-space normal, comma separated.
        #[arg(long, default_value = "1,0")]
        normal: String,
        #[arg(long = "out", value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Blend two cube-lattice weight tables (spacings 1 and m).
    Blend {
        /// Spacing multiplier of the second component.
        #[arg(long)]
        m: i64,
        /// Loop weight of both components.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Loop fraction turned into the bridge edge.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Blend grid step.
        #[arg(long, default_value_t = 0.005)]
        grid_step: f64,
        /// Ambient dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long = "out", value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<netelast::Error> for Failure {
    fn from(e: netelast::Error) -> Failure {
        use netelast::Error::*;
        let code = match e {
            // Properties of the input rather than of the numerics.
            VertexOutOfRange { .. } | NegativeWeight(_) | OffsetDimension { .. }
            | ZeroDimension | UnknownPreset(_) | InvalidParameter(_) | NotOrthogonal
            | Disconnected | SingularPeriod => 1,
            MoveCapExceeded { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(f) = run(cli) {
        eprintln!("netelast: {}", f.message);
        std::process::exit(f.code);
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String, Failure> {
    match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::validation(format!("cannot read {}: {e}", p.display()))),
        None => {
            let mut buffer = String::new();
            std::io::stdin()
                .read_to_string(&mut buffer)
                .map_err(|e| Failure::validation(format!("cannot read stdin: {e}")))?;
            Ok(buffer)
        }
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| Failure::validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_net(path: &Option<PathBuf>) -> Result<(NetFile, QuotientGraph, PeriodMap), Failure> {
    let text = read_input(path)?;
    let file = NetFile::parse(&text).map_err(Failure::validation)?;
    let (graph, period) = file.to_net().map_err(Failure::validation)?;
    Ok((file, graph, period))
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn parse_floats(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Failure::validation(format!("bad number `{s}`: {e}")))
        })
        .collect()
}

fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var("NETELAST_THREADS") {
        Err(_) => Ok(1),
        Ok(text) => {
            let n: usize = text.parse().map_err(|_| {
                Failure::validation(format!("NETELAST_THREADS=`{text}` is not an integer"))
            })?;
            if n == 0 {
                return Err(Failure::validation("NETELAST_THREADS must be at least 1"));
            }
            Ok(n)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SolveReport {
    net: NetFile,
    energy: f64,
    covolume: f64,
    tension: Vec<Vec<f64>>,
    youngs_modulus: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct StandardizeReport {
    #[serde(flatten)]
    solve: SolveReport,
    transform: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TensionReport {
    energy: f64,
    covolume: f64,
    global: Vec<Vec<f64>>,
    per_weight: Vec<Vec<f64>>,
    locals: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    trace: DeformationTrace,
    energy_loss_ratio: f64,
    permanent_strain: Option<f64>,
    strain_bracket: BracketCheck,
}

#[derive(Serialize, Deserialize)]
struct ZwReport {
    z: Vec<f64>,
    w_shift: Option<f64>,
    residual: f64,
    w_shift_bound: f64,
    verification: LossReport,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Lattice {
            preset,
            l,
            w0,
            w1,
            a,
            m,
            dim,
            edges,
            output,
        } => {
            let (graph, period) = if preset == "single-vertex" || preset == "single_vertex" {
                single_vertex_preset(dim, m, a, &edges)?
            } else {
                if !edges.is_empty() {
                    return Err(Failure::validation("--edge applies to single-vertex only"));
                }
                preset_by_name(&preset, l, w0, w1, a, m, dim)?
            };
            let file = NetFile::from_net(&graph, &period, None);
            write_output(&output, &format!("{}\n", file.to_json()))
        }
        Command::Harmonic { io } => {
            let (_, graph, period) = read_net(&io.input)?;
            let realization = harmonic_realize(&graph, &period)?;
            let report = solve_report(&graph, &period, &realization);
            write_output(&io.output, &format!("{}\n", to_json(&report)))
        }
        Command::Standardize { io } => {
            let (_, graph, period) = read_net(&io.input)?;
            let (realization, transform) = standardize(&graph, &period)?;
            let solve = solve_report(&graph, &realization.period.clone(), &realization);
            let report = StandardizeReport {
                solve,
                transform: matrix_rows(&transform),
            };
            write_output(&io.output, &format!("{}\n", to_json(&report)))
        }
        Command::Tension { io } => {
            let (file, graph, period) = read_net(&io.input)?;
            let realization = match file.realization(&period).map_err(Failure::validation)? {
                Some(r) => r,
                None => harmonic_realize(&graph, &period)?,
            };
            let report = TensionReport {
                energy: energy(&graph, &realization),
                covolume: period.covolume(),
                global: matrix_rows(&global_tension(&graph, &realization).matrix),
                per_weight: matrix_rows(&per_weight_tension(&graph, &realization)?.matrix),
                locals: (0..graph.vertex_count())
                    .map(|v| matrix_rows(&local_tension(&graph, &realization, v).matrix))
                    .collect(),
            };
            write_output(&io.output, &format!("{}\n", to_json(&report)))
        }
        Command::Deform { io, run } => {
            let (_, graph, period) = read_net(&io.input)?;
            let trace_file = deform_run(&graph, &period, &run)?;
            write_output(&io.output, &format!("{}\n", to_json(&trace_file)))
        }
        Command::Curve { io, samples } => {
            let text = read_input(&io.input)?;
            let trace_file: TraceFile = serde_json::from_str(&text)
                .map_err(|e| Failure::validation(format!("invalid trace file: {e}")))?;
            let threads = threads_from_env()?;
            let csv = curve_csv(&trace_file.trace, samples, threads)?;
            write_output(&io.output, &csv)
        }
        Command::Analyze { what } => analyze(what),
        Command::Render { io, trace } => {
            let text = read_input(&io.input)?;
            let svg = if trace {
                let trace_file: TraceFile = serde_json::from_str(&text)
                    .map_err(|e| Failure::validation(format!("invalid trace file: {e}")))?;
                let t = &trace_file.trace;
                let graph = &t.graphs[t.final_graph];
                let realization = &t.final_realization;
                svg::render_svg(graph, realization, &realization.period)
                    .map_err(Failure::validation)?
            } else {
                let file = NetFile::parse(&text).map_err(Failure::validation)?;
                let (graph, period) = file.to_net().map_err(Failure::validation)?;
                let realization = match file.realization(&period).map_err(Failure::validation)? {
                    Some(r) => r,
                    None => harmonic_realize(&graph, &period)?,
                };
                svg::render_svg(&graph, &realization, &period).map_err(Failure::validation)?
            };
            write_output(&io.output, &svg)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report serializes")
}

fn solve_report(graph: &QuotientGraph, period: &PeriodMap, r: &Realization) -> SolveReport {
    let e = energy(graph, r);
    let covolume = period.covolume();
    SolveReport {
        net: NetFile::from_net(graph, period, Some(r)),
        energy: e,
        covolume,
        tension: matrix_rows(&global_tension(graph, r).matrix),
        youngs_modulus: youngs_modulus(e, covolume, graph.dimension()).ok(),
    }
}

fn single_vertex_preset(
    dim: usize,
    m: f64,
    a: f64,
    edges: &[String],
) -> Result<(QuotientGraph, PeriodMap), Failure> {
    let period = PeriodMap::new(Matrix::diagonal(&vec![m; dim]))?;
    let mut orbit_edges = vec![EdgeOrbit::new(0, 0, LatticeOffset::zero(dim), a)];
    for spec in edges {
        let (offset_text, weight_text) = spec.split_once('=').ok_or_else(|| {
            Failure::validation(format!("bad --edge `{spec}`, expected OFFSET=W"))
        })?;
        let offset: Vec<i64> = offset_text
            .split(',')
            .map(|c| {
                c.trim()
                    .parse()
                    .map_err(|e| Failure::validation(format!("bad offset `{offset_text}`: {e}")))
            })
            .collect::<Result<_, _>>()?;
        let weight: f64 = weight_text
            .trim()
            .parse()
            .map_err(|e| Failure::validation(format!("bad weight `{weight_text}`: {e}")))?;
        orbit_edges.push(EdgeOrbit::new(0, 0, LatticeOffset(offset), weight));
    }
    let graph = QuotientGraph::build(dim, 1, orbit_edges)?;
    Ok((graph, period))
}

fn deform_run(
    graph: &QuotientGraph,
    period: &PeriodMap,
    run: &RunArgs,
) -> Result<TraceFile, Failure> {
    let firmness = match (run.k, run.kappa) {
        (Some(k), None) => Firmness::Constant(k),
        (None, Some(kappa)) => Firmness::Linear(kappa),
        _ => {
            return Err(Failure::validation(
                "exactly one of --K or --kappa is required",
            ))
        }
    };
    let params = MoveParams::new(run.delta, firmness, run.p0, run.p1, run.p01)?;
    let caps = Caps {
        max_moves: run.max_moves,
        scan_step: run.dt,
        bisect_tol: run.tol_t,
    };
    let dim = graph.dimension();
    let rotation = match &run.rotation {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::validation(format!("cannot read {}: {e}", path.display()))
            })?;
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| Failure::validation(format!("invalid rotation file: {e}")))?;
            Matrix::from_rows(&rows)
        }
        None => {
            if dim == 2 {
                rotation2(run.theta)
            } else if run.theta == 0.0 {
                Matrix::identity(dim)
            } else {
                return Err(Failure::validation(
                    "--theta applies to dimension 2; pass --rotation for higher dimensions",
                ));
            }
        }
    };
    let (standard, _) = standardize(graph, period)?;
    let trace = match run.mode.as_str() {
        "slow" => slow_deform(graph, &standard, run.lambda, &rotation, &params, &caps)?,
        "fast" => {
            let map = uniaxial_map(run.lambda, dim, &rotation)?;
            fast_deform(graph, &standard, &map, &params, &caps)?
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown mode `{other}`; use slow or fast"
            )))
        }
    };
    let loss = energy_loss_ratio(&trace)?;
    let strain = match trace.schedule {
        TraceSchedule::Slow { .. } => permanent_strain(
            &TensionTensor {
                matrix: trace.final_pullback_tension.clone(),
            },
            &trace.rotation,
        )
        .ok(),
        TraceSchedule::Fast => None,
    };
    let bracket = check_e0_vs_r(&trace)?;
    Ok(TraceFile {
        trace,
        energy_loss_ratio: loss,
        permanent_strain: strain,
        strain_bracket: bracket,
    })
}

fn format_row(point: &CurvePoint) -> String {
    format!(
        "{},{},{},{}\n",
        point.strain, point.sigma_eng, point.sigma_true, point.energy
    )
}

/// CSV of the stress-strain curve; rows are rendered by `threads`
/// workers in deterministic order.
fn curve_csv(trace: &DeformationTrace, samples: usize, threads: usize) -> Result<String, Failure> {
    let points = stress_strain_curve(trace, trace.covolume, samples)?;
    let mut csv = String::from("strain,sigma_eng,sigma_true,energy\n");
    if threads <= 1 || points.len() < 2 * threads {
        for p in &points {
            csv.push_str(&format_row(p));
        }
    } else {
        let chunk = points.len().div_ceil(threads);
        let parts: Vec<String> = std::thread::scope(|scope| {
            let handles: Vec<_> = points
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(format_row).collect::<String>()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for part in parts {
            csv.push_str(&part);
        }
    }
    Ok(csv)
}

fn analyze(what: AnalyzeCommand) -> Result<(), Failure> {
    match what {
        AnalyzeCommand::Zw {
            io,
            v0,
            v1,
            probes,
            verify,
        } => {
            let (file, graph, period) = read_net(&io.input)?;
            let index_of = |name: &str| -> Result<usize, Failure> {
                file.vertices
                    .iter()
                    .position(|v| v == name)
                    .ok_or_else(|| Failure::validation(format!("unknown vertex name `{name}`")))
            };
            let v0 = index_of(&v0)?;
            let v1 = index_of(&v1)?;
            let probe_values = parse_floats(&probes)?;
            if probe_values.len() != 3 {
                return Err(Failure::validation("exactly three probe weights required"));
            }
            let fit = extract_zw(
                &graph,
                &period,
                v0,
                v1,
                [probe_values[0], probe_values[1], probe_values[2]],
            )?;
            let verification = verify_loss_identity(&graph, &period, &fit, verify)?;
            let report = ZwReport {
                z: fit.z.clone(),
                w_shift: fit.w_shift,
                residual: fit.residual,
                w_shift_bound: w_shift_bound(&graph, v0, v1),
                verification,
            };
            write_output(&io.output, &format!("{}\n", to_json(&report)))
        }
        AnalyzeCommand::LimitRatio {
            sigma,
            p,
            scales,
            radius,
            dim,
            normal,
            output,
        } => {
            let period = PeriodMap::new(Matrix::identity(dim))?;
            let normal = parse_floats(&normal)?;
            if normal.len() != dim {
                return Err(Failure::validation("normal length must match --dim"));
            }
            let scales = parse_floats(&scales)?;
            let out = limit_ratio(
                &WeightFunction::gaussian(sigma),
                &IndexSet::half_space(normal),
                p,
                &scales,
                radius,
                &period,
            )?;
            #[derive(Serialize)]
            struct Row {
                s: f64,
                ratio: f64,
            }
            let rows: Vec<Row> = out.into_iter().map(|(s, ratio)| Row { s, ratio }).collect();
            write_output(&output, &format!("{}\n", to_json(&rows)))
        }
        AnalyzeCommand::Blend {
            m,
            a,
            p,
            grid_step,
            dim,
            output,
        } => {
            if m <= 0 {
                return Err(Failure::validation("--m must be positive"));
            }
            if grid_step <= 0.0 || grid_step > 1.0 {
                return Err(Failure::validation("--grid-step must be in (0, 1]"));
            }
            let period = PeriodMap::new(Matrix::identity(dim))?;
            let cube = |spacing: i64| WeightFunction::Table {
                loop_weight: a,
                entries: (0..dim)
                    .map(|k| {
                        let mut offset = vec![0i64; dim];
                        offset[k] = spacing;
                        (LatticeOffset(offset), 1.0)
                    })
                    .collect(),
            };
            let steps = (1.0 / grid_step).round() as usize;
            let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
            let report = blend_analysis(
                &cube(1),
                &cube(m),
                p,
                &grid,
                4.0 * m as f64,
                &period,
                &IndexSet::half_space(vec![1.0; dim]),
            )?;
            write_output(&output, &format!("{}\n", to_json(&report)))
        }
    }
}
