use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use softcell::bend::subdivision_epsilon;
use softcell::planar::{build_grid_patch, growth_study, spike_accounting, GridKind};
use softcell::tiling::{bent_cube_node, blanket_figure, cube_node_figure, NodeId};
use softcell::{
    fixture_graph, generate_cube_patch, phi_eval, soften_patch, spherical_subdivision, two_color,
    validate_coloring, verify_node, vertex_figure, BendParams, PolyhedralGraph, SoftenedPatch,
    TilingPatch, VerificationReport, VerifyOptions, VertexFigure,
};
use softcell_cli::{export_obj, format_sig9, sample_meshes};

#[derive(Parser)]
#[command(
    name = "softcell",
    version,
    about = "Soften the nodes of polyhedral cube tilings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a tiling patch.
    Generate {
        #[arg(long, value_enum, default_value_t = Tiling::Cube)]
        tiling: Tiling,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        extent: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the vertex figure of an interior node, or a built-in figure.
    Figure {
        #[arg(long, required_unless_present = "fixture", requires = "node")]
        patch: Option<PathBuf>,
        /// Lattice coordinates `i,j,k` of the node.
        #[arg(long, value_parser = parse_triple)]
        node: Option<[f64; 3]>,
        #[arg(long, value_enum, conflicts_with = "patch")]
        fixture: Option<FigureFixture>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spherical subdivision graph of a vertex figure.
    Subdivide {
        #[arg(long)]
        figure: PathBuf,
        /// Sphere radius; defaults to half the safe limit of the figure.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-color a subdivision graph (or a named fixture graph).
    Color {
        #[arg(long, required_unless_present = "fixture")]
        graph: Option<PathBuf>,
        #[arg(long, conflicts_with = "graph")]
        fixture: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Soften every interior node of a patch.
    Soften {
        #[arg(long)]
        patch: PathBuf,
        /// Bend parameters; missing fields take their defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification suite on every bend; exits 1 if any check fails.
    Verify {
        #[arg(long)]
        soft: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Verification options; missing fields take their defaults.
        #[arg(long)]
        options: Option<PathBuf>,
    },
    /// Write per-cell OBJ meshes and a manifest.
    Export {
        #[arg(long)]
        soft: PathBuf,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(8..))]
        resolution: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Planar spike accounting.
    Planar {
        #[command(subcommand)]
        command: PlanarCommand,
    },
    /// Evaluate φ or one of its first two derivatives.
    Phi {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
        order: u8,
    },
}

#[derive(Subcommand)]
enum PlanarCommand {
    /// Accounting of an `a × b` block of a grid pattern.
    Audit {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 2)]
        a: u32,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accounting of disk-clipped patches for growing radii.
    Grow {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0])]
        rho: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Tiling {
    Cube,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureFixture {
    CubeNode,
    BentCubeNode,
    Blanket,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Square,
    #[value(alias = "smoothed_square")]
    SmoothedSquare,
    Brick,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected i,j,k, got {} values", v.len()))
}

impl From<Kind> for GridKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Square => GridKind::Square,
            Kind::SmoothedSquare => GridKind::SmoothedSquare,
            Kind::Brick => GridKind::Brick,
        }
    }
}

/// A domain failure: printed as `error: <Name>: <message>`, exit status 1.
struct Failure {
    name: &'static str,
    message: String,
}

impl Failure {
    fn new(name: &'static str, message: impl Display) -> Self {
        Failure {
            name,
            message: message.to_string(),
        }
    }
}

macro_rules! named_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.name(), &e)
            }
        }
    )*};
}

named_errors!(
    softcell::BendError,
    softcell::TilingError,
    softcell::GraphError,
    softcell::planar::PlanarError,
    softcell_cli::ObjError
);

impl From<softcell_cli::MeshError> for Failure {
    fn from(e: softcell_cli::MeshError) -> Self {
        Failure::new("MeshError", e)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new("IoError", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new("ParseError", format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("core types serialize") + "\n"
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    fs::write(path, to_json(value))
        .map_err(|e| Failure::new("IoError", format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            print!("{}", to_json(value));
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PatchReport {
    format_version: u32,
    pass: bool,
    nodes: BTreeMap<NodeId, VerificationReport>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            tiling,
            extent,
            out,
        } => {
            let patch = match tiling {
                Tiling::Cube => generate_cube_patch(extent),
            };
            write_json(&out, &patch)
        }
        Command::Figure {
            patch,
            node,
            fixture,
            out,
        } => {
            let figure = match (fixture, patch, node) {
                (Some(FigureFixture::CubeNode), ..) => cube_node_figure(),
                (Some(FigureFixture::BentCubeNode), ..) => bent_cube_node(),
                (Some(FigureFixture::Blanket), ..) => blanket_figure(),
                (None, Some(path), Some(ijk)) => {
                    let patch: TilingPatch = read_json(&path)?;
                    let id = patch.node_at(ijk, 1e-9).ok_or_else(|| {
                        Failure::new("UnknownNode", format!("no node at {ijk:?}"))
                    })?;
                    vertex_figure(&patch, id)?
                }
                _ => unreachable!("clap enforces --patch with --node, or --fixture"),
            };
            write_json(&out, &figure)
        }
        Command::Subdivide {
            figure,
            epsilon,
            out,
        } => {
            let figure: VertexFigure = read_json(&figure)?;
            let eps = epsilon.unwrap_or_else(|| subdivision_epsilon(&figure));
            write_json(&out, &spherical_subdivision(&figure, eps)?)
        }
        Command::Color {
            graph,
            fixture,
            out,
        } => {
            let graph: PolyhedralGraph = match (graph, fixture) {
                (_, Some(name)) => fixture_graph(&name)?,
                (Some(path), None) => read_json(&path)?,
                (None, None) => unreachable!("clap requires --graph or --fixture"),
            };
            let coloring = two_color(&graph)?;
            let report = validate_coloring(&graph, &coloring)?;
            println!(
                "valid={} classes={}+{} connected={:?}",
                report.valid, report.class_sizes.0, report.class_sizes.1, report.class_connected
            );
            write_json(&out, &coloring)
        }
        Command::Soften { patch, params, out } => {
            let patch: TilingPatch = read_json(&patch)?;
            let params: BendParams = match params {
                Some(p) => read_json(&p)?,
                None => BendParams::default(),
            };
            let soft = soften_patch(&patch, &params)?;
            println!("softened {} nodes", soft.bends.len());
            write_json(&out, &soft)
        }
        Command::Verify {
            soft,
            report,
            options,
        } => {
            let soft: SoftenedPatch = read_json(&soft)?;
            let opts: VerifyOptions = match options {
                Some(p) => read_json(&p)?,
                None => VerifyOptions::default(),
            };
            let mut nodes = BTreeMap::new();
            for (&node, bend) in &soft.bends {
                let figure = vertex_figure(&soft.patch, node)?;
                nodes.insert(node, verify_node(bend, &figure, &opts));
            }
            let pass = nodes.values().all(|r| r.pass);
            let failing: Vec<String> = nodes
                .iter()
                .filter(|(_, r)| !r.pass)
                .map(|(n, r)| format!("{n}: {}", r.failures().join(",")))
                .collect();
            let count = nodes.len();
            let doc = PatchReport {
                format_version: softcell::FORMAT_VERSION,
                pass,
                nodes,
            };
            write_json(&report, &doc)?;
            if pass {
                println!("verified {count} nodes");
                Ok(())
            } else {
                Err(Failure::new("VerificationFailed", failing.join("; ")))
            }
        }
        Command::Export {
            soft,
            resolution,
            out,
        } => {
            let soft: SoftenedPatch = read_json(&soft)?;
            let meshes = sample_meshes(&soft, resolution as usize)?;
            let paths = export_obj(&meshes, &out)?;
            println!("wrote {} files to {}", paths.len(), out.display());
            Ok(())
        }
        Command::Planar { command } => match command {
            PlanarCommand::Audit { kind, a, b, out } => {
                let report = spike_accounting(&build_grid_patch(kind.into(), a, b))?;
                emit(out.as_deref(), &report)
            }
            PlanarCommand::Grow { kind, rho, out } => {
                emit(out.as_deref(), &growth_study(kind.into(), &rho)?)
            }
        },
        Command::Phi { x, order } => {
            println!("{}", format_sig9(phi_eval(x, order)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.name, f.message);
            ExitCode::from(1)
        }
    }
}
