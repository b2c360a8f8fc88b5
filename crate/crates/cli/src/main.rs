//! Command-line interface for hierarchical mesh refinement: refine a mesh
//! from a marks file, check admissibility, overlay meshes, inspect the
//! truncated basis, run complexity experiments and render meshes to SVG.
//!
//! Exit codes: 0 on success, 1 on domain errors (bad documents, invalid
//! marks, dimension limits), 2 on usage errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use thb_refine::admissibility::{check_admissibility, is_admissible, is_strictly_admissible};
use thb_refine::basis::{hb_basis, thb_basis, thb_partition_sum};
use thb_refine::complexity::run_experiment;
use thb_refine::io;
use thb_refine::overlay::{check_overlay_properties, overlay};
use thb_refine::refine::{refine, refine_validated, MarkPolicy, ProvenanceLog};
use thb_refine::{HierarchicalMesh, MeshConfig};

#[derive(Parser)]
#[command(
    name = "thbref",
    about = "Admissibility-preserving dyadic refinement for hierarchical B-spline meshes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine a mesh by a marks file, preserving strict admissibility.
    Refine(RefineArgs),
    /// Check admissibility classes of a mesh.
    Check(CheckArgs),
    /// Overlay two meshes (coarsest common refinement).
    Overlay(OverlayArgs),
    /// Summarize the truncated hierarchical basis of a mesh.
    Basis(BasisArgs),
    /// Run instrumented refinement-complexity experiments.
    Complexity(ComplexityArgs),
    /// Render a mesh to SVG (dimension 1 or 2).
    Render(RenderArgs),
}

#[derive(Args)]
struct RefineArgs {
    /// Input mesh document.
    mesh: PathBuf,
    /// Marks document: a JSON list of {level, index} records.
    marks: PathBuf,
    /// Admissibility class m (defaults to the class stored in the mesh).
    #[arg(long = "class")]
    class_m: Option<u32>,
    /// Output mesh document.
    #[arg(short, long)]
    out: PathBuf,
    /// Also write the provenance log as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Check strict admissibility before and after with the independent
    /// checker.
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Input mesh document.
    mesh: PathBuf,
    /// Admissibility class m to check (defaults to the class stored in the
    /// mesh).
    #[arg(long = "class")]
    class_m: Option<u32>,
    /// Scan classes 1..=N and report the verdict for each.
    #[arg(long)]
    scan: Option<u32>,
}

#[derive(Args)]
struct OverlayArgs {
    /// First mesh document.
    a: PathBuf,
    /// Second mesh document.
    b: PathBuf,
    /// Output mesh document.
    #[arg(short, long)]
    out: PathBuf,
    /// Verify the overlay properties for class m, printing the verdicts.
    #[arg(long = "check")]
    check_class: Option<u32>,
}

#[derive(Args)]
struct BasisArgs {
    /// Input mesh document.
    mesh: PathBuf,
    /// Sample points per direction for the partition-of-unity residual.
    #[arg(long, default_value_t = 8)]
    sample: u32,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Spatial dimension.
    #[arg(long)]
    dim: usize,
    /// Per-direction degrees, comma separated; a single value is
    /// replicated.
    #[arg(long, value_delimiter = ',')]
    degrees: Vec<u32>,
    /// Per-direction extents of the initial grid, comma separated; a
    /// single value is replicated.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    extents: Vec<u64>,
    /// Admissibility class m.
    #[arg(long = "class")]
    class_m: u32,
    /// Marking policy: random-fraction, corner-chase, single-random,
    /// single-deepest, or all.
    #[arg(long)]
    policy: String,
    /// Fraction of elements marked per step for random-fraction.
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Number of refinement steps per run.
    #[arg(long)]
    steps: usize,
    /// Number of seeded runs; seeds are seed-base..seed-base+seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Input mesh document.
    mesh: PathBuf,
    /// Output SVG file.
    #[arg(short, long)]
    out: PathBuf,
    /// Fill cells by level and append a legend.
    #[arg(long)]
    legend: bool,
}

fn main() -> ExitCode {
    // behave like a regular unix tool when the output pipe closes early
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Refine(args) => cmd_refine(args),
        Command::Check(args) => cmd_check(args),
        Command::Overlay(args) => cmd_overlay(args),
        Command::Basis(args) => cmd_basis(args),
        Command::Complexity(args) => cmd_complexity(args),
        Command::Render(args) => cmd_render(args),
    }
}

fn load_mesh(path: &PathBuf) -> Result<HierarchicalMesh> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading mesh document {}", path.display()))?;
    io::mesh_from_json(&text).with_context(|| format!("parsing mesh document {}", path.display()))
}

fn cmd_refine(args: RefineArgs) -> Result<()> {
    let mut mesh = load_mesh(&args.mesh)?;
    let class_m = args.class_m.unwrap_or(mesh.cfg().class_m());
    let marks_text = fs::read_to_string(&args.marks)
        .with_context(|| format!("reading marks document {}", args.marks.display()))?;
    let marks = io::marks_from_json(&marks_text)?;
    let mut log = ProvenanceLog::new();
    if args.validate {
        refine_validated(&mut mesh, &marks, class_m, &mut log)?;
    } else {
        refine(&mut mesh, &marks, class_m, &mut log)?;
    }
    fs::write(&args.out, io::mesh_to_json(&mesh))
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.log {
        fs::write(path, io::log_to_json(&log))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "refined: {} marks, {} elements, {} levels",
        marks.len(),
        mesh.element_count(),
        mesh.num_levels()
    );
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    if let Some(max_class) = args.scan {
        let mut strict_passing = Vec::new();
        let mut admissible_passing = Vec::new();
        for m in 1..=max_class {
            let report = check_admissibility(&mesh, m);
            if report.strictly_admissible {
                strict_passing.push(m);
            }
            if report.admissible {
                admissible_passing.push(m);
            }
            println!(
                "class {m}: admissible: {}, strictly admissible: {}",
                report.admissible, report.strictly_admissible
            );
        }
        for (name, passing) in [
            ("strictly admissible", &strict_passing),
            ("admissible", &admissible_passing),
        ] {
            match (passing.first(), passing.last()) {
                (Some(lo), Some(hi)) => {
                    println!("{name} classes in range: smallest {lo}, largest {hi}")
                }
                _ => println!("not {name} for any class in range"),
            }
        }
        return Ok(());
    }
    let class_m = args.class_m.unwrap_or(mesh.cfg().class_m());
    let strict = is_strictly_admissible(&mesh, class_m);
    let class = is_admissible(&mesh, class_m);
    println!("strictly admissible: {}", strict.strictly_admissible);
    if let Some(w) = &strict.witness {
        println!(
            "  witness: domain level {} cell {} escapes the coarse interior region",
            w.level, w.cell
        );
    }
    println!("admissible: {}", class.admissible);
    if let Some(w) = &class.witness {
        println!(
            "  witness: element {} carries functions of levels {}..={}",
            w.element, w.min_level, w.max_level
        );
    }
    Ok(())
}

fn cmd_overlay(args: OverlayArgs) -> Result<()> {
    let a = load_mesh(&args.a)?;
    let b = load_mesh(&args.b)?;
    let merged = if let Some(m) = args.check_class {
        let (merged, report) = check_overlay_properties(&a, &b, m)?;
        println!("strictly admissible: {}", report.strictly_admissible);
        println!("interior-region containment: {}", report.omega_containment);
        println!("refines both inputs: {}", report.refines_both);
        println!("cardinality bound: {}", report.cardinality_bound);
        merged
    } else {
        overlay(&a, &b)?
    };
    fs::write(&args.out, io::mesh_to_json(&merged))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "overlay: {} elements, {} levels",
        merged.element_count(),
        merged.num_levels()
    );
    Ok(())
}

fn cmd_basis(args: BasisArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let functions = thb_basis::<f64>(&mesh);
    for f in &functions {
        println!(
            "origin level {} knot {:?}: {} surviving terms",
            f.origin().level(),
            f.origin().knot(),
            f.num_terms()
        );
    }
    // partition-of-unity residual over an interior sample grid
    let cfg = mesh.cfg();
    let samples = args.sample.max(1);
    let mut max_residual: f64 = 0.0;
    let mut point = vec![0.0_f64; cfg.dim()];
    let mut counter = vec![0u32; cfg.dim()];
    loop {
        for (i, &c) in counter.iter().enumerate() {
            point[i] = (c as f64 + 0.5) / samples as f64 * cfg.extents()[i] as f64;
        }
        let sum = thb_partition_sum(&mesh, &point)?;
        max_residual = max_residual.max((sum - 1.0).abs());
        let mut i = 0;
        loop {
            if i == counter.len() {
                println!(
                    "{} truncated functions ({} hierarchical), max partition-of-unity residual {max_residual:.3e}",
                    functions.len(),
                    hb_basis(&mesh).len()
                );
                return Ok(());
            }
            counter[i] += 1;
            if counter[i] < samples {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

fn cmd_complexity(args: ComplexityArgs) -> Result<()> {
    let degrees = replicate(&args.degrees, args.dim, "degrees")?;
    let extents = replicate(&args.extents, args.dim, "extents")?;
    let cfg = MeshConfig::new(args.dim, degrees, args.class_m, extents)?;
    let policies: Vec<MarkPolicy> = match args.policy.as_str() {
        "random-fraction" => vec![MarkPolicy::RandomFraction { theta: args.theta }],
        "corner-chase" => vec![MarkPolicy::CornerChase],
        "single-random" => vec![MarkPolicy::SingleRandom],
        "single-deepest" => vec![MarkPolicy::SingleDeepest],
        "all" => vec![
            MarkPolicy::RandomFraction { theta: args.theta },
            MarkPolicy::CornerChase,
            MarkPolicy::SingleRandom,
            MarkPolicy::SingleDeepest,
        ],
        other => bail!("unknown policy `{other}`"),
    };
    let seeds: Vec<u64> = (args.seed_base..args.seed_base + args.seeds).collect();
    let records = run_experiment(&cfg, args.class_m, &policies, args.steps, &seeds)?;
    fs::write(&args.out, io::experiment_csv(&records))
        .with_context(|| format!("writing {}", args.out.display()))?;
    for r in &records {
        println!(
            "policy {} seed {}: ratio {:.3} (cap {}), marked {}, new {}",
            r.policy, r.seed, r.ratio, r.lambda_cap, r.total_marked, r.new_elements
        );
    }
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let svg = io::render_svg(
        &mesh,
        io::RenderOptions {
            color_by_level: args.legend,
        },
    )?;
    fs::write(&args.out, svg).with_context(|| format!("writing {}", args.out.display()))?;
    println!("rendered {} elements", mesh.element_count());
    Ok(())
}

fn replicate<T: Clone>(values: &[T], dim: usize, field: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); dim]),
        n if n == dim => Ok(values.to_vec()),
        n => bail!("expected 1 or {dim} values for {field}, got {n}"),
    }
}
