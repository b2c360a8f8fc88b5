//! Mesh and marks documents, provenance-log serialization, SVG rendering
//! and CSV output for the experiment harness.
//!
//! The mesh document stores the domain hierarchy (the primal data); active
//! sets are re-derived and every structural invariant re-validated on
//! parse, so a document that parses is a valid mesh.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::RunRecord;
use crate::config::{ConfigError, MeshConfig};
use crate::grid::Element;
use crate::mesh::{CellSet, DomainHierarchy, HierarchicalMesh, MeshError};
use crate::refine::{MarkSet, ProvenanceLog};

/// Version tag of the mesh interchange format.
pub const FORMAT_VERSION: u32 = 1;

/// Errors from parsing or rendering documents.
#[derive(Debug, Error)]
pub enum DocError {
    #[error("unsupported format version {0}, expected {FORMAT_VERSION}")]
    Version(u32),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("rendering supports dimensions 1 and 2, got {0}")]
    RenderDimension(usize),
}

/// The mesh interchange document: configuration plus the sorted cell lists
/// of every domain level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub format_version: u32,
    pub dim: usize,
    pub degrees: Vec<u32>,
    pub class_m: u32,
    pub extents: Vec<u64>,
    /// Entry `l` holds the level-`l` cell indices of `Omega^l`,
    /// lexicographically sorted.
    pub levels: Vec<Vec<Vec<u64>>>,
}

/// Serializes a mesh into its canonical document form.
pub fn emit_mesh(mesh: &HierarchicalMesh) -> MeshDocument {
    let cfg = mesh.cfg();
    let levels = (0..mesh.num_levels())
        .map(|l| {
            let mut cells: Vec<Vec<u64>> = mesh
                .hierarchy()
                .level_cells(l)
                .expect("level below num_levels")
                .iter()
                .cloned()
                .collect();
            cells.sort();
            cells
        })
        .collect();
    MeshDocument {
        format_version: FORMAT_VERSION,
        dim: cfg.dim(),
        degrees: cfg.degrees().to_vec(),
        class_m: cfg.class_m(),
        extents: cfg.extents().to_vec(),
        levels,
    }
}

/// Rebuilds a mesh from a document, re-deriving active sets and validating
/// all hierarchy invariants.
pub fn parse_mesh(doc: &MeshDocument) -> Result<HierarchicalMesh, DocError> {
    if doc.format_version != FORMAT_VERSION {
        return Err(DocError::Version(doc.format_version));
    }
    let cfg = MeshConfig::new(
        doc.dim,
        doc.degrees.clone(),
        doc.class_m,
        doc.extents.clone(),
    )?;
    let levels: Vec<CellSet> = doc
        .levels
        .iter()
        .map(|cells| cells.iter().cloned().collect())
        .collect();
    let hierarchy = DomainHierarchy::from_levels(cfg, levels)?;
    Ok(HierarchicalMesh::from_hierarchy(hierarchy))
}

/// Serializes a mesh to pretty-printed JSON.
pub fn mesh_to_json(mesh: &HierarchicalMesh) -> String {
    serde_json::to_string_pretty(&emit_mesh(mesh)).expect("mesh document serializes")
}

/// Parses a mesh from JSON text.
pub fn mesh_from_json(text: &str) -> Result<HierarchicalMesh, DocError> {
    let doc: MeshDocument = serde_json::from_str(text)?;
    parse_mesh(&doc)
}

/// One marked element in a marks document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub level: u32,
    pub index: Vec<u64>,
}

/// Serializes a mark set as a sorted list of `{level, index}` records.
pub fn marks_to_json(marks: &MarkSet) -> String {
    let records: Vec<MarkRecord> = marks
        .iter()
        .map(|e| MarkRecord {
            level: e.level(),
            index: e.index().to_vec(),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("marks serialize")
}

/// Parses a marks document.
pub fn marks_from_json(text: &str) -> Result<MarkSet, DocError> {
    let records: Vec<MarkRecord> = serde_json::from_str(text)?;
    Ok(records
        .into_iter()
        .map(|r| Element::new(r.level, r.index))
        .collect())
}

/// Serializes a provenance log to JSON.
pub fn log_to_json(log: &ProvenanceLog) -> String {
    serde_json::to_string_pretty(log).expect("log serializes")
}

/// Rendering options for [`render_svg`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    /// Fill cells by level and append a legend.
    pub color_by_level: bool,
}

const LEVEL_COLORS: [&str; 8] = [
    "#f4f6f8", "#cfe3f2", "#a9cbe4", "#7fb0d4", "#5a93c2", "#3d76ab", "#2a5c90", "#1c4573",
];

/// Renders the active elements as an SVG grid. Two-dimensional meshes draw
/// one rectangle per active element with stroke weight decreasing by
/// level; one-dimensional meshes draw an interval bar chart. Output is
/// deterministic for a given mesh.
pub fn render_svg(mesh: &HierarchicalMesh, options: RenderOptions) -> Result<String, DocError> {
    let cfg = mesh.cfg();
    match cfg.dim() {
        1 | 2 => {}
        d => return Err(DocError::RenderDimension(d)),
    }
    let scale = 64.0;
    let width = cfg.extents()[0] as f64 * scale;
    let height = if cfg.dim() == 2 {
        cfg.extents()[1] as f64 * scale
    } else {
        scale
    };
    let legend_height = if options.color_by_level { 28.0 } else { 0.0 };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\">\n",
        fmt_f(width),
        fmt_f(height + legend_height)
    ));
    for e in mesh.active_elements() {
        let side = scale * f64::exp2(-(e.level() as f64));
        let x = e.index()[0] as f64 * side;
        let y = if cfg.dim() == 2 {
            e.index()[1] as f64 * side
        } else {
            0.0
        };
        let h = if cfg.dim() == 2 { side } else { scale };
        let stroke_width = (2.0 / (e.level() as f64 + 1.0)).max(0.25);
        let fill = if options.color_by_level {
            LEVEL_COLORS[e.level() as usize % LEVEL_COLORS.len()]
        } else {
            "none"
        };
        out.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#222\" stroke-width=\"{}\"/>\n",
            fmt_f(x),
            fmt_f(y),
            fmt_f(side),
            fmt_f(h),
            fill,
            fmt_f(stroke_width)
        ));
    }
    if options.color_by_level {
        for l in 0..mesh.num_levels() {
            let x = 4.0 + l as f64 * 72.0;
            out.push_str(&format!(
                "  <rect x=\"{}\" y=\"{}\" width=\"16\" height=\"16\" fill=\"{}\" stroke=\"#222\" stroke-width=\"0.5\"/>\n",
                fmt_f(x),
                fmt_f(height + 6.0),
                LEVEL_COLORS[l as usize % LEVEL_COLORS.len()]
            ));
            out.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" font-size=\"12\">level {}</text>\n",
                fmt_f(x + 20.0),
                fmt_f(height + 18.0),
                l
            ));
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn fmt_f(v: f64) -> String {
    if v == v.trunc() {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

/// CSV header for experiment records.
pub const CSV_HEADER: &str =
    "seed,policy,J,sum_marked,new_elements,ratio,lambda_cap,max_lb_deficit,max_ub_sum,wall_time_ms";

/// Renders experiment records as CSV with a fixed schema.
pub fn experiment_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.policy,
            r.steps,
            r.total_marked,
            r.new_elements,
            r.ratio,
            r.lambda_cap,
            r.max_lb_deficit,
            r.max_ub_sum,
            r.wall_time_ms
        ));
    }
    out
}
