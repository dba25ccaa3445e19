use std::fmt::Write;

use crate::data::{FileLayout, GroundTruth};

use super::LinkageEstimate;

/// Rendering choices for [`to_dot`].
#[derive(Clone, Debug, Default)]
pub struct DotOptions<'a> {
    /// Edges of clusters with probability at least this are green, others red.
    pub threshold: f64,
    /// Solid edges agree with the truth, dashed ones do not.
    pub truth: Option<&'a GroundTruth>,
    /// Written as a leading comment.
    pub provenance: Option<String>,
}

/// Undirected graph with one node per record (`"file.row"`, 1-based) and a
/// clique per estimated cluster.
pub fn to_dot(estimate: &LinkageEstimate, layout: &FileLayout, options: &DotOptions) -> String {
    let mut out = String::new();
    if let Some(p) = &options.provenance {
        for line in p.lines() {
            let _ = writeln!(out, "// {line}");
        }
    }
    out.push_str("graph linkage {\n  node [shape=ellipse];\n");
    for r in 0..estimate.n_records() {
        let _ = writeln!(out, "  \"{}\";", layout.coord(r));
    }
    for cluster in &estimate.clusters {
        let color = if cluster.probability >= options.threshold { "green" } else { "red" };
        for (i, &a) in cluster.members.iter().enumerate() {
            for &b in &cluster.members[i + 1..] {
                let style = match options.truth {
                    Some(t) if !t.same(a, b) => "dashed",
                    _ => "solid",
                };
                let _ = writeln!(
                    out,
                    "  \"{}\" -- \"{}\" [color={color}, style={style}, label=\"{:.3}\"];",
                    layout.coord(a),
                    layout.coord(b),
                    cluster.probability
                );
            }
        }
    }
    out.push_str("}\n");
    out
}
