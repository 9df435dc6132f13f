//! JSON, DOT and plain-text renderings.
//!
//! JSON is the machine interface and must be byte-deterministic: all maps go
//! through `serde_json`'s sorted-key representation and every list is emitted
//! in canonical order.

use serde_json::{json, Map, Value};

use crate::labels::LabelSet;
use crate::oracles::{point_count_polynomial, CountPolynomial};
use crate::presentation::{poincare_polynomial, ChowPresentation, PresentationChecks};
use crate::relations::RelationVector;
use crate::strata::StrataTable;
use crate::trees::ATree;

fn label_set_json(set: LabelSet) -> Value {
    Value::Array(set.labels().map(|l| json!(l)).collect())
}

fn label_sets_json<'a, I: IntoIterator<Item = &'a LabelSet>>(sets: I) -> Value {
    Value::Array(sets.into_iter().map(|s| label_set_json(*s)).collect())
}

/// One tree: `{"splits": [[...]], "blocks": {"<vertex index>": [[...]]}, "dim": d}`.
/// Vertices are indexed by the sorted order of their fingerprints.
pub fn tree_json(tree: &ATree) -> Value {
    let key = tree.canonical_key();
    let mut blocks = Map::new();
    for (i, vk) in key.vertices.iter().enumerate() {
        blocks.insert(i.to_string(), label_sets_json(&vk.blocks));
    }
    json!({
        "splits": label_sets_json(&key.splits),
        "blocks": Value::Object(blocks),
        "dim": tree.dimension(),
    })
}

/// Whole table: `{"weights": [...], "dims": {...}, "counts": {...}}`.
pub fn table_json(table: &StrataTable) -> Value {
    let mut v = table_json_weightless(table);
    v.as_object_mut()
        .unwrap()
        .insert("weights".into(), json!(table.weights().to_strings()));
    v
}

/// Table without the weights themselves; signature-equal data must agree on
/// this byte for byte.
pub fn table_json_weightless(table: &StrataTable) -> Value {
    let mut dims = Map::new();
    let mut counts = Map::new();
    for d in 0..=table.max_dim() {
        let list: Vec<Value> = table.strata(d).iter().map(tree_json).collect();
        counts.insert(d.to_string(), json!(list.len()));
        dims.insert(d.to_string(), Value::Array(list));
    }
    json!({ "dims": Value::Object(dims), "counts": Value::Object(counts) })
}

/// One relation resolved against the table:
/// `{"dim": d, "terms": [{"stratum": i, "coeff": c}], "source": {...}}`.
pub fn relation_json(rel: &RelationVector, table: &StrataTable) -> Value {
    let terms: Vec<Value> = rel
        .terms
        .iter()
        .map(|(key, coeff)| {
            let (dim, pos) = table.position(key).expect("class resolves in table");
            debug_assert_eq!(dim, rel.dim);
            json!({ "stratum": pos, "coeff": coeff })
        })
        .collect();
    let source = json!({
        "stratum": rel.source.stratum.map(|(_, pos)| pos),
        "vertex": label_sets_json(&rel.source.vertex),
        "marks": Value::Array(rel.source.marks.iter().map(|m| label_set_json(*m)).collect()),
        "pairing": rel.source.pairing.as_str(),
    });
    json!({ "dim": rel.dim, "terms": terms, "source": source })
}

/// Presentation data without the weights (used for invariance comparisons).
pub fn presentation_json_weightless(p: &ChowPresentation) -> Value {
    json!({
        "betti": p.betti_vector(),
        "generators": p.generator_counts(),
        "relation_counts": p.relation_counts(),
        "torsion": torsion_json(p),
        "poincare": poincare_polynomial(p),
    })
}

fn torsion_json(p: &ChowPresentation) -> Value {
    let mut torsion = Map::new();
    for group in &p.dims {
        if !group.torsion.is_empty() {
            torsion.insert(
                group.dim.to_string(),
                json!(group
                    .torsion
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()),
            );
        }
    }
    Value::Object(torsion)
}

/// The full `compute` report.
pub fn report_json(
    table: &StrataTable,
    p: &ChowPresentation,
    checks: &PresentationChecks,
    poly: &CountPolynomial,
) -> Value {
    json!({
        "weights": table.weights().to_strings(),
        "strata_counts": table.counts(),
        "generators": p.generator_counts(),
        "relation_counts": p.relation_counts(),
        "betti": p.betti_vector(),
        "torsion": torsion_json(p),
        "poincare": poincare_polynomial(p),
        "point_count": poly.to_string(),
        "checks": checks_json(checks),
    })
}

pub fn checks_json(checks: &PresentationChecks) -> Value {
    json!({
        "duality": checks.duality,
        "euler": checks.euler,
        "torsion_free": checks.torsion_free,
        "point_count": checks.point_count,
    })
}

/// Human-readable `compute` summary.
pub fn report_text(
    table: &StrataTable,
    p: &ChowPresentation,
    checks: &PresentationChecks,
    poly: &CountPolynomial,
) -> String {
    let mut out = String::new();
    let weights = table.weights();
    out.push_str(&format!("weights        {weights}\n"));
    out.push_str(&format!(
        "strata         {} total, by dimension {:?}\n",
        table.total(),
        table.counts()
    ));
    out.push_str(&format!("relations      {:?}\n", p.relation_counts()));
    out.push_str(&format!("betti          {:?}\n", p.betti_vector()));
    let torsion = if p.torsion_free() {
        "none".to_string()
    } else {
        format!("{}", torsion_json(p))
    };
    out.push_str(&format!("torsion        {torsion}\n"));
    out.push_str(&format!("poincare       {}\n", poincare_polynomial(p)));
    out.push_str(&format!("point count    {poly}\n"));
    for (name, ok) in [
        ("duality", checks.duality),
        ("euler", checks.euler),
        ("torsion_free", checks.torsion_free),
        ("point_count", checks.point_count),
    ] {
        out.push_str(&format!(
            "check {:<12} {}\n",
            name,
            if ok { "pass" } else { "FAIL" }
        ));
    }
    out
}

const BLOCK_COLORS: [&str; 8] = [
    "lightblue", "lightsalmon", "palegreen", "plum", "khaki", "lightpink", "aquamarine", "wheat",
];

/// DOT rendering of one tree: internal vertices as circles, tails as labeled
/// leaves, blocks shown by shared fill colors of their tail leaves.
pub fn tree_dot(tree: &ATree) -> String {
    let mut out = String::from("graph stratum {\n  node [shape=circle];\n");
    let vertices = tree.vertex_ids();
    let vertex_idx = |v| vertices.iter().position(|w| *w == v).unwrap();
    for v in &vertices {
        out.push_str(&format!(
            "  v{} [label=\"\", width=0.15, style=filled, fillcolor=black];\n",
            vertex_idx(*v)
        ));
    }
    // tails, grouped into blocks by color
    let mut color = 0usize;
    for v in &vertices {
        for block in tree.blocks_at(*v) {
            let fill = if block.len() > 1 {
                let c = BLOCK_COLORS[color % BLOCK_COLORS.len()];
                color += 1;
                c
            } else {
                "white"
            };
            for label in block.labels() {
                out.push_str(&format!(
                    "  t{label} [shape=plaintext, label=\"{label}\", style=filled, fillcolor={fill}];\n"
                ));
                out.push_str(&format!("  v{} -- t{label};\n", vertex_idx(*v)));
            }
        }
    }
    for (f, p) in tree.edges() {
        let a = vertex_idx(tree.boundary[&f]);
        let b = vertex_idx(tree.boundary[&p]);
        out.push_str(&format!("  v{a} -- v{b} [penwidth=2];\n"));
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of the degeneration poset: nodes are strata keyed
/// `d<dim>_<index>`, arrows point from a stratum to each covering move image.
pub fn poset_dot(table: &StrataTable) -> String {
    let mut out = String::from("digraph strata_poset {\n  rankdir=TB;\n");
    for d in (0..=table.max_dim()).rev() {
        out.push_str(&format!("  {{ rank=same;"));
        for pos in 0..table.strata(d).len() {
            out.push_str(&format!(" d{d}_{pos};"));
        }
        out.push_str(" }\n");
    }
    for d in 0..=table.max_dim() {
        for (pos, tree) in table.strata(d).iter().enumerate() {
            let label = format!("{tree}").replace('"', "'");
            out.push_str(&format!("  d{d}_{pos} [label=\"{label}\"];\n"));
        }
    }
    for ((d1, p1), (d2, p2)) in table.hasse_edges() {
        out.push_str(&format!("  d{d1}_{p1} -> d{d2}_{p2};\n"));
    }
    out.push_str("}\n");
    out
}

/// Convenience: run the full pipeline and emit the report pieces.
pub fn full_report(table: &StrataTable) -> (ChowPresentation, PresentationChecks, CountPolynomial) {
    let p = crate::presentation::chow_groups_from_table(table);
    let checks = crate::presentation::verify_presentation(&p, table);
    let poly = point_count_polynomial(table);
    (p, checks, poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::enumerate_strata;
    use crate::weights::WeightDatum;

    #[test]
    fn tree_json_shape() {
        let a = WeightDatum::parse("1,1,1/4,1/4").unwrap();
        let t = enumerate_strata(&a);
        let merged = t
            .strata(0)
            .iter()
            .find(|g| g.edge_count() == 0)
            .expect("the merged stratum exists");
        let v = tree_json(merged);
        assert_eq!(v["dim"], 0);
        assert_eq!(v["splits"], json!([]));
        assert_eq!(v["blocks"]["0"], json!([[1], [2], [3, 4]]));
    }

    #[test]
    fn table_json_is_deterministic() {
        let a = WeightDatum::parse("1,1,1,1,1").unwrap();
        let t1 = enumerate_strata(&a);
        let t2 = enumerate_strata(&a);
        assert_eq!(
            serde_json::to_string(&table_json(&t1)).unwrap(),
            serde_json::to_string(&table_json(&t2)).unwrap()
        );
    }

    #[test]
    fn dot_outputs_have_expected_structure() {
        let a = WeightDatum::parse("1,1,1,1").unwrap();
        let t = enumerate_strata(&a);
        let dot = poset_dot(&t);
        assert!(dot.contains("d1_0"));
        assert!(dot.contains("d1_0 -> d0_"));
        let tree_render = tree_dot(&t.strata(1)[0]);
        assert!(tree_render.contains("t1"));
        assert!(tree_render.contains("v0"));
    }
}
