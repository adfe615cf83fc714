//! TUDataset text-format ingestion and the matching serializer.
//!
//! Layout of a corpus named `NAME` inside `dir`:
//! - `NAME_A.txt` — comma-separated `i, j` rows, 1-based global node ids
//! - `NAME_graph_indicator.txt` — graph id (1-based) per node row
//! - `NAME_graph_labels.txt` — one integer per graph
//! - `NAME_node_labels.txt` — optional, one integer per node
//! - `NAME_node_attributes.txt` — optional, comma-separated floats per node
//!
//! Features become one-hot node labels when attributes are absent, raw
//! attributes when labels are absent, and `[attributes | one-hot]` when both
//! are present.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::graph::{FeatureProvenance, Graph, GraphDataset};
use crate::error::{Error, Result};

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)
        .map_err(|_| Error::MissingFile(path.display().to_string()))?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

fn parse_int(file: &str, line_no: usize, token: &str) -> Result<i64> {
    token
        .trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(file, line_no, format!("expected integer, got '{token}'")))
}

/// Parses a TUDataset-format corpus. Splits are left empty; assign them with
/// [`super::split_dataset`].
pub fn parse_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator_lines = read_lines(&file("graph_indicator"))?;
    let label_lines = read_lines(&file("graph_labels"))?;
    let edge_lines = read_lines(&file("A"))?;

    let ind_name = format!("{name}_graph_indicator.txt");
    let total_nodes = indicator_lines.iter().filter(|l| !l.is_empty()).count();
    let num_graphs = label_lines.iter().filter(|l| !l.is_empty()).count();

    // Global node id (1-based) -> (graph index, local node id).
    let mut node_graph = vec![0usize; total_nodes];
    let mut node_local = vec![0usize; total_nodes];
    let mut graph_sizes = vec![0usize; num_graphs];
    let mut row = 0usize;
    for (ln, line) in indicator_lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let gid = parse_int(&ind_name, ln + 1, line)?;
        if gid < 1 || gid as usize > num_graphs {
            return Err(Error::parse(
                &ind_name,
                ln + 1,
                format!("graph id {gid} outside 1..={num_graphs}"),
            ));
        }
        let g = gid as usize - 1;
        node_graph[row] = g;
        node_local[row] = graph_sizes[g];
        graph_sizes[g] += 1;
        row += 1;
    }

    // Graph labels, remapped to 0..C-1 in sorted order of raw values.
    let lbl_name = format!("{name}_graph_labels.txt");
    let mut raw_labels = Vec::with_capacity(num_graphs);
    for (ln, line) in label_lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        raw_labels.push(parse_int(&lbl_name, ln + 1, line)?);
    }
    let mut label_vocab: Vec<i64> = raw_labels.clone();
    label_vocab.sort_unstable();
    label_vocab.dedup();
    let label_of = |raw: i64| label_vocab.binary_search(&raw).unwrap();

    // Optional node labels.
    let node_labels: Option<Vec<i64>> = match read_lines(&file("node_labels")) {
        Ok(lines) => {
            let nl_name = format!("{name}_node_labels.txt");
            let mut vals = Vec::with_capacity(total_nodes);
            for (ln, line) in lines.iter().enumerate() {
                if line.is_empty() {
                    continue;
                }
                vals.push(parse_int(&nl_name, ln + 1, line)?);
            }
            if vals.len() != total_nodes {
                return Err(Error::parse(
                    &nl_name,
                    vals.len() + 1,
                    format!("{} node labels for {total_nodes} nodes", vals.len()),
                ));
            }
            Some(vals)
        }
        Err(Error::MissingFile(_)) => None,
        Err(e) => return Err(e),
    };

    // Optional node attributes; arity must be constant.
    let node_attrs: Option<(usize, Vec<f64>)> = match read_lines(&file("node_attributes")) {
        Ok(lines) => {
            let na_name = format!("{name}_node_attributes.txt");
            let mut dim = None;
            let mut vals = Vec::new();
            let mut rows = 0usize;
            for (ln, line) in lines.iter().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let row: Vec<f64> = line
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|_| {
                            Error::parse(&na_name, ln + 1, format!("bad float '{t}'"))
                        })
                    })
                    .collect::<Result<_>>()?;
                match dim {
                    None => dim = Some(row.len()),
                    Some(d) if d != row.len() => {
                        return Err(Error::parse(
                            &na_name,
                            ln + 1,
                            format!("ragged attribute row: {} values, expected {d}", row.len()),
                        ))
                    }
                    _ => {}
                }
                vals.extend(row);
                rows += 1;
            }
            if rows != total_nodes {
                return Err(Error::parse(
                    &na_name,
                    rows + 1,
                    format!("{rows} attribute rows for {total_nodes} nodes"),
                ));
            }
            Some((dim.unwrap_or(0), vals))
        }
        Err(Error::MissingFile(_)) => None,
        Err(e) => return Err(e),
    };

    // Node-label vocabulary for one-hot encoding.
    let nl_vocab: Vec<i64> = node_labels
        .as_ref()
        .map(|vals| {
            let mut v = vals.clone();
            v.sort_unstable();
            v.dedup();
            v
        })
        .unwrap_or_default();

    let (feature_dim, provenance) = match (&node_attrs, &node_labels) {
        (Some((d, _)), Some(_)) => (
            d + nl_vocab.len(),
            FeatureProvenance::AttributesAndLabels {
                vocab: nl_vocab.clone(),
                attr_dim: *d,
            },
        ),
        (Some((d, _)), None) => (*d, FeatureProvenance::Attributes),
        (None, Some(_)) => (
            nl_vocab.len(),
            FeatureProvenance::OneHotLabels {
                vocab: nl_vocab.clone(),
            },
        ),
        (None, None) => (1, FeatureProvenance::ConstantOne),
    };

    let mut graphs: Vec<Graph> = (0..num_graphs)
        .map(|g| Graph::new(g, graph_sizes[g], feature_dim, label_of(raw_labels[g])))
        .collect();

    // Fill features.
    for global in 0..total_nodes {
        let g = node_graph[global];
        let local = node_local[global];
        let mut row = vec![0.0; feature_dim];
        let mut offset = 0;
        if let Some((d, vals)) = &node_attrs {
            row[..*d].copy_from_slice(&vals[global * d..(global + 1) * d]);
            offset = *d;
        }
        if let Some(labels) = &node_labels {
            let pos = nl_vocab.binary_search(&labels[global]).unwrap();
            row[offset + pos] = 1.0;
        }
        if node_attrs.is_none() && node_labels.is_none() {
            row[0] = 1.0;
        }
        graphs[g].set_feature_row(local, &row);
    }

    // Edges: 1-based global ids, both endpoints in the same graph.
    let a_name = format!("{name}_A.txt");
    for (ln, line) in edge_lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (
                parse_int(&a_name, ln + 1, a)?,
                parse_int(&a_name, ln + 1, b)?,
            ),
            _ => return Err(Error::parse(&a_name, ln + 1, "expected 'i, j'")),
        };
        for v in [a, b] {
            if v < 1 || v as usize > total_nodes {
                return Err(Error::parse(
                    &a_name,
                    ln + 1,
                    format!("node {v} referenced outside any graph"),
                ));
            }
        }
        let (a, b) = (a as usize - 1, b as usize - 1);
        if node_graph[a] != node_graph[b] {
            return Err(Error::parse(
                &a_name,
                ln + 1,
                format!("edge spans graphs {} and {}", node_graph[a] + 1, node_graph[b] + 1),
            ));
        }
        if a == b {
            continue; // self-loops are the model's business, never stored
        }
        let g = node_graph[a];
        graphs[g].add_edge(node_local[a], node_local[b])?;
    }
    for g in &mut graphs {
        g.sort_edges();
    }

    let ds = GraphDataset {
        name: name.to_string(),
        graphs,
        num_classes: label_vocab.len(),
        feature_dim,
        train_idx: Vec::new(),
        test_idx: Vec::new(),
        provenance,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset back out in TUDataset format. Feature rows are decoded
/// per the dataset's provenance (attribute columns, one-hot labels, or both).
pub fn serialize_tu_dataset(ds: &GraphDataset, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let open = |suffix: &str| -> Result<fs::File> {
        Ok(fs::File::create(dir.join(format!("{name}_{suffix}.txt")))?)
    };

    let mut f_a = open("A")?;
    let mut f_ind = open("graph_indicator")?;
    let mut f_gl = open("graph_labels")?;

    // Labels are written back as their 0-based class ids; reparsing remaps
    // them onto the same classes.
    let mut base = 1usize; // 1-based global id of each graph's first node
    let mut global_of: Vec<Vec<usize>> = Vec::with_capacity(ds.graphs.len());
    for g in &ds.graphs {
        writeln!(f_gl, "{}", g.label)?;
        global_of.push((0..g.n).map(|i| base + i).collect());
        for _ in 0..g.n {
            writeln!(f_ind, "{}", global_of.len())?;
        }
        let mut sorted = g.edges.clone();
        sorted.sort_unstable();
        for (i, j) in sorted {
            // both directions, as the public corpora do
            writeln!(f_a, "{}, {}", base + i, base + j)?;
            writeln!(f_a, "{}, {}", base + j, base + i)?;
        }
        base += g.n;
    }

    let onehot = ds.provenance.onehot_block();
    let attr_dim = match &ds.provenance {
        FeatureProvenance::Attributes => Some(ds.feature_dim),
        FeatureProvenance::AttributesAndLabels { attr_dim, .. } => Some(*attr_dim),
        FeatureProvenance::Synthetic => Some(ds.feature_dim),
        _ => None,
    };

    if let Some((offset, width)) = onehot {
        let vocab: &[i64] = match &ds.provenance {
            FeatureProvenance::OneHotLabels { vocab } => vocab,
            FeatureProvenance::AttributesAndLabels { vocab, .. } => vocab,
            _ => unreachable!(),
        };
        let mut f_nl = open("node_labels")?;
        for g in &ds.graphs {
            for i in 0..g.n {
                let row = &g.feature_row(i)[offset..offset + width];
                let pos = row
                    .iter()
                    .position(|&x| x == 1.0)
                    .ok_or_else(|| Error::invalid("serialize_tu", "feature row is not one-hot"))?;
                writeln!(f_nl, "{}", vocab[pos])?;
            }
        }
    }
    if let Some(d) = attr_dim {
        let mut f_na = open("node_attributes")?;
        for g in &ds.graphs {
            for i in 0..g.n {
                let row = &g.feature_row(i)[..d];
                let text: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
                writeln!(f_na, "{}", text.join(", "))?;
            }
        }
    }
    Ok(())
}

/// Writes the fixture used in several tests: graph 0 is a triangle, graph 1
/// a single edge.
#[cfg(test)]
pub fn write_two_graph_fixture(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("FIX_A.txt"),
        "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n",
    )?;
    fs::write(dir.join("FIX_graph_indicator.txt"), "1\n1\n1\n2\n2\n")?;
    fs::write(dir.join("FIX_graph_labels.txt"), "1\n-1\n")?;
    fs::write(dir.join("FIX_node_labels.txt"), "0\n1\n0\n2\n1\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_graph_fixture_parses_as_expected() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();

        assert_eq!(ds.graphs.len(), 2);
        assert_eq!(ds.num_classes, 2);
        let g0 = &ds.graphs[0];
        assert_eq!(g0.n, 3);
        assert_eq!(g0.edges, vec![(0, 1), (0, 2), (1, 2)]);
        // raw labels {-1, 1} remap to {0, 1}
        assert_eq!(g0.label, 1);
        let g1 = &ds.graphs[1];
        assert_eq!(g1.n, 2);
        assert_eq!(g1.edges, vec![(0, 1)]);
        assert_eq!(g1.label, 0);
        // one-hot features over node-label vocab {0,1,2}
        assert_eq!(ds.feature_dim, 3);
        assert_eq!(g0.feature_row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(g0.feature_row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(g1.feature_row(0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_hot_rows_sum_to_one() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();
        for g in &ds.graphs {
            for i in 0..g.n {
                let s: f64 = g.feature_row(i).iter().sum();
                assert_eq!(s, 1.0);
            }
        }
    }

    #[test]
    fn missing_mandatory_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = parse_tu_dataset(dir.path(), "NOPE").unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn cross_graph_edge_is_a_parse_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        fs::write(dir.path().join("FIX_A.txt"), "1, 2\n3, 4\n").unwrap();
        let err = parse_tu_dataset(dir.path(), "FIX").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn node_out_of_range_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        fs::write(dir.path().join("FIX_A.txt"), "1, 9\n").unwrap();
        assert!(matches!(
            parse_tu_dataset(dir.path(), "FIX").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn ragged_attributes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        fs::write(
            dir.path().join("FIX_node_attributes.txt"),
            "0.5, 1.0\n0.25, 0.5\n1.0\n0.0, 0.0\n1.0, 1.0\n",
        )
        .unwrap();
        assert!(matches!(
            parse_tu_dataset(dir.path(), "FIX").unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
    }

    #[test]
    fn attributes_and_labels_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        fs::write(
            dir.path().join("FIX_node_attributes.txt"),
            "0.5, 1.5\n0.25, 0.5\n1.0, 0.0\n0.0, 0.0\n1.0, 1.0\n",
        )
        .unwrap();
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();
        assert_eq!(ds.feature_dim, 5); // 2 attrs + 3 label classes
        assert_eq!(ds.graphs[0].feature_row(0), &[0.5, 1.5, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn roundtrip_through_serializer_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        write_two_graph_fixture(dir.path()).unwrap();
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();

        let out = tempfile::tempdir().unwrap();
        serialize_tu_dataset(&ds, out.path(), "RT").unwrap();
        let ds2 = parse_tu_dataset(out.path(), "RT").unwrap();

        assert_eq!(ds.num_classes, ds2.num_classes);
        assert_eq!(ds.feature_dim, ds2.feature_dim);
        assert_eq!(ds.graphs.len(), ds2.graphs.len());
        for (a, b) in ds.graphs.iter().zip(&ds2.graphs) {
            assert_eq!(a.n, b.n);
            assert_eq!(a.edges, b.edges);
            assert_eq!(a.label, b.label);
            assert_eq!(a.features, b.features);
        }
    }
}
