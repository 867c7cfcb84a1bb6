use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Contents of a TU benchmark directory, converted to 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TuDatasetRaw {
    pub name: String,
    /// Undirected edges `(u, v)` with `u < v`, global node ids, deduplicated.
    pub edges: Vec<(usize, usize)>,
    /// Graph of every node.
    pub graph_indicator: Vec<usize>,
    pub graph_labels: Vec<i64>,
    pub node_labels: Option<Vec<i64>>,
    pub node_attributes: Option<Vec<Vec<f64>>>,
}

impl TuDatasetRaw {
    pub fn num_graphs(&self) -> usize {
        self.graph_labels.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.graph_indicator.len()
    }

    /// Distinct graph labels in ascending order; a graph's class index is the
    /// position of its label in this list.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.graph_labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn class_indices(&self) -> Vec<usize> {
        let classes = self.classes();
        self.graph_labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label listed in classes"))
            .collect()
    }

    /// Node ids of each graph, in ascending order.
    pub fn nodes_per_graph(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_graphs()];
        for (node, &g) in self.graph_indicator.iter().enumerate() {
            out[g].push(node);
        }
        out
    }
}

struct Lines {
    file: String,
    body: String,
}

impl Lines {
    fn read(path: PathBuf) -> Result<Self> {
        let body = fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Self {
            file: path.display().to_string(),
            body,
        })
    }

    fn optional(path: PathBuf) -> Result<Option<Self>> {
        if path.exists() {
            Self::read(path).map(Some)
        } else {
            Ok(None)
        }
    }

    fn error(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::Format {
            file: self.file.clone(),
            line,
            reason: reason.into(),
        }
    }

    /// Non-blank records as `(1-based line number, fields)`.
    fn records(&self) -> impl Iterator<Item = (usize, Vec<&str>)> {
        self.body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
    }

    fn parse<F: std::str::FromStr>(&self, line: usize, field: &str) -> Result<F> {
        field
            .parse()
            .map_err(|_| self.error(line, format!("cannot parse {field:?}")))
    }

    fn integers(&self) -> Result<Vec<(usize, i64)>> {
        self.records()
            .map(|(line, fields)| match fields.as_slice() {
                [v] => Ok((line, self.parse(line, v)?)),
                _ => Err(self.error(line, format!("expected one value, found {}", fields.len()))),
            })
            .collect()
    }
}

fn one_based(lines: &Lines, line: usize, value: i64, len: usize, what: &str) -> Result<usize> {
    if value < 1 || value as usize > len {
        return Err(lines.error(line, format!("{what} {value} outside 1..={len}")));
    }
    Ok(value as usize - 1)
}

/// Reads `NAME_A.txt`, `NAME_graph_indicator.txt`, `NAME_graph_labels.txt`
/// and, when present, `NAME_node_labels.txt` / `NAME_node_attributes.txt`
/// from `dir`.
pub fn parse_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<TuDatasetRaw> {
    let dir = dir.as_ref();
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let labels_file = Lines::read(file("graph_labels"))?;
    let graph_labels: Vec<i64> = labels_file.integers()?.into_iter().map(|(_, v)| v).collect();
    if graph_labels.is_empty() {
        return Err(labels_file.error(1, "no graph labels"));
    }

    let indicator_file = Lines::read(file("graph_indicator"))?;
    let graph_indicator = indicator_file
        .integers()?
        .into_iter()
        .map(|(line, v)| one_based(&indicator_file, line, v, graph_labels.len(), "graph id"))
        .collect::<Result<Vec<_>>>()?;
    let n = graph_indicator.len();
    let mut seen = vec![false; graph_labels.len()];
    graph_indicator.iter().for_each(|&g| seen[g] = true);
    if let Some(g) = seen.iter().position(|s| !s) {
        return Err(indicator_file.error(n, format!("graph {} has no nodes", g + 1)));
    }

    let edge_file = Lines::read(file("A"))?;
    let mut edges = Vec::new();
    for (line, fields) in edge_file.records() {
        let [u, v] = fields.as_slice() else {
            return Err(edge_file.error(line, format!("expected two node ids, found {}", fields.len())));
        };
        let u = one_based(&edge_file, line, edge_file.parse(line, u)?, n, "node id")?;
        let v = one_based(&edge_file, line, edge_file.parse(line, v)?, n, "node id")?;
        if graph_indicator[u] != graph_indicator[v] {
            return Err(edge_file.error(line, "edge joins nodes of different graphs"));
        }
        if u != v {
            edges.push((u.min(v), u.max(v)));
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let node_labels = match Lines::optional(file("node_labels"))? {
        None => None,
        Some(f) => {
            let values = f.integers()?;
            if values.len() != n {
                return Err(f.error(values.last().map_or(1, |(l, _)| *l), format!("{} node labels for {n} nodes", values.len())));
            }
            Some(values.into_iter().map(|(_, v)| v).collect())
        }
    };
    let node_attributes = match Lines::optional(file("node_attributes"))? {
        None => None,
        Some(f) => {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut last = 1;
            for (line, fields) in f.records() {
                let row = fields.iter().map(|x| f.parse(line, x)).collect::<Result<Vec<f64>>>()?;
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(f.error(line, "non-finite attribute"));
                }
                if rows.first().is_some_and(|r| r.len() != row.len()) {
                    return Err(f.error(line, "attribute rows differ in width"));
                }
                rows.push(row);
                last = line;
            }
            if rows.len() != n {
                return Err(f.error(last, format!("{} attribute rows for {n} nodes", rows.len())));
            }
            Some(rows)
        }
    };

    Ok(TuDatasetRaw {
        name: name.to_string(),
        edges,
        graph_indicator,
        graph_labels,
        node_labels,
        node_attributes,
    })
}
