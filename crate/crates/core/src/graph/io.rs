//! JSON-lines dataset format.
//!
//! First line is a header object
//! `{"format":"sak-graphs-v1","task":...,"node_feature_dim":...,"edge_feature_dim":...}`,
//! each subsequent line one graph
//! `{"n":int,"edges":[[i,j],...],"x":[[...]...],"e":[[...]...],"y":...}`.
//! Split indices live in a sibling file `<path>.splits.json` as
//! `{"train":[...],"val":[...],"test":[...]}`.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Graph, Label, Split, Task};
use crate::error::{Error, Result};

const FORMAT: &str = "sak-graphs-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    task: Task,
    node_feature_dim: usize,
    edge_feature_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<serde_json::Value>,
}

fn splits_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".splits.json");
    PathBuf::from(p)
}

pub fn save_graphs(ds: &Dataset, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header = Header {
        format: FORMAT.to_string(),
        task: ds.task,
        node_feature_dim: ds.graphs.first().map_or(0, Graph::node_feature_dim),
        edge_feature_dim: ds.graphs.first().map_or(0, Graph::edge_feature_dim),
    };
    writeln!(file, "{}", serde_json::to_string(&header)?)?;
    for g in &ds.graphs {
        let y = match ds.task {
            Task::NodeClassification => g.node_labels.as_ref().map(|l| serde_json::json!(l)),
            _ => g.graph_label.as_ref().map(|l| serde_json::json!(l)),
        };
        let rec = GraphRecord {
            n: g.num_nodes,
            edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            x: g.node_features.clone(),
            e: g.edge_features.clone(),
            y,
        };
        writeln!(file, "{}", serde_json::to_string(&rec)?)?;
    }
    file.flush()?;
    let splits = serde_json::to_string(&ds.split)?;
    std::fs::write(splits_path(path), splits)?;
    Ok(())
}

pub fn load_graphs(path: &Path) -> Result<Dataset> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines().enumerate();

    let header: Header = match lines.next() {
        None => {
            // Empty file: empty dataset with a default task.
            return Dataset::new(Vec::new(), Task::GraphRegression, Split::default());
        }
        Some((_, line)) => {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: 1,
                message: format!("header: {e}"),
            })?
        }
    };
    if header.format != FORMAT {
        return Err(Error::Parse {
            line: 1,
            message: format!("unknown format {:?}, expected {FORMAT:?}", header.format),
        });
    }

    let mut graphs = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut g = Graph::new(rec.n, rec.edges.iter().map(|&[a, b]| (a, b)).collect()).map_err(
            |e| Error::Parse { line: line_no, message: format!("field 'edges': {e}") },
        )?;
        if let Some(x) = rec.x {
            g = g.with_node_features(x).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("field 'x': {e}"),
            })?;
        }
        if let Some(e) = rec.e {
            g = g.with_edge_features(e).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("field 'e': {e}"),
            })?;
        }
        if let Some(y) = rec.y {
            match header.task {
                Task::NodeClassification => {
                    let labels: Vec<usize> =
                        serde_json::from_value(y).map_err(|e| Error::Parse {
                            line: line_no,
                            message: format!("field 'y': {e}"),
                        })?;
                    if labels.len() != g.num_nodes {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!(
                                "field 'y': {} node labels for {} nodes",
                                labels.len(),
                                g.num_nodes
                            ),
                        });
                    }
                    g.node_labels = Some(labels);
                }
                _ => {
                    let label: Label = serde_json::from_value(y).map_err(|e| Error::Parse {
                        line: line_no,
                        message: format!("field 'y': {e}"),
                    })?;
                    g.graph_label = Some(label);
                }
            }
        }
        graphs.push(g);
    }

    let split = match std::fs::read_to_string(splits_path(path)) {
        Ok(s) => serde_json::from_str(&s).map_err(|e| Error::Parse {
            line: 1,
            message: format!("splits file: {e}"),
        })?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Split::default(),
        Err(e) => return Err(e.into()),
    };

    Dataset::new(graphs, header.task, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_sbm;

    #[test]
    fn empty_file_loads_as_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let ds = load_graphs(&path).unwrap();
        assert!(ds.graphs.is_empty());
    }

    #[test]
    fn round_trip_sbm_dataset() {
        let graphs: Vec<Graph> = (0..10).map(|s| gen_sbm(12, 3, 0.8, 0.1, s).unwrap()).collect();
        let split = Split { train: vec![0, 1, 2, 3, 4, 5], val: vec![6, 7], test: vec![8, 9] };
        let ds = Dataset::new(graphs, Task::NodeClassification, split).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sbm.jsonl");
        save_graphs(&ds, &path).unwrap();
        let back = load_graphs(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn node_labels_follow_header_task() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"format\":\"sak-graphs-v1\",\"task\":\"node-classification\",",
                "\"node_feature_dim\":0,\"edge_feature_dim\":0}\n",
                "{\"n\":2,\"edges\":[[0,1]],\"y\":[0,1]}\n"
            ),
        )
        .unwrap();
        let ds = load_graphs(&path).unwrap();
        assert_eq!(ds.task, Task::NodeClassification);
        assert_eq!(ds.graphs[0].node_labels.as_ref().unwrap(), &vec![0, 1]);
    }

    #[test]
    fn malformed_record_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"format\":\"sak-graphs-v1\",\"task\":\"graph-regression\",",
                "\"node_feature_dim\":0,\"edge_feature_dim\":0}\n",
                "{\"n\":2,\"edges\":[[0,5]]}\n"
            ),
        )
        .unwrap();
        match load_graphs(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("edges"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
