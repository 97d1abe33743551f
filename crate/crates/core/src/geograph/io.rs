//! Line-oriented text format for spatial graphs.
//!
//! ```text
//! graph v=<N> e=<M>
//! v <id> <x> <y>     (N lines, ids 0..N in order)
//! e <id1> <id2>      (M lines, id1 < id2)
//! ```
//!
//! Tokens are whitespace-separated; `#` starts a comment that runs to the
//! end of the line. [`save_graph`] emits the canonical form: vertices in id
//! order, edges as `(min, max)` pairs in lexicographic order, floats in
//! shortest round-trip notation. Loading then saving a canonical file
//! reproduces it byte for byte.

use std::io::{BufRead, Write};

use super::{GraphError, SpatialGraph};
use crate::geom::Point;

pub fn load_graph<R: BufRead>(reader: R) -> Result<SpatialGraph, GraphError> {
    let parse = |line: usize, msg: &str| GraphError::Parse { line, msg: msg.to_string() };

    let mut lines = Vec::new();
    for (i, raw) in reader.lines().enumerate() {
        let raw = raw?;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => &raw[..],
        };
        if !content.trim().is_empty() {
            lines.push((i + 1, content.trim().to_string()));
        }
    }

    let (header_no, header) = lines
        .first()
        .ok_or_else(|| parse(1, "empty file: missing `graph v=<N> e=<M>` header"))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("graph") {
        return Err(parse(*header_no, "expected `graph v=<N> e=<M>` header"));
    }
    let take_count = |tok: Option<&str>, key: &str| -> Result<usize, GraphError> {
        let tok = tok.ok_or_else(|| parse(*header_no, &format!("missing {key}=<count>")))?;
        let value = tok
            .strip_prefix(&format!("{key}="))
            .ok_or_else(|| parse(*header_no, &format!("expected {key}=<count>, got `{tok}`")))?;
        value
            .parse::<usize>()
            .map_err(|_| parse(*header_no, &format!("bad {key} count `{value}`")))
    };
    let n_vertices = take_count(tokens.next(), "v")?;
    let n_edges = take_count(tokens.next(), "e")?;

    if lines.len() != 1 + n_vertices + n_edges {
        return Err(parse(
            *header_no,
            &format!(
                "header declares {} records but file has {}",
                n_vertices + n_edges,
                lines.len() - 1
            ),
        ));
    }

    let mut graph = SpatialGraph::new();
    for (line_no, line) in &lines[1..1 + n_vertices] {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "v" {
            return Err(parse(*line_no, "expected `v <id> <x> <y>`"));
        }
        let id: usize = fields[1].parse().map_err(|_| parse(*line_no, "bad vertex id"))?;
        if id != graph.vertex_count() {
            return Err(parse(
                *line_no,
                &format!("vertex ids must be dense and in order; expected {}, got {id}", graph.vertex_count()),
            ));
        }
        let x: f64 = fields[2].parse().map_err(|_| parse(*line_no, "bad x coordinate"))?;
        let y: f64 = fields[3].parse().map_err(|_| parse(*line_no, "bad y coordinate"))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse(*line_no, "coordinates must be finite"));
        }
        graph.add_vertex(Point::new(x, y));
    }

    for (line_no, line) in &lines[1 + n_vertices..] {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "e" {
            return Err(parse(*line_no, "expected `e <id1> <id2>`"));
        }
        let a: usize = fields[1].parse().map_err(|_| parse(*line_no, "bad edge endpoint"))?;
        let b: usize = fields[2].parse().map_err(|_| parse(*line_no, "bad edge endpoint"))?;
        if a >= b {
            return Err(parse(*line_no, "edge endpoints must satisfy id1 < id2"));
        }
        if b >= graph.vertex_count() {
            return Err(GraphError::Validation(format!(
                "line {line_no}: edge ({a}, {b}) references a vertex that does not exist"
            )));
        }
        if graph.has_edge(a, b) {
            return Err(parse(*line_no, &format!("duplicate edge ({a}, {b})")));
        }
        graph.add_edge(a, b);
    }

    graph.validate()?;
    Ok(graph)
}

pub fn save_graph<W: Write>(graph: &SpatialGraph, mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "graph v={} e={}", graph.vertex_count(), graph.edge_count())?;
    for (id, p) in graph.positions().iter().enumerate() {
        writeln!(writer, "v {id} {} {}", p.x, p.y)?;
    }
    let mut edges = graph.edges().to_vec();
    edges.sort_unstable();
    for (a, b) in edges {
        writeln!(writer, "e {a} {b}")?;
    }
    Ok(())
}

/// Canonical text form of `graph` (see [`save_graph`]).
pub fn graph_to_string(graph: &SpatialGraph) -> String {
    let mut buf = Vec::new();
    save_graph(graph, &mut buf).expect("writing to Vec cannot fail");
    String::from_utf8(buf).expect("graph text is ASCII")
}

pub fn load_graph_file(path: &std::path::Path) -> Result<SpatialGraph, GraphError> {
    let file = std::fs::File::open(path)?;
    load_graph(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::super::io::load_graph;
    use super::*;

    #[test]
    fn minimal_valid_file() {
        let text = "graph v=2 e=1\nv 0 0 0\nv 1 10 0\ne 0 1\n";
        let g = load_graph(text.as_bytes()).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn dangling_endpoint_rejected() {
        let text = "graph v=0 e=1\ne 0 1\n";
        match load_graph(text.as_bytes()) {
            Err(GraphError::Validation(_)) | Err(GraphError::Parse { .. }) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_whitespace_ignored() {
        let text = "# a map\ngraph v=1 e=0   # header\n  v   0   1.5   -2.25  \n";
        let g = load_graph(text.as_bytes()).unwrap();
        assert_eq!(g.position(0), Point::new(1.5, -2.25));
    }

    #[test]
    fn empty_graph_is_header_only() {
        let g = SpatialGraph::new();
        assert_eq!(graph_to_string(&g), "graph v=0 e=0\n");
    }

    #[test]
    fn single_vertex_save() {
        let mut g = SpatialGraph::new();
        g.add_vertex(Point::new(3.0, 4.5));
        assert_eq!(graph_to_string(&g), "graph v=1 e=0\nv 0 3 4.5\n");
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "graph v=1 e=0\nv zero 0 0\n";
        match load_graph(text.as_bytes()) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
