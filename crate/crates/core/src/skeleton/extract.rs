//! Skeleton pixels to spatial graph.

use crate::geograph::SpatialGraph;
use crate::raster::RasterGrid;

/// Build a graph from a one-pixel-wide skeleton: a vertex per set pixel at
/// its center's world coordinates, an edge per 8-adjacent pixel pair —
/// except that a diagonal adjacency covered by an orthogonal corner pixel
/// is omitted, so L-corners don't triangulate.
pub fn extract_graph(skeleton: &RasterGrid) -> SpatialGraph {
    let w = skeleton.width();
    let h = skeleton.height();
    let set = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && r < h as i64 && c < w as i64 && skeleton.get(r as usize, c as usize) > 0.0
    };

    let mut graph = SpatialGraph::new();
    let mut vertex_of = vec![usize::MAX; w * h];
    for r in 0..h {
        for c in 0..w {
            if skeleton.get(r, c) > 0.0 {
                vertex_of[r * w + c] = graph.add_vertex(skeleton.pixel_center(r, c));
            }
        }
    }

    for r in 0..h as i64 {
        for c in 0..w as i64 {
            if !set(r, c) {
                continue;
            }
            let here = vertex_of[r as usize * w + c as usize];
            // East and south orthogonal neighbors (each pair visited once).
            if set(r, c + 1) {
                graph.add_edge(here, vertex_of[r as usize * w + c as usize + 1]);
            }
            if set(r + 1, c) {
                graph.add_edge(here, vertex_of[(r as usize + 1) * w + c as usize]);
            }
            // Southeast diagonal, unless a corner pixel covers it.
            if set(r + 1, c + 1) && !set(r, c + 1) && !set(r + 1, c) {
                graph.add_edge(here, vertex_of[(r as usize + 1) * w + c as usize + 1]);
            }
            // Southwest diagonal, same rule.
            if set(r + 1, c - 1) && !set(r, c - 1) && !set(r + 1, c) {
                graph.add_edge(here, vertex_of[(r as usize + 1) * w + c as usize - 1]);
            }
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::skeleton::thin::component_count;
    use crate::geograph::connected_components;

    fn grid(w: usize, h: usize) -> RasterGrid {
        RasterGrid::zeros(w, h, 1.0, Point::new(0.0, h as f64))
    }

    #[test]
    fn single_pixel_is_one_vertex() {
        let mut g = grid(5, 5);
        g.set(2, 2, 1.0);
        let graph = extract_graph(&g);
        assert_eq!(graph.vertex_count(), 1);
        assert_eq!(graph.edge_count(), 0);
    }

    #[test]
    fn horizontal_line_is_a_path() {
        let mut g = grid(12, 3);
        for c in 1..11 {
            g.set(1, c, 1.0);
        }
        let graph = extract_graph(&g);
        assert_eq!(graph.vertex_count(), 10);
        assert_eq!(graph.edge_count(), 9);
        assert_eq!(graph.junctions().len(), 0);
    }

    #[test]
    fn corner_omits_covered_diagonal() {
        // L-corner: (1,1)-(1,2)-(2,2). Diagonal (1,1)-(2,2) is covered.
        let mut g = grid(4, 4);
        g.set(1, 1, 1.0);
        g.set(1, 2, 1.0);
        g.set(2, 2, 1.0);
        let graph = extract_graph(&g);
        assert_eq!(graph.edge_count(), 2);
    }

    #[test]
    fn component_counts_match() {
        let mut g = grid(20, 20);
        // Diagonal line, separate square corner, isolated pixel.
        for i in 2..8 {
            g.set(i, i, 1.0);
        }
        g.set(12, 3, 1.0);
        g.set(12, 4, 1.0);
        g.set(13, 4, 1.0);
        g.set(17, 17, 1.0);
        let graph = extract_graph(&g);
        let graph_components = connected_components(&graph)
            .into_iter()
            .max()
            .map_or(0, |m| m + 1);
        assert_eq!(graph_components, component_count(&g));
    }
}
