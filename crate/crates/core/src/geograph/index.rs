//! Uniform-grid spatial index over vertex positions.
//!
//! Buckets vertices into square cells of a configurable size and answers
//! exact Euclidean radius queries by scanning the cells overlapping the
//! query disk. Supports incremental insertion so the tracer can index its
//! growing graph.

use std::collections::HashMap;

use super::{SpatialGraph, VertexId};
use crate::geom::Point;

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    cells: HashMap<(i64, i64), Vec<VertexId>>,
    positions: Vec<Point>,
}

impl GridIndex {
    pub fn new(cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        GridIndex { cell_size, cells: HashMap::new(), positions: Vec::new() }
    }

    /// Index every vertex of `graph`.
    pub fn build(graph: &SpatialGraph, cell_size: f64) -> Self {
        let mut index = GridIndex::new(cell_size);
        for (id, &p) in graph.positions().iter().enumerate() {
            index.insert(id, p);
        }
        index
    }

    fn cell_of(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell_size).floor() as i64, (p.y / self.cell_size).floor() as i64)
    }

    /// Register vertex `id` at `p`. Ids must arrive densely in order.
    pub fn insert(&mut self, id: VertexId, p: Point) {
        assert_eq!(id, self.positions.len(), "ids must be inserted densely in order");
        self.positions.push(p);
        self.cells.entry(self.cell_of(p)).or_default().push(id);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Exactly the vertices at Euclidean distance ≤ `radius` from `p`,
    /// sorted by id.
    pub fn vertices_within(&self, p: Point, radius: f64) -> Vec<VertexId> {
        assert!(radius >= 0.0, "radius must be nonnegative");
        let (cx0, cy0) = self.cell_of(Point::new(p.x - radius, p.y - radius));
        let (cx1, cy1) = self.cell_of(Point::new(p.x + radius, p.y + radius));
        let mut hits = Vec::new();
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                if let Some(ids) = self.cells.get(&(cx, cy)) {
                    for &id in ids {
                        if self.positions[id].distance(p) <= radius {
                            hits.push(id);
                        }
                    }
                }
            }
        }
        hits.sort_unstable();
        hits
    }

    /// Nearest vertex within `radius` of `p`; distance ties break toward
    /// the lowest id.
    pub fn nearest_within(&self, p: Point, radius: f64) -> Option<(VertexId, f64)> {
        self.vertices_within(p, radius)
            .into_iter()
            .map(|id| (id, self.positions[id].distance(p)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_radius_at_vertex() {
        let mut g = SpatialGraph::new();
        g.add_vertex(Point::new(5.0, 5.0));
        g.add_vertex(Point::new(9.0, 5.0));
        let index = GridIndex::build(&g, 10.0);
        assert_eq!(index.vertices_within(Point::new(5.0, 5.0), 0.0), vec![0]);
    }

    #[test]
    fn far_query_is_empty() {
        let mut g = SpatialGraph::new();
        g.add_vertex(Point::new(0.0, 0.0));
        let index = GridIndex::build(&g, 10.0);
        assert!(index.vertices_within(Point::new(1000.0, -1000.0), 50.0).is_empty());
    }

    #[test]
    fn matches_linear_scan_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut g = SpatialGraph::new();
        for _ in 0..1000 {
            g.add_vertex(Point::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)));
        }
        let index = GridIndex::build(&g, 37.0);
        for _ in 0..100 {
            let p = Point::new(rng.random_range(-600.0..600.0), rng.random_range(-600.0..600.0));
            let radius = rng.random_range(0.0..200.0);
            let mut expected: Vec<VertexId> = (0..g.vertex_count())
                .filter(|&v| g.position(v).distance(p) <= radius)
                .collect();
            expected.sort_unstable();
            assert_eq!(index.vertices_within(p, radius), expected);
        }
    }

    #[test]
    fn nearest_tie_breaks_to_lowest_id() {
        let mut g = SpatialGraph::new();
        g.add_vertex(Point::new(10.0, 0.0));
        g.add_vertex(Point::new(-10.0, 0.0));
        let index = GridIndex::build(&g, 8.0);
        let (id, d) = index.nearest_within(Point::new(0.0, 0.0), 20.0).unwrap();
        assert_eq!(id, 0);
        assert_eq!(d, 10.0);
    }
}
