//! A raster-reading decision function: perfect-knowledge stand-in for a
//! trained model at inference time.
//!
//! Each angle bucket is scored by the mean road probability along a
//! D-length ray from the search head, with samples suppressed where the
//! partial graph already has ink (the same tent coverage the window's
//! fourth channel renders). The walk probability is the best bucket score.

use crate::geom::Point;
use crate::raster::RasterGrid;
use crate::tracer::{
    angle_of_bucket, DecisionContext, DecisionError, DecisionFunction, DecisionOutput,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// Samples along each ray.
    pub samples_per_ray: usize,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams { samples_per_ray: 20 }
    }
}

pub struct SensorDecider {
    prob: RasterGrid,
    params: SensorParams,
}

impl SensorDecider {
    pub fn new(prob: RasterGrid, params: SensorParams) -> Self {
        SensorDecider { prob, params }
    }
}

impl DecisionFunction for SensorDecider {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
        let a = ctx.config.angle_buckets;
        let d = ctx.config.step_distance;
        let resolution = ctx.config.resolution;
        let head = ctx.head_position();
        let graph = ctx.graph();

        // Edges near enough to ink any ray sample: an endpoint within
        // (ray length + longest possible edge + suppression radius).
        let suppress_radius = d / 2.0;
        let reach = d + 4.0 * d + suppress_radius + 2.0 * resolution;
        let local_edges: Vec<(Point, Point)> = graph
            .edges()
            .iter()
            .filter(|&&(u, v)| {
                graph.position(u).distance(head) <= reach
                    || graph.position(v).distance(head) <= reach
            })
            .map(|&(u, v)| (graph.position(u), graph.position(v)))
            .collect();
        // A one-pixel line cannot mark a step-sized exploration corridor,
        // and traced chains wobble a few meters around the road axis; the
        // suppression tent is therefore D/2 wide rather than one pixel.
        let ink = |p: Point| -> f64 {
            let mut best = 0.0f64;
            for &(u, v) in &local_edges {
                let dist = crate::geom::point_segment_distance(p, u, v);
                best = best.max(1.0 - dist / suppress_radius);
            }
            best.clamp(0.0, 1.0)
        };

        let n = self.params.samples_per_ray.max(1);
        let angles: Vec<f64> = (0..a)
            .map(|bucket| {
                let angle = angle_of_bucket(bucket, a);
                let mut acc = 0.0;
                for i in 1..=n {
                    let p = head.offset(angle, d * i as f64 / n as f64);
                    acc += self.prob.sample(p).clamp(0.0, 1.0) * (1.0 - ink(p));
                }
                (acc / n as f64).clamp(0.0, 1.0)
            })
            .collect();
        let o_walk = angles.iter().copied().fold(0.0f64, f64::max);
        Ok(DecisionOutput { o_walk, o_stop: 1.0 - o_walk, angles })
    }
}
