//! The decision-function contract: what the search feeds a decider and
//! what it expects back.
//!
//! A decider sees a 4-channel square window centered on the search head
//! (three imagery channels plus a rendering of the partial graph) and
//! answers with walk/stop probabilities and a per-angle-bucket desirability
//! vector. Building the window costs a full d×d render, and the built-in
//! ground-truth and sensor deciders never look at it, so the window is
//! materialized lazily through [`DecisionContext`].

use std::time::Duration;

use thiserror::Error;

use crate::geograph::{BoundingBox, SpatialGraph, VertexId};
use crate::geom::{normalize_angle, Point, TAU};
use crate::raster::{Imagery, RasterGrid};

use super::TracerConfig;

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("decider protocol error: {0}")]
    Protocol(String),
    #[error("decider timed out after {0:?}")]
    Timeout(Duration),
    #[error("decider i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Center angle of bucket `i` out of `a` uniformly spaced directions in
/// [0, 2π): exactly `2π·i/a`.
pub fn angle_of_bucket(i: usize, a: usize) -> f64 {
    assert!(i < a, "bucket index {i} out of range for {a} buckets");
    TAU * i as f64 / a as f64
}

/// The bucket whose center is closest to `angle`, wrapping around so an
/// angle just below 2π maps to bucket 0.
pub fn bucket_of_angle(angle: f64, a: usize) -> usize {
    let scaled = normalize_angle(angle) * a as f64 / TAU;
    (scaled.round() as usize) % a
}

/// What a decision function returns: the softmax-style action pair and a
/// sigmoid-style per-bucket angle vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutput {
    pub o_walk: f64,
    pub o_stop: f64,
    /// One desirability in [0, 1] per angle bucket.
    pub angles: Vec<f64>,
}

impl DecisionOutput {
    pub fn stop(a: usize) -> Self {
        DecisionOutput { o_walk: 0.0, o_stop: 1.0, angles: vec![0.0; a] }
    }

    /// Check the output contract: the action pair sums to 1 within 1e-6,
    /// every angle entry lies in [0, 1], and the bucket count matches.
    pub fn validate(&self, a: usize) -> Result<(), DecisionError> {
        if !(self.o_walk.is_finite() && self.o_stop.is_finite()) {
            return Err(DecisionError::Protocol("non-finite action probabilities".into()));
        }
        if (self.o_walk + self.o_stop - 1.0).abs() > 1e-6 {
            return Err(DecisionError::Protocol(format!(
                "o_walk + o_stop = {}, expected 1",
                self.o_walk + self.o_stop
            )));
        }
        if self.angles.len() != a {
            return Err(DecisionError::Protocol(format!(
                "expected {a} angle entries, got {}",
                self.angles.len()
            )));
        }
        if self.angles.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(DecisionError::Protocol("angle entry outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Action selected from a [`DecisionOutput`] by thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Walk one step toward the center angle of this bucket.
    Walk(usize),
    Stop,
}

/// Walk at the argmax bucket when `o_walk ≥ threshold` (inclusive),
/// otherwise stop. Argmax ties break toward the lowest index.
pub fn choose_action(out: &DecisionOutput, threshold: f64) -> Action {
    if out.o_walk >= threshold {
        let mut best = 0;
        for (i, &v) in out.angles.iter().enumerate() {
            if v > out.angles[best] {
                best = i;
            }
        }
        Action::Walk(best)
    } else {
        Action::Stop
    }
}

/// The 4-channel window handed to window-reading deciders.
///
/// `channels` is row-major with interleaved channels: index
/// `(row·d + col)·4 + c`, where channels 0..3 are imagery and channel 3 is
/// the partial-graph rendering. Values are f32 in [0, 1] to match the wire
/// encoding used by external deciders.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionInput {
    pub center: Point,
    pub d: usize,
    pub resolution: f64,
    pub channels: Vec<f32>,
}

impl DecisionInput {
    #[inline]
    pub fn at(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.channels[(row * self.d + col) * 4 + channel]
    }

    /// Assemble the window: imagery channels sampled bilinearly, partial
    /// graph rendered via [`render_graph_channel`].
    pub fn build(
        graph: &SpatialGraph,
        center: Point,
        d: usize,
        resolution: f64,
        imagery: &Imagery,
    ) -> DecisionInput {
        let graph_channel = render_graph_channel(graph, center, d, resolution);
        let mut channels = vec![0.0f32; d * d * 4];
        for row in 0..d {
            for col in 0..d {
                let p = graph_channel.pixel_center(row, col);
                let base = (row * d + col) * 4;
                for ch in 0..3 {
                    channels[base + ch] = imagery.channels[ch].sample(p) as f32;
                }
                channels[base + 3] = graph_channel.get(row, col) as f32;
            }
        }
        DecisionInput { center, d, resolution, channels }
    }
}

/// Render the partial graph as the window's fourth channel: every edge
/// intersecting the d×d window centered on `center` drawn as an
/// anti-aliased one-pixel line; an empty graph gives all zeros.
pub fn render_graph_channel(
    graph: &SpatialGraph,
    center: Point,
    d: usize,
    resolution: f64,
) -> RasterGrid {
    assert!(d > 0 && resolution > 0.0);
    let half = d as f64 * resolution / 2.0;
    let origin = Point::new(center.x - half, center.y + half);
    let mut grid = RasterGrid::zeros(d, d, resolution, origin);
    let reach = half + resolution; // window half-extent plus AA margin
    for &(u, v) in graph.edges() {
        let a = graph.position(u);
        let b = graph.position(v);
        if a.x.min(b.x) > center.x + reach
            || a.x.max(b.x) < center.x - reach
            || a.y.min(b.y) > center.y + reach
            || a.y.max(b.y) < center.y - reach
        {
            continue;
        }
        grid.draw_segment_aa(a, b);
    }
    grid
}

/// Read-only view of a running search handed to deciders, with lazy
/// window materialization.
pub struct DecisionContext<'a> {
    graph: &'a SpatialGraph,
    stack: &'a [VertexId],
    pub bbox: BoundingBox,
    pub config: TracerConfig,
    pub step: usize,
    imagery: &'a Imagery,
    window: Option<DecisionInput>,
}

impl<'a> DecisionContext<'a> {
    pub(crate) fn new(
        graph: &'a SpatialGraph,
        stack: &'a [VertexId],
        bbox: BoundingBox,
        config: TracerConfig,
        step: usize,
        imagery: &'a Imagery,
    ) -> Self {
        DecisionContext { graph, stack, bbox, config, step, imagery, window: None }
    }

    pub fn graph(&self) -> &SpatialGraph {
        self.graph
    }

    pub fn stack(&self) -> &[VertexId] {
        self.stack
    }

    /// Current search head (top of the vertex stack).
    pub fn head(&self) -> VertexId {
        *self.stack.last().expect("decide called with empty stack")
    }

    pub fn head_position(&self) -> Point {
        self.graph.position(self.head())
    }

    /// The 4-channel window centered on the head, built on first access.
    pub fn window(&mut self) -> &DecisionInput {
        if self.window.is_none() {
            self.window = Some(DecisionInput::build(
                self.graph,
                self.head_position(),
                self.config.window_px,
                self.config.resolution,
                self.imagery,
            ));
        }
        self.window.as_ref().unwrap()
    }
}

/// A pluggable search policy.
///
/// Implementations may keep internal state (an explored-edge set, model
/// weights, a child process) but must not mutate the search itself; the
/// context only hands out read-only views.
pub trait DecisionFunction {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError>;
}

/// Decider that always stops. Drains any search in one pop per vertex.
pub struct StopDecider;

impl DecisionFunction for StopDecider {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
        Ok(DecisionOutput::stop(ctx.config.angle_buckets))
    }
}
