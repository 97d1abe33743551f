//! Iterative graph construction: grow a road graph one fixed-length step
//! at a time under the control of a pluggable decision function.
//!
//! The search keeps a partial graph `G` and a stack `S` of vertices,
//! both seeded with a starting vertex. Each iteration asks the decider for
//! walk/stop probabilities; a walk adds a vertex `D` meters from the stack
//! top along the chosen angle (or merges into nearby existing geometry),
//! while a stop pops the stack. The search ends when the stack drains.
//! Vertices are pushed at most once, so every run terminates at the step
//! budget even with an adversarial decider.

mod decision;
pub mod external;

pub use decision::{
    angle_of_bucket, bucket_of_angle, choose_action, render_graph_channel, Action,
    DecisionContext, DecisionError, DecisionFunction, DecisionInput, DecisionOutput, StopDecider,
};

use std::fmt;

use crate::geograph::{bounded_graph_distance, BoundingBox, GraphDistance, GridIndex, SpatialGraph, VertexId};
use crate::geom::Point;
use crate::raster::Imagery;

/// Tunables of the search loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracerConfig {
    /// Step distance D in meters.
    pub step_distance: f64,
    /// Walk/stop action threshold T: walk when o_walk ≥ T.
    pub walk_threshold: f64,
    /// Number of angle buckets a.
    pub angle_buckets: usize,
    /// Window side d in pixels.
    pub window_px: usize,
    /// Window resolution in meters per pixel.
    pub resolution: f64,
    /// Hard step budget; `None` derives 500 steps per hectare of B.
    pub max_steps: Option<usize>,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig {
            step_distance: 12.0,
            walk_threshold: 0.4,
            angle_buckets: 64,
            window_px: 256,
            resolution: 0.6,
            max_steps: None,
        }
    }
}

impl TracerConfig {
    pub fn resolved_max_steps(&self, bbox: BoundingBox) -> usize {
        self.max_steps
            .unwrap_or_else(|| (500.0 * bbox.area_hectares()).ceil().max(1.0) as usize)
    }
}

/// What a single [`SearchState::step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    /// Walk created this vertex (and the edge reaching it).
    AddedVertex(VertexId),
    /// Walk merged into this existing vertex instead of creating one.
    MergedEdge(VertexId),
    /// The stack top was popped (stop, or walk leaving the bounding box).
    Popped(VertexId),
}

/// One line of the step trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub step: usize,
    pub action: TraceAction,
    pub bucket: Option<usize>,
    pub pos: Point,
    pub stack_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAction {
    /// A new search seed was planted (not a decision step).
    Seed,
    Walk,
    Merge,
    Stop,
    /// Walk target left the bounding box; treated as a stop.
    Oob,
}

impl fmt::Display for TraceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TraceAction::Seed => "seed",
            TraceAction::Walk => "walk",
            TraceAction::Merge => "merge",
            TraceAction::Stop => "stop",
            TraceAction::Oob => "oob",
        };
        f.write_str(s)
    }
}

impl TraceEvent {
    /// `<step> <action> <bucket|-> <x> <y> <stack_depth>`
    pub fn to_line(&self) -> String {
        let bucket = match self.bucket {
            Some(b) => b.to_string(),
            None => "-".to_string(),
        };
        format!(
            "{} {} {} {} {} {}",
            self.step, self.action, bucket, self.pos.x, self.pos.y, self.stack_depth
        )
    }

    pub fn parse_line(line: &str) -> Option<TraceEvent> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return None;
        }
        let action = match fields[1] {
            "seed" => TraceAction::Seed,
            "walk" => TraceAction::Walk,
            "merge" => TraceAction::Merge,
            "stop" => TraceAction::Stop,
            "oob" => TraceAction::Oob,
            _ => return None,
        };
        let bucket = match fields[2] {
            "-" => None,
            b => Some(b.parse().ok()?),
        };
        Some(TraceEvent {
            step: fields[0].parse().ok()?,
            action,
            bucket,
            pos: Point::new(fields[3].parse().ok()?, fields[4].parse().ok()?),
            stack_depth: fields[5].parse().ok()?,
        })
    }
}

/// Mutable state of one search: the partial graph, the vertex stack, the
/// bounding box, and the step distance.
pub struct SearchState {
    graph: SpatialGraph,
    index: GridIndex,
    stack: Vec<VertexId>,
    pub bbox: BoundingBox,
    pub step_distance: f64,
    pub steps_taken: usize,
}

impl SearchState {
    pub fn new(v0: Point, bbox: BoundingBox, step_distance: f64) -> Self {
        assert!(bbox.contains(v0), "starting location must lie inside the bounding box");
        let mut state = SearchState {
            graph: SpatialGraph::new(),
            index: GridIndex::new(3.0 * step_distance),
            stack: Vec::new(),
            bbox,
            step_distance,
            steps_taken: 0,
        };
        state.plant_seed(v0);
        state
    }

    /// Add a fresh seed vertex and make it the whole stack. The previous
    /// stack must have drained.
    pub(crate) fn plant_seed(&mut self, v0: Point) -> VertexId {
        debug_assert!(self.stack.is_empty());
        let v = self.graph.add_vertex(v0);
        self.index.insert(v, v0);
        self.stack.push(v);
        v
    }

    pub fn graph(&self) -> &SpatialGraph {
        &self.graph
    }

    pub fn stack(&self) -> &[VertexId] {
        &self.stack
    }

    pub fn is_finished(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn head(&self) -> Option<VertexId> {
        self.stack.last().copied()
    }

    /// Take the finished graph out of the state.
    pub fn into_graph(self) -> SpatialGraph {
        self.graph
    }

    /// The merge rule: walking to `u`, connect to the nearest existing
    /// vertex within 3D of `u` whose shortest-path distance from the stack
    /// top is at least 6D, if any. Euclidean ties break toward the lowest
    /// vertex id.
    pub fn merge_check(&self, u: Point) -> Option<VertexId> {
        let head = *self.stack.last().expect("merge_check on empty stack");
        let d = self.step_distance;
        let mut best: Option<(f64, VertexId)> = None;
        for v in self.index.vertices_within(u, 3.0 * d) {
            let dist = self.graph.position(v).distance(u);
            if let Some((bd, bv)) = best {
                if dist > bd || (dist == bd && v > bv) {
                    continue;
                }
            }
            let far = match bounded_graph_distance(&self.graph, head, v, 6.0 * d) {
                GraphDistance::Exceeds => true,
                GraphDistance::Within(g) => g >= 6.0 * d,
            };
            if far {
                best = Some((dist, v));
            }
        }
        best.map(|(_, v)| v)
    }

    /// Apply one action. Stop pops the stack top; walk either adds a
    /// vertex+edge D meters along the bucket angle, merges into existing
    /// geometry, or (when the target leaves the bounding box) degrades to
    /// a stop.
    pub fn step(&mut self, action: Action, config: &TracerConfig) -> StepResult {
        let head = *self.stack.last().expect("step on empty stack");
        self.steps_taken += 1;
        match action {
            Action::Stop => {
                self.stack.pop();
                StepResult::Popped(head)
            }
            Action::Walk(bucket) => {
                let angle = angle_of_bucket(bucket, config.angle_buckets);
                let u = self.graph.position(head).offset(angle, self.step_distance);
                if !self.bbox.contains(u) {
                    self.stack.pop();
                    return StepResult::Popped(head);
                }
                if let Some(v) = self.merge_check(u) {
                    self.graph.add_edge(head, v);
                    return StepResult::MergedEdge(v);
                }
                let v = self.graph.add_vertex(u);
                self.index.insert(v, u);
                self.graph.add_edge(head, v);
                self.stack.push(v);
                StepResult::AddedVertex(v)
            }
        }
    }
}

/// Result of [`run_search`] / [`run_multi_seed`].
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub graph: SpatialGraph,
    /// True when the step budget ran out before the stack drained.
    pub truncated: bool,
    pub events: Vec<TraceEvent>,
    pub steps: usize,
}

impl SearchOutcome {
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }
}

/// Run the search loop from a single starting location until the stack
/// drains or the step budget runs out.
pub fn run_search(
    v0: Point,
    bbox: BoundingBox,
    imagery: &Imagery,
    decider: &mut dyn DecisionFunction,
    config: &TracerConfig,
) -> Result<SearchOutcome, DecisionError> {
    run_multi_seed(&[v0], bbox, imagery, decider, config)
}

/// Run the search from several seeds sequentially against one shared
/// graph. Seeds outside the bounding box or within 3D of already-traced
/// geometry are skipped.
pub fn run_multi_seed(
    seeds: &[Point],
    bbox: BoundingBox,
    imagery: &Imagery,
    decider: &mut dyn DecisionFunction,
    config: &TracerConfig,
) -> Result<SearchOutcome, DecisionError> {
    let max_steps = config.resolved_max_steps(bbox);
    let mut state: Option<SearchState> = None;
    let mut events = Vec::new();
    let mut steps = 0usize;
    let mut truncated = false;

    'seeds: for &seed in seeds {
        if !bbox.contains(seed) {
            continue;
        }
        match state.as_mut() {
            None => {
                state = Some(SearchState::new(seed, bbox, config.step_distance));
            }
            Some(st) => {
                if st.index.nearest_within(seed, 3.0 * config.step_distance).is_some() {
                    continue;
                }
                st.plant_seed(seed);
            }
        }
        events.push(TraceEvent {
            step: steps,
            action: TraceAction::Seed,
            bucket: None,
            pos: seed,
            stack_depth: 1,
        });

        let st = state.as_mut().unwrap();
        while !st.is_finished() {
            if steps >= max_steps {
                truncated = true;
                break 'seeds;
            }
            let output = {
                let mut ctx = DecisionContext::new(
                    &st.graph,
                    &st.stack,
                    bbox,
                    *config,
                    steps,
                    imagery,
                );
                let out = decider.decide(&mut ctx)?;
                out.validate(config.angle_buckets)?;
                out
            };
            let action = choose_action(&output, config.walk_threshold);
            let requested_bucket = match action {
                Action::Walk(b) => Some(b),
                Action::Stop => None,
            };
            let result = st.step(action, config);
            let (trace_action, bucket, pos) = match result {
                StepResult::AddedVertex(v) => (TraceAction::Walk, requested_bucket, st.graph.position(v)),
                StepResult::MergedEdge(v) => (TraceAction::Merge, requested_bucket, st.graph.position(v)),
                StepResult::Popped(v) => {
                    let action = if requested_bucket.is_some() { TraceAction::Oob } else { TraceAction::Stop };
                    (action, requested_bucket, st.graph.position(v))
                }
            };
            events.push(TraceEvent {
                step: steps,
                action: trace_action,
                bucket,
                pos,
                stack_depth: st.stack.len(),
            });
            steps += 1;
        }
    }

    let graph = state.map(SearchState::into_graph).unwrap_or_default();
    Ok(SearchOutcome { graph, truncated, events, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox() -> BoundingBox {
        BoundingBox::new(-100.0, -100.0, 100.0, 100.0)
    }

    struct ScriptDecider {
        script: Vec<Action>,
        at: usize,
        a: usize,
    }

    impl ScriptDecider {
        fn new(script: Vec<Action>, a: usize) -> Self {
            ScriptDecider { script, at: 0, a }
        }
    }

    impl DecisionFunction for ScriptDecider {
        fn decide(&mut self, _ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
            let action = self.script.get(self.at).copied().unwrap_or(Action::Stop);
            self.at += 1;
            Ok(match action {
                Action::Stop => DecisionOutput::stop(self.a),
                Action::Walk(b) => {
                    let mut angles = vec![0.0; self.a];
                    angles[b] = 1.0;
                    DecisionOutput { o_walk: 1.0, o_stop: 0.0, angles }
                }
            })
        }
    }

    #[test]
    fn stop_only_halts_in_one_step() {
        let mut decider = StopDecider;
        let outcome = run_search(
            Point::new(0.0, 0.0),
            bbox(),
            &Imagery::blank(),
            &mut decider,
            &TracerConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.steps, 1);
        assert_eq!(outcome.graph.vertex_count(), 1);
        assert_eq!(outcome.graph.edge_count(), 0);
        assert!(!outcome.truncated);
    }

    #[test]
    fn walk_east_adds_vertex_at_step_distance() {
        let config = TracerConfig::default();
        let mut state = SearchState::new(Point::new(0.0, 0.0), bbox(), config.step_distance);
        let result = state.step(Action::Walk(0), &config);
        match result {
            StepResult::AddedVertex(v) => {
                let p = state.graph().position(v);
                assert!((p.x - 12.0).abs() < 1e-9 && p.y.abs() < 1e-9);
            }
            other => panic!("expected AddedVertex, got {other:?}"),
        }
        assert_eq!(state.stack().len(), 2);
        assert_eq!(state.graph().edge_count(), 1);
    }

    #[test]
    fn walk_outside_bbox_pops() {
        let config = TracerConfig::default();
        let tight = BoundingBox::new(-5.0, -5.0, 5.0, 5.0);
        let mut state = SearchState::new(Point::new(0.0, 0.0), tight, config.step_distance);
        let result = state.step(Action::Walk(0), &config);
        assert!(matches!(result, StepResult::Popped(0)));
        assert!(state.is_finished());
        assert_eq!(state.graph().vertex_count(), 1);
    }

    #[test]
    fn merge_requires_far_graph_distance() {
        // Chain of 3 vertices 12 m apart heading east; a walk from the
        // third vertex pointing back near the first must NOT merge: the
        // first vertex is 24 m away along the chain, well under 6D.
        let config = TracerConfig::default();
        let mut state = SearchState::new(Point::new(0.0, 0.0), bbox(), config.step_distance);
        state.step(Action::Walk(0), &config);
        state.step(Action::Walk(0), &config);
        // Head at (24, 0); vertex 0 at (0, 0) is 24 m away euclidean (2D
        // = within 3D) but 24 m by graph too.
        assert_eq!(state.merge_check(Point::new(2.0, 5.0)), None);
    }

    #[test]
    fn merge_connects_across_components() {
        let config = TracerConfig::default();
        let mut state = SearchState::new(Point::new(0.0, 0.0), bbox(), config.step_distance);
        state.step(Action::Stop, &config);
        assert!(state.is_finished());
        state.plant_seed(Point::new(50.0, 30.0));
        // Walking from the new seed toward the old isolated vertex: the
        // old vertex is in another component (graph distance infinite), so
        // any landing within 3D of it merges.
        let u = Point::new(10.0, 0.0);
        assert_eq!(state.merge_check(u), Some(0));
    }

    #[test]
    fn stack_discipline_push_pop_once() {
        // Random-ish script: every vertex is pushed at most once and
        // popped at most once.
        let a = 16;
        let script: Vec<Action> = (0..200)
            .map(|i| match i % 5 {
                0 | 1 | 2 => Action::Walk((i * 7) % a),
                _ => Action::Stop,
            })
            .collect();
        let mut decider = ScriptDecider::new(script, a);
        let config = TracerConfig { angle_buckets: a, ..TracerConfig::default() };
        let outcome =
            run_search(Point::new(0.0, 0.0), bbox(), &Imagery::blank(), &mut decider, &config)
                .unwrap();
        // Each trace event transitions the stack by at most one; vertices
        // only ever enter on Walk events, and each Walk event pushes a
        // brand-new vertex id.
        let walks = outcome.events.iter().filter(|e| e.action == TraceAction::Walk).count();
        assert_eq!(outcome.graph.vertex_count(), walks + 1);
        // Everything in-bounds.
        for p in outcome.graph.positions() {
            assert!(bbox().contains(*p));
        }
        outcome.graph.validate().unwrap();
    }

    #[test]
    fn step_budget_truncates() {
        struct WalkForever;
        impl DecisionFunction for WalkForever {
            fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
                let a = ctx.config.angle_buckets;
                let mut angles = vec![0.0; a];
                // Spiral-ish: change heading with the step counter.
                angles[ctx.step % a] = 1.0;
                Ok(DecisionOutput { o_walk: 1.0, o_stop: 0.0, angles })
            }
        }
        let config = TracerConfig { max_steps: Some(40), ..TracerConfig::default() };
        let outcome = run_search(
            Point::new(0.0, 0.0),
            bbox(),
            &Imagery::blank(),
            &mut WalkForever,
            &config,
        )
        .unwrap();
        assert!(outcome.truncated);
        assert_eq!(outcome.steps, 40);
    }

    #[test]
    fn multi_seed_skips_near_existing() {
        let mut decider = StopDecider;
        let seeds = [Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(80.0, 80.0)];
        let outcome = run_multi_seed(
            &seeds,
            bbox(),
            &Imagery::blank(),
            &mut decider,
            &TracerConfig::default(),
        )
        .unwrap();
        // Second seed is within 3D = 36 m of the first vertex: skipped.
        assert_eq!(outcome.graph.vertex_count(), 2);
        let seed_events =
            outcome.events.iter().filter(|e| e.action == TraceAction::Seed).count();
        assert_eq!(seed_events, 2);
    }

    #[test]
    fn trace_lines_parse_back() {
        let mut decider = ScriptDecider::new(vec![Action::Walk(3), Action::Stop], 8);
        let config = TracerConfig { angle_buckets: 8, ..TracerConfig::default() };
        let outcome =
            run_search(Point::new(1.0, 2.0), bbox(), &Imagery::blank(), &mut decider, &config)
                .unwrap();
        for event in &outcome.events {
            let line = event.to_line();
            let parsed = TraceEvent::parse_line(&line).expect("line parses");
            assert_eq!(parsed, *event);
        }
    }
}
