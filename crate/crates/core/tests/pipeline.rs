//! Cross-module end-to-end behavior: oracle-driven tracing on synthetic
//! geometry, map-matching accuracy, the merge rule on cycles and forks,
//! and skeleton-pipeline fidelity.

use maptrace_core::geograph::{connected_components, BoundingBox, SpatialGraph};
use maptrace_core::geom::Point;
use maptrace_core::metrics::{hausdorff_distance, junction_metric, JunctionParams};
use maptrace_core::oracle::{
    dynamic_training_session, map_match, EdgeIndex, OracleDecider, OracleState,
};
use maptrace_core::raster::Imagery;
use maptrace_core::skeleton::{component_count, run_pipeline, threshold, PipelineParams};
use maptrace_core::synthworld::{gen_network, rasterize, SensorDecider, SensorParams, Style, WorldSpec};
use maptrace_core::tracer::{
    bucket_of_angle, choose_action, run_multi_seed, run_search, Action, DecisionContext,
    DecisionError, DecisionFunction, DecisionOutput, TracerConfig, TraceAction,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn polyline_graph(points: &[(f64, f64)], max_segment: f64) -> SpatialGraph {
    let mut g = SpatialGraph::new();
    let mut prev: Option<usize> = None;
    for &(x, y) in points {
        let v = g.add_vertex(Point::new(x, y));
        if let Some(p) = prev {
            g.add_edge(p, v);
        }
        prev = Some(v);
    }
    densify(&g, max_segment)
}

fn densify(g: &SpatialGraph, max_segment: f64) -> SpatialGraph {
    let mut out = SpatialGraph::new();
    for &p in g.positions() {
        out.add_vertex(p);
    }
    for &(a, b) in g.edges() {
        let len = g.edge_length(a, b);
        let parts = (len / max_segment).ceil().max(1.0) as usize;
        let mut prev = a;
        for k in 1..parts {
            let v = out.add_vertex(g.position(a).lerp(g.position(b), k as f64 / parts as f64));
            out.add_edge(prev, v);
            prev = v;
        }
        out.add_edge(prev, b);
    }
    out
}

/// Every vertex of `target` lies within `radius` of some vertex of `g`.
fn covers(g: &SpatialGraph, target: &SpatialGraph, radius: f64) -> bool {
    target.positions().iter().all(|&t| {
        g.positions().iter().any(|&p| p.distance(t) <= radius)
    })
}

#[test]
fn oracle_traces_straight_road_end_to_end() {
    let gt = polyline_graph(&[(40.0, 100.0), (360.0, 100.0)], 10.0);
    let bbox = BoundingBox::new(0.0, 0.0, 400.0, 200.0);
    let config = TracerConfig::default();
    let mut decider = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 5);
    let outcome =
        run_search(Point::new(40.0, 100.0), bbox, &Imagery::blank(), &mut decider, &config)
            .unwrap();
    assert!(!outcome.truncated);
    assert!(covers(&outcome.graph, &gt, 1.5 * config.step_distance));
    // Stays on the road.
    for p in outcome.graph.positions() {
        assert!((p.y - 100.0).abs() < 6.0, "vertex strayed to {p:?}");
    }
}

#[test]
fn oracle_explores_t_intersection_like_the_search_should() {
    // T junction: left-right road with a north branch from the middle.
    let mut gt = SpatialGraph::new();
    let l = gt.add_vertex(Point::new(40.0, 150.0));
    let m = gt.add_vertex(Point::new(200.0, 150.0));
    let r = gt.add_vertex(Point::new(360.0, 150.0));
    let n = gt.add_vertex(Point::new(200.0, 310.0));
    gt.add_edge(l, m);
    gt.add_edge(m, r);
    gt.add_edge(m, n);
    let gt = densify(&gt, 10.0);

    let bbox = BoundingBox::new(0.0, 0.0, 400.0, 400.0);
    let config = TracerConfig::default();
    let mut decider = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 7);
    let outcome =
        run_search(Point::new(40.0, 150.0), bbox, &Imagery::blank(), &mut decider, &config)
            .unwrap();
    assert!(!outcome.truncated, "stack must drain on its own");
    // All three branch tips reached.
    for tip in [Point::new(360.0, 150.0), Point::new(200.0, 310.0), Point::new(40.0, 150.0)] {
        assert!(
            outcome.graph.positions().iter().any(|p| p.distance(tip) <= 18.0),
            "tip {tip:?} never reached"
        );
    }
    // The trace interleaves walks and stops (explore, back out, explore).
    let walks = outcome.events.iter().filter(|e| e.action == TraceAction::Walk).count();
    let stops = outcome
        .events
        .iter()
        .filter(|e| matches!(e.action, TraceAction::Stop | TraceAction::Oob))
        .count();
    assert!(walks >= 40, "only {walks} walks");
    assert_eq!(walks + 1, stops, "every pushed vertex pops exactly once");
}

#[test]
fn ring_road_closes_into_exactly_one_cycle() {
    for seed in [3, 11, 29] {
        let mut gt = SpatialGraph::new();
        let n = 40;
        let r = 90.0;
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            gt.add_vertex(Point::new(200.0 + r * a.cos(), 200.0 + r * a.sin()));
        }
        for i in 0..n {
            let j = (i + 1) % n;
            gt.add_edge(i.min(j), i.max(j));
        }
        let bbox = BoundingBox::new(0.0, 0.0, 400.0, 400.0);
        let config = TracerConfig::default();
        let mut decider =
            OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), seed);
        let outcome = run_search(
            Point::new(200.0 + r, 200.0),
            bbox,
            &Imagery::blank(),
            &mut decider,
            &config,
        )
        .unwrap();
        assert!(!outcome.truncated);
        let g = &outcome.graph;
        assert_eq!(
            g.edge_count(),
            g.vertex_count(),
            "seed {seed}: expected exactly one cycle (V={}, E={})",
            g.vertex_count(),
            g.edge_count()
        );
        let merges =
            outcome.events.iter().filter(|e| e.action == TraceAction::Merge).count();
        assert_eq!(merges, 1, "seed {seed}: the ring closes with one merge");
    }
}

#[test]
fn small_angle_fork_produces_no_parallel_chains() {
    // Two straight branches forking at ~20 degrees.
    let mut gt = SpatialGraph::new();
    let base = gt.add_vertex(Point::new(60.0, 200.0));
    let upper = gt.add_vertex(Point::new(60.0 + 300.0, 200.0 + 300.0 * 0.176));
    let lower = gt.add_vertex(Point::new(60.0 + 300.0, 200.0 - 300.0 * 0.176));
    let tail = gt.add_vertex(Point::new(20.0, 200.0));
    gt.add_edge(base, upper);
    gt.add_edge(base, lower);
    gt.add_edge(tail, base);
    let gt = densify(&gt, 10.0);

    let bbox = BoundingBox::new(0.0, 0.0, 400.0, 400.0);
    let config = TracerConfig::default();
    let mut decider = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 13);
    let outcome =
        run_search(Point::new(20.0, 200.0), bbox, &Imagery::blank(), &mut decider, &config)
            .unwrap();
    let g = &outcome.graph;

    // For each gt branch, traced vertices within 1.5D of it must form one
    // connected piece: a second pass over the same road would show up as a
    // second chunk.
    for (a, b) in [
        (Point::new(60.0, 200.0), Point::new(360.0, 252.8)),
        (Point::new(60.0, 200.0), Point::new(360.0, 147.2)),
    ] {
        let near: Vec<usize> = (0..g.vertex_count())
            .filter(|&v| {
                maptrace_core::geom::point_segment_distance(g.position(v), a, b)
                    <= 1.5 * config.step_distance
            })
            .collect();
        assert!(near.len() >= 10, "branch barely traced ({} vertices)", near.len());
        // Count connected chunks among `near` using graph adjacency.
        let mut chunks = 0;
        let mut seen = std::collections::HashSet::new();
        for &v in &near {
            if seen.contains(&v) {
                continue;
            }
            chunks += 1;
            let mut stack = vec![v];
            seen.insert(v);
            while let Some(x) = stack.pop() {
                for &y in g.neighbors(x) {
                    if near.contains(&y) && seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
        assert_eq!(chunks, 1, "branch traced as {chunks} separate chains");
    }
}

#[test]
fn map_match_recovers_jittered_paths_on_grid_worlds() {
    let spec = WorldSpec { seed: 21, style: Style::Grid, ..WorldSpec::default() };
    let gt = gen_network(&spec);
    let index = EdgeIndex::build(&gt, 48.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let d = 12.0;
    let mut exact = 0;
    let trials = 50;
    for _ in 0..trials {
        // True walk along gt.
        let start = rng.random_range(0..gt.vertex_count());
        let walk = gt.random_walk(start, 10, &mut rng);
        if walk.len() < 3 {
            continue;
        }
        let true_edges: Vec<(usize, usize)> = walk
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect();
        let jittered: Vec<Point> = walk
            .iter()
            .map(|&v| {
                let p = gt.position(v);
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = rng.random_range(0.0..d / 4.0);
                p.offset(angle, radius)
            })
            .collect();
        match map_match(&gt, &index, &jittered, 6.0, d) {
            Ok(m) => {
                let mut matched: Vec<(usize, usize)> = m.edges.clone();
                matched.sort_unstable();
                let mut expected = true_edges.clone();
                expected.sort_unstable();
                expected.dedup();
                if matched == expected {
                    exact += 1;
                }
            }
            Err(_) => {}
        }
    }
    assert!(
        exact as f64 >= 0.9 * trials as f64,
        "exact recovery {exact}/{trials}"
    );
}

#[test]
fn noiseless_world_recovers_through_skeleton_pipeline() {
    let spec = WorldSpec { seed: 8, style: Style::Grid, extent: 500.0, ..WorldSpec::default() };
    let gt = gen_network(&spec);
    let resolution = 1.2;
    let (prob, _) = rasterize(&gt, &spec, resolution);
    let params = PipelineParams {
        threshold: 0.5,
        epsilon: 0.6 * resolution,
        ..PipelineParams::default()
    };
    let stages = run_pipeline(&prob, &params);
    let h = hausdorff_distance(&gt, &stages.refined, resolution / 2.0);
    assert!(
        h <= resolution,
        "Hausdorff {h:.2} m exceeds one pixel ({resolution} m)"
    );
}

#[test]
fn occluded_world_fragments_the_skeleton_output() {
    let spec = WorldSpec {
        seed: 4,
        style: Style::Grid,
        extent: 500.0,
        occlusion_rate: 0.3,
        ..WorldSpec::default()
    };
    let gt = gen_network(&spec);
    let (prob, _) = rasterize(&gt, &spec, 0.6);
    let binary = threshold(&prob, 0.5);
    let components = component_count(&binary);
    let gt_components = connected_components(&gt).iter().max().unwrap() + 1;
    assert!(
        components >= 2 * gt_components,
        "occlusion should fragment: {components} vs {gt_components}"
    );
}

#[test]
fn sensor_decider_on_clean_world_scores_high_junction_recall() {
    let spec = WorldSpec { seed: 15, style: Style::Grid, extent: 500.0, ..WorldSpec::default() };
    let gt = gen_network(&spec);
    let (prob, _) = rasterize(&gt, &spec, 0.6);
    let seeds = maptrace_core::skeleton::seed_points(&prob, 0.9, 150.0);
    assert!(!seeds.is_empty());
    let config = TracerConfig::default();
    let mut decider = SensorDecider::new(prob, SensorParams::default());
    let outcome =
        run_multi_seed(&seeds, spec.bbox(), &Imagery::blank(), &mut decider, &config).unwrap();
    assert!(!outcome.truncated);
    let report = junction_metric(&gt, &outcome.graph, &JunctionParams::default());
    assert!(
        report.f_correct >= 0.9,
        "junction recall {:.3} below 0.9",
        report.f_correct
    );
    assert!(report.f_error <= 0.15, "junction error {:.3}", report.f_error);
}

/// Wraps a decider, rotating every walk by a fixed bucket offset.
struct BiasedDecider<D> {
    inner: D,
    offset: usize,
}

impl<D: DecisionFunction> DecisionFunction for BiasedDecider<D> {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
        let out = self.inner.decide(ctx)?;
        let a = out.angles.len();
        let mut rotated = vec![0.0; a];
        for (i, &v) in out.angles.iter().enumerate() {
            rotated[(i + self.offset) % a] = v;
        }
        Ok(DecisionOutput { o_walk: out.o_walk, o_stop: out.o_stop, angles: rotated })
    }
}

#[test]
fn dynamic_labels_point_back_toward_ground_truth_under_noise() {
    let gt = polyline_graph(&[(40.0, 200.0), (460.0, 200.0)], 10.0);
    let region = BoundingBox::new(0.0, 0.0, 500.0, 400.0);
    let config = TracerConfig::default();
    let oracle = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 31);
    // One bucket of systematic bias (5.6°) plus the oracle's own targets.
    let mut decider = BiasedDecider { inner: oracle, offset: 1 };
    let steps = dynamic_training_session(
        &gt,
        region,
        Point::new(40.0, 200.0),
        &Imagery::blank(),
        &mut decider,
        120,
        &config,
        31,
    )
    .unwrap();

    let a = config.angle_buckets;
    let d = config.step_distance;
    let mut checked = 0;
    for step in &steps {
        if step.example.target_action.0 != 1.0 {
            continue;
        }
        let head = step.example.input.center;
        // Executing the labeled action must land close to the road.
        let bucket = step
            .example
            .target_angles
            .iter()
            .position(|&v| v == 1.0)
            .expect("walk label has a bucket");
        let landing = head.offset(
            maptrace_core::tracer::angle_of_bucket(bucket, a),
            d,
        );
        let dist: f64 = gt
            .edges()
            .iter()
            .map(|&(u, v)| {
                maptrace_core::geom::point_segment_distance(
                    landing,
                    gt.position(u),
                    gt.position(v),
                )
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            dist <= 2.0 * (std::f64::consts::TAU / a as f64) * d + 1.0,
            "label landing {dist:.2} m off the road"
        );
        checked += 1;
    }
    assert!(checked >= 20, "too few walk labels ({checked}) to be meaningful");
}

#[test]
fn veering_decider_keeps_walk_labels_until_late() {
    let gt = polyline_graph(&[(40.0, 200.0), (460.0, 200.0)], 10.0);
    let region = BoundingBox::new(0.0, 0.0, 500.0, 400.0);
    let config = TracerConfig::default();
    let oracle = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 77);
    let mut decider = BiasedDecider { inner: oracle, offset: 1 };
    let steps = dynamic_training_session(
        &gt,
        region,
        Point::new(40.0, 200.0),
        &Imagery::blank(),
        &mut decider,
        200,
        &config,
        77,
    )
    .unwrap();
    let first_stop = steps
        .iter()
        .position(|s| s.example.target_action.1 == 1.0)
        .unwrap_or(steps.len());
    let max_x_before_stop = steps[..first_stop]
        .iter()
        .map(|s| s.example.input.center.x)
        .fold(0.0f64, f64::max);
    // The road runs to x = 460; no stop label until well past halfway.
    assert!(
        max_x_before_stop >= 250.0,
        "stop label appeared too early (progress {max_x_before_stop:.0} m)"
    );
}

#[test]
fn bucket_of_angle_matches_label_buckets() {
    // Sanity link between label buckets and the walk geometry they imply.
    for a in [16usize, 64] {
        for bucket in 0..a {
            let angle = maptrace_core::tracer::angle_of_bucket(bucket, a);
            assert_eq!(bucket_of_angle(angle, a), bucket);
        }
    }
}

#[test]
fn multi_seed_union_covers_disjoint_roads() {
    // Two parallel roads far apart; one seed on each.
    let mut gt = SpatialGraph::new();
    let a0 = gt.add_vertex(Point::new(40.0, 100.0));
    let a1 = gt.add_vertex(Point::new(360.0, 100.0));
    let b0 = gt.add_vertex(Point::new(40.0, 300.0));
    let b1 = gt.add_vertex(Point::new(360.0, 300.0));
    gt.add_edge(a0, a1);
    gt.add_edge(b0, b1);
    let gt = densify(&gt, 10.0);
    let bbox = BoundingBox::new(0.0, 0.0, 400.0, 400.0);
    let config = TracerConfig::default();
    let mut decider = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 3);
    let outcome = run_multi_seed(
        &[Point::new(40.0, 100.0), Point::new(40.0, 300.0)],
        bbox,
        &Imagery::blank(),
        &mut decider,
        &config,
    )
    .unwrap();
    assert!(covers(&outcome.graph, &gt, 1.5 * config.step_distance));
    let labels = connected_components(&outcome.graph);
    assert_eq!(labels.iter().max().unwrap() + 1, 2, "two disjoint roads stay disjoint");
    // Deterministic: same seeds, same run.
    let mut decider2 = OracleDecider::new(OracleState::new(gt.clone(), config.step_distance), 3);
    let outcome2 = run_multi_seed(
        &[Point::new(40.0, 100.0), Point::new(40.0, 300.0)],
        bbox,
        &Imagery::blank(),
        &mut decider2,
        &config,
    )
    .unwrap();
    assert_eq!(outcome.graph, outcome2.graph);
    assert_eq!(outcome.trace_text(), outcome2.trace_text());
}
