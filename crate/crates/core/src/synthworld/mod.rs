//! Deterministic synthetic worlds: road networks with junctions, curves,
//! dead ends, and cycles, plus rasterized probability masks and procedural
//! imagery, so every pipeline is testable end to end without real data.
//!
//! Everything is a pure function of the world spec (seed included); the
//! per-pixel noise comes from hashing pixel coordinates rather than a
//! sequential stream, so rasterization parallelizes without changing
//! output.

mod gen;
mod sensor;

pub use gen::gen_network;
pub use sensor::{SensorDecider, SensorParams};

use crate::exec;
use crate::geograph::BoundingBox;
use crate::geom::{point_segment_distance, Point};
use crate::raster::{Imagery, RasterGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Grid,
    Radial,
    Organic,
}

impl std::str::FromStr for Style {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(Style::Grid),
            "radial" => Ok(Style::Radial),
            "organic" => Ok(Style::Organic),
            other => Err(format!("unknown style `{other}` (grid|radial|organic)")),
        }
    }
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Style::Grid => "grid",
            Style::Radial => "radial",
            Style::Organic => "organic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    /// World side length, meters; roads live in [0, extent]².
    pub extent: f64,
    pub style: Style,
    /// Full road width in the rasterization, meters.
    pub road_width: f64,
    /// Fraction of total road length hidden by occlusion patches.
    pub occlusion_rate: f64,
    /// Gaussian noise added to the probability mask.
    pub noise_sigma: f64,
    /// Ground-truth edges are subdivided to at most this length, meters.
    pub max_segment: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 0,
            extent: 1000.0,
            style: Style::Grid,
            road_width: 6.0,
            occlusion_rate: 0.0,
            noise_sigma: 0.0,
            max_segment: 10.0,
        }
    }
}

impl WorldSpec {
    /// The tracing bounding box of this world.
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::new(0.0, 0.0, self.extent, self.extent)
    }
}

/// SplitMix64; the basis of all hash-derived per-pixel noise.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn hash_unit(seed: u64, a: u64, b: u64, salt: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b ^ salt)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal from two hashed uniforms (Box-Muller).
fn hash_normal(seed: u64, a: u64, b: u64, salt: u64) -> f64 {
    let u1 = hash_unit(seed, a, b, salt).max(1e-12);
    let u2 = hash_unit(seed, a, b, salt ^ 0x5bf0_3635);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Smooth value noise in [0, 1] at roughly `scale`-meter features.
fn value_noise(seed: u64, x: f64, y: f64, scale: f64, salt: u64) -> f64 {
    let gx = x / scale;
    let gy = y / scale;
    let x0 = gx.floor();
    let y0 = gy.floor();
    let fx = gx - x0;
    let fy = gy - y0;
    let s = |dx: f64, dy: f64| {
        hash_unit(seed, (x0 + dx) as i64 as u64, (y0 + dy) as i64 as u64, salt)
    };
    let blend = |t: f64| t * t * (3.0 - 2.0 * t);
    let (bx, by) = (blend(fx), blend(fy));
    let top = s(0.0, 0.0) * (1.0 - bx) + s(1.0, 0.0) * bx;
    let bottom = s(0.0, 1.0) * (1.0 - bx) + s(1.0, 1.0) * bx;
    top * (1.0 - by) + bottom * by
}

/// An occlusion patch: a sub-segment of a road edge plus the blot radius.
#[derive(Debug, Clone, Copy)]
struct Patch {
    a: Point,
    b: Point,
    radius: f64,
}

/// Pick occlusion patches of 10-30 m until `rate` of the total road length
/// is covered. Deterministic in the spec seed.
fn occlusion_patches(gt: &crate::geograph::SpatialGraph, spec: &WorldSpec) -> Vec<Patch> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed ^ 0x0cc1);
    let total: f64 = gt.total_edge_length();
    let goal = spec.occlusion_rate * total;
    let edges = gt.edges();
    if edges.is_empty() || goal <= 0.0 {
        return Vec::new();
    }
    let cumulative: Vec<f64> = edges
        .iter()
        .scan(0.0, |acc, &(a, b)| {
            *acc += gt.edge_length(a, b);
            Some(*acc)
        })
        .collect();
    let mut covered = 0.0;
    let mut patches = Vec::new();
    while covered < goal && patches.len() < 10_000 {
        let pick = rng.random_range(0.0..total);
        let idx = cumulative.partition_point(|&c| c < pick);
        let (a, b) = edges[idx.min(edges.len() - 1)];
        let pa = gt.position(a);
        let pb = gt.position(b);
        let len = pa.distance(pb);
        let patch_len = rng.random_range(10.0..30.0);
        let start = rng.random_range(0.0..1.0f64);
        // Walk forward along the chain from this edge if the patch is
        // longer than the edge; a stadium around the clipped sub-segment
        // is enough for masking purposes.
        let t0 = start.min(1.0);
        let t1 = (start + patch_len / len).min(1.0);
        patches.push(Patch {
            a: pa.lerp(pb, t0),
            b: pa.lerp(pb, t1),
            radius: spec.road_width / 2.0 + 1.5,
        });
        covered += (t1 - t0) * len;
    }
    patches
}

/// Rasterize the world: a road-probability mask (1 on centerlines, falling
/// linearly to 0 at half the road width) and 3-channel procedural imagery
/// of the same scene, both covering the world bbox with a small pad.
pub fn rasterize(
    gt: &crate::geograph::SpatialGraph,
    spec: &WorldSpec,
    resolution: f64,
) -> (RasterGrid, Imagery) {
    assert!(resolution > 0.0);
    let pad = spec.road_width + 2.0;
    let origin = Point::new(-pad, spec.extent + pad);
    let side = ((spec.extent + 2.0 * pad) / resolution).ceil() as usize;
    let half_width = spec.road_width / 2.0;
    // Probability is 1 across the road surface and feathers to 0 over one
    // pixel past the edge; round caps at dead ends keep thinned skeleton
    // tips at the true road tips.
    let feather = resolution;

    // Signed margin to the nearest road surface per pixel, computed by
    // stamping each edge over its inflated bounding box. Dead-end roads
    // taper to a point over their last few meters, so the thinned
    // skeleton's line end coincides with the road tip instead of
    // wandering inside a blunt cap.
    let taper_len = half_width + feather;
    let mut margin = vec![f64::INFINITY; side * side];
    let reach = half_width + feather + resolution * 2.0;
    for &(a, b) in gt.edges() {
        let pa = gt.position(a);
        let pb = gt.position(b);
        let tip_a = gt.degree(a) == 1;
        let tip_b = gt.degree(b) == 1;
        let len = pa.distance(pb);
        let min_c = (((pa.x.min(pb.x) - reach) - origin.x) / resolution).floor().max(0.0) as usize;
        let max_c =
            (((pa.x.max(pb.x) + reach) - origin.x) / resolution).ceil().min(side as f64 - 1.0) as usize;
        let min_r = ((origin.y - (pa.y.max(pb.y) + reach)) / resolution).floor().max(0.0) as usize;
        let max_r =
            (((origin.y - (pa.y.min(pb.y) - reach)) / resolution).ceil()).min(side as f64 - 1.0) as usize;
        for r in min_r..=max_r {
            for c in min_c..=max_c {
                let p = Point::new(
                    origin.x + (c as f64 + 0.5) * resolution,
                    origin.y - (r as f64 + 0.5) * resolution,
                );
                let (q, t) = crate::geom::project_onto_segment(p, pa, pb);
                let d = p.distance(q);
                let mut hw = half_width;
                if tip_a || tip_b {
                    let from_tip = if tip_a { t * len } else { (1.0 - t) * len };
                    if from_tip < taper_len {
                        hw = (half_width * from_tip / taper_len).max(0.6 * resolution);
                    }
                }
                let m = d - hw;
                let slot = &mut margin[r * side + c];
                if m < *slot {
                    *slot = m;
                }
            }
        }
    }

    let patches = occlusion_patches(gt, spec);
    let occluded = |p: Point| patches.iter().any(|pt| point_segment_distance(p, pt.a, pt.b) <= pt.radius);

    let seed = spec.seed;
    let sigma = spec.noise_sigma;
    let rows: Vec<Vec<f64>> = exec::map_range(side, |r| {
        (0..side)
            .map(|c| {
                let p = Point::new(
                    origin.x + (c as f64 + 0.5) * resolution,
                    origin.y - (r as f64 + 0.5) * resolution,
                );
                let m = margin[r * side + c];
                let mut v = if m <= 0.0 { 1.0 } else { (1.0 - m / feather).clamp(0.0, 1.0) };
                if v > 0.0 && occluded(p) {
                    v = 0.0;
                }
                if sigma > 0.0 {
                    v = (v + sigma * hash_normal(seed, r as u64, c as u64, 0x7015e)).clamp(0.0, 1.0);
                }
                v
            })
            .collect()
    });
    let mut prob = RasterGrid::zeros(side, side, resolution, origin);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            prob.set(r, c, v);
        }
    }

    // Imagery: road-toned channel, inverted contrast channel, terrain
    // texture. Occlusions render as canopy-like blotches.
    let image_rows: Vec<Vec<[f64; 3]>> = exec::map_range(side, |r| {
        (0..side)
            .map(|c| {
                let p = Point::new(
                    origin.x + (c as f64 + 0.5) * resolution,
                    origin.y - (r as f64 + 0.5) * resolution,
                );
                let on_road = margin[r * side + c] <= 0.0;
                let occ = occluded(p);
                let texture = value_noise(seed, p.x, p.y, 23.0, 0xb10b);
                let fine = value_noise(seed, p.x, p.y, 6.0, 0xf1ef);
                let (mut c0, mut c1);
                if on_road && !occ {
                    c0 = 0.78 + 0.08 * (fine - 0.5);
                    c1 = 0.30 + 0.08 * (fine - 0.5);
                } else {
                    c0 = 0.18 + 0.18 * texture;
                    c1 = 0.45 + 0.25 * texture;
                }
                if occ && margin[r * side + c] <= 1.5 {
                    c0 = 0.32 + 0.25 * fine;
                    c1 = 0.52 + 0.20 * fine;
                }
                let c2 = 0.35 + 0.4 * value_noise(seed, p.x, p.y, 51.0, 0x7e44) + 0.1 * (fine - 0.5);
                [c0.clamp(0.0, 1.0), c1.clamp(0.0, 1.0), c2.clamp(0.0, 1.0)]
            })
            .collect()
    });
    let mut channels =
        [(); 3].map(|_| RasterGrid::zeros(side, side, resolution, origin));
    for (r, row) in image_rows.iter().enumerate() {
        for (c, px) in row.iter().enumerate() {
            for (ch, channel) in channels.iter_mut().enumerate() {
                channel.set(r, c, px[ch]);
            }
        }
    }

    (prob, Imagery::new(channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geograph::SpatialGraph;

    fn line_world() -> (SpatialGraph, WorldSpec) {
        let mut g = SpatialGraph::new();
        // Horizontal road along y = 60 from x = 20 to x = 180.
        let a = g.add_vertex(Point::new(20.0, 60.0));
        let b = g.add_vertex(Point::new(180.0, 60.0));
        g.add_edge(a, b);
        let spec = WorldSpec { extent: 200.0, ..WorldSpec::default() };
        (g, spec)
    }

    #[test]
    fn clean_raster_is_one_on_centerline() {
        let (g, spec) = line_world();
        let (prob, _) = rasterize(&g, &spec, 0.5);
        // Sample along the centerline: the nearest pixel center is within
        // 0.25 m, giving a probability of at least 1 − 0.25/3.
        for step in 0..20 {
            let p = Point::new(30.0 + step as f64 * 7.0, 60.0);
            assert!(prob.sample(p) >= 0.85, "probability at {p:?} is {}", prob.sample(p));
        }
        // Far off-road: zero.
        assert_eq!(prob.sample(Point::new(100.0, 150.0)), 0.0);
    }

    #[test]
    fn occlusion_zeroes_patches() {
        let (g, mut spec) = line_world();
        spec.occlusion_rate = 0.4;
        let (prob, _) = rasterize(&g, &spec, 0.5);
        let (clean, _) = rasterize(&g, &WorldSpec { occlusion_rate: 0.0, ..spec }, 0.5);
        let zeroed = (0..prob.width() * prob.height())
            .filter(|&i| clean.values()[i] > 0.5 && prob.values()[i] == 0.0)
            .count();
        let road = clean.values().iter().filter(|&&v| v > 0.5).count();
        let frac = zeroed as f64 / road as f64;
        assert!(frac > 0.2 && frac < 0.7, "occluded fraction {frac}");
    }

    #[test]
    fn rasterize_deterministic() {
        let (g, mut spec) = line_world();
        spec.noise_sigma = 0.1;
        spec.occlusion_rate = 0.2;
        let (p1, i1) = rasterize(&g, &spec, 0.5);
        let (p2, i2) = rasterize(&g, &spec, 0.5);
        assert_eq!(p1, p2);
        assert_eq!(i1, i2);
    }

    #[test]
    fn noise_is_clamped() {
        let (g, mut spec) = line_world();
        spec.noise_sigma = 0.5;
        let (prob, _) = rasterize(&g, &spec, 1.0);
        assert!(prob.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
