//! Morphological thinning of binary masks to one-pixel-wide centerlines.
//!
//! Two-subiteration boundary peeling in the Zhang-Suen family, with one
//! amendment: marked pixels are re-checked sequentially before deletion
//! (crossing number 1, at least two set neighbors), so parallel peeling
//! can never erase or split a component. A final pass clears any fully-set
//! 2×2 block that survives the directional subiterations. The whole
//! procedure repeats until nothing changes, which makes it idempotent.

use crate::raster::RasterGrid;

struct Mask {
    w: usize,
    h: usize,
    set: Vec<bool>,
}

impl Mask {
    #[inline]
    fn get(&self, r: i64, c: i64) -> bool {
        r >= 0 && c >= 0 && r < self.h as i64 && c < self.w as i64 && self.set[r as usize * self.w + c as usize]
    }

    /// Clockwise neighborhood starting north: [N, NE, E, SE, S, SW, W, NW].
    #[inline]
    fn neighborhood(&self, r: i64, c: i64) -> [bool; 8] {
        [
            self.get(r - 1, c),
            self.get(r - 1, c + 1),
            self.get(r, c + 1),
            self.get(r + 1, c + 1),
            self.get(r + 1, c),
            self.get(r + 1, c - 1),
            self.get(r, c - 1),
            self.get(r - 1, c - 1),
        ]
    }
}

#[inline]
fn set_count(n: &[bool; 8]) -> usize {
    n.iter().filter(|&&b| b).count()
}

/// Number of 0→1 transitions around the neighborhood ring.
#[inline]
fn transitions(n: &[bool; 8]) -> usize {
    let mut count = 0;
    for i in 0..8 {
        if !n[i] && n[(i + 1) % 8] {
            count += 1;
        }
    }
    count
}

/// Proper (8, 4) simple-point test on the 3×3 ring: the set neighbors form
/// exactly one 8-connected component, and the clear neighbors 4-adjacent
/// to the pixel form exactly one 4-connected component. Deleting a simple
/// pixel changes neither foreground components nor holes.
fn is_simple(mask: &Mask, r: i64, c: i64) -> bool {
    // Ring cells with their offsets, clockwise from north.
    const OFFS: [(i64, i64); 8] =
        [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];
    let cells: [bool; 8] = std::array::from_fn(|i| mask.get(r + OFFS[i].0, c + OFFS[i].1));

    let adjacent = |i: usize, j: usize| -> bool {
        let (ri, ci) = OFFS[i];
        let (rj, cj) = OFFS[j];
        (ri - rj).abs() <= 1 && (ci - cj).abs() <= 1
    };
    let component_count = |want: bool, four_only: bool| -> (usize, usize) {
        let mut seen = [false; 8];
        let mut comps = 0;
        let mut comps_touching = 0;
        for start in 0..8 {
            if seen[start] || cells[start] != want {
                continue;
            }
            comps += 1;
            let mut touches = false;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                // Orthogonal ring positions are the even indices.
                if i % 2 == 0 {
                    touches = true;
                }
                for j in 0..8 {
                    if seen[j] || cells[j] != want || !adjacent(i, j) {
                        continue;
                    }
                    if four_only {
                        let (rj, cj) = OFFS[j];
                        let (ri, ci) = OFFS[i];
                        if (ri - rj).abs() + (ci - cj).abs() != 1 {
                            continue;
                        }
                    }
                    seen[j] = true;
                    stack.push(j);
                }
            }
            if touches {
                comps_touching += 1;
            }
        }
        (comps, comps_touching)
    };

    let (fg_comps, _) = component_count(true, false);
    let (_, bg_adjacent_comps) = component_count(false, true);
    fg_comps == 1 && bg_adjacent_comps == 1
}

/// Extremity: every set neighbor is adjacent to every other (they form a
/// clique in the ring). Covers isolated pixels, line ends, staircase tips,
/// and the blunt faces of two-pixel-wide strands — deleting any of these
/// retracts geometry instead of thinning it.
#[inline]
fn is_extremity(n: &[bool; 8]) -> bool {
    const OFFS: [(i64, i64); 8] =
        [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];
    let set: Vec<usize> = (0..8).filter(|&i| n[i]).collect();
    set.iter().enumerate().all(|(k, &i)| {
        set[k + 1..].iter().all(|&j| {
            (OFFS[i].0 - OFFS[j].0).abs() <= 1 && (OFFS[i].1 - OFFS[j].1).abs() <= 1
        })
    })
}

/// Line ending kept for the barb walker: one set neighbor, or two mutually
/// adjacent ones.
#[inline]
fn is_line_end(n: &[bool; 8]) -> bool {
    set_count(n) <= 2 && is_extremity(n)
}

/// Deletion is safe right now: the pixel is simple and not an extremity.
#[inline]
fn still_removable(mask: &Mask, r: i64, c: i64) -> bool {
    let n = mask.neighborhood(r, c);
    !is_extremity(&n) && is_simple(mask, r, c)
}

fn zhang_suen_candidate(mask: &Mask, r: i64, c: i64, second: bool) -> bool {
    let n = mask.neighborhood(r, c);
    let b = set_count(&n);
    if !(2..=6).contains(&b) || transitions(&n) != 1 {
        return false;
    }
    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
    if second {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    } else {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    }
}

/// Staircase-elimination candidate: the corner pixel of a diagonal
/// staircase step, which the directional subiterations never mark because
/// its crossing number is 2. The guard terms keep line ends and genuine
/// corners intact, so repeated passes smooth staircases without shortening
/// anything.
fn staircase_candidate(mask: &Mask, r: i64, c: i64, south: bool) -> bool {
    let n = mask.neighborhood(r, c);
    let (p_n, p_ne, p_e, p_se, p_s, p_sw, p_w, p_nw) =
        (n[0], n[1], n[2], n[3], n[4], n[5], n[6], n[7]);
    if south {
        p_s && ((p_e && !p_ne && !p_nw && (!p_w || !p_n)) || (p_w && !p_nw && !p_ne && (!p_e || !p_n)))
    } else {
        p_n && ((p_e && !p_se && !p_sw && (!p_w || !p_s)) || (p_w && !p_sw && !p_se && (!p_e || !p_s)))
    }
}

/// Thin `binary` to convergence. Output pixels are a subset of the input's
/// set pixels; 8-connected components survive one-to-one; no fully-set 2×2
/// block remains unless clearing it would change the mask's topology.
pub fn thin(binary: &RasterGrid) -> RasterGrid {
    let w = binary.width();
    let h = binary.height();
    let mut mask = Mask { w, h, set: binary.values().iter().map(|&v| v > 0.0).collect() };

    // Dirty tracking: after the first sweep only pixels whose
    // neighborhood lost a member can become removable.
    let mut dirty = vec![true; w * h];
    let mut next_dirty = vec![false; w * h];
    let mut candidates: Vec<usize> = Vec::new();

    loop {
        let mut deleted_any = false;
        for second in [false, true] {
            candidates.clear();
            for idx in 0..w * h {
                if !mask.set[idx] || !dirty[idx] {
                    continue;
                }
                let (r, c) = ((idx / w) as i64, (idx % w) as i64);
                if zhang_suen_candidate(&mask, r, c, second) {
                    candidates.push(idx);
                }
            }
            for &idx in &candidates {
                let (r, c) = ((idx / w) as i64, (idx % w) as i64);
                if still_removable(&mask, r, c) {
                    mask.set[idx] = false;
                    deleted_any = true;
                    mark_neighborhood(&mut next_dirty, w, h, r, c);
                }
            }
        }

        if !deleted_any {
            // Directional peeling stalls on diagonal staircases (their
            // corner pixels have crossing number 2); staircase
            // elimination unsticks them without shortening lines.
            let mut cleaned_any = false;
            for south in [false, true] {
                candidates.clear();
                for idx in 0..w * h {
                    if !mask.set[idx] {
                        continue;
                    }
                    let (r, c) = ((idx / w) as i64, (idx % w) as i64);
                    if staircase_candidate(&mask, r, c, south) {
                        candidates.push(idx);
                    }
                }
                for &idx in &candidates {
                    let (r, c) = ((idx / w) as i64, (idx % w) as i64);
                    if still_removable(&mask, r, c) && staircase_candidate(&mask, r, c, south) {
                        mask.set[idx] = false;
                        cleaned_any = true;
                        mark_neighborhood(&mut next_dirty, w, h, r, c);
                    }
                }
            }

            // Two-pixel-wide strands can be stable under both passes
            // (e.g. diagonals made of horizontal dominoes). Their interior
            // pixels are simple non-extremities; hollow them out.
            if !cleaned_any {
                for idx in 0..w * h {
                    if !mask.set[idx] {
                        continue;
                    }
                    let (r, c) = ((idx / w) as i64, (idx % w) as i64);
                    if still_removable(&mask, r, c) {
                        mask.set[idx] = false;
                        cleaned_any = true;
                        mark_neighborhood(&mut next_dirty, w, h, r, c);
                    }
                }
            }

            // Whatever fully-set 2×2 blocks remain after that are rare
            // knots; clear one safe pixel per block. The extremity guard
            // is waived — an isolated square must still shrink.
            if !cleaned_any {
                for r in 0..h.saturating_sub(1) {
                    for c in 0..w.saturating_sub(1) {
                        let block =
                            [r * w + c, r * w + c + 1, (r + 1) * w + c, (r + 1) * w + c + 1];
                        if !block.iter().all(|&i| mask.set[i]) {
                            continue;
                        }
                        for &i in &block {
                            let (pr, pc) = ((i / w) as i64, (i % w) as i64);
                            if set_count(&mask.neighborhood(pr, pc)) >= 2
                                && is_simple(&mask, pr, pc)
                            {
                                mask.set[i] = false;
                                cleaned_any = true;
                                mark_neighborhood(&mut next_dirty, w, h, pr, pc);
                                break;
                            }
                        }
                    }
                }
            }
            // With peeling fully stalled, strip whisker barbs; any
            // removal can unlock more peeling, so stay in the loop.
            if !cleaned_any && !prune_barbs(&mut mask, &mut next_dirty) {
                break;
            }
        }
        std::mem::swap(&mut dirty, &mut next_dirty);
        next_dirty.iter_mut().for_each(|d| *d = false);
    }

    let mut out = RasterGrid::zeros(w, h, binary.resolution, binary.origin);
    for (i, &s) in mask.set.iter().enumerate() {
        if s {
            out.set(i / w, i % w, 1.0);
        }
    }
    out
}

/// Peeling leaves occasional one-or-two-pixel whiskers sticking out of
/// junction pixels (crow's feet at caps, notch remnants at crossings).
/// Strip any leaf strand of at most `MAX_BARB` pixels that ends at a
/// pixel with three or more neighbors; longer strands are real geometry.
/// Removing a leaf strand can never split or erase a component.
const MAX_BARB: usize = 2;

fn prune_barbs(mask: &mut Mask, dirty: &mut [bool]) -> bool {
    let (w, h) = (mask.w, mask.h);
    let mut removed_ever = false;
    loop {
        let mut removed_any = false;
        for idx in 0..w * h {
            if !mask.set[idx] {
                continue;
            }
            let (r, c) = ((idx / w) as i64, (idx % w) as i64);
            let n = mask.neighborhood(r, c);
            if set_count(&n) == 0 || !is_line_end(&n) {
                continue;
            }
            // Walk the strand from this line end.
            let mut strand = vec![(r, c)];
            let (mut prev, mut cur) = ((r, c), neighbor_of(mask, r, c, (r, c)));
            let mut hit_junction = false;
            while strand.len() <= MAX_BARB {
                let Some(cur_px) = cur else { break };
                let n = mask.neighborhood(cur_px.0, cur_px.1);
                match set_count(&n) {
                    0 | 1 => break,
                    2 => {
                        strand.push(cur_px);
                        let next = neighbor_of(mask, cur_px.0, cur_px.1, prev);
                        prev = cur_px;
                        cur = next;
                    }
                    _ => {
                        hit_junction = true;
                        break;
                    }
                }
            }
            if hit_junction && strand.len() <= MAX_BARB {
                for (sr, sc) in strand {
                    mask.set[sr as usize * w + sc as usize] = false;
                    mark_neighborhood(dirty, w, h, sr, sc);
                }
                removed_any = true;
                removed_ever = true;
            }
        }
        if !removed_any {
            break;
        }
    }
    removed_ever
}

/// The set neighbor of (r, c) other than `skip`, if unique-ish (first in
/// clockwise order).
fn neighbor_of(mask: &Mask, r: i64, c: i64, skip: (i64, i64)) -> Option<(i64, i64)> {
    const OFFS: [(i64, i64); 8] =
        [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];
    OFFS.iter()
        .map(|&(dr, dc)| (r + dr, c + dc))
        .find(|&(nr, nc)| (nr, nc) != skip && mask.get(nr, nc))
}

#[inline]
fn mark_neighborhood(dirty: &mut [bool], w: usize, h: usize, r: i64, c: i64) {
    for dr in -1..=1i64 {
        for dc in -1..=1i64 {
            let (nr, nc) = (r + dr, c + dc);
            if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                dirty[nr as usize * w + nc as usize] = true;
            }
        }
    }
}

/// 8-connected component count of a binary grid (flood fill).
pub fn component_count(binary: &RasterGrid) -> usize {
    let w = binary.width();
    let h = binary.height();
    let mut seen = vec![false; w * h];
    let mut count = 0;
    for start in 0..w * h {
        if seen[start] || binary.values()[start] == 0.0 {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            let (r, c) = ((idx / w) as i64, (idx % w) as i64);
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let nidx = nr as usize * w + nc as usize;
                    if !seen[nidx] && binary.values()[nidx] > 0.0 {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
    }
    count
}

/// True if any fully-set 2×2 block exists (the width-1 criterion).
pub fn has_thick_block(binary: &RasterGrid) -> bool {
    let w = binary.width();
    let h = binary.height();
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            if binary.get(r, c) > 0.0
                && binary.get(r, c + 1) > 0.0
                && binary.get(r + 1, c) > 0.0
                && binary.get(r + 1, c + 1) > 0.0
            {
                return true;
            }
        }
    }
    false
}

/// True if a fully-set 2×2 block exists with a member whose removal would
/// preserve topology — i.e. a block the thinner should have cleared.
pub fn has_removable_thick_block(binary: &RasterGrid) -> bool {
    let w = binary.width();
    let h = binary.height();
    let mask = Mask { w, h, set: binary.values().iter().map(|&v| v > 0.0).collect() };
    for r in 0..h.saturating_sub(1) as i64 {
        for c in 0..w.saturating_sub(1) as i64 {
            let block = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            if block.iter().all(|&(br, bc)| mask.get(br, bc))
                && block.iter().any(|&(br, bc)| still_removable(&mask, br, bc))
            {
                return true;
            }
        }
    }
    false
}
