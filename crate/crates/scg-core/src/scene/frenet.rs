//! Frenet-frame geometry: arc-length projection onto centerlines, lane
//! assignment with lateral/heading gates, signed path distances along
//! successor chains and lane conflict detection.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::scene::{normalize_yaw, EntityState, FrenetCoord, Lane, LaneGates, LaneMap, Point};

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point, measured from the polyline start.
    pub s: f64,
    /// Signed lateral offset; left of travel direction is positive. For
    /// projections clamped to a vertex this is the lateral component in the
    /// winning segment's frame.
    pub d: f64,
    /// Index of the segment containing the closest point; vertex ties go to
    /// the smaller index.
    pub seg_idx: usize,
}

/// A lane candidate for an entity, with its normalized assignment score.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneAssignment {
    pub coord: FrenetCoord,
    pub score: f64,
}

fn seg_len(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Projects `point` onto the polyline and returns arc length, signed
/// lateral offset and the containing segment index.
pub fn arc_length_project(centerline: &[Point], point: Point) -> Projection {
    assert!(centerline.len() >= 2, "polyline needs at least 2 points");
    let mut best: Option<(f64, Projection)> = None;
    let mut s_acc = 0.0;
    for (i, w) in centerline.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len = seg_len(a, b);
        let t = (((point[0] - a[0]) * ab[0] + (point[1] - a[1]) * ab[1]) / (len * len))
            .clamp(0.0, 1.0);
        let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
        let dist = seg_len(q, point);
        // Lateral component of (point - q) in the segment frame.
        let cross = (ab[0] * (point[1] - q[1]) - ab[1] * (point[0] - q[0])) / len;
        let cand = Projection {
            s: s_acc + t * len,
            d: if cross >= 0.0 { dist } else { -dist },
            seg_idx: i,
        };
        match &best {
            Some((bd, _)) if dist >= *bd => {}
            _ => best = Some((dist, cand)),
        }
        s_acc += len;
    }
    best.unwrap().1
}

/// Tangent direction (unit vector) of the polyline segment `seg_idx`.
fn segment_tangent(centerline: &[Point], seg_idx: usize) -> [f64; 2] {
    let a = centerline[seg_idx];
    let b = centerline[seg_idx + 1];
    let len = seg_len(a, b);
    [(b[0] - a[0]) / len, (b[1] - a[1]) / len]
}

/// Returns every lane passing the lateral and heading gates, sorted by
/// ascending |d|. Scores are `exp(-(2 d / width)^2)` normalized to sum to 1
/// over the candidates; they feed the edge-probability feature. An empty
/// result signals "off-road".
pub fn project_to_lanes(
    entity: &EntityState,
    map: &LaneMap,
    gates: &LaneGates,
) -> Vec<LaneAssignment> {
    let mut candidates = Vec::new();
    for lane in map.lanes() {
        let proj = arc_length_project(&lane.centerline, entity.position());
        let max_lateral = gates.max_lateral.unwrap_or(lane.width / 2.0 + 0.5);
        if proj.d.abs() > max_lateral {
            continue;
        }
        let tangent = segment_tangent(&lane.centerline, proj.seg_idx);
        let heading_diff = normalize_yaw(entity.yaw - tangent[1].atan2(tangent[0])).abs();
        if heading_diff > gates.max_heading {
            continue;
        }
        let score = (-(2.0 * proj.d / lane.width).powi(2)).exp();
        candidates.push(LaneAssignment {
            coord: FrenetCoord {
                lane_id: lane.lane_id.clone(),
                s: proj.s,
                d: proj.d,
            },
            score,
        });
    }
    let total: f64 = candidates.iter().map(|c| c.score).sum();
    for c in &mut candidates {
        c.score /= total;
    }
    candidates.sort_by(|a, b| a.coord.d.abs().total_cmp(&b.coord.d.abs()));
    candidates
}

/// Breadth-first search over successor relations from `start` to `target`.
/// Successors expand in lexicographic order, so the first chain found is the
/// hop-minimal one with the lexicographically smallest lane-id sequence.
/// Returns (hops, chain including both ends, summed length of interior lanes).
fn successor_chain(
    map: &LaneMap,
    start: &str,
    target: &str,
    max_hops: usize,
) -> Option<(usize, Vec<String>, f64)> {
    if start == target {
        return Some((0, vec![start.to_string()], 0.0));
    }
    let mut visited: BTreeSet<String> = BTreeSet::new();
    visited.insert(start.to_string());
    let mut queue: VecDeque<(String, usize, Vec<String>, f64)> = VecDeque::new();
    queue.push_back((start.to_string(), 0, vec![start.to_string()], 0.0));
    while let Some((lane_id, hops, chain, interior)) = queue.pop_front() {
        if hops == max_hops {
            continue;
        }
        let lane = map.get(&lane_id)?;
        let mut succ = lane.successors.clone();
        succ.sort();
        for next in succ {
            if next == target {
                let mut chain = chain.clone();
                chain.push(next);
                return Some((hops + 1, chain, interior));
            }
            if visited.insert(next.clone()) {
                let Some(next_lane) = map.get(&next) else {
                    continue;
                };
                let mut chain = chain.clone();
                chain.push(next.clone());
                queue.push_back((next, hops + 1, chain, interior + next_lane.total_length()));
            }
        }
    }
    None
}

/// Signed arc distance from `from` to `to` along successor chains.
///
/// Positive when `to` is reachable forward from `from` within `max_hops`
/// successor hops, negative when reachable in the reverse direction; the
/// chain with fewer hops wins, ties by lexicographic lane-id sequence.
/// `None` means the coordinates are not longitudinally related.
pub fn frenet_distance_along(
    map: &LaneMap,
    from: &FrenetCoord,
    to: &FrenetCoord,
    max_hops: usize,
) -> Option<f64> {
    let from_lane = map.get(&from.lane_id)?;
    let to_lane = map.get(&to.lane_id)?;
    if from.lane_id == to.lane_id {
        return Some(to.s - from.s);
    }
    let fwd = successor_chain(map, &from.lane_id, &to.lane_id, max_hops);
    let rev = successor_chain(map, &to.lane_id, &from.lane_id, max_hops);
    let use_forward = match (&fwd, &rev) {
        (Some((hf, cf, _)), Some((hr, cr, _))) => {
            if hf != hr {
                hf < hr
            } else {
                cf <= cr
            }
        }
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => return None,
    };
    if use_forward {
        let (_, _, interior) = fwd.unwrap();
        Some((from_lane.total_length() - from.s) + interior + to.s)
    } else {
        let (_, _, interior) = rev.unwrap();
        Some(-((to_lane.total_length() - to.s) + interior + from.s))
    }
}

fn cumulative_lengths(centerline: &[Point]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in centerline.windows(2) {
        acc.push(acc.last().unwrap() + seg_len(w[0], w[1]));
    }
    acc
}

/// Intersection of segments a0-a1 and b0-b1; returns (t, u) parameters in
/// [0, 1] on each segment. Parallel and collinear pairs yield `None`.
fn segment_intersection(a0: Point, a1: Point, b0: Point, b1: Point) -> Option<(f64, f64)> {
    let r = [a1[0] - a0[0], a1[1] - a0[1]];
    let s = [b1[0] - b0[0], b1[1] - b0[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = [b0[0] - a0[0], b0[1] - a0[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Conflict point between two distinct lanes as arc lengths on each.
///
/// Declared conflicts win; otherwise the first centerline intersection in
/// ascending (s_a, s_b); merging lanes (shared successor) conflict at their
/// end points. `None` when the lanes are unrelated.
pub fn lanes_conflict(a: &Lane, b: &Lane) -> Option<(f64, f64)> {
    debug_assert_ne!(a.lane_id, b.lane_id);
    for (id, s_self, s_other) in &a.conflicts {
        if id == &b.lane_id {
            return Some((*s_self, *s_other));
        }
    }
    for (id, s_self, s_other) in &b.conflicts {
        if id == &a.lane_id {
            return Some((*s_other, *s_self));
        }
    }
    let cum_a = cumulative_lengths(&a.centerline);
    let cum_b = cumulative_lengths(&b.centerline);
    let mut hits: Vec<(f64, f64)> = Vec::new();
    for (i, wa) in a.centerline.windows(2).enumerate() {
        for (j, wb) in b.centerline.windows(2).enumerate() {
            if let Some((t, u)) = segment_intersection(wa[0], wa[1], wb[0], wb[1]) {
                hits.push((
                    cum_a[i] + t * seg_len(wa[0], wa[1]),
                    cum_b[j] + u * seg_len(wb[0], wb[1]),
                ));
            }
        }
    }
    if let Some(first) = hits
        .into_iter()
        .min_by(|x, y| (x.0, x.1).partial_cmp(&(y.0, y.1)).unwrap())
    {
        return Some(first);
    }
    let shared_successor = a.successors.iter().any(|s| b.successors.contains(s));
    if shared_successor {
        return Some((a.total_length(), b.total_length()));
    }
    None
}

/// Walks `s` meters along the polyline and offsets `d` along the left
/// normal of the containing segment. Inverse of [`arc_length_project`] for
/// interior projections.
pub fn reconstruct(centerline: &[Point], s: f64, d: f64) -> Result<Point> {
    let cum = cumulative_lengths(centerline);
    let total = *cum.last().unwrap();
    if !(0.0..=total).contains(&s) {
        return Err(Error::contract(format!(
            "s={s} outside centerline arc length [0, {total}]"
        )));
    }
    let seg = match cum.iter().rposition(|&c| c <= s) {
        Some(i) if i + 1 < cum.len() => i,
        _ => centerline.len() - 2,
    };
    let a = centerline[seg];
    let b = centerline[seg + 1];
    let len = seg_len(a, b);
    let t = (s - cum[seg]) / len;
    let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let left = [-dir[1], dir[0]];
    Ok([
        a[0] + t * (b[0] - a[0]) + d * left[0],
        a[1] + t * (b[1] - a[1]) + d * left[1],
    ])
}
