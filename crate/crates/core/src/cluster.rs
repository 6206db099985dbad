//! Polar clustering of thresholded phase-space points.
//!
//! A point carries a position `x`, the radius `a = |v|` and angle `theta` of
//! its wave-vector, and a mass. Two points are adjacent when
//! `|x_p - x_q| <= d0`, `|a_p - a_q| <= R0` and the circular angle
//! difference is at most `theta0`; clusters are the connected components of
//! that relation.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsctError};
use crate::synchro::SqueezeField;
use crate::tiling::angular_distance;

/// A thresholded squeeze cell seen as a point in phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: [f64; 2],
    pub a: f64,
    pub theta: f64,
    pub mass: f64,
    /// Flat position index and cell index of the squeeze entry.
    pub origin: (usize, [i64; 2]),
}

impl PhasePoint {
    /// Point for wave-vector `v` at position `x`; `theta` is folded into `[0, 2 pi)`.
    pub fn from_vector(x: [f64; 2], v: [f64; 2], mass: f64, origin: (usize, [i64; 2])) -> Self {
        Self {
            x,
            a: v[0].hypot(v[1]),
            theta: normalize_angle(v[1].atan2(v[0])),
            mass,
            origin,
        }
    }
}

fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Thresholds `(d0, theta0, R0)` of the adjacency relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyParams {
    pub d0: f64,
    pub theta0: f64,
    pub r0: f64,
}

impl Default for AdjacencyParams {
    fn default() -> Self {
        Self {
            d0: 0.05,
            theta0: PI / 8.0,
            r0: 16.0,
        }
    }
}

impl AdjacencyParams {
    pub fn new(d0: f64, theta0: f64, r0: f64) -> Result<Self> {
        let p = Self { d0, theta0, r0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d0", self.d0), ("theta0", self.theta0), ("R0", self.r0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SsctError::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Inclusive polar adjacency; spatial distance is Euclidean and not periodic.
pub fn adjacent(p: &PhasePoint, q: &PhasePoint, params: &AdjacencyParams) -> bool {
    let dx = (p.x[0] - q.x[0]).hypot(p.x[1] - q.x[1]);
    dx <= params.d0
        && (p.a - q.a).abs() <= params.r0
        && angular_distance(p.theta, q.theta) <= params.theta0
}

/// Aggregate description of one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSummary {
    pub id: usize,
    pub total_mass: f64,
    /// Mass-weighted mean position.
    pub centroid_x: [f64; 2],
    pub centroid_a: f64,
    /// Mass-weighted circular mean angle in `[0, 2 pi)`.
    pub centroid_theta: f64,
    pub point_count: usize,
}

/// Partition of a point list into clusters with ids `1..=K`, ordered by
/// descending total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    labels: Vec<usize>,
    summaries: Vec<ClusterSummary>,
}

impl Clustering {
    pub fn empty() -> Self {
        Self {
            labels: Vec::new(),
            summaries: Vec::new(),
        }
    }

    /// Cluster id (1-based) of each input point.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.summaries.len()
    }

    pub fn summaries(&self) -> &[ClusterSummary] {
        &self.summaries
    }

    /// CSV `cluster_id,total_mass,centroid_a,centroid_theta,point_count`.
    pub fn write_report(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "cluster_id,total_mass,centroid_a,centroid_theta,point_count"
        )?;
        for s in &self.summaries {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{}",
                s.id, s.total_mass, s.centroid_a, s.centroid_theta, s.point_count
            )?;
        }
        Ok(())
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, i: usize, j: usize) {
        let (a, b) = (self.find(i), self.find(j));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            Ordering::Less => self.parent[a] = b,
            Ordering::Greater => self.parent[b] = a,
            Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
    }
}

fn point_cmp(p: &PhasePoint, q: &PhasePoint) -> Ordering {
    p.x[0]
        .total_cmp(&q.x[0])
        .then(p.x[1].total_cmp(&q.x[1]))
        .then(p.a.total_cmp(&q.a))
        .then(p.theta.total_cmp(&q.theta))
        .then(p.mass.total_cmp(&q.mass))
        .then(p.origin.cmp(&q.origin))
}

// Slightly coarser than the thresholds so that inclusive boundary pairs
// never land two buckets apart through rounding.
const BUCKET_SLACK: f64 = 1.0 + 1e-6;

fn bucket(v: f64, pitch: f64) -> i64 {
    (v / pitch).floor() as i64
}

/// Connected components of the adjacency graph.
///
/// Candidate pairs come from a bucket grid on `(x1, x2, a)` with pitches
/// `(d0, d0, R0)`; only neighbouring buckets are compared.
pub fn polar_cluster(points: &[PhasePoint], params: &AdjacencyParams) -> Result<Clustering> {
    params.validate()?;
    if points.is_empty() {
        return Ok(Clustering::empty());
    }
    let n = points.len();
    // Canonical order makes every floating-point sum independent of the
    // input permutation.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| point_cmp(&points[i], &points[j]));

    let pd = params.d0 * BUCKET_SLACK;
    let pr = params.r0 * BUCKET_SLACK;
    let key = |p: &PhasePoint| [bucket(p.x[0], pd), bucket(p.x[1], pd), bucket(p.a, pr)];
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (rank, &i) in order.iter().enumerate() {
        buckets.entry(key(&points[i])).or_default().push(rank);
    }

    let mut uf = UnionFind::new(n);
    for (rank, &i) in order.iter().enumerate() {
        let p = &points[i];
        let k = key(p);
        for d0 in -1..=1 {
            for d1 in -1..=1 {
                for d2 in -1..=1 {
                    let nk = [
                        k[0].saturating_add(d0),
                        k[1].saturating_add(d1),
                        k[2].saturating_add(d2),
                    ];
                    let Some(list) = buckets.get(&nk) else {
                        continue;
                    };
                    for &other in list {
                        if other > rank && adjacent(p, &points[order[other]], params) {
                            uf.union(rank, other);
                        }
                    }
                }
            }
        }
    }

    // Members of each component, in canonical order.
    let mut comp_of_root: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (rank, &idx) in order.iter().enumerate() {
        let root = uf.find(rank);
        let c = *comp_of_root.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[c].push(idx);
    }

    let mut summaries: Vec<(ClusterSummary, Vec<usize>)> = members
        .into_iter()
        .map(|m| (summarize(points, &m), m))
        .collect();
    summaries.sort_by(|(a, _), (b, _)| {
        b.total_mass
            .total_cmp(&a.total_mass)
            .then(a.centroid_x[0].total_cmp(&b.centroid_x[0]))
            .then(a.centroid_x[1].total_cmp(&b.centroid_x[1]))
            .then(a.centroid_a.total_cmp(&b.centroid_a))
            .then(a.centroid_theta.total_cmp(&b.centroid_theta))
            .then(a.point_count.cmp(&b.point_count))
    });

    let mut labels = vec![0; n];
    let summaries = summaries
        .into_iter()
        .enumerate()
        .map(|(k, (mut s, m))| {
            s.id = k + 1;
            for i in m {
                labels[i] = k + 1;
            }
            s
        })
        .collect();
    Ok(Clustering { labels, summaries })
}

fn summarize(points: &[PhasePoint], members: &[usize]) -> ClusterSummary {
    let mut mass = 0.0;
    let (mut x0, mut x1, mut a, mut s, mut c) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in members {
        let p = &points[i];
        mass += p.mass;
        x0 += p.mass * p.x[0];
        x1 += p.mass * p.x[1];
        a += p.mass * p.a;
        s += p.mass * p.theta.sin();
        c += p.mass * p.theta.cos();
    }
    let norm = if mass > 0.0 { 1.0 / mass } else { 0.0 };
    ClusterSummary {
        id: 0,
        total_mass: mass,
        centroid_x: [x0 * norm, x1 * norm],
        centroid_a: a * norm,
        centroid_theta: normalize_angle(s.atan2(c)),
        point_count: members.len(),
    }
}

/// Phase points of all squeeze cells with mass at least `delta`, positioned
/// at `b` and located at their cell centers.
pub fn phase_points(sq: &SqueezeField, delta: f64) -> Vec<PhasePoint> {
    let lb = sq.lb();
    sq.iter()
        .filter(|(_, c)| c.mass >= delta)
        .map(|(b, c)| {
            let x = [(b / lb) as f64 / lb as f64, (b % lb) as f64 / lb as f64];
            PhasePoint::from_vector(x, sq.cell_center(c.n), c.mass, (b, c.n))
        })
        .collect()
}

/// Points and their labels from the two-stage clustering.
#[derive(Debug, Clone)]
pub struct PhaseClustering {
    pub points: Vec<PhasePoint>,
    pub clustering: Clustering,
}

/// Two-stage clustering of the thresholded squeeze field.
///
/// Stage one clusters the `(a, theta)` points at each position separately and
/// collapses every local group into one point at its mass-weighted mean
/// radius and circular mean angle, carrying the group's mass. Stage two runs
/// [`polar_cluster`] on the collapsed points; labels then propagate back to
/// every original point. Cluster summaries are recomputed on the original
/// points.
pub fn reduce_then_cluster(
    sq: &SqueezeField,
    delta: f64,
    params: &AdjacencyParams,
) -> Result<PhaseClustering> {
    params.validate()?;
    if !(delta >= 0.0) {
        return Err(SsctError::Config(format!(
            "mass threshold {delta} must be nonnegative"
        )));
    }
    let points = phase_points(sq, delta);
    if points.is_empty() {
        return Ok(PhaseClustering {
            points,
            clustering: Clustering::empty(),
        });
    }
    // Points are produced in position order; split them into per-b runs.
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        if i == points.len() || points[i].origin.0 != points[start].origin.0 {
            runs.push(start..i);
            start = i;
        }
    }

    let local: Vec<(Vec<PhasePoint>, Vec<usize>)> = runs
        .par_iter()
        .map(|r| {
            let group = &points[r.clone()];
            let c = polar_cluster(group, params).expect("validated parameters");
            let reduced = c
                .summaries()
                .iter()
                .map(|s| PhasePoint {
                    x: group[0].x,
                    a: s.centroid_a,
                    theta: s.centroid_theta,
                    mass: s.total_mass,
                    origin: (group[0].origin.0, [s.id as i64, 0]),
                })
                .collect();
            (reduced, c.labels().to_vec())
        })
        .collect();

    let mut reduced = Vec::new();
    let mut reduced_of_point = Vec::with_capacity(points.len());
    for (pts, labels) in &local {
        let base = reduced.len();
        reduced.extend_from_slice(pts);
        reduced_of_point.extend(labels.iter().map(|&l| base + l - 1));
    }
    let stage2 = polar_cluster(&reduced, params)?;
    let labels: Vec<usize> = reduced_of_point
        .iter()
        .map(|&r| stage2.labels()[r])
        .collect();

    let mut members = vec![Vec::new(); stage2.k()];
    for (i, &l) in labels.iter().enumerate() {
        members[l - 1].push(i);
    }
    let summaries = members
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut s = summarize(&points, m);
            s.id = k + 1;
            s
        })
        .collect();
    Ok(PhaseClustering {
        points,
        clustering: Clustering { labels, summaries },
    })
}
