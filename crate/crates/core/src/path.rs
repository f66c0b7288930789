//! Continuous planar paths `γ: [0,1] → ℝ²` stored as polylines.
//!
//! The polyline itself is the path: a point inserted on a segment lies on it,
//! so refinement never changes the curve, only its resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub s: f64,
    pub p: PhasePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarPath {
    points: Vec<PathPoint>,
    /// Largest distance between consecutive samples.
    max_gap: f64,
}

fn path_err(msg: impl Into<String>) -> Error {
    Error::Path(msg.into())
}

impl PlanarPath {
    /// Build a path through `pts` parameterized by normalized chord length.
    pub fn from_points(pts: Vec<PhasePoint>) -> Result<Self> {
        if pts.is_empty() {
            return Err(path_err("empty path"));
        }
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(path_err("non-finite path sample"));
        }
        if pts.len() == 1 {
            return Ok(Self { points: vec![PathPoint { s: 0.0, p: pts[0] }], max_gap: 0.0 });
        }
        let mut acc = vec![0.0];
        for w in pts.windows(2) {
            let last = *acc.last().unwrap();
            acc.push(last + w[0].dist(&w[1]));
        }
        let total = *acc.last().unwrap();
        let n = pts.len() - 1;
        let mut points: Vec<PathPoint> = Vec::with_capacity(pts.len());
        for (i, p) in pts.into_iter().enumerate() {
            let s = if total > 0.0 { acc[i] / total } else { i as f64 / n as f64 };
            points.push(PathPoint { s, p });
        }
        // coincident consecutive samples would repeat a parameter
        points.dedup_by(|b, a| b.s <= a.s);
        points.last_mut().unwrap().s = 1.0;
        if points.len() == 1 {
            return Ok(Self { points, max_gap: 0.0 });
        }
        Self::from_parameterized(points)
    }

    /// Build a path from explicit parameter values.
    pub fn from_parameterized(points: Vec<PathPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(path_err("a parameterized path needs at least two samples"));
        }
        if points[0].s != 0.0 || points.last().unwrap().s != 1.0 {
            return Err(path_err("parameters must run from 0 to 1"));
        }
        if points.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(path_err("parameters must be strictly increasing"));
        }
        if points.iter().any(|q| !q.p.is_finite()) {
            return Err(path_err("non-finite path sample"));
        }
        let max_gap = points.windows(2).map(|w| w[0].p.dist(&w[1].p)).fold(0.0, f64::max);
        Ok(Self { points, max_gap })
    }

    /// Straight segment from `a` to `b`.
    pub fn segment(a: PhasePoint, b: PhasePoint) -> Result<Self> {
        Self::from_parameterized(vec![PathPoint { s: 0.0, p: a }, PathPoint { s: 1.0, p: b }])
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn max_gap(&self) -> f64 {
        self.max_gap
    }

    pub fn start(&self) -> PhasePoint {
        self.points[0].p
    }

    pub fn end(&self) -> PhasePoint {
        self.points.last().unwrap().p
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].p.dist(&w[1].p)).sum()
    }

    /// γ(s) by linear interpolation.
    pub fn at(&self, s: f64) -> PhasePoint {
        let pts = &self.points;
        if pts.len() == 1 || s <= 0.0 {
            return pts[0].p;
        }
        if s >= 1.0 {
            return pts.last().unwrap().p;
        }
        let i = pts.partition_point(|q| q.s <= s).max(1) - 1;
        let (a, b) = (pts[i], pts[i + 1]);
        a.p.lerp(&b.p, (s - a.s) / (b.s - a.s))
    }

    /// The restriction to `[s0, s1]`, reparameterized onto `[0, 1]`.
    pub fn sub_path(&self, s0: f64, s1: f64) -> Result<Self> {
        if !(0.0 <= s0 && s0 < s1 && s1 <= 1.0) {
            return Err(path_err(format!("invalid sub-path range [{s0}, {s1}]")));
        }
        let mut out = vec![PathPoint { s: 0.0, p: self.at(s0) }];
        for q in &self.points {
            if q.s > s0 && q.s < s1 {
                out.push(PathPoint { s: (q.s - s0) / (s1 - s0), p: q.p });
            }
        }
        out.push(PathPoint { s: 1.0, p: self.at(s1) });
        Self::from_parameterized(out)
    }

    pub fn reversed(&self) -> Self {
        if self.points.len() == 1 {
            return self.clone();
        }
        let points = self.points.iter().rev().map(|q| PathPoint { s: 1.0 - q.s, p: q.p }).collect();
        Self { points, max_gap: self.max_gap }
    }

    /// Insert samples until no segment is longer than `max_gap`.
    pub fn refined(&self, max_gap: f64) -> Self {
        if self.points.len() < 2 || !(max_gap > 0.0) {
            return self.clone();
        }
        let mut out = vec![self.points[0]];
        for w in self.points.windows(2) {
            let n = (w[0].p.dist(&w[1].p) / max_gap).ceil().max(1.0) as usize;
            for k in 1..=n {
                let t = k as f64 / n as f64;
                let s = if k == n { w[1].s } else { w[0].s + t * (w[1].s - w[0].s) };
                out.push(PathPoint { s, p: if k == n { w[1].p } else { w[0].p.lerp(&w[1].p, t) } });
            }
        }
        let max_gap = out.windows(2).map(|w| w[0].p.dist(&w[1].p)).fold(0.0, f64::max);
        Self { points: out, max_gap }
    }

    /// Refine until the images of consecutive samples under `map` are within
    /// `tol` of each other, or `max_points` is reached. Returns the refined
    /// path with the image of every sample.
    pub fn refined_for_map<M>(&self, map: M, tol: f64, max_points: usize) -> Result<(Self, Vec<PhasePoint>)>
    where
        M: FnMut(PhasePoint) -> Result<PhasePoint>,
    {
        self.refined_for_map_by(map, |a, b| a.dist(b) > tol, max_points)
    }

    /// [`refined_for_map`](Self::refined_for_map) with a custom split test on
    /// consecutive images.
    pub fn refined_for_map_by<M, S>(&self, mut map: M, split: S, max_points: usize) -> Result<(Self, Vec<PhasePoint>)>
    where
        M: FnMut(PhasePoint) -> Result<PhasePoint>,
        S: Fn(&PhasePoint, &PhasePoint) -> bool,
    {
        let mut pts = self.points.clone();
        let mut imgs = pts.iter().map(|q| map(q.p)).collect::<Result<Vec<_>>>()?;
        let min_ds = 1e-14;
        loop {
            let mut new_pts = Vec::with_capacity(pts.len() * 2);
            let mut new_imgs = Vec::with_capacity(pts.len() * 2);
            let mut changed = false;
            for i in 0..pts.len() {
                new_pts.push(pts[i]);
                new_imgs.push(imgs[i]);
                if i + 1 == pts.len() {
                    break;
                }
                let budget = new_pts.len() + (pts.len() - i) < max_points;
                if budget && split(&imgs[i], &imgs[i + 1]) && pts[i + 1].s - pts[i].s > min_ds {
                    let s = 0.5 * (pts[i].s + pts[i + 1].s);
                    let p = pts[i].p.lerp(&pts[i + 1].p, 0.5);
                    new_pts.push(PathPoint { s, p });
                    new_imgs.push(map(p)?);
                    changed = true;
                }
            }
            pts = new_pts;
            imgs = new_imgs;
            if !changed {
                break;
            }
        }
        let path = if pts.len() == 1 { Self { points: pts, max_gap: 0.0 } } else { Self::from_parameterized(pts)? };
        Ok((path, imgs))
    }

    /// Concatenate two paths whose end and start coincide (within `tol`).
    pub fn concat(&self, other: &Self, tol: f64) -> Result<Self> {
        if self.end().dist(&other.start()) > tol {
            return Err(path_err("paths do not join"));
        }
        let mut pts: Vec<PhasePoint> = self.points.iter().map(|q| q.p).collect();
        pts.extend(other.points.iter().skip(1).map(|q| q.p));
        Self::from_points(pts)
    }
}
