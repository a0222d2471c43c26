//! Oriented 3D boxes and the affinity primitives used for association and
//! evaluation.
//!
//! Boxes rotate only about the vertical axis, so the intersection volume
//! factors into a bird's-eye-view polygon overlap times a vertical interval
//! overlap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box {field} must be positive and finite, got {value}")]
    NonPositiveDimension { field: &'static str, value: f64 },
    #[error("box {field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
}

/// Wraps an angle into `[-π, π)`.
///
/// Values already inside the interval are returned unchanged, so the
/// operation is idempotent bit-for-bit.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Oriented 3D bounding box. `yaw` rotates the length axis away from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
}

#[derive(Deserialize)]
struct RawBox {
    cx: f64,
    cy: f64,
    cz: f64,
    length: f64,
    width: f64,
    height: f64,
    yaw: f64,
}

impl<'de> Deserialize<'de> for Box3D {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawBox::deserialize(deserializer)?;
        Box3D::new([raw.cx, raw.cy, raw.cz], [raw.length, raw.width, raw.height], raw.yaw)
            .map_err(serde::de::Error::custom)
    }
}

impl Box3D {
    /// Builds a validated box; yaw is normalized here once.
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64) -> Result<Self, GeometryError> {
        for (field, value) in [("cx", center[0]), ("cy", center[1]), ("cz", center[2]), ("yaw", yaw)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { field, value });
            }
        }
        for (field, value) in [("length", dims[0]), ("width", dims[1]), ("height", dims[2])] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::NonPositiveDimension { field, value });
            }
        }
        Ok(Self {
            cx: center[0],
            cy: center[1],
            cz: center[2],
            length: dims[0],
            width: dims[1],
            height: dims[2],
            yaw: normalize_angle(yaw),
        })
    }

    pub fn center(&self) -> [f64; 3] {
        [self.cx, self.cy, self.cz]
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Footprint corners in counter-clockwise order.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
            .map(|(dx, dy)| [self.cx + c * dx - s * dy, self.cy + s * dx + c * dy])
    }

    fn z_range(&self) -> (f64, f64) {
        (self.cz - self.height / 2.0, self.cz + self.height / 2.0)
    }

    /// Same box rotated by `theta` about the vertical axis through the
    /// origin and then shifted by `offset`.
    pub fn transformed(&self, theta: f64, offset: [f64; 3]) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            cx: c * self.cx - s * self.cy + offset[0],
            cy: s * self.cx + c * self.cy + offset[1],
            cz: self.cz + offset[2],
            yaw: normalize_angle(self.yaw + theta),
            ..*self
        }
    }
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    (twice / 2.0).abs()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Sutherland-Hodgman clipping of `subject` by the convex CCW polygon `clip`.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let edge_a = clip[i];
        let edge_b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(edge_a, edge_b, cur) >= 0.0;
            let prev_in = cross(edge_a, edge_b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_intersection(prev, cur, edge_a, edge_b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_intersection(prev, cur, edge_a, edge_b));
            }
        }
    }
    output
}

fn segment_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Overlap area of the two footprints.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let clipped = clip_convex(&a.bev_corners(), &b.bev_corners());
    polygon_area(&clipped)
}

/// Volumetric IoU of two yaw-rotated boxes, in `[0, 1]`.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    if a == b {
        return 1.0;
    }
    let (a_lo, a_hi) = a.z_range();
    let (b_lo, b_hi) = b.z_range();
    let dz = a_hi.min(b_hi) - a_lo.max(b_lo);
    if dz <= 0.0 {
        return 0.0;
    }
    // footprints whose circumscribed circles are apart cannot overlap
    let reach_a = a.length.hypot(a.width) / 2.0;
    let reach_b = b.length.hypot(b.width) / 2.0;
    if center_distance_2d(a, b) >= reach_a + reach_b {
        return 0.0;
    }
    let area = bev_intersection_area(a, b);
    if area <= 0.0 {
        return 0.0;
    }
    let inter = area * dz;
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between box centers in the ground plane.
pub fn center_distance_2d(a: &Box3D, b: &Box3D) -> f64 {
    (a.cx - b.cx).hypot(a.cy - b.cy)
}

/// Which affinity drives association and evaluation matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMode {
    /// `1 - IoU`, allowed when IoU reaches the threshold.
    Iou3d,
    /// Center distance in meters, allowed up to the threshold.
    Center2d,
}

impl std::str::FromStr for MatchingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iou3d" => Ok(Self::Iou3d),
            "center2d" => Ok(Self::Center2d),
            other => Err(format!("unknown matching mode `{other}` (expected iou3d or center2d)")),
        }
    }
}

/// A matching mode together with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub mode: MatchingMode,
    pub threshold: f64,
}

impl Gate {
    pub fn new(mode: MatchingMode, threshold: f64) -> Self {
        Self { mode, threshold }
    }

    /// Association cost, `None` when the pair is gated out.
    pub fn cost(&self, a: &Box3D, b: &Box3D) -> Option<f64> {
        match self.mode {
            MatchingMode::Iou3d => {
                let iou = iou3d(a, b);
                (iou >= self.threshold).then_some(1.0 - iou)
            }
            MatchingMode::Center2d => {
                let d = center_distance_2d(a, b);
                (d <= self.threshold).then_some(d)
            }
        }
    }

    /// Twice as permissive: double the distance, half the IoU.
    pub fn widened(&self) -> Self {
        let threshold = match self.mode {
            MatchingMode::Iou3d => self.threshold / 2.0,
            MatchingMode::Center2d => self.threshold * 2.0,
        };
        Self { threshold, ..*self }
    }
}
