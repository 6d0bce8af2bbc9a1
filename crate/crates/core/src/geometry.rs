//! Axis-aligned bounding boxes and intersection-over-union.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box in pixel coordinates, origin top-left, corners
/// ordered so that `x2 > x1` and `y2 > y1`.
///
/// Serialized as a 4-element array `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from(v: [f64; 4]) -> Self {
        BoundingBox {
            x1: v[0],
            y1: v[1],
            x2: v[2],
            y2: v[3],
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BoundingBox { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Checks the ingest invariants: finite, non-negative coordinates and
    /// strictly positive extent on both axes.
    pub fn validate(&self) -> Result<()> {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::schema(format!("non-finite box coordinate: {self:?}")));
        }
        if coords.iter().any(|c| *c < 0.0) {
            return Err(Error::schema(format!("negative box coordinate: {self:?}")));
        }
        if self.x2 <= self.x1 || self.y2 <= self.y1 {
            return Err(Error::schema(format!("degenerate box (zero or negative area): {self:?}")));
        }
        Ok(())
    }

    /// Clamps the box to `[0, width] x [0, height]`. Returns a schema error
    /// if clamping empties the box.
    pub fn clamp_to(&self, width: f64, height: f64) -> Result<BoundingBox> {
        let clamped = BoundingBox {
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
            x2: self.x2.clamp(0.0, width),
            y2: self.y2.clamp(0.0, height),
        };
        if clamped.x2 <= clamped.x1 || clamped.y2 <= clamped.y1 {
            return Err(Error::schema(format!(
                "box {self:?} lies outside the {width}x{height} image after clamping"
            )));
        }
        Ok(clamped)
    }

    /// Sorts each coordinate pair so that x1 <= x2 and y1 <= y2. Used by the
    /// external converter; canonical files must already be ordered.
    pub fn normalized_corners(&self) -> BoundingBox {
        BoundingBox {
            x1: self.x1.min(self.x2),
            y1: self.y1.min(self.y2),
            x2: self.x1.max(self.x2),
            y2: self.y1.max(self.y2),
        }
    }
}

/// Intersection over union of two valid boxes, in `[0, 1]`.
///
/// Symmetric, 0 for disjoint boxes, exactly 1.0 for identical boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}
