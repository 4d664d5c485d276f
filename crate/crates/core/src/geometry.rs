//! Screen-space boxes. Half-open real pixel coordinates, origin top-left.

use std::fmt;

use pw2ss_nn::Scalar;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox<S> {
    pub x_min: S,
    pub y_min: S,
    pub x_max: S,
    pub y_max: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvalidBox;

impl fmt::Display for InvalidBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("box has min > max or non-finite coordinates")
    }
}

impl std::error::Error for InvalidBox {}

impl<S: Scalar> BBox<S> {
    /// Panics on inverted or non-finite coordinates; see [`BBox::try_new`].
    pub fn new(x_min: S, y_min: S, x_max: S, y_max: S) -> Self {
        Self::try_new(x_min, y_min, x_max, y_max).expect("valid box")
    }

    pub fn try_new(x_min: S, y_min: S, x_max: S, y_max: S) -> Result<Self, InvalidBox> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min > x_max || y_min > y_max {
            return Err(InvalidBox);
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn from_array(a: [S; 4]) -> Result<Self, InvalidBox> {
        Self::try_new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [S; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> S {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> S {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> S {
        self.width() * self.height()
    }

    pub fn center(&self) -> (S, S) {
        let two = S::lit(2.0);
        ((self.x_min + self.x_max) / two, (self.y_min + self.y_max) / two)
    }

    /// Closed containment of a point.
    pub fn contains_point(&self, x: S, y: S) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.x_min >= self.x_min
            && other.y_min >= self.y_min
            && other.x_max <= self.x_max
            && other.y_max <= self.y_max
    }

    /// Overlap rectangle, `None` when the boxes do not overlap with positive area.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min < x_max && y_min < y_max).then_some(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    fn intersection_area(&self, other: &Self) -> S {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        w.max(S::zero()) * h.max(S::zero())
    }

    /// Clamps into `[0, width] x [0, height]`.
    pub fn clamp_to(&self, width: S, height: S) -> Self {
        let cx = |v: S| v.max(S::zero()).min(width);
        let cy = |v: S| v.max(S::zero()).min(height);
        Self {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    /// Clamps into another box (which may leave a degenerate box).
    pub fn clamp_within(&self, frame: &Self) -> Self {
        let cx = |v: S| v.max(frame.x_min).min(frame.x_max);
        let cy = |v: S| v.max(frame.y_min).min(frame.y_max);
        Self {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou<S: Scalar>(a: &BBox<S>, b: &BBox<S>) -> S {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= S::zero() {
        S::zero()
    } else {
        (inter / union).min(S::one())
    }
}

/// Whether the center of `pred` lies inside `gt`, boundary included.
pub fn center_hit<S: Scalar>(pred: &BBox<S>, gt: &BBox<S>) -> bool {
    let (cx, cy) = pred.center();
    gt.contains_point(cx, cy)
}

impl<S: Scalar + Serialize> Serialize for BBox<S> {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for BBox<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[S; 4]>::deserialize(d)?;
        Self::from_array(a).map_err(serde::de::Error::custom)
    }
}
