use serde::{Deserialize, Serialize};

/// Lengths are stored on a dyadic grid of 2^-16 m so that sums of
/// lengths, and differences such as a partially worked line, are exact in
/// `f64`.
pub const LENGTH_QUANTUM: f64 = 1.0 / 65536.0;

#[inline]
pub fn quantize(length: f64) -> f64 {
    (length / LENGTH_QUANTUM).round() * LENGTH_QUANTUM
}

#[inline]
pub fn quantize_down(length: f64) -> f64 {
    (length / LENGTH_QUANTUM).floor() * LENGTH_QUANTUM
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    pub fn offset(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn of(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Bounds { min: first, max: first }, |b, p| Bounds {
            min: Point::new(b.min.x.min(p.x), b.min.y.min(p.y)),
            max: Point::new(b.max.x.max(p.x), b.max.y.max(p.y)),
        }))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_sums_are_exact() {
        let a = quantize(123.456789);
        let b = quantize(0.1);
        let p = quantize_down(a * 0.37);
        assert_eq!((a - p) + p, a);
        assert_eq!((a + b) - b, a);
        assert!((a - 123.456789).abs() <= LENGTH_QUANTUM);
    }
}
