use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y);
        Rect { min, max }
    }

    pub fn centered(center: Point, side: f64) -> Self {
        let h = side / 2.0;
        Rect::new(
            Point::new(center.x - h, center.y - h),
            Point::new(center.x + h, center.y + h),
        )
    }

    pub fn centroid(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Quadrant index of `p`: bit 0 set for the upper x half, bit 1 for the
    /// upper y half. Points on a midline go to the upper half, so the four
    /// quadrants partition the rectangle.
    pub fn quadrant_index(&self, p: Point) -> u8 {
        let c = self.centroid();
        (p.x >= c.x) as u8 | (((p.y >= c.y) as u8) << 1)
    }

    pub fn quadrant(&self, idx: u8) -> Rect {
        let c = self.centroid();
        let (x0, x1) = if idx & 1 == 0 { (self.min.x, c.x) } else { (c.x, self.max.x) };
        let (y0, y1) = if idx & 2 == 0 { (self.min.y, c.y) } else { (c.y, self.max.y) };
        Rect::new(Point::new(x0, y0), Point::new(x1, y1))
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrants_partition() {
        let r = Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 10.0));
        for (p, q) in [
            (Point::new(1.0, 1.0), 0),
            (Point::new(9.0, 1.0), 1),
            (Point::new(1.0, 9.0), 2),
            (Point::new(5.0, 5.0), 3),
        ] {
            assert_eq!(r.quadrant_index(p), q);
            assert!(r.quadrant(q).contains(p));
        }
        assert_eq!(r.quadrant(3).centroid(), Point::new(7.5, 7.5));
    }
}
