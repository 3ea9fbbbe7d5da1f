//! Polygon primitives in pixel coordinates (x = column, y = row, y grows
//! downward). Detection and ground-truth regions are quadrilaterals; overlap
//! is computed by convex clipping.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
}

/// Shoelace sum / 2. Positive for screen-clockwise vertex order
/// (top-left, top-right, bottom-right, bottom-left) in y-down coordinates.
pub fn polygon_area_signed(pts: &[Vec2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn polygon_area(pts: &[Vec2]) -> f64 {
    polygon_area_signed(pts).abs()
}

fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain. Returns the hull with positive signed area
/// (collinear points dropped); fewer than 3 distinct non-collinear points
/// yield the degenerate hull of what remains.
pub fn convex_hull(pts: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = pts.to_vec();
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn ensure_positive_orientation(pts: &mut Vec<Vec2>) {
    if polygon_area_signed(pts) < 0.0 {
        pts.reverse();
    }
}

/// Sutherland-Hodgman: clips `subject` against each edge of the convex
/// polygon `clip`. Both in any orientation; the result keeps the side of each
/// clip edge that contains the clip polygon's interior.
pub fn clip_polygon(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    if subject.is_empty() || clip.len() < 3 {
        return Vec::new();
    }
    let mut clip = clip.to_vec();
    ensure_positive_orientation(&mut clip);
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            return out;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut out);
        // Positive orientation means the interior is on the positive-cross
        // side of each directed edge.
        let side = |p: Vec2| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        for j in 0..input.len() {
            let cur = input[j];
            let next = input[(j + 1) % input.len()];
            let sc = side(cur);
            let sn = side(next);
            let cur_in = sc >= 0.0;
            let next_in = sn >= 0.0;
            if cur_in {
                out.push(cur);
            }
            if cur_in != next_in {
                let denom = sc - sn;
                if denom.abs() > f64::EPSILON {
                    let t = sc / denom;
                    out.push(Vec2::new(
                        cur.x + (next.x - cur.x) * t,
                        cur.y + (next.y - cur.y) * t,
                    ));
                }
            }
        }
    }
    out
}

/// Area of the intersection of two convex polygons.
pub fn intersection_area(a: &[Vec2], b: &[Vec2]) -> f64 {
    polygon_area(&clip_polygon(a, b))
}

/// Boundary-inclusive point-in-polygon test for simple polygons.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    // On-edge counts as inside.
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let c = cross(a, b, p);
        if c == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
        {
            return true;
        }
    }
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let x_at = pi.x + (p.y - pi.y) / (pj.y - pi.y) * (pj.x - pi.x);
            if p.x < x_at {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Minimum-area enclosing rectangle of a point set, by rotating calipers over
/// the convex hull edges. Vertices come back screen-clockwise starting from
/// the topmost (then leftmost) corner.
pub fn min_area_rect(pts: &[Vec2]) -> [Vec2; 4] {
    let hull = convex_hull(pts);
    if hull.is_empty() {
        return [Vec2::default(); 4];
    }
    if hull.len() < 3 {
        // Degenerate: axis-aligned bounds of the surviving points.
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &hull {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        return order_rect([
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ]);
    }

    let mut best_area = f64::MAX;
    let mut best = [Vec2::default(); 4];
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        if len == 0.0 {
            continue;
        }
        let d = Vec2::new((b.x - a.x) / len, (b.y - a.y) / len);
        let n = Vec2::new(-d.y, d.x);
        let (mut d0, mut d1, mut n0, mut n1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &hull {
            let pd = p.x * d.x + p.y * d.y;
            let pn = p.x * n.x + p.y * n.y;
            d0 = d0.min(pd);
            d1 = d1.max(pd);
            n0 = n0.min(pn);
            n1 = n1.max(pn);
        }
        let area = (d1 - d0) * (n1 - n0);
        if area < best_area {
            best_area = area;
            let corner = |pd: f64, pn: f64| {
                Vec2::new(pd * d.x + pn * n.x, pd * d.y + pn * n.y)
            };
            best = [
                corner(d0, n0),
                corner(d1, n0),
                corner(d1, n1),
                corner(d0, n1),
            ];
        }
    }
    order_rect(best)
}

/// Rotates a rectangle's vertex cycle to start at the topmost (then leftmost)
/// corner, oriented screen-clockwise.
fn order_rect(mut rect: [Vec2; 4]) -> [Vec2; 4] {
    if polygon_area_signed(&rect) < 0.0 {
        rect.reverse();
    }
    let start = (0..4)
        .min_by(|&i, &j| {
            (rect[i].y, rect[i].x)
                .partial_cmp(&(rect[j].y, rect[j].x))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    [
        rect[start],
        rect[(start + 1) % 4],
        rect[(start + 2) % 4],
        rect[(start + 3) % 4],
    ]
}

/// A 4-vertex text region, optionally carrying a transcription. `dont_care`
/// marks ground-truth regions excluded from scoring (the `###` convention).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadBox {
    pub verts: [Vec2; 4],
    pub transcription: Option<String>,
    pub dont_care: bool,
}

impl QuadBox {
    pub fn new(verts: [Vec2; 4]) -> Self {
        QuadBox {
            verts,
            transcription: None,
            dont_care: false,
        }
    }

    /// Axis-aligned rectangle, vertices clockwise from the top-left.
    pub fn from_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        QuadBox::new([
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.transcription = Some(text.to_string());
        self
    }

    pub fn with_dont_care(mut self, dc: bool) -> Self {
        self.dont_care = dc;
        self
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.verts)
    }

    pub fn is_convex(&self) -> bool {
        let v = &self.verts;
        let mut sign = 0i8;
        for i in 0..4 {
            let c = cross(v[i], v[(i + 1) % 4], v[(i + 2) % 4]);
            if c != 0.0 {
                let s = if c > 0.0 { 1 } else { -1 };
                if sign == 0 {
                    sign = s;
                } else if sign != s {
                    return false;
                }
            }
        }
        true
    }

    /// The convex hull of the four vertices (equals the quad when convex).
    pub fn hull(&self) -> Vec<Vec2> {
        convex_hull(&self.verts)
    }

    /// `(x0, y0, x1, y1)` bounds.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let xs = self.verts.iter().map(|v| v.x);
        let ys = self.verts.iter().map(|v| v.y);
        (
            xs.clone().fold(f64::MAX, f64::min),
            ys.clone().fold(f64::MAX, f64::min),
            xs.fold(f64::MIN, f64::max),
            ys.fold(f64::MIN, f64::max),
        )
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        point_in_polygon(p, &self.verts)
    }
}

/// Intersection-over-union of two quads. Non-convex quads are replaced by
/// their convex hulls. A zero-area union yields 0.
pub fn polygon_iou(a: &QuadBox, b: &QuadBox) -> f64 {
    let (ha, hb) = (a.hull(), b.hull());
    let inter = intersection_area(&ha, &hb);
    let union = polygon_area(&ha) + polygon_area(&hb) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Fraction of `det`'s own area that overlaps `other` (the don't-care test).
/// Zero-area detections overlap nothing.
pub fn intersection_over_self(det: &QuadBox, other: &QuadBox) -> f64 {
    let area = det.area();
    if area <= 0.0 {
        return 0.0;
    }
    intersection_area(&det.hull(), &other.hull()) / area
}

pub fn validate_simple_quad(q: &QuadBox) -> Result<()> {
    if q.verts.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::InvalidInput("non-finite quad vertex".into()));
    }
    Ok(())
}
