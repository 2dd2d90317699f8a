//! Convex corridors, body vertices and route checks.

use std::f64::consts::PI;

use crate::vehicle::{BodyRect, State, VehicleParams};
use crate::CoreError;

/// `a x + b y + c <= 0` with `(a, b)` a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfplane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Halfplane {
    /// Scales the coefficients so the normal has unit length.
    pub fn normalized(a: f64, b: f64, c: f64) -> Option<Self> {
        let n = a.hypot(b);
        (n > 1e-12 && n.is_finite() && c.is_finite()).then(|| Self {
            a: a / n,
            b: b / n,
            c: c / n,
        })
    }

    pub fn residual(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    /// Straight vehicle (`θ0 = θ1`) with the trailer axle at this pose.
    pub fn to_state(self) -> State {
        State::new(self.x, self.y, self.theta, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    halfplanes: Vec<Halfplane>,
    waypoint: Pose,
}

impl Corridor {
    /// Normalizes the halfplanes and checks that the region is bounded,
    /// nonempty and strictly contains the waypoint.
    pub fn new(halfplanes: &[Halfplane], waypoint: Pose) -> Result<Self, CoreError> {
        if halfplanes.len() < 3 {
            return Err(CoreError::InvalidCorridor(format!(
                "needs at least 3 halfplanes, got {}",
                halfplanes.len()
            )));
        }
        let halfplanes = halfplanes
            .iter()
            .map(|h| {
                Halfplane::normalized(h.a, h.b, h.c)
                    .ok_or_else(|| CoreError::InvalidCorridor("degenerate halfplane normal".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let corridor = Self {
            halfplanes,
            waypoint,
        };
        let poly = corridor.polygon();
        if poly.len() < 3 || polygon_area(&poly) <= 1e-12 {
            return Err(CoreError::InvalidCorridor("empty interior".into()));
        }
        if poly
            .iter()
            .any(|p| p[0].abs() >= UNBOUNDED * 0.5 || p[1].abs() >= UNBOUNDED * 0.5)
        {
            return Err(CoreError::InvalidCorridor("unbounded region".into()));
        }
        if corridor.max_residual(waypoint.x, waypoint.y) >= 0.0 {
            return Err(CoreError::InvalidCorridor(
                "waypoint not strictly inside".into(),
            ));
        }
        Ok(corridor)
    }

    pub fn halfplanes(&self) -> &[Halfplane] {
        &self.halfplanes
    }

    pub fn waypoint(&self) -> Pose {
        self.waypoint
    }

    pub fn max_residual(&self, x: f64, y: f64) -> f64 {
        self.halfplanes
            .iter()
            .map(|h| h.residual(x, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertices of the corridor polygon, counterclockwise.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        let big = [
            [-UNBOUNDED, -UNBOUNDED],
            [UNBOUNDED, -UNBOUNDED],
            [UNBOUNDED, UNBOUNDED],
            [-UNBOUNDED, UNBOUNDED],
        ];
        clip_polygon(big.to_vec(), &self.halfplanes)
    }
}

const UNBOUNDED: f64 = 1e6;

/// Rectangle of `size = (length, width)` centered at `center`, rotated by
/// `heading`. The waypoint is the center with that heading.
pub fn corridor_from_rect(
    center: [f64; 2],
    size: [f64; 2],
    heading: f64,
) -> Result<Corridor, CoreError> {
    if !(size[0] > 0.0 && size[1] > 0.0) {
        return Err(CoreError::InvalidCorridor(
            "rectangle size must be positive".into(),
        ));
    }
    let (c, s) = (heading.cos(), heading.sin());
    let mut hps = Vec::with_capacity(4);
    for (n, half) in [
        ([c, s], size[0] / 2.0),
        ([-s, c], size[1] / 2.0),
        ([-c, -s], size[0] / 2.0),
        ([s, -c], size[1] / 2.0),
    ] {
        hps.push(Halfplane {
            a: n[0],
            b: n[1],
            c: -(n[0] * center[0] + n[1] * center[1]) - half,
        });
    }
    Corridor::new(&hps, Pose::new(center[0], center[1], heading))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub corridors: Vec<Corridor>,
    pub terminal: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Body {
    Truck,
    Trailer,
}

impl Body {
    pub const BOTH: [Body; 2] = [Body::Truck, Body::Trailer];
}

/// Body corners in homogeneous coordinates, counterclockwise starting at the
/// front-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexSet {
    pub corners: [[f64; 3]; 4],
}

impl VertexSet {
    pub fn xy(&self, i: usize) -> (f64, f64) {
        (self.corners[i][0], self.corners[i][1])
    }
}

/// Axle center and heading of one body.
pub fn body_frame(x: &State, p: &VehicleParams, which: Body) -> (f64, f64, f64) {
    match which {
        Body::Trailer => (x.px1, x.py1, x.theta1),
        Body::Truck => (
            x.px1 + p.l1 * x.theta1.cos() + p.m0 * x.theta0.cos(),
            x.py1 + p.l1 * x.theta1.sin() + p.m0 * x.theta0.sin(),
            x.theta0,
        ),
    }
}

pub fn body_rect(p: &VehicleParams, which: Body) -> &BodyRect {
    match which {
        Body::Truck => &p.truck_body,
        Body::Trailer => &p.trailer_body,
    }
}

/// Corner offsets `(lx, ly)` in the body frame, counterclockwise.
pub fn corner_offsets(r: &BodyRect) -> [(f64, f64); 4] {
    [
        (r.length_front, r.half_width),
        (-r.length_rear, r.half_width),
        (-r.length_rear, -r.half_width),
        (r.length_front, -r.half_width),
    ]
}

pub fn vehicle_vertices(x: &State, p: &VehicleParams, which: Body) -> VertexSet {
    let (cx, cy, th) = body_frame(x, p, which);
    let (c, s) = (th.cos(), th.sin());
    let offs = corner_offsets(body_rect(p, which));
    VertexSet {
        corners: offs.map(|(lx, ly)| [cx + c * lx - s * ly, cy + s * lx + c * ly, 1.0]),
    }
}

/// Entry `[i][j]`: signed distance of corner `j` from halfplane `i`.
pub fn halfplane_residuals(c: &Corridor, v: &VertexSet) -> Vec<[f64; 4]> {
    c.halfplanes
        .iter()
        .map(|h| {
            std::array::from_fn(|j| {
                h.a * v.corners[j][0] + h.b * v.corners[j][1] + h.c * v.corners[j][2]
            })
        })
        .collect()
}

pub fn max_residual(c: &Corridor, v: &VertexSet) -> f64 {
    halfplane_residuals(c, v)
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn contains(c: &Corridor, v: &VertexSet, margin: f64) -> bool {
    max_residual(c, v) <= -margin
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteViolation {
    EmptyRoute,
    NoOverlap { first: usize },
    OverlapTooSmall { first: usize, body: Body },
    TerminalOutside,
}

impl std::fmt::Display for RouteViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RouteViolation::EmptyRoute => write!(f, "route has no corridors"),
            RouteViolation::NoOverlap { first } => {
                write!(f, "no overlap between corridors {first} and {}", first + 1)
            }
            RouteViolation::OverlapTooSmall { first, body } => write!(
                f,
                "overlap of corridors {first} and {} cannot hold the {body:?}",
                first + 1
            ),
            RouteViolation::TerminalOutside => write!(f, "terminal pose outside the last corridor"),
        }
    }
}

/// Overlap of consecutive corridors must be nonempty and able to hold each
/// body on its own; the terminal pose must lie in the last corridor.
pub fn validate_route(r: &Route, p: &VehicleParams) -> Vec<RouteViolation> {
    let mut out = Vec::new();
    if r.corridors.is_empty() {
        out.push(RouteViolation::EmptyRoute);
        return out;
    }
    for (i, w) in r.corridors.windows(2).enumerate() {
        let overlap = clip_polygon(w[0].polygon(), w[1].halfplanes());
        if overlap.len() < 3 || polygon_area(&overlap) <= 1e-12 {
            out.push(RouteViolation::NoOverlap { first: i });
            continue;
        }
        let hps: Vec<Halfplane> = w[0]
            .halfplanes()
            .iter()
            .chain(w[1].halfplanes())
            .copied()
            .collect();
        for body in Body::BOTH {
            let r = body_rect(p, body);
            if !rect_fits(&hps, &overlap, r.length(), r.width()) {
                out.push(RouteViolation::OverlapTooSmall { first: i, body });
            }
        }
    }
    let last = r.corridors.last().expect("nonempty");
    for body in Body::BOTH {
        if !contains(last, &vehicle_vertices(&r.terminal, p, body), 0.0) {
            out.push(RouteViolation::TerminalOutside);
            break;
        }
    }
    out
}

/// Whether a `length × width` rectangle fits in the convex region, trying
/// orientations aligned with the region's edges and a coarse angle sweep.
fn rect_fits(hps: &[Halfplane], poly: &[[f64; 2]], length: f64, width: f64) -> bool {
    let mut angles: Vec<f64> = (0..36).map(|k| k as f64 * PI / 36.0).collect();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        angles.push((b[1] - a[1]).atan2(b[0] - a[0]));
    }
    angles.into_iter().any(|th| {
        let (c, s) = (th.cos(), th.sin());
        let offs = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)].map(|(fx, fy)| {
            (
                c * fx * length - s * fy * width,
                s * fx * length + c * fy * width,
            )
        });
        // feasible centers: every halfplane shrunk by its worst corner
        let shrunk: Vec<Halfplane> = hps
            .iter()
            .map(|h| {
                let worst = offs
                    .iter()
                    .map(|(ox, oy)| h.a * ox + h.b * oy)
                    .fold(f64::NEG_INFINITY, f64::max);
                Halfplane {
                    a: h.a,
                    b: h.b,
                    c: h.c + worst,
                }
            })
            .collect();
        !clip_polygon(poly.to_vec(), &shrunk).is_empty()
    })
}

/// Sutherland-Hodgman clipping of a convex polygon by halfplanes.
pub fn clip_polygon(mut poly: Vec<[f64; 2]>, hps: &[Halfplane]) -> Vec<[f64; 2]> {
    for h in hps {
        if poly.is_empty() {
            break;
        }
        let mut out = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let rp = h.residual(p[0], p[1]);
            let rq = h.residual(q[0], q[1]);
            if rp <= 0.0 {
                out.push(p);
            }
            if (rp < 0.0 && rq > 0.0) || (rp > 0.0 && rq < 0.0) {
                let t = rp / (rp - rq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        poly = out;
    }
    poly
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}
