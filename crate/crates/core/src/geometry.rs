//! Analytic closed boundary curves, uniform node sets and the cavity presets.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Base shape of a boundary before dilation and translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `1.5 (cos^10 t + sin^10 t)^(1/10) (cos t, sin t)`
    RoundedRectangle,
    /// `factor (1 + amplitude cos 3t) (cos t, sin t)`
    Pear {
        factor: f64,
        amplitude: f64,
    },
    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`
    Kite,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Circle { .. } => "circle",
            Shape::Ellipse { .. } => "ellipse",
            Shape::RoundedRectangle => "rounded_rectangle",
            Shape::Pear { .. } => "pear",
            Shape::Kite => "kite",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Shape::Circle { radius } => vec![radius],
            Shape::Ellipse { a, b } => vec![a, b],
            Shape::Pear { factor, amplitude } => vec![factor, amplitude],
            Shape::RoundedRectangle | Shape::Kite => vec![],
        }
    }

    /// Position, first and second derivative of the unscaled curve.
    fn eval(&self, t: f64) -> [Point; 3] {
        let (s, c) = t.sin_cos();
        match *self {
            Shape::Circle { radius } => radial(radius, 0.0, 0.0, s, c),
            Shape::Ellipse { a, b } => [[a * c, b * s], [-a * s, b * c], [-a * c, -b * s]],
            Shape::RoundedRectangle => {
                let (c2, s2) = (c * c, s * s);
                let (c8, s8) = (c2 * c2 * c2 * c2, s2 * s2 * s2 * s2);
                let f = c8 * c2 + s8 * s2;
                let g = s8 * s * c - c8 * c * s;
                let dg = 9.0 * s8 * c2 - s8 * s2 + 9.0 * c8 * s2 - c8 * c2;
                let rho = f.powf(0.1);
                let d1 = g * f.powf(-0.9);
                let d2 = dg * f.powf(-0.9) - 9.0 * g * g * f.powf(-1.9);
                radial(1.5 * rho, 1.5 * d1, 1.5 * d2, s, c)
            }
            Shape::Pear { factor, amplitude } => {
                let (s3, c3) = (3.0 * t).sin_cos();
                radial(
                    factor * (1.0 + amplitude * c3),
                    -3.0 * factor * amplitude * s3,
                    -9.0 * factor * amplitude * c3,
                    s,
                    c,
                )
            }
            Shape::Kite => {
                let (s2, c2) = (2.0 * t).sin_cos();
                [
                    [c + 0.65 * c2 - 0.65, 1.5 * s],
                    [-s - 1.3 * s2, 1.5 * c],
                    [-c - 2.6 * c2, -1.5 * s],
                ]
            }
        }
    }
}

fn radial(r: f64, dr: f64, ddr: f64, s: f64, c: f64) -> [Point; 3] {
    [
        [r * c, r * s],
        [dr * c - r * s, dr * s + r * c],
        [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s],
    ]
}

/// A closed, counterclockwise, 2π-periodic boundary: `center + scale * shape(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCurve {
    pub shape: Shape,
    pub center: Point,
    pub scale: f64,
}

/// Build a preset by name. `params` may be empty to take the defaults
/// (unit circle, 1.5 x 1 ellipse, pear with factor 1 and amplitude 0.15).
pub fn make_preset(name: &str, params: &[f64], center: Point, scale: f64) -> Result<BoundaryCurve> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Invalid(format!("scale must be positive, got {scale}")));
    }
    if !(center[0].is_finite() && center[1].is_finite()) {
        return Err(Error::Invalid("center must be finite".into()));
    }
    let arity = |n: usize| -> Result<()> {
        if params.is_empty() || params.len() == n {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "preset `{name}` takes {n} parameters, got {}",
                params.len()
            )))
        }
    };
    let shape = match name {
        "circle" => {
            arity(1)?;
            Shape::Circle {
                radius: params.first().copied().unwrap_or(1.0),
            }
        }
        "ellipse" => {
            arity(2)?;
            let (a, b) = if params.is_empty() {
                (1.5, 1.0)
            } else {
                (params[0], params[1])
            };
            Shape::Ellipse { a, b }
        }
        "rounded_rectangle" => {
            arity(0)?;
            Shape::RoundedRectangle
        }
        "pear" => {
            arity(2)?;
            let (factor, amplitude) = if params.is_empty() {
                (1.0, 0.15)
            } else {
                (params[0], params[1])
            };
            Shape::Pear { factor, amplitude }
        }
        "kite" => {
            arity(0)?;
            Shape::Kite
        }
        other => return Err(Error::Invalid(format!("unknown preset `{other}`"))),
    };
    let positive = shape.params().iter().take(2).all(|&p| p > 0.0 && p.is_finite());
    let ok = match shape {
        Shape::Pear { factor, amplitude } => factor > 0.0 && amplitude.abs() < 1.0,
        _ => positive,
    };
    if !ok {
        return Err(Error::Invalid(format!(
            "invalid parameters {:?} for preset `{name}`",
            shape.params()
        )));
    }
    Ok(BoundaryCurve { shape, center, scale })
}

impl BoundaryCurve {
    pub fn position(&self, t: f64) -> Point {
        let [x, _, _] = self.shape.eval(t);
        [self.center[0] + self.scale * x[0], self.center[1] + self.scale * x[1]]
    }

    pub fn derivative(&self, t: f64) -> Point {
        let [_, d, _] = self.shape.eval(t);
        [self.scale * d[0], self.scale * d[1]]
    }

    pub fn second_derivative(&self, t: f64) -> Point {
        let [_, _, dd] = self.shape.eval(t);
        [self.scale * dd[0], self.scale * dd[1]]
    }

    pub fn translated(&self, by: Point) -> Self {
        BoundaryCurve {
            center: [self.center[0] + by[0], self.center[1] + by[1]],
            ..*self
        }
    }
}

impl fmt::Display for BoundaryCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.shape.name())?;
        let p = self.shape.params();
        for (i, v) in p.iter().enumerate() {
            write!(f, "{}{v:?}", if i > 0 { "," } else { "" })?;
        }
        write!(
            f,
            ";center={:?},{:?};scale={:?})",
            self.center[0], self.center[1], self.scale
        )
    }
}

/// Uniform nodes `t_i = 2πi/n`, `i = 0..n`, with trapezoidal weight `2π/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeSet {
    n: usize,
}

impl NodeSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::Invalid(format!("node count must be even and positive, got {n}")));
        }
        Ok(NodeSet { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }
}

/// Geometry of the curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub x: Point,
    pub dx: Point,
    pub ddx: Point,
    /// `|x'(t)|`
    pub jac: f64,
    /// Unit outward normal `(dx2, -dx1) / jac`.
    pub nu: Point,
    /// Unit tangent `dx / jac`.
    pub tau: Point,
}

impl CurveSample {
    pub fn at(curve: &BoundaryCurve, t: f64) -> Result<Self> {
        let x = curve.position(t);
        let dx = curve.derivative(t);
        let ddx = curve.second_derivative(t);
        let jac = dx[0].hypot(dx[1]);
        if !(jac >= 1e-12) {
            return Err(Error::DegenerateCurve(format!("|x'(t)| = {jac:e} at t = {t}")));
        }
        Ok(CurveSample {
            t,
            x,
            dx,
            ddx,
            jac,
            nu: [dx[1] / jac, -dx[0] / jac],
            tau: [dx[0] / jac, dx[1] / jac],
        })
    }

    /// Signed curvature, positive on convex parts of a counterclockwise curve.
    pub fn curvature(&self) -> f64 {
        (self.dx[0] * self.ddx[1] - self.dx[1] * self.ddx[0]) / self.jac.powi(3)
    }
}

pub fn sample(curve: &BoundaryCurve, nodes: &NodeSet) -> Result<Vec<CurveSample>> {
    (0..nodes.len())
        .map(|i| CurveSample::at(curve, nodes.node(i)))
        .collect()
}

/// Enclosed area by the trapezoidal rule applied to `½∮(x dy − y dx)`.
pub fn signed_area(curve: &BoundaryCurve, nodes: &NodeSet) -> f64 {
    let w = nodes.weight();
    (0..nodes.len())
        .map(|i| {
            let t = nodes.node(i);
            let x = curve.position(t);
            let d = curve.derivative(t);
            0.5 * (x[0] * d[1] - x[1] * d[0]) * w
        })
        .sum()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = ux * ux + uy * uy;
    let s = if len2 > 0.0 {
        ((wx * ux + wy * uy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (wx - s * ux).hypot(wy - s * uy)
}

/// Winding-number test against the polygon through the curve at
/// `max(n, 512)` uniform nodes.
pub fn point_in_cavity(point: Point, curve: &BoundaryCurve, nodes: &NodeSet) -> Result<bool> {
    const TOL: f64 = 1e-9;
    let m = nodes.len().max(512);
    let poly: Vec<Point> = (0..m).map(|i| curve.position(2.0 * PI * i as f64 / m as f64)).collect();
    let mut winding = 0i32;
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let d = segment_distance(point, a, b);
        if d < TOL {
            return Err(Error::Indeterminate { distance: d, tol: TOL });
        }
        let cross = (b[0] - a[0]) * (point[1] - a[1]) - (point[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= point[1] {
            if b[1] > point[1] && cross > 0.0 {
                winding += 1;
            }
        } else if b[1] <= point[1] && cross < 0.0 {
            winding -= 1;
        }
    }
    Ok(winding != 0)
}

/// Smallest distance from `point` to the polygon through `m` curve nodes.
pub fn distance_to_curve(point: Point, curve: &BoundaryCurve, m: usize) -> f64 {
    let poly: Vec<Point> = (0..m).map(|i| curve.position(2.0 * PI * i as f64 / m as f64)).collect();
    (0..m)
        .map(|i| segment_distance(point, poly[i], poly[(i + 1) % m]))
        .fold(f64::INFINITY, f64::min)
}
