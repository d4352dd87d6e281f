//! Nested loop geometry: signed distances, the clamped smooth extension,
//! initial data made of stacked layers, and front extraction by marching
//! squares.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::field::{GridShape, PeriodicField};
use crate::layer::LayerProfile;

pub type Point = [f64; 2];

/// A closed curve, star-shaped about its center.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Circle { center: Point, radius: f64 },
    /// `r(θ) = r0 + Σ_k (a_k cos kθ + b_k sin kθ)`, `k = 1, 2, ...`
    Fourier {
        center: Point,
        r0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

impl Curve {
    pub fn circle(center: Point, radius: f64) -> Self {
        Curve::Circle { center, radius }
    }

    pub fn center(&self) -> Point {
        match self {
            Curve::Circle { center, .. } | Curve::Fourier { center, .. } => *center,
        }
    }

    /// Polar radius in direction `θ` about the center.
    pub fn radius_at(&self, theta: f64) -> f64 {
        match self {
            Curve::Circle { radius, .. } => *radius,
            Curve::Fourier { r0, cos, sin, .. } => {
                let mut r = *r0;
                for (k, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let kt = (k + 1) as f64 * theta;
                    r += a * kt.cos() + b * kt.sin();
                }
                r
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Curve::Circle { radius, center } => {
                if !(*radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return invalid(format!("circle needs a positive radius, got {radius}"));
                }
            }
            Curve::Fourier { r0, cos, sin, .. } => {
                if cos.len() != sin.len() {
                    return invalid("Fourier curve needs as many sine as cosine coefficients");
                }
                let rmin = (0..2048)
                    .map(|k| self.radius_at(2.0 * PI * k as f64 / 2048.0))
                    .fold(f64::INFINITY, f64::min);
                if !(*r0 > 0.0) || !(rmin > 0.0) {
                    return invalid("Fourier curve radius must stay positive");
                }
            }
        }
        Ok(())
    }

    /// `n` points along the curve, counterclockwise.
    pub fn sample(&self, n: usize) -> Vec<Point> {
        let c = self.center();
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let r = self.radius_at(t);
                [c[0] + r * t.cos(), c[1] + r * t.sin()]
            })
            .collect()
    }

    pub fn contains(&self, p: Point) -> bool {
        let c = self.center();
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        (dx * dx + dy * dy).sqrt() < self.radius_at(dy.atan2(dx))
    }

    /// Signed distance, positive inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Curve::Circle { center, radius } => radius - dist(p, *center),
            Curve::Fourier { .. } => SampledCurve::new(self, 4096).signed_distance(p),
        }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ex, a[1] + t * ey])
}

/// Dense polyline of a curve with a coarse-to-fine nearest-point search.
#[derive(Debug, Clone)]
pub struct SampledCurve<'a> {
    curve: &'a Curve,
    points: Vec<Point>,
    stride: usize,
}

impl<'a> SampledCurve<'a> {
    pub fn new(curve: &'a Curve, n: usize) -> Self {
        let n = n.max(64);
        Self {
            curve,
            points: curve.sample(n),
            stride: (n / 256).max(1),
        }
    }

    pub fn distance(&self, p: Point) -> f64 {
        let n = self.points.len();
        let mut best = (f64::INFINITY, 0);
        for k in (0..n).step_by(self.stride) {
            let d = dist(p, self.points[k]);
            if d < best.0 {
                best = (d, k);
            }
        }
        let window = 4 * self.stride as isize;
        let mut d = f64::INFINITY;
        for off in -window..=window {
            let k = (best.1 as isize + off).rem_euclid(n as isize) as usize;
            d = d.min(segment_distance(p, self.points[k], self.points[(k + 1) % n]));
        }
        d
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        let d = self.distance(p);
        if self.curve.contains(p) {
            d
        } else {
            -d
        }
    }
}

/// Nested loops, outermost first: `Ω^{i+1} ⊂⊂ Ω^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub loops: Vec<Curve>,
}

impl LoopConfig {
    pub fn new(loops: Vec<Curve>) -> Result<Self> {
        if loops.is_empty() {
            return invalid("at least one loop is required");
        }
        for l in &loops {
            l.validate()?;
        }
        Ok(Self { loops })
    }

    /// Concentric circles around `center`; radii must be strictly decreasing.
    pub fn concentric(center: Point, radii: &[f64]) -> Result<Self> {
        Self::new(radii.iter().map(|&r| Curve::circle(center, r)).collect())
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Smallest boundary separation between consecutive loops (infinite for one loop).
    pub fn min_separation(&self) -> f64 {
        let mut sep = f64::INFINITY;
        for pair in self.loops.windows(2) {
            let outer = SampledCurve::new(&pair[0], 4096);
            for p in pair[1].sample(1024) {
                sep = sep.min(outer.signed_distance(p));
            }
        }
        sep
    }

    /// Checks strict nesting with separation at least `min_sep` and that every
    /// loop lies in the central `L/2 × L/2` sub-box.
    pub fn validate(&self, box_side: f64, min_sep: f64) -> Result<()> {
        let (lo, hi) = (0.25 * box_side, 0.75 * box_side);
        for (i, l) in self.loops.iter().enumerate() {
            for p in l.sample(1024) {
                if p.iter().any(|&c| c < lo || c > hi) {
                    return invalid(format!(
                        "loop {} leaves the central sub-box [{lo}, {hi}]²",
                        i + 1
                    ));
                }
            }
        }
        for (i, pair) in self.loops.windows(2).enumerate() {
            let outer = SampledCurve::new(&pair[0], 4096);
            for p in pair[1].sample(1024) {
                let d = outer.signed_distance(p);
                if d < min_sep {
                    return invalid(format!(
                        "loops {} and {} are not nested with separation {min_sep} (found {d:.4})",
                        i + 1,
                        i + 2
                    ));
                }
            }
        }
        Ok(())
    }

    /// Default clamp scale: 0.4 times the smallest separation, capped for a
    /// single loop at 0.4 times its smallest radius.
    pub fn default_rho(&self) -> f64 {
        let sep = self.min_separation();
        let inner = self.loops.last().unwrap();
        let rmin = (0..256)
            .map(|k| inner.radius_at(2.0 * PI * k as f64 / 256.0))
            .fold(f64::INFINITY, f64::min);
        0.4 * sep.min(rmin)
    }
}

/// Signed distance to loop `i` (0-based) on the grid, positive inside.
pub fn signed_distance(loops: &LoopConfig, i: usize, shape: GridShape) -> Result<PeriodicField> {
    let curve = loops
        .loops
        .get(i)
        .ok_or_else(|| Error::InvalidInput(format!("loop index {i} out of range")))?;
    if loops.len() > 1 {
        let sep = loops.min_separation();
        if sep < 4.0 * shape.h() {
            return Err(Error::UnderResolved(format!(
                "loop separation {sep:.4} is below four grid spacings ({:.4})",
                4.0 * shape.h()
            )));
        }
    }
    Ok(match curve {
        Curve::Circle { .. } => PeriodicField::from_fn(shape, |p| curve.signed_distance(p)),
        Curve::Fourier { .. } => {
            let sampled = SampledCurve::new(curve, 4096);
            PeriodicField::from_fn(shape, |p| sampled.signed_distance(p))
        }
    })
}

fn smoothstep5(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    let t2 = t * t;
    [
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    ]
}

/// The clamp `E(d̃) = d̃ η + sign(d̃) 2ρ (1 - η)` with `η = 1 - s((|d̃| - ρ)/ρ)`,
/// together with `E'` and `E''`.
pub fn clamp_profile(dt: f64, rho: f64) -> [f64; 3] {
    let a = dt.abs();
    if a <= rho {
        return [dt, 1.0, 0.0];
    }
    let sg = dt.signum();
    if a >= 2.0 * rho {
        return [sg * 2.0 * rho, 0.0, 0.0];
    }
    let [s, s1, s2] = smoothstep5((a - rho) / rho);
    let eta = 1.0 - s;
    let eta1 = -s1 / rho;
    let eta2 = -s2 / (rho * rho);
    // In terms of a = |d̃|: E = sg (a η + 2ρ (1 - η)).
    let e = sg * (a * eta + 2.0 * rho * (1.0 - eta));
    let de_da = eta + (a - 2.0 * rho) * eta1;
    let d2e_da2 = 2.0 * eta1 + (a - 2.0 * rho) * eta2;
    [e, de_da, sg * d2e_da2]
}

/// Clamped smooth extension of a signed distance field.
pub fn smooth_extension(dt: &PeriodicField, rho: f64) -> Result<PeriodicField> {
    if !(rho > 0.0) {
        return invalid(format!("clamp scale must be positive, got {rho}"));
    }
    let values = dt.values().iter().map(|&d| clamp_profile(d, rho)[0]).collect();
    PeriodicField::new(dt.shape(), values)
}

/// A distance-like function with first and second derivatives.
pub trait DistanceFunction: Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Point;
    fn hessian(&self, p: Point) -> [[f64; 2]; 2];
}

/// Analytic clamped distance to a circle (`rho = ∞` disables the clamp).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedCircle {
    pub center: Point,
    pub radius: f64,
    pub rho: f64,
}

impl ClampedCircle {
    fn parts(&self, p: Point) -> (f64, f64, Point, f64) {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        let r = (dx * dx + dy * dy).sqrt().max(1e-300);
        (self.radius - r, r, [dx / r, dy / r], 1.0 / r)
    }

    fn clamp(&self, dt: f64) -> [f64; 3] {
        if self.rho.is_finite() {
            clamp_profile(dt, self.rho)
        } else {
            [dt, 1.0, 0.0]
        }
    }
}

impl DistanceFunction for ClampedCircle {
    fn value(&self, p: Point) -> f64 {
        self.clamp(self.parts(p).0)[0]
    }

    fn gradient(&self, p: Point) -> Point {
        let (dt, _, e, _) = self.parts(p);
        let d1 = self.clamp(dt)[1];
        [-d1 * e[0], -d1 * e[1]]
    }

    fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        // d̃ = R - r: ∇d̃ = -e, D²d̃ = -(I - e⊗e)/r
        let (dt, _, e, inv_r) = self.parts(p);
        let [_, d1, d2] = self.clamp(dt);
        let mut h = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let delta = if a == b { 1.0 } else { 0.0 };
                h[a][b] = d2 * e[a] * e[b] - d1 * (delta - e[a] * e[b]) * inv_r;
            }
        }
        h
    }
}

/// Affine distance `n·x - c` to a straight front, optionally clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatFront {
    pub normal: Point,
    pub offset: f64,
    pub rho: f64,
}

impl DistanceFunction for FlatFront {
    fn value(&self, p: Point) -> f64 {
        let dt = self.normal[0] * p[0] + self.normal[1] * p[1] - self.offset;
        if self.rho.is_finite() {
            clamp_profile(dt, self.rho)[0]
        } else {
            dt
        }
    }

    fn gradient(&self, p: Point) -> Point {
        let dt = self.normal[0] * p[0] + self.normal[1] * p[1] - self.offset;
        let d1 = if self.rho.is_finite() {
            clamp_profile(dt, self.rho)[1]
        } else {
            1.0
        };
        [d1 * self.normal[0], d1 * self.normal[1]]
    }

    fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        let dt = self.normal[0] * p[0] + self.normal[1] * p[1] - self.offset;
        let d2 = if self.rho.is_finite() {
            clamp_profile(dt, self.rho)[2]
        } else {
            0.0
        };
        let n = self.normal;
        [[d2 * n[0] * n[0], d2 * n[0] * n[1]], [d2 * n[1] * n[0], d2 * n[1] * n[1]]]
    }
}

/// Clamped distance field of one loop on the grid, evaluated off-grid by
/// bicubic interpolation.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub raw: PeriodicField,
    pub clamped: PeriodicField,
    pub rho: f64,
}

impl DistanceField {
    pub fn build(loops: &LoopConfig, i: usize, shape: GridShape, rho: f64) -> Result<Self> {
        let raw = signed_distance(loops, i, shape)?;
        let clamped = smooth_extension(&raw, rho)?;
        Ok(Self { raw, clamped, rho })
    }

    /// Centered-difference gradient of the clamped field.
    pub fn gradient_fields(&self) -> (PeriodicField, PeriodicField) {
        let f = &self.clamped;
        let shape = f.shape();
        let (m, h) = (shape.m as isize, shape.h());
        let mut gx = Vec::with_capacity(f.size());
        let mut gy = Vec::with_capacity(f.size());
        for j in 0..m {
            for i in 0..m {
                gx.push((f.at_wrapped(i + 1, j) - f.at_wrapped(i - 1, j)) / (2.0 * h));
                gy.push((f.at_wrapped(i, j + 1) - f.at_wrapped(i, j - 1)) / (2.0 * h));
            }
        }
        (
            PeriodicField::new(shape, gx).unwrap(),
            PeriodicField::new(shape, gy).unwrap(),
        )
    }

    /// Five-point Laplacian of the clamped field.
    pub fn laplacian(&self) -> PeriodicField {
        let f = &self.clamped;
        let shape = f.shape();
        let (m, h) = (shape.m as isize, shape.h());
        let mut out = Vec::with_capacity(f.size());
        for j in 0..m {
            for i in 0..m {
                out.push(
                    (f.at_wrapped(i + 1, j) + f.at_wrapped(i - 1, j) + f.at_wrapped(i, j + 1)
                        + f.at_wrapped(i, j - 1)
                        - 4.0 * f.at(i as usize, j as usize))
                        / (h * h),
                );
            }
        }
        PeriodicField::new(shape, out).unwrap()
    }
}

impl DistanceFunction for DistanceField {
    fn value(&self, p: Point) -> f64 {
        self.clamped.interpolate(p)
    }

    fn gradient(&self, p: Point) -> Point {
        let s = 0.5 * self.clamped.h();
        [
            (self.value([p[0] + s, p[1]]) - self.value([p[0] - s, p[1]])) / (2.0 * s),
            (self.value([p[0], p[1] + s]) - self.value([p[0], p[1] - s])) / (2.0 * s),
        ]
    }

    fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        let s = self.clamped.h();
        let f = |dx: f64, dy: f64| self.value([p[0] + dx, p[1] + dy]);
        let f0 = f(0.0, 0.0);
        let hxx = (f(s, 0.0) - 2.0 * f0 + f(-s, 0.0)) / (s * s);
        let hyy = (f(0.0, s) - 2.0 * f0 + f(0.0, -s)) / (s * s);
        let hxy = (f(s, s) - f(s, -s) - f(-s, s) + f(-s, -s)) / (4.0 * s * s);
        [[hxx, hxy], [hxy, hyy]]
    }
}

/// `u₀(x) = Σ_i φ(d_i(x)/ε)` with the unclamped signed distances.
pub fn build_initial_condition(
    loops: &LoopConfig,
    shape: GridShape,
    eps: f64,
    profile: &LayerProfile,
) -> Result<PeriodicField> {
    if eps < 4.0 * shape.h() {
        return Err(Error::UnderResolved(format!(
            "eps = {eps} is below four grid spacings ({})",
            4.0 * shape.h()
        )));
    }
    let mut u = PeriodicField::constant(shape, 0.0);
    for i in 0..loops.len() {
        let d = signed_distance(loops, i, shape)?;
        for (v, &di) in u.values_mut().iter_mut().zip(d.values()) {
            *v += profile.phi(di / eps);
        }
    }
    Ok(u)
}

/// Closed polyline, vertices in order without repeating the first one.
pub type Polyline = Vec<Point>;

/// Contours of `u` at the levels `i - 1/2`, `i = 1..=n`, outermost first.
/// A missing level is `None`.
pub fn extract_fronts(u: &PeriodicField, n: usize) -> Vec<Option<Polyline>> {
    (1..=n).map(|i| extract_level(u, i as f64 - 0.5)).collect()
}

/// Largest closed contour of `u` at `level` by marching squares on the
/// non-wrapping cells of the grid.
pub fn extract_level(u: &PeriodicField, level: f64) -> Option<Polyline> {
    let m = u.shape().m;
    let h = u.h();
    let above = |i: usize, j: usize| u.at(i, j) > level;
    // Edge keys: horizontal edge from (i,j) to (i+1,j) is 2·(j m + i),
    // vertical edge from (i,j) to (i,j+1) is 2·(j m + i) + 1.
    let hkey = |i: usize, j: usize| 2 * (j * m + i);
    let vkey = |i: usize, j: usize| 2 * (j * m + i) + 1;
    let mut links: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut link = |a: usize, b: usize| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for j in 0..m - 1 {
        for i in 0..m - 1 {
            let c = [above(i, j), above(i + 1, j), above(i + 1, j + 1), above(i, j + 1)];
            let idx = c[0] as u8 | (c[1] as u8) << 1 | (c[2] as u8) << 2 | (c[3] as u8) << 3;
            if idx == 0 || idx == 15 {
                continue;
            }
            // edges: bottom, right, top, left
            let e = [hkey(i, j), vkey(i + 1, j), hkey(i, j + 1), vkey(i, j)];
            let crossed: Vec<usize> = (0..4).filter(|&k| c[k] != c[(k + 1) % 4]).map(|k| e[k]).collect();
            if crossed.len() == 2 {
                link(crossed[0], crossed[1]);
            } else {
                // saddle: decide by the cell average
                let center = 0.25 * (u.at(i, j) + u.at(i + 1, j) + u.at(i + 1, j + 1) + u.at(i, j + 1));
                if (center > level) == c[0] {
                    link(e[0], e[1]);
                    link(e[2], e[3]);
                } else {
                    link(e[3], e[0]);
                    link(e[1], e[2]);
                }
            }
        }
    }
    let crossing = |key: usize| -> Point {
        let cell = key / 2;
        let (i, j) = (cell % m, cell / m);
        let (i2, j2) = if key.is_multiple_of(2) { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (u.at(i, j), u.at(i2, j2));
        let t = (level - a) / (b - a);
        [
            h * (i as f64 + t * (i2 as f64 - i as f64)),
            h * (j as f64 + t * (j2 as f64 - j as f64)),
        ]
    };
    let mut keys: Vec<usize> = links.keys().copied().collect();
    keys.sort_unstable();
    let mut visited: HashMap<usize, bool> = HashMap::new();
    let mut best: Option<(f64, Polyline)> = None;
    for &start in &keys {
        if visited.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev = usize::MAX;
        let mut cur = start;
        let closed = loop {
            let next = links[&cur].iter().copied().find(|&k| k != prev && !visited.contains_key(&k));
            match next {
                Some(k) => {
                    visited.insert(k, true);
                    chain.push(k);
                    prev = cur;
                    cur = k;
                }
                None => break chain.len() > 2 && links[&cur].contains(&start),
            }
        };
        if !closed {
            continue;
        }
        let poly: Polyline = chain.into_iter().map(crossing).collect();
        let area = shoelace(&poly).abs();
        if best.as_ref().is_none_or(|(a, _)| area > *a) {
            best = Some((area, poly));
        }
    }
    best.map(|(_, mut p)| {
        if shoelace(&p) < 0.0 {
            p.reverse();
        }
        p
    })
}

fn shoelace(p: &[Point]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|k| {
            let (a, b) = (p[k], p[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Geometric measurements of a closed polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontStats {
    pub area: f64,
    pub perimeter: f64,
    /// `√(area/π)`
    pub mean_radius: f64,
    /// Circumcircle curvature through vertices `k-2, k, k+2`.
    pub curvature: Vec<f64>,
    pub self_intersecting: bool,
}

pub fn front_statistics(poly: &[Point]) -> Result<FrontStats> {
    let n = poly.len();
    if n < 16 {
        return invalid(format!("front statistics need at least 16 vertices, got {n}"));
    }
    let area = shoelace(poly).abs();
    let perimeter = (0..n).map(|k| dist(poly[k], poly[(k + 1) % n])).sum();
    let curvature = (0..n)
        .map(|k| circumcurvature(poly[(k + n - 2) % n], poly[k], poly[(k + 2) % n]))
        .collect();
    Ok(FrontStats {
        area,
        perimeter,
        mean_radius: (area / PI).sqrt(),
        curvature,
        self_intersecting: self_intersects(poly),
    })
}

fn circumcurvature(a: Point, b: Point, c: Point) -> f64 {
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let prod = dist(a, b) * dist(b, c) * dist(c, a);
    if prod == 0.0 {
        0.0
    } else {
        2.0 * cross / prod
    }
}

fn self_intersects(p: &[Point]) -> bool {
    let n = p.len();
    let orient = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        let (xmin, xmax) = (a[0].min(b[0]), a[0].max(b[0]));
        let (ymin, ymax) = (a[1].min(b[1]), a[1].max(b[1]));
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (p[j], p[(j + 1) % n]);
            if c[0].max(d[0]) < xmin || c[0].min(d[0]) > xmax || c[1].max(d[1]) < ymin || c[1].min(d[1]) > ymax {
                continue;
            }
            let o1 = orient(a, b, c);
            let o2 = orient(a, b, d);
            let o3 = orient(c, d, a);
            let o4 = orient(c, d, b);
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                return true;
            }
        }
    }
    false
}

/// Signed distance from `p` to a closed polyline (positive inside) by brute
/// force over its segments.
pub fn polyline_signed_distance(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    let mut d = f64::INFINITY;
    let mut inside = false;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        d = d.min(segment_distance(p, a, b));
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    if inside {
        d
    } else {
        -d
    }
}

/// Keeps every `k`-th vertex so that spacing is at least `spacing`.
pub fn thin_polyline(poly: &[Point], spacing: f64) -> Polyline {
    let mut out = Vec::new();
    let mut last: Option<Point> = None;
    for &p in poly {
        if last.is_none_or(|q| dist(p, q) >= spacing) {
            out.push(p);
            last = Some(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};

    #[test]
    fn circle_distances() {
        let c = Curve::circle([2.0, 2.0], 1.0);
        assert_eq!(c.signed_distance([2.0, 2.0]), 1.0);
        assert!((c.signed_distance([4.0, 2.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_curve_points_have_zero_distance() {
        let f = Curve::Fourier {
            center: [2.0, 2.0],
            r0: 0.8,
            cos: vec![0.0, 0.1],
            sin: vec![0.05, 0.0],
        };
        let s = SampledCurve::new(&f, 4096);
        for p in f.sample(37) {
            assert!(s.distance(p) < 1e-6);
        }
        assert!(s.signed_distance([2.0, 2.0]) > 0.5);
        // a circle written as a Fourier curve
        let c = Curve::Fourier { center: [0.0, 0.0], r0: 1.0, cos: vec![], sin: vec![] };
        let s = SampledCurve::new(&c, 4096);
        assert!((s.signed_distance([0.3, 0.2]) - (1.0 - 0.13f64.sqrt())).abs() < 1e-6);
        assert!((s.signed_distance([1.7, 0.0]) + 0.7).abs() < 1e-6);
    }

    #[test]
    fn nesting_checks() {
        let ok = LoopConfig::concentric([2.0, 2.0], &[0.9, 0.5]).unwrap();
        assert!(ok.validate(4.0, 0.1).is_ok());
        assert!((ok.min_separation() - 0.4).abs() < 1e-6);
        let crossing = LoopConfig::concentric([2.0, 2.0], &[0.5, 0.9]).unwrap();
        assert!(crossing.validate(4.0, 0.1).is_err());
        let too_big = LoopConfig::concentric([2.0, 2.0], &[1.5]).unwrap();
        assert!(too_big.validate(4.0, 0.1).is_err());
    }

    #[test]
    fn extension_values() {
        let rho = 0.2;
        assert_eq!(clamp_profile(0.1, rho)[0], 0.1);
        assert_eq!(clamp_profile(0.6, rho)[0], 0.4);
        assert_eq!(clamp_profile(-0.6, rho)[0], -0.4);
        for k in 1..20 {
            let d = rho * (1.0 + k as f64 / 20.0);
            let e = clamp_profile(d, rho)[0];
            assert!(e > rho && e < 2.0 * rho);
        }
    }

    #[test]
    fn extension_derivatives_match_differences() {
        let rho = 0.3;
        let h = 1e-5;
        for &d in &[-0.55, -0.4, 0.1, 0.35, 0.45, 0.58] {
            let [_, d1, d2] = clamp_profile(d, rho);
            let fd1 = (clamp_profile(d + h, rho)[0] - clamp_profile(d - h, rho)[0]) / (2.0 * h);
            let fd2 = (clamp_profile(d + h, rho)[1] - clamp_profile(d - h, rho)[1]) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8, "{d}: {d1} {fd1}");
            assert!((d2 - fd2).abs() < 1e-6, "{d}: {d2} {fd2}");
        }
    }

    #[test]
    fn clamped_circle_hessian_matches_differences() {
        let c = ClampedCircle { center: [0.0, 0.0], radius: 1.0, rho: 0.25 };
        let h = 1e-5;
        for p in [[0.9, 0.1], [0.5, 0.8], [1.3, -0.2]] {
            let hs = c.hessian(p);
            for a in 0..2 {
                let mut q = p;
                let mut r = p;
                q[a] += h;
                r[a] -= h;
                let (gq, gr) = (c.gradient(q), c.gradient(r));
                for b in 0..2 {
                    assert!((hs[a][b] - (gq[b] - gr[b]) / (2.0 * h)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn polygon_statistics() {
        let n = 1024;
        let poly: Polyline = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let s = front_statistics(&poly).unwrap();
        assert!((s.area - PI).abs() < 1e-4);
        assert!(s.curvature.iter().all(|k| (k - 1.0).abs() < 1e-3));
        assert!(!s.self_intersecting);

        let mut square = Vec::new();
        for k in 0..8 {
            square.push([-1.0 + 0.25 * k as f64, -1.0]);
        }
        for k in 0..8 {
            square.push([1.0, -1.0 + 0.25 * k as f64]);
        }
        for k in 0..8 {
            square.push([1.0 - 0.25 * k as f64, 1.0]);
        }
        for k in 0..8 {
            square.push([-1.0, 1.0 - 0.25 * k as f64]);
        }
        assert!((front_statistics(&square).unwrap().area - 4.0).abs() < 1e-12);

        let ellipse: Polyline = (0..4096)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 4096.0;
                [2.0 * t.cos(), t.sin()]
            })
            .collect();
        let oracle = integrate(
            |t: f64| (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt(),
            0.0,
            2.0 * PI,
            Tolerance::default(),
        )
        .value;
        let p = front_statistics(&ellipse).unwrap().perimeter;
        assert!((p - oracle).abs() / oracle < 5e-3);

        let bowtie: Polyline = (0..32)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 32.0;
                [t.sin(), (2.0 * t).sin()]
            })
            .collect();
        assert!(front_statistics(&bowtie).unwrap().self_intersecting);
        assert!(front_statistics(&poly[..10]).is_err());
    }

    #[test]
    fn contour_of_constant_field_is_empty() {
        let shape = GridShape::new(4.0, 64).unwrap();
        let u = PeriodicField::constant(shape, 0.2);
        assert!(extract_fronts(&u, 3).iter().all(|f| f.is_none()));
    }

    #[test]
    fn contour_of_circle_layer() {
        let shape = GridShape::new(4.0, 256).unwrap();
        let profile = LayerProfile::tabulate_exact(200.0, 2001).unwrap();
        let loops = LoopConfig::concentric([2.0, 2.0], &[1.0, 0.7, 0.4]).unwrap();
        let u = build_initial_condition(&loops, shape, 0.08, &profile).unwrap();
        let fronts = extract_fronts(&u, 3);
        let radii: Vec<f64> = fronts
            .iter()
            .map(|f| front_statistics(f.as_ref().unwrap()).unwrap().mean_radius)
            .collect();
        assert!(radii[0] > radii[1] && radii[1] > radii[2]);
        assert!(build_initial_condition(&loops, shape, 0.05, &profile).is_err());

        let single = LoopConfig::concentric([2.0, 2.0], &[1.0]).unwrap();
        let u = build_initial_condition(&single, shape, 0.08, &profile).unwrap();
        let f = extract_fronts(&u, 1)[0].clone().unwrap();
        assert!((front_statistics(&f).unwrap().mean_radius - 1.0).abs() < shape.h());
    }

    #[test]
    fn circle_distance_field_is_eikonal_with_curvature() {
        // Centered differences straddling |d| = ρ see the blend zone, where
        // |∇d| > 1; those points (under 5% of the band) are left out.
        let shape = GridShape::new(4.0, 512).unwrap();
        let loops = LoopConfig::concentric([2.0, 2.0], &[1.0]).unwrap();
        let rho = 0.3;
        let df = DistanceField::build(&loops, 0, shape, rho).unwrap();
        let (gx, gy) = df.gradient_fields();
        let lap = df.laplacian();
        for (k, &d) in df.clamped.values().iter().enumerate() {
            if d.abs() <= rho - 2.0 * shape.h() {
                let g = (gx.values()[k].powi(2) + gy.values()[k].powi(2)).sqrt();
                assert!((g - 1.0).abs() < 1e-3, "{d} {g}");
                let r = 1.0 - d;
                assert!((lap.values()[k] + 1.0 / r).abs() < 2.0 * shape.h());
            }
        }
    }
}
