//! River channel geometry: spline centerline, width profile and the guidance
//! reference field.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;

use super::DomainBounds;

/// Centerline sampling step for the cached polyline (m).
const SAMPLE_STEP: f64 = 2.0;
/// Cross-track gain of the reference field (1/m).
const K_NORMAL: f64 = 0.05;

/// Optional narrowing of the channel between two along-track stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neck<R> {
    pub s_start: R,
    pub s_end: R,
    pub half_width: R,
    /// Length of the cosine ramp on both sides (m).
    pub ramp: R,
}

/// Simulated river reach: spline centerline with a (possibly varying) width.
#[derive(Debug, Clone)]
pub struct RiverScenario<R> {
    pub control_points: Vec<Vec3<R>>,
    pub half_width: R,
    pub bounds: DomainBounds<R>,
    pub seed: u64,
    pub neck: Option<Neck<R>>,
    centerline: Polyline<R>,
}

/// Result of a nearest-centerline query.
#[derive(Debug, Clone, Copy)]
pub struct CenterlineQuery<R> {
    /// Closest point on the centerline.
    pub point: Vec3<R>,
    /// Unit tangent (horizontal) at the closest point.
    pub tangent: Vec3<R>,
    /// Signed cross-track error: positive when left of the tangent.
    pub cross_track: R,
    /// Arc length from the start of the sampled centerline.
    pub arc_length: R,
}

impl<R: Real> RiverScenario<R> {
    pub fn new(
        control_points: Vec<Vec3<R>>,
        half_width: R,
        bounds: DomainBounds<R>,
        seed: u64,
        neck: Option<Neck<R>>,
    ) -> Result<Self> {
        if control_points.len() < 4 {
            return Err(Error::InvalidParameter(
                "at least 4 centerline control points required".into(),
            ));
        }
        if half_width <= R::zero() {
            return Err(Error::InvalidParameter("half-width must be positive".into()));
        }
        if control_points.iter().any(|p| !bounds.contains(p)) {
            return Err(Error::InvalidParameter(
                "control points must lie inside the domain bounds".into(),
            ));
        }
        let centerline = Polyline::from_catmull_rom(&control_points, R::of(SAMPLE_STEP));
        Ok(Self {
            control_points,
            half_width,
            bounds,
            seed,
            neck,
            centerline,
        })
    }

    /// Channel half-width at along-track station `s`.
    pub fn half_width_at(&self, s: R) -> R {
        match &self.neck {
            None => self.half_width,
            Some(n) => {
                let half = R::of(0.5);
                let blend = |x: R| half * (R::one() - (R::PI() * x).cos()); // 0..1 smoothstep
                if s <= n.s_start - n.ramp || s >= n.s_end + n.ramp {
                    self.half_width
                } else if s >= n.s_start && s <= n.s_end {
                    n.half_width
                } else if s < n.s_start {
                    let w = blend((s - (n.s_start - n.ramp)) / n.ramp);
                    self.half_width + (n.half_width - self.half_width) * w
                } else {
                    let w = blend(((n.s_end + n.ramp) - s) / n.ramp);
                    self.half_width + (n.half_width - self.half_width) * w
                }
            }
        }
    }

    /// Closest centerline point, tangent and signed cross-track error.
    pub fn centerline_query(&self, p: &Vec3<R>) -> CenterlineQuery<R> {
        self.centerline.nearest(p)
    }

    /// Total sampled centerline length.
    pub fn centerline_length(&self) -> R {
        self.centerline.total_length()
    }

    /// Centerline point and tangent at along-track station `s`.
    pub fn at_arc_length(&self, s: R) -> (Vec3<R>, Vec3<R>) {
        self.centerline.at_arc_length(s)
    }

    /// True when the horizontal point lies within the channel banks.
    pub fn in_channel(&self, x: R, y: R) -> bool {
        let q = self.centerline_query(&Vec3::new(x, y, R::zero()));
        q.cross_track.abs() <= self.half_width_at(q.arc_length)
    }
}

/// Tangent direction and cross-track correction term of the guidance
/// reference; the full field is `normalize(tangent + correction)`.
pub fn reference_components<R: Real>(
    scenario: &RiverScenario<R>,
    p: &Vec3<R>,
) -> Result<(Vec3<R>, Vec3<R>)> {
    if !scenario.bounds.contains(p) {
        return Err(Error::OutOfDomain);
    }
    let q = scenario.centerline_query(p);
    // left normal of the tangent; positive cross-track means p is left of the
    // centerline, so correct along -left.
    let left = Vec3::new(-q.tangent.y, q.tangent.x, R::zero());
    let w = (R::of(K_NORMAL) * q.cross_track).max(-R::one()).min(R::one());
    Ok((q.tangent, -left.scaled(w)))
}

/// Guidance direction: centerline tangent blended with a proportional
/// cross-track correction, saturated at a 45-degree blend, unit length.
pub fn reference_field<R: Real>(scenario: &RiverScenario<R>, p: &Vec3<R>) -> Result<Vec3<R>> {
    let (tangent, correction) = reference_components(scenario, p)?;
    (tangent + correction)
        .normalized(R::of(1e-12))
        .ok_or(Error::DegenerateNormal)
}

#[derive(Debug, Clone)]
struct Polyline<R> {
    points: Vec<Vec3<R>>,
    tangents: Vec<Vec3<R>>,
    cumulative: Vec<R>,
}

impl<R: Real> Polyline<R> {
    /// Sample a centripetal-flavored Catmull-Rom spline through the control
    /// points at roughly `step` spacing.
    fn from_catmull_rom(control: &[Vec3<R>], step: R) -> Self {
        let mut pts: Vec<Vec3<R>> = Vec::new();
        let n = control.len();
        for seg in 0..n - 1 {
            let p0 = if seg == 0 { control[0] } else { control[seg - 1] };
            let p1 = control[seg];
            let p2 = control[seg + 1];
            let p3 = if seg + 2 < n { control[seg + 2] } else { control[n - 1] };
            let seg_len = p1.distance(&p2);
            let samples = (seg_len / step).ceil().max(R::one());
            let count = samples.to_f64().unwrap_or(1.0) as usize;
            for i in 0..count {
                let t = R::of_usize(i) / R::of_usize(count);
                pts.push(catmull_rom(&p0, &p1, &p2, &p3, t));
            }
        }
        pts.push(*control.last().expect("non-empty control points"));
        // dedupe any coincident consecutive samples
        pts.dedup_by(|a, b| a.distance(b) < R::of(1e-9));

        let mut tangents = Vec::with_capacity(pts.len());
        for i in 0..pts.len() {
            let d = if i == 0 {
                pts[1] - pts[0]
            } else if i == pts.len() - 1 {
                pts[i] - pts[i - 1]
            } else {
                pts[i + 1] - pts[i - 1]
            };
            let mut t = d;
            t.z = R::zero();
            tangents.push(t.normalized(R::of(1e-12)).unwrap_or(Vec3::new(
                R::one(),
                R::zero(),
                R::zero(),
            )));
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = R::zero();
        cumulative.push(acc);
        for i in 1..pts.len() {
            acc += pts[i].distance(&pts[i - 1]);
            cumulative.push(acc);
        }
        Self {
            points: pts,
            tangents,
            cumulative,
        }
    }

    fn total_length(&self) -> R {
        *self.cumulative.last().expect("non-empty polyline")
    }

    fn at_arc_length(&self, s: R) -> (Vec3<R>, Vec3<R>) {
        let s = s.max(R::zero()).min(self.total_length());
        // binary search over the cumulative table
        let mut lo = 0usize;
        let mut hi = self.cumulative.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cumulative[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.cumulative[hi] - self.cumulative[lo];
        let w = if span > R::zero() {
            (s - self.cumulative[lo]) / span
        } else {
            R::zero()
        };
        let p = self.points[lo] + (self.points[hi] - self.points[lo]).scaled(w);
        let t = lerp_dir(&self.tangents[lo], &self.tangents[hi], w);
        (p, t)
    }

    /// Nearest point on the polyline via a coarse vertex scan refined over
    /// the neighboring segments.
    fn nearest(&self, p: &Vec3<R>) -> CenterlineQuery<R> {
        let stride = 8.max(self.points.len() / 256);
        let mut best_i = 0usize;
        let mut best_d = R::infinity();
        let mut i = 0;
        while i < self.points.len() {
            let d = horizontal_dist_sq(p, &self.points[i]);
            if d < best_d {
                best_d = d;
                best_i = i;
            }
            i += stride;
        }
        let lo = best_i.saturating_sub(stride + 1);
        let hi = (best_i + stride + 1).min(self.points.len() - 1);
        let mut best = (lo, R::zero(), R::infinity()); // (segment, param, dist_sq)
        for seg in lo..hi.max(lo + 1) {
            if seg + 1 >= self.points.len() {
                break;
            }
            let a = self.points[seg];
            let b = self.points[seg + 1];
            let ab = b - a;
            let denom = ab.x * ab.x + ab.y * ab.y;
            let t = if denom > R::zero() {
                (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / denom)
                    .max(R::zero())
                    .min(R::one())
            } else {
                R::zero()
            };
            let q = a + ab.scaled(t);
            let d = horizontal_dist_sq(p, &q);
            if d < best.2 {
                best = (seg, t, d);
            }
        }
        let (seg, t, _) = best;
        let point = self.points[seg] + (self.points[seg + 1] - self.points[seg]).scaled(t);
        let tangent = lerp_dir(&self.tangents[seg], &self.tangents[seg + 1], t);
        let arc_length =
            self.cumulative[seg] + (self.cumulative[seg + 1] - self.cumulative[seg]) * t;
        // signed cross-track: positive on the left of the tangent
        let dx = p.x - point.x;
        let dy = p.y - point.y;
        let cross_track = tangent.x * dy - tangent.y * dx;
        CenterlineQuery {
            point,
            tangent,
            cross_track,
            arc_length,
        }
    }
}

fn horizontal_dist_sq<R: Real>(a: &Vec3<R>, b: &Vec3<R>) -> R {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

fn lerp_dir<R: Real>(a: &Vec3<R>, b: &Vec3<R>, w: R) -> Vec3<R> {
    (*a + (*b - *a).scaled(w))
        .normalized(R::of(1e-12))
        .unwrap_or(*a)
}

fn catmull_rom<R: Real>(p0: &Vec3<R>, p1: &Vec3<R>, p2: &Vec3<R>, p3: &Vec3<R>, t: R) -> Vec3<R> {
    let half = R::of(0.5);
    let t2 = t * t;
    let t3 = t2 * t;
    let c0 = -t3 + t2 + t2 - t;
    let c1 = R::of(3.0) * t3 - R::of(5.0) * t2 + R::of(2.0);
    let c2 = -R::of(3.0) * t3 + R::of(4.0) * t2 + t;
    let c3 = t3 - t2;
    (p0.scaled(c0) + p1.scaled(c1) + p2.scaled(c2) + p3.scaled(c3)).scaled(half)
}
