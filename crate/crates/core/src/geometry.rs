//! Implicit-surface obstacle geometry.
//!
//! Shadow regions are represented as inflated super-ellipsoids. The scalar
//! field `gamma` is 0 at the obstacle center, 1 on the inflated surface and
//! grows without bound outside; it is used as a pseudo-distance everywhere
//! (feasibility checks, repulsion weighting, penalty costs).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-term base ratio clamp before exponentiation; keeps `gamma` finite for
/// far-away points with high exponents.
const RATIO_CLAMP: f64 = 1e6;

/// 3-D position / direction vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<R> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Vec3<R> {
    #[inline]
    pub fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> R {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> R {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> R {
        self.norm_squared().sqrt()
    }

    /// Horizontal (x, y) magnitude.
    #[inline]
    pub fn horizontal_norm(&self) -> R {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    #[inline]
    pub fn scaled(&self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction; `None` if the norm is below `eps`.
    pub fn normalized(&self, eps: R) -> Option<Self> {
        let n = self.norm();
        if n <= eps {
            None
        } else {
            Some(self.scaled(R::one() / n))
        }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> R {
        (*self - *o).norm()
    }

    /// Heading angle (rad) of the horizontal projection, measured from +x.
    #[inline]
    pub fn heading(&self) -> R {
        self.y.atan2(self.x)
    }

    /// Flight-path angle (rad): inclination above the horizontal plane.
    #[inline]
    pub fn pitch(&self) -> R {
        self.z.atan2(self.horizontal_norm())
    }

    /// Direction of unit length from heading/pitch angles.
    #[inline]
    pub fn from_angles(heading: R, pitch: R) -> Self {
        Self::new(
            pitch.cos() * heading.cos(),
            pitch.cos() * heading.sin(),
            pitch.sin(),
        )
    }
}

impl<R: Real> std::ops::Add for Vec3<R> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<R: Real> std::ops::Sub for Vec3<R> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<R: Real> std::ops::Neg for Vec3<R> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<R> {
    pub m: [[R; 3]; 3],
}

impl<R: Real> Mat3<R> {
    pub fn identity() -> Self {
        let (o, z) = (R::one(), R::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn zeros() -> Self {
        Self {
            m: [[R::zero(); 3]; 3],
        }
    }

    /// Outer product `a * b^T`.
    pub fn outer(a: &Vec3<R>, b: &Vec3<R>) -> Self {
        let av = [a.x, a.y, a.z];
        let bv = [b.x, b.y, b.z];
        let mut m = [[R::zero(); 3]; 3];
        for (i, ai) in av.iter().enumerate() {
            for (j, bj) in bv.iter().enumerate() {
                m[i][j] = *ai * *bj;
            }
        }
        Self { m }
    }

    pub fn mul_vec(&self, v: &Vec3<R>) -> Vec3<R> {
        let x = [v.x, v.y, v.z];
        let mut out = [R::zero(); 3];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = row[0] * x[0] + row[1] * x[1] + row[2] * x[2];
        }
        Vec3::new(out[0], out[1], out[2])
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut m = self.m;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += o.m[i][j];
            }
        }
        Self { m }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut m = self.m;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= o.m[i][j];
            }
        }
        Self { m }
    }

    pub fn scaled(&self, s: R) -> Self {
        let mut m = self.m;
        for row in &mut m {
            for e in row.iter_mut() {
                *e *= s;
            }
        }
        Self { m }
    }

    /// Frobenius norm (upper bound on the operator 2-norm).
    pub fn frobenius_norm(&self) -> R {
        let mut acc = R::zero();
        for row in &self.m {
            for e in row {
                acc += *e * *e;
            }
        }
        acc.sqrt()
    }
}

/// Inflated super-ellipsoid obstacle with rigid horizontal motion.
///
/// The implicit field in the obstacle frame is
/// `(x/(la*a))^(2p) + (y/(lb*b))^(2q) + (z/(lc*c))^(2r)`,
/// with world points first translated to the center and rotated by `-yaw`
/// about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperEllipsoidObstacle<R> {
    pub center: Vec3<R>,
    /// Semi-axes (m), all > 0; `c` is the vertical semi-thickness.
    pub a: R,
    pub b: R,
    pub c: R,
    /// Shape exponents, integers in [1, 4]; the surface term uses `2p` etc.
    pub p: u32,
    pub q: u32,
    pub r: u32,
    /// Safety inflation factors, all >= 1.
    pub lambda_a: R,
    pub lambda_b: R,
    pub lambda_c: R,
    /// Horizontal orientation of the principal axis (rad).
    pub yaw: R,
    /// Rigid translation velocity of the shadow region (m/s).
    pub velocity: Vec3<R>,
}

impl<R: Real> SuperEllipsoidObstacle<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        center: Vec3<R>,
        semi_axes: (R, R, R),
        exponents: (u32, u32, u32),
        inflation: (R, R, R),
        yaw: R,
        velocity: Vec3<R>,
    ) -> Result<Self> {
        let (a, b, c) = semi_axes;
        let (p, q, r) = exponents;
        let (la, lb, lc) = inflation;
        if !(a > R::zero() && b > R::zero() && c > R::zero()) {
            return Err(Error::InvalidParameter("semi-axes must be positive".into()));
        }
        if c > a.min(b) {
            return Err(Error::InvalidParameter(
                "vertical semi-axis c must not exceed min(a, b)".into(),
            ));
        }
        for e in [p, q, r] {
            if !(1..=4).contains(&e) {
                return Err(Error::InvalidParameter(
                    "exponents must be integers in [1, 4]".into(),
                ));
            }
        }
        if la < R::one() || lb < R::one() || lc < R::one() {
            return Err(Error::InvalidParameter(
                "inflation factors must be >= 1".into(),
            ));
        }
        if !center.is_finite() || !velocity.is_finite() || !yaw.is_finite() {
            return Err(Error::InvalidParameter("non-finite obstacle state".into()));
        }
        Ok(Self {
            center,
            a,
            b,
            c,
            p,
            q,
            r,
            lambda_a: la,
            lambda_b: lb,
            lambda_c: lc,
            yaw,
            velocity,
        })
    }

    /// Sphere of radius `radius` with unit exponents and no inflation.
    pub fn sphere(center: Vec3<R>, radius: R) -> Result<Self> {
        Self::new(
            center,
            (radius, radius, radius),
            (1, 1, 1),
            (R::one(), R::one(), R::one()),
            R::zero(),
            Vec3::zero(),
        )
    }

    /// World point expressed in the obstacle's local (rotated) frame.
    #[inline]
    fn to_local(&self, p: &Vec3<R>) -> Vec3<R> {
        let d = *p - self.center;
        let (s, c) = (-self.yaw).sin_cos();
        Vec3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z)
    }

    /// Rotate a local-frame vector back into the world frame.
    #[inline]
    fn to_world_dir(&self, v: &Vec3<R>) -> Vec3<R> {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    #[inline]
    fn inflated_axes(&self) -> (R, R, R) {
        (
            self.lambda_a * self.a,
            self.lambda_b * self.b,
            self.lambda_c * self.c,
        )
    }
}

#[inline]
fn clamped_ratio<R: Real>(v: R, axis: R) -> R {
    let ratio = (v / axis).abs();
    ratio.min(R::of(RATIO_CLAMP))
}

/// Implicit obstacle field: 0 at the center, 1 on the inflated surface,
/// strictly increasing along rays from the center.
pub fn gamma<R: Real>(p: &Vec3<R>, obs: &SuperEllipsoidObstacle<R>) -> R {
    let local = obs.to_local(p);
    let (ax, ay, az) = obs.inflated_axes();
    let tx = clamped_ratio(local.x, ax).powi(2 * obs.p as i32);
    let ty = clamped_ratio(local.y, ay).powi(2 * obs.q as i32);
    let tz = clamped_ratio(local.z, az).powi(2 * obs.r as i32);
    tx + ty + tz
}

/// Analytic gradient of [`gamma`] in the world frame (1/m).
///
/// The gradient at the exact center is the zero vector (removable
/// singularity by convention); planner code prunes interior points before
/// querying it.
pub fn gamma_gradient<R: Real>(p: &Vec3<R>, obs: &SuperEllipsoidObstacle<R>) -> Vec3<R> {
    let local = obs.to_local(p);
    let (ax, ay, az) = obs.inflated_axes();
    let term = |v: R, axis: R, e: u32| -> R {
        let ratio = v / axis;
        if ratio.abs() >= R::of(RATIO_CLAMP) {
            // clamped region is flat
            return R::zero();
        }
        // d/dv (v/axis)^(2e) = 2e * v^(2e-1) / axis^(2e)
        let e2 = 2 * e as i32;
        R::of_usize(2 * e as usize) * ratio.powi(e2 - 1) / axis
    };
    let g_local = Vec3::new(
        term(local.x, ax, obs.p),
        term(local.y, ay, obs.q),
        term(local.z, az, obs.r),
    );
    obs.to_world_dir(&g_local)
}

/// True iff `gamma > 1` for every obstacle (vacuously true for none).
pub fn is_feasible<R: Real>(p: &Vec3<R>, obstacles: &[SuperEllipsoidObstacle<R>]) -> bool {
    obstacles.iter().all(|o| gamma(p, o) > R::one())
}

/// Smallest `gamma` over the obstacle set and the index attaining it
/// (ties broken by lowest index).
pub fn min_gamma<R: Real>(
    p: &Vec3<R>,
    obstacles: &[SuperEllipsoidObstacle<R>],
) -> Result<(R, usize)> {
    if obstacles.is_empty() {
        return Err(Error::NoObstacles);
    }
    let mut best = (gamma(p, &obstacles[0]), 0usize);
    for (i, o) in obstacles.iter().enumerate().skip(1) {
        let g = gamma(p, o);
        if g < best.0 {
            best = (g, i);
        }
    }
    Ok(best)
}
