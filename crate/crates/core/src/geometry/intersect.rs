//! Analytic ray casting against the supported scenes.
//!
//! Cube faces are numbered `+X, -X, +Y, -Y, +Z, -Z` (ids 0..5). Each face maps the
//! two remaining axes to `[0,1]^2` so that `u_axis x v_axis` is the outward normal.
//! Spheres use an equirectangular chart `(azimuth / 2pi, polar / pi)` with the seam on
//! the `-x` meridian. The reflective plane is `y = 0` with `u` along `+x` and `v`
//! along `-z`.

use super::camera::Ray;
use super::scene::{CylinderSpec, MirrorSpec, Reflector, SceneShape, SceneSpec};
use super::vec3::Vec3;
use crate::scalar::Scalar;

/// Reflector hits with `|d . n|` below this are treated as misses.
pub const TANGENT_EPS: f64 = 1e-9;

/// Where a camera ray lands on the textured surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit<S> {
    pub surface_id: u32,
    pub uv: [S; 2],
    /// Unit normal of the textured surface at the hit.
    pub normal: Vec3<S>,
    pub position: Vec3<S>,
    /// Total path length, summed over both segments after a bounce.
    pub ray_param: S,
    pub bounce_count: u8,
}

/// Mirror reflection `d - 2 (d . n) n`, renormalized.
#[inline]
pub fn reflect<S: Scalar>(direction: Vec3<S>, normal: Vec3<S>) -> Vec3<S> {
    (direction - normal * (S::lit(2.0) * direction.dot(normal))).normalized()
}

/// Nearest hit of `ray` against the scene's textured surface, following at most one
/// reflection off a reflector.
pub fn intersect<S: Scalar>(scene: &SceneSpec<S>, ray: &Ray<S>) -> Option<SurfaceHit<S>> {
    match &scene.shape {
        SceneShape::Cube { half_extent } => intersect_cube(*half_extent, ray),
        SceneShape::Sphere { radius } => intersect_sphere(*radius, ray),
        SceneShape::ReflectivePlane {
            half_extent,
            reflectors,
        } => intersect_reflective_plane(*half_extent, reflectors, ray),
    }
}

/// `(normal, u_axis, v_axis)` of a cube face.
pub fn cube_face_frame<S: Scalar>(face: u32) -> (Vec3<S>, Vec3<S>, Vec3<S>) {
    let e = |i: usize, s: f64| {
        let mut a = [0.0; 3];
        a[i] = s;
        Vec3::from_f64(a[0], a[1], a[2])
    };
    let (x, y, z) = (0, 1, 2);
    match face {
        0 => (e(x, 1.0), e(y, 1.0), e(z, 1.0)),
        1 => (e(x, -1.0), e(z, 1.0), e(y, 1.0)),
        2 => (e(y, 1.0), e(z, 1.0), e(x, 1.0)),
        3 => (e(y, -1.0), e(x, 1.0), e(z, 1.0)),
        4 => (e(z, 1.0), e(x, 1.0), e(y, 1.0)),
        5 => (e(z, -1.0), e(y, 1.0), e(x, 1.0)),
        _ => panic!("cube face id {face} out of range"),
    }
}

pub fn cube_uv<S: Scalar>(face: u32, p: Vec3<S>, half_extent: S) -> [S; 2] {
    let (_, u_axis, v_axis) = cube_face_frame::<S>(face);
    let half = S::lit(0.5);
    let to_unit = |c: S| ((c / half_extent + S::one()) * half).max(S::zero()).min(S::one());
    [to_unit(p.dot(u_axis)), to_unit(p.dot(v_axis))]
}

/// Inverse of [`cube_uv`]: the point on `face` with texture coordinate `uv`.
pub fn cube_point<S: Scalar>(face: u32, uv: [S; 2], half_extent: S) -> Vec3<S> {
    let (n, u_axis, v_axis) = cube_face_frame::<S>(face);
    let two = S::lit(2.0);
    n * half_extent
        + u_axis * ((two * uv[0] - S::one()) * half_extent)
        + v_axis * ((two * uv[1] - S::one()) * half_extent)
}

pub fn sphere_uv<S: Scalar>(p: Vec3<S>, radius: S) -> [S; 2] {
    let two_pi = S::TAU();
    let azimuth = p.x.atan2(p.z) + S::FRAC_PI_2();
    let azimuth = ((azimuth % two_pi) + two_pi) % two_pi;
    let polar = (p.y / radius).max(-S::one()).min(S::one()).acos();
    [
        (azimuth / two_pi).min(S::one()),
        (polar / S::PI()).min(S::one()),
    ]
}

pub fn sphere_point<S: Scalar>(uv: [S; 2], radius: S) -> Vec3<S> {
    let azimuth = uv[0] * S::TAU() - S::FRAC_PI_2();
    let polar = uv[1] * S::PI();
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vec3::new(sp * sa, cp, sp * ca) * radius
}

pub fn plane_uv<S: Scalar>(p: Vec3<S>, half_extent: S) -> [S; 2] {
    let half = S::lit(0.5);
    let clamp = |v: S| v.max(S::zero()).min(S::one());
    [
        clamp((p.x / half_extent + S::one()) * half),
        clamp((S::one() - p.z / half_extent) * half),
    ]
}

fn intersect_cube<S: Scalar>(h: S, ray: &Ray<S>) -> Option<SurfaceHit<S>> {
    let o = ray.origin.to_array();
    let d = ray.direction.to_array();
    let mut t_near = S::neg_infinity();
    let mut t_far = S::infinity();
    let mut axis = 0usize;
    for i in 0..3 {
        if d[i] == S::zero() {
            if o[i].abs() > h {
                return None;
            }
            continue;
        }
        let t1 = (-h - o[i]) / d[i];
        let t2 = (h - o[i]) / d[i];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_near {
            t_near = lo;
            axis = i;
        }
        t_far = t_far.min(hi);
    }
    if t_near > t_far || t_near <= S::zero() {
        return None;
    }
    // entering through the face whose outward normal opposes the direction
    let face = 2 * axis as u32 + u32::from(d[axis] > S::zero());
    let position = ray.at(t_near);
    let (normal, _, _) = cube_face_frame(face);
    Some(SurfaceHit {
        surface_id: face,
        uv: cube_uv(face, position, h),
        normal,
        position,
        ray_param: t_near,
        bounce_count: 0,
    })
}

fn intersect_sphere<S: Scalar>(r: S, ray: &Ray<S>) -> Option<SurfaceHit<S>> {
    let b = ray.origin.dot(ray.direction);
    let c = ray.origin.norm_squared() - r * r;
    if c < S::zero() {
        return None;
    }
    let disc = b * b - c;
    if disc < S::zero() {
        return None;
    }
    let t = -b - disc.sqrt();
    if t <= S::zero() {
        return None;
    }
    let position = ray.at(t);
    Some(SurfaceHit {
        surface_id: 0,
        uv: sphere_uv(position, r),
        normal: (position / r).normalized(),
        position,
        ray_param: t,
        bounce_count: 0,
    })
}

/// Hit of a ray with the bounded plane `y = 0`, as `(t, point)`.
fn hit_plane<S: Scalar>(e: S, origin: Vec3<S>, dir: Vec3<S>, allow_zero: bool) -> Option<(S, Vec3<S>)> {
    if dir.y == S::zero() {
        return None;
    }
    let t = -origin.y / dir.y;
    if t < S::zero() || (!allow_zero && t == S::zero()) {
        return None;
    }
    let p = origin + dir * t;
    if p.x.abs() > e || p.z.abs() > e {
        return None;
    }
    Some((t, p))
}

fn intersect_reflective_plane<S: Scalar>(
    e: S,
    reflectors: &[Reflector<S>],
    ray: &Ray<S>,
) -> Option<SurfaceHit<S>> {
    let up = Vec3::new(S::zero(), S::one(), S::zero());
    let direct = hit_plane(e, ray.origin, ray.direction, false);

    let mut mirror: Option<(S, Vec3<S>)> = None;
    for r in reflectors {
        let hit = match r {
            Reflector::Cylinder(c) => hit_cylinder(c, ray),
            Reflector::Mirror(m) => hit_mirror(m, ray),
        };
        if let Some((t, n)) = hit {
            if mirror.is_none_or(|(best, _)| t < best) {
                mirror = Some((t, n));
            }
        }
    }

    match (direct, mirror) {
        (Some((tp, p)), m) if m.is_none_or(|(tm, _)| tp <= tm) => Some(SurfaceHit {
            surface_id: 0,
            uv: plane_uv(p, e),
            normal: up,
            position: p,
            ray_param: tp,
            bounce_count: 0,
        }),
        (_, Some((tm, n))) => {
            if ray.direction.dot(n).abs().as_f64() < TANGENT_EPS {
                return None;
            }
            let at = ray.at(tm);
            let bounced = reflect(ray.direction, n);
            let (t2, p) = hit_plane(e, at, bounced, true)?;
            Some(SurfaceHit {
                surface_id: 0,
                uv: plane_uv(p, e),
                normal: up,
                position: p,
                ray_param: tm + t2,
                bounce_count: 1,
            })
        }
        _ => None,
    }
}

fn base_point<S: Scalar>(center: [S; 2]) -> Vec3<S> {
    Vec3::new(center[0], S::zero(), center[1])
}

/// Components of a ray relative to a vertical-ish cylinder frame.
struct AxisFrame<S> {
    o_perp: Vec3<S>,
    d_perp: Vec3<S>,
    o_along: S,
    d_along: S,
}

fn axis_frame<S: Scalar>(base: Vec3<S>, axis: Vec3<S>, ray: &Ray<S>) -> AxisFrame<S> {
    let oc = ray.origin - base;
    let o_along = oc.dot(axis);
    let d_along = ray.direction.dot(axis);
    AxisFrame {
        o_perp: oc - axis * o_along,
        d_perp: ray.direction - axis * d_along,
        o_along,
        d_along,
    }
}

/// Roots of the infinite-cylinder quadratic, ascending.
fn cylinder_roots<S: Scalar>(f: &AxisFrame<S>, radius: S) -> Option<[S; 2]> {
    let a = f.d_perp.norm_squared();
    if a <= S::epsilon() * S::epsilon() {
        return None;
    }
    let b = S::lit(2.0) * f.o_perp.dot(f.d_perp);
    let c = f.o_perp.norm_squared() - radius * radius;
    let disc = b * b - S::lit(4.0) * a * c;
    if disc < S::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let two_a = S::lit(2.0) * a;
    Some([(-b - sq) / two_a, (-b + sq) / two_a])
}

fn hit_cylinder<S: Scalar>(c: &CylinderSpec<S>, ray: &Ray<S>) -> Option<(S, Vec3<S>)> {
    let axis = Vec3::from_array(c.axis).normalized();
    let f = axis_frame(base_point(c.center), axis, ray);
    let mut best: Option<(S, Vec3<S>)> = None;

    if let Some(roots) = cylinder_roots(&f, c.radius) {
        for t in roots {
            if t <= S::zero() {
                continue;
            }
            let h = f.o_along + f.d_along * t;
            if h >= S::zero() && h <= c.height {
                best = Some((t, (f.o_perp + f.d_perp * t).normalized()));
                break;
            }
        }
    }

    // top cap, mirrored like the wall
    if f.d_along != S::zero() {
        let t = (c.height - f.o_along) / f.d_along;
        if t > S::zero() && best.is_none_or(|(tb, _)| t < tb) {
            let radial = f.o_perp + f.d_perp * t;
            if radial.norm_squared() <= c.radius * c.radius {
                let n = if f.d_along < S::zero() { axis } else { -axis };
                best = Some((t, n));
            }
        }
    }
    best
}

fn hit_mirror<S: Scalar>(m: &MirrorSpec<S>, ray: &Ray<S>) -> Option<(S, Vec3<S>)> {
    let axis = Vec3::from_array(m.axis).normalized();
    let (sf, cf) = m.facing.sin_cos();
    let facing = Vec3::new(sf, S::zero(), cf);
    let facing = (facing - axis * facing.dot(axis)).normalized();
    let curvature_center = base_point(m.center) - facing * m.curvature_radius;
    let f = axis_frame(curvature_center, axis, ray);
    let cos_half = (m.arc_extent * S::lit(0.5)).cos();
    let roots = cylinder_roots(&f, m.curvature_radius)?;
    for t in roots {
        if t <= S::zero() {
            continue;
        }
        let h = f.o_along + f.d_along * t;
        if h < S::zero() || h > m.height {
            continue;
        }
        let radial = (f.o_perp + f.d_perp * t).normalized();
        if radial.dot(facing) >= cos_half {
            return Some((t, radial));
        }
    }
    None
}
