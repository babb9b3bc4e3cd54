//! Brute-force ray marching oracle.
//!
//! Steps along the ray at a fixed spacing, watches every primitive for a change of
//! state (entering a solid, crossing a thin surface) and refines the first change by
//! bisection. Charts follow the documented conventions and are re-derived here.

use std::f64::consts::{PI, TAU};

use illusion_core::geometry::{Reflector, SceneShape, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleHit {
    pub surface_id: u32,
    pub uv: [f64; 2],
    pub bounced: bool,
}

type V = [f64; 3];

fn add(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn mul(a: V, s: f64) -> V {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn unit(a: V) -> V {
    mul(a, 1.0 / dot(a, a).sqrt())
}

/// Face axes `(u, v)` per face `+X, -X, +Y, -Y, +Z, -Z`.
const CUBE_AXES: [(usize, usize); 6] = [(1, 2), (2, 1), (2, 0), (0, 2), (0, 1), (1, 0)];

pub fn cube_chart(p: V, h: f64) -> (u32, [f64; 2]) {
    let axis = (0..3)
        .max_by(|&a, &b| p[a].abs().partial_cmp(&p[b].abs()).unwrap())
        .unwrap();
    let face = 2 * axis as u32 + u32::from(p[axis] < 0.0);
    let (ua, va) = CUBE_AXES[face as usize];
    (face, [(p[ua] / h + 1.0) / 2.0, (p[va] / h + 1.0) / 2.0])
}

pub fn sphere_chart(p: V, r: f64) -> [f64; 2] {
    let az = (p[0].atan2(p[2]) + PI / 2.0).rem_euclid(TAU);
    [az / TAU, (p[1] / r).clamp(-1.0, 1.0).acos() / PI]
}

pub fn plane_chart(p: V, e: f64) -> [f64; 2] {
    [(p[0] / e + 1.0) / 2.0, (1.0 - p[2] / e) / 2.0]
}

/// Something the marcher watches along the ray.
enum Prim {
    /// Solid given by an inside test.
    Solid(Box<dyn Fn(V) -> bool>),
    /// Thin surface: zero set of `f`, valid where `valid` holds.
    Thin(Box<dyn Fn(V) -> f64>, Box<dyn Fn(V) -> bool>),
}

impl Prim {
    fn state(&self, p: V) -> bool {
        match self {
            Prim::Solid(inside) => inside(p),
            Prim::Thin(f, _) => f(p) >= 0.0,
        }
    }

    fn accepts(&self, p: V) -> bool {
        match self {
            Prim::Solid(_) => true,
            Prim::Thin(_, valid) => valid(p),
        }
    }
}

/// First state change of any primitive along `o + t d`, `t` in `(0, t_max]`, as
/// `(primitive index, t)`.
fn march_prims(prims: &[Prim], o: V, d: V, step: f64, t_max: f64) -> Option<(usize, f64)> {
    let at = |t: f64| add(o, mul(d, t));
    let mut prev: Vec<bool> = prims.iter().map(|p| p.state(o)).collect();
    let mut t_prev = 0.0;
    let n = (t_max / step).ceil() as usize;
    for i in 1..=n {
        let t = i as f64 * step;
        let p = at(t);
        let mut best: Option<(usize, f64)> = None;
        for (k, prim) in prims.iter().enumerate() {
            let s = prim.state(p);
            if s == prev[k] {
                continue;
            }
            // entering solids only; thin surfaces both ways
            if matches!(prim, Prim::Solid(_)) && !s {
                prev[k] = s;
                continue;
            }
            let (mut lo, mut hi) = (t_prev, t);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if prim.state(at(mid)) == s {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if prim.accepts(at(hi)) && best.is_none_or(|(_, tb)| hi < tb) {
                best = Some((k, hi));
            }
            prev[k] = s;
        }
        if best.is_some() {
            return best;
        }
        t_prev = t;
    }
    None
}

struct Cyl {
    base: V,
    axis: V,
    radius: f64,
    height: f64,
}

impl Cyl {
    fn split(&self, p: V) -> (f64, V) {
        let rel = sub(p, self.base);
        let along = dot(rel, self.axis);
        (along, sub(rel, mul(self.axis, along)))
    }
}

/// Returns the hit and, for reflector hits, the surface normal there.
pub fn march_ray(scene: &SceneSpec<f64>, origin: V, dir: V, step: f64, t_max: f64) -> Option<OracleHit> {
    let d = unit(dir);
    match &scene.shape {
        SceneShape::Cube { half_extent } => {
            let h = *half_extent;
            let prims = [Prim::Solid(Box::new(move |p: V| p.iter().all(|c| c.abs() <= h)))];
            let (_, t) = march_prims(&prims, origin, d, step, t_max)?;
            let (face, uv) = cube_chart(add(origin, mul(d, t)), h);
            Some(OracleHit { surface_id: face, uv, bounced: false })
        }
        SceneShape::Sphere { radius } => {
            let r = *radius;
            let prims = [Prim::Solid(Box::new(move |p: V| dot(p, p) <= r * r))];
            let (_, t) = march_prims(&prims, origin, d, step, t_max)?;
            Some(OracleHit {
                surface_id: 0,
                uv: sphere_chart(add(origin, mul(d, t)), r),
                bounced: false,
            })
        }
        SceneShape::ReflectivePlane { half_extent, reflectors } => {
            let e = *half_extent;
            let plane = || Prim::Thin(Box::new(|p: V| p[1]), Box::new(move |p: V| p[0].abs() <= e && p[2].abs() <= e));
            let mut prims = vec![plane()];
            // normal of each reflector at a point on it
            let mut normals: Vec<Box<dyn Fn(V) -> V>> = vec![Box::new(|_| [0.0, 1.0, 0.0])];
            for r in reflectors {
                match r {
                    Reflector::Cylinder(c) => {
                        let cyl = Cyl {
                            base: [c.center[0], 0.0, c.center[1]],
                            axis: unit(c.axis),
                            radius: c.radius,
                            height: c.height,
                        };
                        let cyl = std::rc::Rc::new(cyl);
                        let inside = cyl.clone();
                        prims.push(Prim::Solid(Box::new(move |p| {
                            let (along, perp) = inside.split(p);
                            (0.0..=inside.height).contains(&along) && dot(perp, perp) <= inside.radius * inside.radius
                        })));
                        normals.push(Box::new(move |p| {
                            let (along, perp) = cyl.split(p);
                            let radial = dot(perp, perp).sqrt();
                            if (along - cyl.height).abs() < (radial - cyl.radius).abs() {
                                cyl.axis
                            } else {
                                unit(perp)
                            }
                        }));
                    }
                    Reflector::Mirror(m) => {
                        let axis = unit(m.axis);
                        let f = [m.facing.sin(), 0.0, m.facing.cos()];
                        let facing = unit(sub(f, mul(axis, dot(f, axis))));
                        let base = [m.center[0], 0.0, m.center[1]];
                        let cyl = std::rc::Rc::new(Cyl {
                            base: sub(base, mul(facing, m.curvature_radius)),
                            axis,
                            radius: m.curvature_radius,
                            height: m.height,
                        });
                        let half_arc = 0.5 * m.arc_extent;
                        let (a, b, c2) = (cyl.clone(), cyl.clone(), cyl);
                        prims.push(Prim::Thin(
                            Box::new(move |p| {
                                let (_, perp) = a.split(p);
                                dot(perp, perp).sqrt() - a.radius
                            }),
                            Box::new(move |p| {
                                let (along, perp) = b.split(p);
                                let ang = (dot(unit(perp), facing)).clamp(-1.0, 1.0).acos();
                                (0.0..=b.height).contains(&along) && ang <= half_arc
                            }),
                        ));
                        normals.push(Box::new(move |p| unit(c2.split(p).1)));
                    }
                }
            }
            let (k, t) = march_prims(&prims, origin, d, step, t_max)?;
            let p = add(origin, mul(d, t));
            if k == 0 {
                return Some(OracleHit { surface_id: 0, uv: plane_chart(p, e), bounced: false });
            }
            let n = normals[k](p);
            let r = unit(sub(d, mul(n, 2.0 * dot(d, n))));
            let (_, t2) = march_prims(&[plane()], p, r, step, t_max)?;
            Some(OracleHit {
                surface_id: 0,
                uv: plane_chart(add(p, mul(r, t2)), e),
                bounced: true,
            })
        }
    }
}
