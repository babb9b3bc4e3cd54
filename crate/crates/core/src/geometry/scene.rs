use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::scalar::Scalar;

/// At most this many reflectors stand on a reflective plane.
pub const MAX_REFLECTORS: usize = 2;

/// Declarative scene: one textured shape, optionally with reflectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SceneSpec<S> {
    #[serde(flatten)]
    pub shape: SceneShape<S>,
    #[serde(default = "default_background")]
    pub background_color: [S; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "S: Scalar")]
pub enum SceneShape<S> {
    /// Axis-aligned cube centered at the origin.
    Cube { half_extent: S },
    /// Sphere centered at the origin.
    Sphere { radius: S },
    /// Square textured plane `y = 0`, `|x|, |z| <= half_extent`, with mirrors standing on it.
    ReflectivePlane {
        half_extent: S,
        #[serde(default)]
        reflectors: Vec<Reflector<S>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound = "S: Scalar")]
pub enum Reflector<S> {
    Cylinder(CylinderSpec<S>),
    Mirror(MirrorSpec<S>),
}

/// Solid mirrored cylinder standing on the plane. `center` is `(x, z)` of the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CylinderSpec<S> {
    pub center: [S; 2],
    pub radius: S,
    pub height: S,
    #[serde(default = "default_axis")]
    pub axis: [S; 3],
}

/// Thin convex mirror: an arc of a cylinder of radius `curvature_radius`.
///
/// `center` is the `(x, z)` base of the arc's midpoint, `facing` the azimuth (radians,
/// from `+z` toward `+x`) of its outward normal there, `arc_extent` the arc's angular
/// width in radians. Both sides reflect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct MirrorSpec<S> {
    pub center: [S; 2],
    pub curvature_radius: S,
    pub arc_extent: S,
    pub height: S,
    #[serde(default = "default_axis")]
    pub axis: [S; 3],
    #[serde(default)]
    pub facing: S,
}

fn default_axis<S: Scalar>() -> [S; 3] {
    [S::zero(), S::one(), S::zero()]
}

fn default_background<S: Scalar>() -> [S; 3] {
    [S::one(); 3]
}

fn positive<S: Scalar>(name: &str, v: S) -> Result<(), GeometryError> {
    if v.is_finite() && v > S::zero() {
        Ok(())
    } else {
        Err(GeometryError::InvalidScene(format!("{name} must be > 0, got {v}")))
    }
}

fn unit_axis<S: Scalar>(axis: [S; 3]) -> Result<(), GeometryError> {
    let n = axis.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
    if (n - 1.0).abs() <= 1e-6 {
        Ok(())
    } else {
        Err(GeometryError::InvalidScene(format!(
            "reflector axis must be unit length, |axis| = {n}"
        )))
    }
}

impl<S: Scalar> SceneSpec<S> {
    pub fn cube(half_extent: S) -> Self {
        Self {
            shape: SceneShape::Cube { half_extent },
            background_color: default_background(),
        }
    }

    pub fn sphere(radius: S) -> Self {
        Self {
            shape: SceneShape::Sphere { radius },
            background_color: default_background(),
        }
    }

    pub fn reflective_plane(half_extent: S, reflectors: Vec<Reflector<S>>) -> Self {
        Self {
            shape: SceneShape::ReflectivePlane {
                half_extent,
                reflectors,
            },
            background_color: default_background(),
        }
    }

    pub fn with_background(mut self, rgb: [S; 3]) -> Self {
        self.background_color = rgb;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self
            .background_color
            .iter()
            .any(|c| !(c.as_f64() >= 0.0 && c.as_f64() <= 1.0))
        {
            return Err(GeometryError::InvalidScene(
                "background_color must lie in [0,1]^3".into(),
            ));
        }
        match &self.shape {
            SceneShape::Cube { half_extent } => positive("half_extent", *half_extent),
            SceneShape::Sphere { radius } => positive("radius", *radius),
            SceneShape::ReflectivePlane {
                half_extent,
                reflectors,
            } => {
                positive("half_extent", *half_extent)?;
                if reflectors.len() > MAX_REFLECTORS {
                    return Err(GeometryError::InvalidScene(format!(
                        "at most {MAX_REFLECTORS} reflectors, got {}",
                        reflectors.len()
                    )));
                }
                for r in reflectors {
                    match r {
                        Reflector::Cylinder(c) => {
                            positive("cylinder.radius", c.radius)?;
                            positive("cylinder.height", c.height)?;
                            unit_axis(c.axis)?;
                        }
                        Reflector::Mirror(m) => {
                            positive("mirror.curvature_radius", m.curvature_radius)?;
                            positive("mirror.arc_extent", m.arc_extent)?;
                            positive("mirror.height", m.height)?;
                            unit_axis(m.axis)?;
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Number of independently textured surfaces (cube faces, or one).
    pub fn num_surfaces(&self) -> usize {
        match self.shape {
            SceneShape::Cube { .. } => 6,
            _ => 1,
        }
    }

    /// Diagonal of the textured shape's bounding box.
    pub fn diagonal(&self) -> S {
        let three = S::lit(3.0).sqrt();
        match &self.shape {
            SceneShape::Cube { half_extent } => S::lit(2.0) * three * *half_extent,
            SceneShape::Sphere { radius } => S::lit(2.0) * three * *radius,
            SceneShape::ReflectivePlane { half_extent, .. } => {
                S::lit(2.0) * S::lit(2.0).sqrt() * *half_extent
            }
        }
    }

    pub fn has_reflectors(&self) -> bool {
        matches!(&self.shape, SceneShape::ReflectivePlane { reflectors, .. } if !reflectors.is_empty())
    }
}
