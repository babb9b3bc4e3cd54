use serde::{Deserialize, Serialize};

use super::vec3::{Mat3, Vec3};
use super::GeometryError;
use crate::scalar::Scalar;

/// Pinhole camera.
///
/// `rotation` holds Euler angles in radians as `[pitch, yaw, roll]` (about the
/// x, y and z axes). The camera-to-world rotation is `Ry(yaw) * Rx(pitch) * Rz(roll)`;
/// in camera space the camera looks down `-z` with `+y` up. `fov` is the vertical
/// field of view in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CameraPose<S> {
    pub rotation: [S; 3],
    pub translation: [S; 3],
    pub fov: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<S> {
    pub origin: Vec3<S>,
    pub direction: Vec3<S>,
}

impl<S: Scalar> Ray<S> {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3<S>, direction: Vec3<S>) -> Self {
        Self {
            origin,
            direction: direction.normalized(),
        }
    }

    #[inline]
    pub fn at(&self, t: S) -> Vec3<S> {
        self.origin + self.direction * t
    }
}

impl<S: Scalar> CameraPose<S> {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fov = self.fov.as_f64();
        if !(fov > 0.0 && fov < 180.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "fov {fov} outside (0, 180)"
            )));
        }
        if self
            .rotation
            .iter()
            .chain(self.translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(GeometryError::InvalidCamera(
                "non-finite rotation or translation".into(),
            ));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target` with zero roll.
    pub fn look_at(eye: Vec3<S>, target: Vec3<S>, fov: S) -> Self {
        let f = (target - eye).normalized();
        let pitch = f.y.max(-S::one()).min(S::one()).asin();
        let yaw = (-f.x).atan2(-f.z);
        Self {
            rotation: [pitch, yaw, S::zero()],
            translation: eye.to_array(),
            fov,
        }
    }

    /// Camera on a sphere around `target`; azimuth is measured from `+z` toward `+x`,
    /// elevation from the horizontal plane, both in radians.
    pub fn orbit(target: Vec3<S>, distance: S, azimuth: S, elevation: S, fov: S) -> Self {
        let (sa, ca) = azimuth.sin_cos();
        let (se, ce) = elevation.sin_cos();
        let eye = target + Vec3::new(ce * sa, se, ce * ca) * distance;
        Self::look_at(eye, target, fov)
    }

    /// The same camera rotated about the world `y` axis through the origin.
    pub fn rotated_about_y(&self, delta: S) -> Self {
        let rot = Mat3::rot_y(delta);
        let t = rot.mul_vec(Vec3::from_array(self.translation));
        Self {
            rotation: [self.rotation[0], self.rotation[1] + delta, self.rotation[2]],
            translation: t.to_array(),
            fov: self.fov,
        }
    }

    pub fn orientation(&self) -> Mat3<S> {
        let [pitch, yaw, roll] = self.rotation;
        Mat3::rot_y(yaw)
            .mul_mat(&Mat3::rot_x(pitch))
            .mul_mat(&Mat3::rot_z(roll))
    }

    pub fn position(&self) -> Vec3<S> {
        Vec3::from_array(self.translation)
    }

    pub fn forward(&self) -> Vec3<S> {
        -self.orientation().col(2)
    }

    pub fn pixel_ray(&self, x: usize, y: usize, width: usize, height: usize) -> Ray<S> {
        let basis = self.orientation();
        self.pixel_ray_with(&basis, x, y, width, height)
    }

    #[inline]
    fn pixel_ray_with(
        &self,
        basis: &Mat3<S>,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    ) -> Ray<S> {
        let two = S::lit(2.0);
        let half = S::lit(0.5);
        let tan_half = (self.fov.to_radians() * half).tan();
        let w = S::lit(width as f64);
        let h = S::lit(height as f64);
        let aspect = w / h;
        let px = (two * (S::lit(x as f64) + half) / w - S::one()) * tan_half * aspect;
        let py = (S::one() - two * (S::lit(y as f64) + half) / h) * tan_half;
        let dir = basis.col(0) * px + basis.col(1) * py - basis.col(2);
        Ray::new(self.position(), dir)
    }

    pub fn cast<T: Scalar>(&self) -> CameraPose<T> {
        use crate::scalar::cast;
        CameraPose {
            rotation: self.rotation.map(cast),
            translation: self.translation.map(cast),
            fov: cast(self.fov),
        }
    }
}

/// Pinhole rays through pixel centers, row-major with row 0 at the top.
pub fn generate_rays<S: Scalar>(camera: &CameraPose<S>, width: usize, height: usize) -> Vec<Ray<S>> {
    let basis = camera.orientation();
    let mut rays = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            rays.push(camera.pixel_ray_with(&basis, x, y, width, height));
        }
    }
    rays
}
