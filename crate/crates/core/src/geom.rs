//! Angle conventions and circular/axial distances.
//!
//! Image frame: `x` grows to the right (columns), `y` grows downward (rows).
//! Orientations are measured in degrees clockwise from image-up, so heading
//! `a` points along `(dx, dy) = (sin a, -cos a)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Heading in degrees, normalized into `[0, 360)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct OrientationDeg<T = f64>(T);

/// Undirected body axis in degrees, normalized into `[0, 180)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct AxisDeg<T = f64>(T);

fn wrap<T: Scalar>(raw: T, period: T) -> T {
    let mut r = raw % period;
    if r < T::zero() {
        r += period;
    }
    // -tiny % p + p rounds to p
    if r >= period {
        r = T::zero();
    }
    r
}

/// Reduces `raw` degrees into `[0, 360)`.
pub fn normalize_orientation<T: Scalar>(raw: T) -> Result<OrientationDeg<T>> {
    OrientationDeg::new(raw)
}

impl<T: Scalar> OrientationDeg<T> {
    pub fn new(raw: T) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::InvalidAngle(raw.as_f64()));
        }
        Ok(Self(wrap(raw, T::of(360.0))))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// The undirected axis this heading lies on.
    pub fn axis(self) -> AxisDeg<T> {
        AxisDeg(wrap(self.0, T::of(180.0)))
    }

    /// Unit vector `(dx, dy)` in image coordinates.
    pub fn unit_vector(self) -> (T, T) {
        let r = self.0.to_radians();
        (r.sin(), -r.cos())
    }

    /// Heading of the image-space vector `(dx, dy)`; `None` for the zero vector.
    pub fn from_vector(dx: T, dy: T) -> Option<Self> {
        if dx == T::zero() && dy == T::zero() {
            return None;
        }
        Self::new(dx.atan2(-dy).to_degrees()).ok()
    }

    pub fn rotated(self, by: T) -> Result<Self> {
        Self::new(self.0 + by)
    }
}

impl<T: Scalar> AxisDeg<T> {
    pub fn new(raw: T) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::InvalidAngle(raw.as_f64()));
        }
        Ok(Self(wrap(raw, T::of(180.0))))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// The heading `value` (as opposed to `value + 180`).
    pub fn as_orientation(self) -> OrientationDeg<T> {
        OrientationDeg(self.0)
    }

    /// The opposite heading `value + 180`.
    pub fn flipped(self) -> OrientationDeg<T> {
        OrientationDeg(wrap(self.0 + T::of(180.0), T::of(360.0)))
    }
}

/// Shortest arc between two headings, in `[0, 180]`.
pub fn orientation_distance<T: Scalar>(a: OrientationDeg<T>, b: OrientationDeg<T>) -> T {
    let full = T::of(360.0);
    let d = wrap((a.0 - b.0).abs(), full);
    d.min(full - d)
}

/// Angle between two undirected axes, in `[0, 90]`.
pub fn axis_distance<T: Scalar>(a: AxisDeg<T>, b: AxisDeg<T>) -> T {
    let d = orientation_distance(a.as_orientation(), b.as_orientation());
    d.min(T::of(180.0) - d)
}
