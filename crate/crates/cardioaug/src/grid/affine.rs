use crate::error::{Error, Result};
use crate::real::Real;

/// A 2D affine transform stored as the output-to-input (pull) map used for
/// resampling: an output pixel at `(x, y)` samples the input at
/// `linear * (x, y) + translation`.
///
/// Rows are `[m00, m01, t0]` / `[m10, m11, t1]` acting on `(x, y)` with `x`
/// along columns, `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2D<T> {
    linear: [[T; 2]; 2],
    translation: [T; 2],
}

impl<T: Real> Affine2D<T> {
    pub fn new(linear: [[T; 2]; 2], translation: [T; 2]) -> Self {
        Self { linear, translation }
    }

    pub fn identity() -> Self {
        let one = T::one();
        let zero = T::zero();
        Self::new([[one, zero], [zero, one]], [zero, zero])
    }

    /// Moves image content by `(dx, dy)` pixels: output `(x, y)` samples
    /// input `(x - dx, y - dy)`.
    pub fn translation(dx: T, dy: T) -> Self {
        let one = T::one();
        let zero = T::zero();
        Self::new([[one, zero], [zero, one]], [-dx, -dy])
    }

    /// Rotation about the origin. The sampling grid turns by `degrees`, so
    /// on a y-down raster the content appears rotated counterclockwise by
    /// the same angle. Pull linear part `[[cos, -sin], [sin, cos]]`.
    pub fn rotation_deg(degrees: T) -> Self {
        let rad = degrees.to_radians();
        let (s, c) = (rad.sin(), rad.cos());
        Self::new([[c, -s], [s, c]], [T::zero(), T::zero()])
    }

    /// Column-axis shear of the sampling grid: output `(x, y)` samples input
    /// `(x + m*y, y)`. Pull linear part `[[1, m], [0, 1]]`.
    pub fn shear_cols(m: T) -> Self {
        let one = T::one();
        let zero = T::zero();
        Self::new([[one, m], [zero, one]], [zero, zero])
    }

    /// Uniform magnification of the content by `factor` about the origin:
    /// the sampling grid contracts by `1/factor`.
    pub fn scale_uniform(factor: T) -> Result<Self> {
        if factor == T::zero() || !factor.is_finite() {
            return Err(Error::DegenerateTransform);
        }
        let inv = T::one() / factor;
        let zero = T::zero();
        Ok(Self::new([[inv, zero], [zero, inv]], [zero, zero]))
    }

    /// Re-anchors a transform about `(cx, cy)`: `p -> c + A(p - c)`.
    pub fn about_point(self, cx: T, cy: T) -> Self {
        // translation' = c + A(-c) + t
        let (tx, ty) = (
            cx - (self.linear[0][0] * cx + self.linear[0][1] * cy) + self.translation[0],
            cy - (self.linear[1][0] * cx + self.linear[1][1] * cy) + self.translation[1],
        );
        Self::new(self.linear, [tx, ty])
    }

    /// Center of a `width x height` pixel grid.
    pub fn grid_center(width: usize, height: usize) -> (T, T) {
        let half = T::from_f64_lossy(0.5);
        (
            T::from_f64_lossy(width.saturating_sub(1) as f64) * half,
            T::from_f64_lossy(height.saturating_sub(1) as f64) * half,
        )
    }

    /// Function composition of the coordinate maps: `(self ∘ other)(p) =
    /// self(other(p))`. When warping, `other` is applied to the output
    /// coordinate first.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.linear;
        let b = &other.linear;
        let linear = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let translation = [
            a[0][0] * other.translation[0] + a[0][1] * other.translation[1] + self.translation[0],
            a[1][0] * other.translation[0] + a[1][1] * other.translation[1] + self.translation[1],
        ];
        Self::new(linear, translation)
    }

    /// Maps a point through the stored (pull) transform.
    #[inline]
    pub fn apply(&self, x: T, y: T) -> (T, T) {
        (
            self.linear[0][0] * x + self.linear[0][1] * y + self.translation[0],
            self.linear[1][0] * x + self.linear[1][1] * y + self.translation[1],
        )
    }

    pub fn determinant(&self) -> T {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }

    /// True when the linear part is invertible to working precision.
    pub fn is_invertible(&self) -> bool {
        let det = self.determinant();
        det.is_finite() && det.abs() > T::from_f64_lossy(1e-10)
    }

    /// Inverse map; errors when the linear part is singular.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_invertible() {
            return Err(Error::DegenerateTransform);
        }
        let det = self.determinant();
        let inv = [
            [self.linear[1][1] / det, -self.linear[0][1] / det],
            [-self.linear[1][0] / det, self.linear[0][0] / det],
        ];
        let translation = [
            -(inv[0][0] * self.translation[0] + inv[0][1] * self.translation[1]),
            -(inv[1][0] * self.translation[0] + inv[1][1] * self.translation[1]),
        ];
        Ok(Self::new(inv, translation))
    }

    pub fn linear(&self) -> &[[T; 2]; 2] {
        &self.linear
    }

    pub fn translation_part(&self) -> &[T; 2] {
        &self.translation
    }

    /// Max absolute entrywise difference across the six coefficients.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut m = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.linear[i][j] - other.linear[i][j]).abs());
            }
            m = m.max((self.translation[i] - other.translation[i]).abs());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_right_operand_applies_first() {
        // self = scale grid by 2 (content shrinks), other = move content +3 in x.
        let scale = Affine2D::new([[2.0, 0.0], [0.0, 2.0]], [0.0, 0.0]);
        let shift = Affine2D::translation(3.0, 0.0);
        let both = scale.compose(&shift);
        // (scale ∘ shift)(1, 0): shift gives (-2, 0), scale gives (-4, 0).
        assert_eq!(both.apply(1.0, 0.0), (-4.0, 0.0));
    }

    #[test]
    fn inverse_round_trips_points() {
        let a = Affine2D::rotation_deg(31.0)
            .about_point(4.0, 7.0)
            .compose(&Affine2D::shear_cols(0.2));
        let inv = a.inverse().unwrap();
        let (x, y) = a.apply(1.5, -2.25);
        let (bx, by) = inv.apply(x, y);
        assert!((bx - 1.5f64).abs() < 1e-12 && (by + 2.25).abs() < 1e-12);
    }

    #[test]
    fn rotation_inverse_pair_is_identity() {
        let a = Affine2D::rotation_deg(13.0_f64).compose(&Affine2D::rotation_deg(-13.0));
        assert!(a.max_abs_diff(&Affine2D::identity()) < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Affine2D::new([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]);
        assert!(!a.is_invertible());
        assert!(matches!(a.inverse(), Err(Error::DegenerateTransform)));
    }

    #[test]
    fn about_point_fixes_the_anchor() {
        let a = Affine2D::rotation_deg(45.0_f64).about_point(3.0, 5.0);
        let (x, y) = a.apply(3.0, 5.0);
        assert!((x - 3.0).abs() < 1e-12 && (y - 5.0).abs() < 1e-12);
    }
}
