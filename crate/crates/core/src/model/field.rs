//! Log-linear parameter fields built from tensor-product B-splines.

use crate::mesh::Point;

use super::ModelError;

/// Clamped uniform B-spline basis of `n` functions on `[lo, hi]`, with degree
/// `min(3, n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    lo: f64,
    hi: f64,
    degree: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::InvalidField(
                "a field needs at least one basis function per axis".into(),
            ));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(ModelError::InvalidField(format!(
                "empty knot interval [{lo}, {hi}]"
            )));
        }
        let degree = (n - 1).min(3);
        let interior = n - degree - 1;
        let mut knots = vec![lo; degree + 1];
        for i in 1..=interior {
            knots.push(lo + (hi - lo) * i as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(hi).take(degree + 1));
        Ok(Self {
            lo,
            hi,
            degree,
            knots,
        })
    }

    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * (self.hi - self.lo);
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// All basis values at `x` by the Cox–de Boor recurrence.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let x = x.clamp(self.lo, self.hi);
        let p = self.degree;
        let t = &self.knots;
        // span with t[s] <= x < t[s+1]; the right end belongs to the last span
        let mut s = p;
        while s + 1 < self.len() && x >= t[s + 1] {
            s += 1;
        }
        let mut vals = vec![0.0; p + 1];
        vals[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            vals[j] = saved;
        }
        let mut out = vec![0.0; self.len()];
        for (r, v) in vals.into_iter().enumerate() {
            out[s - p + r] = v;
        }
        out
    }
}

/// `f(x, y) = exp(sum_{l,k} theta_lk B_l(x) B_k(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamField {
    bx: BSplineBasis,
    by: BSplineBasis,
    /// Row-major: `theta[l * ny + k]`.
    theta: Vec<f64>,
}

impl ParamField {
    pub fn new(bx: BSplineBasis, by: BSplineBasis, theta: Vec<f64>) -> Result<Self, ModelError> {
        if theta.len() != bx.len() * by.len() {
            return Err(ModelError::InvalidField(format!(
                "expected {} coefficients, found {}",
                bx.len() * by.len(),
                theta.len()
            )));
        }
        Ok(Self { bx, by, theta })
    }

    /// Field over the box `(lo, hi)` with all coefficients zero except a
    /// constant log-level `c` (tensor B-splines sum to one).
    pub fn constant(
        lo: Point,
        hi: Point,
        nx: usize,
        ny: usize,
        c: f64,
    ) -> Result<Self, ModelError> {
        let bx = BSplineBasis::new(lo[0], hi[0], nx)?;
        let by = BSplineBasis::new(lo[1], hi[1], ny)?;
        Self::new(bx, by, vec![c; nx * ny])
    }

    pub fn num_coefficients(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn with_theta(&self, theta: &[f64]) -> Result<Self, ModelError> {
        Self::new(self.bx.clone(), self.by.clone(), theta.to_vec())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bx.len(), self.by.len())
    }

    pub fn log_value(&self, p: Point) -> Result<f64, ModelError> {
        if !self.bx.contains(p[0]) || !self.by.contains(p[1]) {
            return Err(ModelError::FieldOutsideKnots { x: p[0], y: p[1] });
        }
        let vx = self.bx.eval(p[0]);
        let vy = self.by.eval(p[1]);
        let ny = vy.len();
        let mut s = 0.0;
        for (l, bx) in vx.iter().enumerate() {
            if *bx == 0.0 {
                continue;
            }
            for (k, by) in vy.iter().enumerate() {
                s += self.theta[l * ny + k] * bx * by;
            }
        }
        Ok(s)
    }

    pub fn value(&self, p: Point) -> Result<f64, ModelError> {
        Ok(self.log_value(p)?.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_zero_fields() {
        let f = ParamField::constant([0.0, 0.0], [1.0, 2.0], 1, 1, 0.7).unwrap();
        assert!((f.value([0.3, 1.9]).unwrap() - 0.7f64.exp()).abs() < 1e-15);
        let z = ParamField::constant([0.0, 0.0], [1.0, 1.0], 4, 3, 0.0).unwrap();
        assert_eq!(z.value([0.5, 0.25]).unwrap(), 1.0);
        assert!(matches!(
            z.value([1.5, 0.5]),
            Err(ModelError::FieldOutsideKnots { .. })
        ));
    }

    #[test]
    fn partition_of_unity() {
        for n in 1..8 {
            let b = BSplineBasis::new(-1.0, 2.0, n).unwrap();
            for i in 0..=30 {
                let x = -1.0 + 3.0 * i as f64 / 30.0;
                let v = b.eval(x);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                assert!(v.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn cubic_hand_values() {
        // n = 5, degree 3 on [0, 1]: knots 0 0 0 0 .5 1 1 1 1. At x = 1/4 the
        // recursive definition gives B0 = (1 - 2x)^3 = 1/8, B3 = (2x)^3 / 4 = 1/32,
        // B2 = 1/4 and B1 = 1 - B0 - B2 - B3 = 19/32.
        let b = BSplineBasis::new(0.0, 1.0, 5).unwrap();
        assert_eq!(b.knots(), &[0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]);
        let v = b.eval(0.25);
        let expect = [0.125, 0.59375, 0.25, 0.03125, 0.0];
        for (a, e) in v.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15, "{v:?}");
        }
        let end = b.eval(1.0);
        assert_eq!(end[4], 1.0);
    }

    #[test]
    fn linear_field_in_x() {
        // two basis functions give a linear interpolant of the coefficients
        let bx = BSplineBasis::new(0.0, 1.0, 2).unwrap();
        let by = BSplineBasis::new(0.0, 1.0, 1).unwrap();
        let f = ParamField::new(bx, by, vec![-1.0, 3.0]).unwrap();
        assert!((f.log_value([0.25, 0.9]).unwrap() - 0.0).abs() < 1e-15);
    }
}
