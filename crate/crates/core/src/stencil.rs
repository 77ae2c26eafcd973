//! Second-order finite-difference stencils on uniform grids.
//!
//! Interior nodes use central differences; the end nodes use one-sided
//! second-order stencils so the whole grid is second-order accurate.

use crate::scalar::Scalar;

/// First derivative at every node. Needs at least 3 samples.
pub fn first_derivative<T: Scalar>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    assert!(n >= 3, "first derivative stencil needs 3 nodes, got {n}");
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let denom = two * h;
    let mut out = Vec::with_capacity(n);
    out.push((-three * values[0] + four * values[1] - values[2]) / denom);
    for i in 1..n - 1 {
        out.push((values[i + 1] - values[i - 1]) / denom);
    }
    out.push((three * values[n - 1] - four * values[n - 2] + values[n - 3]) / denom);
    out
}

/// Second derivative at every node. Needs at least 4 samples.
pub fn second_derivative<T: Scalar>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    assert!(n >= 4, "second derivative stencil needs 4 nodes, got {n}");
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let five = T::lit(5.0);
    let h2 = h * h;
    let mut out = Vec::with_capacity(n);
    out.push((two * values[0] - five * values[1] + four * values[2] - values[3]) / h2);
    for i in 1..n - 1 {
        out.push((values[i + 1] - two * values[i] + values[i - 1]) / h2);
    }
    out.push(
        (two * values[n - 1] - five * values[n - 2] + four * values[n - 3] - values[n - 4]) / h2,
    );
    out
}

/// Composite trapezoid over the whole grid.
pub fn trapezoid<T: Scalar>(values: &[T], h: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let half = T::lit(0.5);
    let inner: T = values[1..n - 1].iter().copied().sum();
    h * (half * (values[0] + values[n - 1]) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> (Vec<f64>, f64) {
        let h = 1.0 / (n - 1) as f64;
        ((0..n).map(|i| i as f64 * h).collect(), h)
    }

    #[test]
    fn exact_on_quadratics_and_cubics() {
        let (s, h) = grid(11);
        let f: Vec<f64> = s.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        for (d, x) in first_derivative(&f, h).iter().zip(&s) {
            assert!((d - (6.0 * x - 1.0)).abs() < 1e-12);
        }
        let g: Vec<f64> = s.iter().map(|x| x * x * x).collect();
        for (d, x) in second_derivative(&g, h).iter().zip(&s) {
            assert!((d - 6.0 * x).abs() < 1e-9);
        }
    }

    #[test]
    fn trapezoid_linear_exact() {
        let (s, h) = grid(5);
        let f: Vec<f64> = s.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&f, h) - 2.0).abs() < 1e-15);
        assert_eq!(trapezoid(&[1.0f64], 1.0), 0.0);
    }

    #[test]
    fn second_order_on_sine() {
        let err = |n: usize| {
            let (s, h) = grid(n);
            let f: Vec<f64> = s.iter().map(|x| x.sin()).collect();
            first_derivative(&f, h)
                .iter()
                .zip(&s)
                .map(|(d, x)| (d - x.cos()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(33) / err(65)).log2();
        assert!((1.8..2.2).contains(&order), "order {order}");
    }
}
