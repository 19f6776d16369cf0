//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two points.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "interpolation needs ≥ 2 points of equal length, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("abscissae must be finite and strictly increasing".into()));
        }
        let k = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..k - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; k];
        if k == 2 {
            d[0] = s[0];
            d[1] = s[0];
        } else {
            for i in 1..k - 1 {
                if s[i - 1] * s[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], s[0], s[1]);
            d[k - 1] = end_slope(h[k - 2], h[k - 3], s[k - 2], s[k - 3]);
        }
        Ok(Self { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = self.domain();
        x >= a && x <= b
    }

    /// Value at `x`; outside the domain the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.x.len();
        let i = match self.x.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= k => k - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let u = (x - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    /// First `x` in the domain where the interpolant equals `level`, refined by bisection.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        for i in 0..self.x.len() - 1 {
            let (a, b) = (self.x[i], self.x[i + 1]);
            let (fa, fb) = (self.y[i] - level, self.y[i + 1] - level);
            if fa == 0.0 {
                return Some(a);
            }
            if fa * fb < 0.0 {
                return Some(bisect(|x| self.eval(x) - level, a, b));
            }
        }
        let last = *self.x.last()?;
        (*self.y.last()? == level).then_some(last)
    }
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Root of `f` in `[a, b]` given a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if c <= a || c >= b {
            break;
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fa * fc < 0.0 {
            b = c;
        } else {
            a = c;
            fa = fc;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn reproduces_nodes_and_cubics_exactly_where_monotone() {
        let x = [0.0, 0.5, 1.5, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let p = Pchip::new(&x, &y).unwrap();
        for (&a, &b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(p.eval(a), b, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(p.eval(1.1), 3.2, epsilon = 1e-14);
        assert_abs_diff_eq!(p.crossing(4.0).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn flat_segments_stay_flat() {
        let p = Pchip::new(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 2.0]).unwrap();
        for i in 0..=20 {
            let v = p.eval(1.0 + i as f64 / 20.0);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_abscissae() {
        assert!(Pchip::new(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(Pchip::new(&[0.0], &[1.0]).is_err());
        assert!(Pchip::new(&[0.0, 1.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(
            steps in prop::collection::vec((0.05f64..1.0, 0.0f64..2.0), 3..10)
        ) {
            let mut x = vec![0.0];
            let mut y = vec![0.0];
            for (dx, dy) in steps {
                x.push(x.last().unwrap() + dx);
                y.push(y.last().unwrap() - dy);
            }
            let p = Pchip::new(&x, &y).unwrap();
            let (a, b) = p.domain();
            let mut prev = p.eval(a);
            for i in 1..=400 {
                let v = p.eval(a + (b - a) * i as f64 / 400.0);
                prop_assert!(v <= prev + 1e-12);
                prop_assert!(v <= y[0] + 1e-12 && v >= *y.last().unwrap() - 1e-12);
                prev = v;
            }
        }
    }
}
