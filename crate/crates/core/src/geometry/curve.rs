use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};

/// Shape of one piece of a [`PiecewiseCurve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PieceForm<T> {
    Constant(T),
    Reciprocal(T),
    /// `min(c, d/x)`
    ClippedMin { c: T, d: T },
    /// `c + d/x`
    Hyperbolic { c: T, d: T },
}

impl<T: Scalar> PieceForm<T> {
    fn eval(&self, x: T) -> T {
        match *self {
            PieceForm::Constant(c) => c,
            PieceForm::Reciprocal(d) => d / x,
            PieceForm::ClippedMin { c, d } => c.min(d / x),
            PieceForm::Hyperbolic { c, d } => c + d / x,
        }
    }

    fn integrate(&self, x0: T, x1: T) -> T {
        if x1 <= x0 {
            return T::zero();
        }
        match *self {
            PieceForm::Constant(c) => c * (x1 - x0),
            PieceForm::Reciprocal(d) => reciprocal_integral(d, x0, x1),
            PieceForm::ClippedMin { c, d } => min_const_recip(c, d, x0, x1),
            PieceForm::Hyperbolic { c, d } => c * (x1 - x0) + reciprocal_integral(d, x0, x1),
        }
    }

    /// Whether the piece has a `1/x` term that forbids `x = 0`.
    fn has_pole(&self) -> bool {
        match *self {
            PieceForm::Reciprocal(d) | PieceForm::Hyperbolic { d, .. } => d != T::zero(),
            _ => false,
        }
    }

    fn nonnegative(&self) -> bool {
        match *self {
            PieceForm::Constant(c) => c >= T::zero(),
            PieceForm::Reciprocal(d) => d >= T::zero(),
            PieceForm::ClippedMin { c, d } | PieceForm::Hyperbolic { c, d } => {
                c >= T::zero() && d >= T::zero()
            }
        }
    }
}

fn reciprocal_integral<T: Scalar>(d: T, x0: T, x1: T) -> T {
    if d == T::zero() {
        T::zero()
    } else {
        d * (x1 / x0).ln()
    }
}

/// `∫ min(c, d/x) dx` over `[x0, x1]`, split at the breakpoint `x* = d/c`.
fn min_const_recip<T: Scalar>(c: T, d: T, x0: T, x1: T) -> T {
    if d == T::zero() || c == T::zero() {
        return T::zero();
    }
    let xs = d / c;
    let flat = c * (x1.min(xs) - x0.min(xs));
    let tail = if x1 > xs {
        d * (x1 / x0.max(xs)).ln()
    } else {
        T::zero()
    };
    flat + tail
}

/// Exact `∫_{x0}^{x1} min(c, d/x) dx` for `c, d > 0`, `0 ≤ x0 ≤ x1`.
pub fn integrate_min_const_recip<T: Scalar>(c: T, d: T, x0: T, x1: T) -> Result<T> {
    if !(c > T::zero()) || !(d > T::zero()) {
        return Err(Error::invalid(format!(
            "min(c, d/x) needs c > 0 and d > 0 (got c={c}, d={d})"
        )));
    }
    if !(x0 >= T::zero() && x1 >= x0) {
        return Err(Error::invalid(format!(
            "integration bounds must satisfy 0 <= x0 <= x1 (got {x0}, {x1})"
        )));
    }
    Ok(min_const_recip(c, d, x0, x1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece<T> {
    pub start: T,
    pub end: T,
    pub form: PieceForm<T>,
}

/// A nonnegative function on `[start, end)` made of constant / reciprocal /
/// clipped pieces, integrated in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseCurve<T> {
    pieces: Vec<Piece<T>>,
}

impl<T: Scalar> PiecewiseCurve<T> {
    /// Validates that pieces are contiguous, non-degenerate where it matters,
    /// nonnegative, and that `1/x` pieces stay away from 0.
    pub fn new(pieces: Vec<Piece<T>>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invalid("piecewise curve needs at least one piece"));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.start <= p.end) {
                return Err(Error::invalid(format!("piece {i} has start > end")));
            }
            if p.form.has_pole() && !(p.start > T::zero()) {
                return Err(Error::invalid(format!("reciprocal piece {i} touches x = 0")));
            }
            if !p.form.nonnegative() {
                return Err(Error::invalid(format!("piece {i} has negative coefficients")));
            }
        }
        if pieces.windows(2).any(|w| w[0].end != w[1].start) {
            return Err(Error::invalid("pieces must be sorted and contiguous"));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    pub fn domain(&self) -> (T, T) {
        (self.pieces[0].start, self.pieces[self.pieces.len() - 1].end)
    }

    /// Value at `x`; zero outside the domain.
    pub fn eval(&self, x: T) -> T {
        let idx = self.pieces.partition_point(|p| p.end <= x);
        match self.pieces.get(idx) {
            Some(p) if p.start <= x => p.form.eval(x),
            _ => T::zero(),
        }
    }

    pub fn integrate(&self) -> T {
        let (a, b) = self.domain();
        self.integrate_range(a, b)
    }

    /// Integral over `[a, b] ∩ domain`.
    pub fn integrate_range(&self, a: T, b: T) -> T {
        compensated_sum(
            self.pieces
                .iter()
                .map(|p| p.form.integrate(p.start.max(a), p.end.min(b))),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn riemann(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn min_const_recip_examples() {
        assert_eq!(integrate_min_const_recip(1.0, 1.0, 0.0, 1.0).unwrap(), 1.0);
        let v = integrate_min_const_recip(2.0, 1.0, 0.0, 1.0).unwrap();
        assert!((v - (1.0 + 2f64.ln())).abs() < 1e-15);
        let oracle = riemann(|x| 2f64.min(1.0 / x), 0.0, 1.0, 2_000_000);
        assert!((v - oracle).abs() < 1e-9);
        assert_eq!(integrate_min_const_recip(3.0, 5.0, 0.7, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn min_const_recip_rejects_bad_input() {
        assert!(integrate_min_const_recip(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(integrate_min_const_recip(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(integrate_min_const_recip(1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn curve_validation() {
        let bad_pole = PiecewiseCurve::new(vec![Piece {
            start: 0.0,
            end: 1.0,
            form: PieceForm::Reciprocal(1.0),
        }]);
        assert!(bad_pole.is_err());
        let gap = PiecewiseCurve::new(vec![
            Piece { start: 0.0, end: 1.0, form: PieceForm::Constant(1.0) },
            Piece { start: 1.5, end: 2.0, form: PieceForm::Constant(1.0) },
        ]);
        assert!(gap.is_err());
    }

    #[test]
    fn curve_integrates_pieces() {
        let curve = PiecewiseCurve::new(vec![
            Piece { start: 0.0, end: 0.5, form: PieceForm::Constant(2.0) },
            Piece { start: 0.5, end: 1.0, form: PieceForm::Reciprocal(1.0) },
            Piece { start: 1.0, end: 3.0, form: PieceForm::Hyperbolic { c: 0.5, d: 0.25 } },
            Piece { start: 3.0, end: 4.0, form: PieceForm::ClippedMin { c: 0.1, d: 1.0 } },
        ])
        .unwrap();
        // split at the jumps so the midpoint rule stays second order
        let oracle: f64 = [(0.0, 1.0), (1.0, 3.0), (3.0, 4.0)]
            .iter()
            .map(|&(a, b)| riemann(|x| curve.eval(x), a, b, 2_000_000))
            .sum();
        assert!((curve.integrate() - oracle).abs() < 1e-8);
        let part = curve.integrate_range(0.25, 2.0);
        let part_oracle = riemann(|x| curve.eval(x), 0.25, 1.0, 2_000_000)
            + riemann(|x| curve.eval(x), 1.0, 2.0, 2_000_000);
        assert!((part - part_oracle).abs() < 1e-8);
        assert_eq!(curve.eval(5.0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn min_const_recip_matches_riemann(
                c in 0.05f64..10.0, d in 0.05f64..10.0, x0 in 0.0f64..3.0, w in 0.0f64..3.0
            ) {
                let x1 = x0 + w;
                let exact = integrate_min_const_recip(c, d, x0, x1).unwrap();
                // the integrand is smooth away from x* = d/c; split there
                let xs = (d / c).clamp(x0, x1);
                let f = |x: f64| c.min(d / x);
                let oracle = riemann(f, x0, xs, 200_000) + riemann(f, xs, x1, 200_000);
                let scale = exact.abs().max(1e-300);
                prop_assert!((exact - oracle).abs() / scale < 1e-9, "{exact} vs {oracle}");
            }
        }
    }
}
