use std::io::Write;

use crate::error::Result;
use crate::scalar::{compensated_sum, Scalar};

use super::layer::CoprimeLayer;

/// Sorted, disjoint half-open intervals on the circle `[0,1)`.
///
/// Arcs crossing 0 are stored as two pieces, one ending at 1 and one starting
/// at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion<T> {
    intervals: Vec<(T, T)>,
}

impl<T: Scalar> Default for IntervalUnion<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Scalar> IntervalUnion<T> {
    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn full() -> Self {
        Self {
            intervals: vec![(T::zero(), T::one())],
        }
    }

    /// Builds a union from arbitrary intervals inside `[0,1]`, merging
    /// overlapping and touching ones and dropping empty ones.
    pub fn from_intervals(mut raw: Vec<(T, T)>) -> Self {
        raw.retain(|&(a, b)| b > a);
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("interval endpoints are finite"));
        let mut intervals: Vec<(T, T)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            let a = a.max(T::zero());
            let b = b.min(T::one());
            match intervals.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => intervals.push((a, b)),
            }
        }
        Self { intervals }
    }

    /// Union of the arcs `[c − w, c + w]` taken modulo 1.
    pub fn from_arcs(arcs: impl IntoIterator<Item = (T, T)>) -> Self {
        let mut raw = Vec::new();
        for (center, half_width) in arcs {
            if half_width <= T::zero() {
                continue;
            }
            if T::two() * half_width >= T::one() {
                return Self::full();
            }
            let c = center - center.floor();
            let (lo, hi) = (c - half_width, c + half_width);
            if lo < T::zero() {
                raw.push((lo + T::one(), T::one()));
                raw.push((T::zero(), hi));
            } else if hi > T::one() {
                raw.push((lo, T::one()));
                raw.push((T::zero(), hi - T::one()));
            } else {
                raw.push((lo, hi));
            }
        }
        Self::from_intervals(raw)
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> T {
        compensated_sum(self.intervals.iter().map(|&(a, b)| b - a))
    }

    pub fn contains(&self, x: T) -> bool {
        let x = x - x.floor();
        let idx = self.intervals.partition_point(|&(_, b)| b <= x);
        self.intervals.get(idx).is_some_and(|&(a, _)| a <= x)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a0, a1) = self.intervals[i];
            let (b0, b1) = other.intervals[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { intervals: out }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut raw = self.intervals.clone();
        raw.extend_from_slice(&other.intervals);
        Self::from_intervals(raw)
    }

    /// CSV rows `start,end`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["start", "end"])?;
        for &(a, b) in &self.intervals {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact measure of `u ∩ v` by a two-list sweep.
pub fn union_intersection_measure<T: Scalar>(u: &IntervalUnion<T>, v: &IntervalUnion<T>) -> T {
    let mut acc = crate::scalar::CompensatedSum::new();
    let (mut i, mut j) = (0, 0);
    let (a, b) = (u.intervals(), v.intervals());
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            acc.add(hi - lo);
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc.value()
}

/// `∪_{(a,q)=1} [a/q − radius/q, a/q + radius/q]` on the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcUnion<T> {
    pub union: IntervalUnion<T>,
    /// True when the arcs around distinct residues cannot overlap
    /// (`radius ≤ 1/2`); otherwise the union was merged and its measure is
    /// smaller than `φ(q)·2·radius/q`.
    pub disjoint_arcs: bool,
}

pub fn interval_union_around_coprime<T: Scalar>(q: u64, radius: T) -> ArcUnion<T> {
    interval_union_for_layer(&CoprimeLayer::new(q), radius)
}

/// [`interval_union_around_coprime`] reusing a precomputed layer.
pub fn interval_union_for_layer<T: Scalar>(layer: &CoprimeLayer, radius: T) -> ArcUnion<T> {
    let qf = T::of_u64(layer.q());
    let w = radius / qf;
    let union = IntervalUnion::from_arcs(
        layer
            .residues()
            .iter()
            .map(|&a| (T::of_u64(a) / qf, w)),
    );
    ArcUnion {
        union,
        disjoint_arcs: radius <= T::half(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_measure(f: impl Fn(f64) -> bool, n: usize) -> f64 {
        (0..n).filter(|&i| f((i as f64 + 0.5) / n as f64)).count() as f64 / n as f64
    }

    #[test]
    fn arcs_examples() {
        let u = interval_union_around_coprime(1, 0.25f64);
        assert!((u.union.measure() - 0.5).abs() < 1e-15);
        assert!(u.union.contains(0.0) && u.union.contains(0.9) && !u.union.contains(0.5));
        let v = interval_union_around_coprime(4, 0.1f64);
        assert_eq!(v.union.len(), 2);
        assert!((v.union.measure() - 0.1).abs() < 1e-15);
        assert!(v.disjoint_arcs);
        // gaps of 2 between residues of 30 make radius-1.5 arcs overlap
        let w = interval_union_around_coprime(30, 1.5f64);
        assert!(!w.disjoint_arcs);
        assert!(w.union.measure() < 8.0 * 3.0 / 30.0);
    }

    #[test]
    fn arcs_measure_is_phi_times_width() {
        for q in 1..=200u64 {
            let phi = crate::arithmetic::totient(q) as f64;
            for r in [0.01, 0.2, 0.5] {
                let u = interval_union_around_coprime(q, r);
                assert!((u.union.measure() - phi * 2.0 * r / q as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn intersection_examples() {
        let u = interval_union_around_coprime(7, 0.3f64).union;
        assert!((union_intersection_measure(&u, &u) - u.measure()).abs() < 1e-15);
        let a = IntervalUnion::from_intervals(vec![(0.0, 0.2), (0.5, 0.6)]);
        let b = IntervalUnion::from_intervals(vec![(0.2, 0.5), (0.7, 0.9)]);
        assert_eq!(union_intersection_measure(&a, &b), 0.0);
        let a2 = interval_union_around_coprime(2, 0.2f64).union;
        let a3 = interval_union_around_coprime(3, 0.2f64).union;
        let sweep = union_intersection_measure(&a2, &a3);
        let oracle = grid_measure(|x| a2.contains(x) && a3.contains(x), 1_000_000);
        assert!((sweep - oracle).abs() < 1e-5, "{sweep} vs {oracle}");
        assert!((a2.intersection(&a3).measure() - sweep).abs() < 1e-15);
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        IntervalUnion::from_intervals(vec![(0.25f64, 0.5)])
            .write_csv(&mut buf)
            .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "start,end\n0.25,0.5\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn union_strategy() -> impl Strategy<Value = IntervalUnion<f64>> {
            proptest::collection::vec((0.0f64..1.0, 0.0f64..0.3), 0..12)
                .prop_map(IntervalUnion::from_arcs)
        }

        proptest! {
            #[test]
            fn union_is_sorted_disjoint(u in union_strategy()) {
                let iv = u.intervals();
                prop_assert!(iv.windows(2).all(|w| w[0].1 < w[1].0));
                prop_assert!(u.measure() <= 1.0 + 1e-12);
            }

            #[test]
            fn inclusion_exclusion(u in union_strategy(), v in union_strategy()) {
                let lhs = u.union(&v).measure() + union_intersection_measure(&u, &v);
                let rhs = u.measure() + v.measure();
                prop_assert!((lhs - rhs).abs() < 1e-12);
                prop_assert!(union_intersection_measure(&u, &v) <= u.measure().min(v.measure()) + 1e-15);
            }
        }
    }
}
