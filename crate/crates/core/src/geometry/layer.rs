use num_integer::Integer;
use num_rational::Ratio;

use crate::arithmetic::{factorize, gcd};
use crate::scalar::{compensated_sum, Scalar};

/// Residues `a ∈ {0..q−1}` coprime to `q`, with the circular gaps between
/// consecutive residues (the last gap wraps around to `residues[0] + q`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoprimeLayer {
    q: u64,
    residues: Vec<u64>,
    gaps: Vec<u64>,
}

impl CoprimeLayer {
    pub fn new(q: u64) -> Self {
        assert!(q >= 1, "coprime layer requires q >= 1");
        let residues = coprime_residues(q);
        let gaps = residues
            .iter()
            .zip(residues.iter().cycle().skip(1))
            .map(|(&a, &b)| if b > a { b - a } else { b + q - a })
            .collect();
        Self { q, residues, gaps }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    /// `gaps[i]` is the distance from `residues[i]` to the next residue.
    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    /// φ(q).
    pub fn phi(&self) -> u64 {
        self.residues.len() as u64
    }

    pub fn max_gap(&self) -> u64 {
        self.gaps.iter().copied().max().unwrap_or(1)
    }

    /// Gap to the previous residue, i.e. `gaps[i-1]` circularly.
    pub fn gap_before(&self, i: usize) -> u64 {
        let n = self.gaps.len();
        self.gaps[(i + n - 1) % n]
    }

    pub fn gap_histogram(&self) -> GapHistogram {
        GapHistogram::from_gaps(&self.gaps)
    }

    /// `‖qx‖′`, located by binary search among the residues.
    pub fn distance<T: Scalar>(&self, x: T) -> T {
        let q = T::of_u64(self.q);
        let mut y = q * (x - x.floor());
        if y >= q {
            y = T::zero();
        }
        let idx = self.residues.partition_point(|&a| T::of_u64(a) <= y);
        let lower = if idx == 0 {
            T::of_u64(*self.residues.last().expect("layer is non-empty")) - q
        } else {
            T::of_u64(self.residues[idx - 1])
        };
        let upper = if idx == self.residues.len() {
            T::of_u64(self.residues[0]) + q
        } else {
            T::of_u64(self.residues[idx])
        };
        (y - lower).min(upper - y)
    }
}

fn coprime_residues(q: u64) -> Vec<u64> {
    if q == 1 {
        return vec![0];
    }
    let n = q as usize;
    let mut coprime = vec![true; n];
    for p in factorize(q).primes() {
        let p = p as usize;
        for m in (0..n).step_by(p) {
            coprime[m] = false;
        }
    }
    coprime
        .iter()
        .enumerate()
        .filter_map(|(a, &c)| c.then_some(a as u64))
        .collect()
}

/// Multiset of circular coprime gaps, as sorted `(gap, count)` pairs.
///
/// The coprime pattern mod `q` repeats with period `rad(q)`, so the histogram
/// for `q` is the one for `rad(q)` with every count scaled by `q / rad(q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapHistogram {
    q: u64,
    entries: Vec<(u64, u64)>,
}

impl GapHistogram {
    fn from_gaps(gaps: &[u64]) -> Self {
        let mut sorted = gaps.to_vec();
        sorted.sort_unstable();
        let mut entries: Vec<(u64, u64)> = Vec::new();
        for g in sorted {
            match entries.last_mut() {
                Some((v, c)) if *v == g => *c += 1,
                _ => entries.push((g, 1)),
            }
        }
        let q = gaps.iter().sum();
        Self { q, entries }
    }

    pub fn for_modulus(q: u64) -> Self {
        let rad = factorize(q).radical().max(1);
        let base = CoprimeLayer::new(rad).gap_histogram();
        let scale = q / rad;
        Self {
            q,
            entries: base.entries.into_iter().map(|(g, c)| (g, c * scale)).collect(),
        }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    pub fn phi(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    pub fn max_gap(&self) -> u64 {
        self.entries.last().map_or(1, |&(g, _)| g)
    }

    /// Measure of `{β ∈ [0,1): ‖qβ‖′ ≤ t}`: each gap `G` is covered to length
    /// `min(2t, G)` by the two neighbouring radius-`t` intervals.
    pub fn sublevel<T: Scalar>(&self, t: T) -> T {
        let two_t = T::two() * t;
        let covered = compensated_sum(
            self.entries
                .iter()
                .map(|&(g, c)| T::of_u64(c) * two_t.min(T::of_u64(g))),
        );
        covered / T::of_u64(self.q)
    }

    /// Distinct half-gaps, where the sublevel curve changes slope.
    pub fn breakpoints<T: Scalar>(&self) -> Vec<T> {
        self.entries
            .iter()
            .map(|&(g, _)| T::of_u64(g) * T::half())
            .collect()
    }
}

/// `‖qx‖′ = min { |qx − p| : p ∈ ℤ, gcd(p, q) = 1 }`, searching outward from
/// `qx` for the nearest coprime integer on each side.
pub fn coprime_distance<T: Scalar>(q: u64, x: T) -> T {
    assert!(q >= 1, "coprime_distance requires q >= 1");
    let y = T::of_u64(q) * x;
    let lo = y.floor().to_i64().expect("q·x fits in i64");
    let hi = y.ceil().to_i64().expect("q·x fits in i64");
    let lower = nearest_coprime(q, lo, -1);
    let upper = nearest_coprime(q, hi, 1);
    (y - T::from_i64(lower).unwrap()).min(T::from_i64(upper).unwrap() - y)
}

fn nearest_coprime(q: u64, start: i64, step: i64) -> i64 {
    let mut p = start;
    while gcd(p.unsigned_abs(), q) != 1 {
        p += step;
    }
    p
}

/// Exact-rational `‖qx‖′`, for oracle comparisons away from float roundoff.
pub fn coprime_distance_exact(q: u64, x: Ratio<i64>) -> Ratio<i64> {
    assert!(q >= 1, "coprime_distance requires q >= 1");
    let y = x * Ratio::from_integer(q as i64);
    let lower = nearest_coprime(q, y.floor().to_integer(), -1);
    let upper = nearest_coprime(q, y.ceil().to_integer(), 1);
    let d_lo = y - Ratio::from_integer(lower);
    let d_hi = Ratio::from_integer(upper) - y;
    d_lo.min(d_hi)
}

/// Plain distance to the nearest integer, `‖x‖`.
pub fn nearest_int_distance<T: Scalar>(x: T) -> T {
    (x - x.round()).abs()
}

/// Measure of `{β ∈ [0,1): ‖qβ‖′ ≤ t}`.
pub fn sublevel_measure<T: Scalar>(q: u64, t: T) -> T {
    GapHistogram::for_modulus(q).sublevel(t)
}

/// Whether `a` is coprime to `q` (used by tests and samplers).
pub fn is_coprime(a: i64, q: u64) -> bool {
    a.unsigned_abs().gcd(&q) == 1
}
