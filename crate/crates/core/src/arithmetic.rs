//! Elementary number-theoretic kernels: gcd, Euler's totient, trial-division
//! factorization, the prime cutoff `A(D)` of the overlap estimate, and the
//! truncated Mertens-type products over primes dividing `qr/(q,r)²`.

use std::sync::OnceLock;

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Primes below this bound are cached for trial division.
const SMALL_PRIME_BOUND: u64 = 1 << 16;

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_up_to(SMALL_PRIME_BOUND))
}

/// All primes `p ≤ n`, by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    primes
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let f = factorize(n);
    f.factors.len() == 1 && f.factors[0].1 == 1
}

/// Prime decomposition `value = ∏ prime^exponent`, primes strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub value: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// φ(value) from the factorization.
    pub fn totient(&self) -> u64 {
        self.factors
            .iter()
            .fold(self.value, |acc, &(p, _)| acc / p * (p - 1))
    }

    /// Product of the distinct prime factors.
    pub fn radical(&self) -> u64 {
        self.primes().product()
    }
}

/// Trial division over cached small primes, then odd candidates.
///
/// `factorize(1)` has no factors.
pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize requires n >= 1");
    let mut rest = n;
    let mut factors = Vec::new();
    let mut push = |p: u64, rest: &mut u64| {
        let mut e = 0;
        while (*rest).is_multiple_of(p) {
            *rest /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    };
    for &p in small_primes() {
        if p.saturating_mul(p) > rest {
            break;
        }
        push(p, &mut rest);
    }
    let mut d = SMALL_PRIME_BOUND + 1;
    while d.saturating_mul(d) <= rest {
        push(d, &mut rest);
        d += 2;
    }
    if rest > 1 {
        factors.push((rest, 1));
    }
    Factorization { value: n, factors }
}

pub fn totient(n: u64) -> u64 {
    factorize(n).totient()
}

/// Exact φ(q) for `1 ≤ q ≤ limit`, computed by a linear sieve.
#[derive(Clone, Debug)]
pub struct TotientTable {
    limit: u64,
    /// `phi[q]` for `q ≤ limit`; index 0 holds 0.
    phi: Vec<u64>,
    primes: Vec<u64>,
}

impl TotientTable {
    pub fn new(limit: u64) -> Result<Self> {
        if limit == 0 {
            return Err(Error::invalid("totient table limit must be at least 1"));
        }
        let n = limit as usize;
        let mut phi = vec![0u64; n + 1];
        let mut primes: Vec<u64> = Vec::new();
        let mut is_composite = vec![false; n + 1];
        phi[1] = 1;
        for i in 2..=n {
            if !is_composite[i] {
                primes.push(i as u64);
                phi[i] = i as u64 - 1;
            }
            for &p in &primes {
                let p = p as usize;
                let m = i * p;
                if m > n {
                    break;
                }
                is_composite[m] = true;
                if i % p == 0 {
                    phi[m] = phi[i] * p as u64;
                    break;
                }
                phi[m] = phi[i] * (p as u64 - 1);
            }
        }
        Ok(Self { limit, phi, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// φ(q); panics if `q` is 0 or beyond the table.
    pub fn get(&self, q: u64) -> u64 {
        assert!(q >= 1 && q <= self.limit, "q={q} outside totient table");
        self.phi[q as usize]
    }

    /// φ(q)/q as a float.
    pub fn ratio(&self, q: u64) -> f64 {
        self.get(q) as f64 / q as f64
    }

    /// Values φ(1), …, φ(limit).
    pub fn values(&self) -> &[u64] {
        &self.phi[1..]
    }

    /// Primes up to `limit`, found as a by-product of the sieve.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }
}

/// Sorted distinct primes dividing `qr / gcd(q,r)²`.
pub fn cross_radical_primes(q: u64, r: u64) -> Vec<u64> {
    assert!(q >= 1 && r >= 1, "cross_radical_primes requires q, r >= 1");
    let g = gcd(q, r);
    // qr/g² = (q/g)(r/g) with the two factors coprime
    let mut primes: Vec<u64> = factorize(q / g)
        .primes()
        .chain(factorize(r / g).primes())
        .collect();
    primes.sort_unstable();
    primes
}

/// Prime cutoff `A(D) = exp(log(D+100)·logloglog(D+100) / (8·loglog(D+100)) + 1)`.
///
/// Non-decreasing in `D`; `D + 100` keeps every logarithm positive.
pub fn threshold_a<T: Scalar>(d: T) -> T {
    let x = d + T::of(100.0);
    let l1 = x.ln();
    let l2 = l1.ln();
    let l3 = l2.ln();
    (l1 * l3 / (T::of(8.0) * l2) + T::one()).exp()
}

/// Which local factor a truncated Mertens product uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MertensVariant {
    /// `1 + 1/(p−1) = p/(p−1)`
    OverPMinusOne,
    /// `1 + 1/p`
    OverP,
}

/// `∏ (1 + 1/(p−1))` or `∏ (1 + 1/p)` over primes `p | qr/(q,r)²` with
/// `p > cutoff`. The empty product is exactly 1.
pub fn mertens_product<T: Scalar>(q: u64, r: u64, cutoff: T, variant: MertensVariant) -> T {
    mertens_product_over(&cross_radical_primes(q, r), cutoff, variant)
}

/// [`mertens_product`] over an already computed prime list.
pub fn mertens_product_over<T: Scalar>(primes: &[u64], cutoff: T, variant: MertensVariant) -> T {
    primes
        .iter()
        .filter(|&&p| T::of_u64(p) > cutoff)
        .fold(T::one(), |acc, &p| {
            let p = T::of_u64(p);
            let denom = match variant {
                MertensVariant::OverPMinusOne => p - T::one(),
                MertensVariant::OverP => p,
            };
            acc * (T::one() + T::one() / denom)
        })
}
