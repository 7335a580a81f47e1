//! Bump families `f_q`, `f_{q,ε}`, their coprime products `γ_q`, step-function
//! sandwiches, pairwise correlations, and the quantities `D̄`, `A(D̄)`, `P_ψ`,
//! `χ(q)` and `X(Q)` of the variance estimate.
//!
//! Everything lives on one coordinate: `γ_q(x) = ∏_i F_q(x_i)` with
//! `F_q(x) = Σ_{(a,q)=1} f(qx − a)`, so every `(k−1)`-dimensional integral is a
//! one-dimensional integral raised to the power `k−1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arithmetic::{
    cross_radical_primes, gcd, mertens_product_over, threshold_a, totient, MertensVariant,
};
use crate::error::{Error, Result};
use crate::geometry::{interval_union_for_layer, union_intersection_measure, CoprimeLayer};
use crate::psi::PsiSpec;
use crate::scalar::{CompensatedSum, Scalar};
use crate::series::dyadic_checkpoints;

/// Default plateau enlargement `ε` of `f_{q,ε}`.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// `f_{q,ε}` for one modulus: `1` on `|y| ≤ p = g(1 + ε log(1/g))`,
/// `g/|y|` on `p < |y| ≤ g^{1/2}`, `0` beyond; `ε = 0` is the plain `f_q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpFamily<T> {
    pub q: u64,
    pub k: u32,
    pub phi: u64,
    /// `g = (ψ(q)φ(q)/q)^{1/(k−1)}`
    pub g: T,
    pub epsilon: T,
}

impl<T: Scalar> BumpFamily<T> {
    pub fn new(q: u64, k: u32, psi: T, epsilon: T) -> Result<Self> {
        if q == 0 || k < 2 {
            return Err(Error::invalid("bump families need q >= 1 and k >= 2"));
        }
        if !(psi >= T::zero() && psi <= T::half()) {
            return Err(Error::RangeViolation {
                q,
                value: psi.to_f64_lossy(),
            });
        }
        if !(epsilon >= T::zero()) {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        let phi = totient(q);
        let base = psi * T::of_u64(phi) / T::of_u64(q);
        let g = if k == 2 {
            base
        } else {
            base.powf(T::one() / T::of_u64(k as u64 - 1))
        };
        Ok(Self { q, k, phi, g, epsilon })
    }

    pub fn from_spec(spec: &PsiSpec, q: u64, k: u32, epsilon: T) -> Result<Self> {
        Self::new(q, k, T::of(spec.eval(q)?), epsilon)
    }

    /// The same modulus with a different `ε`.
    pub fn with_epsilon(&self, epsilon: T) -> Self {
        Self { epsilon, ..*self }
    }

    /// `φ(q)/q`.
    pub fn coprime_ratio(&self) -> T {
        T::of_u64(self.phi) / T::of_u64(self.q)
    }

    /// Plateau radius `g(1 + ε log(1/g))`, zero when `g = 0`.
    pub fn plateau(&self) -> T {
        if self.g <= T::zero() {
            T::zero()
        } else {
            self.g * (T::one() + self.epsilon * (T::one() / self.g).ln())
        }
    }

    /// End of the `g/|y|` tail, `g^{1/2}`.
    pub fn tail_end(&self) -> T {
        self.g.sqrt()
    }

    pub fn support_radius(&self) -> T {
        if self.g <= T::zero() {
            T::zero()
        } else {
            self.plateau().max(self.tail_end())
        }
    }

    /// `ψ_ε(q) = plateau^{k−1}`.
    pub fn psi_eps(&self) -> T {
        self.plateau().powi(self.k as i32 - 1)
    }

    pub fn eval(&self, y: T) -> T {
        let y = y.abs();
        if self.g <= T::zero() {
            return T::zero();
        }
        if y <= self.plateau() {
            T::one()
        } else if y <= self.tail_end() {
            self.g / y
        } else {
            T::zero()
        }
    }

    /// `∫_ℝ f`.
    pub fn single_integral(&self) -> T {
        let p = self.plateau();
        let s = self.tail_end();
        if self.g <= T::zero() {
            T::zero()
        } else if p >= s {
            T::two() * p
        } else {
            T::two() * p + T::two() * self.g * (s / p).ln()
        }
    }

    /// `∫_ℝ f²`.
    pub fn single_square_integral(&self) -> T {
        let p = self.plateau();
        let s = self.tail_end();
        if self.g <= T::zero() {
            T::zero()
        } else if p >= s {
            T::two() * p
        } else {
            T::two() * p + T::two() * self.g * self.g * (p.recip() - s.recip())
        }
    }

    /// `F_q(x) = Σ_{(a,q)=1} f(qx − a)`.
    pub fn coordinate_sum(&self, x: T) -> T {
        let radius = self.support_radius();
        if radius <= T::zero() {
            return T::zero();
        }
        let qf = T::of_u64(self.q);
        let y = qf * (x - x.floor());
        let lo = (y - radius).ceil().to_i64().expect("finite");
        let hi = (y + radius).floor().to_i64().expect("finite");
        let mut acc = T::zero();
        for a in lo..=hi {
            if gcd(a.rem_euclid(self.q as i64) as u64, self.q) == 1 {
                acc += self.eval(y - T::from_i64(a).expect("small integer"));
            }
        }
        acc
    }
}

pub fn bump_eval<T: Scalar>(family: &BumpFamily<T>, y: T) -> T {
    family.eval(y)
}

/// `γ_q(x) = ∏_{i<k} F_q(x_i)` for `x ∈ [0,1]^{k−1}`.
pub fn gamma_eval<T: Scalar>(family: &BumpFamily<T>, x: &[T]) -> Result<T> {
    if x.len() != family.k as usize - 1 {
        return Err(Error::invalid(format!(
            "gamma takes k-1 = {} coordinates (got {})",
            family.k - 1,
            x.len()
        )));
    }
    Ok(x.iter().map(|&xi| family.coordinate_sum(xi)).fold(T::one(), |a, b| a * b))
}

/// `∫ γ_q = [(φ/q)·∫f]^{k−1}`.
pub fn gamma_mean<T: Scalar>(family: &BumpFamily<T>) -> T {
    (family.coprime_ratio() * family.single_integral()).powi(family.k as i32 - 1)
}

/// `∫ γ_q² = [(φ/q)·∫f²]^{k−1}`, valid while bumps around distinct
/// residues do not overlap (support radius ≤ 1/2).
pub fn gamma_square_mean<T: Scalar>(family: &BumpFamily<T>) -> Result<T> {
    if family.support_radius() > T::half() {
        return Err(Error::DegenerateInput(format!(
            "bump supports overlap at q={} (radius {})",
            family.q,
            family.support_radius()
        )));
    }
    Ok((family.coprime_ratio() * family.single_square_integral()).powi(family.k as i32 - 1))
}

/// Both sides of `(φ(q)/q)·ψ(q)/∏_{i≥2}‖qα_i‖′ ≥ γ_q(α_2, …, α_k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundCheck<T> {
    pub lhs: T,
    pub gamma: T,
    pub holds: bool,
}

/// Relative slack allowed for roundoff when both sides coincide (at the
/// plateau edge the inequality is an equality).
pub const LOWER_BOUND_RTOL: f64 = 1e-12;

/// Checks the lower bound at `alpha = (α_2, …, α_k)`.
pub fn gamma_lower_bound_check<T: Scalar>(
    q: u64,
    k: u32,
    psi: T,
    alpha: &[T],
    rho: T,
) -> Result<LowerBoundCheck<T>> {
    let family = BumpFamily::new(q, k, psi, T::zero())?;
    if family.coprime_ratio() > rho {
        return Err(Error::invalid(format!(
            "phi(q)/q = {} exceeds rho = {rho}",
            family.coprime_ratio()
        )));
    }
    let layer = CoprimeLayer::new(q);
    let mut denom = T::one();
    for &a in alpha {
        let d = layer.distance(a);
        if d <= T::zero() {
            return Err(Error::DegenerateInput(format!(
                "coordinate {a} sits on a coprime fraction of q={q}"
            )));
        }
        denom *= d;
    }
    let gamma = gamma_eval(&family, alpha)?;
    let lhs = family.coprime_ratio() * psi / denom;
    let holds = lhs >= gamma * (T::one() - T::of(LOWER_BOUND_RTOL));
    Ok(LowerBoundCheck { lhs, gamma, holds })
}

/// `K` radii whose averaged indicators dominate `f_{q,ε}` pointwise.
///
/// `x_0 = 2g^{1/2}` and, for `i ≥ 1`, `x_i = clamp(gK/i, p, g^{1/2})` — the
/// point where the tail crosses level `i/K`. At `p < |y| ≤ g^{1/2}` the
/// number of covering intervals is `min(K, ⌊K f(y)⌋ + 1) ≥ K f(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSandwich<T> {
    pub q: u64,
    pub k: u32,
    pub epsilon: T,
    pub steps: usize,
    /// Ascending.
    pub breakpoints: Vec<T>,
}

impl<T: Scalar> StepSandwich<T> {
    /// `(1/K) #{i : |y| ≤ x_i}`.
    pub fn eval(&self, y: T) -> T {
        let y = y.abs();
        let idx = self.breakpoints.partition_point(|&x| x < y);
        T::of_u64((self.breakpoints.len() - idx) as u64) / T::of_u64(self.steps as u64)
    }

    /// `∫_ℝ (1/K)Σ 𝟙_{[−x_i, x_i]}`.
    pub fn integral(&self) -> T {
        T::two() * self.breakpoints.iter().copied().sum::<T>() / T::of_u64(self.steps as u64)
    }

    /// `∫ (step average − f_{q,ε})`, exact.
    pub fn l1_gap(&self, family: &BumpFamily<T>) -> T {
        self.integral() - family.single_integral()
    }

    pub fn max_radius(&self) -> T {
        self.breakpoints.last().copied().unwrap_or_else(T::zero)
    }
}

pub fn step_sandwich<T: Scalar>(family: &BumpFamily<T>, steps: usize) -> Result<StepSandwich<T>> {
    if steps == 0 {
        return Err(Error::invalid("step resolution K must be at least 1"));
    }
    let g = family.g;
    let p = family.plateau();
    let s = family.tail_end();
    let kf = T::of_u64(steps as u64);
    let mut breakpoints = Vec::with_capacity(steps);
    if g > T::zero() {
        breakpoints.push((T::two() * s).max(p));
        for i in 1..steps {
            let x = if p >= s {
                p
            } else {
                (g * kf / T::of_u64(i as u64)).max(p).min(s)
            };
            breakpoints.push(x);
        }
    } else {
        breakpoints.resize(steps, T::zero());
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(StepSandwich {
        q: family.q,
        k: family.k,
        epsilon: family.epsilon,
        steps,
        breakpoints,
    })
}

/// `(1/K²) Σ_{i,j} λ₁(A_{q,i} ∩ A_{r,j})` for two sandwiches, i.e. the
/// one-coordinate correlation of the step averages.
///
/// When every radius is at most `1/2` the arcs of each union are disjoint,
/// so the intersection measure is a sum over pairs of arc centres
/// `a/q, b/r` closer than the largest combined radius; each pair overlaps in
/// `clamp(u + v − δ, 0, 2 min(u, v))`. Otherwise the interval sweep is used.
pub fn cross_integral<T: Scalar>(
    layer_q: &CoprimeLayer,
    sq: &StepSandwich<T>,
    layer_r: &CoprimeLayer,
    sr: &StepSandwich<T>,
) -> T {
    if sq.max_radius() <= T::half() && sr.max_radius() <= T::half() {
        cross_integral_pairs(layer_q, sq, layer_r, sr)
    } else {
        cross_integral_sweep(layer_q, sq, layer_r, sr)
    }
}

/// Reference route: explicit interval unions and a sweep per level pair.
pub fn cross_integral_sweep<T: Scalar>(
    layer_q: &CoprimeLayer,
    sq: &StepSandwich<T>,
    layer_r: &CoprimeLayer,
    sr: &StepSandwich<T>,
) -> T {
    let uq: Vec<_> = sq.breakpoints.iter().map(|&x| interval_union_for_layer(layer_q, x).union).collect();
    let ur: Vec<_> = sr.breakpoints.iter().map(|&x| interval_union_for_layer(layer_r, x).union).collect();
    let mut acc = CompensatedSum::new();
    for a in &uq {
        for b in &ur {
            acc.add(union_intersection_measure(a, b));
        }
    }
    acc.value() / T::of_u64((sq.steps * sr.steps) as u64)
}

fn cross_integral_pairs<T: Scalar>(
    layer_q: &CoprimeLayer,
    sq: &StepSandwich<T>,
    layer_r: &CoprimeLayer,
    sr: &StepSandwich<T>,
) -> T {
    let (q, r) = (layer_q.q(), layer_r.q());
    let (qf, rf) = (T::of_u64(q), T::of_u64(r));
    let u: Vec<T> = sq.breakpoints.iter().map(|&x| x / qf).collect();
    let v: Vec<T> = sr.breakpoints.iter().map(|&x| x / rf).collect();
    let w = sq.max_radius() / qf + sr.max_radius() / rf;
    if w <= T::zero() {
        return T::zero();
    }
    let mut coprime_r = vec![false; r as usize];
    for &b in layer_r.residues() {
        coprime_r[b as usize] = true;
    }
    let qr = T::of_u64(q) * rf;
    let mut acc = CompensatedSum::new();
    for &a in layer_q.residues() {
        let c = T::of_u64(a) / qf;
        let lo = ((c - w) * rf).floor().to_i64().expect("finite");
        let hi = ((c + w) * rf).ceil().to_i64().expect("finite");
        for b in lo..=hi {
            if !coprime_r[b.rem_euclid(r as i64) as usize] {
                continue;
            }
            let num = (a as i128 * r as i128 - b as i128 * q as i128).unsigned_abs();
            let delta = T::from_u128(num).expect("fits") / qr;
            if delta >= w {
                continue;
            }
            for &ui in &u {
                for &vj in &v {
                    let overlap = (ui + vj - delta).max(T::zero()).min(T::two() * ui.min(vj));
                    if overlap > T::zero() {
                        acc.add(overlap);
                    }
                }
            }
        }
    }
    acc.value() / T::of_u64((sq.steps * sr.steps) as u64)
}

/// Correlation data for one pair of moduli.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats<T> {
    pub q: u64,
    pub r: u64,
    /// `max{r ψ_ε(q), q ψ_ε(r)} / gcd(q, r)`
    pub d_bar: T,
    /// `A(D̄)`
    pub a_cut: T,
    /// `∏_{p | qr/(q,r)², p > A(D̄)} (1 + 1/(p−1))`
    pub p_product: T,
    /// Step-route upper bound for `∫ γ_{q,ε} γ_{r,ε}` at resolution `K`.
    pub correlation: T,
    /// `∫γ_{q,ε} · ∫γ_{r,ε}`.
    pub product_of_means: T,
    /// `correlation / product_of_means` (NaN when the product vanishes).
    pub ratio: T,
    /// `correlation(K) − correlation(2K) ≥ 0`.
    pub refinement_bias: T,
    /// Monte-Carlo estimate of `∫ γ_{q,ε} γ_{r,ε}` and its standard error.
    pub mc_estimate: Option<(T, T)>,
}

impl<T: Scalar> PairStats<T> {
    pub const CSV_HEADER: [&'static str; 8] = [
        "q",
        "r",
        "D_bar",
        "A_cut",
        "P_product",
        "correlation",
        "product_of_means",
        "ratio",
    ];

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.q.to_string(),
            self.r.to_string(),
            self.d_bar.to_string(),
            self.a_cut.to_string(),
            self.p_product.to_string(),
            self.correlation.to_string(),
            self.product_of_means.to_string(),
            self.ratio.to_string(),
        ]
    }
}

pub fn write_pair_stats_csv<T: Scalar, W: std::io::Write>(rows: &[PairStats<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PairStats::<T>::CSV_HEADER)?;
    for row in rows {
        w.write_record(row.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

/// `(D̄, A(D̄), P_ψ)` for a pair of families.
pub fn overlap_inputs<T: Scalar>(fq: &BumpFamily<T>, fr: &BumpFamily<T>) -> (T, T, T) {
    let d = T::of_u64(gcd(fq.q, fr.q));
    let d_bar = (T::of_u64(fr.q) * fq.psi_eps()).max(T::of_u64(fq.q) * fr.psi_eps()) / d;
    let a_cut = threshold_a(d_bar);
    let primes = cross_radical_primes(fq.q, fr.q);
    let p = mertens_product_over(&primes, a_cut, MertensVariant::OverPMinusOne);
    (d_bar, a_cut, p)
}

/// Correlation of `γ_{q,ε}` and `γ_{r,ε}` through the step sandwich at
/// resolution `K`, with a refinement estimate at `2K` and an optional
/// Monte-Carlo cross-check over `mc_samples` points.
pub fn pair_correlation<T: Scalar>(
    fq: &BumpFamily<T>,
    fr: &BumpFamily<T>,
    steps: usize,
    mc_samples: u64,
    seed: u64,
) -> Result<PairStats<T>> {
    if fq.k != fr.k {
        return Err(Error::invalid("families must share the dimension k"));
    }
    let power = fq.k as i32 - 1;
    let (lq, lr) = (CoprimeLayer::new(fq.q), CoprimeLayer::new(fr.q));
    let c1 = cross_integral(&lq, &step_sandwich(fq, steps)?, &lr, &step_sandwich(fr, steps)?);
    let c2 = cross_integral(&lq, &step_sandwich(fq, 2 * steps)?, &lr, &step_sandwich(fr, 2 * steps)?);
    let correlation = c1.powi(power);
    let refined = c2.powi(power);
    let product_of_means = gamma_mean(fq) * gamma_mean(fr);
    let ratio = if product_of_means > T::zero() {
        correlation / product_of_means
    } else {
        T::nan()
    };
    let (d_bar, a_cut, p_product) = overlap_inputs(fq, fr);
    let mc_estimate = (mc_samples > 0).then(|| mc_cross(fq, fr, mc_samples, seed));
    Ok(PairStats {
        q: fq.q,
        r: fr.q,
        d_bar,
        a_cut,
        p_product,
        correlation,
        product_of_means,
        ratio,
        refinement_bias: correlation - refined,
        mc_estimate,
    })
}

fn mc_cross<T: Scalar>(fq: &BumpFamily<T>, fr: &BumpFamily<T>, n: u64, seed: u64) -> (T, T) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fq.q ^ (fr.q << 32));
    let mut sum = CompensatedSum::new();
    let mut sq = CompensatedSum::new();
    for _ in 0..n {
        let y = T::of(rng.random::<f64>());
        let v = fq.coordinate_sum(y) * fr.coordinate_sum(y);
        sum.add(v);
        sq.add(v * v);
    }
    let nf = T::of_u64(n);
    let mean = sum.value() / nf;
    let var = (sq.value() / nf - mean * mean).max(T::zero());
    let se = (var / nf).sqrt();
    let power = fq.k as i32 - 1;
    // delta method for mean^{k−1}
    let se_pow = if power == 1 {
        se
    } else {
        T::of_u64(power as u64) * mean.powi(power - 1) * se
    };
    (mean.powi(power), se_pow)
}

/// Result of [`quasi_independence_ratio`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiIndependence {
    /// `Σ_{q,r≤Q} corr_K(q,r) / (Σ_{q≤Q} ∫γ_q)²` at `Q`.
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `(Q′, ratio)` at dyadic `Q′ ≤ Q` where the denominator is positive.
    pub trajectory: Vec<(u64, f64)>,
    /// Moduli with `ψ(q) > 0`.
    pub support: Vec<u64>,
}

impl QuasiIndependence {
    /// Largest relative increase between consecutive trajectory points.
    pub fn max_step_increase(&self) -> f64 {
        self.trajectory
            .windows(2)
            .map(|w| w[1].1 / w[0].1 - 1.0)
            .fold(0.0, f64::max)
    }
}

/// Step-route upper bound of `Σ_{q,r≤Q} ∫γ_qγ_r / (Σ_{q≤Q} ∫γ_q)²`.
///
/// The numerator uses the `ε`-families (which dominate `γ_q`), the
/// denominator the plain `γ_q`. Requires `φ(q)/q ≤ ρ(k)` on the support.
pub fn quasi_independence_ratio(
    psi: &PsiSpec,
    k: u32,
    q_max: u64,
    steps: usize,
    epsilon: f64,
) -> Result<QuasiIndependence> {
    quasi_independence_ratio_with(psi, k, q_max, steps, epsilon, true)
}

/// As [`quasi_independence_ratio`]; `enforce_rho = false` admits supports
/// with `φ(q)/q > ρ(k)` (the step bound stays valid, the lower bound for
/// `γ_q` does not).
pub fn quasi_independence_ratio_with(
    psi: &PsiSpec,
    k: u32,
    q_max: u64,
    steps: usize,
    epsilon: f64,
    enforce_rho: bool,
) -> Result<QuasiIndependence> {
    if q_max == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    let rho = crate::series::rho_k(k);
    let values = psi.values_up_to(q_max)?;
    let mut support = Vec::new();
    let mut plain = Vec::new();
    let mut fams = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let q = i as u64 + 1;
        if v <= 0.0 {
            continue;
        }
        let fam = BumpFamily::new(q, k, v, 0.0)?;
        if enforce_rho && (fam.phi as f64) > rho * q as f64 {
            return Err(Error::invalid(format!(
                "q={q} in the support has phi(q)/q > rho(k) = {rho}; restrict the support (e.g. restrict:totient_le:{rho};...)"
            )));
        }
        support.push(q);
        plain.push(gamma_mean(&fam));
        fams.push(fam.with_epsilon(epsilon));
    }
    let layers: Vec<CoprimeLayer> = support.par_iter().map(|&q| CoprimeLayer::new(q)).collect();
    let sandwiches = fams
        .iter()
        .map(|f| step_sandwich(f, steps))
        .collect::<Result<Vec<_>>>()?;
    let n = support.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let power = k as i32 - 1;
    let corr: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| cross_integral(&layers[i], &sandwiches[i], &layers[j], &sandwiches[j]).powi(power))
        .collect();
    // row-major over the upper triangle; accumulate prefix sums in q order
    let mut by_max: Vec<CompensatedSum<f64>> = vec![CompensatedSum::new(); n];
    for (&(i, j), &c) in pairs.iter().zip(&corr) {
        by_max[j].add(if i == j { c } else { 2.0 * c });
    }
    let checkpoints = dyadic_checkpoints(q_max);
    let mut trajectory = Vec::new();
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    let mut idx = 0;
    for &cp in &checkpoints {
        while idx < n && support[idx] <= cp {
            num.add(by_max[idx].value());
            den.add(plain[idx]);
            idx += 1;
        }
        let d = den.value();
        if d > 0.0 {
            trajectory.push((cp, num.value() / (d * d)));
        }
    }
    let d = den.value();
    if d <= 0.0 {
        return Err(Error::UndefinedRatio(format!("Σ ∫γ_q vanishes up to Q={q_max}")));
    }
    Ok(QuasiIndependence {
        ratio: num.value() / (d * d),
        numerator: num.value(),
        denominator: d * d,
        trajectory,
        support,
    })
}

/// Numeric view of the ψ/χ equivalence statements for one pair `(q, r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub d_psi: f64,
    pub d_chi: f64,
    pub a_psi: f64,
    pub a_chi: f64,
    /// `log(D_ψ+2) / log(D_χ+2)`
    pub log_ratio: f64,
    /// `∏_{p>A_ψ}(1+1/p) / ∏_{p>A_χ}(1+1/p)`
    pub mertens_ratio: f64,
    /// `(mertens_ratio − 1)·log(D_ψ+2)`, bounded when the statement holds.
    pub mertens_residual: f64,
    /// `∏_{p>A_ψ}(1 + 1/(p²−1))`
    pub tail_product: f64,
    /// `1 + 1/A_ψ`
    pub tail_bound: f64,
    /// `1 + 1/log(D_ψ+2)^{100}`
    pub tail_reference: f64,
}

impl EquivalenceReport {
    pub fn tail_within_bound(&self) -> bool {
        self.tail_product >= 1.0 && self.tail_product <= self.tail_bound
    }
}

fn d_of(q: u64, r: u64, fq: f64, fr: f64) -> f64 {
    (r as f64 * fq).max(q as f64 * fr) / gcd(q, r) as f64
}

/// `ψ(q), ψ(r), χ(q), χ(r)` with `C1·χ ≤ ψ ≤ C2·χ` at both points.
pub fn d_a_equiv_report(
    q: u64,
    r: u64,
    psi: (f64, f64),
    chi: (f64, f64),
    c1: f64,
    c2: f64,
) -> Result<EquivalenceReport> {
    if q == 0 || r == 0 {
        return Err(Error::invalid("q and r must be positive"));
    }
    for (p, c) in [(psi.0, chi.0), (psi.1, chi.1)] {
        if !(c1 * c <= p && p <= c2 * c) {
            return Err(Error::invalid(format!(
                "constants violated: need {c1}·{c} <= {p} <= {c2}·{c}"
            )));
        }
    }
    let d_psi = d_of(q, r, psi.0, psi.1);
    let d_chi = d_of(q, r, chi.0, chi.1);
    let a_psi = threshold_a(d_psi);
    let a_chi = threshold_a(d_chi);
    let primes = cross_radical_primes(q, r);
    let m_psi = mertens_product_over(&primes, a_psi, MertensVariant::OverP);
    let m_chi = mertens_product_over(&primes, a_chi, MertensVariant::OverP);
    let mertens_ratio = m_psi / m_chi;
    let l_psi = (d_psi + 2.0).ln();
    let tail_product = primes
        .iter()
        .filter(|&&p| p as f64 > a_psi)
        .map(|&p| 1.0 + 1.0 / ((p as f64).powi(2) - 1.0))
        .product();
    Ok(EquivalenceReport {
        d_psi,
        d_chi,
        a_psi,
        a_chi,
        log_ratio: l_psi / (d_chi + 2.0).ln(),
        mertens_ratio,
        mertens_residual: (mertens_ratio - 1.0) * l_psi,
        tail_product,
        tail_bound: 1.0 + 1.0 / a_psi,
        tail_reference: 1.0 + l_psi.powi(-100),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiRow {
    pub q: u64,
    /// `(q/φ(q)) ∫γ_q`
    pub chi: f64,
    /// `[g(1 + ½ log(1/g))]^{k−1}`, kept for comparison.
    pub displayed: f64,
    pub gamma_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiReport {
    pub k: u32,
    pub rows: Vec<ChiRow>,
    /// `X(Q′) = Σ_{q≤Q′} χ(q)φ(q)/q` at dyadic checkpoints (and `Q`).
    pub x_trace: Vec<(u64, f64)>,
    /// `Σ_{q≤Q′} (φ/q)^k ψ log(q/(φψ))^{k−1}` at the same checkpoints.
    pub main_series_trace: Vec<(u64, f64)>,
}

impl ChiReport {
    pub fn x_total(&self) -> f64 {
        self.x_trace.last().map_or(0.0, |&(_, x)| x)
    }
}

pub fn chi_and_x(psi: &PsiSpec, k: u32, q_max: u64) -> Result<ChiReport> {
    if q_max == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    let values = psi.values_up_to(q_max)?;
    let rows = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let q = i as u64 + 1;
            let fam = BumpFamily::new(q, k, v, 0.0)?;
            let mean = gamma_mean(&fam);
            let g = fam.g;
            let displayed = if g > 0.0 {
                (g * (1.0 + 0.5 * (1.0 / g).ln())).powi(k as i32 - 1)
            } else {
                0.0
            };
            Ok(ChiRow {
                q,
                chi: mean * q as f64 / fam.phi as f64,
                displayed,
                gamma_mean: mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let main = crate::series::series_terms(crate::series::CriterionKind::Main, psi, k, q_max)?;
    let checkpoints = dyadic_checkpoints(q_max);
    let mut x = CompensatedSum::new();
    let mut m = CompensatedSum::new();
    let mut x_trace = Vec::new();
    let mut main_series_trace = Vec::new();
    let mut next = 0;
    for (row, t) in rows.iter().zip(main) {
        x.add(row.chi * row_ratio(row));
        m.add(t);
        if next < checkpoints.len() && checkpoints[next] == row.q {
            x_trace.push((row.q, x.value()));
            main_series_trace.push((row.q, m.value()));
            next += 1;
        }
    }
    Ok(ChiReport {
        k,
        rows,
        x_trace,
        main_series_trace,
    })
}

fn row_ratio(row: &ChiRow) -> f64 {
    if row.chi > 0.0 {
        row.gamma_mean / row.chi
    } else {
        0.0
    }
}
