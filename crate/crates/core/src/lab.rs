//! Seeded counting experiments: `S(α, Q) = #{q ≤ Q : ∏ dist(qα_i) ≤ ψ(q)}`,
//! expectation curves `E(Q) = Σ_{q≤Q} λ_k(A_q)`, and concentration reports.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arithmetic::gcd;
use crate::error::{Error, Result};
use crate::geometry::{coprime_distance, nearest_int_distance, sublevel_measure};
use crate::measures::{measure_coprime_exact, measure_coprime_quadrature, measure_non_coprime};
use crate::overlap::{gamma_eval, quasi_independence_ratio, BumpFamily};
use crate::psi::PsiSpec;
use crate::scalar::CompensatedSum;
use crate::series::dyadic_checkpoints;

pub const REPORT_SCHEMA: u32 = 1;
pub const DEFAULT_SOLUTION_CAP: usize = 1000;
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub psi: PsiSpec,
    pub k: u32,
    pub q_max: u64,
    pub coprime: bool,
    pub n_alphas: usize,
    pub seed: u64,
    /// Ascending, each `≤ q_max`; empty means dyadic.
    pub checkpoints: Vec<u64>,
    /// Tolerance for `k ≥ 3` coprime expectations.
    pub quadrature_tol: f64,
}

impl TrialConfig {
    pub fn new(psi: PsiSpec, k: u32, q_max: u64, coprime: bool, n_alphas: usize, seed: u64) -> Self {
        Self {
            psi,
            k,
            q_max,
            coprime,
            n_alphas,
            seed,
            checkpoints: dyadic_checkpoints(q_max),
            quadrature_tol: DEFAULT_QUADRATURE_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_max == 0 {
            return Err(Error::invalid("Q must be at least 1"));
        }
        if self.n_alphas == 0 {
            return Err(Error::invalid("n_alphas must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        check_checkpoints(&self.checkpoints, self.q_max)
    }

    fn resolved_checkpoints(&self) -> Vec<u64> {
        if self.checkpoints.is_empty() {
            dyadic_checkpoints(self.q_max)
        } else {
            self.checkpoints.clone()
        }
    }
}

fn check_checkpoints(cps: &[u64], q_max: u64) -> Result<()> {
    if cps.windows(2).any(|w| w[0] >= w[1]) || cps.iter().any(|&c| c == 0 || c > q_max) {
        return Err(Error::invalid("checkpoints must be strictly increasing and within 1..=Q"));
    }
    Ok(())
}

/// `α_i ↦ dist(qα_i)` for one modulus.
fn dist(q: u64, x: f64, coprime: bool) -> f64 {
    if coprime {
        coprime_distance(q, x)
    } else {
        nearest_int_distance(q as f64 * x)
    }
}

fn is_solution(q: u64, alpha: &[f64], psi: f64, coprime: bool) -> bool {
    if psi == 0.0 {
        // only exact hits: some qα_i is an integer (coprime to q for ‖·‖′)
        return alpha.iter().any(|&x| {
            let y = q as f64 * x;
            y == y.floor() && (!coprime || gcd((y as i64).rem_euclid(q as i64) as u64, q) == 1)
        });
    }
    alpha.iter().map(|&x| dist(q, x, coprime)).product::<f64>() <= psi
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solutions {
    pub count: u64,
    /// The first `cap` solutions in increasing order.
    pub solutions: Vec<u64>,
    pub truncated: bool,
}

/// Counts `q ≤ Q` with `∏_i dist(qα_i) ≤ ψ(q)`, `dist = ‖·‖′` or `‖·‖`.
pub fn count_solutions(alpha: &[f64], psi: &PsiSpec, q_max: u64, coprime: bool, cap: usize) -> Result<Solutions> {
    if q_max == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    if alpha.is_empty() {
        return Err(Error::invalid("alpha needs at least one coordinate"));
    }
    let values = psi.values_up_to(q_max)?;
    let mut out = Solutions {
        count: 0,
        solutions: Vec::new(),
        truncated: false,
    };
    for (i, &v) in values.iter().enumerate() {
        let q = i as u64 + 1;
        if is_solution(q, alpha, v, coprime) {
            out.count += 1;
            if out.solutions.len() < cap {
                out.solutions.push(q);
            } else {
                out.truncated = true;
            }
        }
    }
    Ok(out)
}

/// Counts at each checkpoint for precomputed `ψ(1..=Q)`.
fn counts_at(alpha: &[f64], values: &[f64], coprime: bool, checkpoints: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut count = 0;
    let mut next = 0;
    for (i, &v) in values.iter().enumerate() {
        let q = i as u64 + 1;
        if is_solution(q, alpha, v, coprime) {
            count += 1;
        }
        while next < checkpoints.len() && checkpoints[next] == q {
            out.push(count);
            next += 1;
        }
    }
    out
}

/// `λ_k` of the `q`-th set: coprime `k = 2` exact, `k ≥ 3` by quadrature,
/// non-coprime closed form.
pub fn set_measure(q: u64, psi: f64, k: u32, coprime: bool, tol: f64) -> Result<f64> {
    if psi == 0.0 {
        return Ok(0.0);
    }
    match (k, coprime) {
        (1, true) => Ok(sublevel_measure(q, psi)),
        (1, false) => Ok((2.0 * psi).min(1.0)),
        (2, true) => Ok(measure_coprime_exact(q, psi)?.value),
        (_, true) => Ok(measure_coprime_quadrature(q, psi, k, tol)?.value),
        (_, false) => Ok(measure_non_coprime(q, psi, k)?.value),
    }
}

/// `(Q′, Σ_{q≤Q′} λ_k)` at each checkpoint.
pub fn expectation_curve(
    psi: &PsiSpec,
    k: u32,
    q_max: u64,
    coprime: bool,
    checkpoints: &[u64],
    tol: f64,
) -> Result<Vec<(u64, f64)>> {
    if q_max == 0 || k == 0 {
        return Err(Error::invalid("Q and k must be at least 1"));
    }
    check_checkpoints(checkpoints, q_max)?;
    let values = psi.values_up_to(q_max)?;
    let measures = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| set_measure(i as u64 + 1, v, k, coprime, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = CompensatedSum::new();
    let mut next = 0;
    for (i, m) in measures.into_iter().enumerate() {
        acc.add(m);
        while next < checkpoints.len() && checkpoints[next] == i as u64 + 1 {
            out.push((checkpoints[next], acc.value()));
            next += 1;
        }
    }
    Ok(out)
}

/// `α` for sample `index`: an independent ChaCha stream of the seed.
pub fn sample_alpha(seed: u64, index: usize, k: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..k).map(|_| rng.random::<f64>()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRow {
    pub q: u64,
    pub expectation: f64,
    pub mean: f64,
    pub variance: f64,
    /// Fraction of samples with `|S − E| > E/2`.
    pub deviation_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub psi: String,
    pub k: u32,
    pub q_max: u64,
    pub coprime: bool,
    pub n_alphas: usize,
    pub seed: u64,
    pub rows: Vec<CheckpointRow>,
    /// `counts[s][c]`: sample `s` at checkpoint `c`.
    pub counts: Vec<Vec<u64>>,
    pub alphas: Vec<Vec<f64>>,
}

impl ExperimentReport {
    pub fn final_row(&self) -> Option<&CheckpointRow> {
        self.rows.last()
    }

    /// Deterministic `.report.txt` text.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema={REPORT_SCHEMA}");
        let _ = writeln!(s, "kind=experiment");
        let _ = writeln!(s, "code_version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "psi={}", self.psi);
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "Q={}", self.q_max);
        let _ = writeln!(s, "coprime={}", self.coprime);
        let _ = writeln!(s, "n_alphas={}", self.n_alphas);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(
            s,
            "note=the |S-E|<=E/2 tolerance is a reporting convention; almost-sure divergence gives no rate"
        );
        s.push_str("\n[checkpoints]\nQ,expectation,mean,variance,deviation_fraction\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.q, r.expectation, r.mean, r.variance, r.deviation_fraction);
        }
        s.push_str("\n[samples]\nindex,alpha,final_count\n");
        for (i, (a, c)) in self.alphas.iter().zip(&self.counts).enumerate() {
            let alpha: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{i},{},{}", alpha.join(" "), c.last().copied().unwrap_or(0));
        }
        s
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.render().as_bytes())?;
        Ok(())
    }
}

pub fn run_trials(config: &TrialConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let checkpoints = config.resolved_checkpoints();
    let values = config.psi.values_up_to(config.q_max)?;
    let expectation = expectation_curve(
        &config.psi,
        config.k,
        config.q_max,
        config.coprime,
        &checkpoints,
        config.quadrature_tol,
    )?;
    let alphas: Vec<Vec<f64>> = (0..config.n_alphas)
        .map(|i| sample_alpha(config.seed, i, config.k))
        .collect();
    let counts: Vec<Vec<u64>> = alphas
        .par_iter()
        .map(|a| counts_at(a, &values, config.coprime, &checkpoints))
        .collect();
    let n = config.n_alphas as f64;
    let rows = expectation
        .iter()
        .enumerate()
        .map(|(c, &(q, e))| {
            let mut sum = CompensatedSum::new();
            for s in &counts {
                sum.add(s[c] as f64);
            }
            let mean = sum.value() / n;
            let mut sq = CompensatedSum::new();
            let mut deviating = 0usize;
            for s in &counts {
                let x = s[c] as f64;
                sq.add((x - mean) * (x - mean));
                if (x - e).abs() > e / 2.0 {
                    deviating += 1;
                }
            }
            CheckpointRow {
                q,
                expectation: e,
                mean,
                variance: if counts.len() > 1 { sq.value() / (n - 1.0) } else { 0.0 },
                deviation_fraction: deviating as f64 / n,
            }
        })
        .collect();
    Ok(ExperimentReport {
        psi: config.psi.to_string(),
        k: config.k,
        q_max: config.q_max,
        coprime: config.coprime,
        n_alphas: config.n_alphas,
        seed: config.seed,
        rows,
        counts,
        alphas,
    })
}

/// Empirical spread of `Σ_{q≤Q} γ_q(α)` against the correlation ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceComparison {
    /// `Σ_{q≤Q} ∫γ_q`.
    pub expected_mean: f64,
    pub empirical_mean: f64,
    /// Sample `Var(S)/mean(S)²`; `None` when every sample is zero.
    pub empirical_relative_variance: Option<f64>,
    /// Step-route ratio (≥ the exact second-moment ratio); `None` if undefined.
    pub ratio: Option<f64>,
    pub ratio_minus_one: Option<f64>,
}

/// Samples `S_γ(α) = Σ_{q≤Q} γ_q(α_2, …, α_k)` (plain bumps) over the
/// configured α-samples and compares its relative variance with
/// `ratio − 1` from [`quasi_independence_ratio`] at resolution `steps`.
pub fn empirical_variance_vs_bound(config: &TrialConfig, steps: usize) -> Result<VarianceComparison> {
    config.validate()?;
    if config.k < 2 {
        return Err(Error::invalid("the variance comparison needs k >= 2"));
    }
    let values = config.psi.values_up_to(config.q_max)?;
    let families = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| BumpFamily::new(i as u64 + 1, config.k, v, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let mut expected = CompensatedSum::new();
    for f in &families {
        expected.add(crate::overlap::gamma_mean(f));
    }
    let samples = (0..config.n_alphas)
        .into_par_iter()
        .map(|i| {
            let alpha = sample_alpha(config.seed, i, config.k);
            let mut s = CompensatedSum::new();
            for f in &families {
                s.add(gamma_eval(f, &alpha[1..])?);
            }
            Ok(s.value())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let empirical_relative_variance = (mean > 0.0).then(|| var / (mean * mean));
    let ratio = match quasi_independence_ratio(&config.psi, config.k, config.q_max, steps, 0.0) {
        Ok(r) => Some(r.ratio),
        Err(Error::UndefinedRatio(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(VarianceComparison {
        expected_mean: expected.value(),
        empirical_mean: mean,
        empirical_relative_variance,
        ratio,
        ratio_minus_one: ratio.map(|r| r - 1.0),
    })
}
