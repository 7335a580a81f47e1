//! Partial sums of the convergence/divergence criterion series, the ρ-split of
//! a ψ by the size of φ(q)/q, and density verdicts for subsequence supports.
//!
//! All per-term formulas use the convention `x·log^j(1/x) = 0` at `x = 0`:
//! a modulus with `ψ(q) = 0` contributes exactly zero.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::arithmetic::TotientTable;
use crate::error::{Error, Result};
use crate::psi::{density_profile, PsiSpec, SupportPredicate};
use crate::scalar::{compensated_sum, CompensatedSum};

/// Which criterion series to sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CriterionKind {
    /// `(φ/q)^k ψ log(q/(φψ))^{k−1}`
    Main,
    /// `(φ/q)^k ψ log(1/ψ)^{k−1}`
    Bhv,
    /// `ψ log(1/ψ)^{k−1}`
    Gallagher,
    /// `ψ^k`
    Khintchine,
    /// `φψ/q`
    KoukoulopoulosMaynard,
    /// `(φψ/q)^k`
    KoukoulopoulosMaynardPower,
    /// `ψ/(loglog q)^k · log(loglog q/ψ)^{k−1}`, zero for `q < 16`
    ExtraDivergence,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 7] = [
        CriterionKind::Main,
        CriterionKind::Bhv,
        CriterionKind::Gallagher,
        CriterionKind::Khintchine,
        CriterionKind::KoukoulopoulosMaynard,
        CriterionKind::KoukoulopoulosMaynardPower,
        CriterionKind::ExtraDivergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Main => "main",
            CriterionKind::Bhv => "bhv",
            CriterionKind::Gallagher => "gallagher",
            CriterionKind::Khintchine => "khintchine",
            CriterionKind::KoukoulopoulosMaynard => "km",
            CriterionKind::KoukoulopoulosMaynardPower => "km_pow",
            CriterionKind::ExtraDivergence => "extra",
        }
    }

    /// One term of the series at modulus `q` with `φ = φ(q)`, `ψ = ψ(q)`.
    pub fn term(self, q: u64, phi: u64, psi: f64, k: u32) -> f64 {
        if psi == 0.0 {
            return 0.0;
        }
        let k_i = k as i32;
        let w = phi as f64 / q as f64;
        match self {
            CriterionKind::Main => {
                let l = (q as f64 / (phi as f64 * psi)).ln();
                (w.powi(k_i) * psi) * l.powi(k_i - 1)
            }
            CriterionKind::Bhv => (w.powi(k_i) * psi) * (1.0 / psi).ln().powi(k_i - 1),
            CriterionKind::Gallagher => psi * (1.0 / psi).ln().powi(k_i - 1),
            CriterionKind::Khintchine => psi.powi(k_i),
            CriterionKind::KoukoulopoulosMaynard => w * psi,
            CriterionKind::KoukoulopoulosMaynardPower => (w * psi).powi(k_i),
            CriterionKind::ExtraDivergence => {
                if q < 16 {
                    return 0.0;
                }
                let ll = (q as f64).ln().ln();
                psi / ll.powi(k_i) * (ll / psi).ln().powi(k_i - 1)
            }
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown criterion `{s}` (expected main, bhv, gallagher, khintchine, km, km_pow, extra)"
                ))
            })
    }
}

/// Coarse growth annotation of a partial-sum trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Growth {
    /// The last full octave added at least 85% of the previous one.
    Growing,
    /// The last octave's increment fell below 85% of the previous one.
    Flattening,
    /// Fewer than three dyadic checkpoints.
    Undetermined,
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Growth::Growing => "growing",
            Growth::Flattening => "flattening",
            Growth::Undetermined => "undetermined",
        })
    }
}

const OCTAVE_RATIO: f64 = 0.85;

/// `1, 2, 4, …` up to `q_max`, plus `q_max` itself.
pub fn dyadic_checkpoints(q_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut q = 1u64;
    while q <= q_max {
        out.push(q);
        match q.checked_mul(2) {
            Some(n) => q = n,
            None => break,
        }
    }
    if out.last() != Some(&q_max) && q_max > 0 {
        out.push(q_max);
    }
    out
}

/// Compares the increments over the last two full octaves among the
/// power-of-two checkpoints. A heuristic annotation only.
pub fn classify_growth(trace: &[(u64, f64)]) -> Growth {
    let dyadic: Vec<f64> = trace
        .iter()
        .filter(|(q, _)| q.is_power_of_two())
        .map(|&(_, s)| s)
        .collect();
    let n = dyadic.len();
    if n < 3 {
        return Growth::Undetermined;
    }
    let last = dyadic[n - 1] - dyadic[n - 2];
    let prev = dyadic[n - 2] - dyadic[n - 3];
    if last > 0.0 && last >= OCTAVE_RATIO * prev {
        Growth::Growing
    } else {
        Growth::Flattening
    }
}

/// Partial sums of one criterion at a list of checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTrace {
    pub kind: CriterionKind,
    pub k: u32,
    pub checkpoints: Vec<(u64, f64)>,
    pub growth: Growth,
    /// Human-readable version of `growth` with the last-octave slope.
    pub growth_note: String,
}

impl SeriesTrace {
    pub fn final_sum(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |&(_, s)| s)
    }

    /// CSV rows `kind,k,Q,partial_sum`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "k", "Q", "partial_sum"])?;
        for &(q, s) in &self.checkpoints {
            w.write_record([self.kind.name(), &self.k.to_string(), &q.to_string(), &s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::invalid("dimension k must be at least 1"))
    } else {
        Ok(())
    }
}

/// Per-q terms of `kind` for `q = 1..=q_max`.
pub fn series_terms(kind: CriterionKind, psi: &PsiSpec, k: u32, q_max: u64) -> Result<Vec<f64>> {
    check_k(k)?;
    if q_max == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    let table = TotientTable::new(q_max)?;
    let values = psi.values_up_to(q_max)?;
    Ok(values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let q = i as u64 + 1;
            kind.term(q, table.get(q), v, k)
        })
        .collect())
}

/// Partial sums at `checkpoints` (dyadic when empty). Terms are computed in
/// parallel and summed sequentially in `q` order, so results do not depend on
/// scheduling.
pub fn partial_sum(
    kind: CriterionKind,
    psi: &PsiSpec,
    k: u32,
    q_max: u64,
    checkpoints: &[u64],
) -> Result<SeriesTrace> {
    let mut cps = if checkpoints.is_empty() {
        dyadic_checkpoints(q_max)
    } else {
        checkpoints.to_vec()
    };
    if cps.iter().any(|&c| c == 0 || c > q_max) {
        return Err(Error::invalid("checkpoints must lie in [1, Q]"));
    }
    cps.sort_unstable();
    cps.dedup();
    let terms = series_terms(kind, psi, k, q_max)?;
    let mut acc = CompensatedSum::new();
    let mut trace = Vec::with_capacity(cps.len());
    let mut next = 0;
    for (i, t) in terms.into_iter().enumerate() {
        acc.add(t);
        let q = i as u64 + 1;
        while next < cps.len() && cps[next] == q {
            trace.push((q, acc.value()));
            next += 1;
        }
    }
    let growth = classify_growth(&trace);
    let growth_note = growth_note(&trace, growth);
    Ok(SeriesTrace {
        kind,
        k,
        checkpoints: trace,
        growth,
        growth_note,
    })
}

fn growth_note(trace: &[(u64, f64)], growth: Growth) -> String {
    let dyadic: Vec<&(u64, f64)> = trace.iter().filter(|(q, _)| q.is_power_of_two()).collect();
    match dyadic.as_slice() {
        [.., a, b] => format!(
            "{growth} (last-octave increment {:.6e} per doubling of Q, heuristic)",
            b.1 - a.1
        ),
        _ => format!("{growth} (too few checkpoints)"),
    }
}

/// `Σ (φ/q)^k ψ log(1/ψ)^{k−1} / Σ ψ log(1/ψ)^{k−1}` over `q ≤ Q`.
pub fn dst_correlation_ratio(psi: &PsiSpec, k: u32, q_max: u64) -> Result<f64> {
    let num = compensated_sum(series_terms(CriterionKind::Bhv, psi, k, q_max)?);
    let den = compensated_sum(series_terms(CriterionKind::Gallagher, psi, k, q_max)?);
    if den <= 0.0 {
        return Err(Error::UndefinedRatio(format!(
            "Σ ψ log(1/ψ)^(k-1) vanishes up to Q={q_max}"
        )));
    }
    Ok(num / den)
}

/// `ρ(k) = 4^{−(k−1)}`.
pub fn rho_k(k: u32) -> f64 {
    0.25f64.powi(k.saturating_sub(1) as i32)
}

/// Splits ψ into the parts supported on `φ(q)/q ≤ ρ` and `φ(q)/q > ρ`.
pub fn rho_split(psi: &PsiSpec, rho: f64) -> Result<(PsiSpec, PsiSpec)> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1] (got {rho})")));
    }
    Ok((
        PsiSpec::restricted(SupportPredicate::TotientRatioAtMost(rho), psi.clone()),
        PsiSpec::restricted(SupportPredicate::TotientRatioAbove(rho), psi.clone()),
    ))
}

/// Which side of the subsequence-Littlewood dichotomy a density lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityVerdict {
    /// Density at least `loglog N/(log N)²`.
    ConsistentWithFullMeasure,
    /// Density at most `1/(log N)²`.
    ConsistentWithNullMeasure,
    Indeterminate,
}

impl fmt::Display for DensityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityVerdict::ConsistentWithFullMeasure => "consistent with measure 1",
            DensityVerdict::ConsistentWithNullMeasure => "consistent with measure 0",
            DensityVerdict::Indeterminate => "indeterminate band",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LittlewoodReport {
    pub n: u64,
    pub count: u64,
    pub density: f64,
    pub full_threshold: f64,
    pub null_threshold: f64,
    pub verdict: DensityVerdict,
}

pub fn littlewood_density_verdict(pred: &SupportPredicate, n: u64) -> Result<LittlewoodReport> {
    if n < 16 {
        return Err(Error::invalid("N must be at least 16"));
    }
    let row = density_profile(pred, &[n])?.remove(0);
    let full_threshold = row.loglog_threshold.expect("N >= 16");
    let null_threshold = row.inverse_log_sq_threshold.expect("N >= 16");
    let verdict = if row.density >= full_threshold {
        DensityVerdict::ConsistentWithFullMeasure
    } else if row.density <= null_threshold {
        DensityVerdict::ConsistentWithNullMeasure
    } else {
        DensityVerdict::Indeterminate
    };
    Ok(LittlewoodReport {
        n,
        count: row.count,
        density: row.density,
        full_threshold,
        null_threshold,
        verdict,
    })
}
