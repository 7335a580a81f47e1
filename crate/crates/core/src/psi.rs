//! Approximation functions `ψ: ℕ → [0, 1/2]`: a small declarative catalog,
//! its one-line text syntax, restricted supports, the partial sums behind the
//! Hausdorff exponent `d(ψ)`, and density profiles of support sets.
//!
//! Text syntax (one expression per line):
//!
//! ```text
//! const:<c>                      ψ(q) = c
//! power:c=<c>,s=<s>              ψ(q) = c / q^s
//! powlog:t=<t>[,c=<c>]           ψ(q) = c / (q (log q)^t) for q ≥ 3, else 0
//! eps_over_q:<eps>               ψ(q) = eps / q
//! divisible:c=<c>[,ratio=<r>]    ψ(q) = c / φ(q) where q/φ(q) ≥ r, else 0
//! table:<path>                   CSV rows `q,value`; 0 for unlisted q
//! restrict:<support>;<psi>       ψ restricted to a support set
//! ```
//!
//! Supports: `all`, `primes`, `powers:<b>`, `arith:m=<m>,r=<r>`,
//! `list:<q1>,<q2>,...`, `density:<loglog|invlogsq|invlog>[,c=<c>]`,
//! `totient_le:<rho>`, `totient_gt:<rho>`, and intersections joined by `+`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::arithmetic::{factorize, primes_up_to, TotientTable};
use crate::error::{Error, Result};
use crate::series::{classify_growth, dyadic_checkpoints, Growth};

/// Upper end of the admissible range of ψ.
pub const PSI_MAX: f64 = 0.5;

/// Target counting profile for a deterministic density-thinned support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityShape {
    /// `loglog N / (log N)²`
    LogLogOverLogSquared,
    /// `1 / (log N)²`
    InverseLogSquared,
    /// `1 / log N`
    InverseLog,
}

impl DensityShape {
    pub fn eval(self, n: f64) -> f64 {
        if n < 3.0 {
            return 0.0;
        }
        let l = n.ln();
        match self {
            DensityShape::LogLogOverLogSquared => l.ln() / (l * l),
            DensityShape::InverseLogSquared => 1.0 / (l * l),
            DensityShape::InverseLog => 1.0 / l,
        }
    }

    fn name(self) -> &'static str {
        match self {
            DensityShape::LogLogOverLogSquared => "loglog",
            DensityShape::InverseLogSquared => "invlogsq",
            DensityShape::InverseLog => "invlog",
        }
    }
}

/// Membership rule for a support set `A ⊆ ℕ`.
#[derive(Clone, Debug, PartialEq)]
pub enum SupportPredicate {
    All,
    Primes,
    /// `{b^n : n ≥ 1}`
    Powers { base: u64 },
    /// `{q : q ≡ residue (mod modulus)}`
    Arithmetic { modulus: u64, residue: u64 },
    /// Sorted, deduplicated.
    Explicit(Vec<u64>),
    /// `n ∈ A` iff `⌊F(n)⌋ > ⌊F(n−1)⌋` with `F(n) = c·n·shape(n)`, so that
    /// `#{n ≤ N : n ∈ A} ≈ c·N·shape(N)`.
    DensitySampler { shape: DensityShape, c: f64 },
    /// `φ(q)/q ≤ rho`
    TotientRatioAtMost(f64),
    /// `φ(q)/q > rho`
    TotientRatioAbove(f64),
    Intersection(Vec<SupportPredicate>),
}

impl SupportPredicate {
    pub fn explicit(mut list: Vec<u64>) -> Self {
        list.sort_unstable();
        list.dedup();
        SupportPredicate::Explicit(list)
    }

    pub fn contains(&self, q: u64) -> bool {
        match self {
            SupportPredicate::All => true,
            SupportPredicate::Primes => q >= 2 && crate::arithmetic::is_prime(q),
            SupportPredicate::Powers { base } => is_power_of(q, *base),
            SupportPredicate::Arithmetic { modulus, residue } => q % modulus == residue % modulus,
            SupportPredicate::Explicit(list) => list.binary_search(&q).is_ok(),
            SupportPredicate::DensitySampler { shape, c } => {
                let f = |n: u64| (c * n as f64 * shape.eval(n as f64)).floor();
                q >= 1 && f(q) > f(q - 1)
            }
            SupportPredicate::TotientRatioAtMost(rho) => {
                (factorize(q).totient() as f64) <= rho * q as f64
            }
            SupportPredicate::TotientRatioAbove(rho) => {
                (factorize(q).totient() as f64) > rho * q as f64
            }
            SupportPredicate::Intersection(parts) => parts.iter().all(|p| p.contains(q)),
        }
    }

    /// Membership of `1..=n`, index `q − 1`. Uses sieves where available.
    pub fn indicator_up_to(&self, n: u64) -> Vec<bool> {
        match self {
            SupportPredicate::All => vec![true; n as usize],
            SupportPredicate::Primes => {
                let mut v = vec![false; n as usize];
                for p in primes_up_to(n) {
                    v[p as usize - 1] = true;
                }
                v
            }
            SupportPredicate::TotientRatioAtMost(_) | SupportPredicate::TotientRatioAbove(_) => {
                if n == 0 {
                    return Vec::new();
                }
                let table = TotientTable::new(n).expect("n >= 1");
                (1..=n)
                    .map(|q| {
                        let phi = table.get(q) as f64;
                        match self {
                            SupportPredicate::TotientRatioAtMost(rho) => phi <= rho * q as f64,
                            SupportPredicate::TotientRatioAbove(rho) => phi > rho * q as f64,
                            _ => unreachable!(),
                        }
                    })
                    .collect()
            }
            SupportPredicate::Intersection(parts) => {
                let mut acc = vec![true; n as usize];
                for p in parts {
                    for (a, b) in acc.iter_mut().zip(p.indicator_up_to(n)) {
                        *a &= b;
                    }
                }
                acc
            }
            _ => (1..=n).into_par_iter().map(|q| self.contains(q)).collect(),
        }
    }
}

fn is_power_of(q: u64, base: u64) -> bool {
    if base < 2 || q < base {
        return false;
    }
    let mut x = q;
    while x.is_multiple_of(base) {
        x /= base;
    }
    x == 1
}

impl fmt::Display for SupportPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportPredicate::All => write!(f, "all"),
            SupportPredicate::Primes => write!(f, "primes"),
            SupportPredicate::Powers { base } => write!(f, "powers:{base}"),
            SupportPredicate::Arithmetic { modulus, residue } => {
                write!(f, "arith:m={modulus},r={residue}")
            }
            SupportPredicate::Explicit(list) => {
                let items: Vec<String> = list.iter().map(u64::to_string).collect();
                write!(f, "list:{}", items.join(","))
            }
            SupportPredicate::DensitySampler { shape, c } => {
                write!(f, "density:{},c={c}", shape.name())
            }
            SupportPredicate::TotientRatioAtMost(rho) => write!(f, "totient_le:{rho}"),
            SupportPredicate::TotientRatioAbove(rho) => write!(f, "totient_gt:{rho}"),
            SupportPredicate::Intersection(parts) => {
                let items: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "{}", items.join("+"))
            }
        }
    }
}

impl FromStr for SupportPredicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('+') {
            let parts = s
                .split('+')
                .map(str::parse)
                .collect::<Result<Vec<SupportPredicate>>>()?;
            return Ok(SupportPredicate::Intersection(parts));
        }
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "all" => Ok(SupportPredicate::All),
            "primes" => Ok(SupportPredicate::Primes),
            "powers" => {
                let base = parse_num::<u64>(s, arg)?;
                if base < 2 {
                    return Err(Error::parse(s, "power base must be at least 2"));
                }
                Ok(SupportPredicate::Powers { base })
            }
            "arith" => {
                let kv = parse_kv(s, arg)?;
                let modulus: u64 = required(s, &kv, "m")?;
                let residue: u64 = required(s, &kv, "r")?;
                if modulus == 0 {
                    return Err(Error::parse(s, "modulus must be positive"));
                }
                Ok(SupportPredicate::Arithmetic { modulus, residue })
            }
            "list" => {
                let list = arg
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| parse_num::<u64>(s, t))
                    .collect::<Result<Vec<u64>>>()?;
                Ok(SupportPredicate::explicit(list))
            }
            "density" => {
                let (shape_name, rest) = arg.split_once(',').unwrap_or((arg, ""));
                let shape = match shape_name {
                    "loglog" => DensityShape::LogLogOverLogSquared,
                    "invlogsq" => DensityShape::InverseLogSquared,
                    "invlog" => DensityShape::InverseLog,
                    other => return Err(Error::parse(s, format!("unknown density shape `{other}`"))),
                };
                let kv = parse_kv(s, rest)?;
                let c = optional(s, &kv, "c")?.unwrap_or(1.0);
                Ok(SupportPredicate::DensitySampler { shape, c })
            }
            "totient_le" => Ok(SupportPredicate::TotientRatioAtMost(parse_num(s, arg)?)),
            "totient_gt" => Ok(SupportPredicate::TotientRatioAbove(parse_num(s, arg)?)),
            _ => Err(Error::parse(s, format!("unknown support `{head}`"))),
        }
    }
}

/// A named pointwise rule, evaluated lazily and range-checked on every call.
#[derive(Clone)]
pub struct CustomRule {
    name: String,
    rule: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
}

impl CustomRule {
    pub fn new(name: impl Into<String>, rule: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }
}

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRule").field("name", &self.name).finish()
    }
}

/// Values of a tabulated ψ, with the file it was read from (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct PsiTable {
    pub source: Option<String>,
    pub values: BTreeMap<u64, f64>,
}

/// A declarative approximation function.
#[derive(Clone, Debug)]
pub enum PsiSpec {
    /// `c / q^s`; `const:c` is the case `s = 0`.
    Power { c: f64, s: f64 },
    /// `c / (q (log q)^t)` for `q ≥ 3`, zero for `q ≤ 2`.
    PowLog { c: f64, t: f64 },
    EpsOverQ { eps: f64 },
    Table(Arc<PsiTable>),
    Restricted {
        support: SupportPredicate,
        base: Box<PsiSpec>,
    },
    /// `c / φ(q)` on integers with `q/φ(q) ≥ min_ratio`: mass pushed onto
    /// highly divisible moduli. A stand-in family for experiments of the
    /// Duffin–Schaeffer type, not a reproduction of any specific
    /// counterexample.
    DivisibleMass { c: f64, min_ratio: f64 },
    Custom(CustomRule),
}

impl PsiSpec {
    pub fn constant(c: f64) -> Result<Self> {
        Self::power(c, 0.0)
    }

    pub fn power(c: f64, s: f64) -> Result<Self> {
        check_range(1, c)?;
        if !(s >= 0.0) {
            return Err(Error::invalid(format!("power exponent must be >= 0 (got {s})")));
        }
        Ok(PsiSpec::Power { c, s })
    }

    pub fn powlog(c: f64, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !(c >= 0.0) {
            return Err(Error::invalid("powlog needs c >= 0 and t >= 0"));
        }
        // the largest value is at q = 3
        check_range(3, c / (3.0 * 3f64.ln().powf(t)))?;
        Ok(PsiSpec::PowLog { c, t })
    }

    pub fn eps_over_q(eps: f64) -> Result<Self> {
        check_range(1, eps)?;
        Ok(PsiSpec::EpsOverQ { eps })
    }

    pub fn table(values: BTreeMap<u64, f64>, source: Option<String>) -> Result<Self> {
        for (&q, &v) in &values {
            if q == 0 {
                return Err(Error::invalid("table entries need q >= 1"));
            }
            check_range(q, v)?;
        }
        Ok(PsiSpec::Table(Arc::new(PsiTable { source, values })))
    }

    /// Reads CSV rows `q,value`; a non-numeric first row is taken as a header.
    pub fn table_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut values = BTreeMap::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let (Some(q), Some(v)) = (rec.get(0), rec.get(1)) else {
                return Err(Error::invalid(format!("row {} needs two columns", i + 1)));
            };
            match (q.parse::<u64>(), v.parse::<f64>()) {
                (Ok(q), Ok(v)) => {
                    values.insert(q, v);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::invalid(format!("row {} is not `q,value`", i + 1))),
            }
        }
        Self::table(values, Some(path.display().to_string()))
    }

    pub fn restricted(support: SupportPredicate, base: PsiSpec) -> Self {
        PsiSpec::Restricted {
            support,
            base: Box::new(base),
        }
    }

    pub fn divisible_mass(c: f64, min_ratio: f64) -> Result<Self> {
        check_range(1, c)?;
        Ok(PsiSpec::DivisibleMass { c, min_ratio })
    }

    pub fn custom(name: impl Into<String>, rule: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        PsiSpec::Custom(CustomRule::new(name, rule))
    }

    pub fn parse(s: &str) -> Result<Self> {
        s.parse()
    }

    /// ψ(q), checked to lie in `[0, 1/2]`.
    pub fn eval(&self, q: u64) -> Result<f64> {
        if q == 0 {
            return Err(Error::invalid("psi is defined for q >= 1"));
        }
        let v = self.raw(q)?;
        check_range(q, v)?;
        Ok(v)
    }

    fn raw(&self, q: u64) -> Result<f64> {
        let qf = q as f64;
        Ok(match self {
            PsiSpec::Power { c, s } => {
                if *s == 0.0 {
                    *c
                } else {
                    c / qf.powf(*s)
                }
            }
            PsiSpec::PowLog { c, t } => {
                if q < 3 {
                    0.0
                } else {
                    c / (qf * qf.ln().powf(*t))
                }
            }
            PsiSpec::EpsOverQ { eps } => eps / qf,
            PsiSpec::Table(t) => t.values.get(&q).copied().unwrap_or(0.0),
            PsiSpec::Restricted { support, base } => {
                if support.contains(q) {
                    base.eval(q)?
                } else {
                    0.0
                }
            }
            PsiSpec::DivisibleMass { c, min_ratio } => {
                let phi = factorize(q).totient() as f64;
                if qf >= min_ratio * phi {
                    c / phi
                } else {
                    0.0
                }
            }
            PsiSpec::Custom(rule) => (rule.rule)(q),
        })
    }

    /// `[ψ(1), …, ψ(n)]`, evaluated in parallel; restricted supports use
    /// sieved indicators.
    pub fn values_up_to(&self, n: u64) -> Result<Vec<f64>> {
        match self {
            PsiSpec::Restricted { support, base } => {
                let mask = support.indicator_up_to(n);
                let base_vals = base.values_up_to(n)?;
                Ok(base_vals
                    .into_iter()
                    .zip(mask)
                    .map(|(v, m)| if m { v } else { 0.0 })
                    .collect())
            }
            _ => (1..=n).into_par_iter().map(|q| self.eval(q)).collect(),
        }
    }
}

fn check_range(q: u64, v: f64) -> Result<()> {
    if (0.0..=PSI_MAX).contains(&v) {
        Ok(())
    } else {
        Err(Error::RangeViolation { q, value: v })
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Power { c, s } if *s == 0.0 => write!(f, "const:{c}"),
            PsiSpec::Power { c, s } => write!(f, "power:c={c},s={s}"),
            PsiSpec::PowLog { c, t } => write!(f, "powlog:t={t},c={c}"),
            PsiSpec::EpsOverQ { eps } => write!(f, "eps_over_q:{eps}"),
            PsiSpec::Table(t) => match &t.source {
                Some(path) => write!(f, "table:{path}"),
                None => write!(f, "table:<inline {} entries>", t.values.len()),
            },
            PsiSpec::Restricted { support, base } => write!(f, "restrict:{support};{base}"),
            PsiSpec::DivisibleMass { c, min_ratio } => write!(f, "divisible:c={c},ratio={min_ratio}"),
            PsiSpec::Custom(rule) => write!(f, "custom:{}", rule.name),
        }
    }
}

impl FromStr for PsiSpec {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let s = input.trim();
        let (head, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(s, "expected `<kind>:<arguments>`"))?;
        let lift = |e: Error| match e {
            Error::RangeViolation { .. } | Error::InvalidArgument(_) => Error::parse(s, e.to_string()),
            other => other,
        };
        match head {
            "const" => PsiSpec::constant(parse_num(s, arg)?).map_err(lift),
            "power" => {
                let kv = parse_kv(s, arg)?;
                PsiSpec::power(required(s, &kv, "c")?, required(s, &kv, "s")?).map_err(lift)
            }
            "powlog" => {
                let kv = parse_kv(s, arg)?;
                let t = required(s, &kv, "t")?;
                let c = optional(s, &kv, "c")?.unwrap_or(1.0);
                PsiSpec::powlog(c, t).map_err(lift)
            }
            "eps_over_q" => PsiSpec::eps_over_q(parse_num(s, arg)?).map_err(lift),
            "divisible" => {
                let kv = parse_kv(s, arg)?;
                let c = required(s, &kv, "c")?;
                let ratio = optional(s, &kv, "ratio")?.unwrap_or(3.0);
                PsiSpec::divisible_mass(c, ratio).map_err(lift)
            }
            "table" => {
                if arg.is_empty() {
                    return Err(Error::parse(s, "table needs a file path"));
                }
                PsiSpec::table_from_csv(arg).map_err(|e| match e {
                    Error::Io(io) => Error::parse(s, io.to_string()),
                    Error::Csv(c) => Error::parse(s, c.to_string()),
                    other => lift(other),
                })
            }
            "restrict" => {
                let (pred, base) = arg
                    .split_once(';')
                    .ok_or_else(|| Error::parse(s, "expected `restrict:<support>;<psi>`"))?;
                Ok(PsiSpec::restricted(pred.parse()?, base.parse()?))
            }
            _ => Err(Error::parse(s, format!("unknown psi kind `{head}`"))),
        }
    }
}

fn parse_num<N: FromStr>(input: &str, token: &str) -> Result<N> {
    token
        .trim()
        .parse()
        .map_err(|_| Error::parse(input, format!("`{token}` is not a valid number")))
}

fn parse_kv<'a>(input: &str, arg: &'a str) -> Result<Vec<(&'a str, &'a str)>> {
    arg.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse(input, format!("expected key=value, got `{t}`")))
        })
        .collect()
}

fn optional<N: FromStr>(input: &str, kv: &[(&str, &str)], key: &str) -> Result<Option<N>> {
    kv.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| parse_num(input, v))
        .transpose()
}

fn required<N: FromStr>(input: &str, kv: &[(&str, &str)], key: &str) -> Result<N> {
    optional(input, kv, key)?.ok_or_else(|| Error::parse(input, format!("missing `{key}=`")))
}

/// Partial sums of `Σ_{q≤Q} q·(ψ(q)/q)^s` for one exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentRow {
    pub s: f64,
    pub partial_sum: f64,
    pub checkpoints: Vec<(u64, f64)>,
    pub growth: Growth,
}

/// Heuristic bracket for the Hausdorff exponent
/// `d(ψ) = inf{s ∈ [0,1] : Σ q (ψ(q)/q)^s < ∞}`.
///
/// `bracket` is `[largest s classified growing, smallest s classified
/// flattening]`, defaulting to the ends of `[0,1]`. Finite partial sums cannot
/// decide convergence; this is a reading aid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentReport {
    pub rows: Vec<ExponentRow>,
    pub bracket: (f64, f64),
}

pub fn d_exponent_estimate(spec: &PsiSpec, s_grid: &[f64], q_max: u64) -> Result<ExponentReport> {
    if s_grid.is_empty() || s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid("s grid must be non-empty with values in [0,1]"));
    }
    if q_max == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    let psi = spec.values_up_to(q_max)?;
    let checkpoints = dyadic_checkpoints(q_max);
    let mut rows: Vec<ExponentRow> = s_grid
        .iter()
        .map(|&s| {
            let mut acc = crate::scalar::CompensatedSum::new();
            let mut trace = Vec::with_capacity(checkpoints.len());
            let mut next = 0;
            for (i, &v) in psi.iter().enumerate() {
                let q = (i + 1) as u64;
                if v > 0.0 {
                    acc.add(q as f64 * (v / q as f64).powf(s));
                }
                if next < checkpoints.len() && checkpoints[next] == q {
                    trace.push((q, acc.value()));
                    next += 1;
                }
            }
            ExponentRow {
                s,
                partial_sum: acc.value(),
                growth: classify_growth(&trace),
                checkpoints: trace,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.s.total_cmp(&b.s));
    let low = rows
        .iter()
        .filter(|r| r.growth == Growth::Growing)
        .map(|r| r.s)
        .fold(0.0, f64::max);
    let high = rows
        .iter()
        .filter(|r| r.growth == Growth::Flattening && r.s >= low)
        .map(|r| r.s)
        .fold(1.0, f64::min);
    Ok(ExponentReport {
        rows,
        bracket: (low, high),
    })
}

/// Counting data for `A ∩ [1, N]` against the two density thresholds of the
/// Littlewood-along-subsequences dichotomy.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityRow {
    pub n: u64,
    pub count: u64,
    pub density: f64,
    /// `loglog N / (log N)²` (absent for `N < 3`).
    pub loglog_threshold: Option<f64>,
    /// `1 / (log N)²` (absent for `N < 2`).
    pub inverse_log_sq_threshold: Option<f64>,
}

impl DensityRow {
    pub fn ratio_to_loglog(&self) -> Option<f64> {
        self.loglog_threshold.map(|t| self.density / t)
    }

    pub fn ratio_to_inverse_log_sq(&self) -> Option<f64> {
        self.inverse_log_sq_threshold.map(|t| self.density / t)
    }
}

pub fn density_profile(pred: &SupportPredicate, n_grid: &[u64]) -> Result<Vec<DensityRow>> {
    if n_grid.windows(2).any(|w| w[0] > w[1]) || n_grid.first() == Some(&0) {
        return Err(Error::invalid("N grid must be ascending positive integers"));
    }
    let Some(&n_max) = n_grid.last() else {
        return Ok(Vec::new());
    };
    let mask = pred.indicator_up_to(n_max);
    let mut rows = Vec::with_capacity(n_grid.len());
    let mut count = 0u64;
    let mut seen = 0u64;
    for &n in n_grid {
        while seen < n {
            count += mask[seen as usize] as u64;
            seen += 1;
        }
        let nf = n as f64;
        let l = nf.ln();
        rows.push(DensityRow {
            n,
            count,
            density: count as f64 / nf,
            loglog_threshold: (n >= 3).then(|| l.ln() / (l * l)),
            inverse_log_sq_threshold: (n >= 2).then(|| 1.0 / (l * l)),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(PsiSpec::constant(0.25).unwrap().eval(17).unwrap(), 0.25);
        assert!((PsiSpec::eps_over_q(0.1).unwrap().eval(5).unwrap() - 0.02).abs() < 1e-17);
        let r = PsiSpec::restricted(SupportPredicate::Primes, PsiSpec::constant(0.25).unwrap());
        assert_eq!(r.eval(6).unwrap(), 0.0);
        assert_eq!(r.eval(7).unwrap(), 0.25);
    }

    #[test]
    fn range_violations() {
        assert!(matches!(
            PsiSpec::constant(0.75),
            Err(Error::RangeViolation { q: 1, .. })
        ));
        let bad = PsiSpec::custom("q/10", |q| q as f64 / 10.0);
        assert_eq!(bad.eval(5).unwrap(), 0.5);
        match bad.eval(6) {
            Err(Error::RangeViolation { q, value }) => {
                assert_eq!(q, 6);
                assert!((value - 0.6).abs() < 1e-15);
            }
            other => panic!("expected range violation, got {other:?}"),
        }
        assert!(bad.values_up_to(10).is_err());
        let negative = PsiSpec::custom("neg", |_| -0.1);
        assert!(negative.eval(1).is_err());
    }

    #[test]
    fn parse_examples() {
        for (text, q, expected) in [
            ("const:0.25", 9, 0.25),
            ("powlog:t=2", 10, 1.0 / (10.0 * 10f64.ln().powi(2))),
            ("powlog:t=2", 2, 0.0),
            ("eps_over_q:0.1", 4, 0.025),
            ("restrict:primes;const:0.25", 8, 0.0),
            ("restrict:primes;const:0.25", 11, 0.25),
            ("restrict:arith:m=2,r=0;eps_over_q:0.25", 6, 0.25 / 6.0),
            ("restrict:totient_le:0.25;eps_over_q:0.25", 210, 0.25 / 210.0),
            ("restrict:totient_le:0.25;eps_over_q:0.25", 30, 0.0),
            ("power:c=0.5,s=1", 4, 0.125),
            ("restrict:primes+arith:m=4,r=3;const:0.5", 7, 0.5),
            ("restrict:primes+arith:m=4,r=3;const:0.5", 5, 0.0),
            ("divisible:c=0.5,ratio=3", 30, 0.5 / 8.0),
            ("divisible:c=0.5,ratio=3", 7, 0.0),
        ] {
            let spec = PsiSpec::parse(text).unwrap();
            assert!((spec.eval(q).unwrap() - expected).abs() < 1e-15, "{text} at {q}");
        }
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "",
            "const",
            "const:abc",
            "const:0.9",
            "wat:1",
            "restrict:primes",
            "restrict:bogus;const:0.1",
            "power:c=0.1",
            "table:/nonexistent/file.csv",
            "powlog:t=2,c=9",
        ] {
            let err = PsiSpec::parse(bad).unwrap_err();
            assert!(err.is_usage(), "{bad}: {err}");
        }
    }

    #[test]
    fn table_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("psi.csv");
        std::fs::write(&path, "q,value\n1,0.5\n3,0.125\n").unwrap();
        let spec = PsiSpec::parse(&format!("table:{}", path.display())).unwrap();
        assert_eq!(spec.eval(1).unwrap(), 0.5);
        assert_eq!(spec.eval(2).unwrap(), 0.0);
        assert_eq!(spec.eval(3).unwrap(), 0.125);
        std::fs::write(&path, "1,0.75\n").unwrap();
        assert!(PsiSpec::parse(&format!("table:{}", path.display())).is_err());
    }

    #[test]
    fn catalog_specs_stay_in_range() {
        let catalog = [
            "const:0.5",
            "power:c=0.5,s=1",
            "power:c=0.5,s=3",
            "powlog:t=0",
            "powlog:t=1",
            "powlog:t=2",
            "powlog:t=2,c=1.5",
            "eps_over_q:0.5",
            "divisible:c=0.5",
            "restrict:primes;eps_over_q:0.5",
            "restrict:powers:2;const:0.5",
            "restrict:density:loglog,c=2;eps_over_q:0.1",
        ];
        for text in catalog {
            let vals = PsiSpec::parse(text).unwrap().values_up_to(100_000).unwrap();
            assert!(vals.iter().all(|v| (0.0..=0.5).contains(v)), "{text}");
        }
    }

    #[test]
    fn values_up_to_matches_pointwise_eval() {
        let spec = PsiSpec::parse("restrict:totient_gt:0.4+primes;eps_over_q:0.3").unwrap();
        let vals = spec.values_up_to(500).unwrap();
        for q in 1..=500u64 {
            assert_eq!(vals[q as usize - 1], spec.eval(q).unwrap());
        }
    }

    #[test]
    fn harmonic_partial_sum_for_inverse_psi() {
        // ψ(q) = 1/q (scaled into range): q·(ψ/q)^1 = c/q, a harmonic sum
        let spec = PsiSpec::power(0.5, 1.0).unwrap();
        let rep = d_exponent_estimate(&spec, &[1.0], 1000).unwrap();
        let harmonic: f64 = (1..=1000).map(|q| 1.0 / q as f64).sum();
        assert!((rep.rows[0].partial_sum - 0.5 * harmonic).abs() < 1e-12);
    }

    #[test]
    fn zero_psi_sums_vanish() {
        let rep = d_exponent_estimate(&PsiSpec::constant(0.0).unwrap(), &[0.0, 0.5, 1.0], 256).unwrap();
        assert!(rep.rows.iter().all(|r| r.partial_sum == 0.0));
    }

    #[test]
    fn exponent_bracket_for_cubic_decay() {
        // q·(q^{-3}/q)^s = q^{1−4s}: divergent for s ≤ 1/2, convergent above
        let spec = PsiSpec::power(0.5, 3.0).unwrap();
        let rep = d_exponent_estimate(&spec, &[0.5, 1.0], 1 << 16).unwrap();
        assert_eq!(rep.rows[0].growth, Growth::Growing);
        assert_eq!(rep.rows[1].growth, Growth::Flattening);
        assert_eq!(rep.bracket, (0.5, 1.0));
        assert!(rep.bracket.0 <= 2.0 / 3.0 && 2.0 / 3.0 <= rep.bracket.1);
    }

    #[test]
    fn exponent_sums_monotone() {
        let spec = PsiSpec::parse("powlog:t=1").unwrap();
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let rep = d_exponent_estimate(&spec, &grid, 4096).unwrap();
        for row in &rep.rows {
            assert!(row.checkpoints.windows(2).all(|w| w[0].1 <= w[1].1));
        }
        assert!(rep.rows.windows(2).all(|w| w[0].partial_sum >= w[1].partial_sum));
    }

    #[test]
    fn density_examples() {
        let all = density_profile(&SupportPredicate::All, &[100]).unwrap();
        assert_eq!(all[0].density, 1.0);
        let primes = density_profile(&SupportPredicate::Primes, &[100]).unwrap();
        assert_eq!(primes[0].count, 25);
        assert_eq!(primes[0].density, 0.25);
        let pow2 = density_profile(&SupportPredicate::Powers { base: 2 }, &[64]).unwrap();
        assert_eq!(pow2[0].count, 6);
        assert_eq!(pow2[0].density, 6.0 / 64.0);
        assert!(density_profile(&SupportPredicate::All, &[10, 5]).is_err());
    }

    #[test]
    fn density_sampler_tracks_target() {
        let pred = SupportPredicate::DensitySampler {
            shape: DensityShape::InverseLog,
            c: 1.0,
        };
        let rows = density_profile(&pred, &[100_000]).unwrap();
        let target = 1.0 / 100_000f64.ln();
        assert!((rows[0].density / target - 1.0).abs() < 0.01);
    }

    #[test]
    fn sub_support_density_never_exceeds_superset() {
        let sup = SupportPredicate::Arithmetic { modulus: 2, residue: 1 };
        let sub = SupportPredicate::Intersection(vec![sup.clone(), SupportPredicate::Primes]);
        let grid: Vec<u64> = (1..=20).map(|i| i * 500).collect();
        let a = density_profile(&sup, &grid).unwrap();
        let b = density_profile(&sub, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.density <= x.density);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spec_text() -> impl Strategy<Value = String> {
            let base = prop_oneof![
                (0.0f64..0.5).prop_map(|c| format!("const:{c}")),
                (0.0f64..0.5, 0.0f64..4.0).prop_map(|(c, s)| format!("power:c={c},s={s}")),
                (0.0f64..1.5, 0.0f64..3.0).prop_map(|(c, t)| format!("powlog:t={t},c={c}")),
                (0.0f64..0.5).prop_map(|e| format!("eps_over_q:{e}")),
            ];
            let support = prop_oneof![
                Just("primes".to_string()),
                (2u64..10).prop_map(|b| format!("powers:{b}")),
                (1u64..12, 0u64..12).prop_map(|(m, r)| format!("arith:m={m},r={r}")),
                (0.0f64..1.0).prop_map(|r| format!("totient_le:{r}")),
            ];
            (base, proptest::option::of(support)).prop_map(|(b, s)| match s {
                Some(s) => format!("restrict:{s};{b}"),
                None => b,
            })
        }

        proptest! {
            #[test]
            fn display_round_trips(text in spec_text(), q in 1u64..10_000) {
                let spec = PsiSpec::parse(&text).unwrap();
                let again = PsiSpec::parse(&spec.to_string()).unwrap();
                prop_assert_eq!(spec.to_string(), again.to_string());
                let v = spec.eval(q).unwrap();
                prop_assert_eq!(v, again.eval(q).unwrap());
                prop_assert!((0.0..=0.5).contains(&v));
            }
        }
    }
}
