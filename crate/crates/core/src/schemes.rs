//! Mutation-rate schemes: fixed, per-offspring, banded (time-variable),
//! capped, and the oracle-greedy condition-variable probe.
//!
//! A [`MutationScheme`] is a resolved, size-independent description. Binding
//! it to a problem size and offspring count ([`MutationScheme::bind`]) yields
//! a [`BoundScheme`] that emits rates and precomputes whatever lookup tables
//! the scheme needs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::kernel::flip_row;
use crate::error::{invalid, Error, Result};
use crate::formula::{Quantity, Vars};

/// How a banded scheme spreads rates over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandPolicy {
    /// Cycle deterministically through a geometric grid of rates. Offspring
    /// `chi` of generation `t` gets grid entry `(t * lambda + chi - 1) mod levels`.
    #[default]
    Cycle,
    /// Draw every offspring's rate log-uniformly from the band.
    LogUniform,
}

impl FromStr for BandPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cycle" => Ok(Self::Cycle),
            "log-uniform" | "log_uniform" | "loguniform" => Ok(Self::LogUniform),
            other => Err(invalid(format!("unknown band policy {other:?}"))),
        }
    }
}

impl fmt::Display for BandPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cycle => "cycle",
            Self::LogUniform => "log-uniform",
        })
    }
}

pub const DEFAULT_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Fixed(f64),
    PerOffspring(Vec<f64>),
    Banded {
        lo: f64,
        hi: f64,
        policy: BandPolicy,
        levels: usize,
    },
    Capped {
        inner: Box<MutationScheme>,
        cap: f64,
    },
    OracleGreedy(Vec<f64>),
}

/// A mutation-rate rule with declared bounds on every rate it can emit.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationScheme {
    kind: Kind,
}

fn check_rate(what: &str, p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(invalid(format!("{what} outside [0, 1]: {p}")))
    }
}

impl MutationScheme {
    /// Constant rate `p`.
    pub fn fixed(p: f64) -> Result<Self> {
        check_rate("mutation rate", p)?;
        Ok(Self { kind: Kind::Fixed(p) })
    }

    /// Offspring `chi` always uses `rates[(chi - 1) % rates.len()]`.
    pub fn per_offspring(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(invalid("per-offspring rate list is empty"));
        }
        for &p in &rates {
            check_rate("mutation rate", p)?;
        }
        Ok(Self {
            kind: Kind::PerOffspring(rates),
        })
    }

    pub fn banded(lo: f64, hi: f64, policy: BandPolicy) -> Result<Self> {
        Self::banded_with_levels(lo, hi, policy, DEFAULT_LEVELS)
    }

    pub fn banded_with_levels(lo: f64, hi: f64, policy: BandPolicy, levels: usize) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(invalid(format!(
                "banded scheme needs 0 < lo <= hi <= 1, got lo = {lo}, hi = {hi}"
            )));
        }
        if levels == 0 {
            return Err(invalid("banded scheme needs at least one level"));
        }
        Ok(Self {
            kind: Kind::Banded {
                lo,
                hi,
                policy,
                levels,
            },
        })
    }

    /// `min(inner rate, cap)`.
    pub fn capped(inner: MutationScheme, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap <= 1.0) {
            return Err(invalid(format!("cap outside (0, 1]: {cap}")));
        }
        Ok(Self {
            kind: Kind::Capped {
                inner: Box::new(inner),
                cap,
            },
        })
    }

    /// Each generation picks the menu rate with the highest exact probability
    /// that the best offspring beats the (shifted) parent. Needs oracle access
    /// to the parent's true matching count.
    pub fn oracle_greedy(menu: Vec<f64>) -> Result<Self> {
        if menu.is_empty() {
            return Err(invalid("oracle-greedy menu is empty"));
        }
        for &p in &menu {
            check_rate("menu rate", p)?;
        }
        Ok(Self {
            kind: Kind::OracleGreedy(menu),
        })
    }

    pub fn name(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter().map(|p| format!("{p}")).collect::<Vec<_>>().join(",")
        }
        match &self.kind {
            Kind::Fixed(p) => format!("fixed({p})"),
            Kind::PerOffspring(v) => format!("per-offspring({})", list(v)),
            Kind::Banded {
                lo,
                hi,
                policy,
                levels,
            } => match policy {
                BandPolicy::Cycle => format!("banded({lo},{hi},cycle/{levels})"),
                BandPolicy::LogUniform => format!("banded({lo},{hi},log-uniform)"),
            },
            Kind::Capped { inner, cap } => format!("capped({},{cap})", inner.name()),
            Kind::OracleGreedy(menu) => format!("oracle-greedy({})", list(menu)),
        }
    }

    /// `(inf, sup)` over every rate the scheme can emit.
    pub fn declared_bounds(&self) -> (f64, f64) {
        let span = |v: &[f64]| {
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        match &self.kind {
            Kind::Fixed(p) => (*p, *p),
            Kind::PerOffspring(v) | Kind::OracleGreedy(v) => span(v),
            Kind::Banded { lo, hi, .. } => (*lo, *hi),
            Kind::Capped { inner, cap } => {
                let (lo, hi) = inner.declared_bounds();
                (lo.min(*cap), hi.min(*cap))
            }
        }
    }

    pub fn is_oracle(&self) -> bool {
        match &self.kind {
            Kind::OracleGreedy(_) => true,
            Kind::Capped { inner, .. } => inner.is_oracle(),
            _ => false,
        }
    }

    /// Specialises the scheme to problem size `n` with `lambda` offspring.
    pub fn bind(&self, n: usize, lambda: usize) -> BoundScheme {
        assert!(n > 0 && lambda > 0);
        BoundScheme {
            n,
            lambda,
            plan: Plan::build(&self.kind, n),
            bounds: self.declared_bounds(),
            oracle: self.is_oracle(),
            name: self.name(),
        }
    }
}

impl fmt::Display for MutationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Observable information a condition-variable scheme may consult.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionContext {
    pub n: usize,
    pub t: u64,
    pub lambda: usize,
    pub parent_fitness: f64,
    pub prev_parent_fitness: Option<f64>,
    pub last_accepted: bool,
    oracle_matching: Option<usize>,
}

impl ConditionContext {
    pub fn new(
        n: usize,
        t: u64,
        lambda: usize,
        parent_fitness: f64,
        prev_parent_fitness: Option<f64>,
        last_accepted: bool,
    ) -> Self {
        Self {
            n,
            t,
            lambda,
            parent_fitness,
            prev_parent_fitness,
            last_accepted,
            oracle_matching: None,
        }
    }

    /// Reveals the parent's true matching count. Only oracle schemes accept
    /// a context carrying it.
    pub fn with_oracle_matching(mut self, matching: usize) -> Self {
        self.oracle_matching = Some(matching);
        self
    }

    pub fn oracle_matching(&self) -> Option<usize> {
        self.oracle_matching
    }
}

/// `count` offspring of one generation sharing a rate; `first_chi` is the
/// lowest 1-based offspring index in the group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGroup {
    pub rate: f64,
    pub count: usize,
    pub first_chi: usize,
}

fn merge_groups(mut groups: Vec<RateGroup>) -> Vec<RateGroup> {
    let mut out: Vec<RateGroup> = Vec::with_capacity(groups.len());
    groups.sort_by_key(|g| g.first_chi);
    for g in groups {
        match out.iter_mut().find(|o| o.rate.to_bits() == g.rate.to_bits()) {
            Some(o) => o.count += g.count,
            None => out.push(g),
        }
    }
    out
}

#[derive(Debug, Clone)]
enum Plan {
    Fixed(f64),
    List(Vec<f64>),
    Cycle(Vec<f64>),
    LogUniform { lo: f64, hi: f64 },
    Capped(Box<Plan>, f64),
    Oracle { menu: Vec<f64>, choice: Vec<usize> },
}

/// Geometric grid of `levels` rates from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, levels: usize) -> Vec<f64> {
    if levels == 1 || lo == hi {
        return vec![lo; levels.max(1)];
    }
    let ratio = (hi / lo).ln();
    (0..levels)
        .map(|k| {
            if k + 1 == levels {
                hi
            } else {
                (lo * (ratio * k as f64 / (levels - 1) as f64).exp()).clamp(lo, hi)
            }
        })
        .collect()
}

/// Menu index maximising `P(K > i)`, then `P(K >= i)`, lowest index on ties,
/// for every parent matching count `i`.
fn oracle_choices(menu: &[f64], n: usize) -> Vec<usize> {
    let rows: Vec<Vec<Vec<f64>>> = menu
        .iter()
        .map(|&p| (0..=n).map(|i| flip_row(n, i, p)).collect())
        .collect();
    (0..=n)
        .map(|i| {
            let mut best = 0;
            let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (idx, rows_p) in rows.iter().enumerate() {
                let row = &rows_p[i];
                let up: f64 = row[i + 1..].iter().sum();
                let stay = up + row[i];
                if up > best_key.0 || (up == best_key.0 && stay > best_key.1) {
                    best = idx;
                    best_key = (up, stay);
                }
            }
            best
        })
        .collect()
}

impl Plan {
    fn build(kind: &Kind, n: usize) -> Plan {
        match kind {
            Kind::Fixed(p) => Plan::Fixed(*p),
            Kind::PerOffspring(v) => Plan::List(v.clone()),
            Kind::Banded {
                lo,
                hi,
                policy: BandPolicy::Cycle,
                levels,
            } => Plan::Cycle(geometric_grid(*lo, *hi, *levels)),
            Kind::Banded {
                lo,
                hi,
                policy: BandPolicy::LogUniform,
                ..
            } => {
                if lo == hi {
                    Plan::Fixed(*lo)
                } else {
                    Plan::LogUniform { lo: *lo, hi: *hi }
                }
            }
            Kind::Capped { inner, cap } => Plan::Capped(Box::new(Plan::build(&inner.kind, n)), *cap),
            Kind::OracleGreedy(menu) => Plan::Oracle {
                menu: menu.clone(),
                choice: oracle_choices(menu, n),
            },
        }
    }

    fn rate<R: Rng + ?Sized>(&self, t: u64, chi: usize, lambda: usize, ctx: &ConditionContext, rng: &mut R) -> f64 {
        match self {
            Plan::Fixed(p) => *p,
            Plan::List(v) => v[(chi - 1) % v.len()],
            Plan::Cycle(grid) => {
                let k = grid.len() as u64;
                let idx = ((t % k) * (lambda as u64 % k) + (chi as u64 - 1)) % k;
                grid[idx as usize]
            }
            Plan::LogUniform { lo, hi } => {
                let u: f64 = rng.random();
                (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi)
            }
            Plan::Capped(inner, cap) => inner.rate(t, chi, lambda, ctx, rng).min(*cap),
            Plan::Oracle { menu, choice } => {
                let i = ctx
                    .oracle_matching
                    .expect("oracle scheme called without oracle matching");
                menu[choice[i]]
            }
        }
    }

    fn groups(&self, t: u64, lambda: usize, ctx: &ConditionContext) -> Option<Vec<RateGroup>> {
        let whole = |rate: f64| {
            Some(vec![RateGroup {
                rate,
                count: lambda,
                first_chi: 1,
            }])
        };
        match self {
            Plan::Fixed(p) => whole(*p),
            Plan::List(v) => {
                let len = v.len();
                let groups = (0..len.min(lambda))
                    .map(|k| RateGroup {
                        rate: v[k],
                        count: lambda / len + usize::from(k < lambda % len),
                        first_chi: k + 1,
                    })
                    .collect();
                Some(merge_groups(groups))
            }
            Plan::Cycle(grid) => {
                let k = grid.len();
                let base = ((t % k as u64) as usize * (lambda % k)) % k;
                let groups = (0..k)
                    .filter_map(|g| {
                        let c0 = (g + k - base) % k;
                        (c0 < lambda).then(|| RateGroup {
                            rate: grid[g],
                            count: (lambda - 1 - c0) / k + 1,
                            first_chi: c0 + 1,
                        })
                    })
                    .collect();
                Some(merge_groups(groups))
            }
            Plan::LogUniform { .. } => None,
            Plan::Capped(inner, cap) => inner.groups(t, lambda, ctx).map(|gs| {
                merge_groups(
                    gs.into_iter()
                        .map(|g| RateGroup {
                            rate: g.rate.min(*cap),
                            ..g
                        })
                        .collect(),
                )
            }),
            Plan::Oracle { menu, choice } => {
                let i = ctx
                    .oracle_matching
                    .expect("oracle scheme called without oracle matching");
                whole(menu[choice[i]])
            }
        }
    }

    fn randomized(&self) -> bool {
        match self {
            Plan::LogUniform { .. } => true,
            Plan::Capped(inner, _) => inner.randomized(),
            _ => false,
        }
    }

    fn support(&self) -> Option<Vec<f64>> {
        match self {
            Plan::Fixed(p) => Some(vec![*p]),
            Plan::List(v) | Plan::Cycle(v) | Plan::Oracle { menu: v, .. } => Some(v.clone()),
            Plan::LogUniform { .. } => None,
            Plan::Capped(inner, cap) => inner
                .support()
                .map(|v| v.into_iter().map(|p| p.min(*cap)).collect()),
        }
    }
}

/// A scheme specialised to a problem size and offspring count.
#[derive(Debug, Clone)]
pub struct BoundScheme {
    n: usize,
    lambda: usize,
    plan: Plan,
    bounds: (f64, f64),
    oracle: bool,
    name: String,
}

impl BoundScheme {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn declared_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn is_oracle(&self) -> bool {
        self.oracle
    }

    /// Whether [`rate`](Self::rate) consumes randomness.
    pub fn is_randomized(&self) -> bool {
        self.plan.randomized()
    }

    /// Every rate the scheme can emit, when that set is finite.
    pub fn support(&self) -> Option<Vec<f64>> {
        self.plan.support().map(|mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
    }

    /// The rates of all `lambda` offspring of generation `t`, grouped by
    /// value, or `None` for schemes that draw rates at random. Agrees with
    /// [`rate`](Self::rate) offspring by offspring.
    pub fn rate_groups(&self, t: u64, ctx: &ConditionContext) -> Option<Vec<RateGroup>> {
        self.check_context(ctx);
        let groups = self.plan.groups(t, self.lambda, ctx)?;
        for g in &groups {
            self.check_rate(g.rate);
        }
        Some(groups)
    }

    fn check_context(&self, ctx: &ConditionContext) {
        assert!(
            self.oracle || ctx.oracle_matching.is_none(),
            "non-oracle scheme {} must not observe the oracle matching count",
            self.name
        );
    }

    fn check_rate(&self, p: f64) {
        let (lo, hi) = self.bounds;
        assert!(
            p >= lo && p <= hi && (0.0..=1.0).contains(&p),
            "scheme {} emitted rate {p} outside declared bounds [{lo}, {hi}]",
            self.name
        );
    }

    /// Rate for offspring `chi` (1-based) of generation `t`.
    ///
    /// # Panics
    ///
    /// Panics if a non-oracle scheme is handed the oracle matching count, or
    /// if the emitted rate leaves the declared bounds.
    pub fn rate<R: Rng + ?Sized>(&self, t: u64, chi: usize, ctx: &ConditionContext, rng: &mut R) -> f64 {
        self.check_context(ctx);
        debug_assert!(chi >= 1 && chi <= self.lambda);
        let p = self.plan.rate(t, chi, self.lambda, ctx, rng);
        self.check_rate(p);
        p
    }
}

/// Scheme description as it appears in experiment configs. Rates may be
/// formulas in `n`, `sigma`, `lambda` and config constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    Fixed {
        p: Quantity,
    },
    Banded {
        lo: Quantity,
        hi: Quantity,
        #[serde(default)]
        policy: BandPolicy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
    },
    Capped {
        cap: Quantity,
        inner: Box<SchemeSpec>,
    },
    OracleGreedy {
        menu: Vec<Quantity>,
    },
    PerOffspring {
        rates: Vec<Quantity>,
    },
}

impl SchemeSpec {
    pub fn resolve(&self, vars: &Vars) -> Result<MutationScheme> {
        let all = |qs: &[Quantity]| qs.iter().map(|q| q.eval(vars)).collect::<Result<Vec<_>>>();
        match self {
            SchemeSpec::Fixed { p } => MutationScheme::fixed(p.eval(vars)?),
            SchemeSpec::Banded {
                lo,
                hi,
                policy,
                levels,
            } => MutationScheme::banded_with_levels(
                lo.eval(vars)?,
                hi.eval(vars)?,
                *policy,
                levels.unwrap_or(DEFAULT_LEVELS),
            ),
            SchemeSpec::Capped { cap, inner } => MutationScheme::capped(inner.resolve(vars)?, cap.eval(vars)?),
            SchemeSpec::OracleGreedy { menu } => MutationScheme::oracle_greedy(all(menu)?),
            SchemeSpec::PerOffspring { rates } => MutationScheme::per_offspring(all(rates)?),
        }
    }
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

/// Inline grammar `kind:args`, mirroring the JSON form:
/// `fixed:P`, `banded:LO,HI[,POLICY[,LEVELS]]`, `capped:CAP,INNER`,
/// `oracle_greedy:R1,R2,...`, `per_offspring:R1,R2,...`.
impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("scheme {s:?} is not of the form kind:args")))?;
        let kind = kind.trim().replace('-', "_");
        let parts = split_top_level(args);
        let quantities = |parts: &[&str]| -> Result<Vec<Quantity>> {
            if parts.iter().any(|p| p.is_empty()) {
                return Err(invalid(format!("scheme {s:?} has an empty argument")));
            }
            Ok(parts.iter().map(|&p| Quantity::from(p)).collect())
        };
        match kind.as_str() {
            "fixed" => match quantities(&parts)?.as_slice() {
                [p] => Ok(SchemeSpec::Fixed { p: p.clone() }),
                _ => Err(invalid(format!("fixed scheme takes one rate: {s:?}"))),
            },
            "banded" => {
                if parts.len() < 2 || parts.len() > 4 {
                    return Err(invalid(format!("banded scheme takes lo,hi[,policy[,levels]]: {s:?}")));
                }
                let q = quantities(&parts[..2])?;
                let policy = match parts.get(2) {
                    Some(p) => p.parse()?,
                    None => BandPolicy::default(),
                };
                let levels = match parts.get(3) {
                    Some(l) => Some(
                        l.parse::<usize>()
                            .map_err(|_| invalid(format!("bad level count {l:?}")))?,
                    ),
                    None => None,
                };
                Ok(SchemeSpec::Banded {
                    lo: q[0].clone(),
                    hi: q[1].clone(),
                    policy,
                    levels,
                })
            }
            "capped" => {
                let (cap, inner) = args
                    .split_once(',')
                    .ok_or_else(|| invalid(format!("capped scheme takes cap,inner: {s:?}")))?;
                Ok(SchemeSpec::Capped {
                    cap: Quantity::from(cap),
                    inner: Box::new(inner.trim().parse()?),
                })
            }
            "oracle_greedy" | "oracle" => Ok(SchemeSpec::OracleGreedy {
                menu: quantities(&parts)?,
            }),
            "per_offspring" | "list" => Ok(SchemeSpec::PerOffspring {
                rates: quantities(&parts)?,
            }),
            other => Err(invalid(format!("unknown scheme kind {other:?}"))),
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |qs: &[Quantity]| qs.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
        match self {
            SchemeSpec::Fixed { p } => write!(f, "fixed:{p}"),
            SchemeSpec::Banded {
                lo,
                hi,
                policy,
                levels,
            } => {
                write!(f, "banded:{lo},{hi},{policy}")?;
                if let Some(l) = levels {
                    write!(f, ",{l}")?;
                }
                Ok(())
            }
            SchemeSpec::Capped { cap, inner } => write!(f, "capped:{cap},{inner}"),
            SchemeSpec::OracleGreedy { menu } => write!(f, "oracle_greedy:{}", join(menu)),
            SchemeSpec::PerOffspring { rates } => write!(f, "per_offspring:{}", join(rates)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::kernel::mutate_kernel;
    use crate::rng::{Role, RunStreams};
    use proptest::prelude::*;

    fn ctx(n: usize, lambda: usize) -> ConditionContext {
        ConditionContext::new(n, 0, lambda, 0.0, None, false)
    }

    fn rng() -> crate::rng::StreamRng {
        RunStreams::new(1, 0).stream(0, Role::Init)
    }

    #[test]
    fn fixed_scheme_is_constant() {
        let s = MutationScheme::fixed(1.0 / 100.0).unwrap().bind(100, 3);
        for t in 0..5 {
            for chi in 1..=3 {
                assert_eq!(s.rate(t, chi, &ctx(100, 3), &mut rng()), 0.01);
            }
        }
        assert_eq!(s.declared_bounds(), (0.01, 0.01));
        assert!(MutationScheme::fixed(0.0).is_ok());
        assert!(MutationScheme::fixed(1.0).is_ok());
        assert!(MutationScheme::fixed(1.5).is_err());
        assert!(MutationScheme::fixed(-0.1).is_err());
    }

    #[test]
    fn banded_validation() {
        assert!(MutationScheme::banded(0.0, 0.1, BandPolicy::Cycle).is_err());
        assert!(MutationScheme::banded(0.2, 0.1, BandPolicy::Cycle).is_err());
        assert!(MutationScheme::banded(0.1, 1.1, BandPolicy::Cycle).is_err());
        assert!(MutationScheme::banded(0.1, 0.1, BandPolicy::LogUniform).is_ok());
    }

    #[test]
    fn banded_cycle_is_identical_every_generation() {
        let n = 16;
        let s = MutationScheme::banded(1.0 / 16.0, 0.25, BandPolicy::Cycle).unwrap().bind(n, 4);
        let first: Vec<f64> = (1..=4).map(|chi| s.rate(0, chi, &ctx(n, 4), &mut rng())).collect();
        assert_eq!(first[0], 0.0625);
        assert_eq!(first[3], 0.25);
        assert!(first.windows(2).all(|w| w[0] < w[1]));
        for t in 1..10 {
            let again: Vec<f64> = (1..=4).map(|chi| s.rate(t, chi, &ctx(n, 4), &mut rng())).collect();
            assert_eq!(again, first);
        }
    }

    #[test]
    fn banded_cycle_walks_the_grid_for_single_offspring() {
        let s = MutationScheme::banded(0.01, 0.08, BandPolicy::Cycle).unwrap().bind(32, 1);
        let seq: Vec<f64> = (0..8).map(|t| s.rate(t, 1, &ctx(32, 1), &mut rng())).collect();
        assert_eq!(seq[0], seq[4]);
        assert_eq!(seq[0], 0.01);
        assert_eq!(seq[3], 0.08);
        assert!((seq[1] - 0.02).abs() < 1e-15 && (seq[2] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn capped_examples() {
        let cap = 1.0 - 1.0 / 256f64.log2();
        assert_eq!(cap, 0.875);
        let half = MutationScheme::capped(MutationScheme::fixed(0.5).unwrap(), cap).unwrap().bind(256, 1);
        assert_eq!(half.rate(0, 1, &ctx(256, 1), &mut rng()), 0.5);
        let full = MutationScheme::capped(MutationScheme::fixed(1.0).unwrap(), cap).unwrap().bind(256, 1);
        assert_eq!(full.rate(0, 1, &ctx(256, 1), &mut rng()), 0.875);
        assert_eq!(full.declared_bounds(), (0.875, 0.875));
        assert!(MutationScheme::capped(MutationScheme::fixed(1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn oracle_menu_validation_and_degenerate_menu() {
        assert!(MutationScheme::oracle_greedy(vec![]).is_err());
        assert!(MutationScheme::oracle_greedy(vec![0.5, 2.0]).is_err());
        let s = MutationScheme::oracle_greedy(vec![0.3]).unwrap().bind(10, 2);
        for i in 0..=10 {
            assert_eq!(s.rate(3, 1, &ctx(10, 2).with_oracle_matching(i), &mut rng()), 0.3);
        }
    }

    #[test]
    fn oracle_at_optimum_prefers_staying() {
        let s = MutationScheme::oracle_greedy(vec![0.5, 0.0]).unwrap().bind(6, 1);
        assert_eq!(s.rate(0, 1, &ctx(6, 1).with_oracle_matching(6), &mut rng()), 0.0);
    }

    #[test]
    fn oracle_matches_brute_force_argmax() {
        // n = 8, parent at 6 matching bits, menu {1/8, 2/8, 4/8}. Oracle:
        // enumerate all 2^8 flip masks and weigh them directly.
        let n = 8;
        let i = 6;
        let menu = [0.125, 0.25, 0.5];
        let improve = |p: f64| {
            let mut total = 0.0;
            for mask in 0u32..(1 << n) {
                let flips = mask.count_ones() as i32;
                // the parent mismatches in positions 0 and 1
                let gained = (mask & 0b11).count_ones() as i32;
                let lost = flips - gained;
                if i as i32 + gained - lost > i as i32 {
                    total += p.powi(flips) * (1.0 - p).powi(n as i32 - flips);
                }
            }
            total
        };
        let scores: Vec<f64> = menu.iter().map(|&p| improve(p)).collect();
        let best = (0..3).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        let s = MutationScheme::oracle_greedy(menu.to_vec()).unwrap().bind(n, 1);
        assert_eq!(s.rate(1, 1, &ctx(n, 1).with_oracle_matching(i), &mut rng()), menu[best]);
        // cross-check against the kernel-based improvement probability
        let k = mutate_kernel(n, menu[best]).unwrap();
        let up: f64 = (i + 1..=n).map(|j| k.get(i, j)).sum();
        assert!((up - scores[best]).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "must not observe")]
    fn non_oracle_scheme_rejects_oracle_context() {
        let s = MutationScheme::fixed(0.1).unwrap().bind(10, 1);
        s.rate(0, 1, &ctx(10, 1).with_oracle_matching(3), &mut rng());
    }

    #[test]
    fn support_sets() {
        let s = MutationScheme::banded(0.1, 0.4, BandPolicy::Cycle).unwrap().bind(10, 3);
        assert_eq!(s.support().unwrap().len(), 4);
        let s = MutationScheme::banded(0.1, 0.4, BandPolicy::LogUniform).unwrap().bind(10, 3);
        assert!(s.support().is_none());
        assert!(s.is_randomized());
        let s = MutationScheme::per_offspring(vec![0.2, 0.1, 0.2]).unwrap().bind(10, 3);
        assert_eq!(s.support().unwrap(), vec![0.1, 0.2]);
    }

    #[test]
    fn inline_grammar_round_trips() {
        for text in [
            "fixed:1/n",
            "banded:1/16,0.25,cycle",
            "banded:1/n,log(n)/n,log-uniform,6",
            "capped:0.875,fixed:1",
            "capped:1-1/log(n),banded:1/n,0.5,cycle",
            "oracle_greedy:1/n,min(1/2, 4/n),1",
            "per_offspring:0.1,0.2",
        ] {
            let spec: SchemeSpec = text.parse().unwrap();
            let again: SchemeSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again, "{text}");
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<SchemeSpec>(&json).unwrap(), spec);
        }
        let spec: SchemeSpec = "banded:1/16,0.25".parse().unwrap();
        let s = spec.resolve(&Vars::new().with("n", 16.0)).unwrap();
        assert_eq!(s.declared_bounds(), (0.0625, 0.25));
        for bad in ["fixed", "fixed:", "warp:1", "banded:0.1", "fixed:0.1,0.2", "banded:0.1,0.2,zigzag"] {
            assert!(bad.parse::<SchemeSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_grammar() {
        let spec: SchemeSpec = serde_json::from_str(
            r#"{"kind":"capped","cap":0.875,"inner":{"kind":"oracle_greedy","menu":["1/n",0.5,1.0]}}"#,
        )
        .unwrap();
        let s = spec.resolve(&Vars::new().with("n", 8.0)).unwrap();
        assert!(s.is_oracle());
        assert_eq!(s.declared_bounds(), (0.125, 0.875));
        let spec: SchemeSpec = serde_json::from_str(r#"{"kind":"banded","lo":0.1,"hi":0.2,"policy":"log-uniform"}"#).unwrap();
        assert!(matches!(spec, SchemeSpec::Banded { policy: BandPolicy::LogUniform, .. }));
    }

    #[test]
    fn million_log_uniform_draws_stay_in_band() {
        let n = 16;
        let lo = 1.0 / 16.0;
        let hi = 4.0 / 16.0;
        let s = MutationScheme::banded(lo, hi, BandPolicy::LogUniform).unwrap().bind(n, 1);
        let mut r = rng();
        let c = ctx(n, 1);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..1_000_000 {
            let p = s.rate(0, 1, &c, &mut r);
            min = min.min(p);
            max = max.max(p);
        }
        assert!(min >= lo && max <= hi);
        assert!(min < 0.0626 && max > 0.2499);
    }

    fn scheme_strategy() -> impl Strategy<Value = MutationScheme> {
        let leaf = prop_oneof![
            (0.0f64..=1.0).prop_map(|p| MutationScheme::fixed(p).unwrap()),
            (1e-4f64..1.0, 0.0f64..1.0, 1usize..9, any::<bool>()).prop_map(|(lo, f, levels, cyc)| {
                let hi = lo + f * (1.0 - lo);
                let policy = if cyc { BandPolicy::Cycle } else { BandPolicy::LogUniform };
                MutationScheme::banded_with_levels(lo, hi, policy, levels).unwrap()
            }),
            proptest::collection::vec(0.0f64..=1.0, 1..5).prop_map(|v| MutationScheme::per_offspring(v).unwrap()),
            proptest::collection::vec(0.0f64..=1.0, 1..5).prop_map(|v| MutationScheme::oracle_greedy(v).unwrap()),
        ];
        leaf.prop_recursive(2, 8, 1, |inner| {
            (inner, 1e-3f64..=1.0).prop_map(|(s, cap)| MutationScheme::capped(s, cap).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn emitted_rates_respect_declared_bounds(
            scheme in scheme_strategy(),
            n in 1usize..24,
            lambda in 1usize..6,
            seed in any::<u64>(),
        ) {
            let bound = scheme.bind(n, lambda);
            let (lo, hi) = bound.declared_bounds();
            prop_assert!(0.0 <= lo && lo <= hi && hi <= 1.0);
            let streams = RunStreams::new(seed, 0);
            for t in 0..20u64 {
                for chi in 1..=lambda {
                    let mut c = ctx(n, lambda);
                    if bound.is_oracle() {
                        c = c.with_oracle_matching((t as usize * 7 + chi) % (n + 1));
                    }
                    let p = bound.rate(t, chi, &c, &mut streams.stream(t, Role::Mutation(chi as u32)));
                    prop_assert!(p >= lo && p <= hi);
                }
            }
        }

        #[test]
        fn groups_agree_with_per_offspring_rates(
            scheme in scheme_strategy(),
            n in 1usize..16,
            lambda in 1usize..40,
            t in 0u64..50,
        ) {
            let bound = scheme.bind(n, lambda);
            let mut c = ctx(n, lambda);
            if bound.is_oracle() {
                c = c.with_oracle_matching(t as usize % (n + 1));
            }
            if let Some(groups) = bound.rate_groups(t, &c) {
                prop_assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), lambda);
                let rates: Vec<f64> = (1..=lambda).map(|chi| bound.rate(t, chi, &c, &mut rng())).collect();
                for g in &groups {
                    let members: Vec<usize> = (1..=lambda).filter(|&chi| rates[chi - 1] == g.rate).collect();
                    prop_assert_eq!(members.len(), g.count);
                    prop_assert_eq!(members[0], g.first_chi);
                }
            } else {
                prop_assert!(bound.is_randomized());
            }
        }

        #[test]
        fn cap_of_one_is_identity(scheme in scheme_strategy(), n in 1usize..16, seed in any::<u64>()) {
            let plain = scheme.bind(n, 3);
            let capped = MutationScheme::capped(scheme, 1.0).unwrap().bind(n, 3);
            let streams = RunStreams::new(seed, 0);
            for t in 0..10u64 {
                for chi in 1..=3 {
                    let mut c = ctx(n, 3);
                    if plain.is_oracle() {
                        c = c.with_oracle_matching(t as usize % (n + 1));
                    }
                    let a = plain.rate(t, chi, &c, &mut streams.stream(t, Role::Mutation(chi as u32)));
                    let b = capped.rate(t, chi, &c, &mut streams.stream(t, Role::Mutation(chi as u32)));
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
