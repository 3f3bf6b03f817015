//! Bit-string genomes, Hamming geometry and the dynamic problem whose
//! optimum performs a bitwise random walk.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};

/// Fixed-length bit string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Genome {
    n: usize,
    words: Vec<u64>,
}

impl Genome {
    /// All-zero genome of length `n`.
    ///
    /// # Panics
    ///
    /// Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "genome length must be positive");
        Self {
            n,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("genome length must be positive"));
        }
        let mut g = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            g.set(i, b);
        }
        Ok(g)
    }

    /// Uniformly random genome.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut g = Self::zeros(n);
        for w in g.words.iter_mut() {
            *w = rng.random();
        }
        g.clear_tail();
        g
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.n);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.n);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.n);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(|i| self.get(i))
    }

    pub fn complement(&self) -> Self {
        let mut g = self.clone();
        for w in g.words.iter_mut() {
            *w = !*w;
        }
        g.clear_tail();
        g
    }

    /// Flips every bit independently with probability `rate`; returns the
    /// number of flipped bits.
    pub fn flip_each<R: Rng + ?Sized>(&mut self, rate: f64, rng: &mut R) -> usize {
        if rate <= 0.0 {
            return 0;
        }
        if rate >= 1.0 {
            *self = self.complement();
            return self.n;
        }
        let mut flipped = 0;
        for i in 0..self.n {
            if rng.random::<f64>() < rate {
                self.flip(i);
                flipped += 1;
            }
        }
        flipped
    }

    /// Offspring produced by bitwise mutation with the given rate.
    pub fn mutated<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Self {
        let mut child = self.clone();
        child.flip_each(rate, rng);
        child
    }

    fn clear_tail(&mut self) {
        let rem = self.n % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genome({self})")
    }
}

impl FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

/// Number of positions where `a` and `b` differ.
pub fn hamming(a: &Genome, b: &Genome) -> Result<usize> {
    if a.n != b.n {
        return Err(Error::Dimension {
            left: a.n,
            right: b.n,
        });
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Per-phase shifting rate of the optimum.
#[derive(Clone)]
pub enum ShiftSchedule {
    Fixed(f64),
    /// `sigma(t) = rates[t % rates.len()]`.
    Periodic(Vec<f64>),
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

fn valid_shift(sigma: f64) -> bool {
    sigma > 0.0 && sigma <= 0.5
}

pub(crate) fn check_shift(sigma: f64) -> Result<f64> {
    if valid_shift(sigma) {
        Ok(sigma)
    } else {
        Err(invalid(format!("sigma outside (0, 1/2]: {sigma}")))
    }
}

impl ShiftSchedule {
    pub fn fixed(sigma: f64) -> Result<Self> {
        check_shift(sigma).map(Self::Fixed)
    }

    pub fn periodic(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(invalid("periodic schedule needs at least one rate"));
        }
        for &s in &rates {
            check_shift(s)?;
        }
        Ok(Self::Periodic(rates))
    }

    /// Arbitrary time-variable schedule. Its values are checked whenever
    /// they are produced.
    pub fn custom(f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    /// Shifting rate applied when entering `phase`.
    pub fn rate_at(&self, phase: u64) -> f64 {
        let sigma = match self {
            Self::Fixed(s) => *s,
            Self::Periodic(v) => v[(phase % v.len() as u64) as usize],
            Self::Custom(f) => f(phase),
        };
        assert!(
            valid_shift(sigma),
            "shift schedule produced sigma outside (0, 1/2]: {sigma} at phase {phase}"
        );
        sigma
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::Fixed(_))
    }
}

impl fmt::Debug for ShiftSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(s) => f.debug_tuple("Fixed").field(s).finish(),
            Self::Periodic(v) => f.debug_tuple("Periodic").field(v).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Phase index, current optimum and the schedule that moves it.
#[derive(Clone, Debug)]
pub struct ProblemState {
    phase: u64,
    optimum: Genome,
    schedule: ShiftSchedule,
}

impl ProblemState {
    /// State at phase 0 with the given optimum.
    pub fn new(optimum: Genome, schedule: ShiftSchedule) -> Self {
        Self {
            phase: 0,
            optimum,
            schedule,
        }
    }

    /// Phase 0 with a uniformly random optimum.
    pub fn random<R: Rng + ?Sized>(n: usize, schedule: ShiftSchedule, rng: &mut R) -> Self {
        Self::new(Genome::random(n, rng), schedule)
    }

    pub fn phase(&self) -> u64 {
        self.phase
    }

    pub fn optimum(&self) -> &Genome {
        &self.optimum
    }

    pub fn n(&self) -> usize {
        self.optimum.len()
    }

    pub fn schedule(&self) -> &ShiftSchedule {
        &self.schedule
    }

    /// Moves to the next phase, flipping every optimum bit with the rate the
    /// schedule assigns to that phase. Returns the number of flipped bits.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let sigma = self.schedule.rate_at(self.phase + 1);
        self.phase += 1;
        self.optimum.flip_each(sigma, rng)
    }
}

/// Consuming form of [`ProblemState::advance`].
pub fn advance_phase<R: Rng + ?Sized>(mut state: ProblemState, rng: &mut R) -> ProblemState {
    state.advance(rng);
    state
}

/// BitMatching fitness: `n - H(x, optimum)`.
pub fn bitmatching_fitness(x: &Genome, state: &ProblemState) -> Result<usize> {
    Ok(x.len() - hamming(x, state.optimum())?)
}

/// Dynamic objective evaluated against the current problem state.
pub trait Objective: Sync {
    fn evaluate(&self, x: &Genome, state: &ProblemState) -> f64;

    /// Fitness of the current optimum.
    fn optimum_value(&self, state: &ProblemState) -> f64 {
        self.evaluate(state.optimum(), state)
    }

    /// Number of bits in which `x` agrees with the optimum, for objectives
    /// that expose it to oracle schemes.
    fn matching(&self, _x: &Genome, _state: &ProblemState) -> Option<usize> {
        None
    }
}

/// The BitMatching problem on a bitwise-shifting optimum.
#[derive(Debug, Clone, Copy, Default)]
pub struct BitMatching;

impl Objective for BitMatching {
    fn evaluate(&self, x: &Genome, state: &ProblemState) -> f64 {
        bitmatching_fitness(x, state).expect("genome length matches optimum") as f64
    }

    fn optimum_value(&self, state: &ProblemState) -> f64 {
        state.n() as f64
    }

    fn matching(&self, x: &Genome, state: &ProblemState) -> Option<usize> {
        bitmatching_fitness(x, state).ok()
    }
}

/// Matching-bit count of a tracked individual against the current optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CountState {
    n: usize,
    matching: usize,
}

impl CountState {
    pub fn new(n: usize, matching: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("problem size must be positive"));
        }
        if matching > n {
            return Err(invalid(format!("matching {matching} exceeds n = {n}")));
        }
        Ok(Self { n, matching })
    }

    /// Count-space view of a genome against the current optimum.
    pub fn of(x: &Genome, state: &ProblemState) -> Result<Self> {
        Ok(Self {
            n: x.len(),
            matching: bitmatching_fitness(x, state)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matching(&self) -> usize {
        self.matching
    }
}

/// `Binomial(trials, p)` draw that tolerates the degenerate cases.
pub(crate) fn binomial<R: Rng + ?Sized>(trials: usize, p: f64, rng: &mut R) -> usize {
    if trials == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        trials
    } else {
        Binomial::new(trials as u64, p)
            .expect("binomial parameters checked")
            .sample(rng) as usize
    }
}

/// Count-space optimum shift: matching bits flip away with probability
/// `sigma`, non-matching bits flip into agreement with probability `sigma`.
pub fn shift_counts<R: Rng + ?Sized>(cs: CountState, sigma: f64, rng: &mut R) -> CountState {
    debug_assert!(valid_shift(sigma));
    let lost = binomial(cs.matching, sigma, rng);
    let gained = binomial(cs.n - cs.matching, sigma, rng);
    CountState {
        n: cs.n,
        matching: cs.matching - lost + gained,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Role, RunStreams};
    use proptest::prelude::*;

    fn g(s: &str) -> Genome {
        s.parse().unwrap()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&g("0000"), &g("0000")).unwrap(), 0);
        assert_eq!(hamming(&g("1010"), &g("0101")).unwrap(), 4);
        assert_eq!(hamming(&g("110"), &g("100")).unwrap(), 1);
    }

    #[test]
    fn hamming_length_mismatch() {
        assert!(matches!(
            hamming(&g("10"), &g("100")),
            Err(Error::Dimension { left: 2, right: 3 })
        ));
    }

    #[test]
    fn fitness_examples() {
        let opt = g("10110010");
        let state = ProblemState::new(opt.clone(), ShiftSchedule::fixed(0.1).unwrap());
        assert_eq!(bitmatching_fitness(&opt, &state).unwrap(), 8);
        assert_eq!(bitmatching_fitness(&opt.complement(), &state).unwrap(), 0);

        let opt = g("0000000000");
        let state = ProblemState::new(opt, ShiftSchedule::fixed(0.1).unwrap());
        assert_eq!(bitmatching_fitness(&g("1110000000"), &state).unwrap(), 7);
        assert!(bitmatching_fitness(&g("111"), &state).is_err());
    }

    #[test]
    fn schedule_rejects_out_of_domain() {
        assert!(ShiftSchedule::fixed(0.0).is_err());
        assert!(ShiftSchedule::fixed(0.9).is_err());
        assert!(ShiftSchedule::fixed(-0.1).is_err());
        assert!(ShiftSchedule::fixed(0.5).is_ok());
        assert!(ShiftSchedule::periodic(vec![0.1, 0.6]).is_err());
        assert!(ShiftSchedule::periodic(vec![]).is_err());
    }

    #[test]
    fn periodic_schedule_cycles() {
        let s = ShiftSchedule::periodic(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(s.rate_at(0), 0.1);
        assert_eq!(s.rate_at(4), 0.2);
    }

    #[test]
    #[should_panic(expected = "sigma outside")]
    fn custom_schedule_checked_on_use() {
        ShiftSchedule::custom(|t| if t > 2 { 0.7 } else { 0.1 }).rate_at(3);
    }

    #[test]
    fn advance_increments_phase_and_flips_about_n_sigma() {
        let n = 1024;
        let streams = RunStreams::new(11, 0);
        let mut state = ProblemState::random(
            n,
            ShiftSchedule::fixed(0.5).unwrap(),
            &mut streams.stream(0, Role::Shift),
        );
        let mut total = 0usize;
        let reps = 200;
        for t in 1..=reps {
            let before = state.optimum().clone();
            let flipped = state.advance(&mut streams.stream(t, Role::Shift));
            assert_eq!(state.phase(), t);
            assert_eq!(hamming(&before, state.optimum()).unwrap(), flipped);
            total += flipped;
        }
        let mean = total as f64 / reps as f64;
        // sd of the mean is sqrt(256 / 200) ~ 1.13
        assert!((mean - 512.0).abs() < 6.0, "mean flips {mean}");
    }

    #[test]
    fn advance_flip_count_zero_probability() {
        // P(no flips) = 0.7^10 for n = 10, sigma = 0.3
        let expected = 0.7f64.powi(10);
        assert!((expected - 0.0282).abs() < 1e-4);
        let streams = RunStreams::new(5, 0);
        let reps = 100_000u64;
        let zero = (0..reps)
            .filter(|&r| {
                let mut st = ProblemState::new(Genome::zeros(10), ShiftSchedule::fixed(0.3).unwrap());
                st.advance(&mut streams.stream(r, Role::Shift)) == 0
            })
            .count() as f64
            / reps as f64;
        let se = (expected * (1.0 - expected) / reps as f64).sqrt();
        assert!((zero - expected).abs() < 4.0 * se, "{zero} vs {expected}");
    }

    #[test]
    fn shift_counts_edge_cases() {
        let streams = RunStreams::new(3, 0);
        let n = 4;
        let reps = 40_000u64;
        // From full match the result is n - Binomial(n, sigma): never above n.
        let mut hist = [0u64; 5];
        for r in 0..reps {
            let cs = shift_counts(CountState::new(n, 0).unwrap(), 0.5, &mut streams.stream(r, Role::Shift));
            hist[cs.matching()] += 1;
        }
        // matching = 0, sigma = 1/2: Binomial(4, 1/2)
        let probs = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        for (k, &p) in probs.iter().enumerate() {
            let f = hist[k] as f64 / reps as f64;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((f - p).abs() < 4.5 * se, "k={k}: {f} vs {p}");
        }
        for r in 0..1000 {
            let cs = shift_counts(CountState::new(n, n).unwrap(), 0.2, &mut streams.stream(r, Role::Init));
            assert!(cs.matching() <= n);
        }
    }

    fn genome_strategy(n: usize) -> impl Strategy<Value = Genome> {
        proptest::collection::vec(any::<bool>(), n).prop_map(|b| Genome::from_bits(&b).unwrap())
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(
            (a, b, c) in (1usize..130).prop_flat_map(|n| (genome_strategy(n), genome_strategy(n), genome_strategy(n)))
        ) {
            let ab = hamming(&a, &b).unwrap();
            let ba = hamming(&b, &a).unwrap();
            let bc = hamming(&b, &c).unwrap();
            let ac = hamming(&a, &c).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ac <= ab + bc);
        }

        #[test]
        fn fitness_plus_distance_is_n(
            (x, opt) in (1usize..200).prop_flat_map(|n| (genome_strategy(n), genome_strategy(n)))
        ) {
            let state = ProblemState::new(opt.clone(), ShiftSchedule::fixed(0.25).unwrap());
            let n = x.len();
            prop_assert_eq!(bitmatching_fitness(&x, &state).unwrap() + hamming(&x, &opt).unwrap(), n);
        }

        #[test]
        fn complement_is_at_full_distance(x in (1usize..200).prop_flat_map(genome_strategy)) {
            prop_assert_eq!(hamming(&x, &x.complement()).unwrap(), x.len());
            prop_assert_eq!(x.to_string().parse::<Genome>().unwrap(), x);
        }
    }
}
