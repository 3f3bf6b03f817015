//! The (1+1) and (1+lambda) EA on a dynamic problem.
//!
//! Generation `t` starts by shifting the optimum (except at `t = 0`), then
//! mutates the parent into `lambda` offspring, evaluates everything against
//! the current objective and keeps the best offspring if it is at least as
//! good as the parent. The run hits at the first generation in which the
//! parent or any offspring equals the optimum.

pub(crate) mod count;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::intervals::{decompose, IntervalDecomposition, IntervalLabel};
use crate::error::{invalid, Error, Result};
use crate::model::{binomial, BitMatching, Genome, Objective, ProblemState, ShiftSchedule};
use crate::rng::{Role, RunStreams};
use crate::schemes::{BoundScheme, ConditionContext, MutationScheme};
use count::{flip_counts, CountSampler};

/// Representation the engine simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full bit strings.
    Genome,
    /// Matching counts only; valid for BitMatching.
    #[default]
    Count,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genome" => Ok(Mode::Genome),
            "count" => Ok(Mode::Count),
            other => Err(invalid(format!("unknown mode {other:?} (expected genome or count)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Genome => "genome",
            Mode::Count => "count",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub lambda: usize,
    pub scheme: MutationScheme,
    pub schedule: ShiftSchedule,
    /// Censoring cap: generations `0..max_generations` are executed at most.
    pub max_generations: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Keep per-generation matching, best-ratio and interval traces.
    pub record_traces: bool,
}

impl RunConfig {
    pub fn new(
        n: usize,
        lambda: usize,
        scheme: MutationScheme,
        schedule: ShiftSchedule,
        max_generations: u64,
        seed: u64,
    ) -> Self {
        Self {
            n,
            lambda,
            scheme,
            schedule,
            max_generations,
            epsilon: 0.0,
            seed,
            mode: Mode::Count,
            record_traces: false,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_traces(mut self, on: bool) -> Self {
        self.record_traces = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        if self.lambda == 0 {
            return Err(invalid("lambda must be at least 1"));
        }
        if self.max_generations == 0 {
            return Err(invalid("max_generations must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(invalid(format!("epsilon outside [0, 1): {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// First hitting generation, `None` when censored.
    pub hit_generation: Option<u64>,
    /// First generation whose best individual reaches ratio `1 - epsilon`.
    pub eps_hit_generation: Option<u64>,
    /// Generations executed (`hit + 1`, or the cap when censored).
    pub generations: u64,
    pub evaluations: u64,
    pub initial_matching: usize,
    pub final_matching: usize,
    pub best_matching: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matching_trace: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_ratio_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interval_trace: Option<Vec<String>>,
}

impl RunRecord {
    pub fn censored(&self) -> bool {
        self.hit_generation.is_none()
    }

    /// Hitting generation, or the executed generations as a lower bound.
    pub fn hit_or_bound(&self) -> u64 {
        self.hit_generation.unwrap_or(self.generations)
    }

    pub fn eps_hit_or_bound(&self) -> u64 {
        self.eps_hit_generation.unwrap_or(self.generations)
    }
}

/// What happened in one generation. Fitness values are exact integers for
/// BitMatching.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub generation: u64,
    /// Parent fitness after the shift.
    pub parent_fitness: f64,
    pub best_offspring_fitness: f64,
    /// Index of the best offspring (lowest on ties); unknown in count mode.
    pub best_offspring: Option<usize>,
    /// Fitness of the next parent.
    pub selected_fitness: f64,
    pub accepted: bool,
    pub hit: bool,
}

/// A parent together with the history a condition-variable scheme sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Lineage<P> {
    pub parent: P,
    /// Index of the next generation to execute.
    pub generation: u64,
    pub prev_parent_fitness: Option<f64>,
    pub last_accepted: bool,
}

impl<P> Lineage<P> {
    pub fn new(parent: P) -> Self {
        Self {
            parent,
            generation: 0,
            prev_parent_fitness: None,
            last_accepted: false,
        }
    }

    fn context(&self, n: usize, lambda: usize, parent_fitness: f64) -> ConditionContext {
        ConditionContext::new(
            n,
            self.generation,
            lambda,
            parent_fitness,
            self.prev_parent_fitness,
            self.last_accepted,
        )
    }

    fn finish(&mut self, parent_fitness: f64, accepted: bool) {
        self.prev_parent_fitness = Some(parent_fitness);
        self.last_accepted = accepted;
        self.generation += 1;
    }
}

fn check_phase(generation: u64, state: &ProblemState) {
    let expected = generation.saturating_sub(1);
    assert_eq!(
        state.phase(),
        expected,
        "generation {generation} expects the problem at phase {expected}"
    );
}

/// One generation of the (1+lambda) EA in genome space, `lambda` taken from
/// the bound scheme.
pub fn step_one_plus_lambda<O: Objective>(
    lineage: &mut Lineage<Genome>,
    state: &mut ProblemState,
    objective: &O,
    scheme: &BoundScheme,
    streams: &RunStreams,
) -> GenerationReport {
    let t = lineage.generation;
    check_phase(t, state);
    if t > 0 {
        state.advance(&mut streams.stream(t, Role::Shift));
    }
    let n = state.n();
    let lambda = scheme.lambda();
    let target = objective.optimum_value(state);
    let parent_fitness = objective.evaluate(&lineage.parent, state);
    let mut ctx = lineage.context(n, lambda, parent_fitness);
    if scheme.is_oracle() {
        let m = objective
            .matching(&lineage.parent, state)
            .expect("oracle schemes need an objective that exposes matching counts");
        ctx = ctx.with_oracle_matching(m);
    }
    let mut best: Option<(usize, Genome, f64)> = None;
    let mut any_hit = parent_fitness >= target;
    for chi in 1..=lambda {
        let mut rng = streams.stream(t, Role::Mutation(chi as u32));
        let rate = scheme.rate(t, chi, &ctx, &mut rng);
        let child = lineage.parent.mutated(rate, &mut rng);
        let f = objective.evaluate(&child, state);
        any_hit |= f >= target;
        if best.as_ref().is_none_or(|(_, _, bf)| f > *bf) {
            best = Some((chi, child, f));
        }
    }
    let (chi, child, best_fitness) = best.expect("lambda >= 1");
    let accepted = best_fitness >= parent_fitness;
    if accepted {
        lineage.parent = child;
    }
    lineage.finish(parent_fitness, accepted);
    GenerationReport {
        generation: t,
        parent_fitness,
        best_offspring_fitness: best_fitness,
        best_offspring: Some(chi),
        selected_fitness: parent_fitness.max(best_fitness),
        accepted,
        hit: any_hit,
    }
}

/// One generation of the (1+1) EA.
///
/// # Panics
///
/// Panics unless the scheme is bound to a single offspring.
pub fn step_one_plus_one<O: Objective>(
    lineage: &mut Lineage<Genome>,
    state: &mut ProblemState,
    objective: &O,
    scheme: &BoundScheme,
    streams: &RunStreams,
) -> GenerationReport {
    assert_eq!(scheme.lambda(), 1, "the (1+1) EA has exactly one offspring");
    step_one_plus_lambda(lineage, state, objective, scheme, streams)
}

/// Running bookkeeping of hits, best ratio and traces.
struct Tracker<'a> {
    n: usize,
    epsilon: f64,
    decomposition: Option<&'a IntervalDecomposition>,
    best: usize,
    eps_hit: Option<u64>,
    traces: Option<(Vec<usize>, Vec<f64>, Vec<IntervalLabel>)>,
}

impl Tracker<'_> {
    fn observe(&mut self, t: u64, matching: usize) {
        self.best = self.best.max(matching);
        if self.eps_hit.is_none() && matching as f64 / self.n as f64 >= 1.0 - self.epsilon {
            self.eps_hit = Some(t);
        }
        if let Some((m, r, i)) = &mut self.traces {
            m.push(matching);
            r.push(self.best as f64 / self.n as f64);
            if let Some(d) = self.decomposition {
                i.push(d.classify(matching));
            }
        }
    }
}

/// A configuration bound once and run for any number of replications.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: RunConfig,
    scheme: BoundScheme,
    sampler: Option<CountSampler>,
    decomposition: Option<IntervalDecomposition>,
}

impl Simulator {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let scheme = config.scheme.bind(config.n, config.lambda);
        let fixed_sigma = match config.schedule {
            ShiftSchedule::Fixed(s) => Some(s),
            _ => None,
        };
        let sampler = (config.mode == Mode::Count).then(|| {
            CountSampler::new(config.n, fixed_sigma, &scheme.support().unwrap_or_default())
        });
        let decomposition = if config.record_traces {
            decompose(config.n, config.schedule.rate_at(1)).ok()
        } else {
            None
        };
        Ok(Self {
            config,
            scheme,
            sampler,
            decomposition,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn scheme(&self) -> &BoundScheme {
        &self.scheme
    }

    pub fn decomposition(&self) -> Option<&IntervalDecomposition> {
        self.decomposition.as_ref()
    }

    /// One generation in count space.
    pub fn step_counts(&self, lineage: &mut Lineage<usize>, streams: &RunStreams) -> GenerationReport {
        let sampler = self
            .sampler
            .as_ref()
            .expect("count steps need a simulator in count mode");
        let n = self.config.n;
        let t = lineage.generation;
        let j = if t > 0 {
            let sigma = self.config.schedule.rate_at(t);
            sampler.shift(lineage.parent, sigma, &mut streams.stream(t, Role::Shift))
        } else {
            lineage.parent
        };
        let mut ctx = lineage.context(n, self.config.lambda, j as f64);
        if self.scheme.is_oracle() {
            ctx = ctx.with_oracle_matching(j);
        }
        let best = match self.scheme.rate_groups(t, &ctx) {
            Some(groups) => groups
                .iter()
                .map(|g| {
                    let mut rng = streams.stream(t, Role::Mutation(g.first_chi as u32));
                    sampler.best_of(j, g.rate, g.count, &mut rng)
                })
                .max()
                .expect("at least one group"),
            None => (1..=self.config.lambda)
                .map(|chi| {
                    let mut rng = streams.stream(t, Role::Mutation(chi as u32));
                    let rate = self.scheme.rate(t, chi, &ctx, &mut rng);
                    flip_counts(n, j, rate, &mut rng)
                })
                .max()
                .expect("lambda >= 1"),
        };
        let accepted = best >= j;
        lineage.parent = j.max(best);
        lineage.finish(j as f64, accepted);
        GenerationReport {
            generation: t,
            parent_fitness: j as f64,
            best_offspring_fitness: best as f64,
            best_offspring: None,
            selected_fitness: j.max(best) as f64,
            accepted,
            hit: j == n || best == n,
        }
    }

    fn tracker(&self) -> Tracker<'_> {
        Tracker {
            n: self.config.n,
            epsilon: self.config.epsilon,
            decomposition: self.decomposition.as_ref(),
            best: 0,
            eps_hit: None,
            traces: self
                .config
                .record_traces
                .then(|| (Vec::new(), Vec::new(), Vec::new())),
        }
    }

    /// Runs replication `replication` to its hit or the censoring cap.
    pub fn run_replication(&self, replication: u64) -> RunRecord {
        let streams = RunStreams::new(self.config.seed, replication);
        let n = self.config.n;
        let mut tracker = self.tracker();
        let mut hit = None;
        let mut generations = 0;
        let initial;
        let last;
        match self.config.mode {
            Mode::Count => {
                initial = binomial(n, 0.5, &mut streams.stream(0, Role::Init));
                let mut lineage = Lineage::new(initial);
                for t in 0..self.config.max_generations {
                    let report = self.step_counts(&mut lineage, &streams);
                    generations = t + 1;
                    tracker.observe(t, report.selected_fitness as usize);
                    if report.hit {
                        hit = Some(t);
                        break;
                    }
                }
                last = lineage.parent;
            }
            Mode::Genome => {
                let parent = Genome::random(n, &mut streams.stream(0, Role::Init));
                let mut state = ProblemState::random(
                    n,
                    self.config.schedule.clone(),
                    &mut streams.stream(0, Role::Shift),
                );
                initial = BitMatching.evaluate(&parent, &state) as usize;
                let mut lineage = Lineage::new(parent);
                for t in 0..self.config.max_generations {
                    let report = step_one_plus_lambda(&mut lineage, &mut state, &BitMatching, &self.scheme, &streams);
                    generations = t + 1;
                    tracker.observe(t, report.selected_fitness as usize);
                    if report.hit {
                        hit = Some(t);
                        break;
                    }
                }
                last = BitMatching.evaluate(&lineage.parent, &state) as usize;
            }
        }
        let (matching_trace, best_ratio_trace, interval_trace) = match tracker.traces {
            Some((m, r, i)) => (
                Some(m),
                Some(r),
                self.decomposition
                    .is_some()
                    .then(|| i.iter().map(|l| l.to_string()).collect()),
            ),
            None => (None, None, None),
        };
        RunRecord {
            hit_generation: hit,
            eps_hit_generation: tracker.eps_hit,
            generations,
            evaluations: generations * (1 + self.config.lambda as u64),
            initial_matching: initial,
            final_matching: last,
            best_matching: tracker.best,
            matching_trace,
            best_ratio_trace,
            interval_trace,
        }
    }
}

/// Runs replication 0 of `config`.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    Ok(Simulator::new(config.clone())?.run_replication(0))
}
