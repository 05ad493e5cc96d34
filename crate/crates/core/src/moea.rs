//! Bi-objective NSGA-II over box-bounded real vectors.
//!
//! One generation is: binary tournament on (rank, crowding) → SBX on
//! consecutive parent pairs → polynomial mutation → evaluation →
//! elitist environmental selection from parents ∪ offspring. The run stops
//! once the evaluation budget is spent; the last generation is truncated
//! so that the count never exceeds the budget.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math;

/// `(f1, f2)`, both minimised.
pub type Objectives = [f64; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("population size must be even and at least 2, got {0}")]
    PopulationSize(usize),
    #[error("evaluation budget {budget} is smaller than the population size {population}")]
    Budget { budget: usize, population: usize },
    #[error("{name} must be in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("bounds for variable {index} are invalid ({lower} > {upper} or not finite)")]
    Bounds { index: usize, lower: f64, upper: f64 },
    #[error("problem dimension must be at least 1")]
    EmptyProblem,
    #[error("lower and upper bound vectors differ in length")]
    BoundsLength,
}

/// Per-variable closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ConfigError> {
        if lower.len() != upper.len() {
            return Err(ConfigError::BoundsLength);
        }
        if lower.is_empty() {
            return Err(ConfigError::EmptyProblem);
        }
        for (index, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ConfigError::Bounds {
                    index,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn uniform(dimension: usize, lower: f64, upper: f64) -> Result<Self, ConfigError> {
        Self::new(vec![lower; dimension], vec![upper; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, genome: &[f64]) -> bool {
        genome.len() == self.dimension()
            && genome
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }
}

/// Algorithm parameters. `mutation_probability = None` means `1/d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoeaConfig {
    pub population_size: usize,
    pub max_evaluations: usize,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    pub crossover_probability: f64,
    pub mutation_probability: Option<f64>,
    pub seed: u64,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        MoeaConfig {
            population_size: 50,
            max_evaluations: 10_000,
            crossover_eta: 20.0,
            mutation_eta: 20.0,
            crossover_probability: 1.0,
            mutation_probability: None,
            seed: 0,
        }
    }
}

impl MoeaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.population_size;
        if n < 2 || !n.is_multiple_of(2) {
            return Err(ConfigError::PopulationSize(n));
        }
        if self.max_evaluations < n {
            return Err(ConfigError::Budget {
                budget: self.max_evaluations,
                population: n,
            });
        }
        let non_negative = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    name,
                    range: "[0, inf)",
                    value,
                })
            }
        };
        non_negative("crossover_eta", self.crossover_eta)?;
        non_negative("mutation_eta", self.mutation_eta)?;
        let probability = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    name,
                    range: "[0, 1]",
                    value,
                })
            }
        };
        probability("crossover_probability", self.crossover_probability)?;
        if let Some(pm) = self.mutation_probability {
            probability("mutation_probability", pm)?;
        }
        Ok(())
    }

    pub fn mutation_probability_for(&self, dimension: usize) -> f64 {
        self.mutation_probability
            .unwrap_or(1.0 / dimension.max(1) as f64)
    }
}

/// A population member after evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub objectives: Objectives,
    /// Zero-based front number.
    pub rank: usize,
    pub crowding: f64,
    /// Position in the evaluation history.
    pub eval_index: usize,
}

/// `a` is no worse in both objectives and strictly better in one.
#[inline]
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Partitions point indices into successive nondominated fronts.
pub fn fast_nondominated_sort(points: &[Objectives]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of every member of one front.
///
/// Per objective the front is sorted; both extremes get `+inf` and interior
/// points accumulate `(next − prev) / (max − min)`. An objective with zero
/// range adds nothing to interior points.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut distance = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..2 {
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        let lo = front[order[0]][m];
        let hi = front[order[n - 1]][m];
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 || !range.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let i = order[w];
            if distance[i].is_finite() {
                distance[i] += (front[order[w + 1]][m] - front[order[w - 1]][m]) / range;
            }
        }
    }
    distance
}

/// Fills `rank` and `crowding` for every individual.
pub fn assign_rank_and_crowding(population: &mut [Individual]) {
    let points: Vec<Objectives> = population.iter().map(|i| i.objectives).collect();
    for (rank, front) in fast_nondominated_sort(&points).iter().enumerate() {
        let objs: Vec<Objectives> = front.iter().map(|&i| points[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
            population[i].rank = rank;
            population[i].crowding = d;
        }
    }
}

/// Crowded comparison: lower rank first, then larger crowding.
fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

/// Binary tournament with replacement. Returns `count` indices into
/// `population`. Full ties are settled by a fair coin.
pub fn tournament_select<R: Rng + ?Sized>(population: &[Individual], count: usize, rng: &mut R) -> Vec<usize> {
    let n = population.len();
    assert!(n > 0, "tournament over an empty population");
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            match crowded_cmp(&population[a], &population[b]) {
                Ordering::Less => a,
                Ordering::Greater => b,
                Ordering::Equal => {
                    if rng.random_bool(0.5) {
                        a
                    } else {
                        b
                    }
                }
            }
        })
        .collect()
}

#[inline]
fn spread_factor(u: f64, eta: f64) -> f64 {
    if u <= 0.5 {
        math::powf(2.0 * u, 1.0 / (eta + 1.0))
    } else {
        math::powf(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0))
    }
}

/// SBX on one variable pair, unclamped. The children are symmetric about
/// the parents' midpoint.
pub(crate) fn sbx_pair(x1: f64, x2: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = spread_factor(u, eta);
    let mid = 0.5 * (x1 + x2);
    let half = 0.5 * beta * (x2 - x1).abs();
    (mid - half, mid + half)
}

/// Simulated binary crossover.
///
/// With probability `p_c` the pair is recombined; then each variable is
/// crossed with probability ½, its two children are assigned to the
/// offspring in random order, and everything is clamped into `bounds`.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    eta: f64,
    bounds: &Bounds,
    p_c: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if !rng.random_bool(p_c) {
        return (c1, c2);
    }
    for i in 0..p1.len() {
        if !rng.random_bool(0.5) || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (lo_child, hi_child) = sbx_pair(p1[i], p2[i], rng.random::<f64>(), eta);
        let (a, b) = if rng.random_bool(0.5) {
            (lo_child, hi_child)
        } else {
            (hi_child, lo_child)
        };
        c1[i] = a.clamp(bounds.lower[i], bounds.upper[i]);
        c2[i] = b.clamp(bounds.lower[i], bounds.upper[i]);
    }
    (c1, c2)
}

/// Bounded polynomial mutation, applied independently to each variable
/// with probability `p_m`.
pub fn polynomial_mutation<R: Rng + ?Sized>(genome: &mut [f64], eta: f64, bounds: &Bounds, p_m: f64, rng: &mut R) {
    let exponent = 1.0 / (eta + 1.0);
    for (i, x) in genome.iter_mut().enumerate() {
        if !rng.random_bool(p_m) {
            continue;
        }
        let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        let d1 = (*x - lo) / span;
        let d2 = (hi - *x) / span;
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * math::powf(1.0 - d1, eta + 1.0);
            math::powf(v, exponent) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * math::powf(1.0 - d2, eta + 1.0);
            1.0 - math::powf(v, exponent)
        };
        *x = (*x + dq * span).clamp(lo, hi);
    }
}

/// Elitist truncation of `combined` to `n` survivors: whole fronts in order,
/// then the remaining slots from the next front by descending crowding.
/// Survivors carry the rank and crowding computed on `combined`.
pub fn environmental_selection(mut combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    assign_rank_and_crowding(&mut combined);
    let points: Vec<Objectives> = combined.iter().map(|i| i.objectives).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for front in fast_nondominated_sort(&points) {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| {
                combined[b]
                    .crowding
                    .partial_cmp(&combined[a].crowding)
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            rest.truncate(n - chosen.len());
            chosen.extend(rest);
        }
        if chosen.len() == n {
            break;
        }
    }
    chosen.sort_unstable();
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    chosen.into_iter().filter_map(|i| slots[i].take()).collect()
}

/// Objectives plus whatever side information the evaluator wants recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<M> {
    pub objectives: Objectives,
    pub meta: M,
}

/// A bounded bi-objective problem.
pub trait Problem {
    type Meta: Clone;
    type Error;

    fn bounds(&self) -> &Bounds;

    /// Evaluates a batch of independent genomes. The result is in input
    /// order; it may be shorter than the input only if its last element is
    /// an error.
    fn evaluate_batch(&mut self, genomes: &[Vec<f64>]) -> Vec<Result<Evaluation<Self::Meta>, Self::Error>>;
}

/// Adapts a closure over one genome into a [`Problem`].
pub struct FnProblem<F> {
    bounds: Bounds,
    f: F,
}

impl<F> FnProblem<F> {
    pub fn new(bounds: Bounds, f: F) -> Self {
        FnProblem { bounds, f }
    }
}

impl<F, E> Problem for FnProblem<F>
where
    F: FnMut(&[f64]) -> Result<Objectives, E>,
{
    type Meta = ();
    type Error = E;

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate_batch(&mut self, genomes: &[Vec<f64>]) -> Vec<Result<Evaluation<()>, E>> {
        let mut out = Vec::with_capacity(genomes.len());
        for g in genomes {
            let r = (self.f)(g).map(|objectives| Evaluation { objectives, meta: () });
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry<M> {
    pub eval_index: usize,
    pub genome: Vec<f64>,
    pub objectives: Objectives,
    pub meta: M,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<M> {
    pub population: Vec<Individual>,
    pub history: Vec<HistoryEntry<M>>,
    pub generations: usize,
}

impl<M> RunOutcome<M> {
    pub fn evaluations(&self) -> usize {
        self.history.len()
    }

    /// First-front members of the final population.
    pub fn front(&self) -> impl Iterator<Item = &Individual> {
        self.population.iter().filter(|i| i.rank == 0)
    }
}

#[derive(Debug, Error)]
pub enum RunError<E, M> {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("evaluation {eval_index} failed in generation {generation}")]
    Evaluation {
        eval_index: usize,
        generation: usize,
        #[source]
        source: E,
        /// Everything evaluated before the failure.
        history: Vec<HistoryEntry<M>>,
    },
}

struct Driver<'p, P: Problem> {
    problem: &'p mut P,
    history: Vec<HistoryEntry<P::Meta>>,
    generation: usize,
}

impl<P: Problem> Driver<'_, P> {
    fn evaluate(&mut self, genomes: Vec<Vec<f64>>) -> Result<Vec<Individual>, RunError<P::Error, P::Meta>> {
        let results = self.problem.evaluate_batch(&genomes);
        let mut out = Vec::with_capacity(genomes.len());
        for (genome, result) in genomes.into_iter().zip(results) {
            let eval_index = self.history.len();
            match result {
                Ok(Evaluation { objectives, meta }) => {
                    self.history.push(HistoryEntry {
                        eval_index,
                        genome: genome.clone(),
                        objectives,
                        meta,
                    });
                    out.push(Individual {
                        genome,
                        objectives,
                        rank: 0,
                        crowding: 0.0,
                        eval_index,
                    });
                }
                Err(source) => {
                    return Err(RunError::Evaluation {
                        eval_index,
                        generation: self.generation,
                        source,
                        history: core::mem::take(&mut self.history),
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Runs NSGA-II on `problem` until `config.max_evaluations` evaluations
/// have been made.
pub fn run_nsga2<P: Problem>(
    problem: &mut P,
    config: &MoeaConfig,
) -> Result<RunOutcome<P::Meta>, RunError<P::Error, P::Meta>> {
    config.validate()?;
    let bounds = problem.bounds().clone();
    let n = config.population_size;
    let budget = config.max_evaluations;
    let p_m = config.mutation_probability_for(bounds.dimension());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut driver = Driver {
        problem,
        history: Vec::with_capacity(budget),
        generation: 0,
    };
    let initial: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample(&mut rng)).collect();
    let mut population = driver.evaluate(initial)?;
    assign_rank_and_crowding(&mut population);

    while driver.history.len() < budget {
        driver.generation += 1;
        let parents = tournament_select(&population, n, &mut rng);
        let mut offspring = Vec::with_capacity(n);
        for pair in parents.chunks(2) {
            let (a, b) = (&population[pair[0]].genome, &population[pair[1]].genome);
            let (mut c1, mut c2) = sbx_crossover(a, b, config.crossover_eta, &bounds, config.crossover_probability, &mut rng);
            polynomial_mutation(&mut c1, config.mutation_eta, &bounds, p_m, &mut rng);
            polynomial_mutation(&mut c2, config.mutation_eta, &bounds, p_m, &mut rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        offspring.truncate(budget - driver.history.len());
        let evaluated = driver.evaluate(offspring)?;
        population.extend(evaluated);
        population = environmental_selection(population, n);
    }

    Ok(RunOutcome {
        population,
        history: driver.history,
        generations: driver.generation,
    })
}
