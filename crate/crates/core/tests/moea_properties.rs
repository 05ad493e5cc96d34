use pixattack_core::moea::{
    crowding_distance, dominates, environmental_selection, fast_nondominated_sort, polynomial_mutation, run_nsga2,
    sbx_crossover, tournament_select, Bounds, FnProblem, Individual, MoeaConfig, Objectives,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Peels fronts by repeatedly taking every point no remaining point
/// dominates.
fn brute_force_fronts(points: &[Objectives]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| {
                !remaining.iter().any(|&j| {
                    let (a, b) = (points[j], points[i]);
                    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
                })
            })
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn random_points(rng: &mut ChaCha8Rng) -> Vec<Objectives> {
    let n = rng.random_range(1..=60);
    // a coarse grid produces plenty of ties and duplicates
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|_| {
            if coarse {
                [rng.random_range(0..6) as f64, rng.random_range(0..6) as f64]
            } else {
                [rng.random::<f64>(), rng.random::<f64>()]
            }
        })
        .collect()
}

#[test]
fn sort_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..200 {
        let points = random_points(&mut rng);
        let mut fast = fast_nondominated_sort(&points);
        let mut brute = brute_force_fronts(&points);
        fast.iter_mut().for_each(|f| f.sort_unstable());
        brute.iter_mut().for_each(|f| f.sort_unstable());
        assert_eq!(fast, brute);
    }
}

#[test]
fn crowding_extremes_are_infinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        // points on a decreasing curve form a single front
        let n = rng.random_range(1..30);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        let front: Vec<Objectives> = xs.iter().map(|&x| [x, 1.0 - x * x]).collect();
        let d = crowding_distance(&front);
        for m in 0..2 {
            let lo = (0..n).min_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b))).unwrap();
            let hi = (0..n).max_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(b.cmp(&a))).unwrap();
            assert!(d[lo].is_infinite() && d[hi].is_infinite());
        }
        assert!(d.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn operators_respect_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let d = 10;
    let lower: Vec<f64> = (0..d).map(|i| -(i as f64) * 25.0).collect();
    let upper: Vec<f64> = (0..d).map(|i| 255.0 - i as f64 * 25.0).collect();
    let bounds = Bounds::new(lower.clone(), upper.clone()).unwrap();
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|i| {
                // parents often sit exactly on a bound
                match rng.random_range(0..4) {
                    0 => lower[i],
                    1 => upper[i],
                    _ => rng.random_range(lower[i]..=upper[i]),
                }
            })
            .collect()
    };
    let mut violations = 0;
    for _ in 0..100_000 {
        let p1 = sample(&mut rng);
        let p2 = sample(&mut rng);
        let (c1, c2) = sbx_crossover(&p1, &p2, 20.0, &bounds, 1.0, &mut rng);
        violations += !bounds.contains(&c1) as usize + !bounds.contains(&c2) as usize;
        let mut m = p1.clone();
        polynomial_mutation(&mut m, 20.0, &bounds, 1.0, &mut rng);
        violations += !bounds.contains(&m) as usize;
    }
    assert_eq!(violations, 0);
}

#[test]
fn tournament_on_identical_population_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let k = 10;
    let pop: Vec<Individual> = (0..k)
        .map(|i| Individual {
            genome: vec![0.0],
            objectives: [1.0, 1.0],
            rank: 0,
            crowding: 0.0,
            eval_index: i,
        })
        .collect();
    let draws = 10_000;
    let mut counts = vec![0usize; k];
    for i in tournament_select(&pop, draws, &mut rng) {
        counts[i] += 1;
    }
    let expected = draws as f64 / k as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 9 degrees of freedom, p = 0.001
    assert!(chi2 < 27.877, "chi-square {chi2}, counts {counts:?}");
}

#[test]
fn environmental_selection_has_exact_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..50 {
        let n = 2 * rng.random_range(1..30);
        let combined: Vec<Individual> = (0..2 * n)
            .map(|i| Individual {
                genome: vec![],
                objectives: [rng.random_range(0..8) as f64, rng.random_range(0..8) as f64],
                rank: 0,
                crowding: 0.0,
                eval_index: i,
            })
            .collect();
        let kept = environmental_selection(combined.clone(), n);
        assert_eq!(kept.len(), n);
        // no survivor is worse-ranked than a discarded individual
        let worst_kept = kept.iter().map(|i| i.rank).max().unwrap();
        let points: Vec<Objectives> = combined.iter().map(|i| i.objectives).collect();
        let fronts = fast_nondominated_sort(&points);
        let before: usize = fronts[..worst_kept].iter().map(Vec::len).sum();
        assert!(before <= n && before + fronts[worst_kept].len() >= n);
    }
}

fn schaffer(x: &[f64]) -> Result<Objectives, ()> {
    Ok([x[0] * x[0], (x[0] - 2.0) * (x[0] - 2.0)])
}

#[test]
fn converges_on_schaffer_problem() {
    for seed in 0..10 {
        let mut problem = FnProblem::new(Bounds::uniform(1, -5.0, 5.0).unwrap(), schaffer);
        let config = MoeaConfig {
            population_size: 50,
            max_evaluations: 5_000,
            seed,
            ..MoeaConfig::default()
        };
        let out = run_nsga2(&mut problem, &config).unwrap();
        assert_eq!(out.evaluations(), 5_000);
        for ind in out.front() {
            assert!((-0.05..=2.05).contains(&ind.genome[0]), "seed {seed}: x = {}", ind.genome[0]);
        }
        let front: Vec<&Individual> = out.front().collect();
        for a in &front {
            for b in &front {
                assert!(!dominates(&a.objectives, &b.objectives));
            }
        }
    }
}

#[test]
fn run_is_deterministic_and_within_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..5 {
        let n = 2 * rng.random_range(1..20);
        let budget = n + rng.random_range(0..400);
        let config = MoeaConfig {
            population_size: n,
            max_evaluations: budget,
            seed: rng.random(),
            ..MoeaConfig::default()
        };
        let bounds = Bounds::new(vec![-1.0, 0.0, 3.0], vec![1.0, 10.0, 3.0]).unwrap();
        let f = |x: &[f64]| -> Result<Objectives, ()> { Ok([x[0] + x[1], (1.0 - x[0]).powi(2) + x[2]]) };
        let a = run_nsga2(&mut FnProblem::new(bounds.clone(), f), &config).unwrap();
        let b = run_nsga2(&mut FnProblem::new(bounds.clone(), f), &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.population, b.population);
        assert_eq!(a.evaluations(), budget);
        assert_eq!(a.population.len(), n);
        assert!(a.population.iter().all(|i| bounds.contains(&i.genome)));
        assert!(a.history.iter().enumerate().all(|(k, e)| e.eval_index == k && bounds.contains(&e.genome)));
    }
}

#[test]
fn every_generation_keeps_population_in_bounds() {
    // budgets that stop after each generation in turn
    let bounds = Bounds::uniform(4, -2.0, 2.0).unwrap();
    let f = |x: &[f64]| -> Result<Objectives, ()> { Ok([x.iter().sum(), x.iter().map(|v| v * v).sum()]) };
    for generations in 0..8 {
        let config = MoeaConfig {
            population_size: 10,
            max_evaluations: 10 + 10 * generations,
            seed: 7,
            ..MoeaConfig::default()
        };
        let out = run_nsga2(&mut FnProblem::new(bounds.clone(), f), &config).unwrap();
        assert_eq!(out.generations, generations);
        assert_eq!(out.population.len(), 10);
        assert!(out.population.iter().all(|i| bounds.contains(&i.genome)));
    }
}

#[test]
fn partial_last_generation_is_capped() {
    let bounds = Bounds::uniform(2, 0.0, 1.0).unwrap();
    let f = |x: &[f64]| -> Result<Objectives, ()> { Ok([x[0], x[1]]) };
    let config = MoeaConfig {
        population_size: 10,
        max_evaluations: 37,
        ..MoeaConfig::default()
    };
    let out = run_nsga2(&mut FnProblem::new(bounds, f), &config).unwrap();
    assert_eq!(out.evaluations(), 37);
    assert_eq!(out.generations, 3);
    assert_eq!(out.population.len(), 10);
}
