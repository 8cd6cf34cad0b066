use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::operators::{binary_tournament, polynomial_mutation, sbx_crossover};
use super::sort::{crowding_distance, fast_non_dominated_sort};
use super::{validate_variables, Evaluation, Hyperparameters, Individual, MoeaError, Problem};

fn evaluate_all<P: Problem>(problem: &P, genomes: Vec<Vec<f64>>) -> Result<Vec<Individual>, MoeaError> {
    genomes
        .into_par_iter()
        .map(|genome| {
            let Evaluation { objectives, violations } = problem
                .evaluate(&problem.decode(&genome))
                .map_err(|e| MoeaError::Evaluation(Box::new(e)))?;
            if objectives.iter().any(|v| v.is_nan()) {
                return Err(MoeaError::InvalidEvaluation("NaN objective".into()));
            }
            if violations.iter().any(|v| !(*v >= 0.0)) {
                return Err(MoeaError::InvalidEvaluation("negative or NaN violation".into()));
            }
            Ok(Individual::new(genome, objectives, violations))
        })
        .collect()
}

fn rank_and_crowd(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let fronts = fast_non_dominated_sort(pop);
    for f in &fronts {
        crowding_distance(pop, f);
    }
    fronts
}

/// (mu + lambda) truncation by rank, then by descending crowding.
fn environmental_selection(mut merged: Vec<Individual>, size: usize) -> Vec<Individual> {
    let fronts = rank_and_crowd(&mut merged);
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    for front in fronts {
        if keep.len() + front.len() <= size {
            keep.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding).then(a.cmp(&b)));
            rest.truncate(size - keep.len());
            keep.extend(rest);
        }
        if keep.len() == size {
            break;
        }
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
    let mut pop: Vec<Individual> = keep.into_iter().map(|i| slots[i].take().unwrap()).collect();
    rank_and_crowd(&mut pop);
    pop
}

/// Runs constrained NSGA-II and returns the feasible non-dominated set of the
/// final population with decoded genomes, or the least-violating individuals
/// when nothing feasible was found. Duplicate decoded genomes are dropped.
pub fn nsga2_optimize<P: Problem>(problem: &P, hp: &Hyperparameters) -> Result<Vec<Individual>, MoeaError> {
    hp.validate()?;
    let specs = problem.variables();
    validate_variables(specs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let n = hp.population_size;

    let initial: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            specs
                .iter()
                .map(|s| if s.upper > s.lower { rng.gen_range(s.lower..=s.upper) } else { s.lower })
                .collect()
        })
        .collect();
    let mut pop = evaluate_all(problem, initial)?;
    rank_and_crowd(&mut pop);
    let mut evaluations = n;

    while evaluations < hp.max_evaluations {
        let mut offspring = Vec::with_capacity(n + 1);
        while offspring.len() < n {
            let a = binary_tournament(&pop, &mut rng);
            let b = binary_tournament(&pop, &mut rng);
            let (mut c1, mut c2) = sbx_crossover(
                &pop[a].genome,
                &pop[b].genome,
                hp.sbx_rate,
                hp.sbx_distribution_index,
                specs,
                &mut rng,
            );
            polynomial_mutation(&mut c1, hp.pm_rate, hp.pm_distribution_index, specs, &mut rng);
            polynomial_mutation(&mut c2, hp.pm_rate, hp.pm_distribution_index, specs, &mut rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        // odd population sizes drop the last child
        offspring.truncate(n);
        let children = evaluate_all(problem, offspring)?;
        evaluations += n;
        let mut merged = pop;
        merged.extend(children);
        pop = environmental_selection(merged, n);
    }

    let feasible: Vec<&Individual> = pop.iter().filter(|i| i.rank == 0 && i.is_feasible()).collect();
    let chosen: Vec<&Individual> = if feasible.is_empty() {
        let best = pop.iter().map(|i| i.total_violation).fold(f64::INFINITY, f64::min);
        pop.iter().filter(|i| i.total_violation == best).collect()
    } else {
        feasible
    };
    let mut out: Vec<Individual> = Vec::new();
    for ind in chosen {
        let genome = problem.decode(&ind.genome);
        if out.iter().any(|o| o.genome == genome) {
            continue;
        }
        out.push(Individual { genome, ..ind.clone() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::{hypervolume, pareto_dominates, VariableSpec};
    use std::convert::Infallible;

    struct Schaffer {
        vars: Vec<VariableSpec>,
    }

    impl Problem for Schaffer {
        type Error = Infallible;
        fn variables(&self) -> &[VariableSpec] {
            &self.vars
        }
        fn evaluate(&self, x: &[f64]) -> Result<Evaluation, Infallible> {
            Ok(Evaluation {
                objectives: vec![x[0], (1.0 - x[0]).powi(2)],
                violations: vec![],
            })
        }
    }

    fn schaffer_hp(seed: u64) -> Hyperparameters {
        Hyperparameters {
            max_evaluations: 2000,
            population_size: 20,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn bi_objective_front_quality() {
        let problem = Schaffer { vars: vec![VariableSpec::real(0.0, 1.0)] };
        // area of [0,1.1]^2 above the curve f2 = (1 - f1)^2 restricted to f1 in [0,1]
        let analytic = 1.1 * 1.1 - 0.1 * 1.1 - (1.0 / 3.0 + 0.1);
        for seed in 0..3 {
            let front = nsga2_optimize(&problem, &schaffer_hp(seed)).unwrap();
            let pts: Vec<Vec<f64>> = front.iter().map(|i| i.objectives.clone()).collect();
            let hv = hypervolume(&pts, &[1.1, 1.1]).unwrap();
            assert!(hv >= 0.95 * analytic, "hv {hv} vs {analytic}");
            let xs: Vec<f64> = front.iter().map(|i| i.genome[0]).collect();
            assert!(xs.iter().cloned().fold(1.0, f64::min) < 0.05);
            assert!(xs.iter().cloned().fold(0.0, f64::max) > 0.95);
            for a in &pts {
                assert!(!pts.iter().any(|b| pareto_dominates(b, a)));
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let problem = Schaffer { vars: vec![VariableSpec::real(0.0, 1.0)] };
        let a = nsga2_optimize(&problem, &schaffer_hp(42)).unwrap();
        let b = nsga2_optimize(&problem, &schaffer_hp(42)).unwrap();
        assert_eq!(a, b);
    }

    struct Needle {
        vars: Vec<VariableSpec>,
    }

    impl Problem for Needle {
        type Error = Infallible;
        fn variables(&self) -> &[VariableSpec] {
            &self.vars
        }
        fn evaluate(&self, x: &[f64]) -> Result<Evaluation, Infallible> {
            Ok(Evaluation {
                objectives: vec![x[0], -x[1], x[0] + x[1]],
                violations: vec![(x[0] - 3.0).abs(), (x[1] - 1.0).abs()],
            })
        }
    }

    #[test]
    fn forced_feasibility_returns_the_single_point() {
        let problem = Needle {
            vars: vec![VariableSpec::integer(0.0, 5.0), VariableSpec::integer(0.0, 5.0)],
        };
        let hp = Hyperparameters { max_evaluations: 1000, population_size: 21, seed: 3, ..Default::default() };
        let front = nsga2_optimize(&problem, &hp).unwrap();
        assert_eq!(front.len(), 1);
        assert_eq!(front[0].genome, vec![3.0, 1.0]);
        assert!(front[0].is_feasible());
    }

    struct Impossible;

    impl Problem for Impossible {
        type Error = Infallible;
        fn variables(&self) -> &[VariableSpec] {
            &[VariableSpec { lower: 0.0, upper: 4.0, integer: true }]
        }
        fn evaluate(&self, x: &[f64]) -> Result<Evaluation, Infallible> {
            Ok(Evaluation { objectives: vec![x[0]], violations: vec![1.0 + (x[0] - 2.0).abs()] })
        }
    }

    #[test]
    fn infeasible_problem_returns_least_violating() {
        let hp = Hyperparameters { max_evaluations: 400, population_size: 10, ..Default::default() };
        let out = nsga2_optimize(&Impossible, &hp).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].genome, vec![2.0]);
        assert_eq!(out[0].total_violation, 1.0);
    }

    #[derive(Debug, thiserror::Error)]
    #[error("boom")]
    struct Boom;

    struct Failing;

    impl Problem for Failing {
        type Error = Boom;
        fn variables(&self) -> &[VariableSpec] {
            &[VariableSpec { lower: 0.0, upper: 1.0, integer: false }]
        }
        fn evaluate(&self, _: &[f64]) -> Result<Evaluation, Boom> {
            Err(Boom)
        }
    }

    #[test]
    fn evaluator_errors_propagate() {
        let err = nsga2_optimize(&Failing, &Hyperparameters::default()).unwrap_err();
        assert!(matches!(err, MoeaError::Evaluation(_)));
    }

    #[test]
    fn returned_genomes_are_bounded_and_integral() {
        let problem = Needle {
            vars: vec![VariableSpec::integer(0.0, 5.0), VariableSpec::integer(0.0, 5.0)],
        };
        let hp = Hyperparameters { max_evaluations: 200, population_size: 8, seed: 9, ..Default::default() };
        for ind in nsga2_optimize(&problem, &hp).unwrap() {
            for (x, s) in ind.genome.iter().zip(problem.variables()) {
                assert!(*x >= s.lower && *x <= s.upper && x.fract() == 0.0);
            }
        }
    }
}
