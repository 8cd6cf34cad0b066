use rand::Rng;

use super::{Individual, VariableSpec};

const SBX_EPS: f64 = 1e-14;

/// Picks two members uniformly (with replacement) and returns the index of
/// the one with lower rank, then larger crowding; the first draw wins ties.
pub fn binary_tournament<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    assert!(!pop.is_empty(), "tournament on empty population");
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    tournament_winner(pop, a, b)
}

pub(crate) fn tournament_winner(pop: &[Individual], a: usize, b: usize) -> usize {
    let (x, y) = (&pop[a], &pop[b]);
    if y.rank < x.rank || (y.rank == x.rank && y.crowding > x.crowding) {
        b
    } else {
        a
    }
}

/// Bounded simulated binary crossover.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    rate: f64,
    distribution_index: f64,
    specs: &[VariableSpec],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() >= rate {
        return (c1, c2);
    }
    let exp = 1.0 / (distribution_index + 1.0);
    let betaq = |rand: f64, beta: f64| {
        let alpha = 2.0 - beta.powf(-(distribution_index + 1.0));
        if rand <= 1.0 / alpha {
            (rand * alpha).powf(exp)
        } else {
            (1.0 / (2.0 - rand * alpha)).powf(exp)
        }
    };
    for (i, spec) in specs.iter().enumerate() {
        if rng.gen::<f64>() >= 0.5 || (p1[i] - p2[i]).abs() <= SBX_EPS {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let (lo, hi) = (spec.lower, spec.upper);
        let rand = rng.gen::<f64>();

        let beta = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        let a = 0.5 * ((y1 + y2) - betaq(rand, beta) * (y2 - y1));
        let beta = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        let b = 0.5 * ((y1 + y2) + betaq(rand, beta) * (y2 - y1));
        let (a, b) = (a.clamp(lo, hi), b.clamp(lo, hi));
        if rng.gen::<f64>() < 0.5 {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation applied to each variable with probability
/// `rate`. Returns how many variables were selected for mutation.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    genome: &mut [f64],
    rate: f64,
    distribution_index: f64,
    specs: &[VariableSpec],
    rng: &mut R,
) -> usize {
    let mut mutated = 0;
    let pow = 1.0 / (distribution_index + 1.0);
    for (y, spec) in genome.iter_mut().zip(specs) {
        if rng.gen::<f64>() >= rate {
            continue;
        }
        mutated += 1;
        let (lo, hi) = (spec.lower, spec.upper);
        if hi <= lo {
            continue;
        }
        let d1 = (*y - lo) / (hi - lo);
        let d2 = (hi - *y) / (hi - lo);
        let rnd = rng.gen::<f64>();
        let deltaq = if rnd < 0.5 {
            let xy = 1.0 - d1;
            let val = 2.0 * rnd + (1.0 - 2.0 * rnd) * xy.powf(distribution_index + 1.0);
            val.powf(pow) - 1.0
        } else {
            let xy = 1.0 - d2;
            let val = 2.0 * (1.0 - rnd) + 2.0 * (rnd - 0.5) * xy.powf(distribution_index + 1.0);
            1.0 - val.powf(pow)
        };
        *y = (*y + deltaq * (hi - lo)).clamp(lo, hi);
    }
    mutated
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ranked(rank: usize, crowding: f64) -> Individual {
        Individual {
            rank,
            crowding,
            ..Individual::new(vec![], vec![0.0], vec![])
        }
    }

    #[test]
    fn tournament_rules() {
        let pop = vec![ranked(0, 1.0), ranked(1, f64::INFINITY)];
        assert_eq!(tournament_winner(&pop, 0, 1), 0);
        assert_eq!(tournament_winner(&pop, 1, 0), 0);
        let pop = vec![ranked(0, f64::INFINITY), ranked(0, 2.0)];
        assert_eq!(tournament_winner(&pop, 1, 0), 0);
        let pop = vec![ranked(0, 2.0), ranked(0, 2.0)];
        assert_eq!(tournament_winner(&pop, 1, 0), 1);
        assert_eq!(tournament_winner(&pop, 0, 1), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(binary_tournament(&pop[..1], &mut rng), 0);
    }

    fn unit(n: usize) -> Vec<VariableSpec> {
        vec![VariableSpec::real(0.0, 1.0); n]
    }

    #[test]
    fn sbx_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = unit(3);
        let (p1, p2) = (vec![0.1, 0.5, 0.9], vec![0.7, 0.2, 0.4]);
        for _ in 0..1000 {
            let (c1, c2) = sbx_crossover(&p1, &p2, 0.0, 20.0, &specs, &mut rng);
            assert_eq!((c1, c2), (p1.clone(), p2.clone()));
            let (c1, c2) = sbx_crossover(&p1, &p1, 1.0, 20.0, &specs, &mut rng);
            assert_eq!((c1, c2), (p1.clone(), p1.clone()));
        }
    }

    #[test]
    fn sbx_preserves_parent_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = unit(1);
        let trials = 10_000;
        let mut sum = 0.0;
        let mut crossed = 0;
        for _ in 0..trials {
            let (c1, c2) = sbx_crossover(&[0.2], &[0.8], 1.0, 15.0, &specs, &mut rng);
            assert!((0.0..=1.0).contains(&c1[0]) && (0.0..=1.0).contains(&c2[0]));
            sum += c1[0] + c2[0];
            crossed += usize::from(c1[0] != 0.2 && c1[0] != 0.8);
        }
        assert!((sum / (2 * trials) as f64 - 0.5).abs() < 0.02);
        assert!(crossed > trials / 3);
    }

    #[test]
    fn pm_identity_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = unit(4);
        let orig = vec![0.0, 0.3, 0.6, 1.0];
        for _ in 0..1000 {
            let mut g = orig.clone();
            assert_eq!(polynomial_mutation(&mut g, 0.0, 20.0, &specs, &mut rng), 0);
            assert_eq!(g, orig);
            let mut g = orig.clone();
            polynomial_mutation(&mut g, 1.0, 20.0, &specs, &mut rng);
            assert!(g.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(g[0] >= 0.0 && g[3] <= 1.0);
        }
    }

    #[test]
    fn pm_at_lower_bound_only_moves_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let specs = [VariableSpec::real(2.0, 5.0)];
        let mut moved = 0;
        for _ in 0..2000 {
            let mut g = vec![2.0];
            polynomial_mutation(&mut g, 1.0, 10.0, &specs, &mut rng);
            assert!(g[0] >= 2.0);
            moved += usize::from(g[0] > 2.0);
        }
        assert!(moved > 500);
    }

    #[test]
    fn pm_frequency_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let specs = unit(1);
        for rate in [0.1, 0.55, 0.9] {
            let trials = 10_000;
            let mut changed = 0;
            for _ in 0..trials {
                let mut g = vec![0.5];
                polynomial_mutation(&mut g, rate, 10.8, &specs, &mut rng);
                changed += usize::from(g[0] != 0.5);
            }
            assert!((changed as f64 / trials as f64 - rate).abs() <= 0.02);
        }
    }
}
