use std::cmp::Ordering;

use super::Individual;

/// Plain Pareto dominance for minimization.
pub fn pareto_dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Greater) | None => return false,
            Some(Ordering::Less) => strictly = true,
            Some(Ordering::Equal) => {}
        }
    }
    strictly
}

/// Deb's constrained dominance.
pub fn constrained_dominates(a: &Individual, b: &Individual) -> bool {
    match (a.is_feasible(), b.is_feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.total_violation < b.total_violation,
        (true, true) => pareto_dominates(&a.objectives, &b.objectives),
    }
}

/// Splits `pop` into fronts of indices and writes each individual's rank.
pub fn fast_non_dominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if constrained_dominates(&pop[i], &pop[j]) {
                dominated[i].push(j);
                counts[j] += 1;
            } else if constrained_dominates(&pop[j], &pop[i]) {
                dominated[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = fronts.len();
            for &j in &dominated[i] {
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

/// Crowding distance of every member of `front` (indices into `pop`),
/// written to `crowding`.
pub fn crowding_distance(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let m = pop[front[0]].objectives.len();
    let mut order = front.to_vec();
    for k in 0..m {
        order.sort_by(|&a, &b| pop[a].objectives[k].total_cmp(&pop[b].objectives[k]));
        let first = order[0];
        let last = order[order.len() - 1];
        pop[first].crowding = f64::INFINITY;
        pop[last].crowding = f64::INFINITY;
        let range = pop[last].objectives[k] - pop[first].objectives[k];
        if !(range.is_finite() && range > 0.0) {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap = pop[order[w + 1]].objectives[k] - pop[order[w - 1]].objectives[k];
            pop[order[w]].crowding += gap / range;
        }
    }
}
