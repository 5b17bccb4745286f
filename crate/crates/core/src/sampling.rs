//! Seeded generators for random states, spectra and ε-ball members.
//!
//! The ball sampler moves a half-L1 mass of at most `u·ε` from a random
//! "take" subset to a disjoint random "give" subset, clipping each take at
//! the available probability, so every sample lies in the ball exactly.
//! Uniformity over the ball is not attempted.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::Exp1;

use crate::state::{BlockDiagonalState, EnergySpectrum, ThermalContext};

/// Above this dimension [`ball_vertices`] only uses a few drain orders.
const FULL_VERTEX_DIM: usize = 6;

/// Random probability vector (flat Dirichlet). Each entry is zeroed with
/// probability `zero_chance`, keeping at least one positive entry.
pub fn random_probabilities<R: Rng + ?Sized>(d: usize, zero_chance: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d)
            .map(|_| {
                if zero_chance > 0.0 && rng.random_bool(zero_chance) {
                    0.0
                } else {
                    rng.sample::<f64, _>(Exp1)
                }
            })
            .collect();
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            v.iter_mut().for_each(|x| *x /= total);
            return v;
        }
    }
}

/// Random energies in `[0, max_energy)` and `beta` in `[0.2, 3)`.
pub fn random_context<R: Rng + ?Sized>(d: usize, max_energy: f64, rng: &mut R) -> ThermalContext {
    let energies = (0..d).map(|_| rng.random::<f64>() * max_energy).collect();
    let beta = 0.2 + 2.8 * rng.random::<f64>();
    ThermalContext::new(EnergySpectrum::new(energies).expect("finite"), beta).expect("valid beta")
}

/// Random state on `context` (see [`random_probabilities`]).
pub fn random_state<R: Rng + ?Sized>(context: &ThermalContext, zero_chance: f64, rng: &mut R) -> BlockDiagonalState {
    BlockDiagonalState::from_raw(random_probabilities(context.dim(), zero_chance, rng))
}

pub fn random_permutation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..d).collect();
    p.shuffle(rng);
    p
}

/// Random member of the ε-ball around `center` (same basis).
pub fn sample_ball<R: Rng + ?Sized>(center: &[f64], eps: f64, rng: &mut R) -> Vec<f64> {
    let d = center.len();
    let mut q = center.to_vec();
    if d < 2 || eps <= 0.0 {
        return q;
    }
    let u = if rng.random_bool(0.25) {
        1.0
    } else {
        1.0 - rng.random::<f64>()
    };
    let budget = u * eps;

    // 0 = untouched, 1 = take, 2 = give
    let mut roles: Vec<u8> = Vec::with_capacity(d);
    for _ in 0..16 {
        roles = (0..d).map(|_| rng.random_range(0..3u8)).collect();
        let takes = (0..d).any(|i| roles[i] == 1 && center[i] > 0.0);
        if takes && roles.contains(&2) {
            break;
        }
        roles.clear();
    }
    if roles.is_empty() {
        let from = (0..d).filter(|&i| center[i] > 0.0).collect::<Vec<_>>();
        let take = *from.choose(rng).expect("a normalized state has support");
        let give = (take + rng.random_range(1..d)) % d;
        roles = vec![0; d];
        roles[take] = 1;
        roles[give] = 2;
    }

    let mut taken = 0.0;
    let mut open: Vec<(usize, f64)> = (0..d)
        .filter(|&i| roles[i] == 1 && center[i] > 0.0)
        .map(|i| (i, rng.sample::<f64, _>(Exp1)))
        .collect();
    // water-filling: saturated levels drop out, the rest share what is left
    while !open.is_empty() && budget - taken > 0.0 {
        let remaining = budget - taken;
        let wsum: f64 = open.iter().map(|o| o.1).sum();
        let mut next = Vec::with_capacity(open.len());
        for &(i, w) in &open {
            let want = remaining * w / wsum;
            if want >= q[i] {
                taken += q[i];
                q[i] = 0.0;
            } else {
                taken += want;
                q[i] -= want;
                next.push((i, w));
            }
        }
        if next.len() == open.len() {
            break;
        }
        open = next;
    }

    let gives: Vec<(usize, f64)> = (0..d)
        .filter(|&i| roles[i] == 2)
        .map(|i| (i, rng.sample::<f64, _>(Exp1)))
        .collect();
    let wsum: f64 = gives.iter().map(|g| g.1).sum();
    for (i, w) in gives {
        q[i] += taken * w / wsum;
    }
    q
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Greedy extreme points of the ε-ball: all movable mass (up to ε) is put on
/// a single level, drained from the others in a fixed order.
pub fn ball_vertices(center: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    if d < 2 || eps <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for give in 0..d {
        let others: Vec<usize> = (0..d).filter(|&i| i != give).collect();
        let orders = if d <= FULL_VERTEX_DIM {
            permutations(&others)
        } else {
            let mut by_mass = others.clone();
            by_mass.sort_by(|&a, &b| center[a].total_cmp(&center[b]));
            let mut rev = by_mass.clone();
            rev.reverse();
            vec![others.clone(), by_mass, rev]
        };
        for order in orders {
            let mut q = center.to_vec();
            let mut left = eps.min(1.0 - center[give]);
            let mut moved = 0.0;
            for &i in &order {
                if left <= 0.0 {
                    break;
                }
                let t = q[i].min(left);
                q[i] -= t;
                left -= t;
                moved += t;
            }
            q[give] += moved;
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::half_l1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_samples_stay_in_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let d = rng.random_range(1..7);
            let p = random_probabilities(d, 0.2, &mut rng);
            let eps = rng.random::<f64>();
            let q = sample_ball(&p, eps, &mut rng);
            assert!(q.iter().all(|&x| x >= 0.0));
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(half_l1(&p, &q) <= eps + 1e-12);
        }
    }

    #[test]
    fn vertices_include_counterexample_state() {
        let v = ball_vertices(&[0.55, 0.35, 0.1], 0.45);
        assert!(v
            .iter()
            .any(|q| (q[0] - 0.45).abs() < 1e-12 && q[1] == 0.0 && (q[2] - 0.55).abs() < 1e-12));
        for q in &v {
            assert!(half_l1(&[0.55, 0.35, 0.1], q) <= 0.45 + 1e-12);
        }
    }

    #[test]
    fn permutation_is_bijection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = random_permutation(9, &mut rng);
        p.sort();
        assert_eq!(p, (0..9).collect::<Vec<_>>());
        assert_eq!(permutations(&[0, 1, 2]).len(), 6);
    }
}
