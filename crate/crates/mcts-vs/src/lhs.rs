//! Latin hypercube sampling in the unit cube.

use rand::seq::SliceRandom;
use rand::Rng;

/// `n` points in `[0,1)^d`: per dimension, the coordinates occupy the `n`
/// strata `[j/n, (j+1)/n)` in a random permutation with uniform jitter.
pub fn lhs_sample(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    assert!(n >= 1, "lhs_sample needs at least one point");
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (i, point) in points.iter_mut().enumerate() {
            point[j] = (strata[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points_stratify_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let pts = lhs_sample(2, 1, &mut rng);
            let mut xs = [pts[0][0], pts[1][0]];
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(xs[0] < 0.5 && xs[1] >= 0.5, "{xs:?}");
        }
    }

    #[test]
    fn each_dimension_hits_every_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 5;
        let pts = lhs_sample(n, 3, &mut rng);
        for j in 0..3 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[j] * n as f64) as usize).collect();
            strata.sort_unstable();
            assert_eq!(strata, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn same_seed_same_design() {
        let a = lhs_sample(7, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let b = lhs_sample(7, 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
