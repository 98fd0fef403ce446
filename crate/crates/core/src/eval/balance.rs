use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::nearest_rank;

/// Stratified training subset: the top `M = floor(0.05 N)` articles by
/// target, `M` drawn from the 75th-95th percentile band and `M` from below
/// the 75th percentile. Returns indices into `targets`.
///
/// A stratum with fewer than `M` members is sampled with replacement; an
/// empty stratum falls back to all non-top articles.
pub fn balance_training_set<R: Rng>(targets: &[u64], rng: &mut R) -> Result<Vec<usize>> {
    let n = targets.len();
    if n < 20 {
        return Err(Error::Input(format!("balancing needs at least 20 articles, got {n}")));
    }
    let m = n / 20;

    let mut by_target: Vec<usize> = (0..n).collect();
    by_target.sort_by(|&a, &b| targets[b].cmp(&targets[a]).then(a.cmp(&b)));
    let top = &by_target[..m];
    let rest = &by_target[m..];

    let sorted: Vec<f64> = {
        let mut v: Vec<f64> = targets.iter().map(|&t| t as f64).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let p75 = nearest_rank(&sorted, 0.75);
    let p95 = nearest_rank(&sorted, 0.95);

    let mut band: Vec<usize> = Vec::new();
    let mut low: Vec<usize> = Vec::new();
    for &i in rest {
        let t = targets[i] as f64;
        if t >= p75 && t < p95 {
            band.push(i);
        } else if t < p75 {
            low.push(i);
        }
    }
    band.sort_unstable();
    low.sort_unstable();
    let mut fallback = rest.to_vec();
    fallback.sort_unstable();

    let mut out = top.to_vec();
    for stratum in [&band, &low] {
        let pool: &[usize] = if stratum.is_empty() { &fallback } else { stratum };
        out.extend(draw(pool, m, rng));
    }
    Ok(out)
}

fn draw<R: Rng>(pool: &[usize], m: usize, rng: &mut R) -> Vec<usize> {
    if pool.len() >= m {
        sample(rng, pool.len(), m).into_iter().map(|j| pool[j]).collect()
    } else {
        (0..m).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}
