use crate::error::{Error, Result};

/// Mean absolute percentage error over `(actual, predicted)` pairs.
pub fn mape(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Domain("MAPE of an empty set".into()));
    }
    let mut total = 0.0;
    for &(actual, predicted) in pairs {
        if actual <= 0.0 {
            return Err(Error::Domain(format!(
                "MAPE undefined for actual value {actual}; filter to positive actuals first"
            )));
        }
        total += (actual - predicted).abs() / actual;
    }
    Ok(total / pairs.len() as f64)
}

/// Normalised discounted cumulative gain of the top `k` items ranked by
/// predicted value. Equal predictions are ordered by ascending actual value,
/// so ties never help the score.
pub fn ndcg_at_k(items: &[(f64, f64)], k: usize) -> Result<f64> {
    if k > items.len() {
        return Err(Error::Input(format!("k = {k} exceeds {} items", items.len())));
    }
    let mut by_prediction: Vec<(f64, f64)> = items.to_vec();
    by_prediction.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let mut ideal: Vec<f64> = items.iter().map(|i| i.0).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));

    let gain = dcg(by_prediction.iter().map(|i| i.0).take(k));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return Ok(1.0);
    }
    Ok((gain / idcg).min(1.0))
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}
