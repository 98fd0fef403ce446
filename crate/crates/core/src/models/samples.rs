/// One autoregressive training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ArSample {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Input layout shared by the AR models: `[lags.., K, statics..]`, where `K`
/// is the 1-based index of the newest lag.
pub fn ar_input(lags: &[f64], step_index: usize, statics: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(lags.len() + 1 + statics.len());
    x.extend_from_slice(lags);
    x.push(step_index as f64);
    x.extend_from_slice(statics);
    x
}

/// Sliding windows over a cumulative series: sample `j` (1-based) uses
/// `f_j..f_{j+k-1}` to predict `f_{j+k}`. Returns nothing when `K <= k`.
pub fn make_ar_samples(cumulative: &[u64], k: usize, statics: &[f64]) -> Vec<ArSample> {
    if k == 0 || cumulative.len() <= k {
        return Vec::new();
    }
    let values: Vec<f64> = cumulative.iter().map(|&v| v as f64).collect();
    (0..values.len() - k)
        .map(|start| ArSample {
            input: ar_input(&values[start..start + k], start + k, statics),
            target: values[start + k],
        })
        .collect()
}
