use crate::error::{Error, Result};
use crate::problem::Dataset;
use crate::rng::Prng;
use crate::Scalar;

/// Seeded shuffle, then the first `floor(train_fraction * n)` samples train.
pub fn split<T: Scalar>(data: &Dataset<T>, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(
            "split",
            format!("train fraction {train_fraction} must lie in (0, 1)"),
        ));
    }
    let n = data.len();
    let n_train = (train_fraction * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(
            "split",
            format!("fraction {train_fraction} of {n} samples leaves one side empty"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Prng::seeded(seed).shuffle(&mut order);
    Ok((data.subset(&order[..n_train])?, data.subset(&order[n_train..])?))
}
