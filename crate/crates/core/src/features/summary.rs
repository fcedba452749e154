use crate::error::{Error, Result};

/// Sample mean and Bessel-corrected sample variance of a count vector.
pub fn count_summary(x: &[u32]) -> Result<[f64; 2]> {
    if x.len() < 2 {
        return Err(Error::Input(format!("count summary needs at least 2 counts, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mean = x.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let ss = x.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>();
    Ok([mean, ss / (n - 1.0)])
}
