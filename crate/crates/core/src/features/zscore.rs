use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column standardization fitted on a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ZScaler {
    /// Fits column means and (population) standard deviations. Constant
    /// columns get a unit scale so they are only centered.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Input("z-transform needs at least two rows".into()));
        }
        let dim = rows[0].as_ref().len();
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::Input("ragged rows in z-transform input".into()));
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        let mut stds = vec![0.0; dim];
        for j in 0..dim {
            let col = rows.iter().map(|r| r.as_ref()[j]);
            let (lo, hi) = col.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo == hi {
                means[j] = lo;
                stds[j] = 1.0;
                continue;
            }
            let mean = col.clone().sum::<f64>() / n;
            let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            stds[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(ZScaler { means, stds })
    }

    pub fn identity(dim: usize) -> Self {
        ZScaler {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    pub fn apply_rows<R: AsRef<[f64]>>(&self, rows: &[R]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standardizes_columns() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.37 - 4.0, (i * i) as f64, 7.25]).collect();
        let z = ZScaler::fit(&rows).unwrap();
        let t = z.apply_rows(&rows);
        for j in 0..2 {
            let m = t.iter().map(|r| r[j]).sum::<f64>() / 50.0;
            let s = (t.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 50.0).sqrt();
            assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10);
        }
        assert!(t.iter().all(|r| r[2] == 0.0));
        assert!(ZScaler::fit(&rows[..1]).is_err());
    }

    proptest! {
        #[test]
        fn invert_undoes_apply(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30),
            v in prop::collection::vec(-1e3f64..1e3, 3),
        ) {
            let z = ZScaler::fit(&rows).unwrap();
            let back = z.invert(&z.apply(&v));
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
