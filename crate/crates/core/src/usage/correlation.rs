use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::UserVector;

/// Pearson's r of two equal-length samples, computed from centred sums.
/// `None` when either sample has zero variance or fewer than two points.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "samples must pair up");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlations between the five usage components over all users.
/// Rows and columns of zero-variance components are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: [String; 5],
    pub r: [[Option<f64>; 5]; 5],
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.r[i][j]
    }
}

pub fn correlation_matrix(vectors: &[UserVector]) -> Result<CorrelationMatrix> {
    if vectors.len() < 2 {
        return Err(Error::invalid("vectors", "need at least two users"));
    }
    let columns: Vec<Vec<f64>> = (0..5)
        .map(|k| vectors.iter().map(|v| v.components()[k]).collect())
        .collect();
    let mut r = [[None; 5]; 5];
    for i in 0..5 {
        for j in i..5 {
            let value = if i == j {
                pearson(&columns[i], &columns[i]).map(|_| 1.0)
            } else {
                pearson(&columns[i], &columns[j])
            };
            r[i][j] = value;
            r[j][i] = value;
        }
    }
    Ok(CorrelationMatrix {
        labels: UserVector::LABELS.map(str::to_owned),
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_and_negation() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &[3.0; 4]), None);
        assert_eq!(pearson(&[1.0], &[2.0]), None);
    }

    #[test]
    fn zero_variance_marks_row_and_column() {
        let ip = "10.0.0.1".parse().unwrap();
        let v = |a, b| UserVector {
            ip,
            n_created_hg: 0,
            n_viewed_hg: a,
            n_datasets_hg: b,
            n_viewed_ag: a * 2,
            n_datasets_ag: 1,
        };
        let m = correlation_matrix(&[v(1, 1), v(2, 1), v(5, 2)]).unwrap();
        for k in 0..5 {
            assert_eq!(m.get(0, k), None);
            assert_eq!(m.get(k, 4), None);
        }
        assert_eq!(m.get(1, 1), Some(1.0));
        assert!((m.get(1, 3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.get(1, 2), m.get(2, 1));
        assert!(correlation_matrix(&[v(1, 1)]).is_err());
    }
}
