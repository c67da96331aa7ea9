use crate::error::{Error, Result};
use crate::geograph::Variable;

use super::weights::OUTPUTS;

/// Scores of one output variable.
///
/// `r2` and `explained_variance` are `None` when the truth has zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub explained_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub per_variable: [VariableMetrics; OUTPUTS],
}

impl Metrics {
    /// Mean R^2 over (U, V, T, Q); `None` if any variable's R^2 is undefined.
    pub fn mean_r2(&self) -> Option<f64> {
        let mut sum = 0.0;
        for m in &self.per_variable {
            sum += m.r2?;
        }
        Some(sum / OUTPUTS as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,rmse,mae,r2,var\n");
        let fmt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
        for (v, m) in Variable::STATE.iter().zip(&self.per_variable) {
            out.push_str(&format!(
                "{v},{:.6},{:.6},{},{}\n",
                m.rmse,
                m.mae,
                fmt(m.r2),
                fmt(m.explained_variance)
            ));
        }
        out
    }
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// RMSE, MAE, R^2 = 1 - SS_res/SS_tot and explained variance
/// 1 - Var(residual)/Var(truth), per output variable.
pub fn compute_metrics(preds: &[[f64; OUTPUTS]], labels: &[[f64; OUTPUTS]]) -> Result<Metrics> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.len() < 2 {
        return Err(Error::Empty("metric sample (need at least 2)"));
    }
    let n = preds.len() as f64;
    let per_variable = std::array::from_fn(|v| {
        let truth = labels.iter().map(move |l| l[v]);
        let resid = labels.iter().zip(preds).map(move |(l, p)| l[v] - p[v]);
        let ss_res: f64 = resid.clone().map(|r| r * r).sum();
        let mae = resid.clone().map(f64::abs).sum::<f64>() / n;
        let var_truth = variance(truth);
        let (r2, explained_variance) = if var_truth > 0.0 {
            (
                Some(1.0 - ss_res / (n * var_truth)),
                Some(1.0 - variance(resid) / var_truth),
            )
        } else {
            (None, None)
        };
        VariableMetrics {
            rmse: (ss_res / n).sqrt(),
            mae,
            r2,
            explained_variance,
        }
    });
    Ok(Metrics { per_variable })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<[f64; 4]> {
        (0..20)
            .map(|i| {
                let x = i as f64;
                [
                    x,
                    (x * 0.7).sin(),
                    250.0 + x * 0.1,
                    1e-3 * (1.0 + (x * 0.3).cos()),
                ]
            })
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let l = labels();
        let m = compute_metrics(&l, &l).unwrap();
        for v in &m.per_variable {
            assert_eq!((v.rmse, v.mae), (0.0, 0.0));
            assert_eq!(v.r2, Some(1.0));
            assert_eq!(v.explained_variance, Some(1.0));
        }
    }

    #[test]
    fn constant_offset() {
        let l = labels();
        let c = 0.3;
        let p: Vec<[f64; 4]> = l.iter().map(|r| r.map(|x| x + c)).collect();
        let m = compute_metrics(&p, &l).unwrap();
        for (v, var) in m.per_variable.iter().enumerate() {
            assert!((var.rmse - c).abs() < 1e-12);
            assert!((var.mae - c).abs() < 1e-12);
            // Direct formulas: a pure bias leaves the residual variance at zero.
            let truth: Vec<f64> = l.iter().map(|r| r[v]).collect();
            let mean = truth.iter().sum::<f64>() / truth.len() as f64;
            let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
            let r2 = 1.0 - truth.len() as f64 * c * c / ss_tot;
            assert!((var.r2.unwrap() - r2).abs() < 1e-9);
            assert!((var.explained_variance.unwrap() - 1.0).abs() < 1e-12);
            assert!(var.r2.unwrap() < var.explained_variance.unwrap());
        }
    }

    #[test]
    fn zero_variance_is_flagged() {
        let l = vec![[1.0, 2.0, 3.0, 4.0]; 5];
        let p: Vec<[f64; 4]> = l.iter().map(|r| r.map(|x| x + 0.1)).collect();
        let m = compute_metrics(&p, &l).unwrap();
        assert!(m.per_variable.iter().all(|v| v.r2.is_none()));
        assert!(m.mean_r2().is_none());
        assert!(m.to_csv().contains("undefined"));
    }

    #[test]
    fn rejects_short_or_mismatched_input() {
        let l = labels();
        assert!(compute_metrics(&l[..1], &l[..1]).is_err());
        assert!(compute_metrics(&l[..3], &l[..4]).is_err());
    }
}
