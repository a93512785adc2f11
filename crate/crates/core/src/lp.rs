//! Small dense linear programs: `max c.x  s.t.  A x <= b, x >= 0` with
//! `b >= 0`. Thin wrapper over microlp.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::Lp(format!(
            "{m} rows but {} right-hand sides",
            b.len()
        )));
    }
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::Lp(
            "constraint row length differs from objective".into(),
        ));
    }
    if b.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Lp(
            "right-hand sides must be finite and nonnegative".into(),
        ));
    }
    if c.iter().chain(a.iter().flatten()).any(|x| !x.is_finite()) {
        return Err(Error::Lp("non-finite coefficient".into()));
    }

    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = c
        .iter()
        .map(|&cj| p.add_var(cj, (0.0, f64::INFINITY)))
        .collect();
    for (row, &bi) in a.iter().zip(b) {
        let terms: Vec<_> = vars
            .iter()
            .zip(row)
            .filter(|(_, &v)| v != 0.0)
            .map(|(&x, &v)| (x, v))
            .collect();
        if !terms.is_empty() {
            p.add_constraint(terms.as_slice(), ComparisonOp::Le, bi);
        }
    }
    let sol = p
        .solve()
        .map_err(|e| Error::Lp(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Lp("solve interrupted".into()))?;
    let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let s = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_reported() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0]).is_err());
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example under the largest-coefficient rule.
        let c = [10.0, -57.0, -9.0, -24.0];
        let a = vec![
            vec![0.5, -5.5, -2.5, 9.0],
            vec![0.5, -1.5, -0.5, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ];
        let s = maximize(&c, &a, &[0.0, 0.0, 1.0]).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_rhs() {
        assert!(maximize(&[1.0], &[vec![1.0]], &[-1.0]).is_err());
    }
}
