//! Picard iteration on the grid, with residual tracking and the a-posteriori
//! error bound `e_k = SM/(1 - SM) * ||f_k - f_{k-1}||` when a contraction
//! factor `SM < 1` is supplied.

use crate::operator::{apply_irb, GridFunction, OperatorError, OperatorSpec, RbOperator, Space};

/// Anything that maps grid functions to grid functions and carries a norm.
pub trait Operator {
    fn apply(&self, f: &GridFunction) -> Result<GridFunction, OperatorError>;
    fn space(&self) -> Space;
    fn norm(&self, f: &GridFunction) -> f64 {
        f.norm(self.space())
    }
}

impl Operator for OperatorSpec {
    fn apply(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        apply_irb(self, f)
    }

    fn space(&self) -> Space {
        self.space
    }
}

impl Operator for RbOperator {
    fn apply(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        RbOperator::apply(self, f)
    }

    fn space(&self) -> Space {
        Space::Sup
    }
}

/// Run exactly `k` applications; returns `[f_0, f_1, ..., f_k]`.
pub fn iterate<O: Operator>(
    op: &O,
    f0: &GridFunction,
    k: usize,
) -> Result<Vec<GridFunction>, OperatorError> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(f0.clone());
    for _ in 0..k {
        let next = op.apply(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// How many leading iterates [`solve`] retains alongside the final one.
pub const KEPT_HEAD: usize = 4;

#[derive(Debug, Clone)]
pub struct IterationReport {
    /// (iteration index, iterate): the first few and the last.
    pub kept: Vec<(usize, GridFunction)>,
    /// `residuals[k-1] = ||f_k - f_{k-1}||`, one entry per iteration taken.
    pub residuals: Vec<f64>,
    /// A-posteriori error bounds, present iff a contraction factor < 1 was
    /// supplied.
    pub bounds: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl IterationReport {
    pub fn last(&self) -> &GridFunction {
        &self.kept.last().expect("kept is never empty").1
    }
}

/// Iterate until the residual drops to `tol` or `k_max` is reached.
///
/// `contraction`: a certified factor SM (or the Lp criterion value); values
/// below 1 enable the a-posteriori bounds. Residual growth over three
/// consecutive steps is flagged as a NotContractive warning either way.
pub fn solve<O: Operator>(
    op: &O,
    f0: &GridFunction,
    tol: f64,
    k_max: usize,
    contraction: Option<f64>,
) -> Result<IterationReport, OperatorError> {
    let mut kept: Vec<(usize, GridFunction)> = vec![(0, f0.clone())];
    let mut residuals = Vec::new();
    let mut prev = f0.clone();
    let mut converged = false;
    let mut growth_run = 0usize;
    let mut warnings = Vec::new();

    let mut k = 0;
    while k < k_max {
        let next = op.apply(&prev)?;
        k += 1;
        let r = next.sub(&prev)?.norm(op.space());
        if let Some(&last_r) = residuals.last() {
            if r > last_r {
                growth_run += 1;
                if growth_run == 3 && warnings.is_empty() {
                    warnings.push(format!(
                        "NotContractive: residual grew for 3 consecutive steps (r_{k} = {r:.3e})"
                    ));
                }
            } else {
                growth_run = 0;
            }
        }
        residuals.push(r);
        if kept.len() < KEPT_HEAD {
            kept.push((k, next.clone()));
        }
        prev = next;
        if r <= tol {
            converged = true;
            break;
        }
    }
    if kept.last().map(|(i, _)| *i) != Some(k) {
        kept.push((k, prev));
    }
    let bounds = contraction.and_then(|sm| {
        if sm < 1.0 && sm >= 0.0 {
            Some(residuals.iter().map(|r| sm / (1.0 - sm) * r).collect())
        } else {
            None
        }
    });
    Ok(IterationReport {
        kept,
        residuals,
        bounds,
        converged,
        iterations: k,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::family::{Homotopy, MapFamily};
    use crate::operator::Param;

    fn exa_spec() -> OperatorSpec {
        let fam = MapFamily::extend(
            vec![parse("x/2").unwrap(), parse("x/2 + 1/2").unwrap()],
            Homotopy::Identity,
            0.0,
            1.0,
        )
        .unwrap();
        OperatorSpec {
            fam,
            q: Param::Formula(parse("ge(x, 2 - t)").unwrap()),
            s: Param::Formula(parse("1/2*x*(t - 1)").unwrap()),
            n_t: 256,
            inv_tol: 1e-12,
            delta: 0.0,
            n_x: 513,
            space: Space::Sup,
        }
    }

    #[test]
    fn residuals_contract_at_the_certified_rate() {
        // S M = 1/2 here; allow discretization slack
        let spec = exa_spec();
        let iters = iterate(&spec, &spec.zero(), 4).unwrap();
        let r2 = iters[2].dist(&iters[1], Space::Sup).unwrap();
        let r3 = iters[3].dist(&iters[2], Space::Sup).unwrap();
        assert!(r3 <= 0.5 * r2 + 1e-3, "r3 = {r3}, r2 = {r2}");
    }

    #[test]
    fn solve_converges_and_reports() {
        let spec = exa_spec();
        let rep = solve(&spec, &spec.zero(), 1e-6, 50, Some(0.5)).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations < 50);
        assert_eq!(rep.residuals.len(), rep.iterations);
        assert!(rep.warnings.is_empty());
        let bounds = rep.bounds.as_ref().unwrap();
        assert_eq!(bounds.len(), rep.residuals.len());
        // factor SM/(1-SM) = 1 here
        for (b, r) in bounds.iter().zip(&rep.residuals) {
            assert!((b - r).abs() < 1e-15);
        }
        // kept: f_0..f_3 plus the last
        assert_eq!(rep.kept.first().unwrap().0, 0);
        assert_eq!(rep.kept.last().unwrap().0, rep.iterations);
        assert!(rep.kept.len() <= KEPT_HEAD + 1);
        // residual list is the distance sequence it claims to be
        assert!(rep.residuals.last().unwrap() <= &1e-6);
    }

    #[test]
    fn start_independence_within_tolerance() {
        let spec = exa_spec();
        let from_zero = solve(&spec, &spec.zero(), 1e-6, 50, Some(0.5)).unwrap();
        let from_one = solve(&spec, &spec.one(), 1e-6, 50, Some(0.5)).unwrap();
        let d = from_zero
            .last()
            .dist(from_one.last(), Space::Sup)
            .unwrap();
        assert!(d <= 2e-6, "starts disagree by {d}");
    }

    #[test]
    fn no_bounds_without_contraction() {
        let spec = exa_spec();
        let rep = solve(&spec, &spec.zero(), 1e-6, 5, None).unwrap();
        assert!(rep.bounds.is_none());
        let rep = solve(&spec, &spec.zero(), 1e-6, 5, Some(1.0)).unwrap();
        assert!(rep.bounds.is_none());
    }

    #[test]
    fn expanding_operator_warns() {
        // s = 3 with hit measure 1: the iteration expands and must say so
        let mut spec = exa_spec();
        spec.s = Param::Formula(parse("3").unwrap());
        let rep = solve(&spec, &spec.one(), 1e-12, 8, None).unwrap();
        assert!(!rep.converged);
        assert!(rep
            .warnings
            .iter()
            .any(|w| w.contains("NotContractive")));
    }
}
