//! Grid functions and the two operators acting on them: the integral operator
//!
//! ```text
//! T(f)(x) = sum_j w [ q(t_j, y_j) + s(t_j, y_j) f(y_j) ],   y_j = l(t_j, .)^{-1}(x),
//! ```
//!
//! a midpoint-rule quadrature over `[1, n]` restricted to nodes whose image
//! interval contains x, and the finite-sum operator
//!
//! ```text
//! T(f)(x) = sum_i [ q_i(y_i) + s_i(y_i) f(y_i) ] 1_{X_i}(x),   y_i = l_i^{-1}(x).
//! ```
//!
//! Grid points are evaluated independently (and in parallel); the result is
//! bitwise independent of the thread schedule because each output value is
//! an ascending serial sum over quadrature nodes.

use crate::expr::{self, Expr};
use crate::family::{blend, BaseTriple, Classification, FamilyError, Homotopy, MapFamily};
use crate::hit;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Sup,
    Lp(f64),
}

#[derive(Debug, Clone, Error)]
pub enum OperatorError {
    #[error("grid mismatch: expected {expected} points on [{a}, {b}]")]
    GridMismatch { expected: usize, a: f64, b: f64 },
    #[error("integrand evaluation failed at t = {t}, x = {x}: {source}")]
    Domain {
        t: f64,
        x: f64,
        #[source]
        source: expr::DomainError,
    },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("base map {index} is not injective on the domain")]
    NonInjectiveBase { index: usize },
}

/// Uniformly sampled function on `[a, b]`, evaluated between nodes by linear
/// interpolation (nonexpansive in the sup norm).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    a: f64,
    b: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self, OperatorError> {
        if values.len() < 2 {
            return Err(OperatorError::Grid(format!(
                "need at least 2 grid values, got {}",
                values.len()
            )));
        }
        if !(a < b) {
            return Err(OperatorError::Grid(format!("empty interval [{a}, {b}]")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(OperatorError::Grid(format!("non-finite value {v}")));
        }
        Ok(GridFunction { a, b, values })
    }

    pub fn zeros(a: f64, b: f64, n: usize) -> Self {
        GridFunction::new(a, b, vec![0.0; n]).expect("valid zero grid")
    }

    pub fn constant(a: f64, b: f64, n: usize, c: f64) -> Self {
        GridFunction::new(a, b, vec![c; n]).expect("valid constant grid")
    }

    pub fn from_fn(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self, OperatorError> {
        let values = (0..n)
            .map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64))
            .collect();
        GridFunction::new(a, b, values)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / (self.values.len() - 1) as f64
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.a + (self.b - self.a) * i as f64 / (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; evaluation outside `[a, b]` (beyond 1e-9) is an
    /// error.
    pub fn eval(&self, x: f64) -> Result<f64, OperatorError> {
        if x < self.a - 1e-9 || x > self.b + 1e-9 {
            return Err(OperatorError::Grid(format!(
                "evaluation at {x} outside [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(self.eval_clamped(x))
    }

    /// Interpolation with the argument clamped into the grid's interval;
    /// the operator quadrature uses this so that inverted points falling into
    /// a left-offset gap `[a, a + delta)` extend the leftmost value.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let x = x.clamp(self.a, self.b);
        let h = self.step();
        let pos = (x - self.a) / h;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - i as f64;
        let v0 = self.values[i];
        let v1 = self.values[i + 1];
        v0 + frac * (v1 - v0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Composite-trapezoid p-norm over the grid's interval.
    pub fn p_norm(&self, p: f64) -> f64 {
        let h = self.step();
        let n = self.values.len();
        let mut acc = 0.5 * (self.values[0].abs().powf(p) + self.values[n - 1].abs().powf(p));
        for v in &self.values[1..n - 1] {
            acc += v.abs().powf(p);
        }
        (acc * h).powf(1.0 / p)
    }

    pub fn norm(&self, space: Space) -> f64 {
        match space {
            Space::Sup => self.sup_norm(),
            Space::Lp(p) => self.p_norm(p),
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.values.len() == other.values.len() && self.a == other.a && self.b == other.b
    }

    /// alpha * self + beta * other, pointwise on a shared grid.
    pub fn lin_comb(&self, alpha: f64, beta: f64, other: &GridFunction) -> Result<GridFunction, OperatorError> {
        if !self.same_grid(other) {
            return Err(OperatorError::GridMismatch {
                expected: self.values.len(),
                a: self.a,
                b: self.b,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| alpha * u + beta * v)
            .collect();
        GridFunction::new(self.a, self.b, values)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction, OperatorError> {
        self.lin_comb(1.0, -1.0, other)
    }

    pub fn dist(&self, other: &GridFunction, space: Space) -> Result<f64, OperatorError> {
        Ok(self.sub(other)?.norm(space))
    }
}

/// Offset/scaling field of the integral operator: a single expression in
/// (t, x), or a homotopy extension of per-map expressions in x.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Formula(Expr),
    Extended { bases: Vec<Expr>, h: Homotopy },
}

impl Param {
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, expr::DomainError> {
        match self {
            Param::Formula(e) => expr::eval(e, t, x),
            Param::Extended { bases, h } => blend(bases, h, t, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub fam: MapFamily,
    pub q: Param,
    pub s: Param,
    /// Quadrature nodes over [1, n].
    pub n_t: usize,
    /// Residual tolerance for bisection inversion.
    pub inv_tol: f64,
    /// Left offset: the grid spans [a + delta, b].
    pub delta: f64,
    /// Grid resolution.
    pub n_x: usize,
    pub space: Space,
}

impl OperatorSpec {
    pub fn grid_a(&self) -> f64 {
        self.fam.a() + self.delta
    }

    pub fn zero(&self) -> GridFunction {
        GridFunction::zeros(self.grid_a(), self.fam.b(), self.n_x)
    }

    pub fn one(&self) -> GridFunction {
        GridFunction::constant(self.grid_a(), self.fam.b(), self.n_x, 1.0)
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.n_t < 2 {
            return Err(OperatorError::Grid(format!("n_t = {} too small", self.n_t)));
        }
        if self.n_x < 2 {
            return Err(OperatorError::Grid(format!("n_x = {} too small", self.n_x)));
        }
        if self.delta < 0.0 || self.delta >= (self.fam.b() - self.fam.a()) / self.n_x as f64 {
            return Err(OperatorError::Grid(format!(
                "left offset {} outside [0, (b-a)/n_x)",
                self.delta
            )));
        }
        if !(self.inv_tol > 0.0) {
            return Err(OperatorError::Grid("inversion tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Per-node quadrature context, computed once per application.
struct NodeCtx {
    t: f64,
    class: Classification,
    lo: f64,
    hi: f64,
}

fn node_contexts(fam: &MapFamily, n_t: usize) -> Result<Vec<Option<NodeCtx>>, OperatorError> {
    let span = fam.t_end() - 1.0;
    (0..n_t)
        .map(|j| {
            let t = 1.0 + (j as f64 + 0.5) * span / n_t as f64;
            let class = fam.classify(t);
            if !class.is_monotone() {
                return Ok(None);
            }
            let (lo, hi) = fam.image_interval(t)?;
            Ok(Some(NodeCtx { t, class, lo, hi }))
        })
        .collect()
}

fn invert_at(
    fam: &MapFamily,
    ctx: &NodeCtx,
    x: f64,
    inv_tol: f64,
) -> Result<f64, OperatorError> {
    match ctx.class {
        Classification::Affine { slope, intercept } => {
            Ok(((x - intercept) / slope).clamp(fam.a(), fam.b()))
        }
        _ => {
            let x = x.clamp(ctx.lo, ctx.hi);
            Ok(fam.invert_bisect(ctx.t, x, inv_tol, ctx.class)?)
        }
    }
}

/// Apply the integral operator to `f` on the spec's grid.
pub fn apply_irb(spec: &OperatorSpec, f: &GridFunction) -> Result<GridFunction, OperatorError> {
    spec.validate()?;
    let ga = spec.grid_a();
    let gb = spec.fam.b();
    if f.len() != spec.n_x || f.a() != ga || f.b() != gb {
        return Err(OperatorError::GridMismatch {
            expected: spec.n_x,
            a: ga,
            b: gb,
        });
    }
    let nodes = node_contexts(&spec.fam, spec.n_t)?;
    let w = (spec.fam.t_end() - 1.0) / spec.n_t as f64;
    let b = spec.fam.b();
    let values: Result<Vec<f64>, OperatorError> = (0..spec.n_x)
        .into_par_iter()
        .map(|i| {
            let x = ga + (gb - ga) * i as f64 / (spec.n_x - 1) as f64;
            let mut acc = 0.0;
            for ctx in nodes.iter().flatten() {
                if !hit::member(x, ctx.lo, ctx.hi, b) {
                    continue;
                }
                let y = invert_at(&spec.fam, ctx, x, spec.inv_tol)?;
                let qv = spec.q.eval(ctx.t, y).map_err(|e| OperatorError::Domain {
                    t: ctx.t,
                    x,
                    source: e,
                })?;
                let sv = spec.s.eval(ctx.t, y).map_err(|e| OperatorError::Domain {
                    t: ctx.t,
                    x,
                    source: e,
                })?;
                acc += w * (qv + sv * f.eval_clamped(y));
            }
            Ok(acc)
        })
        .collect();
    GridFunction::new(ga, gb, values?)
}

/// The finite-sum operator induced by a base triple, on a uniform grid over
/// `[a, b]`. Image-interval ties are resolved half-open `[lo, hi)` except the
/// last interval, which is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct RbOperator {
    pub base: BaseTriple,
    pub a: f64,
    pub b: f64,
    pub n_x: usize,
    pub inv_tol: f64,
}

struct RbBranch {
    class: Classification,
    lo: f64,
    hi: f64,
}

impl RbOperator {
    fn branches(&self) -> Result<Vec<(MapFamily, RbBranch)>, OperatorError> {
        // wrap each base map in a trivial direct family to reuse the
        // classification/inversion machinery at a fixed t
        self.base
            .maps
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let fam = MapFamily::direct(e.clone(), 2, self.a, self.b)?;
                let class = fam.classify(1.0);
                if !class.is_monotone() {
                    return Err(OperatorError::NonInjectiveBase { index: i + 1 });
                }
                let (lo, hi) = fam.image_interval(1.0)?;
                Ok((fam, RbBranch { class, lo, hi }))
            })
            .collect()
    }

    pub fn zero(&self) -> GridFunction {
        GridFunction::zeros(self.a, self.b, self.n_x)
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        if f.len() != self.n_x || f.a() != self.a || f.b() != self.b {
            return Err(OperatorError::GridMismatch {
                expected: self.n_x,
                a: self.a,
                b: self.b,
            });
        }
        let branches = self.branches()?;
        let n = self.base.n();
        let values: Result<Vec<f64>, OperatorError> = (0..self.n_x)
            .into_par_iter()
            .map(|i| {
                let x = self.a + (self.b - self.a) * i as f64 / (self.n_x - 1) as f64;
                let mut acc = 0.0;
                for (k, (fam, br)) in branches.iter().enumerate() {
                    let tol = crate::family::MEMBER_TOL;
                    let inside = if k == n - 1 {
                        x >= br.lo - tol && x <= br.hi + tol
                    } else {
                        x >= br.lo - tol && x < br.hi - tol
                    };
                    if !inside {
                        continue;
                    }
                    let ctx = NodeCtx {
                        t: 1.0,
                        class: br.class,
                        lo: br.lo,
                        hi: br.hi,
                    };
                    let y = invert_at(fam, &ctx, x, self.inv_tol)?;
                    let qv = expr::eval(&self.base.q[k], 1.0, y).map_err(|e| OperatorError::Domain {
                        t: 1.0,
                        x,
                        source: e,
                    })?;
                    let sv = expr::eval(&self.base.s[k], 1.0, y).map_err(|e| OperatorError::Domain {
                        t: 1.0,
                        x,
                        source: e,
                    })?;
                    acc += qv + sv * f.eval_clamped(y);
                }
                Ok(acc)
            })
            .collect();
        GridFunction::new(self.a, self.b, values?)
    }
}
