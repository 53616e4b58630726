//! Time-parameterized families of self-maps `l(t, .) : [a,b] -> [a,b]`,
//! t in `[1, n]`, either given directly as an expression in (t, x) or built
//! by interpolating a finite list of base maps with a homotopy:
//!
//! ```text
//! l(t, .) = (1 - h(t - floor(t))) * base[floor(t)] + h(t - floor(t)) * base[floor(t)+1]
//! ```
//!
//! with `floor(t)` clamped to `n - 1` at `t = n`, so the family hits the last
//! base map exactly. Construction eagerly analyzes the maps (polynomial form
//! in x up to degree 2); per-t classification and closed-form inversion then
//! come from the cached analysis, with a 129-probe sampling fallback.

use crate::expr::{self, Expr, Var};
use thiserror::Error;

const CODOMAIN_TOL: f64 = 1e-9;
const HOMOTOPY_TOL: f64 = 1e-9;
/// Membership tolerance for the closed-interval check in [`MapFamily::invert`].
pub const MEMBER_TOL: f64 = 1e-12;

const SAMPLE_PROBES: usize = 129;
const POLY_TRIM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Homotopy {
    /// h(u) = u
    Identity,
    /// h(u) = 1 on [theta, 1], else 0
    Step(f64),
    /// h(u) = 0 on [0, 1/2 - 1/k], affine with slope k on (1/2 - 1/k, 1/2), 1 on [1/2, 1]
    Ramp(u32),
    /// user expression in t, evaluated at t = u
    Custom(Expr),
}

impl Homotopy {
    pub fn value(&self, u: f64) -> Result<f64, expr::DomainError> {
        Ok(match self {
            Homotopy::Identity => u,
            Homotopy::Step(theta) => {
                if u >= *theta {
                    1.0
                } else {
                    0.0
                }
            }
            Homotopy::Ramp(k) => {
                let k = *k as f64;
                if u >= 0.5 {
                    1.0
                } else if u <= 0.5 - 1.0 / k {
                    0.0
                } else {
                    k * (u - 0.5) + 1.0
                }
            }
            Homotopy::Custom(e) => expr::eval(e, u, u)?,
        })
    }

    /// Endpoint and range check: h(0) = 0, h(1) = 1, h([0,1]) within [0,1].
    pub fn validate(&self) -> Result<(), FamilyError> {
        if let Homotopy::Custom(e) = self {
            if expr::contains_var(e, Var::X) {
                return Err(FamilyError::Homotopy(
                    "custom homotopy must be an expression in t only".into(),
                ));
            }
        }
        if let Homotopy::Ramp(k) = self {
            if *k < 2 {
                return Err(FamilyError::Homotopy("ramp steepness must be >= 2".into()));
            }
        }
        if let Homotopy::Step(theta) = self {
            if !(0.0 < *theta && *theta <= 1.0) {
                return Err(FamilyError::Homotopy(format!(
                    "step threshold {theta} outside (0, 1]"
                )));
            }
        }
        let n_probe = 1001;
        for i in 0..=n_probe {
            let u = i as f64 / n_probe as f64;
            let v = self
                .value(u)
                .map_err(|e| FamilyError::Homotopy(format!("evaluation failed at u={u}: {e}")))?;
            if !(-HOMOTOPY_TOL..=1.0 + HOMOTOPY_TOL).contains(&v) {
                return Err(FamilyError::Homotopy(format!("h({u}) = {v} outside [0, 1]")));
            }
        }
        let h0 = self.value(0.0).unwrap_or(f64::NAN);
        let h1 = self.value(1.0).unwrap_or(f64::NAN);
        if h0.abs() > HOMOTOPY_TOL || (h1 - 1.0).abs() > HOMOTOPY_TOL {
            return Err(FamilyError::Homotopy(format!(
                "endpoints h(0) = {h0}, h(1) = {h1} (need 0 and 1)"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FamilyError {
    #[error("need at least 2 base maps, got {0}")]
    TooFewMaps(usize),
    #[error("invalid homotopy: {0}")]
    Homotopy(String),
    #[error("invalid domain [{a}, {b}]")]
    Domain { a: f64, b: f64 },
    #[error("base map {index} must be an expression in x only")]
    BaseUsesT { index: usize },
    #[error("map leaves the domain: l({t}, {x}) = {value} outside [{a}, {b}]")]
    Codomain {
        t: f64,
        x: f64,
        value: f64,
        a: f64,
        b: f64,
    },
    #[error("map evaluation failed: {0}")]
    Eval(#[from] expr::DomainError),
    #[error("arguments outside the family's domain: t={t}, x={x}")]
    OutOfRange { t: f64, x: f64 },
    #[error("l(t, .) is not injective at t = {t}")]
    NonInjective { t: f64 },
}

/// Per-t monotonicity of `l(t, .)` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// Nonzero slope; inversion is closed-form.
    Affine { slope: f64, intercept: f64 },
    Increasing,
    Decreasing,
    NonMonotone,
}

impl Classification {
    pub fn is_monotone(&self) -> bool {
        !matches!(self, Classification::NonMonotone)
    }
}

/// Outcome of a pointwise inversion attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inversion {
    Point(f64),
    NotInImage,
    NonInjective,
}

#[derive(Debug, Clone, PartialEq)]
enum Variant {
    Direct(Expr),
    Extended { bases: Vec<Expr>, h: Homotopy },
}

/// Cached symbolic analysis: numeric polynomial coefficients per base map, or
/// coefficient expressions in t for a direct family. `None` means sampled.
#[derive(Debug, Clone, PartialEq)]
enum Analysis {
    ExtendedPoly(Vec<Vec<f64>>),
    DirectPoly(Vec<Expr>),
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily {
    variant: Variant,
    analysis: Analysis,
    n: usize,
    a: f64,
    b: f64,
}

/// Convex-combination extension shared by map families and extended q/s
/// parameter fields.
pub fn blend(bases: &[Expr], h: &Homotopy, t: f64, x: f64) -> Result<f64, expr::DomainError> {
    let n = bases.len();
    let i = (t.floor() as usize).clamp(1, n - 1);
    let u = t - i as f64;
    let w = h.value(u)?;
    let lo = expr::eval(&bases[i - 1], t, x)?;
    if w == 0.0 {
        return Ok(lo);
    }
    let hi = expr::eval(&bases[i], t, x)?;
    Ok((1.0 - w) * lo + w * hi)
}

fn classify_poly(coeffs: &[f64], a: f64, b: f64) -> Classification {
    // trim trailing coefficients that are zero relative to the largest
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut deg = 0;
    for (i, c) in coeffs.iter().enumerate() {
        if c.abs() > POLY_TRIM_TOL * (1.0 + scale) {
            deg = i;
        }
    }
    match deg {
        0 => Classification::NonMonotone, // constant map: not injective
        1 => Classification::Affine {
            slope: coeffs[1],
            intercept: coeffs[0],
        },
        2 => {
            let vertex = -coeffs[1] / (2.0 * coeffs[2]);
            if vertex > a + POLY_TRIM_TOL && vertex < b - POLY_TRIM_TOL {
                Classification::NonMonotone
            } else {
                let mid = 0.5 * (a + b);
                let deriv = coeffs[1] + 2.0 * coeffs[2] * mid;
                if deriv > 0.0 {
                    Classification::Increasing
                } else {
                    Classification::Decreasing
                }
            }
        }
        _ => Classification::NonMonotone,
    }
}

impl MapFamily {
    pub fn extend(bases: Vec<Expr>, h: Homotopy, a: f64, b: f64) -> Result<Self, FamilyError> {
        if bases.len() < 2 {
            return Err(FamilyError::TooFewMaps(bases.len()));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(FamilyError::Domain { a, b });
        }
        for (i, e) in bases.iter().enumerate() {
            if expr::contains_var(e, Var::T) {
                return Err(FamilyError::BaseUsesT { index: i + 1 });
            }
        }
        h.validate()?;
        let mut polys = Vec::new();
        let mut all_poly = true;
        for e in &bases {
            match expr::poly_coeffs(e, Var::X, 2) {
                Some(coeffs) => {
                    let vals: Option<Vec<f64>> = coeffs.iter().map(expr::as_const).collect();
                    match vals {
                        Some(v) => polys.push(v),
                        None => {
                            all_poly = false;
                            break;
                        }
                    }
                }
                None => {
                    all_poly = false;
                    break;
                }
            }
        }
        let n = bases.len();
        let fam = MapFamily {
            variant: Variant::Extended { bases, h },
            analysis: if all_poly {
                Analysis::ExtendedPoly(polys)
            } else {
                Analysis::Sampled
            },
            n,
            a,
            b,
        };
        fam.check_codomain()?;
        Ok(fam)
    }

    pub fn direct(e: Expr, n: usize, a: f64, b: f64) -> Result<Self, FamilyError> {
        if n < 2 {
            return Err(FamilyError::TooFewMaps(n));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(FamilyError::Domain { a, b });
        }
        let analysis = match expr::poly_coeffs(&e, Var::X, 2) {
            Some(coeffs) => Analysis::DirectPoly(coeffs),
            None => Analysis::Sampled,
        };
        let fam = MapFamily {
            variant: Variant::Direct(e),
            analysis,
            n,
            a,
            b,
        };
        fam.check_codomain()?;
        Ok(fam)
    }

    fn check_codomain(&self) -> Result<(), FamilyError> {
        let nt = 64;
        let nx = 64;
        for i in 0..=nt {
            let t = 1.0 + (self.n as f64 - 1.0) * i as f64 / nt as f64;
            for j in 0..=nx {
                let x = self.a + (self.b - self.a) * j as f64 / nx as f64;
                let v = self.apply(t, x)?;
                if v < self.a - CODOMAIN_TOL || v > self.b + CODOMAIN_TOL {
                    return Err(FamilyError::Codomain {
                        t,
                        x,
                        value: v,
                        a: self.a,
                        b: self.b,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn t_end(&self) -> f64 {
        self.n as f64
    }

    pub fn apply(&self, t: f64, x: f64) -> Result<f64, FamilyError> {
        if !(1.0 - 1e-9..=self.n as f64 + 1e-9).contains(&t)
            || !(self.a - 1e-9..=self.b + 1e-9).contains(&x)
        {
            return Err(FamilyError::OutOfRange { t, x });
        }
        let t = t.clamp(1.0, self.n as f64);
        let x = x.clamp(self.a, self.b);
        match &self.variant {
            Variant::Direct(e) => Ok(expr::eval(e, t, x)?),
            Variant::Extended { bases, h } => Ok(blend(bases, h, t, x)?),
        }
    }

    /// Numeric polynomial coefficients of `l(t, .)` when the cached analysis
    /// provides them.
    fn poly_at(&self, t: f64) -> Option<Vec<f64>> {
        match &self.analysis {
            Analysis::ExtendedPoly(polys) => {
                let i = (t.floor() as usize).clamp(1, self.n - 1);
                let u = t - i as f64;
                let h = match &self.variant {
                    Variant::Extended { h, .. } => h,
                    _ => unreachable!(),
                };
                let w = h.value(u).ok()?;
                let lo = &polys[i - 1];
                let hi = &polys[i];
                let len = lo.len().max(hi.len());
                let mut out = vec![0.0; len];
                for (k, slot) in out.iter_mut().enumerate() {
                    let l = lo.get(k).copied().unwrap_or(0.0);
                    let r = hi.get(k).copied().unwrap_or(0.0);
                    *slot = (1.0 - w) * l + w * r;
                }
                Some(out)
            }
            Analysis::DirectPoly(coeffs) => coeffs
                .iter()
                .map(|c| expr::eval(c, t, 0.0).ok())
                .collect::<Option<Vec<f64>>>(),
            Analysis::Sampled => None,
        }
    }

    pub fn classify(&self, t: f64) -> Classification {
        if let Some(coeffs) = self.poly_at(t) {
            return classify_poly(&coeffs, self.a, self.b);
        }
        self.classify_sampled(t)
    }

    fn classify_sampled(&self, t: f64) -> Classification {
        let m = SAMPLE_PROBES;
        let mut prev = match self.apply(t, self.a) {
            Ok(v) => v,
            Err(_) => return Classification::NonMonotone,
        };
        let mut up = false;
        let mut down = false;
        for i in 1..m {
            let x = self.a + (self.b - self.a) * i as f64 / (m - 1) as f64;
            let v = match self.apply(t, x) {
                Ok(v) => v,
                Err(_) => return Classification::NonMonotone,
            };
            if v > prev {
                up = true;
            } else if v < prev {
                down = true;
            }
            prev = v;
        }
        match (up, down) {
            (true, false) => Classification::Increasing,
            (false, true) => Classification::Decreasing,
            _ => Classification::NonMonotone,
        }
    }

    /// Image `X_t = l(t, [a,b])` as a sorted closed interval. Errors for
    /// non-monotone t.
    pub fn image_interval(&self, t: f64) -> Result<(f64, f64), FamilyError> {
        if !self.classify(t).is_monotone() {
            return Err(FamilyError::NonInjective { t });
        }
        let va = self.apply(t, self.a)?;
        let vb = self.apply(t, self.b)?;
        Ok(if va <= vb { (va, vb) } else { (vb, va) })
    }

    /// Solve `l(t, y) = x` for y. Closed form for affine maps; bisection to
    /// residual `tol` for other monotone maps; `NonInjective` otherwise.
    /// Membership in the image uses the closed interval with tolerance
    /// [`MEMBER_TOL`].
    pub fn invert(&self, t: f64, x: f64, tol: f64) -> Result<Inversion, FamilyError> {
        let class = self.classify(t);
        match class {
            Classification::NonMonotone => Ok(Inversion::NonInjective),
            Classification::Affine { slope, intercept } => {
                let y = (x - intercept) / slope;
                if y < self.a - MEMBER_TOL / slope.abs() || y > self.b + MEMBER_TOL / slope.abs() {
                    return Ok(Inversion::NotInImage);
                }
                Ok(Inversion::Point(y.clamp(self.a, self.b)))
            }
            Classification::Increasing | Classification::Decreasing => {
                let (lo, hi) = self.image_interval(t)?;
                if x < lo - MEMBER_TOL || x > hi + MEMBER_TOL {
                    return Ok(Inversion::NotInImage);
                }
                let x = x.clamp(lo, hi);
                Ok(Inversion::Point(self.invert_bisect(t, x, tol, class)?))
            }
        }
    }

    pub(crate) fn invert_bisect(
        &self,
        t: f64,
        x: f64,
        tol: f64,
        class: Classification,
    ) -> Result<f64, FamilyError> {
        let increasing = match class {
            Classification::Increasing => true,
            Classification::Decreasing => false,
            Classification::Affine { slope, .. } => slope > 0.0,
            Classification::NonMonotone => return Err(FamilyError::NonInjective { t }),
        };
        let (mut lo, mut hi) = (self.a, self.b);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let v = self.apply(t, mid)?;
            if (v - x).abs() <= tol {
                return Ok(mid);
            }
            if (v < x) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }

    /// Max |d l(t,.)/dx| over the whole family when it follows exactly from
    /// the cached affine analysis (convex combinations attain the per-map
    /// slopes at integer t). `None` means a sampled estimate is needed.
    pub fn affine_slope_bound(&self) -> Option<f64> {
        match &self.analysis {
            Analysis::ExtendedPoly(polys) => {
                let mut m = 0.0f64;
                for p in polys {
                    if p.len() > 2 {
                        return None;
                    }
                    m = m.max(p.get(1).copied().unwrap_or(0.0).abs());
                }
                Some(m)
            }
            Analysis::DirectPoly(coeffs) => {
                if coeffs.len() > 2 {
                    return None;
                }
                match coeffs.get(1) {
                    Some(c) => expr::as_const(c).map(f64::abs),
                    None => Some(0.0),
                }
            }
            Analysis::Sampled => None,
        }
    }

    /// Fraction of probed t classified non-monotone, scaled to a measure on
    /// the t-axis `[1, n]`. Probes at midpoint nodes.
    pub fn injectivity_profile(&self, n_probe: usize) -> InjectivityProfile {
        let span = self.n as f64 - 1.0;
        let mut flagged = Vec::new();
        for j in 0..n_probe {
            let t = 1.0 + (j as f64 + 0.5) * span / n_probe as f64;
            if !self.classify(t).is_monotone() {
                flagged.push(t);
            }
        }
        InjectivityProfile {
            non_injective_measure: flagged.len() as f64 / n_probe as f64 * span,
            flagged_t: flagged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityProfile {
    pub non_injective_measure: f64,
    pub flagged_t: Vec<f64>,
}

/// Multiply the first and last entries by 2, leaving interior entries alone.
/// This is the endpoint compensation that makes the step-homotopy integral
/// operator reproduce the finite-sum operator exactly.
pub fn double_endpoints(exprs: &[Expr]) -> Vec<Expr> {
    let n = exprs.len();
    exprs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if i == 0 || i == n - 1 {
                Expr::Bin(
                    crate::expr::BinOp::Mul,
                    Box::new(Expr::Const(2.0)),
                    Box::new(e.clone()),
                )
            } else {
                e.clone()
            }
        })
        .collect()
}

/// A finite-sum operator's data: base maps, offsets, and scalings, all
/// expressions in x alone, with equal length n >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseTriple {
    pub maps: Vec<Expr>,
    pub q: Vec<Expr>,
    pub s: Vec<Expr>,
}

impl BaseTriple {
    pub fn new(maps: Vec<Expr>, q: Vec<Expr>, s: Vec<Expr>) -> Result<Self, FamilyError> {
        let n = maps.len();
        if n < 2 {
            return Err(FamilyError::TooFewMaps(n));
        }
        if q.len() != n || s.len() != n {
            return Err(FamilyError::Homotopy(format!(
                "triple lengths differ: {} maps, {} q, {} s",
                n,
                q.len(),
                s.len()
            )));
        }
        for (i, e) in maps.iter().chain(q.iter()).chain(s.iter()).enumerate() {
            if expr::contains_var(e, Var::T) {
                return Err(FamilyError::BaseUsesT { index: i % n + 1 });
            }
        }
        Ok(BaseTriple { maps, q, s })
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }
}
