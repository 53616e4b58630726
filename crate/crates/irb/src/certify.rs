//! Contraction certificates, continuity diagnostics, and the two structural
//! checks relating the integral operator to finite-sum operators: exact
//! embedding under a step homotopy with endpoint doubling, and the ramp
//! approximation study with its `2 (n-1) C / k` error bound.

use crate::expr::{self, Expr, Var};
use crate::family::{double_endpoints, BaseTriple, Classification, Homotopy, Inversion, MapFamily};
use crate::hit;
use crate::operator::{apply_irb, GridFunction, OperatorError, OperatorSpec, Param, RbOperator, Space};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimation {
    #[serde(rename = "exact-affine")]
    ExactAffine,
    #[serde(rename = "sampled")]
    Sampled,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type")]
pub enum CertKind {
    /// Sup-norm criterion `S * M < 1`.
    #[serde(rename = "bounded")]
    Bounded { s: f64, m: f64 },
    /// Lp criterion `(n-1) * S * L^{1/p} < 1`.
    #[serde(rename = "lp")]
    Lp { s: f64, l: f64, p: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    #[serde(flatten)]
    pub kind: CertKind,
    pub criterion: f64,
    pub pass: bool,
    pub method: Estimation,
    pub t_samples: usize,
    pub x_samples: usize,
    /// Hit-measure detection error bound (bounded certificates only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_resolution_bound: Option<f64>,
    pub warnings: Vec<String>,
}

fn domain_op_err(t: f64, x: f64) -> impl FnOnce(expr::DomainError) -> OperatorError {
    move |e| OperatorError::Domain { t, x, source: e }
}

/// Sup of |p| over `[1, n] x [a, b]`: exact via corner evaluation when p is
/// affine in each variable (constant-folded polynomial form), otherwise a
/// sampled maximum over an inclusive grid.
fn sup_abs_param(
    p: &Param,
    fam: &MapFamily,
    t_samples: usize,
    x_samples: usize,
) -> Result<(f64, Estimation), OperatorError> {
    let (a, b) = (fam.a(), fam.b());
    let (t0, t1) = (1.0, fam.t_end());
    match p {
        Param::Formula(e) => {
            if let Some(v) = formula_bilinear_sup(e, t0, t1, a, b) {
                return Ok((v, Estimation::ExactAffine));
            }
        }
        Param::Extended { bases, .. } => {
            if let Some(v) = extended_affine_sup(bases, a, b) {
                return Ok((v, Estimation::ExactAffine));
            }
        }
    }
    let mut best = 0.0f64;
    for i in 0..=t_samples {
        let t = t0 + (t1 - t0) * i as f64 / t_samples as f64;
        for j in 0..=x_samples {
            let x = a + (b - a) * j as f64 / x_samples as f64;
            let v = p.eval(t, x).map_err(domain_op_err(t, x))?;
            best = best.max(v.abs());
        }
    }
    Ok((best, Estimation::Sampled))
}

fn formula_bilinear_sup(e: &Expr, t0: f64, t1: f64, a: f64, b: f64) -> Option<f64> {
    let cx = expr::poly_coeffs(e, Var::X, 1)?;
    for c in &cx {
        let ct = expr::poly_coeffs(c, Var::T, 1)?;
        for cc in &ct {
            expr::as_const(cc)?;
        }
    }
    let mut best = 0.0f64;
    for t in [t0, t1] {
        for x in [a, b] {
            best = best.max(expr::eval(e, t, x).ok()?.abs());
        }
    }
    Some(best)
}

fn extended_affine_sup(bases: &[Expr], a: f64, b: f64) -> Option<f64> {
    let mut best = 0.0f64;
    for e in bases {
        let cx = expr::poly_coeffs(e, Var::X, 1)?;
        for c in &cx {
            expr::as_const(c)?;
        }
        for x in [a, b] {
            best = best.max(expr::eval(e, 0.0, x).ok()?.abs());
        }
    }
    Some(best)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sup-norm contraction certificate: `S = sup |s|`, `M = sup_x lambda(T_x)`,
/// pass iff `S M < 1` strictly.
pub fn certify_bounded(
    spec: &OperatorSpec,
    t_samples: usize,
    x_samples: usize,
) -> Result<Certificate, OperatorError> {
    let (s_sup, method) = sup_abs_param(&spec.s, &spec.fam, t_samples, x_samples)?;
    let xs = linspace(spec.fam.a(), spec.fam.b(), x_samples);
    let m_est = hit::max_hit_measure(&spec.fam, &xs, t_samples);
    let criterion = s_sup * m_est.value;
    let mut warnings = Vec::new();
    if m_est.max_intervals > 1 {
        warnings.push(format!(
            "hit sets split into up to {} intervals; measure resolution {:.2e}",
            m_est.max_intervals, m_est.resolution_bound
        ));
    }
    Ok(Certificate {
        kind: CertKind::Bounded {
            s: s_sup,
            m: m_est.value,
        },
        criterion,
        pass: criterion < 1.0,
        method,
        t_samples,
        x_samples,
        m_resolution_bound: Some(m_est.resolution_bound),
        warnings,
    })
}

const DIFF_STEP: f64 = 1e-6;

fn slope_sup_sampled(
    fam: &MapFamily,
    t_samples: usize,
    x_samples: usize,
) -> Result<(f64, Estimation, usize), OperatorError> {
    if let Some(v) = fam.affine_slope_bound() {
        return Ok((v, Estimation::ExactAffine, 0));
    }
    let (a, b) = (fam.a(), fam.b());
    let mut best = 0.0f64;
    let mut non_monotone = 0usize;
    for i in 0..=t_samples {
        let t = 1.0 + (fam.t_end() - 1.0) * i as f64 / t_samples as f64;
        let class = fam.classify(t);
        if !class.is_monotone() {
            non_monotone += 1;
        }
        if let Classification::Affine { slope, .. } = class {
            best = best.max(slope.abs());
            continue;
        }
        for j in 0..=x_samples {
            let x = a + (b - a) * j as f64 / x_samples as f64;
            let (xl, xr) = ((x - DIFF_STEP).max(a), (x + DIFF_STEP).min(b));
            let vl = fam.apply(t, xl)?;
            let vr = fam.apply(t, xr)?;
            best = best.max(((vr - vl) / (xr - xl)).abs());
        }
    }
    Ok((best, Estimation::Sampled, non_monotone))
}

/// Lp contraction certificate: pass iff `(n-1) S L^{1/p} < 1` strictly, with
/// `L = sup |d l(t,.)/dx|`.
pub fn certify_lp(
    spec: &OperatorSpec,
    p: f64,
    t_samples: usize,
    x_samples: usize,
) -> Result<Certificate, OperatorError> {
    if !(p >= 1.0) {
        return Err(OperatorError::Grid(format!("Lp exponent {p} must be >= 1")));
    }
    let (s_sup, s_method) = sup_abs_param(&spec.s, &spec.fam, t_samples, x_samples)?;
    let (l_sup, l_method, non_monotone) = slope_sup_sampled(&spec.fam, t_samples, x_samples)?;
    let n1 = spec.fam.t_end() - 1.0;
    let criterion = n1 * s_sup * l_sup.powf(1.0 / p);
    let method = if s_method == Estimation::ExactAffine && l_method == Estimation::ExactAffine {
        Estimation::ExactAffine
    } else {
        Estimation::Sampled
    };
    let mut warnings = Vec::new();
    if non_monotone > 0 {
        warnings.push(format!(
            "{non_monotone} of {} slope probes hit non-monotone t",
            t_samples + 1
        ));
    }
    Ok(Certificate {
        kind: CertKind::Lp {
            s: s_sup,
            l: l_sup,
            p,
        },
        criterion,
        pass: criterion < 1.0,
        method,
        t_samples,
        x_samples,
        m_resolution_bound: None,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityAtX {
    pub x: f64,
    /// Measure estimates of the t-sets where the probed transform of x is
    /// discontinuous.
    pub d_inverse: f64,
    pub d_q: f64,
    pub d_s: f64,
    pub boundary_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub per_x: Vec<ContinuityAtX>,
    /// True when every probed measure is below one-node resolution, the
    /// sufficient condition for a continuous fixed point.
    pub predicts_continuous: bool,
}

/// Scan jump scores of `l_t^{-1}`, `q_t(l_t^{-1})`, `s_t(l_t^{-1})` in x at
/// every quadrature node; a node is flagged when the centered jump exceeds
/// 10 eps times the local (one-sided-minimum) slope estimate, with eps twice
/// the grid step.
pub fn continuity_diagnostic(
    spec: &OperatorSpec,
    xs: &[f64],
    n_t: usize,
) -> Result<ContinuityReport, OperatorError> {
    let fam = &spec.fam;
    let (a, b) = (fam.a(), fam.b());
    let eps = 2.0 * (b - spec.grid_a()) / (spec.n_x - 1) as f64;
    let span = fam.t_end() - 1.0;
    let resolution = span / n_t as f64;
    let mut per_x = Vec::with_capacity(xs.len());
    let mut predicts = true;

    for &x in xs {
        if x - eps < a || x + eps > b {
            continue; // stencil leaves the domain
        }
        let mut counts = [0usize; 3];
        for j in 0..n_t {
            let t = 1.0 + (j as f64 + 0.5) * span / n_t as f64;
            let ys: Option<Vec<f64>> = [x - eps, x, x + eps]
                .iter()
                .map(|&xi| match fam.invert(t, xi, spec.inv_tol) {
                    Ok(Inversion::Point(y)) => Some(y),
                    _ => None,
                })
                .collect();
            let Some(ys) = ys else { continue };
            let q_vals: Result<Vec<f64>, _> =
                ys.iter().map(|&y| spec.q.eval(t, y)).collect();
            let s_vals: Result<Vec<f64>, _> =
                ys.iter().map(|&y| spec.s.eval(t, y)).collect();
            let q_vals = q_vals.map_err(domain_op_err(t, x))?;
            let s_vals = s_vals.map_err(domain_op_err(t, x))?;
            for (slot, vals) in [(0, &ys), (1, &q_vals), (2, &s_vals)] {
                let score = (vals[2] - vals[0]).abs();
                let slope = ((vals[1] - vals[0]).abs() / eps).min((vals[2] - vals[1]).abs() / eps);
                if score > 10.0 * eps * slope.max(1.0) {
                    counts[slot] += 1;
                }
            }
        }
        let entry = ContinuityAtX {
            x,
            d_inverse: counts[0] as f64 / n_t as f64 * span,
            d_q: counts[1] as f64 / n_t as f64 * span,
            d_s: counts[2] as f64 / n_t as f64 * span,
            boundary_time: hit::boundary_time_measure(fam, x, n_t)?,
        };
        if entry.d_inverse >= resolution
            || entry.d_q >= resolution
            || entry.d_s >= resolution
            || entry.boundary_time >= resolution
        {
            predicts = false;
        }
        per_x.push(entry);
    }
    Ok(ContinuityReport {
        per_x,
        predicts_continuous: predicts,
    })
}

/// Apply both the step-homotopy integral operator (built from the triple with
/// endpoint-doubled q and s) and the finite-sum operator of the raw triple to
/// `f`; returns the sup-grid discrepancy. With `n_t` divisible by `2 (n-1)`
/// the half-integer breakpoints are panel boundaries and the two agree to
/// rounding.
pub fn embed_rb_check(
    base: &BaseTriple,
    f: &GridFunction,
    n_t: usize,
) -> Result<f64, OperatorError> {
    let n = base.n();
    if n_t % (2 * (n - 1)) != 0 {
        return Err(OperatorError::Grid(format!(
            "n_t = {n_t} must be divisible by 2 (n-1) = {} for panel alignment",
            2 * (n - 1)
        )));
    }
    let (a, b) = (f.a(), f.b());
    let h = Homotopy::Step(0.5);
    let fam = MapFamily::extend(base.maps.clone(), h.clone(), a, b)?;
    let spec = OperatorSpec {
        fam,
        q: Param::Extended {
            bases: double_endpoints(&base.q),
            h: h.clone(),
        },
        s: Param::Extended {
            bases: double_endpoints(&base.s),
            h,
        },
        n_t,
        inv_tol: 1e-13,
        delta: 0.0,
        n_x: f.len(),
        space: Space::Sup,
    };
    let irb = apply_irb(&spec, f)?;
    let rb = RbOperator {
        base: base.clone(),
        a,
        b,
        n_x: f.len(),
        inv_tol: 1e-13,
    };
    let sum = rb.apply(f)?;
    irb.dist(&sum, Space::Sup)
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxEntry {
    pub k: u32,
    /// Sup-grid difference between the ramp and step operators applied to f.
    pub e: f64,
    /// `2 (n-1) (C_q + C_s ||f||_sup) / k`.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxStudy {
    pub entries: Vec<ApproxEntry>,
    pub c_q: f64,
    pub c_s: f64,
    /// Sup-grid `||T f - T^(k_max) f||` for the near-indicator probe
    /// `f = k_max` on `[a, b)`, zero at b. Uniform-in-f convergence would
    /// force this to 0; the true value stays near 1 for partition families.
    pub nonuniform_probe: f64,
    pub warnings: Vec<String>,
}

fn triple_spec(base: &BaseTriple, h: Homotopy, f: &GridFunction, n_t: usize) -> Result<OperatorSpec, OperatorError> {
    let fam = MapFamily::extend(base.maps.clone(), h.clone(), f.a(), f.b())?;
    Ok(OperatorSpec {
        fam,
        q: Param::Extended {
            bases: base.q.clone(),
            h: h.clone(),
        },
        s: Param::Extended {
            bases: base.s.clone(),
            h,
        },
        n_t,
        inv_tol: 1e-13,
        delta: 0.0,
        n_x: f.len(),
        space: Space::Sup,
    })
}

/// Compare ramp-homotopy operators `T^(k)` against the step-homotopy operator
/// `T` built from the same triple (no internal doubling; pass a doubled
/// triple to study the finite-sum embedding).
pub fn approx_rb_study(
    base: &BaseTriple,
    ks: &[u32],
    f: &GridFunction,
    n_t: usize,
) -> Result<ApproxStudy, OperatorError> {
    if ks.is_empty() {
        return Err(OperatorError::Grid("need at least one ramp steepness".into()));
    }
    let step_spec = triple_spec(base, Homotopy::Step(0.5), f, n_t)?;
    let t_f = apply_irb(&step_spec, f)?;
    let (c_q, _) = sup_abs_param(&step_spec.q, &step_spec.fam, 256, 256)?;
    let (c_s, _) = sup_abs_param(&step_spec.s, &step_spec.fam, 256, 256)?;
    let n1 = step_spec.fam.t_end() - 1.0;
    let f_sup = f.sup_norm();

    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for &k in ks {
        let ramp_spec = triple_spec(base, Homotopy::Ramp(k), f, n_t)?;
        let profile = ramp_spec.fam.injectivity_profile(512);
        if profile.non_injective_measure >= 0.05 {
            warnings.push(format!(
                "ramp k = {k}: family non-injective on t-measure {:.3e}",
                profile.non_injective_measure
            ));
        }
        let tk_f = apply_irb(&ramp_spec, f)?;
        entries.push(ApproxEntry {
            k,
            e: tk_f.dist(&t_f, Space::Sup)?,
            bound: 2.0 * n1 * (c_q + c_s * f_sup) / k as f64,
        });
    }

    let k_max = *ks.iter().max().unwrap();
    let mut probe_vals = vec![k_max as f64; f.len()];
    *probe_vals.last_mut().unwrap() = 0.0;
    let f_probe = GridFunction::new(f.a(), f.b(), probe_vals)?;
    let ramp_spec = triple_spec(base, Homotopy::Ramp(k_max), &f_probe, n_t)?;
    let probe = apply_irb(&ramp_spec, &f_probe)?
        .dist(&apply_irb(&step_spec, &f_probe)?, Space::Sup)?;

    Ok(ApproxStudy {
        entries,
        c_q,
        c_s,
        nonuniform_probe: probe,
        warnings,
    })
}
