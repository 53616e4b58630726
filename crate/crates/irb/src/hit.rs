//! Hit-time detection: for fixed x, the set `T_x = { t in [1, n] : x in X_t }`
//! where `X_t` is the image interval of `l(t, .)`.
//!
//! Detection samples membership at midpoint nodes `t_j = 1 + (j - 1/2) (n-1)/N_t`
//! and refines each run boundary by 20 bisection steps on t. Non-monotone
//! nodes are excluded from membership and tallied.
//!
//! Membership convention at the interval endpoints (shared with the operator
//! quadrature): closed at `lo`, half-open at `hi` unless `hi` reaches the
//! domain's right edge, where it is closed. For families continuous in t this
//! only shaves null sets; for step homotopies whose images tile the domain it
//! prevents shared endpoints from being counted twice, mirroring the
//! finite-sum convention ([lo, hi) except the last interval).

use crate::family::{FamilyError, MapFamily, MEMBER_TOL};
use rayon::prelude::*;

const REFINE_STEPS: usize = 20;
const BOUNDARY_EQ_TOL: f64 = 1e-9;

/// x counts as a member of the image interval `[lo, hi]` within a domain
/// ending at `b`.
pub(crate) fn member(x: f64, lo: f64, hi: f64, b: f64) -> bool {
    if x < lo - MEMBER_TOL {
        return false;
    }
    if hi >= b - MEMBER_TOL {
        x <= hi + MEMBER_TOL
    } else {
        x < hi - MEMBER_TOL
    }
}

/// Sorted, disjoint subintervals of `[1, n]` with their total length.
#[derive(Debug, Clone, PartialEq)]
pub struct HitSet {
    pub intervals: Vec<(f64, f64)>,
    pub measure: f64,
    /// Number of probe nodes skipped because `l(t, .)` was not monotone there.
    pub non_monotone_nodes: usize,
}

impl HitSet {
    fn new(intervals: Vec<(f64, f64)>, non_monotone_nodes: usize) -> Self {
        debug_assert!(intervals.windows(2).all(|w| w[0].1 <= w[1].0));
        debug_assert!(intervals.iter().all(|(l, r)| l <= r));
        let measure = intervals.iter().map(|(l, r)| r - l).sum();
        HitSet {
            intervals,
            measure,
            non_monotone_nodes,
        }
    }
}

fn member_at(fam: &MapFamily, x: f64, t: f64) -> Option<bool> {
    if !fam.classify(t).is_monotone() {
        return None;
    }
    let (lo, hi) = fam.image_interval(t).ok()?;
    Some(member(x, lo, hi, fam.b()))
}

/// Bisect the membership transition between `t_in` (member) and `t_out`
/// (non-member); returns the boundary estimate.
fn refine(fam: &MapFamily, x: f64, t_in: f64, t_out: f64) -> f64 {
    let mut a = t_in;
    let mut b = t_out;
    for _ in 0..REFINE_STEPS {
        let mid = 0.5 * (a + b);
        if member_at(fam, x, mid) == Some(true) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

pub fn hit_times(fam: &MapFamily, x: f64, n_t: usize) -> HitSet {
    let span = fam.t_end() - 1.0;
    let node = |j: usize| 1.0 + (j as f64 + 0.5) * span / n_t as f64;
    let mut non_monotone = 0usize;
    let flags: Vec<bool> = (0..n_t)
        .map(|j| match member_at(fam, x, node(j)) {
            Some(m) => m,
            None => {
                non_monotone += 1;
                false
            }
        })
        .collect();

    let mut intervals = Vec::new();
    let mut j = 0;
    while j < n_t {
        if !flags[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j + 1 < n_t && flags[j + 1] {
            j += 1;
        }
        let end = j;
        let left = if start == 0 && member_at(fam, x, 1.0) == Some(true) {
            1.0
        } else {
            let t_out = if start == 0 { 1.0 } else { node(start - 1) };
            refine(fam, x, node(start), t_out)
        };
        let right = if end == n_t - 1 && member_at(fam, x, fam.t_end()) == Some(true) {
            fam.t_end()
        } else {
            let t_out = if end == n_t - 1 { fam.t_end() } else { node(end + 1) };
            refine(fam, x, node(end), t_out)
        };
        intervals.push((left.min(right), left.max(right)));
        j += 1;
    }
    HitSet::new(intervals, non_monotone)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureEstimate {
    pub value: f64,
    /// Worst-case detection error: 2 (n-1) (max #intervals) / N_t.
    pub resolution_bound: f64,
    pub worst_x: f64,
    pub max_intervals: usize,
}

/// `M = sup_x lambda(T_x)` estimated over the probe grid `xs`.
pub fn max_hit_measure(fam: &MapFamily, xs: &[f64], n_t: usize) -> MeasureEstimate {
    let span = fam.t_end() - 1.0;
    let per_x: Vec<(f64, usize)> = xs
        .par_iter()
        .map(|&x| {
            let hs = hit_times(fam, x, n_t);
            (hs.measure, hs.intervals.len())
        })
        .collect();
    let mut value = 0.0f64;
    let mut worst_x = f64::NAN;
    let mut max_intervals = 0usize;
    for (i, &(m, k)) in per_x.iter().enumerate() {
        if m > value || worst_x.is_nan() {
            value = m;
            worst_x = xs[i];
        }
        max_intervals = max_intervals.max(k);
    }
    MeasureEstimate {
        value,
        resolution_bound: 2.0 * span * max_intervals.max(1) as f64 / n_t as f64,
        worst_x,
        max_intervals,
    }
}

/// Measure of `{ t : x lies on the relative boundary of X_t }`, i.e. within
/// `1e-9` of an image endpoint that is interior to `[a, b]`. Estimated as the
/// flagged fraction of midpoint nodes scaled by (n-1).
pub fn boundary_time_measure(fam: &MapFamily, x: f64, n_t: usize) -> Result<f64, FamilyError> {
    let span = fam.t_end() - 1.0;
    let mut count = 0usize;
    for j in 0..n_t {
        let t = 1.0 + (j as f64 + 0.5) * span / n_t as f64;
        if !fam.classify(t).is_monotone() {
            continue;
        }
        let (lo, hi) = fam.image_interval(t)?;
        let on_lo = lo > fam.a() + BOUNDARY_EQ_TOL && (x - lo).abs() <= BOUNDARY_EQ_TOL;
        let on_hi = hi < fam.b() - BOUNDARY_EQ_TOL && (x - hi).abs() <= BOUNDARY_EQ_TOL;
        if on_lo || on_hi {
            count += 1;
        }
    }
    Ok(count as f64 / n_t as f64 * span)
}
