//! BP thresholds by bisection, for the uncoupled scalar recursion and for
//! coupled ensembles, plus the single-burst recoverability bound.

use std::fmt;

use crate::de::{run_de, ErasurePattern, Termination, Verdict};
use crate::ensemble::{EnsembleParams, ShorteningDomain};
use crate::error::{Error, Result};
use crate::torus::TorusIndex;

/// One round of the uncoupled recursion `x <- eps (1 - (1-x)^(dr-1))^(dl-1)`.
#[inline]
pub fn scalar_de_step(dl: u32, dr: u32, eps: f64, x: f64) -> f64 {
    eps * (1.0 - (1.0 - x).powi(dr as i32 - 1)).powi(dl as i32 - 1)
}

/// Iterates the uncoupled recursion from `x = eps`.
///
/// Returns 0 once `x` drops below `tol`; otherwise the value at which the
/// per-round change fell below `tol` (or the budget ran out).
pub fn scalar_de_fixed_point(dl: u32, dr: u32, eps: f64, tol: f64, max_iters: usize) -> f64 {
    let mut x = eps;
    for _ in 0..max_iters {
        if x < tol {
            return 0.0;
        }
        let next = scalar_de_step(dl, dr, eps, x);
        if (next - x).abs() < tol {
            return if next < tol { 0.0 } else { next };
        }
        x = next;
    }
    x
}

const SCALAR_TOL: f64 = 1e-13;
const SCALAR_MAX_ITERS: usize = 10_000_000;

/// Bisection bracket, resolution and per-run DE budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionSpec {
    pub lo: f64,
    pub hi: f64,
    pub tol_eps: f64,
    pub termination: Termination,
}

impl Default for BisectionSpec {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            tol_eps: 1e-4,
            termination: Termination::default(),
        }
    }
}

impl BisectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lo && self.lo < self.hi && self.hi <= 1.0) || !(self.tol_eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bisection needs 0 <= lo < hi <= 1 and tol_eps > 0 (got lo={}, hi={}, tol_eps={})",
                self.lo, self.hi, self.tol_eps
            )));
        }
        self.termination.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub eps_star: f64,
    pub lo: f64,
    pub hi: f64,
    /// Number of DE runs (or scalar iterations to a fixed point) performed.
    pub evaluations: usize,
    /// Coupling number the threshold was measured at, if coupled.
    pub len_used: Option<usize>,
    /// Set when even `eps = 0` fails to decode (a burst is unrecoverable).
    pub unrecoverable: bool,
    /// Cleared when the coupling-number doubling hit its cap before settling.
    pub converged: bool,
}

impl ThresholdResult {
    fn from_bracket(lo: f64, hi: f64, evaluations: usize) -> Self {
        Self {
            eps_star: 0.5 * (lo + hi),
            lo,
            hi,
            evaluations,
            len_used: None,
            unrecoverable: false,
            converged: true,
        }
    }
}

/// Generic bisection on a monotone success predicate.
fn bisect(
    spec: &BisectionSpec,
    mut succeeds: impl FnMut(f64) -> Result<(bool, String)>,
) -> Result<ThresholdResult> {
    spec.validate()?;
    let (lo_ok, lo_verdict) = succeeds(spec.lo)?;
    if !lo_ok {
        if spec.lo == 0.0 {
            return Ok(ThresholdResult {
                eps_star: 0.0,
                lo: 0.0,
                hi: 0.0,
                evaluations: 1,
                len_used: None,
                unrecoverable: true,
                converged: true,
            });
        }
        let (_, hi_verdict) = succeeds(spec.hi)?;
        return Err(Error::BracketRejected {
            lo: spec.lo,
            hi: spec.hi,
            lo_verdict,
            hi_verdict,
        });
    }
    let (hi_ok, hi_verdict) = succeeds(spec.hi)?;
    if hi_ok {
        return Err(Error::BracketRejected {
            lo: spec.lo,
            hi: spec.hi,
            lo_verdict,
            hi_verdict,
        });
    }
    let (mut lo, mut hi) = (spec.lo, spec.hi);
    let mut evaluations = 2;
    while hi - lo > spec.tol_eps {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if succeeds(mid)?.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult::from_bracket(lo, hi, evaluations))
}

/// BP threshold of the uncoupled `(dl, dr)` ensemble.
pub fn uncoupled_bp_threshold(dl: u32, dr: u32, tol_eps: f64) -> Result<ThresholdResult> {
    uncoupled_bp_threshold_in(dl, dr, 0.0, 1.0, tol_eps)
}

/// As [`uncoupled_bp_threshold`] with an explicit starting bracket.
pub fn uncoupled_bp_threshold_in(
    dl: u32,
    dr: u32,
    lo: f64,
    hi: f64,
    tol_eps: f64,
) -> Result<ThresholdResult> {
    if dl < 2 || dr <= dl {
        return Err(Error::InvalidParams(format!(
            "uncoupled threshold needs dl >= 2 and dr > dl (got dl={dl}, dr={dr})"
        )));
    }
    let spec = BisectionSpec {
        lo,
        hi,
        tol_eps,
        ..BisectionSpec::default()
    };
    bisect(&spec, |eps| {
        let x = scalar_de_fixed_point(dl, dr, eps, SCALAR_TOL, SCALAR_MAX_ITERS);
        Ok((x == 0.0, format!("fixed point {x}")))
    })
}

/// Threshold of a coupled ensemble. Bursts stay fully erased; only the
/// base erasure probability is bisected.
pub fn coupled_bp_threshold(
    params: &EnsembleParams,
    domain: &ShorteningDomain,
    bursts: &[TorusIndex],
    spec: &BisectionSpec,
) -> Result<ThresholdResult> {
    let base = ErasurePattern::new(spec.lo, bursts.iter().cloned(), domain.clone());
    base.validate(params.shape())?;
    let mut result = bisect(spec, |eps| {
        let (out, _) = run_de(params, &base.with_base_eps(eps), &spec.termination, None)?;
        Ok((out.verdict == Verdict::Decoded, out.verdict.to_string()))
    })?;
    result.len_used = Some(params.len);
    Ok(result)
}

/// Starting coupling number for the doubling rule: `4 w (bursts + 1)`.
pub fn doubling_start(w: usize, bursts: usize) -> usize {
    4 * w * (bursts + 1)
}

/// Measures a threshold at `start, 2 start, 4 start, ...` until two
/// consecutive values differ by less than `tol_eps` or `max_len` would be
/// exceeded. The last measurement is returned; `converged` reports which
/// exit was taken.
pub fn threshold_with_doubling(
    start_len: usize,
    max_len: usize,
    tol_eps: f64,
    mut measure: impl FnMut(usize) -> Result<ThresholdResult>,
) -> Result<ThresholdResult> {
    if start_len == 0 || start_len > max_len {
        return Err(Error::InvalidArgument(format!(
            "doubling needs 1 <= start ({start_len}) <= max ({max_len})"
        )));
    }
    let mut len = start_len;
    let mut prev = measure(len)?;
    prev.len_used = Some(len);
    loop {
        let next_len = len * 2;
        if next_len > max_len {
            prev.converged = false;
            return Ok(prev);
        }
        let mut cur = measure(next_len)?;
        cur.len_used = Some(next_len);
        cur.evaluations += prev.evaluations;
        if (cur.eps_star - prev.eps_star).abs() < tol_eps {
            cur.converged = true;
            return Ok(cur);
        }
        len = next_len;
        prev = cur;
    }
}

/// Outcome of the one-directional single-burst test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstBound {
    /// `eps_burst > eps_BP(dl, dr) * w^D`: BP cannot clear the burst even
    /// with every other section known.
    ProvablyUnrecoverable,
    BoundInconclusive,
}

impl fmt::Display for BurstBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BurstBound::ProvablyUnrecoverable => "ProvablyUnrecoverable",
            BurstBound::BoundInconclusive => "BoundInconclusive",
        })
    }
}

/// Compares `eps_burst` against `eps_BP(dl, dr) * w^D`.
pub fn single_burst_bound(dl: u32, dr: u32, w: usize, dim: usize, eps_burst: f64) -> Result<BurstBound> {
    let eps_bp = uncoupled_bp_threshold(dl, dr, 1e-9)?.eps_star;
    single_burst_bound_with(eps_bp, w, dim, eps_burst)
}

/// As [`single_burst_bound`] with a precomputed uncoupled threshold.
pub fn single_burst_bound_with(eps_bp: f64, w: usize, dim: usize, eps_burst: f64) -> Result<BurstBound> {
    if !(0.0..=1.0).contains(&eps_burst) {
        return Err(Error::InvalidArgument(format!(
            "burst erasure probability must lie in [0, 1] (got {eps_burst})"
        )));
    }
    let capacity = eps_bp * (w as f64).powi(dim as i32);
    Ok(if eps_burst > capacity {
        BurstBound::ProvablyUnrecoverable
    } else {
        BurstBound::BoundInconclusive
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::wrap;

    #[test]
    fn scalar_fixed_points() {
        assert_eq!(scalar_de_fixed_point(3, 6, 0.0, 1e-12, 1000), 0.0);
        assert_eq!(scalar_de_fixed_point(3, 6, 0.40, 1e-12, 1_000_000), 0.0);
        let x = scalar_de_fixed_point(3, 6, 0.45, 1e-12, 1_000_000);
        assert!(x > 0.1, "{x}");
        // A fixed point satisfies its own update.
        assert!((scalar_de_step(3, 6, 0.45, x) - x).abs() < 1e-11);
    }

    #[test]
    fn uncoupled_threshold_3_6() {
        let r = uncoupled_bp_threshold(3, 6, 1e-4).unwrap();
        assert!((r.eps_star - 0.4294).abs() < 1e-3, "{r:?}");
        assert!(r.hi - r.lo <= 1e-4);
        let a = uncoupled_bp_threshold_in(3, 6, 0.0, 1.0, 1e-6).unwrap();
        let b = uncoupled_bp_threshold_in(3, 6, 0.2, 0.7, 1e-6).unwrap();
        assert!((a.eps_star - b.eps_star).abs() < 1e-6);
        let c = uncoupled_bp_threshold(3, 9, 1e-6).unwrap();
        assert!(a.eps_star > c.eps_star);
    }

    #[test]
    fn bracket_rejections() {
        let params = EnsembleParams::new(3, 6, 16, 1, 2).unwrap();
        let hp = ShorteningDomain::Hyperplane { axis: 0, width: 2 };
        let spec = BisectionSpec {
            lo: 0.6,
            hi: 0.9,
            ..BisectionSpec::default()
        };
        assert!(matches!(
            coupled_bp_threshold(&params, &hp, &[], &spec),
            Err(Error::BracketRejected { .. })
        ));
        let spec = BisectionSpec {
            lo: 0.0,
            hi: 0.1,
            ..BisectionSpec::default()
        };
        assert!(matches!(
            coupled_bp_threshold(&params, &hp, &[], &spec),
            Err(Error::BracketRejected { .. })
        ));
        assert!(uncoupled_bp_threshold(3, 3, 1e-3).is_err());
    }

    #[test]
    fn unrecoverable_burst_gives_zero() {
        let params = EnsembleParams::new(3, 6, 32, 1, 2).unwrap();
        let s = params.shape();
        let hp = ShorteningDomain::Hyperplane { axis: 0, width: 2 };
        let burst = wrap(&[16], s).unwrap();
        let r = coupled_bp_threshold(&params, &hp, &[burst], &BisectionSpec::default()).unwrap();
        assert!(r.unrecoverable);
        assert_eq!(r.eps_star, 0.0);
    }

    #[test]
    fn burst_bound_examples() {
        assert_eq!(single_burst_bound(3, 6, 2, 1, 1.0).unwrap(), BurstBound::ProvablyUnrecoverable);
        assert_eq!(single_burst_bound(3, 6, 2, 2, 1.0).unwrap(), BurstBound::BoundInconclusive);
        assert_eq!(single_burst_bound(3, 6, 4, 1, 1.0).unwrap(), BurstBound::BoundInconclusive);
        assert!(single_burst_bound(3, 6, 2, 1, 1.5).is_err());
    }

    #[test]
    fn doubling_stops_when_settled() {
        let mut calls = Vec::new();
        let r = threshold_with_doubling(8, 1024, 1e-4, |len| {
            calls.push(len);
            Ok(ThresholdResult::from_bracket(0.5 + 1.0 / len as f64, 0.5 + 1.0 / len as f64, 1))
        })
        .unwrap();
        assert_eq!(calls, vec![8, 16, 32, 64, 128, 256, 512, 1024]);
        assert!(!r.converged);
        let r = threshold_with_doubling(8, 1024, 0.1, |len| {
            Ok(ThresholdResult::from_bracket(1.0 / len as f64, 1.0 / len as f64, 1))
        })
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.len_used, Some(16));
    }
}
