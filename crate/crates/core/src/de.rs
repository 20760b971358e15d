//! Density evolution of the coupled ensemble on the torus.
//!
//! Per iteration `l >= 1`, with `S = box_back(p^(l-1))` and `T = box_fwd(q^(l))`:
//!
//! ```text
//! q_i = 1 - (1 - S_i)^(dr-1)
//! p_i = eps_i * T_i^(dl-1)
//! P_b = sum_i eps_i * T_i^dl / (L^D - |Z|)
//! ```
//!
//! `eps_i` is zero on the shortening domain, one on burst sections, and the
//! channel erasure probability elsewhere.

use std::collections::BTreeSet;
use std::fmt;

use crate::ensemble::{domain_size, EnsembleParams, ShorteningDomain};
use crate::error::{Error, Result};
use crate::torus::{box_sum_into, Direction, GridShape, ScalarField, TorusIndex};

/// Per-section channel erasure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasurePattern {
    pub base_eps: f64,
    /// Sections received fully erased.
    pub bursts: BTreeSet<TorusIndex>,
    pub domain: ShorteningDomain,
}

impl ErasurePattern {
    pub fn new(
        base_eps: f64,
        bursts: impl IntoIterator<Item = TorusIndex>,
        domain: ShorteningDomain,
    ) -> Self {
        Self {
            base_eps,
            bursts: bursts.into_iter().collect(),
            domain,
        }
    }

    pub fn uniform(base_eps: f64, domain: ShorteningDomain) -> Self {
        Self::new(base_eps, [], domain)
    }

    pub fn with_base_eps(&self, base_eps: f64) -> Self {
        Self {
            base_eps,
            ..self.clone()
        }
    }

    pub fn validate(&self, shape: GridShape) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_eps) {
            return Err(Error::InvalidArgument(format!(
                "erasure probability must lie in [0, 1] (got {})",
                self.base_eps
            )));
        }
        self.domain.validate(shape)?;
        for b in &self.bursts {
            if b.coords().len() != shape.dim() || b.coords().iter().any(|&c| c >= shape.len()) {
                return Err(Error::InvalidArgument(format!(
                    "burst section {b} lies outside the torus"
                )));
            }
            if self.domain.contains(b) {
                return Err(Error::BurstInShortened(b.coords().to_vec()));
            }
        }
        Ok(())
    }

    /// The field `eps_i`.
    pub fn materialize(&self, shape: GridShape) -> Result<ScalarField> {
        self.validate(shape)?;
        Ok(ScalarField::from_fn(shape, |i| {
            if self.domain.contains(i) {
                0.0
            } else if self.bursts.contains(i) {
                1.0
            } else {
                self.base_eps
            }
        }))
    }

    /// Same pattern shifted by `offset` on the torus.
    pub fn translated(&self, offset: &[i64], shape: GridShape) -> Result<Self> {
        Ok(Self {
            base_eps: self.base_eps,
            bursts: self
                .bursts
                .iter()
                .map(|b| b.shifted(offset, shape))
                .collect::<Result<_>>()?,
            domain: self.domain.translated(offset, shape)?,
        })
    }
}

/// Message erasure probabilities after `iter` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DeState {
    params: EnsembleParams,
    pattern: ErasurePattern,
    eps: ScalarField,
    p: ScalarField,
    q: ScalarField,
    iter: usize,
}

impl DeState {
    pub fn params(&self) -> &EnsembleParams {
        &self.params
    }

    pub fn pattern(&self) -> &ErasurePattern {
        &self.pattern
    }

    /// The materialized channel field `eps_i`.
    pub fn eps(&self) -> &ScalarField {
        &self.eps
    }

    /// Bit-to-check erasure probabilities.
    pub fn p(&self) -> &ScalarField {
        &self.p
    }

    /// Check-to-bit erasure probabilities (all ones before the first step).
    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn iter(&self) -> usize {
        self.iter
    }
}

pub fn init_state(params: &EnsembleParams, pattern: &ErasurePattern) -> Result<DeState> {
    params.validate()?;
    let shape = params.shape();
    let eps = pattern.materialize(shape)?;
    Ok(DeState {
        params: *params,
        pattern: pattern.clone(),
        p: eps.clone(),
        q: ScalarField::constant(shape, 1.0),
        eps,
        iter: 0,
    })
}

/// `q_i = 1 - (1 - S_i)^(dr-1)` with `S` the backward window average of `p`.
pub fn check_update(state: &DeState) -> ScalarField {
    let mut k = Kernel::new(&state.params);
    let mut q = vec![0.0; k.shape.sections()];
    k.check_into(state.p.values(), &mut q);
    ScalarField::new(k.shape, q).expect("sized from shape")
}

/// `p_i = eps_i * T_i^(dl-1)` with `T` the forward window average of `q`.
/// Exactly zero on the shortening domain.
pub fn bit_update(state: &DeState, q: &ScalarField) -> ScalarField {
    let mut k = Kernel::new(&state.params);
    let mut p = vec![0.0; k.shape.sections()];
    k.bit_into(state.eps.values(), q.values(), &mut p);
    ScalarField::new(k.shape, p).expect("sized from shape")
}

/// One Jacobi round: `q^(l)` from `p^(l-1)`, then `p^(l)` from `q^(l)`.
pub fn de_step(state: &DeState) -> DeState {
    let q = check_update(state);
    let p = bit_update(state, &q);
    DeState {
        params: state.params,
        pattern: state.pattern.clone(),
        eps: state.eps.clone(),
        p,
        q,
        iter: state.iter + 1,
    }
}

/// `P_b` for the state's current `q`.
pub fn decoding_erasure_probability(state: &DeState) -> Result<f64> {
    let shape = state.params.shape();
    let transmitted = shape.sections() - domain_size(&state.pattern.domain, shape)?;
    if transmitted == 0 {
        return Err(Error::NoTransmittedBits);
    }
    let mut k = Kernel::new(&state.params);
    let mut p = vec![0.0; shape.sections()];
    let total = k.bit_into(state.eps.values(), state.q.values(), &mut p);
    Ok(total / transmitted as f64)
}

/// Buffers and exponents shared by the update rules.
#[derive(Debug, Clone)]
struct Kernel {
    shape: GridShape,
    w: usize,
    check_exp: i32,
    bit_exp: i32,
    window: Vec<f64>,
    scratch: Vec<f64>,
}

impl Kernel {
    fn new(params: &EnsembleParams) -> Self {
        let shape = params.shape();
        let n = shape.sections();
        Self {
            shape,
            w: params.w,
            check_exp: params.dr as i32 - 1,
            bit_exp: params.dl as i32 - 1,
            window: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn check_into(&mut self, p: &[f64], q: &mut [f64]) {
        box_sum_into(p, self.shape, self.w, Direction::Backward, &mut self.window, &mut self.scratch);
        for (qi, &s) in q.iter_mut().zip(&self.window) {
            *qi = 1.0 - (1.0 - s).powi(self.check_exp);
            debug_assert!((0.0..=1.0).contains(qi), "q out of range: {qi}");
        }
    }

    /// Writes the new `p` and returns `sum_i eps_i T_i^dl`.
    fn bit_into(&mut self, eps: &[f64], q: &[f64], p: &mut [f64]) -> f64 {
        box_sum_into(q, self.shape, self.w, Direction::Forward, &mut self.window, &mut self.scratch);
        let mut pb = 0.0;
        for ((pi, &e), &t) in p.iter_mut().zip(eps).zip(&self.window) {
            *pi = e * t.powi(self.bit_exp);
            debug_assert!((0.0..=1.0).contains(pi), "p out of range: {pi}");
            pb += *pi * t;
        }
        pb
    }
}

/// Stepping engine that reuses its buffers across iterations. Produces the
/// same values as repeated [`de_step`].
#[derive(Debug, Clone)]
pub struct Evolver {
    params: EnsembleParams,
    pattern: ErasurePattern,
    kernel: Kernel,
    eps: Vec<f64>,
    p: Vec<f64>,
    p_next: Vec<f64>,
    q: Vec<f64>,
    iter: usize,
    transmitted: usize,
}

/// Statistics of one completed round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub iter: usize,
    pub pb: f64,
    /// Max-norm of `p^(l) - p^(l-1)`.
    pub delta_max: f64,
}

impl Evolver {
    pub fn new(params: &EnsembleParams, pattern: &ErasurePattern) -> Result<Self> {
        Self::from_state(&init_state(params, pattern)?)
    }

    /// Starts from an arbitrary channel field. Entries on `domain` are forced
    /// to zero; `p^(0)` is the resulting field. States taken from such an
    /// evolver report a pattern with `base_eps = NaN`.
    pub fn from_eps_field(
        params: &EnsembleParams,
        eps: &ScalarField,
        domain: &ShorteningDomain,
    ) -> Result<Self> {
        params.validate()?;
        let shape = params.shape();
        if eps.shape() != shape {
            return Err(Error::InvalidArgument("channel field shape differs from ensemble".into()));
        }
        if eps.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("channel field entries must lie in [0, 1]".into()));
        }
        domain.validate(shape)?;
        let mut eps = eps.clone();
        for i in shape.indices().filter(|i| domain.contains(i)) {
            eps.set(&i, 0.0);
        }
        Self::from_state(&DeState {
            params: *params,
            pattern: ErasurePattern::uniform(f64::NAN, domain.clone()),
            p: eps.clone(),
            q: ScalarField::constant(shape, 1.0),
            eps,
            iter: 0,
        })
    }

    pub fn from_state(state: &DeState) -> Result<Self> {
        let shape = state.params.shape();
        let transmitted = shape.sections() - domain_size(&state.pattern.domain, shape)?;
        if transmitted == 0 {
            return Err(Error::NoTransmittedBits);
        }
        Ok(Self {
            params: state.params,
            pattern: state.pattern.clone(),
            kernel: Kernel::new(&state.params),
            eps: state.eps.values().to_vec(),
            p: state.p.values().to_vec(),
            p_next: vec![0.0; shape.sections()],
            q: state.q.values().to_vec(),
            iter: state.iter,
            transmitted,
        })
    }

    /// `P_b` from the current `q` (the uninformed `q = 1` before any round).
    pub fn pb(&mut self) -> f64 {
        let total = self.kernel.bit_into(&self.eps, &self.q, &mut self.p_next);
        total / self.transmitted as f64
    }

    pub fn step(&mut self) -> StepStats {
        self.kernel.check_into(&self.p, &mut self.q);
        let total = self.kernel.bit_into(&self.eps, &self.q, &mut self.p_next);
        let delta_max = self
            .p
            .iter()
            .zip(&self.p_next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut self.p, &mut self.p_next);
        self.iter += 1;
        StepStats {
            iter: self.iter,
            pb: total / self.transmitted as f64,
            delta_max,
        }
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p
    }

    pub fn p_field(&self) -> ScalarField {
        ScalarField::new(self.params.shape(), self.p.clone()).expect("sized from shape")
    }

    pub fn state(&self) -> DeState {
        let shape = self.params.shape();
        DeState {
            params: self.params,
            pattern: self.pattern.clone(),
            eps: ScalarField::new(shape, self.eps.clone()).expect("sized"),
            p: self.p_field(),
            q: ScalarField::new(shape, self.q.clone()).expect("sized"),
            iter: self.iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Decoded,
    Stalled,
    IterLimit,
}

impl Verdict {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Decoded => 0,
            Verdict::Stalled => 2,
            Verdict::IterLimit => 3,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Decoded => "Decoded",
            Verdict::Stalled => "Stalled",
            Verdict::IterLimit => "IterLimit",
        })
    }
}

/// Stopping rule for [`run_de`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Termination {
    pub max_iters: usize,
    /// `P_b` below this counts as decoded.
    pub tol_success: f64,
    /// Max-norm change of `p` below this counts as a stall.
    pub tol_stall: f64,
}

impl Default for Termination {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol_success: 1e-10,
            tol_stall: 1e-12,
        }
    }
}

impl Termination {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol_success > 0.0) || !(self.tol_stall > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "termination needs max_iters >= 1 and positive tolerances (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    pub verdict: Verdict,
    pub final_pb: f64,
    pub iters_used: usize,
    /// Last max-norm change of `p` (0 if no round ran).
    pub residual_delta: f64,
    pub final_p: ScalarField,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// One row per iteration, starting at iteration 0.
    pub rows: Vec<StepStats>,
    /// `p` at the requested iterations that were reached.
    pub snapshots: Vec<(usize, ScalarField)>,
}

/// Iterations `0, 1, 2, 4, 8, ...` up to `max_iter`.
pub fn geometric_schedule(max_iter: usize) -> Vec<usize> {
    std::iter::once(0)
        .chain(std::iter::successors(Some(1usize), |&x| x.checked_mul(2)))
        .take_while(|&x| x <= max_iter)
        .collect()
}

/// Runs density evolution until it decodes, stalls, or exhausts the budget.
///
/// When `snapshots` is given, the returned trace has one row per iteration
/// and a copy of `p` at each listed iteration.
pub fn run_de(
    params: &EnsembleParams,
    pattern: &ErasurePattern,
    term: &Termination,
    snapshots: Option<&[usize]>,
) -> Result<(DeOutcome, Option<Trace>)> {
    term.validate()?;
    let mut ev = Evolver::new(params, pattern)?;
    let mut trace = snapshots.map(|_| Trace::default());
    let wanted: BTreeSet<usize> = snapshots.unwrap_or(&[]).iter().copied().collect();

    let pb0 = ev.pb();
    let mut last = StepStats {
        iter: 0,
        pb: pb0,
        delta_max: 0.0,
    };
    record(&mut trace, &wanted, &ev, last);

    let verdict = if pb0 < term.tol_success {
        Verdict::Decoded
    } else {
        loop {
            if ev.iter() >= term.max_iters {
                break Verdict::IterLimit;
            }
            last = ev.step();
            record(&mut trace, &wanted, &ev, last);
            if last.pb < term.tol_success {
                break Verdict::Decoded;
            }
            if last.delta_max < term.tol_stall {
                break Verdict::Stalled;
            }
        }
    };
    let outcome = DeOutcome {
        verdict,
        final_pb: last.pb,
        iters_used: ev.iter(),
        residual_delta: last.delta_max,
        final_p: ev.p_field(),
    };
    Ok((outcome, trace))
}

fn record(trace: &mut Option<Trace>, wanted: &BTreeSet<usize>, ev: &Evolver, stats: StepStats) {
    if let Some(t) = trace {
        t.rows.push(stats);
        if wanted.contains(&stats.iter) {
            t.snapshots.push((stats.iter, ev.p_field()));
        }
    }
}
