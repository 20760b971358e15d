//! Canned studies: the hyperplane reduction check, burst stall profiles,
//! threshold sweeps over window width and hypercube size, and heatmap
//! sequences of burst recovery.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::de::{run_de, DeOutcome, ErasurePattern, Evolver, Termination, Verdict};
use crate::ensemble::{EnsembleParams, ShorteningDomain};
use crate::error::{Error, Result};
use crate::export::{fmt_sig, write_field_csv, write_field_pgm};
use crate::threshold::{
    coupled_bp_threshold, doubling_start, threshold_with_doubling, BisectionSpec, ThresholdResult,
};
use crate::torus::{wrap, GridShape, ScalarField, TorusIndex};

/// Runs the `D`-dimensional DE with a width-`w` hyperplane normal to `axis`
/// next to the 1-D DE with `Z = [0, w-1]`, and returns the largest
/// `|p_i - p~_{i_axis}|` seen over all sections and iterations `0..=iters`.
pub fn hyperplane_equivalence_check(
    params: &EnsembleParams,
    axis: usize,
    eps: f64,
    iters: usize,
) -> Result<f64> {
    if params.dim < 2 {
        return Err(Error::InvalidArgument("equivalence check needs D >= 2".into()));
    }
    let domain = ShorteningDomain::Hyperplane {
        axis,
        width: params.w,
    };
    let mut full = Evolver::new(params, &ErasurePattern::uniform(eps, domain))?;
    let line = params.with_dim(1)?;
    let mut reduced = Evolver::new(
        &line,
        &ErasurePattern::uniform(eps, ShorteningDomain::Hyperplane { axis: 0, width: params.w }),
    )?;
    let shape = params.shape();
    let stride = shape.stride(axis);
    let deviation = |full: &Evolver, reduced: &Evolver| -> f64 {
        let line_p = reduced.p_values();
        full.p_values()
            .iter()
            .enumerate()
            .map(|(flat, &v)| (v - line_p[(flat / stride) % shape.len()]).abs())
            .fold(0.0, f64::max)
    };
    let mut worst = deviation(&full, &reduced);
    for _ in 0..iters {
        full.step();
        reduced.step();
        worst = worst.max(deviation(&full, &reduced));
    }
    Ok(worst)
}

/// Stall profile of a 1-D run.
#[derive(Debug, Clone)]
pub struct BurstProfile {
    pub outcome: DeOutcome,
    /// `p` at each requested iteration that was reached.
    pub snapshots: Vec<(usize, ScalarField)>,
    /// Sections where the final `p` attains its maximum.
    pub residual_argmax: Vec<usize>,
}

impl BurstProfile {
    /// Every argmax section lies within torus distance `radius` of a burst.
    pub fn residual_near(&self, bursts: &[usize], radius: usize) -> bool {
        let shape = self.outcome.final_p.shape();
        !self.residual_argmax.is_empty()
            && self.residual_argmax.iter().all(|&s| {
                bursts
                    .iter()
                    .any(|&b| shape.axis_distance(s, b) <= radius)
            })
    }
}

pub fn burst_profile_1d(
    params: &EnsembleParams,
    domain: &ShorteningDomain,
    bursts: &[TorusIndex],
    eps: f64,
    snapshot_iters: &[usize],
    term: &Termination,
) -> Result<BurstProfile> {
    if params.dim != 1 {
        return Err(Error::InvalidArgument("burst profile is one-dimensional".into()));
    }
    let pattern = ErasurePattern::new(eps, bursts.iter().cloned(), domain.clone());
    let (outcome, trace) = run_de(params, &pattern, term, Some(snapshot_iters))?;
    let peak = outcome.final_p.max();
    let residual_argmax = if peak > 0.0 {
        outcome
            .final_p
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == peak)
            .map(|(i, _)| i)
            .collect()
    } else {
        Vec::new()
    };
    Ok(BurstProfile {
        outcome,
        snapshots: trace.map(|t| t.snapshots).unwrap_or_default(),
        residual_argmax,
    })
}

/// The stall-profile configuration: `(3,6)`, `L = 101`, `w = 4`,
/// `Z = {0, +-1}`, bursts at `+-31`, `eps = 0.48`.
pub struct StallFigure {
    pub params: EnsembleParams,
    pub domain: ShorteningDomain,
    pub bursts: Vec<TorusIndex>,
    pub eps: f64,
}

pub fn stall_figure() -> StallFigure {
    let params = EnsembleParams::new(3, 6, 101, 1, 4).expect("valid");
    let shape = params.shape();
    StallFigure {
        params,
        domain: ShorteningDomain::explicit(shape, &[vec![0], vec![1], vec![-1]]).expect("1-D"),
        bursts: vec![wrap(&[31], shape).expect("1-D"), wrap(&[-31], shape).expect("1-D")],
        eps: 0.48,
    }
}

/// `count` bursts spread evenly along the axis normal to the domain, each
/// also offset along the remaining axes so no two share a line.
pub fn spread_bursts(
    shape: GridShape,
    domain: &ShorteningDomain,
    count: usize,
) -> Result<Vec<TorusIndex>> {
    let normal = match domain {
        ShorteningDomain::Hyperplane { axis, .. } => *axis,
        _ => shape.dim() - 1,
    };
    let width = match domain {
        ShorteningDomain::Hyperplane { width, .. } => *width,
        ShorteningDomain::Hypercube { z } => *z,
        _ => 1,
    };
    let len = shape.len() as f64;
    let centre = (width as f64 - 1.0) / 2.0;
    let bursts = (1..=count)
        .map(|k| {
            let raw: Vec<i64> = (0..shape.dim())
                .map(|a| {
                    if a == normal {
                        (centre + k as f64 * len / (count + 1) as f64).round() as i64
                    } else {
                        ((k - 1) as f64 * len / count as f64).round() as i64
                    }
                })
                .collect();
            wrap(&raw, shape)
        })
        .collect::<Result<Vec<_>>>()?;
    for b in &bursts {
        if domain.contains(b) {
            return Err(Error::BurstInShortened(b.coords().to_vec()));
        }
    }
    Ok(bursts)
}

/// Seeded uniform burst placement. Bursts keep torus L-infinity distance at
/// least `min_separation` from each other and from every shortened section.
pub fn seeded_bursts(
    shape: GridShape,
    domain: &ShorteningDomain,
    count: usize,
    seed: u64,
    min_separation: usize,
) -> Result<Vec<TorusIndex>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<TorusIndex> = Vec::with_capacity(count);
    let radius = min_separation.saturating_sub(1) as i64;
    let ball = GridShape::new(shape.dim(), (2 * radius + 1) as usize)?;
    let near_domain = |c: &TorusIndex| -> bool {
        if matches!(domain, ShorteningDomain::Empty) {
            return false;
        }
        ball.indices().any(|off| {
            let delta: Vec<i64> = off.coords().iter().map(|&o| o as i64 - radius).collect();
            domain.contains(&c.shifted(&delta, shape).expect("same dimension"))
        })
    };
    let max_attempts = 10_000 * count.max(1);
    let mut attempts = 0;
    while chosen.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidArgument(format!(
                "could not place {count} bursts with separation {min_separation} on L={}",
                shape.len()
            )));
        }
        let raw: Vec<i64> = (0..shape.dim())
            .map(|_| rng.gen_range(0..shape.len()) as i64)
            .collect();
        let cand = wrap(&raw, shape)?;
        if chosen.iter().any(|b| shape.distance(b, &cand) < min_separation) || near_domain(&cand) {
            continue;
        }
        chosen.push(cand);
    }
    Ok(chosen)
}

/// How bursts are positioned for a sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub enum BurstPlacement {
    /// The same raw coordinates in every cell.
    Explicit(Vec<Vec<i64>>),
    /// [`spread_bursts`] with the cell's burst count.
    Spread,
    Seeded { seed: u64, min_separation: usize },
}

impl BurstPlacement {
    pub fn place(&self, shape: GridShape, domain: &ShorteningDomain, count: usize) -> Result<Vec<TorusIndex>> {
        match self {
            Self::Explicit(raw) => raw.iter().take(count).map(|c| wrap(c, shape)).collect(),
            Self::Spread => spread_bursts(shape, domain, count),
            Self::Seeded {
                seed,
                min_separation,
            } => seeded_bursts(shape, domain, count, *seed, *min_separation),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Seeded { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    WindowW,
    HypercubeZ,
    BurstCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<usize>,
    /// Degrees, dimension and (for z and burst sweeps) window width. The
    /// coupling number is chosen per cell by doubling.
    pub base: EnsembleParams,
    /// Burst count for window and hypercube sweeps.
    pub bursts: usize,
    pub placement: BurstPlacement,
    pub bisection: BisectionSpec,
    /// Upper limit on the coupling number.
    pub max_len: usize,
    /// Upper limit on `L^D`.
    pub max_sections: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|v| v[0] >= v[1]) {
            return Err(Error::InvalidArgument(
                "sweep values must be strictly increasing".into(),
            ));
        }
        self.bisection.validate()
    }

    /// Largest coupling number allowed for `dim` dimensions.
    fn len_cap(&self, dim: usize) -> usize {
        let mut cap = self.max_len;
        while cap > 1 && cap.checked_pow(dim as u32).map_or(true, |n| n > self.max_sections) {
            cap -= 1;
        }
        cap
    }
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dim: usize,
    pub w_or_z: usize,
    pub bursts: usize,
    /// `w^D`, the number of coupled neighbouring sections.
    pub taps: usize,
    pub result: std::result::Result<ThresholdResult, String>,
    pub seed: Option<u64>,
}

impl SweepRow {
    pub fn eps_star(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.eps_star)
    }
}

pub const SWEEP_CSV_HEADER: &str = "D,w_or_z,bursts,L_used,eps_star,lo,hi,evaluations,seed,w_pow_D,status";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let seed = row.seed.map(|s| s.to_string()).unwrap_or_default();
        match &row.result {
            Ok(r) => {
                let status = if r.unrecoverable {
                    "unrecoverable"
                } else if !r.converged {
                    "len-cap"
                } else {
                    "ok"
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    row.dim,
                    row.w_or_z,
                    row.bursts,
                    r.len_used.map(|l| l.to_string()).unwrap_or_default(),
                    fmt_sig(r.eps_star),
                    fmt_sig(r.lo),
                    fmt_sig(r.hi),
                    r.evaluations,
                    seed,
                    row.taps,
                    status
                )?;
            }
            Err(msg) => {
                let msg = msg.replace(',', ";");
                writeln!(out, "{},{},{},,,,,,{},{},error: {msg}", row.dim, row.w_or_z, row.bursts, seed, row.taps)?;
            }
        }
    }
    Ok(())
}

/// Threshold of one cell with the coupling number chosen by doubling.
fn doubled_cell(
    base: &EnsembleParams,
    start_len: usize,
    cap: usize,
    domain: &ShorteningDomain,
    bursts: usize,
    placement: &BurstPlacement,
    spec: &BisectionSpec,
) -> Result<ThresholdResult> {
    threshold_with_doubling(start_len, cap.max(start_len), spec.tol_eps, |len| {
        let params = base.with_len(len)?;
        let shape = params.shape();
        let placed = placement.place(shape, domain, bursts)?;
        coupled_bp_threshold(&params, domain, &placed, spec)
    })
}

/// Threshold against window width for each dimension and burst count, with
/// a width-`w` hyperplane domain normal to the last axis.
pub fn threshold_vs_window_sweep(
    spec: &SweepSpec,
    dims: &[usize],
    burst_counts: &[usize],
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let cells: Vec<(usize, usize, usize)> = dims
        .iter()
        .flat_map(|&d| {
            burst_counts
                .iter()
                .flat_map(move |&b| spec.values.iter().map(move |&w| (d, b, w)))
        })
        .collect();
    Ok(cells
        .into_iter()
        .map(|(dim, bursts, w)| window_cell(spec, dim, bursts, w))
        .collect())
}

/// A single `(D, bursts, w)` cell of [`threshold_vs_window_sweep`].
pub fn window_cell(spec: &SweepSpec, dim: usize, bursts: usize, w: usize) -> SweepRow {
    let result = (|| {
        let start = doubling_start(w, bursts);
        let base = EnsembleParams {
            dim,
            w,
            len: start,
            ..spec.base
        };
        base.validate()?;
        let domain = ShorteningDomain::Hyperplane {
            axis: dim - 1,
            width: w,
        };
        doubled_cell(&base, start, spec.len_cap(dim), &domain, bursts, &spec.placement, &spec.bisection)
    })();
    SweepRow {
        dim,
        w_or_z: w,
        bursts,
        taps: w.pow(dim as u32),
        result: result.map_err(|e| e.to_string()),
        seed: spec.placement.seed(),
    }
}

/// Threshold against the size of a corner hypercube domain.
pub fn threshold_vs_hypercube_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    Ok(spec.values.iter().map(|&z| hypercube_cell(spec, z)).collect())
}

/// Smallest `4 w (b+1) 2^k` that exceeds `2 z`, so the domain covers less
/// than half of each axis.
pub fn hypercube_start_len(w: usize, bursts: usize, z: usize) -> usize {
    let mut len = doubling_start(w, bursts);
    while len <= 2 * z {
        len *= 2;
    }
    len
}

pub fn hypercube_cell(spec: &SweepSpec, z: usize) -> SweepRow {
    let base = spec.base;
    let result = (|| {
        let start = hypercube_start_len(base.w, spec.bursts, z);
        let params = base.with_len(start)?;
        let domain = ShorteningDomain::Hypercube { z };
        doubled_cell(
            &params,
            start,
            spec.len_cap(base.dim),
            &domain,
            spec.bursts,
            &spec.placement,
            &spec.bisection,
        )
    })();
    SweepRow {
        dim: base.dim,
        w_or_z: z,
        bursts: spec.bursts,
        taps: base.w.pow(base.dim as u32),
        result: result.map_err(|e| e.to_string()),
        seed: spec.placement.seed(),
    }
}

/// True when the successfully measured thresholds never decrease.
pub fn is_non_decreasing(rows: &[SweepRow]) -> bool {
    let eps: Vec<f64> = rows.iter().filter_map(SweepRow::eps_star).collect();
    eps.len() == rows.len() && eps.windows(2).all(|e| e[1] >= e[0])
}

/// Frames of a 2-D recovery run.
#[derive(Debug, Clone)]
pub struct SnapshotRun {
    pub outcome: DeOutcome,
    pub frames: Vec<(usize, ScalarField)>,
}

/// `{0, 1, 2, 4, ..., 512}`; the final iteration is appended at run time.
pub fn default_frame_schedule() -> Vec<usize> {
    let mut s = vec![0];
    s.extend((0..10).map(|k| 1usize << k));
    s
}

pub fn burst_recovery_snapshots(
    params: &EnsembleParams,
    domain: &ShorteningDomain,
    bursts: &[TorusIndex],
    eps: f64,
    schedule: &[usize],
    term: &Termination,
) -> Result<SnapshotRun> {
    if params.dim != 2 {
        return Err(Error::InvalidArgument("heatmap sequences are two-dimensional".into()));
    }
    let pattern = ErasurePattern::new(eps, bursts.iter().cloned(), domain.clone());
    let (outcome, trace) = run_de(params, &pattern, term, Some(schedule))?;
    let mut frames = trace.map(|t| t.snapshots).unwrap_or_default();
    if frames.last().map(|(i, _)| *i) != Some(outcome.iters_used) {
        frames.push((outcome.iters_used, outcome.final_p.clone()));
    }
    Ok(SnapshotRun { outcome, frames })
}

/// Writes `snap_ℓ{iter}.pgm` (2-D only) and `snap_ℓ{iter}.csv` for each
/// frame into `dir`, returning the written paths.
pub fn write_frames(dir: &Path, frames: &[(usize, ScalarField)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (iter, field) in frames {
        if field.shape().dim() == 2 {
            let path = dir.join(format!("snap_ℓ{iter}.pgm"));
            let mut f = BufWriter::new(File::create(&path)?);
            write_field_pgm(field, &mut f)?;
            f.flush()?;
            written.push(path);
        }
        let path = dir.join(format!("snap_ℓ{iter}.csv"));
        let mut f = BufWriter::new(File::create(&path)?);
        write_field_csv(field, &mut f)?;
        f.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Largest `k` such that the first `k` seeded bursts are still decoded at
/// `eps`, searched upward from zero. Returns `None` if even the burst-free
/// run fails.
pub fn recoverable_burst_count(
    params: &EnsembleParams,
    domain: &ShorteningDomain,
    eps: f64,
    seed: u64,
    min_separation: usize,
    max_count: usize,
    term: &Termination,
) -> Result<Option<usize>> {
    let shape = params.shape();
    let mut best = None;
    for k in 0..=max_count {
        let bursts = match seeded_bursts(shape, domain, k, seed, min_separation) {
            Ok(b) => b,
            Err(_) => break,
        };
        let pattern = ErasurePattern::new(eps, bursts, domain.clone());
        let (out, _) = run_de(params, &pattern, term, None)?;
        if out.verdict != Verdict::Decoded {
            break;
        }
        best = Some(k);
    }
    Ok(best)
}

/// Burst coordinates as a set, for comparisons in tests and reports.
pub fn burst_set(bursts: &[TorusIndex]) -> BTreeSet<TorusIndex> {
    bursts.iter().cloned().collect()
}
