//! Ensemble parameters, shortening domains and rate computations.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::torus::{box_window_sum, wrap, Direction, GridShape, ScalarField, TorusIndex};

/// Degrees and coupling geometry of a multi-dimensional coupled ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleParams {
    /// Bit-node degree.
    pub dl: u32,
    /// Check-node degree.
    pub dr: u32,
    /// Coupling number: sections per axis.
    pub len: usize,
    pub dim: usize,
    /// Coupling window width per axis.
    pub w: usize,
    /// Bits per section. Density evolution is the `M -> infinity` limit, so
    /// this only scales the node counts in [`RateCounts`].
    pub bits_per_section: Option<u64>,
}

impl EnsembleParams {
    pub fn new(dl: u32, dr: u32, len: usize, dim: usize, w: usize) -> Result<Self> {
        let p = Self {
            dl,
            dr,
            len,
            dim,
            w,
            bits_per_section: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dl < 3 {
            return Err(Error::InvalidParams(format!(
                "bit node degree dl >= 3 required (got dl={})",
                self.dl
            )));
        }
        if self.dr <= self.dl {
            return Err(Error::InvalidParams(format!(
                "check node degree dr > dl required (got dl={}, dr={})",
                self.dl, self.dr
            )));
        }
        if self.w == 0 {
            return Err(Error::InvalidParams("window width w >= 1 required".into()));
        }
        if self.len <= self.w {
            return Err(Error::InvalidParams(format!(
                "coupling number L > w required (got L={}, w={})",
                self.len, self.w
            )));
        }
        GridShape::new(self.dim, self.len)?;
        Ok(())
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.dim, self.len).expect("validated at construction")
    }

    pub fn window(&self) -> CouplingWindow {
        CouplingWindow {
            w: self.w,
            dim: self.dim,
        }
    }

    /// Same ensemble with a different coupling number.
    pub fn with_len(&self, len: usize) -> Result<Self> {
        let p = Self { len, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        let p = Self { dim, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_window(&self, w: usize) -> Result<Self> {
        let p = Self { w, ..*self };
        p.validate()?;
        Ok(p)
    }

    /// `dl / dr`, the uncoupled design rate's complement.
    pub fn degree_ratio(&self) -> f64 {
        self.dl as f64 / self.dr as f64
    }
}

/// The uniform box window: weight `1/w^D` on `[0, w-1]^D`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingWindow {
    pub w: usize,
    pub dim: usize,
}

impl CouplingWindow {
    pub fn weight(&self, offset: &[usize]) -> f64 {
        debug_assert_eq!(offset.len(), self.dim);
        if offset.iter().all(|&j| j < self.w) {
            1.0 / self.taps() as f64
        } else {
            0.0
        }
    }

    /// Number of nonzero weights, `w^D`.
    pub fn taps(&self) -> usize {
        self.w.pow(self.dim as u32)
    }
}

/// Sections whose bits are fixed to zero and never transmitted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ShorteningDomain {
    #[default]
    Empty,
    /// Slab of `width` consecutive coordinates `[0, width-1]` along `axis`,
    /// spanning every other axis.
    Hyperplane { axis: usize, width: usize },
    /// The corner hypercube `[0, z-1]^D`.
    Hypercube { z: usize },
    Explicit(BTreeSet<TorusIndex>),
}

impl ShorteningDomain {
    /// Hyperplane of the given width normal to the last axis.
    pub fn hyperplane(shape: GridShape, width: usize) -> Self {
        Self::Hyperplane {
            axis: shape.dim() - 1,
            width,
        }
    }

    /// Builds an explicit domain from raw (possibly negative) coordinates.
    pub fn explicit(shape: GridShape, raw: &[Vec<i64>]) -> Result<Self> {
        let set = raw
            .iter()
            .map(|c| wrap(c, shape))
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(Self::Explicit(set))
    }

    pub fn validate(&self, shape: GridShape) -> Result<()> {
        match self {
            Self::Empty => Ok(()),
            Self::Hyperplane { axis, width } => {
                if *axis >= shape.dim() {
                    return Err(Error::InvalidDomain(format!(
                        "hyperplane axis {axis} out of range for D={}",
                        shape.dim()
                    )));
                }
                if *width == 0 || *width >= shape.len() {
                    return Err(Error::InvalidDomain(format!(
                        "hyperplane width must satisfy 1 <= width < L (got {width}, L={})",
                        shape.len()
                    )));
                }
                Ok(())
            }
            Self::Hypercube { z } => {
                if *z == 0 || *z >= shape.len() {
                    return Err(Error::InvalidDomain(format!(
                        "hypercube size must satisfy 1 <= z < L (got {z}, L={})",
                        shape.len()
                    )));
                }
                Ok(())
            }
            Self::Explicit(set) => {
                for i in set {
                    if i.coords().len() != shape.dim()
                        || i.coords().iter().any(|&c| c >= shape.len())
                    {
                        return Err(Error::InvalidDomain(format!(
                            "section {i} lies outside the torus (D={}, L={})",
                            shape.dim(),
                            shape.len()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, index: &TorusIndex) -> bool {
        match self {
            Self::Empty => false,
            Self::Hyperplane { axis, width } => index.coords()[*axis] < *width,
            Self::Hypercube { z } => index.coords().iter().all(|&c| c < *z),
            Self::Explicit(set) => set.contains(index),
        }
    }

    /// `{0, 1}` field marking shortened sections.
    pub fn indicator(&self, shape: GridShape) -> ScalarField {
        ScalarField::from_fn(shape, |i| if self.contains(i) { 1.0 } else { 0.0 })
    }

    /// Shifts the domain by `offset`. Structured variants become `Explicit`
    /// unless the offset is zero.
    pub fn translated(&self, offset: &[i64], shape: GridShape) -> Result<Self> {
        match self {
            Self::Explicit(set) => Ok(Self::Explicit(
                set.iter()
                    .map(|i| i.shifted(offset, shape))
                    .collect::<Result<_>>()?,
            )),
            Self::Empty => Ok(Self::Empty),
            _ if offset.iter().all(|&o| o == 0) => Ok(self.clone()),
            _ => {
                let set = shape
                    .indices()
                    .filter(|i| self.contains(i))
                    .map(|i| i.shifted(offset, shape))
                    .collect::<Result<_>>()?;
                Ok(Self::Explicit(set))
            }
        }
    }
}

impl fmt::Display for ShorteningDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty"),
            Self::Hyperplane { axis, width } => write!(f, "hyperplane:axis={axis},width={width}"),
            Self::Hypercube { z } => write!(f, "hypercube:z={z}"),
            Self::Explicit(set) => {
                let parts: Vec<String> = set
                    .iter()
                    .map(|i| {
                        i.coords()
                            .iter()
                            .map(|c| c.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    })
                    .collect();
                write!(f, "explicit:{}", parts.join(";"))
            }
        }
    }
}

/// `|Z|`, the number of shortened sections.
pub fn domain_size(domain: &ShorteningDomain, shape: GridShape) -> Result<usize> {
    domain.validate(shape)?;
    Ok(match domain {
        ShorteningDomain::Empty => 0,
        ShorteningDomain::Hyperplane { width, .. } => width * shape.sections() / shape.len(),
        ShorteningDomain::Hypercube { z } => z.pow(shape.dim() as u32),
        ShorteningDomain::Explicit(set) => set.len(),
    })
}

/// Node counts from the rate argument: `V` transmitted bits and the
/// expected number `C` of check nodes touching at least one transmitted bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCounts {
    pub transmitted_bits: f64,
    pub active_checks: f64,
}

impl RateCounts {
    pub fn rate(&self) -> f64 {
        1.0 - self.active_checks / self.transmitted_bits
    }
}

/// Counts `V = M (L^D - |Z|)` and
/// `C = (dl/dr) M sum_i [1 - (sum_{j: i-j in Z} w_j)^dr]` for `M` bits per
/// section.
pub fn rate_counts(
    params: &EnsembleParams,
    domain: &ShorteningDomain,
    bits_per_section: u64,
) -> Result<RateCounts> {
    params.validate()?;
    let shape = params.shape();
    let shortened = domain_size(domain, shape)?;
    if shortened == shape.sections() {
        return Err(Error::NoTransmittedBits);
    }
    // Fraction of a check node's edges landing in Z, per check section.
    let covered = box_window_sum(&domain.indicator(shape), params.w, Direction::Backward)?;
    let dr = params.dr as i32;
    let free_checks: f64 = covered
        .values()
        .iter()
        .map(|&frac| 1.0 - frac.powi(dr))
        .sum();
    let m = bits_per_section as f64;
    Ok(RateCounts {
        transmitted_bits: m * (shape.sections() - shortened) as f64,
        active_checks: params.degree_ratio() * m * free_checks,
    })
}

/// Design rate of the shortened coupled ensemble.
pub fn design_rate(params: &EnsembleParams, domain: &ShorteningDomain) -> Result<f64> {
    rate_counts(params, domain, params.bits_per_section.unwrap_or(1)).map(|c| c.rate())
}

/// Which closed-form expression reproduced the direct rate sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormVariant {
    /// Numerator `1 - w - 2 S`, with `S = sum_{i=0}^{w} (i/w)^dr`.
    Printed,
    /// Numerator `w + 1 - 2 S`, same `S`.
    SignCorrected,
    /// Numerator `w + 1 - 2 S'`, with the sum stopping at `i = w - 1`.
    SignCorrectedShortSum,
    None,
}

impl fmt::Display for ClosedFormVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Printed => "printed",
            Self::SignCorrected => "sign-corrected",
            Self::SignCorrectedShortSum => "sign-corrected-short-sum",
            Self::None => "none",
        };
        f.write_str(s)
    }
}

/// Closed-form 1-D rate variants next to the directly summed design rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormRate {
    pub printed: f64,
    pub sign_corrected: f64,
    pub sign_corrected_short_sum: f64,
    /// Direct summation with a width-`w` hyperplane.
    pub direct: f64,
    pub matching: ClosedFormVariant,
}

/// Evaluates `(1 - dl/dr) - (dl/dr) N / (L - w)` for the numerator variants
/// and reports which one equals the direct sum (to 1e-12).
///
/// Only meaningful for `D = 1` with the width-`w` shortened slab.
pub fn closed_form_rate_1d(params: &EnsembleParams) -> Result<ClosedFormRate> {
    params.validate()?;
    if params.dim != 1 {
        return Err(Error::InvalidArgument(format!(
            "closed-form rate is one-dimensional (got D={})",
            params.dim
        )));
    }
    let ratio = params.degree_ratio();
    let w = params.w as f64;
    let tail = |upper: usize| -> f64 {
        (0..=upper)
            .map(|i| (i as f64 / w).powi(params.dr as i32))
            .sum()
    };
    let full = tail(params.w);
    let short = tail(params.w - 1);
    let denom = (params.len - params.w) as f64;
    let eval = |numerator: f64| (1.0 - ratio) - ratio * numerator / denom;

    let printed = eval(1.0 - w - 2.0 * full);
    let sign_corrected = eval(w + 1.0 - 2.0 * full);
    let sign_corrected_short_sum = eval(w + 1.0 - 2.0 * short);
    let direct = design_rate(params, &ShorteningDomain::Hyperplane { axis: 0, width: params.w })?;

    let matching = [
        (ClosedFormVariant::Printed, printed),
        (ClosedFormVariant::SignCorrected, sign_corrected),
        (ClosedFormVariant::SignCorrectedShortSum, sign_corrected_short_sum),
    ]
    .into_iter()
    .find(|(_, v)| (v - direct).abs() < 1e-12)
    .map_or(ClosedFormVariant::None, |(k, _)| k);

    Ok(ClosedFormRate {
        printed,
        sign_corrected,
        sign_corrected_short_sum,
        direct,
        matching,
    })
}

/// Lower bound `1 - (dl/dr) L^D / (L^D - z^D)` on the rate of the
/// hypercube-shortened ensemble, from counting every check node as active.
pub fn hypercube_rate_bound(params: &EnsembleParams, z: usize) -> Result<f64> {
    params.validate()?;
    if z >= params.len {
        return Err(Error::InvalidDomain(format!(
            "hypercube size must satisfy z < L (got z={z}, L={})",
            params.len
        )));
    }
    let sections = params.shape().sections() as f64;
    let shortened = (z as f64).powi(params.dim as i32);
    Ok(1.0 - params.degree_ratio() * sections / (sections - shortened))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: usize, d: usize, w: usize) -> EnsembleParams {
        EnsembleParams::new(3, 6, l, d, w).unwrap()
    }

    /// Direct transcription of the rate sum over all sections and offsets.
    fn brute_force_rate(params: &EnsembleParams, domain: &ShorteningDomain) -> f64 {
        let shape = params.shape();
        let window = params.window();
        let mut total = 0.0;
        for i in shape.indices() {
            let mut frac = 0.0;
            for j in GridShape::new(params.dim, params.w).unwrap().indices() {
                let raw: Vec<i64> = i
                    .coords()
                    .iter()
                    .zip(j.coords())
                    .map(|(&a, &b)| a as i64 - b as i64)
                    .collect();
                if domain.contains(&wrap(&raw, shape).unwrap()) {
                    frac += window.weight(j.coords());
                }
            }
            total += 1.0 - frac.powi(params.dr as i32);
        }
        let n = (shape.sections() - domain_size(domain, shape).unwrap()) as f64;
        1.0 - params.degree_ratio() * total / n
    }

    #[test]
    fn rejects_definition_violations() {
        let err = EnsembleParams::new(2, 6, 10, 1, 2).unwrap_err();
        assert!(err.to_string().contains("bit node degree dl >= 3"));
        assert!(EnsembleParams::new(3, 3, 10, 1, 2).is_err());
        assert!(EnsembleParams::new(3, 6, 4, 1, 4).is_err());
    }

    #[test]
    fn domain_sizes() {
        let s = GridShape::new(2, 101).unwrap();
        let hp = ShorteningDomain::Hyperplane { axis: 1, width: 4 };
        assert_eq!(domain_size(&hp, s).unwrap(), 404);
        assert_eq!(domain_size(&ShorteningDomain::Hypercube { z: 15 }, s).unwrap(), 225);
        assert_eq!(domain_size(&ShorteningDomain::Empty, s).unwrap(), 0);
        let bad = ShorteningDomain::Explicit([TorusIndex::from_coords(vec![0, 200])].into());
        assert!(domain_size(&bad, s).is_err());
    }

    #[test]
    fn window_weights_sum_to_one() {
        for (w, d) in [(1, 1), (4, 1), (2, 2), (3, 3)] {
            let win = CouplingWindow { w, dim: d };
            let total: f64 = GridShape::new(d, w + 1)
                .unwrap()
                .indices()
                .map(|j| win.weight(j.coords()))
                .sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_domain_rate_is_uncoupled_rate() {
        for (dl, dr) in [(3, 6), (3, 9), (4, 8)] {
            let params = EnsembleParams::new(dl, dr, 9, 2, 3).unwrap();
            let r = design_rate(&params, &ShorteningDomain::Empty).unwrap();
            assert_eq!(r, 1.0 - dl as f64 / dr as f64);
        }
    }

    #[test]
    fn rate_matches_brute_force_sum() {
        let params = p(101, 1, 4);
        let hp = ShorteningDomain::Hyperplane { axis: 0, width: 4 };
        let oracle = brute_force_rate(&params, &hp);
        assert!((design_rate(&params, &hp).unwrap() - oracle).abs() < 1e-13);
        // Frozen from the brute-force sum: 1 - 0.5 * (101 - (2*S - 1)) / 97,
        // S = sum_{k=0}^{4} (k/4)^6.
        assert!((oracle - 0.4865345119201031).abs() < 1e-12, "{oracle}");
    }

    #[test]
    fn rate_independent_of_bits_per_section() {
        let params = p(12, 2, 3);
        let dom = ShorteningDomain::Hypercube { z: 4 };
        let rates: Vec<f64> = [1, 7, 1000]
            .iter()
            .map(|&m| rate_counts(&params, &dom, m).unwrap().rate())
            .collect();
        assert!(rates.windows(2).all(|r| (r[0] - r[1]).abs() < 1e-15));
    }

    #[test]
    fn all_shortened_is_an_error() {
        let params = p(4, 1, 2);
        let all = ShorteningDomain::explicit(params.shape(), &[vec![0], vec![1], vec![2], vec![3]])
            .unwrap();
        assert!(matches!(design_rate(&params, &all), Err(Error::NoTransmittedBits)));
    }

    #[test]
    fn hyperplane_axis_invariance() {
        let params = p(8, 3, 2);
        let rates: Vec<f64> = (0..3)
            .map(|axis| design_rate(&params, &ShorteningDomain::Hyperplane { axis, width: 2 }).unwrap())
            .collect();
        assert!((rates[0] - rates[1]).abs() < 1e-13 && (rates[1] - rates[2]).abs() < 1e-13);
    }

    #[test]
    fn closed_form_variants() {
        let cf = closed_form_rate_1d(&p(101, 1, 4)).unwrap();
        assert_eq!(cf.matching, ClosedFormVariant::SignCorrected);
        assert!(cf.printed > 0.5, "printed form overshoots the uncoupled rate");
        assert!((cf.sign_corrected - cf.direct).abs() < 1e-12);
        let far = closed_form_rate_1d(&p(1_000_000, 1, 4)).unwrap();
        assert!((far.printed - 0.5).abs() < 1e-5 && (far.sign_corrected - 0.5).abs() < 1e-5);
    }

    #[test]
    fn hypercube_bound_examples() {
        let b = hypercube_rate_bound(&p(10, 2, 2), 2).unwrap();
        assert!((b - (1.0 - 0.5 * 100.0 / 96.0)).abs() < 1e-15);
        assert_eq!(hypercube_rate_bound(&p(10, 2, 2), 0).unwrap(), 0.5);
        assert!(hypercube_rate_bound(&p(10, 2, 2), 10).is_err());
        let params = p(101, 2, 2);
        let r = design_rate(&params, &ShorteningDomain::Hypercube { z: 15 }).unwrap();
        assert!(r >= hypercube_rate_bound(&params, 15).unwrap());
    }

    #[test]
    fn rate_non_increasing_in_hypercube_size() {
        let params = p(16, 2, 2);
        let rates: Vec<f64> = (1..12)
            .map(|z| design_rate(&params, &ShorteningDomain::Hypercube { z }).unwrap())
            .collect();
        assert!(rates.windows(2).all(|r| r[1] <= r[0] + 1e-15), "{rates:?}");
    }
}
