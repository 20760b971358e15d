//! Flat `key = value` configuration text.
//!
//! ```text
//! # (3,6) chain, hyperplane-shortened
//! dl = 3
//! dr = 6
//! L = 101
//! D = 1
//! w = 4
//! domain.kind = hyperplane
//! domain.width = 4
//! ```
//!
//! Recognised ensemble keys: `dl dr L D w domain.kind domain.axis
//! domain.width domain.z domain.sections`. Other keys are carried through
//! untouched for the caller.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ensemble::{EnsembleParams, ShorteningDomain};
use crate::error::{Error, Result};
use crate::torus::GridShape;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: n + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line: n + 1,
                    msg: "empty key".into(),
                });
            }
            kv.set(key, value.trim());
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses the value under `key`, if present.
    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| Error::Config {
                    line: 0,
                    msg: format!("key `{key}`: cannot parse `{v}`: {e}"),
                })
            })
            .transpose()
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get_parsed(key)?.ok_or_else(|| Error::Config {
            line: 0,
            msg: format!("missing key `{key}`"),
        })
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl fmt::Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Parses `;`-separated coordinate tuples such as `0,1;2,-3`.
pub fn parse_sections(text: &str) -> Result<Vec<Vec<i64>>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tuple| {
            tuple
                .split(',')
                .map(|c| {
                    c.trim().parse::<i64>().map_err(|e| Error::Config {
                        line: 0,
                        msg: format!("bad coordinate `{c}` in `{tuple}`: {e}"),
                    })
                })
                .collect()
        })
        .collect()
}

pub fn format_sections(sections: &[Vec<i64>]) -> String {
    sections
        .iter()
        .map(|s| s.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn ensemble_from_keys(kv: &KeyValues) -> Result<EnsembleParams> {
    let params = EnsembleParams {
        dl: kv.require("dl")?,
        dr: kv.require("dr")?,
        len: kv.require("L")?,
        dim: kv.require("D")?,
        w: kv.require("w")?,
        bits_per_section: kv.get_parsed("M")?,
    };
    params.validate()?;
    Ok(params)
}

pub fn ensemble_to_keys(params: &EnsembleParams, kv: &mut KeyValues) {
    kv.set("dl", params.dl);
    kv.set("dr", params.dr);
    kv.set("L", params.len);
    kv.set("D", params.dim);
    kv.set("w", params.w);
    if let Some(m) = params.bits_per_section {
        kv.set("M", m);
    }
}

/// Reads `domain.*` keys. A missing `domain.kind` means no shortening.
/// Hyperplanes default to the last axis and width `w`.
pub fn domain_from_keys(kv: &KeyValues, params: &EnsembleParams) -> Result<ShorteningDomain> {
    let shape = params.shape();
    let domain = match kv.get("domain.kind").unwrap_or("empty") {
        "empty" => ShorteningDomain::Empty,
        "hyperplane" => ShorteningDomain::Hyperplane {
            axis: kv.get_parsed("domain.axis")?.unwrap_or(params.dim - 1),
            width: kv.get_parsed("domain.width")?.unwrap_or(params.w),
        },
        "hypercube" => ShorteningDomain::Hypercube {
            z: kv.require("domain.z")?,
        },
        "explicit" => {
            let raw = parse_sections(kv.get("domain.sections").unwrap_or(""))?;
            explicit_domain(shape, &raw)?
        }
        other => {
            return Err(Error::Config {
                line: 0,
                msg: format!("unknown domain.kind `{other}`"),
            })
        }
    };
    domain.validate(shape)?;
    Ok(domain)
}

fn explicit_domain(shape: GridShape, raw: &[Vec<i64>]) -> Result<ShorteningDomain> {
    for c in raw {
        if c.len() != shape.dim() {
            return Err(Error::DimensionMismatch {
                expected: shape.dim(),
                got: c.len(),
            });
        }
    }
    ShorteningDomain::explicit(shape, raw)
}

pub fn domain_to_keys(domain: &ShorteningDomain, kv: &mut KeyValues) {
    match domain {
        ShorteningDomain::Empty => kv.set("domain.kind", "empty"),
        ShorteningDomain::Hyperplane { axis, width } => {
            kv.set("domain.kind", "hyperplane");
            kv.set("domain.axis", axis);
            kv.set("domain.width", width);
        }
        ShorteningDomain::Hypercube { z } => {
            kv.set("domain.kind", "hypercube");
            kv.set("domain.z", z);
        }
        ShorteningDomain::Explicit(set) => {
            kv.set("domain.kind", "explicit");
            let raw: Vec<Vec<i64>> = set
                .iter()
                .map(|i| i.coords().iter().map(|&c| c as i64).collect())
                .collect();
            kv.set("domain.sections", format_sections(&raw));
        }
    }
}

/// Parses the compact `kind:args` form, e.g. `hyperplane:axis=1,width=4`,
/// `hypercube:z=15`, `explicit:0;1;-1` or `empty`, into `domain.*` keys.
pub fn domain_keys_from_compact(text: &str) -> Result<KeyValues> {
    let mut kv = KeyValues::new();
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    kv.set("domain.kind", kind.trim());
    match kind.trim() {
        "explicit" => kv.set("domain.sections", args.trim()),
        _ => {
            for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = part.split_once('=').ok_or_else(|| Error::Config {
                    line: 0,
                    msg: format!("expected `name=value` in domain argument `{part}`"),
                })?;
                kv.set(&format!("domain.{}", k.trim()), v.trim());
            }
        }
    }
    Ok(kv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_text() {
        let kv = KeyValues::parse("# c\ndl = 3\ndr=6\n\nL = 101 # trailing\nD = 1\nw = 4\n").unwrap();
        let p = ensemble_from_keys(&kv).unwrap();
        assert_eq!((p.dl, p.dr, p.len, p.dim, p.w), (3, 6, 101, 1, 4));
        assert!(KeyValues::parse("no equals here").is_err());
    }

    #[test]
    fn invalid_ensemble_names_constraint() {
        let kv = KeyValues::parse("dl=2\ndr=6\nL=10\nD=1\nw=2").unwrap();
        let err = ensemble_from_keys(&kv).unwrap_err().to_string();
        assert!(err.contains("dl >= 3"), "{err}");
    }

    #[test]
    fn domain_kinds() {
        let kv = KeyValues::parse("dl=3\ndr=6\nL=101\nD=2\nw=4").unwrap();
        let p = ensemble_from_keys(&kv).unwrap();
        assert_eq!(domain_from_keys(&kv, &p).unwrap(), ShorteningDomain::Empty);

        let mut hp = kv.clone();
        hp.set("domain.kind", "hyperplane");
        assert_eq!(
            domain_from_keys(&hp, &p).unwrap(),
            ShorteningDomain::Hyperplane { axis: 1, width: 4 }
        );

        let mut ex = kv.clone();
        ex.set("domain.kind", "explicit");
        ex.set("domain.sections", "0,0; 0,-1");
        match domain_from_keys(&ex, &p).unwrap() {
            ShorteningDomain::Explicit(s) => assert_eq!(s.len(), 2),
            d => panic!("{d:?}"),
        }
        ex.set("domain.sections", "0,0,0");
        assert!(domain_from_keys(&ex, &p).is_err());

        let mut bad = kv;
        bad.set("domain.kind", "torus");
        assert!(domain_from_keys(&bad, &p).is_err());
    }

    #[test]
    fn keys_round_trip_through_text() {
        let p = EnsembleParams::new(3, 6, 16, 2, 2).unwrap();
        for dom in [
            ShorteningDomain::Empty,
            ShorteningDomain::Hyperplane { axis: 0, width: 3 },
            ShorteningDomain::Hypercube { z: 5 },
            ShorteningDomain::explicit(p.shape(), &[vec![1, 2], vec![3, 4]]).unwrap(),
        ] {
            let mut kv = KeyValues::new();
            ensemble_to_keys(&p, &mut kv);
            domain_to_keys(&dom, &mut kv);
            let back = KeyValues::parse(&kv.to_string()).unwrap();
            assert_eq!(ensemble_from_keys(&back).unwrap(), p);
            assert_eq!(domain_from_keys(&back, &p).unwrap(), dom);
        }
    }

    #[test]
    fn compact_domain_form() {
        let kv = domain_keys_from_compact("hyperplane:axis=1,width=4").unwrap();
        assert_eq!(kv.get("domain.kind"), Some("hyperplane"));
        assert_eq!(kv.get("domain.width"), Some("4"));
        let kv = domain_keys_from_compact("explicit:0;1;-1").unwrap();
        assert_eq!(parse_sections(kv.get("domain.sections").unwrap()).unwrap(), vec![vec![0], vec![1], vec![-1]]);
        assert!(domain_keys_from_compact("hypercube:15").is_err());
        assert!(parse_sections("1,x").is_err());
    }
}
