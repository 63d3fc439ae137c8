//! Catalog of pair laws `μ` with known beta limits.
//!
//! Every case is built by [`build_case`] from a name and named parameters,
//! e.g. `build_case("m1_t2", &Params::parse("z=2,p=0.3")?)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{Mode, MuFlags, MuSampler, PairLaw, Rule, SchemeClass, StageKind};
use crate::rngdist::DistSpec;

/// Named real parameters, ordered by key.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Self {
        Self(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    /// Parse `"k=v,k=v"`. Whitespace around tokens is ignored and an empty
    /// string gives no parameters.
    pub fn parse(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("parameter `{tok}` is not of the form key=value")))?;
            let k = k.trim();
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("parameter `{k}` has non-numeric value `{}`", v.trim())))?;
            if map.insert(k.to_string(), v).is_some() {
                return Err(Error::InvalidSpec(format!("parameter `{k}` given twice")));
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for Params {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Equivalent statements about a pair law and its parameters `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Claim {
    /// `V1 =d A V1 + B V2` with `(V1, V2) ~ Gamma(a) x Gamma(b)`.
    #[serde(rename = "A1'")]
    A1Prime,
    /// `X =d A X + B (1 - X)` with `X ~ Beta(a, b)`.
    #[serde(rename = "A1''")]
    A1DoublePrime,
    /// The backward limit is Beta(a, b).
    A2,
    /// The forward chain converges in law to Beta(a, b).
    A3,
    /// The gamma-side chain converges in law to Gamma(a).
    A4,
}

pub const ALL_CLAIMS: [Claim; 5] = [Claim::A1Prime, Claim::A1DoublePrime, Claim::A2, Claim::A3, Claim::A4];

/// A fully wired catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCase {
    pub name: String,
    pub params: Params,
    pub mu: MuSampler,
    /// `Beta(a, b)`, absent when no closed form is known.
    pub predicted_limit: Option<DistSpec>,
    /// `Gamma(a)`, present together with `predicted_limit`.
    pub gamma_limit: Option<DistSpec>,
    pub classification: Option<SchemeClass>,
    pub claims: Vec<Claim>,
    pub anchor: String,
}

impl ModelCase {
    pub fn predicted_limit(&self) -> Option<&DistSpec> {
        self.predicted_limit.as_ref()
    }

    /// `(a, b)` of the predicted Beta law.
    pub fn beta_params(&self) -> Option<(f64, f64)> {
        match self.predicted_limit {
            Some(DistSpec::Beta { a, b }) => Some((a, b)),
            _ => None,
        }
    }

    /// Shape of the gamma innovations that make `Gamma(a)` stationary.
    pub fn innovation_shape(&self) -> Option<f64> {
        self.beta_params().map(|(_, b)| b)
    }

    /// Same as [`perpetuity_form`].
    pub fn perpetuity_form(&self) -> Option<(DistSpec, DistSpec)> {
        perpetuity_form(self)
    }
}

/// Static description of a catalog entry, for listings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub keys: &'static [&'static str],
    pub limit: &'static str,
    pub classification: &'static str,
    pub anchor: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "m1_t1",
        keys: &["p"],
        limit: "Beta(1, 1)",
        classification: "<S2, D_I | R_I>",
        anchor: "left/right moves with fixed proportions L = 1-p, R = p",
    },
    CatalogEntry {
        name: "m1_t2",
        keys: &["z", "p"],
        limit: "Beta((1-p)z, pz)",
        classification: "<S2, R_I | R_I> if z = 1, else <G2, R_I | R_I>",
        anchor: "left/right moves with L, R ~ Beta(1, z)",
    },
    CatalogEntry {
        name: "m1_t3",
        keys: &["y", "z"],
        limit: "Beta(z, 1)",
        classification: "<G2, R_I | R_I>",
        anchor: "left/right moves, L ~ Beta(1, y+z), R ~ Beta(y, z+1), p = y/(y+z)",
    },
    CatalogEntry {
        name: "m1_t4",
        keys: &["y", "z"],
        limit: "Beta(1, 1)",
        classification: "<G2, R_I | R_I>",
        anchor: "left/right moves, L ~ Beta(z, y+1), R ~ Beta(y, z+1), p = y/(y+z)",
    },
    CatalogEntry {
        name: "m1_t5",
        keys: &["z"],
        limit: "Beta(z+1, z+1)",
        classification: "<G2, R_I | R_I>",
        anchor: "left/right moves into the near half, 2L, 2R ~ Beta(1, z), p = 1/2",
    },
    CatalogEntry {
        name: "cgz_tent",
        keys: &["z"],
        limit: "Beta(z+1, z+1)",
        classification: "<S2, R_I | R_I>",
        anchor: "split at a tent-power point, keep the larger side",
    },
    CatalogEntry {
        name: "cgz_classic",
        keys: &["p"],
        limit: "Beta(2, 2) if p = 1, Beta(1/2, 1/2) if p = 1/2, else unknown",
        classification: "<S2, R_I | R_I>",
        anchor: "split at a uniform point, keep the larger side with probability p",
    },
    CatalogEntry {
        name: "cgz_dual",
        keys: &["p"],
        limit: "as cgz_classic",
        classification: "<S2, R_I | R_I>",
        anchor: "forward dual of cgz_classic: fair direction, near half with probability p",
    },
    CatalogEntry {
        name: "kennedy",
        keys: &["k", "p", "q", "r"],
        limit: "Beta(k(p+r), k(q+r))",
        classification: "<S3, R_I | R_I> if k = 3, else <G3, R_I | R_I>",
        anchor: "k uniform points, keep [C,1], [0,D] or [C,D] with probabilities p, q, r",
    },
    CatalogEntry {
        name: "m2_dg",
        keys: &["w", "y", "z"],
        limit: "Beta(w+y, y+z)",
        classification: "<G1, R_I | D_I> if w = z",
        anchor: "independent A ~ Beta(w, y), B ~ Beta(y, z)",
    },
    CatalogEntry {
        name: "m2_b1",
        keys: &["w", "y"],
        limit: "Beta(w+y, y)",
        classification: "<S2, R_G | D_G>",
        anchor: "A ~ Beta(w, y), B = 1",
    },
    CatalogEntry {
        name: "m2_ub",
        keys: &["p"],
        limit: "Beta(2, 1)",
        classification: "-",
        anchor: "independent A ~ U[p, 1], B ~ Bernoulli(1-p)",
    },
    CatalogEntry {
        name: "m2_gb4",
        keys: &["y"],
        limit: "Beta(2, y+2)",
        classification: "-",
        anchor: "independent A ~ U[0, y/(y+1)], B ~ Beta(1, y)",
    },
    CatalogEntry {
        name: "m2_s24",
        keys: &["w", "y"],
        limit: "Beta(w+y, w+y)",
        classification: "<G1, R_I | D_I>",
        anchor: "(A, B) = (A', A'B'), A' ~ Beta(w+y, y), B' ~ Beta(y, w)",
    },
];

pub fn catalog_entry(name: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name)
}

struct Checker<'a> {
    case: &'a str,
    params: &'a Params,
}

impl Checker<'_> {
    fn key(&self, key: &str) -> Result<f64> {
        let v = self
            .params
            .get(key)
            .ok_or_else(|| Error::param(self.case, format!("missing parameter `{key}`")))?;
        if !v.is_finite() {
            return Err(Error::param(self.case, format!("{key} = {v} must be finite")));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.key(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::param(self.case, format!("{key} > 0 (got {v})")))
        }
    }

    fn open_unit(&self, key: &str) -> Result<f64> {
        let v = self.key(key)?;
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(Error::param(self.case, format!("{key} in (0,1) (got {v})")))
        }
    }

    fn closed_unit(&self, key: &str) -> Result<f64> {
        let v = self.key(key)?;
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(Error::param(self.case, format!("{key} in [0,1] (got {v})")))
        }
    }

    fn only(&self, keys: &[&str]) -> Result<()> {
        for (k, _) in self.params.iter() {
            if !keys.contains(&k) {
                return Err(Error::param(
                    self.case,
                    format!("unknown parameter `{k}` (expected {})", keys.join(", ")),
                ));
            }
        }
        Ok(())
    }
}

const M1: MuFlags = MuFlags {
    m1: true,
    m2: false,
    m3: false,
    satisfies_c1: true,
    satisfies_c2: true,
};

const CONVERGENT: MuFlags = MuFlags {
    m1: false,
    m2: false,
    m3: false,
    satisfies_c1: true,
    satisfies_c2: true,
};

fn class(stage: StageKind, n: u32, s1: (Rule, Mode), s2: (Rule, Mode)) -> Option<SchemeClass> {
    Some(SchemeClass::new(stage, n, s1, s2))
}

const RI: (Rule, Mode) = (Rule::R, Mode::I);
const DI: (Rule, Mode) = (Rule::D, Mode::I);
const RG: (Rule, Mode) = (Rule::R, Mode::G);
const DG: (Rule, Mode) = (Rule::D, Mode::G);

fn left_right(p: f64, left: DistSpec, right: DistSpec, scale: f64) -> Result<MuSampler> {
    MuSampler::new(PairLaw::LeftRight { p, left, right, scale }, M1)
}

/// Build the catalog case `name` with parameters `params`.
pub fn build_case(name: &str, params: &Params) -> Result<ModelCase> {
    let entry = catalog_entry(name).ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    let c = Checker { case: name, params };
    c.only(entry.keys)?;
    let (mu, limit, classification) = match name {
        "m1_t1" => {
            let p = c.open_unit("p")?;
            let mu = left_right(p, DistSpec::point_mass(1.0 - p)?, DistSpec::point_mass(p)?, 1.0)?;
            (mu, Some((1.0, 1.0)), class(StageKind::S, 2, DI, RI))
        }
        "m1_t2" => {
            let z = c.positive("z")?;
            let p = c.open_unit("p")?;
            let l = DistSpec::beta(1.0, z)?;
            let mu = left_right(p, l, l, 1.0)?;
            let stage = if z == 1.0 { StageKind::S } else { StageKind::G };
            (mu, Some(((1.0 - p) * z, p * z)), class(stage, 2, RI, RI))
        }
        "m1_t3" => {
            let y = c.positive("y")?;
            let z = c.positive("z")?;
            let mu = left_right(
                y / (y + z),
                DistSpec::beta(1.0, y + z)?,
                DistSpec::beta(y, z + 1.0)?,
                1.0,
            )?;
            (mu, Some((z, 1.0)), class(StageKind::G, 2, RI, RI))
        }
        "m1_t4" => {
            let y = c.positive("y")?;
            let z = c.positive("z")?;
            let mu = left_right(
                y / (y + z),
                DistSpec::beta(z, y + 1.0)?,
                DistSpec::beta(y, z + 1.0)?,
                1.0,
            )?;
            (mu, Some((1.0, 1.0)), class(StageKind::G, 2, RI, RI))
        }
        "m1_t5" => {
            let z = c.positive("z")?;
            let h = DistSpec::beta(1.0, z)?;
            let mu = left_right(0.5, h, h, 0.5)?;
            (mu, Some((z + 1.0, z + 1.0)), class(StageKind::G, 2, RI, RI))
        }
        "cgz_tent" => {
            let z = c.positive("z")?;
            let mu = MuSampler::new(PairLaw::TentSplit { z }, M1)?;
            (mu, Some((z + 1.0, z + 1.0)), class(StageKind::S, 2, RI, RI))
        }
        "cgz_classic" | "cgz_dual" => {
            let p = c.closed_unit("p")?;
            let law = if name == "cgz_classic" {
                PairLaw::UniformSplit { p }
            } else {
                PairLaw::HalfMoves { p }
            };
            let mu = MuSampler::new(law, M1)?;
            let limit = if p == 1.0 {
                Some((2.0, 2.0))
            } else if p == 0.5 {
                Some((0.5, 0.5))
            } else {
                None
            };
            (mu, limit, class(StageKind::S, 2, RI, RI))
        }
        "kennedy" => {
            let kv = c.key("k")?;
            if kv < 1.0 || kv.fract() != 0.0 || kv > 1e6 {
                return Err(Error::param(name, format!("k must be a positive integer (got {kv})")));
            }
            let k = kv as u32;
            let p = c.closed_unit("p")?;
            let q = c.closed_unit("q")?;
            let r = c.closed_unit("r")?;
            if ((p + q + r) - 1.0).abs() > 1e-12 {
                return Err(Error::param(name, format!("p + q + r = 1 (got {})", p + q + r)));
            }
            let (a, b) = (kv * (p + r), kv * (q + r));
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::param(
                    name,
                    format!("k(p+r) > 0 and k(q+r) > 0 (got Beta({a}, {b}), a point mass)"),
                ));
            }
            let flags = MuFlags {
                m1: k >= 2,
                ..CONVERGENT
            };
            let mu = MuSampler::new(PairLaw::OrderStats { k, p, q, r }, flags)?;
            let stage = if k == 3 { StageKind::S } else { StageKind::G };
            (mu, Some((a, b)), class(stage, 3, RI, RI))
        }
        "m2_dg" => {
            let w = c.positive("w")?;
            let y = c.positive("y")?;
            let z = c.positive("z")?;
            let flags = MuFlags {
                m2: w == y && y == z,
                m3: w == z,
                ..CONVERGENT
            };
            let mu = MuSampler::new(
                PairLaw::Independent {
                    a: DistSpec::beta(w, y)?,
                    b: DistSpec::beta(y, z)?,
                },
                flags,
            )?;
            let cls = if w == z { class(StageKind::G, 1, RI, DI) } else { None };
            (mu, Some((w + y, y + z)), cls)
        }
        "m2_b1" => {
            let w = c.positive("w")?;
            let y = c.positive("y")?;
            let mu = MuSampler::new(
                PairLaw::Independent {
                    a: DistSpec::beta(w, y)?,
                    b: DistSpec::point_mass(1.0)?,
                },
                CONVERGENT,
            )?;
            (mu, Some((w + y, y)), class(StageKind::S, 2, RG, DG))
        }
        "m2_ub" => {
            let p = c.open_unit("p")?;
            let mu = MuSampler::new(
                PairLaw::Independent {
                    a: DistSpec::uniform(p, 1.0)?,
                    b: DistSpec::bernoulli(1.0 - p)?,
                },
                CONVERGENT,
            )?;
            (mu, Some((2.0, 1.0)), None)
        }
        "m2_gb4" => {
            let y = c.positive("y")?;
            let mu = MuSampler::new(
                PairLaw::Independent {
                    a: DistSpec::uniform(0.0, y / (y + 1.0))?,
                    b: DistSpec::beta(1.0, y)?,
                },
                CONVERGENT,
            )?;
            (mu, Some((2.0, y + 2.0)), None)
        }
        "m2_s24" => {
            let w = c.positive("w")?;
            let y = c.positive("y")?;
            let mu = MuSampler::new(
                PairLaw::ScaledProduct {
                    outer: DistSpec::beta(w + y, y)?,
                    inner: DistSpec::beta(y, w)?,
                },
                M1,
            )?;
            (mu, Some((w + y, w + y)), class(StageKind::G, 1, RI, DI))
        }
        _ => unreachable!("catalog entry without constructor"),
    };
    let (predicted_limit, gamma_limit, claims) = match limit {
        Some((a, b)) => (
            Some(DistSpec::beta(a, b)?),
            Some(DistSpec::gamma(a)?),
            if mu.flags.satisfies_c1 && mu.flags.satisfies_c2 {
                ALL_CLAIMS.to_vec()
            } else {
                vec![Claim::A1Prime, Claim::A1DoublePrime]
            },
        ),
        None => (None, None, Vec::new()),
    };
    Ok(ModelCase {
        name: name.to_string(),
        params: params.clone(),
        mu,
        predicted_limit,
        gamma_limit,
        classification,
        claims,
        anchor: entry.anchor.to_string(),
    })
}

/// The law of `(C, D)` in the perpetuity form `X =d (1 - C) X + C D`,
/// where `C = 1 - A + B` and `D = B / C`.
pub fn perpetuity_form(case: &ModelCase) -> Option<(DistSpec, DistSpec)> {
    let p = |k: &str| case.params.get(k);
    match case.name.as_str() {
        "m1_t2" => Some((
            DistSpec::beta(1.0, p("z")?).ok()?,
            DistSpec::bernoulli(1.0 - p("p")?).ok()?,
        )),
        "m2_s24" => {
            let (w, y) = (p("w")?, p("y")?);
            Some((DistSpec::beta(2.0 * y, w).ok()?, DistSpec::beta(y, y).ok()?))
        }
        _ => None,
    }
}

/// One representative parameter point per catalog name.
pub fn default_params(name: &str) -> Option<Params> {
    let pairs: &[(&str, f64)] = match name {
        "m1_t1" => &[("p", 0.3)],
        "m1_t2" => &[("z", 2.0), ("p", 0.3)],
        "m1_t3" => &[("y", 2.0), ("z", 0.7)],
        "m1_t4" => &[("y", 2.0), ("z", 0.7)],
        "m1_t5" => &[("z", 2.0)],
        "cgz_tent" => &[("z", 2.0)],
        "cgz_classic" | "cgz_dual" => &[("p", 1.0)],
        "kennedy" => &[("k", 4.0), ("p", 0.5), ("q", 0.2), ("r", 0.3)],
        "m2_dg" => &[("w", 2.0), ("y", 1.0), ("z", 3.0)],
        "m2_b1" => &[("w", 1.0), ("y", 1.0)],
        "m2_ub" => &[("p", 0.25)],
        "m2_gb4" => &[("y", 2.0)],
        "m2_s24" => &[("w", 2.0), ("y", 1.0)],
        _ => return None,
    };
    Some(Params::from_pairs(pairs))
}
