//! Distributional identities checked by simulating both sides.
//!
//! When one side is a named law the check is a one-sample KS test against
//! its CDF, otherwise both sides are sampled and compared with a two-sample
//! test. Each side gets its own forked stream so the two samples are
//! independent.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{build_case, ModelCase, Params};
use crate::rngdist::{replicate, DistSpec, StreamKey};
use crate::stats::{ks_one_sample, ks_two_sample, sorted_copy, KsReport};

/// A sampler of one side of an identity.
pub type Generator = Arc<dyn Fn(&mut StreamKey) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Side {
    Sampled(Generator),
    Law(DistSpec),
}

#[derive(Clone)]
pub struct IdentityCase {
    pub name: String,
    pub params: Params,
    pub lhs: Generator,
    pub rhs: Side,
    pub anchor: String,
}

impl std::fmt::Debug for IdentityCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IdentityCase")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("anchor", &self.anchor)
            .finish_non_exhaustive()
    }
}

impl IdentityCase {
    /// `name(k=v,...)`, the label used in reports and stream derivation.
    pub fn label(&self) -> String {
        format!("{}({})", self.name, self.params)
    }
}

/// Smallest sample size accepted by [`check_identity`].
pub const MIN_SAMPLES: usize = 10_000;

/// Default number of urn draws in `id_polya_limit`.
pub const URN_DRAWS: u64 = 2_000;

pub fn check_identity(case: &IdentityCase, n: usize, alpha: f64, key: &StreamKey) -> Result<KsReport> {
    if n < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "identity checks need n >= {MIN_SAMPLES}, got {n}"
        )));
    }
    let lhs = &case.lhs;
    let left = sorted_copy(&replicate(&key.fork("lhs"), n, |mut k| lhs(&mut k)))?;
    let report = match &case.rhs {
        Side::Law(spec) => ks_one_sample(&left, |x| spec.cdf(x), alpha)?,
        Side::Sampled(rhs) => {
            let right = sorted_copy(&replicate(&key.fork("rhs"), n, |mut k| rhs(&mut k)))?;
            ks_two_sample(&left, &right, alpha)?
        }
    };
    Ok(report.labeled(case.label()))
}

/// Static description of an identity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityInfo {
    pub name: &'static str,
    pub keys: &'static [&'static str],
    pub statement: &'static str,
}

pub const IDENTITIES: &[IdentityInfo] = &[
    IdentityInfo {
        name: "id_a1prime",
        keys: &[],
        statement: "V1 =d A V1 + B V2, (V1, V2) ~ Gamma(a) x Gamma(b), for a catalog model",
    },
    IdentityInfo {
        name: "id_a1doubleprime",
        keys: &[],
        statement: "X =d A X + B (1 - X), X ~ Beta(a, b), for a catalog model",
    },
    IdentityInfo {
        name: "id_perp",
        keys: &["z", "p"],
        statement: "X =d (1 - C) X + C D, (C, D) ~ Beta(1, z) x Bernoulli(1-p), X ~ Beta((1-p)z, pz)",
    },
    IdentityInfo {
        name: "id_polya",
        keys: &["b", "w"],
        statement: "Beta(b, w) =d I X^b + (1 - I) X^w, I ~ Bernoulli(b/(b+w))",
    },
    IdentityInfo {
        name: "id_randgam",
        keys: &["y"],
        statement: "U G(y+1) =d U G(1) + G(y U1)",
    },
    IdentityInfo {
        name: "id_randgam_exp",
        keys: &[],
        statement: "U G(1) + G(U1) ~ Exp(1)",
    },
    IdentityInfo {
        name: "id_asl_full",
        keys: &[],
        statement: "U T + I (1 - T) ~ Beta(1/2, 1/2), T ~ Beta(1/2, 1/2), I ~ Bernoulli(1/2)",
    },
    IdentityInfo {
        name: "id_asl_neg",
        keys: &[],
        statement: "U T ~ Beta(1/2, 3/2), T ~ Beta(1/2, 1/2)",
    },
    IdentityInfo {
        name: "id_bga_prod",
        keys: &["a", "b", "c"],
        statement: "A B ~ Beta(a, b+c), (A, B) ~ Beta(a+b, c) x Beta(a, b)",
    },
    IdentityInfo {
        name: "id_bga_gamma",
        keys: &["a", "b"],
        statement: "X Y ~ Gamma(a), (X, Y) ~ Beta(a, b) x Gamma(a+b)",
    },
    IdentityInfo {
        name: "id_gb4",
        keys: &["w", "y"],
        statement: "A V1 + B V2 ~ Gamma(w+1), (A, B, V1, V2) ~ U[0, y/(w+y)] x Beta(w, y) x Gamma(2) x Gamma(w+y+1)",
    },
    IdentityInfo {
        name: "id_polya_limit",
        keys: &["b", "w"],
        statement: "Polya urn proportion after many draws ~ Beta(b, w)",
    },
    IdentityInfo {
        name: "id_dufresne",
        keys: &["w", "y"],
        statement: "X (V1 + V2 + V3) =d X V2 + V1, X ~ Beta(w+y, w+y), (V1, V2, V3) ~ Gamma(y) x Gamma(w) x Gamma(y)",
    },
];

fn info(name: &str) -> Result<&'static IdentityInfo> {
    IDENTITIES
        .iter()
        .find(|i| i.name == name)
        .ok_or_else(|| Error::UnknownIdentity(name.to_string()))
}

fn positive(name: &str, params: &Params, key: &str) -> Result<f64> {
    match params.get(key) {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(Error::param(name, format!("{key} > 0 (got {v})"))),
        None => Err(Error::param(name, format!("missing parameter `{key}`"))),
    }
}

fn gen<F: Fn(&mut StreamKey) -> f64 + Send + Sync + 'static>(f: F) -> Generator {
    Arc::new(f)
}

fn model_limits(name: &str, model: &ModelCase) -> Result<(f64, f64)> {
    model
        .beta_params()
        .ok_or_else(|| Error::param(name, format!("model `{}` has no predicted beta limit", model.name)))
}

/// `V1` against `A V1 + B V2` for the model's `(a, b)`.
pub fn a1prime_case(model: &ModelCase) -> Result<IdentityCase> {
    let (a, b) = model_limits("id_a1prime", model)?;
    let mu = model.mu.clone();
    Ok(IdentityCase {
        name: format!("id_a1prime[{}]", model.name),
        params: model.params.clone(),
        lhs: gen(move |k| {
            let (x, y) = mu.sample(k);
            let v1 = k.gamma(a);
            let v2 = k.gamma(b);
            x * v1 + y * v2
        }),
        rhs: Side::Law(DistSpec::gamma(a)?),
        anchor: info("id_a1prime")?.statement.to_string(),
    })
}

/// `X` against `A X + B (1 - X)` for the model's `(a, b)`.
pub fn a1doubleprime_case(model: &ModelCase) -> Result<IdentityCase> {
    let (a, b) = model_limits("id_a1doubleprime", model)?;
    let mu = model.mu.clone();
    Ok(IdentityCase {
        name: format!("id_a1doubleprime[{}]", model.name),
        params: model.params.clone(),
        lhs: gen(move |k| {
            let (s, t) = mu.sample(k);
            let x = k.beta(a, b);
            s * x + t * (1.0 - x)
        }),
        rhs: Side::Law(DistSpec::beta(a, b)?),
        anchor: info("id_a1doubleprime")?.statement.to_string(),
    })
}

/// Build an identity that does not refer to a model.
pub fn build_identity(name: &str, params: &Params) -> Result<IdentityCase> {
    let meta = info(name)?;
    for (k, _) in params.iter() {
        if !meta.keys.contains(&k) {
            return Err(Error::param(name, format!("unknown parameter `{k}`")));
        }
    }
    let anchor = meta.statement.to_string();
    let (lhs, rhs) = match name {
        "id_a1prime" | "id_a1doubleprime" => {
            return Err(Error::param(
                name,
                "needs a catalog model; use the model-based constructor",
            ));
        }
        "id_perp" => {
            let z = positive(name, params, "z")?;
            let p = params
                .get("p")
                .ok_or_else(|| Error::param(name, "missing parameter `p`"))?;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::param(name, format!("p in (0,1) (got {p})")));
            }
            let (a, b) = ((1.0 - p) * z, p * z);
            let lhs = gen(move |k| {
                let x = k.beta(a, b);
                let c = k.beta(1.0, z);
                let d = if k.uniform() < 1.0 - p { 1.0 } else { 0.0 };
                (1.0 - c) * x + c * d
            });
            (lhs, Side::Law(DistSpec::beta(a, b)?))
        }
        "id_polya" => {
            let b = positive(name, params, "b")?;
            let w = positive(name, params, "w")?;
            let lhs = gen(move |k| {
                if k.uniform() < b / (b + w) {
                    k.beta(b + 1.0, w)
                } else {
                    k.beta(b, w + 1.0)
                }
            });
            (lhs, Side::Law(DistSpec::beta(b, w)?))
        }
        "id_randgam" => {
            let y = positive(name, params, "y")?;
            let lhs = gen(move |k| k.uniform() * k.gamma(y + 1.0));
            let rhs = gen(move |k| {
                let u = k.uniform();
                let g1 = k.gamma(1.0);
                let u1 = k.uniform();
                u * g1 + k.gamma(y * u1)
            });
            (lhs, Side::Sampled(rhs))
        }
        "id_randgam_exp" => {
            let lhs = gen(|k| {
                let u = k.uniform();
                let g1 = k.gamma(1.0);
                let u1 = k.uniform();
                u * g1 + k.gamma(u1)
            });
            (lhs, Side::Law(DistSpec::gamma(1.0)?))
        }
        "id_asl_full" => {
            let lhs = gen(|k| {
                let u = k.uniform();
                let i = if k.uniform() < 0.5 { 1.0 } else { 0.0 };
                let tau = k.beta(0.5, 0.5);
                u * tau + i * (1.0 - tau)
            });
            (lhs, Side::Law(DistSpec::beta(0.5, 0.5)?))
        }
        "id_asl_neg" => {
            let lhs = gen(|k| k.uniform() * k.beta(0.5, 0.5));
            (lhs, Side::Law(DistSpec::beta(0.5, 1.5)?))
        }
        "id_bga_prod" => {
            let a = positive(name, params, "a")?;
            let b = positive(name, params, "b")?;
            let c = positive(name, params, "c")?;
            let lhs = gen(move |k| k.beta(a + b, c) * k.beta(a, b));
            (lhs, Side::Law(DistSpec::beta(a, b + c)?))
        }
        "id_bga_gamma" => {
            let a = positive(name, params, "a")?;
            let b = positive(name, params, "b")?;
            let lhs = gen(move |k| k.beta(a, b) * k.gamma(a + b));
            (lhs, Side::Law(DistSpec::gamma(a)?))
        }
        "id_gb4" => {
            let w = positive(name, params, "w")?;
            let y = positive(name, params, "y")?;
            let lhs = gen(move |k| {
                let a = y / (w + y) * k.uniform();
                let b = k.beta(w, y);
                a * k.gamma(2.0) + b * k.gamma(w + y + 1.0)
            });
            (lhs, Side::Law(DistSpec::gamma(w + 1.0)?))
        }
        "id_polya_limit" => {
            let b = positive(name, params, "b")?;
            let w = positive(name, params, "w")?;
            let lhs = gen(move |k| polya_urn(b, w, URN_DRAWS, k));
            (lhs, Side::Law(DistSpec::beta(b, w)?))
        }
        "id_dufresne" => {
            let w = positive(name, params, "w")?;
            let y = positive(name, params, "y")?;
            let lhs = gen(move |k| {
                let x = k.beta(w + y, w + y);
                let s = k.gamma(y) + k.gamma(w) + k.gamma(y);
                x * s
            });
            let rhs = gen(move |k| {
                let x = k.beta(w + y, w + y);
                let v1 = k.gamma(y);
                let v2 = k.gamma(w);
                x * v2 + v1
            });
            (lhs, Side::Sampled(rhs))
        }
        _ => unreachable!("identity without constructor"),
    };
    Ok(IdentityCase {
        name: name.to_string(),
        params: params.clone(),
        lhs,
        rhs,
        anchor,
    })
}

/// Proportion of black balls after `draws` draws from an urn that starts
/// with `b` black and `w` white balls (weights may be fractional).
pub fn polya_urn(b: f64, w: f64, draws: u64, key: &mut StreamKey) -> f64 {
    let (mut black, mut total) = (b, b + w);
    for _ in 0..draws {
        if key.uniform() * total < black {
            black += 1.0;
        }
        total += 1.0;
    }
    black / total
}

/// One entry of the default grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub identity: &'static str,
    /// Catalog model for the model-based identities.
    pub model: Option<&'static str>,
    pub params: Params,
}

impl GridPoint {
    pub fn build(&self) -> Result<IdentityCase> {
        match self.model {
            Some(model) => {
                let case = build_case(model, &self.params)?;
                match self.identity {
                    "id_a1prime" => a1prime_case(&case),
                    "id_a1doubleprime" => a1doubleprime_case(&case),
                    other => Err(Error::param(other, "does not take a model")),
                }
            }
            None => build_identity(self.identity, &self.params),
        }
    }
}

/// Version tag of [`default_grid`]; bump when the grid changes.
pub const GRID_VERSION: &str = "1";

/// The fixed parameter grid behind [`run_suite`].
pub fn default_grid() -> Vec<GridPoint> {
    let mut g = Vec::new();
    let mut push = |identity: &'static str, model: Option<&'static str>, pairs: &[(&str, f64)]| {
        g.push(GridPoint {
            identity,
            model,
            params: Params::from_pairs(pairs),
        })
    };
    push("id_a1prime", Some("m1_t1"), &[("p", 0.5)]);
    push("id_a1prime", Some("m1_t3"), &[("y", 2.0), ("z", 0.7)]);
    push("id_a1prime", Some("m2_dg"), &[("w", 2.0), ("y", 1.0), ("z", 3.0)]);
    push("id_a1prime", Some("m2_ub"), &[("p", 0.25)]);
    push("id_a1prime", Some("m2_gb4"), &[("y", 2.0)]);
    push("id_a1doubleprime", Some("m1_t2"), &[("z", 0.5), ("p", 0.8)]);
    push("id_a1doubleprime", Some("m1_t4"), &[("y", 2.0), ("z", 0.7)]);
    push("id_a1doubleprime", Some("m1_t5"), &[("z", 0.5)]);
    push("id_a1doubleprime", Some("m2_s24"), &[("w", 2.0), ("y", 1.0)]);
    for (z, p) in [(1.0, 0.5), (2.0, 0.3), (0.5, 0.8)] {
        push("id_perp", None, &[("z", z), ("p", p)]);
    }
    for (b, w) in [(1.0, 1.0), (2.0, 1.0), (0.5, 3.0)] {
        push("id_polya", None, &[("b", b), ("w", w)]);
    }
    for y in [0.5, 1.0, 2.0] {
        push("id_randgam", None, &[("y", y)]);
    }
    push("id_randgam_exp", None, &[]);
    push("id_asl_full", None, &[]);
    push("id_asl_neg", None, &[]);
    for (a, b, c) in [(1.0, 1.0, 1.0), (2.0, 0.5, 1.5), (0.7, 2.0, 3.0)] {
        push("id_bga_prod", None, &[("a", a), ("b", b), ("c", c)]);
    }
    for (a, b) in [(1.0, 1.0), (0.5, 2.0), (3.0, 1.5)] {
        push("id_bga_gamma", None, &[("a", a), ("b", b)]);
    }
    for (w, y) in [(1.0, 1.0), (1.0, 2.0), (2.5, 0.7)] {
        push("id_gb4", None, &[("w", w), ("y", y)]);
    }
    for (b, w) in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
        push("id_polya_limit", None, &[("b", b), ("w", w)]);
    }
    for (w, y) in [(1.0, 1.0), (2.0, 1.0), (0.5, 1.5)] {
        push("id_dufresne", None, &[("w", w), ("y", y)]);
    }
    g
}

/// Shell-style match with `*` (any run) and `?` (any one character).
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Run every grid point whose identity name matches `filter`, in grid
/// order. Each point uses the stream `experiment(seed, label)`, so results
/// do not depend on which other points are selected.
pub fn run_suite(filter: &str, n: usize, alpha: f64, seed: u64) -> Result<Vec<KsReport>> {
    default_grid()
        .iter()
        .filter(|g| glob_match(filter, g.identity))
        .map(|g| {
            let case = g.build()?;
            check_identity(&case, n, alpha, &StreamKey::experiment(seed, &case.label()))
        })
        .collect()
}
