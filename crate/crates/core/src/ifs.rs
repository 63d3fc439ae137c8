//! The four processes driven by i.i.d. maps `f_{A,B}(x) = A x + B (1 - x)`:
//!
//! * forward chain `X_n = (A_n - B_n) X_{n-1} + B_n` on `[0,1]`;
//! * backward composition `Y_n = F_1 ∘ ... ∘ F_n`, whose ranges form nested
//!   intervals shrinking to the limiting location;
//! * the gamma-side chain `X'_n = A_n X'_{n-1} + B_n V_n`, `V_n ~ Gamma(b)`;
//! * left products of the row-stochastic factors `[[A, 1-A], [B, 1-B]]`.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rngdist::{DistSpec, StreamKey};
use crate::stats::{ks_two_sample, sorted_copy};

/// Largest excursion outside `[0,1]` (or outside the parent interval) that
/// is treated as rounding and clamped.
pub const ROUNDING_GUARD: f64 = 1e-14;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: u64 = 100_000;

/// Near 0 the interval must also be this small relative to its left end.
/// Laws with a small first shape put visible mass below any fixed absolute
/// tolerance, and floating point resolves that region far more finely.
pub const NEAR_ZERO_REL: f64 = 1e-6;

#[inline]
fn resolved(width: f64, lo: f64, tol: f64) -> bool {
    width == 0.0 || (width <= tol && width <= NEAR_ZERO_REL * lo)
}

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of rounding clamps applied since process start.
pub fn clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

#[inline]
fn guard_into(v: f64, lo: f64, hi: f64) -> Result<f64> {
    if v >= lo && v <= hi {
        return Ok(v);
    }
    if v < lo && lo - v <= ROUNDING_GUARD {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        return Ok(lo);
    }
    if v > hi && v - hi <= ROUNDING_GUARD {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        return Ok(hi);
    }
    Err(Error::Excursion { value: v })
}

/// How a single pair `(A, B)` is generated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum PairLaw {
    /// `A` and `B` independent.
    Independent { a: DistSpec, b: DistSpec },
    /// Left/right moves: with probability `p` the pair is `(1 - L, 0)`,
    /// otherwise `(1, R)`, where `L = scale * left` and `R = scale * right`.
    LeftRight {
        p: f64,
        left: DistSpec,
        right: DistSpec,
        scale: f64,
    },
    /// Split at `S ~ TentPower(z)` and keep the larger side.
    TentSplit { z: f64 },
    /// Split at a uniform point, keep the larger side with probability `p`.
    UniformSplit { p: f64 },
    /// The forward description of [`PairLaw::UniformSplit`]: a fair coin
    /// picks the direction, then the particle lands uniformly in the near
    /// half (probability `p`) or the far half of the gap on that side.
    HalfMoves { p: f64 },
    /// `k` uniform points with extremes `C < D`; keep `[C, 1]`, `[0, D]` or
    /// `[C, D]` with probabilities `p`, `q`, `r`.
    OrderStats { k: u32, p: f64, q: f64, r: f64 },
    /// `(A', A' B')` with `A' ~ outer`, `B' ~ inner` independent.
    ScaledProduct { outer: DistSpec, inner: DistSpec },
}

impl PairLaw {
    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        match self {
            PairLaw::Independent { a, b } => {
                a.validate()?;
                b.validate()
            }
            PairLaw::LeftRight { p, left, right, scale } => {
                left.validate()?;
                right.validate()?;
                if !prob(*p) || !(*scale > 0.0 && *scale <= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "left/right pair law p = {p}, scale = {scale}"
                    )));
                }
                Ok(())
            }
            PairLaw::TentSplit { z } => DistSpec::tent_power(*z).map(|_| ()),
            PairLaw::UniformSplit { p } | PairLaw::HalfMoves { p } => {
                if prob(*p) {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("split probability {p}")))
                }
            }
            PairLaw::OrderStats { k, p, q, r } => {
                if *k >= 1 && prob(*p) && prob(*q) && prob(*r) && ((p + q + r) - 1.0).abs() < 1e-12 {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "order statistics k = {k}, p = {p}, q = {q}, r = {r}"
                    )))
                }
            }
            PairLaw::ScaledProduct { outer, inner } => {
                outer.validate()?;
                inner.validate()
            }
        }
    }

    #[inline]
    fn sample(&self, key: &mut StreamKey) -> (f64, f64) {
        match self {
            PairLaw::Independent { a, b } => {
                let a = a.sample(key);
                (a, b.sample(key))
            }
            PairLaw::LeftRight { p, left, right, scale } => {
                if key.uniform() < *p {
                    (1.0 - scale * left.sample(key), 0.0)
                } else {
                    (1.0, scale * right.sample(key))
                }
            }
            PairLaw::TentSplit { z } => {
                let s = DistSpec::TentPower { z: *z }.sample(key);
                if s >= 0.5 {
                    (s, 0.0)
                } else {
                    (1.0, s)
                }
            }
            PairLaw::UniformSplit { p } => {
                let u = key.uniform();
                let larger = key.uniform() < *p;
                // [0,u] is the larger side iff u > 1/2
                if (u > 0.5) == larger {
                    (u, 0.0)
                } else {
                    (1.0, u)
                }
            }
            PairLaw::HalfMoves { p } => {
                let left = key.uniform() < 0.5;
                let near = key.uniform() < *p;
                let h = 0.5 * key.uniform();
                match (left, near) {
                    (true, true) => (0.5 + h, 0.0),
                    (true, false) => (h, 0.0),
                    (false, true) => (1.0, h),
                    (false, false) => (1.0, 0.5 + h),
                }
            }
            PairLaw::OrderStats { k, p, q, .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for _ in 0..*k {
                    let u = key.uniform();
                    lo = lo.min(u);
                    hi = hi.max(u);
                }
                let v = key.uniform();
                if v < *p {
                    (1.0, lo)
                } else if v < p + q {
                    (hi, 0.0)
                } else {
                    (hi, lo)
                }
            }
            PairLaw::ScaledProduct { outer, inner } => {
                let a = outer.sample(key);
                (a, a * inner.sample(key))
            }
        }
    }
}

/// Declared structural conditions of a pair law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MuFlags {
    /// `A > B` almost surely.
    pub m1: bool,
    /// `(A, B)` has the law of `(1 - A, 1 - B)`.
    pub m2: bool,
    /// `(1 - A, 1 - B)` has the law of `(B, A)`.
    pub m3: bool,
    /// `P(|A - B| = 1) < 1`: the backward maps contract.
    pub satisfies_c1: bool,
    /// `P(A = 1) < 1`: the gamma-side chain converges.
    pub satisfies_c2: bool,
}

/// A sampler of `(A, B)` pairs on `[0,1]^2` together with its flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuSampler {
    pub law: PairLaw,
    pub flags: MuFlags,
}

impl MuSampler {
    pub fn new(law: PairLaw, flags: MuFlags) -> Result<Self> {
        law.validate()?;
        Ok(Self { law, flags })
    }

    /// The deterministic pair `(a, b)`, flags computed exactly.
    pub fn point(a: f64, b: f64) -> Result<Self> {
        let law = PairLaw::Independent {
            a: DistSpec::point_mass(a)?,
            b: DistSpec::point_mass(b)?,
        };
        let flags = MuFlags {
            m1: a > b,
            m2: a == 0.5 && b == 0.5,
            m3: a + b == 1.0,
            satisfies_c1: (a - b).abs() != 1.0,
            satisfies_c2: a != 1.0,
        };
        Self::new(law, flags)
    }

    #[inline]
    pub fn sample(&self, key: &mut StreamKey) -> (f64, f64) {
        self.law.sample(key)
    }
}

/// `a x + b (1 - x)`, kept inside `[0,1]` against rounding.
pub fn apply_f(a: f64, b: f64, x: f64) -> f64 {
    let v = a * x + b * (1.0 - x);
    debug_assert!(v > -ROUNDING_GUARD && v < 1.0 + ROUNDING_GUARD);
    if !(0.0..=1.0).contains(&v) {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    v.clamp(0.0, 1.0)
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} = {x} must lie in [0,1]")))
    }
}

/// `X_n(x0)` after `n` steps of the forward chain.
pub fn forward_run(mu: &MuSampler, x0: f64, n: u64, key: &mut StreamKey) -> Result<f64> {
    check_unit("x0", x0)?;
    let mut x = x0;
    for _ in 0..n {
        let (a, b) = mu.sample(key);
        x = guard_into(a * x + b * (1.0 - x), 0.0, 1.0)?;
    }
    Ok(x)
}

/// Composed backward map `Y_n(x) = alpha x + beta`.
///
/// `alpha` is the composed slope `Π (A_j - B_j)`; the endpoints `Y_n(0)`
/// and `Y_n(1)` are carried separately so that each interval lies inside
/// its predecessor in exact floating-point terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineState {
    pub alpha: f64,
    pub beta: f64,
    pub steps: u64,
    image_of_one: f64,
}

impl Default for AffineState {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineState {
    pub fn identity() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            steps: 0,
            image_of_one: 1.0,
        }
    }

    /// `(Y_n(0), Y_n(1))`.
    pub fn endpoints(&self) -> (f64, f64) {
        (self.beta, self.image_of_one)
    }

    /// The current nested interval `[lo, hi]`.
    pub fn interval(&self) -> (f64, f64) {
        let (y0, y1) = self.endpoints();
        (y0.min(y1), y0.max(y1))
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.interval();
        hi - lo
    }

    pub fn midpoint(&self) -> f64 {
        let (y0, y1) = self.endpoints();
        0.5 * (y0 + y1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.interval();
        (self.alpha * x + self.beta).clamp(lo, hi)
    }

    /// `Y_{n+1} = Y_n ∘ f_{a,b}`.
    pub fn compose(&self, a: f64, b: f64) -> Result<Self> {
        let (lo, hi) = self.interval();
        let span = self.image_of_one - self.beta;
        let y0 = guard_into(self.beta + span * b, lo, hi)?;
        let y1 = guard_into(self.beta + span * a, lo, hi)?;
        Ok(Self {
            alpha: self.alpha * (a - b),
            beta: y0,
            steps: self.steps + 1,
            image_of_one: y1,
        })
    }
}

/// `Y_n` after exactly `n` backward compositions.
pub fn backward_compose(mu: &MuSampler, n: u64, key: &mut StreamKey) -> Result<AffineState> {
    let mut state = AffineState::identity();
    for _ in 0..n {
        let (a, b) = mu.sample(key);
        state = state.compose(a, b)?;
    }
    Ok(state)
}

/// Iterate the backward scheme until the composed slope is at most `tol`
/// (and at most [`NEAR_ZERO_REL`] times the interval's left end);
/// the limit is read out as the midpoint of the final interval.
pub fn backward_nest(mu: &MuSampler, key: &mut StreamKey, tol: f64, max_steps: u64) -> Result<(f64, AffineState)> {
    if !mu.flags.satisfies_c1 {
        return Err(Error::Precondition(
            "backward iteration needs P(|A-B| = 1) < 1 (contraction)".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tol = {tol} must be > 0")));
    }
    let mut state = AffineState::identity();
    while !resolved(state.alpha.abs(), state.interval().0, tol) {
        if state.steps >= max_steps {
            return Err(Error::NoConvergence {
                what: "backward nested intervals",
                steps: max_steps,
            });
        }
        let (a, b) = mu.sample(key);
        state = state.compose(a, b)?;
    }
    Ok((state.midpoint(), state))
}

/// `X'_n(x0)` for the chain `X' <- A X' + B V`, `V ~ Gamma(innovation_shape)`.
pub fn gamma_forward_run(mu: &MuSampler, innovation_shape: f64, x0: f64, n: u64, key: &mut StreamKey) -> Result<f64> {
    if !mu.flags.satisfies_c2 {
        return Err(Error::Precondition("gamma-side chain needs P(A = 1) < 1".into()));
    }
    if !(innovation_shape > 0.0) || !innovation_shape.is_finite() {
        return Err(Error::Precondition(format!(
            "innovation shape {innovation_shape} must be > 0"
        )));
    }
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::Precondition(format!("x0 = {x0} must be > 0")));
    }
    let mut x = x0;
    for _ in 0..n {
        let (a, b) = mu.sample(key);
        let v = key.gamma(innovation_shape);
        x = a * x + b * v;
    }
    Ok(x)
}

/// A 2x2 row-stochastic matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StochMat2 {
    pub m: [[f64; 2]; 2],
}

impl StochMat2 {
    /// The factor `[[a, 1-a], [b, 1-b]]` representing `f_{a,b}`.
    pub fn factor(a: f64, b: f64) -> Self {
        Self {
            m: [[a, 1.0 - a], [b, 1.0 - b]],
        }
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &StochMat2) -> Self {
        let l = &self.m;
        let r = &rhs.m;
        Self {
            m: [
                [
                    l[0][0] * r[0][0] + l[0][1] * r[1][0],
                    l[0][0] * r[0][1] + l[0][1] * r[1][1],
                ],
                [
                    l[1][0] * r[0][0] + l[1][1] * r[1][0],
                    l[1][0] * r[0][1] + l[1][1] * r[1][1],
                ],
            ],
        }
    }

    /// Sup-norm distance between the two rows.
    pub fn row_gap(&self) -> f64 {
        (self.m[0][0] - self.m[1][0])
            .abs()
            .max((self.m[0][1] - self.m[1][1]).abs())
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.m
            .iter()
            .map(|row| (row[0] + row[1] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.m.iter().flatten().all(|v| (0.0..=1.0).contains(v)) && self.max_row_sum_error() <= tol
    }
}

/// Multiply fresh factors on the left, `P_n = M_n P_{n-1}`, until the two
/// rows agree within `tol`. Row `i` of `P_n` is `(Y_n(1-i), 1 - Y_n(1-i))`.
pub fn left_product_run(mu: &MuSampler, key: &mut StreamKey, tol: f64) -> Result<StochMat2> {
    left_product_run_capped(mu, key, tol, DEFAULT_MAX_STEPS)
}

pub fn left_product_run_capped(mu: &MuSampler, key: &mut StreamKey, tol: f64, max_steps: u64) -> Result<StochMat2> {
    if !mu.flags.satisfies_c1 {
        return Err(Error::Precondition(
            "left products need P(|A-B| = 1) < 1 to reach rank one".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tol = {tol} must be > 0")));
    }
    let (a, b) = mu.sample(key);
    let mut prod = StochMat2::factor(a, b);
    let mut steps = 1;
    while !resolved(prod.row_gap(), prod.m[0][0].min(prod.m[1][0]), tol) {
        if steps >= max_steps {
            return Err(Error::NoConvergence {
                what: "left matrix product",
                steps: max_steps,
            });
        }
        let (a, b) = mu.sample(key);
        prod = StochMat2::factor(a, b).mul(&prod);
        // renormalise the second column against drift
        for row in prod.m.iter_mut() {
            row[0] = row[0].clamp(0.0, 1.0);
            row[1] = 1.0 - row[0];
        }
        steps += 1;
    }
    Ok(prod)
}

/// Findings of [`check_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n_probe: u64,
    /// Fraction of probes with `A <= B`.
    pub frac_a_le_b: f64,
    /// Fraction of probes with `|A - B| = 1`.
    pub frac_abs_diff_one: f64,
    /// Fraction of probes with `A = 1`.
    pub frac_a_one: f64,
    pub violations: Vec<String>,
}

impl ConditionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Probe `mu` and report declared flags contradicted by the samples.
///
/// `m1` is falsified by a single pair with `A <= B`; `c1`/`c2` when every
/// probe sits on the excluded event. `m2`/`m3` are checked through
/// two-sample KS tests (at level 1e-6) on the marginals they constrain.
pub fn check_conditions(mu: &MuSampler, n_probe: u64, key: &mut StreamKey) -> ConditionReport {
    let n_probe = n_probe.max(1);
    let mut pairs = Vec::with_capacity(n_probe as usize);
    for _ in 0..n_probe {
        pairs.push(mu.sample(key));
    }
    let n = n_probe as f64;
    let a_le_b = pairs.iter().filter(|(a, b)| a <= b).count();
    let diff_one = pairs.iter().filter(|(a, b)| (a - b).abs() == 1.0).count();
    let a_one = pairs.iter().filter(|(a, _)| *a == 1.0).count();
    let mut violations = Vec::new();
    if pairs
        .iter()
        .any(|(a, b)| !(0.0..=1.0).contains(a) || !(0.0..=1.0).contains(b))
    {
        violations.push("pair outside [0,1]^2".to_string());
    }
    if mu.flags.m1 && a_le_b > 0 {
        violations.push(format!("m1 declared but {a_le_b} probes have A <= B"));
    }
    if mu.flags.satisfies_c1 && diff_one as u64 == n_probe {
        violations.push("c1 declared but every probe has |A - B| = 1".to_string());
    }
    if mu.flags.satisfies_c2 && a_one as u64 == n_probe {
        violations.push("c2 declared but every probe has A = 1".to_string());
    }
    if n_probe >= 20 && (mu.flags.m2 || mu.flags.m3) {
        // halves are independent, so marginal comparisons are two-sample tests
        let half = pairs.len() / 2;
        let (first, second) = pairs.split_at(half);
        let col =
            |ps: &[(f64, f64)], f: &dyn Fn(&(f64, f64)) -> f64| sorted_copy(&ps.iter().map(f).collect::<Vec<_>>());
        let mut compare = |label: &str, x: Result<Vec<f64>>, y: Result<Vec<f64>>| {
            if let (Ok(x), Ok(y)) = (x, y) {
                if let Ok(r) = ks_two_sample(&x, &y, 1e-6) {
                    if !r.pass {
                        violations.push(format!("{label}: two-sample KS D = {:.4}", r.statistic));
                    }
                }
            }
        };
        if mu.flags.m2 {
            compare(
                "m2 declared but A and 1-A differ in law",
                col(first, &|p| p.0),
                col(second, &|p| 1.0 - p.0),
            );
            compare(
                "m2 declared but B and 1-B differ in law",
                col(first, &|p| p.1),
                col(second, &|p| 1.0 - p.1),
            );
        }
        if mu.flags.m3 {
            compare(
                "m3 declared but 1-A and B differ in law",
                col(first, &|p| 1.0 - p.0),
                col(second, &|p| p.1),
            );
        }
    }
    ConditionReport {
        n_probe,
        frac_a_le_b: a_le_b as f64 / n,
        frac_abs_diff_one: diff_one as f64 / n,
        frac_a_one: a_one as f64 / n,
        violations,
    }
}

/// Splitting (`S`) versus general (`G`) first-stage intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StageKind {
    S,
    G,
}

/// Deterministic or random rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    D,
    R,
}

/// Same rule at every step (`I`) or step-dependent (`G`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    I,
    G,
}

/// Classification `<L_N, L'_{M'} | L''_{M''}>` of a nested interval scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SchemeClass {
    pub first_stage: StageKind,
    pub n_intervals: u32,
    pub stage1_rule: Rule,
    pub stage1_mode: Mode,
    pub stage2_rule: Rule,
    pub stage2_mode: Mode,
}

impl SchemeClass {
    pub fn new(first_stage: StageKind, n_intervals: u32, stage1: (Rule, Mode), stage2: (Rule, Mode)) -> Self {
        assert!(n_intervals >= 1, "a scheme chooses at least one interval");
        Self {
            first_stage,
            n_intervals,
            stage1_rule: stage1.0,
            stage1_mode: stage1.1,
            stage2_rule: stage2.0,
            stage2_mode: stage2.1,
        }
    }
}

impl fmt::Display for SchemeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{:?}{}, {:?}_{:?} | {:?}_{:?}>",
            self.first_stage, self.n_intervals, self.stage1_rule, self.stage1_mode, self.stage2_rule, self.stage2_mode
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngdist::replicate;
    use crate::stats::ks_one_sample;

    #[test]
    fn apply_f_examples() {
        for x in [0.0, 0.13, 0.5, 1.0] {
            assert_eq!(apply_f(1.0, 0.0, x), x);
        }
        assert_eq!(apply_f(0.7, 0.2, 0.0), 0.2);
        assert_eq!(apply_f(0.7, 0.2, 1.0), 0.7);
        assert!((apply_f(0.6, 0.2, 0.5) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn forward_zero_steps_is_identity() {
        let mu = MuSampler::point(0.7, 0.3).unwrap();
        let mut k = StreamKey::new(1, 0);
        assert_eq!(forward_run(&mu, 0.123, 0, &mut k).unwrap(), 0.123);
        assert!(forward_run(&mu, 1.5, 3, &mut k).is_err());
    }

    #[test]
    fn forward_deterministic_fixed_point() {
        let mu = MuSampler::point(0.7, 0.3).unwrap();
        let mut k = StreamKey::new(1, 0);
        let x = forward_run(&mu, 0.0, 200, &mut k).unwrap();
        assert!((x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn backward_deterministic_fixed_point() {
        let mu = MuSampler::point(0.7, 0.3).unwrap();
        let mut k = StreamKey::new(1, 0);
        let (limit, state) = backward_nest(&mu, &mut k, 1e-12, DEFAULT_MAX_STEPS).unwrap();
        assert!((limit - 0.5).abs() <= 0.5e-12);
        // first n with 0.4^n <= 1e-12
        let want = (1e-12f64.ln() / 0.4f64.ln()).ceil() as u64;
        assert_eq!(state.steps, want);
        assert_eq!(want, 31);
    }

    #[test]
    fn backward_identity_map_rejected() {
        let mu = MuSampler::point(1.0, 0.0).unwrap();
        assert!(!mu.flags.satisfies_c1);
        let mut k = StreamKey::new(1, 0);
        assert!(matches!(
            backward_nest(&mu, &mut k, 1e-12, 1000),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn backward_step_cap_reports_non_convergence() {
        let mu = MuSampler::point(0.999, 0.0).unwrap();
        let mut k = StreamKey::new(1, 0);
        let err = backward_nest(&mu, &mut k, 1e-12, 50).unwrap_err();
        assert!(err.is_non_convergence());
    }

    #[test]
    fn intervals_nest_exactly() {
        let mu = MuSampler::new(
            PairLaw::Independent {
                a: DistSpec::beta(0.5, 0.5).unwrap(),
                b: DistSpec::beta(0.5, 0.5).unwrap(),
            },
            MuFlags {
                satisfies_c1: true,
                satisfies_c2: true,
                ..Default::default()
            },
        )
        .unwrap();
        let key = StreamKey::experiment(3, "nest");
        for rep in 0..200 {
            let mut k = key.substream(rep);
            let mut state = AffineState::identity();
            for _ in 0..80 {
                let (a, b) = mu.sample(&mut k);
                let next = state.compose(a, b).unwrap();
                let (lo, hi) = state.interval();
                let (nlo, nhi) = next.interval();
                assert!(lo <= nlo && nhi <= hi, "[{nlo},{nhi}] not in [{lo},{hi}]");
                assert!(next.alpha.abs() <= state.alpha.abs());
                assert!(0.0 <= nlo && nhi <= 1.0);
                state = next;
            }
        }
    }

    #[test]
    fn gamma_chain_basics() {
        let mu = MuSampler::point(0.0, 1.0).unwrap();
        let mut k = StreamKey::new(2, 0);
        assert_eq!(gamma_forward_run(&mu, 2.0, 0.7, 0, &mut k).unwrap(), 0.7);
        // A = 0, B = 1: one step is a fresh Gamma(b) draw
        let key = StreamKey::experiment(2, "renewal");
        let mut xs = replicate(&key, 50_000, |mut k| {
            gamma_forward_run(&mu, 2.5, 3.0, 1, &mut k).unwrap()
        });
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let spec = DistSpec::gamma(2.5).unwrap();
        assert!(ks_one_sample(&xs, |x| spec.cdf(x), 0.001).unwrap().pass);

        let stuck = MuSampler::point(1.0, 0.5).unwrap();
        assert!(gamma_forward_run(&stuck, 1.0, 1.0, 5, &mut k).is_err());
        assert!(gamma_forward_run(&mu, 0.0, 1.0, 5, &mut k).is_err());
        assert!(gamma_forward_run(&mu, 1.0, 0.0, 5, &mut k).is_err());
    }

    #[test]
    fn matrix_product_constant_factor() {
        let mu = MuSampler::point(0.7, 0.3).unwrap();
        let mut k = StreamKey::new(4, 0);
        let p = left_product_run(&mu, &mut k, 1e-12).unwrap();
        for row in p.m {
            assert!((row[0] - 0.5).abs() < 1e-12 && (row[1] - 0.5).abs() < 1e-12);
        }
        assert!(p.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn matrix_single_factor_rows() {
        let f = StochMat2::factor(0.8, 0.25);
        assert_eq!(f.m, [[0.8, 1.0 - 0.8], [0.25, 0.75]]);
        // equal rows: the very first factor already has rank one
        let mu = MuSampler::point(0.4, 0.4).unwrap();
        let mut k = StreamKey::new(4, 0);
        let p = left_product_run(&mu, &mut k, 1e-12).unwrap();
        assert_eq!(p.m, [[0.4, 0.6], [0.4, 0.6]]);
    }

    #[test]
    fn matrix_first_column_tracks_backward_endpoints() {
        let mu = MuSampler::new(
            PairLaw::Independent {
                a: DistSpec::uniform(0.0, 1.0).unwrap(),
                b: DistSpec::uniform(0.0, 1.0).unwrap(),
            },
            MuFlags {
                satisfies_c1: true,
                satisfies_c2: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mut k1 = StreamKey::new(77, 5);
        let mut k2 = k1.clone();
        let mut state = AffineState::identity();
        let mut prod: Option<StochMat2> = None;
        for _ in 0..12 {
            let (a, b) = mu.sample(&mut k1);
            state = state.compose(a, b).unwrap();
            let (a2, b2) = mu.sample(&mut k2);
            let f = StochMat2::factor(a2, b2);
            prod = Some(match prod {
                None => f,
                Some(p) => f.mul(&p),
            });
            let p = prod.unwrap();
            let (y0, y1) = state.endpoints();
            assert!((p.m[0][0] - y1).abs() < 1e-13);
            assert!((p.m[1][0] - y0).abs() < 1e-13);
        }
    }

    #[test]
    fn conditions_flag_identity_pair() {
        let mut mu = MuSampler::point(1.0, 0.0).unwrap();
        mu.flags.satisfies_c1 = true;
        let mut k = StreamKey::new(0, 0);
        let r = check_conditions(&mu, 100, &mut k);
        assert!(!r.ok());
        assert!(r.violations.iter().any(|v| v.contains("c1")));
    }

    #[test]
    fn conditions_uniform_square() {
        let mu = MuSampler::new(
            PairLaw::Independent {
                a: DistSpec::uniform(0.0, 1.0).unwrap(),
                b: DistSpec::uniform(0.0, 1.0).unwrap(),
            },
            MuFlags {
                satisfies_c1: true,
                satisfies_c2: true,
                m2: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mut k = StreamKey::new(0, 1);
        let r = check_conditions(&mu, 10_000, &mut k);
        assert!(r.ok(), "{:?}", r.violations);
        assert!((r.frac_a_le_b - 0.5).abs() < 0.03);
    }

    #[test]
    fn conditions_catch_false_m1() {
        let mut mu = MuSampler::point(0.2, 0.6).unwrap();
        mu.flags.m1 = true;
        let mut k = StreamKey::new(0, 2);
        let r = check_conditions(&mu, 10, &mut k);
        assert!(r.violations.iter().any(|v| v.starts_with("m1")));
    }

    #[test]
    fn conditions_catch_false_m3() {
        let mu = MuSampler::new(
            PairLaw::Independent {
                a: DistSpec::beta(3.0, 1.0).unwrap(),
                b: DistSpec::beta(3.0, 1.0).unwrap(),
            },
            MuFlags {
                m3: true,
                satisfies_c1: true,
                satisfies_c2: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mut k = StreamKey::new(0, 3);
        assert!(!check_conditions(&mu, 20_000, &mut k).ok());
    }

    #[test]
    fn pair_laws_stay_in_square() {
        let laws = vec![
            PairLaw::TentSplit { z: 0.3 },
            PairLaw::UniformSplit { p: 0.2 },
            PairLaw::HalfMoves { p: 0.9 },
            PairLaw::OrderStats {
                k: 5,
                p: 0.2,
                q: 0.3,
                r: 0.5,
            },
            PairLaw::ScaledProduct {
                outer: DistSpec::beta(2.0, 1.0).unwrap(),
                inner: DistSpec::beta(1.0, 2.0).unwrap(),
            },
            PairLaw::LeftRight {
                p: 0.5,
                left: DistSpec::beta(1.0, 2.0).unwrap(),
                right: DistSpec::beta(1.0, 2.0).unwrap(),
                scale: 0.5,
            },
        ];
        let mut k = StreamKey::new(9, 9);
        for law in laws {
            for _ in 0..5000 {
                let (a, b) = law.sample(&mut k);
                assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b), "{law:?}");
            }
        }
    }

    #[test]
    fn invalid_pair_laws() {
        assert!(MuSampler::new(
            PairLaw::OrderStats {
                k: 3,
                p: 0.5,
                q: 0.4,
                r: 0.4
            },
            MuFlags::default()
        )
        .is_err());
        assert!(MuSampler::new(PairLaw::UniformSplit { p: 1.5 }, MuFlags::default()).is_err());
        assert!(MuSampler::point(1.2, 0.0).is_err());
    }

    #[test]
    fn scheme_class_display() {
        let c = SchemeClass::new(StageKind::S, 2, (Rule::R, Mode::I), (Rule::R, Mode::I));
        assert_eq!(c.to_string(), "<S2, R_I | R_I>");
    }
}
