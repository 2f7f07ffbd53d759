//! Admissibility of the index families attached to the two existence results,
//! and the two embedding lemmas between the force spaces.
//!
//! Arithmetic is exact whenever every input is a rational (decimal literals
//! count as rationals). As soon as one operand is irrational or an exact
//! operation would overflow, evaluation falls back to `f64` and comparisons use
//! a slack tolerance of [`FLOAT_SLACK`].

use std::cmp::Ordering;
use std::fmt;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for strict/non-strict comparisons carried out in floating point.
pub const FLOAT_SLACK: f64 = 1e-12;

/// A real number that stays an exact rational as long as possible.
#[derive(Clone, Copy, Debug)]
pub enum Number {
    Exact(Rational64),
    Float(f64),
}

impl Number {
    pub fn int(n: i64) -> Self {
        Number::Exact(Rational64::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Number::Exact(Rational64::new(num, den))
    }

    /// Interprets `x` through its shortest decimal representation, so `2.9`
    /// becomes exactly `29/10`.
    pub fn from_f64(x: f64) -> Self {
        if !x.is_finite() {
            return Number::Float(x);
        }
        parse_decimal(&format!("{x}")).unwrap_or(Number::Float(x))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Number::Float(x) => x,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Number::Exact(_))
    }

    fn combine(
        self,
        other: Number,
        exact: impl Fn(&Rational64, &Rational64) -> Option<Rational64>,
        float: impl Fn(f64, f64) -> f64,
    ) -> Number {
        if let (Number::Exact(a), Number::Exact(b)) = (self, other) {
            if let Some(r) = exact(&a, &b) {
                return Number::Exact(r);
            }
        }
        Number::Float(float(self.to_f64(), other.to_f64()))
    }

    pub fn add(self, o: Number) -> Number {
        self.combine(o, |a, b| a.checked_add(b), |a, b| a + b)
    }

    pub fn sub(self, o: Number) -> Number {
        self.combine(o, |a, b| a.checked_sub(b), |a, b| a - b)
    }

    pub fn mul(self, o: Number) -> Number {
        self.combine(o, |a, b| a.checked_mul(b), |a, b| a * b)
    }

    pub fn div(self, o: Number) -> Number {
        self.combine(
            o,
            |a, b| if b.is_zero() { None } else { a.checked_div(b) },
            |a, b| a / b,
        )
    }

    /// `other - self` as a float, the signed room left in `self < other`.
    pub fn slack_to(self, other: Number) -> f64 {
        other.sub(self).to_f64()
    }

    fn cmp_with(self, other: Number) -> Option<Ordering> {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Some(a.cmp(&b)),
            _ => None,
        }
    }

    /// Strict `self < other`; float comparisons need more than [`FLOAT_SLACK`] of room.
    pub fn lt(self, other: Number) -> bool {
        match self.cmp_with(other) {
            Some(o) => o == Ordering::Less,
            None => self.slack_to(other) > FLOAT_SLACK,
        }
    }

    pub fn le(self, other: Number) -> bool {
        match self.cmp_with(other) {
            Some(o) => o != Ordering::Greater,
            None => self.slack_to(other) >= -FLOAT_SLACK,
        }
    }

    pub fn eq_num(self, other: Number) -> bool {
        match self.cmp_with(other) {
            Some(o) => o == Ordering::Equal,
            None => self.slack_to(other).abs() <= FLOAT_SLACK,
        }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.eq_num(*other)
    }
}

impl From<i64> for Number {
    fn from(n: i64) -> Self {
        Number::int(n)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::from_f64(x)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Number::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Number::Float(x) => write!(f, "{x}"),
        }
    }
}

/// Parses `"29/10"`, `"2.9"`, `"-3"` or `"1e-3"` style strings.
pub fn parse_number(s: &str) -> Option<Number> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Number::ratio(n, d));
    }
    if let Some(n) = parse_decimal(s) {
        return Some(n);
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Number::from_f64)
}

fn parse_decimal(s: &str) -> Option<Number> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('0');
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let denom = 10i64.checked_pow(frac_part.len() as u32)?;
    let r = Rational64::new(if neg { -numer } else { numer }, denom);
    Some(Number::Exact(r))
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) if *r.denom() == 1 => s.serialize_i64(*r.numer()),
            Number::Exact(_) => s.serialize_str(&self.to_string()),
            Number::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Number::int(n)),
            Raw::Float(x) => Ok(Number::from_f64(x)),
            Raw::Text(t) => parse_number(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("not a number: {t}"))),
        }
    }
}

/// Integrability exponent that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(Number),
    Infinity,
}

impl Exponent {
    pub fn to_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p.to_f64(),
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `d / p`, zero for `p = ∞`.
    fn dim_over(self, d: u32) -> Number {
        match self {
            Exponent::Finite(p) => Number::int(d as i64).div(p),
            Exponent::Infinity => Number::int(0),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => p.serialize(s),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(Number),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(Exponent::Finite(n)),
            Raw::Text(t) if matches!(t.trim(), "inf" | "infinity" | "∞") => Ok(Exponent::Infinity),
            Raw::Text(t) => parse_number(&t)
                .map(Exponent::Finite)
                .ok_or_else(|| serde::de::Error::custom(format!("not an exponent: {t}"))),
        }
    }
}

/// Fractional order `α ∈ (1, 2)` and spatial dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: Number,
    pub d: u32,
}

impl ModelParams {
    pub fn new(alpha: impl Into<Number>, d: u32) -> Result<Self> {
        let alpha = alpha.into();
        if !(Number::int(1).lt(alpha) && alpha.lt(Number::int(2))) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (1, 2)")));
        }
        if d < 1 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        Ok(ModelParams { alpha, d })
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    fn dim(&self) -> Number {
        Number::int(self.d as i64)
    }

    /// Second Morrey index of the resolution space, `(d+α)/(α-1)`.
    pub fn q1(&self) -> Number {
        self.dim().add(self.alpha).div(self.alpha.sub(Number::int(1)))
    }

    /// Velocity/initial-data scaling exponent `α-1`.
    pub fn velocity_exponent(&self) -> Number {
        self.alpha.sub(Number::int(1))
    }

    /// Force scaling exponent `2α-1`.
    pub fn force_exponent(&self) -> Number {
        self.alpha.mul(Number::int(2)).sub(Number::int(1))
    }
}

/// One range condition together with its signed slack.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    /// Positive when satisfied with room to spare; zero on a boundary.
    pub slack: f64,
    pub exact: bool,
}

impl Condition {
    fn strict(name: impl Into<String>, lhs: Number, rhs: Number) -> Self {
        Condition {
            name: name.into(),
            holds: lhs.lt(rhs),
            slack: lhs.slack_to(rhs),
            exact: lhs.is_exact() && rhs.is_exact(),
        }
    }

    fn weak(name: impl Into<String>, lhs: Number, rhs: Number) -> Self {
        Condition {
            name: name.into(),
            holds: lhs.le(rhs),
            slack: lhs.slack_to(rhs),
            exact: lhs.is_exact() && rhs.is_exact(),
        }
    }

    fn equal(name: impl Into<String>, lhs: Number, rhs: Number) -> Self {
        Condition {
            name: name.into(),
            holds: lhs.eq_num(rhs),
            slack: -lhs.slack_to(rhs).abs(),
            exact: lhs.is_exact() && rhs.is_exact(),
        }
    }

    fn flag(name: impl Into<String>, holds: bool) -> Self {
        Condition { name: name.into(), holds, slack: if holds { 1.0 } else { -1.0 }, exact: true }
    }

    fn describe(&self) -> String {
        format!("{} (slack {:e})", self.name, self.slack)
    }
}

fn dimension_conditions(params: &ModelParams, warnings: &mut Vec<String>) -> Condition {
    if params.d == 2 {
        warnings.push("d = 2 is marginal: the results are stated for d >= 3".into());
    }
    Condition::flag("d >= 2", params.d >= 2)
}

/// Index family of the first existence result: force in `F^{-β,p0}_ρ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm1Indices {
    pub params: ModelParams,
    pub p0: Exponent,
    pub beta: Number,
    /// `ρ = 2 - (β + d/p0 + 1)/α`.
    pub rho: Number,
    pub conditions: Vec<Condition>,
    pub warnings: Vec<String>,
}

impl Thm1Indices {
    pub fn admissible(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> Vec<String> {
        self.conditions.iter().filter(|c| !c.holds).map(Condition::describe).collect()
    }

    /// Net exponent of `λ` picked up by the `F` norm under the force scaling. Zero.
    pub fn scaling_exponent(&self) -> Number {
        let a = self.params.alpha;
        self.params
            .force_exponent()
            .sub(self.beta)
            .sub(self.p0.dim_over(self.params.d))
            .sub(a.mul(self.rho))
    }
}

/// Index family of the second existence result: force in `Ẇ^{-γ,𝔭,𝔮}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm2Indices {
    pub params: ModelParams,
    pub p1: Number,
    pub gamma: Number,
    /// `𝔭 = (α-1)p1/(2α-1-γ)`.
    pub frak_p: Number,
    /// `𝔮 = (d+α)/(2α-1-γ)`.
    pub frak_q: Number,
    /// `(d+α)/(α-1)`.
    pub q1: Number,
    pub conditions: Vec<Condition>,
    pub warnings: Vec<String>,
}

impl Thm2Indices {
    pub fn admissible(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> Vec<String> {
        self.conditions.iter().filter(|c| !c.holds).map(Condition::describe).collect()
    }

    /// `(2α-1) - γ - (d+α)/𝔮`, the net scaling exponent of the `Ẇ` norm. Zero.
    pub fn scaling_exponent(&self) -> Number {
        let p = &self.params;
        p.force_exponent().sub(self.gamma).sub(p.dim().add(p.alpha).div(self.frak_q))
    }
}

/// Evaluates every condition without rejecting anything.
pub fn evaluate_thm1_indices(params: ModelParams, p0: Exponent, beta: Number) -> Thm1Indices {
    let mut warnings = Vec::new();
    let a = params.alpha;
    let one = Number::int(1);
    let d_over_p0 = p0.dim_over(params.d);
    let rho = Number::int(2).sub(beta.add(d_over_p0).add(one).div(a));

    let mut conditions = vec![dimension_conditions(&params, &mut warnings)];
    if let Exponent::Finite(p) = p0 {
        conditions.push(Condition::strict("d/alpha < p0", params.dim().div(a), p));
    }
    let upper = a.sub(d_over_p0);
    let lower = upper.sub(one);
    conditions.push(Condition::strict("alpha - d/p0 - 1 < beta", lower, beta));
    conditions.push(Condition::strict("beta < alpha - d/p0", beta, upper));
    conditions.push(Condition::strict("0 < beta", Number::int(0), beta));

    Thm1Indices { params, p0, beta, rho, conditions, warnings }
}

/// Derives `ρ` and rejects any index triple outside the admissible open ranges.
pub fn derive_thm1_indices(params: ModelParams, p0: Exponent, beta: Number) -> Result<Thm1Indices> {
    let idx = evaluate_thm1_indices(params, p0, beta);
    if idx.admissible() {
        Ok(idx)
    } else {
        Err(Error::Inadmissible { violations: idx.violations() })
    }
}

pub fn evaluate_thm2_indices(params: ModelParams, p1: Number, gamma: Number) -> Thm2Indices {
    let mut warnings = Vec::new();
    let a = params.alpha;
    let one = Number::int(1);
    let am1 = a.sub(one);
    let denom = params.force_exponent().sub(gamma);
    let frak_p = am1.mul(p1).div(denom);
    let frak_q = params.dim().add(a).div(denom);

    let two = Number::int(2);
    if p1.eq_num(two) {
        warnings.push(
            "p1 = 2: rejected under the strict lower bound, although the remark after the result allows 2 <= p1"
                .into(),
        );
    }
    let conditions = vec![
        dimension_conditions(&params, &mut warnings),
        Condition::strict("2 < p1", two, p1),
        Condition::strict("p1 < alpha/(alpha-1)", p1, a.div(am1)),
        Condition::strict("2alpha - 1 - (alpha-1)p1 < gamma", params.force_exponent().sub(am1.mul(p1)), gamma),
        Condition::strict("gamma < alpha", gamma, a),
        Condition::strict("0 < gamma", Number::int(0), gamma),
        Condition::strict("1 < frak_p", one, frak_p),
    ];
    Thm2Indices { params, p1, gamma, frak_p, frak_q, q1: params.q1(), conditions, warnings }
}

pub fn derive_thm2_indices(params: ModelParams, p1: Number, gamma: Number) -> Result<Thm2Indices> {
    let idx = evaluate_thm2_indices(params, p1, gamma);
    if idx.admissible() {
        Ok(idx)
    } else {
        Err(Error::Inadmissible { violations: idx.violations() })
    }
}

/// Outcome of an embedding check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingVerdict {
    pub holds: bool,
    pub conditions: Vec<Condition>,
}

impl EmbeddingVerdict {
    fn from_conditions(conditions: Vec<Condition>) -> Self {
        EmbeddingVerdict { holds: conditions.iter().all(|c| c.holds), conditions }
    }

    pub fn violated(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.holds).collect()
    }
}

fn require_same_params(a: &ModelParams, b: &ModelParams) -> Result<()> {
    if a.d != b.d || !a.alpha.eq_num(b.alpha) {
        return Err(Error::InvalidParams("index bundles refer to different (alpha, d)".into()));
    }
    Ok(())
}

/// `F^{-β,p0}_ρ ⊂ Ẇ^{-γ,𝔭,𝔮}` holds when `ρ𝔭 < 1`, `𝔭 ≤ p0` and `β = γ`.
pub fn check_embedding_f_to_w(t1: &Thm1Indices, t2: &Thm2Indices) -> Result<EmbeddingVerdict> {
    require_same_params(&t1.params, &t2.params)?;
    if !t1.admissible() || !t2.admissible() {
        let mut v = t1.violations();
        v.extend(t2.violations());
        return Err(Error::Inadmissible { violations: v });
    }
    Ok(embedding_f_to_w_raw(t1.rho, t2.frak_p, t1.p0, t1.beta, t2.gamma))
}

/// The three conditions of the `F → Ẇ` embedding on raw values.
pub fn embedding_f_to_w_raw(
    rho: Number,
    frak_p: Number,
    p0: Exponent,
    beta: Number,
    gamma: Number,
) -> EmbeddingVerdict {
    let mut conditions = vec![Condition::strict("rho * frak_p < 1", rho.mul(frak_p), Number::int(1))];
    conditions.push(match p0 {
        Exponent::Finite(p) => Condition::weak("frak_p <= p0", frak_p, p),
        Exponent::Infinity => Condition::flag("frak_p <= p0", true),
    });
    conditions.push(Condition::equal("beta = gamma", beta, gamma));
    EmbeddingVerdict::from_conditions(conditions)
}

/// `Ẇ^{-γ,𝔭,𝔮} ⊂ V_α^{-1}` holds for `γ = 1`, `𝔭 = p1/2`, `𝔮 = (d+α)/(2α-2)`, `d ≥ 2`.
pub fn check_embedding_w_to_vinv(t2: &Thm2Indices) -> Result<EmbeddingVerdict> {
    if !t2.admissible() {
        return Err(Error::Inadmissible { violations: t2.violations() });
    }
    let p = &t2.params;
    let two = Number::int(2);
    let target_q = p.dim().add(p.alpha).div(p.alpha.mul(two).sub(two));
    Ok(EmbeddingVerdict::from_conditions(vec![
        Condition::equal("gamma = 1", t2.gamma, Number::int(1)),
        Condition::equal("frak_p = p1/2", t2.frak_p, t2.p1.div(two)),
        Condition::equal("frak_q = (d+alpha)/(2alpha-2)", t2.frak_q, target_q),
        Condition::flag("d >= 2", p.d >= 2),
    ]))
}
