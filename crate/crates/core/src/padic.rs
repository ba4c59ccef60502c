//! Exact p-adic balls, compact open sets and Haar measure.
//!
//! A [`Ball`] is stored as a canonical base-`p` digit sequence for its center,
//! reduced modulo `p^k` where `p^{-k}` is the radius. Distances between balls
//! are carried as integer exponents: `dist = p^{-e}`. Nothing in this module
//! touches floating point except [`PadicAbs::value`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Upper bound on the number of balls a single partition may produce.
pub const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PadicError {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("zero has infinite valuation")]
    InfiniteValuation,
    #[error("center {0} has a denominator that is not a power of {1}")]
    NotPadicCenter(String, u32),
    #[error("mismatched primes {0} and {1}")]
    PrimeMismatch(u32, u32),
    #[error("sets overlap")]
    Overlap,
    #[error("level {level} is below radius exponent {radius_exp}")]
    LevelTooSmall { level: i32, radius_exp: i32 },
    #[error("partition would produce more than {MAX_CELLS} balls")]
    TooManyCells,
    #[error("empty compact open set")]
    Empty,
    #[error("invalid digit string {0:?}")]
    BadDigits(String),
    #[error("digit strings are only defined for p <= 36, got {0}")]
    PrimeTooLarge(u32),
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn check_prime(p: u32) -> Result<(), PadicError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(PadicError::NotPrime(p))
    }
}

/// `|x|_p = p^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadicAbs {
    pub exponent: i32,
    pub value: f64,
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(x: &BigRational, p: u32) -> Result<i32, PadicError> {
    check_prime(p)?;
    if x.is_zero() {
        return Err(PadicError::InfiniteValuation);
    }
    let pb = BigInt::from(p);
    let count = |n: &BigInt| {
        let mut n = n.abs();
        let mut v = 0i32;
        while (&n % &pb).is_zero() {
            n /= &pb;
            v += 1;
        }
        v
    };
    Ok(count(x.numer()) - count(x.denom()))
}

pub fn padic_abs(x: &BigRational, p: u32) -> Result<PadicAbs, PadicError> {
    let v = valuation(x, p)?;
    Ok(PadicAbs {
        exponent: -v,
        value: (p as f64).powi(-v),
    })
}

/// Outcome of comparing two balls of the same prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallRelation {
    /// Disjoint balls at distance `p^{-e}`.
    Disjoint(i32),
    /// Equal or nested.
    Overlap,
}

/// Closed ball `{y : |y - c|_p <= p^{-radius_exp}}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ball {
    p: u32,
    radius_exp: i32,
    // digits[i] is the coefficient of p^{low + i}; trimmed so that the vector
    // is empty or starts and ends with a nonzero digit.
    low: i32,
    digits: Vec<u32>,
}

impl Ball {
    /// Ball centered at `digits` (least significant first, starting at
    /// position `low`). Digits at positions `>= radius_exp` are dropped.
    pub fn from_digits(
        p: u32,
        low: i32,
        digits: &[u32],
        radius_exp: i32,
    ) -> Result<Self, PadicError> {
        check_prime(p)?;
        if digits.iter().any(|&d| d >= p) {
            return Err(PadicError::BadDigits(format!("{digits:?}")));
        }
        Ok(Self::canonical(p, low, digits.to_vec(), radius_exp))
    }

    fn canonical(p: u32, mut low: i32, mut digits: Vec<u32>, radius_exp: i32) -> Self {
        let keep = (radius_exp - low).max(0) as usize;
        digits.truncate(keep);
        while digits.last() == Some(&0) {
            digits.pop();
        }
        let lead = digits.iter().take_while(|&&d| d == 0).count();
        digits.drain(..lead);
        low += lead as i32;
        if digits.is_empty() {
            low = 0;
        }
        Self {
            p,
            radius_exp,
            low,
            digits,
        }
    }

    pub fn from_integer(p: u32, center: i64, radius_exp: i32) -> Result<Self, PadicError> {
        Self::new(
            p,
            &BigRational::from_integer(BigInt::from(center)),
            radius_exp,
        )
    }

    /// Ball around a rational center whose denominator is a power of `p`.
    pub fn new(p: u32, center: &BigRational, radius_exp: i32) -> Result<Self, PadicError> {
        check_prime(p)?;
        let pb = BigInt::from(p);
        let mut den = center.denom().clone();
        let mut shift = 0i32;
        while (&den % &pb).is_zero() {
            den /= &pb;
            shift += 1;
        }
        if !den.is_one() {
            return Err(PadicError::NotPadicCenter(center.to_string(), p));
        }
        // center = numer / p^shift; keep positions -shift .. radius_exp - 1.
        let width = radius_exp + shift;
        if width <= 0 {
            return Ok(Self::canonical(p, 0, Vec::new(), radius_exp));
        }
        let modulus = num_traits::pow(BigInt::from(p), width as usize);
        let mut n = center.numer().mod_floor(&modulus).to_biguint().unwrap();
        let pu = BigUint::from(p);
        let mut digits = Vec::with_capacity(width as usize);
        for _ in 0..width {
            let (q, r) = n.div_rem(&pu);
            digits.push(r.to_u32().unwrap());
            n = q;
        }
        Ok(Self::canonical(p, -shift, digits, radius_exp))
    }

    /// The unit disc `Z_p`.
    pub fn unit(p: u32) -> Result<Self, PadicError> {
        Self::from_digits(p, 0, &[], 0)
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn radius_exp(&self) -> i32 {
        self.radius_exp
    }

    /// Coefficient of `p^pos` in the canonical center.
    pub fn digit(&self, pos: i32) -> u32 {
        if self.digits.is_empty() || pos < self.low {
            return 0;
        }
        self.digits
            .get((pos - self.low) as usize)
            .copied()
            .unwrap_or(0)
    }

    /// Lowest position carrying a nonzero digit, or `None` for center 0.
    pub fn lowest_position(&self) -> Option<i32> {
        (!self.digits.is_empty()).then_some(self.low)
    }

    fn top(&self) -> i32 {
        self.low + self.digits.len() as i32
    }

    /// Canonical center as an exact rational in `[0, p^{radius_exp})`.
    pub fn center(&self) -> BigRational {
        let p = BigRational::from_integer(BigInt::from(self.p));
        let mut acc = BigRational::zero();
        for &d in self.digits.iter().rev() {
            acc = acc * &p + BigRational::from_integer(BigInt::from(d));
        }
        acc * pow_rational(&p, self.low)
    }

    /// Haar mass `p^{-radius_exp}`.
    pub fn measure(&self) -> BigRational {
        pow_rational(
            &BigRational::from_integer(BigInt::from(self.p)),
            -self.radius_exp,
        )
    }

    fn first_difference(&self, other: &Ball, below: i32) -> Option<i32> {
        let lo = match (self.lowest_position(), other.lowest_position()) {
            (None, None) => return None,
            (Some(a), None) | (None, Some(a)) => a,
            (Some(a), Some(b)) => a.min(b),
        };
        (lo..below).find(|&pos| self.digit(pos) != other.digit(pos))
    }

    /// Relation to another ball: distance exponent when disjoint.
    pub fn relation(&self, other: &Ball) -> Result<BallRelation, PadicError> {
        if self.p != other.p {
            return Err(PadicError::PrimeMismatch(self.p, other.p));
        }
        let below = self.radius_exp.min(other.radius_exp);
        Ok(match self.first_difference(other, below) {
            Some(e) => BallRelation::Disjoint(e),
            None => BallRelation::Overlap,
        })
    }

    pub fn contains(&self, other: &Ball) -> bool {
        self.p == other.p
            && self.radius_exp <= other.radius_exp
            && self.first_difference(other, self.radius_exp).is_none()
    }

    pub fn parent(&self) -> Ball {
        Self::canonical(self.p, self.low, self.digits.clone(), self.radius_exp - 1)
    }

    /// The `p` maximal proper sub-balls, in canonical order.
    pub fn children(&self) -> Vec<Ball> {
        (0..self.p).map(|d| self.with_digit(d)).collect()
    }

    fn with_digit(&self, d: u32) -> Ball {
        let k = self.radius_exp;
        let low = self.lowest_position().map_or(k, |l| l.min(k));
        let mut digits: Vec<u32> = (low..k).map(|pos| self.digit(pos)).collect();
        digits.push(d);
        Self::canonical(self.p, low, digits, k + 1)
    }

    /// Partition into balls of radius exponent `level`, ordered by center.
    pub fn partition(&self, level: i32) -> Result<Vec<Ball>, PadicError> {
        if level < self.radius_exp {
            return Err(PadicError::LevelTooSmall {
                level,
                radius_exp: self.radius_exp,
            });
        }
        let depth = (level - self.radius_exp) as u32;
        match (self.p as usize).checked_pow(depth) {
            Some(n) if n <= MAX_CELLS => {}
            _ => return Err(PadicError::TooManyCells),
        }
        let mut cells = vec![self.clone()];
        for _ in 0..depth {
            // Varying the new (most significant) digit slowest keeps value order.
            let mut next = Vec::with_capacity(cells.len() * self.p as usize);
            for d in 0..self.p {
                next.extend(cells.iter().map(|c| c.with_digit(d)));
            }
            cells = next;
        }
        cells.sort();
        Ok(cells)
    }

    /// Canonical center written most-significant digit first, with a radix
    /// point when the center has negative-position digits.
    pub fn center_string(&self) -> Result<String, PadicError> {
        if self.p > 36 {
            return Err(PadicError::PrimeTooLarge(self.p));
        }
        let hi = (self.top() - 1).max(0);
        let lo = self.lowest_position().unwrap_or(0).min(0);
        let mut s = String::new();
        for pos in (lo..=hi).rev() {
            if pos == -1 {
                s.push('.');
            }
            s.push(std::char::from_digit(self.digit(pos), 36).unwrap());
        }
        Ok(s)
    }

    pub fn from_center_string(p: u32, s: &str, radius_exp: i32) -> Result<Self, PadicError> {
        check_prime(p)?;
        if p > 36 {
            return Err(PadicError::PrimeTooLarge(p));
        }
        let bad = || PadicError::BadDigits(s.to_string());
        let (int_part, frac_part) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let parse = |c: char| c.to_digit(36).filter(|&d| d < p).ok_or_else(bad);
        let mut digits = Vec::new();
        for c in frac_part.chars().rev() {
            digits.push(parse(c)?);
        }
        for c in int_part.chars().rev() {
            digits.push(parse(c)?);
        }
        Ok(Self::canonical(
            p,
            -(frac_part.len() as i32),
            digits,
            radius_exp,
        ))
    }
}

impl Ord for Ball {
    fn cmp(&self, other: &Self) -> Ordering {
        self.p
            .cmp(&other.p)
            .then(self.radius_exp.cmp(&other.radius_exp))
            .then_with(|| {
                let hi = self.top().max(other.top());
                let lo = match (self.lowest_position(), other.lowest_position()) {
                    (Some(a), Some(b)) => a.min(b),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => return Ordering::Equal,
                };
                for pos in (lo..hi).rev() {
                    match self.digit(pos).cmp(&other.digit(pos)) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for Ball {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.center_string() {
            Ok(c) => write!(f, "B({c}_{}, {}^-{})", self.p, self.p, self.radius_exp),
            Err(_) => write!(f, "B({}, {}^-{})", self.center(), self.p, self.radius_exp),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct BallRepr {
    p: u32,
    center: String,
    radius_exp: i32,
}

impl Serialize for Ball {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let center = self.center_string().map_err(serde::ser::Error::custom)?;
        BallRepr {
            p: self.p,
            center,
            radius_exp: self.radius_exp,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ball {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = BallRepr::deserialize(deserializer)?;
        Ball::from_center_string(r.p, &r.center, r.radius_exp).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn pow_rational(base: &BigRational, exp: i32) -> BigRational {
    let mag = num_traits::pow(base.clone(), exp.unsigned_abs() as usize);
    if exp >= 0 {
        mag
    } else {
        mag.recip()
    }
}

/// Finite disjoint union of balls of one prime, in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompactOpen {
    p: u32,
    balls: Vec<Ball>,
}

impl CompactOpen {
    /// Validates pairwise disjointness, then merges complete sibling sets.
    pub fn new(p: u32, balls: Vec<Ball>) -> Result<Self, PadicError> {
        check_prime(p)?;
        if let Some(b) = balls.iter().find(|b| b.p != p) {
            return Err(PadicError::PrimeMismatch(p, b.p));
        }
        for (i, a) in balls.iter().enumerate() {
            for b in &balls[i + 1..] {
                if a.relation(b)? == BallRelation::Overlap {
                    return Err(PadicError::Overlap);
                }
            }
        }
        Ok(Self {
            p,
            balls: merge_siblings(p, balls),
        })
    }

    pub fn from_ball(ball: Ball) -> Self {
        Self {
            p: ball.p,
            balls: vec![ball],
        }
    }

    /// `outer` with every hole removed.
    pub fn ball_minus(outer: &Ball, holes: &[Ball]) -> Result<Self, PadicError> {
        if let Some(h) = holes.iter().find(|h| h.p != outer.p) {
            return Err(PadicError::PrimeMismatch(outer.p, h.p));
        }
        let mut out = Vec::new();
        let mut stack = vec![outer.clone()];
        while let Some(b) = stack.pop() {
            if holes.iter().any(|h| h.contains(&b)) {
                continue;
            }
            if holes
                .iter()
                .all(|h| b.relation(h) != Ok(BallRelation::Overlap))
            {
                out.push(b);
            } else {
                stack.extend(b.children());
            }
        }
        Self::new(outer.p, out)
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn max_radius_exp(&self) -> Option<i32> {
        self.balls.iter().map(Ball::radius_exp).max()
    }

    pub fn measure(&self) -> BigRational {
        self.balls
            .iter()
            .fold(BigRational::zero(), |acc, b| acc + b.measure())
    }

    pub fn measure_f64(&self) -> f64 {
        self.measure().to_f64().unwrap_or(f64::NAN)
    }

    pub fn contains_ball(&self, ball: &Ball) -> bool {
        self.balls.iter().any(|b| b.contains(ball))
    }

    /// Partition into balls of radius exponent `level`, ordered by center.
    pub fn partition_level(&self, level: i32) -> Result<Vec<Ball>, PadicError> {
        let mut out = Vec::new();
        for b in &self.balls {
            out.extend(b.partition(level)?);
            if out.len() > MAX_CELLS {
                return Err(PadicError::TooManyCells);
            }
        }
        out.sort();
        Ok(out)
    }
}

impl Serialize for CompactOpen {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.balls.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CompactOpen {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let balls = Vec::<Ball>::deserialize(deserializer)?;
        let p = balls
            .first()
            .map(Ball::prime)
            .ok_or_else(|| serde::de::Error::custom(PadicError::Empty))?;
        CompactOpen::new(p, balls).map_err(serde::de::Error::custom)
    }
}

fn merge_siblings(p: u32, mut balls: Vec<Ball>) -> Vec<Ball> {
    loop {
        let mut groups: BTreeMap<Ball, Vec<usize>> = BTreeMap::new();
        for (i, b) in balls.iter().enumerate() {
            groups.entry(b.parent()).or_default().push(i);
        }
        let full: Vec<(Ball, Vec<usize>)> = groups
            .into_iter()
            .filter(|(_, idx)| idx.len() == p as usize)
            .collect();
        if full.is_empty() {
            break;
        }
        let mut drop = vec![false; balls.len()];
        let mut merged = Vec::new();
        for (parent, idx) in full {
            idx.iter().for_each(|&i| drop[i] = true);
            merged.push(parent);
        }
        balls = balls
            .into_iter()
            .zip(drop)
            .filter_map(|(b, d)| (!d).then_some(b))
            .chain(merged)
            .collect();
    }
    balls.sort();
    balls
}

/// Distance between two disjoint compact opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetDistance {
    /// `dist(U, W) = p^{-exponent}`.
    pub exponent: i32,
    /// Every ball pair realizes the same distance.
    pub well_separated: bool,
}

pub fn set_distance(u: &CompactOpen, w: &CompactOpen) -> Result<SetDistance, PadicError> {
    if u.p != w.p {
        return Err(PadicError::PrimeMismatch(u.p, w.p));
    }
    if u.is_empty() || w.is_empty() {
        return Err(PadicError::Empty);
    }
    let mut lo = i32::MAX;
    let mut hi = i32::MIN;
    for a in &u.balls {
        for b in &w.balls {
            match a.relation(b)? {
                BallRelation::Disjoint(e) => {
                    lo = lo.min(e);
                    hi = hi.max(e);
                }
                BallRelation::Overlap => return Err(PadicError::Overlap),
            }
        }
    }
    // The infimum of |x - y| is the largest exponent.
    Ok(SetDistance {
        exponent: hi,
        well_separated: lo == hi,
    })
}

pub fn well_separated(u: &CompactOpen, w: &CompactOpen) -> Result<bool, PadicError> {
    set_distance(u, w).map(|d| d.well_separated)
}
