//! Exact positive reals of the form `Π bᵢ^{eᵢ}` with integer bases and
//! rational exponents.
//!
//! Quantities such as `C·2^{ks}` or `r^{-s}` are irrational for most
//! exponents, so bounds are kept symbolic and compared exactly. A float
//! estimate of `log₂` settles almost every comparison; near-ties fall back to
//! raising both sides to a common integer power.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Pow, ToPrimitive, Zero};

/// Rational numbers used for exponents and slopes.
pub type Rat = Ratio<i128>;

/// Exponents supplied as reals are replaced by the nearest multiple of
/// `1/EXPONENT_DENOM`.
pub const EXPONENT_DENOM: i128 = 1 << 16;

/// Rational proxy of a real exponent, rounded to the nearest multiple of 2⁻¹⁶.
pub fn exponent(s: f64) -> Rat {
    assert!(s.is_finite(), "exponent must be finite");
    let n = (s * EXPONENT_DENOM as f64).round() as i128;
    Rat::new(n, EXPONENT_DENOM)
}

pub fn rat(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ilog2_ceil(n: u64) -> u32 {
    assert!(n > 0);
    64 - (n - 1).leading_zeros()
}

fn log2_big(b: &BigUint) -> f64 {
    let bits = b.bits();
    if bits <= 64 {
        (b.to_u64().unwrap() as f64).log2()
    } else {
        let shift = bits - 64;
        ((b >> shift).to_u64().unwrap() as f64).log2() + shift as f64
    }
}

/// Positive real `2^{e₂} · Π bᵢ^{eᵢ}` with odd bases `bᵢ > 1`.
#[derive(Clone, Debug)]
pub struct Monomial {
    two: Rat,
    odd: BTreeMap<BigUint, Rat>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { two: Rat::zero(), odd: BTreeMap::new() }
    }

    /// `2^e`.
    pub fn pow2(e: Rat) -> Self {
        Monomial { two: e, odd: BTreeMap::new() }
    }

    pub fn from_big(n: &BigUint) -> Self {
        assert!(!n.is_zero(), "Monomial cannot represent zero");
        let tz = n.trailing_zeros().unwrap_or(0);
        let odd = n >> tz;
        let mut m = Monomial::pow2(Rat::from_integer(tz as i128));
        if !odd.is_one() {
            m.odd.insert(odd, Rat::one());
        }
        m
    }

    pub fn int(n: u128) -> Self {
        Self::from_big(&BigUint::from(n))
    }

    /// `num / den`.
    pub fn ratio(num: u128, den: u128) -> Self {
        Self::int(num).div(&Self::int(den))
    }

    pub fn from_rat(r: &Rat) -> Self {
        assert!(*r.numer() > 0, "Monomial must be positive");
        Self::ratio(*r.numer() as u128, *r.denom() as u128)
    }

    /// `n^e`.
    pub fn int_pow(n: u128, e: Rat) -> Self {
        Self::int(n).powr(e)
    }

    pub fn exponent_of_two(&self) -> Rat {
        self.two
    }

    /// True when the value is a (possibly fractional) power of two.
    pub fn is_power_of_two(&self) -> bool {
        self.odd.is_empty()
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        let mut r = self.clone();
        r.two += o.two;
        for (b, e) in &o.odd {
            let v = r.odd.entry(b.clone()).or_insert_with(Rat::zero);
            *v += *e;
            if v.is_zero() {
                r.odd.remove(b);
            }
        }
        r
    }

    pub fn recip(&self) -> Monomial {
        Monomial { two: -self.two, odd: self.odd.iter().map(|(b, e)| (b.clone(), -*e)).collect() }
    }

    pub fn div(&self, o: &Monomial) -> Monomial {
        self.mul(&o.recip())
    }

    pub fn powr(&self, e: Rat) -> Monomial {
        if e.is_zero() {
            return Monomial::one();
        }
        Monomial { two: self.two * e, odd: self.odd.iter().map(|(b, x)| (b.clone(), *x * e)).collect() }
    }

    pub fn sqrt(&self) -> Monomial {
        self.powr(rat(1, 2))
    }

    pub fn log2(&self) -> f64 {
        let mut acc = rat_to_f64(&self.two);
        for (b, e) in &self.odd {
            acc += rat_to_f64(e) * log2_big(b);
        }
        acc
    }

    pub fn to_f64(&self) -> f64 {
        self.log2().exp2()
    }

    /// Largest integer `q` with `q ≤ self`.
    pub fn floor(&self) -> u128 {
        let guess = self.to_f64().floor();
        let mut q = if guess.is_finite() && guess > 0.0 { guess.min(1e30) as u128 } else { 0 };
        while q > 0 && Monomial::int(q) > *self {
            q -= 1;
        }
        while Monomial::int(q + 1) <= *self {
            q += 1;
        }
        q
    }

    /// Smallest integer `q` with `q ≥ self`.
    pub fn ceil(&self) -> u128 {
        let f = self.floor();
        if f > 0 && Monomial::int(f) == *self {
            f
        } else {
            f + 1
        }
    }

    fn cmp_exact(&self, o: &Monomial) -> Ordering {
        let q = self.div(o);
        if q.odd.is_empty() {
            return q.two.cmp(&Rat::zero());
        }
        let mut d: i128 = *q.two.denom();
        for e in q.odd.values() {
            d = d.lcm(e.denom());
        }
        assert!(d <= 1 << 24, "exact comparison needs a common power that is too large ({d})");
        let mut lhs = BigUint::one();
        let mut rhs = BigUint::one();
        let two = q.two * Rat::from_integer(d);
        let t = two.to_integer();
        if t >= 0 {
            lhs <<= t as usize;
        } else {
            rhs <<= (-t) as usize;
        }
        for (b, e) in &q.odd {
            let p = (*e * Rat::from_integer(d)).to_integer();
            if p >= 0 {
                lhs *= Pow::pow(b, p as u64);
            } else {
                rhs *= Pow::pow(b, (-p) as u64);
            }
        }
        lhs.cmp(&rhs)
    }
}

impl PartialEq for Monomial {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Monomial {}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Monomial {
    fn cmp(&self, o: &Self) -> Ordering {
        let q = self.div(o);
        if q.odd.is_empty() {
            return q.two.cmp(&Rat::zero());
        }
        let mut est = rat_to_f64(&q.two);
        let mut scale = est.abs();
        for (b, e) in &q.odd {
            let t = rat_to_f64(e) * log2_big(b);
            est += t;
            scale += t.abs();
        }
        let margin = 1e-9 * (1.0 + scale);
        if est > margin {
            Ordering::Greater
        } else if est < -margin {
            Ordering::Less
        } else {
            self.cmp_exact(o)
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.two.is_zero() {
            parts.push(format!("2^({})", self.two));
        }
        for (b, e) in &self.odd {
            if e.is_one() {
                parts.push(b.to_string());
            } else {
                parts.push(format!("{b}^({e})"));
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}
