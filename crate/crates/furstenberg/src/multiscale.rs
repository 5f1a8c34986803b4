//! Branching functions, ε-linear decompositions and uniformization.
//!
//! A set is uniform along scales `Δ^{e_0} > Δ^{e_1} > …` when every occupied
//! cell at one scale has the same number of occupied children at the next.
//! Its branching function `f(j) = Σ_{i≤j} log N_i / log(1/Δ)` is stored with
//! increments rounded down to multiples of 2⁻¹⁶, so all slope and deviation
//! tests below are exact rational arithmetic. Interval endpoints produced by
//! root solving can have large denominators, hence [`BigRational`].

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::json;

use crate::dyadic::{Cell, DyadicSquare, Scale, SquareFamily};
use crate::deltaset::spread_certificate;
use crate::exact::{Monomial, Rat, EXPONENT_DENOM};
use crate::{check, par, Error, Result};

/// Exact rationals for breakpoints and slopes.
pub type Q = BigRational;

pub fn q_rat(r: &Rat) -> Q {
    Q::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Largest multiple of 2⁻¹⁶ not above `x`.
pub fn q_floor_grid(x: &Q) -> Rat {
    let scaled = (x * q_int(EXPONENT_DENOM as i64)).floor().to_integer();
    Rat::new(scaled.to_i128().expect("grid value fits i128"), EXPONENT_DENOM)
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

static LOG_CACHE: Mutex<BTreeMap<u64, i128>> = Mutex::new(BTreeMap::new());

/// `⌊2¹⁶·log₂ n⌋ / 2¹⁶`, computed as the bit length of `n^{2¹⁶}` minus one.
pub fn log2_proxy(n: u64) -> Rat {
    assert!(n > 0, "log of zero");
    if let Some(v) = LOG_CACHE.lock().unwrap().get(&n) {
        return Rat::new(*v, EXPONENT_DENOM);
    }
    let bits = num_traits::Pow::pow(BigUint::from(n), EXPONENT_DENOM as u32).bits() as i128 - 1;
    LOG_CACHE.lock().unwrap().insert(n, bits);
    Rat::new(bits, EXPONENT_DENOM)
}

/// Continuous piecewise-linear function through `(xs[i], ys[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<Q>,
    ys: Vec<Q>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<Q>, ys: Vec<Q>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::Invalid("need at least two breakpoints with values".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("breakpoints must increase strictly".into()));
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    /// Values at `0, 1, …, m`.
    pub fn from_integer_values(values: Vec<Q>) -> Result<Self> {
        let xs = (0..values.len() as i64).map(q_int).collect();
        Self::new(xs, values)
    }

    pub fn xs(&self) -> &[Q] {
        &self.xs
    }

    pub fn ys(&self) -> &[Q] {
        &self.ys
    }

    pub fn start(&self) -> &Q {
        &self.xs[0]
    }

    pub fn end(&self) -> &Q {
        self.xs.last().unwrap()
    }

    fn in_domain(&self, x: &Q) -> Result<()> {
        if x < self.start() || x > self.end() {
            return Err(Error::Invalid(format!("{x} outside [{}, {}]", self.start(), self.end())));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Q) -> Result<Q> {
        self.in_domain(x)?;
        let i = match self.xs.binary_search(x) {
            Ok(i) => return Ok(self.ys[i].clone()),
            Err(i) => i,
        };
        let (x0, x1) = (&self.xs[i - 1], &self.xs[i]);
        let (y0, y1) = (&self.ys[i - 1], &self.ys[i]);
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// `s_f(a,b)`.
    pub fn slope(&self, a: &Q, b: &Q) -> Result<Q> {
        if a >= b {
            return Err(Error::Invalid(format!("empty window [{a}, {b}]")));
        }
        Ok((self.eval(b)? - self.eval(a)?) / (b - a))
    }

    /// `a`, the breakpoints strictly inside `(a,b)`, and `b`.
    pub fn points_in(&self, a: &Q, b: &Q) -> Vec<Q> {
        let mut v = vec![a.clone()];
        v.extend(self.xs.iter().filter(|x| *x > a && *x < b).cloned());
        v.push(b.clone());
        v
    }

    /// Largest absolute slope.
    pub fn lipschitz(&self) -> Q {
        (1..self.xs.len())
            .map(|i| ((&self.ys[i] - &self.ys[i - 1]) / (&self.xs[i] - &self.xs[i - 1])).abs())
            .max()
            .unwrap()
    }

    /// Largest `L(x) − f(x)` and `f(x) − L(x)` over `[a,b]`, with `L` the chord.
    fn deviations(&self, a: &Q, b: &Q) -> Result<(Q, Q)> {
        let s = self.slope(a, b)?;
        let fa = self.eval(a)?;
        let mut below = Q::zero();
        let mut above = Q::zero();
        for x in self.points_in(a, b) {
            let d = self.eval(&x)? - (&fa + &s * (&x - a));
            if d < Q::zero() {
                below = below.max(-d);
            } else {
                above = above.max(d);
            }
        }
        Ok((below, above))
    }

    /// `|f − L| ≤ ε(b−a)` on `[a,b]`.
    pub fn is_eps_linear(&self, a: &Q, b: &Q, eps: &Q) -> Result<bool> {
        let (below, above) = self.deviations(a, b)?;
        let bound = eps * (b - a);
        Ok(below <= bound && above <= bound)
    }

    /// `f ≥ L − ε(b−a)` on `[a,b]`.
    pub fn is_eps_superlinear(&self, a: &Q, b: &Q, eps: &Q) -> Result<bool> {
        let (below, _) = self.deviations(a, b)?;
        Ok(below <= eps * (b - a))
    }
}

/// Branching function of a uniform set with base `Δ = 2^{-base_bits}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchingFunction {
    pub base_bits: u32,
    /// `N_1, …, N_m`.
    pub branching: Vec<u64>,
    /// `f(0), …, f(m)`.
    pub values: Vec<Rat>,
}

impl BranchingFunction {
    pub fn from_branching(base_bits: u32, branching: Vec<u64>) -> Result<Self> {
        let cap = 1u64 << (2 * base_bits);
        if let Some(n) = branching.iter().find(|&&n| n == 0 || n > cap) {
            return Err(Error::Invalid(format!("branching number {n} outside 1..={cap}")));
        }
        let mut values = vec![Rat::zero()];
        let base = Rat::from_integer(base_bits as i128);
        for &n in &branching {
            let last = *values.last().unwrap();
            values.push(last + log2_proxy(n) / base);
        }
        Ok(BranchingFunction { base_bits, branching, values })
    }

    pub fn m(&self) -> u32 {
        self.branching.len() as u32
    }

    pub fn value(&self, i: u32) -> Rat {
        self.values[i as usize]
    }

    /// Linear interpolation between the integer values.
    pub fn function(&self) -> PiecewiseLinear {
        PiecewiseLinear::from_integer_values(self.values.iter().map(q_rat).collect()).expect("at least one level")
    }
}

/// Occupied cells at every level `0..=k`, coarsest first.
pub fn level_covers(p: &SquareFamily) -> Vec<SquareFamily> {
    let mut covers = vec![p.clone()];
    for j in (0..p.k()).rev() {
        let next = covers.last().unwrap().cover_at(Scale::new(j)).expect("coarser scale");
        covers.push(next);
    }
    covers.reverse();
    covers
}

/// Number of occupied children of each occupied parent.
fn child_counts(children: &SquareFamily, parent_k: u32) -> BTreeMap<DyadicSquare, u64> {
    let mut m = BTreeMap::new();
    for c in children.iter() {
        *m.entry(c.ancestor(parent_k)).or_insert(0u64) += 1;
    }
    m
}

/// Branching numbers of `p` along the dyadic levels `levels` (increasing,
/// last equal to `p.k()`); fails with a witness pair when not uniform.
pub fn is_uniform(p: &SquareFamily, levels: &[u32]) -> Result<Vec<u64>> {
    validate_levels(p, levels)?;
    if p.is_empty() {
        return Err(Error::Empty("uniformity of an empty family"));
    }
    let mut out = Vec::new();
    let mut lo = 0;
    for &hi in levels {
        let cover = p.cover_at(Scale::new(hi))?;
        let counts = child_counts(&cover, lo);
        let (q0, n0) = counts.iter().next().map(|(q, n)| (*q, *n)).unwrap();
        if let Some((q1, n1)) = counts.iter().find(|(_, n)| **n != n0) {
            return Err(Error::Invalid(format!(
                "not uniform between 2^-{lo} and 2^-{hi}: {q0:?} has {n0} children, {q1:?} has {n1}"
            )));
        }
        out.push(n0);
        lo = hi;
    }
    Ok(out)
}

fn validate_levels(p: &SquareFamily, levels: &[u32]) -> Result<()> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Scale(format!("scale exponents {levels:?} must increase from above 0")));
    }
    if *levels.last().unwrap() != p.k() {
        return Err(Error::Scale(format!("finest scale 2^-{} is not the family scale 2^-{}", levels.last().unwrap(), p.k())));
    }
    Ok(())
}

/// `f_P` for a `(Δ^i)`-uniform set.
pub fn branching_function(p: &SquareFamily, base_bits: u32) -> Result<BranchingFunction> {
    if base_bits == 0 || !p.k().is_multiple_of(base_bits) || p.k() == 0 {
        return Err(Error::Scale(format!("scale 2^-{} is not a positive power of 2^-{base_bits}", p.k())));
    }
    let levels: Vec<u32> = (1..=p.k() / base_bits).map(|i| i * base_bits).collect();
    BranchingFunction::from_branching(base_bits, is_uniform(p, &levels)?)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tag {
    /// ε-linear with the given slope.
    Linear(Q),
    /// ε-superlinear with slope exactly the given value.
    Superlinear(Q),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedInterval {
    pub c: Q,
    pub d: Q,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalDecomposition {
    pub a: Q,
    pub b: Q,
    pub eps: Q,
    pub intervals: Vec<TaggedInterval>,
    /// Measure of `[a,b]` not covered.
    pub leftover: Q,
    /// Bisection depth used by the linear stage.
    pub depth: u32,
}

impl IntervalDecomposition {
    pub fn min_length(&self) -> Option<Q> {
        self.intervals.iter().map(|i| &i.d - &i.c).min()
    }

    /// Shortest interval relative to `b − a`.
    pub fn tau(&self) -> Option<Q> {
        self.min_length().map(|l| l / (&self.b - &self.a))
    }

    /// Re-checks every tag, disjointness and the leftover measure.
    pub fn verify(&self, f: &PiecewiseLinear, s: Option<&Q>) -> Result<()> {
        let mut prev = self.a.clone();
        let mut covered = Q::zero();
        for iv in &self.intervals {
            check(iv.c >= prev && iv.c < iv.d && iv.d <= self.b, || format!("interval [{}, {}] out of order", iv.c, iv.d))?;
            prev = iv.d.clone();
            covered += &iv.d - &iv.c;
            let slope = f.slope(&iv.c, &iv.d)?;
            match &iv.tag {
                Tag::Linear(v) => {
                    check(*v == slope, || format!("slope claim {v} ≠ {slope} on [{}, {}]", iv.c, iv.d))?;
                    check(f.is_eps_linear(&iv.c, &iv.d, &self.eps)?, || format!("[{}, {}] is not ε-linear", iv.c, iv.d))?;
                    if let Some(s) = s {
                        check(slope >= *s, || format!("linear slope {slope} below {s}"))?;
                    }
                }
                Tag::Superlinear(v) => {
                    check(*v == slope, || format!("slope claim {v} ≠ {slope} on [{}, {}]", iv.c, iv.d))?;
                    check(f.is_eps_superlinear(&iv.c, &iv.d, &self.eps)?, || format!("[{}, {}] is not ε-superlinear", iv.c, iv.d))?;
                    if let Some(s) = s {
                        check(slope == *s, || format!("superlinear slope {slope} ≠ {s}"))?;
                    }
                }
            }
        }
        let leftover = &self.b - &self.a - covered;
        check(leftover == self.leftover, || format!("leftover {} recorded as {}", leftover, self.leftover))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ivs: Vec<_> = self
            .intervals
            .iter()
            .map(|i| {
                let (kind, slope) = match &i.tag {
                    Tag::Linear(v) => ("linear", v),
                    Tag::Superlinear(v) => ("superlinear", v),
                };
                json!({"c": i.c.to_string(), "d": i.d.to_string(), "tag": kind, "slope": slope.to_string()})
            })
            .collect();
        json!({"a": self.a.to_string(), "b": self.b.to_string(), "eps": self.eps.to_string(),
               "leftover": self.leftover.to_string(), "depth": self.depth, "intervals": ivs})
    }
}

/// Bisection depths tried in turn by [`linear_decompose_on`].
pub const DEPTH_SCHEDULE: [u32; 5] = [4, 8, 12, 16, 20];

fn bisect(f: &PiecewiseLinear, c: Q, d: Q, eps: &Q, depth: u32, out: &mut Vec<TaggedInterval>) -> Result<()> {
    if f.is_eps_linear(&c, &d, eps)? {
        let slope = f.slope(&c, &d)?;
        out.push(TaggedInterval { c, d, tag: Tag::Linear(slope) });
    } else if depth > 0 {
        let mid = (&c + &d) / q_int(2);
        bisect(f, c, mid.clone(), eps, depth - 1, out)?;
        bisect(f, mid, d, eps, depth - 1, out)?;
    }
    Ok(())
}

/// ε-linear pieces of `[a,b]` by recursive bisection. Deeper schedules are
/// tried until the uncovered measure is at most `ε(b−a)`; the last attempt
/// is returned either way, so callers must inspect `leftover`.
pub fn linear_decompose_on(f: &PiecewiseLinear, a: &Q, b: &Q, eps: &Q) -> Result<IntervalDecomposition> {
    if a >= b {
        return Err(Error::Invalid(format!("empty window [{a}, {b}]")));
    }
    f.in_domain(a)?;
    f.in_domain(b)?;
    let mut last = None;
    for depth in DEPTH_SCHEDULE {
        let mut out = Vec::new();
        bisect(f, a.clone(), b.clone(), eps, depth, &mut out)?;
        let covered: Q = out.iter().map(|i| &i.d - &i.c).sum();
        let dec = IntervalDecomposition {
            a: a.clone(),
            b: b.clone(),
            eps: eps.clone(),
            intervals: out,
            leftover: b - a - covered,
            depth,
        };
        let done = dec.leftover <= eps * (b - a);
        last = Some(dec);
        if done {
            break;
        }
    }
    Ok(last.unwrap())
}

pub fn linear_decompose(f: &PiecewiseLinear, eps: &Q) -> Result<IntervalDecomposition> {
    linear_decompose_on(f, &f.start().clone(), &f.end().clone(), eps)
}

/// Largest `x ∈ (0, c)` with `s_f(x, d) = s`, given `s_f(c, d) < s`.
fn largest_root(f: &PiecewiseLinear, s: &Q, c: &Q, d: &Q) -> Result<Option<Q>> {
    let fd = f.eval(d)?;
    let g = |x: &Q| -> Result<Q> { Ok(&fd - f.eval(x)? - s * (d - x)) };
    let mut pts: Vec<Q> = f.xs.iter().filter(|x| *x < c && **x > Q::zero()).cloned().collect();
    pts.push(Q::zero());
    pts.sort();
    pts.dedup();
    let mut right = c.clone();
    let mut g_right = g(&right)?;
    for left in pts.into_iter().rev() {
        let g_left = g(&left)?;
        if g_left >= Q::zero() {
            if g_left.is_zero() {
                return Ok(Some(left));
            }
            let x = &left + (&right - &left) * &g_left / (&g_left - &g_right);
            return Ok(Some(x));
        }
        right = left;
        g_right = g_left;
    }
    Ok(None)
}

/// Bound on the uncovered measure: `8(1 + 1/(t−s))εm`.
pub fn kaufman_leftover_bound(s: &Q, t: &Q, eps: &Q, m: &Q) -> Q {
    q_int(8) * (Q::one() + Q::one() / (t - s)) * eps * m
}

/// Splits `[0,m]` into ε-linear pieces of slope at least `s` and ε-superlinear
/// pieces of slope exactly `s`, given `f(x) ≥ tx − εm`.
pub fn kaufman_decompose(f: &PiecewiseLinear, s: &Q, t: &Q, eps: &Q) -> Result<IntervalDecomposition> {
    if !(*s > Q::zero() && s < t && *t <= q_int(2)) {
        return Err(Error::Invalid(format!("need 0 < s < t ≤ 2, got s = {s}, t = {t}")));
    }
    if !f.start().is_zero() || !f.ys[0].is_zero() {
        return Err(Error::Invalid("f must start at f(0) = 0".into()));
    }
    let m = f.end().clone();
    for (x, y) in f.xs.iter().zip(&f.ys) {
        check(*y >= t * x - eps * &m, || format!("hypothesis f(x) ≥ tx − εm fails at x = {x}"))?;
    }
    let base = linear_decompose(f, &(eps * eps / q_int(2)))?;
    let mut ivs: Vec<(Q, Q)> = base.intervals.iter().map(|i| (i.c.clone(), i.d.clone())).collect();
    let mut out: Vec<TaggedInterval> = Vec::new();
    let linear = |c: &Q, d: &Q| -> Result<TaggedInterval> {
        Ok(TaggedInterval { c: c.clone(), d: d.clone(), tag: Tag::Linear(f.slope(c, d)?) })
    };
    let mut idx = ivs.len();
    while idx > 0 {
        let mut bad = None;
        for i in (0..idx).rev() {
            if f.slope(&ivs[i].0, &ivs[i].1)? < *s {
                bad = Some(i);
                break;
            }
        }
        let Some(k) = bad else {
            for (c, d) in &ivs[..idx] {
                out.push(linear(c, d)?);
            }
            break;
        };
        for (c, d) in &ivs[k + 1..idx] {
            out.push(linear(c, d)?);
        }
        let (ck, dk) = ivs[k].clone();
        if dk <= eps * &m / (t - s) {
            break;
        }
        let cp = largest_root(f, s, &ck, &dk)?
            .ok_or_else(|| Error::Check(format!("no c′ < {ck} with slope {s} to {dk}")))?;
        out.push(TaggedInterval { c: cp.clone(), d: dk, tag: Tag::Superlinear(s.clone()) });
        match (0..k).rev().find(|&l| ivs[l].0 <= cp && cp <= ivs[l].1) {
            Some(l) => {
                let cl = ivs[l].0.clone();
                let dl = ivs[l].1.clone();
                if &cp - &cl <= eps * (&dl - &cl) {
                    idx = l;
                } else {
                    ivs[l] = (cl, cp);
                    idx = l + 1;
                }
            }
            None => idx = (0..k).filter(|&l| ivs[l].1 < cp).count(),
        }
    }
    out.sort_by(|x, y| x.c.cmp(&y.c));
    let covered: Q = out.iter().map(|i| &i.d - &i.c).sum();
    let dec = IntervalDecomposition { a: Q::zero(), b: m.clone(), eps: eps.clone(), intervals: out, leftover: &m - covered, depth: base.depth };
    dec.verify(f, Some(s))?;
    let bound = kaufman_leftover_bound(s, t, eps, &m);
    check(dec.leftover <= bound, || format!("leftover {} exceeds {}", dec.leftover, bound))?;
    Ok(dec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleKind {
    Linear,
    Superlinear,
    Gap,
}

/// Scales `Δ^{e_0} = 1 > Δ^{e_1} > … > Δ^{e_n} = δ` with the structured/bad
/// split and exponents `t_j`.
#[derive(Clone, Debug)]
pub struct ScaleDecomposition {
    pub base_bits: u32,
    pub m: u32,
    pub s: Rat,
    pub t: Rat,
    pub eps: Rat,
    /// Parameter handed to [`kaufman_decompose`].
    pub eps_kaufman: Q,
    /// `e_0 = 0 < e_1 < … < e_n = m`.
    pub levels: Vec<u32>,
    /// Kind of step `j = 1..=n` (index `j − 1`).
    pub kinds: Vec<ScaleKind>,
    /// `t_j` for structured steps.
    pub exponents: Vec<Option<Rat>>,
    pub tau: Rat,
    pub kaufman: IntervalDecomposition,
    /// Intervals that vanished when endpoints were rounded to integers.
    pub dropped: usize,
}

impl ScaleDecomposition {
    pub fn n(&self) -> usize {
        self.kinds.len()
    }

    /// `Δ_{j−1}/Δ_j = Δ^{-len(j)}`, `j` one-based.
    pub fn len(&self, j: usize) -> u32 {
        self.levels[j] - self.levels[j - 1]
    }

    pub fn is_structured(&self, j: usize) -> bool {
        self.kinds[j - 1] != ScaleKind::Gap
    }

    /// `Σ_{j∈𝒮} len(j)·t_j`, the exponent of `Π(Δ_{j−1}/Δ_j)^{t_j}` in units of `log(1/Δ)`.
    pub fn structured_mass(&self) -> Rat {
        (1..=self.n())
            .filter_map(|j| self.exponents[j - 1].map(|t| t * Rat::from_integer(self.len(j) as i128)))
            .sum()
    }

    pub fn bad_length(&self) -> u32 {
        (1..=self.n()).filter(|&j| !self.is_structured(j)).map(|j| self.len(j)).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<_> = (1..=self.n())
            .map(|j| {
                json!({"j": j, "from": self.levels[j - 1], "to": self.levels[j],
                       "kind": format!("{:?}", self.kinds[j - 1]).to_lowercase(),
                       "t": self.exponents[j - 1].map(|t| t.to_string())})
            })
            .collect();
        json!({"base_bits": self.base_bits, "m": self.m, "s": self.s.to_string(), "t": self.t.to_string(),
               "eps": self.eps.to_string(), "eps_kaufman": self.eps_kaufman.to_string(), "tau": self.tau.to_string(),
               "dropped": self.dropped, "steps": steps, "kaufman": self.kaufman.to_json()})
    }
}

/// Constant allowed per window on top of `(Δ_{j−1}/Δ_j)^ε`: rounding both
/// ends to integers costs at most `Δ^{-2}` each and dyadic levels between
/// multiples of `Δ` cost at most `Δ^{-1}`.
pub fn window_allowance(base_bits: u32) -> Monomial {
    Monomial::pow2(Rat::from_integer(5 * base_bits as i128))
}

/// Window statistics of `S_Q(P ∩ Q)` over all occupied `Q` at level `lo`,
/// with `P` covered at level `hi`: the largest spread constant for exponent
/// `u` and the largest cover at the half-way level.
pub fn window_stats(covers: &[SquareFamily], lo: u32, hi: u32, u: Rat) -> (Monomial, u64) {
    let cells = covers[hi as usize].cells();
    let totals: HashMap<DyadicSquare, u64> = {
        let mut m = HashMap::new();
        for c in cells {
            *m.entry(c.ancestor(lo)).or_insert(0u64) += 1;
        }
        m
    };
    let per_level: Vec<(u64, u64)> = par::map_range((hi - lo + 1) as usize, |r| {
        let level = lo + r as u32;
        let mut counts: HashMap<DyadicSquare, u64> = HashMap::new();
        for c in cells {
            *counts.entry(c.ancestor(level)).or_insert(0) += 1;
        }
        let mut best = (0u64, 1u64);
        for (a, n) in counts {
            let tot = totals[&a.ancestor(lo)];
            if (n as u128) * (best.1 as u128) > (best.0 as u128) * (tot as u128) {
                best = (n, tot);
            }
        }
        best
    });
    let c = per_level
        .iter()
        .enumerate()
        .map(|(r, (n, tot))| Monomial::ratio(*n as u128, *tot as u128).mul(&Monomial::pow2(u * Rat::from_integer(r as i128))))
        .max()
        .unwrap();
    let mid = lo + (hi - lo) / 2;
    let half = child_counts(&covers[mid as usize], lo).values().copied().max().unwrap_or(0);
    (c, half)
}

#[derive(Clone, Debug, Default)]
pub struct MultiscaleReport {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub iv: bool,
    pub failures: Vec<String>,
}

impl MultiscaleReport {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii && self.iv
    }
}

/// Re-checks the four conclusions on the set itself.
pub fn verify_multiscale(p: &SquareFamily, dec: &ScaleDecomposition) -> MultiscaleReport {
    let covers = level_covers(p);
    verify_with_covers(&covers, dec)
}

fn verify_with_covers(covers: &[SquareFamily], dec: &ScaleDecomposition) -> MultiscaleReport {
    let mut r = MultiscaleReport::default();
    let m = Rat::from_integer(dec.m as i128);
    let b = dec.base_bits;

    let bad = Rat::from_integer(dec.bad_length() as i128);
    let short = (1..=dec.n()).find(|&j| dec.is_structured(j) && Rat::from_integer(dec.len(j) as i128) < dec.tau * m);
    r.i = bad <= dec.eps * m && short.is_none() && dec.tau > Rat::zero() && dec.tau <= dec.eps;
    if !r.i {
        r.failures.push(format!("(i): bad length {bad} vs εm = {}, short step {short:?}", dec.eps * m));
    }

    r.ii = true;
    let allowance = window_allowance(b);
    for j in 1..=dec.n() {
        let Some(tj) = dec.exponents[j - 1] else { continue };
        let len = Rat::from_integer((b * dec.len(j)) as i128);
        let (lo, hi) = (b * dec.levels[j - 1], b * dec.levels[j]);
        let (c, half) = window_stats(covers, lo, hi, tj);
        let budget = allowance.mul(&Monomial::pow2(dec.eps * len));
        if c > budget {
            r.ii = false;
            r.failures.push(format!("(ii): step {j} spread constant {c} exceeds {budget}"));
        }
        if tj > dec.s {
            let k = Monomial::int(half as u128);
            let cap = budget.mul(&Monomial::pow2(tj * len / Rat::from_integer(2)));
            if k > cap {
                r.ii = false;
                r.failures.push(format!("(ii): step {j} half cover {half} exceeds {cap}"));
            }
        }
    }

    let mass = dec.structured_mass();
    r.iii = mass >= m * (dec.t - dec.eps);
    if !r.iii {
        r.failures.push(format!("(iii): Σ len·t_j = {mass} < m(t − ε) = {}", m * (dec.t - dec.eps)));
    }

    r.iv = (2..=dec.n()).all(|j| dec.is_structured(j) || dec.is_structured(j - 1));
    if !r.iv {
        r.failures.push("(iv): two adjacent bad steps".into());
    }
    r
}

/// Parameter for the interval stage: `ε/(24(1 + 1/(t−s)))`, so the leftover
/// bound is `εm/3`.
pub fn kaufman_eps(s: Rat, t: Rat, eps: Rat) -> Q {
    let (s, t, eps) = (q_rat(&s), q_rat(&t), q_rat(&eps));
    eps / (q_int(24) * (Q::one() + Q::one() / (t - s)))
}

/// Scale selection for a `(Δ^i)`-uniform `(δ,t,δ^{-ε})`-set.
pub fn multiscale_decompose(p: &SquareFamily, s: Rat, t: Rat, base_bits: u32, eps: Rat) -> Result<ScaleDecomposition> {
    if !(s > Rat::zero() && s < t && t <= Rat::from_integer(2)) {
        return Err(Error::Invalid(format!("need 0 < s < t ≤ 2, got s = {s}, t = {t}")));
    }
    if !(eps > Rat::zero() && eps <= Rat::one()) {
        return Err(Error::Invalid(format!("ε = {eps} outside (0, 1]")));
    }
    let bf = branching_function(p, base_bits)?;
    let k = Rat::from_integer(p.k() as i128);
    let c = spread_certificate(p, t)?.c();
    let cap = Monomial::pow2(eps * k);
    check(c <= cap, || format!("input spread constant {c} exceeds δ^-ε = {cap}"))?;

    let m = bf.m();
    let f = bf.function();
    let (qt, qs) = (q_rat(&t), q_rat(&s));
    let qm = q_int(m as i64);
    let slack = (0..=m)
        .map(|i| (&qt * q_int(i as i64) - q_rat(&bf.value(i))) / &qm)
        .fold(Q::zero(), |a, x| a.max(x));
    let eps_k = kaufman_eps(s, t, eps).max(slack);
    let kaufman = kaufman_decompose(&f, &qs, &qt, &eps_k)?;

    // Round outward; an overlap moves the left window's end down instead.
    struct Window {
        a: i64,
        b: i64,
        d: Q,
        kind: ScaleKind,
        t: Rat,
    }
    let mut windows: Vec<Window> = Vec::new();
    let mut dropped = 0;
    for iv in &kaufman.intervals {
        let a = iv.c.floor().to_integer().to_i64().unwrap();
        while let Some(last) = windows.last_mut() {
            if last.b <= a {
                break;
            }
            last.b = last.d.floor().to_integer().to_i64().unwrap();
            if last.a >= last.b {
                windows.pop();
                dropped += 1;
            } else {
                break;
            }
        }
        let (kind, tj) = match &iv.tag {
            Tag::Linear(v) => (ScaleKind::Linear, q_floor_grid(v).min(Rat::from_integer(2))),
            Tag::Superlinear(_) => (ScaleKind::Superlinear, s),
        };
        windows.push(Window { a, b: iv.d.ceil().to_integer().to_i64().unwrap(), d: iv.d.clone(), kind, t: tj });
    }

    let mut levels = vec![0u32];
    let mut kinds = Vec::new();
    let mut exponents = Vec::new();
    for w in &windows {
        let e = *levels.last().unwrap() as i64;
        if w.a > e {
            levels.push(w.a as u32);
            kinds.push(ScaleKind::Gap);
            exponents.push(None);
        }
        levels.push(w.b as u32);
        kinds.push(w.kind);
        exponents.push(Some(w.t));
    }
    if *levels.last().unwrap() < m {
        levels.push(m);
        kinds.push(ScaleKind::Gap);
        exponents.push(None);
    }
    let min_len = windows.iter().map(|w| w.b - w.a).min();
    let tau = match min_len {
        Some(l) => eps.min(Rat::new(l as i128, m as i128)),
        None => eps,
    };
    let dec = ScaleDecomposition {
        base_bits,
        m,
        s,
        t,
        eps,
        eps_kaufman: eps_k,
        levels,
        kinds,
        exponents,
        tau,
        kaufman,
        dropped,
    };
    let report = verify_multiscale(p, &dec);
    check(report.all(), || report.failures.join("; "))?;
    Ok(dec)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleClasses {
    pub normal: Vec<usize>,
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    /// `Σ_{j∈𝒢} len(j)`; the good mass is `Δ^{-good_length}`.
    pub good_length: u32,
}

impl ScaleClasses {
    /// Exponent `e` with `Π_𝒢(Δ_{j−1}/Δ_j) = δ^{-e}`.
    pub fn good_exponent(&self, m: u32) -> Rat {
        Rat::new(self.good_length as i128, m as i128)
    }
}

/// Structured steps with `t_j ≥ t − ε_G/2` are good; fails unless
/// `Π_𝒢(Δ_{j−1}/Δ_j) ≥ δ^{-ε_G/8}`.
pub fn classify_scales(dec: &ScaleDecomposition, eps_g: Rat) -> Result<ScaleClasses> {
    let threshold = dec.t - eps_g / Rat::from_integer(2);
    let mut cls = ScaleClasses { normal: vec![], good: vec![], bad: vec![], good_length: 0 };
    for j in 1..=dec.n() {
        match dec.exponents[j - 1] {
            None => cls.bad.push(j),
            Some(tj) if tj >= threshold => {
                cls.good.push(j);
                cls.good_length += dec.len(j);
            }
            Some(_) => cls.normal.push(j),
        }
    }
    let need = eps_g * Rat::from_integer(dec.m as i128) / Rat::from_integer(8);
    check(Rat::from_integer(cls.good_length as i128) >= need, || {
        format!("good length {} below ε_G·m/8 = {need}: hypotheses violated", cls.good_length)
    })?;
    Ok(cls)
}

#[derive(Clone, Debug)]
pub struct Uniformized {
    pub set: SquareFamily,
    pub branching: Vec<u64>,
}

/// `(4k)^n·|P′| ≥ n^n·|P|`, i.e. `|P′| ≥ (4n⁻¹log₂(1/δ))^{-n}|P|`.
pub fn uniformization_bound_holds(k: u32, n: usize, before: usize, after: usize) -> bool {
    let lhs = num_traits::Pow::pow(BigUint::from(4 * k as u64), n) * BigUint::from(after);
    let rhs = num_traits::Pow::pow(BigUint::from(n as u64), n) * BigUint::from(before);
    lhs >= rhs
}

/// Uniform subset along `levels`, finest level first: at each level the
/// parents are bucketed by `2^j ≤ #children < 2^{j+1}`, the bucket of largest
/// mass wins (ties to smaller `j`), and each of its parents keeps its `N`
/// heaviest children (ties to the smaller cell), `N` the smallest count in
/// the bucket.
pub fn uniformize(p: &SquareFamily, levels: &[u32]) -> Result<Uniformized> {
    validate_levels(p, levels)?;
    if p.is_empty() {
        return Err(Error::Empty("uniformize an empty family"));
    }
    let mut cells: Vec<DyadicSquare> = p.cells().to_vec();
    let mut branching = vec![0u64; levels.len()];
    for i in (0..levels.len()).rev() {
        let hi = levels[i];
        let lo = if i == 0 { 0 } else { levels[i - 1] };
        let mut mass: BTreeMap<DyadicSquare, u64> = BTreeMap::new();
        for c in &cells {
            *mass.entry(c.ancestor(hi)).or_insert(0) += 1;
        }
        let mut parents: BTreeMap<DyadicSquare, Vec<(DyadicSquare, u64)>> = BTreeMap::new();
        for (child, w) in &mass {
            parents.entry(child.ancestor(lo)).or_default().push((*child, *w));
        }
        let mut bucket_mass: BTreeMap<u32, u64> = BTreeMap::new();
        for kids in parents.values() {
            let j = kids.len().ilog2();
            *bucket_mass.entry(j).or_insert(0) += kids.iter().map(|(_, w)| w).sum::<u64>();
        }
        let (&j, _) = bucket_mass
            .iter()
            .fold(None, |best: Option<(&u32, &u64)>, (j, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((j, w)),
            })
            .unwrap();
        // The smallest count in the class is at least 2^j; keeping that many
        // leaves already-uniform levels untouched.
        let n = parents.values().map(|k| k.len()).filter(|&c| c.ilog2() == j).min().unwrap();
        let mut keep: std::collections::HashSet<DyadicSquare> = std::collections::HashSet::new();
        for kids in parents.values_mut() {
            if kids.len().ilog2() != j {
                continue;
            }
            kids.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
            keep.extend(kids.iter().take(n).map(|(c, _)| *c));
        }
        cells.retain(|c| keep.contains(&c.ancestor(hi)));
        branching[i] = n as u64;
    }
    let set = SquareFamily::from_cells(p.scale(), cells);
    let found = is_uniform(&set, levels)?;
    check(found == branching, || format!("output branching {found:?} differs from selected {branching:?}"))?;
    check(uniformization_bound_holds(p.k(), levels.len(), p.len(), set.len()), || {
        format!("|P′| = {} too small against |P| = {} with n = {}", set.len(), p.len(), levels.len())
    })?;
    Ok(Uniformized { set, branching })
}

/// Certified structure of one window `j` (one-based) of a uniform set.
#[derive(Clone, Debug)]
pub struct WindowClaim {
    pub j: usize,
    pub exponent: Rat,
    /// Spread constant of every `S_Q(P ∩ Q)`.
    pub c: Monomial,
    /// Half-way cover bound for regular windows.
    pub half_cover: Option<Monomial>,
}

#[derive(Clone, Debug)]
pub struct UniformRefinement {
    pub set: SquareFamily,
    pub branching: Vec<u64>,
    pub original_branching: Vec<u64>,
    /// `M = L·(4 log₂(1/δ))^n`.
    pub m: Monomial,
}

fn check_claims(p: &SquareFamily, levels: &[u32], claims: &[WindowClaim], factor: &Monomial) -> Result<()> {
    let covers = level_covers(p);
    for cl in claims {
        if cl.j == 0 || cl.j > levels.len() {
            return Err(Error::Invalid(format!("window {} outside 1..={}", cl.j, levels.len())));
        }
        let lo = if cl.j == 1 { 0 } else { levels[cl.j - 2] };
        let (c, half) = window_stats(&covers, lo, levels[cl.j - 1], cl.exponent);
        let cap = cl.c.mul(factor);
        check(c <= cap, || format!("window {} spread constant {c} exceeds {cap}", cl.j))?;
        if let Some(k) = &cl.half_cover {
            let cap = k.mul(factor);
            check(Monomial::int(half as u128) <= cap, || format!("window {} half cover {half} exceeds {cap}", cl.j))?;
        }
    }
    Ok(())
}

/// Uniform `P″ ⊆ P′` whose branching numbers and window certificates lose at
/// most the factor `M`.
pub fn uniform_refine(p: &SquareFamily, sub: &SquareFamily, levels: &[u32], claims: &[WindowClaim]) -> Result<UniformRefinement> {
    let original = is_uniform(p, levels)?;
    if !sub.is_subset(p) {
        return Err(Error::Invalid("refinement input is not contained in P".into()));
    }
    if sub.is_empty() {
        return Err(Error::Empty("uniform refinement of an empty subset"));
    }
    check_claims(p, levels, claims, &Monomial::one()).map_err(|e| Error::Invalid(format!("claims do not hold on P: {e}")))?;
    let n = levels.len() as u32;
    let m = Monomial::ratio(p.len() as u128, sub.len() as u128).mul(&Monomial::int((4 * p.k() as u128).pow(n)));
    let u = uniformize(sub, levels)?;
    for (j, (a, b)) in u.branching.iter().zip(&original).enumerate() {
        check(Monomial::int(*a as u128).mul(&m) >= Monomial::int(*b as u128), || {
            format!("level {}: N″ = {a} below N/M with N = {b}", j + 1)
        })?;
    }
    check_claims(&u.set, levels, claims, &m)?;
    Ok(UniformRefinement { set: u.set, branching: u.branching, original_branching: original, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{full_grid, DyadicSquare};
    use crate::exact::{exponent, rat};
    use crate::generators::{random_frostman, uniform_tree};
    use proptest::prelude::*;

    fn qr(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    fn roof(m: i64) -> PiecewiseLinear {
        PiecewiseLinear::new(vec![q_int(0), qr(m, 2), q_int(m)], vec![q_int(0), q_int(m), q_int(m)]).unwrap()
    }

    #[test]
    fn log_proxy_is_floor() {
        assert_eq!(log2_proxy(1), rat(0, 1));
        assert_eq!(log2_proxy(16), rat(4, 1));
        for n in [3u64, 5, 7, 11, 13] {
            let exact = (n as f64).log2() * 65536.0;
            assert_eq!(*log2_proxy(n).numer() * (65536 / *log2_proxy(n).denom()), exact.floor() as i128);
        }
    }

    #[test]
    fn branching_examples() {
        let f = branching_function(&full_grid(4), 2).unwrap();
        assert_eq!(f.values, vec![rat(0, 1), rat(2, 1), rat(4, 1)]);
        let row = SquareFamily::from_cells(Scale::new(4), (0..16).map(|i| DyadicSquare::new(4, i, 3)).collect());
        assert_eq!(branching_function(&row, 2).unwrap().values, vec![rat(0, 1), rat(1, 1), rat(2, 1)]);
        let p = uniform_tree::<DyadicSquare>(2, &[2, 4, 2, 4], 7).unwrap();
        let f = branching_function(&p, 2).unwrap();
        assert_eq!(f.branching, vec![2, 4, 2, 4]);
        assert_eq!(f.values, vec![rat(0, 1), rat(1, 2), rat(3, 2), rat(2, 1), rat(3, 1)]);
    }

    #[test]
    fn non_uniform_reports_witness() {
        let p = SquareFamily::from_cells(
            Scale::new(2),
            vec![DyadicSquare::new(2, 0, 0), DyadicSquare::new(2, 1, 0), DyadicSquare::new(2, 3, 3)],
        );
        let e = branching_function(&p, 1).unwrap_err().to_string();
        assert!(e.contains("not uniform"), "{e}");
    }

    #[test]
    fn linearity_examples() {
        let affine = PiecewiseLinear::from_integer_values((0..5).map(|i| qr(3 * i, 2)).collect()).unwrap();
        assert!(affine.is_eps_linear(&q_int(0), &q_int(4), &Q::zero()).unwrap());
        let r = roof(8);
        assert!(r.is_eps_linear(&q_int(0), &q_int(8), &qr(1, 2)).unwrap());
        assert!(!r.is_eps_linear(&q_int(0), &q_int(8), &qr(127, 256)).unwrap());
        assert!(r.is_eps_superlinear(&q_int(0), &q_int(8), &Q::zero()).unwrap());
        let convex = PiecewiseLinear::from_integer_values(vec![q_int(0), q_int(0), q_int(2)]).unwrap();
        assert!(!convex.is_eps_superlinear(&q_int(0), &q_int(2), &Q::zero()).unwrap());
        assert!(r.slope(&q_int(2), &q_int(2)).is_err());
    }

    #[test]
    fn linear_decompose_examples() {
        let affine = PiecewiseLinear::from_integer_values((0..7).map(q_int).collect()).unwrap();
        let d = linear_decompose(&affine, &qr(1, 10)).unwrap();
        assert_eq!(d.intervals.len(), 1);
        let d = linear_decompose(&roof(8), &qr(1, 4)).unwrap();
        let ends: Vec<_> = d.intervals.iter().map(|i| (i.c.clone(), i.d.clone())).collect();
        assert_eq!(ends, vec![(q_int(0), q_int(4)), (q_int(4), q_int(8))]);
        assert!(d.leftover.is_zero());
        d.verify(&roof(8), None).unwrap();
    }

    #[test]
    fn kaufman_examples() {
        let (s, t, eps) = (qr(1, 2), q_int(1), qr(1, 20));
        let line = PiecewiseLinear::from_integer_values((0..9).map(q_int).collect()).unwrap();
        let d = kaufman_decompose(&line, &s, &t, &eps).unwrap();
        assert_eq!(d.intervals.len(), 1);
        assert_eq!(d.intervals[0].tag, Tag::Linear(q_int(1)));
        let half = PiecewiseLinear::from_integer_values((0..9).map(|i| qr(i, 2)).collect()).unwrap();
        assert!(kaufman_decompose(&half, &s, &t, &eps).is_err(), "hypothesis f ≥ tx − εm must fail");
        let d = kaufman_decompose(&half, &s, &(&s + qr(1, 20)), &eps).unwrap();
        assert_eq!(d.intervals.len(), 1);
        assert_eq!(d.intervals[0].tag, Tag::Linear(qr(1, 2)));

        // Roof: 2c′ + s(m − c′) = m at c′ = m/3.
        let d = kaufman_decompose(&roof(12), &s, &t, &eps).unwrap();
        assert_eq!(d.intervals.len(), 2);
        assert_eq!((d.intervals[0].c.clone(), d.intervals[0].d.clone()), (q_int(0), q_int(4)));
        assert_eq!(d.intervals[0].tag, Tag::Linear(q_int(2)));
        assert_eq!((d.intervals[1].c.clone(), d.intervals[1].d.clone()), (q_int(4), q_int(12)));
        assert_eq!(d.intervals[1].tag, Tag::Superlinear(s));
    }

    fn pl_strategy() -> impl Strategy<Value = PiecewiseLinear> {
        proptest::collection::vec(0i64..=8, 2..17).prop_map(|slopes| {
            let mut ys = vec![q_int(0)];
            for v in slopes {
                let last = ys.last().unwrap().clone();
                ys.push(last + qr(v, 4));
            }
            PiecewiseLinear::from_integer_values(ys).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn linear_pieces_reverify(f in pl_strategy(), e in 1i64..8) {
            let d = linear_decompose(&f, &qr(e, 16)).unwrap();
            d.verify(&f, None).unwrap();
            prop_assert!(d.leftover <= qr(e, 16) * f.end());
        }

        #[test]
        fn kaufman_tags_reverify(f in pl_strategy(), si in 1i64..7) {
            let s = qr(si, 8);
            let t = &s + qr(1, 4);
            let m = f.end().clone();
            let slack = f.xs().iter().zip(f.ys()).map(|(x, y)| (&t * x - y) / &m).fold(qr(1, 64), |a, v| a.max(v));
            prop_assume!(slack < qr(1, 4));
            let d = kaufman_decompose(&f, &s, &t, &slack).unwrap();
            d.verify(&f, Some(&s)).unwrap();
        }
    }

    #[test]
    fn multiscale_full_grid() {
        let p = full_grid(8);
        let d = multiscale_decompose(&p, exponent(1.8), rat(2, 1), 2, rat(1, 4)).unwrap();
        assert_eq!(d.levels, vec![0, 4]);
        assert_eq!(d.exponents, vec![Some(rat(2, 1))]);
    }

    #[test]
    fn multiscale_two_regimes() {
        let p = uniform_tree::<DyadicSquare>(2, &[16, 16, 1, 1], 3).unwrap();
        let d = multiscale_decompose(&p, rat(1, 2), rat(1, 1), 2, rat(1, 4)).unwrap();
        assert_eq!(d.kinds, vec![ScaleKind::Linear, ScaleKind::Superlinear]);
        assert_eq!(d.levels, vec![0, 1, 4]);
        assert_eq!(d.exponents, vec![Some(rat(2, 1)), Some(rat(1, 2))]);
        let cls = classify_scales(&d, rat(1, 2)).unwrap();
        assert_eq!(cls.good, vec![1]);
        assert_eq!(cls.normal, vec![2]);
        assert!(cls.good_exponent(d.m) >= rat(1, 16));
    }

    #[test]
    fn classify_all_at_t_and_all_at_s() {
        let p = uniform_tree::<DyadicSquare>(2, &[4, 4, 4, 4], 5).unwrap();
        let d = multiscale_decompose(&p, rat(1, 2), rat(1, 1), 2, rat(1, 4)).unwrap();
        let cls = classify_scales(&d, rat(1, 2)).unwrap();
        assert_eq!(cls.good.len(), d.n());
        let mut low = d.clone();
        for e in low.exponents.iter_mut().flatten() {
            *e = rat(1, 2);
        }
        assert!(classify_scales(&low, rat(1, 2)).is_err());
    }

    #[test]
    fn uniformize_examples() {
        let p = uniform_tree::<DyadicSquare>(2, &[3, 5, 2], 9).unwrap();
        let u = uniformize(&p, &[2, 4, 6]).unwrap();
        assert_eq!(u.set, p);
        assert_eq!(u.branching, vec![3, 5, 2]);

        let mut cells = full_grid(4).into_cells();
        cells.retain(|c| *c != DyadicSquare::new(4, 0, 0));
        let p = SquareFamily::from_cells(Scale::new(4), cells);
        let u = uniformize(&p, &[2, 4]).unwrap();
        // The damaged parent (15 children) loses its bucket to the 15 full
        // parents, which leaves 15 top cells.
        assert_eq!(u.branching, vec![15, 16]);
        assert_eq!(u.set.len(), 240);

        for seed in 0..5 {
            let p = random_frostman::<DyadicSquare>(8, rat(1, 1), seed).unwrap();
            let u = uniformize(&p, &[2, 4, 6, 8]).unwrap();
            assert!(uniformization_bound_holds(8, 4, p.len(), u.set.len()));
        }
        assert!(uniformize(&p, &[4, 2]).is_err());
    }

    #[test]
    fn uniform_refine_examples() {
        let p = uniform_tree::<DyadicSquare>(2, &[4, 4, 4], 2).unwrap();
        let levels = [2, 4, 6];
        let claims = vec![WindowClaim { j: 2, exponent: rat(1, 1), c: Monomial::int(4), half_cover: None }];
        let r = uniform_refine(&p, &p, &levels, &claims).unwrap();
        assert_eq!(r.set, p);

        let top = p.cover_at(Scale::new(2)).unwrap().cells()[0];
        let sub = SquareFamily::from_cells(p.scale(), p.iter().filter(|c| !top.contains(c)).copied().collect());
        let r = uniform_refine(&p, &sub, &levels, &claims).unwrap();
        assert_eq!(r.branching, vec![3, 4, 4]);
        let outside = *full_grid(6).iter().find(|c| !p.contains(c)).unwrap();
        let bad = SquareFamily::from_cells(p.scale(), vec![outside]);
        assert!(uniform_refine(&p, &bad, &levels, &claims).is_err());
    }
}
