//! Dyadic tubes under point-line duality.
//!
//! The tube with parameter square `p` is the union of the lines `𝐃(a,b)` over
//! `(a,b) ∈ p`. With [`Convention::MainText`] a parameter `(a,b)` is the line
//! `y = ax + b`; with [`Convention::Appendix`] it is `x = ay + b`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::{Cell, DyadicSquare, Family, Scale, SquareFamily};
use crate::exact::Rat;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// `(a,b) ↦ {y = ax + b}`.
    MainText,
    /// `(a,b) ↦ {x = ay + b}`.
    Appendix,
}

impl Convention {
    pub fn tag(&self) -> &'static str {
        match self {
            Convention::MainText => "main",
            Convention::Appendix => "appendix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(Convention::MainText),
            "appendix" => Ok(Convention::Appendix),
            _ => Err(Error::Parse(format!("unknown convention {s:?}"))),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A line given by its slope parameter and intercept.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Line {
    pub slope: Rat,
    pub intercept: Rat,
    pub convention: Convention,
}

impl Line {
    /// Whether `(x, y)` lies on the line.
    pub fn contains(&self, x: Rat, y: Rat) -> bool {
        match self.convention {
            Convention::MainText => y == self.slope * x + self.intercept,
            Convention::Appendix => x == self.slope * y + self.intercept,
        }
    }
}

/// `𝐃(a,b)`.
pub fn dual_line(a: Rat, b: Rat, convention: Convention) -> Line {
    Line { slope: a, intercept: b, convention }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicTube {
    pub param: DyadicSquare,
    pub convention: Convention,
}

impl DyadicTube {
    /// Rejects slopes outside `[-1, 1)`.
    pub fn new(param: DyadicSquare, convention: Convention) -> Result<Self> {
        let n = 1i64 << param.k;
        if param.ix < -n || param.ix >= n {
            return Err(Error::Invalid(format!("slope index {} outside [-1,1) at scale 2^-{}", param.ix, param.k)));
        }
        Ok(DyadicTube { param, convention })
    }

    pub fn main(k: u32, ia: i64, ib: i64) -> Self {
        Self::new(DyadicSquare::new(k, ia, ib), Convention::MainText).unwrap()
    }

    pub fn appendix(k: u32, ia: i64, ib: i64) -> Self {
        Self::new(DyadicSquare::new(k, ia, ib), Convention::Appendix).unwrap()
    }

    pub fn k(&self) -> u32 {
        self.param.k
    }

    /// Index of `σ(T)` on the `δ`-grid.
    pub fn slope_index(&self) -> i64 {
        self.param.ix
    }

    /// `σ(T)`, the left end of the slope interval.
    pub fn slope(&self) -> Rat {
        Rat::new(self.param.ix as i128, 1i128 << self.param.k)
    }

    /// The coarser tube `𝐃(p')` with `p ⊂ p'`.
    pub fn ancestor(&self, k: u32) -> Self {
        DyadicTube { param: self.param.ancestor(k), convention: self.convention }
    }

    pub fn contains(&self, o: &DyadicTube) -> bool {
        self.convention == o.convention && self.param.contains(&o.param)
    }
}

/// Tubes of one scale and one convention.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TubeFamily {
    convention: Convention,
    params: SquareFamily,
}

#[derive(Serialize, Deserialize)]
struct Header {
    scale_exponent: u32,
    convention: Convention,
    count: usize,
}

impl TubeFamily {
    pub fn new(scale: Scale, convention: Convention, tubes: Vec<DyadicTube>) -> Result<Self> {
        if let Some(t) = tubes.iter().find(|t| t.convention != convention) {
            return Err(Error::Invalid(format!("tube {t:?} mixes conventions")));
        }
        let params = Family::new(scale, tubes.into_iter().map(|t| t.param).collect())?;
        Ok(TubeFamily { convention, params })
    }

    pub fn from_params(convention: Convention, params: SquareFamily) -> Result<Self> {
        let n = 1i64 << params.k();
        if let Some(p) = params.iter().find(|p| p.ix < -n || p.ix >= n) {
            return Err(Error::Invalid(format!("slope of {p:?} outside [-1,1)")));
        }
        Ok(TubeFamily { convention, params })
    }

    pub fn empty(scale: Scale, convention: Convention) -> Self {
        TubeFamily { convention, params: Family::empty(scale) }
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn scale(&self) -> Scale {
        self.params.scale()
    }

    pub fn k(&self) -> u32 {
        self.params.k()
    }

    pub fn params(&self) -> &SquareFamily {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, t: &DyadicTube) -> bool {
        t.convention == self.convention && self.params.contains(&t.param)
    }

    pub fn iter(&self) -> impl Iterator<Item = DyadicTube> + '_ {
        let c = self.convention;
        self.params.iter().map(move |p| DyadicTube { param: *p, convention: c })
    }

    pub fn to_vec(&self) -> Vec<DyadicTube> {
        self.iter().collect()
    }

    /// `σ(𝒯)` as a family of slope intervals.
    pub fn slopes(&self) -> crate::dyadic::IntervalFamily {
        Family::from_cells(self.scale(), self.params.iter().map(|p| p.x_interval()).collect())
    }

    /// The thick tubes `𝒯^Δ(𝒯)` containing members of the family.
    pub fn cover_at(&self, coarser: Scale) -> Result<TubeFamily> {
        Ok(TubeFamily { convention: self.convention, params: self.params.cover_at(coarser)? })
    }

    pub fn to_text(&self) -> String {
        let header = Header { scale_exponent: self.k(), convention: self.convention, count: self.len() };
        let mut out = serde_json::to_string(&header).unwrap();
        out.push('\n');
        for p in self.params.iter() {
            out.push_str(&format!("{} {} {} {}\n", p.k, p.ix, p.iy, self.convention.tag()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or(Error::Parse("missing header".into()))?;
        let header: Header = serde_json::from_str(head).map_err(|e| Error::Parse(e.to_string()))?;
        let mut tubes = Vec::with_capacity(header.count);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("tube line {line:?} needs 4 fields")));
            }
            let num = |s: &str| s.parse::<i64>().map_err(|e| Error::Parse(format!("{line:?}: {e}")));
            let k = u32::try_from(num(f[0])?).map_err(|_| Error::Parse(format!("bad scale in {line:?}")))?;
            let conv = Convention::parse(f[3])?;
            tubes.push(DyadicTube::new(DyadicSquare::new(k, num(f[1])?, num(f[2])?), conv)?);
        }
        if tubes.len() != header.count {
            return Err(Error::Parse(format!("header count {} but {} tubes", header.count, tubes.len())));
        }
        TubeFamily::new(Scale::new(header.scale_exponent), header.convention, tubes)
    }
}

/// Whether some line of `T` passes through the square `p`.
///
/// For the main convention the values of `y − b` over `p × T.param` fill the
/// open interval `(y₀ − b₁, y₁ − b₀)`, and `a·x` ranges over an interval whose
/// closure has its extremes at the corners; the sets meet iff the corner
/// extremes straddle the open interval. All quantities are integers after
/// scaling by `2^{k_T + k_p}`.
pub fn tube_meets_square(t: &DyadicTube, p: &DyadicSquare) -> bool {
    let (kt, kp) = (t.param.k, p.k);
    let (a0, b0) = (t.param.ix as i128, t.param.iy as i128);
    // (u, v) = (x, y) for the main convention, (y, x) for the appendix one.
    let (u0, v0) = match t.convention {
        Convention::MainText => (p.ix as i128, p.iy as i128),
        Convention::Appendix => (p.iy as i128, p.ix as i128),
    };
    let corners = [a0 * u0, a0 * (u0 + 1), (a0 + 1) * u0, (a0 + 1) * (u0 + 1)];
    let lo = *corners.iter().min().unwrap();
    let hi = *corners.iter().max().unwrap();
    let upper = ((v0 + 1) << kt) - (b0 << kp);
    let lower = (v0 << kt) - ((b0 + 1) << kp);
    lo < upper && hi > lower
}

/// Whether the point `(x, y)` lies on some line of `T`.
pub fn tube_contains_point(t: &DyadicTube, x: Rat, y: Rat) -> bool {
    let d = Rat::new(1, 1i128 << t.param.k);
    let a0 = Rat::from_integer(t.param.ix as i128) * d;
    let b0 = Rat::from_integer(t.param.iy as i128) * d;
    let (a1, b1) = (a0 + d, b0 + d);
    let (u, v) = match t.convention {
        Convention::MainText => (x, y),
        Convention::Appendix => (y, x),
    };
    // b(a) = v − a·u must land in [b₀, b₁) for some a ∈ [a₀, a₁).
    let zero = Rat::from_integer(0);
    if u == zero {
        v >= b0 && v < b1
    } else if u > zero {
        // b ranges over (v − a₁u, v − a₀u].
        v - a1 * u < b1 && v - a0 * u >= b0
    } else {
        // b ranges over [v − a₀u, v − a₁u).
        v - a0 * u < b1 && v - a1 * u > b0
    }
}

/// `𝐃*(T) = {(−a, b) : (a,b) ∈ p}`, re-canonicalised to a half-open dyadic
/// square.
pub fn dual_star(t: &DyadicTube) -> DyadicSquare {
    DyadicSquare::new(t.param.k, -t.param.ix - 1, t.param.iy)
}

/// Tubes through `p` grouped by slope index.
#[derive(Clone, Debug)]
pub struct SlopeFibers {
    pub fibers: BTreeMap<i64, Vec<DyadicTube>>,
    pub max_fiber: usize,
}

pub fn slope_fibers(tubes: &TubeFamily, p: &DyadicSquare) -> Result<SlopeFibers> {
    let mut fibers: BTreeMap<i64, Vec<DyadicTube>> = BTreeMap::new();
    for t in tubes.iter() {
        if !tube_meets_square(&t, p) {
            return Err(Error::Invalid(format!("tube {t:?} does not meet {p:?}")));
        }
        fibers.entry(t.slope_index()).or_default().push(t);
    }
    let max_fiber = fibers.values().map(Vec::len).max().unwrap_or(0);
    Ok(SlopeFibers { fibers, max_fiber })
}

/// Upper bound on the size of [`rescale_tube_cover`].
pub const RESCALE_COVER_MAX: usize = 4;

/// Tubes at scale `δ/Δ` covering `S_Q(T)`.
///
/// `S_Q` maps the line `v = a·u + b` to `v' = a·u' + (a·u₀ + b − v₀)/Δ` where
/// `(u₀, v₀)` is the corner of `Q` in the convention's coordinates, so the
/// slope interval is kept and the intercepts shift by an amount that varies
/// by less than `|u₀|/Δ` grid steps across the slope interval.
pub fn rescale_tube_cover(t: &DyadicTube, q: &DyadicSquare) -> Result<Vec<DyadicTube>> {
    let (kt, kq) = (t.param.k, q.k);
    if kq > kt {
        return Err(Error::Scale(format!("Q at 2^-{kq} is finer than the tube at 2^-{kt}")));
    }
    let kn = kt - kq;
    let (u0, v0) = match t.convention {
        Convention::MainText => (q.ix as i128, q.iy as i128),
        Convention::Appendix => (q.iy as i128, q.ix as i128),
    };
    let (a, b) = (t.param.ix as i128, t.param.iy as i128);
    // Intercept of the image line in units of 2^{-kn}, times 2^{kq}.
    let num = |aa: i128| aa * u0 + (b << kq) - (v0 << kt);
    let (n0, n1) = (num(a), num(a + 1));
    let (lo, hi) = (n0.min(n1), n0.max(n1));
    let first = lo.div_euclid(1 << kq);
    let last = -((-hi).div_euclid(1 << kq));
    let slope = a.div_euclid(1 << kq) as i64;
    let out: Vec<DyadicTube> = (first..=last)
        .map(|ib| DyadicTube { param: DyadicSquare::new(kn, slope, ib as i64), convention: t.convention })
        .collect();
    if out.len() > RESCALE_COVER_MAX {
        return Err(Error::Check(format!(
            "rescaled cover of {t:?} in {q:?} needs {} tubes, more than {RESCALE_COVER_MAX}",
            out.len()
        )));
    }
    Ok(out)
}
