//! Dyadic squares and intervals with integer indices.
//!
//! A cell at scale `δ = 2⁻ᵏ` with index `i` is the half-open interval
//! `[iδ, (i+1)δ)`. Ancestors are arithmetic right shifts, which floor
//! correctly for negative indices.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dyadic scale `δ = 2⁻ᵏ`, ordered by the length it represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    pub k: u32,
}

impl Scale {
    pub const UNIT: Scale = Scale { k: 0 };

    pub fn new(k: u32) -> Self {
        Scale { k }
    }

    pub fn value(&self) -> f64 {
        (-(self.k as f64)).exp2()
    }

    /// `2^k = 1/δ`.
    pub fn inverse(&self) -> u64 {
        1u64 << self.k
    }
}

impl PartialOrd for Scale {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Scale {
    fn cmp(&self, o: &Self) -> Ordering {
        o.k.cmp(&self.k)
    }
}

/// Common behaviour of dyadic squares and intervals.
pub trait Cell: Copy + Ord + Hash + Debug + Send + Sync + 'static {
    const DIM: u32;
    fn k(&self) -> u32;
    fn ancestor(&self, k: u32) -> Self;
    fn children(&self) -> Vec<Self>;
    fn coords(&self) -> Vec<i64>;
    fn from_coords(k: u32, c: &[i64]) -> Result<Self>;

    fn contains(&self, o: &Self) -> bool {
        o.k() >= self.k() && o.ancestor(self.k()) == *self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub k: u32,
    pub i: i64,
}

impl DyadicInterval {
    pub fn new(k: u32, i: i64) -> Self {
        DyadicInterval { k, i }
    }

    pub fn scale(&self) -> Scale {
        Scale::new(self.k)
    }
}

impl Cell for DyadicInterval {
    const DIM: u32 = 1;

    fn k(&self) -> u32 {
        self.k
    }

    fn ancestor(&self, k: u32) -> Self {
        assert!(k <= self.k, "ancestor must be coarser");
        DyadicInterval { k, i: self.i >> (self.k - k) }
    }

    fn children(&self) -> Vec<Self> {
        (0..2).map(|d| DyadicInterval { k: self.k + 1, i: 2 * self.i + d }).collect()
    }

    fn coords(&self) -> Vec<i64> {
        vec![self.i]
    }

    fn from_coords(k: u32, c: &[i64]) -> Result<Self> {
        match c {
            [i] => Ok(DyadicInterval { k, i: *i }),
            _ => Err(Error::Parse(format!("interval needs one index, got {}", c.len()))),
        }
    }
}

/// Square `[ix·δ, (ix+1)δ) × [iy·δ, (iy+1)δ)` with `δ = 2⁻ᵏ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub k: u32,
    pub ix: i64,
    pub iy: i64,
}

impl DyadicSquare {
    pub fn new(k: u32, ix: i64, iy: i64) -> Self {
        DyadicSquare { k, ix, iy }
    }

    pub fn scale(&self) -> Scale {
        Scale::new(self.k)
    }

    pub fn x_interval(&self) -> DyadicInterval {
        DyadicInterval::new(self.k, self.ix)
    }

    pub fn y_interval(&self) -> DyadicInterval {
        DyadicInterval::new(self.k, self.iy)
    }
}

impl Cell for DyadicSquare {
    const DIM: u32 = 2;

    fn k(&self) -> u32 {
        self.k
    }

    fn ancestor(&self, k: u32) -> Self {
        assert!(k <= self.k, "ancestor must be coarser");
        let d = self.k - k;
        DyadicSquare { k, ix: self.ix >> d, iy: self.iy >> d }
    }

    fn children(&self) -> Vec<Self> {
        let mut v = Vec::with_capacity(4);
        for dx in 0..2 {
            for dy in 0..2 {
                v.push(DyadicSquare { k: self.k + 1, ix: 2 * self.ix + dx, iy: 2 * self.iy + dy });
            }
        }
        v
    }

    fn coords(&self) -> Vec<i64> {
        vec![self.ix, self.iy]
    }

    fn from_coords(k: u32, c: &[i64]) -> Result<Self> {
        match c {
            [x, y] => Ok(DyadicSquare { k, ix: *x, iy: *y }),
            _ => Err(Error::Parse(format!("square needs two indices, got {}", c.len()))),
        }
    }
}

/// Deduplicated, sorted set of cells at one scale.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Family<C: Cell> {
    scale: Scale,
    cells: Vec<C>,
}

pub type SquareFamily = Family<DyadicSquare>;
pub type IntervalFamily = Family<DyadicInterval>;

#[derive(Serialize, Deserialize)]
struct Header {
    scale_exponent: u32,
    count: usize,
}

impl<C: Cell> Family<C> {
    pub fn new(scale: Scale, mut cells: Vec<C>) -> Result<Self> {
        if let Some(c) = cells.iter().find(|c| c.k() != scale.k) {
            return Err(Error::Scale(format!("cell {c:?} is not at scale 2^-{}", scale.k)));
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(Family { scale, cells })
    }

    /// Builds from cells that all share one scale; panics otherwise.
    pub fn from_cells(scale: Scale, cells: Vec<C>) -> Self {
        Self::new(scale, cells).expect("cells at mixed scales")
    }

    pub fn empty(scale: Scale) -> Self {
        Family { scale, cells: Vec::new() }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn k(&self) -> u32 {
        self.scale.k
    }

    pub fn cells(&self) -> &[C] {
        &self.cells
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: &C) -> bool {
        self.cells.binary_search(c).is_ok()
    }

    pub fn into_cells(self) -> Vec<C> {
        self.cells
    }

    pub fn is_subset(&self, o: &Self) -> bool {
        self.scale == o.scale && self.cells.iter().all(|c| o.contains(c))
    }

    /// Cells of this family inside `q`.
    pub fn restrict(&self, q: &C) -> Self {
        Family { scale: self.scale, cells: self.cells.iter().filter(|c| q.contains(c)).copied().collect() }
    }

    /// `𝒟_Δ(𝒫)`: the coarser cells meeting the union of the family.
    pub fn cover_at(&self, coarser: Scale) -> Result<Self> {
        if coarser.k > self.scale.k {
            return Err(Error::Scale(format!(
                "cover scale 2^-{} is finer than family scale 2^-{}",
                coarser.k, self.scale.k
            )));
        }
        let mut v: Vec<C> = self.cells.iter().map(|c| c.ancestor(coarser.k)).collect();
        v.dedup();
        Ok(Family::from_cells(coarser, v))
    }

    /// `|𝒫|_Δ`.
    pub fn covering_number(&self, coarser: Scale) -> Result<usize> {
        Ok(self.cover_at(coarser)?.len())
    }

    pub fn to_text(&self) -> String {
        let header = Header { scale_exponent: self.scale.k, count: self.cells.len() };
        let mut out = serde_json::to_string(&header).unwrap();
        out.push('\n');
        for c in &self.cells {
            out.push_str(&c.k().to_string());
            for x in c.coords() {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or(Error::Parse("missing header".into()))?;
        let header: Header = serde_json::from_str(head).map_err(|e| Error::Parse(e.to_string()))?;
        let mut cells = Vec::with_capacity(header.count);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let nums: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|e| Error::Parse(format!("{line:?}: {e}"))))
                .collect::<Result<_>>()?;
            let (k, rest) = nums.split_first().ok_or(Error::Parse("empty line".into()))?;
            let k = u32::try_from(*k).map_err(|_| Error::Parse(format!("bad scale in {line:?}")))?;
            cells.push(C::from_coords(k, rest)?);
        }
        if cells.len() != header.count {
            return Err(Error::Parse(format!("header count {} but {} cells", header.count, cells.len())));
        }
        Family::new(Scale::new(header.scale_exponent), cells)
    }
}

impl<'a, C: Cell> IntoIterator for &'a Family<C> {
    type Item = &'a C;
    type IntoIter = std::slice::Iter<'a, C>;
    fn into_iter(self) -> Self::IntoIter {
        self.cells.iter()
    }
}

/// All squares of `𝒟_δ([0,1)²)`.
pub fn full_grid(k: u32) -> SquareFamily {
    let n = 1i64 << k;
    let mut v = Vec::with_capacity((n * n) as usize);
    for ix in 0..n {
        for iy in 0..n {
            v.push(DyadicSquare::new(k, ix, iy));
        }
    }
    Family { scale: Scale::new(k), cells: v }
}

/// All intervals of `𝒟_δ([0,1))`.
pub fn full_line(k: u32) -> IntervalFamily {
    Family { scale: Scale::new(k), cells: (0..1i64 << k).map(|i| DyadicInterval::new(k, i)).collect() }
}

/// The homothety `S_Q` mapping `Q` onto `[0,1)²`, applied to `𝒫 ∩ Q`.
pub fn renormalize(family: &SquareFamily, q: &DyadicSquare) -> Result<SquareFamily> {
    if family.k() < q.k {
        return Err(Error::Scale(format!(
            "family scale 2^-{} is coarser than Q at 2^-{}",
            family.k(),
            q.k
        )));
    }
    let d = family.k() - q.k;
    let cells = family
        .iter()
        .filter(|p| q.contains(p))
        .map(|p| DyadicSquare::new(d, p.ix - (q.ix << d), p.iy - (q.iy << d)))
        .collect();
    Ok(Family::from_cells(Scale::new(d), cells))
}

/// Inverse of [`renormalize`] for a single square.
pub fn denormalize(p: &DyadicSquare, q: &DyadicSquare) -> DyadicSquare {
    DyadicSquare::new(p.k + q.k, p.ix + (q.ix << p.k), p.iy + (q.iy << p.k))
}

/// Exact distance `2⁻ᵏ·√sq` between two midpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Distance {
    pub k: u32,
    pub sq: u128,
}

impl Distance {
    pub fn to_f64(&self) -> f64 {
        (self.sq as f64).sqrt() * (-(self.k as f64)).exp2()
    }
}

pub fn midpoint_distance(p: &DyadicSquare, q: &DyadicSquare) -> Result<Distance> {
    if p.k != q.k {
        return Err(Error::Scale(format!("squares at scales 2^-{} and 2^-{}", p.k, q.k)));
    }
    let dx = (p.ix - q.ix).unsigned_abs() as u128;
    let dy = (p.iy - q.iy).unsigned_abs() as u128;
    Ok(Distance { k: p.k, sq: dx * dx + dy * dy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sq(k: u32, x: i64, y: i64) -> DyadicSquare {
        DyadicSquare::new(k, x, y)
    }

    #[test]
    fn scale_order_follows_length() {
        assert!(Scale::new(5) < Scale::new(2));
        assert_eq!(Scale::new(3).value(), 0.125);
    }

    #[test]
    fn negative_indices_floor() {
        assert_eq!(sq(3, -1, -5).ancestor(1), sq(1, -1, -2));
        assert_eq!(DyadicInterval::new(2, -3).ancestor(0), DyadicInterval::new(0, -1));
    }

    #[test]
    fn grid_cover() {
        let c = full_grid(2).cover_at(Scale::new(1)).unwrap();
        assert_eq!(c.len(), 4);
        let one = Family::from_cells(Scale::new(3), vec![sq(3, 5, 2)]);
        assert_eq!(one.cover_at(Scale::new(1)).unwrap().cells(), &[sq(1, 1, 0)]);
        assert!(one.cover_at(Scale::new(4)).is_err());
    }

    #[test]
    fn cover_matches_exhaustive_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: Vec<_> = (0..20).map(|_| sq(6, rng.gen_range(0..64), rng.gen_range(0..64))).collect();
        let fam = Family::from_cells(Scale::new(6), v.clone());
        let mut brute = 0;
        for qx in 0..8 {
            for qy in 0..8 {
                let (x0, y0) = (qx as f64 / 8.0, qy as f64 / 8.0);
                let hit = v.iter().any(|p| {
                    let (px, py) = (p.ix as f64 / 64.0, p.iy as f64 / 64.0);
                    px >= x0 && px < x0 + 0.125 && py >= y0 && py < y0 + 0.125
                });
                brute += hit as usize;
            }
        }
        assert_eq!(fam.covering_number(Scale::new(3)).unwrap(), brute);
    }

    #[test]
    fn renormalize_examples() {
        let q = sq(2, 1, 3);
        let fam = Family::from_cells(Scale::new(2), vec![q]);
        assert_eq!(renormalize(&fam, &q).unwrap().cells(), &[sq(0, 0, 0)]);
        let kids = Family::from_cells(Scale::new(4), (0..4).flat_map(|x| (0..4).map(move |y| sq(4, 4 + x, 12 + y))).collect());
        assert_eq!(renormalize(&kids, &q).unwrap(), full_grid(2));
        // Cantor-like product: index map p ↦ p - 2^d·Q by coordinate arithmetic.
        let a = [0i64, 2, 9, 11];
        let pts: Vec<_> = a.iter().flat_map(|&x| a.iter().map(move |&y| sq(4, 16 + x, 48 + y))).collect();
        let fam = Family::from_cells(Scale::new(4), pts);
        let r = renormalize(&fam, &sq(0, 1, 3)).unwrap();
        let want: Vec<_> = a.iter().flat_map(|&x| a.iter().map(move |&y| sq(4, x, y))).collect();
        assert_eq!(r, Family::from_cells(Scale::new(4), want));
        assert_eq!(denormalize(&sq(4, 2, 9), &sq(0, 1, 3)), sq(4, 18, 57));
    }

    #[test]
    fn distances() {
        assert_eq!(midpoint_distance(&sq(3, 1, 1), &sq(3, 1, 1)).unwrap().sq, 0);
        assert_eq!(midpoint_distance(&sq(3, 1, 1), &sq(3, 2, 1)).unwrap().to_f64(), 0.125);
        assert_eq!(midpoint_distance(&sq(3, 0, 0), &sq(3, 3, 4)).unwrap().to_f64(), 5.0 / 8.0);
        assert!(midpoint_distance(&sq(3, 0, 0), &sq(2, 0, 0)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let fam = Family::from_cells(Scale::new(5), vec![sq(5, -3, 7), sq(5, 0, 0), sq(5, 31, -32)]);
        let t = fam.to_text();
        assert!(t.starts_with("{\"scale_exponent\":5,\"count\":3}\n"));
        assert_eq!(SquareFamily::from_text(&t).unwrap(), fam);
        let iv = Family::from_cells(Scale::new(2), vec![DyadicInterval::new(2, -1), DyadicInterval::new(2, 3)]);
        assert_eq!(IntervalFamily::from_text(&iv.to_text()).unwrap(), iv);
        assert!(SquareFamily::from_text("{\"scale_exponent\":1,\"count\":2}\n1 0 0\n").is_err());
    }

    fn family_strategy(k: u32) -> impl Strategy<Value = SquareFamily> {
        let n = 1i64 << k;
        prop::collection::vec((-n..n, -n..n), 0..60)
            .prop_map(move |v| Family::from_cells(Scale::new(k), v.into_iter().map(|(x, y)| sq(k, x, y)).collect()))
    }

    proptest! {
        #[test]
        fn cover_is_monotone(a in family_strategy(5), b in family_strategy(5), j in 0u32..=5) {
            let union = Family::from_cells(Scale::new(5), a.iter().chain(b.iter()).copied().collect());
            let ca = a.cover_at(Scale::new(j)).unwrap();
            let cu = union.cover_at(Scale::new(j)).unwrap();
            prop_assert!(ca.is_subset(&cu));
        }

        #[test]
        fn cover_composes_and_counts(f in family_strategy(6), j1 in 0u32..=6, j2 in 0u32..=6) {
            let (fine, coarse) = (j1.max(j2), j1.min(j2));
            let twice = f.cover_at(Scale::new(fine)).unwrap().cover_at(Scale::new(coarse)).unwrap();
            let once = f.cover_at(Scale::new(coarse)).unwrap();
            prop_assert_eq!(&twice, &once);
            prop_assert!(once.len() <= f.len());
            prop_assert!(f.len() <= once.len() << (2 * (6 - coarse)));
        }

        #[test]
        fn renormalize_commutes_with_cover(f in family_strategy(6), qx in -2i64..2, qy in -2i64..2, j in 0u32..=4) {
            let q = sq(2, qx, qy);
            let lhs = renormalize(&f, &q).unwrap().cover_at(Scale::new(j)).unwrap();
            let rhs = renormalize(&f.cover_at(Scale::new(j + 2)).unwrap(), &q).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn exactly_one_child_holds_each_descendant(x in -100i64..100, y in -100i64..100, j in 0u32..8) {
            let p = sq(8, x, y);
            let a = p.ancestor(j);
            prop_assert!(a.contains(&p));
            let hits = a.children().iter().filter(|c| c.contains(&p)).count();
            prop_assert_eq!(hits, 1);
        }
    }
}
