//! Projections, Riesz energies and the product-like structure inside a thick
//! tube.
//!
//! Energies use the kernel `max(|x−y|, δ)^{-s}` between atom centres. On a
//! `δ`-grid this is `δ^{-s}·max(D,1)^{-s}` with `D` the index distance, so an
//! energy is stored as `δ^{-s}` times a rational: each factor `max(D,1)^{-s}`
//! is rounded down to a multiple of 2⁻⁴⁸ using exact comparisons.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;

use crate::deltaset::{frostman_extract, spread_certificate};
use crate::dyadic::{renormalize, Cell, DyadicInterval, DyadicSquare, Family, IntervalFamily, Scale, SquareFamily};
use crate::exact::{Monomial, Rat};
use crate::incidence::NiceConfiguration;
use crate::tubes::{tube_contains_point, tube_meets_square, Convention, DyadicTube, TubeFamily};
use crate::{check, par, Error, Result};

/// Bits of the kernel grid.
pub const KERNEL_BITS: u32 = 48;

/// Finitely many weighted cells at one scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteMeasure<C: Cell> {
    k: u32,
    atoms: BTreeMap<C, Rat>,
}

impl<C: Cell> DiscreteMeasure<C> {
    pub fn new(k: u32, atoms: BTreeMap<C, Rat>) -> Result<Self> {
        if let Some((c, w)) = atoms.iter().find(|(c, w)| c.k() != k || **w <= Rat::zero()) {
            return Err(Error::Invalid(format!("atom {c:?} with weight {w} at scale 2^-{k}")));
        }
        Ok(DiscreteMeasure { k, atoms })
    }

    /// Normalised counting measure.
    pub fn counting(p: &Family<C>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Empty("counting measure of an empty family"));
        }
        let w = Rat::new(1, p.len() as i128);
        Ok(DiscreteMeasure { k: p.k(), atoms: p.iter().map(|c| (*c, w)).collect() })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn atoms(&self) -> &BTreeMap<C, Rat> {
        &self.atoms
    }

    pub fn mass(&self) -> Rat {
        self.atoms.values().copied().sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if m.is_zero() {
            return Err(Error::Empty("normalising a zero measure"));
        }
        Ok(DiscreteMeasure { k: self.k, atoms: self.atoms.iter().map(|(c, w)| (*c, *w / m)).collect() })
    }

    pub fn support(&self) -> Family<C> {
        Family::from_cells(Scale::new(self.k), self.atoms.keys().copied().collect())
    }
}

fn check_slope(sigma: Rat) -> Result<()> {
    if sigma < Rat::from_integer(-1) || sigma >= Rat::from_integer(1) {
        return Err(Error::Invalid(format!("slope {sigma} outside [-1, 1)")));
    }
    Ok(())
}

/// Grid interval containing the projection of the centre of `p`:
/// `x − σy` for the appendix convention, `σx + y` for the main one.
pub fn project_cell(p: &DyadicSquare, sigma: Rat, convention: Convention) -> DyadicInterval {
    let (x, y) = (Rat::from_integer(2 * p.ix as i128 + 1), Rat::from_integer(2 * p.iy as i128 + 1));
    let v = match convention {
        Convention::Appendix => x - sigma * y,
        Convention::MainText => sigma * x + y,
    };
    DyadicInterval::new(p.k, (v / Rat::from_integer(2)).floor().to_integer() as i64)
}

/// Push-forward of `mu` under `π_σ`.
pub fn project(mu: &DiscreteMeasure<DyadicSquare>, sigma: Rat, convention: Convention) -> Result<DiscreteMeasure<DyadicInterval>> {
    check_slope(sigma)?;
    let mut atoms: BTreeMap<DyadicInterval, Rat> = BTreeMap::new();
    for (p, w) in &mu.atoms {
        *atoms.entry(project_cell(p, sigma, convention)).or_insert_with(Rat::zero) += *w;
    }
    Ok(DiscreteMeasure { k: mu.k, atoms })
}

/// Image of a family under `π_σ`.
pub fn project_family(p: &SquareFamily, sigma: Rat, convention: Convention) -> Result<IntervalFamily> {
    check_slope(sigma)?;
    Ok(Family::from_cells(p.scale(), p.iter().map(|c| project_cell(c, sigma, convention)).collect()))
}

/// `⌊2⁴⁸·max(D²,1)^{-s/2}⌋` for the squared index distance `D²`.
fn kernel_numerator(d2: u128, s: Rat) -> u128 {
    let base = Monomial::int(d2.max(1)).powr(-s / Rat::from_integer(2));
    base.mul(&Monomial::pow2(Rat::from_integer(KERNEL_BITS as i128))).floor()
}

/// `I_s(μ) = δ^{-s}·num/den`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Energy {
    pub s: Rat,
    pub k: u32,
    pub num: BigUint,
    pub den: BigUint,
}

impl Energy {
    /// Energy in units of `δ^{-s}`.
    pub fn units(&self) -> BigRational {
        BigRational::new(self.num.clone().into(), self.den.clone().into())
    }

    pub fn value(&self) -> Monomial {
        Monomial::from_big(&self.num)
            .div(&Monomial::from_big(&self.den))
            .mul(&Monomial::pow2(self.s * Rat::from_integer(self.k as i128)))
    }

    pub fn to_f64(&self) -> f64 {
        self.value().to_f64()
    }
}

fn denominators_lcm<C: Cell>(mu: &DiscreteMeasure<C>) -> i128 {
    mu.atoms.values().fold(1i128, |l, w| num_integer::lcm(l, *w.denom()))
}

/// Riesz `s`-energy with the `δ`-regularised kernel.
pub fn riesz_energy<C: Cell>(mu: &DiscreteMeasure<C>, s: Rat) -> Result<Energy> {
    if s <= Rat::zero() || s >= Rat::from_integer(2) {
        return Err(Error::Invalid(format!("energy exponent {s} outside (0, 2)")));
    }
    if mu.atoms.is_empty() {
        return Err(Error::Empty("energy of a zero measure"));
    }
    let l = denominators_lcm(mu);
    let atoms: Vec<(Vec<i64>, u128)> =
        mu.atoms.iter().map(|(c, w)| (c.coords(), (*w * Rat::from_integer(l)).to_integer() as u128)).collect();
    let mut d2s: Vec<u128> = Vec::new();
    for (a, _) in &atoms {
        for (b, _) in &atoms {
            d2s.push(a.iter().zip(b).map(|(x, y)| ((x - y) as i128).pow(2) as u128).sum());
        }
    }
    d2s.sort_unstable();
    d2s.dedup();
    let kernels: HashMap<u128, u128> = d2s.iter().copied().zip(par::map(&d2s, |d| kernel_numerator(*d, s))).collect();
    let rows: Vec<BigUint> = par::map(&atoms, |(a, wa)| {
        let mut acc = BigUint::zero();
        for (b, wb) in &atoms {
            let d2: u128 = a.iter().zip(b).map(|(x, y)| ((x - y) as i128).pow(2) as u128).sum();
            acc += BigUint::from(wa * wb) * BigUint::from(kernels[&d2]);
        }
        acc
    });
    let num: BigUint = rows.into_iter().sum();
    let den = BigUint::from(l as u128).pow(2) << KERNEL_BITS;
    let g = num_integer::Integer::gcd(&num, &den);
    Ok(Energy { s, k: mu.k, num: &num / &g, den: &den / &g })
}

#[derive(Clone, Debug)]
pub struct DirectionEnergy {
    pub sigma: Rat,
    pub energy: Energy,
    pub selected: bool,
}

#[derive(Clone, Debug)]
pub struct GoodDirections {
    pub rows: Vec<DirectionEnergy>,
}

impl GoodDirections {
    pub fn selected(&self) -> Vec<Rat> {
        self.rows.iter().filter(|r| r.selected).map(|r| r.sigma).collect()
    }

    /// `sigma,energy_num,energy_den,selected`, energies in units of `δ^{-s}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma,energy_num,energy_den,selected\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.sigma, r.energy.num, r.energy.den, r.selected as u8));
        }
        out
    }
}

/// Directions whose projected energy is at most twice the mean; at least
/// half of `slopes` qualify.
pub fn good_directions(p: &SquareFamily, slopes: &[Rat], s: Rat, convention: Convention) -> Result<GoodDirections> {
    if slopes.is_empty() {
        return Err(Error::Empty("good directions need at least one slope"));
    }
    let mut slopes = slopes.to_vec();
    slopes.sort();
    slopes.dedup();
    let mu = DiscreteMeasure::counting(p)?;
    let energies: Vec<Result<Energy>> = par::map(&slopes, |sigma| riesz_energy(&project(&mu, *sigma, convention)?, s));
    let energies: Vec<Energy> = energies.into_iter().collect::<Result<_>>()?;
    let common = energies.iter().fold(BigUint::from(1u8), |l, e| num_integer::Integer::lcm(&l, &e.den));
    let scaled: Vec<BigUint> = energies.iter().map(|e| &e.num * (&common / &e.den)).collect();
    let total: BigUint = scaled.iter().sum();
    let n = BigUint::from(slopes.len());
    let rows: Vec<DirectionEnergy> = slopes
        .iter()
        .zip(energies)
        .zip(&scaled)
        .map(|((sigma, energy), e)| DirectionEnergy { sigma: *sigma, energy, selected: e * &n <= &total * 2u8 })
        .collect();
    let kept = rows.iter().filter(|r| r.selected).count();
    check(2 * kept >= rows.len(), || format!("only {kept} of {} directions kept", rows.len()))?;
    Ok(GoodDirections { rows })
}

/// Spread constant of a `(δ,s)`-subset extracted from `π_σ(P)`.
pub fn projection_certificate(p: &SquareFamily, sigma: Rat, s: Rat, convention: Convention) -> Result<Monomial> {
    let image = project_family(p, sigma, convention)?;
    Ok(spread_certificate(&frostman_extract(&image, s)?, s)?.c())
}

/// One `Δ`-square of the thick tube with its points and their fine tubes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slice {
    pub q: DyadicSquare,
    /// `(p, 𝒯(p) ∩ 𝐓₀)`.
    pub points: Vec<(DyadicSquare, Vec<DyadicTube>)>,
}

#[derive(Clone, Debug)]
pub struct ProductInput {
    pub k_delta: u32,
    pub s: Rat,
    pub t: Rat,
    /// Thick tube `𝐓₀` at scale `Δ`, appendix convention.
    pub t0: DyadicTube,
    /// `𝒯` at scale `δ = Δ²`.
    pub tubes: TubeFamily,
    pub slices: Vec<Slice>,
}

#[derive(Clone, Debug, Default)]
pub struct ProductReport {
    pub pairs: usize,
    pub members: usize,
    pub tubes_in_t0: usize,
    pub union: usize,
    pub slices_in_range: bool,
    /// Largest `(Δ,t−s)` constant of `𝐘`.
    pub y_certificate: f64,
    /// Largest `(Δ,s)` constant over the slices `𝐗_y`.
    pub slice_certificate: f64,
    /// Largest `(Δ,s)` constant over the slope sets of `𝒯(𝐳)`.
    pub tube_certificate: f64,
    /// `log|𝒯(𝐙)| / log(1/Δ)`, to be compared with `2s`.
    pub dimension: f64,
}

impl ProductReport {
    pub fn membership(&self) -> bool {
        self.members == self.pairs
    }

    pub fn cover_bound(&self) -> bool {
        self.union <= 3 * self.tubes_in_t0
    }
}

#[derive(Clone, Debug)]
pub struct ProductStructure {
    pub k_delta: u32,
    /// Whether the normalising map `F` was applied.
    pub normalized: bool,
    /// `𝐘` as `Δ`-indices.
    pub y: IntervalFamily,
    /// `𝐗_y` as `Δ`-indices, keyed by the index of `y`.
    pub slices: BTreeMap<i64, Vec<i64>>,
    /// Points of `Z` as (`δ`-index of `x`, `Δ`-index of `y`).
    pub z_fine: Vec<(i64, i64)>,
    /// `𝒯(𝐳)` for `𝐳 ∈ 𝐙` given by `Δ`-indices.
    pub tubes_of: BTreeMap<(i64, i64), Vec<DyadicTube>>,
    pub union: TubeFamily,
    pub report: ProductReport,
}

fn appendix_tube(k: u32, ix: i64, iy: i64) -> DyadicTube {
    DyadicTube::appendix(k, ix, iy)
}

/// Columns of `δ`-squares in the row of `p` met by `F(p)`, `F(x,y) = (x − σ₀y − h₀, y)`.
fn sheared_candidates(p: &DyadicSquare, sigma0: Rat, h0: Rat) -> Vec<DyadicSquare> {
    let d = Rat::new(1, 1i128 << p.k);
    let x0 = Rat::from_integer(p.ix as i128) * d;
    let ys = [Rat::from_integer(p.iy as i128) * d, Rat::from_integer(p.iy as i128 + 1) * d];
    let lo = ys.iter().map(|y| x0 - sigma0 * y - h0).min().unwrap();
    let hi = ys.iter().map(|y| x0 + d - sigma0 * y - h0).max().unwrap();
    let a = (lo / d).floor().to_integer() as i64;
    let b = (hi / d).ceil().to_integer() as i64;
    (a..b).map(|ix| DyadicSquare::new(p.k, ix, p.iy)).collect()
}

fn normalize_slices(input: &ProductInput, sigma0: i64, h0: i64) -> (Vec<Slice>, TubeFamily) {
    let kd = input.k_delta;
    let shift = 1i64 << kd;
    let map = |t: &DyadicTube| appendix_tube(t.param.k, t.param.ix - sigma0 * shift, t.param.iy - h0 * shift);
    let tubes = TubeFamily::new(input.tubes.scale(), Convention::Appendix, input.tubes.iter().filter(|t| input.t0.contains(t)).map(|t| map(&t)).collect())
        .expect("tubes keep their scale");
    let (s0, hh) = (Rat::new(sigma0 as i128, 1i128 << kd), Rat::new(h0 as i128, 1i128 << kd));
    let mut out = Vec::new();
    for slice in &input.slices {
        let mut moved: Vec<(DyadicSquare, Vec<DyadicTube>)> = Vec::new();
        for (p, ts) in &slice.points {
            let image: Vec<DyadicTube> = ts.iter().map(map).collect();
            let best = sheared_candidates(p, s0, hh)
                .into_iter()
                .map(|c| (image.iter().filter(|t| tube_meets_square(t, &c)).count(), c))
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                .unwrap();
            let kept: Vec<DyadicTube> = image.into_iter().filter(|t| tube_meets_square(t, &best.1)).collect();
            if !kept.is_empty() {
                moved.push((best.1, kept));
            }
        }
        let mut counts: BTreeMap<DyadicSquare, usize> = BTreeMap::new();
        for (pb, _) in &moved {
            *counts.entry(pb.ancestor(kd)).or_insert(0) += 1;
        }
        let Some((&qb, _)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else { continue };
        let mut merged: BTreeMap<DyadicSquare, Vec<DyadicTube>> = BTreeMap::new();
        for (pb, ts) in moved.into_iter().filter(|(pb, _)| qb.contains(pb)) {
            merged.entry(pb).or_default().extend(ts);
        }
        let points = merged
            .into_iter()
            .map(|(pb, mut ts)| {
                ts.sort();
                ts.dedup();
                (pb, ts)
            })
            .collect();
        out.push(Slice { q: qb, points });
    }
    (out, tubes)
}

/// Builds `𝐙` and the families `𝒯(𝐳)` inside the thick tube `𝐓₀`.
pub fn product_structure(input: &ProductInput) -> Result<ProductStructure> {
    let kd = input.k_delta;
    let k = 2 * kd;
    if input.t0.k() != kd || input.tubes.k() != k {
        return Err(Error::Scale(format!("need 𝐓₀ at 2^-{kd} and tubes at 2^-{k}")));
    }
    if input.t0.convention != Convention::Appendix || input.tubes.convention() != Convention::Appendix {
        return Err(Error::Invalid("product structure uses the appendix convention".into()));
    }
    for sl in &input.slices {
        if sl.q.k != kd {
            return Err(Error::Scale(format!("square {:?} is not at 2^-{kd}", sl.q)));
        }
        for (p, ts) in &sl.points {
            if p.k != k || !sl.q.contains(p) {
                return Err(Error::Scale(format!("point {p:?} is not a 2^-{k} square of {:?}", sl.q)));
            }
            if let Some(t) = ts.iter().find(|t| !input.t0.contains(t) || !input.tubes.contains(t) || !tube_meets_square(t, p)) {
                return Err(Error::Invalid(format!("tube {t:?} is not a tube of 𝒯 ∩ 𝐓₀ meeting {p:?}")));
            }
        }
    }
    let (sigma0, h0) = (input.t0.param.ix, input.t0.param.iy);
    let normalized = sigma0 != 0 || h0 != 0;
    let (slices, tubes) = if normalized { normalize_slices(input, sigma0, h0) } else { (input.slices.clone(), input.tubes.clone()) };
    let t0 = appendix_tube(kd, 0, 0);
    let tubes_in_t0 = tubes.iter().filter(|t| t0.contains(t)).count();

    // One square per height, the one with the most points.
    let mut by_y: BTreeMap<i64, &Slice> = BTreeMap::new();
    for sl in slices.iter().filter(|sl| !sl.points.is_empty()) {
        check(tube_meets_square(&t0, &sl.q), || format!("{:?} misses 𝐓₀", sl.q))?;
        match by_y.get(&sl.q.iy) {
            Some(old) if (old.points.len(), std::cmp::Reverse(old.q.ix)) >= (sl.points.len(), std::cmp::Reverse(sl.q.ix)) => {}
            _ => {
                by_y.insert(sl.q.iy, sl);
            }
        }
    }
    if by_y.is_empty() {
        return Err(Error::Empty("no slices left inside 𝐓₀"));
    }

    let mut out_slices = BTreeMap::new();
    let mut z_fine = Vec::new();
    let mut tubes_of: BTreeMap<(i64, i64), Vec<DyadicTube>> = BTreeMap::new();
    let mut report = ProductReport { tubes_in_t0, slices_in_range: true, ..Default::default() };
    let delta = Rat::new(1, 1i128 << kd);
    let mut slice_c = Monomial::one();
    let mut tube_c = Monomial::one();
    for (&iy, sl) in &by_y {
        let base = sl.q.ix << kd;
        let rel = IntervalFamily::from_cells(
            Scale::new(kd),
            sl.points.iter().map(|(p, _)| DyadicInterval::new(kd, p.ix - base)).collect(),
        );
        let pi = frostman_extract(&rel, input.s)?;
        let mut xs = Vec::new();
        for i in pi.iter() {
            let (p, ts) = sl
                .points
                .iter()
                .filter(|(p, _)| p.ix - base == i.i)
                .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
                .unwrap();
            let z = (p.ix, iy);
            xs.push(p.ix);
            z_fine.push((p.ix, iy));
            let (zx, zy) = (Rat::from_integer(p.ix as i128) * delta, Rat::from_integer(iy as i128) * delta);
            let mut fam = Vec::new();
            for t in ts {
                let chosen = (-1..=1)
                    .map(|rho| appendix_tube(kd, t.param.ix, t.param.iy + rho))
                    .find(|c| tube_contains_point(c, zx, zy))
                    .ok_or_else(|| Error::Check(format!("no candidate tube for {t:?} contains 𝐳 = {z:?}")))?;
                fam.push(chosen);
            }
            fam.sort();
            fam.dedup();
            let slopes = TubeFamily::new(Scale::new(kd), Convention::Appendix, fam.clone())?.slopes();
            tube_c = tube_c.max(spread_certificate(&slopes, input.s)?.c());
            tubes_of.insert(z, fam);
        }
        report.slices_in_range &= xs.iter().all(|&x| x >= 0 && x <= 3 << kd);
        let xf = IntervalFamily::from_cells(Scale::new(kd), xs.iter().map(|&x| DyadicInterval::new(kd, x)).collect());
        slice_c = slice_c.max(spread_certificate(&xf, input.s)?.c());
        out_slices.insert(iy, xs);
    }
    for ((zx, zy), fam) in &tubes_of {
        for t in fam {
            report.pairs += 1;
            if tube_contains_point(t, Rat::from_integer(*zx as i128) * delta, Rat::from_integer(*zy as i128) * delta) {
                report.members += 1;
            }
        }
    }
    let union = TubeFamily::new(Scale::new(kd), Convention::Appendix, tubes_of.values().flatten().copied().collect())?;
    report.union = union.len();
    let y = IntervalFamily::from_cells(Scale::new(kd), by_y.keys().map(|&iy| DyadicInterval::new(kd, iy)).collect());
    report.y_certificate = spread_certificate(&y, input.t - input.s)?.c().to_f64();
    report.slice_certificate = slice_c.to_f64();
    report.tube_certificate = tube_c.to_f64();
    report.dimension = (union.len() as f64).log2() / kd as f64;
    check(report.membership(), || format!("{} of {} pairs have 𝐳 ∉ T", report.pairs - report.members, report.pairs))?;
    check(report.cover_bound(), || format!("|𝒯(𝐙)| = {} exceeds 3·{}", report.union, report.tubes_in_t0))?;
    check(report.slices_in_range, || "a slice leaves [0,3]".into())?;
    Ok(ProductStructure { k_delta: kd, normalized, y, slices: out_slices, z_fine, tubes_of, union, report })
}

/// Swaps coordinates so a main-convention configuration reads in the
/// appendix convention (`y = ax + b` becomes `x = ay + b`).
pub fn to_appendix(config: &NiceConfiguration) -> Result<NiceConfiguration> {
    if config.convention() == Convention::Appendix {
        return Ok(config.clone());
    }
    let mut pairs: Vec<(DyadicSquare, TubeFamily)> = config
        .pairs()
        .map(|(p, f)| {
            let tubes = f.iter().map(|t| appendix_tube(t.param.k, t.param.ix, t.param.iy)).collect();
            (DyadicSquare::new(p.k, p.iy, p.ix), TubeFamily::new(f.scale(), Convention::Appendix, tubes).unwrap())
        })
        .collect();
    pairs.sort_by_key(|a| a.0);
    let p = SquareFamily::from_cells(config.scale(), pairs.iter().map(|x| x.0).collect());
    NiceConfiguration::new(config.s, config.c.clone(), config.m, p, pairs.into_iter().map(|x| x.1).collect())
}

/// Translates an appendix configuration by whole units so every square lies
/// in the closed positive quadrant; intercepts move by `cx − σ·cy`, which stays
/// on the grid.
pub fn shift_to_positive(config: &NiceConfiguration) -> Result<NiceConfiguration> {
    if config.convention() != Convention::Appendix {
        return Err(Error::Invalid("shifting expects the appendix convention".into()));
    }
    let k = config.k();
    let n = 1i64 << k;
    let lift = |m: Option<i64>| m.map_or(0, |m| if m < 0 { (-m + n - 1) / n } else { 0 });
    let cx = lift(config.p.iter().map(|p| p.ix).min());
    let cy = lift(config.p.iter().map(|p| p.iy).min());
    if cx == 0 && cy == 0 {
        return Ok(config.clone());
    }
    let p = SquareFamily::from_cells(config.scale(), config.p.iter().map(|p| DyadicSquare::new(k, p.ix + cx * n, p.iy + cy * n)).collect());
    let tubes = config
        .tubes
        .iter()
        .map(|f| {
            let moved = f.iter().map(|t| appendix_tube(k, t.param.ix, t.param.iy - t.param.ix * cy + cx * n)).collect();
            TubeFamily::new(f.scale(), Convention::Appendix, moved)
        })
        .collect::<Result<Vec<_>>>()?;
    NiceConfiguration::new(config.s, config.c.clone(), config.m, p, tubes)
}

#[derive(Clone, Debug)]
pub struct ProductSelection {
    pub input: ProductInput,
    /// Squares whose good directions include `σ(𝐓₀)`.
    pub good_squares: usize,
    pub squares: usize,
}

/// Picks `𝐓₀` and the slice data from a configuration at `δ = Δ²`: good
/// directions per `Δ`-square first, then the thick tube carrying the most
/// incidences from squares where its slope is good.
pub fn product_input(config: &NiceConfiguration, k_delta: u32, t: Rat) -> Result<ProductSelection> {
    if config.k() != 2 * k_delta {
        return Err(Error::Scale(format!("configuration at 2^-{} is not at Δ² = 2^-{}", config.k(), 2 * k_delta)));
    }
    let config = shift_to_positive(&to_appendix(config)?)?;
    let s = config.s;
    let squares = config.p.cover_at(Scale::new(k_delta))?;
    let per_square: Vec<Result<Vec<i64>>> = par::map(squares.cells(), |q| {
        let thick: Vec<i64> = {
            let mut v: Vec<i64> = config
                .pairs()
                .filter(|(p, _)| q.contains(p))
                .flat_map(|(_, f)| f.iter().map(|t| t.ancestor(k_delta).param.ix).collect::<Vec<_>>())
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let slopes: Vec<Rat> = thick.iter().map(|&i| Rat::new(i as i128, 1i128 << k_delta)).collect();
        let local = renormalize(&config.p, q)?;
        let good = good_directions(&local, &slopes, s, Convention::Appendix)?;
        Ok(good.selected().into_iter().map(|r| (r * Rat::from_integer(1i128 << k_delta)).to_integer() as i64).collect())
    });
    let good: BTreeMap<DyadicSquare, Vec<i64>> = squares.iter().copied().zip(per_square.into_iter().collect::<Result<Vec<_>>>()?).collect();
    let mut score: BTreeMap<DyadicTube, usize> = BTreeMap::new();
    for (p, f) in config.pairs() {
        let g = &good[&p.ancestor(k_delta)];
        for t in f.iter() {
            let a = t.ancestor(k_delta);
            if g.binary_search(&a.param.ix).is_ok() {
                *score.entry(a).or_insert(0) += 1;
            }
        }
    }
    let (&t0, _) = score
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .ok_or(Error::Empty("no thick tube has a good slope"))?;
    let mut slices: BTreeMap<DyadicSquare, Vec<(DyadicSquare, Vec<DyadicTube>)>> = BTreeMap::new();
    let mut good_squares = 0;
    for (q, g) in &good {
        if g.binary_search(&t0.param.ix).is_ok() {
            good_squares += 1;
        } else {
            continue;
        }
        for (p, f) in config.pairs().filter(|(p, _)| q.contains(p)) {
            let inside: Vec<DyadicTube> = f.iter().filter(|t| t0.contains(t)).collect();
            if !inside.is_empty() {
                slices.entry(*q).or_default().push((*p, inside));
            }
        }
    }
    let input = ProductInput {
        k_delta,
        s,
        t,
        t0,
        tubes: config.tube_union(),
        slices: slices.into_iter().map(|(q, points)| Slice { q, points }).collect(),
    };
    Ok(ProductSelection { input, good_squares, squares: squares.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::full_grid;
    use crate::exact::{exponent, rat};
    use crate::generators::{cantor_set, furstenberg_config, product};

    fn iv(k: u32, i: i64) -> DyadicInterval {
        DyadicInterval::new(k, i)
    }

    #[test]
    fn projections_preserve_mass() {
        let p = SquareFamily::from_cells(
            Scale::new(3),
            vec![DyadicSquare::new(3, 1, 2), DyadicSquare::new(3, 5, 0), DyadicSquare::new(3, 5, 7)],
        );
        let mu = DiscreteMeasure::counting(&p).unwrap();
        let px = project(&mu, rat(0, 1), Convention::Appendix).unwrap();
        assert_eq!(px.support().cells(), &[iv(3, 1), iv(3, 5)]);
        assert_eq!(px.atoms()[&iv(3, 5)], rat(2, 3));
        for sigma in [rat(-1, 1), rat(-1, 3), rat(1, 2), rat(7, 8)] {
            for conv in [Convention::Appendix, Convention::MainText] {
                assert_eq!(project(&mu, sigma, conv).unwrap().mass(), rat(1, 1));
            }
        }
        assert!(project(&mu, rat(1, 1), Convention::Appendix).is_err());
    }

    #[test]
    fn product_marginal() {
        let a = IntervalFamily::from_cells(Scale::new(3), vec![iv(3, 0), iv(3, 3), iv(3, 6)]);
        let b = IntervalFamily::from_cells(Scale::new(3), vec![iv(3, 1), iv(3, 2)]);
        let mu = DiscreteMeasure::counting(&product(&a, &b).unwrap()).unwrap();
        let m = project(&mu, rat(0, 1), Convention::Appendix).unwrap();
        assert_eq!(m, DiscreteMeasure::counting(&a).unwrap());
    }

    #[test]
    fn energy_examples() {
        let s = rat(1, 2);
        let one = DiscreteMeasure::counting(&IntervalFamily::from_cells(Scale::new(4), vec![iv(4, 3)])).unwrap();
        let e = riesz_energy(&one, s).unwrap();
        assert_eq!((e.num.clone(), e.den.clone()), (BigUint::from(1u8), BigUint::from(1u8)));
        assert_eq!(e.value(), Monomial::pow2(rat(2, 1)));

        // Two half-masses at distance 4δ: 2·¼·(4δ)^{-1/2} + 2·¼·δ^{-1/2} = ¾·δ^{-1/2}.
        let two = DiscreteMeasure::counting(&IntervalFamily::from_cells(Scale::new(4), vec![iv(4, 1), iv(4, 5)])).unwrap();
        let e = riesz_energy(&two, s).unwrap();
        assert_eq!(e.units(), BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn energy_matches_double_loop() {
        let k = 5;
        let s = rat(1, 2);
        let grid = IntervalFamily::from_cells(Scale::new(k), (0..32).map(|i| iv(k, i)).collect());
        let e = riesz_energy(&DiscreteMeasure::counting(&grid).unwrap(), s).unwrap();
        let mut oracle = 0.0;
        for i in 0..32i64 {
            for j in 0..32i64 {
                let d = ((i - j).abs().max(1) as f64) / 32.0;
                oracle += d.powf(-0.5) / 1024.0;
            }
        }
        assert!((e.to_f64() - oracle).abs() < 1e-9 * oracle, "{} vs {oracle}", e.to_f64());
    }

    #[test]
    fn adding_a_far_atom_adds_kernel_sums() {
        let s = rat(3, 4);
        let base = IntervalFamily::from_cells(Scale::new(6), vec![iv(6, 2), iv(6, 9), iv(6, 10)]);
        let mut atoms: BTreeMap<DyadicInterval, Rat> = base.iter().map(|c| (*c, rat(1, 1))).collect();
        let e0 = riesz_energy(&DiscreteMeasure::new(6, atoms.clone()).unwrap(), s).unwrap().units();
        atoms.insert(iv(6, 40), rat(1, 1));
        let e1 = riesz_energy(&DiscreteMeasure::new(6, atoms).unwrap(), s).unwrap().units();
        let kern = |d: u128| BigRational::new((kernel_numerator(d * d, s)).into(), (BigUint::from(1u8) << KERNEL_BITS).into());
        let expected = e0 + kern(0) + (kern(38) + kern(31) + kern(30)) * BigRational::from_integer(2.into());
        assert_eq!(e1, expected);
    }

    #[test]
    fn good_directions_examples() {
        let slopes: Vec<Rat> = (-4..4).map(|i| rat(i, 4)).collect();
        let g = good_directions(&full_grid(3), &slopes, rat(1, 2), Convention::Appendix).unwrap();
        assert!(g.selected().len() * 2 >= slopes.len());

        // A vertical column collapses to a point under σ = 0.
        let col = SquareFamily::from_cells(Scale::new(8), (0..256).map(|i| DyadicSquare::new(8, 7, i)).collect());
        let g = good_directions(&col, &slopes, rat(1, 2), Convention::Appendix).unwrap();
        let e0 = g.rows.iter().find(|r| r.sigma == rat(0, 1)).unwrap();
        assert!(g.rows.iter().all(|r| r.energy.units() <= e0.energy.units()));
        assert!(!e0.selected);
        assert!(g.to_csv().contains("\n0,"));
    }

    #[test]
    fn cantor_projections_are_spread() {
        let a = cantor_set::<DyadicInterval>(6, exponent(0.9), 1).unwrap();
        let b = cantor_set::<DyadicInterval>(6, exponent(0.9), 2).unwrap();
        let p = product(&a, &b).unwrap();
        let slopes: Vec<Rat> = (-8..8).map(|i| rat(i, 8)).collect();
        let g = good_directions(&p, &slopes, rat(1, 2), Convention::Appendix).unwrap();
        for sigma in g.selected() {
            let c = projection_certificate(&p, sigma, rat(1, 2), Convention::Appendix).unwrap();
            assert!(c <= Monomial::int(256), "σ = {sigma}: {c}");
        }
    }

    #[test]
    fn single_square_single_tube() {
        let kd = 2;
        let t = appendix_tube(4, 0, 0);
        let p = DyadicSquare::new(4, 0, 0);
        assert!(tube_meets_square(&t, &p));
        let input = ProductInput {
            k_delta: kd,
            s: rat(1, 2),
            t: rat(1, 1),
            t0: appendix_tube(kd, 0, 0),
            tubes: TubeFamily::new(Scale::new(4), Convention::Appendix, vec![t]).unwrap(),
            slices: vec![Slice { q: DyadicSquare::new(kd, 0, 0), points: vec![(p, vec![t])] }],
        };
        let ps = product_structure(&input).unwrap();
        assert_eq!(ps.tubes_of.len(), 1);
        assert_eq!(ps.union.len(), 1);
        assert!(ps.report.membership());
    }

    #[test]
    fn shear_maps_thick_tube_to_origin() {
        let kd = 3;
        let t0 = appendix_tube(kd, 2, 1);
        let fine = appendix_tube(6, 2 * 8 + 3, 8 + 5);
        assert!(t0.contains(&fine));
        let shift = 1 << kd;
        let moved = appendix_tube(6, fine.param.ix - 2 * shift, fine.param.iy - shift);
        assert!(appendix_tube(kd, 0, 0).contains(&moved));
    }

    #[test]
    fn product_structure_on_a_configuration() {
        let (config, _) = furstenberg_config(8, rat(1, 2), rat(1, 1), 4).unwrap();
        let sel = product_input(&config, 4, rat(1, 1)).unwrap();
        assert!(sel.good_squares > 0);
        let ps = product_structure(&sel.input).unwrap();
        assert!(ps.report.membership());
        assert!(ps.report.cover_bound());
        assert!(ps.slices.values().flatten().all(|&x| (0..=3 << 4).contains(&x)));
    }

    #[test]
    fn shifting_keeps_incidences() {
        let (config, _) = furstenberg_config(6, rat(1, 2), rat(1, 1), 9).unwrap();
        let a = to_appendix(&config).unwrap();
        let b = shift_to_positive(&a).unwrap();
        assert!(b.p.iter().all(|p| p.ix >= 0 && p.iy >= 0));
        assert_eq!(a.pairs().map(|(_, f)| f.len()).sum::<usize>(), b.pairs().map(|(_, f)| f.len()).sum::<usize>());
        for (p, f) in b.pairs() {
            assert!(f.iter().all(|t| tube_meets_square(&t, p)));
        }
    }

    #[test]
    fn product_structure_across_seeds() {
        let mut sheared = 0;
        for seed in 0..6 {
            let (config, _) = furstenberg_config(8, rat(1, 2), rat(3, 4), seed).unwrap();
            let sel = product_input(&config, 4, rat(3, 4)).unwrap();
            let ps = product_structure(&sel.input).unwrap();
            sheared += ps.normalized as usize;
            assert!(ps.report.membership() && ps.report.cover_bound());
        }
        assert!(sheared > 0);
    }

    #[test]
    fn energy_rejects_bad_exponent() {
        let one = DiscreteMeasure::counting(&IntervalFamily::from_cells(Scale::new(2), vec![iv(2, 0)])).unwrap();
        assert!(riesz_energy(&one, rat(2, 1)).is_err());
        assert_eq!(one.normalized().unwrap(), one);
    }
}
