//! Incidences between squares and tubes, the elementary bounds, and
//! validation of nice configurations.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::deltaset::spread_certificate;
use crate::dyadic::{DyadicSquare, Scale, SquareFamily};
use crate::exact::{rat_to_f64, Monomial, Rat};
use crate::tubes::{tube_meets_square, Convention, DyadicTube, TubeFamily};
use crate::{par, Error, Result};

/// Squares `𝒫` with a tube family `𝒯(p)` attached to each.
///
/// The configuration is nice when every `𝒯(p)` has exactly `M` tubes, all
/// meeting `p`, and is a `(δ,s,C)`-set; see [`validate_nice`].
#[derive(Clone, Debug)]
pub struct NiceConfiguration {
    pub s: Rat,
    pub c: Monomial,
    pub m: usize,
    pub p: SquareFamily,
    /// `𝒯(p)` for each `p`, aligned with `p.cells()`.
    pub tubes: Vec<TubeFamily>,
}

impl NiceConfiguration {
    pub fn new(s: Rat, c: Monomial, m: usize, p: SquareFamily, tubes: Vec<TubeFamily>) -> Result<Self> {
        if tubes.len() != p.len() {
            return Err(Error::Invalid(format!("{} squares but {} tube families", p.len(), tubes.len())));
        }
        if let Some(f) = tubes.iter().find(|f| f.k() != p.k()) {
            return Err(Error::Scale(format!("tube family at 2^-{} for squares at 2^-{}", f.k(), p.k())));
        }
        Ok(NiceConfiguration { s, c, m, p, tubes })
    }

    pub fn k(&self) -> u32 {
        self.p.k()
    }

    pub fn scale(&self) -> Scale {
        self.p.scale()
    }

    pub fn convention(&self) -> Convention {
        self.tubes.first().map(|t| t.convention()).unwrap_or(Convention::MainText)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&DyadicSquare, &TubeFamily)> {
        self.p.iter().zip(self.tubes.iter())
    }

    pub fn tubes_of(&self, q: &DyadicSquare) -> Option<&TubeFamily> {
        self.p.cells().binary_search(q).ok().map(|i| &self.tubes[i])
    }

    /// `𝒯 = ∪_p 𝒯(p)`.
    pub fn tube_union(&self) -> TubeFamily {
        let mut v: Vec<DyadicTube> = self.tubes.iter().flat_map(|f| f.iter()).collect();
        v.sort_unstable();
        v.dedup();
        TubeFamily::new(self.scale(), self.convention(), v).expect("uniform configuration")
    }

    /// Sub-configuration on the listed squares (which must belong to `𝒫`).
    pub fn restrict(&self, keep: &SquareFamily) -> NiceConfiguration {
        let tubes = keep.iter().map(|q| self.tubes_of(q).expect("square outside configuration").clone()).collect();
        NiceConfiguration { s: self.s, c: self.c.clone(), m: self.m, p: keep.clone(), tubes }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceCount {
    pub total: u64,
    /// Number of squares each tube is assigned to.
    pub per_tube: BTreeMap<DyadicTube, u64>,
}

/// `|ℐ(𝒫,𝒯)|` with its per-tube histogram. In strict mode every assigned
/// tube must belong to `universe`.
pub fn count_incidences(config: &NiceConfiguration, universe: &TubeFamily, strict: bool) -> Result<IncidenceCount> {
    if strict {
        for (p, f) in config.pairs() {
            if let Some(t) = f.iter().find(|t| !universe.contains(t)) {
                return Err(Error::Invalid(format!("tube {t:?} of {p:?} is not in the tube family")));
            }
        }
    }
    let chunks: Vec<HashMap<DyadicTube, u64>> = par::map(&config.tubes, |f| f.iter().map(|t| (t, 1)).collect());
    let mut per_tube: BTreeMap<DyadicTube, u64> = BTreeMap::new();
    for c in chunks {
        for (t, n) in c {
            *per_tube.entry(t).or_insert(0) += n;
        }
    }
    let total = per_tube.values().sum();
    Ok(IncidenceCount { total, per_tube })
}

/// Tubes of `universe` meeting `p`, looked up per slope.
pub struct TubeIndex {
    convention: Convention,
    k: u32,
    by_slope: BTreeMap<i64, Vec<i64>>,
}

impl TubeIndex {
    pub fn new(universe: &TubeFamily) -> Self {
        let mut by_slope: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for p in universe.params().iter() {
            by_slope.entry(p.ix).or_default().push(p.iy);
        }
        TubeIndex { convention: universe.convention(), k: universe.k(), by_slope }
    }

    /// For each slope the candidate intercepts form a short window; only
    /// those are tested exactly.
    pub fn through(&self, p: &DyadicSquare) -> Vec<DyadicTube> {
        assert_eq!(p.k, self.k, "index and square scales differ");
        let (u, v) = match self.convention {
            Convention::MainText => (p.ix, p.iy),
            Convention::Appendix => (p.iy, p.ix),
        };
        let n = 1i64 << self.k;
        let mut out = Vec::new();
        for (&a, bs) in &self.by_slope {
            // b ≈ v − a·u/n in grid units, within ±3.
            let centre = v - (a * u).div_euclid(n);
            let lo = bs.partition_point(|&b| b < centre - 3);
            for &b in &bs[lo..] {
                if b > centre + 3 {
                    break;
                }
                let t = DyadicTube { param: DyadicSquare::new(self.k, a, b), convention: self.convention };
                if tube_meets_square(&t, p) {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// `θ(s,t) = (1−t)/(1−s)`, with `θ(1,1) = 0`.
pub fn theta(s: Rat, t: Rat) -> Result<Rat> {
    check_range(s, t)?;
    let one = Rat::from_integer(1);
    if s == one {
        return Ok(Rat::from_integer(0));
    }
    Ok((one - t) / (one - s))
}

fn check_range(s: Rat, t: Rat) -> Result<()> {
    let (zero, one) = (Rat::from_integer(0), Rat::from_integer(1));
    if !(zero <= s && s <= t && t <= one) {
        return Err(Error::Invalid(format!("need 0 ≤ s ≤ t ≤ 1, got s={s}, t={t}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct IncidenceBound {
    /// `√(C_P C_T)·(Mδ^s)^{θ/2}·|𝒯|^{1/2}·|𝒫|`.
    pub main: Monomial,
    /// `|𝒯|`.
    pub trivial: u64,
    /// `k^c`, reported separately from the bound.
    pub log_factor: u128,
}

impl IncidenceBound {
    pub fn value(&self) -> Monomial {
        self.main.clone().max(Monomial::int(self.trivial as u128))
    }
}

#[derive(Clone, Debug)]
pub struct BoundInputs {
    pub c_p: Monomial,
    pub c_t: Monomial,
    pub m: u64,
    pub k: u32,
    pub s: Rat,
    pub t: Rat,
}

fn delta_pow(k: u32, e: Rat) -> Monomial {
    Monomial::pow2(-e * Rat::from_integer(k as i128))
}

/// Right-hand side of the incidence bound without its logarithmic factor.
pub fn incidence_upper_bound(b: &BoundInputs, n_tubes: u64, n_squares: u64, log_power: u32) -> Result<IncidenceBound> {
    let th = theta(b.s, b.t)?;
    if b.m == 0 || n_tubes == 0 {
        return Err(Error::Invalid("M and |T| must be positive".into()));
    }
    let m_delta = Monomial::int(b.m as u128).mul(&delta_pow(b.k, b.s));
    let main = b
        .c_p
        .mul(&b.c_t)
        .sqrt()
        .mul(&m_delta.powr(th / Rat::from_integer(2)))
        .mul(&Monomial::int(n_tubes as u128).sqrt())
        .mul(&Monomial::int(n_squares as u128));
    Ok(IncidenceBound { main, trivial: n_tubes, log_factor: (b.k as u128).pow(log_power) })
}

/// `(C_P C_T)⁻¹·Mδ^{-s}·(Mδ^s)^{(t−s)/(1−s)}`, exponent 1 when `s = t = 1`.
pub fn tube_lower_bound(b: &BoundInputs) -> Result<Monomial> {
    check_range(b.s, b.t)?;
    if b.m == 0 {
        return Err(Error::Invalid("M must be at least 1".into()));
    }
    let one = Rat::from_integer(1);
    let e = if b.s == one { one } else { (b.t - b.s) / (one - b.s) };
    let m = Monomial::int(b.m as u128);
    Ok(b.c_p
        .mul(&b.c_t)
        .recip()
        .mul(&m)
        .mul(&delta_pow(b.k, -b.s))
        .mul(&m.mul(&delta_pow(b.k, b.s)).powr(e)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    CountMismatch { p: DyadicSquare, got: usize, want: usize },
    Miss { p: DyadicSquare, tube: DyadicTube },
    Spread { p: DyadicSquare, constant: String },
    Empty,
}

#[derive(Clone, Debug)]
pub struct NiceReport {
    pub violation: Option<Violation>,
    /// Largest certificate among the `𝒯(p)` checked.
    pub max_c: Option<Monomial>,
}

impl NiceReport {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks the three defining properties; reports the first failure in
/// canonical square order.
pub fn validate_nice(config: &NiceConfiguration) -> NiceReport {
    if config.p.is_empty() {
        return NiceReport { violation: Some(Violation::Empty), max_c: None };
    }
    let results: Vec<std::result::Result<Monomial, Violation>> = par::map_range(config.p.len(), |i| {
        let p = config.p.cells()[i];
        let f = &config.tubes[i];
        if f.len() != config.m {
            return Err(Violation::CountMismatch { p, got: f.len(), want: config.m });
        }
        if let Some(t) = f.iter().find(|t| !tube_meets_square(t, &p)) {
            return Err(Violation::Miss { p, tube: t });
        }
        let c = spread_certificate(f.params(), config.s).map_err(|_| Violation::CountMismatch { p, got: 0, want: config.m })?.c();
        if c > config.c {
            return Err(Violation::Spread { p, constant: c.to_string() });
        }
        Ok(c)
    });
    let mut max_c: Option<Monomial> = None;
    for r in results {
        match r {
            Ok(c) => {
                if max_c.as_ref().is_none_or(|m| c > *m) {
                    max_c = Some(c);
                }
            }
            Err(v) => return NiceReport { violation: Some(v), max_c },
        }
    }
    NiceReport { violation: None, max_c }
}

/// Best constants `C_P = C(𝒫, t)` and `C_T = max_p C(𝒯(p), s)`.
pub fn certified_constants(config: &NiceConfiguration, t: Rat) -> Result<(Monomial, Monomial)> {
    let c_p = spread_certificate(&config.p, t)?.c();
    let cs: Vec<Result<Monomial>> = par::map(&config.tubes, |f| Ok(spread_certificate(f.params(), config.s)?.c()));
    let mut c_t = Monomial::ratio(1, 1 << 60);
    for c in cs {
        c_t = c_t.max(c?);
    }
    Ok((c_p, c_t))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Elementary {
    /// `max(1/2 + s, 2s)`.
    pub wolff: Rat,
    /// `2s`.
    pub elementary_furstenberg: Rat,
    /// `2s`; the improvement `ε` has no explicit value.
    pub target_base: Rat,
}

pub fn elementary_exponents(s: Rat, t: Rat) -> Result<Elementary> {
    let (zero, one, two) = (Rat::from_integer(0), Rat::from_integer(1), Rat::from_integer(2));
    if !(zero < s && s < one && s < t && t <= two) {
        return Err(Error::Invalid(format!("need 0 < s < 1 and s < t ≤ 2, got s={s}, t={t}")));
    }
    let half = Rat::new(1, 2);
    Ok(Elementary { wolff: (half + s).max(two * s), elementary_furstenberg: two * s, target_base: two * s })
}

/// One row of the incidence report.
#[derive(Clone, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct IncidenceRow {
    pub delta: f64,
    pub s: f64,
    pub t: f64,
    pub M: u64,
    pub C_P: f64,
    pub C_T: f64,
    pub P_count: u64,
    pub T_count: u64,
    pub incidences: u64,
    pub bound: f64,
    pub ratio: f64,
}

pub const INCIDENCE_CSV_HEADER: [&str; 11] =
    ["delta", "s", "t", "M", "C_P", "C_T", "P_count", "T_count", "incidences", "bound", "ratio"];

/// Measured incidences against the bound, with certified constants.
#[derive(Clone, Debug)]
pub struct IncidenceMeasurement {
    pub inputs: BoundInputs,
    pub count: IncidenceCount,
    pub bound: IncidenceBound,
    pub lower: Monomial,
    pub n_tubes: u64,
    pub n_squares: u64,
}

impl IncidenceMeasurement {
    pub fn row(&self) -> IncidenceRow {
        let b = self.bound.value();
        IncidenceRow {
            delta: Scale::new(self.inputs.k).value(),
            s: rat_to_f64(&self.inputs.s),
            t: rat_to_f64(&self.inputs.t),
            M: self.inputs.m,
            C_P: self.inputs.c_p.to_f64(),
            C_T: self.inputs.c_t.to_f64(),
            P_count: self.n_squares,
            T_count: self.n_tubes,
            incidences: self.count.total,
            bound: b.to_f64(),
            ratio: self.count.total as f64 / b.to_f64(),
        }
    }

    /// `|ℐ| ≤ budget·bound` checked exactly.
    pub fn upper_holds(&self, budget: &Monomial) -> bool {
        Monomial::int(self.count.total as u128) <= budget.mul(&self.bound.value())
    }

    /// `|𝒯| ≥ lower/budget` checked exactly.
    pub fn lower_holds(&self, budget: &Monomial) -> bool {
        Monomial::int(self.n_tubes as u128).mul(budget) >= self.lower
    }
}

/// Counts incidences of `config` and evaluates both bounds, with `𝒫` taken
/// as a `(δ,t)`-set and each `𝒯(p)` as a `(δ,s)`-set.
pub fn measure(config: &NiceConfiguration, t: Rat, log_power: u32) -> Result<IncidenceMeasurement> {
    let universe = config.tube_union();
    let count = count_incidences(config, &universe, true)?;
    let (c_p, c_t) = certified_constants(config, t)?;
    let inputs = BoundInputs { c_p, c_t, m: config.m as u64, k: config.k(), s: config.s, t };
    let n_tubes = universe.len() as u64;
    let n_squares = config.p.len() as u64;
    let bound = incidence_upper_bound(&inputs, n_tubes, n_squares, log_power)?;
    let lower = tube_lower_bound(&inputs)?;
    Ok(IncidenceMeasurement { inputs, count, bound, lower, n_tubes, n_squares })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Family;
    use crate::exact::rat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sq(k: u32, x: i64, y: i64) -> DyadicSquare {
        DyadicSquare::new(k, x, y)
    }

    fn fam(k: u32, v: Vec<DyadicTube>) -> TubeFamily {
        TubeFamily::new(Scale::new(k), Convention::MainText, v).unwrap()
    }

    /// Config with 𝒯(p) = all tubes through p among slopes 0..m at δ = 2⁻ᵏ.
    fn through_config(k: u32, pts: &[DyadicSquare], slopes: i64) -> NiceConfiguration {
        let n = 1i64 << k;
        let tubes: Vec<TubeFamily> = pts
            .iter()
            .map(|p| {
                let v: Vec<_> = (0..slopes)
                    .flat_map(|a| (-n..2 * n).map(move |b| DyadicTube::main(k, a, b)))
                    .filter(|t| tube_meets_square(t, p))
                    .collect();
                fam(k, v)
            })
            .collect();
        let p = Family::from_cells(Scale::new(k), pts.to_vec());
        let order: Vec<usize> = p.iter().map(|q| pts.iter().position(|x| x == q).unwrap()).collect();
        let tubes = order.into_iter().map(|i| tubes[i].clone()).collect();
        NiceConfiguration::new(rat(1, 2), Monomial::int(1 << 20), 0, p, tubes).unwrap()
    }

    #[test]
    fn shared_tubes_count() {
        let k = 3;
        let shared = fam(k, vec![DyadicTube::main(k, 0, 0), DyadicTube::main(k, 1, 0)]);
        let p = Family::from_cells(Scale::new(k), (0..4).map(|i| sq(k, i, 0)).collect());
        let cfg = NiceConfiguration::new(rat(1, 2), Monomial::int(8), 2, p, vec![shared.clone(); 4]).unwrap();
        let c = count_incidences(&cfg, &shared, true).unwrap();
        assert_eq!(c.total, 8);
        assert_eq!(c.per_tube.values().sum::<u64>(), 8);
        let single = NiceConfiguration::new(
            rat(1, 2),
            Monomial::int(8),
            1,
            Family::from_cells(Scale::new(k), vec![sq(k, 0, 0)]),
            vec![fam(k, vec![DyadicTube::main(k, 0, 0)])],
        )
        .unwrap();
        assert_eq!(count_incidences(&single, &shared, true).unwrap().total, 1);
        let other = fam(k, vec![DyadicTube::main(k, 3, 3)]);
        assert!(count_incidences(&single, &other, true).is_err());
        assert_eq!(count_incidences(&single, &other, false).unwrap().total, 1);
    }

    #[test]
    fn random_config_matches_double_loop() {
        let k = 5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..30).map(|_| sq(k, rng.gen_range(0..32), rng.gen_range(0..32))).collect();
        let cfg = through_config(k, &pts, 6);
        let universe = cfg.tube_union();
        let c = count_incidences(&cfg, &universe, true).unwrap();
        let mut brute = 0u64;
        for (p, f) in cfg.pairs() {
            for t in universe.iter() {
                if f.contains(&t) {
                    brute += 1;
                    assert!(tube_meets_square(&t, p));
                }
            }
        }
        assert_eq!(c.total, brute);
        let idx = TubeIndex::new(&universe);
        for (p, f) in cfg.pairs() {
            assert_eq!(&fam(k, idx.through(p)), f);
        }
    }

    #[test]
    fn theta_values() {
        assert_eq!(theta(rat(1, 2), rat(1, 1)).unwrap(), rat(0, 1));
        assert_eq!(theta(rat(1, 3), rat(1, 3)).unwrap(), rat(1, 1));
        assert_eq!(theta(rat(1, 1), rat(1, 1)).unwrap(), rat(0, 1));
        assert!(theta(rat(3, 4), rat(1, 2)).is_err());
    }

    #[test]
    fn upper_bound_cases() {
        let k = 8;
        let one = Monomial::one();
        // θ = 1, M = δ^{-s}: (Mδ^s) = 1.
        let b = BoundInputs { c_p: one.clone(), c_t: one.clone(), m: 16, k, s: rat(1, 2), t: rat(1, 2) };
        let r = incidence_upper_bound(&b, 100, 7, 2).unwrap();
        assert_eq!(r.main, Monomial::int(70));
        assert_eq!(r.value(), Monomial::int(100));
        assert_eq!(r.log_factor, 64);
        // θ = 0.
        let b = BoundInputs { c_p: Monomial::int(4), c_t: Monomial::int(9), m: 5, k, s: rat(1, 2), t: rat(1, 1) };
        assert_eq!(incidence_upper_bound(&b, 16, 3, 2).unwrap().main, Monomial::int(6 * 4 * 3));
        // (Mδ^s)^{θ/2} = 1 at M = 2⁴, s = 1/2, δ = 2⁻⁸.
        let b = BoundInputs { c_p: one.clone(), c_t: one, m: 16, k, s: rat(1, 2), t: rat(3, 4) };
        assert_eq!(incidence_upper_bound(&b, 4, 1, 0).unwrap().main, Monomial::int(2));
    }

    #[test]
    fn lower_bound_cases() {
        let k = 8;
        let b = BoundInputs { c_p: Monomial::int(2), c_t: Monomial::int(3), m: 4, k, s: rat(1, 2), t: rat(1, 2) };
        assert_eq!(tube_lower_bound(&b).unwrap(), Monomial::ratio(64, 6));
        let b = BoundInputs { c_p: Monomial::one(), c_t: Monomial::one(), m: 32, k, s: rat(1, 2), t: rat(1, 1) };
        assert_eq!(tube_lower_bound(&b).unwrap(), Monomial::int(1024));
        let b = BoundInputs { c_p: Monomial::one(), c_t: Monomial::one(), m: 3, k, s: rat(1, 1), t: rat(1, 1) };
        assert_eq!(tube_lower_bound(&b).unwrap(), Monomial::int(9));
    }

    #[test]
    fn validation_reports_first_violation() {
        let k = 3;
        let p = Family::from_cells(Scale::new(k), vec![sq(k, 0, 0), sq(k, 4, 4)]);
        let good = fam(k, vec![DyadicTube::main(k, 0, 0), DyadicTube::main(k, 2, 0)]);
        let through_second = fam(k, vec![DyadicTube::main(k, 0, 4), DyadicTube::main(k, 4, 2)]);
        let cfg = NiceConfiguration::new(rat(1, 2), Monomial::int(8), 2, p.clone(), vec![good.clone(), through_second.clone()]).unwrap();
        assert!(validate_nice(&cfg).is_valid());
        let bad = fam(k, vec![DyadicTube::main(k, 0, 0), DyadicTube::main(k, 0, 5)]);
        let cfg = NiceConfiguration::new(rat(1, 2), Monomial::int(8), 2, p.clone(), vec![bad, through_second.clone()]).unwrap();
        assert_eq!(
            validate_nice(&cfg).violation,
            Some(Violation::Miss { p: sq(k, 0, 0), tube: DyadicTube::main(k, 0, 5) })
        );
        let short = fam(k, vec![DyadicTube::main(k, 0, 4)]);
        let cfg = NiceConfiguration::new(rat(1, 2), Monomial::int(8), 2, p.clone(), vec![good.clone(), short]).unwrap();
        assert!(matches!(validate_nice(&cfg).violation, Some(Violation::CountMismatch { got: 1, .. })));
        let cfg = NiceConfiguration::new(rat(1, 2), Monomial::ratio(1, 2), 2, p, vec![good, through_second]).unwrap();
        assert!(matches!(validate_nice(&cfg).violation, Some(Violation::Spread { .. })));
    }

    #[test]
    fn elementary() {
        assert_eq!(elementary_exponents(rat(1, 2), rat(1, 1)).unwrap().wolff, rat(1, 1));
        assert_eq!(elementary_exponents(rat(3, 4), rat(1, 1)).unwrap().wolff, rat(3, 2));
        assert_eq!(elementary_exponents(rat(1, 4), rat(1, 1)).unwrap().wolff, rat(3, 4));
        assert!(elementary_exponents(rat(1, 2), rat(1, 2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn counting_is_additive(pts in prop::collection::vec((0i64..16, 0i64..16), 2..20), cut in 1usize..19) {
            let k = 4;
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| sq(k, x, y)).collect();
            let cfg = through_config(k, &pts, 4);
            let universe = cfg.tube_union();
            let cut = cut.min(cfg.p.len());
            let left = Family::from_cells(Scale::new(k), cfg.p.cells()[..cut].to_vec());
            let right = Family::from_cells(Scale::new(k), cfg.p.cells()[cut..].to_vec());
            let total = count_incidences(&cfg, &universe, true).unwrap().total;
            let a = count_incidences(&cfg.restrict(&left), &universe, true).unwrap().total;
            let b = count_incidences(&cfg.restrict(&right), &universe, true).unwrap().total;
            prop_assert_eq!(total, a + b);
        }

        #[test]
        fn lower_bound_below_trivial_cap(k in 4u32..12, sn in 0i128..=16, dt in 0i128..=16, frac in 0u64..=10) {
            // M between δ^{-s} and the 2δ^{-1} tubes a square can meet per slope pair.
            let s = rat(sn, 16);
            let t = (s + rat(dt, 16)).min(rat(1, 1));
            let lo = Monomial::pow2(s * Rat::from_integer(k as i128)).ceil() as u64;
            let hi = 2u64 << k;
            let m = lo + (hi - lo) * frac / 10;
            let b = BoundInputs { c_p: Monomial::one(), c_t: Monomial::one(), m, k, s, t };
            let cap = Monomial::int(4u128 << (2 * k));
            prop_assert!(tube_lower_bound(&b).unwrap() <= cap);
        }
    }
}
