//! Refinements of nice configurations: thick-tube covers, tube packets with
//! representatives, separated sub-families, and the two-scale decomposition.
//!
//! Every "pick a popular dyadic level" step maximises its exact objective and
//! breaks ties toward the smaller level. An empty bucket is an error.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::deltaset::spread_certificate;
use crate::dyadic::{renormalize, Cell, DyadicSquare, Family, Scale, SquareFamily};
use crate::exact::{ilog2_ceil, Monomial, Rat};
use crate::incidence::{validate_nice, NiceConfiguration};
use crate::tubes::{rescale_tube_cover, tube_meets_square, DyadicTube, TubeFamily};
use crate::{check, par, Error, Result};

/// Multiplier `A` in the logged budgets `A·(log₂ 1/δ)^p`.
pub const BUDGET_MULTIPLIER: u128 = 64;
/// Power of the logarithm allowed for constants and cardinality losses.
pub const BUDGET_POWER: u32 = 4;
/// Power of the logarithm allowed in the product inequality for `|𝒯₀|`.
pub const PRODUCT_POWER: u32 = 8;
/// Neighbourhood constant `C` in the separation criterion.
pub const SEPARATION_C: u32 = 8;
/// Intercept gap (in grid steps) implying separation: `⌈2 + 2√2·C⌉`.
pub const SEPARATION_GAP: i64 = 25;

/// `A·k^p`.
pub fn log_budget(k: u32, mult: u128, power: u32) -> Monomial {
    Monomial::int(mult * (k.max(1) as u128).pow(power))
}

fn max_certificate(fams: &[TubeFamily], s: Rat) -> Result<Monomial> {
    let cs: Vec<Result<Monomial>> = par::map(fams, |f| Ok(spread_certificate(f.params(), s)?.c()));
    let mut c = Monomial::ratio(1, 1 << 60);
    for x in cs {
        c = c.max(x?);
    }
    Ok(c)
}

/// Picks the key maximising `weight`, ties to the smallest key.
fn argmax<K: Copy + Ord>(items: impl IntoIterator<Item = (K, u128)>) -> Option<K> {
    let mut best: Option<(K, u128)> = None;
    for (k, w) in items {
        best = match best {
            Some((bk, bw)) if bw > w || (bw == w && bk < k) => Some((bk, bw)),
            _ => Some((k, w)),
        };
    }
    best.map(|b| b.0)
}

/// Shrinks a set to `target` cells, each time deleting a cell from the most
/// crowded branch of the dyadic tree, so the survivors stay spread out.
pub fn trim_spread<C: Cell>(mut cells: Vec<C>, target: usize) -> Vec<C> {
    cells.sort_unstable();
    cells.dedup();
    while cells.len() > target {
        let k = cells[0].k();
        let mut pool: Vec<usize> = (0..cells.len()).collect();
        for j in 0..=k {
            let mut groups: BTreeMap<C, Vec<usize>> = BTreeMap::new();
            for &i in &pool {
                groups.entry(cells[i].ancestor(j)).or_default().push(i);
            }
            let key = argmax(groups.iter().map(|(c, v)| (*c, v.len() as u128))).unwrap();
            pool = groups.remove(&key).unwrap();
        }
        cells.remove(pool[0]);
    }
    cells
}

#[derive(Clone, Debug, Serialize)]
pub struct ThickTrace {
    pub m: usize,
    pub p_count: usize,
    pub cover_count: usize,
    /// Selected level for the per-square bucketing, and `m₁ = 2^j`.
    pub j_p: u32,
    pub m1: u64,
    /// `m₂ = M/m₁`, as `num/den`.
    pub m2: String,
    /// Selected level for the thick-tube bucketing.
    pub j_t: u32,
    /// `(level, number of squares)` of the majority vote.
    pub p_levels: Vec<(u32, usize)>,
    /// `(level, number of thick tubes)` of the final bucketing.
    pub t_levels: Vec<(u32, usize)>,
    pub h: u64,
    pub min_incidence: u64,
}

/// Output of [`thick_tube_refine`].
#[derive(Clone, Debug)]
pub struct ThickCover {
    pub k_delta: u32,
    /// `𝒫̄`.
    pub p_bar: SquareFamily,
    /// `𝒯_Δ(p)` for `p ∈ 𝒫̄`, aligned with `p_bar`.
    pub thick_of: Vec<TubeFamily>,
    /// `𝒯̄_Δ`.
    pub t_bar: TubeFamily,
    pub h: u64,
    /// Largest certificate among the input families.
    pub c1: Monomial,
    /// Certificate of `𝒯̄_Δ`.
    pub c2: Monomial,
    /// `|{(p,T) : p ∈ 𝒫̄, T ∈ 𝒯(p), T ⊂ 𝐓}|` for each `𝐓 ∈ 𝒯̄_Δ`.
    pub incidences: BTreeMap<DyadicTube, u64>,
    pub trace: ThickTrace,
}

/// Covers the tubes of a nice configuration by `Δ`-tubes, `Δ = 2^{-k_delta}`,
/// refining the squares until the thick family is again a `(Δ,s)`-set.
///
/// Fails when a thick tube carries fewer than `H/8` incidences or when the
/// certificate of `𝒯̄_Δ` exceeds `64·(log₂ 1/δ)⁴·C₁`.
pub fn thick_tube_refine(config: &NiceConfiguration, k_delta: u32) -> Result<ThickCover> {
    let fams: Vec<&TubeFamily> = config.tubes.iter().collect();
    thick_core(config.p.cells(), &fams, config.m, config.s, k_delta)
}

fn thick_core(points: &[DyadicSquare], fams: &[&TubeFamily], m: usize, s: Rat, kd: u32) -> Result<ThickCover> {
    if points.is_empty() {
        return Err(Error::Empty("thick cover of an empty configuration"));
    }
    let k = fams[0].k();
    if kd > k {
        return Err(Error::Scale(format!("Δ = 2^-{kd} is finer than δ = 2^-{k}")));
    }
    let conv = fams[0].convention();
    let delta2 = 1u128 << (2 * kd);
    // Per square: number of its tubes inside each thick tube.
    let counts: Vec<BTreeMap<DyadicTube, u64>> = par::map(fams, |f| {
        let mut c = BTreeMap::new();
        for t in f.iter() {
            *c.entry(t.ancestor(kd)).or_insert(0u64) += 1;
        }
        c
    });
    // 2^j ≥ MΔ²/200.
    let level_ok = |j: u32| (1u128 << j) * 200 * delta2 >= m as u128;
    let choices: Vec<Option<u32>> = par::map(&counts, |c| {
        let mut per: BTreeMap<u32, u128> = BTreeMap::new();
        for &n in c.values() {
            *per.entry(ilog2_ceil(n)).or_insert(0) += 1;
        }
        argmax(per.into_iter().filter(|(j, _)| level_ok(*j)).map(|(j, n)| (j, n << j)))
    });
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, c) in choices.iter().enumerate() {
        let j = c.ok_or_else(|| Error::Check(format!("empty level bucket for square {:?}", points[i])))?;
        *votes.entry(j).or_insert(0) += 1;
    }
    let j_p = argmax(votes.iter().map(|(j, n)| (*j, *n as u128))).unwrap();
    let m1 = 1u64 << j_p;
    let keep: Vec<usize> = (0..points.len()).filter(|&i| choices[i] == Some(j_p)).collect();
    let thick_of: Vec<Vec<DyadicTube>> = keep
        .iter()
        .map(|&i| counts[i].iter().filter(|(_, &n)| ilog2_ceil(n) == j_p).map(|(t, _)| *t).collect())
        .collect();
    let mut n_of: BTreeMap<DyadicTube, u64> = BTreeMap::new();
    for f in &thick_of {
        for t in f {
            *n_of.entry(*t).or_insert(0) += 1;
        }
    }
    let pbar = keep.len() as u128;
    let mut per: BTreeMap<u32, usize> = BTreeMap::new();
    for &n in n_of.values() {
        *per.entry(ilog2_ceil(n)).or_insert(0) += 1;
    }
    // 2^j ≥ |𝒫̄|Δ²/200.
    let j_t = argmax(
        per.iter().filter(|(j, _)| (1u128 << **j) * 200 * delta2 >= pbar).map(|(j, n)| (*j, (*n as u128) << j)),
    )
    .ok_or_else(|| Error::Check("empty thick-tube bucket".into()))?;
    let t_bar: Vec<DyadicTube> = n_of.iter().filter(|(_, &n)| ilog2_ceil(n) == j_t).map(|(t, _)| *t).collect();
    let h = (1u64 << j_t) * m1;
    let mut incidences: BTreeMap<DyadicTube, u64> = t_bar.iter().map(|t| (*t, 0)).collect();
    for &i in &keep {
        for (t, n) in &counts[i] {
            if let Some(x) = incidences.get_mut(t) {
                *x += n;
            }
        }
    }
    let min_incidence = incidences.values().copied().min().unwrap_or(0);
    check(8 * min_incidence >= h, || format!("thick tube with {min_incidence} incidences below H/8, H = {h}"))?;
    let scale = Scale::new(kd);
    let t_bar = TubeFamily::new(scale, conv, t_bar)?;
    let owned: Vec<TubeFamily> = fams.iter().map(|f| (*f).clone()).collect();
    let c1 = max_certificate(&owned, s)?;
    let c2 = spread_certificate(t_bar.params(), s)?.c();
    let budget = log_budget(k, BUDGET_MULTIPLIER, BUDGET_POWER).mul(&c1);
    check(c2 <= budget, || format!("thick certificate {c2} above budget {budget}"))?;
    let p_bar = Family::from_cells(points[0].scale(), keep.iter().map(|&i| points[i]).collect());
    let thick_of = thick_of.into_iter().map(|v| TubeFamily::new(scale, conv, v)).collect::<Result<Vec<_>>>()?;
    let m2 = Rat::new(m as i128, m1 as i128);
    let trace = ThickTrace {
        m,
        p_count: points.len(),
        cover_count: n_of.len(),
        j_p,
        m1,
        m2: format!("{}/{}", m2.numer(), m2.denom()),
        j_t,
        p_levels: votes.into_iter().collect(),
        t_levels: per.into_iter().collect(),
        h,
        min_incidence,
    };
    Ok(ThickCover { k_delta: kd, p_bar, thick_of, t_bar, h, c1, c2, incidences, trace })
}

/// Tubes of `𝒯(p)` sharing one ancestor at scale `δ̄`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TubePacket {
    pub owner: DyadicSquare,
    pub parent: DyadicTube,
    pub members: Vec<DyadicTube>,
    /// A `δ`-tube meeting `p`, inside `parent`, with the parent's slope.
    pub representative: Option<DyadicTube>,
}

/// Representative of a packet: the slope is the parent's, and the intercept
/// slides down from the lowest member (then up) until the tube meets `p`.
pub fn representative(parent: &DyadicTube, members: &[DyadicTube], p: &DyadicSquare) -> Option<DyadicTube> {
    let k = members.first()?.k();
    let d = k - parent.k();
    let slope = parent.param.ix << d;
    let lo = parent.param.iy << d;
    let hi = (parent.param.iy + 1) << d;
    let start = members.iter().map(|t| t.param.iy).min()?;
    let make = |b: i64| DyadicTube { param: DyadicSquare::new(k, slope, b), convention: parent.convention };
    (lo..=start).rev().chain(start + 1..hi).map(make).find(|t| tube_meets_square(t, p))
}

/// Partitions `𝒯(p)` into packets by `δ̄`-ancestor, `δ̄ = 2^{-k_bar}`.
pub fn tube_packets(tp: &TubeFamily, p: &DyadicSquare, k_bar: u32) -> Result<Vec<TubePacket>> {
    if k_bar > tp.k() {
        return Err(Error::Scale(format!("δ̄ = 2^-{k_bar} finer than the tubes at 2^-{}", tp.k())));
    }
    let mut groups: BTreeMap<DyadicTube, Vec<DyadicTube>> = BTreeMap::new();
    for t in tp.iter() {
        if !tube_meets_square(&t, p) {
            return Err(Error::Invalid(format!("tube {t:?} misses {p:?}")));
        }
        groups.entry(t.ancestor(k_bar)).or_default().push(t);
    }
    Ok(groups
        .into_iter()
        .map(|(parent, members)| {
            let representative = representative(&parent, &members, p);
            TubePacket { owner: *p, parent, members, representative }
        })
        .collect())
}

/// Whether two tubes are separated: distinct slopes, or intercepts at least
/// [`SEPARATION_GAP`] grid steps apart. For slopes in `[-1,1]` and `|u| ≤ 1`
/// the latter makes the `8δ`-neighbourhoods disjoint.
pub fn are_separated(a: &DyadicTube, b: &DyadicTube) -> bool {
    a.param.ix != b.param.ix || (a.param.iy - b.param.iy).abs() >= SEPARATION_GAP
}

/// Greedy separated sub-family: per slope, scan by intercept and keep a tube
/// when it is at least `gap` steps above the last kept one. Keeps at least
/// `1/gap` of each slope class.
pub fn separated_subset(tubes: &[DyadicTube], gap: i64) -> Vec<DyadicTube> {
    let mut sorted = tubes.to_vec();
    sorted.sort_unstable_by_key(|t| (t.param.ix, t.param.iy));
    sorted.dedup();
    let mut out: Vec<DyadicTube> = Vec::new();
    for t in sorted {
        match out.last() {
            Some(l) if l.param.ix == t.param.ix && t.param.iy - l.param.iy < gap => {}
            _ => out.push(t),
        }
    }
    out.sort_unstable();
    out
}

/// `(S_Q(𝒫∩Q), 𝒯_Q)` with the data used to bound `|𝒯(Q)|` from below.
#[derive(Clone, Debug)]
pub struct FineConfiguration {
    pub q: DyadicSquare,
    /// Nice configuration at scale `δ/Δ`.
    pub config: NiceConfiguration,
    /// `𝒯_Q`, the union of the rescaled covers of the representatives.
    pub tubes: TubeFamily,
    pub m_q: usize,
    /// Representatives `𝒯'` (tubes at scale `δ`).
    pub representatives: Vec<DyadicTube>,
    /// Separated sub-family `𝒯''`.
    pub separated: Vec<DyadicTube>,
    /// `Σ_{T ∈ 𝒯''} |Ξ(T)|`; the packets are disjoint, so this is at most `|𝒯(Q)|`.
    pub packets_covered: usize,
    /// `|𝒯(Q)|`.
    pub t_of_q: usize,
    pub dropped_packets: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct InductionTrace {
    pub m: usize,
    pub q0: usize,
    pub q_final: usize,
    pub m_bar_delta: u64,
    pub n_delta: u64,
    /// Common size of `𝒯_Δ(Q)` when `𝒯(p)` is formed.
    pub m_trim: usize,
    /// `M_Δ` of the coarse configuration, after dropping orphans.
    pub m_delta: usize,
    pub t0: usize,
    pub coarse_tubes: usize,
    /// Thick tubes of the coarse families no longer containing a tube of `𝒯`.
    pub orphan_thick: usize,
    pub dropped_packets: usize,
    /// Smallest budget for which the product inequality holds, `num/den`.
    pub budget: String,
    pub budget_f64: f64,
    pub thick: Vec<ThickTrace>,
}

/// Output of [`induction_on_scales`].
#[derive(Clone, Debug)]
pub struct InductionResult {
    pub k: u32,
    pub k_delta: u32,
    /// `𝒫` with `𝒯(p)` aligned.
    pub p: SquareFamily,
    pub tubes: Vec<TubeFamily>,
    /// `(𝒟_Δ(𝒫), 𝒯_Δ(Q))` at scale `Δ`.
    pub coarse: NiceConfiguration,
    /// `𝒯^Δ(𝒯)`.
    pub coarse_tubes: TubeFamily,
    /// One entry per `Q`, aligned with `coarse.p`.
    pub fine: Vec<FineConfiguration>,
    pub c1: Monomial,
    pub budget: Rat,
    pub trace: InductionTrace,
}

struct QStage {
    q: DyadicSquare,
    cover: ThickCover,
    thick: Vec<DyadicTube>,
}

/// Splits a nice configuration at `δ` into a coarse one at `Δ = 2^{-k_delta}`
/// and one fine configuration at `δ/Δ` per coarse square.
pub fn induction_on_scales(config: &NiceConfiguration, k_delta: u32) -> Result<InductionResult> {
    let k = config.k();
    let kd = k_delta;
    if kd >= k {
        return Err(Error::Scale(format!("need δ < Δ; got δ = 2^-{k}, Δ = 2^-{kd}")));
    }
    if config.p.is_empty() {
        return Err(Error::Empty("induction on an empty configuration"));
    }
    let report = validate_nice(config);
    if let Some(v) = report.violation {
        return Err(Error::Invalid(format!("input is not nice: {v:?}")));
    }
    let (s, m, kbar, conv) = (config.s, config.m, k - kd, config.convention());
    let c1 = max_certificate(&config.tubes, s)?;
    let mut groups: BTreeMap<DyadicSquare, Vec<usize>> = BTreeMap::new();
    for (i, p) in config.p.iter().enumerate() {
        groups.entry(p.ancestor(kd)).or_default().push(i);
    }
    let q0 = groups.len();
    let groups: Vec<(DyadicSquare, Vec<usize>)> = groups.into_iter().collect();
    let covers: Vec<Result<ThickCover>> = par::map(&groups, |(_, idx)| {
        let pts: Vec<DyadicSquare> = idx.iter().map(|&i| config.p.cells()[i]).collect();
        let fams: Vec<&TubeFamily> = idx.iter().map(|&i| &config.tubes[i]).collect();
        thick_core(&pts, &fams, m, s, kd)
    });
    let mut stages = Vec::with_capacity(q0);
    for ((q, _), c) in groups.iter().zip(covers) {
        let cover = c?;
        stages.push(QStage { q: *q, thick: cover.t_bar.to_vec(), cover });
    }
    // |𝒯̄_Δ(Q)| ∼ M̄_Δ on the most popular level.
    let mut per: BTreeMap<u32, usize> = BTreeMap::new();
    for st in &stages {
        *per.entry(ilog2_ceil(st.thick.len() as u64)).or_insert(0) += 1;
    }
    let j_m = argmax(per.iter().map(|(j, n)| (*j, *n as u128))).unwrap();
    stages.retain(|st| ilog2_ceil(st.thick.len() as u64) == j_m);
    let m_bar_delta = 1u64 << j_m;
    // |𝒯₀ ∩ 𝐓| ∼ N_Δ.
    let t0 = config.tube_union();
    let mut n0: BTreeMap<DyadicTube, u64> = BTreeMap::new();
    for t in t0.iter() {
        *n0.entry(t.ancestor(kd)).or_insert(0) += 1;
    }
    let level = |t: &DyadicTube| ilog2_ceil(n0[t]);
    let mut weight: BTreeMap<u32, u128> = BTreeMap::new();
    for st in &stages {
        for t in &st.thick {
            *weight.entry(level(t)).or_insert(0) += 1;
        }
    }
    let j_n = argmax(weight).ok_or_else(|| Error::Check("no thick tubes".into()))?;
    let n_delta = 1u64 << j_n;
    for st in stages.iter_mut() {
        st.thick.retain(|t| level(t) == j_n);
    }
    let total: usize = stages.iter().map(|st| st.thick.len()).sum();
    let nq = stages.len();
    stages.retain(|st| !st.thick.is_empty() && 2 * st.thick.len() * nq >= total);
    let m_trim = stages.iter().map(|st| st.thick.len()).min().ok_or(Error::Empty("no coarse squares left"))?;
    for st in stages.iter_mut() {
        let params = st.thick.iter().map(|t| t.param).collect();
        st.thick = trim_spread(params, m_trim).into_iter().map(|param| DyadicTube { param, convention: conv }).collect();
    }
    let fine: Vec<Result<Option<FineOut>>> = par::map(&stages, |st| fine_stage(config, st, kd, kbar, conv));
    let mut fines = Vec::new();
    let mut pairs: Vec<(DyadicSquare, TubeFamily)> = Vec::new();
    let mut kept = Vec::with_capacity(stages.len());
    // A `Q` whose squares all lose their packets leaves the coarse configuration.
    for (st, f) in stages.into_iter().zip(fine) {
        if let Some((fc, ps)) = f? {
            fines.push(fc);
            pairs.extend(ps);
            kept.push(st);
        }
    }
    let stages = kept;
    if stages.is_empty() {
        return Err(Error::Empty("every coarse square lost its squares"));
    }
    pairs.sort_by_key(|a| a.0);
    let p = Family::from_cells(config.scale(), pairs.iter().map(|x| x.0).collect());
    let tubes: Vec<TubeFamily> = pairs.into_iter().map(|x| x.1).collect();
    let all: BTreeSet<DyadicTube> = tubes.iter().flat_map(|f| f.iter()).collect();
    let coarse_set: BTreeSet<DyadicTube> = all.iter().map(|t| t.ancestor(kd)).collect();
    let orphan_thick = stages.iter().flat_map(|st| st.thick.iter()).filter(|t| !coarse_set.contains(t)).count();
    let coarse_tubes = TubeFamily::new(Scale::new(kd), conv, coarse_set.into_iter().collect())?;
    // Coarse families must lie in 𝒯^Δ(𝒯): drop orphans, then equalise sizes again.
    let alive: Vec<Vec<DyadicSquare>> = stages
        .iter()
        .map(|st| st.thick.iter().filter(|t| coarse_tubes.contains(t)).map(|t| t.param).collect())
        .collect();
    let m_delta = alive.iter().map(Vec::len).min().unwrap_or(0);
    check(m_delta > 0, || "a coarse square lost all its thick tubes".into())?;
    let coarse_fams: Vec<TubeFamily> = alive
        .into_iter()
        .map(|v| {
            let v = trim_spread(v, m_delta).into_iter().map(|param| DyadicTube { param, convention: conv }).collect();
            TubeFamily::new(Scale::new(kd), conv, v)
        })
        .collect::<Result<_>>()?;
    let c_delta = max_certificate(&coarse_fams, s)?;
    let coarse_p = Family::from_cells(Scale::new(kd), stages.iter().map(|st| st.q).collect());
    let coarse = NiceConfiguration::new(s, c_delta, m_delta, coarse_p, coarse_fams)?;
    // Smallest budget B with |𝒯₀|/M ≥ B⁻¹·(|𝒯^Δ(𝒯)|/M_Δ)·max_Q |𝒯_Q|/M_Q.
    let best_q = fines
        .iter()
        .map(|f| Rat::new(f.tubes.len() as i128, f.m_q as i128))
        .max()
        .ok_or(Error::Empty("no fine configurations"))?;
    let budget = Rat::new(coarse_tubes.len() as i128 * m as i128, m_delta as i128 * t0.len() as i128) * best_q;
    let trace = InductionTrace {
        m,
        q0,
        q_final: fines.len(),
        m_bar_delta,
        n_delta,
        m_trim,
        m_delta,
        t0: t0.len(),
        coarse_tubes: coarse_tubes.len(),
        orphan_thick,
        dropped_packets: fines.iter().map(|f| f.dropped_packets).sum(),
        budget: format!("{}/{}", budget.numer(), budget.denom()),
        budget_f64: *budget.numer() as f64 / *budget.denom() as f64,
        thick: stages.iter().map(|st| st.cover.trace.clone()).collect(),
    };
    Ok(InductionResult { k, k_delta: kd, p, tubes, coarse, coarse_tubes, fine: fines, c1, budget, trace })
}

/// Keeps the indices whose value is at least half the average.
fn above_half_average(values: &[usize]) -> Vec<usize> {
    let total: usize = values.iter().sum();
    (0..values.len()).filter(|&i| values[i] > 0 && 2 * values[i] * values.len() >= total).collect()
}

type FineOut = (FineConfiguration, Vec<(DyadicSquare, TubeFamily)>);

fn fine_stage(
    config: &NiceConfiguration,
    st: &QStage,
    kd: u32,
    kbar: u32,
    conv: crate::tubes::Convention,
) -> Result<Option<FineOut>> {
    let scale = config.scale();
    let thick: BTreeSet<DyadicTube> = st.thick.iter().copied().collect();
    // 𝒯(p) = ∪_{𝐓 ∈ 𝒯_Δ(Q)} 𝒯₀(p) ∩ 𝐓.
    let fam: Vec<(DyadicSquare, Vec<DyadicTube>)> = st
        .cover
        .p_bar
        .iter()
        .map(|p| {
            let f = config.tubes_of(p).expect("square of the configuration");
            (*p, f.iter().filter(|t| thick.contains(&t.ancestor(kd))).collect())
        })
        .collect();
    let sizes: Vec<usize> = fam.iter().map(|x| x.1.len()).collect();
    let fam: Vec<(DyadicSquare, Vec<DyadicTube>)> = above_half_average(&sizes).into_iter().map(|i| fam[i].clone()).collect();
    // Packets, the popular packet size, representatives and their images.
    struct PStage {
        p: DyadicSquare,
        tubes: Vec<DyadicTube>,
        packets: Vec<TubePacket>,
        /// image tube at δ̄ -> (representative, packet index)
        images: BTreeMap<DyadicTube, (DyadicTube, usize)>,
        dropped: usize,
    }
    let mut pst = Vec::with_capacity(fam.len());
    for (p, tubes) in fam {
        let tf = TubeFamily::new(scale, conv, tubes.clone())?;
        let packets = tube_packets(&tf, &p, kbar)?;
        let mut per: BTreeMap<u32, u128> = BTreeMap::new();
        for pk in &packets {
            *per.entry(ilog2_ceil(pk.members.len() as u64)).or_insert(0) += 1;
        }
        let j = argmax(per.into_iter().map(|(j, n)| (j, n << j))).unwrap();
        let packets: Vec<TubePacket> =
            packets.into_iter().filter(|pk| ilog2_ceil(pk.members.len() as u64) == j).collect();
        let q = crate::dyadic::DyadicSquare::new(kbar, p.ix - (st.q.ix << kbar), p.iy - (st.q.iy << kbar));
        let mut images = BTreeMap::new();
        let mut dropped = 0;
        for (i, pk) in packets.iter().enumerate() {
            let Some(rep) = pk.representative else {
                dropped += 1;
                continue;
            };
            let cover = rescale_tube_cover(&rep, &st.q)?;
            let img = cover
                .into_iter()
                .find(|t| tube_meets_square(t, &q))
                .ok_or_else(|| Error::Check(format!("no rescaled tube of {rep:?} meets {q:?}")))?;
            images.entry(img).or_insert((rep, i));
        }
        if images.is_empty() {
            continue;
        }
        pst.push(PStage { p, tubes, packets, images, dropped });
    }
    // M(p) ∼ M_Q on the most popular level; then trim to M_Q exactly.
    let mut per: BTreeMap<u32, usize> = BTreeMap::new();
    for x in &pst {
        *per.entry(ilog2_ceil(x.images.len() as u64)).or_insert(0) += 1;
    }
    let Some(j) = argmax(per.iter().map(|(j, n)| (*j, *n as u128))) else {
        return Ok(None);
    };
    pst.retain(|x| ilog2_ceil(x.images.len() as u64) == j);
    let m_q = pst.iter().map(|x| x.images.len()).min().unwrap();
    let mut reps: BTreeMap<DyadicTube, BTreeSet<DyadicTube>> = BTreeMap::new();
    let mut q_pairs = Vec::new();
    let mut out_pairs = Vec::new();
    let mut t_of_q: BTreeSet<DyadicTube> = BTreeSet::new();
    let mut t_q: BTreeSet<DyadicTube> = BTreeSet::new();
    let mut dropped = 0;
    for x in &pst {
        let kept = trim_spread(x.images.keys().map(|t| t.param).collect(), m_q);
        let mut fam_q = Vec::with_capacity(m_q);
        for param in kept {
            let img = DyadicTube { param, convention: conv };
            let (rep, i) = x.images[&img];
            reps.entry(rep).or_default().extend(x.packets[i].members.iter().copied());
            t_q.extend(rescale_tube_cover(&rep, &st.q)?);
            fam_q.push(img);
        }
        dropped += x.dropped;
        t_of_q.extend(x.tubes.iter().copied());
        let q = DyadicSquare::new(kbar, x.p.ix - (st.q.ix << kbar), x.p.iy - (st.q.iy << kbar));
        q_pairs.push((q, TubeFamily::new(Scale::new(kbar), conv, fam_q)?));
        out_pairs.push((x.p, TubeFamily::new(scale, conv, x.tubes.clone())?));
    }
    let representatives: Vec<DyadicTube> = reps.keys().copied().collect();
    let separated = separated_subset(&representatives, SEPARATION_GAP);
    // Packets represented by separated tubes must be disjoint.
    let mut owner: BTreeMap<DyadicTube, DyadicTube> = BTreeMap::new();
    let mut packets_covered = 0;
    for r in &separated {
        for t in &reps[r] {
            if let Some(prev) = owner.insert(*t, *r) {
                return Err(Error::Check(format!("separated tubes {prev:?} and {r:?} share the packet tube {t:?}")));
            }
            packets_covered += 1;
        }
    }
    q_pairs.sort_by_key(|a| a.0);
    let qp = Family::from_cells(Scale::new(kbar), q_pairs.iter().map(|x| x.0).collect());
    let qf: Vec<TubeFamily> = q_pairs.into_iter().map(|x| x.1).collect();
    let c_q = max_certificate(&qf, config.s)?;
    let fine = NiceConfiguration::new(config.s, c_q, m_q, qp, qf)?;
    Ok(Some((
        FineConfiguration {
            q: st.q,
            config: fine,
            tubes: TubeFamily::new(Scale::new(kbar), conv, t_q.into_iter().collect())?,
            m_q,
            representatives,
            separated,
            packets_covered,
            t_of_q: t_of_q.len(),
            dropped_packets: dropped,
        },
        out_pairs,
    )))
}

/// Outcome of the independent checks on an [`InductionResult`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct InductionReport {
    /// Coarse squares and per-`Q` cardinalities kept up to the budget.
    pub i: bool,
    /// `|𝒯(p)| ≥ M / budget` and `𝒯(p) ⊂ 𝒯₀(p)`.
    pub ii: bool,
    /// Coarse pair nice, families inside `𝒯^Δ(𝒯)`, constant within budget.
    pub iii: bool,
    /// Every fine pair nice over `S_Q(𝒫∩Q)` with constant within budget.
    pub iv: bool,
    /// Product inequality with budget `(log₂ 1/δ)^8`.
    pub product: bool,
    pub failures: Vec<String>,
}

impl InductionReport {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii && self.iv && self.product
    }
}

/// Recomputes the four conclusions and the product inequality from scratch.
pub fn validate_induction(original: &NiceConfiguration, r: &InductionResult) -> InductionReport {
    let mut out = InductionReport::default();
    let k = r.k;
    let kd = r.k_delta;
    let loss = (k.max(1) as usize).pow(BUDGET_POWER);
    let cbudget = log_budget(k, BUDGET_MULTIPLIER, BUDGET_POWER).mul(&r.c1);
    let count_in = |f: &SquareFamily, q: &DyadicSquare| f.iter().filter(|p| q.contains(p)).count();
    let d0: BTreeSet<DyadicSquare> = original.p.iter().map(|p| p.ancestor(kd)).collect();
    let d: BTreeSet<DyadicSquare> = r.p.iter().map(|p| p.ancestor(kd)).collect();
    let mut fails = Vec::new();
    let mut i_ok = d.len() * loss >= d0.len() && d.iter().copied().eq(r.coarse.p.iter().copied());
    for q in &d {
        if count_in(&r.p, q) * loss < count_in(&original.p, q) {
            i_ok = false;
            fails.push(format!("(i) square count in {q:?}"));
        }
    }
    out.i = i_ok;
    let mut ii_ok = r.p.is_subset(&original.p) && r.p.len() == r.tubes.len();
    for (p, f) in r.p.iter().zip(&r.tubes) {
        let f0 = original.tubes_of(p);
        if f.len() * loss < original.m || !f0.is_some_and(|f0| f.iter().all(|t| f0.contains(&t))) {
            ii_ok = false;
            fails.push(format!("(ii) family of {p:?}"));
        }
    }
    out.ii = ii_ok;
    let rep = validate_nice(&r.coarse);
    let inside = r.coarse.tubes.iter().all(|f| f.iter().all(|t| r.coarse_tubes.contains(&t)));
    let coarse_c = rep.max_c.clone().unwrap_or_else(Monomial::one);
    out.iii = rep.is_valid() && inside && coarse_c <= cbudget;
    if !out.iii {
        fails.push(format!("(iii) nice={} inside={} C={coarse_c}", rep.is_valid(), inside));
    }
    let mut iv_ok = r.fine.len() == r.coarse.p.len();
    for (q, f) in r.coarse.p.iter().zip(&r.fine) {
        let rep = validate_nice(&f.config);
        let want = renormalize(&r.p, q).ok();
        let c = rep.max_c.clone().unwrap_or_else(Monomial::one);
        let sub = f.config.tubes.iter().all(|g| g.iter().all(|t| f.tubes.contains(&t)));
        if !(rep.is_valid() && want.as_ref() == Some(&f.config.p) && c <= cbudget && sub && f.q == *q) {
            iv_ok = false;
            fails.push(format!("(iv) fine configuration of {q:?}: nice={} C={c}", rep.is_valid()));
        }
    }
    out.iv = iv_ok;
    let t0 = original.tube_union().len() as i128;
    let best = r.fine.iter().map(|f| Rat::new(f.tubes.len() as i128, f.m_q as i128)).max().unwrap_or(Rat::from_integer(0));
    let lhs = Rat::new(t0, original.m as i128) * Rat::from_integer((k as i128).pow(PRODUCT_POWER));
    let rhs = Rat::new(r.coarse_tubes.len() as i128, r.coarse.m as i128) * best;
    out.product = lhs >= rhs;
    if !out.product {
        fails.push(format!("product inequality: budget {} exceeds k^8", r.budget));
    }
    out.failures = fails;
    out
}
