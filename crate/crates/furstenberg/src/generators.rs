//! Seeded constructions of point sets, line families and nice configurations.
//!
//! Randomness comes from `ChaCha8Rng`. Every node of a dyadic tree draws from
//! its own stream, seeded by [`derive_seed`] from the user seed and the node's
//! coordinates, so outputs do not depend on traversal order or threading.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deltaset::spread_certificate;
use crate::dyadic::{Cell, DyadicInterval, DyadicSquare, Family, IntervalFamily, Scale, SquareFamily};
use crate::exact::{Monomial, Rat};
use crate::incidence::{validate_nice, NiceConfiguration};
use crate::tubes::{dual_star, Convention, DyadicTube, TubeFamily};
use crate::{par, Error, Result};

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a branch: SplitMix64 chained over the seed and each branch word.
pub fn derive_seed(seed: u64, branch: &[u64]) -> u64 {
    branch.iter().fold(splitmix64(seed), |acc, w| splitmix64(acc ^ splitmix64(*w)))
}

pub fn rng(seed: u64, branch: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, branch))
}

fn node_branch<C: Cell>(tag: u64, c: &C) -> Vec<u64> {
    let mut v = vec![tag, c.k() as u64];
    v.extend(c.coords().into_iter().map(|x| x as u64));
    v
}

fn unit<C: Cell>() -> C {
    C::from_coords(0, &vec![0; C::DIM as usize]).unwrap()
}

/// Descendants of `c` at `depth` levels below it, in canonical order.
fn descendants<C: Cell>(c: &C, depth: u32) -> Vec<C> {
    let mut v = vec![*c];
    for _ in 0..depth {
        v = v.iter().flat_map(|x| x.children()).collect();
    }
    v.sort_unstable();
    v
}

/// Uniform tree with base `Δ = 2^{-base_bits}`: at step `i` every kept cell
/// keeps `branching[i]` of its `2^{DIM·base_bits}` sub-cells, chosen by a
/// seeded shuffle.
pub fn uniform_tree<C: Cell>(base_bits: u32, branching: &[u32], seed: u64) -> Result<Family<C>> {
    let arity = 1u32 << (C::DIM * base_bits);
    if let Some(n) = branching.iter().find(|&&n| n == 0 || n > arity) {
        return Err(Error::Invalid(format!("branching {n} outside 1..={arity}")));
    }
    let mut level: Vec<C> = vec![unit::<C>()];
    for &n in branching {
        let next: Vec<Vec<C>> = par::map(&level, |c| {
            let mut kids = descendants(c, base_bits);
            kids.shuffle(&mut rng(seed, &node_branch(1, c)));
            kids.truncate(n as usize);
            kids
        });
        level = next.into_iter().flatten().collect();
    }
    Ok(Family::from_cells(Scale::new(base_bits * branching.len() as u32), level))
}

/// Branching numbers with `f(i) ∈ [t·i, t·i + 1/2]` at every level, each
/// drawn uniformly among the admissible values (`f` as in
/// [`crate::multiscale::BranchingFunction`]).
pub fn banded_branching(base_bits: u32, m: u32, t: Rat, seed: u64) -> Result<Vec<u32>> {
    let cap = 1u64 << (2 * base_bits);
    if t < Rat::from_integer(0) || t > Rat::from_integer(2) {
        return Err(Error::Invalid(format!("exponent {t} outside [0, 2]")));
    }
    let base = Rat::from_integer(base_bits as i128);
    let mut r = rng(seed, &[30]);
    let mut f = Rat::from_integer(0);
    let mut out = Vec::with_capacity(m as usize);
    for i in 1..=m {
        let lo = t * Rat::from_integer(i as i128);
        let hi = lo + Rat::new(1, 2);
        let ok: Vec<u64> = (1..=cap)
            .filter(|&n| {
                let v = f + crate::multiscale::log2_proxy(n) / base;
                v >= lo && v <= hi
            })
            .collect();
        let n = if ok.is_empty() {
            (1..=cap).find(|&n| f + crate::multiscale::log2_proxy(n) / base >= lo).unwrap_or(cap)
        } else {
            ok[r.gen_range(0..ok.len())]
        };
        f += crate::multiscale::log2_proxy(n) / base;
        out.push(n as u32);
    }
    Ok(out)
}

/// Uniform set at `δ = Δ^m` with [`banded_branching`] numbers.
pub fn banded_uniform_set(base_bits: u32, m: u32, t: Rat, seed: u64) -> Result<SquareFamily> {
    let branching = banded_branching(base_bits, m, t, seed)?;
    uniform_tree::<DyadicSquare>(base_bits, &branching, derive_seed(seed, &[31]))
}

/// `N = ⌈(1/Δ)^s⌉` for the base `Δ = 1/4`.
pub fn cantor_branching(s: Rat) -> u32 {
    Monomial::pow2(s * Rat::from_integer(2)).ceil() as u32
}

/// Cantor set at `δ = 4^{-k/2}` keeping `⌈4^s⌉` of the 16 (2-D) or 4 (1-D)
/// sub-cells of each node; certified with constant at most 16.
pub fn cantor_set<C: Cell>(k: u32, s: Rat, seed: u64) -> Result<Family<C>> {
    if !k.is_multiple_of(2) {
        return Err(Error::Scale(format!("Cantor sets need δ = 4^-m, got 2^-{k}")));
    }
    let n = cantor_branching(s);
    let dim = Rat::from_integer(C::DIM as i128);
    if s <= Rat::from_integer(0) || s > dim {
        return Err(Error::Invalid(format!("exponent {s} outside (0, {dim}]")));
    }
    let out = uniform_tree::<C>(2, &vec![n; (k / 2) as usize], seed)?;
    let c = spread_certificate(&out, s)?.c();
    crate::check(c <= Monomial::int(16), || format!("Cantor certificate {c} exceeds 16"))?;
    Ok(out)
}

/// Cartesian product of two interval families at one scale.
pub fn product(a: &IntervalFamily, b: &IntervalFamily) -> Result<SquareFamily> {
    if a.k() != b.k() {
        return Err(Error::Scale("product factors at different scales".into()));
    }
    let k = a.k();
    Ok(Family::from_cells(
        a.scale(),
        a.iter().flat_map(|x| b.iter().map(move |y| DyadicSquare::new(k, x.i, y.i))).collect(),
    ))
}

/// Capacity `⌈2^{(k−j)s}⌉`.
fn ceil_cap(k: u32, j: u32, s: Rat) -> u64 {
    Monomial::pow2(s * Rat::from_integer((k - j) as i128)).ceil() as u64
}

/// Random `(δ,s)`-set inside `root` with exactly `⌈2^{(k−j₀)s}⌉` cells.
///
/// A quota is pushed down the tree; a node with quota `q` spreads it over a
/// random number of random children, each receiving at most the child
/// capacity `⌈2^{(k−j)s}⌉`. Branching varies from node to node, so the
/// output is generally not uniform. Its certificate is at most 2.
pub fn random_frostman_in<C: Cell>(root: C, k: u32, s: Rat, seed: u64) -> Result<Family<C>> {
    let dim = Rat::from_integer(C::DIM as i128);
    if s < Rat::from_integer(0) || s > dim {
        return Err(Error::Invalid(format!("exponent {s} outside [0, {dim}]")));
    }
    if root.k() > k {
        return Err(Error::Scale("root finer than target scale".into()));
    }
    let mut level: Vec<(C, u64)> = vec![(root, ceil_cap(k, root.k(), s))];
    for j in root.k()..k {
        let cap = ceil_cap(k, j + 1, s);
        let next: Vec<Vec<(C, u64)>> = par::map(&level, |(c, q)| {
            let mut r = rng(seed, &node_branch(2, c));
            let mut kids = c.children();
            let most = (kids.len() as u64).min(*q);
            let least = q.div_ceil(cap);
            let used = r.gen_range(least..=most) as usize;
            kids.shuffle(&mut r);
            kids.truncate(used);
            let base = q / used as u64;
            let extra = (q % used as u64) as usize;
            kids.into_iter().enumerate().map(|(i, kid)| (kid, base + (i < extra) as u64)).collect()
        });
        level = next.into_iter().flatten().collect();
    }
    Ok(Family::from_cells(Scale::new(k), level.into_iter().map(|(c, _)| c).collect()))
}

pub fn random_frostman<C: Cell>(k: u32, s: Rat, seed: u64) -> Result<Family<C>> {
    random_frostman_in(unit::<C>(), k, s, seed)
}

/// Turns tubes with their incident squares into the dual configuration:
/// points `𝐃*(T)` carrying the tubes `𝐃(q)` for the squares `q` along `T`.
pub fn dual_configuration(
    k: u32,
    s: Rat,
    families: Vec<(DyadicTube, Vec<DyadicSquare>)>,
) -> Result<(NiceConfiguration, TubeFamily)> {
    let scale = Scale::new(k);
    let mut pairs: Vec<(DyadicSquare, TubeFamily)> = families
        .into_iter()
        .map(|(t, qs)| {
            let tubes = qs.into_iter().map(|q| DyadicTube::new(q, Convention::MainText)).collect::<Result<Vec<_>>>()?;
            Ok((dual_star(&t), TubeFamily::new(scale, Convention::MainText, tubes)?))
        })
        .collect::<Result<_>>()?;
    pairs.sort_by_key(|a| a.0);
    pairs.dedup_by(|a, b| a.0 == b.0);
    let m = pairs.first().map(|p| p.1.len()).ok_or(Error::Empty("configuration without tubes"))?;
    let certs: Vec<Result<Monomial>> = par::map(&pairs, |(_, f)| Ok(spread_certificate(f.params(), s)?.c()));
    let mut c = Monomial::one();
    for x in certs {
        c = c.max(x?);
    }
    let p = Family::from_cells(scale, pairs.iter().map(|x| x.0).collect());
    let tubes: Vec<TubeFamily> = pairs.into_iter().map(|x| x.1).collect();
    let config = NiceConfiguration::new(s, c, m, p, tubes)?;
    let report = validate_nice(&config);
    if let Some(v) = report.violation {
        return Err(Error::Check(format!("generated configuration is not nice: {v:?}")));
    }
    let union = config.tube_union();
    Ok((config, union))
}

/// Nice configuration with `𝒫` a `(δ,t)`-set and `M = ⌈δ^{-s}⌉`.
///
/// Built on the dual side: tube parameters form a random `(δ,t)`-set in
/// `[0,1/2)²`; along each tube `M` columns form a random `(δ,s)`-set and the
/// squares through the tube's centre line are recorded. Dualising turns the
/// tubes into points and the squares into the tubes through them.
pub fn furstenberg_config(k: u32, s: Rat, t: Rat, seed: u64) -> Result<(NiceConfiguration, TubeFamily)> {
    let (zero, one, two) = (Rat::from_integer(0), Rat::from_integer(1), Rat::from_integer(2));
    if !(zero < s && s <= one.min(t) && t <= two) {
        return Err(Error::Invalid(format!("need 0 < s ≤ min(1,t), t ≤ 2; got s={s}, t={t}")));
    }
    if k == 0 {
        return Err(Error::Scale("need δ < 1".into()));
    }
    let params = random_frostman_in(DyadicSquare::new(1, 0, 0), k, t, derive_seed(seed, &[10]))?;
    let n = 1i64 << k;
    let families: Vec<(DyadicTube, Vec<DyadicSquare>)> = par::map(params.cells(), |q| {
        let cols: IntervalFamily = random_frostman(k, s, derive_seed(seed, &[11, q.ix as u64, q.iy as u64])).unwrap();
        let squares = cols.iter().map(|x| DyadicSquare::new(k, x.i, (q.ix * x.i + q.iy * n).div_euclid(n))).collect();
        (DyadicTube { param: *q, convention: Convention::MainText }, squares)
    });
    dual_configuration(k, s, families)
}

/// The Cantor target: radii `R ⊂ [1/2,1)`, slopes `Θ ⊂ [0,1)`, and the squares
/// `K` containing the points `(r, θr)`.
#[derive(Clone, Debug)]
pub struct CantorTarget {
    pub k: u32,
    pub s: Rat,
    pub radii: IntervalFamily,
    pub slopes: IntervalFamily,
    pub k_set: SquareFamily,
    /// Tubes `𝐃([θ, θ+δ) × [0, δ))`, one per slope.
    pub lines: TubeFamily,
    /// Squares of `K` on each line, aligned with `lines`.
    pub per_line: Vec<SquareFamily>,
}

impl CantorTarget {
    /// `log|K|_δ / log(1/δ)`.
    pub fn dimension_proxy(&self) -> f64 {
        (self.k_set.len() as f64).log2() / self.k as f64
    }

    /// Largest `(δ,s)` constant among the per-line families.
    pub fn per_line_constant(&self) -> Result<Monomial> {
        let cs: Vec<Result<Monomial>> = par::map(&self.per_line, |f| Ok(spread_certificate(f, self.s)?.c()));
        let mut c = Monomial::one();
        for x in cs {
            c = c.max(x?);
        }
        Ok(c)
    }

    /// Dual nice configuration with `𝒫 = 𝐃*(lines)` and `𝒯(p) = 𝐃(K_θ)`.
    pub fn configuration(&self) -> Result<(NiceConfiguration, TubeFamily)> {
        let fams = self.lines.iter().zip(self.per_line.iter()).map(|(t, f)| (t, f.cells().to_vec())).collect();
        dual_configuration(self.k, self.s, fams)
    }
}

pub fn cantor_target(k: u32, s: Rat, seed: u64) -> Result<CantorTarget> {
    if !(Rat::from_integer(0) < s && s < Rat::from_integer(1)) {
        return Err(Error::Invalid(format!("need 0 < s < 1, got {s}")));
    }
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::Scale(format!("Cantor target needs δ = 4^-m with m ≥ 1, got 2^-{k}")));
    }
    let n_branch = cantor_branching(s);
    // Radii: the two top sub-intervals [1/2,3/4), [3/4,1), then ⌈4^s⌉ of 4.
    let mut radii: Vec<DyadicInterval> = Vec::new();
    for top in [2i64, 3] {
        let sub = uniform_tree::<DyadicInterval>(2, &vec![n_branch; (k / 2 - 1) as usize], derive_seed(seed, &[20, top as u64]))?;
        let shift = k - 2;
        radii.extend(sub.iter().map(|x| DyadicInterval::new(k, x.i + (top << shift))));
    }
    let radii = Family::from_cells(Scale::new(k), radii);
    let slopes: IntervalFamily = cantor_set(k, s, derive_seed(seed, &[21]))?;
    let n = 1i64 << k;
    let mut lines = Vec::new();
    let mut per_line = Vec::new();
    let mut all = Vec::new();
    for th in slopes.iter() {
        let squares: Vec<DyadicSquare> =
            radii.iter().map(|r| DyadicSquare::new(k, r.i, (th.i * r.i).div_euclid(n))).collect();
        all.extend(squares.iter().copied());
        lines.push(DyadicTube::new(DyadicSquare::new(k, th.i, 0), Convention::MainText)?);
        per_line.push(Family::from_cells(Scale::new(k), squares));
    }
    Ok(CantorTarget {
        k,
        s,
        radii,
        slopes,
        k_set: Family::from_cells(Scale::new(k), all),
        lines: TubeFamily::new(Scale::new(k), Convention::MainText, lines)?,
        per_line,
    })
}
