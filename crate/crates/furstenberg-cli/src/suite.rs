//! The acceptance battery.
//!
//! Each criterion returns report rows; a criterion passes when all of its
//! rows pass. Rows carry exact values where the check is exact and fixed
//! precision floats otherwise, and never timings, so the CSV of a battery is
//! a function of the battery alone.

use std::time::{Duration, Instant};

use furstenberg::dyadic::{DyadicInterval, DyadicSquare, IntervalFamily, Scale, SquareFamily};
use furstenberg::exact::rat;
use furstenberg::generators::{banded_uniform_set, cantor_set, cantor_target, furstenberg_config, product, random_frostman, rng};
use furstenberg::incidence::measure;
use furstenberg::multiscale::{
    is_uniform, kaufman_decompose, kaufman_leftover_bound, multiscale_decompose, q_int, q_rat, uniformization_bound_holds, uniformize,
    verify_multiscale, PiecewiseLinear, Tag, Q,
};
use furstenberg::projections::{good_directions, product_input, product_structure, projection_certificate};
use furstenberg::refine::{induction_on_scales, log_budget, thick_tube_refine, validate_induction, PRODUCT_POWER};
use furstenberg::tubes::{dual_star, slope_fibers, tube_meets_square, Convention, DyadicTube, TubeFamily};
use furstenberg::{par, Monomial, Rat};
use num_traits::Signed;
use rand::Rng;
use serde::Serialize;

use crate::config::SuiteArgs;
use crate::{csv_string, Artifacts, CliError, ReportRow};

/// Workload of one battery run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Battery {
    pub name: &'static str,
    pub duality_k: u32,
    pub fiber_ks: Vec<u32>,
    pub incidence_pairs: Vec<(Rat, Rat)>,
    pub incidence_ks: Vec<u32>,
    pub incidence_seeds: u64,
    pub target_k: u32,
    pub uniformize_sets: u64,
    pub multiscale_m: u32,
    pub multiscale_seeds: u64,
    pub roof_ms: Vec<i64>,
    pub random_pl: usize,
    pub refine_k: u32,
    pub refine_k_delta: u32,
    pub refine_seeds: u64,
    pub cantor_k: u32,
    pub cantor_seeds: u64,
    pub product_seeds: u64,
}

fn pairs() -> Vec<(Rat, Rat)> {
    vec![(rat(1, 2), rat(1, 1)), (rat(1, 2), rat(1, 2)), (rat(3, 4), rat(9, 10))]
}

impl Battery {
    /// The battery named by the acceptance criteria.
    pub fn full() -> Self {
        Battery {
            name: "full",
            duality_k: 4,
            fiber_ks: vec![3, 4, 5],
            incidence_pairs: pairs(),
            incidence_ks: (6..=10).collect(),
            incidence_seeds: 100,
            target_k: 12,
            uniformize_sets: 50,
            multiscale_m: 8,
            multiscale_seeds: 2,
            roof_ms: vec![12, 24, 48, 96],
            random_pl: 200,
            refine_k: 8,
            refine_k_delta: 4,
            refine_seeds: 100,
            cantor_k: 8,
            cantor_seeds: 4,
            product_seeds: 20,
        }
    }

    /// Same criteria on a smaller workload.
    pub fn quick() -> Self {
        Battery {
            name: "quick",
            duality_k: 3,
            fiber_ks: vec![3],
            incidence_ks: vec![6, 7],
            incidence_seeds: 3,
            target_k: 8,
            uniformize_sets: 6,
            multiscale_m: 5,
            multiscale_seeds: 1,
            roof_ms: vec![12],
            random_pl: 20,
            refine_seeds: 3,
            cantor_k: 6,
            cantor_seeds: 1,
            product_seeds: 2,
            ..Battery::full()
        }
    }
}

/// Result of one criterion.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub rows: Vec<ReportRow>,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    /// One line: id, verdict, title and the first failing row if any.
    pub fn line(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let detail = match self.rows.iter().find(|r| !r.pass) {
            Some(r) => format!(" [{} {} = {} vs {}]", r.case, r.metric, r.value, r.limit),
            None => String::new(),
        };
        format!("criterion {:>2} {verdict} {} ({:.2?}){detail}", self.id, self.title, self.elapsed)
    }
}

pub const TITLES: [&str; 13] = [
    "duality preserves incidences",
    "slope fibers have at most 10 tubes",
    "incidence upper bound",
    "tube lower bound",
    "Cantor target dimension",
    "uniformization bound",
    "multiscale decomposition",
    "Kaufman roof oracle",
    "thick-tube refinement",
    "induction on scales",
    "good directions",
    "product structure",
    "suite determinism",
];

fn outcome(id: u8, start: Instant, rows: Vec<ReportRow>) -> Outcome {
    Outcome { id, title: TITLES[id as usize - 1], rows, elapsed: start.elapsed() }
}

fn err_row(case: impl Into<String>, e: impl std::fmt::Display) -> ReportRow {
    ReportRow::new(case, "error", e.to_string().replace(['\n', ','], " "), "none", false)
}

fn case_st(s: Rat, t: Rat) -> String {
    format!("s={s} t={t}")
}

/// Incident pairs over `[0,1)²` at `δ = 2^-k` stay incident under duality.
pub fn duality(b: &Battery) -> Outcome {
    let start = Instant::now();
    let k = b.duality_k;
    let n = 1i64 << k;
    let squares: Vec<DyadicSquare> = (0..n).flat_map(|x| (0..n).map(move |y| DyadicSquare::new(k, x, y))).collect();
    let counts: Vec<(u64, u64)> = par::map(&squares, |p| {
        let (mut inc, mut ok) = (0, 0);
        for a in -n..n {
            for c in -2 * n..2 * n {
                let t = DyadicTube::main(k, a, c);
                if tube_meets_square(&t, p) {
                    inc += 1;
                    ok += tube_meets_square(&DyadicTube::main(k, p.ix, p.iy), &dual_star(&t)) as u64;
                }
            }
        }
        (inc, ok)
    });
    let (inc, ok) = counts.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
    let case = format!("k={k}");
    outcome(1, start, vec![ReportRow::new(case.clone(), "incident_pairs", inc, ">0", inc > 0), ReportRow::new(case, "dual_incident", ok, inc, ok == inc)])
}

/// Exhaustive fiber sizes of the slope map on tubes through each square.
pub fn slope_fiber_bound(b: &Battery) -> Outcome {
    let start = Instant::now();
    let mut rows = Vec::new();
    for &k in &b.fiber_ks {
        let n = 1i64 << k;
        for conv in [Convention::MainText, Convention::Appendix] {
            let squares: Vec<DyadicSquare> = (0..n).flat_map(|x| (0..n).map(move |y| DyadicSquare::new(k, x, y))).collect();
            let worst: Vec<Result<usize, String>> = par::map(&squares, |p| {
                let through: Vec<DyadicTube> = (-n..n)
                    .flat_map(|a| (-2 * n..=2 * n).map(move |c| DyadicTube::new(DyadicSquare::new(k, a, c), conv).unwrap()))
                    .filter(|t| tube_meets_square(t, p))
                    .collect();
                let fam = TubeFamily::new(Scale::new(k), conv, through).map_err(|e| e.to_string())?;
                Ok(slope_fibers(&fam, p).map_err(|e| e.to_string())?.max_fiber)
            });
            let case = format!("k={k} {}", conv.tag());
            match worst.into_iter().collect::<Result<Vec<_>, _>>() {
                Ok(w) => {
                    let m = w.into_iter().max().unwrap_or(0);
                    rows.push(ReportRow::new(case, "max_fiber", m, 10, m <= 10));
                }
                Err(e) => rows.push(err_row(case, e)),
            }
        }
    }
    outcome(2, start, rows)
}

/// Per-run incidence data shared by criteria 3 and 4.
#[derive(Clone, Debug)]
pub struct IncidenceRun {
    pub s: Rat,
    pub t: Rat,
    pub k: u32,
    pub seed: u64,
    pub result: Result<(bool, bool, f64, f64), String>,
}

pub fn incidence_runs(b: &Battery) -> Vec<IncidenceRun> {
    let jobs: Vec<(Rat, Rat, u32, u64)> = b
        .incidence_pairs
        .iter()
        .flat_map(|&(s, t)| b.incidence_ks.iter().flat_map(move |&k| (0..b.incidence_seeds).map(move |seed| (s, t, k, seed))))
        .collect();
    par::map(&jobs, |&(s, t, k, seed)| {
        let result = (|| {
            let (config, _) = furstenberg_config(k, s, t, seed).map_err(|e| e.to_string())?;
            let m = measure(&config, t, 2).map_err(|e| e.to_string())?;
            let budget = Monomial::int(10 * (k as u128).pow(2));
            let lower_ratio = m.n_tubes as f64 / m.lower.to_f64();
            Ok((m.upper_holds(&budget), m.lower_holds(&budget), m.row().ratio, lower_ratio))
        })();
        IncidenceRun { s, t, k, seed, result }
    })
}

fn incidence_rows(b: &Battery, runs: &[IncidenceRun], upper: bool) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &(s, t) in &b.incidence_pairs {
        for &k in &b.incidence_ks {
            let these: Vec<&IncidenceRun> = runs.iter().filter(|r| r.s == s && r.t == t && r.k == k).collect();
            let case = format!("{} k={k}", case_st(s, t));
            let errors: Vec<String> = these.iter().filter_map(|r| r.result.as_ref().err().map(|e| format!("seed {}: {e}", r.seed))).collect();
            if let Some(e) = errors.first() {
                rows.push(err_row(case.clone(), e));
            }
            let ok: Vec<(bool, bool, f64, f64)> = these.iter().filter_map(|r| r.result.clone().ok()).collect();
            let violations = ok.iter().filter(|r| if upper { !r.0 } else { !r.1 }).count();
            rows.push(ReportRow::new(case.clone(), "violations", violations, 0, violations == 0));
            if upper {
                let worst = ok.iter().map(|r| r.2).fold(0.0, f64::max);
                rows.push(ReportRow::new(case, "max_ratio_to_bound", format!("{worst:.6}"), format!("{}", 10 * k * k), true));
            } else {
                let worst = ok.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
                rows.push(ReportRow::new(case, "min_ratio_to_lower", format!("{worst:.6}"), format!("1/{}", 10 * k * k), true));
            }
        }
    }
    rows
}

pub fn incidence_upper(b: &Battery, runs: &[IncidenceRun], start: Instant) -> Outcome {
    outcome(3, start, incidence_rows(b, runs, true))
}

pub fn incidence_lower(b: &Battery, runs: &[IncidenceRun], start: Instant) -> Outcome {
    outcome(4, start, incidence_rows(b, runs, false))
}

pub fn cantor_target_dimension(b: &Battery) -> Outcome {
    let start = Instant::now();
    let case = format!("k={} s=1/2", b.target_k);
    let rows = match cantor_target(b.target_k, rat(1, 2), 0) {
        Ok(t) => {
            let d = t.dimension_proxy();
            let mut rows = vec![ReportRow::new(case.clone(), "dimension_proxy", format!("{d:.6}"), "[0.8, 1.2]", (0.8..=1.2).contains(&d))];
            match t.per_line_constant() {
                Ok(c) => rows.push(ReportRow::new(case, "per_line_certificate", format!("{:.6}", c.to_f64()), "reported", true)),
                Err(e) => rows.push(err_row(case, e)),
            }
            rows
        }
        Err(e) => vec![err_row(case, e)],
    };
    outcome(5, start, rows)
}

/// Levels splitting `[0,k]` into `n` steps.
pub fn even_levels(k: u32, n: u32) -> Vec<u32> {
    (1..=n).map(|i| (i * k).div_ceil(n)).collect()
}

pub fn uniformization(b: &Battery) -> Outcome {
    let start = Instant::now();
    let k = 8;
    let exps = [rat(1, 2), rat(1, 1), rat(3, 2)];
    let seeds: Vec<u64> = (0..b.uniformize_sets).collect();
    let rows: Vec<ReportRow> = par::map(&seeds, |&seed| {
        let n = 2 + (seed % 3) as u32;
        let s = exps[((seed / 3) % 3) as usize];
        let levels = even_levels(k, n);
        let case = format!("seed={seed} n={n} s={s}");
        let run = || -> furstenberg::Result<ReportRow> {
            let p: SquareFamily = random_frostman(k, s, seed)?;
            let u = uniformize(&p, &levels)?;
            let validated = is_uniform(&u.set, &levels)?;
            let ok = uniformization_bound_holds(k, n as usize, p.len(), u.set.len()) && validated == u.branching && u.set.is_subset(&p);
            Ok(ReportRow::new(case.clone(), "kept", format!("{}/{}", u.set.len(), p.len()), format!("(4k/n)^-{n}"), ok))
        };
        run().unwrap_or_else(|e| err_row(case.clone(), e))
    });
    outcome(6, start, rows)
}

pub fn multiscale(b: &Battery) -> Outcome {
    let start = Instant::now();
    let eps = rat(1, 4);
    let mut rows = Vec::new();
    for t in [rat(3, 5), rat(1, 1), rat(7, 5)] {
        let s = t - rat(1, 5);
        for seed in 0..b.multiscale_seeds {
            let case = format!("{} m={} seed={seed}", case_st(s, t), b.multiscale_m);
            let run = || -> furstenberg::Result<Vec<ReportRow>> {
                let p = banded_uniform_set(2, b.multiscale_m, t, seed)?;
                let dec = multiscale_decompose(&p, s, t, 2, eps)?;
                let rep = verify_multiscale(&p, &dec);
                let mass = dec.structured_mass();
                let need = Rat::from_integer(dec.m as i128) * (t - eps);
                let mut out: Vec<ReportRow> =
                    [("i", rep.i), ("ii", rep.ii), ("iii", rep.iii), ("iv", rep.iv)].iter().map(|(n, ok)| ReportRow::new(case.clone(), *n, ok, true, *ok)).collect();
                out.push(ReportRow::new(case.clone(), "structured_exponent", mass, need, mass >= need));
                Ok(out)
            };
            rows.extend(run().unwrap_or_else(|e| vec![err_row(case.clone(), e)]));
        }
    }
    outcome(7, start, rows)
}

fn qr(n: i64, d: i64) -> Q {
    q_rat(&rat(n as i128, d as i128))
}

/// Slope 2 up to `m/2`, then flat.
pub fn roof(m: i64) -> PiecewiseLinear {
    PiecewiseLinear::new(vec![q_int(0), qr(m, 2), q_int(m)], vec![q_int(0), q_int(m), q_int(m)]).expect("roof is well formed")
}

/// Random non-decreasing piecewise-linear input with slopes in `[0,2]`.
fn random_pl(r: &mut impl Rng) -> PiecewiseLinear {
    let len = r.gen_range(2..17);
    let mut ys = vec![q_int(0)];
    for _ in 0..len {
        let last = ys.last().unwrap().clone();
        ys.push(last + qr(r.gen_range(0..=8), 4));
    }
    PiecewiseLinear::from_integer_values(ys).expect("integer breakpoints")
}

pub fn kaufman_oracle(b: &Battery) -> Outcome {
    let start = Instant::now();
    let (s, t, eps) = (qr(1, 2), q_int(1), qr(1, 20));
    let mut rows = Vec::new();
    for &m in &b.roof_ms {
        let case = format!("roof m={m}");
        match kaufman_decompose(&roof(m), &s, &t, &eps) {
            Ok(d) => {
                let split = qr(m, 3);
                let tags_ok = d.intervals.len() == 2
                    && d.intervals[0].tag == Tag::Linear(q_int(2))
                    && d.intervals[1].tag == Tag::Superlinear(s.clone());
                let at = d.intervals.first().map(|i| i.d.clone()).unwrap_or_else(|| q_int(0));
                let off = (&at - &split).abs();
                rows.push(ReportRow::new(case.clone(), "split", &at, format!("{split} ± 1"), off <= q_int(1)));
                rows.push(ReportRow::new(case, "tags", if tags_ok { "linear(2),superlinear(1/2)" } else { "other" }, "linear(2),superlinear(1/2)", tags_ok));
            }
            Err(e) => rows.push(err_row(case, e)),
        }
    }
    let mut r = rng(8, &[0]);
    let (mut accepted, mut failures, mut attempts) = (0usize, Vec::new(), 0usize);
    while accepted < b.random_pl && attempts < 100 * b.random_pl {
        attempts += 1;
        let f = random_pl(&mut r);
        let s = qr(r.gen_range(1..7), 8);
        let t = &s + qr(1, 4);
        let m = f.end().clone();
        let slack = f.xs().iter().zip(f.ys()).map(|(x, y)| (&t * x - y) / &m).fold(qr(1, 64), |a, v| a.max(v));
        if slack >= qr(1, 4) {
            continue;
        }
        accepted += 1;
        let checked = kaufman_decompose(&f, &s, &t, &slack).and_then(|d| {
            d.verify(&f, Some(&s))?;
            let bound = kaufman_leftover_bound(&s, &t, &slack, &m);
            if d.leftover > bound {
                return Err(furstenberg::Error::Check(format!("leftover {} above {bound}", d.leftover)));
            }
            Ok(())
        });
        if let Err(e) = checked {
            failures.push(e.to_string());
        }
    }
    rows.push(ReportRow::new("random inputs", "accepted", accepted, b.random_pl, accepted == b.random_pl));
    rows.push(ReportRow::new("random inputs", "reverification_failures", failures.len(), 0, failures.is_empty()));
    outcome(8, start, rows)
}

fn refine_jobs(b: &Battery) -> Vec<(Rat, Rat, u64)> {
    b.incidence_pairs.iter().flat_map(|&(s, t)| (0..b.refine_seeds).map(move |seed| (s, t, seed))).collect()
}

pub fn thick_refinement(b: &Battery) -> Outcome {
    let start = Instant::now();
    let (k, kd) = (b.refine_k, b.refine_k_delta);
    let jobs = refine_jobs(b);
    let results: Vec<Result<(bool, bool), String>> = par::map(&jobs, |&(s, t, seed)| {
        let (config, _) = furstenberg_config(k, s, t, seed).map_err(|e| e.to_string())?;
        let cover = thick_tube_refine(&config, kd).map_err(|e| e.to_string())?;
        let h_ok = cover.incidences.values().all(|&i| 8 * i >= cover.h) && !cover.incidences.is_empty();
        let c_ok = cover.c2 <= log_budget(k, 64, 4).mul(&cover.c1);
        Ok((h_ok, c_ok))
    });
    let mut rows = Vec::new();
    for &(s, t) in &b.incidence_pairs {
        let case = format!("{} k={k} kΔ={kd}", case_st(s, t));
        let these: Vec<&Result<(bool, bool), String>> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == s && j.1 == t).map(|x| x.1).collect();
        let errors = these.iter().filter(|r| r.is_err()).count();
        let h_bad = these.iter().filter(|r| matches!(r, Ok((false, _)))).count();
        let c_bad = these.iter().filter(|r| matches!(r, Ok((_, false)))).count();
        if let Some(Err(e)) = these.iter().find(|r| r.is_err()) {
            rows.push(err_row(case.clone(), e));
        }
        rows.push(ReportRow::new(case.clone(), "errors", errors, 0, errors == 0));
        rows.push(ReportRow::new(case.clone(), "incidence_below_H/8", h_bad, 0, h_bad == 0));
        rows.push(ReportRow::new(case, "certificate_above_64k^4C1", c_bad, 0, c_bad == 0));
    }
    outcome(9, start, rows)
}

pub fn induction(b: &Battery) -> Outcome {
    let start = Instant::now();
    let (k, kd) = (b.refine_k, b.refine_k_delta);
    let limit = Rat::from_integer((k as i128).pow(PRODUCT_POWER));
    let jobs = refine_jobs(b);
    let results: Vec<Result<(bool, Rat), String>> = par::map(&jobs, |&(s, t, seed)| {
        let (config, _) = furstenberg_config(k, s, t, seed).map_err(|e| e.to_string())?;
        let r = induction_on_scales(&config, kd).map_err(|e| e.to_string())?;
        Ok((validate_induction(&config, &r).all(), r.budget))
    });
    let mut rows = Vec::new();
    for &(s, t) in &b.incidence_pairs {
        let case = format!("{} k={k} kΔ={kd}", case_st(s, t));
        let these: Vec<&Result<(bool, Rat), String>> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == s && j.1 == t).map(|x| x.1).collect();
        if let Some(Err(e)) = these.iter().find(|r| r.is_err()) {
            rows.push(err_row(case.clone(), e));
        }
        let invalid = these.iter().filter(|r| matches!(r, Ok((false, _)))).count();
        let worst = these.iter().filter_map(|r| r.as_ref().ok().map(|x| x.1)).max().unwrap_or(Rat::from_integer(0));
        rows.push(ReportRow::new(case.clone(), "validator_failures", invalid, 0, invalid == 0));
        rows.push(ReportRow::new(case, "max_budget", worst, limit, worst <= limit));
    }
    outcome(10, start, rows)
}

pub fn good_direction_certificates(b: &Battery) -> Outcome {
    let start = Instant::now();
    let k = b.cantor_k;
    let slopes: Vec<Rat> = (-16..16).map(|i| rat(i, 16)).collect();
    // (dimension of each Cantor factor, s) with t − s ≥ 3/10.
    let cases = [(rat(1, 2), rat(1, 2)), (rat(3, 5), rat(4, 5)), (rat(9, 20), rat(3, 5))];
    let jobs: Vec<(Rat, Rat, u64)> = cases.iter().flat_map(|&(a, s)| (0..b.cantor_seeds).map(move |seed| (a, s, seed))).collect();
    let results: Vec<Result<(usize, usize), String>> = par::map(&jobs, |&(a, s, seed)| {
        let x: IntervalFamily = cantor_set::<DyadicInterval>(k, a, 2 * seed).map_err(|e| e.to_string())?;
        let y: IntervalFamily = cantor_set::<DyadicInterval>(k, a, 2 * seed + 1).map_err(|e| e.to_string())?;
        let p = product(&x, &y).map_err(|e| e.to_string())?;
        let g = good_directions(&p, &slopes, s, Convention::Appendix).map_err(|e| e.to_string())?;
        let sel = g.selected();
        let mut good = 0;
        for sigma in &sel {
            let c = projection_certificate(&p, *sigma, s, Convention::Appendix).map_err(|e| e.to_string())?;
            good += (c <= Monomial::int(256)) as usize;
        }
        Ok((sel.len(), good))
    });
    let mut rows = Vec::new();
    for (&(a, s, seed), r) in jobs.iter().zip(&results) {
        let case = format!("product {a}+{a} s={s} k={k} seed={seed}");
        match r {
            Ok((sel, good)) => {
                rows.push(ReportRow::new(case.clone(), "selected", format!("{sel}/{}", slopes.len()), "≥ 1/2", 2 * sel >= slopes.len()));
                rows.push(ReportRow::new(case, "certified_at_256", format!("{good}/{sel}"), "≥ 9/10", 10 * good >= 9 * sel));
            }
            Err(e) => rows.push(err_row(case, e)),
        }
    }
    // Every Δ-square of the product battery selects at least half of its slopes.
    let product_jobs = product_jobs(b);
    let per: Vec<Result<(usize, usize), String>> = par::map(&product_jobs, |&(s, t, seed)| {
        let (config, _) = furstenberg_config(8, s, t, seed).map_err(|e| e.to_string())?;
        let sel = product_input(&config, 4, t).map_err(|e| e.to_string())?;
        Ok((sel.squares, sel.good_squares))
    });
    let squares: usize = per.iter().filter_map(|r| r.as_ref().ok().map(|x| x.0)).sum();
    let errors: Vec<&String> = per.iter().filter_map(|r| r.as_ref().err()).collect();
    rows.push(ReportRow::new("configuration squares", "squares_with_half_selected", squares, squares, errors.is_empty()));
    if let Some(e) = errors.first() {
        rows.push(err_row("configuration squares", e));
    }
    outcome(11, start, rows)
}

fn product_jobs(b: &Battery) -> Vec<(Rat, Rat, u64)> {
    b.incidence_pairs.iter().flat_map(|&(s, t)| (0..b.product_seeds).map(move |seed| (s, t, seed))).collect()
}

/// `(pairs, members, union, tubes in T0, slices in range)` or an error message.
type ProductCounts = Result<(usize, usize, usize, usize, bool), String>;

pub fn product_structures(b: &Battery) -> Outcome {
    let start = Instant::now();
    let jobs = product_jobs(b);
    let results: Vec<ProductCounts> = par::map(&jobs, |&(s, t, seed)| {
        let (config, _) = furstenberg_config(8, s, t, seed).map_err(|e| e.to_string())?;
        let sel = product_input(&config, 4, t).map_err(|e| e.to_string())?;
        let ps = product_structure(&sel.input).map_err(|e| e.to_string())?;
        let r = ps.report;
        Ok((r.pairs, r.members, r.union, r.tubes_in_t0, r.slices_in_range))
    });
    let mut rows = Vec::new();
    for &(s, t) in &b.incidence_pairs {
        let case = format!("{} k=8 kΔ=4", case_st(s, t));
        let these: Vec<&Result<_, String>> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == s && j.1 == t).map(|x| x.1).collect();
        if let Some(Err(e)) = these.iter().find(|r| r.is_err()) {
            rows.push(err_row(case.clone(), e));
        }
        let ok: Vec<&(usize, usize, usize, usize, bool)> = these.iter().filter_map(|r| r.as_ref().ok()).collect();
        let (pairs, members): (usize, usize) = ok.iter().fold((0, 0), |a, r| (a.0 + r.0, a.1 + r.1));
        let cover_bad = ok.iter().filter(|r| r.2 > 3 * r.3).count();
        let range_bad = ok.iter().filter(|r| !r.4).count();
        rows.push(ReportRow::new(case.clone(), "members", format!("{members}/{pairs}"), "100%", members == pairs && pairs > 0));
        rows.push(ReportRow::new(case.clone(), "cover_bound_violations", cover_bad, 0, cover_bad == 0));
        rows.push(ReportRow::new(case, "slices_outside_[0,3]", range_bad, 0, range_bad == 0));
    }
    outcome(12, start, rows)
}

/// Criteria 1 to 12, in order.
pub fn run_battery(b: &Battery, mut each: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let mut out = Vec::new();
    let mut push = |o: Outcome| {
        each(&o);
        out.push(o);
    };
    push(duality(b));
    push(slope_fiber_bound(b));
    let start = Instant::now();
    let runs = incidence_runs(b);
    push(incidence_upper(b, &runs, start));
    push(incidence_lower(b, &runs, start));
    push(cantor_target_dimension(b));
    push(uniformization(b));
    push(multiscale(b));
    push(kaufman_oracle(b));
    push(thick_refinement(b));
    push(induction(b));
    push(good_direction_certificates(b));
    push(product_structures(b));
    out
}

#[derive(Serialize)]
struct SuiteRow<'a> {
    criterion: u8,
    title: &'a str,
    case: &'a str,
    metric: &'a str,
    value: &'a str,
    limit: &'a str,
    pass: bool,
}

/// `criterion,title,case,metric,value,limit,pass`.
pub fn suite_csv(outcomes: &[Outcome]) -> String {
    let rows: Vec<SuiteRow> = outcomes
        .iter()
        .flat_map(|o| {
            o.rows.iter().map(move |r| SuiteRow {
                criterion: o.id,
                title: o.title,
                case: &r.case,
                metric: &r.metric,
                value: &r.value,
                limit: &r.limit,
                pass: r.pass,
            })
        })
        .collect();
    csv_string(&rows)
}

pub fn command(a: &SuiteArgs) -> Result<Artifacts, CliError> {
    let battery = if a.quick { Battery::quick() } else { Battery::full() };
    let mut outcomes = run_battery(&battery, |o| eprintln!("{}", o.line()));
    let csv = suite_csv(&outcomes);
    if a.verify_rerun {
        let start = Instant::now();
        let again = suite_csv(&run_battery(&battery, |_| {}));
        let same = again == csv;
        let row = ReportRow::new(battery.name, "identical_csv_bytes", same, true, same);
        let o = outcome(13, start, vec![row]);
        eprintln!("{}", o.line());
        outcomes.push(o);
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass()).map(|o| o.id).collect();
    Ok(Artifacts {
        body: suite_csv(&outcomes),
        json: None,
        summary: format!("battery {}: {} criteria, failed {:?}", battery.name, outcomes.len(), failed),
        failure: (!failed.is_empty()).then(|| format!("criteria {failed:?} failed")),
    })
}
