//! The subcommands.

use furstenberg::deltaset::{regularity_certificate, spread_certificate};
use furstenberg::dyadic::{IntervalFamily, SquareFamily};
use furstenberg::exact::rat_to_f64;
use furstenberg::generators::{
    banded_uniform_set, cantor_set, cantor_target, derive_seed, furstenberg_config, product, random_frostman, CantorTarget,
};
use furstenberg::incidence::{certified_constants, measure, NiceConfiguration};
use furstenberg::multiscale::{branching_function, classify_scales, is_uniform, multiscale_decompose, uniformization_bound_holds, uniformize};
use furstenberg::projections::{good_directions, product_input, product_structure, projection_certificate};
use furstenberg::refine::{induction_on_scales, log_budget, thick_tube_refine, validate_induction, PRODUCT_POWER};
use furstenberg::tubes::{Convention, TubeFamily};
use furstenberg::{par, Monomial, Rat};
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::{csv_string, suite, Artifacts, CliError, ReportRow};

type Res<T> = Result<T, CliError>;

/// What a generator spec produces.
#[derive(Clone, Debug)]
pub enum Generated {
    Intervals(IntervalFamily),
    Squares(SquareFamily),
    Target(Box<CantorTarget>),
    Config(Box<NiceConfiguration>, TubeFamily),
}

pub fn generate(spec: &GeneratorSpec) -> Res<Generated> {
    let (s, t) = (spec.s()?, spec.t()?);
    let one_d = match spec.dim {
        1 => true,
        2 => false,
        d => return Err(CliError::Config(format!("dimension {d} is neither 1 nor 2"))),
    };
    Ok(match spec.kind {
        GeneratorKind::Cantor if one_d => Generated::Intervals(cantor_set(spec.k, s, spec.seed)?),
        GeneratorKind::Cantor => Generated::Squares(cantor_set(spec.k, s, spec.seed)?),
        GeneratorKind::RandomFrostman if one_d => Generated::Intervals(random_frostman(spec.k, s, spec.seed)?),
        GeneratorKind::RandomFrostman => Generated::Squares(random_frostman(spec.k, s, spec.seed)?),
        GeneratorKind::Product => {
            if t <= s {
                return Err(CliError::Config(format!("product needs t > s, got s = {s}, t = {t}")));
            }
            let a: IntervalFamily = cantor_set(spec.k, s, derive_seed(spec.seed, &[1]))?;
            let b: IntervalFamily = cantor_set(spec.k, t - s, derive_seed(spec.seed, &[2]))?;
            Generated::Squares(product(&a, &b)?)
        }
        GeneratorKind::CantorTarget => Generated::Target(Box::new(cantor_target(spec.k, s, spec.seed)?)),
        GeneratorKind::Furstenberg => {
            let (c, u) = furstenberg_config(spec.k, s, t, spec.seed)?;
            Generated::Config(Box::new(c), u)
        }
    })
}

/// Configuration behind a spec, with the exponent `t` it is certified at.
pub fn configuration(spec: &GeneratorSpec) -> Res<(NiceConfiguration, Rat)> {
    match generate(spec)? {
        Generated::Config(c, _) => Ok((*c, spec.t()?)),
        Generated::Target(target) => Ok((target.configuration()?.0, spec.s()?)),
        _ => Err(CliError::Config(format!("{:?} does not produce a configuration", spec.kind))),
    }
}

fn squares_of(spec: &GeneratorSpec) -> Res<SquareFamily> {
    match generate(spec)? {
        Generated::Squares(p) => Ok(p),
        Generated::Target(t) => Ok(t.k_set),
        Generated::Config(c, _) => Ok(c.p),
        Generated::Intervals(_) => Err(CliError::Config("this command needs squares; use --dim 2".into())),
    }
}

fn read_squares(path: &std::path::Path) -> Res<SquareFamily> {
    Ok(SquareFamily::from_text(&std::fs::read_to_string(path)?)?)
}

pub fn run(cmd: &Command) -> Res<Artifacts> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Certify(a) => certify(a),
        Command::Incidence(a) => incidence(a),
        Command::Refine(a) => refine(a),
        Command::Decompose(a) => decompose(a),
        Command::Uniformize(a) => uniformize_cmd(a),
        Command::Project(a) => project(a),
        Command::Suite(a) => suite::command(a),
    }
}

fn gen(a: &GenArgs) -> Res<Artifacts> {
    let spec = json!(a.spec);
    Ok(match generate(&a.spec)? {
        Generated::Intervals(f) => Artifacts {
            summary: format!("{} intervals at 2^-{}", f.len(), f.k()),
            body: f.to_text(),
            json: Some(json!({"spec": spec})),
            failure: None,
        },
        Generated::Squares(f) => Artifacts {
            summary: format!("{} squares at 2^-{}", f.len(), f.k()),
            body: f.to_text(),
            json: Some(json!({"spec": spec})),
            failure: None,
        },
        Generated::Target(t) => Artifacts {
            summary: format!("|K| = {}, {} lines, dimension proxy {:.4}", t.k_set.len(), t.lines.len(), t.dimension_proxy()),
            body: t.k_set.to_text(),
            json: Some(json!({"spec": spec, "lines": t.lines.to_text(), "dimension_proxy": t.dimension_proxy()})),
            failure: None,
        },
        Generated::Config(c, u) => {
            let families: Vec<_> = c.pairs().map(|(p, f)| json!({"square": [p.ix, p.iy], "tubes": f.to_text()})).collect();
            Artifacts {
                summary: format!("|P| = {}, |T| = {}, M = {}", c.p.len(), u.len(), c.m),
                body: c.p.to_text(),
                json: Some(json!({"spec": spec, "tubes": u.to_text(), "families": families})),
                failure: None,
            }
        }
    })
}

#[derive(Serialize)]
struct CertRow {
    object: String,
    k: u32,
    count: usize,
    s: String,
    certificate: String,
    certificate_f64: f64,
}

fn cert_row(object: &str, k: u32, count: usize, s: Rat, c: &Monomial) -> CertRow {
    CertRow { object: object.into(), k, count, s: s.to_string(), certificate: c.to_string(), certificate_f64: c.to_f64() }
}

fn certify(a: &CertifyArgs) -> Res<Artifacts> {
    let s = a.spec.s()?;
    let mut rows = Vec::new();
    let generated = match &a.input {
        Some(path) => Generated::Squares(read_squares(path)?),
        None => generate(&a.spec)?,
    };
    match generated {
        Generated::Intervals(f) => rows.push(cert_row("intervals", f.k(), f.len(), s, &spread_certificate(&f, s)?.c())),
        Generated::Squares(p) => {
            rows.push(cert_row("squares", p.k(), p.len(), s, &spread_certificate(&p, s)?.c()));
            if p.k() % 2 == 0 {
                rows.push(cert_row("regularity_K", p.k(), p.len(), s, &regularity_certificate(&p, s)?.k_const()));
            }
        }
        Generated::Target(t) => {
            let two = Rat::from_integer(2) * s;
            rows.push(cert_row("K", t.k, t.k_set.len(), two, &spread_certificate(&t.k_set, two)?.c()));
            rows.push(cert_row("per_line_max", t.k, t.lines.len(), s, &t.per_line_constant()?));
        }
        Generated::Config(c, u) => {
            let t = a.spec.t()?;
            let (c_p, c_t) = certified_constants(&c, t)?;
            rows.push(cert_row("P", c.k(), c.p.len(), t, &c_p));
            rows.push(cert_row("T(p)_max", c.k(), c.m, c.s, &c_t));
            rows.push(cert_row("T", c.k(), u.len(), t, &spread_certificate(u.params(), t)?.c()));
        }
    }
    let summary = rows.iter().map(|r| format!("{}: C = {:.4}", r.object, r.certificate_f64)).collect::<Vec<_>>().join(", ");
    Ok(Artifacts { body: csv_string(&rows), json: None, summary, failure: None })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct IncidenceCsvRow {
    k: u32,
    seed: u64,
    delta: f64,
    s: f64,
    t: f64,
    M: u64,
    C_P: f64,
    C_T: f64,
    P_count: u64,
    T_count: u64,
    incidences: u64,
    bound: f64,
    ratio: f64,
    lower: f64,
    upper_holds: bool,
    lower_holds: bool,
}

fn incidence(a: &IncidenceArgs) -> Res<Artifacts> {
    if a.budget == 0 {
        return Err(CliError::Config("the budget multiplier must be positive".into()));
    }
    let ks = if a.ks.is_empty() { vec![a.spec.k] } else { a.ks.clone() };
    let jobs: Vec<(u32, u64)> = ks.iter().flat_map(|&k| (0..a.seeds).map(move |i| (k, a.spec.seed + i))).collect();
    let rows: Vec<Res<IncidenceCsvRow>> = par::map(&jobs, |&(k, seed)| {
        let spec = GeneratorSpec { k, seed, ..a.spec.clone() };
        let (config, t) = configuration(&spec)?;
        let m = measure(&config, t, 2)?;
        let budget = Monomial::int(a.budget as u128 * (k as u128).pow(2));
        let r = m.row();
        Ok(IncidenceCsvRow {
            k,
            seed,
            delta: r.delta,
            s: r.s,
            t: r.t,
            M: r.M,
            C_P: r.C_P,
            C_T: r.C_T,
            P_count: r.P_count,
            T_count: r.T_count,
            incidences: r.incidences,
            bound: r.bound,
            ratio: r.ratio,
            lower: m.lower.to_f64(),
            upper_holds: m.upper_holds(&budget),
            lower_holds: m.lower_holds(&budget),
        })
    });
    let rows: Vec<IncidenceCsvRow> = rows.into_iter().collect::<Res<_>>()?;
    let bad = rows.iter().filter(|r| !(r.upper_holds && r.lower_holds)).count();
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(Artifacts {
        body: csv_string(&rows),
        json: None,
        summary: format!("{} runs, largest |I|/bound {worst:.4}, {bad} violations", rows.len()),
        failure: (bad > 0).then(|| format!("{bad} runs violate a bound with budget {}·k²", a.budget)),
    })
}

fn refine(a: &RefineArgs) -> Res<Artifacts> {
    let (config, _) = configuration(&a.spec)?;
    let k = config.k();
    let mut rows = Vec::new();
    let mut json = serde_json::Map::new();
    if matches!(a.stage, RefineStage::Thick | RefineStage::Both) {
        let cover = thick_tube_refine(&config, a.k_delta)?;
        let min = cover.incidences.values().copied().min().unwrap_or(0);
        rows.push(ReportRow::new("thick", "min_incidence_x8", 8 * min, cover.h, 8 * min >= cover.h));
        let limit = log_budget(k, 64, 4).mul(&cover.c1);
        rows.push(ReportRow::new("thick", "certificate", &cover.c2, &limit, cover.c2 <= limit));
        rows.push(ReportRow::new("thick", "thick_tubes", cover.t_bar.len(), "", true));
        json.insert("thick".into(), serde_json::to_value(&cover.trace).expect("trace serialises"));
    }
    if matches!(a.stage, RefineStage::Induction | RefineStage::Both) {
        let r = induction_on_scales(&config, a.k_delta)?;
        let rep = validate_induction(&config, &r);
        for (name, ok) in [("i", rep.i), ("ii", rep.ii), ("iii", rep.iii), ("iv", rep.iv), ("product", rep.product)] {
            rows.push(ReportRow::new("induction", name, ok, true, ok));
        }
        let limit = Rat::from_integer((k as i128).pow(PRODUCT_POWER));
        rows.push(ReportRow::new("induction", "budget", r.budget, limit, r.budget <= limit));
        json.insert("induction".into(), serde_json::to_value(&r.trace).expect("trace serialises"));
        json.insert("validation".into(), serde_json::to_value(&rep).expect("report serialises"));
    }
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{}:{}", r.case, r.metric)).collect();
    Ok(Artifacts {
        body: csv_string(&rows),
        json: Some(serde_json::Value::Object(json)),
        summary: format!("{} checks, {} failed", rows.len(), failed.len()),
        failure: (!failed.is_empty()).then(|| failed.join(", ")),
    })
}

#[derive(Serialize)]
struct StepRow {
    j: usize,
    from: u32,
    to: u32,
    kind: String,
    t_j: String,
    class: String,
}

fn decompose(a: &DecomposeArgs) -> Res<Artifacts> {
    let t = parse_rat(&a.t)?;
    let s = match &a.s {
        Some(s) => parse_rat(s)?,
        None => t - Rat::new(1, 5),
    };
    let (eps, eps_g) = (parse_rat(&a.eps)?, parse_rat(&a.eps_good)?);
    let p = match &a.input {
        Some(path) => read_squares(path)?,
        None => banded_uniform_set(a.base_bits, a.m, t, a.seed)?,
    };
    let f = branching_function(&p, a.base_bits)?;
    let dec = multiscale_decompose(&p, s, t, a.base_bits, eps)?;
    let cls = classify_scales(&dec, eps_g)?;
    let class_of = |j: usize| {
        if cls.good.contains(&j) {
            "good"
        } else if cls.normal.contains(&j) {
            "normal"
        } else {
            "bad"
        }
    };
    let rows: Vec<StepRow> = (1..=dec.n())
        .map(|j| StepRow {
            j,
            from: dec.levels[j - 1],
            to: dec.levels[j],
            kind: format!("{:?}", dec.kinds[j - 1]).to_lowercase(),
            t_j: dec.exponents[j - 1].map(|x| x.to_string()).unwrap_or_default(),
            class: class_of(j).into(),
        })
        .collect();
    let json = json!({
        "branching": f.branching,
        "values": f.values.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "decomposition": dec.to_json(),
        "classes": {"normal": cls.normal, "good": cls.good, "bad": cls.bad, "good_length": cls.good_length},
    });
    Ok(Artifacts {
        body: csv_string(&rows),
        json: Some(json),
        summary: format!(
            "|P| = {}, {} steps, structured exponent {} ≥ m(t−ε) = {}",
            p.len(),
            dec.n(),
            dec.structured_mass(),
            Rat::from_integer(dec.m as i128) * (t - eps)
        ),
        failure: None,
    })
}

#[derive(Serialize)]
struct LevelRow {
    level: u32,
    branching: u64,
}

fn uniformize_cmd(a: &UniformizeArgs) -> Res<Artifacts> {
    let p = squares_of(&a.spec)?;
    let u = uniformize(&p, &a.levels)?;
    let validated = is_uniform(&u.set, &a.levels)?;
    let bound = uniformization_bound_holds(p.k(), a.levels.len(), p.len(), u.set.len());
    let ok = bound && validated == u.branching && u.set.is_subset(&p);
    let rows: Vec<LevelRow> = a.levels.iter().zip(&u.branching).map(|(&level, &branching)| LevelRow { level, branching }).collect();
    Ok(Artifacts {
        body: csv_string(&rows),
        json: Some(json!({"before": p.len(), "after": u.set.len(), "bound_holds": bound, "set": u.set.to_text()})),
        summary: format!("|P| = {} → |P'| = {}, bound holds: {bound}", p.len(), u.set.len()),
        failure: (!ok).then(|| "uniformization bound or validator failed".to_string()),
    })
}

fn project(a: &ProjectArgs) -> Res<Artifacts> {
    if a.directions <= 0 {
        return Err(CliError::Config("need at least one direction".into()));
    }
    let s = a.spec.s()?;
    let generated = generate(&a.spec)?;
    let p = match &generated {
        Generated::Squares(p) => p.clone(),
        Generated::Target(t) => t.k_set.clone(),
        Generated::Config(c, _) => c.p.clone(),
        Generated::Intervals(_) => return Err(CliError::Config("projections need squares; use --dim 2".into())),
    };
    let slopes: Vec<Rat> = (-a.directions..a.directions).map(|i| Rat::new(i as i128, a.directions as i128)).collect();
    let good = good_directions(&p, &slopes, s, Convention::Appendix)?;
    let selected = good.selected();
    let certs: Vec<Res<Monomial>> = par::map(&selected, |sigma| Ok(projection_certificate(&p, *sigma, s, Convention::Appendix)?));
    let certs: Vec<Monomial> = certs.into_iter().collect::<Res<_>>()?;
    let mut json = json!({
        "selected": selected.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "certificates": certs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
    });
    let mut summary = format!("{} of {} directions selected", selected.len(), slopes.len());
    if a.product {
        let Generated::Config(c, _) = &generated else {
            return Err(CliError::Config("--product needs a configuration generator".into()));
        };
        if c.k() % 2 != 0 {
            return Err(CliError::Config("--product needs an even k".into()));
        }
        let sel = product_input(c, c.k() / 2, a.spec.t()?)?;
        let ps = product_structure(&sel.input)?;
        let r = &ps.report;
        json["product"] = json!({
            "t0": [sel.input.t0.param.ix, sel.input.t0.param.iy], "normalized": ps.normalized,
            "good_squares": sel.good_squares, "squares": sel.squares,
            "pairs": r.pairs, "members": r.members, "union": r.union, "tubes_in_t0": r.tubes_in_t0,
            "y_certificate": r.y_certificate, "slice_certificate": r.slice_certificate,
            "tube_certificate": r.tube_certificate, "dimension": r.dimension, "two_s": 2.0 * rat_to_f64(&s),
        });
        summary.push_str(&format!("; |T(Z)| = {} ≤ 3·{}, dimension {:.3} vs 2s", r.union, r.tubes_in_t0, r.dimension));
    }
    Ok(Artifacts { body: good.to_csv(), json: Some(json), summary, failure: None })
}
