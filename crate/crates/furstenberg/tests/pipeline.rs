//! Generated configurations pushed through refinement, induction and projection.

use furstenberg::exact::rat;
use furstenberg::generators::{cantor_set, furstenberg_config, product};
use furstenberg::incidence::validate_nice;
use furstenberg::projections::{good_directions, project, DiscreteMeasure};
use furstenberg::refine::{induction_on_scales, thick_tube_refine, validate_induction, BUDGET_MULTIPLIER, BUDGET_POWER, log_budget};
use furstenberg::tubes::Convention;
use furstenberg::Rat;

#[test]
fn generated_configurations_are_nice() {
    for seed in 0..8 {
        let (cfg, union) = furstenberg_config(7, rat(1, 2), rat(3, 4), seed).unwrap();
        assert!(validate_nice(&cfg).is_valid(), "seed {seed}");
        assert!(cfg.tubes.iter().all(|f| f.iter().all(|t| union.contains(&t))));
    }
}

#[test]
fn thick_refinement_meets_its_bounds() {
    for seed in 0..6 {
        let (cfg, _) = furstenberg_config(8, rat(1, 2), rat(1, 1), seed).unwrap();
        let r = thick_tube_refine(&cfg, 4).unwrap();
        assert!(8 * r.trace.min_incidence >= r.h, "seed {seed}");
        assert!(r.c2 <= log_budget(8, BUDGET_MULTIPLIER, BUDGET_POWER).mul(&r.c1), "seed {seed}");
    }
}

#[test]
fn induction_validates_independently() {
    for (s, t) in [(rat(1, 2), rat(1, 1)), (rat(1, 2), rat(1, 2)), (rat(3, 4), rat(9, 10))] {
        for seed in 0..10 {
            let (cfg, _) = furstenberg_config(8, s, t, seed).unwrap();
            let r = induction_on_scales(&cfg, 4).unwrap();
            let v = validate_induction(&cfg, &r);
            assert!(v.all(), "s={s} t={t} seed={seed}: {:?}", v.failures);
            assert!(r.budget <= Rat::from_integer(8i128.pow(8)));
        }
    }
}

#[test]
fn projected_mass_is_conserved() {
    let a = cantor_set(8, rat(1, 2), 1).unwrap();
    let p = product(&a, &a).unwrap();
    let mu = DiscreteMeasure::counting(&p).unwrap().normalized().unwrap();
    for i in -4..4 {
        let nu = project(&mu, rat(i, 4), Convention::Appendix).unwrap();
        assert_eq!(nu.mass(), Rat::from_integer(1));
    }
}

#[test]
fn most_directions_are_good() {
    let a = cantor_set(8, rat(1, 2), 2).unwrap();
    let p = product(&a, &a).unwrap();
    let slopes: Vec<Rat> = (-8..8).map(|i| rat(i, 8)).collect();
    let g = good_directions(&p, &slopes, rat(1, 2), Convention::Appendix).unwrap();
    assert!(2 * g.selected().len() >= slopes.len());
}
