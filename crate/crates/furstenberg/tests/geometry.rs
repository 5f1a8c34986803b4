//! Grid-level invariants of squares, tubes and their duals.

use furstenberg::dyadic::{Cell, DyadicSquare, Scale};
use furstenberg::tubes::{dual_star, slope_fibers, tube_meets_square, Convention, DyadicTube, TubeFamily};
use proptest::prelude::*;

fn through(p: &DyadicSquare, conv: Convention) -> Vec<DyadicTube> {
    let (k, n) = (p.k, 1i64 << p.k);
    (-n..n)
        .flat_map(|a| (-2 * n..=2 * n).map(move |c| DyadicTube::new(DyadicSquare::new(k, a, c), conv).unwrap()))
        .filter(|t| tube_meets_square(t, p))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_survives_duality(k in 1u32..7, x in 0i64..64, y in 0i64..64, a in -64i64..64, c in -128i64..128) {
        let n = 1i64 << k;
        let p = DyadicSquare::new(k, x % n, y % n);
        let t = DyadicTube::main(k, a % n, c % (2 * n));
        if tube_meets_square(&t, &p) {
            prop_assert!(tube_meets_square(&DyadicTube::main(k, p.ix, p.iy), &dual_star(&t)));
        }
    }

    #[test]
    fn slope_fibers_stay_small(k in 2u32..6, x in 0i64..32, y in 0i64..32, appendix in any::<bool>()) {
        let n = 1i64 << k;
        let p = DyadicSquare::new(k, x % n, y % n);
        let conv = if appendix { Convention::Appendix } else { Convention::MainText };
        let fam = TubeFamily::new(Scale::new(k), conv, through(&p, conv)).unwrap();
        let f = slope_fibers(&fam, &p).unwrap();
        prop_assert!(f.max_fiber >= 1 && f.max_fiber <= 10);
    }

    #[test]
    fn thick_ancestor_keeps_incidence(k in 3u32..7, kd in 1u32..3, x in 0i64..64, y in 0i64..64, pick in any::<prop::sample::Index>()) {
        let n = 1i64 << k;
        let p = DyadicSquare::new(k, x % n, y % n);
        let ts = through(&p, Convention::MainText);
        let t = ts[pick.index(ts.len())];
        let coarse = t.ancestor(kd);
        prop_assert!(coarse.contains(&t));
        prop_assert!(tube_meets_square(&coarse, &p.ancestor(kd)));
    }
}

#[test]
fn every_slope_has_a_tube_through_each_square() {
    let k = 4;
    let p = DyadicSquare::new(k, 5, 11);
    for conv in [Convention::MainText, Convention::Appendix] {
        let fam = TubeFamily::new(Scale::new(k), conv, through(&p, conv)).unwrap();
        let f = slope_fibers(&fam, &p).unwrap();
        assert_eq!(f.fibers.len(), 32);
    }
}
