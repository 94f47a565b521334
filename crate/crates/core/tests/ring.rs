use num_rational::BigRational;
use octawitt::ring::{lift_idempotent, make_ring, AnyRing, BaseRing, LocalRing, RealQ, Zpk};
use octawitt::Error;
use proptest::prelude::*;

fn zmod(m: u64) -> BaseRing<Zpk> {
    BaseRing::parse(&format!("Z/{m}")).unwrap()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn descriptors() {
    let r = zmod(9);
    assert_eq!(r.ncomps(), 1);
    assert_eq!(r.residue_primes(), vec![3]);
    let r = zmod(45);
    assert_eq!(r.comps.iter().map(|c| c.m).collect::<Vec<_>>(), vec![9, 5]);
    assert_eq!(zmod(15).ncomps(), 2);
    assert!(matches!(make_ring("Z/4"), Err(Error::InvalidModulus(_))));
    assert!(matches!(make_ring("Z/1"), Err(Error::InvalidModulus(_))));
    assert!(matches!(make_ring(""), Err(Error::InvalidSpec(_))));
    assert!(matches!(make_ring("R"), Ok(AnyRing::Real(_))));
    let p = BaseRing::parse("Z/9 x GF(5)").unwrap();
    assert_eq!(p.size(), 45);
    assert_eq!(p.ncomps(), 2);
}

#[test]
fn arithmetic() {
    let r = zmod(9);
    assert_eq!(r.inv(&r.int(7)).unwrap(), r.int(4));
    assert!(!r.is_unit(&r.int(3)).unwrap());
    assert!(matches!(r.inv(&r.int(3)), Err(Error::NotAUnit(_))));
    let re = BaseRing::reals();
    let m2 = re.parse_elem("-2").unwrap();
    assert_eq!(re.inv(&m2).unwrap().c, vec![rat(-1, 2)]);
    let other = zmod(45);
    assert!(matches!(r.add(&r.int(1), &other.int(1)), Err(Error::RingMismatch)));
}

#[test]
fn square_classes() {
    let r = zmod(9);
    assert!(r.square_class(&r.int(7)).unwrap());
    assert!(!zmod(3).square_class(&zmod(3).int(2)).unwrap());
    let re = BaseRing::reals();
    assert!(!re.square_class(&re.int(-1)).unwrap());
    assert!(matches!(r.square_class(&r.int(3)), Err(Error::NotAUnit(_))));
}

#[test]
fn norm_classes() {
    let r = zmod(3);
    assert!(r.norm_class(&r.int(2), &r.int(2)).unwrap());
    let re = BaseRing::reals();
    assert!(!re.norm_class(&re.int(-1), &re.int(-1)).unwrap());
    assert!(re.norm_class(&re.int(1), &re.int(-1)).unwrap());
    assert!(re.norm_class(&re.int(-1), &re.int(3)).unwrap());
}

#[test]
fn residues() {
    let r = zmod(9);
    let (k, x) = r.residue(&r.int(7), 0).unwrap();
    assert_eq!((k.m, x), (3, 1));
    let r = zmod(45);
    let a = r.int(16);
    assert_eq!(r.residue(&a, 0).unwrap().1, 1);
    assert_eq!(r.residue(&a, 1).unwrap().1, 1);
    assert!(matches!(r.residue(&a, 2), Err(Error::IndexError(2))));
    let re = BaseRing::reals();
    assert_eq!(re.residue(&re.parse_elem("5/2").unwrap(), 0).unwrap().1, rat(5, 2));
}

#[test]
fn enumeration() {
    assert_eq!(zmod(3).enumerate().unwrap(), vec![zmod(3).int(0), zmod(3).int(1), zmod(3).int(2)]);
    assert_eq!(zmod(9).enumerate().unwrap().len(), 9);
    assert!(matches!(BaseRing::reals().enumerate(), Err(Error::NotEnumerable)));
    assert_eq!(zmod(15).enumerate().unwrap().len(), 15);
}

fn m2_mul(r: &Zpk) -> impl Fn(&[u64], &[u64]) -> Vec<u64> + '_ {
    move |a, b| {
        let mut c = vec![0; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    c[i * 2 + j] = r.add(&c[i * 2 + j], &r.mul(&a[i * 2 + k], &b[k * 2 + j]));
                }
            }
        }
        c
    }
}

#[test]
fn idempotent_lifting() {
    let r = Zpk::new(3, 2);
    let mul = |a: &[u64], b: &[u64]| vec![r.mul(&a[0], &b[0])];
    assert_eq!(lift_idempotent(&r, mul, &[1]).unwrap(), vec![1]);
    let seed = [4, 3, 3, 3];
    let e = lift_idempotent(&r, m2_mul(&r), &seed).unwrap();
    assert_eq!(m2_mul(&r)(&e, &e), e);
    assert_eq!(e.iter().map(|x| x % 3).collect::<Vec<_>>(), vec![1, 0, 0, 0]);
    assert!(matches!(lift_idempotent(&r, m2_mul(&r), &[2, 0, 0, 0]), Err(Error::NotIdempotent)));

    // Z/9[l | l^2 = 4]: seed 2^-1 (1 + 2^-1 l) mod 3
    let et = |a: &[u64], b: &[u64]| {
        let x = r.add(&r.mul(&a[0], &b[0]), &r.mul(&4, &r.mul(&a[1], &b[1])));
        let y = r.add(&r.mul(&a[0], &b[1]), &r.mul(&a[1], &b[0]));
        vec![x, y]
    };
    let e = lift_idempotent(&r, et, &[2, 1]).unwrap();
    assert_eq!(et(&e, &e), e);
    assert_eq!((e[0] % 3, e[1] % 3), (2, 1));
}

#[test]
fn real_components_are_fields() {
    let r = RealQ;
    assert!(r.is_unit(&rat(-3, 7)));
    assert!(!r.is_unit(&rat(0, 1)));
    assert!(r.is_square(&rat(2, 3)));
    assert!(!r.is_square(&rat(-2, 3)));
}

proptest! {
    #[test]
    fn square_class_matches_explicit_squares(pk in prop::sample::select(vec![(3u64, 1u32), (3, 2), (5, 1), (5, 2), (7, 1), (7, 2)])) {
        let r = Zpk::new(pk.0, pk.1);
        let sq: std::collections::HashSet<u64> =
            (0..r.m).filter(|x| r.is_unit(x)).map(|x| r.mul(&x, &x)).collect();
        for u in (0..r.m).filter(|x| r.is_unit(x)) {
            prop_assert_eq!(r.is_square(&u), sq.contains(&u));
        }
    }

    #[test]
    fn residue_is_a_homomorphism(a in 0u64..45, b in 0u64..45) {
        let r = zmod(45);
        let (x, y) = (r.int(a as i64), r.int(b as i64));
        for i in 0..2 {
            let (k, ra) = r.residue(&x, i).unwrap();
            let rb = r.residue(&y, i).unwrap().1;
            prop_assert_eq!(r.residue(&r.mul(&x, &y).unwrap(), i).unwrap().1, k.mul(&ra, &rb));
            prop_assert_eq!(r.residue(&r.add(&x, &y).unwrap(), i).unwrap().1, k.add(&ra, &rb));
        }
    }

    #[test]
    fn units_are_residue_units(a in 0u64..225) {
        let r = zmod(225);
        let x = r.int(a as i64);
        let res_nonzero = (0..r.ncomps()).all(|i| r.residue(&x, i).unwrap().1 != 0);
        prop_assert_eq!(r.is_unit(&x).unwrap(), res_nonzero);
    }

    #[test]
    fn lifted_idempotents_are_exact(k in 1u32..5, a in 0u64..3, b in 0u64..3) {
        let r = Zpk::new(3, k);
        // residue idempotent [[1, a], [0, 0]] perturbed by b * 3
        let seed = [1 + 3 * b, a, 0, 3 * b];
        let seed: Vec<u64> = seed.iter().map(|x| x % r.m).collect();
        let e = lift_idempotent(&r, m2_mul(&r), &seed).unwrap();
        prop_assert_eq!(m2_mul(&r)(&e, &e), e.clone());
        prop_assert_eq!(e.iter().map(|x| x % 3).collect::<Vec<_>>(), seed.iter().map(|x| x % 3).collect::<Vec<_>>());
    }
}
