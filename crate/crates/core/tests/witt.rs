use std::sync::Arc;

use octawitt::algiv::{Alg, Algebra, MatrixInvolution};
use octawitt::herm::HermitianForm;
use octawitt::ring::{BaseRing, Zpk};
use octawitt::witt::{exact_at, group_structure, WittHom, WittTable};
use octawitt::Error;
use proptest::prelude::*;

fn zmod(m: u64) -> BaseRing<Zpk> {
    BaseRing::parse(&format!("Z/{m}")).unwrap()
}

fn scalar(m: u64) -> Alg<Zpk> {
    Algebra::scalar(&zmod(m)).unwrap()
}

fn table(a: &Alg<Zpk>, eps: i64) -> Arc<WittTable<Zpk>> {
    let t = WittTable::build(a, &a.sign(eps), None).unwrap();
    t.check_axioms().unwrap();
    t.check_representatives().unwrap();
    Arc::new(t)
}

/// Brute-force Witt group of a finite field `F_p`: forms are pairs (rank mod 2, signed
/// discriminant) and the sum rule is computed from the diagonal entries.
fn brute_field_order(p: u64) -> usize {
    let squares: std::collections::HashSet<u64> = (1..p).map(|x| x * x % p).collect();
    let mut classes = std::collections::HashSet::new();
    for n in 0..4u64 {
        let mut stack = vec![(0u64, 1u64)];
        while let Some((k, d)) = stack.pop() {
            if k == n {
                let signed = if (n * (n.saturating_sub(1)) / 2) % 2 == 1 { (p - d) % p } else { d };
                classes.insert((n % 2, squares.contains(&signed)));
                continue;
            }
            for a in 1..p {
                stack.push((k + 1, d * a % p));
            }
        }
    }
    classes.len()
}

#[test]
fn witt_groups_of_prime_fields() {
    for (p, s) in [(3u64, vec![4u64]), (5, vec![2, 2]), (7, vec![4]), (13, vec![2, 2])] {
        let t = table(&scalar(p), 1);
        assert_eq!(group_structure(&t), s, "p = {p}");
        assert_eq!(t.len(), brute_field_order(p));
    }
}

#[test]
fn classes_of_w_f3() {
    let a = scalar(3);
    let t = table(&a, 1);
    let d = |xs: &[i64]| {
        HermitianForm::diagonal(&a, &a.one(), &xs.iter().map(|&x| a.int(x)).collect::<Vec<_>>()).unwrap()
    };
    let one = t.class_of(&d(&[1])).unwrap();
    assert_eq!(t.order(one), 4);
    assert_eq!(t.class_of(&d(&[1, 1])).unwrap(), t.multiple(one, 2));
    assert_eq!(t.class_of(&d(&[2])).unwrap(), t.multiple(one, 3));
    assert_eq!(t.class_of(&d(&[1, 2])).unwrap(), 0);
}

#[test]
fn alternating_forms_are_trivial() {
    assert!(table(&scalar(3), -1).is_trivial());
    assert_eq!(group_structure(&table(&scalar(3), -1)), Vec::<u64>::new());
}

#[test]
fn prime_power_tables_match_residue_tables() {
    for (m, p) in [(9u64, 3u64), (25, 5), (27, 3)] {
        let big = table(&scalar(m), 1);
        let small = table(&scalar(p), 1);
        assert_eq!(big.len(), small.len());
        // reduction of diagonal representatives is an isomorphism of tables
        let red: Vec<usize> = big
            .classes
            .iter()
            .map(|f| {
                let a = scalar(p);
                let entries: Vec<_> = f.gram.iter().map(|x| a.int((x.c[0][0] % p) as i64)).collect();
                let g = HermitianForm::new(a.clone(), a.one(), f.n, entries).unwrap();
                small.class_of(&g).unwrap()
            })
            .collect();
        let mut sorted = red.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), big.len());
        for i in 0..big.len() {
            for j in 0..big.len() {
                assert_eq!(red[big.add[i][j]], small.add[red[i]][red[j]]);
            }
        }
    }
}

#[test]
fn products_and_projective_classes() {
    let r = BaseRing::parse("Z/3 x GF(5)").unwrap();
    let a = Algebra::scalar(&r).unwrap();
    let t = table(&a, 1);
    assert_eq!(t.len(), 16);
    assert_eq!(group_structure(&t), vec![2, 2, 4]);
    let m = Algebra::matrix(&zmod(3), 2, &MatrixInvolution::Transpose).unwrap();
    let tm = table(&m, 1);
    assert_eq!(group_structure(&tm), vec![4]);
    let te = table(&Algebra::quadratic_etale(&zmod(3), &zmod(3).int(2)).unwrap(), 1);
    assert_eq!(group_structure(&te), vec![2]);
    let tx = table(&Algebra::exchange(&zmod(5)).unwrap(), 1);
    assert!(tx.is_trivial());
}

#[test]
fn quaternion_tables() {
    let r = zmod(3);
    let q = Algebra::quaternion(&r, &r.int(2), &r.int(2)).unwrap();
    assert!(table(&q, 1).is_trivial());
    assert_eq!(group_structure(&table(&q, -1)), vec![4]);
}

#[test]
fn homs_kernels_images() {
    let a = scalar(3);
    let t = table(&a, 1);
    let id = WittHom::induced("id", &t, &t, |f| Ok(f.clone())).unwrap();
    assert_eq!(id.kernel(), vec![0]);
    assert!(id.is_surjective());
    let z = WittHom::zero("0", &t, &t);
    assert_eq!(z.kernel().len(), 4);
    assert!(!exact_at(&z, &z).unwrap());
    assert!(exact_at(&z, &id).unwrap());
    let neg = WittHom::induced("neg", &t, &t, |f| Ok(f.neg())).unwrap();
    assert_eq!(id.then(&neg).unwrap().map, neg.map);
    let other = table(&scalar(5), 1);
    let z2 = WittHom::zero("0", &other, &other);
    assert!(matches!(exact_at(&z, &z2), Err(Error::HomMismatch(_))));
}

#[test]
fn trace_transfer_is_injective() {
    let r = zmod(3);
    let s = Algebra::quadratic_etale(&r, &r.int(2)).unwrap();
    let ts = table(&s, 1);
    let tr = table(&scalar(3), 1);
    let h = WittHom::induced("Tr", &ts, &tr, |f| {
        let g = f.trace_transfer()?;
        HermitianForm::new(tr.alg.clone(), tr.eps.clone(), g.n, g.gram)
    })
    .unwrap();
    assert!(h.is_injective());
    let one = HermitianForm::diagonal(&s, &s.one(), &[s.one()]).unwrap();
    let a = &tr.alg;
    let two = HermitianForm::diagonal(a, &a.one(), &[a.int(2), a.int(2)]).unwrap();
    assert_eq!(h.map[ts.class_of(&one).unwrap()], tr.class_of(&two).unwrap());
}

#[test]
fn cap_is_reported() {
    let a = scalar(3);
    assert!(matches!(WittTable::build(&a, &a.one(), Some(1)), Err(Error::CapExceeded(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn induced_homs_compose(c in 1i64..5, d in 1i64..5) {
        let a = scalar(5);
        let t = table(&a, 1);
        let scale = |k: i64| {
            let a = a.clone();
            move |f: &HermitianForm<Zpk>| f.with_gram(f.eps.clone(), f.gram.iter().map(|x| a.mul(&a.int(k), x)).collect())
        };
        let hc = WittHom::induced("c", &t, &t, scale(c)).unwrap();
        let hd = WittHom::induced("d", &t, &t, scale(d)).unwrap();
        let hcd = WittHom::induced("cd", &t, &t, scale(c * d)).unwrap();
        hc.check_additive().unwrap();
        prop_assert_eq!(hc.then(&hd).unwrap().map, hcd.map);
    }
}
