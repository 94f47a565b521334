use octawitt::algiv::{Alg, Algebra, InvType};
use octawitt::herm::HermitianForm;
use octawitt::octagon::{
    configuration, jacobson_check, lewis_five, lewis_seven, make_octagon, OctMap, OctagonData, Part, Side, ARROWS,
    NODES,
};
use octawitt::ring::{BaseRing, Zpk};
use octawitt::Error;
use proptest::prelude::*;

fn zmod(m: u64) -> BaseRing<Zpk> {
    BaseRing::parse(&format!("Z/{m}")).unwrap()
}

fn quat(m: u64, a: i64, b: i64) -> Alg<Zpk> {
    let r = zmod(m);
    Algebra::quaternion(&r, &r.int(a), &r.int(b)).unwrap()
}

fn oct(m: u64, a: i64, b: i64, eps: i64) -> OctagonData<Zpk> {
    let q = quat(m, a, b);
    make_octagon(&q, &q.sign(eps)).unwrap()
}

/// Rank-one forms `<u>` on a node, one per unit symmetric `u`, and the hyperbolic plane.
fn node_inputs(d: &OctagonData<Zpk>, k: usize) -> Vec<HermitianForm<Zpk>> {
    let (side, s) = NODES[k];
    let alg = d.alg_on(side);
    let eps = d.eps_on(side, s).unwrap();
    let mut out: Vec<_> = alg
        .sym_elements(&eps)
        .unwrap()
        .into_iter()
        .filter(|u| alg.is_unit(u))
        .map(|u| HermitianForm::diagonal(alg, &eps, &[u]).unwrap())
        .collect();
    out.push(HermitianForm::hyperbolic(alg, &eps, 1).unwrap());
    out
}

#[test]
fn quaternion_configuration_over_f3() {
    let d = oct(3, 2, 2, 1);
    assert_eq!(d.b_basis.len(), 2);
    assert!(d.t_connected);
    assert_eq!(d.types.tau1[0], vec![InvType::Unitary]);
    assert_eq!(d.types.tau2[0], vec![InvType::Orthogonal]);
    assert_eq!(d.types.sigma[0], vec![InvType::Symplectic]);
    assert_eq!(d.types.sigma[1], vec![InvType::Orthogonal]);
    // τ₂ is the identity on B
    for l in &d.b2.comps {
        for (i, row) in l.sigma.iter().enumerate() {
            assert_eq!(*row, l.basis(i));
        }
    }
    let d9 = oct(9, 2, 5, -1);
    assert_eq!(d9.types.sigma[0], vec![InvType::Orthogonal]);
}

#[test]
fn unitary_tensor_configuration() {
    let r = zmod(3);
    let a = configuration(&r, &r.int(2), &r.int(2), Some(&r.int(2))).unwrap();
    let d = make_octagon(&a, &a.one()).unwrap();
    assert_eq!(d.b_basis.len(), 4);
    assert!(!d.t_connected);
    assert_eq!(d.types.sigma[0], vec![InvType::Unitary]);
    assert_eq!(d.types.tau1[0], vec![InvType::Unitary]);
    assert_eq!(d.types.tau2[0], vec![InvType::Unitary]);
}

#[test]
fn invalid_octagon_data() {
    let r = zmod(3);
    let m = Algebra::matrix(&r, 2, &octawitt::algiv::MatrixInvolution::Transpose).unwrap();
    assert!(matches!(make_octagon(&m, &m.one()), Err(Error::InvalidOctagonData(_))));
}

#[test]
fn maps_on_small_forms() {
    let d = oct(3, 2, 2, 1);
    let b1 = d.alg_on(Side::B1).clone();
    let one = HermitianForm::diagonal(&b1, &b1.one(), &[b1.one()]).unwrap();
    let r1 = d.apply(OctMap::Rho1, &one).unwrap();
    assert_eq!(r1.gram, vec![d.lambda.clone()]);
    assert_eq!(r1.eps, d.a.sign(-1));
    let z = HermitianForm::zero_form(&d.a, &d.a.one()).unwrap();
    assert_eq!(d.apply(OctMap::Pi1, &z).unwrap().n, 0);
    // π₁(<μλ>) for ε = -1: off-diagonal blocks only
    let dm = oct(3, 2, 2, -1);
    let a = &dm.a;
    let ml = a.mul(&dm.mu, &dm.lambda);
    let f = HermitianForm::diagonal(a, &a.sign(-1), &[ml.clone()]).unwrap();
    let p = dm.apply(OctMap::Pi1, &f).unwrap();
    assert_eq!(p.n, 2);
    assert!(dm.b1.is_zero(p.entry(0, 0)) && dm.b1.is_zero(p.entry(1, 1)));
    assert_eq!(dm.from_b(p.entry(0, 1)), a.mul(&ml, &dm.mu));
    // wrong side or sign
    assert!(matches!(dm.apply(OctMap::Rho1, &f), Err(Error::FormMismatch(_))));
    assert!(matches!(d.apply(OctMap::Pi1, &one), Err(Error::FormMismatch(_))));
}

#[test]
fn chain_witnesses_on_every_pair() {
    for eps in [1, -1] {
        let d = oct(3, 2, 2, eps);
        for k in 0..8 {
            for f in node_inputs(&d, k) {
                let w = d.chain_witness(k, &f).unwrap();
                assert!(w.composite.verify_lagrangian(&w.lagrangian).unwrap());
                let expect = if ARROWS[k].is_pi() { "x mu (x) 1" } else { "Q (x)" };
                assert!(w.shape.starts_with(expect), "{k}: {}", w.shape);
            }
            let (side, s) = NODES[k];
            let z = HermitianForm::zero_form(d.alg_on(side), &d.eps_on(side, s).unwrap()).unwrap();
            assert!(d.chain_witness(k, &z).unwrap().lagrangian.l.is_empty());
        }
    }
}

#[test]
fn octagon_exact_over_f3() {
    for eps in [1, -1] {
        let rep = oct(3, 2, 2, eps).check_exact(Some(8)).unwrap();
        assert!(rep.exact, "{}", serde_json::to_string_pretty(&rep).unwrap());
    }
}

#[test]
fn lewis_sequences_over_f3() {
    let r = zmod(3);
    let five = lewis_five(&r, &r.int(2), None).unwrap();
    assert!(five.exact && five.side_checks.iter().all(|c| c.ok));
    let five = lewis_five(&r, &r.int(1), None).unwrap();
    assert!(five.exact, "{}", serde_json::to_string_pretty(&five).unwrap());
    let seven = lewis_seven(&r, &r.int(2), &r.int(2), None).unwrap();
    assert!(seven.exact && seven.side_checks.iter().all(|c| c.ok), "{}", serde_json::to_string_pretty(&seven).unwrap());
}

#[test]
fn jacobson_examples() {
    let r = zmod(3);
    let t = Algebra::quadratic_etale(&r, &r.int(2)).unwrap();
    let f = HermitianForm::diagonal(&t, &t.one(), &[t.one()]).unwrap();
    let j = jacobson_check(&f, Some(&f)).unwrap();
    assert!(!j.isotropic && !j.trace_isotropic && j.isotropy_equiv && j.isometry_equiv);
    let h = HermitianForm::hyperbolic(&t, &t.one(), 1).unwrap();
    let j = jacobson_check(&h, Some(&f)).unwrap();
    assert!(j.isotropic && j.trace_isotropic);
    assert_eq!(j.isometric, Some(false));
}

#[test]
fn finer_predicates_small() {
    let d = oct(3, 2, 2, 1);
    let a = &d.a;
    // part (i): rank one forms have reduced rank 2, so no preimage under ρ₂
    let f = HermitianForm::diagonal(a, &a.one(), &[a.one()]).unwrap();
    assert!(!d.finer_predicate(Part::I, &f).unwrap());
    assert!(matches!(d.preimage_oracle(Part::I, &f, None), Err(Error::NotFound)));
    let f2 = f.direct_sum(&f).unwrap();
    assert!(d.finer_predicate(Part::I, &f2).unwrap());
    assert!(d.preimage_oracle(Part::I, &f2, None).is_ok());
    let z = HermitianForm::zero_form(a, &a.one()).unwrap();
    assert!(d.finer_predicate(Part::I, &z).unwrap());
    assert_eq!(d.preimage_oracle(Part::I, &z, None).unwrap().n, 0);
}

#[test]
fn tau2_is_conjugated_sigma_on_b() {
    for (m, a, b, a1) in [(3, 2, 2, None), (5, 2, 3, None), (9, 2, 5, None), (3, 2, 2, Some(2)), (5, 2, 3, Some(2))] {
        let r = zmod(m);
        let q = configuration(&r, &r.int(a), &r.int(b), a1.map(|x| r.int(x)).as_ref()).unwrap();
        for eps in [1, -1] {
            let d = make_octagon(&q, &q.sign(eps)).unwrap();
            let qa = &d.a;
            let minv = qa.inv(&d.mu).unwrap();
            assert_eq!(2 * d.b_basis.len(), qa.dim);
            assert_eq!(2 * d.b1.deg, qa.deg);
            for x in &d.b_basis {
                let y = d.b2.involute(&d.to_b(x).unwrap());
                assert_eq!(d.from_b(&y), qa.mul(&qa.mul(&minv, &qa.involute(x)), &d.mu));
                let y1 = d.b1.involute(&d.to_b(x).unwrap());
                assert_eq!(d.from_b(&y1), qa.involute(x));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maps_preserve_hyperbolicity_and_isometry(k in 0usize..8, i in 0usize..64, j in 0usize..64, eps in prop::sample::select(vec![1i64, -1])) {
        let d = oct(5, 2, 3, eps);
        let ins = node_inputs(&d, k);
        let f = &ins[i % ins.len()];
        let g = &ins[j % ins.len()];
        let h = f.direct_sum(&f.neg()).unwrap();
        prop_assert!(d.apply(ARROWS[k], &h).unwrap().is_hyperbolic().unwrap());
        if f.is_isometric(g).unwrap() {
            prop_assert!(d.apply(ARROWS[k], f).unwrap().is_isometric(&d.apply(ARROWS[k], g).unwrap()).unwrap());
        }
    }
}
