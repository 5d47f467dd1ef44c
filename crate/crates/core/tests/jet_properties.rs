use magwell::jet::{
    compose, exp_ad, moyal_bracket, moyal_star, poisson, scaled_ad, Basis, Coeff, Exact, GradeBound, Jet, JetMap,
    Mono, Vars,
};
use num_complex::Complex64;
use num_traits::Zero;
use proptest::prelude::*;

type EJet = Jet<Exact>;

const VARS: Vars = Vars { nw: 2, nz: 1 };

fn ratio(n: i64, d: i64) -> Exact {
    <Exact as Coeff>::ratio(n, d)
}

/// (w, alpha, gamma, hbar, re numerator, im numerator)
fn raw_terms(max: usize) -> impl Strategy<Value = Vec<(u32, u32, u32, u32, i64, i64)>> {
    prop::collection::vec((0u32..3, 0u32..4, 0u32..4, 0u32..2, -4i64..5, -3i64..4), 0..max)
}

fn build(vars: Vars, basis: Basis, bound: GradeBound, raw: &[(u32, u32, u32, u32, i64, i64)], real: bool) -> EJet {
    let mut j = Jet::zero(vars, basis, bound);
    for &(w, a, g, l, re, im) in raw {
        let m = Mono::from_parts(&vars, &[w % 2, w / 2], &[a], &[g], l);
        if !j.admits(&m) {
            continue;
        }
        let im = if real { 0 } else { im };
        let c = Coeff::add(&ratio(re, 2), &Coeff::mul(&ratio(im, 3), &Exact::imag_unit()));
        j.add_term(m, c);
    }
    j
}

fn bound() -> GradeBound {
    GradeBound::new(6, 2)
}

fn jet(real: bool) -> impl Strategy<Value = EJet> {
    raw_terms(5).prop_map(move |r| build(VARS, Basis::Real, bound(), &r, real))
}

fn without_hbar(j: &EJet) -> EJet {
    j.filter(|m| m.hbar() == 0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn star_is_associative(a in jet(false), b in jet(false), c in jet(false)) {
        let l = moyal_star(&moyal_star(&a, &b).unwrap(), &c).unwrap();
        let r = moyal_star(&a, &moyal_star(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn bracket_satisfies_jacobi(a in jet(false), b in jet(false), c in jet(false)) {
        let br = |x: &EJet, y: &EJet| moyal_bracket(x, y).unwrap();
        let s = br(&a, &br(&b, &c))
            .add(&br(&b, &br(&c, &a))).unwrap()
            .add(&br(&c, &br(&a, &b))).unwrap();
        prop_assert!(s.is_empty(), "{:?}", s);
    }

    #[test]
    fn products_respect_the_filtration(a in jet(false), b in jet(false)) {
        if let (Some(va), Some(vb)) = (a.valuation(), b.valuation()) {
            if let Some(v) = moyal_star(&a, &b).unwrap().valuation() {
                prop_assert!(v >= va + vb);
            }
            if let Some(v) = scaled_ad(&a, &b).unwrap().valuation() {
                prop_assert!(v + 2 >= va + vb);
            }
        }
    }

    #[test]
    fn symmetrized_product_of_real_symbols_is_real(a in jet(true), b in jet(true)) {
        let s = moyal_star(&a, &b).unwrap().add(&moyal_star(&b, &a).unwrap()).unwrap();
        prop_assert!(s.terms().all(|(_, c)| c.im.is_zero()));
        // and the commutator is purely imaginary
        let d = moyal_bracket(&a, &b).unwrap();
        prop_assert!(d.terms().all(|(_, c)| c.re.is_zero()));
    }

    #[test]
    fn poisson_is_leading_part_of_scaled_ad(a in jet(false), b in jet(false)) {
        let (a, b) = (without_hbar(&a), without_hbar(&b));
        let lead = without_hbar(&scaled_ad(&a, &b).unwrap());
        prop_assert_eq!(lead, poisson(&a, &b).unwrap());
    }

    #[test]
    fn complex_convert_round_trips(a in jet(false)) {
        let z = a.complex_convert(Basis::Complex);
        prop_assert_eq!(z.complex_convert(Basis::Real), a);
    }

    #[test]
    fn star_commutes_with_basis_change(a in jet(false), b in jet(false)) {
        let real = moyal_star(&a, &b).unwrap().complex_convert(Basis::Complex);
        let cplx = moyal_star(&a.complex_convert(Basis::Complex), &b.complex_convert(Basis::Complex)).unwrap();
        prop_assert_eq!(real, cplx);
    }

    #[test]
    fn exp_ad_inverts(raw in raw_terms(4), a in jet(false)) {
        let tau = build(VARS, Basis::Real, bound(), &raw, false).filter(|m| m.phase() >= 3);
        let n = bound().total() as usize + 1;
        let there = exp_ad(&tau, &a, n).unwrap();
        let back = exp_ad(&tau.neg(), &there, n).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn json_round_trip(a in jet(false)) {
        let f = a.to_float();
        let g = Jet::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn inverse_times_jet_is_one(raw in raw_terms(6), c0 in 1i64..5) {
        let vars = Vars::new(2, 0).unwrap();
        let b = GradeBound::new(0, 4);
        let mut a: Jet = Jet::constant(vars, Basis::Real, b, Complex64::new(c0 as f64, 0.0));
        for (w, a2, _, _, re, im) in raw {
            let m = Mono::from_parts(&vars, &[w, a2.min(2)], &[], &[], 0);
            if m != Mono::ONE {
                a.add_term(m, Complex64::new(re as f64 / 3.0, im as f64 / 5.0));
            }
        }
        let p = a.mul(&a.invert().unwrap()).unwrap();
        let one = Jet::constant(vars, Basis::Real, b, Complex64::new(1.0, 0.0));
        prop_assert!(p.dist(&one) < 1e-12, "{}", p.dist(&one));
    }

    #[test]
    fn compose_matches_pointwise(
        coeffs in prop::collection::vec(-2.0f64..2.0, 15),
        lin in prop::collection::vec(-1.0f64..1.0, 4),
        x in prop::collection::vec(-0.7f64..0.7, 2),
    ) {
        let vars = Vars::new(2, 0).unwrap();
        let b = GradeBound::new(0, 4);
        let mut f: Jet = Jet::zero(vars, Basis::Real, b);
        let mut k = 0;
        for d in 0..=4u32 {
            for i in 0..=d {
                f.add_term(Mono::from_parts(&vars, &[i, d - i], &[], &[], 0), Complex64::new(coeffs[k], 0.0));
                k += 1;
            }
        }
        let v = |i| Jet::var(vars, Basis::Real, b, i);
        let g0 = v(0).scale(&Complex64::new(lin[0], 0.0)).add(&v(1).scale(&Complex64::new(lin[1], 0.0))).unwrap();
        let g1 = v(0).scale(&Complex64::new(lin[2], 0.0)).add(&v(1).scale(&Complex64::new(lin[3], 0.0))).unwrap();
        let map = JetMap::new(vec![g0.clone(), g1.clone()]).unwrap();
        let fg = compose(&f, &map).unwrap();
        let inner = [g0.eval_real(&x), g1.eval_real(&x)];
        let direct = f.eval_real(&inner);
        prop_assert!((fg.eval_real(&x) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
    }
}

#[test]
fn complex_basis_bracket_with_action() {
    // {|z|^2, z^2 zb} = -2i (2 - 1) z^2 zb with z = x + i xi
    let vars = Vars::new(0, 1).unwrap();
    let b = GradeBound::new(6, 0);
    let i2: EJet = Jet::monomial(vars, Basis::Complex, b, Mono::from_parts(&vars, &[], &[1], &[1], 0), Exact::one());
    let m = Mono::from_parts(&vars, &[], &[2], &[1], 0);
    let f: EJet = Jet::monomial(vars, Basis::Complex, b, m, Exact::one());
    let p = poisson(&i2, &f).unwrap();
    let expect = Jet::monomial(vars, Basis::Complex, b, m, Coeff::mul(&ratio(-2, 1), &Exact::imag_unit()));
    assert_eq!(p, expect);
    // (i/hbar) ad of the action is exactly its Poisson bracket
    assert_eq!(scaled_ad(&i2, &f).unwrap(), expect);
}

#[test]
fn truncation_drops_out_of_bound_terms() {
    let vars = Vars::new(2, 1).unwrap();
    let b = GradeBound::new(3, 1);
    let x: EJet = Jet::var(vars, Basis::Real, b, 2);
    let w: EJet = Jet::var(vars, Basis::Real, b, 0);
    assert!(x.pow(4).unwrap().is_empty());
    assert!(w.pow(5).unwrap().is_empty());
    assert_eq!(w.pow(4).unwrap().len(), 1);
    // phase degree caps w degree from the top
    assert!(x.pow(3).unwrap().mul(&w.pow(2).unwrap()).unwrap().is_empty());
    assert_eq!(x.pow(3).unwrap().len(), 1);
    let xi: EJet = Jet::var(vars, Basis::Real, b, 3);
    let s = moyal_star(&x.mul(&xi).unwrap(), &x).unwrap();
    assert!(s.terms().all(|(m, _)| m.phase() <= 3));
}
