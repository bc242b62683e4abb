use nalgebra::DVector;
use proptest::prelude::*;
use warpcheck_core::catalog::{sol1, sol2_from, pde_residual_all, ImmersionCase};
use warpcheck_core::jets::Jet2;
use warpcheck_core::paracomplex::{pseudo_dot, ParaComplex, ParaVector};
use warpcheck_core::submanifold::*;

fn pc() -> impl Strategy<Value = ParaComplex> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| ParaComplex::new(a, b))
}

fn close(a: ParaComplex, b: ParaComplex) -> bool {
    (a.re - b.re).abs() <= 1e-12 && (a.jm - b.jm).abs() <= 1e-12
}

// sin(x y) + exp(x) / (2 + cos y)
fn composite(x: &Jet2, y: &Jet2) -> Jet2 {
    let a = (x * y).sin();
    let b = (y.cos() + 2.0).recip().unwrap();
    a + &x.exp() * &b
}

fn composite_f64(x: f64, y: f64) -> f64 {
    (x * y).sin() + x.exp() / (2.0 + y.cos())
}

fn cases() -> Vec<ImmersionCase> {
    vec![
        ImmersionCase::case1_reference(),
        ImmersionCase::case2_reference(),
        ImmersionCase::case3_reference(),
        ImmersionCase::case4_corrected(1.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_match_finite_differences(x in -1.5..1.5f64, y in -1.5..1.5f64) {
        let z = Jet2::seeds(&[x, y]);
        let f = composite(&z[0], &z[1]);
        let h = 1e-4;
        let dx = (composite_f64(x + h, y) - composite_f64(x - h, y)) / (2.0 * h);
        let dxy = (composite_f64(x + h, y + h) - composite_f64(x + h, y - h)
            - composite_f64(x - h, y + h) + composite_f64(x - h, y - h)) / (4.0 * h * h);
        let dyy = (composite_f64(x, y + h) - 2.0 * composite_f64(x, y) + composite_f64(x, y - h)) / (h * h);
        prop_assert!((f.value() - composite_f64(x, y)).abs() <= 1e-14);
        prop_assert!((f.d(0) - dx).abs() <= 1e-6);
        prop_assert!((f.d2(0, 1) - dxy).abs() <= 1e-5);
        prop_assert!((f.d2(1, 1) - dyy).abs() <= 1e-5);
        prop_assert_eq!(f.d2(0, 1), f.d2(1, 0));
    }

    #[test]
    fn paracomplex_ring(a in pc(), b in pc(), c in pc()) {
        prop_assert!(close(a * b, b * a));
        prop_assert!(close((a * b) * c, a * (b * c)));
        prop_assert!(close(a * (b + c), a * b + a * c));
        prop_assert!(close((a * b).conj(), a.conj() * b.conj()));
        prop_assert!(((a * b).norm_form() - a.norm_form() * b.norm_form()).abs() <= 1e-10);
        prop_assert!(((a * a.conj()).re - a.norm_form()).abs() <= 1e-12);
    }

    #[test]
    fn identification_round_trip(v in prop::collection::vec(pc(), 1..5)) {
        let pv = ParaVector::new(v);
        let back = ParaVector::from_real(&pv.identify()).unwrap();
        prop_assert_eq!(&back, &pv);
        prop_assert_eq!(pv.mul_j().mul_j(), pv.clone());
        let x = pv.identify();
        let jx = pv.mul_j().identify();
        // the structure is skew for the neutral form and preserves nothing else
        prop_assert!(pseudo_dot(&x, &jx).unwrap().abs() <= 1e-12);
        prop_assert!((pseudo_dot(&jx, &jx).unwrap() + pseudo_dot(&x, &x).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn projectors_and_forms(which in 0usize..4, index in 0usize..10_000, seed in 0u64..1000) {
        let case = &cases()[which];
        let Some(pt) = case.sample(seed, index).point else { return Ok(()) };
        let wp = case.build().unwrap();
        let fp = wp.frame(&pt).unwrap();
        let big = fp.ambient().dim();
        let t = fp.tangential_projector();
        let nrm = fp.normal_projector();
        prop_assert!((t * t - t).abs().max() <= 1e-10 * (1.0 + t.abs().max().powi(2)));
        prop_assert!((t + &nrm - nalgebra::DMatrix::identity(big, big)).abs().max() <= 1e-12);
        let v = DVector::from_fn(big, |i, _| ((i * 7 + index) % 5) as f64 - 2.0);
        let w = DVector::from_fn(big, |i, _| ((i * 3 + index) % 4) as f64 - 1.5);
        let scale = 1.0 + t.abs().max();
        prop_assert!(fp.ambient().dot(&fp.tan(&v), &fp.nor(&w)).abs() <= 1e-10 * scale * scale * 20.0);

        for i in 0..fp.dim() {
            let x = fp.frame_vector(i);
            let px = fp.structure(&x);
            prop_assert!(fp.ambient().dot(&px, &x).abs() <= 1e-10 * (1.0 + x.norm_squared()));
        }

        let sff = second_ff(&fp);
        for i in 0..fp.dim() {
            for j in 0..fp.dim() {
                prop_assert_eq!(sff.get(i, j), sff.get(j, i));
            }
        }
        prop_assert!(sff.normality_residual(&fp) <= 1e-10 * (1.0 + sff.max_abs()));
        let blocks = sigma_blocks(&fp, &sff, &wp.split);
        let total = s_sigma(&fp, &sff);
        prop_assert!((blocks.total() - total).abs() <= 1e-10 * (1.0 + total.abs()));
    }

    #[test]
    fn sol1_solves_the_system(
        a in prop::collection::vec(0.2..2.0f64, 3),
        b in prop::collection::vec(-2.0..2.0f64, 3),
        c in (-0.5..0.5f64, -0.5..0.5f64),
        h in 1usize..4,
        z in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let mut v = a[..h].to_vec();
        v.push(0.0);
        v.extend(&b[1..h]);
        let s = sol1(v, c.0, c.1).unwrap();
        prop_assume!(s.in_domain(&z[..2 * h]));
        let psi = s.psi_at(&z[..2 * h]).unwrap();
        let (r, scale) = pde_residual_all(&psi, h);
        prop_assert!(r <= 1e-10 * (1.0 + scale), "{r} {scale}");
    }

    #[test]
    fn sol2_solves_the_system(
        a in prop::collection::vec(-2.0..2.0f64, 3),
        b in prop::collection::vec(0.2..2.0f64, 3),
        eps in prop::bool::ANY,
        cd in (-1.0..1.0f64, -1.0..1.0f64),
        h in 1usize..4,
        z in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let mut a = a[..h].to_vec();
        a[0] = 0.0;
        let s = sol2_from(&a, &b[..h], if eps { 1 } else { -1 }, cd.0, cd.1).unwrap();
        prop_assume!(s.in_domain(&z[..2 * h]));
        let psi = s.psi_at(&z[..2 * h]).unwrap();
        let (r, scale) = pde_residual_all(&psi, h);
        prop_assert!(r <= 1e-10 * (1.0 + scale), "{r} {scale}");
    }
}
