//! Property tests for invariants that cut across modules.

use proptest::prelude::*;

use crate::analysis::{fit_rate, BatchStats};
use crate::dynamics::{Control, LinearDynamics};
use crate::exact_repr::gram_schmidt;
use crate::exppoly::{ExpPolyFunction, ExpTerm};
use crate::kernels::{project_kernel, Kernel, KernelRole};
use crate::laguerre_basis::{astar_on_basis, basis_derivative, basis_eval};
use crate::noise::NoisePath;
use crate::sdde_oracle::{History, InitialDatum, SddeModel};
use crate::weighted_space::{inner_product_w, QuadratureBuilder, WeightSpec};

fn spec_strategy() -> impl Strategy<Value = WeightSpec<f64>> {
    (-1.0f64..1.0, 0.2f64..2.0).prop_map(|(p, extra)| {
        let lambda = p.max(p / 2.0) + extra;
        WeightSpec::new(p, lambda).unwrap()
    })
}

/// Real exponential-polynomial whose terms all lie in `L²_w`.
fn exppoly_strategy(spec: WeightSpec<f64>) -> impl Strategy<Value = ExpPolyFunction<f64>> {
    let floor = spec.lambda_star() - spec.p() + 0.3;
    prop::collection::vec((0u32..3, 0.0f64..2.0, -2.0f64..2.0), 1..4).prop_map(move |terms| {
        ExpPolyFunction::new(
            terms
                .into_iter()
                .map(|(j, r, c)| ExpTerm::real(j, floor + r, c))
                .collect(),
        )
    })
}

fn spec_and_pair() -> impl Strategy<Value = (WeightSpec<f64>, ExpPolyFunction<f64>, ExpPolyFunction<f64>)> {
    spec_strategy().prop_flat_map(|s| (Just(s), exppoly_strategy(s), exppoly_strategy(s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_linear((spec, f, g) in spec_and_pair(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let n = 8;
        let kf = Kernel::exp_poly(f.clone(), &spec, KernelRole::Gamma).unwrap();
        let kg = Kernel::exp_poly(g.clone(), &spec, KernelRole::Gamma).unwrap();
        let kc = Kernel::exp_poly(f.scale(a).add(&g.scale(b)), &spec, KernelRole::Gamma).unwrap();
        let decay = [&kf, &kg, &kc].iter().filter_map(|k| k.quadrature_decay(&spec)).fold(f64::INFINITY, f64::min);
        let rule = QuadratureBuilder::new(spec).max_index(n + 1).min_decay(decay).build().unwrap();
        let pf = project_kernel(&kf, n, &spec, &rule).unwrap();
        let pg = project_kernel(&kg, n, &spec, &rule).unwrap();
        let pc = project_kernel(&kc, n, &spec, &rule).unwrap();
        let scale = 1.0 + pf.norm_sq_w.sqrt() + pg.norm_sq_w.sqrt();
        for k in 0..=n {
            let lin = a * pf.coeffs[k] + b * pg.coeffs[k];
            prop_assert!((pc.coeffs[k] - lin).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn bessel_inequality_and_monotone_tails((spec, f, _g) in spec_and_pair()) {
        let n = 12;
        let k = Kernel::exp_poly(f, &spec, KernelRole::Alpha).unwrap();
        let rule = QuadratureBuilder::new(spec)
            .max_index(n + 1)
            .min_decay(k.quadrature_decay(&spec).unwrap())
            .build()
            .unwrap();
        let pk = project_kernel(&k, n, &spec, &rule).unwrap();
        let captured: f64 = pk.coeffs.iter().map(|c| c * c).sum();
        prop_assert!(captured <= pk.norm_sq_w * (1.0 + 1e-9) + 1e-14);
        let tails = pk.cumulative_tails();
        prop_assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(tails.iter().all(|t| *t >= 0.0));
    }

    #[test]
    fn exact_norm_matches_quadrature((spec, f, g) in spec_and_pair()) {
        let rule = QuadratureBuilder::new(spec).min_decay(0.3).build().unwrap();
        let exact = f.inner_product_w(&g, &spec).unwrap();
        let quad = inner_product_w(|x| f.eval(x), |x| g.eval(x), &spec, &rule);
        prop_assert!((exact - quad).abs() < 1e-8 * (1.0 + exact.abs()));
    }

    #[test]
    fn canonical_form_ignores_term_order(
        terms in prop::collection::vec((0u32..3, -1.0f64..1.0, -2.0f64..2.0), 1..6)
    ) {
        let fwd: Vec<_> = terms.iter().map(|&(j, r, c)| ExpTerm::real(j, r, c)).collect();
        let mut rev = fwd.clone();
        rev.reverse();
        prop_assert_eq!(ExpPolyFunction::new(fwd), ExpPolyFunction::new(rev));
    }

    #[test]
    fn derivative_integrates_to_value_at_zero((spec, f, _g) in spec_and_pair()) {
        // ∫_{−∞}^0 (f w)′ = (f w)(0) = f(0).
        let fw = f.shift_rate(spec.p());
        prop_assume!(fw.min_rate_re().unwrap() > 0.05);
        let total = fw.derivative().integral_rminus().unwrap();
        prop_assert!((total - f.eval(0.0)).abs() < 1e-10 * (1.0 + f.eval(0.0).abs()));
    }

    #[test]
    fn gram_schmidt_is_idempotent((spec, f, g) in spec_and_pair()) {
        let e1 = ExpPolyFunction::exponential(spec.lambda_star() - spec.p() + 0.7, 1.0);
        if let Ok(basis) = gram_schmidt(&[f, g, e1], &spec) {
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let ip = a.inner_product_w(b, &spec).unwrap();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ip - target).abs() < 1e-8);
                }
            }
            let again = gram_schmidt(&basis, &spec).unwrap();
            for (a, b) in basis.iter().zip(&again) {
                let d = a.sub(b);
                prop_assert!(d.inner_product_w(&d, &spec).unwrap() < 1e-16);
            }
        }
    }

    #[test]
    fn astar_matches_adjoint_numerically(spec in spec_strategy(), k in 1usize..7) {
        let rule = QuadratureBuilder::new(spec).max_index(k + 2).build().unwrap();
        let coeffs = astar_on_basis(k, &spec).unwrap().expand(k + 2);
        prop_assert!((coeffs[0] - basis_eval(k, &spec, 0.0).unwrap()).abs() < 1e-12);
        for (j, expected) in coeffs.iter().enumerate().skip(1) {
            let v = inner_product_w(
                |x| -basis_derivative(k, &spec, x).unwrap() - spec.p() * basis_eval(k, &spec, x).unwrap(),
                |x| basis_eval(j, &spec, x).unwrap(),
                &spec,
                &rule,
            );
            prop_assert!((v - expected).abs() < 1e-8, "k={} j={} {} vs {}", k, j, v, expected);
        }
    }

    #[test]
    fn coarsening_preserves_brownian_endpoints(seed in any::<u64>(), idx in 0u64..1000) {
        let fine = NoisePath::<f64>::generate(seed, idx, 1.0 / 64.0, 64).unwrap();
        let coarse = fine.coarsen().unwrap();
        let a: f64 = fine.increments.iter().sum();
        let b: f64 = coarse.increments.iter().sum();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert_eq!(NoisePath::<f64>::generate(seed, idx, 1.0 / 64.0, 64).unwrap().increments, fine.increments);
    }

    #[test]
    fn batch_stderr_scales_with_samples(values in prop::collection::vec(-5.0f64..5.0, 100..400), c in 0.1f64..10.0) {
        let s = BatchStats::from_samples(&values);
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let t = BatchStats::from_samples(&scaled);
        prop_assert!((t.mean - c * s.mean).abs() < 1e-9 * (1.0 + t.mean.abs()));
        prop_assert!((t.stderr - c * s.stderr).abs() < 1e-9 * (1.0 + t.stderr));
        prop_assert!(s.batches >= 10);
    }

    #[test]
    fn fit_recovers_power_laws(slope in -3.0f64..3.0, c in 0.1f64..10.0) {
        let xs = [1.0, 2.0, 5.0, 9.0, 20.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(slope)).collect();
        let f = fit_rate(&xs, &ys).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-10);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-10);
    }

    #[test]
    fn oracle_is_homogeneous_for_linear_dynamics(c in 0.1f64..5.0, seed in any::<u64>()) {
        // With b, σ linear in (x, y) and no constant term, scaling the initial
        // datum scales the whole path.
        let spec = WeightSpec::new(0.0, 2.0).unwrap();
        let dynamics = LinearDynamics { drift: [0.0, 0.1, -0.3, 0.0], diffusion: [0.0, 0.2, 0.0, 0.0] };
        let build = |s: f64| {
            SddeModel::new(spec, dynamics.into_spec(), s)
                .with_alpha(Kernel::uniform_window(0.5, KernelRole::Alpha).unwrap())
                .with_gamma(0.5, Kernel::uniform_window(0.25, KernelRole::Gamma).unwrap())
                .with_init(InitialDatum::new(s, History::Constant { value: s, span: Some(1.0) }))
        };
        let noise = NoisePath::generate(seed, 0, 1.0 / 64.0, 64).unwrap();
        let a = build(1.0).oracle(1.0 / 64.0, 1.0).unwrap().run(&noise, &Control::Zero).unwrap();
        let b = build(c).oracle(1.0 / 64.0, 1.0).unwrap().run(&noise, &Control::Zero).unwrap();
        for (za, zb) in a.z.iter().zip(&b.z) {
            prop_assert!((c * za - zb).abs() < 1e-10 * (1.0 + zb.abs()));
        }
    }
}

#[test]
fn smooth_kernel_tails_decay_faster_than_window() {
    use crate::laguerre_basis::basis_all;
    let spec = WeightSpec::new(0.0, 1.0).unwrap();
    let rule = QuadratureBuilder::new(spec).max_index(65).node_count(16384).build().unwrap();
    let ww = rule.weighted_weights(&spec);
    // Resolved at the basis scale 1/(2p₀); much narrower bumps only reach
    // their super-algebraic regime beyond n = 64.
    let bump = |x: f64| (-(x + 2.0).powi(2)).exp();
    let mut coeffs = vec![0.0; 64];
    let mut vals = vec![0.0; 64];
    let mut norm = 0.0;
    for (x, w) in rule.nodes().iter().zip(&ww) {
        basis_all(&spec, *x, &mut vals);
        let g = bump(*x);
        norm += w * g * g;
        for (c, v) in coeffs.iter_mut().zip(&vals) {
            *c += w * g * v;
        }
    }
    let tail = |n: usize| norm - coeffs[..n].iter().map(|c| c * c).sum::<f64>();
    let ns = [8.0, 16.0, 32.0, 64.0];
    let ts: Vec<f64> = ns.iter().map(|n| tail(*n as usize)).collect();
    let fit = fit_rate(&ns, &ts).unwrap();
    assert!(fit.slope < -3.0, "slope {} tails {:?}", fit.slope, ts);
}
