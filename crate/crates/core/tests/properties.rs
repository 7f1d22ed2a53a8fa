use std::sync::Arc;

use proptest::collection::vec;
use proptest::prelude::*;
use rand::Rng;

use preisach::csv_io::{read_step_signal, write_step_signal};
use preisach::inverse::{invert, stability_check};
use preisach::preisach::{check_layers, refine_error, Preset};
use preisach::random::{random_param_signal, random_step_signal, seeded};
use preisach::signals::{merge_divisions, oscillation, sup_seminorm};
use preisach::{
    discretize, forward_apply, forward_eval, play_trajectory, DensityModel, ParamSignal, StepSignal,
};

const TOL: f64 = 1e-10;

/// Step signal on `[0, 1]` with at most `max_steps` steps.
fn step_signal(max_steps: usize, amplitude: f64) -> impl Strategy<Value = StepSignal> {
    (1..=max_steps)
        .prop_flat_map(move |n| (vec(0.01..1.0f64, n), vec(-amplitude..amplitude, n + 1)))
        .prop_map(|(gaps, values)| {
            let total: f64 = gaps.iter().sum();
            let mut division = vec![0.0];
            let mut acc = 0.0;
            for g in &gaps[..gaps.len() - 1] {
                acc += g;
                division.push(acc / total);
            }
            division.push(1.0);
            StepSignal::new(division, values).unwrap()
        })
}

fn scalar_param(x: &StepSignal) -> ParamSignal {
    ParamSignal::from_scalar(x)
}

fn exp_model() -> Arc<dyn DensityModel> {
    Arc::new(Preset::Exp.density())
}

#[test]
fn merge_preserves_evaluation_at_many_times() {
    let mut rng = seeded(11);
    for _ in 0..10 {
        let a = random_step_signal(&mut rng, 1.0, 4.0).unwrap();
        let b = random_step_signal(&mut rng, 1.0, 4.0).unwrap();
        let (_, ma, mb) = merge_divisions(&a, &b).unwrap();
        for _ in 0..100_000 {
            let t = rng.gen_range(0.0..=1.0);
            assert_eq!(ma.at(t).unwrap(), a.at(t).unwrap());
            assert_eq!(mb.at(t).unwrap(), b.at(t).unwrap());
        }
        for &t in a.division().iter().chain(b.division()) {
            assert_eq!(ma.at(t).unwrap(), a.at(t).unwrap());
            assert_eq!(mb.at(t).unwrap(), b.at(t).unwrap());
        }
    }
}

#[test]
fn layers_are_monotone_and_lipschitz() {
    let mut rng = seeded(12);
    for preset in [Preset::Exp, Preset::Cauchy, Preset::Uniform] {
        let op = discretize(Arc::new(preset.density()), 16, Some(3.0)).unwrap();
        check_layers(&op, &mut rng, 200, 1, 3.0, 3.0).unwrap();
    }
}

#[test]
fn refinement_decay() {
    let mut rng = seeded(13);
    let (m, r) = (1.0, 2.0);
    for _ in 0..5 {
        let q = random_step_signal(&mut rng, 1.0, r).unwrap();
        let u = random_param_signal(&mut rng, 1.0, 1, 2.0).unwrap();
        let errs: Vec<f64> = [4, 8, 16, 32, 64]
            .iter()
            .map(|&k| refine_error(exp_model(), &u, &q, k, 1024).unwrap())
            .collect();
        for (i, k) in [4.0, 8.0, 16.0, 32.0].iter().enumerate() {
            assert!(errs[i + 1] <= errs[i] + m * r / k);
        }
    }
}

proptest! {
    #[test]
    fn sup_seminorm_over_whole_interval(x in step_signal(30, 10.0)) {
        let max = x.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert_eq!(sup_seminorm(&x, 0.0, 1.0).unwrap(), max);
    }

    #[test]
    fn oscillation_bounded_by_seminorm(x in step_signal(30, 10.0), t0 in 0.0..=1.0f64, frac in 0.0..=1.0f64) {
        let h = t0 * frac;
        prop_assert!(oscillation(&x, t0, h).unwrap() <= 2.0 * sup_seminorm(&x, t0 - h, t0).unwrap());
    }

    #[test]
    fn play_locality(q in step_signal(40, 5.0), r in 0.01..3.0f64, t in 0.0..1.0f64, frac in 0.0..=1.0f64) {
        let xi = play_trajectory(&q, r).unwrap();
        let delta = (1.0 - t) * frac;
        let change = (xi.at(t + delta).unwrap() - xi.at(t).unwrap()).abs();
        let qt = q.at(t).unwrap();
        let local = q.map(|v| v - qt).unwrap();
        prop_assert!(change <= sup_seminorm(&local, t, t + delta).unwrap() + 1e-12);
    }

    #[test]
    fn csv_roundtrip_lossless(x in step_signal(20, 1e6), scale in prop::sample::select(vec![1e-300, 1e-9, 1.0, 1e12, 1e300])) {
        let x = x.map(|v| v * scale).unwrap();
        let mut buf = Vec::new();
        write_step_signal(&mut buf, &x).unwrap();
        prop_assert_eq!(read_step_signal(buf.as_slice()).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_lipschitz(
        q1 in step_signal(30, 2.0), q2 in step_signal(30, 2.0),
        u1 in step_signal(10, 2.0), u2 in step_signal(10, 2.0),
        k in 1usize..40,
    ) {
        let op = discretize(exp_model(), k, Some(2.0)).unwrap();
        let (p1, p2) = (forward_eval(&op, &scalar_param(&u1), &q1).unwrap(), forward_eval(&op, &scalar_param(&u2), &q2).unwrap());
        let (division, p1, p2) = merge_divisions(&p1, &p2).unwrap();
        let qgap = q1.zip_with(&q2, |a, b| (a - b).abs()).unwrap().resample(&division).unwrap().running_sup();
        let ugap = u1.zip_with(&u2, |a, b| (a - b).abs()).unwrap().resample(&division).unwrap();
        let mass: f64 = op.layer_mass().iter().sum();
        let kappa: f64 = op.layer_param_lipschitz().iter().sum();
        for (n, (a, b)) in p1.values().iter().zip(p2.values()).enumerate() {
            let bound = mass * qgap[n] + kappa * ugap.values()[n];
            prop_assert!((a - b).abs() <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn forward_output_on_merged_division(q in step_signal(30, 2.0), u in step_signal(10, 2.0)) {
        let op = discretize(exp_model(), 8, None).unwrap();
        let p = forward_eval(&op, &scalar_param(&u), &q).unwrap();
        let (division, _, _) = merge_divisions(&q, &u).unwrap();
        prop_assert_eq!(p.division(), &division[..]);
    }

    #[test]
    fn phi_has_unit_slope(history in vec(-2.0..2.0f64, 0..10), a in -3.0..3.0f64, b in -3.0..3.0f64, c in -2.0..2.0f64) {
        let op = discretize(Arc::new(Preset::Cauchy.density()), 24, Some(3.0)).unwrap();
        let (a, b) = (a.max(b), a.min(b));
        let phi = |last: f64| {
            let mut values = history.clone();
            values.extend([last, last]);
            let n = values.len();
            let division: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let q = StepSignal::new(division.clone(), values).unwrap();
            let u = ParamSignal::constant(division, vec![c]).unwrap();
            *forward_apply(&op, &u, &q).unwrap().values().last().unwrap()
        };
        prop_assert!(phi(a) - phi(b) >= (a - b) * (1.0 - 1e-12) - 1e-12);
    }

    #[test]
    fn roundtrip_within_certificate(q in step_signal(40, 2.0), u in step_signal(10, 3.0), k in 1usize..80) {
        let op = discretize(exp_model(), k, Some(2.0)).unwrap();
        let u = scalar_param(&u);
        let w = forward_apply(&op, &u, &q).unwrap();
        let back = invert(&op, &u, &w, TOL).unwrap();
        prop_assert!(back.residual_sup <= TOL);
        let err = back.q.zip_with(&q, |a, b| a - b).unwrap().sup_norm();
        let bound = op.rho() * (TOL + 4.0 * f64::EPSILON * (1.0 + w.sup_norm()));
        prop_assert!(err <= bound, "{} > {}", err, bound);
    }

    #[test]
    fn solution_magnitude(w in step_signal(40, 3.0), c in -2.0..2.0f64, k in 1usize..64) {
        let op = discretize(exp_model(), k, Some(3.0 * std::f64::consts::E)).unwrap();
        let u = ParamSignal::constant(w.division().to_vec(), vec![c]).unwrap();
        let q = invert(&op, &u, &w, TOL).unwrap().q;
        prop_assert!(q.sup_norm() <= op.rho() * (w.sup_norm() + TOL));
        prop_assert!(op.rho() <= op.mass().exp());
    }

    #[test]
    fn stability_bounds_hold(
        w in step_signal(30, 2.0), dw in step_signal(30, 0.5),
        u in step_signal(10, 2.0), du in step_signal(10, 0.5),
        k in 1usize..64,
    ) {
        let w_hat = w.zip_with(&dw, |a, b| a + b).unwrap();
        let u_hat = u.zip_with(&du, |a, b| a + b).unwrap();
        let op = discretize(exp_model(), k, Some(2.5 * std::f64::consts::E)).unwrap();
        let rep = stability_check(&op, &scalar_param(&u), &w, &scalar_param(&u_hat), &w_hat, TOL).unwrap();
        prop_assert!(rep.rho_slack() >= 0.0);
        prop_assert!(rep.em_slack() >= 0.0);
    }
}
