use kimura::integrator::{convergence_study, temporal_convergence, Problem};
use kimura::InitialCondition;

fn smooth_problem(cells: usize) -> Problem {
    Problem::new(1e-2, cells, 1e-2, InitialCondition::Gaussian { x0: 0.4, sigma: 0.1 }).unwrap()
}

#[test]
fn both_axes_are_second_order() {
    let study = convergence_study(&smooth_problem(200), &[0.04, 0.02, 0.01], 0.00125, &[25, 50, 100], 400, 0.4).unwrap();
    for est in [&study.temporal, &study.spatial] {
        assert!((1.8..=2.2).contains(&est.fitted_order), "{est:?}");
        // halving the step cuts the error about four times
        for w in est.errors.windows(2) {
            assert!((3.3..=4.8).contains(&(w[0] / w[1])), "{est:?}");
        }
    }
}

#[test]
fn order_does_not_depend_on_probe_time() {
    let problem = smooth_problem(200);
    for t in [0.2, 1.0] {
        let est = temporal_convergence(&problem, &[0.04, 0.02, 0.01], 0.00125, t).unwrap();
        assert!((1.8..=2.2).contains(&est.fitted_order), "t = {t}: {est:?}");
    }
}

#[test]
fn probe_time_must_align_with_steps() {
    assert!(temporal_convergence(&smooth_problem(50), &[0.04, 0.02, 0.01], 0.00125, 0.05).is_err());
}
