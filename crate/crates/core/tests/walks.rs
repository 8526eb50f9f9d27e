use stable_exit::closedform::{ball_phi, StableParams};
use stable_exit::geom::{ConeDomain, SupportDomain};
use stable_exit::wos::{estimate_phi, WalkConfig, WalkEstimate};

fn run(dom: &SupportDomain, alpha: f64, x: [f64; 2], n: u64, seed: u64) -> WalkEstimate {
    let cfg = WalkConfig {
        n_walks: n,
        seed,
        ..WalkConfig::default()
    };
    estimate_phi(dom, &StableParams::new(alpha, 2).unwrap(), &x, &cfg).unwrap()
}

#[test]
fn disk_estimates_match_closed_form() {
    let dom = SupportDomain::disk(1.0).unwrap();
    for (alpha, x) in [(0.5, [0.3, 0.1]), (1.0, [0.6, 0.0]), (1.5, [-0.2, 0.5])] {
        let e = run(&dom, alpha, x, 40_000, 7);
        let exact = ball_phi(&StableParams::new(alpha, 2).unwrap(), 1.0, &x).unwrap();
        assert!(
            (e.mean - exact).abs() < 4.0 * e.std_error,
            "alpha {alpha}: {e:?} vs {exact}"
        );
        assert_eq!(e.truncated, 0);
    }
}

#[test]
fn brownian_ellipse_matches_quadratic() {
    let (a, b) = (0.8, 0.5);
    let dom = SupportDomain::ellipse(a, b).unwrap();
    let x = [0.1, 0.1];
    let exact =
        (1.0 - x[0] * x[0] / (a * a) - x[1] * x[1] / (b * b)) / (2.0 / (a * a) + 2.0 / (b * b));
    assert!((exact - 0.084888).abs() < 1e-6);
    let e = run(&dom, 2.0, x, 20_000, 3);
    assert!(
        (e.mean - exact).abs() < 4.0 * e.std_error + 1e-5,
        "{e:?} vs {exact}"
    );
}

#[test]
fn scaling_law() {
    let unit = SupportDomain::disk(1.0).unwrap();
    let big = SupportDomain::disk(2.0).unwrap();
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        let e1 = run(&unit, alpha, [0.3, 0.2], 20_000, 1);
        let e2 = run(&big, alpha, [0.6, 0.4], 20_000, 2);
        let s = 2f64.powf(alpha);
        let sigma = (e2.std_error.powi(2) + (s * e1.std_error).powi(2)).sqrt();
        assert!(
            (e2.mean - s * e1.mean).abs() < 3.0 * sigma + 1e-12,
            "alpha {alpha}"
        );
    }
}

#[test]
fn domain_monotonicity() {
    let ellipse = SupportDomain::ellipse(0.8, 0.5).unwrap();
    let p = StableParams::new(1.0, 2).unwrap();
    let x = [0.2, 0.1];
    let e = run(&ellipse, 1.0, x, 40_000, 9);
    let inner = ball_phi(&p, 0.5, &x).unwrap();
    let outer = ball_phi(&p, 0.8, &x).unwrap();
    assert!(e.mean > inner - 3.0 * e.std_error && e.mean < outer + 3.0 * e.std_error);
    assert!(
        e.mean > inner && e.mean < outer,
        "{} not in ({inner}, {outer})",
        e.mean
    );
}

#[test]
fn truncation_is_reported_and_biases_low() {
    let dom = SupportDomain::disk(1.0).unwrap();
    let cfg = WalkConfig {
        n_walks: 5000,
        max_steps: 2,
        ..WalkConfig::default()
    };
    let p = StableParams::new(1.5, 2).unwrap();
    let e = estimate_phi(&dom, &p, &[0.0, 0.0], &cfg).unwrap();
    assert!(e.truncated > 0 && e.biased_low());
    let exact = ball_phi(&p, 1.0, &[0.0, 0.0]).unwrap();
    assert!(e.mean < exact);
}

#[test]
fn identical_across_thread_counts() {
    let dom = SupportDomain::ellipse(0.8, 0.5).unwrap();
    let cfg = WalkConfig {
        n_walks: 5000,
        seed: 42,
        ..WalkConfig::default()
    };
    let p = StableParams::new(1.2, 2).unwrap();
    let at = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_phi(&dom, &p, &[0.1, -0.2], &cfg).unwrap())
    };
    let a = at(1);
    let b = at(4);
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}

#[test]
fn cone_axis_profile_increases_from_apex() {
    let cone = ConeDomain::new(0.3, 2).unwrap();
    let p = StableParams::new(1.0, 2).unwrap();
    let cfg = WalkConfig {
        n_walks: 20_000,
        ..WalkConfig::default()
    };
    let near = estimate_phi(&cone, &p, &[0.1, 0.0], &cfg).unwrap();
    let far = estimate_phi(&cone, &p, &[0.4, 0.0], &cfg).unwrap();
    assert!(far.mean - near.mean > 5.0 * near.std_error.hypot(far.std_error));
}
