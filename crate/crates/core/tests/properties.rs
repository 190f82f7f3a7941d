use num_complex::Complex64;
use proptest::prelude::*;

use stochnls::estimators::{ensemble_mean, fit_order, time_average};
use stochnls::geometry::{wedge_sum, TangentMap, TangentState};
use stochnls::harness::parse_config;
use stochnls::noise::{increments, PathSpec};
use stochnls::schemes::{solve_tridiag_plus_diag, step_midpoint};
use stochnls::{LatticeConfig, Level, NoiseOperators, State, StepperConfig};

fn unit(p: Vec<f64>, q: Vec<f64>) -> Option<State> {
    let s = State::new(p, q).ok()?;
    let n = s.norm();
    (n > 1e-3).then(|| {
        State::new(
            s.p.iter().map(|v| v / n).collect(),
            s.q.iter().map(|v| v / n).collect(),
        )
        .unwrap()
    })
}

fn state_strategy(m: usize) -> impl Strategy<Value = State> {
    (
        prop::collection::vec(-1.0..1.0f64, m),
        prop::collection::vec(-1.0..1.0f64, m),
    )
        .prop_filter_map("non-degenerate", |(p, q)| unit(p, q))
}

fn tangent_strategy(m: usize) -> impl Strategy<Value = TangentState> {
    (
        prop::collection::vec(-1.0..1.0f64, m),
        prop::collection::vec(-1.0..1.0f64, m),
    )
        .prop_map(|(dp, dq)| TangentState { dp, dq })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn midpoint_conserves_charge(
        u in state_strategy(9),
        db in prop::collection::vec(-0.3..0.3f64, 12),
        log_tau in -10i32..-3,
    ) {
        let cfg = LatticeConfig::focusing(9, 12).unwrap();
        let ops = NoiseOperators::new(&cfg);
        let sc = StepperConfig::new(2f64.powi(log_tau)).unwrap();
        let next = step_midpoint(&cfg, &ops, &sc, &u, &db).unwrap().state;
        prop_assert!((next.charge() - u.charge()).abs() <= 10.0 * sc.fp_tol);
    }

    #[test]
    fn tangent_map_is_linear_and_symplectic(
        u in state_strategy(6),
        xi in tangent_strategy(6),
        eta in tangent_strategy(6),
        db in prop::collection::vec(-0.1..0.1f64, 8),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let cfg = LatticeConfig::focusing(6, 8).unwrap();
        let ops = NoiseOperators::new(&cfg);
        let sc = StepperConfig::new(2f64.powi(-8)).unwrap().with_tolerance(1e-14, 200);
        let next = step_midpoint(&cfg, &ops, &sc, &u, &db).unwrap().state;
        let map = TangentMap::new(&cfg, &ops, &sc, &u, &next, &db).unwrap();
        let combo = TangentState {
            dp: xi.dp.iter().zip(&eta.dp).map(|(x, y)| a * x + b * y).collect(),
            dq: xi.dq.iter().zip(&eta.dq).map(|(x, y)| a * x + b * y).collect(),
        };
        let (mx, me, mc) = (map.apply(&xi).unwrap(), map.apply(&eta).unwrap(), map.apply(&combo).unwrap());
        for j in 0..6 {
            prop_assert!((mc.dp[j] - a * mx.dp[j] - b * me.dp[j]).abs() <= 1e-11);
            prop_assert!((mc.dq[j] - a * mx.dq[j] - b * me.dq[j]).abs() <= 1e-11);
        }
        prop_assert!((wedge_sum(&mx, &me) - wedge_sum(&xi, &eta)).abs() <= 1e-11);
    }

    #[test]
    fn tridiagonal_residual_is_small(
        n in 1usize..40,
        seed_re in prop::collection::vec(-1.0..1.0f64, 40),
        rhs_re in prop::collection::vec(-1.0..1.0f64, 40),
        rhs_im in prop::collection::vec(-1.0..1.0f64, 40),
        stiff in 0.0..500.0f64,
    ) {
        let diag: Vec<Complex64> = (0..n).map(|j| Complex64::new(1.0, stiff + seed_re[j])).collect();
        let off = Complex64::new(0.0, -0.5 * stiff);
        let rhs: Vec<Complex64> = (0..n).map(|j| Complex64::new(rhs_re[j], rhs_im[j])).collect();
        let x = solve_tridiag_plus_diag(&diag, off, &rhs).unwrap();
        let mut res = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..n {
            let mut ax = diag[j] * x[j];
            if j > 0 { ax += off * x[j - 1]; }
            if j + 1 < n { ax += off * x[j + 1]; }
            res += (ax - rhs[j]).norm_sqr();
            scale += rhs[j].norm_sqr();
        }
        prop_assert!(res.sqrt() <= 1e-13 * scale.sqrt().max(1e-300) * (1.0 + stiff));
    }

    #[test]
    fn coarse_increments_are_sums_of_fine(seed in any::<u64>(), idx in 0u64..1000, r in 0u32..4) {
        let spec = PathSpec { seed, path_index: idx, k: 5, tau: 0.01, refinement: r, n_steps: 6 };
        let coarse = increments(&spec, Level::Coarse).unwrap();
        let fine = increments(&spec, Level::Fine).unwrap();
        let per = 1usize << r;
        for (n, c) in coarse.iter().enumerate() {
            for k in 0..5 {
                let mut s = 0.0;
                for f in &fine[n * per..(n + 1) * per] {
                    s += f[k];
                }
                prop_assert_eq!(c[k], s);
            }
        }
    }

    #[test]
    fn order_fit_recovers_power_laws(p in -1.0..3.0f64, c in 1e-3..1e3f64) {
        let pts: Vec<(f64, f64)> = (3..8).map(|i| { let t = 2f64.powi(-i); (t, c * t.powf(p)) }).collect();
        prop_assert!((fit_order(&pts).unwrap().slope - p).abs() <= 1e-10);
    }

    #[test]
    fn averages_of_constants(v in -1e6..1e6f64, n in 2usize..300) {
        let xs = vec![v; n];
        prop_assert!((time_average(&xs).unwrap() - v).abs() <= 1e-9 * v.abs().max(1.0));
        let (m, se) = ensemble_mean(&xs).unwrap();
        prop_assert!((m - v).abs() <= 1e-9 * v.abs().max(1.0));
        prop_assert!(se <= 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn config_echo_roundtrips(
        m in 1usize..30,
        log_tau in 3i32..12,
        steps in 1u32..64,
        n_paths in 2usize..1000,
        seed in any::<u64>(),
        exp in 0usize..4,
    ) {
        let experiment = ["charge", "ergodic", "weak_order", "longtime_weak"][exp];
        let text = format!(
            "experiment = {experiment}\nM = {m}\ntau = 2^-{}, 2^-{}, 2^-{}\nT = {}\nn_paths = {n_paths}\nseed = {seed}\n",
            log_tau, log_tau + 1, log_tau + 2,
            steps as f64 * 2f64.powi(-log_tau),
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }
}
