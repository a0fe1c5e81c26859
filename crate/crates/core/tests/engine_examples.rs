use gtpga::engine::{gt_pga_step, init_state, run_from, run_with_mixing};
use gtpga::linalg::{self, Matrix};
use gtpga::problem::{smoothness_constant, LocalObjectives};
use gtpga::rng;
use gtpga::{generate_dataset, run, DataSpec, Dataset, MixingMatrix, NoiseModel, Period, RunConfig, StepSize, TopologyKind};

fn dataset(n: usize, d: usize) -> Dataset {
    generate_dataset(&DataSpec { n, d, m: 40, seed: 21, ..DataSpec::default() }).unwrap()
}

#[test]
fn default_dataset_shapes() {
    let ds = generate_dataset(&DataSpec::default()).unwrap();
    assert_eq!(ds.agents(), 64);
    assert_eq!(ds.dim(), 20);
    for i in 0..64 {
        let a = ds.agent(i);
        assert_eq!((a.a().rows(), a.a().cols()), (500, 20));
        assert_eq!(a.b().len(), 500);
        assert_eq!(a.planted().len(), 20);
    }
    assert_eq!(ds, generate_dataset(&DataSpec::default()).unwrap());
}

#[test]
fn local_updates_between_averages_match_hand_loop() {
    let ds = dataset(6, 3);
    let alpha = 0.1 / smoothness_constant(&ds).unwrap();
    let noise = NoiseModel::Additive { sigma: 0.7 };
    let tau = 4u64;
    let seed = 12;
    let (n, d) = (6, 3);

    let w = MixingMatrix::identity(n);
    let mut st = init_state(&ds, None, &noise, seed).unwrap();
    for _ in 0..40 {
        gt_pga_step(&mut st, &w, Period::Every(tau), alpha, &ds, &noise, seed).unwrap();
    }

    let oracle = |i: usize, x: &[f64], k: u64| {
        let mut s = rng::gradient_stream(seed, i, k);
        ds.stochastic_gradient(i, x, &noise, &mut s).unwrap()
    };
    let mut x = vec![vec![0.0; d]; n];
    let mut last: Vec<Vec<f64>> = (0..n).map(|i| oracle(i, &x[i], 0)).collect();
    let mut g = last.clone();
    for k in 0..40u64 {
        let mut stepped: Vec<Vec<f64>> =
            (0..n).map(|i| (0..d).map(|c| x[i][c] - alpha * g[i][c]).collect()).collect();
        let mut carried = g.clone();
        if (k + 1) % tau == 0 {
            let mean = |v: &[Vec<f64>]| (0..d).map(|c| v.iter().map(|r| r[c]).sum::<f64>() / n as f64).collect::<Vec<_>>();
            let (xm, gm) = (mean(&stepped), mean(&g));
            stepped = vec![xm; n];
            carried = vec![gm; n];
        }
        for i in 0..n {
            let fresh = oracle(i, &stepped[i], k + 1);
            for c in 0..d {
                carried[i][c] += fresh[c] - last[i][c];
            }
            last[i] = fresh;
        }
        x = stepped;
        g = carried;
    }
    let diff = st.x.sub(&Matrix::from_rows(&x)).max_abs();
    assert!(diff <= 1e-12, "difference {diff}");
}

#[test]
fn never_averaging_equals_period_beyond_horizon() {
    let ds = dataset(8, 4);
    let cfg = RunConfig { n: 8, d: 4, iters: 50, tau: Period::Never, ..RunConfig::default() };
    let a = run(&cfg, &ds).unwrap();
    let b = run(&RunConfig { tau: Period::Every(60), ..cfg.clone() }, &ds).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn resumed_run_continues_the_same_trajectory() {
    let ds = dataset(8, 4);
    let cfg = RunConfig { n: 8, d: 4, iters: 30, tau: Period::Every(4), topology: TopologyKind::Star, ..RunConfig::default() };
    let whole = run(&cfg, &ds).unwrap();
    let half = run(&RunConfig { iters: 13, ..cfg.clone() }, &ds).unwrap();
    let rest = run_from(&cfg, &ds, Some(half.final_state)).unwrap();
    assert_eq!(rest.records.first().unwrap().k, 14);
    assert_eq!(rest.records.as_slice(), &whole.records[14..]);
    assert_eq!(rest.final_state, whole.final_state);
}

#[test]
fn auto_stepsize_uses_theorem_bound_for_finite_period() {
    let ds = dataset(8, 4);
    let l = smoothness_constant(&ds).unwrap();
    let cfg = RunConfig { n: 8, d: 4, iters: 1, tau: Period::Every(5), alpha: StepSize::Auto, ..RunConfig::default() };
    let t = run(&cfg, &ds).unwrap();
    assert_eq!(t.alpha, gtpga::theory::stepsize_bound(l, t.beta, 5).unwrap());
    let t = run(&RunConfig { tau: Period::Never, ..cfg }, &ds).unwrap();
    assert_eq!(t.alpha, 0.1 / (2.0 * l));
}

#[test]
fn explicit_mixing_with_quadratics() {
    let q = gtpga::problem::Quadratics::two_agent_example();
    let cfg = RunConfig { n: 2, d: 1, iters: 1, tau: Period::Every(1), noise: NoiseModel::exact(), ..RunConfig::default() };
    let t = run_with_mixing(&cfg, &q, &MixingMatrix::averaging(2), 0.1, None).unwrap();
    let st = &t.final_state;
    assert_eq!(st.x.as_slice(), &[0.1, 0.1]);
    assert!((st.g[(0, 0)] + 0.9).abs() < 1e-15 && (st.g[(1, 0)] + 0.9).abs() < 1e-15);
}

#[test]
fn minibatch_oracle_is_unbiased() {
    let ds = dataset(3, 4);
    let noise = NoiseModel::Minibatch { batch: 5 };
    let x = vec![0.2, -0.4, 1.0, 0.5];
    let exact = ds.local_gradient(1, &x);
    let draws = 100_000u64;
    let mut sum = vec![0.0; 4];
    let mut sq = 0.0;
    for k in 0..draws {
        let mut s = rng::gradient_stream(5, 1, k);
        let g = ds.stochastic_gradient(1, &x, &noise, &mut s).unwrap();
        let e: Vec<f64> = g.iter().zip(&exact).map(|(a, b)| a - b).collect();
        sq += linalg::norm_sq(&e);
        linalg::axpy(1.0, &e, &mut sum);
    }
    let nd = draws as f64;
    let sigma = (sq / nd).sqrt();
    let bias = linalg::norm(&sum) / nd;
    assert!(bias <= 3.0 * sigma / nd.sqrt() * (4f64).sqrt(), "bias {bias}, sigma {sigma}");
}

#[test]
fn full_row_set_gives_exact_gradient() {
    let ds = dataset(2, 3);
    let x = vec![0.3, 0.1, -0.2];
    let rows: Vec<usize> = (0..40).collect();
    let g = ds.minibatch_gradient(0, &x, &rows);
    let exact = ds.local_gradient(0, &x);
    for (a, b) in g.iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
    }
}
