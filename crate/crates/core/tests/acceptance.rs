//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers once its assertions hold.

use std::net::Ipv4Addr;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use rgmkl::eval::{self, CompareParams, Method};
use rgmkl::features::{self, FeatureVector, Label, Thresholds};
use rgmkl::flow::{classify_flows, partition_windows, FlowWindow, PacketRecord};
use rgmkl::ingest;
use rgmkl::kernels::{build_grams, combine, gradient_quadform, KernelConfig, KernelFamily};
use rgmkl::mkl::{self, MklConfig, Regularizer};
use rgmkl::svm::{decision, solve_dual};
use rgmkl::traffic::{gen_scenario, ScenarioKind, ScenarioSpec};

mod oracle;

fn random_window(rng: &mut ChaCha8Rng) -> FlowWindow {
    let addr_count = rng.random_range(1..=8usize);
    let pool: Vec<Ipv4Addr> = (0..addr_count)
        .map(|i| Ipv4Addr::new(10, 1, 0, i as u8 + 1))
        .collect();
    let ports = [80u16, 443, 53, 514, 20000, 20001];
    let packet_count = rng.random_range(0..=50usize);
    let mut packets: Vec<PacketRecord> = (0..packet_count)
        .map(|_| {
            PacketRecord::new(
                rng.random_range(0.0..1.0),
                pool[rng.random_range(0..pool.len())],
                pool[rng.random_range(0..pool.len())],
                ports[rng.random_range(0..ports.len())],
            )
        })
        .collect();
    packets.sort_by(|a, b| a.t.total_cmp(&b.t));
    FlowWindow { start: 0.0, duration: 1.0, packets }
}

fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= tol * scale
}

#[test]
fn criterion_01_feature_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let thresholds = Thresholds::default();
    // A second threshold set with every gate low, so gated terms open.
    let open_gates = Thresholds {
        theta3: 0.5,
        theta4: 0.5,
        theta5: 0.5,
        theta6: 0.5,
        theta7: 0.5,
        theta8: 0.5,
        theta9: 0.5,
        ..Thresholds::default()
    };
    for trial in 0..1000 {
        let window = random_window(&mut rng);
        let fast = classify_flows(&window);
        let slow = oracle::classify_literal(&window);
        assert_eq!(fast, slow, "trial {trial}: class families diverge");

        for th in [&thresholds, &open_gates] {
            let pairs = [
                (features::acd(&fast, th), oracle::acd(&window, th), "acd"),
                (features::ffv(&fast, th), oracle::ffv(&window, th), "ffv"),
                (features::ibf(&fast, th), oracle::ibf(&window, th), "ibf"),
                (features::mff(&fast, th), oracle::mff(&window, th), "mff"),
                (features::hiad(&fast, th), oracle::hiad(&window, th), "hiad"),
            ];
            for (fast_v, slow_v, name) in pairs {
                assert!(
                    relative_close(fast_v, slow_v, 1e-9),
                    "trial {trial}: {name} {fast_v} vs oracle {slow_v}"
                );
            }
            let sfv_fast = features::sfv(features::hiad(&fast, th), features::ffv(&fast, th));
            let sfv_slow = features::sfv(oracle::hiad(&window, th), oracle::ffv(&window, th));
            assert!(relative_close(sfv_fast, sfv_slow, 1e-9));
            let cdf_fast = features::cdf(
                features::acd(&fast, th),
                features::mff(&fast, th),
                features::ibf(&fast, th),
            );
            let cdf_slow = features::cdf(
                oracle::acd(&window, th),
                oracle::mff(&window, th),
                oracle::ibf(&window, th),
            );
            assert!(relative_close(cdf_fast, cdf_slow, 1e-9));
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("[PASS] criterion 1: 1000 random windows match the literal oracle ({elapsed:?})");
}

#[test]
fn criterion_02_svm_dual_matches_qp_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5111);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let n = rng.random_range(2..=8usize);
        let x: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let mut y: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        y[0] = 1.0;
        if n > 1 {
            y[1] = -1.0;
        }
        let gamma = rng.random_range(0.2..2.0);
        let k = Array2::from_shape_fn((n, n), |(i, j)| {
            let dx = x[i][0] - x[j][0];
            let dy = x[i][1] - x[j][1];
            (-gamma * (dx * dx + dy * dy)).exp()
        });
        let c = [0.5, 10.0, 100.0][trial % 3];
        let sol = solve_dual(k.view(), &y, c, 1e-9).expect("SMO converges");

        // DualSolution invariants.
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        assert!(balance.abs() <= 1e-8, "trial {trial}: Σ α y = {balance}");
        assert!(sol.alpha.iter().all(|&a| (0.0..=c + 1e-10).contains(&a)));
        for (i, &a) in sol.alpha.iter().enumerate() {
            assert_eq!(a > 0.0, sol.support_indices.contains(&i));
        }

        let oracle_obj = oracle::qp_dual_objective(&k, &y, c);
        let gap = (sol.objective - oracle_obj).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 1e-6,
            "trial {trial} (n={n}, C={c}): SMO {} vs oracle {oracle_obj}",
            sol.objective
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 2: 200 duals match the projected-gradient oracle, worst gap {worst:.2e} ({elapsed:?})"
    );
}

#[test]
fn criterion_03_mkl_gradient_matches_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d9d);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let family = if trial % 2 == 0 { KernelFamily::Sum } else { KernelFamily::Product };
        let n = 14;
        let mut x = Array2::<f64>::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let attack = i % 2 == 1;
            let base = if attack { 2.0 } else { -1.0 };
            x[[i, 0]] = base + rng.random_range(-0.8..0.8);
            x[[i, 1]] = -0.5 * base + rng.random_range(-0.8..0.8);
            y.push(if attack { -1.0 } else { 1.0 });
        }
        let cfg = KernelConfig {
            family,
            bandwidths: vec![0.5, 2.0],
            feature_dim: 2,
            per_feature: true,
            single_feature: None,
        };
        let grams = build_grams(x.view(), &cfg).unwrap();
        let c = 10.0;
        let tol = 1e-10;
        let sigma = 0.9;
        let d: Vec<f64> = (0..cfg.term_count())
            .map(|_| rng.random_range(0.3..1.2))
            .collect();

        let j_at = |dv: &[f64]| -> f64 {
            let k = combine(dv, &grams).unwrap();
            let sol = solve_dual(k.view(), &y, c, tol).unwrap();
            0.5 * sigma * dv.iter().map(|v| v * v).sum::<f64>() + sol.objective
        };
        let k0 = combine(&d, &grams).unwrap();
        let sol0 = solve_dual(k0.view(), &y, c, tol).unwrap();
        let beta: Vec<f64> = sol0.alpha.iter().zip(&y).map(|(a, yi)| a * yi).collect();
        let quad = gradient_quadform(&d, &grams, &beta).unwrap();

        let eps = 1e-4;
        for m in 0..d.len() {
            let analytic = sigma * d[m] - 0.5 * quad[m];
            let mut dp = d.clone();
            let mut dm = d.clone();
            dp[m] += eps;
            dm[m] -= eps;
            let fd = (j_at(&dp) - j_at(&dm)) / (2.0 * eps);
            let rel = (analytic - fd).abs() / fd.abs().max(1e-8);
            worst = worst.max(rel);
            assert!(
                rel < 1e-3,
                "trial {trial} ({family:?}) term {m}: analytic {analytic} vs fd {fd}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 3: envelope gradient matches finite differences, worst rel err {worst:.2e} ({elapsed:?})"
    );
}

#[test]
fn criterion_04_simplex_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4444);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=24usize);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let fast = mkl::project_simplex(&v);
        let slow = oracle::project_simplex_bisect(&v);
        for (a, b) in fast.iter().zip(&slow) {
            let gap = (a - b).abs();
            worst = worst.max(gap);
            assert!(gap <= 1e-12, "{v:?}: {fast:?} vs {slow:?}");
        }
        let twice = mkl::project_simplex(&fast);
        assert_eq!(fast, twice, "projection not idempotent for {v:?}");
    }
    println!("[PASS] criterion 4: 10000 projections match the bisection oracle, worst gap {worst:.2e}");
}

#[test]
fn criterion_05_combined_kernels_stay_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5555);
    let mut worst = f64::INFINITY;
    for family in [KernelFamily::Sum, KernelFamily::Product] {
        for _ in 0..100 {
            let n = rng.random_range(4..=24usize);
            let samples =
                Array2::from_shape_fn((n, 2), |_| rng.random_range(-3.0..3.0));
            let cfg = KernelConfig::default_grid(family, 2);
            let grams = build_grams(samples.view(), &cfg).unwrap();
            let d: Vec<f64> = (0..cfg.term_count())
                .map(|_| {
                    if rng.random_bool(0.2) {
                        0.0
                    } else {
                        rng.random_range(0.0..2.0)
                    }
                })
                .collect();
            let k = combine(&d, &grams).unwrap();
            let nm = nalgebra::DMatrix::from_fn(n, n, |i, j| k[[i, j]]);
            let min_eig = nm
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            worst = worst.min(min_eig);
            assert!(
                min_eig >= -1e-8,
                "{family:?} with d = {d:?}: min eigenvalue {min_eig}"
            );
        }
    }
    println!("[PASS] criterion 5: 200 combined Grams PSD, smallest eigenvalue seen {worst:.2e}");
}

#[test]
fn criterion_06_scenario_counts() {
    for (kind, normal, attack) in [
        (ScenarioKind::Early, 211usize, 280usize),
        (ScenarioKind::Impulse, 384, 107),
        (ScenarioKind::Intermittent, 80, 411),
    ] {
        for seed in 1..=10u64 {
            let spec = ScenarioSpec::preset(kind, seed);
            let (packets, labels) = gen_scenario(&spec).unwrap();
            let windows = partition_windows(&packets, 1.0);
            assert_eq!(windows.len(), 491, "{} seed {seed}: window count", kind.name());
            assert_eq!(labels.len(), 491, "{} seed {seed}: label count", kind.name());
            let n = labels.iter().filter(|&&l| l == Label::Normal).count();
            let a = labels.iter().filter(|&&l| l == Label::Attack).count();
            assert_eq!(
                (n, a),
                (normal, attack),
                "{} seed {seed}: label split",
                kind.name()
            );
        }
    }
    println!("[PASS] criterion 6: presets emit 491 windows with 211/280, 384/107, 80/411 labels");
}

fn scenario_features(kind: ScenarioKind, seed: u64) -> Vec<FeatureVector> {
    let spec = ScenarioSpec::preset(kind, seed);
    let (packets, labels) = gen_scenario(&spec).unwrap();
    let windows = partition_windows(&packets, 1.0);
    let mut series = features::extract_series(&windows, &Thresholds::default());
    features::attach_labels(&mut series, &labels).unwrap();
    series
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[test]
fn criterion_07_method_ordering() {
    let started = Instant::now();
    let methods = [Method::SimpleMkl, Method::SingleKernelSvm, Method::RGmkl];
    for kind in [ScenarioKind::Early, ScenarioKind::Impulse, ScenarioKind::Intermittent] {
        let mut drs: Vec<Vec<f64>> = vec![Vec::new(); 3];
        let mut ers: Vec<Vec<f64>> = vec![Vec::new(); 3];
        for seed in 1..=10u64 {
            let series = scenario_features(kind, seed);
            let (train_set, test_set) = eval::split(&series, 0.7, seed).unwrap();
            assert_eq!(train_set.len(), 344);
            assert_eq!(test_set.len(), 147);
            let params = CompareParams { seed, ..CompareParams::default() };
            let report = eval::compare(&methods, &train_set, &test_set, &params).unwrap();
            for (slot, method) in [Method::RGmkl, Method::SimpleMkl, Method::SingleKernelSvm]
                .iter()
                .enumerate()
            {
                let row = report.result(*method).unwrap();
                drs[slot].push(row.dr);
                ers[slot].push(row.er);
            }
        }
        let dr_gmkl = median(&mut drs[0]);
        let dr_smkl = median(&mut drs[1]);
        let dr_svm = median(&mut drs[2]);
        let er_gmkl = median(&mut ers[0]);
        let er_smkl = median(&mut ers[1]);
        let er_svm = median(&mut ers[2]);
        println!(
            "  {}: median DR r-gmkl {dr_gmkl:.4} / smkl {dr_smkl:.4} / svm {dr_svm:.4}; \
             median ER {er_gmkl:.4} / {er_smkl:.4} / {er_svm:.4}",
            kind.name()
        );
        assert!(
            dr_gmkl >= dr_smkl && dr_smkl >= dr_svm,
            "{}: DR ordering violated: {dr_gmkl} / {dr_smkl} / {dr_svm}",
            kind.name()
        );
        assert!(
            er_gmkl <= er_smkl && er_smkl <= er_svm,
            "{}: ER ordering violated: {er_gmkl} / {er_smkl} / {er_svm}",
            kind.name()
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!("[PASS] criterion 7: median DR/ER orderings hold on all three scenarios ({elapsed:?})");
}

#[test]
fn criterion_08_r_selection_quality() {
    let started = Instant::now();
    let mut wins = 0usize;
    let seeds = 1..=10u64;
    let total = 10usize;
    for seed in seeds {
        let series = scenario_features(ScenarioKind::Early, seed);
        let (train_set, test_set) = eval::split(&series, 0.7, seed).unwrap();
        let candidates = MklConfig::candidate_grid(2);
        let (_, report) = mkl::select_model(&train_set, &test_set, &candidates).unwrap();
        let mut accuracies: Vec<f64> = report
            .rows
            .iter()
            .filter_map(|row| row.accuracy)
            .collect();
        assert!(accuracies.len() >= 2, "seed {seed}: too few trained candidates");
        let chosen_acc = report.rows[report.chosen]
            .accuracy
            .expect("chosen candidate evaluated");
        let med = median(&mut accuracies);
        if chosen_acc >= med {
            wins += 1;
        }
    }
    assert!(
        wins * 10 >= 7 * total,
        "argmin-R at or above median accuracy in only {wins}/{total} seeds"
    );
    let elapsed = started.elapsed();
    println!(
        "[PASS] criterion 8: argmin-R candidate at or above median accuracy in {wins}/{total} seeds ({elapsed:?})"
    );
}

#[test]
fn criterion_09_separability() {
    for kind in [ScenarioKind::Early, ScenarioKind::Impulse, ScenarioKind::Intermittent] {
        let series = scenario_features(kind, 1);
        for (name, pick) in [
            ("sfv", (|fv: &FeatureVector| fv.sfv) as fn(&FeatureVector) -> f64),
            ("cdf", |fv: &FeatureVector| fv.cdf),
        ] {
            let attack: Vec<f64> = series
                .iter()
                .filter(|f| f.label == Some(Label::Attack))
                .map(pick)
                .collect();
            let normal: Vec<f64> = series
                .iter()
                .filter(|f| f.label == Some(Label::Normal))
                .map(pick)
                .collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (ma, mn) = (mean(&attack), mean(&normal));
            let var = |v: &[f64], mu: f64| {
                v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() - 1) as f64
            };
            let pooled = (((attack.len() - 1) as f64 * var(&attack, ma)
                + (normal.len() - 1) as f64 * var(&normal, mn))
                / (attack.len() + normal.len() - 2) as f64)
                .sqrt();
            assert!(
                ma - mn >= 2.0 * pooled,
                "{} {name}: attack mean {ma:.2}, normal mean {mn:.2}, pooled std {pooled:.2}",
                kind.name()
            );
        }
    }
    println!("[PASS] criterion 9: attack means exceed normal means by ≥ 2 pooled std for SFV and CDF");
}

#[test]
fn criterion_10_metric_formulas() {
    use rgmkl::eval::{accuracy, confusion, dr, er, ConfusionCounts};

    let truth: Vec<Label> = [1, 1, 1, -1, -1, -1, -1]
        .iter()
        .map(|&v| Label::from_i8(v).unwrap())
        .collect();
    let pred: Vec<Label> = [1, -1, 1, -1, -1, 1, -1]
        .iter()
        .map(|&v| Label::from_i8(v).unwrap())
        .collect();
    let c = confusion(&pred, &truth).unwrap();
    assert_eq!(c, ConfusionCounts { tp: 2, fp: 1, tn: 3, fn_count: 1 });
    assert_eq!(dr(&c).unwrap(), 3.0 / 4.0);
    assert_eq!(er(&c).unwrap(), 2.0 / 7.0);
    assert_eq!(accuracy(&c).unwrap(), 5.0 / 7.0);

    let fixture = ConfusionCounts { tp: 0, fp: 0, tn: 88, fn_count: 12 };
    assert_eq!(dr(&fixture).unwrap(), 0.88);

    // Counts consistent with the published early-attack operating point on
    // a 147-sample test split.
    let early = ConfusionCounts { tp: 63, fp: 0, tn: 74, fn_count: 10 };
    assert_eq!(early.total(), 147);
    assert!((dr(&early).unwrap() - 0.881).abs() < 5e-4);
    assert!((er(&early).unwrap() - 0.068).abs() < 5e-4);

    println!("[PASS] criterion 10: DR/ER formulas reproduce hand-tabulated fixtures exactly");
}

#[test]
fn criterion_11_ingestion_round_trips() {
    // CSV write → read is lossless.
    let mut rng = ChaCha8Rng::seed_from_u64(0x1111);
    let packets: Vec<PacketRecord> = (0..500)
        .map(|_| {
            PacketRecord::new(
                rng.random_range(0.0..116.0),
                Ipv4Addr::from(rng.random::<u32>()),
                Ipv4Addr::from(rng.random::<u32>()),
                rng.random::<u16>(),
            )
        })
        .collect();
    let mut sorted = packets.clone();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut buf = Vec::new();
    ingest::write_packets_csv(&mut buf, &packets).unwrap();
    let trace = ingest::read_packets_csv(buf.as_slice()).unwrap();
    assert_eq!(trace.records, sorted);
    assert!(trace.skipped_rows.is_empty());

    // Hand-built pcap in both byte orders parses to identical records.
    let frames = [
        oracle::udp_frame([10, 0, 0, 1], [10, 0, 0, 2], 5353, 53),
        oracle::tcp_frame([192, 168, 1, 9], [10, 0, 0, 7], 43122, 443),
        oracle::udp_frame([172, 16, 2, 3], [192, 168, 1, 1], 9999, 1234),
    ];
    let mut native = oracle::pcap_global_header(false);
    let mut swapped = oracle::pcap_global_header(true);
    for (i, frame) in frames.iter().enumerate() {
        native.extend(oracle::pcap_record(false, 100 + i as u32, 250_000 * i as u32, frame));
        swapped.extend(oracle::pcap_record(true, 100 + i as u32, 250_000 * i as u32, frame));
    }
    let (a, src_a) = ingest::read_pcap(native.as_slice(), std::path::Path::new("native.pcap")).unwrap();
    let (b, src_b) = ingest::read_pcap(swapped.as_slice(), std::path::Path::new("swapped.pcap")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
    assert_eq!(a[0].t, 0.0);
    assert_eq!(src_a.skip.total(), 0);
    assert_eq!(src_b.skip.total(), 0);

    // Skip-counter conservation over a mixed-content capture.
    let mut mixed = oracle::pcap_global_header(false);
    let mut total = 0u64;
    mixed.extend(oracle::pcap_record(false, 1, 0, &frames[0]));
    total += 1;
    mixed.extend(oracle::pcap_record(false, 1, 10, &oracle::arp_frame()));
    total += 1;
    let mut icmp = oracle::udp_frame([1, 1, 1, 1], [2, 2, 2, 2], 0, 0);
    icmp[23] = 1; // protocol = ICMP
    mixed.extend(oracle::pcap_record(false, 1, 20, &icmp));
    total += 1;
    mixed.extend(oracle::pcap_record(false, 1, 30, &[0u8; 10]));
    total += 1;
    let (records, source) = ingest::read_pcap(mixed.as_slice(), std::path::Path::new("mixed.pcap")).unwrap();
    assert_eq!(records.len() as u64 + source.skip.total(), total);
    assert_eq!(source.skip.non_ipv4, 1);
    assert_eq!(source.skip.non_transport, 1);
    assert_eq!(source.skip.malformed, 1);

    println!("[PASS] criterion 11: CSV and pcap round-trips lossless, skip counters conserved");
}

/// The decision function at a training point with the model's own kernel
/// row equals the stored decision.
#[test]
fn decision_consistency_spot_check() {
    let series = scenario_features(ScenarioKind::Early, 2);
    let (train_set, _) = eval::split(&series, 0.7, 2).unwrap();
    let cfg = MklConfig::new(
        KernelConfig::default_grid(KernelFamily::Product, 2),
        Regularizer::L1,
    );
    let model = mkl::train(&train_set, &cfg).unwrap();
    // Free support vectors recover their own labels through predict().
    let c = model.config.c;
    let mut checked = 0;
    for (i, fv) in train_set.iter().enumerate() {
        let a = model.dual.alpha[i];
        if a > 1e-6 * c && a < c * (1.0 - 1e-6) {
            assert_eq!(mkl::predict(&model, fv).unwrap(), fv.label.unwrap());
            checked += 1;
        }
    }
    assert!(checked > 0, "no free support vectors to check");
    // combine_row at a training point equals the Gram column.
    let grams = build_grams(model.train_x.view(), &model.config.kernel).unwrap();
    let k = combine(&model.d, &grams).unwrap();
    let q = model.train_x.row(0).to_owned();
    let row = rgmkl::kernels::combine_row(
        &model.d,
        &model.config.kernel,
        model.train_x.view(),
        q.view(),
    )
    .unwrap();
    for j in 0..row.len() {
        assert!((row[j] - k[[j, 0]]).abs() <= 1e-12);
    }
    let f = decision(&model.dual, &model.train_y, &row).unwrap();
    assert!(f.is_finite());
    let _ = Array1::<f64>::zeros(1);
}
