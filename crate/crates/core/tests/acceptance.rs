//! One PASS/FAIL line per acceptance criterion. Runs the full desk-scale
//! training experiments, so expect tens of minutes on a single core.
//!
//! Criteria listed in `EXPECTED_RED` are reported but do not fail the
//! binary; every other FAIL does.

mod common;

use std::time::Instant;

use deepsith::experiment::{presets, run_experiment, run_seed, ExperimentConfig, RunRecord, RUNNING_WINDOW};
use deepsith::filterbank::{
    build_kernels, coefficient_of_variation, geometric_taus, lag_moments, select_k, FilterSpec, DEFAULT_K_MAX,
};

/// k selection disagrees with the printed Mackey-Glass rows; sMNIST needs
/// data and hours of CPU.
const EXPECTED_RED: [u32; 2] = [3, 9];

/// (tau_max, N, printed k) for every layer of every architecture.
const PUBLISHED_KS: [(f64, usize, u32); 14] = [
    (30.0, 20, 125),
    (150.0, 20, 61),
    (750.0, 20, 35),
    (20.0, 13, 75),
    (120.0, 13, 27),
    (720.0, 13, 14),
    (4320.0, 13, 8),
    (25.0, 8, 15),
    (50.0, 8, 8),
    (150.0, 8, 4),
    (25.0, 10, 35),
    (100.0, 10, 16),
    (400.0, 10, 9),
    (1200.0, 10, 6),
];

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn criterion(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let o = Outcome {
        id,
        name,
        pass,
        detail: format!("{detail} [{:.0}s]", start.elapsed().as_secs_f64()),
    };
    println!(
        "{} {:>2} {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail
    );
    o
}

fn parameter_counts() -> (bool, String) {
    let want = [
        ("smnist", 146_350),
        ("adding", 25_151),
        ("mackey-glass", 10_301),
        ("hateful8", 37_808),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, expected) in want {
        let got = presets::by_name(name).unwrap().net_config().unwrap().parameter_count();
        pass &= got == expected;
        parts.push(format!("{name} {got}/{expected}"));
    }
    (pass, parts.join(", "))
}

fn filter_bank_suite() -> (bool, String) {
    let mut problems = Vec::new();
    let mut worst_spread: f64 = 0.0;
    for (tau_max, n, k) in PUBLISHED_KS {
        let grid = geometric_taus(1.0, tau_max, n).unwrap();
        let step = tau_max.ln() / (n - 1) as f64;
        if grid
            .values()
            .windows(2)
            .any(|w| ((w[1] / w[0]).ln() - step).abs() > 1e-9)
        {
            problems.push(format!("({tau_max},{n}) grid not log-even"));
        }
        let bank = build_kernels(FilterSpec::new(grid.clone(), k)).unwrap();
        let mut cvs = Vec::new();
        for (row, tau) in bank.kernels().iter().zip(grid.values()) {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                problems.push(format!("({tau_max},{n}) row {tau} sum"));
            }
            let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            if (peak as f64 - tau).abs() > 1.0 {
                problems.push(format!("({tau_max},{n}) peak {peak} vs {tau}"));
            }
            if lag_moments(row).1 >= 2.0 {
                cvs.push(coefficient_of_variation(row));
            }
        }
        if cvs.len() >= 2 {
            let lo = cvs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = cvs.iter().copied().fold(0.0, f64::max);
            worst_spread = worst_spread.max(hi / lo - 1.0);
        }
    }
    if worst_spread >= 0.05 {
        problems.push(format!("cv spread {worst_spread:.4}"));
    }
    let g = geometric_taus(1.0, 30.0, 20).unwrap();
    if select_k(&g, DEFAULT_K_MAX).unwrap() != select_k(&g, DEFAULT_K_MAX).unwrap() {
        problems.push("select_k not deterministic".into());
    }
    let detail = format!("14 benchmark banks, worst CV spread {:.2}%", 100.0 * worst_spread);
    if problems.is_empty() {
        (true, detail)
    } else {
        (false, format!("{detail}; {}", problems.join("; ")))
    }
}

fn k_selection() -> (bool, String) {
    let mut misses = Vec::new();
    let mut hits = 0;
    for (tau_max, n, printed) in PUBLISHED_KS {
        let k = select_k(&geometric_taus(1.0, tau_max, n).unwrap(), DEFAULT_K_MAX)
            .unwrap()
            .chosen_k;
        if (f64::from(k) - f64::from(printed)).abs() <= 0.2 * f64::from(printed) {
            hits += 1;
        } else {
            misses.push(format!("({tau_max},{n}) got {k} want {printed}"));
        }
    }
    let detail = format!("{hits}/14 within 20%");
    if misses.is_empty() {
        (true, detail)
    } else {
        (false, format!("{detail}; misses: {}", misses.join(", ")))
    }
}

fn gradients() -> (bool, String) {
    let (mut checked, mut skipped, mut failed) = (0, 0, 0);
    for seed in 0..100 {
        let r = common::check_gradients(seed);
        checked += r.checked;
        skipped += r.skipped_kinks;
        failed += usize::from(!r.failures.is_empty());
    }
    (
        failed == 0,
        format!("100 nets, {failed} failing, {checked} entries checked, {skipped} on ReLU kinks skipped"),
    )
}

fn laplace() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for k in [2, 4, 8] {
        for seed in 0..5 {
            worst = worst.max(common::laplace_gap(k, 200, 6, seed));
        }
    }
    (
        worst < 0.1,
        format!("k in {{2,4,8}}, worst relative gap {:.2}%", 100.0 * worst),
    )
}

fn run_all(config: ExperimentConfig) -> Vec<RunRecord> {
    let records = run_experiment(&config).unwrap();
    for r in &records {
        eprintln!(
            "  {} seed {}: {:?}, {:.0}s",
            config.name, r.seed, r.status, r.wall_clock_secs
        );
    }
    records
}

fn adding() -> (bool, String) {
    let config = presets::adding(100)
        .with_overrides(&["training.stop_at=0.05".into()])
        .unwrap();
    let config = ExperimentConfig {
        seeds: SEEDS.to_vec(),
        ..config
    };
    // Only points whose window is full count.
    let full_from = RUNNING_WINDOW.div_ceil(config.training.batch_size) as u64;
    let records = run_all(config);
    let first_below = |r: &RunRecord, level: f64| {
        r.series("running_mse")
            .into_iter()
            .find(|&(step, v)| step >= full_from && v < level)
            .map(|p| p.0)
    };
    let mut good = 0;
    let mut parts = Vec::new();
    for r in &records {
        let base = first_below(r, 1.0 / 6.0);
        let solved = first_below(r, 0.05);
        if base.is_some_and(|s| s <= 500) && solved.is_some_and(|s| s <= 2500) {
            good += 1;
        }
        parts.push(format!("seed {} <0.167@{:?} <0.05@{:?}", r.seed, base, solved));
    }
    (good >= 4, format!("{good}/5 seeds; {}", parts.join(", ")))
}

fn hateful8() -> (bool, String) {
    let config = presets::hateful8(100)
        .with_overrides(&["training.stop_at=1.0".into()])
        .unwrap();
    let config = ExperimentConfig {
        seeds: SEEDS.to_vec(),
        ..config
    };
    let horizon = config.training.horizon;
    let records = run_all(config);
    let mut good = 0;
    let mut parts = Vec::new();
    for r in &records {
        let epoch = r.first_step_where("test_accuracy", |v| v >= 1.0);
        good += usize::from(epoch.is_some_and(|e| e <= 60));
        parts.push(format!("seed {} 100%@{:?}", r.seed, epoch));
    }
    (
        good >= 4,
        format!(
            "noise_len 100, {horizon} epochs max, {good}/5 seeds; {}",
            parts.join(", ")
        ),
    )
}

fn mackey_glass() -> (bool, String) {
    let final_nrmse = |tau, distance| -> Vec<f64> {
        let config = ExperimentConfig {
            seeds: SEEDS.to_vec(),
            ..presets::mackey_glass(tau, distance)
        };
        run_all(config)
            .iter()
            .map(|r| r.last("test_nrmse").unwrap_or(f64::NAN))
            .collect()
    };
    let easy = final_nrmse(17, 15);
    let hard = final_nrmse(85, 75);
    let all_below = easy.iter().all(|&v| v < 0.5);
    let ordered = easy.iter().zip(&hard).all(|(e, h)| h >= e);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    (
        all_below && ordered,
        format!("17/15 NRMSE [{}], 85/75 NRMSE [{}]", fmt(&easy), fmt(&hard)),
    )
}

fn smnist() -> (bool, String) {
    (
        false,
        "not run: a 10,000-image subset at 784 steps through three 20-filter layers costs hours per epoch on one core"
            .into(),
    )
}

fn determinism() -> (bool, String) {
    let configs = [
        presets::adding(20)
            .with_overrides(&["training.horizon=40".into(), "training.batch_size=8".into()])
            .unwrap(),
        presets::hateful8(10)
            .with_overrides(&[
                "training.horizon=3".into(),
                "task.train_per_class=3".into(),
                "task.test_per_class=2".into(),
                "training.batch_size=6".into(),
            ])
            .unwrap(),
        presets::mackey_glass(17, 15)
            .with_overrides(&[
                "training.horizon=3".into(),
                "task.signals=8".into(),
                "task.steps=80".into(),
            ])
            .unwrap(),
    ];
    let mut same = 0;
    for c in &configs {
        let (a, net_a) = run_seed(c, 11).unwrap();
        let (b, net_b) = run_seed(c, 11).unwrap();
        same += usize::from(a.same_outcome(&b) && net_a == net_b);
    }
    (
        same == configs.len(),
        format!(
            "{same}/{} repeated runs bit-identical (records and weights)",
            configs.len()
        ),
    )
}

fn main() {
    let outcomes = vec![
        criterion(1, "parameter counts", parameter_counts),
        criterion(2, "filter-bank properties", filter_bank_suite),
        criterion(3, "k selection vs published k", k_selection),
        criterion(4, "gradient check", gradients),
        criterion(5, "Laplace equivalence", laplace),
        criterion(10, "determinism", determinism),
        criterion(6, "adding problem T=100", adding),
        criterion(7, "Hateful-8", hateful8),
        criterion(8, "Mackey-Glass", mackey_glass),
        criterion(9, "sMNIST subset", smnist),
    ];
    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.pass && !EXPECTED_RED.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} PASS, expected red {EXPECTED_RED:?}",
        outcomes.len()
    );
    if !unexpected.is_empty() {
        println!("unexpected FAIL: {unexpected:?}");
        std::process::exit(1);
    }
}
