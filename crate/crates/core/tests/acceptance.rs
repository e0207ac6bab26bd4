//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p pricelab --test acceptance -- --nocapture` to see
//! the report lines.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};

use pricelab::cli::{cmd_factorial, cmd_histogram, cmd_illustrate, cmd_oracle, cmd_run};
use pricelab::config::RunConfigFile;
use pricelab::env::{granular_actions, granular_states, purchase_probability, sparse_actions, sparse_states};
use pricelab::harness::{
    compare_paired, compare_totals, run_factorial, run_illustrative, FactorialReport, GridSize, IllustrativeResult,
    IllustrativeSetup, RunConfig,
};
use pricelab::oracle::{benchmark_closed_form, expected_reward_table, monte_carlo_cells, optimal_discount_continuous};
use pricelab::qlearn::{record_and_maybe_flush, update_single, AgentConfig, BatchBuffer, QTable, UpdateMode};
use pricelab::rng::{substream, Stream};
use pricelab::{EnvConfig, Observation};

const N_SEEDS: u64 = 20;
const SIGNIFICANCE: f64 = 0.05;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!("[{}] criterion {id}: {name} :: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn seeds() -> Vec<u64> {
    (0..N_SEEDS).collect()
}

fn factorial() -> &'static FactorialReport {
    static CELL: OnceLock<FactorialReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let env = EnvConfig::with_grids(sparse_states(), sparse_actions()).unwrap();
        let base = RunConfig::new(env, AgentConfig::default(), 0);
        run_factorial(&base, &seeds()).unwrap()
    })
}

fn illustrative() -> &'static Vec<IllustrativeResult> {
    static CELL: OnceLock<Vec<IllustrativeResult>> = OnceLock::new();
    CELL.get_or_init(|| {
        let setup = IllustrativeSetup::default();
        seeds().into_iter().map(|s| run_illustrative(s, &setup).unwrap()).collect()
    })
}

#[test]
fn criterion_1_oracle_correctness() {
    let t = Instant::now();
    let d_star = optimal_discount_continuous(-35.0).unwrap();
    let env = EnvConfig::with_grids(sparse_states(), sparse_actions()).unwrap();
    let bench = benchmark_closed_form(&env);
    let all_ten = bench.per_state_optimum.iter().all(|s| s.discount == 0.1);
    let elapsed = t.elapsed();
    let ok = (d_star - 0.0995).abs() <= 0.0005 && all_ten && elapsed < Duration::from_secs(1);
    report(
        1,
        "oracle correctness",
        ok,
        &format!("d*={d_star:.6}, sparse argmax all 0.1: {all_ten}, {elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_monte_carlo_agrees_with_closed_form() {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    let mut failures = 0;
    let mut cells = 0;
    for (states, actions) in [
        (sparse_states(), sparse_actions()),
        (granular_states(), granular_actions()),
    ] {
        let env = EnvConfig::with_grids(states, actions).unwrap();
        let exact = expected_reward_table(&env);
        for (c, e) in monte_carlo_cells(&env, 100_000, 2024).unwrap().iter().zip(&exact) {
            cells += 1;
            let diff = (c.mean - e).abs();
            if c.std_error == 0.0 {
                // Zero-discount cells never sell: the estimate must be exact.
                if diff != 0.0 {
                    failures += 1;
                }
                continue;
            }
            let z = diff / c.std_error;
            worst = worst.max(z);
            if z > 4.0 {
                failures += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = failures == 0 && elapsed < Duration::from_secs(60);
    report(
        2,
        "Monte Carlo vs closed form",
        ok,
        &format!("{cells} cells, {failures} beyond 4 SE, worst |z|={worst:.3}, {elapsed:?}"),
    );
    assert!(ok);
}

fn obs_strategy(n_states: usize, n_actions: usize) -> impl Strategy<Value = Vec<Observation>> {
    prop::collection::vec(
        (0..n_states, 0..n_actions, prop::bool::ANY, 0.0f64..1.0),
        1..400,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .map(|(s, a, purchased, d)| Observation {
                state_index: s,
                action_index: a,
                reward: if purchased { 100.0 * (1.0 - d) } else { 0.0 },
                purchased,
            })
            .collect()
    })
}

#[test]
fn criterion_3_update_rule_identities() {
    let t = Instant::now();
    let mut runner = TestRunner::new(PropConfig::with_cases(256));

    // (a) batch with B = 1 is bit-identical to single updates.
    let a = runner.run(&obs_strategy(4, 6), |stream| {
        let mut single = QTable::zeros(4, 6);
        let mut batch = QTable::zeros(4, 6);
        let mut buf = BatchBuffer::new(1).unwrap();
        for o in &stream {
            update_single(&mut single, o, 0.1).unwrap();
            prop_assert!(record_and_maybe_flush(&mut batch, &mut buf, *o, 0.1).unwrap());
        }
        prop_assert_eq!(single, batch);
        Ok(())
    });

    // (b) n identical rewards from zero give r * (1 - (1 - alpha)^n).
    let b = runner.run(&(0.0f64..100.0, 1u32..500, 0.01f64..1.0), |(r, n, alpha)| {
        let mut q = QTable::zeros(1, 1);
        let o = Observation {
            state_index: 0,
            action_index: 0,
            reward: r,
            purchased: r > 0.0,
        };
        for _ in 0..n {
            update_single(&mut q, &o, alpha).unwrap();
        }
        let expected = r * (1.0 - (1.0 - alpha).powi(n as i32));
        let rel = if expected == 0.0 {
            q.value(0, 0).abs()
        } else {
            ((q.value(0, 0) - expected) / expected).abs()
        };
        prop_assert!(rel <= 1e-12, "relative error {rel}");
        Ok(())
    });

    // (c) exactly floor(N / B) flushes.
    let c = runner.run(&(1usize..5_000, 1usize..600), |(n, b)| {
        let mut q = QTable::zeros(2, 3);
        let mut buf = BatchBuffer::new(b).unwrap();
        let mut flushes = 0;
        for i in 0..n {
            let o = Observation {
                state_index: i % 2,
                action_index: i % 3,
                reward: (i % 7) as f64,
                purchased: i % 7 != 0,
            };
            flushes += usize::from(record_and_maybe_flush(&mut q, &mut buf, o, 0.1).unwrap());
        }
        prop_assert_eq!(flushes, n / b);
        prop_assert_eq!(buf.len(), n % b);
        Ok(())
    });

    let elapsed = t.elapsed();
    let ok = a.is_ok() && b.is_ok() && c.is_ok() && elapsed < Duration::from_secs(10);
    report(
        3,
        "update-rule identities",
        ok,
        &format!("B=1 equivalence {:?}, exp-average {:?}, flush cadence {:?}, {elapsed:?}", a.is_ok(), b.is_ok(), c.is_ok()),
    );
    a.unwrap();
    b.unwrap();
    c.unwrap();
    assert!(elapsed < Duration::from_secs(10));
}

#[test]
fn criterion_4_factorial_direction() {
    let t = Instant::now();
    let rep = factorial();
    let mut ok = true;
    let mut lines = Vec::new();
    for actions in [GridSize::Sparse, GridSize::Granular] {
        for states in [GridSize::Sparse, GridSize::Granular] {
            let single = rep.cell(actions, states, UpdateMode::Single).unwrap();
            let batch = rep.cell(actions, states, UpdateMode::Batch).unwrap();
            assert_eq!(single.runs.len(), N_SEEDS as usize);
            assert_eq!(batch.runs.len(), N_SEEDS as usize);
            let (ts, tb) = (single.row().mean_total_reward, batch.row().mean_total_reward);
            let totals = compare_paired(&single.totals(), &batch.totals()).unwrap();
            let total_ok = tb > ts && totals.sign_test_p < SIGNIFICANCE;

            let largest = actions == GridSize::Granular && states == GridSize::Granular;
            let (fs, fb) = (single.row().mean_final_reward, batch.row().mean_final_reward);
            let final_ok = largest || fb >= fs;

            ok &= total_ok && final_ok;
            lines.push(format!(
                "{}x{}: total single {ts:.0} batch {tb:.0} (+{} -{} p={:.4}) {}; final single {fs:.3} batch {fb:.3} {}",
                single.action_space_size,
                single.state_space_size,
                totals.positive,
                totals.negative,
                totals.sign_test_p,
                if total_ok { "ok" } else { "VIOLATED" },
                if largest { "(not gated)" } else if final_ok { "ok" } else { "VIOLATED" },
            ));
        }
    }
    let elapsed = t.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    report(4, "factorial direction", ok, &format!("{elapsed:?}"));
    for l in &lines {
        println!("    {l}");
    }
    assert!(ok, "factorial direction not reproduced:\n{}", lines.join("\n"));
}

#[test]
fn criterion_5_illustrative_improvement() {
    let runs = illustrative();
    let singles: Vec<_> = runs.iter().map(|r| r.single.clone()).collect();
    let batches: Vec<_> = runs.iter().map(|r| r.batch.clone()).collect();
    let cmp = compare_totals(&singles, &batches).unwrap();
    let pct = 100.0 * cmp.mean_relative_improvement;
    let ok = cmp.mean_relative_improvement > 0.0 && cmp.sign_test_p < SIGNIFICANCE;
    let in_band = (0.5..=5.0).contains(&pct);
    report(
        5,
        "illustrative improvement",
        ok,
        &format!(
            "mean improvement {pct:.3}% (+{} -{} p={:.2e}); 0.5-5% band: {}",
            cmp.positive,
            cmp.negative,
            cmp.sign_test_p,
            if in_band { "inside" } else { "outside (informational)" }
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_batch_trajectory_is_steadier() {
    let runs = illustrative();
    let setup = IllustrativeSetup::default();
    let from = setup.iterations / 2;
    let mut steadier = 0;
    let mut compared = 0;
    for r in runs {
        if let (Some(s), Some(b)) = (r.single.tracked_std_after(from), r.batch.tracked_std_after(from)) {
            compared += 1;
            if b < s {
                steadier += 1;
            }
        }
    }
    let needed = (0.9 * N_SEEDS as f64).ceil() as usize;
    let ok = steadier >= needed;
    report(
        6,
        "stability direction",
        ok,
        &format!("batch std < single std in {steadier}/{N_SEEDS} seeds ({compared} comparable), need {needed}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7_convergence_direction() {
    let rep = factorial();
    let single = rep.cell(GridSize::Sparse, GridSize::Sparse, UpdateMode::Single).unwrap();
    let batch = rep.cell(GridSize::Sparse, GridSize::Sparse, UpdateMode::Batch).unwrap();
    let reached = |c: &pricelab::harness::FactorialCell| c.runs.iter().filter(|r| r.convergence_iteration.is_some()).count();
    let (rs, rb) = (reached(single), reached(batch));
    let needed = (0.9 * N_SEEDS as f64).ceil() as usize;
    let (ms, mb) = (
        single.row().mean_convergence_iteration.unwrap_or(f64::INFINITY),
        batch.row().mean_convergence_iteration.unwrap_or(f64::INFINITY),
    );
    let slower = mb >= ms;
    let both_reach = rs >= needed && rb >= needed;
    let ok = slower && both_reach;
    report(
        7,
        "convergence direction",
        ok,
        &format!(
            "mean convergence single {ms:.0} batch {mb:.0} (batch slower: {slower}); reached single {rs}/{N_SEEDS} batch {rb}/{N_SEEDS}"
        ),
    );
    assert!(ok);
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_8_outputs_are_byte_identical() {
    let cfg = RunConfigFile::parse(
        "seed = 99\nseeds = 3\niterations = 5000\nrolling_window = 500\n\
         [agent]\nupdate = \"batch\"\nbatch_size = 250\n\
         [oracle]\nmc_samples = 2000\n[histogram]\nsamples = 20000\n",
    )
    .unwrap();
    type Cmd = fn(&RunConfigFile, &Path) -> pricelab::Result<Vec<std::path::PathBuf>>;
    let cmds: [(&str, Cmd); 5] = [
        ("run", cmd_run),
        ("factorial", |c, o| cmd_factorial(c, o, true)),
        ("illustrate", cmd_illustrate),
        ("oracle", cmd_oracle),
        ("histogram", |c, o| cmd_histogram(c, None, o)),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, cmd) in cmds {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        cmd(&cfg, a.path()).unwrap();
        cmd(&cfg, b.path()).unwrap();
        let (fa, fb) = (read_all(a.path()), read_all(b.path()));
        let same = !fa.is_empty() && fa == fb;
        ok &= same;
        detail.push(format!("{name}: {} files {}", fa.len(), if same { "identical" } else { "DIFFER" }));
    }
    report(8, "determinism", ok, &detail.join(", "));
    assert!(ok);
}

#[test]
fn criterion_9_environment_laws() {
    const N: u64 = 100_000;
    let mut ok = true;
    let mut worst = 0.0_f64;
    let mut pairs = 0;
    let mut support = true;
    for (i, beta) in [0.2, 0.5, 0.785, 1.0].into_iter().enumerate() {
        for (j, d) in [0.01, 0.05, 0.1, 0.17, 0.4, 0.79].into_iter().enumerate() {
            let env = EnvConfig::with_grids(vec![beta], vec![d]).unwrap();
            let state = env.state(0).unwrap();
            let p = purchase_probability(beta, d, env.steepness()).unwrap();
            let price = 100.0 * (1.0 - d);
            let mut rng = substream(1000 + (i * 10 + j) as u64, Stream::Purchases);
            let mut purchases = 0u64;
            let mut saw_zero = false;
            let mut saw_price = false;
            for _ in 0..N {
                let o = env.step(state, 0, &mut rng).unwrap();
                if o.reward == 0.0 {
                    saw_zero = true;
                    ok &= !o.purchased;
                } else {
                    ok &= o.purchased && o.reward == price;
                    saw_price = true;
                }
                purchases += u64::from(o.purchased);
            }
            let freq = purchases as f64 / N as f64;
            let sd = (p * (1.0 - p) / N as f64).sqrt();
            let tol = 4.0 * sd;
            let z = if sd > 0.0 { (freq - p).abs() / sd } else { 0.0 };
            worst = worst.max(z);
            ok &= (freq - p).abs() <= tol;
            // Each support point must appear once its expected count reaches 20.
            let n = N as f64;
            support &= (n * (1.0 - p) < 20.0 || saw_zero) && (n * p < 20.0 || saw_price);
            pairs += 1;
        }
    }
    report(
        9,
        "environment laws",
        ok && support,
        &format!("{pairs} (beta, d) pairs at N={N}, worst |z|={worst:.3}, two-point support held: {support}"),
    );
    assert!(ok && support);
}
