//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! All criteria run inside a single test so that they execute one after the
//! other (the runtime limits are wall-clock limits) and so that the
//! constraint audit of criterion 10 covers every run made here. Run with
//! `cargo test --release --test acceptance -- --nocapture` to see the lines
//! even when everything passes.
//!
//! Tolerances and seed sets are pinned below; nothing is tuned per seed.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cao_swarm::agent::{fit_estimator, EstimatorWindow};
use cao_swarm::harness::study::{run_study, Sweep};
use cao_swarm::harness::{output, run_scenario, RunArtifacts, RunSummary, ScenarioConfig};
use cao_swarm::RegressorSpec;

/// Criterion 1: regressor configuration of the Voronoi experiment.
const C1_MAX_RUNTIME: Duration = Duration::from_millis(1);
/// Criterion 2: polynomial recovery.
const C2_CASES: usize = 100;
const C2_TOLERANCE: f64 = 1e-8;
const C2_SAMPLES_PER_PARAMETER: usize = 2;
const C2_MAX_RUNTIME: Duration = Duration::from_secs(5);
/// Criterion 3: separable quadratic. `alpha_bar` is the step-size base.
const C3_SEEDS: u64 = 20;
const C3_REQUIRED: usize = 18;
const C3_MAX_RUNTIME: Duration = Duration::from_secs(10);
/// Criterion 4: discrepancy identity.
const C4_TOLERANCE: f64 = 1e-12;
const C4_SEEDS: u64 = 10;
/// Criterion 5: Voronoi aggregation.
const C5_SEEDS: u64 = 20;
const C5_PEAK_RADIUS: f64 = 0.15;
const C5_REQUIRED_FRACTION: f64 = 0.8;
const C5_MAX_RUNTIME: Duration = Duration::from_secs(120);
/// Criterion 6: terrain scalability.
const C6_SEEDS: u64 = 10;
const C6_MAX_RUNTIME: Duration = Duration::from_secs(20 * 60);
/// Criterion 7: fault tolerance.
const C7_SEEDS: u64 = 10;
const C7_REQUIRED: usize = 8;
const C7_FAULTS: [usize; 2] = [330, 667];
const C7_JUMP_WINDOW: usize = 2;
const C7_SETTLE: usize = 5;
const C7_MAX_RUNTIME: Duration = Duration::from_secs(10 * 60);
/// Criterion 8: target monitoring. The target appears above the centre of
/// the area, 20 m up.
const C8_SEEDS: u64 = 10;
const C8_REQUIRED: usize = 8;
const C8_APPEARS: usize = 370;
const C8_TARGET: [f64; 3] = [81.0, 42.0, 20.0];
const C8_DISTANCE_RATIO: f64 = 0.5;
const C8_INVISIBLE_GROWTH: f64 = 1.25;
/// Criterion 9: persistent coverage.
const C9_SEEDS: u64 = 10;
const C9_MEAN_RANGE: (f64, f64) = (85.0, 105.0);
const C9_ERROR_RANGE: (f64, f64) = (2e6, 2e7);
const C9_CLUTTERED_MEAN_MIN: f64 = 80.0;
const C9_MAX_RUNTIME: Duration = Duration::from_secs(15 * 60);
/// Criterion 10: per-agent decision time, N = 5 as reference.
const C10_TIME_TOLERANCE: f64 = 0.2;
const C10_TIME_REPEATS: usize = 5;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

/// Every run made by the suite, for the constraint audit.
#[derive(Default)]
struct Audit {
    runs: Vec<RunSummary>,
}

impl Audit {
    fn run(&mut self, cfg: &ScenarioConfig) -> RunArtifacts {
        let a = run_scenario(cfg).unwrap_or_else(|e| panic!("{} seed {}: {e}", cfg.testbed.as_str(), cfg.seed));
        self.runs.push(a.summary.clone());
        a
    }
}

fn scenario(text: &str, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_toml_str(text).expect("acceptance scenario parses");
    cfg.seed = seed;
    cfg
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt() / m
}

fn within(t: Duration, limit: Duration) -> bool {
    t < limit
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    let spec = RegressorSpec::build(2, 3, 10, None, &mut rng).expect("valid regressor");
    let elapsed = started.elapsed();
    let counts = spec.per_order_counts().to_vec();
    Verdict {
        id: 1,
        pass: counts == [2, 3, 4] && spec.len() == 10 && within(elapsed, C1_MAX_RUNTIME),
        detail: format!("counts {counts:?} (want [2, 3, 4]), build took {elapsed:?} (limit {C1_MAX_RUNTIME:?})"),
    }
}

/// Distinct monomials of order 1..=max_order over `n` variables, as
/// exponent vectors.
fn all_exponents(n: usize, max_order: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            if prefix.iter().sum::<u32>() > 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for e in 0..=left {
            prefix.push(e as u32);
            rec(n, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_order, &mut Vec::new(), &mut out);
    out
}

/// The oracle evaluates the polynomial from exponent vectors with `powi`,
/// independently of the library's index-product evaluation.
fn criterion_2() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..C2_CASES {
        let n = rng.random_range(1..=4);
        let order = rng.random_range(1..=3);
        let mut pool = all_exponents(n, order);
        let terms = rng.random_range(1..=pool.len());
        let mut chosen = Vec::with_capacity(terms);
        for _ in 0..terms {
            chosen.push(pool.swap_remove(rng.random_range(0..pool.len())));
        }
        let table: Vec<Vec<usize>> = chosen
            .iter()
            .map(|e| e.iter().enumerate().flat_map(|(var, &p)| std::iter::repeat_n(var, p as usize)).collect())
            .collect();
        let spec = RegressorSpec::from_table(n, table).expect("valid table");
        let truth: Vec<f64> = (0..spec.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle = |x: &[f64]| -> f64 {
            truth[0]
                + chosen
                    .iter()
                    .zip(&truth[1..])
                    .map(|(e, t)| t * e.iter().zip(x).map(|(&p, v)| v.powi(p as i32)).product::<f64>())
                    .sum::<f64>()
        };
        let samples = C2_SAMPLES_PER_PARAMETER * spec.len();
        let mut window = EstimatorWindow::new(samples);
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let j = oracle(&x);
            window.push(x, j);
        }
        let theta = fit_estimator(&window, &spec, 1e-10).expect("fit");
        for (a, b) in theta.iter().zip(&truth) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = started.elapsed();
    Verdict {
        id: 2,
        pass: worst <= C2_TOLERANCE && within(elapsed, C2_MAX_RUNTIME),
        detail: format!(
            "{C2_CASES} polynomials, max |theta - truth| = {worst:.2e} (tol {C2_TOLERANCE:.0e}), {elapsed:.2?} (limit {C2_MAX_RUNTIME:?})"
        ),
    }
}

const QUADRATIC: &str = "testbed = \"synthetic-quadratic\"\nN = 6\niterations = 200\n";

fn criterion_3(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let mut good = 0;
    let mut worst = 0.0_f64;
    let mut radius = 0.0;
    for seed in 0..C3_SEEDS {
        let a = audit.run(&scenario(QUADRATIC, seed));
        let alpha_bar = a.config.optimizer.alpha.expect("resolved").cap();
        radius = 2.0 * alpha_bar;
        let far = a.final_positions.iter().zip(&a.landmarks).map(|(x, c)| dist(x, c)).fold(0.0, f64::max);
        worst = worst.max(far);
        if far <= radius {
            good += 1;
        }
    }
    let elapsed = started.elapsed();
    Verdict {
        id: 3,
        pass: good >= C3_REQUIRED && within(elapsed, C3_MAX_RUNTIME),
        detail: format!(
            "all 6 agents within 2*alpha_bar = {radius} of target on {good}/{C3_SEEDS} seeds (need {C3_REQUIRED}), worst distance {worst:.4}, {elapsed:.2?}"
        ),
    }
}

fn criterion_4(audit: &mut Audit) -> Verdict {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for seed in 0..C4_SEEDS {
        let a = audit.run(&scenario(QUADRATIC, 100 + seed));
        let g = |x: &[f64], c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        for w in a.records.windows(2) {
            for (i, c) in a.landmarks.iter().enumerate() {
                let want = g(&w[1].positions[i], c) - g(&w[0].positions[i], c);
                let got = w[1].deltas[i].expect("all active");
                worst = worst.max((got - want).abs());
                checked += 1;
            }
        }
    }
    Verdict {
        id: 4,
        pass: worst <= C4_TOLERANCE,
        detail: format!("{checked} logged discrepancies, max |delta - (g(y(k)) - g(y(k-1)))| = {worst:.2e} (tol {C4_TOLERANCE:.0e})"),
    }
}

const VORONOI: &str = "testbed = \"voronoi\"\nN = 10\niterations = 600\n";

fn criterion_5(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let (mut initial, mut last) = (Vec::new(), Vec::new());
    let mut decreased = 0;
    let mut aggregated = 0;
    for seed in 0..C5_SEEDS {
        let a = audit.run(&scenario(VORONOI, seed));
        let i0 = a.records[0].true_cost.expect("known");
        let f = a.records.last().expect("ran").true_cost.expect("known");
        initial.push(i0);
        last.push(f);
        if f < i0 {
            decreased += 1;
        }
        let crowded = a.landmarks.iter().all(|p| a.final_positions.iter().filter(|x| dist(x, p) < C5_PEAK_RADIUS).count() >= 2);
        if crowded {
            aggregated += 1;
        }
    }
    let elapsed = started.elapsed();
    let (cv0, cv1) = (coefficient_of_variation(&initial), coefficient_of_variation(&last));
    let need = (C5_REQUIRED_FRACTION * C5_SEEDS as f64).ceil() as usize;
    Verdict {
        id: 5,
        pass: decreased == C5_SEEDS as usize && aggregated >= need && cv1 < cv0 && within(elapsed, C5_MAX_RUNTIME),
        detail: format!(
            "true cost decreased on {decreased}/{C5_SEEDS}; >=2 robots within {C5_PEAK_RADIUS} of both peaks on {aggregated}/{C5_SEEDS} (need {need}); \
             CV initial {cv0:.3} final {cv1:.3}; mean true cost {:.3} -> {:.3}; {elapsed:.1?}",
            mean(&initial),
            mean(&last)
        ),
    }
}

const TERRAIN: &str = "testbed = \"terrain\"\nN = 5\niterations = 600\n";

fn criterion_6(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let template: toml::Table = toml::from_str(TERRAIN).expect("template");
    let seeds: Vec<u64> = (0..C6_SEEDS).collect();
    let sweeps: Vec<Sweep> = vec!["N=5,10".parse().expect("sweep"), "mode=distributed,centralized".parse().expect("sweep")];
    let rows = run_study(&template, &seeds, &sweeps).expect("study");
    let mut pass = true;
    let mut parts = Vec::new();
    for pair in rows.chunks(2) {
        let (d, c) = (&pair[0], &pair[1]);
        assert_eq!((d.mode.as_str(), c.mode.as_str()), ("distributed", "centralized"));
        audit.runs.extend(d.runs.iter().cloned());
        audit.runs.extend(c.runs.iter().cloned());
        pass &= d.final_cost.mean <= c.final_cost.mean && d.sum_cost.mean <= c.sum_cost.mean;
        parts.push(format!(
            "{}: final {:.4e} vs {:.4e} ({:+.1}%), sum {:.4e} vs {:.4e} ({:+.1}%)",
            d.point[0].1,
            d.final_cost.mean,
            c.final_cost.mean,
            100.0 * d.improvement_final.expect("paired"),
            d.sum_cost.mean,
            c.sum_cost.mean,
            100.0 * d.improvement_sum.expect("paired"),
        ));
    }
    let elapsed = started.elapsed();
    Verdict {
        id: 6,
        pass: pass && within(elapsed, C6_MAX_RUNTIME),
        detail: format!("distributed vs centralized means, N={}; {elapsed:.1?}", parts.join("; N=")),
    }
}

const TERRAIN_FAULTS: &str = "testbed = \"terrain\"\nN = 5\niterations = 1000\n\n\
[[events]]\niteration = 330\naction = \"deactivate\"\nrobot = 2\n\n\
[[events]]\niteration = 667\naction = \"deactivate\"\nrobot = 4\n";

fn criterion_7(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let mut good = 0;
    let (mut jumps, mut recovered) = ([0; 2], [0; 2]);
    let mut segment_recovered = 0;
    for seed in 0..C7_SEEDS {
        let a = audit.run(&scenario(TERRAIN_FAULTS, seed));
        let c = a.costs();
        let end = *c.last().expect("ran");
        let mut ok = true;
        for (e, &d) in C7_FAULTS.iter().enumerate() {
            let jump = c[d..=d + C7_JUMP_WINDOW].iter().any(|v| *v > c[d - 1]);
            let back = end < c[d + C7_SETTLE];
            jumps[e] += usize::from(jump);
            recovered[e] += usize::from(back);
            ok &= jump && back;
        }
        // Supplementary: recovery before the next fault.
        if c[C7_FAULTS[1] - 1] < c[C7_FAULTS[0] + C7_SETTLE] && end < c[C7_FAULTS[1] + C7_SETTLE] {
            segment_recovered += 1;
        }
        good += usize::from(ok);
    }
    let elapsed = started.elapsed();
    Verdict {
        id: 7,
        pass: good >= C7_REQUIRED && within(elapsed, C7_MAX_RUNTIME),
        detail: format!(
            "seeds meeting all conditions {good}/{C7_SEEDS} (need {C7_REQUIRED}); jump within {C7_JUMP_WINDOW} its: {}/{} and {}/{}; \
             cost(k_max) < cost(d+{C7_SETTLE}): {}/{} and {}/{}; [info] each segment ends below its d+{C7_SETTLE} level on {segment_recovered}/{C7_SEEDS}; {elapsed:.1?}",
            jumps[0], C7_SEEDS, jumps[1], C7_SEEDS, recovered[0], C7_SEEDS, recovered[1], C7_SEEDS
        ),
    }
}

fn criterion_8(audit: &mut Audit) -> Verdict {
    let text = format!(
        "testbed = \"terrain\"\nN = 5\niterations = 1000\n\n[[events]]\niteration = {C8_APPEARS}\naction = \"spawn_target\"\nposition = {:?}\n",
        C8_TARGET
    );
    let mut good = 0;
    let (mut ratios, mut growths) = (Vec::new(), Vec::new());
    for seed in 0..C8_SEEDS {
        let a = audit.run(&scenario(&text, seed));
        let at = &a.records[C8_APPEARS];
        let end = a.records.last().expect("ran");
        let metric = |r: &cao_swarm::harness::IterationRecord, name: &str| r.extra(name).expect("terrain metric");
        let ratio = metric(end, "target_0_distance") / metric(at, "target_0_distance");
        let growth = metric(end, "invisible_area") / metric(at, "invisible_area");
        ratios.push(ratio);
        growths.push(growth);
        if ratio < C8_DISTANCE_RATIO && growth < C8_INVISIBLE_GROWTH {
            good += 1;
        }
    }
    Verdict {
        id: 8,
        pass: good >= C8_REQUIRED,
        detail: format!(
            "{good}/{C8_SEEDS} seeds (need {C8_REQUIRED}); distance ratio {:.2?} (< {C8_DISTANCE_RATIO}); invisible growth {:.2?} (< {C8_INVISIBLE_GROWTH})",
            ratios, growths
        ),
    }
}

const PERSISTENT: &str = "testbed = \"persistent\"\nN = 6\niterations = 900\n";
const PERSISTENT_CLUTTERED: &str =
    "testbed = \"persistent\"\nN = 6\niterations = 900\n\n[persistent]\nobstacle_density = 0.08\nsafety = 2.5\n";

fn criterion_9(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let stats = |audit: &mut Audit, text: &str| -> (f64, f64, f64) {
        let (mut m, mut s, mut e) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..C9_SEEDS {
            let a = audit.run(&scenario(text, seed));
            let end = a.records.last().expect("ran");
            m.push(end.extra("mean_coverage").expect("metric"));
            s.push(end.extra("coverage_std").expect("metric"));
            e.push(end.extra("coverage_error").expect("metric"));
        }
        (mean(&m), mean(&s), mean(&e))
    };
    let (free_mean, free_std, free_err) = stats(audit, PERSISTENT);
    let (clut_mean, clut_std, _) = stats(audit, PERSISTENT_CLUTTERED);
    let elapsed = started.elapsed();
    let free_ok = (C9_MEAN_RANGE.0..=C9_MEAN_RANGE.1).contains(&free_mean) && (C9_ERROR_RANGE.0..=C9_ERROR_RANGE.1).contains(&free_err);
    let clut_ok = clut_mean >= C9_CLUTTERED_MEAN_MIN && clut_mean <= free_mean && clut_std >= free_std;
    Verdict {
        id: 9,
        pass: free_ok && clut_ok && within(elapsed, C9_MAX_RUNTIME),
        detail: format!(
            "obstacle-free: mean {free_mean:.2} (want {:?}), error {free_err:.3e} (want {:?}), std {free_std:.2}; \
             cluttered: mean {clut_mean:.2} (want >= {C9_CLUTTERED_MEAN_MIN} and <= free), std {clut_std:.2} (want >= free); {elapsed:.1?}",
            C9_MEAN_RANGE, C9_ERROR_RANGE
        ),
    }
}

fn median_decision_seconds(a: &RunArtifacts) -> f64 {
    let mut v: Vec<f64> = a.records.iter().skip(10).flat_map(|r| r.decision_seconds.iter().copied()).filter(|s| *s > 0.0).collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_10(audit: &mut Audit) -> Verdict {
    let short = [
        "testbed = \"synthetic-quadratic\"\nN = 6\niterations = 100\n",
        "testbed = \"voronoi\"\nN = 10\niterations = 100\n",
        "testbed = \"terrain\"\nN = 5\niterations = 100\n\n[[events]]\niteration = 50\naction = \"deactivate\"\nrobot = 2\n\n[[events]]\niteration = 60\naction = \"spawn_target\"\nposition = [81.0, 42.0, 20.0]\n",
        "testbed = \"persistent\"\nN = 6\niterations = 100\n\n[persistent]\nobstacle_density = 0.08\n",
    ];
    let mut identical = true;
    for text in short {
        let mut csvs = Vec::new();
        for threads in [1, 8, 1, 8] {
            let mut cfg = scenario(text, 17);
            cfg.threads = Some(threads);
            csvs.push(output::metrics_csv(&audit.run(&cfg)).expect("csv"));
        }
        identical &= csvs.windows(2).all(|w| w[0] == w[1]);
    }

    // Repeats cycle through the team sizes so that machine-load drift
    // affects every size alike; each size keeps its fastest median.
    let sizes = [5, 10, 20];
    let mut best = [f64::INFINITY; 3];
    for _ in 0..C10_TIME_REPEATS {
        for (slot, n) in best.iter_mut().zip(sizes) {
            let text = format!("testbed = \"terrain\"\nN = {n}\niterations = 150\n");
            *slot = slot.min(median_decision_seconds(&audit.run(&scenario(&text, 3))));
        }
    }
    let times: Vec<(usize, f64)> = sizes.into_iter().zip(best).collect();
    let reference = times[0].1;
    let flat = times.iter().all(|(_, t)| (t / reference - 1.0).abs() <= C10_TIME_TOLERANCE);

    let violations: usize = audit.runs.iter().map(|r| r.constraint_violations).sum();
    Verdict {
        id: 10,
        pass: identical && violations == 0 && flat,
        detail: format!(
            "metrics byte-identical over threads 1/8 x2 for 4 testbeds: {identical}; post-hoc violations {violations} over {} runs; \
             median decision time {} (tol +-{:.0}%)",
            audit.runs.len(),
            times.iter().map(|(n, t)| format!("N={n} {:.1}us", t * 1e6)).collect::<Vec<_>>().join(", "),
            100.0 * C10_TIME_TOLERANCE
        ),
    }
}

#[test]
fn acceptance() {
    let mut audit = Audit::default();
    let mut verdicts = Vec::new();
    let mut report = |v: Verdict| {
        println!("{} criterion {:>2}: {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.detail);
        verdicts.push((v.id, v.pass));
    };
    report(criterion_1());
    report(criterion_2());
    report(criterion_3(&mut audit));
    report(criterion_4(&mut audit));
    report(criterion_5(&mut audit));
    report(criterion_6(&mut audit));
    report(criterion_7(&mut audit));
    report(criterion_8(&mut audit));
    report(criterion_9(&mut audit));
    report(criterion_10(&mut audit));
    let failed: Vec<usize> = verdicts.iter().filter(|(_, p)| !p).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
