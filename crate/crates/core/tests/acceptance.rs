//! Acceptance checks. Runs as a plain binary so that every criterion prints
//! exactly one `criterion N: PASS|FAIL` line; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;

use cpcp::baselines::Method;
use cpcp::conformal::{
    clip_normalize_weights, conformal_rank, kth_smallest, predict_box, weights_from_gaps,
    ConformalRank,
};
use cpcp::data::{generate_synthetic, SyntheticOracle, SyntheticSpec};
use cpcp::experiment::results::{rows_to_csv, ResultRow};
use cpcp::experiment::{fit_single, run_experiment, ExperimentConfig};
use cpcp::losses::QuantileLevel;
use cpcp::metrics::oracle_msce;
use cpcp::nn::{AldObjective, HeadNet, MseObjective, Objective, PinballObjective};
use cpcp::numeric::{BaseDistribution, Matrix, RngStream};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// The heteroscedastic benchmark run, shared by the ordering, slab and
/// determinism criteria.
fn benchmark_rows() -> &'static Vec<ResultRow> {
    static ROWS: OnceLock<Vec<ResultRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_experiment(&config("acceptance.toml")).expect("benchmark run"))
}

fn metric_by_seed(
    rows: &[ResultRow],
    method: &str,
    pick: fn(&ResultRow) -> f64,
) -> BTreeMap<usize, f64> {
    rows.iter()
        .filter(|r| r.method == method)
        .map(|r| {
            assert!(r.is_ok(), "{method} seed {} failed: {}", r.seed, r.status);
            (r.seed, pick(r))
        })
        .collect()
}

fn oracle_of(r: &ResultRow) -> f64 {
    r.oracle_msce.expect("synthetic run has oracle MSCE")
}

fn msce_ordering() -> Outcome {
    let rows = benchmark_rows();
    let cpcp = metric_by_seed(rows, "cpcp-clip-mix", oracle_of);
    let rcp = metric_by_seed(rows, "rcp", oracle_of);
    let split = metric_by_seed(rows, "split", oracle_of);
    let (mc, mr, ms) = (
        median(cpcp.values().copied().collect()),
        median(rcp.values().copied().collect()),
        median(split.values().copied().collect()),
    );
    let wins = cpcp.iter().filter(|(s, v)| **v < rcp[s]).count();
    let frac = wins as f64 / cpcp.len() as f64;
    let ratio = ms / mc;
    check(
        mc < mr && mr < ms && ratio >= 5.0 && frac >= 0.7,
        format!(
            "median oracle MSCE cpcp-clip-mix {mc:.5} / rcp {mr:.5} / split {ms:.5}; \
             split/cpcp ratio {ratio:.2} (need >= 5); cpcp<rcp in {wins}/{} reps (need >= 70%)",
            cpcp.len()
        ),
    )
}

fn marginal_validity() -> Outcome {
    let cfg = config("validity.toml");
    let tau = cfg.conformal.tau;
    let rows = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let mut worst = String::new();
    let mut worst_margin = f64::INFINITY;
    for method in cfg.parsed_methods().unwrap() {
        let name = method.name();
        let (_, fitted) = fit_single(&cfg, method, 0).map_err(|e| e.to_string())?;
        let m = match method {
            Method::Plcp { groups } => fitted.calibration_size / groups,
            _ => fitted.calibration_size,
        };
        let cov: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == name)
            .map(|r| r.marginal_coverage)
            .collect();
        if cov.iter().any(|c| !c.is_finite()) {
            failures.push(format!("{name}: failed cells"));
            continue;
        }
        let mean = cov.iter().sum::<f64>() / cov.len() as f64;
        let (lo, hi) = (tau - 0.015, tau + 1.0 / (m as f64 + 1.0) + 0.015);
        let margin = (mean - lo).min(hi - mean);
        if margin < worst_margin {
            worst_margin = margin;
            worst = format!("{name} mean {mean:.4} in [{lo:.4}, {hi:.4}] (m={m})");
        }
        if !(lo..=hi).contains(&mean) {
            failures.push(format!("{name}: mean {mean:.4} outside [{lo:.4}, {hi:.4}]"));
        }
    }
    let reps = cfg.run.repetitions;
    if failures.is_empty() {
        Ok(format!(
            "{reps} reps, all methods in band; tightest: {worst}"
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn oracle_sanity() -> Outcome {
    let spec = SyntheticSpec::heteroscedastic();
    let data = generate_synthetic(&spec, 5000, &mut RngStream::new(31, 0)).unwrap();
    let oracle = data.oracle.unwrap();
    let tau = 0.9;
    let boxes: Vec<_> = (0..data.len())
        .map(|i| {
            let x = data.x.row(i);
            let center = vec![oracle.location(x); spec.label_dim];
            predict_box(&center, oracle.linf_score_quantile(x, tau) + 0.0)
        })
        .collect();
    let msce = oracle_msce(Some(&oracle), &data.x, &boxes, tau).unwrap();
    check(
        msce < 1e-6,
        format!("oracle MSCE of the analytic quantile box: {msce:.3e}"),
    )
}

fn taylor_surrogate() -> Outcome {
    let base = BaseDistribution::Normal;
    let tau = 0.9;
    let q = base.quantile(tau);
    let f = base.pdf(q);
    let eps = [0.2, 0.1, 0.05, 0.025];
    let residual = |e: f64| {
        let excess = base.integrated_cdf(q + e) - base.integrated_cdf(q) - tau * e;
        let miscoverage = base.cdf(q + e) - tau;
        (miscoverage * miscoverage - 2.0 * f * excess).abs()
    };
    let r: Vec<f64> = eps.iter().map(|&e| residual(e)).collect();
    let c: Vec<f64> = eps.iter().zip(&r).map(|(e, r)| r / e.powi(3)).collect();
    let slopes: Vec<f64> = (1..eps.len())
        .map(|i| (r[i - 1] / r[i]).ln() / (eps[i - 1] / eps[i]).ln())
        .collect();
    let min_slope = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let c_spread =
        c.iter().copied().fold(0.0, f64::max) / c.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        min_slope >= 2.7 && c_spread < 1.5,
        format!("log-log slopes {slopes:.3?}; fitted C {c:.4?} (max/min {c_spread:.3})"),
    )
}

fn finite_difference_weights() -> Outcome {
    let oracle = SyntheticOracle {
        spec: SyntheticSpec::heteroscedastic(),
    };
    let tau = 0.9;
    let deltas = [0.04, 0.02, 0.01, 0.005];
    let points: Vec<Vec<f64>> = (0..5)
        .map(|i| vec![0.2 * i as f64 + 0.05, 0.3, 0.5, 0.7, 0.9])
        .collect();
    let mut worst_at_smallest = 0.0f64;
    for x in &points {
        let truth = oracle.true_density_weight(x, tau);
        let errs: Vec<f64> = deltas
            .iter()
            .map(|&d| {
                let gap = oracle.true_quantile(x, tau + d) - oracle.true_quantile(x, tau - d);
                (weights_from_gaps(&[gap], d)[0] - truth).abs() / truth
            })
            .collect();
        if errs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(format!(
                "error not decreasing in delta at x1={}: {errs:?}",
                x[0]
            ));
        }
        worst_at_smallest = worst_at_smallest.max(errs[errs.len() - 1]);
    }
    check(
        worst_at_smallest < 0.01,
        format!("max relative error at delta=0.005: {worst_at_smallest:.3e}; decreasing in delta at all 5 points"),
    )
}

/// Signs of every backbone pre-activation; a change means a ReLU kink was crossed.
fn relu_pattern(net: &HeadNet, x: &Matrix) -> Vec<bool> {
    let mut out = Vec::new();
    let mut a = x.clone();
    for layer in &net.backbone.layers {
        let z = layer.forward(&a).unwrap();
        out.extend(z.as_slice().iter().map(|v| *v > 0.0));
        a = Matrix::from_vec(
            z.rows(),
            z.cols(),
            z.as_slice().iter().map(|v| v.max(0.0)).collect(),
        )
        .unwrap();
    }
    out
}

fn flat_params(net: &mut HeadNet) -> Vec<(usize, usize)> {
    net.param_slices_mut()
        .iter()
        .enumerate()
        .flat_map(|(s, sl)| (0..sl.len()).map(move |i| (s, i)))
        .collect()
}

/// Compares backprop with central differences on 50 sampled coordinates,
/// resampling any coordinate whose ±h perturbation crosses a kink.
fn gradient_check(
    name: &str,
    net: &HeadNet,
    x: &Matrix,
    objective: &impl Objective,
    residual_signs: impl Fn(&[Matrix]) -> Vec<bool>,
    rng: &mut RngStream,
) -> Result<f64, String> {
    let h = 1e-5;
    let rows: Vec<usize> = (0..x.rows()).collect();
    let (_, grads) = net.loss_and_grad(x, &rows, objective).unwrap();
    let grad_slices = grads.slices();
    let coords = flat_params(&mut net.clone());
    let loss_at = |n: &HeadNet| objective.loss_and_grad(&rows, &n.forward(x).unwrap()).0;
    let (mut checked, mut attempts, mut worst) = (0, 0, 0.0f64);
    while checked < 50 {
        attempts += 1;
        if attempts > 5000 {
            return Err(format!("{name}: too many kink crossings"));
        }
        let (s, i) = coords[rng.below(coords.len())];
        let mut plus = net.clone();
        let mut minus = net.clone();
        plus.param_slices_mut()[s][i] += h;
        minus.param_slices_mut()[s][i] -= h;
        let crosses = relu_pattern(&plus, x) != relu_pattern(&minus, x)
            || residual_signs(&plus.forward(x).unwrap())
                != residual_signs(&minus.forward(x).unwrap());
        if crosses {
            continue;
        }
        let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        let analytic = grad_slices[s][i];
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
        checked += 1;
    }
    if worst < 1e-3 {
        Ok(worst)
    } else {
        Err(format!("{name}: worst relative error {worst:.3e}"))
    }
}

fn gradient_fidelity() -> Outcome {
    let mut rng = RngStream::new(77, 0);
    let (n, p) = (24, 4);
    let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.standard_normal()).collect()).unwrap();
    let targets: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let weights: Vec<f64> = (0..n).map(|_| 0.1 + 2.0 * rng.uniform()).collect();
    let tau = QuantileLevel::new(0.8).unwrap();
    let signs = |outs: &[Matrix]| -> Vec<bool> {
        outs[0]
            .as_slice()
            .iter()
            .zip(&targets)
            .map(|(q, s)| s - q > 0.0)
            .collect()
    };
    let mut report = Vec::new();

    let target_matrix =
        Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.standard_normal()).collect()).unwrap();
    let net = HeadNet::init(&[p, 10, 8], &[2], &mut rng).unwrap();
    let w = gradient_check(
        "mse",
        &net,
        &x,
        &MseObjective {
            targets: &target_matrix,
        },
        |_| Vec::new(),
        &mut rng,
    )?;
    report.push(format!("mse {w:.1e}"));

    let net = HeadNet::init(&[p, 10, 8], &[1], &mut rng).unwrap();
    let plain = PinballObjective {
        targets: &targets,
        tau,
        weights: None,
        lambda: 1.0,
    };
    let w = gradient_check("pinball", &net, &x, &plain, signs, &mut rng)?;
    report.push(format!("pinball {w:.1e}"));

    let weighted = PinballObjective {
        targets: &targets,
        tau,
        weights: Some(&weights),
        lambda: 0.5,
    };
    let w = gradient_check("weighted pinball", &net, &x, &weighted, signs, &mut rng)?;
    report.push(format!("weighted pinball {w:.1e}"));

    let net = HeadNet::init(&[p, 10, 8], &[1, 1], &mut rng).unwrap();
    let ald = AldObjective {
        targets: &targets,
        tau,
        freeze_scale: false,
    };
    let w = gradient_check("ald", &net, &x, &ald, signs, &mut rng)?;
    report.push(format!("ald {w:.1e}"));

    Ok(format!(
        "50 coordinates per head, worst relative error: {}",
        report.join(", ")
    ))
}

fn order_statistics() -> Outcome {
    let mut rng = RngStream::new(5, 0);
    let mut infinite = 0;
    for case in 0..1000 {
        let n = 1 + rng.below(60);
        let tau = QuantileLevel::new(0.01 + 0.98 * rng.uniform()).unwrap();
        let values: Vec<f64> = (0..n)
            .map(|_| {
                if rng.uniform() < 0.2 {
                    rng.below(5) as f64
                } else {
                    rng.standard_normal()
                }
            })
            .collect();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let brute = (((n + 1) as f64) * tau.value()).ceil() as usize;
        match conformal_rank(n, tau) {
            ConformalRank::Finite(k) => {
                if k != brute || kth_smallest(&values, k).unwrap() != sorted[k - 1] {
                    return Err(format!(
                        "case {case}: n={n} tau={} rank {k} vs {brute}",
                        tau.value()
                    ));
                }
            }
            ConformalRank::Infinite => {
                if brute <= n {
                    return Err(format!("case {case}: unexpected infinite rank"));
                }
                infinite += 1;
            }
        }
    }
    Ok(format!(
        "1000 fuzzed arrays match full sort exactly ({infinite} infinite-rank cases)"
    ))
}

fn clip_normalize() -> Outcome {
    let mut rng = RngStream::new(8, 0);
    let mut worst_sum = 0.0f64;
    for case in 0..1000 {
        let n = 1 + rng.below(50);
        let raw: Vec<f64> = (0..n)
            .map(|_| (3.0 * rng.standard_normal()).exp())
            .collect();
        let m = 0.5 + 5.0 * rng.uniform();
        let out = clip_normalize_weights(&raw, m).unwrap();
        let cap = m * raw.iter().sum::<f64>() / n as f64;
        let clipped_total: f64 = raw.iter().map(|w| w.min(cap)).sum();
        worst_sum = worst_sum.max((out.iter().sum::<f64>() - 1.0).abs());
        for (o, r) in out.iter().zip(&raw) {
            let pre = o * clipped_total;
            if pre > cap * (1.0 + 1e-12) || (pre - r.min(cap)).abs() > 1e-12 * cap.max(1.0) {
                return Err(format!("case {case}: weight {r} -> {o} violates cap {cap}"));
            }
        }
    }
    let worked = clip_normalize_weights(&[10.0, 1.0, 1.0], 2.0).unwrap();
    check(
        worst_sum <= 1e-12 && worked == vec![0.8, 0.1, 0.1],
        format!("max |sum-1| {worst_sum:.1e} over 1000 vectors; (10,1,1), M=2 -> {worked:?}"),
    )
}

fn degenerate_equivalence() -> Outcome {
    let mut rng = RngStream::new(99, 0);
    for case in 0..5 {
        let mut cfg = config("validity.toml");
        cfg.run.seed = rng.below(1 << 30) as u64;
        cfg.dataset = toml::from_str(&format!(
            "kind = \"synthetic\"\nn = {}",
            400 + rng.below(600)
        ))
        .unwrap();
        cfg.conformal.tau = 0.8 + 0.15 * rng.uniform();
        cfg.conformal.delta = 0.01 + 0.03 * rng.uniform();
        cfg.conformal.lambda = 0.0;
        cfg.training.quantile.hidden = vec![4 + rng.below(12)];
        let (rep, mixed) = fit_single(
            &cfg,
            Method::Cpcp {
                clip: false,
                mix: true,
            },
            0,
        )
        .map_err(|e| e.to_string())?;
        let (_, plain) = fit_single(&cfg, Method::Rcp, 0).map_err(|e| e.to_string())?;
        let a = mixed.boxes(&rep.test.x).unwrap();
        let b = plain.boxes(&rep.test.x).unwrap();
        if a != b || mixed.shift() != plain.shift() {
            return Err(format!("case {case}: predictions differ"));
        }
    }
    Ok("5 random configs: lambda=0 weighted fine-tune gives identical boxes and shift to plain fine-tune".into())
}

fn slab_direction() -> Outcome {
    let rows = benchmark_rows();
    let mean = |m: &str| {
        let v = metric_by_seed(rows, m, |r| r.wsc);
        v.values().sum::<f64>() / v.len() as f64
    };
    let (c, s) = (mean("cpcp-clip-mix"), mean("split"));
    check(
        c - s >= 0.03,
        format!(
            "mean WSC cpcp-clip-mix {c:.4} vs split {s:.4} (difference {:.4}, need >= 0.03)",
            c - s
        ),
    )
}

fn determinism() -> Outcome {
    let first = rows_to_csv(benchmark_rows()).unwrap();
    let again = rows_to_csv(&run_experiment(&config("acceptance.toml")).unwrap()).unwrap();
    check(
        first == again,
        format!(
            "rerun with the same master seed: {} bytes, identical = {}",
            first.len(),
            first == again
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle MSCE ordering cpcp < rcp < split", msce_ordering),
        ("marginal validity band", marginal_validity),
        ("oracle quantile sanity", oracle_sanity),
        ("Taylor surrogate remainder is cubic", taylor_surrogate),
        (
            "finite-difference density weights",
            finite_difference_weights,
        ),
        ("gradient fidelity", gradient_fidelity),
        ("order-statistic oracle", order_statistics),
        ("clip/normalize algebra", clip_normalize),
        ("degenerate equivalence", degenerate_equivalence),
        ("worst-slab coverage direction", slab_direction),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| id.ends_with(&format!(" {f}")) || name.contains(f.as_str()))
        {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("{id} ({name}): PASS - {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} ({name}): FAIL - {detail}");
            }
        }
    }
    println!("acceptance: {failed} failing criteria");
    if failed > 0 {
        std::process::exit(1);
    }
}
