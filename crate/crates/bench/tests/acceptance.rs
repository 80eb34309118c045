//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a gated criterion fails.
//!
//! The published-number spot checks (criterion 7) are gated only when
//! `COMADOUT_ODDS_DIR` points at a directory holding `wine.csv`,
//! `boston.csv` and `wbc.csv` in the original benchmark form. Otherwise they
//! run on the bundled reconstructions and report their deviations.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use comadout::data::{self, CsvOptions};
use comadout::detector::{FitOptions, ENSEMBLE_SIGMA_FLOOR, EPSILON};
use comadout::linalg::{comedian_matrix, sym_eigen, SymmetricMatrix};
use comadout::metrics::{self, critical_difference, rank_table, LabeledScores};
use comadout::{Matrix, MatrixSource, Model, Scoring, VariantId};
use comadout_bench::{render_csv, run_benchmark, DatasetSpec, Metric, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    /// Out of tolerance on inputs the criterion does not gate.
    Ungated,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail }
    }
}

fn within_time(limit: Duration, start: Instant) -> (bool, String) {
    let took = start.elapsed();
    (took < limit, format!("{:.2}s of {:.0}s", took.as_secs_f64(), limit.as_secs_f64()))
}

fn sorted_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, integer: bool) -> Matrix {
    let data = (0..n * d)
        .map(|_| if integer { f64::from(rng.random_range(-3i32..=3)) } else { rng.random_range(-5.0..5.0) })
        .collect();
    Matrix::new(n, d, data).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for t in 0..100 {
        let (n, d) = (rng.random_range(1..=60), rng.random_range(1..=8));
        // Every fourth matrix uses small integers, which produces ties.
        let x = random_matrix(&mut rng, n, d, t % 4 == 0);
        let com = comedian_matrix(&x);
        let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
        let meds: Vec<f64> = cols.iter().map(|c| sorted_median(c)).collect();
        for i in 0..d {
            for j in 0..d {
                let prods: Vec<f64> =
                    (0..n).map(|r| (cols[i][r] - meds[i]) * (cols[j][r] - meds[j])).collect();
                worst = worst.max((com.get(i, j) - sorted_median(&prods)).abs());
            }
        }
    }
    let (fast, time) = within_time(Duration::from_secs(5), start);
    Outcome::check(worst <= 1e-12 && fast, format!("max deviation {worst:.1e} over 100 matrices, {time}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut recon, mut ortho, mut order_ok, mut indefinite) = (0.0_f64, 0.0_f64, true, 0);
    for _ in 0..100 {
        let d = rng.random_range(1..=20);
        let s = SymmetricMatrix::from_upper(d, |_, _| rng.random_range(-10.0..10.0)).unwrap();
        let eig = sym_eigen(&s).unwrap();
        let vals = eig.values();
        if vals.iter().any(|&v| v < 0.0) && vals.iter().any(|&v| v > 0.0) {
            indefinite += 1;
        }
        order_ok &= vals.windows(2).all(|w| w[0].abs() >= w[1].abs());
        let rebuilt = eig.reconstruct();
        let err: f64 = s.as_slice().iter().zip(&rebuilt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        recon = recon.max(err / s.frobenius_norm());
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = eig.vector(a).iter().zip(eig.vector(b)).map(|(x, y)| x * y).sum();
                ortho = ortho.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    Outcome::check(
        recon < 1e-6 && ortho < 1e-8 && order_ok,
        format!("relative reconstruction {recon:.1e}, orthonormality {ortho:.1e}, {indefinite} indefinite, |λ| order held: {order_ok}"),
    )
}

fn leading_angle(with: &Matrix, without: &Matrix, source: MatrixSource) -> f64 {
    let mode = VariantId::new(Scoring::Plus, source).center_mode();
    let fit = |x: &Matrix| {
        comadout::decomposition::fit_subspace(x, 1.0, source, mode).unwrap().components[0].clone()
    };
    let (a, b) = (fit(with), fit(without));
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.abs().min(1.0).acos().to_degrees()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (mut worst_robust, mut min_gap, mut ok) = (0.0_f64, f64::INFINITY, true);
    for seed in 0..20 {
        let ds = data::synthetic_line_with_outlier(data::line::DEFAULT_INLIERS, seed).unwrap();
        let inliers: Vec<usize> = (0..ds.samples()).filter(|&i| !ds.labels[i]).collect();
        let clean = ds.features.select_rows(&inliers).unwrap();
        let robust = leading_angle(&ds.features, &clean, MatrixSource::Comedian);
        let classic = leading_angle(&ds.features, &clean, MatrixSource::Covariance);
        worst_robust = worst_robust.max(robust);
        min_gap = min_gap.min(classic - robust);
        ok &= robust < 2.0 && classic > robust;
    }
    let (fast, time) = within_time(Duration::from_secs(2), start);
    Outcome::check(
        ok && fast,
        format!("20 seeds: comedian tilt at most {worst_robust:.3}°, covariance tilts at least {min_gap:.3}° more, {time}"),
    )
}

/// Scores recomputed from the fitted basis alone.
struct Oracle {
    cmo: Vec<f64>,
    cmo_labels: Vec<bool>,
    sums: [Vec<f64>; 4],
    softmax: Vec<f64>,
    ensemble: Vec<f64>,
}

fn oracle(model: &Model, train: &Matrix, test: &Matrix) -> Oracle {
    let sub = &model.subspace;
    let coords = |x: &Matrix| -> Vec<Vec<f64>> {
        x.row_iter()
            .map(|row| {
                sub.components
                    .iter()
                    .map(|u| row.iter().zip(&sub.center).zip(u).map(|((v, c), w)| (v - c) * w).sum())
                    .collect()
            })
            .collect()
    };
    let (tr, te) = (coords(train), coords(test));
    let k = sub.k;
    let lambda: Vec<f64> = sub.raw_eigenvalues.iter().map(|l| l.abs().max(EPSILON)).collect();
    let axis = |c: &[Vec<f64>], a: usize| -> Vec<f64> { c.iter().map(|r| r[a]).collect() };
    let m: Vec<f64> =
        (0..k).map(|a| sorted_median(&axis(&tr, a).iter().map(|v| v.abs()).collect::<Vec<_>>())).collect();
    let tau: Vec<f64> = (0..k).map(|a| lambda[a] + m[a]).collect();
    let kappa: Vec<f64> = (0..k)
        .map(|a| {
            let v = axis(&tr, a);
            let n = v.len() as f64;
            let mu = v.iter().sum::<f64>() / n;
            let m2 = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
            let m4 = v.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / n;
            if m2 == 0.0 {
                0.0
            } else {
                m4 / (m2 * m2)
            }
        })
        .collect();

    let residual = |c: &[f64]| -> Vec<f64> { (0..k).map(|a| (c[a].abs() - tau[a]).max(0.0)).collect() };
    let cmo = te.iter().map(|c| residual(c).iter().sum::<f64>() / k as f64).collect();
    let cmo_labels = te.iter().map(|c| (0..k).any(|a| c[a].abs() > tau[a])).collect();

    let sums_of = |c: &[Vec<f64>]| -> [Vec<f64>; 4] {
        [
            c.iter().map(|r| (0..k).map(|a| r[a].abs()).sum()).collect(),
            c.iter().map(|r| (0..k).map(|a| kappa[a] * r[a].abs()).sum()).collect(),
            c.iter().map(|r| (0..k).map(|a| r[a].abs() / lambda[a]).sum()).collect(),
            c.iter().map(|r| (0..k).map(|a| kappa[a] * r[a].abs() / lambda[a]).sum()).collect(),
        ]
    };

    let scaled =
        |c: &[f64]| -> Vec<f64> { residual(c).iter().zip(&lambda).map(|(r, l)| r / l.sqrt()).collect() };
    let train_scaled: Vec<Vec<f64>> = tr.iter().map(|c| scaled(c)).collect();
    let med: Vec<f64> = (0..k).map(|a| sorted_median(&axis(&train_scaled, a))).collect();
    let softmax = te
        .iter()
        .map(|c| {
            let s: Vec<f64> = scaled(c).iter().zip(&med).map(|(v, m)| (v - m).max(0.0)).collect();
            let exps: Vec<f64> = s.iter().map(|v| v.exp()).collect();
            exps.iter().copied().fold(f64::MIN, f64::max) / exps.iter().sum::<f64>()
        })
        .collect();

    let (train_sums, test_sums) = (sums_of(&tr), sums_of(&te));
    let mut ensemble = vec![f64::NEG_INFINITY; te.len()];
    for slot in 0..4 {
        let t = &train_sums[slot];
        let n = t.len() as f64;
        let mu = t.iter().sum::<f64>() / n;
        let sd = (t.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
        for (e, s) in ensemble.iter_mut().zip(&test_sums[slot]) {
            *e = e.max(if sd <= ENSEMBLE_SIGMA_FLOOR { 0.0 } else { (s - mu) / sd });
        }
    }
    Oracle { cmo, cmo_labels, sums: test_sums, softmax, ensemble }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let mut labels_agree = true;
    let dev = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
    };
    for t in 0..50 {
        let (n, d) = (rng.random_range(12..60), rng.random_range(1..=8));
        let mut train = random_matrix(&mut rng, n, d, false);
        let spikes: Vec<f64> =
            train.as_slice().iter().map(|v| if rng.random_bool(0.05) { v * 15.0 } else { *v }).collect();
        train = Matrix::new(n, d, spikes).unwrap();
        let test = random_matrix(&mut rng, 20, d, false).map(|v| v * 3.0).unwrap();
        let source = if t % 2 == 0 { MatrixSource::Comedian } else { MatrixSource::Covariance };
        let ratio = rng.random_range(0.1..=1.0);
        let model = Model::fit_with(
            &train,
            VariantId::new(Scoring::Ensemble, source),
            FitOptions { ratio, softmax_scoring: false },
        )
        .unwrap();
        let o = oracle(&model, &train, &test);

        worst = worst.max(dev(&model.score_cmo(&test).unwrap(), &o.cmo));
        labels_agree &= model.predict_cmo_labels(&test).unwrap() == o.cmo_labels;
        for (slot, scoring) in Scoring::DISTANCE_SUMS.into_iter().enumerate() {
            worst = worst.max(dev(&model.score_variant(&test, scoring).unwrap(), &o.sums[slot]));
        }
        worst = worst.max(dev(&model.score_softmax(&test).unwrap(), &o.softmax));
        let ens = model.score_ensemble(&test).unwrap();
        worst = worst.max(dev(&ens.scores, &o.ensemble));
        labels_agree &= ens.labels.unwrap() == o.ensemble.iter().map(|z| z.abs() > 1.0).collect::<Vec<_>>();
    }
    Outcome::check(
        worst <= 1e-9 && labels_agree,
        format!("50 models: max relative deviation {worst:.1e}, labels agree: {labels_agree}"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0_f64; 4];
    for _ in 0..200 {
        let n = rng.random_range(2..=300);
        let levels = rng.random_range(2..40);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) * 0.25).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        labels[0] = true;
        labels[1] = false;
        let ls = LabeledScores::new(&scores, &labels).unwrap();
        let pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
        let neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();

        let mut wins = 0.0;
        for &p in &pos {
            for &q in &neg {
                wins += if scores[p] > scores[q] {
                    1.0
                } else if scores[p] == scores[q] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let auroc = wins / (pos.len() * neg.len()) as f64;

        let mut thresholds = scores.clone();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut ap, mut area, mut prev_r, mut prev_p, mut done) = (0.0, 0.0, 0.0, 1.0, false);
        for t in thresholds {
            let flagged: Vec<usize> = (0..n).filter(|&i| scores[i] >= t).collect();
            let tp = flagged.iter().filter(|&&i| labels[i]).count() as f64;
            let (r, p) = (tp / pos.len() as f64, tp / flagged.len() as f64);
            ap += (r - prev_r) * p;
            if !done {
                area += (r - prev_r) * (p + prev_p) / 2.0;
                done = r == 1.0;
            }
            (prev_r, prev_p) = (r, p);
        }

        let k = rng.random_range(1..=n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let p_at = order[..k].iter().filter(|&&i| labels[i]).count() as f64 / k as f64;

        worst[0] = worst[0].max((metrics::auroc(&ls).unwrap() - auroc).abs());
        worst[1] = worst[1].max((metrics::average_precision(&ls).unwrap() - ap).abs());
        worst[2] = worst[2].max((metrics::auprc(&ls).unwrap() - area).abs());
        worst[3] = worst[3].max((metrics::precision_at_n(&ls, k).unwrap() - p_at).abs());
    }
    let (fast, time) = within_time(Duration::from_secs(30), start);
    Outcome::check(
        worst.iter().all(|w| *w <= 1e-9) && fast,
        format!(
            "200 tied instances: AUROC {:.1e}, AP {:.1e}, AUPRC {:.1e}, P@n {:.1e}, {time}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (algos, datasets) = (21, 26);
    let values: Vec<Vec<f64>> = (0..algos)
        .map(|_| (0..datasets).map(|_| (rng.random_range(0.0..1.0f64) * 20.0).round() / 20.0).collect())
        .collect();
    let table = rank_table(&values, true).unwrap();
    let k = algos as f64;
    let mut ok = true;
    for d in 0..datasets {
        let sum: f64 = table.ranks.iter().map(|r| r[d]).sum();
        ok &= (sum - k * (k + 1.0) / 2.0).abs() < 1e-9;
        let mut col: Vec<f64> = values.iter().map(|r| r[d]).collect();
        col.sort_by(|a, b| b.total_cmp(a));
        for (a, row) in values.iter().enumerate() {
            let v = row[d];
            let first = col.iter().position(|&x| x == v).unwrap();
            let last = col.iter().rposition(|&x| x == v).unwrap();
            ok &= table.ranks[a][d] == (first + last + 2) as f64 / 2.0;
        }
    }
    for a in 0..algos {
        let ark = table.ranks[a].iter().sum::<f64>() / datasets as f64;
        ok &= (table.average_rank[a] - ark).abs() < 1e-12;
        let wins = (0..datasets).filter(|&d| values.iter().all(|r| r[d] <= values[a][d])).count();
        ok &= table.wins[a] == wins;
    }
    let cd = critical_difference(2, 8, 0.05).unwrap();
    Outcome::check(
        ok && (cd - 0.693).abs() <= 0.001,
        format!(
            "21 algorithms x 26 datasets with ties: ranks match sort oracle: {ok}; CD(k=2, N=8) = {cd:.4}"
        ),
    )
}

fn repo_data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let odds = std::env::var_os("COMADOUT_ODDS_DIR").map(PathBuf::from);
    let dir = odds.clone().unwrap_or_else(repo_data);
    let checks: [(&str, Scoring, Metric, f64); 3] = [
        ("wine", Scoring::PlusKe, Metric::Auroc, 0.903361),
        ("boston", Scoring::Plus, Metric::Ap, 0.970598),
        ("wbc", Scoring::PlusK, Metric::Auroc, 0.934374),
    ];
    let mut parts = Vec::new();
    let mut all_ok = true;
    for (name, scoring, metric, target) in checks {
        let path = dir.join(format!("{name}.csv"));
        let value = measure(&path, VariantId::comedian(scoring), metric);
        let ok = (value - target).abs() <= 0.05;
        all_ok &= ok;
        parts.push(format!(
            "{name}/{} {metric} {value:.4} vs {target} ({}{:.3})",
            VariantId::comedian(scoring),
            if ok { "ok, " } else { "off by " },
            value - target
        ));
    }
    let (fast, time) = within_time(Duration::from_secs(60), start);
    let source = if odds.is_some() { "supplied benchmark files" } else { "bundled reconstructions" };
    let detail = format!("{source}, ratio 1.0: {}; {time}", parts.join("; "));
    let status = match (all_ok && fast, odds.is_some()) {
        (true, _) => Status::Pass,
        (false, true) => Status::Fail,
        (false, false) => Status::Ungated,
    };
    Outcome { status, detail }
}

fn measure(path: &Path, variant: VariantId, metric: Metric) -> f64 {
    let ds =
        data::load_csv(path, &CsvOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let report = Model::fit(&ds.features, variant, 1.0).unwrap().score(&ds.features).unwrap();
    let ls = LabeledScores::new(&report.scores, &ds.labels).unwrap();
    match metric {
        Metric::Auroc => metrics::auroc(&ls).unwrap(),
        Metric::Ap => metrics::average_precision(&ls).unwrap(),
        _ => unreachable!("only AUROC and AP are spot-checked"),
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let datasets = ["wine", "glass", "wbc"]
        .iter()
        .map(|n| DatasetSpec::from_path(repo_data().join(format!("{n}.csv"))))
        .collect();
    let mut cfg = RunConfig::new(
        datasets,
        VariantId::comadout(),
        vec![Metric::Ap, Metric::Auroc, Metric::Auprc, Metric::PAtN],
    );
    cfg.component_ratios = vec![0.25, 1.0];
    let first = render_csv(&run_benchmark(&cfg, 1).unwrap());
    let second = render_csv(&run_benchmark(&cfg, 4).unwrap());
    let (fast, time) = within_time(Duration::from_secs(120), start);
    Outcome::check(
        first == second && fast,
        format!("serial vs 4-thread run: {} bytes each, identical: {}, {time}", first.len(), first == second),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let constant = Matrix::new(20, 3, vec![7.0; 60]).unwrap();
    let single = random_matrix(&mut rng, 30, 1, false);
    let base = random_matrix(&mut rng, 15, 4, false);
    let doubled: Vec<usize> = (0..15).flat_map(|i| [i, i]).collect();
    let duplicates = base.select_rows(&doubled).unwrap();
    // Third column is the sum of the first two and the fourth is constant,
    // so two eigenvalues vanish.
    let rank_deficient = Matrix::new(
        25,
        4,
        (0..25)
            .flat_map(|_| {
                let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                [a, b, a + b, 1.5]
            })
            .collect(),
    )
    .unwrap();
    let cases = [
        ("constant", &constant),
        ("single feature", &single),
        ("duplicate rows", &duplicates),
        ("zero eigenvalues", &rank_deficient),
    ];

    let mut problems = Vec::new();
    for (name, x) in cases {
        for variant in VariantId::all() {
            for ratio in [0.25, 1.0] {
                for softmax in [false, true] {
                    let fitted = Model::fit_with(x, variant, FitOptions { ratio, softmax_scoring: softmax });
                    let report = fitted.and_then(|m| m.score(x));
                    match report {
                        Ok(r) if r.scores.iter().all(|s| s.is_finite()) => {
                            if name == "constant" && r.labels.as_ref().is_some_and(|l| l.iter().any(|&o| o)) {
                                problems.push(format!("{name}/{variant}: constant sample labelled outlier"));
                            }
                        }
                        Ok(_) => problems.push(format!("{name}/{variant}/{ratio}: non-finite score")),
                        Err(e) => problems.push(format!("{name}/{variant}/{ratio}: {e}")),
                    }
                }
            }
        }
    }
    let detail = if problems.is_empty() {
        "4 degenerate inputs x 12 variants x 2 ratios x 2 scorings finite; constant data all inliers"
            .to_string()
    } else {
        problems.join("; ")
    };
    Outcome::check(problems.is_empty(), detail)
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("comedian oracle", criterion_1),
        ("eigen contract", criterion_2),
        ("robust leading axis", criterion_3),
        ("scoring oracles", criterion_4),
        ("metric oracles", criterion_5),
        ("rank aggregation", criterion_6),
        ("published numbers", criterion_7),
        ("determinism", criterion_8),
        ("degenerate inputs", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome { status: Status::Fail, detail: format!("panicked: {}", msg.unwrap_or_default()) }
        });
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Ungated => "FAIL (not gated: needs COMADOUT_ODDS_DIR)",
        };
        println!("criterion {} [{name}]: {tag}: {}", i + 1, outcome.detail);
    }
    if failed > 0 {
        println!("{failed} gated criteria failed");
        std::process::exit(1);
    }
}
