//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Every check compares the engine against an oracle written here, not
//! against the engine's own helpers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use alp_bench::data::openml::OpenMlClient;
use alp_bench::data::preprocess::FeatureModel;
use alp_bench::data::DatasetSource;
use alp_bench::data::{apply_preprocess, fit_preprocess, parse_arff, write_arff, Cell, Column, ColumnKind, RawTable};
use alp_bench::runner::{run_grid, CellOutcome, GridOptions, TableCache};
use alp_bench::store::GridSpec;
use alp_core::clock::FrozenClock;
use alp_core::dataset::{gaussian_classes, GaussianSpec};
use alp_core::eval::{aubc, heatmap, student_t_cdf, welch_t_test, win_matrix, BudgetCurve, ResultKey, ResultTable};
use alp_core::learners::{LearnerKind, LearnerSpec, MlpNetwork, NativeFitter};
use alp_core::pipeline::{run_alp, AlpSpec, Metric, RunStatus};
use alp_core::qs::{
    bald_score, dispatch, entropy_score, gumbel_power_select, margin_score, QueryContext, Strategy, StrategySpec,
};
use alp_core::rng::{derive_stream, RngStream};
use alp_core::setting::{resolve_setting, Scenario, SettingChoice};
use alp_core::split::split_labels;
use alp_core::Matrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

// ---------------------------------------------------------------- settings

fn settings_table() -> Outcome {
    let mut bad = Vec::new();
    for (name, i, b, r) in [
        ("small", 30, 200, 10),
        ("medium", 100, 1000, 50),
        ("large", 300, 10_000, 200),
    ] {
        for c in 2..=50 {
            let s = resolve_setting(name, c).unwrap();
            let want_iter = b / r;
            if (s.initial_labeled, s.total_budget, s.batch_size, s.max_iterations) != (i, b, r, want_iter)
                || s.test_fraction != 1.0 / 3.0
            {
                bad.push(format!("{name} C={c}"));
            }
        }
    }
    for c in 2..=50 {
        for (name, b, r) in [("small-dynamic", 100 * c, 5 * c), ("large-dynamic", 400 * c, 20 * c)] {
            let s = resolve_setting(name, c).unwrap();
            if (s.initial_labeled, s.total_budget, s.batch_size, s.max_iterations) != (10, b, r, 20) {
                bad.push(format!("{name} C={c}"));
            }
        }
    }
    outcome(bad.is_empty(), format!("5 templates x C=2..50, mismatches: {bad:?}"))
}

// ---------------------------------------------------------------- selectors

/// All ordered r-tuples of distinct indices below n.
fn tuples(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..r {
        let mut next = Vec::new();
        for t in &out {
            for i in 0..n {
                if !t.contains(&i) {
                    let mut u = t.clone();
                    u.push(i);
                    next.push(u);
                }
            }
        }
        out = next;
    }
    out
}

/// Exhaustive search for the tuple whose per-step keys are lexicographically
/// greatest; `key(prefix, i)` scores candidate `i` after `prefix`. Keys are
/// compared as (score, then lower index preferred).
fn brute_force<K: PartialOrd>(n: usize, r: usize, key: impl Fn(&[usize], usize) -> K) -> Vec<usize> {
    let mut best: Option<Vec<usize>> = None;
    for t in tuples(n, r) {
        let better = match &best {
            None => true,
            Some(b) => {
                let mut verdict = false;
                for step in 0..r {
                    let (kt, kb) = (key(&t[..step], t[step]), key(&b[..step], b[step]));
                    if kt > kb || (kt == kb && t[step] < b[step]) {
                        verdict = true;
                        break;
                    }
                    if kt < kb || t[step] != b[step] {
                        break;
                    }
                }
                verdict
            }
        };
        if better {
            best = Some(t);
        }
    }
    best.unwrap_or_default()
}

fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.ln();
        }
    }
    h
}

fn oracle_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in m.iter_mut().zip(r) {
            *a += v;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

fn random_row(rng: &mut RngStream, c: usize) -> Vec<f64> {
    if rng.below(5) == 0 {
        let mut row = vec![0.0; c];
        row[rng.below(c)] = 1.0;
        return row;
    }
    let w: Vec<f64> = (0..c).map(|_| rng.uniform() + 1e-3).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn selector_equivalence() -> Outcome {
    let mut rng = derive_stream(7, "acceptance-selectors", 0);
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for instance in 0..500 {
        let n = 1 + rng.below(12);
        let r = 1 + rng.below(3);
        let c = 2 + rng.below(3);
        let members = 2 + rng.below(3);
        // Rows are drawn from a few prototypes so that exact ties occur.
        let protos = 1 + rng.below(n);
        let proto_of: Vec<usize> = (0..n).map(|_| rng.below(protos)).collect();
        let proto_probs: Vec<Vec<f64>> = (0..protos).map(|_| random_row(&mut rng, c)).collect();
        let proto_committee: Vec<Vec<Vec<f64>>> = (0..protos)
            .map(|_| (0..members).map(|_| random_row(&mut rng, c)).collect())
            .collect();
        let probs_rows: Vec<Vec<f64>> = proto_of.iter().map(|&p| proto_probs[p].clone()).collect();
        let committee_rows: Vec<Vec<Vec<f64>>> = proto_of.iter().map(|&p| proto_committee[p].clone()).collect();
        let probs = Matrix::from_rows(&probs_rows, c);
        let committee: Vec<Matrix> = (0..members)
            .map(|m| {
                Matrix::from_rows(
                    &committee_rows.iter().map(|rows| rows[m].clone()).collect::<Vec<_>>(),
                    c,
                )
            })
            .collect();
        // Integer coordinates keep squared distances exact.
        let n_lab = 1 + rng.below(3);
        let lab_pts: Vec<Vec<f64>> = (0..n_lab)
            .map(|_| vec![rng.below(5) as f64, rng.below(5) as f64])
            .collect();
        let unl_pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.below(5) as f64, rng.below(5) as f64]).collect();
        let labeled_x = Matrix::from_rows(&lab_pts, 2);
        let unlabeled_x = Matrix::from_rows(&unl_pts, 2);
        let labeled_y = vec![0usize; n_lab];

        let oracle_scores: Vec<(Strategy, Vec<f64>)> = vec![
            (
                Strategy::Margin,
                probs_rows
                    .iter()
                    .map(|p| {
                        let mut s = p.clone();
                        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
                        -(s[0] - s[1])
                    })
                    .collect(),
            ),
            (
                Strategy::Entropy,
                probs_rows.iter().map(|p| oracle_entropy(p)).collect(),
            ),
            (
                Strategy::LeastConfident,
                probs_rows
                    .iter()
                    .map(|p| 1.0 - p.iter().cloned().fold(0.0, f64::max))
                    .collect(),
            ),
            (
                Strategy::MaxEntropy,
                committee_rows.iter().map(|m| oracle_entropy(&oracle_mean(m))).collect(),
            ),
            (
                Strategy::Bald,
                committee_rows
                    .iter()
                    .map(|m| {
                        oracle_entropy(&oracle_mean(m))
                            - m.iter().map(|r| oracle_entropy(r)).sum::<f64>() / m.len() as f64
                    })
                    .collect(),
            ),
            (
                Strategy::Qbc,
                committee_rows
                    .iter()
                    .map(|m| {
                        let votes: Vec<Vec<f64>> = m
                            .iter()
                            .map(|r| {
                                let mut best = 0;
                                for k in 1..c {
                                    if r[k] > r[best] {
                                        best = k;
                                    }
                                }
                                let mut v = vec![0.0; c];
                                v[best] = 1.0;
                                v
                            })
                            .collect();
                        oracle_entropy(&oracle_mean(&votes))
                    })
                    .collect(),
            ),
        ];

        let run = |strategy: Strategy| {
            let mut ctx = QueryContext {
                labeled_x: &labeled_x,
                labeled_y: &labeled_y,
                unlabeled_x: &unlabeled_x,
                probs: Some(&probs),
                embeddings_labeled: &labeled_x,
                embeddings_unlabeled: &unlabeled_x,
                committee: Some(&committee),
                batch_size: r,
                rng: derive_stream(instance as u64, "qs", 0),
            };
            dispatch(&StrategySpec::new(strategy), &mut ctx).unwrap().positions
        };
        for (strategy, scores) in &oracle_scores {
            let want = brute_force(n, r.min(n), |_, i| scores[i]);
            let got = run(*strategy);
            checked += 1;
            if got != want {
                mismatches.push(format!("#{instance} {strategy}: got {got:?} want {want:?}"));
            }
        }
        let sq = |a: &[f64], b: &[f64]| -> i64 { a.iter().zip(b).map(|(x, y)| ((x - y) * (x - y)) as i64).sum() };
        let want = brute_force(n, r.min(n), |prefix, i| {
            let to_lab = lab_pts.iter().map(|l| sq(&unl_pts[i], l));
            let to_picked = prefix.iter().map(|&j| sq(&unl_pts[i], &unl_pts[j]));
            to_lab.chain(to_picked).min().unwrap()
        });
        let got = run(Strategy::Coreset);
        checked += 1;
        if got != want {
            mismatches.push(format!("#{instance} coreset: got {got:?} want {want:?}"));
        }
    }
    mismatches.truncate(5);
    outcome(
        mismatches.is_empty(),
        format!("{checked} selections over 500 instances, first mismatches: {mismatches:?}"),
    )
}

// ---------------------------------------------------------------- scores

fn score_identities() -> Outcome {
    let mut worst = 0.0f64;
    for c in 2..=50usize {
        let u = vec![1.0 / c as f64; c];
        worst = worst.max((entropy_score(&u) - (c as f64).ln()).abs());
    }
    let margin_ok = (2..=50).all(|c| {
        let mut p = vec![0.0; c];
        p[c / 2] = 1.0;
        margin_score(&p) == 1.0
    });
    let mut bald_worst = 0.0f64;
    let mut rng = derive_stream(3, "acceptance-bald", 0);
    for _ in 0..200 {
        let c = 2 + rng.below(10);
        let row = random_row(&mut rng, c);
        let members: Vec<&[f64]> = vec![&row; 1 + rng.below(10)];
        bald_worst = bald_worst.max(bald_score(&members).abs());
    }
    outcome(
        worst <= 1e-12 && margin_ok && bald_worst <= 1e-12,
        format!("max |H(uniform)-ln C| {worst:.1e}, one-hot margin == 1: {margin_ok}, max |BALD(identical)| {bald_worst:.1e}"),
    )
}

// ---------------------------------------------------------------- gumbel

fn gumbel_frequency() -> Outcome {
    let mut rng = derive_stream(11, "acceptance-gumbel", 0);
    let draws = 10_000;
    let first = (0..draws)
        .filter(|_| gumbel_power_select(&[2.0, 1.0], 1, 1.0, &mut rng).0 == [0])
        .count();
    let f = first as f64 / draws as f64;
    outcome(
        (0.647..=0.687).contains(&f),
        format!("first position picked {f:.4} (window [0.647, 0.687])"),
    )
}

// ---------------------------------------------------------------- welch

#[derive(serde::Deserialize)]
struct WelchPair {
    a: Vec<f64>,
    b: Vec<f64>,
    p: f64,
}

#[derive(serde::Deserialize)]
struct WelchFixture {
    pairs: Vec<WelchPair>,
}

fn welch_oracle() -> Outcome {
    let text = std::fs::read_to_string(fixtures().join("welch_mpmath.json")).unwrap();
    let fx: WelchFixture = serde_json::from_str(&text).unwrap();
    let mut worst_p = 0.0f64;
    let mut worst_sym = 0.0f64;
    for pair in &fx.pairs {
        let ab = welch_t_test(&pair.a, &pair.b).unwrap();
        let ba = welch_t_test(&pair.b, &pair.a).unwrap();
        worst_p = worst_p.max((ab.p - pair.p).abs());
        worst_sym = worst_sym.max((ab.p - ba.p).abs()).max((ab.t + ba.t).abs());
    }
    let mut worst_cdf = 0.0f64;
    for dof in [0.5, 1.0, 1.7, 2.0, 3.3, 10.0, 57.0, 1e4] {
        worst_cdf = worst_cdf.max((student_t_cdf(0.0, dof) - 0.5).abs());
        for t in [0.3, 1.0, 2.5, 7.0] {
            worst_cdf = worst_cdf.max((student_t_cdf(t, dof) + student_t_cdf(-t, dof) - 1.0).abs());
        }
    }
    outcome(
        fx.pairs.len() == 100 && worst_p <= 1e-8 && worst_sym <= 1e-12 && worst_cdf <= 1e-12,
        format!(
            "{} pairs, max |p - quadrature| {worst_p:.1e}, symmetry {worst_sym:.1e}, CDF identities {worst_cdf:.1e}",
            fx.pairs.len()
        ),
    )
}

// ---------------------------------------------------------------- aubc

fn aubc_oracle() -> Outcome {
    let mut rng = derive_stream(5, "acceptance-aubc", 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = 2 + rng.below(30);
        let mut x = 10.0 * rng.uniform();
        let mut pts = Vec::with_capacity(k);
        for _ in 0..k {
            pts.push((x, rng.uniform()));
            x += 0.1 + 50.0 * rng.uniform();
        }
        let got = aubc(&BudgetCurve::new(pts.clone()).unwrap());
        // Midpoint Riemann sum of the interpolant on a dense uniform grid.
        let (x0, x1) = (pts[0].0, pts[k - 1].0);
        let m = 1_000_000;
        let h = (x1 - x0) / m as f64;
        let mut seg = 0;
        let mut sum = 0.0;
        for i in 0..m {
            let xm = x0 + (i as f64 + 0.5) * h;
            while seg + 2 < k && xm > pts[seg + 1].0 {
                seg += 1;
            }
            let (a, b) = (pts[seg], pts[seg + 1]);
            sum += a.1 + (b.1 - a.1) * (xm - a.0) / (b.0 - a.0);
        }
        worst = worst.max((got - sum * h / (x1 - x0)).abs());
    }
    let constant = aubc(&BudgetCurve::new(vec![(10.0, 0.734), (25.0, 0.734), (400.0, 0.734)]).unwrap());
    outcome(
        worst <= 1e-9 && constant == 0.734,
        format!("100 curves, max |trapezoid - Riemann| {worst:.1e}; constant 0.734 -> {constant}"),
    )
}

// ---------------------------------------------------------------- heatmap

fn table_of(entries: &[(&str, &str, &str, &[f64])]) -> ResultTable {
    entries
        .iter()
        .map(|(l, s, d, v)| (ResultKey::new(l, s, d), v.to_vec()))
        .collect()
}

fn heatmap_semantics() -> Outcome {
    let same: &[f64] = &[0.5, 0.6, 0.7];
    let t = table_of(&[
        // d1: identical samples everywhere; the lexicographically first cell
        // wins and nobody differs from it.
        ("a", "m", "d1", same),
        ("a", "r", "d1", same),
        ("b", "m", "d1", same),
        ("b", "r", "d1", same),
        // d2: disjoint ranges, b+m alone on top.
        ("a", "m", "d2", &[0.10, 0.11, 0.12]),
        ("a", "r", "d2", &[0.20, 0.21, 0.22]),
        ("b", "m", "d2", &[0.90, 0.91, 0.92]),
        ("b", "r", "d2", &[0.50, 0.51, 0.52]),
        // d3: a+r and b+r tie at the top, the m cells are far below.
        ("a", "m", "d3", &[0.10, 0.11, 0.12]),
        ("a", "r", "d3", &[0.80, 0.81, 0.82]),
        ("b", "m", "d3", &[0.20, 0.21, 0.22]),
        ("b", "r", "d3", &[0.80, 0.81, 0.82]),
    ]);
    let sig = heatmap(&t, true);
    let nosig = heatmap(&t, false);
    // Hand evaluation, rows a/b, columns m/r.
    let sig_ok = sig.counts == vec![vec![1, 2], vec![2, 2]];
    let nosig_ok = nosig.counts == vec![vec![1, 1], vec![1, 0]] && nosig.total() == 3;

    let mut rng = derive_stream(9, "acceptance-win", 0);
    let mut sums_ok = true;
    let mut win_ok = true;
    for _ in 0..200 {
        let strategies = 2 + rng.below(4);
        let datasets = 1 + rng.below(5);
        let mut table = ResultTable::new();
        for s in 0..strategies {
            for d in 0..datasets {
                let centre = rng.uniform();
                let samples = (0..2 + rng.below(4)).map(|_| centre + 0.05 * rng.gaussian()).collect();
                table.insert(ResultKey::new("l", &format!("s{s}"), &format!("d{d}")), samples);
            }
        }
        sums_ok &= heatmap(&table, false).total() == datasets;
        let w = win_matrix(&table, "l");
        for i in 0..strategies {
            win_ok &= w.wins[i][i] == 0.0;
            for j in 0..strategies {
                win_ok &= w.wins[i][j] + w.wins[j][i] <= 1.0 + 1e-12;
            }
        }
    }
    outcome(
        sig_ok && nosig_ok && sums_ok && win_ok,
        format!(
            "hand table sig {:?} nosig {:?}; no-sig sums to D: {sums_ok}; win diag 0 and W_ij+W_ji<=1: {win_ok}",
            sig.counts, nosig.counts
        ),
    )
}

// ---------------------------------------------------------------- mlp

fn mlp_gradient() -> Outcome {
    let mut rng = derive_stream(13, "acceptance-mlp", 0);
    let mut worst = 0.0f64;
    let mut kinks = 0;
    let mut networks = 0;
    while networks < 20 {
        let (d, h, c, n) = (1 + rng.below(4), 1 + rng.below(6), 2 + rng.below(3), 2 + rng.below(8));
        let mut net = MlpNetwork::random(d, h, c, &mut rng);
        for v in &mut net.params {
            *v += 0.1 * rng.gaussian();
        }
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gaussian()).collect());
        let y: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let rows: Vec<usize> = (0..n).collect();
        let eps = 1e-6;
        // A hidden pre-activation within reach of zero would make the central
        // difference straddle the ReLU kink; such draws are replaced.
        if straddles_kink(&net, &x, eps) {
            kinks += 1;
            continue;
        }
        networks += 1;
        let (_, grad) = net.loss_and_gradient(&x, &y, &rows);
        for (k, &analytic) in grad.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.params[k] += eps;
            minus.params[k] -= eps;
            let (lp, _) = plus.loss_and_gradient(&x, &y, &rows);
            let (lm, _) = minus.loss_and_gradient(&x, &y, &rows);
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    outcome(
        worst <= 1e-4,
        format!("20 networks, max relative error {worst:.1e} ({kinks} kink-straddling draws replaced)"),
    )
}

fn straddles_kink(net: &MlpNetwork, x: &Matrix, eps: f64) -> bool {
    let (d, h) = (net.inputs, net.hidden);
    for row in x.iter_rows() {
        for j in 0..h {
            let z: f64 = net.params[h * d + j] + (0..d).map(|i| net.params[j * d + i] * row[i]).sum::<f64>();
            let reach = eps * (1.0 + row.iter().map(|v| v.abs()).fold(0.0, f64::max));
            if z.abs() <= reach {
                return true;
            }
        }
    }
    false
}

// ---------------------------------------------------------------- determinism

fn store_contents(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end_determinism() -> Outcome {
    let ds = gaussian_classes(&GaussianSpec {
        n: 300,
        n_classes: 3,
        dims: 4,
        separation: 1.5,
        seed: 1,
    })
    .unwrap();
    let scenario = Scenario {
        dataset_ref: ds.source_id.clone(),
        setting: SettingChoice::Template("small-dynamic".into()),
        split_seed: 4,
        pipeline_seed: 5,
    };
    let mut twice_ok = true;
    for (kind, strategy) in [
        (LearnerKind::RandomForest, Strategy::PowerMargin),
        (LearnerKind::Logreg, Strategy::Bald),
        (LearnerKind::Mlp, Strategy::Clue),
        (LearnerKind::Knn, Strategy::Falcun),
    ] {
        let alp = AlpSpec::new(LearnerSpec::new(kind), StrategySpec::new(strategy)).unwrap();
        let a = run_alp(&scenario, &alp, &ds, &NativeFitter, &FrozenClock).unwrap();
        let b = run_alp(&scenario, &alp, &ds, &NativeFitter, &FrozenClock).unwrap();
        let ja = serde_json::to_vec(&a.without_wall_times()).unwrap();
        let jb = serde_json::to_vec(&b.without_wall_times()).unwrap();
        twice_ok &= a.status == RunStatus::Completed && ja == jb;
    }

    let grid = GridSpec {
        datasets: vec![
            "synthetic:gauss:n=200,c=2,d=2,sep=1,seed=3".into(),
            "synthetic:gauss:n=240,c=3,d=3,sep=1.5,seed=4".into(),
        ],
        settings: vec![SettingChoice::Template("small-dynamic".into())],
        learners: vec![
            LearnerSpec::new(LearnerKind::Gnb),
            LearnerSpec::new(LearnerKind::RandomForest),
        ],
        strategies: vec![
            StrategySpec::new(Strategy::Margin),
            StrategySpec::new(Strategy::Random),
            StrategySpec::new(Strategy::Qbc),
        ],
        seeds: vec![0, 1],
        committee_size: 4,
    };
    let run = |workers: usize| {
        let dir = tempfile::tempdir().unwrap();
        let tables = TableCache::new(DatasetSource::new(
            OpenMlClient::new(dir.path().join("cache")).offline(true),
        ));
        let root = dir.path().join("store");
        let summary = run_grid(
            &grid,
            &root,
            &tables,
            &GridOptions {
                workers,
                lease: Duration::from_secs(3600),
                fitter: &NativeFitter,
                clock: &FrozenClock,
                progress: &|_| {},
            },
        )
        .unwrap();
        let done = summary.count(|o| matches!(o, CellOutcome::Completed(_)));
        (done, store_contents(&root))
    };
    let (done1, one) = run(1);
    let (done4, four) = run(4);
    let cells = 2 * 2 * 3 * 2;
    outcome(
        twice_ok && done1 == cells && done4 == cells && one == four,
        format!(
            "repeat runs identical: {twice_ok}; grid {done1}/{cells} vs {done4}/{cells} completed, {} files, stores identical: {}",
            one.len(),
            one == four
        ),
    )
}

// ---------------------------------------------------------------- direction

fn mean_aubc(ds: &alp_core::Dataset, strategy: Strategy) -> f64 {
    let alp = AlpSpec::new(LearnerSpec::new(LearnerKind::RandomForest), StrategySpec::new(strategy)).unwrap();
    let mut total = 0.0;
    for seed in 0..10 {
        let scenario = Scenario {
            dataset_ref: ds.source_id.clone(),
            setting: SettingChoice::Template("small-dynamic".into()),
            split_seed: seed,
            pipeline_seed: seed,
        };
        let rec = run_alp(&scenario, &alp, ds, &NativeFitter, &FrozenClock).unwrap();
        total += rec.aubc(Metric::Accuracy).unwrap();
    }
    total / 10.0
}

fn directional_sanity() -> Outcome {
    let overlap = gaussian_classes(&GaussianSpec {
        n: 600,
        n_classes: 2,
        dims: 2,
        separation: 1.0,
        seed: 0,
    })
    .unwrap();
    let high = gaussian_classes(&GaussianSpec {
        n: 600,
        n_classes: 2,
        dims: 2,
        separation: 0.5,
        seed: 0,
    })
    .unwrap();
    let (m1, r1) = (
        mean_aubc(&overlap, Strategy::Margin),
        mean_aubc(&overlap, Strategy::Random),
    );
    let (m2, r2) = (mean_aubc(&high, Strategy::Margin), mean_aubc(&high, Strategy::Random));
    outcome(
        m1 - r1 >= 0.0 && m2 > r2,
        format!("sep 1.0: margin {m1:.4} vs random {r1:.4}; sep 0.5: margin {m2:.4} vs random {r2:.4}"),
    )
}

// ---------------------------------------------------------------- repair

fn class_repair() -> Outcome {
    let mut rng = derive_stream(17, "acceptance-repair", 0);
    let mut violations = 0;
    let mut unsatisfiable = 0;
    let mut repaired_runs = 0;
    let mut checked = 0;
    let mut trial = 0u64;
    while checked < 1000 {
        trial += 1;
        let c = 2 + rng.below(8);
        let n = 60 + rng.below(400);
        // One or two frequent classes, the rest with a handful of rows.
        let mut labels: Vec<usize> = (0..n).map(|_| rng.below(2.min(c))).collect();
        for class in 2..c {
            for _ in 0..1 + rng.below(4) {
                let pos = rng.below(n);
                labels[pos] = class;
            }
        }
        if (0..c).any(|k| !labels.contains(&k)) {
            labels[rng.below(n)] = (0..c).find(|k| !labels.contains(k)).unwrap();
        }
        let name = ["small", "small-dynamic", "small-dynamic-text"][rng.below(3)];
        let setting = resolve_setting(name, c).unwrap();
        let plan = match split_labels(&labels, c, &setting, trial) {
            Ok(p) => p,
            Err(_) => {
                unsatisfiable += 1;
                continue;
            }
        };
        checked += 1;
        repaired_runs += usize::from(plan.repaired > 0);
        for &i in &plan.train_indices {
            if !plan.initial_labeled_indices.iter().any(|&j| labels[j] == labels[i]) {
                violations += 1;
                break;
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{violations} violations over {checked} scenarios; {repaired_runs} needed repair; \
             {unsatisfiable} further draws rejected as unsatisfiable"
        ),
    )
}

// ---------------------------------------------------------------- arff

fn arff_and_preprocessing() -> Outcome {
    let mut roundtrip_ok = true;
    for name in ["mixed.arff", "openml/61.arff"] {
        let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
        let first = parse_arff(&text).unwrap();
        let second = parse_arff(&write_arff(&first)).unwrap();
        roundtrip_ok &= first == second;
    }
    let table = RawTable {
        relation: "t".into(),
        columns: vec![
            Column {
                name: "a".into(),
                kind: ColumnKind::Numeric,
                cells: vec![Cell::Number(1.0), Cell::Number(3.0), Cell::Missing],
            },
            Column {
                name: "c".into(),
                kind: ColumnKind::Nominal(vec!["x".into(), "y".into(), "z".into()]),
                cells: vec![Cell::Category(0), Cell::Category(0), Cell::Category(1)],
            },
            Column {
                name: "tie".into(),
                kind: ColumnKind::Nominal(vec!["x".into(), "y".into()]),
                cells: vec![Cell::Category(1), Cell::Category(0), Cell::Missing],
            },
            Column {
                name: "flat".into(),
                kind: ColumnKind::Numeric,
                cells: vec![Cell::Number(4.0), Cell::Number(4.0), Cell::Number(4.0)],
            },
            Column {
                name: "class".into(),
                kind: ColumnKind::Nominal(vec!["p".into(), "q".into()]),
                cells: vec![Cell::Category(0), Cell::Category(1), Cell::Category(0)],
            },
        ],
        target_column: Some("class".into()),
    };
    let model = fit_preprocess(&table, &[0, 1, 2]).unwrap();
    let mut ok = true;
    for f in &model.features {
        match f {
            FeatureModel::Numeric { name, mean, std, .. } if name == "a" => ok &= *mean == 2.0 && *std > 0.0,
            FeatureModel::Nominal { name, mode, .. } if name == "c" => ok &= *mode == 0,
            FeatureModel::Nominal { name, mode, .. } if name == "tie" => ok &= *mode == 0,
            _ => {}
        }
    }
    let x = apply_preprocess(&model, &table, &[0, 1, 2]).unwrap();
    // Columns: a, c=x, c=y, c=z, tie=x, tie=y, flat.
    let names = model.feature_names();
    let col = |n: &str| names.iter().position(|m| m == n).unwrap();
    ok &= x.get(2, col("a")) == 0.0; // imputed mean, centred
    ok &= x.get(2, col("tie=x")) == 1.0 && x.get(2, col("tie=y")) == 0.0; // imputed mode by declaration order
    ok &= (0..3).all(|i| x.get(i, col("flat")) == 0.0);
    ok &= x.get(0, col("c=x")) == 1.0 && x.get(2, col("c=y")) == 1.0;

    // Fit on the first two rows only: z is never seen and y is unseen too.
    let partial = fit_preprocess(&table, &[0, 1]).unwrap();
    let xp = apply_preprocess(&partial, &table, &[2]).unwrap();
    let pn = partial.feature_names();
    let block: Vec<f64> = pn
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with("c="))
        .map(|(j, _)| xp.get(0, j))
        .collect();
    ok &= block.iter().all(|&v| v == 0.0);

    // Fit mean 2, population std 1: value 3 maps to 1.
    let z_table = RawTable {
        relation: "z".into(),
        columns: vec![
            Column {
                name: "v".into(),
                kind: ColumnKind::Numeric,
                cells: vec![Cell::Number(1.0), Cell::Number(3.0), Cell::Number(3.0)],
            },
            Column {
                name: "class".into(),
                kind: ColumnKind::Nominal(vec!["p".into(), "q".into()]),
                cells: vec![Cell::Category(0), Cell::Category(1), Cell::Category(0)],
            },
        ],
        target_column: None,
    };
    let zm = fit_preprocess(&z_table, &[0, 1]).unwrap();
    ok &= apply_preprocess(&zm, &z_table, &[2]).unwrap().get(0, 0) == 1.0;

    outcome(
        roundtrip_ok && ok,
        format!("round-trip identity on 2 fixtures: {roundtrip_ok}; imputation/one-hot/z-score examples: {ok}"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("settings table", Duration::from_secs(1), settings_table),
        (
            "selector oracle equivalence",
            Duration::from_secs(30),
            selector_equivalence,
        ),
        ("score identities", Duration::from_secs(5), score_identities),
        ("gumbel power sampling", Duration::from_secs(5), gumbel_frequency),
        ("welch t-test", Duration::from_secs(10), welch_oracle),
        ("aubc", Duration::from_secs(30), aubc_oracle),
        (
            "heatmap / win-matrix semantics",
            Duration::from_secs(10),
            heatmap_semantics,
        ),
        ("mlp gradient check", Duration::from_secs(30), mlp_gradient),
        (
            "end-to-end determinism",
            Duration::from_secs(120),
            end_to_end_determinism,
        ),
        ("directional sanity", Duration::from_secs(300), directional_sanity),
        ("class-coverage repair", Duration::from_secs(30), class_repair),
        (
            "arff round-trip and preprocessing",
            Duration::from_secs(10),
            arff_and_preprocessing,
        ),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        failed += usize::from(!pass);
        println!(
            "{} {name}: {} [{:.2}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {failed} failing criteria");
    if failed > 0 {
        std::process::exit(1);
    }
}
