//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if
//! any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hcon::bounds::{feature_dimension_g_max, BoundInputs, BoundReport};
use hcon::data::{synth_planted, Dataset, SynthConfig};
use hcon::diagnostics::{fd_gradient, near_kink, relative_error};
use hcon::experiments::{
    build_context, gap_experiment, normalization_comparison, perturb, spearman, stability_instance,
    stability_trial, ExperimentConfig, SplitSpec, StabilityReport,
};
use hcon::trainer::{draw_randomization, init_params, paired_train, PairedChecks, SgdConfig};
use hcon::{
    seeds, Activation, FeatureMatrix, Hypergraph, IncidenceScale, Loss, NormalizedIncidence, RegularityConstants,
    Theta, VertexContext,
};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use sha2::{Digest, Sha256};

const SQ: Loss = Loss::Squared { y_min: 0.0, y_max: 1.0 };

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/planted200.hgd.json")
}

fn planted() -> Dataset {
    Dataset::load(fixture_path()).expect("planted fixture loads")
}

fn random_hypergraph(r: &mut impl Rng, n: usize, m: usize, max_size: usize) -> Hypergraph {
    let mut edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let k = r.random_range(1..=max_size.min(n));
            sample(r, n, k).into_vec()
        })
        .collect();
    let mut covered = vec![false; n];
    edges.iter().flatten().for_each(|&v| covered[v] = true);
    for v in (0..n).filter(|&v| !covered[v]) {
        let j = r.random_range(0..m);
        edges[j].push(v);
    }
    Hypergraph::from_edge_lists(&edges, n).expect("covered hypergraph")
}

fn random_features(r: &mut impl Rng, rows: usize, cols: usize) -> FeatureMatrix {
    let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    FeatureMatrix::from_rows(&data, cols).unwrap()
}

fn dense_normalized(hg: &Hypergraph) -> DMatrix<f64> {
    let d = hg.degrees();
    let mut h = DMatrix::zeros(hg.n_vertices(), hg.n_edges());
    for (j, e) in hg.edges().iter().enumerate() {
        for &v in e {
            h[(v, j)] = 1.0 / ((d.vertex[v] * d.edge[j]) as f64).sqrt();
        }
    }
    h
}

fn spectral_contract() -> Outcome {
    let mut r = seeds::rng(101);
    let (mut worst_dev, mut worst_oracle, mut dense) = (0.0f64, 0.0f64, 0);
    let mut failures = Vec::new();
    for k in 0..100 {
        let n = r.random_range(2..=200);
        let m = r.random_range(1..=n.min(120));
        let hg = random_hypergraph(&mut r, n, m, 8);
        let mu = NormalizedIncidence::new(&hg, IncidenceScale::Normalized).spectral_norm_default().unwrap();
        worst_dev = worst_dev.max((mu - 1.0).abs());
        if mu > 1.0 + 1e-10 || (mu - 1.0).abs() > 1e-8 {
            failures.push(format!("instance {k}: mu = {mu}"));
        }
        if n <= 50 {
            dense += 1;
            let oracle = dense_normalized(&hg).svd(false, false).singular_values.max();
            let diff = (mu - oracle).abs();
            worst_oracle = worst_oracle.max(diff);
            if diff > 1e-8 {
                failures.push(format!("instance {k}: oracle {oracle} vs {mu}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "100 hypergraphs, max |mu - 1| = {worst_dev:.2e}, {dense} dense checks with max diff {worst_oracle:.2e}{}",
            failures.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let acts = [
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Elu,
        Activation::SmoothedRelu { epsilon: 0.5 },
    ];
    let losses = [Loss::ClippedBce { clip: 0.05 }, SQ];
    let mut r = seeds::rng(202);
    let (mut worst, mut checks, mut resampled) = (0.0f64, 0usize, 0usize);
    for _ in 0..50 {
        let n = r.random_range(5..=60);
        let m = r.random_range(2..=40);
        let hg = random_hypergraph(&mut r, n, m, 6);
        let (fv, fe) = (r.random_range(1..=6), r.random_range(1..=6));
        let xv = random_features(&mut r, n, fv).column_normalize().unwrap();
        let xe = random_features(&mut r, m, fe).column_normalize().unwrap();
        let alpha = r.random_range(0.0..=1.0);
        let ctx = VertexContext::build(&NormalizedIncidence::new(&hg, IncidenceScale::Normalized), &xv, &xe, alpha)
            .unwrap();
        for act in acts {
            for loss in losses {
                let y: f64 = r.random_range(0.0..=1.0);
                let (theta, v) = loop {
                    let v = r.random_range(0..n);
                    let data = (0..fv + fe).map(|_| r.random_range(-2.0..2.0)).collect();
                    let theta = Theta::from_vec(fv, fe, 1, data).unwrap();
                    if !near_kink(&ctx, &theta, v, act, loss, 1e-3).unwrap() {
                        break (theta, v);
                    }
                    resampled += 1;
                };
                let g = ctx.grad(&theta, v, act, loss, y).unwrap();
                let fd = fd_gradient(&ctx, &theta, v, act, loss, y, 1e-5).unwrap();
                worst = worst.max(relative_error(&g, &fd, 1e-10));
                checks += 1;
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("{checks} gradient checks on 50 instances, worst relative error {worst:.2e}, {resampled} kink resamples"),
    )
}

fn gradient_inequality_checks() -> Outcome {
    let ds = planted();
    let ctx = build_context(&ds, 0.5, IncidenceScale::Normalized).unwrap();
    let combos = [(Activation::Sigmoid, SQ), (Activation::Tanh, Loss::Squared { y_min: -1.0, y_max: 1.0 })];
    let mut total = PairedChecks::default();
    for k in 0..50u64 {
        let (act, loss) = combos[k as usize % 2];
        let eta = [0.01, 0.05][(k as usize / 2) % 2];
        let inst = stability_instance(&ds, 100, 1, k).unwrap();
        let s_prime = perturb(&inst.train, inst.i_star, inst.replacement).unwrap();
        let cfg = SgdConfig { eta, iterations: 250, ..Default::default() };
        let theta0 = init_params(ctx.vertex_dim(), ctx.edge_dim(), 1, seeds::derive(k, seeds::Stream::Init, 0), 0.1)
            .unwrap();
        let a = draw_randomization(100, 250, seeds::derive(k, seeds::Stream::Order, 0)).unwrap();
        let run = paired_train(&ctx, &theta0, &inst.train, &s_prime, &a, &cfg, act, loss).unwrap();
        total.merge(&run.checks);
    }
    let ok = total.same_sample_checks >= 10_000
        && total.same_sample_violations == 0
        && total.different_sample_violations == 0
        && total.grad_norm_violations == 0;
    outcome(
        ok,
        format!(
            "{} paired steps from 50 runs: same-sample {}/{} violations (worst excess {:.2e}), \
             different-sample {}/{} violations, gradient-norm violations {}",
            total.steps,
            total.same_sample_violations,
            total.same_sample_checks,
            total.same_sample_worst_excess,
            total.different_sample_violations,
            total.different_sample_checks,
            total.grad_norm_violations
        ),
    )
}

fn stability_setting() -> StabilityReport {
    let ds = planted();
    let ctx = build_context(&ds, 0.5, IncidenceScale::Normalized).unwrap();
    let inst = stability_instance(&ds, 100, 50, 0).unwrap();
    let cfg = ExperimentConfig { eta: 0.01, iterations: 200, trials: 20, ..Default::default() };
    stability_trial(&ctx, &inst, &cfg, Activation::Sigmoid, SQ).unwrap()
}

fn drift_criterion(rep: &StabilityReport, elapsed: Duration) -> Outcome {
    let ok = rep.mean_final_delta <= rep.drift_bound
        && rep.checks.recursion_violations == 0
        && elapsed < Duration::from_secs(120);
    outcome(
        ok,
        format!(
            "mean ||dtheta_T|| = {:.3e} <= kappa0/n = {:.3e}; recursion violations {} over {} steps; {:.1}s",
            rep.mean_final_delta,
            rep.drift_bound,
            rep.checks.recursion_violations,
            rep.checks.steps,
            elapsed.as_secs_f64()
        ),
    )
}

fn uniform_stability(rep: &StabilityReport) -> Outcome {
    outcome(
        rep.empirical <= rep.stability_bound && rep.per_probe.len() == 50 && rep.trials == 20,
        format!(
            "max over 50 probes |E_A[l - l']| = {:.3e} <= kappa/n = {:.3e}",
            rep.empirical, rep.stability_bound
        ),
    )
}

fn gap_config(seed: u64) -> (SplitSpec, ExperimentConfig) {
    (
        SplitSpec { split_seed: seed, ..Default::default() },
        ExperimentConfig { iterations: 50_000, trials: 10, master_seed: seed, ..Default::default() },
    )
}

fn gap_trend() -> Outcome {
    let ds = planted();
    let (split, cfg) = gap_config(0);
    let recs = gap_experiment(&ds, &split, &[0.5], &[0.01], &cfg, Activation::Sigmoid, SQ).unwrap();
    let ns: Vec<f64> = recs.iter().map(|r| r.n as f64).collect();
    let gaps: Vec<f64> = recs.iter().map(|r| r.gap_mean).collect();
    let rho = spearman(&ns, &gaps);
    let below = recs.iter().filter(|r| r.theoretical_bound.is_finite()).all(|r| r.theoretical_bound >= r.gap_mean);
    let failed: usize = recs.iter().map(|r| r.failed_trials).sum();
    outcome(
        rho <= -0.8 && below && failed == 0,
        format!(
            "n = {ns:?}, gap = [{}], spearman {rho:.3}, every finite bound >= gap: {below}, failed trials {failed}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn eta_trend() -> Outcome {
    let ds = planted();
    let etas = [0.005, 0.01, 0.02];
    let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let seeds_n = 10;
    for seed in 0..seeds_n {
        let (split, cfg) = gap_config(seed);
        let recs = gap_experiment(&ds, &split, &[0.5], &etas, &cfg, Activation::Sigmoid, SQ).unwrap();
        for (k, r) in recs.iter().enumerate() {
            let (e, f) = (k / split.train_fractions.len(), k % split.train_fractions.len());
            *sums.entry((f, e)).or_default() += r.gap_mean / seeds_n as f64;
        }
    }
    let fractions = SplitSpec::default().train_fractions.len();
    let mut monotone = 0;
    let mut rows = Vec::new();
    for f in 0..fractions {
        let g: Vec<f64> = (0..etas.len()).map(|e| sums[&(f, e)]).collect();
        if g.windows(2).all(|w| w[0] <= w[1]) {
            monotone += 1;
        }
        rows.push(format!("[{}]", g.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")));
    }
    outcome(
        monotone >= 4,
        format!("gap nondecreasing in eta for {monotone}/{fractions} train fractions; per fraction {}", rows.join(" ")),
    )
}

fn normalization_trend() -> Outcome {
    let ds = planted();
    let split = SplitSpec { train_fractions: vec![0.5], ..Default::default() };
    let cfg = ExperimentConfig { epochs: 200, trials: 10, ..Default::default() };
    let cmp = normalization_comparison(&ds, &split, &cfg, Activation::Sigmoid, SQ).unwrap();
    let (gn, gr) = (cmp.normalized.final_gap(), cmp.raw.final_gap());
    let ok = gn <= gr
        && cmp.raw.mu >= cmp.normalized.mu
        && cmp.raw.theoretical_bound >= cmp.normalized.theoretical_bound;
    outcome(
        ok,
        format!(
            "final gap normalized {gn:.4e} vs raw {gr:.4e}; mu {:.4} vs {:.4}; bound {:.3e} vs {:.3e}",
            cmp.normalized.mu, cmp.raw.mu, cmp.normalized.theoretical_bound, cmp.raw.theoretical_bound
        ),
    )
}

fn size_independence() -> Outcome {
    let bound_for = |n: usize| {
        let ds = synth_planted(&SynthConfig { n, m: 3 * n / 4, seed: 9, ..Default::default() }).unwrap().dataset;
        assert!(ds.vertex_features().is_normalized() && ds.edge_features().is_normalized());
        let ctx = build_context(&ds, 0.5, IncidenceScale::Normalized).unwrap();
        let g = feature_dimension_g_max(ctx.mu(), 0.5, ctx.vertex_dim(), ctx.edge_dim());
        let rep = BoundReport::compute(BoundInputs {
            constants: RegularityConstants::new(Activation::Sigmoid, SQ),
            g_max: g,
            eta: 0.01,
            iterations: 200,
            n: 50,
            delta: 0.05,
        })
        .unwrap();
        (rep.gap_bound, ctx.vertex_dim(), ctx.edge_dim())
    };
    let (small, fv1, fe1) = bound_for(100);
    let (large, fv2, fe2) = bound_for(1000);
    let rel = (small - large).abs() / small.abs().max(large.abs());
    outcome(
        rel <= 1e-6 && (fv1, fe1) == (fv2, fe2),
        format!("N = 100: {small:.10e}, N = 1000: {large:.10e}, relative difference {rel:.2e} (F_V = {fv1}, F_E = {fe1})"),
    )
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                let digest = Sha256::digest(fs::read(&p).unwrap());
                out.insert(rel, digest.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let content = work.path().join("toy.content");
    let cites = work.path().join("toy.cites");
    fs::write(&content, "p1 1 0 A\np2 0 1 B\np3 1 1 A\np4 0 2 B\n").unwrap();
    fs::write(&cites, "p2 p1\np3 p1\np3 p2\np4 p2\np1 p3\np4 p3\n").unwrap();
    let fixture = fixture_path().display().to_string();
    let ds = ["--dataset", fixture.as_str()];
    let content_s = content.display().to_string();
    let cites_s = cites.display().to_string();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("bounds", vec!["bounds"]),
        ("train", [&["train"][..], &ds].concat()),
        ("stability", [&["stability", "--trials", "5", "--probes", "10"][..], &ds].concat()),
        (
            "gap-sweep",
            [&["gap-sweep", "--iterations", "2000", "--trials", "4", "--etas", "0.01,0.02"][..], &ds].concat(),
        ),
        ("epochs", [&["epochs", "--epochs", "5", "--trials", "3"][..], &ds].concat()),
        ("norm-compare", [&["norm-compare", "--epochs", "5", "--trials", "3"][..], &ds].concat()),
        ("synth", vec!["synth", "--synth-n", "60", "--synth-m", "60"]),
        (
            "ingest",
            vec!["ingest", "--content", content_s.as_str(), "--cites", cites_s.as_str(), "--positive-class", "A"],
        ),
        ("verify", [&["verify"][..], &ds].concat()),
    ];
    let mut problems = Vec::new();
    let mut files = 0;
    for (name, args) in &commands {
        let mut hashes = Vec::new();
        for (run, jobs) in [(0, "1"), (1, "4")] {
            let out = work.path().join(format!("{name}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_hcon"))
                .args(args)
                .args(["--jobs", jobs, "--out-dir"])
                .arg(&out)
                .output()
                .unwrap();
            let code = status.status.code();
            if !matches!(code, Some(0) | Some(2)) {
                problems.push(format!("{name} exited with {code:?}: {}", String::from_utf8_lossy(&status.stderr)));
            }
            hashes.push(if out.exists() { hash_dir(&out) } else { BTreeMap::new() });
        }
        if hashes[0].is_empty() {
            problems.push(format!("{name} wrote no files"));
        }
        if hashes[0] != hashes[1] {
            problems.push(format!("{name} outputs differ between runs"));
        }
        files += hashes[0].len();
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} commands run twice (1 and 4 threads), {files} files compared by SHA-256{}",
            commands.len(),
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

type Row = (usize, &'static str, Outcome, Duration);

fn timed(id: usize, name: &'static str, limit: Option<u64>, f: impl FnOnce() -> Outcome) -> Row {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(secs) = limit {
        if elapsed > Duration::from_secs(secs) {
            o.passed = false;
            o.detail.push_str(&format!("; runtime {:.1}s exceeds {secs}s", elapsed.as_secs_f64()));
        }
    }
    (id, name, o, elapsed)
}

fn main() {
    let mut results = vec![
        timed(1, "spectral contract", Some(10), spectral_contract),
        timed(2, "gradient correctness", Some(30), gradient_correctness),
        timed(3, "per-step gradient inequalities", None, gradient_inequality_checks),
    ];

    let start = Instant::now();
    let rep = stability_setting();
    let elapsed = start.elapsed();
    results.push((4, "parameter drift", drift_criterion(&rep, elapsed), elapsed));
    results.push((5, "uniform stability", uniform_stability(&rep), elapsed));

    results.push(timed(6, "gap decreases with n", Some(300), gap_trend));
    results.push(timed(7, "gap grows with eta", None, eta_trend));
    results.push(timed(8, "normalization lowers the gap", None, normalization_trend));
    results.push(timed(9, "bound independent of graph size", None, size_independence));
    results.push(timed(10, "CLI determinism", None, cli_determinism));

    let mut failed = 0;
    for (id, name, o, elapsed) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!("{tag} criterion {id} ({name}, {:.1}s): {}", elapsed.as_secs_f64(), o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
