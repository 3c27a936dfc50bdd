use anyhow::{anyhow, Context};
use hcon::bounds::{BoundInputs, BoundReport};
use hcon::data::{
    ingest_citation_files, plot_script, render_csv, synth_planted, CsvRecord, Dataset, IsolatedPolicy, Metadata,
};
use hcon::diagnostics::{fd_gradient, near_kink, relative_error};
use hcon::experiments::{
    build_context, epoch_trace_experiment, gap_experiment, normalization_comparison, stability_instance,
    stability_trial, trial_seeds, EpochReport, StabilityReport,
};
use hcon::seeds::{self, Stream};
use hcon::trainer::{draw_randomization, init_params, sgd_train};
use hcon::{IncidenceScale, NormalizedIncidence, RegularityConstants};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::Outputs;
use crate::{Cli, Command};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Warnings,
}

impl Status {
    fn warn_if(self, cond: bool) -> Self {
        if cond {
            Status::Warnings
        } else {
            self
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = cli.config.resolve()?;
    let mut out = Outputs::new(&cli.out_dir);
    let result = match &cli.command {
        Command::Bounds => bounds(&cfg, &mut out),
        Command::Train => train(&cfg, &mut out),
        Command::Stability => stability(&cfg, &mut out),
        Command::GapSweep => gap_sweep(&cfg, &mut out),
        Command::Epochs => epochs(&cfg, &mut out),
        Command::NormCompare => norm_compare(&cfg, &mut out),
        Command::Synth { output } => synth(&cfg, output.as_deref(), &mut out),
        Command::Ingest {
            content,
            cites,
            positive_class,
            keep_isolated,
            name,
            output,
        } => {
            let policy = if *keep_isolated {
                IsolatedPolicy::Error
            } else {
                IsolatedPolicy::Drop
            };
            let ds = ingest_citation_files(content, cites, positive_class, policy, name)?;
            let path = output.clone().unwrap_or_else(|| format!("{name}.hgd.json").into());
            write_dataset(&ds, &path, &mut out)
        }
        Command::Verify { fault_g_max_scale } => verify(&cfg, *fault_g_max_scale, &mut out),
    };
    match result {
        Ok(s) => {
            out.commit();
            Ok(s)
        }
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

fn metadata(cfg: &RunConfig) -> anyhow::Result<Metadata> {
    Ok(Metadata::standard(cfg.master_seed, cfg)?)
}

fn fmt(x: f64) -> String {
    if x.is_finite() && x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.6e}")
    } else {
        format!("{x:.6}")
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BoundsRow {
    mu: f64,
    g_max: f64,
    alpha: f64,
    eta: f64,
    iterations: u64,
    n: usize,
    delta: f64,
    c: f64,
    c_prime: f64,
    kappa0: f64,
    kappa: f64,
    drift_bound: f64,
    stability_bound: f64,
    perturbation_bound: f64,
    gap_bound: f64,
    overflow: bool,
}

impl CsvRecord for BoundsRow {
    const COLUMNS: &'static [&'static str] = &[
        "mu",
        "g_max",
        "alpha",
        "eta",
        "iterations",
        "n",
        "delta",
        "c",
        "c_prime",
        "kappa0",
        "kappa",
        "drift_bound",
        "stability_bound",
        "perturbation_bound",
        "gap_bound",
        "overflow",
    ];
}

fn bounds(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<Status> {
    let (act, loss) = (cfg.activation()?, cfg.loss()?);
    let (mu, g_max) = match cfg.g_max {
        Some(g) => (f64::NAN, g),
        None => {
            let ctx = build_context(&cfg.dataset()?, cfg.alpha, cfg.normalization)?;
            (ctx.mu(), ctx.g_max())
        }
    };
    let constants = RegularityConstants::new(act, loss);
    let r = BoundReport::compute(BoundInputs {
        constants,
        g_max,
        eta: cfg.eta,
        iterations: cfg.iterations as u64,
        n: cfg.train_size,
        delta: cfg.delta,
    })?;
    let rows = [
        ("activation", act.to_string()),
        ("loss", loss.to_string()),
        ("alpha_sigma", fmt(constants.alpha_sigma)),
        ("nu_sigma", fmt(constants.nu_sigma)),
        ("alpha_loss", fmt(constants.alpha_ell)),
        ("nu_loss", fmt(constants.nu_ell)),
        ("gamma_loss", fmt(constants.gamma_ell)),
        ("mu", if mu.is_nan() { "-".into() } else { fmt(mu) }),
        ("g_max", fmt(g_max)),
        ("C", fmt(r.c)),
        ("C'", fmt(r.c_prime)),
        ("kappa0", fmt(r.kappa0)),
        ("kappa", fmt(r.kappa)),
        ("kappa0/n", fmt(r.drift_bound)),
        ("kappa/n", fmt(r.stability_bound)),
        ("(2kappa+gamma)/n", fmt(r.perturbation_bound)),
        ("gap bound", fmt(r.gap_bound)),
    ];
    for (k, v) in rows {
        println!("{k:>18}  {v}");
    }
    let row = BoundsRow {
        mu,
        g_max,
        alpha: cfg.alpha,
        eta: cfg.eta,
        iterations: cfg.iterations as u64,
        n: cfg.train_size,
        delta: cfg.delta,
        c: r.c,
        c_prime: r.c_prime,
        kappa0: r.kappa0,
        kappa: r.kappa,
        drift_bound: r.drift_bound,
        stability_bound: r.stability_bound,
        perturbation_bound: r.perturbation_bound,
        gap_bound: r.gap_bound,
        overflow: r.overflow,
    };
    out.write("bounds.csv", &render_csv(&metadata(cfg)?, &[row])?)?;
    if r.overflow {
        log::warn!("bound overflowed to +inf");
    }
    Ok(Status::Clean.warn_if(r.overflow))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct TrainResult {
    n: usize,
    iterations: usize,
    train_loss: f64,
    test_loss: f64,
    gap: f64,
    mu: f64,
    g_max: f64,
    theta: Vec<f64>,
}

fn train(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<Status> {
    let (act, loss) = (cfg.activation()?, cfg.loss()?);
    let ds = cfg.dataset()?;
    let ctx = build_context(&ds, cfg.alpha, cfg.normalization)?;
    let split = cfg.single_split();
    let pool = ds.labeled_vertices();
    let (_, sizes) = split.sizes(pool.len())?;
    let sp = split.draw(&pool, 0)?;
    let train = ds.training_set(&sp.rest[..sizes[0]])?;
    let test: Vec<_> = sp.test.iter().map(|&v| ds.sample(v)).collect::<Result<_, _>>()?;
    let (init_seed, order_seed) = trial_seeds(cfg.master_seed, 0);
    let mut sgd = cfg.experiment()?.sgd(cfg.iterations);
    sgd.init_seed = init_seed;
    let theta0 = init_params(ctx.vertex_dim(), ctx.edge_dim(), 1, init_seed, cfg.init_scale)?;
    let order = draw_randomization(train.len(), cfg.iterations, order_seed)?;
    let theta = sgd_train(&ctx, &theta0, &train, &order, &sgd, act, loss)?.theta;
    let pairs = |s: &[hcon::trainer::Sample]| s.iter().map(|s| (s.vertex, s.label)).collect::<Vec<_>>();
    let train_loss = ctx.mean_loss(&theta, pairs(train.samples()), act, loss)?;
    let test_loss = ctx.mean_loss(&theta, pairs(&test), act, loss)?;
    println!(
        "n = {}  T = {}  train loss = {}  test loss = {}  gap = {}",
        train.len(),
        cfg.iterations,
        fmt(train_loss),
        fmt(test_loss),
        fmt(test_loss - train_loss)
    );
    let res = TrainResult {
        n: train.len(),
        iterations: cfg.iterations,
        train_loss,
        test_loss,
        gap: test_loss - train_loss,
        mu: ctx.mu(),
        g_max: ctx.g_max(),
        theta: theta.as_slice().to_vec(),
    };
    out.write_json("train.json", &metadata(cfg)?, &res)?;
    Ok(Status::Clean)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct StabilityRow {
    n: usize,
    trials: usize,
    iterations: usize,
    probes: usize,
    empirical: f64,
    stability_bound: f64,
    margin: f64,
    mean_final_delta: f64,
    drift_bound: f64,
    drift_margin: f64,
    same_sample_checks: usize,
    same_sample_violations: usize,
    different_sample_violations: usize,
    grad_norm_violations: usize,
    recursion_violations: usize,
}

impl CsvRecord for StabilityRow {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "trials",
        "iterations",
        "probes",
        "empirical",
        "stability_bound",
        "margin",
        "mean_final_delta",
        "drift_bound",
        "drift_margin",
        "same_sample_checks",
        "same_sample_violations",
        "different_sample_violations",
        "grad_norm_violations",
        "recursion_violations",
    ];
}

fn run_stability(cfg: &RunConfig, ctx: &hcon::VertexContext, ds: &Dataset) -> anyhow::Result<(StabilityReport, usize)> {
    let inst = stability_instance(ds, cfg.train_size, cfg.probes, cfg.master_seed)?;
    let rep = stability_trial(ctx, &inst, &cfg.experiment()?, cfg.activation()?, cfg.loss()?)?;
    Ok((rep, inst.probes.len()))
}

fn stability(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<Status> {
    let ds = cfg.dataset()?;
    let ctx = build_context(&ds, cfg.alpha, cfg.normalization)?;
    let (rep, probes) = run_stability(cfg, &ctx, &ds)?;
    println!(
        "empirical max |E_A[l - l']| = {}  kappa/n = {}  margin = {}",
        fmt(rep.empirical),
        fmt(rep.stability_bound),
        fmt(rep.margin())
    );
    println!(
        "mean ||dtheta_T|| = {}  kappa0/n = {}  margin = {}",
        fmt(rep.mean_final_delta),
        fmt(rep.drift_bound),
        fmt(rep.drift_margin())
    );
    println!("per-step check violations: {}", rep.checks.violations());
    let c = &rep.checks;
    let row = StabilityRow {
        n: rep.n,
        trials: rep.trials,
        iterations: rep.iterations,
        probes,
        empirical: rep.empirical,
        stability_bound: rep.stability_bound,
        margin: rep.margin(),
        mean_final_delta: rep.mean_final_delta,
        drift_bound: rep.drift_bound,
        drift_margin: rep.drift_margin(),
        same_sample_checks: c.same_sample_checks,
        same_sample_violations: c.same_sample_violations,
        different_sample_violations: c.different_sample_violations,
        grad_norm_violations: c.grad_norm_violations,
        recursion_violations: c.recursion_violations,
    };
    out.write("stability.csv", &render_csv(&metadata(cfg)?, &[row])?)?;
    let falsified = rep.margin() < 0.0 || rep.drift_margin() < 0.0 || c.violations() > 0;
    if falsified {
        log::error!("FALSIFIED: empirical stability exceeds its bound or a per-step check failed");
    }
    Ok(Status::Clean.warn_if(falsified || !rep.stability_bound.is_finite()))
}

// ---------------------------------------------------------------------------

fn gap_sweep(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<Status> {
    let ds = cfg.dataset()?;
    let recs = gap_experiment(
        &ds,
        &cfg.split(),
        &cfg.alpha_grid(),
        &cfg.eta_grid(),
        &cfg.experiment()?,
        cfg.activation()?,
        cfg.loss()?,
    )?;
    println!(
        "{:>6} {:>6} {:>8} {:>12} {:>12} {:>12} {:>6}",
        "n", "alpha", "eta", "gap_mean", "gap_std", "bound", "failed"
    );
    for r in &recs {
        println!(
            "{:>6} {:>6} {:>8} {:>12} {:>12} {:>12} {:>6}",
            r.n,
            r.alpha,
            r.eta,
            fmt(r.gap_mean),
            fmt(r.gap_std),
            fmt(r.theoretical_bound),
            r.failed_trials
        );
    }
    out.write("gap_sweep.csv", &render_csv(&metadata(cfg)?, &recs)?)?;
    out.write("gap_sweep.gp", &plot_script(&[("gap_sweep.csv", "generalization gap vs n")], &[]))?;
    let violations = recs.iter().filter(|r| r.violates_bound()).count();
    let failed: usize = recs.iter().map(|r| r.failed_trials).sum();
    let overflow = recs.iter().any(|r| !r.theoretical_bound.is_finite());
    if violations > 0 {
        log::error!("FALSIFIED: {violations} records exceed their gap bound");
    }
    if failed > 0 {
        log::warn!("{failed} diverged trials excluded");
    }
    if overflow {
        log::warn!("some gap bounds overflowed to +inf");
    }
    Ok(Status::Clean.warn_if(violations > 0 || failed > 0 || overflow))
}

// ---------------------------------------------------------------------------

fn trace_metadata(cfg: &RunConfig, rep: &EpochReport) -> anyhow::Result<Metadata> {
    let mut m = metadata(cfg)?;
    m.push("normalization", rep.normalization.as_str());
    m.push("n", rep.n.to_string());
    m.push("failed_trials", rep.failed_trials.to_string());
    m.push("theoretical_bound", rep.theoretical_bound.to_string());
    Ok(m)
}

fn report_trace(rep: &EpochReport) -> bool {
    let last = rep.traces.last().expect("at least one epoch");
    println!(
        "{:>10}: n = {}  final train = {}  test = {}  gap = {}  bound = {}  failed = {}",
        rep.normalization.as_str(),
        rep.n,
        fmt(last.train_loss),
        fmt(last.test_loss),
        fmt(rep.final_gap()),
        fmt(rep.theoretical_bound),
        rep.failed_trials
    );
    rep.failed_trials > 0 || !rep.theoretical_bound.is_finite()
}

fn epochs(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<Status> {
    let ds = cfg.dataset()?;
    let rep = epoch_trace_experiment(&ds, &cfg.single_split(), &cfg.experiment()?, cfg.activation()?, cfg.loss()?)?;
    let warn = report_trace(&rep);
    out.write("epochs.csv", &render_csv(&trace_metadata(cfg, &rep)?, &rep.traces)?)?;
    out.write("epochs.gp", &plot_script(&[], &[("epochs.csv", "loss per epoch")]))?;
    Ok(Status::Clean.warn_if(warn))
}

#[derive(Debug, Serialize, Deserialize)]
struct NormRow {
    normalization: IncidenceScale,
    n: usize,
    mu: f64,
    g_max: f64,
    kappa: f64,
    theoretical_bound: f64,
    final_train_loss: f64,
    final_test_loss: f64,
    final_gap: f64,
    failed_trials: usize,
}

impl CsvRecord for NormRow {
    const COLUMNS: &'static [&'static str] = &[
        "normalization",
        "n",
        "mu",
        "g_max",
        "kappa",
        "theoretical_bound",
        "final_train_loss",
        "final_test_loss",
        "final_gap",
        "failed_trials",
    ];
}

fn norm_row(rep: &EpochReport) -> NormRow {
    let last = rep.traces.last().expect("at least one epoch");
    NormRow {
        normalization: rep.normalization,
        n: rep.n,
        mu: rep.mu,
        g_max: rep.g_max,
        kappa: rep.kappa,
        theoretical_bound: rep.theoretical_bound,
        final_train_loss: last.train_loss,
        final_test_loss: last.test_loss,
        final_gap: rep.final_gap(),
        failed_trials: rep.failed_trials,
    }
}

fn norm_compare(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<Status> {
    let ds = cfg.dataset()?;
    let cmp = normalization_comparison(&ds, &cfg.single_split(), &cfg.experiment()?, cfg.activation()?, cfg.loss()?)?;
    let w1 = report_trace(&cmp.normalized);
    let w2 = report_trace(&cmp.raw);
    out.write(
        "epochs_normalized.csv",
        &render_csv(&trace_metadata(cfg, &cmp.normalized)?, &cmp.normalized.traces)?,
    )?;
    out.write("epochs_raw.csv", &render_csv(&trace_metadata(cfg, &cmp.raw)?, &cmp.raw.traces)?)?;
    out.write(
        "norm_compare.csv",
        &render_csv(&metadata(cfg)?, &[norm_row(&cmp.normalized), norm_row(&cmp.raw)])?,
    )?;
    out.write(
        "norm_compare.gp",
        &plot_script(
            &[],
            &[
                ("epochs_normalized.csv", "normalized incidence"),
                ("epochs_raw.csv", "raw incidence"),
            ],
        ),
    )?;
    Ok(Status::Clean.warn_if(w1 || w2))
}

// ---------------------------------------------------------------------------

fn write_dataset(ds: &Dataset, path: &std::path::Path, out: &mut Outputs) -> anyhow::Result<Status> {
    let h = ds.hypergraph();
    println!(
        "{}: {} vertices, {} hyperedges, {} incidences, {} labeled",
        ds.name,
        h.n_vertices(),
        h.n_edges(),
        h.incidence_count(),
        ds.labeled_vertices().len()
    );
    out.write(path, &ds.to_json()?)?;
    Ok(Status::Clean)
}

fn synth(cfg: &RunConfig, output: Option<&std::path::Path>, out: &mut Outputs) -> anyhow::Result<Status> {
    let p = synth_planted(&cfg.synth)?;
    println!("within-class incidence fraction = {}", fmt(p.within_class_fraction()));
    let path = output.map_or_else(|| "planted.hgd.json".into(), |p| p.to_path_buf());
    write_dataset(&p.dataset, &path, out)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    passed: bool,
    first_failure: Option<&'static str>,
    checks: Vec<Check>,
}

/// Finite-difference instances and the tolerance they must meet.
const FD_INSTANCES: usize = 20;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;

fn verify(cfg: &RunConfig, fault_scale: Option<f64>, out: &mut Outputs) -> anyhow::Result<Status> {
    let (act, loss) = (cfg.activation()?, cfg.loss()?);
    let ds = cfg.dataset()?;
    ds.check_labels(loss)?;
    if !loss.smooth_over(act) {
        log::warn!("{act} maps outside the smooth range of {loss}; the same-sample check may fail");
    }
    let mut ctx = build_context(&ds, cfg.alpha, cfg.normalization)?;
    if let Some(s) = fault_scale {
        log::warn!("fault injection: g_max scaled by {s}");
        ctx = ctx.clone().with_g_max(ctx.g_max() * s);
    }
    let mut checks = Vec::new();

    let mu = NormalizedIncidence::new(ds.hypergraph(), IncidenceScale::Normalized).spectral_norm_default()?;
    checks.push(Check {
        name: "spectral_norm",
        passed: mu <= 1.0 + 1e-10 && (mu - 1.0).abs() <= 1e-8,
        detail: format!("mu(normalized H) = {mu}"),
    });

    let pool = ds.labeled_vertices();
    let mut worst = 0.0f64;
    let mut done = 0usize;
    let mut k = 0u64;
    while done < FD_INSTANCES && k < 50 * FD_INSTANCES as u64 {
        let seed = seeds::derive(cfg.master_seed, Stream::Probe, 1000 + k);
        k += 1;
        let v = pool[seeds::rng(seed).random_range(0..pool.len())];
        let y = ds.label(v).expect("pool is labeled");
        let theta = init_params(ctx.vertex_dim(), ctx.edge_dim(), 1, seed, 1.0)?;
        if near_kink(&ctx, &theta, v, act, loss, 1e-4)? {
            continue;
        }
        let g = ctx.grad(&theta, v, act, loss, y)?;
        let fd = fd_gradient(&ctx, &theta, v, act, loss, y, FD_STEP)?;
        worst = worst.max(relative_error(&g, &fd, 1e-10));
        done += 1;
    }
    checks.push(Check {
        name: "gradient_fd",
        passed: done == FD_INSTANCES && worst <= FD_TOL,
        detail: format!("{done} instances, worst relative error {worst:e} (h = {FD_STEP})"),
    });

    let (rep, _) = run_stability(cfg, &ctx, &ds)?;
    let c = rep.checks;
    let max_row = (0..ctx.n_vertices()).map(|v| ctx.row_norm(v)).fold(0.0f64, f64::max);
    checks.push(Check {
        name: "grad_norm_bound",
        passed: max_row <= ctx.g_max() * (1.0 + 1e-12) && c.grad_norm_violations == 0,
        detail: format!(
            "max row norm {max_row} vs g_max {}; {} per-sample gradient violations",
            ctx.g_max(),
            c.grad_norm_violations
        ),
    });
    checks.push(Check {
        name: "same_sample_lipschitz",
        passed: c.same_sample_violations == 0,
        detail: format!("{} of {} steps violated", c.same_sample_violations, c.same_sample_checks),
    });
    checks.push(Check {
        name: "different_sample_bound",
        passed: c.different_sample_violations == 0,
        detail: format!("{} of {} steps violated", c.different_sample_violations, c.different_sample_checks),
    });
    checks.push(Check {
        name: "drift_recursion",
        passed: c.recursion_violations == 0,
        detail: format!("{} of {} steps violated", c.recursion_violations, c.steps),
    });
    checks.push(Check {
        name: "drift_bound",
        passed: rep.drift_margin() >= 0.0,
        detail: format!("mean ||dtheta_T|| {} vs kappa0/n {}", rep.mean_final_delta, rep.drift_bound),
    });
    checks.push(Check {
        name: "stability_bound",
        passed: rep.margin() >= 0.0,
        detail: format!("empirical {} vs kappa/n {}", rep.empirical, rep.stability_bound),
    });

    for ch in &checks {
        println!("{:>6}  {:<24} {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
    }
    let first_failure = checks.iter().find(|c| !c.passed).map(|c| c.name);
    let summary = VerifySummary {
        passed: first_failure.is_none(),
        first_failure,
        checks,
    };
    out.write_json("verify.json", &metadata(cfg)?, &summary)?;
    match first_failure {
        None => Ok(Status::Clean),
        Some(name) => {
            // keep the summary even though the command fails
            out.commit();
            Err(anyhow!("verification failed: {name}")).context("invariant suite")
        }
    }
}
