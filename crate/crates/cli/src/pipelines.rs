//! The pipelines behind the four subcommands.

use lazy_spectra::{
    build_cca_problem, check_algebra_lemmas, lazy_cca, lazy_ev, lazycca::CcaConfig,
    lazyev::default_eps_pca, lazyev::GenEvConfig, load_dataset, load_matrix_market,
    shift_invert::ScheduleMode, synth, DatasetFormat, Error, InnerBackend, Result,
};
use serde_json::{json, Value};

use crate::config::{
    BenchArgs, CcaArgs, Command, DataFormat, GenevArgs, Mode, RunBackend, ValidateArgs,
};
use crate::output;

/// Executes a subcommand, writing its artifact, and returns the artifact.
pub fn run(command: &Command) -> Result<Value> {
    match command {
        Command::Genev(args) => run_genev(args),
        Command::Cca(args) => run_cca(args),
        Command::Validate(args) => run_validate(args),
        Command::Bench(args) => {
            let rows = run_bench(args)?;
            let csv = bench_csv(&rows);
            match &args.out {
                Some(path) => std::fs::write(path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(json!({ "schema": output::SCHEMA, "command": "bench", "rows": rows.len() }))
        }
    }
}

/// Resolves the mode parameters, enforcing that exactly one of gap/eps is
/// given and matches the mode.
fn resolve_mode(mode: Mode, gap: Option<f64>, eps: Option<f64>) -> Result<(f64, f64)> {
    match mode {
        Mode::GapDependent => match (gap, eps) {
            (Some(g), None) => Ok((g, g)),
            _ => Err(Error::Value(
                "gap-dependent mode takes --gap (and not --eps)".into(),
            )),
        },
        Mode::GapFree => match (gap, eps) {
            (None, Some(e)) => Ok((e, e)),
            _ => Err(Error::Value(
                "gap-free mode takes --eps (and not --gap)".into(),
            )),
        },
    }
}

fn run_genev(args: &GenevArgs) -> Result<Value> {
    if args.backend == RunBackend::Svrg {
        return Err(Error::Value(
            "the svrg backend applies only to cca problems; use --backend cg".into(),
        ));
    }
    let a = load_matrix_market(&args.a)?;
    let b = load_matrix_market(&args.b)?;
    let (delta_default, eps) = resolve_mode(args.mode, args.gap, args.eps)?;
    let delta = args.delta.unwrap_or(delta_default);
    let eps_pca = args
        .eps_pca
        .unwrap_or_else(|| default_eps_pca(eps, delta, args.k));
    let cfg = GenEvConfig {
        k: args.k,
        delta,
        eps_pca,
        p: args.p,
        mode: ScheduleMode::Practical,
        seed: args.seed,
    };
    let result = lazy_ev(&a, &b, &cfg)?;
    let config = json!({
        "a": args.a, "b": args.b, "k": args.k,
        "mode": mode_name(args.mode), "gap": args.gap, "eps": args.eps,
        "delta": delta, "eps_pca": eps_pca, "p": args.p,
        "backend": "cg", "seed": args.seed, "deterministic": args.deterministic,
        "schedule": result.traces.first().map(|t| &t.schedule),
    });
    let artifact =
        output::genev_artifact(&result, config, args.out.as_deref(), args.deterministic)?;
    output::emit(&artifact, args.out.as_deref())?;
    Ok(artifact)
}

fn run_cca(args: &CcaArgs) -> Result<Value> {
    let format = match args.format {
        DataFormat::Csv => DatasetFormat::Csv,
        DataFormat::Binary => DatasetFormat::Binary,
    };
    let x = load_dataset(&args.x, format)?;
    let y = load_dataset(&args.y, format)?;
    let problem = build_cca_problem(x, y, args.gamma_x, args.gamma_y)?;
    let (delta_default, eps) = resolve_mode(args.mode, args.gap, args.eps)?;
    let delta = args.delta.unwrap_or(delta_default);
    let eps_pca = args
        .eps_pca
        .unwrap_or_else(|| default_eps_pca(eps, delta, args.k));
    let backend = match args.backend {
        RunBackend::Cg => InnerBackend::Nested,
        // The stochastic route is native for data-matrix problems.
        RunBackend::Auto | RunBackend::Svrg => InnerBackend::Stochastic,
    };
    let cfg = CcaConfig {
        k: args.k,
        delta,
        eps_pca,
        p: args.p,
        backend,
        mode: ScheduleMode::Practical,
        seed: args.seed,
    };
    let result = lazy_cca(&problem, &cfg)?;
    let config = json!({
        "x": args.x, "y": args.y, "gamma_x": args.gamma_x, "gamma_y": args.gamma_y,
        "k": args.k, "mode": mode_name(args.mode), "gap": args.gap, "eps": args.eps,
        "delta": delta, "eps_pca": eps_pca, "p": args.p,
        "backend": backend, "seed": args.seed, "deterministic": args.deterministic,
        "schedule": result.traces.first().map(|t| &t.schedule),
    });
    let artifact = output::cca_artifact(&result, config, args.out.as_deref(), args.deterministic)?;
    output::emit(&artifact, args.out.as_deref())?;
    Ok(artifact)
}

fn run_validate(args: &ValidateArgs) -> Result<Value> {
    let report = check_algebra_lemmas(args.samples, args.seed);
    let artifact = json!({
        "schema": output::SCHEMA,
        "command": "validate",
        "samples": args.samples,
        "seed": args.seed,
        "total_violations": report.total_violations(),
        "lemmas": report,
    });
    output::emit(&artifact, args.out.as_deref())?;
    Ok(artifact)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::GapDependent => "gap-dependent",
        Mode::GapFree => "gap-free",
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub gap: f64,
    pub trial: usize,
    pub seed: u64,
    pub inner_matvecs: u64,
    pub rounds: usize,
    pub wall_ms: u64,
    pub status: String,
}

/// One 1-GenEV extraction on a planted instance, run in the plain
/// solve-from-origin configuration so the matvec count reflects the
/// conditioning of every inner solve.
fn bench_trial(gap: f64, trial: usize, d: usize, seed: u64, deterministic: bool) -> BenchRow {
    use lazy_spectra::shift_invert::{appx_pca_pm, AppxPcaSchedule, ScheduleMode};
    use lazy_spectra::solvers::{SolveCounters, SparsePencil};
    use lazy_spectra::ImplicitBasis;

    let start = std::time::Instant::now();
    let spectrum = synth::spectrum_with_gap(d, 1, gap, seed);
    let (a, b, _) = synth::planted_genev(d, &spectrum, 3.0, seed);
    let outcome = (|| -> Result<(u64, usize)> {
        let pencil = SparsePencil::new(&a, &b)?;
        let eps_pca = default_eps_pca(0.1, gap, 1);
        let schedule = AppxPcaSchedule::for_pencil(
            &pencil,
            gap / 2.0,
            eps_pca,
            0.05,
            ScheduleMode::Practical,
        )?
        .with_cold_solves();
        let basis = ImplicitBasis::new(d);
        let counters = SolveCounters::new();
        let (_, _, trace) = appx_pca_pm(&pencil, &basis, &schedule, seed, &counters)?;
        Ok((counters.matvec_count(), trace.rounds.len()))
    })();
    let wall_ms = if deterministic {
        0
    } else {
        start.elapsed().as_millis() as u64
    };
    match outcome {
        Ok((inner_matvecs, rounds)) => BenchRow {
            gap,
            trial,
            seed,
            inner_matvecs,
            rounds,
            wall_ms,
            status: "ok".into(),
        },
        Err(e) => BenchRow {
            gap,
            trial,
            seed,
            inner_matvecs: 0,
            rounds: 0,
            wall_ms,
            status: format!("error:{}", error_slug(&e)),
        },
    }
}

fn error_slug(e: &Error) -> &'static str {
    match e.root() {
        Error::NonConvergence { .. } => "non-convergence",
        Error::Conditioning { .. } => "conditioning",
        Error::ScheduleExhausted { .. } => "schedule",
        Error::ResidualExhausted { .. } => "residual-exhausted",
        Error::Accuracy(_) => "accuracy",
        Error::Overflow(_) => "overflow",
        Error::Precondition(_) | Error::NotPositiveDefinite(_) => "precondition",
        _ => "input",
    }
}

/// Runs the gap sweep; trials run concurrently unless `deterministic` is
/// set, with identical per-trial seeding either way.
pub fn run_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.gaps.is_empty() {
        return Err(Error::Value("bench needs at least one gap".into()));
    }
    for &g in &args.gaps {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Value(format!("gap {g} outside (0, 1)")));
        }
    }
    let jobs: Vec<(f64, usize, u64)> = args
        .gaps
        .iter()
        .enumerate()
        .flat_map(|(gi, &gap)| {
            (0..args.trials).map(move |t| {
                let seed = args
                    .seed
                    .wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add((gi as u64) << 32)
                    .wrapping_add(t as u64);
                (gap, t, seed)
            })
        })
        .collect();

    let d = args.d;
    let deterministic = args.deterministic;
    let rows: Vec<BenchRow> = if deterministic {
        jobs.iter()
            .map(|&(gap, t, seed)| bench_trial(gap, t, d, seed, true))
            .collect()
    } else {
        let threads = std::env::var("LAZY_SPECTRA_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or_else(rayon::current_num_threads))
            .build()
            .map_err(|e| Error::Value(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter()
                .map(|&(gap, t, seed)| bench_trial(gap, t, d, seed, false))
                .collect()
        })
    };
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("gap,trial,seed,inner_matvecs,rounds,wall_ms,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.gap, r.trial, r.seed, r.inner_matvecs, r.rounds, r.wall_ms, r.status
        ));
    }
    out
}
