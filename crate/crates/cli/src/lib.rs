//! Command-line front end: synthetic data generation, training, evaluation,
//! repeated benchmarking and the statistical comparison of ARO and AIS.

pub mod args;
pub mod benchmark;
pub mod commands;
pub mod config;
pub mod output;

use anyhow::Context;

use args::{Cli, Command};
use config::{Overrides, RunConfig};

/// Resolves the configuration for `cli`: defaults, then the file, then flags.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let mut o = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        parallelism: cli.parallelism,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Generate(a) => o.generator = Some(&a.generator),
        Command::Train(a) => o.train = Some(&a.flags),
        Command::Evaluate(a) => o.scoring = Some(&a.scoring),
        Command::Benchmark(a) => {
            o.generator = Some(&a.generator);
            o.train = Some(&a.train);
            o.scoring = Some(&a.scoring);
            o.runs = a.runs;
            o.kw_groups = a.kw_groups;
            o.benchmark = true;
        }
        Command::Stats(_) => {}
    }
    cfg.apply(&o);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one invocation and writes its outputs. Nothing is written on error.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .context("starting the worker pool")?;
    let outputs = pool.install(|| -> anyhow::Result<output::Outputs> {
        Ok(match &cli.command {
            Command::Generate(_) => commands::generate(&cfg)?,
            Command::Train(a) => {
                let (out, report) = commands::train(&cfg, &a.train)?;
                for e in &report.entries {
                    println!(
                        "{}: {} detectors, final fitness {:.6}, {} iterations, {:.3}s",
                        e.algorithm, e.detector_count, e.stats.final_fitness, e.stats.iterations, e.train_time_s
                    );
                }
                out
            }
            Command::Evaluate(a) => {
                let (out, reports) =
                    commands::evaluate(&cfg, &a.detectors, &a.test, a.train.as_deref())?;
                for (alg, r) in &reports {
                    println!(
                        "{alg}: threshold {:.6}, sensitivity {}, specificity {}, cost {}, auc {:.6}",
                        r.threshold,
                        fmt_opt(r.sensitivity),
                        fmt_opt(r.specificity),
                        r.cost,
                        r.auc
                    );
                }
                out
            }
            Command::Benchmark(a) => {
                let (out, report) = benchmark::benchmark(&cfg, a.data.as_deref())?;
                for avg in &report.averages {
                    let get = |m| avg.best.get(&m).copied().flatten();
                    println!(
                        "{} average over {} splits: sensitivity {}, specificity {}, cost {}, auc {}, train {}s",
                        avg.algorithm,
                        report.splits.len(),
                        fmt_opt(get(benchmark::Metric::Sensitivity)),
                        fmt_opt(get(benchmark::Metric::Specificity)),
                        fmt_opt(get(benchmark::Metric::Cost)),
                        fmt_opt(get(benchmark::Metric::Auc)),
                        fmt_opt(get(benchmark::Metric::TrainTimeS)),
                    );
                }
                out
            }
            Command::Stats(a) => {
                let (out, s) = benchmark::stats(&a.report, a.kw_groups)?;
                match s.matches_embedded {
                    Some(true) => println!("recomputed tests match the report"),
                    Some(false) => println!("recomputed tests DIFFER from the report"),
                    None => println!("recomputed tests with {:?} grouping", s.kw_groups),
                }
                out
            }
        })
    })?;
    let written = outputs.commit(&cfg.out)?;
    log::info!("wrote {} files to {}", written.len(), cfg.out.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into())
}
