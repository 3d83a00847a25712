//! Command-line front end: data curation, evaluation, and reporting.
//!
//! Reports always land in files under `--out`; stdout carries a short
//! human-readable summary. Exit codes: 0 on success, 1 on a fatal error
//! (nothing useful written), 2 when the command finished and wrote its
//! outputs but some of the work failed or produced nothing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use f2s::config::PipelineConfig;
use f2s::corpus::{export_corpus, load_corpus, Language, ProblemSet};
use f2s::demo;
use f2s::gateway::{Gateway, HttpGateway, MockFixtures, MockGateway};
use f2s::pipeline::{
    self, cssim_batch, cssim_pair, load_translations, render_report, run_losses, Pipeline,
};

#[derive(Debug, Parser)]
#[command(
    name = "f2s",
    version,
    about = "Code-translation data curation and evaluation toolkit"
)]
struct Cli {
    /// TOML configuration file (environment variables still apply on top).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Force the offline mock model backend even when an endpoint is
    /// configured.
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DirectionArgs {
    /// Problem corpus (JSONL).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Source language tag (c, cpp, go, java, python).
    #[arg(long, value_name = "LANG", value_parser = parse_language)]
    src_lang: Language,
    /// Target language tag (c, cpp, go, java, python).
    #[arg(long, value_name = "LANG", value_parser = parse_language)]
    tgt_lang: Language,
    /// Output directory for datasets and reports.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus and write its canonical form.
    Ingest {
        /// Corpus to read (JSONL, one problem per line).
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Output directory for the canonical corpus.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Mine verified translation pairs into an instruction-tuning dataset.
    BuildFunctionData(DirectionArgs),
    /// Build the style-consensus positive/negative dataset.
    BuildStyleData(DirectionArgs),
    /// Score translated programs against corpus tests (computational
    /// accuracy).
    EvalCa {
        /// Problem corpus with tests (JSONL).
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Translations to evaluate (JSONL rows with problem_id + snippet).
        #[arg(long, value_name = "FILE")]
        translations: PathBuf,
        /// Output directory for the summary and table.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Measure style similarity between two files or a manifest of pairs.
    Cssim {
        /// First file of a single comparison.
        #[arg(long, value_name = "FILE", requires = "b", conflicts_with = "batch")]
        a: Option<PathBuf>,
        /// Second file of a single comparison.
        #[arg(long, value_name = "FILE", requires = "a", conflicts_with = "batch")]
        b: Option<PathBuf>,
        /// JSONL manifest of {pair_id, a, b} rows.
        #[arg(long, value_name = "FILE")]
        batch: Option<PathBuf>,
        /// Output directory for the batch table.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate the training losses for a request file.
    Losses {
        /// JSON request with pos_logprobs / neg_logprobs.
        #[arg(long, value_name = "FILE")]
        request: PathBuf,
        /// Also compare the analytic gradient against finite differences.
        #[arg(long)]
        grad_check: bool,
        /// Output directory for the loss report.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Render report.md from the report files already in a directory.
    Report {
        /// Directory holding the report JSONs.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Write a self-contained offline demo fixture (corpus, mock model
    /// fixtures, config, accuracy fixture, manifest).
    GenDemo {
        /// Directory to write the demo into.
        #[arg(long, value_name = "DIR", default_value = "demo")]
        out: PathBuf,
    },
}

fn parse_language(raw: &str) -> Result<Language, String> {
    Language::from_tag(raw).ok_or_else(|| {
        format!(
            "unknown language {raw:?}; expected one of c, cpp, go, java, python"
        )
    })
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();

    let mut config = PipelineConfig::load(cli.config.as_deref())
        .context("loading configuration")?;
    config
        .apply_env(|var| std::env::var(var).ok())
        .context("applying environment overrides")?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }

    match cli.command {
        Command::Ingest { input, out } => ingest(&input, &out),
        Command::BuildFunctionData(args) => {
            let (gateway, live) = make_gateway(&config, cli.mock)?;
            let corpus = load_corpus(&args.corpus)
                .with_context(|| format!("loading corpus {}", args.corpus.display()))?;
            warn_skipped(&corpus);
            let pipeline = Pipeline::new(config, gateway.as_ref())?.with_run_id(run_id(live));
            let report =
                pipeline.build_function_data(&corpus, args.src_lang, args.tgt_lang, &args.out)?;
            let s = report.summary;
            println!(
                "{} -> {}: {} problems, {} paired, {} past the judge, {} verified, {} exported",
                args.src_lang.tag(),
                args.tgt_lang.tag(),
                s.problems,
                s.paired,
                s.judge_filtered,
                s.difftest_passed,
                s.exported
            );
            println!(
                "wrote {} and {}",
                args.out.join(pipeline::FUNCTION_DATA_FILE).display(),
                args.out.join(pipeline::FUNCTION_REPORT_FILE).display()
            );
            Ok(partial_if(s.exported == 0))
        }
        Command::BuildStyleData(args) => {
            let (gateway, live) = make_gateway(&config, cli.mock)?;
            let corpus = load_corpus(&args.corpus)
                .with_context(|| format!("loading corpus {}", args.corpus.display()))?;
            warn_skipped(&corpus);
            let pipeline = Pipeline::new(config, gateway.as_ref())?.with_run_id(run_id(live));
            let report =
                pipeline.build_style_data(&corpus, args.src_lang, args.tgt_lang, &args.out)?;
            let s = &report.summary;
            println!(
                "{} -> {}: {} problems, {} records (alpha {}), {} candidates generated, {} functional",
                args.src_lang.tag(),
                args.tgt_lang.tag(),
                s.problems,
                s.records,
                report.alpha,
                s.generated_total,
                s.functional_total
            );
            for (reason, count) in &s.ineligible {
                println!("  ineligible ({reason}): {count}");
            }
            println!(
                "wrote {} and {}",
                args.out.join(pipeline::STYLE_DATA_FILE).display(),
                args.out.join(pipeline::STYLE_REPORT_FILE).display()
            );
            Ok(partial_if(s.records == 0))
        }
        Command::EvalCa {
            corpus,
            translations,
            out,
        } => {
            let problems = load_corpus(&corpus)
                .with_context(|| format!("loading corpus {}", corpus.display()))?;
            warn_skipped(&problems);
            let rows = load_translations(&translations)?;
            // Accuracy evaluation never talks to a model; the offline backend
            // satisfies the pipeline's constructor.
            let gateway = MockGateway::new(config.seed);
            let pipeline = Pipeline::new(config, &gateway)?;
            let report = pipeline.eval_ca(&problems, &rows, &out)?;
            for direction in &report.directions {
                let s = &direction.summary;
                println!(
                    "{} -> {}: CA {:.3} ({}/{} pass; {} compile, {} runtime, {} timeout, {} wrong, {} missing)",
                    direction.src_lang,
                    direction.tgt_lang.tag(),
                    s.ca,
                    s.pass,
                    s.total,
                    s.compile_error,
                    s.runtime_error,
                    s.timeout,
                    s.incorrect_output,
                    s.missing
                );
            }
            if report.directions.len() > 1 {
                println!("overall: CA {:.3}", report.overall.ca);
            }
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            println!(
                "wrote {} and {}",
                out.join(pipeline::CA_SUMMARY_FILE).display(),
                out.join(pipeline::CA_TABLE_FILE).display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Cssim { a, b, batch, out } => match (a, b, batch) {
            (Some(a), Some(b), None) => {
                let report = cssim_pair(&a, &b)?;
                println!("{}", serde_json::to_string_pretty(&report)?);
                Ok(ExitCode::SUCCESS)
            }
            (None, None, Some(manifest)) => {
                let report = cssim_batch(&manifest)?;
                std::fs::create_dir_all(&out)
                    .with_context(|| format!("creating {}", out.display()))?;
                let table = out.join(pipeline::CSSIM_TABLE_FILE);
                std::fs::write(&table, &report.csv)
                    .with_context(|| format!("writing {}", table.display()))?;
                println!(
                    "compared {} pairs ({} failed); wrote {}",
                    report.pairs,
                    report.errors,
                    table.display()
                );
                Ok(partial_if(report.errors > 0))
            }
            _ => bail!("pass either --a and --b, or --batch"),
        },
        Command::Losses {
            request,
            grad_check,
            out,
        } => {
            let report = run_losses(&request, &config.loss, grad_check, &out)?;
            println!(
                "ift {:.6}  list {:.6}  combined {:.6}",
                report.losses.ift, report.losses.l_list, report.losses.l_sty
            );
            if let Some(check) = &report.grad_check {
                println!(
                    "gradient check: max relative error {:.3e}",
                    check.max_rel_err
                );
            }
            println!("wrote {}", out.join(pipeline::LOSSES_REPORT_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { out } => {
            let text = render_report(&out)?;
            print!("{text}");
            println!("wrote {}", out.join(pipeline::REPORT_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenDemo { out } => {
            demo::generate_demo(&out)?;
            println!("demo fixture written to {}", out.display());
            println!("\ntry:");
            let cfg = out.join(demo::CONFIG_FILE);
            println!(
                "  f2s --config {cfg} build-function-data --corpus {corpus} --src-lang python --tgt-lang c --out {o}",
                cfg = cfg.display(),
                corpus = out.join(demo::CORPUS_FILE).display(),
                o = out.join("out").display()
            );
            println!(
                "  f2s --config {cfg} build-style-data --corpus {corpus} --src-lang c --tgt-lang python --out {o}",
                cfg = cfg.display(),
                corpus = out.join(demo::CORPUS_FILE).display(),
                o = out.join("out").display()
            );
            println!(
                "  f2s --config {cfg} eval-ca --corpus {ca} --translations {tr} --out {o}",
                cfg = cfg.display(),
                ca = out.join(demo::CA_CORPUS_FILE).display(),
                tr = out.join(demo::TRANSLATIONS_FILE).display(),
                o = out.join("out").display()
            );
            println!(
                "  f2s report --out {o}",
                o = out.join("out").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn ingest(input: &Path, out: &Path) -> Result<ExitCode> {
    let corpus =
        load_corpus(input).with_context(|| format!("loading corpus {}", input.display()))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let target = out.join("corpus.jsonl");
    export_corpus(&corpus.problems, &target)
        .with_context(|| format!("writing {}", target.display()))?;
    let solutions: usize = corpus.problems.iter().map(|p| p.solutions.len()).sum();
    let tests: usize = corpus.problems.iter().map(|p| p.tests.len()).sum();
    println!(
        "{} problems, {} solutions, {} tests; wrote {}",
        corpus.len(),
        solutions,
        tests,
        target.display()
    );
    warn_skipped(&corpus);
    Ok(partial_if(!corpus.skipped.is_empty()))
}

/// Picks the model backend. Mock when forced or when fixtures are
/// configured; otherwise a live endpoint is required.
fn make_gateway(config: &PipelineConfig, force_mock: bool) -> Result<(Box<dyn Gateway>, bool)> {
    if let Some(path) = &config.gateway.mock_fixtures {
        let resolved = config.resolve(path);
        let fixtures = MockFixtures::load(&resolved)
            .with_context(|| format!("loading mock fixtures {}", resolved.display()))?;
        return Ok((
            Box::new(MockGateway::new(config.seed).with_fixtures(fixtures)),
            false,
        ));
    }
    if force_mock {
        return Ok((Box::new(MockGateway::new(config.seed)), false));
    }
    if config.gateway.completion_url.is_some() {
        let api_key = PipelineConfig::api_key(|var| std::env::var(var).ok());
        let gateway = HttpGateway::new(config.gateway.http_config(api_key));
        return Ok((Box::new(gateway), true));
    }
    Err(anyhow!(
        "no model backend: set gateway.completion_url (or F2S_COMPLETION_URL), \
         configure gateway.mock_fixtures, or pass --mock"
    ))
}

/// Live runs are stamped so their reports are attributable; mock runs stay
/// unstamped to keep the outputs byte-reproducible.
fn run_id(live: bool) -> Option<String> {
    if !live {
        return None;
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Some(format!("run-{secs}"))
}

fn warn_skipped(corpus: &ProblemSet) {
    for skip in &corpus.skipped {
        eprintln!("warning: skipped line {}: {}", skip.line, skip.reason);
    }
}

fn partial_if(partial: bool) -> ExitCode {
    if partial {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
