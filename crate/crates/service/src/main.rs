use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{DateTime, Duration, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use syndromic_core::classifier::ModelSpec;
use syndromic_core::eval::{mi_rank, summarize, AnnotatedMessage, TermScore};
use syndromic_core::nb::NbParams;
use syndromic_core::store::{truncate_to_hour, CountStore};
use syndromic_core::svm::SolverSettings;
use syndromic_core::Syndrome;
use syndromic_service::config::Config;
use syndromic_service::corpus::{evaluate, Corpus};
use syndromic_service::runtime::{self, Runtime};
use syndromic_service::scheduler::ingest_range;
use syndromic_service::source::{ReplaySource, SourceAdapter};
use syndromic_service::synthetic::{training_texts, Outbreak, SyntheticConfig, SyntheticSource};

#[derive(Parser)]
#[command(
    name = "syndromic",
    version,
    about = "Syndromic surveillance over short social-media messages"
)]
struct Cli {
    /// TOML config file. Defaults apply when omitted and `syndromic.toml`
    /// does not exist.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train per-syndrome classifiers from a labelled corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// A syndrome name, or `all`.
        #[arg(long, default_value = "all")]
        syndrome: String,
        /// Model spec (nb, svm-poly1, svm-poly2, svm-poly3, svm-rbf);
        /// defaults to the config or the deployed choice per syndrome.
        #[arg(long)]
        model: Option<ModelSpec>,
        /// Output directory; defaults to the configured model directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation report.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "all")]
        syndrome: String,
        /// Model specs to compare; defaults to all five.
        #[arg(long, value_delimiter = ',')]
        model: Vec<ModelSpec>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Annotation agreement and consensus corpus shape per syndrome.
    Kappa {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Top terms by association with the positive class.
    RankTerms {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        syndrome: Syndrome,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, value_enum, default_value_t = Measure::Mi)]
        measure: Measure,
    },
    /// Ingest a message file hour by hour into the store.
    Replay {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the HTTP API and, if a source is configured, the hourly scheduler.
    Serve,
    /// Write one `hour_iso,count` CSV per city and syndrome.
    Export {
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these cities (repeatable).
        #[arg(long)]
        city: Vec<String>,
        #[arg(long)]
        syndrome: Vec<Syndrome>,
        /// Length of the exported range, ending at the latest alert time.
        #[arg(long, default_value_t = 30)]
        days: i64,
    },
    /// Write synthetic data.
    #[command(subcommand)]
    Generate(Generate),
}

#[derive(Subcommand)]
enum Generate {
    /// A message stream in the replay format.
    Messages {
        #[arg(long)]
        out: PathBuf,
        /// First hour, RFC 3339.
        #[arg(long)]
        start: DateTime<Utc>,
        #[arg(long, default_value_t = 14)]
        days: i64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Mean symptom reports per city, syndrome and hour.
        #[arg(long, default_value_t = 20.0)]
        rate: f64,
        #[arg(long, default_value_t = 30.0)]
        noise: f64,
        /// Restrict to these cities (repeatable).
        #[arg(long)]
        city: Vec<String>,
        /// `city,syndrome,start,hours,multiplier`, repeatable.
        #[arg(long, value_parser = parse_outbreak)]
        outbreak: Vec<Outbreak>,
    },
    /// A labelled training corpus for all six syndromes.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Mi,
    Pmi,
}

fn parse_outbreak(s: &str) -> Result<Outbreak, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [city, syndrome, start, hours, multiplier] = parts[..] else {
        return Err("expected city,syndrome,start,hours,multiplier".into());
    };
    Ok(Outbreak {
        city: city.to_owned(),
        syndrome: syndrome.parse().map_err(|e| format!("{e}"))?,
        start: start.parse().map_err(|e| format!("start: {e}"))?,
        duration_hours: hours.parse().map_err(|e| format!("hours: {e}"))?,
        multiplier: multiplier.parse().map_err(|e| format!("multiplier: {e}"))?,
    })
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None if Path::new("syndromic.toml").exists() => Config::load(Path::new("syndromic.toml")),
        None => {
            let mut cfg = Config::default();
            cfg.apply_env(|k| std::env::var(k).ok())?;
            Ok(cfg)
        }
    }
}

fn syndromes(arg: &str) -> anyhow::Result<Vec<Syndrome>> {
    if arg == "all" {
        Ok(Syndrome::ALL.to_vec())
    } else {
        Ok(vec![arg.parse()?])
    }
}

fn params(cfg: &Config) -> (NbParams, SolverSettings) {
    (
        NbParams {
            alpha: cfg.training.alpha,
            event_model: cfg.training.event_model,
        },
        SolverSettings {
            c: cfg.training.c,
            kkt_tolerance: cfg.training.kkt_tolerance,
            ..SolverSettings::default()
        },
    )
}

fn file_name(city: &str, syndrome: Syndrome) -> String {
    let city: String = city
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    format!("{city}_{syndrome}.csv")
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = load_config(cli.config.as_deref())?;
    let (nb, svm) = params(&cfg);

    match cli.command {
        Command::Train {
            corpus,
            syndrome,
            model,
            out,
        } => {
            let corpus = Corpus::open(&corpus)?;
            let out = out.unwrap_or_else(|| cfg.paths.models.clone());
            for s in syndromes(&syndrome)? {
                let docs = corpus.documents(s);
                let spec = model.unwrap_or_else(|| cfg.model_spec(s));
                let clf = spec
                    .fit(&docs, nb, svm)
                    .with_context(|| format!("training {s} ({spec})"))?;
                clf.save(&out, s.as_str())?;
                println!(
                    "{s:<16} {spec:<10} {} docs, vocabulary {}",
                    docs.len(),
                    clf.vocabulary.len()
                );
            }
        }

        Command::Eval {
            corpus,
            syndrome,
            model,
            folds,
            seed,
            json,
        } => {
            let corpus = Corpus::open(&corpus)?;
            let specs = if model.is_empty() {
                vec![
                    ModelSpec::NaiveBayes,
                    ModelSpec::SvmPolynomial(1),
                    ModelSpec::SvmPolynomial(2),
                    ModelSpec::SvmPolynomial(3),
                    ModelSpec::SvmRbf,
                ]
            } else {
                model
            };
            let mut rows = Vec::new();
            for s in syndromes(&syndrome)? {
                let docs = corpus.documents(s);
                if docs.is_empty() {
                    continue;
                }
                for spec in &specs {
                    let report = evaluate(*spec, &docs, folds, seed, nb, svm).with_context(|| format!("{s} {spec}"))?;
                    if !json {
                        println!(
                            "{s:<16} {spec:<10} P {:5.1}  R {:5.1}  F1 {:5.1}   (fold mean F1 {:5.1})",
                            report.micro.precision, report.micro.recall, report.micro.f1, report.fold_mean.f1
                        );
                    }
                    rows.push(serde_json::json!({
                        "syndrome": s, "model": spec.to_string(), "report": report
                    }));
                }
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            }
        }

        Command::Kappa { annotations, json } => {
            let file = File::open(&annotations).with_context(|| format!("opening {}", annotations.display()))?;
            let msgs = AnnotatedMessage::read_jsonl(std::io::BufReader::new(file))?;
            let mut rows = Vec::new();
            for s in Syndrome::ALL {
                if msgs.iter().any(|m| m.syndrome == s) {
                    rows.push(summarize(s, &msgs)?);
                }
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                println!(
                    "{:<16} {:>9} {:>9} {:>6} {:>6} {:>9}",
                    "syndrome", "positive", "negative", "P/N", "kappa", "discarded"
                );
                for r in rows {
                    println!(
                        "{:<16} {:>9} {:>9} {:>6.2} {:>6.2} {:>9}",
                        r.syndrome.as_str(),
                        r.positives,
                        r.negatives,
                        r.ratio,
                        r.kappa,
                        r.discarded
                    );
                }
            }
        }

        Command::RankTerms {
            corpus,
            syndrome,
            top,
            measure,
        } => {
            let docs = Corpus::open(&corpus)?.documents(syndrome);
            let measure = match measure {
                Measure::Mi => TermScore::MutualInformation,
                Measure::Pmi => TermScore::Pmi,
            };
            for (term, score) in mi_rank(&docs, top, measure)? {
                println!("{term}\t{score:.6}");
            }
        }

        Command::Replay { input } => {
            let source = ReplaySource::open(&input)?;
            let Some((first, last)) = source.span() else {
                bail!("{} contains no messages", input.display());
            };
            let rt = Runtime::open(cfg.clone(), last)?;
            let pipeline = runtime::build_pipeline(&cfg)?;
            let end = truncate_to_hour(last) + Duration::hours(1);
            let reports = ingest_range(
                truncate_to_hour(first),
                end,
                &source,
                &pipeline,
                &rt.registry,
                rt.store.as_ref(),
            )?;
            rt.tick(end, None, None)?;
            let skipped = reports.iter().filter(|r| r.skipped).count();
            let recorded: u64 = reports.iter().map(|r| r.recorded).sum();
            println!(
                "{} ticks ({} already committed), {} messages, {} counts recorded",
                reports.len(),
                skipped,
                source.len(),
                recorded
            );
            if let Some(rate) = pipeline.stats.ml_removal_rate() {
                println!("ML stage removed {:.1}% of candidate messages", 100.0 * rate);
            }
        }

        Command::Serve => {
            tokio::runtime::Runtime::new()?.block_on(runtime::serve(cfg))?;
        }

        Command::Export {
            out,
            city,
            syndrome,
            days,
        } => {
            let rt = Runtime::open(cfg, Utc::now())?;
            let end = rt.alerts.read().map_err(|_| anyhow::anyhow!("poisoned"))?.computed_at;
            let start = end - Duration::days(days);
            let cities: Vec<String> = if city.is_empty() {
                rt.registry.cities().iter().map(|c| c.name.clone()).collect()
            } else {
                city
            };
            let syndromes = if syndrome.is_empty() {
                Syndrome::ALL.to_vec()
            } else {
                syndrome
            };
            std::fs::create_dir_all(&out)?;
            for c in &cities {
                if rt.registry.get(c).is_none() {
                    bail!("unknown city `{c}`");
                }
                for &s in &syndromes {
                    let path = out.join(file_name(c, s));
                    let mut w = BufWriter::new(File::create(&path)?);
                    rt.store.export_csv(c, s, start, end, &mut w)?;
                    w.flush()?;
                }
            }
            println!("wrote {} files to {}", cities.len() * syndromes.len(), out.display());
        }

        Command::Generate(Generate::Messages {
            out,
            start,
            days,
            seed,
            rate,
            noise,
            city,
            outbreak,
        }) => {
            let registry = runtime::load_registry(&cfg.paths.cities)?;
            let source = SyntheticSource::new(
                SyntheticConfig {
                    seed,
                    background_rate: rate,
                    noise_rate: noise,
                    cities: city,
                    outbreaks: outbreak,
                },
                &registry,
            )?;
            let start = truncate_to_hour(start);
            let mut w = BufWriter::new(File::create(&out)?);
            let mut n = 0usize;
            for d in 0..days {
                let from = start + Duration::days(d);
                for m in source.drain(from, from + Duration::days(1))? {
                    serde_json::to_writer(&mut w, &m)?;
                    w.write_all(b"\n")?;
                    n += 1;
                }
            }
            w.flush()?;
            println!("wrote {n} messages to {}", out.display());
        }

        Command::Generate(Generate::Corpus { out, per_class, seed }) => {
            let mut w = BufWriter::new(File::create(&out)?);
            for s in Syndrome::ALL {
                for t in training_texts(s, per_class, seed) {
                    serde_json::to_writer(&mut w, &t)?;
                    w.write_all(b"\n")?;
                }
            }
            w.flush()?;
            println!("wrote {} texts to {}", 12 * per_class, out.display());
        }
    }
    Ok(())
}
