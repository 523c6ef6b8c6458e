use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use interviewsim_core::agents::{create_candidate, create_interviewer, PromptTemplates};
use interviewsim_core::domain::{Strategy, Transcript};
use interviewsim_core::evaluation::evaluate_pair;
use interviewsim_core::harness::campaign::{load_session_record, run_campaign};
use interviewsim_core::harness::config::{BackendKind, BackendSettings};
use interviewsim_core::harness::ingest::to_canonical_jsonl;
use interviewsim_core::harness::report::{compare_runs, load_artifacts, metric_row, ReportConfig};
use interviewsim_core::harness::{ingest, write_atomic, CampaignConfig, PiiConfig};

#[derive(Parser)]
#[command(name = "interviewsim", about = "Two-sided mock interview simulation and matching harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Http,
}

#[derive(Args)]
struct CorpusArgs {
    /// Resumes corpus (JSON Lines: {id, text, attributes{}})
    #[arg(long)]
    resumes: PathBuf,
    /// Job descriptions corpus (JSON Lines: {id, text, attributes{}})
    #[arg(long)]
    jobs: PathBuf,
    /// Gold labels (JSON Lines: {candidate_id, job_id, matched})
    #[arg(long)]
    labels: PathBuf,
    /// Newline-separated list of personal names to scrub from documents
    #[arg(long)]
    scrub_names: Option<PathBuf>,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "scripted")]
    backend: BackendArg,
    /// Scripted backend response configuration (JSON)
    #[arg(long)]
    scripted_config: Option<PathBuf>,
    /// Chat-completions endpoint URL for the http backend
    #[arg(long, default_value = "")]
    endpoint: String,
    /// Model name sent to the http backend
    #[arg(long, default_value = "")]
    model: String,
}

impl BackendArgs {
    fn settings(&self) -> BackendSettings {
        BackendSettings {
            kind: match self.backend {
                BackendArg::Scripted => BackendKind::Scripted,
                BackendArg::Http => BackendKind::Http,
            },
            scripted_config: self.scripted_config.clone(),
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse, scrub, and validate the corpora; write canonical copies
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Output directory for canonical corpus files
        #[arg(long)]
        out: PathBuf,
        /// Attribute names the corpora must support for slicing
        #[arg(long)]
        slice: Vec<String>,
    },
    /// Run a full campaign: sessions, evaluations, memory, persistence
    Simulate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        backend: BackendArgs,
        /// Run output directory
        #[arg(long)]
        out: PathBuf,
        /// Campaign configuration file (TOML); flags below override it
        #[arg(long)]
        config: Option<PathBuf>,
        /// Question/answer turns per session
        #[arg(long)]
        turns: Option<u32>,
        /// Acceptance threshold on the fused score
        #[arg(long)]
        threshold: Option<f64>,
        /// Document/interview weights for both sides, e.g. 0.5,0.5
        #[arg(long, value_parser = parse_weights)]
        weights: Option<(f64, f64)>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Skip the mock interview stage (documents-only evaluation)
        #[arg(long)]
        no_interview: bool,
        /// Skip reflection after matched sessions
        #[arg(long)]
        no_reflection: bool,
        /// Skip strategy modification before sessions
        #[arg(long)]
        no_strategy_update: bool,
    },
    /// Re-score persisted transcripts with a fresh two-sided evaluation
    Evaluate {
        /// Existing run directory (transcripts and corpus are read from it)
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<(f64, f64)>,
    },
    /// Print overall metrics for a run; optionally compare two runs
    Metrics {
        #[arg(long)]
        run: PathBuf,
        /// Ranking cutoff k
        #[arg(long, default_value = "5")]
        k: usize,
        /// Second run to compare against with a paired bootstrap
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value = "10000")]
        resamples: usize,
        #[arg(long, default_value = "0")]
        seed: u64,
    },
    /// Generate the report files under <run>/reports/
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Attribute to slice by (repeatable)
        #[arg(long)]
        slice: Vec<String>,
        #[arg(long, default_value = "5")]
        k: usize,
        /// Pool n-gram counts across utterances for the B@n table
        #[arg(long)]
        bleu_micro: bool,
    },
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated values, e.g. 0.5,0.5".into());
    }
    let doc: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let int: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((doc, int))
}

fn pii_config(corpus: &CorpusArgs) -> Result<PiiConfig, String> {
    let mut pii = PiiConfig::default();
    if let Some(path) = &corpus.scrub_names {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        pii.names = raw.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    }
    Ok(pii)
}

fn run() -> Result<(), String> {
    match Cli::parse().command {
        Command::Ingest { corpus, out, slice } => {
            let pii = pii_config(&corpus)?;
            let (profiles, postings, gold) =
                ingest(&corpus.resumes, &corpus.jobs, &corpus.labels, &pii, &slice)
                    .map_err(|e| e.to_string())?;
            std::fs::create_dir_all(out.join("corpus")).map_err(|e| e.to_string())?;
            let gold_records: Vec<_> = gold
                .labels
                .iter()
                .map(|((candidate_id, job_id), matched)| interviewsim_core::domain::GoldLabel {
                    candidate_id: candidate_id.clone(),
                    job_id: job_id.clone(),
                    matched: *matched,
                })
                .collect();
            for (name, content) in [
                ("resumes", to_canonical_jsonl(&profiles)),
                ("jobs", to_canonical_jsonl(&postings)),
                ("labels", to_canonical_jsonl(&gold_records)),
            ] {
                let path = out.join(format!("corpus/{name}.jsonl"));
                write_atomic(&path, content.as_bytes()).map_err(|e| e.to_string())?;
                println!(
                    "{name}: {} records, sha256 {}",
                    content.lines().count(),
                    interviewsim_core::harness::ingest::digest(&content)
                );
            }
            Ok(())
        }
        Command::Simulate {
            corpus,
            backend,
            out,
            config,
            turns,
            threshold,
            weights,
            seed,
            parallelism,
            no_interview,
            no_reflection,
            no_strategy_update,
        } => {
            let mut campaign = match config {
                Some(path) => {
                    let raw = std::fs::read_to_string(&path)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    CampaignConfig::from_toml(&raw).map_err(|e| e.to_string())?
                }
                None => CampaignConfig::default(),
            };
            campaign.output_dir = out;
            if let Some(turns) = turns {
                campaign.session.num_turns = turns;
            }
            if let Some(threshold) = threshold {
                campaign.eval.accept_threshold = threshold;
            }
            if let Some(weights) = weights {
                campaign.eval.weights_interviewer = weights;
                campaign.eval.weights_candidate = weights;
            }
            if let Some(seed) = seed {
                campaign.seed = seed;
            }
            if let Some(parallelism) = parallelism {
                campaign.parallelism = parallelism;
            }
            if no_interview {
                campaign.ablation.enable_interview = false;
            }
            if no_reflection {
                campaign.ablation.enable_reflection = false;
            }
            if no_strategy_update {
                campaign.ablation.enable_strategy_update = false;
            }
            let pii = pii_config(&corpus)?;
            let (profiles, postings, gold) =
                ingest(&corpus.resumes, &corpus.jobs, &corpus.labels, &pii, &[])
                    .map_err(|e| e.to_string())?;
            let (i_backend, c_backend) =
                backend.settings().build().map_err(|e| e.to_string())?;
            let manifest = run_campaign(
                &profiles,
                &postings,
                &gold,
                &campaign,
                i_backend.as_ref(),
                c_backend.as_ref(),
            )
            .map_err(|e| e.to_string())?;
            let failed = manifest.pairs.iter().filter(|p| !p.ok).count();
            let matched = manifest
                .pairs
                .iter()
                .filter(|p| p.matched == Some(true))
                .count();
            println!(
                "{} pairs ({matched} matched, {failed} failed), {} backend calls, {} ms",
                manifest.pairs.len(),
                manifest.backend_calls,
                manifest.elapsed_ms
            );
            Ok(())
        }
        Command::Evaluate { run, backend, threshold, weights } => {
            let artifacts = load_artifacts(&run).map_err(|e| e.to_string())?;
            let templates = PromptTemplates::default();
            let mut eval = interviewsim_core::evaluation::EvalConfig::default();
            if let Some(threshold) = threshold {
                eval.accept_threshold = threshold;
            }
            if let Some(weights) = weights {
                eval.weights_interviewer = weights;
                eval.weights_candidate = weights;
            }
            let (i_backend, c_backend) =
                backend.settings().build().map_err(|e| e.to_string())?;
            let params = interviewsim_core::backend::GenerationParams::default();
            let transcripts_dir = run.join("transcripts");
            let mut paths: Vec<_> = std::fs::read_dir(&transcripts_dir)
                .map_err(|e| format!("{}: {e}", transcripts_dir.display()))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect();
            paths.sort();
            let mut decisions = Vec::new();
            for path in paths {
                let record = load_session_record(&path).map_err(|e| e.to_string())?;
                let profile = artifacts
                    .profiles
                    .iter()
                    .find(|p| p.id == record.candidate_id)
                    .ok_or_else(|| format!("unknown candidate {}", record.candidate_id))?;
                let posting = artifacts
                    .postings
                    .iter()
                    .find(|j| j.id == record.interviewer_id)
                    .ok_or_else(|| format!("unknown job {}", record.interviewer_id))?;
                let interviewer = create_interviewer(
                    posting,
                    Strategy::initial(templates.initial_interviewer_strategy.clone()),
                    &templates,
                )
                .map_err(|e| e.to_string())?;
                let candidate = create_candidate(
                    profile,
                    Strategy::initial(templates.initial_candidate_strategy.clone()),
                    &templates,
                )
                .map_err(|e| e.to_string())?;
                let transcript = Transcript {
                    interviewer_id: record.interviewer_id.clone(),
                    candidate_id: record.candidate_id.clone(),
                    turns: record.turns.clone(),
                    status: record.status,
                };
                decisions.push(evaluate_pair(
                    &interviewer,
                    &candidate,
                    Some(&transcript),
                    &eval,
                    &templates,
                    i_backend.as_ref(),
                    c_backend.as_ref(),
                    &params,
                ));
            }
            write_atomic(run.join("decisions.jsonl"), to_canonical_jsonl(&decisions).as_bytes())
                .map_err(|e| e.to_string())?;
            let matched = decisions.iter().filter(|d| d.matched).count();
            println!("{} pairs re-scored, {matched} matched", decisions.len());
            Ok(())
        }
        Command::Metrics { run, k, compare, resamples, seed } => {
            let artifacts = load_artifacts(&run).map_err(|e| e.to_string())?;
            let row = metric_row("overall", &artifacts.decisions, &artifacts.gold, &[k])
                .map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&row).map_err(|e| e.to_string())?);
            if let Some(other) = compare {
                for c in compare_runs(&run, &other, k, resamples, seed).map_err(|e| e.to_string())? {
                    println!(
                        "{}: {:.4} vs {:.4} (p = {:.4})",
                        c.metric, c.mean_a, c.mean_b, c.p_value
                    );
                }
            }
            Ok(())
        }
        Command::Report { run, slice, k, bleu_micro } => {
            let config = ReportConfig {
                slices: slice,
                ks: vec![k],
                bleu_micro,
                ..Default::default()
            };
            interviewsim_core::harness::report::report(&run, &config).map_err(|e| e.to_string())?;
            println!("reports written to {}", run.join("reports").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
