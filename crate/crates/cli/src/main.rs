// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//! `risknet` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use risknet::cascade::{mean_impact_of, CascadeConfig, CascadeSource, EnsembleMode};
use risknet::pipeline::{self, RunConfig, StageError};
use risknet::register::{load_register, RegisterFormat, SyntheticSpec};
use risknet::similarity::similarity_matrix;
use risknet::{Error, Measure};

const EXIT_INPUT: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

#[derive(Parser)]
#[command(name = "risknet", version, about = "Weighted risk networks from tagged risk registers")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis: network, modules, validation, cascades and firm reports.
    Analyze(RunArgs),
    /// Rerun the analysis under several similarity measures.
    Robustness {
        #[command(flatten)]
        run: RunArgs,
        /// Measures to compare (cosine is always included as reference).
        #[arg(long, value_delimiter = ',', default_value = "cosine,dice,jaccard,lancewilliams,sorgenfrei,mintest")]
        measures: Vec<Measure>,
        #[arg(long, default_value_t = 100)]
        curve_trials: usize,
    },
    /// Write a synthetic planted-class register.
    Synth(SynthArgs),
    /// Mean systemic impact of one risk.
    Cascade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        risk_id: u64,
        #[arg(long, default_value = "cosine")]
        measure: Measure,
        #[arg(long, default_value_t = 1000)]
        cascade_runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "resample")]
        ensemble_mode: EnsembleMode,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "cosine")]
    measure: Measure,
    #[arg(long, default_value_t = 1000)]
    ensemble_size: usize,
    #[arg(long, default_value_t = 1000)]
    cascade_runs: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "resample")]
    ensemble_mode: EnsembleMode,
    /// Rows in the emerging-risk report.
    #[arg(long, default_value_t = 5)]
    top_k: usize,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            input: Some(self.input.clone()),
            measure: self.measure,
            ensemble_size: self.ensemble_size,
            cascade_runs: self.cascade_runs,
            louvain_restarts: self.restarts,
            seed: self.seed,
            ensemble_mode: self.ensemble_mode,
            top_k: self.top_k,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// key=value file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_modules: Option<usize>,
    #[arg(long)]
    risks_per_module: Option<usize>,
    #[arg(long)]
    tags_per_module: Option<usize>,
    #[arg(long)]
    total_tags: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    firms: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

impl SynthArgs {
    fn spec(&self) -> Result<SyntheticSpec, Error> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                SyntheticSpec::from_kv_str(&text)?
            }
            None => SyntheticSpec::default(),
        };
        if let Some(v) = self.num_modules {
            spec.num_modules = v;
        }
        if let Some(v) = self.risks_per_module {
            spec.risks_per_module = v;
        }
        if let Some(v) = self.tags_per_module {
            spec.tags_per_module = v;
        }
        if self.total_tags.is_some() {
            spec.total_tags = self.total_tags;
        }
        if let Some(v) = self.noise_rate {
            spec.noise_rate = v;
        }
        if let Some(v) = self.firms {
            spec.firms = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        Ok(spec)
    }
}

fn fail(stage: &str, error: &Error) -> ExitCode {
    eprintln!("error: {stage} failed: {error}");
    ExitCode::from(if error.is_input_error() { EXIT_INPUT } else { EXIT_INTERNAL })
}

fn fail_stage(e: StageError) -> ExitCode {
    fail(e.stage, &e.error)
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Analyze(args) => {
            let register = match load_register(&args.input, RegisterFormat::Csv) {
                Ok(r) => r,
                Err(e) => return fail("ingest", &e),
            };
            match pipeline::analyze(&register, &args.config(), &args.out) {
                Ok(m) => {
                    eprintln!("wrote {} files to {}", m.outputs.len() + 1, args.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail_stage(e),
            }
        }
        Command::Robustness {
            run,
            measures,
            curve_trials,
        } => {
            let register = match load_register(&run.input, RegisterFormat::Csv) {
                Ok(r) => r,
                Err(e) => return fail("ingest", &e),
            };
            let config = RunConfig {
                curve_trials,
                ..run.config()
            };
            match pipeline::robustness(&register, &measures, &config, &run.out) {
                Ok(m) => {
                    eprintln!("wrote {} files to {}", m.outputs.len() + 1, run.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail_stage(e),
            }
        }
        Command::Synth(args) => {
            let spec = match args.spec() {
                Ok(s) => s,
                Err(e) => return fail("configuration", &e),
            };
            match pipeline::synth(&spec, &args.out) {
                Ok(classes) => {
                    eprintln!("wrote {} risks to {}", classes.len(), args.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail_stage(e),
            }
        }
        Command::Cascade {
            input,
            risk_id,
            measure,
            cascade_runs,
            seed,
            ensemble_mode,
        } => {
            let register = match load_register(&input, RegisterFormat::Csv) {
                Ok(r) => r,
                Err(e) => return fail("ingest", &e),
            };
            let Some(node) = register.index_of(risk_id) else {
                return fail(
                    "cascade",
                    &Error::InvalidParameter(format!("risk_id {risk_id} not in register")),
                );
            };
            let sim = similarity_matrix(&register, measure);
            let config = CascadeConfig {
                runs: cascade_runs,
                base_seed: seed,
                ensemble_mode,
            };
            match mean_impact_of(CascadeSource::Similarity(&sim), node, &config) {
                Ok(mean) => {
                    println!("risk_id,measure,seed,runs,mean_systemic_impact");
                    println!("{risk_id},{measure},{seed},{cascade_runs},{mean}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail("cascade", &e),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    run(cli)
}
