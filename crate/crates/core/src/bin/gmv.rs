use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gmv::data::{gen_synthetic, partition_groups};
use gmv::experiment::{self, evaluate_model, sweep, sweep_table, ExperimentConfig, SweepAxis};
use gmv::model::Method;
use gmv::{io, GmvError, Result};

#[derive(Parser)]
#[command(name = "gmv", version, about = "Group membership verification with learned sparse ternary codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic templates and queries.
    Synth {
        #[arg(long, default_value_t = 128)]
        d: usize,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 0.48)]
        sigma: f64,
        /// Defaults to n.
        #[arg(long)]
        impostors: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        queries_out: PathBuf,
    },
    /// Enroll a template file and write the model.
    Learn {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Evaluate a stored model against templates and queries.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.95)]
        easy_threshold: f64,
        #[arg(long, default_value_t = 0.9)]
        hard_threshold: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Full pipeline for one configuration.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the pipeline once per value of one parameter.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// One of m, s-ratio, sigma.
        #[arg(long)]
        vary: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Receives one report per value and a plot table.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print a model's header and group layout.
    InspectModel { path: PathBuf },
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value = "aoe")]
    method: Method,
    #[arg(long, default_value_t = 128)]
    d: usize,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 0.9)]
    l_ratio: f64,
    #[arg(long, default_value_t = 0.7)]
    s_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    #[arg(long, default_value_t = 1e4)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.48)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    impostors: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            method: self.method,
            d: self.d,
            n: self.n,
            m: self.m,
            l_ratio: self.l_ratio,
            s_ratio: self.s_ratio,
            xi: self.xi,
            gamma: self.gamma,
            eta: self.eta,
            sigma: self.sigma,
            epsilon: self.epsilon,
            iters: self.iters,
            rel_tol: self.rel_tol,
            seed: self.seed,
            impostors: self.impostors,
            ..ExperimentConfig::default()
        }
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { d, n, sigma, impostors, seed, out, queries_out } => {
            let (x, q) = gen_synthetic(d, n, sigma, impostors.unwrap_or(n), seed)?;
            io::save_descriptors(&out, &x)?;
            io::save_queries(&queries_out, &q)?;
            eprintln!("wrote {} templates to {} and {} queries to {}", x.len(), out.display(), q.len(), queries_out.display());
        }
        Command::Learn { exp, input, model_out } => {
            let mut cfg = exp.config();
            cfg.input = Some(input.clone());
            let x = io::load_descriptors(&input)?;
            let partition = partition_groups(x.len(), cfg.m, cfg.partition_seed())?;
            let (model, learning) = experiment::enroll(&cfg, &x, &partition)?;
            io::save_model(&model_out, &model)?;
            if let Some(l) = learning {
                eprintln!("{} sweeps, final objective {:.6}", l.sweeps, l.objective_trace.last().copied().unwrap_or(f64::NAN));
            }
            eprintln!("wrote {} groups to {}", model.num_groups(), model_out.display());
        }
        Command::Eval { model, input, queries, epsilon, easy_threshold, hard_threshold, report } => {
            let model = io::load_model(&model)?;
            let x = io::load_descriptors(&input)?;
            let q = io::load_queries(&queries)?;
            let r = evaluate_model(&model, &x, &q, epsilon, easy_threshold, hard_threshold)?;
            emit(&r.to_toml()?, report.as_ref())?;
        }
        Command::Run { exp, input, queries, model_out, report } => {
            let mut cfg = exp.config();
            cfg.input = input;
            cfg.queries = queries;
            cfg.model_out = model_out;
            let r = experiment::run_experiment(&cfg)?;
            emit(&r.to_toml()?, report.as_ref())?;
        }
        Command::Sweep { exp, vary, values, out_dir } => {
            fs::create_dir_all(&out_dir)?;
            let points = sweep(&exp.config(), vary, &values)?;
            for (i, (v, r)) in points.iter().enumerate() {
                fs::write(out_dir.join(format!("report_{i:02}_{}_{v}.toml", vary.name())), r.to_toml()?)?;
            }
            fs::write(out_dir.join("sweep.tsv"), sweep_table(vary, &points))?;
            eprintln!("wrote {} reports to {}", points.len(), out_dir.display());
        }
        Command::InspectModel { path } => {
            let model = io::load_model(&path)?;
            let p = model.params();
            println!("method = \"{}\"", p.method);
            println!("d = {}", model.dim());
            println!("code_len = {}", p.code_len);
            println!("sparsity = {}", p.sparsity);
            println!("groups = {}", model.num_groups());
            println!("xi = {}\ngamma = {}\neta = {}\nseed = {}", p.xi, p.gamma, p.eta, p.seed);
            println!("orthonormality_error = {:e}", model.w().orthonormality_error());
            println!("group_sizes = {:?}", model.partition().sizes());
            let nnz: Vec<usize> = model.representations().iter().map(|r| r.nnz()).collect();
            println!("representation_nnz = {nnz:?}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    gmv::init_threads_from_env();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let GmvError::Stage { source, .. } = &e {
                log::debug!("cause: {source:?}");
            }
            ExitCode::FAILURE
        }
    }
}
