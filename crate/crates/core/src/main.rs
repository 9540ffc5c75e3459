use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gosvm::bench::{run_bench, ExperimentConfig};
use gosvm::bounds::{bound_curve, write_curve_csv, BoundParams, PhiRegimes};
use gosvm::data::{read_dataset, write_dataset_to, Dataset, RngSeed};
use gosvm::datagen::{
    embed_series, gen_mackey_glass, gen_survival, load_digits, MackeyGlassConfig, SurvivalConfig,
};
use gosvm::gosvm::{evaluate_model, train_gosvm, GoSvmParams, GoSvmSolution};
use gosvm::kernels::KernelSpec;
use gosvm::modelsel::{grid_search, GridAxes};
use gosvm::nusvm::{train_nusvm, TrainedModel};
use gosvm::ordermetrics::OrderingMode;
use gosvm::{Error, Result};

/// Order-restricted SVM training, model selection and benchmarking.
#[derive(Debug, Parser)]
#[command(name = "gosvm", version)]
struct Cli {
    /// Base random seed (default 1; `bench` defaults to the config's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or ingest a dataset and write it as CSV.
    Gen {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Train a model and write it as TOML.
    Train(TrainArgs),
    /// Evaluate a model on a dataset; prints key=value lines.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Ordering used for L^iso (defaults to the model's own, or global).
        #[arg(long)]
        ordering: Option<OrderingMode>,
    },
    /// Validation-error tensor over the GO-SVM grid, as CSV.
    Grid {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        valid: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value = "per-class")]
        ordering: OrderingMode,
        /// Grid axes as TOML (`nu_b`, `nu_o`, `alpha` arrays).
        #[arg(long)]
        axes: Option<PathBuf>,
    },
    /// Run a benchmark described by a TOML config; writes the result CSV and
    /// prints the summary table.
    Bench {
        config: PathBuf,
        /// Number of realizations, overriding the config.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Bound-versus-n curves as CSV.
    Bounds(BoundsArgs),
}

#[derive(Debug, Subcommand)]
enum Generator {
    /// Delay-embedded Mackey-Glass series.
    MackeyGlass {
        #[arg(long, default_value_t = 17.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        sample_every: usize,
        #[arg(long, default_value_t = 0.9)]
        x0: f64,
        #[arg(long, default_value_t = 4)]
        embed: usize,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        max_offset: usize,
        /// Number of rows.
        #[arg(long, default_value_t = 5000)]
        n: usize,
    },
    /// Synthetic survival data with an oracle column.
    Survival {
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 1.5)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        censor_rate: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
    },
    /// Convert an annotated digits file.
    Digits { input: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Nusvm,
    Gosvm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KernelKind,
    #[arg(long, default_value_t = 1.0)]
    width: f64,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec> {
        match self.kernel {
            KernelKind::Linear => Ok(KernelSpec::Linear),
            KernelKind::Rbf => KernelSpec::rbf(self.width),
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "gosvm")]
    method: Method,
    #[command(flatten)]
    kernel: KernelArgs,
    /// ν for the ν-SVM.
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    nu_b: f64,
    #[arg(long, default_value_t = 0.5)]
    nu_o: f64,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value = "global")]
    ordering: OrderingMode,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 5.0)]
    v: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.01)]
    delta1: f64,
    #[arg(long, default_value_t = 0.01)]
    delta2: f64,
    #[arg(long, default_value_t = 0.01)]
    delta3: f64,
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    #[arg(long, default_value_t = 1.0)]
    w: f64,
    /// 2 for one ordering, 4 for per-class orderings.
    #[arg(long, default_value_t = 2)]
    ordering_multiplier: u8,
    /// Empirical L^iso added to the ordinal bound.
    #[arg(long, default_value_t = 0.0)]
    liso: f64,
    #[arg(long, default_value_t = 10.0)]
    n_min: f64,
    #[arg(long, default_value_t = 1e8)]
    n_max: f64,
    /// Points, log-spaced between n_min and n_max.
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, default_value_t = 256.0)]
    quarter_from: f64,
    #[arg(long, default_value_t = 65536.0)]
    half_from: f64,
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    match cli.cmd {
        Command::Gen { generator } => cmd_gen(generator, cli.seed.unwrap_or(1), out),
        Command::Train(args) => cmd_train(&args, out),
        Command::Eval {
            model,
            data,
            ordering,
        } => cmd_eval(&model, &data, ordering, out),
        Command::Grid {
            train,
            valid,
            kernel,
            ordering,
            axes,
        } => {
            let axes = match axes {
                Some(p) => {
                    let s = std::fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
                    toml::from_str(&s).map_err(|e| Error::Parse {
                        line: 0,
                        msg: format!("{}: {e}", p.display()),
                    })?
                }
                None => GridAxes::default(),
            };
            let tensor = grid_search(
                &read_dataset(train)?,
                &read_dataset(valid)?,
                &axes,
                &kernel.spec()?,
                ordering,
            )?;
            with_output(out, |w| tensor.write_csv(w))
        }
        Command::Bench {
            config,
            realizations,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(r) = realizations {
                cfg.realizations = r;
            }
            let table = run_bench(&cfg)?;
            with_output(out, |w| table.write_csv(w))?;
            if out.is_some() {
                print!("{}", table.render());
            } else {
                eprint!("{}", table.render());
            }
            Ok(())
        }
        Command::Bounds(args) => cmd_bounds(&args, out),
    }
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Runs `f` on the output file, or on stdout.
fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?);
            f(&mut w)?;
            w.flush().map_err(|e| io_err(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush().map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn cmd_gen(generator: Generator, seed: u64, out: Option<&Path>) -> Result<()> {
    let ds = match generator {
        Generator::MackeyGlass {
            tau,
            dt,
            sample_every,
            x0,
            embed,
            horizon,
            max_offset,
            n,
        } => {
            let cfg = MackeyGlassConfig {
                tau,
                dt,
                sample_every,
                x0,
                embed,
                horizon,
                max_offset,
                ..Default::default()
            };
            let series = gen_mackey_glass(&cfg, n + embed + horizon - 1, RngSeed::new(seed, 0))?;
            embed_series(&series, &cfg)?
        }
        Generator::Survival {
            noise,
            dim,
            horizon,
            censor_rate,
            n,
        } => {
            let cfg = SurvivalConfig {
                dim,
                noise,
                horizon,
                censor_rate,
                n,
            };
            gen_survival(&cfg, RngSeed::new(seed, 0))?
        }
        Generator::Digits { input } => load_digits(input)?,
    };
    with_output(out, |w| write_dataset_to(&ds, w))?;
    let (neg, pos) = ds.class_counts();
    eprintln!(
        "n={} d={} positive={} negative={}",
        ds.len(),
        ds.dim(),
        pos,
        neg
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs, out: Option<&Path>) -> Result<()> {
    let ds = read_dataset(&a.data)?;
    let ks = a.kernel.spec()?;
    let text = match a.method {
        Method::Nusvm => train_nusvm(&ds, a.nu, &ks)?.to_toml(),
        Method::Gosvm => {
            let p = GoSvmParams::new(a.nu_b, a.nu_o, a.alpha, ks).with_ordering(a.ordering);
            train_gosvm(&ds, &p)?.to_toml()
        }
    };
    with_output(out, |w| {
        w.write_all(text.as_bytes())
            .map_err(|e| io_err(Path::new("<output>"), e))
    })
}

/// Accepts either a GO-SVM solution file or a bare model file.
fn load_model(path: &Path) -> Result<(TrainedModel, Option<OrderingMode>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if let Ok(sol) = GoSvmSolution::from_toml(&text) {
        return Ok((sol.model, Some(sol.params.ordering)));
    }
    let model = TrainedModel::from_toml(&text).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("{}: {e}", path.display()),
    })?;
    Ok((model, None))
}

fn cmd_eval(
    model: &Path,
    data: &Path,
    ordering: Option<OrderingMode>,
    out: Option<&Path>,
) -> Result<()> {
    let (model, own) = load_model(model)?;
    let ds: Dataset = read_dataset(data)?;
    let ordering = ordering.or(own).unwrap_or(OrderingMode::Global);
    let ev = evaluate_model(&model, ordering, &ds)?;
    let mut text = format!("n={}\nerror_rate={}\n", ds.len(), ev.error_rate);
    if let Some(l) = ev.liso {
        text.push_str(&format!("liso={l}\n"));
    }
    text.push_str(&format!("balance={}\n", ev.balance));
    with_output(out, |w| {
        w.write_all(text.as_bytes())
            .map_err(|e| io_err(Path::new("<output>"), e))
    })
}

fn cmd_bounds(a: &BoundsArgs, out: Option<&Path>) -> Result<()> {
    if a.points == 0 || !(a.n_min >= 1.0 && a.n_max >= a.n_min) {
        return Err(Error::InvalidArgument(
            "need points >= 1 and 1 <= n_min <= n_max".into(),
        ));
    }
    let base = BoundParams {
        v: a.v,
        c: a.c,
        delta1: a.delta1,
        delta2: a.delta2,
        delta3: a.delta3,
        d: a.d,
        w: a.w,
        ordering_multiplier: a.ordering_multiplier,
        ..Default::default()
    };
    let (lo, hi) = (a.n_min.ln(), a.n_max.ln());
    let ns: Vec<f64> = (0..a.points)
        .map(|i| {
            let t = if a.points == 1 {
                0.0
            } else {
                i as f64 / (a.points - 1) as f64
            };
            (lo + t * (hi - lo)).exp().round()
        })
        .collect();
    let regimes = PhiRegimes {
        quarter_from: a.quarter_from,
        half_from: a.half_from,
    };
    let curve = bound_curve(&base, &ns, &regimes, a.liso)?;
    with_output(out, |w| write_curve_csv(&curve, w))
}
