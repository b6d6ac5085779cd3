use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use otoc_core::classical::{chaotic_area_ratio, AreaSamplerConfig, ClassicalMapSpec, MapFamily, DEFAULT_DELTA};
use otoc_core::linalg::blas_self_check;
use otoc_core::otoc::{sigma_otoc, xi_otoc, OtocSeries, SeriesMeta, Taper, XiOptions};
use otoc_core::qmap::{build_floquet, build_schwinger_pair, map_otoc_series};
use otoc_core::shorttime::{short_time_grid, short_time_study, ShortTimeWindow};
use otoc_core::spectral::{berry_robnik_fit, brody_fit, ratio_eta, unfold, unfold_phases, Unfolding};
use otoc_core::spin::{build_hamiltonian, spin_otoc_series, SpinChainSpec, SpinModel, SpinOtocRequest, TimeGrid};
use otoc_core::sweep::{run_sweep, write_table, Format, SweepConfig};

const CORETYPE_VAR: &str = "OPENBLAS_CORETYPE";

/// Out-of-time-ordered correlators and chaos indicators.
#[derive(Parser, Debug)]
#[command(name = "otoc", version)]
struct Cli {
    /// Sweep configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for Monte Carlo sampling and disorder.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chaotic area fraction of a classical map by return times.
    Classical(ClassicalArgs),
    /// OTOC of a quantized torus map; writes `t,C`.
    Qmap(QmapArgs),
    /// OTOC of a spin chain; writes `t,C`.
    Spin(SpinArgs),
    /// Indicators of stored OTOC series and level files.
    Indicators(IndicatorArgs),
    /// Short-time power-law fits against the closed-form predictions.
    Shorttime(ShortTimeArgs),
    /// Parameter sweep described by --config.
    Sweep,
}

#[derive(Args, Debug)]
struct ClassicalArgs {
    #[arg(long, value_enum)]
    family: MapArg,
    #[arg(long)]
    k: f64,
    #[arg(long, default_value_t = 30_000)]
    n_tot: usize,
    /// First of twenty consecutive return-time caps.
    #[arg(long, default_value_t = 65)]
    t_max_start: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
}

#[derive(Args, Debug)]
struct QmapArgs {
    #[arg(long, value_enum)]
    family: MapArg,
    #[arg(long)]
    k: f64,
    #[arg(long, default_value_t = 600)]
    dim: usize,
    #[arg(long, default_value_t = 6000)]
    steps: usize,
    /// Transient cutoff in steps; defaults to the first 20%.
    #[arg(long)]
    t0: Option<f64>,
}

#[derive(Args, Debug)]
struct SpinArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, default_value_t = 1)]
    separation: usize,
    #[arg(long, default_value_t = 1100.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, default_value_t = 100.0)]
    t0: f64,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    sites: usize,
    /// Number of up spins; the full space if omitted.
    #[arg(long)]
    up: Option<usize>,
    /// λ for xxz, θ/π for ising, h for heisenberg.
    #[arg(long)]
    param: f64,
    #[arg(long, default_value_t = 0)]
    realization: u64,
}

#[derive(Args, Debug)]
struct IndicatorArgs {
    /// `t,C` files as written by `qmap` and `spin`.
    series: Vec<PathBuf>,
    /// Transient cutoff; defaults to the first 20% of each series.
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    detrend: Option<usize>,
    #[arg(long, value_enum, default_value_t = TaperArg::Rectangular)]
    taper: TaperArg,
    /// File with one level per line.
    #[arg(long)]
    levels: Option<PathBuf>,
    /// Treat the levels as eigenphases in [0, 2π).
    #[arg(long)]
    phases: bool,
}

#[derive(Args, Debug)]
struct ShortTimeArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    separations: Vec<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MapArg {
    Standard,
    Harper,
}

impl From<MapArg> for MapFamily {
    fn from(m: MapArg) -> Self {
        match m {
            MapArg::Standard => MapFamily::Standard,
            MapArg::Harper => MapFamily::Harper,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Xxz,
    Ising,
    Heisenberg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaperArg {
    Rectangular,
    Hann,
}

impl ChainArgs {
    fn spec(&self, seed: Option<u64>) -> Result<SpinChainSpec> {
        let model = match self.model {
            ModelArg::Xxz => SpinModel::xxz(self.param),
            ModelArg::Ising => SpinModel::tilted_ising(self.param * std::f64::consts::PI),
            ModelArg::Heisenberg => {
                let seed = seed.context("the heisenberg model needs --seed")?;
                SpinModel::heisenberg(self.param, seed, self.realization)
            }
        };
        let mut spec = SpinChainSpec::new(self.sites, model);
        spec.up_spins = self.up;
        Ok(spec)
    }
}

fn write_series(series: &OtocSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["t", "C"])?;
    for (t, c) in series.times().zip(&series.values) {
        w.write_record([format!("{t:.16e}"), format!("{c:.16e}")])?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read_series(path: &Path) -> Result<OtocSeries> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.with_context(|| format!("{}: malformed CSV", path.display()))?;
        if rec.len() < 2 {
            bail!("{}: expected columns t,C", path.display());
        }
        times.push(rec[0].trim().parse::<f64>().with_context(|| format!("{}: bad time `{}`", path.display(), &rec[0]))?);
        values.push(rec[1].trim().parse::<f64>().with_context(|| format!("{}: bad value `{}`", path.display(), &rec[1]))?);
    }
    let meta = SeriesMeta { model: path.display().to_string(), ..SeriesMeta::default() };
    OtocSeries::from_samples(&times, values, meta).with_context(|| path.display().to_string())
}

fn read_levels(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut levels = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().with_context(|| format!("{}: bad level `{l}`", path.display())))
        .collect::<Result<Vec<_>>>()?;
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}

fn out_dir(cli: &Cli) -> Result<Option<PathBuf>> {
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(cli.out.clone())
}

fn emit_series(cli: &Cli, series: &OtocSeries, name: &str) -> Result<()> {
    match out_dir(cli)? {
        Some(dir) => {
            let path = dir.join(name);
            write_series(series, &path)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "t,C")?;
            for (t, c) in series.times().zip(&series.values) {
                writeln!(out, "{t:.16e},{c:.16e}")?;
            }
        }
    }
    Ok(())
}

fn summarize(series: &OtocSeries, t0: f64, opts: &XiOptions) -> String {
    let mean = series.window_mean(t0).unwrap_or(f64::NAN);
    let sigma = sigma_otoc(series, t0).map_or_else(|e| e.to_string(), |s| format!("{s:.6e}"));
    let xi = xi_otoc(series, t0, opts).map_or_else(|e| e.to_string(), |x| format!("{:.6}", x.xi));
    format!("t0={t0} mean={mean:.6e} sigma_otoc={sigma} xi_otoc={xi}")
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Classical(a) => {
            let seed = cli.seed.context("classical sampling needs --seed")?;
            let family = MapFamily::from(a.family);
            let cfg = AreaSamplerConfig::contiguous(a.n_tot, a.t_max_start, a.delta, seed);
            let est = chaotic_area_ratio(&ClassicalMapSpec::new(family, a.k), &cfg)?;
            println!("family,k,r_ch,r_reg,stderr,n_tot");
            println!("{family},{},{:.6},{:.6},{:.2e},{}", a.k, est.r_ch, est.r_reg(), est.stderr, est.n_tot);
        }
        Command::Qmap(a) => {
            let u = build_floquet(a.family.into(), a.dim, a.k)?;
            let pair = build_schwinger_pair(a.dim)?;
            let series = map_otoc_series(&u, &pair, a.steps)?;
            emit_series(cli, &series, "qmap.csv")?;
            let t0 = a.t0.unwrap_or_else(|| series.default_cutoff());
            eprintln!("{}", summarize(&series, t0, &XiOptions::default()));
        }
        Command::Spin(a) => {
            let spec = a.chain.spec(cli.seed)?;
            let (h, basis) = build_hamiltonian(&spec)?;
            let grid = TimeGrid::new(0.0, a.t_end, a.dt)?;
            let series = spin_otoc_series(h.view(), &basis, &SpinOtocRequest::zz(a.separation, grid))?;
            emit_series(cli, &series, "spin.csv")?;
            eprintln!("{}", summarize(&series, a.t0, &XiOptions::default()));
        }
        Command::Indicators(a) => {
            if a.series.is_empty() && a.levels.is_none() {
                bail!("give at least one series file or --levels");
            }
            let taper = match a.taper {
                TaperArg::Rectangular => Taper::Rectangular,
                TaperArg::Hann => Taper::Hann,
            };
            let opts = XiOptions { detrend_window: a.detrend, taper };
            let mut ok = true;
            if !a.series.is_empty() {
                println!("file,t0,sigma_otoc,xi_otoc");
            }
            for path in &a.series {
                let series = read_series(path)?;
                let t0 = a.t0.unwrap_or_else(|| series.default_cutoff());
                let sigma = sigma_otoc(&series, t0);
                let xi = xi_otoc(&series, t0, &opts);
                if sigma.is_err() || xi.is_err() {
                    ok = false;
                }
                println!(
                    "{},{t0},{},{}",
                    path.display(),
                    sigma.map_or_else(|e| format!("error: {e}"), |s| format!("{s:.16e}")),
                    xi.map_or_else(|e| format!("error: {e}"), |x| format!("{:.16e}", x.xi)),
                );
            }
            if let Some(path) = &a.levels {
                let levels = read_levels(path)?;
                let spacings = if a.phases {
                    unfold_phases(&levels)?
                } else {
                    let u = Unfolding::default();
                    unfold(&levels, u.trim, u.degree)?
                };
                let beta = brody_fit(&spacings)?;
                let rho2 = berry_robnik_fit(&spacings)?;
                let eta = ratio_eta(&levels)?;
                println!("levels,beta,rho2,eta");
                println!("{},{:.6},{:.6},{:.6}", path.display(), beta.value, rho2.value, eta.eta);
            }
            return Ok(ok);
        }
        Command::Shorttime(a) => {
            let spec = a.chain.spec(cli.seed)?;
            let reports = short_time_study(&spec, &a.separations, short_time_grid(), &ShortTimeWindow::default())?;
            println!("l,predicted_exponent,fitted_exponent,prefactor_ratio");
            for r in reports {
                println!("{},{},{:.6},{:.6}", r.separation, r.predicted_exponent, r.fit.exponent, r.prefactor_ratio);
            }
        }
        Command::Sweep => {
            let path = cli.config.as_ref().context("sweep needs --config")?;
            let mut cfg = SweepConfig::load(path)?;
            if let Some(seed) = cli.seed {
                cfg.experiment.seed = Some(seed);
            }
            if let Some(w) = cli.workers {
                cfg.experiment.workers = w;
            }
            if let Some(out) = &cli.out {
                cfg.experiment.output = out.clone();
            }
            let table = run_sweep(&cfg)?;
            for e in &table.errors {
                log::error!("{} = {}: {}", cfg.sweep.parameter, e.parameter, e.message);
            }
            for format in [Format::Csv, Format::Json] {
                let written = write_table(&table, &cfg, &cfg.experiment.output, format)?;
                eprintln!("wrote {}", written.display());
            }
            return Ok(table.all_succeeded());
        }
    }
    Ok(true)
}

/// Restarts the process with a known-good BLAS kernel family when the
/// auto-selected one miscomputes. Returns the child's exit code if it ran.
fn ensure_blas() -> Result<Option<ExitCode>> {
    let Err(e) = blas_self_check() else {
        return Ok(None);
    };
    if std::env::var_os(CORETYPE_VAR).is_some() {
        bail!("{e}");
    }
    log::warn!("{e}; restarting with {CORETYPE_VAR}=Haswell");
    let exe = std::env::current_exe().context("cannot locate the running executable")?;
    let status = std::process::Command::new(exe)
        .args(std::env::args_os().skip(1))
        .env(CORETYPE_VAR, "Haswell")
        .status()
        .context("cannot restart")?;
    Ok(Some(ExitCode::from(status.code().unwrap_or(1).clamp(0, 255) as u8)))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match ensure_blas() {
        Ok(Some(code)) => return code,
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    if let Some(w) = cli.workers {
        // Sweeps build their own pool; this one serves the other subcommands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
