use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtspec::bench::{self, RunMetadata};
use mtspec::density::parse_density;
use mtspec::estimator::{FrequencyGrid, MtPlan, ProcessSample};
use mtspec::fano::{self, FanoClass};
use mtspec::plot::{heat_map, LinePlot, Series};
use mtspec::process::{replicate_rng, DomainSampler};
use mtspec::slepian::{compute_tapers, TaperConfig, TaperSet};
use mtspec::{io, AcquisitionDomain, Error};

/// Multitaper spectral estimation on lattice domains.
#[derive(Parser, Debug)]
#[command(name = "mtspec", version)]
struct Cli {
    /// Worker threads for Monte Carlo runs
    #[arg(long, global = true, env = "MTSPEC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute Slepian tapers for a domain
    Tapers(TapersArgs),
    /// Multitaper estimate from a sample file or a simulated sample
    Estimate(EstimateArgs),
    /// Draw one sample of a stationary Gaussian process on a domain
    Simulate(SimulateArgs),
    /// Monte Carlo sup-norm risk for one configuration
    Risk(RiskArgs),
    /// Risk across domain sizes with a fitted rate slope
    Rate(RateArgs),
    /// Build and check a lower-bound perturbation class
    Fano(FanoArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Bandwidth {
    /// Bandwidth W in (0, 1]; K = ceil(N W^d)
    #[arg(long)]
    w: Option<f64>,
    /// Taper count K; W = (K/N)^(1/d)
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct TapersArgs {
    /// interval(N), rect(a,b,..), disk(r[,d]), blob(d,steps,seed) or a domain file
    #[arg(long)]
    domain: String,
    #[command(flatten)]
    bandwidth: Bandwidth,
    /// Taper CSV
    #[arg(long)]
    out: PathBuf,
    /// Line plot of the tapers (d = 1 only)
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Domain spec or file, as for `tapers`
    #[arg(long)]
    domain: String,
    #[command(flatten)]
    bandwidth: Bandwidth,
    /// CSV with `coords..,value` rows or one value per line
    #[arg(long, conflicts_with = "density")]
    sample: Option<PathBuf>,
    /// Simulate the sample from this density instead
    #[arg(long, required_unless_present = "sample")]
    density: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points per axis per unit of degree
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    /// Estimate CSV over the frequency grid
    #[arg(long)]
    out: PathBuf,
    /// Also write the lag coefficients
    #[arg(long)]
    lags: Option<PathBuf>,
    /// Line plot (d = 1) or heat map (d = 2) of the estimate
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Domain spec or file, as for `tapers`
    #[arg(long)]
    domain: String,
    /// constant(c), cosine(c,a) or fano(d,M,tau,n)
    #[arg(long)]
    density: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Which replicate stream of the seed to draw
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Sample CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RiskArgs {
    /// Domain spec or file, as for `tapers`
    #[arg(long)]
    domain: String,
    /// constant(c), cosine(c,a) or fano(d,M,tau,n)
    #[arg(long)]
    density: String,
    #[command(flatten)]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV; metadata goes to the same path plus `.json`
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RateArgs {
    /// Lattice dimension
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Interval lengths (d = 1) or cube sides (d >= 2); at least three
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Defaults to the first member of the fano(d,4,0.02) class
    #[arg(long)]
    density: Option<String>,
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip simulation and use MSE = (rate functional)^p
    #[arg(long)]
    inject_power: Option<f64>,
    /// Report CSV with the fitted slope in the footer
    #[arg(long)]
    out: PathBuf,
    /// Log-log plot with the reference rate
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FanoArgs {
    /// Lattice dimension
    #[arg(long)]
    dim: usize,
    /// Class size M
    #[arg(long)]
    m: usize,
    /// Scale tau; must lie below the C2 ceiling
    #[arg(long, required_unless_present = "calibrate")]
    tau: Option<f64>,
    /// Use the largest tau meeting both the ceiling and the Fano condition
    #[arg(long)]
    calibrate: bool,
    /// Circulant half-width for the divergences
    #[arg(long, default_value_t = 100)]
    omega: usize,
    /// Per-member report CSV with the check summary in the footer
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn taper_config(domain: &AcquisitionDomain, b: &Bandwidth) -> CliResult<TaperConfig> {
    let cfg = match (b.w, b.k) {
        (Some(w), None) => TaperConfig::with_default_count(domain, w)?,
        (None, Some(k)) => TaperConfig::from_taper_count(domain, k)?,
        _ => return Err(CliError::Config("give exactly one of --w and --k".into())),
    };
    if cfg.taper_count > domain.cardinality() {
        return Err(Error::InvalidTaperCount { k: cfg.taper_count, max: domain.cardinality() }.into());
    }
    Ok(cfg)
}

fn tapers_for(domain: &AcquisitionDomain, b: &Bandwidth) -> CliResult<TaperSet> {
    Ok(compute_tapers(domain, taper_config(domain, b)?)?)
}

fn cmd_tapers(a: &TapersArgs) -> CliResult {
    let domain = AcquisitionDomain::from_spec(&a.domain)?;
    let tapers = tapers_for(&domain, &a.bandwidth)?;
    let mut f = create(&a.out)?;
    io::write_tapers_csv(&mut f, &tapers)?;
    f.flush()?;
    if let Some(svg) = &a.svg {
        if domain.dim() != 1 {
            return Err(CliError::Config("--svg for tapers needs a 1-dimensional domain".into()));
        }
        let plot = LinePlot {
            title: format!("Slepian tapers, N = {}, W = {}", domain.cardinality(), tapers.config().bandwidth),
            x_label: "point".into(),
            y_label: "value".into(),
            series: tapers
                .tapers()
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let pts = domain.points().iter().zip(t).map(|(p, v)| (p.coords()[0] as f64, *v)).collect();
                    Series::line(format!("taper {k}"), pts)
                })
                .collect(),
            ..Default::default()
        };
        write_text(svg, &plot.to_svg())?;
    }
    println!("{} tapers on {} points written to {}", tapers.count(), domain.cardinality(), a.out.display());
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> CliResult {
    let domain = AcquisitionDomain::from_spec(&a.domain)?;
    let values = match (&a.sample, &a.density) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read sample {}: {e}", path.display())))?;
            io::read_sample(&text, &domain)?
        }
        (None, Some(spec)) => {
            let s = parse_density(spec, domain.dim())?;
            DomainSampler::new(s.as_ref(), &domain)?.sample(&mut replicate_rng(a.seed, 0))?
        }
        (None, None) => return Err(CliError::Config("give --sample or --density".into())),
    };
    let sample = ProcessSample::new(domain.clone(), values)?;
    let tapers = tapers_for(&domain, &a.bandwidth)?;
    let grid = FrequencyGrid::for_domain(&domain, a.oversample)?;
    let est = MtPlan::new(&tapers, grid)?.estimate(sample.values());
    let mut f = create(&a.out)?;
    io::write_estimate_csv(&mut f, &est)?;
    f.flush()?;
    if let Some(path) = &a.lags {
        let mut f = create(path)?;
        io::write_lags_csv(&mut f, est.lag_coefficients())?;
        f.flush()?;
    }
    if let Some(svg) = &a.svg {
        let r = grid.resolution();
        let text = match domain.dim() {
            1 => LinePlot {
                title: format!("multitaper estimate, K = {}", tapers.count()),
                x_label: "frequency".into(),
                y_label: "S_hat".into(),
                series: vec![Series::line(
                    "S_hat",
                    est.grid_values().iter().enumerate().map(|(i, v)| (i as f64 / r as f64, *v)).collect(),
                )],
                ..Default::default()
            }
            .to_svg(),
            2 => heat_map(est.grid_values(), r, r, &format!("multitaper estimate, K = {}", tapers.count())),
            _ => return Err(CliError::Config("--svg needs d = 1 or d = 2".into())),
        };
        write_text(svg, &text)?;
    }
    println!("estimate on {} grid points written to {}", grid.len(), a.out.display());
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    let domain = AcquisitionDomain::from_spec(&a.domain)?;
    let s = parse_density(&a.density, domain.dim())?;
    let x = DomainSampler::new(s.as_ref(), &domain)?.sample(&mut replicate_rng(a.seed, a.replicate))?;
    let mut f = create(&a.out)?;
    io::write_sample_csv(&mut f, &domain, &x)?;
    f.flush()?;
    println!("sample of {} written to {}", s.name(), a.out.display());
    Ok(())
}

fn cmd_risk(a: &RiskArgs) -> CliResult {
    let domain = AcquisitionDomain::from_spec(&a.domain)?;
    let s = parse_density(&a.density, domain.dim())?;
    let tapers = tapers_for(&domain, &a.bandwidth)?;
    let exp = bench::Experiment::with_tapers(s.as_ref(), &domain, tapers, a.oversample)?;
    let report = bench::risk_report(&exp, a.oversample, a.replicates, a.seed)?;
    let meta = RunMetadata::new("risk", a.seed, a.replicates, a.oversample);
    bench::write_risk_csv(&a.out, std::slice::from_ref(&report), &[], &meta)?;
    println!(
        "K = {}: sup-norm MSE {:.4e} (se {:.2e}), bias {:.3e}, max variance {:.3e}",
        report.k, report.mse, report.mse_se, report.bias_sup, report.variance_max
    );
    Ok(())
}

fn rate_domains(dim: usize, sizes: &[usize]) -> CliResult<Vec<AcquisitionDomain>> {
    sizes
        .iter()
        .map(|&n| Ok(if dim == 1 { AcquisitionDomain::interval(n)? } else { AcquisitionDomain::rectangle(&vec![n; dim])? }))
        .collect()
}

fn cmd_rate(a: &RateArgs) -> CliResult {
    let sizes = a.sizes.clone().unwrap_or_else(|| match a.dim {
        1 => vec![128, 256, 512, 1024, 2048, 4096],
        _ => vec![8, 16, 24, 32, 40, 48],
    });
    if sizes.len() < 3 {
        return Err(CliError::Config(format!("--sizes needs at least 3 values, got {}", sizes.len())));
    }
    if a.dim == 0 {
        return Err(CliError::Config("--dim must be at least 1".into()));
    }
    let domains = rate_domains(a.dim, &sizes)?;
    let (reports, fit) = match a.inject_power {
        Some(p) => {
            let reports = bench::synthetic_rate_reports(&domains, p)?;
            let fit = bench::fit_reports(&domains, &reports)?;
            (reports, fit)
        }
        None => {
            let spec = a.density.clone().unwrap_or_else(|| format!("fano({},4,0.02,1)", a.dim));
            let s = parse_density(&spec, a.dim)?;
            bench::run_rate_experiment(s.as_ref(), &domains, a.oversample, a.replicates, a.seed)?
        }
    };
    let exponent = bench::rate_exponent(a.dim);
    let footer = vec![
        format!("slope {:.6} +/- {:.6} (95%, {} sizes)", fit.slope, fit.half_width, fit.points),
        format!("intercept {:.6}", fit.intercept),
        "regressor log(log diam / N^(1/d)); slope = d log MSE / d log regressor, positive when risk falls with N".to_string(),
        format!("reference exponent {exponent}"),
    ];
    let meta = RunMetadata::new("rate", a.seed, a.replicates, a.oversample);
    bench::write_risk_csv(&a.out, &reports, &footer, &meta)?;
    if let Some(svg) = &a.svg {
        let xs: Vec<f64> = domains.iter().map(|d| d.cardinality() as f64).collect();
        let rate: Vec<f64> = domains.iter().map(|d| bench::rate_functional(d).powf(exponent)).collect();
        // reference line pinned to the first measured point
        let scale = reports[0].mse / rate[0];
        let plot = LinePlot {
            title: format!("sup-norm risk, d = {}, slope {:.3}", a.dim, fit.slope),
            x_label: "N".into(),
            y_label: "MSE".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series { markers: true, ..Series::line("empirical", xs.iter().copied().zip(reports.iter().map(|r| r.mse)).collect()) },
                Series { dashed: true, ..Series::line(format!("reference, exponent {exponent}"), xs.iter().copied().zip(rate.iter().map(|r| r * scale)).collect()) },
            ],
        };
        write_text(svg, &plot.to_svg())?;
    }
    println!("slope {:.4} +/- {:.4} (reference {exponent})", fit.slope, fit.half_width);
    Ok(())
}

fn cmd_fano(a: &FanoArgs) -> CliResult {
    let tau = if a.calibrate {
        fano::calibrate_tau(a.dim, a.m, a.omega)
    } else {
        a.tau.ok_or_else(|| CliError::Config("give --tau or --calibrate".into()))?
    };
    let class = FanoClass::build(a.dim, a.m, tau)?;
    let cert = fano::certify(&class, a.omega)?;
    let mut f = create(&a.out)?;
    writeln!(f, "member,index,sup_distance,l2_distance_squared,kl")?;
    for j in 1..=class.class_size() {
        let idx: Vec<String> = class.index(j).iter().map(i64::to_string).collect();
        writeln!(
            f,
            "{j},{},{},{},{}",
            idx.join(" "),
            cert.sup_distances[j - 1],
            cert.l2_squared[j - 1],
            cert.kl.per_member[j - 1]
        )?;
    }
    let mut summary = vec![
        format!("d = {}, M = {}, tau = {}, K = {}, omega = {}", cert.dim, cert.class_size, cert.tau, cert.k, cert.omega),
        format!("C2 norm {:.6}, tau ceiling {:.6}", cert.c2_norm, cert.tau_ceiling),
    ];
    for c in cert.checks() {
        summary.push(format!("{}: {}", c.name, if c.pass { "PASS" } else { "FAIL" }));
    }
    summary.push(format!(
        "KL sum {:.6e} <= (1/8) M log M = {:.6e}: {}",
        cert.kl.total,
        cert.kl.fano_threshold,
        if cert.kl.within_fano() { "PASS" } else { "FAIL" }
    ));
    summary.push(format!("Parseval bound {:.6e}", cert.kl.parseval_bound));
    for line in &summary {
        writeln!(f, "# {line}")?;
        println!("{line}");
    }
    f.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Tapers(a) => cmd_tapers(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Risk(a) => cmd_risk(a),
        Command::Rate(a) => cmd_rate(a),
        Command::Fano(a) => cmd_fano(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
