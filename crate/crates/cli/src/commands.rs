use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use specmatch::diffusion::{fmt_sig, g_curve, lmmse_oracle, make_schedule, ScheduleKind};
use specmatch::mask::{dsm_loss, spectral_filter};
use specmatch::psd::{
    default_bins, fit_power_law, flatten_psd, normalize_spectrum, resample_psd, RadialEstimator,
    DEFAULT_FLOOR,
};
use specmatch::repa::{
    cosine_similarity_map, directional_energy, dog_filter, dog_kernel, mean_direction_norm_sq,
    rmsc, spatial_normalize,
};
use specmatch::synth::{gen_power_law, PowerLawSpec};
use specmatch::train::{train, Objective, TargetMode};
use specmatch::{DoGParams, Field64, Psd64, Rng, TriangularMask};

use crate::checks;
use crate::config::{parse_family, CliConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    psd_to_csv, read_field, read_psd, read_tokens, write_field, write_tensor, write_text,
    write_tokens,
};

/// Spectral analysis and spectrum matching for latent representations.
#[derive(Debug, Parser)]
#[command(name = "specmatch", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a power-law Gaussian random field and report its fitted exponent
    Synth(SynthArgs),
    /// Radially averaged power spectrum of a field, written as CSV
    Psd(PsdArgs),
    /// Log-log power-law fit of a PSD CSV
    Fit(FitArgs),
    /// Flatten a PSD CSV by multiplying with (r / r_max)^delta
    Flatten(FlattenArgs),
    /// ESM loss between an image PSD target and a latent field
    Esm(EsmArgs),
    /// Blockwise DCT low-pass with a triangular mask
    Filter(FilterArgs),
    /// DSM loss between a field and a masked reconstruction
    Dsm(DsmArgs),
    /// SNR and learnable power per radial bin over diffusion timesteps
    Gcurve(GcurveArgs),
    /// Monte-Carlo check of the LMMSE learnable power
    Lmmse(LmmseArgs),
    /// RMS spatial contrast and directional spectral energy of tokens
    Rmsc(RmscArgs),
    /// DoG band-pass (or spatial normalization) of token features
    Dog(DogArgs),
    /// Train a linear patch autoencoder on synthetic power-law data
    Train(TrainArgs),
    /// Run the built-in oracle checks
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Spectral exponent
    #[arg(long)]
    pub alpha: f64,
    /// Side length (power of two, at least 16)
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output SPMT file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    /// Input field (SPMT or binary PGM)
    pub input: PathBuf,
    /// Number of radial bins [default: min(H,W)/4 clamped to 8..=128]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// PSD CSV
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub rmin: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rmax: f64,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    /// PSD CSV
    pub input: PathBuf,
    #[arg(long, default_value_t = specmatch::psd::DEFAULT_DELTA)]
    pub delta: f64,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EsmArgs {
    /// Image PSD CSV the target is derived from
    #[arg(long)]
    pub target: PathBuf,
    /// Latent field (SPMT or binary PGM)
    #[arg(long)]
    pub latent: PathBuf,
    /// Flattening applied to the target before resampling
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Radial bins on the latent grid [default: min(H,W)/4 clamped to 8..=128]
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    /// Write the loss gradient with respect to the latent as SPMT
    #[arg(long)]
    pub grad_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Anti-diagonals removed from each 8x8 DCT block (0..=15)
    #[arg(long)]
    pub n: u8,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DsmArgs {
    #[arg(long)]
    pub n: u8,
    /// Original field
    pub input: PathBuf,
    /// Reconstruction decoded from the masked latent
    pub recon: PathBuf,
}

#[derive(Debug, Args)]
pub struct GcurveArgs {
    /// PSD CSV
    #[arg(long)]
    pub psd: PathBuf,
    /// linear or cosine
    #[arg(long, default_value = "linear")]
    pub schedule: ScheduleKind,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Number of evenly spread timesteps
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Explicit comma-separated timesteps (overrides --samples)
    #[arg(long, value_delimiter = ',')]
    pub timesteps: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LmmseArgs {
    /// Signal power S
    #[arg(long, required_unless_present = "grid")]
    pub power: Option<f64>,
    #[arg(long, required_unless_present = "grid")]
    pub alpha_bar: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Run the 5x5 grid S in {0.25,1,4,16,64} x alpha_bar in {0.1,...,0.9}
    #[arg(long, requires = "out")]
    pub grid: bool,
    /// Grid results CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RmscArgs {
    /// Token SPMT with dims (T,D) or (h,w,D)
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct DogArgs {
    /// Token SPMT with dims (h,w,D)
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Apply spatial normalization with this alpha instead of DoG
    #[arg(long)]
    pub spatial_alpha: Option<f64>,
    /// Write the DoG kernel as SPMT
    #[arg(long)]
    pub kernel_out: Option<PathBuf>,
    /// Reference token for a cosine-similarity map of the output
    #[arg(long, requires = "cosine_out")]
    pub cosine_ref: Option<usize>,
    #[arg(long, requires = "cosine_ref")]
    pub cosine_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// esm, dsm or plain
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated mask family, e.g. 0,8,10,12
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub family_weights: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// per-image or dataset
    #[arg(long)]
    pub target: Option<TargetMode>,
    #[arg(long)]
    pub data_alpha: Option<f64>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Patch size (downsampling factor)
    #[arg(long)]
    pub factor: Option<usize>,
    /// Latent channels
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub eval_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Trace CSV
    #[arg(long)]
    pub trace: PathBuf,
    /// Final weights as SPMT
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Run every check
    #[arg(long, conflicts_with = "only")]
    pub all: bool,
    /// Run the named check (jensen, quadrant, directional, gradient); repeatable
    #[arg(long)]
    pub only: Vec<String>,
}

/// Summary values are printed with nine digits after the decimal point.
pub fn fixed(v: f64) -> String {
    format!("{v:.9}")
}

fn field_bins(f: &Field64, bins: Option<usize>) -> usize {
    bins.unwrap_or_else(|| default_bins(f.height(), f.width()))
}

fn try_fit(psd: &Psd64) -> Option<f64> {
    fit_power_law(psd, 0.0, 1.0).ok().map(|f| f.alpha)
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = PowerLawSpec::square(a.alpha, a.size, a.channels, a.seed)?;
    let field: Field64 = gen_power_law(&spec, &mut spec.rng())?;
    write_field(&a.out, &field)?;
    let psd =
        RadialEstimator::new(a.size, a.size, default_bins(a.size, a.size))?.radial_psd(&field)?;
    let fit = fit_power_law(&psd, 0.0, 1.0)?;
    writeln!(out, "alpha_fit={}", fixed(fit.alpha)).ok();
    Ok(())
}

fn psd(a: &PsdArgs, out: &mut dyn Write) -> CliResult<()> {
    let field = read_field(&a.input)?;
    let psd = RadialEstimator::new(field.height(), field.width(), field_bins(&field, a.bins))?
        .radial_psd(&field)?;
    write_text(&a.out, &psd_to_csv(&psd))?;
    let total: f64 = psd
        .power()
        .iter()
        .zip(psd.counts())
        .map(|(p, &c)| p * c as f64)
        .sum();
    write!(out, "bins={} total_power={}", psd.len(), fixed(total)).ok();
    if let Some(alpha) = try_fit(&psd) {
        write!(out, " alpha_fit={}", fixed(alpha)).ok();
    }
    writeln!(out).ok();
    Ok(())
}

fn fit(a: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let f = fit_power_law(&read_psd(&a.input)?, a.rmin, a.rmax)?;
    writeln!(
        out,
        "alpha={} log_k={} r2={}",
        fixed(f.alpha),
        fixed(f.log_k),
        fixed(f.r2)
    )
    .ok();
    Ok(())
}

fn flatten(a: &FlattenArgs, out: &mut dyn Write) -> CliResult<()> {
    let psd = read_psd(&a.input)?;
    let flat = flatten_psd(&psd, a.delta)?;
    write_text(&a.out, &psd_to_csv(&flat))?;
    write!(out, "bins={} delta={}", flat.len(), fixed(a.delta)).ok();
    if let (Some(before), Some(after)) = (try_fit(&psd), try_fit(&flat)) {
        write!(
            out,
            " alpha_in={} alpha_out={}",
            fixed(before),
            fixed(after)
        )
        .ok();
    }
    writeln!(out).ok();
    Ok(())
}

fn esm(a: &EsmArgs, out: &mut dyn Write) -> CliResult<()> {
    let image = read_psd(&a.target)?;
    let z = read_field(&a.latent)?;
    let est = RadialEstimator::new(z.height(), z.width(), field_bins(&z, a.bins))?;
    let target = normalize_spectrum(
        &resample_psd(&flatten_psd(&image, a.delta)?, &est.layout())?,
        a.floor,
    )?;
    let (loss, grad) = est.loss_and_grad(&z, &target, a.floor)?;
    if let Some(p) = &a.grad_out {
        write_field(p, &grad)?;
    }
    writeln!(out, "esm_loss={}", fixed(loss)).ok();
    Ok(())
}

fn filter(a: &FilterArgs, out: &mut dyn Write) -> CliResult<()> {
    let mask = TriangularMask::new(a.n)?;
    let x = read_field(&a.input)?;
    write_field(&a.output, &spectral_filter(&x, &mask)?)?;
    writeln!(out, "removed={} kept={}", mask.removed(), mask.kept_count()).ok();
    Ok(())
}

fn dsm(a: &DsmArgs, out: &mut dyn Write) -> CliResult<()> {
    let mask = TriangularMask::new(a.n)?;
    let loss = dsm_loss(&read_field(&a.input)?, &read_field(&a.recon)?, &mask)?;
    writeln!(out, "dsm_loss={}", fixed(loss)).ok();
    Ok(())
}

fn gcurve(a: &GcurveArgs, out: &mut dyn Write) -> CliResult<()> {
    let psd = read_psd(&a.psd)?;
    let schedule = make_schedule(a.schedule, a.steps)?;
    let ts = a
        .timesteps
        .clone()
        .unwrap_or_else(|| schedule.sample_timesteps(a.samples));
    let curve = g_curve(&psd, &schedule, &ts)?;
    write_text(&a.out, &curve.to_csv())?;
    writeln!(
        out,
        "schedule={} timesteps={} bins={}",
        a.schedule,
        ts.len(),
        psd.len()
    )
    .ok();
    Ok(())
}

pub const LMMSE_POWERS: [f64; 5] = [0.25, 1.0, 4.0, 16.0, 64.0];
pub const LMMSE_ALPHA_BARS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn lmmse(a: &LmmseArgs, out: &mut dyn Write) -> CliResult<()> {
    let root = Rng::new(a.seed);
    if a.grid {
        let mut csv = String::from("power,alpha_bar,measured,closed_form,rel_error,std_error\n");
        let mut worst = 0.0f64;
        for (i, &s) in LMMSE_POWERS.iter().enumerate() {
            for (j, &ab) in LMMSE_ALPHA_BARS.iter().enumerate() {
                let e = lmmse_oracle(s, ab, a.samples, &mut root.fork((i * 5 + j) as u64))?;
                worst = worst.max(e.rel_error());
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_sig(s),
                    fmt_sig(ab),
                    fmt_sig(e.measured),
                    fmt_sig(e.closed_form),
                    fmt_sig(e.rel_error()),
                    fmt_sig(e.std_error)
                ));
            }
        }
        let path = a.out.as_deref().expect("clap enforces --out with --grid");
        write_text(path, &csv)?;
        writeln!(out, "cells=25 max_rel_error={}", fixed(worst)).ok();
        return Ok(());
    }
    let (s, ab) = (a.power.expect("required"), a.alpha_bar.expect("required"));
    let e = lmmse_oracle(s, ab, a.samples, &mut root.clone())?;
    writeln!(
        out,
        "measured={} closed_form={} rel_error={} std_error={} coefficient={}",
        fixed(e.measured),
        fixed(e.closed_form),
        fixed(e.rel_error()),
        fixed(e.std_error),
        fixed(e.coefficient)
    )
    .ok();
    Ok(())
}

fn rmsc_cmd(a: &RmscArgs, out: &mut dyn Write) -> CliResult<()> {
    let x = read_tokens(&a.input)?;
    writeln!(
        out,
        "tokens={} dim={} rmsc={} directional_energy={} mean_direction_norm_sq={}",
        x.tokens(),
        x.dim(),
        fixed(rmsc(&x)?),
        fixed(directional_energy(&x)?),
        fixed(mean_direction_norm_sq(&x)?)
    )
    .ok();
    Ok(())
}

fn dog(a: &DogArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = CliConfig::load(a.config.as_deref())?;
    let params = DoGParams::new(
        a.sigma1.unwrap_or(cfg.dog.sigma1()),
        a.sigma2.unwrap_or(cfg.dog.sigma2()),
        a.epsilon.unwrap_or(cfg.dog.epsilon()),
    )?;
    let z = read_tokens(&a.input)?;
    let y = match a.spatial_alpha {
        Some(alpha) => spatial_normalize(&z, alpha, params.epsilon())?,
        None => dog_filter(&z, &params)?,
    };
    write_tokens(&a.out, &y)?;
    if let Some(p) = &a.kernel_out {
        write_field(p, &dog_kernel(&params))?;
    }
    if let (Some(r), Some(p)) = (a.cosine_ref, &a.cosine_out) {
        write_field(p, &cosine_similarity_map(&y, r)?)?;
    }
    write!(out, "rmsc_in={}", fixed(rmsc(&z)?)).ok();
    match rmsc(&y) {
        Ok(v) => writeln!(out, " rmsc_out={}", fixed(v)).ok(),
        Err(_) => writeln!(out, " rmsc_out=undefined").ok(),
    };
    Ok(())
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = CliConfig::load(a.config.as_deref())?;
    let mut c = cfg.train;
    if a.seed.is_none() && !cfg.seeded {
        return Err(CliError::Usage(
            "train needs --seed or a seed key in --config".into(),
        ));
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f.clone() { c.$f = v; } )* };
    }
    set!(
        objective, beta, delta, lr, steps, batch, seed, target, data_alpha, size, channels, factor,
        depth, pool
    );
    set!(eval_size, eval_every);
    if a.family.is_some() || a.family_weights.is_some() {
        let fam = a.family.clone().unwrap_or_else(|| {
            c.family
                .removed()
                .iter()
                .map(u8::to_string)
                .collect::<Vec<_>>()
                .join(",")
        });
        c.family = parse_family(&fam, a.family_weights.as_deref())?;
    }
    let outcome = train::<f64>(&c)?;
    write_text(&a.trace, &outcome.trace.to_csv())?;
    if let Some(p) = &a.model {
        write_tensor(p, &outcome.model.to_tensor())?;
    }
    if let Some(step) = outcome.trace.diverged_at {
        return Err(CliError::Precondition(format!(
            "training diverged at step {step}; lower --lr"
        )));
    }
    let (first, last) = (outcome.trace.first(), outcome.trace.last());
    writeln!(
        out,
        "objective={} steps={} recon_l1={} spec_loss={} initial_spec_loss={} latent_alpha_fit={}",
        c.objective,
        last.step,
        fixed(last.recon_l1),
        fixed(last.spec_loss),
        fixed(first.spec_loss),
        fixed(last.latent_alpha_fit)
    )
    .ok();
    Ok(())
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> CliResult<()> {
    let names: Vec<&str> = if a.all {
        checks::CHECK_NAMES.to_vec()
    } else if !a.only.is_empty() {
        a.only.iter().map(String::as_str).collect()
    } else {
        return Err(CliError::Usage("check needs --all or --only NAME".into()));
    };
    let mut failed = 0;
    for name in names {
        let o = checks::run(name)?;
        failed += usize::from(!o.passed);
        writeln!(out, "{}", o.line()).ok();
    }
    if failed > 0 {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Psd(a) => psd(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Flatten(a) => flatten(a, out),
        Command::Esm(a) => esm(a, out),
        Command::Filter(a) => filter(a, out),
        Command::Dsm(a) => dsm(a, out),
        Command::Gcurve(a) => gcurve(a, out),
        Command::Lmmse(a) => lmmse(a, out),
        Command::Rmsc(a) => rmsc_cmd(a, out),
        Command::Dog(a) => dog(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Check(a) => check(a, out),
    }
}
