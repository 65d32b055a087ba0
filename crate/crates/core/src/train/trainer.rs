use std::fmt::Write as _;

use crate::error::{domain_err, size_err, Error, Result};
use crate::field::Field2D;
use crate::mask::MaskFamily;
use crate::psd::{
    esm_loss, fit_power_law, normalize_spectrum, RadialPSD, DEFAULT_BETA, DEFAULT_DELTA,
};
use crate::rng::Rng;
use crate::scalar::Real;
use crate::synth::{gen_power_law, PowerLawSpec};

use super::loss::{loss_dsm_ae, loss_esm_ae, loss_plain_ae, mean_l1, EsmObjective};
use super::model::LinearAE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Esm,
    Dsm,
    Plain,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "esm" => Ok(Self::Esm),
            "dsm" => Ok(Self::Dsm),
            "plain" => Ok(Self::Plain),
            other => Err(Error::Format(format!("unknown objective {other:?}"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Esm => "esm",
            Self::Dsm => "dsm",
            Self::Plain => "plain",
        })
    }
}

/// Where the ESM target spectrum comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetMode {
    /// Each image's own flattened spectrum.
    PerImage,
    /// The flattened mean spectrum of the training pool.
    DatasetAverage,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-image" => Ok(Self::PerImage),
            "dataset" | "dataset-average" => Ok(Self::DatasetAverage),
            other => Err(Error::Format(format!("unknown target mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for TargetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerImage => "per-image",
            Self::DatasetAverage => "dataset-average",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    pub beta: f64,
    pub delta: f64,
    pub family: MaskFamily,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub target: TargetMode,
    /// Exponent of the synthetic training fields.
    pub data_alpha: f64,
    /// Side length of the square training fields.
    pub size: usize,
    pub channels: usize,
    pub factor: usize,
    pub depth: usize,
    /// Number of fields in the training pool.
    pub pool: usize,
    /// Number of held-out fields the trace is measured on.
    pub eval_size: usize,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Esm,
            beta: DEFAULT_BETA,
            delta: DEFAULT_DELTA,
            family: MaskFamily::default(),
            lr: 1e-2,
            steps: 2000,
            batch: 8,
            seed: 0,
            target: TargetMode::PerImage,
            data_alpha: 2.0,
            size: 64,
            channels: 1,
            factor: 4,
            depth: 16,
            pool: 256,
            eval_size: 256,
            eval_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return domain_err(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return domain_err(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return domain_err(format!("learning rate must be >= 0, got {}", self.lr));
        }
        if self.steps == 0
            || self.batch == 0
            || self.pool == 0
            || self.eval_size == 0
            || self.eval_every == 0
        {
            return size_err("steps, batch, pool, eval_size and eval_every must be positive");
        }
        PowerLawSpec::new(
            self.data_alpha,
            self.size,
            self.size,
            self.channels,
            self.seed,
        )?;
        if self.factor == 0 || self.depth == 0 || !self.size.is_multiple_of(self.factor) {
            return size_err(format!(
                "patch size {} must divide the field size {}",
                self.factor, self.size
            ));
        }
        let latent = self.size / self.factor;
        if latent < 8 {
            return size_err(format!(
                "latent grid {latent}x{latent} is below the 8x8 minimum"
            ));
        }
        if self.objective == Objective::Dsm && !latent.is_multiple_of(8) {
            return size_err(format!(
                "DSM needs a latent grid divisible by 8, got {latent}"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub recon_l1: f64,
    pub spec_loss: f64,
    pub latent_alpha_fit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Held-out measurements every `eval_every` steps and at the last step.
    pub rows: Vec<TraceRow>,
    /// Training-batch loss at every update.
    pub train_loss: Vec<f64>,
    /// Step at which the loss or weights stopped being finite.
    pub diverged_at: Option<usize>,
}

impl Trace {
    /// `step,recon_l1,spec_loss,latent_alpha_fit`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,recon_l1,spec_loss,latent_alpha_fit\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.8e},{:.8e},{:.8e}",
                r.step, r.recon_l1, r.spec_loss, r.latent_alpha_fit
            );
        }
        out
    }

    pub fn first(&self) -> &TraceRow {
        &self.rows[0]
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has a step-0 row")
    }
}

pub struct TrainOutcome<S> {
    pub trace: Trace,
    pub model: LinearAE<S>,
}

/// Fixed evaluation set and the spectrum reference it is scored against.
struct Evaluator<S: Real> {
    images: Vec<Field2D<S>>,
    objective: EsmObjective<S>,
    target: crate::psd::SpectrumDistribution<S>,
}

impl<S: Real> Evaluator<S> {
    fn new(images: Vec<Field2D<S>>, objective: EsmObjective<S>) -> Result<Self> {
        let psds = images
            .iter()
            .map(|x| objective.image_estimator().radial_psd(x))
            .collect::<Result<Vec<_>>>()?;
        let target = objective.target_from_image_psd(&RadialPSD::average(&psds)?)?;
        Ok(Self {
            images,
            objective,
            target,
        })
    }

    fn row(&self, step: usize, model: &LinearAE<S>) -> Result<TraceRow> {
        let mut l1 = S::zero();
        let mut psds = Vec::with_capacity(self.images.len());
        for x in &self.images {
            let z = model.encode(x)?;
            l1 += mean_l1(&model.decode(&z)?, x);
            psds.push(self.objective.latent_estimator().radial_psd(&z)?);
        }
        let latent = RadialPSD::average(&psds)?;
        let spec = normalize_spectrum(&latent, self.objective.floor())
            .and_then(|d| esm_loss(&self.target, &d))
            .map(|v| v.as_f64())
            .unwrap_or(f64::NAN);
        let alpha = fit_power_law(&latent, S::zero(), S::one())
            .map(|f| f.alpha.as_f64())
            .unwrap_or(f64::NAN);
        Ok(TraceRow {
            step,
            recon_l1: (l1 / S::from_count(self.images.len())).as_f64(),
            spec_loss: spec,
            latent_alpha_fit: alpha,
        })
    }
}

/// Plain gradient descent on synthetic power-law fields.
///
/// Streams forked from `seed`: 1 draws the training pool, 2 the evaluation
/// set, 3 the initial weights and 4 the batch indices and masks.
pub fn train<S: Real>(config: &TrainConfig) -> Result<TrainOutcome<S>> {
    config.validate()?;
    let root = Rng::new(config.seed);
    let spec = PowerLawSpec::square(config.data_alpha, config.size, config.channels, config.seed)?;
    let gen = |stream: u64, n: usize| -> Result<Vec<Field2D<S>>> {
        let mut rng = root.fork(stream);
        (0..n).map(|_| gen_power_law(&spec, &mut rng)).collect()
    };
    let pool = gen(1, config.pool)?;
    let eval = gen(2, config.eval_size)?;
    let mut model = LinearAE::random(
        config.channels,
        config.factor,
        config.depth,
        &mut root.fork(3),
    )?;
    let mut rng = root.fork(4);

    let beta = S::lit(config.beta);
    let delta = S::lit(config.delta);
    let mut objective = EsmObjective::new(&model, config.size, config.size, beta, delta)?;
    if config.target == TargetMode::DatasetAverage {
        objective = objective.with_dataset_target(&pool)?;
    }
    let evaluator = Evaluator::new(
        eval,
        EsmObjective::new(&model, config.size, config.size, beta, delta)?,
    )?;

    let lr = S::lit(config.lr);
    let mut trace = Trace {
        rows: vec![evaluator.row(0, &model)?],
        train_loss: Vec::with_capacity(config.steps),
        diverged_at: None,
    };
    let mut batch = Vec::with_capacity(config.batch);
    for step in 1..=config.steps {
        batch.clear();
        for _ in 0..config.batch {
            batch.push(pool[rng.below(pool.len() as u64) as usize].clone());
        }
        let (loss, grads) = match config.objective {
            Objective::Esm => loss_esm_ae(&model, &batch, &objective),
            Objective::Dsm => loss_dsm_ae(&model, &batch, &config.family, &mut rng),
            Objective::Plain => loss_plain_ae(&model, &batch),
        }?;
        if !loss.is_finite() {
            trace.diverged_at = Some(step);
            break;
        }
        model.apply(&grads, lr);
        trace.train_loss.push(loss.as_f64());
        if model
            .encoder()
            .iter()
            .chain(model.decoder())
            .any(|w| !w.is_finite())
        {
            trace.diverged_at = Some(step);
            break;
        }
        if step % config.eval_every == 0 || step == config.steps {
            trace.rows.push(evaluator.row(step, &model)?);
        }
    }
    Ok(TrainOutcome { trace, model })
}
