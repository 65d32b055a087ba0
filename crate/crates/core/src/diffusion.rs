//! Noise schedules, per-frequency SNR and the learnable-signal-power curve.
//!
//! For a frequency with signal power `S` at a timestep with retention `ab`,
//! `SNR = ab S / (1 - ab)` and the learnable power is
//! `G = S SNR / (1 + SNR) = ab S^2 / (ab S + 1 - ab)`.

use std::fmt::Write as _;

use crate::error::{domain_err, size_err, Error, Result};
use crate::psd::RadialPSD;
use crate::rng::Rng;
use crate::scalar::Real;

/// Linear-beta endpoints.
pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;
/// Offset and clip of the squared-cosine profile.
pub const COSINE_OFFSET: f64 = 0.008;
pub const COSINE_MAX_BETA: f64 = 0.999;

/// Fewest Monte-Carlo draws the LMMSE oracle accepts.
pub const MIN_ORACLE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    /// `beta_t = BETA_START + (BETA_END - BETA_START) (t - 1) / (T - 1)`,
    /// `ab_t = prod_{s <= t} (1 - beta_s)`.
    LinearBeta,
    /// `f(t) = cos^2(pi/2 (t/T + s) / (1 + s))`,
    /// `beta_t = min(1 - f(t)/f(t - 1), 0.999)`, `ab_t = prod (1 - beta_s)`.
    Cosine,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "linear-beta" => Ok(Self::LinearBeta),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::Format(format!("unknown schedule {other:?}"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LinearBeta => "linear-beta",
            Self::Cosine => "cosine",
        })
    }
}

/// Retention factors `ab_1..ab_T`, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// `ab_t` for one-based `t`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.alpha_bar.len() {
            return domain_err(format!("timestep {t} outside 1..={}", self.alpha_bar.len()));
        }
        Ok(self.alpha_bar[t - 1])
    }

    /// `count` timesteps spread evenly over `1..=T`, always including both ends.
    pub fn sample_timesteps(&self, count: usize) -> Vec<usize> {
        let t = self.steps();
        if count <= 1 {
            return vec![1];
        }
        let mut out: Vec<usize> = (0..count)
            .map(|i| 1 + ((t - 1) as f64 * i as f64 / (count - 1) as f64).round() as usize)
            .collect();
        out.dedup();
        out
    }
}

pub fn make_schedule(kind: ScheduleKind, steps: usize) -> Result<NoiseSchedule> {
    if steps < 2 {
        return size_err(format!(
            "a schedule needs at least 2 timesteps, got {steps}"
        ));
    }
    let total = steps as f64;
    let betas: Vec<f64> = match kind {
        ScheduleKind::LinearBeta => (0..steps)
            .map(|i| BETA_START + (BETA_END - BETA_START) * i as f64 / (total - 1.0))
            .collect(),
        ScheduleKind::Cosine => {
            let f = |t: f64| {
                let a = (t / total + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)
                    * std::f64::consts::FRAC_PI_2;
                a.cos() * a.cos()
            };
            (1..=steps)
                .map(|t| (1.0 - f(t as f64) / f(t as f64 - 1.0)).min(COSINE_MAX_BETA))
                .collect()
        }
    };
    let mut acc = 1.0;
    let alpha_bar = betas
        .iter()
        .map(|b| {
            acc *= 1.0 - b;
            acc
        })
        .collect();
    Ok(NoiseSchedule { kind, alpha_bar })
}

/// Per-frequency SNR at retention `alpha_bar`.
pub fn snr<S: Real>(power: S, alpha_bar: S) -> Result<S> {
    if !(alpha_bar >= S::zero() && alpha_bar < S::one()) {
        return domain_err(format!("alpha_bar must lie in [0, 1), got {alpha_bar}"));
    }
    Ok(alpha_bar * power / (S::one() - alpha_bar))
}

/// `S SNR / (1 + SNR)`.
pub fn learnable_power<S: Real>(power: S, alpha_bar: S) -> Result<S> {
    let r = snr(power, alpha_bar)?;
    Ok(power * r / (S::one() + r))
}

/// Closed-form LMMSE gain `ab S^2 / (ab S + 1 - ab)`.
pub fn lmmse_closed_form(power: f64, alpha_bar: f64) -> f64 {
    alpha_bar * power * power / (alpha_bar * power + 1.0 - alpha_bar)
}

/// SNR and learnable power for a set of timesteps over the bins of a PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct GCurve<S> {
    timesteps: Vec<usize>,
    radius: Vec<S>,
    power: Vec<S>,
    snr: Vec<S>,
    g: Vec<S>,
}

impl<S: Real> GCurve<S> {
    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn radius(&self) -> &[S] {
        &self.radius
    }

    /// Signal power per bin.
    pub fn power(&self) -> &[S] {
        &self.power
    }

    /// SNR row for the `i`-th requested timestep.
    pub fn snr_row(&self, i: usize) -> &[S] {
        let b = self.radius.len();
        &self.snr[i * b..(i + 1) * b]
    }

    /// Learnable-power row for the `i`-th requested timestep.
    pub fn g_row(&self, i: usize) -> &[S] {
        let b = self.radius.len();
        &self.g[i * b..(i + 1) * b]
    }

    /// `t,radius,snr,g`, one row per (t, bin).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,radius,snr,g\n");
        for (i, t) in self.timesteps.iter().enumerate() {
            for (b, r) in self.radius.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{t},{},{},{}",
                    fmt_sig(r.as_f64()),
                    fmt_sig(self.snr_row(i)[b].as_f64()),
                    fmt_sig(self.g_row(i)[b].as_f64())
                );
            }
        }
        out
    }
}

/// Nine significant digits in scientific notation.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn g_curve<S: Real>(
    psd: &RadialPSD<S>,
    schedule: &NoiseSchedule,
    timesteps: &[usize],
) -> Result<GCurve<S>> {
    if let Some(p) = psd.power().iter().find(|p| **p <= S::zero()) {
        return domain_err(format!(
            "G curve needs positive power on every bin, found {p}"
        ));
    }
    if timesteps.is_empty() {
        return size_err("no timesteps requested");
    }
    let bins = psd.len();
    let mut snr_v = Vec::with_capacity(timesteps.len() * bins);
    let mut g_v = Vec::with_capacity(timesteps.len() * bins);
    for &t in timesteps {
        let ab = schedule.alpha_bar(t)?;
        if ab >= 1.0 {
            return domain_err(format!("alpha_bar at t = {t} is 1, SNR is infinite"));
        }
        let ab = S::lit(ab);
        for &p in psd.power() {
            let r = snr(p, ab)?;
            snr_v.push(r);
            g_v.push(p * r / (S::one() + r));
        }
    }
    Ok(GCurve {
        timesteps: timesteps.to_vec(),
        radius: psd.radius().to_vec(),
        power: psd.power().to_vec(),
        snr: snr_v,
        g: g_v,
    })
}

/// Monte-Carlo measurement of the learnable power at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmseEstimate {
    /// Empirical `E|c Y_t|^2` with the fitted coefficient `c`.
    pub measured: f64,
    /// Fitted coefficient `Cov(Y_0, Y_t) / Var(Y_t)`.
    pub coefficient: f64,
    /// Delta-method standard error of `measured`.
    pub std_error: f64,
    /// `ab S^2 / (ab S + 1 - ab)`.
    pub closed_form: f64,
    pub samples: usize,
}

impl LmmseEstimate {
    pub fn rel_error(&self) -> f64 {
        (self.measured - self.closed_form).abs() / self.closed_form
    }
}

/// Draws `Y_0 ~ N(0, S)` and `eta ~ N(0, 1)`, forms
/// `Y_t = sqrt(ab) Y_0 + sqrt(1 - ab) eta`, fits the linear coefficient and
/// measures the recovered power.
pub fn lmmse_oracle(
    power: f64,
    alpha_bar: f64,
    samples: usize,
    rng: &mut Rng,
) -> Result<LmmseEstimate> {
    if !(power.is_finite() && power > 0.0) {
        return domain_err(format!("signal power must be positive, got {power}"));
    }
    if !(alpha_bar > 0.0 && alpha_bar < 1.0) {
        return domain_err(format!("alpha_bar must lie in (0, 1), got {alpha_bar}"));
    }
    if samples < MIN_ORACLE_SAMPLES {
        return size_err(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples}"
        ));
    }
    let (sa, sn, sd) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt(), power.sqrt());
    let n = samples as f64;
    let mut s0 = 0.0;
    let mut st = 0.0;
    let mut s0t = 0.0;
    let mut stt = 0.0;
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y0 = sd * rng.normal();
        let yt = sa * y0 + sn * rng.normal();
        s0 += y0;
        st += yt;
        s0t += y0 * yt;
        stt += yt * yt;
        pairs.push((y0, yt));
    }
    let (m0, mt) = (s0 / n, st / n);
    let cov = s0t / n - m0 * mt;
    let var = stt / n - mt * mt;
    if var <= 0.0 {
        return domain_err("degenerate sample variance");
    }
    let c = cov / var;
    let measured = c * c * var;

    // influence function of cov^2 / var
    let (dc, dv) = (2.0 * cov / var, -(cov * cov) / (var * var));
    let mut acc = 0.0;
    for (y0, yt) in pairs {
        let a = y0 - m0;
        let b = yt - mt;
        let inf = dc * (a * b - cov) + dv * (b * b - var);
        acc += inf * inf;
    }
    Ok(LmmseEstimate {
        measured,
        coefficient: c,
        std_error: (acc / n).sqrt() / n.sqrt(),
        closed_form: lmmse_closed_form(power, alpha_bar),
        samples,
    })
}
