use std::path::Path;

use crucial::data::{gen_drift_classification, gen_sine_regression, write_csv, Dataset, DriftConfig, SineConfig};
use crucial::numerics::{derive_seed, SeededRng};

use crate::{CliError, Outcome, Resolved};

pub fn sine_config(cfg: &Resolved) -> Result<SineConfig, CliError> {
    let d = SineConfig::default();
    Ok(SineConfig {
        n: cfg.get("n")?,
        length: cfg.get("length")?,
        noise_sd: cfg.opt("noise_sd")?.unwrap_or(d.noise_sd),
        freq_min: cfg.get("freq_min")?,
        freq_max: cfg.get("freq_max")?,
    })
}

pub fn drift_config(cfg: &Resolved) -> Result<DriftConfig, CliError> {
    let d = DriftConfig::default();
    Ok(DriftConfig {
        n: cfg.get("n")?,
        length: cfg.get("length")?,
        drift_rate: cfg.get("drift_rate")?,
        label_noise: cfg.get("label_noise")?,
        phi: cfg.get("phi")?,
        separation: cfg.get("separation")?,
        noise_sd: cfg.opt("noise_sd")?.unwrap_or(d.noise_sd),
    })
}

/// The data stream of run `seed`; `train` draws the same data for the same seed.
pub fn data_rng(seed: u64) -> SeededRng {
    SeededRng::new(derive_seed(seed, "data"))
}

pub fn generate(cfg: &Resolved) -> Result<Dataset, CliError> {
    let mut rng = data_rng(cfg.get("seed")?);
    Ok(match cfg.get::<String>("kind")?.as_str() {
        "sine" => gen_sine_regression(&sine_config(cfg)?, &mut rng)?,
        "drift" => gen_drift_classification(&drift_config(cfg)?, &mut rng)?,
        other => return Err(CliError::Usage(format!("kind = {other:?}; expected sine or drift"))),
    })
}

pub fn run(cfg: &Resolved, out: &Path) -> Result<Outcome, CliError> {
    let data = generate(cfg)?;
    let name: String = cfg.get("file")?;
    let path = out.join(&name);
    write_csv(std::fs::File::create(&path)?, &data)?;
    Ok(Outcome {
        summary: format!("{} series of length {} written to {}\n", data.len(), data.length(), path.display()),
        passed: true,
    })
}
