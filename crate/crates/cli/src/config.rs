//! Experiment configuration: JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use qshs_core::mask::{MaskKind, MaskSpec};
use qshs_core::tune::TuneSpec;
use qshs_core::{NoiseSpec, SolverConfig, SsimParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where a mask comes from: a PGM file or a generator spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    Spec(MaskSpec),
    Path(PathBuf),
}

impl MaskSource {
    /// `kind:density[:center_fraction]` (e.g. `vd:0.18`) is a generator spec;
    /// anything else is a file path.
    pub fn parse(s: &str, seed: u64) -> MaskSource {
        let parts: Vec<&str> = s.split(':').collect();
        if (2..=3).contains(&parts.len()) {
            if let (Ok(kind), Ok(density)) = (parts[0].parse::<MaskKind>(), parts[1].parse::<f64>()) {
                let center_fraction = match parts.get(2).map(|c| c.parse::<f64>()) {
                    Some(Ok(c)) => c,
                    Some(Err(_)) => return MaskSource::Path(PathBuf::from(s)),
                    None => MaskSpec::DEFAULT_CENTER_FRACTION,
                };
                return MaskSource::Spec(MaskSpec {
                    density,
                    kind,
                    center_fraction,
                    seed,
                });
            }
        }
        MaskSource::Path(PathBuf::from(s))
    }

    pub fn label(&self) -> String {
        match self {
            MaskSource::Spec(s) => {
                let kind = match s.kind {
                    MaskKind::VariableDensityRandom => "vd",
                    MaskKind::RadialLines => "radial",
                    MaskKind::UniformRandom => "uniform",
                };
                format!("{kind}:{}", s.density)
            }
            MaskSource::Path(p) => p.display().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Ground-truth image: a PGM/PNG/IMGF path or `phantom:<name>[:<size>]`.
    pub image_path: Option<String>,
    /// Extra images for the benchmark.
    pub images: Vec<String>,
    pub kspace_path: Option<PathBuf>,
    pub mask: Option<MaskSource>,
    /// Extra masks for the benchmark.
    pub masks: Vec<MaskSource>,
    pub noise: NoiseSpec,
    pub solver: SolverConfig,
    pub ssim: SsimParams,
    pub tune: Option<TuneSpec>,
    pub output_dir: PathBuf,
    /// Master seed; when set it overrides the mask and noise seeds.
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            image_path: None,
            images: Vec::new(),
            kspace_path: None,
            mask: None,
            masks: Vec::new(),
            noise: NoiseSpec { sigma: 2.5, seed: 0 },
            solver: SolverConfig::default(),
            ssim: SsimParams::default(),
            tune: None,
            output_dir: PathBuf::from("out"),
            seed: None,
        }
    }
}

/// Sub-seed for stream `tag` of a master seed.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const MASK_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Pushes the master seed into every generated mask and the noise.
    pub fn apply_master_seed(&mut self) {
        let Some(master) = self.seed else { return };
        self.noise.seed = derive_seed(master, NOISE_STREAM);
        let mask_seed = derive_seed(master, MASK_STREAM);
        for m in self.mask.iter_mut().chain(self.masks.iter_mut()) {
            if let MaskSource::Spec(spec) = m {
                spec.seed = mask_seed;
            }
        }
    }

    pub fn tune_spec(&self) -> TuneSpec {
        self.tune.unwrap_or_default()
    }
}
