//! Run configuration: a single JSON document with every default embedded.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skewdim::coding::{PairSymbol, PairWord, TruncatedAlphabet};
use skewdim::empirics::{ExactnessTolerance, ScaleWindow, Target};
use skewdim::smale::{SimilarityMap, SimilaritySchedule, SmaleSystem};
use skewdim::thermodynamics::{Potential, StatsOptions};

use crate::CliError;

/// Largest number of potential-table entries a run may request.
pub const MAX_TABLE_ENTRIES: f64 = 4.0e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    InverseConjugate,
    InverseSquare,
    Similarity {
        #[serde(default = "default_contraction")]
        contraction: f64,
        #[serde(default)]
        schedule: ScheduleConfig,
    },
}

fn default_contraction() -> f64 {
    0.5
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `r_(m,n) = 2^-(m+n)` on a geometric layout.
    #[default]
    Geometric,
    /// `k` equal maps placed on a circle.
    Ring { k: usize, ratio: f64, radius: f64 },
    /// Maps given one by one; `translation` is `[re, im]`.
    Explicit { maps: Vec<MapConfig> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub symbol: PairSymbol,
    pub ratio: f64,
    pub translation: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Constant {
        c: f64,
    },
    /// `s log |T'|`.
    Geometric {
        s: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    Global,
    ZMarginal,
    /// Fiber over the given forward word, listed as `[m, n]` pairs.
    Fiber(Vec<PairSymbol>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub orbit_len: usize,
    pub past_depth: usize,
    pub marginal_depth: usize,
    pub cloud_size: usize,
    pub cloud_depth: usize,
    pub centers: usize,
    pub verify_samples: usize,
    pub induced_k_max: u32,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            samples: 20_000,
            orbit_len: 200,
            past_depth: 40,
            marginal_depth: 8,
            cloud_size: 20_000,
            cloud_depth: 30,
            centers: 500,
            verify_samples: 64,
            induced_k_max: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub bowen: f64,
    pub sweep: f64,
    pub gap: f64,
    pub cross_method: f64,
    pub finite_difference_step: f64,
    pub exactness: ExactnessTolerance,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            bowen: 1e-8,
            sweep: 1e-6,
            gap: 1e-2,
            cross_method: 1e-3,
            finite_difference_step: 1e-3,
            exactness: ExactnessTolerance::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub n_scales: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxScalesConfig {
    /// Finest-to-coarsest ladder `2^-first, ..., 2^-(first + count - 1)`.
    pub first: i32,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub potential: PotentialConfig,
    pub truncations: Vec<u64>,
    pub memory: usize,
    pub depth: usize,
    pub s_grid: Vec<f64>,
    pub monte_carlo: MonteCarloConfig,
    pub seed: u64,
    pub target: TargetConfig,
    pub window: WindowConfig,
    pub box_scales: BoxScalesConfig,
    pub tolerances: ToleranceConfig,
    /// Also write clouds as little-endian `f64` dumps.
    pub binary_dump: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemConfig::InverseConjugate,
            potential: PotentialConfig::Geometric { s: 1.0 },
            truncations: vec![3],
            memory: 1,
            depth: 6,
            s_grid: (0..21).map(|i| (35 + 5 * i) as f64 / 100.0).collect(),
            monte_carlo: MonteCarloConfig::default(),
            seed: 0,
            target: TargetConfig::Global,
            window: WindowConfig {
                r_min: 0.01,
                r_max: 0.1,
                n_scales: 8,
            },
            box_scales: BoxScalesConfig { first: 2, count: 6 },
            tolerances: ToleranceConfig::default(),
            binary_dump: false,
            output_dir: PathBuf::from("skewdim-out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// Checks every value against the library preconditions before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.truncations.is_empty() {
            return Err(invalid("truncations must list at least one M"));
        }
        if let Some(m) = self.truncations.iter().find(|m| **m == 0) {
            return Err(invalid(format!("truncation M = {m} must be at least 1")));
        }
        let largest = *self.truncations.iter().max().unwrap_or(&1) as f64;
        let entries = (largest * largest).powi(self.memory as i32 + 1);
        if entries > MAX_TABLE_ENTRIES {
            return Err(invalid(format!(
                "M = {largest} with memory {} needs {entries:e} table entries (limit {MAX_TABLE_ENTRIES:e})",
                self.memory
            )));
        }
        if !(1..=12).contains(&self.depth) {
            return Err(invalid(format!(
                "depth must lie in 1..=12, got {}",
                self.depth
            )));
        }
        if self.s_grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("s_grid values must be finite and nonnegative"));
        }
        match self.potential {
            PotentialConfig::Constant { c } if !c.is_finite() => {
                return Err(invalid("constant potential must be finite"))
            }
            PotentialConfig::Geometric { s } if !(s.is_finite() && s >= 0.0) => {
                return Err(invalid("geometric potential needs a finite s >= 0"))
            }
            _ => {}
        }
        let mc = &self.monte_carlo;
        if mc.samples == 0
            || mc.orbit_len == 0
            || mc.past_depth == 0
            || mc.marginal_depth == 0
            || mc.centers == 0
        {
            return Err(invalid("Monte Carlo sizes must be positive"));
        }
        if mc.cloud_size < 1000 || mc.cloud_depth < 20 {
            return Err(invalid(
                "clouds need cloud_size >= 1000 and cloud_depth >= 20",
            ));
        }
        if mc.centers > mc.cloud_size / 10 {
            return Err(invalid(format!(
                "{} centres for {} points; at most a tenth of the cloud may serve as centres",
                mc.centers, mc.cloud_size
            )));
        }
        if mc.verify_samples == 0 || mc.induced_k_max == 0 {
            return Err(invalid("verify_samples and induced_k_max must be positive"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("bowen", t.bowen),
            ("sweep", t.sweep),
            ("gap", t.gap),
            ("cross_method", t.cross_method),
            ("finite_difference_step", t.finite_difference_step),
            ("exactness.bias", t.exactness.bias),
            ("exactness.dispersion", t.exactness.dispersion),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!(
                    "tolerance {name} must be positive, got {v}"
                )));
            }
        }
        self.scale_window()?;
        if self.box_scales.count < skewdim::empirics::MIN_BOX_SCALES {
            return Err(invalid(format!(
                "box_scales.count must be at least {}",
                skewdim::empirics::MIN_BOX_SCALES
            )));
        }
        if let TargetConfig::Fiber(word) = &self.target {
            if word.is_empty() {
                return Err(invalid("fiber target needs a nonempty forward word"));
            }
        }
        self.build_system()?;
        Ok(())
    }

    /// Builds the system; construction failures count as configuration errors.
    pub fn build_system(&self) -> Result<Arc<SmaleSystem>, CliError> {
        self.try_build_system()
            .map(Arc::new)
            .map_err(|e| invalid(e.to_string()))
    }

    fn try_build_system(&self) -> skewdim::Result<SmaleSystem> {
        Ok(match &self.system {
            SystemConfig::InverseConjugate => SmaleSystem::inverse_conjugate(),
            SystemConfig::InverseSquare => SmaleSystem::inverse_square(),
            SystemConfig::Similarity {
                contraction,
                schedule,
            } => {
                let schedule = match schedule {
                    ScheduleConfig::Geometric => SimilaritySchedule::Geometric,
                    ScheduleConfig::Ring { k, ratio, radius } => {
                        SimilaritySchedule::ring(*k, *ratio, *radius)?
                    }
                    ScheduleConfig::Explicit { maps } => SimilaritySchedule::Explicit(
                        maps.iter()
                            .map(|m| SimilarityMap {
                                symbol: m.symbol,
                                ratio: m.ratio,
                                translation: Complex64::new(m.translation[0], m.translation[1]),
                            })
                            .collect(),
                    ),
                };
                SmaleSystem::similarity(*contraction, schedule)?
            }
        })
    }

    pub fn potential(&self, system: &Arc<SmaleSystem>) -> Result<Potential, CliError> {
        Ok(match self.potential {
            PotentialConfig::Constant { c } => Potential::Constant(c),
            PotentialConfig::Geometric { s } => Potential::geometric(system.clone(), s)?,
        })
    }

    pub fn alphabets(&self) -> Result<Vec<TruncatedAlphabet>, CliError> {
        Ok(self
            .truncations
            .iter()
            .map(|&m| TruncatedAlphabet::new(m))
            .collect::<Result<_, _>>()?)
    }

    pub fn largest_alphabet(&self) -> Result<TruncatedAlphabet, CliError> {
        Ok(TruncatedAlphabet::new(
            *self.truncations.iter().max().unwrap_or(&1),
        )?)
    }

    pub fn scale_window(&self) -> Result<ScaleWindow, CliError> {
        let w = &self.window;
        ScaleWindow::new(w.r_min, w.r_max, w.n_scales).map_err(|e| invalid(e.to_string()))
    }

    pub fn sample_target(&self) -> Target {
        match &self.target {
            TargetConfig::Global => Target::Global,
            TargetConfig::ZMarginal => Target::ZMarginal,
            TargetConfig::Fiber(word) => Target::Fiber(PairWord::new(word.clone())),
        }
    }

    pub fn stats_options(&self) -> StatsOptions {
        StatsOptions {
            marginal_depth: self.monte_carlo.marginal_depth,
            n_samples: self.monte_carlo.samples,
            orbit_len: self.monte_carlo.orbit_len,
            past_depth: self.monte_carlo.past_depth,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form: keys sorted, no whitespace, output
    /// directory left out so that reruns into other directories hash alike.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
