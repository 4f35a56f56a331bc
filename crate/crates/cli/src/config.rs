//! JSON configuration for the serve/simulate commands.
//!
//! Everything is optional; defaults give a fast echo backend at 10ms and a
//! slow echo backend at 150ms, driving 100k requests over 20k distinct
//! queries solved to a 90% repetition rate.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use qtgate_core::clock::Clock;
use qtgate_core::gateway::{Gateway, GatewayConfig};
use qtgate_core::loadsim::{Popularity, RunOptions, WorkloadSpec};
use qtgate_core::translators::{LatencyModel, SimTranslator, TranslatorSpecFile};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub fast: Option<TranslatorSpecFile>,
    pub slow: Option<TranslatorSpecFile>,
    pub gateway: GatewayConfig,
    pub workload: Option<WorkloadSpec>,
    pub sim: Option<RunOptions>,
    /// Cache snapshot loaded into the gateway before serving.
    pub restore_snapshot: Option<PathBuf>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut config: AppConfig = serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        config.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(config)
    }

    /// Build the gateway with both simulated backends. Backend seeds are
    /// derived from `seed` so reruns are reproducible.
    pub fn build_gateway(&self, clock: Arc<dyn Clock>, seed: u64) -> Result<Gateway, String> {
        let fast_spec = match &self.fast {
            Some(file) => file.load(&self.base_dir).map_err(|e| e.to_string())?,
            None => qtgate_core::translators::TranslatorSpec::echo(
                "fast",
                LatencyModel::Fixed { ms: 10.0 },
            ),
        };
        let slow_spec = match &self.slow {
            Some(file) => file.load(&self.base_dir).map_err(|e| e.to_string())?,
            None => qtgate_core::translators::TranslatorSpec::echo(
                "slow",
                LatencyModel::Fixed { ms: 150.0 },
            ),
        };
        let fast = SimTranslator::new(fast_spec, seed.wrapping_add(1));
        let slow = SimTranslator::new(slow_spec, seed.wrapping_add(2));
        let gateway = Gateway::new(Arc::new(fast), Arc::new(slow), clock, self.gateway)
            .map_err(|e| e.to_string())?;
        if let Some(snapshot) = &self.restore_snapshot {
            let path = self.base_dir.join(snapshot);
            gateway
                .restore_from_path(&path)
                .map_err(|e| format!("restore {}: {e}", path.display()))?;
        }
        Ok(gateway)
    }

    /// The workload to drive. A seed given on the command line overrides
    /// the one in the workload section.
    pub fn workload_spec(&self, seed_override: Option<u64>) -> WorkloadSpec {
        let mut spec = self.workload.clone().unwrap_or(WorkloadSpec {
            total_requests: 100_000,
            distinct_queries: 20_000,
            popularity: Popularity::Zipf { exponent: 1.1 },
            seed: 42,
            target_repetition_rate: Some(0.90),
        });
        if let Some(seed) = seed_override {
            spec.seed = seed;
        }
        spec
    }

    pub fn run_options(&self) -> RunOptions {
        self.sim.unwrap_or_default()
    }
}
