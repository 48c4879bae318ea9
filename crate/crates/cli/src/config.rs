use std::path::Path;

use motionlink::codec::{MotionFrame, SessionKey};
use motionlink::gesture::DetectorConfig;
use motionlink::netsim::{ClockModel, LinkModel};
use motionlink::session::sim::SimConfig;
use motionlink::session::DEFAULT_RATE_HZ;
use serde::Deserialize;

use crate::CliError;

/// `sim --config` file. Every key is optional; missing keys take the
/// operating-point defaults.
///
/// ```toml
/// frames = 1000
/// rate_hz = 10
/// host_processing_ms = 0
///
/// [link]              # uplink; also the downlink unless [downlink] is given
/// base_delay_ms = 70.4
/// jitter_sigma_ms = 3.7
/// min_delay_ms = 52.2
/// max_delay_ms = 82.2
/// loss_prob = 0.0
/// ordered = true
/// seed = 42
///
/// [host_clock]
/// offset_ms = 12345
/// drift_ppm = 0
///
/// [detector]
/// tau = 0.5
/// refractory_ms = 500
/// axis = "Y"
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimFile {
    pub frames: usize,
    pub rate_hz: f64,
    pub session_id: u32,
    pub secret: String,
    pub host_processing_ms: f64,
    pub link: LinkModel,
    pub downlink: Option<LinkModel>,
    pub controller_clock: ClockModel,
    pub host_clock: ClockModel,
    pub detector: DetectorConfig,
}

impl Default for SimFile {
    fn default() -> Self {
        Self {
            frames: 1000,
            rate_hz: DEFAULT_RATE_HZ,
            session_id: 0x4D4C_0001,
            secret: "motionlink-sim".into(),
            host_processing_ms: 0.0,
            link: LinkModel::default(),
            downlink: None,
            controller_clock: ClockModel::default(),
            host_clock: ClockModel::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl SimFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io_err(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
    }

    pub fn into_sim_config(self, samples: Vec<MotionFrame>) -> Result<SimConfig, CliError> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(CliError::Usage(format!("rate must be > 0, got {}", self.rate_hz)));
        }
        let mut cfg = SimConfig::new(samples, self.link.clone());
        if let Some(d) = self.downlink {
            cfg.downlink = d;
        }
        for m in [&cfg.uplink, &cfg.downlink] {
            m.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        cfg.key = SessionKey::new(self.secret.into_bytes(), self.link.seed.to_le_bytes());
        cfg.session_id = self.session_id;
        cfg.rate_hz = self.rate_hz;
        cfg.frames = self.frames;
        cfg.controller_clock = self.controller_clock;
        cfg.host_clock = self.host_clock;
        cfg.host_processing_ms = self.host_processing_ms;
        cfg.detector = self.detector;
        Ok(cfg)
    }
}
