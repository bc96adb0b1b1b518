//! Run configuration, loadable from TOML. Every field has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arc::{FitOptions, SampleSchedule};
use crate::bilip::MapOptions;
use crate::cone::ConeOptions;
use crate::metric::MetricOptions;
use crate::pieces::PieceOptions;
use crate::scan::ScanOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schedule: SampleSchedule,
    pub fit: FitOptions,
    pub scan: ScanOptions,
    pub cone: ConeOptions,
    pub pieces: PieceOptions,
    pub metric: MetricOptions,
    pub map: MapOptions,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::SpecFile { line, message: e.message().to_string() }
        })?;
        cfg.schedule.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = Config::from_toml_str("[map]\nc = 0.25\n[schedule]\ncount = 20\n").unwrap();
        assert_eq!(cfg.map.c, 0.25);
        assert_eq!(cfg.schedule.count, 20);
        assert_eq!(cfg.schedule.ratio, 0.7);
        assert_eq!(cfg.fit, FitOptions::default());
    }

    #[test]
    fn rejects_unknown_sections_and_bad_schedules() {
        assert!(Config::from_toml_str("[nope]\n").is_err());
        assert!(Config::from_toml_str("[schedule]\nratio = 1.5\n").is_err());
    }
}
