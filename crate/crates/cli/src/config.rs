use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use floquet_embed::synth::{ScheduleMode, ScheduleOptions, DEFAULT_CHECKPOINT_SPACING, DEFAULT_RESONANCE_MARGIN};
use floquet_embed::verify::{Trig, VerifyOptions, DEFAULT_PHASES};
use floquet_embed::{Coefficients, IntegratorSpec};

/// Everything a run needs. Read from TOML; every table is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub coefficients: Coefficients,
    pub targets: Vec<f64>,
    pub resonance_margin: f64,
    pub edge_margin: f64,
    pub integrator: IntegratorSpec,
    pub bands: BandsConfig,
    pub synth: SynthConfig,
    pub verify: VerifyConfig,
    pub oscillatory: OscillatoryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            coefficients: Coefficients::free(),
            targets: Vec::new(),
            resonance_margin: DEFAULT_RESONANCE_MARGIN,
            edge_margin: 0.05,
            integrator: IntegratorSpec::default(),
            bands: BandsConfig::default(),
            synth: SynthConfig::default(),
            verify: VerifyConfig::default(),
            oscillatory: OscillatoryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    pub resolution: f64,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self {
            lambda_min: -5.0,
            lambda_max: 5.0,
            step: floquet_embed::floquet::DEFAULT_SCAN_STEP,
            resolution: 1e-10,
        }
    }
}

/// Schedule knobs; see [`ScheduleOptions`]. The integrator comes from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub mode: ScheduleMode,
    pub a0: f64,
    pub b: f64,
    pub x_max: f64,
    pub taper_width: f64,
    pub xi_init: f64,
    pub decay_margin: f64,
    pub cycles: usize,
    pub c_bound_safety: f64,
    pub separation_safety: f64,
    pub stability_factor: f64,
    pub lock_tolerance: f64,
    pub probe_phases: usize,
    pub checkpoint_spacing: f64,
    /// Spacing of `potential.csv` rows.
    pub sample_stride: f64,
    pub max_samples_per_piece: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let o = ScheduleOptions::default();
        Self {
            mode: o.mode,
            a0: o.a0,
            b: o.b,
            x_max: o.x_max,
            taper_width: o.taper_width,
            xi_init: o.xi_init,
            decay_margin: o.decay_margin,
            cycles: o.cycles,
            c_bound_safety: o.c_bound_safety,
            separation_safety: o.separation_safety,
            stability_factor: o.stability_factor,
            lock_tolerance: o.lock_tolerance,
            probe_phases: o.probe_phases,
            checkpoint_spacing: DEFAULT_CHECKPOINT_SPACING,
            sample_stride: 1.0,
            max_samples_per_piece: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub phases: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { phases: DEFAULT_PHASES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscillatoryConfig {
    pub a: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub x0: Vec<f64>,
    pub x_max: f64,
    pub trig: Vec<Trig>,
    /// Also run the doubled-phase integral of every target.
    pub targets: bool,
}

impl Default for OscillatoryConfig {
    fn default() -> Self {
        Self {
            a: 2.0,
            beta1: 1.0,
            beta2: 1.0,
            x0: vec![1e2, 1e3, 1e4],
            x_max: 1e6,
            trig: vec![Trig::Sin, Trig::Cos],
            targets: true,
        }
    }
}

/// Configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |e: floquet_embed::Error| ConfigError(e.to_string());
        self.coefficients.validate().map_err(err)?;
        self.integrator.validate().map_err(err)?;
        self.schedule_options().validate().map_err(err)?;
        let bad = |key: &str, why: &str| Err(ConfigError(format!("invalid `{key}`: {why}")));
        if self.targets.iter().any(|l| !l.is_finite()) {
            return bad("targets", "must be finite");
        }
        if !(self.resonance_margin >= 0.0) {
            return bad("resonance_margin", "must be non-negative");
        }
        if !(self.edge_margin >= 0.0 && self.edge_margin < 1.0) {
            return bad("edge_margin", "must lie in [0, 1)");
        }
        let b = &self.bands;
        if !(b.lambda_min < b.lambda_max) {
            return bad("bands.lambda_min", "must be below bands.lambda_max");
        }
        if !(b.step > 0.0 && b.resolution > 0.0) {
            return bad("bands.step", "step and resolution must be positive");
        }
        let s = &self.synth;
        if !(s.checkpoint_spacing > 0.0) {
            return bad("synth.checkpoint_spacing", "must be positive");
        }
        if !(s.sample_stride > 0.0) || s.max_samples_per_piece < 2 {
            return bad("synth.sample_stride", "need a positive stride and at least 2 samples per piece");
        }
        if self.verify.phases == 0 {
            return bad("verify.phases", "must be positive");
        }
        let o = &self.oscillatory;
        if o.x0.is_empty() || o.trig.is_empty() {
            return bad("oscillatory.x0", "x0 and trig must be non-empty");
        }
        Ok(())
    }

    pub fn schedule_options(&self) -> ScheduleOptions {
        let s = &self.synth;
        ScheduleOptions {
            mode: s.mode,
            a0: s.a0,
            b: s.b,
            x_max: s.x_max,
            taper_width: s.taper_width,
            xi_init: s.xi_init,
            decay_margin: s.decay_margin,
            cycles: s.cycles,
            integrator: self.integrator,
            c_bound_safety: s.c_bound_safety,
            separation_safety: s.separation_safety,
            stability_factor: s.stability_factor,
            lock_tolerance: s.lock_tolerance,
            probe_phases: s.probe_phases,
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            resonance_margin: self.resonance_margin,
            phases: self.verify.phases,
            sample_stride: self.synth.sample_stride,
            max_samples_per_piece: self.synth.max_samples_per_piece,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let text = r#"
            targets = [0.7, 1.3]
            [coefficients.p]
            a0 = 0.4
            cos = [0.1]
            [synth]
            a0 = 30.0
            mode = { kind = "growing", c_unit = 2.6, safety = 1.01, envelope = "log_e" }
            [integrator]
            abs_tol = 1e-10
        "#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.integrator.rel_tol, IntegratorSpec::default().rel_tol);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::parse("[synth]\nx_maxx = 3.0\n").unwrap_err();
        assert!(e.0.contains("x_maxx"), "{e}");
        let e = RunConfig::parse("resonance_margin = -1.0\n").unwrap_err();
        assert!(e.0.contains("resonance_margin"), "{e}");
    }
}
