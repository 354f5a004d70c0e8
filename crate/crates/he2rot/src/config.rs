//! Run configuration: one TOML file with explicit unit-tagged keys.
//!
//! Unknown keys are rejected, file paths resolve relative to the config
//! file, and the SHA-256 of the raw file is recorded in every output header
//! so results can be traced back to their exact inputs.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bath::{BathTable, DecoherenceModel};
use crate::error::{Error, Result};
use crate::rotor::{MoleculeConstants, Parity};
use crate::signal::Taper;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub molecule: MoleculeSection,
    pub basis: BasisSection,
    pub bath: BathSection,
    pub kick: KickSection,
    pub signal: SignalSection,
    pub decoherence: DecoherenceSection,
    pub annihilation: AnnihilationSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSection {
    /// Rotational constants B_v, THz, one per vibrational level starting at v = 0.
    pub b_v_thz: Vec<f64>,
    /// Polarizability anisotropy, Å³.
    pub delta_alpha_a3: f64,
    /// Spin-spin constant λ, GHz.
    pub lambda_ss_ghz: f64,
    /// Spin-rotation constant γ, GHz.
    pub gamma_sr_ghz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub n_max: u32,
    /// "odd-only" (He₂* a-state) or "all".
    pub parity: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    /// He II property table, path relative to this config file.
    pub table_csv: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickSection {
    pub duration_fwhm_fs: f64,
    /// Peak intensity at the reference energy, W/cm².
    pub peak_intensity_w_cm2: f64,
    pub reference_energy_uj: f64,
    /// Calibrated energy → P scale, P per μJ.
    pub energy_to_p_per_uj: f64,
    /// Energy sweep for the kick simulation and the ratio recipe, μJ.
    pub energies_uj: Vec<f64>,
    /// Pre-kick rotational populations of the incoherent ensemble.
    pub initial_p1: f64,
    pub initial_p3: f64,
    pub initial_p5: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    /// Coherence lifetime of the (1,3) line, ns.
    pub tau13_ns: f64,
    /// The five two-photon pair weights cᵏ of the (1,3) line.
    pub beat_weights_13: Vec<f64>,
    /// Amplitude of the (3,5) line relative to (1,3); 0 disables it.
    pub ld35_relative: f64,
    /// Relative ro-vibrational branch populations for v = 0, 1, 2, …
    pub branch_weights_v: Vec<f64>,
    pub trace_dt_ps: f64,
    pub trace_span_ps: f64,
    /// "hann" or "none".
    pub window: String,
    pub zero_pad: usize,
    /// Additive white noise on synthesized traces (σ relative to the t = 0
    /// amplitude); 0 disables.
    pub noise_relative: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    pub sigma13_a2: f64,
    pub second_sound_width_nm: f64,
    /// Kick-probe delay of the temperature scan, ps.
    pub probe_delay_ps: f64,
    /// "equilibrium", "nonequilibrium-literal" or "nonequilibrium-integrated".
    pub model: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnihilationSection {
    pub n0_cm3: f64,
    pub k_ref_cm3_s: f64,
    pub t_ref_k: f64,
    pub pump_delay_ms: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Relative noise applied when a recipe generates its own synthetic data.
    pub synthetic_noise_fig2a: f64,
    pub synthetic_noise_fig2b: f64,
    pub synthetic_noise_fig3: f64,
    pub synthetic_noise_figs2b: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

/// A parsed config plus everything needed to resolve and fingerprint it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    /// Directory of the config file; relative paths resolve against it.
    pub dir: PathBuf,
    /// SHA-256 of the raw config bytes, hex.
    pub hash: String,
}

impl Loaded {
    pub fn bath_table_path(&self) -> PathBuf {
        self.dir.join(&self.config.bath.table_csv)
    }

    pub fn load_bath_table(&self) -> Result<BathTable> {
        BathTable::from_csv_path(&self.bath_table_path())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Loaded> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let config: RunConfig = toml::from_str(&raw).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        let mut hasher = Sha256::new();
        hasher.update(raw.as_bytes());
        let hash = hex_string(&hasher.finalize());
        let dir = path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Loaded { config, dir, hash })
    }

    pub fn molecule_constants(&self) -> MoleculeConstants {
        MoleculeConstants {
            b_v_thz: self.molecule.b_v_thz.clone(),
            delta_alpha_a3: self.molecule.delta_alpha_a3,
            lambda_ss_ghz: self.molecule.lambda_ss_ghz,
            gamma_sr_ghz: self.molecule.gamma_sr_ghz,
        }
    }

    pub fn parity(&self) -> Result<Parity> {
        match self.basis.parity.as_str() {
            "odd-only" => Ok(Parity::OddOnly),
            "all" => Ok(Parity::All),
            other => Err(Error::ConfigValidation {
                key: "basis.parity".into(),
                message: format!("unknown parity `{other}` (expected `odd-only` or `all`)"),
            }),
        }
    }

    pub fn taper(&self) -> Result<Taper> {
        match self.signal.window.as_str() {
            "hann" => Ok(Taper::Hann),
            "none" => Ok(Taper::None),
            other => Err(Error::ConfigValidation {
                key: "signal.window".into(),
                message: format!("unknown window `{other}` (expected `hann` or `none`)"),
            }),
        }
    }

    pub fn decoherence_model(&self) -> Result<DecoherenceModel> {
        self.decoherence
            .model
            .parse()
            .map_err(|_| Error::ConfigValidation {
                key: "decoherence.model".into(),
                message: format!(
                    "unknown model `{}` (expected equilibrium, nonequilibrium-literal \
                     or nonequilibrium-integrated)",
                    self.decoherence.model
                ),
            })
    }

    /// Hard validation; every message names the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| -> Result<()> {
            Err(Error::ConfigValidation {
                key: key.into(),
                message,
            })
        };
        self.molecule_constants().validate().map_err(|e| Error::ConfigValidation {
            key: "molecule".into(),
            message: e.to_string(),
        })?;
        self.parity()?;
        self.taper()?;
        self.decoherence_model()?;
        if self.basis.n_max < 5 {
            return bad(
                "basis.n_max",
                format!("n_max = {} cannot host the N = 5 observables", self.basis.n_max),
            );
        }
        if self.kick.duration_fwhm_fs <= 0.0 {
            return bad("kick.duration_fwhm_fs", "must be positive".into());
        }
        if self.kick.peak_intensity_w_cm2 < 0.0 || self.kick.reference_energy_uj <= 0.0 {
            return bad(
                "kick.peak_intensity_w_cm2",
                "intensity must be non-negative and the reference energy positive".into(),
            );
        }
        if self.kick.energy_to_p_per_uj <= 0.0 {
            return bad("kick.energy_to_p_per_uj", "must be positive".into());
        }
        if self.kick.energies_uj.is_empty() || self.kick.energies_uj.iter().any(|&e| e <= 0.0) {
            return bad("kick.energies_uj", "need a non-empty list of positive energies".into());
        }
        let psum = self.kick.initial_p1 + self.kick.initial_p3 + self.kick.initial_p5;
        if self.kick.initial_p1 < 0.0
            || self.kick.initial_p3 < 0.0
            || self.kick.initial_p5 < 0.0
            || (psum - 1.0).abs() > 1e-9
        {
            return bad(
                "kick.initial_p1",
                format!("initial populations must be non-negative and sum to 1 (got {psum})"),
            );
        }
        if self.signal.tau13_ns <= 0.0 {
            return bad("signal.tau13_ns", "must be positive".into());
        }
        if self.signal.beat_weights_13.len() != 5 {
            return bad(
                "signal.beat_weights_13",
                format!(
                    "the (1,3) line has five transition pairs; got {} weights",
                    self.signal.beat_weights_13.len()
                ),
            );
        }
        if self.signal.ld35_relative < 0.0 {
            return bad("signal.ld35_relative", "must be non-negative".into());
        }
        if self.signal.branch_weights_v.is_empty()
            || self.signal.branch_weights_v.len() > self.molecule.b_v_thz.len()
        {
            return bad(
                "signal.branch_weights_v",
                format!(
                    "need 1..={} branch weights (one per configured B_v)",
                    self.molecule.b_v_thz.len()
                ),
            );
        }
        if self.signal.branch_weights_v.iter().any(|&w| w < 0.0)
            || self.signal.branch_weights_v.iter().sum::<f64>() <= 0.0
        {
            return bad(
                "signal.branch_weights_v",
                "weights must be non-negative with a positive sum".into(),
            );
        }
        if self.signal.trace_dt_ps <= 0.0 || self.signal.trace_span_ps <= self.signal.trace_dt_ps {
            return bad("signal.trace_dt_ps", "need 0 < dt < span".into());
        }
        if self.signal.zero_pad == 0 {
            return bad("signal.zero_pad", "must be at least 1".into());
        }
        if self.signal.noise_relative < 0.0 {
            return bad("signal.noise_relative", "must be non-negative".into());
        }
        if self.decoherence.sigma13_a2 <= 0.0 || self.decoherence.second_sound_width_nm <= 0.0 {
            return bad(
                "decoherence.sigma13_a2",
                "cross-section and pulse width must be positive".into(),
            );
        }
        if self.decoherence.probe_delay_ps <= 0.0 {
            return bad("decoherence.probe_delay_ps", "must be positive".into());
        }
        if self.annihilation.n0_cm3 <= 0.0
            || self.annihilation.k_ref_cm3_s <= 0.0
            || self.annihilation.t_ref_k <= 0.0
            || self.annihilation.pump_delay_ms <= 0.0
        {
            return bad("annihilation", "all annihilation parameters must be positive".into());
        }
        if self.fit.max_iter == 0 || self.fit.restarts == 0 {
            return bad("fit.max_iter", "iteration and restart counts must be positive".into());
        }
        if self.fit.rel_tol <= 0.0 {
            return bad("fit.rel_tol", "must be positive".into());
        }
        for (key, v) in [
            ("fit.synthetic_noise_fig2a", self.fit.synthetic_noise_fig2a),
            ("fit.synthetic_noise_fig2b", self.fit.synthetic_noise_fig2b),
            ("fit.synthetic_noise_fig3", self.fit.synthetic_noise_fig3),
            ("fit.synthetic_noise_figs2b", self.fit.synthetic_noise_figs2b),
        ] {
            if v < 0.0 {
                return bad(key, "noise level must be non-negative".into());
            }
        }
        if self.output.dir.is_empty() {
            return bad("output.dir", "must not be empty".into());
        }
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Path of the config shipped with the crate (used by examples and tests).
pub fn default_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("config/default.toml")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_config_loads_and_validates() {
        let loaded = RunConfig::load(&default_config_path()).unwrap();
        assert_eq!(loaded.config.signal.beat_weights_13.len(), 5);
        assert!(loaded.hash.len() == 64);
        let table = loaded.load_bath_table().unwrap();
        assert!(table.check_invariants().is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let raw = std::fs::read_to_string(default_config_path()).unwrap();
        let bad = raw.replace("[molecule]", "[molecule]\nnot_a_key_xyz = 1.0");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, bad).unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("not_a_key_xyz") || msg.contains("unknown field"), "{msg}");
    }

    #[test]
    fn unit_sanity_is_enforced() {
        let raw = std::fs::read_to_string(default_config_path()).unwrap();
        let bad = raw.replace("tau13_ns = 1.0", "tau13_ns = -1.0");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, bad).unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::ConfigValidation { .. }), "{err}");
    }
}
