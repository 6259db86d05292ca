//! Run configuration: a TOML document with one table per subcommand plus a
//! `[global]` table. Every field has a default, unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nls_bnf_core::divisor::{EnvelopeParams, EnvelopeVariant};
use nls_bnf_core::flow::{Dealias, Scheme, SimConfig};
use nls_bnf_core::normal_form::{IterationSchedule, ReshiftWindow};
use nls_bnf_core::potential::PotentialParams;
use serde::{Deserialize, Serialize};

/// Directory searched for `<command>.toml` or `default.toml` when `--config` is absent.
pub const CONFIG_DIR_ENV: &str = "NLSBNF_CONFIG_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub global: GlobalConfig,
    pub potential: PotentialConfig,
    pub divisor: DivisorConfig,
    pub normal_form: NormalFormConfig,
    pub simulate: SimulateConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: u32,
    pub eps: f64,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            d: 1,
            k: 8,
            eps: 0.05,
            seed: 1,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub m: u32,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { r: 1.0, m: 2 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordFilter {
    /// Every certified record.
    #[default]
    All,
    Nonresonant,
    /// Records carry nonresonant tuples only, so this selects nothing.
    Resonant,
    /// Records below their envelope.
    Violations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivisorConfig {
    pub gamma: f64,
    pub variant: EnvelopeVariant,
    /// Indices per side, `|n| <= 2 r_max`.
    pub r_max: usize,
    /// Tuple entries satisfy `|n| <= k_max`; at most `global.K`.
    pub k_max: u32,
    /// Monte Carlo potentials; `0` skips the estimate.
    pub trials: usize,
    pub enumeration_limit: u64,
    pub filter: RecordFilter,
}

impl Default for DivisorConfig {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            variant: EnvelopeVariant::MuExponent,
            r_max: 2,
            k_max: 4,
            trials: 2000,
            enumeration_limit: 10_000_000,
            filter: RecordFilter::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalFormConfig {
    #[serde(rename = "A")]
    pub a: usize,
    pub s: f64,
    pub cutoffs: Vec<f64>,
    /// Bracket degree cap; `0` means `2A + 2`.
    pub max_degree: usize,
    pub lie_order: usize,
    /// Re-shifts per cutoff; `0` means `A + 1`.
    pub inner_reps: usize,
    pub reshift: ReshiftWindow,
    /// Resamples after a bad-potential abort.
    pub max_retries: usize,
    /// Allow runs whose parameter conditions are not certified.
    pub empirical: bool,
    /// Initial Hamiltonian in the line format; empty builds it from the potential.
    pub input: PathBuf,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        Self {
            a: 6,
            s: 0.0,
            cutoffs: vec![1.0, 2.0],
            max_degree: 8,
            lie_order: 8,
            inner_reps: 0,
            reshift: ReshiftWindow::Current,
            max_retries: 10,
            empirical: true,
            input: PathBuf::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialData {
    /// `<n>^{-s}` profile with seeded phases.
    #[default]
    Profile,
    /// A single mode `plane_wave_mode`.
    PlaneWave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub s: f64,
    pub cubic_coeff: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub scheme: Scheme,
    pub dealias: Dealias,
    pub sample_every: usize,
    /// Initial data, normalized to `|u(0)|_{H^s} = eps^2` either way.
    pub initial: InitialData,
    pub plane_wave_mode: Vec<i32>,
    /// Runs with seeds `seed, seed + 1, ...`; one run writes to the output
    /// directory itself, more go to `run_<i>` subdirectories.
    pub ensemble: usize,
    /// Resample until every nonresonant tuple with `r <= certify_r_max` and
    /// `|n| <= certify_k_max` clears its envelope.
    pub certify: bool,
    pub certify_r_max: usize,
    pub certify_k_max: u32,
    pub max_retries: usize,
    /// Ensemble drift threshold as a multiple of the median final drift.
    pub drift_factor: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            s: 6.0,
            cubic_coeff: 2.0,
            dt: 0.01,
            t_final: 400.0,
            scheme: Scheme::StrangSplit,
            dealias: Dealias::None,
            sample_every: 100,
            initial: InitialData::Profile,
            plane_wave_mode: vec![1],
            ensemble: 1,
            certify: true,
            certify_r_max: 2,
            certify_k_max: 4,
            max_retries: 10,
            drift_factor: 10.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing config")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads `path`, or the default from [`CONFIG_DIR_ENV`], then applies
    /// `section.key=value` overrides.
    pub fn load(path: Option<&Path>, command: &str, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => default_config_text(command)?,
        };
        let mut doc: toml::Table = toml::from_str(&text).context("parsing config")?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .context("resolving config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.global;
        if g.d == 0 || g.d > 3 {
            bail!("global.d must be 1, 2 or 3, got {}", g.d);
        }
        if !(g.eps > 0.0 && g.eps.is_finite()) {
            bail!("global.eps must be positive, got {}", g.eps);
        }
        self.potential_params(g.seed)
            .validate()
            .map_err(|e| anyhow!("potential: {e}"))?;
        self.envelope().map_err(|e| anyhow!("divisor: {e}"))?;
        if self.simulate.ensemble == 0 {
            bail!("simulate.ensemble must be at least 1");
        }
        let sim = &self.simulate;
        if !(sim.dt > 0.0 && sim.dt.is_finite() && sim.t_final >= 0.0 && sim.t_final.is_finite()) {
            bail!("simulate: need dt > 0 and T >= 0, got dt = {}, T = {}", sim.dt, sim.t_final);
        }
        if sim.sample_every == 0 {
            bail!("simulate.sample_every must be at least 1");
        }
        if sim.initial == InitialData::PlaneWave {
            if sim.plane_wave_mode.len() != g.d {
                bail!("simulate.plane_wave_mode needs {} coordinates", g.d);
            }
            if sim.plane_wave_mode.iter().any(|x| x.unsigned_abs() > g.k) {
                bail!("simulate.plane_wave_mode {:?} lies outside K = {}", sim.plane_wave_mode, g.k);
            }
        }
        Ok(())
    }

    pub fn potential_params(&self, seed: u64) -> PotentialParams {
        PotentialParams {
            dim: self.global.d,
            r: self.potential.r,
            m: self.potential.m,
            cutoff: self.global.k,
            seed,
        }
    }

    pub fn envelope(&self) -> nls_bnf_core::Result<EnvelopeParams> {
        EnvelopeParams::from_gamma(self.divisor.gamma, self.divisor.variant)
    }

    pub fn schedule(&self) -> IterationSchedule {
        let nf = &self.normal_form;
        let mut sc = IterationSchedule::new(nf.a, self.global.eps, nf.s, nf.cutoffs.clone());
        sc.max_degree = (nf.max_degree > 0).then_some(nf.max_degree);
        sc.lie_order = nf.lie_order;
        if nf.inner_reps > 0 {
            sc.inner_reps = nf.inner_reps;
        }
        sc.reshift = nf.reshift;
        sc
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        let s = &self.simulate;
        SimConfig {
            d: self.global.d,
            k: self.global.k,
            eps: self.global.eps,
            s: s.s,
            cubic_coeff: s.cubic_coeff,
            dt: s.dt,
            t_final: s.t_final,
            scheme: s.scheme,
            dealias: s.dealias,
            sample_every: s.sample_every,
            seed,
        }
    }
}

fn default_config_text(command: &str) -> Result<String> {
    let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) else {
        return Ok(String::new());
    };
    let dir = PathBuf::from(dir);
    for name in [format!("{command}.toml"), "default.toml".to_string()] {
        let p = dir.join(name);
        if p.is_file() {
            return fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()));
        }
    }
    Ok(String::new())
}

/// `section.key=value`; the value is read as a TOML literal, falling back to
/// a bare string.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override {spec:?} is not of the form section.key=value"))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| anyhow!("override key {path:?} needs a section"))?;
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let table = doc
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| anyhow!("{section} is not a table"))?;
    table.insert(key.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn overrides_parse_literals() {
        let mut doc = toml::Table::new();
        apply_override(&mut doc, "global.K=16").unwrap();
        apply_override(&mut doc, "normal_form.cutoffs=[1.0, 3.0]").unwrap();
        apply_override(&mut doc, "divisor.variant=nplus-exponent").unwrap();
        let cfg: RunConfig = toml::Value::Table(doc).try_into().unwrap();
        assert_eq!(cfg.global.k, 16);
        assert_eq!(cfg.normal_form.cutoffs, vec![1.0, 3.0]);
        assert_eq!(cfg.divisor.variant, EnvelopeVariant::NplusExponent);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[global]\nk = 3\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
    }
}
