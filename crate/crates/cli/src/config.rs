//! Experiment configuration file.
//!
//! Flat TOML with one table per concern; every key is optional and defaults
//! to the reference system. Unknown keys are rejected by name.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use vlc_an_core::designer::db_to_linear;
use vlc_an_core::link::ELEMENTARY_CHARGE;
use vlc_an_core::montecarlo::BaseDesign;
use vlc_an_core::{
    Branch, CcpSettings, ClipLevels, DesignSpec, EveCsi, GridResolution, LuminaireConfig, NoiseParams, Point,
    ReceiverOptics, RoomLayout, Scheme, SweepConfig, SweepVariable, SystemModel,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub room: Room,
    pub receiver: Receiver,
    pub led: Led,
    pub noise: Noise,
    pub design: Design,
    pub simulation: Simulation,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Room {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub receiver_height: f64,
    pub semi_angle_deg: f64,
    /// `[x, y, z]` per luminaire, metres.
    pub luminaires: Vec<[f64; 3]>,
}

impl Default for Room {
    fn default() -> Self {
        let r = RoomLayout::reference();
        Self {
            length: r.length(),
            width: r.width(),
            height: r.height(),
            receiver_height: r.receiver_height(),
            semi_angle_deg: r.semi_angle_deg(),
            luminaires: r.luminaires().iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Receiver {
    pub area: f64,
    pub fov_deg: f64,
    pub filter_gain: f64,
    pub refractive_index: f64,
    pub responsivity: f64,
}

impl Default for Receiver {
    fn default() -> Self {
        let o = ReceiverOptics::reference();
        Self {
            area: o.area,
            fov_deg: o.fov_deg,
            filter_gain: o.filter_gain,
            refractive_index: o.refractive_index,
            responsivity: o.responsivity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Led {
    pub chips: u32,
    pub an_chips: u32,
    /// W/A.
    pub conversion: f64,
    pub i_min: f64,
    pub i_max: f64,
    /// Bias current; twice `design.sigma_p` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_dc: Option<f64>,
    pub bandwidth_hz: f64,
}

impl Default for Led {
    fn default() -> Self {
        let c = LuminaireConfig::reference();
        Self {
            chips: c.chips,
            an_chips: c.an_chips,
            conversion: c.conversion,
            i_min: 0.0,
            i_max: 1.0,
            i_dc: None,
            bandwidth_hz: NoiseParams::reference().bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub ambient_photocurrent: f64,
    pub preamp_density: f64,
    pub ambient_fov_deg: f64,
}

impl Default for Noise {
    fn default() -> Self {
        let n = NoiseParams::reference();
        Self {
            ambient_photocurrent: n.ambient_photocurrent,
            preamp_density: n.preamp_density,
            ambient_fov_deg: n.ambient_fov_deg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Csi {
    Known,
    Unknown,
}

impl From<Csi> for EveCsi {
    fn from(c: Csi) -> Self {
        match c {
            Csi::Known => EveCsi::Known,
            Csi::Unknown => EveCsi::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Design {
    pub csi: Csi,
    /// Square root of the per-luminaire power cap, A.
    pub sigma_p: f64,
    pub lambda_db: f64,
    pub r: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for Design {
    fn default() -> Self {
        let c = CcpSettings::default();
        Self {
            csi: Csi::Known,
            sigma_p: 0.25,
            lambda_db: 0.0,
            r: 0.5,
            epsilon: c.epsilon,
            max_iterations: c.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub seed: u64,
    pub placements: usize,
    pub eve_realizations: usize,
    /// Quadrature nodes per axis for the eavesdropper statistics.
    pub grid_points: usize,
    /// Largest tolerated fraction of failed solves per record.
    pub max_failure_fraction: f64,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            seed: 0,
            placements: 200,
            eve_realizations: 1000,
            grid_points: GridResolution::default().nx,
            max_failure_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    SigmaP,
    LambdaDb,
    R,
    AnChips,
}

impl From<Variable> for SweepVariable {
    fn from(v: Variable) -> Self {
        match v {
            Variable::SigmaP => SweepVariable::SigmaP,
            Variable::LambdaDb => SweepVariable::LambdaDb,
            Variable::R => SweepVariable::R,
            Variable::AnChips => SweepVariable::AnChips,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    OneBranchAn,
    OneBranchNoAn,
    TwoBranchAn,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::OneBranchAn => Scheme::OneBranchAn,
            SchemeName::OneBranchNoAn => Scheme::OneBranchNoAn,
            SchemeName::TwoBranchAn => Scheme::TwoBranchAn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub variable: Variable,
    pub grid: Vec<f64>,
    pub schemes: Vec<SchemeName>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            variable: Variable::SigmaP,
            grid: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35],
            schemes: vec![SchemeName::OneBranchAn, SchemeName::OneBranchNoAn, SchemeName::TwoBranchAn],
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Cross-field checks the core constructors do not cover.
    pub fn check(&self) -> anyhow::Result<()> {
        if self.simulation.placements == 0 {
            bail!("simulation.placements: must be at least 1");
        }
        if self.simulation.eve_realizations == 0 {
            bail!("simulation.eve_realizations: must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.simulation.max_failure_fraction) {
            bail!("simulation.max_failure_fraction: must lie in [0, 1]");
        }
        if self.sweep.grid.is_empty() {
            bail!("sweep.grid: must not be empty");
        }
        if self.sweep.schemes.is_empty() {
            bail!("sweep.schemes: must not be empty");
        }
        if !(self.design.sigma_p > 0.0) {
            bail!("design.sigma_p: must be positive, got {}", self.design.sigma_p);
        }
        self.system().map(|_| ())
    }

    pub fn system(&self) -> anyhow::Result<SystemModel> {
        let r = &self.room;
        let layout = RoomLayout::new(
            r.length,
            r.width,
            r.height,
            r.receiver_height,
            r.luminaires.iter().map(|p| Point::new(p[0], p[1], p[2])).collect(),
            r.semi_angle_deg,
        )
        .context("[room]")?;
        let o = &self.receiver;
        let optics = ReceiverOptics::new(o.area, o.fov_deg, o.filter_gain, o.refractive_index, o.responsivity)
            .context("[receiver]")?;
        let noise = NoiseParams {
            bandwidth_hz: self.led.bandwidth_hz,
            ambient_photocurrent: self.noise.ambient_photocurrent,
            preamp_density: self.noise.preamp_density,
            elementary_charge: ELEMENTARY_CHARGE,
            ambient_fov_deg: self.noise.ambient_fov_deg,
        };
        let res = GridResolution::square(self.simulation.grid_points).context("simulation.grid_points")?;
        SystemModel::new(layout, optics, noise, res).context("[noise]")
    }

    pub fn ccp(&self) -> CcpSettings {
        CcpSettings {
            epsilon: self.design.epsilon,
            max_iterations: self.design.max_iterations,
            init_seed: self.simulation.seed,
            ..CcpSettings::default()
        }
    }

    pub fn levels(&self) -> anyhow::Result<ClipLevels> {
        let i_dc = self.led.i_dc.unwrap_or(2.0 * self.design.sigma_p);
        ClipLevels::new(self.led.i_min, self.led.i_max, i_dc).context("[led]")
    }

    pub fn luminaire(&self) -> anyhow::Result<LuminaireConfig> {
        LuminaireConfig::new(self.led.chips, self.led.an_chips, self.led.conversion).context("[led]")
    }

    /// Single-placement design problem from `[design]` and `[led]`.
    pub fn design_spec(&self, branch: Branch, csi: EveCsi) -> anyhow::Result<DesignSpec> {
        let d = &self.design;
        let spec = DesignSpec::new(
            branch,
            csi,
            db_to_linear(d.lambda_db),
            DVector::from_element(self.room.luminaires.len(), d.sigma_p * d.sigma_p),
            self.levels()?,
            self.luminaire()?,
        )
        .context("[design]")?;
        spec.with_split(d.r).context("design.r")
    }

    pub fn sweep_config(&self) -> anyhow::Result<SweepConfig> {
        let mut cfg = SweepConfig::new(self.sweep.variable.into(), self.sweep.grid.clone());
        cfg.base = BaseDesign {
            csi: self.design.csi.into(),
            sigma_p: self.design.sigma_p,
            lambda_db: self.design.lambda_db,
            r: self.design.r,
            chips: self.led.chips,
            an_chips: self.led.an_chips,
            conversion: self.led.conversion,
            i_min: self.led.i_min,
            i_max: self.led.i_max,
            i_dc: self.led.i_dc,
        };
        cfg.schemes = self.sweep.schemes.iter().map(|s| (*s).into()).collect();
        cfg.placements = self.simulation.placements;
        cfg.eve_realizations = self.simulation.eve_realizations;
        cfg.seed = self.simulation.seed;
        cfg.ccp = self.ccp();
        cfg.validate().context("[sweep]")?;
        Ok(cfg)
    }
}
