//! The physical system shared by every design: room, receiver optics and
//! noise model, plus lazily computed eavesdropper statistics.

use std::sync::OnceLock;

use crate::error::Result;
use crate::geometry::{channel_vector, ChannelVector, EveChannelStats, GridResolution, ReceiverOptics, RoomLayout};
use crate::link::NoiseParams;
use crate::Point;

#[derive(Debug)]
pub struct SystemModel {
    pub layout: RoomLayout,
    pub optics: ReceiverOptics,
    pub noise: NoiseParams,
    pub resolution: GridResolution,
    eve_stats: OnceLock<EveChannelStats>,
}

impl Clone for SystemModel {
    fn clone(&self) -> Self {
        let eve_stats = OnceLock::new();
        if let Some(s) = self.eve_stats.get() {
            let _ = eve_stats.set(s.clone());
        }
        Self {
            layout: self.layout.clone(),
            optics: self.optics,
            noise: self.noise,
            resolution: self.resolution,
            eve_stats,
        }
    }
}

impl SystemModel {
    pub fn new(
        layout: RoomLayout,
        optics: ReceiverOptics,
        noise: NoiseParams,
        resolution: GridResolution,
    ) -> Result<Self> {
        optics.validate()?;
        noise.validate()?;
        Ok(Self {
            layout,
            optics,
            noise,
            resolution,
            eve_stats: OnceLock::new(),
        })
    }

    pub fn reference() -> Self {
        Self::new(
            RoomLayout::reference(),
            ReceiverOptics::reference(),
            NoiseParams::reference(),
            GridResolution::default(),
        )
        .expect("reference system is valid")
    }

    pub fn num_luminaires(&self) -> usize {
        self.layout.num_luminaires()
    }

    pub fn channel(&self, receiver: &Point) -> Result<ChannelVector> {
        channel_vector(&self.layout, &self.optics, receiver)
    }

    /// Grid-averaged eavesdropper statistics, computed on first use.
    pub fn eve_stats(&self) -> Result<&EveChannelStats> {
        if let Some(s) = self.eve_stats.get() {
            return Ok(s);
        }
        let stats = EveChannelStats::compute(&self.layout, &self.optics, self.resolution)?;
        Ok(self.eve_stats.get_or_init(|| stats))
    }
}
