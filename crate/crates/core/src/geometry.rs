//! Room geometry and line-of-sight Lambertian channel gains.
//!
//! Both the transmitting luminaires and the receiving photodiodes are
//! oriented vertically (luminaires facing down, photodiodes facing up), so
//! the emission and incidence angles of a link are equal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Point;

/// Room box and luminaire placement.
///
/// The coordinate origin is the centre of the floor; the room spans
/// `[-length/2, length/2] x [-width/2, width/2] x [0, height]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomLayout {
    length: f64,
    width: f64,
    height: f64,
    receiver_height: f64,
    luminaires: Vec<Point>,
    semi_angle_deg: f64,
}

impl RoomLayout {
    pub fn new(
        length: f64,
        width: f64,
        height: f64,
        receiver_height: f64,
        luminaires: Vec<Point>,
        semi_angle_deg: f64,
    ) -> Result<Self> {
        for (field, v) in [("length", length), ("width", width), ("height", height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(0.0..height).contains(&receiver_height) {
            return Err(Error::InvalidParameter {
                field: "receiver_height",
                reason: format!("must lie in [0, {height}), got {receiver_height}"),
            });
        }
        if !(semi_angle_deg > 0.0 && semi_angle_deg < 90.0) {
            return Err(Error::InvalidParameter {
                field: "semi_angle_deg",
                reason: format!("must lie in (0, 90), got {semi_angle_deg}"),
            });
        }
        if luminaires.is_empty() {
            return Err(Error::InvalidParameter {
                field: "luminaires",
                reason: "at least one luminaire is required".into(),
            });
        }
        for (k, p) in luminaires.iter().enumerate() {
            let inside = p.x.abs() <= length / 2.0
                && p.y.abs() <= width / 2.0
                && (0.0..=height).contains(&p.z);
            if !inside {
                return Err(Error::InvalidParameter {
                    field: "luminaires",
                    reason: format!("luminaire {k} at {p} lies outside the room"),
                });
            }
        }
        Ok(Self {
            length,
            width,
            height,
            receiver_height,
            luminaires,
            semi_angle_deg,
        })
    }

    /// 5 m x 5 m x 3 m room, receiver plane at 0.5 m, four ceiling luminaires
    /// on a square of half-side sqrt(2), 60 degree semi-angle.
    pub fn reference() -> Self {
        let s = std::f64::consts::SQRT_2;
        Self::new(
            5.0,
            5.0,
            3.0,
            0.5,
            vec![
                Point::new(-s, -s, 3.0),
                Point::new(s, -s, 3.0),
                Point::new(s, s, 3.0),
                Point::new(-s, s, 3.0),
            ],
            60.0,
        )
        .expect("reference layout is valid")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn receiver_height(&self) -> f64 {
        self.receiver_height
    }

    pub fn luminaires(&self) -> &[Point] {
        &self.luminaires
    }

    pub fn num_luminaires(&self) -> usize {
        self.luminaires.len()
    }

    pub fn semi_angle_deg(&self) -> f64 {
        self.semi_angle_deg
    }

    /// Lambertian order `-ln 2 / ln cos(semi-angle)`.
    pub fn lambertian_order(&self) -> f64 {
        -std::f64::consts::LN_2 / self.semi_angle_deg.to_radians().cos().ln()
    }

    /// Whether `p` lies on the receiver plane inside the room footprint.
    pub fn on_receiver_plane(&self, p: &Point) -> bool {
        (p.z - self.receiver_height).abs() <= 1e-9
            && p.x.abs() <= self.length / 2.0 + 1e-12
            && p.y.abs() <= self.width / 2.0 + 1e-12
    }
}

/// Photodiode front end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverOptics {
    /// Detector area, m^2.
    pub area: f64,
    /// Field of view, degrees.
    pub fov_deg: f64,
    /// Optical filter gain.
    pub filter_gain: f64,
    /// Concentrator refractive index.
    pub refractive_index: f64,
    /// Responsivity, A/W.
    pub responsivity: f64,
}

impl ReceiverOptics {
    pub fn new(
        area: f64,
        fov_deg: f64,
        filter_gain: f64,
        refractive_index: f64,
        responsivity: f64,
    ) -> Result<Self> {
        let optics = Self {
            area,
            fov_deg,
            filter_gain,
            refractive_index,
            responsivity,
        };
        optics.validate()?;
        Ok(optics)
    }

    pub fn reference() -> Self {
        Self {
            area: 1e-4,
            fov_deg: 60.0,
            filter_gain: 1.0,
            refractive_index: 1.5,
            responsivity: 0.54,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::InvalidParameter { field, reason });
        if !(self.area > 0.0) {
            return bad("area", format!("must be positive, got {}", self.area));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 90.0) {
            return bad("fov_deg", format!("must lie in (0, 90], got {}", self.fov_deg));
        }
        if !(self.filter_gain > 0.0) {
            return bad("filter_gain", format!("must be positive, got {}", self.filter_gain));
        }
        if !(self.refractive_index >= 1.0) {
            return bad(
                "refractive_index",
                format!("must be at least 1, got {}", self.refractive_index),
            );
        }
        if !(self.responsivity > 0.0) {
            return bad("responsivity", format!("must be positive, got {}", self.responsivity));
        }
        Ok(())
    }

    /// Concentrator gain inside the field of view.
    pub fn concentrator_gain(&self) -> f64 {
        let s = self.fov_deg.to_radians().sin();
        self.refractive_index * self.refractive_index / (s * s)
    }
}

/// DC gains from every luminaire to one receiver, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(DVector<f64>);

impl ChannelVector {
    /// Wraps raw gains; every entry must be finite and nonnegative.
    pub fn new(gains: DVector<f64>) -> Result<Self> {
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidParameter {
                field: "gains",
                reason: format!("channel gains must be finite and nonnegative, got {g}"),
            });
        }
        Ok(Self(gains))
    }

    pub fn from_slice(gains: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(gains))
    }

    pub fn gains(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Line-of-sight gain from one luminaire to an upward-facing receiver.
pub fn los_gain(
    luminaire: &Point,
    receiver: &Point,
    layout: &RoomLayout,
    optics: &ReceiverOptics,
) -> Result<f64> {
    let d = luminaire - receiver;
    let dz = d.z;
    if !(dz > 0.0) {
        return Err(Error::Domain(format!(
            "receiver at {receiver} is not below luminaire at {luminaire}"
        )));
    }
    let dist2 = d.norm_squared();
    let cos_angle = dz / dist2.sqrt();
    if cos_angle < optics.fov_deg.to_radians().cos() {
        return Ok(0.0);
    }
    let m = layout.lambertian_order();
    Ok((m + 1.0) * optics.area / (2.0 * std::f64::consts::PI * dist2)
        * cos_angle.powf(m)
        * optics.filter_gain
        * optics.concentrator_gain()
        * cos_angle)
}

/// Gains from all luminaires to a receiver on the receiver plane.
pub fn channel_vector(
    layout: &RoomLayout,
    optics: &ReceiverOptics,
    receiver: &Point,
) -> Result<ChannelVector> {
    if !layout.on_receiver_plane(receiver) {
        return Err(Error::Domain(format!(
            "receiver {receiver} is not on the receiver plane z = {}",
            layout.receiver_height()
        )));
    }
    let gains = layout
        .luminaires()
        .iter()
        .map(|l| los_gain(l, receiver, layout, optics))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelVector(DVector::from_vec(gains)))
}

/// Number of quadrature nodes along each room axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridResolution {
    pub nx: usize,
    pub ny: usize,
}

impl GridResolution {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter {
                field: "resolution",
                reason: format!("need at least 2 nodes per axis, got {nx}x{ny}"),
            });
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }
}

impl Default for GridResolution {
    fn default() -> Self {
        Self { nx: 100, ny: 100 }
    }
}

/// Trapezoid nodes and normalized weights over the receiver plane. The
/// weights sum to one, so a weighted sum is the area average.
fn trapezoid_nodes(layout: &RoomLayout, res: GridResolution) -> Vec<(f64, f64, f64)> {
    let axis = |n: usize, extent: f64| -> Vec<(f64, f64)> {
        let step = extent / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                (-extent / 2.0 + i as f64 * step, w / (n - 1) as f64)
            })
            .collect()
    };
    let xs = axis(res.nx, layout.length());
    let ys = axis(res.ny, layout.width());
    let mut nodes = Vec::with_capacity(res.nx * res.ny);
    for &(x, wx) in &xs {
        for &(y, wy) in &ys {
            nodes.push((x, y, wx * wy));
        }
    }
    nodes
}

/// Area average of `f(x, y)` over the receiver plane by composite trapezoid
/// quadrature.
pub fn grid_integral<F>(f: F, layout: &RoomLayout, res: GridResolution) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    trapezoid_nodes(layout, res)
        .into_iter()
        .map(|(x, y, w)| w * f(x, y))
        .sum()
}

/// Position-averaged statistics of an eavesdropper channel, for an
/// eavesdropper uniformly distributed over the receiver plane.
#[derive(Debug, Clone, PartialEq)]
pub struct EveChannelStats {
    /// `E[h_E]`.
    pub mean_gain: DVector<f64>,
    /// `E[h_E h_E^T]`.
    pub correlation: DMatrix<f64>,
    pub resolution: GridResolution,
}

impl EveChannelStats {
    pub fn compute(layout: &RoomLayout, optics: &ReceiverOptics, res: GridResolution) -> Result<Self> {
        let n = layout.num_luminaires();
        let mut mean_gain = DVector::zeros(n);
        let mut correlation = DMatrix::zeros(n, n);
        for (x, y, w) in trapezoid_nodes(layout, res) {
            let h = channel_vector(layout, optics, &Point::new(x, y, layout.receiver_height()))?;
            let h = h.gains();
            mean_gain.axpy(w, h, 1.0);
            correlation.ger(w, h, h, 1.0);
        }
        // ger accumulates identical products in both triangles, but enforce
        // exact symmetry anyway.
        let correlation = (&correlation + correlation.transpose()) * 0.5;
        Ok(Self {
            mean_gain,
            correlation,
            resolution: res,
        })
    }
}

/// `E[h_E h_E^T]` over the receiver plane.
pub fn average_eve_matrix(
    layout: &RoomLayout,
    optics: &ReceiverOptics,
    res: GridResolution,
) -> Result<DMatrix<f64>> {
    Ok(EveChannelStats::compute(layout, optics, res)?.correlation)
}
