//! Network realizations: AP/BS/UE/target placement, transmit/receive roles,
//! association sets, and the CF-to-MC fairness mapping.

use std::ops::{Add, Mul, Sub};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }
}

impl Add for Position3D {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3D {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position3D {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Horizontal axis along which a ULA is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayAxis {
    X,
    #[default]
    Y,
}

/// Uniform linear array; `spacing` is in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub num_elements: usize,
    pub spacing: f64,
    pub axis: ArrayAxis,
}

impl ArrayConfig {
    pub fn ula(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5, ArrayAxis::Y)
    }

    pub fn new(num_elements: usize, spacing: f64, axis: ArrayAxis) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::config("num_elements", "array needs at least one element"));
        }
        if !(spacing > 0.0) {
            return Err(Error::config("spacing", "element spacing must be positive"));
        }
        Ok(Self {
            num_elements,
            spacing,
            axis,
        })
    }
}

/// Axis-aligned rectangle in the horizontal plane (closed on all sides).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Square service area `[0, side]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceArea {
    pub side_m: f64,
}

impl ServiceArea {
    pub fn new(side_m: f64) -> Result<Self> {
        if !(side_m > 0.0 && side_m.is_finite()) {
            return Err(Error::config("area_m", "side length must be positive"));
        }
        Ok(Self { side_m })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.side_m).contains(&x) && (0.0..=self.side_m).contains(&y)
    }

    fn sample_xy<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        (
            rng.random::<f64>() * self.side_m,
            rng.random::<f64>() * self.side_m,
        )
    }

    /// Tiles the area into `count` equal rectangles.
    ///
    /// Supported counts are 2 (two vertical halves split at `x = side/2`) and
    /// perfect squares `g²` (a `g × g` grid). Cell `ix·g + iy` spans column
    /// `ix` along x and row `iy` along y.
    pub fn tile(&self, count: usize) -> Result<Vec<Rect>> {
        let s = self.side_m;
        if count == 2 {
            return Ok(vec![
                Rect { x_min: 0.0, x_max: 0.5 * s, y_min: 0.0, y_max: s },
                Rect { x_min: 0.5 * s, x_max: s, y_min: 0.0, y_max: s },
            ]);
        }
        let g = (count as f64).sqrt().round() as usize;
        if count == 0 || g * g != count {
            return Err(Error::config(
                "layout",
                format!("{count} cells cannot tile the area (use 1, 2, or a perfect square)"),
            ));
        }
        let w = s / g as f64;
        let mut cells = Vec::with_capacity(count);
        for ix in 0..g {
            for iy in 0..g {
                cells.push(Rect {
                    x_min: ix as f64 * w,
                    x_max: (ix + 1) as f64 * w,
                    y_min: iy as f64 * w,
                    y_max: (iy + 1) as f64 * w,
                });
            }
        }
        Ok(cells)
    }

    /// Index of the first tile containing `(x, y)`; shared boundaries resolve
    /// to the lower index.
    pub fn locate(&self, tiles: &[Rect], x: f64, y: f64) -> Result<usize> {
        if !self.contains(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        tiles
            .iter()
            .position(|r| r.contains(x, y))
            .ok_or(Error::OutOfBounds { x, y })
    }
}

/// How rAPs/tAPs are associated with the sensing zone of a probed cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingAssociation {
    /// Every tAP illuminates and every rAP listens.
    #[default]
    Full,
    /// Only APs inside the zone containing the probed cell take part.
    Zone,
}

/// Serving-set rule for UEs in the CF network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UeAssociation {
    #[default]
    AllTx,
    /// The `q` tAPs nearest to each UE.
    NearestTx(usize),
}

/// Parameters of one CF deployment family.
#[derive(Debug, Clone, PartialEq)]
pub struct CfParams {
    pub area: ServiceArea,
    pub m_cf: usize,
    pub na_cf: usize,
    pub m_tx: usize,
    pub m_rx: usize,
    pub per_ap_power_w: f64,
    pub ap_height_m: f64,
    pub n_zones: usize,
    pub sensing: SensingAssociation,
    pub ue_association: UeAssociation,
}

/// Tx/rx subsets taking part in sensing one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSet {
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfDeployment {
    pub area: ServiceArea,
    pub ap_positions: Vec<Position3D>,
    pub ap_array: ArrayConfig,
    pub tx_set: Vec<usize>,
    pub rx_set: Vec<usize>,
    pub zones: Vec<Rect>,
    pub per_ap_power_w: f64,
    pub sensing_sets: Vec<SensingSet>,
    pub ue_association: UeAssociation,
}

impl CfDeployment {
    /// Serving tAP set of every UE.
    pub fn serving_sets(&self, ues: &[Position3D]) -> Vec<Vec<usize>> {
        ues.iter()
            .map(|&ue| match self.ue_association {
                UeAssociation::AllTx => self.tx_set.clone(),
                UeAssociation::NearestTx(q) => {
                    let mut set = nearest(&self.ap_positions, &self.tx_set, ue, q.max(1));
                    set.sort_unstable();
                    set
                }
            })
            .collect()
    }

    /// Sensing set for the zone containing `p`.
    pub fn sensing_set_for(&self, p: Position3D) -> Result<&SensingSet> {
        let zone = self.area.locate(&self.zones, p.x, p.y)?;
        Ok(&self.sensing_sets[zone])
    }
}

fn nearest(positions: &[Position3D], pool: &[usize], to: Position3D, q: usize) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = pool
        .iter()
        .map(|&m| (positions[m].distance(to), m))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(q).map(|(_, m)| m).collect()
}

fn validate_cf(p: &CfParams) -> Result<()> {
    if p.m_tx == 0 {
        return Err(Error::config("m_tx", "at least one transmitting AP is required"));
    }
    if p.m_rx == 0 {
        return Err(Error::config("m_rx", "at least one receiving AP is required"));
    }
    if p.m_tx + p.m_rx != p.m_cf {
        return Err(Error::config(
            "m_cf",
            format!("m_tx + m_rx = {} must equal m_cf = {}", p.m_tx + p.m_rx, p.m_cf),
        ));
    }
    if p.na_cf == 0 {
        return Err(Error::config("na_cf", "APs need at least one antenna"));
    }
    if !(p.per_ap_power_w >= 0.0) {
        return Err(Error::config("p_per_tap_w", "power must be non-negative"));
    }
    if !(p.ap_height_m >= 0.0) {
        return Err(Error::config("ap_height_m", "height must be non-negative"));
    }
    Ok(())
}

/// Drops APs uniformly over the area at a fixed height and assigns roles by
/// sampling `m_tx` tAPs without replacement.
pub fn drop_cf_deployment<R: Rng + ?Sized>(params: &CfParams, rng: &mut R) -> Result<CfDeployment> {
    validate_cf(params)?;
    let area = params.area;
    let ap_positions: Vec<Position3D> = (0..params.m_cf)
        .map(|_| {
            let (x, y) = area.sample_xy(rng);
            Position3D::new(x, y, params.ap_height_m)
        })
        .collect();
    let mut tx_set = index::sample(rng, params.m_cf, params.m_tx).into_vec();
    tx_set.sort_unstable();
    let rx_set: Vec<usize> = (0..params.m_cf)
        .filter(|m| tx_set.binary_search(m).is_err())
        .collect();
    let zones = area.tile(params.n_zones)?;
    let sensing_sets = zones
        .iter()
        .map(|zone| match params.sensing {
            SensingAssociation::Full => SensingSet {
                tx: tx_set.clone(),
                rx: rx_set.clone(),
            },
            SensingAssociation::Zone => {
                let (cx, cy) = zone.center();
                let centre = Position3D::new(cx, cy, params.ap_height_m);
                let pick = |pool: &[usize]| {
                    let inside: Vec<usize> = pool
                        .iter()
                        .copied()
                        .filter(|&m| zone.contains(ap_positions[m].x, ap_positions[m].y))
                        .collect();
                    if inside.is_empty() {
                        nearest(&ap_positions, pool, centre, 1)
                    } else {
                        inside
                    }
                };
                SensingSet {
                    tx: pick(&tx_set),
                    rx: pick(&rx_set),
                }
            }
        })
        .collect();
    Ok(CfDeployment {
        area,
        ap_positions,
        ap_array: ArrayConfig::ula(params.na_cf)?,
        tx_set,
        rx_set,
        zones,
        per_ap_power_w: params.per_ap_power_w,
        sensing_sets,
        ue_association: params.ue_association,
    })
}

/// Parameters of one MC deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct McParams {
    pub area: ServiceArea,
    pub m_mc: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub per_bs_power_w: f64,
    pub bs_height_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McDeployment {
    pub area: ServiceArea,
    pub bs_positions: Vec<Position3D>,
    pub tx_array: ArrayConfig,
    pub rx_array: ArrayConfig,
    pub cells: Vec<Rect>,
    pub per_bs_power_w: f64,
}

impl McDeployment {
    /// BS whose cell contains `p`.
    pub fn responsible_bs(&self, p: Position3D) -> Result<usize> {
        self.area.locate(&self.cells, p.x, p.y)
    }

    /// UEs served by each BS.
    pub fn assign_users(&self, ues: &[Position3D]) -> Result<Vec<Vec<usize>>> {
        let mut sets = vec![Vec::new(); self.cells.len()];
        for (k, &ue) in ues.iter().enumerate() {
            sets[self.responsible_bs(ue)?].push(k);
        }
        Ok(sets)
    }
}

/// Places one BS at the centroid of every cell; no randomness involved.
pub fn drop_mc_deployment(params: &McParams) -> Result<McDeployment> {
    if params.n_tx == 0 || params.n_rx == 0 {
        return Err(Error::config("n_tx/n_rx", "BS arrays need at least one element"));
    }
    let cells = params.area.tile(params.m_mc).map_err(|_| {
        Error::config("m_mc", format!("unsupported BS count {}", params.m_mc))
    })?;
    let bs_positions = cells
        .iter()
        .map(|c| {
            let (x, y) = c.center();
            Position3D::new(x, y, params.bs_height_m)
        })
        .collect();
    Ok(McDeployment {
        area: params.area,
        bs_positions,
        tx_array: ArrayConfig::ula(params.n_tx)?,
        rx_array: ArrayConfig::ula(params.n_rx)?,
        cells,
        per_bs_power_w: params.per_bs_power_w,
    })
}

/// MC configuration with the same antenna and power totals as `cf`:
/// one BS per CF antenna index, tx/rx array sizes equal to the tAP/rAP
/// counts, and the CF network power spread over the BSs.
pub fn map_cf_to_fair_mc(cf: &CfParams) -> McParams {
    McParams {
        area: cf.area,
        m_mc: cf.na_cf,
        n_tx: cf.m_tx,
        n_rx: cf.m_rx,
        per_bs_power_w: cf.m_cf as f64 * cf.per_ap_power_w / cf.na_cf as f64,
        bs_height_m: cf.ap_height_m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub position: Position3D,
    /// m/s
    pub velocity: Position3D,
    /// Reflectivity variance in m² (linear).
    pub rcs_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityParams {
    pub area: ServiceArea,
    pub k_ues: usize,
    pub ue_height_m: f64,
    pub target_z_min_m: f64,
    pub target_z_max_m: f64,
    pub target_speed_mps: f64,
    pub rcs_variance: f64,
}

/// Drops `k_ues` users at fixed height and one target with uniform altitude
/// and a horizontal velocity of fixed speed and uniform heading.
pub fn drop_entities<R: Rng + ?Sized>(
    params: &EntityParams,
    rng: &mut R,
) -> (Vec<Position3D>, TargetState) {
    let ues = (0..params.k_ues)
        .map(|_| {
            let (x, y) = params.area.sample_xy(rng);
            Position3D::new(x, y, params.ue_height_m)
        })
        .collect();
    let (x, y) = params.area.sample_xy(rng);
    let z = params.target_z_min_m
        + rng.random::<f64>() * (params.target_z_max_m - params.target_z_min_m);
    let heading = rng.random::<f64>() * std::f64::consts::TAU;
    let velocity = Position3D::new(heading.cos(), heading.sin(), 0.0) * params.target_speed_mps;
    let target = TargetState {
        position: Position3D::new(x, y, z),
        velocity,
        rcs_variance: params.rcs_variance,
    };
    (ues, target)
}
