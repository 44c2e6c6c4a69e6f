//! Constellation, air-node and device layout.
//!
//! Two layouts are supported: a single equatorial orbit with air nodes evenly
//! spaced on the equator, and a Walker-delta constellation whose air nodes sit
//! at the sub-satellite points of the snapshot epoch. Positions are frozen at
//! that epoch for the whole run.

pub mod geometry;
pub(crate) mod isl;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coverage::CoverageMap;
use crate::error::{Error, Result};
pub use geometry::{GeoPoint, EARTH_RADIUS_KM};
pub use isl::{derive_isl_graph, hop_distances, EdgeKind, HopMatrix, IslEdge, IslGraph};

/// Flying height of air nodes used by both layouts.
pub const AIR_NODE_ALTITUDE_M: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteSpec {
    pub id: usize,
    pub orbit_index: usize,
    pub slot_index: usize,
    pub altitude_km: f64,
    /// Argument of latitude at epoch zero, `[0, 360)`.
    pub phase_deg: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
}

impl SatelliteSpec {
    /// Unit position vector at `epoch_s` seconds (earth rotation ignored).
    pub fn unit_position(&self, epoch_s: f64) -> [f64; 3] {
        let u = self.phase_deg + geometry::mean_motion_deg_s(self.altitude_km) * epoch_s;
        geometry::orbit_unit_position(self.raan_deg, self.inclination_deg, u)
    }

    /// Radial projection onto the earth surface.
    pub fn subsatellite_point(&self, epoch_s: f64) -> GeoPoint {
        GeoPoint::from_unit(self.unit_position(epoch_s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirNodeSpec {
    pub id: usize,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
    pub device_ids: Vec<usize>,
}

impl AirNodeSpec {
    pub fn ground_point(&self) -> GeoPoint {
        GeoPoint::new(self.latitude_deg, self.longitude_deg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub id: usize,
    pub air_id: usize,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
}

/// The four hops of model delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkClass {
    /// Satellite to ground device (broadcast path).
    SatGround,
    /// Ground device to air node.
    GroundAir,
    /// Air node to its access satellite.
    AirSat,
    /// Neighbouring satellites.
    SatSat,
}

/// How the transmission rate of a link is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Channel {
    /// Fixed data rate.
    Rate { rate_bps: f64 },
    /// Shannon capacity scaled by the rain attenuation ratio.
    Shannon {
        bandwidth_hz: f64,
        power: f64,
        fading_gain: f64,
        noise_power: f64,
        #[serde(default = "unit_rain")]
        rain_ratio: f64,
    },
}

fn unit_rain() -> f64 {
    1.0
}

impl Channel {
    /// Achievable rate in bits per second.
    pub fn capacity_bps(&self) -> f64 {
        match *self {
            Channel::Rate { rate_bps } => rate_bps,
            Channel::Shannon {
                bandwidth_hz,
                power,
                fading_gain,
                noise_power,
                rain_ratio,
            } => {
                let snr = power * fading_gain * fading_gain / (noise_power * noise_power);
                rain_ratio * bandwidth_hz * (1.0 + snr).log2()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub class: LinkClass,
    pub channel: Channel,
    /// Propagation delay (link length over propagation speed).
    pub prop_delay_s: f64,
}

impl LinkParams {
    pub fn rate(class: LinkClass, rate_bps: f64, prop_delay_s: f64) -> Self {
        LinkParams {
            class,
            channel: Channel::Rate { rate_bps },
            prop_delay_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = format!("links.{:?}", self.class);
        if !(self.prop_delay_s >= 0.0 && self.prop_delay_s.is_finite()) {
            return Err(Error::config(field, "prop_delay_s must be finite and >= 0"));
        }
        match self.channel {
            Channel::Rate { rate_bps } if !(rate_bps > 0.0 && rate_bps.is_finite()) => {
                Err(Error::config(field, "rate_bps must be positive"))
            }
            Channel::Shannon {
                bandwidth_hz,
                noise_power,
                rain_ratio,
                ..
            } => {
                if !(rain_ratio > 0.0 && rain_ratio <= 1.0) {
                    Err(Error::config(field, "rain_ratio must lie in (0, 1]"))
                } else if !(bandwidth_hz > 0.0) || noise_power == 0.0 {
                    Err(Error::config(field, "bandwidth and noise must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Link parameters for every link class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTable {
    pub sat_ground: LinkParams,
    pub ground_air: LinkParams,
    pub air_sat: LinkParams,
    pub sat_sat: LinkParams,
}

impl LinkTable {
    /// Reference network settings: 32 Gbps air-node budget shared by its
    /// devices, 6000 Mbps satellite budget shared by its air nodes, 30 Gbps
    /// inter-satellite links with 20 ms propagation, 5 ms on each access hop.
    /// The downlink broadcast reuses the satellite budget and crosses both
    /// access hops (10 ms).
    pub fn reference() -> Self {
        LinkTable {
            sat_ground: LinkParams::rate(LinkClass::SatGround, 6.0e9, 0.010),
            ground_air: LinkParams::rate(LinkClass::GroundAir, 32.0e9, 0.005),
            air_sat: LinkParams::rate(LinkClass::AirSat, 6.0e9, 0.005),
            sat_sat: LinkParams::rate(LinkClass::SatSat, 30.0e9, 0.020),
        }
    }

    pub fn get(&self, class: LinkClass) -> &LinkParams {
        match class {
            LinkClass::SatGround => &self.sat_ground,
            LinkClass::GroundAir => &self.ground_air,
            LinkClass::AirSat => &self.air_sat,
            LinkClass::SatSat => &self.sat_sat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sat_ground.validate()?;
        self.ground_air.validate()?;
        self.air_sat.validate()?;
        self.sat_sat.validate()
    }
}

impl Default for LinkTable {
    fn default() -> Self {
        LinkTable::reference()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    SingleOrbit,
    Walker {
        n_planes: usize,
        sats_per_plane: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub layout: Layout,
    pub satellites: Vec<SatelliteSpec>,
    pub air_nodes: Vec<AirNodeSpec>,
    pub devices: Vec<DeviceSpec>,
    pub links: LinkTable,
    /// Snapshot epoch at which positions are frozen.
    pub epoch_s: f64,
}

impl NetworkTopology {
    pub fn n_sats(&self) -> usize {
        self.satellites.len()
    }

    pub fn n_air(&self) -> usize {
        self.air_nodes.len()
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_orbits(&self) -> usize {
        match self.layout {
            Layout::SingleOrbit => 1,
            Layout::Walker { n_planes, .. } => n_planes,
        }
    }

    pub fn is_single_orbit(&self) -> bool {
        self.layout == Layout::SingleOrbit
    }

    /// Satellite ids of each orbit in slot order.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut orbits = vec![Vec::new(); self.n_orbits()];
        for s in &self.satellites {
            orbits[s.orbit_index].push(s.id);
        }
        for o in &mut orbits {
            o.sort_by_key(|&id| self.satellites[id].slot_index);
        }
        orbits
    }

    /// Plain-text table, one row per satellite, air node and device.
    ///
    /// Columns: `id,kind,lat_deg,lon_deg,alt_m,parent,access`. The parent of a
    /// satellite is its orbit index, of an air node `-`, of a device its air
    /// node. `access` is the access satellite when a coverage map is given.
    pub fn to_table(&self, coverage: Option<&CoverageMap>) -> String {
        let mut out = String::from("id,kind,lat_deg,lon_deg,alt_m,parent,access\n");
        for s in &self.satellites {
            let p = s.subsatellite_point(self.epoch_s);
            let _ = writeln!(
                out,
                "{},satellite,{:.6},{:.6},{:.1},{},-",
                s.id,
                p.lat_deg,
                p.lon_deg,
                s.altitude_km * 1000.0,
                s.orbit_index
            );
        }
        let access = |air: usize| -> String {
            coverage
                .map(|c| c.access[air].to_string())
                .unwrap_or_else(|| "-".into())
        };
        for a in &self.air_nodes {
            let _ = writeln!(
                out,
                "{},air,{:.6},{:.6},{:.1},-,{}",
                a.id,
                a.latitude_deg,
                a.longitude_deg,
                a.altitude_m,
                access(a.id)
            );
        }
        for d in &self.devices {
            let _ = writeln!(
                out,
                "{},device,{:.6},{:.6},0.0,{},{}",
                d.id,
                d.latitude_deg,
                d.longitude_deg,
                d.air_id,
                access(d.air_id)
            );
        }
        out
    }
}

fn attach_devices(air_nodes: &mut [AirNodeSpec], devices_per_air: usize) -> Vec<DeviceSpec> {
    let mut devices = Vec::with_capacity(air_nodes.len() * devices_per_air);
    for a in air_nodes.iter_mut() {
        for _ in 0..devices_per_air {
            let id = devices.len();
            a.device_ids.push(id);
            devices.push(DeviceSpec {
                id,
                air_id: a.id,
                latitude_deg: a.latitude_deg,
                longitude_deg: a.longitude_deg,
            });
        }
    }
    devices
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::config(field, "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Equatorial single-orbit layout with air nodes evenly spaced on the equator.
pub fn build_single_orbit(
    n_sats: usize,
    altitude_km: f64,
    n_air: usize,
    devices_per_air: usize,
    links: LinkTable,
) -> Result<NetworkTopology> {
    positive("topology.n_sats", n_sats)?;
    positive("topology.n_air", n_air)?;
    positive("topology.devices_per_air", devices_per_air)?;
    if !(altitude_km > 0.0) {
        return Err(Error::config("topology.altitude_km", "must be positive"));
    }
    links.validate()?;

    let satellites = (0..n_sats)
        .map(|k| SatelliteSpec {
            id: k,
            orbit_index: 0,
            slot_index: k,
            altitude_km,
            phase_deg: k as f64 * 360.0 / n_sats as f64,
            inclination_deg: 0.0,
            raan_deg: 0.0,
        })
        .collect();
    let mut air_nodes: Vec<AirNodeSpec> = (0..n_air)
        .map(|j| AirNodeSpec {
            id: j,
            latitude_deg: 0.0,
            longitude_deg: geometry::wrap_lon(j as f64 * 360.0 / n_air as f64),
            altitude_m: AIR_NODE_ALTITUDE_M,
            device_ids: Vec::new(),
        })
        .collect();
    let devices = attach_devices(&mut air_nodes, devices_per_air);
    Ok(NetworkTopology {
        layout: Layout::SingleOrbit,
        satellites,
        air_nodes,
        devices,
        links,
        epoch_s: 0.0,
    })
}

/// Angular offset of co-located air nodes around their cell centre.
const CELL_SPREAD_DEG: f64 = 0.5;

/// Walker-delta constellation (phasing factor 0) with `air_per_cell` air nodes
/// around every sub-satellite point at epoch zero.
pub fn build_walker(
    n_planes: usize,
    sats_per_plane: usize,
    inclination_deg: f64,
    altitude_km: f64,
    air_per_cell: usize,
    devices_per_air: usize,
    links: LinkTable,
) -> Result<NetworkTopology> {
    if n_planes < 2 {
        return Err(Error::config("topology.n_planes", "walker needs at least 2 planes"));
    }
    if sats_per_plane < 3 {
        return Err(Error::config(
            "topology.sats_per_plane",
            "walker needs at least 3 satellites per plane",
        ));
    }
    if !(inclination_deg > 0.0 && inclination_deg < 180.0) {
        return Err(Error::config(
            "topology.inclination_deg",
            "inclination must lie strictly between 0 and 180 degrees",
        ));
    }
    if !(altitude_km > 0.0) {
        return Err(Error::config("topology.altitude_km", "must be positive"));
    }
    positive("topology.air_per_cell", air_per_cell)?;
    positive("topology.devices_per_air", devices_per_air)?;
    links.validate()?;

    let mut satellites = Vec::with_capacity(n_planes * sats_per_plane);
    for p in 0..n_planes {
        for k in 0..sats_per_plane {
            satellites.push(SatelliteSpec {
                id: satellites.len(),
                orbit_index: p,
                slot_index: k,
                altitude_km,
                phase_deg: k as f64 * 360.0 / sats_per_plane as f64,
                inclination_deg,
                raan_deg: p as f64 * 360.0 / n_planes as f64,
            });
        }
    }

    let mut air_nodes = Vec::with_capacity(satellites.len() * air_per_cell);
    for s in &satellites {
        let centre = s.subsatellite_point(0.0);
        for j in 0..air_per_cell {
            let p = if air_per_cell == 1 {
                centre
            } else {
                centre.destination(360.0 * j as f64 / air_per_cell as f64, CELL_SPREAD_DEG)
            };
            air_nodes.push(AirNodeSpec {
                id: air_nodes.len(),
                latitude_deg: p.lat_deg,
                longitude_deg: p.lon_deg,
                altitude_m: AIR_NODE_ALTITUDE_M,
                device_ids: Vec::new(),
            });
        }
    }
    let devices = attach_devices(&mut air_nodes, devices_per_air);
    Ok(NetworkTopology {
        layout: Layout::Walker {
            n_planes,
            sats_per_plane,
        },
        satellites,
        air_nodes,
        devices,
        links,
        epoch_s: 0.0,
    })
}
