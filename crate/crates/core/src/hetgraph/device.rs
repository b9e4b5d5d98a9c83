//! Device sheet (immutable hardware description), runtime state, and
//! scheduling actions.

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::config::{ConfigError, KeyedConfig};
use crate::scalar::Scalar;

/// Per-cluster DVFS table: strictly increasing frequencies plus a quadratic
/// power curve `power(f) = a*f^2 + b*f + c` in Watts, with `f` in GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvfsTable<T> {
    pub freqs_hz: Vec<T>,
    pub power_coeffs: (T, T, T),
}

impl<T: Scalar> DvfsTable<T> {
    pub fn levels(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn max_freq_hz(&self) -> T {
        *self.freqs_hz.last().expect("non-empty DVFS table")
    }

    /// Power draw at DVFS level `idx`, in Watts.
    pub fn power_at(&self, idx: usize) -> T {
        let ghz = self.freqs_hz[idx] / T::c(1e9);
        let (a, b, c) = self.power_coeffs;
        a * ghz * ghz + b * ghz + c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheLevel<T> {
    pub level: u32,
    pub capacity_bytes: T,
    pub associativity: T,
    pub line_bytes: T,
    pub latency_proxy: T,
    pub bandwidth_proxy: T,
}

/// Immutable hardware description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSheet<T> {
    pub device_id: String,
    pub core_count: usize,
    pub clusters: Vec<DvfsTable<T>>,
    /// Cluster index per core; length `core_count`.
    pub cluster_of_core: Vec<usize>,
    pub cache_levels: Vec<CacheLevel<T>>,
    pub governor_flags: Vec<String>,
    /// Thermal threshold in Celsius.
    pub t_max: T,
    pub version_hash: String,
}

impl<T: Scalar> DeviceSheet<T> {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.core_count < 1 {
            return Err(GraphError::InvalidSheet("core count must be >= 1".into()));
        }
        if self.cluster_of_core.len() != self.core_count {
            return Err(GraphError::InvalidSheet("cluster membership must cover every core".into()));
        }
        if self.clusters.is_empty() {
            return Err(GraphError::InvalidSheet("at least one DVFS cluster required".into()));
        }
        for (ci, cl) in self.clusters.iter().enumerate() {
            if cl.freqs_hz.is_empty() {
                return Err(GraphError::InvalidSheet(format!("cluster {ci} has an empty DVFS table")));
            }
            if cl.freqs_hz.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(GraphError::InvalidSheet(format!(
                    "cluster {ci} DVFS table is not strictly increasing"
                )));
            }
            if cl.levels() > super::DVFS_ONEHOT_DIM {
                return Err(GraphError::InvalidSheet(format!(
                    "cluster {ci} has more than {} DVFS levels",
                    super::DVFS_ONEHOT_DIM
                )));
            }
        }
        if self.cluster_of_core.iter().any(|&c| c >= self.clusters.len()) {
            return Err(GraphError::InvalidSheet("core references unknown cluster".into()));
        }
        if !(self.t_max > T::zero()) || !self.t_max.is_finite() {
            return Err(GraphError::InvalidSheet("thermal threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn cluster_of(&self, core: usize) -> &DvfsTable<T> {
        &self.clusters[self.cluster_of_core[core]]
    }

    /// Largest frequency across all clusters, in Hz.
    pub fn max_freq_hz(&self) -> T {
        self.clusters
            .iter()
            .map(|c| c.max_freq_hz())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Read a sheet from the keyed text config (`device.*` section).
    pub fn from_config(cfg: &KeyedConfig) -> Result<Self, ConfigError> {
        let core_count = cfg.get_usize("device.cores")?;
        let mut clusters = Vec::new();
        for ci in 0.. {
            let key = format!("device.cluster.{ci}.freqs_ghz");
            if !cfg.contains(&key) {
                break;
            }
            let freqs_hz = cfg.get_list_f64(&key)?.into_iter().map(|g| T::c(g * 1e9)).collect();
            let p = cfg.get_list_f64(&format!("device.cluster.{ci}.power"))?;
            if p.len() != 3 {
                return Err(ConfigError::Parse {
                    key: format!("device.cluster.{ci}.power"),
                    msg: "expected three coefficients a;b;c".into(),
                });
            }
            clusters.push(DvfsTable { freqs_hz, power_coeffs: (T::c(p[0]), T::c(p[1]), T::c(p[2])) });
        }
        let mut cache_levels = Vec::new();
        for li in 0.. {
            let key = format!("device.cache.{li}");
            if !cfg.contains(&key) {
                break;
            }
            // level;capacity_bytes;associativity;line_bytes;latency;bandwidth
            let v = cfg.get_list_f64(&key)?;
            if v.len() != 6 {
                return Err(ConfigError::Parse { key, msg: "expected six fields".into() });
            }
            cache_levels.push(CacheLevel {
                level: v[0] as u32,
                capacity_bytes: T::c(v[1]),
                associativity: T::c(v[2]),
                line_bytes: T::c(v[3]),
                latency_proxy: T::c(v[4]),
                bandwidth_proxy: T::c(v[5]),
            });
        }
        let governor_flags = cfg
            .get_str_or("device.governors", "userspace")
            .split(';')
            .map(|s| s.trim().to_string())
            .collect();
        let sheet = Self {
            device_id: cfg.get_str("device.id")?.to_string(),
            core_count,
            clusters,
            cluster_of_core: cfg.get_list_usize("device.cluster_of_core")?,
            cache_levels,
            governor_flags,
            t_max: T::c(cfg.get_f64("device.tmax")?),
            version_hash: cfg.get_str_or("device.version", "v1").to_string(),
        };
        sheet.validate().map_err(|e| ConfigError::Parse { key: "device".into(), msg: e.to_string() })?;
        Ok(sheet)
    }
}

/// Mutable system context at scheduling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeState<T> {
    pub core_mask: Vec<bool>,
    pub dvfs_index: Vec<usize>,
    pub measured_freq_hz: Vec<T>,
    /// Exponential moving average of utilization, in [0, 1], per core.
    pub util_ema: Vec<T>,
    pub zone_temps: Vec<T>,
    pub zone_trend: Vec<T>,
    pub recent_counters: Vec<T>,
}

impl<T: Scalar> RuntimeState<T> {
    /// Idle state at ambient temperature (one thermal zone per core).
    pub fn idle(sheet: &DeviceSheet<T>, ambient: T) -> Self {
        let c = sheet.core_count;
        Self {
            core_mask: vec![true; c],
            dvfs_index: vec![0; c],
            measured_freq_hz: (0..c).map(|i| sheet.cluster_of(i).freqs_hz[0]).collect(),
            util_ema: vec![T::zero(); c],
            zone_temps: vec![ambient; c],
            zone_trend: vec![T::zero(); c],
            recent_counters: Vec::new(),
        }
    }

    pub fn validate(&self, sheet: &DeviceSheet<T>) -> Result<(), GraphError> {
        if self.core_mask.len() != sheet.core_count {
            return Err(GraphError::InvalidArgument("mask length must equal core count".into()));
        }
        for (i, &idx) in self.dvfs_index.iter().enumerate() {
            if idx >= sheet.cluster_of(i).levels() {
                return Err(GraphError::InvalidArgument(format!(
                    "state dvfs index {idx} out of range for core {i}"
                )));
            }
        }
        if self.util_ema.iter().any(|u| *u < T::zero() || *u > T::one()) {
            return Err(GraphError::InvalidArgument("utilization EMA outside [0,1]".into()));
        }
        Ok(())
    }
}

/// A scheduling action: core mask, per-core DVFS level, optional priority.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub mask: Vec<bool>,
    pub dvfs: Vec<usize>,
    pub priority: Option<u8>,
}

impl Action {
    pub fn new(mask: Vec<bool>, dvfs: Vec<usize>) -> Self {
        Self { mask, dvfs, priority: None }
    }

    pub fn active_cores(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn num_active(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Mask as a core-0-first bit string, e.g. `1100`.
    pub fn mask_string(&self) -> String {
        self.mask.iter().map(|&m| if m { '1' } else { '0' }).collect()
    }

    pub fn dvfs_string(&self) -> String {
        self.dvfs.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
    }

    pub fn feasible<T: Scalar>(&self, sheet: &DeviceSheet<T>) -> Result<(), GraphError> {
        if self.mask.len() != sheet.core_count || self.dvfs.len() != sheet.core_count {
            return Err(GraphError::InfeasibleAction(format!(
                "action sized for {} cores, sheet has {}",
                self.mask.len(),
                sheet.core_count
            )));
        }
        if self.num_active() == 0 {
            return Err(GraphError::InfeasibleAction("empty core mask".into()));
        }
        for i in self.active_cores() {
            if self.dvfs[i] >= sheet.cluster_of(i).levels() {
                return Err(GraphError::InfeasibleAction(format!(
                    "dvfs index {} out of range for core {i}",
                    self.dvfs[i]
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_core_sheet() -> DeviceSheet<f64> {
        DeviceSheet {
            device_id: "dev0".into(),
            core_count: 2,
            clusters: vec![DvfsTable {
                freqs_hz: vec![0.6e9, 1.0e9, 1.4e9],
                power_coeffs: (0.9, 0.4, 0.15),
            }],
            cluster_of_core: vec![0, 0],
            cache_levels: vec![CacheLevel {
                level: 1,
                capacity_bytes: 32768.0,
                associativity: 4.0,
                line_bytes: 64.0,
                latency_proxy: 4.0,
                bandwidth_proxy: 32.0,
            }],
            governor_flags: vec!["userspace".into()],
            t_max: 70.0,
            version_hash: "v1".into(),
        }
    }

    #[test]
    fn sheet_validation_catches_bad_tables() {
        let mut sheet = two_core_sheet();
        sheet.validate().unwrap();
        sheet.clusters[0].freqs_hz = vec![1.0e9, 1.0e9];
        assert!(sheet.validate().is_err());
    }

    #[test]
    fn action_feasibility() {
        let sheet = two_core_sheet();
        Action::new(vec![true, false], vec![2, 0]).feasible(&sheet).unwrap();
        assert!(Action::new(vec![false, false], vec![0, 0]).feasible(&sheet).is_err());
        assert!(Action::new(vec![true, false], vec![3, 0]).feasible(&sheet).is_err());
    }

    #[test]
    fn power_curve_is_quadratic_in_ghz() {
        let sheet = two_core_sheet();
        let p = sheet.clusters[0].power_at(1); // 1.0 GHz
        assert!((p - (0.9 + 0.4 + 0.15)).abs() < 1e-12);
    }

    #[test]
    fn sheet_from_config_round_trip() {
        let cfg = KeyedConfig::parse(
            "device.id = dev0\n\
             device.cores = 2\n\
             device.cluster_of_core = 0;0\n\
             device.cluster.0.freqs_ghz = 0.6;1.0;1.4\n\
             device.cluster.0.power = 0.9;0.4;0.15\n\
             device.cache.0 = 1;32768;4;64;4;32\n\
             device.tmax = 70\n",
        )
        .unwrap();
        let sheet: DeviceSheet<f64> = DeviceSheet::from_config(&cfg).unwrap();
        assert_eq!(sheet, two_core_sheet());
    }
}
