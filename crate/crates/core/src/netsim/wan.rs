use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegionId;
use crate::time::{millis, SimTime};

pub const DEFAULT_INTRA_RTT_MS: f64 = 0.5;
pub const DEFAULT_JITTER: f64 = 0.10;

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

/// Round-trip times between regions plus per-message impairments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WanProfile {
    pub regions: Vec<String>,
    /// Symmetric; the diagonal is the intra-region round trip.
    pub rtt_ms: Vec<Vec<f64>>,
    #[serde(default = "default_jitter")]
    pub jitter_fraction: f64,
    #[serde(default)]
    pub loss_prob: f64,
    /// Uplink cap per server in bytes per second.
    #[serde(default)]
    pub bandwidth: Option<f64>,
}

/// Region labels of the 8-region synthetic matrix.
pub const SYNTHETIC_REGIONS: [&str; 8] = [
    "us-west-1",
    "us-west-2",
    "us-east-1",
    "us-east-2",
    "eu-west-1",
    "eu-west-2",
    "ap-northeast-1",
    "ap-northeast-2",
];

// Upper triangle, row by row.
const SYNTHETIC_UPPER: [f64; 28] = [
    22.0, 62.0, 52.0, 138.0, 145.0, 108.0, 135.0, //
    68.0, 50.0, 125.0, 135.0, 98.0, 125.0, //
    12.0, 68.0, 76.0, 150.0, 180.0, //
    85.0, 90.0, 140.0, 170.0, //
    12.0, 210.0, 200.0, //
    215.0, 204.0, //
    33.0,
];

pub const DESK_REGIONS: [&str; 4] = ["us-west", "us-east", "eu-west", "ap-northeast"];

const DESK_UPPER: [f64; 6] = [54.0, 122.0, 94.0, 66.0, 139.0, 191.0];

#[allow(clippy::needless_range_loop)]
fn from_upper(labels: &[&str], upper: &[f64], intra: f64) -> Vec<Vec<f64>> {
    let n = labels.len();
    let mut m = vec![vec![intra; n]; n];
    let mut it = upper.iter();
    for i in 0..n {
        for j in i + 1..n {
            let v = *it.next().expect("upper triangle length");
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

impl WanProfile {
    /// Synthetic 8-region matrix with a mean inter-region RTT of 111 ms.
    /// The values are plausible cloud RTTs, not measurements.
    pub fn synthetic8() -> Self {
        WanProfile {
            regions: SYNTHETIC_REGIONS.iter().map(|s| s.to_string()).collect(),
            rtt_ms: from_upper(&SYNTHETIC_REGIONS, &SYNTHETIC_UPPER, DEFAULT_INTRA_RTT_MS),
            jitter_fraction: DEFAULT_JITTER,
            loss_prob: 0.0,
            bandwidth: None,
        }
    }

    /// Synthetic 4-region matrix (US West, US East, EU West, AP Northeast)
    /// with a mean inter-region RTT of 111 ms.
    pub fn desk4() -> Self {
        WanProfile {
            regions: DESK_REGIONS.iter().map(|s| s.to_string()).collect(),
            rtt_ms: from_upper(&DESK_REGIONS, &DESK_UPPER, DEFAULT_INTRA_RTT_MS),
            jitter_fraction: DEFAULT_JITTER,
            loss_prob: 0.0,
            bandwidth: None,
        }
    }

    /// Every inter-region pair at `rtt_ms`.
    pub fn uniform(labels: &[String], rtt_ms: f64) -> Self {
        let n = labels.len();
        let mut m = vec![vec![rtt_ms; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = DEFAULT_INTRA_RTT_MS;
        }
        WanProfile {
            regions: labels.to_vec(),
            rtt_ms: m,
            jitter_fraction: DEFAULT_JITTER,
            loss_prob: 0.0,
            bandwidth: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let w: WanProfile = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.regions.len();
        if n == 0 {
            return Err(Error::config("WAN profile has no regions"));
        }
        if self.rtt_ms.len() != n || self.rtt_ms.iter().any(|r| r.len() != n) {
            return Err(Error::config(format!("RTT matrix must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.rtt_ms[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::config(format!(
                        "RTT[{i}][{j}] = {v} is not a valid delay"
                    )));
                }
                if v != self.rtt_ms[j][i] {
                    return Err(Error::config(format!(
                        "RTT matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if !(self.jitter_fraction.is_finite() && self.jitter_fraction >= 0.0) {
            return Err(Error::config("jitter_fraction must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return Err(Error::config("loss_prob must be in [0, 1)"));
        }
        if let Some(b) = self.bandwidth {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::config("bandwidth cap must be positive"));
            }
        }
        Ok(())
    }

    pub fn region_count(&self) -> u16 {
        self.regions.len() as u16
    }

    pub fn rtt(&self, a: RegionId, b: RegionId) -> f64 {
        self.rtt_ms[a.index()][b.index()]
    }

    /// Mean one-way delay: half the round trip.
    pub fn one_way(&self, a: RegionId, b: RegionId) -> SimTime {
        millis(self.rtt(a, b) / 2.0)
    }

    /// Mean over distinct region pairs.
    pub fn mean_inter_rtt(&self) -> f64 {
        let n = self.regions.len();
        let mut sum = 0.0;
        let mut pairs = 0;
        for i in 0..n {
            for j in i + 1..n {
                sum += self.rtt_ms[i][j];
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            sum / pairs as f64
        }
    }

    /// Multiplies every inter-region RTT by `factor`.
    pub fn scale_inter(&mut self, factor: f64) {
        let n = self.regions.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    self.rtt_ms[i][j] *= factor;
                }
            }
        }
    }

    /// Sets every inter-region RTT to `rtt_ms`.
    pub fn set_inter(&mut self, rtt_ms: f64) {
        let n = self.regions.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    self.rtt_ms[i][j] = rtt_ms;
                }
            }
        }
    }

    /// Keeps the listed regions, in the given order.
    pub fn select(&self, keep: &[usize]) -> Self {
        WanProfile {
            regions: keep.iter().map(|&i| self.regions[i].clone()).collect(),
            rtt_ms: keep
                .iter()
                .map(|&i| keep.iter().map(|&j| self.rtt_ms[i][j]).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Keeps the first `n` regions.
    pub fn truncate(&mut self, n: usize) {
        self.regions.truncate(n);
        self.rtt_ms.truncate(n);
        for r in &mut self.rtt_ms {
            r.truncate(n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_means_are_111() {
        assert!((WanProfile::synthetic8().mean_inter_rtt() - 111.0).abs() < 1e-9);
        assert!((WanProfile::desk4().mean_inter_rtt() - 111.0).abs() < 1e-9);
        WanProfile::synthetic8().validate().unwrap();
        WanProfile::desk4().validate().unwrap();
    }

    #[test]
    fn asymmetric_rejected() {
        let mut w = WanProfile::desk4();
        w.rtt_ms[0][1] = 1.0;
        assert!(w.validate().is_err());
    }

    #[test]
    fn bad_loss_rejected() {
        let mut w = WanProfile::desk4();
        w.loss_prob = 1.0;
        assert!(w.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let w = WanProfile::desk4();
        let back: WanProfile = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
        let bad = r#"{"regions":["a"],"rtt_ms":[[0.5]],"colour":1}"#;
        assert!(serde_json::from_str::<WanProfile>(bad).is_err());
    }

    #[test]
    fn scaling_leaves_diagonal() {
        let mut w = WanProfile::desk4();
        w.scale_inter(10.0);
        assert_eq!(w.rtt(RegionId(0), RegionId(0)), DEFAULT_INTRA_RTT_MS);
        assert_eq!(w.rtt(RegionId(0), RegionId(1)), 540.0);
    }
}
