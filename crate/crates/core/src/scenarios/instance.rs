use serde::Serialize;

use crate::error::{Error, Result};
use crate::netsim::ServerModel;

/// Gigabit per second in bytes per second.
const GBIT_BYTES: f64 = 1e9 / 8.0;

/// A VM shape: compute, memory, network and hourly price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceClass {
    pub name: &'static str,
    pub vcpus: u32,
    pub memory_gib: f64,
    /// Quoted network rate in Gbit/s.
    pub network_gbps: f64,
    pub price_per_hour: f64,
}

/// AWS instance types used by the resource allocation scenario
/// (us-west-1 on-demand prices).
pub const INSTANCES: [InstanceClass; 5] = [
    InstanceClass {
        name: "m5.2xlarge",
        vcpus: 8,
        memory_gib: 32.0,
        network_gbps: 10.0,
        price_per_hour: 0.448,
    },
    InstanceClass {
        name: "r5.2xlarge",
        vcpus: 8,
        memory_gib: 64.0,
        network_gbps: 10.0,
        price_per_hour: 0.560,
    },
    InstanceClass {
        name: "m5.4xlarge",
        vcpus: 16,
        memory_gib: 64.0,
        network_gbps: 10.0,
        price_per_hour: 0.896,
    },
    InstanceClass {
        name: "r5.4xlarge",
        vcpus: 16,
        memory_gib: 128.0,
        network_gbps: 10.0,
        price_per_hour: 1.120,
    },
    InstanceClass {
        name: "m6i.8xlarge",
        vcpus: 32,
        memory_gib: 128.0,
        network_gbps: 12.5,
        price_per_hour: 1.792,
    },
];

pub const DEFAULT_INSTANCE: &str = "r5.4xlarge";

pub fn instance(name: &str) -> Result<&'static InstanceClass> {
    INSTANCES.iter().find(|i| i.name == name).ok_or_else(|| {
        let known: Vec<&str> = INSTANCES.iter().map(|i| i.name).collect();
        Error::config(format!(
            "unknown instance type {name:?} (known: {})",
            known.join(", ")
        ))
    })
}

impl InstanceClass {
    /// Executors follow vCPUs and admission capacity follows memory.
    pub fn server_model(
        &self,
        service_time_per_op_ns: u64,
        capacity_per_gib: f64,
    ) -> Result<ServerModel> {
        let cap = (self.memory_gib * capacity_per_gib).round();
        if !(cap.is_finite() && cap >= 1.0) {
            return Err(Error::config(format!(
                "capacity_per_gib {capacity_per_gib} leaves {} without in-flight capacity",
                self.name
            )));
        }
        let m = ServerModel {
            executors: self.vcpus,
            service_time_per_op_ns,
            inflight_capacity: cap as u64,
        };
        m.validate()?;
        Ok(m)
    }

    /// Uplink rate in bytes per second.
    pub fn bandwidth_bytes(&self) -> f64 {
        self.network_gbps * GBIT_BYTES
    }
}
