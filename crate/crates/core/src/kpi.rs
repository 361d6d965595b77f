//! The seven engineered KPIs and fixed-shape containers keyed by them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kpi {
    TrafficVolume,
    LatencyRatio,
    TxRxRatio,
    NormConnections,
    SignalStrength,
    JitterVariability,
    SumThroughput,
}

impl Kpi {
    pub const ALL: [Kpi; 7] = [
        Kpi::TrafficVolume,
        Kpi::LatencyRatio,
        Kpi::TxRxRatio,
        Kpi::NormConnections,
        Kpi::SignalStrength,
        Kpi::JitterVariability,
        Kpi::SumThroughput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kpi::TrafficVolume => "traffic_volume",
            Kpi::LatencyRatio => "latency_ratio",
            Kpi::TxRxRatio => "tx_rx_ratio",
            Kpi::NormConnections => "norm_connections",
            Kpi::SignalStrength => "signal_strength",
            Kpi::JitterVariability => "jitter_variability",
            Kpi::SumThroughput => "sum_throughput",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Panel column name for this KPI at `lag` windows back.
    pub fn column(self, lag: usize) -> String {
        format!("{}_lag{}", self.name(), lag)
    }
}

impl fmt::Display for Kpi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kpi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kpi::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown KPI `{s}`")))
    }
}

/// Splits `<kpi>_lag<k>` back into its parts.
pub fn parse_column(column: &str) -> Option<(Kpi, usize)> {
    let (kpi, lag) = column.rsplit_once("_lag")?;
    Some((kpi.parse().ok()?, lag.parse().ok()?))
}

/// One cell's engineered KPIs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KpiVector {
    /// Mbps
    pub traffic_volume: f64,
    pub latency_ratio: f64,
    pub tx_rx_ratio: f64,
    pub norm_connections: f64,
    /// dBm
    pub signal_strength: f64,
    /// ms
    pub jitter_variability: f64,
    /// bytes
    pub sum_throughput: f64,
}

impl KpiVector {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.traffic_volume,
            self.latency_ratio,
            self.tx_rx_ratio,
            self.norm_connections,
            self.signal_strength,
            self.jitter_variability,
            self.sum_throughput,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        KpiVector {
            traffic_volume: a[0],
            latency_ratio: a[1],
            tx_rx_ratio: a[2],
            norm_connections: a[3],
            signal_strength: a[4],
            jitter_variability: a[5],
            sum_throughput: a[6],
        }
    }

    pub fn get(&self, kpi: Kpi) -> f64 {
        self.to_array()[kpi.index()]
    }
}

/// Per-KPI real coefficients. Missing entries in JSON default to zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpiWeights {
    pub traffic_volume: f64,
    pub latency_ratio: f64,
    pub tx_rx_ratio: f64,
    pub norm_connections: f64,
    pub signal_strength: f64,
    pub jitter_variability: f64,
    pub sum_throughput: f64,
}

impl KpiWeights {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.traffic_volume,
            self.latency_ratio,
            self.tx_rx_ratio,
            self.norm_connections,
            self.signal_strength,
            self.jitter_variability,
            self.sum_throughput,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        KpiWeights {
            traffic_volume: a[0],
            latency_ratio: a[1],
            tx_rx_ratio: a[2],
            norm_connections: a[3],
            signal_strength: a[4],
            jitter_variability: a[5],
            sum_throughput: a[6],
        }
    }

    pub fn dot(&self, values: &[f64; 7]) -> f64 {
        self.to_array()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}
