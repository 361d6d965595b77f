use serde::{Deserialize, Serialize};

use crate::kpi::KpiVector;
use crate::spatial::{CellAggregate, TileId};

/// Floor for received bytes in the transmit/receive ratio.
pub const RX_BYTES_FLOOR: f64 = 1.0;

/// The seven KPIs of one aggregated cell.
pub fn compute_kpis(cell: &CellAggregate) -> KpiVector {
    let rx = if cell.sum_bytes_rx == 0 {
        log::warn!(
            "tile ({}, {}) band {} window {}: no received bytes, tx/rx ratio uses a {RX_BYTES_FLOOR}-byte floor",
            cell.tile.row,
            cell.tile.col,
            cell.band,
            cell.window
        );
        RX_BYTES_FLOOR
    } else {
        cell.sum_bytes_rx as f64
    };
    KpiVector {
        traffic_volume: cell.avg_ul + cell.avg_dl,
        latency_ratio: cell.min_latency / cell.mean_latency,
        tx_rx_ratio: cell.sum_bytes_tx as f64 / rx,
        norm_connections: cell.connection_count as f64 / cell.unique_devices as f64,
        signal_strength: cell.mean_signal,
        jitter_variability: cell.avg_jitter - cell.min_jitter,
        sum_throughput: (cell.sum_bytes_tx + cell.sum_bytes_rx) as f64,
    }
}

/// KPIs for one (tile, band, window) after cleansing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiCell {
    pub tile: TileId,
    pub band: String,
    pub window: usize,
    pub kpis: KpiVector,
    /// Band-collapse weight: the cell's sample count, or 1 for imputed cells.
    pub weight: f64,
    pub imputed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell() -> CellAggregate {
        CellAggregate {
            tile: TileId::new(0, 0),
            band: "B4".into(),
            window: 0,
            avg_ul: 10.0,
            avg_dl: 20.0,
            min_latency: 20.0,
            mean_latency: 40.0,
            avg_jitter: 5.0,
            min_jitter: 2.0,
            sum_bytes_tx: 300,
            sum_bytes_rx: 1200,
            mean_signal: -95.0,
            connection_count: 12,
            unique_devices: 4,
            sample_count: 6,
        }
    }

    #[test]
    fn formulas() {
        let k = compute_kpis(&cell());
        assert_eq!(k.traffic_volume, 30.0);
        assert_eq!(k.latency_ratio, 0.5);
        assert_eq!(k.tx_rx_ratio, 0.25);
        assert_eq!(k.norm_connections, 3.0);
        assert_eq!(k.signal_strength, -95.0);
        assert_eq!(k.jitter_variability, 3.0);
        assert_eq!(k.sum_throughput, 1500.0);
    }

    #[test]
    fn equal_jitter_gives_zero_variability() {
        let mut c = cell();
        c.avg_jitter = c.min_jitter;
        assert_eq!(compute_kpis(&c).jitter_variability, 0.0);
    }

    #[test]
    fn zero_rx_bytes_uses_floor() {
        let mut c = cell();
        c.sum_bytes_rx = 0;
        assert_eq!(compute_kpis(&c).tx_rx_ratio, 300.0);
    }
}
