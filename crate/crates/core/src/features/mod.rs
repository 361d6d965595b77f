//! KPI engineering, lagged panels and correlation analysis.

mod correlation;
mod kpis;
mod panel;
mod stats;

pub use correlation::{correlation_report, AlignmentEntry, CorrelationEntry, CorrelationReport};
pub use kpis::{compute_kpis, KpiCell, RX_BYTES_FLOOR};
pub use panel::{
    build_panel, panel_columns, standardize_per_window, ColumnStats, FeaturePanel, PanelRow,
    Standardization, DEFAULT_LAGS,
};
pub use stats::{acf_pacf, mean, pearson, population_std};
