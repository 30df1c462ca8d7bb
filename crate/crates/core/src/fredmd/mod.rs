//! FRED-MD ingestion and the rolling-window inflation design.

mod panel;
mod rolling;
mod transform;

pub use panel::{parse_panel, MacroPanel, Month, Series};
pub use rolling::{
    build_rolling, rolling_inference, rolling_metadata, synthetic_panel, DiscardedWindow, FrequencyReport,
    RollingDesign, RollingOptions, RollingParams, Window, WindowFrequency, DEFAULT_CPI_SERIES, INFLATION_NAME,
};
pub use transform::{apply_tcode, compute_inflation, invert_tcode, Tcode};
