//! Trace ingestion, flow extraction, scaling, splitting and windowing.

mod io;
mod scale;
mod split;
mod trace;

pub use io::{
    load_tm_series, save_canonical_csv, write_canonical_csv, LoadOptions, TraceFormat,
    ABILENE_INTERVAL_SECONDS, ABILENE_NODES, DEFAULT_INTERVAL_SECONDS, GEANT_INTERVAL_SECONDS,
};
pub use scale::{denormalize, normalize, ScaleParams};
pub use split::{
    make_windows, split, SplitConfig, SplitRanges, WindowedDataset, DEFAULT_TRAIN_FRAC,
    DEFAULT_VAL_FRAC, DEFAULT_WINDOW_LENGTH,
};
pub use trace::{extract_flows, FlowSet, TmSeries};
