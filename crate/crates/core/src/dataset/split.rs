use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::FlowSet;
use crate::error::{Error, Result};
use crate::Scalar;

/// Window length realizing ten historical matrices plus one target.
pub const DEFAULT_WINDOW_LENGTH: usize = 11;
pub const DEFAULT_TRAIN_FRAC: f64 = 0.8;
pub const DEFAULT_VAL_FRAC: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_frac: f64,
    /// Fraction of the training region held out (chronologically last) for validation.
    pub val_frac: f64,
    pub window_length: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: DEFAULT_TRAIN_FRAC,
            val_frac: DEFAULT_VAL_FRAC,
            window_length: DEFAULT_WINDOW_LENGTH,
        }
    }
}

/// Contiguous observation ranges: train earliest, then validation, then test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    /// Train and validation together, i.e. everything before the test region.
    pub fn fit_region(&self) -> Range<usize> {
        self.train.start..self.val.end
    }

    pub fn for_length(len: usize, cfg: &SplitConfig) -> Result<Self> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(cfg.train_frac) || !frac_ok(cfg.val_frac) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in (0, 1): train {} val {}",
                cfg.train_frac, cfg.val_frac
            )));
        }
        if cfg.window_length < 2 {
            return Err(Error::InvalidArgument("window length must be at least 2".into()));
        }
        // The epsilon keeps e.g. 0.1·80 from flooring to 7 on representation error.
        let floor = |x: f64| (x + 1e-9).floor() as usize;
        let fit_len = floor(cfg.train_frac * len as f64);
        let val_len = floor(cfg.val_frac * fit_len as f64);
        let ranges = Self {
            train: 0..fit_len - val_len,
            val: fit_len - val_len..fit_len,
            test: fit_len..len,
        };
        for (name, r) in [("train", &ranges.train), ("validation", &ranges.val), ("test", &ranges.test)] {
            if r.len() < cfg.window_length {
                return Err(Error::Validation(format!(
                    "{name} split has {} observations, fewer than one window of {}",
                    r.len(),
                    cfg.window_length
                )));
            }
        }
        Ok(ranges)
    }
}

/// Splits the flow set's time axis into train/validation/test ranges.
pub fn split<T: Scalar>(flows: &FlowSet<T>, cfg: &SplitConfig) -> Result<SplitRanges> {
    SplitRanges::for_length(flows.len(), cfg)
}

/// Sliding-window samples for a subset of flows.
///
/// Sample `s` covers observations `start + s ..= start + s + L − 1`: the
/// first `L − 1` rows are input, the last row is the target. Input rows are
/// stored step-major, `width` values per step.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset<T> {
    inputs: Vec<T>,
    targets: Vec<T>,
    window_length: usize,
    width: usize,
    start: usize,
}

impl<T: Scalar> WindowedDataset<T> {
    pub fn from_parts(
        inputs: Vec<T>,
        targets: Vec<T>,
        window_length: usize,
        width: usize,
    ) -> Result<Self> {
        if window_length < 2 || width == 0 {
            return Err(Error::InvalidArgument("window length ≥ 2 and width ≥ 1 required".into()));
        }
        let n = targets.len() / width;
        if !targets.len().is_multiple_of(width) || inputs.len() != n * (window_length - 1) * width {
            return Err(Error::Shape("inputs and targets disagree on sample count".into()));
        }
        Ok(Self { inputs, targets, window_length, width, start: 0 })
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn history(&self) -> usize {
        self.window_length - 1
    }

    /// Flows per sample (`d`).
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(L − 1) × d` inputs of sample `s`, step-major.
    pub fn input(&self, s: usize) -> &[T] {
        let n = self.history() * self.width;
        &self.inputs[s * n..(s + 1) * n]
    }

    pub fn target(&self, s: usize) -> &[T] {
        &self.targets[s * self.width..(s + 1) * self.width]
    }

    /// Observation index of sample `s`'s target in the source series.
    pub fn target_time(&self, s: usize) -> usize {
        self.start + s + self.window_length - 1
    }

    pub fn first_input_time(&self, s: usize) -> usize {
        self.start + s
    }
}

/// Builds windows of length `window_length` over `range` for `flow_ids`.
pub fn make_windows<T: Scalar>(
    flows: &FlowSet<T>,
    flow_ids: &[usize],
    range: Range<usize>,
    window_length: usize,
) -> Result<WindowedDataset<T>> {
    if window_length < 2 {
        return Err(Error::InvalidArgument("window length must be at least 2".into()));
    }
    if flow_ids.is_empty() {
        return Err(Error::InvalidArgument("no flows selected for windowing".into()));
    }
    if range.end > flows.len() {
        return Err(Error::InvalidArgument(format!(
            "range {range:?} exceeds series length {}",
            flows.len()
        )));
    }
    if let Some(&bad) = flow_ids.iter().find(|&&m| m >= flows.n_flows()) {
        return Err(Error::InvalidArgument(format!("flow index {bad} out of range")));
    }
    if range.len() < window_length {
        return Err(Error::Validation(format!(
            "range of {} observations is shorter than window length {window_length}",
            range.len()
        )));
    }
    let d = flow_ids.len();
    let n = range.len() - window_length + 1;
    let mut inputs = Vec::with_capacity(n * (window_length - 1) * d);
    let mut targets = Vec::with_capacity(n * d);
    for s in 0..n {
        let t0 = range.start + s;
        for t in t0..t0 + window_length - 1 {
            inputs.extend(flow_ids.iter().map(|&m| flows.flow(m)[t]));
        }
        targets.extend(flow_ids.iter().map(|&m| flows.flow(m)[t0 + window_length - 1]));
    }
    Ok(WindowedDataset { inputs, targets, window_length, width: d, start: range.start })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(window_length: usize) -> SplitConfig {
        SplitConfig { train_frac: 0.8, val_frac: 0.1, window_length }
    }

    #[test]
    fn hundred_steps_split() {
        let r = SplitRanges::for_length(100, &cfg(3)).unwrap();
        assert_eq!(r.train, 0..72);
        assert_eq!(r.val, 72..80);
        assert_eq!(r.test, 80..100);
        assert_eq!(r.fit_region(), 0..80);
    }

    #[test]
    fn thousand_steps_test_size() {
        let r = SplitRanges::for_length(1000, &cfg(11)).unwrap();
        assert_eq!(r.test.len(), 200);
    }

    #[test]
    fn too_short_for_test_window() {
        assert!(matches!(SplitRanges::for_length(10, &cfg(10)), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_fractions() {
        let c = SplitConfig { train_frac: 1.0, ..cfg(3) };
        assert!(matches!(SplitRanges::for_length(100, &c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn windows_by_definition() {
        let fs = FlowSet::new(1, 300, vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        let w = make_windows(&fs, &[0], 0..5, 3).unwrap();
        assert_eq!(w.n_samples(), 3);
        assert_eq!(w.input(0), &[1.0, 2.0]);
        assert_eq!(w.input(1), &[2.0, 3.0]);
        assert_eq!(w.input(2), &[3.0, 4.0]);
        assert_eq!(w.target(0), &[3.0]);
        assert_eq!(w.target(2), &[5.0]);
        assert_eq!(w.target_time(2), 4);
    }

    #[test]
    fn exact_window_gives_one_sample() {
        let fs = FlowSet::new(1, 300, vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        assert_eq!(make_windows(&fs, &[0], 1..4, 3).unwrap().n_samples(), 1);
        assert!(make_windows(&fs, &[0], 1..3, 3).is_err());
    }

    #[test]
    fn multi_flow_rows_are_step_major() {
        let fs = FlowSet::new(
            2,
            300,
            vec![vec![0., 1., 2.], vec![10., 11., 12.], vec![20., 21., 22.], vec![30., 31., 32.]],
        )
        .unwrap();
        let w = make_windows(&fs, &[3, 1], 0..3, 3).unwrap();
        assert_eq!(w.input(0), &[30., 10., 31., 11.]);
        assert_eq!(w.target(0), &[32., 12.]);
    }

    #[test]
    fn window_count_matches_enumeration() {
        // Abilene-like region lengths with L = 11.
        for train_len in [11usize, 12, 57, 1000, 2016] {
            let fs = FlowSet::new(1, 300, vec![(0..train_len).map(|v| v as f64).collect()]).unwrap();
            let w = make_windows(&fs, &[0], 0..train_len, 11).unwrap();
            let enumerated = (0..train_len).filter(|&t0| t0 + 11 <= train_len).count();
            assert_eq!(w.n_samples(), enumerated);
            assert_eq!(w.n_samples(), train_len - 10);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn windows_never_cross_split_boundaries(len in 60usize..600, l in 2usize..12) {
                let c = cfg(l);
                let Ok(r) = SplitRanges::for_length(len, &c) else { return Ok(()); };
                let fs = FlowSet::new(1, 300, vec![(0..len).map(|v| v as f64).collect()]).unwrap();
                let train = make_windows(&fs, &[0], r.train.clone(), l).unwrap();
                let val = make_windows(&fs, &[0], r.val.clone(), l).unwrap();
                let test = make_windows(&fs, &[0], r.test.clone(), l).unwrap();
                let last_train = train.target_time(train.n_samples() - 1);
                prop_assert!(last_train < val.first_input_time(0));
                prop_assert!(val.target_time(val.n_samples() - 1) < test.first_input_time(0));
                // Inputs are the raw observation indices here.
                for s in 0..train.n_samples() {
                    prop_assert!(train.input(s).iter().all(|&t| (t as usize) < r.test.start));
                }
            }
        }
    }
}
