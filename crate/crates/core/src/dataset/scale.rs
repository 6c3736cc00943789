use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::FlowSet;
use crate::error::{Error, Result};
use crate::Scalar;

/// Per-flow min-max statistics taken from the training region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScaleParams<T> {
    pub per_flow_min: Vec<T>,
    pub per_flow_max: Vec<T>,
}

impl<T: Scalar> ScaleParams<T> {
    /// Fits min/max per flow over `range` only, so the test region never
    /// informs the scaling.
    pub fn fit(flows: &FlowSet<T>, range: Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > flows.len() {
            return Err(Error::InvalidArgument(format!(
                "scale range {range:?} invalid for series of length {}",
                flows.len()
            )));
        }
        let (per_flow_min, per_flow_max) = flows
            .flows()
            .iter()
            .map(|f| {
                f[range.clone()]
                    .iter()
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .unzip();
        Ok(Self { per_flow_min, per_flow_max })
    }

    pub fn n_flows(&self) -> usize {
        self.per_flow_min.len()
    }

    /// A flow with `min == max` on the training region.
    pub fn is_constant(&self, m: usize) -> bool {
        self.per_flow_min[m] == self.per_flow_max[m]
    }

    pub fn constant_flows(&self) -> Vec<usize> {
        (0..self.n_flows()).filter(|&m| self.is_constant(m)).collect()
    }

    #[inline]
    pub fn scale_value(&self, m: usize, x: T) -> T {
        let (lo, hi) = (self.per_flow_min[m], self.per_flow_max[m]);
        if lo == hi {
            T::zero()
        } else {
            (x - lo) / (hi - lo)
        }
    }

    #[inline]
    pub fn unscale_value(&self, m: usize, y: T) -> T {
        let (lo, hi) = (self.per_flow_min[m], self.per_flow_max[m]);
        if lo == hi {
            lo
        } else {
            y * (hi - lo) + lo
        }
    }

    fn check(&self, flows: &FlowSet<T>) -> Result<()> {
        if self.n_flows() != flows.n_flows() || self.per_flow_max.len() != flows.n_flows() {
            return Err(Error::Shape(format!(
                "scale parameters cover {} flows, flow set has {}",
                self.n_flows(),
                flows.n_flows()
            )));
        }
        Ok(())
    }
}

/// Maps each flow through `(x − min)/(max − min)`. Constant flows become 0.
/// Values outside the training range are left unclipped.
pub fn normalize<T: Scalar>(flows: &FlowSet<T>, params: &ScaleParams<T>) -> Result<FlowSet<T>> {
    params.check(flows)?;
    Ok(flows.map_flows(|m, s| s.iter().map(|&x| params.scale_value(m, x)).collect()))
}

/// Inverse of [`normalize`]; constant flows restore their stored constant.
pub fn denormalize<T: Scalar>(flows: &FlowSet<T>, params: &ScaleParams<T>) -> Result<FlowSet<T>> {
    params.check(flows)?;
    Ok(flows.map_flows(|m, s| s.iter().map(|&y| params.unscale_value(m, y)).collect()))
}
