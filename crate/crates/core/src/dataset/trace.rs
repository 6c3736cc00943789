use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// A sequence of `T` traffic matrices, each `n_nodes × n_nodes`.
///
/// Values are stored time-major and row-major inside each matrix, so entry
/// `(t, i, j)` lives at `t·N² + i·N + j`. Ingested traces hold nonnegative
/// finite volumes (bytes per interval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TmSeries<T> {
    n_nodes: usize,
    interval_seconds: u32,
    values: Vec<T>,
    timestamps: Option<Vec<i64>>,
}

impl<T: Scalar> TmSeries<T> {
    pub fn new(
        n_nodes: usize,
        interval_seconds: u32,
        values: Vec<T>,
        timestamps: Option<Vec<i64>>,
    ) -> Result<Self> {
        let tm = Self::new_signed(n_nodes, interval_seconds, values, timestamps)?;
        if let Some(pos) = tm.values.iter().position(|v| *v < T::zero()) {
            let m = tm.n_flows();
            return Err(Error::Validation(format!(
                "negative traffic volume {} at step {}, flow {}",
                tm.values[pos],
                pos / m,
                pos % m
            )));
        }
        Ok(tm)
    }

    /// Like [`TmSeries::new`] but allows negative entries. Predicted matrices
    /// come out of an unconstrained regression head and are kept unclipped.
    pub fn new_signed(
        n_nodes: usize,
        interval_seconds: u32,
        values: Vec<T>,
        timestamps: Option<Vec<i64>>,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Validation("n_nodes must be positive".into()));
        }
        if interval_seconds == 0 {
            return Err(Error::Validation("interval_seconds must be positive".into()));
        }
        let m = n_nodes * n_nodes;
        if !values.len().is_multiple_of(m) {
            return Err(Error::Shape(format!(
                "{} values is not a whole number of {n_nodes}x{n_nodes} matrices",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at step {}, flow {}",
                pos / m,
                pos % m
            )));
        }
        let steps = values.len() / m;
        if let Some(ts) = &timestamps {
            if ts.len() != steps {
                return Err(Error::Shape(format!(
                    "{} timestamps for {steps} steps",
                    ts.len()
                )));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Validation("timestamps are not strictly increasing".into()));
            }
        }
        Ok(Self { n_nodes, interval_seconds, values, timestamps })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_flows(&self) -> usize {
        self.n_nodes * self.n_nodes
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.values.len() / self.n_flows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval_seconds(&self) -> u32 {
        self.interval_seconds
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// The `N²` entries of matrix `t`, row-major.
    pub fn matrix(&self, t: usize) -> &[T] {
        let m = self.n_flows();
        &self.values[t * m..(t + 1) * m]
    }

    pub fn get(&self, t: usize, src: usize, dst: usize) -> T {
        self.values[t * self.n_flows() + src * self.n_nodes + dst]
    }
}

/// The `M = N²` univariate flow series of a trace, indexed row-major by
/// `(source, destination)`: flow `m = i·N + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FlowSet<T> {
    n_nodes: usize,
    interval_seconds: u32,
    flows: Vec<Vec<T>>,
}

impl<T: Scalar> FlowSet<T> {
    pub fn new(n_nodes: usize, interval_seconds: u32, flows: Vec<Vec<T>>) -> Result<Self> {
        if flows.len() != n_nodes * n_nodes {
            return Err(Error::Shape(format!(
                "{} flows for {n_nodes} nodes (expected {})",
                flows.len(),
                n_nodes * n_nodes
            )));
        }
        let len = flows.first().map_or(0, Vec::len);
        if flows.iter().any(|f| f.len() != len) {
            return Err(Error::Shape("flows have unequal lengths".into()));
        }
        Ok(Self { n_nodes, interval_seconds, flows })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_flows(&self) -> usize {
        self.flows.len()
    }

    /// Series length `T`.
    pub fn len(&self) -> usize {
        self.flows.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn interval_seconds(&self) -> u32 {
        self.interval_seconds
    }

    pub fn flow(&self, m: usize) -> &[T] {
        &self.flows[m]
    }

    pub fn flows(&self) -> &[Vec<T>] {
        &self.flows
    }

    pub fn flow_index(&self, src: usize, dst: usize) -> usize {
        src * self.n_nodes + dst
    }

    pub fn pair(&self, m: usize) -> (usize, usize) {
        (m / self.n_nodes, m % self.n_nodes)
    }

    /// Rebuilds the matrix sequence. Entries may be negative (normalized
    /// test-region values), so no sign check is applied.
    pub fn reassemble(&self, timestamps: Option<Vec<i64>>) -> Result<TmSeries<T>> {
        let m = self.n_flows();
        let steps = self.len();
        let mut values = vec![T::zero(); steps * m];
        for (f, series) in self.flows.iter().enumerate() {
            for (t, &v) in series.iter().enumerate() {
                values[t * m + f] = v;
            }
        }
        TmSeries::new_signed(self.n_nodes, self.interval_seconds, values, timestamps)
    }

    pub(crate) fn map_flows(&self, mut f: impl FnMut(usize, &[T]) -> Vec<T>) -> Self {
        Self {
            n_nodes: self.n_nodes,
            interval_seconds: self.interval_seconds,
            flows: self.flows.iter().enumerate().map(|(m, s)| f(m, s)).collect(),
        }
    }
}

/// Splits a trace into its per-flow series.
pub fn extract_flows<T: Scalar>(tm: &TmSeries<T>) -> FlowSet<T> {
    let m = tm.n_flows();
    let steps = tm.len();
    let mut flows = vec![Vec::with_capacity(steps); m];
    for t in 0..steps {
        for (flow, &v) in flows.iter_mut().zip(tm.matrix(t)) {
            flow.push(v);
        }
    }
    FlowSet { n_nodes: tm.n_nodes, interval_seconds: tm.interval_seconds, flows }
}
