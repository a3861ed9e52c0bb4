use evcs_core::TraceRecord;
use serde::{Deserialize, Serialize};

/// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0, "empty histogram range");
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    /// Values outside the range land in the nearest edge bin.
    pub fn add(&mut self, x: f64) {
        let n = self.counts.len();
        let pos = ((x - self.lo) / (self.hi - self.lo) * n as f64).floor();
        let i = if pos.is_nan() {
            0
        } else {
            (pos.max(0.0) as usize).min(n - 1)
        };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }
}

/// How often each command level was chosen: the battery's net command
/// `a1 - a2` over `[-1, 1]` and the grid-to-EV command `a3` over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHistogram {
    pub bess_net: Histogram,
    pub grid: Histogram,
}

impl ActionHistogram {
    pub fn new(bins: usize) -> Self {
        ActionHistogram {
            bess_net: Histogram::new(-1.0, 1.0, bins),
            grid: Histogram::new(0.0, 1.0, bins),
        }
    }

    pub fn from_trace(trace: &[TraceRecord], bins: usize) -> Self {
        let mut h = ActionHistogram::new(bins);
        for r in trace {
            let a = r.action.clamped();
            h.bess_net.add(a.bess_net());
            h.grid.add(a.a3);
        }
        h
    }
}
