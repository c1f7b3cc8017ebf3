use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::signal::{SampleBlock, SignalKind, TIME_EPSILON};

use super::pipeline::slice_window;

/// Recent samples of one stream, kept as the blocks they arrived in.
///
/// Samples older than `capacity_seconds` before the watermark are evicted, so
/// memory stays proportional to capacity times sample rate.
#[derive(Debug, Clone)]
pub struct StreamBuffer {
    kind: SignalKind,
    capacity_seconds: f64,
    blocks: VecDeque<SampleBlock>,
    watermark: Option<f64>,
}

impl StreamBuffer {
    pub fn new(kind: SignalKind, capacity_seconds: f64) -> Result<Self> {
        if !(capacity_seconds.is_finite() && capacity_seconds >= super::MIN_WINDOW_SECONDS) {
            return Err(Error::Config(format!(
                "{kind} buffer capacity must be >= {} s, got {capacity_seconds}",
                super::MIN_WINDOW_SECONDS
            )));
        }
        Ok(Self {
            kind,
            capacity_seconds,
            blocks: VecDeque::new(),
            watermark: None,
        })
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    /// End time of the latest ingested sample.
    pub fn watermark(&self) -> Option<f64> {
        self.watermark
    }

    /// Time of the oldest retained sample.
    pub fn earliest(&self) -> Option<f64> {
        self.blocks.front().map(|b| b.start_time())
    }

    pub fn retained_samples(&self) -> usize {
        self.blocks.iter().map(|b| b.n_samples()).sum()
    }

    /// Appends a block. Empty blocks are ignored; blocks that start before the
    /// watermark or change rate or channels are rejected.
    pub fn ingest(&mut self, block: SampleBlock) -> Result<()> {
        if block.kind() != self.kind {
            return Err(Error::Validation(format!(
                "{} block offered to the {} buffer",
                block.kind(),
                self.kind
            )));
        }
        if block.is_empty() {
            return Ok(());
        }
        if let Some(wm) = self.watermark {
            if block.start_time() < wm - TIME_EPSILON {
                return Err(Error::Validation(format!(
                    "{} block at {:.6} s overlaps or precedes data up to {:.6} s",
                    self.kind,
                    block.start_time(),
                    wm
                )));
            }
        }
        if let Some(last) = self.blocks.back() {
            if last.sample_rate() != block.sample_rate() || last.channels() != block.channels() {
                return Err(Error::Validation(format!(
                    "{} block changes sample rate or channel layout mid-stream",
                    self.kind
                )));
            }
        }
        self.watermark = Some(block.end_time());
        self.blocks.push_back(block);
        self.evict();
        Ok(())
    }

    fn evict(&mut self) {
        let Some(wm) = self.watermark else { return };
        let horizon = wm - self.capacity_seconds;
        while let Some(front) = self.blocks.front_mut() {
            if front.end_time() <= horizon + TIME_EPSILON {
                self.blocks.pop_front();
            } else {
                let cut = front.index_at(horizon);
                if cut > 0 {
                    *front = front.slice(cut..front.n_samples());
                }
                break;
            }
        }
    }

    /// The contiguous samples covering `[start, end)`, if fully retained.
    pub fn window(&self, start: f64, end: f64) -> Option<SampleBlock> {
        slice_window(&self.blocks, start, end)
    }
}
