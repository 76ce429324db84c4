//! Trade Imbalance and Order Flow Imbalance on a windowed trading day.
//!
//! Timestamps are integer nanoseconds. Every bucket is the half-open interval
//! `(t_k, t_{k+1}]`, so an event stamped exactly at a window start belongs to
//! the previous window (and to no window for the first one of the day).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const NANOS_PER_SECOND: i64 = 1_000_000_000;
pub const NANOS_PER_MINUTE: i64 = 60 * NANOS_PER_SECOND;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Buyer-initiated market order.
    Buy,
    /// Seller-initiated market order.
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeEvent {
    pub ts: i64,
    pub price: f64,
    pub volume: f64,
    pub side: Side,
}

impl TradeEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(Error::InvalidParameter(format!("trade volume {} must be positive", self.volume)));
        }
        if !self.price.is_finite() {
            return Err(Error::InvalidParameter("trade price is not finite".into()));
        }
        Ok(())
    }

    /// Signed volume, positive for buys.
    pub fn signed_volume(&self) -> f64 {
        match self.side {
            Side::Buy => self.volume,
            Side::Sell => -self.volume,
        }
    }
}

/// Best bid and ask with the queue sizes at the touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookSnapshot {
    pub ts: i64,
    pub bid_px: f64,
    pub bid_qty: f64,
    pub ask_px: f64,
    pub ask_qty: f64,
}

impl BookSnapshot {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.bid_px, self.bid_qty, self.ask_px, self.ask_qty]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("book quote is not finite".into()));
        }
        if self.bid_qty < 0.0 || self.ask_qty < 0.0 {
            return Err(Error::InvalidParameter("negative queue size".into()));
        }
        if self.bid_px > self.ask_px {
            return Err(Error::InvalidParameter(format!(
                "crossed book: bid {} above ask {}",
                self.bid_px, self.ask_px
            )));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid_px + self.ask_px)
    }
}

/// A trading day cut into equal windows of equal buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGrid {
    pub day_start: i64,
    pub day_len: i64,
    pub window_len: i64,
    pub subinterval: i64,
}

/// One window `[start, end]` with nodes `start + k * subinterval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    pub subinterval: i64,
    pub buckets: usize,
}

impl Window {
    pub fn node(&self, k: usize) -> i64 {
        self.start + k as i64 * self.subinterval
    }

    pub fn nodes(&self) -> impl Iterator<Item = i64> + '_ {
        (0..=self.buckets).map(move |k| self.node(k))
    }

    /// Bucket of a timestamp in `(start, end]`.
    pub fn bucket_of(&self, ts: i64) -> Option<usize> {
        if ts <= self.start || ts > self.end {
            return None;
        }
        let off = ts - self.start;
        Some(((off + self.subinterval - 1) / self.subinterval - 1) as usize)
    }
}

impl WindowGrid {
    pub fn n_windows(&self) -> usize {
        (self.day_len / self.window_len) as usize
    }

    pub fn buckets_per_window(&self) -> usize {
        (self.window_len / self.subinterval) as usize
    }

    pub fn window(&self, index: usize) -> Result<Window> {
        if index >= self.n_windows() {
            return Err(Error::Domain(format!(
                "window {index} out of range (grid has {})",
                self.n_windows()
            )));
        }
        let start = self.day_start + index as i64 * self.window_len;
        Ok(Window {
            index,
            start,
            end: start + self.window_len,
            subinterval: self.subinterval,
            buckets: self.buckets_per_window(),
        })
    }

    pub fn windows(&self) -> impl Iterator<Item = Window> + '_ {
        (0..self.n_windows()).map(move |i| self.window(i).expect("index in range"))
    }
}

pub fn build_windows(day_start: i64, day_len: i64, window_len: i64, subinterval: i64) -> Result<WindowGrid> {
    if day_len <= 0 || window_len <= 0 || subinterval <= 0 {
        return Err(Error::Configuration("durations must be positive".into()));
    }
    if day_len % window_len != 0 {
        return Err(Error::Configuration(format!(
            "window length {window_len} ns does not divide the day length {day_len} ns"
        )));
    }
    if window_len % subinterval != 0 {
        return Err(Error::Configuration(format!(
            "subinterval {subinterval} ns does not divide the window length {window_len} ns"
        )));
    }
    Ok(WindowGrid {
        day_start,
        day_len,
        window_len,
        subinterval,
    })
}

/// Index range of the events in `(start, end]`, for a slice sorted by `ts`.
fn span<T>(items: &[T], ts: impl Fn(&T) -> i64, start: i64, end: i64) -> (usize, usize) {
    let lo = items.partition_point(|e| ts(e) <= start);
    let hi = items.partition_point(|e| ts(e) <= end);
    (lo, hi)
}

/// Buy minus sell volume per bucket of `window`. `events` must be sorted by `ts`.
pub fn trade_imbalance(events: &[TradeEvent], grid: &WindowGrid, window: usize) -> Result<Vec<f64>> {
    let w = grid.window(window)?;
    let mut out = alloc::vec![0.0; w.buckets];
    let (lo, hi) = span(events, |e| e.ts, w.start, w.end);
    for e in &events[lo..hi] {
        let k = w.bucket_of(e.ts).expect("event inside window");
        out[k] += e.signed_volume();
    }
    Ok(out)
}

/// Top-of-book contribution `e_n` of the move from `prev` to `cur`.
pub fn ofi_contribution(prev: &BookSnapshot, cur: &BookSnapshot) -> f64 {
    let mut e = 0.0;
    if cur.bid_px >= prev.bid_px {
        e += cur.bid_qty;
    }
    if cur.bid_px <= prev.bid_px {
        e -= prev.bid_qty;
    }
    if cur.ask_px <= prev.ask_px {
        e -= cur.ask_qty;
    }
    if cur.ask_px >= prev.ask_px {
        e += prev.ask_qty;
    }
    e
}

/// Sum of `e_n` per bucket, each pair attributed to the bucket holding its
/// later snapshot. The last snapshot at or before the window start seeds the
/// first pair. `snapshots` must be sorted by `ts`.
pub fn ofi_series(snapshots: &[BookSnapshot], grid: &WindowGrid, window: usize) -> Result<Vec<f64>> {
    let w = grid.window(window)?;
    let (lo, hi) = span(snapshots, |s| s.ts, w.start, w.end);
    if lo == 0 {
        return Err(Error::MissingSeed { window });
    }
    let mut out = alloc::vec![0.0; w.buckets];
    for j in lo..hi {
        let k = w.bucket_of(snapshots[j].ts).expect("snapshot inside window");
        out[k] += ofi_contribution(&snapshots[j - 1], &snapshots[j]);
    }
    Ok(out)
}

/// Midprice at the bucket starts `t_0 .. t_{K−1}` of `window`, taken from
/// the last snapshot at or before each node.
pub fn midprice_series(snapshots: &[BookSnapshot], grid: &WindowGrid, window: usize) -> Result<Vec<f64>> {
    let w = grid.window(window)?;
    let mut out = Vec::with_capacity(w.buckets);
    let mut idx = snapshots.partition_point(|s| s.ts <= w.start);
    if idx == 0 {
        return Err(Error::MissingSeed { window });
    }
    for k in 0..w.buckets {
        let t = w.node(k);
        while idx < snapshots.len() && snapshots[idx].ts <= t {
            idx += 1;
        }
        out.push(snapshots[idx - 1].mid());
    }
    Ok(out)
}

/// `Λ = −metric`.
pub fn lambda_series(metric: &[f64]) -> Vec<f64> {
    metric.iter().map(|v| -v).collect()
}

/// Node times of the bucket starts, in `unit` nanoseconds since the day start.
pub fn bucket_times(grid: &WindowGrid, window: usize, unit: i64) -> Result<Vec<f64>> {
    if unit <= 0 {
        return Err(Error::Configuration("time unit must be positive".into()));
    }
    let w = grid.window(window)?;
    Ok((0..w.buckets)
        .map(|k| (w.node(k) - grid.day_start) as f64 / unit as f64)
        .collect())
}
