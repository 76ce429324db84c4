//! Synthetic trading days whose midprice follows the formed-price formula.
//!
//! In each window the flow is `Λ_k = −TI_k` with `TI` an integer AR(1)
//! sequence, and the midprice at node `k` is the formed price of that flow
//! plus Gaussian noise of size `tau`. Regressing the midprice on the MFG
//! covariates then recovers `2κ` and `−2φ`.

use chrono::{DateTime, SecondsFormat};
use flowprice_core::mfg::{formed_price, ModelParams};
use flowprice_core::orderflow::{BookSnapshot, Side, TradeEvent, WindowGrid};
use flowprice_core::{SampledPath, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{num, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub kappa: f64,
    pub phi: f64,
    pub e0: f64,
    pub tau: f64,
    pub p0: f64,
    /// Innovation scale of the AR(1) trade imbalance (shares).
    pub flow_scale: f64,
    pub half_spread: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            kappa: 2e-3,
            phi: 5e-5,
            e0: 40.0,
            tau: 1e-3,
            p0: 500.0,
            flow_scale: 10.0,
            half_spread: 0.005,
        }
    }
}

pub struct SynthDay {
    pub trades: Vec<TradeEvent>,
    pub book: Vec<BookSnapshot>,
}

/// Builds one day on `grid`; regression time is measured in `unit_ns`.
pub fn synth_day(spec: &SynthSpec, grid: &WindowGrid, unit_ns: i64) -> Result<SynthDay> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let buckets = grid.buckets_per_window();
    let dt = grid.subinterval as f64 / unit_ns as f64;
    let horizon = dt * buckets as f64;
    let params = ModelParams::new(spec.kappa, spec.phi, 0.0, 0.0, horizon, spec.e0)?;
    let tgrid = TimeGrid::new(0.0, dt, buckets - 1)?;
    let mut trades = Vec::new();
    let mut book = Vec::new();
    let mut p0 = spec.p0;
    let mut level = 0.0;
    for w in grid.windows() {
        let ti: Vec<f64> = (0..buckets)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                level = 0.8 * level + spec.flow_scale * z;
                level.round()
            })
            .collect();
        let flow = SampledPath::new(tgrid, ti.iter().map(|v| -v).collect())?;
        let price = formed_price(&params, &flow, p0)?;
        for k in 0..buckets {
            let t = w.node(k);
            let z: f64 = StandardNormal.sample(&mut rng);
            let mid = price.values()[k] + spec.tau * z;
            let mut quote = |ts| BookSnapshot {
                ts,
                bid_px: mid - spec.half_spread,
                bid_qty: rng.random_range(1..=500) as f64,
                ask_px: mid + spec.half_spread,
                ask_qty: rng.random_range(1..=500) as f64,
            };
            book.push(quote(t));
            book.push(quote(t + w.subinterval / 2));
            let base = rng.random_range(0..=200) as f64;
            let (buy, sell) = if ti[k] >= 0.0 { (base + ti[k], base) } else { (base, base - ti[k]) };
            for (vol, side, at) in [(buy, Side::Buy, 1), (sell, Side::Sell, 3)] {
                if vol > 0.0 {
                    trades.push(TradeEvent { ts: t + at * w.subinterval / 4, price: mid, volume: vol, side });
                }
            }
        }
        p0 = price.last();
    }
    Ok(SynthDay { trades, book })
}

fn stamp(ts: i64, iso: bool) -> String {
    if iso {
        DateTime::from_timestamp_nanos(ts).to_rfc3339_opts(SecondsFormat::Nanos, true)
    } else {
        ts.to_string()
    }
}

impl SynthDay {
    pub fn trades_csv(&self, iso: bool) -> Vec<u8> {
        let mut t = Table::new(["ts", "price", "volume", "side"]);
        for e in &self.trades {
            let side = if e.side == Side::Buy { "B" } else { "S" };
            t.row([stamp(e.ts, iso), num(e.price), num(e.volume), side.into()]);
        }
        t.into_bytes()
    }

    pub fn book_csv(&self, iso: bool) -> Vec<u8> {
        let mut t = Table::new(["ts", "bid_px", "bid_qty", "ask_px", "ask_qty"]);
        for s in &self.book {
            t.row([stamp(s.ts, iso), num(s.bid_px), num(s.bid_qty), num(s.ask_px), num(s.ask_qty)]);
        }
        t.into_bytes()
    }
}
