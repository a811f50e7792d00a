//! Throughput, bisection bandwidth, utilization, latency statistics and
//! load sweeps.
//!
//! All rates are bytes per cycle internally and bytes per second (powers of
//! ten) at the API boundary.

use std::io::Write;

use rayon::prelude::*;

use crate::axi::Channel;
use crate::error::{Error, MeasurementError};
use crate::topology::{Coord, NocConfig, Port};

/// Default relative gain below which a sweep counts as saturated.
pub const SATURATION_GAIN: f64 = 0.02;

/// Busy cycles of one crosspoint egress on one channel. `egress` is `None`
/// for the internal decode-error port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkBusy {
    pub xp: Coord,
    pub egress: Option<Port>,
    pub channel: Channel,
    pub busy_cycles: u64,
}

/// Counters over a measurement window. Payload counts R beats delivered to
/// masters and W beats accepted by slaves; AW/AR/B are overhead.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub warmup_cycles: u64,
    pub measured_cycles: u64,
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub completed_transfers: u64,
    pub link_busy: Vec<LinkBusy>,
    /// Issue-to-last-response latency per completed transfer, in cycles.
    pub latencies: Vec<u64>,
    pub data_width: u32,
    pub clock_hz: f64,
}

impl SimStats {
    pub fn delivered_payload_bytes(&self) -> u64 {
        self.read_bytes + self.write_bytes
    }
}

pub fn aggregated_throughput(stats: &SimStats, clock_hz: f64) -> Result<f64, MeasurementError> {
    if stats.measured_cycles == 0 {
        return Err(MeasurementError::ZeroCycles);
    }
    Ok(stats.delivered_payload_bytes() as f64 / stats.measured_cycles as f64 * clock_hz)
}

/// Links crossing the midline cut of the longer dimension, both directions,
/// times the link rate. A 1-wide dimension has no cut.
pub fn bisection_bandwidth(config: &NocConfig) -> f64 {
    let crossing = if config.cols >= config.rows {
        if config.cols < 2 {
            0
        } else {
            config.rows
        }
    } else {
        config.cols
    };
    (2 * crossing) as f64 * f64::from(config.beat_bytes()) * config.clock_hz
}

pub fn utilization(throughput: f64, config: &NocConfig) -> Result<f64, MeasurementError> {
    let bisection = bisection_bandwidth(config);
    if bisection <= 0.0 {
        return Err(MeasurementError::ZeroBisection);
    }
    Ok(throughput / bisection)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
    pub max: u64,
}

/// Nearest-rank percentiles: the smallest sample with at least `p` percent
/// of samples at or below it.
pub fn latency_stats(stats: &SimStats) -> Result<LatencyStats, MeasurementError> {
    latency_stats_of(&stats.latencies)
}

pub fn latency_stats_of(samples: &[u64]) -> Result<LatencyStats, MeasurementError> {
    if samples.is_empty() {
        return Err(MeasurementError::NoSamples);
    }
    let mut s = samples.to_vec();
    s.sort_unstable();
    let rank = |p: f64| {
        let k = (p / 100.0 * s.len() as f64).ceil() as usize;
        s[k.clamp(1, s.len()) - 1]
    };
    Ok(LatencyStats {
        mean: s.iter().map(|&x| x as f64).sum::<f64>() / s.len() as f64,
        p50: rank(50.0),
        p95: rank(95.0),
        p99: rank(99.0),
        max: *s.last().unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub load: f64,
    pub throughput_bps: f64,
    pub utilization: f64,
    pub latency: Option<LatencyStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    /// Index into `points`.
    pub saturation_point: usize,
}

impl SweepCurve {
    pub fn saturation(&self) -> &SweepPoint {
        &self.points[self.saturation_point]
    }

    /// Peak accepted throughput over the curve.
    pub fn peak_throughput(&self) -> f64 {
        self.points.iter().map(|p| p.throughput_bps).fold(0.0, f64::max)
    }
}

/// First point whose throughput gain over its predecessor falls below
/// `threshold` (relative), or the last point.
pub fn saturation_index(throughputs: &[f64], threshold: f64) -> usize {
    for i in 1..throughputs.len() {
        let prev = throughputs[i - 1];
        let gain = if prev > 0.0 {
            (throughputs[i] - prev) / prev
        } else if throughputs[i] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if gain < threshold {
            return i;
        }
    }
    throughputs.len().saturating_sub(1)
}

/// Runs `simulate(index, load)` for every load point in parallel and builds
/// the curve. The first failing point aborts the sweep.
pub fn sweep_with<F>(config: &NocConfig, loads: &[f64], threshold: f64, simulate: F) -> Result<SweepCurve, Error>
where
    F: Fn(usize, f64) -> Result<SimStats, Error> + Sync,
{
    for (i, w) in loads.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(crate::error::ConfigError::invalid("sweep.loads", format!("not increasing at point {}", i + 1)).into());
        }
    }
    if loads.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(crate::error::ConfigError::invalid("sweep.loads", "points must lie in (0, 1]").into());
    }
    if loads.is_empty() {
        return Err(crate::error::ConfigError::invalid("sweep.loads", "no points").into());
    }
    let results: Vec<Result<SweepPoint, Error>> = loads
        .par_iter()
        .enumerate()
        .map(|(i, &load)| {
            let wrap = |e: Error| Error::SweepPoint {
                index: i,
                load,
                source: Box::new(e),
            };
            let stats = simulate(i, load).map_err(wrap)?;
            let throughput_bps = aggregated_throughput(&stats, config.clock_hz).map_err(|e| wrap(e.into()))?;
            Ok(SweepPoint {
                load,
                throughput_bps,
                utilization: utilization(throughput_bps, config).map_err(|e| wrap(e.into()))?,
                latency: latency_stats(&stats).ok(),
            })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let tp: Vec<f64> = points.iter().map(|p| p.throughput_bps).collect();
    Ok(SweepCurve {
        saturation_point: saturation_index(&tp, threshold),
        points,
    })
}

/// `load,throughput_bps,utilization,mean_lat,p50,p95,p99`
pub fn write_sweep_csv(curve: &SweepCurve, out: impl Write) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["load", "throughput_bps", "utilization", "mean_lat", "p50", "p95", "p99"])?;
    for p in &curve.points {
        let lat = |f: fn(&LatencyStats) -> String| p.latency.as_ref().map(f).unwrap_or_default();
        w.write_record([
            p.load.to_string(),
            format!("{:.1}", p.throughput_bps),
            format!("{:.6}", p.utilization),
            lat(|l| format!("{:.2}", l.mean)),
            lat(|l| l.p50.to_string()),
            lat(|l| l.p95.to_string()),
            lat(|l| l.p99.to_string()),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row: `throughput_bps,utilization,read_bytes,write_bytes,measured_cycles,completed_transfers,mean_lat,p50,p95,p99`.
pub fn write_stats_csv(stats: &SimStats, config: &NocConfig, out: impl Write) -> Result<(), Error> {
    // An empty run measured nothing and moved nothing.
    let throughput = aggregated_throughput(stats, config.clock_hz).unwrap_or(0.0);
    let util = utilization(throughput, config).unwrap_or(0.0);
    let lat = latency_stats(stats).ok();
    let l = |f: fn(&LatencyStats) -> String| lat.as_ref().map(f).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "throughput_bps",
        "utilization",
        "read_bytes",
        "write_bytes",
        "measured_cycles",
        "completed_transfers",
        "mean_lat",
        "p50",
        "p95",
        "p99",
    ])?;
    w.write_record([
        format!("{throughput:.1}"),
        format!("{util:.6}"),
        stats.read_bytes.to_string(),
        stats.write_bytes.to_string(),
        stats.measured_cycles.to_string(),
        stats.completed_transfers.to_string(),
        l(|l| format!("{:.2}", l.mean)),
        l(|l| l.p50.to_string()),
        l(|l| l.p95.to_string()),
        l(|l| l.p99.to_string()),
    ])?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `row,col,egress,channel,busy_cycles,occupancy`, one row per egress channel
/// that carried anything. Occupancy is busy cycles over measured cycles.
pub fn write_links_csv(stats: &SimStats, out: impl Write) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "egress", "channel", "busy_cycles", "occupancy"])?;
    for l in &stats.link_busy {
        let occupancy = if stats.measured_cycles == 0 { 0.0 } else { l.busy_cycles as f64 / stats.measured_cycles as f64 };
        w.write_record([
            l.xp.row.to_string(),
            l.xp.col.to_string(),
            l.egress.map_or("err", Port::name).to_string(),
            l.channel.name().to_string(),
            l.busy_cycles.to_string(),
            format!("{occupancy:.6}"),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCell {
    pub pattern: String,
    pub burst_bytes: u64,
    pub throughput_bps: f64,
    pub utilization: f64,
}

/// `pattern,burst_bytes,throughput_bps,utilization`
pub fn write_matrix_csv(cells: &[MatrixCell], out: impl Write) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pattern", "burst_bytes", "throughput_bps", "utilization"])?;
    for c in cells {
        w.write_record([
            c.pattern.clone(),
            c.burst_bytes.to_string(),
            format!("{:.1}", c.throughput_bps),
            format!("{:.6}", c.utilization),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
