// SPDX-License-Identifier: Apache-2.0
//! Data-movement bottleneck classification of profiled functions.
//!
//! The decision tree is a threshold reconstruction. Thresholds are
//! configurable defaults and carry no empirical weight of their own.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// LLC misses over L1 misses.
pub fn compute_lfmr(llc_misses: u64, l1_misses: u64) -> Result<f64> {
    if l1_misses == 0 {
        return Err(Error::UndefinedMetric(
            "LFMR needs at least one L1 miss".into(),
        ));
    }
    if llc_misses > l1_misses {
        return Err(Error::InconsistentCounts(format!(
            "{llc_misses} LLC misses exceed {l1_misses} L1 misses"
        )));
    }
    Ok(llc_misses as f64 / l1_misses as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub function: String,
    pub llc_mpki: f64,
    pub temporal_locality: f64,
    pub arithmetic_intensity: f64,
    /// (core count, LFMR), core counts strictly increasing.
    pub lfmr_by_cores: Vec<(u32, f64)>,
}

impl MetricsRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} = {v} must be a finite value >= 0"))
            }
        };
        nonneg("llc_mpki", self.llc_mpki)?;
        nonneg("arithmetic_intensity", self.arithmetic_intensity)?;
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} is outside [0, 1]"))
            }
        };
        unit("temporal_locality", self.temporal_locality)?;
        if self.lfmr_by_cores.is_empty() {
            return Err("at least one LFMR value is required".into());
        }
        for (i, &(cores, v)) in self.lfmr_by_cores.iter().enumerate() {
            unit(&format!("lfmr@{cores}"), v)?;
            if cores == 0 || (i > 0 && cores <= self.lfmr_by_cores[i - 1].0) {
                return Err("core counts must be positive and strictly increasing".into());
            }
        }
        Ok(())
    }

    fn lfmr_first(&self) -> f64 {
        self.lfmr_by_cores[0].1
    }

    fn lfmr_last(&self) -> f64 {
        self.lfmr_by_cores[self.lfmr_by_cores.len() - 1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BottleneckClass {
    DramBandwidthBound,
    DramLatencyBound,
    L1L2CacheCapacity,
    L3CacheContention,
    L1CacheCapacity,
    ComputeBound,
}

impl BottleneckClass {
    pub const ALL: [BottleneckClass; 6] = [
        BottleneckClass::DramBandwidthBound,
        BottleneckClass::DramLatencyBound,
        BottleneckClass::L1L2CacheCapacity,
        BottleneckClass::L3CacheContention,
        BottleneckClass::L1CacheCapacity,
        BottleneckClass::ComputeBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BottleneckClass::DramBandwidthBound => "DramBandwidthBound",
            BottleneckClass::DramLatencyBound => "DramLatencyBound",
            BottleneckClass::L1L2CacheCapacity => "L1L2CacheCapacity",
            BottleneckClass::L3CacheContention => "L3CacheContention",
            BottleneckClass::L1CacheCapacity => "L1CacheCapacity",
            BottleneckClass::ComputeBound => "ComputeBound",
        }
    }
}

impl fmt::Display for BottleneckClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub mpki_high: f64,
    pub locality_high: f64,
    pub ai_high: f64,
    pub lfmr_high: f64,
    pub trend_epsilon: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            mpki_high: 10.0,
            locality_high: 0.1,
            ai_high: 0.25,
            lfmr_high: 0.7,
            trend_epsilon: 0.05,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mpki_high", self.mpki_high),
            ("ai_high", self.ai_high),
            ("trend_epsilon", self.trend_epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "classify.{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("locality_high", self.locality_high),
            ("lfmr_high", self.lfmr_high),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!(
                    "classify.{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: BottleneckClass,
    pub rationale: String,
    /// Set when the record falls outside the combinations the taxonomy
    /// describes and a fallback rule decided the class.
    pub warning: Option<String>,
}

pub fn classify(m: &MetricsRecord, t: &Thresholds) -> Classification {
    use BottleneckClass::*;
    let (first, last) = (m.lfmr_first(), m.lfmr_last());
    let done = |class, rationale: String| Classification {
        class,
        rationale,
        warning: None,
    };
    let low_locality = m.temporal_locality < t.locality_high;
    let high_mpki = m.llc_mpki >= t.mpki_high;
    if low_locality {
        if high_mpki {
            return done(
                DramBandwidthBound,
                format!(
                    "low temporal locality with LLC MPKI {} >= {}",
                    m.llc_mpki, t.mpki_high
                ),
            );
        }
        if m.lfmr_by_cores.iter().all(|&(_, v)| v >= t.lfmr_high) {
            return done(
                DramLatencyBound,
                format!(
                    "low locality, low MPKI, LFMR stays >= {} at every core count",
                    t.lfmr_high
                ),
            );
        }
        if first - last > t.trend_epsilon {
            return done(
                L1L2CacheCapacity,
                format!("low locality, low MPKI, LFMR falls from {first} to {last} as cores grow"),
            );
        }
        return Classification {
            class: L1L2CacheCapacity,
            rationale: format!(
                "low locality, low MPKI, LFMR {first}..{last} neither high nor falling"
            ),
            warning: Some("no rule matched exactly; fell back to the cache-capacity class".into()),
        };
    }
    if high_mpki {
        return Classification {
            class: DramBandwidthBound,
            rationale: format!(
                "LLC MPKI {} >= {} dominates despite high locality",
                m.llc_mpki, t.mpki_high
            ),
            warning: Some("high locality with high MPKI is outside the taxonomy".into()),
        };
    }
    if last - first > t.trend_epsilon {
        return done(
            L3CacheContention,
            format!("high locality, LFMR rises from {first} to {last} as cores grow"),
        );
    }
    if m.arithmetic_intensity < t.ai_high {
        done(
            L1CacheCapacity,
            format!(
                "high locality, arithmetic intensity {} < {}",
                m.arithmetic_intensity, t.ai_high
            ),
        )
    } else {
        done(
            ComputeBound,
            format!(
                "high locality, arithmetic intensity {} >= {}",
                m.arithmetic_intensity, t.ai_high
            ),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suitability {
    PnmBeneficial,
    PnmBeneficialAtLowCoreCounts,
    PnmCostEffectiveVsLargerL3,
    Neutral,
    PnmHarmful,
}

impl Suitability {
    pub fn name(self) -> &'static str {
        match self {
            Suitability::PnmBeneficial => "PnM-beneficial",
            Suitability::PnmBeneficialAtLowCoreCounts => "PnM-beneficial-at-low-core-counts",
            Suitability::PnmCostEffectiveVsLargerL3 => "PnM-cost-effective-vs-larger-L3",
            Suitability::Neutral => "neutral",
            Suitability::PnmHarmful => "PnM-harmful",
        }
    }
}

impl fmt::Display for Suitability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn recommend(class: BottleneckClass) -> Suitability {
    match class {
        BottleneckClass::DramBandwidthBound | BottleneckClass::DramLatencyBound => {
            Suitability::PnmBeneficial
        }
        BottleneckClass::L1L2CacheCapacity => Suitability::PnmBeneficialAtLowCoreCounts,
        BottleneckClass::L3CacheContention => Suitability::PnmCostEffectiveVsLargerL3,
        BottleneckClass::L1CacheCapacity => Suitability::Neutral,
        BottleneckClass::ComputeBound => Suitability::PnmHarmful,
    }
}

const FIXED_COLUMNS: [&str; 4] = [
    "function",
    "llc_mpki",
    "temporal_locality",
    "arithmetic_intensity",
];

/// Core counts named by the header, e.g. `lfmr@16` gives 16.
fn parse_header(fields: &csv::StringRecord) -> Result<Vec<u32>> {
    let bad = |msg: String| Error::Parse { line: 1, msg };
    if fields.len() < FIXED_COLUMNS.len() + 1 {
        return Err(bad(format!(
            "header needs {} and at least one lfmr@N column",
            FIXED_COLUMNS.join(",")
        )));
    }
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        if fields[i].trim() != *want {
            return Err(bad(format!(
                "column {} is `{}`, expected `{want}`",
                i + 1,
                &fields[i]
            )));
        }
    }
    let mut cores: Vec<u32> = Vec::new();
    for f in fields.iter().skip(FIXED_COLUMNS.len()) {
        let n = f
            .trim()
            .strip_prefix("lfmr@")
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| bad(format!("`{f}` is not an lfmr@N column")))?;
        if cores.last().is_some_and(|&p| n <= p) {
            return Err(bad("lfmr core counts must be strictly increasing".into()));
        }
        cores.push(n);
    }
    Ok(cores)
}

/// Parse metrics CSV text. Completely empty input gives no records.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(r) => r.map_err(|e| csv_error(&e, 1))?,
    };
    let cores = parse_header(&header)?;
    let width = FIXED_COLUMNS.len() + cores.len();
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| csv_error(&e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != width {
            return Err(Error::Parse {
                line,
                msg: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let num = |i: usize| {
            row[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("{} `{}` is not a number", header[i].trim(), &row[i]),
            })
        };
        let record = MetricsRecord {
            function: row[0].to_string(),
            llc_mpki: num(1)?,
            temporal_locality: num(2)?,
            arithmetic_intensity: num(3)?,
            lfmr_by_cores: cores
                .iter()
                .enumerate()
                .map(|(k, &c)| num(FIXED_COLUMNS.len() + k).map(|v| (c, v)))
                .collect::<Result<_>>()?,
        };
        record
            .validate()
            .map_err(|msg| Error::Validation { line, msg })?;
        out.push(record);
    }
    Ok(out)
}

fn csv_error(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn ingest_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Input columns followed by `class,recommendation,rationale`. Records must
/// share one set of core counts.
pub fn render_csv(records: &[MetricsRecord], results: &[Classification]) -> Result<String> {
    let Some(first) = records.first() else {
        return Ok(String::new());
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(first.lfmr_by_cores.iter().map(|(c, _)| format!("lfmr@{c}")));
    header.extend(["class", "recommendation", "rationale"].map(String::from));
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (m, c) in records.iter().zip(results) {
        let mut row = vec![
            m.function.clone(),
            m.llc_mpki.to_string(),
            m.temporal_locality.to_string(),
            m.arithmetic_intensity.to_string(),
        ];
        row.extend(m.lfmr_by_cores.iter().map(|(_, v)| v.to_string()));
        let rationale = match &c.warning {
            Some(w) => format!("{} (warning: {w})", c.rationale),
            None => c.rationale.clone(),
        };
        row.extend([
            c.class.to_string(),
            recommend(c.class).to_string(),
            rationale,
        ]);
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Ingest, classify and render in one step.
pub fn classify_csv(text: &str, t: &Thresholds) -> Result<String> {
    let records = parse_csv(text)?;
    let results: Vec<Classification> = records.iter().map(|m| classify(m, t)).collect();
    render_csv(&records, &results)
}
