// SPDX-License-Identifier: Apache-2.0
//! `key = value` run configuration.
//!
//! ```text
//! # geometry
//! subarray.rows = 512
//! cost.t_aap_ns = 100
//! classify.mpki_high = 10
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::classify::Thresholds;
use crate::codegen::SubarrayConfig;
use crate::cost::CostParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct RunConfig {
    pub subarray: SubarrayConfig,
    pub cost: CostParams,
    pub thresholds: Thresholds,
}


pub const KEYS: [&str; 15] = [
    "subarray.rows",
    "subarray.columns",
    "subarray.data_rows",
    "cost.t_aap_ns",
    "cost.t_tra_ns",
    "cost.e_act_pj",
    "cost.e_pre_pj",
    "cost.transpose_ns_per_word",
    "cost.banks",
    "cost.columns_per_subarray",
    "classify.mpki_high",
    "classify.locality_high",
    "classify.ai_high",
    "classify.lfmr_high",
    "classify.trend_epsilon",
];

/// Accumulates settings; geometry is resolved once at the end because the
/// three subarray keys depend on each other.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    rows: Option<usize>,
    columns: Option<usize>,
    data_rows: Option<usize>,
    cost_columns: Option<u32>,
    cost: CostParams,
    thresholds: Thresholds,
}

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{raw}` is not a valid value for {key}"),
    })
}

impl ConfigBuilder {
    /// `line` only labels errors; pass 0 for command-line overrides.
    pub fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<()> {
        let raw = raw.trim();
        let (c, t) = (&mut self.cost, &mut self.thresholds);
        match key.trim() {
            "subarray.rows" => self.rows = Some(value(key, raw, line)?),
            "subarray.columns" => self.columns = Some(value(key, raw, line)?),
            "subarray.data_rows" => self.data_rows = Some(value(key, raw, line)?),
            "cost.t_aap_ns" => c.t_aap_ns = value(key, raw, line)?,
            "cost.t_tra_ns" => c.t_tra_ns = value(key, raw, line)?,
            "cost.e_act_pj" => c.e_act_pj = value(key, raw, line)?,
            "cost.e_pre_pj" => c.e_pre_pj = value(key, raw, line)?,
            "cost.transpose_ns_per_word" => c.transpose_ns_per_word = value(key, raw, line)?,
            "cost.banks" => c.banks = value(key, raw, line)?,
            "cost.columns_per_subarray" => self.cost_columns = Some(value(key, raw, line)?),
            "classify.mpki_high" => t.mpki_high = value(key, raw, line)?,
            "classify.locality_high" => t.locality_high = value(key, raw, line)?,
            "classify.ai_high" => t.ai_high = value(key, raw, line)?,
            "classify.lfmr_high" => t.lfmr_high = value(key, raw, line)?,
            "classify.trend_epsilon" => t.trend_epsilon = value(key, raw, line)?,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(k, v, i + 1)?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` lacks `=`")))?;
        self.set(k, v, 0).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Config(msg),
            e => e,
        })
    }

    pub fn build(self) -> Result<RunConfig> {
        let base = SubarrayConfig::default();
        let mut subarray = SubarrayConfig::with_rows(
            self.rows.unwrap_or(base.total_rows),
            self.columns.unwrap_or(base.columns),
        )?;
        if let Some(d) = self.data_rows {
            subarray = subarray.with_data_rows(d)?;
        }
        let columns_per_subarray = match self.cost_columns {
            Some(c) => c,
            None => u32::try_from(subarray.columns).map_err(|_| {
                Error::Config(format!(
                    "{} columns overflow the cost model",
                    subarray.columns
                ))
            })?,
        };
        let cost = CostParams {
            columns_per_subarray,
            ..self.cost
        };
        cost.validate()?;
        self.thresholds.validate()?;
        Ok(RunConfig {
            subarray,
            cost,
            thresholds: self.thresholds,
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut b = ConfigBuilder::default();
        b.apply_text(text)?;
        b.build()
    }

    /// Optional file first, then overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut b = ConfigBuilder::default();
        if let Some(p) = path {
            b.apply_text(&std::fs::read_to_string(p)?)?;
        }
        for o in overrides {
            b.apply_override(o)?;
        }
        b.build()
    }
}
