// SPDX-License-Identifier: Apache-2.0
//! Analytical latency, energy and throughput accounting for microprograms.
//!
//! Every default below is a placeholder. None of them is calibrated against
//! hardware, so results are only good for relative comparisons.

use std::fmt;

use crate::codegen::{activation_count, Command, MicroProgram};
use crate::error::{Error, Result};

/// Label attached to every printed report.
pub const ESTIMATE_LABEL: &str = "analytical estimate, not calibrated";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub t_aap_ns: f64,
    pub t_tra_ns: f64,
    pub e_act_pj: f64,
    pub e_pre_pj: f64,
    pub transpose_ns_per_word: f64,
    pub banks: u32,
    pub columns_per_subarray: u32,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            t_aap_ns: 100.0,
            t_tra_ns: 150.0,
            e_act_pj: 900.0,
            e_pre_pj: 300.0,
            transpose_ns_per_word: 1.0,
            banks: 1,
            columns_per_subarray: 65536,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("t_aap_ns", self.t_aap_ns),
            ("t_tra_ns", self.t_tra_ns),
            ("e_act_pj", self.e_act_pj),
            ("e_pre_pj", self.e_pre_pj),
            ("transpose_ns_per_word", self.transpose_ns_per_word),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "cost.{name} must be a positive number, got {v}"
                )));
            }
        }
        if self.banks == 0 {
            return Err(Error::Config("cost.banks must be positive".into()));
        }
        if self.columns_per_subarray == 0 {
            return Err(Error::Config(
                "cost.columns_per_subarray must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Time to move `words` 64-bit words through the transposition unit.
    pub fn transpose_ns(&self, words: u64) -> f64 {
        words as f64 * self.transpose_ns_per_word
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub aap: u64,
    pub tra: u64,
    pub activations: u64,
    pub latency_ns: f64,
    pub energy_pj: f64,
    /// Infinite for an empty program.
    pub throughput_ops_per_s: f64,
}

fn throughput(params: &CostParams, latency_ns: f64) -> f64 {
    let lanes = params.banks as f64 * params.columns_per_subarray as f64;
    if latency_ns > 0.0 {
        lanes / (latency_ns * 1e-9)
    } else {
        f64::INFINITY
    }
}

pub fn estimate(program: &MicroProgram, params: &CostParams) -> CostReport {
    let count = activation_count(program);
    let latency_ns = program
        .commands
        .iter()
        .map(|c| match c {
            Command::Aap { .. } => params.t_aap_ns,
            Command::Tra(_) => params.t_tra_ns,
        })
        .sum::<f64>();
    // one precharge closes every command
    let energy_pj =
        count.total as f64 * params.e_act_pj + program.commands.len() as f64 * params.e_pre_pj;
    CostReport {
        aap: count.aap,
        tra: count.tra,
        activations: count.total,
        latency_ns,
        energy_pj,
        throughput_ops_per_s: throughput(params, latency_ns),
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cost ({ESTIMATE_LABEL}):")?;
        writeln!(
            f,
            "  commands: {} AAP, {} TRA ({} activations)",
            self.aap, self.tra, self.activations
        )?;
        writeln!(f, "  latency: {:.1} ns", self.latency_ns)?;
        writeln!(f, "  energy: {:.1} pJ", self.energy_pj)?;
        write!(f, "  throughput: {:.4e} ops/s", self.throughput_ops_per_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    /// Zero or non-finite denominator.
    Undefined,
}

impl Ratio {
    pub fn of(num: f64, den: f64) -> Self {
        let r = num / den;
        if den != 0.0 && den.is_finite() && r.is_finite() {
            Ratio::Defined(r)
        } else {
            Ratio::Undefined
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(r) => Some(r),
            Ratio::Undefined => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Defined(r) => write!(f, "{r:.4}"),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

/// Elementwise `a / b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub activations: Ratio,
    pub latency: Ratio,
    pub energy: Ratio,
    pub throughput: Ratio,
}

pub fn compare(a: &CostReport, b: &CostReport) -> Comparison {
    Comparison {
        activations: Ratio::of(a.activations as f64, b.activations as f64),
        latency: Ratio::of(a.latency_ns, b.latency_ns),
        energy: Ratio::of(a.energy_pj, b.energy_pj),
        throughput: Ratio::of(a.throughput_ops_per_s, b.throughput_ops_per_s),
    }
}
