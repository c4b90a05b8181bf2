// SPDX-License-Identifier: Apache-2.0
//! Effort 0 against effort 2 for every operation and width.

use rayon::prelude::*;

use pud_core::config::RunConfig;
use pud_core::cost::{self, CostParams, CostReport};
use pud_core::ops::{compile_op, CompiledOp, OpKind, OpSpec};
use pud_core::synthesis::Effort;
use pud_core::Error;

pub const DEFAULT_WIDTHS: [usize; 4] = [4, 8, 16, 32];

pub const CSV_HEADER: &str = "op,width,inputs,\
activations_e0,activations_e2,activation_ratio,\
latency_ns_e0,latency_ns_e2,energy_pj_e0,energy_pj_e2,\
throughput_ratio,energy_ratio,nodes_e0,nodes_e2,spills_e2,status";

pub struct BenchRow {
    pub spec: OpSpec,
    pub naive: Result<CompiledOp, Error>,
    pub optimized: Result<CompiledOp, Error>,
}

impl BenchRow {
    pub fn error(&self) -> Option<String> {
        match (&self.naive, &self.optimized) {
            (Err(e), _) => Some(format!("effort 0: {e}")),
            (_, Err(e)) => Some(format!("effort 2: {e}")),
            _ => None,
        }
    }

    /// Effort-0 activations over effort-2 activations.
    pub fn activation_ratio(&self) -> Option<f64> {
        let (a, b) = (self.naive.as_ref().ok()?, self.optimized.as_ref().ok()?);
        cost::Ratio::of(a.activations() as f64, b.activations() as f64).value()
    }
}

/// Every operation (n-input ones at the default operand count) at each width.
pub fn specs(widths: &[usize]) -> Result<Vec<OpSpec>, Error> {
    widths
        .iter()
        .flat_map(|&w| OpKind::ALL.map(|k| OpSpec::new(k, w)))
        .collect()
}

/// Compile all specs at efforts 0 and 2, in parallel.
pub fn run_bench(widths: &[usize], cfg: &RunConfig) -> Result<Vec<BenchRow>, Error> {
    let specs = specs(widths)?;
    let mut jobs: Vec<(usize, Effort)> = (0..specs.len())
        .flat_map(|i| [(i, Effort::None), (i, Effort::Fixpoint)])
        .collect();
    // big circuits first so they do not finish last
    jobs.sort_by_key(|&(i, e)| {
        std::cmp::Reverse((specs[i].input_bits() * specs[i].width, e as u8))
    });
    let mut done: Vec<(usize, Effort, Result<CompiledOp, Error>)> = jobs
        .into_par_iter()
        .map(|(i, e)| (i, e, compile_op(&specs[i], &cfg.subarray, e)))
        .collect();
    done.sort_by_key(|&(i, e, _)| (i, e as u8));
    let mut rows = Vec::with_capacity(specs.len());
    let mut it = done.into_iter();
    while let (Some((i, _, naive)), Some((_, _, optimized))) = (it.next(), it.next()) {
        rows.push(BenchRow {
            spec: specs[i],
            naive,
            optimized,
        });
    }
    Ok(rows)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        String::new()
    }
}

pub fn render_csv(rows: &[BenchRow], params: &CostParams) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let mut f = vec![
            r.spec.kind.to_string(),
            r.spec.width.to_string(),
            r.spec.n_inputs.to_string(),
        ];
        match (&r.naive, &r.optimized) {
            (Ok(a), Ok(b)) => {
                let (ca, cb): (CostReport, CostReport) = (
                    cost::estimate(&a.program, params),
                    cost::estimate(&b.program, params),
                );
                let c = cost::compare(&cb, &ca);
                let ratio = |x: cost::Ratio| x.value().map_or(String::new(), num);
                let inv = |x: cost::Ratio| {
                    x.value()
                        .filter(|&v| v > 0.0)
                        .map_or(String::new(), |v| num(1.0 / v))
                };
                f.extend([
                    a.activations().to_string(),
                    b.activations().to_string(),
                    r.activation_ratio().map_or(String::new(), num),
                    num(ca.latency_ns),
                    num(cb.latency_ns),
                    num(ca.energy_pj),
                    num(cb.energy_pj),
                    ratio(c.throughput),
                    inv(c.energy),
                    a.graph.node_count().to_string(),
                    b.graph.node_count().to_string(),
                    b.schedule.spills.to_string(),
                    "ok".into(),
                ]);
            }
            _ => {
                f.extend(std::iter::repeat_n(String::new(), 12));
                let msg = r.error().unwrap_or_default().replace([',', '\n', '"'], ";");
                f.push(format!("error: {msg}"));
            }
        }
        out.push_str(&f.join(","));
        out.push('\n');
    }
    out
}

/// Geometric mean of the activation ratios of the rows that compiled.
pub fn geomean_ratio(rows: &[BenchRow]) -> Option<f64> {
    let logs: Vec<f64> = rows
        .iter()
        .filter_map(BenchRow::activation_ratio)
        .map(f64::ln)
        .collect();
    if logs.is_empty() {
        None
    } else {
        Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
    }
}
