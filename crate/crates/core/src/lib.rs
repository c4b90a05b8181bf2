// SPDX-License-Identifier: Apache-2.0
//! Processing-using-DRAM toolchain: majority/NOT synthesis, row-activation
//! code generation, a functional subarray simulator, an operation library,
//! an analytical cost model and a data-movement bottleneck classifier.

pub mod classify;
pub mod codegen;
pub mod config;
pub mod cost;
pub mod error;
pub mod logic;
pub mod ops;
pub mod subarray;
pub mod synthesis;
pub mod transpose;

pub use error::{Error, Result};
