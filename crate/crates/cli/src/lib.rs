// SPDX-License-Identifier: Apache-2.0
//! Command-line driver. [`run`] holds all behaviour so tests can call it
//! without spawning a process.
//!
//! Exit codes: 0 success, 1 bench failure or internal error, 2 usage or
//! parse error, 3 capacity or data error.

pub mod bench;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pud_core::codegen::{MicroProgram, SubarrayConfig, RESERVED_ROWS};
use pud_core::config::RunConfig;
use pud_core::cost;
use pud_core::ops::{compile_op, execute_program, OpKind, OpSpec, DEFAULT_N_INPUTS};
use pud_core::subarray::SubarrayState;
use pud_core::synthesis::Effort;
use pud_core::transpose::{to_horizontal, to_vertical, HorizontalBlock};
use pud_core::{classify, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "pud",
    version,
    about = "Compile, run and cost bulk bitwise DRAM operations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set subarray.columns=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize one operation into a microprogram file.
    Compile {
        #[arg(long)]
        op: String,
        #[arg(long)]
        width: usize,
        /// Operand count for and_n, or_n and xor_n.
        #[arg(long, default_value_t = DEFAULT_N_INPUTS)]
        inputs: usize,
        /// 0 none, 1 single pass, 2 fixpoint.
        #[arg(long, default_value_t = 2)]
        effort: u8,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Execute a microprogram on operand files (one decimal per line).
    Run {
        program: PathBuf,
        #[arg(required = true)]
        operands: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// Also write the carry/borrow flag of add and sub, one per line.
        #[arg(long)]
        flags: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compile every operation at several widths and efforts; emit a CSV.
    Bench {
        /// Defaults to standard output.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_WIDTHS)]
        widths: Vec<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Label workload metrics with bottleneck classes.
    Classify {
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Convert values between horizontal and vertical layout.
    Transpose {
        #[command(subcommand)]
        direction: Direction,
    },
}

#[derive(Subcommand, Debug)]
enum Direction {
    /// Values (one per line) to a bit dump: line i holds bit i of every value.
    ToVertical {
        input: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Bit dump back to values.
    ToHorizontal {
        input: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Command { source, .. } => exit_code(source),
        Error::Parse { .. } | Error::Config(_) | Error::Unsupported(_) => EXIT_USAGE,
        Error::Capacity(_)
        | Error::Data(_)
        | Error::Validation { .. }
        | Error::InvalidRow(_)
        | Error::RowSafety(_)
        | Error::Io(_)
        | Error::UndefinedMetric(_)
        | Error::InconsistentCounts(_)
        | Error::InputArity { .. } => EXIT_DATA,
        _ => EXIT_FAILURE,
    }
}

/// Parse `args` (program name first) and execute. Reports go to `out`,
/// diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Compile {
            op,
            width,
            inputs,
            effort,
            output,
            config,
        } => cmd_compile(&op, width, inputs, effort, &output, &config, out),
        Command::Run {
            program,
            operands,
            output,
            flags,
            config,
        } => cmd_run(&program, &operands, &output, flags.as_deref(), &config, out),
        Command::Bench {
            output,
            widths,
            config,
        } => {
            return match cmd_bench(output.as_deref(), &widths, &config, out, err) {
                Ok(code) => code,
                Err(e) => report(e, err),
            }
        }
        Command::Classify {
            input,
            output,
            config,
        } => cmd_classify(&input, output.as_deref(), &config, out),
        Command::Transpose { direction } => cmd_transpose(direction),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => report(e, err),
    }
}

fn report(e: Error, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code(&e)
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_kind(name: &str) -> Result<OpKind, Error> {
    name.parse::<OpKind>().map_err(|_| {
        let known: Vec<&str> = OpKind::ALL.iter().map(|k| k.name()).collect();
        Error::Unsupported(format!(
            "unknown operation `{name}`; expected one of {}",
            known.join(", ")
        ))
    })
}

fn cmd_compile(
    op: &str,
    width: usize,
    inputs: usize,
    effort: u8,
    output: &Path,
    config: &ConfigArgs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let kind = parse_kind(op)?;
    let effort = Effort::try_from(effort)?;
    let cfg = config.load()?;
    let spec = OpSpec::with_inputs(kind, width, inputs)?;
    let compiled = compile_op(&spec, &cfg.subarray, effort)?;
    write(output, &compiled.program.to_string())?;
    let verified = if compiled.verification.exhaustive {
        "exhaustive"
    } else {
        "sampled"
    };
    writeln!(
        out,
        "compiled {spec} at effort {} -> {}",
        effort as u8,
        output.display()
    )
    .map_err(io)?;
    write!(out, "synthesis: {}", compiled.report).map_err(io)?;
    writeln!(
        out,
        "schedule: {} data rows, {} spills, {} reloads",
        compiled.program.data_rows, compiled.schedule.spills, compiled.schedule.reloads
    )
    .map_err(io)?;
    writeln!(
        out,
        "verified: {} lanes ({verified})",
        compiled.verification.lanes
    )
    .map_err(io)?;
    writeln!(out, "{}", cost::estimate(&compiled.program, &cfg.cost)).map_err(io)?;
    Ok(())
}

/// One unsigned decimal per line; blank lines are skipped.
pub fn parse_values(text: &str) -> Result<Vec<u64>, Error> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(t.parse::<u64>().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("`{t}` is not an unsigned decimal"),
        })?);
    }
    Ok(values)
}

pub fn render_values(values: &[u64]) -> String {
    values.iter().map(|v| format!("{v}\n")).collect()
}

fn cmd_run(
    program: &Path,
    operands: &[PathBuf],
    output: &Path,
    flags: Option<&Path>,
    config: &ConfigArgs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let cfg = config.load()?;
    let prog = MicroProgram::parse(&read(program)?)?;
    let kind = parse_kind(&prog.op)?;
    let spec = OpSpec::with_inputs(kind, prog.width, operands.len())?;
    let lists = operands
        .iter()
        .map(|p| {
            parse_values(&read(p)?).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse {
                    line,
                    msg: format!("{}: {msg}", p.display()),
                },
                e => e,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = execute_program(&spec, &prog, &lists, &cfg.subarray)?;
    write(output, &render_values(&result.values))?;
    if let Some(path) = flags {
        match &result.flags {
            Some(f) => write(path, &render_values(f))?,
            None => return Err(Error::Unsupported(format!("{spec} produces no flag"))),
        }
    }
    let r = &result.report;
    writeln!(
        out,
        "ran {spec} on {} lanes -> {}",
        lists[0].len(),
        output.display()
    )
    .map_err(io)?;
    writeln!(
        out,
        "executed: {} AAP, {} TRA, {} activations",
        r.aap, r.tra, r.activations
    )
    .map_err(io)?;
    writeln!(out, "{}", cost::estimate(&prog, &cfg.cost)).map_err(io)?;
    Ok(())
}

fn cmd_bench(
    output: Option<&Path>,
    widths: &[usize],
    config: &ConfigArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Error> {
    let cfg = config.load()?;
    let rows = bench::run_bench(widths, &cfg)?;
    let csv = bench::render_csv(&rows, &cfg.cost);
    match output {
        Some(p) => write(p, &csv)?,
        None => out.write_all(csv.as_bytes()).map_err(io)?,
    }
    let failed: Vec<&bench::BenchRow> = rows.iter().filter(|r| r.error().is_some()).collect();
    for r in &failed {
        writeln!(
            err,
            "bench: {} failed: {}",
            r.spec,
            r.error().unwrap_or_default()
        )
        .map_err(io)?;
    }
    if let Some(g) = bench::geomean_ratio(&rows) {
        writeln!(
            err,
            "bench: {} rows, geometric-mean activation ratio {g:.3} ({})",
            rows.len(),
            cost::ESTIMATE_LABEL
        )
        .map_err(io)?;
    }
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn cmd_classify(
    input: &Path,
    output: Option<&Path>,
    config: &ConfigArgs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let cfg = config.load()?;
    let text = classify::classify_csv(&read(input)?, &cfg.thresholds)?;
    match output {
        Some(p) => write(p, &text),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

/// A subarray just large enough to hold `count` values of `width` bits.
fn scratch(width: usize, count: usize) -> Result<SubarrayState, Error> {
    SubarrayState::new(&SubarrayConfig::with_rows(
        width + RESERVED_ROWS,
        count.max(1),
    )?)
}

fn cmd_transpose(direction: Direction) -> Result<(), Error> {
    match direction {
        Direction::ToVertical {
            input,
            width,
            output,
        } => {
            let values = parse_values(&read(&input)?)?;
            let block = HorizontalBlock::new(values, width).map_err(|e| match e {
                Error::Unsupported(m) if width > 0 && width <= 64 => Error::Data(m),
                e => e,
            })?;
            if block.values.is_empty() {
                return write(&output, "");
            }
            let mut state = scratch(width, block.values.len())?;
            to_vertical(&block, &mut state, 0)?;
            write(&output, &state.dump_rows(0..width)?)
        }
        Direction::ToHorizontal {
            input,
            width,
            output,
        } => {
            let text = read(&input)?;
            let count = text.lines().next().map_or(0, str::len);
            if count == 0 {
                return write(&output, "");
            }
            let rows = text.lines().count();
            if rows != width {
                return Err(Error::Data(format!(
                    "dump has {rows} rows, expected {width}"
                )));
            }
            let mut state = scratch(width, count)?;
            state.load_dump(0, &text)?;
            write(
                &output,
                &render_values(&to_horizontal(&state, 0, width, count)?.values),
            )
        }
    }
}
