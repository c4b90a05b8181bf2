// SPDX-License-Identifier: Apache-2.0
//! Bit-accurate functional model of one DRAM subarray and the control unit
//! that replays μPrograms on it.

use crate::codegen::{Command, MicroProgram, RowRef, SubarrayConfig};
use crate::error::{Error, Result};
use crate::logic::maj;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommandLog {
    pub aap: u64,
    pub tra: u64,
}

impl CommandLog {
    pub fn activations(&self) -> u64 {
        2 * self.aap + 3 * self.tra
    }
}

/// Tallies for one [`SubarrayState::run_program`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecutionReport {
    pub aap: u64,
    pub tra: u64,
    pub activations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubarrayState {
    cfg: SubarrayConfig,
    words: usize,
    bits: Vec<u64>,
    log: CommandLog,
}

impl SubarrayState {
    pub fn new(cfg: &SubarrayConfig) -> Result<Self> {
        cfg.validate()?;
        let words = cfg.columns.div_ceil(64);
        let mut s = Self {
            cfg: cfg.clone(),
            words,
            bits: vec![0; words * cfg.total_rows],
            log: CommandLog::default(),
        };
        let ones = cfg.const_rows[1];
        for w in 0..words {
            s.bits[ones * words + w] = s.mask(w);
        }
        Ok(s)
    }

    pub fn config(&self) -> &SubarrayConfig {
        &self.cfg
    }

    pub fn columns(&self) -> usize {
        self.cfg.columns
    }

    pub fn log(&self) -> CommandLog {
        self.log
    }

    /// Valid-column mask of word `w`.
    fn mask(&self, w: usize) -> u64 {
        let tail = self.cfg.columns % 64;
        if w + 1 == self.words && tail != 0 {
            (1u64 << tail) - 1
        } else {
            !0
        }
    }

    fn slice(&self, phys: usize) -> &[u64] {
        &self.bits[phys * self.words..(phys + 1) * self.words]
    }

    fn slice_mut(&mut self, phys: usize) -> &mut [u64] {
        &mut self.bits[phys * self.words..(phys + 1) * self.words]
    }

    fn writable(&self, row: RowRef) -> Result<usize> {
        match row {
            RowRef::C0 | RowRef::C1 => Err(Error::RowSafety(format!(
                "constant row {row} cannot be written"
            ))),
            RowRef::NotDcc(_) => Err(Error::InvalidRow(format!(
                "{row} is readable only as an AAP source"
            ))),
            _ => self.cfg.physical(row),
        }
    }

    /// Row contents as packed words, column `c` at bit `c % 64` of word `c / 64`.
    pub fn row_words(&self, row: RowRef) -> Result<Vec<u64>> {
        let phys = self.cfg.physical(row)?;
        let mut v = self.slice(phys).to_vec();
        if matches!(row, RowRef::NotDcc(_)) {
            for (w, x) in v.iter_mut().enumerate() {
                *x = !*x & self.mask(w);
            }
        }
        Ok(v)
    }

    pub fn write_row_words(&mut self, row: RowRef, words: &[u64]) -> Result<()> {
        let phys = self.writable(row)?;
        if words.len() != self.words {
            return Err(Error::InputArity {
                expected: self.words,
                got: words.len(),
            });
        }
        for w in 0..self.words {
            let m = self.mask(w);
            self.slice_mut(phys)[w] = words[w] & m;
        }
        Ok(())
    }

    pub fn read_row(&self, row: RowRef) -> Result<Vec<bool>> {
        let words = self.row_words(row)?;
        Ok((0..self.cfg.columns)
            .map(|c| words[c / 64] >> (c % 64) & 1 == 1)
            .collect())
    }

    pub fn write_row(&mut self, row: RowRef, bits: &[bool]) -> Result<()> {
        if bits.len() != self.cfg.columns {
            return Err(Error::InputArity {
                expected: self.cfg.columns,
                got: bits.len(),
            });
        }
        let mut words = vec![0u64; self.words];
        for (c, &b) in bits.iter().enumerate() {
            words[c / 64] |= (b as u64) << (c % 64);
        }
        self.write_row_words(row, &words)
    }

    pub fn bit(&self, row: RowRef, column: usize) -> Result<bool> {
        if column >= self.cfg.columns {
            return Err(Error::Capacity(format!(
                "column {column} exceeds {} columns",
                self.cfg.columns
            )));
        }
        let phys = self.cfg.physical(row)?;
        let b = self.slice(phys)[column / 64] >> (column % 64) & 1 == 1;
        Ok(b ^ matches!(row, RowRef::NotDcc(_)))
    }

    pub fn set_bit(&mut self, row: RowRef, column: usize, value: bool) -> Result<()> {
        if column >= self.cfg.columns {
            return Err(Error::Capacity(format!(
                "column {column} exceeds {} columns",
                self.cfg.columns
            )));
        }
        let phys = self.writable(row)?;
        let w = &mut self.slice_mut(phys)[column / 64];
        let m = 1u64 << (column % 64);
        if value {
            *w |= m;
        } else {
            *w &= !m;
        }
        Ok(())
    }

    /// Row copy. A `~DCCk` source delivers the complement of `DCCk`.
    pub fn exec_aap(&mut self, src: RowRef, dst: RowRef) -> Result<()> {
        Command::Aap { src, dst }.check()?;
        let value = self.row_words(src)?;
        let phys = self.writable(dst)?;
        self.slice_mut(phys).copy_from_slice(&value);
        self.log.aap += 1;
        Ok(())
    }

    /// Triple-row activation: all three rows end up holding their majority.
    pub fn exec_tra(&mut self, rows: [RowRef; 3]) -> Result<()> {
        Command::Tra(rows).check()?;
        let [a, b, c] = [
            self.cfg.physical(rows[0])?,
            self.cfg.physical(rows[1])?,
            self.cfg.physical(rows[2])?,
        ];
        for w in 0..self.words {
            let m = maj(
                self.bits[a * self.words + w],
                self.bits[b * self.words + w],
                self.bits[c * self.words + w],
            );
            for r in [a, b, c] {
                self.bits[r * self.words + w] = m;
            }
        }
        self.log.tra += 1;
        Ok(())
    }

    pub fn exec(&mut self, command: &Command) -> Result<()> {
        match *command {
            Command::Aap { src, dst } => self.exec_aap(src, dst),
            Command::Tra(rows) => self.exec_tra(rows),
        }
    }

    /// Execute every command in order, stopping at the first failure.
    pub fn run_program(&mut self, program: &MicroProgram) -> Result<ExecutionReport> {
        let before = self.log;
        for (i, c) in program.commands.iter().enumerate() {
            self.exec(c).map_err(|e| Error::Command {
                line: program.line_of(i),
                source: Box::new(e),
            })?;
        }
        self.check_constants()?;
        let aap = self.log.aap - before.aap;
        let tra = self.log.tra - before.tra;
        Ok(ExecutionReport {
            aap,
            tra,
            activations: 2 * aap + 3 * tra,
        })
    }

    /// Verify that `C0` is all zeros and `C1` all ones.
    pub fn check_constants(&self) -> Result<()> {
        let [zero, one] = self.cfg.const_rows;
        let ok0 = self.slice(zero).iter().all(|&w| w == 0);
        let ok1 = (0..self.words).all(|w| self.slice(one)[w] == self.mask(w));
        if ok0 && ok1 {
            Ok(())
        } else {
            Err(Error::RowSafety("constant rows were modified".into()))
        }
    }

    /// Physical rows `rows` as lines of `0`/`1`, one line per row, column 0 first.
    pub fn dump_rows(&self, rows: std::ops::Range<usize>) -> Result<String> {
        if rows.end > self.cfg.total_rows {
            return Err(Error::InvalidRow(format!(
                "row {} is outside the subarray",
                rows.end - 1
            )));
        }
        let mut out = String::with_capacity(rows.len() * (self.cfg.columns + 1));
        for r in rows {
            let words = self.slice(r);
            for c in 0..self.cfg.columns {
                out.push(if words[c / 64] >> (c % 64) & 1 == 1 {
                    '1'
                } else {
                    '0'
                });
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Inverse of [`Self::dump_rows`]: load rows starting at physical row `first`.
    pub fn load_dump(&mut self, first: usize, text: &str) -> Result<()> {
        let mut staged = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let phys = first + i;
            if phys >= self.cfg.total_rows {
                return Err(Error::InvalidRow(format!(
                    "row {phys} is outside the subarray"
                )));
            }
            if self.cfg.const_rows.contains(&phys) {
                return Err(Error::RowSafety(format!("row {phys} is a constant row")));
            }
            if line.len() != self.cfg.columns {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {} bits, found {}", self.cfg.columns, line.len()),
                });
            }
            let mut words = vec![0u64; self.words];
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => words[c / 64] |= 1 << (c % 64),
                    other => {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: format!("unexpected character `{other}`"),
                        })
                    }
                }
            }
            staged.push((phys, words));
        }
        for (phys, words) in staged {
            self.slice_mut(phys).copy_from_slice(&words);
        }
        Ok(())
    }
}
