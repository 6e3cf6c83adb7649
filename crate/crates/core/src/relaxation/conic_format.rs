//! Plain-text dump of a [`ConicProgram`] for inspection with external solvers.
//!
//! ```text
//! CONIC 1
//! VARS <num_vars>
//! OBJ <nnz>
//! <pos> <coef>                    # objective, minimized
//! EQ <rows> <nnz>
//! <row> <pos> <coef>              # equality matrix triplets
//! RHS
//! <row> <value>                   # one line per equality row
//! PSD <blocks>
//! BLOCK <index> <side> <nnz>
//! <row> <col> <pos> <coef>        # upper triangle (row <= col) of the block
//! END
//! ```
//!
//! All indices are 0-based. Values use the shortest representation that
//! round-trips to the same `f64`.

use std::fmt::Write as _;

use super::ConicProgram;
use crate::error::{Error, Result};
use crate::momentstruct::{LinearForm, StructuredMatrix};

pub fn write_conic_program(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "CONIC 1");
    let _ = writeln!(out, "VARS {}", prog.num_vars);
    let _ = writeln!(out, "OBJ {}", prog.objective.terms().len());
    for &(pos, c) in prog.objective.terms() {
        let _ = writeln!(out, "{pos} {c:?}");
    }
    let nnz: usize = prog.equalities.iter().map(|(f, _)| f.terms().len()).sum();
    let _ = writeln!(out, "EQ {} {nnz}", prog.equalities.len());
    for (row, (form, _)) in prog.equalities.iter().enumerate() {
        for &(pos, c) in form.terms() {
            let _ = writeln!(out, "{row} {pos} {c:?}");
        }
    }
    let _ = writeln!(out, "RHS");
    for (row, (_, b)) in prog.equalities.iter().enumerate() {
        let _ = writeln!(out, "{row} {b:?}");
    }
    let _ = writeln!(out, "PSD {}", prog.psd_blocks.len());
    for (k, block) in prog.psd_blocks.iter().enumerate() {
        let side = block.side();
        let upper = || (0..side).flat_map(|r| (r..side).map(move |c| (r, c)));
        let nnz: usize = upper().map(|(r, c)| block.entry(r, c).terms().len()).sum();
        let _ = writeln!(out, "BLOCK {k} {side} {nnz}");
        for (r, c) in upper() {
            for &(pos, coef) in block.entry(r, c).terms() {
                let _ = writeln!(out, "{r} {c} {pos} {coef:?}");
            }
        }
    }
    let _ = writeln!(out, "END");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let (i, raw) = self
                .inner
                .next()
                .ok_or_else(|| Error::Invalid("unexpected end of conic program".into()))?;
            self.line = i + 1;
            let t = raw.trim();
            if !t.is_empty() {
                return Ok(t.split_whitespace().collect());
            }
        }
    }

    fn err(&self, what: &str) -> Error {
        Error::Invalid(format!("conic program line {}: {what}", self.line))
    }

    fn header(&mut self, key: &str, args: usize) -> Result<Vec<usize>> {
        let f = self.next_fields()?;
        if f.first() != Some(&key) || f.len() != args + 1 {
            return Err(self.err(&format!("expected `{key}` header")));
        }
        f[1..]
            .iter()
            .map(|s| s.parse().map_err(|_| self.err("malformed count")))
            .collect()
    }

    fn record(&mut self, ints: usize) -> Result<(Vec<usize>, f64)> {
        let f = self.next_fields()?;
        if f.len() != ints + 1 {
            return Err(self.err("wrong field count"));
        }
        let idx = f[..ints]
            .iter()
            .map(|s| s.parse().map_err(|_| self.err("malformed index")))
            .collect::<Result<Vec<usize>>>()?;
        let v = f[ints].parse().map_err(|_| self.err("malformed value"))?;
        Ok((idx, v))
    }
}

pub fn read_conic_program(text: &str) -> Result<ConicProgram> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let version = lines.header("CONIC", 1)?;
    if version[0] != 1 {
        return Err(lines.err("unsupported version"));
    }
    let num_vars = lines.header("VARS", 1)?[0];
    let obj_nnz = lines.header("OBJ", 1)?[0];
    let mut objective = LinearForm::new();
    for _ in 0..obj_nnz {
        let (i, c) = lines.record(1)?;
        objective.push(i[0], c);
    }
    let eq = lines.header("EQ", 2)?;
    let mut forms = vec![LinearForm::new(); eq[0]];
    for _ in 0..eq[1] {
        let (i, c) = lines.record(2)?;
        forms
            .get_mut(i[0])
            .ok_or_else(|| lines.err("row out of range"))?
            .push(i[1], c);
    }
    lines.header("RHS", 0)?;
    let mut rhs = vec![0.0; eq[0]];
    for _ in 0..eq[0] {
        let (i, b) = lines.record(1)?;
        *rhs.get_mut(i[0]).ok_or_else(|| lines.err("row out of range"))? = b;
    }
    let blocks = lines.header("PSD", 1)?[0];
    let mut psd_blocks = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let h = lines.header("BLOCK", 3)?;
        let side = h[1];
        let mut entries = vec![LinearForm::new(); side * side];
        for _ in 0..h[2] {
            let (i, c) = lines.record(3)?;
            let (r, col) = (i[0], i[1]);
            if r >= side || col >= side || r > col {
                return Err(lines.err("block entry out of range"));
            }
            entries[r * side + col].push(i[2], c);
        }
        psd_blocks.push(StructuredMatrix::from_fn(side, |r, c| {
            entries[r * side + c].clone()
        }));
    }
    lines.header("END", 0)?;
    let prog = ConicProgram {
        num_vars,
        objective,
        psd_blocks,
        equalities: forms.into_iter().zip(rhs).collect(),
    };
    prog.check()?;
    Ok(prog)
}
