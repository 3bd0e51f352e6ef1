//! Line-oriented text formats for states, film schedules, detector scans and
//! coincidence-count tables.
//!
//! All formats ignore blank lines and `#` comments. Floats are written with
//! Rust's shortest round-trip representation, so parse ∘ write is lossless.
//!
//! State file:
//! ```text
//! state pure <dim_s> <dim_i>        | state density <dim>
//! <row> <col> <re> <im>             (one line per entry; missing entries are 0)
//! ```
//! Schedule file:
//! ```text
//! film <d> <n_frames>
//! <operator> <phase_0> … <phase_{d-1}>   (one line per frame)
//! ```
//! Scan file:
//! ```text
//! scan
//! <geometry key> <value>            (wavelength_mm, half_slit_width_mm, …; optional)
//! fixed_arm signal|idler
//! fixed_position_mm <x>
//! p_true <p>                        (optional)
//! data
//! <position_mm> <counts>
//! ```
//! Counts file: one or more blocks of
//! ```text
//! gamma_t <value>
//! reported <concurrence> <error>    (optional)
//! <n00> <n01> <n02>
//! <n10> <n11> <n12>
//! <n20> <n21> <n22>
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::CountsTable;
use crate::film::{mask_phases, FilmSchedule};
use crate::optics::{OpticalGeometry, PatternScan};
use crate::state::{CMatrix, DensityMatrix, PureBipartiteState, Subsystem, C64};

/// Largest dimension accepted from a state file.
pub const MAX_STATE_DIM: usize = 64;
/// Largest frame count accepted from a schedule file.
pub const MAX_FRAMES: usize = 1 << 16;

const PHASE_TOL: f64 = 1e-9;

/// Content of a state file.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFile {
    Pure(PureBipartiteState),
    Density(DensityMatrix),
}

/// One labeled block of a counts file.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsBlock {
    pub table: CountsTable,
    /// Published concurrence and its error, when known.
    pub reported: Option<(f64, f64)>,
}

/// Formats `x` for output, mapping `-0` to `0`.
pub fn fmt_f64(x: f64) -> String {
    format!("{}", if x == 0.0 { 0.0 } else { x })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-empty line with comments stripped, as `(line_number, tokens)`.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }
}

fn parse_num<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

fn parse_float(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = parse_num(tok, line, what)?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn expect_len(tokens: &[&str], n: usize, line: usize) -> Result<()> {
    if tokens.len() != n {
        return Err(Error::parse(
            line,
            format!("expected {n} fields, found {}", tokens.len()),
        ));
    }
    Ok(())
}

fn parse_dim(tok: &str, line: usize) -> Result<usize> {
    let d: usize = parse_num(tok, line, "dimension")?;
    if d == 0 || d > MAX_STATE_DIM {
        return Err(Error::parse(
            line,
            format!("dimension {d} outside 1..={MAX_STATE_DIM}"),
        ));
    }
    Ok(d)
}

pub fn parse_state(text: &str) -> Result<StateFile> {
    let mut lines = Lines::new(text);
    let (hl, header) = lines
        .next_tokens()
        .ok_or_else(|| Error::parse(0, "empty state file"))?;
    if header[0] != "state" || header.len() < 2 {
        return Err(Error::parse(
            hl,
            "expected 'state pure <dim_s> <dim_i>' or 'state density <dim>'",
        ));
    }
    let (rows, cols, pure) = match header[1] {
        "pure" => {
            expect_len(&header, 4, hl)?;
            (parse_dim(header[2], hl)?, parse_dim(header[3], hl)?, true)
        }
        "density" => {
            expect_len(&header, 3, hl)?;
            let d = parse_dim(header[2], hl)?;
            (d, d, false)
        }
        other => return Err(Error::parse(hl, format!("unknown state kind '{other}'"))),
    };
    let mut m = CMatrix::zeros(rows, cols);
    let mut seen = HashSet::new();
    while let Some((ln, tok)) = lines.next_tokens() {
        expect_len(&tok, 4, ln)?;
        let r: usize = parse_num(tok[0], ln, "row")?;
        let c: usize = parse_num(tok[1], ln, "column")?;
        if r >= rows || c >= cols {
            return Err(Error::parse(
                ln,
                format!("entry ({r}, {c}) outside {rows}x{cols}"),
            ));
        }
        if !seen.insert((r, c)) {
            return Err(Error::parse(ln, format!("duplicate entry ({r}, {c})")));
        }
        m[(r, c)] = C64::new(
            parse_float(tok[2], ln, "real part")?,
            parse_float(tok[3], ln, "imaginary part")?,
        );
    }
    if pure {
        Ok(StateFile::Pure(PureBipartiteState::new(m)?))
    } else {
        Ok(StateFile::Density(DensityMatrix::new(m)?))
    }
}

fn write_entries(out: &mut String, m: &CMatrix) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            let _ = writeln!(out, "{r} {c} {} {}", fmt_f64(z.re), fmt_f64(z.im));
        }
    }
}

pub fn write_state(state: &StateFile) -> String {
    let mut out = String::new();
    match state {
        StateFile::Pure(psi) => {
            let _ = writeln!(out, "state pure {} {}", psi.dim_s(), psi.dim_i());
            write_entries(&mut out, psi.amplitudes());
        }
        StateFile::Density(rho) => {
            let _ = writeln!(out, "state density {}", rho.dim());
            write_entries(&mut out, rho.matrix());
        }
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<FilmSchedule> {
    let mut lines = Lines::new(text);
    let (hl, header) = lines
        .next_tokens()
        .ok_or_else(|| Error::parse(0, "empty schedule file"))?;
    if header[0] != "film" {
        return Err(Error::parse(hl, "expected 'film <d> <n_frames>'"));
    }
    expect_len(&header, 3, hl)?;
    let d = parse_dim(header[1], hl)?;
    if d < 2 {
        return Err(Error::parse(hl, "film needs d >= 2"));
    }
    let n: usize = parse_num(header[2], hl, "frame count")?;
    if n == 0 || n > MAX_FRAMES {
        return Err(Error::parse(
            hl,
            format!("frame count {n} outside 1..={MAX_FRAMES}"),
        ));
    }
    let mut frames = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    while let Some((ln, tok)) = lines.next_tokens() {
        expect_len(&tok, d + 1, ln)?;
        if frames.len() == n {
            return Err(Error::parse(ln, format!("more than {n} frames")));
        }
        let op: usize = parse_num(tok[0], ln, "operator index")?;
        if op > d {
            return Err(Error::parse(ln, format!("operator index {op} > {d}")));
        }
        let ph = tok[1..]
            .iter()
            .map(|t| parse_float(t, ln, "phase"))
            .collect::<Result<Vec<f64>>>()?;
        frames.push(op);
        phases.push((ln, ph));
    }
    if frames.len() != n {
        return Err(Error::parse(
            0,
            format!("expected {n} frames, found {}", frames.len()),
        ));
    }
    let film = FilmSchedule::new(d, frames)?;
    for (i, (ln, ph)) in phases.iter().enumerate() {
        let expected = mask_phases(&film, i)?;
        if ph.iter().zip(&expected).any(|(a, b)| (a - b).abs() > PHASE_TOL) {
            return Err(Error::parse(*ln, "phases do not match the operator's mask"));
        }
    }
    Ok(film)
}

pub fn write_schedule(film: &FilmSchedule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "film {} {}", film.d(), film.n_frames());
    for (i, op) in film.frames().iter().enumerate() {
        let phases = mask_phases(film, i).expect("index in range");
        let ph: Vec<String> = phases.iter().map(|&p| fmt_f64(p)).collect();
        let _ = writeln!(out, "{op} {}", ph.join(" "));
    }
    out
}

fn arm_name(arm: Subsystem) -> &'static str {
    match arm {
        Subsystem::Signal => "signal",
        Subsystem::Idler => "idler",
    }
}

pub fn parse_scan(text: &str) -> Result<(OpticalGeometry, PatternScan)> {
    let mut lines = Lines::new(text);
    let (hl, header) = lines
        .next_tokens()
        .ok_or_else(|| Error::parse(0, "empty scan file"))?;
    if header != ["scan"] {
        return Err(Error::parse(hl, "expected 'scan'"));
    }
    let mut geom = OpticalGeometry::default();
    let mut arm = None;
    let mut position = None;
    let mut p_true = None;
    let mut in_data = false;
    let mut samples = Vec::new();
    while let Some((ln, tok)) = lines.next_tokens() {
        if in_data {
            expect_len(&tok, 2, ln)?;
            let x = parse_float(tok[0], ln, "position")?;
            let n = parse_float(tok[1], ln, "counts")?;
            if n < 0.0 {
                return Err(Error::parse(ln, "counts must be non-negative"));
            }
            samples.push((x, n));
            continue;
        }
        if tok == ["data"] {
            in_data = true;
            continue;
        }
        expect_len(&tok, 2, ln)?;
        let (key, val) = (tok[0], tok[1]);
        match key {
            "fixed_arm" => {
                arm = Some(match val {
                    "signal" => Subsystem::Signal,
                    "idler" => Subsystem::Idler,
                    other => return Err(Error::parse(ln, format!("unknown arm '{other}'"))),
                })
            }
            "fixed_position_mm" => position = Some(parse_float(val, ln, key)?),
            "p_true" => p_true = Some(parse_float(val, ln, key)?),
            "wavelength_mm" => geom.wavelength = parse_float(val, ln, key)?,
            "half_slit_width_mm" => geom.half_slit_width = parse_float(val, ln, key)?,
            "slit_separation_mm" => geom.slit_separation = parse_float(val, ln, key)?,
            "focal_length_mm" => geom.focal_length = parse_float(val, ln, key)?,
            "half_detector_width_mm" => geom.half_detector_width = parse_float(val, ln, key)?,
            "beta" => geom.beta = parse_float(val, ln, key)?,
            other => return Err(Error::parse(ln, format!("unknown key '{other}'"))),
        }
    }
    geom.validate()?;
    let fixed_arm = arm.ok_or_else(|| Error::parse(0, "missing fixed_arm"))?;
    let fixed_position = position.ok_or_else(|| Error::parse(0, "missing fixed_position_mm"))?;
    if !in_data {
        return Err(Error::parse(0, "missing data section"));
    }
    Ok((
        geom,
        PatternScan {
            fixed_arm,
            fixed_position,
            samples,
            p_true,
        },
    ))
}

pub fn write_scan(geom: &OpticalGeometry, scan: &PatternScan) -> String {
    let mut out = String::from("scan\n");
    let _ = writeln!(out, "wavelength_mm {}", fmt_f64(geom.wavelength));
    let _ = writeln!(out, "half_slit_width_mm {}", fmt_f64(geom.half_slit_width));
    let _ = writeln!(out, "slit_separation_mm {}", fmt_f64(geom.slit_separation));
    let _ = writeln!(out, "focal_length_mm {}", fmt_f64(geom.focal_length));
    let _ = writeln!(
        out,
        "half_detector_width_mm {}",
        fmt_f64(geom.half_detector_width)
    );
    let _ = writeln!(out, "beta {}", fmt_f64(geom.beta));
    let _ = writeln!(out, "fixed_arm {}", arm_name(scan.fixed_arm));
    let _ = writeln!(out, "fixed_position_mm {}", fmt_f64(scan.fixed_position));
    if let Some(p) = scan.p_true {
        let _ = writeln!(out, "p_true {}", fmt_f64(p));
    }
    out.push_str("data\n");
    for (x, n) in &scan.samples {
        let _ = writeln!(out, "{} {}", fmt_f64(*x), fmt_f64(*n));
    }
    out
}

pub fn parse_counts(text: &str) -> Result<Vec<CountsBlock>> {
    let mut lines = Lines::new(text);
    let mut blocks = Vec::new();
    let mut pending = lines.next_tokens();
    while let Some((ln, tok)) = pending {
        if tok[0] != "gamma_t" {
            return Err(Error::parse(ln, "expected 'gamma_t <value>'"));
        }
        expect_len(&tok, 2, ln)?;
        let gamma_t = parse_float(tok[1], ln, "gamma_t")?;
        let mut next = lines.next_tokens();
        let mut reported = None;
        if let Some((rl, rt)) = &next {
            if rt[0] == "reported" {
                expect_len(rt, 3, *rl)?;
                reported = Some((
                    parse_float(rt[1], *rl, "concurrence")?,
                    parse_float(rt[2], *rl, "error")?,
                ));
                next = lines.next_tokens();
            }
        }
        let mut counts = [[0u64; 3]; 3];
        for row in counts.iter_mut() {
            let (rl, rt) = next.ok_or_else(|| Error::parse(ln, "block ends before three count rows"))?;
            expect_len(&rt, 3, rl)?;
            for (slot, t) in row.iter_mut().zip(&rt) {
                *slot = parse_num(t, rl, "count")?;
            }
            next = lines.next_tokens();
        }
        let table = CountsTable::new(gamma_t, counts).map_err(|e| Error::parse(ln, e.to_string()))?;
        blocks.push(CountsBlock { table, reported });
        pending = next;
    }
    if blocks.is_empty() {
        return Err(Error::parse(0, "counts file has no blocks"));
    }
    Ok(blocks)
}

pub fn write_counts(blocks: &[CountsBlock]) -> String {
    let mut out = String::new();
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "gamma_t {}", fmt_f64(b.table.gamma_t));
        if let Some((c, e)) = b.reported {
            let _ = writeln!(out, "reported {} {}", fmt_f64(c), fmt_f64(e));
        }
        for row in b.table.counts() {
            let _ = writeln!(out, "{} {} {}", row[0], row[1], row[2]);
        }
    }
    out
}
