//! Text formats: the SoC description file and the coverage-curve CSV.
//!
//! SoC file, one statement per line, `#` starts a comment:
//!
//! ```text
//! soc five_core
//! pmax 300
//! tam_width 32
//! ate_freq_mhz 100
//! core 1 pm 100 tvd 300 tvp 200
//! core 2 pm 200 tvd 400 tvp 500 fb 50 acb 2 pis 12 ppis 40
//! ```
//!
//! Optional core keys are `fb`, `acb`, `fe`, `ace`, `pis` and `ppis`. Both
//! clocks default to `ate_freq_mhz`, `acb` to 1 and `ace` to `pis + ppis`
//! (at least 1).

use std::collections::HashMap;

use thiserror::Error;

use crate::core_model::{CoreId, CoreSpec, ModelError, SocSpec};
use crate::hybrid_testgen::{CurveOracle, CurveRow, TatCurvePoint, TestgenError};
use crate::units::{DecimalError, Mhz, Micros, Power};

pub const CURVE_HEADER: &str = "n_prtp,n_dtp_phase1,n_dtp_phase2";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SocIoError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: `{key}`: {source}")]
    Number { line: usize, key: String, source: DecimalError },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
    #[error("line {line}: {msg}")]
    MonotonicityViolation { line: usize, msg: String },
}

impl SocIoError {
    pub fn line(&self) -> usize {
        match self {
            Self::Syntax { line, .. }
            | Self::Number { line, .. }
            | Self::Model { line, .. }
            | Self::MonotonicityViolation { line, .. } => *line,
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> SocIoError {
    SocIoError::Syntax { line, msg: msg.into() }
}

fn centi(line: usize, key: &str, text: &str) -> Result<i64, SocIoError> {
    crate::units::parse_centi(text).map_err(|source| SocIoError::Number { line, key: key.into(), source })
}

fn integer<T: std::str::FromStr>(line: usize, key: &str, text: &str) -> Result<T, SocIoError> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(syntax(line, format!("`{key}` expects a non-negative integer, got `{text}`")));
    }
    text.parse().map_err(|_| syntax(line, format!("`{key}` value `{text}` is out of range")))
}

#[derive(Default)]
struct CoreLine {
    line: usize,
    id: CoreId,
    pm: i64,
    tvd: i64,
    tvp: i64,
    fb: Option<i64>,
    acb: Option<u64>,
    fe: Option<i64>,
    ace: Option<u64>,
    pis: u32,
    ppis: u32,
}

fn parse_core(line: usize, words: &[&str]) -> Result<CoreLine, SocIoError> {
    let Some(id) = words.first() else {
        return Err(syntax(line, "`core` needs an id"));
    };
    let mut c = CoreLine { line, id: integer(line, "core", id)?, ..Default::default() };
    let rest = &words[1..];
    if !rest.len().is_multiple_of(2) {
        return Err(syntax(line, format!("key `{}` has no value", rest[rest.len() - 1])));
    }
    let mut seen: Vec<&str> = Vec::new();
    for kv in rest.chunks(2) {
        let (key, val) = (kv[0], kv[1]);
        if seen.contains(&key) {
            return Err(syntax(line, format!("key `{key}` given twice")));
        }
        seen.push(key);
        match key {
            "pm" => c.pm = centi(line, key, val)?,
            "tvd" => c.tvd = centi(line, key, val)?,
            "tvp" => c.tvp = centi(line, key, val)?,
            "fb" => c.fb = Some(centi(line, key, val)?),
            "fe" => c.fe = Some(centi(line, key, val)?),
            "acb" => c.acb = Some(integer(line, key, val)?),
            "ace" => c.ace = Some(integer(line, key, val)?),
            "pis" => c.pis = integer(line, key, val)?,
            "ppis" => c.ppis = integer(line, key, val)?,
            _ => return Err(syntax(line, format!("unknown core key `{key}`"))),
        }
    }
    for required in ["pm", "tvd", "tvp"] {
        if !seen.contains(&required) {
            return Err(syntax(line, format!("core {} is missing `{required}`", c.id)));
        }
    }
    Ok(c)
}

/// Parses and validates an SoC description.
pub fn parse_soc(text: &str) -> Result<SocSpec, SocIoError> {
    parse_soc_with(text, None)
}

/// Like [`parse_soc`], with the file's `pmax` replaced before validation.
pub fn parse_soc_with(text: &str, pmax_override: Option<Power>) -> Result<SocSpec, SocIoError> {
    let mut name = None;
    let mut pmax = None;
    let mut tam_width = None;
    let mut ate = None;
    let mut cores = Vec::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some((&head, args)) = words.split_first() else {
            continue;
        };
        let single = |what: &str| -> Result<&str, SocIoError> {
            match args {
                [v] => Ok(*v),
                _ => Err(syntax(line, format!("`{what}` takes exactly one value"))),
            }
        };
        let once = |slot_filled: bool| {
            if slot_filled {
                Err(syntax(line, format!("`{head}` given twice")))
            } else {
                Ok(())
            }
        };
        match head {
            "soc" => {
                once(name.is_some())?;
                name = Some(single("soc")?.to_string());
            }
            "pmax" => {
                once(pmax.is_some())?;
                pmax = Some((line, centi(line, head, single(head)?)?));
            }
            "tam_width" => {
                once(tam_width.is_some())?;
                tam_width = Some(integer::<u32>(line, head, single(head)?)?);
            }
            "ate_freq_mhz" => {
                once(ate.is_some())?;
                ate = Some(centi(line, head, single(head)?)?);
            }
            "core" => cores.push(parse_core(line, args)?),
            _ => return Err(syntax(line, format!("unknown statement `{head}`"))),
        }
    }

    let eof = last_line + 1;
    let (pmax_line, pmax) = match (pmax_override, pmax) {
        (Some(p), Some((l, _))) => (l, p),
        (Some(p), None) => (eof, p),
        (None, Some((l, v))) => (l, Power::from_centi(v)),
        (None, None) => return Err(syntax(eof, "missing `pmax`")),
    };
    let ate = Mhz::from_centi(ate.unwrap_or(100 * 100));
    let line_of: HashMap<CoreId, usize> = cores.iter().map(|c| (c.id, c.line)).collect();
    let mut seen = HashMap::new();
    for c in &cores {
        if seen.insert(c.id, c.line).is_some() {
            return Err(SocIoError::Model { line: c.line, source: ModelError::DuplicateCoreId(c.id) });
        }
    }

    let specs = cores
        .iter()
        .map(|c| CoreSpec {
            id: c.id,
            p_m: Power::from_centi(c.pm),
            t_vd: Micros::from_centi(c.tvd),
            t_vp: Micros::from_centi(c.tvp),
            f_b: c.fb.map_or(ate, Mhz::from_centi),
            ac_b: c.acb.unwrap_or(1),
            f_e: c.fe.map_or(ate, Mhz::from_centi),
            ac_e: c.ace.unwrap_or((u64::from(c.pis) + u64::from(c.ppis)).max(1)),
            pis: c.pis,
            ppis: c.ppis,
        })
        .collect();

    SocSpec::new(name.unwrap_or_else(|| "soc".into()), specs, pmax, tam_width.unwrap_or(0), ate).map_err(|source| {
        let line = match &source {
            ModelError::InfeasibleCore { id, .. } | ModelError::InvalidCore { id, .. } => line_of[id],
            ModelError::DuplicateCoreId(id) => line_of[id],
            ModelError::NonPositiveBudget => pmax_line,
            _ => eof,
        };
        SocIoError::Model { line, source }
    })
}

/// Writes every key explicitly, so parsing the output gives back `soc`.
pub fn serialize_soc(soc: &SocSpec) -> String {
    let mut out = format!(
        "soc {}\npmax {}\ntam_width {}\nate_freq_mhz {}\n",
        soc.name, soc.p_max, soc.tam_width, soc.ate_freq_mhz
    );
    for c in &soc.cores {
        out += &format!(
            "core {} pm {} tvd {} tvp {} fb {} acb {} fe {} ace {} pis {} ppis {}\n",
            c.id, c.p_m, c.t_vd, c.t_vp, c.f_b, c.ac_b, c.f_e, c.ac_e, c.pis, c.ppis
        );
    }
    out
}

/// Parses a coverage-curve CSV into a validated oracle.
pub fn parse_curve(text: &str) -> Result<CurveOracle, SocIoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h == CURVE_HEADER => {}
        Some((line, _)) => return Err(syntax(line, format!("expected header `{CURVE_HEADER}`"))),
        None => return Err(syntax(1, "empty curve file")),
    }
    let mut rows = Vec::new();
    let mut row_lines = Vec::new();
    for (line, l) in lines {
        let cells: Vec<&str> = l.split(',').map(str::trim).collect();
        let [n, p1, p2] = cells[..] else {
            return Err(syntax(line, format!("expected 3 fields, got {}", cells.len())));
        };
        rows.push(CurveRow {
            n_prtp: integer(line, "n_prtp", n)?,
            n_dtp_phase1: integer(line, "n_dtp_phase1", p1)?,
            n_dtp_phase2: integer(line, "n_dtp_phase2", p2)?,
        });
        row_lines.push(line);
    }
    let eof = text.lines().count() + 1;
    CurveOracle::new(rows).map_err(|e| match e {
        TestgenError::MonotonicityViolation { row, msg } => {
            SocIoError::MonotonicityViolation { line: row_lines[row], msg }
        }
        other => syntax(eof, other.to_string()),
    })
}

pub fn serialize_curve(curve: &CurveOracle) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for r in curve.rows() {
        out += &format!("{},{},{}\n", r.n_prtp, r.n_dtp_phase1, r.n_dtp_phase2);
    }
    out
}

/// Curve rows from evaluated TAT points (sorted by PRTP count).
pub fn curve_from_points(points: &[TatCurvePoint]) -> Result<CurveOracle, TestgenError> {
    CurveOracle::new(
        points
            .iter()
            .map(|p| CurveRow {
                n_prtp: p.n_prtp,
                n_dtp_phase1: p.test_set.n_dtp_phase1,
                n_dtp_phase2: p.test_set.n_dtp_phase2,
            })
            .collect(),
    )
}
