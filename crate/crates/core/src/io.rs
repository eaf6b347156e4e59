//! File formats: run configuration, diagnostics table, EHD2 snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::analysis::DiagnosticsRecord;
use crate::error::{EhdError, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::sim::{Preset, SimConfig};

pub const CONFIG_KEYS: [&str; 14] = [
    "nx",
    "ny",
    "lx",
    "ly",
    "dt",
    "t_end",
    "theta",
    "mode",
    "preset",
    "poisson_tol",
    "transport_tol",
    "fluid_tol",
    "output_every",
    "seed",
];

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| EhdError::config(key, Some(line), format!("cannot parse `{raw}`: {e}")))
}

/// Parses the flat `key = value` configuration format. Later validation
/// errors still name the key and the line it was set on.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            EhdError::config(
                line.split_whitespace().next().unwrap_or(""),
                Some(line_no),
                "expected `key = value`",
            )
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) && !key.starts_with("preset.") {
            return Err(EhdError::config(key, Some(line_no), "unknown key"));
        }
        if value.is_empty() {
            return Err(EhdError::config(key, Some(line_no), "missing value"));
        }
        if let Some((_, first)) = entries.get(key) {
            return Err(EhdError::config(
                key,
                Some(line_no),
                format!("duplicate key (first set on line {first})"),
            ));
        }
        entries.insert(key.to_string(), (value.to_string(), line_no));
    }

    let line_of = |k: &str| entries.get(k).map(|(_, l)| *l);
    let get_f = |k: &str, default: f64| -> Result<f64> {
        match entries.get(k) {
            Some((v, l)) => parse_num::<f64>(k, *l, v),
            None => Ok(default),
        }
    };
    let get_u = |k: &str, default: u64| -> Result<u64> {
        match entries.get(k) {
            Some((v, l)) => parse_num::<u64>(k, *l, v),
            None => Ok(default),
        }
    };

    let nx = get_u("nx", 64)? as usize;
    let ny = get_u("ny", 64)? as usize;
    let lx = get_f("lx", 1.0)?;
    let ly = get_f("ly", 1.0)?;
    let grid = GridSpec::new(nx, ny, lx, ly).map_err(|e| {
        let key = if nx < 3 {
            "nx"
        } else if ny < 3 {
            "ny"
        } else if !(lx > 0.0 && lx.is_finite()) {
            "lx"
        } else {
            "ly"
        };
        EhdError::config(key, line_of(key), e.to_string())
    })?;

    let preset_name = entries
        .get("preset")
        .map(|(v, _)| v.as_str())
        .unwrap_or("two-blobs");
    let mut preset = Preset::by_name(preset_name).ok_or_else(|| {
        EhdError::config(
            "preset",
            line_of("preset"),
            format!(
                "unknown preset `{preset_name}` (known: {})",
                Preset::NAMES.join(", ")
            ),
        )
    })?;
    for (k, (v, l)) in entries.iter().filter(|(k, _)| k.starts_with("preset.")) {
        let value = parse_num::<f64>(k, *l, v)?;
        preset
            .set_param(&k["preset.".len()..], value)
            .map_err(|m| EhdError::config(k.as_str(), Some(*l), m))?;
    }

    let mut cfg = SimConfig::new(grid, preset);
    cfg.dt = get_f("dt", cfg.dt)?;
    cfg.t_end = get_f("t_end", cfg.t_end)?;
    cfg.theta = get_f("theta", cfg.theta)?;
    cfg.poisson_tol = get_f("poisson_tol", cfg.poisson_tol)?;
    cfg.transport_tol = get_f("transport_tol", cfg.transport_tol)?;
    cfg.fluid_tol = get_f("fluid_tol", cfg.fluid_tol)?;
    cfg.output_every = get_u("output_every", cfg.output_every)?;
    cfg.seed = get_u("seed", cfg.seed)?;
    if let Some((v, l)) = entries.get("mode") {
        cfg.mode = v
            .parse()
            .map_err(|m: String| EhdError::config("mode", Some(*l), m))?;
    }
    cfg.validate().map_err(|e| match e {
        EhdError::Config { key, message, .. } => {
            let line = line_of(&key);
            EhdError::Config { key, line, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| EhdError::io(path, e))?;
    parse_config(&text)
}

/// Serializes a configuration in the format [`parse_config`] reads.
pub fn config_to_string(cfg: &SimConfig) -> String {
    let g = cfg.grid;
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    put("nx", g.nx().to_string());
    put("ny", g.ny().to_string());
    put("lx", format!("{:?}", g.lx()));
    put("ly", format!("{:?}", g.ly()));
    put("dt", format!("{:?}", cfg.dt));
    put("t_end", format!("{:?}", cfg.t_end));
    put("theta", format!("{:?}", cfg.theta));
    put("mode", cfg.mode.name().to_string());
    put("preset", cfg.preset.name().to_string());
    for (k, v) in cfg.preset.params() {
        put(&format!("preset.{k}"), format!("{v:?}"));
    }
    put("poisson_tol", format!("{:?}", cfg.poisson_tol));
    put("transport_tol", format!("{:?}", cfg.transport_tol));
    put("fluid_tol", format!("{:?}", cfg.fluid_tol));
    put("output_every", cfg.output_every.to_string());
    put("seed", cfg.seed.to_string());
    s
}

/// Streaming writer for the diagnostics table. Every row is flushed as a
/// whole, so an aborted run leaves only complete rows.
pub struct DiagnosticsWriter {
    out: BufWriter<fs::File>,
    path: String,
    last_step: Option<u64>,
}

pub fn format_row(r: &DiagnosticsRecord) -> String {
    let mut row = r.step.to_string();
    for v in r.reals() {
        row.push(',');
        row.push_str(&format!("{v:.16e}"));
    }
    row
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| EhdError::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.display().to_string(),
            last_step: None,
        };
        let header = DiagnosticsRecord::FIELDS.join(",");
        w.write_line(&header)?;
        Ok(w)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        let p = self.path.clone();
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| EhdError::io(p, e))
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        if let Some(last) = self.last_step {
            if r.step <= last {
                return Err(EhdError::Invariant(format!(
                    "diagnostics step {} does not follow {last}",
                    r.step
                )));
            }
        }
        self.last_step = Some(r.step);
        self.write_line(&format_row(r))
    }
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = DiagnosticsWriter::create(path)?;
    records.iter().try_for_each(|r| w.write(r))
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let fmt = |line: usize, m: String| EhdError::Format {
        what: "diagnostics table".into(),
        message: format!("line {line}: {m}"),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fmt(1, "empty file".into()))?;
    if header.trim() != DiagnosticsRecord::FIELDS.join(",") {
        return Err(fmt(1, format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != DiagnosticsRecord::FIELDS.len() {
            return Err(fmt(
                n,
                format!(
                    "expected {} columns, found {}",
                    DiagnosticsRecord::FIELDS.len(),
                    cols.len()
                ),
            ));
        }
        let step = cols[0]
            .parse::<u64>()
            .map_err(|e| fmt(n, format!("step: {e}")))?;
        let mut reals = [0.0; 13];
        for (k, c) in cols[1..].iter().enumerate() {
            reals[k] = c
                .parse::<f64>()
                .map_err(|e| fmt(n, format!("{}: {e}", DiagnosticsRecord::FIELDS[k + 1])))?;
        }
        out.push(DiagnosticsRecord::from_reals(step, reals));
    }
    Ok(out)
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| EhdError::io(path, e))?;
    parse_diagnostics(&text)
}

/// A field read back from an EHD2 snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub time: f64,
    pub field: ScalarField,
}

pub fn write_snapshot(path: &Path, name: &str, field: &ScalarField, time: f64) -> Result<()> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(EhdError::Contract(format!(
            "invalid snapshot field name `{name}`"
        )));
    }
    let g = field.grid();
    let file = fs::File::create(path).map_err(|e| EhdError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        writeln!(
            w,
            "EHD2 {name} {} {} {:?} {:?} {time:?}",
            g.nx(),
            g.ny(),
            g.lx(),
            g.ly()
        )?;
        for v in field.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| EhdError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bad = |m: String| EhdError::Format {
        what: format!("snapshot {}", path.display()),
        message: m,
    };
    let file = fs::File::open(path).map_err(|e| EhdError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)
        .map_err(|e| EhdError::io(path, e))?;
    let header = String::from_utf8(header).map_err(|_| bad("header is not text".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 7 || parts[0] != "EHD2" {
        return Err(bad(format!("bad header `{}`", header.trim_end())));
    }
    let nx: usize = parts[2].parse().map_err(|_| bad("bad nx".into()))?;
    let ny: usize = parts[3].parse().map_err(|_| bad("bad ny".into()))?;
    let lx: f64 = parts[4].parse().map_err(|_| bad("bad lx".into()))?;
    let ly: f64 = parts[5].parse().map_err(|_| bad("bad ly".into()))?;
    let time: f64 = parts[6].parse().map_err(|_| bad("bad time".into()))?;
    let grid = GridSpec::new(nx, ny, lx, ly).map_err(|e| bad(e.to_string()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| EhdError::io(path, e))?;
    if bytes.len() != 8 * nx * ny {
        return Err(bad(format!(
            "expected {} data bytes, found {}",
            8 * nx * ny,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = ScalarField::from_values(grid, values).map_err(|e| bad(e.to_string()))?;
    Ok(Snapshot {
        name: parts[1].to_string(),
        time,
        field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let c = parse_config("nx = 16\nny = 12 # comment\n\n# full line\nlx = 2.0\nmode = debye\npreset = two-blobs\npreset.mu_v = 3\n").unwrap();
        assert_eq!(c.grid.nx(), 16);
        assert_eq!(c.grid.ny(), 12);
        assert_eq!(c.grid.lx(), 2.0);
        assert_eq!(c.mode, crate::sim::Mode::Debye);
        assert!(c.preset.params().contains(&("mu_v", 3.0)));
    }

    #[test]
    fn config_errors_name_key_and_line() {
        let e = parse_config("nx = 8\ndt = -1\n").unwrap_err();
        match e {
            EhdError::Config { key, line, .. } => {
                assert_eq!(key, "dt");
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
        for (text, key) in [
            ("bogus = 1", "bogus"),
            ("nx = eight", "nx"),
            ("nx = 2", "nx"),
            ("preset = spiral", "preset"),
            ("preset = neutral-rest\npreset.sigma = 1", "preset.sigma"),
            ("mode = turbulent", "mode"),
            ("dt = 1\ndt = 2", "dt"),
            ("output_every = 0", "output_every"),
        ] {
            match parse_config(text).unwrap_err() {
                EhdError::Config { key: k, line, .. } => {
                    assert_eq!(k, key, "{text}");
                    assert!(line.is_some(), "{text}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn config_round_trips() {
        let c = parse_config(
            "nx = 10\nny = 9\nly = 0.7\npreset = sheared-blobs\npreset.amplitude = 0.3\nseed = 5\n",
        )
        .unwrap();
        let again = parse_config(&config_to_string(&c)).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn diagnostics_round_trip_bitwise() {
        let recs: Vec<_> = (0..5)
            .map(|k| {
                let mut r = [0.0; 13];
                for (i, x) in r.iter_mut().enumerate() {
                    *x = (k as f64 + 1.0) * std::f64::consts::PI.powi(i as i32) * 1e-7 / 3.0;
                }
                DiagnosticsRecord::from_reals(k * 10, r)
            })
            .collect();
        let text: String = std::iter::once(DiagnosticsRecord::FIELDS.join(","))
            .chain(recs.iter().map(format_row))
            .map(|l| l + "\n")
            .collect();
        assert_eq!(parse_diagnostics(&text).unwrap(), recs);
        assert!(parse_diagnostics("a,b\n").is_err());
    }
}
