//! `series.csv` and the per-run output directory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::observables::ProcessRecord;

use super::run::RunResult;

pub const SERIES_HEADER: &str = "t,U,q,S,Sdot,relS,work,G,D_probe";

/// One CSV row; 17 significant digits so values round-trip.
pub fn format_row(r: &ProcessRecord) -> String {
    [r.t, r.u, r.q, r.s, r.sdot, r.rel_s, r.work, r.g, r.d_probe]
        .iter()
        .map(|x| format!("{x:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_series<W: Write>(out: &mut W, records: &[ProcessRecord]) -> Result<()> {
    writeln!(out, "{SERIES_HEADER}")?;
    for r in records {
        writeln!(out, "{}", format_row(r))?;
    }
    Ok(())
}

pub fn write_series_file<P: AsRef<Path>>(path: P, records: &[ProcessRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_series(&mut out, records)?;
    out.flush()?;
    Ok(())
}

/// Reads back the CSV columns (the remaining record fields stay zero).
pub fn read_series<P: AsRef<Path>>(path: P) -> Result<Vec<ProcessRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(SERIES_HEADER) {
        return Err(Error::Config("series header missing".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.parse::<f64>().map_err(|e| Error::Config(format!("row {}: {e}", i + 1))))
            .collect::<Result<_>>()?;
        if v.len() != 9 {
            return Err(Error::Config(format!("row {} has {} columns", i + 1, v.len())));
        }
        out.push(ProcessRecord {
            t: v[0],
            u: v[1],
            q: v[2],
            s: v[3],
            sdot: v[4],
            rel_s: v[5],
            work: v[6],
            g: v[7],
            d_probe: v[8],
            ..Default::default()
        });
    }
    Ok(out)
}

/// Writes `series.csv`, `manifest.json` and, when present,
/// `series_quadratic.csv` and `state.bin` into `dir`.
pub fn write_run<P: AsRef<Path>>(result: &RunResult, dir: P) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let series = dir.join("series.csv");
    write_series_file(&series, &result.records)?;
    written.push(series);
    if let Some(q) = &result.comparison {
        let path = dir.join("series_quadratic.csv");
        write_series_file(&path, q)?;
        written.push(path);
    }
    if let (true, Some(rho)) = (result.manifest.config.output.checkpoint, &result.final_state) {
        let path = dir.join("state.bin");
        rho.write_checkpoint(&path)?;
        written.push(path);
    }
    let manifest = dir.join("manifest.json");
    result.manifest.write(&manifest)?;
    written.push(manifest);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_exactly() {
        let recs = vec![
            ProcessRecord {
                t: 0.1,
                u: -3.0 / 7.0,
                q: 2.0,
                s: 1e-300,
                sdot: -0.0,
                rel_s: f64::MIN_POSITIVE,
                work: 1.0 / 3.0,
                g: -12345.678,
                d_probe: 0.0,
                ..Default::default()
            };
            2
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_series_file(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,U,q,S,Sdot,relS,work,G,D_probe\n"));
        assert_eq!(read_series(&path).unwrap(), recs);
    }
}
