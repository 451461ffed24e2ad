//! CSV tables and binary density-matrix dumps.

use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

use crate::fermi_gaussian::PairCovariance;
use crate::{Error, Result, C64};

const DMAT_MAGIC: &[u8; 4] = b"DMAT";

/// Float with 17 significant digits; stable across runs and platforms.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// `index, re, im` rows.
pub fn spectrum_table(values: &[C64]) -> CsvTable {
    let mut t = CsvTable::new(&["index", "re", "im"]);
    for (k, z) in values.iter().enumerate() {
        t.push(vec![k.to_string(), fmt_float(z.re), fmt_float(z.im)]);
    }
    t
}

/// Long-format `t, observable, value` rows.
pub fn trajectory_table(samples: &[(f64, Vec<(String, f64)>)]) -> CsvTable {
    let mut t = CsvTable::new(&["t", "observable", "value"]);
    for (time, obs) in samples {
        for (name, v) in obs {
            t.push(vec![fmt_float(*time), name.clone(), fmt_float(*v)]);
        }
    }
    t
}

/// `i, j, re_normal, im_normal, re_anom, im_anom` rows.
pub fn correlators_table(cov: &PairCovariance) -> CsvTable {
    let mut t = CsvTable::new(&["i", "j", "re_normal", "im_normal", "re_anom", "im_anom"]);
    let n = cov.n_sites();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (cov.normal[[i, j]], cov.anomalous[[i, j]]);
            t.push(vec![i.to_string(), j.to_string(), fmt_float(a.re), fmt_float(a.im), fmt_float(b.re), fmt_float(b.im)]);
        }
    }
    t
}

/// Row-major complex128 matrix after a 16-byte header: `DMAT`, a zero
/// reserved word and the two dimensions as little-endian `u32`.
pub fn write_dmat<W: Write>(mut w: W, rho: &Array2<C64>) -> Result<()> {
    let (r, c) = rho.dim();
    let dims = |x: usize| u32::try_from(x).map_err(|_| Error::InvalidSpec("matrix too large for DMAT".into()));
    w.write_all(DMAT_MAGIC)?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&dims(r)?.to_le_bytes())?;
    w.write_all(&dims(c)?.to_le_bytes())?;
    for z in rho.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dmat<R: Read>(mut r: R) -> Result<Array2<C64>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..4] != DMAT_MAGIC {
        return Err(Error::Parse { line: 0, msg: "missing DMAT magic".into() });
    }
    let word = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(8), word(12));
    let mut buf = vec![0u8; rows * cols * 16];
    r.read_exact(&mut buf)?;
    let data: Vec<C64> = buf
        .chunks_exact(16)
        .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for &x in &[1.0 / 3.0, -2.5e-17, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.0), "0");
    }

    #[test]
    fn empty_spectrum_is_header_only() {
        assert_eq!(spectrum_table(&[]).render(), "index,re,im\n");
    }

    #[test]
    fn dmat_round_trip() {
        let rho = Array2::from_shape_fn((3, 2), |(i, j)| C64::new(i as f64, -(j as f64) * 0.5));
        let mut buf = Vec::new();
        write_dmat(&mut buf, &rho).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 16);
        assert_eq!(&buf[..4], b"DMAT");
        assert_eq!(read_dmat(buf.as_slice()).unwrap(), rho);
    }
}
