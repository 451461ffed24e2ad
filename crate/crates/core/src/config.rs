//! Text configuration files for lattices and cavity hardware presets.
//!
//! Lattice files have three sections:
//!
//! ```text
//! [lattice]
//! n_pairs = 3
//! type = chain          # chain | bipartite | custom
//! mirror = true         # chain only
//! couplings = 1.0 1.0 1.0
//!
//! [hopping]             # bipartite and custom: one edge "i j re im" per line
//! 0 3 1.0 0.0
//!
//! [dissipator]
//! site0 = 2
//! site1 = 3
//! v2 = 0.4
//! phi = 0.0
//! gamma = 1.0
//! gamma_phi = 0.0       # optional local dephasing
//! gamma_rel = 0.0       # optional local relaxation
//! ```
//!
//! For `bipartite` lattices sites `0..N` form sublattice A and `N..2N`
//! sublattice B; `custom` lattices leave the sublattices unassigned.

use ndarray::Array2;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::cavity::HardwarePreset;
use crate::model::{build_chain, LatticeSpec, Sublattice};
use crate::spin_exact::NoiseConfig;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Bipartite,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeConfig {
    pub n_pairs: usize,
    pub kind: LatticeKind,
    pub mirror: bool,
    pub couplings: Vec<f64>,
    pub edges: Vec<(usize, usize, f64, f64)>,
    pub site0: Option<usize>,
    pub site1: Option<usize>,
    pub v2: f64,
    pub phi: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
    pub gamma_rel: f64,
}

impl LatticeConfig {
    pub fn to_spec(&self) -> Result<LatticeSpec> {
        let spec = match self.kind {
            LatticeKind::Chain => build_chain(self.n_pairs, &self.couplings, self.mirror)?,
            LatticeKind::Bipartite | LatticeKind::Custom => {
                let n = 2 * self.n_pairs;
                let mut h = Array2::<C64>::zeros((n, n));
                for &(i, j, re, im) in &self.edges {
                    if i >= n || j >= n {
                        return Err(Error::InvalidSpec(format!("edge {i}-{j} outside the {n} sites")));
                    }
                    if i == j {
                        h[[i, i]] += C64::new(re, 0.0);
                    } else {
                        h[[i, j]] += C64::new(re, im);
                        h[[j, i]] += C64::new(re, -im);
                    }
                }
                let sublattice = match self.kind {
                    LatticeKind::Bipartite => (0..n).map(|k| if k < self.n_pairs { Sublattice::A } else { Sublattice::B }).collect(),
                    _ => vec![Sublattice::Unassigned; n],
                };
                let (d0, d1) = match self.kind {
                    LatticeKind::Bipartite => (0, self.n_pairs),
                    _ => (0, 1),
                };
                LatticeSpec::new(self.n_pairs, h, sublattice, d0, d1, 1.0, 0.0, 0.0, 1.0)?
            }
        };
        let (d0, d1) = (self.site0.unwrap_or(spec.diss_site_0), self.site1.unwrap_or(spec.diss_site_1));
        spec.with_dissipator(d0, d1)?.with_v2(self.v2)?.with_phi(self.phi).with_gamma(self.gamma)
    }

    pub fn noise(&self) -> Result<NoiseConfig> {
        NoiseConfig::new(self.gamma_phi, self.gamma_rel)
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Sections {
    keys: BTreeMap<String, BTreeMap<String, Entry>>,
    rows: BTreeMap<String, Vec<Entry>>,
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Splits text into `[section]` blocks of `key = value` pairs or bare rows.
fn split_sections(text: &str, row_sections: &[&str]) -> Result<Sections> {
    let mut keys: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
    let mut rows: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
    let mut section = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| parse_error(line, "unterminated section header"))?.trim();
            if name.is_empty() {
                return Err(parse_error(line, "empty section name"));
            }
            section = name.to_string();
            if keys.contains_key(&section) || rows.contains_key(&section) {
                return Err(parse_error(line, format!("section [{section}] repeated")));
            }
            if row_sections.contains(&name) {
                rows.insert(section.clone(), Vec::new());
            } else {
                keys.insert(section.clone(), BTreeMap::new());
            }
            continue;
        }
        if let Some(list) = rows.get_mut(&section) {
            list.push(Entry { line, value: body.to_string() });
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| parse_error(line, format!("expected `key = value`, found `{body}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(parse_error(line, "missing key"));
        }
        let map = keys.entry(section.clone()).or_default();
        if map.contains_key(key) {
            return Err(parse_error(line, format!("key `{key}` repeated")));
        }
        map.insert(key.to_string(), Entry { line, value: value.trim().trim_matches('"').to_string() });
    }
    Ok(Sections { keys, rows })
}

struct Table<'a> {
    name: &'a str,
    header_line: usize,
    map: BTreeMap<String, Entry>,
}

impl<'a> Table<'a> {
    fn take(sections: &mut Sections, name: &'a str) -> Self {
        let map = sections.keys.remove(name).unwrap_or_default();
        let header_line = map.values().map(|e| e.line).min().unwrap_or(0);
        Table { name, header_line, map }
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| parse_error(e.line, format!("invalid value `{}` for `{key}`", e.value))),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.value(key)?
            .ok_or_else(|| parse_error(self.header_line, format!("missing `{key}` in [{}]", self.name)))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .trim_matches(|c| c == '[' || c == ']')
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| parse_error(e.line, format!("invalid number `{t}` in `{key}`"))))
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            Some((k, e)) => Err(parse_error(e.line, format!("unknown key `{k}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

pub fn parse_lattice_config(text: &str) -> Result<LatticeConfig> {
    let mut sections = split_sections(text, &["hopping"])?;
    if let Some(extra) = sections.keys.keys().find(|k| !["lattice", "dissipator", ""].contains(&k.as_str())) {
        let line = sections.keys[extra].values().map(|e| e.line).min().unwrap_or(0);
        return Err(parse_error(line, format!("unknown section [{extra}]")));
    }
    if let Some(top) = sections.keys.get("") {
        if let Some(e) = top.values().next() {
            return Err(parse_error(e.line, "key outside of any section"));
        }
    }
    if !sections.keys.contains_key("lattice") {
        return Err(parse_error(1, "missing [lattice] section"));
    }
    let mut lat = Table::take(&mut sections, "lattice");
    let n_pairs: usize = lat.required("n_pairs")?;
    let kind_line = lat.map.get("type").map(|e| e.line).unwrap_or(lat.header_line);
    let kind = match lat.value::<String>("type")?.as_deref() {
        None | Some("chain") => LatticeKind::Chain,
        Some("bipartite") => LatticeKind::Bipartite,
        Some("custom") => LatticeKind::Custom,
        Some(other) => return Err(parse_error(kind_line, format!("unknown lattice type `{other}`"))),
    };
    let mirror = lat.value::<bool>("mirror")?.unwrap_or(true);
    let couplings_line = lat.map.get("couplings").map(|e| e.line).unwrap_or(lat.header_line);
    let couplings = lat.list("couplings")?;
    lat.finish()?;

    let mut edges = Vec::new();
    for e in sections.rows.remove("hopping").unwrap_or_default() {
        let t: Vec<&str> = e.value.split_whitespace().collect();
        if t.len() != 3 && t.len() != 4 {
            return Err(parse_error(e.line, format!("expected `i j re [im]`, found `{}`", e.value)));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| parse_error(e.line, format!("invalid site index `{s}`")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_error(e.line, format!("invalid amplitude `{s}`")));
        let (i, j) = (idx(t[0])?, idx(t[1])?);
        if i >= 2 * n_pairs || j >= 2 * n_pairs {
            return Err(parse_error(e.line, format!("site index out of range 0..{}", 2 * n_pairs)));
        }
        edges.push((i, j, num(t[2])?, if t.len() == 4 { num(t[3])? } else { 0.0 }));
    }
    let couplings = match kind {
        LatticeKind::Chain => {
            if !edges.is_empty() {
                return Err(parse_error(couplings_line, "chain lattices take `couplings`, not a [hopping] edge list"));
            }
            let c = couplings.ok_or_else(|| parse_error(couplings_line, "chain lattice needs `couplings`"))?;
            let want = if mirror { n_pairs } else { 2 * n_pairs - 1 };
            if c.len() != want {
                return Err(parse_error(couplings_line, format!("expected {want} couplings, found {}", c.len())));
            }
            c
        }
        _ => {
            if couplings.is_some() {
                return Err(parse_error(couplings_line, "`couplings` only applies to chain lattices"));
            }
            if edges.is_empty() {
                return Err(parse_error(couplings_line, "lattice needs a [hopping] edge list"));
            }
            Vec::new()
        }
    };

    let mut d = Table::take(&mut sections, "dissipator");
    let cfg = LatticeConfig {
        n_pairs,
        kind,
        mirror,
        couplings,
        edges,
        site0: d.value("site0")?,
        site1: d.value("site1")?,
        v2: d.value("v2")?.unwrap_or(0.0),
        phi: d.value("phi")?.unwrap_or(0.0),
        gamma: d.value("gamma")?.unwrap_or(1.0),
        gamma_phi: d.value("gamma_phi")?.unwrap_or(0.0),
        gamma_rel: d.value("gamma_rel")?.unwrap_or(0.0),
    };
    let dline = d.header_line;
    d.finish()?;
    cfg.to_spec().map_err(|e| match e {
        Error::InvalidSpec(msg) => parse_error(dline.max(1), msg),
        other => other,
    })?;
    Ok(cfg)
}

pub fn load_lattice_config(path: &Path) -> Result<LatticeConfig> {
    parse_lattice_config(&std::fs::read_to_string(path)?)
}

/// Flat `key = value` preset; section headers are allowed and ignored.
pub fn parse_hardware_preset(text: &str) -> Result<HardwarePreset> {
    let sections = split_sections(text, &[])?;
    let mut merged = BTreeMap::new();
    for (_, map) in sections.keys {
        for (k, e) in map {
            if merged.contains_key(&k) {
                return Err(parse_error(e.line, format!("key `{k}` repeated")));
            }
            merged.insert(k, e);
        }
    }
    let mut t = Table { name: "preset", header_line: 1, map: merged };
    let d = HardwarePreset::default();
    let preset = HardwarePreset {
        qubit_ghz: t.value("qubit_ghz")?.unwrap_or(d.qubit_ghz),
        cavity_ghz: t.value("cavity_ghz")?.unwrap_or(d.cavity_ghz),
        blue_sideband_ghz: t.value("blue_sideband_ghz")?.unwrap_or(d.blue_sideband_ghz),
        drive_amplitude_ghz: t.value("drive_amplitude_ghz")?.unwrap_or(d.drive_amplitude_ghz),
        kappa_mhz: t.value("kappa_mhz")?.unwrap_or(d.kappa_mhz),
        g_mhz: t.value("g_mhz")?.unwrap_or(d.g_mhz),
        n_max: t.value("n_max")?.unwrap_or(d.n_max),
    };
    t.finish()?;
    Ok(preset)
}

pub fn load_hardware_preset(path: &Path) -> Result<HardwarePreset> {
    parse_hardware_preset(&std::fs::read_to_string(path)?)
}
