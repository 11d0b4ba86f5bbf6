//! On-disk cache of effective tables and slack calibrations.
//!
//! Tables are stored as `tables-<hash>.csv` (rows `kind,c1,c2,value`) with a
//! JSON sidecar `tables-<hash>.json` holding the grid metadata and the full
//! key. The hash is 64-bit FNV-1a of the key, which covers the cell, the
//! model, the lattice parameters, `k`, spacing and radius.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::experiments::{calibrate_slack, Numerics, Scenario, SlackReport};
use crate::metric::EffectiveTables;
use crate::{Error, Result};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    key: String,
    geometry_hash: String,
    model_hash: String,
    k: usize,
    h: f64,
    dt: f64,
    spacing: f64,
    radius: f64,
    half: i64,
    p_half: i64,
    created_unix: u64,
}

pub struct TableCache {
    dir: PathBuf,
    computed: Cell<usize>,
}

impl TableCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TableCache { dir: dir.into(), computed: Cell::new(0) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of tables and calibrations computed (not loaded) so far.
    pub fn computed(&self) -> usize {
        self.computed.get()
    }

    /// Key of the tables of `scn` at scale `k`.
    pub fn table_key(scn: &Scenario, k: usize) -> Result<String> {
        let m = scn.metric()?;
        let nm = &scn.numerics;
        Ok(format!("{};k={k};spacing={:?};radius={:?}", m.canonical(), nm.table_spacing, nm.table_radius(&scn.model)))
    }

    fn paths(&self, stem: &str, key: &str) -> (PathBuf, PathBuf) {
        let h = format!("{:016x}", fnv1a64(key.as_bytes()));
        (self.dir.join(format!("{stem}-{h}.csv")), self.dir.join(format!("{stem}-{h}.json")))
    }

    pub fn tables(&self, scn: &Scenario, k: usize) -> Result<EffectiveTables> {
        let key = Self::table_key(scn, k)?;
        let (csv, json) = self.paths("tables", &key);
        if let Some(t) = load(&csv, &json, &key) {
            return Ok(t);
        }
        let t = scn.tables(k)?;
        if t.key != key {
            return Err(Error::Experiment(format!("table key mismatch: {} vs {key}", t.key)));
        }
        self.computed.set(self.computed.get() + 1);
        let side = Sidecar {
            key: key.clone(),
            geometry_hash: format!("{:016x}", fnv1a64(scn.cell.canonical().as_bytes())),
            model_hash: format!("{:016x}", fnv1a64(scn.model.canonical().as_bytes())),
            k: t.k,
            h: t.h,
            dt: t.dt,
            spacing: t.spacing,
            radius: t.radius,
            half: t.half,
            p_half: t.p_half,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(&csv, t.to_csv())?;
        std::fs::write(&json, serde_json::to_string_pretty(&side)?)?;
        Ok(t)
    }

    /// Slack calibration for these numerics, computed once per key.
    pub fn slack(&self, numerics: &Numerics) -> Result<SlackReport> {
        let scales = [2, 4];
        let key = format!(
            "slack;ndir={};nrad={};N={};R={:?};vmax={:?};spacing={:?};radius={:?};scales={scales:?}",
            numerics.ndir,
            numerics.nrad,
            numerics.nodes_per_unit,
            numerics.move_radius,
            numerics.vmax,
            numerics.table_spacing,
            numerics.table_radius
        );
        let (_, json) = self.paths("slack", &key);
        if let Ok(text) = std::fs::read_to_string(&json) {
            if let Ok((k, r)) = serde_json::from_str::<(String, SlackReport)>(&text) {
                if k == key {
                    return Ok(r);
                }
            }
        }
        let r = calibrate_slack(numerics, &scales)?;
        self.computed.set(self.computed.get() + 1);
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(&json, serde_json::to_string_pretty(&(&key, &r))?)?;
        Ok(r)
    }
}

fn load(csv: &Path, json: &Path, key: &str) -> Option<EffectiveTables> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(json).ok()?).ok()?;
    if side.key != key {
        return None;
    }
    let text = std::fs::read_to_string(csv).ok()?;
    let n = (2 * side.half + 1) as usize;
    let np = (2 * side.p_half + 1) as usize;
    let mut lbar = vec![f64::NAN; n * n];
    let mut hbar = vec![f64::NAN; np * np];
    for line in text.lines().skip(1) {
        let mut f = line.split(',');
        let kind = f.next()?;
        let c1: f64 = f.next()?.parse().ok()?;
        let c2: f64 = f.next()?.parse().ok()?;
        let v: f64 = f.next()?.parse().ok()?;
        let (half, side_len, dst) = match kind {
            "lbar" => (side.half, n, &mut lbar),
            "hbar" => (side.p_half, np, &mut hbar),
            _ => return None,
        };
        let i = (c1 / side.spacing).round() as i64 + half;
        let j = (c2 / side.spacing).round() as i64 + half;
        if i < 0 || j < 0 || i as usize >= side_len || j as usize >= side_len {
            return None;
        }
        dst[j as usize * side_len + i as usize] = v;
    }
    Some(EffectiveTables {
        spacing: side.spacing,
        radius: side.radius,
        half: side.half,
        lbar,
        p_half: side.p_half,
        hbar,
        k: side.k,
        h: side.h,
        dt: side.dt,
        key: side.key,
    })
}
