use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One homodyne trajectory. Sample `k` of a current is the average over
/// `[t_k, t_k + dt)`; `x_expect` is the conditioned `⟨X⟩` at `t_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `J_i(t)` per measured channel.
    pub currents: Vec<Vec<f64>>,
    /// Conditioned `⟨X_i⟩` per measured channel.
    pub x_expect: Vec<Vec<f64>>,
    pub seed: u64,
    pub index: u64,
    /// Largest trace correction applied by per-step renormalization.
    pub max_renorm: f64,
}

const MAGIC: &[u8; 8] = b"KSTRAJ01";

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.currents.len()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Check the shape invariants: equal lengths and a strictly increasing,
    /// uniform time grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.currents.len() != self.x_expect.len() {
            return Err(Error::ShapeMismatch("current and ⟨X⟩ channel counts differ".into()));
        }
        if self.currents.iter().chain(&self.x_expect).any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("record arrays have different lengths".into()));
        }
        check_uniform_grid(&self.times)
    }

    /// Columnar CSV: `t,J_1,..,J_n,x1,..,xn`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n_channels()).map(|i| format!("J_{i}")));
        header.extend((1..=self.n_channels()).map(|i| format!("x{i}")));
        writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        for k in 0..self.len() {
            let mut row = vec![fmt(self.times[k])];
            row.extend(self.currents.iter().map(|c| fmt(c[k])));
            row.extend(self.x_expect.iter().map(|c| fmt(c[k])));
            writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a CSV written by [`write_csv`](Self::write_csv). Seed and index
    /// are not part of the CSV and come back as zero.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let cols = header.split(',').count();
        if cols < 1 || (cols - 1) % 2 != 0 {
            return Err(Error::Parse(format!("{}: bad header {header:?}", path.display())));
        }
        let nc = (cols - 1) / 2;
        let mut rec = TrajectoryRecord {
            times: Vec::new(),
            currents: vec![Vec::new(); nc],
            x_expect: vec![Vec::new(); nc],
            seed: 0,
            index: 0,
            max_renorm: 0.0,
        };
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            if vals.len() != cols {
                return Err(Error::Parse(format!("{}: ragged row", path.display())));
            }
            rec.times.push(vals[0]);
            for c in 0..nc {
                rec.currents[c].push(vals[1 + c]);
                rec.x_expect[c].push(vals[1 + nc + c]);
            }
        }
        Ok(rec)
    }

    /// Compact little-endian binary form, lossless.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.index.to_le_bytes())?;
        w.write_all(&self.max_renorm.to_le_bytes())?;
        w.write_all(&(self.n_channels() as u64).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for v in self
            .times
            .iter()
            .chain(self.currents.iter().flatten())
            .chain(self.x_expect.iter().flatten())
        {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |e: std::io::Error| Error::Parse(format!("trajectory binary: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::Parse("trajectory binary: bad magic".into()));
        }
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b).map_err(bad)?;
            Ok(b)
        };
        let seed = u64::from_le_bytes(next(&mut r)?);
        let index = u64::from_le_bytes(next(&mut r)?);
        let max_renorm = f64::from_le_bytes(next(&mut r)?);
        let nc = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut read_vec =
            |r: &mut R| -> Result<Vec<f64>> { (0..n).map(|_| Ok(f64::from_le_bytes(next(r)?))).collect() };
        let times = read_vec(&mut r)?;
        let currents = (0..nc).map(|_| read_vec(&mut r)).collect::<Result<_>>()?;
        let x_expect = (0..nc).map(|_| read_vec(&mut r)).collect::<Result<_>>()?;
        Ok(TrajectoryRecord {
            times,
            currents,
            x_expect,
            seed,
            index,
            max_renorm,
        })
    }
}

fn fmt(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}

pub(crate) fn check_uniform_grid(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Ok(());
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(Error::InvalidParams("time grid must be strictly increasing".into()));
    }
    for w in t.windows(2) {
        let step = w[1] - w[0];
        if !(step > 0.0) || (step - dt).abs() > 1e-9 * dt.max(w[1].abs()) {
            return Err(Error::InvalidParams("time grid must be uniform".into()));
        }
    }
    Ok(())
}

/// Seeds and settings of a trajectory ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub master_seed: u64,
    pub n_traj: usize,
    pub seeds: Vec<u64>,
    pub dt_output: f64,
    pub dt_internal: f64,
    pub n_samples: usize,
    pub succeeded: usize,
    pub parameters: serde_json::Value,
}

impl EnsembleManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }
}
