//! Plain-text checkpoints of the run state. Floats are written in shortest
//! round-trip form, so a restart continues bit-for-bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::DriverError;
use crate::parabolic::State;

const MAGIC: &str = "ferrosim-checkpoint 1";

/// Restartable run state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hash: String,
    pub state: State,
    /// Step-size controller: current step and success streak.
    pub dt: f64,
    pub streak: usize,
    pub steps: usize,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let s = &self.state;
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("hash {}\n", self.hash));
        out.push_str(&format!("t {:?}\n", s.t));
        out.push_str(&format!("dt {:?}\n", self.dt));
        out.push_str(&format!("streak {}\n", self.streak));
        out.push_str(&format!("steps {}\n", self.steps));
        out.push_str(&format!("residual {:?}\n", s.elliptic_residual));
        out.push_str(&format!("nodes {}\n", s.p.len()));
        for i in 0..s.p.len() {
            out.push_str(&format!(
                "{:?} {:?} {:?} {:?} {:?}\n",
                s.p[i][0], s.p[i][1], s.u[i][0], s.u[i][1], s.phi[i]
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DriverError> {
        let bad = |msg: String| DriverError::Checkpoint(msg);
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing checkpoint header".into()));
        }
        let mut field = |key: &str| -> Result<String, DriverError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
        };
        let num = |s: String, key: &str| s.parse::<f64>().map_err(|_| bad(format!("bad `{key}` value `{s}`")));
        let int = |s: String, key: &str| s.parse::<usize>().map_err(|_| bad(format!("bad `{key}` value `{s}`")));
        let hash = field("hash")?;
        let t = num(field("t")?, "t")?;
        let dt = num(field("dt")?, "dt")?;
        let streak = int(field("streak")?, "streak")?;
        let steps = int(field("steps")?, "steps")?;
        let residual = num(field("residual")?, "residual")?;
        let n = int(field("nodes")?, "nodes")?;
        let mut state = State::zeros(n);
        state.t = t;
        state.elliptic_residual = residual;
        for i in 0..n {
            let line = lines.next().ok_or_else(|| bad(format!("missing node {i}")))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(format!("bad node line {i}")))?;
            if v.len() != 5 {
                return Err(bad(format!("node line {i} has {} values", v.len())));
            }
            state.p[i] = [v[0], v[1]];
            state.u[i] = [v[2], v[3]];
            state.phi[i] = v[4];
        }
        Ok(Self {
            hash,
            state,
            dt,
            streak,
            steps,
        })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<(), DriverError> {
        let io = |e: std::io::Error| DriverError::Io {
            path: path.display().to_string(),
            source: e,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(self.to_text().as_bytes()).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self, DriverError> {
        let text = fs::read_to_string(path).map_err(|e| DriverError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_text(&text)
    }
}
