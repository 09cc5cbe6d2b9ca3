//! Plain-text state dumps.
//!
//! Floats are stored as the hex of their bit pattern so a reload is exact:
//!
//! ```text
//! chdbc-checkpoint 1
//! nx 8
//! ny 5
//! lx 4000000000000000
//! ly 3ff0000000000000
//! t 0000000000000000
//! rho
//! <nx*ny lines>
//! mu
//! <nx*ny lines>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use chdbc_core::geometry::{BulkSurfaceField, StripMesh};
use chdbc_core::potentials::Regularization;
use chdbc_core::solver::{PotentialPair, State};

use crate::CliError;

pub const MAGIC: &str = "chdbc-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn bad(msg: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("malformed checkpoint: {msg}"))
}

impl Checkpoint {
    pub fn from_state(mesh: &StripMesh, state: &State) -> Self {
        Self {
            nx: mesh.nx(),
            ny: mesh.ny(),
            lx: mesh.lx(),
            ly: mesh.ly(),
            t: state.t,
            rho: state.rho.bulk().to_vec(),
            mu: state.mu.bulk().to_vec(),
        }
    }

    pub fn mesh(&self) -> Result<StripMesh, CliError> {
        StripMesh::new(self.nx, self.ny, self.lx, self.ly).map_err(|e| bad(e))
    }

    /// Rebuilds the state; `zeta` is recomputed from `rho`.
    pub fn to_state(&self, pots: &PotentialPair, reg: Regularization) -> Result<State, CliError> {
        let mesh = self.mesh()?;
        let rho = BulkSurfaceField::from_bulk(&mesh, self.rho.clone()).map_err(bad)?;
        let mu = BulkSurfaceField::from_bulk(&mesh, self.mu.clone()).map_err(bad)?;
        let zeta = pots.zeta(&mesh, reg, &rho)?;
        Ok(State { rho, mu, zeta, t: self.t })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(40 * (self.rho.len() + self.mu.len()));
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "nx {}", self.nx);
        let _ = writeln!(s, "ny {}", self.ny);
        let _ = writeln!(s, "lx {}", hex(self.lx));
        let _ = writeln!(s, "ly {}", hex(self.ly));
        let _ = writeln!(s, "t {}", hex(self.t));
        for (name, values) in [("rho", &self.rho), ("mu", &self.mu)] {
            let _ = writeln!(s, "{name}");
            for v in values {
                let _ = writeln!(s, "{}", hex(*v));
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}")));
        let (_, header) = next("header")?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v == VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(bad(format!("unsupported version {v}"))),
            _ => return Err(bad("missing header")),
        }
        let mut keyed = |key: &str| -> Result<(usize, String), CliError> {
            let (line, l) = next(key)?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((line, v.to_string())),
                _ => Err(bad(format!("line {line}: expected `{key}`"))),
            }
        };
        let int = |(line, v): (usize, String)| v.parse::<usize>().map_err(|e| bad(format!("line {line}: {e}")));
        let float = |(line, v): (usize, String)| {
            u64::from_str_radix(&v, 16).map(f64::from_bits).map_err(|e| bad(format!("line {line}: {e}")))
        };
        let nx = int(keyed("nx")?)?;
        let ny = int(keyed("ny")?)?;
        let lx = float(keyed("lx")?)?;
        let ly = float(keyed("ly")?)?;
        let t = float(keyed("t")?)?;
        let n = nx.checked_mul(ny).ok_or_else(|| bad("grid too large"))?;
        let mut block = |name: &str| -> Result<Vec<f64>, CliError> {
            let (line, l) = next(name)?;
            if l != name {
                return Err(bad(format!("line {line}: expected `{name}`")));
            }
            (0..n).map(|_| next(name).and_then(|(line, v)| float((line, v.to_string())))).collect()
        };
        let rho = block("rho")?;
        let mu = block("mu")?;
        Ok(Self { nx, ny, lx, ly, t, rho, mu })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
