//! Instance files.
//!
//! The matrix goes to a binary file: the 8-byte magic `HTPROX01`, `n` as a
//! little-endian `u64`, then the `n²` entries of `A` row-major as
//! little-endian `f64`. Everything else (spec, `b`, `x*`, metadata, optional
//! reference value) goes to a JSON sidecar at `<path>.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::regression::{build_ball_residual, build_box_l1};
use super::{Family, GeneratedInstance, InstanceMetadata, InstanceSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HTPROX01";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    spec: InstanceSpec,
    b: Vec<f64>,
    x_star: Vec<f64>,
    metadata: InstanceMetadata,
    f_star_reference: Option<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes a regression instance. Fixtures carry no data and are rebuilt
/// from their spec instead.
pub fn write_instance(path: &Path, instance: &GeneratedInstance) -> Result<()> {
    let (Some(a), Some(b)) = (&instance.a, &instance.b) else {
        return Err(Error::Config("only regression instances have a data file".into()));
    };
    let n = instance.spec.n;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(n as u64).to_le_bytes())?;
    for v in a.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;

    let sidecar = Sidecar {
        spec: instance.spec.clone(),
        b: b.to_vec(),
        x_star: instance.x_star.to_vec(),
        metadata: instance.metadata.clone(),
        f_star_reference: instance.f_star_reference,
    };
    let mut side = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut side, &sidecar)?;
    side.write_all(b"\n")?;
    side.flush()?;
    Ok(())
}

/// Reads an instance written by [`write_instance`]. The stored metadata is
/// reused, so no power iteration or plug-in estimate is rerun.
pub fn read_instance(path: &Path) -> Result<GeneratedInstance> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!("{}: not an instance file (bad magic)", path.display())));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| Error::Config("dimension does not fit in memory".into()))?;
    let mut data = Vec::with_capacity(n.saturating_mul(n));
    for _ in 0..n * n {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    if input.read(&mut word)? != 0 {
        return Err(Error::Config(format!("{}: trailing bytes after the matrix", path.display())));
    }
    let a = Array2::from_shape_vec((n, n), data).expect("length checked");

    let side: Sidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    side.spec.validate()?;
    if side.spec.n != n || side.b.len() != n || side.x_star.len() != n {
        return Err(Error::Config("sidecar dimensions disagree with the data file".into()));
    }
    let (a, b, x) = (Arc::new(a), Array1::from(side.b), Array1::from(side.x_star));
    match side.spec.family {
        Family::BoxL1Regression => build_box_l1(side.spec, a, b, x, side.metadata),
        Family::BallResidualRegression => build_ball_residual(side.spec, a, b, x, side.metadata),
        Family::SyntheticFixture => Err(Error::Config("fixtures have no data file".into())),
    }
}
