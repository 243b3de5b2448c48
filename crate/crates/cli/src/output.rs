//! Output files and the JSON documents the commands exchange.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use riesz_dre::data::{read_observational_csv, read_two_sample_csv, ObservationalDataset, TwoSampleDataset};
use riesz_dre::synthetic::{GaussianShiftDesign, SyntheticDesign};

use crate::{CliError, Ctx};

/// Ground truth written by `synth gen --emit-oracle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleFile {
    Observational { design: SyntheticDesign, tau0: f64 },
    GaussianShift { design: GaussianShiftDesign },
}

#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    config: &'a BTreeMap<String, String>,
    #[serde(flatten)]
    body: &'a T,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn config_json<T: Serialize>(ctx: &Ctx, body: &T) -> Result<Vec<u8>, CliError> {
    let doc = WithConfig { config: ctx.resolver.resolved(), body };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `body` with the resolved config as a `config` field, to `--out` or
/// stdout.
pub(crate) fn write_json<T: Serialize>(ctx: &Ctx, body: &T) -> Result<(), CliError> {
    write_bytes(ctx.out.as_deref(), &config_json(ctx, body)?)
}

pub(crate) fn write_json_to<T: Serialize>(ctx: &Ctx, path: &Path, body: &T) -> Result<(), CliError> {
    write_bytes(Some(path), &config_json(ctx, body)?)
}

/// Writes CSV output to `--out` or stdout. With `--out`, the resolved config
/// and `extra` go to `<out>.config.json`.
pub(crate) fn write_csv<T: Serialize>(ctx: &Ctx, csv: &[u8], extra: &T) -> Result<(), CliError> {
    write_bytes(ctx.out.as_deref(), csv)?;
    if let Some(out) = &ctx.out {
        write_json_to(ctx, &sidecar(out), extra)?;
    }
    Ok(())
}

pub(crate) fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

pub(crate) fn read_observational(path: &Path) -> Result<ObservationalDataset, CliError> {
    read_observational_csv(open(path)?).map_err(|e| CliError::from(e).context(path))
}

pub(crate) fn read_two_sample(path: &Path) -> Result<TwoSampleDataset, CliError> {
    read_two_sample_csv(open(path)?).map_err(|e| CliError::from(e).context(path))
}

/// Reads field `field` of a JSON document written by this tool.
pub(crate) fn read_json_field<T: DeserializeOwned>(path: &Path, field: &str) -> Result<T, CliError> {
    let doc: serde_json::Value =
        serde_json::from_reader(open(path)?).map_err(|e| io_err(path, format!("not JSON: {e}")))?;
    let value = doc.get(field).cloned().ok_or_else(|| io_err(path, format!("schema mismatch: no `{field}` field")))?;
    serde_json::from_value(value).map_err(|e| io_err(path, format!("schema mismatch in `{field}`: {e}")))
}

impl CliError {
    fn context(self, path: &Path) -> CliError {
        let p = path.display();
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{p}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{p}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{p}: {m}")),
        }
    }
}
