//! JSON artifact schema (`lazy-spectra/1`) and vector sidecar handling.

use lazy_spectra::{CcaResult, Result, SpectralResult};
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "lazy-spectra/1";

/// Vectors longer than this are written to sidecar binary files.
const INLINE_LIMIT: usize = 10_000;

#[derive(Serialize)]
struct VectorSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    inline: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

/// Inlines small vector sets; writes large ones to a `LSPECDM1` sidecar.
fn vector_set(vectors: Vec<Vec<f64>>, sidecar: Option<&str>) -> Result<VectorSet> {
    let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
    if dim <= INLINE_LIMIT || sidecar.is_none() {
        return Ok(VectorSet {
            inline: Some(vectors),
            path: None,
        });
    }
    let path = sidecar.unwrap().to_string();
    let rows = vectors.len();
    let flat: Vec<f64> = vectors.into_iter().flatten().collect();
    lazy_spectra::io::save_binary(rows, dim, &flat, &path)?;
    Ok(VectorSet {
        inline: None,
        path: Some(path),
    })
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Assembles the GenEV result artifact.
pub fn genev_artifact(
    result: &SpectralResult,
    config: Value,
    out_path: Option<&str>,
    deterministic: bool,
) -> Result<Value> {
    let vectors: Vec<Vec<f64>> = result
        .basis
        .columns()
        .iter()
        .map(|c| c.as_slice().to_vec())
        .collect();
    let sidecar = out_path.map(|p| format!("{p}.vectors.bin"));
    let vectors = vector_set(vectors, sidecar.as_deref())?;
    Ok(json!({
        "schema": SCHEMA,
        "command": "genev",
        "timestamp": if deterministic { 0 } else { timestamp() },
        "seed": result.seed,
        "config": config,
        "eigenvalues": result.rayleigh,
        "signs": result.signs,
        "vectors": vectors,
        "b_orthonormality_error": result.b_orthonormality_error,
        "residual_exhausted": result.residual_exhausted,
        "counters": result.counters,
        "traces": result.traces,
    }))
}

/// Assembles the CCA result artifact.
pub fn cca_artifact(
    result: &CcaResult,
    config: Value,
    out_path: Option<&str>,
    deterministic: bool,
) -> Result<Value> {
    let phi: Vec<Vec<f64>> = result
        .pairs
        .iter()
        .map(|p| p.phi.as_slice().to_vec())
        .collect();
    let psi: Vec<Vec<f64>> = result
        .pairs
        .iter()
        .map(|p| p.psi.as_slice().to_vec())
        .collect();
    let phi = vector_set(phi, out_path.map(|p| format!("{p}.phi.bin")).as_deref())?;
    let psi = vector_set(psi, out_path.map(|p| format!("{p}.psi.bin")).as_deref())?;
    Ok(json!({
        "schema": SCHEMA,
        "command": "cca",
        "timestamp": if deterministic { 0 } else { timestamp() },
        "seed": result.seed,
        "config": config,
        "sigmas": result.sigmas(),
        "phi": phi,
        "psi": psi,
        "b_orthonormality_error": result.b_orthonormality_error,
        "residual_exhausted": result.residual_exhausted,
        "counters": result.counters,
        "traces": result.traces,
    }))
}

/// Writes the artifact to the output path, or stdout when no path is given.
pub fn emit(artifact: &Value, out: Option<&str>) -> Result<()> {
    let text = serde_json::to_string_pretty(artifact).expect("serializable artifact");
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
