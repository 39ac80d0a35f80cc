//! File formats for operators, spectra, kernel matrices and extension solutions.

use serde::{Deserialize, Serialize};

use frachom_core::domain::CartesianGrid;
use frachom_core::extension::{dtn_extract, DtnMethod, ExtensionSolution};
use frachom_core::kernel::KernelMatrix;
use frachom_core::local_op::DiscreteOperator;
use frachom_core::spectral::SpectralDecomposition;

use crate::error::RunError;
use crate::report::{num, Artifact, Table};

/// Bytes before the matrix entries: `N` as little-endian `u32`, then `s` as little-endian `f32`.
pub const KERNEL_HEADER_BYTES: usize = 8;

/// Dense binary form of a kernel matrix: the 8-byte header followed by the
/// `N²` entries in row-major order as little-endian `f64`.
pub fn kernel_binary(k: &KernelMatrix) -> Vec<u8> {
    let n = k.dim();
    let mut out = Vec::with_capacity(KERNEL_HEADER_BYTES + 8 * n * n);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(k.order() as f32).to_le_bytes());
    let m = k.matrix();
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

/// Inverse of [`kernel_binary`]: `(N, s, row-major entries)`.
pub fn read_kernel_binary(bytes: &[u8]) -> Result<(usize, f32, Vec<f64>), RunError> {
    let bad = |msg: &str| RunError::Schema(format!("kernel binary: {msg}"));
    if bytes.len() < KERNEL_HEADER_BYTES {
        return Err(bad("truncated header"));
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let s = f32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let body = &bytes[KERNEL_HEADER_BYTES..];
    if body.len() != 8 * n * n {
        return Err(bad("body length differs from N²"));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((n, s, data))
}

/// `row,col,value` for every entry of the kernel matrix.
pub fn kernel_csv(k: &KernelMatrix, name: &str) -> Result<Artifact, RunError> {
    let mut t = Table::new(["row", "col", "value"]);
    let m = k.matrix();
    for i in 0..k.dim() {
        for j in 0..k.dim() {
            t.push(vec![i.to_string(), j.to_string(), num(m[(i, j)])]);
        }
    }
    t.into_artifact(name)
}

/// `k,lambda` in ascending order.
pub fn eigenvalues_csv(dec: &SpectralDecomposition, name: &str) -> Result<Artifact, RunError> {
    let mut t = Table::new(["k", "lambda"]);
    for (k, l) in dec.eigenvalues().iter().enumerate() {
        t.push(vec![k.to_string(), num(*l)]);
    }
    t.into_artifact(name)
}

/// Whitespace-separated `row col value` lines of the stored entries.
pub fn operator_triplets(op: &DiscreteOperator, name: &str) -> Artifact {
    let mut text = String::new();
    for (i, j, v) in op.matrix().triplets() {
        text.push_str(&format!("{i} {j} {}\n", num(v)));
    }
    Artifact::new(name, text.into_bytes())
}

/// `node,x,y,u` for a nodal field.
pub fn nodal_csv(grid: &CartesianGrid, columns: &[(&str, &[f64])], name: &str) -> Result<Artifact, RunError> {
    let mut header = vec!["node".to_string(), "x".into(), "y".into()];
    header.extend(columns.iter().map(|(c, _)| c.to_string()));
    let mut t = Table::new(header);
    for node in 0..grid.len() {
        let p = grid.point(node);
        let mut row = vec![node.to_string(), num(p[0]), num(p[1])];
        row.extend(columns.iter().map(|(_, v)| num(v[node])));
        t.push(row);
    }
    t.into_artifact(name)
}

/// JSON summary of an extension solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSummary {
    pub s: f64,
    #[serde(rename = "Y")]
    pub height: f64,
    #[serde(rename = "M")]
    pub layers: usize,
    pub gamma: f64,
    pub energy: f64,
    pub dtn: Vec<f64>,
}

pub fn extension_summary(sol: &ExtensionSolution, method: DtnMethod) -> Result<ExtensionSummary, RunError> {
    let g = sol.grid();
    Ok(ExtensionSummary {
        s: g.order(),
        height: g.height(),
        layers: g.layers(),
        gamma: g.grading(),
        energy: sol.energy(),
        dtn: dtn_extract(sol, method)?,
    })
}

/// One CSV per requested height, `slice_000.csv` upwards, with columns `x,y,u`.
pub fn extension_slices(sol: &ExtensionSolution, heights: &[f64]) -> Result<Vec<Artifact>, RunError> {
    let base = sol.grid().base();
    heights
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let u = sol.slice_at(y)?;
            let mut t = Table::new(["x", "y", "u"]);
            for (i, v) in u.iter().enumerate() {
                t.push(vec![num(base.axis_coord(i)), num(y), num(*v)]);
            }
            t.into_artifact(format!("slice_{k:03}.csv"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use frachom_core::domain::BoundaryMode;
    use frachom_core::kernel::assemble_fraclap_form;

    #[test]
    fn kernel_binary_round_trip() {
        let grid = CartesianGrid::new(1, 1.0, 16, BoundaryMode::ZeroExterior).unwrap();
        let k = assemble_fraclap_form(&grid, 0.3).unwrap();
        let bytes = kernel_binary(&k);
        assert_eq!(bytes.len(), 8 + 8 * 256);
        assert_eq!(&bytes[0..4], &16u32.to_le_bytes());
        let (n, s, data) = read_kernel_binary(&bytes).unwrap();
        assert_eq!((n, s), (16, 0.3f32));
        assert_eq!(data[17], k.matrix()[(1, 1)]);
        assert_eq!(data[3], k.matrix()[(0, 3)]);
        assert!(read_kernel_binary(&bytes[..20]).is_err());
        let csv = kernel_csv(&k, "k.csv").unwrap();
        assert_eq!(String::from_utf8(csv.bytes).unwrap().lines().count(), 257);
    }
}
