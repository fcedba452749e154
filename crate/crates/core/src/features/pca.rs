//! Per-protocol PCA bases for current traces and least-squares projection.
//!
//! The basis is computed from a mean-centered corpus (rows = simulations,
//! columns = concatenated sweep samples) through the Gram matrix `X Xᵀ`,
//! which is small because the corpus has far fewer rows than columns.
//! Projections are taken on the uncentered trace so that they are linear in
//! the trace; centering only shifts every coefficient by a constant, which the
//! downstream z-transform removes.

use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::channels::TraceSet;
use crate::binio::{put_f64s, put_string, put_u64, read_file, write_file, Reader};
use crate::error::{Error, Result};

pub const N_COMPONENTS: usize = 5;

const MAGIC: &[u8; 8] = b"MCPCA\0\0\x01";

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolBasis {
    pub name: String,
    /// Corpus mean trace.
    pub mean: Vec<f64>,
    /// Orthonormal basis vectors (columns of the basis matrix).
    pub components: Vec<Vec<f64>>,
    /// Fraction of total corpus variance captured by each component.
    pub explained_variance: Vec<f64>,
    /// Number of non-degenerate components; the rest are zero-padded.
    pub rank: usize,
    /// Least-squares solve operator `R⁻¹Qᵀ` of the non-degenerate columns.
    solver: Vec<Vec<f64>>,
}

impl ProtocolBasis {
    fn new(name: String, mean: Vec<f64>, components: Vec<Vec<f64>>, explained_variance: Vec<f64>, rank: usize) -> Result<Self> {
        let mut basis = ProtocolBasis {
            name,
            mean,
            components,
            explained_variance,
            rank,
            solver: Vec::new(),
        };
        basis.solver = basis.least_squares_operator()?;
        Ok(basis)
    }

    pub fn trace_len(&self) -> usize {
        self.mean.len()
    }

    pub fn retained_variance(&self) -> f64 {
        self.explained_variance.iter().sum()
    }

    fn least_squares_operator(&self) -> Result<Vec<Vec<f64>>> {
        let p = self.trace_len();
        if self.rank == 0 {
            return Ok(Vec::new());
        }
        let x = DMatrix::from_fn(p, self.rank, |i, j| self.components[j][i]);
        let qr = x.qr();
        let r = qr.r();
        let q = qr.q();
        let r_inv = r
            .try_inverse()
            .ok_or_else(|| Error::Input(format!("basis for `{}` is rank deficient", self.name)))?;
        let op = r_inv * q.transpose();
        Ok((0..self.rank).map(|i| op.row(i).iter().copied().collect()).collect())
    }

    /// Least-squares coefficients of `y` on the basis columns.
    pub fn coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.trace_len() {
            return Err(Error::Input(format!(
                "protocol `{}`: trace length {} does not match basis length {}",
                self.name,
                y.len(),
                self.trace_len()
            )));
        }
        let mut beta = vec![0.0; self.components.len()];
        for (b, row) in beta.iter_mut().zip(&self.solver) {
            *b = row.iter().zip(y).map(|(a, v)| a * v).sum();
        }
        Ok(beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub protocols: Vec<ProtocolBasis>,
}

/// Top principal directions of the symmetric PSD matrix `g`, by block
/// subspace iteration with Rayleigh-Ritz extraction. Returns (eigenvalues,
/// eigenvectors as columns), sorted descending.
fn top_eigenpairs(g: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = g.nrows();
    if n <= 400 {
        let eig = SymmetricEigen::new(g.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let take = k.min(n);
        let vals = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(n, take, |r, c| eig.eigenvectors[(r, order[c])]);
        return (vals, vecs);
    }
    let block = (k + 10).min(n);
    // Deterministic start: a spread of rows of g itself.
    let mut q = DMatrix::from_fn(n, block, |r, c| g[(r, (c * n) / block)] + if r % block == c { 1.0 } else { 0.0 });
    q = q.qr().q();
    let mut prev = vec![0.0; k];
    let mut vals = vec![0.0; k];
    let mut vecs = q.columns(0, k).into_owned();
    for _ in 0..2000 {
        let z = g * &q;
        q = z.qr().q();
        let small = q.transpose() * g * &q;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let ritz = &q * DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        for i in 0..k {
            vals[i] = eig.eigenvalues[order[i]];
        }
        vecs = ritz.columns(0, k).into_owned();
        q = ritz;
        let scale = vals[0].abs().max(f64::MIN_POSITIVE);
        if vals.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= 1e-13 * scale) {
            break;
        }
        prev.clone_from(&vals);
    }
    (vals, vecs)
}

fn basis_for_protocol(name: &str, rows: &[Vec<f64>], n_components: usize) -> Result<ProtocolBasis> {
    let n = rows.len();
    if n < n_components {
        return Err(Error::Input(format!(
            "protocol `{name}`: corpus has {n} rows, need at least {n_components}"
        )));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Input(format!("protocol `{name}`: ragged corpus rows")));
    }
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j] - mean[j]);
    let gram = &x * x.transpose();
    let total = gram.trace();

    let (vals, vecs) = top_eigenpairs(&gram, n_components);
    let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
    let mut components: Vec<DVector<f64>> = Vec::new();
    let mut explained = Vec::new();
    for (i, &lambda) in vals.iter().enumerate() {
        if total <= 0.0 || lambda <= tol {
            break;
        }
        let mut u = x.transpose() * vecs.column(i);
        // Re-orthogonalize twice against the accepted components.
        for _ in 0..2 {
            for c in &components {
                let proj = c.dot(&u);
                u -= c * proj;
            }
        }
        let norm = u.norm();
        if norm <= 1e-12 {
            break;
        }
        components.push(u / norm);
        explained.push(lambda / total);
    }
    let rank = components.len();
    if rank < n_components {
        warn!("protocol `{name}`: corpus rank {rank} < {n_components}; padding basis with zero columns");
    }
    let mut cols: Vec<Vec<f64>> = components.iter().map(|c| c.iter().copied().collect()).collect();
    cols.resize(n_components, vec![0.0; p]);
    explained.resize(n_components, 0.0);
    ProtocolBasis::new(name.to_string(), mean, cols, explained, rank)
}

/// Builds one basis per protocol from `(protocol name, corpus rows)` pairs.
pub fn build_pca_basis(corpus: &[(String, Vec<Vec<f64>>)], n_components: usize) -> Result<PcaBasis> {
    let protocols = corpus
        .iter()
        .map(|(name, rows)| basis_for_protocol(name, rows, n_components))
        .collect::<Result<Vec<_>>>()?;
    Ok(PcaBasis { protocols })
}

/// Least-squares coefficients of each protocol's concatenated sweeps, in basis
/// protocol order.
pub fn project_traces(t: &TraceSet, basis: &PcaBasis) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(basis.protocols.len() * N_COMPONENTS);
    for pb in &basis.protocols {
        let traces = t
            .protocol(&pb.name)
            .ok_or_else(|| Error::Input(format!("trace set has no protocol `{}`", pb.name)))?;
        out.extend(pb.coefficients(&traces.concatenated())?);
    }
    Ok(out)
}

impl PcaBasis {
    pub fn n_summaries(&self) -> usize {
        self.protocols.iter().map(|p| p.components.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = MAGIC.to_vec();
        put_u64(&mut buf, self.protocols.len() as u64);
        for p in &self.protocols {
            put_string(&mut buf, &p.name);
            put_u64(&mut buf, p.trace_len() as u64);
            put_u64(&mut buf, p.components.len() as u64);
            put_u64(&mut buf, p.rank as u64);
            put_f64s(&mut buf, &p.explained_variance);
            put_f64s(&mut buf, &p.mean);
            for c in &p.components {
                put_f64s(&mut buf, c);
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a PCA basis file".into()));
        }
        let n = r.len()?;
        let mut protocols = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let len = r.len()?;
            let k = r.len()?;
            let rank = r.len()?;
            if rank > k {
                return Err(Error::Format("rank exceeds component count".into()));
            }
            let explained = r.f64s(k)?;
            let mean = r.f64s(len)?;
            let components = (0..k).map(|_| r.f64s(len)).collect::<Result<Vec<_>>>()?;
            protocols.push(ProtocolBasis::new(name, mean, components, explained, rank)?);
        }
        if !r.finished() {
            return Err(Error::Format("trailing bytes in PCA basis file".into()));
        }
        Ok(PcaBasis { protocols })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
