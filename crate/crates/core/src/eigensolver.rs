//! Subspace projection of the Hamiltonian and its lowest eigenpair.
//!
//! Small problems go through a dense symmetric eigensolver; larger ones use
//! single-root Davidson with a diagonal preconditioner. Matrix assembly and
//! matrix-vector products are row-parallel with a serial reduction per row,
//! so results do not depend on the thread count.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinants::{bits, low_mask, slater_condon, Determinant};
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Loose,
    Tight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Dimensions up to this are solved densely.
    pub dense_limit: usize,
    pub tight_tol: f64,
    pub tight_max_iter: usize,
    pub loose_tol: f64,
    pub loose_max_iter: usize,
    /// Davidson basis size that triggers a restart.
    pub max_subspace: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_limit: 512,
            tight_tol: 1e-8,
            tight_max_iter: 1000,
            loose_tol: 1e-3,
            loose_max_iter: 20,
            max_subspace: 25,
        }
    }
}

/// Row-compressed symmetric Hamiltonian over a determinant list, core
/// energy included on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSubspaceHamiltonian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

/// Normalized amplitudes aligned with a determinant list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CIVector {
    pub amplitudes: Vec<f64>,
    pub energy: f64,
}

impl CIVector {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

fn channel_excitations(mask: u64, n_orb: usize) -> Vec<u64> {
    let empty = !mask & low_mask(n_orb);
    let occ: Vec<usize> = bits(mask).collect();
    let vir: Vec<usize> = bits(empty).collect();
    let mut out = vec![mask];
    for &h in &occ {
        for &p in &vir {
            out.push(mask ^ (1 << h) ^ (1 << p));
        }
    }
    for (i, &h1) in occ.iter().enumerate() {
        for &h2 in &occ[i + 1..] {
            for (j, &p1) in vir.iter().enumerate() {
                for &p2 in &vir[j + 1..] {
                    out.push(mask ^ (1 << h1) ^ (1 << h2) ^ (1 << p1) ^ (1 << p2));
                }
            }
        }
    }
    out
}

/// Projects `H` onto `dets`. Pairs beyond double excitations are never
/// visited: determinants are grouped by alpha string and only alpha groups
/// within two excitations of each other are compared.
pub fn project(dets: &[Determinant], s: &IntegralSet) -> SparseSubspaceHamiltonian {
    let dim = dets.len();
    let n_orb = s.n_orb();

    let mut group_of: HashMap<u64, usize> = HashMap::new();
    let mut groups: Vec<(u64, Vec<(u64, usize)>)> = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        let g = *group_of.entry(d.alpha).or_insert_with(|| {
            groups.push((d.alpha, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push((d.beta, i));
    }
    let neighbours: Vec<Vec<(usize, u32)>> = groups
        .par_iter()
        .map(|(alpha, _)| {
            let mut out: Vec<(usize, u32)> = channel_excitations(*alpha, n_orb)
                .into_iter()
                .filter_map(|a| group_of.get(&a).map(|&g| (g, (a ^ alpha).count_ones() / 2)))
                .collect();
            out.sort_unstable();
            out
        })
        .collect();

    let rows: Vec<Vec<(usize, f64)>> = (0..dim)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let di = &dets[i];
            let g = group_of[&di.alpha];
            let mut row = Vec::new();
            for &(h, da) in &neighbours[g] {
                for &(beta, j) in &groups[h].1 {
                    let db = (beta ^ di.beta).count_ones() / 2;
                    if da + db > 2 {
                        continue;
                    }
                    let v = slater_condon(di, &dets[j], s);
                    if i == j {
                        row.push((j, v + s.e_core()));
                    } else if v != 0.0 {
                        row.push((j, v));
                    }
                }
            }
            row.sort_unstable_by_key(|&(j, _)| j);
            row
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = vec![0.0; dim];
    row_ptr.push(0);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row {
            if i == j {
                diag[i] = v;
            }
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    SparseSubspaceHamiltonian {
        dim,
        row_ptr,
        cols,
        vals,
        diag,
    }
}

impl SparseSubspaceHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Stored entry `(i, j)`, or `None` when absent from the pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].binary_search(&j).ok().map(|k| self.vals[lo + k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .into_par_iter()
            .with_min_len(256)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Builds from dense storage, keeping nonzeros and the full diagonal.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if i == j || m[(i, j)] != 0.0 {
                    cols.push(j);
                    vals.push(m[(i, j)]);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
            diag: (0..dim).map(|i| m[(i, i)]).collect(),
        }
    }

    /// Little-endian dump: dim (u64), nnz (u64), dim+1 row offsets (u64),
    /// nnz column indices (u64), nnz values (f64).
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for &p in &self.row_ptr {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for &c in &self.cols {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        for &v in &self.vals {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> std::io::Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> std::io::Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let nnz = u64::from_le_bytes(next(&mut r)?) as usize;
        let row_ptr = (0..=dim)
            .map(|_| next(&mut r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let cols = (0..nnz)
            .map(|_| next(&mut r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let vals = (0..nnz)
            .map(|_| next(&mut r).map(f64::from_le_bytes))
            .collect::<std::io::Result<Vec<_>>>()?;
        let mut diag = vec![0.0; dim];
        for (i, d) in diag.iter_mut().enumerate() {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if cols[k] == i {
                    *d = vals[k];
                }
            }
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
            diag,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `c^T H c`
pub fn energy_of(c: &CIVector, h: &SparseSubspaceHamiltonian) -> Result<f64> {
    if c.len() != h.dim() {
        return Err(Error::LengthMismatch {
            what: "CI vector",
            got: c.len(),
            expected: h.dim(),
        });
    }
    Ok(dot(&c.amplitudes, &h.matvec(&c.amplitudes)))
}

/// Lowest eigenpair. `guess`, if given, must have the matrix dimension.
pub fn ground_state(
    h: &SparseSubspaceHamiltonian,
    mode: Mode,
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<CIVector> {
    if h.dim() == 0 {
        return Err(Error::Empty);
    }
    if let Some(g) = guess {
        if g.len() != h.dim() {
            return Err(Error::LengthMismatch {
                what: "initial guess",
                got: g.len(),
                expected: h.dim(),
            });
        }
    }
    let (energy, mut amplitudes) = if h.dim() <= opts.dense_limit {
        dense_ground(h)
    } else {
        davidson(h, mode, guess, opts)?
    };
    fix_sign(&mut amplitudes);
    Ok(CIVector { amplitudes, energy })
}

fn dense_ground(h: &SparseSubspaceHamiltonian) -> (f64, Vec<f64>) {
    let eig = h.to_dense().symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    (eig.eigenvalues[k], v)
}

/// Orthonormalizes `t` against `basis` (two Gram-Schmidt passes). Returns
/// false when nothing independent is left.
fn orthonormalize(t: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let before = norm(t);
    for _ in 0..2 {
        for b in basis {
            let o = dot(b, t);
            t.iter_mut().zip(b).for_each(|(x, y)| *x -= o * y);
        }
    }
    let n = norm(t);
    if n <= 1e-10 * before.max(1e-300) || n == 0.0 {
        return false;
    }
    t.iter_mut().for_each(|x| *x /= n);
    true
}

fn davidson(
    h: &SparseSubspaceHamiltonian,
    mode: Mode,
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(f64, Vec<f64>)> {
    let dim = h.dim();
    let diag = h.diagonal();
    let (tol, max_iter) = match mode {
        Mode::Tight => (opts.tight_tol, opts.tight_max_iter),
        Mode::Loose => (opts.loose_tol, opts.loose_max_iter),
    };
    let max_space = opts.max_subspace.max(3);

    let mut v0 = match guess {
        Some(g) if norm(g) > 0.0 => g.to_vec(),
        _ => {
            let mut e = vec![0.0; dim];
            let lowest = (0..dim).min_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap_or(0);
            e[lowest] = 1.0;
            e
        }
    };
    let n0 = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut products: Vec<Vec<f64>> = vec![h.matvec(&basis[0])];
    let mut prev_ritz: Option<Vec<f64>> = None;
    let mut theta = 0.0;
    let mut x = Vec::new();
    let mut residual = f64::INFINITY;

    for iter in 0..max_iter.max(1) {
        let k = basis.len();
        let small = DMatrix::from_fn(k, k, |i, j| dot(&basis[i], &products[j]));
        let small = (&small + small.transpose()) * 0.5;
        let eig = small.symmetric_eigen();
        let idx = eig.eigenvalues.imin();
        theta = eig.eigenvalues[idx];
        let y: DVector<f64> = eig.eigenvectors.column(idx).into_owned();

        x = vec![0.0; dim];
        let mut ax = vec![0.0; dim];
        for (c, (b, p)) in y.iter().zip(basis.iter().zip(&products)) {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
            ax.iter_mut().zip(p).for_each(|(ai, pi)| *ai += c * pi);
        }
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
        residual = norm(&r);
        if residual <= tol {
            return Ok((theta, x));
        }
        if iter + 1 == max_iter {
            break;
        }

        let mut t: Vec<f64> = r
            .iter()
            .zip(diag)
            .map(|(ri, di)| {
                let d = di - theta;
                let d = if d.abs() < 1e-8 { 1e-8f64.copysign(d) } else { d };
                -ri / d
            })
            .collect();

        if basis.len() >= max_space {
            // thick restart on the current and previous Ritz vectors
            let mut keep = vec![x.clone()];
            if let Some(mut p) = prev_ritz.take() {
                if orthonormalize(&mut p, &keep) {
                    keep.push(p);
                }
            }
            products = keep.iter().map(|b| h.matvec(b)).collect();
            basis = keep;
        }
        prev_ritz = Some(x.clone());

        if !orthonormalize(&mut t, &basis) {
            // preconditioned residual collapsed; fall back to the raw residual
            t = r.clone();
            if !orthonormalize(&mut t, &basis) {
                break;
            }
        }
        products.push(h.matvec(&t));
        basis.push(t);
    }

    match mode {
        Mode::Loose => Ok((theta, x)),
        Mode::Tight => Err(Error::NotConverged {
            iterations: max_iter,
            residual,
        }),
    }
}
