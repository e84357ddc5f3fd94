//! Brute-force references: full-sector FCI and a Hamiltonian built from
//! explicit creation/annihilation operators on occupation-number states.
//!
//! The operator routines here deliberately avoid the Slater-Condon shortcuts
//! in [`crate::determinants`]; tests compare the two.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::determinants::{Determinant, Sector};
use crate::eigensolver::{ground_state, project, CIVector, Mode, SolverOptions};
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;
use crate::sampler::enumerate_sector;

/// Largest Fock space the dense operator oracle will build.
pub const MAX_SPIN_ORBITALS: usize = 8;

/// Default cap on the sector size `fci_ground` will diagonalize.
pub const DEFAULT_FCI_LIMIT: usize = 2_000_000;

/// Occupation-number index of a determinant: alpha orbital `p` is spin
/// orbital `p`, beta orbital `p` is spin orbital `n_orb + p`.
pub fn fock_index(d: &Determinant, n_orb: usize) -> usize {
    (d.alpha | (d.beta << n_orb)) as usize
}

pub fn from_fock_index(state: usize, n_orb: usize) -> Determinant {
    let m = (1u64 << n_orb) - 1;
    Determinant::new(state as u64 & m, (state as u64 >> n_orb) & m)
}

/// `a_j |state>`: sign is (-1)^(occupied spin orbitals below j).
pub fn annihilate(state: usize, j: usize) -> Option<(f64, usize)> {
    if state >> j & 1 == 0 {
        return None;
    }
    let below = (state & ((1usize << j) - 1)).count_ones();
    Some((if below.is_multiple_of(2) { 1.0 } else { -1.0 }, state ^ (1 << j)))
}

/// `a+_j |state>`
pub fn create(state: usize, j: usize) -> Option<(f64, usize)> {
    if state >> j & 1 == 1 {
        return None;
    }
    let below = (state & ((1usize << j) - 1)).count_ones();
    Some((if below.is_multiple_of(2) { 1.0 } else { -1.0 }, state | (1 << j)))
}

/// `a+_p a_q |state>`
pub fn apply_excitation(state: usize, p: usize, q: usize) -> Option<(f64, usize)> {
    let (s1, st) = annihilate(state, q)?;
    let (s2, st) = create(st, p)?;
    Some((s1 * s2, st))
}

/// Dense Hamiltonian over every occupation state of `2 * n_orb` spin
/// orbitals, including the core energy on the diagonal.
pub fn brute_force_hamiltonian(s: &IntegralSet) -> Result<DMatrix<f64>> {
    let n = s.n_orb();
    let m = 2 * n;
    if m > MAX_SPIN_ORBITALS {
        return Err(Error::OracleLimit {
            got: m,
            limit: MAX_SPIN_ORBITALS,
        });
    }
    let dim = 1usize << m;
    let mut h = DMatrix::<f64>::from_diagonal_element(dim, dim, s.e_core());
    let spatial = |so: usize| so % n;
    let spin = |so: usize| so / n;
    for ket in 0..dim {
        for p in 0..m {
            for q in 0..m {
                if spin(p) != spin(q) {
                    continue;
                }
                if let Some((sg, bra)) = apply_excitation(ket, p, q) {
                    h[(bra, ket)] += sg * s.h(spatial(p), spatial(q));
                }
            }
        }
        // 1/2 sum (pq|rs) a+_p a+_r a_s a_q with spin(p)=spin(q), spin(r)=spin(s)
        for p in 0..m {
            for q in 0..m {
                if spin(p) != spin(q) {
                    continue;
                }
                for r in 0..m {
                    for t in 0..m {
                        if spin(r) != spin(t) {
                            continue;
                        }
                        let Some((s1, st)) = annihilate(ket, q) else { continue };
                        let Some((s2, st)) = annihilate(st, t) else { continue };
                        let Some((s3, st)) = create(st, r) else { continue };
                        let Some((s4, bra)) = create(st, p) else { continue };
                        let v = s.eri(spatial(p), spatial(q), spatial(r), spatial(t));
                        h[(bra, ket)] += 0.5 * s1 * s2 * s3 * s4 * v;
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Restricts a Fock-space matrix to the determinants of `dets`, in order.
pub fn restrict(full: &DMatrix<f64>, dets: &[Determinant], n_orb: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = dets.iter().map(|d| fock_index(d, n_orb)).collect();
    DMatrix::from_fn(dets.len(), dets.len(), |i, j| full[(idx[i], idx[j])])
}

/// Lowest eigenvalue of a dense symmetric matrix.
pub fn dense_lowest(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Spin-summed 1-RDM of a Fock-space state, from explicit `a+_p a_q`.
pub fn brute_force_1rdm(fock: &[f64], n_orb: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n_orb, n_orb);
    for (ket, &c) in fock.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for sigma in 0..2 {
            for p in 0..n_orb {
                for q in 0..n_orb {
                    if let Some((sg, bra)) = apply_excitation(ket, sigma * n_orb + p, sigma * n_orb + q) {
                        g[(p, q)] += fock[bra] * sg * c;
                    }
                }
            }
        }
    }
    g
}

/// `exp(theta/2 * (a+_q a_p - a+_p a_q))` applied to a Fock-space vector,
/// via `exp(phi K) = 1 + sin(phi) K + (1 - cos(phi)) K^2` (valid since K^3 = -K).
pub fn brute_force_givens(fock: &[f64], p: usize, q: usize, theta: f64) -> Vec<f64> {
    let apply_k = |v: &[f64]| {
        let mut out = vec![0.0; v.len()];
        for (ket, &c) in v.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if let Some((sg, bra)) = apply_excitation(ket, q, p) {
                out[bra] += sg * c;
            }
            if let Some((sg, bra)) = apply_excitation(ket, p, q) {
                out[bra] -= sg * c;
            }
        }
        out
    };
    let phi = theta / 2.0;
    let k1 = apply_k(fock);
    let k2 = apply_k(&k1);
    fock.iter()
        .zip(&k1)
        .zip(&k2)
        .map(|((&v, &a), &b)| v + phi.sin() * a + (1.0 - phi.cos()) * b)
        .collect()
}

/// Random real integrals with full 8-fold symmetry. Not physical, but any
/// such set defines a valid real symmetric Hamiltonian.
pub fn random_integrals(n_orb: usize, n_alpha: usize, n_beta: usize, seed: u64) -> IntegralSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = IntegralSet::new(n_orb, n_alpha, n_beta).expect("valid sector");
    s.set_e_core(rng.gen_range(-1.0..1.0));
    for p in 0..n_orb {
        for q in 0..=p {
            let diag = if p == q { -2.0 + p as f64 * 0.5 } else { 0.0 };
            s.set_one_body(p, q, diag + rng.gen_range(-0.3..0.3)).unwrap();
        }
    }
    for p in 0..n_orb {
        for q in 0..=p {
            for r in 0..n_orb {
                for t in 0..=r {
                    if (r, t) > (p, q) {
                        continue;
                    }
                    let base = if p == q && r == t { 0.5 } else { 0.0 };
                    s.set_eri(p, q, r, t, base + rng.gen_range(-0.1..0.1)).unwrap();
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct FciResult {
    pub energy: f64,
    pub dets: Vec<Determinant>,
    pub vector: CIVector,
    pub sector_size: usize,
}

/// Exact ground state over the whole symmetry sector.
pub fn fci_ground(s: &IntegralSet, limit: usize) -> Result<FciResult> {
    let sector = Sector::of(s);
    let size = sector.size();
    if size > limit.into() {
        return Err(Error::SectorTooLarge {
            count: size.to_string(),
            limit,
        });
    }
    let dets = enumerate_sector(&sector)?;
    let h = project(&dets, s);
    let vector = ground_state(&h, Mode::Tight, None, &SolverOptions::default())?;
    Ok(FciResult {
        energy: vector.energy,
        sector_size: dets.len(),
        dets,
        vector,
    })
}
