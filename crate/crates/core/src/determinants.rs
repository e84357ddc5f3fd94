//! Slater determinants as (alpha, beta) occupation masks and their
//! Hamiltonian matrix elements.
//!
//! Phase convention: spin orbitals are ordered by ascending spatial index
//! within a channel, with the whole alpha string before the beta string.
//! Every excitation in this crate is a product of same-channel pairs, so the
//! fermionic sign factorizes into an alpha part times a beta part.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::IntegralSet;

/// Iterates the set bit positions of `mask`, lowest first.
#[inline]
pub fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

#[inline]
pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Occupied orbitals of `mask` strictly between `a` and `b`.
#[inline]
fn occupied_between(mask: u64, a: usize, b: usize) -> u32 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi <= lo + 1 {
        return 0;
    }
    let window = ((1u64 << hi) - 1) & !((1u64 << (lo + 1)) - 1);
    (mask & window).count_ones()
}

/// Sign picked up by moving electrons `holes[i] -> particles[i]` one pair at
/// a time within a single spin channel.
fn channel_phase(mut mask: u64, holes: &[usize], particles: &[usize]) -> f64 {
    let mut odd = false;
    for (&h, &p) in holes.iter().zip(particles) {
        odd ^= occupied_between(mask, h, p) & 1 == 1;
        mask ^= (1u64 << h) | (1u64 << p);
    }
    if odd {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

impl Determinant {
    pub const fn new(alpha: u64, beta: u64) -> Self {
        Self { alpha, beta }
    }

    /// True when no bit at or above `n_orb` is set.
    pub fn fits(&self, n_orb: usize) -> bool {
        let m = !low_mask(n_orb);
        self.alpha & m == 0 && self.beta & m == 0
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(&self) -> usize {
        self.beta.count_ones() as usize
    }

    /// Occupation string with orbital 0 leftmost, e.g. `1100|1100`.
    pub fn render(&self, n_orb: usize) -> String {
        let mut s = String::with_capacity(2 * n_orb + 1);
        for p in 0..n_orb {
            s.push(if self.alpha >> p & 1 == 1 { '1' } else { '0' });
        }
        s.push('|');
        for p in 0..n_orb {
            s.push(if self.beta >> p & 1 == 1 { '1' } else { '0' });
        }
        s
    }

    /// Parses an occupation string, with or without the `|` separator.
    pub fn parse(text: &str, n_orb: usize) -> Result<Self> {
        let digits: Vec<char> = text.trim().chars().filter(|&c| c != '|').collect();
        if digits.len() != 2 * n_orb {
            return Err(Error::BitstringLength {
                got: digits.len(),
                expected: 2 * n_orb,
            });
        }
        let mut det = Determinant::default();
        for (i, c) in digits.into_iter().enumerate() {
            let bit = match c {
                '0' => 0u64,
                '1' => 1u64,
                other => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("`{other}` in occupation string `{text}`"),
                    })
                }
            };
            if i < n_orb {
                det.alpha |= bit << i;
            } else {
                det.beta |= bit << (i - n_orb);
            }
        }
        Ok(det)
    }
}

/// Fixed-(N_alpha, N_beta) symmetry sector over `n_orb` spatial orbitals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl Sector {
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_orb > 64 || n_alpha > n_orb || n_beta > n_orb {
            return Err(Error::ElectronCount(format!(
                "({n_orb} orbitals, {n_alpha} alpha, {n_beta} beta) is not a valid sector"
            )));
        }
        Ok(Self { n_orb, n_alpha, n_beta })
    }

    pub fn of(ints: &IntegralSet) -> Self {
        Self {
            n_orb: ints.n_orb(),
            n_alpha: ints.n_alpha(),
            n_beta: ints.n_beta(),
        }
    }

    pub fn contains(&self, d: &Determinant) -> bool {
        d.fits(self.n_orb) && d.n_alpha() == self.n_alpha && d.n_beta() == self.n_beta
    }

    /// Aufbau reference: lowest orbitals filled in each channel.
    pub fn hartree_fock(&self) -> Determinant {
        Determinant::new(low_mask(self.n_alpha), low_mask(self.n_beta))
    }

    /// `C(n_orb, n_alpha) * C(n_orb, n_beta)` in arbitrary precision.
    pub fn size(&self) -> BigUint {
        binomial(self.n_orb, self.n_alpha) * binomial(self.n_orb, self.n_beta)
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orb
    }
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

pub fn hartree_fock_det(ints: &IntegralSet) -> Determinant {
    Sector::of(ints).hartree_fock()
}

/// Holes, particles and fermionic sign connecting two determinants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcitationInfo {
    pub degree: usize,
    pub alpha_holes: Vec<usize>,
    pub alpha_particles: Vec<usize>,
    pub beta_holes: Vec<usize>,
    pub beta_particles: Vec<usize>,
    pub phase: i8,
}

pub fn excitation_info(d1: &Determinant, d2: &Determinant) -> ExcitationInfo {
    let xa = d1.alpha ^ d2.alpha;
    let xb = d1.beta ^ d2.beta;
    let alpha_holes: Vec<usize> = bits(d1.alpha & xa).collect();
    let alpha_particles: Vec<usize> = bits(d2.alpha & xa).collect();
    let beta_holes: Vec<usize> = bits(d1.beta & xb).collect();
    let beta_particles: Vec<usize> = bits(d2.beta & xb).collect();
    let phase =
        channel_phase(d1.alpha, &alpha_holes, &alpha_particles) * channel_phase(d1.beta, &beta_holes, &beta_particles);
    ExcitationInfo {
        degree: ((xa.count_ones() + xb.count_ones()) / 2) as usize,
        alpha_holes,
        alpha_particles,
        beta_holes,
        beta_particles,
        phase: if phase > 0.0 { 1 } else { -1 },
    }
}

/// Total excitation degree between two determinants of equal particle count.
#[inline]
pub fn degree(d1: &Determinant, d2: &Determinant) -> u32 {
    ((d1.alpha ^ d2.alpha).count_ones() + (d1.beta ^ d2.beta).count_ones()) / 2
}

fn diagonal(d: &Determinant, s: &IntegralSet) -> f64 {
    let mut e = 0.0;
    for i in bits(d.alpha) {
        e += s.h(i, i);
        for j in bits(d.alpha) {
            e += 0.5 * (s.coulomb(i, j) - s.exchange(i, j));
        }
        for j in bits(d.beta) {
            e += s.coulomb(i, j);
        }
    }
    for i in bits(d.beta) {
        e += s.h(i, i);
        for j in bits(d.beta) {
            e += 0.5 * (s.coulomb(i, j) - s.exchange(i, j));
        }
    }
    e
}

/// `h -> p` in the channel whose occupation is `same`; `other` is the
/// opposite channel of the ket-side determinant.
fn single(h: usize, p: usize, same: u64, other: u64, s: &IntegralSet) -> f64 {
    let mut v = s.h(h, p);
    for q in bits(same) {
        v += s.eri(h, p, q, q) - s.eri(h, q, q, p);
    }
    for q in bits(other) {
        v += s.eri(h, p, q, q);
    }
    v * channel_phase(same, &[h], &[p])
}

fn same_spin_double(mask1: u64, mask2: u64, s: &IntegralSet) -> f64 {
    let x = mask1 ^ mask2;
    let mut hs = bits(mask1 & x);
    let mut ps = bits(mask2 & x);
    let (h1, h2) = (hs.next().unwrap(), hs.next().unwrap());
    let (p1, p2) = (ps.next().unwrap(), ps.next().unwrap());
    let v = s.eri(h1, p1, h2, p2) - s.eri(h1, p2, h2, p1);
    v * channel_phase(mask1, &[h1, h2], &[p1, p2])
}

/// `<d1|H|d2>` without the core energy. Zero beyond double excitations.
pub fn slater_condon(d1: &Determinant, d2: &Determinant, s: &IntegralSet) -> f64 {
    let xa = d1.alpha ^ d2.alpha;
    let xb = d1.beta ^ d2.beta;
    match (xa.count_ones(), xb.count_ones()) {
        (0, 0) => diagonal(d1, s),
        (2, 0) => {
            let h = (d1.alpha & xa).trailing_zeros() as usize;
            let p = (d2.alpha & xa).trailing_zeros() as usize;
            single(h, p, d1.alpha, d1.beta, s)
        }
        (0, 2) => {
            let h = (d1.beta & xb).trailing_zeros() as usize;
            let p = (d2.beta & xb).trailing_zeros() as usize;
            single(h, p, d1.beta, d1.alpha, s)
        }
        (4, 0) => same_spin_double(d1.alpha, d2.alpha, s),
        (0, 4) => same_spin_double(d1.beta, d2.beta, s),
        (2, 2) => {
            let ha = (d1.alpha & xa).trailing_zeros() as usize;
            let pa = (d2.alpha & xa).trailing_zeros() as usize;
            let hb = (d1.beta & xb).trailing_zeros() as usize;
            let pb = (d2.beta & xb).trailing_zeros() as usize;
            let phase = channel_phase(d1.alpha, &[ha], &[pa]) * channel_phase(d1.beta, &[hb], &[pb]);
            phase * s.eri(ha, pa, hb, pb)
        }
        _ => 0.0,
    }
}

fn channel_singles(mask: u64, n_orb: usize) -> Vec<u64> {
    let empty = !mask & low_mask(n_orb);
    let mut out = Vec::new();
    for h in bits(mask) {
        for p in bits(empty) {
            out.push(mask ^ (1u64 << h) ^ (1u64 << p));
        }
    }
    out
}

fn channel_doubles(mask: u64, n_orb: usize) -> Vec<u64> {
    let empty = !mask & low_mask(n_orb);
    let occ: Vec<usize> = bits(mask).collect();
    let vir: Vec<usize> = bits(empty).collect();
    let mut out = Vec::new();
    for (i, &h1) in occ.iter().enumerate() {
        for &h2 in &occ[i + 1..] {
            for (j, &p1) in vir.iter().enumerate() {
                for &p2 in &vir[j + 1..] {
                    out.push(mask ^ (1u64 << h1) ^ (1u64 << h2) ^ (1u64 << p1) ^ (1u64 << p2));
                }
            }
        }
    }
    out
}

/// Every determinant one or two excitations away from `reference`, with
/// per-channel electron counts preserved.
pub fn generate_singles_doubles(reference: &Determinant, n_orb: usize) -> Vec<Determinant> {
    let sa = channel_singles(reference.alpha, n_orb);
    let sb = channel_singles(reference.beta, n_orb);
    let mut out = Vec::with_capacity(sa.len() + sb.len() + sa.len() * sb.len());
    out.extend(sa.iter().map(|&a| Determinant::new(a, reference.beta)));
    out.extend(sb.iter().map(|&b| Determinant::new(reference.alpha, b)));
    out.extend(
        channel_doubles(reference.alpha, n_orb)
            .into_iter()
            .map(|a| Determinant::new(a, reference.beta)),
    );
    out.extend(
        channel_doubles(reference.beta, n_orb)
            .into_iter()
            .map(|b| Determinant::new(reference.alpha, b)),
    );
    for &a in &sa {
        for &b in &sb {
            out.push(Determinant::new(a, b));
        }
    }
    out
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:#b}, {:#b})", self.alpha, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn hartree_fock_filling() {
        let s = IntegralSet::new(4, 2, 2).unwrap();
        assert_eq!(hartree_fock_det(&s), Determinant::new(0b0011, 0b0011));
        let s = IntegralSet::new(2, 1, 0).unwrap();
        assert_eq!(hartree_fock_det(&s), Determinant::new(0b01, 0));
        // NH3 active space (15o, 10e, MS2=0)
        let hf = Sector::new(15, 5, 5).unwrap().hartree_fock();
        assert_eq!((hf.n_alpha(), hf.n_beta()), (5, 5));
    }

    #[test]
    fn render_and_parse() {
        let d = Determinant::new(0b0011, 0b0101);
        assert_eq!(d.render(4), "1100|1010");
        assert_eq!(Determinant::parse("1100|1010", 4).unwrap(), d);
        assert_eq!(Determinant::parse("11001010", 4).unwrap(), d);
        assert!(matches!(
            Determinant::parse("110|1010", 4),
            Err(Error::BitstringLength { got: 7, expected: 8 })
        ));
    }

    #[test]
    fn identity_excitation() {
        let d = Determinant::new(0b0011, 0b0011);
        let e = excitation_info(&d, &d);
        assert_eq!(e.degree, 0);
        assert_eq!(e.phase, 1);
    }

    #[test]
    fn adjacent_single() {
        let e = excitation_info(&Determinant::new(0b0011, 0), &Determinant::new(0b0101, 0));
        assert_eq!(e.degree, 1);
        assert_eq!(e.alpha_holes, vec![1]);
        assert_eq!(e.alpha_particles, vec![2]);
        assert_eq!(e.phase, 1);
    }

    #[test]
    fn crossing_single_matches_operator_algebra() {
        // 0b0011 -> 0b0110: electron 0 moves to 2 across occupied orbital 1.
        let d1 = Determinant::new(0b0011, 0);
        let d2 = Determinant::new(0b0110, 0);
        let e = excitation_info(&d1, &d2);
        assert_eq!(e.degree, 1);
        assert_eq!((e.alpha_holes.clone(), e.alpha_particles.clone()), (vec![0], vec![2]));
        // <d2| a+_2 a_0 |d1> from explicit creation/annihilation
        let (sign, state) = oracle::apply_excitation(oracle::fock_index(&d1, 4), 2, 0).unwrap();
        assert_eq!(state, oracle::fock_index(&d2, 4));
        assert_eq!(e.phase as f64, sign);
        assert_eq!(e.phase, -1);
    }

    #[test]
    fn degree_three_vanishes() {
        let s = oracle::random_integrals(4, 2, 3, 1);
        let d1 = Determinant::new(0b0011, 0b0111);
        let d2 = Determinant::new(0b1100, 0b1011);
        assert_eq!(degree(&d1, &d2), 3);
        assert_eq!(slater_condon(&d1, &d2, &s), 0.0);
    }

    #[test]
    fn one_electron_diagonal() {
        let mut s = IntegralSet::new(2, 1, 0).unwrap();
        s.set_one_body(0, 0, -0.8).unwrap();
        s.set_one_body(1, 1, 0.3).unwrap();
        s.set_eri(0, 0, 0, 0, 0.6).unwrap();
        let d = Determinant::new(0b01, 0);
        assert_eq!(slater_condon(&d, &d, &s), -0.8);
    }

    #[test]
    fn singles_doubles_counts() {
        let d = Determinant::new(0b01, 0b01);
        let ex = generate_singles_doubles(&d, 2);
        assert_eq!(ex.len(), 3);

        let hf = Determinant::new(0b0011, 0b0011);
        let ex = generate_singles_doubles(&hf, 4);
        assert_eq!(ex.len(), 26);
        let unique: HashSet<_> = ex.iter().collect();
        assert_eq!(unique.len(), ex.len());
        assert!(!unique.contains(&hf));

        // exhaustive cross-check over the sector
        let sector = Sector::new(4, 2, 2).unwrap();
        let brute: HashSet<Determinant> = crate::sampler::enumerate_sector(&sector)
            .unwrap()
            .into_iter()
            .filter(|d| matches!(degree(&hf, d), 1 | 2))
            .collect();
        assert_eq!(brute, ex.into_iter().collect());
    }

    #[test]
    fn slater_condon_matches_brute_force_matrix() {
        for (n, na, nb, seed) in [(2, 1, 1, 1), (3, 2, 1, 2), (4, 2, 2, 3), (4, 1, 3, 4), (4, 3, 2, 5)] {
            let s = oracle::random_integrals(n, na, nb, seed);
            let full = oracle::brute_force_hamiltonian(&s).unwrap();
            let dets = crate::sampler::enumerate_sector(&Sector::of(&s)).unwrap();
            for a in &dets {
                for b in &dets {
                    let want = full[(oracle::fock_index(a, n), oracle::fock_index(b, n))];
                    let got = slater_condon(a, b, &s) + if a == b { s.e_core() } else { 0.0 };
                    assert!((want - got).abs() < 1e-12, "{a} {b}: {want} vs {got}");
                }
            }
        }
    }

    fn det_strategy(n: usize, na: usize, nb: usize) -> impl Strategy<Value = Determinant> {
        let pick = move |k: usize| {
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), k)
                .prop_map(|v| v.into_iter().fold(0u64, |m, i| m | 1 << i))
        };
        (pick(na), pick(nb)).prop_map(|(a, b)| Determinant::new(a, b))
    }

    proptest! {
        #[test]
        fn hermitian_and_phase_involution(
            d1 in det_strategy(6, 3, 2),
            d2 in det_strategy(6, 3, 2),
        ) {
            let s = oracle::random_integrals(6, 3, 2, 99);
            prop_assert_eq!(slater_condon(&d1, &d2, &s), slater_condon(&d2, &d1, &s));
            let fwd = excitation_info(&d1, &d2);
            let back = excitation_info(&d2, &d1);
            prop_assert_eq!(fwd.phase * back.phase, 1);
            prop_assert_eq!(fwd.degree as u32, degree(&d1, &d2));
        }

        #[test]
        fn singles_doubles_stay_in_sector(d in det_strategy(7, 3, 4)) {
            let sector = Sector::new(7, 3, 4).unwrap();
            for e in generate_singles_doubles(&d, 7) {
                prop_assert!(sector.contains(&e));
                prop_assert!(matches!(degree(&d, &e), 1 | 2));
            }
        }
    }
}
