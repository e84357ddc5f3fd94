//! The trial determinant space and every transform the iteration applies
//! to it: symmetry filtering of raw samples, k-cap and amplitude screening,
//! classical singles/doubles expansion, alpha/beta tensor reconstruction
//! and union.
//!
//! All rankings are stable, with the determinant mask order as final key.
//! The Hartree-Fock determinant is never screened out.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinants::{generate_singles_doubles, slater_condon, Determinant, Sector};
use crate::eigensolver::{ground_state, project, CIVector, Mode, SolverOptions};
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;
use crate::sampler::SampleBatch;

#[derive(Debug, Clone)]
pub struct Subspace {
    sector: Sector,
    dets: Vec<Determinant>,
    index: HashMap<Determinant, usize>,
    expanded: BTreeSet<Determinant>,
}

impl PartialEq for Subspace {
    fn eq(&self, other: &Self) -> bool {
        self.sector == other.sector && self.dets == other.dets && self.expanded == other.expanded
    }
}

impl Subspace {
    pub fn new(sector: Sector) -> Self {
        Self {
            sector,
            dets: Vec::new(),
            index: HashMap::new(),
            expanded: BTreeSet::new(),
        }
    }

    pub fn from_dets(sector: Sector, dets: impl IntoIterator<Item = Determinant>) -> Result<Self> {
        let mut s = Self::new(sector);
        for d in dets {
            s.push(d)?;
        }
        Ok(s)
    }

    /// Appends `d` unless already present. Returns whether it was new.
    pub fn push(&mut self, d: Determinant) -> Result<bool> {
        if !self.sector.contains(&d) {
            return Err(Error::SectorViolation(d.render(self.sector.n_orb)));
        }
        if self.index.contains_key(&d) {
            return Ok(false);
        }
        self.index.insert(d, self.dets.len());
        self.dets.push(d);
        Ok(true)
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn dets(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn index_of(&self, d: &Determinant) -> Option<usize> {
        self.index.get(d).copied()
    }

    pub fn contains(&self, d: &Determinant) -> bool {
        self.index.contains_key(d)
    }

    pub fn expanded_refs(&self) -> &BTreeSet<Determinant> {
        &self.expanded
    }

    pub fn mark_expanded(&mut self, d: Determinant) {
        self.expanded.insert(d);
    }

    fn hartree_fock(&self) -> Determinant {
        self.sector.hartree_fock()
    }

    /// Keeps the determinants at `keep` positions, in their current order.
    fn retain_positions(&self, keep: &[bool]) -> Subspace {
        let mut out = Subspace::new(self.sector);
        out.expanded = self.expanded.clone();
        for (d, &k) in self.dets.iter().zip(keep) {
            if k {
                out.index.insert(*d, out.dets.len());
                out.dets.push(*d);
            }
        }
        out
    }

    fn check_aligned(&self, c: &CIVector) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "CI vector",
                got: c.len(),
                expected: self.len(),
            });
        }
        Ok(())
    }

    /// One `alpha|beta` occupation string per line.
    pub fn to_dump(&self) -> String {
        self.dets.iter().map(|d| d.render(self.sector.n_orb) + "\n").collect()
    }

    pub fn from_dump(text: &str, sector: Sector) -> Result<Self> {
        let mut s = Self::new(sector);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            s.push(Determinant::parse(line, sector.n_orb)?)?;
        }
        Ok(s)
    }
}

/// What to do with samples outside the sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    #[default]
    Discard,
    Recover,
}

/// Mean spin-orbital occupations used as the recovery target.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Occupancy {
    /// Integer occupations of a single determinant.
    pub fn of_determinant(d: &Determinant, n_orb: usize) -> Self {
        let occ = |m: u64| (0..n_orb).map(|p| (m >> p & 1) as f64).collect();
        Self {
            alpha: occ(d.alpha),
            beta: occ(d.beta),
        }
    }

    /// `sum_i |c_i|^2 n_p(d_i)` per spin channel.
    pub fn of_wavefunction(dets: &[Determinant], c: &[f64], n_orb: usize) -> Self {
        let mut o = Self {
            alpha: vec![0.0; n_orb],
            beta: vec![0.0; n_orb],
        };
        for (d, &a) in dets.iter().zip(c) {
            let w = a * a;
            for p in crate::determinants::bits(d.alpha) {
                o.alpha[p] += w;
            }
            for p in crate::determinants::bits(d.beta) {
                o.beta[p] += w;
            }
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    /// Sector-valid determinants with merged shot counts, in mask order.
    pub configs: Vec<(Determinant, u64)>,
    pub valid_shots: u64,
    pub invalid_shots: u64,
    /// Invalid shots repaired by recovery (subset of `valid_shots`).
    pub recovered_shots: u64,
}

impl FilterOutcome {
    pub fn dets(&self) -> impl Iterator<Item = Determinant> + '_ {
        self.configs.iter().map(|(d, _)| *d)
    }
}

/// Flips bits of one channel toward `target` electrons. Each step flips the
/// bit whose value is furthest from its mean occupation (lowest index on
/// ties): a set bit when there are too many electrons, a clear one otherwise.
fn recover_channel(mut mask: u64, target: usize, hint: &[f64]) -> u64 {
    while (mask.count_ones() as usize) != target {
        let too_many = (mask.count_ones() as usize) > target;
        let mut best: Option<(usize, f64)> = None;
        for (p, &h) in hint.iter().enumerate() {
            let bit = (mask >> p & 1) as f64;
            if (bit == 1.0) != too_many {
                continue;
            }
            let dist = (bit - h).abs();
            if best.is_none_or(|(_, d)| dist > d) {
                best = Some((p, dist));
            }
        }
        match best {
            Some((p, _)) => mask ^= 1 << p,
            None => break,
        }
    }
    mask
}

/// Keeps (or repairs) the samples that belong to `sector`.
pub fn filter_symmetry(
    batch: &SampleBatch,
    sector: &Sector,
    mode: RecoveryMode,
    occupancy_hint: Option<&Occupancy>,
) -> Result<FilterOutcome> {
    if batch.n_orb != sector.n_orb {
        return Err(Error::BitstringLength {
            got: 2 * batch.n_orb,
            expected: 2 * sector.n_orb,
        });
    }
    let hint = match mode {
        RecoveryMode::Recover => {
            Some(occupancy_hint.ok_or_else(|| Error::Config("recovery mode requires an occupancy hint".into()))?)
        }
        RecoveryMode::Discard => None,
    };
    if let Some(h) = hint {
        if h.alpha.len() != sector.n_orb || h.beta.len() != sector.n_orb {
            return Err(Error::LengthMismatch {
                what: "occupancy hint",
                got: h.alpha.len().min(h.beta.len()),
                expected: sector.n_orb,
            });
        }
    }
    let mut merged: BTreeMap<Determinant, u64> = BTreeMap::new();
    let mut out = FilterOutcome::default();
    for (&bits, &count) in &batch.counts {
        if !bits.fits(sector.n_orb) {
            let top = 64 - bits.alpha.leading_zeros().min(bits.beta.leading_zeros()) as usize;
            return Err(Error::BitstringLength {
                got: sector.n_orb + top,
                expected: 2 * sector.n_orb,
            });
        }
        if sector.contains(&bits) {
            *merged.entry(bits).or_insert(0) += count;
            out.valid_shots += count;
            continue;
        }
        out.invalid_shots += count;
        if let Some(h) = hint {
            let fixed = Determinant::new(
                recover_channel(bits.alpha, sector.n_alpha, &h.alpha),
                recover_channel(bits.beta, sector.n_beta, &h.beta),
            );
            if sector.contains(&fixed) {
                *merged.entry(fixed).or_insert(0) += count;
                out.valid_shots += count;
                out.recovered_shots += count;
            }
        }
    }
    out.configs = merged.into_iter().collect();
    Ok(out)
}

/// Ranks positions by |amplitude| descending, determinant order ascending on
/// ties, with the Hartree-Fock determinant first.
fn importance_order(sub: &Subspace, amps: &[f64]) -> Vec<usize> {
    let hf = sub.hartree_fock();
    let mut order: Vec<usize> = (0..sub.len()).collect();
    order.sort_by(|&i, &j| {
        let (di, dj) = (&sub.dets[i], &sub.dets[j]);
        (*dj == hf)
            .cmp(&(*di == hf))
            .then(amps[j].abs().total_cmp(&amps[i].abs()))
            .then(di.cmp(dj))
    });
    order
}

/// Caps the subspace at `k` determinants using loosely converged amplitudes.
pub fn cap_screen(sub: &Subspace, k: usize, s: &IntegralSet, opts: &SolverOptions) -> Result<Subspace> {
    if k == 0 {
        return Err(Error::Config("cap k must be at least 1".into()));
    }
    if sub.len() <= k {
        return Ok(sub.clone());
    }
    let h = project(sub.dets(), s);
    let c = ground_state(&h, Mode::Loose, None, opts)?;
    let mut keep = vec![false; sub.len()];
    for &i in importance_order(sub, &c.amplitudes).iter().take(k) {
        keep[i] = true;
    }
    Ok(sub.retain_positions(&keep))
}

/// Drops determinants with |amplitude| below `threshold`.
pub fn amplitude_screen(sub: &Subspace, c: &CIVector, threshold: f64) -> Result<Subspace> {
    sub.check_aligned(c)?;
    let hf = sub.hartree_fock();
    let keep: Vec<bool> = sub
        .dets
        .iter()
        .zip(&c.amplitudes)
        .map(|(d, a)| a.abs() >= threshold || *d == hf)
        .collect();
    Ok(sub.retain_positions(&keep))
}

/// Expands the most important not-yet-expanded determinant: adds the `m`
/// singles/doubles with the largest |<ref|H|d>| that are not already present.
pub fn classical_expand(sub: &Subspace, c: &CIVector, m: usize, s: &IntegralSet) -> Result<Subspace> {
    sub.check_aligned(c)?;
    let order = {
        let mut o: Vec<usize> = (0..sub.len()).collect();
        o.sort_by(|&i, &j| {
            c.amplitudes[j]
                .abs()
                .total_cmp(&c.amplitudes[i].abs())
                .then(sub.dets[i].cmp(&sub.dets[j]))
        });
        o
    };
    let Some(reference) = order
        .into_iter()
        .map(|i| sub.dets[i])
        .find(|d| !sub.expanded.contains(d))
    else {
        return Ok(sub.clone());
    };

    let mut out = sub.clone();
    out.mark_expanded(reference);
    if m == 0 {
        return Ok(out);
    }
    let mut ranked: Vec<(f64, Determinant)> = generate_singles_doubles(&reference, sub.sector.n_orb)
        .into_par_iter()
        .filter(|d| !sub.contains(d))
        .map(|d| (slater_condon(&reference, &d, s).abs(), d))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, d) in ranked.into_iter().take(m) {
        out.push(d)?;
    }
    Ok(out)
}

/// Rebuilds the subspace as the product of its distinct alpha and beta
/// strings. In closed-shell mode both channels draw from the union of the
/// two string sets.
pub fn tensor_reconstruct(sub: &Subspace, closed_shell: bool) -> Result<Subspace> {
    let sector = sub.sector;
    let alphas: BTreeSet<u64> = sub.dets.iter().map(|d| d.alpha).collect();
    let betas: BTreeSet<u64> = sub.dets.iter().map(|d| d.beta).collect();
    let (alphas, betas) = if closed_shell {
        if sector.n_alpha != sector.n_beta {
            return Err(Error::NotClosedShell {
                n_alpha: sector.n_alpha,
                n_beta: sector.n_beta,
            });
        }
        let all: BTreeSet<u64> = alphas.union(&betas).copied().collect();
        (all.clone(), all)
    } else {
        (alphas, betas)
    };
    let mut out = sub.clone();
    for &a in &alphas {
        for &b in &betas {
            out.push(Determinant::new(a, b))?;
        }
    }
    Ok(out)
}

/// Appends unseen determinants, keeping first-seen order.
pub fn union(sub: &Subspace, dets: impl IntoIterator<Item = Determinant>) -> Result<Subspace> {
    let mut out = sub.clone();
    for d in dets {
        out.push(d)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinants::degree;
    use crate::oracle;
    use crate::sampler::enumerate_sector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(s: &str, n: usize) -> Determinant {
        Determinant::parse(s, n).unwrap()
    }

    fn civ(a: Vec<f64>) -> CIVector {
        CIVector {
            amplitudes: a,
            energy: 0.0,
        }
    }

    #[test]
    fn filter_valid_batch() {
        let sector = Sector::new(4, 2, 2).unwrap();
        let mut b = SampleBatch::new(4);
        b.add_str("1100|1100", 10).unwrap();
        let f = filter_symmetry(&b, &sector, RecoveryMode::Discard, None).unwrap();
        assert_eq!(f.configs, vec![(d("1100|1100", 4), 10)]);
    }

    #[test]
    fn filter_discard() {
        let sector = Sector::new(4, 2, 2).unwrap();
        let mut b = SampleBatch::new(4);
        b.add_str("1110|1100", 5).unwrap();
        let f = filter_symmetry(&b, &sector, RecoveryMode::Discard, None).unwrap();
        assert!(f.configs.is_empty());
        assert_eq!(f.invalid_shots, 5);
    }

    #[test]
    fn filter_recover() {
        let sector = Sector::new(4, 2, 2).unwrap();
        let mut b = SampleBatch::new(4);
        b.add_str("1110|1100", 5).unwrap();
        b.add_str("1100|1100", 2).unwrap();
        let hint = Occupancy {
            alpha: vec![0.9, 0.9, 0.1, 0.1],
            beta: vec![0.9, 0.9, 0.1, 0.1],
        };
        let f = filter_symmetry(&b, &sector, RecoveryMode::Recover, Some(&hint)).unwrap();
        // repaired sample merges with the already-valid one
        assert_eq!(f.configs, vec![(d("1100|1100", 4), 7)]);
        assert_eq!(f.recovered_shots, 5);

        // exhaustive single-flip search minimizing occupancy disagreement
        let raw = d("1110|1100", 4);
        let best = (0..4)
            .map(|p| raw.alpha ^ (1 << p))
            .filter(|m| m.count_ones() == 2)
            .min_by(|x, y| {
                let cost = |m: &u64| (0..4).map(|p| ((m >> p & 1) as f64 - hint.alpha[p]).abs()).sum::<f64>();
                cost(x).total_cmp(&cost(y))
            })
            .unwrap();
        assert_eq!(best, d("1100|1100", 4).alpha);
    }

    #[test]
    fn filter_needs_hint_and_matching_length() {
        let sector = Sector::new(4, 2, 2).unwrap();
        let b = SampleBatch::new(4);
        assert!(filter_symmetry(&b, &sector, RecoveryMode::Recover, None).is_err());
        let wrong = SampleBatch::new(3);
        assert!(matches!(
            filter_symmetry(&wrong, &sector, RecoveryMode::Discard, None),
            Err(Error::BitstringLength { .. })
        ));
        let mut over = SampleBatch::new(4);
        over.add(Determinant::new(0b10011, 0b11), 1);
        assert!(matches!(
            filter_symmetry(&over, &sector, RecoveryMode::Discard, None),
            Err(Error::BitstringLength { .. })
        ));
    }

    #[test]
    fn cap_screen_boundaries() {
        let s = oracle::random_integrals(3, 1, 1, 4);
        let sector = Sector::of(&s);
        let sub = Subspace::from_dets(sector, enumerate_sector(&sector).unwrap().into_iter().take(5)).unwrap();
        let opts = SolverOptions::default();
        assert_eq!(cap_screen(&sub, 10, &s, &opts).unwrap(), sub);
        assert_eq!(cap_screen(&sub, 5, &s, &opts).unwrap(), sub);
        assert!(cap_screen(&sub, 0, &s, &opts).is_err());
    }

    #[test]
    fn cap_screen_keeps_dominant() {
        // H2 minimal basis: the ground state is dominated by the HF determinant
        let s = crate::integrals::parse_fcidump(include_str!("../tests/fixtures/h2_0.74.fcidump")).unwrap();
        let sector = Sector::of(&s);
        let dets = enumerate_sector(&sector).unwrap();
        let sub = Subspace::from_dets(sector, dets.iter().rev().copied()).unwrap();
        let h = oracle::restrict(&oracle::brute_force_hamiltonian(&s).unwrap(), sub.dets(), 2);
        let eig = h.symmetric_eigen();
        let v = eig.eigenvectors.column(eig.eigenvalues.imin());
        let argmax = v.iamax();
        let capped = cap_screen(&sub, 1, &s, &SolverOptions::default()).unwrap();
        assert_eq!(capped.dets(), &[sub.dets()[argmax]]);
        assert_eq!(capped.dets()[0], sector.hartree_fock());
    }

    #[test]
    fn amplitude_screen_cases() {
        let sector = Sector::new(3, 1, 1).unwrap();
        let dets = enumerate_sector(&sector).unwrap();
        let sub = Subspace::from_dets(sector, dets[3..6].iter().copied()).unwrap();
        let c = civ(vec![0.99, 1e-8, 0.14]);
        assert_eq!(amplitude_screen(&sub, &c, 0.0).unwrap(), sub);
        let kept = amplitude_screen(&sub, &c, 1e-6).unwrap();
        assert_eq!(kept.dets(), &[dets[3], dets[5]]);
        assert!(amplitude_screen(&sub, &civ(vec![1.0]), 0.1).is_err());
        // HF survives regardless of amplitude
        let with_hf = Subspace::from_dets(sector, [sector.hartree_fock(), dets[4]]).unwrap();
        let kept = amplitude_screen(&with_hf, &civ(vec![0.0, 1.0]), 0.5).unwrap();
        assert_eq!(kept, with_hf);
    }

    #[test]
    fn amplitude_screen_sort_oracle() {
        let sector = Sector::new(8, 2, 1).unwrap();
        let dets: Vec<Determinant> = enumerate_sector(&sector)
            .unwrap()
            .into_iter()
            .filter(|d| *d != sector.hartree_fock())
            .take(50)
            .collect();
        let sub = Subspace::from_dets(sector, dets).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        a.iter_mut().for_each(|x| *x /= n);
        let mut mags: Vec<f64> = a.iter().map(|x| x.abs()).collect();
        mags.sort_by(|x, y| y.total_cmp(x));
        let kept = amplitude_screen(&sub, &civ(a), mags[24]).unwrap();
        assert_eq!(kept.len(), 25);
    }

    #[test]
    fn expand_m_zero_marks_reference() {
        let s = oracle::random_integrals(3, 1, 1, 6);
        let sector = Sector::of(&s);
        let sub = Subspace::from_dets(sector, [sector.hartree_fock()]).unwrap();
        let out = classical_expand(&sub, &civ(vec![1.0]), 0, &s).unwrap();
        assert_eq!(out.dets(), sub.dets());
        assert!(out.expanded_refs().contains(&sector.hartree_fock()));
        // nothing left to expand
        let again = classical_expand(&out, &civ(vec![1.0]), 5, &s).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn expand_h2_fills_sector() {
        let s = crate::integrals::parse_fcidump(include_str!("../tests/fixtures/h2_0.74.fcidump")).unwrap();
        let sector = Sector::of(&s);
        let sub = Subspace::from_dets(sector, [sector.hartree_fock()]).unwrap();
        let out = classical_expand(&sub, &civ(vec![1.0]), 3, &s).unwrap();
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn expand_matches_exhaustive_ranking() {
        let s = oracle::random_integrals(4, 2, 2, 12);
        let sector = Sector::of(&s);
        let hf = sector.hartree_fock();
        let sub = Subspace::from_dets(sector, [hf]).unwrap();
        let out = classical_expand(&sub, &civ(vec![1.0]), 5, &s).unwrap();
        // oracle: couplings from the dense brute-force matrix over the sector
        let full = oracle::brute_force_hamiltonian(&s).unwrap();
        let mut all: Vec<(f64, Determinant)> = enumerate_sector(&sector)
            .unwrap()
            .into_iter()
            .filter(|d| *d != hf)
            .map(|d| (full[(oracle::fock_index(&hf, 4), oracle::fock_index(&d, 4))].abs(), d))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let want: BTreeSet<Determinant> = all.iter().take(5).map(|x| x.1).collect();
        let got: BTreeSet<Determinant> = out.dets()[1..].iter().copied().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn tensor_cases() {
        let sector = Sector::new(4, 2, 2).unwrap();
        let (a1, a2) = (0b0011u64, 0b0101u64);
        let (b1, b2) = (0b1001u64, 0b0110u64);
        let sub = Subspace::from_dets(sector, [Determinant::new(a1, b1), Determinant::new(a2, b2)]).unwrap();
        let t = tensor_reconstruct(&sub, false).unwrap();
        assert_eq!(t.len(), 4);
        for a in [a1, a2] {
            for b in [b1, b2] {
                assert!(t.contains(&Determinant::new(a, b)));
            }
        }
        let single = Subspace::from_dets(sector, [Determinant::new(a1, b1)]).unwrap();
        assert_eq!(tensor_reconstruct(&single, false).unwrap(), single);

        let (x, y, z) = (0b0011u64, 0b0101u64, 0b1100u64);
        let cs = Subspace::from_dets(sector, [Determinant::new(x, x), Determinant::new(y, z)]).unwrap();
        assert_eq!(tensor_reconstruct(&cs, true).unwrap().len(), 9);

        let open = Sector::new(4, 2, 1).unwrap();
        let sub = Subspace::from_dets(open, [open.hartree_fock()]).unwrap();
        assert!(matches!(
            tensor_reconstruct(&sub, true),
            Err(Error::NotClosedShell { .. })
        ));
    }

    #[test]
    fn union_cases() {
        let sector = Sector::new(3, 1, 1).unwrap();
        let dets = enumerate_sector(&sector).unwrap();
        let s = Subspace::from_dets(sector, [dets[0]]).unwrap();
        assert_eq!(union(&s, []).unwrap(), s);
        assert_eq!(union(&s, s.dets().to_vec()).unwrap(), s);
        let u = union(&s, [dets[1], dets[0]]).unwrap();
        assert_eq!(u.dets(), &[dets[0], dets[1]]);
        assert!(matches!(
            union(&s, [Determinant::new(0b11, 0b1)]),
            Err(Error::SectorViolation(_))
        ));
    }

    #[test]
    fn dump_round_trip() {
        let sector = Sector::new(4, 2, 1).unwrap();
        let sub = Subspace::from_dets(sector, enumerate_sector(&sector).unwrap().into_iter().step_by(3)).unwrap();
        assert!(sub.to_dump().starts_with("1100|1000\n"));
        let back = Subspace::from_dump(&sub.to_dump(), sector).unwrap();
        assert_eq!(back.dets(), sub.dets());
    }

    fn arbitrary_batch(n: usize) -> impl Strategy<Value = Vec<(u64, u64, u64)>> {
        proptest::collection::vec((0u64..(1 << n), 0u64..(1 << n), 1u64..20), 1..40)
    }

    proptest! {
        #[test]
        fn pipeline_preserves_invariants(raw in arbitrary_batch(5), recover in any::<bool>(), seed in 0u64..100) {
            let s = oracle::random_integrals(5, 2, 2, seed);
            let sector = Sector::of(&s);
            let mut batch = SampleBatch::new(5);
            for (a, b, c) in raw {
                batch.add(Determinant::new(a, b), c);
            }
            let hint = Occupancy::of_determinant(&sector.hartree_fock(), 5);
            let mode = if recover { RecoveryMode::Recover } else { RecoveryMode::Discard };
            let f = filter_symmetry(&batch, &sector, mode, Some(&hint)).unwrap();
            prop_assert_eq!(f.valid_shots + f.invalid_shots - f.recovered_shots, batch.total_shots);
            if recover {
                prop_assert_eq!(f.invalid_shots, f.recovered_shots);
            }
            let base = Subspace::from_dets(sector, [sector.hartree_fock()]).unwrap();
            let sub = union(&base, f.dets()).unwrap();
            let t = tensor_reconstruct(&sub, true).unwrap();
            prop_assert_eq!(&tensor_reconstruct(&t, true).unwrap(), &t);
            prop_assert!(sub.dets().iter().all(|d| t.contains(d)));

            let h = project(t.dets(), &s);
            let c = ground_state(&h, Mode::Tight, None, &SolverOptions::default()).unwrap();
            let screened = amplitude_screen(&t, &c, 0.05).unwrap();
            let positions: Vec<usize> = screened.dets().iter().map(|d| t.index_of(d).unwrap()).collect();
            let c2 = civ(positions.iter().map(|&i| c.amplitudes[i]).collect());
            prop_assert_eq!(&amplitude_screen(&screened, &c2, 0.05).unwrap(), &screened);

            let expanded = classical_expand(&t, &c, 7, &s).unwrap();
            let reference = *expanded.expanded_refs().iter().next().unwrap();
            for d in &expanded.dets()[t.len()..] {
                prop_assert!(matches!(degree(&reference, d), 1 | 2));
            }
            for out in [&sub, &t, &screened, &expanded] {
                let uniq: BTreeSet<_> = out.dets().iter().collect();
                prop_assert_eq!(uniq.len(), out.len());
                prop_assert!(out.dets().iter().all(|d| sector.contains(d)));
                for (i, d) in out.dets().iter().enumerate() {
                    prop_assert_eq!(out.index_of(d), Some(i));
                }
            }
        }
    }
}
