//! Simulated quantum sampler restricted to one symmetry sector.
//!
//! The ansatz is a brick wall of real Givens rotations between adjacent
//! orbitals inside each spin channel. It conserves particle number per
//! channel, so the state never leaves the sector and can be stored as one
//! amplitude per sector determinant.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::determinants::{bits, low_mask, Determinant, Sector};
use crate::error::{Error, Result};

/// Refuse to enumerate sectors beyond this many determinants (~4 GiB).
pub const MAX_ENUMERATED: usize = 1 << 28;

/// All `n_orb`-bit masks with `k` bits set, ascending.
pub fn channel_strings(n_orb: usize, k: usize) -> Vec<u64> {
    if k > n_orb {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut m = low_mask(k);
    let end = 1u128 << n_orb;
    while (m as u128) < end {
        out.push(m);
        // Gosper's hack
        let c = m & m.wrapping_neg();
        let r = m.wrapping_add(c);
        if r == 0 {
            break;
        }
        m = (((r ^ m) >> 2) / c) | r;
    }
    out
}

/// Every sector determinant, ordered by `(alpha, beta)`.
pub fn enumerate_sector(sector: &Sector) -> Result<Vec<Determinant>> {
    let size = sector.size();
    if size > MAX_ENUMERATED.into() {
        return Err(Error::SectorTooLarge {
            count: size.to_string(),
            limit: MAX_ENUMERATED,
        });
    }
    let alphas = channel_strings(sector.n_orb, sector.n_alpha);
    let betas = channel_strings(sector.n_orb, sector.n_beta);
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &a in &alphas {
        out.extend(betas.iter().map(|&b| Determinant::new(a, b)));
    }
    Ok(out)
}

/// Sector enumeration with rank lookup; index = rank(alpha) * n_beta_strings + rank(beta).
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sector: Sector,
    alphas: Vec<u64>,
    betas: Vec<u64>,
    alpha_rank: HashMap<u64, usize>,
    beta_rank: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn new(sector: Sector) -> Result<Self> {
        let size = sector.size();
        if size > MAX_ENUMERATED.into() {
            return Err(Error::SectorTooLarge {
                count: size.to_string(),
                limit: MAX_ENUMERATED,
            });
        }
        let alphas = channel_strings(sector.n_orb, sector.n_alpha);
        let betas = channel_strings(sector.n_orb, sector.n_beta);
        let rank = |v: &[u64]| v.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self {
            sector,
            alpha_rank: rank(&alphas),
            beta_rank: rank(&betas),
            alphas,
            betas,
        })
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn len(&self) -> usize {
        self.alphas.len() * self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn det(&self, i: usize) -> Determinant {
        let nb = self.betas.len();
        Determinant::new(self.alphas[i / nb], self.betas[i % nb])
    }

    pub fn index(&self, d: &Determinant) -> Option<usize> {
        let a = self.alpha_rank.get(&d.alpha)?;
        let b = self.beta_rank.get(&d.beta)?;
        Some(a * self.betas.len() + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Alpha,
    Beta,
}

/// Givens rotation between spatial orbitals `p` and `q` of one spin channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rotation {
    pub spin: Spin,
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_orb: usize,
    pub n_layers: usize,
    /// Rotations applied, in order, by every layer.
    pub layer: Vec<Rotation>,
}

impl AnsatzSpec {
    /// Even then odd adjacent pairs, alpha channel first, repeated `n_layers` times.
    pub fn brick_wall(n_orb: usize, n_layers: usize) -> Self {
        let mut layer = Vec::new();
        for spin in [Spin::Alpha, Spin::Beta] {
            for start in [0, 1] {
                let mut p = start;
                while p + 1 < n_orb {
                    layer.push(Rotation { spin, p, q: p + 1 });
                    p += 2;
                }
            }
        }
        Self { n_orb, n_layers, layer }
    }

    pub fn n_params(&self) -> usize {
        self.n_layers * self.layer.len()
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.layer {
            if r.p >= self.n_orb || r.q >= self.n_orb || r.p == r.q {
                return Err(Error::Config(format!(
                    "rotation ({}, {}) invalid for {} orbitals",
                    r.p, r.q, self.n_orb
                )));
            }
        }
        Ok(())
    }
}

/// Real amplitudes over the enumerated sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    pub amplitudes: Vec<f64>,
}

impl SectorState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Measurement distribution `|<d|psi>|^2`, aligned with the basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }
}

/// Sign of `a+_q a_p` acting on channel occupation `mask` (p occupied, q empty).
fn hop_sign(mask: u64, p: usize, q: usize) -> f64 {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let between = bits(mask).filter(|&i| i > lo && i < hi).count();
    if between % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn rotate(amps: &mut [f64], basis: &SectorBasis, rot: &Rotation, theta: f64) {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let nb = basis.betas.len();
    let (p, q) = (rot.p, rot.q);
    let mp = 1u64 << p;
    let mq = 1u64 << q;
    match rot.spin {
        Spin::Alpha => {
            for (ra, &a) in basis.alphas.iter().enumerate() {
                if a & mp == 0 || a & mq != 0 {
                    continue;
                }
                let rb = basis.alpha_rank[&(a ^ mp ^ mq)];
                let sign = hop_sign(a, p, q);
                for k in 0..nb {
                    let (i, j) = (ra * nb + k, rb * nb + k);
                    let (x, y) = (amps[i], amps[j]);
                    amps[i] = c * x - sign * s * y;
                    amps[j] = c * y + sign * s * x;
                }
            }
        }
        Spin::Beta => {
            for (ra, &b) in basis.betas.iter().enumerate() {
                if b & mp == 0 || b & mq != 0 {
                    continue;
                }
                let rb = basis.beta_rank[&(b ^ mp ^ mq)];
                let sign = hop_sign(b, p, q);
                for k in 0..basis.alphas.len() {
                    let (i, j) = (k * nb + ra, k * nb + rb);
                    let (x, y) = (amps[i], amps[j]);
                    amps[i] = c * x - sign * s * y;
                    amps[j] = c * y + sign * s * x;
                }
            }
        }
    }
}

/// `U(theta)|HF>`: each rotation applies `exp(theta/2 (a+_q a_p - a+_p a_q))`.
pub fn prepare_state(spec: &AnsatzSpec, theta: &[f64], basis: &SectorBasis) -> Result<SectorState> {
    if theta.len() != spec.n_params() {
        return Err(Error::LengthMismatch {
            what: "parameter vector",
            got: theta.len(),
            expected: spec.n_params(),
        });
    }
    spec.validate()?;
    if spec.n_orb != basis.sector.n_orb {
        return Err(Error::Config(format!(
            "ansatz built for {} orbitals, sector has {}",
            spec.n_orb, basis.sector.n_orb
        )));
    }
    let mut amps = vec![0.0; basis.len()];
    let hf = basis.sector.hartree_fock();
    amps[basis.index(&hf).expect("HF determinant is in its own sector")] = 1.0;
    let per_layer = spec.layer.len();
    for (k, &t) in theta.iter().enumerate() {
        if t != 0.0 {
            rotate(&mut amps, basis, &spec.layer[k % per_layer], t);
        }
    }
    Ok(SectorState { amplitudes: amps })
}

/// Independent per-bit readout flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p_flip: f64,
}

impl NoiseModel {
    pub fn new(p_flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_flip) {
            return Err(Error::Config(format!("p_flip={p_flip} outside [0, 1]")));
        }
        Ok(Self { p_flip })
    }

    pub fn noiseless() -> Self {
        Self { p_flip: 0.0 }
    }
}

/// Raw measurement outcomes. Bitstrings are held as (alpha, beta) masks
/// over `n_orb` orbitals but carry no particle-number guarantee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    pub n_orb: usize,
    pub counts: BTreeMap<Determinant, u64>,
    pub total_shots: u64,
}

impl SampleBatch {
    pub fn new(n_orb: usize) -> Self {
        Self {
            n_orb,
            counts: BTreeMap::new(),
            total_shots: 0,
        }
    }

    pub fn add(&mut self, bits: Determinant, count: u64) {
        *self.counts.entry(bits).or_insert(0) += count;
        self.total_shots += count;
    }

    /// Adds a `2 * n_orb` character bitstring (an optional `|` is ignored).
    pub fn add_str(&mut self, bitstring: &str, count: u64) -> Result<()> {
        let d = Determinant::parse(bitstring, self.n_orb)?;
        self.add(d, count);
        Ok(())
    }

    /// `<bitstring> <count>` per line.
    pub fn to_log(&self) -> String {
        self.counts
            .iter()
            .map(|(d, c)| format!("{} {c}\n", d.render(self.n_orb)))
            .collect()
    }

    pub fn from_log(text: &str, n_orb: usize) -> Result<Self> {
        let mut b = Self::new(n_orb);
        for (i, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [] => continue,
                [bits, count] => {
                    let count = count.parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("bad count `{count}`"),
                    })?;
                    b.add_str(bits, count)?;
                }
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "expected `<bitstring> <count>`".into(),
                    })
                }
            }
        }
        Ok(b)
    }
}

/// Draws `shots` i.i.d. outcomes from `|amplitude|^2`, then applies readout
/// flips. Deterministic for a given seed.
pub fn sample(state: &SectorState, basis: &SectorBasis, shots: u64, noise: &NoiseModel, seed: u64) -> SampleBatch {
    let n_orb = basis.sector.n_orb;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = state.probabilities();
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut batch = SampleBatch::new(n_orb);
    for _ in 0..shots {
        let u = rng.gen::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= u).min(last_nonzero);
        let mut d = basis.det(idx);
        if noise.p_flip > 0.0 {
            for bit in 0..2 * n_orb {
                if rng.gen_bool(noise.p_flip) {
                    if bit < n_orb {
                        d.alpha ^= 1 << bit;
                    } else {
                        d.beta ^= 1 << (bit - n_orb);
                    }
                }
            }
        }
        batch.add(d, 1);
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use std::f64::consts::PI;

    fn basis(n: usize, a: usize, b: usize) -> SectorBasis {
        SectorBasis::new(Sector::new(n, a, b).unwrap()).unwrap()
    }

    #[test]
    fn sector_counts() {
        assert_eq!(Sector::new(12, 6, 6).unwrap().size().to_string(), "853776");
        assert_eq!(Sector::new(15, 5, 5).unwrap().size().to_string(), "9018009");
        assert_eq!(channel_strings(5, 2).len(), 10);
        assert_eq!(channel_strings(64, 64), vec![u64::MAX]);
        assert_eq!(channel_strings(3, 0), vec![0]);
    }

    #[test]
    fn tiny_sector_order() {
        let dets = enumerate_sector(&Sector::new(2, 1, 1).unwrap()).unwrap();
        assert_eq!(
            dets,
            vec![
                Determinant::new(0b01, 0b01),
                Determinant::new(0b01, 0b10),
                Determinant::new(0b10, 0b01),
                Determinant::new(0b10, 0b10),
            ]
        );
        let b = basis(2, 1, 1);
        for (i, d) in dets.iter().enumerate() {
            assert_eq!(b.det(i), *d);
            assert_eq!(b.index(d), Some(i));
        }
    }

    #[test]
    fn oversized_sector_rejected() {
        assert!(matches!(
            enumerate_sector(&Sector::new(20, 7, 7).unwrap()),
            Err(Error::SectorTooLarge { .. })
        ));
    }

    #[test]
    fn identity_circuit_is_hartree_fock() {
        let b = basis(4, 2, 1);
        let spec = AnsatzSpec::brick_wall(4, 2);
        let st = prepare_state(&spec, &vec![0.0; spec.n_params()], &b).unwrap();
        let hf = b.index(&Sector::new(4, 2, 1).unwrap().hartree_fock()).unwrap();
        for (i, a) in st.amplitudes.iter().enumerate() {
            assert_eq!(*a, if i == hf { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn half_angle_rotation() {
        let b = basis(2, 1, 0);
        let spec = AnsatzSpec {
            n_orb: 2,
            n_layers: 1,
            layer: vec![Rotation {
                spin: Spin::Alpha,
                p: 0,
                q: 1,
            }],
        };
        let st = prepare_state(&spec, &[PI], &b).unwrap();
        let excited = b.index(&Determinant::new(0b10, 0)).unwrap();
        assert!((st.amplitudes[excited].abs() - 1.0).abs() < 1e-15);
        assert!(st.amplitudes[1 - excited].abs() < 1e-15);
    }

    #[test]
    fn parameter_length_checked() {
        let b = basis(3, 1, 1);
        let spec = AnsatzSpec::brick_wall(3, 2);
        assert!(matches!(
            prepare_state(&spec, &[0.1], &b),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn matches_full_statevector() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, na, nb) in [(2, 1, 1), (3, 2, 1), (4, 2, 2), (4, 1, 3)] {
            let b = basis(n, na, nb);
            // include a non-adjacent rotation to exercise the crossing sign
            let mut spec = AnsatzSpec::brick_wall(n, 2);
            spec.layer.push(Rotation {
                spin: Spin::Beta,
                p: 0,
                q: n - 1,
            });
            spec.layer.push(Rotation {
                spin: Spin::Alpha,
                p: n - 1,
                q: 0,
            });
            let theta: Vec<f64> = (0..spec.n_params()).map(|_| rng.gen_range(-PI..PI)).collect();
            let st = prepare_state(&spec, &theta, &b).unwrap();

            let sector = Sector::new(n, na, nb).unwrap();
            let mut fock = vec![0.0; 1 << (2 * n)];
            fock[oracle::fock_index(&sector.hartree_fock(), n)] = 1.0;
            for (k, &t) in theta.iter().enumerate() {
                let r = spec.layer[k % spec.layer.len()];
                let off = if r.spin == Spin::Alpha { 0 } else { n };
                fock = oracle::brute_force_givens(&fock, r.p + off, r.q + off, t);
            }
            let mut outside = 0.0;
            for (idx, v) in fock.iter().enumerate() {
                let d = oracle::from_fock_index(idx, n);
                match b.index(&d) {
                    Some(i) => assert!((st.amplitudes[i] - v).abs() < 1e-12),
                    None => outside += v * v,
                }
            }
            assert!(outside < 1e-24);
        }
    }

    #[test]
    fn hartree_fock_sampling() {
        let b = basis(4, 2, 2);
        let spec = AnsatzSpec::brick_wall(4, 1);
        let st = prepare_state(&spec, &vec![0.0; spec.n_params()], &b).unwrap();
        let batch = sample(&st, &b, 500, &NoiseModel::noiseless(), 9);
        assert_eq!(batch.counts.len(), 1);
        assert_eq!(batch.counts[&Determinant::new(0b0011, 0b0011)], 500);

        let flipped = sample(&st, &b, 50, &NoiseModel::new(1.0).unwrap(), 9);
        assert_eq!(flipped.counts.len(), 1);
        assert_eq!(flipped.counts[&Determinant::new(0b1100, 0b1100)], 50);
        assert_eq!(flipped.total_shots, 50);
    }

    #[test]
    fn uniform_sampling_statistics() {
        let b = basis(2, 1, 1);
        let st = SectorState {
            amplitudes: vec![0.5; 4],
        };
        let shots = 100_000u64;
        let batch = sample(&st, &b, shots, &NoiseModel::noiseless(), 123);
        let expected = shots as f64 / 4.0;
        let sigma = (shots as f64 * 0.25 * 0.75).sqrt();
        let mut chi2 = 0.0;
        for i in 0..4 {
            let c = batch.counts[&b.det(i)] as f64;
            assert!((c - expected).abs() < 3.0 * sigma);
            chi2 += (c - expected).powi(2) / expected;
        }
        // chi-square, 3 dof, 99.9th percentile
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn noise_model_bounds() {
        assert!(NoiseModel::new(-0.1).is_err());
        assert!(NoiseModel::new(1.1).is_err());
    }

    #[test]
    fn sample_log_round_trip() {
        let mut batch = SampleBatch::new(4);
        batch.add_str("1100|1100", 10).unwrap();
        batch.add_str("11101100", 5).unwrap();
        let back = SampleBatch::from_log(&batch.to_log(), 4).unwrap();
        assert_eq!(back, batch);
        assert!(batch.add_str("110|1100", 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn norm_preserved(theta in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let b = basis(4, 2, 1);
            let spec = AnsatzSpec::brick_wall(4, 2);
            let st = prepare_state(&spec, &theta, &b).unwrap();
            prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
            let probs = st.probabilities();
            for (p, a) in probs.iter().zip(&st.amplitudes) {
                prop_assert_eq!(*p, a * a);
            }
        }

        #[test]
        fn noiseless_samples_stay_in_sector(theta in proptest::collection::vec(-3.0f64..3.0, 12), seed in 0u64..1000) {
            let sector = Sector::new(4, 1, 2).unwrap();
            let b = SectorBasis::new(sector).unwrap();
            let spec = AnsatzSpec::brick_wall(4, 2);
            let st = prepare_state(&spec, &theta, &b).unwrap();
            let batch = sample(&st, &b, 200, &NoiseModel::noiseless(), seed);
            let again = sample(&st, &b, 200, &NoiseModel::noiseless(), seed);
            prop_assert_eq!(&batch, &again);
            for d in batch.counts.keys() {
                prop_assert!(sector.contains(d));
            }
        }
    }
}
