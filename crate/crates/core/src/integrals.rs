//! Molecular Hamiltonian data: FCIDUMP ingestion and symmetric integral lookup.
//!
//! Everything is expressed over spatial orbitals. Two-electron integrals use
//! chemist notation `(pq|rs)` and are stored once per 8-fold permutation class,
//! in a packed triangular array addressed by the canonical index pair.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[inline]
fn pair_index(p: usize, q: usize) -> usize {
    if p >= q {
        p * (p + 1) / 2 + q
    } else {
        q * (q + 1) / 2 + p
    }
}

#[inline]
fn quartet_index(p: usize, q: usize, r: usize, s: usize) -> usize {
    pair_index(pair_index(p, q), pair_index(r, s))
}

/// One- and two-electron integrals plus the scalar core energy.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    n_orb: usize,
    n_alpha: usize,
    n_beta: usize,
    e_core: f64,
    one_body: Vec<f64>,
    two_body: Vec<f64>,
    // (pp|qq) and (pq|qp), kept dense for diagonal elements.
    coulomb: Vec<f64>,
    exchange: Vec<f64>,
}

impl IntegralSet {
    /// All-zero integrals for the given sector.
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_orb > 64 {
            return Err(Error::ElectronCount(format!(
                "at most 64 spatial orbitals are supported, got {n_orb}"
            )));
        }
        if n_alpha > n_orb || n_beta > n_orb {
            return Err(Error::ElectronCount(format!(
                "n_alpha={n_alpha}, n_beta={n_beta} do not fit in {n_orb} orbitals"
            )));
        }
        let npair = n_orb * (n_orb + 1) / 2;
        Ok(Self {
            n_orb,
            n_alpha,
            n_beta,
            e_core: 0.0,
            one_body: vec![0.0; n_orb * n_orb],
            two_body: vec![0.0; npair * (npair + 1) / 2],
            coulomb: vec![0.0; n_orb * n_orb],
            exchange: vec![0.0; n_orb * n_orb],
        })
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn e_core(&self) -> f64 {
        self.e_core
    }

    pub fn set_e_core(&mut self, e: f64) {
        self.e_core = e;
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i >= self.n_orb) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                n_orb: self.n_orb,
            }),
            None => Ok(()),
        }
    }

    /// Sets `h_pq` and `h_qp`.
    pub fn set_one_body(&mut self, p: usize, q: usize, v: f64) -> Result<()> {
        self.check(&[p, q])?;
        self.one_body[p * self.n_orb + q] = v;
        self.one_body[q * self.n_orb + p] = v;
        Ok(())
    }

    /// Sets the whole permutation class of `(pq|rs)`.
    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) -> Result<()> {
        self.check(&[p, q, r, s])?;
        self.two_body[quartet_index(p, q, r, s)] = v;
        let n = self.n_orb;
        if p == q && r == s {
            self.coulomb[p * n + r] = v;
            self.coulomb[r * n + p] = v;
        }
        if (p == r && q == s) || (p == s && q == r) {
            self.exchange[p * n + q] = v;
            self.exchange[q * n + p] = v;
        }
        Ok(())
    }

    #[inline]
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.one_body[p * self.n_orb + q]
    }

    /// Unchecked `(pq|rs)`; indices must be below `n_orb`.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body[quartet_index(p, q, r, s)]
    }

    /// Bounds-checked `(pq|rs)`. Unset entries read as zero.
    pub fn get_eri(&self, p: usize, q: usize, r: usize, s: usize) -> Result<f64> {
        self.check(&[p, q, r, s])?;
        Ok(self.eri(p, q, r, s))
    }

    pub fn get_one_body(&self, p: usize, q: usize) -> Result<f64> {
        self.check(&[p, q])?;
        Ok(self.h(p, q))
    }

    /// `(pp|qq)`
    #[inline]
    pub fn coulomb(&self, p: usize, q: usize) -> f64 {
        self.coulomb[p * self.n_orb + q]
    }

    /// `(pq|qp)`
    #[inline]
    pub fn exchange(&self, p: usize, q: usize) -> f64 {
        self.exchange[p * self.n_orb + q]
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_fcidump(&text)
    }

    /// Renders the integrals as FCIDUMP text; one record per permutation class.
    pub fn to_fcidump(&self) -> String {
        let n = self.n_orb;
        let mut out = String::new();
        let nelec = self.n_alpha + self.n_beta;
        let ms2 = self.n_alpha as i64 - self.n_beta as i64;
        let _ = writeln!(out, "&FCI NORB={n},NELEC={nelec},MS2={ms2},");
        let _ = writeln!(out, "&END");
        for i in 0..n {
            for j in 0..=i {
                for k in 0..n {
                    for l in 0..=k {
                        if pair_index(k, l) > pair_index(i, j) {
                            continue;
                        }
                        let v = self.eri(i, j, k, l);
                        if v != 0.0 {
                            let _ = writeln!(out, "{v:e} {} {} {} {}", i + 1, j + 1, k + 1, l + 1);
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..=i {
                let v = self.h(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{v:e} {} {} 0 0", i + 1, j + 1);
                }
            }
        }
        let _ = writeln!(out, "{:e} 0 0 0 0", self.e_core);
        out
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    tok.replace(['D', 'd'], "e").parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("non-numeric value `{tok}`"),
    })
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("bad orbital index `{tok}`"),
    })
}

struct Header {
    norb: usize,
    nelec: i64,
    ms2: i64,
}

fn parse_header(header: &str) -> Result<Header> {
    let mut norb = None;
    let mut nelec = None;
    let mut ms2 = None;
    // Namelist: KEY=v[,v...] separated by commas and whitespace. List values
    // such as ORBSYM continue until the next KEY=.
    let mut compact = String::with_capacity(header.len());
    let mut after_eq = false;
    for c in header.chars() {
        if after_eq && c.is_whitespace() {
            continue;
        }
        after_eq = c == '=';
        compact.push(c);
    }
    for tok in compact.split(|c: char| c == ',' || c.is_whitespace()) {
        let Some((key, value)) = tok.split_once('=') else {
            continue;
        };
        let key = key.trim().to_ascii_uppercase();
        let parse = |v: &str| {
            v.trim()
                .parse::<i64>()
                .map_err(|_| Error::Header(format!("{key}={v} is not an integer")))
        };
        match key.as_str() {
            "NORB" => norb = Some(parse(value)?),
            "NELEC" => nelec = Some(parse(value)?),
            "MS2" => ms2 = Some(parse(value)?),
            _ => {}
        }
    }
    let norb = norb.ok_or_else(|| Error::Header("missing NORB".into()))?;
    let nelec = nelec.ok_or_else(|| Error::Header("missing NELEC".into()))?;
    let ms2 = ms2.ok_or_else(|| Error::Header("missing MS2".into()))?;
    if norb < 0 || nelec < 0 {
        return Err(Error::Header("NORB and NELEC must be non-negative".into()));
    }
    Ok(Header {
        norb: norb as usize,
        nelec,
        ms2,
    })
}

/// Parses FCIDUMP text (`&FCI ... &END` or `/` terminated namelist, then
/// `value i j k l` records with 1-based indices).
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let upper = text.to_ascii_uppercase();
    let start = upper
        .find("&FCI")
        .ok_or_else(|| Error::Header("missing &FCI namelist".into()))?;
    let after = start + 4;
    let end_amp = upper[after..].find("&END").map(|i| (after + i, 4));
    let end_slash = upper[after..].find('/').map(|i| (after + i, 1));
    let (end, term_len) = match (end_amp, end_slash) {
        (Some(a), Some(b)) => {
            if a.0 < b.0 {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::Header("unterminated namelist".into())),
    };
    let header = parse_header(&text[after..end])?;

    if (header.nelec + header.ms2).rem_euclid(2) != 0 {
        return Err(Error::OddSpin {
            nelec: header.nelec,
            ms2: header.ms2,
        });
    }
    let n_alpha = (header.nelec + header.ms2) / 2;
    let n_beta = (header.nelec - header.ms2) / 2;
    if n_alpha < 0 || n_beta < 0 {
        return Err(Error::ElectronCount(format!(
            "NELEC={} and MS2={} give a negative spin count",
            header.nelec, header.ms2
        )));
    }
    let mut ints = IntegralSet::new(header.norb, n_alpha as usize, n_beta as usize)?;
    let norb = header.norb;

    let body_start = end + term_len;
    let first_line = text[..body_start].lines().count();
    for (offset, raw) in text[body_start..].lines().enumerate() {
        let line = first_line + offset;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: format!("expected `value i j k l`, got {} fields", toks.len()),
            });
        }
        let v = parse_value(toks[0], line)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&toks[1..]) {
            *slot = parse_index(tok, line)?;
            if *slot > norb {
                return Err(Error::IndexOutOfRange {
                    index: *slot,
                    n_orb: norb,
                });
            }
        }
        match idx {
            [0, 0, 0, 0] => ints.set_e_core(v),
            [i, j, 0, 0] if i > 0 && j > 0 => ints.set_one_body(i - 1, j - 1, v)?,
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => ints.set_eri(i - 1, j - 1, k - 1, l - 1, v)?,
            // Orbital energies and other partial-index records carry no
            // Hamiltonian data.
            _ => {}
        }
    }
    Ok(ints)
}

/// Dipole (position) integrals over spatial orbitals plus the nuclear dipole,
/// all in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleIntegrals {
    n_orb: usize,
    components: [Vec<f64>; 3],
    nuclear: [f64; 3],
}

impl DipoleIntegrals {
    pub fn new(n_orb: usize) -> Self {
        Self {
            n_orb,
            components: std::array::from_fn(|_| vec![0.0; n_orb * n_orb]),
            nuclear: [0.0; 3],
        }
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    /// Element `(p, q)` of component `axis` (0 = x, 1 = y, 2 = z).
    pub fn get(&self, axis: usize, p: usize, q: usize) -> f64 {
        self.components[axis][p * self.n_orb + q]
    }

    pub fn set(&mut self, axis: usize, p: usize, q: usize, v: f64) {
        let n = self.n_orb;
        self.components[axis][p * n + q] = v;
        self.components[axis][q * n + p] = v;
    }

    pub fn nuclear(&self) -> [f64; 3] {
        self.nuclear
    }

    pub fn set_nuclear(&mut self, d: [f64; 3]) {
        self.nuclear = d;
    }

    pub fn from_path(path: impl AsRef<Path>, n_orb: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_dipole_file(&text, n_orb)
    }
}

/// Parses the dipole sidecar: `axis p q value` lines (1-based orbital
/// indices, axis in x/y/z) and a `nuc dx dy dz` line. `#` starts a comment.
pub fn parse_dipole_file(text: &str, n_orb: usize) -> Result<DipoleIntegrals> {
    let mut d = DipoleIntegrals::new(n_orb);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks[0].eq_ignore_ascii_case("nuc") {
            if toks.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: "expected `nuc dx dy dz`".into(),
                });
            }
            d.set_nuclear([
                parse_value(toks[1], line)?,
                parse_value(toks[2], line)?,
                parse_value(toks[3], line)?,
            ]);
            continue;
        }
        let axis = match toks[0].to_ascii_lowercase().as_str() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown axis `{other}`"),
                })
            }
        };
        if toks.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: "expected `axis p q value`".into(),
            });
        }
        let p = parse_index(toks[1], line)?;
        let q = parse_index(toks[2], line)?;
        for idx in [p, q] {
            if idx == 0 || idx > n_orb {
                return Err(Error::IndexOutOfRange { index: idx, n_orb });
            }
        }
        d.set(axis, p - 1, q - 1, parse_value(toks[3], line)?);
    }
    Ok(d)
}
