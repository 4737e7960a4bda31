//! Spectra (μ², multiplicity) of the Laplacian on compact cross-sections.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CrossSectionKind {
    Circle { length: f64 },
    Torus { lengths: Vec<f64> },
    Sphere { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub mu_sq: f64,
    pub multiplicity: u64,
}

impl SpectrumEntry {
    pub fn mu(&self) -> f64 {
        self.mu_sq.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSpectrum {
    n: usize,
    entries: Vec<SpectrumEntry>,
}

impl CrossSectionSpectrum {
    /// Validating constructor: entries ascending, first eigenvalue 0,
    /// eigenvalues nonnegative, multiplicities positive.
    pub fn new(n: usize, entries: Vec<SpectrumEntry>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvariantViolation("dimension n must be positive".into()));
        }
        let Some(first) = entries.first() else {
            return Err(Error::InvariantViolation("spectrum has no entries".into()));
        };
        if first.mu_sq != 0.0 {
            return Err(Error::InvariantViolation(format!(
                "first eigenvalue must be 0 (constants), got {}",
                first.mu_sq
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.mu_sq >= 0.0) || !e.mu_sq.is_finite() {
                return Err(Error::InvariantViolation(format!(
                    "entry {i}: eigenvalue {} is negative or not finite",
                    e.mu_sq
                )));
            }
            if e.multiplicity == 0 {
                return Err(Error::InvariantViolation(format!("entry {i}: zero multiplicity")));
            }
            if i > 0 && e.mu_sq <= entries[i - 1].mu_sq {
                return Err(Error::InvariantViolation(format!(
                    "entry {i}: eigenvalues not strictly ascending ({} after {})",
                    e.mu_sq,
                    entries[i - 1].mu_sq
                )));
            }
        }
        Ok(CrossSectionSpectrum { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `count` entries.
    pub fn truncated(&self, count: usize) -> CrossSectionSpectrum {
        CrossSectionSpectrum {
            n: self.n,
            entries: self.entries[..count.min(self.entries.len()).max(1)].to_vec(),
        }
    }

    /// Text form: dimension on the first line, then "mu_sq multiplicity".
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for e in &self.entries {
            let _ = writeln!(out, "{:?} {}", e.mu_sq, e.multiplicity);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line_no, first) = lines.next().ok_or(Error::ParseError {
            line: 1,
            message: "missing dimension line".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("expected a positive integer dimension, got {first:?}"),
        })?;
        let mut entries = Vec::new();
        for (line_no, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("expected \"mu_sq multiplicity\", got {line:?}"),
                });
            };
            let mu_sq: f64 = a.parse().map_err(|_| Error::ParseError {
                line: line_no,
                message: format!("bad eigenvalue {a:?}"),
            })?;
            let multiplicity: u64 = b.parse().map_err(|_| Error::ParseError {
                line: line_no,
                message: format!("bad multiplicity {b:?}"),
            })?;
            entries.push(SpectrumEntry { mu_sq, multiplicity });
        }
        CrossSectionSpectrum::new(n, entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// First `count` distinct eigenvalues of a built-in cross-section.
pub fn builtin_spectrum(kind: &CrossSectionKind, count: usize) -> Result<CrossSectionSpectrum> {
    if count == 0 {
        return Err(Error::InvariantViolation("count must be at least 1".into()));
    }
    match kind {
        CrossSectionKind::Circle { length } => {
            check_length(*length)?;
            let entries = (0..count)
                .map(|j| {
                    let m = 2.0 * std::f64::consts::PI * j as f64 / length;
                    SpectrumEntry {
                        mu_sq: m * m,
                        multiplicity: if j == 0 { 1 } else { 2 },
                    }
                })
                .collect();
            CrossSectionSpectrum::new(1, entries)
        }
        CrossSectionKind::Sphere { n } => {
            let n = *n;
            if n == 0 {
                return Err(Error::UnsupportedKind("sphere of dimension 0".into()));
            }
            let entries = (0..count as u64)
                .map(|l| SpectrumEntry {
                    mu_sq: (l * (l + n as u64 - 1)) as f64,
                    multiplicity: harmonic_dimension(l, n as u64),
                })
                .collect();
            CrossSectionSpectrum::new(n, entries)
        }
        CrossSectionKind::Torus { lengths } => {
            if lengths.is_empty() {
                return Err(Error::UnsupportedKind("torus of dimension 0".into()));
            }
            for &l in lengths {
                check_length(l)?;
            }
            torus_spectrum(lengths, count)
        }
    }
}

/// Parse a kind name such as "circle", "torus" or "sphere" with defaults.
pub fn kind_from_name(name: &str, n: usize) -> Result<CrossSectionKind> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match name {
        "circle" => Ok(CrossSectionKind::Circle { length: two_pi }),
        "torus" => Ok(CrossSectionKind::Torus {
            lengths: vec![two_pi; n.max(1)],
        }),
        "sphere" => Ok(CrossSectionKind::Sphere { n }),
        other => Err(Error::UnsupportedKind(other.to_string())),
    }
}

fn check_length(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::InvariantViolation(format!("length must be positive, got {l}")))
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Dimension of degree-l spherical harmonics on S^n.
fn harmonic_dimension(l: u64, n: u64) -> u64 {
    let a = binomial(l + n, n);
    let b = if l >= 2 { binomial(l + n - 2, n) } else { 0 };
    a - b
}

fn torus_spectrum(lengths: &[f64], count: usize) -> Result<CrossSectionSpectrum> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let freqs: Vec<f64> = lengths.iter().map(|l| two_pi / l).collect();
    let fmin = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    // Grow the enumeration box until the count-th distinct value is
    // guaranteed to lie inside it.
    let mut radius = (count as f64).sqrt().ceil().max(1.0) as i64;
    loop {
        let mut values = Vec::new();
        let mut idx = vec![-radius; freqs.len()];
        loop {
            let v: f64 = idx
                .iter()
                .zip(&freqs)
                .map(|(&m, &f)| {
                    let x = m as f64 * f;
                    x * x
                })
                .sum();
            values.push(v);
            let mut d = 0;
            loop {
                if d == idx.len() {
                    break;
                }
                idx[d] += 1;
                if idx[d] > radius {
                    idx[d] = -radius;
                    d += 1;
                } else {
                    break;
                }
            }
            if d == idx.len() {
                break;
            }
        }
        values.sort_by(f64::total_cmp);
        let mut grouped: Vec<SpectrumEntry> = Vec::new();
        for v in values {
            match grouped.last_mut() {
                Some(last) if (v - last.mu_sq).abs() <= 1e-12 * v.max(1.0) => last.multiplicity += 1,
                _ => grouped.push(SpectrumEntry {
                    mu_sq: v,
                    multiplicity: 1,
                }),
            }
        }
        let safe = {
            let r = radius as f64 * fmin;
            r * r
        };
        if grouped.len() >= count && grouped[count - 1].mu_sq < safe {
            grouped.truncate(count);
            return CrossSectionSpectrum::new(lengths.len(), grouped);
        }
        radius *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pairs(s: &CrossSectionSpectrum) -> Vec<(f64, u64)> {
        s.entries().iter().map(|e| (e.mu_sq, e.multiplicity)).collect()
    }

    #[test]
    fn circle_fourier_modes() {
        let s = builtin_spectrum(&CrossSectionKind::Circle { length: 2.0 * PI }, 3).unwrap();
        let p = pairs(&s);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], (0.0, 1));
        assert!((p[1].0 - 1.0).abs() < 1e-14 && p[1].1 == 2);
        assert!((p[2].0 - 4.0).abs() < 1e-14 && p[2].1 == 2);
    }

    #[test]
    fn sphere_harmonics() {
        let s = builtin_spectrum(&CrossSectionKind::Sphere { n: 2 }, 3).unwrap();
        assert_eq!(pairs(&s), vec![(0.0, 1), (2.0, 3), (6.0, 5)]);
        let s3 = builtin_spectrum(&CrossSectionKind::Sphere { n: 3 }, 3).unwrap();
        assert_eq!(pairs(&s3), vec![(0.0, 1), (3.0, 4), (8.0, 9)]);
    }

    #[test]
    fn square_torus_lattice() {
        let s = builtin_spectrum(
            &CrossSectionKind::Torus {
                lengths: vec![2.0 * PI, 2.0 * PI],
            },
            4,
        )
        .unwrap();
        let p = pairs(&s);
        assert_eq!(p[0], (0.0, 1));
        assert_eq!(p[1].1, 4);
        assert!((p[1].0 - 1.0).abs() < 1e-12);
        assert!((p[2].0 - 2.0).abs() < 1e-12 && p[2].1 == 4);
        assert!((p[3].0 - 4.0).abs() < 1e-12 && p[3].1 == 4);
    }

    #[test]
    fn parse_and_reject() {
        let s = CrossSectionSpectrum::parse("2\n0 1\n1 2\n").unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(pairs(&s), vec![(0.0, 1), (1.0, 2)]);
        assert!(matches!(
            CrossSectionSpectrum::parse("1\n0 1\n-1 2\n"),
            Err(Error::InvariantViolation(_))
        ));
        assert!(matches!(
            CrossSectionSpectrum::parse("1\n0 1\n4 2\n1 2\n"),
            Err(Error::InvariantViolation(_))
        ));
        assert!(matches!(
            CrossSectionSpectrum::parse("1\n0 x\n"),
            Err(Error::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let s = builtin_spectrum(&CrossSectionKind::Circle { length: 3.7 }, 12).unwrap();
        let back = CrossSectionSpectrum::parse(&s.to_text()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn weyl_law_on_circle() {
        let l = 2.0 * PI;
        let s = builtin_spectrum(&CrossSectionKind::Circle { length: l }, 120).unwrap();
        for mu in (1..=100).map(|m| m as f64) {
            let count: u64 = s
                .entries()
                .iter()
                .filter(|e| e.mu() <= mu + 1e-12)
                .map(|e| e.multiplicity)
                .sum();
            assert!((count as f64 - l / PI * mu).abs() <= 2.0);
        }
    }

    #[test]
    fn unknown_kind() {
        assert!(matches!(kind_from_name("klein", 2), Err(Error::UnsupportedKind(_))));
    }
}
