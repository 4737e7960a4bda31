//! Run configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use resonance_core::metric_check::WarpProfile;
use resonance_core::{builtin_spectrum, Complex64, CrossSectionKind, CrossSectionSpectrum, RadialGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spectrum: SpectrumConfig,
    pub grid: GridConfig,
    pub lambdas: LambdaSet,
    pub tail_tol: f64,
    pub threads: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub bessel: BesselConfig,
    pub kernel: KernelConfig,
    pub certify: CertifyConfig,
    pub wave: WaveConfig,
    pub metric: MetricConfig,
    pub selftest: SelftestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spectrum: SpectrumConfig::default(),
            grid: GridConfig::default(),
            lambdas: LambdaSet::default(),
            tail_tol: resonance_core::weighted_operator::DEFAULT_TAIL_TOL,
            threads: 1,
            seed: 0,
            out: PathBuf::from("out"),
            bessel: BesselConfig::default(),
            kernel: KernelConfig::default(),
            certify: CertifyConfig::default(),
            wave: WaveConfig::default(),
            metric: MetricConfig::default(),
            selftest: SelftestConfig::default(),
        }
    }
}

/// Built-in cross-section or a spectrum file; `file` wins when both are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub builtin: CrossSectionKind,
    pub count: usize,
    pub file: Option<PathBuf>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            builtin: CrossSectionKind::Circle {
                length: 2.0 * std::f64::consts::PI,
            },
            count: 1_000_000,
            file: None,
        }
    }
}

impl SpectrumConfig {
    pub fn load(&self) -> anyhow::Result<CrossSectionSpectrum> {
        match &self.file {
            Some(path) => CrossSectionSpectrum::load(path).with_context(|| format!("spectrum file {}", path.display())),
            None => Ok(builtin_spectrum(&self.builtin, self.count)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub h: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min: resonance_core::grid::DEFAULT_R_MIN,
            r_max: resonance_core::grid::DEFAULT_R_MAX,
            h: resonance_core::grid::DEFAULT_STEP,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> anyhow::Result<RadialGrid> {
        Ok(RadialGrid::uniform(self.r_min, self.r_max, self.h)?)
    }
}

/// λ samples. A line with no `re` sits on Re λ = n/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LambdaSet {
    Line {
        re: Option<f64>,
        im_min: f64,
        im_max: f64,
        count: usize,
    },
    Rectangle {
        re_min: f64,
        re_max: f64,
        re_count: usize,
        im_min: f64,
        im_max: f64,
        im_count: usize,
    },
    List {
        points: Vec<[f64; 2]>,
    },
}

impl Default for LambdaSet {
    fn default() -> Self {
        LambdaSet::Line {
            re: None,
            im_min: 1.0,
            im_max: 30.0,
            count: 30,
        }
    }
}

fn spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    resonance_core::weighted_operator::linspace(lo, hi, count)
}

impl LambdaSet {
    pub fn points(&self, n: usize) -> Vec<Complex64> {
        match self {
            LambdaSet::Line { re, im_min, im_max, count } => {
                let re = re.unwrap_or(0.5 * n as f64);
                spaced(*im_min, *im_max, *count).into_iter().map(|im| Complex64::new(re, im)).collect()
            }
            LambdaSet::Rectangle {
                re_min,
                re_max,
                re_count,
                im_min,
                im_max,
                im_count,
            } => {
                let res = spaced(*re_min, *re_max, *re_count);
                spaced(*im_min, *im_max, *im_count)
                    .into_iter()
                    .flat_map(|im| res.iter().map(move |&re| Complex64::new(re, im)))
                    .collect()
            }
            LambdaSet::List { points } => points.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesselConfig {
    pub orders: Vec<[f64; 2]>,
    pub z: Vec<f64>,
}

impl Default for BesselConfig {
    fn default() -> Self {
        BesselConfig {
            orders: vec![[0.0, 0.0], [0.5, 0.0], [0.3, 2.0]],
            z: vec![0.5, 1.0, 1.5, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub k: [f64; 2],
    pub mu: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            k: [0.3, 2.0],
            mu: 1.0,
            r_min: -4.0,
            r_max: 1.0,
            count: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// NormScan CSV written by `norm-scan`; scanned afresh when absent.
    pub scan: Option<PathBuf>,
    pub im_range: [f64; 2],
    pub samples: usize,
    pub modes: usize,
    pub slope_eps: f64,
    pub safety: f64,
    pub grid: GridConfig,
    /// Dirichlet cap; defaults to e^{grid.r_max}.
    pub x_cap: Option<f64>,
    /// Also compare the reconstruction with the exact kernel inside the band.
    pub reconstruct: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let s = resonance_core::CertifySettings::default();
        CertifyConfig {
            scan: None,
            im_range: [s.im_range.0, s.im_range.1],
            samples: s.samples,
            modes: s.modes,
            slope_eps: s.slope_eps,
            safety: s.safety,
            grid: GridConfig {
                r_min: -12.0,
                r_max: resonance_core::parametrix::DEFAULT_R_CAP,
                h: 0.02,
            },
            x_cap: None,
            reconstruct: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    pub bumps: usize,
    /// Times after the wave has left the center, as offsets past the data support.
    pub post_passage: Vec<f64>,
    pub laplace: Vec<[f64; 2]>,
    pub horizon: f64,
    pub step: f64,
    pub decay_ims: Vec<f64>,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig {
            bumps: 20,
            post_passage: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            laplace: vec![[1.5, 0.0], [1.0, 5.0]],
            horizon: 60.0,
            step: 0.05,
            decay_ims: vec![2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub n: usize,
    pub profile: WarpProfile,
    pub epsilon: f64,
    pub r_max: f64,
    pub h: f64,
    pub delta: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            n: 2,
            profile: WarpProfile::Power { a: 1.0, p: 2.0 },
            epsilon: 1.0 / 3.0,
            r_max: 30.0,
            h: 0.05,
            delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestConfig {
    pub cases: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig { cases: 40 }
    }
}

impl RunConfig {
    /// Reads the document; parse errors carry line and column.
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.tail_tol > 0.0) {
            bail!("tail_tol must be positive, got {}", self.tail_tol);
        }
        if !(self.grid.h > 0.0) {
            bail!("grid.h must be positive, got {}", self.grid.h);
        }
        if let Some(path) = &self.spectrum.file {
            if !path.exists() {
                bail!("spectrum file {} does not exist", path.display());
            }
        }
        if let Some(path) = &self.certify.scan {
            if !path.exists() {
                bail!("certify.scan file {} does not exist", path.display());
            }
        }
        if !(self.certify.slope_eps > 0.0) {
            bail!("certify.slope_eps must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.lambdas.points(1).len(), 30);
        assert_eq!(cfg.lambdas.points(1)[0], Complex64::new(0.5, 1.0));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = RunConfig::from_json("{\n  \"tail_tol\": 1e-3,\n  \"bogus\": 1\n}").unwrap_err();
        assert!(format!("{err:#}").contains("line 3"), "{err:#}");
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        assert!(RunConfig::from_json("{\"tail_tol\": 0}").is_err());
    }

    #[test]
    fn lambda_sets() {
        let r = LambdaSet::Rectangle {
            re_min: 0.4,
            re_max: 0.5,
            re_count: 2,
            im_min: 1.0,
            im_max: 2.0,
            im_count: 3,
        };
        assert_eq!(r.points(1).len(), 6);
        let l = LambdaSet::List { points: vec![] };
        assert!(l.points(1).is_empty());
        let j: LambdaSet = serde_json::from_str(r#"{"kind": "list", "points": [[0.5, 2.0]]}"#).unwrap();
        assert_eq!(j.points(1), vec![Complex64::new(0.5, 2.0)]);
    }
}
