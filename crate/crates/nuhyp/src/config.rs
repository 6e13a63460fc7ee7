//! Experiment configuration: a TOML file with one table per concern, every
//! field defaulted, plus `section.key=value` overrides from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use nuhyp_core::manifolds::{GrowthParams, RelationParams};
use nuhyp_core::wstar::CylinderFamilyParams;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub pliss: PlissConfig,
    pub hyperbolicity: HyperbolicityConfig,
    pub measure: MeasureConfig,
    pub budgets: BudgetConfig,
    pub catmap: CatmapConfig,
    pub blowup: BlowupConfig,
    pub figure8: Figure8Config,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("nuhyp-out"),
            threads: 0,
            pliss: PlissConfig::default(),
            hyperbolicity: HyperbolicityConfig::default(),
            measure: MeasureConfig::default(),
            budgets: BudgetConfig::default(),
            catmap: CatmapConfig::default(),
            blowup: BlowupConfig::default(),
            figure8: Figure8Config::default(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Pliss constants `A ≥ c2 > c1 > c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlissConfig {
    pub a_bound: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PlissConfig {
    fn default() -> Self {
        Self {
            a_bound: 1.0,
            c0: 0.0,
            c1: 0.2,
            c2: 0.5,
        }
    }
}

/// `(χ, γ, N)` and the proximity surrogates `δ`, `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperbolicityConfig {
    pub chi: f64,
    pub gamma: f64,
    pub n: usize,
    pub delta: f64,
    pub eta: f64,
}

impl Default for HyperbolicityConfig {
    fn default() -> Self {
        Self {
            // log of the golden-mean cat map eigenvalue.
            chi: 0.962_423_650_119_206_9,
            gamma: 0.1,
            n: 1,
            delta: 0.1,
            eta: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    TorusFourier,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub family: FamilyName,
    pub max_freq: i32,
    /// Truncation `K`; 0 keeps the whole family.
    pub truncation: usize,
    /// Cylinder family only.
    pub max_power: u32,
    pub sigma: f64,
    pub y_extent: f64,
    pub grid: usize,
    pub safety: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        let c = CylinderFamilyParams::default();
        Self {
            family: FamilyName::TorusFourier,
            max_freq: 3,
            truncation: 0,
            max_power: c.max_power,
            sigma: c.sigma,
            y_extent: c.y_extent,
            grid: c.grid,
            safety: c.safety,
        }
    }
}

impl MeasureConfig {
    pub fn cylinder_params(&self) -> CylinderFamilyParams {
        CylinderFamilyParams {
            max_freq: self.max_freq,
            max_power: self.max_power,
            sigma: self.sigma,
            y_extent: self.y_extent,
            grid: self.grid,
            safety: self.safety,
        }
    }
}

/// Manifold growth and crossing budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub arclength: f64,
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_angle: f64,
    pub max_points: usize,
    pub seed_factor: f64,
    pub angle_min: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        let g = GrowthParams::default();
        Self {
            arclength: g.arclength,
            tol: g.tol,
            h_min: g.h_min,
            h_max: g.h_max,
            max_angle: g.max_angle,
            max_points: g.max_points,
            seed_factor: g.seed_factor,
            angle_min: 1e-3,
        }
    }
}

impl BudgetConfig {
    pub fn relation(&self, arclength: f64) -> RelationParams {
        RelationParams {
            growth: GrowthParams {
                arclength,
                tol: self.tol,
                h_min: self.h_min,
                h_max: self.h_max,
                max_angle: self.max_angle,
                max_points: self.max_points,
                seed_factor: self.seed_factor,
            },
            angle_min: self.angle_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatmapConfig {
    pub matrix: [[i64; 2]; 2],
    /// Exponents are checked on every orbit with denominator `≤ max_q`.
    pub max_q: i64,
    /// Saddles with denominator `≤ classes_max_q` enter the class partition.
    pub classes_max_q: i64,
}

impl Default for CatmapConfig {
    fn default() -> Self {
        Self {
            matrix: [[2, 1], [1, 1]],
            max_q: 30,
            classes_max_q: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    /// Orbits through `(1/q, 0)`.
    pub qs: Vec<i64>,
    pub radius: f64,
    /// Arclength budget for the `p1`/`p2` relation test.
    pub arclength: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            qs: vec![5, 11, 23, 47, 97],
            radius: 0.1,
            arclength: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure8Config {
    pub substeps: usize,
    pub steps: usize,
    pub eps: Vec<f64>,
    /// `ε` of the trajectory whose finite-time exponents are checked.
    pub exponent_eps: f64,
    pub n_max: usize,
    /// Warm-up of the power-iteration frames.
    pub warmup: usize,
    /// Length of the segment used for the domination check.
    pub domination_steps: usize,
    /// Random points for the determinant check, in `[0,1) × [−y, y]`.
    pub det_samples: usize,
    pub det_y_extent: f64,
}

impl Default for Figure8Config {
    fn default() -> Self {
        Self {
            substeps: 64,
            steps: 100_000,
            eps: vec![1e-2, 1e-3, 1e-4],
            exponent_eps: 1e-3,
            n_max: 20,
            warmup: 200,
            domination_steps: 2000,
            det_samples: 1000,
            det_y_extent: 1.5,
        }
    }
}

/// Pass/fail thresholds of the experiment checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub exponent_abs: f64,
    pub direction_abs: f64,
    pub eigenvalue_abs: f64,
    pub conjugacy_abs: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub distance_max: f64,
    pub trajectory_exponent_max: f64,
    pub drift_max: f64,
    pub det_abs: f64,
    pub angle_abs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            exponent_abs: 1e-10,
            direction_abs: 1e-10,
            eigenvalue_abs: 1e-9,
            conjugacy_abs: 1e-12,
            ratio_low: 0.8,
            ratio_high: 1.25,
            distance_max: 0.05,
            trajectory_exponent_max: 0.1,
            drift_max: 1e-8,
            det_abs: 1e-10,
            angle_abs: 1e-6,
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `section.key=value` overrides and
    /// validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(io_err(p))?;
                text.parse::<toml::Table>().map_err(|e| Error::Toml {
                    path: p.into(),
                    message: e.to_string(),
                })?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Toml {
                path: path.map_or_else(|| PathBuf::from("<overrides>"), Path::to_path_buf),
                message: e.to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pliss;
        require(p.a_bound >= p.c2 && p.c2 > p.c1, || {
            format!("need A ≥ c2 > c1, got A = {}, c2 = {}, c1 = {}", p.a_bound, p.c2, p.c1)
        })?;
        require(p.c0 < p.c1, || format!("need c0 < c1, got c0 = {}, c1 = {}", p.c0, p.c1))?;
        require(p.c1 > -p.a_bound, || format!("need −A < c1, got c1 = {}", p.c1))?;
        let h = &self.hyperbolicity;
        require(h.chi > 0.0 && h.gamma > 0.0 && h.gamma < h.chi, || {
            format!("need 0 < γ < χ, got γ = {}, χ = {}", h.gamma, h.chi)
        })?;
        require(h.n >= 1, || "N must be ≥ 1".into())?;
        require(h.delta > 0.0 && h.eta > 0.0, || "δ and η must be positive".into())?;
        let m = &self.measure;
        require(m.max_freq >= 1, || "measure.max_freq must be ≥ 1".into())?;
        require(m.sigma > 0.0 && m.y_extent > 0.0 && m.grid >= 2 && m.safety >= 1.0, || {
            "cylinder family needs σ > 0, y_extent > 0, grid ≥ 2, safety ≥ 1".into()
        })?;
        let b = &self.budgets;
        require(b.arclength > 0.0 && b.tol > 0.0, || "budgets must be positive".into())?;
        require(0.0 < b.h_min && b.h_min < b.h_max, || {
            format!("need 0 < h_min < h_max, got {} and {}", b.h_min, b.h_max)
        })?;
        require(b.angle_min > 0.0, || "angle_min must be positive".into())?;
        let c = &self.catmap;
        let [[a, bb], [cc, d]] = c.matrix;
        require(a * d - bb * cc == 1 && (a + d).abs() > 2, || {
            format!("matrix {:?} needs det 1 and |trace| > 2", c.matrix)
        })?;
        require(c.max_q >= 1 && c.classes_max_q >= 1, || "q bounds must be ≥ 1".into())?;
        let bl = &self.blowup;
        require(!bl.qs.is_empty() && bl.qs.iter().all(|&q| q >= 2), || {
            "blowup.qs needs denominators ≥ 2".into()
        })?;
        require(bl.radius > 0.0 && bl.arclength > 0.0, || "blowup radius and arclength must be positive".into())?;
        let f = &self.figure8;
        require(f.substeps >= 1 && f.steps >= 1, || "figure8 substeps and steps must be ≥ 1".into())?;
        require(
            !f.eps.is_empty() && f.eps.iter().chain([&f.exponent_eps]).all(|&e| e > 0.0 && e < 1.0),
            || "figure8 ε values must lie in (0, 1)".into(),
        )?;
        require(f.n_max >= 1, || "figure8.n_max must be ≥ 1".into())?;
        require(f.domination_steps > 2 * f.warmup, || {
            "figure8.domination_steps must exceed twice the warm-up".into()
        })?;
        let t = &self.thresholds;
        require(t.ratio_low > 0.0 && t.ratio_low <= 1.0 && t.ratio_high >= 1.0, || {
            "need 0 < ratio_low ≤ 1 ≤ ratio_high".into()
        })?;
        Ok(())
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", assignment)))?;
    let value: toml::Value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        // Bare words are taken as strings.
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path.split_last().expect("split yields one item");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not a table", p)))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
