//! Noise specifications, measurement sets, synthetic data generation and
//! the on-disk measurement format.
//!
//! A measurement file is a CSV with the header `strain,stress` and one row
//! per measurement, written with 17 significant digits. The noise model and
//! provenance live in a JSON sidecar next to it (same path, `.json`
//! extension):
//!
//! ```json
//! {
//!   "format": "tensile-bayes/measurements",
//!   "version": 1,
//!   "points": 12,
//!   "noise": { "regime": "stress_only", "s_noise": 0.01 },
//!   "provenance": "synthetic model=LE-PP x=[210, 0.25] seed=1"
//! }
//! ```
//!
//! For the stress-and-strain regime the noise object is
//! `{"regime": "stress_and_strain", "s_stress": .., "s_strain": .., "strain_upper_bound": null}`
//! where a null bound means no upper limit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, Params};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRegime {
    StressOnly,
    StressAndStrain,
}

/// Additive Gaussian measurement noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Stress readings carry noise with standard deviation `s_noise` (GPa);
    /// strains are exact.
    StressOnly { s_noise: f64 },
    /// Independent noise on stress (`s_stress`, GPa) and strain
    /// (`s_strain`). `strain_upper_bound` is the largest strain the tester
    /// can reach; `None` means unbounded.
    StressAndStrain {
        s_stress: f64,
        s_strain: f64,
        #[serde(default)]
        strain_upper_bound: Option<f64>,
    },
}

impl NoiseSpec {
    pub fn stress_only(s_noise: f64) -> Self {
        NoiseSpec::StressOnly { s_noise }
    }

    pub fn stress_and_strain(s_stress: f64, s_strain: f64) -> Self {
        NoiseSpec::StressAndStrain {
            s_stress,
            s_strain,
            strain_upper_bound: None,
        }
    }

    pub fn regime(&self) -> NoiseRegime {
        match self {
            NoiseSpec::StressOnly { .. } => NoiseRegime::StressOnly,
            NoiseSpec::StressAndStrain { .. } => NoiseRegime::StressAndStrain,
        }
    }

    /// Standard deviation of the stress noise.
    pub fn stress_std(&self) -> f64 {
        match *self {
            NoiseSpec::StressOnly { s_noise } => s_noise,
            NoiseSpec::StressAndStrain { s_stress, .. } => s_stress,
        }
    }

    pub fn strain_std(&self) -> Option<f64> {
        match *self {
            NoiseSpec::StressOnly { .. } => None,
            NoiseSpec::StressAndStrain { s_strain, .. } => Some(s_strain),
        }
    }

    /// Upper strain bound `a`; infinite when unbounded or when strains are exact.
    pub fn upper_bound(&self) -> f64 {
        match *self {
            NoiseSpec::StressAndStrain {
                strain_upper_bound: Some(a),
                ..
            } => a,
            _ => f64::INFINITY,
        }
    }

    /// Strict check used before likelihood evaluation: all standard
    /// deviations and the strain bound must be positive.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            NoiseSpec::StressOnly { s_noise } if ok(s_noise) => Ok(()),
            NoiseSpec::StressAndStrain {
                s_stress,
                s_strain,
                strain_upper_bound,
            } if ok(s_stress) && ok(s_strain) && strain_upper_bound.is_none_or(|a| a > 0.0) => {
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "noise standard deviations and strain bound must be positive: {self:?}"
            ))),
        }
    }

    // Generators accept zero noise to produce exact theoretical curves.
    pub fn validate_nonnegative(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let fine = match *self {
            NoiseSpec::StressOnly { s_noise } => ok(s_noise),
            NoiseSpec::StressAndStrain {
                s_stress, s_strain, ..
            } => ok(s_stress) && ok(s_strain),
        };
        if fine {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise specification {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub strain: f64,
    pub stress: f64,
}

/// An ordered series of (strain, stress) measurements from one specimen.
///
/// Strains are strictly increasing. With exact strains they are also
/// nonnegative; measured strains in the stress-and-strain regime may dip
/// below zero through noise.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    points: Vec<Point>,
    noise: NoiseSpec,
    provenance: String,
}

impl MeasurementSet {
    pub fn new(points: Vec<Point>, noise: NoiseSpec, provenance: impl Into<String>) -> Result<Self> {
        noise.validate_nonnegative()?;
        if points.is_empty() {
            return Err(Error::Config("measurement set needs k >= 1 points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.strain.is_finite() || !p.stress.is_finite() {
                return Err(Error::Config(format!("point {i} is not finite: {p:?}")));
            }
            if noise.regime() == NoiseRegime::StressOnly && p.strain < 0.0 {
                return Err(Error::Config(format!(
                    "point {i}: negative strain {} with exact strains",
                    p.strain
                )));
            }
            if i > 0 && p.strain <= points[i - 1].strain {
                return Err(Error::Config(format!(
                    "strains must be strictly increasing (point {i})"
                )));
            }
        }
        Ok(MeasurementSet {
            points,
            noise,
            provenance: provenance.into(),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// The same readings interpreted under a different noise model; used to
    /// compare stress-only and stress-and-strain analyses of one dataset.
    pub fn with_noise(&self, noise: NoiseSpec) -> Result<Self> {
        MeasurementSet::new(self.points.clone(), noise, self.provenance.clone())
    }

    /// First `k` measurements (all when `k` exceeds the length).
    pub fn truncated(&self, k: usize) -> Result<Self> {
        let k = k.min(self.points.len());
        MeasurementSet::new(self.points[..k].to_vec(), self.noise, self.provenance.clone())
    }
}

fn provenance(params: &Params, seed: u64) -> String {
    format!(
        "synthetic model={} x={:?} seed={seed}",
        params.kind(),
        params.as_slice()
    )
}

/// Stress-only synthetic data: `σ_i = σ(ε_i, x) + ω_i`, `ω_i ~ N(0, s_noise²)`.
///
/// `s_noise = 0` yields the exact theoretical curve.
pub fn generate_single_noise(
    params: &Params,
    strains: &[f64],
    s_noise: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    let noise = NoiseSpec::stress_only(s_noise);
    noise.validate_nonnegative()?;
    let mut rng = rng::stream(seed, Stream::StressNoise);
    let points = strains
        .iter()
        .map(|&eps| {
            let w: f64 = rng.sample(StandardNormal);
            Ok(Point {
                strain: eps,
                stress: params.stress(eps)? + s_noise * w,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(points, noise, provenance(params, seed))
}

/// Stress-and-strain synthetic data. The stress noise is added to the
/// response at the true strain and uses the same random stream as
/// [`generate_single_noise`]; the strain noise has its own stream. Points
/// are returned sorted by measured strain.
pub fn generate_double_noise(
    params: &Params,
    strains: &[f64],
    s_stress: f64,
    s_strain: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    let noise = NoiseSpec::stress_and_strain(s_stress, s_strain);
    noise.validate_nonnegative()?;
    let mut stress_rng = rng::stream(seed, Stream::StressNoise);
    let mut strain_rng = rng::stream(seed, Stream::StrainNoise);
    let mut points = strains
        .iter()
        .map(|&eps| {
            let ws: f64 = stress_rng.sample(StandardNormal);
            let we: f64 = strain_rng.sample(StandardNormal);
            Ok(Point {
                strain: eps + s_strain * we,
                stress: params.stress(eps)? + s_stress * ws,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.strain.total_cmp(&b.strain));
    MeasurementSet::new(points, noise, provenance(params, seed))
}

/// Synthetic data under either noise regime.
pub fn generate(params: &Params, strains: &[f64], noise: &NoiseSpec, seed: u64) -> Result<MeasurementSet> {
    match *noise {
        NoiseSpec::StressOnly { s_noise } => generate_single_noise(params, strains, s_noise, seed),
        NoiseSpec::StressAndStrain {
            s_stress,
            s_strain,
            strain_upper_bound,
        } => {
            let set = generate_double_noise(params, strains, s_stress, s_strain, seed)?;
            if strain_upper_bound.is_none() {
                return Ok(set);
            }
            let provenance = set.provenance().to_string();
            MeasurementSet::new(set.points().to_vec(), *noise, provenance)
        }
    }
}

/// Population of specimens whose parameters scatter around a common mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecimenPopulation {
    pub mean: Vec<f64>,
    /// Row-major covariance matrix.
    pub covariance: Vec<f64>,
    pub count: usize,
}

impl SpecimenPopulation {
    /// Symmetric square root factor `V·sqrt(Λ)` of the covariance; valid for
    /// singular (including all-zero) covariances.
    fn factor(&self) -> Result<DMatrix<f64>> {
        let n = self.mean.len();
        if n == 0 || self.covariance.len() != n * n {
            return Err(Error::Config(format!(
                "population covariance must be {n}x{n} row-major"
            )));
        }
        let cov = DMatrix::from_row_slice(n, n, &self.covariance);
        let asym = (&cov - cov.transpose()).amax();
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        if asym > 1e-12 * scale {
            return Err(Error::Config("population covariance is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(cov);
        if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
            return Err(Error::Config(
                "population covariance is not positive semi-definite".into(),
            ));
        }
        let sqrt = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
    }
}

const MAX_REJECTION_RATE: f64 = 0.999;

/// Draws `pop.count` specimens from the multivariate normal population,
/// redrawing any vector with a negative component.
pub fn draw_specimens(pop: &SpecimenPopulation, kind: ModelKind, seed: u64) -> Result<Vec<Params>> {
    if pop.mean.len() != kind.n_params() {
        return Err(Error::Config(format!(
            "population has {} components, {kind} needs {}",
            pop.mean.len(),
            kind.n_params()
        )));
    }
    let factor = pop.factor()?;
    let n = pop.mean.len();
    let mean = DVector::from_column_slice(&pop.mean);
    let mut rng = rng::stream(seed, Stream::Specimens);
    let mut out = Vec::with_capacity(pop.count);
    let (mut attempts, mut rejected) = (0usize, 0usize);
    while out.len() < pop.count {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &mean + &factor * z;
        attempts += 1;
        if x.iter().all(|&v| v >= 0.0) {
            out.push(Params::new(kind, x.as_slice())?);
        } else {
            rejected += 1;
            if attempts >= 1000 && rejected as f64 / attempts as f64 > MAX_REJECTION_RATE {
                return Err(Error::Config(format!(
                    "specimen population almost entirely negative: {rejected} of {attempts} draws rejected"
                )));
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    points: usize,
    noise: NoiseSpec,
    provenance: String,
}

const SIDECAR_FORMAT: &str = "tensile-bayes/measurements";

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the CSV and its JSON sidecar.
pub fn write_measurements(set: &MeasurementSet, path: &Path) -> Result<()> {
    let mut body = String::from("strain,stress\n");
    for p in &set.points {
        body.push_str(&format!("{:.16e},{:.16e}\n", p.strain, p.stress));
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))?;

    let sidecar = Sidecar {
        format: SIDECAR_FORMAT.into(),
        version: 1,
        points: set.len(),
        noise: set.noise,
        provenance: set.provenance.clone(),
    };
    let side = sidecar_path(path);
    let mut f = fs::File::create(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    writeln!(f).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

/// Reads a measurement CSV together with its sidecar.
pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    if sidecar.format != SIDECAR_FORMAT {
        return Err(Error::Parse {
            path: side,
            line: 1,
            message: format!("unexpected format tag '{}'", sidecar.format),
        });
    }
    let points = read_points(path)?;
    if points.len() != sidecar.points {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: points.len() + 1,
            message: format!("sidecar declares {} points, file has {}", sidecar.points, points.len()),
        });
    }
    MeasurementSet::new(points, sidecar.noise, sidecar.provenance)
}

/// Parses the `strain,stress` rows of a measurement CSV.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "empty file; expected header 'strain,stress'".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["strain", "stress"] {
        return Err(perr(1, format!("expected header 'strain,stress', found '{header}'")));
    }
    let mut points: Vec<Point> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(perr(lineno, format!("expected 2 fields, found {}", fields.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(lineno, format!("'{s}' is not a finite number")))
        };
        let p = Point {
            strain: parse(fields[0])?,
            stress: parse(fields[1])?,
        };
        if let Some(prev) = points.last() {
            if p.strain <= prev.strain {
                return Err(perr(lineno, "strains must be strictly increasing".into()));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(perr(2, "k >= 1 required: file has a header but no measurements".into()));
    }
    Ok(points)
}

/// `count` equally spaced strains `start, start + step, ...`.
pub fn strain_grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        strain_grid(2e-4, 2e-4, 12)
    }

    #[test]
    fn zero_noise_is_exact() {
        let p = Params::lepp(210.0, 0.25);
        let set = generate_single_noise(&p, &grid(), 0.0, 3).unwrap();
        assert_eq!(set.len(), 12);
        for (pt, eps) in set.points().iter().zip(grid()) {
            assert_eq!(pt.strain, eps);
            assert_eq!(pt.stress, p.stress(eps).unwrap());
        }
    }

    #[test]
    fn generation_is_seeded() {
        let p = Params::lelh(210.0, 0.25, 50.0);
        let a = generate_double_noise(&p, &grid(), 0.01, 1e-4, 11).unwrap();
        let b = generate_double_noise(&p, &grid(), 0.01, 1e-4, 11).unwrap();
        let c = generate_double_noise(&p, &grid(), 0.01, 1e-4, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn vanishing_strain_noise_recovers_single_noise() {
        let p = Params::lepp(210.0, 0.25);
        let single = generate_single_noise(&p, &grid(), 0.01, 5).unwrap();
        let double = generate_double_noise(&p, &grid(), 0.01, 0.0, 5).unwrap();
        assert_eq!(single.points(), double.points());
    }

    #[test]
    fn single_point_within_tail_bound() {
        let p = Params::le(210.0);
        for seed in 0..200 {
            let set = generate_single_noise(&p, &[7.25e-4], 0.01, seed).unwrap();
            assert!((set.points()[0].stress - 0.15225).abs() < 4.0 * 0.01 + 0.01);
        }
    }

    #[test]
    fn zero_covariance_population_is_constant() {
        let pop = SpecimenPopulation {
            mean: vec![210.0, 0.25],
            covariance: vec![0.0; 4],
            count: 5,
        };
        let s = draw_specimens(&pop, ModelKind::LePp, 1).unwrap();
        assert!(s.iter().all(|p| p.as_slice() == [210.0, 0.25]));
    }

    #[test]
    fn negative_population_is_rejected() {
        let pop = SpecimenPopulation {
            mean: vec![-100.0],
            covariance: vec![1.0],
            count: 1,
        };
        assert!(matches!(draw_specimens(&pop, ModelKind::Le, 1), Err(Error::Config(_))));
    }

    #[test]
    fn measurement_set_invariants() {
        let noise = NoiseSpec::stress_only(0.01);
        let pts = |v: &[(f64, f64)]| v.iter().map(|&(strain, stress)| Point { strain, stress }).collect();
        assert!(MeasurementSet::new(vec![], noise, "").is_err());
        assert!(MeasurementSet::new(pts(&[(1e-3, 0.2), (1e-3, 0.2)]), noise, "").is_err());
        assert!(MeasurementSet::new(pts(&[(-1e-3, 0.2)]), noise, "").is_err());
        let double = NoiseSpec::stress_and_strain(0.01, 1e-4);
        assert!(MeasurementSet::new(pts(&[(-1e-5, 0.0)]), double, "").is_ok());
        assert!(NoiseSpec::stress_only(0.0).validate().is_err());
    }
}
