//! Finite-shot simulation of the joint readout and propagation of the
//! resulting statistical error through the reconstruction.
//!
//! The joint measurement is modelled as an ideal projective measurement in
//! the product eigenbasis of the two commuting observables. Shots are drawn
//! from ChaCha8 seeded with a 64-bit integer.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::coherent::{condition_number, ExpectationTriple, ReconstructionSystem};
use crate::error::{Error, Result};
use crate::quantum::BlochVector;
use crate::spin::{Label, SpinScheme};

/// Largest |Σp − 1| accepted before sampling.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Name of the generator used by [`sample`].
pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Joint outcome: system spin ±1 and the assistant reading (±1 for a spin
/// assistant, the photon number for a field).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub spin: i8,
    pub assistant: i64,
}

impl Outcome {
    pub fn new(spin: i8, assistant: i64) -> Self {
        Self { spin, assistant }
    }

    pub fn from_label(label: Label) -> Self {
        Self::new(label.system_sign() as i8, label.assistant_sign() as i64)
    }
}

/// Normalized joint distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    entries: Vec<(Outcome, f64)>,
    deficit: f64,
}

impl Distribution {
    /// Accepts probabilities summing to 1 within [`NORMALIZATION_TOL`]; tiny
    /// negative round-off is clipped and the rest is renormalized, with the
    /// original shortfall recorded.
    pub fn new(entries: Vec<(Outcome, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if let Some((o, p)) = entries
            .iter()
            .find(|(_, p)| !p.is_finite() || *p < -NORMALIZATION_TOL)
        {
            return Err(Error::InvalidParameter(format!(
                "probability {p} for outcome {o:?}"
            )));
        }
        let total: f64 = entries.iter().map(|(_, p)| p.max(0.0)).sum();
        let deficit = 1.0 - total;
        if deficit.abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}"
            )));
        }
        let entries = entries
            .into_iter()
            .map(|(o, p)| (o, p.max(0.0) / total))
            .collect();
        Ok(Self { entries, deficit })
    }

    /// From rows (σ_x outcome, photon number, probability).
    pub fn from_coherent(rows: &[(i8, usize, f64)]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|&(i, n, p)| (Outcome::new(i, n as i64), p))
                .collect(),
        )
    }

    /// From the four spin-scheme probabilities in [`Label::ALL`] order.
    pub fn from_spin(p: &[f64; 4]) -> Result<Self> {
        Self::new(
            Label::ALL
                .iter()
                .map(|&l| (Outcome::from_label(l), p[l.index()]))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(Outcome, f64)] {
        &self.entries
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn probability(&self, outcome: Outcome) -> f64 {
        self.entries
            .iter()
            .filter(|(o, _)| *o == outcome)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Counts from repeated runs of the joint measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    pub counts: BTreeMap<Outcome, u64>,
    pub shots: u64,
    pub seed: Option<u64>,
    /// Normalization shortfall of the distribution that was sampled.
    pub deficit: f64,
}

impl ShotRecord {
    pub fn from_counts(counts: BTreeMap<Outcome, u64>, seed: Option<u64>) -> Result<Self> {
        let shots = counts.values().sum();
        if shots == 0 {
            return Err(Error::InvalidParameter("record holds no shots".into()));
        }
        Ok(Self {
            counts,
            shots,
            seed,
            deficit: 0.0,
        })
    }

    pub fn count(&self, outcome: Outcome) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn frequency(&self, outcome: Outcome) -> f64 {
        self.count(outcome) as f64 / self.shots as f64
    }
}

/// Multinomial draw of `shots` outcomes, as a chain of conditional binomials.
pub fn sample(distribution: &Distribution, shots: u64, seed: u64) -> Result<ShotRecord> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    let mut remaining = shots;
    let mut mass = 1.0;
    let last = distribution.entries.len() - 1;
    for (k, &(outcome, p)) in distribution.entries.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let drawn = if k == last {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .map_err(|e| Error::InvalidParameter(format!("binomial({remaining}, {q}): {e}")))?
                .sample(&mut rng)
        };
        if drawn > 0 {
            counts.insert(outcome, drawn);
        }
        remaining -= drawn;
        mass -= p;
    }
    Ok(ShotRecord {
        counts,
        shots,
        seed: Some(seed),
        deficit: distribution.deficit,
    })
}

/// Triple estimate with the covariance of the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TripleEstimate {
    pub triple: ExpectationTriple,
    pub std_errors: [f64; 3],
    #[serde(serialize_with = "serialize_rows")]
    pub covariance: Matrix3<f64>,
}

/// Row-major nested arrays, rather than nalgebra's flat column-major form.
pub fn matrix_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]])
}

fn serialize_rows<S: serde::Serializer>(
    m: &Matrix3<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

/// Moments (i, n, i·n) under weights that sum to one; second return value
/// is the single-shot covariance.
fn moments<'a>(
    weights: impl Iterator<Item = (&'a Outcome, f64)> + Clone,
) -> (Vector3<f64>, Matrix3<f64>) {
    let feature = |o: &Outcome| {
        Vector3::new(
            o.spin as f64,
            o.assistant as f64,
            o.spin as f64 * o.assistant as f64,
        )
    };
    let mean: Vector3<f64> = weights.clone().map(|(o, w)| feature(o) * w).sum();
    let mut cov = Matrix3::zeros();
    for (o, w) in weights {
        let d = feature(o) - mean;
        cov += d * d.transpose() * w;
    }
    (mean, cov)
}

/// Plug-in estimate of (⟨σ_x⟩, ⟨a†a⟩, ⟨a†aσ_x⟩) from counts.
pub fn estimate_triple(record: &ShotRecord) -> Result<TripleEstimate> {
    if record.shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let n = record.shots as f64;
    let (mean, cov) = moments(record.counts.iter().map(|(o, c)| (o, *c as f64 / n)));
    let covariance = cov / n;
    Ok(TripleEstimate {
        triple: ExpectationTriple::from_vector(&mean),
        std_errors: [0, 1, 2].map(|k| covariance[(k, k)].sqrt()),
        covariance,
    })
}

/// The same estimator applied to exact probabilities: no sampling noise.
pub fn exact_triple(distribution: &Distribution) -> ExpectationTriple {
    let (mean, _) = moments(distribution.entries.iter().map(|(o, p)| (o, *p)));
    ExpectationTriple::from_vector(&mean)
}

/// What the counts are inverted through.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Coherent(&'a ReconstructionSystem),
    Spin(&'a SpinScheme),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionReport {
    pub estimate: BlochVector,
    #[serde(serialize_with = "serialize_rows")]
    pub covariance: Matrix3<f64>,
    pub condition_number: f64,
    /// Spin scheme only: measured minus predicted P_{−−}.
    pub residual: Option<f64>,
    pub determinant: f64,
    /// |estimate| ≤ 1 (estimates outside the ball are reported, not clipped).
    pub physical: bool,
    pub shots: Option<u64>,
}

fn spin_probabilities(record: &ShotRecord) -> Result<[f64; 4]> {
    let known: u64 = Label::ALL
        .iter()
        .map(|&l| record.count(Outcome::from_label(l)))
        .sum();
    if known != record.shots {
        return Err(Error::InvalidParameter(
            "counts contain outcomes outside (±1, ±1)".into(),
        ));
    }
    Ok(Label::ALL.map(|l| record.frequency(Outcome::from_label(l))))
}

fn invert(m: &Matrix3<f64>, det: f64, floor: f64) -> Result<Matrix3<f64>> {
    if det.abs() <= floor {
        return Err(Error::IllConditioned {
            determinant: det,
            floor,
        });
    }
    m.try_inverse().ok_or(Error::IllConditioned {
        determinant: det,
        floor,
    })
}

fn spin_report(
    scheme: &SpinScheme,
    p: &[f64; 4],
    cov_p: Matrix3<f64>,
    floor: f64,
    shots: Option<u64>,
) -> Result<ReconstructionReport> {
    let est = scheme.reconstruct(p, floor)?;
    let r = scheme.coefficients.reduced_matrix();
    let r_inv = invert(&r, scheme.determinant, floor)?;
    Ok(ReconstructionReport {
        estimate: est.bloch,
        covariance: r_inv * cov_p * r_inv.transpose(),
        condition_number: condition_number(&r),
        residual: Some(est.residual),
        determinant: scheme.determinant,
        physical: est.bloch.norm() <= 1.0,
        shots,
    })
}

fn coherent_report(
    system: &ReconstructionSystem,
    y: &ExpectationTriple,
    cov_y: Matrix3<f64>,
    floor: f64,
    shots: Option<u64>,
) -> Result<ReconstructionReport> {
    let est = system.reconstruct(y, floor)?;
    let m_inv = invert(&system.matrix, system.determinant, floor)?;
    Ok(ReconstructionReport {
        estimate: est.bloch,
        covariance: m_inv * cov_y * m_inv.transpose(),
        condition_number: est.condition_number,
        residual: None,
        determinant: system.determinant,
        physical: est.bloch.norm() <= 1.0,
        shots,
    })
}

/// Point estimate and linearly propagated covariance from counts.
pub fn reconstruct_from_shots(
    record: &ShotRecord,
    target: Target<'_>,
    det_floor: f64,
) -> Result<ReconstructionReport> {
    match target {
        Target::Coherent(system) => {
            let est = estimate_triple(record)?;
            coherent_report(
                system,
                &est.triple,
                est.covariance,
                det_floor,
                Some(record.shots),
            )
        }
        Target::Spin(scheme) => {
            let p = spin_probabilities(record)?;
            let n = record.shots as f64;
            let cov = Matrix3::from_fn(|a, b| {
                if a == b {
                    p[a] * (1.0 - p[a]) / n
                } else {
                    -p[a] * p[b] / n
                }
            });
            spin_report(scheme, &p, cov, det_floor, Some(record.shots))
        }
    }
}

/// Infinite-shot limit: exact probabilities, zero covariance.
pub fn reconstruct_from_distribution(
    distribution: &Distribution,
    target: Target<'_>,
    det_floor: f64,
) -> Result<ReconstructionReport> {
    match target {
        Target::Coherent(system) => coherent_report(
            system,
            &exact_triple(distribution),
            Matrix3::zeros(),
            det_floor,
            None,
        ),
        Target::Spin(scheme) => {
            let p = Label::ALL.map(|l| distribution.probability(Outcome::from_label(l)));
            spin_report(scheme, &p, Matrix3::zeros(), det_floor, None)
        }
    }
}

/// Radial shrink onto the unit ball; vectors inside are returned unchanged.
pub fn project_to_ball(v: &BlochVector) -> BlochVector {
    let norm = v.norm();
    if norm <= 1.0 {
        *v
    } else {
        BlochVector::from(v.as_vector() / norm)
    }
}
