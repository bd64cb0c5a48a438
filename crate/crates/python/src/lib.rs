//! Python bindings. Bloch vectors cross the boundary as `(x, y, z)` tuples,
//! matrices as row-major nested lists.

use assist_tomo::coherent::{self, Triplet};
use assist_tomo::measurement::{self, Distribution, Target};
use assist_tomo::{oracle, spin, BlochVector, Error, ExpectationTriple};
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

type Vec3 = (f64, f64, f64);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::IllConditioned { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn bloch(v: Vec3) -> BlochVector {
    BlochVector::new(v.0, v.1, v.2)
}

fn tuple(v: &BlochVector) -> Vec3 {
    (v.x, v.y, v.z)
}

fn triple(y: &ExpectationTriple) -> Vec3 {
    (y.sigma_x, y.photons, y.photons_sigma_x)
}

fn rows(m: [[f64; 3]; 3]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

/// Two-qubit assisted scheme: system spin plus one assistant spin.
#[pyclass(name = "SpinScheme", frozen)]
struct PySpinScheme {
    inner: spin::SpinScheme,
}

#[pymethods]
impl PySpinScheme {
    #[staticmethod]
    fn optimal() -> Self {
        Self {
            inner: spin::SpinScheme::optimal(),
        }
    }

    #[staticmethod]
    fn ising() -> Self {
        Self {
            inner: spin::SpinScheme::ising(),
        }
    }

    #[getter]
    fn determinant(&self) -> f64 {
        self.inner.determinant
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    /// Joint probabilities in the order (++, +−, −+, −−).
    fn probabilities(&self, rho: Vec3) -> PyResult<[f64; 4]> {
        self.inner
            .forward_probabilities(&bloch(rho))
            .map_err(py_err)
    }

    /// Returns `(bloch, residual)`.
    #[pyo3(signature = (probabilities, det_floor = spin::DEFAULT_DET_FLOOR))]
    fn reconstruct(&self, probabilities: [f64; 4], det_floor: f64) -> PyResult<(Vec3, f64)> {
        let est = self
            .inner
            .reconstruct(&probabilities, det_floor)
            .map_err(py_err)?;
        Ok((tuple(&est.bloch), est.residual))
    }

    /// Simulates `shots` repetitions and reconstructs from the counts.
    #[pyo3(signature = (rho, shots, seed = 0, det_floor = spin::DEFAULT_DET_FLOOR))]
    fn simulate(
        &self,
        rho: Vec3,
        shots: u64,
        seed: u64,
        det_floor: f64,
    ) -> PyResult<Reconstruction> {
        let dist = Distribution::from_spin(
            &self
                .inner
                .forward_probabilities(&bloch(rho))
                .map_err(py_err)?,
        )
        .map_err(py_err)?;
        let record = measurement::sample(&dist, shots, seed).map_err(py_err)?;
        measurement::reconstruct_from_shots(&record, Target::Spin(&self.inner), det_floor)
            .map(Reconstruction::from)
            .map_err(py_err)
    }
}

/// Cavity-assisted setup: γ coupling, ω frequency, coherent amplitude α.
#[pyclass(name = "JcParams", frozen)]
struct PyJcParams {
    inner: coherent::JcParams,
}

#[pymethods]
impl PyJcParams {
    #[new]
    #[pyo3(signature = (gamma, omega, alpha, n_max = coherent::DEFAULT_N_MAX))]
    fn new(gamma: f64, omega: f64, alpha: Complex64, n_max: usize) -> PyResult<Self> {
        coherent::JcParams::new(gamma, omega, alpha, n_max)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn with_mean_photons(gamma: f64, omega: f64, mean_photons: f64) -> PyResult<Self> {
        coherent::JcParams::with_mean_photons(gamma, omega, mean_photons)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    #[getter]
    fn alpha(&self) -> Complex64 {
        self.inner.alpha
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.inner.n_max
    }

    #[getter]
    fn mean_photons(&self) -> f64 {
        self.inner.mean_photons()
    }

    /// Linear system at time t.
    fn system(&self, t: f64) -> PyResult<System> {
        coherent::analytic_system(t, &self.inner)
            .map(|inner| System { inner })
            .map_err(py_err)
    }

    fn determinant(&self, t: f64) -> PyResult<f64> {
        coherent::analytic_system(t, &self.inner)
            .map(|s| s.determinant)
            .map_err(py_err)
    }

    fn determinant_series(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        coherent::determinant_series(&self.inner, &times).map_err(py_err)
    }

    /// (⟨σx⟩, ⟨a†a⟩, ⟨a†aσx⟩) from the series solution.
    fn expectations(&self, t: f64, rho: Vec3) -> PyResult<Vec3> {
        coherent::expectations_analytic(t, &self.inner, &bloch(rho))
            .map(|y| triple(&y))
            .map_err(py_err)
    }

    /// Same triple from direct evolution of the truncated joint state.
    fn oracle_expectations(&self, t: f64, rho: Vec3) -> PyResult<Vec3> {
        oracle::oracle_expectations(t, &self.inner, &bloch(rho))
            .map(|y| triple(&y))
            .map_err(py_err)
    }

    /// Rank of the sensitivity matrix for the σx or σz observable triplet.
    #[pyo3(signature = (t, triplet = "sigma-x"))]
    fn triplet_rank(&self, t: f64, triplet: &str) -> PyResult<usize> {
        let triplet = match triplet {
            "sigma-x" => Triplet::SigmaX,
            "sigma-z" => Triplet::SigmaZ,
            other => return Err(PyValueError::new_err(format!("unknown triplet {other:?}"))),
        };
        coherent::singular_triplet_check(t, &self.inner, triplet)
            .map(|r| r.rank)
            .map_err(py_err)
    }

    /// Samples the (σx, n) joint distribution at t and reconstructs.
    #[pyo3(signature = (t, rho, shots, seed = 0, det_floor = spin::DEFAULT_DET_FLOOR))]
    fn simulate(
        &self,
        t: f64,
        rho: Vec3,
        shots: u64,
        seed: u64,
        det_floor: f64,
    ) -> PyResult<Reconstruction> {
        let system = coherent::analytic_system(t, &self.inner).map_err(py_err)?;
        let rows = oracle::joint_distribution(t, &self.inner, &bloch(rho)).map_err(py_err)?;
        let dist = Distribution::from_coherent(&rows).map_err(py_err)?;
        let record = measurement::sample(&dist, shots, seed).map_err(py_err)?;
        measurement::reconstruct_from_shots(&record, Target::Coherent(&system), det_floor)
            .map(Reconstruction::from)
            .map_err(py_err)
    }
}

/// y = M·ρ⃗ + b at a fixed time.
#[pyclass(name = "System", frozen)]
struct System {
    inner: coherent::ReconstructionSystem,
}

#[pymethods]
impl System {
    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(measurement::matrix_rows(&self.inner.matrix))
    }

    #[getter]
    fn offset(&self) -> Vec3 {
        (
            self.inner.offset[0],
            self.inner.offset[1],
            self.inner.offset[2],
        )
    }

    #[getter]
    fn determinant(&self) -> f64 {
        self.inner.determinant
    }

    #[getter]
    fn condition_number(&self) -> f64 {
        self.inner.condition_number()
    }

    fn predict(&self, rho: Vec3) -> Vec3 {
        triple(&self.inner.predict(&bloch(rho)))
    }

    #[pyo3(signature = (expectations, det_floor = spin::DEFAULT_DET_FLOOR))]
    fn reconstruct(&self, expectations: Vec3, det_floor: f64) -> PyResult<Vec3> {
        let y = ExpectationTriple {
            sigma_x: expectations.0,
            photons: expectations.1,
            photons_sigma_x: expectations.2,
        };
        self.inner
            .reconstruct(&y, det_floor)
            .map(|e| tuple(&e.bloch))
            .map_err(py_err)
    }
}

#[pyclass(name = "Reconstruction", frozen, get_all)]
struct Reconstruction {
    estimate: Vec3,
    covariance: Vec<Vec<f64>>,
    condition_number: f64,
    determinant: f64,
    residual: Option<f64>,
    physical: bool,
}

impl From<measurement::ReconstructionReport> for Reconstruction {
    fn from(r: measurement::ReconstructionReport) -> Self {
        Self {
            estimate: tuple(&r.estimate),
            covariance: rows(measurement::matrix_rows(&r.covariance)),
            condition_number: r.condition_number,
            determinant: r.determinant,
            residual: r.residual,
            physical: r.physical,
        }
    }
}

/// Largest |Δ| achievable with one assistant qubit.
#[pyfunction]
fn optimal_determinant() -> f64 {
    spin::OPTIMAL_DETERMINANT
}

#[pymodule]
fn assist_tomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpinScheme>()?;
    m.add_class::<PyJcParams>()?;
    m.add_class::<System>()?;
    m.add_class::<Reconstruction>()?;
    m.add_function(wrap_pyfunction!(optimal_determinant, m)?)?;
    Ok(())
}
