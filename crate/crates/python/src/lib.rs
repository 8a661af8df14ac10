//! Python bindings: encode, decode, (de)serialise, verify and measure.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use rifs_codec::bitstream::{deserialize, serialize};
use rifs_codec::cli::verify_code;
use rifs_codec::metrics;
use rifs_codec::pgm::{read_image, write_image, GrayImage};
use rifs_codec::{CompressedImage, EncoderConfig, Error, Image, Initial};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A compressed image.
#[pyclass(name = "Code", module = "rifs")]
pub struct PyCode {
    inner: CompressedImage,
}

#[pymethods]
impl PyCode {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self { inner: deserialize(data).map_err(to_py)? })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &serialize(&self.inner).map_err(to_py)?))
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height
    }

    #[getter]
    fn leaves(&self) -> usize {
        self.inner.codes.len()
    }

    fn compression_ratio(&self) -> PyResult<f64> {
        metrics::compression_ratio(&self.inner).map_err(to_py)
    }

    /// Returns `(pixels, iterations, last_delta)`.
    #[pyo3(signature = (max_iter=16, eps=0.25, initial=128.0))]
    fn decode<'py>(&self, py: Python<'py>, max_iter: usize, eps: f64, initial: f64) -> PyResult<(Bound<'py, PyBytes>, usize, f64)> {
        let out = rifs_codec::decode(&self.inner, max_iter, eps, &Initial::Flat(initial)).map_err(to_py)?;
        Ok((PyBytes::new(py, &out.to_gray8()), out.iterations, out.last_delta()))
    }

    #[pyo3(signature = (seed=0))]
    fn verify<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let r = verify_code(&self.inner, seed);
        let d = PyDict::new(py);
        d.set_item("passed", r.passed())?;
        d.set_item("join_up_max", r.join_up_max)?;
        d.set_item("contraction_max", r.contraction_max)?;
        d.set_item("theta", r.theta)?;
        d.set_item("s", r.s)?;
        d.set_item("irreducible", r.irreducible)?;
        d.set_item("failures", r.failures)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Code({}x{}, {} leaves)", self.inner.width, self.inner.height, self.inner.codes.len())
    }
}

/// Encodes 8-bit row-major pixels.
#[pyfunction]
#[pyo3(signature = (pixels, width, height, cell=32, domain_factor=2, stride=None, tolerance=8.0, d_max=0.95, delta=4, max_depth=3, orientations=true))]
#[allow(clippy::too_many_arguments)]
fn encode(
    py: Python<'_>,
    pixels: &[u8],
    width: u32,
    height: u32,
    cell: u32,
    domain_factor: u32,
    stride: Option<u32>,
    tolerance: f64,
    d_max: f64,
    delta: u32,
    max_depth: u32,
    orientations: bool,
) -> PyResult<PyCode> {
    let image = Image::from_gray8(width, height, pixels).map_err(to_py)?;
    let config = EncoderConfig {
        region_cell: cell,
        domain_factor,
        domain_stride: stride,
        tolerance,
        d_max,
        delta,
        max_split_depth: max_depth,
        search_orientations: orientations,
    };
    let inner = py.detach(|| rifs_codec::encode(&image, &config)).map_err(to_py)?;
    Ok(PyCode { inner })
}

#[pyfunction]
fn psnr(a: &[u8], b: &[u8]) -> PyResult<f64> {
    metrics::psnr(a, b).map_err(to_py)
}

/// Returns `(width, height, pixels)`.
#[pyfunction]
fn read_pgm<'py>(py: Python<'py>, path: PathBuf) -> PyResult<(u32, u32, Bound<'py, PyBytes>)> {
    let img = read_image(&path).map_err(to_py)?;
    Ok((img.width, img.height, PyBytes::new(py, &img.pixels)))
}

#[pyfunction]
fn write_pgm(path: PathBuf, width: u32, height: u32, pixels: &[u8]) -> PyResult<()> {
    let img = GrayImage::new(width, height, pixels.to_vec()).map_err(to_py)?;
    write_image(&path, &img).map_err(to_py)
}

#[pymodule]
fn rifs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCode>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(read_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(write_pgm, m)?)?;
    Ok(())
}
