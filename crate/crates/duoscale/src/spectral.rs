//! Almost-periodic Fourier coefficients of simulated trajectories and peak
//! extraction from the resulting spectra.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::TimeSeries;

/// Fraction of the window dropped as initial transient by default.
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.1;

/// Almost-periodic spectrum on a grid of trial angular frequencies.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// Analysis window `[t_start, t_end]` after transient removal.
    pub window: (f64, f64),
}

impl Spectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm()).collect()
    }

    pub fn grid_step(&self) -> f64 {
        if self.frequencies.len() < 2 {
            0.0
        } else {
            self.frequencies[1] - self.frequencies[0]
        }
    }

    pub fn window_length(&self) -> f64 {
        self.window.1 - self.window.0
    }
}

/// A detected spectral peak.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    pub frequency: f64,
    pub magnitude: f64,
    /// Magnitude relative to the median magnitude of the spectrum.
    pub prominence: f64,
}

/// Almost-periodic Fourier coefficient
/// `alpha(lambda) = (1/T) \int_0^T u_c(t) e^{-i lambda t} dt`
/// via the trapezoid rule on the sample grid, over the whole series.
pub fn ap_fourier_coefficient(
    series: &TimeSeries,
    component: usize,
    lambda: f64,
) -> Result<Complex64> {
    ap_fourier_coefficient_from(series, component, lambda, 0)
}

/// Same as [`ap_fourier_coefficient`] starting at sample index `start`.
fn ap_fourier_coefficient_from(
    series: &TimeSeries,
    component: usize,
    lambda: f64,
    start: usize,
) -> Result<Complex64> {
    let n = series.len();
    if n < 2 || start + 2 > n {
        return Err(Error::invalid(
            "need at least 2 samples in the analysis window",
        ));
    }
    if component >= series.dim {
        return Err(Error::invalid("component index out of range"));
    }
    let dt = series.dt;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in start..n {
        let t = series.time(i);
        let w = if i == start || i == n - 1 { 0.5 } else { 1.0 };
        let u = series.displacement(i)[component];
        acc += Complex64::new(0.0, -lambda * t).exp() * (u * w);
    }
    let big_t = (n - 1 - start) as f64 * dt;
    Ok(acc * dt / big_t)
}

/// Evaluates the almost-periodic coefficient on a uniform frequency grid.
///
/// The first `transient_fraction` of the window is dropped before analysis.
/// Grid points are independent; the scan honours the `DUOSCALE_THREADS`
/// worker cap while keeping a fixed output ordering.
pub fn spectrum_scan(
    series: &TimeSeries,
    component: usize,
    lambda_min: f64,
    lambda_max: f64,
    n_grid: usize,
    transient_fraction: f64,
) -> Result<Spectrum> {
    if !(lambda_min < lambda_max) {
        return Err(Error::invalid("lambda_min must be < lambda_max"));
    }
    if n_grid < 2 {
        return Err(Error::invalid("n_grid must be >= 2"));
    }
    if !(0.0..1.0).contains(&transient_fraction) {
        return Err(Error::invalid("transient fraction must lie in [0, 1)"));
    }
    if component >= series.dim {
        return Err(Error::invalid("component index out of range"));
    }
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid("series too short for spectral analysis"));
    }
    let start = ((n - 1) as f64 * transient_fraction).floor() as usize;
    let start = start.min(n - 2);

    let frequencies: Vec<f64> = (0..n_grid)
        .map(|i| lambda_min + (lambda_max - lambda_min) * i as f64 / (n_grid - 1) as f64)
        .collect();

    let workers = worker_count(n_grid);
    let mut coefficients = vec![Complex64::new(0.0, 0.0); n_grid];
    if workers <= 1 {
        for (i, &lambda) in frequencies.iter().enumerate() {
            coefficients[i] = ap_fourier_coefficient_from(series, component, lambda, start)?;
        }
    } else {
        let chunk = n_grid.div_ceil(workers);
        let freqs = &frequencies;
        let results: Vec<Result<Vec<Complex64>>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(n_grid);
                if lo >= hi {
                    break;
                }
                handles.push(scope.spawn(move || {
                    freqs[lo..hi]
                        .iter()
                        .map(|&lambda| {
                            ap_fourier_coefficient_from(series, component, lambda, start)
                        })
                        .collect::<Result<Vec<_>>>()
                }));
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let mut i = 0;
        for block in results {
            for c in block? {
                coefficients[i] = c;
                i += 1;
            }
        }
    }

    Ok(Spectrum {
        frequencies,
        coefficients,
        window: (series.time(start), series.time(n - 1)),
    })
}

/// Worker pool size: `DUOSCALE_THREADS` if set, else available parallelism,
/// always capped by the amount of work.
fn worker_count(work_items: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1);
    let cap = std::env::var("DUOSCALE_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw);
    cap.min(work_items).max(1)
}

/// Local maxima of `|alpha|` whose magnitude exceeds
/// `min_prominence * median(|alpha|)`, sorted by magnitude descending.
///
/// A finite window turns every tone into a Dirichlet kernel whose sidelobes
/// (spaced `2 pi / T`) are themselves local maxima well above the median; a
/// candidate therefore additionally has to dominate a neighborhood a few
/// sidelobe spacings wide, which suppresses the ringing without windowing
/// the signal.
pub fn peak_detect(spectrum: &Spectrum, min_prominence: f64) -> Result<Vec<Peak>> {
    if !(min_prominence > 0.0) {
        return Err(Error::invalid("min_prominence must be > 0"));
    }
    let mags = spectrum.magnitudes();
    let n = mags.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let floor = min_prominence * median.max(f64::MIN_POSITIVE);

    // neighborhood half-width: ~3 sidelobe spacings, at least one bin
    let step = spectrum.grid_step();
    let window = if step > 0.0 && spectrum.window_length() > 0.0 {
        let sidelobe = 2.0 * std::f64::consts::PI / spectrum.window_length();
        ((3.0 * sidelobe / step).ceil() as usize).max(1)
    } else {
        1
    };

    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(mags[i] > mags[i - 1] && mags[i] >= mags[i + 1] && mags[i] > floor && mags[i] > 0.0) {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n - 1);
        let dominated = (lo..=hi).any(|j| j != i && mags[j] > mags[i]);
        if !dominated {
            peaks.push(Peak {
                frequency: spectrum.frequencies[i],
                magnitude: mags[i],
                prominence: mags[i] / median.max(f64::MIN_POSITIVE),
            });
        }
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    Ok(peaks)
}
