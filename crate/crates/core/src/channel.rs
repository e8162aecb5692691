//! Pinching-antenna geometry and the complex baseband signal model.
//!
//! A single dielectric waveguide runs along the y-axis at height `d` above the
//! ground plane, fed at the origin. Antenna `n` sits at `(0, v_n, d)`. A user
//! on the ground at `(u_x, u_y)` is observed sequentially through every
//! antenna, producing one complex sample per antenna:
//!
//! ```text
//! s_n(u) = gamma * a_n / d_n * exp(-j 2 pi d_n / lambda) * pilot
//! a_n    = lambda * sqrt(p) * exp(-(alpha + j beta) v_n) / (4 pi)
//! ```
//!
//! Observations add circularly-symmetric complex Gaussian noise of total
//! variance `sigma^2` per sample.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Bounds;

/// Speed of light in vacuum, m/s (SI exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a noise power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Ground-plane user coordinate in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserPosition {
    pub x: f64,
    pub y: f64,
}

impl UserPosition {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &UserPosition) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for UserPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Placement of the pinching antennas along the waveguide.
#[derive(Debug, Clone, PartialEq)]
pub enum AntennaLayout {
    /// `n` antennas at `v_k = (k - 1/2) * len / n`, `k = 1..=n`.
    Uniform(usize),
    /// Explicit feed-point offsets in meters, strictly increasing.
    Explicit(Vec<f64>),
}

impl AntennaLayout {
    pub fn positions(&self, waveguide_length_m: f64) -> Vec<f64> {
        match self {
            AntennaLayout::Uniform(n) => {
                let spacing = waveguide_length_m / *n as f64;
                (0..*n).map(|k| (k as f64 + 0.5) * spacing).collect()
            }
            AntennaLayout::Explicit(v) => v.clone(),
        }
    }
}

/// How the receiver noise level is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Dbm(f64),
    VarianceW(f64),
}

impl NoiseLevel {
    pub fn variance_w(self) -> f64 {
        match self {
            NoiseLevel::Dbm(dbm) => dbm_to_watts(dbm),
            NoiseLevel::VarianceW(w) => w,
        }
    }
}

/// User-facing inputs for building a [`SystemConfig`].
///
/// The default is the evaluation setup used throughout this crate: a 6 x 10 m
/// area, 3 m waveguide height, 2.8 GHz carrier, 0.1 W transmit power, PTFE-like
/// waveguide (eps_r = 2.08, tan delta = 4e-4), eight uniformly placed antennas
/// and -40 dBm noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub carrier_frequency_hz: f64,
    pub transmit_power_w: f64,
    pub relative_permittivity: f64,
    pub loss_tangent: f64,
    pub waveguide_height_m: f64,
    pub area_x_m: f64,
    pub area_y_m: f64,
    /// `None` means the waveguide spans the whole area along y.
    pub waveguide_length_m: Option<f64>,
    pub antennas: AntennaLayout,
    pub noise: NoiseLevel,
    pub channel_gain: f64,
    pub pilot_symbol: Complex64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 2.8e9,
            transmit_power_w: 0.1,
            relative_permittivity: 2.08,
            loss_tangent: 4e-4,
            waveguide_height_m: 3.0,
            area_x_m: 6.0,
            area_y_m: 10.0,
            waveguide_length_m: None,
            antennas: AntennaLayout::Uniform(8),
            noise: NoiseLevel::Dbm(-40.0),
            channel_gain: 1.0,
            pilot_symbol: Complex64::new(1.0, 0.0),
        }
    }
}

/// Validated physical configuration with derived RF constants.
///
/// Fields are private so the derived quantities (wavelength, alpha, beta,
/// per-antenna amplitudes) always agree with the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    carrier_frequency_hz: f64,
    wavelength_m: f64,
    transmit_power_w: f64,
    pilot_symbol: Complex64,
    relative_permittivity: f64,
    loss_tangent: f64,
    alpha_np_per_m: f64,
    beta_rad_per_m: f64,
    waveguide_height_m: f64,
    antenna_positions_m: Vec<f64>,
    area_x_m: f64,
    area_y_m: f64,
    waveguide_length_m: f64,
    noise_variance_w: f64,
    channel_gain: f64,
    // a_n = lambda sqrt(p) exp(-(alpha + j beta) v_n) / (4 pi)
    antenna_amplitudes: Vec<Complex64>,
}

fn require_positive(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            key,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

impl SystemConfig {
    pub fn new(params: &SystemParams) -> Result<Self> {
        require_positive("carrier_frequency_hz", params.carrier_frequency_hz)?;
        require_positive("transmit_power_w", params.transmit_power_w)?;
        require_positive("relative_permittivity", params.relative_permittivity)?;
        require_positive("waveguide_height_m", params.waveguide_height_m)?;
        require_positive("area_x_m", params.area_x_m)?;
        require_positive("area_y_m", params.area_y_m)?;
        require_positive("channel_gain", params.channel_gain)?;
        if !(params.loss_tangent.is_finite() && params.loss_tangent >= 0.0) {
            return Err(Error::invalid(
                "loss_tangent",
                format!(
                    "must be non-negative and finite, got {}",
                    params.loss_tangent
                ),
            ));
        }
        let waveguide_length_m = params.waveguide_length_m.unwrap_or(params.area_y_m);
        require_positive("waveguide_length_m", waveguide_length_m)?;
        if waveguide_length_m > params.area_y_m {
            return Err(Error::invalid(
                "waveguide_length_m",
                format!(
                    "{waveguide_length_m} exceeds area_y_m = {}",
                    params.area_y_m
                ),
            ));
        }
        let pilot_modulus = params.pilot_symbol.norm();
        if !((pilot_modulus - 1.0).abs() <= 1e-12) {
            return Err(Error::invalid(
                "pilot_symbol",
                format!("must have unit modulus, got |s| = {pilot_modulus}"),
            ));
        }
        let noise_variance_w = params.noise.variance_w();
        require_positive("noise_variance_w", noise_variance_w)?;

        if let AntennaLayout::Uniform(0) = params.antennas {
            return Err(Error::invalid("n_pas", "at least one antenna is required"));
        }
        let antenna_positions_m = params.antennas.positions(waveguide_length_m);
        validate_antennas(&antenna_positions_m, waveguide_length_m)?;

        let wavelength_m = SPEED_OF_LIGHT / params.carrier_frequency_hz;
        let sqrt_eps = params.relative_permittivity.sqrt();
        let alpha_np_per_m = PI * sqrt_eps * params.loss_tangent / wavelength_m;
        let beta_rad_per_m = 2.0 * PI * sqrt_eps / wavelength_m;

        let mut cfg = Self {
            carrier_frequency_hz: params.carrier_frequency_hz,
            wavelength_m,
            transmit_power_w: params.transmit_power_w,
            pilot_symbol: params.pilot_symbol,
            relative_permittivity: params.relative_permittivity,
            loss_tangent: params.loss_tangent,
            alpha_np_per_m,
            beta_rad_per_m,
            waveguide_height_m: params.waveguide_height_m,
            antenna_positions_m,
            area_x_m: params.area_x_m,
            area_y_m: params.area_y_m,
            waveguide_length_m,
            noise_variance_w,
            channel_gain: params.channel_gain,
            antenna_amplitudes: Vec::new(),
        };
        cfg.refresh_amplitudes();
        Ok(cfg)
    }

    fn refresh_amplitudes(&mut self) {
        let scale = self.wavelength_m * self.transmit_power_w.sqrt() / (4.0 * PI);
        self.antenna_amplitudes = (0..self.antenna_positions_m.len())
            .map(|n| scale * waveguide_coefficient_unchecked(self, n))
            .collect();
    }

    /// Copy of this configuration with a different noise level.
    pub fn with_noise(&self, noise: NoiseLevel) -> Result<Self> {
        let variance = noise.variance_w();
        require_positive("noise_variance_w", variance)?;
        let mut cfg = self.clone();
        cfg.noise_variance_w = variance;
        Ok(cfg)
    }

    pub fn with_noise_dbm(&self, dbm: f64) -> Result<Self> {
        self.with_noise(NoiseLevel::Dbm(dbm))
    }

    /// Copy of this configuration with a different antenna layout.
    pub fn with_antennas(&self, layout: &AntennaLayout) -> Result<Self> {
        if let AntennaLayout::Uniform(0) = layout {
            return Err(Error::invalid("n_pas", "at least one antenna is required"));
        }
        let positions = layout.positions(self.waveguide_length_m);
        validate_antennas(&positions, self.waveguide_length_m)?;
        let mut cfg = self.clone();
        cfg.antenna_positions_m = positions;
        cfg.refresh_amplitudes();
        Ok(cfg)
    }

    pub fn with_pilot(&self, pilot: Complex64) -> Result<Self> {
        let modulus = pilot.norm();
        if !((modulus - 1.0).abs() <= 1e-12) {
            return Err(Error::invalid(
                "pilot_symbol",
                format!("must have unit modulus, got |s| = {modulus}"),
            ));
        }
        let mut cfg = self.clone();
        cfg.pilot_symbol = pilot;
        Ok(cfg)
    }

    pub fn carrier_frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }
    pub fn speed_of_light_m_per_s(&self) -> f64 {
        SPEED_OF_LIGHT
    }
    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }
    pub fn transmit_power_w(&self) -> f64 {
        self.transmit_power_w
    }
    pub fn pilot_symbol(&self) -> Complex64 {
        self.pilot_symbol
    }
    pub fn relative_permittivity(&self) -> f64 {
        self.relative_permittivity
    }
    pub fn loss_tangent(&self) -> f64 {
        self.loss_tangent
    }
    pub fn alpha_np_per_m(&self) -> f64 {
        self.alpha_np_per_m
    }
    pub fn beta_rad_per_m(&self) -> f64 {
        self.beta_rad_per_m
    }
    pub fn waveguide_height_m(&self) -> f64 {
        self.waveguide_height_m
    }
    pub fn antenna_positions_m(&self) -> &[f64] {
        &self.antenna_positions_m
    }
    pub fn num_antennas(&self) -> usize {
        self.antenna_positions_m.len()
    }
    pub fn area_x_m(&self) -> f64 {
        self.area_x_m
    }
    pub fn area_y_m(&self) -> f64 {
        self.area_y_m
    }
    pub fn waveguide_length_m(&self) -> f64 {
        self.waveguide_length_m
    }
    pub fn noise_variance_w(&self) -> f64 {
        self.noise_variance_w
    }
    pub fn noise_dbm(&self) -> f64 {
        watts_to_dbm(self.noise_variance_w)
    }
    pub fn channel_gain(&self) -> f64 {
        self.channel_gain
    }

    /// Complex amplitude `a_n` of antenna `n` (free-space scale and
    /// in-waveguide propagation, excluding the user-dependent terms).
    pub fn antenna_amplitude(&self, n: usize) -> Result<Complex64> {
        self.check_index(n)?;
        Ok(self.antenna_amplitudes[n])
    }

    pub(crate) fn amplitudes(&self) -> &[Complex64] {
        &self.antenna_amplitudes
    }

    /// Deployment area `[0, area_x] x [0, area_y]`.
    pub fn area(&self) -> Bounds {
        Bounds::new(0.0, self.area_x_m, 0.0, self.area_y_m)
    }

    /// Wavenumber `2 pi / lambda` of the free-space link.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n < self.antenna_positions_m.len() {
            Ok(())
        } else {
            Err(Error::AntennaIndex {
                index: n,
                count: self.antenna_positions_m.len(),
            })
        }
    }
}

fn validate_antennas(positions: &[f64], waveguide_length_m: f64) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::invalid(
            "antenna_positions_m",
            "at least one antenna is required",
        ));
    }
    for (k, &v) in positions.iter().enumerate() {
        if !(v.is_finite() && (0.0..=waveguide_length_m).contains(&v)) {
            return Err(Error::invalid(
                "antenna_positions_m",
                format!(
                    "antenna {} at {v} m lies outside the waveguide [0, {waveguide_length_m}]",
                    k + 1
                ),
            ));
        }
        if k > 0 && v <= positions[k - 1] {
            return Err(Error::invalid(
                "antenna_positions_m",
                format!("antenna {} at {v} m is not beyond antenna {}", k + 1, k),
            ));
        }
    }
    Ok(())
}

/// Ordered complex samples, one per antenna.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalVector(Vec<Complex64>);

impl SignalVector {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self(samples)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * factor).collect())
    }
}

impl From<Vec<Complex64>> for SignalVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// Distance from the user to antenna `n`: `sqrt(u_x^2 + (u_y - v_n)^2 + d^2)`.
pub fn distance(cfg: &SystemConfig, u: &UserPosition, n: usize) -> Result<f64> {
    cfg.check_index(n)?;
    Ok(distance_unchecked(cfg, u, n))
}

#[inline]
pub(crate) fn distance_unchecked(cfg: &SystemConfig, u: &UserPosition, n: usize) -> f64 {
    let dy = u.y - cfg.antenna_positions_m[n];
    let h = cfg.waveguide_height_m;
    (u.x * u.x + dy * dy + h * h).sqrt()
}

/// In-waveguide propagation factor `exp(-(alpha + j beta) v_n)`.
pub fn waveguide_coefficient(cfg: &SystemConfig, n: usize) -> Result<Complex64> {
    cfg.check_index(n)?;
    Ok(waveguide_coefficient_unchecked(cfg, n))
}

fn waveguide_coefficient_unchecked(cfg: &SystemConfig, n: usize) -> Complex64 {
    let v = cfg.antenna_positions_m[n];
    Complex64::from_polar((-cfg.alpha_np_per_m * v).exp(), -cfg.beta_rad_per_m * v)
}

/// Noiseless sample of antenna `n` at distance `d_n` from the user.
#[inline]
pub(crate) fn model_sample(cfg: &SystemConfig, n: usize, d_n: f64) -> Complex64 {
    let propagation = Complex64::from_polar(cfg.channel_gain / d_n, -cfg.wavenumber() * d_n);
    cfg.antenna_amplitudes[n] * propagation * cfg.pilot_symbol
}

/// Noiseless signal vector `s(u)`.
pub fn model_signal(cfg: &SystemConfig, u: &UserPosition) -> SignalVector {
    let mut out = Vec::with_capacity(cfg.num_antennas());
    fill_model_signal(cfg, u, &mut out);
    SignalVector(out)
}

pub(crate) fn fill_model_signal(cfg: &SystemConfig, u: &UserPosition, out: &mut Vec<Complex64>) {
    out.clear();
    out.extend(
        (0..cfg.num_antennas()).map(|n| model_sample(cfg, n, distance_unchecked(cfg, u, n))),
    );
}

/// Draws `sigma^2`-variance circularly-symmetric complex Gaussian noise for
/// every antenna. Real and imaginary parts each carry `sigma^2 / 2`.
pub fn draw_noise(cfg: &SystemConfig, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_dev = (cfg.noise_variance_w / 2.0).sqrt();
    (0..cfg.num_antennas())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(std_dev * re, std_dev * im)
        })
        .collect()
}

/// `model_signal(cfg, u)` plus seeded receiver noise. Bit-reproducible for
/// identical `(cfg, u, seed)`.
pub fn synthesize_observation(cfg: &SystemConfig, u: &UserPosition, seed: u64) -> SignalVector {
    let mut signal = model_signal(cfg, u).into_inner();
    for (s, w) in signal.iter_mut().zip(draw_noise(cfg, seed)) {
        *s += w;
    }
    SignalVector(signal)
}

/// Squared error `||r - s(u)||^2`; minimising it maximises the likelihood.
pub fn residual(cfg: &SystemConfig, r: &SignalVector, u: &UserPosition) -> Result<f64> {
    check_len(cfg, r)?;
    Ok(residual_unchecked(cfg, r.samples(), u))
}

#[inline]
pub(crate) fn residual_unchecked(cfg: &SystemConfig, r: &[Complex64], u: &UserPosition) -> f64 {
    r.iter()
        .enumerate()
        .map(|(n, rn)| (rn - model_sample(cfg, n, distance_unchecked(cfg, u, n))).norm_sqr())
        .sum()
}

pub(crate) fn check_len(cfg: &SystemConfig, r: &SignalVector) -> Result<()> {
    if r.len() == cfg.num_antennas() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: cfg.num_antennas(),
            got: r.len(),
        })
    }
}
