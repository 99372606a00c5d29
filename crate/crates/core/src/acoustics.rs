//! Image-method room acoustics and the nonlinear feedforward plant.
//!
//! The plant maps a reference `x` and a control drive `y` to the residual at
//! the error microphone: `e = p∗x + s∗f(y)`, where `f` is the saturating
//! scaled-error-function (SEF) loudspeaker model.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::convolve::direct_convolve_slice;
use crate::error::{AncError, Result};
pub use crate::signal::{FirCoeffs, Signal};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Half-width, in samples, of the windowed-sinc fractional-delay kernel.
pub const SINC_HALF_WIDTH: usize = 8;

/// How an image's arrival time is placed on the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayInterpolation {
    /// Hann-windowed sinc centred on the exact arrival time.
    #[default]
    WindowedSinc,
    /// Whole arrival energy on the nearest sample.
    Nearest,
}

/// Shoebox room with one source and one microphone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    pub source_position: [f64; 3],
    pub mic_position: [f64; 3],
    pub t60: f64,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    pub rir_length: usize,
    /// Overrides the wall pressure-reflection coefficient derived from `t60`.
    #[serde(default)]
    pub wall_reflection: Option<f64>,
    #[serde(default)]
    pub interpolation: DelayInterpolation,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl RoomSpec {
    /// A room with default speed of sound and derived reflection coefficient.
    pub fn new(
        dimensions: [f64; 3],
        source_position: [f64; 3],
        mic_position: [f64; 3],
        t60: f64,
        sample_rate: f64,
        rir_length: usize,
    ) -> Self {
        RoomSpec {
            dimensions,
            source_position,
            mic_position,
            t60,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            sample_rate,
            rir_length,
            wall_reflection: None,
            interpolation: DelayInterpolation::WindowedSinc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(AncError::Domain(format!("room dimensions {:?} must be positive", self.dimensions)));
        }
        for (what, p) in [("source", self.source_position), ("microphone", self.mic_position)] {
            let inside = p.iter().zip(&self.dimensions).all(|(&c, &d)| c > 0.0 && c < d);
            if !inside {
                return Err(AncError::Domain(format!("{what} position {p:?} is not strictly inside the room")));
            }
        }
        if !(self.t60 > 0.0 && self.t60.is_finite()) {
            return Err(AncError::Domain(format!("t60 {} must be positive", self.t60)));
        }
        if !(self.sample_rate > 0.0) || self.rir_length == 0 || !(self.speed_of_sound > 0.0) {
            return Err(AncError::Domain("sample rate, RIR length and speed of sound must be positive".into()));
        }
        if let Some(b) = self.wall_reflection {
            if !(0.0..1.0).contains(&b) {
                return Err(AncError::Domain(format!("wall reflection {b} must lie in [0, 1)")));
            }
        }
        if self.wall_reflection.is_none() && self.sabine_absorption() >= 1.0 {
            return Err(AncError::Domain(format!(
                "t60 {} s is shorter than a fully absorbing room allows",
                self.t60
            )));
        }
        if self.source_mic_distance() == 0.0 {
            return Err(AncError::DegenerateGeometry("source coincides with microphone".into()));
        }
        Ok(())
    }

    pub fn source_mic_distance(&self) -> f64 {
        distance(&self.source_position, &self.mic_position)
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    /// Mean absorption from Sabine's formula, `ᾱ = 24·ln10·V / (c·S·T60)`.
    pub fn sabine_absorption(&self) -> f64 {
        24.0 * std::f64::consts::LN_10 * self.volume() / (self.speed_of_sound * self.surface() * self.t60)
    }

    /// Wall pressure-reflection coefficient `β = √(1 − ᾱ)`, or the override.
    pub fn reflection_coefficient(&self) -> f64 {
        match self.wall_reflection {
            Some(b) => b,
            None => (1.0 - self.sabine_absorption()).max(0.0).sqrt(),
        }
    }

    /// Direct-path arrival in whole samples.
    pub fn direct_delay_samples(&self) -> usize {
        (self.sample_rate * self.source_mic_distance() / self.speed_of_sound).round() as usize
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Allen–Berkley image-method room impulse response.
///
/// Every image whose arrival (plus the interpolation kernel) can land inside
/// `rir_length` samples is summed with amplitude `β^k / (4π·d)`, where `k`
/// is the number of wall reflections and `d` the image distance.
pub fn simulate_rir(room: &RoomSpec) -> Result<FirCoeffs> {
    room.validate()?;
    let len = room.rir_length;
    let fs = room.sample_rate;
    let c = room.speed_of_sound;
    let beta = room.reflection_coefficient();
    let reach = (len + SINC_HALF_WIDTH + 1) as f64 * c / fs;
    let orders: Vec<i64> = room
        .dimensions
        .iter()
        .map(|&d| (reach / (2.0 * d)).ceil() as i64 + 1)
        .collect();
    let half = SINC_HALF_WIDTH as f64;
    let mut taps = vec![0.0; len];

    for nx in -orders[0]..=orders[0] {
        for ny in -orders[1]..=orders[1] {
            for nz in -orders[2]..=orders[2] {
                let n = [nx, ny, nz];
                for q in 0..8u8 {
                    let mut img = [0.0; 3];
                    let mut reflections = 0i64;
                    for axis in 0..3 {
                        let qa = ((q >> axis) & 1) as i64;
                        let sign = if qa == 1 { -1.0 } else { 1.0 };
                        img[axis] = sign * room.source_position[axis] + 2.0 * n[axis] as f64 * room.dimensions[axis];
                        reflections += (n[axis] - qa).abs() + n[axis].abs();
                    }
                    let d = distance(&img, &room.mic_position);
                    if d > reach {
                        continue;
                    }
                    let amp = beta.powi(reflections as i32) / (4.0 * std::f64::consts::PI * d);
                    let tau = d * fs / c;
                    match room.interpolation {
                        DelayInterpolation::Nearest => {
                            let i = tau.round() as usize;
                            if i < len {
                                taps[i] += amp;
                            }
                        }
                        DelayInterpolation::WindowedSinc => {
                            let lo = (tau - half).ceil().max(0.0) as usize;
                            let hi = ((tau + half).floor() as usize).min(len.saturating_sub(1));
                            if lo > hi || lo >= len {
                                continue;
                            }
                            for (i, t) in taps.iter_mut().enumerate().take(hi + 1).skip(lo) {
                                let off = i as f64 - tau;
                                let w = 0.5 * (1.0 + (std::f64::consts::PI * off / half).cos());
                                *t += amp * sinc(off) * w;
                            }
                        }
                    }
                }
            }
        }
    }
    FirCoeffs::new(taps)
}

/// Schroeder energy-decay curve in dB (0 dB at the start).
pub fn schroeder_curve_db(h: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = h
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.into_iter()
        .map(|e| if e > 0.0 && total > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Loudspeaker nonlinearity strength η².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta2 {
    /// η² = ∞: the loudspeaker is linear.
    Linear,
    Finite(f64),
}

impl Eta2 {
    pub fn finite(eta2: f64) -> Result<Self> {
        if !(eta2 > 0.0) || eta2.is_nan() {
            return Err(AncError::Domain(format!("eta2 must be positive, got {eta2}")));
        }
        if eta2.is_infinite() {
            return Ok(Eta2::Linear);
        }
        Ok(Eta2::Finite(eta2))
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Eta2::Linear)
    }

    /// Output limit `√(η²·π/2)`; infinite for the linear case.
    pub fn saturation_limit(&self) -> f64 {
        match *self {
            Eta2::Linear => f64::INFINITY,
            Eta2::Finite(e) => (e * std::f64::consts::FRAC_PI_2).sqrt(),
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Eta2::Finite(e) if !(e > 0.0 && e.is_finite()) => {
                Err(AncError::Domain(format!("eta2 must be positive, got {e}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Eta2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eta2::Linear => write!(f, "inf"),
            Eta2::Finite(e) => write!(f, "{e}"),
        }
    }
}

impl FromStr for Eta2 {
    type Err = AncError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" | "linear" => Ok(Eta2::Linear),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| AncError::Config(format!("cannot parse eta2 from {s:?}")))?;
                Eta2::finite(v)
            }
        }
    }
}

impl Serialize for Eta2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Eta2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Eta2::finite(v).map_err(serde::de::Error::custom),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// SEF loudspeaker response `∫₀^y exp(−t²/(2η²)) dt`.
pub fn sef(y: f64, eta2: Eta2) -> Result<f64> {
    eta2.check()?;
    Ok(sef_unchecked(y, eta2))
}

/// Derivative of [`sef`]: `exp(−y²/(2η²))`.
pub fn sef_prime(y: f64, eta2: Eta2) -> Result<f64> {
    eta2.check()?;
    Ok(sef_prime_unchecked(y, eta2))
}

#[inline]
pub(crate) fn sef_unchecked(y: f64, eta2: Eta2) -> f64 {
    match eta2 {
        Eta2::Linear => y,
        Eta2::Finite(e) => {
            // Evaluated on |y| so odd symmetry is exact.
            let mag = (e * std::f64::consts::FRAC_PI_2).sqrt() * libm::erf(y.abs() / (2.0 * e).sqrt());
            mag.copysign(y)
        }
    }
}

#[inline]
pub(crate) fn sef_prime_unchecked(y: f64, eta2: Eta2) -> f64 {
    match eta2 {
        Eta2::Linear => 1.0,
        Eta2::Finite(e) => (-y * y / (2.0 * e)).exp(),
    }
}

/// Primary path, secondary path and loudspeaker nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub primary: FirCoeffs,
    pub secondary: FirCoeffs,
    pub eta2: Eta2,
}

impl PlantModel {
    pub fn new(primary: FirCoeffs, secondary: FirCoeffs, eta2: Eta2) -> Result<Self> {
        eta2.check()?;
        Ok(PlantModel {
            primary,
            secondary,
            eta2,
        })
    }

    /// Simulates both rooms and scales them so the primary path peaks at 1.
    pub fn from_rooms(primary_room: &RoomSpec, secondary_room: &RoomSpec, eta2: Eta2) -> Result<Self> {
        let p = simulate_rir(primary_room)?;
        let s = simulate_rir(secondary_room)?;
        let peak = p.taps()[p.peak_index()].abs();
        if peak == 0.0 {
            return Err(AncError::Numerical("primary path is identically zero".into()));
        }
        PlantModel::new(p.scaled(1.0 / peak), s.scaled(1.0 / peak), eta2)
    }

    pub fn with_eta2(&self, eta2: Eta2) -> PlantModel {
        PlantModel {
            eta2,
            ..self.clone()
        }
    }

    /// Disturbance `d = p∗x`.
    pub fn disturbance(&self, x: &[f64]) -> Vec<f64> {
        direct_convolve_slice(x, self.primary.taps())
    }

    /// Anti-noise `u = s∗f(y)`.
    pub fn anti_noise(&self, y: &[f64]) -> Vec<f64> {
        let driven: Vec<f64> = y.iter().map(|&v| sef_unchecked(v, self.eta2)).collect();
        direct_convolve_slice(&driven, self.secondary.taps())
    }
}

/// Residual at the error microphone, `e = p∗x + s∗f_SEF(y)`.
pub fn plant_error(x: &Signal, y: &Signal, plant: &PlantModel) -> Result<Signal> {
    x.check_compatible(y, "plant_error")?;
    let d = plant.disturbance(&x.samples);
    let u = plant.anti_noise(&y.samples);
    Ok(x.with_samples(d.iter().zip(&u).map(|(a, b)| a + b).collect()))
}

/// Writes one tap per line.
pub fn save_fir_csv(h: &FirCoeffs, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| AncError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for t in h.taps() {
        writeln!(w, "{t:e}").map_err(|e| AncError::io(path, e))?;
    }
    w.flush().map_err(|e| AncError::io(path, e))
}

pub fn load_fir_csv(path: &Path) -> Result<FirCoeffs> {
    let file = std::fs::File::open(path).map_err(|e| AncError::io(path, e))?;
    let mut taps = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AncError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        taps.push(
            line.parse::<f64>()
                .map_err(|_| AncError::Format(format!("{}:{}: not a number: {line:?}", path.display(), i + 1)))?,
        );
    }
    FirCoeffs::new(taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_room() -> RoomSpec {
        RoomSpec::new([3.0, 4.0, 2.0], [1.5, 2.5, 1.0], [1.5, 3.0, 1.0], 0.2, 16000.0, 512)
    }

    #[test]
    fn free_field_single_tap() {
        let mut room = paper_room();
        room.wall_reflection = Some(0.0);
        room.interpolation = DelayInterpolation::Nearest;
        let h = simulate_rir(&room).unwrap();
        assert_eq!(h.len(), 512);
        let expected_delay = (16000.0_f64 * 0.5 / 343.0).round() as usize;
        assert_eq!(expected_delay, 23);
        for (i, &v) in h.taps().iter().enumerate() {
            if i == 23 {
                assert!((v - 1.0 / (4.0 * std::f64::consts::PI * 0.5)).abs() < 1e-15);
            } else {
                assert_eq!(v, 0.0);
            }
        }
        room.interpolation = DelayInterpolation::WindowedSinc;
        let h = simulate_rir(&room).unwrap();
        assert_eq!(h.peak_index(), 23);
    }

    #[test]
    fn degenerate_and_outside() {
        let mut room = paper_room();
        room.mic_position = room.source_position;
        assert!(matches!(simulate_rir(&room), Err(AncError::DegenerateGeometry(_))));
        let mut room = paper_room();
        room.source_position = [3.5, 1.0, 1.0];
        assert!(matches!(simulate_rir(&room), Err(AncError::Domain(_))));
        let mut room = paper_room();
        room.mic_position = [1.0, 1.0, 0.0];
        assert!(matches!(simulate_rir(&room), Err(AncError::Domain(_))));
    }

    #[test]
    fn deterministic_and_monotone_edc() {
        let a = simulate_rir(&paper_room()).unwrap();
        let b = simulate_rir(&paper_room()).unwrap();
        assert_eq!(a, b);
        let edc = schroeder_curve_db(a.taps());
        assert!(edc.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sef_special_values() {
        assert_eq!(sef(0.37, Eta2::Linear).unwrap(), 0.37);
        assert_eq!(sef(0.0, Eta2::Finite(0.5)).unwrap(), 0.0);
        assert!((sef(10.0, Eta2::Finite(0.1)).unwrap() - 0.39633272976060).abs() < 1e-9);
        assert_eq!(sef_prime(0.0, Eta2::Finite(0.1)).unwrap(), 1.0);
        assert_eq!(sef_prime(123.0, Eta2::Linear).unwrap(), 1.0);
        assert!(matches!(sef(1.0, Eta2::Finite(0.0)), Err(AncError::Domain(_))));
        assert!(matches!(sef_prime(1.0, Eta2::Finite(-1.0)), Err(AncError::Domain(_))));
        assert!(Eta2::finite(0.0).is_err());
        assert_eq!(Eta2::finite(f64::INFINITY).unwrap(), Eta2::Linear);
    }

    #[test]
    fn sef_prime_matches_finite_difference() {
        let eta = Eta2::Finite(0.5);
        let h = 1e-5;
        let fd = (sef(0.7 + h, eta).unwrap() - sef(0.7 - h, eta).unwrap()) / (2.0 * h);
        let an = sef_prime(0.7, eta).unwrap();
        assert!(((fd - an) / an).abs() < 1e-6);
    }

    #[test]
    fn eta2_parsing() {
        assert_eq!("inf".parse::<Eta2>().unwrap(), Eta2::Linear);
        assert_eq!("0.5".parse::<Eta2>().unwrap(), Eta2::Finite(0.5));
        assert!("-2".parse::<Eta2>().is_err());
        assert!("abc".parse::<Eta2>().is_err());
        assert_eq!(Eta2::Finite(0.1).to_string(), "0.1");
    }

    #[test]
    fn plant_identities() {
        let x = Signal::new(vec![0.5, -1.0, 0.25, 2.0], 16000.0).unwrap();
        let plant = PlantModel::new(FirCoeffs::identity(), FirCoeffs::identity(), Eta2::Linear).unwrap();
        let y = x.with_samples(x.samples.iter().map(|v| -v).collect());
        assert!(plant_error(&x, &y, &plant).unwrap().samples.iter().all(|&v| v == 0.0));

        let p = FirCoeffs::new(vec![0.0, 0.5, 0.25]).unwrap();
        let plant = PlantModel::new(p.clone(), FirCoeffs::identity(), Eta2::Finite(0.5)).unwrap();
        let e = plant_error(&x, &Signal::zeros(4, 16000.0), &plant).unwrap();
        assert_eq!(e.samples, direct_convolve_slice(&x.samples, p.taps()));

        let short = Signal::zeros(3, 16000.0);
        assert!(matches!(plant_error(&x, &short, &plant), Err(AncError::Shape(_))));
        let other_rate = Signal::zeros(4, 8000.0);
        assert!(matches!(plant_error(&x, &other_rate, &plant), Err(AncError::Shape(_))));
    }

    #[test]
    fn fir_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let h = simulate_rir(&paper_room()).unwrap();
        save_fir_csv(&h, &path).unwrap();
        assert_eq!(load_fir_csv(&path).unwrap(), h);
    }

    proptest! {
        #[test]
        fn sef_odd_and_bounded(y in -50.0..50.0f64, e in 0.01..5.0f64) {
            let eta = Eta2::Finite(e);
            let v = sef(y, eta).unwrap();
            prop_assert_eq!(sef(-y, eta).unwrap(), -v);
            prop_assert!(v.abs() <= (e * std::f64::consts::FRAC_PI_2).sqrt());
            let p = sef_prime(y, eta).unwrap();
            prop_assert!(p > 0.0 || y.abs() > 1.0 && p == 0.0);
            prop_assert!(p <= 1.0);
        }

        #[test]
        fn sef_monotone(a in -5.0..5.0f64, d in 1e-6..1.0f64, e in 0.05..3.0f64) {
            let eta = Eta2::Finite(e);
            prop_assert!(sef(a + d, eta).unwrap() >= sef(a, eta).unwrap());
        }

        #[test]
        fn plant_is_causal(n in 1usize..63, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut v = |len| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
            let x = Signal::new(v(64), 16000.0).unwrap();
            let y = Signal::new(v(64), 16000.0).unwrap();
            let plant = PlantModel::new(FirCoeffs::new(v(8)).unwrap(), FirCoeffs::new(v(8)).unwrap(), Eta2::Finite(0.5)).unwrap();
            let e0 = plant_error(&x, &y, &plant).unwrap();
            let mut x2 = x.clone();
            let mut y2 = y.clone();
            x2.samples[n] += 3.0;
            y2.samples[n] -= 2.0;
            let e1 = plant_error(&x2, &y2, &plant).unwrap();
            prop_assert_eq!(&e0.samples[..n], &e1.samples[..n]);
        }
    }
}
