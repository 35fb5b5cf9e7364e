//! Constellations, OTFS frame generation and the AWGN time-domain channel.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::BlockChannel;
use crate::error::{check_len, Error, Result};
use crate::transforms::DdTransform;

/// A unit-energy symbol alphabet with Gray bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    points: Vec<Complex64>,
    bits_per_symbol: usize,
    /// `labels[j]` is the bit pattern of `points[j]`, first bit as MSB.
    labels: Vec<u32>,
    by_label: Vec<usize>,
}

impl Constellation {
    /// Build from points and labels. Points are rescaled to unit average
    /// energy.
    pub fn new(name: &str, points: Vec<Complex64>, labels: Vec<u32>) -> Result<Self> {
        let size = points.len();
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::Config(format!("constellation size {size} is not a power of two >= 2")));
        }
        check_len(size, labels.len())?;
        let mut by_label = vec![usize::MAX; size];
        for (j, &lab) in labels.iter().enumerate() {
            let slot = by_label
                .get_mut(lab as usize)
                .ok_or_else(|| Error::Config(format!("label {lab} out of range")))?;
            if *slot != usize::MAX {
                return Err(Error::Config(format!("label {lab} used twice")));
            }
            *slot = j;
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / size as f64;
        if !(energy > 0.0) {
            return Err(Error::Config("constellation has zero energy".into()));
        }
        let scale = energy.sqrt().recip();
        Ok(Self {
            name: name.to_string(),
            points: points.into_iter().map(|p| p * scale).collect(),
            bits_per_symbol: size.trailing_zeros() as usize,
            labels,
            by_label,
        })
    }

    /// Antipodal: `0 -> +1`, `1 -> -1`.
    pub fn bpsk() -> Self {
        let pts = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        Self::new("bpsk", pts, vec![0, 1]).expect("valid bpsk")
    }

    /// Gray QPSK: first bit selects the sign of the real part, second bit
    /// the sign of the imaginary part (`0 -> +`). `00 -> (1+j)/√2`.
    pub fn qpsk() -> Self {
        let pts = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        Self::new("qpsk", pts, vec![0b00, 0b01, 0b10, 0b11]).expect("valid qpsk")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(Self::qpsk()),
            "bpsk" => Ok(Self::bpsk()),
            other => Err(Error::Config(format!("unknown constellation '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Index of the closest point.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    /// Append the label bits of point `index` to `out`, MSB first.
    pub fn push_bits(&self, index: usize, out: &mut Vec<u8>) {
        let lab = self.labels[index];
        for b in (0..self.bits_per_symbol).rev() {
            out.push(((lab >> b) & 1) as u8);
        }
    }
}

/// Map a bit vector (one `0`/`1` byte per bit) to symbols.
pub fn map_bits(bits: &[u8], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let q = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(q) {
        return Err(Error::Dimension { expected: bits.len().div_ceil(q) * q, got: bits.len() });
    }
    Ok(bits
        .chunks(q)
        .map(|chunk| {
            let lab = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            constellation.points[constellation.by_label[lab]]
        })
        .collect())
}

/// Nearest-point decisions and their bits.
pub fn hard_demap(symbols: &[Complex64], constellation: &Constellation) -> (Vec<Complex64>, Vec<u8>) {
    let mut bits = Vec::with_capacity(symbols.len() * constellation.bits_per_symbol());
    let decided = symbols
        .iter()
        .map(|&z| {
            let j = constellation.nearest(z);
            constellation.push_bits(j, &mut bits);
            constellation.points()[j]
        })
        .collect();
    (decided, bits)
}

/// One transmitted OTFS frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub bits: Vec<u8>,
    pub x_dd: Vec<Complex64>,
    pub s_time: Vec<Complex64>,
}

impl TxFrame {
    /// Draw uniform payload bits, map them on the delay-Doppler grid and
    /// modulate to the time domain.
    pub fn random<R: Rng + ?Sized>(transform: &DdTransform, constellation: &Constellation, rng: &mut R) -> Self {
        let nbits = transform.geometry().len() * constellation.bits_per_symbol();
        let bits: Vec<u8> = (0..nbits).map(|_| rng.random_range(0..2u8)).collect();
        Self::from_bits(transform, constellation, bits).expect("bit count matches frame")
    }

    pub fn from_bits(transform: &DdTransform, constellation: &Constellation, bits: Vec<u8>) -> Result<Self> {
        let x_dd = map_bits(&bits, constellation)?;
        let s_time = transform.dd_to_time(&x_dd)?;
        Ok(Self { bits, x_dd, s_time })
    }
}

/// `r_i = H^{i,0} s_i + H^{i,1} s_{i-1} + n_i` with circularly-symmetric
/// complex Gaussian noise of variance `n0` per sample.
pub fn apply_channel<R: Rng + ?Sized>(
    s: &[Complex64],
    blocks: &BlockChannel,
    n0: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(n0 >= 0.0) {
        return Err(Error::Domain(format!("noise variance {n0} is negative")));
    }
    let mut r = blocks.apply(s)?;
    if n0 > 0.0 {
        add_noise(&mut r, n0, rng);
    }
    Ok(r)
}

pub fn add_noise<R: Rng + ?Sized>(r: &mut [Complex64], n0: f64, rng: &mut R) {
    let normal = Normal::new(0.0, (n0 / 2.0).sqrt()).expect("finite noise std");
    for v in r.iter_mut() {
        *v += Complex64::new(normal.sample(rng), normal.sample(rng));
    }
}

/// Noise spectral density for unit-energy symbols at `Es/N0` in dB.
pub fn snr_to_n0(es_over_n0_db: f64) -> f64 {
    10f64.powf(-es_over_n0_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_block_channel, build_time_channel_dense, sample_channel, ChannelParams, ChannelRealization};
    use crate::transforms::FrameGeometry;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qpsk_gray_points() {
        let c = Constellation::qpsk();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(map_bits(&[0, 0], &c).unwrap(), vec![Complex64::new(h, h)]);
        assert_eq!(map_bits(&[1, 1], &c).unwrap(), vec![Complex64::new(-h, -h)]);
        let energy: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 4.0;
        assert!((energy - 1.0).abs() < 1e-15);
        // neighbours differ in exactly one bit
        for j in 0..4 {
            for k in 0..4 {
                let d = (c.points()[j] - c.points()[k]).norm();
                if (d - 2f64.sqrt()).abs() < 1e-12 {
                    assert_eq!((c.label(j) ^ c.label(k)).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn map_demap_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for c in [Constellation::qpsk(), Constellation::bpsk()] {
            let bits: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
            let syms = map_bits(&bits, &c).unwrap();
            let (decided, back) = hard_demap(&syms, &c);
            assert_eq!(back, bits);
            assert_eq!(decided, syms);
        }
        assert!(matches!(map_bits(&[0, 1, 1], &Constellation::qpsk()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn custom_constellation_validation() {
        let pts = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        assert!(Constellation::new("dup", pts.clone(), vec![0, 0]).is_err());
        assert!(Constellation::new("three", vec![pts[0]; 3], vec![0, 1, 2]).is_err());
        let c = Constellation::new("scaled", pts.iter().map(|p| p * 3.0).collect(), vec![0, 1]).unwrap();
        assert!((c.points()[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_n0(0.0), 1.0);
        assert!((snr_to_n0(10.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_n0(12.0) - 0.0631).abs() < 1e-4);
    }

    #[test]
    fn noiseless_identity_loopback() {
        let g = FrameGeometry::new(4, 4).unwrap();
        let blocks = build_block_channel(&ChannelRealization::identity(g));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = TxFrame::random(&DdTransform::new(g), &Constellation::qpsk(), &mut rng);
        let r = apply_channel(&frame.s_time, &blocks, 0.0, &mut rng).unwrap();
        assert_eq!(r, frame.s_time);
    }

    #[test]
    fn noise_statistics() {
        let g = FrameGeometry::new(64, 32).unwrap();
        let blocks = build_block_channel(&ChannelRealization::identity(g));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = apply_channel(&vec![Complex64::new(0.0, 0.0); 2048], &blocks, 1.0, &mut rng).unwrap();
        let var = r.iter().map(|v| v.norm_sqr()).sum::<f64>() / r.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
        assert!(apply_channel(&r, &blocks, -1.0, &mut rng).is_err());
    }

    #[test]
    fn channel_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..100u64 {
            let (m, n) = (2 + (trial % 7) as usize, 2 + (trial / 7 % 7) as usize);
            let g = FrameGeometry::new(m, n).unwrap();
            let params = ChannelParams { paths: 3, l_max: m - 1, k_max: 2.0, fractional_doppler: true };
            let ch = sample_channel(g, &params, trial).unwrap();
            let s: Vec<Complex64> = (0..m * n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let fast = apply_channel(&s, &build_block_channel(&ch), 0.0, &mut rng).unwrap();
            let slow = build_time_channel_dense(&ch) * DVector::from_column_slice(&s);
            let dev = fast.iter().zip(slow.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-12, "trial {trial}: {dev}");
        }
    }
}
