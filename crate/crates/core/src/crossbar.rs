//! MTJ crossbar: bit-packed synapse storage, dendrite currents (VMM),
//! digital subtraction for signed weights, and Hamming-distance binning.
//!
//! Layout: each output row holds `n_in * r` synapse bits, column-major with
//! the replica index innermost (bit `col * r + replica`). Bit 1 is the
//! parallel state. Rows are stored in whole `u64` words, least significant
//! bit first; padding bits are always zero.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::device::{DeviceParams, MtjState};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Below this many words per VMM the rows are evaluated serially.
const PAR_VMM_MIN_WORDS: usize = 1 << 14;

/// A binary input image: bit 1 applies the read voltage to that column.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InputVector {
    bits: Vec<bool>,
}

impl InputVector {
    pub fn new(bits: Vec<bool>) -> Self {
        InputVector { bits }
    }

    pub fn zeros(len: usize) -> Self {
        InputVector {
            bits: vec![false; len],
        }
    }

    /// Parse a string of `0`/`1` characters, e.g. `"1001"`.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::argument(format!("invalid input bit {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(InputVector::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// Number of active (1) inputs.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Input mask over a packed row with `r` replicas per column.
    fn replica_mask(&self, r: usize, words: usize) -> Vec<u64> {
        let mut mask = vec![0u64; words];
        for (col, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let start = col * r;
            for bit in start..start + r {
                mask[bit / 64] |= 1u64 << (bit % 64);
            }
        }
        mask
    }
}

impl fmt::Display for InputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Per-active-input constant subtracted from each dendrite current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubtractionConfig {
    pub s: f64,
}

impl SubtractionConfig {
    /// Value measured on the 4x2 hardware array after normalization.
    pub const MEASURED: f64 = 1.44;

    /// Midpoint between the two conductance levels: `g_ap * (1 + rho) / 2`.
    pub fn ideal(device: &DeviceParams) -> Self {
        SubtractionConfig {
            s: device.g_ap * (1.0 + device.ratio_rho) / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::config("crossbar", format!("subtraction factor must be > 0, got {}", self.s)));
        }
        Ok(())
    }
}

impl Default for SubtractionConfig {
    fn default() -> Self {
        SubtractionConfig::ideal(&DeviceParams::default())
    }
}

/// Source of per-read conductance noise for one clock cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReadNoise {
    pub seed: u64,
    pub cycle: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynapseArray {
    n_out: usize,
    n_in: usize,
    r: usize,
    words_per_row: usize,
    words: Vec<u64>,
    device: DeviceParams,
}

impl SynapseArray {
    /// New array with every synapse in the anti-parallel state.
    pub fn new(n_out: usize, n_in: usize, r: usize, device: DeviceParams) -> Result<Self> {
        if n_out == 0 || n_in == 0 || r == 0 {
            return Err(Error::config(
                "crossbar",
                format!("dimensions must be >= 1, got n_out={n_out} n_in={n_in} r={r}"),
            ));
        }
        device.validate()?;
        let bits = n_in
            .checked_mul(r)
            .ok_or_else(|| Error::config("crossbar", "n_in * r overflows"))?;
        let words_per_row = bits.div_ceil(64);
        let total = words_per_row
            .checked_mul(n_out)
            .ok_or_else(|| Error::config("crossbar", "array size overflows"))?;
        Ok(SynapseArray {
            n_out,
            n_in,
            r,
            words_per_row,
            words: vec![0; total],
            device,
        })
    }

    /// Every synapse independently parallel with probability 1/2. Row `j`
    /// takes its bits, in layout order, from stream `(seed, Init, j)`.
    pub fn randomize(&mut self, seed: u64) {
        let bits_per_row = self.bits_per_row();
        let wpr = self.words_per_row;
        for (row, words) in self.words.chunks_mut(wpr).enumerate() {
            let mut s = rng::stream(seed, Purpose::Init, row as u64, 0);
            for w in words.iter_mut() {
                *w = s.random::<u64>();
            }
            clear_padding(words, bits_per_row);
        }
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn replicas(&self) -> usize {
        self.r
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn set_device(&mut self, device: DeviceParams) -> Result<()> {
        device.validate()?;
        self.device = device;
        Ok(())
    }

    pub fn bits_per_row(&self) -> usize {
        self.n_in * self.r
    }

    pub fn synapse_count(&self) -> usize {
        self.n_out * self.bits_per_row()
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub(crate) fn row_words_mut(&mut self, row: usize) -> &mut [u64] {
        &mut self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.n_out {
            return Err(Error::argument(format!("row {row} out of range (n_out = {})", self.n_out)));
        }
        Ok(())
    }

    fn check_synapse(&self, row: usize, col: usize, replica: usize) -> Result<()> {
        self.check_row(row)?;
        if col >= self.n_in || replica >= self.r {
            return Err(Error::argument(format!(
                "synapse ({row}, {col}, {replica}) out of range ({} x {} x {})",
                self.n_out, self.n_in, self.r
            )));
        }
        Ok(())
    }

    pub fn state(&self, row: usize, col: usize, replica: usize) -> Result<MtjState> {
        self.check_synapse(row, col, replica)?;
        let bit = col * self.r + replica;
        Ok(MtjState::from_bit(self.row_words(row)[bit / 64] >> (bit % 64) & 1 == 1))
    }

    pub fn set_state(&mut self, row: usize, col: usize, replica: usize, state: MtjState) -> Result<()> {
        self.check_synapse(row, col, replica)?;
        let bit = col * self.r + replica;
        let word = &mut self.row_words_mut(row)[bit / 64];
        if state.bit() {
            *word |= 1 << (bit % 64);
        } else {
            *word &= !(1 << (bit % 64));
        }
        Ok(())
    }

    /// Number of parallel replicas at `(row, col)`.
    pub fn p_count(&self, row: usize, col: usize) -> Result<usize> {
        self.check_synapse(row, col, 0)?;
        let words = self.row_words(row);
        Ok((0..self.r)
            .filter(|rep| {
                let bit = col * self.r + rep;
                words[bit / 64] >> (bit % 64) & 1 == 1
            })
            .count())
    }

    /// Supervised write: every replica at `(row, col)` becomes parallel where
    /// `pattern` has a 1 and anti-parallel where it has a 0.
    pub fn program(&mut self, row: usize, pattern: &InputVector) -> Result<()> {
        self.check_row(row)?;
        if pattern.len() != self.n_in {
            return Err(Error::argument(format!(
                "pattern length {} != n_in {}",
                pattern.len(),
                self.n_in
            )));
        }
        let mask = pattern.replica_mask(self.r, self.words_per_row);
        self.row_words_mut(row).copy_from_slice(&mask);
        Ok(())
    }

    fn check_input(&self, input: &InputVector) -> Result<()> {
        if input.len() != self.n_in {
            return Err(Error::argument(format!(
                "input length {} != n_in {}",
                input.len(),
                self.n_in
            )));
        }
        Ok(())
    }

    /// Per row, the number of parallel synapses under an active input.
    pub fn active_p_counts(&self, input: &InputVector) -> Result<Vec<u64>> {
        self.check_input(input)?;
        let mask = input.replica_mask(self.r, self.words_per_row);
        let count = |row: &[u64]| -> u64 {
            row.iter()
                .zip(&mask)
                .map(|(w, m)| (w & m).count_ones() as u64)
                .sum()
        };
        let chunks = self.words.chunks(self.words_per_row);
        Ok(if self.words.len() >= PAR_VMM_MIN_WORDS {
            self.words.par_chunks(self.words_per_row).map(count).collect()
        } else {
            chunks.map(count).collect()
        })
    }

    /// Dendrite currents: for every row, the summed conductance of all
    /// synapses whose column is active. With `noise` and a nonzero
    /// `read_noise_sigma`, each active synapse read draws its own unit
    /// normal from stream `(seed, ReadNoise, cycle, row)` in layout order.
    pub fn vmm_raw(&self, input: &InputVector, noise: Option<ReadNoise>) -> Result<Vec<f64>> {
        match noise {
            Some(n) if self.device.read_noise_sigma > 0.0 => self.vmm_noisy(input, n),
            _ => {
                let active = (input_ones_checked(self, input)? * self.r) as u64;
                let g_ap = self.device.g_ap;
                let g_p = self.device.g_p();
                Ok(self
                    .active_p_counts(input)?
                    .into_iter()
                    .map(|p| conductance_sum(p, active - p, g_p, g_ap))
                    .collect())
            }
        }
    }

    fn vmm_noisy(&self, input: &InputVector, noise: ReadNoise) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let row_current = |row: usize| -> f64 {
            let mut s = rng::stream(noise.seed, Purpose::ReadNoise, noise.cycle, row as u64);
            let words = self.row_words(row);
            let mut total = 0.0;
            for col in (0..self.n_in).filter(|&c| input.get(c)) {
                for rep in 0..self.r {
                    let bit = col * self.r + rep;
                    let state = MtjState::from_bit(words[bit / 64] >> (bit % 64) & 1 == 1);
                    let z: f64 = s.sample(StandardNormal);
                    total += self.device.conductance(state, Some(z));
                }
            }
            total
        };
        Ok(if self.words.len() >= PAR_VMM_MIN_WORDS {
            (0..self.n_out).into_par_iter().map(row_current).collect()
        } else {
            (0..self.n_out).map(row_current).collect()
        })
    }

    /// Signed weight of the pair `(row, col)`: the sum over replicas of
    /// `conductance - s`.
    pub fn effective_weight(&self, row: usize, col: usize, cfg: &SubtractionConfig) -> Result<f64> {
        let n_p = self.p_count(row, col)?;
        let n_ap = self.r - n_p;
        Ok(n_p as f64 * (self.device.g_p() - cfg.s) + n_ap as f64 * (self.device.g_ap - cfg.s))
    }

    /// The binary image a row encodes: 1 where the effective weight is
    /// positive.
    pub fn row_pattern(&self, row: usize, cfg: &SubtractionConfig) -> Result<InputVector> {
        self.check_row(row)?;
        (0..self.n_in)
            .map(|col| self.effective_weight(row, col, cfg).map(|w| w > 0.0))
            .collect::<Result<Vec<_>>>()
            .map(InputVector::new)
    }

    /// Bytes per row in the byte-padded external layout.
    pub fn bytes_per_row(&self) -> usize {
        self.bits_per_row().div_ceil(8)
    }

    /// Row states packed one bit per synapse, each row padded to a byte.
    pub fn to_row_bytes(&self) -> Vec<u8> {
        let bpr = self.bytes_per_row();
        let mut out = Vec::with_capacity(bpr * self.n_out);
        for row in 0..self.n_out {
            let bytes: Vec<u8> = self.row_words(row).iter().flat_map(|w| w.to_le_bytes()).collect();
            out.extend_from_slice(&bytes[..bpr]);
        }
        out
    }

    /// Inverse of [`to_row_bytes`](Self::to_row_bytes). Nonzero padding bits
    /// are rejected.
    pub fn load_row_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let bpr = self.bytes_per_row();
        if bytes.len() != bpr * self.n_out {
            return Err(Error::argument(format!(
                "state bytes length {} != {}",
                bytes.len(),
                bpr * self.n_out
            )));
        }
        let bits_per_row = self.bits_per_row();
        for (row, chunk) in bytes.chunks(bpr).enumerate() {
            let words = self.row_words_mut(row);
            words.fill(0);
            for (i, &b) in chunk.iter().enumerate() {
                words[i / 8] |= (b as u64) << (8 * (i % 8));
            }
            let before: Vec<u64> = words.to_vec();
            clear_padding(words, bits_per_row);
            if before != words {
                return Err(Error::argument(format!("row {row} has nonzero padding bits")));
            }
        }
        Ok(())
    }
}

fn input_ones_checked(array: &SynapseArray, input: &InputVector) -> Result<usize> {
    array.check_input(input)?;
    Ok(input.ones())
}

fn clear_padding(words: &mut [u64], bits: usize) {
    let used = bits % 64;
    if used != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << used) - 1;
        }
    }
}

/// Current through `n_p` parallel and `n_ap` anti-parallel active devices.
pub fn conductance_sum(n_p: u64, n_ap: u64, g_p: f64, g_ap: f64) -> f64 {
    n_p as f64 * g_p + n_ap as f64 * g_ap
}

/// Post-subtraction outputs: `raw_j - s * r * ones(input)`.
pub fn subtract(raw: &[f64], input: &InputVector, cfg: &SubtractionConfig, r: usize) -> Vec<f64> {
    let offset = cfg.s * (r * input.ones()) as f64;
    raw.iter().map(|&x| x - offset).collect()
}

/// Hamming distance implied by a signed output, for binary inputs against a
/// target with `target_ones` ones and weights of magnitude `weight`:
/// `output = weight * (target_ones - H)`. Rounding to the nearest level is
/// the same as binning at the midpoints between adjacent levels.
pub fn hamming_from_output(output: f64, target_ones: usize, weight: f64, n_pixels: usize) -> usize {
    let h = (target_ones as f64 - output / weight).round();
    h.clamp(0.0, n_pixels as f64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1_array(r: usize) -> SynapseArray {
        let mut a = SynapseArray::new(2, 4, r, DeviceParams::default()).unwrap();
        a.program(0, &InputVector::parse("1100").unwrap()).unwrap();
        a.program(1, &InputVector::parse("1001").unwrap()).unwrap();
        a
    }

    fn v(s: &str) -> InputVector {
        InputVector::parse(s).unwrap()
    }

    /// Unpacked reference: `states[row][col][rep]`, summed one device at a
    /// time.
    fn naive_vmm(states: &[Vec<Vec<bool>>], input: &[bool], d: &DeviceParams) -> (Vec<u64>, Vec<f64>) {
        let mut counts = Vec::new();
        let mut currents = Vec::new();
        for row in states {
            let mut n_p = 0;
            let mut i = 0.0;
            for (col, reps) in row.iter().enumerate() {
                if !input[col] {
                    continue;
                }
                for &p in reps {
                    if p {
                        n_p += 1;
                    }
                    i += d.conductance(MtjState::from_bit(p), None);
                }
            }
            counts.push(n_p);
            currents.push(i);
        }
        (counts, currents)
    }

    #[test]
    fn vmm_on_programmed_targets() {
        let a = fig1_array(1);
        let raw = a.vmm_raw(&v("1001"), None).unwrap();
        assert!((raw[0] - 2.9).abs() < 1e-12);
        assert!((raw[1] - 3.8).abs() < 1e-12);
        assert_eq!(a.vmm_raw(&v("0000"), None).unwrap(), vec![0.0, 0.0]);
        let out = subtract(&raw, &v("1001"), &SubtractionConfig::default(), 1);
        assert!(out[0].abs() < 1e-12);
        assert!((out[1] - 0.9).abs() < 1e-12);
        let zero_in = subtract(&[3.3, -1.0], &v("0000"), &SubtractionConfig::default(), 1);
        assert_eq!(zero_in, vec![3.3, -1.0]);
    }

    #[test]
    fn input_dimension_mismatch() {
        let a = fig1_array(1);
        assert!(matches!(a.vmm_raw(&v("101"), None), Err(Error::Argument(_))));
        let mut a = a;
        assert!(a.program(0, &v("10")).is_err());
        assert!(a.program(2, &v("1010")).is_err());
    }

    #[test]
    fn program_sets_all_replicas() {
        let mut a = SynapseArray::new(1, 4, 3, DeviceParams::default()).unwrap();
        a.program(0, &v("1001")).unwrap();
        for (col, want) in [(0, MtjState::Parallel), (1, MtjState::AntiParallel), (2, MtjState::AntiParallel), (3, MtjState::Parallel)] {
            for rep in 0..3 {
                assert_eq!(a.state(0, col, rep).unwrap(), want);
            }
        }
        a.program(0, &v("0000")).unwrap();
        assert!(a.row_words(0).iter().all(|&w| w == 0));
        a.program(0, &v("1111")).unwrap();
        assert_eq!(a.p_count(0, 2).unwrap(), 3);
    }

    #[test]
    fn effective_weights() {
        let cfg = SubtractionConfig::default();
        let a = fig1_array(1);
        assert!((a.effective_weight(1, 0, &cfg).unwrap() - 0.45).abs() < 1e-12);
        assert!((a.effective_weight(1, 1, &cfg).unwrap() + 0.45).abs() < 1e-12);
        assert!(a.effective_weight(2, 0, &cfg).is_err());
        assert!(a.effective_weight(0, 4, &cfg).is_err());

        let mut a = SynapseArray::new(1, 1, 8, DeviceParams::default()).unwrap();
        for rep in 0..5 {
            a.set_state(0, 0, rep, MtjState::Parallel).unwrap();
        }
        assert!((a.effective_weight(0, 0, &cfg).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn hamming_levels() {
        assert_eq!(hamming_from_output(0.9, 2, 0.45, 4), 0);
        assert_eq!(hamming_from_output(0.0, 2, 0.45, 4), 2);
        assert_eq!(hamming_from_output(-0.9, 2, 0.45, 4), 4);
        assert_eq!(hamming_from_output(-5.0, 2, 0.45, 4), 4);
        assert_eq!(hamming_from_output(5.0, 2, 0.45, 4), 0);
    }

    fn hamming(a: &InputVector, b: &InputVector) -> usize {
        a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn output_is_weight_times_ones_minus_hamming_for_all_inputs() {
        // Brute force over all 16 inputs and both targets.
        let a = fig1_array(1);
        let cfg = SubtractionConfig::default();
        let targets = [v("1100"), v("1001")];
        for x in 0..16u32 {
            let input = v(&format!("{x:04b}"));
            let out = subtract(&a.vmm_raw(&input, None).unwrap(), &input, &cfg, 1);
            for (row, t) in targets.iter().enumerate() {
                let h = hamming(&input, t);
                assert!((out[row] - 0.45 * (2.0 - h as f64)).abs() < 1e-12, "input {input} row {row}");
                assert_eq!(hamming_from_output(out[row], t.ones(), 0.45, 4), h);
            }
        }
    }

    /// Gaussian prediction of the correct-bin rate for per-device noise.
    fn predicted_bin_accuracy(sigma: f64) -> f64 {
        let erfc = |x: f64| -> f64 {
            // Abramowitz-Stegun 7.1.26, |error| < 1.5e-7
            let t = 1.0 / (1.0 + 0.3275911 * x);
            let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
            poly * (-x * x).exp()
        };
        let target = [true, true, false, false];
        let mut correct = 0.0;
        for x in 0..16u32 {
            let var: f64 = (0..4)
                .filter(|i| x >> (3 - i) & 1 == 1)
                .map(|i| if target[i] { 1.9f64.powi(2) } else { 1.0 })
                .sum::<f64>()
                * sigma
                * sigma;
            correct += if var == 0.0 { 1.0 } else { 1.0 - erfc(0.225 / (var.sqrt() * 2f64.sqrt())) };
        }
        correct / 16.0
    }

    fn noisy_bin_accuracy(sigma: f64, trials: u64) -> f64 {
        let device = DeviceParams {
            read_noise_sigma: sigma,
            ..DeviceParams::default()
        };
        let mut a = SynapseArray::new(2, 4, 1, device).unwrap();
        a.program(0, &v("1100")).unwrap();
        a.program(1, &v("1001")).unwrap();
        let cfg = SubtractionConfig::default();
        let targets = [v("1100"), v("1001")];
        let mut correct = 0u64;
        let mut total = 0u64;
        for trial in 0..trials {
            let input = v(&format!("{:04b}", trial % 16));
            let raw = a.vmm_raw(&input, Some(ReadNoise { seed: 99, cycle: trial })).unwrap();
            let out = subtract(&raw, &input, &cfg, 1);
            for (row, t) in targets.iter().enumerate() {
                total += 1;
                if hamming_from_output(out[row], 2, 0.45, 4) == hamming(&input, t) {
                    correct += 1;
                }
            }
        }
        correct as f64 / total as f64
    }

    #[test]
    fn noisy_binning_matches_gaussian_prediction() {
        // 20,000 row reads; binomial sd of the rate is about 0.0015.
        let predicted = predicted_bin_accuracy(0.05);
        let measured = noisy_bin_accuracy(0.05, 10_000);
        assert!((predicted - 0.9524).abs() < 1e-3);
        assert!((measured - predicted).abs() < 0.008, "measured {measured}, predicted {predicted}");
    }

    #[test]
    fn noisy_binning_stays_above_99_percent_at_sigma_0_03() {
        assert!(noisy_bin_accuracy(0.03, 10_000) >= 0.99);
    }

    /// The 99%-at-5%-noise bound cannot hold for independent per-device
    /// noise: the expected rate is about 95.2%.
    #[test]
    #[ignore = "unattainable under per-device read noise; see noisy_binning_matches_gaussian_prediction"]
    fn noisy_binning_stays_above_99_percent_at_sigma_0_05() {
        assert!(noisy_bin_accuracy(0.05, 10_000) >= 0.99);
    }

    #[test]
    fn noisy_reads_are_reproducible() {
        let device = DeviceParams {
            read_noise_sigma: 0.2,
            ..DeviceParams::default()
        };
        let mut a = SynapseArray::new(3, 5, 2, device).unwrap();
        a.randomize(4);
        let input = v("10111");
        let n = Some(ReadNoise { seed: 1, cycle: 7 });
        assert_eq!(a.vmm_raw(&input, n).unwrap(), a.vmm_raw(&input, n).unwrap());
        assert_ne!(a.vmm_raw(&input, n).unwrap(), a.vmm_raw(&input, None).unwrap());
    }

    type ArrayCase = (usize, usize, usize, Vec<Vec<Vec<bool>>>, Vec<bool>);

    fn array_strategy() -> impl Strategy<Value = ArrayCase> {
        (1usize..=64, 1usize..=64, prop_oneof![Just(1usize), Just(2), Just(4), Just(8)]).prop_flat_map(
            |(n_out, n_in, r)| {
                (
                    Just(n_out),
                    Just(n_in),
                    Just(r),
                    proptest::collection::vec(
                        proptest::collection::vec(proptest::collection::vec(any::<bool>(), r), n_in),
                        n_out,
                    ),
                    proptest::collection::vec(any::<bool>(), n_in),
                )
            },
        )
    }

    fn build(n_out: usize, n_in: usize, r: usize, states: &[Vec<Vec<bool>>]) -> SynapseArray {
        let mut a = SynapseArray::new(n_out, n_in, r, DeviceParams::default()).unwrap();
        for (row, cols) in states.iter().enumerate() {
            for (col, reps) in cols.iter().enumerate() {
                for (rep, &p) in reps.iter().enumerate() {
                    a.set_state(row, col, rep, MtjState::from_bit(p)).unwrap();
                }
            }
        }
        a
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn packed_vmm_matches_naive((n_out, n_in, r, states, input) in array_strategy()) {
            let a = build(n_out, n_in, r, &states);
            let input = InputVector::new(input);
            let d = DeviceParams::default();
            let (counts, currents) = naive_vmm(&states, input.bits(), &d);
            prop_assert_eq!(a.active_p_counts(&input).unwrap(), counts.clone());
            let raw = a.vmm_raw(&input, None).unwrap();
            let active = (input.ones() * r) as u64;
            for (j, &c) in counts.iter().enumerate() {
                prop_assert_eq!(raw[j], conductance_sum(c, active - c, d.g_p(), d.g_ap));
                prop_assert!((raw[j] - currents[j]).abs() <= 1e-9 * currents[j].max(1.0));
            }
        }

        #[test]
        fn row_bytes_round_trip((n_out, n_in, r, states, _input) in array_strategy()) {
            let a = build(n_out, n_in, r, &states);
            let mut b = SynapseArray::new(n_out, n_in, r, DeviceParams::default()).unwrap();
            b.load_row_bytes(&a.to_row_bytes()).unwrap();
            prop_assert_eq!(&a, &b);
            for (row, cols) in states.iter().enumerate() {
                for (col, reps) in cols.iter().enumerate() {
                    for (rep, &p) in reps.iter().enumerate() {
                        prop_assert_eq!(b.state(row, col, rep).unwrap().bit(), p);
                    }
                }
            }
        }

        #[test]
        fn subtraction_output_bound((n_out, n_in, r, states, input) in array_strategy(), s in 1.0..2.0f64) {
            let a = build(n_out, n_in, r, &states);
            let input = InputVector::new(input);
            let cfg = SubtractionConfig { s };
            let out = subtract(&a.vmm_raw(&input, None).unwrap(), &input, &cfg, r);
            let k = (input.ones() * r) as f64;
            let bound = k * 0.9 / 2.0 + (k * (1.45 - s)).abs() + 1e-9;
            for o in out {
                prop_assert!(o.abs() <= bound);
            }
        }

        #[test]
        fn vmm_is_additive_over_disjoint_inputs(
            (n_out, n_in, r, states, a_bits) in array_strategy(),
            split in any::<u64>(),
        ) {
            let arr = build(n_out, n_in, r, &states);
            let mut lhs = vec![false; n_in];
            let mut rhs = vec![false; n_in];
            for (i, &b) in a_bits.iter().enumerate() {
                if b {
                    if split >> (i % 64) & 1 == 1 { lhs[i] = true } else { rhs[i] = true }
                }
            }
            let both = arr.active_p_counts(&InputVector::new(a_bits)).unwrap();
            let l = arr.active_p_counts(&InputVector::new(lhs)).unwrap();
            let r_ = arr.active_p_counts(&InputVector::new(rhs)).unwrap();
            for j in 0..n_out {
                prop_assert_eq!(both[j], l[j] + r_[j]);
            }
        }
    }

    #[test]
    fn randomize_has_zero_padding_and_is_seeded() {
        let mut a = SynapseArray::new(3, 5, 3, DeviceParams::default()).unwrap();
        a.randomize(11);
        let mut b = a.clone();
        b.randomize(11);
        assert_eq!(a, b);
        for row in 0..3 {
            assert_eq!(a.row_words(row)[0] >> 15, 0);
        }
        let mut c = a.clone();
        c.randomize(12);
        assert_ne!(a, c);
    }
}
