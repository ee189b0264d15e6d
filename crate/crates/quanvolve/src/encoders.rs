//! Quantum image encodings for square grayscale patches.
//!
//! Three schemes with very different qubit/gate budgets:
//!
//! * **Threshold**: one qubit per pixel, flipped when the pixel exceeds a
//!   threshold. The state is a single basis state.
//! * **FRQI**: intensities as rotation angles on one color qubit entangled
//!   with a position register, `(1/2^n) Σ_i (cos θ_i |0⟩ + sin θ_i |1⟩)|i⟩`.
//! * **NEQR**: intensities as 8 color basis qubits entangled with the
//!   position register, one multi-controlled X per set bit of each pixel,
//!   optionally minimized per bit plane.
//!
//! Conventions: pixels are row-major, position `i` of pixel `(x, y)` is
//! `(y << n) | x`, position qubits are `0..2n` (position bit `p` on qubit
//! `p`), and color qubits sit above them.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::minimizer::{self, BoolFunction, Implicant};
use crate::simulator::{apply_circuit, zero_state, AngleSlot, Circuit, Control, GateOp, QuantumState};

/// Encoder selector, shared by accounting, caching and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Threshold,
    Frqi,
    Neqr,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::Threshold, EncoderKind::Frqi, EncoderKind::Neqr];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Threshold => "threshold",
            EncoderKind::Frqi => "frqi",
            EncoderKind::Neqr => "neqr",
        }
    }

    /// Stable byte code used by the cache and model file headers.
    pub fn code(self) -> u8 {
        match self {
            EncoderKind::Threshold => 0,
            EncoderKind::Frqi => 1,
            EncoderKind::Neqr => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(EncoderKind::Threshold),
            1 => Ok(EncoderKind::Frqi),
            2 => Ok(EncoderKind::Neqr),
            other => Err(Error::CacheFormat(format!("unknown encoder code {other}"))),
        }
    }
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(EncoderKind::Threshold),
            "frqi" => Ok(EncoderKind::Frqi),
            "neqr" => Ok(EncoderKind::Neqr),
            other => Err(Error::config(format!(
                "unknown encoder {other:?}, expected threshold, frqi or neqr"
            ))),
        }
    }
}

/// A square grayscale patch with edge length `2^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePatch {
    n: u32,
    pixels: Vec<u8>,
}

impl ImagePatch {
    pub fn new(n: u32, pixels: Vec<u8>) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("patch edge must be at least 2 (n >= 1)"));
        }
        let expected = 1usize << (2 * n);
        if pixels.len() != expected {
            return Err(Error::contract(format!(
                "patch with n={n} needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Self { n, pixels })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Edge length `2^n`.
    pub fn edge(&self) -> usize {
        1 << self.n
    }

    pub fn num_pixels(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[(y << self.n) | x]
    }
}

/// Threshold used by the threshold encoder; pixels strictly above `t` map
/// to `|1⟩`. The default `t = 0` marks any nonzero pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThresholdConfig {
    pub t: u8,
}

/// FRQI rotation angles, one per pixel, each in `[0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrqiAngles {
    thetas: Vec<f64>,
}

impl FrqiAngles {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.iter().any(|t| !(0.0..=FRAC_PI_2).contains(t)) {
            return Err(Error::contract("FRQI angle outside [0, pi/2]"));
        }
        Ok(Self { thetas })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }
}

/// The 8 bit planes of a patch: `plane(i)[pos]` is bit `i` of the pixel at
/// row-major position `pos`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeqrBitplanes {
    n: u32,
    planes: [Vec<bool>; 8],
}

impl NeqrBitplanes {
    pub fn from_patch(patch: &ImagePatch) -> Self {
        let planes = std::array::from_fn(|bit| {
            patch
                .pixels()
                .iter()
                .map(|&p| (p >> bit) & 1 == 1)
                .collect()
        });
        Self {
            n: patch.n(),
            planes,
        }
    }

    pub fn plane(&self, bit: usize) -> &[bool] {
        &self.planes[bit]
    }

    /// Reassembles the source patch from the planes (bit-exact).
    pub fn reassemble(&self) -> ImagePatch {
        let num = 1usize << (2 * self.n);
        let pixels = (0..num)
            .map(|pos| {
                (0..8).fold(0u8, |acc, bit| {
                    acc | ((self.planes[bit][pos] as u8) << bit)
                })
            })
            .collect();
        ImagePatch::new(self.n, pixels).expect("planes came from a valid patch")
    }
}

/// Threshold encoding: qubit `i` is `|1⟩` iff pixel `i` exceeds `cfg.t`.
///
/// The circuit is one `PauliX` per exceeding pixel and the state is the
/// single matching basis state over `2^{2n}` qubits.
pub fn encode_threshold(patch: &ImagePatch, cfg: ThresholdConfig) -> Result<(Circuit, QuantumState)> {
    let num_qubits = patch.num_pixels();
    let mut circuit = Circuit::new(num_qubits)?;
    let mut index = 0usize;
    for (i, &pixel) in patch.pixels().iter().enumerate() {
        if pixel > cfg.t {
            circuit.push(GateOp::pauli_x(i))?;
            index |= 1 << i;
        }
    }
    let state = QuantumState::basis_state(num_qubits, index)?;
    Ok((circuit, state))
}

/// Linear pixel-to-angle map `θ_i = (I_i / 255) · π/2`.
pub fn pixels_to_frqi_angles(patch: &ImagePatch) -> FrqiAngles {
    let thetas = patch
        .pixels()
        .iter()
        .map(|&p| f64::from(p) / 255.0 * FRAC_PI_2)
        .collect();
    FrqiAngles::new(thetas).expect("map lands in [0, pi/2] by construction")
}

/// FRQI encoding.
///
/// Position qubits `0..2n`, color qubit `2n`. After Hadamards on the
/// position register, each pixel contributes one position-controlled
/// `RotY(2θ_i)` on the color qubit. For `n = 2` the four-fold control is
/// realized through a Toffoli ladder over three work qubits (`2n+1..2n+4`)
/// that are uncomputed afterwards, so the register is 8 qubits wide even
/// though 5 would suffice in principle. Supported patch sizes: `n ∈ {1, 2}`.
pub fn encode_frqi(patch: &ImagePatch) -> Result<(Circuit, QuantumState)> {
    let n = patch.n();
    let pos_bits = (2 * n) as usize;
    let color = pos_bits;
    let angles = pixels_to_frqi_angles(patch);

    let mut circuit = match n {
        1 => Circuit::new(3)?,
        2 => Circuit::new(8)?,
        _ => {
            return Err(Error::config(format!(
                "FRQI encoder supports n in {{1, 2}}, got n={n}"
            )))
        }
    };
    for q in 0..pos_bits {
        circuit.push(GateOp::hadamard(q))?;
    }
    for (i, &theta) in angles.thetas().iter().enumerate() {
        let pos_controls: Vec<Control> = (0..pos_bits)
            .map(|p| Control::matching_bit(p, (i >> p) & 1 == 1))
            .collect();
        let angle = AngleSlot::Fixed(2.0 * theta);
        if n == 1 {
            circuit.push(GateOp::controlled_rot_y(pos_controls, color, angle))?;
        } else {
            let (w0, w1, w2) = (color + 1, color + 2, color + 3);
            let ladder = [
                GateOp::multi_controlled_x(vec![pos_controls[0], pos_controls[1]], w0),
                GateOp::multi_controlled_x(vec![Control::one(w0), pos_controls[2]], w1),
                GateOp::multi_controlled_x(vec![Control::one(w1), pos_controls[3]], w2),
            ];
            for op in &ladder {
                circuit.push(op.clone())?;
            }
            circuit.push(GateOp::controlled_rot_y(vec![Control::one(w2)], color, angle))?;
            for op in ladder.iter().rev() {
                circuit.push(op.clone())?;
            }
        }
    }
    let state = apply_circuit(&zero_state(circuit.num_qubits())?, &circuit, &[])?;
    Ok((circuit, state))
}

/// NEQR encoding over `8 + 2n` qubits: position qubits `0..2n`, color bit
/// `i` on qubit `2n + i`.
///
/// After Hadamards on the position register, every set bit `C^i_XY = 1`
/// contributes one position-controlled X on its color qubit; zero bits need
/// no gate. With `minimize` the controlled-X set of each bit plane is
/// replaced by its minimized cover. The state has exactly `2^{2n}` nonzero
/// amplitudes of `1/2^n`, at `(gray << 2n) | position`.
pub fn encode_neqr(patch: &ImagePatch, minimize: bool) -> Result<(Circuit, QuantumState)> {
    let pos_bits = (2 * patch.n()) as usize;
    let num_qubits = 8 + pos_bits;
    let position_qubits: Vec<usize> = (0..pos_bits).collect();
    let planes = NeqrBitplanes::from_patch(patch);

    let mut circuit = Circuit::new(num_qubits)?;
    for q in 0..pos_bits {
        circuit.push(GateOp::hadamard(q))?;
    }
    let full_care = ((1u64 << pos_bits) - 1) as u32;
    for bit in 0..8 {
        let minterms: Vec<u32> = planes
            .plane(bit)
            .iter()
            .enumerate()
            .filter(|(_, &set)| set)
            .map(|(pos, _)| pos as u32)
            .collect();
        let cover: Vec<Implicant> = if minimize {
            let f = BoolFunction::new(pos_bits as u32, minterms)?;
            minimizer::minimize_cover(&f)
        } else {
            minterms
                .into_iter()
                .map(|m| Implicant {
                    care_mask: full_care,
                    value_mask: m,
                })
                .collect()
        };
        for gate in minimizer::implicants_to_gates(&cover, pos_bits + bit, &position_qubits)? {
            circuit.push(gate)?;
        }
    }
    let state = apply_circuit(&zero_state(num_qubits)?, &circuit, &[])?;
    Ok((circuit, state))
}

/// Reads a patch back out of an NEQR state.
///
/// Requires exactly `2^{2n}` nonzero amplitudes of equal magnitude `1/2^n`,
/// one per position; anything else is a decode error.
pub fn decode_neqr(state: &QuantumState, n: u32) -> Result<ImagePatch> {
    let pos_bits = (2 * n) as usize;
    let num_positions = 1usize << pos_bits;
    if state.num_qubits() != 8 + pos_bits {
        return Err(Error::Decode(format!(
            "NEQR state for n={n} needs {} qubits, got {}",
            8 + pos_bits,
            state.num_qubits()
        )));
    }
    let sparse = state.to_sparse();
    let entries = match sparse.data() {
        crate::simulator::StateData::Sparse(e) => e.clone(),
        crate::simulator::StateData::Dense(_) => unreachable!("to_sparse returned dense"),
    };
    if entries.len() != num_positions {
        return Err(Error::Decode(format!(
            "nonzero count {} != expected {num_positions}",
            entries.len()
        )));
    }
    let expected_mag = 1.0 / f64::from(1u32 << n);
    let mut pixels = vec![None; num_positions];
    for (index, amp) in entries {
        if (amp.norm() - expected_mag).abs() > 1e-9 {
            return Err(Error::Decode(format!(
                "amplitude magnitude {} at index {index} != {expected_mag}",
                amp.norm()
            )));
        }
        let pos = index & (num_positions - 1);
        let gray = (index >> pos_bits) as u8;
        if pixels[pos].replace(gray).is_some() {
            return Err(Error::Decode(format!("position {pos} appears twice")));
        }
    }
    let pixels = pixels
        .into_iter()
        .collect::<Option<Vec<u8>>>()
        .ok_or_else(|| Error::Decode("a position has no amplitude".into()))?;
    ImagePatch::new(n, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    use num_complex::Complex64;

    use crate::simulator::GateKind;

    fn patch(n: u32, pixels: &[u8]) -> ImagePatch {
        ImagePatch::new(n, pixels.to_vec()).unwrap()
    }

    /// Closed-form FRQI state evaluated straight from the defining sum,
    /// independent of any circuit.
    fn frqi_oracle(p: &ImagePatch) -> Vec<Complex64> {
        let pos_bits = 2 * p.n() as usize;
        let num_qubits = if p.n() == 1 { 3 } else { 8 };
        let scale = 1.0 / f64::from(1u32 << p.n());
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        for (i, &px) in p.pixels().iter().enumerate() {
            let theta = f64::from(px) / 255.0 * FRAC_PI_2;
            amps[i] = Complex64::new(scale * theta.cos(), 0.0);
            amps[(1 << pos_bits) | i] = Complex64::new(scale * theta.sin(), 0.0);
        }
        amps
    }

    #[test]
    fn threshold_example_patch() {
        let (circuit, state) = encode_threshold(
            &patch(1, &[0, 200, 50, 255]),
            ThresholdConfig { t: 127 },
        )
        .unwrap();
        assert_eq!(circuit.len(), 2);
        assert!(circuit.ops().iter().all(|op| op.kind == GateKind::PauliX));
        assert_eq!(state.support_len(), 1);
        assert_eq!(state.amplitude(0b1010), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn threshold_all_zero_and_all_bright() {
        let (c, s) = encode_threshold(&patch(1, &[0; 4]), ThresholdConfig { t: 0 }).unwrap();
        assert!(c.is_empty());
        assert_eq!(s.amplitude(0), Complex64::new(1.0, 0.0));

        let (c, s) = encode_threshold(&patch(2, &[255; 16]), ThresholdConfig { t: 127 }).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(s.amplitude((1 << 16) - 1), Complex64::new(1.0, 0.0));
        assert_eq!(s.support_len(), 1);
    }

    #[test]
    fn angle_map_endpoints_and_midpoint() {
        let a = pixels_to_frqi_angles(&patch(1, &[0, 255, 128, 10]));
        assert_eq!(a.thetas()[0], 0.0);
        assert_eq!(a.thetas()[1], FRAC_PI_2);
        assert_eq!(a.thetas()[2], 128.0 / 255.0 * FRAC_PI_2);
        assert!((a.thetas()[2] - 0.78848).abs() < 1e-5);
        assert!(a.thetas().iter().all(|t| (0.0..=FRAC_PI_2).contains(t)));
    }

    #[test]
    fn frqi_flat_patches() {
        let (c, s) = encode_frqi(&patch(1, &[0; 4])).unwrap();
        assert_eq!(c.len(), 6);
        for i in 0..4 {
            assert!((s.amplitude(i).re - 0.5).abs() < 1e-12);
            assert!(s.amplitude(4 | i).norm() < 1e-12);
        }

        let (_, s) = encode_frqi(&patch(1, &[255; 4])).unwrap();
        for i in 0..4 {
            assert!(s.amplitude(i).norm() < 1e-12);
            assert!((s.amplitude(4 | i).re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn frqi_single_bright_pixel_matches_oracle() {
        let p = patch(1, &[0, 255, 0, 0]);
        let (_, s) = encode_frqi(&p).unwrap();
        assert!((s.amplitude(0b101).re - 0.5).abs() < 1e-12);
        for i in [0usize, 2, 3] {
            assert!((s.amplitude(i).re - 0.5).abs() < 1e-12);
            assert!(s.amplitude(4 | i).norm() < 1e-12);
        }
        let oracle = frqi_oracle(&p);
        for (i, o) in oracle.iter().enumerate() {
            assert!((s.amplitude(i) - o).norm() < 1e-10, "index {i}");
        }
    }

    #[test]
    fn frqi_n2_matches_oracle_and_clears_work_qubits() {
        let pixels: Vec<u8> = (0..16).map(|i| (i * 17) as u8).collect();
        let p = patch(2, &pixels);
        let (c, s) = encode_frqi(&p).unwrap();
        assert_eq!(c.num_qubits(), 8);
        assert_eq!(c.len(), 4 + 16 * 7);
        let oracle = frqi_oracle(&p);
        for (i, o) in oracle.iter().enumerate() {
            assert!((s.amplitude(i) - o).norm() < 1e-10, "index {i}");
        }
        // Work-qubit subspace: any index with a bit above qubit 4 set must
        // carry no amplitude.
        for i in 0..s.dim() {
            if i >> 5 != 0 {
                assert!(s.amplitude(i).norm() < 1e-10, "index {i}");
            }
        }
    }

    #[test]
    fn frqi_rejects_unsupported_sizes() {
        let p = ImagePatch::new(3, vec![0; 64]).unwrap();
        assert!(matches!(encode_frqi(&p), Err(Error::Config(_))));
    }

    #[test]
    fn neqr_flat_patches() {
        let (c, s) = encode_neqr(&patch(1, &[0; 4]), true).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.ops().iter().all(|op| op.kind == GateKind::Hadamard));
        for pos in 0..4 {
            assert!((s.amplitude(pos).re - 0.5).abs() < 1e-12);
        }

        for n in [1u32, 2] {
            let num = 1usize << (2 * n);
            let (c, _) = encode_neqr(&ImagePatch::new(n, vec![255; num]).unwrap(), true).unwrap();
            assert_eq!(c.len(), 8 + 2 * n as usize);
            let xs = c
                .ops()
                .iter()
                .filter(|op| op.kind == GateKind::PauliX)
                .count();
            assert_eq!(xs, 8);
        }

        let (c, _) = encode_neqr(&patch(1, &[7; 4]), true).unwrap();
        assert_eq!(c.len(), 2 + 3);
        assert_eq!(
            c.ops()
                .iter()
                .filter(|op| op.kind == GateKind::PauliX)
                .count(),
            3
        );
    }

    #[test]
    fn neqr_round_trip_and_minimization_agreement() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for n in [1u32, 2] {
            let num = 1usize << (2 * n);
            for _ in 0..25 {
                let pixels: Vec<u8> = (0..num).map(|_| rng.below(256) as u8).collect();
                let p = ImagePatch::new(n, pixels).unwrap();
                let (plain_c, plain_s) = encode_neqr(&p, false).unwrap();
                let (min_c, min_s) = encode_neqr(&p, true).unwrap();
                assert!(min_c.len() <= plain_c.len());
                assert!(min_s.max_abs_diff(&plain_s) < 1e-12);
                assert_eq!(decode_neqr(&min_s, n).unwrap(), p);
                assert_eq!(decode_neqr(&plain_s, n).unwrap(), p);
                assert_eq!(min_s.support_len(), num);
            }
        }
    }

    #[test]
    fn neqr_decode_rejects_non_neqr_states() {
        let s = zero_state(10).unwrap();
        assert!(matches!(decode_neqr(&s, 1), Err(Error::Decode(_))));
        let s12 = zero_state(12).unwrap();
        assert!(matches!(decode_neqr(&s12, 1), Err(Error::Decode(_))));
    }

    #[test]
    fn encoders_are_deterministic() {
        let p = patch(1, &[3, 141, 59, 26]);
        let (c1, s1) = encode_frqi(&p).unwrap();
        let (c2, s2) = encode_frqi(&p).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
        let (c1, s1) = encode_neqr(&p, true).unwrap();
        let (c2, s2) = encode_neqr(&p, true).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn bitplanes_reassemble_exactly() {
        let mut rng = crate::rng::SplitMix64::new(3);
        for n in [1u32, 2] {
            let num = 1usize << (2 * n);
            let pixels: Vec<u8> = (0..num).map(|_| rng.below(256) as u8).collect();
            let p = ImagePatch::new(n, pixels).unwrap();
            assert_eq!(NeqrBitplanes::from_patch(&p).reassemble(), p);
        }
    }

    #[test]
    fn patch_validation() {
        assert!(ImagePatch::new(0, vec![1]).is_err());
        assert!(ImagePatch::new(1, vec![0; 3]).is_err());
        assert!(ImagePatch::new(1, vec![0; 4]).is_ok());
    }
}
