//! The quanvolutional layer: sliding-window patch extraction, seeded random
//! variational circuits, per-patch circuit execution into a multi-channel
//! feature map, and parameter-shift gradients for the rotation angles.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::encoders::ImagePatch;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simulator::{
    apply_circuit, pauli_z_expectations, AngleSlot, Circuit, GateOp, QuantumState, MAX_QUBITS,
};

/// Sliding-window geometry: a square `filter_edge × filter_edge` window
/// moved by `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterSpec {
    filter_edge: usize,
    stride: usize,
}

impl FilterSpec {
    pub fn new(filter_edge: usize, stride: usize) -> Result<Self> {
        if filter_edge < 2 || !filter_edge.is_power_of_two() {
            return Err(Error::config(format!(
                "filter edge must be a power of two >= 2, got {filter_edge}"
            )));
        }
        if stride == 0 {
            return Err(Error::config("stride must be at least 1"));
        }
        Ok(Self {
            filter_edge,
            stride,
        })
    }

    pub fn filter_edge(&self) -> usize {
        self.filter_edge
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// `n = log2(filter_edge)`.
    pub fn n(&self) -> u32 {
        self.filter_edge.trailing_zeros()
    }

    /// Output grid `(rows, cols)` when sweeping an `h × w` image.
    pub fn output_grid(&self, image_h: usize, image_w: usize) -> Result<(usize, usize)> {
        if image_h < self.filter_edge || image_w < self.filter_edge {
            return Err(Error::config(format!(
                "filter {} does not fit image {image_h}x{image_w}",
                self.filter_edge
            )));
        }
        Ok((
            (image_h - self.filter_edge) / self.stride + 1,
            (image_w - self.filter_edge) / self.stride + 1,
        ))
    }
}

/// Cuts an `h × w` row-major intensity image into patches, row-major over
/// the output grid; patch `(r, c)` covers rows `[r·S, r·S+F)` and columns
/// `[c·S, c·S+F)`.
pub fn extract_patches(
    pixels: &[u8],
    image_h: usize,
    image_w: usize,
    spec: &FilterSpec,
) -> Result<Vec<ImagePatch>> {
    if pixels.len() != image_h * image_w {
        return Err(Error::contract(format!(
            "image buffer has {} pixels, dims say {image_h}x{image_w}",
            pixels.len()
        )));
    }
    let (rows, cols) = spec.output_grid(image_h, image_w)?;
    let f = spec.filter_edge;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut patch = Vec::with_capacity(f * f);
            for y in 0..f {
                let row_start = (r * spec.stride + y) * image_w + c * spec.stride;
                patch.extend_from_slice(&pixels[row_start..row_start + f]);
            }
            patches.push(ImagePatch::new(spec.n(), patch)?);
        }
    }
    Ok(patches)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A trainable rotation: `slot` indexes the angle vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotationGate {
    pub axis: Axis,
    pub target: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnotGate {
    pub control: usize,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomGate {
    Rotation(RotationGate),
    Cnot(CnotGate),
}

/// A seeded random variational circuit: `R` rotations with trainable angles
/// and `round(0.4·R)` CNOTs, interleaved by a seeded shuffle.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalCircuitSpec {
    seed: u64,
    num_qubits: usize,
    gates: Vec<RandomGate>,
    angles: Vec<f64>,
    trainable: bool,
}

/// CNOTs per `R` rotations: `0.4·R` rounded half-up.
pub fn cnot_count(num_rotations: usize) -> usize {
    (4 * num_rotations + 5) / 10
}

/// Draws a random circuit, fully determined by `seed`.
///
/// One splitmix64 stream drives everything, in this order: per rotation an
/// axis (uniform X/Y/Z), a target qubit and an initial angle in `[0, 2π)`;
/// per CNOT a control qubit and a distinct target; finally a Fisher-Yates
/// shuffle interleaves the combined gate list. Circuits start trainable.
pub fn generate_random_circuit(
    seed: u64,
    num_qubits: usize,
    num_rotations: usize,
) -> Result<VariationalCircuitSpec> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    if num_rotations > 0 && num_qubits < 2 {
        return Err(Error::config(
            "random circuits with rotations need at least 2 qubits",
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let mut rotations = Vec::with_capacity(num_rotations);
    let mut angles = Vec::with_capacity(num_rotations);
    for slot in 0..num_rotations {
        let axis = match rng.below(3) {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        };
        let target = rng.below(num_qubits as u64) as usize;
        angles.push(rng.next_f64() * 2.0 * PI);
        rotations.push(RotationGate { axis, target, slot });
    }
    let mut cnots = Vec::with_capacity(cnot_count(num_rotations));
    for _ in 0..cnot_count(num_rotations) {
        let control = rng.below(num_qubits as u64) as usize;
        let raw = rng.below(num_qubits as u64 - 1) as usize;
        let target = raw + usize::from(raw >= control);
        cnots.push(CnotGate { control, target });
    }
    let mut gates: Vec<RandomGate> = rotations
        .into_iter()
        .map(RandomGate::Rotation)
        .chain(cnots.into_iter().map(RandomGate::Cnot))
        .collect();
    rng.shuffle(&mut gates);
    Ok(VariationalCircuitSpec {
        seed,
        num_qubits,
        gates,
        angles,
        trainable: true,
    })
}

impl VariationalCircuitSpec {
    /// Builds a spec from explicit parts (mostly for tests and tooling);
    /// rotation slots must be a permutation of `0..angles.len()`.
    pub fn from_parts(
        seed: u64,
        num_qubits: usize,
        gates: Vec<RandomGate>,
        angles: Vec<f64>,
        trainable: bool,
    ) -> Result<Self> {
        let mut slots: Vec<usize> = Vec::new();
        for gate in &gates {
            match gate {
                RandomGate::Rotation(r) => {
                    if r.target >= num_qubits {
                        return Err(Error::contract("rotation target out of range"));
                    }
                    slots.push(r.slot);
                }
                RandomGate::Cnot(c) => {
                    if c.control >= num_qubits || c.target >= num_qubits || c.control == c.target {
                        return Err(Error::contract("bad CNOT placement"));
                    }
                }
            }
        }
        slots.sort_unstable();
        if slots != (0..angles.len()).collect::<Vec<_>>() {
            return Err(Error::contract(
                "rotation slots must cover each angle exactly once",
            ));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::contract("non-finite rotation angle"));
        }
        let spec = Self {
            seed,
            num_qubits,
            gates,
            angles,
            trainable,
        };
        spec.circuit()?; // surfaces any remaining structural problem
        Ok(spec)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_rotations(&self) -> usize {
        self.angles.len()
    }

    pub fn num_cnots(&self) -> usize {
        self.gates.len() - self.angles.len()
    }

    pub fn gates(&self) -> &[RandomGate] {
        &self.gates
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn set_angles(&mut self, angles: Vec<f64>) -> Result<()> {
        if angles.len() != self.angles.len() {
            return Err(Error::contract(format!(
                "expected {} angles, got {}",
                self.angles.len(),
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::contract("non-finite rotation angle"));
        }
        self.angles = angles;
        Ok(())
    }

    /// The executable circuit; rotation angles are parameter slots fed from
    /// [`Self::angles`] at application time.
    pub fn circuit(&self) -> Result<Circuit> {
        let mut circuit = Circuit::new(self.num_qubits)?;
        for gate in &self.gates {
            let op = match gate {
                RandomGate::Rotation(r) => {
                    let slot = AngleSlot::Param(r.slot);
                    match r.axis {
                        Axis::X => GateOp::rot_x(r.target, slot),
                        Axis::Y => GateOp::rot_y(r.target, slot),
                        Axis::Z => GateOp::rot_z(r.target, slot),
                    }
                }
                RandomGate::Cnot(c) => GateOp::cnot(c.control, c.target),
            };
            circuit.push(op)?;
        }
        Ok(circuit)
    }
}

/// Per-qubit expectation values over the output grid. Values are laid out
/// channel-major, then row-major over the grid: flat index
/// `channel·(height·width) + row·width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * height * width {
            return Err(Error::contract(format!(
                "feature map needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::contract("feature value outside [-1, 1]"));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn value(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.values[channel * self.height * self.width + row * self.width + col]
    }

    /// Flat view in the documented order (channel-major, then row-major).
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Runs the variational circuit over every encoded patch and collects the
/// per-qubit Pauli-Z expectations into a feature map, channel `q` holding
/// qubit `q`'s expectation at each grid cell.
pub fn forward(
    encoded_patches: &[QuantumState],
    spec: &VariationalCircuitSpec,
    grid: (usize, usize),
) -> Result<FeatureMap> {
    let (height, width) = grid;
    let cells = height * width;
    if encoded_patches.len() != cells {
        return Err(Error::contract(format!(
            "{} patches for a {height}x{width} grid",
            encoded_patches.len()
        )));
    }
    let circuit = spec.circuit()?;
    let per_patch: Vec<Vec<f64>> = encoded_patches
        .par_iter()
        .map(|state| {
            apply_circuit(state, &circuit, spec.angles()).map(|out| pauli_z_expectations(&out))
        })
        .collect::<Result<_>>()?;
    let q = spec.num_qubits();
    let mut values = vec![0.0; q * cells];
    for (cell, exps) in per_patch.iter().enumerate() {
        for (channel, &e) in exps.iter().enumerate() {
            values[channel * cells + cell] = e;
        }
    }
    FeatureMap::new(q, height, width, values)
}

/// Gradient of `upstream · E(θ)` w.r.t. every rotation angle via the
/// parameter-shift rule: `g_j = Σ_q upstream_q (E_q(θ_j+π/2) − E_q(θ_j−π/2))/2`,
/// exact for this gate set.
pub fn parameter_shift_grad(
    encoded_patch: &QuantumState,
    spec: &VariationalCircuitSpec,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if !spec.trainable() {
        return Err(Error::contract(
            "parameter-shift gradient requested for a frozen circuit",
        ));
    }
    if upstream.len() != spec.num_qubits() {
        return Err(Error::contract(format!(
            "upstream length {} != qubit count {}",
            upstream.len(),
            spec.num_qubits()
        )));
    }
    let circuit = spec.circuit()?;
    (0..spec.num_rotations())
        .into_par_iter()
        .map(|j| {
            let eval = |delta: f64| -> Result<Vec<f64>> {
                let mut angles = spec.angles().to_vec();
                angles[j] += delta;
                Ok(pauli_z_expectations(&apply_circuit(
                    encoded_patch,
                    &circuit,
                    &angles,
                )?))
            };
            let plus = eval(FRAC_PI_2)?;
            let minus = eval(-FRAC_PI_2)?;
            Ok(upstream
                .iter()
                .zip(plus.iter().zip(&minus))
                .map(|(u, (p, m))| u * (p - m) / 2.0)
                .sum())
        })
        .collect()
}
