//! Exact complex state-vector simulation.
//!
//! Basis-index convention, used everywhere in this crate: **qubit `k` is bit
//! `k` (least significant) of the basis index**. A state over `Q` qubits is a
//! vector of `2^Q` complex amplitudes, stored either densely or as a sorted
//! list of `(basis index, amplitude)` pairs. Circuits keep a sparse working
//! representation while the support stays at or below 1/8 of the dimension
//! and switch to dense beyond that, so basis-state-style inputs (one-hot or
//! few-hot) simulate in time proportional to their support.
//!
//! All operations are pure functions over immutable inputs.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on simulated register width.
pub const MAX_QUBITS: usize = 24;

/// Supports larger than `dim / DENSIFY_DIVISOR` are stored densely.
const DENSIFY_DIVISOR: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Control polarity: fire on `|1⟩` or on `|0⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    One,
    Zero,
}

/// A control wire for a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

impl Control {
    pub fn one(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: Polarity::One,
        }
    }

    pub fn zero(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: Polarity::Zero,
        }
    }

    /// Control that fires when the qubit matches `bit`.
    pub fn matching_bit(qubit: usize, bit: bool) -> Self {
        if bit {
            Self::one(qubit)
        } else {
            Self::zero(qubit)
        }
    }
}

/// A rotation angle: fixed at circuit-build time, or an index into a
/// trainable parameter vector supplied at execution time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleSlot {
    Fixed(f64),
    Param(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Hadamard,
    PauliX,
    RotX,
    RotY,
    RotZ,
    Cnot,
    ControlledRotY,
    MultiControlledX,
}

impl GateKind {
    pub fn carries_angle(self) -> bool {
        matches!(
            self,
            GateKind::RotX | GateKind::RotY | GateKind::RotZ | GateKind::ControlledRotY
        )
    }
}

/// One gate in a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
    pub angle: Option<AngleSlot>,
}

impl GateOp {
    pub fn hadamard(target: usize) -> Self {
        Self {
            kind: GateKind::Hadamard,
            targets: vec![target],
            controls: Vec::new(),
            angle: None,
        }
    }

    pub fn pauli_x(target: usize) -> Self {
        Self {
            kind: GateKind::PauliX,
            targets: vec![target],
            controls: Vec::new(),
            angle: None,
        }
    }

    pub fn rot_x(target: usize, angle: AngleSlot) -> Self {
        Self {
            kind: GateKind::RotX,
            targets: vec![target],
            controls: Vec::new(),
            angle: Some(angle),
        }
    }

    pub fn rot_y(target: usize, angle: AngleSlot) -> Self {
        Self {
            kind: GateKind::RotY,
            targets: vec![target],
            controls: Vec::new(),
            angle: Some(angle),
        }
    }

    pub fn rot_z(target: usize, angle: AngleSlot) -> Self {
        Self {
            kind: GateKind::RotZ,
            targets: vec![target],
            controls: Vec::new(),
            angle: Some(angle),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            targets: vec![target],
            controls: vec![Control::one(control)],
            angle: None,
        }
    }

    pub fn controlled_rot_y(controls: Vec<Control>, target: usize, angle: AngleSlot) -> Self {
        Self {
            kind: GateKind::ControlledRotY,
            targets: vec![target],
            controls,
            angle: Some(angle),
        }
    }

    pub fn multi_controlled_x(controls: Vec<Control>, target: usize) -> Self {
        Self {
            kind: GateKind::MultiControlledX,
            targets: vec![target],
            controls,
            angle: None,
        }
    }

    /// The gate with its action reversed. Rotations negate their fixed
    /// angle; parameter slots are kept as-is, so the caller must negate
    /// the corresponding parameters. Everything else is self-inverse.
    pub fn inverted(&self) -> Self {
        let mut op = self.clone();
        if let Some(AngleSlot::Fixed(theta)) = op.angle {
            op.angle = Some(AngleSlot::Fixed(-theta));
        }
        op
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::contract("gate has no target qubit"));
        }
        for &t in &self.targets {
            if t >= num_qubits {
                return Err(Error::contract(format!(
                    "target qubit {t} out of range for {num_qubits}-qubit circuit"
                )));
            }
        }
        for c in &self.controls {
            if c.qubit >= num_qubits {
                return Err(Error::contract(format!(
                    "control qubit {} out of range for {num_qubits}-qubit circuit",
                    c.qubit
                )));
            }
            if self.targets.contains(&c.qubit) {
                return Err(Error::contract(format!(
                    "qubit {} is both control and target",
                    c.qubit
                )));
            }
        }
        let mut seen = self.targets.clone();
        seen.extend(self.controls.iter().map(|c| c.qubit));
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("duplicate qubit in gate operands"));
        }
        if self.kind.carries_angle() != self.angle.is_some() {
            return Err(Error::contract(format!(
                "{:?} angle slot mismatch: only rotation gates carry an angle",
                self.kind
            )));
        }
        let single_target = self.targets.len() == 1;
        match self.kind {
            GateKind::Hadamard | GateKind::RotX | GateKind::RotY | GateKind::RotZ => {
                if !single_target || !self.controls.is_empty() {
                    return Err(Error::contract(format!(
                        "{:?} expects one target and no controls",
                        self.kind
                    )));
                }
            }
            GateKind::PauliX => {
                if !single_target || !self.controls.is_empty() {
                    return Err(Error::contract("PauliX expects one target and no controls"));
                }
            }
            GateKind::Cnot => {
                if !single_target
                    || self.controls.len() != 1
                    || self.controls[0].polarity != Polarity::One
                {
                    return Err(Error::contract(
                        "CNOT expects one target and one |1⟩-control",
                    ));
                }
            }
            GateKind::ControlledRotY | GateKind::MultiControlledX => {
                if self.controls.is_empty() {
                    return Err(Error::contract(format!(
                        "{:?} expects at least one control",
                        self.kind
                    )));
                }
                if self.kind == GateKind::ControlledRotY && !single_target {
                    return Err(Error::contract("ControlledRotY expects one target"));
                }
            }
        }
        Ok(())
    }
}

/// An ordered list of gates over a fixed register width.
///
/// Each trainable parameter slot may be referenced by at most one gate, so a
/// parameter vector of length [`Circuit::num_trainable_params`] drives the
/// circuit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<GateOp>,
    num_trainable_params: usize,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "circuit width {num_qubits} outside supported range 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self {
            num_qubits,
            ops: Vec::new(),
            num_trainable_params: 0,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn num_trainable_params(&self) -> usize {
        self.num_trainable_params
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.validate(self.num_qubits)?;
        if let Some(AngleSlot::Param(slot)) = op.angle {
            let taken = self.ops.iter().any(|existing| {
                matches!(existing.angle, Some(AngleSlot::Param(s)) if s == slot)
            });
            if taken {
                return Err(Error::contract(format!(
                    "trainable parameter slot {slot} already used"
                )));
            }
            self.num_trainable_params = self.num_trainable_params.max(slot + 1);
        }
        self.ops.push(op);
        Ok(())
    }

    /// Exact inverse: reversed gate order with angles negated. For circuits
    /// with trainable slots, apply the inverse with negated parameters.
    pub fn inverted(&self) -> Self {
        Self {
            num_qubits: self.num_qubits,
            ops: self.ops.iter().rev().map(GateOp::inverted).collect(),
            num_trainable_params: self.num_trainable_params,
        }
    }
}

/// A pure quantum state over `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    data: StateData,
}

/// Amplitude storage. `Sparse` lists each basis index at most once, in
/// ascending order, with nonzero amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Dense(Vec<Complex64>),
    Sparse(Vec<(usize, Complex64)>),
}

impl QuantumState {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.data, StateData::Sparse(_))
    }

    /// Number of stored nonzero amplitudes.
    pub fn support_len(&self) -> usize {
        match &self.data {
            StateData::Dense(v) => v.iter().filter(|a| a.re != 0.0 || a.im != 0.0).count(),
            StateData::Sparse(v) => v.len(),
        }
    }

    pub fn from_dense(num_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_width(num_qubits)?;
        if amplitudes.len() != 1 << num_qubits {
            return Err(Error::contract(format!(
                "dense state over {num_qubits} qubits needs {} amplitudes, got {}",
                1usize << num_qubits,
                amplitudes.len()
            )));
        }
        Ok(Self {
            num_qubits,
            data: StateData::Dense(amplitudes),
        })
    }

    pub fn from_sparse(num_qubits: usize, mut entries: Vec<(usize, Complex64)>) -> Result<Self> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        entries.retain(|(_, a)| a.re != 0.0 || a.im != 0.0);
        entries.sort_unstable_by_key(|(i, _)| *i);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::contract(format!(
                    "duplicate basis index {} in sparse state",
                    pair[0].0
                )));
            }
        }
        if let Some(&(last, _)) = entries.last() {
            if last >= dim {
                return Err(Error::contract(format!(
                    "basis index {last} out of range for {num_qubits} qubits"
                )));
            }
        }
        Ok(Self {
            num_qubits,
            data: StateData::Sparse(entries),
        })
    }

    /// Single basis state `|index⟩`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        Self::from_sparse(num_qubits, vec![(index, ONE)])
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        match &self.data {
            StateData::Dense(v) => v[index],
            StateData::Sparse(v) => v
                .binary_search_by_key(&index, |(i, _)| *i)
                .map(|pos| v[pos].1)
                .unwrap_or(ZERO),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        match &self.data {
            StateData::Dense(v) => v.iter().map(|a| a.norm_sqr()).sum(),
            StateData::Sparse(v) => v.iter().map(|(_, a)| a.norm_sqr()).sum(),
        }
    }

    /// Same state with dense storage. Conversion is exact.
    pub fn to_dense(&self) -> Self {
        match &self.data {
            StateData::Dense(_) => self.clone(),
            StateData::Sparse(entries) => {
                let mut amps = vec![ZERO; self.dim()];
                for &(i, a) in entries {
                    amps[i] = a;
                }
                Self {
                    num_qubits: self.num_qubits,
                    data: StateData::Dense(amps),
                }
            }
        }
    }

    /// Same state with sparse storage (exact zeros dropped). Exact.
    pub fn to_sparse(&self) -> Self {
        match &self.data {
            StateData::Sparse(_) => self.clone(),
            StateData::Dense(amps) => {
                let entries = amps
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
                    .map(|(i, a)| (i, *a))
                    .collect();
                Self {
                    num_qubits: self.num_qubits,
                    data: StateData::Sparse(entries),
                }
            }
        }
    }

    /// Largest absolute amplitude difference against another state.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.num_qubits, other.num_qubits, "qubit count mismatch");
        (0..self.dim())
            .map(|i| (self.amplitude(i) - other.amplitude(i)).norm())
            .fold(0.0, f64::max)
    }
}

fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// The all-zeros state `|0…0⟩` over `num_qubits` qubits.
pub fn zero_state(num_qubits: usize) -> Result<QuantumState> {
    QuantumState::basis_state(num_qubits, 0)
}

#[inline]
fn controls_match(index: usize, controls: &[Control]) -> bool {
    controls.iter().all(|c| {
        let bit = (index >> c.qubit) & 1;
        match c.polarity {
            Polarity::One => bit == 1,
            Polarity::Zero => bit == 0,
        }
    })
}

/// 2x2 unitary as `[u00, u01, u10, u11]`.
fn gate_matrix(kind: GateKind, theta: f64) -> [Complex64; 4] {
    match kind {
        GateKind::Hadamard => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            [h, h, h, -h]
        }
        GateKind::RotX => {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            [
                Complex64::new(c, 0.0),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ]
        }
        GateKind::RotY | GateKind::ControlledRotY => {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            [
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ]
        }
        GateKind::RotZ => [
            Complex64::from_polar(1.0, -theta / 2.0),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, theta / 2.0),
        ],
        GateKind::PauliX | GateKind::Cnot | GateKind::MultiControlledX => {
            unreachable!("flip gates do not use a matrix")
        }
    }
}

fn resolve_angle(op: &GateOp, params: &[f64]) -> f64 {
    match op.angle {
        Some(AngleSlot::Fixed(theta)) => theta,
        Some(AngleSlot::Param(slot)) => params[slot],
        None => 0.0,
    }
}

fn is_flip(kind: GateKind) -> bool {
    matches!(
        kind,
        GateKind::PauliX | GateKind::Cnot | GateKind::MultiControlledX
    )
}

fn targets_mask(op: &GateOp) -> usize {
    op.targets.iter().fold(0usize, |m, &t| m | (1 << t))
}

fn apply_op_dense(amps: &mut [Complex64], op: &GateOp, params: &[f64]) {
    if is_flip(op.kind) {
        let mask = targets_mask(op);
        for i in 0..amps.len() {
            let j = i ^ mask;
            if i < j && controls_match(i, &op.controls) {
                amps.swap(i, j);
            }
        }
        return;
    }
    let [u00, u01, u10, u11] = gate_matrix(op.kind, resolve_angle(op, params));
    let t = 1usize << op.targets[0];
    for base in 0..amps.len() {
        if base & t != 0 || !controls_match(base, &op.controls) {
            continue;
        }
        let hi = base | t;
        let a = amps[base];
        let b = amps[hi];
        amps[base] = u00 * a + u01 * b;
        amps[hi] = u10 * a + u11 * b;
    }
}

fn accumulate(map: &mut BTreeMap<usize, Complex64>, index: usize, value: Complex64) {
    if value.re == 0.0 && value.im == 0.0 {
        return;
    }
    *map.entry(index).or_insert(ZERO) += value;
}

fn apply_op_sparse(map: &BTreeMap<usize, Complex64>, op: &GateOp, params: &[f64]) -> BTreeMap<usize, Complex64> {
    let mut out = BTreeMap::new();
    if is_flip(op.kind) {
        let mask = targets_mask(op);
        for (&i, &a) in map {
            let j = if controls_match(i, &op.controls) {
                i ^ mask
            } else {
                i
            };
            out.insert(j, a);
        }
        return out;
    }
    let [u00, u01, u10, u11] = gate_matrix(op.kind, resolve_angle(op, params));
    let t = 1usize << op.targets[0];
    for (&i, &a) in map {
        if !controls_match(i, &op.controls) {
            accumulate(&mut out, i, a);
            continue;
        }
        let low = i & !t;
        let high = i | t;
        if i & t == 0 {
            accumulate(&mut out, low, u00 * a);
            accumulate(&mut out, high, u10 * a);
        } else {
            accumulate(&mut out, low, u01 * a);
            accumulate(&mut out, high, u11 * a);
        }
    }
    out.retain(|_, a| a.re != 0.0 || a.im != 0.0);
    out
}

/// Applies `circuit` to `state`, reading trainable angles from `params`.
///
/// Pure: the input state is untouched. Sparse inputs stay sparse while the
/// support is at most 1/8 of the dimension and are promoted to dense storage
/// once it grows past that.
pub fn apply_circuit(state: &QuantumState, circuit: &Circuit, params: &[f64]) -> Result<QuantumState> {
    if state.num_qubits() != circuit.num_qubits() {
        return Err(Error::contract(format!(
            "state width {} does not match circuit width {}",
            state.num_qubits(),
            circuit.num_qubits()
        )));
    }
    if params.len() != circuit.num_trainable_params() {
        return Err(Error::contract(format!(
            "expected {} parameters, got {}",
            circuit.num_trainable_params(),
            params.len()
        )));
    }
    let dim = state.dim();
    let result = match state.data() {
        StateData::Dense(amps) => {
            let mut amps = amps.clone();
            for op in circuit.ops() {
                apply_op_dense(&mut amps, op, params);
            }
            QuantumState {
                num_qubits: state.num_qubits(),
                data: StateData::Dense(amps),
            }
        }
        StateData::Sparse(entries) => {
            let mut map: BTreeMap<usize, Complex64> = entries.iter().copied().collect();
            let mut dense: Option<Vec<Complex64>> = None;
            for op in circuit.ops() {
                match dense.as_mut() {
                    Some(amps) => apply_op_dense(amps, op, params),
                    None => {
                        map = apply_op_sparse(&map, op, params);
                        if map.len() * DENSIFY_DIVISOR > dim {
                            let mut amps = vec![ZERO; dim];
                            for (&i, &a) in &map {
                                amps[i] = a;
                            }
                            dense = Some(amps);
                        }
                    }
                }
            }
            match dense {
                Some(amps) => QuantumState {
                    num_qubits: state.num_qubits(),
                    data: StateData::Dense(amps),
                },
                None => QuantumState {
                    num_qubits: state.num_qubits(),
                    data: StateData::Sparse(map.into_iter().collect()),
                },
            }
        }
    };
    debug_assert!(
        (result.norm_sqr() - 1.0).abs() < 1e-9 || (state.norm_sqr() - 1.0).abs() > 1e-9,
        "circuit application broke normalization"
    );
    Ok(result)
}

/// Per-qubit Pauli-Z expectation values of a normalized state.
///
/// Entry `q` is `Σ_i |amp_i|² · (+1 if bit q of i is 0 else −1)`, clamped to
/// `[-1, 1]` against floating-point spill.
pub fn pauli_z_expectations(state: &QuantumState) -> Vec<f64> {
    let q = state.num_qubits();
    let mut one_mass = vec![0.0f64; q];
    let mut add = |index: usize, amp: &Complex64| {
        let p = amp.norm_sqr();
        if p == 0.0 {
            return;
        }
        let mut bits = index;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            one_mass[k] += p;
            bits &= bits - 1;
        }
    };
    match state.data() {
        StateData::Dense(v) => {
            for (i, a) in v.iter().enumerate() {
                add(i, a);
            }
        }
        StateData::Sparse(v) => {
            for (i, a) in v {
                add(*i, a);
            }
        }
    }
    one_mass
        .into_iter()
        .map(|p1| (1.0 - 2.0 * p1).clamp(-1.0, 1.0))
        .collect()
}
