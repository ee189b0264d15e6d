//! Two-level boolean minimization used to shrink the multi-controlled-X
//! count of NEQR preparation circuits.
//!
//! Each color bit plane is a boolean function of the position variables, and
//! each implicant of its cover becomes one controlled flip of the color
//! qubit. A flip is a parity operation, not an OR: a minterm covered by two
//! implicants would be flipped twice and read back as 0. The cover therefore
//! has to be *exact* in the set-partition sense, each on-set input covered
//! by exactly one implicant and off-set inputs by none. Quine-McCluskey
//! combining enumerates every cube lying inside the on-set, and a greedy
//! pass then picks maximal cubes that fit in the still-uncovered remainder.
//! At the sizes that occur here (at most 4 variables) this is instant.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::simulator::{Control, GateOp};

/// A boolean function given by its on-set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolFunction {
    num_vars: u32,
    minterms: BTreeSet<u32>,
}

impl BoolFunction {
    pub fn new(num_vars: u32, minterms: impl IntoIterator<Item = u32>) -> Result<Self> {
        if num_vars > 16 {
            return Err(Error::config(format!(
                "boolean minimization supports at most 16 variables, got {num_vars}"
            )));
        }
        let limit = 1u32 << num_vars;
        let minterms: BTreeSet<u32> = minterms.into_iter().collect();
        if let Some(&m) = minterms.iter().next_back() {
            if m >= limit {
                return Err(Error::contract(format!(
                    "minterm {m} out of range for {num_vars} variables"
                )));
            }
        }
        Ok(Self { num_vars, minterms })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn minterms(&self) -> &BTreeSet<u32> {
        &self.minterms
    }

    pub fn evaluate(&self, input: u32) -> bool {
        self.minterms.contains(&input)
    }
}

/// A product term: matches `x` iff `x & care_mask == value_mask`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Implicant {
    pub care_mask: u32,
    pub value_mask: u32,
}

impl Implicant {
    pub fn covers(&self, input: u32) -> bool {
        input & self.care_mask == self.value_mask
    }
}

/// Overlap-free cover of `f`'s on-set by cubes.
///
/// Every on-set input is covered by exactly one returned implicant, every
/// off-set input by none (no don't-cares), so one controlled flip per
/// implicant realizes `f` exactly. Quine-McCluskey combining enumerates all
/// cubes inside the on-set; the cover then greedily takes the largest cube
/// fitting in the uncovered remainder (ties: smallest value_mask, then
/// smallest care_mask). Output is sorted, so equal functions give identical
/// covers.
pub fn minimize_cover(f: &BoolFunction) -> Vec<Implicant> {
    if f.minterms.is_empty() {
        return Vec::new();
    }
    let full = (1u32 << f.num_vars).wrapping_sub(1);

    // Combining pass: level k holds the cubes of 2^k inputs lying wholly in
    // the on-set. Keep them all, not just the primes; a disjoint cover may
    // need sub-prime cubes.
    let mut level: BTreeSet<Implicant> = f
        .minterms
        .iter()
        .map(|&m| Implicant {
            care_mask: full,
            value_mask: m,
        })
        .collect();
    let mut cubes: Vec<Implicant> = Vec::new();
    while !level.is_empty() {
        cubes.extend(level.iter().copied());
        let items: Vec<Implicant> = level.iter().copied().collect();
        let mut next = BTreeSet::new();
        for i in 0..items.len() {
            for j in (i + 1)..items.len() {
                let (a, b) = (items[i], items[j]);
                let diff = a.value_mask ^ b.value_mask;
                if a.care_mask == b.care_mask && diff.count_ones() == 1 {
                    next.insert(Implicant {
                        care_mask: a.care_mask & !diff,
                        value_mask: a.value_mask & !diff,
                    });
                }
            }
        }
        level = next;
    }

    let mut uncovered = f.minterms.clone();
    let mut cover = Vec::new();
    while !uncovered.is_empty() {
        let best = cubes
            .iter()
            .filter(|c| cube_inputs(c, full).all(|x| uncovered.contains(&x)))
            .max_by(|a, b| {
                let size = |c: &Implicant| full & !c.care_mask; // more free bits = bigger
                size(a)
                    .count_ones()
                    .cmp(&size(b).count_ones())
                    .then(b.value_mask.cmp(&a.value_mask))
                    .then(b.care_mask.cmp(&a.care_mask))
            })
            .copied()
            .expect("singleton cubes always remain available");
        for x in cube_inputs(&best, full) {
            uncovered.remove(&x);
        }
        cover.push(best);
    }
    cover.sort_unstable();
    cover
}

/// All inputs matched by a cube, given the full variable mask.
fn cube_inputs(cube: &Implicant, full: u32) -> impl Iterator<Item = u32> + '_ {
    let free = full & !cube.care_mask;
    let mut subset = Some(0u32);
    std::iter::from_fn(move || {
        let s = subset?;
        subset = if s == free {
            None
        } else {
            // Next subset of `free` in counting order.
            Some(s.wrapping_sub(free) & free)
        };
        Some(cube.value_mask | s)
    })
}

/// One controlled-X per implicant: cared variables become controls on the
/// given position qubits (polarity from the value bit), the empty-care
/// implicant becomes a plain X.
pub fn implicants_to_gates(
    cover: &[Implicant],
    target: usize,
    position_qubits: &[usize],
) -> Result<Vec<GateOp>> {
    let mut gates = Vec::with_capacity(cover.len());
    for imp in cover {
        if imp.value_mask & !imp.care_mask != 0 {
            return Err(Error::contract(
                "implicant has value bits outside its care set",
            ));
        }
        if imp.care_mask != 0 && (imp.care_mask >> position_qubits.len()) != 0 {
            return Err(Error::contract(format!(
                "implicant cares about variable {} but only {} position qubits given",
                31 - imp.care_mask.leading_zeros(),
                position_qubits.len()
            )));
        }
        if imp.care_mask == 0 {
            gates.push(GateOp::pauli_x(target));
            continue;
        }
        let controls = (0..position_qubits.len() as u32)
            .filter(|v| imp.care_mask >> v & 1 == 1)
            .map(|v| Control::matching_bit(position_qubits[v as usize], imp.value_mask >> v & 1 == 1))
            .collect();
        gates.push(GateOp::multi_controlled_x(controls, target));
    }
    Ok(gates)
}
