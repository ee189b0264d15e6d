//! Closed-form resource counts per image: patches, qubits, gates and
//! classical parameters for each encoder configuration.
//!
//! Two gate counters coexist on purpose. The *formula* counter
//! ([`gate_count`]) does hardware-style bookkeeping where a multi-controlled
//! NOT costs `3·2^{2n+1} − 5` elementary gates (15 for a Toffoli), which is
//! what the published per-configuration totals use. The *actual* counter
//! ([`actual_gate_count`]) is the simulated circuit length, where a
//! multi-controlled X is one primitive. They are not expected to agree.
//!
//! One bookkeeping wart is reproduced deliberately: the NEQR worst-case
//! `W(n)` includes the 2n Hadamards for n=1 but not for n=2, because that is
//! how the published totals come out.

use crate::encoders::EncoderKind;
use crate::error::{Error, Result};
use crate::simulator::Circuit;

/// Per-image resource usage of one encoder configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceCount {
    /// Patches per image, N.
    pub patches: u64,
    /// Qubits per patch circuit, Q.
    pub qubits: u64,
    /// Formula gate count per image, G (exact for threshold/FRQI, upper
    /// bound for NEQR).
    pub gates: u64,
    /// Classical parameters of the linear head, P = N·Q·C.
    pub params: u64,
    /// NEQR only: worst-case encoding gates per patch, W(n).
    pub neqr_worst_case: Option<u64>,
}

fn check_n(n: u32) -> Result<()> {
    if !(1..=2).contains(&n) {
        return Err(Error::config(format!(
            "resource formulas cover n in {{1, 2}}, got n={n}"
        )));
    }
    Ok(())
}

/// `N = (⌊(h−F)/S⌋+1)·(⌊(w−F)/S⌋+1)` patches per `h×w` image.
pub fn patch_count(image_h: u64, image_w: u64, filter_edge: u64, stride: u64) -> Result<u64> {
    if stride == 0 {
        return Err(Error::config("stride must be at least 1"));
    }
    if filter_edge == 0 || image_h < filter_edge || image_w < filter_edge {
        return Err(Error::config(format!(
            "filter {filter_edge} does not fit image {image_h}x{image_w}"
        )));
    }
    Ok(((image_h - filter_edge) / stride + 1) * ((image_w - filter_edge) / stride + 1))
}

/// Qubits per patch: threshold `2^{2n}`, FRQI `2n+1` (+3 work qubits when
/// n=2), NEQR `8+2n`.
pub fn qubit_count(encoder: EncoderKind, n: u32) -> Result<u64> {
    check_n(n)?;
    Ok(match encoder {
        EncoderKind::Threshold => 1 << (2 * n),
        EncoderKind::Frqi => {
            if n == 1 {
                3
            } else {
                8
            }
        }
        EncoderKind::Neqr => 8 + 2 * u64::from(n),
    })
}

/// Elementary-gate cost of a multi-controlled NOT over `2n` controls:
/// 15 for the Toffoli (n=1), `3·2^{2n+1} − 5` beyond that.
fn mcx_cost(n: u32) -> u64 {
    if n == 1 {
        15
    } else {
        3 * (1u64 << (2 * n + 1)) - 5
    }
}

/// NEQR worst-case encoding gates per patch,
/// `W(n) = [2n Hadamards, n=1 only] + n·2^{2n+1} NOTs + 2^{2n}·8·mcx_cost(n)`.
pub fn neqr_worst_case(n: u32) -> Result<u64> {
    check_n(n)?;
    let hadamards = if n == 1 { 2 * u64::from(n) } else { 0 };
    let nots = u64::from(n) * (1u64 << (2 * n + 1));
    let mcxs = (1u64 << (2 * n)) * 8 * mcx_cost(n);
    Ok(hadamards + nots + mcxs)
}

/// Formula gate count per image: threshold `N·(2^{2n}+R)`, FRQI
/// `N·(2^{4n}+R)`, NEQR `N·(R+W(n))`.
pub fn gate_count(encoder: EncoderKind, n: u32, patches: u64, rotations: u64) -> Result<u64> {
    check_n(n)?;
    let per_patch = match encoder {
        EncoderKind::Threshold => (1u64 << (2 * n)) + rotations,
        EncoderKind::Frqi => (1u64 << (4 * n)) + rotations,
        EncoderKind::Neqr => rotations + neqr_worst_case(n)?,
    };
    Ok(patches * per_patch)
}

/// Classical parameters of the linear head, `P = N·Q·C`.
pub fn classical_param_count(patches: u64, qubits: u64, num_classes: u64) -> u64 {
    patches * qubits * num_classes
}

/// Length of a simulated circuit's op list. Multi-controlled gates count as
/// one; this is deliberately not the formula counter.
pub fn actual_gate_count(circuit: &Circuit) -> usize {
    circuit.len()
}

/// Full [`ResourceCount`] for one configuration of an `image_h × image_w`
/// input. `filter_edge` must be a power of two (2 or 4 in practice).
pub fn resources(
    encoder: EncoderKind,
    image_h: u64,
    image_w: u64,
    filter_edge: u64,
    stride: u64,
    rotations: u64,
    num_classes: u64,
) -> Result<ResourceCount> {
    if !filter_edge.is_power_of_two() {
        return Err(Error::config(format!(
            "filter edge {filter_edge} is not a power of two"
        )));
    }
    let n = filter_edge.trailing_zeros();
    let patches = patch_count(image_h, image_w, filter_edge, stride)?;
    let qubits = qubit_count(encoder, n)?;
    Ok(ResourceCount {
        patches,
        qubits,
        gates: gate_count(encoder, n, patches, rotations)?,
        params: classical_param_count(patches, qubits, num_classes),
        neqr_worst_case: match encoder {
            EncoderKind::Neqr => Some(neqr_worst_case(n)?),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::encoders::{encode_neqr, ImagePatch};

    #[test]
    fn patch_count_formula() {
        assert_eq!(patch_count(14, 14, 2, 1).unwrap(), 169);
        assert_eq!(patch_count(14, 14, 4, 2).unwrap(), 36);
        assert_eq!(patch_count(2, 2, 2, 1).unwrap(), 1);
        assert!(patch_count(3, 3, 4, 1).is_err());
        assert!(patch_count(4, 4, 4, 0).is_err());
    }

    #[test]
    fn qubit_counts_per_encoder() {
        assert_eq!(qubit_count(EncoderKind::Threshold, 1).unwrap(), 4);
        assert_eq!(qubit_count(EncoderKind::Threshold, 2).unwrap(), 16);
        assert_eq!(qubit_count(EncoderKind::Frqi, 1).unwrap(), 3);
        assert_eq!(qubit_count(EncoderKind::Frqi, 2).unwrap(), 8);
        assert_eq!(qubit_count(EncoderKind::Neqr, 1).unwrap(), 10);
        assert_eq!(qubit_count(EncoderKind::Neqr, 2).unwrap(), 12);
        assert!(qubit_count(EncoderKind::Frqi, 3).is_err());
    }

    #[test]
    fn gate_count_reproduces_published_totals() {
        assert_eq!(gate_count(EncoderKind::Frqi, 1, 169, 4).unwrap(), 3380);
        assert_eq!(gate_count(EncoderKind::Threshold, 1, 169, 4).unwrap(), 1352);
        assert_eq!(gate_count(EncoderKind::Frqi, 2, 36, 10).unwrap(), 9576);
        assert_eq!(gate_count(EncoderKind::Threshold, 2, 36, 10).unwrap(), 936);
        assert_eq!(gate_count(EncoderKind::Neqr, 1, 169, 4).unwrap(), 83486);
        assert_eq!(gate_count(EncoderKind::Neqr, 2, 36, 10).unwrap(), 421992);
    }

    #[test]
    fn neqr_worst_case_values() {
        assert_eq!(neqr_worst_case(1).unwrap(), 490);
        assert_eq!(neqr_worst_case(2).unwrap(), 11712);
    }

    #[test]
    fn param_count_examples() {
        assert_eq!(classical_param_count(169, 10, 10), 16900);
        assert_eq!(classical_param_count(36, 16, 10), 5760);
        assert_eq!(classical_param_count(1, 1, 10), 10);
    }

    #[test]
    fn gate_count_is_monotone() {
        for encoder in EncoderKind::ALL {
            for n in [1u32, 2] {
                let base = gate_count(encoder, n, 10, 4).unwrap();
                assert!(gate_count(encoder, n, 11, 4).unwrap() > base);
                assert!(gate_count(encoder, n, 10, 5).unwrap() > base);
            }
        }
    }

    #[test]
    fn actual_count_is_circuit_length() {
        assert_eq!(actual_gate_count(&Circuit::new(2).unwrap()), 0);

        let (c, _) = encode_neqr(&ImagePatch::new(1, vec![255; 4]).unwrap(), true).unwrap();
        assert_eq!(actual_gate_count(&c), 10);

        let (c, _) = crate::encoders::encode_threshold(
            &ImagePatch::new(2, vec![255; 16]).unwrap(),
            crate::encoders::ThresholdConfig { t: 127 },
        )
        .unwrap();
        assert_eq!(actual_gate_count(&c), 16);
    }

    #[test]
    fn minimized_counts_stay_under_worst_case() {
        let mut rng = crate::rng::SplitMix64::new(23);
        for n in [1u32, 2] {
            let num = 1usize << (2 * n);
            for _ in 0..100 {
                let pixels: Vec<u8> = (0..num).map(|_| rng.below(256) as u8).collect();
                let p = ImagePatch::new(n, pixels).unwrap();
                let (minimized, _) = encode_neqr(&p, true).unwrap();
                let (plain, _) = encode_neqr(&p, false).unwrap();
                let w = neqr_worst_case(n).unwrap() as usize;
                assert!(minimized.len() <= plain.len());
                assert!(plain.len() <= w);
            }
        }
    }

    #[test]
    fn resources_assembles_table_rows() {
        let r = resources(EncoderKind::Neqr, 14, 14, 2, 1, 4, 10).unwrap();
        assert_eq!(
            r,
            ResourceCount {
                patches: 169,
                qubits: 10,
                gates: 83486,
                params: 16900,
                neqr_worst_case: Some(490),
            }
        );
        let r = resources(EncoderKind::Threshold, 14, 14, 4, 2, 10, 10).unwrap();
        assert_eq!(r.params, 5760);
        assert_eq!(r.gates, 936);
        assert!(resources(EncoderKind::Frqi, 14, 14, 3, 1, 4, 10).is_err());
    }
}
