//! Index bookkeeping for operators acting on a subset of register qubits.
//!
//! Qubit 0 is the most significant bit of a basis index. Within a local
//! operator, `targets[0]` is the most significant bit of the local index.

use num_complex::Complex64;

use super::matrix::{CMatrix, ZERO};
use crate::error::{Error, Result};

#[inline]
pub(crate) fn qubit_mask(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

pub(crate) fn validate_targets(num_qubits: usize, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= num_qubits {
            return Err(Error::QubitOutOfRange {
                qubit: t,
                num_qubits,
            });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

/// Offsets of the local basis states and the base indices of the complementary
/// subspace.
pub(crate) struct Subspace {
    pub offsets: Vec<usize>,
    pub bases: Vec<usize>,
}

impl Subspace {
    pub fn new(num_qubits: usize, targets: &[usize]) -> Self {
        let k = targets.len();
        let masks: Vec<usize> = targets.iter().map(|&t| qubit_mask(num_qubits, t)).collect();
        let offsets = (0..1usize << k)
            .map(|local| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| local & (1 << (k - 1 - j)) != 0)
                    .map(|(_, &m)| m)
                    .sum()
            })
            .collect();
        let target_mask: usize = masks.iter().sum();
        let bases = (0..1usize << num_qubits)
            .filter(|i| i & target_mask == 0)
            .collect();
        Self { offsets, bases }
    }
}

/// `v <- U v` restricted to `targets`.
pub(crate) fn apply_to_vector(v: &mut [Complex64], num_qubits: usize, u: &CMatrix, targets: &[usize]) {
    let sub = Subspace::new(num_qubits, targets);
    let d = u.dim();
    let mut buf = vec![ZERO; d];
    for &base in &sub.bases {
        for (b, &off) in buf.iter_mut().zip(&sub.offsets) {
            *b = v[base + off];
        }
        for (a, &off) in sub.offsets.iter().enumerate() {
            v[base + off] = u.row(a).iter().zip(&buf).map(|(x, y)| x * y).sum();
        }
    }
}

/// `M <- U M` where U acts on `targets` of the row index.
pub(crate) fn apply_left(m: &mut CMatrix, num_qubits: usize, u: &CMatrix, targets: &[usize]) {
    let sub = Subspace::new(num_qubits, targets);
    let n = m.dim();
    let d = u.dim();
    let mut rows = vec![ZERO; d * n];
    let data = m.as_mut_slice();
    for &base in &sub.bases {
        for (b, &off) in sub.offsets.iter().enumerate() {
            let r = base + off;
            rows[b * n..(b + 1) * n].copy_from_slice(&data[r * n..(r + 1) * n]);
        }
        for (a, &off) in sub.offsets.iter().enumerate() {
            let r = base + off;
            let out = &mut data[r * n..(r + 1) * n];
            out.fill(ZERO);
            for (b, &coef) in u.row(a).iter().enumerate() {
                if coef == ZERO {
                    continue;
                }
                for (o, &x) in out.iter_mut().zip(&rows[b * n..(b + 1) * n]) {
                    *o += coef * x;
                }
            }
        }
    }
}

/// `M <- M U†` where U acts on `targets` of the column index.
pub(crate) fn apply_right_adjoint(m: &mut CMatrix, num_qubits: usize, u: &CMatrix, targets: &[usize]) {
    let sub = Subspace::new(num_qubits, targets);
    let n = m.dim();
    let d = u.dim();
    let conj: Vec<Complex64> = u.as_slice().iter().map(|x| x.conj()).collect();
    let mut buf = vec![ZERO; d];
    let data = m.as_mut_slice();
    for row in data.chunks_exact_mut(n) {
        for &base in &sub.bases {
            for (b, &off) in buf.iter_mut().zip(&sub.offsets) {
                *b = row[base + off];
            }
            for (a, &off) in sub.offsets.iter().enumerate() {
                row[base + off] = conj[a * d..(a + 1) * d]
                    .iter()
                    .zip(&buf)
                    .map(|(x, y)| x * y)
                    .sum();
            }
        }
    }
}

/// Applies a row-major superoperator (acting on vec(B) of every local block B).
pub(crate) fn apply_superoperator(m: &mut CMatrix, num_qubits: usize, superop: &CMatrix, targets: &[usize]) {
    let sub = Subspace::new(num_qubits, targets);
    let n = m.dim();
    let d = sub.offsets.len();
    let mut block = vec![ZERO; d * d];
    let data = m.as_mut_slice();
    for &rb in &sub.bases {
        for &cb in &sub.bases {
            for (a, &ra) in sub.offsets.iter().enumerate() {
                let row = (rb + ra) * n + cb;
                for (b, &cbo) in sub.offsets.iter().enumerate() {
                    block[a * d + b] = data[row + cbo];
                }
            }
            for (a, &ra) in sub.offsets.iter().enumerate() {
                let row = (rb + ra) * n + cb;
                for (b, &cbo) in sub.offsets.iter().enumerate() {
                    data[row + cbo] = superop
                        .row(a * d + b)
                        .iter()
                        .zip(&block)
                        .map(|(x, y)| x * y)
                        .sum();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_follow_target_order() {
        let sub = Subspace::new(3, &[2, 0]);
        // targets[0] = qubit 2 (mask 1) is the local MSB.
        assert_eq!(sub.offsets, vec![0, 4, 1, 5]);
        assert_eq!(sub.bases, vec![0, 2]);
    }

    #[test]
    fn duplicate_and_range_checks() {
        assert!(matches!(validate_targets(2, &[0, 0]), Err(Error::DuplicateTarget(0))));
        assert!(matches!(
            validate_targets(2, &[2]),
            Err(Error::QubitOutOfRange { qubit: 2, .. })
        ));
        assert!(validate_targets(2, &[1, 0]).is_ok());
    }
}
