use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_BRANCH_QUBITS: u32 = 24;

/// One branch of `n` fair quantum coin flips. Bit `i` set means heads on flip `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub bits: u32,
    pub heads: u32,
    pub weight: f64,
    pub heads_frequency: f64,
    pub fluke: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSummary {
    pub n: u32,
    pub epsilon: f64,
    pub branches: u64,
    pub all_heads_weight: f64,
    /// Total weight of branches with exactly `k` heads, `k = 0..=n`.
    pub weight_by_heads: Vec<f64>,
    pub fluke_branches: u64,
    pub fluke_weight: f64,
}

/// Lazy enumeration of all `2ⁿ` branches.
#[derive(Debug, Clone, Copy)]
pub struct BranchEnumeration {
    n: u32,
    epsilon: f64,
}

/// Branches of `n ≤ 24` flips; a branch is a fluke when
/// `|heads/n − ½| > epsilon`.
pub fn enumerate_branches(n: u32, epsilon: f64) -> Result<BranchEnumeration> {
    if n == 0 || n > MAX_BRANCH_QUBITS {
        return Err(Error::InvalidParameter(format!(
            "branch enumeration needs 1 ≤ n ≤ {MAX_BRANCH_QUBITS}, got {n}"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be ≥ 0")));
    }
    Ok(BranchEnumeration { n, epsilon })
}

impl BranchEnumeration {
    pub fn weight(&self) -> f64 {
        0.5f64.powi(self.n as i32)
    }

    fn is_fluke(&self, heads: u32) -> bool {
        // Compare on counts so exact boundaries are not flagged by rounding.
        (heads as f64 - self.n as f64 / 2.0).abs() > self.epsilon * self.n as f64 + 1e-9
    }

    pub fn branch(&self, bits: u32) -> Branch {
        let heads = bits.count_ones();
        Branch {
            bits,
            heads,
            weight: self.weight(),
            heads_frequency: heads as f64 / self.n as f64,
            fluke: self.is_fluke(heads),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Branch> + '_ {
        (0..(1u32 << self.n)).map(|b| self.branch(b))
    }

    /// Branch bit string, flip 0 first.
    pub fn bitstring(&self, bits: u32) -> String {
        (0..self.n).map(|i| if (bits >> i) & 1 == 1 { 'H' } else { 'T' }).collect()
    }

    pub fn summary(&self) -> BranchSummary {
        let mut by_heads = vec![0u64; self.n as usize + 1];
        for b in self.iter() {
            by_heads[b.heads as usize] += 1;
        }
        let w = self.weight();
        let fluke_branches: u64 = (0..=self.n).filter(|&k| self.is_fluke(k)).map(|k| by_heads[k as usize]).sum();
        BranchSummary {
            n: self.n,
            epsilon: self.epsilon,
            branches: 1u64 << self.n,
            all_heads_weight: self.branch((1u32 << self.n) - 1).weight,
            // Counts ≤ 2²⁴ times a power of two: exact.
            weight_by_heads: by_heads.iter().map(|&c| c as f64 * w).collect(),
            fluke_branches,
            fluke_weight: fluke_branches as f64 * w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(enumerate_branches(25, 0.1).is_err());
        assert!(enumerate_branches(0, 0.1).is_err());
        assert_eq!(enumerate_branches(3, 0.0).unwrap().iter().count(), 8);
    }

    #[test]
    fn extremes_are_flukes() {
        let e = enumerate_branches(4, 0.1).unwrap();
        assert!(e.branch(0b1111).fluke);
        assert!(!e.branch(0b0101).fluke);
        assert_eq!(e.bitstring(0b0001), "HTTT");
    }
}
