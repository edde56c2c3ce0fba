use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Monte-Carlo bit and block error tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub trials: u64,
    pub bit_errors: u64,
    pub block_errors: u64,
    pub k: usize,
    /// The trial cap ended the run before the error target was reached.
    #[serde(default)]
    pub capped: bool,
}

impl ErrorStats {
    pub fn new(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn record_block(&mut self, bit_errors: usize) {
        debug_assert!(bit_errors <= self.k);
        self.trials += 1;
        self.bit_errors += bit_errors as u64;
        self.block_errors += (bit_errors > 0) as u64;
    }

    pub fn record_blocks(&mut self, per_block: impl IntoIterator<Item = usize>) {
        for e in per_block {
            self.record_block(e);
        }
    }

    pub fn merge(&mut self, other: &ErrorStats) {
        assert_eq!(self.k, other.k, "merging stats of different message lengths");
        self.trials += other.trials;
        self.bit_errors += other.bit_errors;
        self.block_errors += other.block_errors;
        self.capped |= other.capped;
    }

    pub fn bits(&self) -> u64 {
        self.trials * self.k as u64
    }

    pub fn ber(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.bit_errors as f64 / self.bits() as f64
    }

    pub fn bler(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.block_errors as f64 / self.trials as f64
    }

    /// Binomial standard error of the BER estimate, treating bits as independent.
    pub fn ber_std_error(&self) -> f64 {
        binomial_se(self.ber(), self.bits())
    }

    pub fn bler_std_error(&self) -> f64 {
        binomial_se(self.bler(), self.trials)
    }

    pub fn ber_half_width(&self) -> f64 {
        Z_95 * self.ber_std_error()
    }

    pub fn bler_half_width(&self) -> f64 {
        Z_95 * self.bler_std_error()
    }
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arithmetic() {
        let mut s = ErrorStats::new(4);
        s.record_blocks([0, 2, 0, 4]);
        assert_eq!((s.trials, s.bit_errors, s.block_errors), (4, 6, 2));
        assert_eq!(s.ber(), 6.0 / 16.0);
        assert_eq!(s.bler(), 0.5);
        assert!((s.bler_half_width() - Z_95 * (0.25f64 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(ErrorStats::new(3).ber(), 0.0);
    }

    proptest! {
        #[test]
        fn bler_dominates_ber(blocks in proptest::collection::vec(0usize..=6, 1..50)) {
            let mut a = ErrorStats::new(6);
            a.record_blocks(blocks.iter().copied());
            prop_assert!(a.bler() >= a.ber());
            prop_assert!((0.0..=1.0).contains(&a.ber()) && (0.0..=1.0).contains(&a.bler()));

            let (left, right) = blocks.split_at(blocks.len() / 2);
            let mut l = ErrorStats::new(6);
            l.record_blocks(left.iter().copied());
            let mut r = ErrorStats::new(6);
            r.record_blocks(right.iter().copied());
            l.merge(&r);
            prop_assert_eq!(l, a);
        }
    }
}
